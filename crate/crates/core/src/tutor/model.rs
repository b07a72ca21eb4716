use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cost::{charge, CostEntry, CostParams};
use super::table::{instantiate, ActionTable, Outcome, Situation};
use crate::dialogue::{ActKind, Actor, DialogueAct, DialogueContext, TemplateLexicon};
use crate::error::{Error, Result};
use crate::world::{Category, VisualObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TutorConfig {
    /// Chance that the tutor opens a dialogue with a question.
    pub initiative_prob: f64,
    /// Chance of appending a `Check()` after giving information.
    pub check_prob: f64,
    /// Chance of pointing at the attribute before stating it.
    pub focus_prob: f64,
    pub costs: CostParams,
}

impl Default for TutorConfig {
    fn default() -> Self {
        Self { initiative_prob: 0.5, check_prob: 0.0, focus_prob: 0.0, costs: CostParams::default() }
    }
}

impl TutorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("initiative_prob", self.initiative_prob),
            ("check_prob", self.check_prob),
            ("focus_prob", self.focus_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let c = self.costs;
        if [c.inform, c.ack, c.correction].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig("tutoring costs must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TutorTurn {
    pub acts: Vec<DialogueAct>,
    pub utterance: String,
    pub costs: Vec<CostEntry>,
}

/// A truthful simulated tutor. A fitted action table, if given, decides the
/// reply where it has an entry; everything else follows a fixed mapping.
#[derive(Debug, Clone)]
pub struct TutorModel {
    pub config: TutorConfig,
    pub table: ActionTable,
    lexicon: TemplateLexicon,
}

fn tutor(kind: ActKind, cats: impl IntoIterator<Item = Category>) -> DialogueAct {
    DialogueAct::about(Actor::Tutor, kind, cats)
}

fn inform_truth(cats: impl IntoIterator<Item = Category>, truth: &VisualObject) -> DialogueAct {
    DialogueAct::with_words(Actor::Tutor, ActKind::Inform, cats.into_iter().map(|c| (c, truth.label(c))))
}

fn sample<'a, R: Rng + ?Sized>(outcomes: &'a [Outcome], rng: &mut R) -> Option<&'a Outcome> {
    match outcomes.len() {
        0 => None,
        1 => Some(&outcomes[0]),
        _ => {
            let dist = WeightedIndex::new(outcomes.iter().map(|o| o.weight)).ok()?;
            Some(&outcomes[dist.sample(rng)])
        }
    }
}

impl TutorModel {
    pub fn new(config: TutorConfig, lexicon: TemplateLexicon) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, table: ActionTable { order: 1, ..Default::default() }, lexicon })
    }

    pub fn with_table(mut self, table: ActionTable) -> Self {
        self.table = table;
        self
    }

    pub fn lexicon(&self) -> &TemplateLexicon {
        &self.lexicon
    }

    /// The tutor's first move for a new object; empty when the learner should
    /// speak first.
    pub fn open_dialogue<R: Rng + ?Sized>(&self, truth: &VisualObject, rng: &mut R) -> Result<TutorTurn> {
        let acts = if let Some(o) = sample(&self.table.openings, rng) {
            instantiate(&o.acts, truth)
        } else if rng.random::<f64>() < self.config.initiative_prob {
            vec![tutor(ActKind::Ask, Category::ALL)]
        } else {
            Vec::new()
        };
        self.finish(None, acts, rng)
    }

    /// Answers one learner act about `truth`.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        learner_act: &DialogueAct,
        ctx: &DialogueContext,
        truth: &VisualObject,
        rng: &mut R,
    ) -> Result<TutorTurn> {
        if learner_act.actor != Actor::Learner {
            return Err(Error::IllegalAct(format!("tutor cannot answer its own act {learner_act}")));
        }
        learner_act.validate()?;
        let prev = ctx.last_turn_by(Actor::Tutor).and_then(|t| t.acts.first()).map(|a| a.kind);
        let situation = Situation::of(learner_act, truth, prev);
        let mut acts = match self.table.lookup(&situation).and_then(|o| sample(o, rng)) {
            Some(o) => instantiate(&o.acts, truth),
            None => default_reply(learner_act, ctx, truth),
        };
        self.flourish(&mut acts, rng);
        self.finish(Some(learner_act), acts, rng)
    }

    fn flourish<R: Rng + ?Sized>(&self, acts: &mut Vec<DialogueAct>, rng: &mut R) {
        let Some(first_inform) = acts.iter().position(|a| a.kind == ActKind::Inform) else {
            return;
        };
        if self.config.focus_prob > 0.0 && rng.random::<f64>() < self.config.focus_prob {
            let cats: Vec<Category> = acts[first_inform].categories().collect();
            if cats.len() == 1 {
                acts.insert(first_inform, tutor(ActKind::Focus, cats));
            }
        }
        if self.config.check_prob > 0.0 && rng.random::<f64>() < self.config.check_prob {
            acts.push(DialogueAct::new(Actor::Tutor, ActKind::Check));
        }
    }

    fn finish<R: Rng + ?Sized>(
        &self,
        learner_act: Option<&DialogueAct>,
        acts: Vec<DialogueAct>,
        rng: &mut R,
    ) -> Result<TutorTurn> {
        let utterance = if acts.is_empty() { String::new() } else { self.lexicon.generate_turn(&acts, rng)? };
        let costs = charge(&self.config.costs, learner_act, &acts);
        Ok(TutorTurn { acts, utterance, costs })
    }
}

/// The fixed reply mapping used when no table entry applies.
pub fn default_reply(learner_act: &DialogueAct, ctx: &DialogueContext, truth: &VisualObject) -> Vec<DialogueAct> {
    let open: Vec<Category> = Category::ALL.into_iter().filter(|c| !ctx.provided.contains(c)).collect();
    let ask_open = || {
        if open.is_empty() {
            vec![DialogueAct::new(Actor::Tutor, ActKind::Listen)]
        } else {
            vec![tutor(ActKind::Ask, open.clone())]
        }
    };
    let pending_ask = || ctx.open_question().cloned();
    match learner_act.kind {
        ActKind::Inform | ActKind::Polar => {
            let (right, wrong): (Vec<Category>, Vec<Category>) =
                learner_act.categories().partition(|c| learner_act.word(*c) == Some(truth.label(*c)));
            if wrong.is_empty() {
                vec![tutor(ActKind::Ack, [])]
            } else if right.is_empty() {
                vec![tutor(ActKind::Reject, []), inform_truth(wrong, truth)]
            } else {
                vec![tutor(ActKind::Ack, right), tutor(ActKind::Reject, wrong.clone()), inform_truth(wrong, truth)]
            }
        }
        ActKind::Ask | ActKind::DoNotKnow => vec![inform_truth(learner_act.categories(), truth)],
        ActKind::Listen | ActKind::Ack => match pending_ask() {
            Some(ask) => vec![DialogueAct::new(Actor::Tutor, ActKind::Repeat), ask],
            None => ask_open(),
        },
        ActKind::CLrRequest => {
            let mut acts = vec![DialogueAct::new(Actor::Tutor, ActKind::CLr)];
            if let Some(ask) = pending_ask() {
                acts.push(ask);
            }
            acts
        }
        ActKind::HelpRequest => {
            let mut acts = vec![DialogueAct::new(Actor::Tutor, ActKind::Help)];
            if !open.is_empty() {
                acts.push(inform_truth(open.clone(), truth));
            }
            acts
        }
        _ => vec![DialogueAct::new(Actor::Tutor, ActKind::Listen)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::format_tags;
    use crate::tutor::cost::total_of;
    use crate::world::AttributeInventory;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn object(colour: &str, shape: &str) -> VisualObject {
        VisualObject {
            id: 0,
            colour: colour.into(),
            shape: shape.into(),
            colour_features: vec![0.0; 3],
            shape_features: vec![0.0; 8],
        }
    }

    fn model() -> TutorModel {
        let lex = TemplateLexicon::english(&AttributeInventory::default()).unwrap();
        TutorModel::new(TutorConfig::default(), lex).unwrap()
    }

    fn reply(tag: &str, truth: &VisualObject) -> TutorTurn {
        let act = DialogueAct::parse_tag(Actor::Learner, tag).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        model().respond(&act, &DialogueContext::new(0), truth, &mut rng).unwrap()
    }

    #[test]
    fn answers_and_prices() {
        let red_square = object("red", "square");
        let t = reply("Ask(colour)", &red_square);
        assert_eq!(format_tags(&t.acts), "Inform(colour:red)");
        assert_eq!(total_of(&t.costs), 5.0);

        let t = reply("Polar(colour:blue)", &red_square);
        assert_eq!(format_tags(&t.acts), "Reject() Inform(colour:red)");
        assert_eq!(total_of(&t.costs), 5.5);

        let t = reply("Inform(colour:blue)", &red_square);
        assert_eq!(total_of(&t.costs), 5.0);

        let t = reply("Inform(colour:red&shape:circle)", &red_square);
        assert_eq!(format_tags(&t.acts), "Ack(colour) Reject(shape) Inform(shape:square)");
        assert!(t.utterance.starts_with("the colour is right, but the shape is not. "), "{}", t.utterance);
        assert!(t.utterance.ends_with("square."));

        let t = reply("Polar(colour:red&shape:square)", &red_square);
        assert_eq!(format_tags(&t.acts), "Ack()");
        assert_eq!(total_of(&t.costs), 0.5);
    }

    #[test]
    fn repeats_unanswered_question() {
        let m = model();
        let truth = object("red", "square");
        let mut ctx = DialogueContext::new(0);
        let ask = DialogueAct::about(Actor::Tutor, ActKind::Ask, [Category::Shape]);
        ctx.record(Actor::Tutor, vec![ask], "and shape?");
        let listen = DialogueAct::new(Actor::Learner, ActKind::Listen);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = m.respond(&listen, &ctx, &truth, &mut rng).unwrap();
        assert_eq!(format_tags(&t.acts), "Repeat() Ask(shape)");
        assert_eq!(total_of(&t.costs), 0.0);
    }

    #[test]
    fn rejects_foreign_acts() {
        let m = model();
        let truth = object("red", "square");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let own = DialogueAct::new(Actor::Tutor, ActKind::Ack);
        assert!(m.respond(&own, &DialogueContext::new(0), &truth, &mut rng).is_err());
        let bad = DialogueAct::about(Actor::Learner, ActKind::Inform, [Category::Colour]);
        assert!(m.respond(&bad, &DialogueContext::new(0), &truth, &mut rng).is_err());
    }

    #[test]
    fn initiative_rate() {
        let m = model();
        let truth = object("red", "square");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opened = (0..4000).filter(|_| !m.open_dialogue(&truth, &mut rng).unwrap().acts.is_empty()).count();
        assert!((opened as f64 / 4000.0 - 0.5).abs() < 0.03, "{opened}");
    }

    #[test]
    fn table_overrides_mapping() {
        let table = ActionTable::from_toml(
            "[[rule]]\nlearner = \"Polar(colour)\"\nwrong = [\"colour\"]\n\
             [[rule.outcome]]\nacts = \"Reject(colour)\"\n",
        )
        .unwrap();
        let m = model().with_table(table);
        let act = DialogueAct::parse_tag(Actor::Learner, "Polar(colour:blue)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = m.respond(&act, &DialogueContext::new(0), &object("red", "square"), &mut rng).unwrap();
        assert_eq!(format_tags(&t.acts), "Reject(colour)");
        assert_eq!(total_of(&t.costs), 0.5);
    }
}
