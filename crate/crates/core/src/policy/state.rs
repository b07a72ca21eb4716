use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dialogue::{ActKind, Actor, DialogueAct, DialogueContext};
use crate::error::{Error, Result};
use crate::vision::{status_with_override, GroundingMap};
use crate::world::{Category, VisualObject};

/// Which categories have come up in the dialogue so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreContext {
    None,
    Colour,
    Shape,
    Both,
}

impl PreContext {
    pub const ALL: [PreContext; 4] = [PreContext::None, PreContext::Colour, PreContext::Shape, PreContext::Both];

    pub fn of(ctx: &DialogueContext) -> Self {
        match (ctx.discussed.contains(&Category::Colour), ctx.discussed.contains(&Category::Shape)) {
            (false, false) => PreContext::None,
            (true, false) => PreContext::Colour,
            (false, true) => PreContext::Shape,
            (true, true) => PreContext::Both,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PreContext::None => "none",
            PreContext::Colour => "colour",
            PreContext::Shape => "shape",
            PreContext::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DialogueState {
    pub c_state: u8,
    pub s_state: u8,
    pub pre_da: Option<ActKind>,
    pub pre_context: PreContext,
}

impl DialogueState {
    /// Upper bound on distinct states: statuses, previous tutor act (or none),
    /// and context.
    pub const SPACE_SIZE: usize = 3 * 3 * (ActKind::ALL.len() + 1) * 4;

    pub fn is_terminal(&self) -> bool {
        self.c_state == 2 && self.s_state == 2
    }

    pub fn status(&self, category: Category) -> u8 {
        match category {
            Category::Colour => self.c_state,
            Category::Shape => self.s_state,
        }
    }

    pub fn index(&self) -> usize {
        let da = self.pre_da.map_or(0, |k| k.index() + 1);
        let ctx = PreContext::ALL.iter().position(|c| *c == self.pre_context).unwrap();
        ((self.c_state as usize * 3 + self.s_state as usize) * (ActKind::ALL.len() + 1) + da) * 4 + ctx
    }
}

impl fmt::Display for DialogueState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let da = self.pre_da.map_or("-", ActKind::name);
        write!(f, "{},{},{},{}", self.c_state, self.s_state, da, self.pre_context.name())
    }
}

impl FromStr for DialogueState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format { line: 0, reason: format!("bad dialogue state `{s}`") };
        let parts: Vec<&str> = s.split(',').collect();
        let [c, sh, da, ctx] = parts[..] else { return Err(bad()) };
        let c_state: u8 = c.parse().map_err(|_| bad())?;
        let s_state: u8 = sh.parse().map_err(|_| bad())?;
        if c_state > 2 || s_state > 2 {
            return Err(bad());
        }
        let pre_da = if da == "-" { None } else { Some(da.parse().map_err(|_| bad())?) };
        let pre_context = PreContext::ALL.into_iter().find(|p| p.name() == ctx).ok_or_else(bad)?;
        Ok(Self { c_state, s_state, pre_da, pre_context })
    }
}

/// The kind of the most informative act in the tutor's last turn.
pub fn pre_da_of(ctx: &DialogueContext) -> Option<ActKind> {
    let turn = ctx.last_turn_by(Actor::Tutor)?;
    let rank = |k: ActKind| match k {
        ActKind::Inform => 0,
        ActKind::Reject => 1,
        ActKind::Ack => 2,
        _ => 3,
    };
    turn.acts.iter().map(|a| a.kind).min_by_key(|k| rank(*k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearnerActKind {
    AskWH,
    AskPolar,
    Inform,
    DoNotKnow,
    Ack,
    Listen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Colour,
    Shape,
    Both,
}

impl Target {
    pub fn categories(self) -> &'static [Category] {
        match self {
            Target::Colour => &[Category::Colour],
            Target::Shape => &[Category::Shape],
            Target::Both => &Category::ALL,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Target::Colour => "colour",
            Target::Shape => "shape",
            Target::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LearnerAction {
    pub kind: LearnerActKind,
    pub target: Target,
}

const fn la(kind: LearnerActKind, target: Target) -> LearnerAction {
    LearnerAction { kind, target }
}

impl LearnerAction {
    /// Canonical order, also used to break ties between equal Q-values.
    pub const ALL: [LearnerAction; 14] = [
        la(LearnerActKind::AskWH, Target::Colour),
        la(LearnerActKind::AskWH, Target::Shape),
        la(LearnerActKind::AskWH, Target::Both),
        la(LearnerActKind::AskPolar, Target::Colour),
        la(LearnerActKind::AskPolar, Target::Shape),
        la(LearnerActKind::AskPolar, Target::Both),
        la(LearnerActKind::Inform, Target::Colour),
        la(LearnerActKind::Inform, Target::Shape),
        la(LearnerActKind::Inform, Target::Both),
        la(LearnerActKind::DoNotKnow, Target::Colour),
        la(LearnerActKind::DoNotKnow, Target::Shape),
        la(LearnerActKind::DoNotKnow, Target::Both),
        la(LearnerActKind::Ack, Target::Both),
        la(LearnerActKind::Listen, Target::Both),
    ];

    pub const ACK: LearnerAction = la(LearnerActKind::Ack, Target::Both);
    pub const LISTEN: LearnerAction = la(LearnerActKind::Listen, Target::Both);

    pub fn new(kind: LearnerActKind, target: Target) -> Self {
        match kind {
            LearnerActKind::Ack | LearnerActKind::Listen => la(kind, Target::Both),
            _ => la(kind, target),
        }
    }
}

impl fmt::Display for LearnerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LearnerActKind::Ack | LearnerActKind::Listen => write!(f, "{:?}", self.kind),
            _ => write!(f, "{:?}({})", self.kind, self.target.name()),
        }
    }
}

impl FromStr for LearnerAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerAction::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::Format { line: 0, reason: format!("unknown learner action `{s}`") })
    }
}

/// What the learner knows at a decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state: DialogueState,
    /// Best word and its confidence, colour first.
    pub best: [(String, f64); 2],
    pub provided: [bool; 2],
    pub threshold: f64,
}

impl Observation {
    pub fn best_for(&self, category: Category) -> (&str, f64) {
        let (w, c) = &self.best[category as usize];
        (w, *c)
    }

    pub fn is_provided(&self, category: Category) -> bool {
        self.provided[category as usize]
    }
}

pub fn observe(map: &GroundingMap, object: &VisualObject, ctx: &DialogueContext, thd: f64) -> Result<Observation> {
    let mut best: [(String, f64); 2] = Default::default();
    let mut provided = [false; 2];
    let mut statuses = [0u8; 2];
    for cat in Category::ALL {
        let i = cat as usize;
        best[i] = map.best_prediction(cat, object.features(cat))?;
        provided[i] = ctx.provided.contains(&cat);
        statuses[i] = status_with_override(best[i].1, thd, provided[i]).level();
    }
    let state = DialogueState {
        c_state: statuses[0],
        s_state: statuses[1],
        pre_da: pre_da_of(ctx),
        pre_context: PreContext::of(ctx),
    };
    Ok(Observation { state, best, provided, threshold: thd })
}

pub fn encode_dialogue_state(
    map: &GroundingMap,
    object: &VisualObject,
    ctx: &DialogueContext,
    thd: f64,
) -> Result<DialogueState> {
    Ok(observe(map, object, ctx, thd)?.state)
}

pub fn is_legal(action: LearnerAction, obs: &Observation) -> bool {
    let cats = action.target.categories();
    let open = || cats.iter().all(|c| !obs.is_provided(*c));
    match action.kind {
        LearnerActKind::Ack | LearnerActKind::Listen => true,
        LearnerActKind::AskWH => open(),
        LearnerActKind::AskPolar | LearnerActKind::Inform => open() && cats.iter().all(|c| obs.best_for(*c).1 > 0.5),
        LearnerActKind::DoNotKnow => open() && cats.iter().all(|c| obs.best_for(*c).1 <= 0.5),
    }
}

/// Legal actions in canonical order.
pub fn legal_actions(obs: &Observation) -> Vec<LearnerAction> {
    LearnerAction::ALL.into_iter().filter(|a| is_legal(*a, obs)).collect()
}

/// The concrete act an abstract action stands for, guessing the best word
/// where one is stated.
pub fn materialize(action: LearnerAction, obs: &Observation) -> DialogueAct {
    let cats = action.target.categories().iter().copied();
    let guess = |kind| {
        DialogueAct::with_words(Actor::Learner, kind, cats.clone().map(|c| (c, obs.best_for(c).0)))
    };
    match action.kind {
        LearnerActKind::AskWH => DialogueAct::about(Actor::Learner, ActKind::Ask, cats.clone()),
        LearnerActKind::AskPolar => guess(ActKind::Polar),
        LearnerActKind::Inform => guess(ActKind::Inform),
        LearnerActKind::DoNotKnow => DialogueAct::about(Actor::Learner, ActKind::DoNotKnow, cats.clone()),
        LearnerActKind::Ack => DialogueAct::new(Actor::Learner, ActKind::Ack),
        LearnerActKind::Listen => DialogueAct::new(Actor::Learner, ActKind::Listen),
    }
}

/// Hand-written baseline: settle colour, then shape, by asking when unsure
/// and checking a guess when fairly sure.
pub fn rule_policy(s: &DialogueState) -> LearnerAction {
    for (status, target) in [(s.c_state, Target::Colour), (s.s_state, Target::Shape)] {
        match status {
            0 => return LearnerAction::new(LearnerActKind::AskWH, target),
            1 => return LearnerAction::new(LearnerActKind::AskPolar, target),
            _ => {}
        }
    }
    LearnerAction::ACK
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldConfig;

    fn obs(c: f64, s: f64, provided: [bool; 2]) -> Observation {
        Observation {
            state: DialogueState { c_state: 0, s_state: 0, pre_da: None, pre_context: PreContext::None },
            best: [("red".into(), c), ("square".into(), s)],
            provided,
            threshold: 0.95,
        }
    }

    #[test]
    fn state_text_and_index() {
        let mut seen = std::collections::HashSet::new();
        for c in 0..3 {
            for s in 0..3 {
                for da in std::iter::once(None).chain(ActKind::ALL.map(Some)) {
                    for ctx in PreContext::ALL {
                        let st = DialogueState { c_state: c, s_state: s, pre_da: da, pre_context: ctx };
                        assert_eq!(st.to_string().parse::<DialogueState>().unwrap(), st);
                        assert!(st.index() < DialogueState::SPACE_SIZE);
                        assert!(seen.insert(st.index()));
                    }
                }
            }
        }
        assert_eq!(seen.len(), DialogueState::SPACE_SIZE);
    }

    #[test]
    fn action_text() {
        for a in LearnerAction::ALL {
            assert_eq!(a.to_string().parse::<LearnerAction>().unwrap(), a);
        }
        assert_eq!(LearnerAction::ALL[0].to_string(), "AskWH(colour)");
        assert_eq!(LearnerAction::ACK.to_string(), "Ack");
    }

    #[test]
    fn fresh_dialogue_state() {
        let world = WorldConfig::default();
        let map = GroundingMap::new(&world);
        let data = crate::world::generate_dataset(&world).unwrap();
        let ctx = DialogueContext::new(0);
        let s = encode_dialogue_state(&map, &data.train[0], &ctx, 0.95).unwrap();
        assert_eq!(s, DialogueState { c_state: 0, s_state: 0, pre_da: None, pre_context: PreContext::None });

        let mut ctx = DialogueContext::new(0);
        let inform = DialogueAct::with_words(Actor::Tutor, ActKind::Inform, [(Category::Colour, "red")]);
        ctx.record(Actor::Tutor, vec![inform], "it is red.");
        let s = encode_dialogue_state(&map, &data.train[0], &ctx, 0.95).unwrap();
        assert_eq!(s.c_state, 2);
        assert_eq!(s.pre_da, Some(ActKind::Inform));
        assert_eq!(s.pre_context, PreContext::Colour);
    }

    #[test]
    fn composite_turn_encoding() {
        let mut ctx = DialogueContext::new(0);
        let acts = DialogueAct::parse_tags(Actor::Tutor, "Ack(colour) Reject(shape) Inform(shape:circle)").unwrap();
        ctx.record(Actor::Tutor, acts, "");
        assert_eq!(pre_da_of(&ctx), Some(ActKind::Inform));
        let acts = DialogueAct::parse_tags(Actor::Tutor, "Repeat() Ack()").unwrap();
        ctx.record(Actor::Tutor, acts, "");
        assert_eq!(pre_da_of(&ctx), Some(ActKind::Ack));
    }

    #[test]
    fn legality() {
        let o = obs(0.8, 0.4, [false, false]);
        let legal = legal_actions(&o);
        assert!(legal.contains(&LearnerAction::new(LearnerActKind::AskPolar, Target::Colour)));
        assert!(!legal.contains(&LearnerAction::new(LearnerActKind::AskPolar, Target::Shape)));
        assert!(legal.contains(&LearnerAction::new(LearnerActKind::DoNotKnow, Target::Shape)));
        assert!(!legal.contains(&LearnerAction::new(LearnerActKind::Inform, Target::Both)));
        let o = obs(0.8, 0.8, [true, false]);
        let legal = legal_actions(&o);
        assert!(!legal.iter().any(|a| a.target != Target::Shape && a.kind != LearnerActKind::Ack
            && a.kind != LearnerActKind::Listen));
        assert!(legal.contains(&LearnerAction::ACK));
    }

    #[test]
    fn rule_examples() {
        let st = |c, s| DialogueState { c_state: c, s_state: s, pre_da: None, pre_context: PreContext::None };
        assert_eq!(rule_policy(&st(0, 2)), LearnerAction::new(LearnerActKind::AskWH, Target::Colour));
        assert_eq!(rule_policy(&st(1, 1)), LearnerAction::new(LearnerActKind::AskPolar, Target::Colour));
        assert_eq!(rule_policy(&st(2, 0)), LearnerAction::new(LearnerActKind::AskWH, Target::Shape));
        assert_eq!(rule_policy(&st(2, 2)), LearnerAction::ACK);
    }

    #[test]
    fn materialized_acts() {
        let o = obs(0.8, 0.7, [false, false]);
        let a = materialize(LearnerAction::new(LearnerActKind::Inform, Target::Both), &o);
        assert_eq!(a.to_string(), "Inform(colour:red&shape:square)");
        let a = materialize(LearnerAction::new(LearnerActKind::AskWH, Target::Shape), &o);
        assert_eq!(a.to_string(), "Ask(shape)");
        for act in LearnerAction::ALL {
            materialize(act, &o).validate().unwrap();
        }
    }
}
