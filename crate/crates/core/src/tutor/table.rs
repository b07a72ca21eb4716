//! Tutor action tables: which acts the tutor answers with in a situation.
//!
//! Outcomes are written as tag sequences where `*` stands for the true word,
//! e.g. `Reject(colour) Inform(colour:*)`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::Deserialize;

use crate::dialogue::{format_tags, ActKind, Actor, DialogueAct};
use crate::error::{Error, Result};
use crate::world::{Category, VisualObject};

pub const TRUTH: &str = "*";

/// What the tutor reacts to: the learner's act shape, which of its guesses
/// were wrong, and (for second-order tables) the tutor's previous act kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Situation {
    pub after: Option<ActKind>,
    pub learner: ActKind,
    pub categories: Vec<Category>,
    pub wrong: Vec<Category>,
}

impl Situation {
    pub fn of(learner_act: &DialogueAct, truth: &VisualObject, after: Option<ActKind>) -> Self {
        let wrong = if learner_act.kind.carries_words() {
            learner_act.categories().filter(|c| learner_act.word(*c) != Some(truth.label(*c))).collect()
        } else {
            Vec::new()
        };
        Self { after, learner: learner_act.kind, categories: learner_act.categories().collect(), wrong }
    }

    fn first_order(&self) -> Self {
        Self { after: None, ..self.clone() }
    }
}

impl fmt::Display for Situation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cats: Vec<&str> = self.categories.iter().map(|c| c.as_str()).collect();
        write!(f, "{}({})", self.learner, cats.join("&"))?;
        if !self.wrong.is_empty() {
            let w: Vec<&str> = self.wrong.iter().map(|c| c.as_str()).collect();
            write!(f, " wrong={}", w.join("&"))?;
        }
        if let Some(a) = self.after {
            write!(f, " after={a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub weight: f64,
    pub acts: Vec<DialogueAct>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionTable {
    /// 1 looks only at the learner act; 2 also at the tutor's previous act.
    pub order: u8,
    pub rules: BTreeMap<Situation, Vec<Outcome>>,
    /// How dialogues open; empty acts mean the learner speaks first.
    pub openings: Vec<Outcome>,
}

#[derive(Debug, Deserialize)]
struct TableFile {
    #[serde(default = "default_order")]
    order: u8,
    #[serde(default)]
    opening: Vec<OutcomeEntry>,
    #[serde(default)]
    rule: Vec<RuleEntry>,
}

fn default_order() -> u8 {
    1
}

#[derive(Debug, Deserialize)]
struct RuleEntry {
    learner: String,
    #[serde(default)]
    wrong: Vec<Category>,
    after: Option<String>,
    outcome: Vec<OutcomeEntry>,
}

#[derive(Debug, Deserialize)]
struct OutcomeEntry {
    #[serde(default = "one")]
    weight: f64,
    acts: String,
}

fn one() -> f64 {
    1.0
}

fn outcome_from(entry: OutcomeEntry) -> Result<Outcome> {
    if !(entry.weight >= 0.0 && entry.weight.is_finite()) {
        return Err(Error::InvalidConfig(format!("bad outcome weight {}", entry.weight)));
    }
    let acts = DialogueAct::parse_tags(Actor::Tutor, &entry.acts)?;
    for a in &acts {
        a.validate()?;
    }
    Ok(Outcome { weight: entry.weight, acts })
}

impl ActionTable {
    pub fn from_toml(source: &str) -> Result<Self> {
        let file: TableFile = toml::from_str(source)?;
        if !(1..=2).contains(&file.order) {
            return Err(Error::InvalidConfig(format!("table order must be 1 or 2, got {}", file.order)));
        }
        let mut table = ActionTable { order: file.order, ..Default::default() };
        for o in file.opening {
            table.openings.push(outcome_from(o)?);
        }
        for rule in file.rule {
            let learner = DialogueAct::parse_tag(Actor::Learner, &rule.learner)?;
            let mut wrong = rule.wrong.clone();
            wrong.sort();
            wrong.dedup();
            let after = rule.after.as_deref().map(str::parse).transpose()?;
            let key = Situation { after, learner: learner.kind, categories: learner.categories().collect(), wrong };
            let outcomes = rule.outcome.into_iter().map(outcome_from).collect::<Result<Vec<_>>>()?;
            table.rules.entry(key).or_default().extend(outcomes);
        }
        Ok(table)
    }

    pub fn to_toml(&self) -> String {
        let mut out = format!("order = {}\n", self.order);
        for o in &self.openings {
            out.push_str(&format!("\n[[opening]]\nweight = {}\nacts = \"{}\"\n", o.weight, format_tags(&o.acts)));
        }
        for (key, outcomes) in &self.rules {
            let cats: Vec<&str> = key.categories.iter().map(|c| c.as_str()).collect();
            out.push_str(&format!("\n[[rule]]\nlearner = \"{}({})\"\n", key.learner, cats.join("&")));
            if !key.wrong.is_empty() {
                let w: Vec<String> = key.wrong.iter().map(|c| format!("\"{c}\"")).collect();
                out.push_str(&format!("wrong = [{}]\n", w.join(", ")));
            }
            if let Some(a) = key.after {
                out.push_str(&format!("after = \"{a}\"\n"));
            }
            for o in outcomes {
                out.push_str(&format!("[[rule.outcome]]\nweight = {}\nacts = \"{}\"\n", o.weight, format_tags(&o.acts)));
            }
        }
        out
    }

    /// Outcomes for a situation, backing off from second to first order.
    pub fn lookup(&self, situation: &Situation) -> Option<&[Outcome]> {
        if self.order >= 2 && situation.after.is_some() {
            if let Some(o) = self.rules.get(situation) {
                return Some(o);
            }
        }
        self.rules.get(&situation.first_order()).map(Vec::as_slice)
    }
}

/// Replaces `*` words with the object's true labels.
pub fn instantiate(acts: &[DialogueAct], truth: &VisualObject) -> Vec<DialogueAct> {
    acts.iter()
        .map(|a| {
            let mut a = a.clone();
            for (cat, word) in a.slots.iter_mut() {
                if word.as_deref() == Some(TRUTH) {
                    *word = Some(truth.label(*cat).to_string());
                }
            }
            a
        })
        .collect()
}

/// One annotated dialogue: alternating speaker turns.
pub type AnnotatedDialogue = Vec<(Actor, Vec<DialogueAct>)>;

/// Reads `L:` / `T:` tag lines; blank lines separate dialogues and `#` starts
/// a comment.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<AnnotatedDialogue>> {
    let mut dialogues = Vec::new();
    let mut current: AnnotatedDialogue = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let raw = line?;
        if raw.trim().is_empty() {
            if !current.is_empty() {
                dialogues.push(std::mem::take(&mut current));
            }
            continue;
        }
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Format { line: i + 1, reason };
        let (who, tags) = line.split_once(':').ok_or_else(|| bad("expected `L:` or `T:`".into()))?;
        let actor: Actor = who.trim().parse().map_err(|_| bad(format!("unknown speaker `{who}`")))?;
        let acts = DialogueAct::parse_tags(actor, tags).map_err(|e| bad(e.to_string()))?;
        for a in &acts {
            a.validate().map_err(|e| bad(e.to_string()))?;
        }
        current.push((actor, acts));
    }
    if !current.is_empty() {
        dialogues.push(current);
    }
    if dialogues.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(dialogues)
}

/// Categories of a learner assertion that the tutor's reply marks as wrong.
fn inferred_wrong(learner: &DialogueAct, reply: &[DialogueAct]) -> Vec<Category> {
    if !learner.kind.carries_words() {
        return Vec::new();
    }
    learner
        .categories()
        .filter(|c| {
            reply.iter().any(|t| match t.kind {
                ActKind::Reject => t.slots.is_empty() || t.mentions(*c),
                ActKind::Inform => t.word(*c).is_some_and(|w| Some(w) != learner.word(*c)),
                _ => false,
            })
        })
        .collect()
}

fn abstract_words(acts: &[DialogueAct]) -> Vec<DialogueAct> {
    acts.iter()
        .map(|a| {
            let mut a = a.clone();
            for w in a.slots.values_mut() {
                if w.is_some() {
                    *w = Some(TRUTH.to_string());
                }
            }
            a
        })
        .collect()
}

/// Estimates tutor act frequencies from an annotated corpus. Weights are
/// relative frequencies per situation.
pub fn fit_action_table(corpus: &[AnnotatedDialogue], order: u8) -> Result<ActionTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidConfig(format!("table order must be 1 or 2, got {order}")));
    }
    let mut counts: BTreeMap<Situation, BTreeMap<String, usize>> = BTreeMap::new();
    let mut openings: BTreeMap<String, usize> = BTreeMap::new();
    for dialogue in corpus {
        let opening = match dialogue.first() {
            Some((Actor::Tutor, acts)) => format_tags(&abstract_words(acts)),
            _ => String::new(),
        };
        *openings.entry(opening).or_default() += 1;
        let mut prev_tutor: Option<ActKind> = None;
        for pair in dialogue.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.0 == Actor::Tutor {
                prev_tutor = a.1.first().map(|x| x.kind);
            }
            if a.0 != Actor::Learner || b.0 != Actor::Tutor {
                continue;
            }
            let Some(learner) = a.1.iter().find(|x| x.kind.carries_words()).or(a.1.first()) else {
                continue;
            };
            let outcome = format_tags(&abstract_words(&b.1));
            let key = Situation {
                after: None,
                learner: learner.kind,
                categories: learner.categories().collect(),
                wrong: inferred_wrong(learner, &b.1),
            };
            if order == 2 && prev_tutor.is_some() {
                let k2 = Situation { after: prev_tutor, ..key.clone() };
                *counts.entry(k2).or_default().entry(outcome.clone()).or_default() += 1;
            }
            *counts.entry(key).or_default().entry(outcome).or_default() += 1;
        }
    }
    let to_outcomes = |m: &BTreeMap<String, usize>| -> Result<Vec<Outcome>> {
        let n: usize = m.values().sum();
        m.iter()
            .map(|(tags, c)| {
                Ok(Outcome {
                    weight: *c as f64 / n as f64,
                    acts: DialogueAct::parse_tags(Actor::Tutor, tags)?,
                })
            })
            .collect()
    };
    let mut table = ActionTable { order, ..Default::default() };
    for (k, m) in &counts {
        table.rules.insert(k.clone(), to_outcomes(m)?);
    }
    table.openings = to_outcomes(&openings)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CORPUS: &str = "\
# two short dialogues
T: Ask(colour&shape)
L: Inform(colour:sako&shape:burchak)
T: Ack(colour) Reject(shape) Inform(shape:wakaki)
L: Ack()

L: Polar(colour:sako)
T: Ack()
L: Ask(shape)
T: Inform(shape:wakaki)
";

    #[test]
    fn reads_and_fits() {
        let corpus = read_corpus(CORPUS.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 2);
        let table = fit_action_table(&corpus, 1).unwrap();
        let key = Situation {
            after: None,
            learner: ActKind::Inform,
            categories: vec![Category::Colour, Category::Shape],
            wrong: vec![Category::Shape],
        };
        let o = &table.rules[&key];
        assert_eq!(o.len(), 1);
        assert_eq!(format_tags(&o[0].acts), "Ack(colour) Reject(shape) Inform(shape:*)");
        let total: f64 = table.openings.iter().map(|o| o.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(table.openings.iter().any(|o| o.acts.is_empty() && (o.weight - 0.5).abs() < 1e-12));
    }

    #[test]
    fn second_order_backs_off() {
        let corpus = read_corpus(CORPUS.as_bytes()).unwrap();
        let table = fit_action_table(&corpus, 2).unwrap();
        let ask_shape = Situation {
            after: Some(ActKind::Check),
            learner: ActKind::Ask,
            categories: vec![Category::Shape],
            wrong: vec![],
        };
        assert!(table.lookup(&ask_shape).is_some());
        let with_prev = Situation { after: Some(ActKind::Ask), ..inform_both_wrong_shape() };
        assert!(table.rules.contains_key(&with_prev));
    }

    fn inform_both_wrong_shape() -> Situation {
        Situation {
            after: None,
            learner: ActKind::Inform,
            categories: vec![Category::Colour, Category::Shape],
            wrong: vec![Category::Shape],
        }
    }

    #[test]
    fn toml_round_trip() {
        let corpus = read_corpus(CORPUS.as_bytes()).unwrap();
        let table = fit_action_table(&corpus, 2).unwrap();
        let back = ActionTable::from_toml(&table.to_toml()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn corpus_errors() {
        assert!(matches!(read_corpus("# nothing\n".as_bytes()), Err(Error::EmptyCorpus)));
        assert!(matches!(read_corpus("X: Ack()\n".as_bytes()), Err(Error::Format { line: 1, .. })));
        assert!(matches!(read_corpus("T: Inform(colour)\n".as_bytes()), Err(Error::Format { .. })));
    }
}
