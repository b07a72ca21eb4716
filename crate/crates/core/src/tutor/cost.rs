use serde::{Deserialize, Serialize};

use crate::dialogue::{ActKind, DialogueAct};
use crate::world::Category;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Stating an attribute the learner did not get right itself.
    pub inform: f64,
    /// Confirming or answering a yes/no question.
    pub ack: f64,
    /// Correcting a wrong statement.
    pub correction: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { inform: 5.0, ack: 0.5, correction: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Inform,
    Ack,
    Correction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub act: DialogueAct,
    pub kind: CostKind,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub entries: Vec<CostEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounts {
    pub informs: usize,
    pub acks: usize,
    pub corrections: usize,
}

impl CostLedger {
    pub fn extend(&mut self, entries: impl IntoIterator<Item = CostEntry>) {
        self.entries.extend(entries);
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.cost).sum()
    }

    pub fn counts(&self) -> CostCounts {
        let mut c = CostCounts::default();
        for e in &self.entries {
            match e.kind {
                CostKind::Inform => c.informs += 1,
                CostKind::Ack => c.acks += 1,
                CostKind::Correction => c.corrections += 1,
            }
        }
        c
    }
}

pub fn total_of(entries: &[CostEntry]) -> f64 {
    entries.iter().map(|e| e.cost).sum()
}

/// Prices a tutor turn given the learner act it answers.
///
/// A rejection of a statement that the same turn corrects is free, since the
/// correction already pays for it. An Inform that only repeats the learner's
/// own (right) guess is priced as a confirmation.
pub fn charge(params: &CostParams, learner_act: Option<&DialogueAct>, tutor_acts: &[DialogueAct]) -> Vec<CostEntry> {
    let statement = learner_act.filter(|a| a.kind == ActKind::Inform);
    let guessed = learner_act.filter(|a| a.kind.carries_words());
    let informs = |cat: Category| tutor_acts.iter().any(|a| a.kind == ActKind::Inform && a.mentions(cat));
    let acked = |cat: Category| {
        tutor_acts.iter().any(|a| a.kind == ActKind::Ack && (a.slots.is_empty() || a.mentions(cat)))
    };
    let entry = |act: &DialogueAct, kind, cost| CostEntry { act: act.clone(), kind, cost };

    let mut out = Vec::new();
    for act in tutor_acts {
        match act.kind {
            ActKind::Ack => out.push(entry(act, CostKind::Ack, params.ack)),
            ActKind::Reject => {
                let covered: Vec<Category> = match statement {
                    Some(s) if act.slots.is_empty() => s.categories().collect(),
                    Some(_) => act.categories().collect(),
                    None => Vec::new(),
                };
                let corrected = !covered.is_empty() && covered.iter().all(|c| informs(*c));
                if !corrected {
                    out.push(entry(act, CostKind::Ack, params.ack));
                }
            }
            ActKind::Inform => {
                for (cat, word) in &act.slots {
                    let word = word.as_deref();
                    let said = guessed.and_then(|g| g.word(*cat));
                    let stated = statement.and_then(|s| s.word(*cat));
                    if stated.is_some() && stated != word {
                        out.push(entry(act, CostKind::Correction, params.correction));
                    } else if said.is_some() && said == word {
                        if !acked(*cat) {
                            out.push(entry(act, CostKind::Ack, params.ack));
                        }
                    } else {
                        out.push(entry(act, CostKind::Inform, params.inform));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::Actor;

    fn turn(learner: &str, tutor: &str) -> f64 {
        let l = DialogueAct::parse_tag(Actor::Learner, learner).unwrap();
        let t = DialogueAct::parse_tags(Actor::Tutor, tutor).unwrap();
        total_of(&charge(&CostParams::default(), Some(&l), &t))
    }

    #[test]
    fn price_list() {
        assert_eq!(turn("Ask(colour)", "Inform(colour:red)"), 5.0);
        assert_eq!(turn("Ask(colour&shape)", "Inform(colour:red&shape:square)"), 10.0);
        assert_eq!(turn("DoNotKnow(shape)", "Inform(shape:circle)"), 5.0);
        assert_eq!(turn("Polar(colour:red)", "Ack()"), 0.5);
        assert_eq!(turn("Polar(colour:red)", "Reject() Inform(colour:blue)"), 5.5);
        assert_eq!(turn("Inform(colour:red)", "Ack()"), 0.5);
        assert_eq!(turn("Inform(colour:red)", "Reject() Inform(colour:blue)"), 5.0);
        assert_eq!(turn("Inform(colour:red&shape:circle)", "Ack(colour) Reject(shape) Inform(shape:square)"), 5.5);
        assert_eq!(turn("Inform(colour:red)", "Ack(colour) Inform(colour:red)"), 0.5);
        assert_eq!(turn("Polar(shape:circle)", "Inform(shape:circle)"), 0.5);
        assert_eq!(turn("Inform(colour:red)", "Reject()"), 0.5);
        assert_eq!(turn("Listen()", "Ask(colour&shape)"), 0.0);
        assert_eq!(turn("Ack()", "Repeat() Ask(shape)"), 0.0);
    }

    #[test]
    fn ledger_counts() {
        let l = DialogueAct::parse_tag(Actor::Learner, "Inform(colour:red&shape:circle)").unwrap();
        let t = DialogueAct::parse_tags(Actor::Tutor, "Ack(colour) Reject(shape) Inform(shape:square)").unwrap();
        let mut ledger = CostLedger::default();
        ledger.extend(charge(&CostParams::default(), Some(&l), &t));
        assert_eq!(ledger.counts(), CostCounts { informs: 0, acks: 1, corrections: 1 });
        assert_eq!(ledger.total(), 5.5);
    }
}
