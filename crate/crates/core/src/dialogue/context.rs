use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::act::{ActKind, Actor, DialogueAct};
use crate::world::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub actor: Actor,
    pub acts: Vec<DialogueAct>,
    pub utterance: String,
}

/// Per-dialogue history about one object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DialogueContext {
    pub object_id: u64,
    pub turns: Vec<Turn>,
    /// Categories mentioned by either side so far.
    pub discussed: BTreeSet<Category>,
    /// Categories the tutor has stated or confirmed.
    pub provided: BTreeSet<Category>,
}

impl DialogueContext {
    pub fn new(object_id: u64) -> Self {
        Self { object_id, ..Default::default() }
    }

    pub fn last_turn_by(&self, actor: Actor) -> Option<&Turn> {
        self.turns.iter().rev().find(|t| t.actor == actor)
    }

    /// Last learner act that put a word forward (statement or polar check).
    pub fn last_learner_assertion(&self) -> Option<&DialogueAct> {
        let turn = self.last_turn_by(Actor::Learner)?;
        turn.acts.iter().find(|a| a.kind.carries_words())
    }

    /// The tutor's most recent turn asked something the learner has not
    /// answered yet.
    pub fn tutor_awaits_answer(&self) -> bool {
        match self.turns.last() {
            Some(t) if t.actor == Actor::Tutor => t.acts.iter().any(|a| a.kind == ActKind::Ask),
            _ => false,
        }
    }

    /// The question the learner's latest turn was (or is about to be) an
    /// answer to, whether or not that turn is already recorded.
    pub fn open_question(&self) -> Option<&DialogueAct> {
        let mut turns = self.turns.iter().rev();
        let mut t = turns.next()?;
        if t.actor == Actor::Learner {
            t = turns.next()?;
        }
        if t.actor != Actor::Tutor {
            return None;
        }
        t.acts.iter().find(|a| a.kind == ActKind::Ask)
    }

    /// Appends a turn and updates `discussed` and `provided`.
    pub fn record(&mut self, actor: Actor, acts: Vec<DialogueAct>, utterance: impl Into<String>) {
        for a in &acts {
            self.discussed.extend(a.categories());
        }
        if actor == Actor::Tutor {
            let newly = provided_by(&acts, self.last_learner_assertion());
            self.provided.extend(newly);
        }
        self.turns.push(Turn { actor, acts, utterance: utterance.into() });
    }
}

/// Categories a tutor turn settles: informed words, and confirmations of the
/// learner's preceding assertion.
pub fn provided_by(tutor_acts: &[DialogueAct], learner_assertion: Option<&DialogueAct>) -> BTreeSet<Category> {
    let mut out = BTreeSet::new();
    for a in tutor_acts {
        match a.kind {
            ActKind::Inform => out.extend(a.categories()),
            ActKind::Ack => {
                if let Some(asserted) = learner_assertion {
                    if a.slots.is_empty() {
                        out.extend(asserted.categories());
                    } else {
                        out.extend(a.categories().filter(|c| asserted.mentions(*c)));
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

    fn tags(actor: Actor, s: &str) -> Vec<DialogueAct> {
        DialogueAct::parse_tags(actor, s).unwrap()
    }

    #[test]
    fn tutor_inform_provides() {
        let mut ctx = DialogueContext::new(3);
        ctx.record(Actor::Tutor, tags(Actor::Tutor, "Inform(colour:red)"), "it is red.");
        assert!(ctx.provided.contains(&Category::Colour));
        assert!(ctx.discussed.contains(&Category::Colour));
    }

    #[test]
    fn learner_ask_only_discusses() {
        let mut ctx = DialogueContext::new(3);
        ctx.record(Actor::Learner, tags(Actor::Learner, "Ask(shape)"), "what shape is this?");
        assert!(ctx.discussed.contains(&Category::Shape));
        assert!(ctx.provided.is_empty());
    }

    #[test]
    fn confirmation_counts_as_knowledge() {
        let mut ctx = DialogueContext::new(3);
        ctx.record(Actor::Learner, tags(Actor::Learner, "Inform(colour:red)"), "it is red.");
        ctx.record(Actor::Tutor, tags(Actor::Tutor, "Ack(colour)"), "the colour is right.");
        assert_eq!(ctx.provided.iter().copied().collect::<Vec<_>>(), vec![Category::Colour]);

        let mut ctx = DialogueContext::new(4);
        ctx.record(Actor::Learner, tags(Actor::Learner, "Polar(colour:red&shape:square)"), "");
        ctx.record(Actor::Tutor, tags(Actor::Tutor, "Ack()"), "yes");
        assert_eq!(ctx.provided.len(), 2);
    }

    #[test]
    fn rejection_provides_nothing() {
        let mut ctx = DialogueContext::new(3);
        ctx.record(Actor::Learner, tags(Actor::Learner, "Inform(colour:red)"), "");
        ctx.record(Actor::Tutor, tags(Actor::Tutor, "Reject(colour)"), "");
        assert!(ctx.provided.is_empty());
        assert!(!ctx.tutor_awaits_answer());
        ctx.record(Actor::Tutor, tags(Actor::Tutor, "Ask(colour)"), "");
        assert!(ctx.tutor_awaits_answer());
        ctx.record(Actor::Learner, tags(Actor::Learner, "Listen()"), "");
        assert!(!ctx.tutor_awaits_answer());
        assert_eq!(ctx.open_question().map(|a| a.to_string()).as_deref(), Some("Ask(colour)"));
    }
}
