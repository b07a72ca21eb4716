use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Learner,
    Tutor,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::Learner => "learner",
            Actor::Tutor => "tutor",
        })
    }
}

impl FromStr for Actor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "learner" | "l" => Ok(Actor::Learner),
            "tutor" | "t" => Ok(Actor::Tutor),
            other => Err(Error::MalformedTag(other.to_string())),
        }
    }
}

/// Dialogue capabilities from the annotation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActKind {
    Listen,
    Inform,
    Ask,
    Polar,
    Ack,
    Reject,
    Focus,
    CLr,
    CLrRequest,
    Help,
    HelpRequest,
    Check,
    Repeat,
    Retry,
    DoNotKnow,
}

impl ActKind {
    pub const ALL: [ActKind; 15] = [
        ActKind::Listen,
        ActKind::Inform,
        ActKind::Ask,
        ActKind::Polar,
        ActKind::Ack,
        ActKind::Reject,
        ActKind::Focus,
        ActKind::CLr,
        ActKind::CLrRequest,
        ActKind::Help,
        ActKind::HelpRequest,
        ActKind::Check,
        ActKind::Repeat,
        ActKind::Retry,
        ActKind::DoNotKnow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActKind::Listen => "Listen",
            ActKind::Inform => "Inform",
            ActKind::Ask => "Ask",
            ActKind::Polar => "Polar",
            ActKind::Ack => "Ack",
            ActKind::Reject => "Reject",
            ActKind::Focus => "Focus",
            ActKind::CLr => "CLr",
            ActKind::CLrRequest => "CLrRequest",
            ActKind::Help => "Help",
            ActKind::HelpRequest => "HelpRequest",
            ActKind::Check => "Check",
            ActKind::Repeat => "Repeat",
            ActKind::Retry => "Retry",
            ActKind::DoNotKnow => "DoNotKnow",
        }
    }

    pub fn index(self) -> usize {
        ActKind::ALL.iter().position(|k| *k == self).unwrap()
    }

    /// Whether `actor` may perform this kind.
    pub fn allowed_for(self, actor: Actor) -> bool {
        use ActKind::*;
        match self {
            Reject | Focus | CLr | Help | Check | Repeat | Retry => actor == Actor::Tutor,
            CLrRequest | HelpRequest | DoNotKnow => actor == Actor::Learner,
            Listen | Inform | Ask | Polar | Ack => true,
        }
    }

    /// Kinds whose slots carry attribute words.
    pub fn carries_words(self) -> bool {
        matches!(self, ActKind::Inform | ActKind::Polar)
    }
}

impl fmt::Display for ActKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::MalformedTag(s.to_string()))
    }
}

/// Category-to-word payload; `None` means the category is mentioned without
/// a word (as in `Ask(colour)`).
pub type Slots = BTreeMap<Category, Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub actor: Actor,
    pub kind: ActKind,
    pub slots: Slots,
}

impl DialogueAct {
    pub fn new(actor: Actor, kind: ActKind) -> Self {
        Self { actor, kind, slots: Slots::new() }
    }

    pub fn about(actor: Actor, kind: ActKind, categories: impl IntoIterator<Item = Category>) -> Self {
        Self { actor, kind, slots: categories.into_iter().map(|c| (c, None)).collect() }
    }

    pub fn with_words<'a>(actor: Actor, kind: ActKind, words: impl IntoIterator<Item = (Category, &'a str)>) -> Self {
        Self {
            actor,
            kind,
            slots: words.into_iter().map(|(c, w)| (c, Some(w.to_string()))).collect(),
        }
    }

    pub fn categories(&self) -> impl Iterator<Item = Category> + '_ {
        self.slots.keys().copied()
    }

    pub fn word(&self, category: Category) -> Option<&str> {
        self.slots.get(&category).and_then(|w| w.as_deref())
    }

    pub fn mentions(&self, category: Category) -> bool {
        self.slots.contains_key(&category)
    }

    /// Checks slot shape and speaker legality.
    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::IllegalAct(format!("{} {self}: {why}", self.actor)));
        if !self.kind.allowed_for(self.actor) {
            return bad("kind not available to this speaker");
        }
        let has_words = self.slots.values().any(Option::is_some);
        let all_words = self.slots.values().all(Option::is_some);
        use ActKind::*;
        match self.kind {
            Inform | Polar => {
                if self.slots.is_empty() || !all_words {
                    return bad("needs at least one category:word pair");
                }
            }
            Ask | DoNotKnow | Focus => {
                if self.slots.is_empty() || has_words {
                    return bad("takes categories without words");
                }
            }
            Ack | Reject => {
                if has_words {
                    return bad("takes at most categories");
                }
            }
            Listen | CLr | CLrRequest | Help | HelpRequest | Check | Repeat | Retry => {
                if !self.slots.is_empty() {
                    return bad("takes no arguments");
                }
            }
        }
        Ok(())
    }

    /// Parses one annotation tag for the given speaker.
    pub fn parse_tag(actor: Actor, tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let bad = || Error::MalformedTag(tag.to_string());
        let open = tag.find('(').ok_or_else(bad)?;
        if !tag.ends_with(')') {
            return Err(bad());
        }
        let kind: ActKind = tag[..open].trim().parse().map_err(|_| bad())?;
        let inner = tag[open + 1..tag.len() - 1].trim();
        let mut slots = Slots::new();
        if !inner.is_empty() {
            for part in inner.split('&') {
                let (cat, word) = match part.split_once(':') {
                    Some((c, w)) => (c.trim(), Some(w.trim().to_string())),
                    None => (part.trim(), None),
                };
                let cat: Category = cat.parse().map_err(|_| bad())?;
                if word.as_deref() == Some("") || slots.insert(cat, word).is_some() {
                    return Err(bad());
                }
            }
        }
        Ok(Self { actor, kind, slots })
    }

    /// Parses a whitespace-separated sequence of tags.
    pub fn parse_tags(actor: Actor, tags: &str) -> Result<Vec<Self>> {
        tags.split_whitespace().map(|t| Self::parse_tag(actor, t)).collect()
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, (cat, word)) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str("&")?;
            }
            match word {
                Some(w) => write!(f, "{cat}:{w}")?,
                None => write!(f, "{cat}")?,
            }
        }
        f.write_str(")")
    }
}

pub fn format_tags(acts: &[DialogueAct]) -> String {
    acts.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_syntax() {
        let a = DialogueAct::parse_tag(Actor::Tutor, "Inform(colour:sako&shape:burchak)").unwrap();
        assert_eq!(a.kind, ActKind::Inform);
        assert_eq!(a.word(Category::Colour), Some("sako"));
        assert_eq!(a.word(Category::Shape), Some("burchak"));
        assert_eq!(a.to_string(), "Inform(colour:sako&shape:burchak)");

        let ask = DialogueAct::parse_tag(Actor::Learner, "Ask(colour&shape)").unwrap();
        assert_eq!(ask.slots.len(), 2);
        assert!(ask.word(Category::Colour).is_none());
        assert_eq!(DialogueAct::parse_tag(Actor::Tutor, "Ack()").unwrap().slots.len(), 0);

        for bad in ["Inform", "Nope()", "Ask(size)", "Inform(colour:)", "Ask(colour&colour)"] {
            assert!(DialogueAct::parse_tag(Actor::Tutor, bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn slot_shapes() {
        let ok = [
            (Actor::Learner, "Ask(colour)"),
            (Actor::Tutor, "Inform(shape:circle)"),
            (Actor::Tutor, "Ack()"),
            (Actor::Tutor, "Reject(shape)"),
            (Actor::Learner, "Listen()"),
            (Actor::Learner, "DoNotKnow(shape)"),
        ];
        for (actor, tag) in ok {
            DialogueAct::parse_tag(actor, tag).unwrap().validate().unwrap();
        }
        let bad = [
            (Actor::Learner, "Ask(colour:red)"),
            (Actor::Tutor, "Inform(colour)"),
            (Actor::Tutor, "Ack(colour:red)"),
            (Actor::Learner, "Reject()"),
            (Actor::Tutor, "CLrRequest()"),
            (Actor::Tutor, "DoNotKnow(colour)"),
        ];
        for (actor, tag) in bad {
            assert!(DialogueAct::parse_tag(actor, tag).unwrap().validate().is_err(), "{tag}");
        }
    }
}
