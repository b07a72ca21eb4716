//! Template realisation and recognition of dialogue acts.
//!
//! A lexicon is a list of templates, each pairing a short act pattern with a
//! text that may contain `{colour}` and `{shape}` placeholders, plus a map from
//! attribute words to the surface forms spoken aloud.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Deserialize;

use super::act::{ActKind, Actor, DialogueAct};
use crate::error::{Error, Result};
use crate::world::{AttributeInventory, Category};

pub const ENGLISH_TEMPLATES: &str = include_str!("../../data/lexicon_en.toml");
pub const BURCHAK_SURFACE: &str = include_str!("../../data/surface_burchak.toml");

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Slot(Category),
}

#[derive(Debug, Clone)]
pub struct Template {
    pub actor: Actor,
    /// Acts realised, with categories but without words.
    pub pattern: Vec<DialogueAct>,
    pub weight: f64,
    pub text: String,
    tokens: Vec<Token>,
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    #[serde(default)]
    surface: BTreeMap<String, String>,
    #[serde(default)]
    template: Vec<TemplateEntry>,
}

#[derive(Debug, Deserialize)]
struct TemplateEntry {
    actor: Actor,
    acts: String,
    text: String,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

/// Lowercases, folds `color` to `colour`, drops apostrophes and splits on
/// anything that is not a letter or digit.
pub fn normalize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .map(|c| if c.is_alphanumeric() || c == '{' || c == '}' { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(|t| if t == "color" { "colour".to_string() } else { t.to_string() })
        .collect()
}

fn tokenize_template(text: &str) -> Result<Vec<Token>> {
    normalize(text)
        .into_iter()
        .map(|t| {
            if let Some(inner) = t.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                inner
                    .parse()
                    .map(Token::Slot)
                    .map_err(|_| Error::MissingTemplate(format!("unknown placeholder `{t}` in `{text}`")))
            } else if t.contains('{') || t.contains('}') {
                Err(Error::MissingTemplate(format!("stray brace in `{text}`")))
            } else {
                Ok(Token::Word(t))
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TemplateLexicon {
    templates: Vec<Template>,
    surface: BTreeMap<String, String>,
    /// (category, attribute word, normalised spoken tokens)
    vocab: Vec<(Category, String, Vec<String>)>,
}

impl TemplateLexicon {
    /// Built-in English templates, with words spoken as themselves.
    pub fn english(inventory: &AttributeInventory) -> Result<Self> {
        Self::from_toml(ENGLISH_TEMPLATES, inventory)
    }

    pub fn from_toml(source: &str, inventory: &AttributeInventory) -> Result<Self> {
        let file: TemplateFile = toml::from_str(source)?;
        let mut templates = Vec::with_capacity(file.template.len());
        for entry in file.template {
            templates.push(build_template(entry)?);
        }
        let mut lex = Self { templates, surface: BTreeMap::new(), vocab: Vec::new() };
        lex.set_surface(inventory, file.surface)?;
        Ok(lex)
    }

    /// Replaces surface forms with those from a TOML `[surface]` table.
    pub fn with_surface_toml(mut self, source: &str, inventory: &AttributeInventory) -> Result<Self> {
        let file: TemplateFile = toml::from_str(source)?;
        self.set_surface(inventory, file.surface)?;
        Ok(self)
    }

    fn set_surface(&mut self, inventory: &AttributeInventory, surface: BTreeMap<String, String>) -> Result<()> {
        for word in surface.keys() {
            if inventory.category_of(word).is_none() {
                return Err(Error::UnknownAttribute(word.clone()));
            }
        }
        self.surface = surface;
        self.vocab.clear();
        for cat in Category::ALL {
            for word in inventory.words_in(cat) {
                let spoken = self.surface_of(word).to_string();
                self.vocab.push((cat, word.clone(), normalize(&spoken)));
                if spoken != *word {
                    self.vocab.push((cat, word.clone(), normalize(word)));
                }
            }
        }
        Ok(())
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn surface_of<'a>(&'a self, word: &'a str) -> &'a str {
        self.surface.get(word).map(String::as_str).unwrap_or(word)
    }

    /// Realises a single act.
    pub fn generate<R: Rng + ?Sized>(&self, act: &DialogueAct, rng: &mut R) -> Result<String> {
        self.generate_turn(std::slice::from_ref(act), rng)
    }

    /// Realises a turn, covering it left to right with the longest templates
    /// available and sampling among equally long ones by weight.
    pub fn generate_turn<R: Rng + ?Sized>(&self, acts: &[DialogueAct], rng: &mut R) -> Result<String> {
        let mut pieces: Vec<String> = Vec::new();
        let mut i = 0;
        while i < acts.len() {
            let mut chosen = None;
            for len in (1..=acts.len() - i).rev() {
                let span = &acts[i..i + len];
                let candidates: Vec<&Template> = self
                    .templates
                    .iter()
                    .filter(|t| t.weight > 0.0 && pattern_matches(&t.pattern, span))
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let pick = if candidates.len() == 1 {
                    0
                } else {
                    let dist = WeightedIndex::new(candidates.iter().map(|t| t.weight))
                        .map_err(|e| Error::MissingTemplate(e.to_string()))?;
                    dist.sample(rng)
                };
                chosen = Some((candidates[pick], len));
                break;
            }
            let (template, len) = chosen.ok_or_else(|| Error::MissingTemplate(acts[i].to_string()))?;
            let piece = self.fill(template, &acts[i..i + len])?;
            if !piece.is_empty() {
                pieces.push(piece);
            }
            i += len;
        }
        let mut out = String::new();
        for p in pieces {
            if !out.is_empty() {
                out.push_str(if out.ends_with(['.', '?', '!']) { " " } else { ", " });
            }
            out.push_str(&p);
        }
        Ok(out)
    }

    fn fill(&self, template: &Template, span: &[DialogueAct]) -> Result<String> {
        let mut text = template.text.clone();
        for cat in Category::ALL {
            let placeholder = format!("{{{cat}}}");
            if text.contains(&placeholder) {
                let word = span
                    .iter()
                    .find_map(|a| a.word(cat))
                    .ok_or_else(|| Error::MissingTemplate(format!("no {cat} word for `{}`", template.text)))?;
                text = text.replace(&placeholder, self.surface_of(word));
            }
        }
        Ok(text)
    }

    /// Recognises an utterance as a sequence of acts by `actor`, using as few
    /// templates as possible. Empty input is a `Listen`; `None` means no
    /// segmentation exists.
    pub fn parse(&self, actor: Actor, utterance: &str) -> Option<Vec<DialogueAct>> {
        let tokens = normalize(utterance);
        if tokens.is_empty() {
            return Some(vec![DialogueAct::new(actor, ActKind::Listen)]);
        }
        let usable: Vec<&Template> =
            self.templates.iter().filter(|t| t.actor == actor && !t.tokens.is_empty()).collect();
        let n = tokens.len();
        // best[i]: fewest segments covering tokens[i..], with the acts produced.
        let mut best: Vec<Option<(usize, Vec<DialogueAct>)>> = vec![None; n + 1];
        best[n] = Some((0, Vec::new()));
        for i in (0..n).rev() {
            for t in &usable {
                for (end, binding) in self.match_at(&t.tokens, &tokens, i) {
                    let Some((segs, rest)) = &best[end] else { continue };
                    if best[i].as_ref().is_none_or(|(b, _)| segs + 1 < *b) {
                        let mut acts = instantiate(&t.pattern, &binding);
                        acts.extend(rest.iter().cloned());
                        best[i] = Some((segs + 1, acts));
                    }
                }
            }
        }
        best[0].take().map(|(_, acts)| acts)
    }

    fn match_at(&self, pattern: &[Token], tokens: &[String], start: usize) -> Vec<(usize, BTreeMap<Category, String>)> {
        let mut out = Vec::new();
        self.match_rec(pattern, tokens, start, &mut BTreeMap::new(), &mut out);
        out
    }

    fn match_rec(
        &self,
        pattern: &[Token],
        tokens: &[String],
        pos: usize,
        binding: &mut BTreeMap<Category, String>,
        out: &mut Vec<(usize, BTreeMap<Category, String>)>,
    ) {
        let Some((head, rest)) = pattern.split_first() else {
            out.push((pos, binding.clone()));
            return;
        };
        match head {
            Token::Word(w) => {
                if tokens.get(pos) == Some(w) {
                    self.match_rec(rest, tokens, pos + 1, binding, out);
                }
            }
            Token::Slot(cat) => {
                for (c, word, spoken) in &self.vocab {
                    if c != cat || !tokens[pos.min(tokens.len())..].starts_with(spoken) {
                        continue;
                    }
                    let previous = binding.insert(*cat, word.clone());
                    self.match_rec(rest, tokens, pos + spoken.len(), binding, out);
                    match previous {
                        Some(p) => binding.insert(*cat, p),
                        None => binding.remove(cat),
                    };
                }
            }
        }
    }

    /// Pairs of same-speaker templates whose texts read identically but mean
    /// different things.
    pub fn ambiguities(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in self.templates.iter().enumerate() {
            for b in &self.templates[i + 1..] {
                if a.actor == b.actor && a.tokens == b.tokens && a.pattern != b.pattern {
                    out.push((a.text.clone(), b.text.clone()));
                }
            }
        }
        out
    }
}

fn build_template(entry: TemplateEntry) -> Result<Template> {
    let pattern = DialogueAct::parse_tags(entry.actor, &entry.acts)?;
    if pattern.is_empty() {
        return Err(Error::MissingTemplate(format!("template `{}` has no acts", entry.text)));
    }
    if !(entry.weight >= 0.0 && entry.weight.is_finite()) {
        return Err(Error::InvalidConfig(format!("bad weight for template `{}`", entry.text)));
    }
    let tokens = tokenize_template(&entry.text)?;
    let slots: Vec<Category> = tokens
        .iter()
        .filter_map(|t| match t {
            Token::Slot(c) => Some(*c),
            Token::Word(_) => None,
        })
        .collect();
    let mut needed = Vec::new();
    for act in &pattern {
        if act.slots.values().any(Option::is_some) {
            return Err(Error::MissingTemplate(format!("pattern `{}` must not name words", entry.acts)));
        }
        if act.kind.carries_words() {
            needed.extend(act.categories());
        }
    }
    let unique_needed: BTreeSet<_> = needed.iter().copied().collect();
    let mut sorted_slots = slots.clone();
    sorted_slots.sort();
    let mut sorted_needed = needed.clone();
    sorted_needed.sort();
    if unique_needed.len() != needed.len() || sorted_slots != sorted_needed {
        return Err(Error::MissingTemplate(format!(
            "placeholders in `{}` do not match the words of `{}`",
            entry.text, entry.acts
        )));
    }
    Ok(Template { actor: entry.actor, pattern, weight: entry.weight, text: entry.text, tokens })
}

fn pattern_matches(pattern: &[DialogueAct], span: &[DialogueAct]) -> bool {
    pattern.len() == span.len()
        && pattern.iter().zip(span).all(|(p, a)| {
            p.actor == a.actor && p.kind == a.kind && p.slots.keys().eq(a.slots.keys())
        })
}

fn instantiate(pattern: &[DialogueAct], binding: &BTreeMap<Category, String>) -> Vec<DialogueAct> {
    pattern
        .iter()
        .map(|p| {
            let mut act = p.clone();
            if act.kind.carries_words() {
                for (cat, word) in act.slots.iter_mut() {
                    *word = binding.get(cat).cloned();
                }
            }
            act
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lex() -> TemplateLexicon {
        TemplateLexicon::english(&AttributeInventory::default()).unwrap()
    }

    fn acts(actor: Actor, tags: &str) -> Vec<DialogueAct> {
        DialogueAct::parse_tags(actor, tags).unwrap()
    }

    #[test]
    fn fixed_realisations() {
        let lex = lex();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for seed in 0..20 {
            rng = ChaCha8Rng::seed_from_u64(seed);
            let inform = DialogueAct::parse_tag(Actor::Learner, "Inform(colour:red&shape:square)").unwrap();
            assert_eq!(lex.generate(&inform, &mut rng).unwrap(), "a red square");
            let ack = DialogueAct::new(Actor::Learner, ActKind::Ack);
            assert_eq!(lex.generate(&ack, &mut rng).unwrap(), "okay, got it.");
        }
        let ask = DialogueAct::about(Actor::Learner, ActKind::Ask, [Category::Colour]);
        let said = lex.generate(&ask, &mut rng).unwrap();
        assert!(said == "what colour is this?" || said == "so what colour is it?");
    }

    #[test]
    fn tutor_phrases() {
        let lex = lex();
        assert_eq!(
            lex.parse(Actor::Tutor, "no, it is blue").unwrap(),
            acts(Actor::Tutor, "Reject() Inform(colour:blue)")
        );
        assert_eq!(lex.parse(Actor::Tutor, "yes").unwrap(), acts(Actor::Tutor, "Ack()"));
        assert_eq!(lex.parse(Actor::Tutor, "Yes!").unwrap(), acts(Actor::Tutor, "Ack()"));
        assert_eq!(
            lex.parse(Actor::Tutor, "The color is right, but the shape is not.").unwrap(),
            acts(Actor::Tutor, "Ack(colour) Reject(shape)")
        );
        assert_eq!(
            lex.parse(Actor::Tutor, "yes, red is for the colour").unwrap(),
            acts(Actor::Tutor, "Ack(colour) Inform(colour:red)")
        );
        assert_eq!(lex.parse(Actor::Tutor, ""), Some(acts(Actor::Tutor, "Listen()")));
        assert_eq!(lex.parse(Actor::Tutor, "the weather is nice"), None);
    }

    #[test]
    fn invented_words() {
        let inv = AttributeInventory::default();
        let lex = lex().with_surface_toml(BURCHAK_SURFACE, &inv).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DialogueAct::parse_tag(Actor::Learner, "Inform(colour:red&shape:square)").unwrap();
        assert_eq!(lex.generate(&a, &mut rng).unwrap(), "a sako burchak");
        assert_eq!(
            lex.parse(Actor::Tutor, "no, it is suzuli").unwrap(),
            acts(Actor::Tutor, "Reject() Inform(colour:green)")
        );
        assert!(lex.with_surface_toml("[surface]\nmauve = \"x\"", &inv).is_err());
    }

    #[test]
    fn no_ambiguous_templates() {
        assert!(lex().ambiguities().is_empty(), "{:?}", lex().ambiguities());
    }

    #[test]
    fn missing_template() {
        let lex = TemplateLexicon::from_toml(
            "[[template]]\nactor = \"tutor\"\nacts = \"Ack()\"\ntext = \"yes\"\n",
            &AttributeInventory::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let act = DialogueAct::new(Actor::Tutor, ActKind::Check);
        assert!(matches!(lex.generate(&act, &mut rng), Err(Error::MissingTemplate(_))));
    }

    #[test]
    fn placeholder_checks() {
        let inv = AttributeInventory::default();
        for bad in [
            "[[template]]\nactor = \"tutor\"\nacts = \"Inform(colour)\"\ntext = \"it is nice\"\n",
            "[[template]]\nactor = \"tutor\"\nacts = \"Ask(colour)\"\ntext = \"{colour}?\"\n",
            "[[template]]\nactor = \"tutor\"\nacts = \"Inform(colour)\"\ntext = \"{size}\"\n",
        ] {
            assert!(TemplateLexicon::from_toml(bad, &inv).is_err(), "{bad}");
        }
    }
}
