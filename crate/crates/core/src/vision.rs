//! Grounded word meanings: one online logistic-regression classifier per
//! attribute word, trained by single-example SGD steps.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{AttributeInventory, Category, VisualObject, WorldConfig};

pub const DEFAULT_LEARNING_RATE: f64 = 3.0;

/// Probabilities are kept strictly inside (0, 1).
const PROB_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeClassifier {
    pub word: String,
    pub category: Category,
    /// Feature weights followed by the bias term.
    pub weights: Vec<f64>,
    pub learning_rate: f64,
    pub l2: f64,
    pub updates_seen: u64,
}

impl AttributeClassifier {
    pub fn new(word: impl Into<String>, category: Category, feature_dim: usize) -> Self {
        Self {
            word: word.into(),
            category,
            weights: vec![0.0; feature_dim + 1],
            learning_rate: DEFAULT_LEARNING_RATE,
            l2: 0.0,
            updates_seen: 0,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len() - 1
    }

    fn check(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch { expected: self.feature_dim(), got: features.len() });
        }
        Ok(())
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        self.check(features)?;
        let (w, bias) = self.weights.split_at(features.len());
        Ok(w.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + bias[0])
    }

    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.score(features)?).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
    }

    /// Gradient of the logistic loss for a soft target in [0, 1], bias last.
    pub fn gradient(&self, features: &[f64], target: f64) -> Result<Vec<f64>> {
        let err = sigmoid(self.score(features)?) - target;
        Ok(features.iter().copied().chain(std::iter::once(1.0)).map(|x| err * x).collect())
    }

    pub fn sgd_step(&mut self, features: &[f64], label: bool) -> Result<()> {
        self.sgd_step_toward(features, if label { 1.0 } else { 0.0 })
    }

    /// One SGD step toward an arbitrary target probability.
    pub fn sgd_step_toward(&mut self, features: &[f64], target: f64) -> Result<()> {
        self.check(features)?;
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        let grad = self.gradient(features, target)?;
        let (eta, l2) = (self.learning_rate, self.l2);
        let n = self.weights.len();
        for (i, (w, g)) in self.weights.iter_mut().zip(grad).enumerate() {
            let reg = if i + 1 < n { l2 * *w } else { 0.0 };
            *w -= eta * (g + reg);
        }
        self.updates_seen += 1;
        Ok(())
    }
}

/// Prediction status of one attribute category: 0 unknown, 1 uncertain,
/// 2 known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredictionStatus(u8);

impl PredictionStatus {
    pub const UNKNOWN: Self = Self(0);
    pub const UNCERTAIN: Self = Self(1);
    pub const KNOWN: Self = Self(2);

    pub fn level(self) -> u8 {
        self.0
    }
}

pub fn status(confidence: f64, pos_threshold: f64) -> PredictionStatus {
    if confidence >= pos_threshold {
        PredictionStatus::KNOWN
    } else if confidence > 0.5 {
        PredictionStatus::UNCERTAIN
    } else {
        PredictionStatus::UNKNOWN
    }
}

/// `status`, forced to known once the tutor has provided the attribute in the
/// current dialogue.
pub fn status_with_override(confidence: f64, pos_threshold: f64, provided: bool) -> PredictionStatus {
    if provided {
        PredictionStatus::KNOWN
    } else {
        status(confidence, pos_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingMap {
    inventory: AttributeInventory,
    /// Colours first, then shapes, both in inventory order.
    classifiers: Vec<AttributeClassifier>,
}

impl GroundingMap {
    pub fn new(world: &WorldConfig) -> Self {
        let inv = &world.inventory;
        let classifiers = Category::ALL
            .iter()
            .flat_map(|&cat| {
                let dim = world.feature_dim(cat);
                inv.words_in(cat).iter().map(move |w| AttributeClassifier::new(w.clone(), cat, dim))
            })
            .collect();
        Self { inventory: inv.clone(), classifiers }
    }

    pub fn with_learning_rate(mut self, eta: f64) -> Self {
        self.classifiers.iter_mut().for_each(|c| c.learning_rate = eta);
        self
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.classifiers.iter_mut().for_each(|c| c.l2 = l2);
        self
    }

    pub fn inventory(&self) -> &AttributeInventory {
        &self.inventory
    }

    pub fn classifiers(&self) -> &[AttributeClassifier] {
        &self.classifiers
    }

    pub fn classifier(&self, word: &str) -> Option<&AttributeClassifier> {
        self.classifiers.iter().find(|c| c.word == word)
    }

    pub fn classifier_mut(&mut self, word: &str) -> Option<&mut AttributeClassifier> {
        self.classifiers.iter_mut().find(|c| c.word == word)
    }

    fn in_category(&self, category: Category) -> impl Iterator<Item = &AttributeClassifier> {
        self.classifiers.iter().filter(move |c| c.category == category)
    }

    /// Highest-scoring word of a category; ties go to the earliest word in
    /// inventory order.
    pub fn best_prediction(&self, category: Category, features: &[f64]) -> Result<(String, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for c in self.in_category(category) {
            let p = c.predict_proba(features)?;
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((&c.word, p));
            }
        }
        let (w, p) = best.expect("grounding map has a classifier per category");
        Ok((w.to_string(), p))
    }

    /// Per-word confidences for one object, in inventory order.
    pub fn confidences(&self, object: &VisualObject) -> Result<Vec<(String, f64)>> {
        self.classifiers
            .iter()
            .map(|c| Ok((c.word.clone(), c.predict_proba(object.features(c.category))?)))
            .collect()
    }

    /// One-vs-rest update: a positive step for `word` and a negative step for
    /// every other word of the same category.
    pub fn learn_from_label(&mut self, object: &VisualObject, word: &str) -> Result<()> {
        let category = self.inventory.category_of(word).ok_or_else(|| Error::UnknownAttribute(word.to_string()))?;
        let features = object.features(category);
        for c in self.classifiers.iter_mut().filter(|c| c.category == category) {
            let positive = c.word == word;
            c.sgd_step(features, positive)?;
        }
        Ok(())
    }

    /// Fraction of objects whose argmax word matches the label, per category.
    pub fn accuracy(&self, objects: &[VisualObject]) -> Result<Accuracy> {
        let mut correct = [0usize; 2];
        let mut joint = 0usize;
        for o in objects {
            let mut both = true;
            for (i, cat) in Category::ALL.iter().enumerate() {
                let (w, _) = self.best_prediction(*cat, o.features(*cat))?;
                if w == o.label(*cat) {
                    correct[i] += 1;
                } else {
                    both = false;
                }
            }
            joint += usize::from(both);
        }
        let n = objects.len().max(1) as f64;
        Ok(Accuracy {
            colour: correct[0] as f64 / n,
            shape: correct[1] as f64 / n,
            joint: joint as f64 / n,
        })
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{GROUNDING_HEADER}")?;
        writeln!(out, "colours\t{}", self.inventory.colours.join(","))?;
        writeln!(out, "shapes\t{}", self.inventory.shapes.join(","))?;
        for c in &self.classifiers {
            let w: Vec<String> = c.weights.iter().map(f64::to_string).collect();
            writeln!(
                out,
                "word\t{}\t{}\t{}\t{}\t{}\t{}",
                c.word,
                c.category,
                c.updates_seen,
                c.learning_rate,
                c.l2,
                w.join(",")
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut colours = None;
        let mut shapes = None;
        let mut classifiers = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let bad = |reason: &str| Error::Format { line: lineno, reason: reason.to_string() };
            if i == 0 {
                if line.trim() != GROUNDING_HEADER {
                    return Err(bad("missing grounding header"));
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let list = |s: &str| s.split(',').map(String::from).collect::<Vec<_>>();
            match fields.as_slice() {
                ["colours", list_s] => colours = Some(list(list_s)),
                ["shapes", list_s] => shapes = Some(list(list_s)),
                ["word", word, cat, seen, eta, l2, weights] => {
                    let weights: Option<Vec<f64>> = weights.split(',').map(|x| x.parse().ok()).collect();
                    classifiers.push(AttributeClassifier {
                        word: word.to_string(),
                        category: cat.parse().map_err(|_| bad("bad category"))?,
                        weights: weights.ok_or_else(|| bad("bad weights"))?,
                        learning_rate: eta.parse().map_err(|_| bad("bad learning rate"))?,
                        l2: l2.parse().map_err(|_| bad("bad l2"))?,
                        updates_seen: seen.parse().map_err(|_| bad("bad update count"))?,
                    });
                }
                [""] => {}
                _ => return Err(bad("unrecognised record")),
            }
        }
        let inventory = AttributeInventory {
            colours: colours.ok_or_else(|| Error::Format { line: 0, reason: "missing colours".into() })?,
            shapes: shapes.ok_or_else(|| Error::Format { line: 0, reason: "missing shapes".into() })?,
        };
        inventory.validate()?;
        let expected: Vec<&str> = inventory.words().collect();
        let got: Vec<&str> = classifiers.iter().map(|c| c.word.as_str()).collect();
        if expected != got {
            return Err(Error::Format { line: 0, reason: "classifiers do not match inventory".into() });
        }
        Ok(Self { inventory, classifiers })
    }
}

const GROUNDING_HEADER: &str = "# vislearn-grounding v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub colour: f64,
    pub shape: f64,
    /// Both attributes right on the same object.
    pub joint: f64,
}

impl Accuracy {
    /// Mean per-attribute accuracy; the headline metric.
    pub fn mean(&self) -> f64 {
        (self.colour + self.shape) / 2.0
    }
}
