//! Synthetic visual-object world.
//!
//! Each object carries a 3-component HSV-like colour vector and an
//! `D`-bin shape descriptor histogram. Features are drawn around fixed
//! per-attribute prototypes with truncated Gaussian noise.
//!
//! Colour prototypes (hue, saturation, value):
//!
//! | word   | prototype          |
//! |--------|--------------------|
//! | black  | (0.50, 0.20, 0.20) |
//! | blue   | (0.60, 0.80, 0.50) |
//! | green  | (0.35, 0.20, 0.80) |
//! | orange | (0.20, 0.50, 0.20) |
//! | purple | (0.80, 0.50, 0.80) |
//! | red    | (0.00, 0.90, 0.90) |
//!
//! The five non-red colours sit close enough that an online learner can be
//! confidently wrong for a while; each is still linearly separable from the
//! rest at the noise levels the world is meant for.
//!
//! Shape prototypes are positional: the `i`-th shape of the inventory puts
//! mass 0.8 on bin `i` and spreads 0.2 evenly over the remaining bins.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLOUR_DIM: usize = 3;
pub const DEFAULT_SHAPE_BINS: usize = 8;
const SHAPE_PEAK_MASS: f64 = 0.8;
const MAX_IMBALANCE: f64 = 1.5;

/// Known colour prototypes, in HSV-like coordinates.
pub const COLOUR_PROTOTYPES: [(&str, [f64; 3]); 6] = [
    ("black", [0.50, 0.20, 0.20]),
    ("blue", [0.60, 0.80, 0.50]),
    ("green", [0.35, 0.20, 0.80]),
    ("orange", [0.20, 0.50, 0.20]),
    ("purple", [0.80, 0.50, 0.80]),
    ("red", [0.00, 0.90, 0.90]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Colour,
    Shape,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Colour, Category::Shape];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Colour => "colour",
            Category::Shape => "shape",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "colour" | "color" => Ok(Category::Colour),
            "shape" => Ok(Category::Shape),
            other => Err(Error::MalformedTag(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeInventory {
    pub colours: Vec<String>,
    pub shapes: Vec<String>,
}

impl Default for AttributeInventory {
    fn default() -> Self {
        Self {
            colours: ["black", "blue", "green", "orange", "purple", "red"]
                .map(String::from)
                .to_vec(),
            shapes: ["circle", "square", "triangle"].map(String::from).to_vec(),
        }
    }
}

impl AttributeInventory {
    pub fn validate(&self) -> Result<()> {
        if self.colours.is_empty() || self.shapes.is_empty() {
            return Err(Error::InvalidConfig("inventory needs at least one colour and one shape".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for w in self.words() {
            if !seen.insert(w) {
                return Err(Error::InvalidConfig(format!("duplicate attribute word `{w}`")));
            }
        }
        Ok(())
    }

    pub fn words_in(&self, category: Category) -> &[String] {
        match category {
            Category::Colour => &self.colours,
            Category::Shape => &self.shapes,
        }
    }

    /// All words, colours first, in inventory order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.colours.iter().chain(self.shapes.iter()).map(String::as_str)
    }

    pub fn category_of(&self, word: &str) -> Option<Category> {
        if self.colours.iter().any(|c| c == word) {
            Some(Category::Colour)
        } else if self.shapes.iter().any(|s| s == word) {
            Some(Category::Shape)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.colours.len() + self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualObject {
    pub id: u64,
    pub colour: String,
    pub shape: String,
    pub colour_features: Vec<f64>,
    pub shape_features: Vec<f64>,
}

impl VisualObject {
    pub fn features(&self, category: Category) -> &[f64] {
        match category {
            Category::Colour => &self.colour_features,
            Category::Shape => &self.shape_features,
        }
    }

    pub fn label(&self, category: Category) -> &str {
        match category {
            Category::Colour => &self.colour,
            Category::Shape => &self.shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub inventory: AttributeInventory,
    pub noise_sigma: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub shape_bins: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            inventory: AttributeInventory::default(),
            noise_sigma: 0.08,
            train_size: 500,
            test_size: 100,
            shape_bins: DEFAULT_SHAPE_BINS,
            seed: 1,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        self.inventory.validate()?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise_sigma must be a non-negative real".into()));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::InvalidConfig("train_size and test_size must be at least 1".into()));
        }
        if self.inventory.shapes.len() > self.shape_bins {
            return Err(Error::InvalidConfig(format!(
                "{} shapes do not fit in {} descriptor bins",
                self.inventory.shapes.len(),
                self.shape_bins
            )));
        }
        for c in &self.inventory.colours {
            self.prototype(c)?;
        }
        for (split, n) in [("train", self.train_size), ("test", self.test_size)] {
            for k in [self.inventory.colours.len(), self.inventory.shapes.len()] {
                if !balance_satisfiable(n, k) {
                    return Err(Error::InvalidConfig(format!(
                        "{split} split of {n} objects cannot keep {k} classes within imbalance ratio {MAX_IMBALANCE}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Prototype feature vector for a colour or shape word.
    pub fn prototype(&self, word: &str) -> Result<Vec<f64>> {
        match self.inventory.category_of(word) {
            Some(Category::Colour) => COLOUR_PROTOTYPES
                .iter()
                .find(|(name, _)| *name == word)
                .map(|(_, p)| p.to_vec())
                .ok_or_else(|| Error::InvalidConfig(format!("no colour prototype for `{word}`"))),
            Some(Category::Shape) => {
                let idx = self.inventory.shapes.iter().position(|s| s == word).unwrap();
                let rest = (1.0 - SHAPE_PEAK_MASS) / (self.shape_bins - 1) as f64;
                let mut h = vec![rest; self.shape_bins];
                h[idx] = SHAPE_PEAK_MASS;
                Ok(h)
            }
            None => Err(Error::UnknownAttribute(word.to_string())),
        }
    }

    pub fn feature_dim(&self, category: Category) -> usize {
        match category {
            Category::Colour => COLOUR_DIM,
            Category::Shape => self.shape_bins,
        }
    }
}

/// Round-robin labelling keeps per-class counts within one of each other.
fn balance_satisfiable(n: usize, classes: usize) -> bool {
    let lo = n / classes;
    let hi = lo + usize::from(n % classes != 0);
    lo > 0 && hi as f64 / lo as f64 <= MAX_IMBALANCE
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<VisualObject>,
    pub test: Vec<VisualObject>,
}

pub fn generate_dataset(config: &WorldConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train = generate_split(config, 0, config.train_size, &mut rng)?;
    let test = generate_split(config, config.train_size as u64, config.test_size, &mut rng)?;
    Ok(Dataset { train, test })
}

fn generate_split(config: &WorldConfig, first_id: u64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<VisualObject>> {
    let inv = &config.inventory;
    let (nc, ns) = (inv.colours.len(), inv.shapes.len());
    // Colour and shape labels are dealt round-robin independently, then
    // paired after shuffling so every combination can occur.
    let mut colours: Vec<usize> = (0..n).map(|i| i % nc).collect();
    let mut shapes: Vec<usize> = (0..n).map(|i| i % ns).collect();
    colours.shuffle(rng);
    shapes.shuffle(rng);

    let noise = if config.noise_sigma > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };

    let mut out = Vec::with_capacity(n);
    for (i, (&c, &s)) in colours.iter().zip(&shapes).enumerate() {
        let colour = inv.colours[c].clone();
        let shape = inv.shapes[s].clone();
        let mut colour_features = config.prototype(&colour)?;
        let mut shape_features = config.prototype(&shape)?;
        if let Some(noise) = &noise {
            for v in colour_features.iter_mut() {
                *v = truncated(*v, noise, 0.0, 1.0, rng);
            }
            for v in shape_features.iter_mut() {
                *v = truncated(*v, noise, 0.0, f64::INFINITY, rng);
            }
            let total: f64 = shape_features.iter().sum();
            shape_features.iter_mut().for_each(|v| *v /= total);
        }
        out.push(VisualObject {
            id: first_id + i as u64,
            colour,
            shape,
            colour_features,
            shape_features,
        });
    }
    Ok(out)
}

/// Rejection-sampled truncated normal around `mean`.
fn truncated<R: Rng>(mean: f64, noise: &Normal<f64>, lo: f64, hi: f64, rng: &mut R) -> f64 {
    for _ in 0..64 {
        let v = mean + noise.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

const DATASET_HEADER: &str = "# vislearn-dataset v1";

/// Writes the dataset as one tab-separated record per object:
/// `split id colour shape c1,c2,c3 s1,...,sD`.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "{DATASET_HEADER}")?;
    for (split, objects) in [("train", &dataset.train), ("test", &dataset.test)] {
        for o in objects.iter() {
            writeln!(
                out,
                "{split}\t{}\t{}\t{}\t{}\t{}",
                o.id,
                o.colour,
                o.shape,
                join_floats(&o.colour_features),
                join_floats(&o.shape_features)
            )?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != DATASET_HEADER {
                return Err(Error::Format { line: lineno, reason: "missing dataset header".into() });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |reason: &str| Error::Format { line: lineno, reason: reason.to_string() };
        if fields.len() != 6 {
            return Err(bad("expected 6 tab-separated fields"));
        }
        let object = VisualObject {
            id: fields[1].parse().map_err(|_| bad("bad id"))?,
            colour: fields[2].to_string(),
            shape: fields[3].to_string(),
            colour_features: parse_floats(fields[4]).ok_or_else(|| bad("bad colour features"))?,
            shape_features: parse_floats(fields[5]).ok_or_else(|| bad("bad shape features"))?,
        };
        match fields[0] {
            "train" => train.push(object),
            "test" => test.push(object),
            _ => return Err(bad("split must be train or test")),
        }
    }
    Ok(Dataset { train, test })
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_floats(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|x| x.parse().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(objects: &[VisualObject], words: &[String], category: Category) -> Vec<usize> {
        words
            .iter()
            .map(|w| objects.iter().filter(|o| o.label(category) == w).count())
            .collect()
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = WorldConfig::default();
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a.train.len(), 500);
        assert_eq!(a.test.len(), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_gives_prototypes() {
        let cfg = WorldConfig { noise_sigma: 0.0, ..Default::default() };
        let ds = generate_dataset(&cfg).unwrap();
        for o in ds.train.iter().chain(&ds.test) {
            assert_eq!(o.colour_features, cfg.prototype(&o.colour).unwrap());
            assert_eq!(o.shape_features, cfg.prototype(&o.shape).unwrap());
        }
    }

    #[test]
    fn labels_are_balanced() {
        let cfg = WorldConfig::default();
        let ds = generate_dataset(&cfg).unwrap();
        for (cat, words) in [(Category::Colour, &cfg.inventory.colours), (Category::Shape, &cfg.inventory.shapes)] {
            let c = counts(&ds.train, words, cat);
            let (lo, hi) = (*c.iter().min().unwrap(), *c.iter().max().unwrap());
            assert!(lo > 0 && hi as f64 / lo as f64 <= 1.5, "{cat}: {c:?}");
        }
    }

    #[test]
    fn features_respect_ranges() {
        let cfg = WorldConfig { noise_sigma: 0.3, ..Default::default() };
        let ds = generate_dataset(&cfg).unwrap();
        for o in ds.train.iter().chain(&ds.test) {
            assert!(o.colour_features.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(o.shape_features.iter().all(|v| *v >= 0.0));
            let total: f64 = o.shape_features.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        let ids: std::collections::HashSet<u64> = ds.train.iter().chain(&ds.test).map(|o| o.id).collect();
        assert_eq!(ids.len(), 600);
    }

    #[test]
    fn prototype_table() {
        let cfg = WorldConfig::default();
        assert_eq!(cfg.prototype("red").unwrap(), vec![0.00, 0.9, 0.9]);
        let circle = cfg.prototype("circle").unwrap();
        assert_eq!(circle[0], 0.8);
        for v in &circle[1..] {
            assert!((v - 0.2 / 7.0).abs() < 1e-15);
        }
        assert!(matches!(cfg.prototype("not-a-colour"), Err(Error::UnknownAttribute(_))));
    }

    #[test]
    fn rejects_unbalanceable_sizes() {
        let cfg = WorldConfig { train_size: 7, ..Default::default() };
        assert!(matches!(generate_dataset(&cfg), Err(Error::InvalidConfig(_))));
        let cfg = WorldConfig { test_size: 5, ..Default::default() };
        assert!(generate_dataset(&cfg).is_err());
        let cfg = WorldConfig { train_size: 0, ..Default::default() };
        assert!(generate_dataset(&cfg).is_err());
    }

    #[test]
    fn dataset_file_round_trip() {
        let cfg = WorldConfig { train_size: 60, test_size: 18, ..Default::default() };
        let ds = generate_dataset(&cfg).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }
}
