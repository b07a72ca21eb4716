use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thresholds are kept as hundredths so grid arithmetic is exact.
const MIN_HUNDREDTHS: u32 = 65;
const MAX_HUNDREDTHS: u32 = 95;
const STEP_HUNDREDTHS: u32 = 5;

pub const MIN_THRESHOLD: f64 = 0.65;
pub const MAX_THRESHOLD: f64 = 0.95;
pub const THRESHOLD_STEP: f64 = 0.05;
pub const THRESHOLD_BINS: usize = 50;

/// A confidence threshold on the 0.05 grid between 0.65 and 0.95.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(u32);

impl Threshold {
    pub const MIN: Threshold = Threshold(MIN_HUNDREDTHS);
    pub const MAX: Threshold = Threshold(MAX_HUNDREDTHS);

    /// All grid points, lowest first.
    pub fn grid() -> impl Iterator<Item = Threshold> {
        (MIN_HUNDREDTHS..=MAX_HUNDREDTHS).step_by(STEP_HUNDREDTHS as usize).map(Threshold)
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// The grid point equal to `v`, if any.
    pub fn from_value(v: f64) -> Option<Self> {
        Self::grid().find(|t| (t.value() - v).abs() < 1e-9)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.value())
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<f64>()
            .ok()
            .and_then(Threshold::from_value)
            .ok_or_else(|| Error::Format { line: 0, reason: format!("`{s}` is not a grid threshold") })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ThresholdAction {
    Increase,
    Decrease,
    Keep,
}

impl ThresholdAction {
    pub const ALL: [ThresholdAction; 3] = [ThresholdAction::Increase, ThresholdAction::Decrease, ThresholdAction::Keep];
}

impl fmt::Display for ThresholdAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ThresholdAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ThresholdAction::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::Format { line: 0, reason: format!("unknown threshold action `{s}`") })
    }
}

pub fn apply_threshold_action(thd: Threshold, action: ThresholdAction) -> Threshold {
    match action {
        ThresholdAction::Increase => Threshold((thd.0 + STEP_HUNDREDTHS).min(MAX_HUNDREDTHS)),
        ThresholdAction::Decrease => Threshold(thd.0.saturating_sub(STEP_HUNDREDTHS).max(MIN_HUNDREDTHS)),
        ThresholdAction::Keep => thd,
    }
}

/// Sign of the accuracy change, with differences within 1e-12 counted as none.
pub fn delta_acc_level(prev_acc: f64, cur_acc: f64) -> i8 {
    let d = cur_acc - prev_acc;
    if d.abs() <= 1e-12 {
        0
    } else if d > 0.0 {
        1
    } else {
        -1
    }
}

pub fn threshold_reward(prev_acc: f64, cur_acc: f64, k: f64) -> f64 {
    k * (cur_acc - prev_acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThresholdState {
    pub bin: u8,
    pub threshold: Threshold,
    pub level: i8,
}

impl fmt::Display for ThresholdState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.bin, self.threshold, self.level)
    }
}

impl FromStr for ThresholdState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format { line: 0, reason: format!("bad threshold state `{s}`") };
        let parts: Vec<&str> = s.split(',').collect();
        let [bin, thd, level] = parts[..] else { return Err(bad()) };
        let bin: u8 = bin.parse().map_err(|_| bad())?;
        let level: i8 = level.parse().map_err(|_| bad())?;
        if bin as usize >= THRESHOLD_BINS || !(-1..=1).contains(&level) {
            return Err(bad());
        }
        Ok(Self { bin, threshold: thd.parse()?, level })
    }
}

/// Fixed threshold schedules used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant95,
    Decay05,
    Decay01,
}

impl Schedule {
    pub fn threshold_at(self, bin: usize) -> f64 {
        baseline_threshold_schedule(self, bin)
    }
}

pub fn baseline_threshold_schedule(kind: Schedule, bin: usize) -> f64 {
    let drop = match kind {
        Schedule::Constant95 => 0,
        Schedule::Decay05 => 5 * bin,
        Schedule::Decay01 => bin,
    };
    let hundredths = (MAX_HUNDREDTHS as usize).saturating_sub(drop).max(MIN_HUNDREDTHS as usize);
    hundredths as f64 / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> Threshold {
        Threshold::from_value(v).unwrap()
    }

    #[test]
    fn grid() {
        let g: Vec<f64> = Threshold::grid().map(Threshold::value).collect();
        assert_eq!(g, vec![0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95]);
        assert!(Threshold::from_value(0.72).is_none());
        assert_eq!("0.80".parse::<Threshold>().unwrap(), t(0.8));
    }

    #[test]
    fn actions() {
        assert_eq!(apply_threshold_action(t(0.80), ThresholdAction::Increase), t(0.85));
        assert_eq!(apply_threshold_action(t(0.95), ThresholdAction::Increase), t(0.95));
        assert_eq!(apply_threshold_action(t(0.65), ThresholdAction::Decrease), t(0.65));
        assert_eq!(apply_threshold_action(t(0.70), ThresholdAction::Keep), t(0.70));
    }

    #[test]
    fn levels_and_rewards() {
        assert_eq!(delta_acc_level(0.70, 0.75), 1);
        assert_eq!(delta_acc_level(0.75, 0.75), 0);
        assert_eq!(delta_acc_level(0.80, 0.72), -1);
        assert!((threshold_reward(0.70, 0.75, 100.0) - 5.0).abs() < 1e-9);
        assert_eq!(threshold_reward(0.75, 0.75, 100.0), 0.0);
        assert!((threshold_reward(0.80, 0.70, 100.0) + 10.0).abs() < 1e-9);
    }

    #[test]
    fn schedules() {
        assert_eq!(baseline_threshold_schedule(Schedule::Constant95, 37), 0.95);
        assert_eq!(baseline_threshold_schedule(Schedule::Decay05, 3), 0.80);
        assert_eq!(baseline_threshold_schedule(Schedule::Decay01, 49), 0.65);
        assert_eq!(baseline_threshold_schedule(Schedule::Decay01, 10), 0.85);
    }

    #[test]
    fn state_text() {
        let s = ThresholdState { bin: 12, threshold: t(0.9), level: -1 };
        assert_eq!(s.to_string(), "12,0.90,-1");
        assert_eq!(s.to_string().parse::<ThresholdState>().unwrap(), s);
        assert!("50,0.90,0".parse::<ThresholdState>().is_err());
    }
}
