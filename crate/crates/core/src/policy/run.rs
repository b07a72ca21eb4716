//! A learning run: a stream of training objects, one dialogue each, with
//! held-out evaluation and a threshold decision after every bin of objects.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::episode::{run_dialogue_episode, DialoguePolicy, DialogueRewards, Episode, SarsaPolicy};
use super::qtable::QTable;
use super::state::{DialogueState, LearnerAction};
use super::threshold::{
    apply_threshold_action, delta_acc_level, threshold_reward, Schedule, Threshold, ThresholdAction, ThresholdState,
    THRESHOLD_BINS,
};
use crate::error::{Error, Result};
use crate::tutor::{CostCounts, TutorModel};
use crate::vision::{Accuracy, GroundingMap};
use crate::world::VisualObject;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySettings {
    pub alpha: f64,
    pub gamma: f64,
    /// Exploration rate while training.
    pub epsilon: f64,
    /// Scale of the threshold reward per unit of accuracy change.
    pub reward_scale: f64,
    pub penalty: f64,
    pub success_reward: f64,
    pub turn_cap: usize,
    pub initial_threshold: f64,
    /// Objects per learning step.
    pub bin_size: usize,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 1.0,
            epsilon: 0.2,
            reward_scale: 100.0,
            penalty: 2.0,
            success_reward: 10.0,
            turn_cap: 30,
            initial_threshold: 0.95,
            bin_size: 10,
        }
    }
}

impl PolicySettings {
    pub fn rewards(&self) -> DialogueRewards {
        DialogueRewards { success: self.success_reward, penalty: self.penalty, turn_cap: self.turn_cap }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if ![self.reward_scale, self.penalty, self.success_reward].iter().all(|v| v.is_finite()) {
            return bad("reward constants must be finite");
        }
        if self.turn_cap < 2 || self.bin_size == 0 {
            return bad("turn_cap must be at least 2 and bin_size at least 1");
        }
        if Threshold::from_value(self.initial_threshold).is_none() {
            return bad("initial_threshold must be on the 0.05 grid in [0.65, 0.95]");
        }
        Ok(())
    }
}

/// SARSA over threshold states, one decision per bin.
#[derive(Debug, Clone)]
pub struct ThresholdLearner {
    pub q: QTable<ThresholdState, ThresholdAction>,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub learn: bool,
    pending: Option<(ThresholdState, ThresholdAction)>,
}

impl ThresholdLearner {
    pub fn new(q: QTable<ThresholdState, ThresholdAction>, epsilon: f64, alpha: f64, gamma: f64) -> Self {
        Self { q, epsilon, alpha, gamma, learn: true, pending: None }
    }

    pub fn frozen(q: QTable<ThresholdState, ThresholdAction>) -> Self {
        Self { q, epsilon: 0.0, alpha: 0.0, gamma: 1.0, learn: false, pending: None }
    }

    /// Credits `reward` to the previous decision and picks the next one; with
    /// `state == None` the episode ends.
    fn step(&mut self, reward: f64, state: Option<ThresholdState>, rng: &mut dyn RngCore) -> Result<Option<ThresholdAction>> {
        let next = match state {
            Some(s) => Some((s, self.q.select(&s, &ThresholdAction::ALL, self.epsilon, rng)?)),
            None => None,
        };
        if let Some((ps, pa)) = self.pending.take() {
            if self.learn {
                self.q.update(&ps, pa, reward, next.as_ref().map(|(s, a)| (s, *a)), self.alpha, self.gamma)?;
            }
        }
        self.pending = next;
        Ok(next.map(|(_, a)| a))
    }
}

#[derive(Debug, Clone)]
pub enum ThresholdControl {
    Schedule(Schedule),
    Learned(ThresholdLearner),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub instances: usize,
    /// Mean of colour and shape accuracy.
    pub accuracy: f64,
    pub joint_accuracy: f64,
    pub cumulative_cost: f64,
    /// Threshold used during the bin that just ended.
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct LearningRun {
    pub map: GroundingMap,
    test: Vec<VisualObject>,
    pub control: ThresholdControl,
    settings: PolicySettings,
    total_bins: usize,
    threshold: f64,
    bin: usize,
    in_bin: usize,
    prev_accuracy: f64,
    pub initial_accuracy: Accuracy,
    pub curve: Vec<CurvePoint>,
    pub cumulative_cost: f64,
    pub counts: CostCounts,
    pub penalties: u64,
    pub capped: u64,
    pub dialogues: usize,
}

impl LearningRun {
    /// `instances` is the planned number of training objects.
    pub fn new(
        map: GroundingMap,
        test: Vec<VisualObject>,
        control: ThresholdControl,
        settings: PolicySettings,
        instances: usize,
    ) -> Result<Self> {
        settings.validate()?;
        if test.is_empty() {
            return Err(Error::InvalidConfig("evaluation needs at least one test object".into()));
        }
        let initial_accuracy = map.accuracy(&test)?;
        let threshold = match &control {
            ThresholdControl::Schedule(s) => s.threshold_at(0),
            ThresholdControl::Learned(_) => settings.initial_threshold,
        };
        Ok(Self {
            map,
            test,
            control,
            settings,
            total_bins: instances.div_ceil(settings.bin_size),
            threshold,
            bin: 0,
            in_bin: 0,
            prev_accuracy: initial_accuracy.mean(),
            initial_accuracy,
            curve: Vec::new(),
            cumulative_cost: 0.0,
            counts: CostCounts::default(),
            penalties: 0,
            capped: 0,
            dialogues: 0,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn settings(&self) -> &PolicySettings {
        &self.settings
    }

    pub fn test_objects(&self) -> &[VisualObject] {
        &self.test
    }

    pub fn is_complete(&self) -> bool {
        self.bin >= self.total_bins
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.curve.iter().map(|p| p.threshold).collect()
    }

    pub fn final_accuracy(&self) -> f64 {
        self.curve.last().map_or(self.initial_accuracy.mean(), |p| p.accuracy)
    }

    /// Books a finished dialogue; at the end of a bin evaluates and adjusts
    /// the threshold, returning the new curve point.
    pub fn finish_dialogue(&mut self, episode: &Episode, rng: &mut dyn RngCore) -> Result<Option<CurvePoint>> {
        if self.is_complete() {
            return Err(Error::Precondition("learning run already complete".into()));
        }
        self.cumulative_cost += episode.ledger.total();
        let c = episode.ledger.counts();
        self.counts.informs += c.informs;
        self.counts.acks += c.acks;
        self.counts.corrections += c.corrections;
        self.penalties += episode.penalties as u64;
        self.capped += episode.capped as u64;
        self.dialogues += 1;
        self.in_bin += 1;
        if self.in_bin < self.settings.bin_size {
            return Ok(None);
        }
        self.end_bin(rng).map(Some)
    }

    /// Closes a partly filled last bin.
    pub fn flush(&mut self, rng: &mut dyn RngCore) -> Result<Option<CurvePoint>> {
        if self.in_bin == 0 || self.is_complete() {
            return Ok(None);
        }
        self.end_bin(rng).map(Some)
    }

    fn end_bin(&mut self, rng: &mut dyn RngCore) -> Result<CurvePoint> {
        let acc = self.map.accuracy(&self.test)?;
        let point = CurvePoint {
            instances: self.dialogues,
            accuracy: acc.mean(),
            joint_accuracy: acc.joint,
            cumulative_cost: self.cumulative_cost,
            threshold: self.threshold,
        };
        self.curve.push(point);
        let b = self.bin;
        let last = b + 1 >= self.total_bins;
        let k = self.settings.reward_scale;
        self.threshold = match &mut self.control {
            ThresholdControl::Schedule(s) => s.threshold_at(b + 1),
            ThresholdControl::Learned(learner) => {
                let reward = threshold_reward(self.prev_accuracy, point.accuracy, k);
                let thd = Threshold::from_value(self.threshold).expect("learned thresholds stay on the grid");
                let state = ThresholdState {
                    bin: b.min(THRESHOLD_BINS - 1) as u8,
                    threshold: thd,
                    level: delta_acc_level(self.prev_accuracy, point.accuracy),
                };
                match learner.step(reward, (!last).then_some(state), rng)? {
                    Some(a) => apply_threshold_action(thd, a).value(),
                    None => self.threshold,
                }
            }
        };
        self.prev_accuracy = point.accuracy;
        self.bin += 1;
        self.in_bin = 0;
        Ok(point)
    }
}

/// Everything a simulated run produced.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub initial_accuracy: Accuracy,
    pub final_accuracy: Accuracy,
    pub curve: Vec<CurvePoint>,
    pub thresholds: Vec<f64>,
    pub total_cost: f64,
    pub counts: CostCounts,
    pub penalties: u64,
    pub capped: u64,
    /// Tutor utterances per dialogue, when requested.
    pub transcripts: Option<Vec<Vec<String>>>,
}

pub struct SimulationRngs<'a> {
    pub learner: &'a mut dyn RngCore,
    pub tutor: &'a mut dyn RngCore,
    pub threshold: &'a mut dyn RngCore,
}

/// Runs every training object through a simulated dialogue.
pub fn simulate_run(
    run: &mut LearningRun,
    policy: &mut dyn DialoguePolicy,
    tutor: &TutorModel,
    train: &[VisualObject],
    rngs: SimulationRngs<'_>,
    keep_transcripts: bool,
) -> Result<RunTrace> {
    let rewards = run.settings.rewards();
    let mut transcripts = keep_transcripts.then(Vec::new);
    for object in train {
        let thd = run.threshold();
        let out = run_dialogue_episode(policy, &mut run.map, tutor, object, thd, rngs.learner, rngs.tutor, &rewards)?;
        if let Some(t) = transcripts.as_mut() {
            t.push(out.tutor_utterances.clone());
        }
        run.finish_dialogue(&out.episode, rngs.threshold)?;
    }
    run.flush(rngs.threshold)?;
    Ok(RunTrace {
        initial_accuracy: run.initial_accuracy,
        final_accuracy: run.map.accuracy(run.test_objects())?,
        curve: run.curve.clone(),
        thresholds: run.thresholds(),
        total_cost: run.cumulative_cost,
        counts: run.counts,
        penalties: run.penalties,
        capped: run.capped,
        transcripts,
    })
}

/// The two learned tables of the hierarchical learner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Agent {
    pub dialogue: QTable<DialogueState, LearnerAction>,
    pub threshold: QTable<ThresholdState, ThresholdAction>,
}

impl Agent {
    /// One learning run with exploration; the tables are updated in place.
    pub fn train_run(
        &mut self,
        map: GroundingMap,
        train: &[VisualObject],
        test: Vec<VisualObject>,
        tutor: &TutorModel,
        settings: &PolicySettings,
        rngs: SimulationRngs<'_>,
    ) -> Result<RunTrace> {
        let s = settings;
        let mut policy = SarsaPolicy::new(std::mem::take(&mut self.dialogue), s.epsilon, s.alpha, s.gamma);
        let learner = ThresholdLearner::new(std::mem::take(&mut self.threshold), s.epsilon, s.alpha, s.gamma);
        let mut run = LearningRun::new(map, test, ThresholdControl::Learned(learner), *s, train.len())?;
        let result = simulate_run(&mut run, &mut policy, tutor, train, rngs, false);
        self.dialogue = policy.q;
        if let ThresholdControl::Learned(l) = run.control {
            self.threshold = l.q;
        }
        result
    }

    /// A greedy run that leaves the tables untouched.
    pub fn evaluate_run(
        &self,
        map: GroundingMap,
        train: &[VisualObject],
        test: Vec<VisualObject>,
        tutor: &TutorModel,
        settings: &PolicySettings,
        rngs: SimulationRngs<'_>,
        keep_transcripts: bool,
    ) -> Result<RunTrace> {
        let mut policy = SarsaPolicy::frozen(self.dialogue.clone());
        let learner = ThresholdLearner::frozen(self.threshold.clone());
        let mut run = LearningRun::new(map, test, ThresholdControl::Learned(learner), *settings, train.len())?;
        simulate_run(&mut run, &mut policy, tutor, train, rngs, keep_transcripts)
    }
}
