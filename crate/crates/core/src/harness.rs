//! The four-condition experiment: fold seeding, runs, summaries and the
//! tabular outputs behind the learning-curve plots.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dialogue::{TemplateLexicon, BURCHAK_SURFACE};
use crate::error::{Error, Result};
use crate::policy::{
    simulate_run, Agent, CurvePoint, LearningRun, PolicySettings, RulePolicy, RunTrace, Schedule, SimulationRngs,
    ThresholdControl,
};
use crate::tutor::{ActionTable, CostCounts, TutorConfig, TutorModel};
use crate::vision::{Accuracy, GroundingMap, DEFAULT_LEARNING_RATE};
use crate::world::{generate_dataset, Dataset, WorldConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Rl,
    Constant95,
    Decay05,
    Decay01,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Rl, Condition::Constant95, Condition::Decay05, Condition::Decay01];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Rl => "rl",
            Condition::Constant95 => "constant95",
            Condition::Decay05 => "decay05",
            Condition::Decay01 => "decay01",
        }
    }

    pub fn schedule(self) -> Option<Schedule> {
        match self {
            Condition::Rl => None,
            Condition::Constant95 => Some(Schedule::Constant95),
            Condition::Decay05 => Some(Schedule::Decay05),
            Condition::Decay01 => Some(Schedule::Decay01),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown condition `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSettings {
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        Self { learning_rate: DEFAULT_LEARNING_RATE, l2: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlSettings {
    /// Exploring training runs, each on a freshly seeded world, before the
    /// greedy evaluation run of a fold.
    pub pretrain_runs: usize,
}

impl Default for RlSettings {
    fn default() -> Self {
        Self { pretrain_runs: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub folds: usize,
    pub conditions: Vec<Condition>,
    /// `"english"` or `"burchak"` attribute words.
    pub surface: String,
    /// Optional tutor action table (TOML), relative to the working directory.
    pub tutor_table: Option<PathBuf>,
    pub world: WorldConfig,
    pub tutor: TutorConfig,
    pub learner: LearnerSettings,
    pub policy: PolicySettings,
    pub rl: RlSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            folds: 20,
            conditions: Condition::ALL.to_vec(),
            surface: "english".into(),
            tutor_table: None,
            world: WorldConfig::default(),
            tutor: TutorConfig::default(),
            learner: LearnerSettings::default(),
            policy: PolicySettings::default(),
            rl: RlSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(source: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(source)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the serialised config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::InvalidConfig("folds must be at least 1".into()));
        }
        if self.conditions.is_empty() {
            return Err(Error::InvalidConfig("no conditions selected".into()));
        }
        if !matches!(self.surface.as_str(), "english" | "burchak") {
            return Err(Error::InvalidConfig(format!("unknown surface `{}`", self.surface)));
        }
        if !(self.learner.learning_rate > 0.0 && self.learner.learning_rate.is_finite()) || !(self.learner.l2 >= 0.0)
        {
            return Err(Error::InvalidConfig("learner learning_rate must be positive and l2 non-negative".into()));
        }
        self.world.validate()?;
        self.tutor.validate()?;
        self.policy.validate()
    }

    pub fn lexicon(&self) -> Result<TemplateLexicon> {
        let lex = TemplateLexicon::english(&self.world.inventory)?;
        match self.surface.as_str() {
            "burchak" => lex.with_surface_toml(BURCHAK_SURFACE, &self.world.inventory),
            _ => Ok(lex),
        }
    }

    pub fn tutor_model(&self) -> Result<TutorModel> {
        let model = TutorModel::new(self.tutor.clone(), self.lexicon()?)?;
        Ok(match &self.tutor_table {
            Some(p) => model.with_table(ActionTable::from_toml(&fs::read_to_string(p)?)?),
            None => model,
        })
    }

    pub fn fresh_map(&self) -> GroundingMap {
        GroundingMap::new(&self.world).with_learning_rate(self.learner.learning_rate).with_l2(self.learner.l2)
    }

    /// The evaluation world of a fold.
    pub fn fold_dataset(&self, fold: usize) -> Result<Dataset> {
        let world = WorldConfig { seed: derive_seed(self.master_seed, fold, Stream::World), ..self.world.clone() };
        generate_dataset(&world)
    }
}

/// Independent random streams within a fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    World,
    Tutor,
    Learner,
    Threshold,
    PretrainWorld(usize),
    PretrainTutor(usize),
    PretrainLearner(usize),
    PretrainThreshold(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::World => 0,
            Stream::Tutor => 1,
            Stream::Learner => 2,
            Stream::Threshold => 3,
            Stream::PretrainWorld(r) => 16 + 4 * r as u64,
            Stream::PretrainTutor(r) => 17 + 4 * r as u64,
            Stream::PretrainLearner(r) => 18 + 4 * r as u64,
            Stream::PretrainThreshold(r) => 19 + 4 * r as u64,
        }
    }
}

pub fn derive_seed(master: u64, fold: usize, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((fold as u64) << 32) | stream.id());
    rng.next_u64()
}

fn rng_for(master: u64, fold: usize, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, fold, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub condition: Condition,
    pub fold: usize,
    pub initial_accuracy: Accuracy,
    pub final_accuracy: Accuracy,
    pub curve: Vec<CurvePoint>,
    pub thresholds: Vec<f64>,
    pub total_cost: f64,
    pub counts: CostCounts,
    pub penalties: u64,
}

impl RunRecord {
    fn from_trace(condition: Condition, fold: usize, t: RunTrace) -> Self {
        Self {
            condition,
            fold,
            initial_accuracy: t.initial_accuracy,
            final_accuracy: t.final_accuracy,
            curve: t.curve,
            thresholds: t.thresholds,
            total_cost: t.total_cost,
            counts: t.counts,
            penalties: t.penalties,
        }
    }

    pub fn delta_accuracy(&self) -> f64 {
        self.final_accuracy.mean() - self.initial_accuracy.mean()
    }
}

/// Trains a fresh agent for one fold on its own pretraining worlds; returns
/// it with the trace of every training run.
pub fn pretrain_agent(cfg: &ExperimentConfig, fold: usize) -> Result<(Agent, Vec<RunTrace>)> {
    let tutor = cfg.tutor_model()?;
    let mut agent = Agent::default();
    let mut traces = Vec::with_capacity(cfg.rl.pretrain_runs);
    for r in 0..cfg.rl.pretrain_runs {
        let world = WorldConfig { seed: derive_seed(cfg.master_seed, fold, Stream::PretrainWorld(r)), ..cfg.world.clone() };
        let data = generate_dataset(&world)?;
        let mut lr = rng_for(cfg.master_seed, fold, Stream::PretrainLearner(r));
        let mut tr = rng_for(cfg.master_seed, fold, Stream::PretrainTutor(r));
        let mut hr = rng_for(cfg.master_seed, fold, Stream::PretrainThreshold(r));
        let rngs = SimulationRngs { learner: &mut lr, tutor: &mut tr, threshold: &mut hr };
        traces.push(agent.train_run(cfg.fresh_map(), &data.train, data.test, &tutor, &cfg.policy, rngs)?);
    }
    Ok((agent, traces))
}

/// Runs one condition on one fold's evaluation world. The RL condition needs
/// an agent; baselines ignore it.
pub fn evaluate_condition(
    cfg: &ExperimentConfig,
    fold: usize,
    condition: Condition,
    agent: Option<&Agent>,
    keep_transcripts: bool,
) -> Result<(RunRecord, RunTrace)> {
    let tutor = cfg.tutor_model()?;
    let data = cfg.fold_dataset(fold)?;
    let mut lr = rng_for(cfg.master_seed, fold, Stream::Learner);
    let mut tr = rng_for(cfg.master_seed, fold, Stream::Tutor);
    let mut hr = rng_for(cfg.master_seed, fold, Stream::Threshold);
    let rngs = SimulationRngs { learner: &mut lr, tutor: &mut tr, threshold: &mut hr };
    let trace = match condition.schedule() {
        Some(schedule) => {
            let mut run = LearningRun::new(
                cfg.fresh_map(),
                data.test,
                ThresholdControl::Schedule(schedule),
                cfg.policy,
                data.train.len(),
            )?;
            simulate_run(&mut run, &mut RulePolicy, &tutor, &data.train, rngs, keep_transcripts)?
        }
        None => {
            let agent = agent.ok_or_else(|| Error::Precondition("the rl condition needs a trained agent".into()))?;
            agent.evaluate_run(cfg.fresh_map(), &data.train, data.test, &tutor, &cfg.policy, rngs, keep_transcripts)?
        }
    };
    Ok((RunRecord::from_trace(condition, fold, trace.clone()), trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub folds: usize,
    pub initial_accuracy: f64,
    pub final_accuracy_mean: f64,
    pub final_accuracy_std: f64,
    pub final_joint_mean: f64,
    pub total_cost_mean: f64,
    pub total_cost_std: f64,
    pub delta_accuracy_mean: f64,
    pub r_perf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub conditions: Vec<ConditionSummary>,
}

impl Summary {
    pub fn get(&self, condition: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

/// Accuracy gained per unit of tutoring cost.
pub fn r_perf(delta_acc: f64, total_cost: f64) -> Result<f64> {
    if !(total_cost > 0.0) {
        return Err(Error::ZeroCost);
    }
    Ok(delta_acc / total_cost)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn sorted_for(records: &[RunRecord], condition: Condition) -> Vec<&RunRecord> {
    let mut rs: Vec<&RunRecord> = records.iter().filter(|r| r.condition == condition).collect();
    rs.sort_by_key(|r| r.fold);
    rs
}

fn present_conditions(records: &[RunRecord]) -> Vec<Condition> {
    let mut cs: Vec<Condition> = records.iter().map(|r| r.condition).collect();
    cs.sort();
    cs.dedup();
    cs
}

/// Fold means per condition. Records are summed in fold order, so the result
/// does not depend on the order they arrive in.
pub fn summarize(records: &[RunRecord]) -> Summary {
    let conditions = present_conditions(records)
        .into_iter()
        .map(|c| {
            let rs = sorted_for(records, c);
            let col = |f: &dyn Fn(&RunRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let finals = col(&|r| r.final_accuracy.mean());
            let costs = col(&|r| r.total_cost);
            let deltas = col(&|r| r.delta_accuracy());
            let cost_mean = mean(&costs);
            ConditionSummary {
                condition: c,
                folds: rs.len(),
                initial_accuracy: mean(&col(&|r| r.initial_accuracy.mean())),
                final_accuracy_mean: mean(&finals),
                final_accuracy_std: std_dev(&finals),
                final_joint_mean: mean(&col(&|r| r.final_accuracy.joint)),
                total_cost_mean: cost_mean,
                total_cost_std: std_dev(&costs),
                delta_accuracy_mean: mean(&deltas),
                r_perf: r_perf(mean(&deltas), cost_mean).unwrap_or(f64::NAN),
            }
        })
        .collect();
    Summary { conditions }
}

/// Fold-averaged curve of one condition: (instances, acc mean, acc std,
/// joint mean, joint std, cost mean, cost std).
pub type AveragedPoint = (usize, f64, f64, f64, f64, f64, f64);

pub fn average_curve(records: &[RunRecord], condition: Condition) -> Vec<AveragedPoint> {
    let rs = sorted_for(records, condition);
    let bins = rs.iter().map(|r| r.curve.len()).min().unwrap_or(0);
    (0..bins)
        .map(|b| {
            let acc: Vec<f64> = rs.iter().map(|r| r.curve[b].accuracy).collect();
            let joint: Vec<f64> = rs.iter().map(|r| r.curve[b].joint_accuracy).collect();
            let cost: Vec<f64> = rs.iter().map(|r| r.curve[b].cumulative_cost).collect();
            (
                rs[0].curve[b].instances,
                mean(&acc),
                std_dev(&acc),
                mean(&joint),
                std_dev(&joint),
                mean(&cost),
                std_dev(&cost),
            )
        })
        .collect()
}

pub const ACCURACY_CURVE_FILE: &str = "accuracy_vs_instances.tsv";
pub const COST_CURVE_FILE: &str = "cost_vs_instances.tsv";
pub const TRADEOFF_CURVE_FILE: &str = "accuracy_vs_cost.tsv";

/// Writes the three fold-averaged curve tables into `dir`.
pub fn emit_curves(records: &[RunRecord], dir: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Precondition("no run records to write".into()));
    }
    fs::create_dir_all(dir)?;
    let mut acc = String::from("condition\tbin\tinstances\taccuracy_mean\taccuracy_std\tjoint_mean\tjoint_std\n");
    let mut cost = String::from("condition\tbin\tinstances\tcost_mean\tcost_std\n");
    let mut trade = String::from("condition\tbin\tcost_mean\taccuracy_mean\taccuracy_std\n");
    for c in present_conditions(records) {
        for (b, (n, am, asd, jm, jsd, cm, csd)) in average_curve(records, c).into_iter().enumerate() {
            acc.push_str(&format!("{c}\t{b}\t{n}\t{am:.6}\t{asd:.6}\t{jm:.6}\t{jsd:.6}\n"));
            cost.push_str(&format!("{c}\t{b}\t{n}\t{cm:.4}\t{csd:.4}\n"));
            trade.push_str(&format!("{c}\t{b}\t{cm:.4}\t{am:.6}\t{asd:.6}\n"));
        }
    }
    fs::write(dir.join(ACCURACY_CURVE_FILE), acc)?;
    fs::write(dir.join(COST_CURVE_FILE), cost)?;
    fs::write(dir.join(TRADEOFF_CURVE_FILE), trade)?;
    Ok(())
}

/// One row per (training run, bin) of a pretraining sequence.
pub fn training_curves_table(traces: &[RunTrace]) -> String {
    let mut out = String::from("run\tbin\tinstances\tthreshold\taccuracy\tjoint_accuracy\tcumulative_cost\n");
    for (r, t) in traces.iter().enumerate() {
        for (b, p) in t.curve.iter().enumerate() {
            out.push_str(&format!(
                "{r}\t{b}\t{}\t{:.2}\t{:.6}\t{:.6}\t{:.4}\n",
                p.instances, p.threshold, p.accuracy, p.joint_accuracy, p.cumulative_cost
            ));
        }
    }
    out
}

pub fn summary_table(summary: &Summary) -> String {
    let mut out = String::from(
        "condition\tfolds\tinitial_accuracy\tfinal_accuracy_mean\tfinal_accuracy_std\tfinal_joint_mean\t\
         total_cost_mean\ttotal_cost_std\tdelta_accuracy_mean\tr_perf\n",
    );
    for c in &summary.conditions {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{:.4}\t{:.6}\t{:.8}\n",
            c.condition,
            c.folds,
            c.initial_accuracy,
            c.final_accuracy_mean,
            c.final_accuracy_std,
            c.final_joint_mean,
            c.total_cost_mean,
            c.total_cost_std,
            c.delta_accuracy_mean,
            c.r_perf
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    /// Trained agents by fold, when the RL condition ran.
    pub agents: Vec<Agent>,
}

/// All selected conditions on all folds; folds run in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let per_fold: Vec<Result<(Vec<RunRecord>, Option<Agent>)>> = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| {
            let agent = if cfg.conditions.contains(&Condition::Rl) { Some(pretrain_agent(cfg, fold)?.0) } else { None };
            let mut records = Vec::new();
            for &c in &cfg.conditions {
                records.push(evaluate_condition(cfg, fold, c, agent.as_ref(), false)?.0);
            }
            Ok((records, agent))
        })
        .collect();
    let mut records = Vec::new();
    let mut agents = Vec::new();
    for r in per_fold {
        let (rs, agent) = r?;
        records.extend(rs);
        agents.extend(agent);
    }
    let summary = summarize(&records);
    Ok(ExperimentOutput { records, summary, agents })
}

/// Writes curves, summary, per-fold records, Q-tables, the config and a
/// manifest into `dir`. Nothing written depends on time or thread order.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    emit_curves(&out.records, dir)?;
    fs::write(dir.join("summary.tsv"), summary_table(&out.summary))?;
    let mut rec = String::from("condition\tfold\tbin\tinstances\tthreshold\taccuracy\tjoint_accuracy\tcumulative_cost\n");
    let mut sorted: Vec<&RunRecord> = out.records.iter().collect();
    sorted.sort_by_key(|r| (r.condition, r.fold));
    for r in sorted {
        for (b, p) in r.curve.iter().enumerate() {
            rec.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.2}\t{:.6}\t{:.6}\t{:.4}\n",
                r.condition, r.fold, b, p.instances, p.threshold, p.accuracy, p.joint_accuracy, p.cumulative_cost
            ));
        }
    }
    fs::write(dir.join("records.tsv"), rec)?;
    if !out.agents.is_empty() {
        let qdir = dir.join("qtables");
        fs::create_dir_all(&qdir)?;
        for (fold, agent) in out.agents.iter().enumerate() {
            fs::write(qdir.join(format!("fold{fold:02}_dialogue.qtable")), agent.dialogue.to_text())?;
            fs::write(qdir.join(format!("fold{fold:02}_threshold.qtable")), agent.threshold.to_text())?;
        }
    }
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_manifest(cfg, dir, &["summary.tsv", "records.tsv", ACCURACY_CURVE_FILE, COST_CURVE_FILE, TRADEOFF_CURVE_FILE])
}

pub fn write_manifest(cfg: &ExperimentConfig, dir: &Path, files: &[&str]) -> Result<()> {
    let mut m = fs::File::create(dir.join("manifest.toml"))?;
    writeln!(m, "tool = \"vislearn {}\"", env!("CARGO_PKG_VERSION"))?;
    writeln!(m, "config_sha256 = \"{}\"", cfg.hash())?;
    writeln!(m, "master_seed = {}", cfg.master_seed)?;
    writeln!(m, "folds = {}", cfg.folds)?;
    let conds: Vec<String> = cfg.conditions.iter().map(|c| format!("\"{c}\"")).collect();
    writeln!(m, "conditions = [{}]", conds.join(", "))?;
    writeln!(m, "files = [{}]", files.iter().map(|f| format!("\"{f}\"")).collect::<Vec<_>>().join(", "))?;
    writeln!(m)?;
    for fold in 0..cfg.folds {
        writeln!(m, "[[fold]]")?;
        writeln!(m, "index = {fold}")?;
        writeln!(m, "world_seed = {}", derive_seed(cfg.master_seed, fold, Stream::World))?;
        writeln!(m, "tutor_seed = {}", derive_seed(cfg.master_seed, fold, Stream::Tutor))?;
        writeln!(m, "learner_seed = {}", derive_seed(cfg.master_seed, fold, Stream::Learner))?;
        writeln!(m, "threshold_seed = {}", derive_seed(cfg.master_seed, fold, Stream::Threshold))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            folds: 2,
            world: WorldConfig { train_size: 40, test_size: 20, ..Default::default() },
            rl: RlSettings { pretrain_runs: 2 },
            ..Default::default()
        }
    }

    #[test]
    fn r_perf_values() {
        assert!((r_perf(0.4, 200.0).unwrap() - 0.002).abs() < 1e-15);
        assert_eq!(r_perf(0.0, 200.0).unwrap(), 0.0);
        assert!((r_perf(0.35, 175.0).unwrap() - 0.002).abs() < 1e-15);
        assert!(matches!(r_perf(0.1, 0.0), Err(Error::ZeroCost)));
    }

    #[test]
    fn config_round_trip_and_hash() {
        let cfg = tiny();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let other = ExperimentConfig { master_seed: 2, ..cfg.clone() };
        assert_ne!(other.hash(), cfg.hash());
        assert!(ExperimentConfig::from_toml("folds = 0").is_err());
        assert!(ExperimentConfig::from_toml("conditions = [\"greedy\"]").is_err());
        let partial = ExperimentConfig::from_toml("folds = 3\n[policy]\nepsilon = 0.1\n").unwrap();
        assert_eq!(partial.folds, 3);
        assert_eq!(partial.policy.epsilon, 0.1);
        assert_eq!(partial.policy.alpha, 0.1);
    }

    #[test]
    fn seeds_differ_by_fold_and_stream() {
        let a = derive_seed(1, 0, Stream::World);
        assert_ne!(a, derive_seed(1, 1, Stream::World));
        assert_ne!(a, derive_seed(1, 0, Stream::Tutor));
        assert_ne!(a, derive_seed(2, 0, Stream::World));
        assert_eq!(a, derive_seed(1, 0, Stream::World));
    }

    #[test]
    fn small_experiment() {
        let cfg = tiny();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 8);
        assert_eq!(out.agents.len(), 2);
        let c95 = out.summary.get(Condition::Constant95).unwrap();
        assert_eq!(c95.folds, 2);
        for r in out.records.iter().filter(|r| r.condition == Condition::Constant95) {
            assert!(r.thresholds.iter().all(|t| *t == 0.95));
        }
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&cfg, &out, dir.path()).unwrap();
        let acc = fs::read_to_string(dir.path().join(ACCURACY_CURVE_FILE)).unwrap();
        assert_eq!(acc.lines().count(), 1 + 4 * 4);
        assert!(fs::read_to_string(dir.path().join("manifest.toml")).unwrap().contains(&cfg.hash()));
    }
}
