//! Live tutoring sessions: a human replaces the simulated tutor.
//!
//! A session is driven by three inputs (advance to the next object, a tutor
//! utterance, end) and answers each with wire messages. Every accepted input
//! is appended to the session's event log before the reply is released, and a
//! session is restored by replaying its log from the start.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dialogue::{format_tags, ActKind, Actor, TemplateLexicon};
use crate::error::{Error, Result};
use crate::harness::{derive_seed, r_perf, ExperimentConfig, Stream};
use crate::policy::{
    Agent, DialoguePolicy, DialogueRewards, Episode, LearnerMove, LearningRun, QTable, RulePolicy, SarsaPolicy,
    Schedule, ThresholdControl, ThresholdLearner,
};
use crate::tutor::{total_of, CostCounts, CostParams};
use crate::vision::{Accuracy, GroundingMap};
use crate::world::{generate_dataset, Category, Dataset, VisualObject, WorldConfig};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LivePolicy {
    RlPretrained,
    RuleConstant95,
}

impl LivePolicy {
    pub fn name(self) -> &'static str {
        match self {
            LivePolicy::RlPretrained => "rl-pretrained",
            LivePolicy::RuleConstant95 => "rule-constant95",
        }
    }
}

impl fmt::Display for LivePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LivePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl-pretrained" => Ok(LivePolicy::RlPretrained),
            "rule-constant95" => Ok(LivePolicy::RuleConstant95),
            _ => Err(Error::InvalidConfig(format!("unknown policy `{s}` (expected rl-pretrained or rule-constant95)"))),
        }
    }
}

/// Colour triple and a glyph index; the shape's name is not revealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: u64,
    /// Position in the session's queue.
    pub index: usize,
    pub colour: [f64; 3],
    pub glyph: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordConfidence {
    pub word: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub c_state: Option<u8>,
    pub s_state: Option<u8>,
    pub confidences: Vec<WordConfidence>,
    pub threshold: f64,
    pub cumulative_cost: f64,
    pub objects_remaining: usize,
    pub dialogue_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub objects_seen: usize,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub delta_accuracy: f64,
    pub total_cost: f64,
    /// Absent while nothing has been charged.
    pub r_perf: Option<f64>,
    pub counts: CostCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageType {
    /// Echo of a tutor turn as understood.
    Tutor,
    Learner,
    Object,
    Summary,
    Error,
}

/// One message on the wire. Field order is fixed; absent fields are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub session: String,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Readout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SessionSummary>,
}

impl WireMessage {
    fn new(kind: MessageType, session: &str, seq: u64) -> Self {
        Self {
            kind,
            session: session.to_string(),
            seq,
            act: None,
            utterance: None,
            state: None,
            cost: None,
            object: None,
            summary: None,
        }
    }

    pub fn error(session: &str, message: impl Into<String>) -> Self {
        Self { utterance: Some(message.into()), ..Self::new(MessageType::Error, session, 0) }
    }
}

/// What the event log records, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum LogEvent {
    Created { version: u32, id: String, policy: LivePolicy, world_seed: u64, config: String },
    Advance,
    Tutor { utterance: String },
    End,
}

/// The objects a session with this seed walks through, and its test set.
pub fn session_world(cfg: &ExperimentConfig, world_seed: u64) -> Result<Dataset> {
    generate_dataset(&WorldConfig { seed: world_seed, ..cfg.world.clone() })
}

/// Learner and threshold rngs of a session with this seed.
pub fn session_rngs(world_seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    (
        ChaCha8Rng::seed_from_u64(derive_seed(world_seed, 0, Stream::Learner)),
        ChaCha8Rng::seed_from_u64(derive_seed(world_seed, 0, Stream::Threshold)),
    )
}

enum LivePolicyImpl {
    Rule(RulePolicy),
    Rl(SarsaPolicy),
}

impl LivePolicyImpl {
    fn as_dyn(&mut self) -> &mut dyn DialoguePolicy {
        match self {
            LivePolicyImpl::Rule(p) => p,
            LivePolicyImpl::Rl(p) => p,
        }
    }
}

/// In-memory state of one session. Persistence lives in [`SessionStore`].
pub struct Session {
    pub id: String,
    pub policy_kind: LivePolicy,
    pub world_seed: u64,
    config: ExperimentConfig,
    lexicon: TemplateLexicon,
    costs: CostParams,
    rewards: DialogueRewards,
    policy: LivePolicyImpl,
    run: LearningRun,
    queue: Vec<VisualObject>,
    next: usize,
    episode: Option<Episode>,
    learner_rng: ChaCha8Rng,
    threshold_rng: ChaCha8Rng,
    seq: u64,
    summary: Option<SessionSummary>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        policy_kind: LivePolicy,
        world_seed: u64,
        config: ExperimentConfig,
        agent: Option<&Agent>,
    ) -> Result<Self> {
        config.validate()?;
        let data = session_world(&config, world_seed)?;
        let (policy, control) = match policy_kind {
            LivePolicy::RuleConstant95 => (LivePolicyImpl::Rule(RulePolicy), ThresholdControl::Schedule(Schedule::Constant95)),
            LivePolicy::RlPretrained => {
                let agent = agent.ok_or_else(|| Error::Precondition("no pretrained tables loaded".into()))?;
                (
                    LivePolicyImpl::Rl(SarsaPolicy::frozen(agent.dialogue.clone())),
                    ThresholdControl::Learned(ThresholdLearner::frozen(agent.threshold.clone())),
                )
            }
        };
        let run = LearningRun::new(config.fresh_map(), data.test, control, config.policy, data.train.len())?;
        let (learner_rng, threshold_rng) = session_rngs(world_seed);
        Ok(Self {
            id: id.into(),
            policy_kind,
            world_seed,
            lexicon: config.lexicon()?,
            costs: config.tutor.costs,
            rewards: config.policy.rewards(),
            config,
            policy,
            run,
            queue: data.train,
            next: 0,
            episode: None,
            learner_rng,
            threshold_rng,
            seq: 0,
            summary: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn grounding(&self) -> &GroundingMap {
        &self.run.map
    }

    pub fn run(&self) -> &LearningRun {
        &self.run
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn objects_remaining(&self) -> usize {
        self.queue.len() - self.next
    }

    pub fn is_ended(&self) -> bool {
        self.summary.is_some()
    }

    pub fn summary(&self) -> Option<&SessionSummary> {
        self.summary.as_ref()
    }

    /// Cost booked so far, including an unfinished dialogue.
    pub fn total_cost(&self) -> f64 {
        self.run.cumulative_cost + self.open_episode().map_or(0.0, |e| e.ledger.total())
    }

    fn open_episode(&self) -> Option<&Episode> {
        self.episode.as_ref().filter(|e| !e.finished)
    }

    fn message(&mut self, kind: MessageType) -> WireMessage {
        self.seq += 1;
        WireMessage::new(kind, &self.id, self.seq)
    }

    pub fn readout(&self) -> Result<Readout> {
        let mut r = Readout {
            c_state: None,
            s_state: None,
            confidences: Vec::new(),
            threshold: self.run.threshold(),
            cumulative_cost: self.total_cost(),
            objects_remaining: self.objects_remaining(),
            dialogue_active: self.open_episode().is_some(),
        };
        if let Some(ep) = &self.episode {
            let obs = ep.observe(&self.run.map)?;
            r.threshold = ep.threshold;
            r.c_state = Some(obs.state.status(Category::Colour));
            r.s_state = Some(obs.state.status(Category::Shape));
            r.confidences = self
                .run
                .map
                .confidences(&ep.object)?
                .into_iter()
                .map(|(word, confidence)| WordConfidence { word, confidence })
                .collect();
        }
        Ok(r)
    }

    fn check_live(&self) -> Result<()> {
        if self.is_ended() {
            return Err(Error::SessionEnded(self.id.clone()));
        }
        Ok(())
    }

    /// Presents the next object. Fails mid-dialogue; an exhausted queue ends
    /// the session and returns its summary.
    pub fn advance(&mut self) -> Result<Vec<WireMessage>> {
        self.check_live()?;
        if self.open_episode().is_some() {
            return Err(Error::Precondition("the current dialogue has not finished".into()));
        }
        if self.next >= self.queue.len() {
            return Ok(vec![self.end()?]);
        }
        let object = self.queue[self.next].clone();
        let index = self.next;
        self.next += 1;
        let mut ep = Episode::new(object.clone(), self.run.threshold());
        if ep.knows_all(&self.run.map)? {
            ep.finished = true;
            self.policy.as_dyn().end_episode(self.rewards.success)?;
            self.run.finish_dialogue(&ep, &mut self.threshold_rng)?;
        }
        self.episode = Some(ep);
        let glyph = self.config.world.inventory.shapes.iter().position(|s| *s == object.shape).unwrap_or(0);
        let colour = [0, 1, 2].map(|i| object.colour_features.get(i).copied().unwrap_or(0.0).clamp(0.0, 1.0));
        let state = self.readout()?;
        let mut m = self.message(MessageType::Object);
        m.object = Some(ObjectView { id: object.id, index, colour, glyph });
        m.state = Some(state);
        Ok(vec![m])
    }

    /// Takes one tutor utterance and returns the echo of what was understood
    /// and the learner's reply.
    pub fn step(&mut self, utterance: &str) -> Result<Vec<WireMessage>> {
        self.check_live()?;
        let Some(mut ep) = self.episode.take() else {
            return Err(Error::Precondition("no object on the table; advance first".into()));
        };
        if ep.finished {
            self.episode = Some(ep);
            return Err(Error::Precondition("the dialogue has finished; advance to the next object".into()));
        }
        let result = self.step_episode(&mut ep, utterance);
        self.episode = Some(ep);
        let (tutor_act, cost, mv) = result?;
        let mut out = Vec::new();
        let mut echo = self.message(MessageType::Tutor);
        echo.act = tutor_act;
        echo.utterance = Some(utterance.to_string());
        echo.cost = Some(cost);
        out.push(echo);
        let (act, said) = match mv {
            LearnerMove::Spoke { act, utterance, .. }
            | LearnerMove::Closed { act, utterance }
            | LearnerMove::Clarify { act, utterance } => (Some(format_tags(&[act])), Some(utterance)),
            LearnerMove::Capped => (None, None),
        };
        let state = self.readout()?;
        let mut reply = self.message(MessageType::Learner);
        reply.act = act;
        reply.utterance = said;
        reply.state = Some(state);
        out.push(reply);
        Ok(out)
    }

    fn step_episode(&mut self, ep: &mut Episode, utterance: &str) -> Result<(Option<String>, f64, LearnerMove)> {
        let policy = self.policy.as_dyn();
        let (tutor_act, cost, mv) = match self.lexicon.parse(Actor::Tutor, utterance) {
            None => (None, 0.0, ep.request_clarification(&self.lexicon, &mut self.learner_rng, &self.rewards)?),
            Some(acts) => {
                let tags = format_tags(&acts);
                let opening_listen =
                    ep.ctx.turns.is_empty() && acts.iter().all(|a| a.kind == ActKind::Listen);
                let cost = if opening_listen {
                    0.0
                } else {
                    let entries = ep.tutor_turn(acts, utterance, &mut self.run.map, &self.costs)?;
                    let c = total_of(&entries);
                    policy.reward(-c);
                    c
                };
                let mv = ep.learner_move(policy, &self.run.map, &self.lexicon, &mut self.learner_rng, &self.rewards)?;
                (Some(tags), cost, mv)
            }
        };
        if ep.finished {
            policy.end_episode(self.rewards.success)?;
            self.run.finish_dialogue(ep, &mut self.threshold_rng)?;
        }
        Ok((tutor_act, cost, mv))
    }

    /// Ends the session; an unfinished dialogue's cost still counts.
    pub fn end(&mut self) -> Result<WireMessage> {
        self.check_live()?;
        let acc: Accuracy = self.run.map.accuracy(self.run.test_objects())?;
        let initial = self.run.initial_accuracy.mean();
        let total_cost = self.total_cost();
        let mut counts = self.run.counts;
        if let Some(ep) = self.open_episode() {
            let c = ep.ledger.counts();
            counts.informs += c.informs;
            counts.acks += c.acks;
            counts.corrections += c.corrections;
        }
        let delta = acc.mean() - initial;
        let summary = SessionSummary {
            objects_seen: self.next,
            initial_accuracy: initial,
            final_accuracy: acc.mean(),
            delta_accuracy: delta,
            total_cost,
            r_perf: r_perf(delta, total_cost).ok(),
            counts,
        };
        self.summary = Some(summary.clone());
        let state = self.readout()?;
        let mut m = self.message(MessageType::Summary);
        m.state = Some(state);
        m.cost = Some(total_cost);
        m.summary = Some(summary);
        Ok(m)
    }

    fn apply(&mut self, event: &LogEvent) -> Result<Vec<WireMessage>> {
        match event {
            LogEvent::Advance => self.advance(),
            LogEvent::Tutor { utterance } => self.step(utterance),
            LogEvent::End => self.end().map(|m| vec![m]),
            LogEvent::Created { .. } => Err(Error::Precondition("session already created".into())),
        }
    }
}

const EVENT_LOG: &str = "events.jsonl";
const GROUNDING_SNAPSHOT: &str = "grounding.txt";

/// Sessions on disk plus the ones in memory. Each session sits behind its
/// own lock, so turns of one session are handled strictly in order.
pub struct SessionStore {
    dir: PathBuf,
    config: ExperimentConfig,
    agent: Option<Agent>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>, config: ExperimentConfig, agent: Option<Agent>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        config.validate()?;
        Ok(Self { dir, config, agent, sessions: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id)
    }

    pub fn create(&self, policy: &str, world_seed: u64) -> Result<String> {
        let policy: LivePolicy = policy.parse()?;
        let mut sessions = self.sessions.lock().expect("session index lock");
        let mut n = 0u64;
        let (id, sdir) = loop {
            let digest = Sha256::digest(format!("{}:{policy}:{world_seed}:{n}", self.dir.display()).as_bytes());
            let id: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
            let sdir = self.session_dir(&id);
            if !sdir.exists() && !sessions.contains_key(&id) {
                break (id, sdir);
            }
            n += 1;
        };
        let session = Session::new(id.clone(), policy, world_seed, self.config.clone(), self.agent.as_ref())?;
        fs::create_dir_all(&sdir)?;
        if let (LivePolicy::RlPretrained, Some(agent)) = (policy, &self.agent) {
            fs::write(sdir.join("dialogue.qtable"), agent.dialogue.to_text())?;
            fs::write(sdir.join("threshold.qtable"), agent.threshold.to_text())?;
        }
        append_event(
            &sdir,
            &LogEvent::Created {
                version: WIRE_VERSION,
                id: id.clone(),
                policy,
                world_seed,
                config: self.config.to_toml(),
            },
        )?;
        write_snapshot(&sdir, &session)?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    /// The session, restored from its log if it is not in memory.
    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        let mut sessions = self.sessions.lock().expect("session index lock");
        if let Some(s) = sessions.get(id) {
            return Ok(Arc::clone(s));
        }
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(Error::UnknownSession(id.to_string()));
        }
        let sdir = self.session_dir(id);
        if !sdir.join(EVENT_LOG).exists() {
            return Err(Error::UnknownSession(id.to_string()));
        }
        let session = Arc::new(Mutex::new(replay(&sdir)?));
        sessions.insert(id.to_string(), Arc::clone(&session));
        Ok(session)
    }

    /// Drops the in-memory copy; the next access replays the log.
    pub fn evict(&self, id: &str) {
        self.sessions.lock().expect("session index lock").remove(id);
    }

    fn apply(&self, id: &str, event: LogEvent) -> Result<Vec<WireMessage>> {
        let session = self.get(id)?;
        let mut s = session.lock().expect("session lock");
        let out = s.apply(&event)?;
        let sdir = self.session_dir(id);
        append_event(&sdir, &event)?;
        if s.episode().is_none_or(|e| e.finished) {
            write_snapshot(&sdir, &s)?;
        }
        Ok(out)
    }

    pub fn advance(&self, id: &str) -> Result<Vec<WireMessage>> {
        self.apply(id, LogEvent::Advance)
    }

    pub fn step(&self, id: &str, utterance: &str) -> Result<Vec<WireMessage>> {
        self.apply(id, LogEvent::Tutor { utterance: utterance.to_string() })
    }

    pub fn end(&self, id: &str) -> Result<WireMessage> {
        Ok(self.apply(id, LogEvent::End)?.remove(0))
    }

    pub fn state(&self, id: &str) -> Result<Readout> {
        let session = self.get(id)?;
        let s = session.lock().expect("session lock");
        s.readout()
    }
}

fn append_event(sdir: &Path, event: &LogEvent) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(sdir.join(EVENT_LOG))?;
    let mut line = serde_json::to_string(event)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

fn write_snapshot(sdir: &Path, session: &Session) -> Result<()> {
    let tmp = sdir.join(format!("{GROUNDING_SNAPSHOT}.tmp"));
    fs::write(&tmp, session.grounding().to_text())?;
    fs::rename(tmp, sdir.join(GROUNDING_SNAPSHOT))?;
    Ok(())
}

/// Rebuilds a session from the event log in `sdir`.
pub fn replay(sdir: &Path) -> Result<Session> {
    let reader = BufReader::new(fs::File::open(sdir.join(EVENT_LOG))?);
    let mut session: Option<Session> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Format { line: i + 1, reason };
        let event: LogEvent = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match (&mut session, event) {
            (None, LogEvent::Created { version, id, policy, world_seed, config }) => {
                if version != WIRE_VERSION {
                    return Err(bad(format!("log version {version}, expected {WIRE_VERSION}")));
                }
                let config = ExperimentConfig::from_toml(&config)?;
                let agent = match policy {
                    LivePolicy::RlPretrained => Some(load_agent(sdir)?),
                    LivePolicy::RuleConstant95 => None,
                };
                session = Some(Session::new(id, policy, world_seed, config, agent.as_ref())?);
            }
            (None, _) => return Err(bad("log does not start with a created event".into())),
            (Some(s), event) => {
                s.apply(&event).map_err(|e| bad(format!("replay failed: {e}")))?;
            }
        }
    }
    session.ok_or(Error::Format { line: 1, reason: "empty event log".into() })
}

fn load_agent(sdir: &Path) -> Result<Agent> {
    let open = |name: &str| fs::File::open(sdir.join(name)).map(BufReader::new);
    Ok(Agent {
        dialogue: QTable::read_text(open("dialogue.qtable")?)?,
        threshold: QTable::read_text(open("threshold.qtable")?)?,
    })
}
