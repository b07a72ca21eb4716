//! One dialogue about one object, shared by simulation and live sessions.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::qtable::QTable;
use super::state::{is_legal, legal_actions, materialize, observe, rule_policy, DialogueState, LearnerAction, LearnerActKind, Observation};
use crate::dialogue::{ActKind, Actor, DialogueAct, DialogueContext, TemplateLexicon};
use crate::error::{Error, Result};
use crate::tutor::{charge, CostEntry, CostLedger, CostParams, TutorModel};
use crate::vision::GroundingMap;
use crate::world::{Category, VisualObject};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DialogueRewards {
    /// Reward for finishing a dialogue.
    pub success: f64,
    /// Charged per incoherent learner act and on hitting the turn cap.
    pub penalty: f64,
    pub turn_cap: usize,
}

impl Default for DialogueRewards {
    fn default() -> Self {
        Self { success: 10.0, penalty: 2.0, turn_cap: 30 }
    }
}

pub fn global_reward(total_cost: f64, penalties: u32, rewards: &DialogueRewards) -> f64 {
    rewards.success - total_cost - rewards.penalty * penalties as f64
}

pub trait DialoguePolicy {
    fn choose(&mut self, obs: &Observation, legal: &[LearnerAction], rng: &mut dyn RngCore) -> Result<LearnerAction>;

    /// Reward for the most recent choice (may be called several times).
    fn reward(&mut self, _r: f64) {}

    fn end_episode(&mut self, _terminal_reward: f64) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RulePolicy;

impl DialoguePolicy for RulePolicy {
    fn choose(&mut self, obs: &Observation, legal: &[LearnerAction], _rng: &mut dyn RngCore) -> Result<LearnerAction> {
        let a = rule_policy(&obs.state);
        if legal.contains(&a) {
            Ok(a)
        } else {
            legal.first().copied().ok_or(Error::NoLegalActions)
        }
    }
}

/// Any closure over the observation and legal actions.
pub struct FnPolicy<F>(pub F);

impl<F> DialoguePolicy for FnPolicy<F>
where
    F: FnMut(&Observation, &[LearnerAction]) -> LearnerAction,
{
    fn choose(&mut self, obs: &Observation, legal: &[LearnerAction], _rng: &mut dyn RngCore) -> Result<LearnerAction> {
        Ok((self.0)(obs, legal))
    }
}

/// Epsilon-greedy SARSA over dialogue states. With `learn` off it only acts.
#[derive(Debug, Clone)]
pub struct SarsaPolicy {
    pub q: QTable<DialogueState, LearnerAction>,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub learn: bool,
    pending: Option<(DialogueState, LearnerAction, f64)>,
}

impl SarsaPolicy {
    pub fn new(q: QTable<DialogueState, LearnerAction>, epsilon: f64, alpha: f64, gamma: f64) -> Self {
        Self { q, epsilon, alpha, gamma, learn: true, pending: None }
    }

    pub fn frozen(q: QTable<DialogueState, LearnerAction>) -> Self {
        Self { q, epsilon: 0.0, alpha: 0.0, gamma: 1.0, learn: false, pending: None }
    }
}

impl DialoguePolicy for SarsaPolicy {
    fn choose(&mut self, obs: &Observation, legal: &[LearnerAction], rng: &mut dyn RngCore) -> Result<LearnerAction> {
        let s = obs.state;
        let a = self.q.select(&s, legal, self.epsilon, rng)?;
        if let Some((ps, pa, r)) = self.pending.take() {
            if self.learn {
                self.q.update(&ps, pa, r, Some((&s, a)), self.alpha, self.gamma)?;
            }
        }
        self.pending = Some((s, a, 0.0));
        Ok(a)
    }

    fn reward(&mut self, r: f64) {
        if let Some(p) = self.pending.as_mut() {
            p.2 += r;
        }
    }

    fn end_episode(&mut self, terminal_reward: f64) -> Result<()> {
        if let Some((s, a, r)) = self.pending.take() {
            if self.learn {
                self.q.update(&s, a, r + terminal_reward, None, self.alpha, self.gamma)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnerMove {
    Spoke { action: LearnerAction, act: DialogueAct, utterance: String, incoherent: bool },
    /// Both attributes settled; the learner closes with an acknowledgement.
    Closed { act: DialogueAct, utterance: String },
    /// The learner could not parse the tutor and asked what was meant.
    Clarify { act: DialogueAct, utterance: String },
    /// The turn cap was hit.
    Capped,
}

/// Words the learner can take as labels from a tutor turn: stated words,
/// and its own guesses where the tutor confirmed them.
pub fn labels_from_turn(tutor_acts: &[DialogueAct], learner_act: Option<&DialogueAct>) -> Vec<(Category, String)> {
    let mut labels: Vec<(Category, String)> = Vec::new();
    let mut push = |cat: Category, word: &str| {
        if !labels.iter().any(|(c, _)| *c == cat) {
            labels.push((cat, word.to_string()));
        }
    };
    for act in tutor_acts.iter().filter(|a| a.kind == ActKind::Inform) {
        for (cat, word) in &act.slots {
            if let Some(w) = word {
                push(*cat, w);
            }
        }
    }
    let guess = learner_act.filter(|a| a.kind.carries_words());
    for act in tutor_acts.iter().filter(|a| a.kind == ActKind::Ack) {
        if let Some(g) = guess {
            for cat in Category::ALL {
                if let Some(w) = g.word(cat) {
                    if act.slots.is_empty() || act.mentions(cat) {
                        push(cat, w);
                    }
                }
            }
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub object: VisualObject,
    pub threshold: f64,
    pub ctx: DialogueContext,
    pub ledger: CostLedger,
    pub penalties: u32,
    pub capped: bool,
    pub finished: bool,
}

impl Episode {
    pub fn new(object: VisualObject, threshold: f64) -> Self {
        let ctx = DialogueContext::new(object.id);
        Self { object, threshold, ctx, ledger: CostLedger::default(), penalties: 0, capped: false, finished: false }
    }

    pub fn observe(&self, map: &GroundingMap) -> Result<Observation> {
        observe(map, &self.object, &self.ctx, self.threshold)
    }

    pub fn knows_all(&self, map: &GroundingMap) -> Result<bool> {
        Ok(self.observe(map)?.state.is_terminal())
    }

    /// The learner's act the tutor is now answering, if the learner spoke last.
    fn learner_act_answered(&self) -> Option<&DialogueAct> {
        self.ctx.turns.last().filter(|t| t.actor == Actor::Learner).and_then(|t| t.acts.first())
    }

    /// Applies a tutor turn: prices it, learns from the labels it carries and
    /// records it.
    pub fn tutor_turn(
        &mut self,
        acts: Vec<DialogueAct>,
        utterance: impl Into<String>,
        map: &mut GroundingMap,
        costs: &CostParams,
    ) -> Result<Vec<CostEntry>> {
        if self.finished {
            return Err(Error::Precondition("dialogue already finished".into()));
        }
        for a in &acts {
            if a.actor != Actor::Tutor {
                return Err(Error::IllegalAct(format!("{a} is not a tutor act")));
            }
            a.validate()?;
        }
        let learner = self.learner_act_answered().cloned();
        let entries = charge(costs, learner.as_ref(), &acts);
        for (_, word) in labels_from_turn(&acts, learner.as_ref()) {
            map.learn_from_label(&self.object, &word)?;
        }
        self.ctx.record(Actor::Tutor, acts, utterance);
        self.ledger.extend(entries.clone());
        Ok(entries)
    }

    /// Lets the learner take its next turn: close, give up at the cap, or act.
    pub fn learner_move(
        &mut self,
        policy: &mut dyn DialoguePolicy,
        map: &GroundingMap,
        lexicon: &TemplateLexicon,
        rng: &mut dyn RngCore,
        rewards: &DialogueRewards,
    ) -> Result<LearnerMove> {
        if self.finished {
            return Err(Error::Precondition("dialogue already finished".into()));
        }
        if self.knows_all(map)? {
            let act = DialogueAct::new(Actor::Learner, ActKind::Ack);
            let utterance = lexicon.generate(&act, rng)?;
            self.ctx.record(Actor::Learner, vec![act.clone()], utterance.clone());
            self.finished = true;
            return Ok(LearnerMove::Closed { act, utterance });
        }
        // The learner never starts an exchange the tutor could not finish
        // within the cap.
        if self.ctx.turns.len() + 1 >= rewards.turn_cap {
            self.penalties += 1;
            policy.reward(-rewards.penalty);
            self.capped = true;
            self.finished = true;
            return Ok(LearnerMove::Capped);
        }
        let obs = self.observe(map)?;
        let legal = legal_actions(&obs);
        let action = policy.choose(&obs, &legal, rng)?;
        if !is_legal(action, &obs) {
            return Err(Error::IllegalAct(format!("{action} in state {}", obs.state)));
        }
        let incoherent = match action.kind {
            LearnerActKind::Listen => self.ctx.tutor_awaits_answer(),
            LearnerActKind::Ack => !self.something_to_acknowledge(),
            _ => false,
        };
        if incoherent {
            self.penalties += 1;
            policy.reward(-rewards.penalty);
        }
        let act = materialize(action, &obs);
        let utterance = lexicon.generate(&act, rng)?;
        self.ctx.record(Actor::Learner, vec![act.clone()], utterance.clone());
        Ok(LearnerMove::Spoke { action, act, utterance, incoherent })
    }

    /// The learner's answer to tutor input it could not parse. Outside the
    /// policy and free of cost; the cap still applies.
    pub fn request_clarification(
        &mut self,
        lexicon: &TemplateLexicon,
        rng: &mut dyn RngCore,
        rewards: &DialogueRewards,
    ) -> Result<LearnerMove> {
        if self.finished {
            return Err(Error::Precondition("dialogue already finished".into()));
        }
        if self.ctx.turns.len() + 1 >= rewards.turn_cap {
            self.penalties += 1;
            self.capped = true;
            self.finished = true;
            return Ok(LearnerMove::Capped);
        }
        let act = DialogueAct::new(Actor::Learner, ActKind::CLrRequest);
        let utterance = lexicon.generate(&act, rng)?;
        self.ctx.record(Actor::Learner, vec![act.clone()], utterance.clone());
        Ok(LearnerMove::Clarify { act, utterance })
    }

    fn something_to_acknowledge(&self) -> bool {
        match self.ctx.turns.last() {
            Some(t) if t.actor == Actor::Tutor => {
                t.acts.iter().any(|a| matches!(a.kind, ActKind::Inform | ActKind::Ack | ActKind::Reject))
            }
            _ => false,
        }
    }

    pub fn reward(&self, rewards: &DialogueRewards) -> f64 {
        global_reward(self.ledger.total(), self.penalties, rewards)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub episode: Episode,
    pub reward: f64,
    /// Tutor utterances in order, with an empty string when the tutor let the
    /// learner open.
    pub tutor_utterances: Vec<String>,
}

/// Runs a whole simulated dialogue about `object`.
#[allow(clippy::too_many_arguments)]
pub fn run_dialogue_episode(
    policy: &mut dyn DialoguePolicy,
    map: &mut GroundingMap,
    tutor: &TutorModel,
    object: &VisualObject,
    threshold: f64,
    learner_rng: &mut dyn RngCore,
    tutor_rng: &mut dyn RngCore,
    rewards: &DialogueRewards,
) -> Result<EpisodeOutcome> {
    let mut ep = Episode::new(object.clone(), threshold);
    let mut tutor_utterances = Vec::new();
    if ep.knows_all(map)? {
        ep.finished = true;
    } else {
        let opening = tutor.open_dialogue(object, tutor_rng)?;
        tutor_utterances.push(opening.utterance.clone());
        if !opening.acts.is_empty() {
            ep.tutor_turn(opening.acts, opening.utterance, map, &tutor.config.costs)?;
        }
        loop {
            match ep.learner_move(policy, map, tutor.lexicon(), learner_rng, rewards)? {
                LearnerMove::Closed { .. } | LearnerMove::Capped => break,
                LearnerMove::Spoke { act, .. } | LearnerMove::Clarify { act, .. } => {
                    let reply = tutor.respond(&act, &ep.ctx, object, tutor_rng)?;
                    tutor_utterances.push(reply.utterance.clone());
                    let entries = ep.tutor_turn(reply.acts, reply.utterance, map, &tutor.config.costs)?;
                    policy.reward(-crate::tutor::total_of(&entries));
                }
            }
        }
    }
    policy.end_episode(rewards.success)?;
    let reward = ep.reward(rewards);
    Ok(EpisodeOutcome { episode: ep, reward, tutor_utterances })
}
