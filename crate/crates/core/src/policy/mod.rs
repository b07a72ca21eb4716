//! The hierarchical learner: a threshold MDP that sets how sure the learner
//! must be, and a dialogue MDP that picks what to say.

mod episode;
mod qtable;
mod run;
mod state;
mod threshold;

pub use episode::{
    global_reward, labels_from_turn, run_dialogue_episode, DialoguePolicy, DialogueRewards, Episode, EpisodeOutcome,
    FnPolicy, LearnerMove, RulePolicy, SarsaPolicy,
};
pub use qtable::{sarsa_update, select_action, QTable};
pub use run::{
    simulate_run, Agent, CurvePoint, LearningRun, PolicySettings, RunTrace, SimulationRngs, ThresholdControl,
    ThresholdLearner,
};
pub use state::{
    encode_dialogue_state, is_legal, legal_actions, materialize, observe, pre_da_of, rule_policy, DialogueState,
    LearnerActKind, LearnerAction, Observation, PreContext, Target,
};
pub use threshold::{
    apply_threshold_action, baseline_threshold_schedule, delta_acc_level, threshold_reward, Schedule, Threshold,
    ThresholdAction, ThresholdState, MAX_THRESHOLD, MIN_THRESHOLD, THRESHOLD_BINS, THRESHOLD_STEP,
};
