use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vislearn::harness::{pretrain_agent, ExperimentConfig, RlSettings};
use vislearn::live::{session_rngs, session_world, LivePolicy, Session};
use vislearn::policy::{
    simulate_run, Agent, DialoguePolicy, LearningRun, RulePolicy, RunTrace, SarsaPolicy, Schedule, SimulationRngs,
    ThresholdControl, ThresholdLearner,
};
use vislearn::world::WorldConfig;

fn config(train: usize) -> ExperimentConfig {
    ExperimentConfig {
        world: WorldConfig { train_size: train, test_size: 50, ..Default::default() },
        rl: RlSettings { pretrain_runs: 5 },
        ..Default::default()
    }
}

fn simulate(cfg: &ExperimentConfig, seed: u64, agent: Option<&Agent>) -> (RunTrace, String) {
    let data = session_world(cfg, seed).unwrap();
    let tutor = cfg.tutor_model().unwrap();
    let (mut lr, mut hr) = session_rngs(seed);
    let mut tr = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
    let (mut policy, control): (Box<dyn DialoguePolicy>, _) = match agent {
        None => (Box::new(RulePolicy), ThresholdControl::Schedule(Schedule::Constant95)),
        Some(a) => (
            Box::new(SarsaPolicy::frozen(a.dialogue.clone())),
            ThresholdControl::Learned(ThresholdLearner::frozen(a.threshold.clone())),
        ),
    };
    let mut run = LearningRun::new(cfg.fresh_map(), data.test, control, cfg.policy, data.train.len()).unwrap();
    let rngs = SimulationRngs { learner: &mut lr, tutor: &mut tr, threshold: &mut hr };
    let trace = simulate_run(&mut run, policy.as_mut(), &tutor, &data.train, rngs, true).unwrap();
    (trace, run.map.to_text())
}

fn replay_live(cfg: &ExperimentConfig, seed: u64, kind: LivePolicy, agent: Option<&Agent>, trace: &RunTrace) -> Session {
    let mut s = Session::new("parity", kind, seed, cfg.clone(), agent).unwrap();
    for utterances in trace.transcripts.as_ref().unwrap() {
        s.advance().unwrap();
        let already_known = !s.readout().unwrap().dialogue_active;
        assert_eq!(already_known, utterances.is_empty());
        for u in utterances {
            s.step(u).unwrap();
        }
        assert!(!s.readout().unwrap().dialogue_active, "dialogue still open after its transcript");
    }
    s
}

#[test]
fn rule_session_matches_simulation() {
    let cfg = config(120);
    let (trace, weights) = simulate(&cfg, 7, None);
    let s = replay_live(&cfg, 7, LivePolicy::RuleConstant95, None, &trace);
    assert_eq!(s.grounding().to_text(), weights);
    assert_eq!(s.run().cumulative_cost, trace.total_cost);
    assert_eq!(s.run().counts, trace.counts);
    assert_eq!(s.run().curve, trace.curve);
}

#[test]
fn rl_session_matches_simulation() {
    let cfg = config(120);
    let agent = pretrain_agent(&cfg, 0).unwrap().0;
    let (trace, weights) = simulate(&cfg, 11, Some(&agent));
    let s = replay_live(&cfg, 11, LivePolicy::RlPretrained, Some(&agent), &trace);
    assert_eq!(s.grounding().to_text(), weights);
    assert_eq!(s.run().cumulative_cost, trace.total_cost);
    assert_eq!(s.run().thresholds(), trace.thresholds);
}

#[test]
fn burchak_surface_parity() {
    let cfg = ExperimentConfig { surface: "burchak".into(), ..config(60) };
    let (trace, weights) = simulate(&cfg, 5, None);
    let s = replay_live(&cfg, 5, LivePolicy::RuleConstant95, None, &trace);
    assert_eq!(s.grounding().to_text(), weights);
    assert_eq!(s.run().cumulative_cost, trace.total_cost);
}

#[test]
fn chatty_tutor_parity() {
    let mut cfg = config(80);
    cfg.tutor.focus_prob = 0.5;
    cfg.tutor.check_prob = 0.5;
    let (trace, weights) = simulate(&cfg, 9, None);
    let s = replay_live(&cfg, 9, LivePolicy::RuleConstant95, None, &trace);
    assert_eq!(s.grounding().to_text(), weights);
    assert_eq!(s.run().cumulative_cost, trace.total_cost);
}
