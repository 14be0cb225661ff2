//! Decision pipeline: sample candidate actions from the flow model, score
//! each on a cloned session, execute the best, and optionally train on the
//! candidates' rewards. Also hosts the rule-based baseline.

mod dag;
mod rule;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dag::{DagState, FeedsDag};
pub use rule::{rule_based_decide, RuleConfig};

use crate::dataset::Scenario;
use crate::error::{Error, Result};
use crate::gfn::{sample_candidates, tb_gradient, Adam, AdamConfig, FlowModel, TbExample};
use crate::media::{BitrateLadder, QualityMapping};
use crate::objective::{session_metrics, step_objective_delta, SessionMetrics};
use crate::rng::{mix, stream_rng};
use crate::sim::{observe, CompositeAction, Env, SessionState, SimConfig, ThroughputHistory};
use crate::traces::{NetworkTrace, PreferenceParams};

/// Controller variants compared in the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    /// Sample `k >= 2` candidates and execute the best.
    GfnMulti { k: usize },
    /// Execute the single sampled action.
    GfnSingle,
    /// Multi-candidate, but observation and scoring use fixed preferences.
    GfnFixedPref { k: usize, prefs: PreferenceParams },
    RuleBased(RuleConfig),
}

impl PolicyKind {
    pub const NAMES: [&'static str; 4] = ["gfn-multi", "gfn-single", "gfn-fixed-pref", "rule-based"];

    /// Builds a policy from its CLI name, taking parameters from `config`.
    pub fn from_name(name: &str, config: &ControllerConfig) -> Result<Self> {
        let p = match name {
            "gfn-multi" => PolicyKind::GfnMulti { k: config.k },
            "gfn-single" => PolicyKind::GfnSingle,
            "gfn-fixed-pref" => PolicyKind::GfnFixedPref {
                k: config.k,
                prefs: config.fixed_prefs,
            },
            "rule-based" => PolicyKind::RuleBased(config.rule),
            other => {
                return Err(Error::Config(format!(
                    "unknown policy {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        p.validate()?;
        Ok(p)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::GfnMulti { .. } => "gfn-multi",
            PolicyKind::GfnSingle => "gfn-single",
            PolicyKind::GfnFixedPref { .. } => "gfn-fixed-pref",
            PolicyKind::RuleBased(_) => "rule-based",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicyKind::GfnMulti { k } | PolicyKind::GfnFixedPref { k, .. } if *k < 2 => Err(Error::Config(
                format!("multi-candidate policies need k >= 2, got {k}"),
            )),
            PolicyKind::RuleBased(rule) => rule.validate(),
            _ => Ok(()),
        }
    }

    /// Whether the policy uses a flow model.
    pub fn is_learned(&self) -> bool {
        !matches!(self, PolicyKind::RuleBased(_))
    }

    /// The candidate pipeline this policy runs, or `None` for the baseline.
    pub fn pipeline(&self) -> Option<Pipeline> {
        match self {
            PolicyKind::GfnMulti { k } => Some(Pipeline { k: *k, fixed_prefs: None }),
            PolicyKind::GfnSingle => Some(Pipeline { k: 1, fixed_prefs: None }),
            PolicyKind::GfnFixedPref { k, prefs } => Some(Pipeline {
                k: *k,
                fixed_prefs: Some(*prefs),
            }),
            PolicyKind::RuleBased(_) => None,
        }
    }
}

/// Parameters of the generate, score and select loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub k: usize,
    /// Preferences shown to the model and used for scoring instead of the
    /// user's own.
    pub fixed_prefs: Option<PreferenceParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Every candidate trajectory is trained with `exp(mean value / tau)`.
    #[default]
    SharedMean,
    /// Each candidate trajectory is trained with `exp(own value / tau)`.
    PerCandidate,
}

/// How candidate actions are valued before selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Objective change over the action alone ([`evaluate_candidate`]).
    StepDelta,
    /// Objective change over a horizon shared by all candidates: each action
    /// is followed by idle playback until the longest candidate would finish
    /// ([`evaluate_candidates`]). Compares a short pause and a long download
    /// over the same stretch of playback.
    #[default]
    CommonHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Candidates per decision for multi-candidate policies.
    pub k: usize,
    /// Reward temperature: `R = exp(value / tau)`.
    pub tau: f64,
    pub adam: AdamConfig,
    pub hidden: Vec<usize>,
    /// Scale of the initial output-layer weights.
    pub init_scale: f64,
    pub reward_mode: RewardMode,
    pub scoring: ScoringMode,
    /// Safety cap on decisions per episode.
    pub max_decisions: usize,
    pub sim: SimConfig,
    pub ladder: BitrateLadder,
    pub mapping: QualityMapping,
    pub rule: RuleConfig,
    /// Preferences used by the fixed-preference ablation.
    pub fixed_prefs: PreferenceParams,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            k: 10,
            tau: 1.0,
            adam: AdamConfig::default(),
            hidden: vec![64, 64],
            init_scale: 0.1,
            reward_mode: RewardMode::SharedMean,
            scoring: ScoringMode::CommonHorizon,
            max_decisions: 20_000,
            sim: SimConfig::default(),
            ladder: BitrateLadder::default(),
            mapping: QualityMapping::Linear,
            rule: RuleConfig::default(),
            fixed_prefs: PreferenceParams::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.rule.validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k must be >= 2, got {}", self.k)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.adam.lr)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must be non-empty".into()));
        }
        if self.max_decisions == 0 {
            return Err(Error::Config("max_decisions must be positive".into()));
        }
        Ok(())
    }

    /// Layer sizes of the flow model.
    pub fn layers(&self) -> Vec<usize> {
        let mut l = vec![FeedsDag::input_dim(&self.sim)];
        l.extend(&self.hidden);
        l.push(FeedsDag::output_dim(&self.sim, self.ladder.len()));
        l
    }

    /// Freshly initialized flow model.
    pub fn new_model(&self, seed: u64) -> Result<FlowModel> {
        FlowModel::random(&self.layers(), self.init_scale, &mut stream_rng(seed, mix(&[0x1417])))
    }
}

/// What candidate scoring needs besides the state: the simulator context,
/// the ladder and mapping for quality, and the preferences to score with.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    pub env: Env<'a>,
    pub ladder: &'a BitrateLadder,
    pub mapping: QualityMapping,
    pub prefs: PreferenceParams,
}

impl Scorer<'_> {
    pub fn metrics(&self, state: &SessionState) -> Result<SessionMetrics> {
        session_metrics(state, self.ladder, &self.prefs, self.mapping)
    }
}

/// Objective change from executing `action` on a copy of `state`, with the
/// unknown future bandwidth replaced by the constant `estimate_mbps`.
pub fn evaluate_candidate(scorer: &Scorer<'_>, state: &SessionState, action: &CompositeAction, estimate_mbps: f64) -> Result<f64> {
    let trace = NetworkTrace::constant(estimate_mbps)?;
    let before = scorer.metrics(state)?;
    let (next, _) = scorer.env.step(state, action, &trace)?;
    Ok(step_objective_delta(&before, &scorer.metrics(&next)?))
}

/// Values of several candidates for the same state under `mode`.
///
/// With [`ScoringMode::CommonHorizon`] every candidate is played forward,
/// at the estimated throughput, for the longest candidate's duration; any
/// shorter action is followed by idle playback. Without this, a stalled
/// session on a slow link always prefers a short pause (a small, certain
/// stall) to fetching the missing chunk (a longer stall before it plays),
/// and never recovers.
pub fn evaluate_candidates(
    scorer: &Scorer<'_>,
    state: &SessionState,
    actions: &[CompositeAction],
    estimate_mbps: f64,
    mode: ScoringMode,
) -> Result<Vec<f64>> {
    if mode == ScoringMode::StepDelta {
        return actions
            .iter()
            .map(|a| evaluate_candidate(scorer, state, a, estimate_mbps))
            .collect();
    }
    let trace = NetworkTrace::constant(estimate_mbps)?;
    let before = scorer.metrics(state)?;
    let mut outcomes = Vec::with_capacity(actions.len());
    for a in actions {
        outcomes.push(scorer.env.step(state, a, &trace)?);
    }
    let horizon = outcomes.iter().map(|(_, o)| o.elapsed).fold(0.0, f64::max);
    outcomes
        .into_iter()
        .map(|(mut next, out)| {
            scorer.env.idle(&mut next, horizon - out.elapsed)?;
            Ok(step_objective_delta(&before, &scorer.metrics(&next)?))
        })
        .collect()
}

/// Index of the highest value; ties go to the earliest (best-ranked)
/// candidate. NaN values never win.
pub fn select_best<T>(candidates: &[T], values: &[f64]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Validation("no candidates to select from".into()));
    }
    if candidates.len() != values.len() {
        return Err(Error::ShapeMismatch {
            expected: candidates.len(),
            actual: values.len(),
        });
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    Ok(best)
}

/// One executed controller step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub clock: f64,
    pub action: CompositeAction,
    pub candidates: usize,
    /// Rank of the executed action among the candidates.
    pub chosen_rank: usize,
    /// Score the controller predicted, if it scored candidates.
    pub predicted: Option<f64>,
    /// Objective change actually realized on the true trace.
    pub realized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingStats {
    pub updates: usize,
    pub mean_tb_loss: f64,
    /// Mean over updates of the (mean) log reward the candidates were trained on.
    pub mean_log_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Metrics under the user's true preferences.
    pub metrics: SessionMetrics,
    pub decisions: Vec<Decision>,
    pub training: Option<TrainingStats>,
    pub final_state: SessionState,
    /// The decision cap was hit before the session finished.
    pub truncated: bool,
}

/// Runs one session without training. `model` is ignored by the baseline.
pub fn run_episode<R: Rng + ?Sized>(
    policy: &PolicyKind,
    model: &FlowModel,
    scenario: &Scenario,
    config: &ControllerConfig,
    rng: &mut R,
) -> Result<EpisodeResult> {
    let mut m = model.clone();
    episode(policy, &mut m, None, scenario, config, rng)
}

/// Runs one session, updating `model` once per decision.
pub fn train_episode<R: Rng + ?Sized>(
    policy: &PolicyKind,
    model: &mut FlowModel,
    optimizer: &mut Adam,
    scenario: &Scenario,
    config: &ControllerConfig,
    rng: &mut R,
) -> Result<EpisodeResult> {
    if !policy.is_learned() {
        return Err(Error::Config("the rule-based baseline has nothing to train".into()));
    }
    episode(policy, model, Some(optimizer), scenario, config, rng)
}

fn episode<R: Rng + ?Sized>(
    policy: &PolicyKind,
    model: &mut FlowModel,
    mut optimizer: Option<&mut Adam>,
    scenario: &Scenario,
    config: &ControllerConfig,
    rng: &mut R,
) -> Result<EpisodeResult> {
    policy.validate()?;
    let env = Env::new(&scenario.queue, &scenario.user, &config.sim);
    let truth = Scorer {
        env,
        ladder: &config.ladder,
        mapping: config.mapping,
        prefs: scenario.prefs,
    };
    let pipeline = policy.pipeline();
    let view = Scorer {
        prefs: pipeline.and_then(|p| p.fixed_prefs).unwrap_or(scenario.prefs),
        ..truth
    };
    if pipeline.is_some() && model.layers() != config.layers().as_slice() {
        return Err(Error::ShapeMismatch {
            expected: config.layers().iter().product(),
            actual: model.layers().iter().product(),
        });
    }
    let prior = scenario.class.prior_mbps();
    let mut state = env.initial_state()?;
    let mut before = truth.metrics(&state)?;
    let mut decisions = Vec::new();
    let mut stats = TrainingStats::default();
    let mut truncated = false;

    while !state.is_terminal() {
        if decisions.len() >= config.max_decisions {
            truncated = true;
            break;
        }
        let history = ThroughputHistory::from_state(&state, config.sim.history_len, prior);
        let estimate = history.estimate_mbps();
        let (action, candidates, chosen_rank, predicted) = match pipeline {
            None => {
                let PolicyKind::RuleBased(rule) = policy else {
                    unreachable!("only the baseline has no pipeline")
                };
                (rule_based_decide(&env, &state, estimate, &config.ladder, rule), 1, 0, None)
            }
            Some(p) => {
                let obs = observe(&state, &scenario.queue, &history, &view.prefs, &config.sim);
                let dag = FeedsDag::new(&obs, &state, &scenario.queue, &config.sim);
                let cands = sample_candidates(model, &dag, p.k, rng)?;
                let actions: Vec<CompositeAction> = cands.iter().map(|c| c.object).collect();
                let values = evaluate_candidates(&view, &state, &actions, estimate, config.scoring)?;
                let best = select_best(&cands, &values)?;
                if let Some(opt) = optimizer.as_deref_mut() {
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    let batch: Vec<TbExample<DagState>> = cands
                        .iter()
                        .zip(&values)
                        .map(|(c, &v)| TbExample {
                            states: c.trajectory.states.clone(),
                            log_reward: match config.reward_mode {
                                RewardMode::SharedMean => mean,
                                RewardMode::PerCandidate => v,
                            } / config.tau,
                        })
                        .collect();
                    let g = tb_gradient(model, &dag, &batch)?;
                    opt.update(model, &g.grad)?;
                    stats.updates += 1;
                    stats.mean_tb_loss += g.loss;
                    stats.mean_log_reward += batch.iter().map(|e| e.log_reward).sum::<f64>() / batch.len() as f64;
                }
                (cands[best].object, cands.len(), best, Some(values[best]))
            }
        };
        let clock = state.clock;
        env.apply(&mut state, &action, &scenario.trace)?;
        let after = truth.metrics(&state)?;
        decisions.push(Decision {
            clock,
            action,
            candidates,
            chosen_rank,
            predicted,
            realized: step_objective_delta(&before, &after),
        });
        before = after;
    }

    let training = optimizer.map(|_| {
        if stats.updates > 0 {
            stats.mean_tb_loss /= stats.updates as f64;
            stats.mean_log_reward /= stats.updates as f64;
        }
        stats
    });
    Ok(EpisodeResult {
        metrics: before,
        decisions,
        training,
        final_state: state,
        truncated,
    })
}

/// Per-episode statistics of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub episode: usize,
    pub scenario_id: String,
    pub mean_tb_loss: f64,
    pub mean_log_reward: f64,
    pub objective: f64,
    pub log_z: f64,
}

/// Trains a fresh model for `policy` over `episodes` passes through
/// `scenarios` in order.
pub fn train_policy(
    policy: &PolicyKind,
    scenarios: &[Scenario],
    episodes: usize,
    config: &ControllerConfig,
    seed: u64,
) -> Result<(FlowModel, Vec<TrainingLogRow>)> {
    if scenarios.is_empty() {
        return Err(Error::Config("training needs at least one scenario".into()));
    }
    let mut model = config.new_model(seed)?;
    let mut opt = Adam::new(&model, config.adam);
    let mut log = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let scenario = &scenarios[episode % scenarios.len()];
        let mut rng = stream_rng(seed, mix(&[0x7a41, episode as u64]));
        let r = train_episode(policy, &mut model, &mut opt, scenario, config, &mut rng)?;
        let t = r.training.unwrap_or_default();
        log.push(TrainingLogRow {
            episode,
            scenario_id: scenario.id.clone(),
            mean_tb_loss: t.mean_tb_loss,
            mean_log_reward: t.mean_log_reward,
            objective: r.metrics.objective,
            log_z: model.log_z,
        });
    }
    Ok((model, log))
}

/// RNG for evaluating scenario `index` under `seed`; shared by all policies
/// so variants face the same randomness.
pub fn episode_rng(seed: u64, index: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, mix(&[0xe7a1, index as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_scenarios, synthesize_dataset, DatasetConfig, ScenarioSpec};
    use crate::gfn::{forward_policy, FlowDag};
    use crate::media::{RecommendationQueue, Video};
    use crate::sim::observe;
    use crate::traces::{BandwidthClass, UserTrace};

    fn queue(chunks: usize, videos: usize) -> RecommendationQueue {
        let sizes = vec![vec![125_000, 250_000, 375_000, 625_000]; chunks];
        RecommendationQueue::new(
            (0..videos)
                .map(|i| Video::new(format!("v{i}"), 2.0, sizes.clone()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn scenario(mbps: f64, watch: f64) -> Scenario {
        let q = queue(10, 4);
        Scenario {
            id: "t".into(),
            class: BandwidthClass::from_mean(mbps),
            trace: NetworkTrace::constant(mbps).unwrap(),
            user: UserTrace::new(vec![watch; q.len()]).unwrap(),
            queue: q,
            user_index: 0,
            prefs: PreferenceParams::default(),
        }
    }

    #[test]
    fn select_best_cases() {
        let c = ["a", "b", "c"];
        assert_eq!(select_best(&c, &[0.1, 0.9, 0.3]).unwrap(), 1);
        assert_eq!(select_best(&c, &[0.5, 0.5, 0.5]).unwrap(), 0);
        assert_eq!(select_best(&c, &[1.1, 1.9, 1.3]).unwrap(), 1);
        assert_eq!(select_best(&c, &[f64::NAN, 0.0, 0.0]).unwrap(), 1);
        assert!(select_best::<&str>(&[], &[]).is_err());
    }

    #[test]
    fn rule_examples() {
        let s = scenario(2.0, 20.0);
        let cfg = SimConfig::default();
        let env = Env::new(&s.queue, &s.user, &cfg);
        let state = env.initial_state().unwrap();
        let ladder = BitrateLadder::default();
        let rule = RuleConfig::default();
        assert_eq!(
            rule_based_decide(&env, &state, 2.0, &ladder, &rule),
            CompositeAction::Download { video: 0, level: 2 }
        );
        assert_eq!(
            rule_based_decide(&env, &state, 0.3, &ladder, &rule),
            CompositeAction::Download { video: 0, level: 0 }
        );
        // Fill everything by hand, then the rule pauses.
        let mut full = state.clone();
        let fast = NetworkTrace::constant(1e6).unwrap();
        for v in 0..4 {
            for _ in 0..10 {
                env.apply(&mut full, &CompositeAction::Download { video: v, level: 0 }, &fast).unwrap();
            }
        }
        assert_eq!(
            rule_based_decide(&env, &full, 2.0, &ladder, &rule),
            CompositeAction::Pause { seconds: 0.5 }
        );
    }

    #[test]
    fn pause_on_empty_buffer_scores_non_positive() {
        let s = scenario(3.0, 20.0);
        let cfg = SimConfig::default();
        let env = Env::new(&s.queue, &s.user, &cfg);
        let fast = NetworkTrace::constant(5.0).unwrap();
        let mut state = env.initial_state().unwrap();
        env.apply(&mut state, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap();
        // Drain the buffer so the next pause stalls.
        env.apply(&mut state, &CompositeAction::Pause { seconds: 2.0 }, &fast).unwrap();
        let ladder = BitrateLadder::default();
        let scorer = Scorer {
            env,
            ladder: &ladder,
            mapping: QualityMapping::Linear,
            prefs: s.prefs,
        };
        let v = evaluate_candidate(&scorer, &state, &CompositeAction::Pause { seconds: 1.0 }, 3.0).unwrap();
        assert!(v <= 0.0, "{v}");
        let err = evaluate_candidate(&scorer, &state, &CompositeAction::Pause { seconds: 0.7 }, 3.0);
        assert!(err.is_err());
    }

    #[test]
    fn top_level_wins_with_free_bandwidth() {
        let s = scenario(3.0, 20.0);
        let cfg = SimConfig::default();
        let env = Env::new(&s.queue, &s.user, &cfg);
        let mut state = env.initial_state().unwrap();
        let fast = NetworkTrace::constant(50.0).unwrap();
        for _ in 0..4 {
            env.apply(&mut state, &CompositeAction::Download { video: 0, level: 0 }, &fast).unwrap();
        }
        let ladder = BitrateLadder::default();
        let prefs = PreferenceParams::new(1.0, 1.0, 0.5, 0.0).unwrap();
        let scorer = Scorer {
            env,
            ladder: &ladder,
            mapping: QualityMapping::Linear,
            prefs,
        };
        let values: Vec<f64> = (0..4)
            .map(|level| evaluate_candidate(&scorer, &state, &CompositeAction::Download { video: 0, level }, 2.0).unwrap())
            .collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(values[3], best, "{values:?}");
    }

    #[test]
    fn dag_shape_matches_model() {
        let s = scenario(2.0, 20.0);
        let cfg = ControllerConfig::default();
        let env = Env::new(&s.queue, &s.user, &cfg.sim);
        let state = env.initial_state().unwrap();
        let hist = ThroughputHistory::from_state(&state, cfg.sim.history_len, 2.0);
        let obs = observe(&state, &s.queue, &hist, &s.prefs, &cfg.sim);
        let dag = FeedsDag::new(&obs, &state, &s.queue, &cfg.sim);
        let model = cfg.new_model(1).unwrap();
        // Four videos in the queue with a window of five: three pauses and four videos.
        let pf = forward_policy(&model, &dag, &DagState::Root).unwrap();
        assert_eq!(pf.len(), 3 + 4);
        assert!((pf.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-9);
        let mut objects = Vec::new();
        for (_, c) in dag.children(&DagState::Root) {
            if dag.is_terminal(&c) {
                objects.push(dag.object(&c).unwrap());
            } else {
                for (_, t) in dag.children(&c) {
                    assert_eq!(dag.parents(&t), vec![c]);
                    objects.push(dag.object(&t).unwrap());
                }
            }
        }
        let legal = env.legal_actions(&state).unwrap();
        assert_eq!(objects.len(), legal.len());
        for a in &legal {
            assert!(objects.contains(a));
            assert_eq!(dag.path_to(a).unwrap().last(), dag.terminal_for(a).as_ref());
        }
    }

    fn small_suite() -> (Vec<Scenario>, ControllerConfig) {
        let mut dc = DatasetConfig::default();
        dc.traces_per_class = crate::dataset::ClassCounts { low: 1, medium: 1, high: 1 };
        dc.num_videos = 6;
        dc.num_users = 3;
        let ds = synthesize_dataset(&dc, 5).unwrap();
        let spec = ScenarioSpec {
            per_class: crate::dataset::ClassCounts { low: 1, medium: 1, high: 1 },
            queue_len: 4,
            seed: 5,
        };
        let cfg = ControllerConfig {
            hidden: vec![16],
            ladder: ds.config.ladder.clone(),
            ..ControllerConfig::default()
        };
        (build_scenarios(&ds, &spec).unwrap(), cfg)
    }

    #[test]
    fn single_equals_multi_with_one_candidate() {
        let (scen, cfg) = small_suite();
        let model = cfg.new_model(3).unwrap();
        let a = run_episode(&PolicyKind::GfnSingle, &model, &scen[1], &cfg, &mut episode_rng(9, 1)).unwrap();
        let mut m = model.clone();
        let b = episode(
            &PolicyKind::GfnSingle,
            &mut m,
            None,
            &scen[1],
            &cfg,
            &mut episode_rng(9, 1),
        )
        .unwrap();
        assert_eq!(a.decisions, b.decisions);
        assert!(a.decisions.iter().all(|d| d.candidates == 1));
    }

    #[test]
    fn evaluation_is_deterministic_and_telescopes() {
        let (scen, cfg) = small_suite();
        let model = cfg.new_model(3).unwrap();
        let policy = PolicyKind::GfnMulti { k: 10 };
        for (i, s) in scen.iter().enumerate() {
            let a = run_episode(&policy, &model, s, &cfg, &mut episode_rng(1, i)).unwrap();
            let b = run_episode(&policy, &model, s, &cfg, &mut episode_rng(1, i)).unwrap();
            assert_eq!(a, b);
            assert!(!a.truncated);
            let sum: f64 = a.decisions.iter().map(|d| d.realized).sum();
            assert!((sum - a.metrics.objective).abs() <= 1e-9 * a.metrics.objective.abs().max(1.0));
            assert!(a.decisions.iter().all(|d| d.candidates <= 10));
        }
    }

    #[test]
    fn fixed_pref_ignores_user_preferences() {
        let (scen, cfg) = small_suite();
        let model = cfg.new_model(3).unwrap();
        let policy = PolicyKind::from_name("gfn-fixed-pref", &cfg).unwrap();
        let mut other = scen[0].clone();
        other.prefs = PreferenceParams::new(2.0, 0.5, 1.0, 0.02).unwrap();
        let a = run_episode(&policy, &model, &scen[0], &cfg, &mut episode_rng(2, 0)).unwrap();
        let b = run_episode(&policy, &model, &other, &cfg, &mut episode_rng(2, 0)).unwrap();
        let acts = |r: &EpisodeResult| r.decisions.iter().map(|d| d.action).collect::<Vec<_>>();
        assert_eq!(acts(&a), acts(&b));
    }

    #[test]
    fn training_changes_the_model_and_reports_stats() {
        let (scen, cfg) = small_suite();
        let policy = PolicyKind::GfnMulti { k: 4 };
        let (model, log) = train_policy(&policy, &scen, 2, &cfg, 11).unwrap();
        assert_eq!(log.len(), 2);
        assert!(model.steps > 0);
        assert!(log.iter().all(|r| r.mean_tb_loss.is_finite() && r.mean_tb_loss >= 0.0));
        let again = train_policy(&policy, &scen, 2, &cfg, 11).unwrap();
        assert_eq!(again.0, model);
    }

    #[test]
    fn policy_names_round_trip() {
        let cfg = ControllerConfig::default();
        for n in PolicyKind::NAMES {
            assert_eq!(PolicyKind::from_name(n, &cfg).unwrap().name(), n);
        }
        assert!(PolicyKind::from_name("dqn", &cfg).is_err());
        assert!(PolicyKind::GfnMulti { k: 1 }.validate().is_err());
    }
}
