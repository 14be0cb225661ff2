#![allow(dead_code)]

use std::path::PathBuf;

use feedflow::controller::{DagState, FeedsDag};
use feedflow::dataset::Dataset;
use feedflow::gfn::{FlowModel, TbExample};
use feedflow::harness::ExperimentConfig;
use feedflow::media::RecommendationQueue;
use feedflow::rng::stream_rng;
use feedflow::sim::{observe, Env, SessionState, SimConfig, ThroughputHistory};
use feedflow::traces::{NetworkTrace, PreferenceParams, UserTrace};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub fn demo_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo.toml")
}

pub fn demo_config() -> ExperimentConfig {
    ExperimentConfig::load(&demo_config_path()).expect("demo config")
}

pub fn demo_dataset() -> Dataset {
    demo_config().load_dataset().expect("demo dataset")
}

/// Every state of a session driven by uniformly random legal actions.
pub struct RandomEpisode {
    pub states: Vec<SessionState>,
    pub prefs: PreferenceParams,
}

/// Random queue, viewer, trace and preferences drawn from `ds`, then random
/// legal actions until the session ends.
pub fn random_episode(ds: &Dataset, index: u64) -> RandomEpisode {
    let mut rng = stream_rng(index, 0xe915);
    let n = rng.random_range(1..=6);
    let mut videos = ds.videos.clone();
    videos.shuffle(&mut rng);
    videos.truncate(n);
    let watch: Vec<f64> = videos
        .iter()
        .map(|v| match rng.random_range(0..5) {
            0 => 0.0,
            1 => v.duration() * 2.0,
            _ => rng.random_range(0.0..v.duration()),
        })
        .collect();
    let queue = RecommendationQueue::new(videos).unwrap();
    let user = UserTrace::new(watch).unwrap();
    let trace = if rng.random_bool(0.5) {
        ds.traces.choose(&mut rng).unwrap().trace.clone()
    } else {
        let pairs: Vec<(f64, f64)> =
            (0..rng.random_range(1..6)).map(|i| (i as f64 * 3.7, rng.random_range(0.05..8.0))).collect();
        NetworkTrace::from_pairs(&pairs).unwrap()
    };
    let prefs = *ds.prefs.choose(&mut rng).unwrap();
    let cfg = SimConfig::default();
    let env = Env::new(&queue, &user, &cfg);
    let mut state = env.initial_state().unwrap();
    let mut states = vec![state.clone()];
    while !state.finished {
        let actions = env.legal_actions(&state).unwrap();
        let a = *actions.choose(&mut rng).unwrap();
        env.apply(&mut state, &a, &trace).unwrap();
        states.push(state.clone());
    }
    RandomEpisode { states, prefs }
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central finite differences (step 1e-5) of `f` over every parameter and
/// then `log_z`, in the layout of the analytic gradients.
pub fn central_difference(model: &FlowModel, f: impl Fn(&FlowModel) -> f64) -> Vec<f64> {
    const H: f64 = 1e-5;
    let mut m = model.clone();
    let mut out = Vec::with_capacity(model.gradient_len());
    for i in 0..model.num_params() {
        let x = m.params()[i];
        m.params_mut()[i] = x + H;
        let up = f(&m);
        m.params_mut()[i] = x - H;
        let down = f(&m);
        m.params_mut()[i] = x;
        out.push((up - down) / (2.0 * H));
    }
    let z = m.log_z;
    m.log_z = z + H;
    let up = f(&m);
    m.log_z = z - H;
    let down = f(&m);
    out.push((up - down) / (2.0 * H));
    out
}

/// A decision tree built from a random point of a random demo session, a
/// small random model for it, and a batch of paths with random rewards.
pub fn feeds_batch<R: Rng>(rng: &mut R) -> (FeedsDag, FlowModel, Vec<TbExample<DagState>>) {
    let ds = demo_dataset();
    let mut videos = ds.videos.clone();
    videos.shuffle(rng);
    videos.truncate(4);
    let watch = videos.iter().map(|v| v.duration() * rng.random_range(0.2..1.0)).collect();
    let queue = RecommendationQueue::new(videos).unwrap();
    let user = UserTrace::new(watch).unwrap();
    let trace = ds.traces.choose(rng).unwrap().trace.clone();
    let cfg = SimConfig::default();
    let env = Env::new(&queue, &user, &cfg);
    let mut state = env.initial_state().unwrap();
    for _ in 0..rng.random_range(0..6) {
        let actions = env.legal_actions(&state).unwrap();
        let a = *actions.choose(rng).unwrap();
        env.apply(&mut state, &a, &trace).unwrap();
        if state.finished {
            break;
        }
    }
    if state.finished {
        state = env.initial_state().unwrap();
    }
    let prefs = *ds.prefs.choose(rng).unwrap();
    let history = ThroughputHistory::from_state(&state, cfg.history_len, 1.5);
    let obs = observe(&state, &queue, &history, &prefs, &cfg);
    let dag = FeedsDag::new(&obs, &state, &queue, &cfg);
    let levels = queue.videos()[0].num_levels();
    let layers = [FeedsDag::input_dim(&cfg), 12, 12, FeedsDag::output_dim(&cfg, levels)];
    let mut model = FlowModel::random(&layers, 1.0, rng).unwrap();
    model.log_z = rng.random_range(-1.0..1.0);
    let actions = env.legal_actions(&state).unwrap();
    let batch = actions
        .choose_multiple(rng, 5)
        .map(|a| TbExample {
            states: dag.path_to(a).unwrap(),
            log_reward: rng.random_range(-2.0..2.0),
        })
        .collect();
    (dag, model, batch)
}
