// Drive the simulator by hand: fetch two chunks of every video at the
// lowest level, then wait for the session to play out.

use feedflow::media::{BitrateLadder, RecommendationQueue, Video};
use feedflow::objective::session_metrics;
use feedflow::sim::{write_event_log, CompositeAction, Env, EventRow, SimConfig};
use feedflow::traces::{NetworkTrace, PreferenceParams, UserTrace};

pub fn run_example() -> feedflow::Result<feedflow::objective::SessionMetrics> {
    let ladder = BitrateLadder::new(vec![500, 1000, 1500, 2500])?;
    // Three 4-chunk videos of 1 s chunks; sizes follow the ladder exactly.
    let videos = (0..3)
        .map(|i| {
            let sizes = (0..4)
                .map(|_| ladder.levels().iter().map(|&k| u64::from(k) * 125).collect())
                .collect();
            Video::new(format!("v{i}"), 1.0, sizes)
        })
        .collect::<feedflow::Result<Vec<_>>>()?;
    let queue = RecommendationQueue::new(videos)?;
    // The viewer swipes the middle video after 1.5 s.
    let user = UserTrace::new(vec![4.0, 1.5, 4.0])?;
    let trace = NetworkTrace::from_pairs(&[(0.0, 2.0), (3.0, 0.8)])?;
    let config = SimConfig::default();
    let env = Env::new(&queue, &user, &config);

    let mut state = env.initial_state()?;
    let mut log = Vec::new();
    let mut plan: Vec<CompositeAction> = (0..3)
        .flat_map(|video| [CompositeAction::Download { video, level: 0 }; 2])
        .collect();
    plan.reverse();
    while !state.finished {
        let action = match plan.pop() {
            Some(a) if env.check_action(&state, &a).is_ok() => a,
            Some(_) => continue,
            None => match env.legal_actions(&state)?.first() {
                // Fetch whatever is still missing, otherwise wait.
                Some(a @ CompositeAction::Download { .. }) => *a,
                _ => CompositeAction::Pause { seconds: config.min_pause() },
            },
        };
        let outcome = env.apply(&mut state, &action, &trace)?;
        log.push(EventRow::new(&state, &action, &outcome));
    }
    write_event_log(&log, std::io::stdout())?;

    let prefs = PreferenceParams::new(1.0, 4.0, 1.0, 0.05)?;
    let m = session_metrics(&state, &ladder, &prefs, Default::default())?;
    println!(
        "QoE {:.2}, rebuffer {:.2}s, {:.3} MB downloaded, {:.1}% wasted",
        m.qoe_raw,
        m.terms.rebuffer_sum,
        m.bandwidth_mb,
        100.0 * m.wastage_fraction
    );
    Ok(m)
}

fn main() -> feedflow::Result<()> {
    run_example().map(|_| ())
}
