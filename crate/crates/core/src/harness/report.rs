use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::dataset::Scenario;
use crate::error::{Error, Result};
use crate::objective::{QoeBounds, SessionMetrics};
use crate::traces::BandwidthClass;

/// One evaluated episode, as stored in the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub class: BandwidthClass,
    pub scenario_id: String,
    pub seed: u64,
    pub qoe_norm: f64,
    pub qoe_raw: f64,
    pub rebuf_s: f64,
    pub bw_mb: f64,
    pub wastage_pct: f64,
    pub objective: f64,
}

impl MetricsRow {
    pub fn new(policy: &str, scenario: &Scenario, seed: u64, m: &SessionMetrics, cfg: &ExperimentConfig) -> Self {
        Self {
            policy: policy.to_string(),
            class: scenario.class,
            scenario_id: scenario.id.clone(),
            seed,
            qoe_norm: cfg
                .bounds
                .normalize(m, &scenario.prefs, &cfg.controller.ladder, cfg.controller.mapping),
            qoe_raw: m.qoe_raw,
            rebuf_s: m.terms.rebuffer_sum,
            bw_mb: m.bandwidth_mb,
            wastage_pct: 100.0 * m.wastage_fraction,
            objective: m.objective,
        }
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

/// Per-(method, class) means for the overall results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub class: BandwidthClass,
    pub qoe_norm: f64,
    pub rebuf_s: f64,
    pub bw_mb: f64,
    pub wastage_pct: f64,
    pub objective: f64,
    pub episodes: usize,
}

/// `(policy, class)` cells present in `rows`, policies in order of first
/// appearance and classes low to high.
pub fn cells_in(rows: &[MetricsRow]) -> Vec<(String, BandwidthClass)> {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let mut cells = Vec::new();
    for p in policies {
        for c in BandwidthClass::ALL {
            if rows.iter().any(|r| r.policy == p && r.class == c) {
                cells.push((p.to_string(), c));
            }
        }
    }
    cells
}

/// Arithmetic means per requested cell, in the order requested. Every cell
/// must have at least one row.
pub fn aggregate(rows: &[MetricsRow], cells: &[(String, BandwidthClass)]) -> Result<Vec<ReportRow>> {
    let mut groups: HashMap<(&str, BandwidthClass), Vec<&MetricsRow>> = HashMap::new();
    for r in rows {
        groups.entry((r.policy.as_str(), r.class)).or_default().push(r);
    }
    let missing: Vec<String> = cells
        .iter()
        .filter(|(p, c)| !groups.contains_key(&(p.as_str(), *c)))
        .map(|(p, c)| format!("{p}/{c}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::EmptyGroup(missing.join(", ")));
    }
    Ok(cells
        .iter()
        .map(|(p, c)| {
            let g = &groups[&(p.as_str(), *c)];
            let mean = |f: fn(&MetricsRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / g.len() as f64;
            ReportRow {
                method: p.clone(),
                class: *c,
                qoe_norm: mean(|r| r.qoe_norm).clamp(0.0, 1.0),
                rebuf_s: mean(|r| r.rebuf_s),
                bw_mb: mean(|r| r.bw_mb),
                wastage_pct: mean(|r| r.wastage_pct).clamp(0.0, 100.0),
                objective: mean(|r| r.objective),
                episodes: g.len(),
            }
        })
        .collect())
}

/// Paired comparison of two policies over shared (seed, scenario) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub pairs: usize,
    pub a_mean_objective: f64,
    pub b_mean_objective: f64,
    pub a_mean_qoe: f64,
    pub b_mean_qoe: f64,
    /// Fraction of pairs where `a` has the strictly higher objective.
    pub a_win_fraction: f64,
}

impl Comparison {
    pub fn a_better_on_average(&self) -> bool {
        self.a_mean_objective > self.b_mean_objective
    }
}

pub fn compare(rows: &[MetricsRow], a: &str, b: &str) -> Result<Comparison> {
    let key = |r: &MetricsRow| (r.seed, r.scenario_id.clone());
    let bs: HashMap<_, &MetricsRow> = rows.iter().filter(|r| r.policy == b).map(|r| (key(r), r)).collect();
    let pairs: Vec<(&MetricsRow, &MetricsRow)> = rows
        .iter()
        .filter(|r| r.policy == a)
        .filter_map(|r| bs.get(&key(r)).map(|o| (r, *o)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyGroup(format!("no paired episodes for {a} vs {b}")));
    }
    let n = pairs.len() as f64;
    Ok(Comparison {
        a: a.into(),
        b: b.into(),
        pairs: pairs.len(),
        a_mean_objective: pairs.iter().map(|p| p.0.objective).sum::<f64>() / n,
        b_mean_objective: pairs.iter().map(|p| p.1.objective).sum::<f64>() / n,
        a_mean_qoe: pairs.iter().map(|p| p.0.qoe_norm).sum::<f64>() / n,
        b_mean_qoe: pairs.iter().map(|p| p.1.qoe_norm).sum::<f64>() / n,
        a_win_fraction: pairs.iter().filter(|p| p.0.objective > p.1.objective).count() as f64 / n,
    })
}

fn comparison_table(out: &mut String, title: &str, c: &Comparison, a_label: &str, b_label: &str) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| Variant | QoE | Objective |");
    let _ = writeln!(out, "|---|---|---|");
    let _ = writeln!(out, "| {b_label} ({}) | {:.2} | {:.2} |", c.b, c.b_mean_qoe, c.b_mean_objective);
    let _ = writeln!(out, "| {a_label} ({}) | {:.2} | {:.2} |", c.a, c.a_mean_qoe, c.a_mean_objective);
    let _ = writeln!(
        out,
        "\n{} beats {} on {:.1}% of {} paired episodes.\n",
        c.a,
        c.b,
        100.0 * c.a_win_fraction,
        c.pairs
    );
}

/// Markdown report: the per-class overall table, then the two ablation
/// tables when their policies are present.
pub fn render_report(table: &[ReportRow], rows: &[MetricsRow], bounds: &QoeBounds) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation report\n");
    let _ = writeln!(out, "## Overall performance by bandwidth class\n");
    let _ = writeln!(out, "| Method | Class | QoE | Rebuffer (s) | Bandwidth (MB) | Wastage (%) |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for r in table {
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} | {:.1} | {:.1} |",
            r.method,
            r.class.label(),
            r.qoe_norm,
            r.rebuf_s,
            r.bw_mb,
            r.wastage_pct
        );
    }
    let _ = writeln!(out);
    if let Ok(c) = compare(rows, "gfn-multi", "gfn-single") {
        comparison_table(&mut out, "Multi-candidate vs single-candidate", &c, "MC", "SC");
    }
    if let Ok(c) = compare(rows, "gfn-multi", "gfn-fixed-pref") {
        comparison_table(&mut out, "Personalized vs fixed preferences", &c, "Personalized", "Fixed Preferences");
    }
    let _ = writeln!(out, "{}", bounds.describe());
    out
}

pub fn render_ablation(mc: &Comparison, pers: &Comparison) -> String {
    let mut out = String::from("# Ablations\n\n");
    comparison_table(&mut out, "Multi-candidate vs single-candidate", mc, "MC", "SC");
    comparison_table(&mut out, "Personalized vs fixed preferences", pers, "Personalized", "Fixed Preferences");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str, class: BandwidthClass, id: &str, wastage: f64, objective: f64) -> MetricsRow {
        MetricsRow {
            policy: policy.into(),
            class,
            scenario_id: id.into(),
            seed: 1,
            qoe_norm: 0.5,
            qoe_raw: 10.0,
            rebuf_s: 1.0,
            bw_mb: 20.0,
            wastage_pct: wastage,
            objective,
        }
    }

    #[test]
    fn single_episode_group_equals_the_episode() {
        let r = row("a", BandwidthClass::Low, "s", 12.5, 3.0);
        let t = aggregate(std::slice::from_ref(&r), &[("a".into(), BandwidthClass::Low)]).unwrap();
        assert_eq!(t[0].wastage_pct, 12.5);
        assert_eq!(t[0].objective, 3.0);
        assert_eq!(t[0].episodes, 1);
    }

    #[test]
    fn means_and_missing_cells() {
        let rows = vec![
            row("a", BandwidthClass::Low, "s1", 10.0, 1.0),
            row("a", BandwidthClass::Low, "s2", 20.0, 2.0),
        ];
        let t = aggregate(&rows, &cells_in(&rows)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].wastage_pct, 15.0);
        let err = aggregate(&rows, &[("a".into(), BandwidthClass::High), ("b".into(), BandwidthClass::Low)]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a/high") && msg.contains("b/low"), "{msg}");
    }

    #[test]
    fn comparison_pairs_by_scenario_and_seed() {
        let rows = vec![
            row("a", BandwidthClass::Low, "s1", 0.0, 5.0),
            row("a", BandwidthClass::Low, "s2", 0.0, 1.0),
            row("b", BandwidthClass::Low, "s1", 0.0, 4.0),
            row("b", BandwidthClass::Low, "s2", 0.0, 1.0),
        ];
        let c = compare(&rows, "a", "b").unwrap();
        assert_eq!(c.pairs, 2);
        assert_eq!(c.a_win_fraction, 0.5);
        assert!(c.a_better_on_average());
        assert!(compare(&rows, "a", "z").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("m.csv");
        let rows = vec![row("a", BandwidthClass::Medium, "medium-000", 1.0 / 3.0, -0.1)];
        write_metrics(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("policy,class,scenario_id,seed,qoe_norm,qoe_raw,rebuf_s,bw_mb,wastage_pct,objective\n"));
        assert_eq!(read_metrics(&p).unwrap(), rows);
    }
}
