//! Post-hoc charts and tables from a metrics log.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::metrics::{read_metrics, MetricsRecord, Phase};
use super::svg::{LineChart, Series};
use super::{create_dir, HarnessError, Result};

pub const MOVING_AVERAGE_WINDOW: usize = 100;

/// Trailing mean over at most `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

struct Table {
    header: String,
    rows: Vec<String>,
}

impl Table {
    fn new(header: &str) -> Self {
        Self { header: header.to_string(), rows: Vec::new() }
    }

    fn render(&self) -> String {
        let mut s = self.header.clone();
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{r}");
        }
        s
    }
}

fn agent_suffix(agents: &BTreeSet<usize>, agent: usize) -> String {
    if agents.len() > 1 {
        format!(" (agent {agent})")
    } else {
        String::new()
    }
}

/// Writes four charts and their CSV tables into `out_dir`; returns the paths.
pub fn emit_plots(metrics_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let records = read_metrics(metrics_path.as_ref())?;
    if records.is_empty() {
        return Err(HarnessError::Metrics(format!("{} holds no records", metrics_path.as_ref().display())));
    }
    let out_dir = out_dir.as_ref();
    let agents: BTreeSet<usize> = records.iter().map(|r| r.agent).collect();
    let of = |agent: usize, phases: &[Phase]| -> Vec<&MetricsRecord> {
        records.iter().filter(|r| r.agent == agent && phases.contains(&r.phase)).collect()
    };

    let mut actor = LineChart::new("Actor loss", "environment step", "mean actor loss");
    let mut critic = LineChart::new("Critic loss", "environment step", "mean critic loss");
    let mut reward = LineChart::new(
        &format!("Average reward, last {MOVING_AVERAGE_WINDOW} episodes"),
        "episode",
        "moving average return",
    );
    let mut validation = LineChart::new("Validation reward", "validation", "mean return");
    let mut t_actor = Table::new("agent,total_steps,actor_loss");
    let mut t_critic = Table::new("agent,total_steps,critic1_loss,critic2_loss");
    let mut t_reward = Table::new("agent,episode,return,moving_average");
    let mut t_val = Table::new("agent,validation,mean_return,success_rate");

    for &a in &agents {
        let sfx = agent_suffix(&agents, a);
        let train = of(a, &[Phase::Train]);
        let pts: Vec<(f64, f64)> = train
            .iter()
            .filter_map(|r| r.actor_loss.map(|l| (r.total_steps as f64, l)))
            .collect();
        t_actor.rows.extend(pts.iter().map(|(x, y)| format!("{a},{x},{y}")));
        actor.series.push(Series { name: format!("actor{sfx}"), points: pts });

        let pairs: Vec<(f64, [f64; 2])> = train
            .iter()
            .filter_map(|r| r.critic_loss.map(|l| (r.total_steps as f64, l)))
            .collect();
        t_critic.rows.extend(pairs.iter().map(|(x, l)| format!("{a},{x},{},{}", l[0], l[1])));
        for k in 0..2 {
            critic.series.push(Series {
                name: format!("critic {}{sfx}", k + 1),
                points: pairs.iter().map(|(x, l)| (*x, l[k])).collect(),
            });
        }

        let returns: Vec<f64> = of(a, &[Phase::Explore, Phase::Train]).iter().map(|r| r.episode_return).collect();
        let ma = moving_average(&returns, MOVING_AVERAGE_WINDOW);
        t_reward.rows.extend(returns.iter().zip(&ma).enumerate().map(|(i, (r, m))| format!("{a},{i},{r},{m}")));
        reward.series.push(Series {
            name: format!("moving average{sfx}"),
            points: ma.iter().enumerate().map(|(i, &m)| (i as f64, m)).collect(),
        });

        let vals = of(a, &[Phase::Validate]);
        t_val.rows.extend(
            vals.iter()
                .map(|r| format!("{a},{},{},{}", r.episode, r.episode_return, r.success_rate.unwrap_or(f64::NAN))),
        );
        validation.series.push(Series {
            name: format!("validation{sfx}"),
            points: vals.iter().map(|r| (r.episode as f64, r.episode_return)).collect(),
        });
    }

    create_dir(out_dir)?;
    let files = [
        ("actor_loss", actor.render(), t_actor.render()),
        ("critic_loss", critic.render(), t_critic.render()),
        ("reward_moving_average", reward.render(), t_reward.render()),
        ("validation_reward", validation.render(), t_val.render()),
    ];
    let mut written = Vec::new();
    for (stem, svg, csv) in files {
        for (ext, body) in [("svg", svg), ("csv", csv)] {
            let path = out_dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
            written.push(path);
        }
    }
    Ok(written)
}

impl LineChart {
    fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::super::metrics::MetricsWriter;
    use super::super::svg::polyline_vertex_counts;
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn moving_average_of_constant_is_constant(c in -1e6f64..1e6, n in 1usize..300, w in 1usize..150) {
            let ma = moving_average(&vec![c; n], w);
            prop_assert!(ma.iter().all(|m| (m - c).abs() <= 1e-9 * c.abs().max(1.0)));
        }
    }

    #[test]
    fn moving_average_window() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn validation_polyline_has_one_vertex_per_record() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("m.jsonl");
        let mut w = MetricsWriter::create(&log).unwrap();
        for i in 0..12 {
            let mut r = MetricsRecord::episode(Phase::Train, 0, i, 10, 10 * (i as u64 + 1), -(i as f64));
            r.actor_loss = Some(1.0 / (i + 1) as f64);
            r.critic_loss = Some([0.5, 0.25]);
            w.write(&r).unwrap();
            if i % 4 == 3 {
                let mut v = MetricsRecord::episode(Phase::Validate, 0, i / 4, 10, 0, i as f64);
                v.success_rate = Some(0.5);
                w.write(&v).unwrap();
            }
        }
        let out = dir.path().join("plots");
        let files = emit_plots(&log, &out).unwrap();
        assert_eq!(files.len(), 8);
        let svg = std::fs::read_to_string(out.join("validation_reward.svg")).unwrap();
        assert_eq!(polyline_vertex_counts(&svg), vec![3]);
        let csv = std::fs::read_to_string(out.join("reward_moving_average.csv")).unwrap();
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn empty_log_is_an_error_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("m.jsonl");
        std::fs::write(&log, "").unwrap();
        let out = dir.path().join("plots");
        assert!(matches!(emit_plots(&log, &out), Err(HarnessError::Metrics(_))));
        assert!(!out.exists());
        std::fs::write(&log, "{not json}\n").unwrap();
        assert!(matches!(emit_plots(&log, &out), Err(HarnessError::Metrics(_))));
        assert!(!out.exists());
    }
}
