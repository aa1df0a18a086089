//! Stored episode paths and their rendering.

use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::Scenario;

use super::svg::escape;
use super::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub width: f64,
    pub height: f64,
    /// `[min_x, min_y, max_x, max_y]` per obstacle.
    pub obstacles: Vec<[f64; 4]>,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    /// Vehicle positions, start first.
    pub points: Vec<[f64; 2]>,
    pub success: bool,
    #[serde(rename = "return")]
    pub episode_return: f64,
}

impl Trajectory {
    pub fn new(scenario: &Scenario<f64>, points: Vec<[f64; 2]>, success: bool, episode_return: f64) -> Self {
        Self {
            width: scenario.width,
            height: scenario.height,
            obstacles: scenario.obstacles.iter().map(|r| [r.min_x, r.min_y, r.max_x, r.max_y]).collect(),
            goal: scenario.goal,
            goal_radius: scenario.goal_radius,
            points,
            success,
            episode_return,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("trajectory serializes");
        std::fs::write(path, text).map_err(|source| HarnessError::Io { path: path.into(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Metrics(format!("{}: {e}", path.display())))
    }

    /// Top-down view: arena, obstacles, goal disc, path. North is up.
    pub fn to_svg(&self) -> String {
        let scale = 600.0 / self.width.max(self.height);
        let (w, h) = (self.width * scale, self.height * scale);
        let m = 20.0;
        let px = |x: f64| m + x * scale;
        let py = |y: f64| m + (self.height - y) * scale;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="12">"#,
            w + 2.0 * m,
            h + 2.0 * m + 20.0
        );
        let _ = writeln!(s, r##"<rect x="{m}" y="{m}" width="{w:.2}" height="{h:.2}" fill="#fafafa" stroke="#222"/>"##);
        for o in &self.obstacles {
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#888"/>"##,
                px(o[0]),
                py(o[3]),
                (o[2] - o[0]) * scale,
                (o[3] - o[1]) * scale
            );
        }
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#2ca02c" fill-opacity="0.4" stroke="#2ca02c"/>"##,
            px(self.goal[0]),
            py(self.goal[1]),
            (self.goal_radius * scale).max(2.0)
        );
        let pts: Vec<String> = self.points.iter().map(|p| format!("{:.2},{:.2}", px(p[0]), py(p[1]))).collect();
        let _ = writeln!(s, r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##, pts.join(" "));
        if let Some(p) = self.points.first() {
            let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#d62728"/>"##, px(p[0]), py(p[1]));
        }
        let caption = format!(
            "{} steps, return {:.2}, {}",
            self.points.len().saturating_sub(1),
            self.episode_return,
            if self.success { "goal reached" } else { "goal missed" }
        );
        let _ = writeln!(s, r#"<text x="{m}" y="{:.2}">{}</text>"#, h + 2.0 * m + 8.0, escape(&caption));
        s.push_str("</svg>\n");
        s
    }
}
