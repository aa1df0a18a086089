use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Real;

use super::{Rect, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams<T> {
    pub goal_bonus: T,
    pub wall_penalty: T,
    /// Per-step penalty is `-distance_coeff · distance(vehicle, goal)`.
    pub distance_coeff: T,
}

/// Dogfight reward constants. Angles are in radians here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DogfightParams<T> {
    pub r_min: T,
    pub r_max: T,
    pub aa_fire: T,
    pub ata_fire: T,
    pub aa_tail: T,
    pub ata_tail: T,
    /// Penalty for touching a wall during a dogfight.
    pub g_hit: T,
    pub g_advantage: T,
    pub g_disadvantage: T,
    pub g_collision: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub width: T,
    pub height: T,
    pub obstacles: Vec<Rect<T>>,
    pub goal: [T; 2],
    pub goal_radius: T,
    pub max_steps: u32,
    pub dt: T,
    pub lidar_range: T,
    pub rewards: RewardParams<T>,
    pub dogfight: DogfightParams<T>,
}

impl<T: Real> Scenario<T> {
    /// Obstacle-free arena with the goal at three quarters of each side.
    pub fn open_arena(width: T, height: T) -> Self {
        let mut file = ScenarioFile::default();
        file.arena.width = width.as_f64();
        file.arena.height = height.as_f64();
        file.goal.x = 0.75 * file.arena.width;
        file.goal.y = 0.75 * file.arena.height;
        Self::from_file(&file).expect("open arena is valid")
    }

    /// 4000 m arena with four rectangular blocks between the start region and the goal.
    pub fn obstacle_course() -> Self {
        let file = ScenarioFile {
            goal: GoalSection { x: 3400.0, y: 3400.0, radius: 50.0 },
            obstacles: vec![
                ObstacleSection { min_x: 800.0, min_y: 800.0, max_x: 1400.0, max_y: 1200.0 },
                ObstacleSection { min_x: 2200.0, min_y: 600.0, max_x: 2600.0, max_y: 1800.0 },
                ObstacleSection { min_x: 1000.0, min_y: 2400.0, max_x: 2000.0, max_y: 2800.0 },
                ObstacleSection { min_x: 2800.0, min_y: 2600.0, max_x: 3200.0, max_y: 3000.0 },
            ],
            ..ScenarioFile::default()
        };
        Self::from_file(&file).expect("obstacle course is valid")
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Self> {
        let f = |v: f64| T::lit(v);
        let deg = |v: f64| T::lit(v.to_radians());
        let s = Self {
            width: f(file.arena.width),
            height: f(file.arena.height),
            obstacles: file
                .obstacles
                .iter()
                .map(|o| Rect::new(f(o.min_x), f(o.min_y), f(o.max_x), f(o.max_y)))
                .collect(),
            goal: [f(file.goal.x), f(file.goal.y)],
            goal_radius: f(file.goal.radius),
            max_steps: file.episode.max_steps,
            dt: f(file.arena.dt),
            lidar_range: f(file.arena.lidar_range),
            rewards: RewardParams {
                goal_bonus: f(file.rewards.goal_bonus),
                wall_penalty: f(file.rewards.wall_penalty),
                distance_coeff: f(file.rewards.distance_coeff),
            },
            dogfight: DogfightParams {
                r_min: f(file.dogfight.r_min),
                r_max: f(file.dogfight.r_max),
                aa_fire: deg(file.dogfight.aa_fire),
                ata_fire: deg(file.dogfight.ata_fire),
                aa_tail: deg(file.dogfight.aa_tail),
                ata_tail: deg(file.dogfight.ata_tail),
                g_hit: f(file.dogfight.g_hit),
                g_advantage: f(file.dogfight.g_advantage),
                g_disadvantage: f(file.dogfight.g_disadvantage),
                g_collision: f(file.dogfight.g_collision),
            },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let v = |x: T| x.as_f64();
        let deg = |x: T| x.as_f64().to_degrees();
        ScenarioFile {
            arena: ArenaSection {
                width: v(self.width),
                height: v(self.height),
                dt: v(self.dt),
                lidar_range: v(self.lidar_range),
            },
            obstacles: self
                .obstacles
                .iter()
                .map(|o| ObstacleSection {
                    min_x: v(o.min_x),
                    min_y: v(o.min_y),
                    max_x: v(o.max_x),
                    max_y: v(o.max_y),
                })
                .collect(),
            goal: GoalSection { x: v(self.goal[0]), y: v(self.goal[1]), radius: v(self.goal_radius) },
            rewards: RewardSection {
                goal_bonus: v(self.rewards.goal_bonus),
                wall_penalty: v(self.rewards.wall_penalty),
                distance_coeff: v(self.rewards.distance_coeff),
            },
            dogfight: DogfightSection {
                r_min: v(self.dogfight.r_min),
                r_max: v(self.dogfight.r_max),
                aa_fire: deg(self.dogfight.aa_fire),
                ata_fire: deg(self.dogfight.ata_fire),
                aa_tail: deg(self.dogfight.aa_tail),
                ata_tail: deg(self.dogfight.ata_tail),
                g_hit: v(self.dogfight.g_hit),
                g_advantage: v(self.dogfight.g_advantage),
                g_disadvantage: v(self.dogfight.g_disadvantage),
                g_collision: v(self.dogfight.g_collision),
            },
            episode: EpisodeSection { max_steps: self.max_steps },
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario serializes")
    }

    /// Stable hex digest of the scenario's canonical text form.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn cast<U: Real>(&self) -> Scenario<U> {
        Scenario::from_file(&self.to_file()).expect("cast of a valid scenario")
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let bad = |m: String| Err(SimError::Config(m));
        let all_finite = [self.width, self.height, self.dt, self.lidar_range, self.goal_radius]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.width <= zero || self.height <= zero {
            return bad("arena dimensions must be positive and finite".into());
        }
        if self.dt <= zero {
            return bad("arena.dt must be positive".into());
        }
        if self.lidar_range <= zero {
            return bad("arena.lidar_range must be positive".into());
        }
        if self.max_steps < 1 {
            return bad("episode.max_steps must be at least 1".into());
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let inside = o.min_x > zero && o.min_y > zero && o.max_x < self.width && o.max_y < self.height;
            if !inside || o.max_x <= o.min_x || o.max_y <= o.min_y {
                return bad(format!(
                    "obstacles[{i}] must have positive area and lie strictly inside the arena"
                ));
            }
        }
        let [gx, gy] = self.goal;
        let r = self.goal_radius;
        if r <= zero {
            return bad("goal.radius must be positive".into());
        }
        if !(gx > r && gy > r && gx < self.width - r && gy < self.height - r) {
            return bad("goal must lie inside the arena, farther than goal.radius from every wall".into());
        }
        if self.obstacles.iter().any(|o| o.contains_closed(self.goal)) {
            return bad("goal lies inside an obstacle".into());
        }
        let d = &self.dogfight;
        if !(zero < d.r_min && d.r_min < d.r_max) {
            return bad("dogfight requires 0 < r_min < r_max".into());
        }
        Ok(())
    }
}

/// On-disk scenario schema. Distances in meters, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct ScenarioFile {
    pub arena: ArenaSection,
    pub obstacles: Vec<ObstacleSection>,
    pub goal: GoalSection,
    pub rewards: RewardSection,
    pub dogfight: DogfightSection,
    pub episode: EpisodeSection,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaSection {
    pub width: f64,
    pub height: f64,
    pub dt: f64,
    pub lidar_range: f64,
}

impl Default for ArenaSection {
    fn default() -> Self {
        Self { width: 4000.0, height: 4000.0, dt: 0.1, lidar_range: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoalSection {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Default for GoalSection {
    fn default() -> Self {
        Self { x: 3000.0, y: 3000.0, radius: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub goal_bonus: f64,
    pub wall_penalty: f64,
    pub distance_coeff: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self { goal_bonus: 10_000.0, wall_penalty: -100.0, distance_coeff: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DogfightSection {
    pub r_min: f64,
    pub r_max: f64,
    pub aa_fire: f64,
    pub ata_fire: f64,
    pub aa_tail: f64,
    pub ata_tail: f64,
    pub g_hit: f64,
    pub g_advantage: f64,
    pub g_disadvantage: f64,
    pub g_collision: f64,
}

impl Default for DogfightSection {
    fn default() -> Self {
        Self {
            r_min: 100.0,
            r_max: 2000.0,
            aa_fire: 60.0,
            ata_fire: 30.0,
            aa_tail: 150.0,
            ata_tail: 120.0,
            g_hit: -100.0,
            g_advantage: 1.0,
            g_disadvantage: -1.0,
            g_collision: -10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSection {
    pub max_steps: u32,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self { max_steps: 1000 }
    }
}
