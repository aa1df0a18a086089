use crate::Real;

use super::{Result, Scenario, SimError};

pub const LIDAR_RAYS: usize = 8;

/// Axis-aligned rectangle `[min_x, max_x] × [min_y, max_y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Real> Rect<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    /// Strict interior test; points on an edge are outside.
    pub fn contains_strict(&self, p: [T; 2]) -> bool {
        p[0] > self.min_x && p[0] < self.max_x && p[1] > self.min_y && p[1] < self.max_y
    }

    pub fn contains_closed(&self, p: [T; 2]) -> bool {
        p[0] >= self.min_x && p[0] <= self.max_x && p[1] >= self.min_y && p[1] <= self.max_y
    }

    pub fn inflate(&self, margin: T) -> Self {
        Self::new(self.min_x - margin, self.min_y - margin, self.max_x + margin, self.max_y + margin)
    }

    pub fn cast<U: Real>(&self) -> Rect<U> {
        Rect::new(
            U::lit(self.min_x.as_f64()),
            U::lit(self.min_y.as_f64()),
            U::lit(self.max_x.as_f64()),
            U::lit(self.max_y.as_f64()),
        )
    }

    /// Edges with normals pointing out of the rectangle.
    fn outward_edges(&self) -> [Edge<T>; 4] {
        let (x0, y0, x1, y1) = (self.min_x, self.min_y, self.max_x, self.max_y);
        let (o, l) = (T::zero(), T::one());
        [
            Edge { a: [x0, y0], b: [x1, y0], normal: [o, -l] },
            Edge { a: [x1, y0], b: [x1, y1], normal: [l, o] },
            Edge { a: [x1, y1], b: [x0, y1], normal: [o, l] },
            Edge { a: [x0, y1], b: [x0, y0], normal: [-l, o] },
        ]
    }
}

/// A blocking segment with the unit normal pointing into free space.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Edge<T> {
    pub a: [T; 2],
    pub b: [T; 2],
    pub normal: [T; 2],
}

/// All blocking segments of a scenario: arena walls first (normals inward),
/// then obstacle edges (normals outward from the obstacle).
pub(crate) fn edges<T: Real>(scenario: &Scenario<T>) -> impl Iterator<Item = Edge<T>> + '_ {
    let arena = Rect::new(T::zero(), T::zero(), scenario.width, scenario.height);
    let walls = arena.outward_edges().into_iter().map(|e| Edge {
        normal: [-e.normal[0], -e.normal[1]],
        ..e
    });
    walls.chain(scenario.obstacles.iter().flat_map(|r| r.outward_edges()))
}

fn cross<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    a[0] * b[1] - a[1] * b[0]
}

/// Parameter `t ≥ 0` at which `origin + t·dir` meets segment `[a, b]`, if any.
/// Parallel (including collinear) configurations report no hit.
pub(crate) fn ray_hits_segment<T: Real>(origin: [T; 2], dir: [T; 2], a: [T; 2], b: [T; 2]) -> Option<T> {
    let seg = [b[0] - a[0], b[1] - a[1]];
    let denom = cross(dir, seg);
    if denom == T::zero() {
        return None;
    }
    let rel = [a[0] - origin[0], a[1] - origin[1]];
    let t = cross(rel, seg) / denom;
    let u = cross(rel, dir) / denom;
    if t >= T::zero() && u >= T::zero() && u <= T::one() {
        Some(t)
    } else {
        None
    }
}

/// Eight range readings at body-frame offsets `k·45°`, counter-clockwise from
/// the nose, each clamped to the scenario's LIDAR range.
pub fn lidar_scan<T: Real>(state: &super::VehicleState<T>, scenario: &Scenario<T>) -> Result<[T; LIDAR_RAYS]> {
    let p = state.position();
    let arena = Rect::new(T::zero(), T::zero(), scenario.width, scenario.height);
    if !arena.contains_closed(p) {
        return Err(SimError::Geometry(format!(
            "position ({}, {}) outside arena",
            p[0], p[1]
        )));
    }
    let step = T::FRAC_PI_4();
    let mut out = [scenario.lidar_range; LIDAR_RAYS];
    for (k, reading) in out.iter_mut().enumerate() {
        let angle = state.heading + step * T::lit(k as f64);
        let dir = [angle.cos(), angle.sin()];
        for e in edges(scenario) {
            if let Some(t) = ray_hits_segment(p, dir, e.a, e.b) {
                if t < *reading {
                    *reading = t;
                }
            }
        }
    }
    Ok(out)
}

/// First blocking edge crossed by the motion `from → to` (moving against the
/// edge normal), as `(fraction along the motion, edge)`.
pub(crate) fn first_crossing<T: Real>(
    from: [T; 2],
    to: [T; 2],
    scenario: &Scenario<T>,
) -> Option<(T, Edge<T>)> {
    let d = [to[0] - from[0], to[1] - from[1]];
    let mut best: Option<(T, Edge<T>)> = None;
    for e in edges(scenario) {
        if d[0] * e.normal[0] + d[1] * e.normal[1] >= T::zero() {
            continue;
        }
        if let Some(t) = ray_hits_segment(from, d, e.a, e.b) {
            if t <= T::one() && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, e));
            }
        }
    }
    best
}

/// A point is free when it lies in the closed arena and in no obstacle interior.
pub(crate) fn is_free<T: Real>(p: [T; 2], scenario: &Scenario<T>) -> bool {
    let arena = Rect::new(T::zero(), T::zero(), scenario.width, scenario.height);
    arena.contains_closed(p) && !scenario.obstacles.iter().any(|o| o.contains_strict(p))
}
