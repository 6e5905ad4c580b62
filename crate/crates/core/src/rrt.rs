//! Stochastic path prior: goal-biased RRT, random shortcut smoothing and
//! constant-speed time parameterization.
//!
//! Every call draws a fresh tree, so repeated calls with different random
//! streams sample different routes between the same two points. That
//! randomness is the trajectory prior the nested models condition on.

use crate::error::{Error, Result};
use crate::geometry::{polyline_length, Point2, EPS};
use crate::world::WorldMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RrtConfig {
    pub step_size: f64,
    pub goal_bias: f64,
    pub goal_tolerance: f64,
    pub max_iterations: usize,
    pub smoothing_iterations: usize,
    /// Map units travelled per time step.
    pub speed: f64,
}

impl RrtConfig {
    /// Defaults scaled to the map: step of 2% of the diagonal, and a speed
    /// at which crossing the longer side of the map takes `horizon` steps.
    pub fn for_map(map: &WorldMap, horizon: usize) -> Self {
        let step = 0.02 * map.diagonal();
        let side = map.bounds().width().max(map.bounds().height());
        Self {
            step_size: step,
            goal_bias: 0.05,
            goal_tolerance: step,
            max_iterations: 5000,
            smoothing_iterations: 100,
            speed: side / horizon.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.step_size > 0.0
            && (0.0..=1.0).contains(&self.goal_bias)
            && self.goal_tolerance > 0.0
            && self.max_iterations > 0
            && self.speed > 0.0
            && self.step_size.is_finite()
            && self.speed.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid planner parameters: {self:?}")))
        }
    }
}

/// Collision-free polyline from the requested start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<Point2>,
}

impl PlannedPath {
    pub fn stationary(at: Point2) -> Self {
        Self { waypoints: vec![at] }
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.waypoints)
    }

    pub fn start(&self) -> Point2 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Point2 {
        *self.waypoints.last().expect("path is never empty")
    }

    /// Point at arc length `s` (clamped), with the index of the segment it
    /// lies on.
    fn point_at(&self, s: f64) -> (usize, Point2) {
        let mut remaining = s.max(0.0);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if remaining <= len {
                let t = if len > 0.0 { remaining / len } else { 0.0 };
                return (i, w[0].lerp(w[1], t));
            }
            remaining -= len;
        }
        (self.waypoints.len().saturating_sub(2), self.end())
    }
}

/// Positions of one agent over a contiguous range of time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t_first: usize,
    pub positions: Vec<Point2>,
}

impl Trajectory {
    pub fn new(t_first: usize, positions: Vec<Point2>) -> Self {
        assert!(!positions.is_empty(), "trajectory needs at least one position");
        Self { t_first, positions }
    }

    /// Agent standing still at `p` from `t_first` through `t_last`.
    pub fn hold(p: Point2, t_first: usize, t_last: usize) -> Self {
        Self::new(t_first, vec![p; t_last - t_first + 1])
    }

    pub fn t_last(&self) -> usize {
        self.t_first + self.positions.len() - 1
    }

    pub fn covers(&self, first: usize, last: usize) -> bool {
        first >= self.t_first && last <= self.t_last()
    }

    pub fn at(&self, t: usize) -> Option<Point2> {
        t.checked_sub(self.t_first).and_then(|i| self.positions.get(i)).copied()
    }

    pub fn last(&self) -> Point2 {
        *self.positions.last().unwrap()
    }

    /// Sub-trajectory over `first..=last`; `None` unless covered.
    pub fn slice(&self, first: usize, last: usize) -> Option<Trajectory> {
        if first > last || !self.covers(first, last) {
            return None;
        }
        let i = first - self.t_first;
        let j = last - self.t_first;
        Some(Trajectory::new(first, self.positions[i..=j].to_vec()))
    }

    /// Appends `next`, which must start right after this trajectory ends.
    pub fn concat(&self, next: &Trajectory) -> Option<Trajectory> {
        if next.t_first != self.t_last() + 1 {
            return None;
        }
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&next.positions);
        Some(Trajectory::new(self.t_first, positions))
    }

    pub fn push(&mut self, p: Point2) {
        self.positions.push(p);
    }

    pub fn truncate_to(&mut self, t_last: usize) {
        let keep = t_last + 1 - self.t_first;
        self.positions.truncate(keep);
    }

    pub fn max_step(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .fold(0.0, f64::max)
    }
}

const LINEAR_SCAN_NODES: usize = 256;

/// Bucket grid over tree nodes for nearest-neighbour queries.
struct NodeGrid {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl NodeGrid {
    fn new(map: &WorldMap, cell: f64) -> Self {
        let b = map.bounds();
        let nx = ((b.width() / cell).ceil() as usize).clamp(1, 512);
        let ny = ((b.height() / cell).ceil() as usize).clamp(1, 512);
        let cell = (b.width() / nx as f64).max(b.height() / ny as f64);
        Self {
            origin: b.min,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        }
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell).floor().max(0.0) as usize;
        let cy = ((p.y - self.origin.y) / self.cell).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    fn insert(&mut self, p: Point2, id: u32) {
        let (cx, cy) = self.cell_of(p);
        self.cells[cy * self.nx + cx].push(id);
    }

    fn nearest(&self, q: Point2, nodes: &[Point2]) -> usize {
        // Small or clustered trees: a linear scan beats walking empty rings.
        if nodes.len() <= LINEAR_SCAN_NODES {
            let mut best = (f64::INFINITY, 0);
            for (i, n) in nodes.iter().enumerate() {
                let d = n.distance_sq(q);
                if d < best.0 {
                    best = (d, i);
                }
            }
            return best.1;
        }
        let (cx, cy) = self.cell_of(q);
        let mut best = (f64::INFINITY, usize::MAX);
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // Anything in ring r+1 or beyond is at least r cells away.
            if best.1 != usize::MAX {
                let bound = (ring as f64 - 1.0).max(0.0) * self.cell;
                if bound * bound > best.0 {
                    break;
                }
            }
            let (x0, x1) = (cx as isize - ring as isize, cx as isize + ring as isize);
            let (y0, y1) = (cy as isize - ring as isize, cy as isize + ring as isize);
            for y in y0..=y1 {
                if y < 0 || y >= self.ny as isize {
                    continue;
                }
                let on_edge_row = y == y0 || y == y1;
                let mut x = x0;
                while x <= x1 {
                    if x >= 0 && x < self.nx as isize {
                        for &id in &self.cells[y as usize * self.nx + x as usize] {
                            let d = nodes[id as usize].distance_sq(q);
                            if d < best.0 || (d == best.0 && (id as usize) < best.1) {
                                best = (d, id as usize);
                            }
                        }
                    }
                    x += if on_edge_row || x == x1 { 1 } else { x1 - x0 };
                }
            }
        }
        best.1
    }
}

fn sample_free<R: Rng + ?Sized>(map: &WorldMap, rng: &mut R) -> Point2 {
    loop {
        let p = map.sample_in_bounds(rng);
        if map.is_free(p) {
            return p;
        }
    }
}

/// Goal-biased holonomic RRT from `start` towards `goal`.
pub fn rrt_plan<R: Rng + ?Sized>(
    map: &WorldMap,
    start: Point2,
    goal: Point2,
    cfg: &RrtConfig,
    rng: &mut R,
) -> Result<PlannedPath> {
    if start.distance(goal) <= EPS {
        return Ok(PlannedPath::stationary(start));
    }
    if !map.is_free(start) || !map.is_free(goal) {
        return Err(Error::PlanningFailure { iterations: 0 });
    }
    if start.distance(goal) <= cfg.goal_tolerance && map.segment_free(start, goal) {
        return Ok(PlannedPath {
            waypoints: vec![start, goal],
        });
    }

    let mut nodes = vec![start];
    let mut parents = vec![0usize];
    let mut grid = NodeGrid::new(map, 2.0 * cfg.step_size);
    grid.insert(start, 0);

    for _ in 0..cfg.max_iterations {
        let target = if rng.gen::<f64>() < cfg.goal_bias {
            goal
        } else {
            sample_free(map, rng)
        };
        let near_id = grid.nearest(target, &nodes);
        let near = nodes[near_id];
        let dist = near.distance(target);
        if dist <= EPS {
            continue;
        }
        let new = if dist <= cfg.step_size {
            target
        } else {
            near.lerp(target, cfg.step_size / dist)
        };
        if !map.segment_free(near, new) {
            continue;
        }
        let id = nodes.len();
        nodes.push(new);
        parents.push(near_id);
        grid.insert(new, id as u32);

        if new.distance(goal) <= cfg.goal_tolerance {
            let mut waypoints = vec![];
            if new.distance(goal) > EPS && map.segment_free(new, goal) {
                waypoints.push(goal);
            }
            let mut cur = id;
            loop {
                waypoints.push(nodes[cur]);
                if cur == 0 {
                    break;
                }
                cur = parents[cur];
            }
            waypoints.reverse();
            return Ok(PlannedPath { waypoints });
        }
    }
    Err(Error::PlanningFailure {
        iterations: cfg.max_iterations,
    })
}

/// Random shortcut smoothing: repeatedly joins two random points on the
/// polyline when the straight connection is free.
pub fn shortcut_smooth<R: Rng + ?Sized>(
    path: &PlannedPath,
    map: &WorldMap,
    cfg: &RrtConfig,
    rng: &mut R,
) -> PlannedPath {
    let mut pts = path.waypoints.clone();
    for _ in 0..cfg.smoothing_iterations {
        if pts.len() < 3 {
            break;
        }
        let current = PlannedPath { waypoints: pts };
        let total = current.length();
        let mut s1 = rng.gen::<f64>() * total;
        let mut s2 = rng.gen::<f64>() * total;
        if s1 > s2 {
            std::mem::swap(&mut s1, &mut s2);
        }
        let (i, p1) = current.point_at(s1);
        let (j, p2) = current.point_at(s2);
        pts = current.waypoints;
        if i >= j || !map.segment_free(p1, p2) {
            continue;
        }
        let mut next = Vec::with_capacity(pts.len());
        next.extend_from_slice(&pts[..=i]);
        if p1.distance(pts[i]) > EPS {
            next.push(p1);
        }
        if p2.distance(pts[j + 1]) > EPS {
            next.push(p2);
        }
        next.extend_from_slice(&pts[j + 1..]);
        // Floating point can make a "shortcut" fractionally longer.
        if polyline_length(&next) <= polyline_length(&pts) {
            pts = next;
        }
    }
    PlannedPath { waypoints: pts }
}

/// Constant-speed resampling of `path`, holding at the end once reached.
/// The position at `t_first` is the path start.
pub fn discretize(path: &PlannedPath, cfg: &RrtConfig, t_first: usize, t_last: usize) -> Trajectory {
    assert!(t_first <= t_last, "empty time range");
    let total = path.length();
    let positions = (0..=t_last - t_first)
        .map(|k| {
            let s = k as f64 * cfg.speed;
            if s >= total {
                path.end()
            } else {
                path.point_at(s).1
            }
        })
        .collect();
    Trajectory::new(t_first, positions)
}

/// RRT with the call-site fallback: retry once with twice the iteration
/// budget, then stand still at `start`.
pub fn plan_or_hold<R: Rng + ?Sized>(
    map: &WorldMap,
    start: Point2,
    goal: Point2,
    cfg: &RrtConfig,
    rng: &mut R,
) -> PlannedPath {
    match rrt_plan(map, start, goal, cfg, rng) {
        Ok(p) => p,
        Err(_) => {
            let doubled = RrtConfig {
                max_iterations: cfg.max_iterations * 2,
                ..cfg.clone()
            };
            rrt_plan(map, start, goal, &doubled, rng).unwrap_or_else(|e| {
                log::warn!(
                    "no path from ({:.2}, {:.2}) to ({:.2}, {:.2}): {e}; holding position",
                    start.x,
                    start.y,
                    goal.x,
                    goal.y
                );
                PlannedPath::stationary(start)
            })
        }
    }
}

/// One draw from the trajectory prior: plan, smooth and time-parameterize
/// so that the agent is at `start` at time `t_first`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    map: &WorldMap,
    start: Point2,
    goal: Point2,
    cfg: &RrtConfig,
    t_first: usize,
    t_last: usize,
    rng: &mut R,
) -> Trajectory {
    let raw = plan_or_hold(map, start, goal, cfg, rng);
    let smooth = shortcut_smooth(&raw, map, cfg, rng);
    discretize(&smooth, cfg, t_first, t_last)
}
