//! The nested chaser/runner queries.
//!
//! Three levels, each returning a weighted trajectory:
//!
//! * the naive chaser plans to a random waypoint and is never conditioned;
//! * the runner plans between random waypoints and is down-weighted by
//!   `exp(-alpha * steps_seen)`, where visibility is checked against the
//!   chaser's known past plus one imagined naive-chaser future;
//! * the chaser proposes a future, imagines `L` runners and weights itself
//!   by the average of `exp(alpha * steps_seen) * runner_weight`.
//!
//! Runner behaviour is pluggable through [`RunnerModel`]; the chaser's
//! sophistication is simply which runner model it imagines.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::isovist::{time_visible, IsovistConfig};
use crate::resample::{self, Resampler};
use crate::rng::SimRng;
use crate::rrt::{sample_trajectory, RrtConfig, Trajectory};
use crate::world::{Waypoint, WorldMap};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Pins otherwise-uniform waypoint draws to named waypoints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conditioning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runner_start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runner_goal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chaser_goal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningConfig {
    pub alpha: f64,
    pub horizon: usize,
    /// Chaser particles per step.
    #[serde(rename = "K")]
    pub particles: usize,
    /// Imagined runners per chaser particle.
    #[serde(rename = "L")]
    pub runner_samples: usize,
    pub isovist: IsovistConfig,
    pub rrt: RrtConfig,
    /// Registered resampler name.
    #[serde(default = "default_resampler")]
    pub resampler: String,
    #[serde(default)]
    pub conditioning: Conditioning,
}

fn default_resampler() -> String {
    "multinomial".to_string()
}

impl PlanningConfig {
    /// Map-scaled defaults with `alpha = 1` and `(K, L) = (128, 16)`.
    pub fn for_map(map: &WorldMap, horizon: usize) -> Self {
        Self {
            alpha: 1.0,
            horizon,
            particles: 128,
            runner_samples: 16,
            isovist: IsovistConfig::for_map(map),
            rrt: RrtConfig::for_map(map, horizon),
            resampler: default_resampler(),
            conditioning: Conditioning::default(),
        }
    }

    pub fn with_budget(mut self, particles: usize, runner_samples: usize) -> Self {
        self.particles = particles;
        self.runner_samples = runner_samples;
        self
    }

    pub fn validate(&self, map: &WorldMap) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::Config(format!("alpha must be finite and nonnegative, got {}", self.alpha)));
        }
        if self.horizon < 2 {
            return Err(Error::Config("horizon must be at least 2".into()));
        }
        if self.particles == 0 || self.runner_samples == 0 {
            return Err(Error::Config("K and L must be positive".into()));
        }
        self.isovist.validate()?;
        self.rrt.validate()?;
        resample::resampler(&self.resampler)?;
        let c = &self.conditioning;
        for name in [&c.runner_start, &c.runner_goal, &c.chaser_goal].into_iter().flatten() {
            if map.waypoint(name).is_none() {
                return Err(Error::Config(format!("conditioning names unknown waypoint `{name}`")));
            }
        }
        Ok(())
    }

    pub fn resampler(&self) -> &'static dyn Resampler {
        resample::resampler(&self.resampler).expect("validated resampler name")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChaserKind {
    /// Imagines naive runners.
    Smart,
    /// Imagines runners that themselves imagine a naive chaser.
    Smartest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunnerKind {
    Naive,
    Smarter,
}

impl ChaserKind {
    pub const ALL: [ChaserKind; 2] = [ChaserKind::Smart, ChaserKind::Smartest];

    /// The runner model this chaser imagines.
    pub fn imagined_runner(self) -> RunnerKind {
        match self {
            ChaserKind::Smart => RunnerKind::Naive,
            ChaserKind::Smartest => RunnerKind::Smarter,
        }
    }
}

impl RunnerKind {
    pub const ALL: [RunnerKind; 2] = [RunnerKind::Naive, RunnerKind::Smarter];

    pub fn model(self) -> &'static dyn RunnerModel {
        match self {
            RunnerKind::Naive => &NaiveRunner,
            RunnerKind::Smarter => &SmarterRunner,
        }
    }
}

impl fmt::Display for ChaserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChaserKind::Smart => "smart",
            ChaserKind::Smartest => "smartest",
        })
    }
}

impl fmt::Display for RunnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.model().name())
    }
}

impl FromStr for ChaserKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smart" => Ok(ChaserKind::Smart),
            "smartest" => Ok(ChaserKind::Smartest),
            other => Err(Error::UnknownStrategy {
                kind: "chaser model",
                name: other.to_string(),
                available: "smart, smartest".into(),
            }),
        }
    }
}

impl FromStr for RunnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match runner_model(s)?.name() {
            "naive" => RunnerKind::Naive,
            _ => RunnerKind::Smarter,
        })
    }
}

/// One cell of the chaser-by-runner scenario grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentVariant {
    pub chaser: ChaserKind,
    pub runner: RunnerKind,
}

impl AgentVariant {
    pub const fn new(chaser: ChaserKind, runner: RunnerKind) -> Self {
        Self { chaser, runner }
    }

    /// The four cells in table order.
    pub fn grid() -> [AgentVariant; 4] {
        [
            AgentVariant::new(ChaserKind::Smart, RunnerKind::Naive),
            AgentVariant::new(ChaserKind::Smart, RunnerKind::Smarter),
            AgentVariant::new(ChaserKind::Smartest, RunnerKind::Naive),
            AgentVariant::new(ChaserKind::Smartest, RunnerKind::Smarter),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedTrajectory<D> {
    pub trajectory: Trajectory,
    pub weight: f64,
    pub diagnostics: D,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveChaserDiagnostics {
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunnerDiagnostics {
    pub start: String,
    pub goal: String,
    /// The runner's whole path over `1..=T`.
    pub full_path: Trajectory,
    /// Imagined chaser future; absent for the naive runner.
    pub imagined_chaser: Option<Trajectory>,
    pub imagined_chaser_weight: f64,
    pub steps_visible: usize,
}

/// One imagined runner inside a chaser query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunnerDraw {
    pub runner: WeightedTrajectory<RunnerDiagnostics>,
    pub chaser_steps_visible: usize,
    /// `exp(alpha * chaser_steps_visible)`.
    pub chaser_factor: f64,
}

impl RunnerDraw {
    pub fn summand(&self) -> f64 {
        self.chaser_factor * self.runner.weight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaserDiagnostics {
    pub goal: String,
    /// Candidate future over `t..=T`; only its first step is kept.
    pub future: Trajectory,
    pub runners: Vec<RunnerDraw>,
}

/// `exp(-alpha * steps)`.
pub fn runner_weight(alpha: f64, steps_visible: usize) -> f64 {
    (-alpha * steps_visible as f64).exp()
}

/// `exp(alpha * steps)`.
pub fn chaser_factor(alpha: f64, steps_visible: usize) -> f64 {
    (alpha * steps_visible as f64).exp()
}

fn draw_waypoint<'a, R: Rng + ?Sized>(map: &'a WorldMap, pinned: Option<&str>, rng: &mut R) -> &'a Waypoint {
    match pinned.and_then(|name| map.waypoint(name)) {
        Some(w) => w,
        None => map.sample_waypoint(rng),
    }
}

fn check_step(t: usize, cfg: &PlanningConfig) {
    assert!(t >= 2 && t <= cfg.horizon, "time step {t} outside 2..={}", cfg.horizon);
}

/// Innermost query: goal uniform over waypoints, future over `t..=T`
/// planned from `prev` (the position at `t - 1`), weight 1.
pub fn naive_chaser_query<R: Rng + ?Sized>(
    map: &WorldMap,
    prev: Point2,
    t: usize,
    cfg: &PlanningConfig,
    rng: &mut R,
) -> WeightedTrajectory<NaiveChaserDiagnostics> {
    check_step(t, cfg);
    let goal = draw_waypoint(map, cfg.conditioning.chaser_goal.as_deref(), rng);
    let path = sample_trajectory(map, prev, goal.location, &cfg.rrt, t - 1, cfg.horizon, rng);
    WeightedTrajectory {
        trajectory: path.slice(t, cfg.horizon).expect("planned through horizon"),
        weight: 1.0,
        diagnostics: NaiveChaserDiagnostics { goal: goal.name.clone() },
    }
}

/// A way of imagining the runner. Implementations are registered by name
/// in [`runner_model`].
pub trait RunnerModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// One weighted runner future over `t..=T`, given the chaser's known
    /// past over `1..t`.
    fn sample(
        &self,
        map: &WorldMap,
        chaser_past: &Trajectory,
        t: usize,
        cfg: &PlanningConfig,
        rng: &mut SimRng,
    ) -> WeightedTrajectory<RunnerDiagnostics>;
}

/// Plans between two random waypoints; unconditioned.
pub struct NaiveRunner;

/// Plans between two random waypoints and avoids an imagined naive chaser.
pub struct SmarterRunner;

fn runner_path(map: &WorldMap, cfg: &PlanningConfig, rng: &mut SimRng) -> (String, String, Trajectory) {
    let start = draw_waypoint(map, cfg.conditioning.runner_start.as_deref(), rng);
    let goal = draw_waypoint(map, cfg.conditioning.runner_goal.as_deref(), rng);
    let path = sample_trajectory(map, start.location, goal.location, &cfg.rrt, 1, cfg.horizon, rng);
    (start.name.clone(), goal.name.clone(), path)
}

impl RunnerModel for NaiveRunner {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn sample(
        &self,
        map: &WorldMap,
        _chaser_past: &Trajectory,
        t: usize,
        cfg: &PlanningConfig,
        rng: &mut SimRng,
    ) -> WeightedTrajectory<RunnerDiagnostics> {
        check_step(t, cfg);
        let (start, goal, full_path) = runner_path(map, cfg, rng);
        WeightedTrajectory {
            trajectory: full_path.slice(t, cfg.horizon).expect("planned through horizon"),
            weight: 1.0,
            diagnostics: RunnerDiagnostics {
                start,
                goal,
                full_path,
                imagined_chaser: None,
                imagined_chaser_weight: 1.0,
                steps_visible: 0,
            },
        }
    }
}

impl RunnerModel for SmarterRunner {
    fn name(&self) -> &'static str {
        "smarter"
    }

    fn sample(
        &self,
        map: &WorldMap,
        chaser_past: &Trajectory,
        t: usize,
        cfg: &PlanningConfig,
        rng: &mut SimRng,
    ) -> WeightedTrajectory<RunnerDiagnostics> {
        check_step(t, cfg);
        let known = chaser_past.slice(1, t - 1).expect("chaser past covers 1..t");
        let (start, goal, full_path) = runner_path(map, cfg, rng);
        let imagined = naive_chaser_query(map, known.last(), t, cfg, rng);
        let observer = known.concat(&imagined.trajectory).expect("contiguous");
        let seen = time_visible(&observer, &full_path, map, &cfg.isovist, 1, cfg.horizon)
            .expect("both cover 1..=T")
            .steps_visible;
        WeightedTrajectory {
            trajectory: full_path.slice(t, cfg.horizon).expect("planned through horizon"),
            weight: runner_weight(cfg.alpha, seen) * imagined.weight,
            diagnostics: RunnerDiagnostics {
                start,
                goal,
                full_path,
                imagined_chaser: Some(imagined.trajectory),
                imagined_chaser_weight: imagined.weight,
                steps_visible: seen,
            },
        }
    }
}

static RUNNER_MODELS: &[&dyn RunnerModel] = &[&NaiveRunner, &SmarterRunner];

/// Looks up a registered runner model by name.
pub fn runner_model(name: &str) -> Result<&'static dyn RunnerModel> {
    RUNNER_MODELS
        .iter()
        .copied()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "runner model",
            name: name.to_string(),
            available: RUNNER_MODELS.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
        })
}

/// Middle query.
pub fn runner_query(
    map: &WorldMap,
    chaser_past: &Trajectory,
    t: usize,
    cfg: &PlanningConfig,
    rng: &mut SimRng,
    kind: RunnerKind,
) -> WeightedTrajectory<RunnerDiagnostics> {
    kind.model().sample(map, chaser_past, t, cfg, rng)
}

/// Scores a fixed chaser future against `L` imagined runners. Returns the
/// average weight and the individual draws (in index order).
pub fn score_chaser_future(
    map: &WorldMap,
    chaser_past: &Trajectory,
    future: &Trajectory,
    t: usize,
    cfg: &PlanningConfig,
    rng: &mut SimRng,
    kind: RunnerKind,
) -> (f64, Vec<RunnerDraw>) {
    let seeds: Vec<u64> = (0..cfg.runner_samples).map(|_| rng.gen()).collect();
    let draws: Vec<RunnerDraw> = seeds
        .par_iter()
        .map(|&seed| {
            let mut sub = SimRng::seed_from_u64(seed);
            let runner = runner_query(map, chaser_past, t, cfg, &mut sub, kind);
            let seen = time_visible(future, &runner.trajectory, map, &cfg.isovist, t, cfg.horizon)
                .expect("both cover t..=T")
                .steps_visible;
            RunnerDraw {
                runner,
                chaser_steps_visible: seen,
                chaser_factor: chaser_factor(cfg.alpha, seen),
            }
        })
        .collect();
    let total: f64 = draws.iter().map(RunnerDraw::summand).sum();
    (total / draws.len() as f64, draws)
}

/// Outer query: proposes a future from the chaser's position at `t - 1`,
/// weights it by nested runner simulation and returns the past extended
/// by one step.
pub fn chaser_query(
    map: &WorldMap,
    chaser_past: &Trajectory,
    t: usize,
    cfg: &PlanningConfig,
    rng: &mut SimRng,
    kind: RunnerKind,
) -> WeightedTrajectory<ChaserDiagnostics> {
    check_step(t, cfg);
    let known = chaser_past.slice(1, t - 1).expect("chaser past covers 1..t");
    let goal = draw_waypoint(map, cfg.conditioning.chaser_goal.as_deref(), rng);
    let future = sample_trajectory(map, known.last(), goal.location, &cfg.rrt, t - 1, cfg.horizon, rng)
        .slice(t, cfg.horizon)
        .expect("planned through horizon");
    let (weight, runners) = score_chaser_future(map, &known, &future, t, cfg, rng, kind);
    let mut trajectory = known;
    trajectory.push(future.positions[0]);
    WeightedTrajectory {
        trajectory,
        weight,
        diagnostics: ChaserDiagnostics {
            goal: goal.name.clone(),
            future,
            runners,
        },
    }
}
