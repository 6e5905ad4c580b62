//! Episode-level sequential Monte Carlo over chaser particles.
//!
//! Each step extends every particle through the chaser query, records
//! diagnostics on the raw weights, and then resamples unconditionally. After
//! resampling every particle carries the mean of the pre-resampling weights.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::models::{chaser_query, ChaserDiagnostics, ChaserKind, PlanningConfig, WeightedTrajectory};
use crate::resample::{ess, Resampler};
use crate::rng::{stream, SimRng};
use crate::rrt::Trajectory;
use crate::world::WorldMap;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Particle {
    pub trajectory: Trajectory,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Last time index covered by every particle.
    pub t: usize,
    /// Ancestor indices chosen at each completed step.
    pub ancestor_history: Vec<Vec<usize>>,
}

impl ParticleSet {
    /// `k` copies of the chaser at `start` at time 1.
    pub fn at_start(start: Point2, k: usize) -> Self {
        Self::replicate(&Trajectory::hold(start, 1, 1), k)
    }

    /// `k` copies of a shared prefix.
    pub fn replicate(prefix: &Trajectory, k: usize) -> Self {
        assert_eq!(prefix.t_first, 1, "particle prefixes start at time 1");
        Self {
            particles: vec![
                Particle {
                    trajectory: prefix.clone(),
                    weight: 1.0,
                };
                k
            ],
            t: prefix.t_last(),
            ancestor_history: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }
}

/// The `K x L` raw weight grid of one step, row-major by particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    #[serde(rename = "K")]
    pub particles: usize,
    #[serde(rename = "L")]
    pub runner_samples: usize,
    /// `exp(alpha * chaser steps visible)` per (k, l).
    pub chaser_factors: Vec<f64>,
    /// Runner weights per (k, l).
    pub runner_weights: Vec<f64>,
}

impl WeightGrid {
    pub fn from_proposals(proposals: &[WeightedTrajectory<ChaserDiagnostics>]) -> Self {
        let k = proposals.len();
        let l = proposals.first().map_or(0, |p| p.diagnostics.runners.len());
        let mut chaser_factors = Vec::with_capacity(k * l);
        let mut runner_weights = Vec::with_capacity(k * l);
        for p in proposals {
            for d in &p.diagnostics.runners {
                chaser_factors.push(d.chaser_factor);
                runner_weights.push(d.runner.weight);
            }
        }
        Self {
            particles: k,
            runner_samples: l,
            chaser_factors,
            runner_weights,
        }
    }

    /// Per-particle chaser weights `(1/L) sum_l w^c w^r`.
    pub fn particle_weights(&self) -> Vec<f64> {
        let l = self.runner_samples;
        (0..self.particles)
            .map(|k| {
                let row = k * l..(k + 1) * l;
                let s: f64 = self.chaser_factors[row.clone()]
                    .iter()
                    .zip(&self.runner_weights[row])
                    .map(|(c, r)| c * r)
                    .sum();
                s / l as f64
            })
            .collect()
    }
}

/// Five-number summary used for box plots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "quantiles of empty data");
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            min: s[0],
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
        }
    }
}

/// Estimator diagnostics for one step, on pre-resampling weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub t: usize,
    /// `log((1/K) sum_k (1/L) sum_l w^c w^r)`.
    pub log_z_chaser: f64,
    /// `log((1/KL) sum_{k,l} w^r)`.
    pub log_z_runner: f64,
    /// ESS of the `K` particle weights.
    pub ess: f64,
    /// `ess / K`.
    pub ess_fraction: f64,
    /// Quantiles of the log particle weights.
    pub log_weight_quantiles: Quantiles,
}

/// Statistics of one weight grid.
pub fn budget_stats(t: usize, grid: &WeightGrid) -> Result<StepStats> {
    let weights = grid.particle_weights();
    let k = weights.len() as f64;
    let mean_chaser = weights.iter().sum::<f64>() / k;
    let mean_runner = grid.runner_weights.iter().sum::<f64>() / grid.runner_weights.len() as f64;
    let e = ess(&weights)?;
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    Ok(StepStats {
        t,
        log_z_chaser: mean_chaser.ln(),
        log_z_runner: mean_runner.ln(),
        ess: e,
        ess_fraction: e / k,
        log_weight_quantiles: Quantiles::of(&logs),
    })
}

/// Averages of per-restart statistics at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub t: usize,
    pub restarts: usize,
    pub log_z_chaser: f64,
    pub log_z_runner: f64,
    pub ess_fraction: f64,
}

/// Mean over restarts of the per-restart statistics (all for the same `t`).
pub fn aggregate_restarts(per_restart: &[StepStats]) -> RestartSummary {
    let n = per_restart.len() as f64;
    let mean = |f: fn(&StepStats) -> f64| per_restart.iter().map(f).sum::<f64>() / n;
    RestartSummary {
        t: per_restart.first().map_or(0, |s| s.t),
        restarts: per_restart.len(),
        log_z_chaser: mean(|s| s.log_z_chaser),
        log_z_runner: mean(|s| s.log_z_runner),
        ess_fraction: mean(|s| s.ess_fraction),
    }
}

/// Everything produced by one SMC step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: ParticleSet,
    pub stats: StepStats,
    pub grid: WeightGrid,
    /// The weighted chaser proposals before resampling.
    pub proposals: Vec<WeightedTrajectory<ChaserDiagnostics>>,
    pub ancestors: Vec<usize>,
    /// Set when every weight was zero and ancestry fell back to uniform.
    pub degenerate: bool,
}

/// Advances the particle set from `t - 1` to `t`.
///
/// Particle `k` draws from its own stream derived from one value taken
/// from `rng`, so results do not depend on the thread count.
pub fn episode_step(
    state: &ParticleSet,
    map: &WorldMap,
    cfg: &PlanningConfig,
    rng: &mut SimRng,
    chaser: ChaserKind,
    resampler: &dyn Resampler,
) -> StepOutcome {
    let t = state.t + 1;
    assert!(t <= cfg.horizon, "episode already at the horizon");
    let step_seed: u64 = rng.gen();
    let kind = chaser.imagined_runner();
    let proposals: Vec<_> = state
        .particles
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut sub = stream(step_seed, "particle", &[k as u64]);
            chaser_query(map, &p.trajectory, t, cfg, &mut sub, kind)
        })
        .collect();

    let grid = WeightGrid::from_proposals(&proposals);
    let weights: Vec<f64> = proposals.iter().map(|p| p.weight).collect();
    let n = weights.len();

    let (ancestors, degenerate) = match resampler.ancestors(&weights, n, rng) {
        Ok(a) => (a, false),
        Err(Error::AllZeroWeights) => {
            log::warn!("all {n} chaser weights are zero at t = {t}; resampling uniformly");
            let uniform = vec![1.0; n];
            (resampler.ancestors(&uniform, n, rng).expect("uniform weights"), true)
        }
        Err(e) => panic!("resampling failed: {e}"),
    };

    let stats = if degenerate {
        let logs = vec![f64::NEG_INFINITY; n];
        StepStats {
            t,
            log_z_chaser: f64::NEG_INFINITY,
            log_z_runner: (grid.runner_weights.iter().sum::<f64>() / grid.runner_weights.len() as f64).ln(),
            ess: 0.0,
            ess_fraction: 0.0,
            log_weight_quantiles: Quantiles::of(&logs),
        }
    } else {
        budget_stats(t, &grid).expect("some weight is positive")
    };

    let mean = weights.iter().sum::<f64>() / n as f64;
    let particles = ancestors
        .iter()
        .map(|&a| Particle {
            trajectory: proposals[a].trajectory.clone(),
            weight: mean,
        })
        .collect();
    let mut ancestor_history = state.ancestor_history.clone();
    ancestor_history.push(ancestors.clone());

    StepOutcome {
        state: ParticleSet {
            particles,
            t,
            ancestor_history,
        },
        stats,
        grid,
        proposals,
        ancestors,
        degenerate,
    }
}

/// A complete planning episode without a ground-truth runner.
#[derive(Debug, Clone, Serialize)]
pub struct SmcEpisode {
    pub final_state: ParticleSet,
    pub stats: Vec<StepStats>,
    pub grids: Vec<WeightGrid>,
}

/// Runs the particle filter from the map's chaser start through the
/// horizon.
pub fn run_smc_episode(map: &WorldMap, cfg: &PlanningConfig, chaser: ChaserKind, seed: u64) -> SmcEpisode {
    let mut state = ParticleSet::at_start(map.chaser_start(), cfg.particles);
    let mut rng = stream(seed, "smc-episode", &[]);
    let mut stats = Vec::new();
    let mut grids = Vec::new();
    for _ in 2..=cfg.horizon {
        let out = episode_step(&state, map, cfg, &mut rng, chaser, cfg.resampler());
        stats.push(out.stats);
        grids.push(out.grid);
        state = out.state;
    }
    SmcEpisode {
        final_state: state,
        stats,
        grids,
    }
}
