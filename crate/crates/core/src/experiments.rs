//! Ground-truth episodes (a hidden true runner against a planning chaser),
//! the four-cell detection experiment and the sample-budget study.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::isovist::{is_visible, time_visible, IsovistConfig};
use crate::models::{
    naive_chaser_query, runner_weight, AgentVariant, ChaserKind, PlanningConfig, RunnerKind,
};
use crate::resample::resampler;
use crate::rng::{derive_seed, stream, SimRng};
use crate::rrt::{sample_trajectory, Trajectory};
use crate::smc::{aggregate_restarts, episode_step, run_smc_episode, ParticleSet, RestartSummary, StepStats, WeightGrid};
use crate::world::WorldMap;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the chaser turns its particle set into an executed move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Move of a particle drawn proportionally to the step's weights.
    #[default]
    Sample,
    /// Move of the highest-weight particle.
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    #[serde(default)]
    pub execution: Execution,
    /// Detection uses a 360 degree cone (planning is unaffected).
    #[serde(default)]
    pub full_circle_detection: bool,
    /// Keep the per-step imagined runner clouds in the record.
    #[serde(default = "yes")]
    pub record_beliefs: bool,
}

fn yes() -> bool {
    true
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            execution: Execution::Sample,
            full_circle_detection: false,
            record_beliefs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub variant: AgentVariant,
    pub restarts: usize,
    pub planning: PlanningConfig,
    pub base_seed: u64,
    pub map_id: String,
    #[serde(default)]
    pub options: ScenarioOptions,
}

impl ScenarioConfig {
    pub fn validate(&self, map: &WorldMap) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        self.planning.validate(map)
    }

    /// Seed of restart `r`. Shared by every agent variant so that the
    /// cells of the detection table see the same random numbers.
    pub fn restart_seed(&self, r: usize) -> u64 {
        derive_seed(self.base_seed, "restart", &[r as u64])
    }
}

/// Imagined runner positions at one time step, `[x, y, w]` with weights
/// normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub t: usize,
    /// Where the chaser pointed its view cone.
    pub aim: Point2,
    pub samples: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub chaser_executed: Trajectory,
    pub runner_executed: Trajectory,
    pub runner_start: String,
    pub runner_goal: String,
    pub detected: bool,
    pub detection_time: Option<usize>,
    pub per_step_stats: Vec<StepStats>,
    pub belief_snapshots: Vec<BeliefSnapshot>,
}

impl EpisodeRecord {
    /// The self-consistency contract of a finished episode.
    pub fn is_consistent(&self, horizon: usize) -> bool {
        let end = self.detection_time.unwrap_or(horizon);
        self.detected == self.detection_time.is_some()
            && self.chaser_executed.t_first == 1
            && self.runner_executed.t_first == 1
            && self.chaser_executed.t_last() == end
            && self.runner_executed.t_last() == end
            && end <= horizon
    }
}

/// Hidden state of the true runner.
struct TrueRunner {
    start: String,
    goal: String,
    goal_at: Point2,
    executed: Trajectory,
    /// The committed plan of a naive runner.
    plan: Option<Trajectory>,
}

impl TrueRunner {
    fn new(map: &WorldMap, kind: RunnerKind, cfg: &PlanningConfig, rng: &mut SimRng) -> Self {
        let pick = |pinned: Option<&str>, rng: &mut SimRng| match pinned.and_then(|n| map.waypoint(n)) {
            Some(w) => w.clone(),
            None => map.sample_waypoint(rng).clone(),
        };
        let start = pick(cfg.conditioning.runner_start.as_deref(), rng);
        let goal = pick(cfg.conditioning.runner_goal.as_deref(), rng);
        let plan = match kind {
            RunnerKind::Naive => Some(sample_trajectory(
                map,
                start.location,
                goal.location,
                &cfg.rrt,
                1,
                cfg.horizon,
                rng,
            )),
            RunnerKind::Smarter => None,
        };
        Self {
            start: start.name,
            goal: goal.name,
            goal_at: goal.location,
            executed: Trajectory::hold(start.location, 1, 1),
            plan,
        }
    }

    /// Advances to time `t`. A smarter runner weighs `L` fresh plans
    /// against naive chasers continuing from the chaser's executed past.
    fn advance(&mut self, map: &WorldMap, chaser_past: &Trajectory, t: usize, cfg: &PlanningConfig, rng: &mut SimRng) {
        if let Some(plan) = &self.plan {
            self.executed.push(plan.at(t).expect("plan covers 1..=T"));
            return;
        }
        let here = self.executed.last();
        let chaser_here = chaser_past.last();
        let seeds: Vec<u64> = (0..cfg.runner_samples).map(|_| rng.gen()).collect();
        let candidates: Vec<(Point2, f64)> = seeds
            .par_iter()
            .map(|&seed| {
                let mut sub = SimRng::seed_from_u64(seed);
                let future = sample_trajectory(map, here, self.goal_at, &cfg.rrt, t - 1, cfg.horizon, &mut sub)
                    .slice(t, cfg.horizon)
                    .expect("planned through horizon");
                let chaser = naive_chaser_query(map, chaser_here, t, cfg, &mut sub);
                let seen = time_visible(&chaser.trajectory, &future, map, &cfg.isovist, t, cfg.horizon)
                    .expect("both cover t..=T")
                    .steps_visible;
                (future.positions[0], runner_weight(cfg.alpha, seen) * chaser.weight)
            })
            .collect();
        let weights: Vec<f64> = candidates.iter().map(|c| c.1).collect();
        let pick = categorical(&weights, rng);
        self.executed.push(candidates[pick].0);
    }
}

/// Index drawn proportionally to `weights`; uniform if they are all zero.
fn categorical(weights: &[f64], rng: &mut SimRng) -> usize {
    let multinomial = resampler("multinomial").expect("registered");
    match multinomial.ancestors(weights, 1, rng) {
        Ok(a) => a[0],
        Err(_) => rng.gen_range(0..weights.len()),
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Plays one episode from `seed`: the true runner moves, the chaser plans
/// and moves, then the chaser looks for the runner. Stops at the first
/// detection.
pub fn run_episode(map: &WorldMap, scenario: &ScenarioConfig, seed: u64) -> EpisodeRecord {
    let cfg = &scenario.planning;
    let t_max = cfg.horizon;
    let chaser_kind: ChaserKind = scenario.variant.chaser;
    let resampler = cfg.resampler();
    let detect_cfg = IsovistConfig {
        fov_half_angle: if scenario.options.full_circle_detection {
            std::f64::consts::PI
        } else {
            cfg.isovist.fov_half_angle
        },
        ..cfg.isovist.clone()
    };

    let mut runner = TrueRunner::new(map, scenario.variant.runner, cfg, &mut stream(seed, "runner-init", &[]));
    let mut chaser = Trajectory::hold(map.chaser_start(), 1, 1);
    let mut per_step_stats = Vec::new();
    let mut belief_snapshots = Vec::new();
    let mut detection_time = None;

    for t in 2..=t_max {
        runner.advance(map, &chaser, t, cfg, &mut stream(seed, "runner-step", &[t as u64]));

        let state = ParticleSet::replicate(&chaser, cfg.particles);
        let mut rng = stream(seed, "chaser-step", &[t as u64]);
        let out = episode_step(&state, map, cfg, &mut rng, chaser_kind, resampler);
        let weights: Vec<f64> = out.proposals.iter().map(|p| p.weight).collect();
        let chosen = match scenario.options.execution {
            Execution::Sample => categorical(&weights, &mut stream(seed, "execute", &[t as u64])),
            Execution::Argmax => argmax(&weights),
        };
        chaser = out.proposals[chosen].trajectory.clone();

        // Aim at the most plausible imagined runner of the best particle.
        let best = &out.proposals[argmax(&weights)];
        let summands: Vec<f64> = best.diagnostics.runners.iter().map(|d| d.summand()).collect();
        let aim = best.diagnostics.runners[argmax(&summands)]
            .runner
            .trajectory
            .at(t)
            .expect("imagined runner covers t");

        if scenario.options.record_beliefs {
            belief_snapshots.push(belief_snapshot(t, aim, &out.grid, &out.proposals));
        }
        per_step_stats.push(out.stats);

        let me = chaser.at(t).unwrap();
        let them = runner.executed.at(t).unwrap();
        // Both agents share the time-1 position check: a runner that starts
        // on top of the chaser is caught on the first step.
        let start_met = t == 2 && chaser.at(1).unwrap().distance(runner.executed.at(1).unwrap()) <= crate::geometry::EPS;
        if start_met || is_visible(map, me, them, aim, &detect_cfg) {
            detection_time = Some(t);
            break;
        }
    }

    EpisodeRecord {
        chaser_executed: chaser,
        runner_executed: runner.executed,
        runner_start: runner.start,
        runner_goal: runner.goal,
        detected: detection_time.is_some(),
        detection_time,
        per_step_stats,
        belief_snapshots,
    }
}

fn belief_snapshot(
    t: usize,
    aim: Point2,
    grid: &WeightGrid,
    proposals: &[crate::models::WeightedTrajectory<crate::models::ChaserDiagnostics>],
) -> BeliefSnapshot {
    let summands: Vec<f64> = grid
        .chaser_factors
        .iter()
        .zip(&grid.runner_weights)
        .map(|(c, r)| c * r)
        .collect();
    let total: f64 = summands.iter().sum();
    let n = summands.len().max(1) as f64;
    let positions = proposals
        .iter()
        .flat_map(|p| p.diagnostics.runners.iter().map(move |d| d.runner.trajectory.at(t).unwrap()));
    let samples = positions
        .zip(&summands)
        .map(|(p, &w)| [p.x, p.y, if total > 0.0 { w / total } else { 1.0 / n }])
        .collect();
    BeliefSnapshot { t, aim, samples }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub chaser_kind: ChaserKind,
    pub runner_kind: RunnerKind,
    pub restarts: usize,
    pub detections: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTable {
    pub rows: Vec<DetectionRow>,
}

impl DetectionTable {
    /// Tallies detections per agent variant, in table order.
    pub fn from_episodes(episodes: &[DetectionEpisode]) -> Self {
        let rows = AgentVariant::grid()
            .into_iter()
            .filter_map(|v| {
                let cell: Vec<_> = episodes.iter().filter(|e| e.variant == v).collect();
                if cell.is_empty() {
                    return None;
                }
                let detections = cell.iter().filter(|e| e.record.detected).count();
                Some(DetectionRow {
                    chaser_kind: v.chaser,
                    runner_kind: v.runner,
                    restarts: cell.len(),
                    detections,
                    rate: detections as f64 / cell.len() as f64,
                })
            })
            .collect();
        Self { rows }
    }

    pub fn rate(&self, variant: AgentVariant) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.chaser_kind == variant.chaser && r.runner_kind == variant.runner)
            .map(|r| r.rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEpisode {
    pub variant: AgentVariant,
    pub restart: usize,
    pub seed: u64,
    pub record: EpisodeRecord,
}

#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub table: DetectionTable,
    pub episodes: Vec<DetectionEpisode>,
}

/// Runs `template.restarts` episodes for each of the four agent variants.
/// Restart `r` uses the same seed in every cell.
pub fn detection_experiment(map: &WorldMap, template: &ScenarioConfig) -> DetectionResult {
    let jobs: Vec<(AgentVariant, usize)> = AgentVariant::grid()
        .into_iter()
        .flat_map(|v| (0..template.restarts).map(move |r| (v, r)))
        .collect();
    let episodes: Vec<DetectionEpisode> = jobs
        .par_iter()
        .map(|&(variant, restart)| {
            let scenario = ScenarioConfig {
                variant,
                ..template.clone()
            };
            let seed = scenario.restart_seed(restart);
            let record = run_episode(map, &scenario, seed);
            log::info!(
                "{variant:?} restart {restart}: {}",
                record.detection_time.map_or("not detected".to_string(), |t| format!("detected at t = {t}"))
            );
            DetectionEpisode {
                variant,
                restart,
                seed,
                record,
            }
        })
        .collect();
    DetectionResult {
        table: DetectionTable::from_episodes(&episodes),
        episodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRunConfig {
    pub total_budget: usize,
    /// `(K, L)` pairs with `K * L = total_budget`.
    pub pairs: Vec<(usize, usize)>,
    pub restarts: usize,
    pub horizon: usize,
    #[serde(default)]
    pub chaser: Option<ChaserKind>,
}

impl BudgetRunConfig {
    /// The seven pairs splitting a budget of 2048.
    pub fn default_pairs() -> Vec<(usize, usize)> {
        vec![(2048, 1), (512, 4), (128, 16), (64, 32), (32, 64), (16, 128), (4, 512)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.horizon < 2 || self.pairs.is_empty() {
            return Err(Error::Config(
                "budget runs need restarts >= 1, horizon >= 2 and at least one pair".into(),
            ));
        }
        if let Some(&(k, l)) = self.pairs.iter().find(|(k, l)| k * l != self.total_budget || *k == 0) {
            return Err(Error::Config(format!(
                "pair {k}x{l} does not multiply to the budget {}",
                self.total_budget
            )));
        }
        Ok(())
    }
}

/// One planning episode of the budget study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSeries {
    #[serde(rename = "K")]
    pub particles: usize,
    #[serde(rename = "L")]
    pub runner_samples: usize,
    pub restart: usize,
    pub stats: Vec<StepStats>,
    pub grids: Vec<WeightGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPairSummary {
    #[serde(rename = "K")]
    pub particles: usize,
    #[serde(rename = "L")]
    pub runner_samples: usize,
    pub per_step: Vec<RestartSummary>,
}

#[derive(Debug, Clone)]
pub struct BudgetResult {
    pub series: Vec<BudgetSeries>,
    pub summaries: Vec<BudgetPairSummary>,
}

/// Runs `restarts` chaser planning episodes for every `(K, L)` pair. The
/// chaser defaults to the smartest model.
pub fn budget_experiment(map: &WorldMap, run: &BudgetRunConfig, planning: &PlanningConfig, base_seed: u64) -> Result<BudgetResult> {
    run.validate()?;
    let chaser = run.chaser.unwrap_or(ChaserKind::Smartest);
    let jobs: Vec<(usize, usize, usize)> = run
        .pairs
        .iter()
        .flat_map(|&(k, l)| (0..run.restarts).map(move |r| (k, l, r)))
        .collect();
    let series: Vec<BudgetSeries> = jobs
        .par_iter()
        .map(|&(k, l, restart)| {
            let cfg = PlanningConfig {
                horizon: run.horizon,
                ..planning.clone()
            }
            .with_budget(k, l);
            let seed = derive_seed(base_seed, "budget", &[k as u64, l as u64, restart as u64]);
            let ep = run_smc_episode(map, &cfg, chaser, seed);
            log::info!("budget {k}x{l} restart {restart} done");
            BudgetSeries {
                particles: k,
                runner_samples: l,
                restart,
                stats: ep.stats,
                grids: ep.grids,
            }
        })
        .collect();
    let summaries = summarize_budget(&series);
    Ok(BudgetResult { series, summaries })
}

/// Restart means per pair and step, pairs in first-seen order.
pub fn summarize_budget(series: &[BudgetSeries]) -> Vec<BudgetPairSummary> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for s in series {
        if !pairs.contains(&(s.particles, s.runner_samples)) {
            pairs.push((s.particles, s.runner_samples));
        }
    }
    pairs
        .into_iter()
        .map(|(k, l)| {
            let runs: Vec<&BudgetSeries> = series
                .iter()
                .filter(|s| s.particles == k && s.runner_samples == l)
                .collect();
            let steps = runs.iter().map(|s| s.stats.len()).min().unwrap_or(0);
            let per_step = (0..steps)
                .map(|i| aggregate_restarts(&runs.iter().map(|s| s.stats[i].clone()).collect::<Vec<_>>()))
                .collect();
            BudgetPairSummary {
                particles: k,
                runner_samples: l,
                per_step,
            }
        })
        .collect()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{bundled, load_map};

    fn scenario(map: &WorldMap, variant: AgentVariant, horizon: usize, k: usize, l: usize) -> ScenarioConfig {
        ScenarioConfig {
            variant,
            restarts: 2,
            planning: PlanningConfig::for_map(map, horizon).with_budget(k, l),
            base_seed: 3,
            map_id: "test".into(),
            options: ScenarioOptions::default(),
        }
    }

    #[test]
    fn episode_is_consistent_and_replayable() {
        let map = bundled("bremen_like").unwrap();
        for variant in AgentVariant::grid() {
            let sc = scenario(&map, variant, 8, 4, 2);
            let rec = run_episode(&map, &sc, 11);
            assert!(rec.is_consistent(8), "{rec:?}");
            assert_eq!(rec, run_episode(&map, &sc, 11));
            assert_eq!(rec.per_step_stats.len(), rec.chaser_executed.t_last() - 1);
            let speed = sc.planning.rrt.speed;
            assert!(rec.chaser_executed.max_step() <= speed + 1e-9);
            assert!(rec.runner_executed.max_step() <= speed + 1e-9);
            for p in rec.chaser_executed.positions.iter().chain(&rec.runner_executed.positions) {
                assert!(map.is_free(*p));
            }
            for snap in &rec.belief_snapshots {
                let total: f64 = snap.samples.iter().map(|s| s[2]).sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert_eq!(snap.samples.len(), 8);
            }
        }
    }

    #[test]
    fn detection_flag_matches_replay() {
        // Whole-map range and a full circle: detection reduces to the
        // first step with a free line of sight.
        let map = bundled("single_wall").unwrap();
        for seed in 0..6 {
            let mut sc = scenario(&map, AgentVariant::new(ChaserKind::Smart, RunnerKind::Naive), 10, 3, 2);
            sc.planning.alpha = 0.0;
            sc.planning.isovist.sight_range = 2.0 * map.diagonal();
            sc.options.full_circle_detection = true;
            let rec = run_episode(&map, &sc, seed);
            let replay = (2..=rec.chaser_executed.t_last()).find(|&t| {
                let (a, b) = (rec.chaser_executed.at(t).unwrap(), rec.runner_executed.at(t).unwrap());
                map.segment_free(a, b) || a.distance(b) <= 1e-9
            });
            assert_eq!(rec.detection_time, replay, "seed {seed}");
        }
    }

    #[test]
    fn co_located_start_is_detected_immediately() {
        let doc = r#"{"bounds":{"min":[0,0],"max":[20,20]},
            "obstacles":[[[9,4],[11,4],[11,20],[9,20]]],
            "waypoints":[{"name":"home","pos":[2,2]},{"name":"far","pos":[18,18]}],
            "chaser_start":[2,2]}"#;
        let map = load_map(doc.as_bytes()).unwrap();
        let mut sc = scenario(&map, AgentVariant::new(ChaserKind::Smart, RunnerKind::Smarter), 6, 3, 2);
        sc.planning.conditioning.runner_start = Some("home".into());
        sc.planning.isovist.sight_range = 0.01;
        for seed in 0..3 {
            let rec = run_episode(&map, &sc, seed);
            assert_eq!(rec.detection_time, Some(2));
            assert!(rec.is_consistent(6));
        }
    }

    #[test]
    fn argmax_execution_and_thread_independence() {
        let map = bundled("bremen_like").unwrap();
        let mut sc = scenario(&map, AgentVariant::new(ChaserKind::Smartest, RunnerKind::Smarter), 6, 4, 3);
        sc.options.execution = Execution::Argmax;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_episode(&map, &sc, 5))
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn table_tallies_and_zero_rate() {
        let map = bundled("bremen_like").unwrap();
        let mut sc = scenario(&map, AgentVariant::new(ChaserKind::Smart, RunnerKind::Naive), 5, 2, 2);
        sc.options.record_beliefs = false;
        let result = detection_experiment(&map, &sc);
        assert_eq!(result.table.rows.len(), 4);
        assert_eq!(result.episodes.len(), 8);
        for row in &result.table.rows {
            assert_eq!(row.restarts, 2);
            assert_eq!(row.rate, row.detections as f64 / 2.0);
        }
        assert_eq!(DetectionTable::from_episodes(&result.episodes), result.table);
        // Identical seeds across cells.
        assert_eq!(result.episodes[0].seed, result.episodes[2].seed);

        let mut blind = result.episodes.clone();
        for e in &mut blind {
            e.record.detected = false;
            e.record.detection_time = None;
        }
        assert!(DetectionTable::from_episodes(&blind).rows.iter().all(|r| r.rate == 0.0));
    }

    #[test]
    fn budget_shapes_and_alpha_zero() {
        let map = bundled("corridor").unwrap();
        let run = BudgetRunConfig {
            total_budget: 8,
            pairs: vec![(8, 1), (2, 4)],
            restarts: 2,
            horizon: 5,
            chaser: None,
        };
        let planning = PlanningConfig {
            alpha: 0.0,
            ..PlanningConfig::for_map(&map, 5)
        };
        let res = budget_experiment(&map, &run, &planning, 1).unwrap();
        assert_eq!(res.series.len(), 4);
        for s in &res.series {
            assert_eq!(s.stats.len(), 4);
            for st in &s.stats {
                assert_eq!((st.log_z_chaser, st.log_z_runner, st.ess_fraction), (0.0, 0.0, 1.0));
            }
        }
        assert_eq!(res.summaries.len(), 2);
        assert_eq!(res.summaries[1].per_step[0].restarts, 2);

        let bad = BudgetRunConfig {
            pairs: vec![(3, 2)],
            ..run
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[10.0, 20.0, 30.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0, 1.0, 1.0, 1.0]), None);
        // Ties take average ranks: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
        let r = spearman(&x, &[1.0, 5.0, 5.0, 9.0]).unwrap();
        assert!((r - 4.5 / 22.5_f64.sqrt()).abs() < 1e-12);
    }
}
