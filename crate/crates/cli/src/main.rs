mod config;
mod output;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{parse_kl, parse_point, MapSource, RunConfig};
use output::{Manifest, OutputDir};
use pursuit_core::experiments::{
    budget_experiment, detection_experiment, run_episode, BudgetRunConfig, DetectionEpisode, DetectionTable,
};
use pursuit_core::geometry::Point2;
use pursuit_core::isovist::isovist;
use pursuit_core::models::{naive_chaser_query, AgentVariant, ChaserKind, RunnerKind};
use pursuit_core::render::{render_svg, trajectory_points, Layer, RenderInputs, RenderSpec};
use pursuit_core::rng::{derive_seed, stream};
use pursuit_core::rrt::{plan_or_hold, rrt_plan, shortcut_smooth};
use pursuit_core::WorldMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "pursuit", version, about = "Chaser/runner pursuit simulations with nested planning-as-inference")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Map JSON file or the name of a bundled map.
    #[arg(long, global = true, default_value = "bremen_like")]
    map: String,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads. Affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Dotted configuration override, e.g. `planning.alpha=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play one episode against a hidden true runner.
    Simulate {
        #[arg(long)]
        chaser: Option<ChaserKind>,
        #[arg(long)]
        runner: Option<RunnerKind>,
        #[arg(short = 'T', long)]
        horizon: Option<usize>,
        /// Also write one SVG frame per step.
        #[arg(long)]
        frames: bool,
    },
    /// Batch experiments.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Render a map, optionally with an episode from an NDJSON file.
    Render(RenderArgs),
    /// Run the planner once and print the path as JSON.
    Plan {
        /// Waypoint name or `x,y`.
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Skip shortcut smoothing.
        #[arg(long)]
        raw: bool,
    },
    /// Compute one isovist and print the polygon as JSON.
    Isovist {
        #[arg(long, value_parser = parse_point)]
        at: Point2,
        #[arg(long, value_parser = parse_point)]
        aim: Point2,
    },
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Detection rates for the four agent variants.
    Detect {
        #[arg(long)]
        restarts: Option<usize>,
        /// Particle budget as `KxL`.
        #[arg(long, value_parser = parse_kl)]
        kl: Option<(usize, usize)>,
        #[arg(short = 'T', long)]
        horizon: Option<usize>,
        /// Keep the imagined runner clouds in the episode log.
        #[arg(long)]
        beliefs: bool,
    },
    /// Weight diagnostics across (K, L) splits of a fixed budget.
    Budget {
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated `KxL` pairs.
        #[arg(long, value_delimiter = ',', value_parser = parse_kl)]
        pairs: Option<Vec<(usize, usize)>>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(short = 'T', long)]
        horizon: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Episode log (NDJSON) to draw.
    #[arg(long)]
    episode: Option<PathBuf>,
    /// Line of the episode log to use.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Draw the view cone at this time step.
    #[arg(long)]
    isovist: Option<usize>,
    /// Heat map of the imagined runner positions of the episode.
    #[arg(long)]
    beliefs: bool,
    /// Heat map of this many naive chaser paths from the chaser start.
    #[arg(long)]
    prior_samples: Option<usize>,
    #[arg(long, default_value_t = 50)]
    resolution: usize,
    #[arg(long, default_value_t = 800)]
    width: u32,
    /// Explicit render spec (JSON); replaces the layer flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// File name inside the output directory.
    #[arg(long, default_value = "render.svg")]
    file: String,
}

/// Errors that map to exit status 2 (bad input rather than a failed run).
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let source = usage(MapSource::resolve(&cli.global.map))?;
    let map = usage(source.load())?;
    let g = &cli.global;
    match &cli.command {
        Command::Simulate {
            chaser,
            runner,
            horizon,
            frames,
        } => simulate(g, &source, &map, *chaser, *runner, *horizon, *frames),
        Command::Experiment(Experiment::Detect {
            restarts,
            kl,
            horizon,
            beliefs,
        }) => detect(g, &source, &map, *restarts, *kl, *horizon, *beliefs),
        Command::Experiment(Experiment::Budget {
            budget,
            pairs,
            restarts,
            horizon,
        }) => budget_cmd(g, &source, &map, *budget, pairs.clone(), *restarts, *horizon),
        Command::Render(args) => render(g, &source, &map, args),
        Command::Plan { from, to, raw } => plan(g, &map, from, to, *raw),
        Command::Isovist { at, aim } => {
            let cfg = usage(RunConfig::build(g, &map, None, |_| {}))?;
            let iso = isovist(&map, *at, *aim, &cfg.planning.isovist);
            let doc = serde_json::json!({
                "apex": iso.apex,
                "aim": aim,
                "sight_range": cfg.planning.isovist.sight_range,
                "area": iso.area(),
                "polygon": iso.boundary,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
    }
}

fn simulate(
    g: &GlobalArgs,
    source: &MapSource,
    map: &WorldMap,
    chaser: Option<ChaserKind>,
    runner: Option<RunnerKind>,
    horizon: Option<usize>,
    frames: bool,
) -> Result<()> {
    let cfg = usage(RunConfig::build(g, map, horizon, |v| {
        if let Some(c) = chaser {
            config::set(v, "scenario.chaser", serde_json::to_value(c).unwrap());
        }
        if let Some(r) = runner {
            config::set(v, "scenario.runner", serde_json::to_value(r).unwrap());
        }
        // Frames draw the view cones, which are aimed from the belief log.
        if frames {
            config::set(v, "scenario.options.record_beliefs", true.into());
        }
    }))?;
    let scenario = cfg.scenario_config(g.seed, source.id());
    usage(scenario.validate(map).map_err(anyhow::Error::from))?;

    let mut outputs = vec!["episode.ndjson".to_string()];
    if frames {
        outputs.extend((2..=cfg.planning.horizon).map(|t| format!("frames/frame_{t:03}.svg")));
    }
    let out = OutputDir::create(&g.out)?;
    out.write_manifest(&Manifest::new("simulate", g.seed, source, &cfg, outputs.clone()))?;

    let seed = scenario.restart_seed(0);
    let record = run_episode(map, &scenario, seed);
    let episode = DetectionEpisode {
        variant: scenario.variant,
        restart: 0,
        seed,
        record,
    };
    out.write_ndjson("episode.ndjson", std::iter::once(&episode))?;

    if frames {
        let rec = &episode.record;
        for t in 2..=rec.chaser_executed.t_last() {
            let inputs = episode_inputs(map, &cfg, &episode, Some(t));
            let mut spec = RenderSpec::map_only(600);
            spec.layers.extend([
                Layer::Heatmap {
                    id: "beliefs".into(),
                    resolution: 50,
                    color: None,
                },
                Layer::Isovist { t, color: None },
                Layer::Trajectory {
                    id: "chaser".into(),
                    color: Some("#1f77b4".into()),
                    width: 2.0,
                },
                Layer::Trajectory {
                    id: "runner".into(),
                    color: None,
                    width: 2.0,
                },
            ]);
            out.write(&format!("frames/frame_{t:03}.svg"), render_svg(map, &spec, &inputs)?.as_bytes())?;
        }
    }
    let rec = &episode.record;
    match rec.detection_time {
        Some(t) => println!("{}: detected at t = {t}", variant_label(scenario.variant)),
        None => println!("{}: not detected within T = {}", variant_label(scenario.variant), cfg.planning.horizon),
    }
    Ok(())
}

fn variant_label(v: AgentVariant) -> String {
    format!("{} chaser vs {} runner", v.chaser, v.runner)
}

fn detect(
    g: &GlobalArgs,
    source: &MapSource,
    map: &WorldMap,
    restarts: Option<usize>,
    kl: Option<(usize, usize)>,
    horizon: Option<usize>,
    beliefs: bool,
) -> Result<()> {
    let cfg = usage(RunConfig::build(g, map, horizon, |v| {
        if let Some(r) = restarts {
            config::set(v, "scenario.restarts", r.into());
        }
        if let Some((k, l)) = kl {
            config::set(v, "planning.K", k.into());
            config::set(v, "planning.L", l.into());
        }
        if beliefs {
            config::set(v, "scenario.options.record_beliefs", true.into());
        }
    }))?;
    let scenario = cfg.scenario_config(g.seed, source.id());
    usage(scenario.validate(map).map_err(anyhow::Error::from))?;

    let out = OutputDir::create(&g.out)?;
    let outputs = vec!["detection_table.csv".to_string(), "episodes.ndjson".to_string()];
    out.write_manifest(&Manifest::new("experiment detect", g.seed, source, &cfg, outputs))?;

    let result = detection_experiment(map, &scenario);
    out.write_ndjson("episodes.ndjson", result.episodes.iter())?;
    out.write_csv("detection_table.csv", output::detection_rows(&result.table))?;
    print_table(&result.table);
    Ok(())
}

fn print_table(table: &DetectionTable) {
    println!("{:<10} {:<9} {:>8} {:>10} {:>6}", "chaser", "runner", "restarts", "detections", "rate");
    for r in &table.rows {
        println!(
            "{:<10} {:<9} {:>8} {:>10} {:>6.3}",
            r.chaser_kind.to_string(),
            r.runner_kind.to_string(),
            r.restarts,
            r.detections,
            r.rate
        );
    }
}

fn budget_cmd(
    g: &GlobalArgs,
    source: &MapSource,
    map: &WorldMap,
    total: Option<usize>,
    pairs: Option<Vec<(usize, usize)>>,
    restarts: Option<usize>,
    horizon: Option<usize>,
) -> Result<()> {
    let cfg = usage(RunConfig::build(g, map, horizon, |v| {
        if let Some(b) = total {
            config::set(v, "budget.total_budget", b.into());
        }
        if let Some(p) = &pairs {
            config::set(v, "budget.pairs", serde_json::to_value(p).unwrap());
        }
        if let Some(r) = restarts {
            config::set(v, "budget.restarts", r.into());
        }
    }))?;
    let run = BudgetRunConfig {
        horizon: cfg.planning.horizon,
        ..cfg.budget.clone()
    };
    usage(run.validate().map_err(anyhow::Error::from))?;
    usage(cfg.planning.validate(map).map_err(anyhow::Error::from))?;

    let out = OutputDir::create(&g.out)?;
    let outputs = vec![
        "budget_stats.csv".to_string(),
        "budget_summary.csv".to_string(),
        "budget_weights.ndjson".to_string(),
    ];
    out.write_manifest(&Manifest::new("experiment budget", g.seed, source, &cfg, outputs))?;

    let result = budget_experiment(map, &run, &cfg.planning, g.seed)?;
    out.write_csv("budget_stats.csv", output::budget_rows(&result.series))?;
    out.write_csv("budget_summary.csv", output::summary_rows(&result.summaries))?;
    out.write_ndjson("budget_weights.ndjson", output::weight_lines(&result.series).iter())?;
    for s in &result.summaries {
        let first = s.per_step.first();
        let last = s.per_step.last();
        if let (Some(a), Some(b)) = (first, last) {
            println!(
                "{}x{}: log Z^C {:.3} -> {:.3}, ESS/K {:.3} -> {:.3}",
                s.particles, s.runner_samples, a.log_z_chaser, b.log_z_chaser, a.ess_fraction, b.ess_fraction
            );
        }
    }
    Ok(())
}

/// Trajectories, belief clouds and view cones of one logged episode. With
/// `upto`, everything is cut at that time step.
fn episode_inputs(map: &WorldMap, cfg: &RunConfig, ep: &DetectionEpisode, upto: Option<usize>) -> RenderInputs {
    let rec = &ep.record;
    let mut inputs = RenderInputs::default();
    let cut = |tr: &pursuit_core::Trajectory| match upto {
        Some(t) => tr.slice(1, t.min(tr.t_last())).unwrap_or_else(|| tr.clone()),
        None => tr.clone(),
    };
    inputs.trajectories.insert("chaser".into(), cut(&rec.chaser_executed));
    inputs.trajectories.insert("runner".into(), cut(&rec.runner_executed));
    let beliefs = rec
        .belief_snapshots
        .iter()
        .filter(|s| upto.map_or(true, |t| s.t == t))
        .flat_map(|s| s.samples.iter().map(|v| (Point2::new(v[0], v[1]), v[2])))
        .collect();
    inputs.point_sets.insert("beliefs".into(), beliefs);
    for s in &rec.belief_snapshots {
        if let Some(at) = rec.chaser_executed.at(s.t) {
            inputs.isovists.insert(s.t, isovist(map, at, s.aim, &cfg.planning.isovist));
        }
    }
    inputs
}

fn render(g: &GlobalArgs, source: &MapSource, map: &WorldMap, args: &RenderArgs) -> Result<()> {
    let cfg = usage(RunConfig::build(g, map, None, |_| {}))?;
    let mut inputs = RenderInputs::default();
    let mut layers = vec![Layer::Map];

    if let Some(n) = args.prior_samples {
        // Fig. 1 style: where a naive chaser goes from its start.
        let t = 2;
        let paths: Vec<_> = (0..n)
            .map(|i| {
                let mut rng = stream(g.seed, "prior-heatmap", &[i as u64]);
                naive_chaser_query(map, map.chaser_start(), t, &cfg.planning, &mut rng).trajectory
            })
            .collect();
        let spacing = map.diagonal() / (4.0 * args.resolution as f64);
        inputs.point_sets.insert("prior".into(), trajectory_points(&paths, spacing));
        layers.push(Layer::Heatmap {
            id: "prior".into(),
            resolution: args.resolution,
            color: None,
        });
    }

    if let Some(path) = &args.episode {
        let text = usage(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
        let line = usage(
            text.lines()
                .nth(args.index)
                .ok_or_else(|| anyhow!("{} has no record at index {}", path.display(), args.index)),
        )?;
        let ep: DetectionEpisode = usage(serde_json::from_str(line).context("parsing episode record"))?;
        let loaded = episode_inputs(map, &cfg, &ep, None);
        inputs.trajectories.extend(loaded.trajectories);
        inputs.isovists.extend(loaded.isovists);
        if args.beliefs {
            inputs.point_sets.extend(loaded.point_sets);
            layers.push(Layer::Heatmap {
                id: "beliefs".into(),
                resolution: args.resolution,
                color: None,
            });
        }
    }
    layers.extend([Layer::Obstacles, Layer::Waypoints]);
    if let Some(t) = args.isovist {
        layers.push(Layer::Isovist { t, color: None });
    }
    if args.episode.is_some() {
        layers.push(Layer::Trajectory {
            id: "chaser".into(),
            color: Some("#1f77b4".into()),
            width: 2.0,
        });
        layers.push(Layer::Trajectory {
            id: "runner".into(),
            color: None,
            width: 2.0,
        });
    }

    let spec = match &args.spec {
        Some(path) => {
            let text = usage(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())))?;
            usage(serde_json::from_str(&text).context("parsing render spec"))?
        }
        None => RenderSpec {
            layers,
            width: args.width,
            palette: Default::default(),
        },
    };
    let svg = usage(render_svg(map, &spec, &inputs).map_err(anyhow::Error::from))?;
    let out = OutputDir::create(&g.out)?;
    out.write_manifest(&Manifest::new("render", g.seed, source, &cfg, vec![args.file.clone()]))?;
    out.write(&args.file, svg.as_bytes())?;
    println!("{}", out.path(&args.file).display());
    Ok(())
}

fn resolve_location(map: &WorldMap, s: &str) -> Result<Point2> {
    if let Some(w) = map.waypoint(s) {
        return Ok(w.location);
    }
    parse_point(s).map_err(|_| anyhow!("`{s}` is neither a waypoint name nor an `x,y` pair"))
}

fn plan(g: &GlobalArgs, map: &WorldMap, from: &str, to: &str, raw: bool) -> Result<()> {
    let cfg = usage(RunConfig::build(g, map, None, |_| {}))?;
    let start = usage(resolve_location(map, from))?;
    let goal = usage(resolve_location(map, to))?;
    let mut rng = stream(derive_seed(g.seed, "plan", &[]), "rrt", &[]);
    let rrt = &cfg.planning.rrt;
    let path = if raw {
        rrt_plan(map, start, goal, rrt, &mut rng)?
    } else {
        let p = plan_or_hold(map, start, goal, rrt, &mut rng);
        shortcut_smooth(&p, map, rrt, &mut rng)
    };
    if path.waypoints.len() < 2 && start.distance(goal) > 1e-9 {
        bail!("no path found from {from} to {to}");
    }
    let doc = serde_json::json!({
        "from": start,
        "to": goal,
        "length": path.length(),
        "waypoints": path.waypoints,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
