//! Run configuration: map-scaled defaults, then the config file, then
//! `--set` overrides, then subcommand flags.

use crate::GlobalArgs;
use anyhow::{anyhow, bail, Context, Result};
use pursuit_core::experiments::{BudgetRunConfig, ScenarioConfig, ScenarioOptions};
use pursuit_core::geometry::Point2;
use pursuit_core::models::{AgentVariant, ChaserKind, PlanningConfig, RunnerKind};
use pursuit_core::world::{bundled_source, load_map};
use pursuit_core::WorldMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DEFAULT_HORIZON: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub chaser: ChaserKind,
    pub runner: RunnerKind,
    pub restarts: usize,
    #[serde(default)]
    pub options: ScenarioOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub planning: PlanningConfig,
    pub scenario: ScenarioSection,
    /// `budget.horizon` always follows `planning.horizon`.
    pub budget: BudgetRunConfig,
}

impl RunConfig {
    fn defaults(map: &WorldMap, horizon: usize) -> Self {
        Self {
            planning: PlanningConfig::for_map(map, horizon),
            scenario: ScenarioSection {
                chaser: ChaserKind::Smartest,
                runner: RunnerKind::Smarter,
                restarts: 30,
                options: ScenarioOptions {
                    record_beliefs: false,
                    ..ScenarioOptions::default()
                },
            },
            budget: BudgetRunConfig {
                total_budget: 2048,
                pairs: BudgetRunConfig::default_pairs(),
                restarts: 10,
                horizon,
                chaser: None,
            },
        }
    }

    /// Resolves the configuration. `flags` writes subcommand flags into
    /// the override document. The horizon is fixed first because the
    /// map-scaled speed default depends on it.
    pub fn build(g: &GlobalArgs, map: &WorldMap, horizon: Option<usize>, flags: impl FnOnce(&mut Value)) -> Result<Self> {
        let mut user = Value::Object(Map::new());
        if let Some(path) = &g.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut user, file);
        }
        for item in &g.overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{item}` is not of the form key=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set(&mut user, key.trim(), value);
        }
        flags(&mut user);

        let horizon = match horizon {
            Some(t) => t,
            None => match user.pointer("/planning/horizon") {
                Some(v) => v
                    .as_u64()
                    .ok_or_else(|| anyhow!("planning.horizon must be a positive integer"))? as usize,
                None => DEFAULT_HORIZON,
            },
        };
        if horizon < 2 {
            bail!("the horizon must be at least 2");
        }
        let mut doc = serde_json::to_value(Self::defaults(map, horizon))?;
        merge(&mut doc, user);
        set(&mut doc, "planning.horizon", horizon.into());
        set(&mut doc, "budget.horizon", horizon.into());
        let cfg: RunConfig = serde_json::from_value(doc).context("invalid configuration")?;
        cfg.planning.validate(map)?;
        Ok(cfg)
    }

    pub fn scenario_config(&self, seed: u64, map_id: &str) -> ScenarioConfig {
        ScenarioConfig {
            variant: AgentVariant::new(self.scenario.chaser, self.scenario.runner),
            restarts: self.scenario.restarts,
            planning: self.planning.clone(),
            base_seed: seed,
            map_id: map_id.to_string(),
            options: self.scenario.options.clone(),
        }
    }
}

/// Recursive object merge; non-objects in `over` replace.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets a dotted key, creating intermediate objects.
pub fn set(doc: &mut Value, dotted: &str, value: Value) {
    let mut cur = doc;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return;
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
}

pub fn parse_kl(s: &str) -> std::result::Result<(usize, usize), String> {
    let (k, l) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected KxL, got `{s}`"))?;
    let k: usize = k.trim().parse().map_err(|_| format!("bad K in `{s}`"))?;
    let l: usize = l.trim().parse().map_err(|_| format!("bad L in `{s}`"))?;
    if k == 0 || l == 0 {
        return Err(format!("K and L must be positive in `{s}`"));
    }
    Ok((k, l))
}

pub fn parse_point(s: &str) -> std::result::Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got `{s}`"))?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad x in `{s}`"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad y in `{s}`"))?;
    Ok(Point2::new(x, y))
}

/// Where the map came from, with its raw bytes for hashing.
#[derive(Debug, Clone)]
pub struct MapSource {
    id: String,
    path: Option<PathBuf>,
    bytes: Vec<u8>,
}

impl MapSource {
    /// A path that exists wins over a bundled name.
    pub fn resolve(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.exists() {
            let bytes = std::fs::read(path).with_context(|| format!("reading map {}", path.display()))?;
            let id = path
                .file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.trim_end_matches(".json").trim_end_matches(".map"))
                .unwrap_or(arg)
                .to_string();
            return Ok(Self {
                id,
                path: Some(path.to_path_buf()),
                bytes,
            });
        }
        match bundled_source(arg) {
            Some(src) => Ok(Self {
                id: arg.to_string(),
                path: None,
                bytes: src.as_bytes().to_vec(),
            }),
            None => bail!("map file not found: {arg}"),
        }
    }

    pub fn load(&self) -> Result<WorldMap> {
        load_map(self.bytes.as_slice()).with_context(|| format!("loading map {}", self.describe()))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn describe(&self) -> String {
        match &self.path {
            Some(p) => p.display().to_string(),
            None => format!("bundled:{}", self.id),
        }
    }

    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(&self.bytes))
    }
}
