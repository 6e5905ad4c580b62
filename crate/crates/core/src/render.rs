//! Static SVG rendering of maps, trajectories, heat maps and isovists.
//!
//! Output is a pure function of the inputs: no randomness, fixed number
//! formatting and layer order exactly as given in the render spec.

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::isovist::IsovistPolygon;
use crate::rrt::Trajectory;
use crate::world::WorldMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum Layer {
    /// The bounds rectangle.
    Map,
    Obstacles,
    Waypoints,
    Trajectory {
        id: String,
        #[serde(default)]
        color: Option<String>,
        #[serde(default = "default_stroke")]
        width: f64,
    },
    /// Per-cell opacity over a `resolution`-wide grid, normalized by the
    /// busiest cell.
    Heatmap {
        id: String,
        resolution: usize,
        #[serde(default)]
        color: Option<String>,
    },
    Isovist {
        t: usize,
        #[serde(default)]
        color: Option<String>,
    },
}

fn default_stroke() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub background: String,
    pub obstacle: String,
    pub waypoint: String,
    pub trajectory: String,
    pub heatmap: String,
    pub isovist: String,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: "#ffffff".into(),
            obstacle: "#8c8c8c".into(),
            waypoint: "#1f4e9c".into(),
            trajectory: "#d62728".into(),
            heatmap: "#ff7f0e".into(),
            isovist: "#2ca02c".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub layers: Vec<Layer>,
    /// Canvas width in pixels; the height follows the map's aspect ratio.
    pub width: u32,
    #[serde(default)]
    pub palette: Palette,
}

impl RenderSpec {
    /// Bounds, obstacles and waypoints.
    pub fn map_only(width: u32) -> Self {
        Self {
            layers: vec![Layer::Map, Layer::Obstacles, Layer::Waypoints],
            width,
            palette: Palette::default(),
        }
    }
}

/// Everything a spec may refer to by id.
#[derive(Debug, Clone, Default)]
pub struct RenderInputs {
    pub trajectories: BTreeMap<String, Trajectory>,
    /// Weighted point clouds for heat maps.
    pub point_sets: BTreeMap<String, Vec<(Point2, f64)>>,
    pub isovists: BTreeMap<usize, IsovistPolygon>,
}

/// Points every `spacing` along each trajectory polyline, weight 1 each.
pub fn trajectory_points(trajectories: &[Trajectory], spacing: f64) -> Vec<(Point2, f64)> {
    let mut out = Vec::new();
    for tr in trajectories {
        let pts = &tr.positions;
        if let Some(&first) = pts.first() {
            out.push((first, 1.0));
        }
        for w in pts.windows(2) {
            let n = (w[0].distance(w[1]) / spacing).ceil().max(1.0) as usize;
            for i in 1..=n {
                out.push((w[0].lerp(w[1], i as f64 / n as f64), 1.0));
            }
        }
    }
    out
}

struct Frame {
    min: Point2,
    max: Point2,
    scale: f64,
}

impl Frame {
    fn x(&self, p: Point2) -> f64 {
        (p.x - self.min.x) * self.scale
    }

    fn y(&self, p: Point2) -> f64 {
        (self.max.y - p.y) * self.scale
    }

    fn points(&self, pts: &[Point2]) -> String {
        pts.iter()
            .map(|&p| format!("{:.3},{:.3}", self.x(p), self.y(p)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn pick<'a>(color: &'a Option<String>, fallback: &'a str) -> &'a str {
    color.as_deref().unwrap_or(fallback)
}

/// Renders `spec` as an SVG 1.1 document.
pub fn render_svg(map: &WorldMap, spec: &RenderSpec, inputs: &RenderInputs) -> Result<String> {
    let b = map.bounds();
    let scale = spec.width as f64 / b.width();
    let frame = Frame {
        min: b.min,
        max: b.max,
        scale,
    };
    let (w, h) = (spec.width as f64, b.height() * scale);
    let pal = &spec.palette;

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#
    )
    .unwrap();

    for layer in &spec.layers {
        match layer {
            Layer::Map => {
                writeln!(
                    svg,
                    r##"<rect class="bounds" x="0" y="0" width="{w:.3}" height="{h:.3}" fill="{}" stroke="#000000" stroke-width="1"/>"##,
                    pal.background
                )
                .unwrap();
            }
            Layer::Obstacles => {
                for o in map.obstacles() {
                    writeln!(
                        svg,
                        r#"<polygon class="obstacle" points="{}" fill="{}"/>"#,
                        frame.points(o.vertices()),
                        pal.obstacle
                    )
                    .unwrap();
                }
            }
            Layer::Waypoints => {
                let r = (0.008 * w).max(2.0);
                for wp in map.waypoints() {
                    let (x, y) = (frame.x(wp.location), frame.y(wp.location));
                    writeln!(
                        svg,
                        r#"<circle class="waypoint" cx="{x:.3}" cy="{y:.3}" r="{r:.3}" fill="{}"/>"#,
                        pal.waypoint
                    )
                    .unwrap();
                    writeln!(
                        svg,
                        r#"<text class="waypoint-label" x="{:.3}" y="{:.3}" font-size="{:.1}" font-family="sans-serif">{}</text>"#,
                        x + 1.5 * r,
                        y - 1.5 * r,
                        4.0 * r,
                        escape(&wp.name)
                    )
                    .unwrap();
                }
            }
            Layer::Trajectory { id, color, width } => {
                let tr = inputs
                    .trajectories
                    .get(id)
                    .ok_or_else(|| Error::Config(format!("unknown trajectory id `{id}`")))?;
                writeln!(
                    svg,
                    r#"<polyline class="trajectory" data-id="{}" points="{}" fill="none" stroke="{}" stroke-width="{width:.2}"/>"#,
                    escape(id),
                    frame.points(&tr.positions),
                    pick(color, &pal.trajectory)
                )
                .unwrap();
            }
            Layer::Heatmap { id, resolution, color } => {
                let pts = inputs
                    .point_sets
                    .get(id)
                    .ok_or_else(|| Error::Config(format!("unknown point set `{id}`")))?;
                heatmap(&mut svg, &frame, map, pts, *resolution, pick(color, &pal.heatmap))?;
            }
            Layer::Isovist { t, color } => {
                let iso = inputs
                    .isovists
                    .get(t)
                    .ok_or_else(|| Error::Config(format!("no isovist at t = {t}")))?;
                writeln!(
                    svg,
                    r#"<polygon class="isovist" data-t="{t}" points="{}" fill="{}" fill-opacity="0.35" stroke="none"/>"#,
                    frame.points(&iso.boundary),
                    pick(color, &pal.isovist)
                )
                .unwrap();
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn heatmap(svg: &mut String, frame: &Frame, map: &WorldMap, pts: &[(Point2, f64)], resolution: usize, color: &str) -> Result<()> {
    if resolution == 0 {
        return Err(Error::Config("heat map resolution must be positive".into()));
    }
    let b = map.bounds();
    let cell = b.width() / resolution as f64;
    let nx = resolution;
    let ny = (b.height() / cell).ceil().max(1.0) as usize;
    let mut grid = vec![0.0; nx * ny];
    for &(p, wgt) in pts {
        if !b.contains(p) {
            continue;
        }
        let i = (((p.x - b.min.x) / cell) as usize).min(nx - 1);
        let j = (((p.y - b.min.y) / cell) as usize).min(ny - 1);
        grid[j * nx + i] += wgt;
    }
    let peak = grid.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(());
    }
    let side = cell * frame.scale;
    for j in 0..ny {
        for i in 0..nx {
            let v = grid[j * nx + i] / peak;
            if v <= 0.0 {
                continue;
            }
            let corner = Point2::new(b.min.x + i as f64 * cell, b.min.y + (j + 1) as f64 * cell);
            writeln!(
                svg,
                r#"<rect class="heat" x="{:.3}" y="{:.3}" width="{side:.3}" height="{side:.3}" fill="{color}" fill-opacity="{v:.4}"/>"#,
                frame.x(corner),
                frame.y(corner)
            )
            .unwrap();
        }
    }
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
