//! Polygonal city maps: bounds, building footprints and the named waypoint
//! set agents draw start and goal locations from.

use crate::error::{Error, Result};
use crate::geometry::{point_in_polygon, segment_touches, Aabb, Point2, Polygon, Segment};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Read;

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub name: String,
    pub location: Point2,
}

/// Result of a uniform waypoint draw.
pub type WaypointDraw = Waypoint;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    bounds: Aabb,
    obstacles: Vec<Polygon>,
    waypoints: Vec<Waypoint>,
    chaser_start: Point2,
    index: ObstacleIndex,
}

/// Uniform grid of bitsets recording which obstacle boxes overlap each
/// cell. Free-space queries only test the obstacles flagged in the cells
/// they touch.
#[derive(Debug, Clone, PartialEq)]
struct ObstacleIndex {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    words: usize,
    masks: Vec<u64>,
}

const INDEX_RESOLUTION: f64 = 48.0;
/// Segments whose box spans more cells than this scan the obstacle list.
const INDEX_MAX_CELLS: usize = 64;

impl ObstacleIndex {
    fn new(bounds: &Aabb, obstacles: &[Polygon]) -> Self {
        let cell = bounds.width().max(bounds.height()) / INDEX_RESOLUTION;
        let nx = (bounds.width() / cell).ceil() as usize + 1;
        let ny = (bounds.height() / cell).ceil() as usize + 1;
        let words = obstacles.len().div_ceil(64).max(1);
        let mut index = Self {
            origin: bounds.min,
            cell,
            nx,
            ny,
            words,
            masks: vec![0; nx * ny * words],
        };
        for (i, o) in obstacles.iter().enumerate() {
            let (x0, y0) = index.cell_of(o.bbox().min);
            let (x1, y1) = index.cell_of(o.bbox().max);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    index.masks[(cy * nx + cx) * words + i / 64] |= 1 << (i % 64);
                }
            }
        }
        index
    }

    // Boxes are inflated by one cell on each side in the lookups, which
    // covers the tolerance used by the geometric predicates.
    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        (
            (fx.max(0.0) as usize).min(self.nx - 1),
            (fy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Union of the cell masks over `bb` grown by one cell, or `None`
    /// when that spans too many cells to be worth it.
    fn candidates(&self, bb: &Aabb, out: &mut [u64; 4]) -> bool {
        if self.words > out.len() {
            return false;
        }
        let (x0, y0) = self.cell_of(bb.min);
        let (x1, y1) = self.cell_of(bb.max);
        let (x0, y0) = (x0.saturating_sub(1), y0.saturating_sub(1));
        let (x1, y1) = ((x1 + 1).min(self.nx - 1), (y1 + 1).min(self.ny - 1));
        if (x1 - x0 + 1) * (y1 - y0 + 1) > INDEX_MAX_CELLS {
            return false;
        }
        out.fill(0);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                let base = (cy * self.nx + cx) * self.words;
                for w in 0..self.words {
                    out[w] |= self.masks[base + w];
                }
            }
        }
        true
    }
}

fn for_each_bit(masks: &[u64], mut f: impl FnMut(usize) -> bool) -> bool {
    for (w, &m) in masks.iter().enumerate() {
        let mut m = m;
        while m != 0 {
            let bit = m.trailing_zeros() as usize;
            if f(w * 64 + bit) {
                return true;
            }
            m &= m - 1;
        }
    }
    false
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDocument {
    bounds: BoundsDoc,
    obstacles: Vec<Vec<[f64; 2]>>,
    waypoints: Vec<WaypointDoc>,
    chaser_start: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsDoc {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointDoc {
    name: String,
    pos: [f64; 2],
}

const BUNDLED: &[(&str, &str)] = &[
    ("bremen_like", include_str!("../../../maps/bremen_like.map.json")),
    ("empty_square", include_str!("../../../maps/empty_square.json")),
    ("single_wall", include_str!("../../../maps/single_wall.json")),
    ("corridor", include_str!("../../../maps/corridor.json")),
];

/// Names of the maps compiled into the library.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Source text of a bundled map.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Loads a bundled map by name. Panics if the bundled file is invalid,
/// which the test suite rules out.
pub fn bundled(name: &str) -> Option<WorldMap> {
    bundled_source(name).map(|src| load_map(src.as_bytes()).expect("bundled map is valid"))
}

/// Parses and validates a map document.
pub fn load_map<R: Read>(mut source: R) -> Result<WorldMap> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::invalid_map("document", e.to_string()))?;
    let doc: MapDocument = serde_json::from_str(&text)?;
    WorldMap::from_document(doc)
}

/// Uniform draw over a waypoint list.
pub fn sample_waypoint<'a, R: Rng + ?Sized>(waypoints: &'a [Waypoint], rng: &mut R) -> &'a Waypoint {
    &waypoints[rng.gen_range(0..waypoints.len())]
}

fn finite_point(element: &str, p: [f64; 2]) -> Result<Point2> {
    let p = Point2::from(p);
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::invalid_map(element, "non-finite coordinate"))
    }
}

impl WorldMap {
    fn from_document(doc: MapDocument) -> Result<Self> {
        let min = finite_point("bounds.min", doc.bounds.min)?;
        let max = finite_point("bounds.max", doc.bounds.max)?;
        if !(min.x < max.x && min.y < max.y) {
            return Err(Error::invalid_map("bounds", "min must be strictly below max"));
        }
        let bounds = Aabb::new(min, max);

        let mut obstacles = Vec::with_capacity(doc.obstacles.len());
        for (i, raw) in doc.obstacles.into_iter().enumerate() {
            let element = format!("obstacle {i}");
            let pts = raw
                .into_iter()
                .map(|p| finite_point(&element, p))
                .collect::<Result<Vec<_>>>()?;
            if pts.len() < 3 {
                return Err(Error::invalid_map(element, "open polygon: fewer than 3 vertices"));
            }
            if let Some(p) = pts.iter().find(|p| !bounds.contains(**p)) {
                return Err(Error::invalid_map(element, format!("vertex ({}, {}) outside bounds", p.x, p.y)));
            }
            let poly = Polygon::new(pts).ok_or_else(|| Error::invalid_map(&element, "zero-area polygon"))?;
            if !poly.is_simple() {
                return Err(Error::invalid_map(element, "polygon is self-intersecting"));
            }
            obstacles.push(poly);
        }

        if doc.waypoints.len() < 2 {
            return Err(Error::invalid_map(
                "waypoints",
                format!("at least 2 waypoints required, found {}", doc.waypoints.len()),
            ));
        }
        let mut waypoints: Vec<Waypoint> = Vec::with_capacity(doc.waypoints.len());
        for wp in doc.waypoints {
            let element = format!("waypoint `{}`", wp.name);
            if wp.name.is_empty() {
                return Err(Error::invalid_map("waypoint", "empty name"));
            }
            if waypoints.iter().any(|w| w.name == wp.name) {
                return Err(Error::invalid_map(element, "duplicate name"));
            }
            let location = finite_point(&element, wp.pos)?;
            check_free(&element, location, &bounds, &obstacles)?;
            waypoints.push(Waypoint { name: wp.name, location });
        }

        let chaser_start = finite_point("chaser_start", doc.chaser_start)?;
        check_free("chaser_start", chaser_start, &bounds, &obstacles)?;

        let index = ObstacleIndex::new(&bounds, &obstacles);
        Ok(Self {
            bounds,
            obstacles,
            waypoints,
            chaser_start,
            index,
        })
    }

    fn to_document(&self) -> MapDocument {
        MapDocument {
            bounds: BoundsDoc {
                min: self.bounds.min.into(),
                max: self.bounds.max.into(),
            },
            obstacles: self
                .obstacles
                .iter()
                .map(|p| p.vertices().iter().map(|&v| v.into()).collect())
                .collect(),
            waypoints: self
                .waypoints
                .iter()
                .map(|w| WaypointDoc {
                    name: w.name.clone(),
                    pos: w.location.into(),
                })
                .collect(),
            chaser_start: self.chaser_start.into(),
        }
    }

    /// Serializes back to the map document format (pretty-printed JSON).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("map serialization cannot fail")
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn chaser_start(&self) -> Point2 {
        self.chaser_start
    }

    pub fn diagonal(&self) -> f64 {
        self.bounds.diagonal()
    }

    pub fn waypoint(&self, name: &str) -> Option<&Waypoint> {
        self.waypoints.iter().find(|w| w.name == name)
    }

    pub fn sample_waypoint<R: Rng + ?Sized>(&self, rng: &mut R) -> &Waypoint {
        sample_waypoint(&self.waypoints, rng)
    }

    /// Inside bounds and outside every obstacle interior.
    pub fn is_free(&self, p: Point2) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        let mut cand = [0u64; 4];
        if self.index.candidates(&Aabb::new(p, p), &mut cand) {
            !for_each_bit(&cand[..self.index.words], |i| self.obstacles[i].strictly_contains(p))
        } else {
            !self.obstacles.iter().any(|o| o.strictly_contains(p))
        }
    }

    /// True when the straight move `a -> b` stays in bounds and touches no
    /// obstacle.
    pub fn segment_free(&self, a: Point2, b: Point2) -> bool {
        if !(self.bounds.contains(a) && self.bounds.contains(b)) {
            return false;
        }
        let s = Segment::new(a, b);
        let bb = s.bbox();
        let mut cand = [0u64; 4];
        if self.index.candidates(&bb, &mut cand) {
            !for_each_bit(&cand[..self.index.words], |i| segment_touches(&s, &bb, &self.obstacles[i]))
        } else {
            !self.obstacles.iter().any(|o| segment_touches(&s, &bb, o))
        }
    }

    /// Uniform sample from the bounding rectangle (not necessarily free).
    pub fn sample_in_bounds<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        Point2::new(
            rng.gen_range(self.bounds.min.x..=self.bounds.max.x),
            rng.gen_range(self.bounds.min.y..=self.bounds.max.y),
        )
    }
}

fn check_free(element: &str, p: Point2, bounds: &Aabb, obstacles: &[Polygon]) -> Result<()> {
    if !bounds.contains(p) {
        return Err(Error::invalid_map(element, "outside map bounds"));
    }
    if let Some(i) = obstacles.iter().position(|o| point_in_polygon(p, o)) {
        return Err(Error::invalid_map(element, format!("inside obstacle {i}")));
    }
    Ok(())
}
