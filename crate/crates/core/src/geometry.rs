//! Planar primitives: points, segments, simple polygons and the handful of
//! predicates the planner and the visibility code are built on.
//!
//! Everything is plain `f64`. Polygons are closed: a point on the boundary
//! (within [`EPS`]) counts as inside, and segments that merely touch an edge
//! or overlap it collinearly count as intersecting.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Boundary tolerance shared by all predicates.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn distance_sq(self, o: Point2) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    pub fn lerp(self, o: Point2, t: f64) -> Point2 {
        self + (o - self) * t
    }

    /// Angle of the vector `self -> to`, in `(-pi, pi]`.
    pub fn bearing(self, to: Point2) -> f64 {
        let d = to - self;
        d.y.atan2(d.x)
    }

    pub fn from_polar(origin: Point2, angle: f64, radius: f64) -> Point2 {
        Point2::new(origin.x + radius * angle.cos(), origin.y + radius * angle.sin())
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn direction(&self) -> Point2 {
        self.b - self.a
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&[self.a, self.b])
    }

    /// Euclidean distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Point2) -> f64 {
        let d = self.direction();
        let len_sq = d.dot(d);
        if len_sq == 0.0 {
            return p.distance(self.a);
        }
        let t = ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0);
        p.distance(self.a + d * t)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn from_points(pts: &[Point2]) -> Self {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x - EPS
            && p.x <= self.max.x + EPS
            && p.y >= self.min.y - EPS
            && p.y <= self.max.y + EPS
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x + EPS
            && o.min.x <= self.max.x + EPS
            && self.min.y <= o.max.y + EPS
            && o.min.y <= self.max.y + EPS
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(self.max)
    }
}

/// A simple polygon with counter-clockwise vertex order. The closing edge
/// from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
    bbox: Aabb,
}

impl Polygon {
    /// Builds a polygon, dropping a repeated closing vertex and flipping
    /// clockwise input to counter-clockwise. Returns `None` for fewer than
    /// three distinct vertices or zero area.
    pub fn new(mut vertices: Vec<Point2>) -> Option<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 || vertices.iter().any(|p| !p.is_finite()) {
            return None;
        }
        let area = signed_area(&vertices);
        if area.abs() <= EPS {
            return None;
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let bbox = Aabb::from_points(&vertices);
        Some(Self { vertices, bbox })
    }

    /// Axis-aligned rectangle helper, mostly for fixtures.
    pub fn rect(min: Point2, max: Point2) -> Self {
        Self::new(vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ])
        .expect("degenerate rectangle")
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let a = self.area();
        let n = self.vertices.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// True when no two non-adjacent edges touch.
    pub fn is_simple(&self) -> bool {
        let edges: Vec<Segment> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(&edges[i], &edges[j]).is_some() {
                    return false;
                }
            }
        }
        true
    }

    /// True when `p` is on the boundary (within [`EPS`]).
    pub fn on_boundary(&self, p: Point2) -> bool {
        self.edges().any(|e| e.distance_to(p) <= EPS)
    }

    /// Inside and not on the boundary.
    pub fn strictly_contains(&self, p: Point2) -> bool {
        self.bbox.contains(p) && crossing_parity(p, &self.vertices) && !self.on_boundary(p)
    }
}

/// Shoelace formula; positive for counter-clockwise order.
pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        s += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * s
}

/// Intersection of two closed segments.
///
/// Crossing or touching segments yield the contact point. Collinear
/// overlapping segments yield the point of the overlap nearest `s1.a`.
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> Option<Point2> {
    let p = s1.a;
    let r = s1.direction();
    let q = s2.a;
    let s = s2.direction();
    let denom = r.cross(s);
    let qp = q - p;
    let scale = (r.norm() * s.norm()).max(f64::MIN_POSITIVE);

    if denom.abs() > EPS * scale {
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        let tol_t = EPS / r.norm().max(EPS);
        let tol_u = EPS / s.norm().max(EPS);
        if (-tol_t..=1.0 + tol_t).contains(&t) && (-tol_u..=1.0 + tol_u).contains(&u) {
            return Some(p + r * t.clamp(0.0, 1.0));
        }
        return None;
    }

    // Parallel (or degenerate). Only collinear configurations can touch.
    let r_len_sq = r.dot(r);
    let s_len_sq = s.dot(s);
    if r_len_sq == 0.0 && s_len_sq == 0.0 {
        return (p.distance(q) <= EPS).then_some(p);
    }
    if r_len_sq == 0.0 {
        return (s2.distance_to(p) <= EPS).then_some(p);
    }
    if s_len_sq == 0.0 {
        return (s1.distance_to(q) <= EPS).then_some(q);
    }
    if s1.distance_to(q) > EPS && s1.distance_to(s2.b) > EPS && s2.distance_to(p) > EPS {
        return None;
    }
    // Collinear: project s2 onto s1's parameter line.
    let t0 = qp.dot(r) / r_len_sq;
    let t1 = (s2.b - p).dot(r) / r_len_sq;
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    let tol = EPS / r_len_sq.sqrt();
    if hi < -tol || lo > 1.0 + tol {
        return None;
    }
    let t = lo.max(0.0).min(1.0);
    Some(p + r * t)
}

fn crossing_parity(p: Point2, vertices: &[Point2]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let vi = vertices[i];
        let vj = vertices[j];
        if (vi.y > p.y) != (vj.y > p.y) {
            let x_at = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
            if p.x < x_at {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Closed-polygon containment: boundary points (within [`EPS`]) are inside.
pub fn point_in_polygon(p: Point2, poly: &Polygon) -> bool {
    if !poly.bbox.contains(p) {
        return false;
    }
    poly.on_boundary(p) || crossing_parity(p, &poly.vertices)
}

/// True when `s` touches any obstacle edge or either endpoint is strictly
/// inside an obstacle.
pub fn segment_blocked(s: &Segment, obstacles: &[Polygon]) -> bool {
    let bb = s.bbox();
    obstacles.iter().any(|poly| segment_touches(s, &bb, poly))
}

/// Single-polygon form of [`segment_blocked`]; `bb` is the segment's box.
pub fn segment_touches(s: &Segment, bb: &Aabb, poly: &Polygon) -> bool {
    poly.bbox.overlaps(bb)
        && (poly.edges().any(|e| segments_intersect(s, &e).is_some())
            || poly.strictly_contains(s.a)
            || poly.strictly_contains(s.b))
}

/// Distance along the ray from `origin` at `angle` to the first obstacle
/// edge, clamped to `max_range`.
pub fn ray_cast(origin: Point2, angle: f64, obstacles: &[Polygon], max_range: f64) -> f64 {
    let end = Point2::from_polar(origin, angle, max_range);
    let ray = Segment::new(origin, end);
    let bb = ray.bbox();
    let mut best = max_range;
    for poly in obstacles {
        if !poly.bbox.overlaps(&bb) {
            continue;
        }
        for e in poly.edges() {
            if let Some(hit) = segments_intersect(&ray, &e) {
                best = best.min(origin.distance(hit));
            }
        }
    }
    best
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let d = (a - b).rem_euclid(two_pi);
    d.min(two_pi - d)
}

/// Total length of a polyline.
pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Point2::new(ax, ay), Point2::new(bx, by))
    }

    fn unit_square() -> Polygon {
        Polygon::rect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
    }

    #[test]
    fn crossing_segments_meet_in_the_middle() {
        let p = segments_intersect(&seg(0.0, 0.0, 1.0, 1.0), &seg(0.0, 1.0, 1.0, 0.0)).unwrap();
        assert!((p.x - 0.5).abs() < 1e-12 && (p.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parallel_disjoint_segments_miss() {
        assert!(segments_intersect(&seg(0.0, 0.0, 1.0, 0.0), &seg(0.0, 1.0, 1.0, 1.0)).is_none());
    }

    #[test]
    fn collinear_overlap_reports_point_nearest_first_start() {
        let p = segments_intersect(&seg(0.0, 0.0, 2.0, 0.0), &seg(1.0, 0.0, 3.0, 0.0)).unwrap();
        assert_eq!(p, Point2::new(1.0, 0.0));
        let p = segments_intersect(&seg(1.0, 0.0, 3.0, 0.0), &seg(0.0, 0.0, 2.0, 0.0)).unwrap();
        assert_eq!(p, Point2::new(1.0, 0.0));
        assert!(segments_intersect(&seg(0.0, 0.0, 1.0, 0.0), &seg(2.0, 0.0, 3.0, 0.0)).is_none());
    }

    #[test]
    fn touching_endpoint_counts() {
        let p = segments_intersect(&seg(0.0, 0.0, 1.0, 0.0), &seg(1.0, 0.0, 1.0, 5.0)).unwrap();
        assert_eq!(p, Point2::new(1.0, 0.0));
    }

    #[test]
    fn point_in_unit_square() {
        let sq = unit_square();
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Point2::new(2.0, 2.0), &sq));
        assert!(point_in_polygon(Point2::new(1.0, 0.5), &sq));
        assert!(!sq.strictly_contains(Point2::new(1.0, 0.5)));
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let cw = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(cw.area() > 0.0);
        assert!(Polygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)]).is_none());
    }

    #[test]
    fn self_intersecting_bowtie_is_not_simple() {
        let bowtie = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(3.0, 0.0),
            Point2::new(2.0, 0.5),
            Point2::new(0.0, 2.0),
        ]);
        assert!(bowtie.map_or(true, |p| !p.is_simple()));
        assert!(unit_square().is_simple());
    }

    #[test]
    fn segment_blocked_cases() {
        assert!(!segment_blocked(&seg(0.0, 0.0, 1.0, 0.0), &[]));
        let sq = Polygon::rect(Point2::new(1.0, -1.0), Point2::new(3.0, 1.0));
        assert!(segment_blocked(&seg(0.0, 0.0, 4.0, 0.0), std::slice::from_ref(&sq)));
        // Fully inside: no edge crossing, caught by the endpoint test.
        assert!(segment_blocked(&seg(1.5, 0.0, 2.5, 0.0), std::slice::from_ref(&sq)));
    }

    #[test]
    fn grazing_vertex_matches_dense_sampling() {
        // Diamond with its top vertex exactly on the segment line.
        let diamond = Polygon::new(vec![
            Point2::new(1.0, -1.0),
            Point2::new(2.0, -2.0),
            Point2::new(3.0, -1.0),
            Point2::new(2.0, 0.0),
        ])
        .unwrap();
        let obstacles = [diamond];
        // Sample 500 of the first segment lands on the vertex.
        for s in [seg(0.0, 0.0, 4.004, 0.0), seg(0.0, 1e-3, 4.004, 1e-3), seg(0.0, -0.5, 4.0, -0.5)] {
            let oracle = (1..=1000).any(|i| {
                let p = s.a.lerp(s.b, i as f64 / 1001.0);
                obstacles.iter().any(|o| point_in_polygon(p, o))
            });
            assert_eq!(segment_blocked(&s, &obstacles), oracle, "{s:?}");
        }
    }

    #[test]
    fn ray_cast_cases() {
        assert_eq!(ray_cast(Point2::new(0.0, 0.0), 1.234, &[], 5.0), 5.0);
        let wall = Polygon::rect(Point2::new(2.0, -5.0), Point2::new(2.5, 5.0));
        let d = ray_cast(Point2::new(0.0, 0.0), 0.0, &[wall], 10.0);
        assert!((d - 2.0).abs() < 1e-6);
    }

    #[test]
    fn angle_diff_wraps() {
        use std::f64::consts::PI;
        assert!((angle_diff(PI - 0.1, -PI + 0.1) - 0.2).abs() < 1e-12);
        assert!((angle_diff(0.0, PI) - PI).abs() < 1e-12);
    }

    fn pt() -> impl Strategy<Value = Point2> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Point2::new(x, y))
    }

    proptest! {
        #[test]
        fn intersection_presence_is_symmetric(a in pt(), b in pt(), c in pt(), d in pt()) {
            let s1 = Segment::new(a, b);
            let s2 = Segment::new(c, d);
            prop_assert_eq!(segments_intersect(&s1, &s2).is_some(), segments_intersect(&s2, &s1).is_some());
        }

        #[test]
        fn intersection_point_lies_on_both(a in pt(), b in pt(), c in pt(), d in pt()) {
            let s1 = Segment::new(a, b);
            let s2 = Segment::new(c, d);
            if let Some(p) = segments_intersect(&s1, &s2) {
                prop_assert!(s1.distance_to(p) < 1e-6);
                prop_assert!(s2.distance_to(p) < 1e-6);
            }
        }
    }
}
