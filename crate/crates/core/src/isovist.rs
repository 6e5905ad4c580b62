//! Limited field-of-view visibility.
//!
//! Detection is a binary per-step test: the target must be within sight
//! range, inside the view cone and not occluded. The isovist polygon is
//! the same region sampled by ray casting, used for rendering and for
//! cross-checking the analytic test.

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, ray_cast, Point2, Polygon, EPS};
use crate::rrt::Trajectory;
use crate::world::WorldMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsovistConfig {
    /// Half the cone opening, in radians.
    pub fov_half_angle: f64,
    pub sight_range: f64,
    pub ray_count: usize,
}

impl IsovistConfig {
    /// 45 degree cone with a range of a quarter of the map diagonal.
    pub fn for_map(map: &WorldMap) -> Self {
        Self {
            fov_half_angle: 22.5_f64.to_radians(),
            sight_range: 0.25 * map.diagonal(),
            ray_count: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fov_half_angle > 0.0
            && self.fov_half_angle <= std::f64::consts::PI
            && self.sight_range > 0.0
            && self.sight_range.is_finite()
            && self.ray_count >= 8;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid isovist parameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsovistPolygon {
    pub apex: Point2,
    /// Apex followed by the ray hits in angular order.
    pub boundary: Vec<Point2>,
}

impl IsovistPolygon {
    pub fn area(&self) -> f64 {
        crate::geometry::signed_area(&self.boundary).abs()
    }

    /// The boundary as a [`Polygon`]; `None` when every ray is blocked
    /// right at the apex.
    pub fn polygon(&self) -> Option<Polygon> {
        Polygon::new(self.boundary.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VisibilityCount {
    pub steps_visible: usize,
    pub detected_at: Option<usize>,
}

fn aim_bearing(apex: Point2, aim: Point2) -> f64 {
    if apex.distance(aim) <= EPS {
        0.0
    } else {
        apex.bearing(aim)
    }
}

/// Cone of sight from `apex` towards `aim`, sampled with `ray_count` rays.
pub fn isovist(map: &WorldMap, apex: Point2, aim: Point2, cfg: &IsovistConfig) -> IsovistPolygon {
    let center = aim_bearing(apex, aim);
    let n = cfg.ray_count.max(2);
    let mut boundary = Vec::with_capacity(n + 1);
    boundary.push(apex);
    for i in 0..n {
        let frac = i as f64 / (n - 1) as f64;
        let angle = center - cfg.fov_half_angle + 2.0 * cfg.fov_half_angle * frac;
        let d = ray_cast(apex, angle, map.obstacles(), cfg.sight_range);
        boundary.push(Point2::from_polar(apex, angle, d));
    }
    IsovistPolygon { apex, boundary }
}

/// Analytic visibility test: range, cone angle and occlusion.
/// Co-located observer and target always see each other.
pub fn is_visible(map: &WorldMap, observer: Point2, target: Point2, aim: Point2, cfg: &IsovistConfig) -> bool {
    let dist = observer.distance(target);
    if dist <= EPS {
        return true;
    }
    if dist > cfg.sight_range {
        return false;
    }
    let off_axis = angle_diff(observer.bearing(target), aim_bearing(observer, aim));
    if off_axis > cfg.fov_half_angle + 1e-12 {
        return false;
    }
    map.segment_free(observer, target)
}

/// Counts the steps in `first..=last` at which the observer sees the
/// target, aiming at the target's position at each step.
pub fn time_visible(
    observer: &Trajectory,
    target: &Trajectory,
    map: &WorldMap,
    cfg: &IsovistConfig,
    first: usize,
    last: usize,
) -> Result<VisibilityCount> {
    for traj in [observer, target] {
        if !traj.covers(first, last) {
            return Err(Error::Coverage {
                first,
                last,
                have_first: traj.t_first,
                have_last: traj.t_last(),
            });
        }
    }
    let mut count = VisibilityCount::default();
    for t in first..=last {
        let o = observer.at(t).unwrap();
        let x = target.at(t).unwrap();
        if is_visible(map, o, x, x, cfg) {
            count.steps_visible += 1;
            count.detected_at.get_or_insert(t);
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_in_polygon;
    use crate::world::{bundled, load_map};
    use std::f64::consts::PI;

    fn cfg(range: f64) -> IsovistConfig {
        IsovistConfig {
            fov_half_angle: 22.5_f64.to_radians(),
            sight_range: range,
            ray_count: 64,
        }
    }

    fn empty() -> WorldMap {
        bundled("empty_square").unwrap()
    }

    #[test]
    fn empty_map_sector_area() {
        let iso = isovist(&empty(), Point2::new(10.0, 10.0), Point2::new(15.0, 10.0), &cfg(5.0));
        let sector = 45.0 / 360.0 * PI * 25.0;
        assert!((iso.area() - sector).abs() / sector < 0.02, "{}", iso.area());
        for p in &iso.boundary {
            assert!(p.distance(iso.apex) <= 5.0 + 1e-9);
        }
    }

    #[test]
    fn enclosed_apex_sees_box_portion() {
        // Apex at the centre of a 2x2 room; aiming +x the cone is cut by
        // the wall at x = 1, leaving a triangle of area tan(22.5 deg).
        let doc = r#"{"bounds":{"min":[-3,-3],"max":[3,3]},
            "obstacles":[[[1,-1.5],[1.5,-1.5],[1.5,1.5],[1,1.5]],[[-1.5,-1.5],[-1,-1.5],[-1,1.5],[-1.5,1.5]],
                         [[-1,1],[1,1],[1,1.5],[-1,1.5]],[[-1,-1.5],[1,-1.5],[1,-1],[-1,-1]]],
            "waypoints":[{"name":"a","pos":[0,0]},{"name":"b","pos":[2.5,2.5]}],"chaser_start":[0,0]}"#;
        let map = load_map(doc.as_bytes()).unwrap();
        let iso = isovist(&map, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), &cfg(5.0));
        let expected = 22.5_f64.to_radians().tan();
        assert!((iso.area() - expected).abs() < 1e-9, "{} vs {expected}", iso.area());
    }

    #[test]
    fn rotating_aim_rotates_polygon() {
        let map = empty();
        let apex = Point2::new(10.0, 10.0);
        let base = isovist(&map, apex, Point2::new(11.0, 10.0), &cfg(5.0));
        let theta = 0.7_f64;
        let aim = Point2::from_polar(apex, theta, 1.0);
        let rotated = isovist(&map, apex, aim, &cfg(5.0));
        for (p, q) in base.boundary.iter().zip(&rotated.boundary) {
            let d = *p - apex;
            let r = Point2::new(d.x * theta.cos() - d.y * theta.sin(), d.x * theta.sin() + d.y * theta.cos()) + apex;
            assert!(r.distance(*q) < 1e-9);
        }
    }

    #[test]
    fn visibility_cases() {
        let map = empty();
        let o = Point2::new(2.0, 2.0);
        let c = cfg(5.0);
        assert!(is_visible(&map, o, Point2::new(3.0, 2.0), Point2::new(3.0, 2.0), &c));
        assert!(!is_visible(&map, o, Point2::new(8.0 + 1e-6, 2.0), Point2::new(8.0, 2.0), &c));
        // Outside the cone.
        assert!(!is_visible(&map, o, Point2::new(2.0, 4.0), Point2::new(4.0, 2.0), &c));
        assert!(is_visible(&map, o, o, Point2::new(0.0, 0.0), &c));

        let walled = bundled("single_wall").unwrap();
        let (a, b) = (Point2::new(8.0, 10.0), Point2::new(12.0, 10.0));
        assert!(!walled.segment_free(a, b));
        assert!(!is_visible(&walled, a, b, b, &cfg(20.0)));
    }

    #[test]
    fn polygon_agrees_with_analytic_test() {
        let map = bundled("bremen_like").unwrap();
        let c = IsovistConfig {
            ray_count: 257,
            ..IsovistConfig::for_map(&map)
        };
        let apex = map.chaser_start();
        let mut checked = 0;
        for i in 0..40 {
            for j in 0..40 {
                let target = Point2::new(1.25 + 2.5 * i as f64, 1.25 + 2.5 * j as f64);
                if !map.is_free(target) || target.distance(apex) < 1.0 {
                    continue;
                }
                let iso = isovist(&map, apex, target, &c);
                let Some(poly) = iso.polygon() else { continue };
                // Skip targets near the polygon's sampled silhouette.
                let margin = 2.0 * c.sight_range / c.ray_count as f64;
                if poly.edges().any(|e| e.distance_to(target) < margin) {
                    continue;
                }
                assert_eq!(point_in_polygon(target, &poly), is_visible(&map, apex, target, target, &c), "{target:?}");
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn visibility_is_monotone_in_range() {
        let map = bundled("bremen_like").unwrap();
        let o = map.chaser_start();
        for i in 0..50 {
            let target = Point2::new(2.0 * i as f64, 60.0);
            for r in [10.0, 30.0, 60.0] {
                if is_visible(&map, o, target, target, &cfg(r)) {
                    assert!(is_visible(&map, o, target, target, &cfg(r * 1.5)));
                }
            }
        }
    }

    #[test]
    fn time_visible_cases() {
        let map = empty();
        let p = Trajectory::hold(Point2::new(5.0, 5.0), 1, 5);
        let v = time_visible(&p, &p, &map, &cfg(3.0), 1, 5).unwrap();
        assert_eq!(v, VisibilityCount { steps_visible: 5, detected_at: Some(1) });

        let far = Trajectory::hold(Point2::new(18.0, 18.0), 1, 5);
        let v = time_visible(&p, &far, &map, &cfg(3.0), 1, 5).unwrap();
        assert_eq!(v, VisibilityCount::default());

        let short = Trajectory::hold(Point2::new(5.0, 5.0), 2, 4);
        assert!(matches!(time_visible(&p, &short, &map, &cfg(3.0), 1, 5), Err(Error::Coverage { .. })));
    }

    #[test]
    fn time_visible_matches_per_step_loop_and_partitions() {
        let map = bundled("bremen_like").unwrap();
        let c = IsovistConfig::for_map(&map);
        let a = Trajectory::new(1, (0..20).map(|i| Point2::new(2.0 + 5.0 * i as f64, 50.0)).collect());
        let b = Trajectory::new(1, (0..20).map(|i| Point2::new(50.0, 98.0 - 5.0 * i as f64)).collect());
        let total = time_visible(&a, &b, &map, &c, 1, 20).unwrap();
        let oracle = (1..=20)
            .filter(|&t| {
                let (o, x) = (a.at(t).unwrap(), b.at(t).unwrap());
                o.distance(x) <= c.sight_range && map.segment_free(o, x)
            })
            .count();
        assert_eq!(total.steps_visible, oracle);
        assert!(oracle > 0);
        let left = time_visible(&a, &b, &map, &c, 1, 9).unwrap();
        let right = time_visible(&a, &b, &map, &c, 10, 20).unwrap();
        assert_eq!(left.steps_visible + right.steps_visible, total.steps_visible);
    }
}
