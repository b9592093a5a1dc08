use serde::{Deserialize, Serialize};

use super::graph::orient;

pub type Point2 = [f64; 2];

/// Perimeter and area of the convex hull of the two agents' current and
/// previous ground positions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HullStats {
    pub perimeter: f64,
    pub area: f64,
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, without
/// collinear boundary points. Collinear input yields its two extreme points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    hull
}

/// Perimeter (a collinear hull counts its segment twice) and shoelace area.
pub fn hull_stats(a: Point2, b: Point2, c: Point2, d: Point2) -> HullStats {
    let hull = convex_hull(&[a, b, c, d]);
    let n = hull.len();
    if n < 2 {
        return HullStats::default();
    }
    let mut perimeter = 0.0;
    let mut twice_area = 0.0;
    for i in 0..n {
        let p = hull[i];
        let q = hull[(i + 1) % n];
        perimeter += ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        twice_area += p[0] * q[1] - q[0] * p[1];
    }
    HullStats {
        perimeter,
        area: (0.5 * twice_area).abs(),
    }
}
