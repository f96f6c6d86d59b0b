//! Convex polygons in the plane and the 2D separating axis test.

use nalgebra::{Vector2, Vector3};

pub type P2 = Vector2<f64>;

/// Orthonormal basis `(u, v)` of the plane perpendicular to `dir`.
pub fn plane_basis(dir: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let d = dir.normalize();
    let helper = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    (u, v)
}

/// Projects points along `dir` onto the perpendicular plane.
pub fn project_along(points: &[Vector3<f64>], dir: &Vector3<f64>) -> Vec<P2> {
    let (u, v) = plane_basis(dir);
    points.iter().map(|p| P2::new(p.dot(&u), p.dot(&v))).collect()
}

fn cross2(o: &P2, a: &P2, b: &P2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (monotone chain). Collinear and duplicate
/// points are dropped; degenerate inputs yield a segment or a single point.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<P2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-15 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<P2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-15 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn candidate_axes(poly: &[P2], out: &mut Vec<P2>) {
    let n = poly.len();
    if n < 2 {
        return;
    }
    for i in 0..n {
        let e = poly[(i + 1) % n] - poly[i];
        let len = e.norm();
        if len > 1e-12 {
            out.push(P2::new(-e.y, e.x) / len);
            if n == 2 {
                // a segment has no area; its direction can also separate
                out.push(e / len);
            }
        }
    }
}

fn interval(poly: &[P2], axis: &P2) -> (f64, f64) {
    poly.iter()
        .map(|p| p.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Largest gap between the projections of two convex hulls over all
/// candidate axes. Positive means separated by at least that much along
/// some axis; zero or negative means the hulls overlap.
pub fn sat_gap(a: &[P2], b: &[P2]) -> f64 {
    let mut axes = Vec::with_capacity(a.len() + b.len() + 1);
    candidate_axes(a, &mut axes);
    candidate_axes(b, &mut axes);
    // point/point and point/segment cases need the centroid direction
    let ca = a.iter().sum::<P2>() / a.len() as f64;
    let cb = b.iter().sum::<P2>() / b.len() as f64;
    let d = cb - ca;
    if d.norm() > 1e-12 {
        axes.push(d.normalize());
    }
    let mut best = f64::NEG_INFINITY;
    for axis in &axes {
        let (a0, a1) = interval(a, axis);
        let (b0, b1) = interval(b, axis);
        best = best.max((b0 - a1).max(a0 - b1));
    }
    best
}

/// Overlap test for two convex hulls; touching counts as overlapping.
pub fn sat_overlap(a: &[P2], b: &[P2]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    sat_gap(a, b) <= 1e-9
}

/// Signed distance of `p` from the boundary of a CCW convex polygon,
/// measured as the minimum over edge half-planes (positive inside).
pub fn inside_margin(poly: &[P2], p: &P2) -> f64 {
    let n = poly.len();
    let mut m = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let e = poly[(i + 1) % n] - a;
        let len = e.norm();
        if len < 1e-12 {
            continue;
        }
        m = m.min(cross2(&a, &poly[(i + 1) % n], p) / len);
    }
    m
}
