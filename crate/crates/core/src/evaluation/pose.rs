//! Pose error and map consistency measures.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{ModelRegistry, Pose};
use crate::relations::collision::{max_penetration, table_penetration};
use crate::relations::{distance_term, Placement, RelationRecord, TABLE_ID};
use std::collections::BTreeMap;

/// Mean over ground-truth-placed points of the distance to the closest
/// estimate-placed point. Exhaustive nearest-neighbor search.
pub fn add_s(points: &[Vector3<f64>], est: &Pose, gt: &Pose) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let e: Vec<Vector3<f64>> = points.iter().map(|p| est.transform_point(p)).collect();
    let total: f64 = points
        .iter()
        .map(|p| {
            let g = gt.transform_point(p);
            e.iter().map(|q| (q - g).norm_squared()).fold(f64::INFINITY, f64::min).sqrt()
        })
        .sum();
    total / points.len() as f64
}

/// Every `k`-th point so that at most `max_points` remain.
pub fn subsample(points: &[Vector3<f64>], max_points: usize) -> Vec<Vector3<f64>> {
    let stride = points.len().div_ceil(max_points.max(1)).max(1);
    points.iter().step_by(stride).copied().collect()
}

/// Fraction of errors at or below each of `n` thresholds spread uniformly
/// over `[0, max]`.
pub fn accuracy_curve(errors: &[f64], max: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let th = if n > 1 { max * i as f64 / (n - 1) as f64 } else { max };
            let frac = if errors.is_empty() {
                0.0
            } else {
                errors.iter().filter(|e| **e <= th).count() as f64 / errors.len() as f64
            };
            (th, frac)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactStats {
    /// Largest absolute contact distance over the relations (m).
    pub max_gap: f64,
    /// Deepest interpenetration between the members of any relation (m).
    pub max_relation_penetration: f64,
    /// Deepest interpenetration between any two objects or an object and
    /// the table (m).
    pub max_penetration: f64,
    pub n_relations: usize,
}

/// Contact distances of `relations` and interpenetration of the placed
/// objects, both over related pairs and over all pairs.
pub fn contact_violation_stats(placements: &[Placement], relations: &[RelationRecord], registry: &ModelRegistry) -> ContactStats {
    let max_gap = relations.iter().map(|r| distance_term(r).abs()).fold(0.0, f64::max);
    let models: Vec<_> = placements.iter().map(|p| registry.get(p.class_id).ok()).collect();
    let mut pair_pen = BTreeMap::new();
    for (i, (pa, ma)) in placements.iter().zip(&models).enumerate() {
        let Some(ma) = ma else { continue };
        pair_pen.insert((TABLE_ID, pa.id), table_penetration(ma, &pa.pose));
        for (pb, mb) in placements.iter().zip(&models).skip(i + 1) {
            if let Some(mb) = mb {
                let key = (pa.id.min(pb.id), pa.id.max(pb.id));
                pair_pen.insert(key, max_penetration(ma, &pa.pose, mb, &pb.pose));
            }
        }
    }
    let max_relation_penetration = relations
        .iter()
        .map(|r| {
            let (a, b) = (r.relation.obj_a, r.relation.obj_b);
            pair_pen.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
        })
        .fold(0.0, f64::max);
    ContactStats {
        max_gap,
        max_relation_penetration,
        max_penetration: pair_pen.values().copied().fold(0.0, f64::max),
        n_relations: relations.len(),
    }
}
