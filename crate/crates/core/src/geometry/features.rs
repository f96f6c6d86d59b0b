//! Plane and curved surface features of convex primitives.
//!
//! Box features are ordered: planes `+x, -x, +y, -y, +z, -z` (indices 0..6),
//! then the twelve edges as zero-radius curved features, grouped by the axis
//! they run along (x, y, z; four each). Cylinder features are the top cap,
//! the bottom cap, then the lateral surface.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{ObjectModel, Pose, Shape};

/// Number of rim points used as the boundary of a circular cap.
pub const CAP_BOUNDARY_POINTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SurfaceFeature {
    Plane {
        center: Vector3<f64>,
        boundary: Vec<Vector3<f64>>,
        /// Outward unit normal.
        normal: Vector3<f64>,
    },
    Curved {
        center: Vector3<f64>,
        /// Unit direction of the rotation axis.
        axis: Vector3<f64>,
        /// Axis end points.
        endpoints: [Vector3<f64>; 2],
        radius: f64,
    },
}

impl SurfaceFeature {
    pub fn is_plane(&self) -> bool {
        matches!(self, SurfaceFeature::Plane { .. })
    }

    pub fn center(&self) -> Vector3<f64> {
        match self {
            SurfaceFeature::Plane { center, .. } | SurfaceFeature::Curved { center, .. } => *center,
        }
    }

    /// Plane normal or curved-surface axis.
    pub fn direction(&self) -> Vector3<f64> {
        match self {
            SurfaceFeature::Plane { normal, .. } => *normal,
            SurfaceFeature::Curved { axis, .. } => *axis,
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            SurfaceFeature::Plane { .. } => 0.0,
            SurfaceFeature::Curved { radius, .. } => *radius,
        }
    }

    /// Points whose projection outlines the feature.
    pub fn boundary_points(&self) -> Vec<Vector3<f64>> {
        match self {
            SurfaceFeature::Plane { boundary, .. } => boundary.clone(),
            SurfaceFeature::Curved { endpoints, .. } => endpoints.to_vec(),
        }
    }

    /// Maps points by the full transform and directions by the rotation only.
    pub fn transformed(&self, pose: &Pose) -> SurfaceFeature {
        match self {
            SurfaceFeature::Plane {
                center,
                boundary,
                normal,
            } => SurfaceFeature::Plane {
                center: pose.transform_point(center),
                boundary: boundary.iter().map(|b| pose.transform_point(b)).collect(),
                normal: pose.rotate_vector(normal),
            },
            SurfaceFeature::Curved {
                center,
                axis,
                endpoints,
                radius,
            } => SurfaceFeature::Curved {
                center: pose.transform_point(center),
                axis: pose.rotate_vector(axis),
                endpoints: [pose.transform_point(&endpoints[0]), pose.transform_point(&endpoints[1])],
                radius: *radius,
            },
        }
    }
}

pub fn transform_feature(f: &SurfaceFeature, pose: &Pose) -> SurfaceFeature {
    f.transformed(pose)
}

pub fn extract_surface_features(model: &ObjectModel) -> Vec<SurfaceFeature> {
    match model.shape {
        Shape::Box { extents } => box_features(Vector3::from(extents) * 0.5),
        Shape::Cylinder { radius, height } => cylinder_features(radius, height * 0.5),
    }
}

fn box_features(h: Vector3<f64>) -> Vec<SurfaceFeature> {
    let mut out = Vec::with_capacity(18);
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for sign in [1.0, -1.0] {
            let mut normal = Vector3::zeros();
            normal[a] = sign;
            let center = normal.component_mul(&h);
            // counter-clockwise about the outward normal
            let (u, v) = if sign > 0.0 { (b, c) } else { (c, b) };
            let corner = |su: f64, sv: f64| {
                let mut p = center;
                p[u] = su * h[u];
                p[v] = sv * h[v];
                p
            };
            let boundary = vec![
                corner(-1.0, -1.0),
                corner(1.0, -1.0),
                corner(1.0, 1.0),
                corner(-1.0, 1.0),
            ];
            out.push(SurfaceFeature::Plane {
                center,
                boundary,
                normal,
            });
        }
    }
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let mut axis = Vector3::zeros();
        axis[a] = 1.0;
        for (sb, sc) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            let mut center = Vector3::zeros();
            center[b] = sb * h[b];
            center[c] = sc * h[c];
            let e = axis * h[a];
            out.push(SurfaceFeature::Curved {
                center,
                axis,
                endpoints: [center - e, center + e],
                radius: 0.0,
            });
        }
    }
    out
}

fn cylinder_features(radius: f64, half: f64) -> Vec<SurfaceFeature> {
    let cap = |sign: f64| {
        let center = Vector3::new(0.0, 0.0, sign * half);
        let boundary = (0..CAP_BOUNDARY_POINTS)
            .map(|k| {
                let a = sign * TAU * k as f64 / CAP_BOUNDARY_POINTS as f64;
                Vector3::new(radius * a.cos(), radius * a.sin(), sign * half)
            })
            .collect();
        SurfaceFeature::Plane {
            center,
            boundary,
            normal: Vector3::new(0.0, 0.0, sign),
        }
    };
    vec![
        cap(1.0),
        cap(-1.0),
        SurfaceFeature::Curved {
            center: Vector3::zeros(),
            axis: Vector3::z(),
            endpoints: [Vector3::new(0.0, 0.0, -half), Vector3::new(0.0, 0.0, half)],
            radius,
        },
    ]
}

/// True when the zero-radius curved feature `edge` is a border segment of
/// the plane feature `face` (both endpoints are boundary vertices).
pub fn edge_bounds_face(edge: &SurfaceFeature, face: &SurfaceFeature) -> bool {
    match (edge, face) {
        (SurfaceFeature::Curved { endpoints, radius, .. }, SurfaceFeature::Plane { boundary, .. })
            if *radius == 0.0 =>
        {
            endpoints
                .iter()
                .all(|e| boundary.iter().any(|b| (b - e).norm() < 1e-9))
        }
        _ => false,
    }
}
