//! Contact relations between surface features of mapped objects.

pub mod collision;
mod infer;
mod types;

pub use infer::{
    check_c2c, check_p2c, common_normal_support_check, check_p2p, distance_term, infer_relations, member_features, member_pose, projected_outline,
    projection_overlap_check, relation_records, support_direction_check, test_pair, Placement, RelationConfig,
    RelationRecord, STRIP_HULL_POINTS,
};
pub use types::{ContactKind, ContactRelation, TABLE_ID};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("curved features have parallel axes")]
    DegenerateAxes,
    #[error("unknown object {0}")]
    UnknownObject(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
