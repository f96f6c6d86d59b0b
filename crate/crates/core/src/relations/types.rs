use serde::{Deserialize, Serialize};

/// Object id reserved for the supporting table.
pub const TABLE_ID: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContactKind {
    P2P,
    P2C,
    C2C,
}

/// Contact between feature `feat_a` of `obj_a` and feature `feat_b` of
/// `obj_b`. For `P2C` the plane is always on side `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContactRelation {
    pub kind: ContactKind,
    pub obj_a: u32,
    pub obj_b: u32,
    pub feat_a: usize,
    pub feat_b: usize,
}

impl ContactRelation {
    /// Canonical orientation: plane first for `P2C`, otherwise the smaller
    /// `(object, feature)` first. Two relations describe the same contact
    /// iff their canonical forms are equal.
    pub fn canonical(self) -> Self {
        let swap = match self.kind {
            ContactKind::P2C => false,
            _ => (self.obj_b, self.feat_b) < (self.obj_a, self.feat_a),
        };
        if swap {
            Self {
                kind: self.kind,
                obj_a: self.obj_b,
                obj_b: self.obj_a,
                feat_a: self.feat_b,
                feat_b: self.feat_a,
            }
        } else {
            self
        }
    }

    pub fn involves(&self, id: u32) -> bool {
        self.obj_a == id || self.obj_b == id
    }
}
