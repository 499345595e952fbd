//! Incremental construction of rotation systems.

use crate::map::{CombinatorialMap, DartId, MapError, VertexId};

/// Builds a map by allocating vertices and dart pairs, then pushing darts
/// into per-vertex rotations in counterclockwise order.
#[derive(Debug, Default)]
pub(crate) struct MapBuilder {
    alpha: Vec<DartId>,
    rot: Vec<Vec<DartId>>,
}

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self) -> VertexId {
        self.rot.push(Vec::new());
        (self.rot.len() - 1) as VertexId
    }

    /// Allocates an edge and returns its two darts (still unattached).
    pub fn add_edge(&mut self) -> (DartId, DartId) {
        let d = self.alpha.len() as DartId;
        self.alpha.push(d + 1);
        self.alpha.push(d);
        (d, d + 1)
    }

    /// Appends `d` to the rotation of `v`.
    pub fn attach(&mut self, v: VertexId, d: DartId) {
        self.rot[v as usize].push(d);
    }

    pub fn build(self, root: DartId) -> Result<CombinatorialMap, MapError> {
        let n = self.alpha.len();
        let mut sigma = vec![u32::MAX; n];
        for cycle in &self.rot {
            for (i, &d) in cycle.iter().enumerate() {
                sigma[d as usize] = cycle[(i + 1) % cycle.len()];
            }
        }
        if sigma.iter().any(|&s| s == u32::MAX) {
            return Err(MapError::NotPermutation);
        }
        CombinatorialMap::build(self.alpha, sigma, root)
    }
}
