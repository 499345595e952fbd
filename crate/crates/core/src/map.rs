//! Rooted planar maps encoded as rotation systems over darts.
//!
//! A map with `e` edges is stored as two permutations of the dart set
//! `0..2e`: `alpha` (the opposite-dart involution) and `sigma` (the next
//! dart counterclockwise around the origin vertex of a dart). Faces are
//! the orbits of `sigma ∘ alpha`; with `sigma` counterclockwise, the orbit
//! of a dart walks the face lying on its left.
//!
//! Maps are immutable after validation. Vertices and faces are derived
//! from the permutations at construction time and cached; ids are
//! assigned in increasing order of the smallest dart of each cycle, which
//! makes them stable under serialization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type DartId = u32;
pub type VertexId = u32;
pub type FaceId = u32;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum MapError {
    #[error("dart set must be nonempty and even-sized (got {0} darts)")]
    BadDartCount(usize),
    #[error("alpha and sigma must be permutations of the same dart set")]
    NotPermutation,
    #[error("alpha is not a fixed-point-free involution")]
    NotInvolution,
    #[error("the group generated by alpha and sigma is not transitive on darts")]
    NotConnected,
    #[error("Euler characteristic V-E+F = {chi} is not 2; map is not a sphere embedding")]
    NotGenusZero { chi: i64 },
    #[error("root dart {0} out of range")]
    RootOutOfRange(DartId),
}

/// A rooted combinatorial map on the sphere.
#[derive(Debug, Clone)]
pub struct CombinatorialMap {
    alpha: Vec<DartId>,
    sigma: Vec<DartId>,
    sigma_inv: Vec<DartId>,
    root: DartId,
    vertex_of: Vec<VertexId>,
    face_of: Vec<FaceId>,
    /// Darts of each vertex in sigma order, starting from the smallest dart.
    vertex_darts: Vec<Vec<DartId>>,
    /// Darts of each face in `sigma ∘ alpha` orbit order, starting from the
    /// smallest dart of the orbit.
    face_darts: Vec<Vec<DartId>>,
}

fn check_permutation(p: &[DartId]) -> bool {
    let n = p.len();
    let mut seen = vec![false; n];
    for &x in p {
        let x = x as usize;
        if x >= n || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

impl CombinatorialMap {
    /// Validates and builds a map from its rotation system.
    pub fn build(alpha: Vec<DartId>, sigma: Vec<DartId>, root: DartId) -> Result<Self, MapError> {
        let n = alpha.len();
        if n == 0 || n % 2 != 0 {
            return Err(MapError::BadDartCount(n));
        }
        if sigma.len() != n || !check_permutation(&alpha) || !check_permutation(&sigma) {
            return Err(MapError::NotPermutation);
        }
        if (root as usize) >= n {
            return Err(MapError::RootOutOfRange(root));
        }
        for d in 0..n {
            let a = alpha[d] as usize;
            if a == d || alpha[a] as usize != d {
                return Err(MapError::NotInvolution);
            }
        }
        // Transitivity of <alpha, sigma> on darts.
        let mut seen = vec![false; n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut reached = 1usize;
        while let Some(d) = stack.pop() {
            for nd in [alpha[d as usize], sigma[d as usize]] {
                if !seen[nd as usize] {
                    seen[nd as usize] = true;
                    reached += 1;
                    stack.push(nd);
                }
            }
        }
        if reached != n {
            return Err(MapError::NotConnected);
        }

        let mut sigma_inv = vec![0u32; n];
        for d in 0..n {
            sigma_inv[sigma[d] as usize] = d as u32;
        }

        let (vertex_of, vertex_darts) = cycles(&sigma);
        // phi = sigma ∘ alpha traverses the face on the left of each dart.
        let phi: Vec<DartId> = (0..n).map(|d| sigma[alpha[d] as usize]).collect();
        let (face_of, face_darts) = cycles(&phi);

        let v = vertex_darts.len() as i64;
        let e = (n / 2) as i64;
        let f = face_darts.len() as i64;
        let chi = v - e + f;
        if chi != 2 {
            return Err(MapError::NotGenusZero { chi });
        }

        Ok(CombinatorialMap {
            alpha,
            sigma,
            sigma_inv,
            root,
            vertex_of,
            face_of,
            vertex_darts,
            face_darts,
        })
    }

    pub fn n_darts(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_edges(&self) -> usize {
        self.alpha.len() / 2
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_darts.len()
    }

    pub fn n_faces(&self) -> usize {
        self.face_darts.len()
    }

    pub fn root(&self) -> DartId {
        self.root
    }

    /// Same map re-rooted at another dart.
    pub fn with_root(&self, root: DartId) -> Result<Self, MapError> {
        if (root as usize) >= self.n_darts() {
            return Err(MapError::RootOutOfRange(root));
        }
        let mut m = self.clone();
        m.root = root;
        Ok(m)
    }

    #[inline]
    pub fn alpha(&self, d: DartId) -> DartId {
        self.alpha[d as usize]
    }

    #[inline]
    pub fn sigma(&self, d: DartId) -> DartId {
        self.sigma[d as usize]
    }

    #[inline]
    pub fn sigma_inv(&self, d: DartId) -> DartId {
        self.sigma_inv[d as usize]
    }

    /// Next dart along the face on the left of `d`.
    #[inline]
    pub fn next_in_face(&self, d: DartId) -> DartId {
        self.sigma[self.alpha[d as usize] as usize]
    }

    #[inline]
    pub fn vertex_of(&self, d: DartId) -> VertexId {
        self.vertex_of[d as usize]
    }

    #[inline]
    pub fn face_of(&self, d: DartId) -> FaceId {
        self.face_of[d as usize]
    }

    /// Head vertex of a dart (origin of its opposite).
    #[inline]
    pub fn head_of(&self, d: DartId) -> VertexId {
        self.vertex_of[self.alpha[d as usize] as usize]
    }

    pub fn vertex_darts(&self, v: VertexId) -> &[DartId] {
        &self.vertex_darts[v as usize]
    }

    pub fn vertex_degree(&self, v: VertexId) -> usize {
        self.vertex_darts[v as usize].len()
    }

    /// All faces, each as its dart orbit in face-traversal order.
    pub fn faces(&self) -> &[Vec<DartId>] {
        &self.face_darts
    }

    pub fn face_darts_of(&self, f: FaceId) -> &[DartId] {
        &self.face_darts[f as usize]
    }

    pub fn face_degree(&self, f: FaceId) -> usize {
        self.face_darts[f as usize].len()
    }

    pub fn is_quadrangulation(&self) -> bool {
        self.face_darts.iter().all(|f| f.len() == 4)
    }

    /// True when `u` and `v` are joined by at least one edge.
    pub fn adjacent(&self, u: VertexId, v: VertexId) -> bool {
        self.vertex_darts[u as usize]
            .iter()
            .any(|&d| self.head_of(d) == v)
    }

    /// Exact graph distances from `source` to every vertex.
    pub fn bfs_distances(&self, source: VertexId) -> Vec<u32> {
        let nv = self.n_vertices();
        let mut dist = vec![u32::MAX; nv];
        let mut queue = std::collections::VecDeque::with_capacity(nv);
        dist[source as usize] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v as usize];
            for &d in &self.vertex_darts[v as usize] {
                let w = self.head_of(d);
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Canonical byte code of the rooted map.
    ///
    /// Darts are renumbered in discovery order of a deterministic
    /// traversal from the root (following `alpha`, then `sigma`), so two
    /// rooted maps get equal codes exactly when some dart bijection fixes
    /// the roots and conjugates both permutations.
    pub fn canonical_code(&self) -> Vec<u8> {
        let relab = self.canonical_relabelling();
        let n = self.n_darts();
        let mut inv = vec![0u32; n];
        for d in 0..n {
            inv[relab[d] as usize] = d as u32;
        }
        let mut code = Vec::with_capacity(8 + 8 * n);
        code.extend_from_slice(&(n as u32).to_le_bytes());
        for i in 0..n {
            let old = inv[i] as usize;
            code.extend_from_slice(&relab[self.alpha[old] as usize].to_le_bytes());
        }
        for i in 0..n {
            let old = inv[i] as usize;
            code.extend_from_slice(&relab[self.sigma[old] as usize].to_le_bytes());
        }
        code
    }

    /// New dart ids under the canonical traversal (root gets id 0).
    pub fn canonical_relabelling(&self) -> Vec<DartId> {
        let n = self.n_darts();
        let mut relab = vec![u32::MAX; n];
        let mut stack = vec![self.root];
        relab[self.root as usize] = 0;
        let mut next = 1u32;
        // Depth-first with a fixed expansion order; any deterministic rule
        // that only consults alpha and sigma works.
        while let Some(d) = stack.pop() {
            for nd in [self.sigma[d as usize], self.alpha[d as usize]] {
                if relab[nd as usize] == u32::MAX {
                    relab[nd as usize] = next;
                    next += 1;
                    stack.push(nd);
                }
            }
        }
        relab
    }
}

fn cycles(p: &[DartId]) -> (Vec<u32>, Vec<Vec<DartId>>) {
    let n = p.len();
    let mut id_of = vec![u32::MAX; n];
    let mut out: Vec<Vec<DartId>> = Vec::new();
    for start in 0..n {
        if id_of[start] != u32::MAX {
            continue;
        }
        let id = out.len() as u32;
        let mut orbit = Vec::new();
        let mut d = start;
        loop {
            id_of[d] = id;
            orbit.push(d as u32);
            d = p[d] as usize;
            if d == start {
                break;
            }
        }
        out.push(orbit);
    }
    (id_of, out)
}

/// Wire format for maps. Field order is fixed so that serialization is
/// byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MapJson {
    pub n_darts: u32,
    pub alpha: Vec<DartId>,
    pub sigma: Vec<DartId>,
    pub root: DartId,
    pub labels: Option<Vec<i64>>,
    pub marks: Option<Marks>,
}

/// Extra structure carried alongside a serialized map.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marks {
    Unicycle {
        internal_face: FaceId,
        marked_dart: Option<DartId>,
    },
    DelayedQuad {
        v0: VertexId,
        v1: VertexId,
        delay: i64,
    },
    Quadrilateral {
        upper_apex: VertexId,
        lower_apex: VertexId,
        upper_geodesic: Vec<VertexId>,
        upper_shuttle: Vec<VertexId>,
        lower_geodesic: Vec<VertexId>,
        lower_shuttle: Vec<VertexId>,
    },
}

impl MapJson {
    pub fn from_map(
        map: &CombinatorialMap,
        labels: Option<Vec<i64>>,
        marks: Option<Marks>,
    ) -> Self {
        MapJson {
            n_darts: map.n_darts() as u32,
            alpha: map.alpha.clone(),
            sigma: map.sigma.clone(),
            root: map.root,
            labels,
            marks,
        }
    }

    pub fn build_map(&self) -> Result<CombinatorialMap, MapError> {
        if self.alpha.len() != self.n_darts as usize || self.sigma.len() != self.n_darts as usize {
            return Err(MapError::NotPermutation);
        }
        CombinatorialMap::build(self.alpha.clone(), self.sigma.clone(), self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Loop on one vertex: alpha=(0 1), sigma=(0 1).
    pub fn loop_map() -> CombinatorialMap {
        CombinatorialMap::build(vec![1, 0], vec![1, 0], 0).unwrap()
    }

    /// Path on two edges: darts 0-1 and 2-3, middle vertex carries 1 and 2.
    pub fn two_edge_path() -> CombinatorialMap {
        CombinatorialMap::build(vec![1, 0, 3, 2], vec![0, 2, 1, 3], 0).unwrap()
    }

    #[test]
    fn loop_map_counts() {
        let m = loop_map();
        assert_eq!(m.n_vertices(), 1);
        assert_eq!(m.n_edges(), 1);
        assert_eq!(m.n_faces(), 2);
        let mut degs: Vec<usize> = m.faces().iter().map(|f| f.len()).collect();
        degs.sort_unstable();
        assert_eq!(degs, vec![1, 1]);
        assert_eq!(m.bfs_distances(0), vec![0]);
    }

    #[test]
    fn two_edge_path_counts() {
        let m = two_edge_path();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.n_edges(), 2);
        assert_eq!(m.n_faces(), 1);
        assert_eq!(m.face_degree(0), 4);
        // distances from an endpoint are 0, 1, 2 in some vertex order
        let src = m.vertex_of(0);
        let mut d = m.bfs_distances(src);
        d.sort_unstable();
        assert_eq!(d, vec![0, 1, 2]);
    }

    #[test]
    fn alpha_fixed_point_rejected() {
        let err = CombinatorialMap::build(vec![0, 1], vec![1, 0], 0).unwrap_err();
        assert_eq!(err, MapError::NotInvolution);
    }

    #[test]
    fn disconnected_rejected() {
        // two separate loops
        let err = CombinatorialMap::build(vec![1, 0, 3, 2], vec![1, 0, 3, 2], 0).unwrap_err();
        assert_eq!(err, MapError::NotConnected);
    }

    #[test]
    fn torus_rejected() {
        // two loops on one vertex interleaved: sigma = (0 2 1 3), classic genus-1 map
        let err = CombinatorialMap::build(vec![1, 0, 3, 2], vec![2, 3, 1, 0], 0).unwrap_err();
        assert!(matches!(err, MapError::NotGenusZero { chi: 0 }));
    }

    #[test]
    fn euler_and_degree_sum() {
        for m in [loop_map(), two_edge_path()] {
            let v = m.n_vertices() as i64;
            let e = m.n_edges() as i64;
            let f = m.n_faces() as i64;
            assert_eq!(v - e + f, 2);
            let deg_sum: usize = m.faces().iter().map(|f| f.len()).sum();
            assert_eq!(deg_sum, m.n_darts());
        }
    }

    #[test]
    fn canonical_code_invariant_under_relabelling() {
        // two-edge path with darts renamed by the permutation (0 2)(1 3):
        // edge {2,3} and edge {0,1} swap roles, root follows.
        let m1 = two_edge_path();
        let m2 = CombinatorialMap::build(vec![1, 0, 3, 2], vec![3, 1, 2, 0], 2).unwrap();
        assert_eq!(m1.canonical_code(), m2.canonical_code());
        assert_ne!(m1.canonical_code(), loop_map().canonical_code());
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let m = two_edge_path();
        let j = MapJson::from_map(
            &m,
            Some(vec![0, 1, 2]),
            Some(Marks::Unicycle {
                internal_face: 0,
                marked_dart: None,
            }),
        );
        let s1 = serde_json::to_string(&j).unwrap();
        let j2: MapJson = serde_json::from_str(&s1).unwrap();
        let s2 = serde_json::to_string(&j2).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(j, j2);
        let m2 = j2.build_map().unwrap();
        assert_eq!(m.canonical_code(), m2.canonical_code());
    }
}
