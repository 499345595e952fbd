//! Well-labelled unicycles, marked unicycles and vertebrates, together with
//! the cut/glue correspondence between marked unicycles and tilt-0
//! vertebrates.
//!
//! A unicycle is a planar map with exactly two faces; the faces are
//! distinguished as internal and external. Its 2-core is the unique cycle,
//! and the forward direction of the cycle is the one keeping the external
//! face on the right of each cycle dart (with our conventions the face on
//! the right of `d` is the orbit of `d` under `sigma ∘ alpha`).

use crate::builder::MapBuilder;
use crate::map::{CombinatorialMap, DartId, FaceId, MapError, MapJson, Marks, VertexId};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum StructureError {
    #[error("map error: {0}")]
    Map(#[from] MapError),
    #[error("a unicycle must have exactly two faces (got {0})")]
    NotUnicycle(usize),
    #[error("labels of adjacent vertices must differ by at most 1")]
    LabelStep,
    #[error("the base vertex must have label 0")]
    BaseLabelNonZero,
    #[error("label vector has wrong length")]
    LabelLength,
    #[error("internal face id out of range")]
    BadFaceId,
    #[error("marked dart must lie on the cycle with the external face on its right")]
    MarkNotOnCycle,
    #[error("the two distinguished vertices of a vertebrate must be distinct")]
    DegenerateVertebrate,
    #[error("operation requires tilt 0 (label of the far endpoint is {0})")]
    TiltNonZero(i64),
    #[error("serialized object carries wrong or missing marks")]
    BadMarks,
}

fn check_labels(map: &CombinatorialMap, labels: &[i64]) -> Result<(), StructureError> {
    if labels.len() != map.n_vertices() {
        return Err(StructureError::LabelLength);
    }
    for d in 0..map.n_darts() as DartId {
        let a = labels[map.vertex_of(d) as usize];
        let b = labels[map.head_of(d) as usize];
        if (a - b).abs() > 1 {
            return Err(StructureError::LabelStep);
        }
    }
    Ok(())
}

/// A rooted well-labelled unicycle. The root is the map root dart; the
/// root vertex carries label 0.
#[derive(Debug, Clone)]
pub struct LabelledUnicycle {
    map: CombinatorialMap,
    labels: Vec<i64>,
    internal_face: FaceId,
    external_face: FaceId,
}

impl LabelledUnicycle {
    pub fn new(
        map: CombinatorialMap,
        labels: Vec<i64>,
        internal_face: FaceId,
    ) -> Result<Self, StructureError> {
        if map.n_faces() != 2 {
            return Err(StructureError::NotUnicycle(map.n_faces()));
        }
        if internal_face > 1 {
            return Err(StructureError::BadFaceId);
        }
        check_labels(&map, &labels)?;
        if labels[map.vertex_of(map.root()) as usize] != 0 {
            return Err(StructureError::BaseLabelNonZero);
        }
        let external_face = 1 - internal_face;
        Ok(LabelledUnicycle {
            map,
            labels,
            internal_face,
            external_face,
        })
    }

    pub fn map(&self) -> &CombinatorialMap {
        &self.map
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn label(&self, v: VertexId) -> i64 {
        self.labels[v as usize]
    }

    pub fn internal_face(&self) -> FaceId {
        self.internal_face
    }

    pub fn external_face(&self) -> FaceId {
        self.external_face
    }

    pub fn n_edges(&self) -> usize {
        self.map.n_edges()
    }

    /// Darts of the 2-core (both directions), as a boolean mask.
    pub fn core_mask(&self) -> Vec<bool> {
        core_mask(&self.map)
    }

    /// Forward cycle darts: external face on the right, i.e. the darts of
    /// the core whose own face is the external one. Starts at the smallest
    /// forward dart.
    pub fn cycle_darts(&self) -> Vec<DartId> {
        let mask = self.core_mask();
        let start = (0..self.map.n_darts() as DartId)
            .find(|&d| mask[d as usize] && self.map.face_of(d) == self.external_face)
            .expect("unicycle has a cycle");
        walk_cycle(&self.map, &mask, start)
    }

    pub fn cycle_len(&self) -> usize {
        self.cycle_darts().len()
    }

    /// (cycle length, edges incident only to the external face, edges
    /// incident only to the internal face).
    pub fn cycle_stats(&self) -> CycleStats {
        let mask = self.core_mask();
        let cycle_len = mask.iter().filter(|&&b| b).count() / 2;
        let mut external_area = 0usize;
        let mut internal_area = 0usize;
        for d in 0..self.map.n_darts() as DartId {
            if d < self.map.alpha(d) && !mask[d as usize] {
                // tree edge: both sides lie in the same face
                debug_assert_eq!(self.map.face_of(d), self.map.face_of(self.map.alpha(d)));
                if self.map.face_of(d) == self.external_face {
                    external_area += 1;
                } else {
                    internal_area += 1;
                }
            }
        }
        CycleStats {
            cycle_len,
            external_area,
            internal_area,
        }
    }

    /// Canonical code: map code, labels in canonical dart order, and the
    /// canonical id of the internal face.
    pub fn canonical_code(&self) -> Vec<u8> {
        let mut code = self.map.canonical_code();
        let relab = self.map.canonical_relabelling();
        let n = self.map.n_darts();
        let mut inv = vec![0u32; n];
        for d in 0..n {
            inv[relab[d] as usize] = d as u32;
        }
        // one label byte-run per canonical dart (vertex labels repeated)
        for i in 0..n {
            code.extend_from_slice(&self.labels[self.map.vertex_of(inv[i]) as usize].to_le_bytes());
        }
        let int_min = self
            .map
            .face_darts_of(self.internal_face)
            .iter()
            .map(|&d| relab[d as usize])
            .min()
            .unwrap();
        code.extend_from_slice(&int_min.to_le_bytes());
        code
    }

    pub fn to_json(&self) -> MapJson {
        MapJson::from_map(
            &self.map,
            Some(self.labels.clone()),
            Some(Marks::Unicycle {
                internal_face: self.internal_face,
                marked_dart: None,
            }),
        )
    }

    pub fn from_json(j: &MapJson) -> Result<Self, StructureError> {
        let map = j.build_map()?;
        let labels = j.labels.clone().ok_or(StructureError::BadMarks)?;
        match j.marks {
            Some(Marks::Unicycle { internal_face, .. }) => Self::new(map, labels, internal_face),
            _ => Err(StructureError::BadMarks),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStats {
    pub cycle_len: usize,
    pub external_area: usize,
    pub internal_area: usize,
}

/// A labelled unicycle with a marked oriented cycle edge instead of a root
/// edge. The marked dart keeps the external face on its right and its
/// origin carries label 0. Internally the marked dart doubles as the map
/// root, which pins canonical codes and serialization.
#[derive(Debug, Clone)]
pub struct MarkedUnicycle {
    uni: LabelledUnicycle,
}

impl MarkedUnicycle {
    pub fn new(uni: LabelledUnicycle) -> Result<Self, StructureError> {
        let m = uni.map.root();
        let mask = core_mask(&uni.map);
        if !mask[m as usize] || uni.map.face_of(m) != uni.external_face {
            return Err(StructureError::MarkNotOnCycle);
        }
        Ok(MarkedUnicycle { uni })
    }

    pub fn unicycle(&self) -> &LabelledUnicycle {
        &self.uni
    }

    pub fn map(&self) -> &CombinatorialMap {
        &self.uni.map
    }

    pub fn labels(&self) -> &[i64] {
        &self.uni.labels
    }

    pub fn marked_dart(&self) -> DartId {
        self.uni.map.root()
    }

    pub fn n_edges(&self) -> usize {
        self.uni.map.n_edges()
    }

    pub fn cycle_stats(&self) -> CycleStats {
        self.uni.cycle_stats()
    }

    pub fn canonical_code(&self) -> Vec<u8> {
        self.uni.canonical_code()
    }

    /// Marks a cycle dart of a rooted unicycle and renormalizes labels to
    /// its origin.
    pub fn from_rooted(u: &LabelledUnicycle, cycle_dart: DartId) -> Result<Self, StructureError> {
        let map = u.map.with_root(cycle_dart)?;
        let shift = u.labels[map.vertex_of(cycle_dart) as usize];
        let labels = u.labels.iter().map(|&l| l - shift).collect();
        let uni = LabelledUnicycle::new(map, labels, u.internal_face)?;
        MarkedUnicycle::new(uni)
    }

    /// Forgets the mark, roots the unicycle at `root` and renormalizes
    /// labels to the new root vertex.
    pub fn to_rooted(&self, root: DartId) -> Result<LabelledUnicycle, StructureError> {
        let map = self.uni.map.with_root(root)?;
        let shift = self.uni.labels[map.vertex_of(root) as usize];
        let labels = self.uni.labels.iter().map(|&l| l - shift).collect();
        LabelledUnicycle::new(map, labels, self.uni.internal_face)
    }

    /// Cycle darts in the marked direction, starting at the marked dart.
    pub fn cycle_darts(&self) -> Vec<DartId> {
        let mask = core_mask(&self.uni.map);
        walk_cycle(&self.uni.map, &mask, self.marked_dart())
    }

    /// Splits the unicycle into its cycle and the plane forests hanging on
    /// each side of every cycle vertex.
    pub fn decompose(&self) -> UnicycleDecomposition {
        let map = &self.uni.map;
        let cycle_darts = self.cycle_darts();
        let k = cycle_darts.len();
        let cycle_vertices: Vec<VertexId> = cycle_darts.iter().map(|&d| map.vertex_of(d)).collect();
        let cycle_labels: Vec<i64> = cycle_vertices
            .iter()
            .map(|&v| self.uni.labels[v as usize])
            .collect();
        let mut internal_forests = Vec::with_capacity(k);
        let mut external_forests = Vec::with_capacity(k);
        for i in 0..k {
            let f = cycle_darts[i];
            let b = map.alpha(cycle_darts[(i + k - 1) % k]);
            let _v = cycle_vertices[i];
            // sigma-arc strictly between f and b holds the internal side
            let mut internal_roots = Vec::new();
            let mut d = map.sigma(f);
            while d != b {
                internal_roots.push(d);
                d = map.sigma(d);
            }
            let mut external_roots = Vec::new();
            let mut d = map.sigma(b);
            while d != f {
                external_roots.push(d);
                d = map.sigma(d);
            }
            for &r in &internal_roots {
                debug_assert_eq!(map.face_of(r), self.uni.internal_face);
            }
            for &r in &external_roots {
                debug_assert_eq!(map.face_of(r), self.uni.external_face);
            }
            internal_forests.push(ForestCode::extract(map, &self.uni.labels, &internal_roots));
            external_forests.push(ForestCode::extract(map, &self.uni.labels, &external_roots));
        }
        UnicycleDecomposition {
            cycle_labels,
            internal_forests,
            external_forests,
        }
    }
}

/// Cycle labels (position 0 is the marked vertex, label 0) plus the side
/// forests at each cycle position, in cycle order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnicycleDecomposition {
    pub cycle_labels: Vec<i64>,
    pub internal_forests: Vec<ForestCode>,
    pub external_forests: Vec<ForestCode>,
}

impl UnicycleDecomposition {
    pub fn cycle_len(&self) -> usize {
        self.cycle_labels.len()
    }

    pub fn external_area(&self) -> usize {
        self.external_forests.iter().map(|f| f.n_edges()).sum()
    }

    pub fn internal_area(&self) -> usize {
        self.internal_forests.iter().map(|f| f.n_edges()).sum()
    }

    pub fn n_edges(&self) -> usize {
        self.cycle_len() + self.external_area() + self.internal_area()
    }

    /// Rebuilds the marked unicycle. Rotations: at cycle position i the
    /// order is (forward dart, internal forest, backward dart, external
    /// forest); tree vertices carry (parent dart, children).
    pub fn assemble(&self) -> Result<MarkedUnicycle, StructureError> {
        let k = self.cycle_len();
        assert!(k >= 1);
        let mut b = MapBuilder::new();
        let mut labels = Vec::new();
        for &l in &self.cycle_labels {
            b.add_vertex();
            labels.push(l);
        }
        // cycle edges: forward dart f_i at position i
        let mut fwd = Vec::with_capacity(k);
        let mut bwd = Vec::with_capacity(k);
        for _ in 0..k {
            let (f, bk) = b.add_edge();
            fwd.push(f);
            bwd.push(bk);
        }
        for i in 0..k {
            let v = i as VertexId;
            b.attach(v, fwd[i]);
            self.internal_forests[i].attach(&mut b, v, &mut labels);
            b.attach(v, bwd[(i + k - 1) % k]);
            self.external_forests[i].attach(&mut b, v, &mut labels);
        }
        let map = b.build(fwd[0])?;
        let internal_face = map.face_of(map.alpha(fwd[0]));
        debug_assert_ne!(internal_face, map.face_of(fwd[0]));
        let uni = LabelledUnicycle::new(map, labels, internal_face)?;
        MarkedUnicycle::new(uni)
    }
}

/// A plane forest hanging at an anchor vertex, as a preorder walk.
/// `Open(l)` descends into a new child with absolute label `l`, `Close`
/// returns to the parent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForestCode {
    pub events: Vec<ForestEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestEvent {
    Open(i64),
    Close,
}

impl ForestCode {
    pub fn n_edges(&self) -> usize {
        self.events.len() / 2
    }

    /// Reads the forest hanging below the given root darts (in order),
    /// following sigma rotations.
    pub fn extract(map: &CombinatorialMap, labels: &[i64], roots: &[DartId]) -> ForestCode {
        let mut events = Vec::new();
        // stack entries: (current dart pointing from parent into child, next
        // sibling dart at the child to examine)
        for &r in roots {
            let mut stack: Vec<(DartId, DartId)> = Vec::new();
            events.push(ForestEvent::Open(labels[map.head_of(r) as usize]));
            stack.push((r, map.sigma(map.alpha(r))));
            while let Some((d, next)) = stack.pop() {
                if next == map.alpha(d) {
                    events.push(ForestEvent::Close);
                } else {
                    stack.push((d, map.sigma(next)));
                    events.push(ForestEvent::Open(labels[map.head_of(next) as usize]));
                    stack.push((next, map.sigma(map.alpha(next))));
                }
            }
        }
        ForestCode { events }
    }

    /// Attaches the forest to `anchor`, pushing root darts in order and
    /// giving every tree vertex the rotation (parent dart, children...).
    pub(crate) fn attach(&self, b: &mut MapBuilder, anchor: VertexId, labels: &mut Vec<i64>) {
        let mut stack: Vec<VertexId> = vec![anchor];
        for ev in &self.events {
            match *ev {
                ForestEvent::Open(l) => {
                    let parent = *stack.last().unwrap();
                    let child = b.add_vertex();
                    labels.push(l);
                    let (down, up) = b.add_edge();
                    b.attach(parent, down);
                    b.attach(child, up);
                    stack.push(child);
                }
                ForestEvent::Close => {
                    stack.pop();
                }
            }
        }
        debug_assert_eq!(stack.len(), 1);
    }

    /// Per-tree checks used by property tests: events are balanced and
    /// labels change by at most one along edges given the anchor label.
    pub fn is_valid_from(&self, anchor_label: i64) -> bool {
        let mut stack = vec![anchor_label];
        for ev in &self.events {
            match *ev {
                ForestEvent::Open(l) => {
                    if (l - stack.last().unwrap()).abs() > 1 {
                        return false;
                    }
                    stack.push(l);
                }
                ForestEvent::Close => {
                    if stack.len() == 1 {
                        return false;
                    }
                    stack.pop();
                }
            }
        }
        stack.len() == 1
    }
}

fn core_mask(map: &CombinatorialMap) -> Vec<bool> {
    let nd = map.n_darts();
    let mut alive = vec![true; nd];
    let mut deg: Vec<usize> = (0..map.n_vertices())
        .map(|v| map.vertex_degree(v as VertexId))
        .collect();
    let mut queue: Vec<VertexId> = (0..map.n_vertices() as VertexId)
        .filter(|&v| deg[v as usize] == 1)
        .collect();
    while let Some(v) = queue.pop() {
        if deg[v as usize] != 1 {
            continue;
        }
        let &d = map
            .vertex_darts(v)
            .iter()
            .find(|&&d| alive[d as usize])
            .expect("leaf has a live dart");
        alive[d as usize] = false;
        alive[map.alpha(d) as usize] = false;
        deg[v as usize] = 0;
        let w = map.head_of(d);
        deg[w as usize] -= 1;
        if deg[w as usize] == 1 {
            queue.push(w);
        }
    }
    alive
}

fn walk_cycle(map: &CombinatorialMap, mask: &[bool], start: DartId) -> Vec<DartId> {
    let mut out = Vec::new();
    let mut d = start;
    loop {
        out.push(d);
        let v = map.head_of(d);
        let back = map.alpha(d);
        let next = map
            .vertex_darts(v)
            .iter()
            .copied()
            .find(|&e| mask[e as usize] && e != back)
            .expect("core vertex has two core darts");
        d = next;
        if d == start {
            break;
        }
    }
    out
}

/// A well-labelled vertebrate: a plane tree with two distinct marked
/// vertices. The floor is the tree path between them; trees hanging on
/// the floor are split into an upper and a lower side by the rotation at
/// each floor vertex. The map root is the first floor dart at `rho`.
#[derive(Debug, Clone)]
pub struct Vertebrate {
    map: CombinatorialMap,
    rho: VertexId,
    rho_bar: VertexId,
    labels: Vec<i64>,
}

impl Vertebrate {
    pub fn new(
        map: CombinatorialMap,
        rho: VertexId,
        rho_bar: VertexId,
        labels: Vec<i64>,
    ) -> Result<Self, StructureError> {
        if map.n_faces() != 1 {
            return Err(StructureError::NotUnicycle(map.n_faces()));
        }
        if rho == rho_bar {
            return Err(StructureError::DegenerateVertebrate);
        }
        check_labels(&map, &labels)?;
        if labels[rho as usize] != 0 {
            return Err(StructureError::BaseLabelNonZero);
        }
        Ok(Vertebrate {
            map,
            rho,
            rho_bar,
            labels,
        })
    }

    pub fn map(&self) -> &CombinatorialMap {
        &self.map
    }

    pub fn rho(&self) -> VertexId {
        self.rho
    }

    pub fn rho_bar(&self) -> VertexId {
        self.rho_bar
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn n_edges(&self) -> usize {
        self.map.n_edges()
    }

    pub fn tilt(&self) -> i64 {
        -self.labels[self.rho_bar as usize]
    }

    /// Forward floor darts from rho to rho_bar.
    pub fn floor_darts(&self) -> Vec<DartId> {
        // parent BFS from rho
        let nv = self.map.n_vertices();
        let mut parent_dart = vec![u32::MAX; nv];
        let mut sevn = vec![false; nv];
        sevn[self.rho as usize] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(self.rho);
        while let Some(v) = queue.pop_front() {
            if v == self.rho_bar {
                break;
            }
            for &d in self.map.vertex_darts(v) {
                let w = self.map.head_of(d);
                if !sevn[w as usize] {
                    sevn[w as usize] = true;
                    parent_dart[w as usize] = d;
                    queue.push_back(w);
                }
            }
        }
        let mut path = Vec::new();
        let mut v = self.rho_bar;
        while v != self.rho {
            let d = parent_dart[v as usize];
            path.push(d);
            v = self.map.vertex_of(d);
        }
        path.reverse();
        path
    }

    pub fn spine_len(&self) -> usize {
        self.floor_darts().len()
    }

    /// (width, upper area, lower area).
    pub fn stats(&self) -> (usize, usize, usize) {
        let d = self.decompose();
        (d.spine_len(), d.upper_area(), d.lower_area())
    }

    /// Structural split: floor labels plus the upper and lower forests at
    /// every floor position. Upper trees sit strictly between the forward
    /// and backward floor darts in sigma order.
    pub fn decompose(&self) -> VertebrateDecomposition {
        let map = &self.map;
        let floor = self.floor_darts();
        let h = floor.len();
        let mut floor_labels = Vec::with_capacity(h + 1);
        floor_labels.push(self.labels[self.rho as usize]);
        for &d in &floor {
            floor_labels.push(self.labels[map.head_of(d) as usize]);
        }
        let mut upper = Vec::with_capacity(h + 1);
        let mut lower = Vec::with_capacity(h + 1);
        for j in 0..=h {
            // sigma-arc between the forward dart (or, at rho_bar, wrapping
            // from the backward dart) and the next floor dart.
            let (from, upto) = if j == 0 {
                (floor[0], floor[0])
            } else if j == h {
                (map.alpha(floor[h - 1]), map.alpha(floor[h - 1]))
            } else {
                (floor[j], map.alpha(floor[j - 1]))
            };
            let mut up_roots = Vec::new();
            let mut d = map.sigma(from);
            while d != upto {
                up_roots.push(d);
                d = map.sigma(d);
            }
            if j == 0 {
                upper.push(ForestCode::extract(map, &self.labels, &up_roots));
                lower.push(ForestCode::default());
            } else if j == h {
                upper.push(ForestCode::default());
                lower.push(ForestCode::extract(map, &self.labels, &up_roots));
            } else {
                upper.push(ForestCode::extract(map, &self.labels, &up_roots));
                let mut low_roots = Vec::new();
                let mut d = map.sigma(upto);
                while d != floor[j] {
                    low_roots.push(d);
                    d = map.sigma(d);
                }
                lower.push(ForestCode::extract(map, &self.labels, &low_roots));
            }
        }
        VertebrateDecomposition {
            floor_labels,
            upper,
            lower,
        }
    }

    pub fn canonical_code(&self) -> Vec<u8> {
        let mut code = self.map.canonical_code();
        let relab = self.map.canonical_relabelling();
        let n = self.map.n_darts();
        let mut inv = vec![0u32; n];
        for d in 0..n {
            inv[relab[d] as usize] = d as u32;
        }
        for i in 0..n {
            code.extend_from_slice(&self.labels[self.map.vertex_of(inv[i]) as usize].to_le_bytes());
        }
        // rho is the root vertex; record rho_bar via its smallest canonical dart
        let rb_min = self
            .map
            .vertex_darts(self.rho_bar)
            .iter()
            .map(|&d| relab[d as usize])
            .min()
            .unwrap();
        code.extend_from_slice(&rb_min.to_le_bytes());
        code
    }
}

/// Floor labels (length h+1, from rho to rho_bar) plus per-position side
/// forests; `upper[h]` and `lower[0]` are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertebrateDecomposition {
    pub floor_labels: Vec<i64>,
    pub upper: Vec<ForestCode>,
    pub lower: Vec<ForestCode>,
}

impl VertebrateDecomposition {
    pub fn spine_len(&self) -> usize {
        self.floor_labels.len() - 1
    }

    pub fn upper_area(&self) -> usize {
        self.upper.iter().map(|f| f.n_edges()).sum()
    }

    pub fn lower_area(&self) -> usize {
        self.lower.iter().map(|f| f.n_edges()).sum()
    }

    pub fn n_edges(&self) -> usize {
        self.spine_len() + self.upper_area() + self.lower_area()
    }

    /// Builds the vertebrate map; rotation at a floor vertex is (forward
    /// dart, upper forest, backward dart, lower forest).
    pub fn assemble(&self) -> Result<Vertebrate, StructureError> {
        let h = self.spine_len();
        assert!(h >= 1);
        let mut b = MapBuilder::new();
        let mut labels = Vec::new();
        for &l in &self.floor_labels {
            b.add_vertex();
            labels.push(l);
        }
        let mut fwd = Vec::with_capacity(h);
        let mut bwd = Vec::with_capacity(h);
        for _ in 0..h {
            let (f, bk) = b.add_edge();
            fwd.push(f);
            bwd.push(bk);
        }
        for j in 0..=h {
            let v = j as VertexId;
            if j < h {
                b.attach(v, fwd[j]);
            }
            self.upper[j].attach(&mut b, v, &mut labels);
            if j > 0 {
                b.attach(v, bwd[j - 1]);
            }
            self.lower[j].attach(&mut b, v, &mut labels);
        }
        let map = b.build(fwd[0])?;
        Vertebrate::new(map, 0, h as VertexId, labels)
    }
}

/// Cuts a marked unicycle at its marked vertex, producing a tilt-0
/// vertebrate: the internal side becomes the upper part, the floor runs
/// through the cycle positions in reverse order.
pub fn phi(u: &MarkedUnicycle) -> Vertebrate {
    let dec = u.decompose();
    let k = dec.cycle_len();
    let mut floor_labels = Vec::with_capacity(k + 1);
    let mut upper = Vec::with_capacity(k + 1);
    let mut lower = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let p = (k - j) % k;
        floor_labels.push(dec.cycle_labels[p]);
        if j < k {
            upper.push(dec.internal_forests[p].clone());
        } else {
            upper.push(ForestCode::default());
        }
        if j > 0 {
            lower.push(dec.external_forests[p].clone());
        } else {
            lower.push(ForestCode::default());
        }
    }
    VertebrateDecomposition {
        floor_labels,
        upper,
        lower,
    }
    .assemble()
    .expect("cut of a valid unicycle is a valid vertebrate")
}

/// Glues the two floor ends of a tilt-0 vertebrate back into a marked
/// unicycle; inverse of [`phi`].
pub fn phi_inv(v: &Vertebrate) -> Result<MarkedUnicycle, StructureError> {
    if v.tilt() != 0 {
        return Err(StructureError::TiltNonZero(v.labels[v.rho_bar as usize]));
    }
    let dec = v.decompose();
    let k = dec.spine_len();
    let mut cycle_labels = vec![0i64; k];
    let mut internal_forests = vec![ForestCode::default(); k];
    let mut external_forests = vec![ForestCode::default(); k];
    for j in 0..=k {
        let p = (k - j) % k;
        if j < k {
            cycle_labels[p] = dec.floor_labels[j];
            internal_forests[p] = dec.upper[j].clone();
        }
        if j > 0 {
            external_forests[p] = dec.lower[j].clone();
        }
    }
    UnicycleDecomposition {
        cycle_labels,
        internal_forests,
        external_forests,
    }
    .assemble()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The labelled loop: smallest unicycle.
    pub fn loop_unicycle() -> MarkedUnicycle {
        UnicycleDecomposition {
            cycle_labels: vec![0],
            internal_forests: vec![ForestCode::default()],
            external_forests: vec![ForestCode::default()],
        }
        .assemble()
        .unwrap()
    }

    #[test]
    fn loop_unicycle_stats() {
        let u = loop_unicycle();
        assert_eq!(
            u.cycle_stats(),
            CycleStats {
                cycle_len: 1,
                external_area: 0,
                internal_area: 0
            }
        );
        assert_eq!(u.n_edges(), 1);
    }

    #[test]
    fn loop_phi_round_trip() {
        let u = loop_unicycle();
        let v = phi(&u);
        assert_eq!(v.n_edges(), 1);
        let (h, a, abar) = v.stats();
        assert_eq!((h, a, abar), (1, 0, 0));
        assert_eq!(v.tilt(), 0);
        assert_eq!(v.labels(), &[0, 0]);
        let back = phi_inv(&v).unwrap();
        assert_eq!(back.canonical_code(), u.canonical_code());
    }

    /// A cycle of length 3 with a 4-edge external forest and a 3-edge
    /// internal forest.
    fn three_cycle_instance() -> MarkedUnicycle {
        use ForestEvent::*;
        let path3 = ForestCode {
            events: vec![Open(1), Open(1), Open(2), Close, Close, Close],
        };
        let single = |l| ForestCode {
            events: vec![Open(l), Close],
        };
        UnicycleDecomposition {
            cycle_labels: vec![0, 1, 0],
            internal_forests: vec![single(-1), single(2), single(1)],
            external_forests: vec![path3.clone(), single(0), ForestCode::default()],
        }
        .assemble()
        .unwrap()
    }

    #[test]
    fn fig_like_instance_stats() {
        let u = three_cycle_instance();
        let s = u.cycle_stats();
        assert_eq!(s.cycle_len, 3);
        assert_eq!(s.external_area + s.internal_area, 7);
        assert_eq!(
            s,
            CycleStats {
                cycle_len: 3,
                external_area: 4,
                internal_area: 3
            }
        );
        assert_eq!(u.n_edges(), 10);
    }

    #[test]
    fn decompose_assemble_round_trip() {
        let u = three_cycle_instance();
        let dec = u.decompose();
        let rebuilt = dec.assemble().unwrap();
        assert_eq!(rebuilt.canonical_code(), u.canonical_code());
        assert_eq!(dec, rebuilt.decompose());
    }

    #[test]
    fn phi_round_trip_preserves_widths_and_areas() {
        let u = three_cycle_instance();
        let v = phi(&u);
        let s = u.cycle_stats();
        let (h, a, abar) = v.stats();
        assert_eq!(h, s.cycle_len);
        assert_eq!(a, s.internal_area);
        assert_eq!(abar, s.external_area);
        assert_eq!(v.n_edges(), u.n_edges());
        let back = phi_inv(&v).unwrap();
        assert_eq!(back.canonical_code(), u.canonical_code());
    }

    #[test]
    fn phi_inv_rejects_nonzero_tilt() {
        use ForestEvent::*;
        // spine of length 1 with tilt 1: floor labels 0, -1
        let dec = VertebrateDecomposition {
            floor_labels: vec![0, -1],
            upper: vec![ForestCode::default(), ForestCode::default()],
            lower: vec![ForestCode::default(), ForestCode { events: vec![Open(-1), Close] }],
        };
        let v = dec.assemble().unwrap();
        assert_eq!(v.tilt(), 1);
        assert_eq!(phi_inv(&v).unwrap_err(), StructureError::TiltNonZero(-1));
    }

    #[test]
    fn rooted_marked_conversion() {
        let u = three_cycle_instance();
        // forget the mark, root somewhere in a tree, then re-mark
        let rooted = u.to_rooted(5).unwrap();
        assert_eq!(rooted.labels()[rooted.map().vertex_of(5) as usize], 0);
        let cyc = rooted.cycle_darts();
        assert_eq!(cyc.len(), 3);
        let re = MarkedUnicycle::from_rooted(&rooted, u.marked_dart()).unwrap();
        assert_eq!(re.canonical_code(), u.canonical_code());
    }
}
