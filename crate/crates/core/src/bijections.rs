//! The corner-successor constructions: unicycles to delayed
//! quadrangulations, vertebrates to quadrilaterals with geodesic sides,
//! and the gluing that makes the two routes agree.
//!
//! In every face, each corner is linked by an arc to the next corner
//! (cyclically for unicycle faces, forward-only for vertebrate contours)
//! whose label is one less; corners whose label is minimal link to a fresh
//! vertex (one per unicycle face) or to a shuttle vertex of the matching
//! label (vertebrates). Original edges are erased. Arcs nest without
//! crossing, which fixes the rotation system of the image: inside a corner
//! the incoming arcs sit in pop order of the matching stack followed by
//! the outgoing arc, and around a fresh vertex the arcs appear in reverse
//! face-walk order.

use crate::labelled::{phi, LabelledUnicycle, MarkedUnicycle, StructureError, Vertebrate};
use crate::map::{CombinatorialMap, DartId, MapError, MapJson, Marks, VertexId};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum BijectionError {
    #[error("input is not a valid well-labelled unicycle: {0}")]
    InvalidUnicycle(String),
    #[error("construction requires tilt 0 (got {0})")]
    TiltNonZero(i64),
    #[error("geodesic/shuttle length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("structure error: {0}")]
    Structure(#[from] StructureError),
    #[error("map error: {0}")]
    Map(#[from] MapError),
}

/// The two possible orientations of the image's root edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Forward,
    Reverse,
}

/// A rooted quadrangulation with two distinguished vertices and a delay.
/// `v0` is the vertex created in the external face, `v1` the one created
/// in the internal face; the delay is `label(v1) - label(v0)`.
#[derive(Debug, Clone)]
pub struct DelayedQuadrangulation {
    map: CombinatorialMap,
    labels: Vec<i64>,
    v0: VertexId,
    v1: VertexId,
    delay: i64,
}

impl DelayedQuadrangulation {
    pub fn new(
        map: CombinatorialMap,
        labels: Vec<i64>,
        v0: VertexId,
        v1: VertexId,
        delay: i64,
    ) -> Self {
        DelayedQuadrangulation {
            map,
            labels,
            v0,
            v1,
            delay,
        }
    }

    pub fn map(&self) -> &CombinatorialMap {
        &self.map
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn v0(&self) -> VertexId {
        self.v0
    }

    pub fn v1(&self) -> VertexId {
        self.v1
    }

    pub fn delay(&self) -> i64 {
        self.delay
    }

    /// Graph distance between the two distinguished vertices.
    pub fn pole_distance(&self) -> u32 {
        self.map.bfs_distances(self.v0)[self.v1 as usize]
    }

    /// Full validity: quadrangulation, distinct non-adjacent poles, delay
    /// strictly dominated by and of the same parity as their distance.
    pub fn validate(&self) -> Result<(), String> {
        if !self.map.is_quadrangulation() {
            return Err("not a quadrangulation".into());
        }
        if self.v0 == self.v1 {
            return Err("poles coincide".into());
        }
        if self.map.adjacent(self.v0, self.v1) {
            return Err("poles are adjacent".into());
        }
        let d = self.pole_distance() as i64;
        if self.delay.abs() >= d {
            return Err(format!("delay {} not below distance {}", self.delay, d));
        }
        if (self.delay - d).rem_euclid(2) != 0 {
            return Err(format!(
                "delay {} has wrong parity for distance {}",
                self.delay, d
            ));
        }
        Ok(())
    }

    /// Canonical code of the rooted bi-pointed delayed map (labels are
    /// construction artifacts and excluded).
    pub fn canonical_code(&self) -> Vec<u8> {
        let mut code = self.map.canonical_code();
        let relab = self.map.canonical_relabelling();
        for v in [self.v0, self.v1] {
            let vmin = self
                .map
                .vertex_darts(v)
                .iter()
                .map(|&d| relab[d as usize])
                .min()
                .unwrap();
            code.extend_from_slice(&vmin.to_le_bytes());
        }
        code.extend_from_slice(&self.delay.to_le_bytes());
        code
    }

    pub fn to_json(&self) -> MapJson {
        MapJson::from_map(
            &self.map,
            Some(self.labels.clone()),
            Some(Marks::DelayedQuad {
                v0: self.v0,
                v1: self.v1,
                delay: self.delay,
            }),
        )
    }

    pub fn from_json(j: &MapJson) -> Result<Self, BijectionError> {
        let map = j.build_map()?;
        let labels = j.labels.clone().unwrap_or_default();
        match j.marks {
            Some(Marks::DelayedQuad { v0, v1, delay }) => {
                Ok(DelayedQuadrangulation::new(map, labels, v0, v1, delay))
            }
            _ => Err(BijectionError::Structure(StructureError::BadMarks)),
        }
    }
}

/// Outcome of the matching-bracket successor scan over one corner
/// sequence.
struct SuccScan {
    /// successor position per corner, None for label-minimal corners
    succ: Vec<Option<usize>>,
    /// per corner, the source positions of incoming arcs in pop order
    incoming: Vec<Vec<usize>>,
}

/// One stack pass (two for cyclic sequences) linking each corner to the
/// first later corner whose label is one less.
fn successor_scan(labels: &[i64], cyclic: bool) -> SuccScan {
    let m = labels.len();
    let mut succ = vec![None; m];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut stack: Vec<usize> = Vec::new();
    let passes = if cyclic { 2 } else { 1 };
    for pass in 0..passes {
        for j in 0..m {
            let l = labels[j];
            while let Some(&top) = stack.last() {
                if labels[top] == l + 1 {
                    succ[top] = Some(j);
                    incoming[j].push(top);
                    stack.pop();
                } else {
                    break;
                }
            }
            // in the forward-only scan the last corner emits no arc
            if pass == 0 && (cyclic || j + 1 < m) {
                stack.push(j);
            }
        }
    }
    SuccScan { succ, incoming }
}

/// Embedding conventions for the arc drawing (exercised by tests; the
/// public entry point uses the planar set).
#[derive(Debug, Clone, Copy)]
pub(crate) struct CvsConventions {
    pub out_first: bool,
    pub incoming_reversed: bool,
    pub fresh_reversed: bool,
}

pub(crate) const PLANAR_CONVENTIONS: CvsConventions = CvsConventions {
    out_first: false,
    incoming_reversed: false,
    fresh_reversed: true,
};

/// Applies the corner-successor construction to a rooted well-labelled
/// unicycle. The root of the image is the arc drawn from the root corner,
/// oriented away from it for `Forward`.
pub fn cvs_unicycle(
    u: &LabelledUnicycle,
    orientation: Orientation,
) -> Result<DelayedQuadrangulation, BijectionError> {
    cvs_unicycle_with(u, orientation, PLANAR_CONVENTIONS)
}

pub(crate) fn cvs_unicycle_with(
    u: &LabelledUnicycle,
    orientation: Orientation,
    conv: CvsConventions,
) -> Result<DelayedQuadrangulation, BijectionError> {
    let map = u.map();
    let nd = map.n_darts();
    let n = map.n_edges();

    // One arc per corner; the corner starting at dart x owns the arc pair
    // (2x, 2x+1) with 2x attached at the corner itself.
    let mut alpha: Vec<DartId> = Vec::with_capacity(2 * nd);
    for x in 0..nd as DartId {
        alpha.push(2 * x + 1);
        alpha.push(2 * x);
    }
    // per corner the slot list [incoming in pop order..., out]
    let mut slots: Vec<Vec<DartId>> = vec![Vec::new(); nd];
    // fresh vertices: rotation is the reverse walk order of their sources
    let mut fresh_rot: Vec<Vec<DartId>> = vec![Vec::new(); 2];
    let mut fresh_label = [0i64; 2];

    for (side, face) in [u.external_face(), u.internal_face()]
        .into_iter()
        .enumerate()
    {
        let orbit = map.face_darts_of(face);
        let corners: Vec<DartId> = orbit.iter().map(|&d| map.sigma_inv(d)).collect();
        let labels: Vec<i64> = orbit.iter().map(|&d| u.label(map.vertex_of(d))).collect();
        let scan = successor_scan(&labels, true);
        let min = *labels.iter().min().expect("nonempty face");
        fresh_label[side] = min - 1;
        let mut to_fresh: Vec<DartId> = Vec::new();
        for (j, &x) in corners.iter().enumerate() {
            let mut incoming: Vec<DartId> = scan.incoming[j]
                .iter()
                .map(|&src| 2 * corners[src] + 1)
                .collect();
            if conv.incoming_reversed {
                incoming.reverse();
            }
            if scan.succ[j].is_none() {
                debug_assert_eq!(labels[j], min);
                to_fresh.push(2 * x + 1);
            }
            if conv.out_first {
                slots[x as usize].push(2 * x);
                slots[x as usize].extend_from_slice(&incoming);
            } else {
                slots[x as usize].extend_from_slice(&incoming);
                slots[x as usize].push(2 * x);
            }
        }
        if conv.fresh_reversed {
            to_fresh.reverse();
        }
        fresh_rot[side] = to_fresh;
    }

    // rotations: original vertices keep their corner order; the two fresh
    // vertices follow.
    let mut sigma = vec![u32::MAX; 2 * nd];
    {
        let mut chain = |darts: &[DartId]| {
            for (i, &d) in darts.iter().enumerate() {
                sigma[d as usize] = darts[(i + 1) % darts.len()];
            }
        };
        for v in 0..map.n_vertices() as VertexId {
            let mut rot: Vec<DartId> = Vec::new();
            for &x in map.vertex_darts(v) {
                rot.extend_from_slice(&slots[x as usize]);
            }
            chain(&rot);
        }
        chain(&fresh_rot[0]);
        chain(&fresh_rot[1]);
    }

    let root_corner = map.root();
    let root = match orientation {
        Orientation::Forward => 2 * root_corner,
        Orientation::Reverse => 2 * root_corner + 1,
    };
    let new_map = CombinatorialMap::build(alpha, sigma, root)
        .map_err(|e| BijectionError::InvalidUnicycle(e.to_string()))?;
    if new_map.n_faces() != n || !new_map.is_quadrangulation() {
        return Err(BijectionError::InvalidUnicycle(
            "image is not a quadrangulation with n faces".into(),
        ));
    }

    // dart 2x originates at the vertex of the old dart x
    let mut labels_new = vec![0i64; new_map.n_vertices()];
    for x in 0..nd as DartId {
        labels_new[new_map.vertex_of(2 * x) as usize] = u.label(map.vertex_of(x));
    }
    let v0 = new_map.vertex_of(fresh_rot[0][0]);
    let v1 = new_map.vertex_of(fresh_rot[1][0]);
    labels_new[v0 as usize] = fresh_label[0];
    labels_new[v1 as usize] = fresh_label[1];
    let delay = fresh_label[1] - fresh_label[0];
    Ok(DelayedQuadrangulation::new(
        new_map, labels_new, v0, v1, delay,
    ))
}

/// A quadrangulation of the plane with one distinguished face whose
/// boundary splits into four geodesics: on each side a left-most geodesic
/// from a floor end to the apex, plus the shuttle reaching the same apex
/// from the other floor end.
#[derive(Debug, Clone)]
pub struct QuadrilateralGS {
    map: CombinatorialMap,
    labels: Vec<i64>,
    upper_apex: VertexId,
    lower_apex: VertexId,
    upper_geodesic: Vec<VertexId>,
    upper_shuttle: Vec<VertexId>,
    lower_geodesic: Vec<VertexId>,
    lower_shuttle: Vec<VertexId>,
    upper_geodesic_darts: Vec<DartId>,
    upper_shuttle_darts: Vec<DartId>,
    lower_geodesic_darts: Vec<DartId>,
    lower_shuttle_darts: Vec<DartId>,
}

impl QuadrilateralGS {
    pub fn map(&self) -> &CombinatorialMap {
        &self.map
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn upper_apex(&self) -> VertexId {
        self.upper_apex
    }

    pub fn lower_apex(&self) -> VertexId {
        self.lower_apex
    }

    pub fn upper_geodesic(&self) -> &[VertexId] {
        &self.upper_geodesic
    }

    pub fn upper_shuttle(&self) -> &[VertexId] {
        &self.upper_shuttle
    }

    pub fn lower_geodesic(&self) -> &[VertexId] {
        &self.lower_geodesic
    }

    pub fn lower_shuttle(&self) -> &[VertexId] {
        &self.lower_shuttle
    }

    /// Vertices carrying the reference measure: everything outside the
    /// two shuttles.
    pub fn measure_support(&self) -> Vec<VertexId> {
        let mut excluded = vec![false; self.map.n_vertices()];
        for &v in self.upper_shuttle.iter().chain(&self.lower_shuttle) {
            excluded[v as usize] = true;
        }
        (0..self.map.n_vertices() as VertexId)
            .filter(|&v| !excluded[v as usize])
            .collect()
    }

    /// Checks facial degrees and that the four marked paths really are
    /// geodesics meeting only at their apex.
    pub fn validate(&self) -> Result<(), String> {
        let odd = self.map.faces().iter().filter(|f| f.len() != 4).count();
        if odd > 1 {
            return Err(format!("{} non-quadrangular faces", odd));
        }
        for (geo, shut, apex) in [
            (&self.upper_geodesic, &self.upper_shuttle, self.upper_apex),
            (&self.lower_geodesic, &self.lower_shuttle, self.lower_apex),
        ] {
            if geo.len() != shut.len() {
                return Err("tilt-0 sides must have equal lengths".into());
            }
            let dist = self.map.bfs_distances(apex);
            for path in [geo, shut] {
                if *path.last().unwrap() != apex {
                    return Err("marked path does not end at its apex".into());
                }
                for (i, &v) in path.iter().enumerate() {
                    if dist[v as usize] as usize != path.len() - 1 - i {
                        return Err("marked path is not a geodesic".into());
                    }
                }
            }
            let shared: Vec<_> = geo.iter().filter(|v| shut.contains(v)).collect();
            if shared != vec![&apex] {
                return Err("geodesic and shuttle meet away from the apex".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> MapJson {
        MapJson::from_map(
            &self.map,
            Some(self.labels.clone()),
            Some(Marks::Quadrilateral {
                upper_apex: self.upper_apex,
                lower_apex: self.lower_apex,
                upper_geodesic: self.upper_geodesic.clone(),
                upper_shuttle: self.upper_shuttle.clone(),
                lower_geodesic: self.lower_geodesic.clone(),
                lower_shuttle: self.lower_shuttle.clone(),
            }),
        )
    }
}

/// Corner stream of one side of a vertebrate: (vertex, slot) handles plus
/// labels, in contour order.
struct SideSeq {
    corners: Vec<(VertexId, usize)>,
    labels: Vec<i64>,
}

/// Per-side output of the scan: arcs, shuttle chain and marked paths.
struct SideOut {
    geodesic_internal: Vec<VertexId>,
    shuttle_internal: Vec<VertexId>,
    geodesic_darts: Vec<DartId>,
    shuttle_darts: Vec<DartId>,
    arcs_in: Vec<Vec<DartId>>,
    arcs_out: Vec<Option<DartId>>,
    /// rotations of the fresh shuttle vertices (ids in shuttle_internal[1..])
    shuttle_rot: Vec<Vec<DartId>>,
    chain_first_dart: DartId,
    first_out: DartId,
}

/// Applies the forward-only corner-successor construction to a tilt-0
/// vertebrate.
pub fn cvs_vertebrate(v: &Vertebrate) -> Result<QuadrilateralGS, BijectionError> {
    if v.tilt() != 0 {
        return Err(BijectionError::TiltNonZero(v.tilt()));
    }
    let dec = v.decompose();
    let h = dec.spine_len();
    let rho: VertexId = 0;
    let rho_bar: VertexId = h as VertexId;

    // Fresh vertex ids: floor 0..=h, then tree vertices in contour order,
    // then shuttle vertices. Each vertex owns an ordered list of slots.
    let mut labels_new: Vec<i64> = dec.floor_labels.clone();
    let mut slots_of: Vec<Vec<usize>> = vec![Vec::new(); h + 1];
    let mut slot_lists: Vec<Vec<DartId>> = Vec::new();

    fn new_slot(
        slots_of: &mut Vec<Vec<usize>>,
        slot_lists: &mut Vec<Vec<DartId>>,
        v: VertexId,
    ) -> (VertexId, usize) {
        let id = slot_lists.len();
        slot_lists.push(Vec::new());
        slots_of[v as usize].push(id);
        (v, id)
    }

    // Builds one side's corner stream: floor positions in `positions`
    // order, each contributing the contour of its forest; the last
    // position contributes a single corner.
    let build_side = |slots_of: &mut Vec<Vec<usize>>,
                          slot_lists: &mut Vec<Vec<DartId>>,
                          labels_new: &mut Vec<i64>,
                          positions: &[usize],
                          forests: &[crate::labelled::ForestCode]|
     -> SideSeq {
        use crate::labelled::ForestEvent;
        let mut corners = Vec::new();
        let mut labels = Vec::new();
        for (step, &pos) in positions.iter().enumerate() {
            let anchor = pos as VertexId;
            corners.push(new_slot(slots_of, slot_lists, anchor));
            labels.push(dec.floor_labels[pos]);
            if step + 1 == positions.len() {
                break;
            }
            let mut stack: Vec<VertexId> = vec![anchor];
            for ev in &forests[pos].events {
                match *ev {
                    ForestEvent::Open(l) => {
                        let child = slots_of.len() as VertexId;
                        slots_of.push(Vec::new());
                        labels_new.push(l);
                        stack.push(child);
                        corners.push(new_slot(slots_of, slot_lists, child));
                        labels.push(l);
                    }
                    ForestEvent::Close => {
                        stack.pop();
                        let back = *stack.last().unwrap();
                        corners.push(new_slot(slots_of, slot_lists, back));
                        labels.push(labels_new[back as usize]);
                    }
                }
            }
            debug_assert_eq!(stack, vec![anchor]);
        }
        SideSeq { corners, labels }
    };

    let upper_positions: Vec<usize> = (0..=h).collect();
    let lower_positions: Vec<usize> = (0..=h).rev().collect();
    let upper = build_side(
        &mut slots_of,
        &mut slot_lists,
        &mut labels_new,
        &upper_positions,
        &dec.upper,
    );
    let lower = build_side(
        &mut slots_of,
        &mut slot_lists,
        &mut labels_new,
        &lower_positions,
        &dec.lower,
    );

    let upper_first = upper.corners[0];
    let upper_last = *upper.corners.last().unwrap();
    let lower_first = lower.corners[0];
    let lower_last = *lower.corners.last().unwrap();
    debug_assert_eq!((upper_first.0, lower_last.0), (rho, rho));
    debug_assert_eq!((upper_last.0, lower_first.0), (rho_bar, rho_bar));

    let mut alpha: Vec<DartId> = Vec::new();
    fn add_edge(alpha: &mut Vec<DartId>) -> (DartId, DartId) {
        let d = alpha.len() as DartId;
        alpha.push(d + 1);
        alpha.push(d);
        (d, d + 1)
    }

    // Runs the scan for one side; `base` is the floor end whose label
    // anchors the shuttle (the far end of the walk's start).
    let run_side = |alpha: &mut Vec<DartId>,
                        labels_new: &mut Vec<i64>,
                        slots_of: &mut Vec<Vec<usize>>,
                        seq: &SideSeq,
                        base: VertexId|
     -> SideOut {
        let m = seq.labels.len();
        let scan = successor_scan(&seq.labels, false);
        let base_label = labels_new[base as usize];
        let min = *seq.labels.iter().min().unwrap();
        let depth = (base_label - (min - 1)) as usize;
        debug_assert!(depth >= 1);
        let mut shuttle_ids = vec![base];
        for i in 1..=depth {
            let id = slots_of.len() as VertexId;
            slots_of.push(Vec::new());
            labels_new.push(base_label - i as i64);
            shuttle_ids.push(id);
        }
        let apex = *shuttle_ids.last().unwrap();
        let mut chain_down = Vec::new();
        let mut chain_up = Vec::new();
        for _ in 0..depth {
            let (d, u) = add_edge(alpha);
            chain_down.push(d);
            chain_up.push(u);
        }
        let mut arcs_out: Vec<Option<DartId>> = vec![None; m];
        let mut shuttle_in: Vec<Vec<DartId>> = vec![Vec::new(); depth + 1];
        for j in 0..m - 1 {
            let (out, inc) = add_edge(alpha);
            arcs_out[j] = Some(out);
            if scan.succ[j].is_none() {
                let level = (base_label - seq.labels[j] + 1) as usize;
                debug_assert!(level >= 1 && level <= depth);
                shuttle_in[level].push(inc);
            }
        }
        let mut arcs_in: Vec<Vec<DartId>> = vec![Vec::new(); m];
        for (j, srcs) in scan.incoming.iter().enumerate() {
            for &s in srcs {
                arcs_in[j].push(arcs_out[s].unwrap() + 1);
            }
        }
        // shuttle rotations: edge up, incoming arcs latest-source-first,
        // edge down
        let mut shuttle_rot: Vec<Vec<DartId>> = Vec::new();
        for i in 1..=depth {
            let mut rot = vec![chain_up[i - 1]];
            let mut arcs = shuttle_in[i].clone();
            arcs.reverse();
            rot.extend(arcs);
            if i < depth {
                rot.push(chain_down[i]);
            }
            shuttle_rot.push(rot);
        }
        // the left-most geodesic: successor chain from the first corner
        let mut geodesic = vec![seq.corners[0].0];
        let mut geodesic_darts = Vec::new();
        let mut j = 0usize;
        loop {
            geodesic_darts.push(arcs_out[j].expect("chain stops before the last corner"));
            match scan.succ[j] {
                Some(t) => {
                    geodesic.push(seq.corners[t].0);
                    j = t;
                }
                None => {
                    geodesic.push(apex);
                    break;
                }
            }
        }
        debug_assert_eq!(geodesic.len(), depth + 1);
        SideOut {
            geodesic_internal: geodesic,
            shuttle_internal: shuttle_ids,
            geodesic_darts,
            shuttle_darts: chain_down.clone(),
            arcs_in,
            arcs_out,
            shuttle_rot,
            chain_first_dart: chain_down[0],
            first_out: 0, // fixed below
        }
    };

    let mut up = run_side(&mut alpha, &mut labels_new, &mut slots_of, &upper, rho_bar);
    up.first_out = up.arcs_out[0].unwrap();
    let mut low = run_side(&mut alpha, &mut labels_new, &mut slots_of, &lower, rho);
    low.first_out = low.arcs_out[0].unwrap();

    // Slot contents for ordinary corners: incoming pops then outgoing.
    {
        let mut fill = |seq: &SideSeq, side: &SideOut| {
            let m = seq.corners.len();
            for j in 1..m - 1 {
                let slot = seq.corners[j].1;
                slot_lists[slot].extend_from_slice(&side.arcs_in[j]);
                slot_lists[slot].push(side.arcs_out[j].unwrap());
            }
        };
        fill(&upper, &up);
        fill(&lower, &low);
    }
    // Shared corner at rho_bar: upper incomings, upper chain, lower
    // incomings (none possible), lower outgoing.
    {
        let slot = upper_last.1;
        let mu = upper.corners.len();
        let mut content = Vec::new();
        content.extend_from_slice(&up.arcs_in[mu - 1]);
        content.push(up.chain_first_dart);
        content.extend_from_slice(&low.arcs_in[0]);
        content.push(low.arcs_out[0].unwrap());
        slot_lists[slot] = content;
        debug_assert!(slot_lists[lower_first.1].is_empty());
    }
    // Shared corner at rho: lower incomings, lower chain, upper outgoing.
    {
        let slot = upper_first.1;
        let ml = lower.corners.len();
        let mut content = Vec::new();
        content.extend_from_slice(&low.arcs_in[ml - 1]);
        content.push(low.chain_first_dart);
        content.extend_from_slice(&up.arcs_in[0]);
        content.push(up.arcs_out[0].unwrap());
        slot_lists[slot] = content;
        debug_assert!(slot_lists[lower_last.1].is_empty());
    }

    // Assemble sigma from per-vertex slot concatenations plus shuttle
    // rotations.
    let nd = alpha.len();
    let mut sigma = vec![u32::MAX; nd];
    let n_internal = slots_of.len();
    let mut first_dart = vec![u32::MAX; n_internal];
    {
        let chain = |sigma: &mut Vec<u32>, darts: &[DartId]| {
            for (i, &d) in darts.iter().enumerate() {
                sigma[d as usize] = darts[(i + 1) % darts.len()];
            }
        };
        for v in 0..n_internal {
            let mut rot: Vec<DartId> = Vec::new();
            for &s in &slots_of[v] {
                rot.extend_from_slice(&slot_lists[s]);
            }
            if !rot.is_empty() {
                first_dart[v] = rot[0];
                chain(&mut sigma, &rot);
            }
        }
        for (i, rot) in up.shuttle_rot.iter().enumerate() {
            first_dart[up.shuttle_internal[i + 1] as usize] = rot[0];
            chain(&mut sigma, rot);
        }
        for (i, rot) in low.shuttle_rot.iter().enumerate() {
            first_dart[low.shuttle_internal[i + 1] as usize] = rot[0];
            chain(&mut sigma, rot);
        }
    }

    let new_map = CombinatorialMap::build(alpha, sigma, up.first_out)?;

    let translate = |ids: &[VertexId]| -> Vec<VertexId> {
        ids.iter()
            .map(|&v| new_map.vertex_of(first_dart[v as usize]))
            .collect()
    };
    let mut labels_final = vec![0i64; new_map.n_vertices()];
    for v in 0..n_internal {
        if first_dart[v] != u32::MAX {
            labels_final[new_map.vertex_of(first_dart[v]) as usize] = labels_new[v];
        }
    }
    let upper_shuttle = translate(&up.shuttle_internal);
    let lower_shuttle = translate(&low.shuttle_internal);
    let qd = QuadrilateralGS {
        upper_apex: *upper_shuttle.last().unwrap(),
        lower_apex: *lower_shuttle.last().unwrap(),
        upper_geodesic: translate(&up.geodesic_internal),
        upper_shuttle,
        lower_geodesic: translate(&low.geodesic_internal),
        lower_shuttle,
        upper_geodesic_darts: up.geodesic_darts,
        upper_shuttle_darts: up.shuttle_darts,
        lower_geodesic_darts: low.geodesic_darts,
        lower_shuttle_darts: low.shuttle_darts,
        map: new_map,
        labels: labels_final,
    };
    Ok(qd)
}

/// Zips each geodesic onto its shuttle, edge by edge from the apex down,
/// producing a delayed quadrangulation rooted at the first upper arc.
pub fn glue(qd: &QuadrilateralGS) -> Result<DelayedQuadrangulation, BijectionError> {
    for (g, s) in [
        (&qd.upper_geodesic_darts, &qd.upper_shuttle_darts),
        (&qd.lower_geodesic_darts, &qd.lower_shuttle_darts),
    ] {
        if g.len() != s.len() {
            return Err(BijectionError::LengthMismatch {
                left: g.len(),
                right: s.len(),
            });
        }
    }

    let map = &qd.map;
    let nd = map.n_darts();
    let nv = map.n_vertices();
    let mut rot: Vec<Vec<DartId>> = (0..nv)
        .map(|v| map.vertex_darts(v as VertexId).to_vec())
        .collect();
    let mut parent: Vec<u32> = (0..nv as u32).collect();
    fn find(parent: &mut [u32], mut v: u32) -> u32 {
        while parent[v as usize] != v {
            let p = parent[parent[v as usize] as usize];
            parent[v as usize] = p;
            v = p;
        }
        v
    }
    let mut dead = vec![false; nd];

    // One fold: identify the edges keep_up (g_t -> g_{t+1}) and kill_up
    // (x_t -> x_{t+1}); their heads are already one class.
    let fold = |rot: &mut Vec<Vec<DartId>>,
                    parent: &mut Vec<u32>,
                    dead: &mut Vec<bool>,
                    keep_up: DartId,
                    kill_up: DartId| {
        let u = find(parent, map.head_of(kill_up));
        debug_assert_eq!(u, find(parent, map.head_of(keep_up)));
        let dk = map.alpha(kill_up);
        let pos = rot[u as usize]
            .iter()
            .position(|&d| d == dk)
            .expect("folded dart present at its head class");
        rot[u as usize].remove(pos);
        dead[kill_up as usize] = true;
        dead[dk as usize] = true;
        let p = find(parent, map.vertex_of(keep_up));
        let q = find(parent, map.vertex_of(kill_up));
        if p != q {
            let qpos = rot[q as usize]
                .iter()
                .position(|&d| d == kill_up)
                .expect("killed dart present at its class");
            let qlen = rot[q as usize].len();
            let mut spliced: Vec<DartId> = Vec::with_capacity(qlen - 1);
            for i in 1..qlen {
                spliced.push(rot[q as usize][(qpos + i) % qlen]);
            }
            let ppos = rot[p as usize]
                .iter()
                .position(|&d| d == keep_up)
                .expect("kept dart present at its class");
            // the zipped fan enters just before the kept dart
            let mut merged = Vec::with_capacity(rot[p as usize].len() + spliced.len());
            merged.extend_from_slice(&rot[p as usize][..ppos]);
            merged.extend_from_slice(&spliced);
            merged.extend_from_slice(&rot[p as usize][ppos..]);
            rot[p as usize] = merged;
            rot[q as usize].clear();
            parent[q as usize] = p;
        } else {
            let qpos = rot[p as usize]
                .iter()
                .position(|&d| d == kill_up)
                .expect("killed dart present at its class");
            rot[p as usize].remove(qpos);
        }
    };

    for (geo, shut) in [
        (&qd.upper_geodesic_darts, &qd.upper_shuttle_darts),
        (&qd.lower_geodesic_darts, &qd.lower_shuttle_darts),
    ] {
        for t in (0..geo.len()).rev() {
            fold(&mut rot, &mut parent, &mut dead, geo[t], shut[t]);
        }
    }

    // compact and rebuild
    let mut new_id = vec![u32::MAX; nd];
    let mut next = 0u32;
    for d in 0..nd {
        if !dead[d] {
            new_id[d] = next;
            next += 1;
        }
    }
    let n_new = next as usize;
    let mut alpha_new = vec![0u32; n_new];
    for d in 0..nd as DartId {
        if !dead[d as usize] {
            debug_assert!(!dead[map.alpha(d) as usize]);
            alpha_new[new_id[d as usize] as usize] = new_id[map.alpha(d) as usize];
        }
    }
    let mut sigma_new = vec![u32::MAX; n_new];
    for v in 0..nv {
        if parent[v] as usize != v || rot[v].is_empty() {
            continue;
        }
        let r = &rot[v];
        for (i, &d) in r.iter().enumerate() {
            sigma_new[new_id[d as usize] as usize] = new_id[r[(i + 1) % r.len()] as usize];
        }
    }
    let root = new_id[qd.upper_geodesic_darts[0] as usize];
    let glued = CombinatorialMap::build(alpha_new, sigma_new, root)?;

    let mut labels_new = vec![0i64; glued.n_vertices()];
    let mut class_to_new = vec![u32::MAX; nv];
    for v in 0..nv {
        if parent[v] as usize == v && !rot[v].is_empty() {
            let id = glued.vertex_of(new_id[rot[v][0] as usize]);
            class_to_new[v] = id;
            labels_new[id as usize] = qd.labels[v];
        }
    }
    let v1 = class_to_new[find(&mut parent, qd.upper_apex) as usize];
    let v0 = class_to_new[find(&mut parent, qd.lower_apex) as usize];
    let delay = qd.labels[qd.upper_apex as usize] - qd.labels[qd.lower_apex as usize];
    Ok(DelayedQuadrangulation::new(glued, labels_new, v0, v1, delay))
}

/// Checks the consistency identity: applying the corner construction to a
/// marked unicycle directly agrees with cutting it open, building the
/// quadrilateral and gluing — as rooted bi-pointed delayed maps.
pub fn consistency_check(u: &MarkedUnicycle) -> Result<bool, BijectionError> {
    let direct = cvs_unicycle(u.unicycle(), Orientation::Forward)?;
    let vert = phi(u);
    let qd = cvs_vertebrate(&vert)?;
    let glued = glue(&qd)?;
    Ok(direct.canonical_code() == glued.canonical_code())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelled::{ForestCode, ForestEvent, UnicycleDecomposition, VertebrateDecomposition};

    fn loop_unicycle() -> MarkedUnicycle {
        UnicycleDecomposition {
            cycle_labels: vec![0],
            internal_forests: vec![ForestCode::default()],
            external_forests: vec![ForestCode::default()],
        }
        .assemble()
        .unwrap()
    }

    #[test]
    fn loop_maps_to_two_edge_path() {
        let u = loop_unicycle();
        let q = cvs_unicycle(u.unicycle(), Orientation::Forward).unwrap();
        assert_eq!(q.map().n_faces(), 1);
        assert_eq!(q.map().n_vertices(), 3);
        assert_eq!(q.delay(), 0);
        assert_eq!(q.pole_distance(), 2);
        q.validate().unwrap();
        let q2 = cvs_unicycle(u.unicycle(), Orientation::Reverse).unwrap();
        assert_ne!(q.canonical_code(), q2.canonical_code());
        assert_eq!(q.map().n_darts(), q2.map().n_darts());
    }

    #[test]
    fn delay_is_internal_minus_external_minimum() {
        use ForestEvent::*;
        // internal side dips to -1, external stays at 0
        let u = UnicycleDecomposition {
            cycle_labels: vec![0],
            internal_forests: vec![ForestCode {
                events: vec![Open(-1), Close],
            }],
            external_forests: vec![ForestCode::default()],
        }
        .assemble()
        .unwrap();
        let q = cvs_unicycle(u.unicycle(), Orientation::Forward).unwrap();
        assert_eq!(q.delay(), -1);
        q.validate().unwrap();
    }

    #[test]
    fn degenerate_vertebrate_gives_glueable_quadrilateral() {
        let dec = VertebrateDecomposition {
            floor_labels: vec![0, 0],
            upper: vec![ForestCode::default(), ForestCode::default()],
            lower: vec![ForestCode::default(), ForestCode::default()],
        };
        let v = dec.assemble().unwrap();
        let qd = cvs_vertebrate(&v).unwrap();
        qd.validate().unwrap();
        assert_eq!(qd.upper_geodesic().len(), 2);
        assert_eq!(qd.upper_shuttle().len(), 2);
        assert_eq!(qd.map().n_edges(), 4);
        let q = glue(&qd).unwrap();
        q.validate().unwrap();
        assert_eq!(q.map().n_faces(), 1);
        assert_eq!(q.delay(), 0);
    }

    #[test]
    fn loop_consistency() {
        let u = loop_unicycle();
        assert!(consistency_check(&u).unwrap());
    }

    #[test]
    fn wider_vertebrate_shapes() {
        use ForestEvent::*;
        // width 3, upper area 2, lower area 5, tilt 0
        let dec = VertebrateDecomposition {
            floor_labels: vec![0, 1, 1, 0],
            upper: vec![
                ForestCode {
                    events: vec![Open(1), Close],
                },
                ForestCode {
                    events: vec![Open(0), Close],
                },
                ForestCode::default(),
                ForestCode::default(),
            ],
            lower: vec![
                ForestCode::default(),
                ForestCode {
                    events: vec![Open(0), Open(-1), Close, Close, Open(2), Close],
                },
                ForestCode::default(),
                ForestCode {
                    events: vec![Open(-1), Close, Open(1), Close],
                },
            ],
        };
        let v = dec.assemble().unwrap();
        assert_eq!(v.stats(), (3, 2, 5));
        let qd = cvs_vertebrate(&v).unwrap();
        qd.validate().unwrap();
        assert_eq!(qd.map().faces().iter().filter(|f| f.len() == 4).count(), 10);
        let q = glue(&qd).unwrap();
        q.validate().unwrap();
        assert_eq!(q.map().n_faces(), 10);
    }

    #[test]
    fn three_cycle_consistency() {
        use ForestEvent::*;
        let single = |l| ForestCode {
            events: vec![Open(l), Close],
        };
        let u = UnicycleDecomposition {
            cycle_labels: vec![0, 1, 0],
            internal_forests: vec![single(-1), single(2), single(1)],
            external_forests: vec![
                ForestCode {
                    events: vec![Open(1), Open(1), Open(2), Close, Close, Close],
                },
                single(0),
                ForestCode::default(),
            ],
        }
        .assemble()
        .unwrap();
        let q = cvs_unicycle(u.unicycle(), Orientation::Forward).unwrap();
        q.validate().unwrap();
        assert_eq!(q.map().n_faces(), 10);
        assert!(consistency_check(&u).unwrap());
    }
}
