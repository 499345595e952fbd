//! Exact combinatorics of well-labelled unicycles, delayed quadrangulations
//! and quadrilaterals with geodesic sides, connected by the
//! Cori–Vauquelin–Schaeffer / Miermont corner-successor constructions.
//!
//! The crate provides:
//!
//! * [`map`] — planar maps as rotation systems: validation, faces,
//!   distances, canonical codes, JSON wire format;
//! * [`labelled`] — well-labelled unicycles, marked unicycles, vertebrates
//!   and the cut/glue bijection between them;
//! * [`bijections`] — the two CVS constructions, the gluing of
//!   quadrilaterals, and their consistency identity;
//! * [`enumeration`] — exact arbitrary-precision counting and brute-force
//!   oracles;
//! * [`sampling`] — exact uniform samplers for bridges, forests, unicycles
//!   and delayed quadrangulations;
//! * [`geometry`] — delayed Voronoï cells, closed-form limit densities and
//!   the Monte Carlo experiments.

pub(crate) mod builder;

pub mod bijections;
pub mod enumeration;
pub mod geometry;
pub mod labelled;
pub mod map;
pub mod sampling;

pub use map::{CombinatorialMap, DartId, FaceId, MapError, MapJson, Marks, VertexId};
#[cfg(test)]
mod consistency_smoke {
    use crate::bijections::{consistency_check, cvs_unicycle, Orientation};
    use crate::labelled::*;
    use rand::prelude::*;
    use rand::rngs::StdRng;

    pub(crate) fn random_forest(rng: &mut StdRng, base: i64, max_edges: usize) -> ForestCode {
        let mut events = Vec::new();
        let mut depth_labels = vec![base];
        let n = rng.gen_range(0..=max_edges);
        let mut open = 0usize;
        for _ in 0..n {
            while open > 0 && rng.gen_bool(0.5) {
                events.push(ForestEvent::Close);
                depth_labels.pop();
                open -= 1;
            }
            let l = depth_labels.last().unwrap() + rng.gen_range(-1..=1);
            events.push(ForestEvent::Open(l));
            depth_labels.push(l);
            open += 1;
        }
        for _ in 0..open {
            events.push(ForestEvent::Close);
        }
        ForestCode { events }
    }

    pub(crate) fn random_marked_unicycle(rng: &mut StdRng, max_k: usize, max_tree: usize) -> MarkedUnicycle {
        loop {
            let k = rng.gen_range(1..=max_k);
            let mut labels = vec![0i64];
            for _ in 1..k {
                labels.push(labels.last().unwrap() + rng.gen_range(-1..=1));
            }
            if labels[k - 1].abs() > 1 {
                continue;
            }
            let internal = (0..k).map(|i| random_forest(rng, labels[i], max_tree)).collect();
            let external = (0..k).map(|i| random_forest(rng, labels[i], max_tree)).collect();
            let dec = UnicycleDecomposition {
                cycle_labels: labels,
                internal_forests: internal,
                external_forests: external,
            };
            return dec.assemble().unwrap();
        }
    }

    #[test]
    fn random_instances_satisfy_the_consistency_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let u = random_marked_unicycle(&mut rng, 5, 4);
            assert!(consistency_check(&u).unwrap());
        }
    }

    #[test]
    fn random_images_are_valid_delayed_quadrangulations() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..200 {
            let u = random_marked_unicycle(&mut rng, 5, 4);
            for o in [Orientation::Forward, Orientation::Reverse] {
                let q = cvs_unicycle(u.unicycle(), o).unwrap();
                q.validate().unwrap();
                assert_eq!(q.map().n_faces(), u.n_edges());
                assert_eq!(q.map().n_vertices(), u.n_edges() + 2);
            }
        }
    }
}
