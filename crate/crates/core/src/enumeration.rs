//! Exact counting of well-labelled unicycles and brute-force oracles.
//!
//! All counts are arbitrary-precision integers; floating point only ever
//! appears when a finished ratio is converted for reporting. The counting
//! route goes through the cycle/forest decomposition (central trinomials
//! times forest numbers), while the oracles enumerate rotation systems
//! directly, so the two can fail independently.

use crate::bijections::DelayedQuadrangulation;
use crate::labelled::{LabelledUnicycle, MarkedUnicycle};
use crate::map::{CombinatorialMap, DartId, VertexId};
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashSet;
use std::time::Instant;
use thiserror::Error;

/// Exact nonnegative count.
pub type Count = BigUint;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum EnumError {
    #[error("brute-force budget exceeded: {0}")]
    BudgetExceeded(String),
}

/// Wall-clock guard for the brute-force oracles, configured through the
/// UNIMAP_BUDGET_MS environment variable (default: 10 minutes).
struct Budget {
    start: Instant,
    limit_ms: u128,
}

impl Budget {
    fn new() -> Self {
        let limit_ms = std::env::var("UNIMAP_BUDGET_MS")
            .ok()
            .and_then(|s| s.parse::<u128>().ok())
            .unwrap_or(600_000);
        Budget {
            start: Instant::now(),
            limit_ms,
        }
    }

    fn check(&self, what: &str) -> Result<(), EnumError> {
        if self.start.elapsed().as_millis() > self.limit_ms {
            return Err(EnumError::BudgetExceeded(what.to_string()));
        }
        Ok(())
    }
}

/// Number of walks of length `k` from 0 to 0 with steps in {-1, 0, +1}
/// (central trinomial coefficient).
pub fn central_trinomial(k: usize) -> Count {
    central_trinomials_upto(k).pop().unwrap()
}

/// Central trinomial coefficients T_0..T_n via the three-term recurrence
/// (k+1) T_{k+1} = (2k+1) T_k + 3k T_{k-1}.
pub fn central_trinomials_upto(n: usize) -> Vec<Count> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(BigUint::one());
    if n == 0 {
        return t;
    }
    t.push(BigUint::one());
    for k in 1..n {
        let num = &t[k] * (2 * k as u64 + 1) + &t[k - 1] * (3 * k as u64);
        let (q, r) = num.div_rem(&BigUint::from(k as u64 + 1));
        debug_assert!(r.is_zero());
        t.push(q);
    }
    t
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> Count {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Number of plane forests with `a` (possibly empty) trees and `b` edges:
/// a/(2b+a) * C(2b+a, b).
pub fn forest_count(a: u64, b: u64) -> Count {
    assert!(a >= 1);
    let num = binomial(2 * b + a, b) * a;
    let (q, r) = num.div_rem(&BigUint::from(2 * b + a));
    assert!(r.is_zero(), "forest count must be integral");
    q
}

/// Number of marked unicycles with n edges and cycle length k: the cycle
/// labels form a 0-to-0 walk of length k, and a forest of 2k trees with
/// n-k freely labelled edges hangs on the cycle.
pub fn count_marked(n: usize, k: usize) -> Count {
    assert!(1 <= k && k <= n);
    let t = central_trinomial(k);
    t * BigUint::from(3u32).pow((n - k) as u32) * forest_count(2 * k as u64, (n - k) as u64)
}

/// Same count through the probabilistic route, (k/n) 3^{n-k} T_k C(2n, n-k),
/// with the division checked exact.
pub fn count_marked_binomial_form(n: usize, k: usize) -> Count {
    assert!(1 <= k && k <= n);
    let num = central_trinomial(k)
        * BigUint::from(3u32).pow((n - k) as u32)
        * binomial(2 * n as u64, (n - k) as u64)
        * BigUint::from(k as u64);
    let (q, r) = num.div_rem(&BigUint::from(n as u64));
    assert!(r.is_zero(), "marked count must be integral");
    q
}

/// Number of rooted unicycles with n edges and cycle length k, i.e.
/// (2n/k) times the marked count: 2 T_k 3^{n-k} C(2n, n-k).
pub fn count_rooted(n: usize, k: usize) -> Count {
    assert!(1 <= k && k <= n);
    central_trinomial(k)
        * BigUint::from(3u32).pow((n - k) as u32)
        * binomial(2 * n as u64, (n - k) as u64)
        * 2u32
}

/// Marked counts for every cycle length, sharing the trinomial and
/// binomial sweeps.
pub fn marked_counts_by_k(n: usize) -> Vec<Count> {
    counts_by_k(n, false)
}

/// Rooted counts for every cycle length.
pub fn rooted_counts_by_k(n: usize) -> Vec<Count> {
    counts_by_k(n, true)
}

fn counts_by_k(n: usize, rooted: bool) -> Vec<Count> {
    let tri = central_trinomials_upto(n);
    let mut out = Vec::with_capacity(n);
    // C(2n, n-k) updated incrementally from k = 1
    let mut binom = binomial(2 * n as u64, (n - 1) as u64);
    let mut pow3 = BigUint::from(3u32).pow((n - 1) as u32);
    let three = BigUint::from(3u32);
    for k in 1..=n {
        let term = if rooted {
            &tri[k] * &pow3 * &binom * 2u32
        } else {
            let num = &tri[k] * &pow3 * &binom * (k as u64);
            let (q, r) = num.div_rem(&BigUint::from(n as u64));
            debug_assert!(r.is_zero());
            q
        };
        out.push(term);
        if k < n {
            // C(2n, n-k-1) = C(2n, n-k) * (n-k) / (n+k+1)
            let num = &binom * ((n - k) as u64);
            let (q, r) = num.div_rem(&BigUint::from((n + k + 1) as u64));
            debug_assert!(r.is_zero());
            binom = q;
            let (q, r) = pow3.div_rem(&three);
            debug_assert!(r.is_zero());
            pow3 = q;
        }
    }
    out
}

/// Total number of rooted well-labelled unicycles with n edges.
pub fn count_unicycles(n: usize) -> Count {
    rooted_counts_by_k(n).into_iter().sum()
}

/// Total number of marked unicycles with n edges.
pub fn count_marked_total(n: usize) -> Count {
    marked_counts_by_k(n).into_iter().sum()
}

/// Ratio of two exact counts as f64.
pub fn big_ratio_to_f64(num: &Count, den: &Count) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    if let (Some(a), Some(b)) = (num.to_f64(), den.to_f64()) {
        if a.is_finite() && b.is_finite() && b != 0.0 {
            return a / b;
        }
    }
    // shift both down, keeping ~80 bits of the quotient
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    let shift_n = (nb - 80).max(0) as u64;
    let shift_d = (db - 80).max(0) as u64;
    let a = (num >> shift_n).to_f64().unwrap();
    let b = (den >> shift_d).to_f64().unwrap();
    a / b * 2f64.powi(shift_n as i32 - shift_d as i32)
}

/// Exact-count diagnostics against the limiting constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticReport {
    pub n: usize,
    /// #U_n * n^{1/4} / 12^n
    pub ratio_unicycles: f64,
    /// #U_marked_n * n^{3/4} / 12^n
    pub ratio_marked: f64,
    /// #U_n / (sqrt(2n) * #U_marked_n)
    pub ratio_bias: f64,
}

/// Limit of `ratio_unicycles`: sqrt(3) Gamma(1/4) / (2 pi).
pub const LIMIT_RATIO_UNICYCLES: f64 = 0.999451752965145;
/// Limit of `ratio_marked`: sqrt(3) Gamma(3/4) / (4 pi).
pub const LIMIT_RATIO_MARKED: f64 = 0.168901909250385;
/// Limit of `ratio_bias`: sqrt(2) Gamma(1/4) / Gamma(3/4).
pub const LIMIT_RATIO_BIAS: f64 = 4.184198480212407;

pub fn asymptotic_diagnostics(ns: &[usize]) -> Vec<AsymptoticReport> {
    ns.iter()
        .map(|&n| {
            let marked: Count = marked_counts_by_k(n).into_iter().sum();
            let rooted: Count = rooted_counts_by_k(n).into_iter().sum();
            let twelve = BigUint::from(12u32).pow(n as u32);
            let nf = n as f64;
            let ratio_unicycles = big_ratio_to_f64(&rooted, &twelve) * nf.powf(0.25);
            let ratio_marked = big_ratio_to_f64(&marked, &twelve) * nf.powf(0.75);
            let ratio_bias = big_ratio_to_f64(&rooted, &marked) / (2.0 * nf).sqrt();
            AsymptoticReport {
                n,
                ratio_unicycles,
                ratio_marked,
                ratio_bias,
            }
        })
        .collect()
}

/// Fixing alpha to (0 1)(2 3)... and letting sigma range over all
/// permutations with a fixed root dart reaches every rooted map.
fn pairing_alpha(n_darts: usize) -> Vec<DartId> {
    (0..n_darts as DartId).map(|d| d ^ 1).collect()
}

fn for_each_permutation<F: FnMut(&[u32]) -> Result<(), EnumError>>(
    m: usize,
    f: &mut F,
) -> Result<(), EnumError> {
    // Heap's algorithm, iterative
    let mut a: Vec<u32> = (0..m as u32).collect();
    let mut c = vec![0usize; m];
    f(&a)?;
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a)?;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(())
}

/// All labellings of the map's vertices with 0 at `base` and steps in
/// {-1, 0, +1} along every edge.
fn enumerate_labellings(map: &CombinatorialMap, base: VertexId) -> Vec<Vec<i64>> {
    let nv = map.n_vertices();
    let mut order = vec![base];
    let mut parent = vec![u32::MAX; nv];
    let mut seen = vec![false; nv];
    seen[base as usize] = true;
    let mut qi = 0;
    while qi < order.len() {
        let v = order[qi];
        qi += 1;
        for &d in map.vertex_darts(v) {
            let w = map.head_of(d);
            if !seen[w as usize] {
                seen[w as usize] = true;
                parent[w as usize] = v;
                order.push(w);
            }
        }
    }
    let mut out = Vec::new();
    let combos = 3usize.pow((nv - 1) as u32);
    let mut labels = vec![0i64; nv];
    for mut code in 0..combos {
        let mut ok = true;
        for &v in order.iter().skip(1) {
            let step = (code % 3) as i64 - 1;
            code /= 3;
            labels[v as usize] = labels[parent[v as usize] as usize] + step;
        }
        for d in 0..map.n_darts() as DartId {
            let a = labels[map.vertex_of(d) as usize];
            let b = labels[map.head_of(d) as usize];
            if (a - b).abs() > 1 {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(labels.clone());
        }
    }
    out
}

/// Exhaustive list of rooted well-labelled unicycles with n edges,
/// enumerated directly over rotation systems (independent of the counting
/// formulas). Guarded to n <= 5.
pub fn brute_force_unicycles(n: usize) -> Result<Vec<LabelledUnicycle>, EnumError> {
    if n > 5 {
        return Err(EnumError::BudgetExceeded(format!(
            "rooted unicycle enumeration at n={n}"
        )));
    }
    let budget = Budget::new();
    let maps = distinct_two_face_maps(n, &budget)?;
    let mut out = Vec::new();
    for map in &maps {
        let base = map.vertex_of(map.root());
        for labels in enumerate_labellings(map, base) {
            for internal in 0..2u32 {
                out.push(
                    LabelledUnicycle::new(map.clone(), labels.clone(), internal)
                        .expect("enumerated unicycle is valid"),
                );
            }
        }
    }
    Ok(out)
}

/// Distinct rooted maps with two faces and n edges (no labels).
fn distinct_two_face_maps(n: usize, budget: &Budget) -> Result<Vec<CombinatorialMap>, EnumError> {
    let nd = 2 * n;
    let alpha = pairing_alpha(nd);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut out = Vec::new();
    let mut count = 0usize;
    for_each_permutation(nd, &mut |sigma| {
        count += 1;
        if count % 8192 == 0 {
            budget.check("two-face map enumeration")?;
        }
        if let Ok(map) = CombinatorialMap::build(alpha.clone(), sigma.to_vec(), 0) {
            if map.n_faces() == 2 && seen.insert(map.canonical_code()) {
                out.push(map);
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Exhaustive list of marked unicycles with n edges, derived from the
/// rooted enumeration by marking each forward cycle dart.
pub fn brute_force_marked_unicycles(n: usize) -> Result<Vec<MarkedUnicycle>, EnumError> {
    let rooted = brute_force_unicycles(n)?;
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut out = Vec::new();
    for u in &rooted {
        for d in u.cycle_darts() {
            let m = MarkedUnicycle::from_rooted(u, d).expect("cycle dart is markable");
            if seen.insert(m.canonical_code()) {
                out.push(m);
            }
        }
    }
    Ok(out)
}

/// Exhaustive list of delayed quadrangulations with n faces: rooted
/// quadrangulations are enumerated through their face permutation (all
/// cycles of length 4), then bi-pointed with every admissible delay.
/// Guarded to n <= 3.
pub fn brute_force_delayed_quadrangulations(
    n: usize,
) -> Result<Vec<DelayedQuadrangulation>, EnumError> {
    let maps = brute_force_quadrangulations(n)?;
    let mut out = Vec::new();
    for map in &maps {
        let nv = map.n_vertices() as VertexId;
        for v0 in 0..nv {
            let dist = map.bfs_distances(v0);
            for v1 in 0..nv {
                if v0 == v1 {
                    continue;
                }
                let d = dist[v1 as usize] as i64;
                if d <= 1 {
                    continue;
                }
                let mut delay = -(d - 2);
                while delay <= d - 2 {
                    out.push(DelayedQuadrangulation::new(
                        map.clone(),
                        Vec::new(),
                        v0,
                        v1,
                        delay,
                    ));
                    delay += 2;
                }
            }
        }
    }
    Ok(out)
}

/// Distinct rooted quadrangulations with n faces.
pub fn brute_force_quadrangulations(n: usize) -> Result<Vec<CombinatorialMap>, EnumError> {
    if n > 3 {
        return Err(EnumError::BudgetExceeded(format!(
            "quadrangulation enumeration at n={n}"
        )));
    }
    let budget = Budget::new();
    let nd = 4 * n;
    let alpha = pairing_alpha(nd);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut out = Vec::new();
    let mut phi = vec![u32::MAX; nd];
    let mut used = vec![false; nd];
    let mut count = 0usize;
    enumerate_four_cycles(
        &mut phi, &mut used, &alpha, &mut seen, &mut out, &mut count, &budget,
    )?;
    Ok(out)
}

/// Enumerates permutations with cycle type (4^n): repeatedly picks the
/// smallest unplaced dart and an ordered 3-tuple completing its cycle.
fn enumerate_four_cycles(
    phi: &mut Vec<u32>,
    used: &mut Vec<bool>,
    alpha: &[u32],
    seen: &mut HashSet<Vec<u8>>,
    out: &mut Vec<CombinatorialMap>,
    count: &mut usize,
    budget: &Budget,
) -> Result<(), EnumError> {
    let nd = phi.len();
    let first = match used.iter().position(|&u| !u) {
        None => {
            *count += 1;
            if *count % 4096 == 0 {
                budget.check("quadrangulation enumeration")?;
            }
            let sigma: Vec<u32> = (0..nd).map(|d| phi[alpha[d] as usize]).collect();
            if let Ok(map) = CombinatorialMap::build(alpha.to_vec(), sigma, 0) {
                debug_assert!(map.is_quadrangulation());
                if seen.insert(map.canonical_code()) {
                    out.push(map);
                }
            }
            return Ok(());
        }
        Some(f) => f,
    };
    used[first] = true;
    let free: Vec<usize> = (0..nd).filter(|&d| !used[d]).collect();
    for &a in &free {
        for &b in &free {
            if b == a {
                continue;
            }
            for &c in &free {
                if c == a || c == b {
                    continue;
                }
                used[a] = true;
                used[b] = true;
                used[c] = true;
                phi[first] = a as u32;
                phi[a] = b as u32;
                phi[b] = c as u32;
                phi[c] = first as u32;
                enumerate_four_cycles(phi, used, alpha, seen, out, count, budget)?;
                used[a] = false;
                used[b] = false;
                used[c] = false;
            }
        }
    }
    used[first] = false;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct enumeration of {-1,0,1} walks returning to 0.
    fn walks_oracle(k: usize) -> u64 {
        let mut total = 0u64;
        for code in 0..3usize.pow(k as u32) {
            let mut c = code;
            let mut s = 0i64;
            for _ in 0..k {
                s += (c % 3) as i64 - 1;
                c /= 3;
            }
            if s == 0 {
                total += 1;
            }
        }
        total
    }

    /// Direct enumeration of forests: sequences of b up and b+a down
    /// steps whose first passage to -a is at the very end.
    fn forests_oracle(a: usize, b: usize) -> u64 {
        let len = 2 * b + a;
        let mut total = 0u64;
        for mask in 0..(1u64 << len) {
            if (mask.count_ones() as usize) != b {
                continue;
            }
            let mut s = 0i64;
            let mut ok = true;
            for i in 0..len {
                s += if (mask >> i) & 1 == 1 { 1 } else { -1 };
                if s == -(a as i64) && i + 1 != len {
                    ok = false;
                    break;
                }
            }
            if ok && s == -(a as i64) {
                total += 1;
            }
        }
        total
    }

    #[test]
    fn trinomials_match_walk_enumeration() {
        for k in 0..=10 {
            assert_eq!(central_trinomial(k), BigUint::from(walks_oracle(k)), "k={k}");
        }
        assert_eq!(central_trinomial(2), BigUint::from(3u32));
        assert_eq!(central_trinomial(4), BigUint::from(19u32));
        assert_eq!(central_trinomial(5), BigUint::from(51u32));
    }

    #[test]
    fn forest_counts_match_path_enumeration() {
        assert_eq!(forest_count(2, 0), BigUint::one());
        assert_eq!(forest_count(2, 1), BigUint::from(2u32));
        assert_eq!(forest_count(4, 2), BigUint::from(14u32));
        for a in 1..=5u64 {
            for b in 0..=4u64 {
                assert_eq!(
                    forest_count(a, b),
                    BigUint::from(forests_oracle(a as usize, b as usize)),
                    "a={a} b={b}"
                );
            }
        }
    }

    #[test]
    fn marked_counts_small_values() {
        assert_eq!(count_marked(1, 1), BigUint::one());
        assert_eq!(count_marked(2, 1), BigUint::from(6u32));
        assert_eq!(count_marked(2, 2), BigUint::from(3u32));
        assert_eq!(count_marked(3, 1), BigUint::from(45u32));
        assert_eq!(count_marked(3, 2), BigUint::from(36u32));
        assert_eq!(count_marked(3, 3), BigUint::from(7u32));
        assert_eq!(count_marked_total(3), BigUint::from(88u32));
    }

    #[test]
    fn product_and_binomial_forms_agree() {
        for n in 1..=60 {
            for k in 1..=n {
                assert_eq!(count_marked(n, k), count_marked_binomial_form(n, k));
            }
        }
    }

    #[test]
    fn rooted_total_small_values() {
        assert_eq!(count_unicycles(1), BigUint::from(2u32));
        assert_eq!(count_unicycles(2), BigUint::from(30u32));
        assert_eq!(count_unicycles(3), BigUint::from(392u32));
        for n in 1..=40 {
            let marked = marked_counts_by_k(n);
            let rooted = rooted_counts_by_k(n);
            for k in 1..=n {
                let num = &marked[k - 1] * (2 * n as u64);
                let (q, r) = num.div_rem(&BigUint::from(k as u64));
                assert!(r.is_zero());
                assert_eq!(q, rooted[k - 1]);
            }
        }
    }

    #[test]
    fn batched_counts_match_single_calls() {
        let n = 17;
        let marked = marked_counts_by_k(n);
        let rooted = rooted_counts_by_k(n);
        for k in 1..=n {
            assert_eq!(marked[k - 1], count_marked(n, k));
            assert_eq!(rooted[k - 1], count_rooted(n, k));
        }
    }

    #[test]
    fn brute_force_matches_formulas_small() {
        for n in 1..=3 {
            let rooted = brute_force_unicycles(n).unwrap();
            assert_eq!(
                BigUint::from(rooted.len() as u64),
                count_unicycles(n),
                "rooted n={n}"
            );
            let marked = brute_force_marked_unicycles(n).unwrap();
            assert_eq!(
                BigUint::from(marked.len() as u64),
                count_marked_total(n),
                "marked n={n}"
            );
        }
    }

    #[test]
    fn quadrangulation_counts_small() {
        // rooted quadrangulations with n faces: 2 3^n Catalan(n) / (n+2)
        assert_eq!(brute_force_quadrangulations(1).unwrap().len(), 2);
        assert_eq!(brute_force_quadrangulations(2).unwrap().len(), 9);
    }

    #[test]
    fn delayed_quadrangulation_cardinality_n1() {
        let q1 = brute_force_delayed_quadrangulations(1).unwrap();
        assert_eq!(q1.len(), 4);
        for q in &q1 {
            q.validate().unwrap();
        }
    }

    #[test]
    fn diagnostics_move_toward_limits() {
        let reports = asymptotic_diagnostics(&[1, 50, 200]);
        assert!((reports[0].ratio_unicycles - 2.0 / 12.0).abs() < 1e-12);
        let d1 = (reports[1].ratio_unicycles - LIMIT_RATIO_UNICYCLES).abs();
        let d2 = (reports[2].ratio_unicycles - LIMIT_RATIO_UNICYCLES).abs();
        assert!(d2 < d1);
        let b1 = (reports[1].ratio_bias - LIMIT_RATIO_BIAS).abs();
        let b2 = (reports[2].ratio_bias - LIMIT_RATIO_BIAS).abs();
        assert!(b2 < b1);
    }

    #[test]
    fn budget_guard_rejects_large_enumerations() {
        assert!(matches!(
            brute_force_unicycles(6),
            Err(EnumError::BudgetExceeded(_))
        ));
        assert!(matches!(
            brute_force_quadrangulations(4),
            Err(EnumError::BudgetExceeded(_))
        ));
    }
}
