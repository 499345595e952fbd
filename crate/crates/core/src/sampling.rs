//! Exact uniform samplers: cycle lengths by integer-weight inversion,
//! label bridges by backward dynamic programming, plane forests by the
//! cycle lemma, and full unicycles / delayed quadrangulations on top.
//!
//! Every sampler is exactly uniform on its finite support; no floating
//! point enters any probability computation. Randomness is drawn from
//! counter-seeded ChaCha streams so that results are reproducible for a
//! fixed (master seed, stream, sample index) regardless of scheduling.

use crate::bijections::{cvs_unicycle, DelayedQuadrangulation, Orientation};
use crate::enumeration::{central_trinomials_upto, marked_counts_by_k, rooted_counts_by_k, Count};
use crate::labelled::{ForestCode, ForestEvent, LabelledUnicycle, MarkedUnicycle, UnicycleDecomposition};
use num_bigint::BigUint;
use num_traits::Zero;
use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible stream of per-sample generators: the ChaCha key is a
/// hash of (master_seed, stream_index, sample_index), so any sample can
/// be regenerated in isolation on any worker.
#[derive(Debug, Clone, Copy)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    pub fn rng_for_sample(&self, sample_index: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_mut(8).enumerate() {
            let w = splitmix(
                self.master_seed
                    ^ splitmix(self.stream_index ^ splitmix(sample_index ^ (i as u64))),
            );
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Uniform integer in [0, bound), drawn by rejection on fixed-width
/// chunks so the law is exact.
pub fn uniform_below<R: RngCore>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero());
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top_mask: u32 = if bits % 32 == 0 {
        u32::MAX
    } else {
        (1u32 << (bits % 32)) - 1
    };
    loop {
        let mut digits = vec![0u32; words];
        for d in digits.iter_mut() {
            *d = rng.next_u32();
        }
        digits[words - 1] &= top_mask;
        let r = BigUint::new(digits);
        if &r < bound {
            return r;
        }
    }
}

/// Cumulative integer weights over cycle lengths 1..=n, stored densely
/// for moderate n and as block checkpoints with rolling recomputation
/// beyond that.
enum CumWeights {
    Dense { cum: Vec<Count> },
    Blocked {
        n: usize,
        block_len: usize,
        rooted: bool,
        total: Count,
        blocks: Vec<BlockSeed>,
    },
}

struct BlockSeed {
    /// first cycle length of the block
    k0: usize,
    /// total weight of all cycle lengths before the block
    cum_before: Count,
    tri_k: Count,
    tri_prev: Count,
    pow3: Count,
    binom: Count,
}

const DENSE_LIMIT: usize = 20_000;

impl CumWeights {
    fn build(n: usize, rooted: bool) -> CumWeights {
        if n <= DENSE_LIMIT {
            let mut terms = if rooted {
                rooted_counts_by_k(n)
            } else {
                marked_counts_by_k(n)
            };
            for i in 1..terms.len() {
                let prev = terms[i - 1].clone();
                terms[i] += prev;
            }
            CumWeights::Dense { cum: terms }
        } else {
            Self::build_blocked(n, rooted)
        }
    }

    fn build_blocked(n: usize, rooted: bool) -> CumWeights {
        use num_integer::Integer;
        let block_len = (n / 512).max(1);
        let tri = central_trinomials_upto(n);
        let mut blocks = Vec::new();
        let mut binom = crate::enumeration::binomial(2 * n as u64, (n - 1) as u64);
        let mut pow3 = BigUint::from(3u32).pow((n - 1) as u32);
        let mut cum = BigUint::zero();
        for k in 1..=n {
            if (k - 1) % block_len == 0 {
                blocks.push(BlockSeed {
                    k0: k,
                    cum_before: cum.clone(),
                    tri_k: tri[k].clone(),
                    tri_prev: tri[k - 1].clone(),
                    pow3: pow3.clone(),
                    binom: binom.clone(),
                });
            }
            cum += term_from_parts(n, k, rooted, &tri[k], &pow3, &binom);
            if k < n {
                let (q, r) = (&binom * ((n - k) as u64)).div_rem(&BigUint::from((n + k + 1) as u64));
                debug_assert!(r.is_zero());
                binom = q;
                let (q, r) = pow3.div_rem(&BigUint::from(3u32));
                debug_assert!(r.is_zero());
                pow3 = q;
            }
        }
        CumWeights::Blocked {
            n,
            block_len,
            rooted,
            total: cum,
            blocks,
        }
    }

    fn total(&self) -> &Count {
        match self {
            CumWeights::Dense { cum } => cum.last().unwrap(),
            CumWeights::Blocked { total, .. } => total,
        }
    }

    /// Smallest k whose cumulative weight exceeds `r`.
    fn invert(&self, r: &BigUint) -> usize {
        match self {
            CumWeights::Dense { cum } => {
                let mut lo = 0usize;
                let mut hi = cum.len(); // k = index + 1
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if &cum[mid] <= r {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                lo + 1
            }
            CumWeights::Blocked {
                n,
                block_len,
                rooted,
                blocks,
                ..
            } => {
                use num_integer::Integer;
                let mut lo = 0usize;
                let mut hi = blocks.len();
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if &blocks[mid].cum_before <= r {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                let seed = &blocks[lo - 1];
                let mut cum = seed.cum_before.clone();
                let mut tri_k = seed.tri_k.clone();
                let mut tri_prev = seed.tri_prev.clone();
                let mut pow3 = seed.pow3.clone();
                let mut binom = seed.binom.clone();
                for k in seed.k0..seed.k0 + block_len {
                    cum += term_from_parts(*n, k, *rooted, &tri_k, &pow3, &binom);
                    if &cum > r {
                        return k;
                    }
                    debug_assert!(k < *n);
                    let (q, rm) =
                        (&binom * ((n - k) as u64)).div_rem(&BigUint::from((n + k + 1) as u64));
                    debug_assert!(rm.is_zero());
                    binom = q;
                    let (q, rm) = pow3.div_rem(&BigUint::from(3u32));
                    debug_assert!(rm.is_zero());
                    pow3 = q;
                    let num = &tri_k * (2 * k as u64 + 1) + &tri_prev * (3 * k as u64);
                    let (q, rm) = num.div_rem(&BigUint::from(k as u64 + 1));
                    debug_assert!(rm.is_zero());
                    tri_prev = std::mem::replace(&mut tri_k, q);
                }
                unreachable!("cumulative inversion fell off its block")
            }
        }
    }
}

fn term_from_parts(n: usize, k: usize, rooted: bool, tri_k: &Count, pow3: &Count, binom: &Count) -> Count {
    use num_integer::Integer;
    if rooted {
        tri_k * pow3 * binom * 2u32
    } else {
        let num = tri_k * pow3 * binom * (k as u64);
        let (q, r) = num.div_rem(&BigUint::from(n as u64));
        debug_assert!(r.is_zero());
        q
    }
}

/// Shared, immutable exact weights for unicycles with n edges.
pub struct UnicycleWeights {
    n: usize,
    marked: CumWeights,
    rooted: CumWeights,
}

impl UnicycleWeights {
    pub fn new(n: usize) -> Arc<UnicycleWeights> {
        assert!(n >= 1);
        Arc::new(UnicycleWeights {
            n,
            marked: CumWeights::build(n, false),
            rooted: CumWeights::build(n, true),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn marked_total(&self) -> &Count {
        self.marked.total()
    }

    pub fn rooted_total(&self) -> &Count {
        self.rooted.total()
    }
}

/// Exact cycle-length draw: P(k) is proportional to the number of marked
/// (or rooted) unicycles with that cycle length.
pub fn sample_cycle_length<R: RngCore>(w: &UnicycleWeights, marked: bool, rng: &mut R) -> usize {
    let table = if marked { &w.marked } else { &w.rooted };
    let r = uniform_below(rng, table.total());
    table.invert(&r)
}

/// Walk counts N(x, r) = number of {-1,0,+1} walks of length r from x to
/// 0, tabulated exactly for r <= k.
pub struct BridgeTable {
    /// rows[r][x] for 0 <= x <= r (symmetric in x)
    rows: Vec<Vec<Count>>,
}

impl BridgeTable {
    pub fn new(k: usize) -> BridgeTable {
        let mut rows: Vec<Vec<Count>> = Vec::with_capacity(k + 1);
        rows.push(vec![BigUint::from(1u32)]);
        for r in 1..=k {
            let prev = &rows[r - 1];
            let at = |x: usize| -> Count {
                if x < prev.len() {
                    prev[x].clone()
                } else {
                    BigUint::zero()
                }
            };
            let mut row = Vec::with_capacity(r + 1);
            // N(0, r) = N(1, r-1) + N(0, r-1) + N(1, r-1)
            row.push(at(1) * 2u32 + at(0));
            for x in 1..=r {
                row.push(at(x - 1) + at(x) + at(x + 1));
            }
            rows.push(row);
        }
        BridgeTable { rows }
    }

    fn walks(&self, x: i64, r: usize) -> &Count {
        static ZERO: std::sync::OnceLock<Count> = std::sync::OnceLock::new();
        let x = x.unsigned_abs() as usize;
        if x > r {
            ZERO.get_or_init(BigUint::zero)
        } else {
            &self.rows[r][x]
        }
    }
}

/// Exactly uniform {-1,0,+1} bridge of length k from 0 to 0: each step is
/// chosen with probability N(x+s, r-1)/N(x, r).
pub fn sample_label_bridge<R: RngCore>(table: &BridgeTable, k: usize, rng: &mut R) -> Vec<i64> {
    let mut steps = Vec::with_capacity(k);
    let mut x = 0i64;
    for i in 0..k {
        let r = k - i;
        let total = table.walks(x, r);
        debug_assert!(!total.is_zero());
        let u = uniform_below(rng, total);
        let mut acc = table.walks(x - 1, r - 1).clone();
        let step = if u < acc {
            -1
        } else {
            acc += table.walks(x, r - 1);
            if u < acc {
                0
            } else {
                1
            }
        };
        steps.push(step);
        x += step;
    }
    debug_assert_eq!(x, 0);
    steps
}

/// Exactly uniform plane forest with `a` trees and `b` edges via the
/// cycle lemma: a uniform arrangement of b rises and b+a falls has
/// exactly `a` rotations that are first-passage paths to -a; one of them
/// is chosen uniformly and decoded. Trees are returned as parenthesis
/// shapes (true = descend into a new child).
pub fn sample_plane_forest<R: Rng>(a: usize, b: usize, rng: &mut R) -> Vec<Vec<bool>> {
    assert!(a >= 1);
    let len = 2 * b + a;
    let mut steps: Vec<i8> = std::iter::repeat(1i8)
        .take(b)
        .chain(std::iter::repeat(-1i8).take(b + a))
        .collect();
    // Fisher-Yates
    for i in (1..len).rev() {
        let j = rng.gen_range(0..=i);
        steps.swap(i, j);
    }
    // prefix sums over the doubled sequence
    let mut s = vec![0i64; 2 * len + 1];
    for i in 0..2 * len {
        s[i + 1] = s[i] + steps[i % len] as i64;
    }
    // valid offsets o: min over s[o+1 ..= o+len-1] > s[o] - a
    let mut valid = Vec::with_capacity(a);
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    // window of indices [o+1, o+len-1]
    for i in 1..len {
        while let Some(&back) = deque.back() {
            if s[back] >= s[i] {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(i);
    }
    for o in 0..len {
        let lo = o + 1;
        let hi = o + len - 1;
        while let Some(&front) = deque.front() {
            if front < lo {
                deque.pop_front();
            } else {
                break;
            }
        }
        while let Some(&back) = deque.back() {
            if s[back] >= s[hi] {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(hi);
        let min = s[*deque.front().unwrap()];
        if min > s[o] - a as i64 {
            valid.push(o);
        }
    }
    debug_assert_eq!(valid.len(), a, "cycle lemma gives exactly a rotations");
    let o = valid[rng.gen_range(0..valid.len())];
    // decode: rises open a child, falls close one; a fall at depth 0
    // finishes the current tree
    let mut trees: Vec<Vec<bool>> = Vec::with_capacity(a);
    let mut cur: Vec<bool> = Vec::new();
    let mut depth = 0i64;
    for i in 0..len {
        let st = steps[(o + i) % len];
        if st == 1 {
            cur.push(true);
            depth += 1;
        } else if depth > 0 {
            cur.push(false);
            depth -= 1;
        } else {
            trees.push(std::mem::take(&mut cur));
        }
    }
    debug_assert_eq!(trees.len(), a);
    trees
}

/// Stateful sampler holding shared weights plus a per-thread bridge-table
/// cache.
pub struct UnicycleSampler {
    weights: Arc<UnicycleWeights>,
    bridges: HashMap<usize, Rc<BridgeTable>>,
}

impl UnicycleSampler {
    pub fn new(weights: Arc<UnicycleWeights>) -> Self {
        UnicycleSampler {
            weights,
            bridges: HashMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.n
    }

    pub fn weights(&self) -> &Arc<UnicycleWeights> {
        &self.weights
    }

    fn bridge_table(&mut self, k: usize) -> Rc<BridgeTable> {
        self.bridges
            .entry(k)
            .or_insert_with(|| Rc::new(BridgeTable::new(k)))
            .clone()
    }

    /// Uniform marked unicycle, as its cycle/forest decomposition.
    pub fn marked_decomposition<R: Rng>(&mut self, rng: &mut R) -> UnicycleDecomposition {
        let k = sample_cycle_length(&self.weights, true, rng);
        self.decomposition_with_cycle_length(k, rng)
    }

    /// Decomposition drawn with the rooted cycle-length law; marginals of
    /// cycle length and areas then match a uniform rooted unicycle.
    pub fn rooted_decomposition<R: Rng>(&mut self, rng: &mut R) -> UnicycleDecomposition {
        let k = sample_cycle_length(&self.weights, false, rng);
        self.decomposition_with_cycle_length(k, rng)
    }

    /// Uniform marked unicycle with the given cycle length: bridge labels
    /// on the cycle, a forest of 2k trees with n-k edges grafted in slot
    /// order (external then internal at each position), and independent
    /// uniform increments on tree edges.
    pub fn decomposition_with_cycle_length<R: Rng>(
        &mut self,
        k: usize,
        rng: &mut R,
    ) -> UnicycleDecomposition {
        let n = self.weights.n;
        let table = self.bridge_table(k);
        let steps = sample_label_bridge(&table, k, rng);
        let mut cycle_labels = Vec::with_capacity(k);
        let mut l = 0i64;
        for s in steps.iter().take(k) {
            cycle_labels.push(l);
            l += s;
        }
        debug_assert_eq!(l, 0);
        let shapes = sample_plane_forest(2 * k, n - k, rng);
        let mut external_forests = Vec::with_capacity(k);
        let mut internal_forests = Vec::with_capacity(k);
        for (i, &root_label) in cycle_labels.iter().enumerate() {
            external_forests.push(label_shape(&shapes[2 * i], root_label, rng));
            internal_forests.push(label_shape(&shapes[2 * i + 1], root_label, rng));
        }
        UnicycleDecomposition {
            cycle_labels,
            internal_forests,
            external_forests,
        }
    }

    /// Exactly uniform marked unicycle.
    pub fn marked<R: Rng>(&mut self, rng: &mut R) -> MarkedUnicycle {
        self.marked_decomposition(rng)
            .assemble()
            .expect("sampled decomposition assembles")
    }

    /// Exactly uniform rooted well-labelled unicycle: a marked unicycle
    /// with the rooted cycle-length law, re-rooted at a uniform oriented
    /// edge with labels renormalized, mark forgotten.
    pub fn rooted<R: Rng>(&mut self, rng: &mut R) -> LabelledUnicycle {
        let marked = self
            .rooted_decomposition(rng)
            .assemble()
            .expect("sampled decomposition assembles");
        let root = rng.gen_range(0..2 * self.weights.n) as u32;
        marked.to_rooted(root).expect("any dart roots a unicycle")
    }

    /// Exactly uniform delayed quadrangulation: the image of a uniform
    /// rooted unicycle under the corner construction with a fair
    /// orientation coin; the delay emerges as the label gap of the two
    /// fresh vertices.
    pub fn delayed_quadrangulation<R: Rng>(&mut self, rng: &mut R) -> DelayedQuadrangulation {
        let u = self.rooted(rng);
        let orientation = if rng.gen_bool(0.5) {
            Orientation::Forward
        } else {
            Orientation::Reverse
        };
        cvs_unicycle(&u, orientation).expect("image of a valid unicycle")
    }
}

/// Turns a parenthesis shape into a labelled forest code: every edge gets
/// an independent uniform increment in {-1, 0, +1} on top of its parent
/// label.
fn label_shape<R: Rng>(shape: &[bool], root_label: i64, rng: &mut R) -> ForestCode {
    let mut events = Vec::with_capacity(shape.len());
    let mut stack = vec![root_label];
    for &open in shape {
        if open {
            let l = stack.last().unwrap() + rng.gen_range(-1i64..=1);
            events.push(ForestEvent::Open(l));
            stack.push(l);
        } else {
            events.push(ForestEvent::Close);
            stack.pop();
        }
    }
    ForestCode { events }
}

/// Convenience for tests: a quick deterministic generator.
pub fn test_rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use std::collections::HashMap;

    #[test]
    fn uniform_below_is_in_range_and_deterministic() {
        let stream = RngStream::new(42, 0);
        let mut r1 = stream.rng_for_sample(7);
        let mut r2 = stream.rng_for_sample(7);
        let bound = BigUint::from(123456789u64) * BigUint::from(987654321u64);
        for _ in 0..100 {
            let a = uniform_below(&mut r1, &bound);
            let b = uniform_below(&mut r2, &bound);
            assert_eq!(a, b);
            assert!(a < bound);
        }
        let mut r3 = stream.rng_for_sample(8);
        assert_ne!(
            uniform_below(&mut r1, &bound),
            uniform_below(&mut r3, &bound)
        );
    }

    #[test]
    fn cycle_length_matches_exact_law_n2() {
        // marked: P(1) = 6/9, P(2) = 3/9; rooted: P(1) = 24/30, P(2) = 6/30
        let w = UnicycleWeights::new(2);
        assert_eq!(w.marked_total().to_u32(), Some(9));
        assert_eq!(w.rooted_total().to_u32(), Some(30));
        let stream = RngStream::new(5, 0);
        let mut rng = stream.rng_for_sample(0);
        let draws = 90_000;
        let mut ones = 0usize;
        for _ in 0..draws {
            if sample_cycle_length(&w, true, &mut rng) == 1 {
                ones += 1;
            }
        }
        let p = ones as f64 / draws as f64;
        assert!((p - 6.0 / 9.0).abs() < 0.01, "p={p}");
        let mut ones = 0usize;
        for _ in 0..draws {
            if sample_cycle_length(&w, false, &mut rng) == 1 {
                ones += 1;
            }
        }
        let p = ones as f64 / draws as f64;
        assert!((p - 24.0 / 30.0).abs() < 0.01, "p={p}");
    }

    #[test]
    fn blocked_weights_agree_with_dense() {
        // force the blocked path on a small n and compare inversions
        let dense = CumWeights::build(50, true);
        let blocked = CumWeights::build_blocked(50, true);
        assert_eq!(dense.total(), blocked.total());
        let mut r = BigUint::zero();
        let step = blocked.total() / 97u32;
        for _ in 0..97 {
            assert_eq!(dense.invert(&r), blocked.invert(&r));
            r += &step;
            if &r >= dense.total() {
                break;
            }
        }
    }

    #[test]
    fn bridges_are_uniform_k2_and_k4() {
        let t2 = BridgeTable::new(2);
        assert_eq!(t2.walks(0, 2).to_u32(), Some(3));
        let t4 = BridgeTable::new(4);
        assert_eq!(t4.walks(0, 4).to_u32(), Some(19));
        let stream = RngStream::new(11, 0);
        let mut rng = stream.rng_for_sample(0);
        let mut counts: HashMap<Vec<i64>, usize> = HashMap::new();
        let draws = 57_000;
        for _ in 0..draws {
            *counts
                .entry(sample_label_bridge(&t4, 4, &mut rng))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 19);
        let expected = draws as f64 / 19.0;
        let chi2: f64 = counts
            .values()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square critical value, 18 degrees of freedom, p = 0.001
        assert!(chi2 < 42.312, "chi2={chi2}");
        // k = 1 forces the zero step
        let t1 = BridgeTable::new(1);
        assert_eq!(sample_label_bridge(&t1, 1, &mut rng), vec![0]);
    }

    #[test]
    fn forests_are_uniform() {
        let stream = RngStream::new(13, 0);
        let mut rng = stream.rng_for_sample(0);
        // a=2, b=0: only the empty forest
        let empty: Vec<Vec<bool>> = vec![vec![], vec![]];
        assert_eq!(sample_plane_forest(2, 0, &mut rng), empty);
        // a=2, b=1: two forests
        let mut first = 0usize;
        let draws = 40_000;
        for _ in 0..draws {
            let f = sample_plane_forest(2, 1, &mut rng);
            if !f[0].is_empty() {
                first += 1;
            }
        }
        let p = first as f64 / draws as f64;
        assert!((p - 0.5).abs() < 0.012, "p={p}");
        // a=4, b=2: 14 forests, chi-square at p=0.001 (13 dof)
        let mut counts: HashMap<Vec<Vec<bool>>, usize> = HashMap::new();
        let draws = 70_000;
        for _ in 0..draws {
            *counts
                .entry(sample_plane_forest(4, 2, &mut rng))
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 14);
        let expected = draws as f64 / 14.0;
        let chi2: f64 = counts
            .values()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 34.528, "chi2={chi2}");
    }

    #[test]
    fn sampled_unicycles_validate_and_obey_the_area_identity() {
        let w = UnicycleWeights::new(40);
        let mut sampler = UnicycleSampler::new(w);
        let stream = RngStream::new(17, 0);
        for i in 0..50 {
            let mut rng = stream.rng_for_sample(i);
            let m = sampler.marked(&mut rng);
            let s = m.cycle_stats();
            assert_eq!(s.cycle_len + s.external_area + s.internal_area, 40);
            let u = sampler.rooted(&mut rng);
            assert_eq!(u.labels()[u.map().vertex_of(u.map().root()) as usize], 0);
            let q = sampler.delayed_quadrangulation(&mut rng);
            q.validate().unwrap();
            assert_eq!(q.map().n_faces(), 40);
        }
    }

    #[test]
    fn n1_delayed_quadrangulations_are_uniform_over_four() {
        let w = UnicycleWeights::new(1);
        let mut sampler = UnicycleSampler::new(w);
        let stream = RngStream::new(19, 0);
        let mut rng = stream.rng_for_sample(0);
        let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
        let draws = 40_000;
        for _ in 0..draws {
            let q = sampler.delayed_quadrangulation(&mut rng);
            *counts.entry(q.canonical_code()).or_default() += 1;
        }
        assert_eq!(counts.len(), 4);
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts
            .values()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        // 3 dof, p = 0.001
        assert!(chi2 < 16.266, "chi2={chi2}");
    }

    #[test]
    fn decomposition_draws_are_deterministic_per_stream() {
        let w = UnicycleWeights::new(30);
        let mut s1 = UnicycleSampler::new(w.clone());
        let mut s2 = UnicycleSampler::new(w);
        let stream = RngStream::new(23, 4);
        for i in 0..10 {
            let d1 = s1.marked_decomposition(&mut stream.rng_for_sample(i));
            let d2 = s2.marked_decomposition(&mut stream.rng_for_sample(i));
            assert_eq!(d1, d2);
        }
    }
}
