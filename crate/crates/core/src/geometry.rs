//! Delayed Voronoï cells on maps, closed-form limit densities with their
//! quadrature, and the Monte Carlo experiments that confront sampled maps
//! with the limiting laws.

use crate::bijections::cvs_unicycle;
use crate::map::{CombinatorialMap, VertexId};
use crate::sampling::{RngStream, UnicycleSampler, UnicycleWeights};
use rand::Rng;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum GeomError {
    #[error("point outside the support of the density")]
    OutOfSupport,
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Gamma(1/4).
pub const GAMMA_QUARTER: f64 = 3.625_609_908_221_908_3;
/// Gamma(3/4).
pub const GAMMA_THREE_QUARTERS: f64 = 1.225_416_702_465_177_6;
/// Gamma(5/4).
pub const GAMMA_FIVE_QUARTERS: f64 = 0.906_402_477_055_477_1;
/// Mean of the rescaled cycle length under the marked law:
/// Gamma(5/4) / (sqrt(2) Gamma(3/4)).
pub const MEAN_LENGTH_MARKED: f64 = 0.523_024_810_026_550_8;
/// Mean of the rescaled boundary length under the biased law:
/// Gamma(3/4) / (sqrt(2) Gamma(1/4)).
pub const MEAN_LENGTH_BIASED: f64 = 0.238_994_398_743_062_5;
/// Mean rescaled distance between two uniform points of a large
/// quadrangulation: 3 * 2^{1/4} Gamma(5/4) / sqrt(pi).
pub const MEAN_DISTANCE_LIMIT: f64 = 1.824_420_321_386_280_4;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// The two closed delayed Voronoï cells of a bi-pointed map: vertices at
/// least as close (shifted by delta) to one pole as to the other.
/// Boundary vertices realize the equality and belong to both cells.
#[derive(Debug, Clone)]
pub struct VoronoiPartition {
    pub cell: Vec<VertexId>,
    pub cell_bar: Vec<VertexId>,
    pub boundary: Vec<VertexId>,
    pub delta: i64,
}

/// Delays admissible for the pair (v0, v1): same parity as their
/// distance, strictly smaller in absolute value. Empty when the vertices
/// coincide or are adjacent.
pub fn admissible_delays(map: &CombinatorialMap, v0: VertexId, v1: VertexId) -> Vec<i64> {
    if v0 == v1 {
        return Vec::new();
    }
    let d = map.bfs_distances(v0)[v1 as usize] as i64;
    let mut out = Vec::new();
    let mut delta = -(d - 2);
    while delta <= d - 2 {
        out.push(delta);
        delta += 2;
    }
    out
}

/// Exact delayed Voronoï cells from two breadth-first sweeps:
/// `cell` holds z with d(v0,z) <= d(v1,z) + delta, `cell_bar` the
/// reversed inequality.
pub fn voronoi_cells(
    map: &CombinatorialMap,
    v0: VertexId,
    v1: VertexId,
    delta: i64,
) -> VoronoiPartition {
    let d0 = map.bfs_distances(v0);
    let d1 = map.bfs_distances(v1);
    let mut cell = Vec::new();
    let mut cell_bar = Vec::new();
    let mut boundary = Vec::new();
    for z in 0..map.n_vertices() as VertexId {
        let a = d0[z as usize] as i64;
        let b = d1[z as usize] as i64 + delta;
        if a <= b {
            cell.push(z);
        }
        if a >= b {
            cell_bar.push(z);
        }
        if a == b {
            boundary.push(z);
        }
    }
    VoronoiPartition {
        cell,
        cell_bar,
        boundary,
        delta,
    }
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, tol * 0.5, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, tol * 0.5, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Closed-form limit densities used by the acceptance experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitDensity {
    /// Joint law of (rescaled cycle length, external area fraction) under
    /// the marked unicycle law.
    MarkedLengthArea,
    /// Same pair under the biased (rooted/delayed) law.
    BiasedLengthArea,
    /// Biased pair for total volume `a` (lengths scale by sqrt(a)).
    BiasedLengthAreaVolume { a: f64 },
    /// Beta(1/4, 1/4): the volume fraction of a delayed Voronoï cell.
    BetaQuarter,
}

/// Beta(1/4, 1/4) normalizer: Gamma(1/4)^2 / Gamma(1/2).
fn beta_quarter_norm() -> f64 {
    GAMMA_QUARTER * GAMMA_QUARTER / SQRT_PI
}

impl LimitDensity {
    pub fn dimension(&self) -> usize {
        match self {
            LimitDensity::BetaQuarter => 1,
            _ => 2,
        }
    }

    /// Pointwise density evaluation; the support is the open box.
    pub fn density(&self, point: &[f64]) -> Result<f64, GeomError> {
        match *self {
            LimitDensity::BetaQuarter => {
                let y = *point.first().ok_or(GeomError::OutOfSupport)?;
                if !(0.0..=1.0).contains(&y) || y == 0.0 || y == 1.0 {
                    return Err(GeomError::OutOfSupport);
                }
                Ok((y * (1.0 - y)).powf(-0.75) / beta_quarter_norm())
            }
            LimitDensity::MarkedLengthArea => {
                let (x, y) = two(point)?;
                check_box(x, y, 1.0)?;
                let c = y * (1.0 - y);
                let norm = 2f64.powf(0.25) / (GAMMA_THREE_QUARTERS * SQRT_PI);
                Ok(norm * x.powf(1.5) / c.powf(1.5) * (-x * x / (2.0 * c)).exp())
            }
            LimitDensity::BiasedLengthArea => {
                let (x, y) = two(point)?;
                check_box(x, y, 1.0)?;
                let c = y * (1.0 - y);
                let norm = 1.0 / (2f64.powf(0.25) * GAMMA_QUARTER * SQRT_PI);
                Ok(norm * x.sqrt() / c.powf(1.5) * (-x * x / (2.0 * c)).exp())
            }
            LimitDensity::BiasedLengthAreaVolume { a } => {
                let (x, y) = two(point)?;
                check_box(x, y, a)?;
                let c = y * (a - y);
                let norm = a.powf(1.25) / (2f64.powf(0.25) * GAMMA_QUARTER * SQRT_PI);
                Ok(norm * x.sqrt() / c.powf(1.5) * (-a * x * x / (2.0 * c)).exp())
            }
        }
    }

    /// Marginal density along one axis (axis 0: length, axis 1: area).
    pub fn marginal(&self, axis: usize, v: f64) -> Result<f64, GeomError> {
        match *self {
            LimitDensity::BetaQuarter => {
                if axis != 0 {
                    return Err(GeomError::OutOfSupport);
                }
                self.density(&[v])
            }
            LimitDensity::MarkedLengthArea => match axis {
                0 => {
                    if v <= 0.0 {
                        return Err(GeomError::OutOfSupport);
                    }
                    Ok(2f64.powf(1.75) / GAMMA_THREE_QUARTERS * v.sqrt() * (-2.0 * v * v).exp())
                }
                1 => {
                    if v <= 0.0 || v >= 1.0 {
                        return Err(GeomError::OutOfSupport);
                    }
                    let c = v * (1.0 - v);
                    Ok(2f64.sqrt() * GAMMA_FIVE_QUARTERS / (GAMMA_THREE_QUARTERS * SQRT_PI)
                        * c.powf(-0.25))
                }
                _ => Err(GeomError::OutOfSupport),
            },
            LimitDensity::BiasedLengthArea => match axis {
                0 => {
                    if v <= 0.0 {
                        return Err(GeomError::OutOfSupport);
                    }
                    Ok(2f64.powf(1.25) / GAMMA_QUARTER / v.sqrt() * (-2.0 * v * v).exp())
                }
                1 => LimitDensity::BetaQuarter.density(&[v]),
                _ => Err(GeomError::OutOfSupport),
            },
            LimitDensity::BiasedLengthAreaVolume { a } => {
                let base = LimitDensity::BiasedLengthArea;
                match axis {
                    0 => Ok(base.marginal(0, v / a.sqrt())? / a.sqrt()),
                    1 => Ok(base.marginal(1, v / a)? / a),
                    _ => Err(GeomError::OutOfSupport),
                }
            }
        }
    }

    /// Marginal cumulative distribution by adaptive quadrature (absolute
    /// tolerance 1e-8), with endpoint singularities removed by power
    /// substitutions.
    pub fn cdf_numeric(&self, axis: usize, value: f64) -> Result<f64, GeomError> {
        const TOL: f64 = 1e-8;
        match *self {
            LimitDensity::BetaQuarter => {
                if axis != 0 {
                    return Err(GeomError::OutOfSupport);
                }
                Ok(beta_quarter_cdf_quadrature(value, TOL))
            }
            LimitDensity::MarkedLengthArea | LimitDensity::BiasedLengthArea => match axis {
                0 => {
                    if value <= 0.0 {
                        return Ok(0.0);
                    }
                    // substitute x = t^2: both x^{1/2} and x^{-1/2}
                    // integrands become smooth
                    let me = *self;
                    let f = move |t: f64| {
                        if t == 0.0 {
                            return match me {
                                LimitDensity::BiasedLengthArea => {
                                    2.0 * 2f64.powf(1.25) / GAMMA_QUARTER
                                }
                                _ => 0.0,
                            };
                        }
                        me.marginal(0, t * t).unwrap_or(0.0) * 2.0 * t
                    };
                    Ok(adaptive_simpson(&f, 0.0, value.sqrt(), TOL).min(1.0))
                }
                1 => {
                    if value <= 0.0 {
                        return Ok(0.0);
                    }
                    if value >= 1.0 {
                        return Ok(1.0);
                    }
                    if *self == LimitDensity::BiasedLengthArea {
                        return Ok(beta_quarter_cdf_quadrature(value, TOL));
                    }
                    // exponent -1/4 at both ends: substitute y = u^{4/3}
                    let me = *self;
                    let part = |hi: f64| {
                        let f = move |u: f64| {
                            let y = u.powf(4.0 / 3.0);
                            if y == 0.0 {
                                return 0.0;
                            }
                            me.marginal(1, y).unwrap_or(0.0) * (4.0 / 3.0) * u.powf(1.0 / 3.0)
                        };
                        adaptive_simpson(&f, 0.0, hi.powf(0.75), TOL)
                    };
                    if value <= 0.5 {
                        Ok(part(value))
                    } else {
                        Ok((1.0 - part(1.0 - value)).clamp(0.0, 1.0))
                    }
                }
                _ => Err(GeomError::OutOfSupport),
            },
            LimitDensity::BiasedLengthAreaVolume { a } => {
                let base = LimitDensity::BiasedLengthArea;
                match axis {
                    0 => base.cdf_numeric(0, value / a.sqrt()),
                    1 => base.cdf_numeric(1, value / a),
                    _ => Err(GeomError::OutOfSupport),
                }
            }
        }
    }

    /// Integral of the density over its whole support, via the module's
    /// quadrature; equals 1 up to tolerance for every kind.
    pub fn normalization(&self) -> f64 {
        const TOL: f64 = 1e-9;
        match *self {
            LimitDensity::BetaQuarter => beta_quarter_cdf_quadrature(1.0, TOL),
            LimitDensity::MarkedLengthArea
            | LimitDensity::BiasedLengthArea
            | LimitDensity::BiasedLengthAreaVolume { .. } => {
                let a = match *self {
                    LimitDensity::BiasedLengthAreaVolume { a } => a,
                    _ => 1.0,
                };
                // integrate the joint density: the inner sweep runs in a
                // scale-normalized variable x = sqrt(2c/a) t^2 so its bump
                // sits near t = 1 whatever y; the outer sweep substitutes
                // y = a u^4 to tame the endpoint singularity.
                let me = *self;
                let inner = move |y: f64| {
                    let c = y * (a - y);
                    let scale = (2.0 * c / a).sqrt();
                    let f = move |t: f64| {
                        if t == 0.0 {
                            return 0.0;
                        }
                        let x = scale * t * t;
                        me.density(&[x, y]).unwrap_or(0.0) * scale * 2.0 * t
                    };
                    adaptive_simpson(&f, 0.0, 3.4, TOL)
                };
                let half = move |_: ()| {
                    let f = |u: f64| {
                        let y = a * u.powi(4);
                        if y == 0.0 || y >= a / 2.0 + a * 1e-12 {
                            return 0.0;
                        }
                        inner(y) * 4.0 * a * u.powi(3)
                    };
                    adaptive_simpson(&f, 0.0, 0.5f64.powf(0.25), 1e-7)
                };
                2.0 * half(())
            }
        }
    }
}

fn two(point: &[f64]) -> Result<(f64, f64), GeomError> {
    if point.len() != 2 {
        return Err(GeomError::OutOfSupport);
    }
    Ok((point[0], point[1]))
}

fn check_box(x: f64, y: f64, a: f64) -> Result<(), GeomError> {
    if x <= 0.0 || y <= 0.0 || y >= a {
        return Err(GeomError::OutOfSupport);
    }
    Ok(())
}

/// Beta(1/4,1/4) CDF by quadrature after the substitution y = u^4 that
/// removes the endpoint singularity.
fn beta_quarter_cdf_quadrature(v: f64, tol: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        // full mass: two symmetric halves
        return 2.0 * beta_quarter_half(0.5, tol);
    }
    if v <= 0.5 {
        beta_quarter_half(v, tol)
    } else {
        (2.0 * beta_quarter_half(0.5, tol) - beta_quarter_half(1.0 - v, tol)).clamp(0.0, 1.0)
    }
}

fn beta_quarter_half(v: f64, tol: f64) -> f64 {
    let norm = beta_quarter_norm();
    let f = move |u: f64| {
        let y = u.powi(4);
        if y >= 1.0 {
            return 0.0;
        }
        4.0 * (1.0 - y).powf(-0.75) / norm
    };
    adaptive_simpson(&f, 0.0, v.powf(0.25), tol)
}

/// Fast closed-form CDF of the rescaled cycle length under the marked
/// law: the regularized incomplete gamma P(3/4, 2 x^2).
pub fn marked_length_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(0.75, 2.0 * x * x)
}

/// Fast closed-form Beta(1/4, 1/4) CDF.
pub fn beta_quarter_cdf(y: f64) -> f64 {
    use statrs::distribution::{Beta, ContinuousCDF};
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    Beta::new(0.25, 0.25).unwrap().cdf(y)
}

/// Kolmogorov-Smirnov statistic of a sample against a target CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(samples.len() >= 2, "need at least two samples");
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max((f - (i + 1) as f64 / n).abs());
    }
    sup
}

/// Critical values of the chi-square law at p = 0.001 for the degrees of
/// freedom used by the uniformity tests, with a Wilson-Hilferty fallback.
pub fn chi2_crit_p001(df: usize) -> f64 {
    match df {
        1 => 10.827566,
        2 => 13.815511,
        3 => 16.266236,
        8 => 26.124482,
        13 => 34.528179,
        18 => 42.312396,
        29 => 58.301173,
        59 => 98.324234,
        87 => 133.512074,
        391 => 483.143126,
        783 => 911.008714,
        _ => {
            let z = 3.090_232_306_167_813; // normal quantile at 0.999
            let d = df as f64;
            let c = 2.0 / (9.0 * d);
            d * (1.0 - c + z * c.sqrt()).powi(3)
        }
    }
}

/// The Monte Carlo experiments exposed by the stats interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// (cycle length, external area) of marked unicycles against the
    /// joint limit law.
    LengthArea,
    /// External area fraction under the biased law against Beta(1/4,1/4).
    BetaVolume,
    /// Geometric Voronoï cell volume against the external-side vertex
    /// count.
    VoronoiConsistency,
    /// Delay over distance against Uniform(-1, 1).
    DelayUniform,
    /// Importance-reweighted mean rescaled distance.
    MeanDistance,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::LengthArea,
        Experiment::BetaVolume,
        Experiment::VoronoiConsistency,
        Experiment::DelayUniform,
        Experiment::MeanDistance,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::LengthArea => "length_area",
            Experiment::BetaVolume => "beta_volume",
            Experiment::VoronoiConsistency => "voronoi_consistency",
            Experiment::DelayUniform => "delay_uniform",
            Experiment::MeanDistance => "mean_distance",
        }
    }
}

impl FromStr for Experiment {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self, GeomError> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| GeomError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Per-replica rows plus a deterministic summary block.
#[derive(Debug, Clone)]
pub struct EmpiricalSummary {
    pub experiment: Experiment,
    pub n: usize,
    pub seed: u64,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Vec<(String, f64)>,
}

impl EmpiricalSummary {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
    }

    /// CSV: a header, one row per replica, then a trailing summary block
    /// of `summary,<key>,<value>` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "replica")?;
        for c in &self.columns {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, "{i}")?;
            for v in row {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(w, ",{}", *v as i64)?;
                } else {
                    write!(w, ",{v:.12}")?;
                }
            }
            writeln!(w)?;
        }
        for (k, v) in &self.summary {
            writeln!(w, "summary,{k},{v:.12}")?;
        }
        Ok(())
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Runs an experiment with per-replica counter-seeded generators; results
/// are identical for a fixed (experiment, n, replicas, seed) whatever the
/// number of workers.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EmpiricalSummary, GeomError> {
    if cfg.replicas < 2 {
        return Err(GeomError::BadConfig("need at least two replicas".into()));
    }
    let weights = UnicycleWeights::new(cfg.n);
    let stream = RngStream::new(cfg.seed, 0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| GeomError::BadConfig(e.to_string()))?;

    let rows: Vec<Vec<f64>> = pool.install(|| {
        use rayon::prelude::*;
        (0..cfg.replicas as u64)
            .into_par_iter()
            .map_init(
                || UnicycleSampler::new(weights.clone()),
                |sampler, i| {
                    let mut rng = stream.rng_for_sample(i);
                    replica_row(cfg, sampler, &mut rng)
                },
            )
            .collect()
    });

    let n = cfg.n as f64;
    let mut summary: Vec<(String, f64)> = vec![("replicas".into(), cfg.replicas as f64)];
    let columns: Vec<&'static str>;
    match cfg.experiment {
        Experiment::LengthArea => {
            columns = vec!["cycle_len", "ext_area", "int_area", "len_scaled", "area_frac"];
            let lens: Vec<f64> = rows.iter().map(|r| r[3]).collect();
            let (mean, se) = mean_and_se(&lens);
            let ks = ks_statistic(&lens, marked_length_cdf);
            summary.push(("mean_len_scaled".into(), mean));
            summary.push(("se_len_scaled".into(), se));
            summary.push(("target_mean_len".into(), MEAN_LENGTH_MARKED));
            summary.push(("ks_len".into(), ks));
            let areas: Vec<f64> = rows.iter().map(|r| r[4]).collect();
            let (am, ase) = mean_and_se(&areas);
            summary.push(("mean_area_frac".into(), am));
            summary.push(("se_area_frac".into(), ase));
        }
        Experiment::BetaVolume => {
            columns = vec!["cycle_len", "ext_area", "area_frac"];
            let areas: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            let (mean, se) = mean_and_se(&areas);
            let var = {
                let m = mean;
                areas.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (areas.len() as f64 - 1.0)
            };
            let ks = ks_statistic(&areas, beta_quarter_cdf);
            summary.push(("mean_area_frac".into(), mean));
            summary.push(("se_area_frac".into(), se));
            summary.push(("var_area_frac".into(), var));
            summary.push(("target_var".into(), 1.0 / 6.0));
            summary.push(("ks_beta".into(), ks));
        }
        Experiment::VoronoiConsistency => {
            columns = vec![
                "cycle_len",
                "ext_area",
                "delay",
                "cell_volume",
                "boundary",
                "ext_side_count",
                "rel_diff",
            ];
            let mut diffs: Vec<f64> = rows.iter().map(|r| r[6]).collect();
            let med = median(&mut diffs);
            summary.push(("median_rel_diff".into(), med));
            let vols: Vec<f64> = rows.iter().map(|r| r[3]).collect();
            let counts: Vec<f64> = rows.iter().map(|r| r[5]).collect();
            summary.push(("corr_vol_count".into(), correlation(&vols, &counts)));
        }
        Experiment::DelayUniform => {
            columns = vec!["delay", "pole_distance", "ratio"];
            let ratios: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            let ks = ks_statistic(&ratios, |x| ((x + 1.0) / 2.0).clamp(0.0, 1.0));
            let (mean, se) = mean_and_se(&ratios);
            summary.push(("ks_uniform".into(), ks));
            summary.push(("mean_ratio".into(), mean));
            summary.push(("se_ratio".into(), se));
        }
        Experiment::MeanDistance => {
            columns = vec!["pole_distance", "dist_scaled", "inv_dist_scaled"];
            let invs: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            let (mean_inv, se_inv) = mean_and_se(&invs);
            let estimate = 1.0 / mean_inv;
            summary.push(("estimate".into(), estimate));
            summary.push(("target".into(), MEAN_DISTANCE_LIMIT));
            summary.push(("rel_err".into(), (estimate - MEAN_DISTANCE_LIMIT).abs() / MEAN_DISTANCE_LIMIT));
            summary.push(("se_inv".into(), se_inv));
        }
    }
    let _ = n;
    Ok(EmpiricalSummary {
        experiment: cfg.experiment,
        n: cfg.n,
        seed: cfg.seed,
        columns,
        rows,
        summary,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn replica_row<R: Rng>(cfg: &ExperimentConfig, sampler: &mut UnicycleSampler, rng: &mut R) -> Vec<f64> {
    let n = cfg.n as f64;
    match cfg.experiment {
        Experiment::LengthArea => {
            let dec = sampler.marked_decomposition(rng);
            let k = dec.cycle_len() as f64;
            let ext = dec.external_area() as f64;
            let int = dec.internal_area() as f64;
            vec![k, ext, int, k / (2.0 * n).sqrt(), ext / n]
        }
        Experiment::BetaVolume => {
            let dec = sampler.rooted_decomposition(rng);
            let k = dec.cycle_len() as f64;
            let ext = dec.external_area() as f64;
            vec![k, ext, ext / n]
        }
        Experiment::VoronoiConsistency => {
            // the image of the unicycle is needed together with the
            // unicycle's own statistics
            let marked = sampler
                .rooted_decomposition(rng)
                .assemble()
                .expect("sampled decomposition assembles");
            let root = rng.gen_range(0..2 * cfg.n) as u32;
            let u = marked.to_rooted(root).expect("re-rooting");
            let orientation = if rng.gen_bool(0.5) {
                crate::bijections::Orientation::Forward
            } else {
                crate::bijections::Orientation::Reverse
            };
            let stats = u.cycle_stats();
            let q = cvs_unicycle(&u, orientation).expect("valid image");
            let cells = voronoi_cells(q.map(), q.v0(), q.v1(), q.delay());
            let ext_side = (stats.cycle_len + stats.external_area + 1) as f64;
            let vol = cells.cell.len() as f64;
            vec![
                stats.cycle_len as f64,
                stats.external_area as f64,
                q.delay() as f64,
                vol,
                cells.boundary.len() as f64,
                ext_side,
                (vol - ext_side).abs() / n,
            ]
        }
        Experiment::DelayUniform => {
            let q = sampler.delayed_quadrangulation(rng);
            let d = q.pole_distance() as f64;
            vec![q.delay() as f64, d, q.delay() as f64 / d]
        }
        Experiment::MeanDistance => {
            let q = sampler.delayed_quadrangulation(rng);
            let d = q.pole_distance() as f64;
            let scaled = (9.0 / (8.0 * n)).powf(0.25) * d;
            vec![d, scaled, 1.0 / scaled]
        }
    }
}

/// Rescaling factor from graph distance to limit distance.
pub fn distance_scale(n: usize) -> f64 {
    (9.0 / (8.0 * n as f64)).powf(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelled::{ForestCode, UnicycleDecomposition};

    fn path_map() -> crate::bijections::DelayedQuadrangulation {
        // CVS image of the loop: path v0 - r - v1
        let u = UnicycleDecomposition {
            cycle_labels: vec![0],
            internal_forests: vec![ForestCode::default()],
            external_forests: vec![ForestCode::default()],
        }
        .assemble()
        .unwrap();
        cvs_unicycle(u.unicycle(), crate::bijections::Orientation::Forward).unwrap()
    }

    #[test]
    fn admissible_delay_sets() {
        let q = path_map();
        assert_eq!(admissible_delays(q.map(), q.v0(), q.v1()), vec![0]);
    }

    #[test]
    fn voronoi_on_the_path() {
        let q = path_map();
        let p = voronoi_cells(q.map(), q.v0(), q.v1(), 0);
        assert_eq!(p.cell.len(), 2);
        assert_eq!(p.cell_bar.len(), 2);
        assert_eq!(p.boundary.len(), 1);
        assert!(p.cell.contains(&q.v0()));
        assert!(p.cell_bar.contains(&q.v1()));
        // degenerate delay swallows everything
        let all = voronoi_cells(q.map(), q.v0(), q.v1(), 2);
        assert_eq!(all.cell.len(), q.map().n_vertices());
    }

    #[test]
    fn partition_identity_on_samples() {
        let w = UnicycleWeights::new(60);
        let mut sampler = UnicycleSampler::new(w);
        let stream = RngStream::new(3, 0);
        for i in 0..20 {
            let mut rng = stream.rng_for_sample(i);
            let q = sampler.delayed_quadrangulation(&mut rng);
            let p = voronoi_cells(q.map(), q.v0(), q.v1(), q.delay());
            assert_eq!(
                p.cell.len() + p.cell_bar.len() - p.boundary.len(),
                q.map().n_vertices()
            );
            let delays = admissible_delays(q.map(), q.v0(), q.v1());
            assert!(delays.contains(&q.delay()));
        }
    }

    #[test]
    fn densities_evaluate_to_frozen_values() {
        let beta = LimitDensity::BetaQuarter;
        assert!((beta.density(&[0.5]).unwrap() - 0.381379881750907).abs() < 1e-12);
        let biased = LimitDensity::BiasedLengthArea;
        assert!((biased.density(&[1.0, 0.5]).unwrap() - 0.141673137813870).abs() < 1e-12);
        assert!(beta.density(&[1.5]).is_err());
        assert!(biased.density(&[-1.0, 0.5]).is_err());
    }

    #[test]
    fn densities_normalize_to_one() {
        for d in [
            LimitDensity::BetaQuarter,
            LimitDensity::MarkedLengthArea,
            LimitDensity::BiasedLengthArea,
            LimitDensity::BiasedLengthAreaVolume { a: 2.0 },
        ] {
            let z = d.normalization();
            assert!((z - 1.0).abs() < 1e-6, "{d:?}: {z}");
        }
    }

    #[test]
    fn quadrature_cdf_matches_closed_forms() {
        let marked = LimitDensity::MarkedLengthArea;
        for x in [0.1, 0.3, 0.5230, 0.9, 1.5] {
            let q = marked.cdf_numeric(0, x).unwrap();
            assert!((q - marked_length_cdf(x)).abs() < 1e-6, "x={x}");
        }
        let beta = LimitDensity::BetaQuarter;
        for y in [0.01, 0.2, 0.5, 0.8, 0.99] {
            let q = beta.cdf_numeric(0, y).unwrap();
            assert!((q - beta_quarter_cdf(y)).abs() < 1e-6, "y={y}");
        }
    }

    #[test]
    fn means_rederived_by_quadrature() {
        // mean of the marked length marginal
        let f = |t: f64| {
            let x = t * t;
            x * LimitDensity::MarkedLengthArea.marginal(0, x).unwrap_or(0.0) * 2.0 * t
        };
        let mean = adaptive_simpson(&f, 1e-9, 2.5, 1e-10);
        assert!((mean - MEAN_LENGTH_MARKED).abs() < 1e-7, "mean={mean}");
        let g = |t: f64| {
            let x = t * t;
            x * LimitDensity::BiasedLengthArea.marginal(0, x).unwrap_or(0.0) * 2.0 * t
        };
        let mean_b = adaptive_simpson(&g, 1e-9, 2.5, 1e-10);
        assert!((mean_b - MEAN_LENGTH_BIASED).abs() < 1e-7, "mean={mean_b}");
    }

    #[test]
    fn ks_statistic_behaviour() {
        // samples drawn from the target itself stay close
        let stream = RngStream::new(31, 0);
        let mut rng = stream.rng_for_sample(0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let ks = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!(ks < 0.025, "ks={ks}");
        // constant sample against a continuous law
        let c = vec![0.5; 100];
        assert!(ks_statistic(&c, |x| x.clamp(0.0, 1.0)) >= 0.5);
        // a shift is detected at roughly its CDF gap
        let shifted: Vec<f64> = xs.iter().map(|x| (x + 0.2).min(1.0)).collect();
        let ks = ks_statistic(&shifted, |x| x.clamp(0.0, 1.0));
        assert!(ks > 0.15, "ks={ks}");
    }

    #[test]
    fn experiments_run_and_are_deterministic() {
        for exp in Experiment::ALL {
            let cfg = ExperimentConfig {
                experiment: exp,
                n: 30,
                replicas: 40,
                seed: 9,
                workers: 2,
            };
            let s1 = run_experiment(&cfg).unwrap();
            let cfg2 = ExperimentConfig { workers: 1, ..cfg };
            let s2 = run_experiment(&cfg2).unwrap();
            assert_eq!(s1.rows, s2.rows, "{exp:?}");
            let mut b1 = Vec::new();
            s1.write_csv(&mut b1).unwrap();
            let mut b2 = Vec::new();
            s2.write_csv(&mut b2).unwrap();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn experiment_parsing() {
        assert_eq!(
            "beta_volume".parse::<Experiment>().unwrap(),
            Experiment::BetaVolume
        );
        assert!(matches!(
            "nope".parse::<Experiment>(),
            Err(GeomError::UnknownExperiment(_))
        ));
    }
}
