//! Estimators of the asymptotic variance and empirical checks of the
//! quantitative inequalities behind the coupling: the conditional `W₂`
//! bound, the maximal tail inequality and the covariance inequality.
//!
//! The constants in those inequalities are not known, so every check is a
//! boundedness, shape or domination check with explicit slack.

use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::coupling::{BlockSource, MarkovSource};
use crate::dynamics;
use crate::error::{precondition, Result};
use crate::gaussian::{sample_normal, w2_empirical_vs_gaussian, NormalSpec};
use crate::math;
use crate::observables::empirical_tail;
use crate::par;
use crate::quantmix::{self, MixingProfile, QuantileFn};
use crate::rng::{tag, StreamKey};
use crate::stats;

pub use crate::stats::ks_distance;

/// How the paths behind the covariance-series estimate are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesForm {
    /// Stationary Perron–Frobenius chain.
    Chain,
    /// Forward orbit of the map from an invariant draw.
    Orbit,
    /// Chain values pooled over all replicates and put in random order: an
    /// i.i.d. surrogate with the same marginal law.
    Shuffled,
}

/// `ν(X₀²) + 2 Σ_{k=1}^{K} Cov(X₀, X_k)` averaged over independent paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEstimate {
    pub value: f64,
    pub std_error: f64,
    pub k_trunc: usize,
    /// `|2 Cov(X₀, X_K)|` relative to the running sum.
    pub last_term_ratio: f64,
    /// The last term exceeds 10% of the sum: `K` is too small.
    pub truncation_warning: bool,
}

fn path_values(source: &MarkovSource<'_>, len: usize, form: SeriesForm, key: StreamKey) -> Result<Vec<f64>> {
    Ok(match form {
        SeriesForm::Chain | SeriesForm::Shuffled => source.path(len, key)?.increments,
        SeriesForm::Orbit => {
            let mut rng = key.stream();
            let mut x = dynamics::sample_invariant(source.model, &mut rng)?;
            (0..len)
                .map(|_| {
                    x = source.model.apply(x);
                    source.observable.eval_capped(x).value - source.center
                })
                .collect()
        }
    })
}

fn series_terms(x: &[f64], k_trunc: usize) -> (f64, f64) {
    let n = x.len();
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in 0..=k_trunc {
        let cov = x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / (n - k) as f64;
        let term = if k == 0 { cov } else { 2.0 * cov };
        sum += term;
        last = term;
    }
    (sum, last)
}

/// Truncated covariance series from `reps` stationary paths of length
/// `path_len`, centred at `ν̂(f)`.
pub fn sigma2_series(
    source: &MarkovSource<'_>,
    k_trunc: usize,
    reps: usize,
    path_len: usize,
    form: SeriesForm,
    key: StreamKey,
) -> Result<SeriesEstimate> {
    if k_trunc < 1 {
        return Err(precondition!("truncation lag must be >= 1"));
    }
    if reps < 2 || path_len <= 4 * k_trunc {
        return Err(precondition!("need reps >= 2 and paths longer than 4 K"));
    }
    let paths = par::map_indexed(reps, |r| path_values(source, path_len, form, key.replicate(r as u64)));
    let mut paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    if form == SeriesForm::Shuffled {
        // shuffling within a path would keep each path's sum, and with it
        // a bias of 2K(σ² − ν(X²))/N; pool all replicates first
        let mut pool: Vec<f64> = paths.concat();
        pool.shuffle(&mut StreamKey { tag: tag::SHUFFLE, ..key }.stream());
        paths = pool.chunks(path_len).map(|c| c.to_vec()).collect();
    }
    let per_path: Vec<(f64, f64)> = par::map_indexed(reps, |r| series_terms(&paths[r], k_trunc));
    let sums: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let value = stats::mean(&sums);
    let last = stats::mean(&per_path.iter().map(|p| p.1).collect::<Vec<_>>());
    let last_term_ratio = if value != 0.0 { (last / value).abs() } else { 0.0 };
    Ok(SeriesEstimate {
        value,
        std_error: stats::std_error(&sums),
        k_trunc,
        last_term_ratio,
        truncation_warning: last_term_ratio > 0.1,
    })
}

/// Sample variance of `S_n / √n` over independent stationary paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub reps: usize,
}

pub fn normalized_sums<S: BlockSource>(source: &S, n: usize, reps: usize, key: StreamKey) -> Result<Vec<f64>> {
    let sums = par::map_indexed(reps, |r| -> Result<f64> {
        let p = source.path(n, key.replicate(r as u64))?;
        Ok(p.increments.iter().sum::<f64>() / math::sqrt(n as f64))
    });
    sums.into_iter().collect()
}

pub fn sigma2_batch<S: BlockSource>(source: &S, n: usize, reps: usize, key: StreamKey) -> Result<BatchEstimate> {
    if n < 1024 || reps < 100 {
        return Err(precondition!("batch estimate needs n >= 1024 and reps >= 100"));
    }
    let sums = normalized_sums(source, n, reps, key)?;
    let value = stats::variance(&sums);
    // fourth-moment standard error of a sample variance
    let m = stats::mean(&sums);
    let m4 = sums.iter().map(|s| libm::pow(s - m, 4.0)).sum::<f64>() / reps as f64;
    let std_error = math::sqrt(((m4 - value * value) / reps as f64).max(0.0));
    Ok(BatchEstimate { value, std_error, n, reps })
}

/// Both variance estimates side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    pub sigma2_series: f64,
    pub series_std_error: f64,
    pub sigma2_batch: f64,
    pub batch_std_error: f64,
    pub k_trunc: usize,
    /// `|series − batch| / max(|series|, |batch|)`.
    pub agreement: f64,
    pub truncation_warning: bool,
    /// Both estimates lie within two standard errors of zero.
    pub sigma_zero: bool,
}

impl VarianceReport {
    pub fn new(series: &SeriesEstimate, batch: &BatchEstimate) -> Self {
        let scale = series.value.abs().max(batch.value.abs());
        let agreement = if scale > 0.0 { (series.value - batch.value).abs() / scale } else { 0.0 };
        let sigma_zero = series.value < 2.0 * series.std_error && batch.value < 2.0 * batch.std_error;
        Self {
            sigma2_series: series.value,
            series_std_error: series.std_error,
            sigma2_batch: batch.value,
            batch_std_error: batch.std_error,
            k_trunc: series.k_trunc,
            agreement,
            truncation_warning: series.truncation_warning,
            sigma_zero,
        }
    }
}

/// KS distance of `S_n / (σ √n)` to `N(0, 1)`.
pub fn clt_ks<S: BlockSource>(source: &S, n: usize, reps: usize, sigma2: f64, key: StreamKey) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(precondition!("CLT check needs sigma2 > 0"));
    }
    let s = math::sqrt(sigma2);
    let z: Vec<f64> = normalized_sums(source, n, reps, key)?.into_iter().map(|v| v / s).collect();
    Ok(stats::ks_distance(&z, crate::gaussian::std_normal_cdf))
}

/// Upper-tail quantile of `|f(Y) − ν̂(f)|` from invariant draws.
pub fn centered_quantile(source: &MarkovSource<'_>, samples: usize, key: StreamKey) -> Result<QuantileFn> {
    let mut rng = key.stream();
    let mags = (0..samples)
        .map(|_| {
            let y = dynamics::sample_invariant(source.model, &mut rng)?;
            Ok((source.observable.eval_capped(y).value - source.center).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(empirical_tail(mags).quantile())
}

/// Empirical mixing profile from lag estimates (entry 0 is lag zero).
/// Estimates within twice their noise floor are indistinguishable from
/// independence and are set to zero.
pub fn resolved_profile(estimates: &[quantmix::AlphaEstimate]) -> Result<MixingProfile> {
    if estimates.len() < 2 {
        return Err(precondition!("need estimates for at least one positive lag"));
    }
    MixingProfile::empirical(
        estimates[1..].iter().map(|e| if e.value > 2.0 * e.noise_floor { e.value } else { 0.0 }).collect(),
    )
}

/// `E W₂²` between an `m`-point `N(0,1)` sample and `N(0,1)`: the Monte
/// Carlo floor of the conditional `W₂` estimate, per unit variance.
pub fn gaussian_w2_floor(m: usize, reps: usize, key: StreamKey) -> Result<f64> {
    let spec = NormalSpec::new(1.0)?;
    let vals = par::map_indexed(reps, |r| {
        let mut rng = key.replicate(r as u64).stream();
        let s = stats::sorted(&(0..m).map(|_| sample_normal(spec, &mut rng)).collect::<Vec<_>>());
        w2_empirical_vs_gaussian(&s, spec).map(|w| w * w)
    });
    Ok(stats::mean(&vals.into_iter().collect::<Result<Vec<_>>>()?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2Row {
    pub n: usize,
    /// Mean over start states of `W₂²(P̂_{S_n | Y₀}, N(0, nσ²))`.
    pub w2_sq: f64,
    pub w2_sq_se: f64,
    /// Expected contribution of the finite conditional sample alone.
    pub floor: f64,
    /// `n^{1/2} M_{3,α}(Q, n^{1/2})`.
    pub rhs: f64,
    /// `(w2_sq − floor) / rhs`.
    pub ratio: f64,
    /// `w2_sq / rhs`, floor included.
    pub raw_ratio: f64,
    /// `w2_sq − floor` exceeds two standard errors.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2Table {
    pub rows: Vec<W2Row>,
    pub max_over_min: f64,
    pub kendall_tau: f64,
    /// `max/min ≤ 10` and `|τ| ≤ 0.6`.
    pub bounded: bool,
}

/// Largest allowed spread of the ratio sequence.
pub const W2_RATIO_SPREAD: f64 = 10.0;
/// Largest allowed `|τ|` of the ratio against `n`.
pub const W2_TREND_TAU: f64 = 0.6;

/// Conditional `W₂²` against the Gaussian, relative to the right-hand side
/// of the conditional `W₂` bound with constant one.
///
/// A finite conditional sample of size `m_cond` adds about `nσ² b_m` to
/// the raw estimate, where `b_m` is the Gaussian floor of
/// [`gaussian_w2_floor`]. That term grows like `n` while the right-hand side
/// grows like `n^{1/2}`, so the verdict uses the floor-corrected ratio.
#[allow(clippy::too_many_arguments)]
pub fn w2_bound_check<S: BlockSource>(
    source: &S,
    sigma2: f64,
    q: &QuantileFn,
    profile: &MixingProfile,
    n_grid: &[usize],
    m_cond: usize,
    reps: usize,
    key: StreamKey,
) -> Result<W2Table> {
    if !(sigma2 > 0.0) {
        return Err(precondition!("W2 check needs sigma2 > 0"));
    }
    if n_grid.len() < 2 || reps < 2 || m_cond < 2 {
        return Err(precondition!("W2 check needs two grid points, reps >= 2 and m_cond >= 2"));
    }
    let unit_floor = gaussian_w2_floor(m_cond, 200, StreamKey { tag: tag::DIAGNOSTIC, ..key }.with(u64::MAX, 0, 0))?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let spec = NormalSpec::new(n as f64 * sigma2)?;
        let mut per_rep = Vec::with_capacity(reps);
        for r in 0..reps {
            let y0 = source.path(0, StreamKey { tag: tag::STATIONARY_START, ..key }.with(n as u64, r as u64, 0))?.states[0];
            let base = StreamKey { tag: tag::CONDITIONAL, ..key }.with(n as u64, r as u64, 0);
            let sums = par::map_indexed(m_cond, |j| source.conditional_sum(y0, n, base.replicate(j as u64)));
            let sums = stats::sorted(&sums.into_iter().collect::<Result<Vec<_>>>()?);
            let w = w2_empirical_vs_gaussian(&sums, spec)?;
            per_rep.push(w * w);
        }
        let w2_sq = stats::mean(&per_rep);
        let floor = unit_floor * n as f64 * sigma2;
        let lambda = math::sqrt(n as f64);
        let rhs = lambda * quantmix::moment_m3_truncated(profile, q, lambda)?.value();
        let w2_sq_se = stats::std_error(&per_rep);
        rows.push(W2Row {
            n,
            w2_sq,
            w2_sq_se,
            floor,
            rhs,
            ratio: (w2_sq - floor) / rhs,
            raw_ratio: w2_sq / rhs,
            resolved: w2_sq - floor > 2.0 * w2_sq_se,
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_over_min = if min > 0.0 { max / min } else { f64::INFINITY };
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let kendall_tau = stats::kendall_tau(&ns, &ratios);
    Ok(W2Table { rows, max_over_min, kendall_tau, bounded: max_over_min <= W2_RATIO_SPREAD && kendall_tau.abs() <= W2_TREND_TAU })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalRow {
    pub lambda: f64,
    /// `P̂(max_{k≤n} |S_k| ≥ 5λ)`.
    pub tail: f64,
    /// `exp(−λ² / (c n σ²))` with the fitted `c`.
    pub gaussian: f64,
    /// `n λ^{−3} (M_{3,α}(Q, λ) + σ³)`.
    pub polynomial: f64,
    /// Three binomial standard errors plus `3/reps`.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalTable {
    pub rows: Vec<MaximalRow>,
    pub c_fit: f64,
    pub monotone: bool,
    /// `tail ≤ gaussian + polynomial + band` at every λ.
    pub shape_consistent: bool,
    /// `tail ≤ gaussian + band` at every λ past the saturated region, far
    /// tail included.
    pub gaussian_dominates: bool,
}

/// Tail probabilities in `[BULK_LEVEL, 1 − BULK_LEVEL]` form the bulk used
/// to fit `c`; above it the tail is saturated at one.
pub const BULK_LEVEL: f64 = 0.05;

fn in_bulk(t: f64) -> bool {
    (BULK_LEVEL..=1.0 - BULK_LEVEL).contains(&t)
}

/// Empirical tail of the maximum of partial sums against the Gaussian plus
/// polynomial envelope of the maximal inequality.
#[allow(clippy::too_many_arguments)]
pub fn maximal_tail<S: BlockSource>(
    source: &S,
    sigma2: f64,
    q: &QuantileFn,
    profile: &MixingProfile,
    n: usize,
    lambda_grid: &[f64],
    reps: usize,
    key: StreamKey,
) -> Result<MaximalTable> {
    if reps < 10_000 {
        return Err(precondition!("maximal tail needs reps >= 10000"));
    }
    if lambda_grid.iter().any(|l| !(*l > 0.0)) || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(precondition!("lambda grid must be positive and increasing"));
    }
    let maxima = par::map_indexed(reps, |r| -> Result<f64> {
        let p = source.path(n, key.replicate(r as u64))?;
        let mut s = 0.0f64;
        let mut best = 0.0f64;
        for x in &p.increments {
            s += x;
            best = best.max(s.abs());
        }
        Ok(best)
    });
    let maxima = stats::sorted(&maxima.into_iter().collect::<Result<Vec<_>>>()?);
    let tails: Vec<f64> = lambda_grid
        .iter()
        .map(|l| (reps - maxima.partition_point(|m| *m < 5.0 * l)) as f64 / reps as f64)
        .collect();
    let scale = n as f64 * sigma2;
    // smallest c whose Gaussian curve dominates the bulk
    let c_fit = lambda_grid
        .iter()
        .zip(&tails)
        .filter(|(_, t)| in_bulk(**t))
        .map(|(l, t)| -l * l / (scale * math::ln(*t)))
        .fold(0.0, f64::max);
    let sigma3 = libm::pow(sigma2.max(0.0), 1.5);
    let mut rows = Vec::with_capacity(lambda_grid.len());
    for (l, t) in lambda_grid.iter().zip(&tails) {
        let gaussian = if c_fit > 0.0 && scale > 0.0 { math::exp(-l * l / (c_fit * scale)) } else { 0.0 };
        let m3 = quantmix::moment_m3_truncated(profile, q, *l)?.value();
        let polynomial = n as f64 * libm::pow(*l, -3.0) * (m3 + sigma3);
        let band = 3.0 * math::sqrt(t * (1.0 - t) / reps as f64) + 3.0 / reps as f64;
        rows.push(MaximalRow { lambda: *l, tail: *t, gaussian, polynomial, band });
    }
    let monotone = tails.windows(2).all(|w| w[1] <= w[0]);
    let shape_consistent = rows.iter().all(|r| r.tail <= r.gaussian + r.polynomial + r.band);
    let gaussian_dominates = rows.iter().filter(|r| r.tail <= 1.0 - BULK_LEVEL).all(|r| r.tail <= r.gaussian + r.band);
    Ok(MaximalTable { rows, c_fit, monotone, shape_consistent, gaussian_dominates })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceRow {
    pub i: usize,
    /// `Σ_b w_b |Ê(X_i | Y₀ ∈ b)|`.
    pub lhs: f64,
    /// Expected size of `lhs` when `X_i` is independent of `Y₀`.
    pub lhs_floor: f64,
    pub alpha_hat: f64,
    /// `8 ∫₀^{α̂(i)} Q̂(u) du`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    pub rows: Vec<CovarianceRow>,
    pub all_hold: bool,
    /// Kendall τ of `rhs / lhs` against `i`.
    pub margin_trend: f64,
    pub undersmoothed: bool,
}

/// `∫₀^a Q(u) du` by the decade integrator.
fn quantile_integral(q: &QuantileFn, a: f64) -> Result<f64> {
    if a <= 0.0 {
        return Ok(0.0);
    }
    // M_{1} with α ≡ 0 past lag zero is ∫₀¹ Q; rescale the upper limit
    let profile = MixingProfile::independent();
    if a >= 1.0 {
        return Ok(quantmix::moment_m(&profile, q, 1.0)?.value());
    }
    let shifted = match q {
        QuantileFn::Grid { levels, values } => {
            QuantileFn::grid(levels.iter().map(|l| l / a).collect(), values.clone())?
        }
        _ => return Ok(quantmix::moment_m(&profile, &scaled(q, a)?, 1.0)?.value() * a),
    };
    Ok(quantmix::moment_m(&profile, &shifted, 1.0)?.value() * a)
}

/// `u ↦ Q(a u)` for the analytic forms.
fn scaled(q: &QuantileFn, a: f64) -> Result<QuantileFn> {
    Ok(match q {
        QuantileFn::Power { c, b, cap } => QuantileFn::Power { c: c * libm::pow(a, -1.0 / b), b: *b, cap: *cap },
        QuantileFn::Constant(m) => QuantileFn::Constant(*m),
        QuantileFn::PowerLog { .. } => return Err(precondition!("scaled power-log quantile is not supported")),
        QuantileFn::Grid { .. } => unreachable!("handled by the caller"),
    })
}

/// `‖E(X_i | Y₀)‖₁` by equal-count binning of `Y₀`, against
/// `8 ∫₀^{α̂(i)} Q̂` with `α̂` estimated from the same replicates. The bound
/// holds at `i` when `lhs ≤ rhs + lhs_floor`.
pub fn covariance_bound_check(
    source: &MarkovSource<'_>,
    q: &QuantileFn,
    i_grid: &[usize],
    reps: usize,
    bins: usize,
    grid_x: &[f64],
    key: StreamKey,
) -> Result<CovarianceTable> {
    if reps < 10_000 {
        return Err(precondition!("covariance check needs reps >= 10000"));
    }
    let max_i = i_grid.iter().copied().max().unwrap_or(0);
    let paths = par::map_indexed(reps, |r| source.path(max_i.max(1), key.replicate(r as u64)));
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    let y0: Vec<f64> = paths.iter().map(|p| p.states[0]).collect();
    let mut order: Vec<usize> = (0..reps).collect();
    order.sort_by(|a, b| y0[*a].total_cmp(&y0[*b]));
    let mut bin_of = alloc::vec![0usize; reps];
    for (rank, idx) in order.iter().enumerate() {
        bin_of[*idx] = rank * bins / reps;
    }
    let mut rows = Vec::with_capacity(i_grid.len());
    let mut undersmoothed = false;
    for &i in i_grid {
        let xi: Vec<f64> = paths
            .iter()
            .map(|p| if i == 0 { source.observable.eval_capped(p.states[0]).value - source.center } else { p.increments[i - 1] })
            .collect();
        let mut sums = alloc::vec![0.0; bins];
        let mut counts = alloc::vec![0usize; bins];
        for (x, b) in xi.iter().zip(&bin_of) {
            sums[*b] += x;
            counts[*b] += 1;
        }
        let lhs: f64 = sums.iter().map(|s| s.abs() / reps as f64).sum();
        let sd = math::sqrt(stats::variance(&xi).max(0.0));
        let lhs_floor = if i == 0 { 0.0 } else { math::sqrt(2.0 / core::f64::consts::PI) * sd * math::sqrt(bins as f64 / reps as f64) };
        let alpha_hat = if i == 0 {
            1.0
        } else {
            let yi: Vec<f64> = paths.iter().map(|p| p.states[i]).collect();
            let est = quantmix::estimate_alpha(&y0, &yi, grid_x, bins)?;
            undersmoothed |= est.undersmoothed;
            est.value
        };
        let rhs = 8.0 * quantile_integral(q, alpha_hat)?;
        rows.push(CovarianceRow { i, lhs, lhs_floor, alpha_hat, rhs, holds: lhs <= rhs + 3.0 * lhs_floor });
    }
    let is: Vec<f64> = rows.iter().map(|r| r.i as f64).collect();
    let margins: Vec<f64> = rows.iter().map(|r| r.rhs / r.lhs.max(f64::MIN_POSITIVE)).collect();
    Ok(CovarianceTable {
        all_hold: rows.iter().all(|r| r.holds),
        margin_trend: stats::kendall_tau(&is, &margins),
        rows,
        undersmoothed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::GaussianSource;

    #[test]
    fn batch_variance_of_gaussian_source() {
        let src = GaussianSource { spec: NormalSpec::new(1.0).unwrap() };
        let b = sigma2_batch(&src, 1024, 2000, StreamKey::new(5, tag::DIAGNOSTIC)).unwrap();
        assert!((b.value - 1.0).abs() < 0.05, "{b:?}");
        assert!(sigma2_batch(&src, 512, 2000, StreamKey::new(5, tag::DIAGNOSTIC)).is_err());
    }

    #[test]
    fn zero_source_has_zero_variance() {
        let src = GaussianSource { spec: NormalSpec::new(0.0).unwrap() };
        let b = sigma2_batch(&src, 1024, 100, StreamKey::new(5, tag::DIAGNOSTIC)).unwrap();
        assert_eq!(b.value, 0.0);
    }

    /// Independent `±1` steps.
    struct Rademacher;

    impl BlockSource for Rademacher {
        fn path(&self, n: usize, key: StreamKey) -> Result<crate::coupling::SourcePath> {
            let mut rng = key.stream();
            let increments = (0..n).map(|_| if crate::rng::uniform_open(&mut rng) < 0.5 { -1.0 } else { 1.0 }).collect();
            Ok(crate::coupling::SourcePath { states: alloc::vec![0.0; n + 1], increments, capped: 0 })
        }

        fn conditional_sum(&self, _state: f64, len: usize, key: StreamKey) -> Result<f64> {
            Ok(self.path(len, key)?.increments.iter().sum())
        }
    }

    #[test]
    fn bounded_iid_maximum_has_gaussian_tail() {
        let n = 256;
        let mut lambdas: Vec<f64> = (1..=30).map(|i| i as f64 * 0.4).collect();
        // |S_k| ≤ n, so 5λ > 256 cannot be reached
        lambdas.push(52.0);
        let t = maximal_tail(
            &Rademacher,
            1.0,
            &QuantileFn::constant(1.0).unwrap(),
            &MixingProfile::independent(),
            n,
            &lambdas,
            10_000,
            StreamKey::new(3, tag::DIAGNOSTIC),
        )
        .unwrap();
        assert!(t.monotone && t.gaussian_dominates && t.shape_consistent, "{t:?}");
        assert_eq!(t.rows.last().unwrap().tail, 0.0);
        assert_eq!(t.rows[0].tail, 1.0);
    }

    #[test]
    fn w2_floor_shrinks_with_sample_size() {
        let key = StreamKey::new(1, tag::DIAGNOSTIC);
        let small = gaussian_w2_floor(100, 200, key).unwrap();
        let large = gaussian_w2_floor(1000, 200, key).unwrap();
        assert!(large < small && small < 0.1, "{small} {large}");
    }

    #[test]
    fn quantile_integral_of_power() {
        // ∫₀^a u^{-1/2} du = 2 √a
        let q = QuantileFn::power(1.0, 2.0).unwrap();
        for a in [1.0, 0.3, 1e-3] {
            let v = quantile_integral(&q, a).unwrap();
            assert!((v - 2.0 * math::sqrt(a)).abs() < 1e-6 * (1.0 + v), "a={a} {v}");
        }
        let g = QuantileFn::grid(alloc::vec![0.5, 0.0], alloc::vec![1.0, 3.0]).unwrap();
        assert!((quantile_integral(&g, 0.25).unwrap() - 0.75).abs() < 1e-9);
    }
}
