//! Observables built from monotone pieces on disjoint intervals, their tail
//! functions under the invariant law and the integrability checks that
//! decide which limit theorem applies.

use alloc::vec::Vec;
use rand::RngCore;

use crate::dynamics::{self, MapModel};
use crate::error::{domain, precondition, Result};
use crate::math;
use crate::quantmix::QuantileFn;
use crate::rng::StreamKey;
use crate::Error;

/// Magnitude beyond which an evaluation is reported as capped.
pub const EVAL_CAP: f64 = 1e12;

/// Shape of one monotone piece on `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceKind {
    /// `x`.
    Identity,
    /// `(x − lo)^{−exponent}`.
    Power { exponent: f64 },
    /// `slope · x + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// `1`.
    Indicator,
}

/// `sign · g(x)` on the open interval `(lo, hi)`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
    pub sign: f64,
}

impl Piece {
    fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    fn raw(&self, x: f64) -> f64 {
        match self.kind {
            PieceKind::Identity => x,
            PieceKind::Power { exponent } => math::powf(x - self.lo, -exponent),
            PieceKind::Affine { slope, intercept } => slope * x + intercept,
            PieceKind::Indicator => 1.0,
        }
    }

    /// `∫_a^b g^k` for `k ∈ {1, 2}` and `lo ≤ a ≤ b ≤ hi`.
    fn integral_pow(&self, a: f64, b: f64, k: i32) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self.kind {
            PieceKind::Identity => {
                let k1 = (k + 1) as f64;
                (math::powf(b, k1) - math::powf(a, k1)) / k1
            }
            PieceKind::Indicator => b - a,
            PieceKind::Affine { slope, intercept } => {
                if slope == 0.0 {
                    return math::powf(intercept, k as f64) * (b - a);
                }
                let k1 = (k + 1) as f64;
                (math::powf(slope * b + intercept, k1) - math::powf(slope * a + intercept, k1)) / (k1 * slope)
            }
            PieceKind::Power { exponent } => {
                let e = 1.0 - k as f64 * exponent;
                let (ta, tb) = (a - self.lo, b - self.lo);
                if e == 0.0 {
                    if ta <= 0.0 {
                        return f64::INFINITY;
                    }
                    math::ln(tb) - math::ln(ta)
                } else if e < 0.0 && ta <= 0.0 {
                    f64::INFINITY
                } else {
                    (math::powf(tb, e) - math::powf(ta, e)) / e
                }
            }
        }
    }

    /// Limits of `g` at both ends of the piece; infinite for a singular power.
    fn end_values(&self) -> (f64, f64) {
        match self.kind {
            PieceKind::Identity => (self.lo, self.hi),
            PieceKind::Affine { slope, intercept } => (slope * self.lo + intercept, slope * self.hi + intercept),
            PieceKind::Indicator => (1.0, 1.0),
            PieceKind::Power { exponent } => {
                let at_lo = if exponent > 0.0 {
                    f64::INFINITY
                } else if exponent == 0.0 {
                    1.0
                } else {
                    0.0
                };
                (at_lo, math::powf(self.hi - self.lo, -exponent))
            }
        }
    }
}

/// A finite sum of monotone pieces with disjoint supports inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pieces: Vec<Piece>,
}

/// A value with a flag telling whether it hit the evaluation cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capped {
    pub value: f64,
    pub capped: bool,
}

impl Observable {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            if !(0.0 <= p.lo && p.lo < p.hi && p.hi <= 1.0) {
                return Err(domain!("piece interval ({}, {}) must satisfy 0 <= lo < hi <= 1", p.lo, p.hi));
            }
            if !p.sign.is_finite() {
                return Err(domain!("piece sign must be finite"));
            }
            let ok = match p.kind {
                PieceKind::Power { exponent } => exponent.is_finite(),
                PieceKind::Affine { slope, intercept } => slope.is_finite() && intercept.is_finite(),
                _ => true,
            };
            if !ok {
                return Err(domain!("piece parameters must be finite"));
            }
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        if pieces.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(domain!("piece intervals must be disjoint"));
        }
        Ok(Self { pieces })
    }

    /// `x ↦ x` on `(0, 1)`.
    pub fn identity() -> Self {
        Self { pieces: alloc::vec![Piece { lo: 0.0, hi: 1.0, kind: PieceKind::Identity, sign: 1.0 }] }
    }

    /// `x ↦ x^{−a}` on `(0, 1)`.
    pub fn power(a: f64) -> Result<Self> {
        Self::new(alloc::vec![Piece { lo: 0.0, hi: 1.0, kind: PieceKind::Power { exponent: a }, sign: 1.0 }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces.iter().find(|p| p.contains(x)).map_or(0.0, |p| p.sign * p.raw(x))
    }

    /// Evaluation clamped to `±EVAL_CAP`.
    pub fn eval_capped(&self, x: f64) -> Capped {
        let v = self.eval(x);
        if v.is_finite() && v.abs() <= EVAL_CAP {
            Capped { value: v, capped: false }
        } else {
            let s = if v.is_nan() { 1.0 } else { v.signum() };
            Capped { value: s * EVAL_CAP, capped: true }
        }
    }

    /// Total variation on `[0, 1]`; `None` when some piece is unbounded.
    pub fn bv_bound(&self) -> Option<f64> {
        let mut tv = 0.0;
        for p in &self.pieces {
            let (a, b) = p.end_values();
            if !(a.is_finite() && b.is_finite()) {
                return None;
            }
            // jump in from zero, monotone run, jump back to zero
            tv += p.sign.abs() * (a.abs() + (b - a).abs() + b.abs());
        }
        Some(tv)
    }

    /// `sup |f|`; infinite when some piece is unbounded.
    pub fn sup_norm(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let (a, b) = p.end_values();
                p.sign.abs() * a.abs().max(b.abs())
            })
            .fold(0.0, f64::max)
    }

    /// `∫_a^b f^k dx` for `k ∈ {1, 2}`, exact.
    pub fn integral_pow(&self, a: f64, b: f64, k: i32) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let (lo, hi) = (a.max(p.lo), b.min(p.hi));
                if hi <= lo {
                    0.0
                } else {
                    math::powf(p.sign, k as f64) * p.integral_pow(lo, hi, k)
                }
            })
            .sum()
    }

    /// `ν̂(f)` under the piecewise-constant density; errors when `f` is not
    /// integrable.
    pub fn invariant_mean(&self, model: &MapModel) -> Result<f64> {
        let grid = model.density()?;
        let m = grid.integrate(|a, b| self.integral_pow(a, b, 1));
        if !m.is_finite() {
            return Err(domain!("observable is not integrable under the invariant density"));
        }
        Ok(m)
    }

    /// `ν̂(f²) − ν̂(f)²`; infinite when `f` is not square integrable.
    pub fn invariant_variance(&self, model: &MapModel) -> Result<f64> {
        let m = self.invariant_mean(model)?;
        let grid = model.density()?;
        let s = grid.integrate(|a, b| self.integral_pow(a, b, 2));
        Ok(if s.is_finite() { (s - m * m).max(0.0) } else { f64::INFINITY })
    }
}

/// Tail function `H(x) ≥ ν(|f| > x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TailFunction {
    /// `min(1, (x / c)^{−b})`.
    Power { c: f64, b: f64 },
    /// `1` below `bound`, `0` from there on.
    Indicator { bound: f64 },
    /// Right-continuous step function through `(t_k, Ĥ(t_k))`, estimated
    /// from `samples` draws.
    Empirical { points: Vec<(f64, f64)>, samples: usize },
}

impl TailFunction {
    pub fn power(c: f64, b: f64) -> Result<Self> {
        if !(c > 0.0 && b > 0.0) {
            return Err(domain!("power tail needs c, b > 0"));
        }
        Ok(Self::Power { c, b })
    }

    pub fn indicator(bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(domain!("indicator tail needs a finite positive bound"));
        }
        Ok(Self::Indicator { bound })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Power { c, b } => {
                if x <= *c {
                    1.0
                } else {
                    math::powf(x / c, -b)
                }
            }
            Self::Indicator { bound } => {
                if x < *bound {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Empirical { points, .. } => {
                let k = points.partition_point(|(t, _)| *t <= x);
                if k == 0 {
                    1.0
                } else {
                    points[k - 1].1
                }
            }
        }
    }

    /// The upper-tail quantile `Q(u) = inf { x : H(x) ≤ u }`.
    pub fn quantile(&self) -> QuantileFn {
        match self {
            Self::Power { c, b } => QuantileFn::Power { c: *c, b: *b, cap: f64::INFINITY },
            Self::Indicator { bound } => QuantileFn::Constant(*bound),
            Self::Empirical { points, .. } => QuantileFn::Grid {
                levels: points.iter().map(|p| p.1).collect(),
                values: points.iter().map(|p| p.0).collect(),
            },
        }
    }
}

const TAIL_GRID_POINTS: usize = 256;

/// `Ĥ(t) = #{ |f(Y)| > t } / n` from `samples` invariant draws, on `t = 0`
/// and a log grid spanning the observed positive magnitudes.
pub fn tail_of_observable(f: &Observable, model: &MapModel, samples: usize, key: StreamKey) -> Result<TailFunction> {
    if samples < 2 {
        return Err(precondition!("tail estimation needs at least two samples"));
    }
    let mut rng = key.stream();
    let mut mags = Vec::with_capacity(samples);
    let mut max_finite: f64 = 0.0;
    let mut overflowed = false;
    for _ in 0..samples {
        let y = dynamics::sample_invariant(model, &mut rng)?;
        let v = f.eval_capped(y);
        if v.capped {
            overflowed = true;
        } else {
            max_finite = max_finite.max(v.value.abs());
        }
        mags.push(v.value.abs());
    }
    if overflowed {
        return Err(Error::Overflow { max_finite });
    }
    Ok(empirical_tail(mags))
}

/// Empirical tail of the given magnitudes.
pub fn empirical_tail(mut mags: Vec<f64>) -> TailFunction {
    let n = mags.len();
    mags.sort_by(f64::total_cmp);
    let exceed = |t: f64| (n - mags.partition_point(|m| *m <= t)) as f64 / n as f64;
    let mut points = alloc::vec![(0.0, exceed(0.0))];
    let positive: Vec<f64> = mags.iter().copied().filter(|m| *m > 0.0).collect();
    if let (Some(lo), Some(hi)) = (positive.first(), positive.last()) {
        let (llo, lhi) = (math::ln(*lo), math::ln(*hi));
        for i in 0..TAIL_GRID_POINTS {
            let t = if i + 1 < TAIL_GRID_POINTS && lhi > llo {
                math::exp(llo + (lhi - llo) * i as f64 / (TAIL_GRID_POINTS - 1) as f64)
            } else {
                *hi
            };
            if t > points.last().unwrap().0 {
                points.push((t, exceed(t)));
            }
        }
    }
    TailFunction::Empirical { points, samples: n }
}

/// Outcome of an integrability check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    /// An estimated tail index within the fitting tolerance of the threshold.
    Marginal,
}

/// Band around a threshold inside which an empirical verdict is marginal.
pub const TAIL_INDEX_BAND: f64 = 0.1;

/// Tail index fitted to the reliable upper part of an empirical tail:
/// points with `10/n ≤ Ĥ ≤ 0.1`.
pub fn fitted_tail_index(h: &TailFunction) -> Option<f64> {
    let TailFunction::Empirical { points, samples } = h else {
        return None;
    };
    let floor = 10.0 / *samples as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(t, p)| *t > 0.0 && *p >= floor && *p <= 0.1)
        .map(|(t, p)| (math::ln(*t), math::ln(*p)))
        .unzip();
    if xs.len() < 4 || xs[xs.len() - 1] - xs[0] < 1e-9 {
        return None;
    }
    Some(-crate::stats::linear_fit(&xs, &ys).0)
}

fn empirical_verdict(h: &TailFunction, threshold: f64, strict: bool) -> Verdict {
    match fitted_tail_index(h) {
        // no measurable tail: the magnitudes are bounded in practice
        None => Verdict::Holds,
        Some(b) if (b - threshold).abs() <= TAIL_INDEX_BAND => Verdict::Marginal,
        Some(b) if b > threshold || (!strict && b == threshold) => Verdict::Holds,
        Some(_) => Verdict::Fails,
    }
}

/// Whether `∫₀^∞ x^{p−1} H(x)^{(1−pγ)/(1−γ)} dx < ∞`. For a power tail
/// this holds exactly when `b (1−pγ)/(1−γ) > p`.
pub fn check_moment_condition(h: &TailFunction, gamma: f64, p: f64) -> Result<Verdict> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain!("gamma must lie in (0,1)"));
    }
    if !(p > 2.0 && p * gamma < 1.0) {
        return Err(precondition!("moment condition needs p > 2 and p*gamma < 1"));
    }
    let kappa = (1.0 - p * gamma) / (1.0 - gamma);
    Ok(match h {
        TailFunction::Indicator { .. } => Verdict::Holds,
        TailFunction::Power { b, .. } => {
            if b * kappa > p {
                Verdict::Holds
            } else {
                Verdict::Fails
            }
        }
        TailFunction::Empirical { .. } => empirical_verdict(h, p / kappa, true),
    })
}

/// Whether `H(x) = O(x^{−p(1−γ)/(1−pγ)})`; at `p = 1/γ` only bounded
/// observables qualify.
pub fn check_lambda_condition(h: &TailFunction, gamma: f64, p: f64) -> Result<Verdict> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain!("gamma must lie in (0,1)"));
    }
    let endpoint = (p * gamma - 1.0).abs() <= 1e-12;
    if !(p > 2.0) || (p * gamma > 1.0 && !endpoint) {
        return Err(precondition!("tail-rate condition needs 2 < p <= 1/gamma"));
    }
    if endpoint {
        return Ok(match h {
            TailFunction::Indicator { .. } => Verdict::Holds,
            _ => Verdict::Fails,
        });
    }
    let threshold = p * (1.0 - gamma) / (1.0 - p * gamma);
    Ok(match h {
        TailFunction::Indicator { .. } => Verdict::Holds,
        TailFunction::Power { b, .. } => {
            if *b >= threshold {
                Verdict::Holds
            } else {
                Verdict::Fails
            }
        }
        TailFunction::Empirical { .. } => empirical_verdict(h, threshold, false),
    })
}

/// `|f(Y)|` for `samples` invariant draws, for use with `empirical_tail`.
pub fn sample_magnitudes<R: RngCore + ?Sized>(
    f: &Observable,
    model: &MapModel,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..samples).map(|_| Ok(f.eval(dynamics::sample_invariant(model, rng)?).abs())).collect()
}
