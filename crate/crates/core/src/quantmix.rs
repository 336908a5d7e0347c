//! Quantile / mixing-rate calculus.
//!
//! For a mixing profile `α` (with `α(0) = 1`) and an upper-tail quantile
//! function `Q`:
//!
//! ```text
//! α⁻¹(x)         = min { q ∈ ℕ : α(q) ≤ x }
//! R(u)           = α⁻¹(u) · max(Q(u), 1)
//! M_{p,α}(Q)     = ∫₀¹ R^{p−1}(u) Q(u) du
//! Λ_{p,α}(Q)     = sup_{0<u≤1} u R^{p−1}(u) Q(u)
//! M_{3,α}(Q, λ)  = ∫₀¹ Q(u) R(u) min(R(u), λ) du
//! ```
//!
//! The integrals are taken over log-spaced decades of `(0, 1]`, split at the
//! jump points of `α⁻¹` and `Q` wherever those are few enough to enumerate,
//! with 16-point Gauss–Legendre in `ln u` on each piece. Divergence is
//! declared from the growth of the per-decade contributions.

use alloc::vec::Vec;

use crate::dynamics::{self, MapModel};
use crate::error::{domain, precondition, Result};
use crate::math;
use crate::rng::StreamKey;

/// Upper-tail quantile function on `(0, 1]`, non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantileFn {
    /// `min(cap, c · u^{−1/b})`.
    Power { c: f64, b: f64, cap: f64 },
    /// `c · u^{−1/b} · (shift + |ln u|)^{log_exponent}`.
    PowerLog { c: f64, b: f64, shift: f64, log_exponent: f64 },
    Constant(f64),
    /// `Q(u) = values[k]` for the first `k` with `levels[k] ≤ u`;
    /// `levels` non-increasing, `values` non-decreasing.
    Grid { levels: Vec<f64>, values: Vec<f64> },
}

impl QuantileFn {
    pub fn power(c: f64, b: f64) -> Result<Self> {
        Self::capped_power(c, b, f64::INFINITY)
    }

    pub fn capped_power(c: f64, b: f64, cap: f64) -> Result<Self> {
        if !(c > 0.0 && b > 0.0 && cap > 0.0) {
            return Err(domain!("power quantile needs c, b, cap > 0"));
        }
        Ok(Self::Power { c, b, cap })
    }

    /// Requires `shift ≥ −log_exponent · b` so the function stays
    /// non-increasing up to `u = 1`.
    pub fn power_log(c: f64, b: f64, shift: f64, log_exponent: f64) -> Result<Self> {
        if !(c > 0.0 && b > 0.0 && shift > 0.0) {
            return Err(domain!("power-log quantile needs c, b, shift > 0"));
        }
        if log_exponent < 0.0 && shift < -log_exponent * b {
            return Err(domain!("power-log quantile is not monotone: need shift >= {}", -log_exponent * b));
        }
        Ok(Self::PowerLog { c, b, shift, log_exponent })
    }

    pub fn constant(m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(domain!("constant quantile must be finite and >= 0"));
        }
        Ok(Self::Constant(m))
    }

    pub fn grid(levels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != values.len() {
            return Err(domain!("quantile grid needs matching nonempty levels and values"));
        }
        if levels.windows(2).any(|w| w[1] > w[0]) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain!("quantile grid must be monotone"));
        }
        Ok(Self::Grid { levels, values })
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Power { c, b, cap } => (c * math::powf(u, -1.0 / b)).min(*cap),
            Self::PowerLog { c, b, shift, log_exponent } => {
                c * math::powf(u, -1.0 / b) * math::powf(shift + math::ln(u).abs(), *log_exponent)
            }
            Self::Constant(m) => *m,
            Self::Grid { levels, values } => {
                let k = levels.partition_point(|l| *l > u);
                if k < values.len() {
                    values[k]
                } else {
                    // u below every stored level: the largest recorded value
                    values[values.len() - 1]
                }
            }
        }
    }

    /// `ln Q(u)`, finite for power forms even where `Q` itself overflows.
    fn ln_eval(&self, u: f64) -> f64 {
        match self {
            Self::Power { c, b, cap } => (math::ln(*c) - math::ln(u) / b).min(math::ln(*cap)),
            Self::PowerLog { c, b, shift, log_exponent } => {
                math::ln(*c) - math::ln(u) / b + log_exponent * math::ln(shift + math::ln(u).abs())
            }
            _ => math::ln(self.eval(u)),
        }
    }

    fn breakpoints(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if let Self::Grid { levels, .. } = self {
            out.extend(levels.iter().copied().filter(|l| *l > lo && *l < hi));
        }
    }
}

/// The sequence `n ↦ α(n)`, non-increasing with `α(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingProfile {
    /// `α(n) = min(1, c n^{−ρ})`.
    Analytic { c: f64, rho: f64 },
    /// `α(n) = aⁿ`.
    Geometric { a: f64 },
    /// `α(1), α(2), …, α(L)`; beyond `L` the last value is held.
    Empirical(Vec<f64>),
}

/// Result of `α⁻¹`; `extrapolated` when an empirical list ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaInverse {
    pub q: u64,
    pub extrapolated: bool,
}

impl MixingProfile {
    pub fn analytic(c: f64, rho: f64) -> Result<Self> {
        if !(c > 0.0 && rho > 0.0) {
            return Err(domain!("analytic profile needs c, rho > 0"));
        }
        Ok(Self::Analytic { c, rho })
    }

    /// Polynomial rate `n^{(γ−1)/γ}` of the intermittent map, constant `c`.
    pub fn intermittent(gamma: f64, c: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(domain!("gamma must lie in (0,1)"));
        }
        Self::analytic(c, (1.0 - gamma) / gamma)
    }

    pub fn geometric(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(domain!("geometric profile needs a in (0,1)"));
        }
        Ok(Self::Geometric { a })
    }

    /// Empirical coefficients for `n = 1, …, L`; clamped to `[0, 1]` and
    /// made non-increasing by a running minimum. Lags past `L` count as
    /// fully mixed, matching the extrapolated inverse `L + 1`.
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(domain!("empirical profile needs finite values"));
        }
        let mut run = 1.0f64;
        let values = values
            .into_iter()
            .map(|v| {
                run = run.min(v.clamp(0.0, 1.0));
                run
            })
            .collect();
        Ok(Self::Empirical(values))
    }

    /// `α(n) = 0` for every `n ≥ 1`.
    pub fn independent() -> Self {
        Self::Empirical(alloc::vec![0.0])
    }

    pub fn alpha(&self, n: u64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self {
            Self::Analytic { c, rho } => (c / math::powf(n as f64, *rho)).min(1.0),
            Self::Geometric { a } => math::powf(*a, n as f64),
            Self::Empirical(v) => v.get(n as usize - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn alpha_inverse(&self, x: f64) -> Result<AlphaInverse> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(domain!("alpha inverse needs x in (0,1], got {x}"));
        }
        if x >= 1.0 {
            return Ok(AlphaInverse { q: 0, extrapolated: false });
        }
        match self {
            Self::Empirical(v) => Ok(match v.iter().position(|a| *a <= x) {
                Some(i) => AlphaInverse { q: i as u64 + 1, extrapolated: false },
                None => AlphaInverse { q: v.len() as u64 + 1, extrapolated: true },
            }),
            _ => {
                let q = self.alpha_inverse_f64(x);
                Ok(AlphaInverse { q: if q >= u64::MAX as f64 { u64::MAX } else { q as u64 }, extrapolated: false })
            }
        }
    }

    /// `α⁻¹(x)` as a float; exact integers while they fit in 2⁵³, the
    /// continuous inverse beyond.
    fn alpha_inverse_f64(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 0.0;
        }
        let guess = match self {
            Self::Analytic { c, rho } => math::powf(c / x, 1.0 / rho),
            Self::Geometric { a } => math::ln(x) / math::ln(*a),
            Self::Empirical(v) => {
                return match v.iter().position(|a| *a <= x) {
                    Some(i) => i as f64 + 1.0,
                    None => v.len() as f64 + 1.0,
                }
            }
        };
        if !(guess < 9.0e15) {
            return guess;
        }
        let mut q = (math::ceil(guess) as u64).max(1);
        while q > 1 && self.alpha(q - 1) <= x {
            q -= 1;
        }
        while self.alpha(q) > x {
            q += 1;
        }
        q as f64
    }

    /// Jump points `α(q)` of `α⁻¹` strictly inside `(lo, hi)`, or `None`
    /// when there are more than `limit`.
    fn breakpoints(&self, lo: f64, hi: f64, limit: usize, out: &mut Vec<f64>) -> bool {
        let q_hi = self.alpha_inverse_f64(hi.min(1.0));
        let q_lo = self.alpha_inverse_f64(lo);
        if q_lo - q_hi > limit as f64 {
            return false;
        }
        let (from, to) = (q_hi as u64, q_lo as u64);
        for q in from.max(1)..=to {
            let a = self.alpha(q);
            if a > lo && a < hi {
                out.push(a);
            }
        }
        true
    }
}

/// Outcome of a numeric integral or supremum on `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentValue {
    Finite(f64),
    Infinite,
    /// Refinement disagreed by more than 0.5% at maximum depth.
    NotConverged(f64),
}

impl MomentValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            Self::Finite(v) | Self::NotConverged(v) => *v,
            Self::Infinite => f64::INFINITY,
        }
    }
}

const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_534,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_1,
];

/// `∫ exp(ln_g(e^s)) e^s ds` over `[s0, s1]` by Gauss–Legendre.
fn gl_log_panel<F: Fn(f64) -> f64>(s0: f64, s1: f64, ln_g: &F) -> f64 {
    let mid = 0.5 * (s0 + s1);
    let half = 0.5 * (s1 - s0);
    let mut acc = 0.0;
    for (x, w) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
        for s in [mid - half * x, mid + half * x] {
            let v = ln_g(math::exp(s)) + s;
            acc += w * math::exp(v);
        }
    }
    acc * half
}

const LN_10: f64 = core::f64::consts::LN_10;
const MAX_DECADES: usize = 300;
const BREAKPOINT_LIMIT: usize = 512;
const SMOOTH_SUBPANELS: usize = 24;

/// Integral of `exp(ln_g(u))` over `(0, upper]`, decade by decade.
fn integrate_decades<F, B>(upper: f64, ln_g: F, breaks: B) -> MomentValue
where
    F: Fn(f64) -> f64,
    B: Fn(f64, f64, &mut Vec<f64>) -> bool,
{
    let s_top = math::ln(upper);
    // stay clear of subnormals
    let depth = (((s_top + 690.0) / LN_10) as usize).min(MAX_DECADES);
    let mut decades: Vec<f64> = Vec::with_capacity(depth);
    let mut total = 0.0;
    let mut cuts = Vec::new();
    for j in 0..depth {
        let s1 = s_top - j as f64 * LN_10;
        let s0 = s1 - LN_10;
        let (u0, u1) = (math::exp(s0), math::exp(s1));
        cuts.clear();
        let enumerated = breaks(u0, u1, &mut cuts);
        let mut d = 0.0;
        if enumerated {
            let mut knots: Vec<f64> = cuts.iter().map(|u| math::ln(*u)).collect();
            knots.push(s0);
            knots.push(s1);
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            for w in knots.windows(2) {
                d += gl_log_panel(w[0], w[1], &ln_g);
            }
        } else {
            let h = LN_10 / SMOOTH_SUBPANELS as f64;
            for k in 0..SMOOTH_SUBPANELS {
                d += gl_log_panel(s0 + k as f64 * h, s0 + (k + 1) as f64 * h, &ln_g);
            }
        }
        if !d.is_finite() {
            return MomentValue::Infinite;
        }
        total += d;
        decades.push(d);
        if j >= 8 && d <= 1e-15 * total && decades[j - 1] <= 1e-15 * total {
            return MomentValue::Finite(total);
        }
    }
    if total == 0.0 {
        return MomentValue::Finite(0.0);
    }
    // slope of ln d over the last decades decides the tail
    let k = decades.len().min(20);
    let tail: Vec<(f64, f64)> = decades[decades.len() - k..]
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| (i as f64, math::ln(*d)))
        .collect();
    if tail.len() < 2 {
        return MomentValue::Finite(total);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = tail.into_iter().unzip();
    let slope = crate::stats::linear_fit(&xs, &ys).0;
    if slope >= -1e-3 {
        return MomentValue::Infinite;
    }
    let r = math::exp(slope);
    let last = *decades.last().unwrap();
    let remainder = last * r / (1.0 - r);
    if remainder > 0.005 * total {
        MomentValue::NotConverged(total + remainder)
    } else {
        MomentValue::Finite(total + remainder)
    }
}

fn check_unit_open(u: f64) -> Result<()> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(domain!("argument must lie in (0,1], got {u}"));
    }
    Ok(())
}

/// `ln R(u)`; `−∞` where `α⁻¹(u) = 0`.
fn ln_rate(profile: &MixingProfile, q: &QuantileFn, u: f64) -> f64 {
    let inv = profile.alpha_inverse_f64(u);
    if inv == 0.0 {
        return f64::NEG_INFINITY;
    }
    math::ln(inv) + q.ln_eval(u).max(0.0)
}

/// `R(u) = α⁻¹(u) · max(Q(u), 1)`.
pub fn rate_r(profile: &MixingProfile, q: &QuantileFn, u: f64) -> Result<f64> {
    check_unit_open(u)?;
    Ok(profile.alpha_inverse_f64(u) * q.eval(u).max(1.0))
}

fn joint_breaks<'a>(
    profile: &'a MixingProfile,
    q: &'a QuantileFn,
) -> impl Fn(f64, f64, &mut Vec<f64>) -> bool + 'a {
    move |lo, hi, out| {
        if !profile.breakpoints(lo, hi, BREAKPOINT_LIMIT, out) {
            out.clear();
            return false;
        }
        q.breakpoints(lo, hi, out);
        true
    }
}

#[inline]
fn ln_mul(a: f64, b: f64) -> f64 {
    // 0 · ∞ never arises here; −∞ absorbs
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a + b
    }
}

/// `M_{p,α}(Q) = ∫₀¹ R^{p−1} Q`.
pub fn moment_m(profile: &MixingProfile, q: &QuantileFn, p: f64) -> Result<MomentValue> {
    if !(p >= 1.0) {
        return Err(precondition!("moment order must be >= 1, got {p}"));
    }
    Ok(integrate_decades(
        1.0,
        |u| {
            let lr = ln_rate(profile, q, u);
            let lr_pow = if p == 1.0 { 0.0 } else if lr == f64::NEG_INFINITY { lr } else { (p - 1.0) * lr };
            ln_mul(lr_pow, q.ln_eval(u))
        },
        joint_breaks(profile, q),
    ))
}

/// `M_{3,α}(Q, λ) = ∫₀¹ Q R min(R, λ)`.
pub fn moment_m3_truncated(profile: &MixingProfile, q: &QuantileFn, lambda: f64) -> Result<MomentValue> {
    if !(lambda > 0.0) {
        return Err(precondition!("truncation level must be positive, got {lambda}"));
    }
    let ln_lambda = math::ln(lambda);
    Ok(integrate_decades(
        1.0,
        |u| {
            let lr = ln_rate(profile, q, u);
            ln_mul(ln_mul(q.ln_eval(u), lr), lr.min(ln_lambda))
        },
        joint_breaks(profile, q),
    ))
}

const SUP_POINTS_PER_DECADE: usize = 40;

/// `Λ_{p,α}(Q) = sup_{0<u≤1} u R^{p−1}(u) Q(u)`, on a refined log grid that
/// includes both sides of every enumerable jump.
pub fn lambda_sup(profile: &MixingProfile, q: &QuantileFn, p: f64) -> Result<MomentValue> {
    if !(p >= 1.0) {
        return Err(precondition!("moment order must be >= 1, got {p}"));
    }
    let ln_val = |u: f64| {
        let lr = ln_rate(profile, q, u);
        let lr_pow = if p == 1.0 { 0.0 } else if lr == f64::NEG_INFINITY { lr } else { (p - 1.0) * lr };
        ln_mul(ln_mul(math::ln(u), lr_pow), q.ln_eval(u))
    };
    let breaks = joint_breaks(profile, q);
    let mut maxima = Vec::with_capacity(MAX_DECADES);
    let mut cuts = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for j in 0..MAX_DECADES {
        let s1 = -(j as f64) * LN_10;
        let s0 = s1 - LN_10;
        let mut m = f64::NEG_INFINITY;
        for k in 0..=SUP_POINTS_PER_DECADE {
            let s = s0 + LN_10 * k as f64 / SUP_POINTS_PER_DECADE as f64;
            m = m.max(ln_val(math::exp(s)));
        }
        // left limit at the top of the decade
        m = m.max(ln_val(math::exp(s1) * (1.0 - 1e-12)));
        cuts.clear();
        if breaks(math::exp(s0), math::exp(s1), &mut cuts) {
            for c in &cuts {
                m = m.max(ln_val(*c)).max(ln_val(c * (1.0 - 1e-12)));
            }
        }
        if m.is_nan() || m == f64::INFINITY {
            return Ok(MomentValue::Infinite);
        }
        best = best.max(m);
        maxima.push(m);
    }
    let k = 20;
    let xs: Vec<f64> = (0..k).map(|i| i as f64 * LN_10).collect();
    let ys: Vec<f64> = maxima[MAX_DECADES - k..].to_vec();
    if ys.iter().all(|y| y.is_finite()) {
        let slope = crate::stats::linear_fit(&xs, &ys).0;
        if slope > 1e-3 {
            return Ok(MomentValue::Infinite);
        }
    }
    Ok(MomentValue::Finite(if best == f64::NEG_INFINITY { 0.0 } else { math::exp(best) }))
}

/// `Σ_{k≥0} (1 ∨ k)^{p−2} ∫₀^{α(k)} Q^p(u) du`, summed in dyadic blocks of
/// `k`; finite exactly when `M_{p,α}(Q)` is.
pub fn strong_mixing_series(profile: &MixingProfile, q: &QuantileFn, p: f64) -> Result<MomentValue> {
    if !(p >= 1.0) {
        return Err(precondition!("moment order must be >= 1, got {p}"));
    }
    let term = |k: f64| -> MomentValue {
        let a = profile.alpha(k as u64);
        if a <= 0.0 {
            return MomentValue::Finite(0.0);
        }
        let inner = integrate_decades(a, |u| p * q.ln_eval(u), |lo, hi, out| {
            q.breakpoints(lo, hi, out);
            true
        });
        match inner {
            MomentValue::Finite(v) => MomentValue::Finite(math::powf(k.max(1.0), p - 2.0) * v),
            other => other,
        }
    };
    let mut total = match term(0.0) {
        MomentValue::Finite(v) => v,
        other => return Ok(other),
    };
    const EXACT_BLOCKS: u32 = 10;
    const MAX_BLOCKS: u32 = 60;
    let mut blocks = Vec::new();
    for j in 0..MAX_BLOCKS {
        let lo = 1u64 << j;
        let hi = 1u64 << (j + 1);
        let mut b = 0.0;
        if j < EXACT_BLOCKS {
            for k in lo..hi {
                match term(k as f64) {
                    MomentValue::Finite(v) => b += v,
                    other => return Ok(other),
                }
            }
        } else {
            // smooth in k at this scale: integrate over ln k
            let (s0, s1) = (math::ln(lo as f64), math::ln(hi as f64));
            let mid = 0.5 * (s0 + s1);
            let half = 0.5 * (s1 - s0);
            for (x, w) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
                for s in [mid - half * x, mid + half * x] {
                    let k = math::exp(s);
                    match term(k) {
                        MomentValue::Finite(v) => b += w * half * v * k,
                        other => return Ok(other),
                    }
                }
            }
        }
        total += b;
        blocks.push(b);
        if b == 0.0 && j >= EXACT_BLOCKS {
            return Ok(MomentValue::Finite(total));
        }
        if j >= 8 && b <= 1e-15 * total {
            return Ok(MomentValue::Finite(total));
        }
    }
    let k = 12;
    let xs: Vec<f64> = (0..k).map(|i| i as f64).collect();
    let ys: Vec<f64> = blocks[blocks.len() - k..].iter().map(|b| math::ln(*b)).collect();
    let slope = crate::stats::linear_fit(&xs, &ys).0;
    if !(slope < -1e-3) {
        return Ok(MomentValue::Infinite);
    }
    let r = math::exp(slope);
    let rest = blocks.last().unwrap() * r / (1.0 - r);
    Ok(if rest > 0.005 * total {
        MomentValue::NotConverged(total + rest)
    } else {
        MomentValue::Finite(total + rest)
    })
}

/// Empirical rectangle mixing coefficient at one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub value: f64,
    /// Expected size of the estimate under exact independence.
    pub noise_floor: f64,
    /// Fewer than ten replicates per conditioning bin.
    pub undersmoothed: bool,
}

/// Expected `Σ_b w_b |p̂_b − p̂|` for independent data with `p = 1/2`.
pub fn alpha_noise_floor(bins: usize, replicates: usize) -> f64 {
    math::sqrt(2.0 / core::f64::consts::PI) * 0.5 * math::sqrt(bins as f64 / replicates as f64)
}

/// `α̂ = max_x Σ_b w_b |P̂(Y_n ≤ x | Y_0 ∈ b) − P̂(Y_n ≤ x)|`, conditioning
/// on equal-count bins of the start states.
pub fn estimate_alpha(start: &[f64], later: &[f64], grid_x: &[f64], bins: usize) -> Result<AlphaEstimate> {
    let reps = start.len();
    if reps != later.len() || reps == 0 {
        return Err(domain!("start and later samples must have equal nonzero length"));
    }
    if bins == 0 || bins > reps {
        return Err(domain!("need 1 <= bins <= replicates"));
    }
    let mut order: Vec<usize> = (0..reps).collect();
    order.sort_by(|a, b| start[*a].total_cmp(&start[*b]));
    let mut bin_of = alloc::vec![0usize; reps];
    for (rank, idx) in order.iter().enumerate() {
        bin_of[*idx] = rank * bins / reps;
    }
    let mut bin_sizes = alloc::vec![0usize; bins];
    for b in &bin_of {
        bin_sizes[*b] += 1;
    }
    let mut best: f64 = 0.0;
    let mut below = alloc::vec![0usize; bins];
    for &x in grid_x {
        below.iter_mut().for_each(|c| *c = 0);
        let mut all = 0usize;
        for (i, y) in later.iter().enumerate() {
            if *y <= x {
                below[bin_of[i]] += 1;
                all += 1;
            }
        }
        let p = all as f64 / reps as f64;
        let dev: f64 = below
            .iter()
            .zip(&bin_sizes)
            .filter(|(_, n)| **n > 0)
            .map(|(c, n)| (*n as f64 / reps as f64) * (*c as f64 / *n as f64 - p).abs())
            .sum();
        best = best.max(dev);
    }
    Ok(AlphaEstimate {
        value: best,
        noise_floor: alpha_noise_floor(bins, reps),
        undersmoothed: bins * 10 > reps,
    })
}

/// `α̂(n)` for `n = 0..=max_lag` from independent stationary chain paths;
/// entry 0 is the convention `α(0) = 1`.
pub fn estimate_alpha_profile(
    model: &MapModel,
    max_lag: usize,
    replicates: usize,
    grid_x: &[f64],
    bins: usize,
    key: StreamKey,
) -> Result<Vec<AlphaEstimate>> {
    let paths = crate::par::map_indexed(replicates, |r| {
        dynamics::simulate_chain(model, max_lag.max(1), dynamics::ChainStart::Stationary, key.replicate(r as u64))
            .map(|t| t.values)
    });
    let paths: Vec<Vec<f64>> = paths.into_iter().collect::<Result<_>>()?;
    // Y_0 is not stored by simulate_chain; recover it from Y_1 = preimage of
    // Y_0 by applying the map.
    let start: Vec<f64> = paths.iter().map(|p| model.apply(p[0])).collect();
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(AlphaEstimate { value: 1.0, noise_floor: 0.0, undersmoothed: false });
    for n in 1..=max_lag {
        let later: Vec<f64> = paths.iter().map(|p| p[n - 1]).collect();
        out.push(estimate_alpha(&start, &later, grid_x, bins)?);
    }
    Ok(out)
}
