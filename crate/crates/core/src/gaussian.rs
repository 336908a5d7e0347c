//! Standard normal distribution function, its inverse, inverse-CDF
//! sampling and the quantile form of the Wasserstein-2 distance to a
//! centered Gaussian.

use rand::RngCore;

use crate::error::{domain, Result};
use crate::math;
use crate::rng;
use crate::Error;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Centered normal law `N(0, variance)`. Variance zero is a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSpec {
    pub variance: f64,
}

impl NormalSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(domain!("normal variance must be finite and >= 0, got {variance}"));
        }
        Ok(Self { variance })
    }

    pub fn std_dev(&self) -> f64 {
        math::sqrt(self.variance)
    }
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    math::exp(-0.5 * x * x) / SQRT_2PI
}

/// `Φ(x)`.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * math::erfc(-x * FRAC_1_SQRT_2)
}

/// `Φ⁻¹(u)` for `u` in the open unit interval.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(domain!("normal quantile needs u in (0,1), got {u}"));
    }
    Ok(inv_phi(u))
}

/// Unchecked `Φ⁻¹`; callers guarantee `0 < u < 1`.
#[inline]
pub(crate) fn inv_phi(u: f64) -> f64 {
    // 1 - u is exact for u >= 1/2, so the upper half is an exact mirror.
    if u > 0.5 {
        -lower_quantile(1.0 - u)
    } else {
        lower_quantile(u)
    }
}

// Acklam's rational approximation followed by one Halley step on Φ.
fn lower_quantile(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if u == 0.5 {
        return 0.0;
    }
    let x = if u < P_LOW {
        let q = math::sqrt(-2.0 * math::ln(u));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = std_normal_cdf(x) - u;
    let t = e * SQRT_2PI * math::exp(0.5 * x * x);
    let refined = x - t / (1.0 + 0.5 * x * t);
    if refined.is_finite() {
        refined
    } else {
        x
    }
}

/// One draw from `spec` by inverse-CDF sampling of a single uniform.
pub fn sample_normal<R: RngCore + ?Sized>(spec: NormalSpec, rng: &mut R) -> f64 {
    let u = rng::uniform_open(rng);
    if spec.variance == 0.0 {
        return 0.0;
    }
    spec.std_dev() * inv_phi(u)
}

// φ(Φ⁻¹(u)) and Φ⁻¹(u)·φ(Φ⁻¹(u)), both zero at the endpoints.
fn cell_endpoint(u: f64) -> (f64, f64) {
    if u <= 0.0 || u >= 1.0 {
        return (0.0, 0.0);
    }
    let z = inv_phi(u);
    let d = std_normal_pdf(z);
    (d, z * d)
}

/// `W₂` between the empirical law of a sorted sample and `N(0, σ²)`,
/// computed from the quantile coupling `∫₀¹ (F⁻¹(u) − σΦ⁻¹(u))² du`.
///
/// On each order-statistic cell `((i−1)/n, i/n]` the Gaussian moments are
/// integrated in closed form: `∫Φ⁻¹ = φ(z_a) − φ(z_b)` and
/// `∫(Φ⁻¹)² = (b − a) − (z_b φ(z_b) − z_a φ(z_a))`.
pub fn w2_empirical_vs_gaussian(sorted_sample: &[f64], spec: NormalSpec) -> Result<f64> {
    let n = sorted_sample.len();
    if n < 2 {
        return Err(domain!("W2 needs at least two sample points, got {n}"));
    }
    if sorted_sample.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain!("W2 sample must be sorted ascending"));
    }
    if spec.variance == 0.0 {
        if sorted_sample.iter().all(|x| *x == 0.0) {
            return Ok(0.0);
        }
        return Err(Error::Degenerate(
            "zero-variance Gaussian against a non-null sample".into(),
        ));
    }
    let s = spec.std_dev();
    let nf = n as f64;
    let mut total = 0.0;
    let (mut pdf_a, mut zpdf_a) = cell_endpoint(0.0);
    for (i, &x) in sorted_sample.iter().enumerate() {
        let a = i as f64 / nf;
        let b = (i + 1) as f64 / nf;
        let (pdf_b, zpdf_b) = cell_endpoint(b);
        let width = b - a;
        let first = pdf_a - pdf_b;
        let second = width - (zpdf_b - zpdf_a);
        let cell_mean = first / width;
        let spread = (second - first * cell_mean).max(0.0);
        let d = x - s * cell_mean;
        total += d * d * width + s * s * spread;
        pdf_a = pdf_b;
        zpdf_a = zpdf_b;
    }
    Ok(math::sqrt(total.max(0.0)))
}
