//! Thin float helpers over `libm` so every platform rounds the same way.

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
/// `x^y` for `x ≥ 0` and `y > 0` through `exp(y ln x)`; about three times
/// faster than the general `pow` and accurate to a few ulps for the small
/// exponents used on the map's left branch.
#[inline]
pub(crate) fn pow_pos(x: f64, y: f64) -> f64 {
    libm::exp(y * libm::log(x))
}
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
#[inline]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
