//! The intermittent map `T_γ`, the Ulam approximation of its absolutely
//! continuous invariant density `ν_γ`, and the stationary Markov chain whose
//! kernel `K_γ` is the Perron–Frobenius operator of `T_γ` with respect to
//! `ν_γ`.
//!
//! ```text
//! T_γ(x) = x (1 + 2^γ x^γ)   for x in [0, 1/2)
//!        = 2x − 1            for x in [1/2, 1]
//! ```
//!
//! The chain runs the map backwards: from `y` it jumps to one of the two
//! preimages `x` of `y`, picked with probability `h(x) / (h(y) |T'(x)|)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{domain, precondition, Result};
use crate::math;
use crate::rng::{self, StreamKey};
use crate::Error;

pub const BRANCH_BOUNDARY: f64 = 0.5;

/// Residual target of the left-branch inversion.
pub const PREIMAGE_TOL: f64 = 1e-12;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain!("gamma must lie in (0,1), got {gamma}"));
    }
    Ok(())
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain!("point must lie in [0,1], got {x}"));
    }
    Ok(())
}

#[inline]
fn left_branch(scale: f64, gamma: f64, x: f64) -> f64 {
    x * (1.0 + scale * math::pow_pos(x, gamma))
}

#[inline]
fn eval_map(scale: f64, gamma: f64, x: f64) -> f64 {
    let y = if x < BRANCH_BOUNDARY {
        left_branch(scale, gamma, x)
    } else {
        2.0 * x - 1.0
    };
    y.clamp(0.0, 1.0)
}

/// `T_γ(x)`, clamped into `[0, 1]`.
pub fn apply_map(gamma: f64, x: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_unit(x)?;
    Ok(eval_map(math::powf(2.0, gamma), gamma, x))
}

/// `|T_γ'(x)|`: `1 + 2^γ (1+γ) x^γ` on the left branch, `2` on the right.
pub fn map_derivative(gamma: f64, x: f64) -> f64 {
    if x < BRANCH_BOUNDARY {
        left_derivative(math::powf(2.0, gamma), gamma, x)
    } else {
        2.0
    }
}

#[inline]
fn left_derivative(scale: f64, gamma: f64, x: f64) -> f64 {
    1.0 + scale * (1.0 + gamma) * math::pow_pos(x, gamma)
}

/// Safeguarded Newton solve of `x (1 + scale x^γ) = y` on the bracket
/// `[lo, hi]`, which must contain the root. Returns the root and `T'` at
/// the last Newton iterate, which agrees with `T'(root)` to about 1e-8.
fn solve_left(scale: f64, gamma: f64, y: f64, mut lo: f64, mut hi: f64, mut x: f64) -> (f64, f64) {
    if y <= 0.0 {
        return (0.0, 1.0);
    }
    let mut slope = 1.0;
    for _ in 0..100 {
        let xg = math::pow_pos(x, gamma);
        let g = x * (1.0 + scale * xg) - y;
        slope = 1.0 + scale * (1.0 + gamma) * xg;
        if g == 0.0 {
            return (x, slope);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let next = x - g / slope;
        // quadratic convergence: a Newton step this small leaves an error
        // near 1e-16, even if rounding pushed it onto the bracket edge
        if (next - x).abs() <= 1e-8 * x {
            return (next.clamp(lo, hi), slope);
        }
        if !(next > lo && next < hi) {
            x = 0.5 * (lo + hi);
            continue;
        }
        x = next;
    }
    (x, slope)
}

/// The unique `x` in `[0, 1/2)` with `T_γ(x) = y`.
pub fn left_preimage(gamma: f64, y: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..1.0).contains(&y) {
        return Err(domain!("left preimage needs y in [0,1), got {y}"));
    }
    let scale = math::powf(2.0, gamma);
    Ok(solve_left(scale, gamma, y, 0.0, BRANCH_BOUNDARY, 0.5 * y).0)
}

/// Cell-averaged invariant density on a uniform power-of-two grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    values: Vec<f64>,
    /// Cumulative mass at the right edge of each cell.
    cumulative: Vec<f64>,
    residual: f64,
    iterations: usize,
}

impl DensityGrid {
    /// Wraps raw cell values, normalising them to integrate to one.
    pub fn from_values(values: Vec<f64>, residual: f64) -> Result<Self> {
        let bins = values.len();
        if bins == 0 || !bins.is_power_of_two() {
            return Err(domain!("density grid needs a power-of-two cell count, got {bins}"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain!("density values must be finite and nonnegative"));
        }
        let mass: f64 = values.iter().sum::<f64>() / bins as f64;
        if mass <= 0.0 {
            return Err(Error::Degenerate("density grid has zero mass".into()));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / mass).collect();
        let mut cumulative = Vec::with_capacity(bins);
        let mut acc = 0.0;
        for v in &values {
            acc += v / bins as f64;
            cumulative.push(acc);
        }
        Ok(Self { values, cumulative, residual, iterations: 0 })
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// L¹ change of the last Ulam iteration.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.bins() as f64
    }

    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.bins();
        ((x * n as f64) as usize).min(n - 1)
    }

    /// Piecewise-constant density value at `x`.
    #[inline]
    pub fn density_at(&self, x: f64) -> f64 {
        self.values[self.cell_of(x)]
    }

    /// Distribution function of the piecewise-constant density.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.cell_of(x);
        let below = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (below + self.values[i] * (x - i as f64 * self.cell_width())).min(1.0)
    }

    /// `Σ h_i ∫_{cell i} f` given the exact cell integral of `f`.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, cell_integral: F) -> f64 {
        let w = self.cell_width();
        self.values
            .iter()
            .enumerate()
            .map(|(i, h)| {
                if *h == 0.0 {
                    0.0
                } else {
                    h * cell_integral(i as f64 * w, (i + 1) as f64 * w)
                }
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|a, b| 0.5 * (b * b - a * a))
    }

    pub fn second_moment(&self) -> f64 {
        self.integrate(|a, b| (b * b * b - a * a * a) / 3.0)
    }
}

/// Sparse Ulam transition matrix: for each source cell, the destination
/// cells and the fraction of the cell's Lebesgue measure sent there.
struct UlamMatrix {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl UlamMatrix {
    fn build(scale: f64, gamma: f64, bins: usize, preimages: &[f64]) -> Self {
        let n = bins as f64;
        let mut offsets = Vec::with_capacity(bins + 1);
        let mut targets = Vec::with_capacity(3 * bins);
        let mut weights = Vec::with_capacity(3 * bins);
        offsets.push(0);
        for i in 0..bins {
            let a = i as f64 / n;
            let b = (i + 1) as f64 / n;
            if b <= BRANCH_BOUNDARY {
                let first = ((eval_map(scale, gamma, a) * n) as usize).min(bins - 1);
                let mut j = first;
                while j < bins {
                    let lo = preimages[j].max(a);
                    let hi = preimages[j + 1].min(b);
                    if hi > lo {
                        targets.push(j as u32);
                        weights.push((hi - lo) * n);
                    }
                    if preimages[j + 1] >= b {
                        break;
                    }
                    j += 1;
                }
            } else {
                // 2x − 1 stretches the cell over exactly two cells
                let j = 2 * i - bins;
                targets.push(j as u32);
                weights.push(0.5);
                targets.push((j + 1) as u32);
                weights.push(0.5);
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets, weights }
    }

    fn push_forward(&self, from: &[f64], to: &mut [f64]) {
        to.iter_mut().for_each(|v| *v = 0.0);
        for (i, h) in from.iter().enumerate() {
            for k in self.offsets[i]..self.offsets[i + 1] {
                to[self.targets[k] as usize] += h * self.weights[k];
            }
        }
    }
}

/// Left-branch preimages of the grid points `j / bins`, `j = 0..=bins`.
fn grid_preimages(scale: f64, gamma: f64, bins: usize) -> Vec<f64> {
    let mut pre = Vec::with_capacity(bins + 1);
    let mut prev = 0.0;
    for j in 0..bins {
        let y = j as f64 / bins as f64;
        let x = solve_left(scale, gamma, y, prev, BRANCH_BOUNDARY, prev.max(0.5 * y)).0;
        pre.push(x);
        prev = x;
    }
    pre.push(BRANCH_BOUNDARY);
    pre
}

/// Ulam approximation of the invariant density: iterate the cell-averaged
/// transfer operator from the uniform density until the L¹ change of one
/// step is at most `tol`.
pub fn build_density(gamma: f64, bins: usize, tol: f64, max_iters: usize) -> Result<DensityGrid> {
    check_gamma(gamma)?;
    if bins < 256 || !bins.is_power_of_two() {
        return Err(precondition!("bins must be a power of two >= 256, got {bins}"));
    }
    if !(tol > 0.0) {
        return Err(precondition!("tolerance must be positive, got {tol}"));
    }
    let scale = math::powf(2.0, gamma);
    let preimages = grid_preimages(scale, gamma, bins);
    let matrix = UlamMatrix::build(scale, gamma, bins, &preimages);
    let mut h = vec![1.0; bins];
    let mut next = vec![0.0; bins];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        matrix.push_forward(&h, &mut next);
        iterations += 1;
        residual = h.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() / bins as f64;
        core::mem::swap(&mut h, &mut next);
        if residual <= tol {
            break;
        }
    }
    if residual > tol {
        return Err(Error::NonConvergence { residual, iterations });
    }
    let mut grid = DensityGrid::from_values(h, residual)?;
    grid.iterations = iterations;
    Ok(grid)
}

/// L¹ distance between a grid and its image under the Ulam operator.
pub fn ulam_residual(gamma: f64, grid: &DensityGrid) -> Result<f64> {
    check_gamma(gamma)?;
    let bins = grid.bins();
    let scale = math::powf(2.0, gamma);
    let matrix = UlamMatrix::build(scale, gamma, bins, &grid_preimages(scale, gamma, bins));
    let mut image = vec![0.0; bins];
    matrix.push_forward(grid.values(), &mut image);
    Ok(grid.values().iter().zip(&image).map(|(a, b)| (a - b).abs()).sum::<f64>() / bins as f64)
}

/// The map together with (optionally) its approximate invariant density.
#[derive(Debug, Clone)]
pub struct MapModel {
    gamma: f64,
    scale: f64,
    density: Option<DensityGrid>,
    /// Left preimages of the density grid points; brackets for fast inversion.
    preimages: Vec<f64>,
    /// `dx/dy = 1 / T'(x)` at those preimages, for Hermite interpolation.
    preimage_slopes: Vec<f64>,
}

impl MapModel {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, scale: math::powf(2.0, gamma), density: None, preimages: Vec::new(), preimage_slopes: Vec::new() })
    }

    /// Builds the Ulam density and attaches it.
    pub fn with_built_density(gamma: f64, bins: usize, tol: f64, max_iters: usize) -> Result<Self> {
        Self::new(gamma)?.with_density(build_density(gamma, bins, tol, max_iters)?)
    }

    pub fn with_density(mut self, grid: DensityGrid) -> Result<Self> {
        self.preimages = grid_preimages(self.scale, self.gamma, grid.bins());
        self.preimage_slopes =
            self.preimages.iter().map(|x| 1.0 / left_derivative(self.scale, self.gamma, *x)).collect();
        self.density = Some(grid);
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn density(&self) -> Result<&DensityGrid> {
        self.density.as_ref().ok_or(Error::MissingDensity)
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        eval_map(self.scale, self.gamma, x)
    }

    /// Left preimage using the cached grid brackets when available.
    #[inline]
    pub fn left_preimage(&self, y: f64) -> f64 {
        self.left_preimage_with_slope(y).0
    }

    /// Left preimage and `T'` there. The cubic Hermite guess from the cached
    /// grid is accurate enough that one Newton step usually suffices.
    #[inline]
    pub(crate) fn left_preimage_with_slope(&self, y: f64) -> (f64, f64) {
        if y <= 0.0 {
            return (0.0, 1.0);
        }
        if self.preimages.is_empty() {
            return solve_left(self.scale, self.gamma, y, 0.0, BRANCH_BOUNDARY, 0.5 * y);
        }
        let bins = self.preimages.len() - 1;
        let t = y * bins as f64;
        let j = (t as usize).min(bins - 1);
        let (lo, hi) = (self.preimages[j], self.preimages[j + 1]);
        let th = t - j as f64;
        let w = 1.0 / bins as f64;
        let (th2, th3) = (th * th, th * th * th);
        let guess = (2.0 * th3 - 3.0 * th2 + 1.0) * lo
            + (th3 - 2.0 * th2 + th) * w * self.preimage_slopes[j]
            + (3.0 * th2 - 2.0 * th3) * hi
            + (th3 - th2) * w * self.preimage_slopes[j + 1];
        let guess = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
        solve_left(self.scale, self.gamma, y, lo, hi, guess)
    }

    /// Unnormalised kernel weights `h(x_j) / (h(y) |T'(x_j)|)` of the left
    /// and right preimages of `y`, with the preimages themselves.
    pub fn kernel_weights(&self, y: f64) -> Result<KernelWeights> {
        let grid = self.density()?;
        check_unit(y)?;
        let hy = grid.density_at(y);
        let x_left = self.left_preimage(y.min(1.0));
        let x_right = 0.5 * (y + 1.0);
        let left = grid.density_at(x_left) / (hy * map_derivative(self.gamma, x_left));
        let right = grid.density_at(x_right) / (hy * 2.0);
        Ok(KernelWeights { x_left, x_right, left, right })
    }
}

/// Preimages of a point and their kernel weights before renormalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelWeights {
    pub x_left: f64,
    pub x_right: f64,
    pub left: f64,
    pub right: f64,
}

/// One draw from the invariant density: a cell with probability
/// proportional to its mass, then a uniform point inside it.
pub fn sample_invariant<R: RngCore + ?Sized>(model: &MapModel, rng: &mut R) -> Result<f64> {
    let grid = model.density()?;
    Ok(sample_grid(grid, rng))
}

fn sample_grid<R: RngCore + ?Sized>(grid: &DensityGrid, rng: &mut R) -> f64 {
    let total = grid.cumulative[grid.bins() - 1];
    let u = rng::uniform(rng) * total;
    let cell = grid.cumulative.partition_point(|c| *c <= u).min(grid.bins() - 1);
    let v = rng::uniform(rng);
    ((cell as f64 + v) * grid.cell_width()).min(1.0)
}

/// Stationary start by iterating the map from a uniform draw.
pub fn sample_burn_in<R: RngCore + ?Sized>(model: &MapModel, steps: usize, rng: &mut R) -> f64 {
    let mut x = rng::uniform(rng);
    for _ in 0..steps {
        x = model.apply(x);
    }
    x
}

/// One transition of the Perron–Frobenius chain from `y`.
pub fn step_chain<R: RngCore + ?Sized>(model: &MapModel, y: f64, rng: &mut R) -> Result<f64> {
    let grid = model.density()?;
    if !(0.0..=1.0).contains(&y) {
        return Err(domain!("chain state must lie in [0,1], got {y}"));
    }
    step_unchecked(model, grid, y, rng)
}

#[inline]
pub(crate) fn step_unchecked<R: RngCore + ?Sized>(
    model: &MapModel,
    grid: &DensityGrid,
    y: f64,
    rng: &mut R,
) -> Result<f64> {
    let u = rng::uniform(rng);
    if y >= 1.0 {
        // only preimage left is the fixed point 1
        return Ok(1.0);
    }
    let (x_left, slope) = model.left_preimage_with_slope(y);
    let x_right = 0.5 * (y + 1.0);
    // h(y) cancels after renormalisation
    let a = grid.density_at(x_left) / slope;
    let b = 0.5 * grid.density_at(x_right);
    let total = a + b;
    if !(total > 0.0) {
        return Err(Error::Degenerate(alloc::format!("both kernel weights vanish at y = {y}")));
    }
    Ok(if u * total < a { x_left } else { x_right })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    ForwardOrbit,
    BackwardChain,
}

/// A simulated path of the map or the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub values: Vec<f64>,
    pub seed: u64,
    pub gamma: f64,
}

/// Forward orbit `T(x0), T²(x0), …, Tⁿ(x0)`.
pub fn simulate_orbit(gamma: f64, n: usize, x0: f64) -> Result<Trajectory> {
    let model = MapModel::new(gamma)?;
    check_unit(x0)?;
    if n == 0 {
        return Err(precondition!("orbit length must be >= 1"));
    }
    let mut values = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        x = model.apply(x);
        values.push(x);
    }
    Ok(Trajectory { kind: TrajectoryKind::ForwardOrbit, values, seed: 0, gamma })
}

/// How a chain path is started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainStart {
    /// Draw from the invariant density.
    Stationary,
    /// Iterate the map this many times from a uniform draw.
    BurnIn(usize),
    At(f64),
}

/// `n` chain steps from the chosen start; the start itself is not stored.
pub fn simulate_chain(model: &MapModel, n: usize, start: ChainStart, key: StreamKey) -> Result<Trajectory> {
    let grid = model.density()?;
    if n == 0 {
        return Err(precondition!("chain length must be >= 1"));
    }
    let mut rng = key.stream();
    let mut y = match start {
        ChainStart::Stationary => sample_grid(grid, &mut rng),
        ChainStart::BurnIn(steps) => sample_burn_in(model, steps, &mut rng),
        ChainStart::At(y0) => {
            check_unit(y0)?;
            y0
        }
    };
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        y = step_unchecked(model, grid, y, &mut rng)?;
        values.push(y);
    }
    Ok(Trajectory { kind: TrajectoryKind::BackwardChain, values, seed: key.master, gamma: model.gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::tag;

    fn model(gamma: f64) -> MapModel {
        MapModel::with_built_density(gamma, 4096, 1e-8, 1_000_000).unwrap()
    }

    #[test]
    fn map_hand_values() {
        assert_eq!(apply_map(0.5, 0.0).unwrap(), 0.0);
        assert_eq!(apply_map(0.5, 0.75).unwrap(), 0.5);
        let expected = 0.25 * (1.0 + core::f64::consts::SQRT_2 * 0.5);
        assert!((apply_map(0.5, 0.25).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.426_776_695).abs() < 1e-9);
        assert_eq!(apply_map(0.3, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn map_rejects_bad_input() {
        assert!(apply_map(0.0, 0.5).is_err());
        assert!(apply_map(1.0, 0.5).is_err());
        assert!(apply_map(0.5, 1.5).is_err());
        assert!(apply_map(0.5, -0.1).is_err());
    }

    #[test]
    fn branches_increase_and_stay_in_unit_interval() {
        for gamma in [0.1, 0.25, 0.4, 0.9] {
            let mut prev_left = -1.0;
            let mut prev_right = -1.0;
            for i in 0..=10_000 {
                let x = i as f64 / 10_000.0;
                let y = apply_map(gamma, x).unwrap();
                assert!((0.0..=1.0).contains(&y));
                if x < 0.5 {
                    assert!(y > prev_left || x == 0.0);
                    prev_left = y;
                } else {
                    assert!(y > prev_right || x == 0.5);
                    prev_right = y;
                }
            }
        }
    }

    #[test]
    fn preimage_examples() {
        assert_eq!(left_preimage(0.5, 0.0).unwrap(), 0.0);
        assert!((left_preimage(0.5, 0.426_776_695).unwrap() - 0.25).abs() < 1e-9);
        let x = left_preimage(0.25, 0.9).unwrap();
        assert!(x < 0.5);
        assert!((apply_map(0.25, x).unwrap() - 0.9).abs() <= PREIMAGE_TOL);
        assert!(left_preimage(0.25, 1.0).is_err());
    }

    #[test]
    fn preimage_round_trip_on_grid() {
        for gamma in [0.25, 0.4, 0.75] {
            for i in 0..10_000 {
                let y = i as f64 / 10_000.0;
                let x = left_preimage(gamma, y).unwrap();
                assert!((0.0..0.5).contains(&x));
                assert!((apply_map(gamma, x).unwrap() - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn orbit_examples() {
        let t = simulate_orbit(0.3, 3, 0.0).unwrap();
        assert_eq!(t.values, vec![0.0, 0.0, 0.0]);
        let t = simulate_orbit(0.5, 2, 0.75).unwrap();
        assert_eq!(t.values, vec![0.5, 0.0]);
        let t = simulate_orbit(0.25, 500, 0.123).unwrap();
        for w in t.values.windows(2) {
            assert_eq!(w[1], apply_map(0.25, w[0]).unwrap());
        }
    }

    #[test]
    fn density_is_normalised_fixed_point_and_peaks_at_zero() {
        let m = model(0.25);
        let g = m.density().unwrap();
        assert!(g.residual() <= 1e-8);
        assert!((g.values().iter().sum::<f64>() / g.bins() as f64 - 1.0).abs() < 1e-9);
        assert!(g.values().iter().all(|v| *v >= 0.0));
        assert!(g.values()[0] > g.values()[g.bins() - 1]);
        let decile = g.bins() / 10;
        let first: f64 = g.values()[..decile].iter().sum();
        let last: f64 = g.values()[g.bins() - decile..].iter().sum();
        assert!(first > last);
        assert!(ulam_residual(0.25, g).unwrap() <= 1e-8 * 1.01);
    }

    #[test]
    fn build_density_preconditions() {
        assert!(build_density(0.25, 100, 1e-8, 10).is_err());
        assert!(build_density(0.25, 128, 1e-8, 10).is_err());
        match build_density(0.25, 256, 1e-14, 2) {
            Err(Error::NonConvergence { residual, iterations }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_grid_samples_single_cell() {
        let mut values = vec![0.0; 256];
        values[37] = 1.0;
        let grid = DensityGrid::from_values(values, 0.0).unwrap();
        let m = MapModel::new(0.25).unwrap().with_density(grid).unwrap();
        let mut rng = StreamKey::new(3, tag::DIAGNOSTIC).stream();
        for _ in 0..1000 {
            let x = sample_invariant(&m, &mut rng).unwrap();
            assert_eq!(m.density().unwrap().cell_of(x), 37);
        }
    }

    #[test]
    fn missing_density_is_an_error() {
        let m = MapModel::new(0.25).unwrap();
        let mut rng = StreamKey::new(3, tag::DIAGNOSTIC).stream();
        assert_eq!(sample_invariant(&m, &mut rng), Err(Error::MissingDensity));
        assert_eq!(step_chain(&m, 0.3, &mut rng), Err(Error::MissingDensity));
    }

    #[test]
    fn chain_steps_land_on_preimages() {
        let m = model(0.25);
        let t = simulate_chain(&m, 20_000, ChainStart::Stationary, StreamKey::new(5, tag::PATH)).unwrap();
        for w in t.values.windows(2) {
            assert!((m.apply(w[1]) - w[0]).abs() <= 1e-10);
        }
        let again = simulate_chain(&m, 20_000, ChainStart::Stationary, StreamKey::new(5, tag::PATH)).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn kernel_weights_nearly_sum_to_one() {
        let m = model(0.25);
        for i in 1..200 {
            let y = i as f64 / 200.0;
            let w = m.kernel_weights(y).unwrap();
            assert!((w.left + w.right - 1.0).abs() <= 0.05, "y={y}: {}", w.left + w.right);
        }
    }
}
