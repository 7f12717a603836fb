//! Calibration method: bisection over a fixed charge with backward
//! induction for the value of the charged stopping problem.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::fabp::DiscountFactor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub bisect_tol: f64,
    /// Largest spacing of the posterior-mean grid (Gaussian only).
    pub spacing: f64,
    /// Grid half-width around the bracket; `None` sizes it from the spread
    /// of the walk over the horizon (Gaussian only).
    pub half_width: Option<f64>,
}

impl CalibrationGrid {
    pub fn bernoulli() -> Self {
        CalibrationGrid { lambda_lo: 0.0, lambda_hi: 1.0, bisect_tol: 1e-5, spacing: 0.0, half_width: None }
    }

    pub fn gaussian() -> Self {
        CalibrationGrid { lambda_lo: 0.0, lambda_hi: 2.0, bisect_tol: 1e-5, spacing: 0.005, half_width: None }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda_lo < self.lambda_hi) || !(self.bisect_tol > 0.0) {
            return invalid("calibration bracket needs lo < hi and a positive tolerance");
        }
        Ok(())
    }
}

/// Final bisection bracket: the charged value is nonnegative at `lo` and
/// negative at `hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

fn bisect(grid: &CalibrationGrid, mut value: impl FnMut(f64) -> f64) -> Result<Bracket> {
    grid.validate()?;
    let (mut lo, mut hi) = (grid.lambda_lo, grid.lambda_hi);
    if !(value(lo) >= 0.0) || !(value(hi) < 0.0) {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > grid.bisect_tol {
        let mid = 0.5 * (lo + hi);
        if value(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bracket { lo, hi })
}

/// Value of playing a Beta(Ψ, κ-Ψ) arm at least once and at most `n` times
/// while paying `lambda` per pull.
pub fn bernoulli_charged_value(psi: f64, kappa: f64, gamma: f64, n: usize, lambda: f64) -> f64 {
    // g[i] is the continuation value after t pulls with i successes.
    let mut g = vec![0.0; n + 1];
    for t in (0..n).rev() {
        let k = kappa + t as f64;
        for i in 0..=t {
            let p = (psi + i as f64) / k;
            let v = p - lambda + gamma * (p * g[i + 1] + (1.0 - p) * g[i]);
            g[i] = if t == 0 { v } else { v.max(0.0) };
        }
    }
    g[0]
}

pub fn calibration_bernoulli_bracket(
    psi: f64,
    kappa: f64,
    gamma: DiscountFactor,
    n: usize,
    grid: &CalibrationGrid,
) -> Result<Bracket> {
    if !(psi > 0.0 && psi < kappa) || n == 0 {
        return invalid(format!("Bernoulli calibration needs 0 < Ψ < κ and N >= 1, got ({psi}, {kappa}), N = {n}"));
    }
    bisect(grid, |l| bernoulli_charged_value(psi, kappa, gamma.value(), n, l))
}

/// Gittins index of a Beta(Ψ, κ-Ψ) arm truncated at `n` pulls.
pub fn calibration_bernoulli(
    psi: f64,
    kappa: f64,
    gamma: DiscountFactor,
    n: usize,
    grid: &CalibrationGrid,
) -> Result<f64> {
    Ok(calibration_bernoulli_bracket(psi, kappa, gamma, n, grid)?.midpoint())
}

/// Transition weights of a centred normal step of standard deviation `sd`
/// onto a grid of spacing `h`, with the grid's rounding variance removed.
fn kernel(sd: f64, h: f64) -> Vec<f64> {
    let var = (sd * sd - h * h / 12.0).max(0.0);
    if var == 0.0 {
        return vec![1.0];
    }
    let s = var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let width = (8.0 * s / h).ceil() as usize;
    let mut w: Vec<f64> = (0..=2 * width)
        .map(|i| {
            let d = i as f64 - width as f64;
            normal.cdf((d + 0.5) * h / s) - normal.cdf((d - 0.5) * h / s)
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Discretised posterior-mean walk of a Gaussian arm with observation
/// standard deviation `scale`, started at mean 0 with weight `kappa`.
struct GaussianWalk {
    h: f64,
    /// Grid points `lo + i h`.
    lo: f64,
    len: usize,
    kernels: Vec<Vec<f64>>,
    gamma: f64,
    origin: usize,
}

impl GaussianWalk {
    fn new(kappa: f64, scale: f64, gamma: f64, n: usize, spacing: f64, half_width: f64) -> Self {
        // Keep at least 16 grid cells per standard deviation of the first,
        // widest step so that large κ is resolved as well as small κ.
        let h = spacing.min(scale / (kappa * (kappa + 1.0)).sqrt() / 16.0);
        let m = (half_width / h).ceil() as usize;
        let kernels = (0..n)
            .map(|t| {
                let k = kappa + t as f64;
                kernel(scale / (k * (k + 1.0)).sqrt(), h)
            })
            .collect();
        GaussianWalk { h, lo: -(m as f64) * h, len: 2 * m + 1, kernels, gamma, origin: m }
    }

    fn charged_value(&self, lambda: f64) -> f64 {
        let n = self.kernels.len();
        let mut g = vec![0.0; self.len];
        let mut next = vec![0.0; self.len];
        for t in (0..n).rev() {
            let w = &self.kernels[t];
            let half = (w.len() / 2) as isize;
            let last = self.len as isize - 1;
            let range: Vec<usize> = if t == 0 { vec![self.origin] } else { (0..self.len).collect() };
            for &i in &range {
                let mut e = 0.0;
                for (d, &wd) in w.iter().enumerate() {
                    let j = (i as isize + d as isize - half).clamp(0, last) as usize;
                    e += wd * g[j];
                }
                let mu = self.lo + i as f64 * self.h;
                let v = mu - lambda + self.gamma * e;
                next[i] = if t == 0 { v } else { v.max(0.0) };
            }
            std::mem::swap(&mut g, &mut next);
        }
        g[self.origin]
    }
}

fn gaussian_half_width(grid: &CalibrationGrid, kappa: f64, scale: f64, n: usize) -> f64 {
    grid.half_width.unwrap_or_else(|| {
        let spread = scale * (1.0 / kappa - 1.0 / (kappa + n as f64)).sqrt();
        grid.lambda_lo.abs().max(grid.lambda_hi.abs()) + 8.0 * spread
    })
}

pub fn calibration_gaussian_scaled_bracket(
    kappa: f64,
    scale: f64,
    gamma: DiscountFactor,
    n: usize,
    grid: &CalibrationGrid,
) -> Result<Bracket> {
    if !(kappa > 0.0) || !(scale > 0.0) || n == 0 {
        return invalid("Gaussian calibration needs κ > 0, scale > 0 and N >= 1");
    }
    if !(grid.spacing > 0.0) {
        return invalid("grid spacing must be positive");
    }
    let walk =
        GaussianWalk::new(kappa, scale, gamma.value(), n, grid.spacing, gaussian_half_width(grid, kappa, scale, n));
    bisect(grid, |l| walk.charged_value(l))
}

/// Index `ν(0, κ)` of a unit-variance Gaussian arm truncated at `n` pulls.
pub fn calibration_gaussian(kappa: f64, gamma: DiscountFactor, n: usize, grid: &CalibrationGrid) -> Result<f64> {
    Ok(calibration_gaussian_scaled_bracket(kappa, 1.0, gamma, n, grid)?.midpoint())
}

/// Like [`calibration_gaussian`] but fails if halving the spacing moves the
/// index by more than the bisection tolerance.
pub fn calibration_gaussian_checked(
    kappa: f64,
    gamma: DiscountFactor,
    n: usize,
    grid: &CalibrationGrid,
) -> Result<f64> {
    let coarse = calibration_gaussian(kappa, gamma, n, grid)?;
    let fine_grid = CalibrationGrid { spacing: grid.spacing / 2.0, ..*grid };
    let fine = calibration_gaussian(kappa, gamma, n, &fine_grid)?;
    if (fine - coarse).abs() > grid.bisect_tol {
        return Err(Error::GridTooCoarse { delta: fine - coarse });
    }
    Ok(fine)
}
