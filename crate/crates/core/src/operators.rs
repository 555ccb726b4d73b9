//! Evaluation of `A_n[f](x) = E f(S_n)`: exact Bernstein sums, truncated
//! Szász sums with a certified remainder, Monte Carlo, and the grid
//! sup-error `Delta_n`.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{poisson_window, Family, FamilyKind, MAX_N};
use crate::function::TargetFunction;
use crate::numeric::{binomial_pmf, poisson_pmf, seeded_rng, task_rng, CompensatedSum, GridSpec};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const MAX_TAIL_TOL: f64 = 1e-6;
pub const MIN_MC_TRIALS: u64 = 100;
pub const MIN_SUP_GRID: usize = 33;
/// Bernoulli points closer than this to 0 or 1 are always summed exactly.
pub const MC_EDGE_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactSum,
    TruncatedSum,
    MonteCarlo,
}

/// An operator value with its error radius: zero for exact sums, the
/// discarded tail mass times `sup|f|` for truncated sums, and three standard
/// errors for Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorValue {
    pub value: f64,
    pub error_radius: f64,
    pub method: Method,
}

impl OperatorValue {
    fn exact(value: f64) -> Self {
        Self { value, error_radius: 0.0, method: Method::ExactSum }
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::param(format!("n must lie in [1, {MAX_N}], got {n}")));
    }
    Ok(())
}

/// Bernstein polynomial `sum_m C(n,m) f(m/n) x^m (1-x)^(n-m)`.
pub fn bernstein_exact(f: &TargetFunction, n: u64, x: f64) -> Result<OperatorValue> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param(format!("bernstein_exact requires x in [0, 1], got {x}")));
    }
    let nf = n as f64;
    let mut acc = CompensatedSum::new();
    for m in 0..=n {
        let w = binomial_pmf(m, n, x);
        if w != 0.0 {
            acc.add(w * f.eval_clamped(m as f64 / nf)?);
        }
    }
    Ok(OperatorValue::exact(acc.value()))
}

/// Szász–Mirakjan operator `e^{-nx} sum_k (nx)^k/k! f(k/n)`, truncated to a
/// window whose discarded Poisson mass is certified below `tail_tol`.
pub fn szasz_exact(f: &TargetFunction, n: u64, x: f64, tail_tol: f64) -> Result<OperatorValue> {
    check_n(n)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::param(format!("szasz_exact requires finite x >= 0, got {x}")));
    }
    if !(tail_tol > 0.0 && tail_tol <= MAX_TAIL_TOL) {
        return Err(Error::param(format!("tail tolerance must lie in (0, {MAX_TAIL_TOL}], got {tail_tol}")));
    }
    let sup = f.sup_abs().ok_or_else(|| {
        Error::MissingMetadata(format!(
            "szasz_exact needs sup|f| for `{}` to bound the truncated series",
            f.name()
        ))
    })?;
    let nf = n as f64;
    let mu = nf * x;
    if mu == 0.0 {
        return Ok(OperatorValue::exact(f.eval_clamped(0.0)?));
    }
    let w = poisson_window(mu, tail_tol);
    let mut acc = CompensatedSum::new();
    for k in w.lo..=w.hi {
        let p = poisson_pmf(k, mu);
        if p != 0.0 {
            acc.add(p * f.eval_clamped(k as f64 / nf)?);
        }
    }
    Ok(OperatorValue { value: acc.value(), error_radius: w.tail_bound * sup, method: Method::TruncatedSum })
}

fn monte_carlo<R: RngCore>(f: &TargetFunction, fam: &Family, n: u64, x: f64, trials: u64, rng: &mut R) -> Result<OperatorValue> {
    // Welford running moments
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..trials {
        let v = f.eval_clamped(fam.sample_mean(x, n, rng)?)?;
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = if trials > 1 { m2 / (trials - 1) as f64 } else { 0.0 };
    Ok(OperatorValue { value: mean, error_radius: 3.0 * (var / trials as f64).sqrt(), method: Method::MonteCarlo })
}

/// Monte Carlo estimate of `E f(S_n)`, deterministic given `seed`.
pub fn generic_mc(f: &TargetFunction, fam: &Family, n: u64, x: f64, trials: u64, seed: u64) -> Result<OperatorValue> {
    validate_mc(fam, n, x, trials)?;
    monte_carlo(f, fam, n, x, trials, &mut seeded_rng(seed))
}

fn validate_mc(fam: &Family, n: u64, x: f64, trials: u64) -> Result<()> {
    check_n(n)?;
    fam.sigma(x)?;
    if trials < MIN_MC_TRIALS {
        return Err(Error::param(format!("Monte Carlo needs at least {MIN_MC_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

/// How operator values are obtained inside [`sup_error`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EvalMode {
    Exact { tail_tol: f64 },
    MonteCarlo { trials: u64, seed: u64 },
}

impl Default for EvalMode {
    fn default() -> Self {
        EvalMode::Exact { tail_tol: DEFAULT_TAIL_TOL }
    }
}

/// `A_n[f](x)` for the family, by the exact path of the family or by Monte
/// Carlo on generator stream `stream`.
pub fn evaluate(f: &TargetFunction, fam: &Family, n: u64, x: f64, mode: EvalMode, stream: u64) -> Result<OperatorValue> {
    fam.sigma(x)?;
    let exact = |tail_tol: f64| match fam.kind {
        FamilyKind::Bernoulli => bernstein_exact(f, n, x),
        FamilyKind::Poisson => szasz_exact(f, n, x, tail_tol),
    };
    match mode {
        EvalMode::Exact { tail_tol } => exact(tail_tol),
        EvalMode::MonteCarlo { trials, seed } => {
            if fam.kind == FamilyKind::Bernoulli && x.min(1.0 - x) < MC_EDGE_MARGIN {
                return exact(DEFAULT_TAIL_TOL);
            }
            validate_mc(fam, n, x, trials)?;
            monte_carlo(f, fam, n, x, trials, &mut task_rng(seed, stream))
        }
    }
}

/// Grid approximation of `Delta_n = sup_x |A_n[f](x) - f(x)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupError {
    pub n: u64,
    pub delta: f64,
    pub argmax_x: f64,
    pub grid_size: usize,
    pub error_radius: f64,
}

/// Per-point values `(x, A_n[f](x))` on the grid, in grid order.
pub fn evaluate_on_grid(f: &TargetFunction, fam: &Family, n: u64, xs: &[f64], mode: EvalMode) -> Result<Vec<OperatorValue>> {
    for &x in xs {
        if !fam.in_domain(x) {
            return Err(Error::param(format!(
                "grid point {x} outside the {} x-domain [{}, {}]",
                fam.kind.as_str(),
                fam.x_min,
                fam.x_max
            )));
        }
    }
    xs.par_iter()
        .enumerate()
        .map(|(i, &x)| evaluate(f, fam, n, x, mode, i as u64))
        .collect()
}

pub fn sup_error(f: &TargetFunction, fam: &Family, n: u64, grid: &GridSpec, mode: EvalMode) -> Result<SupError> {
    if grid.size < MIN_SUP_GRID {
        return Err(Error::param(format!("sup-error grid needs at least {MIN_SUP_GRID} points, got {}", grid.size)));
    }
    let xs = grid.points()?;
    let values = evaluate_on_grid(f, fam, n, &xs, mode)?;
    let mut best = SupError { n, delta: 0.0, argmax_x: xs[0], grid_size: xs.len(), error_radius: 0.0 };
    let mut first = true;
    for (&x, v) in xs.iter().zip(&values) {
        let err = (v.value - f.eval_clamped(x)?).abs();
        best.error_radius = best.error_radius.max(v.error_radius);
        if first || err > best.delta {
            best.delta = err;
            best.argmax_x = x;
            first = false;
        }
    }
    Ok(best)
}

/// `zeta_n = sqrt(n) (S_n - x) / sigma(x)`, the normalized sum of `n`
/// independent copies of `zeta(x)` scaled by `n^{-1/2}`.
pub fn normalized_sum(fam: &Family, x: f64, n: u64, s_n: f64) -> Result<f64> {
    let s = fam.sigma(x)?;
    Ok((n as f64).sqrt() * (s_n - x) / s)
}

/// `zeta_n` for the lattice value `n S_n = k`, computed as `(k - n x) / (sigma sqrt n)`.
pub fn lattice_normalized_sum(fam: &Family, x: f64, n: u64, k: u64) -> Result<f64> {
    let s = fam.sigma(x)?;
    let nf = n as f64;
    Ok((k as f64 - nf * x) / (s * nf.sqrt()))
}
