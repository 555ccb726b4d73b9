//! Tail functions and the absolute tail function (ATF)
//! `Q(u) = sup_n P(n^{-1/2} |zeta_1 + ... + zeta_n| > u)`, bounded through
//! `phi`, the envelope `nu(lambda) = sup_n n phi(lambda / sqrt n)` and its
//! Young–Fenchel conjugate: `Q(u) <= min(1, 2 exp(-nu*(u)))`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{chernoff_rate, Family};
use crate::numeric::{gauss_legendre, golden_section_max, integrate_gl, task_rng};
use crate::operators::lattice_normalized_sum;

pub const DEFAULT_LAMBDA_CAP: f64 = 50.0;
pub const DEFAULT_LAMBDA_STEP: f64 = 0.05;
pub const DEFAULT_N_MAX: u64 = 1024;
pub const MAX_CAP_DOUBLINGS: u32 = 5;
pub const DEFAULT_PHI_X_POINTS: usize = 33;
pub const MIN_ATF_TRIALS: u64 = 10_000;
/// Curves are treated as zero once below this level.
pub const TAIL_FLOOR: f64 = 1e-12;
const CLOSED_GRID_PER_UNIT: f64 = 40.0;
const MOMENT_LEVELS: i32 = 48;
const MOMENT_SUBPANELS: usize = 8;
const MOMENT_FLOOR: f64 = 1e-14;

/// `max_{+-} max_x ln E exp(+-lambda zeta(x))` over the given x-points.
pub fn phi_sup(fam: &Family, lambda: f64, xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::param("phi needs a nonempty x-grid"));
    }
    let mut best = f64::NEG_INFINITY;
    for &x in xs {
        best = best.max(fam.zeta_log_mgf(x, lambda)?).max(fam.zeta_log_mgf(x, -lambda)?);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuValue {
    pub value: f64,
    /// Maximizing n of the finite scan.
    pub argmax_n: u64,
    /// The `n -> infinity` limit exceeded every finite-n value.
    pub limit_dominates: bool,
}

/// `max(max_{1 <= n <= n_max} n phi(lambda / sqrt n), lambda^2 c / 2)` with
/// `c` the curvature of `phi` at 0 (estimated by a central difference when
/// not given).
pub fn nu_envelope<F>(phi: F, lambda: f64, n_max: u64, curvature: Option<f64>) -> Result<NuValue>
where
    F: Fn(f64) -> Result<f64>,
{
    if n_max < 1024 {
        return Err(Error::param(format!("n_max must be at least 1024, got {n_max}")));
    }
    if lambda == 0.0 {
        return Ok(NuValue { value: 0.0, argmax_n: 1, limit_dominates: false });
    }
    let c = match curvature {
        Some(c) => c,
        None => {
            let h = 1e-4;
            (phi(h)? + phi(-h)? - 2.0 * phi(0.0)?) / (h * h)
        }
    };
    let mut best = f64::NEG_INFINITY;
    let mut argmax_n = 1;
    for n in 1..=n_max {
        let nf = n as f64;
        let v = nf * phi(lambda / nf.sqrt())?;
        if !v.is_finite() {
            return Err(Error::Overflow { lambda: lambda / nf.sqrt(), x: f64::NAN });
        }
        if v > best {
            best = v;
            argmax_n = n;
        }
    }
    let limit = 0.5 * c * lambda * lambda;
    let limit_dominates = limit > best * (1.0 + 1e-12);
    Ok(NuValue { value: best.max(limit), argmax_n, limit_dominates })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: f64,
    /// The maximizer sits on the last grid node: the cap may be too small.
    pub at_boundary: bool,
}

/// `sup_lambda (lambda u - g(lambda))` over a sorted grid starting at 0,
/// refined by golden-section search between the neighbours of the grid
/// maximizer.
pub fn fenchel_conjugate<G: Fn(f64) -> f64>(g: G, u: f64, lambdas: &[f64]) -> Result<Conjugate> {
    if lambdas.len() < 3 || lambdas[0] != 0.0 {
        return Err(Error::param("lambda grid must start at 0 and have at least 3 points"));
    }
    let mut i_best = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &l) in lambdas.iter().enumerate() {
        let v = l * u - g(l);
        if v > best {
            best = v;
            i_best = i;
        }
    }
    let last = lambdas.len() - 1;
    let lo = lambdas[i_best.saturating_sub(1)];
    let hi = lambdas[(i_best + 1).min(last)];
    let (arg, refined) = golden_section_max(|l| l * u - g(l), lo, hi, 1e-12 * hi.max(1.0));
    let (value, argmax) = if refined > best { (refined, arg) } else { (best, lambdas[i_best]) };
    Ok(Conjugate { value, argmax, at_boundary: i_best == last && u > 0.0 })
}

/// Conjugate of `phi_P(z) = e^z - 1 - z`: `(1+u) ln(1+u) - u`, which equals
/// `u ln(1+u) - u + ln(1+u)`.
pub fn poisson_conjugate(u: f64) -> f64 {
    chernoff_rate(u.abs())
}

/// `e^{|lambda|} - 1 - |lambda|`.
pub fn poisson_phi(lambda: f64) -> f64 {
    let l = lambda.abs();
    l.exp_m1() - l
}

#[derive(Clone)]
enum NuRepr {
    Closed(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Values at `k * step`, interpolated linearly; `+inf` beyond the table.
    Tabulated { step: f64, values: Vec<f64> },
}

/// An even convex `nu` together with its conjugate `nu*`.
#[derive(Clone)]
pub struct ConjugatePair {
    label: String,
    nu: NuRepr,
    lambda_cap: f64,
    /// Radius of finiteness of the log-MGF.
    pub lambda_0: f64,
    pub n_max: Option<u64>,
    pub warnings: Vec<String>,
}

impl fmt::Debug for ConjugatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConjugatePair")
            .field("label", &self.label)
            .field("lambda_cap", &self.lambda_cap)
            .field("n_max", &self.n_max)
            .finish()
    }
}

impl ConjugatePair {
    /// Pair with a closed-form even `nu`; only `lambda >= 0` is queried.
    pub fn closed<F>(label: impl Into<String>, nu: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            nu: NuRepr::Closed(Arc::new(nu)),
            lambda_cap: DEFAULT_LAMBDA_CAP,
            lambda_0: f64::INFINITY,
            n_max: None,
            warnings: Vec::new(),
        }
    }

    /// `nu = lambda^2 / 2`, `nu* = u^2 / 2`.
    pub fn subgaussian() -> Self {
        Self::closed("subgaussian", |l| 0.5 * l * l)
    }

    /// `nu = phi_P`: for the Poisson family `n phi(lambda / sqrt n)` is
    /// largest at `n = 1` and `phi` is largest at the left end of the domain.
    pub fn poisson() -> Self {
        Self::closed("poisson-exact", poisson_phi)
    }

    /// Tabulates `nu` from the family's exact log-MGF on `[0, cap]`.
    /// The cap is doubled (at most five times) until the conjugate's
    /// maximizer is interior at the point where `Q` drops below the floor.
    pub fn from_family(fam: &Family, xs: &[f64], n_max: u64, lambda_cap: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && lambda_cap > step) {
            return Err(Error::param(format!("bad lambda grid: cap {lambda_cap}, step {step}")));
        }
        for &x in xs {
            fam.sigma(x)?;
        }
        let phi = |l: f64| phi_sup(fam, l, xs);
        let nodes = (lambda_cap / step).round() as usize;
        let mut values = tabulate_nu(&phi, step, 0, nodes, n_max)?;
        let mut pair = Self {
            label: format!("{}-conjugate", fam.kind.as_str()),
            nu: NuRepr::Tabulated { step, values: values.clone() },
            lambda_cap: nodes as f64 * step,
            lambda_0: f64::INFINITY,
            n_max: Some(n_max),
            warnings: Vec::new(),
        };
        let mut doublings = 0;
        loop {
            let u = pair.floor_crossing();
            let c = pair.nu_star(u);
            if !c.at_boundary {
                break;
            }
            if doublings == MAX_CAP_DOUBLINGS {
                pair.warnings.push(format!(
                    "lambda cap {} too small at u = {u}: conjugate maximizer on the boundary",
                    pair.lambda_cap
                ));
                break;
            }
            doublings += 1;
            let have = values.len() - 1;
            values.extend(tabulate_nu(&phi, step, have + 1, 2 * have, n_max)?);
            pair.nu = NuRepr::Tabulated { step, values: values.clone() };
            pair.lambda_cap = (values.len() - 1) as f64 * step;
        }
        let d2_min = values.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min);
        if d2_min < -1e-9 * values.last().copied().unwrap_or(1.0).max(1.0) {
            pair.warnings.push(format!("tabulated nu fails the convexity check (min second difference {d2_min:.3e})"));
        }
        Ok(pair)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lambda_cap(&self) -> f64 {
        self.lambda_cap
    }

    pub fn nu(&self, lambda: f64) -> f64 {
        let l = lambda.abs();
        match &self.nu {
            NuRepr::Closed(f) => f(l),
            NuRepr::Tabulated { step, values } => {
                let t = l / step;
                let last = (values.len() - 1) as f64;
                if t > last * (1.0 + 1e-12) {
                    return f64::INFINITY;
                }
                let i = (t.floor() as usize).min(values.len() - 2);
                let w = (t - i as f64).min(1.0);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    fn lambda_grid(&self, cap: f64) -> Vec<f64> {
        match &self.nu {
            NuRepr::Tabulated { step, values } => (0..values.len()).map(|k| k as f64 * step).collect(),
            NuRepr::Closed(_) => {
                let m = (cap * CLOSED_GRID_PER_UNIT).ceil() as usize;
                (0..=m).map(|k| cap * k as f64 / m as f64).collect()
            }
        }
    }

    /// `nu*(u)`. Closed-form pairs double the cap on a boundary hit.
    pub fn nu_star(&self, u: f64) -> Conjugate {
        let u = u.abs();
        let mut cap = self.lambda_cap;
        let mut c = fenchel_conjugate(|l| self.nu(l), u, &self.lambda_grid(cap)).expect("grid is valid");
        if let NuRepr::Closed(_) = self.nu {
            let mut k = 0;
            while c.at_boundary && k < MAX_CAP_DOUBLINGS {
                cap *= 2.0;
                k += 1;
                c = fenchel_conjugate(|l| self.nu(l), u, &self.lambda_grid(cap)).expect("grid is valid");
            }
        }
        c
    }

    /// Smallest `u` on a quarter-unit scan (capped at 64) where the bound
    /// `2 exp(-nu*)` falls below the tail floor.
    fn floor_crossing(&self) -> f64 {
        let target = (2.0 / TAIL_FLOOR).ln();
        let mut u = 0.25;
        while u < 64.0 && self.nu_star(u).value <= target {
            u += 0.25;
        }
        u.min(64.0)
    }
}

fn tabulate_nu<F>(phi: &F, step: f64, from: usize, to: usize, n_max: u64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    (from..=to)
        .into_par_iter()
        .map(|k| nu_envelope(phi, k as f64 * step, n_max, Some(1.0)).map(|v| v.value))
        .collect()
}

/// `min(1, 2 exp(-nu*(u)))`.
pub fn atf_upper_bound(pair: &ConjugatePair, u: f64) -> f64 {
    (2.0 * (-pair.nu_star(u).value).exp()).min(1.0)
}

/// `Q(u) <= exp(-K u^q)` with `q = min(p, 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTailSpec {
    pub p: f64,
    pub q: f64,
    pub k: f64,
}

impl PowerTailSpec {
    pub fn new(p: f64, k: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::param(format!("power-tail exponent p must be positive, got {p}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::param(format!("power-tail constant K must be positive, got {k}")));
        }
        Ok(Self { p, q: p.min(2.0), k })
    }
}

pub fn power_tail_atf(spec: &PowerTailSpec, u: f64) -> f64 {
    (-spec.k * u.abs().powf(spec.q)).exp().min(1.0)
}

/// A step curve: value `values[i]` on `[u[i], u[i+1])`, 1 before `u[0]`
/// and 0 beyond the last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedTail {
    pub u: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errs: Vec<f64>,
    /// Monte Carlo estimate rather than an exact curve.
    pub estimated: bool,
}

impl TabulatedTail {
    pub fn new(u: Vec<f64>, values: Vec<f64>, std_errs: Vec<f64>, estimated: bool) -> Result<Self> {
        if u.is_empty() || u.len() != values.len() || u.len() != std_errs.len() {
            return Err(Error::param("tabulated tail needs equal, nonempty u/value/std-err columns"));
        }
        if u[0] < 0.0 || u.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("tabulated tail u-grid must be nonnegative and strictly increasing"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("tabulated tail values must be nonincreasing in [0, 1]"));
        }
        Ok(Self { u, values, std_errs, estimated })
    }

    fn index(&self, u: f64) -> Option<usize> {
        self.u.partition_point(|&t| t <= u).checked_sub(1)
    }
}

#[derive(Clone, Debug)]
pub enum TailCurve {
    Conjugate(Arc<ConjugatePair>),
    PoissonExact,
    PowerTail(PowerTailSpec),
    Tabulated(TabulatedTail),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub u: f64,
    pub value: f64,
    pub half_width: f64,
}

/// `int_0^inf Q(t^{1/alpha}) dt = alpha int_0^inf z^{alpha-1} Q(z) dz`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentIntegral {
    pub partial: f64,
    pub remainder: f64,
    /// Upper integration limit in z.
    pub z_end: f64,
    pub divergent: bool,
}

impl MomentIntegral {
    pub fn total(&self) -> f64 {
        self.partial + self.remainder
    }
}

impl TailCurve {
    pub fn describe(&self) -> String {
        match self {
            TailCurve::Conjugate(p) => format!("{} (lambda cap {})", p.label(), p.lambda_cap()),
            TailCurve::PoissonExact => "poisson-exact".into(),
            TailCurve::PowerTail(s) => format!("power-tail (p {}, q {}, K {})", s.p, s.q, s.k),
            TailCurve::Tabulated(t) => {
                format!("tabulated ({} points{})", t.u.len(), if t.estimated { ", estimated" } else { "" })
            }
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return match self {
                TailCurve::Tabulated(t) if u == 0.0 => t.index(0.0).map_or(1.0, |i| t.values[i]),
                _ => 1.0,
            };
        }
        match self {
            TailCurve::Conjugate(p) => atf_upper_bound(p, u),
            TailCurve::PoissonExact => (2.0 * (-poisson_conjugate(u)).exp()).min(1.0),
            TailCurve::PowerTail(s) => power_tail_atf(s, u),
            TailCurve::Tabulated(t) => {
                if u > *t.u.last().expect("nonempty") {
                    0.0
                } else {
                    t.index(u).map_or(1.0, |i| t.values[i])
                }
            }
        }
    }

    pub fn tabulate(&self, us: &[f64]) -> Vec<TailPoint> {
        us.iter()
            .map(|&u| {
                let half_width = match self {
                    TailCurve::Tabulated(t) if u <= *t.u.last().expect("nonempty") => {
                        t.index(u).map_or(0.0, |i| t.std_errs[i])
                    }
                    _ => 0.0,
                };
                TailPoint { u, value: self.eval(u), half_width }
            })
            .collect()
    }

    /// `sup {z : Q(z) = 1}`.
    pub fn cap_release(&self) -> f64 {
        if let TailCurve::Tabulated(t) = self {
            return match t.values.iter().position(|&v| v < 1.0) {
                Some(i) => t.u[i],
                None => *t.u.last().expect("nonempty"),
            };
        }
        if self.eval(f64::MIN_POSITIVE) < 1.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.eval(hi) >= 1.0 && hi < 1e6 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Certified bound on `int_z^inf s^{alpha-1} Q(s) ds`, when available.
    fn moment_remainder(&self, alpha: f64, z: f64) -> Option<f64> {
        match self {
            TailCurve::Tabulated(t) => (z >= *t.u.last().expect("nonempty")).then_some(0.0),
            TailCurve::PowerTail(s) => {
                // (1/q) K^{-a} Gamma(a, K z^q), a = alpha/q, with
                // Gamma(a, x) <= x^{a-1} e^{-x} / (1 - (a-1)/x) for x > a - 1
                let a = alpha / s.q;
                let x = s.k * z.powf(s.q);
                let corr = if a <= 1.0 {
                    1.0
                } else if x > a - 1.0 {
                    1.0 / (1.0 - (a - 1.0) / x)
                } else {
                    return None;
                };
                Some(s.k.powf(-a) / s.q * x.powf(a - 1.0) * (-x).exp() * corr)
            }
            TailCurve::Conjugate(_) | TailCurve::PoissonExact => {
                // nu* is convex: nu*(s) >= nu*(z) + m (s - z) with m a left secant slope
                let e = |s: f64| match self {
                    TailCurve::Conjugate(p) => p.nu_star(s).value,
                    _ => poisson_conjugate(s),
                };
                let d = 1e-3 * z;
                let m = (e(z) - e(z - d)) / d;
                (m > 0.0).then(|| z.powf(alpha - 1.0) * 2.0 * (-e(z)).exp() / m)
            }
        }
    }

    /// `alpha int_0^inf z^{alpha-1} Q(z) dz`, computed as `int Q(t^{1/alpha}) dt`.
    /// Up to the cap-release point the integrand is 1; the rest is split
    /// into geometric Gauss–Legendre panels, plus a certified remainder.
    pub fn alpha_moment(&self, alpha: f64) -> Result<MomentIntegral> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if let TailCurve::Tabulated(t) = self {
            let mut partial = t.u[0].powf(alpha);
            for i in 0..t.u.len() - 1 {
                partial += t.values[i] * (t.u[i + 1].powf(alpha) - t.u[i].powf(alpha));
            }
            let z_end = *t.u.last().expect("nonempty");
            return Ok(MomentIntegral { partial, remainder: 0.0, z_end, divergent: false });
        }
        let z0 = self.cap_release();
        let mut z_end = z0.max(1.0);
        while self.eval(z_end) > MOMENT_FLOOR && z_end < 1e8 {
            z_end *= 2.0;
        }
        let (t0, t1) = (z0.powf(alpha), z_end.powf(alpha));
        let rule = gauss_legendre(20);
        let inv = 1.0 / alpha;
        // geometric panels towards t0, where the integrand may have a
        // root-type kink
        let len = t1 - t0;
        let mut partial = t0;
        let mut a = t0;
        for j in (0..=MOMENT_LEVELS).rev() {
            let b = t0 + len * 2f64.powi(-j);
            partial += integrate_gl(|t| self.eval(t.powf(inv)), a, b, MOMENT_SUBPANELS, &rule);
            a = b;
        }
        let remainder = self.moment_remainder(alpha, z_end).map(|r| alpha * r);
        let (remainder, divergent) = match remainder {
            Some(r) => (r, r > 0.01 * partial),
            None => (f64::INFINITY, true),
        };
        Ok(MomentIntegral { partial, remainder, z_end, divergent })
    }
}

/// Monte Carlo ATF: for every u, the largest over `n_set` of the frequency
/// of `n^{-1/2} |zeta_1 + ... + zeta_n| > u` (strict), with the binomial
/// standard error of the maximizing frequency. Each n draws from its own
/// stream `task_rng(seed, position in n_set)`.
pub fn empirical_atf(fam: &Family, x: f64, u_grid: &[f64], n_set: &[u64], trials: u64, seed: u64) -> Result<TailCurve> {
    if n_set.is_empty() {
        return Err(Error::param("n-set is empty"));
    }
    if trials < MIN_ATF_TRIALS {
        return Err(Error::param(format!("empirical ATF needs at least {MIN_ATF_TRIALS} trials, got {trials}")));
    }
    if u_grid.is_empty() || u_grid[0] < 0.0 || u_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("u-grid must be nonempty, nonnegative and strictly increasing"));
    }
    fam.sigma(x)?;
    let counts: Vec<Vec<u64>> = n_set
        .par_iter()
        .enumerate()
        .map(|(task, &n)| -> Result<Vec<u64>> {
            let mut rng = task_rng(seed, task as u64);
            let mut c = vec![0u64; u_grid.len()];
            for _ in 0..trials {
                let k = fam.sample_sum(x, n, &mut rng)?;
                let z = lattice_normalized_sum(fam, x, n, k)?.abs();
                // u_grid is sorted: all u < z count
                let m = u_grid.partition_point(|&u| u < z);
                for ci in &mut c[..m] {
                    *ci += 1;
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let t = trials as f64;
    let mut values = Vec::with_capacity(u_grid.len());
    let mut std_errs = Vec::with_capacity(u_grid.len());
    for j in 0..u_grid.len() {
        let best = counts.iter().map(|c| c[j]).max().expect("n-set nonempty") as f64 / t;
        values.push(best);
        std_errs.push((best * (1.0 - best) / t).sqrt());
    }
    Ok(TailCurve::Tabulated(TabulatedTail::new(u_grid.to_vec(), values, std_errs, true)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::GridSpec;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn phi_examples() {
        let p = Family::poisson(1.0, 64.0).unwrap();
        let xs = GridSpec::uniform(1.0, 64.0, 64).points().unwrap();
        assert_eq!(phi_sup(&p, 0.0, &xs).unwrap(), 0.0);
        assert!((phi_sup(&p, 1.0, &xs).unwrap() - 0.718281828459045).abs() < 1e-14);
        let b = Family::default_for(crate::FamilyKind::Bernoulli);
        assert!((phi_sup(&b, 1.0, &[0.5]).unwrap() - 0.4337808304830272).abs() < 1e-15);
        assert_eq!(phi_sup(&b, -1.0, &[0.3, 0.5]).unwrap(), phi_sup(&b, 1.0, &[0.3, 0.5]).unwrap());
        assert!(phi_sup(&b, f64::INFINITY, &[0.5]).is_err());
    }

    #[test]
    fn nu_examples() {
        let sg = |l: f64| Ok(0.5 * l * l);
        for l in [0.5, 3.0, 17.0] {
            let v = nu_envelope(sg, l, 1024, None).unwrap();
            assert!((v.value - 0.5 * l * l).abs() < 1e-9 * l * l);
            assert!(!v.limit_dominates);
        }
        let v = nu_envelope(|l| Ok(poisson_phi(l)), 2.0, 1024, Some(1.0)).unwrap();
        assert!((v.value - 4.38905609893065).abs() < 1e-13);
        assert_eq!(v.argmax_n, 1);
        assert_eq!(nu_envelope(sg, 0.0, 1024, None).unwrap().value, 0.0);
        assert!(nu_envelope(sg, 1.0, 512, None).is_err());
        // symmetric two-point law: n ln cosh(lambda / sqrt n) increases to lambda^2 / 2
        let v = nu_envelope(|l: f64| Ok(l.cosh().ln()), 10.0, 1024, None).unwrap();
        assert!(v.limit_dominates);
        assert_eq!(v.argmax_n, 1024);
        assert!((v.value - 50.0).abs() < 1e-5);
    }

    fn lam_grid(cap: f64, m: usize) -> Vec<f64> {
        (0..=m).map(|k| cap * k as f64 / m as f64).collect()
    }

    #[test]
    fn conjugate_examples() {
        let g = lam_grid(50.0, 2000);
        let c = fenchel_conjugate(|l| 0.5 * l * l, 1.0, &g).unwrap();
        assert!((c.value - 0.5).abs() < 1e-12);
        assert!((c.argmax - 1.0).abs() < 1e-5);
        assert_eq!(fenchel_conjugate(|l| 0.5 * l * l, 0.0, &g).unwrap().value, 0.0);
        assert_eq!(fenchel_conjugate(poisson_phi, 0.0, &g).unwrap().value, 0.0);
        let c = fenchel_conjugate(poisson_phi, E - 1.0, &g).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        let c = fenchel_conjugate(|l| 0.5 * l * l, 80.0, &g).unwrap();
        assert!(c.at_boundary);
        assert!(fenchel_conjugate(|l| l, 1.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn poisson_conjugate_examples() {
        assert_eq!(poisson_conjugate(0.0), 0.0);
        assert!((poisson_conjugate(E - 1.0) - 1.0).abs() < 1e-15);
        assert!((poisson_conjugate(1.0) - 0.3862943611198906).abs() < 1e-15);
        for u in [0.3f64, 2.0, 19.0] {
            let expanded_form = u * u.ln_1p() - u + u.ln_1p();
            assert!((poisson_conjugate(u) - expanded_form).abs() < 1e-13 * expanded_form.max(1.0));
        }
        let u: f64 = 1e8;
        assert!((poisson_conjugate(u) / (u * u.ln_1p()) - 1.0).abs() < 0.06);
    }

    #[test]
    fn poisson_conjugate_matches_numeric_transform() {
        let pair = ConjugatePair::poisson();
        for i in 0..200 {
            let u = 20.0 * i as f64 / 199.0;
            assert!((pair.nu_star(u).value - poisson_conjugate(u)).abs() < 1e-8, "u={u}");
        }
    }

    #[test]
    fn biconjugation_recovers_nu() {
        for pair in [ConjugatePair::subgaussian(), ConjugatePair::poisson()] {
            let us = lam_grid(40.0, 1600);
            let star_fn = |u: f64| pair.nu_star(u).value;
            for l in [0.25, 1.0, 2.0, 3.0] {
                let back = fenchel_conjugate(star_fn, l, &us).unwrap().value;
                let nu = pair.nu(l);
                assert!((back - nu).abs() <= 1e-6 * nu, "{}: lambda {l}: {back} vs {nu}", pair.label());
            }
        }
    }

    #[test]
    fn atf_examples() {
        let sg = ConjugatePair::subgaussian();
        assert_eq!(atf_upper_bound(&sg, 0.0), 1.0);
        assert!((atf_upper_bound(&sg, 3.0) - 0.02221799307648461).abs() < 1e-12);
        let p = ConjugatePair::poisson();
        assert!((atf_upper_bound(&p, E - 1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-10);
        let s = PowerTailSpec::new(2.0, 0.5).unwrap();
        assert_eq!(power_tail_atf(&s, 0.0), 1.0);
        assert!((power_tail_atf(&s, 2.0) - (-2.0f64).exp()).abs() < 1e-15);
        let s4 = PowerTailSpec::new(4.0, 0.5).unwrap();
        assert_eq!(s4.q, 2.0);
        assert_eq!(power_tail_atf(&s4, 2.0), power_tail_atf(&s, 2.0));
        assert!(PowerTailSpec::new(2.0, 0.0).is_err());
    }

    #[test]
    fn cap_release_points() {
        let z = TailCurve::PoissonExact.cap_release();
        assert!((z - 1.3908675361848094).abs() < 1e-12);
        let sg = TailCurve::Conjugate(Arc::new(ConjugatePair::subgaussian()));
        assert!((sg.cap_release() - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-8);
        let pt = TailCurve::PowerTail(PowerTailSpec::new(1.0, 1.0).unwrap());
        assert!(pt.cap_release() < 1e-12);
        let tab = TabulatedTail::new(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.5], vec![0.0; 3], false).unwrap();
        assert_eq!(TailCurve::Tabulated(tab).cap_release(), 2.0);
    }

    #[test]
    fn tabulated_is_step_left_and_zero_beyond() {
        let t = TabulatedTail::new(vec![0.5, 1.0, 2.0], vec![0.9, 0.4, 0.1], vec![0.01; 3], true).unwrap();
        let c = TailCurve::Tabulated(t);
        assert_eq!(c.eval(0.2), 1.0);
        assert_eq!(c.eval(0.5), 0.9);
        assert_eq!(c.eval(0.99), 0.9);
        assert_eq!(c.eval(1.0), 0.4);
        assert_eq!(c.eval(2.0), 0.1);
        assert_eq!(c.eval(2.5), 0.0);
        assert!(TabulatedTail::new(vec![0.0, 1.0], vec![0.5, 0.6], vec![0.0; 2], false).is_err());
    }

    #[test]
    fn moments_match_closed_forms() {
        // int_0^inf exp(-z) dz = 1; alpha int z^{alpha-1} e^{-K z^q} = (alpha/q) K^{-alpha/q} Gamma(alpha/q)
        for (p, k, alpha) in [(1.0, 1.0, 1.0), (2.0, 0.5, 1.0), (2.0, 0.5, 0.5), (0.5, 2.0, 0.25), (1.5, 3.0, 0.75)] {
            let s = PowerTailSpec::new(p, k).unwrap();
            let m = TailCurve::PowerTail(s).alpha_moment(alpha).unwrap();
            let a = alpha / s.q;
            let exact = a * k.powf(-a) * libm::tgamma(a);
            assert!((m.total() - exact).abs() <= 1e-9 * exact, "p={p} K={k} alpha={alpha}: {} vs {exact}", m.total());
            assert!(!m.divergent);
        }
        let m = TailCurve::PoissonExact.alpha_moment(1.0).unwrap();
        assert!((m.total() - 2.2766909417432626).abs() < 1e-9, "{}", m.total());
        let m = TailCurve::PoissonExact.alpha_moment(0.5).unwrap();
        assert!((m.total() - 1.4905198326163851).abs() < 1e-9, "{}", m.total());
        let sg = TailCurve::Conjugate(Arc::new(ConjugatePair::subgaussian()));
        // int min(1, 2 e^{-z^2/2}) dz
        let z0 = (2.0 * 2f64.ln()).sqrt();
        let exact = z0 + 2.0 * (std::f64::consts::PI / 2.0).sqrt() * libm::erfc(z0 / 2f64.sqrt());
        assert!((sg.alpha_moment(1.0).unwrap().total() - exact).abs() < 1e-8);
        let tab = TabulatedTail::new(vec![1.0, 2.0], vec![0.5, 0.25], vec![0.0; 2], false).unwrap();
        assert_eq!(TailCurve::Tabulated(tab).alpha_moment(1.0).unwrap().total(), 1.5);
    }

    #[test]
    fn slow_power_tail_remainder_is_certified() {
        let s = PowerTailSpec::new(0.5, 0.5).unwrap();
        let m = TailCurve::PowerTail(s).alpha_moment(1.0).unwrap();
        assert!(m.remainder.is_finite());
        let a = 1.0 / s.q;
        let exact = a * s.k.powf(-a) * libm::tgamma(a);
        assert!(m.total() >= exact * (1.0 - 1e-6));
        let hopeless = PowerTailSpec::new(0.2, 0.05).unwrap();
        assert!(TailCurve::PowerTail(hopeless).alpha_moment(1.0).unwrap().divergent);
    }

    #[test]
    fn bernoulli_pair_dominates_hoeffding_free_checks() {
        let fam = Family::bernoulli_on(0.05, 0.95).unwrap();
        let xs = GridSpec::uniform(0.05, 0.95, 33).points().unwrap();
        let pair = ConjugatePair::from_family(&fam, &xs, 1024, 50.0, 0.05).unwrap();
        assert!(pair.warnings.is_empty(), "{:?}", pair.warnings);
        assert_eq!(pair.nu(0.0), 0.0);
        // nu >= lambda^2 / 2 (the CLT limit) and nu* <= u^2 / 2
        for l in [0.5, 2.0, 10.0, 40.0] {
            assert!(pair.nu(l) >= 0.5 * l * l * (1.0 - 1e-12));
        }
        let mut prev = 0.0;
        for i in 0..=80 {
            let u = 0.1 * i as f64;
            let v = pair.nu_star(u).value;
            assert!(v <= 0.5 * u * u + 1e-9);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        let fam_c = TailCurve::Conjugate(Arc::new(pair));
        let emp = empirical_atf(&fam, 0.05, &[0.5, 1.0, 2.0, 3.0], &[1, 4, 16, 64], 20_000, 9).unwrap();
        for pt in emp.tabulate(&[0.5, 1.0, 2.0, 3.0]) {
            assert!(pt.value <= fam_c.eval(pt.u) + 3.0 * pt.half_width, "{pt:?}");
        }
    }

    #[test]
    fn empirical_atf_examples() {
        let b = Family::default_for(crate::FamilyKind::Bernoulli);
        let c = empirical_atf(&b, 0.5, &[0.0, 0.5, 3.0], &[1], 10_000, 1).unwrap();
        // |zeta| = 1 always
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(3.0), 0.0);
        let c = empirical_atf(&b, 0.5, &[3.0], &[4, 9, 16, 25], 20_000, 2).unwrap();
        let pt = c.tabulate(&[3.0])[0];
        assert!(pt.value <= 2.0 * (-4.5f64).exp() + 3.0 * pt.half_width.max(1.0 / 20_000f64.sqrt()));
        // strict inequality: n = 4, z = |k - 2| takes the value 1 exactly
        let c = empirical_atf(&b, 0.5, &[1.0], &[4], 10_000, 3).unwrap();
        assert!((c.eval(1.0) - 0.125).abs() < 4.0 * (0.125f64 * 0.875 / 1e4).sqrt());
        let again = empirical_atf(&b, 0.5, &[1.0], &[4], 10_000, 3).unwrap();
        assert_eq!(c.eval(1.0), again.eval(1.0));
        assert!(empirical_atf(&b, 0.5, &[1.0], &[4], 100, 3).is_err());
        assert!(empirical_atf(&b, 0.5, &[1.0], &[], 10_000, 3).is_err());
    }

    #[test]
    fn clt_floor_and_ordering() {
        let b = Family::default_for(crate::FamilyKind::Bernoulli);
        let p = Family::default_for(crate::FamilyKind::Poisson);
        let us = [0.25, 0.5, 1.0, 1.5, 2.0];
        let trials = 20_000;
        for (fam, x) in [(b, 0.3), (p, 2.0)] {
            let emp = empirical_atf(&fam, x, &us, &[256], trials, 5).unwrap();
            for pt in emp.tabulate(&us) {
                let gauss = libm::erfc(pt.u / 2f64.sqrt());
                assert!(pt.value >= 0.5 * gauss - 3.0 * pt.half_width, "{:?} {pt:?}", fam.kind);
            }
        }
        let upper = TailCurve::PoissonExact;
        let emp = empirical_atf(&p, 1.0, &us, &[1, 2, 8, 32], trials, 6).unwrap();
        for pt in emp.tabulate(&us) {
            assert!(pt.value <= upper.eval(pt.u) + 3.0 * pt.half_width);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn curves_are_capped_and_nonincreasing(a in 0.0f64..30.0, b in 0.0f64..30.0, p in 0.3f64..5.0, k in 0.05f64..4.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let curves = [
                TailCurve::PoissonExact,
                TailCurve::PowerTail(PowerTailSpec::new(p, k).unwrap()),
                TailCurve::Conjugate(Arc::new(ConjugatePair::subgaussian())),
            ];
            for c in &curves {
                let (ql, qh) = (c.eval(lo), c.eval(hi));
                prop_assert!(ql <= 1.0 && qh >= 0.0);
                prop_assert!(qh <= ql + 1e-15);
            }
        }

        #[test]
        fn conjugate_is_convex_and_nondecreasing(u in 0.0f64..20.0, d in 0.01f64..2.0) {
            let pair = ConjugatePair::poisson();
            let (a, b, c) = (pair.nu_star(u).value, pair.nu_star(u + d).value, pair.nu_star(u + 2.0 * d).value);
            prop_assert!(b >= a - 1e-12);
            prop_assert!(a + c - 2.0 * b >= -1e-9);
        }
    }
}
