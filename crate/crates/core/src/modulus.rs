//! Weighted (Ditzian–Totik) modulus of continuity
//! `omega_sigma[f](delta) = sup_{|h| <= delta} sup_x |f(x + h sigma(x)) - f(x)|`
//! on finite grids, and the Hölder seminorm derived from it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::function::{HolderSpec, Interval, TargetFunction};
use crate::numeric::GridSpec;

pub const DEFAULT_H_GRID_SIZE: usize = 65;
/// Right end of the x-window used for the sup over a half-line.
pub const DEFAULT_HALF_LINE_WINDOW: f64 = 64.0;
pub const MIN_HOLDER_DELTAS: usize = 8;

/// Pointwise weight `sigma(x)` in the step `h sigma(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightSpec {
    /// `sigma(x)` of the family, taken over the whole interval.
    FamilySigma { family: Family },
    /// `c x^alpha_exp (1 - x)^beta_exp` on `[0, 1]`.
    Jacobi { c: f64, alpha_exp: f64, beta_exp: f64 },
    Unit,
}

impl WeightSpec {
    pub fn jacobi(c: f64, alpha_exp: f64, beta_exp: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param(format!("jacobi weight needs c > 0, got {c}")));
        }
        if !(alpha_exp >= 0.0 && beta_exp >= 0.0) {
            return Err(Error::param(format!(
                "jacobi exponents must be nonnegative, got ({alpha_exp}, {beta_exp})"
            )));
        }
        Ok(WeightSpec::Jacobi { c, alpha_exp, beta_exp })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match *self {
            WeightSpec::Unit => Ok(1.0),
            WeightSpec::FamilySigma { family } => {
                let i = family.interval;
                if x < i.a || x > i.b {
                    return Err(Error::WeightDomain {
                        x,
                        reason: format!("outside the {} interval", family.kind.as_str()),
                    });
                }
                Ok(family.sigma_formula(x))
            }
            WeightSpec::Jacobi { c, alpha_exp, beta_exp } => {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::WeightDomain { x, reason: "jacobi weight lives on [0, 1]".into() });
                }
                Ok(c * x.powf(alpha_exp) * (1.0 - x).powf(beta_exp))
            }
        }
    }

    fn check_interval(&self, interval: Interval) -> Result<()> {
        if let WeightSpec::Jacobi { .. } = self {
            if interval.a != 0.0 || interval.b != 1.0 {
                return Err(Error::param(format!(
                    "jacobi weight requires the interval [0, 1], got [{}, {}]",
                    interval.a, interval.b
                )));
            }
        }
        Ok(())
    }
}

/// Tabulated nondecreasing curve `delta -> omega(delta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusProfile {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest change between the full grid and the halved grid.
    pub enclosure_slack: f64,
    /// x-range over which the supremum was taken.
    pub x_window: (f64, f64),
    pub warnings: Vec<String>,
}

impl ModulusProfile {
    /// Builds a profile from given values (e.g. an analytic modulus).
    pub fn from_values(deltas: Vec<f64>, values: Vec<f64>, enclosure_slack: f64) -> Result<Self> {
        check_deltas(&deltas)?;
        if values.len() != deltas.len() {
            return Err(Error::param("profile deltas and values differ in length"));
        }
        if values[0] != 0.0 {
            return Err(Error::param("a modulus vanishes at delta = 0"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("profile values must be finite, nonnegative and nondecreasing"));
        }
        Ok(Self { deltas, values, enclosure_slack, x_window: (f64::NAN, f64::NAN), warnings: Vec::new() })
    }

    pub fn max_delta(&self) -> f64 {
        *self.deltas.last().expect("profiles are nonempty")
    }

    /// `omega` at the smallest tabulated delta `>= t`; `None` beyond the table.
    pub fn lookup_upper(&self, t: f64) -> Option<f64> {
        let i = self.deltas.partition_point(|&d| d < t);
        self.values.get(i).copied()
    }

    /// `omega` at the largest tabulated delta `<= t`.
    pub fn lookup_lower(&self, t: f64) -> f64 {
        let i = self.deltas.partition_point(|&d| d <= t);
        self.values[i.saturating_sub(1)]
    }
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() || deltas[0] != 0.0 {
        return Err(Error::param("delta grid must start at 0"));
    }
    if deltas.windows(2).any(|w| !(w[1] > w[0])) || !deltas.iter().all(|d| d.is_finite()) {
        return Err(Error::param("delta grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// `{0} ∪` a log-spaced grid on `[lo, hi]` with `count` points.
pub fn delta_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    let mut d = vec![0.0];
    d.extend(GridSpec::log(lo, hi, count).points()?);
    Ok(d)
}

fn h_grid(size: usize) -> Result<Vec<f64>> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::param(format!("h-grid size must be odd and at least 3, got {size}")));
    }
    let half = (size / 2) as f64;
    Ok((0..size).map(|i| (i as f64 - half) / half).collect())
}

struct Sampled {
    xs: Vec<f64>,
    fx: Vec<f64>,
    sx: Vec<f64>,
}

fn sample(f: &TargetFunction, w: &WeightSpec, xs: &[f64]) -> Result<Sampled> {
    w.check_interval(f.interval())?;
    let fx = xs.iter().map(|&x| f.eval_clamped(x)).collect::<Result<Vec<_>>>()?;
    let sx = xs.iter().map(|&x| w.eval(x)).collect::<Result<Vec<_>>>()?;
    Ok(Sampled { xs: xs.to_vec(), fx, sx })
}

fn modulus_on(f: &TargetFunction, s: &Sampled, delta: f64, hs: &[f64]) -> Result<f64> {
    if delta == 0.0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for ((&x, &fx), &sx) in s.xs.iter().zip(&s.fx).zip(&s.sx) {
        if sx == 0.0 {
            continue;
        }
        for &u in hs {
            let y = x + u * delta * sx;
            best = best.max((f.eval_clamped(y)? - fx).abs());
        }
    }
    Ok(best)
}

/// Double-grid maximum of `|f(x + h sigma(x)) - f(x)|` over `xs` and a
/// symmetric h-grid of `h_grid_size` points spanning `[-delta, delta]`.
pub fn dt_modulus_at(f: &TargetFunction, w: &WeightSpec, delta: f64, xs: &[f64], h_grid_size: usize) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::param(format!("delta must be finite and nonnegative, got {delta}")));
    }
    if xs.is_empty() {
        return Err(Error::param("x-grid is empty"));
    }
    let s = sample(f, w, xs)?;
    modulus_on(f, &s, delta, &h_grid(h_grid_size)?)
}

fn raw_profile(f: &TargetFunction, s: &Sampled, deltas: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    deltas.par_iter().map(|&d| modulus_on(f, s, d, hs)).collect()
}

/// Tabulates the modulus on `deltas`, enforces monotonicity by a running
/// maximum and estimates the grid slack by halving both grids.
pub fn modulus_profile(
    f: &TargetFunction,
    w: &WeightSpec,
    deltas: &[f64],
    x_grid: &GridSpec,
    h_grid_size: usize,
) -> Result<ModulusProfile> {
    check_deltas(deltas)?;
    let xs = x_grid.points()?;
    let hs = h_grid(h_grid_size)?;
    let full = sample(f, w, &xs)?;
    let raw = raw_profile(f, &full, deltas, &hs)?;

    let coarse_xs: Vec<f64> = xs.iter().step_by(2).copied().collect();
    let coarse_h = h_grid(if h_grid_size >= 5 { h_grid_size / 2 + 1 } else { h_grid_size })?;
    let coarse_h = if coarse_h.len() % 2 == 1 { coarse_h } else { hs.clone() };
    let coarse = sample(f, w, &coarse_xs)?;
    let coarse_raw = raw_profile(f, &coarse, deltas, &coarse_h)?;
    let enclosure_slack = raw.iter().zip(&coarse_raw).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max);

    let mut values = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    let mut run = 0.0f64;
    for (i, &v) in raw.iter().enumerate() {
        if run - v > enclosure_slack {
            warnings.push(format!(
                "grid resolution: monotone correction {:.3e} at delta = {:.6e} exceeds slack {:.3e}",
                run - v,
                deltas[i],
                enclosure_slack
            ));
        }
        run = run.max(v);
        values.push(run);
    }
    Ok(ModulusProfile {
        deltas: deltas.to_vec(),
        values,
        enclosure_slack,
        x_window: (x_grid.lo, x_grid.hi),
        warnings,
    })
}

/// Minimal `H` with `omega(delta) <= H delta^alpha` over the nonzero grid deltas.
pub fn holder_seminorm(profile: &ModulusProfile, alpha: f64) -> Result<HolderSpec> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let nonzero: Vec<(f64, f64)> = profile
        .deltas
        .iter()
        .zip(&profile.values)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, v)| (*d, *v))
        .collect();
    if nonzero.is_empty() {
        return Err(Error::param("profile has no nonzero deltas"));
    }
    if nonzero.len() < MIN_HOLDER_DELTAS {
        return Err(Error::param(format!(
            "holder seminorm needs at least {MIN_HOLDER_DELTAS} nonzero deltas, got {}",
            nonzero.len()
        )));
    }
    let h = nonzero.iter().map(|(d, v)| v / d.powf(alpha)).fold(0.0, f64::max);
    HolderSpec::new(alpha, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{builtin_catalog, trial_function};
    use std::collections::BTreeMap;

    fn cat(name: &str, kv: &[(&str, f64)]) -> TargetFunction {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        builtin_catalog(name, &p, Interval::unit()).unwrap()
    }

    fn unit_xs(n: usize) -> Vec<f64> {
        GridSpec::uniform(0.0, 1.0, n).points().unwrap()
    }

    // brute-force double loop without clamping tricks beyond the definition
    fn oracle(f: impl Fn(f64) -> f64, delta: f64, xs: &[f64], nh: usize) -> f64 {
        let mut best = 0.0f64;
        for &x in xs {
            for j in 0..nh {
                let h = -delta + 2.0 * delta * j as f64 / (nh - 1) as f64;
                let y = (x + h).clamp(0.0, 1.0);
                best = best.max((f(y) - f(x)).abs());
            }
        }
        best
    }

    #[test]
    fn modulus_examples() {
        let xs = unit_xs(101);
        let c = cat("constant", &[("c", 2.0)]);
        assert_eq!(dt_modulus_at(&c, &WeightSpec::Unit, 0.3, &xs, 65).unwrap(), 0.0);
        let id = cat("identity", &[]);
        let v = dt_modulus_at(&id, &WeightSpec::Unit, 0.1, &xs, 65).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        assert!((v - oracle(|x| x, 0.1, &xs, 65)).abs() < 1e-15);
        let g = trial_function(Interval::unit(), 0.5, 0.5).unwrap();
        let v = dt_modulus_at(&g, &WeightSpec::Unit, 0.01, &xs, 65).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        assert!((v - oracle(|x| (x - 0.5f64).abs().sqrt(), 0.01, &xs, 65)).abs() < 1e-15);
        assert_eq!(dt_modulus_at(&g, &WeightSpec::Unit, 0.0, &xs, 65).unwrap(), 0.0);
        assert!(dt_modulus_at(&g, &WeightSpec::Unit, 0.1, &xs, 64).is_err());
    }

    #[test]
    fn weight_domain_errors() {
        let pois = Family::poisson(1.0, 64.0).unwrap();
        let f = builtin_catalog("exp-decay", &BTreeMap::new(), pois.interval).unwrap();
        let w = WeightSpec::FamilySigma { family: pois };
        assert!(matches!(dt_modulus_at(&f, &w, 0.1, &[-1.0, 2.0], 5), Err(Error::WeightDomain { .. })));
        let j = WeightSpec::jacobi(1.0, 0.5, 0.5).unwrap();
        assert!(matches!(j.eval(1.5), Err(Error::WeightDomain { .. })));
        assert!(dt_modulus_at(&f, &j, 0.1, &[0.5], 5).is_err());
        assert!(WeightSpec::jacobi(1.0, -0.5, 0.5).is_err());
    }

    #[test]
    fn jacobi_weight_with_half_exponents_is_bernoulli_sigma() {
        let bern = Family::bernoulli(1e-3).unwrap();
        let j = WeightSpec::jacobi(1.0, 0.5, 0.5).unwrap();
        let w = WeightSpec::FamilySigma { family: bern };
        for x in GridSpec::uniform(0.001, 0.999, 257).points().unwrap() {
            assert!((j.eval(x).unwrap() - w.eval(x).unwrap()).abs() < 1e-15);
            assert_eq!(w.eval(x).unwrap(), bern.sigma(x).unwrap());
        }
    }

    #[test]
    fn profile_examples() {
        let x = GridSpec::uniform(0.0, 1.0, 101);
        let c = cat("constant", &[("c", -1.0)]);
        let p = modulus_profile(&c, &WeightSpec::Unit, &[0.0, 0.1, 1.0], &x, 33).unwrap();
        assert_eq!(p.values, vec![0.0, 0.0, 0.0]);
        let id = cat("identity", &[]);
        let p = modulus_profile(&id, &WeightSpec::Unit, &[0.0, 0.5, 1.0], &x, 33).unwrap();
        for (v, e) in p.values.iter().zip([0.0, 0.5, 1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        let s = cat("sine", &[("freq", 9.0)]);
        let sup = s.sup_abs().unwrap();
        let deltas = delta_grid(1e-4, 4.0, 40).unwrap();
        let p = modulus_profile(&s, &WeightSpec::Unit, &deltas, &x, 33).unwrap();
        assert!(p.values.iter().all(|&v| v <= 2.0 * sup));
        assert!(p.values.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(p.values[0], 0.0);
    }

    #[test]
    fn profile_subadditivity_sanity() {
        let x = GridSpec::uniform(0.0, 1.0, 257);
        for f in [cat("sine", &[("freq", 6.0)]), trial_function(Interval::unit(), 0.4, 0.5).unwrap(), cat("square", &[])] {
            let base = delta_grid(1e-3, 0.25, 30).unwrap();
            let mut all: Vec<f64> = base.iter().copied().chain(base.iter().skip(1).map(|d| 2.0 * d)).collect();
            all.sort_by(f64::total_cmp);
            all.dedup();
            let p = modulus_profile(&f, &WeightSpec::Unit, &all, &x, 65).unwrap();
            let at = |d: f64| p.values[p.deltas.iter().position(|&t| t == d).unwrap()];
            for &d in base.iter().skip(1) {
                assert!(at(2.0 * d) <= 2.0 * at(d) + 2.0 * p.enclosure_slack + 1e-12, "{} at {d}", f.name());
            }
        }
    }

    #[test]
    fn seminorm_examples() {
        let x = GridSpec::uniform(0.0, 1.0, 201);
        let deltas = delta_grid(1e-4, 1.0, 40).unwrap();
        let c = cat("constant", &[("c", 5.0)]);
        let p = modulus_profile(&c, &WeightSpec::Unit, &deltas, &x, 65).unwrap();
        assert_eq!(holder_seminorm(&p, 0.7).unwrap().seminorm, 0.0);
        let g = trial_function(Interval::unit(), 0.5, 0.5).unwrap();
        let p = modulus_profile(&g, &WeightSpec::Unit, &deltas, &x, 65).unwrap();
        let h = holder_seminorm(&p, 0.5).unwrap().seminorm;
        assert!((h - 1.0).abs() <= 1e-9 + p.enclosure_slack, "{h}");
        let id = cat("identity", &[]);
        let p = modulus_profile(&id, &WeightSpec::Unit, &deltas, &x, 65).unwrap();
        assert!((holder_seminorm(&p, 1.0).unwrap().seminorm - 1.0).abs() < 1e-9);
        let short = ModulusProfile::from_values(vec![0.0, 0.1, 0.2], vec![0.0, 0.1, 0.2], 0.0).unwrap();
        assert!(holder_seminorm(&short, 1.0).is_err());
        let zero = ModulusProfile::from_values(vec![0.0], vec![0.0], 0.0).unwrap();
        assert!(holder_seminorm(&zero, 1.0).is_err());
    }

    #[test]
    fn seminorm_scales_with_function() {
        let x = GridSpec::uniform(0.0, 1.0, 129);
        let deltas = delta_grid(1e-4, 1.0, 24).unwrap();
        let bern = Family::bernoulli(1e-3).unwrap();
        let w = WeightSpec::FamilySigma { family: bern };
        let f = cat("sine", &[("freq", 4.0)]);
        let h = holder_seminorm(&modulus_profile(&f, &w, &deltas, &x, 33).unwrap(), 1.0).unwrap().seminorm;
        for c in [-3.0, 0.25, 7.5] {
            let hc = holder_seminorm(&modulus_profile(&f.scaled(c), &w, &deltas, &x, 33).unwrap(), 1.0)
                .unwrap()
                .seminorm;
            assert!((hc - c.abs() * h).abs() <= 1e-12 * hc.max(1.0), "c={c}");
        }
    }

    #[test]
    fn family_weighted_trial_modulus_matches_analysis() {
        // |x - 1/2| with sigma = sqrt(x(1-x)): sup attained at x = 1/2, value delta/2
        let bern = Family::bernoulli(1e-3).unwrap();
        let w = WeightSpec::FamilySigma { family: bern };
        let g = trial_function(Interval::unit(), 0.5, 1.0).unwrap();
        let xs = unit_xs(1025);
        for d in [1e-3, 0.01, 0.1, 0.5] {
            let v = dt_modulus_at(&g, &w, d, &xs, 65).unwrap();
            assert!((v - d / 2.0).abs() < 1e-12, "delta={d}: {v}");
        }
    }

    #[test]
    fn lookups_bracket_intermediate_deltas() {
        let p = ModulusProfile::from_values(vec![0.0, 0.1, 0.2, 0.4], vec![0.0, 1.0, 2.0, 3.0], 0.0).unwrap();
        assert_eq!(p.lookup_upper(0.15), Some(2.0));
        assert_eq!(p.lookup_lower(0.15), 1.0);
        assert_eq!(p.lookup_upper(0.2), Some(2.0));
        assert_eq!(p.lookup_lower(0.2), 2.0);
        assert_eq!(p.lookup_upper(0.5), None);
        assert_eq!(p.lookup_lower(0.5), 3.0);
        assert!(ModulusProfile::from_values(vec![0.0, 0.1], vec![0.0, -1.0], 0.0).is_err());
    }
}
