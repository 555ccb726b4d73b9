//! Parameterized i.i.d. families `xi(x)` with mean `x` and variance
//! `sigma(x)^2`: Bernoulli (classical Bernstein) and Poisson (Szász).
//!
//! Sampling draws the lattice sum `n * S_n` directly:
//! * Bernoulli: `n <= 64` sums individual `u < x` trials; larger `n` uses the
//!   BTPE binomial sampler of `rand_distr`.
//! * Poisson: sequential-search inversion for means `n x <= 30`, the
//!   `rand_distr` rejection sampler above.

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::Interval;
use crate::numeric::{binomial_pmf, poisson_pmf, seeded_rng, CompensatedSum};

/// Mean above which Poisson sampling switches from inversion to rejection.
pub const POISSON_INVERSION_MAX_MEAN: f64 = 30.0;
/// Tail mass discarded when summing a Poisson support.
pub const POISSON_TRUNCATION_MASS: f64 = 1e-16;
/// Default distance of the Bernoulli x-domain from {0, 1}.
pub const DEFAULT_BERNOULLI_EPS: f64 = 1e-3;
pub const DEFAULT_POISSON_X_MIN: f64 = 1.0;
pub const DEFAULT_POISSON_X_MAX: f64 = 64.0;
/// Largest n accepted by the exact evaluators.
pub const MAX_N: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Bernoulli,
    Poisson,
}

impl FamilyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Poisson => "poisson",
        }
    }
}

/// One of the two families, restricted to an x-domain on which `sigma > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub kind: FamilyKind,
    pub interval: Interval,
    pub x_min: f64,
    pub x_max: f64,
}

impl Family {
    /// Bernoulli family with x-domain `[eps, 1 - eps]`.
    pub fn bernoulli(eps: f64) -> Result<Self> {
        Self::bernoulli_on(eps, 1.0 - eps)
    }

    pub fn bernoulli_on(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min > 0.0 && x_max < 1.0 && x_min <= x_max) {
            return Err(Error::param(format!(
                "bernoulli x-domain must satisfy 0 < x_min <= x_max < 1, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { kind: FamilyKind::Bernoulli, interval: Interval::unit(), x_min, x_max })
    }

    pub fn poisson(x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_min > 0.0 && x_max.is_finite() && x_min <= x_max) {
            return Err(Error::param(format!(
                "poisson x-domain must satisfy 0 < x_min <= x_max < inf, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { kind: FamilyKind::Poisson, interval: Interval::half_line(0.0)?, x_min, x_max })
    }

    pub fn default_for(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Bernoulli => Self::bernoulli(DEFAULT_BERNOULLI_EPS).expect("default domain is valid"),
            FamilyKind::Poisson => {
                Self::poisson(DEFAULT_POISSON_X_MIN, DEFAULT_POISSON_X_MAX).expect("default domain is valid")
            }
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::param(format!(
                "x = {x} outside the {} x-domain [{}, {}]",
                self.kind.as_str(),
                self.x_min,
                self.x_max
            )))
        }
    }

    /// Standard deviation of `xi(x)`; errors outside the x-domain.
    pub fn sigma(&self, x: f64) -> Result<f64> {
        self.check_x(x)?;
        Ok(self.sigma_formula(x))
    }

    /// The closed-form `sigma(x)` without the domain check; may be zero at the
    /// interval boundary. Used as a modulus weight over the whole interval.
    pub fn sigma_formula(&self, x: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => (x * (1.0 - x)).sqrt(),
            FamilyKind::Poisson => x.sqrt(),
        }
    }

    /// `P(n * S_n = k)`: Binomial(n, x) or Poisson(n x).
    pub fn pmf(&self, x: f64, n: u64, k: u64) -> Result<f64> {
        self.check_x(x)?;
        check_n(n)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => binomial_pmf(k, n, x),
            FamilyKind::Poisson => poisson_pmf(k, n as f64 * x),
        })
    }

    /// Inclusive range of `k` carrying all but `POISSON_TRUNCATION_MASS` of the
    /// mass (the full support for Bernoulli).
    pub fn support_window(&self, x: f64, n: u64) -> Result<(u64, u64)> {
        self.check_x(x)?;
        check_n(n)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => (0, n),
            FamilyKind::Poisson => {
                let w = poisson_window(n as f64 * x, POISSON_TRUNCATION_MASS);
                (w.lo, w.hi)
            }
        })
    }

    /// Mean and variance of `S_n` by exact (truncated) summation over the support.
    pub fn moments_by_summation(&self, x: f64, n: u64) -> Result<(f64, f64)> {
        let (lo, hi) = self.support_window(x, n)?;
        let nf = n as f64;
        let (mut m0, mut m1, mut m2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        for k in lo..=hi {
            let p = self.pmf(x, n, k)?;
            let s = k as f64 / nf;
            m0.add(p);
            m1.add(p * s);
            m2.add(p * (s - x) * (s - x));
        }
        Ok((m1.value() / m0.value(), m2.value() / m0.value()))
    }

    /// Draws `n * S_n` from a caller-owned generator.
    pub fn sample_sum<R: RngCore + ?Sized>(&self, x: f64, n: u64, rng: &mut R) -> Result<u64> {
        self.check_x(x)?;
        check_n(n)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => {
                if n <= 64 {
                    (0..n).filter(|_| rng.random::<f64>() < x).count() as u64
                } else {
                    Binomial::new(n, x).map_err(|e| Error::param(e.to_string()))?.sample(rng)
                }
            }
            FamilyKind::Poisson => {
                let mu = n as f64 * x;
                if mu <= POISSON_INVERSION_MAX_MEAN {
                    poisson_inversion(mu, rng)
                } else {
                    Poisson::new(mu).map_err(|e| Error::param(e.to_string()))?.sample(rng) as u64
                }
            }
        })
    }

    /// One realization of `S_n` from a caller-owned generator.
    pub fn sample_mean<R: RngCore + ?Sized>(&self, x: f64, n: u64, rng: &mut R) -> Result<f64> {
        Ok(self.sample_sum(x, n, rng)? as f64 / n as f64)
    }

    /// One realization of `S_n`, deterministic in `seed`.
    pub fn sample(&self, x: f64, n: u64, seed: u64) -> Result<f64> {
        let mut rng = seeded_rng(seed);
        self.sample_mean(x, n, &mut rng)
    }

    /// `ln E exp(lambda * zeta(x))` for the normalized variate
    /// `zeta = (xi - x) / sigma(x)`, in closed form.
    pub fn zeta_log_mgf(&self, x: f64, lambda: f64) -> Result<f64> {
        self.check_x(x)?;
        if !lambda.is_finite() {
            return Err(Error::Overflow { lambda, x });
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let v = match self.kind {
            FamilyKind::Bernoulli => {
                let s = self.sigma_formula(x);
                // two-point law: (1 - x)/s with prob x, -x/s with prob 1 - x
                let hi = lambda * (1.0 - x) / s + x.ln();
                let lo = -lambda * x / s + (1.0 - x).ln();
                let m = hi.max(lo);
                m + (-(hi - lo).abs()).exp().ln_1p()
            }
            FamilyKind::Poisson => {
                let r = x.sqrt();
                // -lambda sqrt(x) + x (e^{lambda/sqrt x} - 1)
                x * ((lambda / r).exp_m1() - lambda / r)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { lambda, x })
        }
    }

    pub fn normalized(&self, x: f64) -> Result<NormalizedVariate> {
        self.check_x(x)?;
        Ok(NormalizedVariate { family: *self, x })
    }
}

/// `zeta(x) = (xi(x) - x) / sigma(x)`: mean 0, variance 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedVariate {
    pub family: Family,
    pub x: f64,
}

impl NormalizedVariate {
    pub fn log_mgf(&self, lambda: f64) -> Result<f64> {
        self.family.zeta_log_mgf(self.x, lambda)
    }

    /// Value of zeta when `xi = k`.
    pub fn value_at(&self, k: u64) -> f64 {
        (k as f64 - self.x) / self.family.sigma_formula(self.x)
    }

    /// Mean and variance by truncated exact summation.
    pub fn moments(&self) -> Result<(f64, f64)> {
        let (m, v) = self.family.moments_by_summation(self.x, 1)?;
        let s = self.family.sigma_formula(self.x);
        Ok(((m - self.x) / s, v / (s * s)))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::param(format!("n must lie in [1, {MAX_N}], got {n}")));
    }
    Ok(())
}

fn poisson_inversion<R: RngCore + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mu).exp();
    let mut cdf = p;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= mu / k as f64;
        cdf += p;
    }
    k
}

/// Chernoff exponent of a Poisson mean: `(1+u) ln(1+u) - u`, `u >= -1`.
pub(crate) fn chernoff_rate(u: f64) -> f64 {
    if u <= -1.0 {
        return 1.0;
    }
    (1.0 + u) * u.ln_1p() - u
}

/// Truncation window `[lo, hi]` for a Poisson(mu) sum with a certified bound
/// on the discarded mass, from the Chernoff inequalities
/// `P(N >= mu(1+u)) <= exp(-mu h(u))` and `P(N <= mu(1-u)) <= exp(-mu h(-u))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonWindow {
    pub lo: u64,
    pub hi: u64,
    pub tail_bound: f64,
}

pub fn poisson_window(mu: f64, tol: f64) -> PoissonWindow {
    if mu == 0.0 {
        return PoissonWindow { lo: 0, hi: 0, tail_bound: 0.0 };
    }
    let half = 0.5 * tol;
    let upper_tail = |k: u64| (-mu * chernoff_rate(k as f64 / mu - 1.0)).exp(); // P(N >= k)
    let lower_tail = |k: u64| (-mu * chernoff_rate(k as f64 / mu - 1.0)).exp(); // P(N <= k), k <= mu
    // smallest hi >= ceil(mu) with P(N >= hi + 1) <= tol/2
    let mut step = 1u64;
    let mut hi = mu.ceil() as u64;
    while upper_tail(hi + step) > half {
        step *= 2;
    }
    let (mut a, mut b) = (hi, hi + step);
    while a + 1 < b {
        let m = a + (b - a) / 2;
        if upper_tail(m) > half {
            a = m;
        } else {
            b = m;
        }
    }
    hi = b - 1;
    let up = upper_tail(hi + 1);
    // largest lo <= floor(mu) with P(N <= lo - 1) <= tol/2
    let floor = mu.floor() as u64;
    let (lo, down) = if floor == 0 || lower_tail(0) > half {
        (0, 0.0)
    } else {
        let (mut a, mut b) = (0u64, floor);
        // invariant: lower_tail(a) <= half, lower_tail(b) > half (or b = floor)
        if lower_tail(floor) <= half {
            a = floor;
        } else {
            while a + 1 < b {
                let m = a + (b - a) / 2;
                if lower_tail(m) <= half {
                    a = m;
                } else {
                    b = m;
                }
            }
        }
        (a + 1, lower_tail(a))
    };
    PoissonWindow { lo, hi, tail_bound: up + down }
}
