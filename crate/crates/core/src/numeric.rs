//! Shared numerical kernels: grids, compensated summation, quadrature,
//! golden-section search, saddle-point pmfs and seeded generators.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point placement rule for a one-dimensional grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Uniform,
    /// Chebyshev–Lobatto points; both endpoints included.
    Chebyshev,
    /// Geometric spacing; requires `lo > 0`.
    Log,
}

/// A closed grid `[lo, hi]` with `size` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub kind: GridKind,
    pub lo: f64,
    pub hi: f64,
    pub size: usize,
}

impl GridSpec {
    pub fn uniform(lo: f64, hi: f64, size: usize) -> Self {
        Self { kind: GridKind::Uniform, lo, hi, size }
    }

    pub fn chebyshev(lo: f64, hi: f64, size: usize) -> Self {
        Self { kind: GridKind::Chebyshev, lo, hi, size }
    }

    pub fn log(lo: f64, hi: f64, size: usize) -> Self {
        Self { kind: GridKind::Log, lo, hi, size }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::param(format!("grid endpoints must be finite, got [{}, {}]", self.lo, self.hi)));
        }
        if self.size == 0 {
            return Err(Error::param("grid size must be positive"));
        }
        if self.size > 1 && self.lo >= self.hi {
            return Err(Error::param(format!("grid requires lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.kind == GridKind::Log && self.lo <= 0.0 {
            return Err(Error::param("log grid requires lo > 0"));
        }
        Ok(())
    }

    /// Grid points in increasing order. Endpoints are reproduced exactly.
    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.size;
        if n == 1 {
            return Ok(vec![self.lo]);
        }
        let last = (n - 1) as f64;
        let mut pts: Vec<f64> = match self.kind {
            GridKind::Uniform => (0..n)
                .map(|i| {
                    let t = i as f64 / last;
                    (1.0 - t) * self.lo + t * self.hi
                })
                .collect(),
            GridKind::Chebyshev => {
                let mid = 0.5 * (self.lo + self.hi);
                let half = 0.5 * (self.hi - self.lo);
                (0..n)
                    .map(|i| {
                        // symmetric pairing keeps the midpoint exact for odd n
                        let j = n - 1 - i;
                        if 2 * i == n - 1 {
                            mid
                        } else if i < j {
                            mid - half * (PI * i as f64 / last).cos()
                        } else {
                            mid + half * (PI * j as f64 / last).cos()
                        }
                    })
                    .collect()
            }
            GridKind::Log => {
                let (l0, l1) = (self.lo.ln(), self.hi.ln());
                (0..n).map(|i| (l0 + (l1 - l0) * (i as f64 / last)).exp()).collect()
            }
        };
        pts[0] = self.lo;
        pts[n - 1] = self.hi;
        Ok(pts)
    }
}

/// Neumaier-compensated accumulator. Sequential, so results are bit-stable
/// for a fixed summation order.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in it {
        acc.add(v);
    }
    acc.value()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule over `[a, b]` split into `panels` equal panels.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            acc.add(0.5 * h * w * f(mid + 0.5 * h * x));
        }
    }
    acc.value()
}

/// Maximizes a unimodal function on `[a, b]`; returns `(argmax, max)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ln Γ(n+1) − (n+½)ln n + n − ln√(2π) at half-integers 0, 0.5, …, 15.
const STIRLERR_HALVES: [f64; 31] = [
    0.0,
    0.153_426_409_720_027_35,
    0.081_061_466_795_327_26,
    0.054_814_121_051_917_65,
    0.041_340_695_955_409_29,
    0.033_162_873_519_936_29,
    0.027_677_925_684_998_34,
    0.023_746_163_656_297_5,
    0.020_790_672_103_765_09,
    0.018_488_450_532_673_19,
    0.016_644_691_189_821_19,
    0.015_134_973_221_917_38,
    0.013_876_128_823_070_75,
    0.012_810_465_242_920_23,
    0.011_896_709_945_891_77,
    0.011_104_559_758_206_92,
    0.010_411_265_261_972_1,
    0.009_799_416_126_158_803,
    0.009_255_462_182_712_733,
    0.008_768_700_134_139_385,
    0.008_330_563_433_362_871,
    0.007_934_114_564_314_021,
    0.007_573_675_487_951_841,
    0.007_244_554_301_320_383,
    0.006_942_840_107_209_53,
    0.006_665_247_032_707_682,
    0.006_408_994_188_004_207,
    0.006_171_712_263_039_458,
    0.005_951_370_112_758_848,
    0.005_746_216_513_010_116,
    0.005_554_733_551_962_801,
];

/// Error of Stirling's formula for ln n!.
pub fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let nn = n + n;
        if nn == nn.floor() {
            return STIRLERR_HALVES[nn as usize];
        }
        return libm::lgamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m − x`, evaluated without cancellation near x = m.
pub fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// Binomial(n, p) probability of `k`, via the saddle-point expansion
/// (relative accuracy near machine precision for all n).
pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if k == 0 {
        let lc = if p < 0.1 { -bd0(nf, nf * q) - nf * p } else { nf * q.ln() };
        return lc.exp();
    }
    if k == n {
        let lc = if q < 0.1 { -bd0(nf, nf * p) - nf * q } else { nf * p.ln() };
        return lc.exp();
    }
    let kf = k as f64;
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = 2.0 * LN_SQRT_2PI + kf.ln() + (-kf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// Poisson(mu) probability of `k`, via the saddle-point expansion.
pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mu).exp();
    }
    let kf = k as f64;
    (-stirlerr(kf) - bd0(kf, mu) - LN_SQRT_2PI - 0.5 * kf.ln()).exp()
}

/// Generator used for every Monte Carlo computation: ChaCha8 keyed by the
/// 64-bit seed (expanded with PCG32 as `rand_core::SeedableRng::seed_from_u64`).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed-splitting rule for parallel tasks: same key as `seeded_rng(seed)`,
/// with the ChaCha stream set to the task index.
pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(task);
    rng
}

pub const GENERATOR_NAME: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 key, stream = task index";
