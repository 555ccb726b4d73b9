//! Upper bounds `Delta_n[f] <= int_0^inf omega_sigma[f](z / sqrt n) |dQ(z)|`,
//! their Hölder closed forms, and the Gaussian lower-bound constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::function::{HolderSpec, TargetFunction};
use crate::modulus::ModulusProfile;
use crate::numeric::GridSpec;
use crate::operators::{sup_error, EvalMode};
use crate::tail::{MomentIntegral, PowerTailSpec, TailCurve, TAIL_FLOOR};

pub const DEFAULT_Z_HI: f64 = 64.0;
pub const DEFAULT_Z_POINTS: usize = 4097;

/// Two-sided enclosure of the Stieltjes integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StieltjesBound {
    pub n: u64,
    pub lower: f64,
    pub upper: f64,
    /// Midpoint-rule value, clipped into `[lower, upper]`.
    pub estimate: f64,
    pub z_max: f64,
    /// `Q(z_max)`.
    pub tail_mass: f64,
    pub warnings: Vec<String>,
}

fn omega_upper(profile: &ModulusProfile, t: f64, cap: Option<f64>) -> Result<f64> {
    let v = profile.lookup_upper(t).map(|v| v + profile.enclosure_slack);
    match (v, cap) {
        (Some(v), Some(c)) => Ok(v.min(c)),
        (Some(v), None) => Ok(v),
        (None, Some(c)) => Ok(c),
        (None, None) => Err(Error::InsufficientData(format!(
            "modulus profile ends at delta = {} < {t} and sup|f| is unknown",
            profile.max_delta()
        ))),
    }
}

fn omega_interp(profile: &ModulusProfile, t: f64) -> f64 {
    let d = &profile.deltas;
    let i = d.partition_point(|&x| x <= t);
    if i == 0 {
        return profile.values[0];
    }
    if i == d.len() {
        return *profile.values.last().expect("nonempty");
    }
    let w = (t - d[i - 1]) / (d[i] - d[i - 1]);
    profile.values[i - 1] + w * (profile.values[i] - profile.values[i - 1])
}

/// Enclosure of `int omega(z / sqrt n) |dQ(z)|` on the cells of `z_grid`.
/// On each cell the integrand is nondecreasing, so the left and right
/// endpoint values bracket the cell contribution. Beyond `z_max` (the first
/// grid point with `Q < 1e-12`, at most 64) the upper bracket adds
/// `2 f_sup Q(z_max)`.
pub fn stieltjes_bound(
    profile: &ModulusProfile,
    q: &TailCurve,
    n: u64,
    z_grid: &GridSpec,
    f_sup: Option<f64>,
) -> Result<StieltjesBound> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    if let Some(s) = f_sup {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::param(format!("sup|f| must be finite and nonnegative, got {s}")));
        }
    }
    let mut zs: Vec<f64> = z_grid.points()?.into_iter().filter(|&z| (0.0..=DEFAULT_Z_HI).contains(&z)).collect();
    if zs.first() != Some(&0.0) {
        zs.insert(0, 0.0);
    }
    let mut qs: Vec<f64> = zs.iter().map(|&z| q.eval(z)).collect();
    // smallest nonincreasing majorant, in case of rounding wiggles
    for i in (0..qs.len() - 1).rev() {
        qs[i] = qs[i].max(qs[i + 1]);
    }
    let m = qs.iter().position(|&v| v < TAIL_FLOOR).unwrap_or(qs.len() - 1);
    let root = (n as f64).sqrt();
    let cap = f_sup.map(|s| 2.0 * s);
    let mut warnings = Vec::new();
    if profile.max_delta() < zs[m] / root {
        warnings.push(format!(
            "modulus profile ends at delta = {} below z_max / sqrt n = {}; using 2 sup|f| beyond",
            profile.max_delta(),
            zs[m] / root
        ));
    }

    let (mut lower, mut upper, mut mid) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let mass = qs[i] - qs[i + 1];
        if mass == 0.0 {
            continue;
        }
        lower += mass * profile.lookup_lower(zs[i] / root);
        upper += mass * omega_upper(profile, zs[i + 1] / root, cap)?;
        mid += mass * omega_interp(profile, 0.5 * (zs[i] + zs[i + 1]) / root);
    }
    let tail_mass = qs[m];
    if tail_mass > 0.0 {
        let c = cap.ok_or_else(|| {
            Error::InsufficientData(format!("Q(z_max) = {tail_mass:e} > 0 and sup|f| is unknown"))
        })?;
        let w = profile.lookup_lower(zs[m] / root);
        lower += w * tail_mass;
        mid += w * tail_mass;
        upper += c * tail_mass;
    }
    Ok(StieltjesBound { n, lower, upper, estimate: mid.clamp(lower, upper), z_max: zs[m], tail_mass, warnings })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HdtBound {
    pub value: f64,
    pub integral: MomentIntegral,
    pub divergent: bool,
}

/// `alpha H n^{-alpha/2} int_0^inf z^{alpha-1} Q(z) dz`.
pub fn hdt_bound(h: &HolderSpec, q: &TailCurve, n: u64) -> Result<HdtBound> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let integral = q.alpha_moment(h.alpha)?;
    let value = if h.seminorm == 0.0 { 0.0 } else { h.seminorm * (n as f64).powf(-0.5 * h.alpha) * integral.total() };
    Ok(HdtBound { value, integral, divergent: integral.divergent })
}

/// Hölder bound under `Q(z) = exp(-K z^q)`, three ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpBound {
    /// Numeric integral.
    pub direct: f64,
    /// `H n^{-alpha/2} (alpha/q) K^{-alpha/q} Gamma(alpha/q)`.
    pub closed_form: f64,
    /// `K^{-alpha/q} alpha H n^{-alpha/2} Gamma(alpha/q)`: larger by the factor q.
    pub printed_formula: f64,
    /// `printed_formula / closed_form`.
    pub ratio: f64,
    /// The two printed forms disagree (`q != 1`).
    pub flagged: bool,
    pub divergent: bool,
}

pub fn hdt_bound_exp(h: &HolderSpec, spec: &PowerTailSpec, n: u64) -> Result<ExpBound> {
    let d = hdt_bound(h, &TailCurve::PowerTail(*spec), n)?;
    let a = h.alpha / spec.q;
    let scale = h.seminorm * (n as f64).powf(-0.5 * h.alpha) * spec.k.powf(-a) * libm::tgamma(a);
    let closed_form = a * scale;
    let printed_formula = h.alpha * scale;
    let ratio = spec.q;
    Ok(ExpBound {
        direct: d.value,
        closed_form,
        printed_formula,
        ratio,
        flagged: ratio != 1.0,
        divergent: d.divergent,
    })
}

/// `C_P(alpha) = alpha int_0^inf z^{alpha-1} min(1, 2 exp(-nu_P*(z))) dz`.
pub fn poisson_constant(alpha: f64) -> Result<f64> {
    Ok(TailCurve::PoissonExact.alpha_moment(alpha)?.total())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoissonBound {
    pub stieltjes: StieltjesBound,
    pub c_p: Option<f64>,
    /// `C_P H n^{-alpha/2}`.
    pub closed_form: Option<f64>,
}

/// Stieltjes bound with the exact Poisson curve; `profile` should use the
/// weight `sqrt x`.
pub fn poisson_bound(
    profile: &ModulusProfile,
    n: u64,
    z_grid: &GridSpec,
    f_sup: Option<f64>,
    holder: Option<&HolderSpec>,
) -> Result<PoissonBound> {
    let stieltjes = stieltjes_bound(profile, &TailCurve::PoissonExact, n, z_grid, f_sup)?;
    let (c_p, closed_form) = match holder {
        Some(h) => {
            let c = poisson_constant(h.alpha)?;
            (Some(c), Some(c * h.seminorm * (n as f64).powf(-0.5 * h.alpha)))
        }
        None => (None, None),
    };
    Ok(PoissonBound { stieltjes, c_p, closed_form })
}

/// `G(alpha) = 2^{alpha/2} pi^{-1/2} Gamma((alpha+1)/2) = E|tau|^alpha`, tau standard normal.
pub fn lower_bound_constant(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(2f64.powf(0.5 * alpha) / std::f64::consts::PI.sqrt() * libm::tgamma(0.5 * (alpha + 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerRatioRow {
    pub n: u64,
    pub delta: f64,
    /// `Delta_n n^{alpha/2} / H`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerRatioTable {
    pub alpha: f64,
    pub g_alpha: f64,
    /// `G(alpha) sigma_bar^alpha`.
    pub g_alpha_sigma: f64,
    pub sigma_bar: f64,
    pub rows: Vec<LowerRatioRow>,
}

/// Normalized sup-errors of a trial function; both reference constants are
/// reported and no verdict is drawn.
pub fn lower_bound_ratio(
    g: &TargetFunction,
    fam: &Family,
    h: &HolderSpec,
    n_set: &[u64],
    x_grid: &GridSpec,
    sigma_bar: f64,
) -> Result<LowerRatioTable> {
    let g_alpha = lower_bound_constant(h.alpha)?;
    let mut rows = Vec::with_capacity(n_set.len());
    for &n in n_set {
        let delta = sup_error(g, fam, n, x_grid, EvalMode::default())?.delta;
        rows.push(LowerRatioRow { n, delta, ratio: normalized_ratio(delta, n, h)? });
    }
    Ok(LowerRatioTable { alpha: h.alpha, g_alpha, g_alpha_sigma: g_alpha * sigma_bar.powf(h.alpha), sigma_bar, rows })
}

pub(crate) fn normalized_ratio(delta: f64, n: u64, h: &HolderSpec) -> Result<f64> {
    // H = 0 means f is constant: any nonzero sup-error is rounding
    if delta == 0.0 || h.seminorm == 0.0 {
        return Ok(0.0);
    }
    Ok(delta * (n as f64).powf(0.5 * h.alpha) / h.seminorm)
}

/// Bound summary for one n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u64,
    pub upper_stieltjes: f64,
    pub upper_closed_form: Option<f64>,
    pub lower_constant: Option<f64>,
    pub empirical_delta: Option<f64>,
    pub error_radius: Option<f64>,
    pub enclosure: (f64, f64),
    pub metadata: BTreeMap<String, String>,
}

impl BoundReport {
    pub fn from_stieltjes(b: &StieltjesBound) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("z_max".into(), format!("{:e}", b.z_max));
        metadata.insert("tail_mass".into(), format!("{:e}", b.tail_mass));
        Self {
            n: b.n,
            upper_stieltjes: b.estimate,
            upper_closed_form: None,
            lower_constant: None,
            empirical_delta: None,
            error_radius: None,
            enclosure: (b.lower, b.upper),
            metadata,
        }
    }

    /// Violated invariants, as messages.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let (lo, hi) = self.enclosure;
        if !(lo <= self.upper_stieltjes && self.upper_stieltjes <= hi) {
            v.push(format!("n = {}: estimate {} outside [{lo}, {hi}]", self.n, self.upper_stieltjes));
        }
        if let Some(d) = self.empirical_delta {
            let r = self.error_radius.unwrap_or(0.0);
            if d > hi + r {
                v.push(format!("n = {}: empirical {d} exceeds upper bracket {hi} + radius {r}", self.n));
            }
        }
        v
    }
}
