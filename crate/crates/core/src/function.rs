//! Target functions `f: I -> R` with endpoint clamping, plus the built-in
//! catalog and the trial functions used for lower-bound studies.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval `I` with finite lower endpoint and finite or infinite upper endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
    pub closed_left: bool,
    pub closed_right: bool,
}

impl Interval {
    pub fn new(a: f64, b: f64, closed_left: bool, closed_right: bool) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::param(format!("interval lower endpoint must be finite, got {a}")));
        }
        if b.is_nan() || a >= b {
            return Err(Error::param(format!("interval requires a < b, got [{a}, {b}]")));
        }
        if b.is_infinite() && closed_right {
            return Err(Error::param("an infinite upper endpoint cannot be closed"));
        }
        Ok(Self { a, b, closed_left, closed_right })
    }

    pub fn closed(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, true, b.is_finite())
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0, closed_left: true, closed_right: true }
    }

    pub fn half_line(a: f64) -> Result<Self> {
        Self::new(a, f64::INFINITY, true, false)
    }

    pub fn is_bounded(&self) -> bool {
        self.b.is_finite()
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Clamps to `[a, b]`; no upper clamp when `b = +inf`.
    pub fn clamp(&self, x: f64) -> f64 {
        let lo = x.max(self.a);
        if self.b.is_finite() {
            lo.min(self.b)
        } else {
            lo
        }
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.a && x < self.b
    }
}

/// Hölder exponent and seminorm: `|f(x) - f(y)| <= seminorm * |x - y|^alpha`,
/// or with a weighted modulus, `omega(delta) <= seminorm * delta^alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub alpha: f64,
    pub seminorm: f64,
}

impl HolderSpec {
    pub fn new(alpha: f64, seminorm: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param(format!("Hölder exponent must lie in (0, 1], got {alpha}")));
        }
        if !(seminorm >= 0.0 && seminorm.is_finite()) {
            return Err(Error::param(format!("Hölder seminorm must be finite and nonnegative, got {seminorm}")));
        }
        Ok(Self { alpha, seminorm })
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An immutable real function on an interval with optional analytic metadata.
#[derive(Clone)]
pub struct TargetFunction {
    name: String,
    interval: Interval,
    evaluator: Evaluator,
    sup_abs: Option<f64>,
    holder: Option<HolderSpec>,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("interval", &self.interval)
            .field("sup_abs", &self.sup_abs)
            .field("holder", &self.holder)
            .finish()
    }
}

impl TargetFunction {
    pub fn new<F>(name: impl Into<String>, interval: Interval, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), interval, evaluator: Arc::new(f), sup_abs: None, holder: None }
    }

    pub fn with_sup_abs(mut self, s: f64) -> Self {
        self.sup_abs = Some(s);
        self
    }

    pub fn with_holder(mut self, h: HolderSpec) -> Self {
        self.holder = Some(h);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn sup_abs(&self) -> Option<f64> {
        self.sup_abs
    }

    pub fn holder(&self) -> Option<HolderSpec> {
        self.holder
    }

    /// Evaluates without clamping.
    pub fn eval_raw(&self, x: f64) -> f64 {
        (self.evaluator)(x)
    }

    /// Evaluates `f` at `x` clamped into the interval: values beyond a finite
    /// endpoint are those of the endpoint.
    pub fn eval_clamped(&self, x: f64) -> Result<f64> {
        let xc = self.interval.clamp(x);
        let v = (self.evaluator)(xc);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DomainEvaluation { x: xc, value: v })
        }
    }

    /// `c * f`, with metadata scaled accordingly.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.evaluator.clone();
        Self {
            name: format!("{}*{}", c, self.name),
            interval: self.interval,
            evaluator: Arc::new(move |x| c * inner(x)),
            sup_abs: self.sup_abs.map(|s| c.abs() * s),
            holder: self.holder.map(|h| HolderSpec { alpha: h.alpha, seminorm: c.abs() * h.seminorm }),
        }
    }

    /// `alpha * f + beta * g` on the interval of `f`.
    pub fn linear_combination(alpha: f64, f: &Self, beta: f64, g: &Self) -> Self {
        let (fe, ge) = (f.evaluator.clone(), g.evaluator.clone());
        let sup_abs = match (f.sup_abs, g.sup_abs) {
            (Some(a), Some(b)) => Some(alpha.abs() * a + beta.abs() * b),
            _ => None,
        };
        Self {
            name: format!("{}*{}+{}*{}", alpha, f.name, beta, g.name),
            interval: f.interval,
            evaluator: Arc::new(move |x| alpha * fe(x) + beta * ge(x)),
            sup_abs,
            holder: None,
        }
    }
}

/// Trial function `g(x) = |x - x0|^alpha` on `interval`, zero exactly at `x0`
/// and satisfying `g(x0 + d) = d^alpha` (lower Hölder constant 1).
pub fn trial_function(interval: Interval, x0: f64, alpha: f64) -> Result<TargetFunction> {
    if !interval.contains_interior(x0) {
        return Err(Error::param(format!(
            "trial centre x0 = {x0} must lie strictly inside ({}, {})",
            interval.a, interval.b
        )));
    }
    power_cusp(interval, x0, alpha).map(|f| TargetFunction { name: format!("trial(x0={x0},alpha={alpha})"), ..f })
}

fn power_cusp(interval: Interval, center: f64, alpha: f64) -> Result<TargetFunction> {
    if !center.is_finite() {
        return Err(Error::param("power-cusp centre must be finite"));
    }
    let holder = HolderSpec::new(alpha, 1.0)?;
    let mut f = TargetFunction::new(format!("power-cusp(center={center},alpha={alpha})"), interval, move |x: f64| {
        (x - center).abs().powf(alpha)
    })
    .with_holder(holder);
    if interval.is_bounded() {
        let reach = (interval.a - center).abs().max((interval.b - center).abs());
        f = f.with_sup_abs(reach.powf(alpha));
    }
    Ok(f)
}

/// Names accepted by [`builtin_catalog`].
pub const CATALOG: [&str; 6] = ["power-cusp", "constant", "identity", "square", "exp-decay", "sine"];

/// Parameter names (with defaults, `None` = required) for each catalog entry.
pub fn catalog_params(name: &str) -> Option<&'static [(&'static str, Option<f64>)]> {
    Some(match name {
        "power-cusp" => &[("center", None), ("alpha", None)],
        "constant" => &[("c", None)],
        "identity" | "square" => &[],
        "exp-decay" => &[("rate", Some(1.0))],
        "sine" => &[("freq", Some(1.0))],
        _ => return None,
    })
}

/// Builds a catalog function on `interval`. Parameters are validated eagerly
/// and unknown parameter names are rejected.
pub fn builtin_catalog(name: &str, params: &BTreeMap<String, f64>, interval: Interval) -> Result<TargetFunction> {
    let schema = catalog_params(name).ok_or_else(|| Error::Catalog {
        name: name.to_string(),
        valid: CATALOG.join(", "),
    })?;
    for key in params.keys() {
        if !schema.iter().any(|(k, _)| k == key) {
            let allowed: Vec<&str> = schema.iter().map(|(k, _)| *k).collect();
            return Err(Error::param(format!(
                "unknown parameter `{key}` for `{name}` (allowed: [{}])",
                allowed.join(", ")
            )));
        }
    }
    let get = |key: &str| -> Result<f64> {
        let default = schema.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d);
        match params.get(key).copied().or(default) {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(Error::param(format!("parameter `{key}` of `{name}` must be finite, got {v}"))),
            None => Err(Error::param(format!("`{name}` requires parameter `{key}`"))),
        }
    };
    let (a, b) = (interval.a, interval.b);
    let bounded = interval.is_bounded();
    let reach = a.abs().max(b.abs());
    let f = match name {
        "power-cusp" => power_cusp(interval, get("center")?, get("alpha")?)?,
        "constant" => {
            let c = get("c")?;
            TargetFunction::new(format!("constant(c={c})"), interval, move |_| c)
                .with_sup_abs(c.abs())
                .with_holder(HolderSpec { alpha: 1.0, seminorm: 0.0 })
        }
        "identity" => {
            let f = TargetFunction::new("identity", interval, |x| x).with_holder(HolderSpec { alpha: 1.0, seminorm: 1.0 });
            if bounded {
                f.with_sup_abs(reach)
            } else {
                f
            }
        }
        "square" => {
            let f = TargetFunction::new("square", interval, |x| x * x);
            if bounded {
                f.with_sup_abs(reach * reach)
                    .with_holder(HolderSpec { alpha: 1.0, seminorm: 2.0 * reach })
            } else {
                f
            }
        }
        "exp-decay" => {
            let rate = get("rate")?;
            if rate <= 0.0 {
                return Err(Error::param(format!("exp-decay rate must be positive, got {rate}")));
            }
            let top = (-rate * a).exp();
            TargetFunction::new(format!("exp-decay(rate={rate})"), interval, move |x: f64| (-rate * x).exp())
                .with_sup_abs(top)
                .with_holder(HolderSpec { alpha: 1.0, seminorm: rate * top })
        }
        "sine" => {
            let freq = get("freq")?;
            TargetFunction::new(format!("sine(freq={freq})"), interval, move |x: f64| (freq * x).sin())
                .with_sup_abs(1.0)
                .with_holder(HolderSpec { alpha: 1.0, seminorm: freq.abs() })
        }
        _ => unreachable!("schema lookup covers every catalog name"),
    };
    Ok(f)
}
