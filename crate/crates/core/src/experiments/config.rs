//! Experiment configuration: a sectioned TOML file (JSON also accepted),
//! strict about unknown keys, with every field defaulted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{DEFAULT_Z_HI, DEFAULT_Z_POINTS};
use crate::error::{Error, Result};
use crate::family::{Family, FamilyKind, MAX_N};
use crate::function::{builtin_catalog, TargetFunction};
use crate::modulus::{WeightSpec, DEFAULT_H_GRID_SIZE};
use crate::numeric::GridSpec;
use crate::operators::{EvalMode, DEFAULT_TAIL_TOL, MAX_TAIL_TOL, MIN_MC_TRIALS};
use crate::tail::{
    PowerTailSpec, DEFAULT_LAMBDA_CAP, DEFAULT_LAMBDA_STEP, DEFAULT_N_MAX, DEFAULT_PHI_X_POINTS, MIN_ATF_TRIALS,
};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub function: FunctionConfig,
    pub family: FamilyConfig,
    pub weight: WeightConfig,
    pub grids: GridsConfig,
    pub modulus: ModulusConfig,
    pub tail: TailConfig,
    pub seeds: SeedConfig,
    pub tolerances: ToleranceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            function: FunctionConfig::default(),
            family: FamilyConfig::default(),
            weight: WeightConfig::default(),
            grids: GridsConfig::default(),
            modulus: ModulusConfig::default(),
            tail: TailConfig::default(),
            seeds: SeedConfig::default(),
            tolerances: ToleranceConfig::default(),
        }
    }
}

/// A catalog function and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionConfig {
    pub name: String,
    // a section naming another function starts from no parameters
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for FunctionConfig {
    fn default() -> Self {
        Self {
            name: "power-cusp".into(),
            params: [("center".to_string(), 0.5), ("alpha".to_string(), 0.5)].into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { kind: FamilyKind::Bernoulli, x_min: 0.05, x_max: 0.95 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    FamilySigma,
    Unit,
    Jacobi,
}

/// Modulus weight; `c`, `alpha_exp`, `beta_exp` apply to `jacobi` only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub kind: WeightKind,
    pub c: f64,
    pub alpha_exp: f64,
    pub beta_exp: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { kind: WeightKind::FamilySigma, c: 1.0, alpha_exp: 0.5, beta_exp: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsConfig {
    pub n: Vec<u64>,
    /// Points of the sup-error grid.
    pub x: GridSpec,
}

impl Default for GridsConfig {
    fn default() -> Self {
        Self { n: vec![16, 64, 256, 1024, 4096], x: GridSpec::uniform(0.05, 0.95, 257) }
    }
}

/// The delta grid is `{0}` plus `delta_points` log-spaced values on
/// `[delta_lo, delta_hi]`; the x-grid defaults to `grids.x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulusConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<GridSpec>,
    pub h_points: usize,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub delta_points: usize,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        Self { x: None, h_points: DEFAULT_H_GRID_SIZE, delta_lo: 1e-5, delta_hi: 16.0, delta_points: 256 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSource {
    ExactConjugate,
    PowerTail,
    Empirical,
}

/// Tail-curve source and its knobs. `p` and `k` are required for
/// `power-tail`; `atf_*` and `trials` drive `empirical`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailConfig {
    pub source: TailSource,
    pub lambda_cap: f64,
    pub lambda_step: f64,
    pub n_max: u64,
    pub phi_x_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atf_x: Option<f64>,
    pub atf_n: Vec<u64>,
    pub trials: u64,
    pub u_hi: f64,
    pub u_points: usize,
    pub z_hi: f64,
    pub z_points: usize,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            source: TailSource::ExactConjugate,
            lambda_cap: DEFAULT_LAMBDA_CAP,
            lambda_step: DEFAULT_LAMBDA_STEP,
            n_max: DEFAULT_N_MAX,
            phi_x_points: DEFAULT_PHI_X_POINTS,
            p: None,
            k: None,
            atf_x: None,
            atf_n: vec![1, 2, 4, 8, 16, 32, 64],
            trials: 100_000,
            u_hi: 8.0,
            u_points: 161,
            z_hi: DEFAULT_Z_HI,
            z_points: DEFAULT_Z_POINTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub root: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { root: DEFAULT_SEED }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalKind {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub eval: EvalKind,
    /// Discarded Poisson mass in exact Szász sums.
    pub tail_tol: f64,
    pub mc_trials: u64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { eval: EvalKind::Exact, tail_tol: DEFAULT_TAIL_TOL, mc_trials: 100_000 }
    }
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn from_str_any(text: &str) -> Result<Self> {
        Self::from_value(parse_value(text)?)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(cfg_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_str_any(&read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn family(&self) -> Result<Family> {
        let f = &self.family;
        match f.kind {
            FamilyKind::Bernoulli => Family::bernoulli_on(f.x_min, f.x_max),
            FamilyKind::Poisson => Family::poisson(f.x_min, f.x_max),
        }
    }

    pub fn target(&self) -> Result<TargetFunction> {
        builtin_catalog(&self.function.name, &self.function.params, self.family()?.interval)
    }

    pub fn weight(&self) -> Result<WeightSpec> {
        let w = &self.weight;
        Ok(match w.kind {
            WeightKind::FamilySigma => WeightSpec::FamilySigma { family: self.family()? },
            WeightKind::Unit => WeightSpec::Unit,
            WeightKind::Jacobi => WeightSpec::jacobi(w.c, w.alpha_exp, w.beta_exp)?,
        })
    }

    pub fn modulus_grid(&self) -> GridSpec {
        self.modulus.x.unwrap_or(self.grids.x)
    }

    pub fn eval_mode(&self) -> EvalMode {
        match self.tolerances.eval {
            EvalKind::Exact => EvalMode::Exact { tail_tol: self.tolerances.tail_tol },
            EvalKind::MonteCarlo => EvalMode::MonteCarlo { trials: self.tolerances.mc_trials, seed: self.seeds.root },
        }
    }

    pub fn power_tail(&self) -> Result<PowerTailSpec> {
        match (self.tail.p, self.tail.k) {
            (Some(p), Some(k)) => PowerTailSpec::new(p, k),
            _ => Err(Error::Config("tail.source = \"power-tail\" requires both tail.p and tail.k".into())),
        }
    }

    pub fn z_grid(&self) -> GridSpec {
        GridSpec::uniform(0.0, self.tail.z_hi, self.tail.z_points)
    }

    pub fn u_grid(&self) -> GridSpec {
        GridSpec::uniform(0.0, self.tail.u_hi, self.tail.u_points)
    }

    /// Checks every section; all failures are config errors.
    pub fn validate(&self) -> Result<()> {
        let as_cfg = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let fam = self.family().map_err(as_cfg)?;
        self.target().map_err(as_cfg)?;
        self.weight().map_err(as_cfg)?;
        let n = &self.grids.n;
        if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[1] <= w[0]) || *n.last().unwrap() > MAX_N {
            return Err(cfg_err(format!("grids.n must be nonempty and strictly increasing within [1, {MAX_N}]")));
        }
        for (name, g) in [("grids.x", self.grids.x), ("modulus.x", self.modulus_grid())] {
            let pts = g.points().map_err(as_cfg)?;
            if name == "grids.x" && pts.iter().any(|&x| !fam.in_domain(x)) {
                return Err(cfg_err(format!(
                    "grids.x must lie in the family x-domain [{}, {}]",
                    fam.x_min, fam.x_max
                )));
            }
        }
        let m = &self.modulus;
        if !(m.delta_lo > 0.0 && m.delta_hi > m.delta_lo && m.delta_points >= 2) {
            return Err(cfg_err("modulus needs 0 < delta_lo < delta_hi and delta_points >= 2"));
        }
        if m.h_points < 3 || m.h_points % 2 == 0 {
            return Err(cfg_err(format!("modulus.h_points must be odd and at least 3, got {}", m.h_points)));
        }
        let t = &self.tail;
        if !(t.lambda_step > 0.0 && t.lambda_cap > t.lambda_step) || t.n_max < 1024 || t.phi_x_points < 2 {
            return Err(cfg_err("tail needs lambda_cap > lambda_step > 0, n_max >= 1024, phi_x_points >= 2"));
        }
        if !(t.z_hi > 0.0 && t.z_points >= 2 && t.u_hi > 0.0 && t.u_points >= 2) {
            return Err(cfg_err("tail z/u grids need positive extents and at least 2 points"));
        }
        match t.source {
            TailSource::PowerTail => {
                self.power_tail().map_err(as_cfg)?;
            }
            TailSource::Empirical => {
                if t.trials < MIN_ATF_TRIALS || t.atf_n.is_empty() {
                    return Err(cfg_err(format!("empirical tails need trials >= {MIN_ATF_TRIALS} and a nonempty atf_n")));
                }
                if let Some(x) = t.atf_x {
                    if !fam.in_domain(x) {
                        return Err(cfg_err(format!("tail.atf_x = {x} outside the family x-domain")));
                    }
                }
            }
            TailSource::ExactConjugate => {}
        }
        let tol = &self.tolerances;
        if !(tol.tail_tol > 0.0 && tol.tail_tol <= MAX_TAIL_TOL) {
            return Err(cfg_err(format!("tolerances.tail_tol must lie in (0, {MAX_TAIL_TOL:e}]")));
        }
        if tol.mc_trials < MIN_MC_TRIALS {
            return Err(cfg_err(format!("tolerances.mc_trials must be at least {MIN_MC_TRIALS}")));
        }
        Ok(())
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// TOML or JSON text as a JSON value.
pub fn parse_value(text: &str) -> Result<serde_json::Value> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(cfg_err)
    } else {
        let t: toml::Table = toml::from_str(text).map_err(cfg_err)?;
        serde_json::to_value(t).map_err(cfg_err)
    }
}

/// Applies `section.key=value` overrides; the value is read as a TOML
/// literal, falling back to a bare string.
pub fn apply_overrides(mut v: serde_json::Value, overrides: &[String]) -> Result<serde_json::Value> {
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| cfg_err(format!("override `{o}` is not key=value")))?;
        let key = key.trim();
        let parsed: serde_json::Value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
            Ok(mut t) => serde_json::to_value(t.remove("v").expect("key present")).map_err(cfg_err)?,
            Err(_) => serde_json::Value::String(raw.trim().to_string()),
        };
        let mut node = &mut v;
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(cfg_err(format!("bad override key `{key}`")));
        }
        for p in &parts[..parts.len() - 1] {
            let obj = node.as_object_mut().ok_or_else(|| cfg_err(format!("`{key}` does not name a section")))?;
            node = obj.entry(p.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
        }
        let obj = node.as_object_mut().ok_or_else(|| cfg_err(format!("`{key}` does not name a section")))?;
        obj.insert(parts[parts.len() - 1].to_string(), parsed);
    }
    Ok(v)
}
