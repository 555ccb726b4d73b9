//! Config-driven convergence studies: empirical `Delta_n` across an n-grid
//! next to the Stieltjes enclosure, a Hölder closed form and lower-bound
//! ratios, followed by a log-log rate fit.

pub mod config;
pub mod report;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, TailSource};
pub use report::{write_report, write_run, Format, Report};

use crate::bounds::{hdt_bound, lower_bound_constant, normalized_ratio, stieltjes_bound};
use crate::error::{Error, Result};
use crate::family::{Family, FamilyKind};
use crate::function::HolderSpec;
use crate::modulus::{delta_grid, holder_seminorm, modulus_profile, ModulusProfile};
use crate::numeric::GridSpec;
use crate::operators::sup_error;
use crate::tail::{empirical_atf, ConjugatePair, TailCurve};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub empirical_delta: f64,
    pub error_radius: f64,
    pub argmax_x: f64,
    pub lower_bracket: f64,
    pub upper_bracket: f64,
    pub estimate: f64,
    /// `alpha H n^{-alpha/2} int z^{alpha-1} Q`, with H read off the profile.
    pub closed_form: Option<f64>,
    /// `Delta_n n^{alpha/2} / H` for the power-cusp trial function.
    pub lower_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub rows_used: usize,
}

/// Reference constants for the trial-function ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerReference {
    pub alpha: f64,
    pub g_alpha: f64,
    pub g_alpha_sigma: f64,
    pub sigma_bar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub function: String,
    pub family: FamilyKind,
    pub x_domain: (f64, f64),
    pub tail: String,
    /// `(alpha, H)` estimated from the modulus profile.
    pub holder_estimate: Option<HolderSpec>,
    pub lower_reference: Option<LowerReference>,
    pub rows: Vec<ConvergenceRow>,
    pub fit: Option<RateFit>,
    pub warnings: Vec<String>,
}

/// A table plus per-row wall times, which stay out of the deterministic
/// report files.
#[derive(Clone, Debug)]
pub struct ConvergenceRun {
    pub table: ConvergenceTable,
    pub wall_times: Vec<(u64, f64)>,
}

pub fn build_profile(cfg: &ExperimentConfig) -> Result<ModulusProfile> {
    let m = &cfg.modulus;
    let f = cfg.target()?;
    let deltas = delta_grid(m.delta_lo, m.delta_hi, m.delta_points)?;
    modulus_profile(&f, &cfg.weight()?, &deltas, &cfg.modulus_grid(), m.h_points)
}

/// The configured tail curve. For the Poisson family with `x_min >= 1`
/// the exact curve applies, since `phi` is largest at `x = 1`.
pub fn build_tail(cfg: &ExperimentConfig) -> Result<TailCurve> {
    let fam = cfg.family()?;
    let t = &cfg.tail;
    Ok(match t.source {
        TailSource::PowerTail => TailCurve::PowerTail(cfg.power_tail()?),
        TailSource::ExactConjugate if fam.kind == FamilyKind::Poisson && fam.x_min >= 1.0 => TailCurve::PoissonExact,
        TailSource::ExactConjugate => {
            let xs = GridSpec::uniform(fam.x_min, fam.x_max, t.phi_x_points).points()?;
            TailCurve::Conjugate(Arc::new(ConjugatePair::from_family(&fam, &xs, t.n_max, t.lambda_cap, t.lambda_step)?))
        }
        TailSource::Empirical => {
            let x = t.atf_x.unwrap_or(0.5 * (fam.x_min + fam.x_max));
            empirical_atf(&fam, x, &cfg.u_grid().points()?, &t.atf_n, t.trials, cfg.seeds.root)?
        }
    })
}

fn sigma_bar(fam: &Family, grid: &GridSpec) -> Result<f64> {
    Ok(grid.points()?.iter().map(|&x| fam.sigma_formula(x)).fold(0.0, f64::max))
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceRun> {
    cfg.validate()?;
    let fam = cfg.family()?;
    let f = cfg.target()?;
    let profile = build_profile(cfg)?;
    let q = build_tail(cfg)?;
    let mode = cfg.eval_mode();
    let z_grid = cfg.z_grid();
    let mut warnings = profile.warnings.clone();
    if let TailCurve::Conjugate(p) = &q {
        warnings.extend(p.warnings.iter().cloned());
    }
    if let TailCurve::Tabulated(t) = &q {
        if t.estimated {
            warnings.push("tail curve is a Monte Carlo estimate: brackets are not certified".into());
        }
    }
    warnings.push(format!(
        "sup over x restricted to the {} x-domain [{}, {}]",
        fam.kind.as_str(),
        fam.x_min,
        fam.x_max
    ));

    let holder_estimate = match f.holder() {
        Some(h) => Some(holder_seminorm(&profile, h.alpha)?),
        None => None,
    };
    let closed = |n: u64| -> Result<Option<f64>> {
        match &holder_estimate {
            Some(h) => {
                let b = hdt_bound(h, &q, n)?;
                Ok((!b.divergent).then_some(b.value))
            }
            None => Ok(None),
        }
    };
    let trial = (cfg.function.name == "power-cusp").then(|| f.holder()).flatten();
    let lower_reference = match &trial {
        Some(h) => {
            let g = lower_bound_constant(h.alpha)?;
            let s = sigma_bar(&fam, &cfg.grids.x)?;
            Some(LowerReference { alpha: h.alpha, g_alpha: g, g_alpha_sigma: g * s.powf(h.alpha), sigma_bar: s })
        }
        None => None,
    };

    let results: Vec<(ConvergenceRow, f64, Vec<String>)> = cfg
        .grids
        .n
        .par_iter()
        .map(|&n| -> Result<_> {
            let t0 = Instant::now();
            let e = sup_error(&f, &fam, n, &cfg.grids.x, mode)?;
            let b = stieltjes_bound(&profile, &q, n, &z_grid, f.sup_abs())?;
            let lower_ratio = match &trial {
                Some(h) => Some(normalized_ratio(e.delta, n, h)?),
                None => None,
            };
            let row = ConvergenceRow {
                n,
                empirical_delta: e.delta,
                error_radius: e.error_radius,
                argmax_x: e.argmax_x,
                lower_bracket: b.lower,
                upper_bracket: b.upper,
                estimate: b.estimate,
                closed_form: closed(n)?,
                lower_ratio,
            };
            Ok((row, t0.elapsed().as_secs_f64(), b.warnings))
        })
        .zip(&cfg.grids.n)
        .map(|(r, &n)| r.map_err(|e| Error::AtN { n, source: Box::new(e) }))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut wall_times = Vec::with_capacity(results.len());
    for (row, secs, w) in results {
        for msg in w {
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        wall_times.push((row.n, secs));
        rows.push(row);
    }
    let mut table = ConvergenceTable {
        function: f.name().to_string(),
        family: fam.kind,
        x_domain: (fam.x_min, fam.x_max),
        tail: q.describe(),
        holder_estimate,
        lower_reference,
        rows,
        fit: None,
        warnings,
    };
    table.fit = rate_fit(&table).ok();
    Ok(ConvergenceRun { table, wall_times })
}

/// OLS fit of `ln Delta_n` on `ln n` over rows with positive `Delta_n`.
pub fn rate_fit(table: &ConvergenceTable) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.empirical_delta > 0.0)
        .map(|r| ((r.n as f64).ln(), r.empirical_delta.ln()))
        .collect();
    let m = pts.len();
    if m < 4 {
        return Err(Error::InsufficientData(format!("rate fit needs at least 4 rows with positive delta, got {m}")));
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = (ssr / (mf - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, intercept, slope_stderr, rows_used: m })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: u64,
    pub empirical_delta: f64,
    pub upper_bracket: f64,
    pub error_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl Validity {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Rows with `Delta_n > upper bracket + error radius`.
pub fn validity_check(table: &ConvergenceTable) -> Validity {
    let violations = table
        .rows
        .iter()
        .filter(|r| r.empirical_delta > r.upper_bracket + r.error_radius)
        .map(|r| Violation {
            n: r.n,
            empirical_delta: r.empirical_delta,
            upper_bracket: r.upper_bracket,
            error_radius: r.error_radius,
        })
        .collect();
    let warnings = if table.rows.is_empty() { vec!["empty table: vacuous pass".to_string()] } else { Vec::new() };
    Validity { violations, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn quick(text: &str) -> ExperimentConfig {
        let mut base = "[modulus]\ndelta_points = 64\nh_points = 17\n".to_string();
        if !text.contains("[grids.x]") {
            base += "[grids.x]\nkind = \"uniform\"\nlo = 0.05\nhi = 0.95\nsize = 65\n";
        }
        ExperimentConfig::from_str_any(&format!("{base}{text}")).unwrap()
    }

    fn row(n: u64, d: f64) -> ConvergenceRow {
        ConvergenceRow {
            n,
            empirical_delta: d,
            error_radius: 0.0,
            argmax_x: 0.5,
            lower_bracket: 0.0,
            upper_bracket: 1.0,
            estimate: 0.5,
            closed_form: None,
            lower_ratio: None,
        }
    }

    fn table(rows: Vec<ConvergenceRow>) -> ConvergenceTable {
        ConvergenceTable {
            function: "synthetic".into(),
            family: FamilyKind::Bernoulli,
            x_domain: (0.05, 0.95),
            tail: "none".into(),
            holder_estimate: None,
            lower_reference: None,
            rows,
            fit: None,
            warnings: vec![],
        }
    }

    #[test]
    fn constant_function_run() {
        let cfg = quick("[function]\nname = \"constant\"\nparams = { c = 3.0 }\n[grids]\nn = [4, 16, 64]\n");
        let run = run_convergence(&cfg).unwrap();
        for r in &run.table.rows {
            assert!(r.empirical_delta < 1e-14);
            assert!(r.lower_bracket >= 0.0 && r.upper_bracket >= 0.0);
        }
        assert!(validity_check(&run.table).passed());
    }

    #[test]
    fn square_function_run() {
        let cfg = quick("[function]\nname = \"square\"\n[grids]\nn = [10, 40]\n");
        let t = run_convergence(&cfg).unwrap().table;
        assert!((t.rows[0].empirical_delta - 0.025).abs() < 1e-15);
        assert!((t.rows[1].empirical_delta - 0.00625).abs() < 1e-15);
        assert!(t.rows.iter().all(|r| r.argmax_x == 0.5));
        assert!(validity_check(&t).passed());
        assert!(t.fit.is_none());
    }

    #[test]
    fn trial_function_decreases_and_stays_bounded() {
        let cfg = quick("[grids]\nn = [16, 64, 256, 1024]\n");
        let t = run_convergence(&cfg).unwrap().table;
        assert!(t.rows.windows(2).all(|w| w[1].empirical_delta < w[0].empirical_delta));
        assert!(validity_check(&t).passed(), "{:?}", t.rows);
        assert!(t.rows.iter().all(|r| r.lower_bracket <= r.estimate && r.estimate <= r.upper_bracket));
        assert!(t.lower_reference.is_some() && t.rows.iter().all(|r| r.lower_ratio.is_some()));
        let fit = t.fit.unwrap();
        assert!((fit.slope + 0.25).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn failing_row_carries_n() {
        let cfg = quick("[function]\nname = \"identity\"\n[family]\nkind = \"poisson\"\nx_min = 1.0\nx_max = 4.0\n[grids]\nn = [2, 8]\n[grids.x]\nkind = \"uniform\"\nlo = 1.0\nhi = 4.0\nsize = 65\n");
        // identity on the half-line has no sup: the truncated Szász sum cannot be certified
        let e = run_convergence(&cfg).unwrap_err();
        assert!(matches!(e, Error::AtN { .. }), "{e}");
        assert_eq!(e.kind(), "missing-metadata");
    }

    #[test]
    fn rate_fit_examples() {
        let t = table([16u64, 64, 256, 1024].iter().map(|&n| row(n, (n as f64).powf(-0.5))).collect());
        let f = rate_fit(&t).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && f.slope_stderr < 1e-12);
        let t = table([10u64, 20, 40, 80, 160].iter().map(|&n| row(n, 0.25 / n as f64)).collect());
        assert!((rate_fit(&t).unwrap().slope + 1.0).abs() < 1e-10);
        let t = table(vec![row(1, 0.1), row(2, 0.0), row(4, 0.05), row(8, 0.02)]);
        assert!(matches!(rate_fit(&t), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn validity_examples() {
        let mut bad = row(16, 2.0);
        bad.upper_bracket = 1.0;
        let v = validity_check(&table(vec![row(4, 0.5), bad]));
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].n, 16);
        let v = validity_check(&table(vec![]));
        assert!(v.passed() && !v.warnings.is_empty());
    }

    #[test]
    fn runs_are_deterministic_with_monte_carlo() {
        let cfg = quick("[grids]\nn = [16, 64]\n[tolerances]\neval = \"monte-carlo\"\nmc_trials = 2000\n");
        let a = run_convergence(&cfg).unwrap().table;
        let b = run_convergence(&cfg).unwrap().table;
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.error_radius > 0.0));
    }
}
