use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use genbern::bounds::BoundReport;
use genbern::experiments::config::{apply_overrides, parse_value};
use genbern::experiments::report::{
    csv_text, fmt_float, profile_csv, tail_csv, write_file, write_run, Format,
};
use genbern::experiments::{build_profile, build_tail, run_convergence, validity_check, ConvergenceTable, ExperimentConfig};
use genbern::modulus::holder_seminorm;
use genbern::operators::{evaluate_on_grid, sup_error};
use genbern::tail::TailCurve;
use genbern::Error;
use serde_json::json;

pub const CONFIG_BEGIN: &str = "--- default config (TOML) ---";
pub const CONFIG_END: &str = "--- end default config ---";

#[derive(Parser, Debug)]
#[command(name = "genbern", version, about = "Bernstein-type operators: sup-errors, moduli, tails and error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (TOML, or JSON when it starts with `{`)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set grids.n=[16,64]`; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory
    #[arg(long, global = true, env = "GENBERN_OUT", default_value = "results")]
    out: PathBuf,

    /// Root seed; overrides seeds.root
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write only this format (default: both)
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,

    /// Print warnings
    #[arg(short, long, global = true)]
    verbose: bool,

    /// Print nothing on success
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Operator values A_n[f](x) on the x-grid for every n
    Evaluate,
    /// Weighted modulus profile and Hölder estimate
    Modulus,
    /// Tabulated tail curve Q(u)
    Tail,
    /// Upper brackets, closed forms and empirical sup-errors per n
    Bound,
    /// Full convergence study; exits 1 if any bound is violated
    Run,
}

const SUBCOMMANDS: &str = "evaluate, modulus, tail, bound, run";

fn defaults_text() -> String {
    let c = ExperimentConfig::default();
    let t = &c.tail;
    let tol = &c.tolerances;
    let m = &c.modulus;
    let lines = [
        format!("  tolerances.eval          {:?}", tol.eval),
        format!("  tolerances.tail_tol      {:e}", tol.tail_tol),
        format!("  tolerances.mc_trials     {}", tol.mc_trials),
        format!("  grids.n                  {:?}", c.grids.n),
        format!("  grids.x                  {:?} [{}, {}], {} points", c.grids.x.kind, c.grids.x.lo, c.grids.x.hi, c.grids.x.size),
        format!("  modulus.h_points         {}", m.h_points),
        format!("  modulus.delta            [{:e}, {}], {} points", m.delta_lo, m.delta_hi, m.delta_points),
        format!("  tail.lambda_cap          {}", t.lambda_cap),
        format!("  tail.lambda_step         {}", t.lambda_step),
        format!("  tail.n_max               {}", t.n_max),
        format!("  tail.phi_x_points        {}", t.phi_x_points),
        format!("  tail.trials              {}", t.trials),
        format!("  tail.u                   [0, {}], {} points", t.u_hi, t.u_points),
        format!("  tail.z                   [0, {}], {} points", t.z_hi, t.z_points),
        format!("  seeds.root               {}", c.seeds.root),
    ];
    format!(
        "Defaults:\n{}\n\n\
         Catalog functions: power-cusp(center, alpha), constant(c), identity, square,\n\
         exp-decay(rate = 1), sine(freq = 1). Families: bernoulli, poisson.\n\
         Weights: family-sigma, unit, jacobi(c, alpha_exp, beta_exp).\n\
         Tail sources: exact-conjugate, power-tail (needs p, k), empirical.\n\
         Unknown keys are rejected.\n\n\
         Exit codes: 0 ok, 1 bound violated, 2 usage or config error, 3 runtime error.\n\
         Output directory defaults to $GENBERN_OUT, then `results`.\n\n\
         {CONFIG_BEGIN}\n{}{CONFIG_END}\n",
        lines.join("\n"),
        c.to_toml()
    )
}

fn command() -> clap::Command {
    let extra = defaults_text();
    Cli::command().after_help(extra.clone()).after_long_help(extra)
}

fn one_line(s: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("genbern: error[{}]: {}", e.kind(), one_line(&e.to_string()));
    ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 3 })
}

fn load_config(cli: &Cli) -> genbern::Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.clone(), source })?;
            parse_value(&text)?
        }
        None => ExperimentConfig::default().to_json_value(),
    };
    let mut overrides = cli.set.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seeds.root={s}"));
    }
    ExperimentConfig::from_value(apply_overrides(base, &overrides)?)
}

struct Ctx {
    out: PathBuf,
    format: Option<Format>,
    verbose: bool,
    quiet: bool,
}

impl Ctx {
    fn wants(&self, f: Format) -> bool {
        self.format.is_none() || self.format == Some(f)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, text: &str) -> genbern::Result<()> {
        let p = self.out.join(name);
        write_file(&p, text)?;
        self.say(format!("wrote {}", p.display()));
        Ok(())
    }

    fn warn_all(&self, warnings: &[String]) {
        if self.verbose {
            for w in warnings {
                eprintln!("genbern: warning: {}", one_line(w));
            }
        }
    }
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn cmd_evaluate(cfg: &ExperimentConfig, ctx: &Ctx) -> genbern::Result<u8> {
    let fam = cfg.family()?;
    let f = cfg.target()?;
    let xs = cfg.grids.x.points()?;
    let mode = cfg.eval_mode();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.grids.n {
        let wrap = |e: Error| Error::AtN { n, source: Box::new(e) };
        let vals = evaluate_on_grid(&f, &fam, n, &xs, mode).map_err(wrap)?;
        for (x, v) in xs.iter().zip(&vals) {
            let fx = f.eval_clamped(*x)?;
            rows.push(vec![n.to_string(), fmt_float(*x), fmt_float(v.value), fmt_float(v.error_radius), fmt_float(fx)]);
        }
        let s = sup_error(&f, &fam, n, &cfg.grids.x, mode).map_err(wrap)?;
        summary.push(json!({
            "n": n, "delta": s.delta, "argmax_x": s.argmax_x, "error_radius": s.error_radius, "grid_size": s.grid_size,
        }));
    }
    if ctx.wants(Format::Csv) {
        ctx.write("evaluate.csv", &csv_text(&["n", "x", "value", "error_radius", "f"], rows))?;
    }
    if ctx.wants(Format::Json) {
        let v = json!({
            "function": f.name(), "family": fam.kind.as_str(), "eval": mode, "seed": cfg.seeds.root, "sup_errors": summary,
        });
        ctx.write("evaluate.json", &json_text(&v))?;
    }
    Ok(0)
}

fn cmd_modulus(cfg: &ExperimentConfig, ctx: &Ctx) -> genbern::Result<u8> {
    let profile = build_profile(cfg)?;
    let f = cfg.target()?;
    let holder = match f.holder() {
        Some(h) => Some(holder_seminorm(&profile, h.alpha)?),
        None => None,
    };
    ctx.warn_all(&profile.warnings);
    if ctx.wants(Format::Csv) {
        ctx.write("modulus.csv", &profile_csv(&profile))?;
    }
    if ctx.wants(Format::Json) {
        let v = json!({
            "function": f.name(), "weight": cfg.weight()?, "x_window": profile.x_window,
            "enclosure_slack": profile.enclosure_slack, "holder_estimate": holder, "warnings": profile.warnings,
        });
        ctx.write("modulus.json", &json_text(&v))?;
    }
    if let Some(h) = holder {
        ctx.say(format!("holder: alpha = {}, H = {}", h.alpha, fmt_float(h.seminorm)));
    }
    Ok(0)
}

fn cmd_tail(cfg: &ExperimentConfig, ctx: &Ctx) -> genbern::Result<u8> {
    let q = build_tail(cfg)?;
    let points = q.tabulate(&cfg.u_grid().points()?);
    let (cap, n_max, warnings) = match &q {
        TailCurve::Conjugate(p) => (Some(p.lambda_cap()), p.n_max, p.warnings.clone()),
        _ => (None, None, Vec::new()),
    };
    ctx.warn_all(&warnings);
    if ctx.wants(Format::Csv) {
        ctx.write("tail.csv", &tail_csv(&points))?;
    }
    if ctx.wants(Format::Json) {
        let v = json!({
            "method": q.describe(), "lambda_cap": cap, "n_max": n_max, "seed": cfg.seeds.root,
            "cap_release": q.cap_release(), "certified": !matches!(&q, TailCurve::Tabulated(t) if t.estimated),
            "warnings": warnings,
        });
        ctx.write("tail.json", &json_text(&v))?;
    }
    Ok(0)
}

fn bound_reports(t: &ConvergenceTable) -> Vec<BoundReport> {
    t.rows
        .iter()
        .map(|r| {
            let mut metadata = BTreeMap::new();
            metadata.insert("tail".to_string(), t.tail.clone());
            metadata.insert("argmax_x".to_string(), fmt_float(r.argmax_x));
            BoundReport {
                n: r.n,
                upper_stieltjes: r.estimate,
                upper_closed_form: r.closed_form,
                lower_constant: t.lower_reference.map(|l| l.g_alpha),
                empirical_delta: Some(r.empirical_delta),
                error_radius: Some(r.error_radius),
                enclosure: (r.lower_bracket, r.upper_bracket),
                metadata,
            }
        })
        .collect()
}

fn cmd_bound(cfg: &ExperimentConfig, ctx: &Ctx) -> genbern::Result<u8> {
    let run = run_convergence(cfg)?;
    let t = &run.table;
    ctx.warn_all(&t.warnings);
    let validity = validity_check(t);
    if ctx.wants(Format::Csv) {
        let rows = t.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_float(r.lower_bracket),
                fmt_float(r.upper_bracket),
                r.closed_form.map(fmt_float).unwrap_or_default(),
                fmt_float(r.empirical_delta),
                fmt_float(r.empirical_delta / r.upper_bracket),
            ]
        });
        let header = ["n", "lower_bracket", "upper_bracket", "closed_form", "empirical", "ratio"];
        ctx.write("bound.csv", &csv_text(&header, rows))?;
    }
    if ctx.wants(Format::Json) {
        let v = json!({
            "function": t.function, "tail": t.tail, "holder_estimate": t.holder_estimate,
            "lower_reference": t.lower_reference, "reports": bound_reports(t), "validity": validity,
        });
        ctx.write("bound.json", &json_text(&v))?;
    }
    Ok(verdict(&validity, ctx))
}

fn verdict(v: &genbern::experiments::Validity, ctx: &Ctx) -> u8 {
    if v.passed() {
        0
    } else {
        for x in &v.violations {
            eprintln!("genbern: violation: {}", one_line(&format!("{x:?}")));
        }
        if !ctx.quiet {
            println!("{} bound violation(s)", v.violations.len());
        }
        1
    }
}

fn cmd_run(cfg: &ExperimentConfig, ctx: &Ctx) -> genbern::Result<u8> {
    let run = run_convergence(cfg)?;
    ctx.warn_all(&run.table.warnings);
    let (report, written) = write_run(cfg, &run, &ctx.out, ctx.format)?;
    for p in &written {
        ctx.say(format!("wrote {}", p.display()));
    }
    if let Some(fit) = report.table.fit {
        ctx.say(format!("slope {:.4} +- {:.4} over {} rows", fit.slope, fit.slope_stderr, fit.rows_used));
    }
    Ok(verdict(&report.validity, ctx))
}

fn dispatch(cli: &Cli) -> Result<u8, Error> {
    let cfg = load_config(cli)?;
    let ctx = Ctx { out: cli.out.clone(), format: cli.format.map(Format::from), verbose: cli.verbose, quiet: cli.quiet };
    match cli.command {
        Command::Evaluate => cmd_evaluate(&cfg, &ctx),
        Command::Modulus => cmd_modulus(&cfg, &ctx),
        Command::Tail => cmd_tail(&cfg, &ctx),
        Command::Bound => cmd_bound(&cfg, &ctx),
        Command::Run => cmd_run(&cfg, &ctx),
    }
}

fn usage_error(e: &clap::Error) -> ExitCode {
    let mut msg = one_line(&e.to_string());
    if let Some(rest) = msg.strip_prefix("error: ") {
        msg = rest.to_string();
    }
    if e.kind() == clap::error::ErrorKind::InvalidSubcommand {
        msg.push_str(&format!("; valid subcommands: {SUBCOMMANDS}"));
    }
    eprintln!("genbern: error[usage]: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind::*;
            return match e.kind() {
                DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand if e.exit_code() == 0 => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => usage_error(&e),
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(&e),
    }
}
