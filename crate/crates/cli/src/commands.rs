//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use heavytail_opt::harness::{
    clip_bias_monte_carlo, log_free_iterations, run_resolved, DerivedParams, ExperimentSpec, Method,
    GATE_LEVEL,
};
use heavytail_opt::oracle::holder_certificate_check;
use heavytail_opt::schedules::{
    schedule_inequality_check, sstm_alpha, sstm_params, sstm_unit_batch_params, ParamMode, ScheduleInputs,
    SstmConfig,
};
use heavytail_opt::stats::rate_regression;
use heavytail_opt::{make_noise, make_problem, trial_rng, NoiseSpec, ProblemSpec, Vector};
use serde::Serialize;

use crate::config::{CheckSpec, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, to_json, write_file, write_run};

pub const WORKERS_ENV: &str = "HEAVYTAIL_OPT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "heavytail-opt", version, about = "Clipped stochastic optimisation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the derived method parameters.
    Params(ParamsArgs),
    /// Run a Monte-Carlo experiment and write CSV/JSON results.
    Run(RunArgs),
    /// Run a grid of (eps, nu, method) experiments and fit rate exponents.
    Sweep(RunArgs),
    /// Check schedule inequalities, smoothness certificates and clipping bias.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the config plus derived parameters as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
    /// Exit with code 3 when the binomial success gate fails.
    #[arg(long)]
    pub assert_success: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Optional config; its problem, noise and targets seed the suite.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
    /// Fault injection: take the stepsize from a/2 while checking against a.
    #[arg(long)]
    pub corrupt_a: bool,
    /// Override the largest iteration index checked.
    #[arg(long)]
    pub k_max: Option<u64>,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command, out: &mut dyn std::io::Write) -> CliResult<()> {
    let text = match cmd {
        Command::Params(a) => cmd_params(&a)?,
        Command::Run(a) => cmd_run(&a)?,
        Command::Sweep(a) => cmd_sweep(&a)?,
        Command::Check(a) => cmd_check(&a)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

fn load(path: &Path, seed: Option<u64>) -> CliResult<ConfigFile> {
    let mut cfg = ConfigFile::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn workers(arg: Option<usize>, cfg: &ConfigFile) -> usize {
    arg.or(cfg.output.workers)
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn out_dir(arg: &Option<PathBuf>, cfg: &ConfigFile) -> PathBuf {
    arg.clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

// ---------------------------------------------------------------------------
// params
// ---------------------------------------------------------------------------

pub fn params_table(p: &DerivedParams) -> String {
    let mut s = String::new();
    match p {
        DerivedParams::Sstm(c) => sstm_rows(&mut s, c),
        DerivedParams::Sgd(c) => {
            let _ = writeln!(s, "method          clipped-SGD ({:?})", c.mode);
            let _ = writeln!(s, "N               {}", c.n);
            let _ = writeln!(s, "gamma           {}", fmt_f64(c.gamma));
            let _ = writeln!(s, "gamma term      {:?}", c.active_term);
            let _ = writeln!(s, "lambda          {}", fmt_f64(c.lambda));
            let _ = writeln!(s, "m               {}", c.m);
            let _ = writeln!(s, "ln(4N/beta)     {}", fmt_f64(c.log_factor));
            let _ = writeln!(s, "C               {}", c.c);
            let _ = writeln!(s, "gap bound       {}", fmt_f64(c.gap_bound()));
            let _ = writeln!(s, "oracle calls    {}", c.total_oracle_calls());
        }
        DerivedParams::RestartSstm(plan) => {
            let _ = writeln!(s, "restarts tau = {}, mu = {}", plan.tau, plan.mu);
            let _ = writeln!(s, "{:>3} {:>24} {:>24} {:>10} {:>24} {:>24} {:>24} {:>14}", "t", "eps_t", "R_t", "N_t", "a_t", "alpha_t", "B_t", "oracle_calls");
            for st in &plan.stages {
                let c = &st.config;
                let _ = writeln!(
                    s,
                    "{:>3} {:>24} {:>24} {:>10} {:>24} {:>24} {:>24} {:>14}",
                    st.t,
                    fmt_f64(st.eps_t),
                    fmt_f64(st.r_t),
                    c.n,
                    fmt_f64(c.a),
                    fmt_f64(c.alpha),
                    fmt_f64(c.b),
                    c.total_oracle_calls()
                );
            }
            let _ = writeln!(s, "total oracle calls {}", plan.total_oracle_calls());
        }
        DerivedParams::RestartSgd(plan) => {
            let _ = writeln!(s, "restarts tau = {}, mu = {}", plan.tau, plan.mu);
            let _ = writeln!(s, "{:>3} {:>24} {:>24} {:>10} {:>24} {:>24} {:>10}", "t", "eps_t", "R_t", "N_t", "gamma_t", "lambda_t", "m_t");
            for st in &plan.stages {
                let c = &st.config;
                let _ = writeln!(
                    s,
                    "{:>3} {:>24} {:>24} {:>10} {:>24} {:>24} {:>10}",
                    st.t,
                    fmt_f64(st.eps_t),
                    fmt_f64(st.r_t),
                    c.n,
                    fmt_f64(c.gamma),
                    fmt_f64(c.lambda),
                    c.m
                );
            }
            let _ = writeln!(s, "total oracle calls {}", plan.total_oracle_calls());
        }
    }
    for w in p.warnings() {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn sstm_rows(s: &mut String, c: &SstmConfig) {
    let l = c.log_factor;
    let _ = writeln!(s, "method          clipped-SSTM ({:?})", c.mode);
    let _ = writeln!(s, "N               {}", c.n);
    let _ = writeln!(s, "a               {}", fmt_f64(c.a));
    let _ = writeln!(s, "16384 ln^2(4N/beta) {}", fmt_f64(16384.0 * l * l));
    let _ = writeln!(s, "alpha           {}", fmt_f64(c.alpha));
    let _ = writeln!(s, "B               {}", fmt_f64(c.b));
    let _ = writeln!(s, "ln(4N/beta)     {}", fmt_f64(l));
    let _ = writeln!(s, "C               {}", fmt_f64(c.c));
    let _ = writeln!(s, "gap bound       {}", fmt_f64(c.gap_bound()));
    let _ = writeln!(s, "oracle calls    {}", c.total_oracle_calls());
}

pub fn cmd_params(a: &ParamsArgs) -> CliResult<String> {
    let mut cfg = load(&a.config, a.seed)?;
    let resolved = cfg.experiment().resolve()?;
    if a.json {
        cfg.derived = Some(resolved.params);
        return Ok(to_json(&cfg));
    }
    let mut s = params_table(&resolved.params);
    let _ = writeln!(s, "R0              {}", fmt_f64(resolved.r0));
    for w in resolved.warnings.iter().filter(|w| !w.starts_with("stage") && !resolved.params.warnings().contains(w)) {
        let _ = writeln!(s, "warning: {w}");
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn summary_text(r: &heavytail_opt::harness::ExperimentSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method            {}", r.method.name());
    let _ = writeln!(s, "trials            {}", r.trials);
    let _ = writeln!(s, "success rate      {:.4} ({}/{})", r.success_rate, r.successes, r.trials);
    let _ = writeln!(s, "CP lower bound    {:.4}", r.clopper_pearson_lower);
    let _ = writeln!(
        s,
        "binomial gate     {} (p-value {:.4}, need >= {} successes)",
        if r.gate.pass { "pass" } else { "FAIL" },
        r.gate.p_value,
        r.gate.min_successes
    );
    let q = r.gap_quantiles;
    let _ = writeln!(s, "gap q50/q90/q95   {} {} {}", fmt_f64(q.q50), fmt_f64(q.q90), fmt_f64(q.q95));
    let _ = writeln!(s, "divergences       {}", r.divergences);
    if let (Some(h), Some(g)) = (r.halving_successes, &r.halving_gate) {
        let _ = writeln!(s, "stage halving     {h}/{} ({})", r.trials, if g.pass { "pass" } else { "FAIL" });
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn cmd_run(a: &RunArgs) -> CliResult<String> {
    let cfg = load(&a.config, a.seed)?;
    let spec = cfg.experiment();
    let resolved = spec.resolve()?;
    let result = run_resolved(&spec, &resolved, workers(a.workers, &cfg))?;
    let dir = out_dir(&a.out, &cfg);
    write_run(&dir, &result)?;
    let text = if a.json {
        to_json(&result.summary)
    } else {
        summary_text(&result.summary)
    };
    let g = &result.summary.gate;
    if a.assert_success && !g.pass {
        print!("{text}");
        return Err(CliError::GateFailed {
            successes: g.successes,
            trials: g.trials,
            p_value: g.p_value,
            level: GATE_LEVEL,
        });
    }
    Ok(text)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SweepRow {
    method: Method,
    nu: f64,
    eps: f64,
    n: Option<u64>,
    log_free_n: Option<f64>,
    scheduled_oracle_calls: u64,
    success_rate: Option<f64>,
    gap_q95: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RateRow {
    method: Method,
    nu: f64,
    slope: f64,
    residual: f64,
}

fn iterations(p: &DerivedParams) -> Option<u64> {
    match p {
        DerivedParams::Sstm(c) => Some(c.n),
        DerivedParams::Sgd(c) => Some(c.n),
        DerivedParams::RestartSstm(p) => Some(p.total_iterations()),
        DerivedParams::RestartSgd(p) => Some(p.total_iterations()),
    }
}

pub fn cmd_sweep(a: &RunArgs) -> CliResult<String> {
    let cfg = load(&a.config, a.seed)?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let base = cfg.experiment();
    let nus = match &sweep.nu {
        Some(v) => v.clone(),
        None => vec![make_problem(&base.problem)?.nu()],
    };
    let methods = sweep.methods.clone().unwrap_or_else(|| vec![base.method]);
    let w = workers(a.workers, &cfg);
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    let mut notes = Vec::new();
    for &method in &methods {
        for &nu in &nus {
            let mut eps_ok = Vec::new();
            let mut n_free = Vec::new();
            for &eps in &sweep.eps {
                let spec = ExperimentSpec {
                    problem: base.problem.with_nu(nu)?,
                    method,
                    targets: heavytail_opt::harness::Targets { eps, ..base.targets },
                    ..base.clone()
                };
                let resolved = spec.resolve()?;
                let lf = log_free_iterations(&resolved.params);
                let (rate, q95) = if sweep.simulate {
                    let r = run_resolved(&spec, &resolved, w)?;
                    (Some(r.summary.success_rate), Some(r.summary.gap_quantiles.q95))
                } else {
                    (None, None)
                };
                if let Some(v) = lf {
                    eps_ok.push(eps);
                    n_free.push(v);
                }
                rows.push(SweepRow {
                    method,
                    nu,
                    eps,
                    n: iterations(&resolved.params),
                    log_free_n: lf,
                    scheduled_oracle_calls: resolved.params.total_oracle_calls(),
                    success_rate: rate,
                    gap_q95: q95,
                });
            }
            match rate_regression(&eps_ok, &n_free) {
                Ok(fit) => rates.push(RateRow {
                    method,
                    nu,
                    slope: fit.slope,
                    residual: fit.residual,
                }),
                Err(e) => notes.push(format!("{} nu={nu}: no rate fit ({e})", method.name())),
            }
        }
    }
    let dir = out_dir(&a.out, &cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut csv = String::from("method,nu,eps,n,log_free_n,scheduled_oracle_calls,success_rate,gap_q95\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.method.name(),
            fmt_f64(r.nu),
            fmt_f64(r.eps),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            opt(r.log_free_n),
            r.scheduled_oracle_calls,
            opt(r.success_rate),
            opt(r.gap_q95)
        );
    }
    write_file(&dir.join("sweep.csv"), &csv)?;
    #[derive(Serialize)]
    struct SweepFile<'a> {
        rows: &'a [SweepRow],
        rates: &'a [RateRow],
    }
    let json = to_json(&SweepFile {
        rows: &rows,
        rates: &rates,
    });
    write_file(&dir.join("sweep.json"), &json)?;
    if a.json {
        return Ok(json);
    }
    let mut s = String::new();
    for r in &rates {
        let _ = writeln!(s, "{} nu={}: slope {:.4} (rms residual {:.2e})", r.method.name(), r.nu, r.slope, r.residual);
    }
    for n in &notes {
        let _ = writeln!(s, "{n}");
    }
    let _ = writeln!(s, "{} grid points written to {}", rows.len(), dir.display());
    Ok(s)
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub nu: Option<f64>,
    pub ok: bool,
    pub detail: String,
}

/// Problem/noise/targets used by the check suite.
struct CheckSetup {
    problem: ProblemSpec,
    noise: NoiseSpec,
    eps: f64,
    beta: f64,
    r0: f64,
    seed: u64,
    spec: CheckSpec,
}

fn check_setup(a: &CheckArgs) -> CliResult<CheckSetup> {
    let mut s = match &a.config {
        Some(path) => {
            let cfg = load(path, None)?;
            CheckSetup {
                r0: cfg.start.r0.unwrap_or(1.0),
                problem: cfg.problem,
                noise: cfg.noise,
                eps: cfg.targets.eps,
                beta: cfg.targets.beta,
                seed: cfg.seed,
                spec: cfg.check.unwrap_or_default(),
            }
        }
        None => CheckSetup {
            problem: ProblemSpec::PowerNorm {
                dim: 3,
                nu: 1.0,
                shift: None,
            },
            noise: NoiseSpec::StudentT { sigma: 1.0, df: 3.0 },
            eps: 1e-2,
            beta: 0.1,
            r0: 1.0,
            seed: 0,
            spec: CheckSpec::default(),
        },
    };
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    if let Some(k) = a.k_max {
        s.spec.k_max = k;
    }
    Ok(s)
}

/// Problem of the configured family at exponent `nu`, falling back to the
/// power-norm family when the family has a fixed exponent.
fn problem_at(base: &ProblemSpec, nu: f64) -> CliResult<ProblemSpec> {
    Ok(base.with_nu(nu).unwrap_or(ProblemSpec::PowerNorm {
        dim: base.dim(),
        nu,
        shift: None,
    }))
}

pub fn run_checks(a: &CheckArgs) -> CliResult<Vec<CheckItem>> {
    let s = check_setup(a)?;
    let mut items = Vec::new();
    let mut rng = trial_rng(s.seed);
    for &nu in &s.spec.nu_grid {
        let p = make_problem(&problem_at(&s.problem, nu)?)?;
        let inp = ScheduleInputs {
            nu,
            m_nu: p.m_nu(),
            eps: s.eps,
            beta: s.beta,
            r0: s.r0,
            sigma: s.noise.sigma(),
        };
        let mut cfg = sstm_params(&inp, ParamMode::Theorem)?;
        if a.corrupt_a {
            cfg.alpha = sstm_alpha(nu, cfg.m_nu, cfg.eps, cfg.a / 2.0);
        }
        let rep = schedule_inequality_check(&cfg, s.spec.k_max);
        let detail = match rep.first_violation {
            Some(v) => format!(
                "{:?} violated at k = {}: A_k = {:e}, bound = {:e}",
                v.inequality, v.k, v.a_k, v.bound
            ),
            None if nu == 0.0 && rep.max_curvature_gap <= 1e-12 => {
                format!("k <= {}: all hold; curvature equality exact (gap {:.1e})", s.spec.k_max, rep.max_curvature_gap)
            }
            None => format!("k <= {}: all hold (max curvature gap {:.3e})", s.spec.k_max, rep.max_curvature_gap),
        };
        items.push(CheckItem {
            name: "schedule inequalities".into(),
            nu: Some(nu),
            ok: rep.ok(),
            detail,
        });

        let cert = holder_certificate_check(&p, s.spec.certificate_pairs as usize, &mut rng);
        items.push(CheckItem {
            name: format!("smoothness certificate ({})", problem_at(&s.problem, nu)?.kind_name()),
            nu: Some(nu),
            ok: cert.is_ok(),
            detail: match cert {
                Ok(r) => format!("{} pairs, worst ratio {r:.6e} <= M = {:.6e}", s.spec.certificate_pairs, p.m_nu()),
                Err(e) => e.to_string(),
            },
        });

        if inp.sigma > 0.0 {
            let ub = sstm_unit_batch_params(nu, inp.m_nu, inp.eps, inp.beta, inp.r0, inp.sigma)?;
            let m_last = ub.batch_for_alpha(ub.alpha_k(ub.n));
            items.push(CheckItem {
                name: "unit-batch schedule".into(),
                nu: Some(nu),
                ok: m_last == 1,
                detail: format!("N = {}, largest batch {m_last}", ub.n),
            });
        }
    }

    let p = make_problem(&s.problem)?;
    let noise = make_noise(&s.noise, p.dim())?;
    let xs = p.x_star.clone().unwrap_or_else(|| Vector::zeros(p.dim()));
    let mut x = xs.clone();
    x[0] += 0.1 * s.r0;
    let g = p.gradient(&x).norm();
    let lambda = if g > 0.0 { 4.0 * g } else { 1.0 };
    for &m in &s.spec.clip_batches {
        let e = clip_bias_monte_carlo(&p, &noise, &x, lambda, m, s.spec.clip_draws, &mut rng)?;
        let detail = if e.skipped {
            "skipped: gradient norm exceeds lambda/2".to_string()
        } else {
            format!(
                "bias {:.3e} (bound {:.3e}, se {:.1e}); distortion {:.3e} (bound {:.3e}); variance {:.3e} (bound {:.3e}); max deviation {:.3e} <= 2 lambda = {:.3e}",
                e.bias, e.bias_bound, e.bias_se, e.distortion, e.distortion_bound, e.variance, e.variance_bound,
                e.max_deviation, 2.0 * lambda
            )
        };
        items.push(CheckItem {
            name: format!("clipping bias m = {m}"),
            nu: None,
            ok: e.ok(),
            detail,
        });
    }
    Ok(items)
}

pub fn cmd_check(a: &CheckArgs) -> CliResult<String> {
    let items = run_checks(a)?;
    let text = if a.json {
        to_json(&items)
    } else {
        let mut s = String::new();
        for i in &items {
            let nu = i.nu.map(|v| format!(" nu={v}")).unwrap_or_default();
            let _ = writeln!(s, "[{}] {}{}: {}", if i.ok { "ok" } else { "FAIL" }, i.name, nu, i.detail);
        }
        s
    };
    if let Some(bad) = items.iter().find(|i| !i.ok) {
        print!("{text}");
        let nu = bad.nu.map(|v| format!(" (nu = {v})")).unwrap_or_default();
        return Err(CliError::CheckFailed(format!("{}{nu}: {}", bad.name, bad.detail)));
    }
    Ok(text)
}
