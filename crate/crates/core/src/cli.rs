//! Command-line front end. Every file a command writes lands under `--out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{self, BoundConfig, SearchSpec, UpsilonEvaluator};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentConfig};
use crate::grid::{GridFilter, InitialDistribution, Support};
use crate::report::{ensure_dir, fmt_f64, write_csv, write_text};
use crate::sim::{simulate, Trajectory};
use crate::verify::{self, SuiteReport};

/// Corpus seed used by `verify` when `--seed` is not given.
pub const CORPUS_SEED: u64 = 17;
pub const CORPUS_CASES: usize = 50;
pub const CORPUS_HORIZON: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "hmm-forget", version, about = "Filter forgetting laboratory for hidden Markov models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key=value` override of a config entry, e.g. `model.phi=0.7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GridFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub grid_m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ObsSource {
    /// Trajectory CSV (`step,x,y`); otherwise data are simulated with `--seed`.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Horizon when simulating; defaults to `experiment.n`.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundForm {
    Corollary,
    Lemma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Forgetting,
    Rseq,
    Misspec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    #[value(name = "prop51")]
    Prop51,
    #[value(name = "prop52")]
    Prop52,
    #[value(name = "lemmaA1")]
    LemmaA1,
    #[value(name = "lemmaA2")]
    LemmaA2,
    #[value(name = "corollary")]
    Corollary,
    #[value(name = "all")]
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory from the data-generating model.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        replication: u64,
        /// Leave the hidden-state column empty.
        #[arg(long)]
        hide_states: bool,
    },
    /// Run filters from `nu` and `nu_prime` and record their distance.
    Filter {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridFlags,
        #[command(flatten)]
        source: ObsSource,
    },
    /// Evaluate the pathwise forgetting bound along one trajectory.
    Bound {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridFlags,
        #[command(flatten)]
        source: ObsSource,
        #[arg(long, value_enum, default_value_t = BoundForm::Corollary)]
        form: BoundForm,
    },
    /// Replicated forgetting, r-sequence and misspecification studies.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Exact and Monte Carlo checks on the finite-state corpus.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = CORPUS_CASES)]
        cases: usize,
        #[arg(long, default_value_t = CORPUS_HORIZON)]
        horizon: usize,
    },
}

/// Exit status for a finished run: 0 on success, 1 for domain errors and failed
/// checks, 2 for usage and configuration errors.
pub fn exit_code(outcome: &Result<bool>) -> i32 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) if e.is_usage() => 2,
        Err(_) => 1,
    }
}

fn grid_overrides(g: &GridFlags, overrides: &mut Vec<String>) -> Result<()> {
    match (g.grid_lo, g.grid_hi, g.grid_m) {
        (None, None, None) => Ok(()),
        (Some(lo), Some(hi), Some(m)) => {
            overrides.push(format!("grid.lo={lo:?}"));
            overrides.push(format!("grid.hi={hi:?}"));
            overrides.push(format!("grid.m={m}"));
            Ok(())
        }
        _ => Err(Error::config("grid", "--grid-lo, --grid-hi and --grid-m go together")),
    }
}

fn load(common: &Common, extra: Vec<String>) -> Result<RunConfig> {
    let mut ov = common.overrides.clone();
    ov.extend(extra);
    RunConfig::load(&common.config, &ov).map_err(|e| match e {
        Error::Io { path, source } => Error::config("--config", format!("{}: {source}", path.display())),
        other => other,
    })
}

fn echo(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    write_text(&out.join("resolved_config.toml"), &cfg.resolved_toml(seed))
}

/// Filter support, with a grid-size check against any tabulated initial law.
fn filter_support(cfg: &RunConfig) -> Result<Support> {
    let ex = ExperimentConfig {
        model: cfg.model.clone(),
        star: cfg.star.clone(),
        star_init: cfg.star_init(),
        nu: InitialDistribution::Uniform { a: 0.0, b: 1.0 },
        nu_prime: InitialDistribution::Uniform { a: 0.0, b: 1.0 },
        n: 2,
        replications: 1,
        seed: 0,
        grid: cfg.grid,
        rate_floor: 1e-300,
        bound: None,
        quad: cfg.quad,
        search: cfg.search,
        rseq_schedule: Vec::new(),
    };
    let support = ex.support().map_err(|e| Error::config("grid", e.to_string()))?;
    for (key, init) in [("nu", &cfg.nu), ("nu_prime", &cfg.nu_prime)] {
        let Some(init) = init else {
            return Err(Error::config(key, "missing section"));
        };
        init.log_masses(&support).map_err(|e| Error::config(key, e.to_string()))?;
    }
    Ok(support)
}

fn observations(cfg: &RunConfig, source: &ObsSource, seed: Option<u64>, support: &Support, out: &Path) -> Result<Vec<f64>> {
    if let Some(path) = &source.obs {
        return Ok(Trajectory::read_csv(path)?.obs);
    }
    let seed = cfg.seed_or(seed)?;
    let n = source
        .n
        .or(cfg.experiment.as_ref().map(|e| e.n))
        .ok_or_else(|| Error::config("experiment.n", "horizon needed: pass --n, --obs or set experiment.n"))?;
    let traj = simulate(&cfg.star, n, &cfg.star_init(), Some(support), seed, 0)?;
    traj.write_csv(&out.join("trajectory.csv"))?;
    Ok(traj.obs)
}

fn write_suite(out: &Path, report: &SuiteReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.case.to_string(), r.n.to_string(), fmt_f64(r.lhs), fmt_f64(r.rhs), r.holds.to_string()])
        .collect();
    write_csv(&out.join(format!("verify_{}.csv", report.suite)), &["case", "n", "lhs", "rhs", "holds"], &rows)
}

fn print_suite(report: &SuiteReport) {
    println!(
        "{}: {} ({} checks, {} violations)",
        report.suite,
        if report.passed() { "PASS" } else { "FAIL" },
        report.rows.len(),
        report.violations()
    );
}

fn run_verify(suite: Suite, out: &Path, seed: u64, cases: usize, horizon: usize) -> Result<bool> {
    ensure_dir(out)?;
    let wants = |s: Suite| suite == s || suite == Suite::All;
    let mut ok = true;
    let mut reports = Vec::new();
    if wants(Suite::Prop51) {
        reports.push(verify::prop51_suite(seed, cases, horizon)?);
    }
    if wants(Suite::Prop52) {
        reports.push(verify::prop52_suite(seed, cases, horizon)?);
    }
    if wants(Suite::LemmaA1) {
        reports.push(verify::lemma_a1_suite(12));
    }
    if wants(Suite::LemmaA2) {
        reports.push(verify::lemma_a2_exact_suite(seed, 20, 10)?);
        let mc = verify::lemma_a2_mc(seed, 10_000)?;
        write_csv(
            &out.join("verify_lemmaA2_mc.csv"),
            &["mc_lhs", "se", "rhs", "holds"],
            &[vec![fmt_f64(mc.mc_lhs), fmt_f64(mc.se), fmt_f64(mc.rhs), mc.holds_within_band.to_string()]],
        )?;
        println!(
            "lemmaA2 monte carlo: {} (lhs {:.6} +- {:.6}, rhs {:.6})",
            if mc.holds_within_band { "PASS" } else { "FAIL" },
            mc.mc_lhs,
            mc.se,
            mc.rhs
        );
        ok &= mc.holds_within_band;
    }
    if wants(Suite::Corollary) {
        reports.push(verify::corollary_suite(seed, cases, horizon)?);
    }
    for r in &reports {
        write_suite(out, r)?;
        print_suite(r);
        ok &= r.passed();
    }
    Ok(ok)
}

fn bound_config(cfg: &RunConfig) -> Result<(experiments::BoundSettings, BoundConfig, bounds::LdSet, UpsilonEvaluator)> {
    let b = cfg.bound.clone().ok_or_else(|| Error::config("bound", "missing section"))?;
    let search = cfg.search.unwrap_or_else(|| SearchSpec::for_model(&cfg.model));
    let eval = UpsilonEvaluator::new(&cfg.model, &search, &cfg.quad)?;
    let c = bounds::find_ld_set_for_eta(&eval, b.eta, &b.k, &b.y_probe, b.max_radius, b.m_probe)?;
    let d = bounds::certify_ld_set(&cfg.model, &b.d, b.m_probe)?;
    let bc = BoundConfig {
        beta: b.beta,
        gamma: b.gamma,
        eta: b.eta,
        k: b.k,
        d,
        m0: b.m0,
        m1: b.m1,
        m2: b.m2,
    };
    bc.validate().map_err(|e| Error::config("bound", e.to_string()))?;
    Ok((b, bc, c, eval))
}

/// Runs one command; `Ok(false)` means the command ran but a check failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, n, replication, hide_states } => {
            let extra = n.map(|n| vec![format!("experiment.n={n}")]).unwrap_or_default();
            let cfg = load(&common, extra)?;
            let seed = cfg.seed_or(common.seed)?;
            let n = cfg
                .experiment
                .as_ref()
                .map(|e| e.n)
                .ok_or_else(|| Error::config("experiment.n", "horizon needed: pass --n or set experiment.n"))?;
            let support = cfg
                .star
                .n_states()
                .map(Support::Finite)
                .or_else(|| cfg.grid.map(Support::Grid));
            let mut traj = simulate(&cfg.star, n, &cfg.star_init(), support.as_ref(), seed, replication)?;
            if hide_states {
                traj = traj.without_hidden();
            }
            echo(&cfg, Some(seed), &common.out)?;
            traj.write_csv(&common.out.join("trajectory.csv"))?;
            Ok(true)
        }
        Command::Filter { common, grid, source } => {
            let mut extra = Vec::new();
            grid_overrides(&grid, &mut extra)?;
            let cfg = load(&common, extra)?;
            let support = filter_support(&cfg)?;
            echo(&cfg, common.seed.or(cfg.seed), &common.out)?;
            let obs = observations(&cfg, &source, common.seed, &support, &common.out)?;
            let (nu, nu_prime) = (cfg.nu.clone().unwrap(), cfg.nu_prime.clone().unwrap());
            let recs = GridFilter::new(&cfg.model, support)?.run_two(&nu, &nu_prime, &obs)?;
            let rows: Vec<Vec<String>> = recs
                .iter()
                .map(|r| vec![r.n.to_string(), fmt_f64(r.tv), fmt_f64(r.log_z_nu), fmt_f64(r.log_z_nuprime)])
                .collect();
            write_csv(&common.out.join("filter_trace.csv"), &["n", "tv", "logZ_nu", "logZ_nuprime"], &rows)?;
            Ok(true)
        }
        Command::Bound { common, grid, source, form } => {
            let mut extra = Vec::new();
            grid_overrides(&grid, &mut extra)?;
            let cfg = load(&common, extra)?;
            let support = filter_support(&cfg)?;
            let (settings, bc, c, eval) = bound_config(&cfg)?;
            echo(&cfg, common.seed.or(cfg.seed), &common.out)?;
            let obs = observations(&cfg, &source, common.seed, &support, &common.out)?;
            let (nu, nu_prime) = (cfg.nu.clone().unwrap(), cfg.nu_prime.clone().unwrap());
            let report = match form {
                BoundForm::Corollary => bounds::corollary_bound(&eval, &support, &nu, &nu_prime, &obs, &bc, &c, &cfg.quad)?,
                BoundForm::Lemma => {
                    bounds::lemma53_bound(&eval, &support, &nu, &nu_prime, &obs, settings.beta, &c, &bc.d, &cfg.quad)?
                }
            };
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_f64(r.log_term_geo),
                        fmt_f64(r.log_term_ratio),
                        fmt_f64(r.log_total),
                        fmt_f64(r.total_clipped),
                        r.applies.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &common.out.join("bound.csv"),
                &["n", "log_term_geo", "log_term_ratio", "log_total", "total_clipped", "applies"],
                &rows,
            )?;
            let json = serde_json::to_string_pretty(&report.summary).map_err(|e| Error::invalid(e.to_string()))?;
            write_text(&common.out.join("bound_summary.json"), &(json + "\n"))?;
            let cond = bounds::check_conditions(&obs, &eval, &bc, &cfg.quad)?;
            let rows: Vec<Vec<String>> = cond
                .rows
                .iter()
                .map(|r| vec![r.n.to_string(), fmt_f64(r.avg_k), fmt_f64(r.avg_log_upsilon), fmt_f64(r.avg_log_psi)])
                .collect();
            write_csv(&common.out.join("conditions.csv"), &["n", "avg_k", "avg_log_upsilon", "avg_log_psi"], &rows)?;
            Ok(true)
        }
        Command::Experiment { kind, common, threads } => {
            let cfg = load(&common, Vec::new())?;
            let seed = cfg.seed_or(common.seed)?;
            filter_support(&cfg)?;
            let ex = cfg.experiment(seed)?;
            echo(&cfg, Some(seed), &common.out)?;
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                if t == 0 {
                    return Err(Error::config("--threads", "must be at least 1"));
                }
                pool = pool.num_threads(t);
            }
            let pool = pool.build().map_err(|e| Error::invalid(e.to_string()))?;
            let result = pool.install(|| match kind {
                ExperimentKind::Forgetting => experiments::run_forgetting(&ex),
                ExperimentKind::Rseq => experiments::estimate_r_sequences(&ex),
                ExperimentKind::Misspec => experiments::misspecification_study(&ex),
            })?;
            experiments::emit_report(&result, &common.out)?;
            print!("{}", experiments::summary_text(&result));
            Ok(true)
        }
        Command::Verify { suite, out, seed, cases, horizon } => {
            run_verify(suite, &out, seed.unwrap_or(CORPUS_SEED), cases, horizon)
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = run(cli);
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    exit_code(&outcome)
}
