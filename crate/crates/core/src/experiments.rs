//! Forgetting experiments: filters from two initial laws on simulated data, fitted
//! decay rates, bound diagnostics and r-sequence frequencies.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    self, BoundConfig, BoundReport, ConditionReport, LdRegion, LdSet, ObsSet, SearchSpec, UpsilonEvaluator,
    UpsilonRegion,
};
use crate::error::{Error, Result};
use crate::grid::{GridFilter, GridSpec, InitialDistribution, Support};
use crate::math::{ls_slope, median_iqr, wilson_interval};
use crate::model::{ModelSpec, QuadratureSpec};
use crate::report::{ensure_dir, fmt_f64, write_csv, write_text};
use crate::sim::simulate;

/// Grid cells used when a continuous model comes without an explicit grid.
pub const DEFAULT_GRID_CELLS: usize = 400;

/// Bound and r-sequence settings shared by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    #[serde(default = "all_obs")]
    pub k: ObsSet,
    /// The set `D`.
    pub d: LdRegion,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// Observations at which the drift/likelihood condition is checked when searching for `C`.
    pub y_probe: Vec<f64>,
    #[serde(default = "default_max_radius")]
    pub max_radius: f64,
    #[serde(default = "default_m_probe")]
    pub m_probe: usize,
}

fn all_obs() -> ObsSet {
    ObsSet::All
}

fn default_max_radius() -> f64 {
    50.0
}

fn default_m_probe() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// The filter's model.
    #[serde(skip)]
    pub model: ModelSpec,
    /// The data-generating model.
    #[serde(skip)]
    pub star: ModelSpec,
    pub star_init: InitialDistribution,
    pub nu: InitialDistribution,
    pub nu_prime: InitialDistribution,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    /// Distances below this are left out of the rate fit.
    pub rate_floor: f64,
    pub bound: Option<BoundSettings>,
    pub quad: QuadratureSpec,
    pub search: Option<SearchSpec>,
    /// r-sequence horizons; empty means the dyadic schedule `4, 8, ... ≤ n`.
    pub rseq_schedule: Vec<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.n < 2 {
            return Err(Error::invalid(format!("horizon n = {} must be at least 2", self.n)));
        }
        if !(self.rate_floor > 0.0 && self.rate_floor < 1.0) {
            return Err(Error::invalid(format!("rate_floor = {} must lie in (0, 1)", self.rate_floor)));
        }
        if self.model.n_states() != self.star.n_states() {
            return Err(Error::invalid("filter and data-generating models live on different state spaces"));
        }
        if let Some(b) = &self.bound {
            if b.y_probe.is_empty() {
                return Err(Error::invalid("bound settings need at least one probe observation"));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> Result<Support> {
        let grid = match (self.grid, self.model.default_half_width()) {
            (Some(g), _) => Some(g),
            (None, Some(h)) => Some(GridSpec::symmetric(h, DEFAULT_GRID_CELLS)?),
            (None, None) => None,
        };
        Support::for_model(&self.model, grid)
    }

    pub fn schedule(&self) -> Vec<usize> {
        if !self.rseq_schedule.is_empty() {
            return self.rseq_schedule.iter().copied().filter(|&k| k <= self.n).collect();
        }
        std::iter::successors(Some(4usize), |k| k.checked_mul(2)).take_while(|&k| k <= self.n).collect()
    }

    fn search(&self) -> SearchSpec {
        self.search.unwrap_or_else(|| SearchSpec::for_model(&self.model))
    }
}

/// Least-squares slope of `ln tv(k)` over `k ∈ [n/2, n]`, where `n` is the horizon,
/// or the last step with `tv ≥ floor` if the distance fell below the floor earlier.
/// Steps with `tv < floor` are skipped; `-inf` when fewer than two points remain.
pub fn fit_rate(tv: &[f64], floor: f64) -> f64 {
    let Some(last) = tv.iter().rposition(|&t| t >= floor) else {
        return f64::NEG_INFINITY;
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = (last / 2..=last)
        .filter(|&k| tv[k] >= floor)
        .map(|k| (k as f64, tv[k].ln()))
        .unzip();
    ls_slope(&xs, &ys).unwrap_or(f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub rep: usize,
    pub tv: Vec<f64>,
    pub rate: f64,
    pub bound: Option<BoundReport>,
    pub conditions: Option<ConditionReport>,
    /// Steps where the corollary applies but `tv > total_clipped`.
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RSeqRow {
    pub n: usize,
    pub r0_nu: f64,
    pub r0_nuprime: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// Wilson intervals in the order `r0_nu, r0_nuprime, r1, r2, r3`.
    pub intervals: [(f64, f64); 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub replications: Vec<ReplicationResult>,
    pub median_rate: Option<f64>,
    pub iqr_rate: Option<f64>,
    pub r_seq: Vec<RSeqRow>,
    /// Every fitted rate is negative.
    pub forgetting_persists: bool,
    pub c: Option<LdSet>,
    pub d: Option<LdSet>,
}

impl ExperimentResult {
    pub fn empty() -> Self {
        ExperimentResult {
            replications: Vec::new(),
            median_rate: None,
            iqr_rate: None,
            r_seq: Vec::new(),
            forgetting_persists: false,
            c: None,
            d: None,
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.replications.iter().map(|r| r.rate).collect()
    }

    pub fn bound_violations(&self) -> usize {
        self.replications.iter().map(|r| r.bound_violations).sum()
    }
}

struct BoundContext {
    eval: UpsilonEvaluator,
    cfg: BoundConfig,
    c: LdSet,
}

fn bound_context(cfg: &ExperimentConfig, b: &BoundSettings) -> Result<BoundContext> {
    let eval = UpsilonEvaluator::new(&cfg.model, &cfg.search(), &cfg.quad)?;
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
    bc.validate()?;
    Ok(BoundContext { eval, cfg: bc, c })
}

fn one_replication(
    cfg: &ExperimentConfig,
    filter: &GridFilter,
    support: &Support,
    star_support: Option<&Support>,
    ctx: Option<&BoundContext>,
    rep: usize,
) -> Result<ReplicationResult> {
    let traj = simulate(&cfg.star, cfg.n, &cfg.star_init, star_support, cfg.seed, rep as u64)?;
    let tv: Vec<f64> = filter.run_two(&cfg.nu, &cfg.nu_prime, &traj.obs)?.iter().map(|r| r.tv).collect();
    let rate = fit_rate(&tv, cfg.rate_floor);
    let (bound, conditions, bound_violations) = match ctx {
        Some(ctx) => {
            let report = bounds::corollary_bound(
                &ctx.eval,
                support,
                &cfg.nu,
                &cfg.nu_prime,
                &traj.obs,
                &ctx.cfg,
                &ctx.c,
                &cfg.quad,
            )?;
            let viol = report
                .rows
                .iter()
                .filter(|r| r.applies && tv[r.n] > r.total_clipped)
                .count();
            let cond = bounds::check_conditions(&traj.obs, &ctx.eval, &ctx.cfg, &cfg.quad)?;
            (Some(report), Some(cond), viol)
        }
        None => (None, None, 0),
    };
    Ok(ReplicationResult {
        rep,
        tv,
        rate,
        bound,
        conditions,
        bound_violations,
    })
}

/// Replications run on the current rayon pool; results are collected in
/// replication order, so they do not depend on the pool size.
pub fn run_forgetting(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let support = cfg.support()?;
    let filter = GridFilter::new(&cfg.model, support.clone())?;
    let star_support = Support::for_model(&cfg.star, cfg.grid.or(match &support {
        Support::Grid(g) => Some(*g),
        Support::Finite(_) => None,
    }))?;
    let ctx = cfg.bound.as_ref().map(|b| bound_context(cfg, b)).transpose()?;
    let reps: Vec<ReplicationResult> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            one_replication(cfg, &filter, &support, Some(&star_support), ctx.as_ref(), rep)
                .map_err(|e| e.in_replication(rep))
        })
        .collect::<Result<_>>()?;
    let rates: Vec<f64> = reps.iter().map(|r| r.rate).collect();
    let mi = median_iqr(&rates);
    Ok(ExperimentResult {
        forgetting_persists: rates.iter().all(|&r| r < 0.0),
        median_rate: mi.map(|m| m.0),
        iqr_rate: mi.map(|m| m.1),
        replications: reps,
        r_seq: Vec::new(),
        c: ctx.as_ref().map(|c| c.c.clone()),
        d: ctx.map(|c| c.cfg.d),
    })
}

/// [`run_forgetting`] for a data-generating model that differs from the filter's;
/// `forgetting_persists` records whether every fitted rate is negative.
pub fn misspecification_study(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_forgetting(cfg)
}

/// Per-replication r-sequence events at the scheduled horizons.
struct Events {
    r0_nu: Vec<bool>,
    r0_nuprime: Vec<bool>,
    r1: Vec<bool>,
    r2: Vec<bool>,
    r3: Vec<bool>,
}

/// Monte Carlo frequencies of
/// `ln Φ_{ν,D}(Y_0, Y_1) ≤ -M0 n`, `Σ_{i≤n} ln Υ_X(Y_i) ≥ M1 n`,
/// `Σ_{i≤n} ln Ψ_D(Y_i) ≤ -M2 n` and `n⁻¹ Σ_{1≤i≤n} 1_K(Y_i) ≤ (1+γ)/2`
/// on the schedule, with `Y` simulated from the data-generating model.
pub fn estimate_r_sequences(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let b = cfg
        .bound
        .as_ref()
        .ok_or_else(|| Error::invalid("r-sequence estimation needs bound settings"))?;
    let support = cfg.support()?;
    let star_support = Support::for_model(&cfg.star, match &support {
        Support::Grid(g) => cfg.grid.or(Some(*g)),
        Support::Finite(_) => None,
    })?;
    let eval = UpsilonEvaluator::new(&cfg.model, &cfg.search(), &cfg.quad)?;
    let d = bounds::certify_ld_set(&cfg.model, &b.d, b.m_probe)?;
    let schedule = cfg.schedule();
    let horizon = schedule.last().copied().unwrap_or(0);
    let events: Vec<Events> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| -> Result<Events> {
            let run = || -> Result<Events> {
                let traj = simulate(&cfg.star, horizon, &cfg.star_init, Some(&star_support), cfg.seed, rep as u64)?;
                let y = &traj.obs;
                let phi0 = bounds::phi(&cfg.model, &support, &cfg.nu, &d, y[0], y[1], &cfg.quad)?;
                let phi1 = bounds::phi(&cfg.model, &support, &cfg.nu_prime, &d, y[0], y[1], &cfg.quad)?;
                let mut ups = Vec::with_capacity(y.len());
                let mut psi = Vec::with_capacity(y.len());
                for &yi in y {
                    ups.push(eval.log_upsilon(UpsilonRegion::All, yi)?);
                    psi.push(bounds::log_psi(&cfg.model, &d, yi, &cfg.quad)?);
                }
                let mut ev = Events {
                    r0_nu: Vec::new(),
                    r0_nuprime: Vec::new(),
                    r1: Vec::new(),
                    r2: Vec::new(),
                    r3: Vec::new(),
                };
                for &n in &schedule {
                    let nf = n as f64;
                    let su: f64 = ups[..=n].iter().sum();
                    let sp: f64 = psi[..=n].iter().sum();
                    let kc = y[1..=n].iter().filter(|&&v| b.k.contains(v)).count() as f64;
                    ev.r0_nu.push(phi0.log_value <= -b.m0 * nf);
                    ev.r0_nuprime.push(phi1.log_value <= -b.m0 * nf);
                    ev.r1.push(su >= b.m1 * nf);
                    ev.r2.push(sp <= -b.m2 * nf);
                    ev.r3.push(kc / nf <= (1.0 + b.gamma) / 2.0);
                }
                Ok(ev)
            };
            run().map_err(|e| e.in_replication(rep))
        })
        .collect::<Result<_>>()?;
    let reps = events.len();
    let freq = |pick: &dyn Fn(&Events) -> &Vec<bool>, j: usize| {
        let s = events.iter().filter(|e| pick(e)[j]).count();
        (s as f64 / reps as f64, wilson_interval(s, reps))
    };
    let r_seq = schedule
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let a = freq(&|e| &e.r0_nu, j);
            let b = freq(&|e| &e.r0_nuprime, j);
            let c = freq(&|e| &e.r1, j);
            let d = freq(&|e| &e.r2, j);
            let f = freq(&|e| &e.r3, j);
            RSeqRow {
                n,
                r0_nu: a.0,
                r0_nuprime: b.0,
                r1: c.0,
                r2: d.0,
                r3: f.0,
                intervals: [a.1, b.1, c.1, d.1, f.1],
            }
        })
        .collect();
    Ok(ExperimentResult {
        r_seq,
        d: Some(d),
        ..ExperimentResult::empty()
    })
}

/// Writes `tv_curves.csv`, `rates.csv`, `r_seq.csv`, `conditions.csv`, `bounds.csv`
/// and `summary.txt` into `dir`.
pub fn emit_report(result: &ExperimentResult, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let f = fmt_f64;
    let mut tv_rows = Vec::new();
    let mut rate_rows = Vec::new();
    let mut cond_rows = Vec::new();
    let mut bound_rows = Vec::new();
    for r in &result.replications {
        let rep = r.rep.to_string();
        for (n, t) in r.tv.iter().enumerate() {
            tv_rows.push(vec![rep.clone(), n.to_string(), f(*t)]);
        }
        rate_rows.push(vec![rep.clone(), f(r.rate)]);
        if let Some(c) = &r.conditions {
            for row in &c.rows {
                cond_rows.push(vec![
                    rep.clone(),
                    row.n.to_string(),
                    f(row.avg_k),
                    f(row.avg_log_upsilon),
                    f(row.avg_log_psi),
                ]);
            }
        }
        if let Some(b) = &r.bound {
            for row in &b.rows {
                bound_rows.push(vec![
                    rep.clone(),
                    row.n.to_string(),
                    f(row.log_term_geo),
                    f(row.log_term_ratio),
                    f(row.log_total),
                    f(row.total_clipped),
                    row.applies.to_string(),
                    f(r.tv[row.n]),
                ]);
            }
        }
    }
    write_csv(&dir.join("tv_curves.csv"), &["rep", "n", "tv"], &tv_rows)?;
    write_csv(&dir.join("rates.csv"), &["rep", "rate"], &rate_rows)?;
    write_csv(
        &dir.join("conditions.csv"),
        &["rep", "n", "avg_k", "avg_log_upsilon", "avg_log_psi"],
        &cond_rows,
    )?;
    write_csv(
        &dir.join("bounds.csv"),
        &["rep", "n", "log_term_geo", "log_term_ratio", "log_total", "total_clipped", "applies", "tv"],
        &bound_rows,
    )?;
    let rs: Vec<Vec<String>> = result
        .r_seq
        .iter()
        .map(|r| vec![r.n.to_string(), f(r.r0_nu), f(r.r0_nuprime), f(r.r1), f(r.r2), f(r.r3)])
        .collect();
    write_csv(&dir.join("r_seq.csv"), &["n", "r0_nu", "r0_nuprime", "r1", "r2", "r3"], &rs)?;
    write_text(&dir.join("summary.txt"), &summary_text(result))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_owned(), fmt_f64)
}

pub fn summary_text(result: &ExperimentResult) -> String {
    let mut s = String::new();
    if !result.replications.is_empty() || result.r_seq.is_empty() {
        let _ = writeln!(s, "replications: {}", result.replications.len());
        let _ = writeln!(s, "median_rate: {}", opt(result.median_rate));
        let _ = writeln!(s, "iqr_rate: {}", opt(result.iqr_rate));
        let _ = writeln!(s, "forgetting_persists: {}", result.forgetting_persists);
    }
    if let Some(c) = &result.c {
        let _ = writeln!(s, "C: {:?} eps_minus {} eps_plus {} rho {}", c.region, fmt_f64(c.eps_minus()), fmt_f64(c.eps_plus()), fmt_f64(c.rho()));
    }
    if let Some(d) = &result.d {
        let _ = writeln!(s, "D: {:?} eps_minus {} eps_plus {}", d.region, fmt_f64(d.eps_minus()), fmt_f64(d.eps_plus()));
    }
    if result.replications.iter().any(|r| r.bound.is_some()) {
        let _ = writeln!(s, "bound_violations: {}", result.bound_violations());
    }
    if !result.r_seq.is_empty() {
        let _ = writeln!(s, "r_seq horizons: {}", result.r_seq.len());
        for r in &result.r_seq {
            let _ = writeln!(s, "n = {}: r0_nu {} r0_nuprime {} r1 {} r2 {} r3 {}", r.n, r.r0_nu, r.r0_nuprime, r.r1, r.r2, r.r3);
        }
    }
    s
}
