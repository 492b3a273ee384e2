//! Deterministic grid filter and total-variation distance between filters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, normal_log_pdf};
use crate::model::{categorical, ModelSpec};

/// Uniform midpoint grid: `m` cells of width `(hi - lo) / m`, nodes at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub m: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, m: usize) -> Result<Self> {
        let g = GridSpec { lo, hi, m };
        g.validate()?;
        Ok(g)
    }

    pub fn symmetric(half_width: f64, m: usize) -> Result<Self> {
        Self::new(-half_width, half_width, m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::invalid(format!("grid bounds [{}, {}] are not an interval", self.lo, self.hi)));
        }
        if self.m < 16 {
            return Err(Error::invalid(format!("grid needs at least 16 cells, got {}", self.m)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.m as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }
}

/// The state set a filter lives on.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Grid(GridSpec),
    Finite(usize),
}

impl Support {
    /// The natural support of `model`: its state set if finite, else `grid`.
    pub fn for_model(model: &ModelSpec, grid: Option<GridSpec>) -> Result<Self> {
        let s = match (model.n_states(), grid) {
            (Some(m), _) => Support::Finite(m),
            (None, Some(g)) => Support::Grid(g),
            (None, None) => return Err(Error::invalid("continuous model needs a grid")),
        };
        s.check_model(model)?;
        Ok(s)
    }

    pub fn check_model(&self, model: &ModelSpec) -> Result<()> {
        match (self, model.n_states()) {
            (Support::Finite(m), Some(k)) if *m == k => Ok(()),
            (Support::Grid(g), None) => g.validate(),
            _ => Err(Error::invalid(format!("support does not match the {} model", model.kind_name()))),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Support::Grid(g) => g.m,
            Support::Finite(m) => *m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        match self {
            Support::Grid(g) => g.node(i),
            Support::Finite(_) => i as f64,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Reference measure weight of one cell.
    pub fn cell_weight(&self) -> f64 {
        match self {
            Support::Grid(g) => g.width(),
            Support::Finite(_) => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDistribution {
    /// Unnormalized density values, one per grid cell.
    GridDensity { values: Vec<f64> },
    Gaussian { mean: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
    PointMassAt { cell: usize },
    /// Probability vector over a finite state set.
    FiniteVector { p: Vec<f64> },
}

impl InitialDistribution {
    /// Normalized log-probabilities of each support point.
    pub fn log_masses(&self, support: &Support) -> Result<Vec<f64>> {
        let m = support.len();
        let raw: Vec<f64> = match self {
            InitialDistribution::GridDensity { values } | InitialDistribution::FiniteVector { p: values } => {
                let want_grid = matches!(self, InitialDistribution::GridDensity { .. });
                if want_grid != matches!(support, Support::Grid(_)) {
                    return Err(Error::invalid(if want_grid {
                        "grid_density needs a grid support"
                    } else {
                        "finite_vector needs a finite state set"
                    }));
                }
                if values.len() != m {
                    return Err(Error::invalid(format!(
                        "initial distribution has {} values but the support has {m} points",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::invalid("initial distribution has a negative or non-finite value"));
                }
                values.iter().map(|v| v.ln()).collect()
            }
            InitialDistribution::Gaussian { mean, sd } => {
                if !matches!(support, Support::Grid(_)) {
                    return Err(Error::invalid("gaussian initial distribution needs a grid support"));
                }
                if !(*sd > 0.0 && mean.is_finite()) {
                    return Err(Error::invalid(format!("gaussian initial distribution N({mean}, {sd}^2) is invalid")));
                }
                (0..m).map(|i| normal_log_pdf(support.node(i), *mean, *sd)).collect()
            }
            InitialDistribution::Uniform { a, b } => {
                if !(a < b) {
                    return Err(Error::invalid(format!("uniform initial distribution on [{a}, {b}] is empty")));
                }
                (0..m)
                    .map(|i| {
                        let x = support.node(i);
                        if x >= *a && x <= *b {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect()
            }
            InitialDistribution::PointMassAt { cell } => {
                if *cell >= m {
                    return Err(Error::invalid(format!("point mass at cell {cell} outside support of {m} points")));
                }
                (0..m).map(|i| if i == *cell { 0.0 } else { f64::NEG_INFINITY }).collect()
            }
        };
        let total = log_sum_exp(&raw);
        if !total.is_finite() {
            return Err(Error::invalid("initial distribution has no mass on the support"));
        }
        Ok(raw.into_iter().map(|l| l - total).collect())
    }

    pub fn masses(&self, support: &Support) -> Result<Vec<f64>> {
        Ok(self.log_masses(support)?.into_iter().map(f64::exp).collect())
    }

    /// Draw an initial state. Grid-indexed forms need `support`.
    pub fn sample<R: Rng + ?Sized>(&self, support: Option<&Support>, rng: &mut R) -> Result<f64> {
        match self {
            InitialDistribution::Gaussian { mean, sd } => {
                let e: f64 = StandardNormal.sample(rng);
                Ok(mean + sd * e)
            }
            InitialDistribution::Uniform { a, b } if support.is_none() || matches!(support, Some(Support::Grid(_))) => {
                if !(a < b) {
                    return Err(Error::invalid(format!("uniform initial distribution on [{a}, {b}] is empty")));
                }
                Ok(a + (b - a) * rng.gen::<f64>())
            }
            _ => {
                let support = support.ok_or_else(|| Error::invalid("this initial distribution needs a support to sample"))?;
                let p = self.masses(support)?;
                Ok(support.node(categorical(&p, rng)))
            }
        }
    }
}

/// Discretized transition kernel `K[i][j] = q(x_i, x_j) * cell weight`, stored as
/// per-row bands where entries are below 1e-300.
#[derive(Debug, Clone)]
pub struct TransitionOperator {
    bands: Vec<(usize, Vec<f64>)>,
    m: usize,
}

const LOG_BAND_CUTOFF: f64 = -690.0;

impl TransitionOperator {
    pub fn new(model: &ModelSpec, support: &Support) -> Result<Self> {
        support.check_model(model)?;
        let m = support.len();
        let lw = support.cell_weight().ln();
        let nodes = support.nodes();
        let mut bands = Vec::with_capacity(m);
        for &x in &nodes {
            let row: Vec<f64> = nodes.iter().map(|&xn| model.log_q(x, xn) + lw).collect();
            let first = row.iter().position(|&l| l > LOG_BAND_CUTOFF);
            match first {
                None => bands.push((0, Vec::new())),
                Some(a) => {
                    let b = row.iter().rposition(|&l| l > LOG_BAND_CUTOFF).unwrap() + 1;
                    bands.push((a, row[a..b].iter().map(|l| l.exp()).collect()));
                }
            }
        }
        Ok(TransitionOperator { bands, m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// `out = w K` (row vector times kernel). Summation order is fixed.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let (start, vals) = &self.bands[i];
            for (o, k) in out[*start..*start + vals.len()].iter_mut().zip(vals) {
                *o += wi * k;
            }
        }
    }

    pub fn row_mass(&self, i: usize) -> f64 {
        self.bands[i].1.iter().sum()
    }
}

/// Filtering distribution as normalized log-weights on a support.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub support: Support,
    pub logw: Vec<f64>,
    /// Accumulated log normalizer `ln ν[g_0 Q g_1 ... Q g_n]`.
    pub log_z: f64,
    pub n: usize,
}

impl FilterState {
    pub fn weights(&self) -> Vec<f64> {
        self.logw.iter().map(|l| l.exp()).collect()
    }

    pub fn mean_var(&self) -> (f64, f64) {
        let w = self.weights();
        let mean: f64 = w.iter().enumerate().map(|(i, wi)| wi * self.support.node(i)).sum();
        let var: f64 = w
            .iter()
            .enumerate()
            .map(|(i, wi)| {
                let d = self.support.node(i) - mean;
                wi * d * d
            })
            .sum();
        (mean, var)
    }
}

pub fn tv_distance(a: &FilterState, b: &FilterState) -> Result<f64> {
    if a.support != b.support {
        return Err(Error::invalid("filters live on different supports"));
    }
    let s: f64 = a.logw.iter().zip(&b.logw).map(|(x, y)| (x.exp() - y.exp()).abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvRecord {
    pub n: usize,
    pub tv: f64,
    pub log_z_nu: f64,
    pub log_z_nuprime: f64,
}

/// Reusable filter for one model on one support.
#[derive(Debug, Clone)]
pub struct GridFilter {
    model: ModelSpec,
    support: Support,
    op: TransitionOperator,
}

fn normalize_in_place(lp: &mut [f64], step: usize) -> Result<f64> {
    let lse = log_sum_exp(lp);
    if !lse.is_finite() {
        return Err(Error::DegenerateFilter {
            step,
            detail: format!("normalizer is {lse}"),
        });
    }
    lp.iter_mut().for_each(|l| *l -= lse);
    Ok(lse)
}

impl GridFilter {
    pub fn new(model: &ModelSpec, support: Support) -> Result<Self> {
        let op = TransitionOperator::new(model, &support)?;
        Ok(GridFilter {
            model: model.clone(),
            support,
            op,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn operator(&self) -> &TransitionOperator {
        &self.op
    }

    pub fn log_likelihoods(&self, y: f64) -> Result<Vec<f64>> {
        self.model.check_observation(y)?;
        Ok((0..self.support.len()).map(|i| self.model.log_g(self.support.node(i), y)).collect())
    }

    pub fn init(&self, init: &InitialDistribution, y0: f64) -> Result<FilterState> {
        let lg = self.log_likelihoods(y0)?;
        let mut lp: Vec<f64> = init.log_masses(&self.support)?.iter().zip(&lg).map(|(a, b)| a + b).collect();
        let log_z = normalize_in_place(&mut lp, 0)?;
        Ok(FilterState {
            support: self.support.clone(),
            logw: lp,
            log_z,
            n: 0,
        })
    }

    pub fn step(&self, state: &FilterState, y: f64) -> Result<FilterState> {
        let lg = self.log_likelihoods(y)?;
        Ok(self.step_with(state, &lg)?.0)
    }

    /// One predict/update step given precomputed log-likelihoods; also returns the
    /// log of this step's normalizer.
    fn step_with(&self, state: &FilterState, lg: &[f64]) -> Result<(FilterState, f64)> {
        if state.support != self.support {
            return Err(Error::invalid("filter state lives on a different support"));
        }
        let max = state.logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = state.logw.iter().map(|l| (l - max).exp()).collect();
        let mut pred = vec![0.0; w.len()];
        self.op.apply(&w, &mut pred);
        let mut lp: Vec<f64> = pred.iter().zip(lg).map(|(p, g)| p.ln() + max + g).collect();
        let step = state.n + 1;
        let lse = normalize_in_place(&mut lp, step)?;
        Ok((
            FilterState {
                support: self.support.clone(),
                logw: lp,
                log_z: state.log_z + lse,
                n: step,
            },
            lse,
        ))
    }

    /// Run filters from `nu` and `nu_prime` over `obs` and record their total-variation
    /// distance at every step.
    ///
    /// The signed difference of the two filters is propagated by its own linear
    /// recursion in scaled form, so distances far below machine epsilon relative to
    /// the weights stay resolvable.
    pub fn run_two(
        &self,
        nu: &InitialDistribution,
        nu_prime: &InitialDistribution,
        obs: &[f64],
    ) -> Result<Vec<TvRecord>> {
        let Some((&y0, rest)) = obs.split_first() else {
            return Err(Error::invalid("observation sequence is empty"));
        };
        let mut p = self.init(nu, y0)?;
        let mut q = self.init(nu_prime, y0)?;
        let mut diff = ScaledVector::from_difference(&p.logw, &q.logw);
        let mut out = Vec::with_capacity(obs.len());
        out.push(TvRecord {
            n: 0,
            tv: diff.half_l1(),
            log_z_nu: p.log_z,
            log_z_nuprime: q.log_z,
        });
        let m = self.support.len();
        let mut u = vec![0.0; m];
        for &y in rest {
            let lg = self.log_likelihoods(y)?;
            let (p_next, lse_p) = self.step_with(&p, &lg)?;
            let (q_next, _) = self.step_with(&q, &lg)?;
            if diff.log_scale > f64::NEG_INFINITY {
                // d' = [g (d K) - q' <g, d K>] / Z_p
                let lmax = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                self.op.apply(&diff.dir, &mut u);
                let v: Vec<f64> = u.iter().zip(&lg).map(|(ui, l)| ui * (l - lmax).exp()).collect();
                let sv: f64 = v.iter().sum();
                let next: Vec<f64> = v.iter().zip(&q_next.logw).map(|(vi, lq)| vi - lq.exp() * sv).collect();
                diff = ScaledVector::new(next, diff.log_scale - (lse_p - lmax));
            }
            p = p_next;
            q = q_next;
            out.push(TvRecord {
                n: p.n,
                tv: diff.half_l1(),
                log_z_nu: p.log_z,
                log_z_nuprime: q.log_z,
            });
        }
        Ok(out)
    }
}

/// `exp(log_scale) * dir` with `max |dir| = 1` (or `dir = 0`, `log_scale = -inf`).
#[derive(Debug, Clone)]
struct ScaledVector {
    dir: Vec<f64>,
    log_scale: f64,
}

impl ScaledVector {
    fn new(mut v: Vec<f64>, log_scale: f64) -> Self {
        let s = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if s == 0.0 || !s.is_finite() || log_scale == f64::NEG_INFINITY {
            v.iter_mut().for_each(|x| *x = 0.0);
            return ScaledVector {
                dir: v,
                log_scale: f64::NEG_INFINITY,
            };
        }
        v.iter_mut().for_each(|x| *x /= s);
        ScaledVector {
            dir: v,
            log_scale: log_scale + s.ln(),
        }
    }

    fn from_difference(a: &[f64], b: &[f64]) -> Self {
        Self::new(a.iter().zip(b).map(|(x, y)| x.exp() - y.exp()).collect(), 0.0)
    }

    fn half_l1(&self) -> f64 {
        if self.log_scale == f64::NEG_INFINITY {
            return 0.0;
        }
        let s: f64 = self.dir.iter().map(|x| x.abs()).sum();
        (0.5 * s * self.log_scale.exp()).clamp(0.0, 1.0)
    }
}

pub fn init_filter(model: &ModelSpec, support: &Support, init: &InitialDistribution, y0: f64) -> Result<FilterState> {
    support.check_model(model)?;
    let lg: Vec<f64> = {
        model.check_observation(y0)?;
        (0..support.len()).map(|i| model.log_g(support.node(i), y0)).collect()
    };
    let mut lp: Vec<f64> = init.log_masses(support)?.iter().zip(&lg).map(|(a, b)| a + b).collect();
    let log_z = normalize_in_place(&mut lp, 0)?;
    Ok(FilterState {
        support: support.clone(),
        logw: lp,
        log_z,
        n: 0,
    })
}

/// Single step without a cached kernel; prefer [`GridFilter::step`] in loops.
pub fn filter_step(state: &FilterState, model: &ModelSpec, y: f64) -> Result<FilterState> {
    GridFilter::new(model, state.support.clone())?.step(state, y)
}

pub fn run_two_filters(
    model: &ModelSpec,
    support: &Support,
    nu: &InitialDistribution,
    nu_prime: &InitialDistribution,
    obs: &[f64],
) -> Result<Vec<TvRecord>> {
    GridFilter::new(model, support.clone())?.run_two(nu, nu_prime, obs)
}
