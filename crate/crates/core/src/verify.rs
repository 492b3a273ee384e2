//! Exact and Monte Carlo checks of the forgetting-bound ingredients on small
//! finite-state models.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::bounds::{self, BoundConfig, LdRegion, LdSet, ObsSet, SearchSpec, UpsilonEvaluator};
use crate::error::{Error, Result};
use crate::grid::{GridFilter, InitialDistribution, Support};
use crate::model::{DriftFunction, Emission, FiniteStateParams, ModelKind, ModelSpec, QuadratureSpec};
use crate::rng::stream;
use crate::sim::simulate;

const MAX_STATES: usize = 8;
const MAX_HORIZON: usize = 25;

/// Pair chain of two independent copies of a finite chain, with `C̄ = C × C`.
#[derive(Debug, Clone)]
pub struct PairChainSpec {
    transition: Vec<Vec<f64>>,
    in_c: Vec<bool>,
    ld: Option<LdSet>,
}

fn check_size(m: usize, horizon: usize) -> Result<()> {
    if m > MAX_STATES {
        return Err(Error::TooLarge(format!("{m} states (limit {MAX_STATES})")));
    }
    if horizon > MAX_HORIZON {
        return Err(Error::TooLarge(format!("horizon {horizon} (limit {MAX_HORIZON})")));
    }
    Ok(())
}

fn finite_model(transition: &[Vec<f64>]) -> Result<ModelSpec> {
    let m = transition.len();
    ModelSpec::new(
        ModelKind::FiniteState(FiniteStateParams {
            transition: transition.to_vec(),
            emission: Emission::Gaussian { means: vec![0.0; m], sd: 1.0 },
        }),
        DriftFunction::One,
    )
}

impl PairChainSpec {
    /// `c` may be empty, in which case no joint visits are ever counted.
    pub fn new(transition: Vec<Vec<f64>>, c: &[usize]) -> Result<Self> {
        let m = transition.len();
        check_size(m, 0)?;
        let model = finite_model(&transition)?;
        let ld = if c.is_empty() {
            None
        } else {
            Some(bounds::certify_ld_set(&model, &LdRegion::states(c.to_vec()), 0)?)
        };
        let mut in_c = vec![false; m];
        for &s in c {
            in_c[s] = true;
        }
        Ok(PairChainSpec { transition, in_c, ld })
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    /// `Q̄[(x, x'), (z, z')] = Q(x, z) Q(x', z')`.
    pub fn product_entry(&self, from: (usize, usize), to: (usize, usize)) -> f64 {
        self.transition[from.0][to.0] * self.transition[from.1][to.1]
    }

    /// `ρ_C`; equal to 1 when `C` is empty (its powers are then never taken).
    pub fn rho(&self) -> f64 {
        self.ld.as_ref().map_or(1.0, LdSet::rho)
    }

    pub fn ld_set(&self) -> Option<&LdSet> {
        self.ld.as_ref()
    }

    fn in_cbar(&self, x: usize, xp: usize) -> bool {
        self.in_c[x] && self.in_c[xp]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDeltaResult {
    /// `Δ_n` for `n = 0..=N`.
    pub delta: Vec<f64>,
    /// `E_{ν⊗ν'}[Π ḡ_i ρ^{N_{C,n}}]` for `n = 0..=N`.
    pub rhs: Vec<f64>,
    /// `counts[n][k] = E_{ν⊗ν'}[Π ḡ_i 1{N_{C,n} = k}]`.
    pub counts: Vec<Vec<f64>>,
}

fn check_vectors(m: usize, nu: &[f64], nu_prime: &[f64], g_seq: &[Vec<f64>]) -> Result<()> {
    if nu.len() != m || nu_prime.len() != m {
        return Err(Error::invalid(format!("initial vectors must have {m} entries")));
    }
    if g_seq.is_empty() {
        return Err(Error::invalid("likelihood sequence is empty"));
    }
    if let Some(g) = g_seq.iter().find(|g| g.len() != m) {
        return Err(Error::invalid(format!("likelihood vector has {} entries, expected {m}", g.len())));
    }
    let ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
    if !ok(nu) || !ok(nu_prime) || !g_seq.iter().all(|g| ok(g)) {
        return Err(Error::invalid("negative or non-finite entries"));
    }
    Ok(())
}

/// Joint unnormalized forward recursion of the pair chain from `a ⊗ b`, returning
/// the signed first-coordinate marginal of `(a⊗b) - (b⊗a)` at every step.
fn signed_marginals(spec: &PairChainSpec, a: &[f64], b: &[f64], g_seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = spec.n_states();
    let init = |u: &[f64], v: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; m * m];
        for x in 0..m {
            for xp in 0..m {
                s[x * m + xp] = u[x] * v[xp] * g_seq[0][x] * g_seq[0][xp];
            }
        }
        s
    };
    let step = |s: &[f64], g: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m * m];
        for x in 0..m {
            for xp in 0..m {
                let w = s[x * m + xp];
                if w == 0.0 {
                    continue;
                }
                for z in 0..m {
                    for zp in 0..m {
                        out[z * m + zp] += w * spec.product_entry((x, xp), (z, zp));
                    }
                }
            }
        }
        for z in 0..m {
            for zp in 0..m {
                out[z * m + zp] *= g[z] * g[zp];
            }
        }
        out
    };
    let mut s1 = init(a, b);
    let mut s2 = init(b, a);
    let mut out = Vec::with_capacity(g_seq.len());
    for (n, g) in g_seq.iter().enumerate() {
        if n > 0 {
            s1 = step(&s1, g);
            s2 = step(&s2, g);
        }
        out.push((0..m).map(|x| (0..m).map(|xp| s1[x * m + xp] - s2[x * m + xp]).sum()).collect());
    }
    out
}

/// Exact `Δ_n = sup_A |(ν⊗ν')[ḡ_0 Q̄ ... ḡ_n 1_{A×X}] - (ν'⊗ν)[...]|` and the
/// visit-count bound `E_{ν⊗ν'}[Π ḡ_i ρ^{N_{C,n}}]`, by dynamic programming over
/// (pair state, count).
///
/// Both terms have the same total mass, so the supremum is half the L1 norm of
/// the signed marginal.
pub fn exact_delta(spec: &PairChainSpec, nu: &[f64], nu_prime: &[f64], g_seq: &[Vec<f64>]) -> Result<ExactDeltaResult> {
    let m = spec.n_states();
    check_size(m, g_seq.len().saturating_sub(1))?;
    check_vectors(m, nu, nu_prime, g_seq)?;
    let delta = signed_marginals(spec, nu, nu_prime, g_seq)
        .iter()
        .map(|s| 0.5 * s.iter().map(|v| v.abs()).sum::<f64>())
        .collect();

    let horizon = g_seq.len() - 1;
    let rho = spec.rho();
    // mass[k][x * m + x'] after each step; k ≤ n.
    let mut mass = vec![vec![0.0; m * m]; horizon + 1];
    for x in 0..m {
        for xp in 0..m {
            mass[0][x * m + xp] = nu[x] * nu_prime[xp] * g_seq[0][x] * g_seq[0][xp];
        }
    }
    let mut counts = Vec::with_capacity(horizon + 1);
    let mut rhs = Vec::with_capacity(horizon + 1);
    let record = |mass: &[Vec<f64>], n: usize, counts: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>| {
        let c: Vec<f64> = mass[..=n].iter().map(|v| v.iter().sum()).collect();
        rhs.push(c.iter().enumerate().map(|(k, w)| w * rho.powi(k as i32)).sum());
        counts.push(c);
    };
    record(&mass, 0, &mut counts, &mut rhs);
    for n in 1..=horizon {
        let g = &g_seq[n];
        let mut next = vec![vec![0.0; m * m]; horizon + 1];
        for k in 0..n {
            for x in 0..m {
                for xp in 0..m {
                    let w = mass[k][x * m + xp];
                    if w == 0.0 {
                        continue;
                    }
                    let from_c = spec.in_cbar(x, xp);
                    for z in 0..m {
                        for zp in 0..m {
                            let kk = k + usize::from(from_c && spec.in_cbar(z, zp));
                            next[kk][z * m + zp] += w * spec.product_entry((x, xp), (z, zp)) * g[z] * g[zp];
                        }
                    }
                }
            }
        }
        mass = next;
        record(&mass, n, &mut counts, &mut rhs);
    }
    Ok(ExactDeltaResult { delta, rhs, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideBySide {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// `E_ν[Π_{i≤n} g_i(X_i)]` against `(ε⁻_C)^{n-1} ν(g_0 Q g_1 1_C) Π_{i=2}^n λ_C(g_i 1_C)`
/// for `n = 1..=N`.
pub fn exact_denominator_bound(
    transition: &[Vec<f64>],
    nu: &[f64],
    c: &[usize],
    g_seq: &[Vec<f64>],
) -> Result<Vec<SideBySide>> {
    let m = transition.len();
    check_size(m, g_seq.len().saturating_sub(1))?;
    check_vectors(m, nu, nu, g_seq)?;
    let model = finite_model(transition)?;
    let ld = bounds::certify_ld_set(&model, &LdRegion::states(c.to_vec()), 0)?;
    let LdRegion::States { states } = &ld.region else { unreachable!() };
    let eps = ld.eps_minus();

    let mut alpha: Vec<f64> = (0..m).map(|x| nu[x] * g_seq[0][x]).collect();
    let mut out = Vec::with_capacity(g_seq.len().saturating_sub(1));
    let mut lambda_prod = 1.0;
    let mut phi_c = 0.0;
    for (n, g) in g_seq.iter().enumerate().skip(1) {
        if n == 1 {
            phi_c = (0..m)
                .map(|x| alpha[x] * states.iter().map(|&z| transition[x][z] * g[z]).sum::<f64>())
                .sum();
        } else {
            lambda_prod *= states.iter().map(|&z| g[z]).sum::<f64>() / states.len() as f64;
        }
        alpha = (0..m).map(|z| (0..m).map(|x| alpha[x] * transition[x][z]).sum::<f64>() * g[z]).collect();
        out.push(SideBySide {
            n,
            lhs: alpha.iter().sum(),
            rhs: eps.powi(n as i32 - 1) * phi_c * lambda_prod,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountingCheck {
    /// `M_n = Σ_{i<n} x_i`
    pub ones: usize,
    /// `N_n = Σ_{i<n} x_i x_{i+1}`
    pub pairs: usize,
    /// `2 × ((n+1)/2 + N_n/2)`, kept integral.
    pub twice_bound: usize,
    pub holds: bool,
}

impl CountingCheck {
    pub fn bound(&self) -> f64 {
        self.twice_bound as f64 / 2.0
    }
}

/// `M_n ≤ (n+1)/2 + N_n/2` on `bits`, read as zero beyond its end.
pub fn counting_lemma_check(bits: &[bool], n: usize) -> CountingCheck {
    let at = |i: usize| bits.get(i).copied().unwrap_or(false);
    let ones = (0..n).filter(|&i| at(i)).count();
    let pairs = (0..n).filter(|&i| at(i) && at(i + 1)).count();
    let twice_bound = n + 1 + pairs;
    CountingCheck {
        ones,
        pairs,
        twice_bound,
        holds: 2 * ones <= twice_bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactSupermartingale {
    pub x: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Exact `E_x[exp Σ_{k<n} |F_k(X_k)|]` against `V(x) e^{bn + Σ_k sup(|F_k| - W)}` for
/// every starting state, after checking `ln(QV/V) ≤ -W + b` state by state.
pub fn supermartingale_exact(
    transition: &[Vec<f64>],
    v: &[f64],
    w: &[f64],
    b: f64,
    f_seq: &[Vec<f64>],
) -> Result<Vec<ExactSupermartingale>> {
    let m = transition.len();
    finite_model(transition)?;
    if v.len() != m || w.len() != m || f_seq.iter().any(|f| f.len() != m) {
        return Err(Error::invalid(format!("V, W and every F_k need {m} entries")));
    }
    if v.iter().any(|&x| !(x >= 1.0)) || w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("need V ≥ 1 and W > 0"));
    }
    for x in 0..m {
        let qv: f64 = (0..m).map(|z| transition[x][z] * v[z]).sum();
        let lhs = (qv / v[x]).ln();
        if lhs > -w[x] + b + 1e-12 {
            return Err(Error::Precondition { x: x as f64, lhs, rhs: -w[x] + b });
        }
    }
    let n = f_seq.len();
    let mut tail = vec![1.0; m];
    for f in f_seq.iter().rev() {
        tail = (0..m)
            .map(|x| f[x].abs().exp() * (0..m).map(|z| transition[x][z] * tail[z]).sum::<f64>())
            .collect();
    }
    let excess: f64 = f_seq
        .iter()
        .map(|f| (0..m).map(|x| f[x].abs() - w[x]).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok((0..m)
        .map(|x| ExactSupermartingale {
            x,
            lhs: tail[x],
            rhs: v[x] * (b * n as f64 + excess).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupermartingaleMc {
    pub mc_lhs: f64,
    pub se: f64,
    pub rhs: f64,
    pub holds_within_band: bool,
}

/// Monte Carlo `E_x[exp Σ_{k<n} |F_k(X_k)|]` on a continuous model, `n = f_seq.len()`,
/// compared with `V(x) e^{bn + Σ_k sup(|F_k| - W)}`.
///
/// The drift precondition and the suprema are evaluated on `check_grid`.
/// Replication `r` uses stream `(seed, r)`.
#[allow(clippy::too_many_arguments)]
pub fn supermartingale_check(
    model: &ModelSpec,
    w: &dyn Fn(f64) -> f64,
    b: f64,
    f_seq: &[&dyn Fn(f64) -> f64],
    x0: f64,
    replications: usize,
    seed: u64,
    check_grid: &[f64],
    quad: &QuadratureSpec,
    precondition_tol: f64,
) -> Result<SupermartingaleMc> {
    if replications < 2 {
        return Err(Error::invalid("need at least two replications"));
    }
    for &x in check_grid {
        let lhs = model.qv_ratio(x, quad)?.ln();
        let wx = w(x);
        if !(wx > 0.0) {
            return Err(Error::Precondition { x, lhs: wx, rhs: 0.0 });
        }
        if lhs > -wx + b + precondition_tol {
            return Err(Error::Precondition { x, lhs, rhs: -wx + b });
        }
    }
    let n = f_seq.len();
    let excess: f64 = f_seq
        .iter()
        .map(|f| check_grid.iter().map(|&x| f(x).abs() - w(x)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    let rhs = model.drift_value(x0) * (b * n as f64 + excess).exp();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..replications {
        let mut x = x0;
        let mut acc = 0.0;
        for (k, f) in f_seq.iter().enumerate() {
            if k > 0 {
                x = model.sample_state(x, &mut stream(seed, r as u64, k as u64));
            }
            acc += f(x).abs();
        }
        let e = acc.exp();
        sum += e;
        sum_sq += e * e;
    }
    let r = replications as f64;
    let mean = sum / r;
    let var = ((sum_sq / r - mean * mean) * r / (r - 1.0)).max(0.0);
    let se = (var / r).sqrt();
    Ok(SupermartingaleMc {
        mc_lhs: mean,
        se,
        rhs,
        holds_within_band: mean + 3.0 * se <= rhs,
    })
}

/// A random finite-state instance: Dirichlet(1, ..., 1) rows, Dirichlet initial
/// laws and log-normal likelihood weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCase {
    pub transition: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub nu_prime: Vec<f64>,
    pub g_seq: Vec<Vec<f64>>,
    /// Nonempty random subset of the states.
    pub c: Vec<usize>,
}

pub(crate) fn dirichlet_ones<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Case `case` of the corpus with master seed `seed`.
pub fn random_case(seed: u64, case: u64, m: usize, horizon: usize) -> RandomCase {
    let mut rng = stream(seed, case, 0);
    let transition = (0..m).map(|_| dirichlet_ones(m, &mut rng)).collect();
    let nu = dirichlet_ones(m, &mut rng);
    let nu_prime = dirichlet_ones(m, &mut rng);
    let g_seq = (0..=horizon)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.exp()
                })
                .collect()
        })
        .collect();
    let mut c: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
    if c.is_empty() {
        c.push(rng.gen_range(0..m));
    }
    RandomCase {
        transition,
        nu,
        nu_prime,
        g_seq,
        c,
    }
}

/// One row of a verification log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRow {
    pub case: usize,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub rows: Vec<CaseRow>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.holds).count()
    }
}

/// Relative slack for comparing two exactly computed sides in floating point.
pub const EXACT_REL_TOL: f64 = 1e-12;

/// `Δ_n ≤ E[Π ḡ ρ^{N}]` over the random corpus.
pub fn prop51_suite(seed: u64, cases: usize, horizon: usize) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    for case in 0..cases {
        let rc = random_case(seed, case as u64, 3, horizon);
        let spec = PairChainSpec::new(rc.transition.clone(), &rc.c)?;
        let res = exact_delta(&spec, &rc.nu, &rc.nu_prime, &rc.g_seq)?;
        for (n, (d, r)) in res.delta.iter().zip(&res.rhs).enumerate() {
            rows.push(CaseRow { case, n, lhs: *d, rhs: *r, holds: *d <= r * (1.0 + EXACT_REL_TOL) });
        }
    }
    Ok(SuiteReport { suite: "prop51", rows })
}

/// `E_ν[Π g_i] ≥ (ε⁻_C)^{n-1} ν(g_0 Q g_1 1_C) Π λ_C(g_i 1_C)` over the random corpus.
pub fn prop52_suite(seed: u64, cases: usize, horizon: usize) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    for case in 0..cases {
        let rc = random_case(seed, case as u64, 3, horizon);
        for s in exact_denominator_bound(&rc.transition, &rc.nu, &rc.c, &rc.g_seq)? {
            rows.push(CaseRow { case, n: s.n, lhs: s.lhs, rhs: s.rhs, holds: s.lhs >= s.rhs * (1.0 - EXACT_REL_TOL) });
        }
    }
    Ok(SuiteReport { suite: "prop52", rows })
}

/// Every binary word of length `len`, every `n ≤ len`; `case` is the word as an integer.
pub fn lemma_a1_suite(len: usize) -> SuiteReport {
    let mut rows = Vec::new();
    for word in 0u64..(1 << len) {
        let bits: Vec<bool> = (0..len).map(|i| word & (1 << i) != 0).collect();
        for n in 1..=len {
            let c = counting_lemma_check(&bits, n);
            rows.push(CaseRow { case: word as usize, n, lhs: c.ones as f64, rhs: c.bound(), holds: c.holds });
        }
    }
    SuiteReport { suite: "lemmaA1", rows }
}

/// Random `(V, W, b, F)` satisfying the drift precondition on random 3-state chains.
/// `b` is the smallest admissible constant plus a random margin.
pub fn lemma_a2_exact_suite(seed: u64, cases: usize, horizon: usize) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    for case in 0..cases {
        let mut rng = stream(seed, case as u64, 1);
        let m = 3;
        let p: Vec<Vec<f64>> = (0..m).map(|_| dirichlet_ones(m, &mut rng)).collect();
        let v: Vec<f64> = (0..m).map(|_| { let e: f64 = Exp1.sample(&mut rng); 1.0 + 3.0 * e }).collect();
        let w: Vec<f64> = (0..m).map(|_| { let e: f64 = Exp1.sample(&mut rng); 0.05 + e }).collect();
        let b = (0..m)
            .map(|x| ((0..m).map(|z| p[x][z] * v[z]).sum::<f64>() / v[x]).ln() + w[x])
            .fold(f64::NEG_INFINITY, f64::max)
            + 0.1 * rng.gen::<f64>();
        let f_seq: Vec<Vec<f64>> = (0..horizon)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    })
                    .collect()
            })
            .collect();
        for r in supermartingale_exact(&p, &v, &w, b, &f_seq)? {
            rows.push(CaseRow { case, n: r.x, lhs: r.lhs, rhs: r.rhs, holds: r.lhs <= r.rhs * (1.0 + EXACT_REL_TOL) });
        }
    }
    Ok(SuiteReport { suite: "lemmaA2", rows })
}

/// Monte Carlo check on LGSSM(φ = 0.9, σ = 1) with `V = e^{0.5|x|}`,
/// `W = b - ln(QV/V)` tabulated on a grid, `b = sup ln(QV/V) + 0.1`, `F_k = 0.1 W`,
/// `n = 20` steps from `x = 0`.
pub fn lemma_a2_mc(seed: u64, replications: usize) -> Result<SupermartingaleMc> {
    let model = ModelSpec::new(
        ModelKind::Lgssm(crate::model::LgssmParams { phi: 0.9, sigma: 1.0, beta: 1.0, h0: 1.0 }),
        DriftFunction::ExpAbs { c: 0.5 },
    )?;
    let quad = QuadratureSpec::default();
    let ev = UpsilonEvaluator::new(&model, &SearchSpec::for_model(&model), &quad)?;
    let grid: Vec<f64> = (0..=800).map(|k| -20.0 + 0.05 * k as f64).collect();
    let sup = grid.iter().map(|&x| ev.log_ratio(x)).fold(f64::NEG_INFINITY, f64::max);
    let b = sup + 0.1;
    let w = |x: f64| b - ev.log_ratio(x);
    let f = |x: f64| 0.1 * w(x);
    let f_seq: Vec<&dyn Fn(f64) -> f64> = vec![&f; 20];
    supermartingale_check(&model, &w, b, &f_seq, 0.0, replications, seed, &grid, &quad, 1e-6)
}

/// Exact filter distance against the assembled bounds on a random finite model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryCase {
    pub tv: Vec<f64>,
    pub lemma: bounds::BoundReport,
    pub corollary: bounds::BoundReport,
}

/// Bound settings used by [`corollary_case`].
pub const COROLLARY_BETA: f64 = 0.2;
pub const COROLLARY_GAMMA: f64 = 0.6;
pub const COROLLARY_ETA: f64 = 0.5;

/// Corpus case `case` (transition and initial laws of [`random_case`]) with a
/// random 4-symbol emission; observations simulated from the model itself.
/// `C` comes from the local Doeblin search over the whole alphabet and `D` is the
/// whole state set. Odd cases use `V = e^{0.3|x|}` on the state indices.
pub fn corollary_case(seed: u64, case: u64, horizon: usize) -> Result<CorollaryCase> {
    let m = 3;
    let k = 4;
    let rc = random_case(seed, case, m, 0);
    let mut rng = stream(seed, case, 2);
    let transition = rc.transition;
    let probs: Vec<Vec<f64>> = (0..m).map(|_| dirichlet_ones(k, &mut rng)).collect();
    let nu = InitialDistribution::FiniteVector { p: rc.nu };
    let nu_prime = InitialDistribution::FiniteVector { p: rc.nu_prime };
    let drift = if case % 2 == 1 { DriftFunction::ExpAbs { c: 0.3 } } else { DriftFunction::One };
    let model = ModelSpec::new(
        ModelKind::FiniteState(FiniteStateParams { transition, emission: Emission::Discrete { probs } }),
        drift,
    )?;
    let support = Support::Finite(m);
    let traj = simulate(&model, horizon, &nu, Some(&support), seed, case)?;
    let quad = QuadratureSpec::default();
    let ev = UpsilonEvaluator::new(&model, &SearchSpec::for_model(&model), &quad)?;
    let alphabet: Vec<f64> = (0..k).map(|s| s as f64).collect();
    let c = bounds::find_ld_set_for_eta(&ev, COROLLARY_ETA, &ObsSet::All, &alphabet, m as f64, 0)?;
    let d = bounds::certify_ld_set(&model, &LdRegion::states((0..m).collect()), 0)?;
    let cfg = BoundConfig {
        beta: COROLLARY_BETA,
        gamma: COROLLARY_GAMMA,
        eta: COROLLARY_ETA,
        k: ObsSet::All,
        d: d.clone(),
        m0: 1.0,
        m1: 1.0,
        m2: 1.0,
    };
    let tv = GridFilter::new(&model, support.clone())?
        .run_two(&nu, &nu_prime, &traj.obs)?
        .iter()
        .map(|r| r.tv)
        .collect();
    let lemma = bounds::lemma53_bound(&ev, &support, &nu, &nu_prime, &traj.obs, COROLLARY_BETA, &c, &d, &quad)?;
    let corollary = bounds::corollary_bound(&ev, &support, &nu, &nu_prime, &traj.obs, &cfg, &c, &quad)?;
    Ok(CorollaryCase { tv, lemma, corollary })
}

/// `tv(n) ≤ total(n)` wherever the corollary applies; `lhs = tv`, `rhs = total`.
pub fn corollary_suite(seed: u64, cases: usize, horizon: usize) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    for case in 0..cases {
        let cc = corollary_case(seed, case as u64, horizon)?;
        for row in cc.corollary.rows.iter().filter(|r| r.applies) {
            let tv = cc.tv[row.n];
            rows.push(CaseRow { case, n: row.n, lhs: tv, rhs: row.total_clipped, holds: tv <= row.total_clipped * (1.0 + EXACT_REL_TOL) });
        }
    }
    Ok(SuiteReport { suite: "corollary", rows })
}
