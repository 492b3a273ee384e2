//! Local Doeblin sets and the pathwise forgetting bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{InitialDistribution, Support};
use crate::math::{golden_max, log_add_exp, log_sum_exp, normal_log_pdf, std_normal_cdf, LN_2PI};
use crate::model::{ModelKind, ModelSpec, QuadratureSpec};

/// Candidate local Doeblin region: an interval for continuous models, a state subset
/// for finite ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum LdRegion {
    Interval { lo: f64, hi: f64 },
    States { states: Vec<usize> },
}

impl LdRegion {
    pub fn symmetric(radius: f64) -> Self {
        LdRegion::Interval { lo: -radius, hi: radius }
    }

    pub fn states(mut states: Vec<usize>) -> Self {
        states.sort_unstable();
        states.dedup();
        LdRegion::States { states }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            LdRegion::Interval { lo, hi } => x >= *lo && x <= *hi,
            LdRegion::States { states } => x >= 0.0 && x.fract() == 0.0 && states.binary_search(&(x as usize)).is_ok(),
        }
    }

    /// Mass of the region under the unnormalized reference measure (length or count).
    pub fn measure(&self) -> f64 {
        match self {
            LdRegion::Interval { lo, hi } => hi - lo,
            LdRegion::States { states } => states.len() as f64,
        }
    }

    fn check_for(&self, model: &ModelSpec) -> Result<()> {
        match (self, model.n_states()) {
            (LdRegion::Interval { lo, hi }, None) => {
                if lo.is_finite() && hi.is_finite() && lo < hi {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("interval [{lo}, {hi}] is empty")))
                }
            }
            (LdRegion::States { states }, Some(m)) => {
                if states.is_empty() {
                    Err(Error::invalid("state subset is empty"))
                } else if let Some(s) = states.iter().find(|&&s| s >= m) {
                    Err(Error::invalid(format!("state {s} outside 0..{m}")))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::invalid(format!("region kind does not fit the {} model", model.kind_name()))),
        }
    }
}

/// A certified local Doeblin set: `ε⁻ λ_C ≤ Q(x, . ∩ C) ≤ ε⁺ λ_C` for `x ∈ C`,
/// with `λ_C` the normalized reference measure on `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdSet {
    pub region: LdRegion,
    pub log_eps_minus: f64,
    pub log_eps_plus: f64,
}

impl LdSet {
    pub fn eps_minus(&self) -> f64 {
        self.log_eps_minus.exp()
    }

    pub fn eps_plus(&self) -> f64 {
        self.log_eps_plus.exp()
    }

    pub fn lambda_norm(&self) -> f64 {
        self.region.measure()
    }

    pub fn rho(&self) -> f64 {
        rho(self)
    }

    /// `ln ρ`, accurate when `ρ` is within rounding of 1.
    pub fn log_rho(&self) -> f64 {
        let r2 = 2.0 * (self.log_eps_minus - self.log_eps_plus);
        if r2 < -std::f64::consts::LN_2 {
            (-r2.exp()).ln_1p()
        } else {
            (-r2.exp_m1()).ln()
        }
    }
}

/// Contraction coefficient `1 - (ε⁻/ε⁺)²`.
pub fn rho(ld: &LdSet) -> f64 {
    -(2.0 * (ld.log_eps_minus - ld.log_eps_plus)).exp_m1()
}

/// Certify `region` as a local Doeblin set.
///
/// Finite models: exact extremization of the transition matrix on `C × C`.
/// Gaussian kernels: the density of `N(m(x), s²)` at `x'` is extremal at the
/// nearest and farthest offsets between the range of `m` over `C` and `C` itself.
/// That range comes from the endpoints when `m` is affine and from an
/// `m_probe`-point lattice otherwise.
pub fn certify_ld_set(model: &ModelSpec, region: &LdRegion, m_probe: usize) -> Result<LdSet> {
    region.check_for(model)?;
    let (lmin, lmax) = match (region, model.finite()) {
        (LdRegion::States { states }, Some(p)) => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in states {
                for &j in states {
                    lo = lo.min(p.transition[i][j]);
                    hi = hi.max(p.transition[i][j]);
                }
            }
            if lo <= 0.0 {
                return Err(Error::NotCertifiable(format!("zero transition probability inside {states:?}")));
            }
            (lo.ln(), hi.ln())
        }
        (LdRegion::Interval { lo, hi }, None) => {
            let (mmin, mmax) = mean_range(model, *lo, *hi, m_probe.max(2));
            let s = model.kernel(*lo).expect("continuous model").1;
            let near = if mmax < *lo {
                lo - mmax
            } else if mmin > *hi {
                mmin - hi
            } else {
                0.0
            };
            let far = (mmax - lo).max(hi - mmin);
            (normal_log_pdf(far, 0.0, s), normal_log_pdf(near, 0.0, s))
        }
        _ => unreachable!("checked by check_for"),
    };
    let lm = region.measure().ln();
    let ld = LdSet {
        region: region.clone(),
        log_eps_minus: lm + lmin,
        log_eps_plus: lm + lmax,
    };
    if !ld.log_eps_minus.is_finite() {
        return Err(Error::NotCertifiable(format!("lower constant vanishes on {region:?}")));
    }
    Ok(ld)
}

fn mean_range(model: &ModelSpec, lo: f64, hi: f64, m_probe: usize) -> (f64, f64) {
    let mean = |x: f64| model.kernel(x).expect("continuous model").0;
    let pts: Vec<f64> = if model.kernel_mean_is_affine() {
        vec![mean(lo), mean(hi)]
    } else {
        (0..m_probe).map(|k| mean(lo + (hi - lo) * k as f64 / (m_probe - 1) as f64)).collect()
    };
    let mmin = pts.iter().copied().fold(f64::INFINITY, f64::min);
    let mmax = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mmin, mmax)
}

/// Brute-force `(ε⁻, ε⁺)` over an `m_probe × m_probe` lattice of `C × C`
/// (endpoints included). Used to cross-check [`certify_ld_set`].
pub fn lattice_eps(model: &ModelSpec, lo: f64, hi: f64, m_probe: usize) -> Result<(f64, f64)> {
    LdRegion::Interval { lo, hi }.check_for(model)?;
    let m_probe = m_probe.max(2);
    let pts: Vec<f64> = (0..m_probe).map(|k| lo + (hi - lo) * k as f64 / (m_probe - 1) as f64).collect();
    let mut qmin = f64::INFINITY;
    let mut qmax = f64::NEG_INFINITY;
    for &x in &pts {
        for &xn in &pts {
            let l = model.log_q(x, xn);
            qmin = qmin.min(l);
            qmax = qmax.max(l);
        }
    }
    let w = hi - lo;
    Ok((w * qmin.exp(), w * qmax.exp()))
}

/// Where to look for suprema of `g(x, y) QV(x)/V(x)` on continuous models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    /// The search runs over `[-half_width, half_width]`.
    pub half_width: f64,
    /// Lattice resolution of the coarse scan.
    pub nodes: usize,
}

impl SearchSpec {
    /// At least forty, and at least eight stationary standard deviations.
    pub fn for_model(model: &ModelSpec) -> Self {
        let l = model.default_half_width().unwrap_or(40.0).max(40.0);
        SearchSpec {
            half_width: l,
            nodes: (100.0 * l) as usize + 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum UpsilonRegion<'a> {
    All,
    Complement(&'a LdRegion),
}

/// Evaluates `Υ_A(y) = sup_{x ∈ A} g(x, y) QV(x)/V(x)`.
///
/// For continuous models `ln QV` is tabulated once on the search lattice and
/// interpolated with Catmull-Rom cubics; the kink of `V` is handled exactly.
#[derive(Debug, Clone)]
pub struct UpsilonEvaluator {
    model: ModelSpec,
    table: Table,
}

#[derive(Debug, Clone)]
enum Table {
    Finite(Vec<f64>),
    Continuous { lo: f64, h: f64, log_qv: Option<Vec<f64>> },
}

impl UpsilonEvaluator {
    pub fn new(model: &ModelSpec, search: &SearchSpec, quad: &QuadratureSpec) -> Result<Self> {
        let table = if let Some(m) = model.n_states() {
            let mut v = Vec::with_capacity(m);
            for i in 0..m {
                v.push(model.qv_ratio(i as f64, quad)?.ln());
            }
            Table::Finite(v)
        } else {
            if !(search.half_width > 0.0 && search.nodes >= 3) {
                return Err(Error::invalid("sup search needs a positive half-width and at least 3 nodes"));
            }
            let lo = -search.half_width;
            let h = 2.0 * search.half_width / (search.nodes - 1) as f64;
            let log_qv = if model.drift.is_constant() {
                None
            } else {
                let mut v = Vec::with_capacity(search.nodes + 2);
                // One guard node per side for the cubic stencil.
                for k in 0..search.nodes + 2 {
                    v.push(model.log_qv(lo + (k as f64 - 1.0) * h, quad)?);
                }
                Some(v)
            };
            Table::Continuous { lo, h, log_qv }
        };
        Ok(UpsilonEvaluator {
            model: model.clone(),
            table,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// `ln (QV/V)(x)`.
    pub fn log_ratio(&self, x: f64) -> f64 {
        match &self.table {
            Table::Finite(v) => v[x as usize],
            Table::Continuous { log_qv: None, .. } => 0.0,
            Table::Continuous { lo, h, log_qv: Some(t) } => {
                let u = ((x - lo) / h).clamp(0.0, (t.len() - 3) as f64);
                let k = (u.floor() as usize).min(t.len() - 4);
                let s = u - k as f64;
                // guard offset: node k of the lattice is t[k + 1]
                let (p0, p1, p2, p3) = (t[k], t[k + 1], t[k + 2], t[k + 3]);
                let cubic = p1
                    + 0.5 * s * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)));
                cubic - self.model.drift.log_value(x)
            }
        }
    }

    fn objective(&self, x: f64, y: f64) -> f64 {
        self.model.log_g(x, y) + self.log_ratio(x)
    }

    pub fn log_upsilon(&self, region: UpsilonRegion<'_>, y: f64) -> Result<f64> {
        self.model.check_observation(y)?;
        match (&self.table, region) {
            (Table::Finite(v), _) => {
                let excluded = |i: usize| match region {
                    UpsilonRegion::All => false,
                    UpsilonRegion::Complement(r) => r.contains(i as f64),
                };
                if let UpsilonRegion::Complement(r @ LdRegion::Interval { .. }) = region {
                    return Err(Error::invalid(format!("{r:?} is not a state subset")));
                }
                Ok((0..v.len())
                    .filter(|&i| !excluded(i))
                    .map(|i| self.objective(i as f64, y))
                    .fold(f64::NEG_INFINITY, f64::max))
            }
            (Table::Continuous { lo, h, .. }, _) => {
                let top = -lo;
                let segments: Vec<(f64, f64)> = match region {
                    UpsilonRegion::All => vec![(*lo, top)],
                    UpsilonRegion::Complement(LdRegion::Interval { lo: a, hi: b }) => {
                        let mut s = Vec::new();
                        if *a > *lo {
                            s.push((*lo, a.min(top)));
                        }
                        if *b < top {
                            s.push((b.max(*lo), top));
                        }
                        s
                    }
                    UpsilonRegion::Complement(r) => {
                        return Err(Error::invalid(format!("{r:?} is not an interval")));
                    }
                };
                let mut best = f64::NEG_INFINITY;
                for (a, b) in segments {
                    best = best.max(self.segment_sup(a, b, *h, y));
                }
                Ok(best)
            }
        }
    }

    pub fn upsilon(&self, region: UpsilonRegion<'_>, y: f64) -> Result<f64> {
        self.log_upsilon(region, y).map(f64::exp)
    }

    /// Lattice scan of `[a, b]` at spacing `h` (endpoints included), then golden
    /// refinement around the best node.
    fn segment_sup(&self, a: f64, b: f64, h: f64, y: f64) -> f64 {
        let n = ((b - a) / h).ceil().max(1.0) as usize;
        let step = (b - a) / n as f64;
        let mut best_k = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..=n {
            let v = self.objective(a + k as f64 * step, y);
            if v > best {
                best = v;
                best_k = k;
            }
        }
        let x = a + best_k as f64 * step;
        let lo = (x - step).max(a);
        let hi = (x + step).min(b);
        let (_, fr) = golden_max(|t| self.objective(t, y), lo, hi, 1e-11 * (1.0 + x.abs()));
        best.max(fr)
    }
}

/// `sup_x g(x, y) = (2πe)^{-1/2} / |y|` for the stochastic-volatility likelihood,
/// attained at `x = ln(y²/β²)`.
pub fn stoch_vol_sup_likelihood(y: f64) -> f64 {
    (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt().recip() / y.abs()
}

/// Log-domain composite Simpson rule over equally spaced samples `lv` (odd count).
fn log_simpson(lv: &[f64], h: f64) -> f64 {
    let n = lv.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let max = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = 0.0;
    for (i, l) in lv.iter().enumerate() {
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (l - max).exp();
    }
    max + (acc * h / 3.0).ln()
}

fn simpson_nodes(lo: f64, hi: f64, intervals: usize) -> (Vec<f64>, f64) {
    let n = (intervals.max(2) + 1) & !1;
    let h = (hi - lo) / n as f64;
    ((0..=n).map(|k| lo + k as f64 * h).collect(), h)
}

/// `ln Ψ_D(y) = ln λ_D(g(., y) 1_D)`.
pub fn log_psi(model: &ModelSpec, d: &LdSet, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    model.check_observation(y)?;
    d.region.check_for(model)?;
    match &d.region {
        LdRegion::States { states } => {
            let lv: Vec<f64> = states.iter().map(|&s| model.log_g(s as f64, y)).collect();
            Ok(log_sum_exp(&lv) - (states.len() as f64).ln())
        }
        LdRegion::Interval { lo, hi } => {
            let (xs, h) = simpson_nodes(*lo, *hi, quad.intervals);
            let lv: Vec<f64> = xs.iter().map(|&x| model.log_g(x, y)).collect();
            Ok(log_simpson(&lv, h) - (hi - lo).ln())
        }
    }
}

pub fn psi(model: &ModelSpec, d: &LdSet, y: f64, quad: &QuadratureSpec) -> Result<f64> {
    log_psi(model, d, y, quad).map(f64::exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiValue {
    /// `ln ν[g(., y0) Q g(., y1) 1_D]`
    pub log_value: f64,
    /// `ν Q 1_D`
    pub nu_q_d: f64,
    /// Set when `ν Q 1_D = 0`, violating the forgetting theorem's hypothesis.
    pub flagged: bool,
}

impl PhiValue {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// `Φ_{ν,D}(y0, y1) = ν[g(., y0) Q g(., y1) 1_D]`, with `ν` taken on `support`.
pub fn phi(
    model: &ModelSpec,
    support: &Support,
    nu: &InitialDistribution,
    d: &LdSet,
    y0: f64,
    y1: f64,
    quad: &QuadratureSpec,
) -> Result<PhiValue> {
    support.check_model(model)?;
    model.check_observation(y0)?;
    model.check_observation(y1)?;
    d.region.check_for(model)?;
    let ln_nu = nu.log_masses(support)?;
    let mut terms = Vec::with_capacity(ln_nu.len());
    let mut nu_q_d = 0.0;
    match &d.region {
        LdRegion::States { states } => {
            let p = &model.finite().expect("finite model").transition;
            for (i, &lni) in ln_nu.iter().enumerate() {
                let inner: f64 = states.iter().map(|&j| p[i][j] * model.log_g(j as f64, y1).exp()).sum();
                let reach: f64 = states.iter().map(|&j| p[i][j]).sum();
                nu_q_d += lni.exp() * reach;
                terms.push(lni + model.log_g(i as f64, y0) + inner.ln());
            }
        }
        LdRegion::Interval { lo, hi } => {
            let (xs, h) = simpson_nodes(*lo, *hi, quad.intervals);
            let lg1: Vec<f64> = xs.iter().map(|&x| model.log_g(x, y1)).collect();
            let mut lv = vec![0.0; xs.len()];
            for (i, &lni) in ln_nu.iter().enumerate() {
                if lni == f64::NEG_INFINITY {
                    continue;
                }
                let x = support.node(i);
                let (m, s) = model.kernel(x).expect("continuous model");
                nu_q_d += lni.exp() * (std_normal_cdf((hi - m) / s) - std_normal_cdf((lo - m) / s));
                for ((l, &xn), &g) in lv.iter_mut().zip(&xs).zip(&lg1) {
                    *l = model.log_q(x, xn) + g;
                }
                terms.push(lni + model.log_g(x, y0) + log_simpson(&lv, h));
            }
        }
    }
    let flagged = nu_q_d <= 0.0;
    Ok(PhiValue {
        log_value: if flagged { f64::NEG_INFINITY } else { log_sum_exp(&terms) },
        nu_q_d,
        flagged,
    })
}

/// `⌊n(1 - β)/2⌋`.
pub fn a_n(n: usize, beta: f64) -> usize {
    let v = n as f64 * (1.0 - beta) / 2.0;
    // absorb representation error such as 10 * 0.8 / 2 = 3.9999999999999996
    (v + 1e-9 * (1.0 + v)).floor() as usize
}

/// Observation set `K` used by the frequency condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObsSet {
    All,
    Interval { lo: f64, hi: f64 },
}

impl ObsSet {
    pub fn contains(&self, y: f64) -> bool {
        match *self {
            ObsSet::All => true,
            ObsSet::Interval { lo, hi } => y >= lo && y <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundConfig {
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub k: ObsSet,
    pub d: LdSet,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.beta) || !open(self.gamma) || self.beta >= self.gamma {
            return Err(Error::invalid(format!(
                "need 0 < beta < gamma < 1, got beta = {}, gamma = {}",
                self.beta, self.gamma
            )));
        }
        if !open(self.eta) {
            return Err(Error::invalid(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        if !(self.m0 > 0.0 && self.m1 > 0.0 && self.m2 > 0.0) {
            return Err(Error::invalid("M0, M1, M2 must be positive"));
        }
        Ok(())
    }
}

/// Smallest symmetric interval (or smallest state subset) whose complement carries at
/// most an `eta` fraction of `Υ_X` at every probe observation in `K`.
///
/// Intervals: radii double from 0.5 until the condition holds, then bisect between
/// the last failing and first passing radius to a relative tolerance of 1e-3. Finite models: subsets in order of size, then
/// lexicographically, skipping those that cannot be certified.
pub fn find_ld_set_for_eta(
    eval: &UpsilonEvaluator,
    eta: f64,
    k: &ObsSet,
    y_probe: &[f64],
    max_radius: f64,
    m_probe: usize,
) -> Result<LdSet> {
    let model = eval.model();
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta = {eta} must lie in (0, 1]")));
    }
    let probes: Vec<f64> = y_probe.iter().copied().filter(|&y| k.contains(y)).collect();
    if probes.is_empty() {
        return Err(Error::invalid("no probe observation lies in K"));
    }
    let mut all = Vec::with_capacity(probes.len());
    for &y in &probes {
        all.push(eval.log_upsilon(UpsilonRegion::All, y)?);
    }
    let ln_eta = eta.ln();
    let passes = |region: &LdRegion| -> Result<bool> {
        for (&y, &la) in probes.iter().zip(&all) {
            if eval.log_upsilon(UpsilonRegion::Complement(region), y)? > ln_eta + la + 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if let Some(m) = model.n_states() {
        if m > 16 {
            return Err(Error::TooLarge(format!("subset search over {m} states")));
        }
        let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
        masks.sort_by_key(|&mask| (mask.count_ones(), mask.reverse_bits()));
        for mask in masks {
            let region = LdRegion::states((0..m).filter(|i| mask & (1 << i) != 0).collect());
            if passes(&region)? {
                if let Ok(ld) = certify_ld_set(model, &region, m_probe) {
                    return Ok(ld);
                }
            }
        }
        return Err(Error::H2Unverified { eta, max_radius: m as f64 });
    }
    let mut lo_r = 0.0;
    let mut hi_r = 0.5;
    if passes(&LdRegion::symmetric(hi_r))? {
        return certify_ld_set(model, &LdRegion::symmetric(hi_r), m_probe);
    }
    loop {
        if passes(&LdRegion::symmetric(hi_r))? {
            break;
        }
        lo_r = hi_r;
        hi_r *= 2.0;
        if hi_r > max_radius {
            if passes(&LdRegion::symmetric(max_radius))? && max_radius > lo_r {
                hi_r = max_radius;
                break;
            }
            return Err(Error::H2Unverified { eta, max_radius });
        }
    }
    while hi_r - lo_r > 1e-3 * hi_r {
        let mid = 0.5 * (lo_r + hi_r);
        if passes(&LdRegion::symmetric(mid))? {
            hi_r = mid;
        } else {
            lo_r = mid;
        }
    }
    certify_ld_set(model, &LdRegion::symmetric(hi_r), m_probe)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub a_n: usize,
    pub log_term_geo: f64,
    pub log_term_ratio: f64,
    pub log_total: f64,
    pub total_clipped: f64,
    /// K-frequency hypothesis `Σ_{i≤n} 1_K(y_i) ≥ (1+γ)n/2` (always true for the lemma form).
    pub applies: bool,
    /// Whether `a_n` minus the number of observations outside `K` reaches
    /// `(γ-β)n/2`, which is what the `η` exponent needs. Always true for the lemma form.
    pub exponent_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    pub form: &'static str,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub c: LdSet,
    pub d: LdSet,
    pub rho: f64,
    pub log_rho: f64,
    pub log_nu_v: f64,
    pub log_nuprime_v: f64,
    pub phi_nu: PhiValue,
    pub phi_nuprime: PhiValue,
    /// Observations in `K` where `Υ_{C^c} > η Υ_X` (corollary form only).
    pub h2_violations: usize,
    /// `(γ-β)/2 ln η - 2 ln ε⁻_D`: per-step log-decay of the ratio term, ignoring the
    /// observation-dependent factors.
    pub ratio_log_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub summary: BoundSummary,
    pub rows: Vec<BoundRow>,
}

/// Per-observation ingredients shared by the lemma and corollary forms.
struct Ingredients {
    log_ups_x: Vec<f64>,
    log_ups_cc: Vec<f64>,
    log_psi: Vec<f64>,
    phi_nu: PhiValue,
    phi_nup: PhiValue,
    log_nu_v: f64,
    log_nup_v: f64,
}

fn log_nu_v(model: &ModelSpec, support: &Support, nu: &InitialDistribution) -> Result<f64> {
    let l = nu.log_masses(support)?;
    let terms: Vec<f64> = l
        .iter()
        .enumerate()
        .map(|(i, li)| li + model.drift.log_value(support.node(i)))
        .collect();
    Ok(log_sum_exp(&terms))
}

#[allow(clippy::too_many_arguments)]
fn ingredients(
    eval: &UpsilonEvaluator,
    support: &Support,
    nu: &InitialDistribution,
    nu_prime: &InitialDistribution,
    obs: &[f64],
    c: &LdSet,
    d: &LdSet,
    quad: &QuadratureSpec,
) -> Result<Ingredients> {
    let model = eval.model();
    if obs.len() < 2 {
        return Err(Error::invalid("the bound needs at least two observations"));
    }
    let mut log_ups_x = Vec::with_capacity(obs.len());
    let mut log_ups_cc = Vec::with_capacity(obs.len());
    let mut lpsi = Vec::with_capacity(obs.len());
    for &y in obs {
        log_ups_x.push(eval.log_upsilon(UpsilonRegion::All, y)?);
        log_ups_cc.push(eval.log_upsilon(UpsilonRegion::Complement(&c.region), y)?);
        lpsi.push(log_psi(model, d, y, quad)?);
    }
    Ok(Ingredients {
        log_ups_x,
        log_ups_cc,
        log_psi: lpsi,
        phi_nu: phi(model, support, nu, d, obs[0], obs[1], quad)?,
        phi_nup: phi(model, support, nu_prime, d, obs[0], obs[1], quad)?,
        log_nu_v: log_nu_v(model, support, nu)?,
        log_nup_v: log_nu_v(model, support, nu_prime)?,
    })
}

/// `ln` of `(ε⁻_D)^{2(n-1)} Φ_ν Φ_ν' Π_{i=2}^n Ψ_D²(y_i)` for every `n ≥ 1`.
fn log_denominators(ing: &Ingredients, d: &LdSet, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    let mut psi_sum = 0.0;
    for (n, o) in out.iter_mut().enumerate().skip(1) {
        if n >= 2 {
            psi_sum += ing.log_psi[n];
        }
        *o = 2.0 * (n as f64 - 1.0) * d.log_eps_minus + ing.phi_nu.log_value + ing.phi_nup.log_value + 2.0 * psi_sum;
    }
    out
}

fn finish_row(n: usize, a: usize, log_geo: f64, log_ratio: f64, applies: bool, covered: bool) -> BoundRow {
    let log_total = log_add_exp(log_geo, log_ratio);
    BoundRow {
        n,
        a_n: a,
        log_term_geo: log_geo,
        log_term_ratio: log_ratio,
        log_total,
        total_clipped: log_total.exp().min(1.0),
        applies,
        exponent_covered: covered,
    }
}

/// Subset form: `ρ_C^{βn} + Π Υ_X · max_{|I| = a_n} Π_I Υ_{C^c} Π_{I^c} Υ_X / denominator · ν(V) ν'(V)`.
/// The subset maximum takes the `a_n` largest ratios `Υ_{C^c}/Υ_X`.
#[allow(clippy::too_many_arguments)]
pub fn lemma53_bound(
    eval: &UpsilonEvaluator,
    support: &Support,
    nu: &InitialDistribution,
    nu_prime: &InitialDistribution,
    obs: &[f64],
    beta: f64,
    c: &LdSet,
    d: &LdSet,
    quad: &QuadratureSpec,
) -> Result<BoundReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta = {beta} must lie in (0, 1)")));
    }
    let ing = ingredients(eval, support, nu, nu_prime, obs, c, d, quad)?;
    let n_max = obs.len() - 1;
    let denom = log_denominators(&ing, d, n_max);
    let log_rho = c.log_rho();
    let mut rows = Vec::with_capacity(n_max);
    let mut sum_x = ing.log_ups_x[0];
    let mut log_ratios = vec![ing.log_ups_cc[0] - ing.log_ups_x[0]];
    for n in 1..=n_max {
        sum_x += ing.log_ups_x[n];
        log_ratios.push(ing.log_ups_cc[n] - ing.log_ups_x[n]);
        let a = a_n(n, beta);
        let top = top_sum(&log_ratios, a);
        let log_ratio = if ing.phi_nu.flagged || ing.phi_nup.flagged {
            f64::INFINITY
        } else {
            2.0 * sum_x + top - denom[n] + ing.log_nu_v + ing.log_nup_v
        };
        rows.push(finish_row(n, a, beta * n as f64 * log_rho, log_ratio, true, true));
    }
    Ok(BoundReport {
        summary: summary("lemma", beta, None, None, c, d, &ing, 0),
        rows,
    })
}

/// Sum of the `k` largest entries (`-inf` entries allowed).
pub(crate) fn top_sum(v: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s[..k.min(s.len())].iter().sum()
}

/// Closed form: `ρ_C^{βn} + η^{(γ-β)n/2} Π Υ_X² / denominator · ν(V) ν'(V)`,
/// flagged per `n` by the K-frequency hypothesis.
#[allow(clippy::too_many_arguments)]
pub fn corollary_bound(
    eval: &UpsilonEvaluator,
    support: &Support,
    nu: &InitialDistribution,
    nu_prime: &InitialDistribution,
    obs: &[f64],
    cfg: &BoundConfig,
    c: &LdSet,
    quad: &QuadratureSpec,
) -> Result<BoundReport> {
    cfg.validate()?;
    let ing = ingredients(eval, support, nu, nu_prime, obs, c, &cfg.d, quad)?;
    let n_max = obs.len() - 1;
    let denom = log_denominators(&ing, &cfg.d, n_max);
    let log_rho = c.log_rho();
    let ln_eta = cfg.eta.ln();
    let in_k: Vec<bool> = obs.iter().map(|&y| cfg.k.contains(y)).collect();
    let h2_violations = (0..obs.len())
        .filter(|&i| in_k[i] && ing.log_ups_cc[i] > ln_eta + ing.log_ups_x[i] + 1e-12)
        .count();
    let mut rows = Vec::with_capacity(n_max);
    let mut sum_x = ing.log_ups_x[0];
    let mut k_count = usize::from(in_k[0]);
    for n in 1..=n_max {
        sum_x += ing.log_ups_x[n];
        k_count += usize::from(in_k[n]);
        let nf = n as f64;
        let exponent = (cfg.gamma - cfg.beta) * nf / 2.0;
        let log_ratio = if ing.phi_nu.flagged || ing.phi_nup.flagged {
            f64::INFINITY
        } else {
            exponent * ln_eta + 2.0 * sum_x - denom[n] + ing.log_nu_v + ing.log_nup_v
        };
        let a = a_n(n, cfg.beta);
        let applies = k_count as f64 >= (1.0 + cfg.gamma) * nf / 2.0;
        let covered = a as f64 - (n + 1 - k_count) as f64 >= exponent;
        rows.push(finish_row(n, a, cfg.beta * nf * log_rho, log_ratio, applies, covered));
    }
    let mut s = summary("corollary", cfg.beta, Some(cfg.gamma), Some(cfg.eta), c, &cfg.d, &ing, h2_violations);
    s.ratio_log_rate = Some((cfg.gamma - cfg.beta) / 2.0 * ln_eta - 2.0 * cfg.d.log_eps_minus);
    Ok(BoundReport { summary: s, rows })
}

#[allow(clippy::too_many_arguments)]
fn summary(
    form: &'static str,
    beta: f64,
    gamma: Option<f64>,
    eta: Option<f64>,
    c: &LdSet,
    d: &LdSet,
    ing: &Ingredients,
    h2_violations: usize,
) -> BoundSummary {
    BoundSummary {
        form,
        beta,
        gamma,
        eta,
        c: c.clone(),
        d: d.clone(),
        rho: c.rho(),
        log_rho: c.log_rho(),
        log_nu_v: ing.log_nu_v,
        log_nuprime_v: ing.log_nup_v,
        phi_nu: ing.phi_nu,
        phi_nuprime: ing.phi_nup,
        h2_violations,
        ratio_log_rate: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionRow {
    pub n: usize,
    pub avg_k: f64,
    pub avg_log_upsilon: f64,
    pub avg_log_psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    pub pass_k: bool,
    pub pass_upsilon: bool,
    pub pass_psi: bool,
}

impl ConditionReport {
    pub fn last(&self) -> Option<&ConditionRow> {
        self.rows.last()
    }
}

/// Running averages `n⁻¹ Σ_{i≤n} 1_K(y_i)`, `n⁻¹ Σ_{i≤n} ln Υ_X(y_i)` and
/// `n⁻¹ Σ_{2≤i≤n} ln Ψ_D(y_i)`, judged at the final `n` against `(1+γ)/2`, `M1`
/// and `-M2`.
pub fn check_conditions(
    obs: &[f64],
    eval: &UpsilonEvaluator,
    cfg: &BoundConfig,
    quad: &QuadratureSpec,
) -> Result<ConditionReport> {
    let mut rows = Vec::with_capacity(obs.len().saturating_sub(1));
    let (mut sk, mut su, mut sp) = (0.0, 0.0, 0.0);
    for (i, &y) in obs.iter().enumerate() {
        sk += f64::from(u8::from(cfg.k.contains(y)));
        su += eval.log_upsilon(UpsilonRegion::All, y)?;
        if i >= 2 {
            sp += log_psi(eval.model(), &cfg.d, y, quad)?;
        }
        if i >= 1 {
            let n = i as f64;
            rows.push(ConditionRow {
                n: i,
                avg_k: sk / n,
                avg_log_upsilon: su / n,
                avg_log_psi: sp / n,
            });
        }
    }
    let (pass_k, pass_upsilon, pass_psi) = match rows.last() {
        Some(r) => (
            r.avg_k >= (1.0 + cfg.gamma) / 2.0,
            r.avg_log_upsilon < cfg.m1,
            r.avg_log_psi > -cfg.m2,
        ),
        None => (false, false, false),
    };
    Ok(ConditionReport {
        rows,
        pass_k,
        pass_upsilon,
        pass_psi,
    })
}

/// `ln Ψ_D(y) ≥ -ln(2π)/2 - y² sinh(1)/2` on `D = [-1, 1]` for the
/// stochastic-volatility model with `β = 1` (Jensen).
pub fn stoch_vol_psi_floor(y: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * y * y * 1f64.sinh()
}

/// Whether `model` is a stochastic-volatility model with unit observation scale.
pub fn is_unit_stoch_vol(model: &ModelSpec) -> bool {
    matches!(&model.kind, ModelKind::StochVol(p) if p.beta == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArParams, DriftFunction, Emission, FiniteStateParams, LgssmParams, MeanDrift, NlssmParams, ObsMap};
    use proptest::prelude::*;

    fn lgssm(phi: f64) -> ModelSpec {
        ModelSpec::new(
            ModelKind::Lgssm(LgssmParams { phi, sigma: 1.0, beta: 1.0, h0: 1.0 }),
            DriftFunction::One,
        )
        .unwrap()
    }

    fn tobit(c: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::Tobit(ArParams { phi: 0.5, sigma: 1.0, beta: 1.0 }), DriftFunction::ExpAbs { c }).unwrap()
    }

    fn sv() -> ModelSpec {
        ModelSpec::new(ModelKind::StochVol(ArParams { phi: 0.9, sigma: 0.3, beta: 1.0 }), DriftFunction::One).unwrap()
    }

    fn finite(p: Vec<Vec<f64>>, e: Vec<Vec<f64>>) -> ModelSpec {
        ModelSpec::new(
            ModelKind::FiniteState(FiniteStateParams { transition: p, emission: Emission::Discrete { probs: e } }),
            DriftFunction::One,
        )
        .unwrap()
    }

    #[test]
    fn gaussian_certificate_matches_closed_form() {
        let ld = certify_ld_set(&lgssm(0.5), &LdRegion::symmetric(1.0), 64).unwrap();
        assert!((ld.eps_plus() - 0.797_884_560_802_865_4).abs() < 1e-14);
        assert!((ld.eps_minus() - 0.259_035_191_331_783_5).abs() < 1e-14);
        assert!((ld.rho() - 0.894_600_775_438_135_7).abs() < 1e-12);
        let (lm, lp) = lattice_eps(&lgssm(0.5), -1.0, 1.0, 201).unwrap();
        assert!((lm - ld.eps_minus()).abs() < 1e-12 && (lp - ld.eps_plus()).abs() < 1e-12);
    }

    #[test]
    fn lattice_refinement_is_stable() {
        let m = ModelSpec::new(
            ModelKind::Nlssm(NlssmParams {
                drift_form: MeanDrift::TanhDrift { delta: 0.5, kappa: 0.8 },
                sigma0: 1.0,
                obs_form: ObsMap::Identity,
                beta: 1.0,
            }),
            DriftFunction::One,
        )
        .unwrap();
        let a = certify_ld_set(&m, &LdRegion::symmetric(2.0), 64).unwrap();
        let b = certify_ld_set(&m, &LdRegion::symmetric(2.0), 128).unwrap();
        assert!((a.eps_minus() / b.eps_minus() - 1.0).abs() < 0.01);
        assert!((a.eps_plus() / b.eps_plus() - 1.0).abs() < 0.01);
        let (lm, lp) = lattice_eps(&m, -2.0, 2.0, 401).unwrap();
        assert!((lm / b.eps_minus() - 1.0).abs() < 0.01 && (lp / b.eps_plus() - 1.0).abs() < 0.01);
    }

    #[test]
    fn finite_certificate_and_degenerate_case() {
        let m = finite(vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let ld = certify_ld_set(&m, &LdRegion::states(vec![0, 1]), 0).unwrap();
        assert!((ld.eps_minus() - 0.6).abs() < 1e-15 && (ld.eps_plus() - 1.4).abs() < 1e-15);
        let z = finite(vec![vec![1.0, 0.0], vec![0.3, 0.7]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(matches!(certify_ld_set(&z, &LdRegion::states(vec![0, 1]), 0), Err(Error::NotCertifiable(_))));
        assert!(certify_ld_set(&z, &LdRegion::states(vec![]), 0).is_err());
    }

    #[test]
    fn rho_examples() {
        let mk = |em: f64, ep: f64| LdSet { region: LdRegion::symmetric(1.0), log_eps_minus: em.ln(), log_eps_plus: ep.ln() };
        assert_eq!(rho(&mk(0.3, 0.3)), 0.0);
        assert!((rho(&mk(0.5, 1.0)) - 0.75).abs() < 1e-15);
        assert!((rho(&mk(0.259_035, 0.797_885)) - 0.894_602).abs() < 1e-6);
    }

    #[test]
    fn a_n_examples() {
        assert_eq!(a_n(10, 0.5), 2);
        assert_eq!(a_n(7, 0.5), 1);
        assert_eq!(a_n(0, 0.3), 0);
        assert_eq!(a_n(10, 0.2), 4);
    }

    #[test]
    fn stoch_vol_upsilon_closed_form() {
        let ev = UpsilonEvaluator::new(&sv(), &SearchSpec::for_model(&sv()), &QuadratureSpec::default()).unwrap();
        for &y in &[0.5, 1.0, 2.0, 4.0] {
            let u = ev.upsilon(UpsilonRegion::All, y).unwrap();
            assert!((u / stoch_vol_sup_likelihood(y) - 1.0).abs() < 1e-6, "y={y} {u}");
        }
        assert!((stoch_vol_sup_likelihood(2.0) - 0.120_985_362_259_571_68).abs() < 1e-15);
    }

    #[test]
    fn upsilon_flat_likelihood() {
        // identical emission rows: g does not depend on the state
        let m = finite(vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.2, 0.8]]);
        let ev = UpsilonEvaluator::new(&m, &SearchSpec::for_model(&m), &QuadratureSpec::default()).unwrap();
        let c = LdRegion::states(vec![0]);
        assert!((ev.upsilon(UpsilonRegion::All, 1.0).unwrap() - 0.8).abs() < 1e-15);
        assert!((ev.upsilon(UpsilonRegion::Complement(&c), 1.0).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn log_ratio_interpolation_tracks_quadrature() {
        let m = tobit(0.5);
        let q = QuadratureSpec::default();
        let ev = UpsilonEvaluator::new(&m, &SearchSpec::for_model(&m), &q).unwrap();
        for &x in &[-17.333, -1.01, -0.005, 0.0, 0.37, 3.14159, 25.5] {
            let direct = m.qv_ratio(x, &q).unwrap().ln();
            assert!((ev.log_ratio(x) - direct).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn tobit_ld_search_finds_finite_radius() {
        let m = tobit(0.5);
        let q = QuadratureSpec::default();
        let ev = UpsilonEvaluator::new(&m, &SearchSpec::for_model(&m), &q).unwrap();
        let probes = [0.0, 0.5, 1.0, 2.0, 4.0];
        let ld = find_ld_set_for_eta(&ev, 0.1, &ObsSet::All, &probes, 20.0, 64).unwrap();
        let LdRegion::Interval { hi, .. } = ld.region else { panic!() };
        assert!(hi > 0.5 && hi < 20.0, "{hi}");
        for &y in &probes {
            let r = ev.upsilon(UpsilonRegion::Complement(&ld.region), y).unwrap() / ev.upsilon(UpsilonRegion::All, y).unwrap();
            assert!(r <= 0.1 + 1e-12);
        }
        // eta = 1 accepts the first candidate
        let ld1 = find_ld_set_for_eta(&ev, 1.0, &ObsSet::All, &probes, 20.0, 64).unwrap();
        assert_eq!(ld1.region, LdRegion::symmetric(0.5));
    }

    #[test]
    fn tobit_ld_search_tighter_eta() {
        let m = tobit(1.0);
        let q = QuadratureSpec::default();
        let ev = UpsilonEvaluator::new(&m, &SearchSpec::for_model(&m), &q).unwrap();
        let probes = [0.0, 0.5, 1.0, 2.0, 4.0];
        let ld = find_ld_set_for_eta(&ev, 0.01, &ObsSet::All, &probes, 30.0, 64).unwrap();
        for &y in &probes {
            let r = ev.upsilon(UpsilonRegion::Complement(&ld.region), y).unwrap() / ev.upsilon(UpsilonRegion::All, y).unwrap();
            assert!(r <= 0.01 + 1e-12);
        }
    }

    #[test]
    fn nlssm_ld_search_finds_finite_radius() {
        let m = ModelSpec::new(
            ModelKind::Nlssm(NlssmParams {
                drift_form: MeanDrift::LinearShrink { delta: 0.5 },
                sigma0: 1.0,
                obs_form: ObsMap::Identity,
                beta: 1.0,
            }),
            DriftFunction::ExpAbs { c: 0.5 },
        )
        .unwrap();
        let q = QuadratureSpec::default();
        let ev = UpsilonEvaluator::new(&m, &SearchSpec::for_model(&m), &q).unwrap();
        let ld = find_ld_set_for_eta(&ev, 0.1, &ObsSet::All, &[-3.0, -1.0, 0.0, 1.0, 3.0], 20.0, 64).unwrap();
        assert!(ld.lambda_norm() < 40.0);
    }

    #[test]
    fn psi_examples() {
        let flat = finite(vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.2, 0.8]]);
        let d = certify_ld_set(&flat, &LdRegion::states(vec![0, 1]), 0).unwrap();
        assert!((psi(&flat, &d, 1.0, &QuadratureSpec::default()).unwrap() - 0.8).abs() < 1e-15);
        let m = finite(vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![0.2, 0.8], vec![0.6, 0.4]]);
        let d = certify_ld_set(&m, &LdRegion::states(vec![0, 1]), 0).unwrap();
        assert!((psi(&m, &d, 0.0, &QuadratureSpec::default()).unwrap() - 0.4).abs() < 1e-15);
        let d = certify_ld_set(&sv(), &LdRegion::symmetric(1.0), 16).unwrap();
        for &y in &[0.0, 1.0, 2.0] {
            assert!(log_psi(&sv(), &d, y, &QuadratureSpec::default()).unwrap() >= stoch_vol_psi_floor(y));
        }
    }

    #[test]
    fn phi_hand_case() {
        // g(., y0) = (1, 1) up to scale, g(., y1) = (0.2, 0.8) up to scale
        let m = finite(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![0.5, 0.1, 0.4], vec![0.5, 0.4, 0.1]]);
        let d = certify_ld_set(&m, &LdRegion::states(vec![1]), 0).unwrap();
        let nu = InitialDistribution::FiniteVector { p: vec![1.0, 0.0] };
        let v = phi(&m, &Support::Finite(2), &nu, &d, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        // 0.5 g0(0) * 0.5 g1(1) = 0.5 * 0.5 * 0.4
        assert!((v.value() - 0.1).abs() < 1e-15);
        assert!((v.nu_q_d - 0.5).abs() < 1e-15 && !v.flagged);
    }

    #[test]
    fn phi_flags_unreachable_d() {
        let m = finite(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let d = LdSet { region: LdRegion::states(vec![1]), log_eps_minus: 0.0, log_eps_plus: 0.0 };
        let nu = InitialDistribution::FiniteVector { p: vec![1.0, 0.0] };
        let v = phi(&m, &Support::Finite(2), &nu, &d, 0.0, 0.0, &QuadratureSpec::default()).unwrap();
        assert!(v.flagged && v.value() == 0.0);
    }

    #[test]
    fn phi_total_mass_with_flat_likelihood() {
        let m = finite(vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![vec![1.0], vec![1.0]]);
        let d = certify_ld_set(&m, &LdRegion::states(vec![0, 1]), 0).unwrap();
        let nu = InitialDistribution::FiniteVector { p: vec![0.3, 0.7] };
        let v = phi(&m, &Support::Finite(2), &nu, &d, 0.0, 0.0, &QuadratureSpec::default()).unwrap();
        assert!((v.value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn condition_averages_for_all_k() {
        let m = tobit(0.5);
        let q = QuadratureSpec::default();
        let ev = UpsilonEvaluator::new(&m, &SearchSpec::for_model(&m), &q).unwrap();
        let d = certify_ld_set(&m, &LdRegion::symmetric(1.0), 16).unwrap();
        let cfg = BoundConfig { beta: 0.2, gamma: 0.5, eta: 0.1, k: ObsSet::All, d, m0: 1.0, m1: 1.0, m2: 5.0 };
        let rep = check_conditions(&[0.0, 1.0, 0.0, 2.0, 0.3], &ev, &cfg, &q).unwrap();
        assert!(rep.rows.iter().all(|r| r.avg_k >= 1.0));
        assert!(rep.pass_k);
    }

    proptest! {
        #[test]
        fn factorized_max_equals_brute_force(ratios in proptest::collection::vec(-5.0f64..0.0, 1..13), beta in 0.05f64..0.95) {
            let n = ratios.len() - 1;
            let a = a_n(n, beta);
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1 << ratios.len()) {
                if mask.count_ones() as usize != a { continue; }
                let s: f64 = (0..ratios.len()).filter(|i| mask & (1 << i) != 0).map(|i| ratios[i]).sum();
                best = best.max(s);
            }
            prop_assert!((top_sum(&ratios, a) - best).abs() < 1e-12);
        }

        #[test]
        fn upsilon_monotone_in_region(y in 0.0f64..6.0, r1 in 0.1f64..6.0, dr in 0.0f64..6.0) {
            let m = tobit(0.5);
            let q = QuadratureSpec::default();
            let ev = UpsilonEvaluator::new(&m, &SearchSpec { half_width: 40.0, nodes: 801 }, &q).unwrap();
            let small = LdRegion::symmetric(r1 + dr);
            let big = LdRegion::symmetric(r1);
            let a = ev.log_upsilon(UpsilonRegion::Complement(&small), y).unwrap();
            let b = ev.log_upsilon(UpsilonRegion::Complement(&big), y).unwrap();
            let all = ev.log_upsilon(UpsilonRegion::All, y).unwrap();
            prop_assert!(a <= b + 1e-9);
            prop_assert!(b <= all + 1e-9);
        }

        #[test]
        fn certified_constants_ordered(phi_ in -0.95f64..0.95, r in 0.05f64..5.0) {
            let ld = certify_ld_set(&lgssm(phi_), &LdRegion::symmetric(r), 8).unwrap();
            prop_assert!(ld.log_eps_minus <= ld.log_eps_plus);
            prop_assert!((0.0..=1.0).contains(&ld.rho()));
            prop_assert!(ld.log_rho() < 0.0);
        }
    }
}
