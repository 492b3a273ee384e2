//! TOML run configuration with dotted-key overrides.
//!
//! ```toml
//! seed = 7                      # required by stochastic commands, here or via --seed
//!
//! [model]                       # kind = finite_state | lgssm | tobit | nlssm | stoch_vol
//! kind = "tobit"
//! phi = 0.5
//! sigma = 1.0
//! beta = 1.0
//! drift = { form = "exp_abs", c = 0.5 }   # default { form = "one" }
//!
//! [star]                        # optional; keys override [model] for the data-generating model
//! phi = 0.7
//!
//! [grid]                        # optional for continuous models
//! lo = -10.0
//! hi = 10.0
//! m = 400
//!
//! [nu]                          # also [nu_prime] and [star_init]
//! form = "gaussian"
//! mean = -4.0
//! sd = 1.0
//!
//! [experiment]
//! n = 200
//! replications = 20
//! rate_floor = 1e-300
//! schedule = [4, 8, 16]         # r-sequence horizons; default dyadic up to n
//!
//! [bound]                       # optional
//! beta = 0.2
//! gamma = 0.6
//! eta = 0.1
//! k = { form = "all" }
//! d = { form = "interval", lo = -1.0, hi = 1.0 }
//! m0 = 1.0
//! m1 = 1.0
//! m2 = 1.0
//! y_probe = [0.0, 0.5, 1.0, 2.0, 4.0]
//!
//! [quadrature]                  # optional: half_width_sd, intervals, tol
//! [search]                      # optional: half_width, nodes
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::bounds::SearchSpec;
use crate::error::{Error, Result};
use crate::experiments::{BoundSettings, ExperimentConfig};
use crate::grid::{GridSpec, InitialDistribution};
use crate::model::{DriftFunction, ModelKind, ModelSpec, QuadratureSpec};

const SECTIONS: &[&str] = &[
    "seed",
    "model",
    "star",
    "grid",
    "nu",
    "nu_prime",
    "star_init",
    "experiment",
    "bound",
    "quadrature",
    "search",
];

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n: usize,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default = "default_floor")]
    pub rate_floor: f64,
    #[serde(default)]
    pub schedule: Vec<usize>,
}

fn one() -> usize {
    1
}

fn default_floor() -> f64 {
    1e-300
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub model: ModelSpec,
    pub star: ModelSpec,
    pub grid: Option<GridSpec>,
    pub nu: Option<InitialDistribution>,
    pub nu_prime: Option<InitialDistribution>,
    pub star_init: Option<InitialDistribution>,
    pub experiment: Option<ExperimentSection>,
    pub bound: Option<BoundSettings>,
    pub quad: QuadratureSpec,
    pub search: Option<SearchSpec>,
    /// The merged document after overrides, for echoing next to results.
    pub resolved: Table,
}

/// `key=value` with a dotted key; the value is read as a TOML value, or as a bare
/// string when it does not parse.
pub fn apply_override(doc: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

fn section<T: DeserializeOwned>(doc: &Table, key: &str) -> Result<Option<T>> {
    doc.get(key)
        .map(|v| v.clone().try_into::<T>().map_err(|e| Error::config(key, e.message())))
        .transpose()
}

fn model_from(table: &Table, key: &str) -> Result<ModelSpec> {
    let mut t = table.clone();
    let drift = match t.remove("drift") {
        Some(v) => v.try_into::<DriftFunction>().map_err(|e| Error::config(format!("{key}.drift"), e.message()))?,
        None => DriftFunction::One,
    };
    let kind: ModelKind = Value::Table(t).try_into().map_err(|e| Error::config(key, e.message()))?;
    ModelSpec::new(kind, drift).map_err(|e| Error::config(key, e.to_string()))
}

impl RunConfig {
    pub fn from_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_table(doc)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str(&text, overrides)
    }

    pub fn from_table(doc: Table) -> Result<Self> {
        if let Some(k) = doc.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::config(k, "unknown key"));
        }
        let seed = match doc.get("seed") {
            None => None,
            Some(Value::Integer(s)) if *s >= 0 => Some(*s as u64),
            Some(v) => return Err(Error::config("seed", format!("expected a nonnegative integer, got {v}"))),
        };
        let model_table = match doc.get("model") {
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(Error::config("model", "expected a section")),
            None => return Err(Error::config("model", "missing section")),
        };
        let model = model_from(&model_table, "model")?;
        let star = match doc.get("star") {
            None => model.clone(),
            Some(Value::Table(over)) => {
                let mut merged = model_table.clone();
                for (k, v) in over {
                    merged.insert(k.clone(), v.clone());
                }
                model_from(&merged, "star")?
            }
            Some(_) => return Err(Error::config("star", "expected a section")),
        };
        let grid: Option<GridSpec> = section(&doc, "grid")?;
        if let Some(g) = &grid {
            g.validate().map_err(|e| Error::config("grid", e.to_string()))?;
        }
        let bound: Option<BoundSettings> = section(&doc, "bound")?;
        let experiment: Option<ExperimentSection> = section(&doc, "experiment")?;
        Ok(RunConfig {
            seed,
            model,
            star,
            grid,
            nu: section(&doc, "nu")?,
            nu_prime: section(&doc, "nu_prime")?,
            star_init: section(&doc, "star_init")?,
            experiment,
            bound,
            quad: section(&doc, "quadrature")?.unwrap_or_default(),
            search: section(&doc, "search")?,
            resolved: doc,
        })
    }

    /// Seed from the command line if given, else from the file.
    pub fn seed_or(&self, cli: Option<u64>) -> Result<u64> {
        cli.or(self.seed)
            .ok_or_else(|| Error::config("seed", "required; set `seed` in the config or pass --seed"))
    }

    /// Default law of `x_0` for the data-generating model: its stationary Gaussian
    /// approximation, or uniform on a finite state set.
    fn default_star_init(&self) -> InitialDistribution {
        match (self.star.n_states(), self.star.stationary_sd()) {
            (Some(m), _) => InitialDistribution::FiniteVector { p: vec![1.0 / m as f64; m] },
            (None, Some(sd)) => InitialDistribution::Gaussian { mean: 0.0, sd },
            (None, None) => unreachable!("continuous models have a stationary scale"),
        }
    }

    pub fn star_init(&self) -> InitialDistribution {
        self.star_init.clone().unwrap_or_else(|| self.default_star_init())
    }

    pub fn experiment(&self, seed: u64) -> Result<ExperimentConfig> {
        let ex = self.experiment.as_ref().ok_or_else(|| Error::config("experiment", "missing section"))?;
        let nu = self.nu.clone().ok_or_else(|| Error::config("nu", "missing section"))?;
        let nu_prime = self.nu_prime.clone().ok_or_else(|| Error::config("nu_prime", "missing section"))?;
        let cfg = ExperimentConfig {
            model: self.model.clone(),
            star: self.star.clone(),
            star_init: self.star_init(),
            nu,
            nu_prime,
            n: ex.n,
            replications: ex.replications,
            seed,
            grid: self.grid,
            rate_floor: ex.rate_floor,
            bound: self.bound.clone(),
            quad: self.quad,
            search: self.search,
            rseq_schedule: ex.schedule.clone(),
        };
        cfg.validate().map_err(|e| Error::config("experiment", e.to_string()))?;
        Ok(cfg)
    }

    /// The resolved document, with `seed` filled in when known.
    pub fn resolved_toml(&self, seed: Option<u64>) -> String {
        let mut doc = self.resolved.clone();
        if let Some(s) = seed {
            doc.insert("seed".into(), Value::Integer(s as i64));
        }
        toml::to_string(&doc).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArParams;

    const TOBIT: &str = r#"
seed = 3
[model]
kind = "tobit"
phi = 0.5
sigma = 1.0
beta = 1.0
drift = { form = "exp_abs", c = 0.5 }

[nu]
form = "gaussian"
mean = -4.0
sd = 1.0

[nu_prime]
form = "gaussian"
mean = 4.0
sd = 1.0

[experiment]
n = 50
replications = 4
"#;

    #[test]
    fn parses_and_defaults() {
        let c = RunConfig::from_str(TOBIT, &[]).unwrap();
        assert_eq!(c.model.kind, ModelKind::Tobit(ArParams { phi: 0.5, sigma: 1.0, beta: 1.0 }));
        assert_eq!(c.model.drift, DriftFunction::ExpAbs { c: 0.5 });
        assert_eq!(c.star, c.model);
        let e = c.experiment(c.seed_or(None).unwrap()).unwrap();
        assert_eq!((e.n, e.replications, e.seed, e.rate_floor), (50, 4, 3, 1e-300));
    }

    #[test]
    fn overrides_win() {
        let c = RunConfig::from_str(TOBIT, &["model.phi=0.25".into(), "star.phi = 0.7".into(), "experiment.n=80".into()]).unwrap();
        assert!(matches!(c.model.kind, ModelKind::Tobit(p) if p.phi == 0.25));
        assert!(matches!(c.star.kind, ModelKind::Tobit(p) if p.phi == 0.7 && p.beta == 1.0));
        assert_eq!(c.experiment.unwrap().n, 80);
        assert!(c.resolved.get("star").is_some());
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |e: Error| match e {
            Error::Config { key, .. } => key,
            other => panic!("{other}"),
        };
        assert_eq!(key_of(RunConfig::from_str(TOBIT, &["bogus=1".into()]).unwrap_err()), "bogus");
        assert_eq!(key_of(RunConfig::from_str(TOBIT, &["model.rho=1".into()]).unwrap_err()), "model");
        assert_eq!(key_of(RunConfig::from_str(TOBIT, &["model.phi=1.5".into()]).unwrap_err()), "model");
        assert_eq!(key_of(RunConfig::from_str(TOBIT, &["grid.m=4".into(), "grid.lo=0.0".into(), "grid.hi=1.0".into()]).unwrap_err()), "grid");
        let no_seed = TOBIT.replacen("seed = 3", "", 1);
        let c = RunConfig::from_str(&no_seed, &[]).unwrap();
        assert_eq!(key_of(c.seed_or(None).unwrap_err()), "seed");
        assert_eq!(c.seed_or(Some(9)).unwrap(), 9);
        assert!(RunConfig::from_str(TOBIT, &["noequals".into()]).unwrap_err().is_usage());
    }

    #[test]
    fn resolved_echo_round_trips() {
        let c = RunConfig::from_str(TOBIT, &["experiment.n=70".into()]).unwrap();
        let text = c.resolved_toml(Some(11));
        let again = RunConfig::from_str(&text, &[]).unwrap();
        assert_eq!(again.seed, Some(11));
        assert_eq!(again.experiment.unwrap().n, 70);
        assert_eq!(again.model, c.model);
    }

    #[test]
    fn bound_section() {
        let text = format!(
            "{TOBIT}\n[bound]\nbeta = 0.2\ngamma = 0.6\neta = 0.1\nd = {{ form = \"interval\", lo = -1.0, hi = 1.0 }}\nm0 = 1.0\nm1 = 1.0\nm2 = 1.0\ny_probe = [0.0, 1.0]\n"
        );
        let b = RunConfig::from_str(&text, &[]).unwrap().bound.unwrap();
        assert_eq!(b.k, crate::bounds::ObsSet::All);
        assert_eq!(b.m_probe, 64);
    }
}
