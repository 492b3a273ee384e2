//! Simulation of observation paths from a generating model.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{InitialDistribution, Support};
use crate::model::ModelSpec;
use crate::report::{fmt_f64, read_csv, write_csv};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub hidden: Option<Vec<f64>>,
    pub obs: Vec<f64>,
    pub seed: u64,
    pub replication: u64,
    /// Description of the generating model and its initial law.
    pub generator: String,
}

impl Trajectory {
    /// Number of transitions, `len(obs) - 1`.
    pub fn n(&self) -> usize {
        self.obs.len().saturating_sub(1)
    }

    pub fn without_hidden(mut self) -> Self {
        self.hidden = None;
        self
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .obs
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let x = self.hidden.as_ref().map(|h| fmt_f64(h[i])).unwrap_or_default();
                vec![i.to_string(), x, fmt_f64(*y)]
            })
            .collect();
        write_csv(path, &["step", "x", "y"], &rows)
    }

    /// Read a `step,x,y` file. Seed and generator are not recorded in the file.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let (header, rows) = read_csv(path)?;
        if header != ["step", "x", "y"] {
            return Err(Error::invalid(format!("{}: expected header step,x,y", path.display())));
        }
        let bad = |line: usize, what: &str| Error::invalid(format!("{}: row {line}: bad {what}", path.display()));
        let mut hidden = Vec::new();
        let mut obs = Vec::new();
        let mut any_hidden = false;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != 3 || row[0].parse::<usize>().ok() != Some(i) {
                return Err(bad(i + 1, "step"));
            }
            if row[1].is_empty() {
                hidden.push(f64::NAN);
            } else {
                any_hidden = true;
                hidden.push(row[1].parse().map_err(|_| bad(i + 1, "x"))?);
            }
            obs.push(row[2].parse().map_err(|_| bad(i + 1, "y"))?);
        }
        if obs.is_empty() {
            return Err(Error::invalid(format!("{}: no observations", path.display())));
        }
        if any_hidden && hidden.iter().any(|x| x.is_nan()) {
            return Err(Error::invalid(format!("{}: x column is only partly filled", path.display())));
        }
        Ok(Trajectory {
            hidden: any_hidden.then_some(hidden),
            obs,
            seed: 0,
            replication: 0,
            generator: String::new(),
        })
    }
}

/// Simulate `x_0 ~ init`, then `n` steps of the joint chain, with `y_k ~ G(x_k, .)`.
/// Step `k` draws from stream `(seed, replication, k)`.
pub fn simulate(
    model: &ModelSpec,
    n: usize,
    init: &InitialDistribution,
    support: Option<&Support>,
    seed: u64,
    replication: u64,
) -> Result<Trajectory> {
    let mut rng = stream(seed, replication, 0);
    let x0 = init.sample(support, &mut rng)?;
    model.check_state(x0)?;
    let mut hidden = Vec::with_capacity(n + 1);
    let mut obs = Vec::with_capacity(n + 1);
    hidden.push(x0);
    obs.push(model.sample_observation(x0, &mut rng));
    let mut x = x0;
    for k in 1..=n {
        let (xn, y) = model.sample_step(x, &mut stream(seed, replication, k as u64))?;
        hidden.push(xn);
        obs.push(y);
        x = xn;
    }
    Ok(Trajectory {
        hidden: Some(hidden),
        obs,
        seed,
        replication,
        generator: format!("{model}; x0 ~ {init:?}"),
    })
}
