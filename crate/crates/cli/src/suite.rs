//! Criteria that span several configurations, with solved runs cached on
//! disk and in memory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use sinai_core::geometry::SurfaceSpec;

use crate::config::ExperimentConfig;
use crate::criteria::{self, Outcome};
use crate::error::{CliError, Result};
use crate::pipeline::{spectral_run, SpectralRun};

/// Experiment files the suite reads from the configs directory.
pub const DYNAMICS_CONFIGS: [&str; 3] = [
    "torus_dynamics.toml",
    "two_disk_dynamics.toml",
    "rectangle_disk_dynamics.toml",
];
pub const SQUARE_SPECTRUM: &str = "square_spectrum.toml";
pub const SQUARE_EULER: &str = "square_euler.toml";
pub const TORUS_DIRICHLET: &str = "torus_dirichlet.toml";
pub const TORUS_NEUMANN: &str = "torus_neumann.toml";

pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=11;

pub struct Suite {
    configs: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    runs: HashMap<String, Rc<SpectralRun>>,
    /// Seconds each run took to produce, recorded once.
    cost: HashMap<String, f64>,
    /// Time spent loading runs during the current evaluation.
    loading: f64,
    /// Cost of the runs the current criterion owns.
    owned: f64,
}

impl Suite {
    pub fn new(configs: impl Into<PathBuf>, out: impl Into<PathBuf>, seed: Option<u64>) -> Self {
        Self {
            configs: configs.into(),
            out: out.into(),
            seed,
            runs: HashMap::new(),
            cost: HashMap::new(),
            loading: 0.0,
            owned: 0.0,
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    fn config(&self, file: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.configs.join(file))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn spec(&self, file: &str) -> Result<(ExperimentConfig, SurfaceSpec)> {
        let cfg = self.config(file)?;
        let spec = cfg.surface_spec()?;
        Ok((cfg, spec))
    }

    fn run_with(&mut self, key: &str, cfg: &ExperimentConfig, charge: bool) -> Result<Rc<SpectralRun>> {
        let run = match self.runs.get(key) {
            Some(r) => r.clone(),
            None => {
                let spec = cfg.surface_spec()?;
                let t = Instant::now();
                let run = Rc::new(spectral_run(key, cfg, &spec, &self.out.join(key), true)?);
                let secs = t.elapsed().as_secs_f64();
                self.loading += secs;
                self.cost.insert(key.to_string(), secs);
                self.runs.insert(key.to_string(), run.clone());
                run
            }
        };
        if charge {
            self.owned += self.cost[key];
        }
        Ok(run)
    }

    /// A solved configuration. With `charge` its production time counts
    /// against the current criterion, whichever criterion first needed it.
    pub fn run(&mut self, file: &str, charge: bool) -> Result<Rc<SpectralRun>> {
        let cfg = self.config(file)?;
        let key = file.trim_end_matches(".toml").to_string();
        self.run_with(&key, &cfg, charge)
    }

    /// Evaluate one criterion. The seconds are its own work plus the cost of
    /// the runs it owns.
    pub fn evaluate(&mut self, id: u8) -> Result<(Outcome, f64)> {
        self.loading = 0.0;
        self.owned = 0.0;
        let t = Instant::now();
        let outcome = self.dispatch(id)?;
        let secs = (t.elapsed().as_secs_f64() - self.loading).max(0.0) + self.owned;
        Ok((outcome, secs))
    }

    fn dispatch(&mut self, id: u8) -> Result<Outcome> {
        let (torus_cfg, torus) = self.spec(DYNAMICS_CONFIGS[0])?;
        let seed = torus_cfg.seed;
        match id {
            1 => criteria::c1_monodromy(&torus),
            2 => criteria::c2_symplectic(&torus, seed),
            3 => {
                let specs = DYNAMICS_CONFIGS
                    .iter()
                    .map(|f| Ok((f.trim_end_matches(".toml").to_string(), self.spec(f)?.1)))
                    .collect::<Result<Vec<_>>>()?;
                criteria::c3_conjugate(&specs, seed)
            }
            4 => criteria::c4_loops(&torus, seed),
            5 => {
                let square = self.run(SQUARE_SPECTRUM, true)?;
                let others = [SQUARE_EULER, TORUS_DIRICHLET, TORUS_NEUMANN]
                    .into_iter()
                    .map(|f| self.run(f, false))
                    .collect::<Result<Vec<_>>>()?;
                let mut runs: Vec<(&str, &_)> = vec![(square.name.as_str(), &square.ensemble)];
                runs.extend(others.iter().map(|r| (r.name.as_str(), &r.ensemble)));
                Ok(criteria::c5_spectrum(&square.spectrum, &runs))
            }
            6 => {
                let runs = [SQUARE_EULER, TORUS_DIRICHLET]
                    .into_iter()
                    .map(|f| Ok((f, self.run(f, true)?)))
                    .collect::<Result<Vec<_>>>()?;
                let mut refined = Vec::new();
                for (file, run) in &runs {
                    let (_, fails) = criteria::euler_failures(&run.ensemble);
                    refined.push(if fails.is_empty() {
                        None
                    } else {
                        Some(self.refine(file, &fails)?)
                    });
                }
                let named: Vec<(&str, &_)> = runs.iter().map(|(_, r)| (r.name.as_str(), &r.ensemble)).collect();
                Ok(criteria::c6_euler(&named, &refined))
            }
            7..=10 => {
                let charge = id == 7;
                let d = self.run(TORUS_DIRICHLET, charge)?;
                let n = self.run(TORUS_NEUMANN, charge)?;
                let ens = [&d.ensemble, &n.ensemble];
                let fs = self.config(TORUS_DIRICHLET)?.test_functions(&d.ensemble.spec)?;
                match id {
                    7 => criteria::c7_kuznecov(&ens, &fs),
                    8 => Ok(criteria::c8_chebyshev(&ens, &fs)),
                    9 => criteria::c9_weyl(&ens, &fs),
                    _ => Ok(criteria::c10_sign_changes(&ens)),
                }
            }
            11 => Ok(criteria::c11_density()),
            other => Err(CliError::Config(format!("no criterion {other}; expected 1 to 11"))),
        }
    }

    /// Euler failures left among the same number of modes at twice the
    /// resolution.
    fn refine(&mut self, file: &str, fails: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
        let mut cfg = self.config(file)?;
        cfg.resolution *= 2;
        cfg.modes = fails.iter().map(|f| f.0).max().unwrap_or(0) + 1;
        cfg.lambda_cut = None;
        let key = format!("{}_refined", file.trim_end_matches(".toml"));
        log::info!(
            "{key}: rechecking {} Euler failures at resolution {}",
            fails.len(),
            cfg.resolution
        );
        let run = self.run_with(&key, &cfg, true)?;
        Ok(run
            .ensemble
            .modes
            .iter()
            .filter_map(|m| m.nodal.as_ref())
            .filter(|r| !r.euler.pass)
            .map(|r| (r.index, r.lambda))
            .collect())
    }
}
