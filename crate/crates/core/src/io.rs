//! Run configuration, state files and run manifests.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::descent::SolverOptions;
use crate::driver::Context;
use crate::error::{Error, Result};
use crate::functional::{PairFn, Params};
use crate::grid::{RadialFn, RadialGrid};

pub const DEFAULT_R_MAX: f64 = 40.0;
pub const DEFAULT_N: usize = 4000;
pub const DEFAULT_SEED: u64 = 0x5eed;
pub const DEFAULT_PROBE_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { r_max: DEFAULT_R_MAX, n: DEFAULT_N }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(self.r_max, self.n)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: Params,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_decompose_tol")]
    pub decompose_tol: f64,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    #[serde(default = "default_probe_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub sobolev_override: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_decompose_tol() -> f64 {
    1e-3
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_probe_seeds() -> usize {
    DEFAULT_PROBE_SEEDS
}

impl RunConfig {
    pub fn new(params: Params) -> Self {
        Self {
            params,
            grid: GridSpec::default(),
            solver: SolverOptions::default(),
            decompose_tol: default_decompose_tol(),
            rng_seed: DEFAULT_SEED,
            n_seeds: DEFAULT_PROBE_SEEDS,
            sobolev_override: None,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        RadialGrid::new(self.grid.r_max, self.grid.n)?;
        self.solver.validate()?;
        if !(self.decompose_tol > 0.0 && self.decompose_tol.is_finite()) {
            return Err(Error::Config(format!("decompose_tol must be positive, got {}", self.decompose_tol)));
        }
        if let Some(s) = self.sobolev_override {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sobolev_override must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Validates and builds the solver context.
    pub fn context(&self) -> Result<Context> {
        self.validate()?;
        let mut ctx = Context::new(self.grid.build()?);
        ctx.opts = self.solver.clone();
        ctx.sobolev_override = self.sobolev_override;
        ctx.decompose_tol = self.decompose_tol;
        ctx.rng_seed = self.rng_seed;
        Ok(ctx)
    }
}

/// JSON sidecar naming the grid and parameters of a `(u, v)` CSV pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSidecar {
    pub grid: GridSpec,
    pub params: Params,
    /// Paths relative to the sidecar's directory.
    pub u: String,
    pub v: String,
}

/// Writes `<stem>_u.csv`, `<stem>_v.csv` and `<stem>.json` into `dir`;
/// returns the sidecar path.
pub fn save_state(dir: &Path, stem: &str, state: &PairFn, params: &Params) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let grid = state.grid();
    let side = StateSidecar {
        grid: GridSpec { r_max: grid.r_max(), n: grid.n() },
        params: *params,
        u: format!("{stem}_u.csv"),
        v: format!("{stem}_v.csv"),
    };
    state.u.write_csv(BufWriter::new(File::create(dir.join(&side.u))?))?;
    state.v.write_csv(BufWriter::new(File::create(dir.join(&side.v))?))?;
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&side)?)?;
    Ok(path)
}

pub fn load_state(sidecar: &Path) -> Result<(PairFn, Params)> {
    let side: StateSidecar = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    side.params.validate()?;
    let grid = side.grid.build()?;
    let base = sidecar.parent().unwrap_or(Path::new("."));
    let read = |name: &str| -> Result<RadialFn> {
        RadialFn::read_csv(grid.clone(), BufReader::new(File::open(base.join(name))?))
    };
    let state = PairFn::new(read(&side.u)?, read(&side.v)?)?;
    Ok((state, side.params))
}

/// Everything needed to rerun a command and compare outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub grid: Option<GridSpec>,
    pub rng_seed: u64,
    pub version: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, grid: Option<GridSpec>, rng_seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            config,
            grid,
            rng_seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            threads: rayon::current_num_threads(),
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"params":{"lambda":1,"p":2.5,"mu11":0.05,"mu22":0.1,"mu12":0.05}}"#).unwrap();
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.solver, SolverOptions::default());
        assert_eq!(cfg.rng_seed, DEFAULT_SEED);
        assert!(cfg.sobolev_override.is_none());
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for text in [
            r#"{"params":{"lambda":1,"p":3.5,"mu11":0.05,"mu22":0.1,"mu12":0.05}}"#,
            r#"{"params":{"lambda":1,"p":2.5,"mu11":0.05,"mu22":0.1,"mu12":0.05},"grid":{"r_max":10,"n":8}}"#,
            r#"{"params":{"lambda":1,"p":2.5,"mu11":0.05,"mu22":0.1,"mu12":0.05},"sobolev_override":-1}"#,
            r#"{"params":{"lambda":1}}"#,
        ] {
            assert!(RunConfig::from_json(text).unwrap_err().is_config(), "{text}");
        }
    }

    #[test]
    fn override_reaches_context_unchanged() {
        let mut cfg = RunConfig::new(Params::new(1.0, 2.0, 0.1, 0.1, 0.05).unwrap());
        cfg.sobolev_override = Some(0.123_456_789_012_345_6);
        cfg.grid = GridSpec { r_max: 10.0, n: 100 };
        let ctx = cfg.context().unwrap();
        assert_eq!(ctx.sobolev(2.0, 1.0).unwrap().to_bits(), 0.123_456_789_012_345_6f64.to_bits());
    }

    #[test]
    fn state_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(10.0, 64).unwrap();
        let st = PairFn::new(g.sample(|r| (-r).exp() / 3.0), g.sample(|r| r * (-r * r).exp())).unwrap();
        let prm = Params::new(1.0, 2.2, 0.01, 0.02, 0.005).unwrap();
        let side = save_state(dir.path(), "sol", &st, &prm).unwrap();
        let (back, p2) = load_state(&side).unwrap();
        assert_eq!(p2, prm);
        assert_eq!(back.u.values(), st.u.values());
        assert_eq!(back.v.values(), st.v.values());
    }

    proptest! {
        #[test]
        fn config_round_trip(
            lambda in 0.1f64..5.0, p in 1.01f64..2.99,
            m in proptest::array::uniform3(0.001f64..10.0),
            n in 16usize..10000, r_max in 1.0f64..100.0,
            seed in any::<u64>(), s in proptest::option::of(0.01f64..10.0),
        ) {
            let mut cfg = RunConfig::new(Params { lambda, p, mu11: m[0], mu22: m[1], mu12: m[2] });
            cfg.grid = GridSpec { r_max, n };
            cfg.rng_seed = seed;
            cfg.sobolev_override = s;
            let text = cfg.to_json().unwrap();
            let back = RunConfig::from_json(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_json().unwrap(), text);
        }
    }
}
