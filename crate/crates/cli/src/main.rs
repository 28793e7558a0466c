use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sppe_core::constants::{sobolev_constant_on, ConstantsBundle};
use sppe_core::driver::{
    certify_ground_state, find_positive_solution, find_two_solutions, nonexistence_probe, sweep, write_sweep_csv,
    Context, SweepSpec,
};
use sppe_core::functional::{energy, nehari_value};
use sppe_core::identities::IdentityReport;
use sppe_core::io::{load_state, save_state, GridSpec, RunConfig, RunManifest};
use sppe_core::scalar::{solve_scalar, Branch};
use sppe_core::{Error, Params};

#[derive(Parser, Debug)]
#[command(name = "sppe", version, about = "Radial Schrödinger–Poisson system solver and verifier")]
struct Cli {
    /// Worker threads for `sweep` (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for state files, reports and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Positive vectorial solution with positive energy.
    Solve(RunArgs),
    /// Solve, then run the ground-state gate and criterion.
    Certify(RunArgs),
    /// Gradient flow from random seeds; reports whether every trajectory decays.
    Nonexist {
        #[command(flatten)]
        run: RunArgs,
        /// Number of random seeds (default from config, else 10).
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Positive- and negative-energy vectorial solutions (p < 2).
    TwoSolutions(RunArgs),
    /// One scalar solution at coupling `--mu` (default: mu11).
    Scalar {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "minus")]
        branch: BranchArg,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Closed-form thresholds and constants as JSON.
    Constants {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Use this Sobolev constant instead of computing it.
        #[arg(long)]
        sobolev: Option<f64>,
        #[arg(long, requires_all = ["mu22", "mu12"])]
        mu11: Option<f64>,
        #[arg(long)]
        mu22: Option<f64>,
        #[arg(long)]
        mu12: Option<f64>,
        #[arg(long, default_value_t = sppe_core::io::DEFAULT_R_MAX)]
        r_max: f64,
        #[arg(long, default_value_t = sppe_core::io::DEFAULT_N)]
        n: usize,
    },
    /// Identity residuals of a saved state (path to its JSON sidecar).
    Verify { state: PathBuf },
    /// Parameter sweep over the grid described in a JSON file.
    Sweep {
        grid_file: PathBuf,
        /// Run configuration supplying grid, solver and seed (params are ignored).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BranchArg {
    Minus,
    Plus,
}

/// Parameters come from `--config` and are overridden by individual flags.
#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu11: Option<f64>,
    #[arg(long)]
    mu22: Option<f64>,
    #[arg(long)]
    mu12: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    theta_nodes: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    sobolev: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Failures split by exit code.
enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Solver(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(inner) if !inner.is_config() => Failure::Solver(e),
            _ => Failure::Config(e),
        }
    }
}

fn missing(name: &str) -> Failure {
    Failure::Config(anyhow::anyhow!("--{name} is required when no --config supplies it"))
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<RunConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => {
                let p = self.p.ok_or_else(|| missing("p"))?;
                let mu11 = self.mu11.ok_or_else(|| missing("mu11"))?;
                let mu22 = self.mu22.ok_or_else(|| missing("mu22"))?;
                let mu12 = self.mu12.ok_or_else(|| missing("mu12"))?;
                RunConfig::new(Params { lambda: self.lambda.unwrap_or(1.0), p, mu11, mu22, mu12 })
            }
        };
        let prm = &mut cfg.params;
        prm.p = self.p.unwrap_or(prm.p);
        prm.lambda = self.lambda.unwrap_or(prm.lambda);
        prm.mu11 = self.mu11.unwrap_or(prm.mu11);
        prm.mu22 = self.mu22.unwrap_or(prm.mu22);
        prm.mu12 = self.mu12.unwrap_or(prm.mu12);
        cfg.grid.r_max = self.r_max.unwrap_or(cfg.grid.r_max);
        cfg.grid.n = self.n.unwrap_or(cfg.grid.n);
        cfg.solver.theta_nodes = self.theta_nodes.unwrap_or(cfg.solver.theta_nodes);
        cfg.solver.max_iter = self.max_iter.unwrap_or(cfg.solver.max_iter);
        cfg.sobolev_override = self.sobolev.or(cfg.sobolev_override);
        cfg.rng_seed = self.seed.unwrap_or(cfg.rng_seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output sink: JSON on stdout, plus files and a manifest when an output
/// directory is set.
struct Run {
    out: Option<PathBuf>,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    fn new(command: &str, out: Option<PathBuf>, config: Value, grid: Option<GridSpec>, seed: u64) -> Self {
        Self { out, manifest: RunManifest::new(command, config, grid, seed), started: Instant::now() }
    }

    fn save_state(&mut self, stem: &str, state: &sppe_core::PairFn, prm: &Params) -> anyhow::Result<()> {
        if let Some(dir) = &self.out {
            let path = save_state(dir, stem, state, prm)?;
            self.manifest.outputs.push(file_name(&path));
            self.manifest.outputs.push(format!("{stem}_u.csv"));
            self.manifest.outputs.push(format!("{stem}_v.csv"));
        }
        Ok(())
    }

    fn finish(mut self, result: &Value) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(result)?;
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("result.json"), &text)?;
            self.manifest.outputs.push("result.json".into());
            self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
            self.manifest.write(dir)?;
        }
        let mut stdout = io::stdout().lock();
        writeln!(stdout, "{text}")?;
        Ok(())
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn prepare(command: &str, args: &RunArgs, out: &Option<PathBuf>) -> Result<(RunConfig, Context, Run), Failure> {
    let cfg = args.resolve()?;
    let ctx = cfg.context()?;
    let out = out.clone().or_else(|| cfg.output_dir.clone());
    let config = serde_json::to_value(&cfg).map_err(anyhow::Error::from)?;
    let run = Run::new(command, out, config, Some(cfg.grid), cfg.rng_seed);
    Ok((cfg, ctx, run))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(anyhow::anyhow!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Solve(args) => {
            let (cfg, ctx, mut run) = prepare("solve", args, &cli.out)?;
            let sol = find_positive_solution(&cfg.params, &ctx)?;
            run.save_state("solution", &sol.state, &cfg.params)?;
            run.finish(&json!({ "params": cfg.params, "solution": sol.summary() }))?;
        }
        Command::Certify(args) => {
            let (cfg, ctx, mut run) = prepare("certify", args, &cli.out)?;
            let sol = find_positive_solution(&cfg.params, &ctx)?;
            let cert = certify_ground_state(&sol, &cfg.params, &ctx)?;
            run.save_state("solution", &sol.state, &cfg.params)?;
            run.finish(&json!({ "params": cfg.params, "solution": sol.summary(), "certification": cert }))?;
        }
        Command::Nonexist { run: args, seeds } => {
            let (cfg, ctx, mut run) = prepare("nonexist", args, &cli.out)?;
            let probe = nonexistence_probe(&cfg.params, seeds.unwrap_or(cfg.n_seeds), &ctx)?;
            if let Some((state, _)) = &probe.survivor {
                run.save_state("survivor", state, &cfg.params)?;
            }
            run.finish(&json!({ "params": cfg.params, "probe": probe.summary() }))?;
        }
        Command::TwoSolutions(args) => {
            let (cfg, ctx, mut run) = prepare("two-solutions", args, &cli.out)?;
            let two = find_two_solutions(&cfg.params, &ctx)?;
            run.save_state("first", &two.first.state, &cfg.params)?;
            run.save_state("second", &two.second.state, &cfg.params)?;
            run.finish(&json!({
                "params": cfg.params,
                "first": two.first.summary(),
                "second": two.second.summary(),
                "seed_energy": two.seed_energy,
                "scalar_energy_minus": two.scalar_energy_minus,
                "scalar_energy_plus": two.scalar_energy_plus,
            }))?;
        }
        Command::Scalar { run: args, branch, mu } => {
            let (cfg, ctx, mut run) = prepare("scalar", args, &cli.out)?;
            let mu = mu.unwrap_or(cfg.params.mu11);
            let prm = Params::scalar(cfg.params.lambda, cfg.params.p, mu)?;
            let branch = match branch {
                BranchArg::Minus => Branch::Minus,
                BranchArg::Plus => Branch::Plus,
            };
            let res = solve_scalar(&ctx.grid, &prm, mu, branch, &ctx.opts)?;
            if let Some(dir) = &run.out {
                fs::create_dir_all(dir).map_err(anyhow::Error::from)?;
                let f = fs::File::create(dir.join("scalar.csv")).map_err(anyhow::Error::from)?;
                res.w.write_csv(io::BufWriter::new(f))?;
                run.manifest.outputs.push("scalar.csv".into());
            }
            run.finish(&json!({
                "lambda": prm.lambda,
                "p": prm.p,
                "mu": mu,
                "branch": branch,
                "energy": res.energy,
                "nehari_class": res.nehari_class,
                "residual_norm": res.residual_norm,
                "nehari_residual": res.nehari_residual,
                "h1_norm_sq": res.h1_norm_sq,
                "iterations": res.iterations,
                "stop": res.stop,
            }))?;
        }
        Command::Constants { p, lambda, sobolev, mu11, mu22, mu12, r_max, n } => {
            let mu = match (mu11, mu22, mu12) {
                (Some(a), Some(b), Some(c)) => Some(Params::new(*lambda, *p, *a, *b, *c)?),
                _ => None,
            };
            let (s, source) = match sobolev {
                Some(s) => (*s, "override"),
                None => (sobolev_constant_on(*p, *lambda, *r_max, *n, &Default::default())?, "computed"),
            };
            let bundle = ConstantsBundle::new(*p, *lambda, s, source, mu.as_ref())?;
            let config = json!({ "p": p, "lambda": lambda, "sobolev": sobolev, "mu": mu, "r_max": r_max, "n": n });
            let grid = sobolev.is_none().then_some(GridSpec { r_max: *r_max, n: *n });
            let run = Run::new("constants", cli.out.clone(), config, grid, 0);
            run.finish(&serde_json::to_value(&bundle).map_err(anyhow::Error::from)?)?;
        }
        Command::Verify { state } => {
            let (st, prm) = load_state(state).map_err(|e| Failure::Config(e.into()))?;
            let report = IdentityReport::from_state(&st, &prm);
            let config = json!({ "state": state });
            let run = Run::new("verify", cli.out.clone(), config, None, 0);
            run.finish(&json!({
                "params": prm,
                "energy": energy(&st, &prm),
                "nehari_value": nehari_value(&st, &prm),
                "identities": report,
            }))?;
        }
        Command::Sweep { grid_file, config } => {
            let text = fs::read_to_string(grid_file).with_context(|| format!("reading {}", grid_file.display()))?;
            let spec: SweepSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", grid_file.display()))?;
            let base = match config {
                Some(path) => {
                    let cfg_text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<RunConfig>(&cfg_text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => RunConfig::new(Params { lambda: 1.0, p: 2.0, mu11: 1.0, mu22: 1.0, mu12: 1.0 }),
            };
            let ctx = base.context()?;
            let started = Instant::now();
            let rows = sweep(&spec, &ctx);
            let mut csv = Vec::new();
            write_sweep_csv(&rows, &mut csv)?;
            let out = cli.out.clone().or(base.output_dir.clone());
            match &out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(anyhow::Error::from)?;
                    fs::write(dir.join("sweep.csv"), &csv).map_err(anyhow::Error::from)?;
                    let config = json!({ "spec": spec, "run": base });
                    let mut manifest = RunManifest::new("sweep", config, Some(base.grid), base.rng_seed);
                    manifest.outputs.push("sweep.csv".into());
                    manifest.wall_time_s = started.elapsed().as_secs_f64();
                    manifest.write(dir)?;
                    let failed = rows.iter().filter(|r| r.error.is_some()).count();
                    eprintln!("{} rows written to {} ({failed} with errors)", rows.len(), dir.join("sweep.csv").display());
                }
                None => io::stdout().lock().write_all(&csv).map_err(anyhow::Error::from)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(1)
        }
    }
}
