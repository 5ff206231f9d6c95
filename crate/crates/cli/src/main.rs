use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use quartic::mesh::generate::{holed_plate, torus};
use quartic::mesh::save_obj;
use quartic_cli::{verify, Pipeline, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "quartic", about = "Quad-layout pipeline driven by a meromorphic quartic differential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Homology(Opts),
    Oneforms(Opts),
    Periods(Opts),
    Optimize(Opts),
    Ricci(Opts),
    Immerse(Opts),
    Tmesh(Opts),
    /// Run the selected stages in order.
    Pipeline(Opts),
    /// Recompute headline numbers from the artifacts in the output directory.
    Verify(Opts),
    /// Write a synthetic test surface as OBJ.
    Sample(SampleOpts),
}

#[derive(Args)]
struct SampleOpts {
    /// Output OBJ path.
    path: PathBuf,
    /// 1 gives a torus of revolution, larger values a plate with that many holes.
    #[arg(long, default_value_t = 2)]
    genus: usize,
    /// Subdivisions per voxel face (plates) or a tenth of the grid size (torus).
    #[arg(long, default_value_t = 6)]
    resolution: usize,
}

#[derive(Args)]
struct Opts {
    /// Input mesh (OBJ or PLY).
    input: Option<PathBuf>,
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    ricci_tol: Option<f64>,
    /// Optimizer iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<Stage>>,
}

impl Opts {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                PipelineConfig::from_toml(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.ricci_tol {
            cfg.ricci_tol = v;
        }
        if let Some(v) = self.max_iters {
            cfg.optimize_max_iters = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.stages {
            cfg.stages = v.clone();
        }
        if cfg.input.as_os_str().is_empty() {
            anyhow::bail!("no input mesh given");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (opts, only) = match &cli.command {
        Command::Homology(o) => (o, Some(Stage::Homology)),
        Command::Oneforms(o) => (o, Some(Stage::Oneforms)),
        Command::Periods(o) => (o, Some(Stage::Periods)),
        Command::Optimize(o) => (o, Some(Stage::Optimize)),
        Command::Ricci(o) => (o, Some(Stage::Ricci)),
        Command::Immerse(o) => (o, Some(Stage::Immerse)),
        Command::Tmesh(o) => (o, Some(Stage::Tmesh)),
        Command::Pipeline(o) => (o, None),
        Command::Sample(o) => {
            let mesh = match o.genus {
                0 => anyhow::bail!("genus must be at least 1"),
                1 => torus(10 * o.resolution, 5 * o.resolution, 3.0, 1.0),
                g => holed_plate(g, o.resolution, 10),
            };
            save_obj(&mesh, &o.path)?;
            println!("{} vertices, genus {}", mesh.n_vertices(), mesh.genus());
            return Ok(true);
        }
        Command::Verify(o) => {
            let checks = verify(&o.config()?)?;
            for c in &checks {
                println!("{} {} value={:.3e} tol={:.1e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            return Ok(checks.iter().all(|c| c.pass));
        }
    };
    let mut cfg = opts.config()?;
    if let Some(s) = only {
        cfg.stages = vec![s];
    }
    let report = Pipeline::new(cfg)?.run()?;
    for t in &report.stages {
        println!("{:<9} {:>9.3}s{}", t.stage, t.seconds, if t.cached { " (cached)" } else { "" });
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
