use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use swarmtopo::geometry::{validate_region, DEFAULT_MIN_ANGLE};
use swarmtopo::pipeline::{density_warnings, run_sweep, AlphaChoice, PipelineConfig};
use swarmtopo_cli::report::{write_costs, write_json, write_sweep};
use swarmtopo_cli::{
    cmd_oracle, cmd_paper_repro, cmd_run, init_threads, load_region, repro_mu, CliError, REFERENCE_BOUNDARY_AND_NEAR,
    REFERENCE_INTERIOR, REFERENCE_RATIOS, REPRO_NODES,
};

#[derive(Parser)]
#[command(name = "swarmtopo", version, about = "Coordinate-free topology recognition in dense sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a region and print its geometric parameters.
    Validate {
        #[arg(long, default_value = "standard")]
        region: String,
    },
    /// Run every phase and write the reports.
    Run(RunArgs),
    /// Run the alpha sweep for several seeds.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Score a finished run against the region's geometry.
    Oracle(RunArgs),
    /// Full-scale runs on the standard region.
    PaperRepro {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug)]
struct AlphaArg(AlphaChoice);

impl FromStr for AlphaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "sweep" {
            return Ok(Self(AlphaChoice::Sweep));
        }
        s.parse::<f64>()
            .map(|a| Self(AlphaChoice::Fixed(a)))
            .map_err(|_| format!("expected a number or \"sweep\", got {s:?}"))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Region file, or a builtin: standard, annulus.
    #[arg(long, default_value = "standard")]
    region: String,
    #[arg(long, default_value_t = 20_000)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fixed alpha, or "sweep" to calibrate it.
    #[arg(long, default_value = "sweep")]
    alpha: AlphaArg,
    #[arg(long)]
    bins: Option<usize>,
    /// Voronoi tolerance in hops.
    #[arg(long)]
    voronoi_tol: Option<u32>,
    /// Smallest recognized component.
    #[arg(long)]
    min_comp: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write per-phase message traces into the output directory.
    #[arg(long)]
    trace: bool,
}

impl RunArgs {
    fn config(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            nodes: self.nodes,
            seed: self.seed,
            alpha: self.alpha.0,
            bin_count: self.bins.unwrap_or(d.bin_count),
            voronoi_tolerance: self.voronoi_tol.unwrap_or(d.voronoi_tolerance),
            min_component_size: self.min_comp.unwrap_or(d.min_component_size),
            ..d
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Validate { region } => {
            let r = load_region(&region)?;
            print_json(&validate_region(&r, DEFAULT_MIN_ANGLE)?);
        }
        Command::Run(args) => {
            let region = load_region(&args.region)?;
            let cfg = args.config();
            for w in density_warnings(&region, &cfg) {
                eprintln!("warning: {w}");
            }
            let s = cmd_run(&args.region, &region, &cfg, &args.out, args.trace)?;
            println!(
                "mu_analytic {:.2}  mu_est {}  alpha {:.3}  components {}  outer {}  voronoi {}  thickness {}",
                s.mu_analytic,
                s.mu_est,
                s.alpha_star,
                s.components.len(),
                s.outer_id.map_or("-".into(), |o| o.to_string()),
                s.voronoi_count,
                s.thickness_estimate.map_or("-".into(), |t| format!("{t:.3}")),
            );
            for w in s.warnings.iter().skip(density_warnings(&region, &cfg).len()) {
                eprintln!("warning: {w}");
            }
        }
        Command::Sweep { run, seeds } => {
            let region = load_region(&run.region)?;
            let base = run.config();
            std::fs::create_dir_all(&run.out).map_err(|e| CliError::io(&run.out, e))?;
            let results: Result<Vec<_>, CliError> = (base.seed..base.seed + seeds)
                .into_par_iter()
                .map(|seed| {
                    let cfg = PipelineConfig { seed, ..base.clone() };
                    let dir = run.out.join(format!("seed_{seed}"));
                    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                    let s = run_sweep(&region, &cfg, run.trace.then_some(dir.as_path()))?;
                    write_sweep(&dir.join("sweep.csv"), &s.sweep).map_err(|e| CliError::io(&dir, e))?;
                    write_costs(&dir.join("costs.csv"), &s.costs).map_err(|e| CliError::io(&dir, e))?;
                    write_json(&dir.join("sweep.json"), &s).map_err(|e| CliError::io(&dir, e))?;
                    Ok((seed, s))
                })
                .collect();
            for (seed, s) in results? {
                let plateau = s.sweep.plateau.as_ref().map_or("none".into(), |p| {
                    format!("{} components over alpha {:.2}..{:.2}", p.count, p.alpha_lo, p.alpha_hi)
                });
                println!("seed {seed}: mu_est {}  plateau {plateau}  alpha* {:.3}", s.density.mu_est, s.sweep.alpha_star);
            }
        }
        Command::Oracle(args) => {
            let region = load_region(&args.region)?;
            let s = cmd_oracle(&args.region, &region, &args.config(), &args.out)?;
            for b in &s.bands {
                println!("band {:.2}R  precision {:.4}  recall {:.4}", b.band, b.precision, b.recall);
            }
            println!("false boundary rate (>= 1.5R)  {:.4}", s.false_boundary.rate());
            println!("detection rate (0.25R)         {:.4}", s.detection.rate());
            println!("all boundaries recognized      {}", s.all_recognized);
            println!("outer boundary correct         {}", s.outer_correct);
            println!("voronoi hit rate               {:.4}", s.voronoi.rate());
            if let Some(t) = &s.thickness {
                println!(
                    "thickness {:.3} vs inradius {:.3} (best node at {:.3})  within band {}",
                    t.estimate, t.inradius, t.best_node_distance, t.within_band
                );
            }
            if let Some(e) = s.fractional_error {
                println!("fractional distance error      {e:.4} over {} nodes", s.fractional_nodes);
            }
            for row in &s.band_areas {
                println!(
                    "curve {}  outer band {:.3} / {:.3}  inner band {:.3} / {:.3}",
                    row.curve, row.closed_outer, row.sampled_outer, row.closed_inner, row.sampled_inner
                );
            }
        }
        Command::PaperRepro { out } => {
            let rows = cmd_paper_repro(out.as_deref())?;
            println!("n = {REPRO_NODES}, mu_analytic = {:.2}", repro_mu());
            for r in &rows {
                println!(
                    "seed {}: mu_est {} ({:.2}%)  delta/mu {:.3}  alpha* {:.3}  components {}  boundary+near {} (reference {})  interior {} (reference {})",
                    r.seed,
                    r.mu_est,
                    100.0 * r.mu_error,
                    r.delta_over_mu,
                    r.alpha_star,
                    r.components,
                    r.boundary_and_near,
                    REFERENCE_BOUNDARY_AND_NEAR,
                    r.interior,
                    REFERENCE_INTERIOR,
                );
                for (k, (size, near, ratio)) in r.ratios.iter().enumerate() {
                    let tag = if k == 0 { " (outer)" } else { "" };
                    println!("    |D| {size:>5}  |N(D)| {near:>6}  ratio {ratio:.3}{tag}");
                }
            }
            let reference: Vec<String> = REFERENCE_RATIOS.iter().map(|r| format!("{r:.3}")).collect();
            println!("reference ratios: {}", reference.join(", "));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
