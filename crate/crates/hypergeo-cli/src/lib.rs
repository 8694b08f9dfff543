//! Command surface: one subcommand per library module, a shared set of
//! override flags, and deterministic content-hashed artifacts.

pub mod artifact;
pub mod commands;
pub mod config;

use clap::{Parser, Subcommand, ValueEnum};
use config::{Overrides, RunConfig};
use hypergeo::error::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "hypergeo",
    version,
    about = "Geodesic pulse synthesis and analysis for parametric Hamiltonians"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a geodesic pulse; --family emits every n_plus grid
    /// member plus the step comparator.
    Synthesize {
        #[arg(long)]
        family: bool,
    },
    /// Propagate one pulse at one duration, or emit the perturbative
    /// adiabaticity report with resonance times.
    Evolve {
        #[arg(long, value_enum, default_value_t = EvolveReport::Single)]
        report: EvolveReport,
    },
    /// Minimum-infidelity maps and curves over the configured grids.
    Sweep {
        #[arg(long, value_enum, default_value_t = SweepScan::Ab)]
        scan: SweepScan,
        /// Replace the geodesic with the instantaneous step comparator
        /// (t_f scan only).
        #[arg(long)]
        comparator: bool,
    },
    /// Quasistatic Monte Carlo infidelity; scan-count > 1 sweeps the
    /// amplitude scale linearly from zero to the configured sigmas.
    Noise {
        #[arg(long, default_value_t = 1)]
        scan_count: usize,
    },
    /// Toggling-frame filter functions on a log frequency grid.
    Filterfn {
        #[arg(long, default_value_t = 0.01)]
        f_min: f64,
        #[arg(long, default_value_t = 10.0)]
        f_max: f64,
        #[arg(long, default_value_t = 12)]
        per_decade: usize,
    },
    /// Pulse-family function bases: target reconstruction, Gram rank
    /// growth, and hardest-target maps.
    Basis {
        #[arg(long, value_enum, default_value_t = BasisTask::Cubic)]
        task: BasisTask,
        #[arg(long, default_value_t = hypergeo::basis::PRUNE_THRESHOLD)]
        prune_threshold: f64,
        #[arg(long, default_value_t = hypergeo::basis::DEFAULT_GRID_CELLS)]
        n_cells: usize,
        #[arg(long, default_value_t = 0.5)]
        tau1_min: f64,
        #[arg(long, default_value_t = 8.0)]
        tau1_max: f64,
        #[arg(long, default_value_t = 10)]
        tau1_count: usize,
        #[arg(long, default_value_t = 0.25)]
        tau2_min: f64,
        #[arg(long, default_value_t = 0.95)]
        tau2_max: f64,
        #[arg(long, default_value_t = 10)]
        tau2_count: usize,
    },
    /// Hardware constraints: slew rate, occupied bandwidth, and the
    /// filtered-transfer map.
    Feasibility {
        #[arg(long, value_enum, default_value_t = FeasTask::Report)]
        task: FeasTask,
    },
    /// Sphere closed forms, embeddings, and spectral bands.
    Geometry {
        #[arg(long, value_enum, default_value_t = GeomTask::Report)]
        task: GeomTask,
        #[arg(long, default_value_t = 181)]
        theta_count: usize,
        #[arg(long, default_value_t = 73)]
        phi_count: usize,
    },
    /// Synthesis run-time scaling: (alpha, beta) pairs, anticrossing
    /// count, and retained-state count.
    Bench {
        #[arg(long, value_enum, default_value_t = BenchScan::All)]
        scan: BenchScan,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, default_value_t = 7)]
        reps: usize,
        /// Anticrossing counts, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 1024)]
        samples_per_anticrossing: usize,
        /// Synthesis sample count for the pair and size scans.
        #[arg(long, default_value_t = 257)]
        bench_samples: usize,
        /// Size scan as N:k_max pairs, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            default_values_t = ["4:2".to_string(), "4:3".to_string(), "4:4".to_string(), "8:2".to_string(), "8:4".to_string(), "8:6".to_string()]
        )]
        sizes: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvolveReport {
    Single,
    Adiabatic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepScan {
    /// Minimum infidelity over the (alpha, beta) grid.
    Ab,
    /// Infidelity against duration for the configured protocol.
    Tf,
    /// Optimum and adiabatic threshold against the exponent sum.
    Np,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisTask {
    Cubic,
    Rank,
    LambdaMap,
    Shuttle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeasTask {
    Report,
    Scan,
    FilteredMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeomTask {
    Report,
    VolumeMap,
    Embedding,
    Band,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchScan {
    All,
    Pairs,
    Anticrossings,
    Sizes,
}

/// Size the global worker pool from HYPERGEO_WORKERS when set.
pub fn init_workers() -> Result<()> {
    match std::env::var("HYPERGEO_WORKERS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::Config(format!("HYPERGEO_WORKERS must be a count, got '{raw}'"))
            })?;
            if n == 0 {
                return Err(Error::Config("HYPERGEO_WORKERS must be positive".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))
        }
        Err(_) => Ok(()),
    }
}

pub fn run(cli: &Cli) -> Result<artifact::Outcome> {
    let cfg = RunConfig::load(&cli.overrides)?;
    match &cli.command {
        Command::Synthesize { family } => commands::synthesize::run(&cfg, *family),
        Command::Evolve { report } => commands::evolve::run(&cfg, *report),
        Command::Sweep { scan, comparator } => commands::sweep::run(&cfg, *scan, *comparator),
        Command::Noise { scan_count } => commands::noise::run(&cfg, *scan_count),
        Command::Filterfn {
            f_min,
            f_max,
            per_decade,
        } => commands::filterfn::run(&cfg, *f_min, *f_max, *per_decade),
        Command::Basis {
            task,
            prune_threshold,
            n_cells,
            tau1_min,
            tau1_max,
            tau1_count,
            tau2_min,
            tau2_max,
            tau2_count,
        } => commands::basis::run(
            &cfg,
            *task,
            *prune_threshold,
            *n_cells,
            config::Grid {
                min: *tau1_min,
                max: *tau1_max,
                count: *tau1_count,
            },
            config::Grid {
                min: *tau2_min,
                max: *tau2_max,
                count: *tau2_count,
            },
        ),
        Command::Feasibility { task } => commands::feasibility::run(&cfg, *task),
        Command::Geometry {
            task,
            theta_count,
            phi_count,
        } => commands::geometry::run(&cfg, *task, *theta_count, *phi_count),
        Command::Bench {
            scan,
            warmup,
            reps,
            counts,
            samples_per_anticrossing,
            bench_samples,
            sizes,
        } => commands::bench::run(
            &cfg,
            *scan,
            hypergeo::bench::BenchSpec {
                warmup: *warmup,
                reps: *reps,
            },
            counts,
            *samples_per_anticrossing,
            *bench_samples,
            sizes,
        ),
    }
}
