//! Command-line front end: `fit`, `grid`, `gini` and `synth`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::concentration::{gini_grouped, load_grouped_csv};
use crate::dataset::Dataset;
use crate::engine::{self, EngineConfig, FitResult, SweepOrder, DEFAULT_ETA, DEFAULT_MAX_ITR};
use crate::error::{Error, Result};
use crate::io::{emit_report, load_dataset, write_dataset_csv, Report, Schema};
use crate::likelihood::{self, ClusterFit, FitOptions, ModelFamily};
use crate::selection::{self, DEFAULT_SEEDS};
use crate::synthesis::{self, score_recovery};
use crate::weights::{format_adjacency, SpatialWeights};

#[derive(Debug, Parser)]
#[command(name = "scsar", version, about = "Spatially clustered spatial regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate one (family, K, phi) configuration.
    Fit(FitArgs),
    /// Search a (K, phi) grid and pick a configuration by the BIC elbow.
    Grid(GridArgs),
    /// Grouped Gini index per region.
    Gini(GiniArgs),
    /// Simulate data from a spec file, optionally fitting it.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Ols,
    Sar,
    Sem,
    Slx,
}

impl From<Family> for ModelFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Ols => ModelFamily::Ols,
            Family::Sar => ModelFamily::Sar,
            Family::Sem => ModelFamily::Sem,
            Family::Slx => ModelFamily::Slx,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sweep {
    Sequential,
    Simultaneous,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Unit-level CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long, default_value = "id")]
    id_col: String,
    #[arg(long, default_value = "coord_x")]
    x_col: String,
    #[arg(long, default_value = "coord_y")]
    y_col: String,
    /// Covariate columns; defaults to all remaining columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long)]
    no_intercept: bool,
    /// Adjacency list (`id id` per line).
    #[arg(long, conflicts_with = "knn")]
    adjacency: Option<PathBuf>,
    /// Symmetrised k-nearest-neighbour graph on the coordinates.
    #[arg(long)]
    knn: Option<usize>,
}

#[derive(Debug, Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "sar")]
    family: Family,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITR)]
    max_itr: usize,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long, value_enum, default_value = "sequential")]
    sweep: Sweep,
    /// Also lag all-ones columns in SLX designs.
    #[arg(long)]
    slx_lag_intercept: bool,
}

impl EngineArgs {
    fn config(&self, k: usize, phi: f64, seed: u64) -> EngineConfig {
        EngineConfig {
            family: self.family.into(),
            k,
            phi,
            max_itr: self.max_itr,
            eta: self.eta,
            seed,
            min_cluster_size: self.min_cluster_size,
            sweep: match self.sweep {
                Sweep::Sequential => SweepOrder::Sequential,
                Sweep::Simultaneous => SweepOrder::Simultaneous,
            },
            slx_lag_intercept: self.slx_lag_intercept,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    phi: f64,
    #[arg(long, default_value_t = 1, conflicts_with = "seeds")]
    seed: u64,
    /// Multi-start: keep the seed with the best penalised objective.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    ks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,1")]
    phis: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
    seeds: Vec<u64>,
    /// Report this `K,phi` instead of the elbow choice.
    #[arg(long, value_delimiter = ',')]
    select: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GiniArgs {
    /// CSV with columns region_id, class_rank, farm_count, total_output.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// `key = value` spec file.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fit the generated data with the true K.
    #[arg(long)]
    fit: bool,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
    seeds: Vec<u64>,
    #[command(flatten)]
    engine: EngineArgs,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code. Failures print one line
/// `error: <Code>: <message>` to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: Usage: {first}");
            eprint!("{}", e.render());
            return 2;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Gini(a) => cmd_gini(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn load(args: &DataArgs) -> Result<(Dataset, SpatialWeights)> {
    let schema = Schema {
        id: args.id_col.clone(),
        x_coord: args.x_col.clone(),
        y_coord: args.y_col.clone(),
        response: args.response.clone(),
        covariates: args.covariates.clone(),
        intercept: !args.no_intercept,
    };
    let dataset = load_dataset(&args.data, &schema)?;
    let w = match (&args.adjacency, args.knn) {
        (Some(path), _) => SpatialWeights::read_adjacency_file(path, dataset.index())?,
        (None, Some(k)) => {
            let (w, coincident) = SpatialWeights::from_knn(dataset.coords(), k)?;
            for (i, j) in coincident {
                eprintln!(
                    "warning: units {} and {} share coordinates",
                    dataset.index().id(i),
                    dataset.index().id(j)
                );
            }
            w
        }
        (None, None) => {
            return Err(Error::InvalidConfig("one of --adjacency or --knn is required".into()));
        }
    };
    Ok((dataset, w))
}

fn pooled_fit(d: &Dataset, w: &SpatialWeights, config: &EngineConfig) -> Result<ClusterFit> {
    let opts = FitOptions {
        lenient: false,
        std_errors: true,
        slx_lag_intercept: config.slx_lag_intercept,
    };
    likelihood::fit(config.family, d.y(), d.x(), w, &opts)
}

fn write_report(d: &Dataset, w: &SpatialWeights, result: &FitResult, out: &Path) -> Result<Report> {
    let pooled = pooled_fit(d, w, &result.config)?;
    let report = Report::new(result, &pooled, d);
    emit_report(&report, out)?;
    Ok(report)
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let (d, w) = load(&a.data)?;
    let result = match &a.seeds {
        Some(seeds) => engine::run_best_of(&d, &w, &a.engine.config(a.k, a.phi, seeds[0]), seeds)?,
        None => engine::run(&d, &w, &a.engine.config(a.k, a.phi, a.seed))?,
    };
    write_report(&d, &w, &result, &a.out)?;
    println!(
        "K={} phi={} seed={} loglik={:.4} bic={:.4} sizes={:?} -> {}",
        a.k,
        a.phi,
        result.config.seed,
        result.total_loglik,
        result.bic,
        result.sizes(),
        a.out.display()
    );
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let (d, w) = load(&a.data)?;
    let defaults = a.engine.config(1, 0.0, 0);
    let grid = selection::grid_search(&d, &w, defaults.family, &a.ks, &a.phis, &a.seeds, &defaults)?;
    fs::create_dir_all(&a.out)?;
    selection::write_grid_csv(&grid.entries, fs::File::create(a.out.join("grid.csv"))?)?;
    let mut json = serde_json::to_string_pretty(&grid)?;
    json.push('\n');
    fs::write(a.out.join("selection.json"), json)?;
    for f in &grid.failures {
        eprintln!("warning: K={} phi={} failed: {}", f.k, f.phi, f.error);
    }
    let (k, phi) = match (&a.select, &grid.chosen) {
        (Some(sel), _) => match sel[..] {
            [k, phi] if k >= 1.0 && k.fract() == 0.0 => (k as usize, phi),
            _ => return Err(Error::InvalidConfig("--select expects K,PHI".into())),
        },
        (None, Some(c)) => {
            if c.fallback {
                eprintln!("warning: fewer than three K values; chose the minimum BIC");
            }
            if c.ambiguous {
                eprintln!("warning: elbow is ambiguous (flat or tied curvature)");
            }
            (c.k, c.phi)
        }
        (None, None) => return Err(Error::InsufficientGrid),
    };
    let entry = grid
        .entries
        .iter()
        .find(|e| e.k == k && e.phi == phi)
        .ok_or_else(|| Error::InvalidConfig(format!("K={k} phi={phi} is not in the grid")))?;
    let result = engine::run(&d, &w, &a.engine.config(k, phi, entry.seed))?;
    write_report(&d, &w, &result, &a.out)?;
    println!("chosen K={k} phi={phi} (seed {}) -> {}", entry.seed, a.out.display());
    Ok(())
}

fn cmd_gini(a: GiniArgs) -> Result<()> {
    let regions = load_grouped_csv(&a.data)?;
    let mut buf: Vec<u8> = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        wtr.write_record(["region_id", "gini"])?;
        for r in &regions {
            wtr.write_record([r.region_id.clone(), gini_grouped(r)?.to_string()])?;
        }
        wtr.flush()?;
    }
    match a.out {
        Some(p) => fs::write(p, buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec = synthesis::parse_spec(&fs::read_to_string(&a.spec)?)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let sim = synthesis::generate(&spec)?;
    fs::create_dir_all(&a.out)?;
    write_dataset_csv(&sim.dataset, "y", fs::File::create(a.out.join("data.csv"))?)?;
    fs::write(a.out.join("adjacency.txt"), format_adjacency(&sim.weights, sim.dataset.index()))?;
    let mut wtr = csv::Writer::from_path(a.out.join("truth.csv"))?;
    wtr.write_record(["unit_id", "cluster"])?;
    for (i, c) in sim.truth.one_based().iter().enumerate() {
        wtr.write_record([sim.dataset.index().id(i), &c.to_string()])?;
    }
    wtr.flush()?;
    if a.fit {
        let cfg = EngineConfig {
            family: spec.clusters[0].family,
            ..a.engine.config(spec.clusters.len(), a.phi, a.seeds.first().copied().unwrap_or(1))
        };
        let result = engine::run_best_of(&sim.dataset, &sim.weights, &cfg, &a.seeds)?;
        write_report(&sim.dataset, &sim.weights, &result, &a.out.join("fit"))?;
        println!("ari={:.4}", score_recovery(&sim.truth, &result.assignment)?);
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
