//! `sparsetest`: boundary tables, Monte Carlo experiment grids and
//! desk-scale figure reproductions.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or config
//! errors.

mod config;
mod plot;
mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparsetest::bench::{
    self, check_monotone_power, ExperimentConfig, RiskEstimate, RESULTS_CSV_HEADER,
};
use sparsetest::boundaries;
use sparsetest::numfmt::{dec10, sig10};

use config::{parse_config, Manifest, Outputs, RunConfig};

#[derive(Parser)]
#[command(
    name = "sparsetest",
    version,
    about = "Detection boundaries and Monte Carlo risk benchmarks for global \
             testing under sparse alternatives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the detection-boundary curves over an alpha grid as CSV
    /// (columns: alpha, rho_star, rho_max, rho_rand).
    BoundaryTable {
        /// Lower end of the sparsity-exponent grid, in (0.5, 1].
        #[arg(long)]
        alpha_min: f64,
        /// Upper end of the grid, in (0.5, 1].
        #[arg(long)]
        alpha_max: f64,
        /// Grid step; must be positive.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid described by a JSON config file (or by a
    /// manifest from a previous run, which replays it).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv, manifest.json and plots/.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<u32>,
        /// Cap the rayon thread pool; output is identical at any setting.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write risk-vs-signal SVG panels.
        #[arg(long)]
        plot: bool,
    },
    /// Run a built-in desk-scale preset: fig1-desk (identity vs gaussian at
    /// alpha 0.75) or fig2-desk (identity p=100000 at alpha 0.6).
    Reproduce {
        /// Preset name.
        figure: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        plot: bool,
    },
}

enum CliError {
    /// Bad flags, bad config, out-of-domain grids: exit code 2.
    Usage(String),
    /// Failures after validation (I/O, statistic errors): exit code 1.
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BoundaryTable {
            alpha_min,
            alpha_max,
            step,
            out,
        } => boundary_table(alpha_min, alpha_max, step, out.as_deref()),
        Command::Run {
            config,
            out,
            seed,
            trials,
            threads,
            plot,
        } => {
            let text = fs::read_to_string(&config).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", config.display()))
            })?;
            let run_config = parse_config(&text)
                .and_then(|c| c.resolve(seed, trials))
                .map_err(CliError::Usage)?;
            execute(run_config, &out, threads, plot)
        }
        Command::Reproduce {
            figure,
            out,
            seed,
            trials,
            threads,
            plot,
        } => {
            let Some(preset) = presets::preset(&figure) else {
                return Err(CliError::Usage(format!(
                    "unknown preset {figure:?}; available: {}",
                    presets::PRESET_NAMES.join(", ")
                )));
            };
            println!("preset {figure}: {}", presets::describe(&figure));
            let run_config = preset.resolve(seed, trials).map_err(CliError::Usage)?;
            execute(run_config, &out, threads, plot)
        }
    }
}

fn boundary_table(
    alpha_min: f64,
    alpha_max: f64,
    step: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(CliError::Usage(format!("step must be positive, got {step}")));
    }
    if !alpha_min.is_finite() || !alpha_max.is_finite() || alpha_min > alpha_max {
        return Err(CliError::Usage(format!(
            "need alpha_min <= alpha_max, got {alpha_min} > {alpha_max}"
        )));
    }
    let mut table = String::from("alpha,rho_star,rho_max,rho_rand\n");
    let mut i = 0usize;
    loop {
        let alpha = alpha_min + i as f64 * step;
        if alpha > alpha_max + 1e-12 {
            break;
        }
        let point = boundaries::boundary_point(alpha.min(alpha_max))
            .map_err(|e| CliError::Usage(format!("alpha grid: {e}")))?;
        table.push_str(&format!(
            "{},{},{},{}\n",
            dec10(point.alpha),
            dec10(point.rho_star),
            dec10(point.rho_max),
            dec10(point.rho_rand)
        ));
        i += 1;
    }
    match out {
        Some(path) => fs::write(path, table)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn execute(
    run_config: RunConfig,
    out_dir: &Path,
    threads: Option<usize>,
    plot: bool,
) -> Result<(), CliError> {
    let experiments = run_config.experiments();
    for exp in &experiments {
        exp.validate()
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    }
    let started_at = chrono::Utc::now().to_rfc3339();

    let work = || -> sparsetest::Result<Vec<(ExperimentConfig, Vec<RiskEstimate>)>> {
        experiments
            .iter()
            .map(|exp| bench::run_grid(exp).map(|rows| (exp.clone(), rows)))
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut csv = String::from(RESULTS_CSV_HEADER);
    csv.push('\n');
    for (exp, rows) in &results {
        csv.push_str(&bench::results_csv_rows(exp, rows));
    }
    let csv_path = out_dir.join("results.csv");
    fs::write(&csv_path, &csv)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", csv_path.display())))?;

    for (_, rows) in &results {
        for warning in check_monotone_power(rows) {
            eprintln!("warning: {warning}");
        }
    }

    let mut plot_paths = Vec::new();
    if plot {
        let plots_dir = out_dir.join("plots");
        fs::create_dir_all(&plots_dir)
            .map_err(|e| CliError::Runtime(format!("cannot create plots dir: {e}")))?;
        for (exp, rows) in &results {
            for &alpha in &exp.alpha_grid {
                let mut series = Vec::new();
                for &test in &exp.tests {
                    let pts: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| r.test == test && r.alpha == alpha)
                        .map(|r| (r.signal, r.best_risk))
                        .collect();
                    series.push((test.name().to_string(), pts));
                }
                let title = format!(
                    "{}({}) alpha={}",
                    exp.design.name(),
                    exp.design.params(),
                    sig10(alpha)
                );
                let x_label = match exp.model {
                    bench::ModelKind::Sfem => "signal rate r",
                    bench::ModelKind::Srem => "signal scale tau",
                };
                let svg = plot::risk_plot_svg(&title, x_label, &series);
                let file = format!(
                    "{}_{}_alpha{}.svg",
                    exp.design.name(),
                    exp.design.params().replace(';', "_"),
                    sig10(alpha)
                );
                let path = plots_dir.join(&file);
                fs::write(&path, svg).map_err(|e| {
                    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
                })?;
                plot_paths.push(format!("plots/{file}"));
            }
        }
    }

    let manifest = Manifest {
        tool: "sparsetest".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        config: run_config,
        outputs: Outputs {
            results_csv: "results.csv".into(),
            plots: plot_paths,
        },
    };
    let manifest_path = out_dir.join("manifest.json");
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(format!("cannot serialize manifest: {e}")))?;
    fs::write(&manifest_path, manifest_json + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write manifest: {e}")))?;

    let cells: usize = results.iter().map(|(_, rows)| rows.len()).sum();
    println!("wrote {} ({cells} cells)", csv_path.display());
    println!("wrote {}", manifest_path.display());
    Ok(())
}
