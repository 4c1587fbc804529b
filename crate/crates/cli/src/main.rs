use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use syncloc::channel::write_samples_csv;
use syncloc::harness::{
    emit, evaluate_aoa, prepare_model, run_experiment_with_model, run_sweep,
    train_nlos_with_corpus, ExperimentConfig, Overrides,
};

#[derive(Parser)]
#[command(
    name = "syncloc",
    version,
    about = "Joint clock synchronization and localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    aps: Option<usize>,
    /// Number of Gaussian components in the position mixture.
    #[arg(long, global = true)]
    gdfs: Option<usize>,
    /// Timestamp delay standard deviation in nanoseconds.
    #[arg(long = "sigma-t", global = true)]
    sigma_t: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Horizontal-only time of flight with a planar filter range model.
    #[arg(long, global = true)]
    planar: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the synthetic CIR corpus and train the NLoS classifier.
    TrainNlos,
    /// MUSIC accuracy on a straight drive past one AP.
    EvalAoa {
        /// Number of positions along the drive.
        #[arg(long, default_value_t = 141)]
        points: usize,
    },
    /// Monte-Carlo runs of the configured scenario.
    Run,
    /// Runs over the configured sigma_t and gdf-count lists.
    Sweep,
}

fn load(common: &Common) -> syncloc::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Overrides {
        seed: common.seed,
        n_runs: common.runs,
        n_ap: common.aps,
        n_gdfs: common.gdfs,
        sigma_t: common.sigma_t.map(|ns| ns * 1e-9),
        planar: common.planar,
        workers: common.workers,
    }
    .apply(&mut config)?;
    Ok(config)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> syncloc::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn execute(cli: &Cli) -> syncloc::Result<()> {
    let config = load(&cli.common)?;
    let out = &cli.common.out;
    fs::create_dir_all(out)?;
    match &cli.command {
        Command::TrainNlos => {
            let (corpus, model, report) = train_nlos_with_corpus(&config)?;
            write_samples_csv(&out.join("train.csv"), &corpus.train)?;
            write_samples_csv(&out.join("test.csv"), &corpus.test)?;
            model.save(&out.join("model.bin"))?;
            write_json(&out.join("train_report.json"), &report)?;
            println!(
                "accuracy {:.4}  P_f(LoS) {:.4}  P_f(NLoS) {:.4}  -> {}",
                report.accuracy,
                report.pf_los,
                report.pf_nlos,
                out.join("model.bin").display()
            );
        }
        Command::EvalAoa { points } => {
            let report = evaluate_aoa(&config, 35.0, *points)?;
            write_json(&out.join("aoa.json"), &report)?;
            println!(
                "azimuth RMSE {:.3} deg  elevation RMSE {:.3} deg  bearing RMSE {:.3} deg  ({} positions, {:.0} us each)",
                report.azimuth_rmse_deg, report.elevation_rmse_deg, report.bearing_rmse_deg, report.n, report.mean_runtime_us
            );
        }
        Command::Run => {
            let model = prepare_model(&config)?.map(|(m, _)| m);
            let report = run_experiment_with_model(&config, model.as_ref())?;
            emit(&report, &config, out)?;
            let a = report.aggregates();
            println!(
                "position RMSE {:.3} m (p90 {:.3})  clock RMSE {:.3} ns (p90 {:.3})  diverged {}",
                a.position_rmse_m,
                a.position_percentiles_m.p90,
                a.clock_rmse_ns,
                a.clock_percentiles_ns.p90,
                a.divergence_count
            );
        }
        Command::Sweep => {
            for p in run_sweep(&config, Some(out))? {
                let a = &p.aggregates;
                println!(
                    "sigma_t {:.1} ns  F {:4}  position RMSE {:.3} m  clock p90 {:.3} ns",
                    p.sigma_t * 1e9,
                    p.n_gdfs,
                    a.position_rmse_m,
                    a.clock_percentiles_ns.p90
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
