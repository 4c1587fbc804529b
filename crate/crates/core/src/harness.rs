//! Seeded Monte-Carlo experiment driver, metrics and result files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    build_corpus, simulate_link, ArrayGeometry, ChannelConfig, Corpus, LinkCondition, LinkGeometry,
};
use crate::clock::{sample_initial_clock, ClockParams, ClockRanges, DelayStats};
use crate::error::{Error, Result};
use crate::filter::{AreaBounds, DePf, FilterConfig};
use crate::linalg::Vec2;
use crate::mlp::{train, MlpModel, TrainConfig, TrainReport};
use crate::music::{estimate_aoa, MusicConfig};
use crate::scalar::{wrap_angle, Scalar};
use crate::scenario::{
    build_map, build_trajectory, step, AoaMode, GateMode, LinkPipeline, ScenarioConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub n_runs: usize,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Rounds excluded from the aggregates.
    pub warmup: usize,
    /// Truncates every run to this many rounds.
    pub max_steps: Option<usize>,
    /// Final position error above which a run counts as diverged, m.
    pub divergence_threshold: f64,
    /// Values of `clock.sigma_t` visited by `sweep`, s.
    pub sigma_t_sweep: Vec<f64>,
    /// Values of `filter.n_gdfs` visited by `sweep`.
    pub gdfs_sweep: Vec<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 1,
            n_runs: 10,
            workers: 0,
            warmup: 10,
            max_steps: None,
            divergence_threshold: 10.0,
            sigma_t_sweep: vec![2e-9, 4e-9, 6e-9],
            gdfs_sweep: vec![50, 200, 500],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockSection {
    /// Mean processing delay, s.
    pub mu_t: f64,
    pub sigma_t: f64,
    /// Defaults to `sigma_t` when absent.
    pub sigma_r: Option<f64>,
    pub ranges: ClockRanges,
}

impl Default for ClockSection {
    fn default() -> Self {
        Self {
            mu_t: 5e-9,
            sigma_t: 2e-9,
            sigma_r: None,
            ranges: ClockRanges::default(),
        }
    }
}

impl ClockSection {
    pub fn delays(&self) -> Result<DelayStats> {
        DelayStats::new(
            self.mu_t,
            self.sigma_t,
            self.sigma_r.unwrap_or(self.sigma_t),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlosSection {
    /// Pre-trained model; trained on the fly when absent.
    pub model: Option<PathBuf>,
    pub n_per_class: usize,
    pub train: TrainConfig,
}

impl Default for NlosSection {
    fn default() -> Self {
        Self {
            model: None,
            n_per_class: 5000,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoaSection {
    pub mode: AoaMode,
    pub gate: GateMode,
}

/// Full experiment description, read from a sectioned TOML file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub scenario: ScenarioConfig,
    pub clock: ClockSection,
    pub channel: ChannelConfig,
    pub music: MusicConfig,
    pub filter: FilterConfig,
    pub nlos: NlosSection,
    pub aoa: AoaSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if !(self.experiment.divergence_threshold > 0.0) {
            return Err(Error::Config(
                "divergence_threshold must be positive".into(),
            ));
        }
        self.scenario.validate()?;
        self.clock.delays()?;
        self.clock.ranges.validate()?;
        self.channel.validate()?;
        self.filter.validate()?;
        self.nlos.train.validate()?;
        Ok(())
    }

    /// Noise-free single-AP planar setup: exact angles, oracle gate, ideal
    /// timestamps and a near-deterministic filter.
    pub fn noiseless() -> Self {
        let mut c = Self::default();
        c.experiment.n_runs = 1;
        c.scenario.n_ap = 1;
        c.scenario.p_los = 1.0;
        c.scenario.planar = true;
        c.scenario.ap_jitter = 0.0;
        c.clock.mu_t = 0.0;
        c.clock.sigma_t = 0.0;
        c.clock.sigma_r = Some(0.0);
        c.aoa = AoaSection {
            mode: AoaMode::Exact,
            gate: GateMode::Oracle,
        };
        c.filter.sigma_phi = 1e-9;
        c.filter.q_pos = [1e-4, 1e-4];
        c.filter.mu_height = None;
        c
    }
}

/// Command-line overrides; every `Some` field replaces the config value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_runs: Option<usize>,
    pub n_ap: Option<usize>,
    pub n_gdfs: Option<usize>,
    /// Seconds.
    pub sigma_t: Option<f64>,
    pub planar: bool,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(v) = self.seed {
            config.experiment.seed = v;
        }
        if let Some(v) = self.n_runs {
            config.experiment.n_runs = v;
        }
        if let Some(v) = self.n_ap {
            config.scenario.n_ap = v;
        }
        if let Some(v) = self.n_gdfs {
            config.filter.n_gdfs = v;
            config.experiment.gdfs_sweep = vec![v];
        }
        if let Some(v) = self.sigma_t {
            config.clock.sigma_t = v;
            config.experiment.sigma_t_sweep = vec![v];
        }
        if self.planar {
            config.scenario.planar = true;
            config.filter.mu_height = None;
        }
        if let Some(v) = self.workers {
            config.experiment.workers = v;
        }
        config.validate()
    }
}

/// One round of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub run: usize,
    pub step: usize,
    pub t: f64,
    pub err_pos_m: f64,
    pub err_clk_ns: f64,
    pub n_los_links: usize,
}

/// Full-precision view of one round for inspection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDetail<S> {
    pub estimated_skew: S,
    pub estimated_offset: S,
    pub true_skew: S,
    pub true_offset: S,
    pub estimated_position: Vec2<S>,
    pub true_position: Vec2<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub steps: Vec<StepRecord>,
    /// Set when the run was aborted.
    pub error: Option<String>,
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64 + 1);
    rng
}

/// Simulates one MU drive with the filter running in precision `S`.
pub fn run_single<S: Scalar>(
    config: &ExperimentConfig,
    run: usize,
    model: Option<&MlpModel<f64>>,
) -> Result<(Vec<StepRecord>, Vec<StepDetail<S>>)> {
    let mut rng = run_rng(config.experiment.seed, run);
    let scenario = &config.scenario;
    let delays = config.clock.delays()?;
    let map = build_map(scenario);
    let mut trajectory = build_trajectory(scenario, &mut rng)?;
    if let Some(n) = config.experiment.max_steps {
        trajectory.truncate(n);
    }
    let mu_clock: ClockParams<S> = sample_initial_clock(&mut rng, &config.clock.ranges)?;
    let master = ClockParams::<S>::ideal();
    let bounds = AreaBounds::new(map.bounds.min.cast::<S>(), map.bounds.max.cast::<S>());
    let mut filter = DePf::new(config.filter, delays, bounds, &mut rng)?;
    let pipeline = LinkPipeline {
        channel: &config.channel,
        music: &config.music,
        model,
        aoa: config.aoa.mode,
        gate: config.aoa.gate,
        sigma_phi: config.filter.sigma_phi,
    };
    let period = S::of(scenario.period);
    let mut records = Vec::with_capacity(trajectory.len());
    let mut details = Vec::with_capacity(trajectory.len());
    for (k, point) in trajectory.iter().enumerate() {
        if k > 0 {
            filter.predict(period, &mut rng);
        }
        let round = step(
            k, point, &map, &mu_clock, &delays, scenario, &pipeline, &mut rng,
        )?;
        filter.update(&round.observations, &mut rng)?;
        let est = filter.estimate()?;
        let (true_skew, _) = mu_clock.relative_to(&master);
        let true_offset = mu_clock.offset_at_epoch(&master, round.epoch);
        let truth = Vec2::new(point.position[0], point.position[1]);
        let err_pos = (est.position.cast::<f64>() - truth).norm();
        let err_clk = (est.offset - true_offset).abs().f64();
        if !err_pos.is_finite() || !err_clk.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite estimate in round {k}"
            )));
        }
        records.push(StepRecord {
            run,
            step: k,
            t: point.t,
            err_pos_m: err_pos,
            err_clk_ns: err_clk * 1e9,
            n_los_links: round.observations.iter().filter(|o| o.gate.is_los).count(),
        });
        details.push(StepDetail {
            estimated_skew: est.skew,
            estimated_offset: est.offset,
            true_skew,
            true_offset,
            estimated_position: est.position,
            true_position: truth,
        });
    }
    Ok((records, details))
}

/// Loads the configured model or trains a fresh one on a seeded corpus.
pub fn prepare_model(
    config: &ExperimentConfig,
) -> Result<Option<(MlpModel<f64>, Option<TrainReport>)>> {
    if config.aoa.gate != GateMode::Mlp {
        return Ok(None);
    }
    if let Some(path) = &config.nlos.model {
        return Ok(Some((MlpModel::load(path)?, None)));
    }
    let (model, report) = train_nlos(config)?;
    Ok(Some((model, Some(report))))
}

/// Builds the seeded corpus and trains the classifier on it.
pub fn train_nlos(config: &ExperimentConfig) -> Result<(MlpModel<f64>, TrainReport)> {
    train_nlos_with_corpus(config).map(|(_, model, report)| (model, report))
}

/// As [`train_nlos`], also returning the corpus.
pub fn train_nlos_with_corpus(
    config: &ExperimentConfig,
) -> Result<(Corpus, MlpModel<f64>, TrainReport)> {
    let mut rng = run_rng(config.experiment.seed, 0);
    let corpus = build_corpus(config.nlos.n_per_class, &config.channel, &mut rng)?;
    let (model, report) =
        train::<f64, _>(&corpus.train, &corpus.test, &config.nlos.train, &mut rng)?;
    Ok((corpus, model, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

/// Nearest-rank percentile of an ascending slice, `p ∈ (0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

fn rmse(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Aggregates over the post-warm-up rounds of every completed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub samples: usize,
    pub position_rmse_m: f64,
    pub clock_rmse_ns: f64,
    pub position_percentiles_m: Percentiles,
    pub clock_percentiles_ns: Percentiles,
    pub divergence_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: Vec<RunResult>,
    pub warmup: usize,
    pub divergence_threshold: f64,
}

impl MetricsReport {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.runs.iter().flat_map(|r| r.steps.iter())
    }

    /// Post-warm-up position errors, ascending.
    pub fn position_errors(&self) -> Vec<f64> {
        sorted(
            self.steps()
                .filter(|s| s.step >= self.warmup)
                .map(|s| s.err_pos_m),
        )
    }

    /// Post-warm-up clock errors in ns, ascending.
    pub fn clock_errors_ns(&self) -> Vec<f64> {
        sorted(
            self.steps()
                .filter(|s| s.step >= self.warmup)
                .map(|s| s.err_clk_ns),
        )
    }

    pub fn aggregates(&self) -> Aggregates {
        aggregate(&self.runs, self.warmup, self.divergence_threshold)
    }
}

/// Aggregates of arbitrary step records, grouped into runs by their `run`
/// field.
pub fn aggregate(runs: &[RunResult], warmup: usize, divergence_threshold: f64) -> Aggregates {
    let kept = || {
        runs.iter()
            .flat_map(|r| r.steps.iter())
            .filter(|s| s.step >= warmup)
    };
    let pos = sorted(kept().map(|s| s.err_pos_m));
    let clk = sorted(kept().map(|s| s.err_clk_ns));
    let pct = |v: &[f64]| Percentiles {
        p50: percentile(v, 50.0),
        p90: percentile(v, 90.0),
        p99: percentile(v, 99.0),
    };
    let divergence_count = runs
        .iter()
        .filter(|r| {
            r.error.is_some()
                || r.steps
                    .last()
                    .is_some_and(|s| s.err_pos_m > divergence_threshold)
        })
        .count();
    Aggregates {
        samples: pos.len(),
        position_rmse_m: rmse(&pos),
        clock_rmse_ns: rmse(&clk),
        position_percentiles_m: pct(&pos),
        clock_percentiles_ns: pct(&clk),
        divergence_count,
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Runs `n_runs` independent seeded drives in parallel. A failing run is
/// recorded with its error and keeps the rounds it completed up to then
/// out of the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    config.validate()?;
    let model = prepare_model(config)?.map(|(m, _)| m);
    run_experiment_with_model(config, model.as_ref())
}

pub fn run_experiment_with_model(
    config: &ExperimentConfig,
    model: Option<&MlpModel<f64>>,
) -> Result<MetricsReport> {
    config.validate()?;
    let runs = pool(config.experiment.workers)?.install(|| {
        (0..config.experiment.n_runs)
            .into_par_iter()
            .map(|run| match run_single::<f64>(config, run, model) {
                Ok((steps, _)) => RunResult {
                    run,
                    steps,
                    error: None,
                },
                Err(e) => RunResult {
                    run,
                    steps: Vec::new(),
                    error: Some(e.to_string()),
                },
            })
            .collect::<Vec<_>>()
    });
    Ok(MetricsReport {
        runs,
        warmup: config.experiment.warmup,
        divergence_threshold: config.experiment.divergence_threshold,
    })
}

pub const RESULTS_HEADER: [&str; 6] =
    ["run", "step", "t", "err_pos_m", "err_clk_ns", "n_los_links"];

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    aggregates: Aggregates,
    failed_runs: Vec<FailedRun<'a>>,
}

#[derive(Serialize)]
struct FailedRun<'a> {
    run: usize,
    error: &'a str,
}

fn write_cdf(path: &Path, column: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([column, "cdf"])?;
    let n = values.len();
    for (i, v) in values.iter().enumerate() {
        w.write_record([v.to_string(), ((i + 1) as f64 / n as f64).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `summary.json`, `cdf_position.csv` and
/// `cdf_clock.csv` into `dir`.
pub fn emit(report: &MetricsReport, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&dir.join("results.csv"), report)?;
    let summary = Summary {
        config,
        aggregates: report.aggregates(),
        failed_runs: report
            .runs
            .iter()
            .filter_map(|r| {
                r.error
                    .as_deref()
                    .map(|error| FailedRun { run: r.run, error })
            })
            .collect(),
    };
    let mut f = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    write_cdf(
        &dir.join("cdf_position.csv"),
        "err_pos_m",
        &report.position_errors(),
    )?;
    write_cdf(
        &dir.join("cdf_clock.csv"),
        "err_clk_ns",
        &report.clock_errors_ns(),
    )?;
    Ok(())
}

pub fn write_results_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for s in report.steps() {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a `results.csv` back into per-run records.
pub fn read_results_csv(path: &Path) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut runs: Vec<RunResult> = Vec::new();
    for row in r.deserialize() {
        let s: StepRecord = row?;
        match runs.last_mut() {
            Some(last) if last.run == s.run => last.steps.push(s),
            _ => runs.push(RunResult {
                run: s.run,
                steps: vec![s],
                error: None,
            }),
        }
    }
    Ok(runs)
}

/// One point of a parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma_t: f64,
    pub n_gdfs: usize,
    pub aggregates: Aggregates,
}

/// Runs every `(sigma_t, n_gdfs)` combination of the sweep lists, writing
/// each point into its own sub-directory and a `sweep.csv` overview.
pub fn run_sweep(config: &ExperimentConfig, dir: Option<&Path>) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let model = prepare_model(config)?.map(|(m, _)| m);
    let sigmas = if config.experiment.sigma_t_sweep.is_empty() {
        vec![config.clock.sigma_t]
    } else {
        config.experiment.sigma_t_sweep.clone()
    };
    let gdfs = if config.experiment.gdfs_sweep.is_empty() {
        vec![config.filter.n_gdfs]
    } else {
        config.experiment.gdfs_sweep.clone()
    };
    let mut points = Vec::new();
    for &sigma_t in &sigmas {
        for &n_gdfs in &gdfs {
            let mut c = config.clone();
            c.clock.sigma_t = sigma_t;
            if config.clock.sigma_r.is_none() {
                c.clock.sigma_r = None;
            }
            c.filter.n_gdfs = n_gdfs;
            let report = run_experiment_with_model(&c, model.as_ref())?;
            if let Some(dir) = dir {
                emit(
                    &report,
                    &c,
                    &dir.join(format!("sigma_t_{:.1}ns_gdfs_{n_gdfs}", sigma_t * 1e9)),
                )?;
            }
            points.push(SweepPoint {
                sigma_t,
                n_gdfs,
                aggregates: report.aggregates(),
            });
        }
    }
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        w.write_record([
            "sigma_t_ns",
            "n_gdfs",
            "position_rmse_m",
            "clock_rmse_ns",
            "position_p90_m",
            "clock_p90_ns",
            "divergence_count",
        ])?;
        for p in &points {
            let a = &p.aggregates;
            w.write_record([
                (p.sigma_t * 1e9).to_string(),
                p.n_gdfs.to_string(),
                a.position_rmse_m.to_string(),
                a.clock_rmse_ns.to_string(),
                a.position_percentiles_m.p90.to_string(),
                a.clock_percentiles_ns.p90.to_string(),
                a.divergence_count.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(points)
}

/// Angle errors of MUSIC on a straight drive past one AP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AoaReport {
    pub n: usize,
    pub azimuth_rmse_deg: f64,
    pub elevation_rmse_deg: f64,
    pub bearing_rmse_deg: f64,
    pub low_confidence: usize,
    pub mean_runtime_us: f64,
}

/// Drives the MU along `y = 0` from `x = 0` to `x = 2·ap_x` past an AP at
/// `(ap_x, −offset, height)` facing the street, `n` positions, LoS links.
pub fn evaluate_aoa(config: &ExperimentConfig, ap_x: f64, n: usize) -> Result<AoaReport> {
    if n < 2 {
        return Err(Error::Config(
            "AoA drive-by needs at least two positions".into(),
        ));
    }
    let sc = &config.scenario;
    let array = ArrayGeometry::<f64> {
        tilt: sc.ap_tilt,
        facing: std::f64::consts::FRAC_PI_2,
        position: [ap_x, -sc.ap_offset, sc.ap_height],
        ..ArrayGeometry::default()
    };
    let mut rng = run_rng(config.experiment.seed, 0);
    let (mut se_az, mut se_el, mut se_b, mut low, mut used) = (0.0, 0.0, 0.0, 0, 0);
    let mut elapsed = std::time::Duration::ZERO;
    for i in 0..n {
        let x = 2.0 * ap_x * i as f64 / (n - 1) as f64;
        let mu = [x, 0.0, sc.mu_height];
        let Some((az, el)) = array.angles_towards(mu) else {
            continue;
        };
        let d = ((x - ap_x).powi(2) + sc.ap_offset.powi(2) + (sc.ap_height - sc.mu_height).powi(2))
            .sqrt();
        let link = LinkGeometry {
            distance_3d: d,
            azimuth: az,
            elevation: el,
        };
        let cir = simulate_link(&link, LinkCondition::LoS, &array, &config.channel, &mut rng)?;
        let start = std::time::Instant::now();
        let est = estimate_aoa(&cir, &array, &config.music)?;
        elapsed += start.elapsed();
        let bearing = array.global_bearing(est.azimuth, est.elevation);
        let true_bearing = sc.ap_offset.atan2(x - ap_x);
        se_az += wrap_angle(est.azimuth - az).to_degrees().powi(2);
        se_el += (est.elevation - el).to_degrees().powi(2);
        se_b += wrap_angle(bearing - true_bearing).to_degrees().powi(2);
        low += usize::from(est.low_confidence);
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateInput(
            "no drive-by position inside the field of view".into(),
        ));
    }
    let m = used as f64;
    Ok(AoaReport {
        n: used,
        azimuth_rmse_deg: (se_az / m).sqrt(),
        elevation_rmse_deg: (se_el / m).sqrt(),
        bearing_rmse_deg: (se_b / m).sqrt(),
        low_confidence: low,
        mean_runtime_us: elapsed.as_secs_f64() * 1e6 / m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_examples() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&v, 50.0), 5.0);
        assert_eq!(percentile(&v, 90.0), 9.0);
        assert_eq!(percentile(&v, 99.0), 10.0);
        assert_eq!(percentile(&[4.0], 1.0), 4.0);
    }

    #[test]
    fn default_config_roundtrips_through_toml() {
        let c = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(),
            c
        );
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let c = ExperimentConfig::from_toml("[experiment]\nn_runs = 3\n[filter]\nn_gdfs = 50\n")
            .unwrap();
        assert_eq!(c.experiment.n_runs, 3);
        assert_eq!(c.filter.n_gdfs, 50);
        assert_eq!(c.scenario, ScenarioConfig::default());
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(ExperimentConfig::from_toml("[experiment]\nn_runs = 0\n").is_err());
    }
}
