#![allow(dead_code)]

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use syncloc::channel::ChannelConfig;
use syncloc::clock::{sample_initial_clock, ClockParams, DelayStats, TimestampRecord};
use syncloc::filter::{AreaBounds, DePf, FilterConfig, LinkObservation};
use syncloc::harness::ExperimentConfig;
use syncloc::music::MusicConfig;
use syncloc::scenario::{
    build_map, build_trajectory, step, AoaMode, GateMode, LinkPipeline, TrajectoryPoint,
};

/// Observations and truth of a simulated drive, generated once so that
/// several estimators can consume the same stream.
pub struct Stream {
    pub rounds: Vec<Vec<LinkObservation<f64>>>,
    pub points: Vec<TrajectoryPoint>,
    pub epochs: Vec<f64>,
    pub mu_clock: ClockParams<f64>,
    pub bounds: AreaBounds<f64>,
}

/// Drive with exact angles and the oracle gate.
pub fn stream(config: &ExperimentConfig, seed: u64, steps: usize) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = &config.scenario;
    let map = build_map(sc);
    let mut points = build_trajectory(sc, &mut rng).unwrap();
    points.truncate(steps);
    let mu_clock = sample_initial_clock(&mut rng, &config.clock.ranges).unwrap();
    let delays = config.clock.delays().unwrap();
    let channel = ChannelConfig::default();
    let music = MusicConfig::default();
    let pipeline = LinkPipeline {
        channel: &channel,
        music: &music,
        model: None,
        aoa: AoaMode::Exact,
        gate: GateMode::Oracle,
        sigma_phi: config.filter.sigma_phi,
    };
    let mut rounds = Vec::new();
    let mut epochs = Vec::new();
    for (k, p) in points.iter().enumerate() {
        let out = step(k, p, &map, &mu_clock, &delays, sc, &pipeline, &mut rng).unwrap();
        rounds.push(out.observations);
        epochs.push(out.epoch);
    }
    Stream {
        rounds,
        points,
        epochs,
        mu_clock,
        bounds: map.bounds,
    }
}

/// Single-Gaussian linearized recursive filter over `[ζ₁, ζ₂]` and planar
/// position, written directly against nalgebra.
pub struct Lbrf {
    pub zeta: Vector2<f64>,
    pub p: Matrix2<f64>,
    pub x: Vector2<f64>,
    pub c: Matrix2<f64>,
    config: FilterConfig,
    delays: DelayStats,
}

fn wrap(a: f64) -> f64 {
    a.sin().atan2(a.cos())
}

impl Lbrf {
    pub fn new(config: FilterConfig, delays: DelayStats, bounds: &AreaBounds<f64>) -> Self {
        let (lo, hi) = (bounds.min, bounds.max);
        let diag2 = (hi.x - lo.x).powi(2) + (hi.y - lo.y).powi(2);
        Self {
            zeta: Vector2::new(1.0, 0.0),
            p: Matrix2::new(
                config.clock_prior_var[0],
                0.0,
                0.0,
                config.clock_prior_var[1],
            ),
            x: Vector2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0),
            c: Matrix2::identity() * diag2 / 100.0,
            config,
            delays,
        }
    }

    pub fn predict(&mut self, t: f64, rng: &mut ChaCha8Rng) {
        let f = Matrix2::new(1.0, 0.0, -t, 1.0);
        self.zeta = f * self.zeta + Vector2::new(0.0, t);
        self.p = f * self.p * f.transpose()
            + Matrix2::new(self.config.q_clock[0], 0.0, 0.0, self.config.q_clock[1]);
        let qp = Matrix2::new(self.config.q_pos[0], 0.0, 0.0, self.config.q_pos[1]);
        let var = (self.c + qp).trace() / 2.0;
        let dx: f64 = StandardNormal.sample(rng);
        let dy: f64 = StandardNormal.sample(rng);
        self.x += Vector2::new(dx * qp[(0, 0)].sqrt(), dy * qp[(1, 1)].sqrt());
        self.c = Matrix2::identity() * var;
    }

    fn clock_ls(&self, r: &TimestampRecord<f64>) -> (Vector2<f64>, Matrix2<f64>) {
        let b = Matrix2::new(r.c_i_t4 - r.c_i_t2, 0.0, r.c_i_t4 + r.c_i_t5, -2.0);
        let rhs = Vector2::new(r.c_j_t3 - r.c_j_t1, r.c_j_t3 + r.c_j_t6);
        let (st, sr) = (self.delays.sigma_t, self.delays.sigma_r);
        let noise = Matrix2::new(2.0 * st * st, 0.0, 0.0, st * st + sr * sr);
        let a = (b.transpose() * b).try_inverse().unwrap() * b.transpose();
        (a * rhs, a * noise * a.transpose())
    }

    pub fn update(&mut self, observations: &[LinkObservation<f64>]) {
        let here = self.x;
        let mut links: Vec<&LinkObservation<f64>> =
            observations.iter().filter(|o| o.gate.is_los).collect();
        let dist = |o: &LinkObservation<f64>| {
            (Vector2::new(o.ap_position[0], o.ap_position[1]) - here).norm()
        };
        links.sort_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap());
        for o in links {
            let (mu_plus, sigma_plus) = self.clock_ls(&o.record);
            let gain = self.p * (self.p + sigma_plus).try_inverse().unwrap();
            self.zeta += gain * (mu_plus - self.zeta);
            self.p -= gain * self.p;

            let v = self.config.v_c;
            let d = self.x - Vector2::new(o.ap_position[0], o.ap_position[1]);
            let rho2 = d.norm_squared();
            let h = self.config.mu_height.map_or(0.0, |m| o.ap_position[2] - m);
            let a = (rho2 + h * h).sqrt() / v;
            let a_vec = d / (v * v * a);
            let bearing = d.y.atan2(d.x);
            let b_vec = Vector2::new(-d.y, d.x) / rho2;
            let bias = if self.config.range_bias_correction {
                self.delays.mu
            } else {
                0.0
            };
            let rec = &o.record;
            let flight = rec.c_j_t6 - (rec.c_i_t5 * mu_plus.x - mu_plus.y) - bias;
            let r = Vector2::new(
                flight - a + self.x.dot(&a_vec),
                wrap(o.bearing - bearing) + self.x.dot(&b_vec),
            );
            let jac = Matrix2::new(a_vec.x, a_vec.y, b_vec.x, b_vec.y);
            let inv = jac.try_inverse().unwrap();
            let noise = Matrix2::new(
                self.delays.sigma_r.powi(2),
                0.0,
                0.0,
                o.sigma_phi * o.sigma_phi,
            );
            let (m, cov) = (inv * r, inv * noise * inv.transpose());
            let gain = self.c * (self.c + cov).try_inverse().unwrap();
            self.x += gain * (m - self.x);
            self.c -= gain * self.c;
        }
    }
}

/// Runs the mixture filter with one gdf and the oracle side by side and
/// returns the largest per-step relative deviation of `ζ` and position.
pub fn single_gdf_deviation(seed: u64, steps: usize) -> f64 {
    let mut config = ExperimentConfig::default();
    config.filter.n_gdfs = 1;
    config.filter.resample = false;
    config.aoa.mode = AoaMode::Exact;
    config.aoa.gate = GateMode::Oracle;
    let s = stream(&config, seed, steps);
    assert_eq!(s.rounds.len(), steps);
    let delays = config.clock.delays().unwrap();
    let mut rng_filter = ChaCha8Rng::seed_from_u64(seed ^ 0xA5);
    let mut rng_oracle = rng_filter.clone();
    let mut filter = DePf::new(config.filter, delays, s.bounds, &mut rng_filter).unwrap();
    let mut oracle = Lbrf::new(config.filter, delays, &s.bounds);
    let mut worst = 0.0f64;
    for (k, obs) in s.rounds.iter().enumerate() {
        if k > 0 {
            filter.predict(config.scenario.period, &mut rng_filter);
            oracle.predict(config.scenario.period, &mut rng_oracle);
        }
        let report = filter.update(obs, &mut rng_filter).unwrap();
        assert!(!report.reinitialized);
        oracle.update(obs);
        let post = &filter.posterior;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        let g = &post.gdfs[0];
        let pos_scale = oracle.x.norm().max(1.0);
        let devs = [
            rel(post.clock.mean.x, oracle.zeta.x),
            rel(post.clock.mean.y, oracle.zeta.y),
            (g.mean.x - oracle.x.x).abs() / pos_scale,
            (g.mean.y - oracle.x.y).abs() / pos_scale,
        ];
        worst = devs.iter().fold(worst, |w, &d| w.max(d));
    }
    worst
}
