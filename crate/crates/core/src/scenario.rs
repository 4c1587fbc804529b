//! Urban drive scenario: a street grid lined with access points, a
//! stop-and-go MU trajectory, per-round association and link simulation.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{
    generate_paths, synthesize_cir, ArrayGeometry, ChannelConfig, LinkCondition, LinkGeometry,
};
use crate::clock::{simulate_exchange, ClockParams, DelayStats, ExchangeSchedule};
use crate::error::{Error, Result};
use crate::filter::{AreaBounds, LinkObservation};
use crate::linalg::Vec2;
use crate::mlp::{GateDecision, MlpModel};
use crate::music::{estimate_aoa, AoaEstimate, MusicConfig};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Distance between consecutive APs along a street, m.
    pub ap_spacing: f64,
    /// Lateral distance of an AP from the street centre line, m.
    pub ap_offset: f64,
    pub ap_height: f64,
    /// Degrees.
    pub ap_tilt: f64,
    pub mu_height: f64,
    pub n_legs: usize,
    pub route_length: f64,
    pub max_speed: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub dwell_min: f64,
    pub dwell_max: f64,
    /// Time the MU stands still at the start before driving off, s.
    pub initial_dwell: f64,
    /// Round period `T`, s.
    pub period: f64,
    /// Standard deviation of the residual AP clock offset, s.
    pub ap_jitter: f64,
    pub n_ap: usize,
    pub p_los: f64,
    /// Propagate time of flight over horizontal distance only.
    pub planar: bool,
    /// `t3 − t1`, s.
    pub sync_gap: f64,
    /// `t5 − t3`, s.
    pub reply_gap: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            ap_spacing: 50.0,
            ap_offset: 5.0,
            ap_height: 10.0,
            ap_tilt: 20.0,
            mu_height: 1.5,
            n_legs: 3,
            route_length: 600.0,
            max_speed: 14.0,
            accel_min: 1.0,
            accel_max: 3.0,
            dwell_min: 1.0,
            dwell_max: 5.0,
            initial_dwell: 0.0,
            period: 0.1,
            ap_jitter: 0.1e-9,
            n_ap: 3,
            p_los: 0.8,
            planar: false,
            sync_gap: 10e-3,
            reply_gap: 1e-3,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ap_spacing > 0.0
            && self.ap_offset > 0.0
            && self.n_legs >= 1
            && self.route_length >= 0.0
            && self.max_speed > 0.0
            && self.accel_min > 0.0
            && self.accel_max >= self.accel_min
            && self.dwell_min >= 0.0
            && self.dwell_max >= self.dwell_min
            && self.initial_dwell >= 0.0
            && self.period > 0.0
            && self.ap_jitter >= 0.0
            && self.n_ap >= 1
            && (0.0..=1.0).contains(&self.p_los)
            && self.sync_gap > 0.0
            && self.reply_gap > 0.0
            && self.sync_gap + self.reply_gap < self.period;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid scenario configuration {self:?}"
            )))
        }
    }

    /// Length of one leg of the route.
    pub fn leg_length(&self) -> f64 {
        self.route_length / self.n_legs as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApConfig {
    pub id: usize,
    pub position: [f64; 3],
    pub array: ArrayGeometry<f64>,
    pub clock_jitter_sigma: f64,
}

/// Street grid and its access points. Streets run along `x = i·b` and
/// `y = j·b` for `i ∈ [0, n_legs]` and `j ∈ [−n_legs, n_legs]`, with `b` the
/// leg length.
#[derive(Clone, Debug, PartialEq)]
pub struct Map {
    pub aps: Vec<ApConfig>,
    pub bounds: AreaBounds<f64>,
}

pub fn build_map(config: &ScenarioConfig) -> Map {
    let n = config.n_legs as i64;
    let block = config.leg_length();
    let (x_max, y_max) = (n as f64 * block, n as f64 * block);
    let mut aps = Vec::new();
    let mut push = |position: [f64; 3], facing: f64| {
        let array = ArrayGeometry {
            tilt: config.ap_tilt,
            facing,
            position,
            ..ArrayGeometry::default()
        };
        aps.push(ApConfig {
            id: aps.len(),
            position,
            array,
            clock_jitter_sigma: config.ap_jitter,
        });
    };
    let steps = |len: f64| (len / config.ap_spacing).floor() as i64;
    let half_pi = std::f64::consts::FRAC_PI_2;
    // Streets along x.
    for j in -n..=n {
        let y = j as f64 * block;
        for k in 0..=steps(x_max) {
            let x = k as f64 * config.ap_spacing;
            let side = if k % 2 == 0 { -1.0 } else { 1.0 };
            push(
                [x, y + side * config.ap_offset, config.ap_height],
                if side < 0.0 { half_pi } else { -half_pi },
            );
        }
    }
    // Streets along y, staggered by half a spacing so that no AP stands
    // inside a crossing.
    for i in 0..=n {
        let x = i as f64 * block;
        for k in 0..steps(2.0 * y_max) {
            let y = -y_max + (k as f64 + 0.5) * config.ap_spacing;
            let side = if k % 2 == 0 { -1.0 } else { 1.0 };
            push(
                [x + side * config.ap_offset, y, config.ap_height],
                if side < 0.0 {
                    0.0
                } else {
                    std::f64::consts::PI
                },
            );
        }
    }
    let margin = config.ap_offset * 2.0;
    let bounds = AreaBounds::new(
        Vec2::new(-margin, -y_max - margin),
        Vec2::new(x_max + margin, y_max + margin),
    );
    Map { aps, bounds }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub position: [f64; 3],
    pub speed: f64,
}

/// Constant-acceleration piece of the along-route motion.
#[derive(Clone, Copy, Debug)]
struct Segment {
    duration: f64,
    accel: f64,
}

fn leg_segments(length: f64, v_max: f64, a_up: f64, a_down: Option<f64>) -> Vec<Segment> {
    let mut segs = Vec::new();
    match a_down {
        Some(a_down) => {
            let full = v_max * v_max / (2.0 * a_up) + v_max * v_max / (2.0 * a_down);
            if full <= length {
                segs.push(Segment {
                    duration: v_max / a_up,
                    accel: a_up,
                });
                segs.push(Segment {
                    duration: (length - full) / v_max,
                    accel: 0.0,
                });
                segs.push(Segment {
                    duration: v_max / a_down,
                    accel: -a_down,
                });
            } else {
                let peak = (2.0 * length * a_up * a_down / (a_up + a_down)).sqrt();
                segs.push(Segment {
                    duration: peak / a_up,
                    accel: a_up,
                });
                segs.push(Segment {
                    duration: peak / a_down,
                    accel: -a_down,
                });
            }
        }
        None => {
            let ramp = v_max * v_max / (2.0 * a_up);
            if ramp <= length {
                segs.push(Segment {
                    duration: v_max / a_up,
                    accel: a_up,
                });
                segs.push(Segment {
                    duration: (length - ramp) / v_max,
                    accel: 0.0,
                });
            } else {
                segs.push(Segment {
                    duration: (2.0 * length / a_up).sqrt(),
                    accel: a_up,
                });
            }
        }
    }
    segs
}

/// Stop-and-go drive over the street grid sampled every `period` seconds.
///
/// Each leg starts from rest, accelerates with a random rate in
/// `[accel_min, accel_max]` up to `max_speed`, cruises, and (except for the
/// last) brakes to a stop at the next intersection, where the MU waits
/// `U(dwell_min, dwell_max)` seconds and turns left or right at random.
pub fn build_trajectory<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<TrajectoryPoint>> {
    config.validate()?;
    if config.route_length <= 0.0 {
        return Ok(Vec::new());
    }
    let leg = config.leg_length();
    let mut segments = Vec::new();
    let mut headings = Vec::new();
    let mut heading = 0.0f64;
    if config.initial_dwell > 0.0 {
        segments.push(Segment {
            duration: config.initial_dwell,
            accel: 0.0,
        });
        headings.push(heading);
    }
    for l in 0..config.n_legs {
        let a_up = rng.gen_range(config.accel_min..=config.accel_max);
        let last = l + 1 == config.n_legs;
        let a_down = (!last).then(|| rng.gen_range(config.accel_min..=config.accel_max));
        let leg_start = segments.len();
        segments.extend(leg_segments(leg, config.max_speed, a_up, a_down));
        headings.extend(std::iter::repeat_n(heading, segments.len() - leg_start));
        if !last {
            let dwell = rng.gen_range(config.dwell_min..=config.dwell_max);
            segments.push(Segment {
                duration: dwell,
                accel: 0.0,
            });
            headings.push(heading);
            heading += if rng.gen_bool(0.5) {
                std::f64::consts::FRAC_PI_2
            } else {
                -std::f64::consts::FRAC_PI_2
            };
        }
    }

    let total_time: f64 = segments.iter().map(|s| s.duration).sum();
    let n_samples = (total_time / config.period).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let t = k as f64 * config.period;
        let mut elapsed = 0.0;
        let (mut x, mut y, mut v) = (0.0, 0.0, 0.0);
        for (seg, &h) in segments.iter().zip(&headings) {
            let dt = (t - elapsed).clamp(0.0, seg.duration);
            let ds = (v * dt + 0.5 * seg.accel * dt * dt).max(0.0);
            x += ds * h.cos();
            y += ds * h.sin();
            let v_end = (v + seg.accel * dt).clamp(0.0, config.max_speed);
            if dt < seg.duration {
                v = v_end;
                break;
            }
            // Snap to exact rest at stops so no drift accumulates.
            v = if v_end < 1e-9 { 0.0 } else { v_end };
            elapsed += seg.duration;
        }
        // Legs meet on the grid; remove rounding drift from the turn geometry.
        let snap = |c: f64| {
            if (c - c.round()).abs() < 1e-9 {
                c.round()
            } else {
                c
            }
        };
        out.push(TrajectoryPoint {
            t,
            position: [snap(x), snap(y), config.mu_height],
            speed: v,
        });
    }
    Ok(out)
}

/// Ground truth of one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTruth {
    pub aps: Vec<usize>,
    pub conditions: Vec<LinkCondition>,
    /// 3-D distances, m.
    pub distances: Vec<f64>,
    /// Global horizontal bearings from each AP to the MU, radians.
    pub bearings: Vec<f64>,
}

fn distance3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// The `n_ap` nearest APs by 3-D distance (ties to the lower index) with
/// i.i.d. Bernoulli(`p_los`) link conditions.
pub fn associate<R: Rng + ?Sized>(
    mu_position: [f64; 3],
    aps: &[ApConfig],
    n_ap: usize,
    p_los: f64,
    rng: &mut R,
) -> Result<RoundTruth> {
    if n_ap > aps.len() {
        return Err(Error::Config(format!(
            "{n_ap} APs requested, map has {}",
            aps.len()
        )));
    }
    let mut order: Vec<(f64, usize)> = aps
        .iter()
        .enumerate()
        .map(|(i, ap)| (distance3(mu_position, ap.position), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(n_ap);
    let mut truth = RoundTruth {
        aps: Vec::new(),
        conditions: Vec::new(),
        distances: Vec::new(),
        bearings: Vec::new(),
    };
    for (d, i) in order {
        let ap = &aps[i];
        truth.aps.push(i);
        truth.distances.push(d);
        truth
            .bearings
            .push((mu_position[1] - ap.position[1]).atan2(mu_position[0] - ap.position[0]));
        truth.conditions.push(if rng.gen_bool(p_los) {
            LinkCondition::LoS
        } else {
            LinkCondition::NLoS
        });
    }
    Ok(truth)
}

/// How the AoA fed to the filter is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AoaMode {
    #[default]
    Music,
    /// True angles, no channel synthesis.
    Exact,
}

/// How link conditions are classified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    #[default]
    Mlp,
    /// True condition.
    Oracle,
}

/// Per-link processing chain.
#[derive(Clone, Copy, Debug)]
pub struct LinkPipeline<'a> {
    pub channel: &'a ChannelConfig,
    pub music: &'a MusicConfig,
    pub model: Option<&'a MlpModel<f64>>,
    pub aoa: AoaMode,
    pub gate: GateMode,
    pub sigma_phi: f64,
}

/// Simulation output of one round.
#[derive(Clone, Debug)]
pub struct RoundOutput<S> {
    pub observations: Vec<LinkObservation<S>>,
    pub truth: RoundTruth,
    /// Links that produced no observation (outside the field of view or a
    /// failed estimate).
    pub dropped: usize,
    pub epoch: S,
}

/// Exchange epoch of round `k`: the master's `t3` reading.
pub fn round_epoch<S: Scalar>(k: usize, config: &ScenarioConfig) -> S {
    S::of_usize(k) * S::of(config.period) + S::of(config.sync_gap)
}

/// Runs every associated link of round `k` through exchange, channel,
/// AoA and gate.
#[allow(clippy::too_many_arguments)]
pub fn step<S: Scalar, R: Rng + ?Sized>(
    k: usize,
    point: &TrajectoryPoint,
    map: &Map,
    mu_clock: &ClockParams<S>,
    delays: &DelayStats,
    config: &ScenarioConfig,
    pipeline: &LinkPipeline<'_>,
    rng: &mut R,
) -> Result<RoundOutput<S>> {
    let truth = associate(point.position, &map.aps, config.n_ap, config.p_los, rng)?;
    let start = S::of_usize(k) * S::of(config.period);
    let schedule =
        ExchangeSchedule::starting_at(start, S::of(config.sync_gap), S::of(config.reply_gap));
    let epoch = schedule.t3;
    let v_c = pipeline.channel.v_c;
    let mut observations = Vec::with_capacity(truth.aps.len());
    let mut dropped = 0;
    for (idx, &ap_id) in truth.aps.iter().enumerate() {
        let ap = &map.aps[ap_id];
        let condition = truth.conditions[idx];
        let jitter = if ap.clock_jitter_sigma > 0.0 {
            Normal::new(0.0, ap.clock_jitter_sigma)
                .expect("validated")
                .sample(rng)
        } else {
            0.0
        };
        let ap_clock = ClockParams::new(S::one(), S::of(jitter));

        let Some((azimuth, elevation)) = ap.array.angles_towards(point.position) else {
            dropped += 1;
            continue;
        };
        let range = if config.planar {
            let dx = point.position[0] - ap.position[0];
            let dy = point.position[1] - ap.position[1];
            dx.hypot(dy)
        } else {
            truth.distances[idx]
        };
        let link = LinkGeometry {
            distance_3d: range,
            azimuth,
            elevation,
        };
        let paths = generate_paths::<f64, _>(&link, condition, pipeline.channel, rng);
        let first_arrival = paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
        let flight_distance = match condition {
            LinkCondition::LoS => S::of(range),
            LinkCondition::NLoS => S::of(first_arrival * v_c),
        };

        let needs_cir = pipeline.aoa == AoaMode::Music || pipeline.gate == GateMode::Mlp;
        let cir = if needs_cir {
            Some(synthesize_cir(
                &paths,
                &ap.array,
                condition,
                link,
                pipeline.channel.snr_db,
                pipeline.channel,
                rng,
            )?)
        } else {
            None
        };
        let (aoa, bearing) = match (pipeline.aoa, &cir) {
            (AoaMode::Music, Some(cir)) => match estimate_aoa(cir, &ap.array, pipeline.music) {
                Ok(est) => (est, ap.array.global_bearing(est.azimuth, est.elevation)),
                Err(_) => {
                    dropped += 1;
                    continue;
                }
            },
            _ => (
                AoaEstimate {
                    azimuth,
                    elevation,
                    peak_value: f64::MAX,
                    low_confidence: false,
                },
                truth.bearings[idx],
            ),
        };
        let gate = match (pipeline.gate, pipeline.model, &cir) {
            (GateMode::Mlp, Some(model), Some(cir)) => match crate::channel::cfr_magnitude(cir) {
                Ok(cfr) => model.gate(&cfr),
                Err(_) => {
                    dropped += 1;
                    continue;
                }
            },
            (GateMode::Mlp, None, _) => {
                return Err(Error::Config("MLP gate selected without a model".into()))
            }
            _ => GateDecision::from_probability(if condition == LinkCondition::LoS {
                0.0
            } else {
                1.0
            }),
        };

        let record = simulate_exchange(
            mu_clock,
            &ap_clock,
            flight_distance,
            delays,
            &schedule,
            S::of(v_c),
            rng,
        );
        observations.push(LinkObservation {
            ap_id,
            ap_position: ap.position.map(S::of),
            record: record.rebased(epoch),
            aoa: AoaEstimate {
                azimuth: S::of(aoa.azimuth),
                elevation: S::of(aoa.elevation),
                peak_value: S::of(aoa.peak_value),
                low_confidence: aoa.low_confidence,
            },
            bearing: S::of(bearing),
            gate,
            sigma_phi: S::of(pipeline.sigma_phi),
        });
    }
    Ok(RoundOutput {
        observations,
        truth,
        dropped,
        epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trajectory_respects_speed_and_length() {
        let cfg = ScenarioConfig::default();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = build_trajectory(&cfg, &mut rng).unwrap();
            assert!(traj
                .iter()
                .all(|p| p.speed <= cfg.max_speed + 1e-9 && p.speed >= 0.0));
            let travelled: f64 = traj
                .windows(2)
                .map(|w| distance3(w[0].position, w[1].position))
                .sum();
            assert!(travelled <= cfg.route_length + 1e-6);
            assert!(travelled >= cfg.route_length - cfg.max_speed * cfg.period);
        }
    }

    #[test]
    fn empty_route() {
        let cfg = ScenarioConfig {
            route_length: 0.0,
            ..Default::default()
        };
        assert!(build_trajectory(&cfg, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn nearest_ap_association() {
        let map = build_map(&ScenarioConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = associate([1.0, 0.0, 1.5], &map.aps, 1, 1.0, &mut rng).unwrap();
        let best = map
            .aps
            .iter()
            .min_by(|a, b| {
                distance3(a.position, [1.0, 0.0, 1.5])
                    .total_cmp(&distance3(b.position, [1.0, 0.0, 1.5]))
            })
            .unwrap();
        assert_eq!(t.aps, vec![best.id]);
        assert_eq!(t.conditions, vec![LinkCondition::LoS]);
    }
}
