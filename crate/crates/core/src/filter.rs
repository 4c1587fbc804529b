//! Hybrid posterior filter: one Gaussian over the clock state times a
//! weighted mixture of position Gaussians.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clock::{clock_likelihood, ClockLikelihood, DelayStats, TimestampRecord};
use crate::error::{Error, Result};
use crate::linalg::{fuse_gaussians, gaussian_log_density, Mat2, Vec2};
use crate::mlp::GateDecision;
use crate::music::AoaEstimate;
use crate::scalar::{wrap_angle, Scalar, SPEED_OF_LIGHT};

/// Gaussian belief over `ζ = [1/γ̃, θ̃/γ̃]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockBelief<S> {
    pub mean: Vec2<S>,
    pub cov: Mat2<S>,
}

/// One weighted position component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gdf<S> {
    pub weight: S,
    pub mean: Vec2<S>,
    pub cov: Mat2<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPosterior<S> {
    pub clock: ClockBelief<S>,
    pub gdfs: Vec<Gdf<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise<S> {
    pub q_clock: Mat2<S>,
    pub q_pos: Mat2<S>,
}

/// Clock-state transition over one period `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockDynamics {
    /// `ζ₂′ = ζ₂ + T(1 − ζ₁)`: the offset at the next exchange epoch.
    #[default]
    Drift,
    /// `ζ₂′ = ζ₂ + T(ζ₁ − 1)`.
    ReversedDrift,
    /// `ζ₂′ = ζ₂ + Tζ₁ + T`.
    Printed,
}

impl ClockDynamics {
    /// Transition matrix and control input.
    pub fn model<S: Scalar>(self, t: S) -> (Mat2<S>, Vec2<S>) {
        let (o, z) = (S::one(), S::zero());
        match self {
            ClockDynamics::Drift => (Mat2::new(o, z, -t, o), Vec2::new(z, t)),
            ClockDynamics::ReversedDrift => (Mat2::new(o, z, t, o), Vec2::new(z, -t)),
            ClockDynamics::Printed => (Mat2::new(o, z, t, o), Vec2::new(z, t)),
        }
    }
}

/// Axis-aligned rectangle, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaBounds<S> {
    pub min: Vec2<S>,
    pub max: Vec2<S>,
}

impl<S: Scalar> AreaBounds<S> {
    pub fn new(min: Vec2<S>, max: Vec2<S>) -> Self {
        Self { min, max }
    }

    pub fn centered(center: Vec2<S>, width: S) -> Self {
        let h = Vec2::new(width * S::half(), width * S::half());
        Self::new(center - h, center + h)
    }

    pub fn center(&self) -> Vec2<S> {
        (self.min + self.max).scale(S::half())
    }

    pub fn diagonal(&self) -> S {
        (self.max - self.min).norm()
    }
}

/// Everything a filter consumes from one AP in one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkObservation<S> {
    pub ap_id: usize,
    pub ap_position: [S; 3],
    /// Stamps re-referenced to the round epoch.
    pub record: TimestampRecord<S>,
    pub aoa: AoaEstimate<S>,
    /// Horizontal bearing from the AP to the MU in the global frame.
    pub bearing: S,
    pub gate: GateDecision,
    pub sigma_phi: S,
}

impl<S: Scalar> LinkObservation<S> {
    pub fn ap_planar(&self) -> Vec2<S> {
        Vec2::new(self.ap_position[0], self.ap_position[1])
    }
}

/// First-order expansion of range (seconds) and bearing around a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linearization<S> {
    pub a: S,
    pub a_vec: Vec2<S>,
    pub b: S,
    pub b_vec: Vec2<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate<S> {
    pub skew: S,
    pub offset: S,
    pub position: Vec2<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub n_gdfs: usize,
    pub dynamics: ClockDynamics,
    /// Diagonal of the clock process noise.
    pub q_clock: [f64; 2],
    /// Diagonal of the position process noise, m².
    pub q_pos: [f64; 2],
    /// Diagonal of the initial clock covariance.
    pub clock_prior_var: [f64; 2],
    /// Bearing noise standard deviation, radians.
    pub sigma_phi: f64,
    pub v_c: f64,
    pub resample: bool,
    /// Resample when `N_eff < resample_fraction · F`.
    pub resample_fraction: f64,
    /// Subtract the known mean reply delay from the range pseudo-measurement.
    pub range_bias_correction: bool,
    /// Known MU antenna height; the range model then uses slant distance to
    /// each AP. `None` means planar ranges.
    pub mu_height: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_gdfs: 500,
            dynamics: ClockDynamics::Drift,
            q_clock: [1e-20, 1e-20],
            q_pos: [1.4 * 1.4, 1.4 * 1.4],
            clock_prior_var: [1e-6, 1e-12],
            sigma_phi: 2f64.to_radians(),
            v_c: SPEED_OF_LIGHT,
            resample: true,
            resample_fraction: 2.0 / 3.0,
            range_bias_correction: true,
            mu_height: Some(1.5),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: [f64; 2]| v.iter().all(|x| *x >= 0.0 && x.is_finite());
        let ok = self.n_gdfs >= 1
            && nonneg(self.q_clock)
            && nonneg(self.q_pos)
            && self.clock_prior_var.iter().all(|x| *x > 0.0)
            && self.sigma_phi >= 0.0
            && self.v_c > 0.0
            && (0.0..=1.0).contains(&self.resample_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid filter configuration {self:?}"
            )))
        }
    }

    pub fn process_noise<S: Scalar>(&self) -> ProcessNoise<S> {
        ProcessNoise {
            q_clock: Mat2::diag(S::of(self.q_clock[0]), S::of(self.q_clock[1])),
            q_pos: Mat2::diag(S::of(self.q_pos[0]), S::of(self.q_pos[1])),
        }
    }
}

/// `F^{-0.4}`.
pub fn bandwidth_factor<S: Scalar>(n_gdfs: usize) -> S {
    S::of_usize(n_gdfs).powf(S::of(-0.4))
}

fn normal_draw<S: Scalar, R: Rng + ?Sized>(variance: S, rng: &mut R) -> S {
    let z: f64 = StandardNormal.sample(rng);
    S::of(z) * variance.max(S::zero()).sqrt()
}

/// Uniform mixture over `bounds` (a single component at the centre for
/// `F = 1`) with isotropic covariance `c·F^{-0.4}·I`, `c = diag²/100`.
pub fn init_posterior<S: Scalar, R: Rng + ?Sized>(
    bounds: &AreaBounds<S>,
    n_gdfs: usize,
    clock_prior_var: [f64; 2],
    rng: &mut R,
) -> Result<JointPosterior<S>> {
    if n_gdfs == 0 {
        return Err(Error::Config("at least one gdf is required".into()));
    }
    let diag = bounds.diagonal();
    let var = diag * diag / S::of(100.0) * bandwidth_factor::<S>(n_gdfs);
    let weight = S::of_usize(n_gdfs).recip();
    let gdfs = (0..n_gdfs)
        .map(|_| {
            let mean = if n_gdfs == 1 {
                bounds.center()
            } else {
                let ux = S::of(rng.gen::<f64>());
                let uy = S::of(rng.gen::<f64>());
                Vec2::new(
                    bounds.min.x + ux * (bounds.max.x - bounds.min.x),
                    bounds.min.y + uy * (bounds.max.y - bounds.min.y),
                )
            };
            Gdf {
                weight,
                mean,
                cov: Mat2::diag(var, var),
            }
        })
        .collect();
    Ok(JointPosterior {
        clock: ClockBelief {
            mean: Vec2::new(S::one(), S::zero()),
            cov: Mat2::diag(S::of(clock_prior_var[0]), S::of(clock_prior_var[1])),
        },
        gdfs,
    })
}

/// Weighted mean and covariance of the mixture.
pub fn mixture_moments<S: Scalar>(gdfs: &[Gdf<S>]) -> (Vec2<S>, Mat2<S>) {
    let total = gdfs.iter().fold(S::zero(), |a, g| a + g.weight);
    let mean = gdfs
        .iter()
        .fold(Vec2::zero(), |a, g| a + g.mean.scale(g.weight / total));
    let cov = gdfs.iter().fold(Mat2::zero(), |a, g| {
        let d = g.mean - mean;
        let spread = Mat2::new(d.x * d.x, d.x * d.y, d.x * d.y, d.y * d.y);
        a + (spread + g.cov).scale(g.weight / total)
    });
    (mean, cov.symmetrize())
}

/// One prediction step.
///
/// Every gdf mean receives an independent `N(0, Q_p)` draw (x then y), all
/// gdf covariances are reset to `F^{-0.4}·tr(C)/2·I` where `C` is the
/// predicted mixture covariance, and the weights become uniform.
pub fn predict<S: Scalar, R: Rng + ?Sized>(
    posterior: &JointPosterior<S>,
    t: S,
    noise: &ProcessNoise<S>,
    dynamics: ClockDynamics,
    rng: &mut R,
) -> JointPosterior<S> {
    let (f, u) = dynamics.model(t);
    let clock = ClockBelief {
        mean: f.mul_vec(posterior.clock.mean) + u,
        cov: (f.sandwich(&posterior.clock.cov) + noise.q_clock).symmetrize(),
    };
    let n = posterior.gdfs.len();
    let (_, spread) = mixture_moments(&posterior.gdfs);
    let var = bandwidth_factor::<S>(n) * (spread + noise.q_pos).trace() * S::half();
    let weight = S::of_usize(n).recip();
    let gdfs = posterior
        .gdfs
        .iter()
        .map(|g| {
            let dx = normal_draw(noise.q_pos.m[0][0], rng);
            let dy = normal_draw(noise.q_pos.m[1][1], rng);
            Gdf {
                weight,
                mean: g.mean + Vec2::new(dx, dy),
                cov: Mat2::diag(var, var),
            }
        })
        .collect();
    JointPosterior { clock, gdfs }
}

/// Product of the clock belief with a round likelihood.
pub fn update_clock<S: Scalar>(
    belief: &ClockBelief<S>,
    likelihood: &ClockLikelihood<S>,
) -> Result<ClockBelief<S>> {
    let (mean, cov) = fuse_gaussians(belief.mean, &belief.cov, likelihood.mean, &likelihood.cov)
        .ok_or_else(|| Error::Numerical("singular clock covariance sum".into()))?;
    Ok(ClockBelief { mean, cov })
}

/// Expansion of range and bearing around `mean` for an AP at `ap`.
///
/// With `height = Some(h)` the range is the slant distance `√(ρ² + h²)`;
/// the bearing gradient always uses the planar distance `ρ`.
pub fn linearize_position<S: Scalar>(
    mean: Vec2<S>,
    ap: Vec2<S>,
    v_c: S,
    height: Option<S>,
) -> Result<Linearization<S>> {
    let d = mean - ap;
    let rho2 = d.dot(d);
    if !(rho2 > S::zero()) {
        return Err(Error::SingularGeometry(
            "gdf mean coincides with the AP".into(),
        ));
    }
    let slant = (rho2 + height.map_or(S::zero(), |h| h * h)).sqrt();
    let a = slant / v_c;
    let a_vec = d.scale((v_c * v_c * a).recip());
    let b = d.y.atan2(d.x);
    let b_vec = Vec2::new(-d.y, d.x).scale(rho2.recip());
    Ok(Linearization { a, a_vec, b, b_vec })
}

/// Parameters shared by every per-gdf likelihood of one observation.
#[derive(Clone, Copy, Debug)]
pub struct PositionModel<S> {
    pub v_c: S,
    pub sigma_r: S,
    /// Subtracted from the range pseudo-measurement.
    pub range_bias: S,
    pub height: Option<S>,
}

/// Linearized range/bearing likelihood of a gdf, as a Gaussian in position.
pub fn position_likelihood<S: Scalar>(
    gdf_mean: Vec2<S>,
    obs: &LinkObservation<S>,
    clock_mean_plus: Vec2<S>,
    model: &PositionModel<S>,
) -> Result<(Vec2<S>, Mat2<S>)> {
    let lin = linearize_position(gdf_mean, obs.ap_planar(), model.v_c, model.height)?;
    let rec = &obs.record;
    let flight =
        rec.c_j_t6 - (rec.c_i_t5 * clock_mean_plus.x - clock_mean_plus.y) - model.range_bias;
    let r = Vec2::new(
        flight - lin.a + gdf_mean.dot(lin.a_vec),
        wrap_angle(obs.bearing - lin.b) + gdf_mean.dot(lin.b_vec),
    );
    let b = Mat2::from_rows(lin.a_vec, lin.b_vec);
    let a = b
        .least_squares_operator()
        .ok_or_else(|| Error::SingularGeometry("collinear range and bearing gradients".into()))?;
    let noise = Mat2::diag(model.sigma_r * model.sigma_r, obs.sigma_phi * obs.sigma_phi);
    Ok((a.mul_vec(r), a.sandwich(&noise)))
}

/// Density of the likelihood `N(mean, cov)` at a gdf's predicted mean.
pub fn weight_from_likelihood<S: Scalar>(
    predicted_mean: Vec2<S>,
    mean: Vec2<S>,
    cov: &Mat2<S>,
) -> S {
    gaussian_log_density(predicted_mean, mean, cov).map_or(S::zero(), |l| l.exp())
}

/// Product of a predicted gdf with a likelihood; the weight is carried over.
pub fn fuse_gdf<S: Scalar>(gdf: &Gdf<S>, mean: Vec2<S>, cov: &Mat2<S>) -> Result<Gdf<S>> {
    let (m, c) = fuse_gaussians(gdf.mean, &gdf.cov, mean, cov)
        .ok_or_else(|| Error::Numerical("singular gdf covariance sum".into()))?;
    Ok(Gdf {
        weight: gdf.weight,
        mean: m,
        cov: c,
    })
}

/// `w_f ∝ w_pred,f · w_meas,f`, normalised.
pub fn update_weights<S: Scalar>(w_pred: &[S], w_meas: &[S]) -> Result<Vec<S>> {
    let products: Vec<S> = w_pred.iter().zip(w_meas).map(|(&a, &b)| a * b).collect();
    let total = products.iter().fold(S::zero(), |a, &b| a + b);
    if !(total > S::zero()) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(products.into_iter().map(|p| p / total).collect())
}

/// Same as [`update_weights`] with the measurement factors given as logs.
pub fn update_log_weights<S: Scalar>(w_pred: &[S], log_meas: &[Option<S>]) -> Result<Vec<S>> {
    let logs: Vec<Option<S>> = w_pred
        .iter()
        .zip(log_meas)
        .map(|(&w, l)| match l {
            Some(l) if w > S::zero() && l.is_finite() => Some(w.ln() + *l),
            _ => None,
        })
        .collect();
    let max = logs
        .iter()
        .flatten()
        .fold(None, |m: Option<S>, &v| Some(m.map_or(v, |m| m.max(v))));
    let Some(max) = max else {
        return Err(Error::DegenerateWeights);
    };
    let w: Vec<S> = logs
        .iter()
        .map(|l| l.map_or(S::zero(), |l| (l - max).exp()))
        .collect();
    let total = w.iter().fold(S::zero(), |a, &b| a + b);
    Ok(w.into_iter().map(|v| v / total).collect())
}

pub fn estimate<S: Scalar>(posterior: &JointPosterior<S>) -> Result<Estimate<S>> {
    let zeta = posterior.clock.mean;
    if !(zeta.x > S::zero()) {
        return Err(Error::InvalidState(format!(
            "clock state ζ₁ = {} is not positive",
            zeta.x
        )));
    }
    let total = posterior.gdfs.iter().fold(S::zero(), |a, g| a + g.weight);
    let position = posterior
        .gdfs
        .iter()
        .fold(Vec2::zero(), |a, g| a + g.mean.scale(g.weight / total));
    Ok(Estimate {
        skew: zeta.x.recip(),
        offset: zeta.y / zeta.x,
        position,
    })
}

/// `1 / Σ w²`.
pub fn effective_count<S: Scalar>(weights: &[S]) -> S {
    weights.iter().fold(S::zero(), |a, &w| a + w * w).recip()
}

/// Indices chosen by systematic resampling with one uniform offset `u0 ∈ [0, 1)`.
pub fn systematic_indices<S: Scalar>(weights: &[S], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let total = weights.iter().fold(S::zero(), |a, &w| a + w);
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0] / total;
    let mut i = 0;
    for k in 0..n {
        let target = (S::of(u0) + S::of_usize(k)) / S::of_usize(n);
        while target > cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i] / total;
        }
        out.push(i);
    }
    out
}

/// Systematic resampling of the position mixture. Duplicated means are
/// jittered with `N(0, F^{-0.4}·tr(C)/2·I)`, `C` the mixture covariance.
/// The clock belief is left untouched.
pub fn resample<S: Scalar, R: Rng + ?Sized>(
    posterior: &JointPosterior<S>,
    rng: &mut R,
) -> JointPosterior<S> {
    let n = posterior.gdfs.len();
    let weights: Vec<S> = posterior.gdfs.iter().map(|g| g.weight).collect();
    let (_, cov) = mixture_moments(&posterior.gdfs);
    let var = bandwidth_factor::<S>(n) * cov.trace() * S::half();
    let u0 = rng.gen::<f64>();
    let mut seen = vec![false; n];
    let weight = S::of_usize(n).recip();
    let gdfs = systematic_indices(&weights, u0)
        .into_iter()
        .map(|i| {
            let parent = posterior.gdfs[i];
            let mean = if std::mem::replace(&mut seen[i], true) {
                let dx = normal_draw(var, rng);
                let dy = normal_draw(var, rng);
                parent.mean + Vec2::new(dx, dy)
            } else {
                parent.mean
            };
            Gdf {
                weight,
                mean,
                cov: parent.cov,
            }
        })
        .collect();
    JointPosterior {
        clock: posterior.clock,
        gdfs,
    }
}

/// Outcome of one measurement round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub used_links: usize,
    pub skipped_links: usize,
    pub resampled: bool,
    pub reinitialized: bool,
}

/// The complete recursive estimator for one MU.
#[derive(Clone, Debug)]
pub struct DePf<S> {
    pub config: FilterConfig,
    pub delays: DelayStats,
    pub posterior: JointPosterior<S>,
    bounds: AreaBounds<S>,
}

impl<S: Scalar> DePf<S> {
    pub fn new<R: Rng + ?Sized>(
        config: FilterConfig,
        delays: DelayStats,
        bounds: AreaBounds<S>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        delays.validate()?;
        let posterior = init_posterior(&bounds, config.n_gdfs, config.clock_prior_var, rng)?;
        Ok(Self {
            config,
            delays,
            posterior,
            bounds,
        })
    }

    pub fn predict<R: Rng + ?Sized>(&mut self, t: S, rng: &mut R) {
        let noise = self.config.process_noise();
        self.posterior = predict(&self.posterior, t, &noise, self.config.dynamics, rng);
    }

    pub fn estimate(&self) -> Result<Estimate<S>> {
        estimate(&self.posterior)
    }

    fn position_model(&self, obs: &LinkObservation<S>) -> PositionModel<S> {
        PositionModel {
            v_c: S::of(self.config.v_c),
            sigma_r: S::of(self.delays.sigma_r),
            range_bias: if self.config.range_bias_correction {
                S::of(self.delays.mu)
            } else {
                S::zero()
            },
            height: self.config.mu_height.map(|h| obs.ap_position[2] - S::of(h)),
        }
    }

    /// Fuses the LoS-gated observations of one round, nearest AP first, then
    /// resamples if the effective gdf count has dropped.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        observations: &[LinkObservation<S>],
        rng: &mut R,
    ) -> Result<UpdateReport> {
        let mut report = UpdateReport::default();
        let here = self.estimate()?.position;
        let mut links: Vec<&LinkObservation<S>> =
            observations.iter().filter(|o| o.gate.is_los).collect();
        links.sort_by(|a, b| {
            let da = (a.ap_planar() - here).norm();
            let db = (b.ap_planar() - here).norm();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        });

        for obs in links {
            let likelihood = match clock_likelihood(&obs.record, &self.delays) {
                Ok(l) => l,
                Err(_) => {
                    report.skipped_links += 1;
                    continue;
                }
            };
            let clock = match update_clock(&self.posterior.clock, &likelihood) {
                Ok(c) => c,
                Err(_) => {
                    report.skipped_links += 1;
                    continue;
                }
            };
            let model = self.position_model(obs);
            let mut log_meas = Vec::with_capacity(self.posterior.gdfs.len());
            let mut fused = Vec::with_capacity(self.posterior.gdfs.len());
            for g in &self.posterior.gdfs {
                let outcome =
                    position_likelihood(g.mean, obs, likelihood.mean, &model).and_then(|(m, c)| {
                        let log_w = gaussian_log_density(g.mean, m, &(c + g.cov));
                        Ok((fuse_gdf(g, m, &c)?, log_w))
                    });
                match outcome {
                    Ok((f, log_w)) => {
                        fused.push(f);
                        log_meas.push(log_w);
                    }
                    Err(_) => {
                        fused.push(*g);
                        log_meas.push(None);
                    }
                }
            }
            let w_pred: Vec<S> = self.posterior.gdfs.iter().map(|g| g.weight).collect();
            self.posterior.clock = clock;
            match update_log_weights(&w_pred, &log_meas) {
                Ok(w) => {
                    for (g, w) in fused.iter_mut().zip(w) {
                        g.weight = w;
                    }
                    self.posterior.gdfs = fused;
                }
                Err(Error::DegenerateWeights) => {
                    self.reinitialize_on_ring(obs, &likelihood, rng);
                    report.reinitialized = true;
                }
                Err(e) => return Err(e),
            }
            report.used_links += 1;
        }

        let n = self.posterior.gdfs.len();
        if self.config.resample && n > 1 {
            let weights: Vec<S> = self.posterior.gdfs.iter().map(|g| g.weight).collect();
            if effective_count(&weights) < S::of(self.config.resample_fraction) * S::of_usize(n) {
                self.posterior = resample(&self.posterior, rng);
                report.resampled = true;
            }
        }
        Ok(report)
    }

    /// Restarts the mixture on the circle of the measured range around the AP.
    fn reinitialize_on_ring<R: Rng + ?Sized>(
        &mut self,
        obs: &LinkObservation<S>,
        likelihood: &ClockLikelihood<S>,
        rng: &mut R,
    ) {
        let model = self.position_model(obs);
        let rec = &obs.record;
        let flight =
            rec.c_j_t6 - (rec.c_i_t5 * likelihood.mean.x - likelihood.mean.y) - model.range_bias;
        let slant = (flight * model.v_c).max(S::zero());
        let h = model.height.unwrap_or(S::zero());
        let radius = (slant * slant - h * h).max(S::zero()).sqrt();
        let n = self.config.n_gdfs;
        let diag = self.bounds.diagonal();
        let var = diag * diag / S::of(100.0) * bandwidth_factor::<S>(n);
        let weight = S::of_usize(n).recip();
        let centre = obs.ap_planar();
        self.posterior.gdfs = (0..n)
            .map(|_| {
                let angle = S::of(rng.gen_range(0.0..std::f64::consts::TAU));
                let (s, c) = angle.sin_cos();
                Gdf {
                    weight,
                    mean: centre + Vec2::new(c, s).scale(radius),
                    cov: Mat2::diag(var, var),
                }
            })
            .collect();
    }
}

/// Plain-`f64` view of a posterior for JSON export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub clock_mean: [f64; 2],
    pub clock_cov: [[f64; 2]; 2],
    pub weights: Vec<f64>,
    pub means: Vec<[f64; 2]>,
    pub covariances: Vec<[[f64; 2]; 2]>,
}

impl<S: Scalar> JointPosterior<S> {
    pub fn snapshot(&self) -> PosteriorSnapshot {
        let m = |c: &Mat2<S>| {
            [
                [c.m[0][0].f64(), c.m[0][1].f64()],
                [c.m[1][0].f64(), c.m[1][1].f64()],
            ]
        };
        PosteriorSnapshot {
            clock_mean: [self.clock.mean.x.f64(), self.clock.mean.y.f64()],
            clock_cov: m(&self.clock.cov),
            weights: self.gdfs.iter().map(|g| g.weight.f64()).collect(),
            means: self
                .gdfs
                .iter()
                .map(|g| [g.mean.x.f64(), g.mean.y.f64()])
                .collect(),
            covariances: self.gdfs.iter().map(|g| m(&g.cov)).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }

    pub fn weights(&self) -> Vec<S> {
        self.gdfs.iter().map(|g| g.weight).collect()
    }
}

impl PosteriorSnapshot {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_posterior<S: Scalar>(&self) -> JointPosterior<S> {
        let m = |c: &[[f64; 2]; 2]| {
            Mat2::new(
                S::of(c[0][0]),
                S::of(c[0][1]),
                S::of(c[1][0]),
                S::of(c[1][1]),
            )
        };
        JointPosterior {
            clock: ClockBelief {
                mean: Vec2::new(S::of(self.clock_mean[0]), S::of(self.clock_mean[1])),
                cov: m(&self.clock_cov),
            },
            gdfs: self
                .weights
                .iter()
                .zip(&self.means)
                .zip(&self.covariances)
                .map(|((&w, mu), c)| Gdf {
                    weight: S::of(w),
                    mean: Vec2::new(S::of(mu[0]), S::of(mu[1])),
                    cov: m(c),
                })
                .collect(),
        }
    }
}
