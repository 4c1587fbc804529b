//! Local clock model, six-stamp exchange simulation and the per-round
//! least-squares clock likelihood.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Scalar;

/// Local clock `c(t) = γ·t + θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockParams<S> {
    pub skew: S,
    pub offset: S,
}

impl<S: Scalar> ClockParams<S> {
    pub fn new(skew: S, offset: S) -> Self {
        Self { skew, offset }
    }

    pub fn ideal() -> Self {
        Self::new(S::one(), S::zero())
    }

    /// Checks `γ > 0` and `|γ − 1| ≤ max_skew_deviation`.
    pub fn validate(&self, max_skew_deviation: f64) -> Result<()> {
        if !(self.skew > S::zero()) || !self.offset.is_finite() {
            return Err(Error::Config(format!(
                "clock skew must be positive, got {}",
                self.skew
            )));
        }
        if (self.skew - S::one()).abs() > S::of(max_skew_deviation) {
            return Err(Error::Config(format!(
                "clock skew {} deviates from 1 by more than {max_skew_deviation}",
                self.skew
            )));
        }
        Ok(())
    }

    pub fn local_time(&self, t_global: S) -> S {
        self.skew * t_global + self.offset
    }

    /// Global time at which this clock reads `reading`.
    pub fn global_time(&self, reading: S) -> S {
        (reading - self.offset) / self.skew
    }

    /// Skew and offset of `self` expressed against `master`'s readings,
    /// i.e. `c_self = γ̃·c_master + θ̃`.
    pub fn relative_to(&self, master: &Self) -> (S, S) {
        let skew = self.skew / master.skew;
        (skew, self.offset - skew * master.offset)
    }

    /// Offset of `self` against `master` at the instant the master reads
    /// `epoch`: `c_self − epoch`.
    pub fn offset_at_epoch(&self, master: &Self, epoch: S) -> S {
        let (skew, offset) = self.relative_to(master);
        (skew - S::one()) * epoch + offset
    }
}

/// Filter clock state `ζ = [1/γ̃, θ̃/γ̃]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeClockState<S> {
    pub zeta: Vec2<S>,
}

impl<S: Scalar> RelativeClockState<S> {
    pub fn from_skew_offset(skew: S, offset: S) -> Result<Self> {
        if !(skew > S::zero()) {
            return Err(Error::InvalidState(format!(
                "relative skew must be positive, got {skew}"
            )));
        }
        Ok(Self {
            zeta: Vec2::new(skew.recip(), offset / skew),
        })
    }

    pub fn skew(&self) -> S {
        self.zeta.x.recip()
    }

    pub fn offset(&self) -> S {
        self.zeta.y / self.zeta.x
    }
}

/// The six local readings of one exchange round. `c_j` stamps are taken by
/// the master (access point), `c_i` stamps by the mobile user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimestampRecord<S> {
    pub c_j_t1: S,
    pub c_i_t2: S,
    pub c_j_t3: S,
    pub c_i_t4: S,
    pub c_i_t5: S,
    pub c_j_t6: S,
}

impl<S: Scalar> TimestampRecord<S> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c_j_t3 > self.c_j_t1
            && self.c_i_t4 > self.c_i_t2
            && self.c_i_t5 > self.c_i_t4
            && self.c_j_t6 > self.c_j_t3;
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateRound(format!(
                "stamps out of order: {self:?}"
            )))
        }
    }

    /// Subtracts a common reading from every stamp.
    ///
    /// The clock state then refers to the offset at `epoch` rather than at
    /// zero, which keeps the products `ζ₁·c` small.
    pub fn rebased(&self, epoch: S) -> Self {
        Self {
            c_j_t1: self.c_j_t1 - epoch,
            c_i_t2: self.c_i_t2 - epoch,
            c_j_t3: self.c_j_t3 - epoch,
            c_i_t4: self.c_i_t4 - epoch,
            c_i_t5: self.c_i_t5 - epoch,
            c_j_t6: self.c_j_t6 - epoch,
        }
    }

    pub fn cast<T: Scalar>(&self) -> TimestampRecord<T> {
        let c = |x: S| T::of(x.f64());
        TimestampRecord {
            c_j_t1: c(self.c_j_t1),
            c_i_t2: c(self.c_i_t2),
            c_j_t3: c(self.c_j_t3),
            c_i_t4: c(self.c_i_t4),
            c_i_t5: c(self.c_i_t5),
            c_j_t6: c(self.c_j_t6),
        }
    }
}

/// Transmission (`T`) and reception (`R`) delay statistics. Both share the
/// mean `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mu: f64,
    pub sigma_t: f64,
    pub sigma_r: f64,
}

impl DelayStats {
    pub fn new(mu: f64, sigma_t: f64, sigma_r: f64) -> Result<Self> {
        let d = Self {
            mu,
            sigma_t,
            sigma_r,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn noiseless() -> Self {
        Self {
            mu: 0.0,
            sigma_t: 0.0,
            sigma_r: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_t >= 0.0 && self.sigma_r >= 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("invalid delay statistics {self:?}")));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(mean: f64, sigma: f64, rng: &mut R) -> f64 {
        if sigma == 0.0 {
            mean
        } else {
            Normal::new(mean, sigma)
                .expect("sigma validated")
                .sample(rng)
        }
    }
}

/// Gaussian clock-state likelihood of one round.
///
/// With noiseless delays the covariance is the zero matrix; the fusion
/// routines accept that limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockLikelihood<S> {
    pub mean: Vec2<S>,
    pub cov: Mat2<S>,
}

/// Sampling ranges for the initial MU clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockRanges {
    pub skew_low: f64,
    pub skew_high: f64,
    /// Seconds.
    pub offset_low: f64,
    /// Seconds.
    pub offset_high: f64,
    pub max_skew_deviation: f64,
}

impl Default for ClockRanges {
    fn default() -> Self {
        Self {
            skew_low: 1.0 - 1e-4,
            skew_high: 1.0 + 1e-4,
            offset_low: -1e-6,
            offset_high: 1e-6,
            max_skew_deviation: 1e-3,
        }
    }
}

impl ClockRanges {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.skew_low,
            self.skew_high,
            self.offset_low,
            self.offset_high,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.skew_low > self.skew_high || self.offset_low > self.offset_high {
            return Err(Error::Config(format!("invalid clock ranges {self:?}")));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(low: f64, high: f64, rng: &mut R) -> f64 {
    if low == high {
        low
    } else {
        rng.gen_range(low..high)
    }
}

pub fn sample_initial_clock<S: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &ClockRanges,
) -> Result<ClockParams<S>> {
    ranges.validate()?;
    let clock = ClockParams::new(
        S::of(uniform(ranges.skew_low, ranges.skew_high, rng)),
        S::of(uniform(ranges.offset_low, ranges.offset_high, rng)),
    );
    clock.validate(ranges.max_skew_deviation)?;
    Ok(clock)
}

/// Master-clock readings at which the three messages leave their sender.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeSchedule<S> {
    pub t1: S,
    pub t3: S,
    pub t5: S,
}

impl<S: Scalar> ExchangeSchedule<S> {
    pub fn new(t1: S, t3: S, t5: S) -> Self {
        Self { t1, t3, t5 }
    }

    /// `t3 = start + sync_gap`, `t5 = t3 + reply_gap`.
    pub fn starting_at(start: S, sync_gap: S, reply_gap: S) -> Self {
        let t3 = start + sync_gap;
        Self::new(start, t3, t3 + reply_gap)
    }
}

/// Simulates one round of the three-message exchange between master `ap` and
/// `mu` over a path of `distance_m` meters.
///
/// Clocks run in global time; the master sends when its clock reads `t1`
/// and `t3`, the MU replies at the instant the master clock reads `t5`.
pub fn simulate_exchange<S: Scalar, R: Rng + ?Sized>(
    mu: &ClockParams<S>,
    ap: &ClockParams<S>,
    distance_m: S,
    delays: &DelayStats,
    schedule: &ExchangeSchedule<S>,
    v_c: S,
    rng: &mut R,
) -> TimestampRecord<S> {
    let flight = distance_m / v_c;
    let t0 = S::of(DelayStats::draw(delays.mu, delays.sigma_t, rng));
    let t1 = S::of(DelayStats::draw(delays.mu, delays.sigma_t, rng));
    let r = S::of(DelayStats::draw(delays.mu, delays.sigma_r, rng));

    let send1 = ap.global_time(schedule.t1);
    let send3 = ap.global_time(schedule.t3);
    let send5 = ap.global_time(schedule.t5);
    TimestampRecord {
        c_j_t1: schedule.t1,
        c_i_t2: mu.local_time(send1 + flight + t0),
        c_j_t3: schedule.t3,
        c_i_t4: mu.local_time(send3 + flight + t1),
        c_i_t5: mu.local_time(send5),
        c_j_t6: ap.local_time(send5 + flight + r),
    }
}

/// Least-squares clock likelihood of one round.
///
/// Solves `B ζ = r + z` with `B = [[c4−c2, 0], [c4+c5, −2]]`,
/// `r = [c3−c1, c3+c6]` and `z ~ N(0, diag(2σ_T², σ_T²+σ_R²))`.
pub fn clock_likelihood<S: Scalar>(
    record: &TimestampRecord<S>,
    delays: &DelayStats,
) -> Result<ClockLikelihood<S>> {
    let b = Mat2::new(
        record.c_i_t4 - record.c_i_t2,
        S::zero(),
        record.c_i_t4 + record.c_i_t5,
        -S::two(),
    );
    let r = Vec2::new(record.c_j_t3 - record.c_j_t1, record.c_j_t3 + record.c_j_t6);
    let noise = Mat2::diag(
        S::of(2.0 * delays.sigma_t * delays.sigma_t),
        S::of(delays.sigma_t * delays.sigma_t + delays.sigma_r * delays.sigma_r),
    );
    let a = b
        .least_squares_operator()
        .ok_or_else(|| Error::DegenerateRound("c_i(t4) equals c_i(t2)".into()))?;
    Ok(ClockLikelihood {
        mean: a.mul_vec(r),
        cov: a.sandwich(&noise),
    })
}
