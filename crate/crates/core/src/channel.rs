//! Synthetic multipath channel: path generation for line-of-sight and
//! obstructed links, per-antenna impulse responses on a uniform planar array,
//! CFR magnitude features and labeled training corpora.

use std::path::Path;

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fft, CMatrix};
use crate::scalar::{Scalar, SPEED_OF_LIGHT};

/// Link condition label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkCondition {
    LoS,
    NLoS,
}

impl LinkCondition {
    /// Class index used by the classifier: 0 = LoS, 1 = NLoS.
    pub fn index(self) -> usize {
        match self {
            LinkCondition::LoS => 0,
            LinkCondition::NLoS => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(LinkCondition::LoS),
            1 => Ok(LinkCondition::NLoS),
            _ => Err(Error::DegenerateInput(format!("unknown class label {i}"))),
        }
    }
}

/// `n_ant × n_ant` uniform planar array.
///
/// The array plane is horizontal, tilted by `tilt` about its column axis so
/// that the boresight leans towards the horizontal direction `facing`.
/// Element `(m, n)` sits at `m·d` along the row axis and `n·d` along the
/// column axis and is stored at index `m·n_ant + n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry<S> {
    pub n_ant: usize,
    pub spacing: S,
    pub wavelength: S,
    /// Degrees.
    pub tilt: S,
    /// Radians, counter-clockwise from +x.
    pub facing: S,
    pub position: [S; 3],
}

impl<S: Scalar> Default for ArrayGeometry<S> {
    fn default() -> Self {
        let wavelength = S::of(SPEED_OF_LIGHT / 3.8e9);
        Self {
            n_ant: 3,
            spacing: wavelength * S::half(),
            wavelength,
            tilt: S::of(20.0),
            facing: S::FRAC_PI_2(),
            position: [S::zero(), S::zero(), S::of(10.0)],
        }
    }
}

fn dot3<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl<S: Scalar> ArrayGeometry<S> {
    pub fn validate(&self) -> Result<()> {
        if self.n_ant < 2 || !(self.spacing > S::zero()) || !(self.wavelength > S::zero()) {
            return Err(Error::Config(format!("invalid array geometry {self:?}")));
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.n_ant * self.n_ant
    }

    /// Row axis, column axis and boresight, as global unit vectors.
    pub fn axes(&self) -> ([S; 3], [S; 3], [S; 3]) {
        let (st, ct) = self.tilt.to_radians().sin_cos();
        let (sp, cp) = self.facing.sin_cos();
        let row = [ct * cp, ct * sp, st];
        let col = [sp, -cp, S::zero()];
        let normal = [st * cp, st * sp, -ct];
        (row, col, normal)
    }

    /// Array-frame azimuth and elevation of the direction towards `target`.
    /// `None` when the target lies outside the `[0, π] × [0, π/2]` field of
    /// view or coincides with the array.
    pub fn angles_towards(&self, target: [S; 3]) -> Option<(S, S)> {
        let d = [
            target[0] - self.position[0],
            target[1] - self.position[1],
            target[2] - self.position[2],
        ];
        let norm = dot3(d, d).sqrt();
        if norm == S::zero() {
            return None;
        }
        let d = [d[0] / norm, d[1] / norm, d[2] / norm];
        let (row, col, normal) = self.axes();
        let (u, v, w) = (dot3(d, row), dot3(d, col), dot3(d, normal));
        if u < S::zero() || w < S::zero() {
            return None;
        }
        let azimuth = u.atan2(v);
        let elevation = w.min(S::one()).acos();
        Some((azimuth, elevation))
    }

    /// Global unit direction for array-frame angles.
    pub fn direction(&self, azimuth: S, elevation: S) -> [S; 3] {
        let (row, col, normal) = self.axes();
        let (sa, ca) = elevation.sin_cos();
        let (sp, cp) = azimuth.sin_cos();
        let (u, v, w) = (sa * sp, sa * cp, ca);
        [
            u * row[0] + v * col[0] + w * normal[0],
            u * row[1] + v * col[1] + w * normal[1],
            u * row[2] + v * col[2] + w * normal[2],
        ]
    }

    /// Horizontal bearing in the global frame of the array-frame direction.
    pub fn global_bearing(&self, azimuth: S, elevation: S) -> S {
        let d = self.direction(azimuth, elevation);
        d[1].atan2(d[0])
    }

    /// Narrowband steering vector: element `(m, n)` has phase
    /// `2π d/λ · sin α · (m sin φ + n cos φ)`.
    pub fn steering_vector(&self, azimuth: S, elevation: S) -> Vec<Complex<S>> {
        let k = S::TAU() * self.spacing / self.wavelength * elevation.sin();
        let (sp, cp) = azimuth.sin_cos();
        let mut out = Vec::with_capacity(self.n_elements());
        for m in 0..self.n_ant {
            for n in 0..self.n_ant {
                let phase = k * (S::of_usize(m) * sp + S::of_usize(n) * cp);
                let (s, c) = phase.sin_cos();
                out.push(Complex::new(c, s));
            }
        }
        out
    }
}

/// One propagation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathComponent<S> {
    pub delay: S,
    pub gain: Complex<S>,
    pub azimuth: S,
    pub elevation: S,
}

/// Geometry of one link as seen from the AP array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry<S> {
    pub distance_3d: S,
    pub azimuth: S,
    pub elevation: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub k_factor_db: f64,
    pub n_mp: usize,
    /// Seconds.
    pub tau_rms: f64,
    /// Seconds.
    pub nlos_excess_min: f64,
    /// Seconds.
    pub nlos_excess_max: f64,
    pub link_power: f64,
    pub snr_db: f64,
    pub n_taps: usize,
    /// Seconds.
    pub tap_spacing: f64,
    pub v_c: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            k_factor_db: 10.0,
            n_mp: 8,
            tau_rms: 50e-9,
            nlos_excess_min: 10e-9,
            nlos_excess_max: 200e-9,
            link_power: 1.0,
            snr_db: 20.0,
            n_taps: 64,
            tap_spacing: 10e-9,
            v_c: SPEED_OF_LIGHT,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_rms > 0.0
            && self.nlos_excess_min > 0.0
            && self.nlos_excess_max >= self.nlos_excess_min
            && self.link_power > 0.0
            && self.n_taps >= 1
            && self.tap_spacing > 0.0
            && self.v_c > 0.0
            && self.snr_db.is_finite()
            && !self.k_factor_db.is_nan();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid channel configuration {self:?}"
            )))
        }
    }

    /// Rician K as a linear power ratio; `+∞` dB is a pure direct path.
    pub fn k_linear(&self) -> f64 {
        10f64.powf(self.k_factor_db / 10.0)
    }
}

fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex<f64> {
    let n = Normal::new(0.0, (variance / 2.0).sqrt()).expect("variance is finite and nonnegative");
    Complex::new(n.sample(rng), n.sample(rng))
}

fn random_angles<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (
        rng.gen_range(0.0..std::f64::consts::PI),
        rng.gen_range(0.0..std::f64::consts::FRAC_PI_2),
    )
}

/// Draws the path set of one link realisation. Total path power equals
/// `config.link_power`.
pub fn generate_paths<S: Scalar, R: Rng + ?Sized>(
    link: &LinkGeometry<S>,
    condition: LinkCondition,
    config: &ChannelConfig,
    rng: &mut R,
) -> Vec<PathComponent<S>> {
    let tau0 = link.distance_3d.f64() / config.v_c;
    let decay = Exp::new(1.0 / config.tau_rms).expect("tau_rms validated");
    let mut raw: Vec<(f64, Complex<f64>, f64, f64)> = Vec::with_capacity(config.n_mp + 1);
    let direct_share = match condition {
        LinkCondition::LoS => {
            let k = config.k_linear();
            let share = if k.is_infinite() { 1.0 } else { k / (k + 1.0) };
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            raw.push((
                tau0,
                Complex::from_polar(1.0, phase),
                link.azimuth.f64(),
                link.elevation.f64(),
            ));
            for _ in 0..config.n_mp {
                let excess: f64 = decay.sample(rng);
                let (az, el) = random_angles(rng);
                raw.push((
                    tau0 + excess,
                    complex_normal((-excess / config.tau_rms).exp(), rng),
                    az,
                    el,
                ));
            }
            share
        }
        LinkCondition::NLoS => {
            let first = tau0 + rng.gen_range(config.nlos_excess_min..=config.nlos_excess_max);
            let (az, el) = random_angles(rng);
            raw.push((first, complex_normal(1.0, rng), az, el));
            for _ in 0..config.n_mp {
                let excess: f64 = decay.sample(rng);
                let (az, el) = random_angles(rng);
                raw.push((
                    first + excess,
                    complex_normal((-excess / config.tau_rms).exp(), rng),
                    az,
                    el,
                ));
            }
            0.0
        }
    };

    let p = config.link_power;
    let scattered: f64 = raw.iter().skip(1).map(|r| r.1.norm_sqr()).sum();
    let (direct_scale, scatter_scale) = match condition {
        LinkCondition::LoS => {
            let scatter = if scattered > 0.0 {
                (p * (1.0 - direct_share) / scattered).sqrt()
            } else {
                0.0
            };
            ((p * direct_share).sqrt(), scatter)
        }
        LinkCondition::NLoS => {
            let s = (p / (scattered + raw[0].1.norm_sqr())).sqrt();
            (s, s)
        }
    };
    raw.iter()
        .enumerate()
        .map(|(i, &(delay, gain, az, el))| {
            let g = gain * if i == 0 { direct_scale } else { scatter_scale };
            PathComponent {
                delay: S::of(delay),
                gain: Complex::new(S::of(g.re), S::of(g.im)),
                azimuth: S::of(az),
                elevation: S::of(el),
            }
        })
        .collect()
}

/// Per-antenna channel impulse responses of one link.
#[derive(Clone, Debug, PartialEq)]
pub struct CirSnapshot<S> {
    /// `n_ant² × n_taps`.
    pub taps: CMatrix<S>,
    pub tap_spacing: S,
    pub label: LinkCondition,
    pub truth: LinkGeometry<S>,
}

/// Places every path on its nearest tap bin with the array response of its
/// arrival direction and adds white complex Gaussian noise.
///
/// The per-tap noise variance is `P / (n_taps · snr)`, so that after the
/// unitary-scaled DFT the per-subcarrier SNR equals `snr_db`. Paths beyond
/// the delay window are dropped. `snr_db = +∞` disables noise.
pub fn synthesize_cir<S: Scalar, R: Rng + ?Sized>(
    paths: &[PathComponent<S>],
    array: &ArrayGeometry<S>,
    label: LinkCondition,
    truth: LinkGeometry<S>,
    snr_db: f64,
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<CirSnapshot<S>> {
    if paths.is_empty() {
        return Err(Error::DegenerateInput("no propagation paths".into()));
    }
    let n_el = array.n_elements();
    let mut taps = CMatrix::zeros(n_el, config.n_taps);
    let spacing = S::of(config.tap_spacing);
    for path in paths {
        let bin = (path.delay / spacing).round();
        let Some(bin) = bin.to_usize() else { continue };
        if bin >= config.n_taps {
            continue;
        }
        for (k, a) in array
            .steering_vector(path.azimuth, path.elevation)
            .into_iter()
            .enumerate()
        {
            taps[(k, bin)] = taps[(k, bin)] + path.gain * a;
        }
    }
    if snr_db.is_finite() {
        let power: f64 = paths.iter().map(|p| p.gain.norm_sqr().f64()).sum();
        let variance = power / (config.n_taps as f64 * 10f64.powf(snr_db / 10.0));
        for k in 0..n_el {
            for t in 0..config.n_taps {
                let n = complex_normal(variance, rng);
                taps[(k, t)] = taps[(k, t)] + Complex::new(S::of(n.re), S::of(n.im));
            }
        }
    }
    Ok(CirSnapshot {
        taps,
        tap_spacing: spacing,
        label,
        truth,
    })
}

/// Draws paths and synthesizes the snapshot for one link in one call.
pub fn simulate_link<S: Scalar, R: Rng + ?Sized>(
    link: &LinkGeometry<S>,
    condition: LinkCondition,
    array: &ArrayGeometry<S>,
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<CirSnapshot<S>> {
    let paths = generate_paths(link, condition, config, rng);
    synthesize_cir(&paths, array, condition, *link, config.snr_db, config, rng)
}

/// Frequency response of each antenna: row `k` holds the DFT of antenna `k`'s
/// taps.
pub fn frequency_response<S: Scalar>(cir: &CirSnapshot<S>) -> CMatrix<S> {
    let n_taps = cir.taps.cols();
    let mut out = CMatrix::zeros(cir.taps.rows(), n_taps);
    for k in 0..cir.taps.rows() {
        let mut row = cir.taps.row(k).to_vec();
        fft(&mut row);
        for (t, v) in row.into_iter().enumerate() {
            out[(k, t)] = v;
        }
    }
    out
}

/// CFR magnitude of the reference antenna normalised to a unit maximum.
pub fn cfr_magnitude<S: Scalar>(cir: &CirSnapshot<S>) -> Result<Vec<S>> {
    if cir.taps.rows() == 0 {
        return Err(Error::DegenerateInput("snapshot has no antennas".into()));
    }
    let mut spectrum = cir.taps.row(0).to_vec();
    fft(&mut spectrum);
    let mags: Vec<S> = spectrum.iter().map(|c| c.norm()).collect();
    let max = mags.iter().fold(S::zero(), |a, &b| a.max(b));
    if !(max > S::zero()) || !max.is_finite() {
        return Err(Error::DegenerateInput(
            "all-zero channel impulse response".into(),
        ));
    }
    Ok(mags.into_iter().map(|m| m / max).collect())
}

/// One labeled feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: LinkCondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Random link geometry within the array field of view.
pub fn random_link<R: Rng + ?Sized>(rng: &mut R) -> LinkGeometry<f64> {
    let (azimuth, elevation) = random_angles(rng);
    LinkGeometry {
        distance_3d: rng.gen_range(5.0..120.0),
        azimuth,
        elevation,
    }
}

/// Balanced labeled corpus of CFR magnitude vectors with a per-class 80/20
/// train/test split.
pub fn build_corpus<R: Rng + ?Sized>(
    n_per_class: usize,
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<Corpus> {
    if n_per_class < 10 {
        return Err(Error::Config(format!(
            "corpus needs at least 10 samples per class, got {n_per_class}"
        )));
    }
    config.validate()?;
    let array = ArrayGeometry::<f64>::default();
    let n_train = n_per_class * 4 / 5;
    let mut corpus = Corpus {
        train: Vec::new(),
        test: Vec::new(),
    };
    for condition in [LinkCondition::LoS, LinkCondition::NLoS] {
        for i in 0..n_per_class {
            let link = random_link(rng);
            let cir = simulate_link(&link, condition, &array, config, rng)?;
            let sample = Sample {
                features: cfr_magnitude(&cir)?,
                label: condition,
            };
            if i < n_train {
                corpus.train.push(sample);
            } else {
                corpus.test.push(sample);
            }
        }
    }
    corpus.train.shuffle(rng);
    corpus.test.shuffle(rng);
    Ok(corpus)
}

/// Writes samples as CSV with header `m0,…,m{N-1},label` (label 0 = LoS, 1 = NLoS).
pub fn write_samples_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let width = samples.first().map_or(64, |s| s.features.len());
    let mut header: Vec<String> = (0..width).map(|i| format!("m{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.features.iter().map(|v| format!("{v:?}")).collect();
        row.push(s.label.index().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let n = rec.len();
        if n < 2 {
            return Err(Error::DegenerateInput("corpus row without features".into()));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::DegenerateInput(format!("bad value {s:?}: {e}")))
        };
        let features = rec
            .iter()
            .take(n - 1)
            .map(parse)
            .collect::<Result<Vec<_>>>()?;
        let label = rec[n - 1]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::DegenerateInput(e.to_string()))?;
        out.push(Sample {
            features,
            label: LinkCondition::from_index(label)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pure_los() -> ChannelConfig {
        ChannelConfig {
            k_factor_db: f64::INFINITY,
            n_mp: 0,
            ..Default::default()
        }
    }

    #[test]
    fn pure_los_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let link = LinkGeometry {
            distance_3d: 45.0,
            azimuth: 1.0,
            elevation: 0.4,
        };
        let paths = generate_paths(&link, LinkCondition::LoS, &pure_los(), &mut rng);
        assert_eq!(paths.len(), 1);
        assert!((paths[0].delay - 45.0 / SPEED_OF_LIGHT).abs() < 1e-18);
        assert_eq!((paths[0].azimuth, paths[0].elevation), (1.0, 0.4));
        assert!((paths[0].gain.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nlos_first_arrival_is_late_and_power_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ChannelConfig::default();
        for _ in 0..1000 {
            let link = random_link(&mut rng);
            let paths = generate_paths(&link, LinkCondition::NLoS, &cfg, &mut rng);
            let first = paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
            assert!(first > link.distance_3d / cfg.v_c);
            let power: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
            assert!((power - cfg.link_power).abs() < 1e-9);
        }
    }

    #[test]
    fn steering_vector_examples() {
        let arr = ArrayGeometry::<f64> {
            n_ant: 2,
            ..Default::default()
        };
        for az in [0.0, 0.7, 2.9] {
            assert!(arr
                .steering_vector(az, 0.0)
                .iter()
                .all(|c| (c - Complex::new(1.0, 0.0)).norm() < 1e-15));
        }
        let a = arr.steering_vector(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let expected = [1.0, 1.0, -1.0, -1.0];
        for (c, e) in a.iter().zip(expected) {
            assert!((c - Complex::new(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn array_angles_roundtrip() {
        let arr = ArrayGeometry::<f64> {
            position: [35.0, -5.0, 10.0],
            ..Default::default()
        };
        for x in [0.0, 20.0, 35.0, 50.0, 70.0] {
            let target = [x, 0.0, 1.5];
            let (az, el) = arr.angles_towards(target).unwrap();
            assert!((0.0..=std::f64::consts::PI).contains(&az));
            assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&el));
            let bearing = arr.global_bearing(az, el);
            assert!((bearing - (5.0f64).atan2(x - 35.0)).abs() < 1e-12);
        }
        assert!(arr.angles_towards([35.0, -20.0, 1.5]).is_none());
    }

    #[test]
    fn cfr_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truth = LinkGeometry {
            distance_3d: 0.0,
            azimuth: 0.0,
            elevation: 0.0,
        };
        let arr = ArrayGeometry::<f64>::default();
        let cfg = ChannelConfig::default();
        let delta = PathComponent {
            delay: 0.0,
            gain: Complex::new(1.0, 0.0),
            azimuth: 0.0,
            elevation: 0.0,
        };
        let cir = synthesize_cir(
            &[delta],
            &arr,
            LinkCondition::LoS,
            truth,
            f64::INFINITY,
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert!(cfr_magnitude(&cir)
            .unwrap()
            .iter()
            .all(|&m| (m - 1.0).abs() < 1e-12));

        let second = PathComponent {
            delay: 10e-9,
            ..delta
        };
        let cir = synthesize_cir(
            &[delta, second],
            &arr,
            LinkCondition::LoS,
            truth,
            f64::INFINITY,
            &cfg,
            &mut rng,
        )
        .unwrap();
        let mag = cfr_magnitude(&cir).unwrap();
        for (k, m) in mag.iter().enumerate() {
            let expected = (std::f64::consts::PI * k as f64 / 64.0).cos().abs();
            assert!((m - expected).abs() < 1e-12, "k={k}");
        }
        assert!(mag[32] < 1e-12);

        let zero = PathComponent {
            gain: Complex::new(0.0, 0.0),
            ..delta
        };
        let cir = synthesize_cir(
            &[zero],
            &arr,
            LinkCondition::LoS,
            truth,
            f64::INFINITY,
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert!(cfr_magnitude(&cir).is_err());
    }

    #[test]
    fn small_corpus_is_stratified() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = build_corpus(10, &ChannelConfig::default(), &mut rng).unwrap();
        assert_eq!((c.train.len(), c.test.len()), (16, 4));
        for split in [&c.train, &c.test] {
            for cls in [LinkCondition::LoS, LinkCondition::NLoS] {
                assert_eq!(
                    split.iter().filter(|s| s.label == cls).count(),
                    split.len() / 2
                );
            }
        }
        assert!(build_corpus(9, &ChannelConfig::default(), &mut rng).is_err());
    }
}
