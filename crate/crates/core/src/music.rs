//! MUSIC angle-of-arrival estimation for a uniform planar array.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{frequency_response, ArrayGeometry, CirSnapshot};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AoaEstimate<S> {
    /// Array-frame azimuth in `[0, π]`.
    pub azimuth: S,
    /// Array-frame elevation in `[0, π/2]`.
    pub elevation: S,
    pub peak_value: S,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSubspace<S> {
    /// `n × (n − 1)`, orthonormal columns.
    pub basis: CMatrix<S>,
    /// All eigenvalues, decreasing.
    pub eigenvalues: Vec<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MusicConfig {
    pub azimuth_bins: usize,
    pub elevation_bins: usize,
    /// Refinement stops once the step has dropped below this many degrees.
    pub resolution_deg: f64,
    /// Peaks below this value are flagged as low confidence.
    pub min_peak_value: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            azimuth_bins: 40,
            elevation_bins: 20,
            resolution_deg: 0.5,
            min_peak_value: 1.0,
        }
    }
}

/// `R = (1/N_s) Σ x_n x_nᴴ` over the columns `x_n` of `snapshots`.
pub fn covariance_from_snapshots<S: Scalar>(snapshots: &CMatrix<S>) -> CMatrix<S> {
    let n_s = snapshots.cols().max(1);
    let r = snapshots.matmul(&snapshots.adjoint());
    r.scale(Complex::new(S::of_usize(n_s).recip(), S::zero()))
}

/// Sample covariance of the per-subcarrier array snapshots of `cir`.
pub fn snapshot_covariance<S: Scalar>(cir: &CirSnapshot<S>) -> CMatrix<S> {
    covariance_from_snapshots(&frequency_response(cir))
}

/// Eigenvectors of all but the largest eigenvalue of `r`.
pub fn noise_subspace<S: Scalar>(r: &CMatrix<S>) -> Result<NoiseSubspace<S>> {
    let n = r.rows();
    if n < 2 {
        return Err(Error::DegenerateInput(
            "covariance must be at least 2×2".into(),
        ));
    }
    let (eigenvalues, vectors) = hermitian_eigen(r)?;
    let basis = CMatrix::from_fn(n, n - 1, |row, col| vectors[(row, col + 1)]);
    Ok(NoiseSubspace { basis, eigenvalues })
}

/// Array response for `(azimuth, elevation)`. The model is narrowband, so
/// every subcarrier shares the same vector.
pub fn steering_vector<S: Scalar>(
    array: &ArrayGeometry<S>,
    azimuth: S,
    elevation: S,
    _subcarrier: usize,
) -> Vec<Complex<S>> {
    array.steering_vector(azimuth, elevation)
}

/// `‖Nᴴ a‖²`.
pub fn noise_projection<S: Scalar>(subspace: &NoiseSubspace<S>, a: &[Complex<S>]) -> S {
    let b = &subspace.basis;
    let mut total = S::zero();
    for c in 0..b.cols() {
        let mut acc = Complex::new(S::zero(), S::zero());
        for (r, ar) in a.iter().enumerate() {
            acc = acc + b[(r, c)].conj() * ar;
        }
        total += acc.norm_sqr();
    }
    total
}

pub fn pseudo_spectrum<S: Scalar>(
    subspace: &NoiseSubspace<S>,
    array: &ArrayGeometry<S>,
    azimuth: S,
    elevation: S,
) -> S {
    let denom = noise_projection(subspace, &array.steering_vector(azimuth, elevation));
    denom.max(S::min_positive_value()).recip()
}

/// Coarse grid search over bin centres followed by a shrinking 3×3 pattern
/// search around the best bin.
pub fn search_spectrum<S: Scalar>(
    subspace: &NoiseSubspace<S>,
    array: &ArrayGeometry<S>,
    config: &MusicConfig,
) -> AoaEstimate<S> {
    let az_max = S::PI();
    let el_max = S::FRAC_PI_2();
    let az_bin = az_max / S::of_usize(config.azimuth_bins.max(1));
    let el_bin = el_max / S::of_usize(config.elevation_bins.max(1));
    let spectrum = |az: S, el: S| pseudo_spectrum(subspace, array, az, el);

    let mut best = (
        az_bin * S::half(),
        el_bin * S::half(),
        spectrum(az_bin * S::half(), el_bin * S::half()),
    );
    for i in 0..config.azimuth_bins.max(1) {
        let az = (S::of_usize(i) + S::half()) * az_bin;
        for j in 0..config.elevation_bins.max(1) {
            let el = (S::of_usize(j) + S::half()) * el_bin;
            let v = spectrum(az, el);
            if v > best.2 {
                best = (az, el, v);
            }
        }
    }

    let resolution = S::of(config.resolution_deg).to_radians();
    let mut step = az_bin.max(el_bin) * S::half();
    loop {
        for _ in 0..64 {
            let mut moved = false;
            let (az0, el0) = (best.0, best.1);
            for da in [-S::one(), S::zero(), S::one()] {
                for de in [-S::one(), S::zero(), S::one()] {
                    let az = (az0 + da * step).max(S::zero()).min(az_max);
                    let el = (el0 + de * step).max(S::zero()).min(el_max);
                    let v = spectrum(az, el);
                    if v > best.2 {
                        best = (az, el, v);
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        if step < resolution {
            break;
        }
        step *= S::half();
    }
    AoaEstimate {
        azimuth: best.0,
        elevation: best.1,
        peak_value: best.2,
        low_confidence: best.2 < S::of(config.min_peak_value),
    }
}

/// MUSIC estimate of the dominant arrival direction in `cir`.
pub fn estimate_aoa<S: Scalar>(
    cir: &CirSnapshot<S>,
    array: &ArrayGeometry<S>,
    config: &MusicConfig,
) -> Result<AoaEstimate<S>> {
    if cir.taps.rows() != array.n_elements() {
        return Err(Error::DegenerateInput(format!(
            "snapshot has {} antennas, array has {}",
            cir.taps.rows(),
            array.n_elements()
        )));
    }
    let subspace = noise_subspace(&snapshot_covariance(cir))?;
    Ok(search_spectrum(&subspace, array, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn single_snapshot_covariance_is_outer_product() {
        let x = CMatrix::from_fn(3, 1, |r, _| c(r as f64, 1.0 - r as f64));
        let r = covariance_from_snapshots(&x);
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[(i, j)] - x[(i, 0)] * x[(j, 0)].conj()).norm() < 1e-15);
            }
        }
        let ones = CMatrix::from_fn(4, 5, |_, _| c(1.0, 0.0));
        let r = covariance_from_snapshots(&ones);
        assert!(r.max_abs_diff(&CMatrix::from_fn(4, 4, |_, _| c(1.0, 0.0))) < 1e-15);
    }

    #[test]
    fn diagonal_fixture_subspace() {
        let r = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c([2.0, 3.0, 1.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let s = noise_subspace(&r).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 2.0, 1.0]);
        assert!((s.basis[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((s.basis[(2, 1)].norm() - 1.0).abs() < 1e-12);
        assert!(s.basis[(1, 0)].norm() < 1e-12 && s.basis[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn identity_covariance_gives_orthonormal_basis() {
        let s = noise_subspace(&CMatrix::<f64>::identity(9)).unwrap();
        let g = s.basis.adjoint().matmul(&s.basis);
        assert!(g.max_abs_diff(&CMatrix::identity(8)) < 1e-12);
    }

    #[test]
    fn noiseless_source_found() {
        let array = ArrayGeometry::<f64>::default();
        let a = array.steering_vector(90f64.to_radians(), 45f64.to_radians());
        let x = CMatrix::from_fn(9, 1, |r, _| a[r]);
        let s = noise_subspace(&covariance_from_snapshots(&x)).unwrap();
        let est = search_spectrum(&s, &array, &MusicConfig::default());
        assert!((est.azimuth.to_degrees() - 90.0).abs() <= 0.5);
        assert!((est.elevation.to_degrees() - 45.0).abs() <= 0.5);
        assert!(!est.low_confidence);
    }
}
