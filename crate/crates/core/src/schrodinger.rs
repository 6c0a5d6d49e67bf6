//! Planewave discretization of `-d^2/dx^2 + V` on the periodic interval
//! `[-pi, pi)`.
//!
//! The basis is `e^{imx}` for `|m| <= floor(M/2)`, ordered by increasing `m`.
//! The kinetic part is `diag(m^2)`; a real potential becomes the Hermitian
//! Toeplitz matrix `V_mn = v_{m-n}` of its Fourier coefficients.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{CMat, HermitianOperator};

/// Oversampling factor of the grid used for Fourier coefficients.
pub const SAMPLING_FACTOR: usize = 4;

const BUILTIN_POTENTIALS: &str = include_str!("../config/potentials.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanewaveBasis {
    m: usize,
}

impl PlanewaveBasis {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "discretization parameter must be positive".into(),
            ));
        }
        Ok(Self { m })
    }

    /// The discretization parameter `M`.
    pub fn parameter(&self) -> usize {
        self.m
    }

    /// Largest frequency `floor(M/2)`.
    pub fn max_frequency(&self) -> i64 {
        (self.m / 2) as i64
    }

    pub fn dim(&self) -> usize {
        2 * (self.m / 2) + 1
    }

    /// `-floor(M/2), ..., floor(M/2)`.
    pub fn frequencies(&self) -> Vec<i64> {
        let l = self.max_frequency();
        (-l..=l).collect()
    }
}

/// `diag(m^2)`.
pub fn laplacian_matrix(basis: &PlanewaveBasis) -> HermitianOperator {
    let diag: Vec<f64> = basis.frequencies().iter().map(|&m| (m * m) as f64).collect();
    HermitianOperator::from_real_diagonal(&diag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `A sum_k exp(-(x - c - 2 pi k)^2 / (2 w^2))`.
    PeriodizedGaussian { center: f64, width: f64, amplitude: f64 },
    /// `cos[0] + sum_{m>=1} cos[m] cos(mx) + sin[m] sin(mx)`.
    TrigSeries { cos: Vec<f64>, sin: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub label: String,
    #[serde(flatten)]
    pub kind: PotentialKind,
}

impl PotentialSpec {
    pub fn gaussian(label: &str, center: f64, width: f64, amplitude: f64) -> Self {
        Self {
            label: label.to_string(),
            kind: PotentialKind::PeriodizedGaussian {
                center,
                width,
                amplitude,
            },
        }
    }

    pub fn trig(label: &str, cos: &[f64], sin: &[f64]) -> Self {
        Self {
            label: label.to_string(),
            kind: PotentialKind::TrigSeries {
                cos: cos.to_vec(),
                sin: sin.to_vec(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PotentialKind::PeriodizedGaussian {
                center,
                width,
                amplitude,
            } => {
                if !(*width > 0.0) || !width.is_finite() || !center.is_finite() || !amplitude.is_finite() {
                    return Err(Error::Config(format!(
                        "{}: Gaussian needs a finite positive width",
                        self.label
                    )));
                }
            }
            PotentialKind::TrigSeries { cos, sin } => {
                if sin.first().is_some_and(|&s| s != 0.0) {
                    return Err(Error::Config(format!("{}: sin[0] must be zero", self.label)));
                }
                if cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return Err(Error::Config(format!("{}: non-finite coefficient", self.label)));
                }
            }
        }
        Ok(())
    }

    /// Pointwise value.
    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::PeriodizedGaussian {
                center,
                width,
                amplitude,
            } => {
                // images beyond this range contribute below 1e-18
                let images = 2 + (width * 1.5).ceil() as i64;
                let mut acc = 0.0;
                for k in -images..=images {
                    let d = x - center - 2.0 * PI * k as f64;
                    acc += (-d * d / (2.0 * width * width)).exp();
                }
                amplitude * acc
            }
            PotentialKind::TrigSeries { cos, sin } => {
                let mut acc = cos.first().copied().unwrap_or(0.0);
                for (m, c) in cos.iter().enumerate().skip(1) {
                    acc += c * (m as f64 * x).cos();
                }
                for (m, s) in sin.iter().enumerate().skip(1) {
                    acc += s * (m as f64 * x).sin();
                }
                acc
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct PotentialFile {
    potential: Vec<PotentialSpec>,
}

/// Parses a potential list in the format of the built-in configuration.
pub fn parse_potentials(text: &str) -> Result<Vec<PotentialSpec>> {
    let file: PotentialFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for spec in &file.potential {
        spec.validate()?;
    }
    Ok(file.potential)
}

/// The four built-in potentials `V1..V4`.
pub fn builtin_potentials() -> Vec<PotentialSpec> {
    parse_potentials(BUILTIN_POTENTIALS).expect("built-in potential file is valid")
}

/// `v_m = (1/2pi) \int V(x) e^{-imx} dx` for `m = -max_freq..=max_freq`, from
/// `samples` uniform grid values by FFT. Index `m + max_freq`.
pub fn fourier_coefficients(spec: &PotentialSpec, max_freq: usize, samples: usize) -> Result<Vec<Complex64>> {
    spec.validate()?;
    if samples <= 2 * max_freq {
        return Err(Error::InvalidArgument(format!(
            "{samples} samples cannot resolve frequency {max_freq}"
        )));
    }
    let n = samples;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(spec.evaluate(-PI + 2.0 * PI * j as f64 / n as f64), 0.0))
        .collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    let inv_n = 1.0 / n as f64;
    let mf = max_freq as i64;
    Ok((-mf..=mf)
        .map(|m| {
            let idx = m.rem_euclid(n as i64) as usize;
            // grid starts at -pi: e^{-im x_j} = (-1)^m e^{-2 pi i m j / n}
            let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            buf[idx] * (sign * inv_n)
        })
        .collect())
}

/// Toeplitz matrix `V_mn = v_{m-n}` on `basis`, sampled on `4 dim` points.
pub fn potential_matrix(spec: &PotentialSpec, basis: &PlanewaveBasis) -> Result<HermitianOperator> {
    let dim = basis.dim();
    let span = dim - 1;
    let coeffs = fourier_coefficients(spec, span, SAMPLING_FACTOR * dim)?;
    let m = CMat::from_fn(dim, dim, |r, c| coeffs[span + r - c]);
    HermitianOperator::from_hermitian_part(&m)
}

/// Discretized `-Laplacian` and potentials at one `M`.
#[derive(Debug, Clone)]
pub struct SchrodingerModel {
    pub basis: PlanewaveBasis,
    pub h0: HermitianOperator,
    pub potentials: Vec<HermitianOperator>,
    pub specs: Vec<PotentialSpec>,
}

impl SchrodingerModel {
    pub fn new(m: usize, specs: Vec<PotentialSpec>) -> Result<Self> {
        let basis = PlanewaveBasis::new(m)?;
        let potentials = specs
            .iter()
            .map(|s| potential_matrix(s, &basis))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis,
            h0: laplacian_matrix(&basis),
            potentials,
            specs,
        })
    }

    /// The model with the built-in potentials.
    pub fn builtin(m: usize) -> Result<Self> {
        Self::new(m, builtin_potentials())
    }

    /// Potential `V_{j}` for a 1-based index.
    pub fn potential(&self, j: usize) -> Result<&HermitianOperator> {
        j.checked_sub(1)
            .and_then(|i| self.potentials.get(i))
            .ok_or(Error::IndexOutOfRange {
                index: j,
                len: self.potentials.len(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::decompose;

    #[test]
    fn laplacian_closed_forms() {
        let small = PlanewaveBasis::new(2).unwrap();
        assert_eq!(small.frequencies(), vec![-1, 0, 1]);
        assert_eq!(
            laplacian_matrix(&small),
            HermitianOperator::from_real_diagonal(&[1.0, 0.0, 1.0])
        );
        let b = PlanewaveBasis::new(30).unwrap();
        assert_eq!(b.dim(), 31);
        let lap = laplacian_matrix(&b);
        assert_eq!(lap.eigenvalues()[30], 225.0);
        assert_eq!(lap.matrix().trace().re, 2480.0);
        assert_eq!(PlanewaveBasis::new(31).unwrap().dim(), 31);
        assert!(PlanewaveBasis::new(0).is_err());
    }

    #[test]
    fn cosine_and_constant() {
        let b = PlanewaveBasis::new(8).unwrap();
        let v = potential_matrix(&PotentialSpec::trig("c", &[0.0, 2.0], &[]), &b).unwrap();
        for r in 0..b.dim() {
            for c in 0..b.dim() {
                let expected = if r.abs_diff(c) == 1 { 1.0 } else { 0.0 };
                assert!((v.matrix()[(r, c)] - Complex64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
        let k = potential_matrix(&PotentialSpec::trig("k", &[-0.7], &[]), &b).unwrap();
        assert!((k.matrix() - CMat::identity(9, 9) * Complex64::new(-0.7, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn sine_coefficients() {
        // sin x = (e^{ix} - e^{-ix}) / 2i, so v_1 = -i/2, v_{-1} = i/2
        let c = fourier_coefficients(&PotentialSpec::trig("s", &[], &[0.0, 1.0]), 2, 16).unwrap();
        assert!((c[3] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((c[1] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!(c[2].norm() < 1e-15);
    }

    #[test]
    fn gaussian_matches_direct_quadrature() {
        let specs = [
            PotentialSpec::gaussian("even", 0.0, 0.5, -3.0),
            PotentialSpec::gaussian("shifted", 1.5, 0.4, -2.0),
        ];
        for spec in &specs {
            let fft = fourier_coefficients(spec, 20, 4 * 41).unwrap();
            let n = 4000;
            for m in -20i64..=20 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    let x = -PI + 2.0 * PI * (j as f64 + 0.5) / n as f64;
                    acc += spec.evaluate(x) * Complex64::from_polar(1.0, -(m as f64) * x);
                }
                acc /= n as f64;
                assert!((acc - fft[(m + 20) as usize]).norm() < 1e-10, "{} m={m}", spec.label);
            }
        }
        let even = fourier_coefficients(&specs[0], 10, 84).unwrap();
        for m in 0..=10 {
            assert!(even[10 + m].im.abs() < 1e-14);
            assert!((even[10 + m] - even[10 - m]).norm() < 1e-14);
        }
    }

    #[test]
    fn oversampling_is_converged() {
        for spec in builtin_potentials() {
            let a = fourier_coefficients(&spec, 30, 4 * 31).unwrap();
            let b = fourier_coefficients(&spec, 30, 8 * 31).unwrap();
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "{}: {diff}", spec.label);
        }
    }

    #[test]
    fn builtin_potential_set() {
        let specs = builtin_potentials();
        assert_eq!(specs.len(), 4);
        assert_eq!(
            specs.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(),
            ["V1", "V2", "V3", "V4"]
        );
        let model = SchrodingerModel::builtin(30).unwrap();
        for (j, v) in model.potentials.iter().enumerate() {
            let m = v.matrix();
            // Toeplitz
            for r in 1..31 {
                for c in 1..31 {
                    assert!((m[(r, c)] - m[(r - 1, c - 1)]).norm() < 1e-12);
                }
            }
            let h = model.h0.add(v).unwrap();
            let ev = h.eigenvalues();
            assert!(ev[1] - ev[0] > 1e-6, "V{} ground state gap", j + 1);
            assert!(decompose(&h, 1).is_ok());
        }
        assert!(model.potential(0).is_err() && model.potential(5).is_err());
        assert_eq!(model.potential(2).unwrap(), &model.potentials[1]);
    }

    #[test]
    fn config_errors() {
        assert!(parse_potentials("[[potential]]\nlabel = \"x\"\nkind = \"periodized_gaussian\"\ncenter = 0.0\nwidth = -1.0\namplitude = 1.0\n").is_err());
        assert!(
            parse_potentials("[[potential]]\nlabel = \"x\"\nkind = \"trig_series\"\ncos = []\nsin = [1.0]\n").is_err()
        );
        assert!(parse_potentials("[[potential]]\nlabel = \"x\"\nkind = \"square\"\n").is_err());
        let ok =
            parse_potentials("[[potential]]\nlabel = \"x\"\nkind = \"trig_series\"\ncos = [1.0]\nsin = []\n").unwrap();
        assert_eq!(ok[0], PotentialSpec::trig("x", &[1.0], &[]));
    }

    #[test]
    fn ground_state_converges_in_m() {
        let specs = builtin_potentials();
        let energy = |m: usize| {
            let model = SchrodingerModel::new(m, specs.clone()).unwrap();
            let v1 = &model.potentials[0];
            let g2 = v1.add(&model.potentials[1].scale(0.2)).unwrap();
            let g = v1.add(&g2).unwrap().scale(0.5);
            model.h0.add(&g).unwrap().eigenvalues()[0]
        };
        let reference = energy(100);
        let e30 = ((energy(30) - reference) / reference).abs();
        assert!(e30 <= 1e-5, "{e30}");
    }
}
