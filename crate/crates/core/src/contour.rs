//! Rectangle contour quadrature of matrix-valued functions.
//!
//! Serves as a brute-force oracle for the closed-form projectors and
//! contour integrals: `(1 / 2 pi i) \oint f(z) dz` is evaluated with the
//! composite trapezoid rule on each edge of a rectangle, refined by halving
//! the step and accelerated with Richardson extrapolation (Romberg table).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{max_abs, CMat, GapWindow, SpectralData};

/// Upper bound on quadrature points per edge.
pub const MAX_POINTS_PER_EDGE: usize = 1 << 14;

/// Rectangle symmetric about the real axis, crossing it at
/// `lambda_min` and `lambda_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub imag_half_height: f64,
    pub points_per_edge: usize,
}

impl Contour {
    pub fn new(lambda_min: f64, lambda_max: f64, imag_half_height: f64, points_per_edge: usize) -> Result<Self> {
        if !(lambda_min < lambda_max) || !(imag_half_height > 0.0) || points_per_edge < 8 {
            return Err(Error::InvalidArgument(format!(
                "invalid contour [{lambda_min}, {lambda_max}] x {imag_half_height}i with {points_per_edge} points"
            )));
        }
        Ok(Self {
            lambda_min,
            lambda_max,
            imag_half_height,
            points_per_edge,
        })
    }

    /// Rectangle through the window crossings, half-height
    /// `max(1, lambda_max - lambda_min)`.
    pub fn from_window(window: &GapWindow) -> Self {
        let width = window.lambda_max - window.lambda_min;
        Self {
            lambda_min: window.lambda_min,
            lambda_max: window.lambda_max,
            imag_half_height: width.max(1.0),
            points_per_edge: 8,
        }
    }

    /// Corners in counterclockwise order starting bottom-left.
    pub fn corners(&self) -> [Complex64; 4] {
        let h = self.imag_half_height;
        [
            Complex64::new(self.lambda_min, -h),
            Complex64::new(self.lambda_max, -h),
            Complex64::new(self.lambda_max, h),
            Complex64::new(self.lambda_min, h),
        ]
    }

    /// `max |z|` over the contour (attained at a corner).
    pub fn max_abs(&self) -> f64 {
        self.corners().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Distance from the contour to a real point.
    pub fn distance_to_real(&self, x: f64) -> f64 {
        if x < self.lambda_min {
            self.lambda_min - x
        } else if x > self.lambda_max {
            x - self.lambda_max
        } else {
            (x - self.lambda_min)
                .min(self.lambda_max - x)
                .min(self.imag_half_height)
        }
    }

    /// Distance from the contour to a real spectrum.
    pub fn distance_to_spectrum(&self, eigenvalues: &[f64]) -> f64 {
        eigenvalues
            .iter()
            .map(|&l| self.distance_to_real(l))
            .fold(f64::INFINITY, f64::min)
    }

    /// Points on the contour at the coarsest refinement level, useful for
    /// sampling norms along it.
    pub fn sample_points(&self, per_edge: usize) -> Vec<Complex64> {
        let c = self.corners();
        let mut out = Vec::with_capacity(4 * per_edge);
        for e in 0..4 {
            let (a, b) = (c[e], c[(e + 1) % 4]);
            for i in 0..per_edge {
                out.push(a + (b - a) * (i as f64 / per_edge as f64));
            }
        }
        out
    }
}

/// Contour around the selected eigenvalue of `spec`, crossing the real axis
/// at the midpoints to its neighbors. At the bottom (top) of the spectrum
/// the upper (lower) half-gap is mirrored.
pub fn default_contour(spec: &SpectralData) -> Result<Contour> {
    let lk = spec.eigenvalue();
    let (below, above) = spec.neighbors();
    let tol = spec.degeneracy_tol;
    for n in [below, above].into_iter().flatten() {
        if (n - lk).abs() <= tol {
            return Err(Error::DegenerateLevel {
                level: spec.level,
                gap: (n - lk).abs(),
                tol,
            });
        }
    }
    let (lo, hi) = match (below, above) {
        (Some(b), Some(a)) => ((b + lk) / 2.0, (lk + a) / 2.0),
        (None, Some(a)) => (lk - (a - lk) / 2.0, (lk + a) / 2.0),
        (Some(b), None) => ((b + lk) / 2.0, lk + (lk - b) / 2.0),
        (None, None) => (lk - 1.0, lk + 1.0),
    };
    Ok(Contour {
        lambda_min: lo,
        lambda_max: hi,
        imag_half_height: (hi - lo).max(1.0),
        points_per_edge: 8,
    })
}

/// `(1 / 2 pi i) \oint_contour f(z) dz`, counterclockwise.
///
/// Starts with `contour.points_per_edge` intervals per edge and halves the
/// step until two successive Romberg diagonal entries differ by less than
/// `tol_goal` (max-abs entry), or the per-edge cap is reached.
pub fn contour_integrate<F>(f: F, contour: &Contour, tol_goal: f64) -> Result<CMat>
where
    F: Fn(Complex64) -> CMat,
{
    if contour.points_per_edge < 8 {
        return Err(Error::InvalidArgument("at least 8 points per edge required".into()));
    }
    let corners = contour.corners();
    let edges: Vec<(Complex64, Complex64)> = (0..4).map(|e| (corners[e], corners[(e + 1) % 4])).collect();

    // Plain trapezoid with n intervals per edge. All edges use the same
    // parameter step, so corner weights combine edge by edge.
    let mut n = contour.points_per_edge;
    let mut trap = {
        let mut acc: Option<CMat> = None;
        for &(a, b) in &edges {
            let d = b - a;
            for i in 0..=n {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let z = a + d * (i as f64 / n as f64);
                let term = f(z) * (d * (w / n as f64));
                acc = Some(match acc {
                    Some(s) => s + term,
                    None => term,
                });
            }
        }
        acc.expect("four edges")
    };

    let mut table: Vec<CMat> = vec![trap.clone()];
    let mut last_diff = f64::INFINITY;
    while 2 * n <= MAX_POINTS_PER_EDGE {
        // refine: T(h/2) = T(h)/2 + (h/2) * sum over new midpoints
        let mut mid = CMat::zeros(trap.nrows(), trap.ncols());
        for &(a, b) in &edges {
            let d = b - a;
            for i in 0..n {
                let t = (2 * i + 1) as f64 / (2 * n) as f64;
                mid += f(a + d * t) * d;
            }
        }
        n *= 2;
        trap = trap * Complex64::new(0.5, 0.0) + mid * Complex64::new(1.0 / n as f64, 0.0);

        let mut row = vec![trap.clone()];
        let mut factor = 1.0;
        for j in 1..=table.len() {
            factor *= 4.0;
            let prev = &table[j - 1];
            let cur = &row[j - 1];
            let next = cur + (cur - prev) * Complex64::new(1.0 / (factor - 1.0), 0.0);
            row.push(next);
        }
        let best_new = row.last().expect("non-empty row");
        let best_old = table.last().expect("non-empty table");
        last_diff = max_abs(&(best_new - best_old));
        let converged = last_diff < tol_goal;
        table = row;
        if converged {
            let scale = Complex64::new(0.0, -1.0 / (2.0 * PI)); // 1 / (2 pi i)
            return Ok(table.last().expect("non-empty") * scale);
        }
    }
    Err(Error::NoConvergence(last_diff))
}
