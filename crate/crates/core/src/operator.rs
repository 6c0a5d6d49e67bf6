//! Dense Hermitian operator algebra.
//!
//! Everything here works on small dense complex matrices: eigendecomposition
//! of `H = H0 + G`, the rank-one spectral projector onto the k-th eigenvector,
//! the reduced pseudo-inverse `K`, the weighted norm pair used to measure
//! density matrices and parameters, resolvents, and the gap window check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// Relative tolerance of the Hermiticity check done at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative factor defining the degeneracy threshold (times the spectral
/// diameter).
pub const DEGENERACY_FACTOR: f64 = 1e-8;

/// Minimal distance between a resolvent argument and the spectrum.
pub const SPECTRUM_TOL: f64 = 1e-12;

/// A dense complex matrix known to be Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMat,
}

impl HermitianOperator {
    /// Wraps `entries`, checking squareness and Hermiticity up to
    /// `1e-12 * max|entry|`.
    pub fn new(entries: CMat) -> Result<Self> {
        check_square(&entries)?;
        let scale = max_abs(&entries);
        let asymmetry = hermitian_defect(&entries);
        if asymmetry > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self { entries })
    }

    /// Replaces `m` by its Hermitian part `(m + m*) / 2`.
    ///
    /// Used for quantities that are Hermitian by construction but pick up
    /// rounding asymmetry from matrix products.
    pub fn from_hermitian_part(m: &CMat) -> Result<Self> {
        check_square(m)?;
        Ok(Self {
            entries: hermitian_part(m),
        })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self {
            entries: CMat::from_diagonal(&d),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMat::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self {
            entries: &self.entries + &other.entries,
        })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self {
            entries: &self.entries - &other.entries,
        })
    }

    /// `factor * self` for a real factor.
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * Complex64::new(factor, 0.0),
        }
    }

    /// Real linear combination `sum_j coef_j * ops_j`.
    pub fn linear_combination(coefs: &[f64], ops: &[&HermitianOperator]) -> Result<Self> {
        if coefs.len() != ops.len() {
            return Err(Error::DimensionMismatch {
                expected: ops.len(),
                found: coefs.len(),
            });
        }
        let dim = ops
            .first()
            .map(|o| o.dim())
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut acc = CMat::zeros(dim, dim);
        for (&c, op) in coefs.iter().zip(ops) {
            check_same_dim(dim, op.dim())?;
            acc += &op.entries * Complex64::new(c, 0.0);
        }
        Ok(Self { entries: acc })
    }

    /// Conjugation `U self U*`.
    pub fn conjugate_by(&self, u: &CMat) -> Result<Self> {
        check_same_dim(self.dim(), u.nrows())?;
        Self::from_hermitian_part(&(u * &self.entries * u.adjoint()))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Eigen-data of `H(G)` at a fixed level `k`, with the derived projector
/// `F = u_k u_k*` and pseudo-inverse `K = sum_{a != k} (l_k - l_a)^{-1} u_a u_a*`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: CMat,
    /// 1-based level.
    pub level: usize,
    pub projector: HermitianOperator,
    pub pseudo_inverse: HermitianOperator,
    /// Index of the point this data was computed for, when part of a family.
    pub source_index: Option<usize>,
    /// Threshold below which two eigenvalues are considered equal.
    pub degeneracy_tol: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The selected eigenvalue `lambda^k`.
    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalues[self.level - 1]
    }

    /// Eigenvector of the selected level.
    pub fn eigenvector(&self) -> DVector<Complex64> {
        self.eigenvectors.column(self.level - 1).into_owned()
    }

    /// Eigenvalues directly below and above the selected level.
    pub fn neighbors(&self) -> (Option<f64>, Option<f64>) {
        let i = self.level - 1;
        let below = if i > 0 { Some(self.eigenvalues[i - 1]) } else { None };
        let above = self.eigenvalues.get(i + 1).copied();
        (below, above)
    }

    /// Conjugated copy for a unitary `u` commuting with `H0`: eigenvectors
    /// become `u v`, and `F`, `K` become `u F u*`, `u K u*`.
    pub fn conjugate_by(&self, u: &CMat) -> Result<Self> {
        Ok(Self {
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors: u * &self.eigenvectors,
            level: self.level,
            projector: self.projector.conjugate_by(u)?,
            pseudo_inverse: self.pseudo_inverse.conjugate_by(u)?,
            source_index: self.source_index,
            degeneracy_tol: self.degeneracy_tol,
        })
    }
}

/// Eigendecomposition of `h` with projector and pseudo-inverse at level `k`
/// (1-based).
pub fn decompose(h: &HermitianOperator, k: usize) -> Result<SpectralData> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidLevel { level: k, dim });
    }
    let eig = h.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    // stable sort: ties keep the solver's output order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMat::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);

    let diameter = eigenvalues[dim - 1] - eigenvalues[0];
    let tol = DEGENERACY_FACTOR * diameter;
    let lk = eigenvalues[k - 1];
    if k > 1 && lk - eigenvalues[k - 2] <= tol {
        return Err(Error::DegenerateLevel {
            level: k,
            gap: lk - eigenvalues[k - 2],
            tol,
        });
    }
    if k < dim && eigenvalues[k] - lk <= tol {
        return Err(Error::DegenerateLevel {
            level: k,
            gap: eigenvalues[k] - lk,
            tol,
        });
    }

    let projector = spectral_sum(&eigenvectors, |a| if a == k - 1 { 1.0 } else { 0.0 });
    let pseudo_inverse = spectral_sum(&eigenvectors, |a| {
        if a == k - 1 {
            0.0
        } else {
            1.0 / (lk - eigenvalues[a])
        }
    });
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        level: k,
        projector: HermitianOperator::from_hermitian_part(&projector)?,
        pseudo_inverse: HermitianOperator::from_hermitian_part(&pseudo_inverse)?,
        source_index: None,
        degeneracy_tol: tol,
    })
}

/// Cross pseudo-inverse `K_ij = sum_{a != k} (lambda_i - l_a(G_j))^{-1} u_a u_a*`,
/// built from the eigen-data of `H(G_j)` and the shift `lambda_i`.
pub fn cross_pseudo_inverse(spec_j: &SpectralData, lambda_i: f64) -> Result<HermitianOperator> {
    let k = spec_j.level - 1;
    for (a, &la) in spec_j.eigenvalues.iter().enumerate() {
        if a != k && (lambda_i - la).abs() <= spec_j.degeneracy_tol {
            return Err(Error::SingularShift {
                shift: lambda_i,
                eigenvalue: la,
                index: a + 1,
            });
        }
    }
    let m = spectral_sum(&spec_j.eigenvectors, |a| {
        if a == k {
            0.0
        } else {
            1.0 / (lambda_i - spec_j.eigenvalues[a])
        }
    });
    HermitianOperator::from_hermitian_part(&m)
}

/// `K_ij = K_j (1 + (lambda_i - lambda_j) K_j)^{-1}`, valid when
/// `|lambda_i - lambda_j| * ||W^{-1} K_j W|| < 1` with `W = (H0 + mu)^{kappa/2}`.
pub fn kij_from_kj(
    k_j: &HermitianOperator,
    f_j: &HermitianOperator,
    lambda_i: f64,
    lambda_j: f64,
    ctx: &NormContext,
) -> Result<HermitianOperator> {
    check_same_dim(k_j.dim(), f_j.dim())?;
    check_same_dim(k_j.dim(), ctx.dim())?;
    let shift = lambda_i - lambda_j;
    let weighted = &ctx.weight_minus * k_j.matrix() * &ctx.weight_plus;
    let value = shift.abs() * spectral_norm(&weighted);
    if value >= 1.0 {
        return Err(Error::SeriesDiverges { value });
    }
    if shift == 0.0 {
        return Ok(k_j.clone());
    }
    let dim = k_j.dim();
    let factor = CMat::identity(dim, dim) + k_j.matrix() * Complex64::new(shift, 0.0);
    let inv = factor.try_inverse().ok_or(Error::SeriesDiverges { value })?;
    HermitianOperator::from_hermitian_part(&(k_j.matrix() * inv))
}

/// `(mu, kappa)` and the cached weights `(H0 + mu)^{+-kappa/2}` that define
/// the energy norm on density matrices and its dual on parameters.
#[derive(Debug, Clone)]
pub struct NormContext {
    pub mu: f64,
    pub kappa: f64,
    pub weight_plus: CMat,
    pub weight_minus: CMat,
}

impl NormContext {
    pub fn new(h0: &HermitianOperator, mu: f64, kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidArgument(format!("kappa = {kappa} outside [0, 1]")));
        }
        Ok(Self {
            mu,
            kappa,
            weight_plus: operator_power(h0, mu, kappa / 2.0)?,
            weight_minus: operator_power(h0, mu, -kappa / 2.0)?,
        })
    }

    /// `mu = 1`, `kappa = 1`.
    pub fn energy(h0: &HermitianOperator) -> Result<Self> {
        Self::new(h0, 1.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.weight_plus.nrows()
    }
}

/// `||(H0+mu)^{kappa/2} A (H0+mu)^{kappa/2}||` in spectral norm.
pub fn norm_e(a: &CMat, ctx: &NormContext) -> Result<f64> {
    check_square(a)?;
    check_same_dim(ctx.dim(), a.nrows())?;
    Ok(spectral_norm(&(&ctx.weight_plus * a * &ctx.weight_plus)))
}

/// `||(H0+mu)^{-kappa/2} G (H0+mu)^{-kappa/2}||` in spectral norm.
pub fn norm_a(g: &CMat, ctx: &NormContext) -> Result<f64> {
    check_square(g)?;
    check_same_dim(ctx.dim(), g.nrows())?;
    Ok(spectral_norm(&(&ctx.weight_minus * g * &ctx.weight_minus)))
}

/// Cached weight `W = (H0 + 1)^{kappa/2}` for repeated relative distances.
#[derive(Debug, Clone)]
pub struct DistanceWeight {
    weight: CMat,
}

impl DistanceWeight {
    pub fn new(h0: &HermitianOperator, kappa: f64) -> Result<Self> {
        Ok(Self {
            weight: operator_power(h0, 1.0, kappa / 2.0)?,
        })
    }

    pub fn weight(&self) -> &CMat {
        &self.weight
    }

    /// `2 ||W(A-B)W||_2 / (||WAW||_2 + ||WBW||_2)` with the Frobenius norm.
    pub fn distance(&self, a: &CMat, b: &CMat) -> Result<f64> {
        check_square(a)?;
        check_same_dim(a.nrows(), b.nrows())?;
        check_same_dim(self.weight.nrows(), a.nrows())?;
        let w = &self.weight;
        let num = (w * (a - b) * w).norm();
        let den = (w * a * w).norm() + (w * b * w).norm();
        if den == 0.0 {
            return Err(Error::BothZero);
        }
        Ok(2.0 * num / den)
    }
}

/// Relative distance `d_kappa(A, B)` with weight `(H0 + 1)^{kappa/2}`.
/// `kappa = 1` gives the energy distance, `kappa = -1` the dual one.
pub fn relative_distance(a: &CMat, b: &CMat, kappa: f64, h0: &HermitianOperator) -> Result<f64> {
    DistanceWeight::new(h0, kappa)?.distance(a, b)
}

/// `(z - H)^{-1}` computed by LU, after checking `z` is off the spectrum.
pub fn resolvent(h: &HermitianOperator, z: Complex64) -> Result<CMat> {
    let distance = h
        .eigenvalues()
        .iter()
        .map(|&l| (z - l).norm())
        .fold(f64::INFINITY, f64::min);
    if distance <= SPECTRUM_TOL {
        return Err(Error::SpectrumHit {
            re: z.re,
            im: z.im,
            distance,
        });
    }
    resolvent_unchecked(h.matrix(), z).ok_or(Error::SpectrumHit {
        re: z.re,
        im: z.im,
        distance,
    })
}

/// `(z - H)^{-1}` without the spectrum check; `None` if LU fails.
pub(crate) fn resolvent_unchecked(h: &CMat, z: Complex64) -> Option<CMat> {
    let n = h.nrows();
    let shifted = CMat::from_diagonal_element(n, n, z) - h;
    shifted.lu().try_inverse()
}

/// Right-hand side of the explicit resolvent bound:
/// `2 (1 + |mu - eta| / (eta + minSpec)) (1 + 2|eta + maxAbsZ| (1 + |eta + maxAbsZ| / xi))`.
pub fn resolvent_bound_rhs(mu: f64, eta: f64, min_spec: f64, max_abs_z: f64, xi: f64) -> Result<f64> {
    if mu < 1.0 || eta < 1.0 || xi <= 0.0 || eta + min_spec <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "resolvent bound needs mu, eta >= 1, xi > 0, eta + minSpec > 0 \
             (mu = {mu}, eta = {eta}, xi = {xi}, minSpec = {min_spec})"
        )));
    }
    let shift = (eta + max_abs_z).abs();
    Ok(2.0 * (1.0 + (mu - eta).abs() / (eta + min_spec)) * (1.0 + 2.0 * shift * (1.0 + shift / xi)))
}

/// Smallest `c >= 0` with `|G| <= eps H0 + c`, i.e. the top of the spectrum
/// of `|G| - eps H0`.
pub fn relative_bound_constant(h0: &HermitianOperator, g: &HermitianOperator, eps: f64) -> Result<f64> {
    check_same_dim(h0.dim(), g.dim())?;
    let eig = g.matrix().clone().symmetric_eigen();
    let abs_g = spectral_sum(&eig.eigenvectors, |a| eig.eigenvalues[a].abs());
    let diff = HermitianOperator::from_hermitian_part(&(abs_g - h0.matrix() * Complex64::new(eps, 0.0)))?;
    Ok(diff.eigenvalues().last().copied().unwrap_or(0.0).max(0.0))
}

/// `eta = max(4 c_{1/8}, 1)`, a shift for which
/// `||(H0 + eta)^{-1/2} G (H0 + eta)^{-1/2}|| <= 1/2`.
pub fn resolvent_bound_shift(h0: &HermitianOperator, g: &HermitianOperator) -> Result<f64> {
    Ok((4.0 * relative_bound_constant(h0, g, 0.125)?).max(1.0))
}

/// Real interval `[lambda_min, lambda_max]` meant to contain exactly the
/// k-th eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapWindow {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub level: usize,
}

impl GapWindow {
    pub fn new(lambda_min: f64, lambda_max: f64, level: usize) -> Result<Self> {
        if !(lambda_min < lambda_max) || level == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid gap window [{lambda_min}, {lambda_max}] at level {level}"
            )));
        }
        Ok(Self {
            lambda_min,
            lambda_max,
            level,
        })
    }

    /// Window shared by several spectra: midpoints between the extreme k-th
    /// eigenvalues and the closest neighbors over the family. Without a lower
    /// (upper) neighbor the upper (lower) half-gap is mirrored.
    pub fn from_spectra(spectra: &[SpectralData]) -> Result<Self> {
        let first = spectra
            .first()
            .ok_or_else(|| Error::InvalidArgument("no spectra for gap window".into()))?;
        let level = first.level;
        let lo_k = spectra.iter().map(|s| s.eigenvalue()).fold(f64::INFINITY, f64::min);
        let hi_k = spectra.iter().map(|s| s.eigenvalue()).fold(f64::NEG_INFINITY, f64::max);
        let below = spectra
            .iter()
            .filter_map(|s| s.neighbors().0)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
        let above = spectra
            .iter()
            .filter_map(|s| s.neighbors().1)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));
        if let Some(b) = below {
            if b >= lo_k {
                return Err(Error::GapViolation(format!(
                    "eigenvalue {} below level {level} reaches {b} >= {lo_k}",
                    level - 1
                )));
            }
        }
        if let Some(a) = above {
            if a <= hi_k {
                return Err(Error::GapViolation(format!(
                    "eigenvalue {} above level {level} reaches {a} <= {hi_k}",
                    level + 1
                )));
            }
        }
        let (lambda_min, lambda_max) = match (below, above) {
            (Some(b), Some(a)) => ((b + lo_k) / 2.0, (hi_k + a) / 2.0),
            (None, Some(a)) => (lo_k - (a - hi_k) / 2.0, (hi_k + a) / 2.0),
            (Some(b), None) => ((b + lo_k) / 2.0, hi_k + (lo_k - b) / 2.0),
            (None, None) => (lo_k - 1.0, hi_k + 1.0),
        };
        Self::new(lambda_min, lambda_max, level)
    }

    /// True iff the only eigenvalue of `spectrum` inside the window is the
    /// k-th one.
    pub fn admits(&self, eigenvalues: &[f64]) -> bool {
        let k = self.level - 1;
        if k >= eigenvalues.len() {
            return false;
        }
        eigenvalues.iter().enumerate().all(|(a, &l)| {
            let inside = l >= self.lambda_min && l <= self.lambda_max;
            inside == (a == k)
        })
    }
}

/// Samples the convex hull of `gs` on a simplex lattice with `samples` points
/// per edge (vertices always included) and checks that the window isolates
/// the k-th eigenvalue of `H0 + sum theta_j G_j` at every sample.
pub fn gap_check(
    h0: &HermitianOperator,
    gs: &[HermitianOperator],
    k: usize,
    window: &GapWindow,
    samples: usize,
) -> bool {
    first_gap_violation(h0, gs, k, window, samples).is_none()
}

/// Like [`gap_check`], returning the first offending convex weights.
pub fn first_gap_violation(
    h0: &HermitianOperator,
    gs: &[HermitianOperator],
    k: usize,
    window: &GapWindow,
    samples: usize,
) -> Option<Vec<f64>> {
    if gs.is_empty() || samples == 0 || window.level != k {
        return Some(Vec::new());
    }
    let divisions = samples.saturating_sub(1);
    for theta in simplex_lattice(gs.len(), divisions) {
        let refs: Vec<&HermitianOperator> = gs.iter().collect();
        let combo = match HermitianOperator::linear_combination(&theta, &refs).and_then(|g| h0.add(&g)) {
            Ok(h) => h,
            Err(_) => return Some(theta),
        };
        if !window.admits(&combo.eigenvalues()) {
            return Some(theta);
        }
    }
    None
}

/// Points of the (n-1)-simplex with coordinates in `{0, 1/d, ..., 1}`;
/// `d = 0` yields the vertices only.
fn simplex_lattice(n: usize, divisions: usize) -> Vec<Vec<f64>> {
    if divisions == 0 {
        return (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let mut out = Vec::new();
    let mut counts = vec![0usize; n];
    fn rec(pos: usize, left: usize, counts: &mut Vec<usize>, d: usize, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            out.push(counts.iter().map(|&c| c as f64 / d as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, d, out);
        }
    }
    rec(0, divisions, &mut counts, divisions, &mut out);
    out
}

/// `sum_a coef(a) v_a v_a*` over the columns of `vectors`.
pub(crate) fn spectral_sum(vectors: &CMat, coef: impl Fn(usize) -> f64) -> CMat {
    let mut scaled = vectors.clone();
    for (a, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(coef(a), 0.0);
    }
    scaled * vectors.adjoint()
}

/// `(H + shift)^exponent` through the eigendecomposition of `H`.
pub fn operator_power(h: &HermitianOperator, shift: f64, exponent: f64) -> Result<CMat> {
    let eig = h.matrix().clone().symmetric_eigen();
    if let Some(&lmin) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if lmin + shift <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "shift {shift} does not make the operator positive (min eigenvalue {lmin})"
            )));
        }
    }
    let m = spectral_sum(&eig.eigenvectors, |a| (eig.eigenvalues[a] + shift).powf(exponent));
    Ok(hermitian_part(&m))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Ratio of extreme singular values (infinite when singular).
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub(crate) fn check_square(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, seeded_rng};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag_entries(m: &CMat) -> Vec<f64> {
        (0..m.nrows()).map(|i| m[(i, i)].re).collect()
    }

    fn off_diagonal_norm(m: &CMat) -> f64 {
        let mut s = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
        let rect = CMat::zeros(2, 3);
        assert!(matches!(HermitianOperator::new(rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn decompose_diagonal() {
        let h = HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let s = decompose(&h, 1).unwrap();
        assert_abs_diff_eq!(s.eigenvalue(), 1.0, epsilon = 1e-14);
        let f = diag_entries(s.projector.matrix());
        let k = diag_entries(s.pseudo_inverse.matrix());
        for (a, b) in f.iter().zip([1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        for (a, b) in k.iter().zip([0.0, -1.0, -0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert!(off_diagonal_norm(s.pseudo_inverse.matrix()) < 1e-14);

        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 3.0]);
        let s = decompose(&h, 1).unwrap();
        for (a, b) in diag_entries(s.pseudo_inverse.matrix())
            .iter()
            .zip([0.0, -1.0, -1.0 / 3.0])
        {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn decompose_rejects_degenerate_level() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 1.0]);
        assert!(matches!(decompose(&h, 2), Err(Error::DegenerateLevel { .. })));
        assert!(matches!(decompose(&h, 3), Err(Error::DegenerateLevel { .. })));
        assert!(decompose(&h, 1).is_ok());
        assert!(matches!(decompose(&h, 4), Err(Error::InvalidLevel { .. })));
        assert!(matches!(decompose(&h, 0), Err(Error::InvalidLevel { .. })));
    }

    #[test]
    fn spectral_data_invariants_random() {
        let mut rng = seeded_rng(11);
        for dim in [3usize, 6, 11] {
            let h = random_hermitian(&mut rng, dim, 1.0);
            for k in 1..=dim {
                let s = decompose(&h, k).unwrap();
                let id = CMat::identity(dim, dim);
                let gram = s.eigenvectors.adjoint() * &s.eigenvectors;
                assert!((&gram - &id).norm() < 1e-10);
                let f = s.projector.matrix();
                let kk = s.pseudo_inverse.matrix();
                assert!((f * f - f).norm() < 1e-10);
                assert_abs_diff_eq!(f.trace().re, 1.0, epsilon = 1e-10);
                assert!((kk * f).norm() < 1e-10);
                assert!((f * kk).norm() < 1e-10);
                let shifted = CMat::from_diagonal_element(dim, dim, c(s.eigenvalue())) - h.matrix();
                assert!((kk * shifted - (&id - f)).norm() < 1e-10);
                for w in s.eigenvalues.windows(2) {
                    assert!(w[0] <= w[1]);
                }
            }
        }
    }

    #[test]
    fn cross_pseudo_inverse_diagonal() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 3.0]);
        let s = decompose(&h, 1).unwrap();
        let kij = cross_pseudo_inverse(&s, 0.5).unwrap();
        for (a, b) in diag_entries(kij.matrix()).iter().zip([0.0, -2.0, -0.4]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let same = cross_pseudo_inverse(&s, s.eigenvalue()).unwrap();
        assert!((same.matrix() - s.pseudo_inverse.matrix()).norm() < 1e-15);
        assert!(matches!(
            cross_pseudo_inverse(&s, 1.0),
            Err(Error::SingularShift { index: 2, .. })
        ));
    }

    #[test]
    fn cross_pseudo_inverse_defining_relations() {
        let mut rng = seeded_rng(5);
        let hi = random_hermitian(&mut rng, 5, 1.0);
        let hj = hi.add(&random_hermitian(&mut rng, 5, 0.1)).unwrap();
        let si = decompose(&hi, 2).unwrap();
        let sj = decompose(&hj, 2).unwrap();
        let kij = cross_pseudo_inverse(&sj, si.eigenvalue()).unwrap();
        let f = sj.projector.matrix();
        let id = CMat::identity(5, 5);
        assert!((kij.matrix() * f).norm() < 1e-10);
        let shifted = CMat::from_diagonal_element(5, 5, c(si.eigenvalue())) - hj.matrix();
        assert!((&shifted * kij.matrix() - (&id - f)).norm() < 1e-10);
    }

    #[test]
    fn kij_recurrence_diagonal() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 3.0]);
        let ctx = NormContext::new(&h0, 1.0, 0.0).unwrap();
        let kj = HermitianOperator::from_real_diagonal(&[0.0, -1.0, -1.0 / 3.0]);
        let fj = HermitianOperator::from_real_diagonal(&[1.0, 0.0, 0.0]);
        let kij = kij_from_kj(&kj, &fj, 0.5, 0.0, &ctx).unwrap();
        for (a, b) in diag_entries(kij.matrix()).iter().zip([0.0, -2.0, -0.4]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let same = kij_from_kj(&kj, &fj, 0.3, 0.3, &ctx).unwrap();
        assert_eq!(same, kj);
        assert!(matches!(
            kij_from_kj(&kj, &fj, 1.5, 0.0, &ctx),
            Err(Error::SeriesDiverges { .. })
        ));
    }

    #[test]
    fn kij_recurrence_matches_cross_pseudo_inverse() {
        let mut rng = seeded_rng(17);
        let h = random_hermitian(&mut rng, 6, 1.0);
        let s = decompose(&h, 3).unwrap();
        let ctx = NormContext::new(&HermitianOperator::zeros(6), 1.0, 1.0).unwrap();
        let li = s.eigenvalue() + 1e-3;
        let direct = cross_pseudo_inverse(&s, li).unwrap();
        let rec = kij_from_kj(&s.pseudo_inverse, &s.projector, li, s.eigenvalue(), &ctx).unwrap();
        let rel = (direct.matrix() - rec.matrix()).norm() / direct.matrix().norm();
        assert!(rel < 1e-12, "relative difference {rel}");
    }

    #[test]
    fn weighted_norms_closed_forms() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let plain = NormContext::new(&h0, 1.0, 0.0).unwrap();
        let a = HermitianOperator::from_real_diagonal(&[3.0, -1.0]);
        assert_abs_diff_eq!(norm_e(a.matrix(), &plain).unwrap(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(norm_a(a.matrix(), &plain).unwrap(), 3.0, epsilon = 1e-14);

        let energy = NormContext::new(&h0, 1.0, 1.0).unwrap();
        let id = HermitianOperator::identity(2);
        assert_abs_diff_eq!(norm_e(id.matrix(), &energy).unwrap(), 2.0, epsilon = 1e-14);
        let g = HermitianOperator::from_real_diagonal(&[2.0, 4.0]);
        assert_abs_diff_eq!(norm_a(g.matrix(), &energy).unwrap(), 2.0, epsilon = 1e-14);

        let prod = &energy.weight_plus * &energy.weight_minus;
        assert!((prod - CMat::identity(2, 2)).norm() < 1e-10);
        assert!(matches!(
            norm_e(&CMat::zeros(3, 3), &energy),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(NormContext::new(&h0, 1.0, 1.5).is_err());
        assert!(NormContext::new(&h0, -0.5, 1.0).is_err());
    }

    #[test]
    fn norm_e_matches_independent_gram_eigenvalue() {
        let mut rng = seeded_rng(3);
        let h0 = random_hermitian(&mut rng, 7, 1.0);
        let shift = -h0.eigenvalues()[0] + 0.5;
        let ctx = NormContext::new(&h0, shift, 0.7).unwrap();
        let a = crate::random::random_complex(&mut rng, 7, 1.0);
        let x = &ctx.weight_plus * &a * &ctx.weight_plus;
        // largest eigenvalue of X*X
        let gram = x.adjoint() * &x;
        let top = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max).sqrt();
        let ours = norm_e(&a, &ctx).unwrap();
        assert!((ours - top).abs() < 1e-12 * top);
    }

    #[test]
    fn relative_distance_closed_forms() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 2.0]);
        let a = HermitianOperator::from_real_diagonal(&[1.0, 0.0]).into_matrix();
        let b = HermitianOperator::from_real_diagonal(&[0.0, 1.0]).into_matrix();
        assert_abs_diff_eq!(relative_distance(&a, &a, 1.0, &h0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            relative_distance(&a, &b, 0.0, &h0).unwrap(),
            2.0f64.sqrt(),
            epsilon = 1e-14
        );
        let neg = -a.clone();
        assert_abs_diff_eq!(relative_distance(&a, &neg, 1.0, &h0).unwrap(), 2.0, epsilon = 1e-14);
        let z = CMat::zeros(2, 2);
        assert_eq!(relative_distance(&z, &z, 1.0, &h0), Err(Error::BothZero));
    }

    #[test]
    fn resolvent_diagonal_and_residual() {
        let h = HermitianOperator::from_real_diagonal(&[1.0, 2.0]);
        let i = Complex64::new(0.0, 1.0);
        let r = resolvent(&h, i).unwrap();
        assert!((r[(0, 0)] - 1.0 / (i - 1.0)).norm() < 1e-15);
        assert!((r[(1, 1)] - 1.0 / (i - 2.0)).norm() < 1e-15);

        let far = resolvent(&h, c(-10.0)).unwrap();
        assert!((&far - far.adjoint()).norm() < 1e-15);

        assert!(matches!(resolvent(&h, c(2.0)), Err(Error::SpectrumHit { .. })));

        let mut rng = seeded_rng(8);
        let h = random_hermitian(&mut rng, 9, 1.0);
        let z = Complex64::new(0.5, 1.0);
        let r = resolvent(&h, z).unwrap();
        let shifted = CMat::from_diagonal_element(9, 9, z) - h.matrix();
        assert!((shifted * r - CMat::identity(9, 9)).norm() < 1e-10);
    }

    #[test]
    fn bound_shift() {
        // |diag(-3, 1)| <= diag(0, 8)/8 + c needs c = 3
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 8.0]);
        let g = HermitianOperator::from_real_diagonal(&[-3.0, 1.0]);
        assert_abs_diff_eq!(relative_bound_constant(&h0, &g, 0.125).unwrap(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(resolvent_bound_shift(&h0, &g).unwrap(), 12.0, epsilon = 1e-13);
        assert_eq!(resolvent_bound_shift(&h0, &HermitianOperator::zeros(2)).unwrap(), 1.0);

        let mut rng = seeded_rng(19);
        let h0 = crate::random::random_reference(&mut rng, 8, 2.0);
        let g = random_hermitian(&mut rng, 8, 2.0);
        let eta = resolvent_bound_shift(&h0, &g).unwrap();
        let w = operator_power(&h0, eta, -0.5).unwrap();
        assert!(spectral_norm(&(&w * g.matrix() * &w)) <= 0.5 + 1e-12);
    }

    #[test]
    fn resolvent_bound_arithmetic() {
        assert_abs_diff_eq!(resolvent_bound_rhs(1.0, 1.0, 7.0, 2.0, 1.0).unwrap(), 50.0);
        let mut last = f64::INFINITY;
        for xi in [0.1, 1.0, 10.0, 100.0, 1e6] {
            let v = resolvent_bound_rhs(2.0, 3.0, 0.0, 4.0, xi).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(resolvent_bound_rhs(0.5, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(resolvent_bound_rhs(1.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gap_check_single_point_and_violation() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 3.0]);
        let g1 = HermitianOperator::zeros(3);
        let ok = GapWindow::new(-0.5, 0.5, 1).unwrap();
        assert!(gap_check(&h0, std::slice::from_ref(&g1), 1, &ok, 1));
        assert!(gap_check(&h0, std::slice::from_ref(&g1), 1, &ok, 5));
        let wide = GapWindow::new(-0.5, 1.5, 1).unwrap();
        assert!(!gap_check(&h0, std::slice::from_ref(&g1), 1, &wide, 1));
        // second vertex pushes lambda^1 out of the window
        let g2 = HermitianOperator::from_real_diagonal(&[0.8, 0.0, 0.0]);
        assert!(!gap_check(&h0, &[g1, g2], 1, &ok, 3));
    }

    #[test]
    fn simplex_lattice_counts() {
        assert_eq!(simplex_lattice(3, 0).len(), 3);
        // C(d + n - 1, n - 1)
        assert_eq!(simplex_lattice(4, 4).len(), 35);
        for p in simplex_lattice(3, 5) {
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn window_from_spectra_reflects_first_level() {
        let s = decompose(&HermitianOperator::from_real_diagonal(&[0.0, 1.0, 3.0]), 1).unwrap();
        let w = GapWindow::from_spectra(std::slice::from_ref(&s)).unwrap();
        assert_abs_diff_eq!(w.lambda_min, -0.5);
        assert_abs_diff_eq!(w.lambda_max, 0.5);
        let s2 = decompose(&HermitianOperator::from_real_diagonal(&[0.0, 1.0, 3.0]), 2).unwrap();
        let w2 = GapWindow::from_spectra(&[s2]).unwrap();
        assert_abs_diff_eq!(w2.lambda_min, 0.5);
        assert_abs_diff_eq!(w2.lambda_max, 2.0);
    }
}
