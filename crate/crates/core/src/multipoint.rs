//! Multipoint perturbation theory.
//!
//! Given the spectral data of `H(G_j)` at `n` points and weights `alpha`, the
//! resolvent of `H(G)` is rewritten exactly as
//! `L (1 + Hz - (s - 1) Az - g L)^{-1}` with
//!
//! * `Hz = s^{-1} sum_{i<j} a_i a_j (G_i - G_j) R_j (G_i - G_j) R_i`,
//! * `Az = s^{-1} sum_j a_j G_j R_j`,
//! * `L  = s^{-1} sum_j a_j R_j`,
//!
//! where `R_j = (z - H(G_j))^{-1}`, `s = sum_j a_j` and `g = G - sum_j a_j G_j`.
//! Expanding the inverse as a Neumann series and integrating term by term
//! gives the approximants `D_0`, `D_1`, `D_2` of the projector, built from the
//! closed-form contour integrals [`integral_i2`] and [`integral_i3`].

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    check_same_dim, condition_number, cross_pseudo_inverse, decompose, norm_a, resolvent_unchecked, CMat, GapWindow,
    HermitianOperator, NormContext, SpectralData, SPECTRUM_TOL,
};

/// Smallest admissible `|sum alpha|`.
pub const SUM_ALPHA_TOL: f64 = 1e-12;

/// Largest admissible condition number of the correction operator.
pub const MAX_CORRECTION_CONDITION: f64 = 1e12;

/// Defect tolerance for unitarity and commutation in [`conjugate_setup`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A known point `G_j` together with the eigen-data of `H(G_j)`.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub g: HermitianOperator,
    pub spec: SpectralData,
}

/// Everything needed to evaluate the multipoint formulas at a target `G`.
#[derive(Debug, Clone)]
pub struct MultipointSetup {
    pub h0: HermitianOperator,
    pub points: Vec<SamplePoint>,
    pub alpha: Vec<f64>,
    pub target: HermitianOperator,
    /// `G - sum_j alpha_j G_j`.
    pub g: HermitianOperator,
    pub s_alpha: f64,
    /// `cross[i][j] = K_ij`, shift `lambda^k(G_i)`, eigenvectors of `H(G_j)`.
    pub cross: Vec<Vec<CMat>>,
    pub ctx: NormContext,
    pub window: GapWindow,
}

impl MultipointSetup {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn level(&self) -> usize {
        self.window.level
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.n() {
            return Err(Error::IndexOutOfRange { index, len: self.n() });
        }
        Ok(())
    }

    fn projector(&self, j: usize) -> &CMat {
        self.points[j].spec.projector.matrix()
    }

    /// `H(G_j) = H0 + G_j`.
    pub fn hamiltonian(&self, j: usize) -> CMat {
        self.h0.matrix() + self.points[j].g.matrix()
    }
}

/// `delta_{alpha,G}`, `delta_alpha` and `delta_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallnessParameters {
    pub delta_alpha_g: f64,
    pub delta_alpha: f64,
    pub delta_g: f64,
}

/// Index `(a, b, c)` of an expansion term: `a` counts the order in the
/// spread of the points, `b` in `g`, `c` in `s - 1`.
pub type TermIndex = (usize, usize, usize);

/// The seven implemented terms, in assembly order.
pub const TERM_INDICES: [TermIndex; 7] = [
    (0, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (2, 0, 0),
    (0, 2, 0),
    (0, 0, 2),
    (0, 1, 1),
];

/// Expansion terms and the approximants `D_0`, `D_1`, `D_2`.
#[derive(Debug, Clone)]
pub struct MultipointExpansion {
    pub terms: BTreeMap<TermIndex, CMat>,
    pub levels: [CMat; 3],
}

impl MultipointExpansion {
    pub fn term(&self, index: TermIndex) -> Option<&CMat> {
        self.terms.get(&index)
    }

    /// `D_level`, for `level <= 2`.
    pub fn level(&self, level: usize) -> Result<&CMat> {
        self.levels.get(level).ok_or(Error::UnsupportedOrder(level))
    }
}

/// How the sums in the `(0,1,0)` and `(0,2,0)` terms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assembly {
    /// Every index combination evaluated.
    Naive,
    /// Mirrored index pairs obtained from the adjoint.
    #[default]
    Symmetric,
}

/// Builds the offline data: eigen-data at each `G_j` and the table `K_ij`.
///
/// Without an explicit `window`, the one spanned by the vertex spectra is
/// used. Either way the window must isolate the k-th eigenvalue of every
/// `H(G_j)`.
pub fn build_setup(
    h0: &HermitianOperator,
    gs: &[HermitianOperator],
    alpha: &[f64],
    target: &HermitianOperator,
    k: usize,
    ctx: &NormContext,
    window: Option<GapWindow>,
) -> Result<MultipointSetup> {
    if gs.is_empty() {
        return Err(Error::InvalidArgument("at least one point is required".into()));
    }
    check_same_dim(gs.len(), alpha.len())?;
    let dim = h0.dim();
    check_same_dim(dim, target.dim())?;
    check_same_dim(dim, ctx.dim())?;
    for g in gs {
        check_same_dim(dim, g.dim())?;
    }
    let s_alpha: f64 = alpha.iter().sum();
    if s_alpha.abs() <= SUM_ALPHA_TOL {
        return Err(Error::SumAlphaZero(s_alpha));
    }

    let mut points = Vec::with_capacity(gs.len());
    for (j, g) in gs.iter().enumerate() {
        let mut spec = decompose(&h0.add(g)?, k)?;
        spec.source_index = Some(j);
        points.push(SamplePoint { g: g.clone(), spec });
    }
    let spectra: Vec<SpectralData> = points.iter().map(|p| p.spec.clone()).collect();
    let window = match window {
        Some(w) => w,
        None => GapWindow::from_spectra(&spectra)?,
    };
    if window.level != k {
        return Err(Error::InvalidArgument(format!(
            "gap window is for level {}, setup for level {k}",
            window.level
        )));
    }
    for (j, spec) in spectra.iter().enumerate() {
        if !window.admits(&spec.eigenvalues) {
            return Err(Error::GapViolation(format!(
                "window [{}, {}] does not isolate level {k} at point {}",
                window.lambda_min,
                window.lambda_max,
                j + 1
            )));
        }
    }

    let cross = spectra
        .iter()
        .map(|si| {
            spectra
                .iter()
                .map(|sj| {
                    if std::ptr::eq(si, sj) {
                        Ok(sj.pseudo_inverse.matrix().clone())
                    } else {
                        cross_pseudo_inverse(sj, si.eigenvalue()).map(HermitianOperator::into_matrix)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let refs: Vec<&HermitianOperator> = gs.iter().collect();
    let g = target.sub(&HermitianOperator::linear_combination(alpha, &refs)?)?;
    Ok(MultipointSetup {
        h0: h0.clone(),
        points,
        alpha: alpha.to_vec(),
        target: target.clone(),
        g,
        s_alpha,
        cross,
        ctx: ctx.clone(),
        window,
    })
}

impl MultipointSetup {
    /// Same points and offline data, new weights and target.
    pub fn retarget(&self, alpha: &[f64], target: &HermitianOperator) -> Result<Self> {
        check_same_dim(self.n(), alpha.len())?;
        check_same_dim(self.dim(), target.dim())?;
        let s_alpha: f64 = alpha.iter().sum();
        if s_alpha.abs() <= SUM_ALPHA_TOL {
            return Err(Error::SumAlphaZero(s_alpha));
        }
        let refs: Vec<&HermitianOperator> = self.points.iter().map(|p| &p.g).collect();
        let g = target.sub(&HermitianOperator::linear_combination(alpha, &refs)?)?;
        Ok(Self {
            alpha: alpha.to_vec(),
            target: target.clone(),
            g,
            s_alpha,
            ..self.clone()
        })
    }
}

/// `delta_{alpha,G} = max_{i,j} sqrt|a_i a_j| ||G_i - G_j||_a`,
/// `delta_alpha = |1 - s|`, `delta_g = ||g||_a`.
pub fn smallness(setup: &MultipointSetup) -> Result<SmallnessParameters> {
    let n = setup.n();
    let mut delta_alpha_g = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = setup.points[i].g.matrix() - setup.points[j].g.matrix();
            let w = (setup.alpha[i] * setup.alpha[j]).abs().sqrt();
            delta_alpha_g = delta_alpha_g.max(w * norm_a(&diff, &setup.ctx)?);
        }
    }
    Ok(SmallnessParameters {
        delta_alpha_g,
        delta_alpha: (1.0 - setup.s_alpha).abs(),
        delta_g: norm_a(setup.g.matrix(), &setup.ctx)?,
    })
}

/// `Hz`, `Az`, `L` at one `z`, with the point resolvents they were built from.
#[derive(Debug, Clone)]
pub struct ResolventOperators {
    pub h: CMat,
    pub a: CMat,
    pub l: CMat,
    pub resolvents: Vec<CMat>,
}

/// Evaluates `Hz`, `Az` and `L` at `z`.
pub fn operators_at_z(setup: &MultipointSetup, z: Complex64) -> Result<ResolventOperators> {
    let dim = setup.dim();
    let n = setup.n();
    let inv_s = Complex64::new(1.0 / setup.s_alpha, 0.0);
    let mut resolvents = Vec::with_capacity(n);
    for (j, p) in setup.points.iter().enumerate() {
        let distance = p
            .spec
            .eigenvalues
            .iter()
            .map(|&l| (z - l).norm())
            .fold(f64::INFINITY, f64::min);
        let hit = Error::SpectrumHit {
            re: z.re,
            im: z.im,
            distance,
        };
        if distance <= SPECTRUM_TOL {
            return Err(hit);
        }
        resolvents.push(resolvent_unchecked(&setup.hamiltonian(j), z).ok_or(hit)?);
    }

    let mut h = CMat::zeros(dim, dim);
    let mut a = CMat::zeros(dim, dim);
    let mut l = CMat::zeros(dim, dim);
    for j in 0..n {
        let aj = Complex64::new(setup.alpha[j], 0.0);
        a += setup.points[j].g.matrix() * &resolvents[j] * aj;
        l += &resolvents[j] * aj;
        for i in 0..j {
            let gij = setup.points[i].g.matrix() - setup.points[j].g.matrix();
            let w = Complex64::new(setup.alpha[i] * setup.alpha[j], 0.0);
            h += &gij * &resolvents[j] * &gij * &resolvents[i] * w;
        }
    }
    Ok(ResolventOperators {
        h: h * inv_s,
        a: a * inv_s,
        l: l * inv_s,
        resolvents,
    })
}

/// The correction operator `1 + Hz - (s - 1) Az - g L`.
pub fn correction_operator(setup: &MultipointSetup, ops: &ResolventOperators) -> CMat {
    let dim = setup.dim();
    CMat::identity(dim, dim) + &ops.h - &ops.a * Complex64::new(setup.s_alpha - 1.0, 0.0) - setup.g.matrix() * &ops.l
}

/// `L (1 + Hz - (s - 1) Az - g L)^{-1}`, equal to `(z - H(G))^{-1}`.
pub fn multipoint_resolvent(setup: &MultipointSetup, z: Complex64) -> Result<CMat> {
    let ops = operators_at_z(setup, z)?;
    let c = correction_operator(setup, &ops);
    let cond = condition_number(&c);
    if !(cond <= MAX_CORRECTION_CONDITION) {
        return Err(Error::NearSingularCorrection(cond));
    }
    let inv = c.lu().try_inverse().ok_or(Error::NearSingularCorrection(cond))?;
    Ok(ops.l * inv)
}

/// `(1 / 2 pi i) \oint R_a A R_b dz = P_a A K_ab + K_ba A P_b`.
pub fn integral_i2(setup: &MultipointSetup, a: usize, b: usize, op: &CMat) -> Result<CMat> {
    setup.check_index(a)?;
    setup.check_index(b)?;
    Ok(i2(setup, a, b, op))
}

fn i2(setup: &MultipointSetup, a: usize, b: usize, op: &CMat) -> CMat {
    let k = &setup.cross;
    setup.projector(a) * op * &k[a][b] + &k[b][a] * op * setup.projector(b)
}

/// `(1 / 2 pi i) \oint R_a A R_b B R_c dz`, six-term closed form.
pub fn integral_i3(setup: &MultipointSetup, a: usize, b: usize, c: usize, op_a: &CMat, op_b: &CMat) -> Result<CMat> {
    setup.check_index(a)?;
    setup.check_index(b)?;
    setup.check_index(c)?;
    Ok(i3(setup, a, b, c, op_a, op_b))
}

fn i3(setup: &MultipointSetup, a: usize, b: usize, c: usize, op_a: &CMat, op_b: &CMat) -> CMat {
    let k = &setup.cross;
    let (pa, pb, pc) = (setup.projector(a), setup.projector(b), setup.projector(c));
    pa * op_a * &k[a][b] * op_b * &k[a][c]
        + &k[b][a] * op_a * pb * op_b * &k[b][c]
        + &k[c][a] * op_a * &k[c][b] * op_b * pc
        - pa * op_a * pb * op_b * &k[a][c] * &k[b][c]
        - pa * op_a * &k[a][b] * &k[c][b] * op_b * pc
        - &k[b][a] * &k[c][a] * op_a * pb * op_b * pc
}

/// Expansion terms with the symmetric assembly.
pub fn expansion_terms(setup: &MultipointSetup) -> Result<MultipointExpansion> {
    expansion_terms_with(setup, Assembly::Symmetric)
}

/// Expansion terms up to total order two, and the approximants built from them.
pub fn expansion_terms_with(setup: &MultipointSetup, assembly: Assembly) -> Result<MultipointExpansion> {
    let n = setup.n();
    let dim = setup.dim();
    let s = setup.s_alpha;
    let al = &setup.alpha;
    let g = setup.g.matrix();
    let gj: Vec<&CMat> = setup.points.iter().map(|p| p.g.matrix()).collect();
    let c = |x: f64| Complex64::new(x, 0.0);
    let zero = || CMat::zeros(dim, dim);

    let mut d000 = zero();
    for (j, &a) in al.iter().enumerate() {
        d000 += setup.projector(j) * c(a);
    }
    d000 *= c(1.0 / s);

    let d010 = match assembly {
        Assembly::Naive => {
            let mut acc = zero();
            for i in 0..n {
                for j in 0..n {
                    acc += i2(setup, i, j, g) * c(al[i] * al[j]);
                }
            }
            acc
        }
        Assembly::Symmetric => mirrored_pairs(n, dim, |i, j| i2(setup, i, j, g) * c(al[i] * al[j])),
    } * c(s.powi(-2));

    let mut d001 = zero();
    for i in 0..n {
        for j in 0..n {
            d001 += i2(setup, i, j, gj[j]) * c(al[i] * al[j]);
        }
    }
    d001 *= c((s - 1.0) * s.powi(-2));

    let mut d200 = zero();
    for a in 0..n {
        for b in (a + 1)..n {
            let gab = gj[a] - gj[b];
            for j in 0..n {
                d200 += i3(setup, j, b, a, &gab, &gab) * c(al[j] * al[a] * al[b]);
            }
        }
    }
    d200 *= c(-s.powi(-2));

    let d020 = match assembly {
        Assembly::Naive => {
            let mut acc = zero();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        acc += i3(setup, i, j, k, g, g) * c(al[i] * al[j] * al[k]);
                    }
                }
            }
            acc
        }
        Assembly::Symmetric => {
            let mut acc = zero();
            for j in 0..n {
                acc += mirrored_pairs(n, dim, |i, k| i3(setup, i, j, k, g, g) * c(al[i] * al[j] * al[k]));
            }
            acc
        }
    } * c(s.powi(-3));

    let mut d002 = zero();
    let mut d011 = zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let w = c(al[i] * al[j] * al[k]);
                d002 += i3(setup, i, j, k, gj[j], gj[k]) * w;
                d011 += (i3(setup, i, j, k, gj[j], g) + i3(setup, i, j, k, g, gj[k])) * w;
            }
        }
    }
    d002 *= c((s - 1.0).powi(2) * s.powi(-3));
    d011 *= c((s - 1.0) * s.powi(-3));

    let level0 = d000.clone();
    let level1 = &level0 + &d010 + &d001;
    let level2 = &level1 + &d200 + &d020 + &d002 + &d011;
    let terms = BTreeMap::from([
        ((0, 0, 0), d000),
        ((0, 1, 0), d010),
        ((0, 0, 1), d001),
        ((2, 0, 0), d200),
        ((0, 2, 0), d020),
        ((0, 0, 2), d002),
        ((0, 1, 1), d011),
    ]);
    Ok(MultipointExpansion {
        terms,
        levels: [level0, level1, level2],
    })
}

/// `sum_{i,j} f(i, j)` for summands with `f(j, i) = f(i, j)*`, evaluating
/// only `i <= j`.
fn mirrored_pairs(n: usize, dim: usize, f: impl Fn(usize, usize) -> CMat) -> CMat {
    let mut acc = CMat::zeros(dim, dim);
    for i in 0..n {
        acc += f(i, i);
        for j in (i + 1)..n {
            let x = f(i, j);
            acc += x.adjoint() + x;
        }
    }
    acc
}

/// Replaces each `G_j` by `U_j G_j U_j*` for unitaries commuting with `H0`,
/// transporting the eigen-data and `K_ij` without new decompositions.
pub fn conjugate_setup(setup: &MultipointSetup, us: &[CMat]) -> Result<MultipointSetup> {
    check_same_dim(setup.n(), us.len())?;
    let dim = setup.dim();
    let eye = CMat::identity(dim, dim);
    for (index, u) in us.iter().enumerate() {
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.nrows(),
            });
        }
        let defect = (u.adjoint() * u - &eye).norm();
        if !(defect < SYMMETRY_TOL) {
            return Err(Error::NotUnitary { index, defect });
        }
        let norm = (setup.h0.matrix() * u - u * setup.h0.matrix()).norm();
        if !(norm < SYMMETRY_TOL) {
            return Err(Error::DoesNotCommute { index, norm });
        }
    }
    let points = setup
        .points
        .iter()
        .zip(us)
        .map(|(p, u)| {
            Ok(SamplePoint {
                g: p.g.conjugate_by(u)?,
                spec: p.spec.conjugate_by(u)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cross = setup
        .cross
        .iter()
        .map(|row| row.iter().zip(us).map(|(kij, u)| u * kij * u.adjoint()).collect())
        .collect();
    let refs: Vec<&HermitianOperator> = points.iter().map(|p| &p.g).collect();
    let g = setup
        .target
        .sub(&HermitianOperator::linear_combination(&setup.alpha, &refs)?)?;
    Ok(MultipointSetup {
        h0: setup.h0.clone(),
        points,
        alpha: setup.alpha.clone(),
        target: setup.target.clone(),
        g,
        s_alpha: setup.s_alpha,
        cross,
        ctx: setup.ctx.clone(),
        window: setup.window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{contour_integrate, Contour};
    use crate::operator::resolvent;
    use crate::random::{random_hermitian, random_reference, seeded_rng, TestRng};
    use crate::standard::standard_terms;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_setup(rng: &mut TestRng, dim: usize, n: usize, spread: f64, k: usize) -> MultipointSetup {
        let h0 = random_reference(rng, dim, 1.0);
        let base = random_hermitian(rng, dim, 0.3);
        let gs: Vec<_> = (0..n)
            .map(|_| base.add(&random_hermitian(rng, dim, spread)).unwrap())
            .collect();
        let alpha: Vec<f64> = (0..n).map(|j| 0.2 + 0.5 * j as f64 / n as f64).collect();
        let target = base.add(&random_hermitian(rng, dim, spread)).unwrap();
        let ctx = NormContext::energy(&h0.add(&HermitianOperator::identity(dim)).unwrap()).unwrap();
        build_setup(&h0, &gs, &alpha, &target, k, &ctx, None).unwrap()
    }

    fn relative(a: &CMat, b: &CMat) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn two_by_two_exactness() {
        let h0 = HermitianOperator::from_real_diagonal(&[1.0, 2.0]);
        let gs = vec![
            HermitianOperator::from_real_diagonal(&[0.1, 0.0]),
            HermitianOperator::from_real_diagonal(&[0.0, 0.1]),
        ];
        let target = HermitianOperator::from_real_diagonal(&[0.05, 0.05]);
        let ctx = NormContext::energy(&h0).unwrap();
        let setup = build_setup(&h0, &gs, &[0.5, 0.5], &target, 1, &ctx, None).unwrap();
        assert_eq!(setup.s_alpha, 1.0);
        let z = Complex64::new(0.0, 1.0);
        let lhs = multipoint_resolvent(&setup, z).unwrap();
        let rhs = resolvent(&h0.add(&target).unwrap(), z).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn setup_errors() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let ctx = NormContext::energy(&h0).unwrap();
        let g = HermitianOperator::zeros(3);
        let gs = vec![g.clone(), g.clone()];
        assert!(matches!(
            build_setup(&h0, &gs, &[0.5, -0.5], &g, 1, &ctx, None),
            Err(Error::SumAlphaZero(_))
        ));
        let flat = HermitianOperator::zeros(3);
        assert!(matches!(
            build_setup(&flat, &gs, &[1.0, 0.0], &g, 2, &ctx, None),
            Err(Error::DegenerateLevel { .. })
        ));
        // second point pushes level 1 past level 2 of the first
        let crossing = vec![g.clone(), HermitianOperator::from_real_diagonal(&[1.5, 0.0, 0.0])];
        assert!(matches!(
            build_setup(&h0, &crossing, &[0.5, 0.5], &g, 1, &ctx, None),
            Err(Error::GapViolation(_))
        ));
        let narrow = GapWindow::new(-0.1, 0.05, 1).unwrap();
        let shifted = vec![g.clone(), HermitianOperator::from_real_diagonal(&[0.1, 0.0, 0.0])];
        assert!(matches!(
            build_setup(&h0, &shifted, &[0.5, 0.5], &g, 1, &ctx, Some(narrow)),
            Err(Error::GapViolation(_))
        ));
    }

    #[test]
    fn single_point_reduction() {
        let mut rng = seeded_rng(5);
        let h0 = random_reference(&mut rng, 5, 1.0);
        let g1 = random_hermitian(&mut rng, 5, 0.2);
        let ctx = NormContext::energy(&h0.add(&HermitianOperator::identity(5)).unwrap()).unwrap();
        let same = build_setup(&h0, std::slice::from_ref(&g1), &[1.0], &g1, 2, &ctx, None).unwrap();
        assert_eq!(same.g.matrix().norm(), 0.0);
        assert_eq!(same.s_alpha, 1.0);
        let z = Complex64::new(same.points[0].spec.eigenvalue(), 0.3);
        let ops = operators_at_z(&same, z).unwrap();
        assert_eq!(ops.h.norm(), 0.0);
        assert!((&ops.a - g1.matrix() * &ops.resolvents[0]).norm() < 1e-14);
        assert_eq!(ops.l, ops.resolvents[0]);

        let target = g1.add(&random_hermitian(&mut rng, 5, 0.05)).unwrap();
        let setup = build_setup(&h0, std::slice::from_ref(&g1), &[1.0], &target, 2, &ctx, None).unwrap();
        let mp = expansion_terms(&setup).unwrap();
        let st = standard_terms(&setup.points[0].spec, &setup.g, 2).unwrap();
        for l in 0..=2 {
            let diff = (mp.level(l).unwrap() - st.partial_sum(l)).norm();
            assert!(diff < 1e-12, "level {l}: {diff}");
        }
    }

    #[test]
    fn equal_points_give_exact_projector() {
        let mut rng = seeded_rng(6);
        let h0 = random_reference(&mut rng, 4, 1.0);
        let g1 = random_hermitian(&mut rng, 4, 0.2);
        let ctx = NormContext::energy(&h0.add(&HermitianOperator::identity(4)).unwrap()).unwrap();
        let gs = vec![g1.clone(), g1.clone(), g1.clone()];
        let setup = build_setup(&h0, &gs, &[0.2, 0.5, 0.3], &g1, 1, &ctx, None).unwrap();
        let sm = smallness(&setup).unwrap();
        assert_eq!(sm.delta_alpha_g, 0.0);
        assert!(sm.delta_alpha < 1e-15 && sm.delta_g < 1e-14);
        let z = Complex64::new(0.0, 1.0);
        assert!(operators_at_z(&setup, z).unwrap().h.norm() == 0.0);
        let mp = expansion_terms(&setup).unwrap();
        let exact = setup.points[0].spec.projector.matrix();
        for l in 0..=2 {
            assert!((mp.level(l).unwrap() - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn smallness_values() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 3.0]);
        let ctx = NormContext::energy(&h0).unwrap();
        let g1 = HermitianOperator::from_real_diagonal(&[0.1, 0.0]);
        let g2 = HermitianOperator::from_real_diagonal(&[0.0, 0.4]);
        let alpha = [-0.4, 0.5, 0.4, 0.7];
        let gs = vec![g1.clone(), g2.clone(), g1.clone(), g2.clone()];
        let target = HermitianOperator::linear_combination(&alpha, &gs.iter().collect::<Vec<_>>()).unwrap();
        let setup = build_setup(&h0, &gs, &alpha, &target, 1, &ctx, None).unwrap();
        assert!((setup.s_alpha - 1.2).abs() < 1e-15);
        let sm = smallness(&setup).unwrap();
        assert!((sm.delta_alpha - 0.2).abs() < 1e-15);
        assert!(sm.delta_g < 1e-15);
        // ||diag(0.1, -0.4)||_a = max(0.1 / 1, 0.4 / 4) = 0.1; largest weight over
        // distinct pairs is sqrt(0.4 * 0.7)
        assert!((sm.delta_alpha_g - 0.28f64.sqrt() * 0.1).abs() < 1e-14);
    }

    #[test]
    fn diagonal_family_closed_form() {
        // entrywise: L = s^-1 sum a_j / (z - h_j), Hz = s^-1 sum_{i<j} a_i a_j (g_i - g_j)^2 / ((z - h_i)(z - h_j))
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5]);
        let ctx = NormContext::energy(&h0).unwrap();
        let d = [[0.1, -0.2, 0.05], [0.0, 0.1, 0.2], [-0.1, 0.05, 0.0]];
        let gs: Vec<_> = d.iter().map(|x| HermitianOperator::from_real_diagonal(x)).collect();
        let alpha = [0.3, 0.5, 0.4];
        let target = HermitianOperator::from_real_diagonal(&[0.02, 0.0, 0.1]);
        let setup = build_setup(&h0, &gs, &alpha, &target, 1, &ctx, None).unwrap();
        let z = Complex64::new(0.3, 0.7);
        let ops = operators_at_z(&setup, z).unwrap();
        let s: f64 = alpha.iter().sum();
        let base = [0.0, 1.0, 2.5];
        for e in 0..3 {
            let r: Vec<Complex64> = (0..3).map(|j| 1.0 / (z - base[e] - d[j][e])).collect();
            let l: Complex64 = (0..3).map(|j| alpha[j] * r[j]).sum::<Complex64>() / s;
            let a: Complex64 = (0..3).map(|j| alpha[j] * d[j][e] * r[j]).sum::<Complex64>() / s;
            let mut h = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                for i in 0..j {
                    h += alpha[i] * alpha[j] * (d[i][e] - d[j][e]).powi(2) * r[i] * r[j];
                }
            }
            h /= s;
            assert!((ops.l[(e, e)] - l).norm() < 1e-14);
            assert!((ops.a[(e, e)] - a).norm() < 1e-14);
            assert!((ops.h[(e, e)] - h).norm() < 1e-14);
        }
        let off: f64 = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .map(|(r, cc)| ops.h[(r, cc)].norm())
            .sum();
        assert_eq!(off, 0.0);
    }

    #[test]
    fn random_exactness_and_derivation_identity() {
        let mut rng = seeded_rng(77);
        for (dim, n, k) in [(6, 3, 2), (9, 4, 1), (5, 2, 3)] {
            let setup = random_setup(&mut rng, dim, n, 0.1, k);
            let h = setup.h0.add(&setup.target).unwrap();
            let contour = Contour::from_window(&setup.window);
            for z in contour.sample_points(3) {
                let direct = resolvent(&h, z).unwrap();
                let mp = multipoint_resolvent(&setup, z).unwrap();
                assert!(relative(&mp, &direct) < 1e-10);

                let ops = operators_at_z(&setup, z).unwrap();
                let shifted = CMat::from_diagonal_element(dim, dim, z) - h.matrix();
                let lhs = CMat::identity(dim, dim) - shifted * &ops.l;
                let rhs = setup.g.matrix() * &ops.l - &ops.h + &ops.a * c(setup.s_alpha - 1.0);
                assert!((lhs - &rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
            }
        }
    }

    #[test]
    fn i2_two_by_two() {
        let h0 = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let ctx = NormContext::energy(&h0.add(&HermitianOperator::identity(2)).unwrap()).unwrap();
        let z = HermitianOperator::zeros(2);
        let setup = build_setup(&h0, std::slice::from_ref(&z), &[1.0], &z, 1, &ctx, None).unwrap();
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = c(1.0);
        a[(1, 0)] = c(1.0);
        let mut expected = CMat::zeros(2, 2);
        expected[(0, 1)] = c(-1.0);
        expected[(1, 0)] = c(-1.0);
        assert!((integral_i2(&setup, 0, 0, &a).unwrap() - expected).norm() < 1e-15);
        assert_eq!(integral_i2(&setup, 0, 0, &CMat::zeros(2, 2)).unwrap().norm(), 0.0);
        let zero = CMat::zeros(2, 2);
        assert_eq!(integral_i3(&setup, 0, 0, 0, &zero, &zero).unwrap().norm(), 0.0);
        assert_eq!(
            integral_i2(&setup, 0, 1, &a).unwrap_err(),
            Error::IndexOutOfRange { index: 1, len: 1 }
        );
        assert!(integral_i3(&setup, 0, 0, 3, &a, &a).is_err());
    }

    #[test]
    fn i3_single_point_matches_second_order() {
        let mut rng = seeded_rng(8);
        let h0 = random_reference(&mut rng, 5, 1.0);
        let g1 = random_hermitian(&mut rng, 5, 0.2);
        let gp = random_hermitian(&mut rng, 5, 0.1);
        let ctx = NormContext::energy(&h0.add(&HermitianOperator::identity(5)).unwrap()).unwrap();
        let setup = build_setup(&h0, std::slice::from_ref(&g1), &[1.0], &g1, 1, &ctx, None).unwrap();
        let i = integral_i3(&setup, 0, 0, 0, gp.matrix(), gp.matrix()).unwrap();
        let st = standard_terms(&setup.points[0].spec, &gp, 2).unwrap();
        assert!((i - &st.terms[2]).norm() < 1e-13);
    }

    #[test]
    fn integrals_match_contour_quadrature() {
        let mut rng = seeded_rng(9);
        let setup = random_setup(&mut rng, 6, 3, 0.15, 2);
        let contour = Contour::from_window(&setup.window);
        let a = random_hermitian(&mut rng, 6, 1.0).into_matrix();
        let b = random_hermitian(&mut rng, 6, 1.0).into_matrix();
        let res = |j: usize, z: Complex64| resolvent_unchecked(&setup.hamiltonian(j), z).unwrap();
        for (p, q) in [(0, 1), (2, 0), (1, 1)] {
            let oracle = contour_integrate(|z| res(p, z) * &a * res(q, z), &contour, 1e-12).unwrap();
            assert!((oracle - integral_i2(&setup, p, q, &a).unwrap()).norm() < 1e-8);
        }
        for (p, q, r) in [(0, 1, 2), (2, 2, 0), (1, 0, 1)] {
            let oracle = contour_integrate(|z| res(p, z) * &a * res(q, z) * &b * res(r, z), &contour, 1e-12).unwrap();
            assert!((oracle - integral_i3(&setup, p, q, r, &a, &b).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn terms_match_contour_quadrature() {
        // each term is the contour integral of its word in L, Hz, Az, gL
        let mut rng = seeded_rng(10);
        let base = random_setup(&mut rng, 5, 3, 0.1, 1);
        let setup = base.retarget(&[0.5, 0.4, 0.3], &base.target).unwrap();
        assert!((setup.s_alpha - 1.2).abs() < 1e-15);
        assert!(base.retarget(&[0.5, -0.5, 0.0], &base.target).is_err());
        let mp = expansion_terms(&setup).unwrap();
        let contour = Contour::from_window(&setup.window);
        let s1 = c(setup.s_alpha - 1.0);
        let setup = &setup;
        let g = setup.g.matrix();
        let word = |index: TermIndex| {
            move |z: Complex64| {
                let o = operators_at_z(setup, z).unwrap();
                let gl = g * &o.l;
                match index {
                    (0, 0, 0) => o.l.clone(),
                    (0, 1, 0) => &o.l * &gl,
                    (0, 0, 1) => &o.l * &o.a * s1,
                    (2, 0, 0) => -(&o.l * &o.h),
                    (0, 2, 0) => &o.l * &gl * &gl,
                    (0, 0, 2) => &o.l * &o.a * &o.a * s1 * s1,
                    (0, 1, 1) => (&o.l * &gl * &o.a + &o.l * &o.a * &gl) * s1,
                    _ => unreachable!(),
                }
            }
        };
        for index in TERM_INDICES {
            let oracle = contour_integrate(word(index), &contour, 1e-12).unwrap();
            let diff = (oracle - mp.term(index).unwrap()).norm();
            assert!(diff < 1e-8, "{index:?}: {diff}");
        }
    }

    #[test]
    fn naive_and_symmetric_assembly_agree() {
        let mut rng = seeded_rng(11);
        let setup = random_setup(&mut rng, 7, 4, 0.1, 2);
        let naive = expansion_terms_with(&setup, Assembly::Naive).unwrap();
        let sym = expansion_terms_with(&setup, Assembly::Symmetric).unwrap();
        for index in TERM_INDICES {
            assert!((naive.term(index).unwrap() - sym.term(index).unwrap()).norm() < 1e-12);
        }
        let d0 = &sym.levels[0];
        assert!((d0 - d0.adjoint()).norm() < 1e-10);
        assert!((d0.trace() - c(1.0)).norm() < 1e-10);
        assert!(
            (&sym.levels[2]
                - &sym.levels[1]
                - (&sym.terms[&(2, 0, 0)] + &sym.terms[&(0, 2, 0)] + &sym.terms[&(0, 0, 2)] + &sym.terms[&(0, 1, 1)]))
                .norm()
                < 1e-14
        );
    }

    #[test]
    fn conjugation() {
        let mut rng = seeded_rng(12);
        let setup = random_setup(&mut rng, 5, 2, 0.1, 1);
        let eye = CMat::identity(5, 5);
        let same = conjugate_setup(&setup, &[eye.clone(), eye.clone()]).unwrap();
        assert_eq!(same.g, setup.g);
        assert_eq!(same.points[1].spec.projector, setup.points[1].spec.projector);

        // diagonal phases commute with a diagonal H0
        let phase = |t: f64| {
            CMat::from_fn(5, 5, |r, cc| {
                if r == cc {
                    Complex64::from_polar(1.0, t * r as f64)
                } else {
                    c(0.0)
                }
            })
        };
        let us = [phase(0.3), phase(-1.1)];
        let conj = conjugate_setup(&setup, &us).unwrap();
        for (j, u) in us.iter().enumerate() {
            let h = setup.h0.add(&conj.points[j].g).unwrap();
            let fresh = decompose(&h, 1).unwrap();
            assert!((fresh.projector.matrix() - conj.points[j].spec.projector.matrix()).norm() < 1e-10);
            let kij = cross_pseudo_inverse(&fresh, setup.points[1 - j].spec.eigenvalue()).unwrap();
            assert!((kij.matrix() - &conj.cross[1 - j][j]).norm() < 1e-10);
            assert!((u * setup.points[j].g.matrix() * u.adjoint() - conj.points[j].g.matrix()).norm() < 1e-14);
        }
        let h = setup.h0.add(&setup.target).unwrap();
        let z = Complex64::new(setup.window.lambda_max, 0.2);
        assert!(relative(&multipoint_resolvent(&conj, z).unwrap(), &resolvent(&h, z).unwrap()) < 1e-10);

        let mut bad = phase(0.3);
        bad[(0, 0)] = c(2.0);
        assert!(matches!(
            conjugate_setup(&setup, &[bad, eye.clone()]),
            Err(Error::NotUnitary { index: 0, .. })
        ));
        let swap = CMat::from_fn(5, 5, |r, cc| {
            if (r == 0 && cc == 1) || (r == 1 && cc == 0) || (r == cc && r > 1) {
                c(1.0)
            } else {
                c(0.0)
            }
        });
        assert!(matches!(
            conjugate_setup(&setup, &[eye, swap]),
            Err(Error::DoesNotCommute { index: 1, .. })
        ));
    }
}
