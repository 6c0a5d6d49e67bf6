//! Identity and oracle checks run by the `verify` command and the
//! acceptance tests.

use std::fmt;

use multipoint_core::contour::Contour;
use multipoint_core::operator::{spectral_norm, SPECTRUM_TOL};
use multipoint_core::random::{random_hermitian, random_reference, seeded_rng, TestRng};
use multipoint_core::{
    build_setup, contour_integrate, cross_pseudo_inverse, decompose, default_contour, expansion_terms, fit_alpha,
    integral_i2, integral_i3, kij_from_kj, multipoint_resolvent, norm_e, resolvent, resolvent_bound_rhs,
    resolvent_bound_shift, standard_terms, CMat, HermitianOperator, MultipointSetup, NormContext, XiMode,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::BenchConfig;
use crate::experiments::Model;
use crate::BenchError;

type Result<T> = std::result::Result<T, BenchError>;

/// Quadrature tolerance for the contour oracle.
pub const ORACLE_QUADRATURE_TOL: f64 = 1e-12;

/// Outcome of one check: the worst observed value against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst < self.tolerance
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, worst {:.3e} (tolerance {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

fn relative(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hamiltonians(setup: &MultipointSetup) -> Result<Vec<HermitianOperator>> {
    setup.points.iter().map(|p| Ok(setup.h0.add(&p.g)?)).collect()
}

/// Random multipoint setup around a common base perturbation. Draws are
/// repeated until the shared window isolates level `k`.
pub fn random_setup(rng: &mut TestRng, dim: usize, n: usize, k: usize, spread: f64) -> MultipointSetup {
    loop {
        let h0 = random_reference(rng, dim, 1.0);
        let base = random_hermitian(rng, dim, 0.3);
        let gs: Vec<HermitianOperator> = (0..n)
            .map(|_| base.add(&random_hermitian(rng, dim, spread)).expect("same dimension"))
            .collect();
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let target = base.add(&random_hermitian(rng, dim, spread)).expect("same dimension");
        let ctx = NormContext::energy(&h0).expect("nonnegative reference");
        if let Ok(setup) = build_setup(&h0, &gs, &alpha, &target, k, &ctx, None) {
            return setup;
        }
    }
}

/// Setup whose points are unitary conjugates of one perturbation by
/// diagonal phases, which commute with the diagonal `H0`: all points share
/// the same spectrum, hence the same `lambda^k`.
pub fn coincident_setup(rng: &mut TestRng, dim: usize, n: usize, k: usize) -> MultipointSetup {
    loop {
        let h0 = random_reference(rng, dim, 1.0);
        let g = random_hermitian(rng, dim, 0.3);
        let gs: Vec<HermitianOperator> = (0..n)
            .map(|_| {
                let phases: Vec<Complex64> = (0..dim)
                    .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                    .collect();
                g.conjugate_by(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)))
                    .expect("unitary conjugation")
            })
            .collect();
        let alpha = vec![1.0 / n as f64; n];
        let ctx = NormContext::energy(&h0).expect("nonnegative reference");
        if let Ok(setup) = build_setup(&h0, &gs, &alpha, &g, k, &ctx, None) {
            return setup;
        }
    }
}

/// Contour points of the setup window, away from the target spectrum.
fn probe_points(setup: &MultipointSetup, per_edge: usize) -> Result<Vec<Complex64>> {
    let eigs = setup.h0.add(&setup.target)?.eigenvalues();
    Ok(Contour::from_window(&setup.window)
        .sample_points(per_edge)
        .into_iter()
        .filter(|z| eigs.iter().all(|&l| (z - l).norm() > 1e-6))
        .collect())
}

fn identity_error(setups: &[MultipointSetup], per_edge: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for setup in setups {
        let h = setup.h0.add(&setup.target)?;
        for z in probe_points(setup, per_edge)? {
            let lhs = multipoint_resolvent(setup, z)?;
            let rhs = resolvent(&h, z)?;
            worst = worst.max(relative(&lhs, &rhs));
            cases += 1;
        }
    }
    Ok((cases, worst))
}

/// Multipoint resolvent against the direct resolvent on 50 random setups
/// with dimensions 4 to 16 and 1 to 4 points.
pub fn identity_random(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed);
    let setups: Vec<MultipointSetup> = (0..50)
        .map(|i| {
            let dim = 4 + (i * 12) / 49;
            let n = 1 + i % 4;
            let k = 1 + i % dim.min(3);
            random_setup(&mut rng, dim, n, k, 0.1)
        })
        .collect();
    let (cases, worst) = identity_error(&setups, 4)?;
    Ok(CheckOutcome {
        name: "multipoint resolvent identity (random)".into(),
        cases,
        worst,
        tolerance: 1e-10,
    })
}

/// Named Schrödinger setups covering the experiments: affine families in
/// both regimes, two-point families off the affine line, and fitted
/// targets with a residual `g`.
pub fn schrodinger_setups(model: &Model) -> Result<Vec<(String, MultipointSetup)>> {
    let mut out = Vec::new();
    let v1 = model.potential(1)?;
    for alpha in [[-0.3, 0.4, 0.3, 0.6], [-0.4, 0.5, 0.4, 0.7]] {
        for eps in [1e-1, 1e-2, 1e-3] {
            let mut gs = vec![v1.clone()];
            for j in 2..=4 {
                gs.push(v1.add(&model.potential(j)?.scale(eps))?);
            }
            let refs: Vec<&HermitianOperator> = gs.iter().collect();
            let target = HermitianOperator::linear_combination(&alpha, &refs)?;
            let setup = build_setup(model.h0(), &gs, &alpha, &target, model.k, &model.ctx, None)?;
            out.push((format!("affine alpha = {alpha:?}, eps = {eps:e}"), setup));
        }
    }
    let gs = vec![v1.clone(), model.scaled_family(2)?];
    for alpha in [[0.5, 0.5], [0.55, 0.55], [0.3, 0.9], [1.0, 0.0]] {
        let target = HermitianOperator::linear_combination(&alpha, &[&gs[0], &gs[1]])?;
        let setup = build_setup(model.h0(), &gs, &alpha, &target, model.k, &model.ctx, None)?;
        out.push((format!("two-point alpha = {alpha:?}"), setup));
    }
    let extra = model.scaled_family(3)?;
    for beta in [[0.3, 1.2], [0.3, 0.7]] {
        let target = HermitianOperator::linear_combination(&[beta[0], beta[1], 0.05], &[&gs[0], &gs[1], &extra])?;
        for mode in [XiMode::Zero, XiMode::Infinity] {
            let fit = fit_alpha(&gs, &target, mode, model.h0())?;
            let setup = build_setup(model.h0(), &gs, &fit.alpha, &target, model.k, &model.ctx, None)?;
            out.push((format!("fitted beta = {beta:?}, {}", mode.tag()), setup));
        }
    }
    Ok(out)
}

pub fn identity_schrodinger(model: &Model) -> Result<CheckOutcome> {
    let setups: Vec<MultipointSetup> = schrodinger_setups(model)?.into_iter().map(|(_, s)| s).collect();
    let (cases, worst) = identity_error(&setups, 4)?;
    Ok(CheckOutcome {
        name: "multipoint resolvent identity (Schrodinger)".into(),
        cases,
        worst,
        tolerance: 1e-10,
    })
}

/// Closed-form two- and three-resolvent integrals against contour
/// quadrature on 30 random setups, every third one with coincident
/// `lambda^k` across points.
pub fn oracle_integrals(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in 0..30 {
        let dim = 4 + i % 5;
        let k = 1 + i % 2;
        let setup = if i % 3 == 0 {
            coincident_setup(&mut rng, dim, 3, k)
        } else {
            random_setup(&mut rng, dim, 3, k, 0.15)
        };
        let hs = hamiltonians(&setup)?;
        let contour = Contour::from_window(&setup.window);
        let a = random_hermitian(&mut rng, dim, 1.0).into_matrix();
        let b = random_hermitian(&mut rng, dim, 1.0).into_matrix();
        let res = |j: usize, z: Complex64| resolvent(&hs[j], z).expect("contour avoids the spectrum");
        let (p, q, r) = (i % 3, (i + 1) % 3, (i / 3) % 3);
        let oracle = contour_integrate(|z| res(p, z) * &a * res(q, z), &contour, ORACLE_QUADRATURE_TOL)?;
        worst = worst.max(max_abs(&(oracle - integral_i2(&setup, p, q, &a)?)));
        let oracle = contour_integrate(
            |z| res(p, z) * &a * res(q, z) * &b * res(r, z),
            &contour,
            ORACLE_QUADRATURE_TOL,
        )?;
        worst = worst.max(max_abs(&(oracle - integral_i3(&setup, p, q, r, &a, &b)?)));
        cases += 2;
    }
    Ok(CheckOutcome {
        name: "closed-form integrals vs contour quadrature".into(),
        cases,
        worst,
        tolerance: 1e-8,
    })
}

/// Eigen-decomposition projectors against the Cauchy integral of the
/// resolvent, on random operators and on the Schrödinger points.
pub fn oracle_projectors(seed: u64, model: &Model) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed);
    let mut ops: Vec<(HermitianOperator, usize)> = (0..10)
        .map(|i| {
            let dim = 4 + i;
            let h = random_reference(&mut rng, dim, 1.0)
                .add(&random_hermitian(&mut rng, dim, 0.2))
                .expect("same dimension");
            (h, 1 + i % 3)
        })
        .collect();
    for j in 1..=model.schrodinger.potentials.len() {
        ops.push((model.h0().add(model.potential(j)?)?, model.k));
    }
    let mut worst = 0.0f64;
    for (h, k) in &ops {
        let spec = decompose(h, *k)?;
        let contour = default_contour(&spec)?;
        let oracle = contour_integrate(
            |z| resolvent(h, z).expect("off spectrum"),
            &contour,
            ORACLE_QUADRATURE_TOL,
        )?;
        worst = worst.max(max_abs(&(oracle - spec.projector.matrix())));
    }
    Ok(CheckOutcome {
        name: "projector vs Cauchy quadrature".into(),
        cases: ops.len(),
        worst,
        tolerance: 1e-8,
    })
}

/// One point with unit weight: the multipoint levels reduce to the standard
/// partial sums.
pub fn reduction(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let dim = 4 + i;
        let k = 1 + i % 3;
        let setup = random_setup(&mut rng, dim, 1, k, 0.1);
        let setup = setup.retarget(&[1.0], &setup.target)?;
        let expansion = expansion_terms(&setup)?;
        let standard = standard_terms(&setup.points[0].spec, &setup.g, 2)?;
        for level in 0..=2 {
            worst = worst.max(max_abs(&(expansion.level(level)? - standard.partial_sum(level))));
        }
    }
    Ok(CheckOutcome {
        name: "single-point reduction".into(),
        cases: 10,
        worst,
        tolerance: 1e-12,
    })
}

/// Closed-form `K_ij` from `K_j` against the direct spectral sum, for
/// shifts with `|lambda_i - lambda_j| ||K_j|| <= 1/2`.
pub fn kij_recurrence(seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed);
    let mut worst = 0.0f64;
    for i in 0..30 {
        let dim = 4 + i % 7;
        let k = 1 + i % 3;
        let h0 = random_reference(&mut rng, dim, 1.0);
        let h = h0.add(&random_hermitian(&mut rng, dim, 0.3))?;
        let ctx = NormContext::energy(&h0)?;
        let Ok(spec) = decompose(&h, k) else { continue };
        let kj = spec.pseudo_inverse.matrix();
        let weighted = spectral_norm(&(&ctx.weight_minus * kj * &ctx.weight_plus));
        let shift = rng.random_range(-0.5..=0.5) / weighted;
        let lambda_j = spec.eigenvalue();
        let direct = cross_pseudo_inverse(&spec, lambda_j + shift)?;
        let closed = kij_from_kj(&spec.pseudo_inverse, &spec.projector, lambda_j + shift, lambda_j, &ctx)?;
        worst = worst.max(relative(closed.matrix(), direct.matrix()));
    }
    Ok(CheckOutcome {
        name: "K_ij from K_j".into(),
        cases: 30,
        worst,
        tolerance: 1e-10,
    })
}

/// One resolvent-bound comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSample {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
}

/// Max over the contour of `||(z - H(G))^{-1}||_e` against the explicit
/// bound, for every point and target of the Schrödinger setups.
pub fn resolvent_bound_samples(model: &Model) -> Result<Vec<BoundSample>> {
    let mut out = Vec::new();
    for (label, setup) in schrodinger_setups(model)? {
        let contour = Contour::from_window(&setup.window);
        let mut ops: Vec<(String, &HermitianOperator)> = setup
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| (format!("{label}, point {}", j + 1), &p.g))
            .collect();
        ops.push((format!("{label}, target"), &setup.target));
        for (name, g) in ops {
            let h = model.h0().add(g)?;
            let eigs = h.eigenvalues();
            let xi = contour.distance_to_spectrum(&eigs);
            if xi <= SPECTRUM_TOL {
                continue;
            }
            let mut measured = 0.0f64;
            for z in contour.sample_points(32) {
                measured = measured.max(norm_e(&resolvent(&h, z)?, &model.ctx)?);
            }
            let eta = resolvent_bound_shift(model.h0(), g)?;
            let bound = resolvent_bound_rhs(model.ctx.mu, eta, eigs[0], contour.max_abs(), xi)?;
            out.push(BoundSample {
                label: name,
                measured,
                bound,
            });
        }
    }
    Ok(out)
}

pub fn resolvent_bound(model: &Model) -> Result<CheckOutcome> {
    let samples = resolvent_bound_samples(model)?;
    let worst = samples.iter().map(|s| s.measured / s.bound).fold(0.0, f64::max);
    Ok(CheckOutcome {
        name: "resolvent bound (measured / bound)".into(),
        cases: samples.len(),
        worst,
        tolerance: 1.0 + f64::EPSILON,
    })
}

/// Every check, in a fixed order.
pub fn run_all(cfg: &BenchConfig) -> Result<Vec<CheckOutcome>> {
    let model = Model::new(cfg)?;
    let seed = cfg.run.seed;
    Ok(vec![
        identity_random(seed)?,
        identity_schrodinger(&model)?,
        oracle_integrals(seed.wrapping_add(1))?,
        oracle_projectors(seed.wrapping_add(2), &model)?,
        reduction(seed.wrapping_add(3))?,
        kij_recurrence(seed.wrapping_add(4))?,
        resolvent_bound(&model)?,
    ])
}
