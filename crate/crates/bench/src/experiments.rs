//! Convergence sweeps and the `alpha` heatmap on the Schrödinger model.

use multipoint_core::operator::gap_check;
use multipoint_core::schrodinger::parse_potentials;
use multipoint_core::{
    build_setup, builtin_potentials, choose_closest, decompose, expansion_terms, fit_alpha, smallness, standard_terms,
    standard_terms_from, CMat, ClosestRule, DistanceWeight, Error, GapWindow, HermitianOperator, MultipointSetup,
    NormContext, SchrodingerModel, SpectralData, XiMode,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{BenchConfig, ReferenceRule};
use crate::records::ExperimentRecord;
use crate::BenchError;

/// Lattice points per simplex edge used when checking the gap assumption.
pub const GAP_SAMPLES: usize = 3;

type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceKind {
    /// Points `V1 + eps V_j`, target on their affine hull.
    AffineEpsilon,
    /// Two fixed points, `alpha = (1/2 + eps, 1/2 + eps)`.
    AlphaLimit,
    /// Target `b1 G1 + b2 G2 + eps G3'` with fitted `alpha`.
    GLimit,
    /// Ground-state eigenvalue against a fine reference discretization.
    MConvergence,
}

/// The discretized model together with the norms used to measure errors.
#[derive(Debug, Clone)]
pub struct Model {
    pub schrodinger: SchrodingerModel,
    /// `(mu, kappa)` context for smallness parameters and the by-norm rule.
    pub ctx: NormContext,
    /// Energy distance `D_e`, the reported error.
    pub energy: DistanceWeight,
    pub k: usize,
    pub rule: ReferenceRule,
}

impl Model {
    pub fn new(cfg: &BenchConfig) -> Result<Self> {
        Self::with_size(cfg, cfg.run.m)
    }

    /// Same configuration at discretization parameter `m`.
    pub fn with_size(cfg: &BenchConfig, m: usize) -> Result<Self> {
        let specs = match &cfg.potentials {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
                parse_potentials(&text)?
            }
            None => builtin_potentials(),
        };
        let schrodinger = SchrodingerModel::new(m, specs)?;
        let h0 = &schrodinger.h0;
        Ok(Self {
            ctx: NormContext::new(h0, cfg.run.mu, cfg.run.kappa)?,
            energy: DistanceWeight::new(h0, 1.0)?,
            k: cfg.run.k,
            rule: cfg.run.rule,
            schrodinger,
        })
    }

    pub fn h0(&self) -> &HermitianOperator {
        &self.schrodinger.h0
    }

    /// `V_j`, 1-based.
    pub fn potential(&self, j: usize) -> Result<&HermitianOperator> {
        Ok(self.schrodinger.potential(j)?)
    }

    /// `V1 + V_j / 5`, the second point of the two-point studies.
    pub fn scaled_family(&self, j: usize) -> Result<HermitianOperator> {
        Ok(self.potential(1)?.add(&self.potential(j)?.scale(0.2))?)
    }

    pub fn spectral(&self, g: &HermitianOperator) -> Result<SpectralData> {
        Ok(decompose(&self.h0().add(g)?, self.k)?)
    }

    /// Exact projector of `H(g)`.
    pub fn exact(&self, g: &HermitianOperator) -> Result<CMat> {
        Ok(self.spectral(g)?.projector.into_matrix())
    }

    pub fn error(&self, exact: &CMat, approx: &CMat) -> Result<f64> {
        Ok(self.energy.distance(exact, approx)?)
    }
}

/// Runs one convergence study. Records are sorted by the sweep parameter.
pub fn run_convergence(kind: ConvergenceKind, cfg: &BenchConfig) -> Result<Vec<ExperimentRecord>> {
    let model = Model::new(cfg)?;
    let records = match kind {
        ConvergenceKind::AffineEpsilon => affine_epsilon(&model, cfg)?,
        ConvergenceKind::AlphaLimit => alpha_limit(&model, cfg)?,
        ConvergenceKind::GLimit => g_limit(&model, cfg)?,
        ConvergenceKind::MConvergence => m_convergence(cfg)?,
    };
    Ok(sorted(records))
}

fn sorted(mut records: Vec<ExperimentRecord>) -> Vec<ExperimentRecord> {
    records.sort_by(|a, b| {
        a.sweep
            .total_cmp(&b.sweep)
            .then_with(|| a.sweep2.unwrap_or(0.0).total_cmp(&b.sweep2.unwrap_or(0.0)))
    });
    records
}

/// Sweep values in increasing order.
fn ascending(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

fn par_collect<T, F>(items: &[T], f: F) -> Result<Vec<ExperimentRecord>>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<ExperimentRecord>> + Sync + Send,
{
    let chunks = items.par_iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Window shared by the points and the target, or `None` when no window
/// isolates the k-th eigenvalue of all of them on the sampled convex hull
/// of the points.
fn shared_window(model: &Model, setup: &MultipointSetup, target: &SpectralData) -> Option<GapWindow> {
    let mut spectra: Vec<SpectralData> = setup.points.iter().map(|p| p.spec.clone()).collect();
    spectra.push(target.clone());
    let window = GapWindow::from_spectra(&spectra).ok()?;
    let gs: Vec<HermitianOperator> = setup.points.iter().map(|p| p.g.clone()).collect();
    gap_check(model.h0(), &gs, model.k, &window, GAP_SAMPLES).then_some(window)
}

/// The setup with its window widened to cover the target; aborts with a
/// gap violation naming the sample otherwise.
fn with_shared_window(
    model: &Model,
    mut setup: MultipointSetup,
    target: &SpectralData,
    label: &str,
) -> Result<MultipointSetup> {
    setup.window = shared_window(model, &setup, target)
        .ok_or_else(|| Error::GapViolation(format!("no window isolates level {} at {label}", model.k)))?;
    Ok(setup)
}

/// `P0..P{max_order}` records, each with its own reference point.
#[allow(clippy::too_many_arguments)]
fn standard_records(
    model: &Model,
    gs: &[HermitianOperator],
    specs: &[SpectralData],
    target: &HermitianOperator,
    exact: &CMat,
    max_order: usize,
    sweep: f64,
    suffix: &str,
) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::with_capacity(max_order + 1);
    for order in 0..=max_order {
        let rule = match model.rule {
            ReferenceRule::Fair => ClosestRule::Fair {
                exact,
                references: specs,
            },
            ReferenceRule::ByNorm => ClosestRule::ByNorm,
        };
        let j = choose_closest(gs, target, &model.ctx, rule, order)?;
        let expansion = standard_terms(&specs[j], &target.sub(&gs[j])?, order)?;
        let error = model.error(exact, expansion.partial_sum(order))?;
        out.push(ExperimentRecord::new(sweep, format!("P{order}{suffix}"), order, error).with_chosen(j + 1));
    }
    Ok(out)
}

/// `D0..D2` records with the smallness parameters attached.
fn multipoint_records(
    model: &Model,
    setup: &MultipointSetup,
    exact: &CMat,
    sweep: f64,
    suffix: &str,
) -> Result<Vec<ExperimentRecord>> {
    let s = smallness(setup)?;
    let deltas = Some([s.delta_alpha_g, s.delta_alpha, s.delta_g]);
    let expansion = expansion_terms(setup)?;
    (0..3)
        .map(|level| {
            let error = model.error(exact, expansion.level(level)?)?;
            Ok(ExperimentRecord::new(sweep, format!("D{level}{suffix}"), level, error).with_deltas(deltas))
        })
        .collect()
}

fn point_specs(setup: &MultipointSetup) -> (Vec<HermitianOperator>, Vec<SpectralData>) {
    setup.points.iter().map(|p| (p.g.clone(), p.spec.clone())).unzip()
}

fn affine_epsilon(model: &Model, cfg: &BenchConfig) -> Result<Vec<ExperimentRecord>> {
    let alpha = &cfg.affine.alpha;
    if alpha.is_empty() || alpha.len() > model.schrodinger.potentials.len() {
        return Err(BenchError::Config(format!(
            "affine study needs between 1 and {} coefficients, got {}",
            model.schrodinger.potentials.len(),
            alpha.len()
        )));
    }
    let v1 = model.potential(1)?;
    let eps_values = ascending(cfg.affine.eps.values());
    par_collect(&eps_values, |&eps| {
        let mut gs = vec![v1.clone()];
        for j in 2..=alpha.len() {
            gs.push(v1.add(&model.potential(j)?.scale(eps))?);
        }
        let refs: Vec<&HermitianOperator> = gs.iter().collect();
        let target = HermitianOperator::linear_combination(alpha, &refs)?;
        let setup = build_setup(model.h0(), &gs, alpha, &target, model.k, &model.ctx, None)?;
        let target_spec = model.spectral(&target)?;
        let setup = with_shared_window(model, setup, &target_spec, &format!("affine sample eps = {eps:e}"))?;
        let exact = target_spec.projector.into_matrix();
        let (_, specs) = point_specs(&setup);
        let mut out = standard_records(model, &gs, &specs, &target, &exact, 3, eps, "")?;
        out.extend(multipoint_records(model, &setup, &exact, eps, "")?);
        Ok(out)
    })
}

/// Base setup on `G1 = V1`, `G2 = V1 + V2/5` with `alpha = (1/2, 1/2)`.
fn two_point_setup(model: &Model) -> Result<MultipointSetup> {
    let gs = vec![model.potential(1)?.clone(), model.scaled_family(2)?];
    let target = HermitianOperator::linear_combination(&[0.5, 0.5], &[&gs[0], &gs[1]])?;
    Ok(build_setup(
        model.h0(),
        &gs,
        &[0.5, 0.5],
        &target,
        model.k,
        &model.ctx,
        None,
    )?)
}

fn alpha_limit(model: &Model, cfg: &BenchConfig) -> Result<Vec<ExperimentRecord>> {
    let base = two_point_setup(model)?;
    let (gs, specs) = point_specs(&base);
    let eps_values = ascending(cfg.alpha_limit.eps.values());
    par_collect(&eps_values, |&eps| {
        let alpha = [0.5 + eps, 0.5 + eps];
        let target = HermitianOperator::linear_combination(&alpha, &[&gs[0], &gs[1]])?;
        let target_spec = model.spectral(&target)?;
        let setup = base.retarget(&alpha, &target)?;
        let setup = with_shared_window(model, setup, &target_spec, &format!("alpha-limit sample eps = {eps:e}"))?;
        let exact = target_spec.projector.into_matrix();
        let mut out = standard_records(model, &gs, &specs, &target, &exact, 2, eps, "")?;
        out.extend(multipoint_records(model, &setup, &exact, eps, "")?);
        Ok(out)
    })
}

/// Fit modes of the `g`-limit study, in output order.
pub fn xi_modes(finite: f64) -> [XiMode; 3] {
    [XiMode::Zero, XiMode::Finite(finite), XiMode::Infinity]
}

fn g_limit(model: &Model, cfg: &BenchConfig) -> Result<Vec<ExperimentRecord>> {
    let base = two_point_setup(model)?;
    let (gs, specs) = point_specs(&base);
    let extra = model.scaled_family(3)?;
    let eps_values = ascending(cfg.g_limit.eps.values());
    let modes = xi_modes(cfg.g_limit.xi);
    let mut samples = Vec::new();
    for (b, beta) in cfg.g_limit.betas.iter().enumerate() {
        for &eps in &eps_values {
            samples.push((b + 1, *beta, eps));
        }
    }
    par_collect(&samples, |&(b, beta, eps)| {
        let target = HermitianOperator::linear_combination(&[beta[0], beta[1], eps], &[&gs[0], &gs[1], &extra])?;
        let target_spec = model.spectral(&target)?;
        let exact = target_spec.projector.clone().into_matrix();
        let label = format!("g-limit sample b{b}, eps = {eps:e}");
        let mut out = standard_records(model, &gs, &specs, &target, &exact, 2, eps, &format!("-b{b}"))?;
        for mode in modes {
            let fit = fit_alpha(&gs, &target, mode, model.h0())?;
            let setup = with_shared_window(model, base.retarget(&fit.alpha, &target)?, &target_spec, &label)?;
            let suffix = format!("-{}-b{b}", mode.tag());
            out.extend(multipoint_records(model, &setup, &exact, eps, &suffix)?);
        }
        Ok(out)
    })
}

/// Relative error of `lambda^k` for `G = (G1 + G2)/2` against the reference
/// discretization.
fn m_convergence(cfg: &BenchConfig) -> Result<Vec<ExperimentRecord>> {
    let eigenvalue = |m: usize| -> Result<f64> {
        let model = Model::with_size(cfg, m)?;
        let g1 = model.potential(1)?;
        let g = HermitianOperator::linear_combination(&[0.5, 0.5], &[g1, &model.scaled_family(2)?])?;
        Ok(model.spectral(&g)?.eigenvalue())
    };
    let reference = eigenvalue(cfg.mconv.reference_m)?;
    let mut ms = cfg.mconv.m_values.clone();
    ms.sort_unstable();
    ms.par_iter()
        .map(|&m| {
            let err = (eigenvalue(m)? - reference).abs() / reference.abs();
            Ok(ExperimentRecord::new(m as f64, "E", cfg.run.k, err))
        })
        .collect()
}

/// The heatmap over the configured `alpha` grid.
pub fn run_heatmap(cfg: &BenchConfig) -> Result<Vec<ExperimentRecord>> {
    let mut points = Vec::new();
    for a1 in cfg.heatmap.alpha1.values() {
        for a2 in cfg.heatmap.alpha2.values() {
            points.push((a1, a2));
        }
    }
    run_heatmap_at(cfg, &points)
}

/// Heatmap records at explicit `(alpha_1, alpha_2)` points. `sweep` holds
/// `alpha_1` and `sweep2` holds `alpha_2`; `gap_ok` tells whether the
/// shared window isolates the k-th eigenvalue of the target.
pub fn run_heatmap_at(cfg: &BenchConfig, points: &[(f64, f64)]) -> Result<Vec<ExperimentRecord>> {
    let model = Model::new(cfg)?;
    let base = two_point_setup(&model)?;
    let (gs, specs) = point_specs(&base);
    let records = par_collect(points, |&(a1, a2)| {
        let alpha = [a1, a2];
        let target = HermitianOperator::linear_combination(&alpha, &[&gs[0], &gs[1]])?;
        let target_spec = model.spectral(&target)?;
        let gap_ok = shared_window(&model, &base, &target_spec).is_some();
        let exact = target_spec.projector.into_matrix();
        let mut out = standard_records(&model, &gs, &specs, &target, &exact, 2, a1, "")?;
        // s_alpha = 0 leaves the multipoint formula undefined
        match base.retarget(&alpha, &target) {
            Ok(setup) => {
                out.extend(multipoint_records(&model, &setup, &exact, a1, "")?);
                if cfg.heatmap.chained {
                    if let Some(r) = chained(&model, &base, &target, &exact, a1)? {
                        out.push(r);
                    }
                }
            }
            Err(Error::SumAlphaZero(_)) => {}
            Err(e) => return Err(e.into()),
        }
        Ok(out.into_iter().map(|r| r.with_grid(a2, gap_ok)).collect())
    })?;
    Ok(sorted(records))
}

/// Fit `alpha` (no affine penalty), take `D2` at `G' = sum alpha_j G_j`,
/// then correct from `G'` to `G` with second order standard theory built on
/// the dominant eigenvector of `D2`. `None` when the fit has zero sum.
fn chained(
    model: &Model,
    base: &MultipointSetup,
    target: &HermitianOperator,
    exact: &CMat,
    sweep: f64,
) -> Result<Option<ExperimentRecord>> {
    let (gs, _) = point_specs(base);
    let fit = fit_alpha(&gs, target, XiMode::Zero, model.h0())?;
    let refs: Vec<&HermitianOperator> = gs.iter().collect();
    let combo = HermitianOperator::linear_combination(&fit.alpha, &refs)?;
    let setup = match base.retarget(&fit.alpha, &combo) {
        Ok(s) => s,
        Err(Error::SumAlphaZero(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let d2 = expansion_terms(&setup)?.level(2)?.clone();
    let d2 = HermitianOperator::from_hermitian_part(&d2)?;
    let eig = d2.matrix().clone().symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let psi = eig.eigenvectors.column(top).into_owned();

    let h = model.h0().add(&combo)?;
    let dim = h.dim();
    let rayleigh = (psi.adjoint() * h.matrix() * &psi)[(0, 0)].re;
    let p = &psi * psi.adjoint();
    let q = CMat::identity(dim, dim) - &p;
    let shifted: CMat = DMatrix::from_diagonal_element(dim, dim, Complex64::new(rayleigh, 0.0)) - h.matrix() + &p;
    let inv = shifted
        .try_inverse()
        .ok_or(Error::NearSingularCorrection(f64::INFINITY))?;
    let k = &q * inv * &q;
    let correction = target.sub(&combo)?;
    let expansion = standard_terms_from(&p, &k, &correction, 2, None)?;
    let error = model.error(exact, expansion.partial_sum(2))?;
    Ok(Some(ExperimentRecord::new(sweep, "C2", 2, error)))
}
