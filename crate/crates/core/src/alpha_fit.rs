//! Least-squares choice of the weights `alpha` for a target `G`.
//!
//! With `W = (H0 + 1)^{-1/2}` and `A_j = W G_j W`, `B = W G W`, the fit
//! minimizes
//!
//! ```text
//! ||B - sum_j alpha_j A_j||_F^2 / ||B||_F^2 + xi (1 - sum_j alpha_j)^2
//! ```
//!
//! which is quadratic in `alpha`. Dividing by `||B||_F^2` puts the residual on
//! the scale of the relative dual distance, so the penalty weight `xi` is
//! comparable across targets. `xi = 0` is plain least squares, `xi = inf`
//! enforces `sum alpha = 1` with a Lagrange multiplier.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{check_same_dim, DistanceWeight, HermitianOperator};

/// Largest admissible condition number of the weighted Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiMode {
    Zero,
    Finite(f64),
    Infinity,
}

impl Default for XiMode {
    fn default() -> Self {
        XiMode::Finite(1.0)
    }
}

impl XiMode {
    /// Short tag used in method names: `xi0`, `xi1`, `xiinf`.
    pub fn tag(&self) -> String {
        match self {
            XiMode::Zero => "xi0".into(),
            XiMode::Finite(x) => format!("xi{x}"),
            XiMode::Infinity => "xiinf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFitResult {
    pub alpha: Vec<f64>,
    /// Relative dual distance between `G` and `sum alpha_j G_j`.
    pub residual_da: f64,
    pub xi_mode: XiMode,
}

/// Fits `alpha` so that `sum alpha_j G_j` approximates `g` in the weighted
/// Frobenius norm, with the affine penalty selected by `xi_mode`.
pub fn fit_alpha(
    gs: &[HermitianOperator],
    g: &HermitianOperator,
    xi_mode: XiMode,
    h0: &HermitianOperator,
) -> Result<AlphaFitResult> {
    if gs.is_empty() {
        return Err(Error::InvalidArgument("no points to fit".into()));
    }
    let dim = h0.dim();
    check_same_dim(dim, g.dim())?;
    for gj in gs {
        check_same_dim(dim, gj.dim())?;
    }
    if let XiMode::Finite(xi) = xi_mode {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "penalty weight {xi} must be finite and >= 0"
            )));
        }
    }

    let weight = DistanceWeight::new(h0, -1.0)?;
    let w = weight.weight();
    let a: Vec<_> = gs.iter().map(|gj| w * gj.matrix() * w).collect();
    let b = w * g.matrix() * w;
    let n = gs.len();
    let gram = DMatrix::from_fn(n, n, |i, j| a[i].dotc(&a[j]).re);
    let rhs = DVector::from_fn(n, |i, _| a[i].dotc(&b).re);

    let cond = gram_condition(&gram);
    if !(cond < MAX_GRAM_CONDITION) {
        return Err(Error::IllConditionedGram(cond));
    }

    let scale = {
        let nb = b.norm_squared();
        if nb > 0.0 {
            nb
        } else {
            1.0
        }
    };
    let ones = DVector::from_element(n, 1.0);
    let alpha = match xi_mode {
        XiMode::Zero | XiMode::Finite(_) => {
            let xi = match xi_mode {
                XiMode::Finite(x) => x,
                _ => 0.0,
            };
            let lhs = &gram / scale + &ones * ones.transpose() * xi;
            let r = &rhs / scale + &ones * xi;
            solve(lhs, r, cond)?
        }
        XiMode::Infinity => {
            let mut kkt = DMatrix::zeros(n + 1, n + 1);
            kkt.view_mut((0, 0), (n, n)).copy_from(&gram);
            for i in 0..n {
                kkt[(i, n)] = 1.0;
                kkt[(n, i)] = 1.0;
            }
            let mut r = DVector::zeros(n + 1);
            r.rows_mut(0, n).copy_from(&rhs);
            r[n] = 1.0;
            let sol = solve(kkt, r, cond)?;
            sol.rows(0, n).into_owned()
        }
    };
    let alpha: Vec<f64> = alpha.iter().copied().collect();
    let refs: Vec<&HermitianOperator> = gs.iter().collect();
    let combo = HermitianOperator::linear_combination(&alpha, &refs)?;
    let residual_da = match weight.distance(g.matrix(), combo.matrix()) {
        Ok(d) => d,
        Err(Error::BothZero) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(AlphaFitResult {
        alpha,
        residual_da,
        xi_mode,
    })
}

fn gram_condition(gram: &DMatrix<f64>) -> f64 {
    let sv = gram.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn solve(lhs: DMatrix<f64>, rhs: DVector<f64>, cond: f64) -> Result<DVector<f64>> {
    lhs.lu().solve(&rhs).ok_or(Error::IllConditionedGram(cond))
}
