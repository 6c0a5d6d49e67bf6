//! Single-point density-matrix perturbation theory.
//!
//! Around a reference point with projector `P` and pseudo-inverse `K`, the
//! projector of `H(G_ref + g)` expands as `P_0 + P_1 + P_2 + P_3 + ...`,
//! each term being a signed sum of words `X_0 g X_1 g ... g X_l` with
//! `X_i` in `{P, K, K^2, K^3}`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{check_same_dim, norm_e, CMat, HermitianOperator, NormContext, SpectralData};

/// Highest implemented order.
pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    P,
    K,
    K2,
    K3,
}

use Factor::{K, K2, K3, P};

/// `P_2`: three positive words, three negative ones.
const ORDER_2: [(f64, [Factor; 3]); 6] = [
    (1.0, [P, K, K]),
    (1.0, [K, P, K]),
    (1.0, [K, K, P]),
    (-1.0, [P, P, K2]),
    (-1.0, [P, K2, P]),
    (-1.0, [K2, P, P]),
];

/// `P_3`: twenty words, grouped as in the usual display.
const ORDER_3: [(f64, [Factor; 4]); 20] = [
    (1.0, [P, P, P, K3]),
    (1.0, [P, P, K3, P]),
    (1.0, [P, K3, P, P]),
    (1.0, [K3, P, P, P]),
    (1.0, [P, K, K, K]),
    (1.0, [K, P, K, K]),
    (1.0, [K, K, P, K]),
    (1.0, [K, K, K, P]),
    (-1.0, [P, P, K2, K]),
    (-1.0, [P, P, K, K2]),
    (-1.0, [K, K2, P, P]),
    (-1.0, [K2, K, P, P]),
    (-1.0, [P, K, K2, P]),
    (-1.0, [P, K2, K, P]),
    (-1.0, [P, K, P, K2]),
    (-1.0, [P, K2, P, K]),
    (-1.0, [K, P, K2, P]),
    (-1.0, [K2, P, K, P]),
    (-1.0, [K, P, P, K2]),
    (-1.0, [K2, P, P, K]),
];

/// Terms `P_0..P_l` and partial sums `PP_0..PP_l` about one reference point.
#[derive(Debug, Clone)]
pub struct StandardExpansion {
    pub reference_index: Option<usize>,
    pub terms: Vec<CMat>,
    pub partial_sums: Vec<CMat>,
}

impl StandardExpansion {
    /// Highest order present.
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// Partial sum up to `order`.
    pub fn partial_sum(&self, order: usize) -> &CMat {
        &self.partial_sums[order]
    }
}

/// Shape of one word of a term: sign, number of `P` factors, total power
/// of `K`, and number of perturbation factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordShape {
    pub sign: f64,
    pub projectors: usize,
    pub pseudo_inverse_power: usize,
    pub perturbations: usize,
}

fn shape(sign: f64, factors: &[Factor]) -> WordShape {
    let mut projectors = 0;
    let mut power = 0;
    for f in factors {
        match f {
            P => projectors += 1,
            K => power += 1,
            K2 => power += 2,
            K3 => power += 3,
        }
    }
    WordShape {
        sign,
        projectors,
        pseudo_inverse_power: power,
        perturbations: factors.len() - 1,
    }
}

/// Word shapes of the term of the given order.
pub fn term_word_shapes(order: usize) -> Result<Vec<WordShape>> {
    Ok(match order {
        0 => vec![shape(1.0, &[P])],
        1 => vec![shape(1.0, &[P, K]), shape(1.0, &[K, P])],
        2 => ORDER_2.iter().map(|(s, w)| shape(*s, w)).collect(),
        3 => ORDER_3.iter().map(|(s, w)| shape(*s, w)).collect(),
        _ => return Err(Error::UnsupportedOrder(order)),
    })
}

struct Powers<'a> {
    p: &'a CMat,
    k: &'a CMat,
    k2: CMat,
    k3: CMat,
}

impl Powers<'_> {
    fn get(&self, f: Factor) -> &CMat {
        match f {
            P => self.p,
            K => self.k,
            K2 => &self.k2,
            K3 => &self.k3,
        }
    }

    /// `X_0 g X_1 g ... g X_l`.
    fn word(&self, factors: &[Factor], g: &CMat) -> CMat {
        let mut acc = self.get(factors[0]).clone();
        for &f in &factors[1..] {
            acc = acc * g * self.get(f);
        }
        acc
    }
}

/// Expansion of the projector of `H(G_ref + g)` around `reference` up to
/// `max_order <= 3`.
pub fn standard_terms(reference: &SpectralData, g: &HermitianOperator, max_order: usize) -> Result<StandardExpansion> {
    check_same_dim(reference.dim(), g.dim())?;
    standard_terms_from(
        reference.projector.matrix(),
        reference.pseudo_inverse.matrix(),
        g,
        max_order,
        reference.source_index,
    )
}

/// Same expansion from an explicit projector `p` and pseudo-inverse `k`,
/// for references that do not come from a full decomposition.
pub fn standard_terms_from(
    p: &CMat,
    k: &CMat,
    g: &HermitianOperator,
    max_order: usize,
    reference_index: Option<usize>,
) -> Result<StandardExpansion> {
    if max_order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(max_order));
    }
    check_same_dim(p.nrows(), g.dim())?;
    check_same_dim(k.nrows(), g.dim())?;
    let k2 = k * k;
    let k3 = &k2 * k;
    let pw = Powers { p, k, k2, k3 };
    let g = g.matrix();

    let mut terms = vec![p.clone()];
    if max_order >= 1 {
        terms.push(p * g * k + k * g * p);
    }
    if max_order >= 2 {
        terms.push(signed_sum(&pw, g, &ORDER_2));
    }
    if max_order >= 3 {
        terms.push(signed_sum(&pw, g, &ORDER_3));
    }
    let mut partial_sums = Vec::with_capacity(terms.len());
    for t in &terms {
        let next = match partial_sums.last() {
            Some(prev) => prev + t,
            None => t.clone(),
        };
        partial_sums.push(next);
    }
    Ok(StandardExpansion {
        reference_index,
        terms,
        partial_sums,
    })
}

fn signed_sum<const N: usize>(pw: &Powers<'_>, g: &CMat, words: &[(f64, [Factor; N])]) -> CMat {
    let dim = g.nrows();
    let mut acc = CMat::zeros(dim, dim);
    for (sign, factors) in words {
        acc += pw.word(factors, g) * Complex64::new(*sign, 0.0);
    }
    acc
}

/// How to pick the single reference point for standard perturbation theory.
#[derive(Debug, Clone, Copy)]
pub enum ClosestRule<'a> {
    /// Smallest `||G - G_i||_e`.
    ByNorm,
    /// Smallest actual error `||F(G) - PP_l^i||_e`; needs the exact
    /// projector and the spectral data of each candidate.
    Fair {
        exact: &'a CMat,
        references: &'a [SpectralData],
    },
}

/// Index (0-based) of the reference point selected by `rule`; ties go to the
/// smallest index.
pub fn choose_closest(
    gs: &[HermitianOperator],
    g: &HermitianOperator,
    ctx: &NormContext,
    rule: ClosestRule<'_>,
    order: usize,
) -> Result<usize> {
    if gs.is_empty() {
        return Err(Error::InvalidArgument("no reference points".into()));
    }
    let scores: Vec<f64> = match rule {
        ClosestRule::ByNorm => gs
            .iter()
            .map(|gi| norm_e(&(g.matrix() - gi.matrix()), ctx))
            .collect::<Result<_>>()?,
        ClosestRule::Fair { exact, references } => {
            if references.len() != gs.len() {
                return Err(Error::DimensionMismatch {
                    expected: gs.len(),
                    found: references.len(),
                });
            }
            gs.iter()
                .zip(references)
                .map(|(gi, spec)| {
                    let exp = standard_terms(spec, &g.sub(gi)?, order)?;
                    norm_e(&(exact - exp.partial_sum(order)), ctx)
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(argmin_first(&scores))
}

pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}
