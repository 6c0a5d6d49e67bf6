//! Symbolic cost model for applying the approximants to one vector.
//!
//! Costs are polynomials in `n` (number of points) and the unit costs `m`
//! (rank-one application), `p` (perturbation application) and `q`
//! (pseudo-inverse application). A [`CostExpression`] pairs the offline
//! part, done once for fixed points, with the online part paid per target.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use multipoint_core::{term_word_shapes, WordShape};

use crate::BenchError;

/// Variables, in display order.
pub const VARIABLES: [char; 4] = ['n', 'm', 'p', 'q'];

/// Exponents of `(n, m, p, q)`.
pub type Monomial = [u32; 4];

/// Polynomial with integer coefficients in `n, m, p, q`, kept canonical
/// (no zero coefficients).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<Monomial, i64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: i64) -> Self {
        Self::monomial(c, [0; 4])
    }

    pub fn monomial(coef: i64, exps: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if coef != 0 {
            terms.insert(exps, coef);
        }
        Self { terms }
    }

    /// The variable `name` (one of `n, m, p, q`).
    pub fn var(name: char) -> Option<Self> {
        let i = VARIABLES.iter().position(|&v| v == name)?;
        let mut exps = [0; 4];
        exps[i] = 1;
        Some(Self::monomial(1, exps))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &i64)> {
        self.terms.iter()
    }

    pub fn scale(&self, c: i64) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.accumulate(*e, v * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::constant(1), |acc, _| &acc * self)
    }

    fn accumulate(&mut self, exps: Monomial, coef: i64) {
        let entry = self.terms.entry(exps).or_insert(0);
        *entry += coef;
        if *entry == 0 {
            self.terms.remove(&exps);
        }
    }

    /// Replaces `n` by a number.
    pub fn substitute_n(&self, n: u64) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            let factor = i64::try_from(n.pow(e[0])).expect("n^k fits in i64");
            out.accumulate([0, e[1], e[2], e[3]], v * factor);
        }
        out
    }

    /// Value at `(n, m, p, q)`.
    pub fn eval(&self, n: f64, m: f64, p: f64, q: f64) -> f64 {
        let x = [n, m, p, q];
        self.terms
            .iter()
            .map(|(e, &v)| v as f64 * (0..4).map(|i| x[i].powi(e[i] as i32)).product::<f64>())
            .sum()
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        Parser::new(text).parse()
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, v) in &rhs.terms {
            out.accumulate(*e, *v);
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (a, x) in &self.terms {
            for (b, y) in &rhs.terms {
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
                out.accumulate(e, x * y);
            }
        }
        out
    }
}

/// Terms by decreasing total degree, then decreasing powers of `n, m, p, q`.
impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut terms: Vec<(&Monomial, &i64)> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (i, (e, &c)) in terms.iter().enumerate() {
            if c < 0 {
                write!(f, "-")?;
            } else if i > 0 {
                write!(f, "+")?;
            }
            let abs = c.unsigned_abs();
            let constant = e.iter().all(|&x| x == 0);
            if abs != 1 || constant {
                write!(f, "{abs}")?;
            }
            for (v, &x) in VARIABLES.iter().zip(e.iter()) {
                match x {
                    0 => {}
                    1 => write!(f, "{v}")?,
                    _ => write!(f, "{v}^{x}")?,
                }
            }
        }
        Ok(())
    }
}

/// Recursive descent over `expr := term (('+'|'-') term)*`,
/// `term := factor ('*'? factor)*`, `factor := atom ('^' int)?`,
/// `atom := int | n | m | p | q | '(' expr ')'`.
struct Parser<'a> {
    text: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            chars: text.chars().filter(|c| !c.is_whitespace()).collect(),
            pos: 0,
        }
    }

    fn error(&self) -> BenchError {
        BenchError::Parse(self.text.to_string())
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Poly, BenchError> {
        let p = self.expr()?;
        if self.pos != self.chars.len() {
            return Err(self.error());
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<Poly, BenchError> {
        let mut acc = match self.peek() {
            Some('-') => {
                self.pos += 1;
                self.term()?.scale(-1)
            }
            _ => self.term()?,
        };
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let t = self.term()?;
            acc = if c == '+' { &acc + &t } else { &acc - &t };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly, BenchError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = &acc * &self.factor()?;
                }
                Some(c) if c.is_ascii_digit() || c == '(' || VARIABLES.contains(&c) => {
                    acc = &acc * &self.factor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Poly, BenchError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let e = self.integer()?;
            let e = u32::try_from(e).map_err(|_| self.error())?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly, BenchError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => Ok(Poly::constant(self.integer()?)),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error());
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) => {
                let v = Poly::var(c).ok_or_else(|| self.error())?;
                self.pos += 1;
                Ok(v)
            }
            None => Err(self.error()),
        }
    }

    fn integer(&mut self) -> Result<i64, BenchError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().map_err(|_| self.error())
    }
}

/// `(offline, online)` cost pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostExpression {
    pub offline: Poly,
    pub online: Poly,
}

impl CostExpression {
    pub fn new(offline: Poly, online: Poly) -> Self {
        Self { offline, online }
    }

    pub fn parse(offline: &str, online: &str) -> Result<Self, BenchError> {
        Ok(Self::new(Poly::parse(offline)?, Poly::parse(online)?))
    }

    pub fn zero() -> Self {
        Self::new(Poly::zero(), Poly::zero())
    }

    pub fn substitute_n(&self, n: u64) -> Self {
        Self::new(self.offline.substitute_n(n), self.online.substitute_n(n))
    }

    pub fn times(&self, factor: &Poly) -> Self {
        Self::new(&self.offline * factor, &self.online * factor)
    }
}

impl Add for &CostExpression {
    type Output = CostExpression;
    fn add(self, rhs: &CostExpression) -> CostExpression {
        CostExpression::new(&self.offline + &rhs.offline, &self.online + &rhs.online)
    }
}

impl fmt::Display for CostExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.offline, self.online)
    }
}

/// Costs of the standard approximants `PP_0..PP_3` and the multipoint ones
/// `D_0..D_2` (with `s = 1` and `g = 0`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityTables {
    pub standard: [CostExpression; 4],
    pub multipoint: [CostExpression; 3],
}

impl ComplexityTables {
    pub fn substitute_n(&self, n: u64) -> Self {
        Self {
            standard: self.standard.clone().map(|c| c.substitute_n(n)),
            multipoint: self.multipoint.clone().map(|c| c.substitute_n(n)),
        }
    }
}

/// Reference cells: offline and online costs of each order.
const STANDARD_CELLS: [(&str, &str); 4] = [
    ("0", "m"),
    ("0", "2m+2p+2q"),
    ("0", "12m+14p+14q"),
    ("0", "52m+74p+74q"),
];

const MULTIPOINT_CELLS: [(&str, &str); 3] = [("0", "nm"), ("0", "nm"), ("n^3(3m+12p+12q)", "nm(1+6n^2)")];

fn parse_cells<const N: usize>(cells: [(&str, &str); N]) -> [CostExpression; N] {
    cells.map(|(off, on)| CostExpression::parse(off, on).expect("table literals parse"))
}

/// The reference cost tables, symbolic in `n`.
pub fn complexity_tables() -> ComplexityTables {
    ComplexityTables {
        standard: parse_cells(STANDARD_CELLS),
        multipoint: parse_cells(MULTIPOINT_CELLS),
    }
}

/// The reference tables at a given number of points.
pub fn complexity_tables_at(n: u64) -> ComplexityTables {
    complexity_tables().substitute_n(n)
}

fn var(name: char) -> Poly {
    Poly::var(name).expect("known variable")
}

/// Cost of a word whose perturbations are all known only online: every
/// factor acts on the running vector, a projector costs `m`.
pub fn online_word_cost(w: &WordShape) -> CostExpression {
    let online = &(&var('m').scale(w.projectors as i64) + &var('p').scale(w.perturbations as i64))
        + &var('q').scale(w.pseudo_inverse_power as i64);
    CostExpression::new(Poly::zero(), online)
}

/// Cost of a word whose perturbations are all fixed points: everything but
/// the final rank-one application is precomputed.
pub fn offline_word_cost(w: &WordShape) -> CostExpression {
    let offline = &(&var('m').scale(w.projectors.saturating_sub(1) as i64) + &var('p').scale(w.perturbations as i64))
        + &var('q').scale(w.pseudo_inverse_power as i64);
    CostExpression::new(offline, var('m'))
}

fn sum_costs(words: &[WordShape], cost: fn(&WordShape) -> CostExpression) -> CostExpression {
    words.iter().fold(CostExpression::zero(), |acc, w| &acc + &cost(w))
}

/// Cost of the standard term `P_order`.
pub fn standard_term_cost(order: usize) -> Result<CostExpression, BenchError> {
    Ok(sum_costs(&term_word_shapes(order)?, online_word_cost))
}

/// Word shapes of the three-resolvent integral: three words with one
/// projector, three with two; two pseudo-inverse factors and two
/// perturbations each.
pub fn triple_integral_shapes() -> Vec<WordShape> {
    (0..6)
        .map(|i| WordShape {
            sign: if i < 3 { 1.0 } else { -1.0 },
            projectors: if i < 3 { 1 } else { 2 },
            pseudo_inverse_power: 2,
            perturbations: 2,
        })
        .collect()
}

/// Costs derived from the word shapes: standard partial sums, and the
/// multipoint levels when `s = 1`, `g = 0`, where only `D_(0,0,0)` (one
/// projector per point) and `D_(2,0,0)` (one triple integral of fixed
/// perturbations per index triple, `n^3` triples) survive.
pub fn derived_tables() -> Result<ComplexityTables, BenchError> {
    let mut standard = Vec::with_capacity(4);
    let mut acc = CostExpression::zero();
    for order in 0..=3 {
        acc = &acc + &standard_term_cost(order)?;
        standard.push(acc.clone());
    }
    let n = var('n');
    let projector = sum_costs(&term_word_shapes(0)?, offline_word_cost);
    let d0 = projector.times(&n);
    let d200 = sum_costs(&triple_integral_shapes(), offline_word_cost).times(&n.pow(3));
    let d2 = &d0 + &d200;
    Ok(ComplexityTables {
        standard: standard.try_into().expect("four orders"),
        multipoint: [d0.clone(), d0, d2],
    })
}

/// A cell where the derivation and the reference table disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMismatch {
    pub table: &'static str,
    pub order: usize,
    pub reference: CostExpression,
    pub derived: CostExpression,
}

pub fn mismatches() -> Result<Vec<CellMismatch>, BenchError> {
    let reference = complexity_tables();
    let derived = derived_tables()?;
    let mut out = Vec::new();
    for (order, (r, d)) in reference.standard.iter().zip(&derived.standard).enumerate() {
        if r != d {
            out.push(CellMismatch {
                table: "standard",
                order,
                reference: r.clone(),
                derived: d.clone(),
            });
        }
    }
    for (order, (r, d)) in reference.multipoint.iter().zip(&derived.multipoint).enumerate() {
        if r != d {
            out.push(CellMismatch {
                table: "multipoint",
                order,
                reference: r.clone(),
                derived: d.clone(),
            });
        }
    }
    Ok(out)
}

/// Break-even comparisons: the second-order standard online cost against
/// `D_0`, and the fourth-order one (`PP_3`) against `D_2`. Each margin is
/// `standard - multipoint`; the multipoint method is cheaper online when it
/// is nonnegative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crossover {
    pub label: &'static str,
    pub standard: Poly,
    pub multipoint: Poly,
}

impl Crossover {
    pub fn margin(&self) -> Poly {
        &self.standard - &self.multipoint
    }

    pub fn multipoint_cheaper(&self, n: f64, m: f64, p: f64, q: f64) -> bool {
        self.margin().eval(n, m, p, q) >= 0.0
    }
}

/// Crossovers built from the derived online costs.
pub fn crossovers() -> Result<[Crossover; 2], BenchError> {
    let d = derived_tables()?;
    Ok([
        Crossover {
            label: "order 2",
            standard: d.standard[1].online.clone(),
            multipoint: d.multipoint[0].online.clone(),
        },
        Crossover {
            label: "order 4",
            standard: d.standard[3].online.clone(),
            multipoint: d.multipoint[2].online.clone(),
        },
    ])
}
