//! Exact symbolic representation of coefficient functions: rational-weighted
//! sums of products of propagator derivatives and coordinate-difference
//! monomials over labeled points, with canonicalization, exact cancellation
//! and pointwise numeric evaluation.

use std::fmt;
use std::fmt::Write as _;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::basis::{MultiIndex, PointConfig};
use crate::specfun;

/// Argument of a coefficient function: an external point or the distinguished
/// integration variable y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PointLabel {
    External(usize),
    Insertion,
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointLabel::External(i) => write!(f, "x{}", i + 1),
            PointLabel::Insertion => write!(f, "y"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorKind {
    /// (d^w C)(x_a - x_b)
    PropDeriv,
    /// (x_a - x_b)^w
    Monomial,
}

/// A single multiplicative factor. Stored with (a, b) in canonical order; the
/// parity sign (-1)^|w| of an argument swap is absorbed into the term weight
/// at construction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor {
    pub kind: FactorKind,
    pub w: MultiIndex,
    pub a: PointLabel,
    pub b: PointLabel,
}

impl Factor {
    /// Canonicalized factor plus the absorbed parity sign (+1 or -1).
    pub fn new(kind: FactorKind, w: MultiIndex, a: PointLabel, b: PointLabel) -> (Factor, i64) {
        assert_ne!(a, b, "factor arguments must be distinct");
        if a <= b {
            (Factor { kind, w, a, b }, 1)
        } else {
            let sign = if w.order() % 2 == 0 { 1 } else { -1 };
            (Factor { kind, w, a: b, b: a }, sign)
        }
    }

    pub fn prop(a: PointLabel, b: PointLabel) -> Factor {
        Factor::new(FactorKind::PropDeriv, MultiIndex::ZERO, a, b).0
    }

    pub fn depends_on_insertion(&self) -> bool {
        self.a == PointLabel::Insertion || self.b == PointLabel::Insertion
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut derivs = String::new();
        for dir in 0..4 {
            for _ in 0..self.w.0[dir] {
                write!(derivs, "d{}", dir + 1)?;
            }
        }
        match self.kind {
            FactorKind::PropDeriv => {
                if derivs.is_empty() {
                    write!(f, "C({}-{})", self.a, self.b)
                } else {
                    write!(f, "C{{{derivs}}}({}-{})", self.a, self.b)
                }
            }
            FactorKind::Monomial => write!(f, "X{{{derivs}}}({}-{})", self.a, self.b),
        }
    }
}

/// One term: an exact rational weight times a multiset of factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub weight: BigRational,
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn new(weight: BigRational, mut factors: Vec<Factor>) -> Term {
        factors.sort();
        Term { weight, factors }
    }

    pub fn constant(weight: BigRational) -> Term {
        Term { weight, factors: Vec::new() }
    }

    pub fn depends_on_insertion(&self) -> bool {
        self.factors.iter().any(|f| f.depends_on_insertion())
    }
}

/// Canonical sum of terms. Like terms are merged, exact cancellations are
/// removed; the zero expression is the empty term list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoeffExpr {
    terms: Vec<Term>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unresolved point label {0}")]
    UnresolvedLabel(PointLabel),
    #[error("zero separation between {0} and {1} in a propagator factor")]
    ZeroSeparation(PointLabel, PointLabel),
    #[error(transparent)]
    SpecFun(#[from] specfun::SpecFunError),
}

/// Uncancelled y-independent terms found while applying the integral table;
/// such a residue signals a construction bug upstream and is never integrated.
#[derive(Debug, Error)]
#[error("divergent y-independent residue in integrand: {residue}")]
pub struct DivergenceError {
    pub residue: String,
}

impl CoeffExpr {
    pub fn zero() -> CoeffExpr {
        CoeffExpr::default()
    }

    pub fn constant(weight: BigRational) -> CoeffExpr {
        CoeffExpr::from_terms(vec![Term::constant(weight)])
    }

    pub fn one() -> CoeffExpr {
        CoeffExpr::constant(BigRational::one())
    }

    pub fn from_terms(terms: Vec<Term>) -> CoeffExpr {
        let mut terms: Vec<Term> = terms.into_iter().filter(|t| !t.weight.is_zero()).collect();
        terms.sort_by(|a, b| a.factors.cmp(&b.factors));
        let mut merged: Vec<Term> = Vec::new();
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.factors == t.factors => last.weight += t.weight,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| !t.weight.is_zero());
        CoeffExpr { terms: merged }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &CoeffExpr) -> CoeffExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        CoeffExpr::from_terms(terms)
    }

    pub fn sub(&self, other: &CoeffExpr) -> CoeffExpr {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, q: &BigRational) -> CoeffExpr {
        if q.is_zero() {
            return CoeffExpr::zero();
        }
        CoeffExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { weight: &t.weight * q, factors: t.factors.clone() })
                .collect(),
        }
    }

    pub fn multiply(&self, other: &CoeffExpr) -> CoeffExpr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for t1 in &self.terms {
            for t2 in &other.terms {
                let mut factors = t1.factors.clone();
                factors.extend(t2.factors.iter().cloned());
                terms.push(Term::new(&t1.weight * &t2.weight, factors));
            }
        }
        CoeffExpr::from_terms(terms)
    }

    /// Numeric value at a point configuration (and optionally an insertion
    /// point y), with mass m.
    pub fn eval(&self, cfg: &PointConfig, y: Option<&[f64; 4]>, m: f64) -> Result<f64, EvalError> {
        let resolve = |label: PointLabel| -> Result<[f64; 4], EvalError> {
            match label {
                PointLabel::External(i) if i < cfg.len() => Ok(cfg.point(i)),
                PointLabel::Insertion => y.copied().ok_or(EvalError::UnresolvedLabel(label)),
                other => Err(EvalError::UnresolvedLabel(other)),
            }
        };
        let mut total = 0.0;
        for t in &self.terms {
            let mut v = rational_to_f64(&t.weight);
            for f in &t.factors {
                let pa = resolve(f.a)?;
                let pb = resolve(f.b)?;
                let d = [pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2], pa[3] - pb[3]];
                match f.kind {
                    FactorKind::PropDeriv => {
                        if d == [0.0; 4] {
                            return Err(EvalError::ZeroSeparation(f.a, f.b));
                        }
                        v *= specfun::propagator_deriv(&d, m, &f.w)?;
                    }
                    FactorKind::Monomial => {
                        for dir in 0..4 {
                            for _ in 0..f.w.0[dir] {
                                v *= d[dir];
                            }
                        }
                    }
                }
            }
            total += v;
        }
        Ok(total)
    }

    /// Deterministic text form: sorted terms, rational weights as p/q.
    pub fn serialize(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            out.push_str(&t.weight.to_string());
            for f in &t.factors {
                write!(out, " * {f}").unwrap();
            }
        }
        out
    }
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_frac(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

/// A CoeffExpr with labels resolved against a fixed configuration and the
/// weights lowered to f64, for fast pointwise evaluation inside quadrature
/// loops. Only the insertion point y remains free.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    terms: Vec<(f64, Vec<CompiledFactor>)>,
    mass: f64,
}

#[derive(Debug, Clone)]
enum CompiledFactor {
    // PropDeriv/Monomial with one argument equal to y; `fixed` is the other,
    // resolved point, and the difference is sign * (fixed - y)
    Prop { w: MultiIndex, fixed: [f64; 4], sign: f64 },
    Mono { w: MultiIndex, fixed: [f64; 4], sign: f64 },
}

impl CoeffExpr {
    /// Pre-resolves external labels and evaluates every y-free factor once.
    pub fn compile(&self, cfg: &PointConfig, m: f64) -> Result<CompiledExpr, EvalError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut weight = rational_to_f64(&t.weight);
            let mut factors = Vec::new();
            for f in &t.factors {
                match (f.a, f.b) {
                    (PointLabel::External(i), PointLabel::External(j)) => {
                        if i >= cfg.len() || j >= cfg.len() {
                            return Err(EvalError::UnresolvedLabel(f.a.max(f.b)));
                        }
                        let pa = cfg.point(i);
                        let pb = cfg.point(j);
                        let d = [pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2], pa[3] - pb[3]];
                        let v = match f.kind {
                            FactorKind::PropDeriv => specfun::propagator_deriv(&d, m, &f.w)?,
                            FactorKind::Monomial => {
                                let mut v = 1.0;
                                for dir in 0..4 {
                                    for _ in 0..f.w.0[dir] {
                                        v *= d[dir];
                                    }
                                }
                                v
                            }
                        };
                        weight *= v;
                    }
                    (a, b) => {
                        // canonical order puts Insertion second
                        debug_assert_eq!(b, PointLabel::Insertion);
                        let fixed = match a {
                            PointLabel::External(i) if i < cfg.len() => cfg.point(i),
                            other => return Err(EvalError::UnresolvedLabel(other)),
                        };
                        let cf = match f.kind {
                            FactorKind::PropDeriv => {
                                CompiledFactor::Prop { w: f.w, fixed, sign: 1.0 }
                            }
                            FactorKind::Monomial => {
                                CompiledFactor::Mono { w: f.w, fixed, sign: 1.0 }
                            }
                        };
                        factors.push(cf);
                    }
                }
            }
            terms.push((weight, factors));
        }
        Ok(CompiledExpr { terms, mass: m })
    }
}

impl CompiledExpr {
    /// Value at insertion point y. Returns NaN when y hits an external point
    /// inside a propagator factor.
    pub fn eval(&self, y: &[f64; 4]) -> f64 {
        let mut total = 0.0;
        for (weight, factors) in &self.terms {
            let mut v = *weight;
            for f in factors {
                match f {
                    CompiledFactor::Prop { w, fixed, sign } => {
                        let d = [
                            sign * (fixed[0] - y[0]),
                            sign * (fixed[1] - y[1]),
                            sign * (fixed[2] - y[2]),
                            sign * (fixed[3] - y[3]),
                        ];
                        match specfun::propagator_deriv(&d, self.mass, w) {
                            Ok(p) => v *= p,
                            Err(_) => return f64::NAN,
                        }
                    }
                    CompiledFactor::Mono { w, fixed, sign } => {
                        for dir in 0..4 {
                            for _ in 0..w.0[dir] {
                                v *= sign * (fixed[dir] - y[dir]);
                            }
                        }
                    }
                }
            }
            total += v;
        }
        total
    }
}

/// One term of a closed-form y-integral: a rational weight times powers of
/// 1/pi^2 and 1/m^2, an optional K0(m |x_a - x_b|) special, and remaining
/// y-free factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedTerm {
    pub weight: BigRational,
    pub inv_pi2: u32,
    pub inv_m2: u32,
    pub k0: Option<(PointLabel, PointLabel)>,
    pub factors: Vec<Factor>,
}

/// Closed form of int d^4y of a CoeffExpr, produced by the integral table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClosedExpr {
    pub terms: Vec<ClosedTerm>,
}

impl ClosedExpr {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, q: &BigRational) -> ClosedExpr {
        ClosedExpr {
            terms: self
                .terms
                .iter()
                .map(|t| ClosedTerm { weight: &t.weight * q, ..t.clone() })
                .collect(),
        }
    }

    pub fn eval(&self, cfg: &PointConfig, m: f64) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for t in &self.terms {
            let mut v = rational_to_f64(&t.weight);
            v *= std::f64::consts::PI.powi(-2 * t.inv_pi2 as i32);
            v *= m.powi(-2 * t.inv_m2 as i32);
            if let Some((a, b)) = t.k0 {
                let pa = resolve_external(cfg, a)?;
                let pb = resolve_external(cfg, b)?;
                let d = crate::basis::distance(&pa, &pb);
                v *= specfun::bessel_k0(m * d)?;
            }
            if !t.factors.is_empty() {
                let rest = CoeffExpr::from_terms(vec![Term::new(BigRational::one(), t.factors.clone())]);
                v *= rest.eval(cfg, None, m)?;
            }
            total += v;
        }
        Ok(total)
    }

    pub fn serialize(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            out.push_str(&t.weight.to_string());
            if t.inv_pi2 > 0 {
                write!(out, " * pi^-{}", 2 * t.inv_pi2).unwrap();
            }
            if t.inv_m2 > 0 {
                write!(out, " * m^-{}", 2 * t.inv_m2).unwrap();
            }
            if let Some((a, b)) = t.k0 {
                write!(out, " * K0(m|{a}-{b}|)").unwrap();
            }
            for f in &t.factors {
                write!(out, " * {f}").unwrap();
            }
        }
        out
    }
}

fn resolve_external(cfg: &PointConfig, label: PointLabel) -> Result<[f64; 4], EvalError> {
    match label {
        PointLabel::External(i) if i < cfg.len() => Ok(cfg.point(i)),
        other => Err(EvalError::UnresolvedLabel(other)),
    }
}

/// Applies the closed-form integral table to int d^4y of `e`:
///
///   (i)  int d^w C(y - a) d^4y  = 1/m^2 for |w| = 0, else 0;
///   (ii) int C(y - a) C(y - b) d^4y = (1/8 pi^2) K0(m |a - b|).
///
/// Terms with no y-dependence are a divergence diagnostic: they must have
/// cancelled symbolically before integration. Returns `Ok(None)` when some
/// term matches no table pattern (the caller falls back to quadrature).
pub fn integrate_y_symbolic(e: &CoeffExpr) -> Result<Option<ClosedExpr>, DivergenceError> {
    let mut residue: Vec<Term> = Vec::new();
    let mut out = ClosedExpr::default();
    let mut unmatched = false;
    for t in e.terms() {
        let (ydep, yfree): (Vec<Factor>, Vec<Factor>) =
            t.factors.iter().partition(|f| f.depends_on_insertion());
        match ydep.as_slice() {
            [] => residue.push(t.clone()),
            [f] if f.kind == FactorKind::PropDeriv => {
                if f.w.is_zero() {
                    out.terms.push(ClosedTerm {
                        weight: t.weight.clone(),
                        inv_pi2: 0,
                        inv_m2: 1,
                        k0: None,
                        factors: yfree,
                    });
                }
                // |w| > 0 integrates to zero: drop the term
            }
            [f, g]
                if f.kind == FactorKind::PropDeriv
                    && g.kind == FactorKind::PropDeriv
                    && f.w.is_zero()
                    && g.w.is_zero()
                    && other_label(f) != other_label(g) =>
            {
                out.terms.push(ClosedTerm {
                    weight: &t.weight * rat_frac(1, 8),
                    inv_pi2: 1,
                    inv_m2: 0,
                    k0: Some(order_pair(other_label(f), other_label(g))),
                    factors: yfree,
                });
            }
            _ => unmatched = true,
        }
    }
    if !residue.is_empty() {
        let residue_expr = CoeffExpr::from_terms(residue);
        if !residue_expr.is_zero() {
            return Err(DivergenceError { residue: residue_expr.serialize() });
        }
    }
    if unmatched {
        return Ok(None);
    }
    // merge like closed terms
    out.terms
        .sort_by(|a, b| (a.inv_pi2, a.inv_m2, a.k0, a.factors.clone()).cmp(&(b.inv_pi2, b.inv_m2, b.k0, b.factors.clone())));
    let mut merged: Vec<ClosedTerm> = Vec::new();
    for t in out.terms {
        match merged.last_mut() {
            Some(last)
                if last.inv_pi2 == t.inv_pi2
                    && last.inv_m2 == t.inv_m2
                    && last.k0 == t.k0
                    && last.factors == t.factors =>
            {
                last.weight += t.weight;
            }
            _ => merged.push(t),
        }
    }
    merged.retain(|t| !t.weight.is_zero());
    Ok(Some(ClosedExpr { terms: merged }))
}

fn other_label(f: &Factor) -> PointLabel {
    if f.a == PointLabel::Insertion {
        f.b
    } else {
        f.a
    }
}

fn order_pair(a: PointLabel, b: PointLabel) -> (PointLabel, PointLabel) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Magnitude of the largest term weight; used in diagnostics.
pub fn max_weight(e: &CoeffExpr) -> f64 {
    e.terms()
        .iter()
        .map(|t| rational_to_f64(&t.weight.abs()))
        .fold(0.0, f64::max)
}
