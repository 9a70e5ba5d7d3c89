//! Multi-index arithmetic, the composite-operator basis, point configurations
//! and model parameters.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// A 4-dimensional derivative multi-index `w`, one component per Euclidean
/// direction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub [u8; 4]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; 4]);

    pub fn unit(direction: usize) -> Self {
        assert!(direction < 4);
        let mut c = [0u8; 4];
        c[direction] = 1;
        MultiIndex(c)
    }

    /// |w| = sum of components.
    pub fn order(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }

    /// w! = product of component factorials.
    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&c| factorial(c as u64)).product()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut c = [0u8; 4];
        for i in 0..4 {
            c[i] = self.0[i] + other.0[i];
        }
        MultiIndex(c)
    }

    /// Componentwise difference, or `None` if any component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        let mut c = [0u8; 4];
        for i in 0..4 {
            c[i] = self.0[i].checked_sub(other.0[i])?;
        }
        Some(MultiIndex(c))
    }

    /// All multi-indices with |w| = order, in canonical order.
    pub fn with_order(order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for a in 0..=order {
            for b in 0..=(order - a) {
                for c in 0..=(order - a - b) {
                    let d = order - a - b - c;
                    out.push(MultiIndex([a as u8, b as u8, c as u8, d as u8]));
                }
            }
        }
        out.sort();
        out
    }
}

// Graded order: lower |w| first, ties broken so that d1 < d2 < d3 < d4.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| {
                let a: Vec<u8> = self.0.iter().rev().cloned().collect();
                let b: Vec<u8> = other.0.iter().rev().cloned().collect();
                a.cmp(&b)
            })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

/// Multinomial weight (v1+...+vr)! / (v1! ... vr!) for a list of multi-indices,
/// taken componentwise over the four directions.
pub fn multinomial_weight(parts: &[MultiIndex]) -> u64 {
    let mut weight = 1u64;
    for dir in 0..4 {
        let total: u64 = parts.iter().map(|p| p.0[dir] as u64).sum();
        let mut num = factorial(total);
        for p in parts {
            num /= factorial(p.0[dir] as u64);
        }
        weight *= num;
    }
    weight
}

/// A composite operator `d^{w1} phi ... d^{wn} phi`. The empty factor list is
/// the identity operator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositeOp {
    factors: Vec<MultiIndex>,
}

impl CompositeOp {
    /// Builds the operator from an arbitrary factor list, sorting it into
    /// canonical order.
    pub fn new(mut factors: Vec<MultiIndex>) -> Self {
        factors.sort();
        CompositeOp { factors }
    }

    pub fn identity() -> Self {
        CompositeOp { factors: Vec::new() }
    }

    /// phi^n with no derivatives.
    pub fn phi_power(n: usize) -> Self {
        CompositeOp { factors: vec![MultiIndex::ZERO; n] }
    }

    /// The interaction operator phi^4.
    pub fn interaction() -> Self {
        Self::phi_power(4)
    }

    pub fn factors(&self) -> &[MultiIndex] {
        &self.factors
    }

    /// Number of field factors n.
    pub fn num_fields(&self) -> usize {
        self.factors.len()
    }

    /// Canonical dimension [A] = n + sum |w_i|.
    pub fn dimension(&self) -> u32 {
        self.factors.len() as u32 + self.factors.iter().map(|w| w.order()).sum::<u32>()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_even(&self) -> bool {
        self.factors.len() % 2 == 0
    }
}

impl fmt::Display for CompositeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.factors.len() {
            let w = self.factors[i];
            let mut count = 1;
            while i + count < self.factors.len() && self.factors[i + count] == w {
                count += 1;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            for dir in 0..4 {
                for _ in 0..w.0[dir] {
                    write!(f, "d{}", dir + 1)?;
                }
            }
            write!(f, "phi")?;
            if count > 1 {
                write!(f, "^{}", count)?;
            }
            i += count;
        }
        Ok(())
    }
}

/// All canonical even-field-count operators with dimension <= `max_dim`,
/// sorted by (dimension, canonical order). Includes the identity.
pub fn enumerate_basis(max_dim: u32) -> Vec<CompositeOp> {
    let mut out = Vec::new();
    let mut n = 0usize;
    while (n as u32) <= max_dim {
        let deriv_budget = max_dim - n as u32;
        let mut partial: Vec<MultiIndex> = Vec::new();
        collect_factor_lists(n, deriv_budget, None, &mut partial, &mut out);
        n += 2;
    }
    out.sort_by_key(|op| (op.dimension(), op.clone()));
    out
}

// Canonical operators of BOTH field parities with dimension <= max_dim. The
// counter-term sums range over these: an odd source operator pairs with odd
// intermediate operators even though physical (even) coefficients are the
// only exposed targets.
pub(crate) fn enumerate_all_parities(max_dim: u32) -> Vec<CompositeOp> {
    let mut out = Vec::new();
    for n in 0..=(max_dim as usize) {
        let deriv_budget = max_dim - n as u32;
        let mut partial: Vec<MultiIndex> = Vec::new();
        collect_factor_lists(n, deriv_budget, None, &mut partial, &mut out);
    }
    out.sort_by_key(|op| (op.dimension(), op.clone()));
    out
}

// Non-decreasing factor lists of the given length with total derivative order
// within budget.
fn collect_factor_lists(
    remaining: usize,
    budget: u32,
    min_factor: Option<MultiIndex>,
    partial: &mut Vec<MultiIndex>,
    out: &mut Vec<CompositeOp>,
) {
    if remaining == 0 {
        out.push(CompositeOp { factors: partial.clone() });
        return;
    }
    for order in 0..=budget {
        for w in MultiIndex::with_order(order) {
            if let Some(min) = &min_factor {
                if w < *min {
                    continue;
                }
            }
            partial.push(w);
            collect_factor_lists(remaining - 1, budget - order, Some(w), partial, out);
            partial.pop();
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("point configuration needs at least one point")]
    Empty,
    #[error("points {0} and {1} coincide")]
    CoincidentPoints(usize, usize),
    #[error("base index {0} out of range for {1} points")]
    BadBase(usize, usize),
    #[error("mass must be positive, got {0}")]
    BadMass(f64),
}

/// An ordered list of pairwise distinct points in R^4, with a distinguished
/// base point (the expansion point; by convention the last one).
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    points: Vec<[f64; 4]>,
    base: usize,
}

impl PointConfig {
    pub fn new(points: Vec<[f64; 4]>) -> Result<Self, ConfigError> {
        let base = points.len().checked_sub(1).ok_or(ConfigError::Empty)?;
        Self::with_base(points, base)
    }

    pub fn with_base(points: Vec<[f64; 4]>, base: usize) -> Result<Self, ConfigError> {
        if points.is_empty() {
            return Err(ConfigError::Empty);
        }
        if base >= points.len() {
            return Err(ConfigError::BadBase(base, points.len()));
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if distance(&points[i], &points[j]) == 0.0 {
                    return Err(ConfigError::CoincidentPoints(i, j));
                }
            }
        }
        Ok(PointConfig { points, base })
    }

    pub fn points(&self) -> &[[f64; 4]] {
        &self.points
    }

    pub fn point(&self, i: usize) -> [f64; 4] {
        self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                min = min.min(distance(&self.points[i], &self.points[j]));
            }
        }
        min
    }

    pub fn diameter(&self) -> f64 {
        let mut max: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                max = max.max(distance(&self.points[i], &self.points[j]));
            }
        }
        max
    }

    pub fn translated(&self, shift: [f64; 4]) -> PointConfig {
        let points = self
            .points
            .iter()
            .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2], p[3] + shift[3]])
            .collect();
        PointConfig { points, base: self.base }
    }

    pub fn scaled(&self, lambda: f64) -> PointConfig {
        let points = self
            .points
            .iter()
            .map(|p| [p[0] * lambda, p[1] * lambda, p[2] * lambda, p[3] * lambda])
            .collect();
        PointConfig { points, base: self.base }
    }
}

pub fn distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

/// Model parameters: the mass scale. The coupling is tracked only as a formal
/// expansion order, and all lengths are internally in units of 1/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mass: f64,
}

impl ModelParams {
    pub fn new(mass: f64) -> Result<Self, ConfigError> {
        if !(mass > 0.0) {
            return Err(ConfigError::BadMass(mass));
        }
        Ok(ModelParams { mass })
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { mass: 1.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("operator spec parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

/// Parses the operator-spec grammar:
///
/// ```text
/// op     := "1" | factor ("*" factor)*
/// factor := deriv* "phi" ("^" int)?
/// deriv  := "d" int          # direction in 1..4
/// ```
///
/// Examples: `phi^4`, `phi*d1phi`, `d1d1phi*phi`. The result is canonical.
pub fn parse_op(input: &str) -> Result<CompositeOp, ParseError> {
    let s = input.trim();
    let bytes = s.as_bytes();
    if s == "1" {
        return Ok(CompositeOp::identity());
    }
    let err = |position: usize, message: &str| ParseError { position, message: message.into() };
    if s.is_empty() {
        return Err(err(0, "empty operator spec"));
    }
    let mut factors = Vec::new();
    let mut pos = 0usize;
    loop {
        // deriv* prefix
        let mut w = MultiIndex::ZERO;
        while pos < bytes.len() && bytes[pos] == b'd' {
            pos += 1;
            if pos >= bytes.len() || !bytes[pos].is_ascii_digit() {
                return Err(err(pos, "expected direction digit after 'd'"));
            }
            let dir = (bytes[pos] - b'0') as usize;
            if !(1..=4).contains(&dir) {
                return Err(err(pos, "direction must be in 1..4"));
            }
            w.0[dir - 1] += 1;
            pos += 1;
        }
        if !s[pos..].starts_with("phi") {
            return Err(err(pos, "expected 'phi'"));
        }
        pos += 3;
        let mut count = 1usize;
        if pos < bytes.len() && bytes[pos] == b'^' {
            pos += 1;
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(err(pos, "expected exponent after '^'"));
            }
            count = s[start..pos]
                .parse()
                .map_err(|_| err(start, "exponent out of range"))?;
            if count == 0 {
                return Err(err(start, "exponent must be positive"));
            }
        }
        for _ in 0..count {
            factors.push(w);
        }
        if pos == bytes.len() {
            break;
        }
        if bytes[pos] != b'*' {
            return Err(err(pos, "expected '*' or end of input"));
        }
        pos += 1;
    }
    Ok(CompositeOp::new(factors))
}
