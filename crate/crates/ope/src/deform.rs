//! The deformation recursion: assemble the counter-term-subtracted integrand
//! over the insertion point y and drive the order-(r+1) coefficient
//! computation.
//!
//! The order-(r+1) coefficient is -1/(4!(r+1)) times the d^4y integral of
//!
//!   main - uv - ir
//!
//! where main carries an extra phi^4 insertion at y, the uv counter-terms
//! subtract the singular behaviour of main as y approaches each source point
//! x_i (sums over intermediate operators C with [C] <= [A_i]), and the ir
//! counter-terms subtract the non-decaying behaviour at large |y| (sum over
//! [C] < [B]). All y-independent terms cancel exactly in rational arithmetic
//! before any integration is attempted; a nonzero residue is surfaced as an
//! error because it signals a construction bug, never silently integrated.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::basis::{self, CompositeOp, ConfigError, ModelParams, PointConfig};
use crate::expr::{
    integrate_y_symbolic, rat_frac, ClosedExpr, CoeffExpr, CompiledExpr, DivergenceError,
    EvalError, PointLabel,
};
pub use crate::quad::NumericCoeff;
use crate::quad::{self, QuadError, QuadPlan};
use crate::wick::{self, LabeledOp};

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("expected {ops} source operators but the configuration has {points} points")]
    OpPointMismatch { ops: usize, points: usize },
    #[error("perturbation order {0} not supported (maximum is 2)")]
    OrderUnsupported(u32),
    #[error("no symbolic closed form for this integrand; use the numeric method")]
    SymbolicUnavailable,
    #[error("y-independent terms failed to cancel; residue: {0}")]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("quadrature evaluation budget exhausted before convergence")]
    Budget,
    #[error("nested order-1 evaluation failed: {0}")]
    Inner(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Symbolic,
    Numeric,
    Auto,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "symbolic" => Ok(Method::Symbolic),
            "numeric" => Ok(Method::Numeric),
            "auto" => Ok(Method::Auto),
            other => Err(format!("unknown method `{other}` (expected symbolic|numeric|auto)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Symbolic => "symbolic",
            Method::Numeric => "numeric",
            Method::Auto => "auto",
        })
    }
}

/// Numeric knobs threaded through `coefficient`.
#[derive(Debug, Clone)]
pub struct ComputeOptions {
    /// ball radius as a fraction of the minimum pairwise distance
    pub rho_frac: Option<f64>,
    pub r_far: Option<f64>,
    pub rel_tol: f64,
    pub max_evals: usize,
    pub angular_order: usize,
    /// outer Monte Carlo samples for the order-2 path
    pub mc_samples: usize,
    pub seed: u64,
    /// keep a quadrature value whose evaluation budget ran out instead of
    /// failing; only the nested order-2 path turns this on
    pub accept_unconverged: bool,
}

impl Default for ComputeOptions {
    fn default() -> Self {
        ComputeOptions {
            rho_frac: None,
            r_far: None,
            rel_tol: 1e-5,
            max_evals: 100_000_000,
            angular_order: 16,
            mc_samples: 64,
            seed: 1,
            accept_unconverged: false,
        }
    }
}

impl ComputeOptions {
    /// Coarse settings for the inner order-1 quadratures of the order-2 path.
    fn inner(&self) -> ComputeOptions {
        ComputeOptions {
            rho_frac: None,
            r_far: None,
            rel_tol: self.rel_tol.max(3e-3),
            max_evals: 4_000_000,
            angular_order: 6,
            mc_samples: 0,
            seed: self.seed,
            accept_unconverged: true,
        }
    }

    fn plan(&self, points: &[[f64; 4]], mass: f64) -> QuadPlan {
        let mut plan = QuadPlan::for_points(points, mass);
        if let Some(frac) = self.rho_frac {
            let min = points
                .iter()
                .enumerate()
                .flat_map(|(i, a)| points[i + 1..].iter().map(move |b| basis::distance(a, b)))
                .fold(f64::INFINITY, f64::min);
            if min.is_finite() {
                plan.rho = frac * min;
            }
        }
        if let Some(r_far) = self.r_far {
            plan.r_far = r_far;
        }
        plan.rel_tol = self.rel_tol;
        plan.max_evals = self.max_evals;
        plan.angular_order = self.angular_order;
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffKey {
    pub ops: Vec<CompositeOp>,
    pub target: CompositeOp,
    pub order: u32,
}

/// A computed coefficient: exact at order 0, closed-form or quadrature at
/// order >= 1.
#[derive(Debug, Clone)]
pub enum CoeffValue {
    /// exact symbolic function of the external points (order 0)
    Exact(CoeffExpr),
    /// closed form built from the symbolic integral table (order >= 1)
    Closed(ClosedExpr),
    Numeric(NumericCoeff),
}

impl CoeffValue {
    pub fn eval(&self, cfg: &PointConfig, mass: f64) -> Result<f64, EvalError> {
        match self {
            CoeffValue::Exact(e) => e.eval(cfg, None, mass),
            CoeffValue::Closed(c) => c.eval(cfg, mass),
            CoeffValue::Numeric(n) => Ok(n.value),
        }
    }

    pub fn abs_error(&self) -> f64 {
        match self {
            CoeffValue::Numeric(n) => n.abs_error_estimate,
            _ => 0.0,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        !matches!(self, CoeffValue::Numeric(_))
    }

    pub fn serialize(&self) -> String {
        match self {
            CoeffValue::Exact(e) => e.serialize(),
            CoeffValue::Closed(c) => c.serialize(),
            CoeffValue::Numeric(n) => format!("{:.16e} +- {:.16e}", n.value, n.abs_error_estimate),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoeffEntry {
    pub key: CoeffKey,
    pub value: CoeffValue,
    /// order-2 results are nested Monte Carlo estimates
    pub experimental: bool,
    /// counter-term channels kept by the counting pruner that evaluated to
    /// zero anyway
    pub audit: Vec<String>,
}

/// Per-configuration cache of coefficients keyed by (ops, target, order).
#[derive(Debug, Default)]
pub struct CoeffTable {
    entries: Vec<(CoeffKey, CoeffEntry)>,
}

impl CoeffTable {
    pub fn new() -> CoeffTable {
        CoeffTable::default()
    }

    pub fn get(&self, key: &CoeffKey) -> Option<&CoeffEntry> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }

    pub fn insert(&mut self, entry: CoeffEntry) {
        if self.get(&entry.key).is_none() {
            self.entries.push((entry.key.clone(), entry));
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CoeffEntry> {
        self.entries.iter().map(|(_, e)| e)
    }
}

/// `ops` extended by `order` interaction insertions still cannot contract to
/// `target` for any pairing count.
pub fn vanishes_at_order(ops: &[CompositeOp], target: &CompositeOp, order: u32) -> bool {
    let mut with_l = ops.to_vec();
    for _ in 0..order {
        with_l.push(CompositeOp::interaction());
    }
    wick::vanishes_by_counting(&with_l, target)
}

/// The three-part integrand of the recursion bracket at input order r. At
/// r=0 each part is an exact expression; at r=1 the parts contain nested
/// order-1 sub-evaluations and can only be sampled numerically.
pub enum Integrand {
    Order0 {
        main: CoeffExpr,
        uv: CoeffExpr,
        ir: CoeffExpr,
        audit: Vec<String>,
    },
    Order1(Box<Nested>),
}

impl Integrand {
    pub fn order(&self) -> u32 {
        match self {
            Integrand::Order0 { .. } => 0,
            Integrand::Order1(_) => 1,
        }
    }

    pub fn audit(&self) -> &[String] {
        match self {
            Integrand::Order0 { audit, .. } => audit,
            Integrand::Order1(n) => &n.audit,
        }
    }

    /// main - uv - ir as a single exact expression (order-0 integrands only).
    pub fn assembled(&self) -> Option<CoeffExpr> {
        match self {
            Integrand::Order0 { main, uv, ir, .. } => Some(main.sub(uv).sub(ir)),
            Integrand::Order1(_) => None,
        }
    }

    /// (main, uv, ir) at the insertion point y.
    pub fn eval_parts(
        &self,
        cfg: &PointConfig,
        y: &[f64; 4],
        mass: f64,
    ) -> Result<(f64, f64, f64), CoeffError> {
        match self {
            Integrand::Order0 { main, uv, ir, .. } => Ok((
                main.eval(cfg, Some(y), mass)?,
                uv.eval(cfg, Some(y), mass)?,
                ir.eval(cfg, Some(y), mass)?,
            )),
            Integrand::Order1(n) => n.eval_parts(y),
        }
    }

    pub fn eval(&self, cfg: &PointConfig, y: &[f64; 4], mass: f64) -> Result<f64, CoeffError> {
        let (main, uv, ir) = self.eval_parts(cfg, y, mass)?;
        Ok(main - uv - ir)
    }
}

/// Assemble the recursion bracket for `ops` -> `target` at input order `r`.
/// Lower-order entries are computed on demand and cached in `table`.
pub fn build_integrand(
    ops: &[CompositeOp],
    points: &PointConfig,
    target: &CompositeOp,
    r: u32,
    params: &ModelParams,
    opts: &ComputeOptions,
    table: &mut CoeffTable,
) -> Result<Integrand, CoeffError> {
    if ops.len() != points.len() {
        return Err(CoeffError::OpPointMismatch { ops: ops.len(), points: points.len() });
    }
    match r {
        0 => build_order0(ops, points, target),
        1 => Ok(Integrand::Order1(Box::new(build_nested(
            ops, points, target, params, opts, table,
        )?))),
        _ => Err(CoeffError::OrderUnsupported(r + 1)),
    }
}

fn interaction_labeled() -> LabeledOp {
    LabeledOp::new(CompositeOp::interaction(), PointLabel::Insertion)
}

fn replaced(ops: &[CompositeOp], i: usize, c: &CompositeOp) -> Vec<CompositeOp> {
    let mut out = ops.to_vec();
    out[i] = c.clone();
    out
}

fn build_order0(
    ops: &[CompositeOp],
    points: &PointConfig,
    target: &CompositeOp,
) -> Result<Integrand, CoeffError> {
    let base = points.base();
    let mut audit = Vec::new();

    let mut labeled = vec![interaction_labeled()];
    for (i, op) in ops.iter().enumerate() {
        labeled.push(LabeledOp::new(op.clone(), PointLabel::External(i)));
    }
    let main = wick::zeroth_order(&labeled, target, PointLabel::External(base));

    let mut uv = CoeffExpr::zero();
    for (i, op) in ops.iter().enumerate() {
        for c in basis::enumerate_all_parities(op.dimension()) {
            if wick::vanishes_by_counting(
                &[CompositeOp::interaction(), op.clone()],
                &c,
            ) || vanishes_at_order(&replaced(ops, i, &c), target, 0)
            {
                continue;
            }
            let first = wick::zeroth_order(
                &[
                    interaction_labeled(),
                    LabeledOp::new(op.clone(), PointLabel::External(i)),
                ],
                &c,
                PointLabel::External(i),
            );
            let second = wick::zeroth_order_external(&replaced(ops, i, &c), target, base);
            let product = first.multiply(&second);
            if product.is_zero() {
                audit.push(format!("uv i={i} C={c}: kept by counting, identically zero"));
            } else {
                uv = uv.add(&product);
            }
        }
    }

    let mut ir = CoeffExpr::zero();
    for c in basis::enumerate_all_parities(target.dimension().saturating_sub(1)) {
        if target.dimension() == 0 {
            break;
        }
        if c.dimension() >= target.dimension() {
            continue;
        }
        if vanishes_at_order(ops, &c, 0)
            || wick::vanishes_by_counting(&[CompositeOp::interaction(), c.clone()], target)
        {
            continue;
        }
        let first = wick::zeroth_order_external(ops, &c, base);
        let second = wick::zeroth_order(
            &[
                interaction_labeled(),
                LabeledOp::new(c.clone(), PointLabel::External(base)),
            ],
            target,
            PointLabel::External(base),
        );
        let product = first.multiply(&second);
        if product.is_zero() {
            audit.push(format!("ir C={c}: kept by counting, identically zero"));
        } else {
            ir = ir.add(&product);
        }
    }

    Ok(Integrand::Order0 { main, uv, ir, audit })
}

/// Compute the coefficient (C_R)_{ops}^{target} at the given points.
///
/// Order 0 is exact. Order 1 applies the symbolic integral table when every
/// term matches (after exact cancellation of y-independent terms) and falls
/// back to quadrature otherwise. Order 2 is experimental: an outer Monte
/// Carlo over y with nested order-1 quadratures per sample.
pub fn coefficient(
    ops: &[CompositeOp],
    points: &PointConfig,
    target: &CompositeOp,
    params: &ModelParams,
    order: u32,
    method: Method,
    opts: &ComputeOptions,
) -> Result<CoeffEntry, CoeffError> {
    if ops.len() != points.len() {
        return Err(CoeffError::OpPointMismatch { ops: ops.len(), points: points.len() });
    }
    if order > 2 {
        return Err(CoeffError::OrderUnsupported(order));
    }
    let key = CoeffKey { ops: ops.to_vec(), target: target.clone(), order };

    if order == 0 {
        let expr = wick::zeroth_order_external(ops, target, points.base());
        return Ok(CoeffEntry {
            key,
            value: CoeffValue::Exact(expr),
            experimental: false,
            audit: Vec::new(),
        });
    }

    if vanishes_at_order(ops, target, order) {
        return Ok(CoeffEntry {
            key,
            value: CoeffValue::Closed(ClosedExpr::default()),
            experimental: order == 2,
            audit: Vec::new(),
        });
    }

    let mut table = CoeffTable::new();
    let prefactor = rat_frac(-1, 24 * order as i64);

    if order == 1 {
        let integrand = build_integrand(ops, points, target, 0, params, opts, &mut table)?;
        let audit = integrand.audit().to_vec();
        let assembled = integrand.assembled().expect("order-0 integrand is symbolic");

        match integrate_y_symbolic(&assembled)? {
            Some(closed) if method != Method::Numeric => {
                return Ok(CoeffEntry {
                    key,
                    value: CoeffValue::Closed(closed.scale(&prefactor)),
                    experimental: false,
                    audit,
                });
            }
            None if method == Method::Symbolic => return Err(CoeffError::SymbolicUnavailable),
            _ => {}
        }

        if assembled.is_zero() {
            return Ok(CoeffEntry {
                key,
                value: CoeffValue::Closed(ClosedExpr::default()),
                experimental: false,
                audit,
            });
        }
        let raw = integrate_grouped(&assembled, points, params, opts)?;
        if !raw.converged && !opts.accept_unconverged {
            return Err(CoeffError::Budget);
        }
        return Ok(CoeffEntry {
            key,
            value: CoeffValue::Numeric(scale_numeric(raw, crate::expr::rational_to_f64(&prefactor))),
            experimental: false,
            audit,
        });
    }

    // order 2: outer Monte Carlo over y, nested order-1 values per sample
    let integrand = build_integrand(ops, points, target, 1, params, opts, &mut table)?;
    let audit = integrand.audit().to_vec();
    let plan = opts.plan(points.points(), params.mass);
    let failure: RefCell<Option<String>> = RefCell::new(None);
    let f = |y: &[f64; 4]| -> f64 {
        match integrand.eval(points, y, params.mass) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert_with(|| e.to_string());
                f64::NAN
            }
        }
    };
    let raw = quad::mc_integrate_r4(f, &plan, opts.mc_samples.max(1), opts.seed);
    if let Some(msg) = failure.into_inner() {
        return Err(CoeffError::Inner(msg));
    }
    let raw = raw?;
    Ok(CoeffEntry {
        key,
        value: CoeffValue::Numeric(scale_numeric(raw, crate::expr::rational_to_f64(&prefactor))),
        experimental: true,
        audit,
    })
}

/// Integrate the assembled bracket over R^4, splitting it into sums of
/// terms whose singular supports overlap. Terms singular around disjoint
/// point sets integrate against separate, smaller plans: a single-center
/// piece is resolved essentially to machine precision, while lumping it
/// into a multi-center plan would leave it limited by the angular
/// resolution near the other centers. Terms that share a singular point
/// stay together, so counter-term cancellations remain pointwise.
fn integrate_grouped(
    assembled: &CoeffExpr,
    points: &PointConfig,
    params: &ModelParams,
    opts: &ComputeOptions,
) -> Result<NumericCoeff, CoeffError> {
    use std::collections::BTreeSet;

    let support_of = |t: &crate::expr::Term| -> BTreeSet<usize> {
        t.factors
            .iter()
            .filter(|f| f.depends_on_insertion())
            .filter_map(|f| match (f.a, f.b) {
                (PointLabel::External(i), _) | (_, PointLabel::External(i)) => Some(i),
                _ => None,
            })
            .collect()
    };

    let mut groups: Vec<(BTreeSet<usize>, Vec<crate::expr::Term>)> = Vec::new();
    for t in assembled.terms() {
        let support = support_of(t);
        let mut merged = (support, vec![t.clone()]);
        // pull in every existing group that overlaps (or any group, for the
        // defensive case of a y-dependent term with no external reference)
        let mut keep = Vec::new();
        for g in groups.drain(..) {
            if merged.0.is_empty() || g.0.is_empty() || !merged.0.is_disjoint(&g.0) {
                merged.0.extend(g.0);
                merged.1.extend(g.1);
            } else {
                keep.push(g);
            }
        }
        keep.push(merged);
        groups = keep;
    }

    let mut total: Option<NumericCoeff> = None;
    for (support, terms) in groups {
        let centers: Vec<[f64; 4]> = if support.is_empty() {
            points.points().to_vec()
        } else {
            support.iter().map(|&i| points.point(i)).collect()
        };
        let label = if support.is_empty() {
            "all".to_string()
        } else {
            support.iter().map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join("+")
        };
        let sub = CoeffExpr::from_terms(terms);
        let compiled = sub.compile(points, params.mass)?;
        let plan = opts.plan(&centers, params.mass);
        let part = quad::integrate_r4(|y| compiled.eval(y), &plan)?;
        let acc = total.get_or_insert_with(|| NumericCoeff {
            value: 0.0,
            abs_error_estimate: 0.0,
            breakdown: Vec::new(),
            converged: true,
            evals: 0,
        });
        acc.value += part.value;
        acc.abs_error_estimate += part.abs_error_estimate;
        acc.converged &= part.converged;
        acc.evals += part.evals;
        for (name, v) in part.breakdown {
            acc.breakdown.push((format!("{label}:{name}"), v));
        }
    }
    Ok(total.expect("callers never pass an empty integrand"))
}

fn scale_numeric(mut n: NumericCoeff, s: f64) -> NumericCoeff {
    n.value *= s;
    n.abs_error_estimate *= s.abs();
    for (_, v) in &mut n.breakdown {
        *v *= s;
    }
    n
}

// ---------------------------------------------------------------------------
// nested (order-1) integrand for the order-2 path

enum YDep {
    /// an order-0 factor, exact expression compiled against the outer points
    Compiled(CompiledExpr),
    /// an order-1 factor requiring its own quadrature at each sampled y
    Inner(InnerSpec),
}

struct InnerSpec {
    ops: Vec<CompositeOp>,
    /// external points; y is prepended as point 0 when evaluated
    partners: Vec<[f64; 4]>,
    base: usize,
    target: CompositeOp,
}

struct NestedProduct {
    ydep: YDep,
    /// the y-free companion factor, evaluated once
    weight: f64,
}

pub struct Nested {
    main: InnerSpec,
    uv: Vec<NestedProduct>,
    ir: Vec<NestedProduct>,
    cfg: PointConfig,
    params: ModelParams,
    inner_opts: ComputeOptions,
    audit: Vec<String>,
}

fn build_nested(
    ops: &[CompositeOp],
    points: &PointConfig,
    target: &CompositeOp,
    params: &ModelParams,
    opts: &ComputeOptions,
    table: &mut CoeffTable,
) -> Result<Nested, CoeffError> {
    let base = points.base();
    let m = params.mass;
    let inner_opts = opts.inner();
    let mut audit = Vec::new();
    let mut uv = Vec::new();
    let mut ir = Vec::new();

    let order1_value = |ops: &[CompositeOp],
                            target: &CompositeOp,
                            table: &mut CoeffTable|
     -> Result<f64, CoeffError> {
        let key = CoeffKey { ops: ops.to_vec(), target: target.clone(), order: 1 };
        if table.get(&key).is_none() {
            let entry = coefficient(ops, points, target, params, 1, Method::Auto, &inner_opts)?;
            table.insert(entry);
        }
        Ok(table.get(&key).expect("just inserted").value.eval(points, m)?)
    };

    for (i, op) in ops.iter().enumerate() {
        for c in basis::enumerate_all_parities(op.dimension()) {
            let pair = [CompositeOp::interaction(), op.clone()];
            let modified = replaced(ops, i, &c);
            // s = 0: order-0 first factor times order-1 companion
            if !wick::vanishes_by_counting(&pair, &c) && !vanishes_at_order(&modified, target, 1) {
                let first = wick::zeroth_order(
                    &[
                        interaction_labeled(),
                        LabeledOp::new(op.clone(), PointLabel::External(i)),
                    ],
                    &c,
                    PointLabel::External(i),
                );
                if !first.is_zero() {
                    let weight = order1_value(&modified, target, table)?;
                    if weight != 0.0 {
                        uv.push(NestedProduct {
                            ydep: YDep::Compiled(first.compile(points, m)?),
                            weight,
                        });
                    } else {
                        audit.push(format!("uv i={i} C={c} s=0: order-1 companion is zero"));
                    }
                }
            }
            // s = 1: order-1 first factor times order-0 companion
            if !vanishes_at_order(&pair, &c, 1) && !vanishes_at_order(&modified, target, 0) {
                let companion = wick::zeroth_order_external(&modified, target, base);
                let weight = companion.eval(points, None, m)?;
                if weight != 0.0 {
                    uv.push(NestedProduct {
                        ydep: YDep::Inner(InnerSpec {
                            ops: pair.to_vec(),
                            partners: vec![points.point(i)],
                            base: 1,
                            target: c.clone(),
                        }),
                        weight,
                    });
                } else if !companion.is_zero() {
                    audit.push(format!("uv i={i} C={c} s=1: companion evaluates to zero"));
                }
            }
        }
    }

    for c in basis::enumerate_all_parities(target.dimension().saturating_sub(1)) {
        if target.dimension() == 0 || c.dimension() >= target.dimension() {
            continue;
        }
        let tail_pair = [CompositeOp::interaction(), c.clone()];
        // s = 0: order-0 x-only factor times order-1 y-dependent factor
        if !vanishes_at_order(ops, &c, 0) && !vanishes_at_order(&tail_pair, target, 1) {
            let weight = wick::zeroth_order_external(ops, &c, base).eval(points, None, m)?;
            if weight != 0.0 {
                ir.push(NestedProduct {
                    ydep: YDep::Inner(InnerSpec {
                        ops: tail_pair.to_vec(),
                        partners: vec![points.point(base)],
                        base: 1,
                        target: target.clone(),
                    }),
                    weight,
                });
            }
        }
        // s = 1: order-1 x-only factor times order-0 y-dependent factor
        if !vanishes_at_order(ops, &c, 1)
            && !wick::vanishes_by_counting(&tail_pair, target)
        {
            let second = wick::zeroth_order(
                &[
                    interaction_labeled(),
                    LabeledOp::new(c.clone(), PointLabel::External(base)),
                ],
                target,
                PointLabel::External(base),
            );
            if !second.is_zero() {
                let weight = order1_value(ops, &c, table)?;
                if weight != 0.0 {
                    ir.push(NestedProduct { ydep: YDep::Compiled(second.compile(points, m)?), weight });
                } else {
                    audit.push(format!("ir C={c} s=1: order-1 factor is zero"));
                }
            }
        }
    }

    let mut main_ops = vec![CompositeOp::interaction()];
    main_ops.extend_from_slice(ops);
    let main = InnerSpec {
        ops: main_ops,
        partners: points.points().to_vec(),
        base: base + 1,
        target: target.clone(),
    };

    Ok(Nested {
        main,
        uv,
        ir,
        cfg: points.clone(),
        params: *params,
        inner_opts,
        audit,
    })
}

impl Nested {
    fn inner_eval(&self, spec: &InnerSpec, y: &[f64; 4]) -> Result<f64, CoeffError> {
        let mut pts = vec![*y];
        pts.extend_from_slice(&spec.partners);
        let cfg = PointConfig::with_base(pts, spec.base)?;
        let entry = coefficient(
            &spec.ops,
            &cfg,
            &spec.target,
            &self.params,
            1,
            Method::Auto,
            &self.inner_opts,
        )?;
        Ok(entry.value.eval(&cfg, self.params.mass)?)
    }

    fn eval_parts(&self, y: &[f64; 4]) -> Result<(f64, f64, f64), CoeffError> {
        let main = self.inner_eval(&self.main, y)?;
        let mut uv = 0.0;
        for p in &self.uv {
            uv += self.product_value(p, y)?;
        }
        let mut ir = 0.0;
        for p in &self.ir {
            ir += self.product_value(p, y)?;
        }
        Ok((main, uv, ir))
    }

    fn product_value(&self, p: &NestedProduct, y: &[f64; 4]) -> Result<f64, CoeffError> {
        let ydep = match &p.ydep {
            YDep::Compiled(e) => {
                let v = e.eval(y);
                if !v.is_finite() {
                    return Err(CoeffError::Inner(format!(
                        "order-0 factor non-finite at y = {y:?}"
                    )));
                }
                v
            }
            YDep::Inner(spec) => self.inner_eval(spec, y)?,
        };
        Ok(ydep * p.weight)
    }

    pub fn cfg(&self) -> &PointConfig {
        &self.cfg
    }
}

// ---------------------------------------------------------------------------
// slope diagnostics

/// Fixed probe direction for radial slope sampling (unit vector, chosen to
/// avoid the coordinate axes).
pub const PROBE_DIRECTION: [f64; 4] = [
    0.3651483716701107,
    0.5477225575051661,
    0.18257418583505536,
    0.7302967433402214,
];

/// Least-squares slope of log2|f| against log2 r over the sampled radii.
/// Returns None when fewer than three samples are finite and nonzero.
pub fn fit_log2_slope(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 3 {
        return None;
    }
    let n = samples.len() as f64;
    let sx: f64 = samples.iter().map(|(x, _)| x).sum();
    let sy: f64 = samples.iter().map(|(_, y)| y).sum();
    let sxx: f64 = samples.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = samples.iter().map(|(x, y)| x * y).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Log-slope of |f(y)| as y approaches external point j along the fixed probe
/// direction, sampled at |y - x_j| = 2^-k d for k = 2..=10 with d half the
/// minimum pairwise distance.
pub fn uv_slope<F: Fn(&[f64; 4]) -> f64>(f: F, cfg: &PointConfig, j: usize) -> Option<f64> {
    let d = 0.5 * cfg.min_pair_distance();
    if !d.is_finite() || d <= 0.0 {
        return None;
    }
    let x = cfg.point(j);
    let mut samples = Vec::new();
    for k in 2..=10 {
        let r = d * (0.5f64).powi(k);
        let y = offset(&x, r);
        let v = f(&y).abs();
        if v.is_finite() && v > 0.0 {
            samples.push((r.log2(), v.log2()));
        }
    }
    fit_log2_slope(&samples)
}

/// Log-slope of |f(y)| far from the configuration, sampled at
/// |y - x_base| = 2^k D for k = 3..=8 with D the configuration diameter.
/// Returns a large negative sentinel when every sample underflows.
pub fn ir_slope<F: Fn(&[f64; 4]) -> f64>(f: F, cfg: &PointConfig) -> Option<f64> {
    let diameter = cfg.diameter();
    let scale = if diameter > 0.0 { diameter } else { 1.0 };
    let x = cfg.point(cfg.base());
    let mut samples = Vec::new();
    let mut any_zero = false;
    for k in 3..=8 {
        let r = scale * (2.0f64).powi(k);
        let y = offset(&x, r);
        let v = f(&y).abs();
        if v.is_finite() && v > 0.0 {
            samples.push((r.log2(), v.log2()));
        } else if v == 0.0 {
            any_zero = true;
        }
    }
    match fit_log2_slope(&samples) {
        Some(s) => Some(s),
        // exponential decay can underflow every sampled octave; that is
        // unambiguously faster than any finite power
        None if any_zero => Some(-1e9),
        None => None,
    }
}

fn offset(x: &[f64; 4], r: f64) -> [f64; 4] {
    [
        x[0] + r * PROBE_DIRECTION[0],
        x[1] + r * PROBE_DIRECTION[1],
        x[2] + r * PROBE_DIRECTION[2],
        x[3] + r * PROBE_DIRECTION[3],
    ]
}
