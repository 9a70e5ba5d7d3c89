//! Zeroth-order (free-theory) OPE coefficients via Wick contractions and
//! Taylor matching.
//!
//! A product of normal-ordered composite operators is expanded as a sum over
//! cross-contraction patterns. Each contracted slot pair contributes a
//! propagator-derivative factor; each leftover slot is Taylor-expanded about
//! the base point and the resulting basis fields are matched against the
//! target monomial. Dimension matching makes every Taylor expansion finite.

use num::rational::BigRational;

use crate::basis::{CompositeOp, MultiIndex};
use crate::expr::{rat, rat_frac, CoeffExpr, Factor, FactorKind, PointLabel, Term};

/// A composite operator attached to its point label.
#[derive(Debug, Clone)]
pub struct LabeledOp {
    pub op: CompositeOp,
    pub label: PointLabel,
}

impl LabeledOp {
    pub fn new(op: CompositeOp, label: PointLabel) -> Self {
        LabeledOp { op, label }
    }
}

/// One Wick pairing: cross-operator slot pairs plus the leftover slots.
/// Self-contractions are excluded (operators are normal-ordered).
#[derive(Debug, Clone)]
pub struct ContractionPattern {
    pub pairs: Vec<(usize, usize)>,
    pub leftover: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    op_idx: usize,
    w: MultiIndex,
    label: PointLabel,
}

/// True iff no number of cross-contractions can match the field counts of
/// `ops` against `target` (field-count parity and per-operator leftovers
/// included). A `true` here forces the zeroth-order coefficient to vanish.
pub fn vanishes_by_counting(ops: &[CompositeOp], target: &CompositeOp) -> bool {
    let counts: Vec<usize> = ops.iter().map(|o| o.num_fields()).collect();
    let n_target = target.num_fields();
    !leftover_feasible(&counts, n_target, 0, Vec::new())
}

fn leftover_feasible(counts: &[usize], want: usize, idx: usize, taken: Vec<usize>) -> bool {
    if idx == counts.len() {
        let total: usize = taken.iter().sum();
        if total != want {
            return false;
        }
        let contracted: Vec<usize> = counts.iter().zip(&taken).map(|(n, l)| n - l).collect();
        let sum: usize = contracted.iter().sum();
        if sum % 2 != 0 {
            return false;
        }
        // cross-operator pairing exists iff no operator holds more than half
        let max = contracted.iter().max().copied().unwrap_or(0);
        return max * 2 <= sum;
    }
    let rem = match want.checked_sub(taken.iter().sum::<usize>()) {
        Some(r) => r,
        None => return false,
    };
    for l in 0..=counts[idx].min(rem) {
        let mut t = taken.clone();
        t.push(l);
        if leftover_feasible(counts, want, idx + 1, t) {
            return true;
        }
    }
    false
}

/// The zeroth-order coefficient as an exact symbolic expression, with the
/// Taylor expansion of leftover fields taken about `base`.
pub fn zeroth_order(ops: &[LabeledOp], target: &CompositeOp, base: PointLabel) -> CoeffExpr {
    let bare: Vec<CompositeOp> = ops.iter().map(|o| o.op.clone()).collect();
    if vanishes_by_counting(&bare, target) {
        return CoeffExpr::zero();
    }
    let mut slots = Vec::new();
    for (op_idx, lop) in ops.iter().enumerate() {
        for w in lop.op.factors() {
            slots.push(Slot { op_idx, w: *w, label: lop.label });
        }
    }
    let mut patterns = Vec::new();
    let mut used = vec![false; slots.len()];
    enumerate_patterns(
        &slots,
        target.num_fields(),
        target.dimension(),
        &mut used,
        &mut Vec::new(),
        &mut Vec::new(),
        0,
        &mut patterns,
    );

    let mut terms = Vec::new();
    for pattern in &patterns {
        let mut sign = 1i64;
        let mut pair_factors = Vec::new();
        for &(i, j) in &pattern.pairs {
            let (si, sj) = (&slots[i], &slots[j]);
            // d^{u}_{a} d^{v}_{b} C(x_a - x_b) = (-1)^{|v|} (d^{u+v} C)(x_a - x_b)
            if sj.w.order() % 2 == 1 {
                sign = -sign;
            }
            let (f, s) = Factor::new(FactorKind::PropDeriv, si.w.add(&sj.w), si.label, sj.label);
            sign *= s;
            pair_factors.push(f);
        }
        let leftover: Vec<Slot> = pattern.leftover.iter().map(|&i| slots[i]).collect();
        let mut remaining = target_counts(target);
        match_leftover(
            &leftover,
            0,
            base,
            &mut remaining,
            rat(sign),
            &pair_factors,
            &mut terms,
        );
    }
    CoeffExpr::from_terms(terms)
}

/// Zeroth-order coefficient with operator i at external point i and the
/// configuration's base-point convention (last point).
pub fn zeroth_order_external(ops: &[CompositeOp], target: &CompositeOp, base: usize) -> CoeffExpr {
    let labeled: Vec<LabeledOp> = ops
        .iter()
        .enumerate()
        .map(|(i, op)| LabeledOp::new(op.clone(), PointLabel::External(i)))
        .collect();
    zeroth_order(&labeled, target, PointLabel::External(base))
}

#[allow(clippy::too_many_arguments)]
fn enumerate_patterns(
    slots: &[Slot],
    n_target: usize,
    dim_target: u32,
    used: &mut Vec<bool>,
    pairs: &mut Vec<(usize, usize)>,
    leftover: &mut Vec<usize>,
    leftover_dim: u32,
    out: &mut Vec<ContractionPattern>,
) {
    let first = match used.iter().position(|&u| !u) {
        Some(i) => i,
        None => {
            if leftover.len() == n_target {
                out.push(ContractionPattern { pairs: pairs.clone(), leftover: leftover.clone() });
            }
            return;
        }
    };
    let remaining = used.iter().filter(|&&u| !u).count();
    if leftover.len() + remaining < n_target {
        return;
    }

    used[first] = true;

    // leave `first` uncontracted
    let d = 1 + slots[first].w.order();
    if leftover.len() < n_target && leftover_dim + d <= dim_target {
        leftover.push(first);
        enumerate_patterns(
            slots,
            n_target,
            dim_target,
            used,
            pairs,
            leftover,
            leftover_dim + d,
            out,
        );
        leftover.pop();
    }

    // pair `first` with a later slot of a different operator
    for j in (first + 1)..slots.len() {
        if used[j] || slots[j].op_idx == slots[first].op_idx {
            continue;
        }
        used[j] = true;
        pairs.push((first, j));
        enumerate_patterns(slots, n_target, dim_target, used, pairs, leftover, leftover_dim, out);
        pairs.pop();
        used[j] = false;
    }

    used[first] = false;
}

fn target_counts(target: &CompositeOp) -> Vec<(MultiIndex, usize)> {
    let mut counts: Vec<(MultiIndex, usize)> = Vec::new();
    for w in target.factors() {
        match counts.last_mut() {
            Some(last) if last.0 == *w => last.1 += 1,
            _ => counts.push((*w, 1)),
        }
    }
    counts
}

// Assign each leftover slot a distinct target factor value (counted once per
// distinct value assignment), Taylor-expanding non-base slots by the required
// derivative difference.
fn match_leftover(
    leftover: &[Slot],
    idx: usize,
    base: PointLabel,
    remaining: &mut Vec<(MultiIndex, usize)>,
    weight: BigRational,
    factors: &[Factor],
    out: &mut Vec<Term>,
) {
    if idx == leftover.len() {
        if remaining.iter().all(|&(_, c)| c == 0) {
            out.push(Term::new(weight, factors.to_vec()));
        }
        return;
    }
    let slot = leftover[idx];
    for k in 0..remaining.len() {
        if remaining[k].1 == 0 {
            continue;
        }
        let t = remaining[k].0;
        let v = match t.checked_sub(&slot.w) {
            Some(v) => v,
            None => continue,
        };
        if slot.label == base && !v.is_zero() {
            continue;
        }
        remaining[k].1 -= 1;
        if v.is_zero() {
            match_leftover(leftover, idx + 1, base, remaining, weight.clone(), factors, out);
        } else {
            let (mono, sign) = Factor::new(FactorKind::Monomial, v, slot.label, base);
            let mut fs = factors.to_vec();
            fs.push(mono);
            let w = &weight * rat_frac(sign, v.factorial() as i64);
            match_leftover(leftover, idx + 1, base, remaining, w, &fs, out);
        }
        remaining[k].1 += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{parse_op, PointConfig};
    use crate::expr::rat;

    fn x(i: usize) -> PointLabel {
        PointLabel::External(i)
    }

    fn y() -> PointLabel {
        PointLabel::Insertion
    }

    fn prop_expr(w: i64, a: PointLabel, b: PointLabel) -> CoeffExpr {
        CoeffExpr::from_terms(vec![Term::new(rat(w), vec![Factor::prop(a, b)])])
    }

    #[test]
    fn counting_rule() {
        let phi4 = CompositeOp::phi_power(4);
        let phi = CompositeOp::phi_power(1);
        let phi2 = CompositeOp::phi_power(2);
        let phi3 = CompositeOp::phi_power(3);
        assert!(vanishes_by_counting(&[phi4.clone(), phi.clone()], &phi2));
        assert!(!vanishes_by_counting(&[phi.clone(), phi.clone()], &phi2));
        assert!(vanishes_by_counting(&[phi.clone(), phi.clone()], &phi3));
        // phi^4 x phi -> O_C vanishes for all [C] <= 1
        assert!(vanishes_by_counting(&[phi4.clone(), phi.clone()], &CompositeOp::identity()));
        assert!(vanishes_by_counting(&[phi4, phi.clone()], &phi));
    }

    #[test]
    fn vanishing_by_counting_gives_zero_expression() {
        let ops = [CompositeOp::phi_power(4), CompositeOp::phi_power(1)];
        let e = zeroth_order_external(&ops, &CompositeOp::phi_power(2), 1);
        assert!(e.is_zero());
    }

    #[test]
    fn phi_phi_to_identity() {
        let ops = [CompositeOp::phi_power(1), CompositeOp::phi_power(1)];
        let e = zeroth_order_external(&ops, &CompositeOp::identity(), 1);
        assert_eq!(e, prop_expr(1, x(0), x(1)));
    }

    #[test]
    fn phi_phi_to_phi2_is_one() {
        let ops = [CompositeOp::phi_power(1), CompositeOp::phi_power(1)];
        let e = zeroth_order_external(&ops, &CompositeOp::phi_power(2), 1);
        assert_eq!(e, CoeffExpr::one());
    }

    #[test]
    fn phi_phi_to_phi_dmu_phi_is_monomial() {
        let ops = [CompositeOp::phi_power(1), CompositeOp::phi_power(1)];
        for dir in 0..4 {
            let target = CompositeOp::new(vec![MultiIndex::ZERO, MultiIndex::unit(dir)]);
            let e = zeroth_order_external(&ops, &target, 1);
            let (mono, sign) =
                Factor::new(FactorKind::Monomial, MultiIndex::unit(dir), x(0), x(1));
            let expect = CoeffExpr::from_terms(vec![Term::new(rat(sign), vec![mono])]);
            assert_eq!(e, expect, "direction {dir}");
        }
    }

    #[test]
    fn interaction_phi_phi_to_phi4() {
        // (C0)_{phi^4 phi phi}^{phi^4}(y,x1,x2) = 4C(x1-y) + 4C(x2-y) + C(x1-x2)
        let ops = [
            LabeledOp::new(CompositeOp::interaction(), y()),
            LabeledOp::new(CompositeOp::phi_power(1), x(0)),
            LabeledOp::new(CompositeOp::phi_power(1), x(1)),
        ];
        let e = zeroth_order(&ops, &CompositeOp::phi_power(4), x(1));
        let expect = prop_expr(4, x(0), y())
            .add(&prop_expr(4, x(1), y()))
            .add(&prop_expr(1, x(0), x(1)));
        assert_eq!(e, expect);
    }

    #[test]
    fn interaction_identity_to_phi4_is_one() {
        let ops = [
            LabeledOp::new(CompositeOp::interaction(), y()),
            LabeledOp::new(CompositeOp::identity(), x(1)),
        ];
        let e = zeroth_order(&ops, &CompositeOp::phi_power(4), x(1));
        assert_eq!(e, CoeffExpr::one());
    }

    #[test]
    fn interaction_phi2_to_phi4_weight_8() {
        let ops = [
            LabeledOp::new(CompositeOp::interaction(), y()),
            LabeledOp::new(CompositeOp::phi_power(2), x(1)),
        ];
        let e = zeroth_order(&ops, &CompositeOp::phi_power(4), x(1));
        assert_eq!(e, prop_expr(8, x(1), y()));
    }

    #[test]
    fn interaction_phi_dmu_phi_to_phi4() {
        // (C0)_{phi^4, phi d_mu phi}^{phi^4}(y,x2) = 4 d_mu C(x2-y)
        for dir in 0..4 {
            let op2 = CompositeOp::new(vec![MultiIndex::ZERO, MultiIndex::unit(dir)]);
            let ops = [
                LabeledOp::new(CompositeOp::interaction(), y()),
                LabeledOp::new(op2, x(1)),
            ];
            let e = zeroth_order(&ops, &CompositeOp::phi_power(4), x(1));
            let (f, sign) = Factor::new(FactorKind::PropDeriv, MultiIndex::unit(dir), x(1), y());
            let expect = CoeffExpr::from_terms(vec![Term::new(rat(4 * sign), vec![f])]);
            assert_eq!(e, expect, "direction {dir}");
        }
    }

    #[test]
    fn interaction_phi3_weights_24_and_36() {
        let ops = [
            LabeledOp::new(CompositeOp::interaction(), y()),
            LabeledOp::new(CompositeOp::phi_power(3), x(1)),
        ];
        let e = zeroth_order(&ops, &CompositeOp::phi_power(1), x(1));
        let c = Factor::prop(x(1), y());
        assert_eq!(e, CoeffExpr::from_terms(vec![Term::new(rat(24), vec![c, c, c])]));

        let e = zeroth_order(&ops, &CompositeOp::phi_power(3), x(1));
        assert_eq!(e, CoeffExpr::from_terms(vec![Term::new(rat(36), vec![c, c])]));
    }

    #[test]
    fn phi_phi3_to_phi2_weight_3() {
        let ops = [CompositeOp::phi_power(1), CompositeOp::phi_power(3)];
        let e = zeroth_order_external(&ops, &CompositeOp::phi_power(2), 1);
        assert_eq!(e, prop_expr(3, x(0), x(1)));
    }

    #[test]
    fn main_term_phi_phi3_weights_24_72_36() {
        // (C0)_{phi^4 phi phi^3}^{phi^2}(y,x1,x2)
        //   = C(y-x2)^2 (24 C(y-x2) + 72 C(y-x1) + 36 C(x1-x2))
        let ops = [
            LabeledOp::new(CompositeOp::interaction(), y()),
            LabeledOp::new(CompositeOp::phi_power(1), x(0)),
            LabeledOp::new(CompositeOp::phi_power(3), x(1)),
        ];
        let e = zeroth_order(&ops, &CompositeOp::phi_power(2), x(1));
        let c2y = Factor::prop(x(1), y());
        let c1y = Factor::prop(x(0), y());
        let c12 = Factor::prop(x(0), x(1));
        let expect = CoeffExpr::from_terms(vec![
            Term::new(rat(24), vec![c2y, c2y, c2y]),
            Term::new(rat(72), vec![c2y, c2y, c1y]),
            Term::new(rat(36), vec![c2y, c2y, c12]),
        ]);
        assert_eq!(e, expect);
    }

    #[test]
    fn counting_oracle_no_derivatives() {
        // Independent brute-force check of the total pattern multiplicities
        // for derivative-free inputs: the coefficient of phi^j must equal the
        // number of cross-pairings leaving j slots free.
        fn brute_count(sizes: &[usize], leftover_target: usize) -> u64 {
            // slots labeled by operator index
            let mut slots = Vec::new();
            for (i, &n) in sizes.iter().enumerate() {
                for _ in 0..n {
                    slots.push(i);
                }
            }
            fn go(slots: &[usize], mask: u64, leftover_target: usize) -> u64 {
                let n = slots.len();
                let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
                // choose the lowest free slot and either leave it or pair it
                match free.first() {
                    None => {
                        if leftover_target == 0 {
                            1
                        } else {
                            0
                        }
                    }
                    Some(&i) => {
                        let mut total = 0;
                        // leave i free: consume it as leftover
                        if leftover_target > 0 {
                            total += go(slots, mask | (1 << i), leftover_target - 1);
                        }
                        for &j in free.iter().skip(1) {
                            if slots[j] != slots[i] {
                                total += go(slots, mask | (1 << i) | (1 << j), leftover_target);
                            }
                        }
                        total
                    }
                }
            }
            go(&slots, 0, leftover_target)
        }

        // compare against the symbolic weights for pure phi^n inputs
        for (sizes, target_n) in [
            (vec![1usize, 1], 0usize),
            (vec![1, 1], 2),
            (vec![4, 2], 4),
            (vec![4, 3], 1),
            (vec![4, 3], 3),
            (vec![4, 1, 3], 2),
            (vec![4, 1, 1], 4),
            (vec![4, 4], 2),
        ] {
            let ops: Vec<LabeledOp> = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| LabeledOp::new(CompositeOp::phi_power(n), x(i)))
                .collect();
            let base = x(sizes.len() - 1);
            let e = zeroth_order(&ops, &CompositeOp::phi_power(target_n), base);
            let total: BigRational = e.terms().iter().map(|t| t.weight.clone()).sum();
            let brute = brute_count(&sizes, target_n);
            assert_eq!(total, rat(brute as i64), "sizes {sizes:?} target {target_n}");
        }
    }

    #[test]
    fn permutation_symmetry_of_non_base_ops() {
        let phi = CompositeOp::phi_power(1);
        let phi3 = CompositeOp::phi_power(3);
        let phi4 = CompositeOp::interaction();
        let target = CompositeOp::phi_power(2);
        let a = zeroth_order(
            &[
                LabeledOp::new(phi4.clone(), y()),
                LabeledOp::new(phi.clone(), x(0)),
                LabeledOp::new(phi3.clone(), x(1)),
            ],
            &target,
            x(1),
        );
        let b = zeroth_order(
            &[
                LabeledOp::new(phi.clone(), x(0)),
                LabeledOp::new(phi4.clone(), y()),
                LabeledOp::new(phi3.clone(), x(1)),
            ],
            &target,
            x(1),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn translation_invariance_of_eval() {
        let ops = [parse_op("phi").unwrap(), parse_op("phi").unwrap()];
        let target = parse_op("phi*d1phi").unwrap();
        let e = zeroth_order_external(&ops, &target, 1);
        let cfg = PointConfig::new(vec![[0.7, -0.2, 0.4, 0.1], [0.0; 4]]).unwrap();
        let shifted = cfg.translated([0.3, 1.1, -0.6, 2.0]);
        let v1 = e.eval(&cfg, None, 1.0).unwrap();
        let v2 = e.eval(&shifted, None, 1.0).unwrap();
        assert!((v1 - v2).abs() <= 1e-12 * v1.abs().max(1.0));
    }
}
