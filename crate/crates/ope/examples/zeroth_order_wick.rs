//! Exact zeroth-order OPE coefficients via Wick contraction enumeration.
//!
//! Prints the symbolic coefficient of every basis target (dimension <= 4) in
//! the expansion of phi(x1) phi(x2), plus a pointwise evaluation.

use ope::basis::{enumerate_basis, parse_op, PointConfig};
use ope::wick::zeroth_order_external;

fn main() {
    let ops = vec![parse_op("phi").unwrap(), parse_op("phi").unwrap()];
    let cfg = PointConfig::new(vec![[0.5, 0.0, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0]]).unwrap();
    let mass = 1.0;

    println!("zeroth-order expansion of phi(x1) phi(x2), targets up to dimension 4\n");
    for target in enumerate_basis(4) {
        let expr = zeroth_order_external(&ops, &target, cfg.base());
        if expr.is_zero() {
            continue;
        }
        let value = expr.eval(&cfg, None, mass).unwrap();
        println!("C_{{phi phi}}^{{{target}}} = {}", expr.serialize());
        println!("  at |x12| = 1, m = 1: {value:.12e}\n");
    }

    // a mixed product with derivative operators
    let ops = vec![parse_op("phi^2").unwrap(), parse_op("d1phi*phi").unwrap()];
    println!("zeroth-order expansion of phi^2(x1) (d1phi phi)(x2), targets up to dimension 3\n");
    for target in enumerate_basis(3) {
        let expr = zeroth_order_external(&ops, &target, cfg.base());
        if expr.is_zero() {
            continue;
        }
        println!("C^{{{target}}} = {}", expr.serialize());
    }
}
