//! First-order coefficients on the symbolic path: the recursion bracket is
//! assembled exactly, y-independent terms cancel in rational arithmetic, and
//! the remaining terms are integrated with the closed-form table.

use ope::basis::{parse_op, ModelParams, PointConfig};
use ope::deform::{build_integrand, coefficient, CoeffTable, ComputeOptions, Method};

fn main() {
    let params = ModelParams::new(1.0).unwrap();
    let opts = ComputeOptions::default();
    let cfg = PointConfig::new(vec![[0.5, 0.0, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0]]).unwrap();
    let ops = vec![parse_op("phi").unwrap(), parse_op("phi").unwrap()];

    // the bracket for target phi^4: main term plus three counter-term groups
    let target = parse_op("phi^4").unwrap();
    let mut table = CoeffTable::new();
    let integrand = build_integrand(&ops, &cfg, &target, 0, &params, &opts, &mut table).unwrap();
    let assembled = integrand.assembled().unwrap();
    println!("bracket for (C1)_{{phi phi}}^{{phi^4}} after exact cancellation:");
    println!("  {}\n", assembled.serialize());

    let entry =
        coefficient(&ops, &cfg, &target, &params, 1, Method::Symbolic, &opts).unwrap();
    println!("(C1)_{{phi phi}}^{{phi^4}} = {:?}", entry.value.serialize());
    println!("  (empty closed form: the integral table maps every term to zero)\n");

    // target phi^2: no counter-terms survive and the table applies directly
    let target = parse_op("phi^2").unwrap();
    let entry =
        coefficient(&ops, &cfg, &target, &params, 1, Method::Symbolic, &opts).unwrap();
    println!("(C1)_{{phi phi}}^{{phi^2}} = {}", entry.value.serialize());
    println!(
        "  at |x12| = 1, m = 1: {:.12e}  (= -K0(1)/(16 pi^2))",
        entry.value.eval(&cfg, params.mass).unwrap()
    );
}
