//! First-order coefficient with no closed form: (C1)_{phi phi^3}^{phi^2} via
//! counter-term-subtracted 4D quadrature, cross-checked against the
//! independent momentum-space oracle.

use ope::basis::{parse_op, ModelParams, PointConfig};
use ope::deform::{coefficient, CoeffValue, ComputeOptions, Method};
use ope::oracle::momentum_space_c1_phi_phi3;

fn main() {
    let params = ModelParams::new(1.0).unwrap();
    let ops = vec![parse_op("phi").unwrap(), parse_op("phi^3").unwrap()];
    let target = parse_op("phi^2").unwrap();
    let opts = ComputeOptions::default();

    println!("(C1)_{{phi phi^3}}^{{phi^2}} at m = 1\n");
    println!("{:>5}  {:>24}  {:>12}  {:>24}  {:>8}", "sep", "quadrature", "err est", "oracle", "rel dev");
    for sep in [0.5, 1.0, 2.0] {
        let cfg =
            PointConfig::new(vec![[0.5 * sep, 0.0, 0.0, 0.0], [-0.5 * sep, 0.0, 0.0, 0.0]])
                .unwrap();
        let entry = coefficient(&ops, &cfg, &target, &params, 1, Method::Auto, &opts).unwrap();
        let CoeffValue::Numeric(n) = &entry.value else {
            panic!("expected the numeric path")
        };
        let oracle = momentum_space_c1_phi_phi3(&[sep, 0.0, 0.0, 0.0], 1.0).unwrap();
        println!(
            "{sep:>5}  {:>24.16e}  {:>12.3e}  {:>24.16e}  {:>8.2e}",
            n.value,
            n.abs_error_estimate,
            oracle,
            (n.value - oracle).abs() / oracle.abs()
        );
    }
}
