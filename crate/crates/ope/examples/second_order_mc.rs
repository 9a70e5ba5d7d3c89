//! Experimental second-order coefficient: an outer Monte Carlo over the
//! second insertion point with a nested order-1 quadrature per sample.
//! Slow and noisy by design; the point is finiteness and seed stability.

use ope::basis::{parse_op, ModelParams, PointConfig};
use ope::deform::{coefficient, CoeffValue, ComputeOptions, Method};

fn main() {
    let params = ModelParams::new(1.0).unwrap();
    let cfg = PointConfig::new(vec![[0.5, 0.0, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0]]).unwrap();
    let ops = vec![parse_op("phi").unwrap(), parse_op("phi").unwrap()];
    let target = parse_op("phi^2").unwrap();

    // few samples and a coarse inner tolerance keep this demo to minutes
    let opts = ComputeOptions {
        mc_samples: 8,
        seed: 11,
        rel_tol: 1e-2,
        ..ComputeOptions::default()
    };
    println!("(C2)_{{phi phi}}^{{phi^2}} at |x12| = 1, m = 1  (experimental)");
    let entry = coefficient(&ops, &cfg, &target, &params, 2, Method::Auto, &opts).unwrap();
    let CoeffValue::Numeric(n) = &entry.value else { panic!("expected numeric") };
    println!(
        "  {} samples, seed {}: {:.6e} +- {:.2e}",
        opts.mc_samples, opts.seed, n.value, n.abs_error_estimate
    );

    let opts2 = ComputeOptions { seed: 12, ..opts.clone() };
    let entry2 = coefficient(&ops, &cfg, &target, &params, 2, Method::Auto, &opts2).unwrap();
    let CoeffValue::Numeric(n2) = &entry2.value else { panic!("expected numeric") };
    println!(
        "  {} samples, seed {}: {:.6e} +- {:.2e}",
        opts2.mc_samples, opts2.seed, n2.value, n2.abs_error_estimate
    );
    let sigma = (n.abs_error_estimate.powi(2) + n2.abs_error_estimate.powi(2)).sqrt();
    println!("  seed-to-seed deviation: {:+.2} combined sigma", (n.value - n2.value) / sigma);
}
