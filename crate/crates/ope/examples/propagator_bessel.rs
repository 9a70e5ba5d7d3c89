//! The position-space propagator and its Bessel-function backbone:
//! K0/K1 evaluation, the short/long-distance regimes, and exact radial
//! derivatives of the propagator.

use ope::basis::MultiIndex;
use ope::specfun::{bessel_k0, bessel_k1, propagator_deriv, propagator_radial, EULER_GAMMA};

fn main() {
    println!("{:>6}  {:>24}  {:>24}", "z", "K0(z)", "K1(z)");
    for z in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        println!("{z:>6}  {:>24.16e}  {:>24.16e}", bessel_k0(z).unwrap(), bessel_k1(z).unwrap());
    }

    println!("\npropagator C(r) = m K1(m r)/(4 pi^2 r) at m = 1:");
    println!("{:>8}  {:>24}  {:>24}", "r", "C(r)", "limit");
    for r in [1e-3, 1e-2, 0.1, 1.0, 5.0] {
        let c = propagator_radial(r, 1.0).unwrap();
        let short = 1.0 / (4.0 * std::f64::consts::PI.powi(2) * r * r);
        println!("{r:>8}  {c:>24.16e}  {short:>24.16e}  (1/(4 pi^2 r^2))");
    }
    println!("\nsmall-z check: K0(z) + log(z/2) + gamma -> 0:");
    let z = 1e-4;
    println!(
        "  z = {z}: {:.3e}",
        bessel_k0(z).unwrap() + (z / 2.0f64).ln() + EULER_GAMMA
    );

    // derivatives of the propagator along coordinate directions
    let x = [0.3, -0.4, 0.5, 0.2];
    println!("\nderivatives of C at x = {x:?}:");
    for (label, w) in [
        ("d1 C", MultiIndex([1, 0, 0, 0])),
        ("d2d2 C", MultiIndex([0, 2, 0, 0])),
        ("d1d2d3 C", MultiIndex([1, 1, 1, 0])),
    ] {
        println!("  {label:>9} = {:+.12e}", propagator_deriv(&x, 1.0, &w).unwrap());
    }
    // the propagator solves (-Laplace + m^2) C = 0 away from the origin
    let mut lap = 0.0;
    for dir in 0..4 {
        let mut w = MultiIndex::default();
        w.0[dir] = 2;
        lap += propagator_deriv(&x, 1.0, &w).unwrap();
    }
    let c = propagator_deriv(&x, 1.0, &MultiIndex::default()).unwrap();
    println!("  (-Laplace + m^2) C = {:.3e}  (exactly zero up to roundoff)", -lap + c);
}
