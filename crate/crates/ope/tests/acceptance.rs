//! Acceptance gate: one test per primary criterion, each printing a single
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; the test harness verdict mirrors them either way.

use ope::basis::{CompositeOp, ModelParams, PointConfig};
use ope::deform::{
    build_integrand, coefficient, ir_slope, uv_slope, CoeffTable, CoeffValue, ComputeOptions,
    Integrand, Method,
};
use ope::quad::{self, QuadPlan};
use ope::specfun;
use ope::{oracle, verify, wick};

fn phi(n: usize) -> CompositeOp {
    CompositeOp::phi_power(n)
}

fn cfg2(sep: f64) -> PointConfig {
    PointConfig::new(vec![[0.5 * sep, 0.0, 0.0, 0.0], [-0.5 * sep, 0.0, 0.0, 0.0]]).unwrap()
}

fn params() -> ModelParams {
    ModelParams::new(1.0).unwrap()
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {status} ({detail})");
    assert!(pass, "acceptance {criterion}: FAIL ({detail})");
}

/// Criterion 1: every zeroth-order identity and assembly weight reproduced
/// as an exact symbolic equality, in under a second.
#[test]
fn criterion_1_wick_fidelity() {
    let start = std::time::Instant::now();
    let report = verify::run_suite("wick").unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "criterion 1 (Wick fidelity)",
        report.passed() && elapsed < 1.0,
        &format!("{} symbolic identities in {:.3}s", report.checks.len(), elapsed),
    );
}

/// Criterion 2: (C1) phi,phi -> phi^4 vanishes: exactly on the symbolic
/// path, and to 1e-6 of the largest per-region magnitude numerically.
#[test]
fn criterion_2_vanishing_first_order() {
    let ops = [phi(1), phi(1)];
    let cfg = cfg2(1.0);
    let target = phi(4);

    let sym = coefficient(&ops, &cfg, &target, &params(), 1, Method::Symbolic, &ComputeOptions::default())
        .unwrap();
    let sym_zero = match &sym.value {
        CoeffValue::Closed(c) => c.is_zero(),
        _ => false,
    };

    let num = coefficient(&ops, &cfg, &target, &params(), 1, Method::Numeric, &ComputeOptions::default())
        .unwrap();
    let CoeffValue::Numeric(n) = &num.value else {
        panic!("numeric method must yield a quadrature result")
    };
    let region_scale = n
        .breakdown
        .iter()
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max);
    verdict(
        "criterion 2 (vanishing coefficient)",
        sym_zero && n.value.abs() <= 1e-6 * region_scale,
        &format!("symbolic zero: {sym_zero}, numeric {:.3e} vs region scale {:.3e}", n.value, region_scale),
    );
}

/// Criterion 3: (C1) phi,phi -> phi^2 equals -K0(m|x12|)/16pi^2 exactly on
/// the symbolic path and to 1e-3 relative numerically, at |x12| in {1/2,1,2}.
#[test]
fn criterion_3_bessel_benchmark() {
    let ops = [phi(1), phi(1)];
    let target = phi(2);
    let mut detail = String::new();
    let mut ok = true;
    for sep in [0.5, 1.0, 2.0] {
        let cfg = cfg2(sep);
        let expect = -specfun::bessel_k0(sep).unwrap() / (16.0 * std::f64::consts::PI.powi(2));

        let sym = coefficient(&ops, &cfg, &target, &params(), 1, Method::Symbolic, &ComputeOptions::default())
            .unwrap();
        let sv = sym.value.eval(&cfg, 1.0).unwrap();
        ok &= (sv - expect).abs() <= 1e-12 * expect.abs();

        let num = coefficient(&ops, &cfg, &target, &params(), 1, Method::Numeric, &ComputeOptions::default())
            .unwrap();
        let nv = num.value.eval(&cfg, 1.0).unwrap();
        ok &= (nv - expect).abs() <= 1e-3 * expect.abs();
        detail.push_str(&format!("sep {sep}: rel {:.1e}; ", (nv - expect).abs() / expect.abs()));
    }
    verdict("criterion 3 (Bessel benchmark)", ok, detail.trim_end_matches("; "));
}

/// Criterion 4: at |x12| = 1e-2 the coefficient matches the short-distance
/// expansion (log(m|x12|/2) + gamma)/16pi^2 within 5e-5 absolute.
#[test]
fn criterion_4_small_separation_expansion() {
    let sep = 1e-2;
    let cfg = cfg2(sep);
    let entry = coefficient(&[phi(1), phi(1)], &cfg, &phi(2), &params(), 1, Method::Auto, &ComputeOptions::default())
        .unwrap();
    let got = entry.value.eval(&cfg, 1.0).unwrap();
    let expect =
        ((0.5 * sep).ln() + specfun::EULER_GAMMA) / (16.0 * std::f64::consts::PI.powi(2));
    verdict(
        "criterion 4 (small-separation expansion)",
        (got - expect).abs() <= 5e-5,
        &format!("got {got:.8e}, expansion {expect:.8e}"),
    );
}

/// Criterion 5: (C1) phi,phi^3 -> phi^2 from position-space quadrature
/// agrees with the independent momentum-space oracle within 1% relative.
#[test]
fn criterion_5_divergence_cancellation() {
    let ops = [phi(1), phi(3)];
    let target = phi(2);
    // both terms are singular at x2, so they integrate against one shared
    // two-center plan; the bulk shells there need a finer angular rule
    let opts = ComputeOptions { rel_tol: 1e-4, angular_order: 24, ..ComputeOptions::default() };
    let mut detail = String::new();
    let mut ok = true;
    for sep in [0.5, 1.0, 2.0] {
        let cfg = cfg2(sep);
        let entry = coefficient(&ops, &cfg, &target, &params(), 1, Method::Auto, &opts).unwrap();
        let got = entry.value.eval(&cfg, 1.0).unwrap();
        let expect = oracle::momentum_space_c1_phi_phi3(&[sep, 0.0, 0.0, 0.0], 1.0).unwrap();
        let rel = (got - expect).abs() / expect.abs();
        ok &= rel <= 1e-2;
        detail.push_str(&format!("sep {sep}: rel {rel:.1e}; "));
    }
    verdict("criterion 5 (divergence cancellation)", ok, detail.trim_end_matches("; "));
}

fn subtracted_integrand(ops: &[CompositeOp], cfg: &PointConfig, target: &CompositeOp) -> Integrand {
    let mut table = CoeffTable::new();
    build_integrand(ops, cfg, target, 0, &params(), &ComputeOptions::default(), &mut table).unwrap()
}

/// Criterion 6: near every external point the subtracted integrands of
/// criteria 2, 3, 5 grow no faster than the integrable bound (fitted
/// log-slope >= -3.9), while the unsubtracted main term of criterion 5
/// keeps its non-integrable divergence near x2 (slope <= -5.5).
#[test]
fn criterion_6_uv_slopes() {
    let cases: [(&str, Vec<CompositeOp>, CompositeOp); 3] = [
        ("phi phi -> phi^4", vec![phi(1), phi(1)], phi(4)),
        ("phi phi -> phi^2", vec![phi(1), phi(1)], phi(2)),
        ("phi phi^3 -> phi^2", vec![phi(1), phi(3)], phi(2)),
    ];
    let cfg = cfg2(1.0);
    let mut ok = true;
    let mut detail = String::new();
    for (name, ops, target) in &cases {
        let integrand = subtracted_integrand(ops, &cfg, target);
        for j in 0..cfg.len() {
            let f = |y: &[f64; 4]| integrand.eval(&cfg, y, 1.0).unwrap().abs();
            let slope = uv_slope(f, &cfg, j).unwrap();
            ok &= slope >= -3.9;
            detail.push_str(&format!("{name} x{}: {slope:.2}; ", j + 1));
        }
    }

    let integrand = subtracted_integrand(&[phi(1), phi(3)], &cfg, &phi(2));
    let main_only = |y: &[f64; 4]| integrand.eval_parts(&cfg, y, 1.0).unwrap().0.abs();
    let raw = uv_slope(main_only, &cfg, 1).unwrap();
    ok &= raw <= -5.5;
    detail.push_str(&format!("unsubtracted main x2: {raw:.2}"));
    verdict("criterion 6 (UV slopes)", ok, &detail);
}

/// Criterion 7: subtracted integrands decay faster than any power beyond a
/// few configuration diameters (fitted log-slope <= -6).
#[test]
fn criterion_7_ir_decay() {
    let cases: [(&str, Vec<CompositeOp>, CompositeOp); 3] = [
        ("phi phi -> phi^4", vec![phi(1), phi(1)], phi(4)),
        ("phi phi -> phi^2", vec![phi(1), phi(1)], phi(2)),
        ("phi phi^3 -> phi^2", vec![phi(1), phi(3)], phi(2)),
    ];
    let cfg = cfg2(1.0);
    let mut ok = true;
    let mut detail = String::new();
    for (name, ops, target) in &cases {
        let integrand = subtracted_integrand(ops, &cfg, target);
        let f = |y: &[f64; 4]| integrand.eval(&cfg, y, 1.0).unwrap().abs();
        let slope = ir_slope(f, &cfg).unwrap();
        ok &= slope <= -6.0;
        detail.push_str(&format!("{name}: {slope:.1}; "));
    }
    verdict("criterion 7 (IR decay)", ok, detail.trim_end_matches("; "));
}

/// Criterion 8: the quadrature reproduces the two table identities —
/// int C d4y = 1/m^2 (1e-6 relative) and the two-propagator convolution
/// K0(m|x12|)/8pi^2 (1e-4 relative).
#[test]
fn criterion_8_quadrature_self_tests() {
    let mut ok = true;
    let mut detail = String::new();

    for m in [1.0, 2.0] {
        let plan = QuadPlan::for_points(&[[0.0; 4]], m).with_rel_tol(1e-8);
        let got = quad::integrate_r4(|y| specfun::propagator(y, m).unwrap_or(f64::INFINITY), &plan)
            .unwrap();
        let expect = 1.0 / (m * m);
        let rel = (got.value - expect).abs() / expect;
        ok &= rel <= 1e-6;
        detail.push_str(&format!("int C (m={m}): rel {rel:.1e}; "));
    }

    let x1 = [0.5, 0.0, 0.0, 0.0];
    let x2 = [-0.5, 0.0, 0.0, 0.0];
    let plan = QuadPlan::for_points(&[x1, x2], 1.0)
        .with_rel_tol(1e-6)
        .with_angular_order(24);
    let f = |y: &[f64; 4]| {
        let d1 = [y[0] - x1[0], y[1] - x1[1], y[2] - x1[2], y[3] - x1[3]];
        let d2 = [y[0] - x2[0], y[1] - x2[1], y[2] - x2[2], y[3] - x2[3]];
        specfun::propagator(&d1, 1.0).unwrap_or(f64::INFINITY)
            * specfun::propagator(&d2, 1.0).unwrap_or(f64::INFINITY)
    };
    let got = quad::integrate_r4(f, &plan).unwrap();
    let expect = specfun::bessel_k0(1.0).unwrap() / (8.0 * std::f64::consts::PI.powi(2));
    let rel = (got.value - expect).abs() / expect;
    ok &= rel <= 1e-4;
    detail.push_str(&format!("int CC: rel {rel:.1e}"));
    verdict("criterion 8 (quadrature self-tests)", ok, &detail);
}

/// Criterion 9: translation invariance, permutation symmetry, dimensional
/// scaling covariance at order 0, and determinism of the seeded Monte Carlo.
#[test]
fn criterion_9_invariance_suite() {
    let mut ok = true;
    let mut detail = String::new();

    // translation: the order-1 coefficient only sees separations
    let cfg = cfg2(1.0);
    let shifted = cfg.translated([0.7, -1.3, 0.4, 2.1]);
    let a = coefficient(&[phi(1), phi(1)], &cfg, &phi(2), &params(), 1, Method::Auto, &ComputeOptions::default())
        .unwrap()
        .value
        .eval(&cfg, 1.0)
        .unwrap();
    let b = coefficient(&[phi(1), phi(1)], &shifted, &phi(2), &params(), 1, Method::Auto, &ComputeOptions::default())
        .unwrap()
        .value
        .eval(&shifted, 1.0)
        .unwrap();
    let rel = (a - b).abs() / a.abs();
    ok &= rel <= 1e-10;
    detail.push_str(&format!("translation: rel {rel:.1e}; "));

    // permutation: exchanging (A_i, x_i) pairs leaves the order-0 value fixed
    let p1 = [0.6, 0.1, 0.0, 0.0];
    let p2 = [-0.4, 0.3, 0.2, 0.0];
    let p3 = [0.0, -0.5, 0.1, 0.3];
    let cfg_a = PointConfig::new(vec![p1, p2, p3]).unwrap();
    let cfg_b = PointConfig::new(vec![p2, p1, p3]).unwrap();
    let ops_a = [phi(1), phi(3), phi(2)];
    let ops_b = [phi(3), phi(1), phi(2)];
    let va = wick::zeroth_order_external(&ops_a, &phi(4), cfg_a.base())
        .eval(&cfg_a, None, 1.0)
        .unwrap();
    let vb = wick::zeroth_order_external(&ops_b, &phi(4), cfg_b.base())
        .eval(&cfg_b, None, 1.0)
        .unwrap();
    let rel = (va - vb).abs() / va.abs().max(1e-300);
    ok &= rel <= 1e-12;
    detail.push_str(&format!("permutation: rel {rel:.1e}; "));

    // scaling covariance: C0(lambda x; m/lambda) = lambda^{[B]-sum[A]} C0(x; m)
    let cfg = PointConfig::new(vec![[0.3, 0.1, -0.2, 0.4], [-0.5, 0.2, 0.0, -0.1]]).unwrap();
    let lambda = 1.7;
    let ops = [phi(1), phi(3)];
    let target = phi(2);
    let expr = wick::zeroth_order_external(&ops, &target, cfg.base());
    let v = expr.eval(&cfg, None, 1.0).unwrap();
    let v_scaled = expr.eval(&cfg.scaled(lambda), None, 1.0 / lambda).unwrap();
    let power = target.dimension() as i32 - (ops[0].dimension() + ops[1].dimension()) as i32;
    let rel = (v_scaled - lambda.powi(power) * v).abs() / v.abs();
    ok &= rel <= 1e-10;
    detail.push_str(&format!("scaling: rel {rel:.1e}; "));

    // seeded Monte Carlo is bit-identical across runs
    let plan = QuadPlan::for_points(&[[0.0; 4]], 1.0);
    let f = |y: &[f64; 4]| specfun::propagator(y, 1.0).unwrap_or(f64::INFINITY);
    let m1 = quad::mc_integrate_r4(f, &plan, 20_000, 42).unwrap();
    let m2 = quad::mc_integrate_r4(f, &plan, 20_000, 42).unwrap();
    let identical = m1.value.to_bits() == m2.value.to_bits();
    ok &= identical;
    detail.push_str(&format!("mc determinism: {identical}"));
    verdict("criterion 9 (invariance suite)", ok, &detail);
}

/// Experimental order-2 path, property-based: (C2) phi,phi -> phi^2 must be
/// finite, seed-stable, and translation-invariant within 3 standard errors.
#[test]
fn experimental_second_order_properties() {
    let ops = [phi(1), phi(1)];
    let target = phi(2);
    let cfg = cfg2(1.0);
    // coarse settings: this is a property check, not a value check
    let opts =
        ComputeOptions { mc_samples: 8, seed: 5, rel_tol: 1e-2, ..ComputeOptions::default() };

    let a = coefficient(&ops, &cfg, &target, &params(), 2, Method::Auto, &opts).unwrap();
    assert!(a.experimental, "order-2 entries must be labeled experimental");
    let CoeffValue::Numeric(na) = &a.value else { panic!("expected numeric") };

    let b = coefficient(&ops, &cfg, &target, &params(), 2, Method::Auto, &opts).unwrap();
    let CoeffValue::Numeric(nb) = &b.value else { panic!("expected numeric") };

    let shifted = cfg.translated([0.9, -0.2, 1.4, 0.3]);
    let c = coefficient(&ops, &shifted, &target, &params(), 2, Method::Auto, &opts).unwrap();
    let CoeffValue::Numeric(nc) = &c.value else { panic!("expected numeric") };

    let finite = na.value.is_finite() && na.abs_error_estimate.is_finite();
    let stable = na.value.to_bits() == nb.value.to_bits();
    let sigma = (na.abs_error_estimate.powi(2) + nc.abs_error_estimate.powi(2)).sqrt();
    let invariant = (na.value - nc.value).abs() <= 3.0 * sigma;
    verdict(
        "experimental order 2",
        finite && stable && invariant,
        &format!(
            "value {:.3e} +- {:.1e}, seed-stable {stable}, |shifted diff| {:.1e} vs 3 sigma {:.1e}",
            na.value,
            na.abs_error_estimate,
            (na.value - nc.value).abs(),
            3.0 * sigma
        ),
    );
}
