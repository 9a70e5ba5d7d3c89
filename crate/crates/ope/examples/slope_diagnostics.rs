//! UV/IR behaviour of the counter-term-subtracted integrands: log-slope fits
//! near the external points (integrability) and far away (massive decay),
//! and the divergence of the UNsubtracted main term that the counter-terms
//! remove.

use ope::basis::{parse_op, ModelParams, PointConfig};
use ope::deform::{build_integrand, ir_slope, uv_slope, CoeffTable, ComputeOptions, Integrand};

fn main() {
    let params = ModelParams::new(1.0).unwrap();
    let cfg = PointConfig::new(vec![[0.5, 0.0, 0.0, 0.0], [-0.5, 0.0, 0.0, 0.0]]).unwrap();
    let opts = ComputeOptions::default();
    let mut table = CoeffTable::new();

    for (ops_spec, target_spec) in [
        (["phi", "phi"], "phi^4"),
        (["phi", "phi"], "phi^2"),
        (["phi", "phi^3"], "phi^2"),
    ] {
        let ops: Vec<_> = ops_spec.iter().map(|s| parse_op(s).unwrap()).collect();
        let target = parse_op(target_spec).unwrap();
        let integrand =
            build_integrand(&ops, &cfg, &target, 0, &params, &opts, &mut table).unwrap();
        let assembled = integrand.assembled().unwrap().compile(&cfg, params.mass).unwrap();

        println!("{} x {} -> {}", ops_spec[0], ops_spec[1], target_spec);
        for j in 0..cfg.len() {
            let s = uv_slope(|p| assembled.eval(p), &cfg, j).unwrap();
            println!("  UV slope near x{} = {s:+.3}  (integrable: >= -3.9)", j + 1);
        }
        if let Some(s) = ir_slope(|p| assembled.eval(p), &cfg) {
            println!("  IR slope          = {s:+.3}  (screened: <= -6)");
        }

        let Integrand::Order0 { main, .. } = &integrand else { unreachable!() };
        let main = main.compile(&cfg, params.mass).unwrap();
        let s = uv_slope(|p| main.eval(p), &cfg, 1).unwrap();
        println!("  unsubtracted main term near x2 = {s:+.3}\n");
    }
}
