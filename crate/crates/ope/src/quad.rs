//! Numerical integration over R^4 of functions with integrable point
//! singularities and super-polynomial decay.
//!
//! The plane is split by a smooth partition of unity into a ball around each
//! singular center, the remaining bulk out to a far radius, and an
//! exponentially screened tail. Ball integrals use spherical coordinates
//! about the center with the radial substitution r = t^3, which flattens up
//! to r^-3 singularities; the bulk and tail use spherical coordinates about
//! the centroid. Radial integrals are adaptive Gauss-Kronrod, angular
//! integrals are product Gauss rules on the 3-sphere.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("integrand returned a non-finite value at y = {0:?}")]
    NonFiniteSample([f64; 4]),
    #[error("invalid plan: {0}")]
    BadPlan(String),
}

/// Region decomposition of R^4 with per-region schemes and tolerances.
#[derive(Debug, Clone)]
pub struct QuadPlan {
    /// singular points (balls of radius `rho` are carved out around each)
    pub centers: Vec<[f64; 4]>,
    pub rho: f64,
    /// bulk/tail boundary, measured from the centroid
    pub r_far: f64,
    pub rel_tol: f64,
    pub abs_tol_floor: f64,
    pub max_evals: usize,
    /// Gauss order per sphere angle for the reported value
    pub angular_order: usize,
    /// decay rate used by the tail envelope and the MC radial proposal
    pub tail_decay: f64,
    pub origin: [f64; 4],
}

impl QuadPlan {
    /// Default plan for singular centers at `points`: ball radius 0.4x the
    /// minimum pairwise distance and a far radius 8/m beyond the diameter.
    pub fn for_points(points: &[[f64; 4]], mass: f64) -> QuadPlan {
        let mut min_dist = f64::INFINITY;
        let mut diameter: f64 = 0.0;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d = dist(&points[i], &points[j]);
                min_dist = min_dist.min(d);
                diameter = diameter.max(d);
            }
        }
        let rho = if points.len() < 2 { 0.5 / mass } else { 0.4 * min_dist };
        let mut origin = [0.0; 4];
        for p in points {
            for k in 0..4 {
                origin[k] += p[k] / points.len() as f64;
            }
        }
        QuadPlan {
            centers: points.to_vec(),
            rho,
            r_far: diameter + 8.0 / mass,
            rel_tol: 1e-4,
            abs_tol_floor: 1e-10,
            max_evals: 200_000_000,
            angular_order: 16,
            tail_decay: mass,
            origin,
        }
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_r_far(mut self, r_far: f64) -> Self {
        self.r_far = r_far;
        self
    }

    pub fn with_angular_order(mut self, n: usize) -> Self {
        self.angular_order = n;
        self
    }

    pub fn with_max_evals(mut self, n: usize) -> Self {
        self.max_evals = n;
        self
    }

    fn validate(&self) -> Result<(), QuadError> {
        if !(self.rho > 0.0) {
            return Err(QuadError::BadPlan(format!("rho must be positive, got {}", self.rho)));
        }
        for i in 0..self.centers.len() {
            for j in (i + 1)..self.centers.len() {
                if dist(&self.centers[i], &self.centers[j]) < 2.0 * self.rho {
                    return Err(QuadError::BadPlan(format!(
                        "balls around centers {i} and {j} overlap (rho = {})",
                        self.rho
                    )));
                }
            }
        }
        let max_center = self
            .centers
            .iter()
            .map(|c| dist(c, &self.origin))
            .fold(0.0f64, f64::max);
        if self.r_far <= max_center + self.rho {
            return Err(QuadError::BadPlan("r_far must enclose all singular balls".into()));
        }
        Ok(())
    }
}

/// A quadrature result: value, error estimate and the per-region breakdown.
/// The breakdown entries sum to the value exactly.
#[derive(Debug, Clone)]
pub struct NumericCoeff {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub breakdown: Vec<(String, f64)>,
    pub converged: bool,
    pub evals: usize,
}

struct Counter {
    used: Cell<usize>,
    max: usize,
}

impl Counter {
    fn bump(&self) -> bool {
        self.used.set(self.used.get() + 1);
        self.used.get() <= self.max
    }
}

/// Deterministic region-decomposed integration of `f` over R^4.
pub fn integrate_r4<F: Fn(&[f64; 4]) -> f64>(
    f: F,
    plan: &QuadPlan,
) -> Result<NumericCoeff, QuadError> {
    plan.validate()?;
    let counter = Counter { used: Cell::new(0), max: plan.max_evals };
    let bad = Cell::new(None);
    let mut out_of_budget = false;

    let eval = |y: &[f64; 4]| -> f64 {
        // once a bad sample or exhausted budget is seen, stop doing work:
        // returning 0 keeps the adaptive subdivision from chasing NaNs
        if bad.get().is_some() || !counter.bump() {
            return 0.0;
        }
        let v = f(y);
        if !v.is_finite() {
            bad.set(Some(*y));
            return 0.0;
        }
        v
    };

    let coarse_order = (2 * plan.angular_order / 3).max(6);
    let fine = regions_pass(&eval, plan, plan.angular_order);
    if let Some(y) = bad.get() {
        return Err(QuadError::NonFiniteSample(y));
    }
    let coarse = regions_pass(&eval, plan, coarse_order);
    if counter.used.get() > plan.max_evals {
        out_of_budget = true;
    }

    let mut breakdown = Vec::new();
    let mut value = 0.0;
    let mut radial_err = 0.0;
    for (name, v, e) in &fine.regions {
        breakdown.push((name.clone(), *v));
        value += *v;
        radial_err += *e;
    }
    let coarse_value: f64 = coarse.regions.iter().map(|(_, v, _)| v).sum();
    let angular_err = (value - coarse_value).abs();
    let error = radial_err + angular_err + fine.tail_bound;
    Ok(NumericCoeff {
        value,
        abs_error_estimate: error,
        breakdown,
        converged: !out_of_budget,
        evals: counter.used.get(),
    })
}

struct PassResult {
    regions: Vec<(String, f64, f64)>,
    tail_bound: f64,
}

fn regions_pass<F: Fn(&[f64; 4]) -> f64>(eval: &F, plan: &QuadPlan, ang_order: usize) -> PassResult {
    let grid = sphere_grid(ang_order);
    let mut regions = Vec::new();

    // C-infinity bump: 1 inside rho/2, 0 outside rho. Infinite smoothness
    // matters: the bulk shells cross the transition region, and any
    // derivative jump in chi throttles the spectral angular convergence.
    let chi = |r: f64| -> f64 {
        if r <= 0.5 * plan.rho {
            1.0
        } else if r >= plan.rho {
            0.0
        } else {
            let t = (r - 0.5 * plan.rho) / (0.5 * plan.rho);
            let g = (-1.0 / t).exp();
            let h = (-1.0 / (1.0 - t)).exp();
            1.0 - g / (g + h)
        }
    };
    let chi_sum = |y: &[f64; 4]| -> f64 {
        plan.centers.iter().map(|c| chi(dist(y, c))).sum()
    };

    for (j, center) in plan.centers.iter().enumerate() {
        // int_0^rho with r = t^3
        let tmax = plan.rho.cbrt();
        let radial = |t: f64| -> f64 {
            let r = t * t * t;
            // below ~1e-10 rho the shell contribution of an integrable
            // singularity is negligible, while the sample points would round
            // onto the center itself and overflow the integrand
            if r < 1e-10 * plan.rho {
                return 0.0;
            }
            let shell = sphere_sum(eval, center, r, &grid);
            3.0 * t * t * r * r * r * chi(r) * shell
        };
        let (v0, _) = gk15(&radial, 0.0, tmax);
        let tol = (plan.rel_tol * v0.abs()).max(plan.abs_tol_floor);
        let (v, e) = adaptive_gk(&radial, 0.0, tmax, tol, 28);
        regions.push((format!("ball_{j}"), v, e));
    }

    // bulk: remainder function about the centroid out to r_far
    let remainder = |y: &[f64; 4]| -> f64 { (1.0 - chi_sum(y)) * eval(y) };
    let radial = |r: f64| -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        r * r * r * sphere_sum(&remainder, &plan.origin, r, &grid)
    };
    // seed splits at the ball shells so adaptivity finds the structure fast
    let mut cuts: Vec<f64> = vec![0.0, plan.r_far];
    for c in &plan.centers {
        let d = dist(c, &plan.origin);
        for candidate in [d - plan.rho, d - 0.5 * plan.rho, d, d + 0.5 * plan.rho, d + plan.rho] {
            if candidate > 0.0 && candidate < plan.r_far {
                cuts.push(candidate);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut rough = 0.0;
    for w in cuts.windows(2) {
        rough += gk15(&radial, w[0], w[1]).0;
    }
    let tol = (plan.rel_tol * rough.abs()).max(plan.abs_tol_floor);
    let mut bulk = 0.0;
    let mut bulk_err = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = adaptive_gk(&radial, w[0], w[1], tol * (w[1] - w[0]) / plan.r_far, 28);
        bulk += v;
        bulk_err += e;
    }
    regions.push(("bulk".to_string(), bulk, bulk_err));

    // tail octaves beyond r_far until the next octave is negligible
    let budget = (plan.rel_tol * (bulk.abs() + rough.abs())).max(plan.abs_tol_floor);
    let mut tail = 0.0;
    let mut tail_err = 0.0;
    let mut lo = plan.r_far;
    let mut last_octave = f64::INFINITY;
    for _ in 0..8 {
        let hi = 2.0 * lo;
        let (v, e) = adaptive_gk(&radial, lo, hi, budget, 12);
        tail += v;
        tail_err += e;
        last_octave = v.abs();
        lo = hi;
        if last_octave < 0.1 * budget {
            break;
        }
    }
    regions.push(("tail".to_string(), tail, tail_err));
    PassResult { regions, tail_bound: last_octave.min(budget * 10.0) }
}

fn sphere_sum<F: Fn(&[f64; 4]) -> f64>(
    eval: &F,
    center: &[f64; 4],
    r: f64,
    grid: &[([f64; 4], f64)],
) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (u, w) in grid {
        let y = [
            center[0] + r * u[0],
            center[1] + r * u[1],
            center[2] + r * u[2],
            center[3] + r * u[3],
        ];
        // Kahan accumulation keeps the reduction deterministic and tight
        let term = w * eval(&y) - comp;
        let t = sum + term;
        comp = (t - sum) - term;
        sum = t;
    }
    sum
}

/// Product Gauss grid on the unit 3-sphere; weights sum to 2 pi^2.
///
/// Each level uses the rule that is exact for its measure: Gauss-Chebyshev
/// of the second kind for the sin^2 polar weight, Gauss-Legendre in
/// cos(theta) for the sin weight, and the equispaced rule in the azimuth,
/// so all hyperspherical harmonics up to degree ~n integrate exactly.
pub fn sphere_grid(n: usize) -> Vec<([f64; 4], f64)> {
    let (nodes, weights) = gauss_legendre(n);
    let n3 = 2 * n;
    let mut grid = Vec::with_capacity(n * n * n3);
    for i in 1..=n {
        let th1 = std::f64::consts::PI * i as f64 / (n + 1) as f64;
        let jw1 = std::f64::consts::PI / (n + 1) as f64 * th1.sin().powi(2);
        for (x2, w2) in nodes.iter().zip(&weights) {
            // x2 = cos(theta2); the Jacobian sin(theta2) is absorbed by the
            // change of variables
            let s2 = (1.0 - x2 * x2).sqrt();
            for k in 0..n3 {
                let th3 = 2.0 * std::f64::consts::PI * k as f64 / n3 as f64;
                let w3 = 2.0 * std::f64::consts::PI / n3 as f64;
                let u = [
                    th1.cos(),
                    th1.sin() * x2,
                    th1.sin() * s2 * th3.cos(),
                    th1.sin() * s2 * th3.sin(),
                ];
                grid.push((u, jw1 * w2 * w3));
            }
        }
    }
    grid
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (p0 - x * p1) / (1.0 - x * x))
}

// Gauss-Kronrod 7-15 pair (QUADPACK abscissae).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut gauss = 0.0;
    let mut kron = 0.0;
    for i in 0..8 {
        let v = if i == 7 {
            f(c)
        } else {
            f(c - h * XGK[i]) + f(c + h * XGK[i])
        };
        kron += WGK[i] * v;
        if i % 2 == 1 {
            gauss += WG[i / 2] * v;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    // the raw Gauss-Kronrod difference; usually an overestimate, which keeps
    // the reported abs_error_estimate honest
    (value, err.max(1e-300 * value.abs()))
}

fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> (f64, f64) {
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> (f64, f64) {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth == 0 || !e.is_finite() {
            return (v, e);
        }
        let c = 0.5 * (a + b);
        let (vl, el) = go(f, a, c, 0.5 * tol, depth - 1);
        let (vr, er) = go(f, c, b, 0.5 * tol, depth - 1);
        (vl + vr, el + er)
    }
    go(f, a, b, tol.max(1e-300), max_depth)
}

/// Importance-sampled Monte Carlo over R^4: a mixture of per-ball proposals
/// (uniform radius, so the density carries the r^-3 of the volume element)
/// and a global exponential radial proposal about the centroid. Deterministic
/// for a fixed seed.
pub fn mc_integrate_r4<F: Fn(&[f64; 4]) -> f64>(
    f: F,
    plan: &QuadPlan,
    samples: usize,
    seed: u64,
) -> Result<NumericCoeff, QuadError> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc = plan.centers.len();
    let w_out = if nc == 0 { 1.0 } else { 0.5 };
    let w_ball = if nc == 0 { 0.0 } else { 0.5 / nc as f64 };
    let lambda = plan.tail_decay.max(1e-6);
    let two_pi2 = 2.0 * std::f64::consts::PI.powi(2);

    let density = |y: &[f64; 4]| -> f64 {
        // exponential component: Gamma(4, lambda) radius, uniform direction
        let r = dist(y, &plan.origin);
        let mut p = w_out * lambda.powi(4) * (-lambda * r).exp() / (6.0 * two_pi2);
        for c in &plan.centers {
            let rc = dist(y, c);
            if rc < plan.rho {
                p += w_ball / (two_pi2 * plan.rho * rc * rc * rc);
            }
        }
        p
    };

    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..samples {
        let pick: f64 = rng.gen();
        let y = if pick < w_out {
            let mut r = 0.0;
            for _ in 0..4 {
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                r += -u.ln() / lambda;
            }
            random_point(&mut rng, &plan.origin, r)
        } else {
            let j = ((pick - w_out) / w_ball) as usize;
            let j = j.min(nc - 1);
            let r = rng.gen::<f64>() * plan.rho;
            random_point(&mut rng, &plan.centers[j], r)
        };
        let fv = f(&y);
        let ratio = fv / density(&y);
        if !ratio.is_finite() {
            return Err(QuadError::NonFiniteSample(y));
        }
        let term = ratio - comp;
        let t = sum + term;
        comp = (t - sum) - term;
        sum = t;
        sumsq += ratio * ratio;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    let stderr = (var / n).sqrt();
    Ok(NumericCoeff {
        value: mean,
        abs_error_estimate: stderr,
        breakdown: vec![("mc".to_string(), mean)],
        converged: true,
        evals: samples,
    })
}

fn random_point(rng: &mut ChaCha8Rng, center: &[f64; 4], r: f64) -> [f64; 4] {
    // uniform direction from 4 normals (Box-Muller)
    let mut g = [0.0; 4];
    for pair in 0..2 {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        let mag = (-2.0 * u1.ln()).sqrt();
        g[2 * pair] = mag * (2.0 * std::f64::consts::PI * u2).cos();
        g[2 * pair + 1] = mag * (2.0 * std::f64::consts::PI * u2).sin();
    }
    let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3]).sqrt().max(1e-300);
    [
        center[0] + r * g[0] / norm,
        center[1] + r * g[1] / norm,
        center[2] + r * g[2] / norm,
        center[3] + r * g[3] / norm,
    ]
}

fn dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}
