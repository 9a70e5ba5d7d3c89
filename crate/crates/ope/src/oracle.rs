//! Independent momentum-space computations used to cross-validate the
//! position-space results.
//!
//! Everything here is deliberately self-contained: the 1D integrators are
//! plain Simpson rules, not the Gauss-Kronrod machinery of `quad`, so that an
//! agreement between the two pipelines actually means something.

use thiserror::Error;

use crate::specfun;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("radial transform failed to converge: last two estimates {0} and {1}")]
    TransformNonConvergence(f64, f64),
    #[error("separation must be nonzero")]
    ZeroSeparation,
}

/// Composite Simpson rule with n panels (n rounded up to even).
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// The subtracted one-loop bubble
///
///   B(q^2) = int d^4p/(2pi)^4 [ 1/((p^2+m^2)((p+q)^2+m^2)) - 1/(p^2+m^2)^2 ]
///
/// reduced to a Feynman-parameter integral:
///
///   B(q^2) = -(1/16 pi^2) int_0^1 dx log(1 + x(1-x) q^2/m^2).
pub fn subtracted_bubble(q2: f64, m: f64) -> f64 {
    if q2 == 0.0 {
        return 0.0;
    }
    let s = q2 / (m * m);
    // the substitution x = sin^2(pi t / 2) removes the endpoint curvature at
    // large s, where the integrand bends sharply near x = 0 and x = 1
    let integral = simpson(
        |t| {
            let x = (0.5 * std::f64::consts::PI * t).sin().powi(2);
            let jac = 0.5 * std::f64::consts::PI * (std::f64::consts::PI * t).sin();
            jac * (1.0 + x * (1.0 - x) * s).ln()
        },
        0.0,
        1.0,
        1024,
    );
    -integral / (16.0 * std::f64::consts::PI.powi(2))
}

/// Sampled bubble on a uniform q-grid with local cubic (Catmull-Rom)
/// interpolation, for use inside the radial transform where the bubble is
/// evaluated millions of times.
pub struct BubbleProfile {
    q_max: f64,
    h: f64,
    values: Vec<f64>,
    mass: f64,
}

impl BubbleProfile {
    pub fn build(mass: f64, q_max: f64, n: usize) -> BubbleProfile {
        let n = n.max(8);
        let h = q_max / n as f64;
        let values = (0..=n)
            .map(|i| subtracted_bubble((i as f64 * h).powi(2), mass))
            .collect();
        BubbleProfile { q_max, h, values, mass }
    }

    pub fn value(&self, q: f64) -> f64 {
        if q >= self.q_max {
            return subtracted_bubble(q * q, self.mass);
        }
        let t = q / self.h;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let u = t - i as f64;
        // Catmull-Rom with clamped endpoints; the bubble is even in q, so
        // reflect across zero at the lower edge
        let p0 = if i == 0 { self.values[1] } else { self.values[i - 1] };
        let p1 = self.values[i];
        let p2 = self.values[i + 1];
        let p3 = if i + 2 < self.values.len() {
            self.values[i + 2]
        } else {
            2.0 * p2 - p1
        };
        let a = 2.0 * p1;
        let b = p2 - p0;
        let c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
        let d = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
        0.5 * (a + b * u + c * u * u + d * u * u * u)
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (i as f64 * self.h, v))
    }
}

/// J_1 by the usual rational/asymptotic split (accurate to ~1e-7, plenty for
/// percent-level cross-checks).
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let result = if ax < 8.0 {
        let y = x * x;
        let p1 = x
            * (72362614232.0
                + y * (-7895059235.0
                    + y * (242396853.1 + y * (-2972611.439 + y * (15704.48260 + y * -30.16036606)))));
        let p2 = 144725228442.0
            + y * (2300535178.0
                + y * (18583304.74 + y * (99447.43394 + y * (376.9991397 + y))));
        return p1 / p2;
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 2.356194491;
        let p1 = 1.0
            + y * (0.183105e-2
                + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * -0.240337019e-6)));
        let p2 = 0.04687499995
            + y * (-0.2002690873e-3
                + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        (0.636619772 / ax).sqrt() * (xx.cos() * p1 - z * xx.sin() * p2)
    };
    if x < 0.0 {
        -result
    } else {
        result
    }
}

/// 4D plane-wave angular average: (1/2pi^2) int_{S^3} e^{i q.x} dOmega as a
/// direct 1D integral over the polar angle. Used to validate the closed-form
/// kernel 2 J_1(z)/z before it is trusted inside the transform.
pub fn angular_average_direct(z: f64) -> f64 {
    (2.0 / std::f64::consts::PI)
        * simpson(|th| (z * th.cos()).cos() * th.sin().powi(2), 0.0, std::f64::consts::PI, 400)
}

/// (1/4 pi^2 r) int_0^inf q^2 J_1(q r) g(q) dq, the radial form of the 4D
/// Fourier transform int d^4q/(2pi)^4 e^{iq.x} g(|q|). The oscillatory tail
/// is summed in half-period chunks with repeated averaging.
pub fn radial_fourier<G: Fn(f64) -> f64>(g: G, r: f64) -> Result<f64, OracleError> {
    if !(r > 0.0) {
        return Err(OracleError::ZeroSeparation);
    }
    let chunk = std::f64::consts::PI / r;
    let n_chunks = 48;
    let mut partial = Vec::with_capacity(n_chunks);
    let mut acc = 0.0;
    for k in 0..n_chunks {
        let a = k as f64 * chunk;
        let b = a + chunk;
        acc += simpson(|q| q * q * bessel_j1(q * r) * g(q), a, b, 64);
        partial.push(acc);
    }
    // repeated averaging of the alternating partial sums
    let mut rows = partial;
    for _ in 0..12 {
        if rows.len() < 2 {
            break;
        }
        rows = rows.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let est = *rows.last().expect("non-empty");
    let prev = if rows.len() >= 2 { rows[rows.len() - 2] } else { est };
    let value = est / (4.0 * std::f64::consts::PI.powi(2) * r);
    let prev_value = prev / (4.0 * std::f64::consts::PI.powi(2) * r);
    if (value - prev_value).abs() > 1e-4 * value.abs().max(1e-8) {
        return Err(OracleError::TransformNonConvergence(prev_value, value));
    }
    Ok(value)
}

/// Momentum-space evaluation of the first-order coefficient of phi^2 in the
/// phi x phi^3 expansion:
///
///   -3 int d^4q/(2pi)^4 e^{iq.x12} B(q^2) / (q^2 + m^2).
pub fn momentum_space_c1_phi_phi3(x12: &[f64; 4], m: f64) -> Result<f64, OracleError> {
    let r = (x12.iter().map(|c| c * c).sum::<f64>()).sqrt();
    if !(r > 0.0) {
        return Err(OracleError::ZeroSeparation);
    }
    let q_end = 49.0 * std::f64::consts::PI / r;
    let profile = BubbleProfile::build(m, q_end, 6000);
    let value = radial_fourier(|q| profile.value(q) / (q * q + m * m), r)?;
    Ok(-3.0 * value)
}

/// The exact first-order phi x phi -> phi^2 coefficient, for direct
/// comparison: -(1/16 pi^2) K_0(m |x12|).
pub fn k0_check(x12: &[f64; 4], m: f64) -> Result<f64, OracleError> {
    let r = (x12.iter().map(|c| c * c).sum::<f64>()).sqrt();
    let k0 = specfun::bessel_k0(m * r).map_err(|_| OracleError::ZeroSeparation)?;
    Ok(-k0 / (16.0 * std::f64::consts::PI.powi(2)))
}
