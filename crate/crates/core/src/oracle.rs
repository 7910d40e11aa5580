//! Independent reference evaluations of the special functions and the
//! exponential-case outage integral, used by `selftest` and the test suites.
//!
//! Each oracle uses a different method from the production routine:
//! integral representations evaluated by quadrature, or plain series.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::specfun;

/// `J0(x) = (1/pi) int_0^pi cos(x sin t) dt` by the trapezoid rule, which is
/// spectrally accurate for this periodic integrand.
pub fn j0_integral(x: f64) -> f64 {
    let n = 64 + 2 * x.abs().ceil() as usize;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + 1.0);
    for i in 1..n {
        s += (x * (i as f64 * h).sin()).cos();
    }
    s / n as f64
}

/// Power series of `J0`, summed to convergence (accurate for moderate `x`).
pub fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Stirling series after shifting the argument above 20.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    while z < 20.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series + shift
}

/// Tanh-sinh quadrature on `[a, b]`; `f` receives the distances of the node
/// from `a` and from `b` so endpoint singularities can be evaluated exactly.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let node = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        // 1 - tanh(u) and 1 + tanh(u) without cancellation
        let right = 2.0 / (1.0 + (2.0 * u).exp());
        let left = 2.0 / (1.0 + (-2.0 * u).exp());
        (half * left, half * right, half * w)
    };
    let eval = |t: f64| {
        let (dl, dr, w) = node(t);
        if dl <= 0.0 || dr <= 0.0 || w == 0.0 {
            0.0
        } else {
            let v = f(dl, dr) * w;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        }
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..10 {
        h *= 0.5;
        let mut extra = 0.0;
        let mut k = 1;
        while k as f64 * h <= t_max {
            extra += eval(k as f64 * h) + eval(-(k as f64) * h);
            k += 2;
        }
        sum += extra;
        let next = sum * h;
        let done = (next - estimate).abs() <= 1e-15 * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Binet's second formula
/// `psi(x) = ln x - 1/(2x) - 2 int_0^inf t / ((t^2 + x^2)(e^(2 pi t) - 1)) dt`.
pub fn digamma_binet(x: f64) -> f64 {
    let f = |t: f64| {
        if t == 0.0 {
            1.0 / (2.0 * PI * x * x)
        } else {
            t / ((t * t + x * x) * (2.0 * PI * t).exp_m1())
        }
    };
    // t = s / (1 - s) maps [0, 1) onto [0, inf)
    let integral = tanh_sinh(
        |s, r| {
            let t = s / r;
            f(t) / (r * r)
        },
        0.0,
        1.0,
    );
    x.ln() - 0.5 / x - 2.0 * integral
}

/// `P(k, x)` from `(1/Gamma(k+1)) int_0^(x^k) exp(-u^(1/k)) du`.
pub fn lower_gamma_quadrature(k: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ln_norm = ln_gamma_stirling(k + 1.0);
    let top = x.powf(k);
    let inv = 1.0 / k;
    if x <= k + 1.0 {
        tanh_sinh(|u, _| (-u.powf(inv) - ln_norm).exp(), 0.0, top)
    } else {
        // 1 - Q(k, x) with the upper tail integrated over t in [x, inf)
        let upper = tanh_sinh(
            |s, r| {
                let t = x + s / r;
                ((k - 1.0) * t.ln() - t - (ln_norm - k.ln())).exp() / (r * r)
            },
            0.0,
            1.0,
        );
        1.0 - upper
    }
}

/// Euler integral `Gamma(c)/(Gamma(b)Gamma(c-b)) int_0^1 t^(b-1) (1-t)^(c-b-1) (1-z t)^(-a) dt`
/// for `c > b > 0`, `z <= 0`.
pub fn hyp2f1_euler(a: f64, b: f64, c: f64, z: f64) -> f64 {
    assert!(c > b && b > 0.0 && z <= 0.0);
    let ln_norm = ln_gamma_stirling(c) - ln_gamma_stirling(b) - ln_gamma_stirling(c - b);
    tanh_sinh(
        |t, r| ((b - 1.0) * t.ln() + (c - b - 1.0) * r.ln() - a * (-z * t).ln_1p() + ln_norm).exp(),
        0.0,
        1.0,
    )
}

/// Term-by-term hypergeometric series for `|z| < 1`.
pub fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for n in 0..100_000 {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Outage integral `int_0^inf P(k_B, 2^R g / s_B) e^(-g/s_E) / s_E dg` with an
/// exponential eavesdropper link, via `g = -s_E ln u`.
pub fn sop_exponential_eve(k_b: f64, scale_b: f64, scale_e: f64, rate_rs: f64) -> f64 {
    let c = 2f64.powf(rate_rs) * scale_e / scale_b;
    tanh_sinh(
        |u, _| lower_gamma_quadrature(k_b, -c * u.ln()),
        0.0,
        1.0,
    )
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub points: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Whether the error is absolute or relative.
    pub relative: bool,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: {} points, max {} error {:.3e} (tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.points,
            if self.relative { "relative" } else { "absolute" },
            self.max_error,
            self.tolerance
        )
    }
}

fn check<F: FnMut(&mut ChaCha8Rng) -> (f64, f64)>(
    name: &'static str,
    points: usize,
    tolerance: f64,
    relative: bool,
    seed: u64,
    mut sample: F,
) -> OracleCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error: f64 = 0.0;
    for _ in 0..points {
        let (got, want) = sample(&mut rng);
        let err = if relative {
            (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
        } else {
            (got - want).abs()
        };
        max_error = max_error.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    OracleCheck {
        name,
        points,
        max_error,
        tolerance,
        relative,
    }
}

/// Every special function against its oracle on 1000 random points.
pub fn special_function_checks(points: usize) -> Vec<OracleCheck> {
    vec![
        check("bessel_j0", points, 1e-10, false, 11, |rng| {
            let x = rng.random_range(0.0..50.0);
            (specfun::bessel_j0(x).unwrap(), j0_integral(x))
        }),
        check("ln_gamma", points, 1e-10, false, 12, |rng| {
            let x = rng.random_range(0.01..60.0);
            (specfun::ln_gamma(x).unwrap(), ln_gamma_stirling(x))
        }),
        check("digamma", points, 1e-10, false, 13, |rng| {
            let x = rng.random_range(0.05..100.0);
            (specfun::digamma(x).unwrap(), digamma_binet(x))
        }),
        check("lower_incomplete_gamma", points, 1e-8, true, 14, |rng| {
            let k = rng.random_range(0.1..50.0);
            let x = rng.random_range(0.0..2.5) * k + rng.random_range(0.0..1.0);
            (
                specfun::lower_incomplete_gamma_regularized(k, x).unwrap(),
                lower_gamma_quadrature(k, x),
            )
        }),
        check("gauss_2f1", points, 1e-8, true, 15, |rng| {
            let a = rng.random_range(0.1..8.0);
            let b = rng.random_range(0.1..8.0);
            let c = b + rng.random_range(0.2..6.0);
            let z = -10f64.powf(rng.random_range(-3.0..6.0));
            (specfun::gauss_2f1(a, b, c, z).unwrap(), hyp2f1_euler(a, b, c, z))
        }),
        check("gauss_2f1_unit_disc", points, 1e-8, true, 16, |rng| {
            let a = rng.random_range(0.1..8.0);
            let b = rng.random_range(0.1..8.0);
            let c = b + rng.random_range(0.2..6.0);
            let z = -rng.random_range(0.0..1.0);
            (specfun::gauss_2f1(a, b, c, z).unwrap(), hyp2f1_euler(a, b, c, z))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_agree_with_known_values() {
        assert!((j0_integral(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j0_series(PI) + 0.304_242_177_644_093_9).abs() < 1e-14);
        assert!((digamma_binet(1.0) + 0.577_215_664_901_532_9).abs() < 1e-13);
        assert!((ln_gamma_stirling(0.5) - 0.5 * PI.ln()).abs() < 1e-13);
        assert!((lower_gamma_quadrature(2.0, 3.0) - 0.800_851_726_528_544_1).abs() < 1e-13);
        assert!((hyp2f1_euler(1.0, 1.0, 2.0, -1.0) - 2f64.ln()).abs() < 1e-13);
        assert!((sop_exponential_eve(1.0, 1.0, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-12);
    }
}
