//! Nakagami/Gamma fitting of end-to-end channel gains and secrecy outage
//! probability: closed form, numerical integration and Monte Carlo.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{domain, Error, Result};
use crate::specfun::{
    ln_beta, ln_gamma, ln_gauss_2f1, lower_incomplete_gamma_regularized,
    upper_incomplete_gamma_regularized,
};

pub const M_FLOOR: f64 = 0.5;
pub const M_CEIL: f64 = 500.0;
/// Amount by which a closed-form value may exceed one before it is flagged.
pub const RANGE_SLACK: f64 = 1e-9;

/// Fitted Nakagami-m law of a channel magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiFit {
    pub m: f64,
    pub omega: f64,
    pub delta_stat: f64,
    pub sample_count: usize,
    /// Zero samples left out of the log-mean.
    pub zeros_excluded: usize,
    /// Set when the shape hit a clamp (or `delta_stat` was zero).
    pub degenerate: bool,
}

impl NakagamiFit {
    /// Gamma law of `gamma_bar |H|^2`.
    pub fn gamma_params(&self, gamma_bar: f64) -> GammaParams {
        GammaParams {
            k: self.m,
            theta: self.omega / self.m,
            gamma_bar,
        }
    }
}

/// Gamma law with shape `k` and effective scale `gamma_bar * theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub k: f64,
    pub theta: f64,
    pub gamma_bar: f64,
}

impl GammaParams {
    pub fn new(k: f64, theta: f64, gamma_bar: f64) -> Result<Self> {
        let p = Self { k, theta, gamma_bar };
        p.validate()?;
        Ok(p)
    }

    pub fn scale(&self) -> f64 {
        self.gamma_bar * self.theta
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.k, self.theta, self.gamma_bar]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid Gamma parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyParams {
    pub rate_rs: f64,
    pub rho: f64,
}

impl SecrecyParams {
    pub fn new(rate_rs: f64, rho: f64) -> Result<Self> {
        if !(rate_rs >= 0.0) || !rate_rs.is_finite() || !(rho > 0.0) || !rho.is_finite() {
            return Err(domain(format!(
                "secrecy parameters need R_S >= 0 and rho > 0, got {rate_rs} and {rho}"
            )));
        }
        Ok(Self { rate_rs, rho })
    }

    /// `rho = (gamma_bar_E theta_E) / (gamma_bar_B theta_B)`.
    pub fn from_fits(b: &GammaParams, e: &GammaParams, rate_rs: f64) -> Result<Self> {
        Self::new(rate_rs, e.scale() / b.scale())
    }
}

/// Maximum-likelihood Nakagami-m fit of nonnegative magnitudes.
pub fn fit_mle(samples: &[f64]) -> Result<NakagamiFit> {
    if samples.len() < 2 {
        return Err(domain("fit_mle needs at least two samples"));
    }
    if let Some(bad) = samples.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(domain(format!("magnitudes must be finite and nonnegative, got {bad}")));
    }
    let n = samples.len() as f64;
    let omega = samples.iter().map(|v| v * v).sum::<f64>() / n;
    if !(omega > 0.0) {
        return Err(domain("all samples are zero"));
    }
    let mut zeros = 0;
    let mut log_sum = 0.0;
    for v in samples {
        if *v == 0.0 {
            zeros += 1;
        } else {
            log_sum += (v * v).ln();
        }
    }
    if zeros > 0 {
        log::warn!("fit_mle: {zeros} zero samples excluded from the log-mean");
    }
    let log_mean = log_sum / (samples.len() - zeros) as f64;
    let delta = (omega.ln() - log_mean).max(0.0);
    let (m, degenerate) = if delta == 0.0 {
        (M_CEIL, true)
    } else {
        let raw = (1.0 + (1.0 + 4.0 * delta / 3.0).sqrt()) / (4.0 * delta);
        let m = raw.clamp(M_FLOOR, M_CEIL);
        (m, m != raw)
    };
    Ok(NakagamiFit {
        m,
        omega,
        delta_stat: delta,
        sample_count: samples.len(),
        zeros_excluded: zeros,
        degenerate,
    })
}

/// Moment-matched Gamma law of squared magnitudes (unit `gamma_bar`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomFit {
    pub params: GammaParams,
    pub degenerate: bool,
}

pub fn fit_mom(power_samples: &[f64]) -> Result<MomFit> {
    if power_samples.len() < 2 {
        return Err(domain("fit_mom needs at least two samples"));
    }
    if let Some(bad) = power_samples.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(domain(format!("samples must be finite and nonnegative, got {bad}")));
    }
    let n = power_samples.len() as f64;
    let mean = power_samples.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(domain("all samples are zero"));
    }
    let var = power_samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Ok(MomFit {
            params: GammaParams {
                k: M_CEIL,
                theta: mean / M_CEIL,
                gamma_bar: 1.0,
            },
            degenerate: true,
        });
    }
    Ok(MomFit {
        params: GammaParams {
            k: mean * mean / var,
            theta: var / mean,
            gamma_bar: 1.0,
        },
        degenerate: false,
    })
}

pub fn gamma_pdf(x: f64, p: &GammaParams) -> Result<f64> {
    p.validate()?;
    if !(x >= 0.0) {
        return Err(domain(format!("gamma_pdf needs x >= 0, got {x}")));
    }
    let s = p.scale();
    if x == 0.0 {
        return Ok(match p.k.partial_cmp(&1.0) {
            Some(Ordering::Less) => f64::INFINITY,
            Some(Ordering::Equal) => 1.0 / s,
            _ => 0.0,
        });
    }
    let ln = (p.k - 1.0) * x.ln() - x / s - ln_gamma(p.k)? - p.k * s.ln();
    Ok(ln.exp())
}

pub fn gamma_cdf(x: f64, p: &GammaParams) -> Result<f64> {
    p.validate()?;
    if !(x >= 0.0) {
        return Err(domain(format!("gamma_cdf needs x >= 0, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    lower_incomplete_gamma_regularized(p.k, x / p.scale())
}

/// Closed-form outage value with its pre-clamp magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormSop {
    pub value: f64,
    pub raw: f64,
    pub out_of_range: bool,
}

/// `rho^k 2^(k R) / (k B(k,1)) 2F1(k+1, k; 1+k; -2^R rho)` with `k = k_b`.
pub fn sop_closed_form(k_b: f64, params: &SecrecyParams) -> Result<ClosedFormSop> {
    if !(k_b > 0.0) || !k_b.is_finite() {
        return Err(domain(format!("k_B must be positive, got {k_b}")));
    }
    let p = SecrecyParams::new(params.rate_rs, params.rho)?;
    let two_r = p.rate_rs * std::f64::consts::LN_2;
    let z = -(two_r.exp() * p.rho);
    let ln = k_b * p.rho.ln() + k_b * two_r - k_b.ln() - ln_beta(k_b, 1.0)?
        + ln_gauss_2f1(k_b + 1.0, k_b, 1.0 + k_b, z)?;
    let raw = ln.exp();
    Ok(ClosedFormSop {
        value: raw.clamp(0.0, 1.0),
        raw,
        out_of_range: raw > 1.0 + RANGE_SLACK,
    })
}

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_ABS_FLOOR: f64 = 1e-300;
const QUAD_MAX_INTERVALS: usize = 4000;

/// `int_0^inf F_B(2^R g) f_E(g) dg` by adaptive Gauss-Kronrod quadrature.
pub fn sop_numeric(fit_b: &GammaParams, fit_e: &GammaParams, rate_rs: f64) -> Result<f64> {
    fit_b.validate()?;
    fit_e.validate()?;
    if !(rate_rs >= 0.0) || !rate_rs.is_finite() {
        return Err(domain(format!("R_S must be nonnegative, got {rate_rs}")));
    }
    // with g = s_E t the integral is E_t[P(k_B, c t)], t ~ Gamma(k_E, 1)
    let c = 2f64.powf(rate_rs) * fit_e.scale() / fit_b.scale();
    let kb = fit_b.k;
    let ke = fit_e.k;
    let t_max = gamma_tail_point(ke)?;
    let ln_norm_t = ln_gamma(ke)?;
    let value = if ke >= 1.0 {
        integrate(
            |t| {
                if t <= 0.0 {
                    return if ke == 1.0 { lower_p(kb, 0.0) } else { 0.0 };
                }
                let dens = ((ke - 1.0) * t.ln() - t - ln_norm_t).exp();
                lower_p(kb, c * t) * dens
            },
            0.0,
            t_max,
        )?
    } else {
        // u = t^k_E removes the integrable singularity at the origin
        let ln_norm_u = ln_gamma(ke + 1.0)?;
        let inv = 1.0 / ke;
        integrate(
            |u| {
                let t = u.powf(inv);
                lower_p(kb, c * t) * (-t - ln_norm_u).exp()
            },
            0.0,
            t_max.powf(ke),
        )?
    };
    Ok(value.clamp(0.0, 1.0))
}

fn lower_p(k: f64, x: f64) -> f64 {
    lower_incomplete_gamma_regularized(k, x).unwrap_or(if x > 0.0 { 1.0 } else { 0.0 })
}

/// A point beyond which the Gamma(k, 1) tail mass is negligible.
fn gamma_tail_point(k: f64) -> Result<f64> {
    let mut t = k + 40.0 * k.sqrt().max(1.0);
    while upper_incomplete_gamma_regularized(k, t)? > 1e-300 && t < 1e6 {
        t *= 1.5;
    }
    Ok(t.max(750.0))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: k * half,
        error: ((k - g) * half).abs(),
    }
}

/// Globally adaptive G7-K15 quadrature on `[a, b]`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    // start from a geometric split so that mass near the origin is resolved
    let mut edges = vec![a];
    let mut x = (b - a) * 1e-12;
    while a + x < b {
        edges.push(a + x);
        x *= 8.0;
    }
    edges.push(b);
    let (mut total, mut err) = (0.0, 0.0);
    for w in edges.windows(2) {
        let s = kronrod(&f, w[0], w[1]);
        total += s.value;
        err += s.error;
        heap.push(s);
    }
    while err > (QUAD_REL_TOL * total.abs()).max(QUAD_ABS_FLOOR) {
        if heap.len() >= QUAD_MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature did not converge (estimate {total}, error {err})"
            )));
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval cannot be split further at this precision
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    if !total.is_finite() {
        return Err(Error::Numeric("quadrature produced a non-finite value".into()));
    }
    // recompute to shed accumulated rounding in the running sums
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Monte Carlo outage estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

pub const MIN_MC_PAIRS: usize = 1000;

/// Fraction of pairs with `log2((1+g_B)/(1+g_E)) < R_S`.
pub fn sop_monte_carlo(gamma_b: &[f64], gamma_e: &[f64], rate_rs: f64) -> Result<McEstimate> {
    let threshold = 2f64.powf(rate_rs);
    count_outages(gamma_b, gamma_e, rate_rs, |b, e| 1.0 + b < threshold * (1.0 + e))
}

/// Fraction of pairs with `g_B < 2^R_S g_E`, the event behind the
/// lower-bound integral.
pub fn sop_monte_carlo_lower_bound(
    gamma_b: &[f64],
    gamma_e: &[f64],
    rate_rs: f64,
) -> Result<McEstimate> {
    let threshold = 2f64.powf(rate_rs);
    count_outages(gamma_b, gamma_e, rate_rs, |b, e| b < threshold * e)
}

fn count_outages<F: Fn(f64, f64) -> bool>(
    gamma_b: &[f64],
    gamma_e: &[f64],
    rate_rs: f64,
    outage: F,
) -> Result<McEstimate> {
    if gamma_b.len() != gamma_e.len() {
        return Err(domain(format!(
            "paired samples differ in length: {} vs {}",
            gamma_b.len(),
            gamma_e.len()
        )));
    }
    if gamma_b.len() < MIN_MC_PAIRS {
        return Err(domain(format!(
            "Monte Carlo needs at least {MIN_MC_PAIRS} pairs, got {}",
            gamma_b.len()
        )));
    }
    if !(rate_rs >= 0.0) || !rate_rs.is_finite() {
        return Err(domain(format!("R_S must be nonnegative, got {rate_rs}")));
    }
    let n = gamma_b.len() as f64;
    let hits = gamma_b
        .iter()
        .zip(gamma_e)
        .filter(|(b, e)| outage(**b, **e))
        .count() as f64;
    let p = hits / n;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
    })
}

/// One `(link, m, omega, k, theta)` record.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub link: String,
    pub m: f64,
    pub omega: f64,
    pub k: f64,
    pub theta: f64,
}

impl FitRow {
    pub const HEADER: &'static str = "link,m,omega,k,theta";

    pub fn new(link: &str, fit: &NakagamiFit) -> Self {
        let g = fit.gamma_params(1.0);
        Self {
            link: link.to_string(),
            m: fit.m,
            omega: fit.omega,
            k: g.k,
            theta: g.theta,
        }
    }

    pub fn to_csv(&self) -> String {
        format!("{},{:?},{:?},{:?},{:?}", self.link, self.m, self.omega, self.k, self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let f = fit_mle(&[1.0; 4]).unwrap();
        assert_eq!(f.omega, 1.0);
        assert_eq!(f.delta_stat, 0.0);
        assert_eq!(f.m, M_CEIL);
        assert!(f.degenerate);
        assert!(fit_mom(&[2.0; 5]).unwrap().degenerate);
    }

    #[test]
    fn shape_from_delta() {
        // two samples whose squares are 1 and x give delta = ln((1+x)/2) - ln(x)/2
        let target = 0.1f64;
        let mut lo = 1.0;
        let mut hi = 100.0;
        for _ in 0..200 {
            let x: f64 = 0.5 * (lo + hi);
            let d = ((1.0 + x) / 2.0).ln() - 0.5 * x.ln();
            if d < target {
                lo = x;
            } else {
                hi = x;
            }
        }
        let f = fit_mle(&[1.0, lo.sqrt()]).unwrap();
        assert!(close(f.delta_stat, 0.1, 1e-12));
        assert!(close(f.m, 5.161_453_237_111_886, 1e-9));
    }

    #[test]
    fn zeros_are_excluded_from_log_mean() {
        let f = fit_mle(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(f.zeros_excluded, 1);
        assert!(f.delta_stat.is_finite());
        assert!(fit_mle(&[0.0, 0.0]).is_err());
        assert!(fit_mle(&[1.0]).is_err());
    }

    #[test]
    fn exponential_closed_form_values() {
        let half = sop_closed_form(1.0, &SecrecyParams::new(0.0, 1.0).unwrap()).unwrap();
        assert!(close(half.value, 0.5, 1e-14));
        let two_thirds = sop_closed_form(1.0, &SecrecyParams::new(1.0, 1.0).unwrap()).unwrap();
        assert!(close(two_thirds.value, 2.0 / 3.0, 1e-14));
        let tiny = sop_closed_form(1.0, &SecrecyParams::new(0.0, 1e-12).unwrap()).unwrap();
        assert!(tiny.value < 1e-11);
        assert!(sop_closed_form(0.0, &SecrecyParams { rate_rs: 0.0, rho: 1.0 }).is_err());
    }

    #[test]
    fn numeric_matches_exponential_case() {
        let b = GammaParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(close(sop_numeric(&b, &b, 0.0).unwrap(), 0.5, 1e-12));
        let b = GammaParams::new(2.0, 10.0, 1.0).unwrap();
        let e = GammaParams::new(1.0, 1.0, 1.0).unwrap();
        let num = sop_numeric(&b, &e, 1.0).unwrap();
        let rho = SecrecyParams::from_fits(&b, &e, 1.0).unwrap();
        let cf = sop_closed_form(2.0, &rho).unwrap().value;
        assert!(close(num, cf, 1e-6 * cf));
    }

    #[test]
    fn cdf_and_pdf_basics() {
        let p = GammaParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(gamma_cdf(0.0, &p).unwrap(), 0.0);
        assert!(close(gamma_cdf(2.0, &p).unwrap(), 1.0 - (-2.0f64).exp(), 1e-14));
        assert!(close(gamma_pdf(2.0, &p).unwrap(), (-2.0f64).exp(), 1e-14));
        assert_eq!(gamma_cdf(f64::INFINITY, &p).unwrap(), 1.0);
        assert!(gamma_pdf(-1.0, &p).is_err());
        assert!(gamma_cdf(-1.0, &p).is_err());
    }

    #[test]
    fn monte_carlo_edges() {
        let b = vec![1e6; 1000];
        let e = vec![1.0; 1000];
        assert_eq!(sop_monte_carlo(&b, &e, 0.1).unwrap().estimate, 0.0);
        assert_eq!(sop_monte_carlo(&e, &e, 0.5).unwrap().estimate, 1.0);
        assert!(sop_monte_carlo(&b, &e[..999], 0.1).is_err());
        assert!(sop_monte_carlo(&b[..10], &e[..10], 0.1).is_err());
        // lower-bound event is rarer
        let lb = sop_monte_carlo_lower_bound(&e, &e, 0.5).unwrap();
        assert_eq!(lb.estimate, 1.0);
    }

    #[test]
    fn fit_row_format() {
        let f = fit_mle(&[1.0, 2.0, 3.0]).unwrap();
        let row = FitRow::new("b", &f);
        assert!(row.to_csv().starts_with("b,"));
        assert_eq!(FitRow::HEADER.split(',').count(), 5);
    }
}
