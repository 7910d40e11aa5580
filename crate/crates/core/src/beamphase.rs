//! Joint transmit beamforming and phase-shift design by alternating
//! optimization: phase alignment for a fixed beamformer, then MRT for fixed
//! phases.

use num_complex::Complex64;

use crate::channel::{align_one, uniform_beamformer, ChannelSet, Link};
use crate::error::{domain, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 50;

/// State of the alternating optimization.
#[derive(Debug, Clone)]
pub struct BfPsState {
    pub w: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    /// `|h^H Psi G w|^2` toward B after each half-update (multiply by the
    /// mean SNR to get the SNR). The first entry uses the initial beamformer.
    pub snr_trace: Vec<f64>,
    pub iterations: usize,
}

impl BfPsState {
    /// Final unit-mean-SNR gain toward B.
    pub fn gain(&self) -> f64 {
        *self.snr_trace.last().unwrap_or(&0.0)
    }
}

/// Effective row `e_l = sum_m conj(h_m) psi_m G[m, l]` toward B.
pub fn effective_channel(channels: &ChannelSet, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    if psi.len() != channels.elements() {
        return Err(domain(format!(
            "{} phases for {} elements",
            psi.len(),
            channels.elements()
        )));
    }
    let mut e = vec![Complex64::new(0.0, 0.0); channels.antennas()];
    for (l, el) in e.iter_mut().enumerate() {
        for (m, p) in psi.iter().enumerate() {
            *el += channels.h2b[m].conj() * p * channels.g[(m, l)];
        }
    }
    Ok(e)
}

/// MRT beamformer `e^H / ||e||` for the effective channel of `psi`.
pub fn mrt_update(channels: &ChannelSet, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    let e = effective_channel(channels, psi)?;
    mrt_from_effective(&e)
}

pub(crate) fn mrt_from_effective(e: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = e.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateChannel(
            "effective channel toward B vanishes".into(),
        ));
    }
    Ok(e.iter().map(|v| v.conj() / norm).collect())
}

fn gain(channels: &ChannelSet, psi: &[Complex64], w: &[Complex64]) -> Result<f64> {
    Ok(channels.end_to_end(Link::Bob, psi, w)?.norm_sqr())
}

/// Alternates phase alignment and MRT from `w = 1/sqrt(L)` until the
/// fractional gain increase of an iteration drops below `tol`.
pub fn optimize(channels: &ChannelSet, tol: f64, max_iter: usize) -> Result<BfPsState> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(domain(format!(
            "optimize needs tol > 0 and max_iter >= 1, got {tol} and {max_iter}"
        )));
    }
    let mut w = uniform_beamformer(channels.antennas());
    let mut psi = align(channels, &w);
    let mut snr_trace = vec![gain(channels, &psi, &w)?];
    let mut iterations = 0;
    while iterations < max_iter {
        if iterations > 0 {
            psi = align(channels, &w);
        }
        w = mrt_update(channels, &psi)?;
        iterations += 1;
        let prev = *snr_trace.last().unwrap();
        let next = gain(channels, &psi, &w)?;
        snr_trace.push(next);
        if next - prev < tol * prev.abs() {
            break;
        }
    }
    Ok(BfPsState {
        w,
        psi,
        snr_trace,
        iterations,
    })
}

fn align(channels: &ChannelSet, w: &[Complex64]) -> Vec<Complex64> {
    (0..channels.elements())
        .map(|m| align_one(channels.h2b[m], channels.row_dot(m, w)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use std::sync::Arc;

    fn set(g: DMatrix<Complex64>, h: DVector<Complex64>) -> ChannelSet {
        let m = h.len();
        ChannelSet {
            g,
            h2e: h.clone(),
            h2b: h,
            r_chol: Arc::new(DMatrix::identity(m, m)),
        }
    }

    #[test]
    fn mrt_on_axis() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let ch = set(
            DMatrix::from_row_slice(1, 2, &[one, zero]),
            DVector::from_element(1, one),
        );
        let w = mrt_update(&ch, &[one]).unwrap();
        assert_eq!(w, vec![one, zero]);
    }

    #[test]
    fn degenerate_effective_channel() {
        let zero = Complex64::new(0.0, 0.0);
        let ch = set(DMatrix::from_element(1, 2, zero), DVector::from_element(1, zero));
        assert!(matches!(
            mrt_update(&ch, &[Complex64::new(1.0, 0.0)]),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn scalar_case_converges_immediately() {
        let h = Complex64::from_polar(0.7, 1.1);
        let g = Complex64::from_polar(1.3, -0.4);
        let ch = set(DMatrix::from_element(1, 1, g), DVector::from_element(1, h));
        let st = optimize(&ch, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(st.iterations, 1);
        assert!((st.gain() - (0.7f64 * 1.3).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let one = Complex64::new(1.0, 0.0);
        let ch = set(DMatrix::from_element(1, 1, one), DVector::from_element(1, one));
        assert!(optimize(&ch, 0.0, 5).is_err());
        assert!(optimize(&ch, 1e-6, 0).is_err());
    }
}
