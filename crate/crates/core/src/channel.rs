//! Spatially correlated Rayleigh channels and end-to-end SNR evaluation.
//!
//! Channels are `h = sqrt(A_p beta) F z` with `F F^T = R` and `z` a vector of
//! i.i.d. unit-variance circular complex normals (real and imaginary parts
//! each of variance 1/2). The A-to-surface matrix `G` is `M x L`; its columns
//! are independent and each is correlated across the surface by `R`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::geometry::{correlation_matrix, CorrelationKernel, Point};

/// Linear-scale link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Path loss A -> surface.
    pub beta1: f64,
    /// Path loss surface -> B.
    pub beta2_b: f64,
    /// Path loss surface -> E.
    pub beta2_e: f64,
    /// Element area (m^2).
    pub a_p: f64,
    pub gamma_bar_b: f64,
    pub gamma_bar_e: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.beta1,
            self.beta2_b,
            self.beta2_e,
            self.a_p,
            self.gamma_bar_b,
            self.gamma_bar_e,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("link budget entries must be positive: {self:?}")))
        }
    }
}

/// Converts decibels to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Seed plus stream identifier of a ChaCha8 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derived stream for sub-task `index` (e.g. one realization).
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Lower-triangular factor of a correlation matrix.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub lower: DMatrix<f64>,
    /// Number of negative eigenvalues set to zero before factorizing.
    pub clipped: usize,
}

/// Returns `F` lower-triangular with `F F^T = r`. When `r` is numerically
/// indefinite its negative eigenvalues are clipped to zero first, and the
/// factor reproduces the clipped matrix.
pub fn psd_factor(r: &DMatrix<f64>) -> Result<PsdFactor> {
    let n = r.nrows();
    if n == 0 || r.ncols() != n {
        return Err(domain(format!("psd_factor needs a square matrix, got {}x{}", n, r.ncols())));
    }
    let scale = r.amax().max(1.0);
    let asym = (r - r.transpose()).amax();
    if !(asym <= 1e-12 * scale) {
        return Err(domain(format!("matrix is not symmetric (max asymmetry {asym})")));
    }
    if let Some(chol) = r.clone().cholesky() {
        return Ok(PsdFactor {
            lower: chol.l(),
            clipped: 0,
        });
    }
    let eig = SymmetricEigen::new(r.clone());
    let mut clipped = 0;
    let lambdas = eig.eigenvalues.map(|v| {
        if v < 0.0 {
            clipped += 1;
            0.0
        } else {
            v
        }
    });
    let root = DMatrix::from_diagonal(&lambdas.map(f64::sqrt));
    let f = &eig.eigenvectors * root;
    // F^T = Q U  =>  F F^T = U^T U, and U^T is lower-triangular.
    let qr = f.transpose().qr();
    let mut lower = qr.r().transpose();
    for j in 0..n {
        if lower[(j, j)] < 0.0 {
            lower.column_mut(j).neg_mut();
        }
    }
    let target = &eig.eigenvectors * DMatrix::from_diagonal(&lambdas) * eig.eigenvectors.transpose();
    let err = (&lower * lower.transpose() - target).amax();
    if !(err <= 1e-8 * scale) {
        return Err(Error::Numeric(format!(
            "correlation factor reconstruction error {err} exceeds 1e-8"
        )));
    }
    Ok(PsdFactor { lower, clipped })
}

/// One realization of the wiretap channels for a fixed set of element positions.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// A -> surface, `M x L`.
    pub g: DMatrix<Complex64>,
    /// Surface -> B.
    pub h2b: DVector<Complex64>,
    /// Surface -> E.
    pub h2e: DVector<Complex64>,
    pub r_chol: Arc<DMatrix<f64>>,
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.g.ncols()
    }

    /// Channel toward the given receiver.
    pub fn link(&self, link: Link) -> &DVector<Complex64> {
        match link {
            Link::Bob => &self.h2b,
            Link::Eve => &self.h2e,
        }
    }

    /// Restriction to a subset of elements (rows), e.g. selected candidates.
    pub fn select(&self, rows: &[usize]) -> ChannelSet {
        let m = rows.len();
        let l = self.antennas();
        ChannelSet {
            g: DMatrix::from_fn(m, l, |i, j| self.g[(rows[i], j)]),
            h2b: DVector::from_fn(m, |i, _| self.h2b[rows[i]]),
            h2e: DVector::from_fn(m, |i, _| self.h2e[rows[i]]),
            r_chol: Arc::clone(&self.r_chol),
        }
    }

    /// `g_m w` for element `m`.
    pub fn row_dot(&self, m: usize, w: &[Complex64]) -> Complex64 {
        w.iter()
            .enumerate()
            .map(|(l, wl)| self.g[(m, l)] * wl)
            .sum()
    }

    fn check_dims(&self, psi: &[Complex64], w: &[Complex64]) -> Result<()> {
        if psi.len() != self.elements() || w.len() != self.antennas() {
            return Err(domain(format!(
                "dimension mismatch: channel is {}x{}, got {} phases and {} weights",
                self.elements(),
                self.antennas(),
                psi.len(),
                w.len()
            )));
        }
        Ok(())
    }

    /// `h^H Psi G w` toward `link`.
    pub fn end_to_end(&self, link: Link, psi: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
        self.check_dims(psi, w)?;
        let h = self.link(link);
        Ok((0..self.elements())
            .map(|m| h[m].conj() * psi[m] * self.row_dot(m, w))
            .sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Bob,
    Eve,
}

/// Draws channel realizations for fixed positions; the correlation factor is
/// computed once.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    factor: Arc<DMatrix<f64>>,
    antennas: usize,
    scale_g: f64,
    scale_b: f64,
    scale_e: f64,
}

impl ChannelSampler {
    pub fn new(
        points: &[Point],
        kernel: &CorrelationKernel,
        budget: &LinkBudget,
        antennas: usize,
    ) -> Result<Self> {
        let r = correlation_matrix(points, kernel)?;
        Self::from_correlation(&r, budget, antennas)
    }

    pub fn from_correlation(r: &DMatrix<f64>, budget: &LinkBudget, antennas: usize) -> Result<Self> {
        budget.validate()?;
        if antennas == 0 {
            return Err(Error::Config("at least one transmit antenna is required".into()));
        }
        let factor = psd_factor(r)?;
        Ok(Self {
            factor: Arc::new(factor.lower),
            antennas,
            scale_g: (budget.a_p * budget.beta1).sqrt(),
            scale_b: (budget.a_p * budget.beta2_b).sqrt(),
            scale_e: (budget.a_p * budget.beta2_e).sqrt(),
        })
    }

    pub fn elements(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Draws `h2b`, `h2e` and the `L` columns of `G`, in that order.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> ChannelSet {
        let n = self.elements();
        let cols = 2 * (self.antennas + 2);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let z = DMatrix::<f64>::from_fn(n, cols, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v * half
        });
        let x = &*self.factor * z;
        let complex_col = |c: usize, scale: f64| {
            DVector::from_fn(n, |i, _| Complex64::new(x[(i, 2 * c)], x[(i, 2 * c + 1)]) * scale)
        };
        let h2b = complex_col(0, self.scale_b);
        let h2e = complex_col(1, self.scale_e);
        let g = DMatrix::from_fn(n, self.antennas, |i, l| {
            Complex64::new(x[(i, 2 * (l + 2))], x[(i, 2 * (l + 2) + 1)]) * self.scale_g
        });
        ChannelSet {
            g,
            h2b,
            h2e,
            r_chol: Arc::clone(&self.factor),
        }
    }
}

/// One realization for the given positions.
pub fn draw_channels(
    points: &[Point],
    kernel: &CorrelationKernel,
    budget: &LinkBudget,
    antennas: usize,
    stream: RngStream,
) -> Result<ChannelSet> {
    let sampler = ChannelSampler::new(points, kernel, budget, antennas)?;
    Ok(sampler.sample(&mut stream.rng()))
}

fn check_unit(psi: &[Complex64], w: &[Complex64]) -> Result<()> {
    let norm: f64 = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(domain(format!("beamformer must have unit norm, got {norm}")));
    }
    if let Some(p) = psi.iter().find(|p| (p.norm() - 1.0).abs() > 1e-9) {
        return Err(domain(format!("phase shift {p} is not unit-modulus")));
    }
    Ok(())
}

/// `gamma_bar |h^H Psi G w|^2` toward `link`.
pub fn snr(
    channels: &ChannelSet,
    link: Link,
    psi: &[Complex64],
    w: &[Complex64],
    gamma_bar: f64,
) -> Result<f64> {
    check_unit(psi, w)?;
    Ok(gamma_bar * channels.end_to_end(link, psi, w)?.norm_sqr())
}

/// Per-element phases that make every contribution `conj(h_m) psi_m (g_m w)`
/// toward B real and nonnegative. Elements with a vanishing `h_m` or `g_m w`
/// get phase zero.
pub fn phase_align(channels: &ChannelSet, w: &[Complex64]) -> Result<Vec<Complex64>> {
    if w.len() != channels.antennas() {
        return Err(domain(format!(
            "beamformer has {} entries, channel has {} antennas",
            w.len(),
            channels.antennas()
        )));
    }
    Ok((0..channels.elements())
        .map(|m| align_one(channels.h2b[m], channels.row_dot(m, w)))
        .collect())
}

/// Unit phasor `exp(j(arg h - arg gw))`, or 1 if either factor vanishes.
pub(crate) fn align_one(h: Complex64, gw: Complex64) -> Complex64 {
    let prod = h * gw.conj();
    let mag = prod.norm();
    if mag == 0.0 || !mag.is_finite() {
        Complex64::new(1.0, 0.0)
    } else {
        prod / mag
    }
}

/// Uniform beamformer `1_L / sqrt(L)`.
pub fn uniform_beamformer(antennas: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0 / (antennas as f64).sqrt(), 0.0); antennas]
}

/// Independent phases uniform on `[0, 2 pi)`.
pub fn random_phases<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex64> {
    (0..m)
        .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
        .collect()
}
