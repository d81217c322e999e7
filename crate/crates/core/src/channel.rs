//! Block-fading channels with imperfect CSIT.
//!
//! The transmitter sees an estimate `Ĥ`; the true channel is
//! `H = sqrt(1 − σe²)·Ĥ + σe·H̃` with `Ĥ`, `H̃` i.i.d. CN(0, 1) and
//! `σe² = Pt^(−α)`. Receivers know `H` exactly.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Complex `n_t × n_users` matrix; column `k` is the channel vector of user `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    n_t: usize,
    n_users: usize,
    // column-major
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn zeros(n_t: usize, n_users: usize) -> Self {
        Self { n_t, n_users, entries: vec![Complex64::new(0.0, 0.0); n_t * n_users] }
    }

    /// Builds a matrix from its user columns.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let n_t = columns.first().map_or(0, Vec::len);
        if n_t == 0 {
            return Err(Error::Domain("channel matrix needs at least one antenna and one user".into()));
        }
        let mut entries = Vec::with_capacity(n_t * columns.len());
        for col in columns {
            if col.len() != n_t {
                return Err(Error::LengthMismatch { expected: n_t, actual: col.len() });
            }
            if col.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Domain("channel entries must be finite".into()));
            }
            entries.extend_from_slice(col);
        }
        Ok(Self { n_t, n_users: columns.len(), entries })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.entries[k * self.n_t..(k + 1) * self.n_t]
    }

    pub fn get(&self, antenna: usize, user: usize) -> Complex64 {
        self.entries[user * self.n_t + antenna]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Squared Euclidean norm of user `k`'s channel.
    pub fn column_norm_sqr(&self, k: usize) -> f64 {
        self.column(k).iter().map(Complex64::norm_sqr).sum()
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: Complex64) -> Self {
        Self { n_t: self.n_t, n_users: self.n_users, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    /// Frobenius distance to `other`.
    pub fn distance(&self, other: &ChannelMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// `aᴴ b` for complex vectors.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

/// `σe² = min(Pt^(−α), 1)`; below unit power the estimate carries no information.
pub fn error_variance(pt: f64, alpha: f64) -> Result<f64> {
    if !(pt > 0.0) || !pt.is_finite() {
        return Err(Error::Domain(format!("transmit power must be positive, got {pt}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("CSIT exponent must be non-negative, got {alpha}")));
    }
    Ok(pt.powf(-alpha).min(1.0))
}

/// CSIT quality for one SNR point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsitModel {
    pub alpha: f64,
    pub pt: f64,
    pub sigma_e2: f64,
}

impl CsitModel {
    pub fn new(pt: f64, alpha: f64) -> Result<Self> {
        let sigma_e2 = error_variance(pt, alpha)?;
        Ok(Self { alpha, pt, sigma_e2 })
    }

    /// A model with an explicit error variance; `0` is perfect CSIT.
    pub fn with_error_variance(pt: f64, sigma_e2: f64) -> Result<Self> {
        if !(pt > 0.0) {
            return Err(Error::Domain(format!("transmit power must be positive, got {pt}")));
        }
        if !(0.0..=1.0).contains(&sigma_e2) {
            return Err(Error::Domain(format!("error variance must lie in [0, 1], got {sigma_e2}")));
        }
        let alpha = if sigma_e2 > 0.0 && pt != 1.0 { -sigma_e2.ln() / pt.ln() } else { f64::INFINITY };
        Ok(Self { alpha, pt, sigma_e2 })
    }
}

/// One conditional channel draw together with the quantities that produced it.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub estimate: ChannelMatrix,
    pub error: ChannelMatrix,
    pub realization: ChannelMatrix,
    pub model: CsitModel,
}

impl ChannelSet {
    /// Residual of the reconstruction identity; zero up to rounding.
    pub fn reconstruction_residual(&self) -> f64 {
        let a = (1.0 - self.model.sigma_e2).sqrt();
        let b = self.model.sigma_e2.sqrt();
        self.realization
            .entries
            .iter()
            .zip(self.estimate.entries.iter().zip(&self.error.entries))
            .map(|(h, (e, t))| (h - (e * a + t * b)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Draws one CN(0, 1) sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// I.i.d. CN(0, 1) matrix.
pub fn sample_estimate<R: Rng + ?Sized>(n_t: usize, n_users: usize, rng: &mut R) -> ChannelMatrix {
    assert!(n_t >= 1 && n_users >= 1, "channel needs at least one antenna and one user");
    let entries = (0..n_t * n_users).map(|_| complex_normal(rng)).collect();
    ChannelMatrix { n_t, n_users, entries }
}

/// Draws one realization conditioned on `estimate`.
pub fn sample_conditional<R: Rng + ?Sized>(estimate: &ChannelMatrix, model: CsitModel, rng: &mut R) -> ChannelSet {
    let error = sample_estimate(estimate.n_t, estimate.n_users, rng);
    let a = (1.0 - model.sigma_e2).sqrt();
    let b = model.sigma_e2.sqrt();
    let entries = estimate.entries.iter().zip(&error.entries).map(|(e, t)| e * a + t * b).collect();
    ChannelSet {
        estimate: estimate.clone(),
        realization: ChannelMatrix { n_t: estimate.n_t, n_users: estimate.n_users, entries },
        error,
        model,
    }
}

/// `count` conditional realizations sharing one estimate, with fresh errors each.
pub fn sample_realizations<R: Rng + ?Sized>(
    estimate: &ChannelMatrix,
    model: CsitModel,
    count: usize,
    rng: &mut R,
) -> Vec<ChannelSet> {
    assert!(count >= 1, "at least one realization is required");
    (0..count).map(|_| sample_conditional(estimate, model, rng)).collect()
}
