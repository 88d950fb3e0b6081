//! Seeded random ensembles.
//!
//! Every generator is a ChaCha20 stream keyed by a 64-bit seed and selected
//! by a 64-bit stream id, so trial `t` of a run with master seed `s` always
//! reads stream `(s, t)` regardless of how trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::combinat::Permutation;
use crate::error::{invalid, Result};
use crate::linalg::{Complex64, ComplexMatrix};

/// Generator for stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// `rows × cols` matrix of i.i.d. `CN(0, variance)` entries.
pub fn ginibre<R: Rng>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, variance))
}

/// Haar-random `m × m` unitary drawn from `rng`.
///
/// QR of a Ginibre matrix with the phases of `R`'s diagonal moved into `Q`,
/// so that the implied `R` has a positive real diagonal.
pub fn haar_unitary_from<R: Rng>(m: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(invalid("unitary dimension must be at least 1"));
    }
    let z = ginibre(m, m, 1.0, rng).to_nalgebra();
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    Ok(ComplexMatrix::from_nalgebra(&q))
}

pub fn haar_unitary(m: usize, seed: u64) -> Result<ComplexMatrix> {
    haar_unitary_from(m, &mut stream_rng(seed, 0))
}

/// `n × n` matrix of i.i.d. `CN(0, 1/m_norm)` entries: real and imaginary
/// parts independent with variance `1/(2 m_norm)` each.
pub fn gaussian_matrix(n: usize, m_norm: usize, seed: u64) -> Result<ComplexMatrix> {
    gaussian_matrix_from(n, m_norm, &mut stream_rng(seed, 0))
}

pub fn gaussian_matrix_from<R: Rng>(n: usize, m_norm: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if n == 0 || m_norm == 0 {
        return Err(invalid("gaussian matrix needs n >= 1 and m_norm >= 1"));
    }
    Ok(ginibre(n, n, 1.0 / m_norm as f64, rng))
}

/// `n` draws of `Normal(mu, sigma²)` clamped to `[0, 1]`.
pub fn visibility_vector(n: usize, mu: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    visibility_vector_from(n, mu, sigma, &mut stream_rng(seed, 0))
}

pub fn visibility_vector_from<R: Rng>(n: usize, mu: f64, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("visibility vector needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(invalid(format!("mean visibility {mu} outside [0, 1]")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("standard deviation {sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(vec![mu; n]);
    }
    let dist = Normal::new(mu, sigma).map_err(|e| invalid(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng).clamp(0.0, 1.0)).collect())
}

/// Uniformly random permutation of `n` elements (Fisher-Yates).
pub fn random_permutation(n: usize, seed: u64) -> Permutation {
    random_permutation_from(n, &mut stream_rng(seed, 0))
}

pub fn random_permutation_from<R: Rng>(n: usize, rng: &mut R) -> Permutation {
    let mut images: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        images.swap(i, rng.random_range(0..=i));
    }
    Permutation::new(images).expect("shuffle of identity is a bijection")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    HaarUnitary,
    GaussianIid,
}

/// Reference to a seeded random matrix.
///
/// `haar_unitary` yields an `m × m` unitary; `gaussian_iid` an `m × m`
/// matrix with `E|M_ij|² = 1/m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl EnsembleSpec {
    pub fn generate(&self) -> Result<ComplexMatrix> {
        let mut rng = stream_rng(self.seed, self.stream);
        match self.kind {
            EnsembleKind::HaarUnitary => haar_unitary_from(self.m, &mut rng),
            EnsembleKind::GaussianIid => gaussian_matrix_from(self.m, self.m, &mut rng),
        }
    }
}
