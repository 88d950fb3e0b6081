//! Partial-distinguishability models and their overlap matrices.
//!
//! The overlap matrix holds `S_ij = ⟨ψ_i|ψ_j⟩` for the internal states of
//! the photons. Three models are supported:
//!
//! - `homogeneous(x)`: `S_ij = x + (1 - x) δ_ij`, every pair equally
//!   distinguishable.
//! - `obb(x_1..x_n)`: generalized orthogonal bad-bit model, photon `i` in
//!   `√x_i |Ψ_0⟩ + √(1-x_i) |Ψ_i⟩` with mutually orthogonal bad modes, so
//!   `S_ij = √x_i √x_j` off the diagonal and pair `(i, j)` has HOM
//!   visibility `x_i x_j`.
//! - `explicit(S)`: any Gram matrix of unit vectors.

use serde::{Deserialize, Serialize};

use crate::combinat::{Permutation, SymmetricMeans};
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigenvalues, Complex64, ComplexMatrix};

/// Tolerance for Hermiticity, unit diagonal and PSD checks on explicit `S`.
pub const GRAM_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub enum DistinguishabilityModel {
    Homogeneous { x: f64 },
    Obb { x: Vec<f64> },
    Explicit { s: ComplexMatrix },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ModelRepr {
    Homogeneous { x: f64 },
    Obb { x: Vec<f64> },
    Explicit { s_real: Vec<Vec<f64>>, s_imag: Vec<Vec<f64>> },
}

impl TryFrom<ModelRepr> for DistinguishabilityModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let model = match r {
            ModelRepr::Homogeneous { x } => DistinguishabilityModel::Homogeneous { x },
            ModelRepr::Obb { x } => DistinguishabilityModel::Obb { x },
            ModelRepr::Explicit { s_real, s_imag } => {
                DistinguishabilityModel::Explicit { s: ComplexMatrix::from_parts(&s_real, &s_imag)? }
            }
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<DistinguishabilityModel> for ModelRepr {
    fn from(m: DistinguishabilityModel) -> Self {
        match m {
            DistinguishabilityModel::Homogeneous { x } => ModelRepr::Homogeneous { x },
            DistinguishabilityModel::Obb { x } => ModelRepr::Obb { x },
            DistinguishabilityModel::Explicit { s } => {
                ModelRepr::Explicit { s_real: s.real_parts(), s_imag: s.imag_parts() }
            }
        }
    }
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("visibility parameter {x} outside [0, 1]")));
    }
    Ok(())
}

/// Checks that `s` is a Gram matrix of unit vectors.
pub fn validate_overlap(s: &ComplexMatrix) -> Result<()> {
    if !s.is_square() {
        return Err(Error::InvalidOverlap(format!("not square: {}x{}", s.rows(), s.cols())));
    }
    if !s.is_hermitian(GRAM_TOLERANCE) {
        return Err(Error::InvalidOverlap("not Hermitian".into()));
    }
    let n = s.rows();
    for i in 0..n {
        if (s[(i, i)] - Complex64::new(1.0, 0.0)).norm() > GRAM_TOLERANCE {
            return Err(Error::InvalidOverlap(format!("diagonal entry {i} is {}", s[(i, i)])));
        }
    }
    if s.as_slice().iter().any(|z| z.norm() > 1.0 + GRAM_TOLERANCE) {
        return Err(Error::InvalidOverlap("entry with modulus above 1".into()));
    }
    if let Some(&min) = hermitian_eigenvalues(s)?.first() {
        if min < -GRAM_TOLERANCE {
            return Err(Error::InvalidOverlap(format!("not positive semidefinite (eigenvalue {min:e})")));
        }
    }
    Ok(())
}

impl DistinguishabilityModel {
    pub fn homogeneous(x: f64) -> Result<Self> {
        let m = DistinguishabilityModel::Homogeneous { x };
        m.validate()?;
        Ok(m)
    }

    pub fn obb(x: Vec<f64>) -> Result<Self> {
        let m = DistinguishabilityModel::Obb { x };
        m.validate()?;
        Ok(m)
    }

    pub fn explicit(s: ComplexMatrix) -> Result<Self> {
        let m = DistinguishabilityModel::Explicit { s };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistinguishabilityModel::Homogeneous { x } => check_unit_interval(*x),
            DistinguishabilityModel::Obb { x } => x.iter().try_for_each(|&v| check_unit_interval(v)),
            DistinguishabilityModel::Explicit { s } => validate_overlap(s),
        }
    }

    /// Photon count fixed by the model, if any.
    pub fn photons(&self) -> Option<usize> {
        match self {
            DistinguishabilityModel::Homogeneous { .. } => None,
            DistinguishabilityModel::Obb { x } => Some(x.len()),
            DistinguishabilityModel::Explicit { s } => Some(s.rows()),
        }
    }

    fn check_photons(&self, n: usize) -> Result<()> {
        match self.photons() {
            Some(k) if k != n => Err(invalid(format!("model describes {k} photons, instance has {n}"))),
            _ => Ok(()),
        }
    }

    /// Squared visibility parameters `|x_i|²` for the bad-bit models.
    pub fn squared_visibilities(&self, n: usize) -> Result<Vec<f64>> {
        self.check_photons(n)?;
        match self {
            DistinguishabilityModel::Homogeneous { x } => Ok(vec![x * x; n]),
            DistinguishabilityModel::Obb { x } => Ok(x.iter().map(|v| v * v).collect()),
            DistinguishabilityModel::Explicit { .. } => {
                Err(Error::UnsupportedModel("visibility vector is only defined for bad-bit models".into()))
            }
        }
    }

    /// Largest off-diagonal `|S_ij|`; the parameter of the max-visibility
    /// fallback bound.
    pub fn max_overlap(&self, n: usize) -> Result<f64> {
        self.check_photons(n)?;
        if let DistinguishabilityModel::Homogeneous { x } = self {
            return Ok(if n >= 2 { *x } else { 0.0 });
        }
        let s = overlap_matrix(self, n)?;
        let mut best = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(s[(i, j)].norm());
                }
            }
        }
        Ok(best)
    }
}

/// The `n × n` overlap matrix of `model`.
pub fn overlap_matrix(model: &DistinguishabilityModel, n: usize) -> Result<ComplexMatrix> {
    model.validate()?;
    model.check_photons(n)?;
    let one = Complex64::new(1.0, 0.0);
    Ok(match model {
        DistinguishabilityModel::Homogeneous { x } => {
            ComplexMatrix::from_fn(n, n, |i, j| if i == j { one } else { Complex64::new(*x, 0.0) })
        }
        DistinguishabilityModel::Obb { x } => ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                one
            } else {
                // sqrt(x·x) == x exactly in IEEE arithmetic, so equal entries
                // reproduce the homogeneous matrix bit for bit
                Complex64::new((x[i] * x[j]).sqrt(), 0.0)
            }
        }),
        DistinguishabilityModel::Explicit { s } => s.clone(),
    })
}

/// `Π_i S_{i,τ(i)}`.
pub fn overlap_product(s: &ComplexMatrix, tau: &Permutation) -> Result<Complex64> {
    if !s.is_square() || s.rows() != tau.len() {
        return Err(invalid("permutation size does not match overlap matrix"));
    }
    Ok((0..tau.len()).filter(|&i| tau[i] != i).map(|i| s[(i, tau[i])]).product())
}

/// Square root of the second elementary symmetric mean of the `|x_i|²`:
/// the quadratic mean of the pairwise HOM visibilities `x_i x_j`.
pub fn quadratic_mean_visibility(model: &DistinguishabilityModel) -> Result<f64> {
    model.validate()?;
    match model {
        DistinguishabilityModel::Homogeneous { x } => Ok(x * x),
        DistinguishabilityModel::Obb { x } => {
            if x.len() < 2 {
                return Err(invalid("pairwise visibility needs at least two photons"));
            }
            let squares: Vec<f64> = x.iter().map(|v| v * v).collect();
            Ok(SymmetricMeans::new(&squares)?.mean(2).sqrt())
        }
        DistinguishabilityModel::Explicit { .. } => {
            Err(Error::UnsupportedModel("quadratic-mean bound is not derived for an arbitrary overlap matrix".into()))
        }
    }
}
