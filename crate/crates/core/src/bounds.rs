//! L1 error bounds of the truncated distribution, variance predictions,
//! frontier curves and their Monte-Carlo validation.
//!
//! With geometric ratio `y` (`x²` for a homogeneous or max-visibility
//! parameter `x`, `√M_2` for the quadratic mean of a bad-bit model), the
//! expected L1 distance between `P` and `P_k` over Gaussian submatrices is
//! bounded by `√(y^{k+1} / (1 - y))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::combinat::{
    binomial_f64, enumerate_sigma_j, ln_factorial, nonempty_orders, rencontres, sigma_j_overlap_sum, MAX_EXACT_N,
};
use crate::distinguishability::{overlap_matrix, quadratic_mean_visibility, DistinguishabilityModel};
use crate::error::{invalid, Error, Result};
use crate::probability::{truncation_error, ExperimentInstance};
use crate::randgen::{gaussian_matrix_from, stream_rng};

/// Largest photon number for Monte-Carlo validation (exact `P` per trial).
pub const MONTE_CARLO_MAX_N: usize = 7;
pub const MONTE_CARLO_MIN_TRIALS: usize = 50;

/// Relative statistical slack on Monte-Carlo checks is `SLACK_SIGMAS/√trials`.
pub const SLACK_SIGMAS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Parameter `x` of the homogeneous model.
    HomogeneousX,
    /// Parameter `√M_2` of a bad-bit model.
    QuadraticMean,
    /// Largest pairwise overlap, treated as a homogeneous `x`.
    MaxVisibility,
}

impl BoundKind {
    /// Ratio of the geometric series the bound sums.
    pub fn ratio(self, parameter: f64) -> f64 {
        match self {
            BoundKind::HomogeneousX | BoundKind::MaxVisibility => parameter * parameter,
            BoundKind::QuadraticMean => parameter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    pub parameter: f64,
    pub k: usize,
}

fn check_parameter(parameter: f64) -> Result<()> {
    if parameter == 1.0 {
        return Err(Error::Divergent { parameter });
    }
    if !(0.0..1.0).contains(&parameter) {
        return Err(invalid(format!("bound parameter {parameter} outside [0, 1)")));
    }
    Ok(())
}

fn geometric_bound(ratio: f64, k: usize) -> f64 {
    (ratio.powi(k as i32 + 1) / (1.0 - ratio)).sqrt()
}

/// Upper bound on the expected L1 distance between `P` and `P_k`.
pub fn l1_bound(spec: &BoundSpec) -> Result<f64> {
    check_parameter(spec.parameter)?;
    Ok(geometric_bound(spec.kind.ratio(spec.parameter), spec.k))
}

/// Smallest `k` with `l1_bound(k) ≤ epsilon`.
pub fn min_truncation_order(parameter: f64, epsilon: f64, kind: BoundKind) -> Result<usize> {
    check_parameter(parameter)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("target distance {epsilon} outside (0, 1)")));
    }
    let y = kind.ratio(parameter);
    if y == 0.0 {
        return Ok(0);
    }
    // y^{k+1}/(1-y) ≤ ε²  ⇔  k ≥ ln(ε²(1-y))/ln y - 1
    let estimate = ((epsilon * epsilon * (1.0 - y)).ln() / y.ln() - 1.0).ceil();
    let mut k = if estimate > 0.0 { estimate as usize } else { 0 };
    // settle rounding at the boundary against the formula itself
    while k > 0 && geometric_bound(y, k - 1) <= epsilon {
        k -= 1;
    }
    while geometric_bound(y, k) > epsilon {
        k += 1;
    }
    Ok(k)
}

/// One grid point of the truncation-order frontier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub mu: f64,
    pub epsilon: f64,
    /// Order required by the homogeneous bound at `x_max = μ + 2σ`;
    /// `None` where that bound diverges.
    pub k_max_bound: Option<usize>,
    /// Order required by the quadratic-mean bound with `y = μ² + σ²`;
    /// `None` where that bound diverges.
    pub k_m2_bound: Option<usize>,
}

/// Minimal truncation orders for visibilities `x_i ~ N(μ, σ²)`, one row per
/// `(epsilon, mu)` pair, epsilons outermost.
pub fn truncation_order_curves(sigma: f64, epsilons: &[f64], mu_grid: &[f64]) -> Result<Vec<CurveRow>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma {sigma} must be finite and >= 0")));
    }
    let mut rows = Vec::with_capacity(epsilons.len() * mu_grid.len());
    for &epsilon in epsilons {
        for &mu in mu_grid {
            if !(0.0..=1.0).contains(&mu) {
                return Err(invalid(format!("grid value mu = {mu} outside [0, 1]")));
            }
            let x_max = mu + 2.0 * sigma;
            let y = mu * mu + sigma * sigma;
            let k_max_bound = optional_order(x_max, epsilon, BoundKind::MaxVisibility)?;
            let k_m2_bound = optional_order(y, epsilon, BoundKind::QuadraticMean)?;
            rows.push(CurveRow { mu, epsilon, k_max_bound, k_m2_bound });
        }
    }
    Ok(rows)
}

fn optional_order(parameter: f64, epsilon: f64, kind: BoundKind) -> Result<Option<usize>> {
    if parameter >= 1.0 {
        return Ok(None);
    }
    min_truncation_order(parameter, epsilon, kind).map(Some)
}

pub const CURVES_CSV_HEADER: &str = "mu,epsilon,k_max_bound,k_m2_bound";

/// Float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes curve rows as CSV; divergent orders are written as `divergent`.
pub fn write_curves_csv<W: Write>(rows: &[CurveRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CURVES_CSV_HEADER}")?;
    let order = |k: Option<usize>| k.map_or_else(|| "divergent".to_string(), |k| k.to_string());
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            format_f64(r.mu),
            format_f64(r.epsilon),
            order(r.k_max_bound),
            order(r.k_m2_bound)
        )?;
    }
    Ok(())
}

fn check_ensemble_args(n: usize, m: usize, k: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!("truncation order {k} exceeds n = {n}")));
    }
    Ok(())
}

/// Geometric ratio `y` of a bad-bit model: `x²` or `√M_2`.
pub fn model_ratio(model: &DistinguishabilityModel) -> Result<f64> {
    quadratic_mean_visibility(model)
}

/// `n! · Σ_{p=0}^{n-j} R(n-j, p) · 2^p`: the number-weighted count of
/// column pairings that survive the Gaussian average.
fn pairing_weight(n: usize, j: usize) -> Result<f64> {
    let free = n - j;
    let mut s = 0.0;
    for p in 0..=free {
        s += rencontres(free, p)? as f64 * 2f64.powi(p as i32);
    }
    Ok((1..=n).map(|i| i as f64).product::<f64>() * s)
}

/// Exact `Var(Q_k)` for i.i.d. `CN(0, 1/m)` submatrices:
/// `Σ_{j>k} [Σ_{τ∈σ_j} Π_i |S_{i,τ(i)}|²] · n! Σ_p R(n-j,p) 2^p / m^{2n}`.
///
/// Bad-bit models use the closed form `R(n, n-j) M_j`; explicit overlap
/// matrices are enumerated.
pub fn exact_variance(n: usize, m: usize, k: usize, model: &DistinguishabilityModel) -> Result<f64> {
    check_ensemble_args(n, m, k)?;
    if n > MAX_EXACT_N {
        return Err(invalid(format!("exact variance limited to n <= {MAX_EXACT_N}")));
    }
    let scale = (m as f64).powi(-2 * n as i32);
    let overlap_sum: Box<dyn Fn(usize) -> Result<f64>> = match model {
        DistinguishabilityModel::Explicit { .. } => {
            let s = overlap_matrix(model, n)?;
            Box::new(move |j| {
                Ok(enumerate_sigma_j(n, j)?.map(|tau| (0..n).map(|i| s[(i, tau[i])].norm_sqr()).product::<f64>()).sum())
            })
        }
        _ => {
            let x = match model {
                DistinguishabilityModel::Homogeneous { x } => vec![*x; n],
                DistinguishabilityModel::Obb { x } => x.clone(),
                DistinguishabilityModel::Explicit { .. } => unreachable!(),
            };
            if x.len() != n {
                return Err(invalid(format!("model describes {} photons, expected {n}", x.len())));
            }
            Box::new(move |j| sigma_j_overlap_sum(&x, j))
        }
    };
    let mut total = 0.0;
    for j in nonempty_orders(n).filter(|&j| j > k) {
        total += overlap_sum(j)? * pairing_weight(n, j)?;
    }
    Ok(total * scale)
}

/// Upper bound on [`exact_variance`] after replacing `M_j` by `(√M_2)^j`.
pub fn maclaurin_variance(n: usize, m: usize, k: usize, model: &DistinguishabilityModel) -> Result<f64> {
    check_ensemble_args(n, m, k)?;
    if n > MAX_EXACT_N {
        return Err(invalid(format!("exact variance limited to n <= {MAX_EXACT_N}")));
    }
    let y = model_ratio(model)?;
    let mut total = 0.0;
    for j in nonempty_orders(n).filter(|&j| j > k) {
        total += rencontres(n, n - j)? as f64 * y.powi(j as i32) * pairing_weight(n, j)?;
    }
    Ok(total * (m as f64).powi(-2 * n as i32))
}

/// Geometric-series prediction
/// `Var(Q_k) ≈ (n!)²/m^{2n} · Σ_{j=k+1, j≠1}^{n} y^j`.
///
/// The order `j = 1` is left out: no permutation moves exactly one point,
/// and its exact contribution is zero.
pub fn predicted_variance(n: usize, m: usize, k: usize, model: &DistinguishabilityModel) -> Result<f64> {
    check_ensemble_args(n, m, k)?;
    let y = model_ratio(model)?;
    check_parameter(y)?;
    let series: f64 = nonempty_orders(n).filter(|&j| j > k).map(|j| y.powi(j as i32)).sum();
    let ln_scale = 2.0 * ln_factorial(n) - 2.0 * n as f64 * (m as f64).ln();
    Ok(ln_scale.exp() * series)
}

/// Per-outcome bound on `E|Q_k(s)|`: `n!/m^n · √(y^{k+1}/(1-y))`.
pub fn per_outcome_bound(n: usize, m: usize, k: usize, model: &DistinguishabilityModel) -> Result<f64> {
    check_ensemble_args(n, m, k)?;
    let y = model_ratio(model)?;
    check_parameter(y)?;
    let ln_scale = ln_factorial(n) - n as f64 * (m as f64).ln();
    Ok(ln_scale.exp() * geometric_bound(y, k))
}

/// `C(m, n) · n! / m^n`: the number of non-collisional outputs times the
/// per-outcome scale. Below 1 for every `m ≥ n`.
pub fn noncollisional_mass(m: usize, n: usize) -> f64 {
    binomial_f64(m, n) * (ln_factorial(n) - n as f64 * (m as f64).ln()).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub model: DistinguishabilityModel,
    pub empirical_mean_q: f64,
    pub empirical_stderr_q: f64,
    pub empirical_mean_abs_q: f64,
    pub empirical_var_q: f64,
    pub predicted_var: f64,
    pub exact_var: f64,
    /// `empirical_var_q / predicted_var`; absent when the prediction is 0.
    pub variance_ratio: Option<f64>,
    pub predicted_l1_bound: f64,
    pub per_outcome_bound: f64,
    /// `√predicted_var · (1 + 4/√trials)`.
    pub jensen_limit: f64,
    pub noncollisional_mass: f64,
    pub mean_consistent_with_zero: bool,
    pub bound_satisfied: bool,
}

/// Draws `trials` Gaussian submatrices (trial `t` reads stream `t` of
/// `seed`), computes `Q_k` exactly for each and compares the sample
/// statistics with the predictions.
pub fn validate_bound_monte_carlo(
    n: usize,
    m: usize,
    k: usize,
    model: &DistinguishabilityModel,
    trials: usize,
    seed: u64,
) -> Result<EnsembleReport> {
    check_ensemble_args(n, m, k)?;
    if n > MONTE_CARLO_MAX_N {
        return Err(invalid(format!("Monte-Carlo validation limited to n <= {MONTE_CARLO_MAX_N}")));
    }
    if trials < MONTE_CARLO_MIN_TRIALS {
        return Err(invalid(format!("need at least {MONTE_CARLO_MIN_TRIALS} trials, got {trials}")));
    }
    if let Some(p) = model.photons() {
        if p != n {
            return Err(invalid(format!("model describes {p} photons, expected {n}")));
        }
    }
    let predicted_var = predicted_variance(n, m, k, model)?;
    let exact_var = exact_variance(n, m, k, model)?;
    let predicted_l1_bound = geometric_bound(model_ratio(model)?, k);
    let per_outcome = per_outcome_bound(n, m, k, model)?;

    let errors: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t);
            let sub = gaussian_matrix_from(n, m, &mut rng)?;
            truncation_error(&ExperimentInstance::from_submatrix(sub, model.clone())?, k)
        })
        .collect::<Result<_>>()?;

    let count = trials as f64;
    let mean = errors.iter().sum::<f64>() / count;
    let mean_abs = errors.iter().map(|q| q.abs()).sum::<f64>() / count;
    let var = errors.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let stderr = (var / count).sqrt();
    let slack = 1.0 + SLACK_SIGMAS / count.sqrt();
    let jensen_limit = predicted_var.sqrt() * slack;
    Ok(EnsembleReport {
        n,
        m,
        k,
        trials,
        seed,
        model: model.clone(),
        empirical_mean_q: mean,
        empirical_stderr_q: stderr,
        empirical_mean_abs_q: mean_abs,
        empirical_var_q: var,
        predicted_var,
        exact_var,
        variance_ratio: (predicted_var > 0.0).then(|| var / predicted_var),
        predicted_l1_bound,
        per_outcome_bound: per_outcome,
        jensen_limit,
        noncollisional_mass: noncollisional_mass(m, n),
        mean_consistent_with_zero: mean.abs() <= SLACK_SIGMAS * stderr,
        bound_satisfied: mean_abs <= jensen_limit && mean_abs <= per_outcome * slack,
    })
}
