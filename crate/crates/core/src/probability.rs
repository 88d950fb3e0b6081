//! Exact, per-order and truncated output probabilities.
//!
//! For input occupation `r`, output occupation `s` and `M = U[d(r), d(s)]`,
//!
//! ```text
//! P = 1/(Π r_i! s_i!) · Σ_{σ ∈ S_n} w(σ) · Perm(M ∘ M*_σ),
//! (M ∘ M*_σ)_{i,c} = M_{i,c} · conj(M_{σ(i),c}),
//! w(σ) = Π_i S_{σ(i),i}.
//! ```
//!
//! Grouping permutations by their number `j` of moved points gives one
//! contribution per order `j ∈ {0, 2, 3, .., n}`; the truncated probability
//! `P_k` keeps orders `j ≤ k`, and `Q_k = P - P_k` is the discarded tail.
//! `P_k` can be negative; it is reported as computed.
//!
//! Input collisions carry the `1/Π r_i!` factor, which assumes photons that
//! share an input mode are in the same internal state.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::combinat::{binomial, enumerate_sigma_j, nonempty_orders, rencontres, Permutation};
use crate::distinguishability::{overlap_matrix, DistinguishabilityModel};
use crate::error::{invalid, Result};
use crate::linalg::{hadamard_perm, laplace_split_with, submatrix, Complex64, ComplexMatrix};

/// Largest photon number accepted by the exact (all of `S_n`) evaluators.
pub const EXACT_MAX_N: usize = 12;

/// Mode assignment list: mode `i` repeated `occupation[i]` times.
pub fn mode_assignment(occupation: &[usize]) -> Vec<usize> {
    occupation.iter().enumerate().flat_map(|(mode, &c)| std::iter::repeat_n(mode, c)).collect()
}

/// Occupation list over `m` modes for a list of (possibly repeated) modes.
pub fn occupation_from_modes(modes: &[usize], m: usize) -> Result<Vec<usize>> {
    let mut occ = vec![0; m];
    for &mode in modes {
        if mode >= m {
            return Err(invalid(format!("mode {mode} out of range for {m} modes")));
        }
        occ[mode] += 1;
    }
    Ok(occ)
}

/// Occupation lists of all outputs of `n` photons in `m` modes, in
/// lexicographic order of their mode assignment lists.
pub fn output_configurations(m: usize, n: usize, collisional: bool) -> Vec<Vec<usize>> {
    let assignments: Vec<Vec<usize>> =
        if collisional { (0..m).combinations_with_replacement(n).collect() } else { (0..m).combinations(n).collect() };
    assignments.into_iter().map(|modes| occupation_from_modes(&modes, m).expect("modes drawn from 0..m")).collect()
}

fn factorial_f64(k: usize) -> f64 {
    (2..=k).map(|i| i as f64).product()
}

/// Interferometer, input state and distinguishability model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub unitary: ComplexMatrix,
    pub input: Vec<usize>,
    pub model: DistinguishabilityModel,
}

impl ExperimentSetup {
    pub fn new(unitary: ComplexMatrix, input: Vec<usize>, model: DistinguishabilityModel) -> Result<Self> {
        let setup = ExperimentSetup { unitary, input, model };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.unitary.is_square() {
            return Err(invalid("interferometer matrix must be square"));
        }
        if self.input.len() != self.modes() {
            return Err(invalid(format!(
                "input occupation has {} entries for {} modes",
                self.input.len(),
                self.modes()
            )));
        }
        if self.photons() == 0 {
            return Err(invalid("input must contain at least one photon"));
        }
        self.model.validate()?;
        if let Some(k) = self.model.photons() {
            if k != self.photons() {
                return Err(invalid(format!("model describes {k} photons, input has {}", self.photons())));
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.unitary.rows()
    }

    pub fn photons(&self) -> usize {
        self.input.iter().sum()
    }

    pub fn is_collision_free(&self) -> bool {
        self.input.iter().all(|&c| c <= 1)
    }

    pub fn with_output(&self, output: Vec<usize>) -> Result<ExperimentInstance> {
        ExperimentInstance::new(self.clone(), output)
    }
}

/// A setup together with the detected output occupation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentInstance {
    #[serde(flatten)]
    pub setup: ExperimentSetup,
    pub output: Vec<usize>,
}

impl ExperimentInstance {
    pub fn new(setup: ExperimentSetup, output: Vec<usize>) -> Result<Self> {
        setup.validate()?;
        if output.len() != setup.modes() {
            return Err(invalid(format!("output occupation has {} entries for {} modes", output.len(), setup.modes())));
        }
        let detected: usize = output.iter().sum();
        if detected != setup.photons() {
            return Err(invalid(format!("photon number mismatch: {} in, {detected} out", setup.photons())));
        }
        Ok(ExperimentInstance { setup, output })
    }

    /// Instance whose transition submatrix is `m` itself: one photon in each
    /// of `n` input modes, detected one per output mode.
    pub fn from_submatrix(m: ComplexMatrix, model: DistinguishabilityModel) -> Result<Self> {
        if !m.is_square() {
            return Err(invalid("submatrix must be square"));
        }
        let n = m.rows();
        ExperimentInstance::new(ExperimentSetup::new(m, vec![1; n], model)?, vec![1; n])
    }

    pub fn photons(&self) -> usize {
        self.setup.photons()
    }

    /// `M = U[d(r), d(s)]`.
    pub fn submatrix(&self) -> Result<ComplexMatrix> {
        submatrix(&self.setup.unitary, &mode_assignment(&self.setup.input), &mode_assignment(&self.output))
    }

    /// `Π r_i! s_i!`.
    pub fn normalization(&self) -> f64 {
        self.setup.input.iter().chain(&self.output).map(|&c| factorial_f64(c)).product()
    }
}

/// Evaluation strategy for the truncated sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `Perm(M ∘ M*_τ)` as one `n × n` permanent.
    Direct,
    /// Laplace split into size-`j` complex and size-`(n-j)` non-negative
    /// permanents.
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderTerm {
    pub order: usize,
    pub value: f64,
}

/// Exact probability split by interference order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDecomposition {
    pub per_order: Vec<OrderTerm>,
    /// Absolute imaginary part left in the accumulated sum.
    pub imag_residual: f64,
}

impl OrderDecomposition {
    pub fn total(&self) -> f64 {
        self.per_order.iter().map(|t| t.value).sum()
    }

    /// Sum of the orders above `k`.
    pub fn tail(&self, k: usize) -> f64 {
        self.per_order.iter().filter(|t| t.order > k).map(|t| t.value).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub k: usize,
    pub n: usize,
    pub strategy: Strategy,
    pub model: DistinguishabilityModel,
    /// `P_k`.
    pub total: f64,
    /// Contributions of orders `0, 2, .., k`.
    pub per_order: Vec<OrderTerm>,
    pub imag_residual: f64,
    /// Kernel operation count of the Laplace evaluation, see [`laplace_cost`].
    pub kernel_ops: u128,
    /// Wall-clock time; not serialized so that reports are reproducible.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

/// Kernel operation count of the Laplace path up to order `k`:
/// `Σ_{j ≤ k, j ≠ 1} R(n, n-j) · C(n, j) · (2^j·j + 2^{n-j}·(n-j))`.
pub fn laplace_cost(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Err(invalid(format!("truncation order {k} exceeds n = {n}")));
    }
    let mut total: u128 = 0;
    for j in nonempty_orders(k) {
        let per_tau = (1u128 << j) * j as u128 + (1u128 << (n - j)) * (n - j) as u128;
        total += rencontres(n, n - j)? * binomial(n, j) * per_tau;
    }
    Ok(total)
}

struct Evaluator {
    m: ComplexMatrix,
    abs_sq: Vec<f64>,
    s: ComplexMatrix,
    norm: f64,
}

impl Evaluator {
    fn new(inst: &ExperimentInstance) -> Result<Self> {
        let m = inst.submatrix()?;
        let s = overlap_matrix(&inst.setup.model, inst.photons())?;
        Ok(Evaluator { abs_sq: m.abs_squared(), m, s, norm: inst.normalization() })
    }

    fn n(&self) -> usize {
        self.m.rows()
    }

    /// `w(τ) = Π_i S_{τ(i),i}`.
    fn weight(&self, tau: &Permutation) -> Complex64 {
        (0..tau.len()).filter(|&i| tau[i] != i).map(|i| self.s[(tau[i], i)]).product()
    }

    fn term(&self, tau: &Permutation, strategy: Strategy) -> Result<Complex64> {
        let w = self.weight(tau);
        if w == Complex64::new(0.0, 0.0) {
            return Ok(w);
        }
        let perm = match strategy {
            Strategy::Direct => hadamard_perm(&self.m, tau)?,
            Strategy::Laplace => laplace_split_with(&self.m, &self.abs_sq, tau)?,
        };
        Ok(w * perm)
    }

    fn order_sum(&self, j: usize, strategy: Strategy) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for tau in enumerate_sigma_j(self.n(), j)? {
            acc += self.term(&tau, strategy)?;
        }
        Ok(acc / self.norm)
    }

    fn orders(&self, max_order: usize, strategy: Strategy) -> Result<(Vec<OrderTerm>, f64)> {
        let mut per_order = Vec::new();
        let mut imag = 0.0;
        for j in nonempty_orders(max_order) {
            let z = self.order_sum(j, strategy)?;
            imag += z.im;
            per_order.push(OrderTerm { order: j, value: z.re });
        }
        Ok((per_order, imag.abs()))
    }
}

fn check_exact_size(n: usize) -> Result<()> {
    if n > EXACT_MAX_N {
        return Err(invalid(format!("exact evaluation limited to n <= {EXACT_MAX_N}, got {n}")));
    }
    Ok(())
}

/// Full multi-permanent sum over `S_n`, permutations in lexicographic order.
pub fn exact_probability(inst: &ExperimentInstance) -> Result<f64> {
    let n = inst.photons();
    check_exact_size(n)?;
    let ev = Evaluator::new(inst)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for images in (0..n).permutations(n) {
        let tau = Permutation::new(images)?;
        acc += ev.term(&tau, Strategy::Direct)?;
    }
    Ok(acc.re / ev.norm)
}

/// Exact probability split into orders `0, 2, .., n`.
pub fn exact_probability_by_order(inst: &ExperimentInstance) -> Result<OrderDecomposition> {
    let n = inst.photons();
    check_exact_size(n)?;
    let ev = Evaluator::new(inst)?;
    let (per_order, imag_residual) = ev.orders(n, Strategy::Direct)?;
    Ok(OrderDecomposition { per_order, imag_residual })
}

/// `P_k`: contributions with at most `k` mutually interfering photons.
pub fn truncated_probability(inst: &ExperimentInstance, k: usize, strategy: Strategy) -> Result<TruncationResult> {
    let n = inst.photons();
    if k > n {
        return Err(invalid(format!("truncation order {k} exceeds photon number {n}")));
    }
    if strategy == Strategy::Direct {
        check_exact_size(n)?;
    }
    let start = Instant::now();
    let ev = Evaluator::new(inst)?;
    let (per_order, imag_residual) = ev.orders(k, strategy)?;
    Ok(TruncationResult {
        k,
        n,
        strategy,
        model: inst.setup.model.clone(),
        total: per_order.iter().map(|t| t.value).sum(),
        per_order,
        imag_residual,
        kernel_ops: laplace_cost(n, k)?,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `Q_k = P - P_k`, the sum of the orders above `k`.
pub fn truncation_error(inst: &ExperimentInstance, k: usize) -> Result<f64> {
    let n = inst.photons();
    if k > n {
        return Err(invalid(format!("truncation order {k} exceeds photon number {n}")));
    }
    Ok(exact_probability_by_order(inst)?.tail(k))
}
