//! Metropolis sampling of non-collisional outputs from the truncated
//! distribution.
//!
//! The chain targets `max(P_k(s), 0)` over outputs with at most one photon
//! per mode. Both proposals are symmetric, so a move is accepted with
//! probability `min(1, target(s') / target(s))`.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::combinat::binomial;
use crate::error::{invalid, Error, Result};
use crate::probability::{
    occupation_from_modes, output_configurations, truncated_probability, ExperimentSetup, Strategy,
};
use crate::randgen::stream_rng;

/// Consecutive zero-target proposals tolerated before giving up.
pub const MAX_ZERO_PROPOSALS: usize = 10_000;

/// Largest output space [`exact_distribution`] will enumerate.
pub const MAX_ENUMERATED_OUTPUTS: u128 = 100_000;

/// Mode count up to which [`Proposal::default_for`] picks the independence
/// proposal.
pub const UNIFORM_PROPOSAL_MAX_MODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// Fresh uniformly random non-collisional output.
    UniformNoncollisional,
    /// Move one photon to a uniformly chosen empty mode.
    SingleModeSwap,
}

impl Proposal {
    pub fn default_for(modes: usize) -> Self {
        if modes <= UNIFORM_PROPOSAL_MAX_MODES {
            Proposal::UniformNoncollisional
        } else {
            Proposal::SingleModeSwap
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thinning: usize,
    pub proposal: Proposal,
    pub seed: u64,
    pub num_samples: usize,
}

impl ChainConfig {
    /// Burn-in 1000, thinning 10 and the default proposal for `modes`.
    pub fn for_modes(modes: usize, num_samples: usize, seed: u64) -> Self {
        ChainConfig { burn_in: 1000, thinning: 10, proposal: Proposal::default_for(modes), seed, num_samples }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(invalid("thinning must be at least 1"));
        }
        Ok(())
    }
}

fn propose<R: Rng>(state: &[usize], m: usize, proposal: Proposal, rng: &mut R) -> Vec<usize> {
    let n = state.len();
    match proposal {
        Proposal::UniformNoncollisional => {
            let mut modes = index::sample(rng, m, n).into_vec();
            modes.sort_unstable();
            modes
        }
        Proposal::SingleModeSwap => {
            if n == m {
                return state.to_vec();
            }
            let leaving = rng.random_range(0..n);
            // the r-th empty mode in increasing order
            let mut r = rng.random_range(0..m - n);
            let mut target = 0;
            for mode in 0..m {
                if state.binary_search(&mode).is_err() {
                    if r == 0 {
                        target = mode;
                        break;
                    }
                    r -= 1;
                }
            }
            let mut next = state.to_vec();
            next[leaving] = target;
            next.sort_unstable();
            next
        }
    }
}

/// Runs a chain of `cfg.num_samples` thinned states over the sorted
/// `n`-subsets of `0..m` (mode assignment lists) for an arbitrary
/// non-negative `target`.
pub fn sample_with_target<F>(
    m: usize,
    n: usize,
    cfg: &ChainConfig,
    rng: &mut ChaCha20Rng,
    mut target: F,
) -> Result<Vec<Vec<usize>>>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    cfg.validate()?;
    if n == 0 || n > m {
        return Err(invalid(format!("need 1 <= n <= m, got n = {n}, m = {m}")));
    }
    let mut eval = |s: &[usize]| -> Result<f64> {
        let t = target(s)?;
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Numerical(format!("target value {t} at {s:?}")));
        }
        Ok(t)
    };

    // starting state: first uniform draw with a positive target
    let first: Vec<usize> = (0..n).collect();
    let mut zeros = 0usize;
    let (mut state, mut weight) = loop {
        let s = propose(&first, m, Proposal::UniformNoncollisional, rng);
        let w = eval(&s)?;
        if w > 0.0 {
            break (s, w);
        }
        zeros += 1;
        if zeros > MAX_ZERO_PROPOSALS {
            return Err(Error::DegenerateTarget { proposals: zeros });
        }
    };

    let steps = cfg.burn_in + cfg.num_samples * cfg.thinning;
    let mut samples = Vec::with_capacity(cfg.num_samples);
    zeros = 0;
    for step in 1..=steps {
        let candidate = propose(&state, m, cfg.proposal, rng);
        let w = eval(&candidate)?;
        if w == 0.0 {
            zeros += 1;
            if zeros > MAX_ZERO_PROPOSALS {
                return Err(Error::DegenerateTarget { proposals: zeros });
            }
        } else {
            zeros = 0;
            if w >= weight || rng.random::<f64>() * weight < w {
                state = candidate;
                weight = w;
            }
        }
        if step > cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thinning) {
            samples.push(state.clone());
        }
    }
    Ok(samples)
}

fn check_setup(setup: &ExperimentSetup, k: usize) -> Result<()> {
    setup.validate()?;
    if !setup.is_collision_free() {
        return Err(invalid("sampling requires a non-collisional input"));
    }
    let n = setup.photons();
    if setup.modes() < n {
        return Err(invalid(format!("{n} photons do not fit non-collisionally into {} modes", setup.modes())));
    }
    if k > n {
        return Err(invalid(format!("truncation order {k} exceeds photon number {n}")));
    }
    Ok(())
}

/// `max(P_k(s), 0)` for the output with mode assignment `modes`.
fn clamped_truncated(setup: &ExperimentSetup, k: usize, modes: &[usize]) -> Result<f64> {
    let inst = setup.with_output(occupation_from_modes(modes, setup.modes())?)?;
    Ok(truncated_probability(&inst, k, Strategy::Laplace)?.total.max(0.0))
}

fn run_chain(setup: &ExperimentSetup, k: usize, cfg: &ChainConfig, mut rng: ChaCha20Rng) -> Result<Vec<Vec<usize>>> {
    check_setup(setup, k)?;
    let m = setup.modes();
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let modes = sample_with_target(m, setup.photons(), cfg, &mut rng, |s| {
        if let Some(&v) = cache.get(s) {
            return Ok(v);
        }
        let v = clamped_truncated(setup, k, s)?;
        cache.insert(s.to_vec(), v);
        Ok(v)
    })?;
    modes.iter().map(|s| occupation_from_modes(s, m)).collect()
}

/// Metropolis samples (occupation lists) from the clamped truncated
/// distribution; the chain reads stream 0 of `cfg.seed`.
pub fn sample(setup: &ExperimentSetup, k: usize, cfg: &ChainConfig) -> Result<Vec<Vec<usize>>> {
    run_chain(setup, k, cfg, stream_rng(cfg.seed, 0))
}

/// `chains` independent chains, chain `c` reading stream `c` of `cfg.seed`.
pub fn sample_chains(
    setup: &ExperimentSetup,
    k: usize,
    cfg: &ChainConfig,
    chains: usize,
) -> Result<Vec<Vec<Vec<usize>>>> {
    (0..chains as u64).into_par_iter().map(|c| run_chain(setup, k, cfg, stream_rng(cfg.seed, c))).collect()
}

/// Normalized `max(P_k, 0)` over all non-collisional outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    pub outputs: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
}

impl DistributionTable {
    pub fn probability_of(&self, output: &[usize]) -> Option<f64> {
        self.outputs.iter().position(|o| o == output).map(|i| self.probabilities[i])
    }

    /// Total variation distance between this table and the empirical
    /// distribution of `samples`.
    pub fn tv_distance(&self, samples: &[Vec<usize>]) -> f64 {
        let mut counts: HashMap<&[usize], usize> = HashMap::new();
        for s in samples {
            *counts.entry(s.as_slice()).or_default() += 1;
        }
        let total = samples.len() as f64;
        let mut tv = 0.0;
        for (o, &p) in self.outputs.iter().zip(&self.probabilities) {
            let q = counts.remove(o.as_slice()).unwrap_or(0) as f64 / total;
            tv += (p - q).abs();
        }
        tv += counts.values().map(|&c| c as f64 / total).sum::<f64>();
        tv / 2.0
    }
}

pub fn exact_distribution(setup: &ExperimentSetup, k: usize) -> Result<DistributionTable> {
    check_setup(setup, k)?;
    let (m, n) = (setup.modes(), setup.photons());
    if binomial(m, n) > MAX_ENUMERATED_OUTPUTS {
        return Err(invalid(format!("C({m}, {n}) outputs exceed the enumeration limit {MAX_ENUMERATED_OUTPUTS}")));
    }
    let outputs = output_configurations(m, n, false);
    let weights: Vec<f64> = outputs
        .par_iter()
        .map(|o| Ok(truncated_probability(&setup.with_output(o.clone())?, k, Strategy::Laplace)?.total.max(0.0)))
        .collect::<Result<_>>()?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateTarget { proposals: 0 });
    }
    Ok(DistributionTable { outputs, probabilities: weights.iter().map(|w| w / total).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distinguishability::DistinguishabilityModel;
    use crate::probability::mode_assignment;
    use crate::randgen::haar_unitary;

    fn setup(m: usize, n: usize, x: f64, seed: u64) -> ExperimentSetup {
        let mut input = vec![0; m];
        input[..n].iter_mut().for_each(|c| *c = 1);
        ExperimentSetup::new(haar_unitary(m, seed).unwrap(), input, DistinguishabilityModel::homogeneous(x).unwrap())
            .unwrap()
    }

    fn cfg(num_samples: usize, seed: u64) -> ChainConfig {
        ChainConfig::for_modes(8, num_samples, seed)
    }

    #[test]
    fn single_photon_distribution() {
        let s = setup(5, 1, 1.0, 3);
        let table = exact_distribution(&s, 1).unwrap();
        for (o, p) in table.outputs.iter().zip(&table.probabilities) {
            let j = mode_assignment(o)[0];
            assert!((p - s.unitary[(0, j)].norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn table_matches_direct_calls() {
        let s = setup(8, 3, 0.6, 11);
        for k in [0, 2, 3] {
            let table = exact_distribution(&s, k).unwrap();
            assert_eq!(table.outputs.len(), 56);
            assert!((table.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let raw: Vec<f64> = table
                .outputs
                .iter()
                .map(|o| {
                    let inst = s.with_output(o.clone()).unwrap();
                    truncated_probability(&inst, k, Strategy::Direct).unwrap().total.max(0.0)
                })
                .collect();
            let total: f64 = raw.iter().sum();
            for (p, r) in table.probabilities.iter().zip(&raw) {
                assert!((p - r / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_distribution_limits() {
        let s = setup(40, 10, 0.5, 1);
        assert!(exact_distribution(&s, 2).is_err());
        let mut collide = setup(4, 2, 0.5, 1);
        collide.input = vec![2, 0, 0, 0];
        assert!(exact_distribution(&collide, 2).is_err());
        assert!(sample(&collide, 2, &cfg(10, 1)).is_err());
    }

    #[test]
    fn chain_matches_exact_two_photons() {
        let s = setup(4, 2, 0.8, 21);
        let table = exact_distribution(&s, 2).unwrap();
        let samples = sample(&s, 2, &cfg(10_000, 9)).unwrap();
        assert_eq!(samples.len(), 10_000);
        assert!(table.tv_distance(&samples) < 0.05);
    }

    #[test]
    fn classical_chain_with_swap_proposal() {
        let s = setup(8, 3, 0.0, 5);
        let table = exact_distribution(&s, 0).unwrap();
        let c = ChainConfig { proposal: Proposal::SingleModeSwap, ..cfg(20_000, 4) };
        let samples = sample(&s, 0, &c).unwrap();
        assert!(table.tv_distance(&samples) < 0.05);
    }

    #[test]
    fn uniform_target_gives_uniform_samples() {
        let (m, n) = (6, 2);
        let c =
            ChainConfig { burn_in: 100, thinning: 5, proposal: Proposal::SingleModeSwap, seed: 1, num_samples: 15_000 };
        let samples = sample_with_target(m, n, &c, &mut stream_rng(1, 0), |_| Ok(1.0)).unwrap();
        let mut counts: HashMap<Vec<usize>, f64> = HashMap::new();
        for s in &samples {
            *counts.entry(s.clone()).or_default() += 1.0;
        }
        assert_eq!(counts.len(), 15);
        let expected = samples.len() as f64 / 15.0;
        let chi2: f64 = counts.values().map(|o| (o - expected).powi(2) / expected).sum();
        // chi-square with 14 degrees of freedom, p = 0.01
        assert!(chi2 < 29.14, "chi2 = {chi2}");
    }

    #[test]
    fn detailed_balance_on_six_states() {
        let (m, n) = (4, 2);
        let weights: HashMap<Vec<usize>, f64> =
            (0..m).flat_map(|a| (a + 1..m).map(move |b| vec![a, b])).zip([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).collect();
        for proposal in [Proposal::UniformNoncollisional, Proposal::SingleModeSwap] {
            let c = ChainConfig { burn_in: 0, thinning: 1, proposal, seed: 3, num_samples: 200_000 };
            let chain = sample_with_target(m, n, &c, &mut stream_rng(3, 0), |s| Ok(weights[s])).unwrap();
            let mut flow: HashMap<(Vec<usize>, Vec<usize>), f64> = HashMap::new();
            for w in chain.windows(2) {
                if w[0] != w[1] {
                    *flow.entry((w[0].clone(), w[1].clone())).or_default() += 1.0;
                }
            }
            for ((a, b), &f) in &flow {
                let back = flow.get(&(b.clone(), a.clone())).copied().unwrap_or(0.0);
                assert!((f - back).abs() <= 4.0 * (f + back).sqrt() + 1.0, "{a:?}->{b:?}: {f} vs {back}");
            }
        }
    }

    #[test]
    fn zero_target_is_degenerate() {
        let c =
            ChainConfig { burn_in: 0, thinning: 1, proposal: Proposal::UniformNoncollisional, seed: 1, num_samples: 5 };
        let r = sample_with_target(6, 2, &c, &mut stream_rng(1, 0), |_| Ok(0.0));
        assert!(matches!(r, Err(Error::DegenerateTarget { .. })));
    }

    #[test]
    fn chains_are_reproducible() {
        let s = setup(6, 2, 0.5, 8);
        let c =
            ChainConfig { burn_in: 50, thinning: 2, proposal: Proposal::SingleModeSwap, seed: 77, num_samples: 200 };
        assert_eq!(sample(&s, 2, &c).unwrap(), sample(&s, 2, &c).unwrap());
        let chains = sample_chains(&s, 2, &c, 3).unwrap();
        assert_eq!(chains[0], sample(&s, 2, &c).unwrap());
        assert_ne!(chains[1], chains[2]);
    }

    #[test]
    fn tv_decreases_with_chain_length() {
        let s = setup(5, 2, 0.7, 13);
        let table = exact_distribution(&s, 2).unwrap();
        let short = table.tv_distance(&sample(&s, 2, &ChainConfig::for_modes(5, 200, 2)).unwrap());
        let long = table.tv_distance(&sample(&s, 2, &ChainConfig::for_modes(5, 20_000, 2)).unwrap());
        assert!(long < short);
    }
}
