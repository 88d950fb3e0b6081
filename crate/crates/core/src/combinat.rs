//! Permutations grouped by fixed-point count, rencontres numbers and
//! elementary symmetric means.
//!
//! Positions are 0-based throughout. A permutation `p` maps position `i` to
//! `p[i]`.

use itertools::Itertools;
use std::fmt;
use std::ops::Range;

use crate::error::{invalid, Result};

/// Largest `n` for which `n!` fits in a `u128`.
pub const MAX_EXACT_N: usize = 34;

/// A bijection on `{0, .., n-1}` stored as an index array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    /// Validates that `images` is a bijection on `0..images.len()`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n {
                return Err(invalid(format!("image {v} out of range for permutation of {n}")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(invalid(format!("image {v} repeated; not a bijection")));
            }
        }
        Ok(Permutation(images))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Permutation(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(invalid("cannot compose permutations of different sizes"));
        }
        Ok(Permutation(other.0.iter().map(|&i| self.0[i]).collect()))
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Number of positions not mapped to themselves (the order `j`).
    pub fn moved_count(&self) -> usize {
        self.0.iter().enumerate().filter(|&(i, &v)| i != v).count()
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|&(i, &v)| i == v).map(|(i, _)| i).collect()
    }

    pub fn moved_points(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|&(i, &v)| i != v).map(|(i, _)| i).collect()
    }

    pub fn cycles(&self) -> CycleDecomposition {
        decompose_valid(&self.0)
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.iter().join(" "))
    }
}

/// Disjoint cycles of a permutation, fixed points included as 1-cycles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleDecomposition {
    pub n: usize,
    /// Every cycle starts at its smallest element; cycles are ordered by
    /// that element.
    pub cycles: Vec<Vec<usize>>,
    pub fixed_points: Vec<usize>,
}

impl CycleDecomposition {
    /// Cycles of length at least two.
    pub fn nontrivial(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.cycles.iter().filter(|c| c.len() > 1)
    }

    /// Cycle lengths in non-increasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles.iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    pub fn to_permutation(&self) -> Permutation {
        let mut images = vec![0; self.n];
        for cycle in &self.cycles {
            for (pos, &i) in cycle.iter().enumerate() {
                images[i] = cycle[(pos + 1) % cycle.len()];
            }
        }
        Permutation(images)
    }
}

/// Cycle decomposition of an arbitrary index array; fails if it is not a
/// bijection.
pub fn cycle_decompose(perm: &[usize]) -> Result<CycleDecomposition> {
    let p = Permutation::new(perm.to_vec())?;
    Ok(p.cycles())
}

fn decompose_valid(images: &[usize]) -> CycleDecomposition {
    let n = images.len();
    let mut visited = vec![false; n];
    let mut cycles = Vec::new();
    let mut fixed_points = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let mut cycle = vec![start];
        visited[start] = true;
        let mut i = images[start];
        while i != start {
            visited[i] = true;
            cycle.push(i);
            i = images[i];
        }
        if cycle.len() == 1 {
            fixed_points.push(start);
        }
        cycles.push(cycle);
    }
    CycleDecomposition { n, cycles, fixed_points }
}

/// All derangements of `0..j` in lexicographic order.
pub fn derangements(j: usize) -> Vec<Vec<usize>> {
    fn extend(pos: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let j = used.len();
        if pos == j {
            out.push(cur.clone());
            return;
        }
        for v in 0..j {
            if v != pos && !used[v] {
                used[v] = true;
                cur.push(v);
                extend(pos + 1, cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(0, &mut Vec::with_capacity(j), &mut vec![false; j], &mut out);
    out
}

/// The set of permutations of `n` elements with exactly `n - j` fixed points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPointClass {
    pub n: usize,
    pub j: usize,
}

impl FixedPointClass {
    pub fn new(n: usize, j: usize) -> Result<Self> {
        if j > n {
            return Err(invalid(format!("order j = {j} exceeds n = {n}")));
        }
        Ok(FixedPointClass { n, j })
    }

    pub fn is_empty(&self) -> bool {
        self.j == 1
    }

    /// Class size, `R(n, n - j)`.
    pub fn size(&self) -> Result<u128> {
        rencontres(self.n, self.n - self.j)
    }

    pub fn iter(&self) -> SigmaJ {
        SigmaJ::new(self.n, self.j)
    }
}

/// Iterator over the permutations with exactly `n - j` fixed points.
///
/// Built as (choice of the `j` moved positions) × (derangement of those
/// positions). Moved sets come in lexicographic order, and derangements in
/// lexicographic order within each set, so the sequence is deterministic.
pub struct SigmaJ {
    n: usize,
    subsets: itertools::Combinations<Range<usize>>,
    local: Vec<Vec<usize>>,
    subset: Option<Vec<usize>>,
    next_local: usize,
}

impl SigmaJ {
    fn new(n: usize, j: usize) -> Self {
        let local = derangements(j);
        let mut subsets = (0..n).combinations(j);
        let subset = if local.is_empty() { None } else { subsets.next() };
        SigmaJ { n, subsets, local, subset, next_local: 0 }
    }
}

impl Iterator for SigmaJ {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        loop {
            let subset = self.subset.as_ref()?;
            if self.next_local < self.local.len() {
                let d = &self.local[self.next_local];
                self.next_local += 1;
                let mut images: Vec<usize> = (0..self.n).collect();
                for (a, &b) in d.iter().enumerate() {
                    images[subset[a]] = subset[b];
                }
                return Some(Permutation(images));
            }
            self.subset = self.subsets.next();
            self.next_local = 0;
        }
    }
}

/// Permutations of `n` elements with exactly `n - j` fixed points.
///
/// `j = 1` yields nothing, since a permutation cannot move a single point.
pub fn enumerate_sigma_j(n: usize, j: usize) -> Result<SigmaJ> {
    Ok(FixedPointClass::new(n, j)?.iter())
}

/// Orders with a non-empty fixed-point class, `0, 2, 3, .., max_order`.
pub fn nonempty_orders(max_order: usize) -> impl Iterator<Item = usize> {
    (0..=max_order).filter(|&j| j != 1)
}

fn check_exact(n: usize) -> Result<()> {
    if n > MAX_EXACT_N {
        return Err(invalid(format!(
            "n = {n} exceeds exact integer range ({MAX_EXACT_N}); use the log-space variants"
        )));
    }
    Ok(())
}

pub fn factorial(n: usize) -> Result<u128> {
    check_exact(n)?;
    Ok((1..=n as u128).product())
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

pub fn binomial_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
}

/// Rencontres number `R(n, k)`: permutations of `n` elements with exactly `k`
/// fixed points.
///
/// With `j = n - k` moved points, `R(n, n-j) = n!/(n-j)! · Σ_{q=0}^{j} (-1)^q/q!`,
/// evaluated term by term in exact integers (`n!/((n-j)! q!)` is integral for
/// `q ≤ j`).
pub fn rencontres(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Err(invalid(format!("fixed-point count {k} exceeds n = {n}")));
    }
    check_exact(n)?;
    let j = n - k;
    // falling factorial n!/(n-j)!
    let falling: u128 = ((k + 1)..=n).map(|i| i as u128).product();
    let mut sum: i128 = 0;
    let mut q_fact: u128 = 1;
    for q in 0..=j {
        if q > 0 {
            q_fact *= q as u128;
        }
        let term = (falling / q_fact) as i128;
        if q % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum as u128)
}

/// Natural log of `n!`, valid for any `n`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Natural log of `R(n, k)`; `-inf` when the count is zero. For use beyond
/// [`MAX_EXACT_N`], where only ratios matter.
pub fn ln_rencontres(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(invalid(format!("fixed-point count {k} exceeds n = {n}")));
    }
    let j = n - k;
    if j == 1 {
        return Ok(f64::NEG_INFINITY);
    }
    // D_j / j! = Σ_{q=0}^{j} (-1)^q / q!, positive for j ≠ 1
    let mut term = 1.0;
    let mut alt = 1.0;
    for q in 1..=j {
        term /= q as f64;
        alt += if q % 2 == 0 { term } else { -term };
    }
    Ok(ln_factorial(n) - ln_factorial(k) + alt.ln())
}

/// Elementary symmetric means of a vector of values in `[0, 1]`.
///
/// `means[j] = e_j(values) / C(n, j)` for `j = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMeans {
    pub values: Vec<f64>,
    pub means: Vec<f64>,
}

impl SymmetricMeans {
    pub fn new(values: &[f64]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("value {v} outside [0, 1]")));
        }
        let n = values.len();
        // coefficients of Π (1 + t·v_i); all terms non-negative, no cancellation
        let mut e = vec![0.0; n + 1];
        e[0] = 1.0;
        for (i, &v) in values.iter().enumerate() {
            for j in (1..=i + 1).rev() {
                e[j] += v * e[j - 1];
            }
        }
        let means = e.iter().enumerate().map(|(j, &ej)| ej / binomial_f64(n, j)).collect();
        Ok(SymmetricMeans { values: values.to_vec(), means })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.means[j]
    }

    /// `e_j` recovered from the mean.
    pub fn elementary(&self, j: usize) -> f64 {
        self.means[j] * binomial_f64(self.n(), j)
    }
}

pub fn symmetric_means(values: &[f64]) -> Result<SymmetricMeans> {
    SymmetricMeans::new(values)
}

/// `Σ_{τ ∈ σ_j} Π_i |S_{i,τ(i)}|²` for the generalized bad-bit overlap matrix
/// built from `x`, via the closed form `R(n, n-j) · M_j(x²)`.
pub fn sigma_j_overlap_sum(x: &[f64], j: usize) -> Result<f64> {
    let n = x.len();
    if j > n {
        return Err(invalid(format!("order j = {j} exceeds n = {n}")));
    }
    let squares: Vec<f64> = x.iter().map(|v| v * v).collect();
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("visibility parameters must lie in [0, 1]"));
    }
    let means = SymmetricMeans::new(&squares)?;
    let count = if n <= MAX_EXACT_N { rencontres(n, n - j)? as f64 } else { ln_rencontres(n, n - j)?.exp() };
    Ok(count * means.mean(j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        (0..n).permutations(n).collect()
    }

    #[test]
    fn sigma_j_small_classes() {
        let id: Vec<_> = enumerate_sigma_j(3, 0).unwrap().collect();
        assert_eq!(id, vec![Permutation::identity(3)]);

        let three: Vec<_> = enumerate_sigma_j(3, 3).unwrap().collect();
        assert_eq!(three.len(), 2);
        assert!(three.iter().all(|p| p.cycles().cycle_type() == vec![3]));

        assert_eq!(enumerate_sigma_j(4, 4).unwrap().count(), 9);
        assert_eq!(enumerate_sigma_j(5, 1).unwrap().count(), 0);
        assert!(enumerate_sigma_j(3, 4).is_err());
    }

    #[test]
    fn sigma_j_matches_brute_force_filter() {
        for n in 0..=6 {
            for j in nonempty_orders(n) {
                let mut got: Vec<Vec<usize>> = enumerate_sigma_j(n, j).unwrap().map(Permutation::into_vec).collect();
                got.sort();
                let mut want: Vec<Vec<usize>> = all_perms(n)
                    .into_iter()
                    .filter(|p| p.iter().enumerate().filter(|&(i, &v)| i != v).count() == j)
                    .collect();
                want.sort();
                assert_eq!(got, want, "n={n} j={j}");
                assert_eq!(got.len() as u128, rencontres(n, n - j).unwrap());
            }
        }
    }

    #[test]
    fn rencontres_values() {
        for n in 0..10 {
            assert_eq!(rencontres(n, n).unwrap(), 1);
        }
        for n in 1..10 {
            assert_eq!(rencontres(n, n - 1).unwrap(), 0);
        }
        assert_eq!(rencontres(4, 0).unwrap(), 9);
        assert_eq!(rencontres(5, 2).unwrap(), 20);
        assert_eq!(rencontres(5, 1).unwrap(), 45);
        assert_eq!(rencontres(5, 0).unwrap(), 44);
        assert!(rencontres(3, 4).is_err());
        assert!(rencontres(40, 3).is_err());
    }

    #[test]
    fn rencontres_rows_sum_to_factorial() {
        for n in 0..=20 {
            let total: u128 = nonempty_orders(n).map(|j| rencontres(n, n - j).unwrap()).sum();
            assert_eq!(total, factorial(n).unwrap(), "n={n}");
        }
    }

    #[test]
    fn rencontres_agrees_with_derangement_recurrence() {
        // D_0 = 1, D_1 = 0, D_j = (j-1)(D_{j-1} + D_{j-2})
        let mut d = vec![1u128, 0];
        for j in 2..=30 {
            d.push((j as u128 - 1) * (d[j - 1] + d[j - 2]));
        }
        for n in 0..=30 {
            for k in 0..=n {
                assert_eq!(rencontres(n, k).unwrap(), binomial(n, k) * d[n - k]);
            }
        }
    }

    #[test]
    fn ln_rencontres_tracks_exact() {
        for (n, k) in [(10, 3), (20, 0), (25, 12), (34, 1)] {
            let exact = rencontres(n, k).unwrap() as f64;
            let approx = ln_rencontres(n, k).unwrap().exp();
            assert!((approx - exact).abs() / exact < 1e-10);
        }
        assert_eq!(ln_rencontres(50, 49).unwrap(), f64::NEG_INFINITY);
        assert!(ln_rencontres(200, 100).unwrap().is_finite());
    }

    #[test]
    fn cycle_decompose_examples() {
        let id = cycle_decompose(&[0, 1, 2]).unwrap();
        assert_eq!(id.fixed_points, vec![0, 1, 2]);
        assert_eq!(id.nontrivial().count(), 0);

        let swap = cycle_decompose(&[1, 0, 2]).unwrap();
        assert_eq!(swap.cycles, vec![vec![0, 1], vec![2]]);
        assert_eq!(swap.fixed_points, vec![2]);

        assert!(cycle_decompose(&[0, 0, 1]).is_err());
        assert!(cycle_decompose(&[0, 3, 1]).is_err());
    }

    #[test]
    fn symmetric_means_examples() {
        let m = symmetric_means(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((m.mean(2) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.mean(0), 1.0);

        let c = 0.37;
        let h = symmetric_means(&[c; 7]).unwrap();
        for j in 0..=7 {
            assert!((h.mean(j) - c.powi(j as i32)).abs() < 1e-14);
        }

        let z = symmetric_means(&[0.0; 5]).unwrap();
        assert!(z.means[1..].iter().all(|&v| v == 0.0));

        assert!(symmetric_means(&[0.5, 1.5]).is_err());
        assert!(symmetric_means(&[-0.1]).is_err());
    }

    #[test]
    fn overlap_sum_small_cases() {
        assert_eq!(sigma_j_overlap_sum(&[0.3, 0.8, 0.5], 0).unwrap(), 1.0);
        assert!((sigma_j_overlap_sum(&[1.0; 4], 4).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(sigma_j_overlap_sum(&[0.4; 4], 1).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn cycles_recompose(images in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let p = Permutation::new(images).unwrap();
            let d = p.cycles();
            prop_assert_eq!(d.to_permutation(), p.clone());
            let mut covered: Vec<usize> = d.cycles.iter().flatten().copied().collect();
            covered.sort();
            prop_assert_eq!(covered, (0..6).collect::<Vec<_>>());
            prop_assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(6));
        }

        #[test]
        fn maclaurin_chain(values in prop::collection::vec(0.0f64..=1.0, 2..=10)) {
            let m = symmetric_means(&values).unwrap();
            let m2 = m.mean(2);
            for j in 2..=values.len() {
                prop_assert!(m.mean(j) <= m2.powf(j as f64 / 2.0) + 1e-12);
            }
            for j in 1..values.len() {
                let a = m.mean(j).powf(1.0 / j as f64);
                let b = m.mean(j + 1).powf(1.0 / (j + 1) as f64);
                prop_assert!(b <= a + 1e-12);
            }
        }
    }
}
