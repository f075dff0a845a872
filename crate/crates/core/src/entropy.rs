//! Exact entropy-gain mathematics on discrete goal sets.
//!
//! Goal ids are dense indices `0..universe`. [`expected_entropy_gain`] scores a
//! behavioural goal by the expected point-wise entropy gain of the next
//! achieved goal; [`brute_force_next_entropy`] computes the expected next-step
//! entropy by constructing every updated distribution explicitly and is kept
//! as an independent check of the former. [`entropy_gradient_score`] is the
//! small-step limit, the cross-entropy `H(q, p)`.

use std::collections::BTreeMap;

use thiserror::Error;

/// Tolerance on probability sums.
pub const MASS_TOL: f64 = 1e-9;

/// Score assigned when a conditional puts mass where the buffer has none.
pub const SENTINEL_MAX_SCORE: f64 = f64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum MathError {
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("no conditional row for behavioural goal {0}")]
    MissingRow(usize),
    #[error("goal {goal} outside universe of size {universe}")]
    OutOfUniverse { goal: usize, universe: usize },
}

/// `x ln x` with the convention `0 ln 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Shannon entropy (nats) of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    0.0 - p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

/// Exact probability mass function over discrete goal ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    mass: BTreeMap<usize, f64>,
}

impl DiscretePmf {
    /// Validates non-negativity and unit sum; zero entries are dropped.
    pub fn new(mass: BTreeMap<usize, f64>) -> Result<Self, MathError> {
        if mass.values().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(MathError::Domain("negative or non-finite mass".into()));
        }
        let total: f64 = mass.values().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MathError::Domain(format!("masses sum to {total}, not 1")));
        }
        Ok(Self {
            mass: mass.into_iter().filter(|&(_, m)| m > 0.0).collect(),
        })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights<I: IntoIterator<Item = (usize, f64)>>(weights: I) -> Result<Self, MathError> {
        let mut mass = BTreeMap::new();
        for (g, w) in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(MathError::Domain(format!("weight {w} for goal {g}")));
            }
            *mass.entry(g).or_insert(0.0) += w;
        }
        let total: f64 = mass.values().sum();
        if !(total > 0.0) {
            return Err(MathError::Domain("weights sum to zero".into()));
        }
        mass.values_mut().for_each(|m| *m /= total);
        Self::new(mass)
    }

    pub fn point_mass(goal: usize) -> Self {
        Self {
            mass: BTreeMap::from([(goal, 1.0)]),
        }
    }

    pub fn prob(&self, goal: usize) -> f64 {
        self.mass.get(&goal).copied().unwrap_or(0.0)
    }

    /// Support in increasing goal order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass.iter().map(|(&g, &m)| (g, m))
    }

    pub fn entropy(&self) -> f64 {
        -self.mass.values().map(|&m| xlogx(m)).sum::<f64>()
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (&g, &m) in &self.mass {
            acc += m;
            last = g;
            if u < acc {
                return g;
            }
        }
        last
    }
}

/// Integer counts over a goal universe; the empirical achieved-goal pmf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountedPmf {
    counts: Vec<u64>,
    total: u64,
}

impl CountedPmf {
    pub fn new(universe: usize) -> Self {
        Self {
            counts: vec![0; universe],
            total: 0,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self, MathError> {
        let total = counts.iter().sum();
        if total == 0 {
            return Err(MathError::Domain("counts sum to zero".into()));
        }
        Ok(Self { counts, total })
    }

    pub fn universe(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, goal: usize) -> u64 {
        self.counts.get(goal).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add(&mut self, goal: usize) -> Result<(), MathError> {
        let universe = self.counts.len();
        let c = self
            .counts
            .get_mut(goal)
            .ok_or(MathError::OutOfUniverse { goal, universe })?;
        *c += 1;
        self.total += 1;
        Ok(())
    }

    pub fn prob(&self, goal: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(goal) as f64 / self.total as f64
        }
    }

    /// `η = 1/|B|`.
    pub fn eta(&self) -> f64 {
        1.0 / self.total as f64
    }

    /// Goal ids with non-zero count, increasing.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(g, _)| g)
    }

    pub fn support_size(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn entropy(&self) -> f64 {
        let n = self.total as f64;
        0.0 - self
            .counts
            .iter()
            .map(|&c| xlogx(c as f64 / n))
            .sum::<f64>()
    }
}

/// `q(g' | ĝ)`: one achieved-goal pmf per behavioural goal.
#[derive(Debug, Clone, Default)]
pub struct ConditionalModel {
    rows: BTreeMap<usize, DiscretePmf>,
}

impl ConditionalModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, behavioural: usize, row: DiscretePmf) {
        self.rows.insert(behavioural, row);
    }

    pub fn row(&self, behavioural: usize) -> Result<&DiscretePmf, MathError> {
        self.rows.get(&behavioural).ok_or(MathError::MissingRow(behavioural))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Point-wise entropy gain `p ln p − (p+η) ln(p+η)`.
///
/// `p + η` may exceed 1: with `η = 1/|B|` the unnormalized update `p + η`
/// of a goal holding most of the buffer does.
pub fn delta_h(p: f64, eta: f64) -> Result<f64, MathError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MathError::Domain(format!("p = {p} not in [0, 1]")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(MathError::Domain(format!("eta = {eta} not in (0, 1]")));
    }
    Ok(xlogx(p) - xlogx(p + eta))
}

/// `Σ_{g'} q(g'|ĝ) ΔH(g')` with `η = 1/|B|`.
pub fn expected_entropy_gain(
    pmf: &CountedPmf,
    q: &ConditionalModel,
    candidate: usize,
) -> Result<f64, MathError> {
    let eta = pmf.eta();
    q.row(candidate)?
        .iter()
        .map(|(g, w)| delta_h(pmf.prob(g), eta).map(|d| w * d))
        .sum()
}

/// Cross-entropy `−Σ q(g') ln p(g')`, equal to `D_KL(q||p) + H[q]`.
///
/// Returns [`SENTINEL_MAX_SCORE`] when `q_row` has mass outside the support.
pub fn entropy_gradient_score(pmf: &CountedPmf, q_row: &DiscretePmf) -> f64 {
    let mut score = 0.0;
    for (g, w) in q_row.iter() {
        let p = pmf.prob(g);
        if p == 0.0 {
            return SENTINEL_MAX_SCORE;
        }
        score -= w * p.ln();
    }
    score
}

/// `E_{g'~q(·|ĝ)} H[p_{ag|g'}]`, building each updated pmf explicitly.
pub fn brute_force_next_entropy(
    pmf: &CountedPmf,
    q: &ConditionalModel,
    candidate: usize,
) -> Result<f64, MathError> {
    let row = q.row(candidate)?;
    let mut expected = 0.0;
    for (g_next, w) in row.iter() {
        let mut counts = pmf.counts().to_vec();
        if g_next >= counts.len() {
            counts.resize(g_next + 1, 0);
        }
        counts[g_next] += 1;
        let total: u64 = counts.iter().sum();
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        expected += w * shannon_entropy(&probs);
    }
    Ok(expected)
}

/// Indices whose score is within `tol` of the maximum.
pub fn argmax_set(scores: &[f64], tol: f64) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= best - tol)
        .map(|(i, _)| i)
        .collect()
}

/// Indices whose score is within `tol` of the minimum.
pub fn argmin_set(scores: &[f64], tol: f64) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= best + tol)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_h_examples() {
        assert_eq!(delta_h(0.0, 1.0).unwrap(), 0.0);
        let v = delta_h(0.5, 0.5).unwrap();
        assert!((v - 0.5 * 0.5f64.ln()).abs() < 1e-15);
        assert!((v + 0.34657).abs() < 1e-5);
    }

    #[test]
    fn delta_h_is_decreasing_in_p() {
        let eta = 0.01;
        let grid: Vec<f64> = (0..=98).map(|i| i as f64 / 100.0).collect();
        for w in grid.windows(2) {
            assert!(delta_h(w[0], eta).unwrap() > delta_h(w[1], eta).unwrap());
        }
    }

    #[test]
    fn delta_h_domain_errors() {
        assert!(delta_h(-0.1, 0.5).is_err());
        assert!(delta_h(0.5, 0.0).is_err());
        assert!(delta_h(1.0, 1.0).is_ok());
        assert!(delta_h(1.1, 0.1).is_err());
    }

    #[test]
    fn uniform_pmf_ties_every_candidate() {
        let pmf = CountedPmf::from_counts(vec![3; 6]).unwrap();
        let mut q = ConditionalModel::new();
        for g in 0..6 {
            q.insert(g, DiscretePmf::point_mass(g));
        }
        let scores: Vec<f64> = (0..6)
            .map(|g| expected_entropy_gain(&pmf, &q, g).unwrap())
            .collect();
        assert!(scores.iter().all(|&s| s == scores[0]));
    }

    #[test]
    fn deterministic_conditional_prefers_rarest_goal() {
        let pmf = CountedPmf::from_counts(vec![5, 2, 9, 1, 4]).unwrap();
        let mut q = ConditionalModel::new();
        for g in 0..5 {
            q.insert(g, DiscretePmf::point_mass(g));
        }
        let scores: Vec<f64> = (0..5)
            .map(|g| expected_entropy_gain(&pmf, &q, g).unwrap())
            .collect();
        assert_eq!(argmax_set(&scores, 0.0), vec![3]);
    }

    #[test]
    fn missing_row_is_reported() {
        let pmf = CountedPmf::from_counts(vec![1, 1]).unwrap();
        let q = ConditionalModel::new();
        assert_eq!(expected_entropy_gain(&pmf, &q, 1), Err(MathError::MissingRow(1)));
        assert_eq!(brute_force_next_entropy(&pmf, &q, 0), Err(MathError::MissingRow(0)));
    }

    #[test]
    fn gradient_score_examples() {
        let pmf = CountedPmf::from_counts(vec![1, 2, 3, 4]).unwrap();
        let own = DiscretePmf::from_weights((0..4).map(|g| (g, (g + 1) as f64))).unwrap();
        assert!((entropy_gradient_score(&pmf, &own) - pmf.entropy()).abs() < 1e-12);
        let point = DiscretePmf::point_mass(2);
        assert!((entropy_gradient_score(&pmf, &point) + (0.3f64).ln()).abs() < 1e-12);
        let outside = DiscretePmf::point_mass(7);
        assert_eq!(entropy_gradient_score(&pmf, &outside), SENTINEL_MAX_SCORE);
    }

    #[test]
    fn brute_force_examples() {
        // universe {A=0, B=1}, counts {A:1}
        let pmf = CountedPmf::from_counts(vec![1, 0]).unwrap();
        let mut q = ConditionalModel::new();
        q.insert(0, DiscretePmf::point_mass(0));
        assert_eq!(brute_force_next_entropy(&pmf, &q, 0).unwrap(), 0.0);
        q.insert(0, DiscretePmf::point_mass(1));
        let h = brute_force_next_entropy(&pmf, &q, 0).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pmf_validation() {
        assert!(DiscretePmf::new(BTreeMap::from([(0, 0.5), (1, 0.4)])).is_err());
        assert!(DiscretePmf::new(BTreeMap::from([(0, -0.5), (1, 1.5)])).is_err());
        assert!(DiscretePmf::from_weights([(0, 0.0)]).is_err());
        let p = DiscretePmf::from_weights([(3, 1.0), (5, 3.0)]).unwrap();
        assert_eq!(p.prob(5), 0.75);
        assert_eq!(p.sample_with(0.1), 3);
        assert_eq!(p.sample_with(0.3), 5);
        assert_eq!(p.sample_with(0.999_999), 5);
    }

    #[test]
    fn counted_pmf_bookkeeping() {
        let mut c = CountedPmf::new(4);
        c.add(2).unwrap();
        c.add(2).unwrap();
        c.add(0).unwrap();
        assert_eq!(c.total(), 3);
        assert_eq!(c.support().collect::<Vec<_>>(), vec![0, 2]);
        assert!((c.prob(2) - 2.0 / 3.0).abs() < 1e-15);
        assert!(c.add(9).is_err());
        assert!(CountedPmf::from_counts(vec![0, 0]).is_err());
    }
}
