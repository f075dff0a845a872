//! Goal-space abstraction and the append-only goal buffers.

use rand::Rng;

/// A point in a goal space.
///
/// `coords` feeds the density model; `distance` is the environment metric used
/// by the sparse reward.
pub trait Goal: Clone + PartialEq + std::fmt::Debug {
    fn coords(&self) -> Vec<f64>;
    fn distance(&self, other: &Self) -> f64;
}

impl Goal for Vec<f64> {
    fn coords(&self) -> Vec<f64> {
        self.clone()
    }

    fn distance(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Discrete 1-D goals (the toy chain).
impl Goal for usize {
    fn coords(&self) -> Vec<f64> {
        vec![*self as f64]
    }

    fn distance(&self, other: &Self) -> f64 {
        self.abs_diff(*other) as f64
    }
}

/// Append-only store of goals with uniform sampling.
///
/// Used for achieved goals (the empirical `p_ag`) as well as the buffers of
/// announced desired goals and pursued behavioural goals.
#[derive(Debug, Clone)]
pub struct GoalBuffer<G> {
    items: Vec<G>,
}

/// The buffer of every achieved goal seen so far.
pub type AchievedGoalBuffer<G> = GoalBuffer<G>;

impl<G> Default for GoalBuffer<G> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<G: Clone> GoalBuffer<G> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, goal: G) {
        self.items.push(goal);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&G> {
        self.items.get(index)
    }

    pub fn as_slice(&self) -> &[G] {
        &self.items
    }

    pub fn iter(&self) -> impl Iterator<Item = &G> {
        self.items.iter()
    }

    /// One uniform draw, or `None` when empty.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&G> {
        if self.items.is_empty() {
            None
        } else {
            Some(&self.items[rng.random_range(0..self.items.len())])
        }
    }

    /// `n` uniform draws with replacement.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<G> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect()
    }
}

impl<G: Goal> GoalBuffer<G> {
    /// Writes one line per goal, coordinates separated by commas.
    pub fn write_snapshot<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for g in &self.items {
            let line: Vec<String> = g.coords().iter().map(|c| c.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_reaches_every_item() {
        let mut buf = GoalBuffer::new();
        for i in 0..5usize {
            buf.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [false; 5];
        for g in buf.sample_n(500, &mut rng) {
            seen[g] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn empty_buffer_samples_nothing() {
        let buf: GoalBuffer<usize> = GoalBuffer::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample(&mut rng).is_none());
        assert!(buf.sample_n(3, &mut rng).is_empty());
    }

    #[test]
    fn snapshot_is_one_line_per_goal() {
        let mut buf = GoalBuffer::new();
        buf.push(vec![1.0, 2.5]);
        buf.push(vec![-3.0, 0.0]);
        let mut out = Vec::new();
        buf.write_snapshot(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1,2.5\n-3,0\n");
    }
}
