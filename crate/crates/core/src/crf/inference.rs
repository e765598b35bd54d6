//! Exact inference for a linear-chain CRF, entirely in log space.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Label-pair and boundary scores of a linear chain over `L` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    /// `transitions[[i, j]]` scores label `j` following label `i`.
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub stop: Array1<f64>,
}

impl Chain {
    pub fn zeros(labels: usize) -> Self {
        Chain {
            transitions: Array2::zeros((labels, labels)),
            start: Array1::zeros(labels),
            stop: Array1::zeros(labels),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.start.len()
    }
}

/// Max-shifted `log Σ exp(x)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Result<()> {
    if emissions.nrows() == 0 {
        return Err(Error::invalid("empty sequence"));
    }
    if emissions.ncols() != chain.num_labels() {
        return Err(Error::Dimension {
            expected: chain.num_labels(),
            actual: emissions.ncols(),
        });
    }
    if let Some(((i, j), v)) = emissions.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!("emission[{i}][{j}] = {v}")));
    }
    Ok(())
}

/// Unnormalized log score of one labeling:
/// `start[y0] + Σ emissions[i][yi] + Σ transitions[y(i-1)][yi] + stop[y(n-1)]`.
pub fn score_sequence(emissions: ArrayView2<'_, f64>, chain: &Chain, labels: &[usize]) -> Result<f64> {
    let n = emissions.nrows();
    if labels.len() != n || n == 0 {
        return Err(Error::Dimension {
            expected: n,
            actual: labels.len(),
        });
    }
    let l = chain.num_labels();
    if let Some(&bad) = labels.iter().find(|&&y| y >= l) {
        return Err(Error::invalid(format!("label index {bad} out of range for {l} labels")));
    }
    let mut score = chain.start[labels[0]] + chain.stop[labels[n - 1]];
    for (i, &y) in labels.iter().enumerate() {
        score += emissions[[i, y]];
        if i > 0 {
            score += chain.transitions[[labels[i - 1], y]];
        }
    }
    Ok(score)
}

/// Forward and backward log-messages for one sequence.
#[derive(Clone, Debug)]
pub struct ForwardBackward {
    /// `alpha[[i, j]]`: log-sum of scores of prefixes ending in label `j` at `i`.
    pub alpha: Array2<f64>,
    /// `beta[[i, j]]`: log-sum of scores of suffixes after label `j` at `i`,
    /// including the stop score.
    pub beta: Array2<f64>,
    pub log_z: f64,
}

impl ForwardBackward {
    pub fn new(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Result<Self> {
        check(emissions, chain)?;
        let alpha = forward(emissions, chain);
        let beta = backward(emissions, chain);
        let n = emissions.nrows();
        let log_z = log_sum_exp((0..chain.num_labels()).map(|j| alpha[[n - 1, j]] + chain.stop[j]));
        Ok(ForwardBackward { alpha, beta, log_z })
    }

    /// Posterior label probabilities per position. Rows sum to one.
    pub fn marginals(&self) -> Array2<f64> {
        let mut m = &self.alpha + &self.beta - self.log_z;
        m.mapv_inplace(f64::exp);
        for mut row in m.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        m
    }

    /// Expected transition counts `Σ_i P(y(i-1) = a, y(i) = b)`.
    pub fn expected_transitions(&self, emissions: ArrayView2<'_, f64>, chain: &Chain) -> Array2<f64> {
        let (n, l) = emissions.dim();
        let mut counts = Array2::zeros((l, l));
        for i in 1..n {
            for a in 0..l {
                let left = self.alpha[[i - 1, a]];
                for b in 0..l {
                    let lp = left + chain.transitions[[a, b]] + emissions[[i, b]] + self.beta[[i, b]]
                        - self.log_z;
                    counts[[a, b]] += lp.exp();
                }
            }
        }
        counts
    }
}

fn forward(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Array2<f64> {
    let (n, l) = emissions.dim();
    let mut alpha = Array2::zeros((n, l));
    for j in 0..l {
        alpha[[0, j]] = chain.start[j] + emissions[[0, j]];
    }
    for i in 1..n {
        for j in 0..l {
            let incoming = (0..l).map(|k| alpha[[i - 1, k]] + chain.transitions[[k, j]]);
            alpha[[i, j]] = emissions[[i, j]] + log_sum_exp(incoming);
        }
    }
    alpha
}

fn backward(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Array2<f64> {
    let (n, l) = emissions.dim();
    let mut beta = Array2::zeros((n, l));
    for j in 0..l {
        beta[[n - 1, j]] = chain.stop[j];
    }
    for i in (0..n - 1).rev() {
        for j in 0..l {
            let outgoing =
                (0..l).map(|k| chain.transitions[[j, k]] + emissions[[i + 1, k]] + beta[[i + 1, k]]);
            beta[[i, j]] = log_sum_exp(outgoing);
        }
    }
    beta
}

/// `log Z`: log of the summed exponentiated scores of all `L^n` labelings.
pub fn log_partition(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Result<f64> {
    check(emissions, chain)?;
    let alpha = forward(emissions, chain);
    let n = emissions.nrows();
    Ok(log_sum_exp(
        (0..chain.num_labels()).map(|j| alpha[[n - 1, j]] + chain.stop[j]),
    ))
}

/// `n × L` posterior marginals `P(y_i = t | x)`.
pub fn marginals(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Result<Array2<f64>> {
    Ok(ForwardBackward::new(emissions, chain)?.marginals())
}

/// Highest-scoring labeling and its score. At every comparison the lowest
/// label index wins ties.
pub fn viterbi(emissions: ArrayView2<'_, f64>, chain: &Chain) -> Result<(Vec<usize>, f64)> {
    check(emissions, chain)?;
    let (n, l) = emissions.dim();
    let mut delta: Vec<f64> = (0..l).map(|j| chain.start[j] + emissions[[0, j]]).collect();
    let mut backptr = vec![vec![0usize; l]; n];
    for i in 1..n {
        let mut next = vec![0.0; l];
        for j in 0..l {
            let (mut best_k, mut best) = (0, delta[0] + chain.transitions[[0, j]]);
            for (k, d) in delta.iter().enumerate().skip(1) {
                let s = d + chain.transitions[[k, j]];
                if s > best {
                    best = s;
                    best_k = k;
                }
            }
            backptr[i][j] = best_k;
            next[j] = best + emissions[[i, j]];
        }
        delta = next;
    }
    let (mut last, mut best) = (0, delta[0] + chain.stop[0]);
    for (j, d) in delta.iter().enumerate().skip(1) {
        let s = d + chain.stop[j];
        if s > best {
            best = s;
            last = j;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for i in (1..n).rev() {
        path[i - 1] = backptr[i][path[i]];
    }
    let score = score_sequence(emissions, chain, &path)?;
    Ok((path, score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_token_zero_model() {
        let chain = Chain::zeros(8);
        let em = Array2::zeros((1, 8));
        assert_eq!(score_sequence(em.view(), &chain, &[3]).unwrap(), 0.0);
        assert!((log_partition(em.view(), &chain).unwrap() - 8f64.ln()).abs() < 1e-12);
        let m = marginals(em.view(), &chain).unwrap();
        assert!(m.iter().all(|p| (p - 0.125).abs() < 1e-12));
    }

    #[test]
    fn only_transition_term_survives() {
        let mut chain = Chain::zeros(3);
        chain.transitions[[0, 2]] = 1.5;
        let em = Array2::zeros((2, 3));
        assert_eq!(score_sequence(em.view(), &chain, &[0, 2]).unwrap(), 1.5);
    }

    #[test]
    fn three_token_score_is_the_term_sum() {
        let mut chain = Chain::zeros(2);
        chain.transitions = array![[0.1, -0.7], [1.3, 0.4]];
        chain.start = array![0.25, -0.5];
        chain.stop = array![-1.0, 2.0];
        let em = array![[0.3, -0.2], [1.1, 0.9], [-0.6, 0.05]];
        let labels = [1, 0, 1];
        let by_hand = -0.5 + (-0.2) + 1.3 + 1.1 + (-0.7) + 0.05 + 2.0;
        assert!((score_sequence(em.view(), &chain, &labels).unwrap() - by_hand).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_partition_by_enumeration() {
        let mut chain = Chain::zeros(2);
        chain.transitions = array![[0.5, -1.0], [0.0, 2.0]];
        chain.start = array![0.1, 0.2];
        chain.stop = array![-0.3, 0.4];
        let em = array![[1.0, 0.0], [0.0, -1.0]];
        let paths = [[0, 0], [0, 1], [1, 0], [1, 1]];
        let z: f64 = paths
            .iter()
            .map(|p| score_sequence(em.view(), &chain, p).unwrap().exp())
            .sum();
        assert!((log_partition(em.view(), &chain).unwrap() - z.ln()).abs() < 1e-12);
    }

    #[test]
    fn shifting_a_row_shifts_log_z() {
        let mut chain = Chain::zeros(3);
        chain.transitions = array![[0.2, 0.1, -0.3], [0.0, 0.5, 0.7], [-1.0, 0.3, 0.2]];
        let em = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.0], [0.4, 0.4, -0.2]];
        let z = log_partition(em.view(), &chain).unwrap();
        let shifted = &em + 2.5;
        assert!((log_partition(shifted.view(), &chain).unwrap() - (z + 3.0 * 2.5)).abs() < 1e-10);
        let (path, _) = viterbi(em.view(), &chain).unwrap();
        let (path2, _) = viterbi(shifted.view(), &chain).unwrap();
        assert_eq!(path, path2);
        let m1 = marginals(em.view(), &chain).unwrap();
        let m2 = marginals(shifted.view(), &chain).unwrap();
        assert!(m1.iter().zip(m2.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn dominant_entries_decode_to_row_argmax() {
        let chain = Chain::zeros(4);
        let em = array![[0.0, 5.0, 0.0, 0.0], [0.0, 0.0, 0.0, 5.0], [5.0, 0.0, 0.0, 0.0]];
        assert_eq!(viterbi(em.view(), &chain).unwrap().0, [1, 3, 0]);
    }

    #[test]
    fn all_ties_pick_label_zero() {
        let chain = Chain::zeros(8);
        let em = Array2::zeros((5, 8));
        let (path, score) = viterbi(em.view(), &chain).unwrap();
        assert_eq!(path, [0; 5]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn long_sequences_do_not_underflow() {
        let chain = Chain::zeros(8);
        let em = Array2::from_shape_fn((5000, 8), |(i, j)| -50.0 - ((i * 7 + j) % 5) as f64);
        let z = log_partition(em.view(), &chain).unwrap();
        assert!(z.is_finite());
        let m = marginals(em.view(), &chain).unwrap();
        for row in m.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_inputs() {
        let chain = Chain::zeros(3);
        assert!(log_partition(Array2::zeros((0, 3)).view(), &chain).is_err());
        assert!(log_partition(array![[0.0, f64::INFINITY, 0.0]].view(), &chain).is_err());
        assert!(score_sequence(Array2::zeros((1, 3)).view(), &chain, &[3]).is_err());
        assert!(viterbi(Array2::zeros((2, 4)).view(), &chain).is_err());
    }
}
