//! Linear-chain CRF: sequence scoring, the forward algorithm, marginals for
//! the negative log-likelihood gradient, and Viterbi decoding.
//!
//! Emissions are `seq_len × num_labels`. Transition scores live on a
//! `(num_labels + 2)²` grid with virtual START (`num_labels`) and STOP
//! (`num_labels + 1`) states; masked-off cells score `-inf`.

use serde::{Deserialize, Serialize};

use super::tagset::TagSet;
use crate::error::{Error, Result};
use crate::nn::logsumexp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub num_labels: usize,
    pub scores: Vec<f64>,
    pub allowed: Vec<bool>,
}

impl Transitions {
    pub fn zeros(tagset: &TagSet) -> Transitions {
        let size = tagset.len() + 2;
        Transitions {
            num_labels: tagset.len(),
            scores: vec![0.0; size * size],
            allowed: tagset.allowed.clone(),
        }
    }

    pub fn new(tagset: &TagSet, scores: Vec<f64>) -> Result<Transitions> {
        let size = tagset.len() + 2;
        if scores.len() != size * size {
            return Err(Error::input(format!(
                "transition matrix needs {} entries, got {}",
                size * size,
                scores.len()
            )));
        }
        Ok(Transitions {
            num_labels: tagset.len(),
            scores,
            allowed: tagset.allowed.clone(),
        })
    }

    pub fn size(&self) -> usize {
        self.num_labels + 2
    }

    pub fn start(&self) -> usize {
        self.num_labels
    }

    pub fn stop(&self) -> usize {
        self.num_labels + 1
    }

    pub fn cell(&self, from: usize, to: usize) -> usize {
        from * self.size() + to
    }

    /// Transition score, `-inf` where the mask forbids it.
    pub fn get(&self, from: usize, to: usize) -> f64 {
        let c = self.cell(from, to);
        if self.allowed[c] {
            self.scores[c]
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn permits(&self, labels: &[usize]) -> bool {
        if labels.iter().any(|&l| l >= self.num_labels) {
            return false;
        }
        let mut prev = self.start();
        for &l in labels {
            if !self.allowed[self.cell(prev, l)] {
                return false;
            }
            prev = l;
        }
        self.allowed[self.cell(prev, self.stop())]
    }
}

fn check_shape(emissions: &[Vec<f64>], transitions: &Transitions) -> Result<()> {
    if let Some(row) = emissions.iter().find(|r| r.len() != transitions.num_labels) {
        return Err(Error::input(format!(
            "emission row has {} scores for {} labels",
            row.len(),
            transitions.num_labels
        )));
    }
    Ok(())
}

/// Total score of one label path, START and STOP transitions included.
pub fn sequence_score(emissions: &[Vec<f64>], transitions: &Transitions, labels: &[usize]) -> f64 {
    let mut prev = transitions.start();
    let mut total = 0.0;
    for (t, &l) in labels.iter().enumerate() {
        total += transitions.get(prev, l) + emissions[t][l];
        prev = l;
    }
    total + transitions.get(prev, transitions.stop())
}

fn forward(emissions: &[Vec<f64>], transitions: &Transitions) -> Vec<Vec<f64>> {
    let n = transitions.num_labels;
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(emissions.len());
    for (t, row) in emissions.iter().enumerate() {
        let next: Vec<f64> = (0..n)
            .map(|y| {
                let incoming = if t == 0 {
                    transitions.get(transitions.start(), y)
                } else {
                    logsumexp((0..n).map(|p| alpha[t - 1][p] + transitions.get(p, y)))
                };
                incoming + row[y]
            })
            .collect();
        alpha.push(next);
    }
    alpha
}

fn backward(emissions: &[Vec<f64>], transitions: &Transitions) -> Vec<Vec<f64>> {
    let n = transitions.num_labels;
    let len = emissions.len();
    let mut beta = vec![vec![0.0; n]; len];
    for t in (0..len).rev() {
        for y in 0..n {
            beta[t][y] = if t + 1 == len {
                transitions.get(y, transitions.stop())
            } else {
                logsumexp((0..n).map(|q| transitions.get(y, q) + emissions[t + 1][q] + beta[t + 1][q]))
            };
        }
    }
    beta
}

/// Log of the sum of exponentiated scores over every mask-respecting path.
pub fn log_partition(emissions: &[Vec<f64>], transitions: &Transitions) -> f64 {
    if emissions.is_empty() {
        return transitions.get(transitions.start(), transitions.stop());
    }
    let alpha = forward(emissions, transitions);
    let last = alpha.last().expect("non-empty");
    logsumexp((0..transitions.num_labels).map(|y| last[y] + transitions.get(y, transitions.stop())))
}

/// `score(gold) - log Z`; always `<= 0`.
pub fn crf_log_likelihood(emissions: &[Vec<f64>], transitions: &Transitions, gold: &[usize]) -> Result<f64> {
    check_shape(emissions, transitions)?;
    if gold.len() != emissions.len() {
        return Err(Error::input(format!(
            "gold has {} labels for {} positions",
            gold.len(),
            emissions.len()
        )));
    }
    if !transitions.permits(gold) {
        return Err(Error::input("gold label sequence violates the transition mask"));
    }
    Ok(sequence_score(emissions, transitions, gold) - log_partition(emissions, transitions))
}

/// Negative log-likelihood and its gradient with respect to emissions and
/// transition scores. Masked-off transition cells get zero gradient.
#[derive(Debug, Clone)]
pub struct CrfGradient {
    pub nll: f64,
    pub emissions: Vec<Vec<f64>>,
    pub transitions: Vec<f64>,
}

pub fn crf_nll_gradient(emissions: &[Vec<f64>], transitions: &Transitions, gold: &[usize]) -> Result<CrfGradient> {
    let ll = crf_log_likelihood(emissions, transitions, gold)?;
    let n = transitions.num_labels;
    let len = emissions.len();
    let mut d_trans = vec![0.0; transitions.scores.len()];
    let mut d_emit = vec![vec![0.0; n]; len];
    if len == 0 {
        return Ok(CrfGradient {
            nll: -ll,
            emissions: d_emit,
            transitions: d_trans,
        });
    }
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let log_z = log_partition(emissions, transitions);
    let (start, stop) = (transitions.start(), transitions.stop());

    for t in 0..len {
        for y in 0..n {
            d_emit[t][y] = (alpha[t][y] + beta[t][y] - log_z).exp();
        }
        d_emit[t][gold[t]] -= 1.0;
    }
    for y in 0..n {
        d_trans[transitions.cell(start, y)] += (transitions.get(start, y) + emissions[0][y] + beta[0][y] - log_z).exp();
        d_trans[transitions.cell(y, stop)] += (alpha[len - 1][y] + transitions.get(y, stop) - log_z).exp();
    }
    for t in 1..len {
        for p in 0..n {
            for y in 0..n {
                let w = alpha[t - 1][p] + transitions.get(p, y) + emissions[t][y] + beta[t][y] - log_z;
                d_trans[transitions.cell(p, y)] += w.exp();
            }
        }
    }
    let mut prev = start;
    for &l in gold {
        d_trans[transitions.cell(prev, l)] -= 1.0;
        prev = l;
    }
    d_trans[transitions.cell(prev, stop)] -= 1.0;
    for (g, ok) in d_trans.iter_mut().zip(&transitions.allowed) {
        if !ok {
            *g = 0.0;
        }
    }
    Ok(CrfGradient {
        nll: -ll,
        emissions: d_emit,
        transitions: d_trans,
    })
}

/// Highest-scoring mask-respecting label path. Ties at each backpointer and
/// at the final state resolve to the lowest label index.
#[allow(clippy::needless_range_loop)]
pub fn viterbi_decode(emissions: &[Vec<f64>], transitions: &Transitions) -> Result<Vec<usize>> {
    check_shape(emissions, transitions)?;
    if emissions.is_empty() {
        return Err(Error::input("cannot decode an empty sequence"));
    }
    let n = transitions.num_labels;
    let len = emissions.len();
    let mut score = vec![vec![f64::NEG_INFINITY; n]; len];
    let mut back = vec![vec![0usize; n]; len];
    for y in 0..n {
        score[0][y] = transitions.get(transitions.start(), y) + emissions[0][y];
    }
    for t in 1..len {
        for y in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for p in 0..n {
                let s = score[t - 1][p] + transitions.get(p, y);
                if s > best {
                    best = s;
                    arg = p;
                }
            }
            score[t][y] = best + emissions[t][y];
            back[t][y] = arg;
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = None;
    for y in 0..n {
        let s = score[len - 1][y] + transitions.get(y, transitions.stop());
        if s > best {
            best = s;
            last = Some(y);
        }
    }
    let Some(mut y) = last else {
        return Err(Error::input("no label sequence satisfies the transition mask"));
    };
    let mut path = vec![y; len];
    for t in (1..len).rev() {
        y = back[t][y];
        path[t - 1] = y;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every label sequence of the given length over `n` labels.
    fn all_paths(n: usize, len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..n).map(move |l| {
                        let mut q = p.clone();
                        q.push(l);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn single_position_with_symmetric_scores() {
        let t = Transitions::zeros(&TagSet::unconstrained(2));
        let ll = crf_log_likelihood(&[vec![0.3, 0.3]], &t, &[1]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_positions_match_enumeration() {
        // hand-set scores: emissions [[1, 0], [0.5, 2]], transitions
        // START->(0.1, -0.2), (0->0 0.3, 0->1 -0.4, 1->0 0.7, 1->1 0.0), ->STOP (0.2, -0.1)
        let set = TagSet::unconstrained(2);
        let mut t = Transitions::zeros(&set);
        let c = |t: &Transitions, a, b| t.cell(a, b);
        for (a, b, v) in [
            (2, 0, 0.1),
            (2, 1, -0.2),
            (0, 0, 0.3),
            (0, 1, -0.4),
            (1, 0, 0.7),
            (1, 1, 0.0),
            (0, 3, 0.2),
            (1, 3, -0.1),
        ] {
            let i = c(&t, a, b);
            t.scores[i] = v;
        }
        let e = vec![vec![1.0, 0.0], vec![0.5, 2.0]];
        // path scores by hand: [0,0]=0.1+1+0.3+0.5+0.2=2.1, [0,1]=0.1+1-0.4+2-0.1=2.6,
        // [1,0]=-0.2+0+0.7+0.5+0.2=1.2, [1,1]=-0.2+0+0+2-0.1=1.7
        let z = [2.1f64, 2.6, 1.2, 1.7].iter().map(|s| s.exp()).sum::<f64>().ln();
        let ll = crf_log_likelihood(&e, &t, &[0, 1]).unwrap();
        assert!((ll - (2.6 - z)).abs() < 1e-12);
        assert_eq!(viterbi_decode(&e, &t).unwrap(), vec![0, 1]);
    }

    #[test]
    fn likelihood_normalizes_over_masked_paths() {
        let set = TagSet::bio();
        let mut t = Transitions::zeros(&set);
        for (i, s) in t.scores.iter_mut().enumerate() {
            *s = ((i * 13 % 7) as f64 - 3.0) / 4.0;
        }
        let e: Vec<Vec<f64>> = (0..3)
            .map(|p| (0..5).map(|l| ((p * 5 + l) as f64 * 0.37).sin()).collect())
            .collect();
        let total: f64 = all_paths(5, 3)
            .into_iter()
            .filter(|p| t.permits(p))
            .map(|p| crf_log_likelihood(&e, &t, &p).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(crf_log_likelihood(&e, &t, &[0, 2, 0]).is_err());
    }

    #[test]
    fn viterbi_respects_mask() {
        let set = TagSet::bio();
        let t = Transitions::zeros(&set);
        // position 1 strongly prefers I-INT, position 0 prefers O
        let e = vec![vec![2.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 5.0, 0.0, 0.0]];
        let path = viterbi_decode(&e, &t).unwrap();
        assert!(t.permits(&path));
        // O -> I-INT is forbidden; the best legal path is B-INT I-INT (0+0+5=5) vs O O (2)
        assert_eq!(path, vec![1, 2]);
        assert_eq!(viterbi_decode(&[vec![3.0, 0.0, 0.0, 0.0, 0.0]], &t).unwrap(), vec![0]);
    }

    #[test]
    fn viterbi_ties_pick_lowest_labels() {
        let t = Transitions::zeros(&TagSet::unconstrained(3));
        let e = vec![vec![1.0, 1.0, 1.0]; 3];
        assert_eq!(viterbi_decode(&e, &t).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn shape_errors() {
        let t = Transitions::zeros(&TagSet::unconstrained(2));
        assert!(viterbi_decode(&[], &t).is_err());
        assert!(viterbi_decode(&[vec![1.0]], &t).is_err());
        assert!(crf_log_likelihood(&[vec![1.0, 0.0]], &t, &[0, 1]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let set = TagSet::bio();
        let mut t = Transitions::zeros(&set);
        for (i, s) in t.scores.iter_mut().enumerate() {
            *s = ((i * 7 % 5) as f64 - 2.0) / 3.0;
        }
        let e: Vec<Vec<f64>> = (0..4)
            .map(|p| (0..5).map(|l| ((p * 3 + l) as f64 * 0.91).cos()).collect())
            .collect();
        let gold = [1, 2, 0, 3];
        let g = crf_nll_gradient(&e, &t, &gold).unwrap();
        let h = 1e-6;
        for cell in 0..t.scores.len() {
            if !t.allowed[cell] {
                assert_eq!(g.transitions[cell], 0.0);
                continue;
            }
            let mut tp = t.clone();
            tp.scores[cell] += h;
            let mut tm = t.clone();
            tm.scores[cell] -= h;
            let num = (-crf_log_likelihood(&e, &tp, &gold).unwrap() + crf_log_likelihood(&e, &tm, &gold).unwrap())
                / (2.0 * h);
            assert!((num - g.transitions[cell]).abs() < 1e-6, "cell {cell}: {num} vs {}", g.transitions[cell]);
        }
        for pos in 0..4 {
            for l in 0..5 {
                let mut ep = e.clone();
                ep[pos][l] += h;
                let mut em = e.clone();
                em[pos][l] -= h;
                let num =
                    (-crf_log_likelihood(&ep, &t, &gold).unwrap() + crf_log_likelihood(&em, &t, &gold).unwrap()) / (2.0 * h);
                assert!((num - g.emissions[pos][l]).abs() < 1e-6);
            }
        }
    }
}
