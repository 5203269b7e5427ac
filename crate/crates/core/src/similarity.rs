//! Self-attention similarity scoring over minibatches and the two-arm
//! similarity increment that drives the importance-sampling exponent β.
//!
//! For a batch of state-action rows `X`, `Q = X·W_Q` and `K` is a row
//! permutation of `Q`. The raw score is the summed projection of each `q_i`
//! onto its partner `k_i`, scaled by `1/√d_k`:
//!
//! ```text
//! score(X) = Σ_i (q_i · k_i) / |k_i| / √d_k
//! ```
//!
//! Running this on a prioritized batch and a uniform batch with the same
//! `W_Q` gives `I_p` and `I_t`; their difference `Δ = I_p − I_t` is mapped
//! into `[β0, 1]` by a running min-max normalizer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampling::Minibatch;

/// Fixed (never trained) query projection shared by both attention arms.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    input_dim: usize,
    d_k: usize,
    /// Row-major `input_dim × d_k`.
    w_q: Vec<f64>,
    pub shuffle_seed: u64,
}

impl AttentionParams {
    pub fn new(input_dim: usize, d_k: usize, w_q: Vec<f64>, shuffle_seed: u64) -> Result<Self> {
        if d_k == 0 {
            return Err(Error::config("attention_dim", "must be at least 1"));
        }
        if w_q.len() != input_dim * d_k {
            return Err(Error::DimensionMismatch {
                what: "attention projection",
                expected: input_dim * d_k,
                actual: w_q.len(),
            });
        }
        if w_q.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("attention projection", "entries must be finite"));
        }
        Ok(Self {
            input_dim,
            d_k,
            w_q,
            shuffle_seed,
        })
    }

    /// Entries uniform on `[-1/√input_dim, 1/√input_dim]`.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, d_k: usize, shuffle_seed: u64, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (input_dim.max(1) as f64).sqrt();
        let w_q = (0..input_dim * d_k)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self::new(input_dim, d_k, w_q, shuffle_seed)
    }

    pub fn identity(dim: usize, shuffle_seed: u64) -> Self {
        let mut w_q = vec![0.0; dim * dim];
        for i in 0..dim {
            w_q[i * dim + i] = 1.0;
        }
        Self {
            input_dim: dim,
            d_k: dim,
            w_q,
            shuffle_seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    pub fn project(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter()
            .map(|row| {
                if row.len() != self.input_dim {
                    return Err(Error::DimensionMismatch {
                        what: "attention input row",
                        expected: self.input_dim,
                        actual: row.len(),
                    });
                }
                let mut q = vec![0.0; self.d_k];
                for (i, &xi) in row.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let w = &self.w_q[i * self.d_k..(i + 1) * self.d_k];
                    for (qj, wj) in q.iter_mut().zip(w) {
                        *qj += xi * wj;
                    }
                }
                Ok(q)
            })
            .collect()
    }
}

/// `Σ_i (q_i · k_i) / |k_i|`; a zero-norm `k_i` contributes 0.
pub fn projection_score(q: &[Vec<f64>], k: &[Vec<f64>]) -> Result<f64> {
    if q.len() != k.len() {
        return Err(Error::DimensionMismatch {
            what: "key rows",
            expected: q.len(),
            actual: k.len(),
        });
    }
    let mut total = 0.0;
    for (qi, ki) in q.iter().zip(k) {
        if qi.len() != ki.len() {
            return Err(Error::DimensionMismatch {
                what: "key width",
                expected: qi.len(),
                actual: ki.len(),
            });
        }
        let norm = ki.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let dot: f64 = qi.iter().zip(ki).map(|(a, b)| a * b).sum();
            total += dot / norm;
        }
    }
    Ok(total)
}

/// Score of `x` with keys `K[i] = Q[permutation[i]]`.
pub fn batch_similarity_with(x: &[Vec<f64>], params: &AttentionParams, permutation: &[usize]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooFewRows(x.len()));
    }
    if permutation.len() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "permutation",
            expected: x.len(),
            actual: permutation.len(),
        });
    }
    let q = params.project(x)?;
    let k: Vec<Vec<f64>> = permutation.iter().map(|&j| q[j].clone()).collect();
    Ok(projection_score(&q, &k)? / (params.d_k as f64).sqrt())
}

/// Score of `x` under a fresh permutation drawn from `rng`.
pub fn batch_similarity<R: Rng + ?Sized>(x: &[Vec<f64>], params: &AttentionParams, rng: &mut R) -> Result<f64> {
    let mut permutation: Vec<usize> = (0..x.len()).collect();
    permutation.shuffle(rng);
    batch_similarity_with(x, params, &permutation)
}

/// Attention input rows: the state followed by a one-hot action.
pub fn state_action_rows(batch: &Minibatch, n_actions: usize) -> Vec<Vec<f64>> {
    batch
        .transitions
        .iter()
        .map(|t| {
            let mut row = Vec::with_capacity(t.state.len() + n_actions);
            row.extend_from_slice(&t.state);
            row.extend((0..n_actions).map(|a| if a == t.action { 1.0 } else { 0.0 }));
            row
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityIncrement {
    pub raw_ps: f64,
    pub raw_rus: f64,
    pub delta: f64,
}

/// Scores both arms with the same projection and independent permutations.
pub fn parallel_similarity<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    ps_rows: &[Vec<f64>],
    rus_rows: &[Vec<f64>],
    params: &AttentionParams,
    ps_rng: &mut R1,
    rus_rng: &mut R2,
) -> Result<SimilarityIncrement> {
    if ps_rows.len() != rus_rows.len() {
        return Err(Error::BatchMismatch {
            ps: ps_rows.len(),
            rus: rus_rows.len(),
        });
    }
    let raw_ps = batch_similarity(ps_rows, params, ps_rng)?;
    let raw_rus = batch_similarity(rus_rows, params, rus_rng)?;
    Ok(SimilarityIncrement {
        raw_ps,
        raw_rus,
        delta: raw_ps - raw_rus,
    })
}

/// Running min-max normalization of Δ onto `[β0, 1]`. Extrema are never
/// reset for the lifetime of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaFit {
    beta0: f64,
    lo: f64,
    hi: f64,
    observed: u64,
}

impl BetaFit {
    pub fn new(beta0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta0) {
            return Err(Error::config("beta0", format!("must lie in [0, 1), got {beta0}")));
        }
        Ok(Self {
            beta0,
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            observed: 0,
        })
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn extrema(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// β for `delta` against the current extrema, without recording it.
    pub fn beta_for(&self, delta: f64) -> f64 {
        let span = self.hi - self.lo;
        let normalized = if span > 0.0 { (delta - self.lo) / span } else { 0.0 };
        self.beta0 + (1.0 - self.beta0) * normalized.clamp(0.0, 1.0)
    }

    /// Records `delta` into the running extrema, then maps it to β.
    pub fn fit(&mut self, delta: f64) -> f64 {
        if delta.is_finite() {
            self.lo = self.lo.min(delta);
            self.hi = self.hi.max(delta);
            self.observed += 1;
        }
        self.beta_for(delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityReport {
    pub raw_ps: f64,
    pub raw_rus: f64,
    pub delta: f64,
    pub beta: f64,
    pub running_lo: f64,
    pub running_hi: f64,
}

/// Two attention arms sharing one projection, each with its own permutation
/// stream, feeding a single β normalizer.
#[derive(Debug, Clone)]
pub struct ParallelAttention {
    params: AttentionParams,
    ps_rng: ChaCha8Rng,
    rus_rng: ChaCha8Rng,
    fit: BetaFit,
    negative_deltas: u64,
}

impl ParallelAttention {
    pub fn new(params: AttentionParams, beta0: f64) -> Result<Self> {
        let mut ps_rng = ChaCha8Rng::seed_from_u64(params.shuffle_seed);
        ps_rng.set_stream(1);
        let mut rus_rng = ChaCha8Rng::seed_from_u64(params.shuffle_seed);
        rus_rng.set_stream(2);
        Ok(Self {
            params,
            ps_rng,
            rus_rng,
            fit: BetaFit::new(beta0)?,
            negative_deltas: 0,
        })
    }

    pub fn params(&self) -> &AttentionParams {
        &self.params
    }

    pub fn negative_deltas(&self) -> u64 {
        self.negative_deltas
    }

    pub fn report(&mut self, ps_rows: &[Vec<f64>], rus_rows: &[Vec<f64>]) -> Result<SimilarityReport> {
        let inc = parallel_similarity(ps_rows, rus_rows, &self.params, &mut self.ps_rng, &mut self.rus_rng)?;
        if inc.delta < 0.0 {
            self.negative_deltas += 1;
            log::trace!("negative similarity increment {}", inc.delta);
        }
        let beta = self.fit.fit(inc.delta);
        let (running_lo, running_hi) = self.fit.extrema();
        Ok(SimilarityReport {
            raw_ps: inc.raw_ps,
            raw_rus: inc.raw_rus,
            delta: inc.delta,
            beta,
            running_lo,
            running_hi,
        })
    }

    /// Single-arm variant: the score of one batch is normalized directly.
    pub fn single_arm(&mut self, rows: &[Vec<f64>]) -> Result<SimilarityReport> {
        let raw = batch_similarity(rows, &self.params, &mut self.rus_rng)?;
        let beta = self.fit.fit(raw);
        let (running_lo, running_hi) = self.fit.extrema();
        Ok(SimilarityReport {
            raw_ps: f64::NAN,
            raw_rus: raw,
            delta: raw,
            beta,
            running_lo,
            running_hi,
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn projection_examples() {
        let q = vec![vec![3.0, 4.0]];
        assert_eq!(projection_score(&q, &q).unwrap(), 5.0);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s], vec![-s, s]];
        let k: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        assert!((projection_score(&q, &k).unwrap() + 4.0).abs() < 1e-12);

        let q = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let k = vec![vec![0.0, 5.0], vec![3.0, 0.0]];
        assert_eq!(projection_score(&q, &k).unwrap(), 0.0);
    }

    #[test]
    fn zero_key_contributes_nothing() {
        let q = vec![vec![1.0, 1.0], vec![2.0, 0.0]];
        let k = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(projection_score(&q, &k).unwrap(), 2.0);
    }

    #[test]
    fn identical_rows_ignore_permutation() {
        let params = AttentionParams::identity(2, 0);
        let x = vec![vec![3.0, 4.0]; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let expected = 5.0 * 5.0 / 2f64.sqrt();
        for _ in 0..5 {
            assert!((batch_similarity(&x, &params, &mut rng).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_batch_scores_zero() {
        let params = AttentionParams::identity(3, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(batch_similarity(&vec![vec![0.0; 3]; 4], &params, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn swapped_orthonormal_rows_score_zero() {
        let params = AttentionParams::identity(2, 0);
        let x = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(batch_similarity_with(&x, &params, &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn single_row_rejected() {
        let params = AttentionParams::identity(2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            batch_similarity(&[vec![1.0, 0.0]], &params, &mut rng),
            Err(Error::TooFewRows(1))
        ));
    }

    #[test]
    fn same_batch_same_stream_gives_zero_delta() {
        let params = AttentionParams::identity(3, 0);
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 1.0, -(i as f64)]).collect();
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let inc = parallel_similarity(&x, &x, &params, &mut a, &mut b).unwrap();
        assert_eq!(inc.delta, 0.0);
    }

    #[test]
    fn identical_vs_orthogonal_batches() {
        let params = AttentionParams::identity(4, 0);
        let ps = vec![vec![1.0, 0.0, 0.0, 0.0]; 4];
        let rus: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        // any permutation of orthonormal rows scores at most the fixed points
        let derangement = [1, 2, 3, 0];
        let raw_ps = batch_similarity_with(&ps, &params, &[0, 1, 2, 3]).unwrap();
        let raw_rus = batch_similarity_with(&rus, &params, &derangement).unwrap();
        assert_eq!(raw_ps, 2.0);
        assert_eq!(raw_rus, 0.0);
        let mut a = ChaCha8Rng::seed_from_u64(0);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let inc = parallel_similarity(&ps, &rus, &params, &mut a, &mut b).unwrap();
        assert!(inc.delta > 0.0);
    }

    #[test]
    fn mismatched_arms_rejected() {
        let params = AttentionParams::identity(1, 0);
        let mut a = ChaCha8Rng::seed_from_u64(0);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let r = parallel_similarity(&vec![vec![1.0]; 3], &vec![vec![1.0]; 4], &params, &mut a, &mut b);
        assert!(matches!(r, Err(Error::BatchMismatch { ps: 3, rus: 4 })));
    }

    #[test]
    fn zero_state_arms_give_zero_delta() {
        let params = AttentionParams::identity(2, 0);
        let mut pa = ParallelAttention::new(params, 0.4).unwrap();
        let zeros = vec![vec![0.0; 2]; 8];
        let report = pa.report(&zeros, &zeros).unwrap();
        assert_eq!(report.delta, 0.0);
        assert_eq!(report.beta, 0.4);
    }

    #[test]
    fn fit_beta_examples() {
        let mut fit = BetaFit::new(0.4).unwrap();
        assert_eq!(fit.fit(2.0), 0.4);
        fit.fit(-1.0);
        fit.fit(3.0);
        assert_eq!(fit.beta_for(-1.0), 0.4);
        assert_eq!(fit.beta_for(3.0), 1.0);
        assert!((fit.beta_for(1.0) - 0.7).abs() < 1e-15);
        assert!(BetaFit::new(1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AttentionParams::new(2, 0, vec![], 0).is_err());
        assert!(AttentionParams::new(2, 2, vec![0.0; 3], 0).is_err());
        assert!(AttentionParams::new(1, 1, vec![f64::NAN], 0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = AttentionParams::random(4, 3, 0, &mut rng).unwrap();
        assert!(p.w_q.iter().all(|w| w.abs() <= 0.5));
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, cols), rows)
    }

    proptest! {
        #[test]
        fn self_projection_is_sum_of_norms(q in matrix(5, 3)) {
            let score = projection_score(&q, &q).unwrap();
            let norms: f64 = q.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
            prop_assert!((score - norms).abs() < 1e-9);
            prop_assert!(score >= 0.0);
        }

        #[test]
        fn simultaneous_row_permutation_is_invariant(
            x in matrix(6, 3),
            perm_seed in any::<u64>(),
            relabel_seed in any::<u64>(),
        ) {
            let params = AttentionParams::identity(3, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            let mut perm: Vec<usize> = (0..6).collect();
            perm.shuffle(&mut rng);
            let base = batch_similarity_with(&x, &params, &perm).unwrap();
            // relabel rows by σ; the pairing i -> perm[i] becomes σ⁻¹(i) -> σ⁻¹(perm[i])
            let mut sigma: Vec<usize> = (0..6).collect();
            sigma.shuffle(&mut ChaCha8Rng::seed_from_u64(relabel_seed));
            let mut inverse = vec![0; 6];
            for (new, &old) in sigma.iter().enumerate() {
                inverse[old] = new;
            }
            let y: Vec<Vec<f64>> = sigma.iter().map(|&old| x[old].clone()).collect();
            let perm_y: Vec<usize> = sigma.iter().map(|&old| inverse[perm[old]]).collect();
            let relabeled = batch_similarity_with(&y, &params, &perm_y).unwrap();
            prop_assert!((base - relabeled).abs() < 1e-9);
        }

        #[test]
        fn beta_stays_in_range_and_is_monotone(
            deltas in proptest::collection::vec(-10.0f64..10.0, 1..50),
            beta0 in 0.0f64..0.99,
            probe_a in -20.0f64..20.0,
            probe_b in -20.0f64..20.0,
        ) {
            let mut fit = BetaFit::new(beta0).unwrap();
            for d in deltas {
                let b = fit.fit(d);
                prop_assert!(b >= beta0 && b <= 1.0);
            }
            let (lo, hi) = if probe_a <= probe_b { (probe_a, probe_b) } else { (probe_b, probe_a) };
            prop_assert!(fit.beta_for(lo) <= fit.beta_for(hi));
        }
    }
}
