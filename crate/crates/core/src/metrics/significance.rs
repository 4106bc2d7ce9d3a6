use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::bleu::BleuStats;
use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Both samples have zero variance and different means; the statistic
    /// is infinite and the p-value is reported as 0.
    pub degenerate: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided Welch t-test on per-dialogue scores.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TTest, MetricError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricError::TooFewSamples { needed: 2, found: a.len().min(b.len()) });
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if ma == mb {
        let df = if se2 > 0.0 { welch_df(sa, sb, na, nb) } else { na + nb - 2.0 };
        return Ok(TTest { t: 0.0, df, p_value: 1.0, degenerate: se2 == 0.0 });
    }
    if se2 == 0.0 {
        let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(TTest { t, df: na + nb - 2.0, p_value: 0.0, degenerate: true });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = welch_df(sa, sb, na, nb);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| MetricError::Stats(e.to_string()))?;
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, df, p_value, degenerate: false })
}

/// Welch-Satterthwaite degrees of freedom from the per-sample squared
/// standard errors.
fn welch_df(sa: f64, sb: f64, na: f64, nb: f64) -> f64 {
    (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTest {
    /// BLEU(a) - BLEU(b).
    pub observed: f64,
    pub trials: usize,
    pub p_value: f64,
}

pub const MIN_PERMUTATIONS: usize = 1000;

/// Paired approximate randomization test on corpus BLEU. Each trial swaps
/// the two systems' outputs for every unit (a dialogue when `groups` is
/// given, a turn otherwise) with probability 1/2. The p-value is
/// `(hits + 1) / (trials + 1)`, a hit being a trial whose absolute
/// difference is at least the observed one.
pub fn permutation_test_bleu(
    hyps_a: &[Vec<String>],
    hyps_b: &[Vec<String>],
    refs: &[Vec<String>],
    groups: Option<&[String]>,
    trials: usize,
    seed: u64,
) -> Result<PermutationTest, MetricError> {
    if hyps_a.len() != refs.len() || hyps_b.len() != refs.len() {
        return Err(MetricError::LengthMismatch { left: hyps_a.len().max(hyps_b.len()), right: refs.len() });
    }
    if refs.is_empty() {
        return Err(MetricError::Empty("corpus"));
    }
    if trials < MIN_PERMUTATIONS {
        return Err(MetricError::TooFewSamples { needed: MIN_PERMUTATIONS, found: trials });
    }
    // unit index per turn
    let unit: Vec<usize> = match groups {
        None => (0..refs.len()).collect(),
        Some(g) => {
            if g.len() != refs.len() {
                return Err(MetricError::LengthMismatch { left: g.len(), right: refs.len() });
            }
            let mut ids: Vec<&String> = Vec::new();
            g.iter()
                .map(|id| match ids.iter().position(|x| *x == id) {
                    Some(i) => i,
                    None => {
                        ids.push(id);
                        ids.len() - 1
                    }
                })
                .collect()
        }
    };
    let units = unit.iter().max().map_or(0, |m| m + 1);
    let sa: Vec<BleuStats> = hyps_a.iter().zip(refs).map(|(h, r)| BleuStats::new(h, r)).collect();
    let sb: Vec<BleuStats> = hyps_b.iter().zip(refs).map(|(h, r)| BleuStats::new(h, r)).collect();
    let diff = |swap: &[bool]| {
        let mut ta = BleuStats::default();
        let mut tb = BleuStats::default();
        for (i, &u) in unit.iter().enumerate() {
            let (x, y) = if swap[u] { (&sb[i], &sa[i]) } else { (&sa[i], &sb[i]) };
            ta.add(x);
            tb.add(y);
        }
        ta.score() - tb.score()
    };
    let observed = diff(&vec![false; units]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swap = vec![false; units];
    let mut hits = 0;
    for _ in 0..trials {
        for s in swap.iter_mut() {
            *s = rng.gen_bool(0.5);
        }
        if diff(&swap).abs() >= observed.abs() - 1e-9 {
            hits += 1;
        }
    }
    Ok(PermutationTest { observed, trials, p_value: (hits + 1) as f64 / (trials + 1) as f64 })
}

/// Paired permutation test on the difference of means of two per-dialogue
/// score vectors (sign flipping), with the same p-value convention as
/// [`permutation_test_bleu`].
pub fn paired_permutation_test(a: &[f64], b: &[f64], trials: usize, seed: u64) -> Result<PermutationTest, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(MetricError::Empty("scores"));
    }
    if trials < MIN_PERMUTATIONS {
        return Err(MetricError::TooFewSamples { needed: MIN_PERMUTATIONS, found: trials });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let observed = d.iter().sum::<f64>() / n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signs = vec![1.0; d.len()];
    let mut hits = 0;
    for _ in 0..trials {
        for s in signs.iter_mut() {
            *s = *[1.0, -1.0].choose(&mut rng).unwrap();
        }
        let m = d.iter().zip(&signs).map(|(x, s)| x * s).sum::<f64>() / n;
        if m.abs() >= observed.abs() - 1e-9 {
            hits += 1;
        }
    }
    Ok(PermutationTest { observed, trials, p_value: (hits + 1) as f64 / (trials + 1) as f64 })
}
