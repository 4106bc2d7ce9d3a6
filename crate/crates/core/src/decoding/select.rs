use rand::Rng;

use super::{DecodeError, ExpansionStrategy};
use crate::corpus::TokenId;

/// Token ids ordered by descending log-probability, ties by ascending id.
fn ranked(dist: &[f64]) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..dist.len() as TokenId).collect();
    ids.sort_by(|&a, &b| dist[b as usize].total_cmp(&dist[a as usize]).then(a.cmp(&b)));
    ids
}

/// The smallest probability-ranked prefix whose cumulative mass reaches `p`.
pub fn nucleus_pool(dist: &[f64], p: f64) -> Vec<TokenId> {
    let ids = ranked(dist);
    let mut cum = 0.0;
    for (i, &t) in ids.iter().enumerate() {
        cum += dist[t as usize].exp();
        if cum >= p - 1e-12 {
            return ids[..=i].to_vec();
        }
    }
    ids
}

/// Sequential draws without replacement, renormalizing after each draw.
fn sample_without_replacement<R: Rng>(dist: &[f64], pool: &[TokenId], n: usize, rng: &mut R) -> Vec<TokenId> {
    let mut pool: Vec<(TokenId, f64)> = pool.iter().map(|&t| (t, dist[t as usize].exp())).collect();
    let mut out = Vec::with_capacity(n.min(pool.len()));
    while out.len() < n && !pool.is_empty() {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let i = pick(&pool, total, rng);
        out.push(pool.remove(i).0);
    }
    out
}

fn pick<R: Rng>(pool: &[(TokenId, f64)], total: f64, rng: &mut R) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut cum = 0.0;
    for (i, (_, w)) in pool.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    pool.len() - 1
}

/// Chooses up to `k1` expansion tokens from a next-token distribution given
/// as log-probabilities.
pub fn select_candidates<R: Rng>(
    dist: &[f64],
    k1: usize,
    strategy: ExpansionStrategy,
    rng: &mut R,
) -> Result<Vec<TokenId>, DecodeError> {
    if k1 < 1 {
        return Err(DecodeError::Config("k1 must be at least 1".into()));
    }
    Ok(match strategy {
        ExpansionStrategy::TopKMax => ranked(dist).into_iter().take(k1).collect(),
        ExpansionStrategy::Nucleus(p) => {
            let pool = nucleus_pool(dist, p);
            sample_without_replacement(dist, &pool, k1, rng)
        }
        ExpansionStrategy::SampleWithoutReplacement => {
            let pool: Vec<TokenId> = (0..dist.len() as TokenId).collect();
            sample_without_replacement(dist, &pool, k1, rng)
        }
        ExpansionStrategy::TopKSample => {
            let pool: Vec<(TokenId, f64)> =
                ranked(dist).into_iter().take(k1).map(|t| (t, dist[t as usize].exp())).collect();
            let total: f64 = pool.iter().map(|(_, w)| w).sum();
            let mut out: Vec<TokenId> = Vec::with_capacity(k1);
            for _ in 0..k1 {
                let t = pool[pick(&pool, total, rng)].0;
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            out
        }
    })
}
