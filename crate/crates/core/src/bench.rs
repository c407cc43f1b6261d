//! Mining attempt statistics over randomized transaction payloads.
//!
//! Nonce attempts at difficulty d are geometric with success probability
//! 16^-d across independent payloads, so the observed mean at difficulty 2
//! sits near 256.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ledger::{mine_block, mine_genesis, LedgerError, Mempool, Transaction};
use crate::types::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct MiningStats {
    pub trials: u64,
    pub min_attempts: u64,
    pub max_attempts: u64,
    pub mean_attempts: f64,
    pub attempts: Vec<u64>,
}

/// Mines `trials` blocks of one random-payload transaction each and
/// reports the attempt counts.
pub fn mining_attempt_stats(
    difficulty: u32,
    trials: u64,
    seed: u64,
) -> Result<MiningStats, LedgerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genesis = mine_genesis(Vec::new(), 0, 0)?.block;
    let mut attempts = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut payload = vec![0u8; 32];
        rng.fill(payload.as_mut_slice());
        let mut pool = Mempool::new();
        pool.insert(Transaction::new(trial, NodeId(1), 1, payload));
        let mined = mine_block(&pool, &genesis, difficulty, 1, trial)?;
        attempts.push(mined.attempts);
    }
    let min_attempts = attempts.iter().copied().min().unwrap_or(0);
    let max_attempts = attempts.iter().copied().max().unwrap_or(0);
    let mean_attempts = if attempts.is_empty() {
        0.0
    } else {
        attempts.iter().sum::<u64>() as f64 / attempts.len() as f64
    };
    Ok(MiningStats {
        trials,
        min_attempts,
        max_attempts,
        mean_attempts,
        attempts,
    })
}
