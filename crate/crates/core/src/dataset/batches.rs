use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Shuffled index batches over `n` examples for one epoch. The order depends
/// only on `(seed, epoch)`; the final short batch is kept.
pub fn make_batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Precondition("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Shuffle, epoch));
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}
