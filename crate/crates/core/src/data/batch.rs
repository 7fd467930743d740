//! Mini-batch ordering.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::param::RngStream;

/// One epoch of index batches: a fresh shuffle of `0..n` cut into chunks of
/// `batch_size`; the last batch may be short.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut RngStream) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be positive"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Endless sequence of batches, reshuffling at every epoch boundary.
#[derive(Clone, Debug)]
pub struct BatchStream {
    n: usize,
    batch_size: usize,
    rng: RngStream,
    pending: std::vec::IntoIter<Vec<usize>>,
}

impl BatchStream {
    pub fn new(n: usize, batch_size: usize, rng: RngStream) -> Result<BatchStream> {
        if n == 0 {
            return Err(Error::Empty("cannot batch an empty training set".into()));
        }
        if batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(BatchStream { n, batch_size, rng, pending: Vec::new().into_iter() })
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if let Some(b) = self.pending.next() {
            return b;
        }
        self.pending = epoch_batches(self.n, self.batch_size, &mut self.rng)
            .expect("validated batch size")
            .into_iter();
        self.pending.next().expect("non-empty epoch")
    }
}
