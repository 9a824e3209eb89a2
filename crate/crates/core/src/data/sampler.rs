use super::{Batch, Dataset};
use crate::numkit::SeededRng;
use crate::{Error, Result};

/// Minibatch index stream without replacement within an epoch.
///
/// The stream is the concatenation of independent random permutations of
/// `0..n`, cut into consecutive chunks of `batch_size`; a batch may straddle
/// an epoch boundary. Indices are sorted inside each batch, so a full-batch
/// sampler yields the same batch for every seed.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    rng: SeededRng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(Error::Config(format!(
                "batch size {batch_size} must be in 1..={n}"
            )));
        }
        Ok(Self {
            n,
            batch_size,
            rng: SeededRng::new(seed),
            order: Vec::new(),
            cursor: 0,
            epoch: 0,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Epochs started so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            if self.cursor == self.order.len() {
                self.order = (0..self.n).collect();
                self.rng.shuffle(&mut self.order);
                self.cursor = 0;
                self.epoch += 1;
            }
            let take = (self.batch_size - out.len()).min(self.order.len() - self.cursor);
            out.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        out.sort_unstable();
        out
    }

    pub fn next_batch(&mut self, ds: &Dataset) -> Result<Batch> {
        if ds.len() != self.n {
            return Err(Error::Shape(format!(
                "sampler built for {} examples used on {}",
                self.n,
                ds.len()
            )));
        }
        let idx = self.next_indices();
        ds.select(&idx)
    }
}

/// Next batch from `sampler` over `ds`.
pub fn sample_batch(ds: &Dataset, sampler: &mut BatchSampler) -> Result<Batch> {
    sampler.next_batch(ds)
}
