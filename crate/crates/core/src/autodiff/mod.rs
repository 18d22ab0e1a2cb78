//! Dense tensors, a reverse-mode tape, Adam and dropout.

mod optim;
mod tape;
mod tensor;

pub use optim::{AdamConfig, AdamState};
pub use tape::{log_softmax_values, softmax_values, Gradients, Tape, Var};
pub use tensor::Tensor;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded generator that can be split into independent child streams.
#[derive(Clone, Debug)]
pub struct SeedRng {
    inner: ChaCha8Rng,
}

impl SeedRng {
    pub fn new(seed: u64) -> Self {
        SeedRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Child generator on its own stream; advances `self` by one draw.
    pub fn split(&mut self) -> SeedRng {
        let seed = self.inner.next_u64();
        SeedRng::new(seed)
    }
}

impl RngCore for SeedRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Inverted dropout: in training mode each entry is zeroed with
/// probability `p_drop` and survivors are scaled by `1/(1-p_drop)`.
/// Identity in eval mode.
pub fn dropout<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    p_drop: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::invalid(format!(
            "dropout probability {p_drop} outside [0, 1)"
        )));
    }
    if !training || p_drop == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p_drop);
    let n = tape.value(x).len();
    let mask = (0..n)
        .map(|_| if rng.gen::<f64>() < p_drop { 0.0 } else { keep })
        .collect();
    tape.mul_const(x, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropout_eval_and_zero_rate_are_identity() {
        let mut rng = SeedRng::new(1);
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
        assert_eq!(dropout(&mut t, x, 0.4, false, &mut rng).unwrap(), x);
        assert_eq!(dropout(&mut t, x, 0.0, true, &mut rng).unwrap(), x);
        assert!(dropout(&mut t, x, 1.0, true, &mut rng).is_err());
        assert!(dropout(&mut t, x, -0.1, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = SeedRng::new(7);
        let mut t = Tape::new();
        let x = t.constant(Tensor::filled(&[100_000], 1.0));
        let y = dropout(&mut t, x, 0.4, true, &mut rng).unwrap();
        let vals = t.value(y).data();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
        let zeros = vals.iter().filter(|&&v| v == 0.0).count() as f64 / vals.len() as f64;
        assert!((zeros - 0.4).abs() < 0.01);
    }

    #[test]
    fn split_streams_are_reproducible() {
        let mut a = SeedRng::new(3);
        let mut b = SeedRng::new(3);
        let (mut ca, mut cb) = (a.split(), b.split());
        assert_eq!(ca.next_u64(), cb.next_u64());
        assert_ne!(a.next_u64(), ca.next_u64());
    }
}
