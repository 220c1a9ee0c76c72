//! Stored draws of the cold chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatentState, ModelParams};

/// Bit vector packed least-significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedBits {
    len: usize,
    bytes: Vec<u8>,
}

impl PackedBits {
    pub fn from_bools(bits: &[bool]) -> Self {
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        Self {
            len: bits.len(),
            bytes,
        }
    }

    pub fn from_bytes(len: usize, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Dimension {
                expected: len.div_ceil(8),
                got: bytes.len(),
            });
        }
        Ok(Self { len, bytes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range");
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_latent(&self) -> LatentState {
        LatentState {
            ind: (0..self.len).map(|i| self.get(i)).collect(),
        }
    }
}

/// One stored state of the cold chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    /// Cycle (or iteration) number, starting at 1.
    pub cycle: u64,
    /// Joint log posterior of `(θ, I)`: complete log-likelihood plus log prior.
    pub log_post: f64,
    /// Observed-data log-likelihood of `θ`.
    pub log_lik: f64,
    pub params: ModelParams,
    pub latent: PackedBits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStore {
    pub draws: Vec<Draw>,
    /// Cycles up to and including this one are burn-in.
    pub burn_in: u64,
    pub total_cycles: u64,
    pub thin: u64,
}

impl TraceStore {
    pub fn new(draws: Vec<Draw>, burn_in: u64, total_cycles: u64, thin: u64) -> Self {
        Self {
            draws,
            burn_in,
            total_cycles,
            thin,
        }
    }

    /// Draws after burn-in.
    pub fn retained(&self) -> &[Draw] {
        let start = self.draws.partition_point(|d| d.cycle <= self.burn_in);
        &self.draws[start..]
    }

    /// Retained values of flattened parameter `j` in `(γ, λ, α₁, α₂, β…)` order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.retained()
            .iter()
            .map(|d| match j {
                0 => d.params.gamma,
                1 => d.params.lambda,
                2 => d.params.alpha1,
                3 => d.params.alpha2,
                _ => d.params.beta[j - 4],
            })
            .collect()
    }

    pub fn n_params(&self) -> Option<usize> {
        self.draws.first().map(|d| d.params.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_roundtrip() {
        let bits = [true, false, true, true, false, false, false, false, true, true];
        let p = PackedBits::from_bools(&bits);
        assert_eq!(p.as_bytes(), &[0b0000_1101, 0b0000_0011]);
        assert_eq!(p.to_latent().ind, bits.to_vec());
        assert!(PackedBits::from_bytes(10, vec![0]).is_err());
    }

    #[test]
    fn burn_in_is_by_cycle() {
        let draw = |cycle| Draw {
            cycle,
            log_post: 0.0,
            log_lik: 0.0,
            params: ModelParams::new(1.0, 1.0, 1.0, 1.0, vec![0.0]),
            latent: PackedBits::from_bools(&[]),
        };
        let t = TraceStore::new((1..=10).map(|c| draw(c * 10)).collect(), 30, 100, 10);
        assert_eq!(t.retained().len(), 7);
        assert_eq!(t.retained()[0].cycle, 40);
    }
}
