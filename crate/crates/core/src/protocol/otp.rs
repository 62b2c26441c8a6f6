use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::ChaCha8Rng;
use crate::{Error, Result};

/// A pre-shared pad. Each holder keeps its own copy; both copies advance in
/// step, and no bit is ever used twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneTimePadKey {
    key_bits: Vec<u8>,
    consumed_prefix: usize,
}

impl OneTimePadKey {
    pub fn new(key_bits: Vec<u8>) -> Result<Self> {
        if key_bits.iter().any(|&b| b > 1) {
            return Err(Error::param("key_bits", "entries must be 0 or 1"));
        }
        Ok(OneTimePadKey {
            key_bits,
            consumed_prefix: 0,
        })
    }

    pub fn random(len: usize, rng: &mut ChaCha8Rng) -> Self {
        OneTimePadKey {
            key_bits: (0..len).map(|_| rng.random::<bool>() as u8).collect(),
            consumed_prefix: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.key_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key_bits.is_empty()
    }

    pub fn consumed(&self) -> usize {
        self.consumed_prefix
    }

    pub fn remaining(&self) -> usize {
        self.key_bits.len() - self.consumed_prefix
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if n > self.remaining() {
            return Err(Error::OtpExhausted {
                needed: n,
                available: self.remaining(),
            });
        }
        let start = self.consumed_prefix;
        self.consumed_prefix += n;
        Ok(&self.key_bits[start..start + n])
    }
}

fn xor_with_pad(bits: &[u8], key: &mut OneTimePadKey) -> Result<Vec<u8>> {
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::param("bits", "entries must be 0 or 1"));
    }
    let pad = key.take(bits.len())?;
    Ok(bits.iter().zip(pad).map(|(b, k)| b ^ k).collect())
}

/// XORs `plaintext` with the next unused segment of `key`.
pub fn otp_encrypt(plaintext: &[u8], key: &mut OneTimePadKey) -> Result<Vec<u8>> {
    xor_with_pad(plaintext, key)
}

pub fn otp_decrypt(ciphertext: &[u8], key: &mut OneTimePadKey) -> Result<Vec<u8>> {
    xor_with_pad(ciphertext, key)
}
