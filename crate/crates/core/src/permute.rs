//! Keyed block permutations.
//!
//! Every (key, video, frame, block size) tuple gets its own permutation: an
//! 8-byte nonce is cut from SHA-256 of `"{video_id}|{frame_index}|{block_size}"`,
//! AES-128 in counter mode (nonce ∥ big-endian 64-bit counter) turns it into a
//! byte stream, and a descending Fisher–Yates shuffle consumes that stream as
//! big-endian 32-bit words with rejection sampling.
//!
//! The SHA-256 hash chain in [`HashChainStream`] is a non-canonical fallback:
//! it yields different permutations from the AES path and output built on it
//! must not be presented as the canonical dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const KEY_LEN: usize = 16;
pub const NONCE_LEN: usize = 8;
/// Maximum rejected words per Fisher–Yates draw.
pub const MAX_REJECTIONS: u32 = 1000;

pub type Nonce = [u8; NONCE_LEN];

/// Where the key came from. Recorded for audit; never affects output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyOrigin {
    CliFlag,
    EnvVar,
    KeyFile,
}

/// A 16-byte AES-128 key. `Debug` never prints the key bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    key: [u8; KEY_LEN],
    origin: KeyOrigin,
}

impl fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyMaterial")
            .field("origin", &self.origin)
            .finish_non_exhaustive()
    }
}

impl KeyMaterial {
    pub fn new(bytes: &[u8], origin: KeyOrigin) -> Result<Self> {
        let key: [u8; KEY_LEN] = bytes.try_into().map_err(|_| Error::KeyLength(bytes.len()))?;
        Ok(Self { key, origin })
    }

    /// Parses 32 hex characters (surrounding whitespace ignored).
    pub fn from_hex(s: &str, origin: KeyOrigin) -> Result<Self> {
        let s = s.trim();
        if s.len() != 2 * KEY_LEN {
            if s.len().is_multiple_of(2) && s.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(Error::KeyLength(s.len() / 2));
            }
            return Err(Error::KeyHex);
        }
        let mut key = [0u8; KEY_LEN];
        for (i, pair) in s.as_bytes().chunks(2).enumerate() {
            let hi = hex_val(pair[0]).ok_or(Error::KeyHex)?;
            let lo = hex_val(pair[1]).ok_or(Error::KeyHex)?;
            key[i] = hi << 4 | lo;
        }
        Ok(Self { key, origin })
    }

    pub fn bytes(&self) -> &[u8; KEY_LEN] {
        &self.key
    }

    pub fn origin(&self) -> KeyOrigin {
        self.origin
    }

    /// SHA-256 of the key bytes, lowercase hex. Safe to publish.
    pub fn fingerprint(&self) -> String {
        hex_lower(&Sha256::digest(self.key))
    }
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

pub(crate) fn hex_lower(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for &b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

/// First 8 bytes of SHA-256 over `"{video_id}|{frame_index}|{block_size}"`.
pub fn derive_nonce(video_id: &str, frame_index: u64, block_size: u32) -> Nonce {
    let preimage = format!("{video_id}|{frame_index}|{block_size}");
    let digest = Sha256::digest(preimage.as_bytes());
    let mut nonce = [0u8; NONCE_LEN];
    nonce.copy_from_slice(&digest[..NONCE_LEN]);
    nonce
}

/// An unbounded source of pseudorandom bytes.
pub trait ByteSource {
    fn fill(&mut self, out: &mut [u8]);

    fn next_u32_be(&mut self) -> u32 {
        let mut w = [0u8; 4];
        self.fill(&mut w);
        u32::from_be_bytes(w)
    }
}

impl<S: ByteSource + ?Sized> ByteSource for &mut S {
    fn fill(&mut self, out: &mut [u8]) {
        (**self).fill(out)
    }
}

/// AES-128-CTR keystream: block j is `AES_K(nonce ∥ be64(j))`, j from 0.
pub struct AesCtrStream {
    cipher: Aes128,
    nonce: Nonce,
    counter: u64,
    block: [u8; 16],
    pos: usize,
}

impl AesCtrStream {
    pub fn new(key: &KeyMaterial, nonce: Nonce) -> Self {
        Self {
            cipher: Aes128::new(key.bytes().into()),
            nonce,
            counter: 0,
            block: [0; 16],
            pos: 16,
        }
    }

    fn refill(&mut self) {
        let mut block = [0u8; 16];
        block[..8].copy_from_slice(&self.nonce);
        block[8..].copy_from_slice(&self.counter.to_be_bytes());
        let mut b = block.into();
        self.cipher.encrypt_block(&mut b);
        self.block = b.into();
        self.counter = self.counter.wrapping_add(1);
        self.pos = 0;
    }
}

impl ByteSource for AesCtrStream {
    fn fill(&mut self, out: &mut [u8]) {
        for byte in out {
            if self.pos == self.block.len() {
                self.refill();
            }
            *byte = self.block[self.pos];
            self.pos += 1;
        }
    }
}

/// The first `length` keystream bytes for `(key, nonce)`.
pub fn keystream(key: &KeyMaterial, nonce: Nonce, length: usize) -> Result<Vec<u8>> {
    if length == 0 {
        return Err(Error::Domain("keystream length must be at least 1"));
    }
    let mut out = alloc::vec![0u8; length];
    AesCtrStream::new(key, nonce).fill(&mut out);
    Ok(out)
}

/// Fallback byte source: block j is `SHA-256(key ∥ nonce ∥ be64(j))`.
pub struct HashChainStream {
    key: [u8; KEY_LEN],
    nonce: Nonce,
    counter: u64,
    block: [u8; 32],
    pos: usize,
}

impl HashChainStream {
    pub fn new(key: &KeyMaterial, nonce: Nonce) -> Self {
        Self {
            key: *key.bytes(),
            nonce,
            counter: 0,
            block: [0; 32],
            pos: 32,
        }
    }
}

impl ByteSource for HashChainStream {
    fn fill(&mut self, out: &mut [u8]) {
        for byte in out {
            if self.pos == self.block.len() {
                let mut h = Sha256::new();
                h.update(self.key);
                h.update(self.nonce);
                h.update(self.counter.to_be_bytes());
                self.block = h.finalize().into();
                self.counter = self.counter.wrapping_add(1);
                self.pos = 0;
            }
            *byte = self.block[self.pos];
            self.pos += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    #[default]
    AesCtr,
    CsprngFallback,
}

impl Generator {
    pub fn as_str(self) -> &'static str {
        match self {
            Generator::AesCtr => "aes_ctr",
            Generator::CsprngFallback => "csprng_fallback",
        }
    }

    pub fn is_canonical(self) -> bool {
        self == Generator::AesCtr
    }
}

/// A bijection on `0..n`: block `i` moves to slot `mapping[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPermutation {
    mapping: Vec<u32>,
    generator: Generator,
}

impl BlockPermutation {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn mapping(&self) -> &[u32] {
        &self.mapping
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    /// `inverse()[slot]` is the block that lands in `slot`.
    pub fn inverse(&self) -> Vec<u32> {
        let mut inv = alloc::vec![0u32; self.mapping.len()];
        for (i, &dst) in self.mapping.iter().enumerate() {
            inv[dst as usize] = i as u32;
        }
        inv
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i as u32 == m)
    }
}

/// Uniform draw from `0..bound` by rejecting words at or above the largest multiple of `bound`.
fn uniform_below<S: ByteSource>(source: &mut S, bound: u32) -> Result<u32> {
    let limit = (1u64 << 32) / bound as u64 * bound as u64;
    for _ in 0..=MAX_REJECTIONS {
        let w = source.next_u32_be();
        if (w as u64) < limit {
            return Ok(w % bound);
        }
    }
    Err(Error::RejectionLimit { bound })
}

fn fisher_yates<S: ByteSource>(n: usize, source: &mut S, generator: Generator) -> Result<BlockPermutation> {
    if n == 0 {
        return Err(Error::Domain("permutation size must be at least 1"));
    }
    if n > u32::MAX as usize {
        return Err(Error::Domain("permutation size exceeds u32"));
    }
    let mut mapping: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = uniform_below(source, i as u32 + 1)? as usize;
        mapping.swap(i, j);
    }
    Ok(BlockPermutation { mapping, generator })
}

/// Canonical shuffle of `0..n` driven by `stream`.
pub fn permutation_from_keystream<S: ByteSource>(n: usize, stream: &mut S) -> Result<BlockPermutation> {
    fisher_yates(n, stream, Generator::AesCtr)
}

/// Identifies one frame's permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSeed {
    pub video_id: String,
    pub frame_index: u64,
    pub block_size: u32,
}

impl PermutationSeed {
    pub fn new(video_id: impl Into<String>, frame_index: u64, block_size: u32) -> Result<Self> {
        if block_size < 2 {
            return Err(Error::Domain("block size must be at least 2"));
        }
        Ok(Self {
            video_id: video_id.into(),
            frame_index,
            block_size,
        })
    }

    pub fn nonce(&self) -> Nonce {
        derive_nonce(&self.video_id, self.frame_index, self.block_size)
    }
}

pub fn csprng_fallback_permutation(
    n: usize,
    seed: &PermutationSeed,
    key: &KeyMaterial,
) -> Result<BlockPermutation> {
    let mut stream = HashChainStream::new(key, seed.nonce());
    fisher_yates(n, &mut stream, Generator::CsprngFallback)
}

/// The permutation of `n` blocks for `seed` under `generator`.
pub fn block_permutation(
    key: &KeyMaterial,
    seed: &PermutationSeed,
    n: usize,
    generator: Generator,
) -> Result<BlockPermutation> {
    match generator {
        Generator::AesCtr => {
            let mut stream = AesCtrStream::new(key, seed.nonce());
            permutation_from_keystream(n, &mut stream)
        }
        Generator::CsprngFallback => csprng_fallback_permutation(n, seed, key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn seq_key() -> KeyMaterial {
        let k: Vec<u8> = (0u8..16).collect();
        KeyMaterial::new(&k, KeyOrigin::CliFlag).unwrap()
    }

    fn zero_key() -> KeyMaterial {
        KeyMaterial::new(&[0; 16], KeyOrigin::CliFlag).unwrap()
    }

    #[test]
    fn key_length_enforced() {
        assert_eq!(
            KeyMaterial::new(&[0; 15], KeyOrigin::KeyFile),
            Err(Error::KeyLength(15))
        );
        assert_eq!(
            KeyMaterial::from_hex("00", KeyOrigin::CliFlag),
            Err(Error::KeyLength(1))
        );
        assert_eq!(
            KeyMaterial::from_hex("zz0102030405060708090a0b0c0d0e0f", KeyOrigin::CliFlag),
            Err(Error::KeyHex)
        );
        let k = KeyMaterial::from_hex("000102030405060708090A0B0C0D0E0F\n", KeyOrigin::EnvVar).unwrap();
        assert_eq!(k, KeyMaterial::new(seq_key().bytes(), KeyOrigin::EnvVar).unwrap());
    }

    #[test]
    fn debug_redacts_key() {
        let k = KeyMaterial::new(&[0xab; 16], KeyOrigin::CliFlag).unwrap();
        let s = format!("{k:?}");
        assert!(!s.contains("171") && !s.contains("ab"), "{s}");
    }

    #[test]
    fn nonce_matches_sha256_of_preimage() {
        // Reference digest of "00001|0|8" computed with an independent SHA-256 tool.
        assert_eq!(hex::encode(derive_nonce("00001", 0, 8)), "46633a694a8952aa");
        assert_eq!(hex::encode(derive_nonce("00001", 1, 8)), "8a164d8b0ce47d31");
        assert_eq!(derive_nonce("00001", 0, 8), derive_nonce("00001", 0, 8));
        assert_ne!(derive_nonce("00001", 0, 8), derive_nonce("00001", 1, 8));
        assert_ne!(derive_nonce("00001", 0, 8), derive_nonce("00001", 0, 16));
    }

    #[test]
    fn keystream_known_answers() {
        let z = zero_key();
        assert_eq!(
            hex::encode(keystream(&z, [0; 8], 16).unwrap()),
            "66e94bd4ef8a2c3b884cfa59ca342b2e"
        );
        assert_eq!(keystream(&z, [0; 8], 1).unwrap(), vec![0x66]);
        let two = keystream(&z, [0; 8], 32).unwrap();
        // AES_0(0^8 ∥ be64(1)) from a reference implementation.
        assert_eq!(hex::encode(&two[16..]), "58e2fccefa7e3061367f1d57a4e7455a");
        assert_eq!(
            hex::encode(keystream(&seq_key(), derive_nonce("00001", 0, 8), 32).unwrap()),
            "274d713f0bceeb2d474e55876513cdce218c29ced7548c759a4cd7f91e9aeeca"
        );
        assert!(keystream(&z, [0; 8], 0).is_err());
    }

    #[test]
    fn fisher_yates_hand_trace() {
        // Zero key, zero nonce. Words: 0x66e94bd4, 0xef8a2c3b, 0x884cfa59.
        // i=3: 0x66e94bd4 % 4 = 0 -> swap(3,0) -> [3,1,2,0]
        // i=2: 0xef8a2c3b < 4294967295, % 3 = 0 -> swap(2,0) -> [2,1,3,0]
        // i=1: 0x884cfa59 % 2 = 1 -> no swap
        let mut s = AesCtrStream::new(&zero_key(), [0; 8]);
        let p = permutation_from_keystream(4, &mut s).unwrap();
        assert_eq!(p.mapping(), &[2, 1, 3, 0]);
    }

    #[test]
    fn frozen_permutations() {
        // Values from an independent Python implementation of the same scheme.
        let key = seq_key();
        let s0 = PermutationSeed::new("00001", 0, 8).unwrap();
        let s1 = PermutationSeed::new("00001", 1, 8).unwrap();
        let p = |seed: &PermutationSeed, n, g| block_permutation(&key, seed, n, g).unwrap();
        assert_eq!(p(&s0, 4, Generator::AesCtr).mapping(), &[0, 1, 2, 3]);
        assert_eq!(p(&s1, 4, Generator::AesCtr).mapping(), &[3, 2, 1, 0]);
        assert_eq!(p(&s0, 4, Generator::CsprngFallback).mapping(), &[1, 3, 0, 2]);
        assert_eq!(
            p(&s0, 16, Generator::AesCtr).mapping(),
            &[4, 8, 11, 14, 5, 0, 7, 1, 10, 13, 3, 6, 12, 9, 2, 15]
        );
        assert_eq!(
            p(&s0, 16, Generator::CsprngFallback).mapping(),
            &[6, 4, 2, 15, 8, 11, 12, 7, 3, 13, 5, 1, 0, 10, 9, 14]
        );
    }

    #[test]
    fn singleton_and_generator_flags() {
        let key = seq_key();
        let seed = PermutationSeed::new("x", 3, 4).unwrap();
        for g in [Generator::AesCtr, Generator::CsprngFallback] {
            let p = block_permutation(&key, &seed, 1, g).unwrap();
            assert_eq!(p.mapping(), &[0]);
            assert_eq!(p.generator(), g);
        }
        let a = block_permutation(&key, &seed, 64, Generator::CsprngFallback).unwrap();
        let b = block_permutation(&key, &seed, 64, Generator::CsprngFallback).unwrap();
        assert_eq!(a, b);
        assert!(!Generator::CsprngFallback.is_canonical());
        assert!(block_permutation(&key, &seed, 0, Generator::AesCtr).is_err());
        assert!(PermutationSeed::new("x", 0, 1).is_err());
    }

    struct Constant(u8);
    impl ByteSource for Constant {
        fn fill(&mut self, out: &mut [u8]) {
            out.fill(self.0)
        }
    }

    #[test]
    fn rejection_cap_is_reported() {
        // 0xffffffff is always rejected for bound 3.
        let err = permutation_from_keystream(3, &mut Constant(0xff)).unwrap_err();
        assert_eq!(err, Error::RejectionLimit { bound: 3 });
    }

    #[test]
    fn inverse_composes_to_identity() {
        let p = block_permutation(&seq_key(), &PermutationSeed::new("v", 0, 8).unwrap(), 100, Generator::AesCtr)
            .unwrap();
        let inv = p.inverse();
        for i in 0..100u32 {
            assert_eq!(inv[p.mapping()[i as usize] as usize], i);
        }
    }

    #[test]
    fn n4_is_uniform() {
        // 100_000 permutations of 4 blocks; each of the 24 must land within 5 sigma of 1/24.
        let key = seq_key();
        let mut counts = [0u32; 24];
        let trials = 100_000u32;
        for t in 0..trials {
            let seed = PermutationSeed::new("u", t as u64, 8).unwrap();
            let p = block_permutation(&key, &seed, 4, Generator::AesCtr).unwrap();
            let m = p.mapping();
            // Lehmer code as index.
            let mut idx = 0usize;
            for i in 0..4 {
                let smaller = (i + 1..4).filter(|&j| m[j] < m[i]).count();
                idx = idx * (4 - i) + smaller;
            }
            counts[idx] += 1;
        }
        let p = 1.0 / 24.0;
        let mean = trials as f64 * p;
        let sd = libm::sqrt(trials as f64 * p * (1.0 - p));
        for c in counts {
            assert!(libm::fabs(c as f64 - mean) <= 5.0 * sd, "count {c} vs {mean}±{sd}");
        }
    }

    proptest! {
        #[test]
        fn always_a_bijection(
            n in 1usize..=10_000,
            key in proptest::array::uniform16(any::<u8>()),
            frame in any::<u32>(),
            b in 2u32..=32,
            fallback in any::<bool>(),
        ) {
            let key = KeyMaterial::new(&key, KeyOrigin::CliFlag).unwrap();
            let seed = PermutationSeed::new("vid", frame as u64, b).unwrap();
            let g = if fallback { Generator::CsprngFallback } else { Generator::AesCtr };
            let p = block_permutation(&key, &seed, n, g).unwrap();
            let mut sorted = p.mapping().to_vec();
            sorted.sort_unstable();
            prop_assert!(sorted.iter().enumerate().all(|(i, &v)| i as u32 == v));
        }
    }
}
