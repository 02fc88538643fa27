//! Deterministic file content.
//!
//! File bodies are never stored: each file is a counter-mode pseudorandom
//! byte stream keyed by its 64-bit content seed. The dataset materializer
//! writes this stream to disk and the transfer engine hashes the same
//! stream, so integrity digests agree across modules without keeping data.

use sha2::{Digest, Sha256};

use crate::rng::mix;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Counter-mode byte stream: block `i` is the SplitMix64 output for
/// counter `i` under `seed`, emitted little-endian.
#[derive(Debug, Clone)]
pub struct ContentStream {
    seed: u64,
    block: u64,
    buf: [u8; 8],
    pos: usize,
}

impl ContentStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            block: 0,
            buf: [0; 8],
            pos: 8,
        }
    }

    fn refill(&mut self) {
        let word = mix(self.seed.wrapping_add((self.block + 1).wrapping_mul(GOLDEN)));
        self.buf = word.to_le_bytes();
        self.block += 1;
        self.pos = 0;
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for byte in out.iter_mut() {
            if self.pos == 8 {
                self.refill();
            }
            *byte = self.buf[self.pos];
            self.pos += 1;
        }
    }
}

/// SHA-256 of the first `len` bytes of the stream keyed by `seed`.
pub fn stream_digest(seed: u64, len: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    let mut stream = ContentStream::new(seed);
    let mut buf = [0u8; 64 * 1024];
    let mut remaining = len;
    while remaining > 0 {
        let take = remaining.min(buf.len() as u64) as usize;
        stream.fill(&mut buf[..take]);
        hasher.update(&buf[..take]);
        remaining -= take as u64;
    }
    hasher.finalize().into()
}

pub fn digest_hex(digest: &[u8; 32]) -> String {
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
