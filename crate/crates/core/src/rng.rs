//! Counter-based random numbers: Philox4x32-10 (Salmon et al., SC'11).
//!
//! A stream is addressed by `(seed, path)`; its `k`-th block of four words is
//! `philox(key = seed, counter = [k_lo, k_hi, path_lo, path_hi])`. Any path
//! can therefore be regenerated independently of every other, which is what
//! makes Monte Carlo output independent of how paths are split across threads.

use rand_core::RngCore;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;
const ROUNDS: usize = 10;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with 10 rounds.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..ROUNDS {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Philox blocks generated per refill.
const LANES: usize = 4;
const BUFFER: usize = 4 * LANES;

/// The random stream of one Monte Carlo path.
///
/// Words are served in counter order; `next_u64` joins two consecutive words
/// low first.
#[derive(Debug, Clone)]
pub struct PathStream {
    key: [u32; 2],
    path: u64,
    block: u64,
    buffer: [u32; BUFFER],
    used: usize,
}

impl PathStream {
    pub fn new(seed: u64, path: u64) -> Self {
        PathStream {
            key: [seed as u32, (seed >> 32) as u32],
            path,
            block: 0,
            buffer: [0; BUFFER],
            used: BUFFER,
        }
    }

    #[inline]
    fn refill(&mut self) {
        let (lo, hi) = (self.path as u32, (self.path >> 32) as u32);
        let counter = |block: u64| [block as u32, (block >> 32) as u32, lo, hi];
        for l in 0..LANES {
            let words = philox4x32(counter(self.block + l as u64), self.key);
            self.buffer[4 * l..4 * l + 4].copy_from_slice(&words);
        }
        self.block += LANES as u64;
        self.used = 0;
    }
}

impl RngCore for PathStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.used >= BUFFER {
            self.refill();
        }
        let v = self.buffer[self.used];
        self.used += 1;
        v
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        if self.used + 2 <= BUFFER {
            let lo = u64::from(self.buffer[self.used]);
            let hi = u64::from(self.buffer[self.used + 1]);
            self.used += 2;
            (hi << 32) | lo
        } else {
            let lo = u64::from(self.next_u32());
            let hi = u64::from(self.next_u32());
            (hi << 32) | lo
        }
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let bytes = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_answers() {
        assert_eq!(
            philox4x32([0; 4], [0; 2]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn stream_walks_the_counter() {
        let key = [0xdead_beef, 0x0123_4567];
        let mut stream = PathStream::new(0x0123_4567_dead_beef, 5);
        for block in 0..9u32 {
            let expected = philox4x32([block, 0, 5, 0], key);
            for word in expected {
                assert_eq!(stream.next_u32(), word);
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = PathStream::new(7, 3);
        let mut b = PathStream::new(7, 3);
        let mut c = PathStream::new(7, 4);
        let xs: Vec<u64> = (0..10).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..10).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..10).map(|_| c.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn fill_bytes_matches_words() {
        let mut a = PathStream::new(1, 0);
        let mut b = PathStream::new(1, 0);
        let mut bytes = [0u8; 6];
        a.fill_bytes(&mut bytes);
        assert_eq!(bytes[..4], b.next_u32().to_le_bytes());
        assert_eq!(bytes[4..], b.next_u32().to_le_bytes()[..2]);
    }
}
