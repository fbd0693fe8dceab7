//! Occupancy configurations on the discrete torus.
//!
//! Public methods take 1-based sites and reduce them cyclically, so site `n + 1`
//! is site `1` and site `0` is site `n`. Hot loops use the 0-based `bit` family.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Bit-packed configuration on the torus of `n` sites.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    n: usize,
    words: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        assert!(n > 0, "torus size must be positive");
        Configuration {
            n,
            words: vec![0; n.div_ceil(WORD)],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut cfg = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            cfg.set_bit(i, b != 0);
        }
        cfg
    }

    /// Configuration whose site `i + 1` holds bit `i` of `index` (n ≤ 64).
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 64);
        let mut cfg = Self::empty(n);
        cfg.words[0] = if n == 64 {
            index
        } else {
            index & ((1u64 << n) - 1)
        };
        cfg
    }

    /// Inverse of [`Configuration::from_index`].
    pub fn index(&self) -> u64 {
        assert!(self.n <= 64);
        self.words[0]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % WORD);
        if v {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    /// 0-based index of the 1-based cyclic site `x`.
    #[inline]
    pub fn wrap(&self, x: i64) -> usize {
        (x - 1).rem_euclid(self.n as i64) as usize
    }

    /// Occupation of the 1-based cyclic site `x`.
    #[inline]
    pub fn get(&self, x: i64) -> u8 {
        self.bit(self.wrap(x)) as u8
    }

    pub fn set(&mut self, x: i64, v: u8) {
        let i = self.wrap(x);
        self.set_bit(i, v != 0);
    }

    /// Bits of the 0-based sites `i-2, ..., i+2`, site `i-2` in the lowest bit.
    #[inline]
    pub fn window5(&self, i: usize) -> u8 {
        let n = self.n;
        if i >= 2 && i + 2 < n && (i - 2) / WORD == (i + 2) / WORD {
            return ((self.words[i / WORD] >> ((i - 2) % WORD)) & 0x1f) as u8;
        }
        let mut w = 0u8;
        for k in 0..5 {
            let j = (i + n * 2 + k - 2) % n;
            w |= (self.bit(j) as u8) << k;
        }
        w
    }

    pub fn particle_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Exchange the 0-based sites `i` and `i+1 (mod n)` in place.
    #[inline]
    pub fn swap_raw(&mut self, i: usize) {
        let j = if i + 1 == self.n { 0 } else { i + 1 };
        let (a, b) = (self.bit(i), self.bit(j));
        if a != b {
            self.set_bit(i, b);
            self.set_bit(j, a);
        }
    }

    /// The configuration with the states of `x` and `x + 1` exchanged.
    pub fn swap_bond(&self, x: i64) -> Configuration {
        let mut out = self.clone();
        out.swap_raw(self.wrap(x));
        out
    }

    /// The configuration with the states of two arbitrary sites exchanged.
    pub fn swap_sites(&self, y: i64, z: i64) -> Configuration {
        let mut out = self.clone();
        let (a, b) = (self.get(y), self.get(z));
        out.set(y, b);
        out.set(z, a);
        out
    }

    /// Translation `(τ_y η)_x = η_{x+y}`.
    pub fn translate(&self, y: i64) -> Configuration {
        let mut out = Self::empty(self.n);
        for x in 1..=self.n as i64 {
            out.set(x, self.get(x + y));
        }
        out
    }

    /// Number of occupied nearest-neighbour pairs, wrap pair included.
    pub fn hamiltonian(&self) -> u64 {
        let n = self.n;
        (0..n)
            .filter(|&i| self.bit(i) && self.bit((i + 1) % n))
            .count() as u64
    }

    /// Centred average over the `⌊L⌋` sites strictly left or right of `x`.
    pub fn block_average(&self, x: i64, l: f64, side: Side, rho_bar: f64) -> Result<f64> {
        if l.is_nan() || l < 1.0 {
            return Err(Error::Domain(format!("block length {l} below 1")));
        }
        let len = l.floor() as usize;
        if len > self.n {
            return Err(Error::Domain(format!(
                "block length {len} exceeds n = {}",
                self.n
            )));
        }
        let sum: u64 = (1..=len as i64)
            .map(|k| match side {
                Side::Left => self.get(x - k),
                Side::Right => self.get(x + k),
            } as u64)
            .sum();
        Ok(sum as f64 / len as f64 - rho_bar)
    }

    /// Mobile-cluster term contributed by the pair anchored at `y` inside the box of
    /// size `l` right of `x` (`y` ranges over `x, ..., x + l - 1`).
    fn cluster_term(&self, x: i64, l: usize, y: i64) -> u8 {
        let last = x + l as i64 - 1;
        let here = self.get(y);
        if y < last {
            here * (self.get(y + 1) | self.get(y + 2))
        } else {
            here * self.get(y + 1)
        }
    }

    /// Whether the box of size `l` right of `x` holds two particles at distance ≤ 2.
    pub fn is_good_box(&self, x: i64, l: usize) -> bool {
        self.first_mobile_cluster(x, l).is_some()
    }

    /// Leftmost anchor of a mobile cluster among the terms defining a good box,
    /// reduced to `1..=n`; `None` exactly when the box is bad.
    pub fn first_mobile_cluster(&self, x: i64, l0: usize) -> Option<i64> {
        (x..x + l0 as i64)
            .find(|&y| self.cluster_term(x, l0, y) > 0)
            .map(|y| self.wrap(y) as i64 + 1)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.n).map(|i| self.bit(i) as u8).collect()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidParameter(format!(
                    "bad occupancy character {c:?}"
                ))),
            })
            .collect::<Result<_>>()?;
        if bits.is_empty() {
            return Err(Error::InvalidParameter("empty configuration".into()));
        }
        Ok(Self::from_bits(&bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn swap_examples() {
        assert_eq!(cfg("0110").swap_bond(1), cfg("1010"));
        assert_eq!(cfg("1000").swap_bond(4), cfg("0001"));
        assert_eq!(cfg("0110").swap_bond(2), cfg("0110"));
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(cfg("11111").hamiltonian(), 5);
        assert_eq!(cfg("10101").hamiltonian(), 1);
        assert_eq!(cfg("0000").hamiltonian(), 0);
    }

    #[test]
    fn block_average_examples() {
        let e = Configuration::empty(9);
        for x in 1..=9 {
            for l in [1.0, 2.5, 4.0] {
                assert_eq!(e.block_average(x, l, Side::Left, 0.5).unwrap(), -0.5);
            }
        }
        let c = cfg("0100110");
        assert_eq!(c.block_average(1, 1.0, Side::Right, 0.25).unwrap(), 0.75);
        assert_eq!(c.block_average(1, 1.9, Side::Left, 0.0).unwrap(), 0.0);
        assert!(c.block_average(1, 0.5, Side::Left, 0.0).is_err());
    }

    #[test]
    fn window_reads_across_words() {
        let bits: Vec<u8> = (0..150).map(|i| ((i * 7 + i / 3) % 5 < 2) as u8).collect();
        let c = Configuration::from_bits(&bits);
        for i in 0..150 {
            let mut w = 0u8;
            for k in 0..5 {
                w |= bits[(i + 150 + k - 2) % 150] << k;
            }
            assert_eq!(c.window5(i), w, "site {i}");
        }
    }

    #[test]
    fn good_box_examples() {
        // pair at distance 2 inside the window
        assert!(cfg("0001010000").is_good_box(2, 5));
        assert!(!cfg("1001001001").is_good_box(1, 9));
        assert!(!Configuration::empty(10).is_good_box(1, 9));
        // the anchor at x itself counts, the last site pairs only with its neighbour
        assert!(cfg("1100000000").is_good_box(1, 3));
        assert!(!cfg("0001010000").is_good_box(1, 3));
        assert!(cfg("0011000000").is_good_box(1, 3));
    }

    fn naive_good(c: &Configuration, x: i64, l: i64) -> bool {
        let mut s = 0;
        for y in x..=x + l - 2 {
            s += c.get(y) * (c.get(y + 1) + c.get(y + 2));
        }
        s += c.get(x + l - 1) * c.get(x + l);
        s > 0
    }

    #[test]
    fn first_cluster_matches_scan_on_all_short_windows() {
        for n in 3..=12usize {
            for idx in 0..(1u64 << n) {
                let c = Configuration::from_index(n, idx);
                for l in 1..n {
                    let got = c.first_mobile_cluster(1, l);
                    assert_eq!(got.is_some(), naive_good(&c, 1, l as i64));
                    if let Some(y) = got {
                        let off = (y - 1).rem_euclid(n as i64);
                        assert!(off < l as i64);
                        assert!(
                            c.get(y) == 1
                                && (c.get(y + 1) == 1 || (off + 1 < l as i64 && c.get(y + 2) == 1))
                        );
                        for earlier in 1..=off {
                            assert_eq!(c.cluster_term(1, l, earlier), 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn good_box_grows_with_window() {
        for n in 4..=10usize {
            for idx in 0..(1u64 << n) {
                let c = Configuration::from_index(n, idx);
                for l in 1..n - 1 {
                    if c.is_good_box(1, l) {
                        assert!(c.is_good_box(1, l + 1));
                    }
                }
            }
        }
    }

    fn arb_cfg() -> impl Strategy<Value = Configuration> {
        prop::collection::vec(0u8..2, 3..200).prop_map(|b| Configuration::from_bits(&b))
    }

    proptest! {
        #[test]
        fn swap_is_involution_and_conserves(c in arb_cfg(), x in -300i64..300) {
            let s = c.swap_bond(x);
            prop_assert_eq!(s.swap_bond(x), c.clone());
            prop_assert_eq!(s.particle_count(), c.particle_count());
        }

        #[test]
        fn swap_changes_energy_locally(c in arb_cfg(), x in 1i64..200) {
            let s = c.swap_bond(x);
            let d = (c.get(x) as i64 - c.get(x + 1) as i64) * (c.get(x + 2) as i64 - c.get(x - 1) as i64);
            if c.n() >= 4 {
                prop_assert_eq!(s.hamiltonian() as i64 - c.hamiltonian() as i64, d);
            }
        }

        #[test]
        fn block_average_matches_loop(c in arb_cfg(), x in 1i64..200, l in 1.0f64..3.99, rho in 0.0f64..1.0) {
            let l = l.min(c.n() as f64);
            let len = l.floor() as i64;
            let n = c.n() as i64;
            let bits = c.to_bits();
            let mut right = 0.0;
            let mut left = 0.0;
            for k in 1..=len {
                right += bits[((x - 1 + k).rem_euclid(n)) as usize] as f64 - rho;
                left += bits[((x - 1 - k).rem_euclid(n)) as usize] as f64 - rho;
            }
            let r = c.block_average(x, l, Side::Right, rho).unwrap();
            prop_assert!((r - right / len as f64).abs() <= 1e-15);
            let lft = c.block_average(x, l, Side::Left, rho).unwrap();
            prop_assert!((lft - left / len as f64).abs() <= 1e-15);
        }

        #[test]
        fn translation_shifts(c in arb_cfg(), y in -50i64..50, x in 1i64..200) {
            prop_assert_eq!(c.translate(y).get(x), c.get(x + y));
        }
    }
}
