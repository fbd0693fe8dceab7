//! Closed-form analytics of the stationary measure `ν ∝ exp(-x H)` on the ring.
//!
//! Everything goes through the 2×2 transfer matrix `T = [[1, 1], [1, e^{-x}]]`
//! (index 1 is the occupied state). With `u = λ₊ - 1`, `ρ = λ₋/λ₊` and
//! `p₊ = u²/(1+u²)`, `p₋ = 1/(1+u²)` the normalized powers are
//! `(T/λ₊)^k = Π₊ + ρ^k Π₋`, so every quantity below is a short product of
//! numbers in `[-1, 1]` and never forms `λ^n` directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::params::ModelParams;

/// Largest lattice size for which the measure is enumerated.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub log_z: f64,
    pub interaction: f64,
    /// `λ₋ / λ₊`.
    pub ratio: f64,
    /// `λ₊ - 1`, the second coordinate of the leading eigenvector `(1, λ₊ - 1)`.
    pub u: f64,
    /// Occupied-occupied weight of the leading spectral projector.
    pub p_plus: f64,
    /// Occupied-occupied weight of the subleading spectral projector.
    pub p_minus: f64,
    /// `1 - e^{-x}`.
    pub one_minus_e: f64,
    n: usize,
}

impl SpectralData {
    /// Normalized power `(T/λ₊)^k` as a row-major 2×2 array.
    pub fn power(&self, k: usize) -> [[f64; 2]; 2] {
        let r = self.ratio.powi(k as i32);
        let off = self.u * (1.0 - r) / (1.0 + self.u * self.u);
        [
            [self.p_minus + r * self.p_plus, off],
            [off, self.p_plus + r * self.p_minus],
        ]
    }

    /// `1 + ρ^n`, the normalized partition function.
    pub fn norm(&self) -> f64 {
        1.0 + self.ratio.powi(self.n as i32)
    }

    /// `p₊ - p₋ = -(1 - e^{-x}) u / (1 + u²)` without cancellation.
    fn projector_gap(&self) -> f64 {
        -self.one_minus_e * self.u / (1.0 + self.u * self.u)
    }
}

pub fn spectral(params: &ModelParams) -> SpectralData {
    let x = params.interaction();
    let n = params.n();
    let e1 = -(-x).exp_m1();
    let root = (e1 * e1 + 4.0).sqrt();
    let lambda_plus = (2.0 - e1 + root) / 2.0;
    let lambda_minus = -e1 / lambda_plus;
    let u = (root - e1) / 2.0;
    let ratio = lambda_minus / lambda_plus;
    let log_z = n as f64 * lambda_plus.ln() + ratio.powi(n as i32).ln_1p();
    SpectralData {
        lambda_plus,
        lambda_minus,
        log_z,
        interaction: x,
        ratio,
        u,
        p_plus: u * u / (1.0 + u * u),
        p_minus: 1.0 / (1.0 + u * u),
        one_minus_e: e1,
        n,
    }
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION {
        Err(Error::TooLarge {
            n,
            max: MAX_ENUMERATION,
        })
    } else {
        Ok(())
    }
}

/// Energy of the configuration encoded by `idx` (site `i + 1` is bit `i`).
fn energy_of_index(n: usize, idx: u64) -> u32 {
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let rot = ((idx >> 1) | (idx << (n - 1))) & mask;
    (idx & rot).count_ones()
}

/// `Σ_η exp(-x H(η))` by direct enumeration.
pub fn partition_bruteforce(params: &ModelParams) -> Result<f64> {
    let n = params.n();
    check_enumerable(n)?;
    let mut hist = vec![0u64; n + 1];
    for idx in 0..(1u64 << n) {
        hist[energy_of_index(n, idx) as usize] += 1;
    }
    let x = params.interaction();
    Ok(hist
        .iter()
        .enumerate()
        .map(|(h, &c)| c as f64 * (-x * h as f64).exp())
        .sum())
}

/// Probability of every configuration, indexed as in [`Configuration::from_index`].
#[derive(Debug, Clone)]
pub struct MeasureTable {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl MeasureTable {
    pub fn prob(&self, cfg: &Configuration) -> f64 {
        self.probs[cfg.index() as usize]
    }

    pub fn expect(&self, f: impl Fn(&Configuration) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| p * f(&Configuration::from_index(self.n, i as u64)))
            .sum()
    }
}

pub fn enumerate_measure(params: &ModelParams) -> Result<MeasureTable> {
    let n = params.n();
    check_enumerable(n)?;
    let x = params.interaction();
    let weights: Vec<f64> = (0..(1u64 << n))
        .map(|idx| (-x * energy_of_index(n, idx) as f64).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(MeasureTable {
        n,
        probs: weights.into_iter().map(|w| w / z).collect(),
    })
}

pub fn mean_density(params: &ModelParams) -> f64 {
    let s = spectral(params);
    let rn = s.ratio.powi(params.n() as i32);
    (s.p_plus + rn * s.p_minus) / (1.0 + rn)
}

/// `E[∏ η_{x_i}]` for consecutive gaps `d_1, …, d_m` summing to `n`.
pub fn raw_moment(params: &ModelParams, gaps: &[usize]) -> Result<f64> {
    let n = params.n();
    let sum: usize = gaps.iter().sum();
    if sum != n || gaps.contains(&0) {
        return Err(Error::GapMismatch { sum, n });
    }
    let s = spectral(params);
    let prod: f64 = gaps
        .iter()
        .map(|&d| s.p_plus + s.ratio.powi(d as i32) * s.p_minus)
        .product();
    Ok(prod / s.norm())
}

/// Probability that consecutive sites `x, x+1, …` carry `pattern`.
pub fn block_probability(params: &ModelParams, pattern: &[u8]) -> Result<f64> {
    let n = params.n();
    let l = pattern.len();
    if l == 0 || l > n {
        return Err(Error::InvalidParameter(format!(
            "pattern length {l} outside 1..={n}"
        )));
    }
    let s = spectral(params);
    let t = normalized_transfer(&s);
    let mut w = 1.0;
    for pair in pattern.windows(2) {
        w *= t[pair[0] as usize][pair[1] as usize];
    }
    let first = pattern[0] as usize;
    let last = pattern[l - 1] as usize;
    Ok(w * s.power(n - l + 1)[last][first] / s.norm())
}

fn normalized_transfer(s: &SpectralData) -> [[f64; 2]; 2] {
    let inv = 1.0 / s.lambda_plus;
    [[inv, inv], [inv, (-s.interaction).exp() * inv]]
}

/// Cyclic gaps between sorted distinct sites (1-based, reduced mod n).
pub fn gaps_of_sites(n: usize, sites: &[i64]) -> Result<Vec<usize>> {
    let mut reduced: Vec<i64> = sites
        .iter()
        .map(|&x| (x - 1).rem_euclid(n as i64))
        .collect();
    reduced.sort_unstable();
    if let Some(w) = reduced.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateSite(w[0] + 1));
    }
    if reduced.is_empty() {
        return Ok(Vec::new());
    }
    let m = reduced.len();
    Ok((0..m)
        .map(|i| {
            if i + 1 < m {
                (reduced[i + 1] - reduced[i]) as usize
            } else {
                (reduced[0] + n as i64 - reduced[i]) as usize
            }
        })
        .collect())
}

/// `E[∏ (η_{x_i} - ρ̄)]`, evaluated in the eigenbasis of `T` where the centred
/// insertion has entries of size `ρ^n` and `1` and no cancellation occurs.
pub fn centered_correlation(params: &ModelParams, sites: &[i64]) -> Result<f64> {
    let gaps = gaps_of_sites(params.n(), sites)?;
    if gaps.is_empty() {
        return Ok(1.0);
    }
    let s = spectral(params);
    let rn = s.ratio.powi(params.n() as i32);
    let gap = s.projector_gap();
    // centred insertion in the basis (leading, subleading)
    let a = [
        [gap * rn / (1.0 + rn), s.u / (1.0 + s.u * s.u)],
        [s.u / (1.0 + s.u * s.u), -gap / (1.0 + rn)],
    ];
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    for &d in &gaps {
        let rd = s.ratio.powi(d as i32);
        let step = [[a[0][0], a[0][1] * rd], [a[1][0], a[1][1] * rd]];
        acc = mul2(&acc, &step);
    }
    Ok((acc[0][0] + acc[1][1]) / (1.0 + rn))
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Error-free sum: `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free product via fused multiply-add.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add(&mut self, v: DoubleDouble) {
        let (s, e) = two_sum(self.hi, v.hi);
        let e = e + self.lo + v.lo;
        let (hi, lo) = two_sum(s, e);
        self.hi = hi;
        self.lo = lo;
    }

    fn mul_f64(self, b: f64) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = two_sum(p, e + self.lo * b);
        DoubleDouble { hi, lo }
    }
}

/// Centred correlation by inclusion-exclusion over raw moments with
/// double-double accumulation; limited to `m ≤ 6` sites.
pub fn centered_correlation_inclusion_exclusion(
    params: &ModelParams,
    sites: &[i64],
) -> Result<f64> {
    let n = params.n();
    gaps_of_sites(n, sites)?;
    let m = sites.len();
    if m > 6 {
        return Err(Error::InvalidParameter(format!(
            "{m} sites exceed the supported 6"
        )));
    }
    let rho = mean_density(params);
    let mut acc = DoubleDouble::default();
    for mask in 0u32..(1 << m) {
        let chosen: Vec<i64> = (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| sites[i])
            .collect();
        let moment = if chosen.is_empty() {
            1.0
        } else {
            raw_moment(params, &gaps_of_sites(n, &chosen)?)?
        };
        let mut term = DoubleDouble {
            hi: moment,
            lo: 0.0,
        };
        for _ in 0..(m - chosen.len()) {
            term = term.mul_f64(-rho);
        }
        acc.add(term);
    }
    Ok(acc.hi + acc.lo)
}

/// `ν(η^{z,z+1}) / ν(η) = exp(-x (η_z - η_{z+1})(η_{z+2} - η_{z-1}))`.
pub fn weight_ratio_swap(cfg: &Configuration, z: i64, params: &ModelParams) -> f64 {
    let d = (cfg.get(z) as f64 - cfg.get(z + 1) as f64)
        * (cfg.get(z + 2) as f64 - cfg.get(z - 1) as f64);
    (-params.interaction() * d).exp()
}

/// Centred-variable polynomial approximating `[σ_z - 1](η̄_z - η̄_{z+1})` to first
/// order in the interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assumption1aExpansion {
    pub constant: f64,
    /// Coefficient of `η̄_{z-1} - η̄_{z+2}`.
    pub linear: f64,
    /// Coefficient of `η̄_z η̄_{z+1} η̄_{z+2} - η̄_{z-1} η̄_z η̄_{z+1}`.
    pub cubic: f64,
}

impl Assumption1aExpansion {
    pub fn new(params: &ModelParams) -> Self {
        let x = params.interaction();
        Assumption1aExpansion {
            constant: 0.0,
            linear: 0.5 * x,
            cubic: 2.0 * x,
        }
    }

    /// Evaluate at centred occupations `(η̄_{z-1}, η̄_z, η̄_{z+1}, η̄_{z+2})`.
    pub fn eval(&self, c: [f64; 4]) -> f64 {
        self.constant
            + self.linear * (c[0] - c[3])
            + self.cubic * (c[1] * c[2] * c[3] - c[0] * c[1] * c[2])
    }
}

/// Residual of a given expansion over all 16 local patterns.
pub fn expansion_residual(params: &ModelParams, expansion: &Assumption1aExpansion) -> f64 {
    let rho = mean_density(params);
    let x = params.interaction();
    (0u8..16)
        .map(|pat| {
            let e: [f64; 4] = std::array::from_fn(|k| (pat >> k & 1) as f64);
            let delta = (e[1] - e[2]) * (e[3] - e[0]);
            let lhs = (-x * delta).exp_m1() * (e[1] - e[2]);
            let c = e.map(|v| v - rho);
            (lhs - expansion.eval(c)).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest residual `|[σ_z - 1](η̄_z - η̄_{z+1}) - polynomial|` over the 16 patterns.
pub fn assumption1a_residual(params: &ModelParams) -> f64 {
    expansion_residual(params, &Assumption1aExpansion::new(params))
}

/// Exact sampler for the stationary measure, built once per parameter set.
///
/// The occupations around the ring form a two-state Markov chain conditioned to
/// return to its starting state; the anchor `η_1` is drawn from its marginal and
/// each later site from the transition conditioned on the remaining distance.
#[derive(Debug, Clone)]
pub struct BridgeSampler {
    n: usize,
    anchor_occupied: f64,
    /// `cond[i][prev][anchor]`: probability that site `i + 1` (0-based `i ≥ 1`) is
    /// occupied given the previous site and the anchor.
    cond: Vec<[[f64; 2]; 2]>,
}

impl BridgeSampler {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.n();
        let s = spectral(params);
        let t = normalized_transfer(&s);
        let powers: Vec<[[f64; 2]; 2]> = (0..=n).map(|k| s.power(k)).collect();
        let anchor_occupied = powers[n][1][1] / (powers[n][0][0] + powers[n][1][1]);
        let mut cond = vec![[[0.0; 2]; 2]; n];
        for (i, c) in cond.iter_mut().enumerate().skip(1) {
            // steps from site i (0-based) back to the anchor after wrapping
            let r = n - i;
            for prev in 0..2 {
                for anchor in 0..2 {
                    let w1 = t[prev][1] * powers[r][1][anchor];
                    let w0 = t[prev][0] * powers[r][0][anchor];
                    c[prev][anchor] = w1 / (w0 + w1);
                }
            }
        }
        BridgeSampler {
            n,
            anchor_occupied,
            cond,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut cfg = Configuration::empty(self.n);
        self.sample_into(rng, &mut cfg);
        cfg
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, cfg: &mut Configuration) {
        let anchor = (rng.random::<f64>() < self.anchor_occupied) as usize;
        cfg.set_bit(0, anchor == 1);
        let mut prev = anchor;
        for i in 1..self.n {
            let occ = (rng.random::<f64>() < self.cond[i][prev][anchor]) as usize;
            cfg.set_bit(i, occ == 1);
            prev = occ;
        }
    }
}

/// One exact draw from the stationary measure.
pub fn sample_exact<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Configuration {
    BridgeSampler::new(params).sample(rng)
}

/// `ν(B_ℓ(x))`: no two particles at distance ≤ 2 among sites `x, …, x + ℓ`.
/// The value does not depend on `x` by translation invariance.
#[allow(clippy::needless_range_loop)]
pub fn bad_set_probability(params: &ModelParams, _x: i64, l: usize) -> Result<f64> {
    let n = params.n();
    if l == 0 || l > n {
        return Err(Error::InvalidParameter(format!(
            "window length {l} outside 1..={n}"
        )));
    }
    let s = spectral(params);
    let t = normalized_transfer(&s);
    // state (first, second-to-last, last) after placing sites x..x+k
    let mut w = [[[0.0f64; 2]; 2]; 2];
    for first in 0..2 {
        for second in 0..2 {
            if first + second < 2 {
                w[first][first][second] = t[first][second];
            }
        }
    }
    for _ in 2..=l {
        let mut next = [[[0.0f64; 2]; 2]; 2];
        for first in 0..2 {
            for prev in 0..2 {
                for cur in 0..2 {
                    let weight = w[first][prev][cur];
                    if weight == 0.0 {
                        continue;
                    }
                    for new in 0..2 {
                        if new == 1 && (cur == 1 || prev == 1) {
                            continue;
                        }
                        next[first][cur][new] += weight * t[cur][new];
                    }
                }
            }
        }
        w = next;
    }
    let close = s.power(n - l);
    let mut total = 0.0;
    for first in 0..2 {
        for prev in 0..2 {
            for cur in 0..2 {
                total += w[first][prev][cur] * close[cur][first];
            }
        }
    }
    Ok(total / s.norm())
}
