//! Density fluctuation field, martingale diagnostics and Monte Carlo estimators.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{stream_rng, Observer, SimState};
use crate::error::{Error, Result};
use crate::gibbs::{self, BridgeSampler};
use crate::lattice::Configuration;
use crate::params::ModelParams;
use crate::stats::{self, ExperimentEstimate};

/// Jumps between exact recomputations of incrementally tracked sums.
const RESYNC_INTERVAL: u64 = 1 << 14;

/// Largest move of a test-function argument within one quadrature sub-step.
pub const MAX_FRAME_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: u32,
    pub cos: f64,
    pub sin: f64,
}

/// Real trigonometric polynomial `Σ a_k cos(2πku) + b_k sin(2πku)` on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunction {
    modes: Vec<Mode>,
}

impl TestFunction {
    pub fn new(modes: Vec<Mode>) -> Self {
        TestFunction { modes }
    }

    pub fn zero() -> Self {
        TestFunction { modes: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Mode {
            k: 0,
            cos: c,
            sin: 0.0,
        }])
    }

    pub fn cosine(k: u32) -> Self {
        Self::new(vec![Mode {
            k,
            cos: 1.0,
            sin: 0.0,
        }])
    }

    pub fn sine(k: u32) -> Self {
        Self::new(vec![Mode {
            k,
            cos: 0.0,
            sin: 1.0,
        }])
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let a = 2.0 * PI * m.k as f64 * u;
                m.cos * a.cos() + m.sin * a.sin()
            })
            .sum()
    }

    /// Exact derivative, again a trigonometric polynomial.
    pub fn derivative(&self) -> TestFunction {
        TestFunction::new(
            self.modes
                .iter()
                .map(|m| {
                    let w = 2.0 * PI * m.k as f64;
                    Mode {
                        k: m.k,
                        cos: w * m.sin,
                        sin: -w * m.cos,
                    }
                })
                .collect(),
        )
    }

    pub fn laplacian(&self) -> TestFunction {
        self.derivative().derivative()
    }

    /// `n [φ(u + 1/n) - φ(u)]`.
    pub fn discrete_gradient(&self, u: f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        n as f64 * (self.eval(u + h) - self.eval(u))
    }

    /// `n² [φ(u + 1/n) + φ(u - 1/n) - 2φ(u)]`.
    pub fn discrete_laplacian(&self, u: f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let nn = (n * n) as f64;
        nn * (self.eval(u + h) + self.eval(u - h) - 2.0 * self.eval(u))
    }

    /// Coefficients merged per frequency.
    fn spectrum(&self) -> Vec<(u32, f64, f64)> {
        let mut out: Vec<(u32, f64, f64)> = Vec::new();
        for m in &self.modes {
            match out.iter_mut().find(|e| e.0 == m.k) {
                Some(e) => {
                    e.1 += m.cos;
                    e.2 += m.sin;
                }
                None => out.push((m.k, m.cos, if m.k == 0 { 0.0 } else { m.sin })),
            }
        }
        out
    }

    /// `∫ φ ψ du` on the unit torus.
    pub fn inner(&self, other: &TestFunction) -> f64 {
        let b = other.spectrum();
        self.spectrum()
            .iter()
            .filter_map(|&(k, a1, b1)| {
                b.iter().find(|e| e.0 == k).map(|&(_, a2, b2)| {
                    if k == 0 {
                        a1 * a2
                    } else {
                        0.5 * (a1 * a2 + b1 * b2)
                    }
                })
            })
            .sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn gradient_l2_norm_sq(&self) -> f64 {
        self.derivative().l2_norm_sq()
    }

    /// `(1/n) Σ_x φ(x/n)²`.
    pub fn discrete_norm_sq(&self, n: usize) -> f64 {
        (1..=n)
            .map(|x| self.eval(x as f64 / n as f64).powi(2))
            .sum::<f64>()
            / n as f64
    }

    /// `(1/n) Σ_x ∇_N φ(x/n)²`.
    pub fn discrete_gradient_norm_sq(&self, n: usize) -> f64 {
        (1..=n)
            .map(|x| self.discrete_gradient(x as f64 / n as f64, n).powi(2))
            .sum::<f64>()
            / n as f64
    }
}

pub fn transport_velocity(params: &ModelParams) -> f64 {
    params.transport_velocity()
}

/// Argument of the test function at site `x` and macro time `t` in the moving frame.
fn frame_arg(x: usize, shift: f64, n: usize) -> f64 {
    ((x as f64 - shift) / n as f64).rem_euclid(1.0)
}

/// Frame displacement `v t` reduced modulo `n`.
fn frame_shift(params: &ModelParams, t: f64) -> f64 {
    (params.transport_velocity() * t).rem_euclid(params.n() as f64)
}

/// `𝒴_t(φ) = n^{-1/2} Σ_x φ((x - v t)/n) (η_x - ρ̄)`.
pub fn field_eval(cfg: &Configuration, t: f64, phi: &TestFunction, params: &ModelParams) -> f64 {
    let n = params.n();
    let rho = params.rho_bar();
    let shift = frame_shift(params, t);
    let sum: f64 = (1..=n)
        .map(|x| phi.eval(frame_arg(x, shift, n)) * (cfg.get(x as i64) as f64 - rho))
        .sum();
    sum / (n as f64).sqrt()
}

/// Stationary covariance `E[𝒴_t(φ) 𝒴_0(ψ)]` of `∂𝒴 = ½Δ𝒴 + ½∇Ẇ`.
pub fn ou_covariance(phi: &TestFunction, psi: &TestFunction, t: f64) -> f64 {
    assert!(t >= 0.0, "negative lag");
    let b = psi.spectrum();
    let mut acc = 0.0;
    for &(k, a1, b1) in &phi.spectrum() {
        if let Some(&(_, a2, b2)) = b.iter().find(|e| e.0 == k) {
            let pairing = if k == 0 {
                a1 * a2
            } else {
                0.5 * (a1 * a2 + b1 * b2)
            };
            let kk = k as f64;
            acc += (-2.0 * PI * PI * kk * kk * t).exp() * pairing;
        }
    }
    0.25 * acc
}

fn run_replicas<F>(m: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..m).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltResult {
    pub variance: f64,
    pub variance_se: f64,
    pub predicted_variance: f64,
    pub ks: f64,
    pub ks_critical: f64,
    pub samples: usize,
}

/// Fixed-time Gaussian check of `n^{-1/2} Σ g(x/n) η̄_x` under exact samples.
pub fn clt_experiment(params: &ModelParams, g: &TestFunction, m: usize, seed: u64) -> CltResult {
    let n = params.n();
    let sampler = BridgeSampler::new(params);
    let weights: Vec<f64> = (1..=n).map(|x| g.eval(x as f64 / n as f64)).collect();
    let rho = params.rho_bar();
    let chunk = 1024usize;
    let values: Vec<f64> = (0..m.div_ceil(chunk))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut cfg = Configuration::empty(n);
            let count = chunk.min(m - c * chunk);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                sampler.sample_into(&mut rng, &mut cfg);
                let s: f64 = (0..n)
                    .map(|i| weights[i] * (cfg.bit(i) as u8 as f64 - rho))
                    .sum();
                out.push(s / (n as f64).sqrt());
            }
            out
        })
        .collect();
    let predicted = 0.25 * g.discrete_norm_sq(n);
    let (variance, variance_se) = stats::variance_se(&values);
    let ks = if predicted > 0.0 {
        stats::ks_normal(&values, predicted.sqrt())
    } else {
        0.0
    };
    CltResult {
        variance,
        variance_se,
        predicted_variance: predicted,
        ks,
        ks_critical: stats::ks_critical_1pct(m),
        samples: m,
    }
}

/// Accumulates `∫ (1/n) Σ_x c_{x,x+1} (η_x - η_{x+1})² ∇_Nφ((x - v s)/n)² ds`.
struct QvObserver {
    n: usize,
    phi: TestFunction,
    velocity: f64,
    weights: Vec<f64>,
    contrib: Vec<f64>,
    sum: f64,
    integral: f64,
    jumps: u64,
}

impl QvObserver {
    fn new(state: &SimState, phi: &TestFunction) -> Self {
        let n = state.params().n();
        let velocity = state.params().transport_velocity();
        let weights: Vec<f64> = (0..n)
            .map(|i| phi.discrete_gradient((i + 1) as f64 / n as f64, n).powi(2))
            .collect();
        let mut obs = QvObserver {
            n,
            phi: phi.clone(),
            velocity,
            contrib: vec![0.0; n],
            weights,
            sum: 0.0,
            integral: 0.0,
            jumps: 0,
        };
        obs.resync(state);
        obs
    }

    fn resync(&mut self, state: &SimState) {
        for i in 0..self.n {
            self.contrib[i] = state.table().rate(i) * self.weights[i];
        }
        self.sum = self.contrib.iter().sum();
    }

    fn frame_sum(&self, state: &SimState, shift: f64) -> f64 {
        let n = self.n;
        (0..n)
            .filter(|&i| state.table().rate(i) > 0.0)
            .map(|i| {
                state.table().rate(i)
                    * self
                        .phi
                        .discrete_gradient(frame_arg(i + 1, shift, n), n)
                        .powi(2)
            })
            .sum()
    }
}

impl Observer for QvObserver {
    fn interval(&mut self, state: &SimState, dt: f64) {
        let nn = (self.n * self.n) as f64;
        let n = self.n as f64;
        if self.velocity == 0.0 {
            self.integral += self.sum / n * dt / nn;
            return;
        }
        // moving frame: midpoint rule with bounded argument steps
        let s0 = state.macro_time();
        let ds = dt / nn;
        let travel = (self.velocity * ds / n).abs();
        let steps = ((travel / MAX_FRAME_STEP).ceil() as usize).max(1);
        let h = ds / steps as f64;
        for k in 0..steps {
            let s = s0 + (k as f64 + 0.5) * h;
            let shift = (self.velocity * s).rem_euclid(n);
            self.integral += self.frame_sum(state, shift) / n * h;
        }
    }

    fn jumped(&mut self, state: &SimState, i: usize) {
        if self.velocity != 0.0 {
            return;
        }
        let n = self.n;
        for k in 0..5 {
            let j = (i + 2 * n + k - 2) % n;
            let c = state.table().rate(j) * self.weights[j];
            self.sum += c - self.contrib[j];
            self.contrib[j] = c;
        }
        self.jumps += 1;
        if self.jumps.is_multiple_of(RESYNC_INTERVAL) {
            self.resync(state);
        }
    }
}

/// Predictable quadratic variation `⟨M(φ)⟩_t` along one trajectory.
pub fn qv_trajectory<R: rand::Rng + ?Sized>(
    cfg0: Configuration,
    params: &ModelParams,
    phi: &TestFunction,
    t: f64,
    rng: &mut R,
) -> f64 {
    let mut state = SimState::new(cfg0, params);
    let mut obs = QvObserver::new(&state, phi);
    let nn = (params.n() * params.n()) as f64;
    state.run_until(t * nn, rng, &mut obs);
    obs.integral
}

/// Stationary mean of `c_{x,x+1}`, from the exact four-site marginals.
pub fn stationary_mean_rate(params: &ModelParams) -> f64 {
    let kernel = crate::dynamics::RateKernel::new(params);
    (0u8..16)
        .map(|pat| {
            let bits: Vec<u8> = (0..4).map(|k| pat >> k & 1).collect();
            kernel.table()[pat as usize] * gibbs::block_probability(params, &bits).expect("n >= 4")
        })
        .sum()
}

/// Exact `E_ν⟨M(φ)⟩_t = t E_ν[c] ‖∇_N φ‖²_{2,N}` (frame-independent by translation invariance).
pub fn qv_stationary_mean(params: &ModelParams, phi: &TestFunction, t: f64) -> f64 {
    t * stationary_mean_rate(params) * phi.discrete_gradient_norm_sq(params.n())
}

/// The limit `(t/4) ‖∇φ‖²`.
pub fn qv_limit(phi: &TestFunction, t: f64) -> f64 {
    0.25 * t * phi.gradient_l2_norm_sq()
}

/// Monte Carlo mean of the quadratic variation over `m` stationary trajectories.
pub fn qv_estimate(
    params: &ModelParams,
    phi: &TestFunction,
    t: f64,
    m: usize,
    seed: u64,
) -> ExperimentEstimate {
    let start = Instant::now();
    let sampler = BridgeSampler::new(params);
    let values = run_replicas(m, |r| {
        let mut rng = stream_rng(seed, r as u64);
        let cfg = sampler.sample(&mut rng);
        qv_trajectory(cfg, params, phi, t, &mut rng)
    });
    ExperimentEstimate::from_samples(&values, seed, start.elapsed().as_secs_f64())
}

/// Which local product is replaced by the product of block averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BgGap {
    /// `η̄_x η̄_{x+1}`.
    One,
    /// `η̄_x η̄_{x+2}`.
    Two,
}

impl BgGap {
    pub fn offset(self) -> usize {
        match self {
            BgGap::One => 1,
            BgGap::Two => 2,
        }
    }
}

/// Inputs of the replacement functional `Σ_x G(x/n) {η̄_x η̄_{x+j} - ⃖η^L_x ⃗η^L_x}`.
#[derive(Debug, Clone)]
pub struct BgFunctional {
    n: usize,
    l: usize,
    gap: usize,
    rho: f64,
    weights: Vec<f64>,
}

impl BgFunctional {
    pub fn new(params: &ModelParams, g: &TestFunction, l: usize, gap: BgGap) -> Result<Self> {
        let n = params.n();
        if l == 0 {
            return Err(Error::InvalidParameter(
                "box size must be at least 1".into(),
            ));
        }
        if 2 * l > n {
            return Err(Error::BoxTooLarge { l, n });
        }
        Ok(BgFunctional {
            n,
            l,
            gap: gap.offset(),
            rho: params.rho_bar(),
            weights: (0..n).map(|i| g.eval((i + 1) as f64 / n as f64)).collect(),
        })
    }

    /// Direct evaluation, `O(n L)`.
    pub fn eval(&self, cfg: &Configuration) -> f64 {
        let (n, l, rho) = (self.n, self.l, self.rho);
        let centred = |i: usize| cfg.bit(i % n) as u8 as f64 - rho;
        (0..n)
            .map(|i| {
                let left: f64 = (1..=l).map(|k| centred(i + n - k)).sum::<f64>() / l as f64;
                let right: f64 = (1..=l).map(|k| centred(i + k)).sum::<f64>() / l as f64;
                self.weights[i] * (centred(i) * centred(i + self.gap) - left * right)
            })
            .sum()
    }
}

/// Incremental evaluation of a [`BgFunctional`] along a trajectory.
struct BgObserver {
    f: BgFunctional,
    occ: Vec<u8>,
    left: Vec<i64>,
    right: Vec<i64>,
    terms: Vec<f64>,
    value: f64,
    integral: f64,
    jumps: u64,
}

impl BgObserver {
    fn new(f: BgFunctional, cfg: &Configuration) -> Self {
        let n = f.n;
        let mut obs = BgObserver {
            occ: vec![0; n],
            left: vec![0; n],
            right: vec![0; n],
            terms: vec![0.0; n],
            value: 0.0,
            integral: 0.0,
            jumps: 0,
            f,
        };
        obs.resync(cfg);
        obs
    }

    fn resync(&mut self, cfg: &Configuration) {
        let (n, l) = (self.f.n, self.f.l);
        for i in 0..n {
            self.occ[i] = cfg.bit(i) as u8;
        }
        for i in 0..n {
            self.left[i] = (1..=l).map(|k| self.occ[(i + n - k) % n] as i64).sum();
            self.right[i] = (1..=l).map(|k| self.occ[(i + k) % n] as i64).sum();
        }
        for i in 0..n {
            self.terms[i] = self.term(i);
        }
        self.value = self.terms.iter().sum();
    }

    fn term(&self, i: usize) -> f64 {
        let (n, rho) = (self.f.n, self.f.rho);
        let l = self.f.l as f64;
        let a = self.occ[i] as f64 - rho;
        let b = self.occ[(i + self.f.gap) % n] as f64 - rho;
        let left = self.left[i] as f64 / l - rho;
        let right = self.right[i] as f64 / l - rho;
        self.f.weights[i] * (a * b - left * right)
    }

    fn refresh(&mut self, i: usize) {
        let t = self.term(i);
        self.value += t - self.terms[i];
        self.terms[i] = t;
    }
}

impl Observer for BgObserver {
    fn interval(&mut self, _state: &SimState, dt: f64) {
        let nn = (self.f.n * self.f.n) as f64;
        self.integral += self.value * dt / nn;
    }

    fn jumped(&mut self, state: &SimState, i: usize) {
        let (n, l, gap) = (self.f.n, self.f.l, self.f.gap);
        let j = (i + 1) % n;
        let d = state.cfg().bit(i) as i64 - self.occ[i] as i64;
        self.occ[i] = state.cfg().bit(i) as u8;
        self.occ[j] = state.cfg().bit(j) as u8;
        let at = |off: i64| (i as i64 + off).rem_euclid(n as i64) as usize;
        self.right[at(-(l as i64))] += d;
        self.right[i] -= d;
        self.left[j] += d;
        self.left[at(l as i64 + 1)] -= d;
        for off in [
            -(l as i64),
            0,
            1,
            l as i64 + 1,
            -(gap as i64),
            1 - gap as i64,
        ] {
            self.refresh(at(off));
        }
        self.jumps += 1;
        if self.jumps.is_multiple_of(RESYNC_INTERVAL) {
            let cfg = state.cfg().clone();
            self.resync(&cfg);
        }
    }
}

/// `∫_0^t Σ_x G(x/n) {η̄_x η̄_{x+j} - ⃖η^L_x ⃗η^L_x} ds` along one trajectory.
pub fn bg_time_integral<R: rand::Rng + ?Sized>(
    cfg0: Configuration,
    params: &ModelParams,
    functional: &BgFunctional,
    t: f64,
    rng: &mut R,
) -> f64 {
    let mut obs = BgObserver::new(functional.clone(), &cfg0);
    let mut state = SimState::new(cfg0, params);
    let nn = (params.n() * params.n()) as f64;
    state.run_until(t * nn, rng, &mut obs);
    obs.integral
}

/// Monte Carlo estimate of the squared replacement error.
pub fn bg_error_mc(
    params: &ModelParams,
    g: &TestFunction,
    l: usize,
    gap: BgGap,
    t: f64,
    m: usize,
    seed: u64,
) -> Result<ExperimentEstimate> {
    let start = Instant::now();
    let functional = BgFunctional::new(params, g, l, gap)?;
    let sampler = BridgeSampler::new(params);
    let values = run_replicas(m, |r| {
        let mut rng = stream_rng(seed, r as u64);
        let cfg = sampler.sample(&mut rng);
        bg_time_integral(cfg, params, &functional, t, &mut rng).powi(2)
    });
    Ok(ExperimentEstimate::from_samples(
        &values,
        seed,
        start.elapsed().as_secs_f64(),
    ))
}

/// Tracks `Σ_x η_x e^{2πikx/n}` for the frequencies of a test function and
/// records the field on a grid of macro times.
struct FieldRecorder {
    n: usize,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    sums: Vec<(f64, f64)>,
    count: i64,
    grid: Vec<f64>,
    next: usize,
    snapshots: Vec<Vec<(f64, f64)>>,
    jumps: u64,
}

impl FieldRecorder {
    fn new(cfg: &Configuration, ks: Vec<u32>, grid: Vec<f64>) -> Self {
        let n = cfg.n();
        let table = |k: u32, f: fn(f64) -> f64| -> Vec<f64> {
            (0..n)
                .map(|i| f(2.0 * PI * k as f64 * (i + 1) as f64 / n as f64))
                .collect()
        };
        let cos = ks.iter().map(|&k| table(k, f64::cos)).collect();
        let sin = ks.iter().map(|&k| table(k, f64::sin)).collect();
        let mut rec = FieldRecorder {
            n,
            sums: vec![(0.0, 0.0); ks.len()],
            cos,
            sin,
            count: 0,
            grid,
            next: 0,
            snapshots: Vec::new(),
            jumps: 0,
        };
        rec.resync(cfg);
        rec
    }

    fn resync(&mut self, cfg: &Configuration) {
        self.count = cfg.particle_count() as i64;
        for (m, s) in self.sums.iter_mut().enumerate() {
            *s = (0..self.n)
                .filter(|&i| cfg.bit(i))
                .fold((0.0, 0.0), |acc, i| {
                    (acc.0 + self.cos[m][i], acc.1 + self.sin[m][i])
                });
        }
    }
}

impl Observer for FieldRecorder {
    fn interval(&mut self, state: &SimState, dt: f64) {
        let end = state.micro_time() + dt;
        while self.next < self.grid.len() && self.grid[self.next] < end {
            self.snapshots.push(self.sums.clone());
            self.next += 1;
        }
    }

    fn jumped(&mut self, state: &SimState, i: usize) {
        let j = (i + 1) % self.n;
        // the particle now sits at `to`, having left `from`
        let (from, to) = if state.cfg().bit(j) { (i, j) } else { (j, i) };
        for (m, s) in self.sums.iter_mut().enumerate() {
            s.0 += self.cos[m][to] - self.cos[m][from];
            s.1 += self.sin[m][to] - self.sin[m][from];
        }
        self.jumps += 1;
        if self.jumps.is_multiple_of(RESYNC_INTERVAL) {
            let cfg = state.cfg().clone();
            self.resync(&cfg);
        }
    }
}

/// Field value from tracked Fourier sums at macro time `t`.
fn field_from_sums(
    phi: &TestFunction,
    ks: &[u32],
    sums: &[(f64, f64)],
    count: i64,
    params: &ModelParams,
    t: f64,
) -> f64 {
    let n = params.n() as f64;
    let theta_unit = frame_shift(params, t) / n;
    let mut acc = 0.0;
    for m in phi.modes() {
        if m.k == 0 {
            acc += m.cos * (count as f64 - n * params.rho_bar());
            continue;
        }
        let idx = ks
            .iter()
            .position(|&k| k == m.k)
            .expect("tracked frequency");
        let (c, s) = sums[idx];
        let theta = 2.0 * PI * m.k as f64 * theta_unit;
        let (st, ct) = theta.sin_cos();
        acc += m.cos * (c * ct + s * st) + m.sin * (s * ct - c * st);
    }
    acc / n.sqrt()
}

/// Settings of the time-correlation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuSettings {
    /// Lags (macro time), each a multiple of `spacing`.
    pub lags: Vec<f64>,
    /// Macro time covered by each replica.
    pub window: f64,
    /// Spacing of the recorded field.
    pub spacing: f64,
    pub replicas: usize,
    pub seed: u64,
}

/// Estimates of `E[𝒴_{s+t}(φ) 𝒴_s(φ)]` for `φ = cos(2πk·)`, one per lag.
///
/// Each replica starts from an exact stationary draw, records the field on a
/// grid and averages lagged products over all origins in its window. The sine
/// partner of `φ` is a translate of `φ` and is averaged in as well.
pub fn ou_experiment(
    params: &ModelParams,
    k: u32,
    settings: &OuSettings,
) -> Result<Vec<ExperimentEstimate>> {
    if k == 0 {
        return Err(Error::InvalidParameter("frequency must be positive".into()));
    }
    let steps: Vec<usize> = settings
        .lags
        .iter()
        .map(|&lag| {
            let s = lag / settings.spacing;
            if (s - s.round()).abs() > 1e-9 || s < 0.0 {
                Err(Error::InvalidParameter(format!(
                    "lag {lag} is not a multiple of {}",
                    settings.spacing
                )))
            } else {
                Ok(s.round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    let points = (settings.window / settings.spacing).round() as usize + 1;
    if steps.iter().any(|&s| s + 1 >= points) {
        return Err(Error::InvalidParameter(
            "window shorter than the largest lag".into(),
        ));
    }
    let start = Instant::now();
    let n = params.n();
    let nn = (n * n) as f64;
    let sampler = BridgeSampler::new(params);
    let cos_phi = TestFunction::cosine(k);
    let sin_phi = TestFunction::sine(k);
    let per_replica: Vec<Vec<f64>> = (0..settings.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(settings.seed, r as u64);
            let cfg = sampler.sample(&mut rng);
            let count = cfg.particle_count() as i64;
            let grid: Vec<f64> = (0..points)
                .map(|p| p as f64 * settings.spacing * nn)
                .collect();
            let mut rec = FieldRecorder::new(&cfg, vec![k], grid);
            let mut state = SimState::new(cfg, params);
            let horizon = (points as f64 - 0.5) * settings.spacing * nn;
            state.run_until(horizon, &mut rng, &mut rec);
            let series: Vec<(f64, f64)> = rec
                .snapshots
                .iter()
                .enumerate()
                .map(|(p, sums)| {
                    let t = p as f64 * settings.spacing;
                    (
                        field_from_sums(&cos_phi, &[k], sums, count, params, t),
                        field_from_sums(&sin_phi, &[k], sums, count, params, t),
                    )
                })
                .collect();
            steps
                .iter()
                .map(|&s| {
                    let pairs = series.len() - s;
                    (0..pairs)
                        .map(|p| {
                            0.5 * (series[p + s].0 * series[p].0 + series[p + s].1 * series[p].1)
                        })
                        .sum::<f64>()
                        / pairs as f64
                })
                .collect()
        })
        .collect();
    let wall = start.elapsed().as_secs_f64();
    Ok((0..steps.len())
        .map(|j| {
            let xs: Vec<f64> = per_replica.iter().map(|v| v[j]).collect();
            ExperimentEstimate::from_samples(&xs, settings.seed, wall)
        })
        .collect())
}

/// Instantaneous integrands of the Dynkin decomposition of `𝒴(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynkinTerms {
    pub velocity: f64,
    pub laplacian_h: f64,
    pub degree_one: f64,
    pub quadratic: f64,
    pub cubic: f64,
    pub eps_laplacian_g: f64,
    pub eps_gradient: f64,
}

/// Prefactor `2b - 6bρ̄` of the quadratic term after the gap-2 replacement.
pub fn quadratic_prefactor(params: &ModelParams) -> f64 {
    let rho = params.rho_bar();
    2.0 * params.b() - 6.0 * params.b() * rho
}

pub fn dynkin_term_integrands(
    cfg: &Configuration,
    s: f64,
    phi: &TestFunction,
    params: &ModelParams,
) -> DynkinTerms {
    let n = params.n();
    let nf = n as f64;
    let rho = params.rho_bar();
    let b = params.b();
    let v = params.transport_velocity();
    let eps = params.eps();
    let weak = nf.powf(0.5 - params.gamma());
    let shift = frame_shift(params, s);
    let dphi = phi.derivative();
    let e = |x: i64| cfg.get(x) as f64;
    let c = |x: i64| e(x) - rho;
    let mut t = DynkinTerms {
        velocity: 0.0,
        laplacian_h: 0.0,
        degree_one: 0.0,
        quadratic: 0.0,
        cubic: 0.0,
        eps_laplacian_g: 0.0,
        eps_gradient: 0.0,
    };
    for x in 1..=n as i64 {
        let u = frame_arg(x as usize, shift, n);
        let grad = phi.discrete_gradient(u, n);
        let lap = phi.discrete_laplacian(u, n);
        let h = e(x) * e(x + 1) + e(x) * e(x - 1) - e(x - 1) * e(x + 1);
        let g = e(x) * e(x - 1) + e(x) * e(x + 1) + e(x - 1) * e(x + 1)
            - 2.0 * e(x - 1) * e(x) * e(x + 1);
        t.velocity += dphi.eval(u) * c(x);
        t.laplacian_h += lap * h;
        t.degree_one += grad * c(x);
        t.quadratic += grad * (c(x) * c(x + 1) + c(x) * c(x + 2));
        t.cubic += grad * c(x) * c(x + 1) * c(x + 2);
        t.eps_laplacian_g += lap * g;
        t.eps_gradient += grad * e(x) * (e(x + 1) - e(x + 2));
    }
    t.velocity *= -v / (nf * nf.sqrt());
    t.laplacian_h /= 2.0 * nf.sqrt();
    t.degree_one *= (4.0 * b * rho - 6.0 * b * rho * rho) * weak;
    t.quadratic *= (b - 3.0 * b * rho) * weak;
    t.cubic *= -2.0 * b * weak;
    t.eps_laplacian_g *= eps / (2.0 * nf.sqrt());
    t.eps_gradient *= b * eps * weak;
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    /// Estimated `P(η_0 = 1, η_r = 1) - P(η_0 = 1) P(η_r = 1)`.
    pub covariance: f64,
    pub std_error: f64,
    /// Exact value from the transfer matrix.
    pub exact: f64,
    /// `n^{-α r}`.
    pub bound: f64,
    pub samples: usize,
}

impl MixingEstimate {
    /// Mixing proxy: the largest single-site event discrepancy, which for
    /// binary events is the absolute covariance.
    pub fn proxy(&self) -> f64 {
        self.covariance.abs()
    }
}

/// Empirical two-site dependence at separation `r`, averaged over translations.
pub fn empirical_mixing(
    params: &ModelParams,
    r: usize,
    m: usize,
    seed: u64,
) -> Result<MixingEstimate> {
    let n = params.n();
    if r == 0 || 2 * r > n {
        return Err(Error::InvalidParameter(format!(
            "separation {r} outside 1..={}",
            n / 2
        )));
    }
    let sampler = BridgeSampler::new(params);
    let rho = params.rho_bar();
    let chunk = 256usize;
    let values: Vec<f64> = (0..m.div_ceil(chunk))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut cfg = Configuration::empty(n);
            let count = chunk.min(m - c * chunk);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                sampler.sample_into(&mut rng, &mut cfg);
                let v = |i: usize| cfg.bit(i % n) as u8 as f64 - rho;
                out.push((0..n).map(|i| v(i) * v(i + r)).sum::<f64>() / n as f64);
            }
            out
        })
        .collect();
    let (covariance, std_error) = stats::mean_se(&values);
    Ok(MixingEstimate {
        covariance,
        std_error,
        exact: gibbs::centered_correlation(params, &[1, 1 + r as i64])?,
        bound: (n as f64).powf(-params.alpha() * r as f64),
        samples: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, b: f64, gamma: f64) -> ModelParams {
        ModelParams::new(n, b, gamma, 1.5).unwrap()
    }

    #[test]
    fn test_function_calculus() {
        let phi = TestFunction::new(vec![
            Mode {
                k: 0,
                cos: 0.5,
                sin: 0.0,
            },
            Mode {
                k: 1,
                cos: 1.0,
                sin: -0.5,
            },
            Mode {
                k: 3,
                cos: 0.0,
                sin: 2.0,
            },
        ]);
        assert!((phi.l2_norm_sq() - (0.25 + 0.5 * 1.25 + 0.5 * 4.0)).abs() <= 1e-15);
        let grad = (2.0 * PI).powi(2) * 0.5 * 1.25 + (6.0 * PI).powi(2) * 0.5 * 4.0;
        assert!((phi.gradient_l2_norm_sq() - grad).abs() <= 1e-12 * grad);
        for u in [0.0, 0.13, 0.7] {
            let h = 1e-5;
            let fd = (phi.eval(u + h) - phi.eval(u - h)) / (2.0 * h);
            assert!((phi.derivative().eval(u) - fd).abs() <= 1e-6);
            let lap = phi.laplacian().eval(u);
            assert!((phi.discrete_laplacian(u, 4096) - lap).abs() <= 1e-3 * lap.abs().max(1.0));
        }
        // discrete norms are exact for low modes
        assert!((phi.discrete_norm_sq(64) - phi.l2_norm_sq()).abs() <= 1e-12);
        assert!((TestFunction::cosine(2).inner(&TestFunction::sine(2))).abs() <= 1e-15);
    }

    #[test]
    fn field_examples() {
        let p = params(32, 0.0, 1.0);
        let mut rng = stream_rng(5, 0);
        let cfg = gibbs::sample_exact(&p, &mut rng);
        assert_eq!(field_eval(&cfg, 0.3, &TestFunction::zero(), &p), 0.0);
        let c = field_eval(&cfg, 0.0, &TestFunction::constant(2.0), &p);
        let direct = 2.0 * (cfg.particle_count() as f64 - 32.0 * p.rho_bar()) / 32f64.sqrt();
        assert!((c - direct).abs() <= 1e-12);
    }

    #[test]
    fn field_is_periodic_in_frame() {
        let p = params(64, 1.0, 0.75);
        let cfg = gibbs::sample_exact(&p, &mut stream_rng(6, 0));
        let phi = TestFunction::new(vec![Mode {
            k: 2,
            cos: 0.3,
            sin: 1.0,
        }]);
        let period = 64.0 / p.transport_velocity();
        let a = field_eval(&cfg, 0.21, &phi, &p);
        let b = field_eval(&cfg, 0.21 + period, &phi, &p);
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn tracked_field_matches_direct() {
        let p = params(64, 1.0, 0.75);
        let mut rng = stream_rng(8, 0);
        let cfg = gibbs::sample_exact(&p, &mut rng);
        let count = cfg.particle_count() as i64;
        let phi = TestFunction::new(vec![Mode {
            k: 1,
            cos: 0.7,
            sin: -0.2,
        }]);
        let nn = 64.0 * 64.0;
        let grid: Vec<f64> = (0..5).map(|k| k as f64 * 0.01 * nn).collect();
        let mut rec = FieldRecorder::new(&cfg, vec![1], grid);
        let mut snaps = Vec::new();
        struct Cfgs<'a>(&'a mut Vec<Configuration>, Vec<f64>, usize);
        impl Observer for Cfgs<'_> {
            fn interval(&mut self, state: &SimState, dt: f64) {
                while self.2 < self.1.len() && self.1[self.2] < state.micro_time() + dt {
                    self.0.push(state.cfg().clone());
                    self.2 += 1;
                }
            }
        }
        let grid: Vec<f64> = (0..5).map(|k| k as f64 * 0.01 * nn).collect();
        let mut both = (&mut rec, Cfgs(&mut snaps, grid, 0));
        let mut state = SimState::new(cfg, &p);
        state.run_until(0.045 * nn, &mut rng, &mut both);
        assert_eq!(rec.snapshots.len(), 5);
        for (k, sums) in rec.snapshots.iter().enumerate() {
            let t = k as f64 * 0.01;
            let a = field_from_sums(&phi, &[1], sums, count, &p, t);
            let b = field_eval(&snaps[k], t, &phi, &p);
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn ou_predictor() {
        let phi = TestFunction::cosine(2);
        let psi = TestFunction::new(vec![
            Mode {
                k: 2,
                cos: 1.0,
                sin: 0.5,
            },
            Mode {
                k: 0,
                cos: 1.0,
                sin: 0.0,
            },
        ]);
        assert!((ou_covariance(&phi, &psi, 0.0) - 0.25 * phi.inner(&psi)).abs() <= 1e-16);
        assert!(ou_covariance(&phi, &phi, 50.0) < 1e-300);
        let r = ou_covariance(&phi, &phi, 0.02) / ou_covariance(&phi, &phi, 0.01);
        assert!((r - (-2.0 * PI * PI * 4.0 * 0.01f64).exp()).abs() <= 1e-14);
    }

    #[test]
    fn qv_vanishes_for_constant() {
        let p = params(32, 0.0, 1.0);
        let est = qv_estimate(&p, &TestFunction::constant(1.0), 0.1, 4, 1);
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn qv_incremental_matches_recompute() {
        let p = params(48, 0.0, 1.0);
        let mut rng = stream_rng(9, 0);
        let cfg = gibbs::sample_exact(&p, &mut rng);
        let phi = TestFunction::new(vec![Mode {
            k: 1,
            cos: 1.0,
            sin: 0.3,
        }]);
        let mut state = SimState::new(cfg, &p);
        let mut obs = QvObserver::new(&state, &phi);
        for _ in 0..20 {
            state.run_until(state.micro_time() + 50.0, &mut rng, &mut obs);
            let direct = obs.frame_sum(&state, 0.0);
            assert!((obs.sum - direct).abs() <= 1e-10);
        }
    }

    #[test]
    fn qv_frame_substeps_reduce_to_static_case() {
        // with b = 0 the moving-frame quadrature must reproduce the exact sum
        let p = params(32, 0.0, 1.0);
        let phi = TestFunction::cosine(1);
        let mut r1 = stream_rng(4, 0);
        let cfg = gibbs::sample_exact(&p, &mut r1);
        let mut r2 = r1.clone();
        let exact = qv_trajectory(cfg.clone(), &p, &phi, 0.05, &mut r1);
        let mut state = SimState::new(cfg, &p);
        let mut obs = QvObserver::new(&state, &phi);
        obs.velocity = 1e-30;
        state.run_until(0.05 * 1024.0, &mut r2, &mut obs);
        assert!((obs.integral - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn bg_incremental_matches_direct() {
        for (gap, l) in [(BgGap::One, 1usize), (BgGap::Two, 3), (BgGap::One, 16)] {
            let p = params(32, 1.0, 0.5);
            let g = TestFunction::cosine(1).derivative();
            let f = BgFunctional::new(&p, &g, l, gap).unwrap();
            let mut rng = stream_rng(10, l as u64);
            let cfg = gibbs::sample_exact(&p, &mut rng);
            let mut state = SimState::new(cfg.clone(), &p);
            let mut obs = BgObserver::new(f.clone(), &cfg);
            for _ in 0..30 {
                state.run_until(state.micro_time() + 20.0, &mut rng, &mut obs);
                assert!((obs.value - f.eval(state.cfg())).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn bg_domain_and_zero() {
        let p = params(32, 0.0, 1.0);
        let g = TestFunction::zero();
        assert!(matches!(
            bg_error_mc(&p, &g, 17, BgGap::One, 0.1, 2, 0),
            Err(Error::BoxTooLarge { l: 17, n: 32 })
        ));
        let e = bg_error_mc(&p, &g, 4, BgGap::Two, 0.05, 3, 0).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn dynkin_asymmetric_terms_vanish_without_drift() {
        let p = params(64, 0.0, 0.75);
        let cfg = gibbs::sample_exact(&p, &mut stream_rng(2, 0));
        let t = dynkin_term_integrands(&cfg, 0.1, &TestFunction::cosine(1), &p);
        assert_eq!(t.velocity, 0.0);
        assert_eq!(t.degree_one, 0.0);
        assert_eq!(t.quadratic, 0.0);
        assert_eq!(t.cubic, 0.0);
        assert_eq!(t.eps_gradient, 0.0);
        assert!(t.laplacian_h != 0.0);
    }

    #[test]
    fn quadratic_prefactor_limit() {
        let mut last = f64::INFINITY;
        for k in 4..=16 {
            let p = ModelParams::new(1 << k, 1.0, 0.5, 1.5).unwrap();
            let gap = (quadratic_prefactor(&p) + 1.0).abs();
            assert!(gap <= last);
            last = gap;
        }
        assert!(last <= 1e-6);
    }

    #[test]
    fn mixing_against_exact_covariance() {
        let p = ModelParams::new(64, 0.0, 1.0, 1.0).unwrap();
        let est = empirical_mixing(&p, 1, 20_000, 3).unwrap();
        assert!((est.covariance - est.exact).abs() <= 4.0 * est.std_error);
        let far = empirical_mixing(&p, 32, 20_000, 4).unwrap();
        assert!(far.proxy() <= 4.0 * far.std_error);
    }
}
