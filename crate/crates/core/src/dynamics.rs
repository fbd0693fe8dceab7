//! Jump rates, the exact event-driven simulator and exhaustive stationarity checks.

use rand::distr::Open01;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::params::ModelParams;

/// Largest lattice size for the exhaustive checkers.
pub const MAX_EXHAUSTIVE: usize = 16;

/// Events between full rebuilds of the prefix sums.
pub const REBUILD_INTERVAL: u64 = 10_000;

/// Generator for replica `stream` of an experiment seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rate of bond `(x, x+1)` from the local pattern; bit `k` of `pattern` is
/// `η_{x-1+k}`.
pub fn pattern_rate(pattern: u8, p: f64, q: f64, eps: f64) -> f64 {
    let e = |k: u8| ((pattern >> k) & 1) as f64;
    let (left, a, b, right) = (e(0), e(1), e(2), e(3));
    let sum = left + right;
    let diff = left - right;
    p * a * (1.0 - b) * (sum + eps * diff) + q * b * (1.0 - a) * (sum - eps * diff)
}

/// `c_{x,x+1}(η)` for the 1-based bond `x`.
pub fn bond_rate(cfg: &Configuration, x: i64, params: &ModelParams) -> f64 {
    let pattern = cfg.get(x - 1) | cfg.get(x) << 1 | cfg.get(x + 1) << 2 | cfg.get(x + 2) << 3;
    pattern_rate(pattern, params.p(), params.q(), params.eps())
}

/// The 16 local rates, looked up from a 5-site window.
#[derive(Debug, Clone, Copy)]
pub struct RateKernel {
    table: [f64; 16],
}

impl RateKernel {
    pub fn new(params: &ModelParams) -> Self {
        let (p, q, eps) = (params.p(), params.q(), params.eps());
        RateKernel {
            table: std::array::from_fn(|k| pattern_rate(k as u8, p, q, eps)),
        }
    }

    /// Rate of the 0-based bond `(i, i+1)`.
    #[inline]
    pub fn rate(&self, cfg: &Configuration, i: usize) -> f64 {
        self.table[((cfg.window5(i) >> 1) & 0xf) as usize]
    }

    pub fn table(&self) -> &[f64; 16] {
        &self.table
    }
}

/// Per-bond rates with Fenwick prefix sums.
///
/// The tree is padded to a power of two with zero rates so the sampling
/// descent needs no bounds checks.
#[derive(Debug, Clone)]
pub struct RateTable {
    rates: Vec<f64>,
    tree: Vec<f64>,
    total: f64,
    positive: usize,
}

impl RateTable {
    pub fn new(rates: Vec<f64>) -> Self {
        let cap = rates.len().max(1).next_power_of_two();
        let mut t = RateTable {
            tree: vec![0.0; cap + 1],
            rates,
            total: 0.0,
            positive: 0,
        };
        t.rebuild();
        t
    }

    pub fn from_configuration(cfg: &Configuration, kernel: &RateKernel) -> Self {
        Self::new((0..cfg.n()).map(|i| kernel.rate(cfg, i)).collect())
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    #[inline]
    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of bonds with strictly positive rate.
    pub fn positive_bonds(&self) -> usize {
        self.positive
    }

    /// Recompute prefix sums and the total from the stored rates.
    pub fn rebuild(&mut self) {
        let n = self.rates.len();
        let cap = self.tree.len() - 1;
        self.tree.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=cap {
            if i <= n {
                self.tree[i] += self.rates[i - 1];
            }
            let parent = i + (i & i.wrapping_neg());
            if parent <= cap {
                let v = self.tree[i];
                self.tree[parent] += v;
            }
        }
        self.total = self.rates.iter().sum();
        self.positive = self.rates.iter().filter(|&&r| r > 0.0).count();
    }

    #[inline]
    pub fn update(&mut self, i: usize, rate: f64) {
        let old = self.rates[i];
        if old == rate {
            return;
        }
        self.positive = self.positive + (rate > 0.0) as usize - (old > 0.0) as usize;
        self.rates[i] = rate;
        let delta = rate - old;
        self.total += delta;
        let cap = self.tree.len() - 1;
        let mut k = i + 1;
        while k <= cap {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Bond `i` with probability `rate(i) / total` for `u` uniform on `[0, 1)`.
    pub fn sample(&self, u: f64) -> usize {
        let n = self.rates.len();
        let mut target = u * self.total;
        let mut pos = 0usize;
        let mut step = (self.tree.len() - 1) >> 1;
        if step == 0 {
            step = 1;
        }
        while step > 0 {
            let v = self.tree[pos + step];
            let take = v <= target;
            target -= if take { v } else { 0.0 };
            pos += if take { step } else { 0 };
            step >>= 1;
        }
        if pos < n && self.rates[pos] > 0.0 {
            return pos;
        }
        // rounding pushed the target onto a zero-rate bond
        let back = (0..pos.min(n)).rev().find(|&j| self.rates[j] > 0.0);
        back.or_else(|| (pos..n).find(|&j| self.rates[j] > 0.0))
            .expect("sampling from a table without positive rates")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// 1-based bond `(bond, bond + 1)`.
    pub bond: i64,
    pub direction: Direction,
    pub holding_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event(Event),
    Frozen,
}

/// Simulator state; times are in process units, macro time is `micro / n²`.
#[derive(Debug, Clone)]
pub struct SimState {
    cfg: Configuration,
    table: RateTable,
    kernel: RateKernel,
    params: ModelParams,
    micro_time: f64,
    events: u64,
    since_rebuild: u64,
}

impl SimState {
    pub fn new(cfg: Configuration, params: &ModelParams) -> Self {
        assert_eq!(
            cfg.n(),
            params.n(),
            "configuration size differs from the model size"
        );
        let kernel = RateKernel::new(params);
        let table = RateTable::from_configuration(&cfg, &kernel);
        SimState {
            cfg,
            table,
            kernel,
            params: *params,
            micro_time: 0.0,
            events: 0,
            since_rebuild: 0,
        }
    }

    pub fn cfg(&self) -> &Configuration {
        &self.cfg
    }

    pub fn table(&self) -> &RateTable {
        &self.table
    }

    pub fn kernel(&self) -> &RateKernel {
        &self.kernel
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn micro_time(&self) -> f64 {
        self.micro_time
    }

    pub fn macro_time(&self) -> f64 {
        let n = self.params.n() as f64;
        self.micro_time / (n * n)
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn is_frozen(&self) -> bool {
        self.table.positive_bonds() == 0
    }

    /// Largest deviation between stored and recomputed rates.
    pub fn audit(&self) -> f64 {
        (0..self.cfg.n())
            .map(|i| (self.table.rate(i) - self.kernel.rate(&self.cfg, i)).abs())
            .fold(0.0, f64::max)
    }

    fn draw_holding<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        -u.ln() / self.table.total()
    }

    fn draw_bond<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.table.sample(rng.random::<f64>())
    }

    /// Swap the 0-based bond `i` and refresh the five rates it affects.
    fn apply(&mut self, i: usize) {
        let n = self.cfg.n();
        self.cfg.swap_raw(i);
        let mut j = if i >= 2 { i - 2 } else { i + n - 2 };
        for _ in 0..5 {
            let r = self.kernel.rate(&self.cfg, j);
            self.table.update(j, r);
            j = if j + 1 == n { 0 } else { j + 1 };
        }
        self.events += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.table.rebuild();
            self.since_rebuild = 0;
        }
    }

    /// One Gillespie event. A frozen state is left untouched.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        if self.is_frozen() {
            return StepOutcome::Frozen;
        }
        let dt = self.draw_holding(rng);
        let i = self.draw_bond(rng);
        let direction = if self.cfg.bit(i) {
            Direction::Right
        } else {
            Direction::Left
        };
        self.micro_time += dt;
        self.apply(i);
        StepOutcome::Event(Event {
            bond: i as i64 + 1,
            direction,
            holding_time: dt,
        })
    }

    /// Run until micro time `horizon`. The observer sees every holding interval
    /// (the last one cut at the horizon) and every jump.
    pub fn run_until<R: Rng + ?Sized, O: Observer + ?Sized>(
        &mut self,
        horizon: f64,
        rng: &mut R,
        obs: &mut O,
    ) -> bool {
        loop {
            if self.micro_time >= horizon {
                return false;
            }
            if self.is_frozen() {
                obs.interval(self, horizon - self.micro_time);
                self.micro_time = horizon;
                return true;
            }
            let dt = self.draw_holding(rng);
            if self.micro_time + dt >= horizon {
                obs.interval(self, horizon - self.micro_time);
                self.micro_time = horizon;
                return false;
            }
            obs.interval(self, dt);
            self.micro_time += dt;
            let i = self.draw_bond(rng);
            self.apply(i);
            obs.jumped(self, i);
        }
    }
}

/// Hooks called along a trajectory.
pub trait Observer {
    /// The current state is held for `dt` process-time units.
    fn interval(&mut self, state: &SimState, dt: f64);

    /// The 0-based bond `i` has just been swapped.
    fn jumped(&mut self, _state: &SimState, _i: usize) {}
}

impl Observer for () {
    fn interval(&mut self, _: &SimState, _: f64) {}
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn interval(&mut self, state: &SimState, dt: f64) {
        self.0.interval(state, dt);
        self.1.interval(state, dt);
    }

    fn jumped(&mut self, state: &SimState, i: usize) {
        self.0.jumped(state, i);
        self.1.jumped(state, i);
    }
}

impl<T: Observer + ?Sized> Observer for &mut T {
    fn interval(&mut self, state: &SimState, dt: f64) {
        (**self).interval(state, dt);
    }

    fn jumped(&mut self, state: &SimState, i: usize) {
        (**self).jumped(state, i);
    }
}

#[derive(Debug, Clone)]
pub struct SimSummary {
    pub cfg: Configuration,
    pub events: u64,
    pub micro_time: f64,
    /// The trajectory ended on a configuration with no allowed jump.
    pub frozen: bool,
}

/// Run from `cfg0` for macro time `t_macro`.
pub fn simulate<R: Rng + ?Sized, O: Observer + ?Sized>(
    cfg0: &Configuration,
    t_macro: f64,
    params: &ModelParams,
    rng: &mut R,
    obs: &mut O,
) -> SimSummary {
    assert!(t_macro >= 0.0, "negative horizon");
    let n = params.n() as f64;
    let mut state = SimState::new(cfg0.clone(), params);
    let frozen = state.run_until(t_macro * n * n, rng, obs);
    SimSummary {
        events: state.events,
        micro_time: state.micro_time,
        cfg: state.cfg,
        frozen,
    }
}

/// Local function of the sites `-r, ..., r` around site 0 (≡ site n).
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunction {
    radius: usize,
    values: Vec<f64>,
}

impl CylinderFunction {
    /// `values[k]` is the value when bit `j` of `k` equals `η_{j - r}`.
    pub fn new(radius: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << (2 * radius + 1) {
            return Err(Error::InvalidParameter(format!(
                "cylinder function of radius {radius} needs {} values, got {}",
                1usize << (2 * radius + 1),
                values.len()
            )));
        }
        Ok(CylinderFunction { radius, values })
    }

    pub fn from_fn(radius: usize, f: impl Fn(&[u8]) -> f64) -> Self {
        let w = 2 * radius + 1;
        let values = (0..1usize << w)
            .map(|k| {
                let bits: Vec<u8> = (0..w).map(|j| (k >> j & 1) as u8).collect();
                f(&bits)
            })
            .collect();
        CylinderFunction { radius, values }
    }

    pub fn constant(c: f64) -> Self {
        CylinderFunction {
            radius: 0,
            values: vec![c, c],
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn eval(&self, cfg: &Configuration) -> f64 {
        let r = self.radius as i64;
        let mut k = 0usize;
        for (j, y) in (-r..=r).enumerate() {
            k |= (cfg.get(y) as usize) << j;
        }
        self.values[k]
    }
}

/// `ℒf(η) = Σ_x c_{x,x+1}(η) [f(η^{x,x+1}) - f(η)]`.
pub fn generator_apply(f: &CylinderFunction, cfg: &Configuration, params: &ModelParams) -> f64 {
    let kernel = RateKernel::new(params);
    let base = f.eval(cfg);
    let mut swapped = cfg.clone();
    let mut acc = 0.0;
    for i in 0..cfg.n() {
        let c = kernel.rate(cfg, i);
        if c == 0.0 {
            continue;
        }
        swapped.swap_raw(i);
        acc += c * (f.eval(&swapped) - base);
        swapped.swap_raw(i);
    }
    acc
}

fn check_exhaustive(n: usize) -> Result<()> {
    if n > MAX_EXHAUSTIVE {
        Err(Error::TooLarge {
            n,
            max: MAX_EXHAUSTIVE,
        })
    } else {
        Ok(())
    }
}

/// Largest global-balance defect over all configurations, for weights
/// `exp(-x' H)` with an arbitrary `x'`, relative to the largest weight.
pub fn balance_residual_with_weights(params: &ModelParams, weight_interaction: f64) -> Result<f64> {
    let n = params.n();
    check_exhaustive(n)?;
    let kernel = RateKernel::new(params);
    let weight = |c: &Configuration| (-weight_interaction * c.hamiltonian() as f64).exp();
    let mut worst = 0.0f64;
    let mut max_weight = 0.0f64;
    for idx in 0..(1u64 << n) {
        let cfg = Configuration::from_index(n, idx);
        let w = weight(&cfg);
        max_weight = max_weight.max(w);
        let mut defect = 0.0;
        for i in 0..n {
            let mut other = cfg.clone();
            other.swap_raw(i);
            defect += weight(&other) * kernel.rate(&other, i) - w * kernel.rate(&cfg, i);
        }
        worst = worst.max(defect.abs());
    }
    Ok(worst / max_weight)
}

/// Global-balance defect of the Gibbs weights under the dynamics.
pub fn global_balance_residual(params: &ModelParams) -> Result<f64> {
    balance_residual_with_weights(params, params.interaction())
}

fn gibbs_table(params: &ModelParams) -> Result<Vec<f64>> {
    check_exhaustive(params.n())?;
    Ok(crate::gibbs::enumerate_measure(params)?.probs)
}

/// `|Σ_η ν(η) ℒf(η)|`.
pub fn stationarity_residual(f: &CylinderFunction, params: &ModelParams) -> Result<f64> {
    let n = params.n();
    let probs = gibbs_table(params)?;
    let mut acc = 0.0;
    for (idx, p) in probs.iter().enumerate() {
        acc += p * generator_apply(f, &Configuration::from_index(n, idx as u64), params);
    }
    Ok(acc.abs())
}

/// `½ Σ_η ν(η) Σ_x c_{x,x+1}(η) [f(η^{x,x+1}) - f(η)]²`.
pub fn dirichlet_form(f: &CylinderFunction, params: &ModelParams) -> Result<f64> {
    let n = params.n();
    let probs = gibbs_table(params)?;
    let kernel = RateKernel::new(params);
    let mut acc = 0.0;
    for (idx, p) in probs.iter().enumerate() {
        let cfg = Configuration::from_index(n, idx as u64);
        let base = f.eval(&cfg);
        for i in 0..n {
            let c = kernel.rate(&cfg, i);
            if c > 0.0 {
                let d = f.eval(&cfg.swap_bond(i as i64 + 1)) - base;
                acc += p * c * d * d;
            }
        }
    }
    Ok(0.5 * acc)
}

/// `-∫ f ℒf dν`.
pub fn energy_pairing(f: &CylinderFunction, params: &ModelParams) -> Result<f64> {
    let n = params.n();
    let probs = gibbs_table(params)?;
    let mut acc = 0.0;
    for (idx, p) in probs.iter().enumerate() {
        let cfg = Configuration::from_index(n, idx as u64);
        acc += p * f.eval(&cfg) * generator_apply(f, &cfg, params);
    }
    Ok(-acc)
}
