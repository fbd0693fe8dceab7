//! Constructive exchange paths through a window that holds a mobile cluster.
//!
//! A pair of particles at distance ≤ 2 (the vehicle) can travel through any
//! content: crossing an empty site costs two nearest-neighbour jumps, crossing an
//! occupied site costs none. Parked next to two sites, it lets them be exchanged
//! with one jump supported by the vehicle itself. Exchanging two distant sites is
//! a bubble of adjacent transpositions performed while the vehicle sweeps the gap
//! twice, after which the vehicle returns to where it started.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Configuration;

/// Length bound `len ≤ PATH_LENGTH_CONSTANT · (ℓ + ℓ₀)` of built paths.
pub const PATH_LENGTH_CONSTANT: usize = 12;
/// No bond is used more often than this along a built path.
pub const MAX_BOND_USAGE: usize = 6;

/// Ordered bond indices; step `i` exchanges sites `bonds[i]` and `bonds[i] + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SwapPath {
    bonds: Vec<i64>,
}

impl SwapPath {
    pub fn bonds(&self) -> &[i64] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    /// Every intermediate configuration, starting with `cfg` itself.
    pub fn trajectory(&self, cfg: &Configuration) -> Vec<Configuration> {
        let mut out = Vec::with_capacity(self.bonds.len() + 1);
        out.push(cfg.clone());
        for &x in &self.bonds {
            let next = out.last().unwrap().swap_bond(x);
            out.push(next);
        }
        out
    }

    pub fn apply(&self, cfg: &Configuration) -> Configuration {
        self.bonds.iter().fold(cfg.clone(), |c, &x| c.swap_bond(x))
    }

    pub fn max_bond_usage(&self) -> usize {
        let mut count: HashMap<i64, usize> = HashMap::new();
        for &b in &self.bonds {
            *count.entry(b).or_default() += 1;
        }
        count.values().copied().max().unwrap_or(0)
    }
}

/// Whether the jump across bond `x` is possible: the two states differ and a
/// particle sits at distance one beyond the bond on either side. For `p, q > 0`
/// and `ε < 1` this is exactly positivity of the jump rate.
pub fn jump_allowed(cfg: &Configuration, x: i64) -> bool {
    cfg.get(x) != cfg.get(x + 1) && (cfg.get(x - 1) == 1 || cfg.get(x + 2) == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Adjacent,
    Spread,
}

#[derive(Debug, Clone, Copy)]
struct Vehicle {
    at: usize,
    shape: Shape,
}

impl Vehicle {
    fn footprint(&self) -> std::ops::RangeInclusive<usize> {
        match self.shape {
            Shape::Adjacent => self.at..=self.at + 1,
            Shape::Spread => self.at..=self.at + 2,
        }
    }
}

/// Window-local state: sites `0..m` with the vehicle parked on `{p, p + 1}`.
struct Engine {
    w: Vec<u8>,
    bonds: Vec<usize>,
    p: usize,
}

impl Engine {
    fn hop(&mut self, i: usize) {
        let w = &self.w;
        debug_assert!(w[i] != w[i + 1]);
        debug_assert!((i > 0 && w[i - 1] == 1) || (i + 2 < w.len() && w[i + 2] == 1));
        self.w.swap(i, i + 1);
        self.bonds.push(i);
    }

    fn step_left(&mut self) {
        let p = self.p;
        if self.w[p - 1] == 0 {
            self.hop(p - 1);
            self.hop(p);
        }
        self.p -= 1;
    }

    fn step_right(&mut self) {
        let p = self.p;
        if self.w[p + 2] == 0 {
            self.hop(p + 1);
            self.hop(p);
        }
        self.p += 1;
    }

    fn move_to(&mut self, target: usize) {
        while self.p > target {
            self.step_left();
        }
        while self.p < target {
            self.step_right();
        }
    }

    /// Exchange the sequence entries `j, j + 1` from cursor `j + 2`.
    fn swap_behind(&mut self, j: usize) {
        self.move_to(j + 2);
        if self.w[j] != self.w[j + 1] {
            self.hop(j);
        }
    }

    /// Exchange the sequence entries `j, j + 1` from cursor `j`.
    fn swap_ahead(&mut self, j: usize) {
        self.move_to(j);
        if self.w[j + 2] != self.w[j + 3] {
            self.hop(j + 2);
        }
    }
}

fn vehicles(w: &[u8]) -> Vec<Vehicle> {
    let m = w.len();
    let mut out = Vec::new();
    for k in 0..m {
        if w[k] == 0 {
            continue;
        }
        if k + 1 < m && w[k + 1] == 1 {
            out.push(Vehicle {
                at: k,
                shape: Shape::Adjacent,
            });
        } else if k + 2 < m && w[k + 2] == 1 {
            out.push(Vehicle {
                at: k,
                shape: Shape::Spread,
            });
        }
    }
    out
}

/// Bonds exchanging window sites `a < b` using vehicle `v`, if within the usage bound.
fn route(w: &[u8], a: usize, b: usize, v: Vehicle) -> Option<Vec<usize>> {
    let m = w.len();
    let right_of = v.at > b;
    let left_of = *v.footprint().end() < a;
    let mut e = Engine {
        w: w.to_vec(),
        bonds: Vec::new(),
        p: v.at,
    };
    let spread_right = v.shape == Shape::Spread && left_of;
    match v.shape {
        Shape::Adjacent => {}
        Shape::Spread if spread_right => {
            e.hop(v.at);
            e.p = v.at + 1;
        }
        Shape::Spread => e.hop(v.at + 1),
    }
    let home = e.p;
    let seq = |s: usize, p: usize| if s < p { s } else { s - 2 };
    let (sa, sb) = (seq(a, home), seq(b, home));
    if sb + 2 >= m {
        return None;
    }
    if right_of || !left_of {
        for j in (sa..sb).rev() {
            e.swap_behind(j);
        }
        for j in sa + 1..sb {
            e.swap_behind(j);
        }
    } else {
        for j in sa..sb {
            e.swap_ahead(j);
        }
        for j in (sa..sb.saturating_sub(1)).rev() {
            e.swap_ahead(j);
        }
    }
    e.move_to(home);
    match v.shape {
        Shape::Adjacent => {}
        Shape::Spread if spread_right => e.hop(v.at),
        Shape::Spread => e.hop(v.at + 1),
    }
    let mut expected = w.to_vec();
    expected.swap(a, b);
    debug_assert_eq!(e.w, expected);
    (e.w == expected && within_bounds(&e.bonds, m)).then_some(e.bonds)
}

/// Search order: clusters right of both targets nearest first, then the rest.
fn route_any(w: &[u8], a: usize, b: usize) -> Option<Vec<usize>> {
    let mut cands: Vec<Vehicle> = vehicles(w)
        .into_iter()
        .filter(|v| !v.footprint().contains(&a) && !v.footprint().contains(&b))
        .collect();
    cands.sort_by_key(|v| (v.at < b, v.at.abs_diff(b)));
    cands.into_iter().find_map(|v| route(w, a, b, v))
}

/// Window contents plus the two sites just outside it, which may support jumps.
struct Window {
    w: Vec<u8>,
    outer: (u8, u8),
}

impl Window {
    fn at(&self, i: isize) -> u8 {
        if i < 0 {
            self.outer.0
        } else if i as usize >= self.w.len() {
            self.outer.1
        } else {
            self.w[i as usize]
        }
    }

    fn hop_ok(&self, i: usize) -> bool {
        let i = i as isize;
        self.at(i) != self.at(i + 1) && (self.at(i - 1) == 1 || self.at(i + 2) == 1)
    }

    fn exchanged(&self, a: usize, b: usize) -> Window {
        let mut w = self.w.clone();
        w.swap(a, b);
        Window {
            w,
            outer: self.outer,
        }
    }

    /// Direct exchange of `a < b`: a single jump, a vehicle route, or a vehicle
    /// route of the exchanged window run backwards.
    fn direct(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        if self.w[a] == self.w[b] {
            return Some(Vec::new());
        }
        if b == a + 1 && self.hop_ok(a) {
            return Some(vec![a]);
        }
        route_any(&self.w, a, b).or_else(|| {
            route_any(&self.exchanged(a, b).w, a, b).map(|mut bonds| {
                bonds.reverse();
                bonds
            })
        })
    }

    /// Exchange of `a < b`, relaying through a third site `d` holding the same
    /// state as one target when no single route applies.
    fn exchange(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        if let Some(p) = self.direct(a, b) {
            return Some(p);
        }
        let m = self.w.len();
        let mut relays: Vec<usize> = (0..m).filter(|&d| d != a && d != b).collect();
        relays.sort_by_key(|&d| d.abs_diff(b).min(d.abs_diff(a)));
        let pair = |u: usize, v: usize| (u.min(v), u.max(v));
        for d in relays {
            // (a b) = (a d)(d b) when d holds the state of b, else (d b)(a d)
            let (first, second) = if self.w[d] == self.w[b] {
                (pair(a, d), pair(d, b))
            } else {
                (pair(d, b), pair(a, d))
            };
            let Some(mut p) = self.direct(first.0, first.1) else {
                continue;
            };
            let Some(q) = self.exchanged(first.0, first.1).direct(second.0, second.1) else {
                continue;
            };
            p.extend(q);
            if within_bounds(&p, m) {
                return Some(p);
            }
        }
        self.search(a, b)
    }

    /// Breadth-first search over window contents, capped at `SEARCH_CAP` states.
    fn search(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let m = self.w.len();
        if m > 64 {
            return None;
        }
        let encode = |w: &[u8]| {
            w.iter()
                .enumerate()
                .fold(0u64, |acc, (i, &v)| acc | (v as u64) << i)
        };
        let start = encode(&self.w);
        let goal = encode(&self.exchanged(a, b).w);
        let mut parent: HashMap<u64, (u64, usize)> = HashMap::from([(start, (start, usize::MAX))]);
        let mut queue = VecDeque::from([start]);
        let mut probe = Window {
            w: self.w.clone(),
            outer: self.outer,
        };
        while let Some(state) = queue.pop_front() {
            if state == goal {
                let mut bonds = Vec::new();
                let mut cur = state;
                while cur != start {
                    let (prev, bond) = parent[&cur];
                    bonds.push(bond);
                    cur = prev;
                }
                bonds.reverse();
                return within_bounds(&bonds, m).then_some(bonds);
            }
            for (i, v) in probe.w.iter_mut().enumerate() {
                *v = (state >> i & 1) as u8;
            }
            for i in 0..m - 1 {
                if probe.hop_ok(i) {
                    let next = state ^ (0b11 << i);
                    if !parent.contains_key(&next) {
                        if parent.len() >= SEARCH_CAP {
                            return None;
                        }
                        parent.insert(next, (state, i));
                        queue.push_back(next);
                    }
                }
            }
        }
        None
    }
}

const SEARCH_CAP: usize = 1 << 20;

fn within_bounds(bonds: &[usize], m: usize) -> bool {
    let mut usage = vec![0usize; m];
    for &i in bonds {
        usage[i] += 1;
    }
    usage.iter().all(|&u| u <= MAX_BOND_USAGE) && bonds.len() <= PATH_LENGTH_CONSTANT * m
}

/// A sequence of positive-rate nearest-neighbour exchanges inside
/// `{x + 1, …, x + ℓ + ℓ₀}` turning `cfg` into `cfg` with sites `x + y` and `x + z`
/// exchanged, given that the box of size `ℓ₀` right of `x + ℓ` is good.
///
/// A vehicle route is tried first, then a relay through a third site, then a
/// bounded breadth-first search over the window. `Error::Unreachable` is returned
/// when none succeeds; this happens for good boxes whose only cluster is anchored
/// at `x + ℓ` and overlaps a target, where no positive-rate path exists at all.
pub fn build_swap_path(
    cfg: &Configuration,
    x: i64,
    y: i64,
    z: i64,
    l: usize,
    l0: usize,
) -> Result<SwapPath> {
    if l == 0 || l0 == 0 {
        return Err(Error::InvalidParameter("box sizes must be positive".into()));
    }
    if !(1..=l as i64).contains(&y) || !(1..=l as i64).contains(&z) {
        return Err(Error::InvalidParameter(format!(
            "offsets {y}, {z} outside 1..={l}"
        )));
    }
    if cfg.n() < 2 * (l + l0) {
        return Err(Error::InvalidParameter(format!(
            "torus of size {} too small for boxes {l} + {l0}",
            cfg.n()
        )));
    }
    if !cfg.is_good_box(x + l as i64, l0) {
        return Err(Error::BadBox {
            x: x + l as i64,
            l0,
        });
    }
    if y == z || cfg.get(x + y) == cfg.get(x + z) {
        return Ok(SwapPath::default());
    }
    let m = l + l0;
    let window = Window {
        w: (0..m as i64).map(|i| cfg.get(x + 1 + i)).collect(),
        outer: (cfg.get(x), cfg.get(x + m as i64 + 1)),
    };
    let (a, b) = ((y.min(z) - 1) as usize, (y.max(z) - 1) as usize);
    let local = window
        .exchange(a, b)
        .ok_or(Error::Unreachable { y: x + y, z: x + z })?;
    let bonds = local
        .into_iter()
        .map(|i| cfg.wrap(x + 1 + i as i64) as i64 + 1)
        .collect();
    Ok(SwapPath { bonds })
}

/// Outcome of checking the path builder over many windows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub l: usize,
    pub l0: usize,
    /// Good windows examined.
    pub windows: usize,
    /// Exchanges for which a path was built and replayed.
    pub paths: usize,
    /// Built paths violating endpoint, positivity, locality, usage or length.
    pub invalid: usize,
    /// Refusals confirmed by exhaustive search of the window.
    pub unreachable_certified: usize,
    /// Refusals that the search could not confirm.
    pub unreachable_unconfirmed: usize,
    /// Certified refusals where a cluster is anchored right of the targets.
    pub unreachable_with_anchor: usize,
    pub max_usage: usize,
    pub max_length: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.invalid == 0
            && self.unreachable_unconfirmed == 0
            && self.unreachable_with_anchor == 0
            && self.max_usage <= MAX_BOND_USAGE
            && self.max_length <= PATH_LENGTH_CONSTANT * (self.l + self.l0)
    }

    fn record(&mut self, cfg: &Configuration, x: i64, y: i64, z: i64, result: Result<SwapPath>) {
        let (l, l0) = (self.l, self.l0);
        match result {
            Ok(path) => {
                self.paths += 1;
                self.max_usage = self.max_usage.max(path.max_bond_usage());
                self.max_length = self.max_length.max(path.len());
                if !path_is_valid(cfg, x, y, z, l, l0, &path) {
                    self.invalid += 1;
                }
            }
            Err(Error::Unreachable { .. }) => {
                match window_reaches(cfg, x, l + l0, &cfg.swap_sites(x + y, x + z)) {
                    Some(false) => {
                        self.unreachable_certified += 1;
                        if cluster_right_of_targets(cfg, x, l, l0).is_some() {
                            self.unreachable_with_anchor += 1;
                        }
                    }
                    _ => self.unreachable_unconfirmed += 1,
                }
            }
            Err(_) => self.invalid += 1,
        }
    }
}

/// Replay check: endpoint, positive rate at every step, steps inside the
/// window, bond usage and length bounds.
pub fn path_is_valid(
    cfg: &Configuration,
    x: i64,
    y: i64,
    z: i64,
    l: usize,
    l0: usize,
    path: &SwapPath,
) -> bool {
    let n = cfg.n() as i64;
    let traj = path.trajectory(cfg);
    let steps_ok = traj.iter().zip(path.bonds()).all(|(c, &bond)| {
        let off = (bond - x - 1).rem_euclid(n);
        jump_allowed(c, bond) && off + 1 < (l + l0) as i64
    });
    steps_ok
        && traj.last() == Some(&cfg.swap_sites(x + y, x + z))
        && path.max_bond_usage() <= MAX_BOND_USAGE
        && path.len() <= PATH_LENGTH_CONSTANT * (l + l0)
}

/// Smallest anchor `x' ≥ x + ℓ + 1` of a mobile cluster lying inside the window
/// `x + 1, …, x + ℓ + ℓ₀`.
pub fn cluster_right_of_targets(cfg: &Configuration, x: i64, l: usize, l0: usize) -> Option<i64> {
    let end = x + (l + l0) as i64;
    (x + l as i64 + 1..end).find(|&a| {
        cfg.get(a) == 1 && (cfg.get(a + 1) == 1 || (a + 2 <= end && cfg.get(a + 2) == 1))
    })
}

/// Whether `target` is reachable from `cfg` by positive-rate jumps across the
/// bonds inside the window; `None` if the search exceeds its state budget.
fn window_reaches(cfg: &Configuration, x: i64, m: usize, target: &Configuration) -> Option<bool> {
    let mut seen = HashSet::from([cfg.clone()]);
    let mut queue = VecDeque::from([cfg.clone()]);
    while let Some(c) = queue.pop_front() {
        if &c == target {
            return Some(true);
        }
        for i in 0..m as i64 - 1 {
            let bond = x + 1 + i;
            if jump_allowed(&c, bond) {
                let d = c.swap_bond(bond);
                if seen.insert(d.clone()) {
                    if seen.len() > SEARCH_CAP {
                        return None;
                    }
                    queue.push_back(d);
                }
            }
        }
    }
    Some(false)
}

fn audit_window(report: &mut AuditReport, cfg: &Configuration, x: i64, pairs: &[(i64, i64)]) {
    report.windows += 1;
    for &(y, z) in pairs {
        let result = build_swap_path(cfg, x, y, z, report.l, report.l0);
        report.record(cfg, x, y, z, result);
    }
}

/// Every good window of length `ℓ + ℓ₀ + 2` (outer sites included) and every
/// pair `y < z`.
pub fn audit_exhaustive(l: usize, l0: usize) -> AuditReport {
    let m = l + l0;
    assert!(
        m + 2 <= 26,
        "exhaustive audit limited to windows of 26 sites"
    );
    let n = 2 * m + 2;
    let pairs: Vec<(i64, i64)> = (1..=l as i64)
        .flat_map(|y| (y + 1..=l as i64).map(move |z| (y, z)))
        .collect();
    let mut report = AuditReport {
        l,
        l0,
        ..Default::default()
    };
    for idx in 0..(1u64 << (m + 2)) {
        let mut cfg = Configuration::empty(n);
        for k in 0..m + 2 {
            cfg.set(k as i64, ((idx >> k) & 1) as u8);
        }
        if cfg.is_good_box(l as i64, l0) {
            audit_window(&mut report, &cfg, 0, &pairs);
        }
    }
    report
}

/// `cases` random good windows with uniform content and a random pair each.
pub fn audit_random<R: Rng + ?Sized>(
    l: usize,
    l0: usize,
    cases: usize,
    rng: &mut R,
) -> AuditReport {
    let m = l + l0;
    let n = 2 * m + 2;
    let mut report = AuditReport {
        l,
        l0,
        ..Default::default()
    };
    while report.windows < cases {
        let mut cfg = Configuration::empty(n);
        for k in 0..m as i64 + 2 {
            cfg.set(k, rng.random_range(0..2));
        }
        if !cfg.is_good_box(l as i64, l0) {
            continue;
        }
        let y = rng.random_range(1..=l as i64);
        let z = rng.random_range(1..=l as i64);
        audit_window(&mut report, &cfg, 0, &[(y, z)]);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(cfg: &Configuration, x: i64, y: i64, z: i64, path: &SwapPath, l: usize, l0: usize) {
        let traj = path.trajectory(cfg);
        for (c, &bond) in traj.iter().zip(path.bonds()) {
            assert!(
                jump_allowed(c, bond),
                "blocked step at bond {bond} from {c}"
            );
            let off = (bond - x - 1).rem_euclid(cfg.n() as i64);
            assert!(off + 1 < (l + l0) as i64, "bond {bond} leaves the window");
        }
        assert_eq!(traj.last().unwrap(), &cfg.swap_sites(x + y, x + z));
        assert!(path.max_bond_usage() <= MAX_BOND_USAGE);
        assert!(path.len() <= PATH_LENGTH_CONSTANT * (l + l0));
    }

    #[test]
    fn figure_two_configuration() {
        let mut bits = vec![0u8; 24];
        bits[..11].copy_from_slice(&[0, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0]);
        let cfg = Configuration::from_bits(&bits);
        let path = build_swap_path(&cfg, 0, 2, 4, 4, 7).unwrap();
        check(&cfg, 0, 2, 4, &path, 4, 7);
        // the cluster leaves from X(η) = 9 and returns there
        assert_eq!(path.bonds()[0], 8);
        assert_eq!(*path.bonds().last().unwrap(), 8);
    }

    #[test]
    fn trivial_exchanges_are_empty() {
        let cfg: Configuration = "0110011000000000".parse().unwrap();
        assert!(build_swap_path(&cfg, 0, 2, 2, 4, 4).unwrap().is_empty());
        assert!(build_swap_path(&cfg, 0, 2, 3, 4, 4).unwrap().is_empty());
    }

    #[test]
    fn bad_box_is_reported() {
        let cfg: Configuration = "0100000010010000".parse().unwrap();
        assert_eq!(
            build_swap_path(&cfg, 0, 1, 2, 4, 4),
            Err(Error::BadBox { x: 4, l0: 4 })
        );
    }

    /// Configurations reachable inside the window by positive-rate jumps.
    fn reachable(cfg: &Configuration, x: i64, m: usize) -> HashSet<Configuration> {
        let mut seen = HashSet::from([cfg.clone()]);
        let mut queue = VecDeque::from([cfg.clone()]);
        while let Some(c) = queue.pop_front() {
            for i in 0..m as i64 - 1 {
                let bond = x + 1 + i;
                if jump_allowed(&c, bond) {
                    let d = c.swap_bond(bond);
                    if seen.insert(d.clone()) {
                        queue.push_back(d);
                    }
                }
            }
        }
        seen
    }

    #[test]
    fn exhaustive_small_windows_against_reachability() {
        for (l, l0) in [(2usize, 2usize), (3, 3), (2, 5), (4, 3)] {
            let m = l + l0;
            let n = 2 * m + 2;
            for idx in 0..(1u64 << (m + 2)) {
                let mut cfg = Configuration::empty(n);
                for k in 0..m + 2 {
                    cfg.set(k as i64, ((idx >> k) & 1) as u8);
                }
                if !cfg.is_good_box(l as i64, l0) {
                    continue;
                }
                let reach = reachable(&cfg, 0, m);
                for y in 1..=l as i64 {
                    for z in y + 1..=l as i64 {
                        match build_swap_path(&cfg, 0, y, z, l, l0) {
                            Ok(p) => check(&cfg, 0, y, z, &p, l, l0),
                            Err(Error::Unreachable { .. }) => {
                                assert!(!reach.contains(&cfg.swap_sites(y, z)), "{cfg} {y} {z}")
                            }
                            Err(e) => panic!("{e}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn audit_small_windows() {
        let r = audit_exhaustive(3, 3);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.unreachable_certified, 10);
        let r = audit_random(8, 8, 2000, &mut crate::dynamics::stream_rng(1, 0));
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.windows, 2000);
    }

    #[test]
    fn random_large_windows() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (l, l0) = (16usize, 16usize);
        let n = 2 * (l + l0) + 2;
        let mut done = 0;
        while done < 5000 {
            let mut cfg = Configuration::empty(n);
            for k in 0..(l + l0) as i64 + 2 {
                cfg.set(k, rng.random_range(0..2));
            }
            if !cfg.is_good_box(l as i64, l0) {
                continue;
            }
            done += 1;
            let y = rng.random_range(1..=l as i64);
            let z = rng.random_range(1..=l as i64);
            let path = build_swap_path(&cfg, 0, y, z, l, l0).unwrap();
            check(&cfg, 0, y, z, &path, l, l0);
        }
    }
}
