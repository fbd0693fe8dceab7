use kls_core::dynamics::{bond_rate, RateKernel, REBUILD_INTERVAL};
use kls_core::gibbs::sample_exact;
use kls_core::stats::mean_se;
use kls_core::*;
use proptest::prelude::*;

fn params(n: usize) -> ModelParams {
    ModelParams::new(n, 1.0, 0.75, 1.0).unwrap()
}

struct Auditor {
    jumps: u64,
    worst: f64,
    worst_total: f64,
}

impl Observer for Auditor {
    fn interval(&mut self, _: &SimState, _: f64) {}

    fn jumped(&mut self, state: &SimState, _: usize) {
        self.jumps += 1;
        if self.jumps % REBUILD_INTERVAL == REBUILD_INTERVAL / 2 {
            self.worst = self.worst.max(state.audit());
            let sum: f64 = (1..=state.cfg().n() as i64)
                .map(|x| bond_rate(state.cfg(), x, state.params()))
                .sum();
            self.worst_total = self
                .worst_total
                .max((state.table().total() - sum).abs() / sum);
        }
    }
}

#[test]
fn rate_table_survives_a_million_events() {
    let p = params(64);
    let mut rng = stream_rng(3, 0);
    let mut state = SimState::new(sample_exact(&p, &mut rng), &p);
    let mut obs = Auditor {
        jumps: 0,
        worst: 0.0,
        worst_total: 0.0,
    };
    while obs.jumps < 1_000_000 {
        let horizon = state.micro_time() + 1000.0;
        state.run_until(horizon, &mut rng, &mut obs);
    }
    assert!(obs.worst <= 1e-12, "{}", obs.worst);
    assert!(obs.worst_total <= 1e-9, "{}", obs.worst_total);
}

#[test]
fn frozen_exactly_when_blocked() {
    for n in 3..=12 {
        let p = params(n);
        for idx in 0..(1u64 << n) {
            let c = Configuration::from_index(n, idx);
            let isolated = (1..=n as i64).all(|x| {
                c.get(x) == 0
                    || (c.get(x + 1) == 0
                        && c.get(x + 2) == 0
                        && c.get(x - 1) == 0
                        && c.get(x - 2) == 0)
            });
            let full = c.particle_count() == n;
            let state = SimState::new(c, &p);
            assert_eq!(state.is_frozen(), isolated || full, "n={n} idx={idx}");
        }
    }
}

#[test]
fn frozen_state_runs_the_clock_out() {
    let p = params(10);
    let cfg = Configuration::from_bits(&[1, 0, 0, 1, 0, 0, 1, 0, 0, 0]);
    let s = simulate(&cfg, 0.3, &p, &mut stream_rng(1, 0), &mut ());
    assert!(s.frozen);
    assert_eq!(s.events, 0);
    assert!((s.micro_time - 30.0).abs() <= 1e-12);
    assert_eq!(s.cfg, cfg);
}

#[test]
fn trajectories_are_reproducible_per_stream() {
    let p = params(32);
    let cfg = sample_exact(&p, &mut stream_rng(9, 99));
    let a = simulate(&cfg, 0.2, &p, &mut stream_rng(9, 0), &mut ());
    let b = simulate(&cfg, 0.2, &p, &mut stream_rng(9, 0), &mut ());
    let c = simulate(&cfg, 0.2, &p, &mut stream_rng(9, 1), &mut ());
    assert_eq!(
        (a.cfg.clone(), a.events, a.micro_time),
        (b.cfg, b.events, b.micro_time)
    );
    assert!(a.cfg != c.cfg || a.events != c.events);
}

struct Thirds {
    horizon: f64,
    elapsed: f64,
    density: [f64; 3],
    pairs: [f64; 3],
}

impl Observer for Thirds {
    fn interval(&mut self, state: &SimState, dt: f64) {
        let cfg = state.cfg();
        let n = cfg.n();
        let mut t = dt;
        while t > 0.0 {
            let k = ((3.0 * self.elapsed / self.horizon) as usize).min(2);
            let end = (k + 1) as f64 * self.horizon / 3.0;
            let piece = if k == 2 { t } else { t.min(end - self.elapsed) }.max(0.0);
            let pairs = (0..n)
                .filter(|&i| cfg.bit(i) && cfg.bit((i + 1) % n))
                .count();
            self.density[k] += cfg.particle_count() as f64 / n as f64 * piece;
            self.pairs[k] += pairs as f64 / n as f64 * piece;
            self.elapsed += piece;
            t -= piece;
            if piece == 0.0 {
                break;
            }
        }
    }
}

#[test]
fn statistics_do_not_drift_from_stationary_starts() {
    let n = 48;
    let p = params(n);
    let horizon = 0.3 * (n * n) as f64;
    let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for r in 0..48 {
        let mut rng = stream_rng(17, r);
        let cfg = sample_exact(&p, &mut rng);
        let mut obs = Thirds {
            horizon,
            elapsed: 0.0,
            density: [0.0; 3],
            pairs: [0.0; 3],
        };
        simulate(&cfg, 0.3, &p, &mut rng, &mut obs);
        let third = horizon / 3.0;
        diffs[0].push((obs.density[2] - obs.density[0]) / third);
        diffs[1].push((obs.density[1] - obs.density[0]) / third);
        diffs[2].push((obs.pairs[2] - obs.pairs[0]) / third);
        diffs[3].push((obs.pairs[1] - obs.pairs[0]) / third);
    }
    for d in &diffs {
        let (m, se) = mean_se(d);
        assert!(m.abs() <= 3.0 * se + 1e-12, "drift {m} ± {se}");
    }
}

proptest! {
    #[test]
    fn rates_commute_with_translation(bits in prop::collection::vec(0u8..2, 5..60), x in 1i64..60, y in -60i64..60) {
        let p = params(bits.len());
        let c = Configuration::from_bits(&bits);
        let shifted = c.translate(y);
        prop_assert_eq!(bond_rate(&shifted, x, &p), bond_rate(&c, x + y, &p));
        let k = RateKernel::new(&p);
        let i = ((x - 1).rem_euclid(bits.len() as i64)) as usize;
        prop_assert_eq!(k.rate(&c, i), bond_rate(&c, x, &p));
        prop_assert!(bond_rate(&c, x, &p) >= 0.0);
    }
}
