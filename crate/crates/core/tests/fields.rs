use kls_core::dynamics::bond_rate;
use kls_core::fluctuation::*;
use kls_core::gibbs::sample_exact;
use kls_core::*;

struct DirectQv<'a> {
    phi: &'a TestFunction,
    integral: f64,
}

impl Observer for DirectQv<'_> {
    fn interval(&mut self, state: &SimState, dt: f64) {
        let n = state.cfg().n();
        let nf = n as f64;
        let sum: f64 = (1..=n as i64)
            .map(|x| {
                bond_rate(state.cfg(), x, state.params())
                    * self.phi.discrete_gradient(x as f64 / nf, n).powi(2)
            })
            .sum();
        self.integral += sum / nf * dt / (nf * nf);
    }
}

struct DirectBg<'a> {
    f: &'a BgFunctional,
    integral: f64,
}

impl Observer for DirectBg<'_> {
    fn interval(&mut self, state: &SimState, dt: f64) {
        let n = state.cfg().n() as f64;
        self.integral += self.f.eval(state.cfg()) * dt / (n * n);
    }
}

#[test]
fn symmetric_integrals_agree_with_direct_accumulation() {
    let phi = TestFunction::new(vec![
        Mode {
            k: 1,
            cos: 1.0,
            sin: 0.0,
        },
        Mode {
            k: 2,
            cos: 0.0,
            sin: 0.5,
        },
    ]);
    for n in [24usize, 40] {
        let p = ModelParams::new(n, 0.0, 1.0, 1.0).unwrap();
        for seed in 0..4 {
            let cfg = sample_exact(&p, &mut stream_rng(seed, 7));
            let fast = qv_trajectory(cfg.clone(), &p, &phi, 0.4, &mut stream_rng(seed, 0));
            let mut obs = DirectQv {
                phi: &phi,
                integral: 0.0,
            };
            simulate(&cfg, 0.4, &p, &mut stream_rng(seed, 0), &mut obs);
            assert!(
                (fast - obs.integral).abs() <= 1e-10 * obs.integral.abs().max(1.0),
                "qv n={n}"
            );

            for gap in [BgGap::One, BgGap::Two] {
                let f = BgFunctional::new(&p, &phi.derivative(), 3, gap).unwrap();
                let fast = bg_time_integral(cfg.clone(), &p, &f, 0.4, &mut stream_rng(seed, 0));
                let mut obs = DirectBg {
                    f: &f,
                    integral: 0.0,
                };
                simulate(&cfg, 0.4, &p, &mut stream_rng(seed, 0), &mut obs);
                assert!(
                    (fast - obs.integral).abs() <= 1e-10,
                    "bg n={n} {gap:?}: {fast} vs {}",
                    obs.integral
                );
            }
        }
    }
}

#[test]
fn field_frame_is_periodic() {
    let p = ModelParams::new(50, 1.0, 0.75, 1.5).unwrap();
    let cfg = sample_exact(&p, &mut stream_rng(2, 0));
    let phi = TestFunction::new(vec![
        Mode {
            k: 1,
            cos: 0.3,
            sin: 1.0,
        },
        Mode {
            k: 3,
            cos: 1.0,
            sin: 0.0,
        },
    ]);
    let period = 50.0 / p.transport_velocity();
    for t in [0.0, 0.013, 0.4] {
        let a = field_eval(&cfg, t, &phi, &p);
        let b = field_eval(&cfg, t + period.abs(), &phi, &p);
        assert!((a - b).abs() <= 1e-9, "t={t}: {a} vs {b}");
    }
}

#[test]
fn clt_at_moderate_size() {
    let p = ModelParams::new(128, 0.0, 1.0, 1.0).unwrap();
    let r = clt_experiment(&p, &TestFunction::sine(2), 20_000, 4);
    assert!((r.variance - r.predicted_variance).abs() <= 3.0 * r.variance_se);
    assert!(r.ks < r.ks_critical);
}

#[test]
fn ou_predictor_relaxes_by_mode() {
    let c1 = TestFunction::cosine(1);
    let c2 = TestFunction::cosine(2);
    assert!((ou_covariance(&c1, &c1, 0.0) - 0.125).abs() <= 1e-15);
    assert_eq!(ou_covariance(&c1, &c2, 0.0), 0.0);
    assert_eq!(ou_covariance(&c1, &TestFunction::sine(1), 0.3), 0.0);
    let t = 0.07;
    let ratio = ou_covariance(&c2, &c2, t) / ou_covariance(&c1, &c1, t);
    assert!((ratio - (-6.0 * std::f64::consts::PI.powi(2) * t).exp()).abs() <= 1e-12);
}

#[test]
fn ou_experiment_rejects_bad_lags() {
    let p = ModelParams::new(32, 1.0, 0.75, 1.5).unwrap();
    let s = OuSettings {
        lags: vec![0.015],
        window: 0.1,
        spacing: 0.01,
        replicas: 2,
        seed: 1,
    };
    assert!(ou_experiment(&p, 1, &s).is_err());
    let s = OuSettings {
        lags: vec![0.2],
        window: 0.1,
        spacing: 0.01,
        replicas: 2,
        seed: 1,
    };
    assert!(ou_experiment(&p, 1, &s).is_err());
    assert!(ou_experiment(
        &p,
        0,
        &OuSettings {
            lags: vec![0.0],
            ..s
        }
    )
    .is_err());
}

#[test]
fn quadratic_prefactor_tends_to_minus_b() {
    let b = 0.7;
    let errs: Vec<f64> = [64usize, 1024, 16384, 262144]
        .iter()
        .map(|&n| (quadratic_prefactor(&ModelParams::new(n, b, 0.5, 1.0).unwrap()) + b).abs())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    assert!(errs[3] < 1e-5);
}
