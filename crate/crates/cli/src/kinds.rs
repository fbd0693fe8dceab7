//! The experiment catalogue and the evaluation of one grid point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use kls_core::dynamics::global_balance_residual;
use kls_core::fluctuation::{
    bg_error_mc, clt_experiment, empirical_mixing, ou_covariance, ou_experiment, qv_estimate,
    qv_limit, qv_stationary_mean, OuSettings,
};
use kls_core::gibbs::{
    assumption1a_residual, bad_set_probability, enumerate_measure, partition_bruteforce, spectral,
};
use kls_core::path::{audit_exhaustive, audit_random};
use kls_core::stats::total_variation;
use kls_core::{stream_rng, BgGap, BridgeSampler, Configuration, ModelParams, TestFunction};

use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    MeasureCheck,
    BalanceCheck,
    SampleTv,
    Clt,
    Qv,
    BgError,
    Mixing,
    PathAudit,
    Assumption1a,
    BadSet,
    Ou,
    Sweep,
}

pub struct ParamSpec {
    pub name: &'static str,
    pub default: Option<f64>,
    pub integer: bool,
    pub doc: &'static str,
}

const fn req(name: &'static str, integer: bool, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        default: None,
        integer,
        doc,
    }
}

const fn opt(name: &'static str, default: f64, integer: bool, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        default: Some(default),
        integer,
        doc,
    }
}

/// How a sweep turns records into a slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeScale {
    /// `ln estimate` against `ln axis`.
    LogLog,
    /// `log2 estimate` against the axis.
    Log2Linear,
}

pub struct SweepSpec {
    pub axis: &'static str,
    pub scale: SlopeScale,
    pub doc: &'static str,
}

pub struct KindSpec {
    pub summary: &'static str,
    pub grid: Vec<ParamSpec>,
    pub samples: Vec<ParamSpec>,
    pub tolerance: Vec<ParamSpec>,
    pub max_n: Option<usize>,
    pub sweep: Option<SweepSpec>,
}

const ALPHA: ParamSpec = opt("alpha", 1.5, false, "interaction exponent, x = n^-alpha");
const B: ParamSpec = opt("b", 0.0, false, "asymmetry amplitude");
const GAMMA: ParamSpec = opt(
    "gamma",
    1.0,
    false,
    "asymmetry exponent, p - q = b n^-gamma",
);
const N: ParamSpec = req("n", true, "torus size");
const K: ParamSpec = opt("k", 1.0, true, "test function cos(2 pi k u)");
const T: ParamSpec = opt("t", 0.5, false, "macro time horizon");

impl Kind {
    pub const ALL: [Kind; 12] = [
        Kind::MeasureCheck,
        Kind::BalanceCheck,
        Kind::SampleTv,
        Kind::Clt,
        Kind::Qv,
        Kind::BgError,
        Kind::Mixing,
        Kind::PathAudit,
        Kind::Assumption1a,
        Kind::BadSet,
        Kind::Ou,
        Kind::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::MeasureCheck => "measure-check",
            Kind::BalanceCheck => "balance-check",
            Kind::SampleTv => "sample-tv",
            Kind::Clt => "clt",
            Kind::Qv => "qv",
            Kind::BgError => "bg-error",
            Kind::Mixing => "mixing",
            Kind::PathAudit => "path-audit",
            Kind::Assumption1a => "assumption1a",
            Kind::BadSet => "bad-set",
            Kind::Ou => "ou",
            Kind::Sweep => "sweep",
        }
    }

    pub fn spec(self) -> KindSpec {
        match self {
            Kind::MeasureCheck => KindSpec {
                summary: "log partition function, transfer matrix vs enumeration",
                grid: vec![N, ALPHA],
                samples: vec![],
                tolerance: vec![opt("rel", 1e-12, false, "relative error of Z")],
                max_n: Some(kls_core::gibbs::MAX_ENUMERATION),
                sweep: None,
            },
            Kind::BalanceCheck => KindSpec {
                summary: "global balance residual of the Gibbs weights",
                grid: vec![N, B, GAMMA, ALPHA],
                samples: vec![],
                tolerance: vec![opt("residual", 1e-12, false, "scaled residual")],
                max_n: Some(kls_core::dynamics::MAX_EXHAUSTIVE),
                sweep: None,
            },
            Kind::SampleTv => KindSpec {
                summary: "total variation between bridge-sampler draws and the enumerated measure",
                grid: vec![N, ALPHA],
                samples: vec![opt("m", 1e6, true, "number of draws")],
                tolerance: vec![opt("tv", 0.005, false, "largest accepted distance")],
                max_n: Some(kls_core::gibbs::MAX_ENUMERATION),
                sweep: None,
            },
            Kind::Clt => KindSpec {
                summary: "variance of the fixed-time fluctuation field against (1/4)|g|^2",
                grid: vec![N, ALPHA, K],
                samples: vec![opt("m", 1e5, true, "number of exact draws")],
                tolerance: vec![opt("z", 3.0, false, "standard errors")],
                max_n: None,
                sweep: None,
            },
            Kind::Qv => KindSpec {
                summary: "mean quadratic variation of the martingale at b = 0",
                grid: vec![N, ALPHA, T, K],
                samples: vec![opt("m", 64.0, true, "trajectories")],
                tolerance: vec![opt(
                    "z",
                    3.0,
                    false,
                    "standard errors from the exact stationary mean",
                )],
                max_n: None,
                sweep: Some(SweepSpec {
                    axis: "n",
                    scale: SlopeScale::LogLog,
                    doc: "relative deviation from (t/4)|phi'|^2 must decrease (slope < 0)",
                }),
            },
            Kind::BgError => KindSpec {
                summary:
                    "squared time-integrated replacement error of the gap product by box averages",
                grid: vec![
                    N,
                    ALPHA,
                    B,
                    GAMMA,
                    T,
                    K,
                    opt("l", 0.0, true, "box size; 0 selects n/8"),
                    opt("gap", 1.0, true, "1 or 2"),
                ],
                samples: vec![opt("m", 128.0, true, "trajectories")],
                tolerance: vec![opt(
                    "max",
                    f64::INFINITY,
                    false,
                    "largest accepted estimate",
                )],
                max_n: None,
                sweep: Some(SweepSpec {
                    axis: "n",
                    scale: SlopeScale::LogLog,
                    doc: "must decrease (slope < 0)",
                }),
            },
            Kind::Mixing => KindSpec {
                summary: "two-site covariance at separation r from exact draws",
                grid: vec![N, ALPHA, opt("r", 1.0, true, "separation")],
                samples: vec![opt("m", 1e5, true, "number of draws")],
                tolerance: vec![opt(
                    "z",
                    3.0,
                    false,
                    "standard errors from the exact covariance",
                )],
                max_n: None,
                sweep: None,
            },
            Kind::PathAudit => KindSpec {
                summary: "swap-path construction audit over good windows",
                grid: vec![
                    opt("l", 4.0, true, "target range"),
                    opt("l0", 4.0, true, "cluster range"),
                ],
                samples: vec![opt("cases", 0.0, true, "random windows; 0 enumerates all")],
                tolerance: vec![],
                max_n: None,
                sweep: None,
            },
            Kind::Assumption1a => KindSpec {
                summary: "residual of the first-order local expansion",
                grid: vec![N, ALPHA],
                samples: vec![],
                tolerance: vec![opt(
                    "slope",
                    0.1,
                    false,
                    "accepted distance of the sweep slope from -2 alpha",
                )],
                max_n: None,
                sweep: Some(SweepSpec {
                    axis: "n",
                    scale: SlopeScale::LogLog,
                    doc: "slope within tolerance of -2 alpha",
                }),
            },
            Kind::BadSet => KindSpec {
                summary: "probability that a window of length l holds no mobile cluster",
                grid: vec![
                    opt("n", 1024.0, true, "torus size"),
                    ALPHA,
                    req("l", true, "window length"),
                ],
                samples: vec![],
                tolerance: vec![
                    opt("constant", 2.0, false, "C in C 2^-floor(l/3)"),
                    opt(
                        "slope",
                        0.05,
                        false,
                        "sweep log2 slope must be <= -1/3 + slope",
                    ),
                ],
                max_n: None,
                sweep: Some(SweepSpec {
                    axis: "l",
                    scale: SlopeScale::Log2Linear,
                    doc: "log2 slope <= -1/3 + tolerance",
                }),
            },
            Kind::Ou => KindSpec {
                summary: "time covariance of the fluctuation field in the moving frame",
                grid: vec![
                    N,
                    ALPHA,
                    opt("b", 1.0, false, "asymmetry amplitude"),
                    opt("gamma", 0.75, false, "asymmetry exponent"),
                    K,
                    req("lag", false, "macro time lag"),
                ],
                samples: vec![
                    opt("m", 32.0, true, "replicas"),
                    opt("window", 4.0, false, "macro time per replica"),
                    opt("spacing", 0.01, false, "recording grid"),
                ],
                tolerance: vec![opt(
                    "rel",
                    0.15,
                    false,
                    "relative error against the OU predictor",
                )],
                max_n: None,
                sweep: None,
            },
            Kind::Sweep => KindSpec {
                summary: "slope fit over one grid axis of another experiment (set `target`)",
                grid: vec![],
                samples: vec![],
                tolerance: vec![],
                max_n: None,
                sweep: None,
            },
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// Result of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub oracle: Option<f64>,
    pub pass: bool,
    pub samples: Option<u64>,
}

fn model(point: &BTreeMap<String, f64>) -> Result<ModelParams, LabError> {
    let get = |k: &str, d: f64| point.get(k).copied().unwrap_or(d);
    Ok(ModelParams::new(
        point["n"] as usize,
        get("b", 0.0),
        get("gamma", 1.0),
        get("alpha", 1.5),
    )?)
}

fn within(estimate: f64, oracle: f64, se: f64, z: f64) -> bool {
    (estimate - oracle).abs() <= z * se
}

/// Evaluate one grid point with the given seed.
pub fn run_point(
    kind: Kind,
    point: &BTreeMap<String, f64>,
    samples: &BTreeMap<String, f64>,
    tol: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<Measurement, LabError> {
    let m = |k: &str| samples[k] as usize;
    let cosine = || TestFunction::cosine(point["k"] as u32);
    Ok(match kind {
        Kind::MeasureCheck => {
            let p = model(point)?;
            let z = spectral(&p).log_z.exp();
            let brute = partition_bruteforce(&p)?;
            let rel = ((z - brute) / brute).abs();
            Measurement {
                estimate: z,
                std_error: None,
                oracle: Some(brute),
                pass: rel <= tol["rel"],
                samples: None,
            }
        }
        Kind::BalanceCheck => {
            let r = global_balance_residual(&model(point)?)?;
            Measurement {
                estimate: r,
                std_error: None,
                oracle: Some(0.0),
                pass: r <= tol["residual"],
                samples: None,
            }
        }
        Kind::SampleTv => {
            let p = model(point)?;
            let probs = enumerate_measure(&p)?.probs;
            let sampler = BridgeSampler::new(&p);
            let mut rng = stream_rng(seed, 0);
            let mut counts = vec![0u64; probs.len()];
            let mut cfg = Configuration::empty(p.n());
            for _ in 0..m("m") {
                sampler.sample_into(&mut rng, &mut cfg);
                counts[cfg.index() as usize] += 1;
            }
            let tv = total_variation(&counts, &probs);
            Measurement {
                estimate: tv,
                std_error: None,
                oracle: Some(0.0),
                pass: tv <= tol["tv"],
                samples: Some(m("m") as u64),
            }
        }
        Kind::Clt => {
            let r = clt_experiment(&model(point)?, &cosine(), m("m"), seed);
            Measurement {
                estimate: r.variance,
                std_error: Some(r.variance_se),
                oracle: Some(r.predicted_variance),
                pass: within(r.variance, r.predicted_variance, r.variance_se, tol["z"])
                    && r.ks < r.ks_critical,
                samples: Some(r.samples as u64),
            }
        }
        Kind::Qv => {
            let p = ModelParams::new(point["n"] as usize, 0.0, 1.0, point["alpha"])?;
            let phi = cosine();
            let t = point["t"];
            let e = qv_estimate(&p, &phi, t, m("m"), seed);
            let exact = qv_stationary_mean(&p, &phi, t);
            Measurement {
                estimate: e.mean,
                std_error: Some(e.std_error),
                oracle: Some(exact),
                pass: within(e.mean, exact, e.std_error, tol["z"]),
                samples: Some(e.samples as u64),
            }
        }
        Kind::BgError => {
            let p = model(point)?;
            let l = match point["l"] as usize {
                0 => (p.n() / 8).max(1),
                l => l,
            };
            let gap = match point["gap"] as usize {
                1 => BgGap::One,
                2 => BgGap::Two,
                g => return Err(LabError::Config(format!("gap must be 1 or 2, got {g}"))),
            };
            let e = bg_error_mc(&p, &cosine().derivative(), l, gap, point["t"], m("m"), seed)?;
            Measurement {
                estimate: e.mean,
                std_error: Some(e.std_error),
                oracle: None,
                pass: e.mean <= tol["max"],
                samples: Some(e.samples as u64),
            }
        }
        Kind::Mixing => {
            let e = empirical_mixing(&model(point)?, point["r"] as usize, m("m"), seed)?;
            Measurement {
                estimate: e.covariance,
                std_error: Some(e.std_error),
                oracle: Some(e.exact),
                pass: within(e.covariance, e.exact, e.std_error, tol["z"])
                    && e.exact.abs() <= e.bound,
                samples: Some(e.samples as u64),
            }
        }
        Kind::PathAudit => {
            let (l, l0) = (point["l"] as usize, point["l0"] as usize);
            let cases = m("cases");
            let report = if cases == 0 {
                if l + l0 > 24 {
                    return Err(LabError::Config(format!(
                        "exhaustive audit needs l + l0 <= 24, got {}",
                        l + l0
                    )));
                }
                audit_exhaustive(l, l0)
            } else {
                audit_random(l, l0, cases, &mut stream_rng(seed, 0))
            };
            Measurement {
                estimate: (report.invalid
                    + report.unreachable_unconfirmed
                    + report.unreachable_with_anchor) as f64,
                std_error: None,
                oracle: Some(0.0),
                pass: report.passed(),
                samples: Some(report.windows as u64),
            }
        }
        Kind::Assumption1a => {
            let r = assumption1a_residual(&model(point)?);
            Measurement {
                estimate: r,
                std_error: None,
                oracle: None,
                pass: r.is_finite(),
                samples: None,
            }
        }
        Kind::BadSet => {
            let l = point["l"] as usize;
            let v = bad_set_probability(&model(point)?, 1, l)?;
            let reference = 2f64.powi(-((l / 3) as i32));
            Measurement {
                estimate: v,
                std_error: None,
                oracle: Some(reference),
                pass: v <= tol["constant"] * reference,
                samples: None,
            }
        }
        Kind::Ou => {
            let p = model(point)?;
            let lag = point["lag"];
            let settings = OuSettings {
                lags: vec![lag],
                window: samples["window"],
                spacing: samples["spacing"],
                replicas: m("m"),
                seed,
            };
            let e = ou_experiment(&p, point["k"] as u32, &settings)?.remove(0);
            let pred = ou_covariance(&cosine(), &cosine(), lag);
            Measurement {
                estimate: e.mean,
                std_error: Some(e.std_error),
                oracle: Some(pred),
                pass: ((e.mean - pred) / pred).abs() <= tol["rel"],
                samples: Some(e.samples as u64),
            }
        }
        Kind::Sweep => unreachable!("sweeps are resolved to their target"),
    })
}

/// The value a sweep fits for one record.
pub fn sweep_value(kind: Kind, point: &BTreeMap<String, f64>, estimate: f64) -> f64 {
    match kind {
        Kind::Qv => {
            let limit = qv_limit(&TestFunction::cosine(point["k"] as u32), point["t"]);
            (estimate - limit).abs() / limit
        }
        _ => estimate,
    }
}

/// Whether a fitted sweep slope meets the declared decay.
pub fn sweep_pass(
    kind: Kind,
    point: &BTreeMap<String, f64>,
    slope: f64,
    tol: &BTreeMap<String, f64>,
) -> (Option<f64>, bool) {
    match kind {
        Kind::Assumption1a => {
            let expected = -2.0 * point["alpha"];
            (Some(expected), (slope - expected).abs() <= tol["slope"])
        }
        Kind::BadSet => (Some(-1.0 / 3.0), slope <= -1.0 / 3.0 + tol["slope"]),
        _ => (None, slope < 0.0),
    }
}
