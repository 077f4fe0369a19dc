//! Monte Carlo learning-curve harness, rate fitting, and the concentration
//! audit. Excess risks are computed exactly from the distribution (no test
//! set), so the only randomness is the training draw; replication rng
//! streams derive from a counter-based split of (seed, n, rep), and all
//! aggregation uses fixed-shape pairwise summation so results are
//! bit-identical under any parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    self, class_optimal_error, exact_error, pairwise_sum, DiscreteDistribution,
    DEFAULT_TAIL_THRESHOLD,
};
use crate::bounds::{deviation_threshold, ThresholdKind};
use crate::domain::{ConceptClass, Pattern, Point};
use crate::error::{Error, Result};
use crate::learners::{self, LearnerConfig, LearnerKind};
use crate::strategies::SoaPredictor;

/// Deterministic per-replication stream: ChaCha12 keyed by (seed, n, rep).
pub fn rep_rng(seed: u64, n: u64, rep: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&n.to_le_bytes());
    key[16..24].copy_from_slice(&rep.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub mean_excess: f64,
    pub stderr: f64,
    pub reps: u32,
    /// accumulated tail-mass interval width of the exact-risk computations
    pub ci_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveProvenance {
    pub learner: String,
    pub class: ConceptClass,
    pub dist: DiscreteDistribution,
    pub cfg: LearnerConfig,
    pub seed: u64,
    /// how often the staged learners hit their "b-hat absent" branch
    pub early_terminations: u64,
    pub baseline_selections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    pub provenance: Option<CurveProvenance>,
}

/// Exact mean excess risk over `reps` independent replications per sample
/// size: train on an n-draw, subtract the class-optimal risk.
pub fn learning_curve(
    kind: LearnerKind,
    class: &ConceptClass,
    dist: &DiscreteDistribution,
    ns: &[u64],
    reps: u32,
    seed: u64,
    cfg: &LearnerConfig,
) -> Result<LearningCurve> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    if !ns.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("sample sizes must be strictly increasing".into()));
    }
    let opt = class_optimal_error(dist, class)?;
    let mut points = Vec::with_capacity(ns.len());
    let mut early = 0u64;
    let mut chose_baseline = 0u64;
    for &n in ns {
        let runs: Vec<Result<(f64, f64, bool, bool)>> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let run = || -> Result<(f64, f64, bool, bool)> {
                    let mut rng = rep_rng(seed, n, rep);
                    let (sample, _) =
                        adversary::sample(dist, n as usize, &mut rng, DEFAULT_TAIL_THRESHOLD)?;
                    let trained = learners::train(kind, class, &sample, cfg)?;
                    let err = exact_error(dist, &trained.predictor)?;
                    Ok((
                        err.lo - opt.lo,
                        err.width() + opt.width(),
                        trained.report.early_termination,
                        trained.report.chose_baseline,
                    ))
                };
                // abort with the replication coordinates attached
                run().map_err(|e| {
                    Error::InvalidArgument(format!("replication (n={n}, rep={rep}): {e}"))
                })
            })
            .collect();
        let mut excesses = Vec::with_capacity(reps as usize);
        let mut widths = Vec::with_capacity(reps as usize);
        for r in runs {
            let (x, w, e, b) = r?;
            excesses.push(x);
            widths.push(w);
            early += e as u64;
            chose_baseline += b as u64;
        }
        let mean = pairwise_sum(&excesses) / reps as f64;
        let stderr = if reps > 1 {
            let sq: Vec<f64> = excesses.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&sq) / (reps as f64 - 1.0)).sqrt() / (reps as f64).sqrt()
        } else {
            0.0
        };
        points.push(CurvePoint {
            n,
            mean_excess: mean,
            stderr,
            reps,
            ci_tail: pairwise_sum(&widths) / reps as f64,
        });
    }
    Ok(LearningCurve {
        points,
        provenance: Some(CurveProvenance {
            learner: kind.name().into(),
            class: class.clone(),
            dist: dist.clone(),
            cfg: cfg.clone(),
            seed,
            early_terminations: early,
            baseline_selections: chose_baseline,
        }),
    })
}

pub const CURVE_CSV_HEADER: &str = "n,mean_excess,stderr,reps,ci_tail";

pub fn curve_to_csv(curve: &LearningCurve) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.n, p.mean_excess, p.stderr, p.reps, p.ci_tail
        ));
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<LearningCurve> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    if header.trim() != CURVE_CSV_HEADER {
        return Err(Error::Parse(format!("unexpected csv header: {header}")));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("line {}: expected 5 fields", i + 2)));
        }
        let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
        points.push(CurvePoint {
            n: fields[0].trim().parse().map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?,
            mean_excess: parse_f(fields[1])?,
            stderr: parse_f(fields[2])?,
            reps: fields[3].trim().parse().map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?,
            ci_tail: parse_f(fields[4])?,
        });
    }
    Ok(LearningCurve { points, provenance: None })
}

/// One least-squares fit in transformed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// exponential: ln y = a - c n; power: ln y = a - c ln n
    pub family: FitFamily,
    pub a: f64,
    pub c: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    Exponential,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitReport {
    pub exponential: RateFit,
    pub power: RateFit,
    pub best: FitFamily,
    /// sqrt(n)·excess trend sequence (one entry per curve point)
    pub sqrt_n_diagnostic: Vec<f64>,
}

/// Least-squares fits of both rate families on the positive curve points,
/// plus the sqrt(n)-scaled diagnostic sequence.
pub fn fit_rate(curve: &LearningCurve) -> Result<RateFitReport> {
    let pos: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.mean_excess > 0.0)
        .map(|p| (p.n as f64, p.mean_excess))
        .collect();
    if pos.len() < 3 {
        return Err(Error::TooFewPoints(pos.len()));
    }
    let fit = |xs: Vec<f64>, ys: Vec<f64>, family: FitFamily| -> RateFit {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let a = my - slope * mx;
        let ss_res: f64 =
            xs.iter().zip(&ys).map(|(x, y)| (y - (a + slope * x)).powi(2)).sum();
        let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        RateFit { family, a, c: -slope, r_squared: r2 }
    };
    let lny: Vec<f64> = pos.iter().map(|&(_, y)| y.ln()).collect();
    let exponential = fit(pos.iter().map(|&(x, _)| x).collect(), lny.clone(), FitFamily::Exponential);
    let power = fit(pos.iter().map(|&(x, _)| x.ln()).collect(), lny, FitFamily::Power);
    let best = if exponential.r_squared >= power.r_squared {
        FitFamily::Exponential
    } else {
        FitFamily::Power
    };
    let sqrt_n_diagnostic = curve
        .points
        .iter()
        .map(|p| (p.n as f64).sqrt() * p.mean_excess)
        .collect();
    Ok(RateFitReport { exponential, power, best, sqrt_n_diagnostic })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: u64,
    pub psi_n: u64,
    pub b_cap: usize,
    pub trials: u32,
    pub failures: u32,
    pub failure_rate: f64,
    /// theoretical ceiling e^(-psi(n))
    pub ceiling: f64,
    /// one-sided binomial slack sqrt(ceiling (1 - ceiling) / trials)
    pub sigma: f64,
    pub upper: f64,
}

/// Audit the committee concentration event: across trials, the fraction in
/// which ANY (b <= cap, i, relabeling) has
/// `|er_hat_S1(h) - er_P(h)| > sqrt(3 (psi(n) + b + ln n)/n)`.
pub fn audit_concentration(
    class: &ConceptClass,
    dist: &DiscreteDistribution,
    n: u64,
    psi: crate::learners::PsiFn,
    trials: u32,
    seed: u64,
    b_cap: usize,
    cfg: &LearnerConfig,
) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let n_eff = 3 * (n / 3);
    if n_eff < 3 {
        return Err(Error::InvalidArgument("audit needs n >= 3".into()));
    }
    let psi_n = psi.value(n_eff);
    let b_cap = b_cap.min(n_eff as usize / 3);
    let outcomes: Vec<Result<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rep_rng(seed, n_eff, trial);
            let (sample, _) =
                adversary::sample(dist, n_eff as usize, &mut rng, DEFAULT_TAIL_THRESHOLD)?;
            let third = n_eff as usize / 3;
            let s0 = sample.slice(0..third);
            let s1 = sample.slice(third..2 * third);
            let base = SoaPredictor::new(class.clone(), cfg.soa);
            for b in 1..=b_cap {
                let thr = deviation_threshold(
                    ThresholdKind::ExpGoodI { b_prime: b as u64 },
                    n_eff as f64,
                    psi_n,
                ) / 2.0; // the event E2 bound is sqrt(3(psi+b+ln n)/n), half of GoodI's
                for i in 1..=third / b {
                    let batch = s0.slice((i - 1) * b..i * b);
                    for mask in 0u64..(1u64 << b) {
                        let y = Pattern((0..b).map(|j| (mask >> (b - 1 - j)) & 1 == 1).collect());
                        let h = base.fork_trained(&batch.relabel(&y))?;
                        let mut errs = 0usize;
                        for &(x, yy) in &s1.pairs {
                            errs += (h.predict(x)? != yy) as usize;
                        }
                        let er_hat = errs as f64 / s1.len() as f64;
                        let er_p = crate::adversary::exact_error_fn(dist, |x| h.predict(x))?.lo;
                        if (er_hat - er_p).abs() > thr {
                            return Ok(true);
                        }
                    }
                }
            }
            Ok(false)
        })
        .collect();
    let mut failures = 0u32;
    for o in outcomes {
        failures += o? as u32;
    }
    let failure_rate = failures as f64 / trials as f64;
    let ceiling = (-(psi_n as f64)).exp();
    let sigma = (ceiling * (1.0 - ceiling) / trials as f64).sqrt();
    Ok(AuditReport {
        n: n_eff,
        psi_n,
        b_cap,
        trials,
        failures,
        failure_rate,
        ceiling,
        sigma,
        upper: ceiling + 3.0 * sigma,
    })
}

/// Test-only "learner": the Bayes rule of the distribution as a predictor.
pub fn bayes_shim(dist: &DiscreteDistribution) -> crate::learners::Predictor {
    let mut entries: Vec<(Point, bool)> = dist.bayes_labels();
    entries.sort_unstable_by_key(|&(p, _)| p);
    crate::learners::Predictor::Table { entries, default: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{finite_lb_pair, Atom};
    use crate::learners::PsiFn;

    fn two_class() -> ConceptClass {
        ConceptClass::FiniteTable { domain: vec![Point(1)], hyps: vec![vec![0], vec![1]] }
    }

    #[test]
    fn curve_is_seed_deterministic_and_thread_invariant() {
        let class = two_class();
        let (p0, _) = finite_lb_pair(&class, 4).unwrap();
        let cfg = LearnerConfig::default();
        let a = learning_curve(LearnerKind::Erm, &class, &p0, &[6, 12], 40, 7, &cfg).unwrap();
        let b = learning_curve(LearnerKind::Erm, &class, &p0, &[6, 12], 40, 7, &cfg).unwrap();
        assert_eq!(a.points, b.points);
        // single-threaded pool must give identical bytes
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool
            .install(|| learning_curve(LearnerKind::Erm, &class, &p0, &[6, 12], 40, 7, &cfg))
            .unwrap();
        assert_eq!(a.points, c.points);
        let d = learning_curve(LearnerKind::Erm, &class, &p0, &[6, 12], 40, 8, &cfg).unwrap();
        assert_ne!(a.points, d.points);
    }

    #[test]
    fn erm_curve_is_nonincreasing_within_noise() {
        let class = two_class();
        let (p0, _) = finite_lb_pair(&class, 4).unwrap();
        let cfg = LearnerConfig::default();
        let curve =
            learning_curve(LearnerKind::Erm, &class, &p0, &[5, 10, 20], 200, 3, &cfg).unwrap();
        for w in curve.points.windows(2) {
            assert!(
                w[1].mean_excess <= w[0].mean_excess + 2.0 * (w[0].stderr + w[1].stderr),
                "{:?}",
                curve.points
            );
        }
    }

    #[test]
    fn bayes_shim_has_zero_excess() {
        let dist = DiscreteDistribution::new(
            vec![
                Atom { x: Point(1), p: 0.4, eta: 0.8 },
                Atom { x: Point(2), p: 0.6, eta: 0.3 },
            ],
            0.0,
        )
        .unwrap();
        let shim = bayes_shim(&dist);
        let e = exact_error(&dist, &shim).unwrap();
        assert!((e.lo - dist.bayes_error_lo()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let class = two_class();
        let (p0, _) = finite_lb_pair(&class, 4).unwrap();
        let cfg = LearnerConfig::default();
        let curve =
            learning_curve(LearnerKind::Erm, &class, &p0, &[5, 9, 14], 33, 11, &cfg).unwrap();
        let csv = curve_to_csv(&curve);
        assert!(csv.starts_with("n,mean_excess,stderr,reps,ci_tail\n"));
        let back = curve_from_csv(&csv).unwrap();
        assert_eq!(back.points, curve.points);
    }

    #[test]
    fn fit_rate_recovers_synthetic_families() {
        // y = e^{-0.5 n}
        let mk = |pts: Vec<(u64, f64)>| LearningCurve {
            points: pts
                .into_iter()
                .map(|(n, y)| CurvePoint { n, mean_excess: y, stderr: 0.0, reps: 1, ci_tail: 0.0 })
                .collect(),
            provenance: None,
        };
        let exp_curve =
            mk((1..=8).map(|n| (n, (-0.5 * n as f64).exp())).collect());
        let fit = fit_rate(&exp_curve).unwrap();
        assert_eq!(fit.best, FitFamily::Exponential);
        assert!((fit.exponential.c - 0.5).abs() < 1e-9);
        assert!(fit.exponential.r_squared > 0.999);

        let pow_curve = mk((1..=8).map(|n| (n * 3, 1.0 / (3.0 * n as f64))).collect());
        let fit = fit_rate(&pow_curve).unwrap();
        assert_eq!(fit.best, FitFamily::Power);
        assert!((fit.power.c - 1.0).abs() < 1e-9);

        let flat = mk((1..=5).map(|n| (n, 0.25)).collect());
        let fit = fit_rate(&flat).unwrap();
        assert!(fit.exponential.c.abs() < 1e-12 && fit.power.c.abs() < 1e-12);

        let sparse = mk(vec![(1, 0.5), (2, 0.0), (3, 0.0)]);
        assert!(matches!(fit_rate(&sparse), Err(Error::TooFewPoints(1))));
    }

    #[test]
    fn audit_deterministic_dist_never_fails() {
        // single deterministic atom: every empirical error equals er_P exactly
        let dist =
            DiscreteDistribution::new(vec![Atom { x: Point(5), p: 1.0, eta: 1.0 }], 0.0).unwrap();
        let cfg = LearnerConfig::default();
        let report = audit_concentration(
            &ConceptClass::ThresholdNat,
            &dist,
            24,
            PsiFn::Sqrt,
            20,
            5,
            3,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.failures, 0);
        assert!(matches!(
            audit_concentration(&two_class(), &dist, 24, PsiFn::Sqrt, 0, 5, 3, &cfg),
            Err(Error::InvalidArgument(_))
        ));
    }
}
