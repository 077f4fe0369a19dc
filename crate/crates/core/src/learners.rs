//! The four end-to-end learners: finite-class ERM, the memorizing baseline,
//! the near-exponential-rate learner, and the super-root-rate learner.
//!
//! Both staged learners share the same skeleton: split the sample, train a
//! grid of batch predictors on relabelings of the first chunk, select a batch
//! size whose candidates are not verifiably worse than any larger batch size,
//! aggregate by majority vote, and fall back to the baseline when the
//! held-out comparison (or the batch-size selection itself) says so.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{deviation_threshold, ThresholdKind};
use crate::domain::{ConceptClass, HypId, LabeledSample, Pattern, Point};
use crate::error::{Error, Result};
use crate::partial::{
    induce_partial_class_budgeted, partial_project_budgeted, term_predict_budgeted, PartialBudget,
    PartialClass,
};
use crate::strategies::{SoaBudgets, SoaPredictor};

/// Rate-function descriptors for the target `psi(n) = o(n)`, lifted to
/// `psi(n) >= ceil(sqrt(n))` so the near-exponential guarantee applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiFn {
    Sqrt,
    Power { a: f64 },
    LogPoly { p: f64 },
}

impl PsiFn {
    pub fn value(&self, n: u64) -> u64 {
        let sqrt_floor = (n as f64).sqrt() as u64;
        let sqrt_floor = if (sqrt_floor + 1) * (sqrt_floor + 1) <= n { sqrt_floor + 1 } else { sqrt_floor };
        let sqrt_ceil = sqrt_floor + u64::from(sqrt_floor * sqrt_floor != n);
        let raw = match self {
            PsiFn::Sqrt => return sqrt_ceil,
            PsiFn::Power { a } => (n as f64).powf(*a).ceil() as u64,
            PsiFn::LogPoly { p } => crate::bounds::paper_log(n as f64).powf(*p).ceil() as u64,
        };
        raw.max(sqrt_ceil)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsiFn::Sqrt => Ok(()),
            PsiFn::Power { a } => {
                if *a > 0.0 && *a < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("psi power exponent {a} must lie in (0,1)")))
                }
            }
            PsiFn::LogPoly { p } => {
                if *p > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("psi log-poly degree must be positive".into()))
                }
            }
        }
    }
}

/// Learner configuration: the rate target, enumeration caps, and the budgets
/// of the underlying recursions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub psi: PsiFn,
    pub b_cap_exp: usize,
    pub b_cap_vcl: usize,
    pub soa: SoaBudgets,
    pub partial: PartialBudget,
    /// provenance tag describing how per-replication rng streams derive
    pub seed_policy: String,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            psi: PsiFn::Sqrt,
            b_cap_exp: 12,
            b_cap_vcl: 10,
            soa: SoaBudgets::default(),
            partial: PartialBudget::default(),
            seed_policy: "chacha12(seed,n,rep)".into(),
        }
    }
}

/// A trained classifier in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Hypothesis { class: ConceptClass, hyp: HypId },
    Table { entries: Vec<(Point, bool)>, default: bool },
    Soa { predictor: SoaPredictor },
    Majority { members: Vec<Predictor> },
    Term { class: PartialClass, sample: LabeledSample, budget: PartialBudget },
    Constant { label: bool },
}

impl Predictor {
    pub fn constant(label: bool) -> Predictor {
        Predictor::Constant { label }
    }

    pub fn evaluate(&self, x: Point) -> Result<bool> {
        match self {
            Predictor::Hypothesis { class, hyp } => class.evaluate(*hyp, x),
            Predictor::Table { entries, default } => Ok(entries
                .binary_search_by_key(&x, |&(p, _)| p)
                .map(|i| entries[i].1)
                .unwrap_or(*default)),
            Predictor::Soa { predictor } => predictor.predict(x),
            Predictor::Majority { members } => {
                let mut votes = 0usize;
                for m in members {
                    votes += m.evaluate(x)? as usize;
                }
                Ok(2 * votes >= members.len())
            }
            Predictor::Term { class, sample, budget } => {
                term_predict_budgeted(class, sample, x, budget)
            }
            Predictor::Constant { label } => Ok(*label),
        }
    }

    pub fn empirical_error(&self, sample: &LabeledSample) -> Result<usize> {
        let mut errs = 0usize;
        for &(x, y) in &sample.pairs {
            errs += (self.evaluate(x)? != y) as usize;
        }
        Ok(errs)
    }
}

/// Run report of a staged learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerReport {
    pub n_effective: usize,
    pub b_cap: usize,
    pub b_hat: Option<usize>,
    /// the batch-size selection found no admissible b (falls back to h0)
    pub early_termination: bool,
    /// the final held-out comparison (or early termination) picked the baseline
    pub chose_baseline: bool,
}

impl LearnerReport {
    fn plain(n: usize) -> LearnerReport {
        LearnerReport {
            n_effective: n,
            b_cap: 0,
            b_hat: None,
            early_termination: false,
            chose_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLearner {
    pub predictor: Predictor,
    pub report: LearnerReport,
}

/// Empirical risk minimization over an explicit finite class; ties go to the
/// lowest hypothesis index.
pub fn erm_finite(class: &ConceptClass, sample: &LabeledSample) -> Result<Predictor> {
    let ConceptClass::FiniteTable { hyps, .. } = class else {
        return Err(Error::Incompatible("erm_finite needs a finite_table class".into()));
    };
    let mut best: Option<(usize, usize)> = None; // (errors, row)
    for (row, _) in hyps.iter().enumerate() {
        let p = Predictor::Hypothesis { class: class.clone(), hyp: HypId(row as u64) };
        let errs = p.empirical_error(sample)?;
        if best.map_or(true, |(be, _)| errs < be) {
            best = Some((errs, row));
        }
    }
    let (_, row) = best.expect("finite_table has >= 1 hypothesis");
    Ok(Predictor::Hypothesis { class: class.clone(), hyp: HypId(row as u64) })
}

/// Per-point majority of observed labels (ties to 0), default 0 on unseen
/// points. Universally Bayes-consistent on the countable discrete domains in
/// scope.
pub fn memorize_baseline(sample: &LabeledSample) -> Predictor {
    let mut counts: HashMap<Point, (usize, usize)> = HashMap::new();
    for &(x, y) in &sample.pairs {
        let c = counts.entry(x).or_insert((0, 0));
        if y {
            c.1 += 1;
        } else {
            c.0 += 1;
        }
    }
    let mut entries: Vec<(Point, bool)> =
        counts.into_iter().map(|(x, (zeros, ones))| (x, ones > zeros)).collect();
    entries.sort_unstable_by_key(|&(p, _)| p);
    Predictor::Table { entries, default: false }
}

fn thirds(sample: &LabeledSample) -> Result<(usize, LabeledSample, LabeledSample, LabeledSample)> {
    let n = 3 * (sample.len() / 3);
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "learner needs n >= 3, got {}",
            sample.len()
        )));
    }
    let third = n / 3;
    Ok((n, sample.slice(0..third), sample.slice(third..2 * third), sample.slice(2 * third..n)))
}

fn quarters(
    sample: &LabeledSample,
) -> Result<(usize, LabeledSample, LabeledSample, LabeledSample, LabeledSample)> {
    let n = 4 * (sample.len() / 4);
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "learner needs n >= 4, got {}",
            sample.len()
        )));
    }
    let q = n / 4;
    Ok((
        n,
        sample.slice(0..q),
        sample.slice(q..2 * q),
        sample.slice(2 * q..3 * q),
        sample.slice(3 * q..n),
    ))
}

/// The near-exponential-rate learner: SOA committees over all relabeled
/// batches, batch size selected by held-out comparisons at threshold
/// `2*sqrt(3(psi(n)+b'+ln n)/n)`, final baseline comparison at
/// `sqrt(6 psi(n)/n)`.
pub fn exp_rate_learner(
    class: &ConceptClass,
    sample: &LabeledSample,
    cfg: &LearnerConfig,
) -> Result<TrainedLearner> {
    cfg.psi.validate()?;
    let (n, s0, s1, s2) = thirds(sample)?;
    let psi_n = cfg.psi.value(n as u64);
    let b_cap = cfg.b_cap_exp.min(n / 3);
    let third = n / 3;

    // committee training: for every batch, the relabeling with least held-out
    // error (ties to the lexicographically least relabeling)
    let mut picked: Vec<Vec<(Predictor, usize)>> = Vec::with_capacity(b_cap); // [b-1][i-1] -> (h_{b,i}, err_count)
    let base = SoaPredictor::new(class.clone(), cfg.soa);
    for b in 1..=b_cap {
        let i_count = third / b;
        let mut row = Vec::with_capacity(i_count);
        for i in 1..=i_count {
            let batch = s0.slice((i - 1) * b..i * b);
            let mut best: Option<(usize, SoaPredictor)> = None;
            let mut err_cache: HashMap<(Vec<(Point, bool)>, bool), usize> = HashMap::new();
            for mask in 0u64..(1u64 << b) {
                let y = Pattern((0..b).map(|j| (mask >> (b - 1 - j)) & 1 == 1).collect());
                let trained = base
                    .fork_trained(&batch.relabel(&y))
                    .map_err(|e| Error::LearnerBatch { b, i, msg: e.to_string() })?;
                let key = (trained.history().pairs.clone(), trained.off_manifold());
                let errs = match err_cache.get(&key) {
                    Some(&e) => e,
                    None => {
                        let mut e = 0usize;
                        for &(x, yy) in &s1.pairs {
                            e += (trained.predict(x)? != yy) as usize;
                        }
                        err_cache.insert(key, e);
                        e
                    }
                };
                if best.as_ref().map_or(true, |(be, _)| errs < *be) {
                    best = Some((errs, trained));
                }
            }
            let (errs, h) = best.expect("at least one relabeling");
            row.push((Predictor::Soa { predictor: h }, errs));
        }
        picked.push(row);
    }

    // batch-size selection
    let s1_len = s1.len() as f64;
    let mut b_hat: Option<usize> = None;
    for b in 1..=b_cap {
        let i_count = picked[b - 1].len();
        let mut good = 0usize;
        for (_, err_bi) in &picked[b - 1] {
            let mut ok = true;
            'cmp: for b_prime in b + 1..=b_cap {
                let thr = deviation_threshold(
                    ThresholdKind::ExpGoodI { b_prime: b_prime as u64 },
                    n as f64,
                    psi_n,
                );
                for (_, err_bpip) in &picked[b_prime - 1] {
                    if *err_bi as f64 > *err_bpip as f64 + thr * s1_len {
                        ok = false;
                        break 'cmp;
                    }
                }
            }
            good += ok as usize;
        }
        if 10 * good >= 9 * i_count {
            b_hat = Some(b);
            break;
        }
    }

    let h0 = memorize_baseline(&s0);
    let mut report = LearnerReport {
        n_effective: n,
        b_cap,
        b_hat,
        early_termination: b_hat.is_none(),
        chose_baseline: false,
    };
    let Some(bh) = b_hat else {
        report.chose_baseline = true;
        return Ok(TrainedLearner { predictor: h0, report });
    };
    let members: Vec<Predictor> = picked[bh - 1].iter().map(|(p, _)| p.clone()).collect();
    let h1 = Predictor::Majority { members };

    let thr = deviation_threshold(ThresholdKind::ExpFinal, n as f64, psi_n);
    let e1 = h1.empirical_error(&s2)? as f64;
    let e0 = h0.empirical_error(&s2)? as f64;
    if e1 <= e0 + thr * s2.len() as f64 {
        Ok(TrainedLearner { predictor: h1, report })
    } else {
        report.chose_baseline = true;
        Ok(TrainedLearner { predictor: h0, report })
    }
}

/// The super-root-rate learner: induced partial classes over all batches,
/// batch size selected by minimum-fit comparisons at threshold
/// `8*sqrt(b'·log(n)/n)`, transductive-ERM committee trained on the third
/// quarter, final baseline comparison at `sqrt(32 ln(n)/n)`.
pub fn super_root_learner(
    class: &ConceptClass,
    sample: &LabeledSample,
    cfg: &LearnerConfig,
) -> Result<TrainedLearner> {
    let (n, s0, s1, s2, s3) = quarters(sample)?;
    let b_cap = cfg.b_cap_vcl.min(n / 4);
    let quarter = n / 4;
    let s1_points = s1.points();

    // G_{b,i} per batch; the surrogate's projection depends only on the
    // pattern arity, so cache the held-out minimum fit per k
    struct Cand {
        g: Arc<PartialClass>,
        min_err: Option<usize>, // None = empty projection
    }
    let mut grid: Vec<Option<Vec<Cand>>> = Vec::with_capacity(b_cap); // [b-1], None = surrogate undefined at b
    let mut fit_by_k: HashMap<usize, Option<usize>> = HashMap::new();
    for b in 1..=b_cap {
        // the pattern-avoidance surrogate needs VC < b
        if class.vc_dimension(b)?.saturated {
            grid.push(None);
            continue;
        }
        let i_count = quarter / b;
        let mut row = Vec::with_capacity(i_count);
        for i in 1..=i_count {
            let batch = s0.slice((i - 1) * b..i * b);
            let g = induce_partial_class_budgeted(class, &batch, &cfg.partial)
                .map_err(|e| Error::LearnerBatch { b, i, msg: e.to_string() })?;
            let k = g.components()[0].k();
            let min_err = match fit_by_k.get(&k) {
                Some(&v) => v,
                None => {
                    let pats = partial_project_budgeted(&g, &s1_points, &cfg.partial)
                        .map_err(|e| Error::LearnerBatch { b, i, msg: e.to_string() })?;
                    let v = pats
                        .iter()
                        .map(|p| {
                            p.0.iter()
                                .zip(&s1.pairs)
                                .filter(|(&bit, &(_, y))| bit != y)
                                .count()
                        })
                        .min();
                    fit_by_k.insert(k, v);
                    v
                }
            };
            row.push(Cand { g: Arc::new(g), min_err });
        }
        grid.push(Some(row));
    }

    // batch-size selection over the b values where the surrogate exists
    let psi_n = cfg.psi.value(n as u64);
    let s1_len = s1.len() as f64;
    let mut b_hat: Option<usize> = None;
    for b in 1..=b_cap {
        let Some(row) = &grid[b - 1] else { continue };
        let mut good = 0usize;
        for cand in row {
            let Some(err_bi) = cand.min_err else { continue };
            let mut ok = true;
            'cmp: for b_prime in b + 1..=b_cap {
                let Some(row_p) = &grid[b_prime - 1] else { continue };
                let thr = deviation_threshold(
                    ThresholdKind::VclGoodI { b_prime: b_prime as u64 },
                    n as f64,
                    psi_n,
                );
                for cand_p in row_p {
                    let Some(err_p) = cand_p.min_err else { continue };
                    if err_bi as f64 > err_p as f64 + thr * s1_len {
                        ok = false;
                        break 'cmp;
                    }
                }
            }
            good += ok as usize;
        }
        if 10 * good >= 9 * row.len() {
            b_hat = Some(b);
            break;
        }
    }

    let h0 = memorize_baseline(&s0);
    let mut report = LearnerReport {
        n_effective: n,
        b_cap,
        b_hat,
        early_termination: b_hat.is_none(),
        chose_baseline: false,
    };
    let Some(bh) = b_hat else {
        report.chose_baseline = true;
        return Ok(TrainedLearner { predictor: h0, report });
    };
    let members: Vec<Predictor> = grid[bh - 1]
        .as_ref()
        .expect("selected b has candidates")
        .iter()
        .map(|c| Predictor::Term {
            class: (*c.g).clone(),
            sample: s2.clone(),
            budget: cfg.partial,
        })
        .collect();
    let h1 = Predictor::Majority { members };

    let thr = deviation_threshold(ThresholdKind::VclFinal, n as f64, psi_n);
    let e1 = h1.empirical_error(&s3)? as f64;
    let e0 = h0.empirical_error(&s3)? as f64;
    if e1 <= e0 + thr * s3.len() as f64 {
        Ok(TrainedLearner { predictor: h1, report })
    } else {
        report.chose_baseline = true;
        Ok(TrainedLearner { predictor: h0, report })
    }
}

/// Learner selector for the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Erm,
    Baseline,
    Exp,
    VclRoot,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Erm => "erm",
            LearnerKind::Baseline => "baseline",
            LearnerKind::Exp => "exp",
            LearnerKind::VclRoot => "vclroot",
        }
    }
}

pub fn train(
    kind: LearnerKind,
    class: &ConceptClass,
    sample: &LabeledSample,
    cfg: &LearnerConfig,
) -> Result<TrainedLearner> {
    match kind {
        LearnerKind::Erm => Ok(TrainedLearner {
            predictor: erm_finite(class, sample)?,
            report: LearnerReport::plain(sample.len()),
        }),
        LearnerKind::Baseline => Ok(TrainedLearner {
            predictor: memorize_baseline(sample),
            report: LearnerReport::plain(sample.len()),
        }),
        LearnerKind::Exp => exp_rate_learner(class, sample, cfg),
        LearnerKind::VclRoot => super_root_learner(class, sample, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(pairs: &[(u64, u8)]) -> LabeledSample {
        LabeledSample::new(pairs.iter().map(|&(x, y)| (Point(x), y == 1)).collect())
    }

    fn tnat() -> ConceptClass {
        ConceptClass::ThresholdNat
    }

    #[test]
    fn erm_examples() {
        let two = ConceptClass::FiniteTable { domain: vec![Point(1)], hyps: vec![vec![0], vec![1]] };
        let p = erm_finite(&two, &sample(&[(1, 1), (1, 1), (1, 0)])).unwrap();
        assert!(matches!(p, Predictor::Hypothesis { hyp: HypId(1), .. }));
        let p = erm_finite(&two, &LabeledSample::default()).unwrap();
        assert!(matches!(p, Predictor::Hypothesis { hyp: HypId(0), .. }));
        // realizable by a unique hypothesis -> that hypothesis
        let t = ConceptClass::FiniteTable {
            domain: vec![Point(1), Point(2)],
            hyps: vec![vec![0, 0], vec![0, 1], vec![1, 1]],
        };
        let p = erm_finite(&t, &sample(&[(1, 0), (2, 1)])).unwrap();
        assert!(matches!(p, Predictor::Hypothesis { hyp: HypId(1), .. }));
        assert!(erm_finite(&tnat(), &LabeledSample::default()).is_err());
    }

    #[test]
    fn baseline_examples() {
        let p = memorize_baseline(&sample(&[(4, 1), (4, 1), (4, 0)]));
        assert!(p.evaluate(Point(4)).unwrap());
        assert!(!p.evaluate(Point(9)).unwrap());
        let p = memorize_baseline(&LabeledSample::default());
        assert!(!p.evaluate(Point(1)).unwrap());
        let p = memorize_baseline(&sample(&[(4, 1), (4, 0)]));
        assert!(!p.evaluate(Point(4)).unwrap());
    }

    #[test]
    fn majority_flip_bound() {
        // a flipped majority vote implies at least half the committee disagrees
        let members = vec![
            Predictor::constant(true),
            Predictor::constant(false),
            Predictor::constant(false),
        ];
        let maj = Predictor::Majority { members: members.clone() };
        let out = maj.evaluate(Point(1)).unwrap();
        let disagree = members
            .iter()
            .filter(|m| m.evaluate(Point(1)).unwrap() != out)
            .count();
        assert!(2 * disagree < members.len());
    }

    #[test]
    fn exp_learner_on_singleton_class_is_constant() {
        let single = ConceptClass::FiniteTable {
            domain: vec![Point(1), Point(2)],
            hyps: vec![vec![1, 0]],
        };
        let s = sample(&[(1, 1), (2, 0), (1, 1), (2, 0), (1, 1), (2, 0), (1, 1), (2, 0), (1, 1)]);
        let out = exp_rate_learner(&single, &s, &LearnerConfig::default()).unwrap();
        assert!(!out.report.early_termination);
        // all candidates are the unique hypothesis: the vote reproduces it
        assert!(out.predictor.evaluate(Point(1)).unwrap());
        assert!(!out.predictor.evaluate(Point(2)).unwrap());
    }

    #[test]
    fn exp_learner_baseline_branch_on_adversarial_s2() {
        // S1 steers every committee toward label 1 at x=9 while S0 makes the
        // baseline memorize 0 there; S2 then punishes the committee by a full
        // unit of empirical error, beating sqrt(6 psi/n) once n is large
        // enough that the threshold drops below 1 (n = 48: sqrt(42/48)).
        let mut pairs: Vec<(u64, u8)> = Vec::new();
        for _ in 0..16 {
            pairs.push((9, 0)); // S0: baseline memorizes 0
        }
        for _ in 0..16 {
            pairs.push((9, 1)); // S1: relabeling selection favors 1
        }
        for _ in 0..16 {
            pairs.push((9, 0)); // S2: contradicts the committee
        }
        let s = sample(&pairs);
        let cfg = LearnerConfig { b_cap_exp: 2, ..LearnerConfig::default() };
        let out = exp_rate_learner(&tnat(), &s, &cfg).unwrap();
        assert!(out.report.chose_baseline);
        assert!(!out.predictor.evaluate(Point(9)).unwrap());
    }

    #[test]
    fn super_root_learner_on_forced_class() {
        // single-hypothesis table: the unique admitted labeling is forced
        let single = ConceptClass::FiniteTable {
            domain: vec![Point(1), Point(2)],
            hyps: vec![vec![1, 0]],
        };
        let mut pairs = Vec::new();
        for _ in 0..4 {
            pairs.push((1, 1));
            pairs.push((2, 0));
        }
        let s = sample(&pairs);
        let out = super_root_learner(&single, &s, &LearnerConfig::default()).unwrap();
        assert_eq!(out.report.b_hat, Some(1));
        assert!(out.predictor.evaluate(Point(1)).unwrap());
        assert!(!out.predictor.evaluate(Point(2)).unwrap());
    }

    #[test]
    fn super_root_baseline_branch_on_adversarial_s3() {
        // S1/S2 steer the transductive committee toward label 1 at x=9 while
        // S0 makes the baseline memorize 0; S3 then contradicts the committee
        // by a full unit, beating sqrt(32 ln n / n) once n >= 176.
        let q = 44usize;
        let mut pairs: Vec<(u64, u8)> = Vec::new();
        pairs.extend(std::iter::repeat((9u64, 0u8)).take(q)); // S0
        pairs.extend(std::iter::repeat((9u64, 1u8)).take(q)); // S1
        pairs.extend(std::iter::repeat((9u64, 1u8)).take(q)); // S2
        pairs.extend(std::iter::repeat((9u64, 0u8)).take(q)); // S3
        let s = sample(&pairs);
        let cfg = LearnerConfig { b_cap_vcl: 3, ..LearnerConfig::default() };
        let out = super_root_learner(&tnat(), &s, &cfg).unwrap();
        assert!(out.report.chose_baseline);
        assert!(!out.report.early_termination);
        assert!(!out.predictor.evaluate(Point(9)).unwrap());
    }

    #[test]
    fn super_root_skips_undefined_b() {
        // threshold_nat has VC 1, so b = 1 is excluded but b >= 2 works
        let mut pairs = Vec::new();
        for j in 0..16u64 {
            pairs.push((j % 8 + 1, u8::from(j % 8 >= 4)));
        }
        let s = sample(&pairs);
        let cfg = LearnerConfig { b_cap_vcl: 3, ..LearnerConfig::default() };
        let out = super_root_learner(&tnat(), &s, &cfg).unwrap();
        assert!(out.report.b_hat.map_or(true, |b| b >= 2));
    }

    #[test]
    fn exp_learner_reaches_zero_error_on_noiseless_realizable_source() {
        // Monte Carlo: on a realizable zero-noise finite_table source, the
        // learner's support error hits 0 for every n beyond some n0 found by
        // doubling search.
        use crate::adversary::{self, Atom, DiscreteDistribution};
        let class = ConceptClass::FiniteTable {
            domain: vec![Point(1), Point(2), Point(3)],
            hyps: vec![vec![0, 0, 1], vec![0, 1, 1], vec![1, 1, 0]],
        };
        let dist = DiscreteDistribution::new(
            vec![
                Atom { x: Point(1), p: 0.5, eta: 0.0 },
                Atom { x: Point(2), p: 0.3, eta: 1.0 },
                Atom { x: Point(3), p: 0.2, eta: 1.0 },
            ],
            0.0,
        )
        .unwrap();
        let cfg = LearnerConfig { b_cap_exp: 3, ..LearnerConfig::default() };
        let mut n = 6u64;
        let n0 = loop {
            let all_zero = (0..20u64).all(|rep| {
                let mut rng = crate::lab::rep_rng(99, n, rep);
                let (s, _) = adversary::sample(&dist, n as usize, &mut rng, 1e-9).unwrap();
                let out = exp_rate_learner(&class, &s, &cfg).unwrap();
                let e = adversary::exact_error(&dist, &out.predictor).unwrap();
                e.lo == 0.0
            });
            if all_zero {
                break n;
            }
            n *= 2;
            assert!(n <= 192, "no n0 found by doubling search");
        };
        // stability beyond n0
        for n in [2 * n0, 3 * n0] {
            for rep in 0..10u64 {
                let mut rng = crate::lab::rep_rng(99, n, rep);
                let (s, _) = adversary::sample(&dist, n as usize, &mut rng, 1e-9).unwrap();
                let out = exp_rate_learner(&class, &s, &cfg).unwrap();
                assert_eq!(adversary::exact_error(&dist, &out.predictor).unwrap().lo, 0.0);
            }
        }
    }

    #[test]
    fn learners_are_deterministic() {
        let mut pairs = Vec::new();
        for j in 0..24u64 {
            pairs.push((j % 6 + 1, u8::from((j * 7) % 3 == 0)));
        }
        let s = sample(&pairs);
        let cfg = LearnerConfig { b_cap_exp: 3, b_cap_vcl: 3, ..LearnerConfig::default() };
        for kind in [LearnerKind::Exp, LearnerKind::VclRoot, LearnerKind::Baseline] {
            let a = train(kind, &tnat(), &s, &cfg).unwrap();
            let b = train(kind, &tnat(), &s, &cfg).unwrap();
            assert_eq!(a.report, b.report);
            for x in 1..=12u64 {
                assert_eq!(
                    a.predictor.evaluate(Point(x)).unwrap(),
                    b.predictor.evaluate(Point(x)).unwrap(),
                    "{} x={x}",
                    kind.name()
                );
            }
        }
    }

    #[test]
    fn predictor_serde_round_trip() {
        let term = {
            let g = crate::partial::induce_partial_class(
                &tnat(),
                &sample(&[(2, 1), (5, 0)]),
            )
            .unwrap();
            Predictor::Term {
                class: g,
                sample: sample(&[(1, 1), (4, 0)]),
                budget: crate::partial::PartialBudget::default(),
            }
        };
        let preds = vec![
            Predictor::constant(true),
            Predictor::Table { entries: vec![(Point(2), true), (Point(5), false)], default: false },
            Predictor::Hypothesis { class: tnat(), hyp: HypId(3) },
            Predictor::Majority {
                members: vec![Predictor::constant(false), Predictor::constant(true)],
            },
            term,
        ];
        for p in preds {
            let s = serde_json::to_string(&p).unwrap();
            assert!(s.contains("\"kind\""));
            let q: Predictor = serde_json::from_str(&s).unwrap();
            assert_eq!(p, q);
            for x in 1..=8u64 {
                assert_eq!(p.evaluate(Point(x)).unwrap(), q.evaluate(Point(x)).unwrap());
            }
        }
    }
}
