//! Online strategy primitives: the Standard Optimal Algorithm (SOA)
//! predictor with its conservative batch trainer, and the finite-VC
//! pattern-avoidance functions.
//!
//! The SOA predicts the label whose consistent subclass has the larger
//! budgeted Littlestone dimension; the pattern-avoidance function emits, for
//! k = VC + 1 distinct points, a labeling the class cannot realize. Both
//! recursions run on the class restricted to a budgeted domain.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::domain::{BudgetedClass, ConceptClass, LabeledSample, LdimMemo, Pattern, Point};
use std::collections::HashMap;
use crate::error::{Error, Result};

/// Budgets for the Littlestone-dimension recursion behind the SOA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoaBudgets {
    pub depth: usize,
    pub domain: u64,
}

impl Default for SoaBudgets {
    fn default() -> Self {
        SoaBudgets { depth: 8, domain: 32 }
    }
}

/// Outcome of one conservative online step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoaStep {
    pub predicted: bool,
    pub mistake: bool,
    pub appended: bool,
    pub skipped_nonrealizable: bool,
}

struct SoaCtx {
    budgeted: Option<BudgetedClass>,
    memo: LdimMemo,
    /// label predicted from a consistent-subclass state at a point index
    pred_memo: HashMap<(crate::domain::Bitset, usize), bool>,
}

/// The SOA predictor: a concept class plus the conservative-update memory.
///
/// The history is realizable with respect to the class unless the predictor
/// is flagged off-manifold (a non-realizable conservative update was skipped
/// during training).
pub struct SoaPredictor {
    class: Arc<ConceptClass>,
    budgets: SoaBudgets,
    history: LabeledSample,
    off_manifold: bool,
    ctx: Arc<Mutex<SoaCtx>>,
}

impl std::fmt::Debug for SoaPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SoaPredictor")
            .field("class", &self.class.kind_name())
            .field("history", &self.history)
            .field("off_manifold", &self.off_manifold)
            .finish()
    }
}

impl Clone for SoaPredictor {
    fn clone(&self) -> Self {
        SoaPredictor {
            class: Arc::clone(&self.class),
            budgets: self.budgets,
            history: self.history.clone(),
            off_manifold: self.off_manifold,
            ctx: Arc::clone(&self.ctx), // dimension cache is shared; values are input-determined
        }
    }
}

impl PartialEq for SoaPredictor {
    fn eq(&self, other: &Self) -> bool {
        self.class == other.class
            && self.budgets == other.budgets
            && self.history == other.history
            && self.off_manifold == other.off_manifold
    }
}

impl Serialize for SoaPredictor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            class: &'a ConceptClass,
            budgets: SoaBudgets,
            history: &'a LabeledSample,
            off_manifold: bool,
        }
        Repr {
            class: &self.class,
            budgets: self.budgets,
            history: &self.history,
            off_manifold: self.off_manifold,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SoaPredictor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            class: ConceptClass,
            budgets: SoaBudgets,
            history: LabeledSample,
            off_manifold: bool,
        }
        let r = Repr::deserialize(d)?;
        Ok(SoaPredictor {
            class: Arc::new(r.class),
            budgets: r.budgets,
            history: r.history,
            off_manifold: r.off_manifold,
            ctx: Arc::new(Mutex::new(SoaCtx {
                budgeted: None,
                memo: LdimMemo::new(),
                pred_memo: HashMap::new(),
            })),
        })
    }
}

impl SoaPredictor {
    pub fn new(class: ConceptClass, budgets: SoaBudgets) -> SoaPredictor {
        SoaPredictor {
            class: Arc::new(class),
            budgets,
            history: LabeledSample::default(),
            off_manifold: false,
            ctx: Arc::new(Mutex::new(SoaCtx {
                budgeted: None,
                memo: LdimMemo::new(),
                pred_memo: HashMap::new(),
            })),
        }
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    pub fn history(&self) -> &LabeledSample {
        &self.history
    }

    pub fn off_manifold(&self) -> bool {
        self.off_manifold
    }

    /// Run `f` with a materialization covering the history plus `extra`.
    /// Refining the point set never changes dimension comparisons, so the
    /// shared cache stays valid across rebuilds for every clone.
    fn with_ctx<T>(
        &self,
        extra: &[Point],
        f: impl FnOnce(&BudgetedClass, &mut LdimMemo, &mut HashMap<(crate::domain::Bitset, usize), bool>) -> T,
    ) -> Result<T> {
        let mut guard = self.ctx.lock().expect("soa ctx lock");
        let covered = guard.budgeted.as_ref().is_some_and(|b| {
            self.history.pairs.iter().all(|&(x, _)| b.point_index(x).is_some())
                && extra.iter().all(|&x| b.point_index(x).is_some())
        });
        if !covered {
            let mut pts: Vec<Point> = self.history.points();
            pts.extend_from_slice(extra);
            if let Some(old) = guard.budgeted.as_ref() {
                pts.extend_from_slice(&old.points);
            }
            guard.budgeted = Some(BudgetedClass::materialize(&self.class, self.budgets.domain, &pts)?);
            guard.memo.clear();
            guard.pred_memo.clear();
        }
        let SoaCtx { budgeted, memo, pred_memo } = &mut *guard;
        Ok(f(budgeted.as_ref().expect("materialized"), memo, pred_memo))
    }

    /// Predict the label whose consistent subclass has the larger budgeted
    /// Littlestone dimension (tie goes to label 1; a unique consistent label
    /// is forced; an inconsistent state yields 0).
    pub fn predict(&self, x: Point) -> Result<bool> {
        let depth = self.budgets.depth;
        let history = &self.history;
        self.with_ctx(&[x], |b, memo, pred_memo| {
            let alive = b.alive_after(history).expect("history points materialized");
            let px = b.point_index(x).expect("query point materialized");
            if let Some(&label) = pred_memo.get(&(alive.clone(), px)) {
                return label;
            }
            let a0 = b.filter(&alive, px, false);
            let a1 = b.filter(&alive, px, true);
            let label = match (a0.any(), a1.any()) {
                (false, false) => false,
                (true, false) => false,
                (false, true) => true,
                (true, true) => {
                    let d0 = b.ldim_bounded(&a0, depth, memo);
                    let d1 = b.ldim_bounded(&a1, depth, memo);
                    d1 >= d0
                }
            };
            pred_memo.insert((alive, px), label);
            label
        })
    }

    /// A fresh conservative pass over `batch`, sharing this predictor's
    /// class, budgets, and dimension cache (how the exponential-rate learner
    /// trains its 2^b relabelings of one batch).
    pub fn fork_trained(&self, batch: &LabeledSample) -> Result<SoaPredictor> {
        let mut p = SoaPredictor {
            class: Arc::clone(&self.class),
            budgets: self.budgets,
            history: LabeledSample::default(),
            off_manifold: false,
            ctx: Arc::clone(&self.ctx),
        };
        for &(x, y) in &batch.pairs {
            p.observe(x, y)?;
        }
        Ok(p)
    }

    /// One conservative online step: predict, and on a mistake append the
    /// true pair to the history when that stays realizable (otherwise skip
    /// and flag off-manifold).
    pub fn observe(&mut self, x: Point, y: bool) -> Result<SoaStep> {
        let depth = self.budgets.depth;
        let history = &self.history;
        let (predicted, truth_consistent) = self.with_ctx(&[x], |b, memo, pred_memo| {
            let alive = b.alive_after(history).expect("history points materialized");
            let px = b.point_index(x).expect("query point materialized");
            let a0 = b.filter(&alive, px, false);
            let a1 = b.filter(&alive, px, true);
            let truth_consistent = if y { a1.any() } else { a0.any() };
            let predicted = if let Some(&label) = pred_memo.get(&(alive.clone(), px)) {
                label
            } else {
                let label = match (a0.any(), a1.any()) {
                    (false, false) | (true, false) => false,
                    (false, true) => true,
                    (true, true) => {
                        b.ldim_bounded(&a1, depth, memo) >= b.ldim_bounded(&a0, depth, memo)
                    }
                };
                pred_memo.insert((alive, px), label);
                label
            };
            (predicted, truth_consistent)
        })?;
        let mistake = predicted != y;
        let mut appended = false;
        let mut skipped = false;
        if mistake {
            if truth_consistent {
                self.history.pairs.push((x, y));
                appended = true;
            } else {
                self.off_manifold = true;
                skipped = true;
            }
        }
        Ok(SoaStep { predicted, mistake, appended, skipped_nonrealizable: skipped })
    }
}

/// One left-to-right conservative pass of the SOA over `batch`.
///
/// The batch may be non-realizable; non-realizable conservative updates are
/// skipped and the returned predictor is flagged off-manifold.
pub fn alg_soa_train(
    class: &ConceptClass,
    batch: &LabeledSample,
    budgets: SoaBudgets,
) -> Result<SoaPredictor> {
    let mut p = SoaPredictor::new(class.clone(), budgets);
    // pre-materialize the whole batch so the cache is built once
    p.with_ctx(&batch.points(), |_, _, _| ())?;
    for &(x, y) in &batch.pairs {
        p.observe(x, y)?;
    }
    Ok(p)
}

/// Pattern arity of the finite-VC pattern-avoidance surrogate:
/// `min(VC + 1, b)`, valid exactly when `VC < b` (otherwise errors).
pub fn vcl_k(class: &ConceptClass, batch: &LabeledSample) -> Result<usize> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::InvalidArgument("vcl_k needs a nonempty batch".into()));
    }
    let d = class.vc_dimension(b)?;
    if d.saturated {
        return Err(Error::ClassTooRich { batch: b });
    }
    Ok((d.value + 1).min(b))
}

/// A forbidden-pattern function: for each k-tuple of points it names one
/// labeling the class cannot realize there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenPatternFn {
    class: ConceptClass,
    k: usize,
    batch: LabeledSample,
}

impl ForbiddenPatternFn {
    /// Hand-built component; `1 <= k <= batch.len()` is required.
    pub fn new(class: ConceptClass, k: usize, batch: LabeledSample) -> Result<ForbiddenPatternFn> {
        if k < 1 || k > batch.len() {
            return Err(Error::InvalidArgument(format!(
                "pattern arity k={k} must satisfy 1 <= k <= batch length {}",
                batch.len()
            )));
        }
        Ok(ForbiddenPatternFn { class, k, batch })
    }

    /// Component induced from a batch, with k chosen by `vcl_k`. The batch
    /// itself only serves as a provenance tag for the surrogate.
    pub fn from_batch(class: ConceptClass, batch: LabeledSample) -> Result<ForbiddenPatternFn> {
        let k = vcl_k(&class, &batch)?;
        Ok(ForbiddenPatternFn { class, k, batch })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    pub fn batch(&self) -> &LabeledSample {
        &self.batch
    }

    /// The lexicographically least pattern not realizable by the class on
    /// `xs`; with duplicated points and a full projection, a pattern giving
    /// the duplicate conflicting labels.
    pub fn forbidden(&self, xs: &[Point]) -> Result<Pattern> {
        if xs.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "forbidden() needs exactly k={} points, got {}",
                self.k,
                xs.len()
            )));
        }
        let k = self.k;
        let realizable: std::collections::BTreeSet<Pattern> =
            self.class.project(xs)?.into_iter().collect();
        for mask in 0u64..(1u64 << k) {
            // position 0 is the most significant bit so masks ascend in lex order
            let pat = Pattern((0..k).map(|j| (mask >> (k - 1 - j)) & 1 == 1).collect());
            if !realizable.contains(&pat) {
                return Ok(pat);
            }
        }
        // full projection: only reachable with duplicated points
        for i in 0..k {
            for j in i + 1..k {
                if xs[i] == xs[j] {
                    let mut bits = vec![false; k];
                    bits[j] = true;
                    return Ok(Pattern(bits));
                }
            }
        }
        Err(Error::InvalidArgument(
            "no forbidden pattern exists: distinct points fully shattered (k <= VC)".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::HypId;

    fn tnat() -> ConceptClass {
        ConceptClass::ThresholdNat
    }

    fn sample(pairs: &[(u64, u8)]) -> LabeledSample {
        LabeledSample::new(pairs.iter().map(|&(x, y)| (Point(x), y == 1)).collect())
    }

    #[test]
    fn soa_predict_examples() {
        let p = SoaPredictor::new(tnat(), SoaBudgets::default());
        // consistent-with-(1,1) subclass is the single threshold a=1 (dim 0);
        // consistent-with-(1,0) subclass is everything else (dim > 0) -> 0
        assert!(!p.predict(Point(1)).unwrap());

        let single = ConceptClass::FiniteTable {
            domain: vec![Point(1), Point(2)],
            hyps: vec![vec![0, 0]],
        };
        let p = SoaPredictor::new(single, SoaBudgets::default());
        assert!(!p.predict(Point(1)).unwrap());
        assert!(!p.predict(Point(2)).unwrap());

        // history forcing the label via projection
        let mut p = SoaPredictor::new(tnat(), SoaBudgets::default());
        p.observe(Point(3), true).unwrap();
        assert!(p.predict(Point(5)).unwrap()); // x=5 >= any a <= 3
    }

    #[test]
    fn train_on_realizable_batch_fits_it() {
        let batch = sample(&[(2, 0), (4, 1), (7, 1), (3, 0)]); // threshold a = 4
        let p = alg_soa_train(&tnat(), &batch, SoaBudgets::default()).unwrap();
        assert!(!p.off_manifold());
        for &(x, y) in &batch.pairs {
            assert_eq!(p.predict(x).unwrap(), y);
        }
    }

    #[test]
    fn train_on_nonrealizable_batch_flags_off_manifold() {
        let p = alg_soa_train(&tnat(), &sample(&[(3, 1), (5, 0)]), SoaBudgets::default()).unwrap();
        assert!(p.off_manifold());
    }

    #[test]
    fn conservative_pass_mistakes_bounded_by_ldim_small_exhaustive() {
        // finite tables on 2 points with <= 4 hypotheses, sequences of length <= 4
        let domain = [Point(1), Point(2)];
        let budgets = SoaBudgets { depth: 4, domain: 2 };
        for hyp_set in 1u8..16 {
            let hyps: Vec<Vec<u8>> = (0..4u8)
                .filter(|i| (hyp_set >> i) & 1 == 1)
                .map(|i| vec![i & 1, (i >> 1) & 1])
                .collect();
            let class = ConceptClass::FiniteTable { domain: domain.to_vec(), hyps };
            class.validate().unwrap();
            let ldim = class.littlestone_dimension(4, 2).unwrap().value;
            // depth-first over realizable sequences
            fn dfs(
                class: &ConceptClass,
                pred: &SoaPredictor,
                seq: &mut LabeledSample,
                mistakes: usize,
                ldim: usize,
                depth_left: usize,
            ) {
                assert!(mistakes <= ldim, "mistakes {mistakes} > ldim {ldim}");
                if depth_left == 0 {
                    return;
                }
                for x in [Point(1), Point(2)] {
                    for y in [false, true] {
                        seq.pairs.push((x, y));
                        if class.is_realizable(seq).unwrap() {
                            let mut p = pred.clone();
                            let step = p.observe(x, y).unwrap();
                            assert!(!step.skipped_nonrealizable);
                            dfs(class, &p, seq, mistakes + step.mistake as usize, ldim, depth_left - 1);
                        }
                        seq.pairs.pop();
                    }
                }
            }
            let p = SoaPredictor::new(class.clone(), budgets);
            dfs(&class, &p, &mut LabeledSample::default(), 0, ldim, 4);
        }
    }

    #[test]
    fn vcl_k_examples() {
        assert_eq!(vcl_k(&tnat(), &sample(&[(1, 0); 5])).unwrap(), 2);
        // VC >= batch size: the surrogate is invalid and must error
        assert_eq!(
            vcl_k(&tnat(), &sample(&[(1, 0)])),
            Err(Error::ClassTooRich { batch: 1 })
        );
        let af3 = ConceptClass::AllFunctionsGrid { m: 3 };
        assert_eq!(vcl_k(&af3, &sample(&[(1, 0); 8])).unwrap(), 4);
        assert_eq!(vcl_k(&af3, &sample(&[(1, 0); 3])), Err(Error::ClassTooRich { batch: 3 }));
    }

    #[test]
    fn vcl_forbidden_examples() {
        let f = ForbiddenPatternFn::from_batch(tnat(), sample(&[(1, 0), (2, 0)])).unwrap();
        assert_eq!(f.k(), 2);
        let fb = f.forbidden(&[Point(3), Point(5)]).unwrap();
        assert_eq!(fb, Pattern(vec![true, false]));
        let fb = f.forbidden(&[Point(5), Point(3)]).unwrap();
        assert_eq!(fb, Pattern(vec![false, true]));

        // duplicated point with a complete projection on the distinct part
        let af3 = ConceptClass::AllFunctionsGrid { m: 3 };
        let f =
            ForbiddenPatternFn::from_batch(af3.clone(), sample(&[(1, 0); 8])).unwrap();
        let xs = [Point(1), Point(2), Point(3), Point(1)];
        let fb = f.forbidden(&xs).unwrap();
        // output never realizable, and it conflicts on the duplicate
        assert!(!af3.project(&xs).unwrap().contains(&fb));
        assert_ne!(fb.0[0], fb.0[3]);
    }

    #[test]
    fn forbidden_never_realizable() {
        let classes = vec![
            tnat(),
            ConceptClass::SingletonsNat,
            ConceptClass::ThresholdGrid { m: 9 },
        ];
        for class in classes {
            let f = ForbiddenPatternFn::from_batch(class.clone(), sample(&[(1, 0), (2, 1), (3, 0)]))
                .unwrap();
            let k = f.k();
            let mut combo_pts = vec![Point(2), Point(4), Point(6), Point(8)];
            combo_pts.truncate(k.max(2));
            for w in combo_pts.windows(k) {
                let fb = f.forbidden(w).unwrap();
                assert!(!class.project(w).unwrap().contains(&fb), "{}", class.kind_name());
            }
        }
    }

    #[test]
    fn soa_eventually_fits_realizable_source() {
        // on a finite-support realizable source, the trained predictor
        // reaches zero error on the support for some batch size b* found by
        // doubling search
        use rand::{Rng, SeedableRng};
        let class = ConceptClass::ThresholdGrid { m: 7 };
        let truth = HypId(4);
        let budgets = SoaBudgets { depth: 6, domain: 7 };
        let mut b = 4usize;
        loop {
            let mut ok = 0usize;
            let reps = 200usize;
            for rep in 0..reps {
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(rep as u64 * 7919 + b as u64);
                let pairs: Vec<(Point, bool)> = (0..b)
                    .map(|_| {
                        let x = Point(rng.gen_range(1..=7u64));
                        (x, class.evaluate(truth, x).unwrap())
                    })
                    .collect();
                let p = alg_soa_train(&class, &LabeledSample::new(pairs), budgets).unwrap();
                let perfect = (1..=7u64)
                    .all(|x| p.predict(Point(x)).unwrap() == class.evaluate(truth, Point(x)).unwrap());
                ok += perfect as usize;
            }
            if ok as f64 / reps as f64 > 0.99 {
                break;
            }
            b *= 2;
            assert!(b <= 64, "no b* found by doubling search up to 64");
        }
    }

    #[test]
    fn determinism_and_serde_round_trip() {
        let batch = sample(&[(2, 1), (5, 0), (3, 1)]);
        let a = alg_soa_train(&tnat(), &batch, SoaBudgets::default()).unwrap();
        let b = alg_soa_train(&tnat(), &batch, SoaBudgets::default()).unwrap();
        assert_eq!(a, b);
        for x in 1..=16u64 {
            assert_eq!(a.predict(Point(x)).unwrap(), b.predict(Point(x)).unwrap());
        }
        let json = serde_json::to_string(&a).unwrap();
        let c: SoaPredictor = serde_json::from_str(&json).unwrap();
        assert_eq!(a, c);
        for x in 1..=16u64 {
            assert_eq!(a.predict(Point(x)).unwrap(), c.predict(Point(x)).unwrap());
        }
    }
}
