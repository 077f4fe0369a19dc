//! Concept-class representations, evaluation, projection, and the
//! combinatorial-dimension / tree-shattering computations.
//!
//! Instance spaces are countable and canonically enumerated by integer code.
//! Grid classes live on `{1, ..., m}`; the natural-number classes live on
//! `{1, 2, 3, ...}` restricted by an explicit domain budget wherever a search
//! has to enumerate points.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the instance space, identified by its integer code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub u64);

/// Identifier of a hypothesis within a class.
///
/// The meaning is per kind: row index for `finite_table`, the threshold `a`
/// for the threshold kinds, the singleton point `a` for `singletons_nat`, and
/// the label bitmask over the grid for `all_functions_grid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypId(pub u64);

/// A fixed-length binary vector aligned to an ordered point tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern(pub Vec<bool>);

impl Pattern {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn zeros(len: usize) -> Pattern {
        Pattern(vec![false; len])
    }

    /// Pattern from the low `len` bits of `mask`, index 0 = bit 0.
    pub fn from_mask(mask: u64, len: usize) -> Pattern {
        Pattern((0..len).map(|i| (mask >> i) & 1 == 1).collect())
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// An ordered sequence of labeled points; order is significant and
/// duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabeledSample {
    pub pairs: Vec<(Point, bool)>,
}

impl LabeledSample {
    pub fn new(pairs: Vec<(Point, bool)>) -> Self {
        LabeledSample { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn points(&self) -> Vec<Point> {
        self.pairs.iter().map(|&(x, _)| x).collect()
    }

    pub fn labels(&self) -> Pattern {
        Pattern(self.pairs.iter().map(|&(_, y)| y).collect())
    }

    /// Same points, labels replaced by `pattern` (lengths must agree).
    pub fn relabel(&self, pattern: &Pattern) -> LabeledSample {
        assert_eq!(pattern.len(), self.len(), "relabeling length mismatch");
        LabeledSample::new(
            self.pairs
                .iter()
                .zip(&pattern.0)
                .map(|(&(x, _), &y)| (x, y))
                .collect(),
        )
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> LabeledSample {
        LabeledSample::new(self.pairs[range].to_vec())
    }
}

/// Size of a constrained subclass: exact count for finitely many consistent
/// hypotheses, or provably infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubclassSize {
    Finite(u128),
    Infinite,
}

impl SubclassSize {
    pub fn is_empty(&self) -> bool {
        matches!(self, SubclassSize::Finite(0))
    }
}

/// Dimension value together with a budget-saturation flag (`saturated` means
/// the true value may be larger than the budget allowed us to certify).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dim {
    pub value: usize,
    pub saturated: bool,
}

/// The five-kind concept-class catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConceptClass {
    /// Explicit label matrix over an explicit finite domain.
    FiniteTable { domain: Vec<Point>, hyps: Vec<Vec<u8>> },
    /// `x -> 1[x >= a]`, `a` ranging over the naturals `{1, 2, ...}`.
    ThresholdNat,
    /// `x -> 1[x >= a]` with `a` and `x` on the grid `{1, ..., m}`.
    ThresholdGrid { m: u64 },
    /// All `2^m` binary functions on the grid `{1, ..., m}`.
    AllFunctionsGrid { m: u64 },
    /// `x -> 1[x == a]`, `a` ranging over the naturals.
    SingletonsNat,
}

const ALL_FUNCTIONS_MAX_M: u64 = 20;

impl ConceptClass {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ConceptClass::FiniteTable { .. } => "finite_table",
            ConceptClass::ThresholdNat => "threshold_nat",
            ConceptClass::ThresholdGrid { .. } => "threshold_grid",
            ConceptClass::AllFunctionsGrid { .. } => "all_functions_grid",
            ConceptClass::SingletonsNat => "singletons_nat",
        }
    }

    /// Check the structural invariants of the descriptor.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConceptClass::FiniteTable { domain, hyps } => {
                if domain.is_empty() {
                    return Err(Error::InvalidClass("finite_table needs a nonempty domain".into()));
                }
                if !domain.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::InvalidClass(
                        "finite_table domain must be strictly increasing".into(),
                    ));
                }
                if hyps.is_empty() {
                    return Err(Error::InvalidClass("finite_table needs >= 1 hypothesis".into()));
                }
                let mut seen = std::collections::HashSet::new();
                for row in hyps {
                    if row.len() != domain.len() {
                        return Err(Error::InvalidClass(
                            "finite_table row length must equal domain size".into(),
                        ));
                    }
                    if row.iter().any(|&b| b > 1) {
                        return Err(Error::InvalidClass("finite_table entries must be bits".into()));
                    }
                    if !seen.insert(row.clone()) {
                        return Err(Error::InvalidClass(
                            "finite_table must not contain duplicate hypothesis rows".into(),
                        ));
                    }
                }
                Ok(())
            }
            ConceptClass::ThresholdGrid { m } | ConceptClass::AllFunctionsGrid { m } => {
                if *m == 0 {
                    return Err(Error::InvalidClass("grid size m must be >= 1".into()));
                }
                if matches!(self, ConceptClass::AllFunctionsGrid { .. }) && *m > ALL_FUNCTIONS_MAX_M {
                    return Err(Error::InvalidClass(format!(
                        "all_functions_grid capped at m <= {ALL_FUNCTIONS_MAX_M}"
                    )));
                }
                Ok(())
            }
            ConceptClass::ThresholdNat | ConceptClass::SingletonsNat => Ok(()),
        }
    }

    pub fn from_json(s: &str) -> Result<ConceptClass> {
        let c: ConceptClass = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("concept class serializes")
    }

    fn check_point(&self, x: Point) -> Result<()> {
        let ok = match self {
            ConceptClass::FiniteTable { domain, .. } => domain.binary_search(&x).is_ok(),
            ConceptClass::ThresholdNat | ConceptClass::SingletonsNat => x.0 >= 1,
            ConceptClass::ThresholdGrid { m } | ConceptClass::AllFunctionsGrid { m } => {
                x.0 >= 1 && x.0 <= *m
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain { kind: self.kind_name().into(), point: x.0 })
        }
    }

    /// Pointwise evaluation of hypothesis `hyp` at `x`.
    pub fn evaluate(&self, hyp: HypId, x: Point) -> Result<bool> {
        self.check_point(x)?;
        let unknown = || Error::UnknownHypothesis { kind: self.kind_name().into(), hyp: hyp.0 };
        match self {
            ConceptClass::FiniteTable { domain, hyps } => {
                let row = hyps.get(hyp.0 as usize).ok_or_else(unknown)?;
                let pos = domain.binary_search(&x).expect("checked above");
                Ok(row[pos] == 1)
            }
            ConceptClass::ThresholdNat => {
                if hyp.0 < 1 {
                    return Err(unknown());
                }
                Ok(x.0 >= hyp.0)
            }
            ConceptClass::ThresholdGrid { m } => {
                if hyp.0 < 1 || hyp.0 > *m {
                    return Err(unknown());
                }
                Ok(x.0 >= hyp.0)
            }
            ConceptClass::AllFunctionsGrid { m } => {
                if hyp.0 >= 1u64 << m {
                    return Err(unknown());
                }
                Ok((hyp.0 >> (x.0 - 1)) & 1 == 1)
            }
            ConceptClass::SingletonsNat => {
                if hyp.0 < 1 {
                    return Err(unknown());
                }
                Ok(x.0 == hyp.0)
            }
        }
    }

    /// Canonical enumeration of the (budgeted) domain: the full domain for
    /// finite kinds, `{1, ..., budget}` for the natural-number kinds.
    pub fn canonical_domain(&self, budget: u64) -> Vec<Point> {
        match self {
            ConceptClass::FiniteTable { domain, .. } => domain.clone(),
            ConceptClass::ThresholdGrid { m } | ConceptClass::AllFunctionsGrid { m } => {
                (1..=*m).map(Point).collect()
            }
            ConceptClass::ThresholdNat | ConceptClass::SingletonsNat => {
                (1..=budget).map(Point).collect()
            }
        }
    }

    /// The set of realizable label patterns on `xs`, deduplicated, in
    /// lexicographic order, each with the least witnessing hypothesis id.
    pub fn project_with_witnesses(&self, xs: &[Point]) -> Result<Vec<(Pattern, HypId)>> {
        for &x in xs {
            self.check_point(x)?;
        }
        let mut out: BTreeMap<Pattern, HypId> = BTreeMap::new();
        let mut insert = |pat: Pattern, id: HypId| {
            out.entry(pat).or_insert(id);
        };
        match self {
            ConceptClass::FiniteTable { domain, hyps } => {
                let idx: Vec<usize> = xs
                    .iter()
                    .map(|x| domain.binary_search(x).expect("checked above"))
                    .collect();
                for (row_id, row) in hyps.iter().enumerate() {
                    let pat = Pattern(idx.iter().map(|&i| row[i] == 1).collect());
                    insert(pat, HypId(row_id as u64));
                }
            }
            ConceptClass::ThresholdNat | ConceptClass::ThresholdGrid { .. } => {
                let m_cap = match self {
                    ConceptClass::ThresholdGrid { m } => Some(*m),
                    _ => None,
                };
                let mut cands: Vec<u64> = std::iter::once(1)
                    .chain(xs.iter().map(|x| x.0 + 1))
                    .filter(|&a| m_cap.map_or(true, |m| a <= m))
                    .collect();
                cands.sort_unstable();
                cands.dedup();
                for a in cands {
                    let pat = Pattern(xs.iter().map(|x| x.0 >= a).collect());
                    insert(pat, HypId(a));
                }
            }
            ConceptClass::SingletonsNat => {
                let mut cands: Vec<u64> = xs.iter().map(|x| x.0).collect();
                cands.sort_unstable();
                cands.dedup();
                // least a not occurring among xs witnesses the all-zero pattern
                let mut zero_witness = 1u64;
                while cands.binary_search(&zero_witness).is_ok() {
                    zero_witness += 1;
                }
                let mut all: Vec<u64> = cands;
                all.push(zero_witness);
                all.sort_unstable();
                for a in all {
                    let pat = Pattern(xs.iter().map(|x| x.0 == a).collect());
                    insert(pat, HypId(a));
                }
            }
            ConceptClass::AllFunctionsGrid { .. } => {
                let mut distinct: Vec<Point> = xs.to_vec();
                distinct.sort_unstable();
                distinct.dedup();
                let d = distinct.len();
                if d > 22 {
                    return Err(Error::BudgetExceeded(format!(
                        "all_functions_grid projection over {d} distinct points"
                    )));
                }
                for assign in 0u64..(1u64 << d) {
                    let mut mask = 0u64;
                    for (j, p) in distinct.iter().enumerate() {
                        if (assign >> j) & 1 == 1 {
                            mask |= 1u64 << (p.0 - 1);
                        }
                    }
                    let pat = Pattern(
                        xs.iter()
                            .map(|x| {
                                let j = distinct.binary_search(x).expect("member");
                                (assign >> j) & 1 == 1
                            })
                            .collect(),
                    );
                    insert(pat, HypId(mask));
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// The set of realizable label patterns on `xs` (lexicographic order).
    pub fn project(&self, xs: &[Point]) -> Result<Vec<Pattern>> {
        Ok(self.project_with_witnesses(xs)?.into_iter().map(|(p, _)| p).collect())
    }

    /// Closed-form count of hypotheses consistent with `sample`.
    pub fn consistent_subclass_size(&self, sample: &LabeledSample) -> Result<SubclassSize> {
        for &(x, _) in &sample.pairs {
            self.check_point(x)?;
        }
        // contradictory duplicates kill every kind
        let mut seen: HashMap<Point, bool> = HashMap::new();
        for &(x, y) in &sample.pairs {
            if let Some(&prev) = seen.get(&x) {
                if prev != y {
                    return Ok(SubclassSize::Finite(0));
                }
            } else {
                seen.insert(x, y);
            }
        }
        match self {
            ConceptClass::FiniteTable { domain, hyps } => {
                let mut n = 0u128;
                'rows: for row in hyps {
                    for (&x, &y) in &seen {
                        let pos = domain.binary_search(&x).expect("checked");
                        if (row[pos] == 1) != y {
                            continue 'rows;
                        }
                    }
                    n += 1;
                }
                Ok(SubclassSize::Finite(n))
            }
            ConceptClass::ThresholdNat | ConceptClass::ThresholdGrid { .. } => {
                // a <= x for every (x,1); a > x for every (x,0)
                let lo = seen
                    .iter()
                    .filter(|&(_, &y)| !y)
                    .map(|(&x, _)| x.0 + 1)
                    .max()
                    .unwrap_or(1);
                let hi1 = seen.iter().filter(|&(_, &y)| y).map(|(&x, _)| x.0).min();
                match self {
                    ConceptClass::ThresholdGrid { m } => {
                        let hi = hi1.unwrap_or(*m).min(*m);
                        Ok(SubclassSize::Finite(if lo > hi { 0 } else { (hi - lo + 1) as u128 }))
                    }
                    _ => match hi1 {
                        Some(hi) => Ok(SubclassSize::Finite(if lo > hi {
                            0
                        } else {
                            (hi - lo + 1) as u128
                        })),
                        None => Ok(SubclassSize::Infinite),
                    },
                }
            }
            ConceptClass::SingletonsNat => {
                let ones: Vec<Point> =
                    seen.iter().filter(|&(_, &y)| y).map(|(&x, _)| x).collect();
                match ones.len() {
                    0 => Ok(SubclassSize::Infinite),
                    1 => Ok(SubclassSize::Finite(1)), // a = the 1-labeled point; 0-conflicts already handled
                    _ => Ok(SubclassSize::Finite(0)),
                }
            }
            ConceptClass::AllFunctionsGrid { m } => {
                let free = *m as u32 - seen.len() as u32;
                Ok(SubclassSize::Finite(1u128 << free))
            }
        }
    }

    /// True iff the sample's label pattern is realizable by the class.
    pub fn is_realizable(&self, sample: &LabeledSample) -> Result<bool> {
        Ok(!self.consistent_subclass_size(sample)?.is_empty())
    }

    /// Largest `d <= point_budget` such that some d-tuple from the budgeted
    /// domain is fully shattered.
    pub fn vc_dimension(&self, point_budget: usize) -> Result<Dim> {
        assert!(point_budget >= 1, "point_budget >= 1");
        let domain = self.canonical_domain(point_budget as u64);
        let max_d = point_budget.min(domain.len());
        let mut value = 0usize;
        for d in 1..=max_d {
            let mut found = false;
            let mut combo = Combinations::new(domain.len(), d);
            while let Some(idx) = combo.next() {
                let xs: Vec<Point> = idx.iter().map(|&i| domain[i]).collect();
                if self.project(&xs)?.len() == 1usize << d {
                    found = true;
                    break;
                }
            }
            if found {
                value = d;
            } else {
                break;
            }
        }
        Ok(Dim { value, saturated: value == point_budget })
    }

    /// Largest `d <= depth_budget` such that a depth-d Littlestone tree over
    /// the budgeted domain is shattered.
    pub fn littlestone_dimension(&self, depth_budget: usize, domain_budget: u64) -> Result<Dim> {
        assert!(depth_budget >= 1 && domain_budget >= 1, "budgets >= 1");
        let budgeted = BudgetedClass::materialize(self, domain_budget, &[])?;
        let mut memo = HashMap::new();
        let alive = Bitset::full(budgeted.rows.len());
        let value = budgeted.ldim_bounded(&alive, depth_budget, &mut memo);
        Ok(Dim { value, saturated: value == depth_budget })
    }

    /// Search for a shattered depth-`depth` Littlestone tree; returns the
    /// lexicographically least witness when one exists.
    pub fn shatters_littlestone_tree(
        &self,
        depth: usize,
        domain_budget: u64,
    ) -> Result<(bool, Option<LittlestoneTree>)> {
        assert!(depth >= 1, "depth >= 1");
        let budgeted = BudgetedClass::materialize(self, domain_budget, &[])?;
        let mut memo = HashMap::new();
        let alive = Bitset::full(budgeted.rows.len());
        match budgeted.littlestone_witness(&alive, depth, &mut memo) {
            Some(levels) => Ok((true, Some(LittlestoneTree { depth, levels }))),
            None => Ok((false, None)),
        }
    }

    /// Search for a shattered depth-`depth` VCL tree (level-k nodes hold
    /// k+1 distinct points; all prefix labelings must be realizable).
    pub fn shatters_vcl_tree(
        &self,
        depth: usize,
        domain_budget: u64,
    ) -> Result<(bool, Option<VclTree>)> {
        assert!(depth >= 1, "depth >= 1");
        let budgeted = BudgetedClass::materialize(self, domain_budget, &[])?;
        let alive = Bitset::full(budgeted.rows.len());
        match budgeted.vcl_witness(&alive, 0, depth) {
            Some(levels) => Ok((true, Some(VclTree { depth, levels }))),
            None => Ok((false, None)),
        }
    }

    /// Inductive eluder-sequence construction: at each step pick the
    /// smallest-coded disagreement point, keep the prefix-consistent subclass
    /// as large as possible (infinite where the kind allows), break ties
    /// toward label 0, and record the least witnessing hypothesis.
    pub fn eluder_sequence(&self, length: usize, domain_budget: u64) -> Result<EluderSequence> {
        assert!(length >= 1, "length >= 1");
        let domain = self.canonical_domain(domain_budget);
        let mut prefix = LabeledSample::default();
        let mut pairs = Vec::new();
        let mut witnesses = Vec::new();
        for step in 0..length {
            let mut chosen: Option<(Point, bool)> = None;
            for &x in &domain {
                let with = |y: bool| -> Result<SubclassSize> {
                    let mut s = prefix.clone();
                    s.pairs.push((x, y));
                    self.consistent_subclass_size(&s)
                };
                let s0 = with(false)?;
                let s1 = with(true)?;
                if s0.is_empty() || s1.is_empty() {
                    continue; // not a disagreement point
                }
                let y = match (s0, s1) {
                    (SubclassSize::Infinite, _) => false,
                    (_, SubclassSize::Infinite) => true,
                    (SubclassSize::Finite(a), SubclassSize::Finite(b)) => b > a,
                };
                chosen = Some((x, y));
                break;
            }
            let (x, y) = match chosen {
                Some(c) => c,
                None => return Err(Error::EluderExhausted { requested: length, achieved: step }),
            };
            // witness: consistent with the prefix, errs on (x, y)
            let mut pts = prefix.points();
            pts.push(x);
            let mut want = prefix.labels().0;
            want.push(!y);
            let target = Pattern(want);
            let witness = self
                .project_with_witnesses(&pts)?
                .into_iter()
                .find(|(p, _)| *p == target)
                .map(|(_, id)| id)
                .expect("disagreement point guarantees a witness");
            prefix.pairs.push((x, y));
            pairs.push((x, y));
            witnesses.push(witness);
        }
        Ok(EluderSequence { sample: LabeledSample::new(pairs), witnesses })
    }
}

/// Eluder sequence with its witnessing hypothesis ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderSequence {
    pub sample: LabeledSample,
    pub witnesses: Vec<HypId>,
}

/// Witness of a shattered Littlestone tree: `levels[k]` holds the `2^k`
/// node points of level k, indexed by the path bits (child 0 first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LittlestoneTree {
    pub depth: usize,
    pub levels: Vec<Vec<Point>>,
}

impl LittlestoneTree {
    /// Node point at depth `k` (1-based) along `branch`.
    pub fn point_on_branch(&self, branch: &[bool], k: usize) -> Point {
        assert!(k >= 1 && k <= self.depth);
        let mut idx = 0usize;
        for &b in branch.iter().take(k - 1) {
            idx = (idx << 1) | (b as usize);
        }
        self.levels[k - 1][idx]
    }
}

/// Witness of a shattered VCL tree: `levels[k][path]` holds the (k+1)-point
/// node reached by `path` (an index over the product of earlier labelings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VclTree {
    pub depth: usize,
    pub levels: Vec<Vec<Vec<Point>>>,
}

// ---------------------------------------------------------------------------
// Budgeted materialization: the class restricted to a finite point set, with
// distinct behaviors as bit-rows. Shattering searches and the SOA predictor
// run on this representation.
// ---------------------------------------------------------------------------

/// Fixed-capacity bitset over hypothesis rows. The first word is inline so
/// classes with at most 64 distinct behaviors never allocate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Bitset {
    w0: u64,
    rest: Box<[u64]>,
}

impl Bitset {
    pub(crate) fn full(n: usize) -> Bitset {
        let words = n.div_ceil(64).max(1);
        let mut b = Bitset { w0: u64::MAX, rest: vec![u64::MAX; words - 1].into_boxed_slice() };
        // clear bits >= n
        let last = words - 1;
        if n % 64 != 0 {
            let mask = (1u64 << (n % 64)) - 1;
            if last == 0 {
                b.w0 = mask;
            } else {
                b.rest[last - 1] = mask;
            }
        }
        if n == 0 {
            b.w0 = 0;
        }
        b
    }

    pub(crate) fn empty(n: usize) -> Bitset {
        let words = n.div_ceil(64).max(1);
        Bitset { w0: 0, rest: vec![0; words - 1].into_boxed_slice() }
    }

    pub(crate) fn set(&mut self, i: usize) {
        if i < 64 {
            self.w0 |= 1u64 << i;
        } else {
            self.rest[i / 64 - 1] |= 1u64 << (i % 64);
        }
    }

    pub(crate) fn and(&self, other: &Bitset) -> Bitset {
        Bitset {
            w0: self.w0 & other.w0,
            rest: self
                .rest
                .iter()
                .zip(other.rest.iter())
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub(crate) fn any(&self) -> bool {
        self.w0 != 0 || self.rest.iter().any(|&w| w != 0)
    }
}

/// A concept class restricted to a concrete point set: `rows[r]` is a distinct
/// label row over `points`, tagged with its least witnessing hypothesis id.
#[derive(Debug, Clone)]
pub(crate) struct BudgetedClass {
    pub(crate) points: Vec<Point>,
    pub(crate) node_candidates: Vec<usize>,
    pub(crate) rows: Vec<Vec<bool>>,
    /// label_mask[p][y]: rows assigning label y to points[p]
    label_mask: Vec<[Bitset; 2]>,
}

pub(crate) type LdimMemo = HashMap<(Bitset, usize), usize>;

impl BudgetedClass {
    /// Restrict `class` to its budgeted canonical domain plus `extra` points.
    /// Tree-node candidates range over the canonical domain only; extra
    /// points participate in constraints.
    pub(crate) fn materialize(
        class: &ConceptClass,
        node_budget: u64,
        extra: &[Point],
    ) -> Result<BudgetedClass> {
        let canonical = class.canonical_domain(node_budget);
        let mut points = canonical.clone();
        points.extend_from_slice(extra);
        points.sort_unstable();
        points.dedup();
        for &x in &points {
            class.check_point(x)?;
        }
        let node_candidates: Vec<usize> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| canonical.binary_search(p).is_ok())
            .map(|(i, _)| i)
            .collect();

        // distinct restrictions keyed by row bits, least witness kept
        let mut seen: BTreeMap<Vec<bool>, HypId> = BTreeMap::new();
        let mut push = |row: Vec<bool>, id: HypId| {
            seen.entry(row).or_insert(id);
        };
        match class {
            ConceptClass::FiniteTable { domain, hyps } => {
                let idx: Vec<usize> = points
                    .iter()
                    .map(|x| domain.binary_search(x).expect("validated"))
                    .collect();
                for (row_id, row) in hyps.iter().enumerate() {
                    push(idx.iter().map(|&i| row[i] == 1).collect(), HypId(row_id as u64));
                }
            }
            ConceptClass::ThresholdNat | ConceptClass::ThresholdGrid { .. } => {
                let m_cap = match class {
                    ConceptClass::ThresholdGrid { m } => Some(*m),
                    _ => None,
                };
                let mut cands: Vec<u64> = std::iter::once(1)
                    .chain(points.iter().map(|x| x.0 + 1))
                    .filter(|&a| m_cap.map_or(true, |m| a <= m))
                    .collect();
                cands.sort_unstable();
                cands.dedup();
                for a in cands {
                    push(points.iter().map(|x| x.0 >= a).collect(), HypId(a));
                }
            }
            ConceptClass::SingletonsNat => {
                let mut zero_witness = 1u64;
                let codes: Vec<u64> = points.iter().map(|p| p.0).collect();
                while codes.binary_search(&zero_witness).is_ok() {
                    zero_witness += 1;
                }
                let mut all: Vec<u64> = codes;
                all.push(zero_witness);
                all.sort_unstable();
                for a in all {
                    push(points.iter().map(|x| x.0 == a).collect(), HypId(a));
                }
            }
            ConceptClass::AllFunctionsGrid { m } => {
                if *m > ALL_FUNCTIONS_MAX_M {
                    return Err(Error::InvalidClass(format!(
                        "all_functions_grid capped at m <= {ALL_FUNCTIONS_MAX_M}"
                    )));
                }
                // distinct restrictions = all assignments of the point set
                let d = points.len();
                for assign in 0u64..(1u64 << d) {
                    let mut mask = 0u64;
                    for (j, p) in points.iter().enumerate() {
                        if (assign >> j) & 1 == 1 {
                            mask |= 1u64 << (p.0 - 1);
                        }
                    }
                    push((0..d).map(|j| (assign >> j) & 1 == 1).collect(), HypId(mask));
                }
            }
        }
        let rows: Vec<Vec<bool>> = seen.into_keys().collect();
        let n_rows = rows.len();
        let mut label_mask: Vec<[Bitset; 2]> = (0..points.len())
            .map(|_| [Bitset::empty(n_rows), Bitset::empty(n_rows)])
            .collect();
        for (r, row) in rows.iter().enumerate() {
            for (p, &b) in row.iter().enumerate() {
                label_mask[p][b as usize].set(r);
            }
        }
        Ok(BudgetedClass { points, node_candidates, rows, label_mask })
    }

    pub(crate) fn point_index(&self, x: Point) -> Option<usize> {
        self.points.binary_search(&x).ok()
    }

    /// Rows of `alive` consistent with labeling point index `p` as `y`.
    pub(crate) fn filter(&self, alive: &Bitset, p: usize, y: bool) -> Bitset {
        alive.and(&self.label_mask[p][y as usize])
    }

    pub(crate) fn alive_after(&self, sample: &LabeledSample) -> Option<Bitset> {
        let mut alive = Bitset::full(self.rows.len());
        for &(x, y) in &sample.pairs {
            let p = self.point_index(x)?;
            alive = self.filter(&alive, p, y);
        }
        Some(alive)
    }

    /// `min(Ldim(alive), cap)` via the max-min game recursion.
    pub(crate) fn ldim_bounded(&self, alive: &Bitset, cap: usize, memo: &mut LdimMemo) -> usize {
        if cap == 0 || !alive.any() {
            return 0;
        }
        let key = (alive.clone(), cap);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let mut best = 0usize;
        for &p in &self.node_candidates {
            let a0 = self.filter(alive, p, false);
            if !a0.any() {
                continue;
            }
            let a1 = self.filter(alive, p, true);
            if !a1.any() {
                continue;
            }
            let d0 = self.ldim_bounded(&a0, cap - 1, memo);
            let d = if d0 == 0 {
                1 // min with the other side is at most d0 + 1
            } else {
                1 + d0.min(self.ldim_bounded(&a1, cap - 1, memo))
            };
            if d > best {
                best = d;
                if best == cap {
                    break;
                }
            }
        }
        memo.insert(key, best);
        best
    }

    fn littlestone_witness(
        &self,
        alive: &Bitset,
        depth: usize,
        memo: &mut LdimMemo,
    ) -> Option<Vec<Vec<Point>>> {
        if depth == 0 {
            return Some(Vec::new());
        }
        if self.ldim_bounded(alive, depth, memo) < depth {
            return None;
        }
        for &p in &self.node_candidates {
            let a0 = self.filter(alive, p, false);
            let a1 = self.filter(alive, p, true);
            if !a0.any() || !a1.any() {
                continue;
            }
            if self.ldim_bounded(&a0, depth - 1, memo) < depth - 1
                || self.ldim_bounded(&a1, depth - 1, memo) < depth - 1
            {
                continue;
            }
            let t0 = self.littlestone_witness(&a0, depth - 1, memo)?;
            let t1 = self.littlestone_witness(&a1, depth - 1, memo)?;
            let mut levels = vec![vec![self.points[p]]];
            for k in 0..depth - 1 {
                let mut level = t0[k].clone();
                level.extend_from_slice(&t1[k]);
                levels.push(level);
            }
            return Some(levels);
        }
        None
    }

    fn vcl_witness(&self, alive: &Bitset, k: usize, depth: usize) -> Option<Vec<Vec<Vec<Point>>>> {
        if k == depth {
            return Some(vec![Vec::new(); 0]);
        }
        let node_size = k + 1;
        let cands = &self.node_candidates;
        if cands.len() < node_size {
            return None;
        }
        let mut combo = Combinations::new(cands.len(), node_size);
        'next_combo: while let Some(idx) = combo.next() {
            let node_pts: Vec<usize> = idx.iter().map(|&i| cands[i]).collect();
            let mut subtrees: Vec<Vec<Vec<Vec<Point>>>> = Vec::with_capacity(1 << node_size);
            for y in 0u64..(1u64 << node_size) {
                let mut a = alive.clone();
                for (j, &p) in node_pts.iter().enumerate() {
                    a = self.filter(&a, p, (y >> j) & 1 == 1);
                    if !a.any() {
                        continue 'next_combo;
                    }
                }
                match self.vcl_witness(&a, k + 1, depth) {
                    Some(t) => subtrees.push(t),
                    None => continue 'next_combo,
                }
            }
            // assemble: this node at level k, merged children below
            let node: Vec<Point> = node_pts.iter().map(|&p| self.points[p]).collect();
            let mut levels: Vec<Vec<Vec<Point>>> = vec![vec![node]];
            for lvl in 0..depth - k - 1 {
                let mut merged = Vec::new();
                for t in &subtrees {
                    merged.extend(t[lvl].iter().cloned());
                }
                levels.push(merged);
            }
            return Some(levels);
        }
        None
    }
}

/// Ascending index-combination enumerator.
pub(crate) struct Combinations {
    n: usize,
    k: usize,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Combinations {
        Combinations { n, k, idx: (0..k).collect(), started: false, done: k > n || k == 0 }
    }

    #[allow(clippy::should_implement_trait)]
    pub(crate) fn next(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.idx);
        }
        let k = self.k;
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                return None;
            }
            i -= 1;
            if self.idx[i] + 1 <= self.n - (k - i) {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(&self.idx);
            }
        }
    }
}
