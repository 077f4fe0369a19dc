//! Partial concept classes induced by forbidden patterns, their projections
//! and VC dimension, and the transductive-ERM learner.
//!
//! A class is a union of components; each component admits exactly the
//! patterns that give duplicated points equal labels and never place a
//! component's forbidden labeling on any ascending k-subtuple of distinct
//! points. Forbidden patterns are evaluated lazily per subtuple, never
//! materialized globally.

use serde::{Deserialize, Serialize};

use crate::adversary::DiscreteDistribution;
use crate::bounds::epsilon_n;
use crate::domain::{Combinations, ConceptClass, Dim, LabeledSample, Pattern, Point};
use crate::error::{Error, Result};
use crate::strategies::ForbiddenPatternFn;

/// Enumeration caps for the projection machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialBudget {
    pub max_points: usize,
    pub max_k: usize,
    pub max_b: usize,
}

impl Default for PartialBudget {
    fn default() -> Self {
        PartialBudget { max_points: 32, max_k: 4, max_b: 16 }
    }
}

/// A forbidden-pattern-backed partial concept class: the union of its
/// components' admissible finite-support partial concepts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialClass {
    components: Vec<ForbiddenPatternFn>,
}

impl<'de> Deserialize<'de> for PartialClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            components: Vec<ForbiddenPatternFn>,
        }
        let r = Repr::deserialize(d)?;
        PartialClass::new(r.components).map_err(serde::de::Error::custom)
    }
}

impl PartialClass {
    /// Components must be nonempty and share the same base class.
    pub fn new(components: Vec<ForbiddenPatternFn>) -> Result<PartialClass> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("partial class needs >= 1 component".into()));
        }
        let class = components[0].class();
        if !components.iter().all(|c| c.class() == class) {
            return Err(Error::InvalidArgument(
                "all components must share the same base class".into(),
            ));
        }
        Ok(PartialClass { components })
    }

    pub fn components(&self) -> &[ForbiddenPatternFn] {
        &self.components
    }

    pub fn class(&self) -> &ConceptClass {
        self.components[0].class()
    }
}

/// One component per relabeling of the batch (2^b components, all carrying
/// the surrogate's batch-length-determined pattern arity).
pub fn induce_partial_class(class: &ConceptClass, batch: &LabeledSample) -> Result<PartialClass> {
    induce_partial_class_budgeted(class, batch, &PartialBudget::default())
}

pub fn induce_partial_class_budgeted(
    class: &ConceptClass,
    batch: &LabeledSample,
    budget: &PartialBudget,
) -> Result<PartialClass> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::InvalidArgument("induce_partial_class needs batch length >= 1".into()));
    }
    if b > budget.max_b {
        return Err(Error::BudgetExceeded(format!(
            "relabeling enumeration 2^{b} exceeds cap b <= {}",
            budget.max_b
        )));
    }
    let mut components = Vec::with_capacity(1usize << b);
    for mask in 0u64..(1u64 << b) {
        let pattern = Pattern((0..b).map(|j| (mask >> (b - 1 - j)) & 1 == 1).collect());
        components.push(ForbiddenPatternFn::from_batch(class.clone(), batch.relabel(&pattern))?);
    }
    PartialClass::new(components)
}

/// The set of total binary patterns on `xs` admitted by at least one
/// component, deduplicated, in lexicographic order.
pub fn partial_project(g: &PartialClass, xs: &[Point]) -> Result<Vec<Pattern>> {
    partial_project_budgeted(g, xs, &PartialBudget::default())
}

pub fn partial_project_budgeted(
    g: &PartialClass,
    xs: &[Point],
    budget: &PartialBudget,
) -> Result<Vec<Pattern>> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("partial_project needs >= 1 point".into()));
    }
    let mut distinct: Vec<Point> = xs.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    // duplicates collapse before any enumeration, so the cap binds on the
    // distinct count (the 2^n / C(n,k) blow-up lives there)
    if distinct.len() > budget.max_points {
        return Err(Error::BudgetExceeded(format!(
            "{} distinct transductive points exceed cap {}",
            distinct.len(),
            budget.max_points
        )));
    }

    // identical (class, k) components admit identical pattern sets
    let mut seen_k: Vec<usize> = Vec::new();
    let mut allowed = std::collections::HashSet::<u64>::new();
    for comp in g.components() {
        if seen_k.contains(&comp.k()) {
            continue;
        }
        seen_k.push(comp.k());
        for mask in component_masks(comp, &distinct, budget)? {
            allowed.insert(mask);
        }
    }

    let mut out: Vec<Pattern> = allowed
        .into_iter()
        .map(|mask| {
            Pattern(
                xs.iter()
                    .map(|x| {
                        let j = distinct.binary_search(x).expect("member");
                        (mask >> j) & 1 == 1
                    })
                    .collect(),
            )
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Label assignments of the distinct (ascending) points admitted by one
/// component, as bitmasks (bit j = label of distinct[j]).
fn component_masks(
    comp: &ForbiddenPatternFn,
    distinct: &[Point],
    budget: &PartialBudget,
) -> Result<Vec<u64>> {
    let d = distinct.len();
    let k = comp.k();
    if k > budget.max_k {
        return Err(Error::BudgetExceeded(format!(
            "pattern arity k={k} exceeds cap {}",
            budget.max_k
        )));
    }
    // no k distinct points: only the duplicate rule constrains, which the
    // distinct-mask representation already encodes
    if d < k {
        return Ok((0u64..(1u64 << d)).collect());
    }
    // constraints on ascending subtuples, grouped by their last index so the
    // DFS can check each as soon as it becomes fully assigned
    let n_subtuples = binomial(d, k);
    if n_subtuples > 200_000 {
        return Err(Error::BudgetExceeded(format!(
            "C({d},{k}) = {n_subtuples} forbidden-pattern subtuples"
        )));
    }
    let mut by_last: Vec<Vec<(Vec<usize>, Vec<bool>)>> = vec![Vec::new(); d];
    let mut combos = Combinations::new(d, k);
    while let Some(idx) = combos.next() {
        let pts: Vec<Point> = idx.iter().map(|&i| distinct[i]).collect();
        let forbidden = comp.forbidden(&pts)?;
        by_last[idx[k - 1]].push((idx.to_vec(), forbidden.0));
    }

    let mut masks = Vec::new();
    let mut assignment = vec![false; d];
    dfs_masks(&by_last, &mut assignment, 0, d, &mut masks);
    Ok(masks)
}

fn dfs_masks(
    by_last: &[Vec<(Vec<usize>, Vec<bool>)>],
    assignment: &mut Vec<bool>,
    pos: usize,
    d: usize,
    out: &mut Vec<u64>,
) {
    if pos == d {
        let mut mask = 0u64;
        for (j, &b) in assignment.iter().enumerate() {
            if b {
                mask |= 1 << j;
            }
        }
        out.push(mask);
        return;
    }
    'label: for y in [false, true] {
        assignment[pos] = y;
        for (idx, forbidden) in &by_last[pos] {
            if idx.iter().zip(forbidden).all(|(&i, &f)| assignment[i] == f) {
                continue 'label;
            }
        }
        dfs_masks(by_last, assignment, pos + 1, d, out);
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut r = 1u64;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    r
}

/// Largest `d <= point_budget` with some d-tuple fully shattered under
/// `partial_project`.
pub fn partial_vc_dimension(g: &PartialClass, point_budget: usize) -> Result<Dim> {
    partial_vc_dimension_budgeted(g, point_budget, &PartialBudget::default())
}

pub fn partial_vc_dimension_budgeted(
    g: &PartialClass,
    point_budget: usize,
    budget: &PartialBudget,
) -> Result<Dim> {
    assert!(point_budget >= 1, "point_budget >= 1");
    let domain = g.class().canonical_domain(point_budget as u64);
    let max_d = point_budget.min(domain.len()).min(budget.max_points);
    let mut value = 0usize;
    for d in 1..=max_d {
        let mut found = false;
        let mut combo = Combinations::new(domain.len(), d);
        while let Some(idx) = combo.next() {
            let xs: Vec<Point> = idx.iter().map(|&i| domain[i]).collect();
            if partial_project_budgeted(g, &xs, budget)?.len() == 1usize << d {
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

/// Transductive empirical risk minimization over `prefix` points plus the
/// unlabeled `suffix`: among the admitted patterns on all points, the one
/// with the fewest prefix disagreements. The tie-break is suffix-order
/// invariant: patterns are compared lexicographically after reordering the
/// suffix coordinates by ascending point code. An empty projection yields
/// the all-zeros pattern.
pub fn term(g: &PartialClass, prefix: &LabeledSample, suffix: &[Point]) -> Result<Pattern> {
    term_budgeted(g, prefix, suffix, &PartialBudget::default())
}

pub fn term_budgeted(
    g: &PartialClass,
    prefix: &LabeledSample,
    suffix: &[Point],
    budget: &PartialBudget,
) -> Result<Pattern> {
    let p = prefix.len();
    let s = suffix.len();
    if s != p && s != p + 1 {
        return Err(Error::InvalidArgument(format!(
            "prefix/suffix lengths ({p}, {s}) do not split any single n"
        )));
    }
    let mut all_points = prefix.points();
    all_points.extend_from_slice(suffix);
    let patterns = partial_project_budgeted(g, &all_points, budget)?;
    Ok(select_term_pattern(&patterns, prefix, suffix))
}

/// The argmin/tie-break core of `term`, split out so the empty-projection
/// fallback is directly testable.
fn select_term_pattern(patterns: &[Pattern], prefix: &LabeledSample, suffix: &[Point]) -> Pattern {
    let p = prefix.len();
    let s = suffix.len();
    if patterns.is_empty() {
        return Pattern::zeros(p + s);
    }
    // canonical suffix coordinate order: ascending point code (equal codes
    // carry equal labels in every admitted pattern, so stability is moot)
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by_key(|&j| suffix[j]);
    let canonical_key = |pat: &Pattern| -> Vec<bool> {
        let mut key: Vec<bool> = pat.0[..p].to_vec();
        key.extend(order.iter().map(|&j| pat.0[p + j]));
        key
    };
    let prefix_errors = |pat: &Pattern| -> usize {
        prefix.pairs.iter().zip(&pat.0[..p]).filter(|(&(_, y), &b)| b != y).count()
    };
    patterns
        .iter()
        .min_by(|a, b| {
            prefix_errors(a)
                .cmp(&prefix_errors(b))
                .then_with(|| canonical_key(a).cmp(&canonical_key(b)))
        })
        .expect("nonempty")
        .clone()
}

/// Transductive prediction at `x`: first ceil(n/2) pairs stay labeled, the
/// remaining points plus `x` form the unlabeled suffix; returns the selected
/// pattern's final coordinate.
pub fn term_predict(g: &PartialClass, sample: &LabeledSample, x: Point) -> Result<bool> {
    term_predict_budgeted(g, sample, x, &PartialBudget::default())
}

pub fn term_predict_budgeted(
    g: &PartialClass,
    sample: &LabeledSample,
    x: Point,
    budget: &PartialBudget,
) -> Result<bool> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::InvalidArgument("term_predict needs n >= 1".into()));
    }
    let cut = n.div_ceil(2);
    let prefix = sample.slice(0..cut);
    let mut suffix: Vec<Point> = sample.pairs[cut..].iter().map(|&(p, _)| p).collect();
    suffix.push(x);
    let pattern = term_budgeted(g, &prefix, &suffix, budget)?;
    Ok(*pattern.0.last().expect("nonempty pattern"))
}

/// Semi-empirical near-optimality diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiEmpiricalDiagnostics {
    pub epsilon_t: f64,
    pub bar_sigma_sq: f64,
}

/// The `bar sigma^2` diagnostic: the worst empirical distance from a
/// `c3·eps_t`-near-optimal admitted pattern to the `c4·eps_t^2`-near-optimal
/// set, floored by `eps_t^2`; degenerate level sets yield 1.
///
/// Near-optimality is in semi-empirical error, `mean_i P(Y_i != g(x_i)|x_i)`,
/// taken from the distribution's conditional label probabilities.
pub fn bar_sigma_diagnostic(
    g: &PartialClass,
    dist: &DiscreteDistribution,
    xs: &[Point],
    c3: f64,
    c4: f64,
) -> Result<SemiEmpiricalDiagnostics> {
    bar_sigma_diagnostic_budgeted(g, dist, xs, c3, c4, &PartialBudget::default())
}

/// `bar_sigma_diagnostic` with c3, c4 taken from the derived-constants table
/// at its default c0.
pub fn bar_sigma_diagnostic_default_constants(
    g: &PartialClass,
    dist: &DiscreteDistribution,
    xs: &[Point],
) -> Result<SemiEmpiricalDiagnostics> {
    let t = crate::bounds::ConstantsTable::default();
    bar_sigma_diagnostic(g, dist, xs, t.c3, t.c4)
}

pub fn bar_sigma_diagnostic_budgeted(
    g: &PartialClass,
    dist: &DiscreteDistribution,
    xs: &[Point],
    c3: f64,
    c4: f64,
    budget: &PartialBudget,
) -> Result<SemiEmpiricalDiagnostics> {
    let t = xs.len();
    if t == 0 {
        return Err(Error::InvalidArgument("bar_sigma_diagnostic needs >= 1 point".into()));
    }
    let etas: Vec<f64> = xs
        .iter()
        .map(|&x| {
            dist.eta_at(x).ok_or_else(|| {
                Error::InvalidArgument(format!("point {} has no atom in the distribution", x.0))
            })
        })
        .collect::<Result<_>>()?;
    let vc = partial_vc_dimension_budgeted(g, t, budget)?.value as u64;
    let eps_t = epsilon_n(t as u64, vc);

    let patterns = partial_project_budgeted(g, xs, budget)?;
    let bayes_bar: f64 = etas.iter().map(|&e| e.min(1.0 - e)).sum::<f64>() / t as f64;
    let excess = |pat: &Pattern| -> f64 {
        let e: f64 = pat
            .0
            .iter()
            .zip(&etas)
            .map(|(&b, &eta)| if b { 1.0 - eta } else { eta })
            .sum::<f64>()
            / t as f64;
        e - bayes_bar
    };
    let near: Vec<&Pattern> = patterns.iter().filter(|p| excess(p) <= c3 * eps_t).collect();
    let tight: Vec<&Pattern> = patterns.iter().filter(|p| excess(p) <= c4 * eps_t * eps_t).collect();
    let bar_sigma_sq = if near.is_empty() || tight.is_empty() {
        1.0
    } else {
        let mut worst: f64 = 0.0;
        for gp in &near {
            let closest = tight
                .iter()
                .map(|f| {
                    gp.0.iter().zip(&f.0).filter(|(a, b)| a != b).count() as f64 / t as f64
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(closest);
        }
        worst.max(eps_t * eps_t).min(1.0)
    };
    Ok(SemiEmpiricalDiagnostics { epsilon_t: eps_t, bar_sigma_sq })
}
