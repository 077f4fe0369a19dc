//! Python bindings for the core types and operations: concept classes and
//! their combinatorial dimensions, partial classes with transductive ERM,
//! the four learners, the adversarial distribution families, the bounds
//! oracles, and the Monte Carlo curve harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ratelab::adversary;
use ratelab::bounds;
use ratelab::domain::{ConceptClass, HypId, LabeledSample, Point};
use ratelab::lab;
use ratelab::learners::{self, LearnerConfig, LearnerKind};
use ratelab::partial;
use ratelab::strategies;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_sample(pairs: Vec<(u64, bool)>) -> LabeledSample {
    LabeledSample::new(pairs.into_iter().map(|(x, y)| (Point(x), y)).collect())
}

fn parse_learner(name: &str) -> PyResult<LearnerKind> {
    match name {
        "erm" => Ok(LearnerKind::Erm),
        "baseline" => Ok(LearnerKind::Baseline),
        "exp" => Ok(LearnerKind::Exp),
        "vclroot" => Ok(LearnerKind::VclRoot),
        _ => Err(PyValueError::new_err(format!("unknown learner: {name}"))),
    }
}

/// An enumerable, evaluable family of binary hypotheses.
#[pyclass(name = "ConceptClass", skip_from_py_object)]
#[derive(Clone)]
struct PyConceptClass {
    inner: ConceptClass,
}

#[pymethods]
impl PyConceptClass {
    /// Build from the JSON descriptor, e.g. `{"kind":"threshold_nat"}`.
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        Ok(PyConceptClass { inner: ConceptClass::from_json(json).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn kind(&self) -> String {
        self.inner.kind_name().to_string()
    }

    fn evaluate(&self, hyp: u64, x: u64) -> PyResult<bool> {
        self.inner.evaluate(HypId(hyp), Point(x)).map_err(err)
    }

    /// Realizable label patterns on the tuple, in lexicographic order.
    fn project(&self, xs: Vec<u64>) -> PyResult<Vec<Vec<bool>>> {
        let pts: Vec<Point> = xs.into_iter().map(Point).collect();
        Ok(self.inner.project(&pts).map_err(err)?.into_iter().map(|p| p.0).collect())
    }

    fn is_realizable(&self, pairs: Vec<(u64, bool)>) -> PyResult<bool> {
        self.inner.is_realizable(&to_sample(pairs)).map_err(err)
    }

    /// (value, saturated)
    fn vc_dimension(&self, point_budget: usize) -> PyResult<(usize, bool)> {
        let d = self.inner.vc_dimension(point_budget).map_err(err)?;
        Ok((d.value, d.saturated))
    }

    fn littlestone_dimension(
        &self,
        depth_budget: usize,
        domain_budget: u64,
    ) -> PyResult<(usize, bool)> {
        let d = self.inner.littlestone_dimension(depth_budget, domain_budget).map_err(err)?;
        Ok((d.value, d.saturated))
    }

    /// (shattered, witness levels as nested point lists)
    fn shatters_littlestone_tree(
        &self,
        depth: usize,
        domain_budget: u64,
    ) -> PyResult<(bool, Option<Vec<Vec<u64>>>)> {
        let (ok, wit) = self.inner.shatters_littlestone_tree(depth, domain_budget).map_err(err)?;
        Ok((
            ok,
            wit.map(|t| t.levels.iter().map(|l| l.iter().map(|p| p.0).collect()).collect()),
        ))
    }

    fn shatters_vcl_tree(
        &self,
        depth: usize,
        domain_budget: u64,
    ) -> PyResult<(bool, Option<Vec<Vec<Vec<u64>>>>)> {
        let (ok, wit) = self.inner.shatters_vcl_tree(depth, domain_budget).map_err(err)?;
        Ok((ok, wit.map(|t| {
            t.levels
                .iter()
                .map(|lvl| lvl.iter().map(|node| node.iter().map(|p| p.0).collect()).collect())
                .collect()
        })))
    }

    /// ((point, label) pairs, witness hypothesis ids)
    fn eluder_sequence(
        &self,
        length: usize,
        domain_budget: u64,
    ) -> PyResult<(Vec<(u64, bool)>, Vec<u64>)> {
        let e = self.inner.eluder_sequence(length, domain_budget).map_err(err)?;
        Ok((
            e.sample.pairs.iter().map(|&(x, y)| (x.0, y)).collect(),
            e.witnesses.iter().map(|w| w.0).collect(),
        ))
    }
}

/// A countable-support distribution over instance x label.
#[pyclass(name = "DiscreteDistribution", skip_from_py_object)]
#[derive(Clone)]
struct PyDistribution {
    inner: adversary::DiscreteDistribution,
}

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        Ok(PyDistribution { inner: adversary::DiscreteDistribution::from_json(json).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn bayes_error(&self) -> f64 {
        self.inner.bayes_error_lo()
    }

    fn atoms(&self) -> Vec<(u64, f64, f64)> {
        self.inner.atoms.iter().map(|a| (a.x.0, a.p, a.eta)).collect()
    }

    fn tail_mass(&self) -> f64 {
        self.inner.tail_mass
    }

    /// n i.i.d. draws with a deterministic (seed, n, rep)-derived stream.
    fn sample(&self, n: usize, seed: u64, rep: u64) -> PyResult<Vec<(u64, bool)>> {
        let mut rng = lab::rep_rng(seed, n as u64, rep);
        let (s, _) = adversary::sample(&self.inner, n, &mut rng, adversary::DEFAULT_TAIL_THRESHOLD)
            .map_err(err)?;
        Ok(s.pairs.iter().map(|&(x, y)| (x.0, y)).collect())
    }
}

/// A trained classifier.
#[pyclass(name = "Predictor")]
struct PyPredictor {
    inner: learners::Predictor,
}

#[pymethods]
impl PyPredictor {
    fn evaluate(&self, x: u64) -> PyResult<bool> {
        self.inner.evaluate(Point(x)).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }
}

/// A forbidden-pattern-backed partial concept class.
#[pyclass(name = "PartialClass", skip_from_py_object)]
#[derive(Clone)]
struct PyPartialClass {
    inner: partial::PartialClass,
}

#[pymethods]
impl PyPartialClass {
    fn partial_project(&self, xs: Vec<u64>) -> PyResult<Vec<Vec<bool>>> {
        let pts: Vec<Point> = xs.into_iter().map(Point).collect();
        Ok(partial::partial_project(&self.inner, &pts)
            .map_err(err)?
            .into_iter()
            .map(|p| p.0)
            .collect())
    }

    fn partial_vc_dimension(&self, point_budget: usize) -> PyResult<(usize, bool)> {
        let d = partial::partial_vc_dimension(&self.inner, point_budget).map_err(err)?;
        Ok((d.value, d.saturated))
    }

    fn term_predict(&self, sample: Vec<(u64, bool)>, x: u64) -> PyResult<bool> {
        partial::term_predict(&self.inner, &to_sample(sample), Point(x)).map_err(err)
    }

    fn component_count(&self) -> usize {
        self.inner.components().len()
    }
}

#[pyfunction]
fn paper_log(x: f64) -> f64 {
    bounds::paper_log(x)
}

#[pyfunction]
fn epsilon_sq(n: u64, delta: f64, vc: u64) -> f64 {
    bounds::epsilon_sq(n, delta, vc)
}

#[pyfunction]
fn epsilon_n(n: u64, vc: u64) -> f64 {
    bounds::epsilon_n(n, vc)
}

#[pyfunction]
fn coin_test_bayes_error(gamma: f64, n: u64) -> f64 {
    bounds::coin_test_bayes_error(gamma, n)
}

/// The derived constants table for a given c0, as a dict-like list.
#[pyfunction]
fn constants_table(c0: f64) -> Vec<(String, f64)> {
    let t = bounds::ConstantsTable::new(c0);
    vec![
        ("c0".into(), t.c0),
        ("c1".into(), t.c1),
        ("c2".into(), t.c2),
        ("c3".into(), t.c3),
        ("c4".into(), t.c4),
        ("c5".into(), t.c5),
        ("c6".into(), t.c6),
        ("c7".into(), t.c7),
    ]
}

#[pyfunction]
fn vcl_k(class: &PyConceptClass, batch: Vec<(u64, bool)>) -> PyResult<usize> {
    strategies::vcl_k(&class.inner, &to_sample(batch)).map_err(err)
}

#[pyfunction]
fn induce_partial_class(
    class: &PyConceptClass,
    batch: Vec<(u64, bool)>,
) -> PyResult<PyPartialClass> {
    Ok(PyPartialClass {
        inner: partial::induce_partial_class(&class.inner, &to_sample(batch)).map_err(err)?,
    })
}

/// Train a learner ("erm" | "baseline" | "exp" | "vclroot").
#[pyfunction]
#[pyo3(signature = (learner, class, sample, b_cap=None))]
fn train(
    learner: &str,
    class: &PyConceptClass,
    sample: Vec<(u64, bool)>,
    b_cap: Option<usize>,
) -> PyResult<PyPredictor> {
    let kind = parse_learner(learner)?;
    let mut cfg = LearnerConfig::default();
    if let Some(b) = b_cap {
        cfg.b_cap_exp = b;
        cfg.b_cap_vcl = b;
    }
    let out = learners::train(kind, &class.inner, &to_sample(sample), &cfg).map_err(err)?;
    Ok(PyPredictor { inner: out.predictor })
}

#[pyfunction]
fn finite_lb_pair(
    class: &PyConceptClass,
    domain_budget: u64,
) -> PyResult<(PyDistribution, PyDistribution)> {
    let (p0, p1) = adversary::finite_lb_pair(&class.inner, domain_budget).map_err(err)?;
    Ok((PyDistribution { inner: p0 }, PyDistribution { inner: p1 }))
}

#[pyfunction]
fn near_exp_family(
    class: &PyConceptClass,
    beta: f64,
    i: usize,
    depth: usize,
    domain_budget: u64,
) -> PyResult<PyDistribution> {
    Ok(PyDistribution {
        inner: adversary::near_exp_family(&class.inner, beta, i, depth, domain_budget)
            .map_err(err)?,
    })
}

/// The super-root (n_k, p_k) schedule as a JSON report; phi is
/// "invsqrtlog" or "power:A".
#[pyfunction]
fn super_root_schedule(phi: &str, depth: usize) -> PyResult<String> {
    let phi = parse_phi(phi)?;
    let s = adversary::super_root_schedule(phi, depth).map_err(err)?;
    adversary::verify_schedule(&s).map_err(err)?;
    serde_json::to_string(&s).map_err(err)
}

fn parse_phi(s: &str) -> PyResult<adversary::PhiFn> {
    if s == "invsqrtlog" {
        Ok(adversary::PhiFn::InvSqrtLog)
    } else if let Some(a) = s.strip_prefix("power:") {
        Ok(adversary::PhiFn::Power { a: a.parse().map_err(err)? })
    } else {
        Err(PyValueError::new_err(format!("unknown phi: {s}")))
    }
}

#[pyfunction]
fn exact_error(dist: &PyDistribution, pred: &PyPredictor) -> PyResult<(f64, f64)> {
    let e = adversary::exact_error(&dist.inner, &pred.inner).map_err(err)?;
    Ok((e.lo, e.hi))
}

#[pyfunction]
fn class_optimal_error(dist: &PyDistribution, class: &PyConceptClass) -> PyResult<(f64, f64)> {
    let e = adversary::class_optimal_error(&dist.inner, &class.inner).map_err(err)?;
    Ok((e.lo, e.hi))
}

/// Learning curve points as (n, mean_excess, stderr, reps, ci_tail) tuples.
#[pyfunction]
#[pyo3(signature = (learner, class, dist, ns, reps, seed, b_cap=None))]
fn learning_curve(
    learner: &str,
    class: &PyConceptClass,
    dist: &PyDistribution,
    ns: Vec<u64>,
    reps: u32,
    seed: u64,
    b_cap: Option<usize>,
) -> PyResult<Vec<(u64, f64, f64, u32, f64)>> {
    let kind = parse_learner(learner)?;
    let mut cfg = LearnerConfig::default();
    if let Some(b) = b_cap {
        cfg.b_cap_exp = b;
        cfg.b_cap_vcl = b;
    }
    let curve =
        lab::learning_curve(kind, &class.inner, &dist.inner, &ns, reps, seed, &cfg).map_err(err)?;
    Ok(curve
        .points
        .iter()
        .map(|p| (p.n, p.mean_excess, p.stderr, p.reps, p.ci_tail))
        .collect())
}

#[pymodule]
fn ratelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConceptClass>()?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyPredictor>()?;
    m.add_class::<PyPartialClass>()?;
    m.add_function(wrap_pyfunction!(paper_log, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_sq, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_n, m)?)?;
    m.add_function(wrap_pyfunction!(coin_test_bayes_error, m)?)?;
    m.add_function(wrap_pyfunction!(constants_table, m)?)?;
    m.add_function(wrap_pyfunction!(vcl_k, m)?)?;
    m.add_function(wrap_pyfunction!(induce_partial_class, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(finite_lb_pair, m)?)?;
    m.add_function(wrap_pyfunction!(near_exp_family, m)?)?;
    m.add_function(wrap_pyfunction!(super_root_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(exact_error, m)?)?;
    m.add_function(wrap_pyfunction!(class_optimal_error, m)?)?;
    m.add_function(wrap_pyfunction!(learning_curve, m)?)?;
    Ok(())
}
