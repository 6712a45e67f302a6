//! Python bindings for the compositional causal reasoning library.
//!
//! The module mirrors the Rust surface at the granularity a notebook
//! wants: build or load a [`Task`], inspect its cut-point tree, compute
//! exact ground truth, run the synthetic-reasoner protocol end to end
//! with [`run_protocol`], and poke at individual pieces (verdict
//! extraction, chain composition) directly. Structured results cross the
//! boundary as plain dicts via their canonical JSON form, so Python sees
//! exactly what the files on disk would contain.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ccr::estimand;
use ccr::evaluate::{compute_truth, run_evaluation, EvalConfig};
use ccr::fixtures;
use ccr::reasoner::{
    extract_rules, read_responses, run_batch, Extractor, NoisyOracle, OracleReasoner, Reasoner,
    RunOptions, Verdict, WrongModelOracle,
};
use ccr::report::{export_cct_dot, summarize, EvalSummary};
use ccr::task::{gen_corpus, gen_task, BccShape, GenConfig, TaskSpec, Theme};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parse a JSON string into Python objects with the stdlib `json` module.
fn loads(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    loads(py, &serde_json::to_string(value).map_err(err)?)
}

/// A fully specified reasoning task: graph, mechanisms, narrative surface.
#[pyclass(frozen)]
struct Task {
    inner: TaskSpec,
}

#[pymethods]
impl Task {
    /// Load one of the pinned example tasks by name.
    #[staticmethod]
    fn fixture(name: &str, seed: u64) -> PyResult<Self> {
        Ok(Task { inner: fixtures::fixture_by_name(name, seed).map_err(err)? })
    }

    /// Generate a random admissible task.
    #[staticmethod]
    #[pyo3(signature = (seed, bccs=3, nodes_per_bcc=3, shape="cycle", theme="candyparty", and_fraction=0.0))]
    fn generate(
        seed: u64,
        bccs: usize,
        nodes_per_bcc: usize,
        shape: &str,
        theme: &str,
        and_fraction: f64,
    ) -> PyResult<Self> {
        let shape = match shape {
            "cycle" => BccShape::Cycle,
            "wheel" => BccShape::Wheel,
            other => return Err(err(format!("unknown shape {other:?} (cycle | wheel)"))),
        };
        let theme = match theme {
            "candyparty" => Theme::CandyParty,
            "flowergarden" => Theme::FlowerGarden,
            other => {
                return Err(err(format!("unknown theme {other:?} (candyparty | flowergarden)")))
            }
        };
        let cfg = GenConfig { n_bccs: bccs, nodes_per_bcc, shape, theme, seed, and_fraction };
        Ok(Task { inner: gen_task(&cfg).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Task { inner: serde_json::from_str(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(err)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    /// Node names in topological order.
    fn nodes(&self) -> Vec<String> {
        let dag = self.inner.dag();
        dag.topo_order().iter().map(|&v| dag.name(v).to_string()).collect()
    }

    fn edges(&self) -> Vec<(String, String)> {
        let dag = self.inner.dag();
        dag.edges()
            .iter()
            .map(|&(a, b)| (dag.name(a).to_string(), dag.name(b).to_string()))
            .collect()
    }

    /// Root, cut points in order, leaf.
    fn cct_chain(&self) -> PyResult<Vec<String>> {
        let analysis = self.inner.analysis().map_err(err)?;
        let dag = self.inner.dag();
        Ok(analysis.cct.chain().iter().map(|&v| dag.name(v).to_string()).collect())
    }

    /// Every quantity of interest as a `(cause, effect)` pair, global first.
    fn quantity_pairs(&self) -> PyResult<Vec<(String, String)>> {
        let analysis = self.inner.analysis().map_err(err)?;
        let dag = self.inner.dag();
        Ok(analysis
            .plan
            .all_pairs()
            .iter()
            .map(|&(c, e)| (dag.name(c).to_string(), dag.name(e).to_string()))
            .collect())
    }

    /// Every root-to-leaf path of the cut-point tree as a node-name list.
    fn compositions(&self) -> PyResult<Vec<Vec<String>>> {
        let analysis = self.inner.analysis().map_err(err)?;
        let dag = self.inner.dag();
        Ok(analysis
            .cct
            .paths()
            .iter()
            .map(|path| path.nodes.iter().map(|&v| dag.name(v).to_string()).collect())
            .collect())
    }

    /// The narrative context paragraph shared by every prompt.
    fn context(&self) -> String {
        self.inner.render_context()
    }

    /// Render the factual and counterfactual prompts for one pair and
    /// exogenous sample.
    fn query(&self, py: Python<'_>, cause: &str, effect: &str, sample: u64) -> PyResult<Py<PyAny>> {
        let dag = self.inner.dag();
        let c = dag.index_of(cause).ok_or_else(|| err(format!("unknown node {cause:?}")))?;
        let e = dag.index_of(effect).ok_or_else(|| err(format!("unknown node {effect:?}")))?;
        let q = self.inner.render_queries(c, e, sample, self.inner.seed()).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("query_id", q.query_id())?;
        out.set_item("do_value", q.do_value)?;
        out.set_item("factual", &q.factual)?;
        out.set_item("counterfactual", &q.counterfactual)?;
        Ok(out.unbind().into())
    }

    /// Exact probability of necessity and sufficiency for one pair.
    fn pns(&self, cause: &str, effect: &str) -> PyResult<f64> {
        let dag = self.inner.dag();
        let c = dag.index_of(cause).ok_or_else(|| err(format!("unknown node {cause:?}")))?;
        let e = dag.index_of(effect).ok_or_else(|| err(format!("unknown node {effect:?}")))?;
        self.inner.scm().pns_exact(c, e).map_err(err)
    }

    /// Exact estimands for every quantity and path product, as a dict.
    fn truth(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &compute_truth(&self.inner).map_err(err)?)
    }
}

/// An evaluation report: per-quantity estimates, composition agreement,
/// and the taxonomy label.
#[pyclass(frozen)]
struct Report {
    summary: EvalSummary,
}

#[pymethods]
impl Report {
    /// Taxonomy label ("VC", "IC", …) or None in consistency-only mode.
    #[getter]
    fn label(&self) -> PyResult<Option<String>> {
        Ok(match &self.summary.label {
            Some(class) => serde_json::to_value(class)
                .map_err(err)?
                .as_str()
                .map(str::to_string),
            None => None,
        })
    }

    #[getter]
    fn consistent(&self) -> bool {
        self.summary.consistent
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.summary).map_err(err)
    }

    /// The full report as nested dicts, matching the report file layout.
    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.summary)
    }

    /// The cut-point tree rendered as a DOT digraph.
    fn dot(&self) -> PyResult<String> {
        export_cct_dot(&self.summary).map_err(err)
    }
}

/// Run the full protocol against a synthetic reasoner and evaluate it.
///
/// `reasoner` is one of `"oracle"`, `"wrong-model"` (optionally with
/// `bias`), `"noisy"` (mediator-gated flips), or `"noisy-distance"`
/// (flip rate growing with mediator count). Defaults are sized for an
/// interactive session; pass `samples=1000, subsamples=1000` for the
/// full protocol.
#[pyfunction]
#[pyo3(signature = (task, reasoner="oracle", samples=200, replicates=5, subsamples=200, concurrency=4, bias=None, use_truth=true))]
#[allow(clippy::too_many_arguments)]
fn run_protocol(
    task: &Task,
    reasoner: &str,
    samples: usize,
    replicates: u64,
    subsamples: usize,
    concurrency: usize,
    bias: Option<f64>,
    use_truth: bool,
) -> PyResult<Report> {
    let spec = &task.inner;
    let corpus = gen_corpus(spec, samples, spec.seed()).map_err(err)?;
    let dir = tempfile::tempdir().map_err(err)?;
    let store = dir.path().join("responses.jsonl");
    let opts = RunOptions { replicates, concurrency, resume: false };
    let extractor = Extractor::rules_only();

    let run = |r: &(dyn Reasoner + Sync)| run_batch(&corpus, r, &extractor, &store, &opts);
    match reasoner {
        "oracle" => run(&OracleReasoner::new(spec)),
        "wrong-model" => {
            let bias = bias.unwrap_or(WrongModelOracle::DEFAULT_BIAS);
            run(&WrongModelOracle::new(spec, bias).map_err(err)?)
        }
        "noisy" => run(&NoisyOracle::new(spec, fixtures::mediator_noise_policy()).map_err(err)?),
        "noisy-distance" => {
            run(&NoisyOracle::new(spec, fixtures::distance_noise_policy()).map_err(err)?)
        }
        other => {
            return Err(err(format!(
                "unknown reasoner {other:?} (oracle | wrong-model | noisy | noisy-distance)"
            )))
        }
    }
    .map_err(err)?;

    let records = read_responses(&store).map_err(err)?;
    let cfg = EvalConfig { n_subsamples: subsamples, use_truth, ..EvalConfig::default() };
    let eval = run_evaluation(spec, &corpus, &records, &cfg).map_err(err)?;
    Ok(Report { summary: summarize(&eval) })
}

/// Extract a Boolean verdict from free-form reply text:
/// `"true"`, `"false"`, or `"unknown"`.
#[pyfunction]
fn extract(text: &str) -> &'static str {
    match extract_rules(text) {
        Verdict::True => "true",
        Verdict::False => "false",
        Verdict::Unknown => "unknown",
    }
}

/// Probability of necessity for a two-edge chain, from the parts'
/// necessity and sufficiency.
#[pyfunction]
fn compose_pn(pn_xy: f64, ps_xy: f64, pn_yz: f64) -> PyResult<f64> {
    estimand::compose_pn_chain(pn_xy, ps_xy, pn_yz).map_err(err)
}

/// Probability of sufficiency for a two-edge chain, from the parts'
/// sufficiency and necessity.
#[pyfunction]
fn compose_ps(ps_xy: f64, pn_xy: f64, ps_yz: f64) -> PyResult<f64> {
    estimand::compose_ps_chain(ps_xy, pn_xy, ps_yz).map_err(err)
}

#[pymodule]
fn ccr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Task>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(compose_pn, m)?)?;
    m.add_function(wrap_pyfunction!(compose_ps, m)?)?;
    Ok(())
}
