//! The evaluation engine: exact estimands, subsampled estimates, and the
//! validity/consistency verdicts.
//!
//! The pipeline eats three artifacts — a task, its query corpus, and a
//! response store — and answers two questions about the reasoner behind
//! the responses:
//!
//! - **External validity**: per cut-point-tree pair, does the PNS implied
//!   by the responses track the exact PNS? Measured per subsample round by
//!   relative absolute error against ground truth (`eta`), with a quantity
//!   declared *valid* when at least `validity_threshold` of rounds land
//!   within `delta`, and *near-valid* at the laxer `near_threshold`.
//! - **Internal consistency**: do compositions along cut-point-tree paths
//!   commute with the directly estimated global quantity? Measured per
//!   round against the *same round's* direct estimate (`gamma`), so both
//!   sides share subsampling noise. No ground truth is needed, which is
//!   what makes consistency-only evaluation possible.
//!
//! Quantities whose exact PNS is below `min_truth` are excluded from
//! classification (relative error against a vanishing reference is
//! meaningless) and reported separately.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimand::{pns_point, EstimandError};
use crate::graph::{path_stats, GraphError, NodeIdx};
use crate::reasoner::{ReasonerError, ResponseRecord, Verdict, Which};
use crate::rng;
use crate::scm::ScmError;
use crate::task::{QueryInstance, TaskError, TaskSpec};

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Estimand(#[from] EstimandError),
    #[error(transparent)]
    Responses(#[from] ReasonerError),
    #[error("relative error is undefined against a zero reference (absolute error {ae})")]
    ZeroTruth { ae: f64 },
    #[error("response store has no {which:?} responses for query {query_id}")]
    MissingResponses { query_id: String, which: Which },
    #[error("response store row {query_id} ({which:?}, replicate {replicate}) has no matching corpus query")]
    StrayResponse { query_id: String, which: Which, replicate: u64 },
    #[error("corpus does not cover pair {cause} -> {effect} of the quantity plan")]
    MissingPair { cause: String, effect: String },
    #[error("corpus samples for pair {cause} -> {effect} are not the contiguous range 0..{expected}")]
    RaggedSamples { cause: String, effect: String, expected: usize },
    #[error("UNKNOWN verdict rate {fraction:.4} exceeds the data-quality limit {max:.4}")]
    UnknownRate { fraction: f64, max: f64 },
    #[error("subsample round kept no usable samples")]
    EmptyRound,
    #[error("evaluation config: {0}")]
    Config(String),
}

// ── Configuration ───────────────────────────────────────────────────────────

/// Knobs of the evaluation protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Subsample rounds per quantity.
    #[serde(default = "default_n_subsamples")]
    pub n_subsamples: usize,
    /// Relative-error tolerance for a round to count as "within".
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Fraction of rounds within `delta` for a quantity to be valid and a
    /// composition to be consistent.
    #[serde(default = "default_validity_threshold")]
    pub validity_threshold: f64,
    /// Laxer fraction for near-validity.
    #[serde(default = "default_near_threshold")]
    pub near_threshold: f64,
    /// Quantities with exact PNS below this are excluded from classification.
    #[serde(default = "default_min_truth")]
    pub min_truth: f64,
    /// Highest tolerable fraction of UNKNOWN verdicts in the store.
    #[serde(default = "default_max_unknown")]
    pub max_unknown: f64,
    /// Seed for the subsample replicate draws.
    #[serde(default)]
    pub seed: u64,
    /// Compute ground truth and external validity; disable for
    /// consistency-only evaluation of tasks without tractable truth.
    #[serde(default = "default_use_truth")]
    pub use_truth: bool,
}

fn default_n_subsamples() -> usize {
    1000
}
fn default_delta() -> f64 {
    0.1
}
fn default_validity_threshold() -> f64 {
    0.90
}
fn default_near_threshold() -> f64 {
    0.75
}
fn default_min_truth() -> f64 {
    0.01
}
fn default_max_unknown() -> f64 {
    0.05
}
fn default_use_truth() -> bool {
    true
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_subsamples: default_n_subsamples(),
            delta: default_delta(),
            validity_threshold: default_validity_threshold(),
            near_threshold: default_near_threshold(),
            min_truth: default_min_truth(),
            max_unknown: default_max_unknown(),
            seed: 0,
            use_truth: default_use_truth(),
        }
    }
}

// ── Exact estimands ─────────────────────────────────────────────────────────

/// Exact counterfactual quantities for one pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTruth {
    pub cause: String,
    pub effect: String,
    pub pns: f64,
    /// Probability of necessity; absent when its conditioning event has
    /// zero mass.
    pub pn: Option<f64>,
    /// Probability of sufficiency; absent when its conditioning event has
    /// zero mass.
    pub ps: Option<f64>,
    /// Interventional contrast `P(e | do(c)) - P(e | do(not c))`.
    pub ate: f64,
    /// Whether the pair's response-type distribution is monotone
    /// (no sample where intervening on the cause destroys the effect).
    pub monotone: bool,
}

/// Product of exact local PNS values along one cut-point-tree path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathTruth {
    pub path: Vec<String>,
    pub product: f64,
}

/// Exact estimands over the full quantity plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthReport {
    pub task_id: String,
    /// Plan order: the global pair first, then locals.
    pub pairs: Vec<PairTruth>,
    /// Every root-to-leaf path, the direct edge included.
    pub paths: Vec<PathTruth>,
    /// Largest deviation of any path product from the global PNS — the
    /// commutation property says this is numerically zero for monotone
    /// mechanisms.
    pub commutation_residual: f64,
}

/// Compute exact estimands for every plan pair and path products for every
/// cut-point-tree path.
pub fn compute_truth(task: &TaskSpec) -> Result<TruthReport, EvalError> {
    let analysis = task.analysis()?;
    let scm = task.scm();
    let name = |v: NodeIdx| task.dag().name(v).to_string();

    let mut pairs = Vec::new();
    let mut pns_by_pair: BTreeMap<(NodeIdx, NodeIdx), f64> = BTreeMap::new();
    for (cause, effect) in analysis.plan.all_pairs() {
        let po = scm.po_table(cause, effect)?;
        let obs = scm.po_obs_table(cause, effect)?;
        let pns = po.pns();
        pns_by_pair.insert((cause, effect), pns);
        pairs.push(PairTruth {
            cause: name(cause),
            effect: name(effect),
            pns,
            pn: obs.pn(),
            ps: obs.ps(),
            ate: po.p_do1() - po.p_do0(),
            monotone: scm.check_monotonic(cause, effect)?,
        });
    }

    let global = pairs[0].pns;
    let mut paths = Vec::new();
    let mut residual = 0.0f64;
    for path in analysis.cct.paths() {
        let mut product = 1.0;
        for &(from, to) in &path.edges {
            product *= pns_by_pair[&(from, to)];
        }
        residual = residual.max((product - global).abs());
        paths.push(PathTruth { path: path.nodes.iter().map(|&v| name(v)).collect(), product });
    }

    Ok(TruthReport {
        task_id: task.id().to_string(),
        pairs,
        paths,
        commutation_residual: residual,
    })
}

/// Relative absolute error of an estimate against a nonzero reference.
pub fn rae(estimate: f64, truth: f64) -> Result<f64, EvalError> {
    let ae = (estimate - truth).abs();
    if truth == 0.0 {
        return Err(EvalError::ZeroTruth { ae });
    }
    Ok(ae / truth.abs())
}

// ── Response table ──────────────────────────────────────────────────────────

/// Responses for one (pair, exogenous sample): replicate verdicts per half,
/// plus the intervention value the counterfactual used.
#[derive(Debug, Clone)]
struct SampleResponses {
    factual: Vec<Verdict>,
    counterfactual: Vec<Verdict>,
    do_value: bool,
}

/// Response store joined against its corpus, indexed by pair and sample.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    by_pair: BTreeMap<(String, String), BTreeMap<u64, SampleResponses>>,
    pub unknown_fraction: f64,
    pub n_records: usize,
}

impl ResponseTable {
    /// Join corpus and store. Every store row must match a corpus query;
    /// every (query, half) must have at least one response.
    pub fn build(
        corpus: &[QueryInstance],
        records: &[ResponseRecord],
    ) -> Result<Self, EvalError> {
        let mut by_pair: BTreeMap<(String, String), BTreeMap<u64, SampleResponses>> =
            BTreeMap::new();
        let mut by_query: BTreeMap<String, &QueryInstance> = BTreeMap::new();
        for query in corpus {
            by_query.insert(query.query_id(), query);
            by_pair.entry(query.pair.clone()).or_default().insert(
                query.sample_id,
                SampleResponses {
                    factual: Vec::new(),
                    counterfactual: Vec::new(),
                    do_value: query.do_value,
                },
            );
        }
        let mut unknown = 0usize;
        for rec in records {
            let query = by_query.get(&rec.query_id).copied().ok_or_else(|| {
                EvalError::StrayResponse {
                    query_id: rec.query_id.clone(),
                    which: rec.which,
                    replicate: rec.replicate,
                }
            })?;
            if rec.pair != query.pair {
                return Err(EvalError::StrayResponse {
                    query_id: rec.query_id.clone(),
                    which: rec.which,
                    replicate: rec.replicate,
                });
            }
            if rec.boolean == Verdict::Unknown {
                unknown += 1;
            }
            let slot = by_pair
                .get_mut(&query.pair)
                .and_then(|m| m.get_mut(&query.sample_id))
                .expect("corpus index covers its own queries");
            match rec.which {
                Which::Factual => slot.factual.push(rec.boolean),
                Which::Counterfactual => slot.counterfactual.push(rec.boolean),
            }
        }
        for (pair, samples) in &by_pair {
            for (&sample, slot) in samples {
                for (which, got) in [
                    (Which::Factual, &slot.factual),
                    (Which::Counterfactual, &slot.counterfactual),
                ] {
                    if got.is_empty() {
                        return Err(EvalError::MissingResponses {
                            query_id: format!("{}->{}#{sample:05}", pair.0, pair.1),
                            which,
                        });
                    }
                }
            }
        }
        Ok(ResponseTable {
            by_pair,
            unknown_fraction: if records.is_empty() {
                0.0
            } else {
                unknown as f64 / records.len() as f64
            },
            n_records: records.len(),
        })
    }

    /// Pairs present, in map order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.by_pair.keys().cloned().collect()
    }

    /// Sample count of a pair, verifying the ids are contiguous from zero.
    fn contiguous_samples(&self, pair: &(String, String)) -> Result<usize, EvalError> {
        let samples = &self.by_pair[pair];
        let n = samples.len();
        let contiguous = samples.keys().copied().eq(0..n as u64);
        if !contiguous {
            return Err(EvalError::RaggedSamples {
                cause: pair.0.clone(),
                effect: pair.1.clone(),
                expected: n,
            });
        }
        Ok(n)
    }
}

// ── Subsampled estimates ────────────────────────────────────────────────────

/// One subsample round's pooled estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PnsRound {
    /// Difference of arm means, clamped into [0, 1].
    pub estimate: f64,
    /// Whether clamping moved the raw difference.
    pub clamped: bool,
    /// Samples that contributed (UNKNOWN draws drop the whole sample to
    /// keep the two arms paired).
    pub used: usize,
}

/// Stride separating per-pair subsample streams.
const ROUND_STRIDE: u64 = 1 << 20;

/// Draw `n_subsamples` rounds for one pair: each round picks one replicate
/// uniformly per (sample, half), pools factual answers into the arm the
/// sample observed and counterfactual answers into the intervened arm, and
/// takes the arm-mean difference.
fn subsample_rounds(
    samples: &BTreeMap<u64, SampleResponses>,
    n_samples: usize,
    pair_idx: usize,
    cfg: &EvalConfig,
) -> Result<Vec<PnsRound>, EvalError> {
    let mut rounds = Vec::with_capacity(cfg.n_subsamples);
    let mut uf = vec![0.0f64; n_samples];
    let mut uc = vec![0.0f64; n_samples];
    for round in 0..cfg.n_subsamples {
        let stream = pair_idx as u64 * ROUND_STRIDE + round as u64;
        rng::fill_uniforms(cfg.seed, rng::PURPOSE_SUBSAMPLE, stream, 0, &mut uf);
        rng::fill_uniforms(cfg.seed, rng::PURPOSE_SUBSAMPLE, stream, 1, &mut uc);
        // Arm 1 holds P(effect | cause on), arm 0 its complement.
        let (mut sum1, mut sum0, mut used) = (0usize, 0usize, 0usize);
        for (&sample, slot) in samples {
            let f = slot.factual[(uf[sample as usize] * slot.factual.len() as f64) as usize];
            let c = slot.counterfactual
                [(uc[sample as usize] * slot.counterfactual.len() as f64) as usize];
            let (Some(f), Some(c)) = (as_bool(f), as_bool(c)) else {
                continue;
            };
            // The counterfactual clamps the cause to `do_value`; the factual
            // world observed the opposite.
            let (on, off) = if slot.do_value { (c, f) } else { (f, c) };
            sum1 += usize::from(on);
            sum0 += usize::from(off);
            used += 1;
        }
        if used == 0 {
            return Err(EvalError::EmptyRound);
        }
        let p1 = sum1 as f64 / used as f64;
        let p0 = sum0 as f64 / used as f64;
        let point = pns_point(p1, p0);
        rounds.push(PnsRound { estimate: point.value, clamped: point.clamped, used });
    }
    Ok(rounds)
}

fn as_bool(v: Verdict) -> Option<bool> {
    match v {
        Verdict::True => Some(true),
        Verdict::False => Some(false),
        Verdict::Unknown => None,
    }
}

// ── Evaluation output ───────────────────────────────────────────────────────

/// Per-quantity evaluation: estimates, external errors, validity calls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantityEval {
    pub cause: String,
    pub effect: String,
    /// Exact PNS; absent in consistency-only mode.
    pub truth: Option<f64>,
    /// Excluded from classification because the truth is below `min_truth`.
    pub excluded: bool,
    pub rounds: Vec<PnsRound>,
    /// External relative error per round; absent without usable truth.
    pub eta: Option<Vec<f64>>,
    /// Fraction of rounds with `eta <= delta`.
    pub fraction_within: Option<f64>,
    pub valid: Option<bool>,
    pub near_valid: Option<bool>,
    /// Shortest directed distance from cause to effect in the task graph.
    pub shortest: usize,
    /// Nodes lying on any directed path between them.
    pub mediators: usize,
}

/// Per-path evaluation: composed estimates, internal and external errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositionEval {
    pub path: Vec<String>,
    /// Product of the path's local estimates, per round.
    pub rounds: Vec<f64>,
    /// Internal consistency error per round: composed vs the same round's
    /// direct global estimate.
    pub gamma: Vec<f64>,
    pub gamma_fraction: f64,
    pub consistent: bool,
    /// External error of the composed estimate vs the exact global PNS.
    pub epsilon: Option<Vec<f64>>,
    pub epsilon_fraction: Option<f64>,
}

/// Reasoner taxonomy from (validity, near-validity, consistency) of the
/// global quantity and the composition set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReasonerClass {
    #[serde(rename = "VC")]
    ValidConsistent,
    #[serde(rename = "VI")]
    ValidInconsistent,
    #[serde(rename = "NearVC")]
    NearValidConsistent,
    #[serde(rename = "NearVI")]
    NearValidInconsistent,
    #[serde(rename = "IC")]
    InvalidConsistent,
    #[serde(rename = "II")]
    InvalidInconsistent,
}

fn classify(valid: bool, near_valid: bool, consistent: bool) -> ReasonerClass {
    match (valid, near_valid, consistent) {
        (true, _, true) => ReasonerClass::ValidConsistent,
        (true, _, false) => ReasonerClass::ValidInconsistent,
        (false, true, true) => ReasonerClass::NearValidConsistent,
        (false, true, false) => ReasonerClass::NearValidInconsistent,
        (false, false, true) => ReasonerClass::InvalidConsistent,
        (false, false, false) => ReasonerClass::InvalidInconsistent,
    }
}

/// Full evaluation of one response store.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub task_id: String,
    pub config: EvalConfig,
    pub n_samples: usize,
    pub unknown_fraction: f64,
    /// The cut-point tree's chain: root, cut points in order, leaf.
    pub cct_chain: Vec<String>,
    pub truth: Option<TruthReport>,
    /// Plan order: global first, then locals.
    pub quantities: Vec<QuantityEval>,
    /// Proper compositions only (the direct root-to-leaf edge is the global
    /// quantity itself, not a composition).
    pub compositions: Vec<CompositionEval>,
    pub consistent: bool,
    /// Taxonomy label; absent in consistency-only mode or when the global
    /// quantity is excluded for vanishing truth.
    pub label: Option<ReasonerClass>,
    /// Pairs excluded from classification for vanishing truth.
    pub excluded_pairs: Vec<(String, String)>,
}

/// Run the full evaluation protocol.
pub fn run_evaluation(
    task: &TaskSpec,
    corpus: &[QueryInstance],
    records: &[ResponseRecord],
    cfg: &EvalConfig,
) -> Result<Evaluation, EvalError> {
    if cfg.n_subsamples == 0 {
        return Err(EvalError::Config("n_subsamples must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.delta) || cfg.delta == 0.0 {
        return Err(EvalError::Config(format!("delta {} outside (0, 1]", cfg.delta)));
    }
    let analysis = task.analysis()?;
    let table = ResponseTable::build(corpus, records)?;
    if table.unknown_fraction > cfg.max_unknown {
        return Err(EvalError::UnknownRate {
            fraction: table.unknown_fraction,
            max: cfg.max_unknown,
        });
    }
    let truth = if cfg.use_truth { Some(compute_truth(task)?) } else { None };

    let plan_pairs = analysis.plan.all_pairs();
    let pair_names: Vec<(String, String)> = plan_pairs
        .iter()
        .map(|&(c, e)| (task.dag().name(c).to_string(), task.dag().name(e).to_string()))
        .collect();

    // Uniform sample count across pairs.
    let mut n_samples = None;
    for names in &pair_names {
        if !table.by_pair.contains_key(names) {
            return Err(EvalError::MissingPair {
                cause: names.0.clone(),
                effect: names.1.clone(),
            });
        }
        let n = table.contiguous_samples(names)?;
        match n_samples {
            None => n_samples = Some(n),
            Some(expected) if expected != n => {
                return Err(EvalError::RaggedSamples {
                    cause: names.0.clone(),
                    effect: names.1.clone(),
                    expected,
                });
            }
            _ => {}
        }
    }
    let n_samples = n_samples.ok_or_else(|| EvalError::Config("empty quantity plan".into()))?;

    // Per-quantity rounds and external validity.
    let mut quantities = Vec::new();
    let mut excluded_pairs = Vec::new();
    for (pair_idx, (&(cause, effect), names)) in
        plan_pairs.iter().zip(&pair_names).enumerate()
    {
        let rounds =
            subsample_rounds(&table.by_pair[names], n_samples, pair_idx, cfg)?;
        let stats = path_stats(task.dag(), cause, effect)?;
        let pair_truth = truth.as_ref().map(|t| t.pairs[pair_idx].pns);
        let excluded = pair_truth.is_some_and(|t| t < cfg.min_truth);
        if excluded {
            excluded_pairs.push(names.clone());
        }
        let (eta, fraction_within, valid, near_valid) = match pair_truth {
            Some(t) if !excluded => {
                let eta: Vec<f64> = rounds
                    .iter()
                    .map(|r| rae(r.estimate, t))
                    .collect::<Result<_, _>>()?;
                let within =
                    eta.iter().filter(|&&e| e <= cfg.delta).count() as f64 / eta.len() as f64;
                (
                    Some(eta),
                    Some(within),
                    Some(within >= cfg.validity_threshold),
                    Some(within >= cfg.near_threshold),
                )
            }
            _ => (None, None, None, None),
        };
        quantities.push(QuantityEval {
            cause: names.0.clone(),
            effect: names.1.clone(),
            truth: pair_truth,
            excluded,
            rounds,
            eta,
            fraction_within,
            valid,
            near_valid,
            shortest: stats.shortest,
            mediators: stats.mediators,
        });
    }

    // Compositions along proper paths, round-paired against the direct
    // global estimate.
    let pair_index: BTreeMap<(NodeIdx, NodeIdx), usize> =
        plan_pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let global_truth = truth.as_ref().map(|t| t.pairs[0].pns);
    let global_excluded = quantities[0].excluded;
    let mut compositions = Vec::new();
    for path in &analysis.plan.compositions {
        let mut rounds = vec![1.0f64; cfg.n_subsamples];
        for &(from, to) in &path.edges {
            let local = &quantities[pair_index[&(from, to)]];
            for (r, est) in rounds.iter_mut().zip(&local.rounds) {
                *r *= est.estimate;
            }
        }
        let gamma: Vec<f64> = rounds
            .iter()
            .zip(&quantities[0].rounds)
            .map(|(&composed, direct)| {
                if direct.estimate == 0.0 {
                    // Both vanish: perfectly consistent; otherwise the
                    // composition failed this round outright.
                    if composed == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (composed - direct.estimate).abs() / direct.estimate
                }
            })
            .collect();
        let gamma_fraction =
            gamma.iter().filter(|&&g| g <= cfg.delta).count() as f64 / gamma.len() as f64;
        let (epsilon, epsilon_fraction) = match global_truth {
            Some(t) if !global_excluded => {
                let eps: Vec<f64> = rounds
                    .iter()
                    .map(|&est| rae(est, t))
                    .collect::<Result<_, _>>()?;
                let frac =
                    eps.iter().filter(|&&e| e <= cfg.delta).count() as f64 / eps.len() as f64;
                (Some(eps), Some(frac))
            }
            _ => (None, None),
        };
        compositions.push(CompositionEval {
            path: path.nodes.iter().map(|&v| task.dag().name(v).to_string()).collect(),
            rounds,
            gamma,
            gamma_fraction,
            consistent: gamma_fraction >= cfg.validity_threshold,
            epsilon,
            epsilon_fraction,
        });
    }

    let consistent = compositions.iter().all(|c| c.consistent);
    let label = match (&quantities[0].valid, &quantities[0].near_valid) {
        (Some(valid), Some(near)) => Some(classify(*valid, *near, consistent)),
        _ => None,
    };

    Ok(Evaluation {
        task_id: task.id().to_string(),
        config: cfg.clone(),
        n_samples,
        unknown_fraction: table.unknown_fraction,
        cct_chain: analysis
            .cct
            .chain()
            .iter()
            .map(|&v| task.dag().name(v).to_string())
            .collect(),
        truth,
        quantities,
        compositions,
        consistent,
        label,
        excluded_pairs,
    })
}

// ── Mediation structure ─────────────────────────────────────────────────────

/// Mean external error of a group of pairs sharing a structural key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediationPoint {
    /// Group key: mediator count or shortest-path distance.
    pub key: usize,
    /// Mean over the group's pairs of each pair's mean per-round `eta`.
    pub mean_eta: f64,
    pub n_pairs: usize,
}

/// Pair-level external error grouped by mediation structure — how estimate
/// quality degrades with the amount of structure between cause and effect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediationSeries {
    pub by_mediators: Vec<MediationPoint>,
    pub by_distance: Vec<MediationPoint>,
}

/// Group quantities by mediator count and by shortest distance, averaging
/// each pair's mean `eta`. Quantities without external error (excluded or
/// consistency-only) are left out; both series are empty when none has it.
pub fn mediation_curve(eval: &Evaluation) -> MediationSeries {
    let group = |key: fn(&QuantityEval) -> usize| -> Vec<MediationPoint> {
        let mut buckets: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for q in &eval.quantities {
            if let Some(eta) = &q.eta {
                let mean = eta.iter().sum::<f64>() / eta.len() as f64;
                buckets.entry(key(q)).or_default().push(mean);
            }
        }
        buckets
            .into_iter()
            .map(|(key, means)| MediationPoint {
                key,
                mean_eta: means.iter().sum::<f64>() / means.len() as f64,
                n_pairs: means.len(),
            })
            .collect()
    };
    MediationSeries {
        by_mediators: group(|q| q.mediators),
        by_distance: group(|q| q.shortest),
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────
