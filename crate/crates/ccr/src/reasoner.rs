//! Reasoners, verdict extraction, and the batch response runner.
//!
//! A [`Reasoner`] maps a rendered query to free text. Built-in reasoners
//! provide controlled reference behavior for calibrating the evaluator:
//!
//! - [`OracleReasoner`] recomputes the truth under the sample's exogenous
//!   draw and answers correctly every time.
//! - [`WrongModelOracle`] answers faithfully — but from a perturbed model
//!   whose leak probabilities are biased, so its causal story is wrong.
//! - [`NoisyOracle`] wraps the oracle and flips verdicts at a configurable
//!   rate, optionally tied to how much mediation a pair involves.
//!
//! Remote language-model backends implement the same trait (see
//! [`crate::remote`]). Responses land in an append-only JSON-lines store so
//! interrupted runs resume without re-asking, and the store is rewritten in
//! a canonical sort order on completion so the artifact does not depend on
//! worker scheduling.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{path_stats, NodeIdx};
use crate::rng;
use crate::scm::{BoolScm, Intervention};
use crate::task::{QueryInstance, TaskError, TaskSpec, Theme};

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("query {query_id} names node {node:?} not present in the task")]
    UnknownNode { query_id: String, node: String },
    #[error("query {query_id} disagrees with the task seed: the stored do-value does not oppose the recomputed factual value")]
    SeedMismatch { query_id: String },
    #[error("replicate index {0} exceeds the per-query replicate budget")]
    ReplicateBudget(u64),
    #[error("backend: {0}")]
    Backend(String),
    #[error("extraction fallback: {0}")]
    Fallback(String),
    #[error("response store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("response store record: {0}")]
    Json(#[from] serde_json::Error),
}

// ── Core vocabulary ─────────────────────────────────────────────────────────

/// Which half of a query a response answers.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Factual,
    Counterfactual,
}

/// Three-valued verdict extracted from a text response.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    True,
    False,
    Unknown,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    /// The opposite verdict; `Unknown` stays `Unknown`.
    pub fn negate(self) -> Self {
        match self {
            Verdict::True => Verdict::False,
            Verdict::False => Verdict::True,
            Verdict::Unknown => Verdict::Unknown,
        }
    }
}

/// A reasoner's reply to one question.
#[derive(Debug, Clone)]
pub struct Answer {
    pub text: String,
    pub latency_ms: u64,
}

/// Anything that can answer rendered queries.
///
/// `replicate` distinguishes repeated draws of the same question; reasoners
/// that sample (a temperature-bearing model, a noisy oracle) must give
/// independent yet *deterministic* answers per replicate index.
pub trait Reasoner {
    fn answer(
        &self,
        query: &QueryInstance,
        which: Which,
        replicate: u64,
    ) -> Result<Answer, ReasonerError>;
}

// ── Reference oracles ───────────────────────────────────────────────────────

/// Upper limit on replicates per question, fixed by the flip-stream layout.
pub const MAX_REPLICATES: u64 = 16;

/// Answers every query correctly by recomputing the task's ground truth
/// under the sample's exogenous draw.
pub struct OracleReasoner<'a> {
    task: &'a TaskSpec,
}

impl<'a> OracleReasoner<'a> {
    pub fn new(task: &'a TaskSpec) -> Self {
        OracleReasoner { task }
    }

    /// Resolve the queried pair, recompute the factual world, and return
    /// the effect's value for the requested question.
    fn resolve(&self, query: &QueryInstance, which: Which) -> Result<bool, ReasonerError> {
        let (cause, effect) = lookup_pair(self.task, query)?;
        let u = self.task.scm().exogenous_at(self.task.seed(), query.sample_id);
        let factual = self.task.scm().evaluate(&u, None);
        // The corpus fixes the counterfactual clamp to the opposite of the
        // factual cause value; a mismatch means the store and the task were
        // generated under different seeds.
        if query.do_value != !factual[cause] {
            return Err(ReasonerError::SeedMismatch { query_id: query.query_id() });
        }
        Ok(match which {
            Which::Factual => factual[effect],
            Which::Counterfactual => {
                let held = Intervention::one(cause, query.do_value);
                self.task.scm().evaluate(&u, Some(&held))[effect]
            }
        })
    }
}

impl Reasoner for OracleReasoner<'_> {
    fn answer(
        &self,
        query: &QueryInstance,
        which: Which,
        _replicate: u64,
    ) -> Result<Answer, ReasonerError> {
        let (_, effect) = lookup_pair(self.task, query)?;
        let value = self.resolve(query, which)?;
        Ok(Answer { text: canned_answer(self.task, effect, value), latency_ms: 0 })
    }
}

/// Answers faithfully from a *mis-specified* model: every leak probability
/// is shifted by a fixed bias (then clamped away from 0 and 1). Each
/// question's premise about the cause is honored — the factual half keeps
/// the story's cause value, the counterfactual half clamps its negation —
/// and the effect is predicted from the shifted parameters. Honoring the
/// premise is what keeps the answers' multiplicative structure intact, so
/// the reasoner comes out biased on every quantity yet coherent across
/// them.
pub struct WrongModelOracle<'a> {
    task: &'a TaskSpec,
    perturbed: BoolScm,
}

impl<'a> WrongModelOracle<'a> {
    pub const DEFAULT_BIAS: f64 = -0.3;

    pub fn new(task: &'a TaskSpec, bias: f64) -> Result<Self, ReasonerError> {
        let shifted: Vec<f64> = (0..task.dag().len())
            .map(|v| (task.scm().noise_p(v) + bias).clamp(0.05, 0.95))
            .collect();
        let perturbed = task.scm().with_noise_p(shifted).map_err(TaskError::from)?;
        Ok(WrongModelOracle { task, perturbed })
    }
}

impl Reasoner for WrongModelOracle<'_> {
    fn answer(
        &self,
        query: &QueryInstance,
        which: Which,
        _replicate: u64,
    ) -> Result<Answer, ReasonerError> {
        let (cause, effect) = lookup_pair(self.task, query)?;
        let u = self.perturbed.exogenous_at(self.task.seed(), query.sample_id);
        let arm = match which {
            Which::Factual => !query.do_value,
            Which::Counterfactual => query.do_value,
        };
        let held = Intervention::one(cause, arm);
        let value = self.perturbed.evaluate(&u, Some(&held))[effect];
        Ok(Answer { text: canned_answer(self.task, effect, value), latency_ms: 0 })
    }
}

/// How [`NoisyOracle`] decides its per-question flip probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipPolicy {
    /// Flip every answer with the same probability.
    Uniform { p: f64 },
    /// Flip only questions about pairs with at least `min_mediators`
    /// mediating nodes between cause and effect.
    MediatorThreshold { min_mediators: usize, flip: f64 },
    /// Flip probability grows linearly with the pair's mediator count,
    /// capped: `min(per * mediators, cap)`.
    PerMediator { per: f64, cap: f64 },
}

/// A correct oracle whose answers are flipped at a controlled rate —
/// the knob for studying how estimate quality degrades with noise and
/// mediation depth.
pub struct NoisyOracle<'a> {
    inner: OracleReasoner<'a>,
    policy: FlipPolicy,
    /// `(cause, effect, mediators)` per plan pair, in plan order.
    pairs: Vec<(NodeIdx, NodeIdx, usize)>,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(task: &'a TaskSpec, policy: FlipPolicy) -> Result<Self, ReasonerError> {
        let analysis = task.analysis()?;
        let mut pairs = Vec::new();
        for (cause, effect) in analysis.plan.all_pairs() {
            let stats = path_stats(task.dag(), cause, effect).map_err(TaskError::from)?;
            pairs.push((cause, effect, stats.mediators));
        }
        Ok(NoisyOracle { inner: OracleReasoner::new(task), policy, pairs })
    }

    fn flip_probability(&self, mediators: usize) -> f64 {
        match self.policy {
            FlipPolicy::Uniform { p } => p,
            FlipPolicy::MediatorThreshold { min_mediators, flip } => {
                if mediators >= min_mediators {
                    flip
                } else {
                    0.0
                }
            }
            FlipPolicy::PerMediator { per, cap } => (per * mediators as f64).min(cap),
        }
    }
}

impl Reasoner for NoisyOracle<'_> {
    fn answer(
        &self,
        query: &QueryInstance,
        which: Which,
        replicate: u64,
    ) -> Result<Answer, ReasonerError> {
        if replicate >= MAX_REPLICATES {
            return Err(ReasonerError::ReplicateBudget(replicate));
        }
        let (cause, effect) = lookup_pair(self.inner.task, query)?;
        let truth = self.inner.resolve(query, which)?;
        let pair_idx = self
            .pairs
            .iter()
            .position(|&(c, e, _)| (c, e) == (cause, effect))
            .expect("lookup_pair already validated plan membership");
        let mediators = self.pairs[pair_idx].2;
        // One dedicated uniform per (pair, question half, replicate, sample)
        // keeps flips independent and reproducible under resume.
        let stream = (pair_idx as u64) * 2 * MAX_REPLICATES
            + u64::from(which == Which::Counterfactual) * MAX_REPLICATES
            + replicate;
        let draw =
            rng::uniform_at(self.inner.task.seed(), rng::PURPOSE_FLIP, stream, query.sample_id, 0);
        let value =
            if draw < self.flip_probability(mediators) { !truth } else { truth };
        Ok(Answer {
            text: canned_answer(self.inner.task, effect, value),
            latency_ms: 0,
        })
    }
}

/// Map a query's node ids to indices and require the pair to be in the
/// task's quantity plan.
fn lookup_pair(task: &TaskSpec, query: &QueryInstance) -> Result<(NodeIdx, NodeIdx), ReasonerError> {
    let resolve = |node: &str| {
        task.dag().index_of(node).ok_or_else(|| ReasonerError::UnknownNode {
            query_id: query.query_id(),
            node: node.to_string(),
        })
    };
    let cause = resolve(&query.pair.0)?;
    let effect = resolve(&query.pair.1)?;
    let analysis = task.analysis()?;
    if !analysis.plan.all_pairs().contains(&(cause, effect)) {
        return Err(ReasonerError::Task(TaskError::PairNotInPlan {
            cause: query.pair.0.clone(),
            effect: query.pair.1.clone(),
        }));
    }
    Ok((cause, effect))
}

/// The fixed answer sentence the reference reasoners emit.
fn canned_answer(task: &TaskSpec, effect: NodeIdx, value: bool) -> String {
    let name = task.character(effect);
    match (task.theme(), value) {
        (Theme::CandyParty, true) => format!("Yes, {name} is happy."),
        (Theme::CandyParty, false) => format!("No, {name} is not happy."),
        (Theme::FlowerGarden, true) => format!("Yes, {name}'s garden blooms."),
        (Theme::FlowerGarden, false) => {
            format!("No, {name}'s garden does not bloom.")
        }
    }
}

// ── Verdict extraction ──────────────────────────────────────────────────────

/// Outcome class of a phrase hit during extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hit {
    Positive,
    Negative,
    Abstain,
    /// Consumed without contributing a verdict ("no matter …").
    Neutral,
}

/// Phrase table, scanned longest-match-first at each token position.
/// Multi-word negations must shadow their positive suffixes ("not happy"
/// consumes before "happy" can fire).
const PHRASES: &[(&[&str], Hit)] = &[
    (&["might", "not", "be", "happy"], Hit::Abstain),
    (&["may", "not", "be", "happy"], Hit::Abstain),
    (&["cannot", "be", "determined"], Hit::Abstain),
    (&["not", "enough", "information"], Hit::Abstain),
    (&["hard", "to", "say"], Hit::Abstain),
    (&["might", "be", "happy"], Hit::Abstain),
    (&["may", "be", "happy"], Hit::Abstain),
    (&["could", "be", "happy"], Hit::Abstain),
    (&["not", "be", "happy"], Hit::Negative),
    (&["does", "not", "hold"], Hit::Negative),
    (&["no", "matter"], Hit::Neutral),
    (&["not", "sure"], Hit::Abstain),
    (&["not", "certain"], Hit::Abstain),
    (&["cannot", "determine"], Hit::Abstain),
    (&["cannot", "tell"], Hit::Abstain),
    (&["cannot", "say"], Hit::Abstain),
    (&["not", "happy"], Hit::Negative),
    (&["not", "bloom"], Hit::Negative),
    (&["not", "correct"], Hit::Negative),
    (&["not", "true"], Hit::Negative),
    (&["it", "holds"], Hit::Positive),
    (&["yes"], Hit::Positive),
    (&["no"], Hit::Negative),
    (&["happy"], Hit::Positive),
    (&["unhappy"], Hit::Negative),
    (&["true"], Hit::Positive),
    (&["false"], Hit::Negative),
    (&["correct"], Hit::Positive),
    (&["incorrect"], Hit::Negative),
    (&["holds"], Hit::Positive),
    (&["bloom"], Hit::Positive),
    (&["blooms"], Hit::Positive),
    (&["bloomed"], Hit::Positive),
    (&["unknown"], Hit::Abstain),
    (&["unclear"], Hit::Abstain),
    (&["uncertain"], Hit::Abstain),
    (&["indeterminate"], Hit::Abstain),
];

const MAX_PHRASE_LEN: usize = 4;

/// Subordinating markers: verdict words *after* one of these mid-sentence
/// belong to an explanation, not the conclusion ("… is not happy, even
/// though Ara is happy").
const SUBORDINATORS: &[&str] = &["because", "since", "although", "though", "while", "despite"];

/// Rule-based verdict extraction.
///
/// Sentences are scanned from the end (conclusions come last); sentences
/// ending in `?` are skipped as question restatements. Within the first
/// sentence carrying any verdict phrase:
/// explicit abstentions win, then a bare yes/no interjection, then the last
/// verdict phrase before any mid-sentence subordinate clause.
pub fn extract_rules(text: &str) -> Verdict {
    for sentence in split_sentences(text).iter().rev() {
        if sentence.trim_end().ends_with('?') {
            continue;
        }
        if let Some(v) = sentence_verdict(sentence) {
            return v;
        }
    }
    Verdict::Unknown
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        cur.push(ch);
        if matches!(ch, '.' | '!' | '?' | '\n') {
            if !cur.trim().is_empty() {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

fn tokenize(sentence: &str) -> Vec<String> {
    let lowered = sentence.to_lowercase().replace("n't", " not");
    let mut toks = Vec::new();
    let mut cur = String::new();
    for ch in lowered.chars() {
        if ch.is_ascii_alphabetic() {
            cur.push(ch);
        } else if !cur.is_empty() {
            toks.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}

fn sentence_verdict(sentence: &str) -> Option<Verdict> {
    let mut toks = tokenize(sentence);
    // Drop subordinate explanations, keeping the main clause.
    if let Some(cut) = toks
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, t)| SUBORDINATORS.contains(&t.as_str()))
        .map(|(i, _)| i)
    {
        toks.truncate(cut);
    }

    let mut hits: Vec<(usize, Hit)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut matched = None;
        for len in (1..=MAX_PHRASE_LEN.min(toks.len() - i)).rev() {
            let window: Vec<&str> = toks[i..i + len].iter().map(String::as_str).collect();
            if let Some((_, hit)) = PHRASES.iter().find(|(p, _)| *p == window.as_slice()) {
                matched = Some((len, *hit));
                break;
            }
        }
        match matched {
            Some((len, hit)) => {
                if hit != Hit::Neutral {
                    hits.push((i, hit));
                }
                i += len;
            }
            None => i += 1,
        }
    }

    if hits.is_empty() {
        return None;
    }
    if hits.iter().any(|&(_, h)| h == Hit::Abstain) {
        return Some(Verdict::Unknown);
    }
    // A bare yes/no interjection outranks predicate phrases: "No, she is
    // not happy, because Ara is happy" must not flip on the trailing clause.
    let interjection = hits
        .iter()
        .filter(|&&(pos, _)| toks[pos] == "yes" || toks[pos] == "no")
        .next_back();
    let decisive = interjection.or(hits.last());
    decisive.map(|&(_, hit)| match hit {
        Hit::Positive => Verdict::True,
        Hit::Negative => Verdict::False,
        _ => unreachable!("abstain handled above"),
    })
}

/// The instruction given to a language model when rule extraction abstains:
/// classify an answer's meaning as a single word, TRUE or FALSE.
pub fn extraction_prompt(question: &str, answer: &str) -> String {
    format!(
        "I will give you a question and its answer. Determine whether the meaning \
         of the answer is 'TRUE' or 'FALSE'. An answer is 'TRUE' if it contains \
         phrases like 'yes', 'it holds', 'correct', 'true', or similar \
         affirmations. An answer is 'FALSE' if it contains phrases like 'no', \
         'it does not hold', 'incorrect', 'false', or similar negations. Respond \
         only with one word: 'TRUE' or 'FALSE'. Question: '{question}' Answer: \
         '{answer}' Is the meaning 'TRUE' or 'FALSE'?"
    )
}

/// Completion function for the extraction fallback: takes the rendered
/// extraction prompt, returns the model's raw reply.
pub type FallbackFn = dyn Fn(&str) -> Result<String, String> + Send + Sync;

/// Turns response text into a [`Verdict`]: rules first, then an optional
/// model fallback for texts the rules cannot read.
pub struct Extractor {
    fallback: Option<Box<FallbackFn>>,
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor::rules_only()
    }
}

impl Extractor {
    pub fn rules_only() -> Self {
        Extractor { fallback: None }
    }

    pub fn with_fallback(fallback: Box<FallbackFn>) -> Self {
        Extractor { fallback: Some(fallback) }
    }

    pub fn extract(&self, question: &str, answer: &str) -> Result<Verdict, ReasonerError> {
        let verdict = extract_rules(answer);
        if verdict != Verdict::Unknown {
            return Ok(verdict);
        }
        let Some(fallback) = &self.fallback else {
            return Ok(Verdict::Unknown);
        };
        let reply = fallback(&extraction_prompt(question, answer))
            .map_err(ReasonerError::Fallback)?;
        let cleaned = reply.trim().trim_matches(|c: char| !c.is_ascii_alphabetic());
        Ok(match cleaned.to_ascii_uppercase().as_str() {
            "TRUE" => Verdict::True,
            "FALSE" => Verdict::False,
            _ => Verdict::Unknown,
        })
    }
}

// ── Response store ──────────────────────────────────────────────────────────

/// One stored response: an answered (query, half, replicate) triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub query_id: String,
    pub pair: (String, String),
    pub which: Which,
    pub replicate: u64,
    pub text: String,
    pub boolean: Verdict,
    pub latency_ms: u64,
}

impl ResponseRecord {
    fn sort_key(&self) -> (String, Which, u64) {
        (self.query_id.clone(), self.which, self.replicate)
    }
}

/// Read a JSON-lines response store.
pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>, ReasonerError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Write a response store, replacing the file atomically.
pub fn write_responses(path: &Path, records: &[ResponseRecord]) -> Result<(), ReasonerError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut out = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        for rec in records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Options for a batch answering run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub replicates: u64,
    pub concurrency: usize,
    /// Keep and skip past work found in the store instead of failing.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { replicates: 5, concurrency: 1, resume: false }
    }
}

/// Summary of a batch run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStats {
    /// Total records the corpus and replicate count call for.
    pub requested: usize,
    /// Newly answered in this invocation.
    pub answered: usize,
    /// Found already answered in the store (resume).
    pub resumed: usize,
    /// Records whose verdict is UNKNOWN after extraction, over the whole store.
    pub unknown: usize,
}

/// Answer every (query, half, replicate) triple of a corpus into the store.
///
/// Workers pull jobs from a shared queue; each completed record is appended
/// and flushed so a crash loses at most in-flight answers. On success the
/// store is rewritten sorted by `(query_id, which, replicate)`, making the
/// final artifact identical for any concurrency level. On error the partial
/// store is left behind for `resume`.
pub fn run_batch(
    corpus: &[QueryInstance],
    reasoner: &(dyn Reasoner + Sync),
    extractor: &Extractor,
    store: &Path,
    opts: &RunOptions,
) -> Result<RunStats, ReasonerError> {
    if opts.replicates == 0 || opts.replicates > MAX_REPLICATES {
        return Err(ReasonerError::ReplicateBudget(opts.replicates));
    }
    let mut done: HashSet<(String, Which, u64)> = HashSet::new();
    if store.exists() {
        if !opts.resume {
            return Err(ReasonerError::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("response store {} exists; pass resume to continue it", store.display()),
            )));
        }
        for rec in read_responses(store)? {
            done.insert(rec.sort_key());
        }
    }

    struct Job<'q> {
        query: &'q QueryInstance,
        which: Which,
        replicate: u64,
    }
    let mut jobs = Vec::new();
    let mut requested = 0usize;
    for query in corpus {
        for which in [Which::Factual, Which::Counterfactual] {
            for replicate in 0..opts.replicates {
                requested += 1;
                if !done.contains(&(query.query_id(), which, replicate)) {
                    jobs.push(Job { query, which, replicate });
                }
            }
        }
    }
    let resumed = requested - jobs.len();

    let mut out = std::io::BufWriter::new(
        std::fs::OpenOptions::new().create(true).append(true).open(store)?,
    );
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = opts.concurrency.clamp(1, jobs.len().max(1));
    let (tx, rx) = mpsc::channel::<Result<ResponseRecord, ReasonerError>>();

    let mut answered = 0usize;
    let mut first_err: Option<ReasonerError> = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let stop = &stop;
            let jobs = &jobs;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() || stop.load(Ordering::Relaxed) {
                    break;
                }
                let job = &jobs[i];
                let question = match job.which {
                    Which::Factual => &job.query.factual,
                    Which::Counterfactual => &job.query.counterfactual,
                };
                let outcome = reasoner
                    .answer(job.query, job.which, job.replicate)
                    .and_then(|ans| {
                        let boolean = extractor.extract(question, &ans.text)?;
                        Ok(ResponseRecord {
                            query_id: job.query.query_id(),
                            pair: job.query.pair.clone(),
                            which: job.which,
                            replicate: job.replicate,
                            text: ans.text,
                            boolean,
                            latency_ms: ans.latency_ms,
                        })
                    });
                if outcome.is_err() {
                    stop.store(true, Ordering::Relaxed);
                }
                if tx.send(outcome).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for msg in rx {
            match msg {
                Ok(rec) => {
                    // Flush per record: resumability is worth more here
                    // than write throughput.
                    if serde_json::to_writer(&mut out, &rec)
                        .map_err(ReasonerError::from)
                        .and_then(|()| {
                            out.write_all(b"\n")?;
                            out.flush()?;
                            Ok(())
                        })
                        .map_err(|e| {
                            stop.store(true, Ordering::Relaxed);
                            first_err.get_or_insert(e);
                        })
                        .is_ok()
                    {
                        answered += 1;
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
    });
    drop(out);
    if let Some(e) = first_err {
        return Err(e);
    }

    // Canonical order: the artifact must not depend on worker interleaving.
    let mut records = read_responses(store)?;
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    records.dedup_by(|a, b| a.sort_key() == b.sort_key());
    write_responses(store, &records)?;

    let unknown = records.iter().filter(|r| r.boolean == Verdict::Unknown).count();
    Ok(RunStats { requested, answered, resumed, unknown })
}

// ── Tests ───────────────────────────────────────────────────────────────────
