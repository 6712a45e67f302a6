//! Themed task generation and natural-language rendering.
//!
//! A *task* packages a single-root/single-leaf DAG, a leaky Boolean SCM over
//! it, and everything needed to tell the model a story about it: character
//! names with pronouns, per-node leak thresholds, and a theme. Rendering is
//! pure — a task plus a sample index always produces the same prompts —
//! which is what makes remote runs resumable and golden tests possible.
//!
//! Key concepts:
//! - **CandyParty**: each character is happy if a parent-dependent condition
//!   holds or if they get at least their threshold of candies. A node's
//!   leak probability is `threshold / 10`, and the rendered candy counts
//!   are drawn to agree with the sample's exogenous draw (at least the
//!   threshold exactly when the leak fired).
//! - **FlowerGarden**: the qualitative variant — same structure, no numbers
//!   anywhere. The leak condition is "plants their favorite flower".
//! - **Query pairs**: for each cut-point-tree pair and each exogenous
//!   sample, a factual question about the effect and a counterfactual that
//!   clamps the cause to the *opposite* of its factual value.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BccDecomposition, Cct, Dag, GraphError, NodeIdx, QuantityPlan};
use crate::rng;
use crate::scm::{BoolFunc, BoolScm, ExogenousDraw, ScmError};

/// Names (with pronouns) assignable to task nodes, canonical cast first.
pub const NAME_POOL: &[(&str, Pronoun)] = &[
    ("Xinyu", Pronoun::She),
    ("Ara", Pronoun::He),
    ("Becca", Pronoun::She),
    ("Celine", Pronoun::She),
    ("Daphne", Pronoun::She),
    ("Emma", Pronoun::She),
    ("Fox", Pronoun::He),
    ("Yasmin", Pronoun::She),
    ("Bruno", Pronoun::He),
    ("Carla", Pronoun::She),
    ("Dev", Pronoun::He),
    ("Elif", Pronoun::She),
    ("Gina", Pronoun::She),
    ("Hugo", Pronoun::He),
    ("Iris", Pronoun::She),
    ("Jack", Pronoun::He),
    ("Kira", Pronoun::She),
    ("Liam", Pronoun::He),
    ("Mona", Pronoun::She),
    ("Noah", Pronoun::He),
    ("Opal", Pronoun::She),
    ("Pablo", Pronoun::He),
    ("Quinn", Pronoun::She),
    ("Rana", Pronoun::She),
    ("Sam", Pronoun::He),
    ("Tara", Pronoun::She),
    ("Umar", Pronoun::He),
    ("Vera", Pronoun::She),
    ("Wes", Pronoun::He),
    ("Zeke", Pronoun::He),
];

/// Flower varieties for the qualitative theme.
pub const FLOWER_POOL: &[&str] = &[
    "tulips", "roses", "daisies", "lilies", "orchids",
    "sunflowers", "peonies", "marigolds", "violets", "irises",
];

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid task configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error("pair {cause} -> {effect} is not in the task's quantity plan")]
    PairNotInPlan { cause: String, effect: String },
    #[error("corpus io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus record: {0}")]
    Json(#[from] serde_json::Error),
}

// ── Vocabulary ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pronoun {
    She,
    He,
}

impl Pronoun {
    pub fn subject(self) -> &'static str {
        match self {
            Pronoun::She => "she",
            Pronoun::He => "he",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theme {
    CandyParty,
    FlowerGarden,
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theme::CandyParty => "candyparty",
            Theme::FlowerGarden => "flowergarden",
        })
    }
}

/// Shape of each biconnected block in a generated DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BccShape {
    /// Entry and exit joined by two parallel directed paths.
    Cycle,
    /// Entry→exit chord plus a fan of two-step paths through the interiors.
    Wheel,
}

impl fmt::Display for BccShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BccShape::Cycle => "cycle",
            BccShape::Wheel => "wheel",
        })
    }
}

// ── TaskSpec ────────────────────────────────────────────────────────────────

/// Serialized task: structure plus all per-node vocabulary, keyed by node id.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaskJson {
    id: String,
    theme: Theme,
    seed: u64,
    dag: Dag,
    func: BTreeMap<String, BoolFunc>,
    names: BTreeMap<String, String>,
    pronouns: BTreeMap<String, Pronoun>,
    thresholds: BTreeMap<String, u8>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    favorites: BTreeMap<String, String>,
}

/// Structural analysis of a task's graph, computed on demand.
#[derive(Debug, Clone)]
pub struct TaskAnalysis {
    pub bcc: BccDecomposition,
    pub cct: Cct,
    pub plan: QuantityPlan,
}

/// A fully specified, renderable causal reasoning task.
#[derive(Debug, Clone, Serialize)]
#[serde(into = "TaskJson")]
pub struct TaskSpec {
    id: String,
    theme: Theme,
    seed: u64,
    scm: BoolScm,
    /// Character name per node index.
    names: Vec<String>,
    pronouns: Vec<Pronoun>,
    /// Leak threshold per node index; leak probability is `threshold / 10`.
    thresholds: Vec<u8>,
    /// Favorite flower per node index (FlowerGarden only).
    favorites: Vec<String>,
}

impl From<TaskSpec> for TaskJson {
    fn from(task: TaskSpec) -> Self {
        let key = |i: usize| task.scm.dag().name(i).to_string();
        TaskJson {
            id: task.id.clone(),
            theme: task.theme,
            seed: task.seed,
            func: (0..task.names.len()).map(|i| (key(i), task.scm.func(i))).collect(),
            names: task.names.iter().cloned().enumerate().map(|(i, n)| (key(i), n)).collect(),
            pronouns: task.pronouns.iter().copied().enumerate().map(|(i, p)| (key(i), p)).collect(),
            thresholds: task.thresholds.iter().copied().enumerate().map(|(i, t)| (key(i), t)).collect(),
            favorites: task.favorites.iter().cloned().enumerate().map(|(i, f)| (key(i), f)).collect(),
            dag: task.scm.dag().clone(),
        }
    }
}

impl<'de> Deserialize<'de> for TaskSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        TaskSpec::try_from(TaskJson::deserialize(de)?).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<TaskJson> for TaskSpec {
    type Error = TaskError;
    fn try_from(raw: TaskJson) -> Result<Self, TaskError> {
        let dag = raw.dag;
        let n = dag.len();
        let gather = |what: &str, map: &BTreeMap<String, String>| -> Result<Vec<String>, TaskError> {
            let mut out = vec![String::new(); n];
            for (node, value) in map {
                let i = dag
                    .index_of(node)
                    .ok_or_else(|| TaskError::Config(format!("{what} names unknown node {node:?}")))?;
                out[i] = value.clone();
            }
            Ok(out)
        };
        if raw.func.len() != n || raw.names.len() != n || raw.pronouns.len() != n
            || raw.thresholds.len() != n
        {
            return Err(TaskError::Config(
                "func/names/pronouns/thresholds must cover every node exactly once".into(),
            ));
        }
        let names = gather("names", &raw.names)?;
        let favorites = if raw.favorites.is_empty() {
            Vec::new()
        } else {
            gather("favorites", &raw.favorites)?
        };
        let mut pronouns = vec![Pronoun::She; n];
        for (node, p) in &raw.pronouns {
            let i = dag
                .index_of(node)
                .ok_or_else(|| TaskError::Config(format!("pronouns name unknown node {node:?}")))?;
            pronouns[i] = *p;
        }
        let mut thresholds = vec![0u8; n];
        for (node, t) in &raw.thresholds {
            let i = dag
                .index_of(node)
                .ok_or_else(|| TaskError::Config(format!("thresholds name unknown node {node:?}")))?;
            thresholds[i] = *t;
        }
        let mut func = vec![BoolFunc::Or; n];
        for (node, f) in &raw.func {
            let i = dag
                .index_of(node)
                .ok_or_else(|| TaskError::Config(format!("func names unknown node {node:?}")))?;
            func[i] = *f;
        }
        TaskSpec::try_new(raw.id, raw.theme, dag, func, names, pronouns, thresholds, favorites, raw.seed)
    }
}

impl TaskSpec {
    /// Assemble and validate a task.
    ///
    /// Thresholds must lie in `1..=10`; names must be unique and non-empty;
    /// XOR mechanisms are rejected (they have no narrative surface form);
    /// the FlowerGarden theme requires a favorite flower per node.
    #[allow(clippy::too_many_arguments)]
    pub fn try_new(
        id: String,
        theme: Theme,
        dag: Dag,
        func: Vec<BoolFunc>,
        names: Vec<String>,
        pronouns: Vec<Pronoun>,
        thresholds: Vec<u8>,
        favorites: Vec<String>,
        seed: u64,
    ) -> Result<Self, TaskError> {
        let n = dag.len();
        if names.len() != n || pronouns.len() != n || thresholds.len() != n || func.len() != n {
            return Err(TaskError::Config("per-node vectors must match the node count".into()));
        }
        if func.contains(&BoolFunc::Xor) {
            return Err(TaskError::Config("XOR mechanisms cannot be rendered as a story".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if name.is_empty() || !seen.insert(name.clone()) {
                return Err(TaskError::Config(format!("character names must be unique; got {name:?}")));
            }
        }
        for &t in &thresholds {
            if !(1..=10).contains(&t) {
                return Err(TaskError::Config(format!("threshold {t} outside 1..=10")));
            }
        }
        match theme {
            Theme::CandyParty => {
                if !favorites.is_empty() {
                    return Err(TaskError::Config("CandyParty tasks carry no favorites".into()));
                }
            }
            Theme::FlowerGarden => {
                if favorites.len() != n || favorites.iter().any(String::is_empty) {
                    return Err(TaskError::Config(
                        "FlowerGarden tasks need a favorite flower per node".into(),
                    ));
                }
            }
        }
        let noise_p: Vec<f64> = thresholds.iter().map(|&t| f64::from(t) / 10.0).collect();
        let scm = BoolScm::new(dag, func, noise_p, vec![1.0; n])?;
        Ok(TaskSpec { id, theme, seed, scm, names, pronouns, thresholds, favorites })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn theme(&self) -> Theme {
        self.theme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scm(&self) -> &BoolScm {
        &self.scm
    }

    pub fn dag(&self) -> &Dag {
        self.scm.dag()
    }

    pub fn character(&self, v: NodeIdx) -> &str {
        &self.names[v]
    }

    pub fn threshold(&self, v: NodeIdx) -> u8 {
        self.thresholds[v]
    }

    /// Validate the modeling assumptions and derive the CCT and plan.
    pub fn analysis(&self) -> Result<TaskAnalysis, TaskError> {
        let bcc = self.dag().validate_assumptions()?;
        let cct = Cct::build(self.dag(), &bcc);
        let plan = cct.quantity_plan();
        Ok(TaskAnalysis { bcc, cct, plan })
    }

    // ── Rendering ───────────────────────────────────────────────────────

    /// The character list in topological order: "A, B, and C".
    fn cast_list(&self) -> String {
        let cast: Vec<&str> =
            self.dag().topo_order().iter().map(|&v| self.names[v].as_str()).collect();
        join_names(&cast)
    }

    /// The leak clause of one node's rule sentence.
    fn leak_clause(&self, v: NodeIdx) -> String {
        let pron = self.pronouns[v].subject();
        match self.theme {
            Theme::CandyParty => {
                format!("{pron} gets at least {} candies", self.thresholds[v])
            }
            Theme::FlowerGarden => format!("{pron} plants {}", self.favorites[v]),
        }
    }

    /// One node's happiness/bloom rule.
    fn rule_sentence(&self, v: NodeIdx) -> String {
        let parents = self.dag().parents(v);
        let (subject, state) = match self.theme {
            Theme::CandyParty => (self.names[v].clone(), "will be happy"),
            Theme::FlowerGarden => (format!("{}'s garden", self.names[v]), "will bloom"),
        };
        let parent_state = |p: NodeIdx| match self.theme {
            Theme::CandyParty => format!("{} is happy", self.names[p]),
            Theme::FlowerGarden => format!("{}'s garden blooms", self.names[p]),
        };
        let leak = self.leak_clause(v);
        if parents.is_empty() {
            return format!("{subject} {state} if {leak}.");
        }
        let clauses: Vec<String> = parents.iter().map(|&p| parent_state(p)).collect();
        if parents.len() >= 2 && self.scm.func(v) == BoolFunc::And {
            // Conjunction of parents, then the leak as the alternative route.
            format!("{subject} {state} if {}, or if {leak}.", clauses.join(" and if "))
        } else {
            format!("{subject} {state} if {} or if {leak}.", clauses.join(" or if "))
        }
    }

    /// The context paragraph: cast introduction plus one rule per node, in
    /// topological order, without any sample realization.
    pub fn render_context(&self) -> String {
        let opening = match self.theme {
            Theme::CandyParty => format!(
                "{} are going to a party, where the host is going to distribute candies.",
                self.cast_list()
            ),
            Theme::FlowerGarden => format!(
                "{} are planting their gardens, where each of them is going to plant some flowers.",
                self.cast_list()
            ),
        };
        let mut out = opening;
        for &v in self.dag().topo_order() {
            out.push(' ');
            out.push_str(&self.rule_sentence(v));
        }
        out
    }

    /// Draw the narrative surface (candy counts / planted flowers) agreeing
    /// with one sample's exogenous draw.
    pub fn realize(&self, u: &ExogenousDraw, seed: u64, sample: u64) -> Surface {
        match self.theme {
            Theme::CandyParty => {
                let counts = (0..self.names.len())
                    .map(|v| {
                        let t = u16::from(self.thresholds[v]);
                        let draw =
                            rng::uniform_at(seed, rng::PURPOSE_SURFACE, v as u64, sample, 0);
                        let count = if u.leak[v] {
                            // Consistent with "got at least the threshold".
                            t + (draw * f64::from(11 - t)) as u16
                        } else {
                            (draw * f64::from(t)) as u16
                        };
                        count as u8
                    })
                    .collect();
                Surface::Counts(counts)
            }
            Theme::FlowerGarden => {
                let plants = (0..self.names.len())
                    .map(|v| {
                        if u.leak[v] {
                            self.favorites[v].clone()
                        } else {
                            let draw =
                                rng::uniform_at(seed, rng::PURPOSE_SURFACE, v as u64, sample, 0);
                            let others: Vec<&&str> = FLOWER_POOL
                                .iter()
                                .filter(|&&f| f != self.favorites[v])
                                .collect();
                            others[(draw * others.len() as f64) as usize].to_string()
                        }
                    })
                    .collect();
                Surface::Flowers(plants)
            }
        }
    }

    /// The realization sentence appended to the context.
    pub fn render_surface(&self, surface: &Surface) -> String {
        let order = self.dag().topo_order();
        match (self.theme, surface) {
            (Theme::CandyParty, Surface::Counts(counts)) => {
                let parts: Vec<String> = order
                    .iter()
                    .map(|&v| format!("{} gets {}", self.names[v], counts[v]))
                    .collect();
                format!("After distributing the candies, {}.", join_clauses(&parts))
            }
            (Theme::FlowerGarden, Surface::Flowers(plants)) => {
                let parts: Vec<String> = order
                    .iter()
                    .map(|&v| format!("{} plants {}", self.names[v], plants[v]))
                    .collect();
                format!("After planting, {}.", join_clauses(&parts))
            }
            _ => unreachable!("surface kind always matches the task theme"),
        }
    }

    /// "Is … happy?" (or "Does …'s garden bloom?"), with the brevity cue.
    pub fn factual_question(&self, effect: NodeIdx) -> String {
        match self.theme {
            Theme::CandyParty => {
                format!("Is {} happy? Be as concise as possible.", self.names[effect])
            }
            Theme::FlowerGarden => format!(
                "Does {}'s garden bloom? Be as concise as possible.",
                self.names[effect]
            ),
        }
    }

    /// The counterfactual question: clamp `cause` to `do_value` "regardless",
    /// then ask about the effect under that assumption.
    pub fn counterfactual_question(
        &self,
        cause: NodeIdx,
        do_value: bool,
        effect: NodeIdx,
    ) -> String {
        let assumption = match (self.theme, do_value) {
            (Theme::CandyParty, true) => format!(
                "{} is happy regardless of the candy distribution",
                self.names[cause]
            ),
            (Theme::CandyParty, false) => format!(
                "{} is not happy regardless of the candy distribution",
                self.names[cause]
            ),
            (Theme::FlowerGarden, true) => {
                format!("{}'s garden blooms regardless of the planting", self.names[cause])
            }
            (Theme::FlowerGarden, false) => format!(
                "{}'s garden does not bloom regardless of the planting",
                self.names[cause]
            ),
        };
        format!(
            "Now, suppose that {assumption}. With this assumption, {}",
            decapitalize(&self.factual_question(effect))
        )
    }

    /// Render the factual and counterfactual prompts for one pair and
    /// sample. The pair must belong to the task's quantity plan; the
    /// counterfactual clamps the cause to the opposite of its factual value.
    pub fn render_queries(
        &self,
        cause: NodeIdx,
        effect: NodeIdx,
        sample: u64,
        seed: u64,
    ) -> Result<QueryInstance, TaskError> {
        let analysis = self.analysis()?;
        if !analysis.plan.all_pairs().contains(&(cause, effect)) {
            return Err(TaskError::PairNotInPlan {
                cause: self.dag().name(cause).to_string(),
                effect: self.dag().name(effect).to_string(),
            });
        }
        let u = self.scm.exogenous_at(seed, sample);
        let factual_values = self.scm.evaluate(&u, None);
        let do_value = !factual_values[cause];
        let surface = self.realize(&u, seed, sample);
        let scene = format!("{} {}", self.render_context(), self.render_surface(&surface));
        Ok(QueryInstance {
            task_id: self.id.clone(),
            sample_id: sample,
            pair: (self.dag().name(cause).to_string(), self.dag().name(effect).to_string()),
            do_value,
            factual: format!("{scene} {}", self.factual_question(effect)),
            counterfactual: format!(
                "{scene} {}",
                self.counterfactual_question(cause, do_value, effect)
            ),
        })
    }
}

/// Narrative realization of one exogenous sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Surface {
    /// Candy count per node index.
    Counts(Vec<u8>),
    /// Planted flower per node index.
    Flowers(Vec<String>),
}

/// "A", "A and B", or "A, B, and C".
fn join_names(names: &[&str]) -> String {
    join_clauses(&names.iter().map(|s| s.to_string()).collect::<Vec<_>>())
}

fn join_clauses(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [only] => only.clone(),
        [a, b] => format!("{a} and {b}"),
        _ => {
            let head = &parts[..parts.len() - 1];
            format!("{}, and {}", head.join(", "), parts[parts.len() - 1])
        }
    }
}

/// Lower-case the first character (for splicing a question after a clause).
fn decapitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_lowercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

// ── Query corpus ────────────────────────────────────────────────────────────

/// One corpus row: a factual/counterfactual prompt pair for one CCT pair
/// and one exogenous sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryInstance {
    pub task_id: String,
    pub sample_id: u64,
    /// `(cause, effect)` node ids.
    pub pair: (String, String),
    /// Value the counterfactual clamps the cause to (the opposite of its
    /// factual value for this sample).
    pub do_value: bool,
    pub factual: String,
    pub counterfactual: String,
}

impl QueryInstance {
    /// Stable identifier within a task: `cause->effect#sample`.
    pub fn query_id(&self) -> String {
        format!("{}->{}#{:05}", self.pair.0, self.pair.1, self.sample_id)
    }
}

/// Generate the full corpus: every CCT pair × every sample, pairs in
/// chain-lexicographic order, samples ascending.
pub fn gen_corpus(task: &TaskSpec, n_samples: usize, seed: u64) -> Result<Vec<QueryInstance>, TaskError> {
    let analysis = task.analysis()?;
    let mut out = Vec::with_capacity(analysis.cct.pairs().len() * n_samples);
    for (cause, effect) in analysis.cct.pairs() {
        for sample in 0..n_samples as u64 {
            out.push(task.render_queries(cause, effect, sample, seed)?);
        }
    }
    Ok(out)
}

/// Write a corpus as JSON-lines.
pub fn write_corpus(path: &Path, corpus: &[QueryInstance]) -> Result<(), TaskError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in corpus {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read a JSON-lines corpus.
pub fn read_corpus(path: &Path) -> Result<Vec<QueryInstance>, TaskError> {
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

// ── Chain-of-thought wrapping ───────────────────────────────────────────────

/// A worked question/answer pair for few-shot prompting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotExemplar {
    pub question: String,
    pub answer: String,
}

/// Prefix a prompt with worked QUESTION/ANSWER exemplars and end with a bare
/// `ANSWER:` cue. With no exemplars the prompt is returned unchanged.
pub fn wrap_cot(target: &str, exemplars: &[CotExemplar]) -> String {
    if exemplars.is_empty() {
        return target.to_string();
    }
    let mut out = String::new();
    for ex in exemplars {
        out.push_str(&format!("QUESTION: {}\n\nANSWER: {}\n\n", ex.question, ex.answer));
    }
    out.push_str(&format!("QUESTION: {target}\n\nANSWER:"));
    out
}

// ── Generation ──────────────────────────────────────────────────────────────

/// Configuration for random task generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_bccs: usize,
    pub nodes_per_bcc: usize,
    pub shape: BccShape,
    pub theme: Theme,
    pub seed: u64,
    /// Probability that a node with two or more parents uses AND.
    pub and_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_bccs: 3,
            nodes_per_bcc: 4,
            shape: BccShape::Cycle,
            theme: Theme::CandyParty,
            seed: 0,
            and_fraction: 0.0,
        }
    }
}

/// Build a chain of identical biconnected blocks.
///
/// Node ids: root `X`, leaf `Y`, cut points `C1…`, block interiors `V1…`.
/// The shape is fully determined by the arguments — no randomness — so structure
/// and vocabulary can be varied independently.
pub fn gen_dag(n_bccs: usize, nodes_per_bcc: usize, shape: BccShape) -> Result<Dag, TaskError> {
    if n_bccs < 2 {
        return Err(TaskError::Config(
            "need at least 2 blocks so the graph has a cut point".into(),
        ));
    }
    if nodes_per_bcc < 2 {
        return Err(TaskError::Config("blocks need at least 2 nodes".into()));
    }
    let mut names: Vec<String> = vec!["X".into()];
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut interior = 0usize;
    let mut entry = "X".to_string();
    for block in 0..n_bccs {
        let exit = if block + 1 == n_bccs { "Y".to_string() } else { format!("C{}", block + 1) };
        names.push(exit.clone());
        let k = nodes_per_bcc - 2;
        let mut fresh = || {
            interior += 1;
            let id = format!("V{interior}");
            names.push(id.clone());
            id
        };
        match shape {
            BccShape::Cycle => {
                // Split the interiors over two parallel arms; an empty arm
                // contributes the direct entry→exit edge.
                let first = k - k / 2;
                let mut arm = |len: usize| {
                    let mut prev = entry.clone();
                    for _ in 0..len {
                        let v = fresh();
                        edges.push((prev.clone(), v.clone()));
                        prev = v;
                    }
                    edges.push((prev, exit.clone()));
                };
                arm(first);
                // A two-node block is a lone bridge edge; anything larger
                // gets the second (possibly empty) arm.
                if k > 0 {
                    arm(k - first);
                }
            }
            BccShape::Wheel => {
                edges.push((entry.clone(), exit.clone()));
                for _ in 0..k {
                    let v = fresh();
                    edges.push((entry.clone(), v.clone()));
                    edges.push((v, exit.clone()));
                }
            }
        }
        entry = exit;
    }
    let edge_refs: Vec<(&str, &str)> =
        edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    Ok(Dag::try_new(names, &edge_refs, "X", "Y")?)
}

/// Generate a themed task: deterministic structure from the config, seeded
/// vocabulary (names, thresholds, mechanisms, favorites).
pub fn gen_task(cfg: &GenConfig) -> Result<TaskSpec, TaskError> {
    let dag = gen_dag(cfg.n_bccs, cfg.nodes_per_bcc, cfg.shape)?;
    let n = dag.len();
    if n > NAME_POOL.len() {
        return Err(TaskError::Config(format!(
            "task needs {n} characters but the name pool has {}",
            NAME_POOL.len()
        )));
    }
    if !(0.0..=1.0).contains(&cfg.and_fraction) {
        return Err(TaskError::Config(format!(
            "and_fraction {} outside [0, 1]",
            cfg.and_fraction
        )));
    }
    let mut rng = rng::stream(cfg.seed, rng::PURPOSE_GENERATE, 0);

    // Names: seeded shuffle of the pool, assigned in topological order.
    let mut pool: Vec<usize> = (0..NAME_POOL.len()).collect();
    pool.shuffle(&mut rng);
    let mut names = vec![String::new(); n];
    let mut pronouns = vec![Pronoun::She; n];
    for (pos, &v) in dag.topo_order().iter().enumerate() {
        let (name, pronoun) = NAME_POOL[pool[pos]];
        names[v] = name.to_string();
        pronouns[v] = pronoun;
    }

    // Thresholds 1..=10, rejecting 10 (leak probability 1 breaks
    // positivity); mechanisms OR with an optional AND fraction.
    let mut thresholds = vec![0u8; n];
    for t in thresholds.iter_mut() {
        *t = loop {
            let draw = rng.random_range(1..=10u8);
            if draw < 10 {
                break draw;
            }
        };
    }
    let mut func = vec![BoolFunc::Or; n];
    for v in 0..n {
        if dag.parents(v).len() >= 2 && rng.random::<f64>() < cfg.and_fraction {
            func[v] = BoolFunc::And;
        }
    }

    let favorites = match cfg.theme {
        Theme::CandyParty => Vec::new(),
        Theme::FlowerGarden => (0..n)
            .map(|_| FLOWER_POOL[rng.random_range(0..FLOWER_POOL.len())].to_string())
            .collect(),
    };

    let id = format!(
        "{}-{}x{}-{}-s{}",
        cfg.theme, cfg.n_bccs, cfg.nodes_per_bcc, cfg.shape, cfg.seed
    );
    TaskSpec::try_new(id, cfg.theme, dag, func, names, pronouns, thresholds, favorites, cfg.seed)
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    /// X→A→Y chain with the canonical first three characters.
    fn tiny_task() -> TaskSpec {
        let dag = Dag::try_new(
            vec!["X".into(), "A".into(), "Y".into()],
            &[("X", "A"), ("A", "Y")],
            "X",
            "Y",
        )
        .unwrap();
        TaskSpec::try_new(
            "tiny".into(),
            Theme::CandyParty,
            dag,
            vec![BoolFunc::Or; 3],
            vec!["Xinyu".into(), "Ara".into(), "Yasmin".into()],
            vec![Pronoun::She, Pronoun::He, Pronoun::She],
            vec![3, 4, 1],
            Vec::new(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn context_follows_the_template() {
        assert_eq!(
            tiny_task().render_context(),
            "Xinyu, Ara, and Yasmin are going to a party, where the host is going to \
             distribute candies. Xinyu will be happy if she gets at least 3 candies. \
             Ara will be happy if Xinyu is happy or if he gets at least 4 candies. \
             Yasmin will be happy if Ara is happy or if she gets at least 1 candies."
        );
    }

    #[test]
    fn surface_sentence_lists_every_character() {
        let task = tiny_task();
        let text = task.render_surface(&Surface::Counts(vec![6, 7, 8]));
        assert_eq!(
            text,
            "After distributing the candies, Xinyu gets 6, Ara gets 7, and Yasmin gets 8."
        );
    }

    #[test]
    fn question_forms_match_the_sentence_patterns() {
        let task = tiny_task();
        assert_eq!(task.factual_question(2), "Is Yasmin happy? Be as concise as possible.");
        assert_eq!(
            task.counterfactual_question(0, true, 2),
            "Now, suppose that Xinyu is happy regardless of the candy distribution. \
             With this assumption, is Yasmin happy? Be as concise as possible."
        );
        assert_eq!(
            task.counterfactual_question(0, false, 2),
            "Now, suppose that Xinyu is not happy regardless of the candy distribution. \
             With this assumption, is Yasmin happy? Be as concise as possible."
        );
    }

    #[test]
    fn and_rule_conjoins_parents_with_a_leak_alternative() {
        let dag = Dag::try_new(
            vec!["X".into(), "A".into(), "B".into(), "Y".into()],
            &[("X", "A"), ("X", "B"), ("A", "Y"), ("B", "Y")],
            "X",
            "Y",
        )
        .unwrap();
        let task = TaskSpec::try_new(
            "and".into(),
            Theme::CandyParty,
            dag,
            vec![BoolFunc::Or, BoolFunc::Or, BoolFunc::Or, BoolFunc::And],
            vec!["Xinyu".into(), "Ara".into(), "Becca".into(), "Yasmin".into()],
            vec![Pronoun::She, Pronoun::He, Pronoun::She, Pronoun::She],
            vec![3, 4, 5, 6],
            Vec::new(),
            0,
        )
        .unwrap();
        let context = task.render_context();
        assert!(context.contains(
            "Yasmin will be happy if Ara is happy and if Becca is happy, \
             or if she gets at least 6 candies."
        ));
    }

    #[test]
    fn counterfactual_is_factual_plus_one_assumption_sentence() {
        let task = tiny_task();
        let q = task.render_queries(0, 2, 5, 11).unwrap();
        let insert = format!(
            "Now, suppose that Xinyu is {}happy regardless of the candy distribution. \
             With this assumption, ",
            if q.do_value { "" } else { "not " }
        );
        let spliced = q.factual.replace(" Is Yasmin happy?", &format!(" {insert}is Yasmin happy?"));
        assert_eq!(q.counterfactual, spliced);
    }

    #[test]
    fn surface_realization_respects_the_leak_draw() {
        let task = tiny_task();
        for sample in 0..200 {
            let u = task.scm().exogenous_at(42, sample);
            match task.realize(&u, 42, sample) {
                Surface::Counts(counts) => {
                    for v in 0..3 {
                        let t = task.threshold(v);
                        assert!(counts[v] <= 10);
                        if u.leak[v] {
                            assert!(counts[v] >= t, "leak fired but count {} < {t}", counts[v]);
                        } else {
                            assert!(counts[v] < t, "leak off but count {} >= {t}", counts[v]);
                        }
                    }
                }
                Surface::Flowers(_) => unreachable!(),
            }
        }
    }

    #[test]
    fn flower_theme_renders_without_numbers() {
        let cfg = GenConfig { theme: Theme::FlowerGarden, seed: 9, ..GenConfig::default() };
        let task = gen_task(&cfg).unwrap();
        let q = task.render_queries(task.dag().root(), task.dag().leaf(), 0, 1).unwrap();
        for text in [&q.factual, &q.counterfactual] {
            assert!(
                !text.chars().any(|c| c.is_ascii_digit()),
                "qualitative theme leaked a digit: {text}"
            );
        }
        assert!(q.factual.contains("garden bloom"));
    }

    #[test]
    fn do_value_opposes_the_factual_cause_value() {
        let task = tiny_task();
        for sample in 0..50 {
            let q = task.render_queries(0, 2, sample, 13).unwrap();
            let u = task.scm().exogenous_at(13, sample);
            let x = task.scm().evaluate(&u, None)[0];
            assert_eq!(q.do_value, !x);
        }
    }

    #[test]
    fn pair_outside_the_plan_is_rejected() {
        // Interior chain nodes are cut points here, so (A, Y) is in the
        // plan; the reversed pair is not.
        let task = tiny_task();
        assert!(task.render_queries(1, 2, 0, 0).is_ok());
        match task.render_queries(2, 1, 0, 0) {
            Err(TaskError::PairNotInPlan { cause, effect }) => {
                assert_eq!((cause.as_str(), effect.as_str()), ("Y", "A"));
            }
            other => panic!("expected plan error, got {other:?}"),
        }
    }

    #[test]
    fn cot_wrapping_counts_and_identity() {
        let exemplars = vec![
            CotExemplar { question: "Q1".into(), answer: "A1".into() },
            CotExemplar { question: "Q2".into(), answer: "A2".into() },
        ];
        let wrapped = wrap_cot("target question", &exemplars);
        assert_eq!(wrapped.matches("QUESTION:").count(), 3);
        assert_eq!(wrapped.matches("ANSWER:").count(), 3);
        assert!(wrapped.ends_with("QUESTION: target question\n\nANSWER:"));
        assert_eq!(wrap_cot("solo", &[]), "solo");
    }

    #[test]
    fn generated_dags_match_the_requested_statistics() {
        for shape in [BccShape::Cycle, BccShape::Wheel] {
            for n_bccs in 2..=4 {
                for size in 2..=5 {
                    let dag = gen_dag(n_bccs, size, shape).unwrap();
                    let bcc = dag.validate_assumptions().unwrap_or_else(|e| {
                        panic!("{shape} {n_bccs}x{size}: {e}")
                    });
                    assert_eq!(bcc.components.len(), n_bccs, "{shape} {n_bccs}x{size}");
                    assert_eq!(bcc.cut_points.len(), n_bccs - 1);
                    for comp in &bcc.components {
                        assert_eq!(comp.nodes.len(), size);
                    }
                }
            }
        }
        assert!(gen_dag(1, 4, BccShape::Cycle).is_err());
    }

    #[test]
    fn generated_tasks_are_deterministic_and_valid() {
        let cfg = GenConfig { seed: 31, ..GenConfig::default() };
        let a = gen_task(&cfg).unwrap();
        let b = gen_task(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = gen_task(&GenConfig { seed: 32, ..GenConfig::default() }).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&other).unwrap()
        );
        // Every quantity-plan pair of a generated task is monotone.
        let analysis = a.analysis().unwrap();
        for (c, e) in analysis.plan.all_pairs() {
            assert!(a.scm().check_monotonic(c, e).unwrap());
        }
    }

    #[test]
    fn task_json_round_trip_preserves_rendering() {
        let task = gen_task(&GenConfig { seed: 5, ..GenConfig::default() }).unwrap();
        let json = serde_json::to_string_pretty(&task).unwrap();
        let back: TaskSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.render_context(), task.render_context());
        let qa = task.render_queries(task.dag().root(), task.dag().leaf(), 3, 7).unwrap();
        let qb = back.render_queries(back.dag().root(), back.dag().leaf(), 3, 7).unwrap();
        assert_eq!(qa, qb);
    }

    #[test]
    fn corpus_covers_pairs_times_samples_and_round_trips() {
        let task = tiny_task();
        let corpus = gen_corpus(&task, 4, 3).unwrap();
        // Chain of 3: CCT = [X, A, Y] → 3 pairs.
        assert_eq!(corpus.len(), 12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_corpus(&path, &corpus).unwrap();
        let back = read_corpus(&path).unwrap();
        assert_eq!(back, corpus);
    }
}
