//! Run artifacts: the evaluation report, plot-ready CSV bundles, DOT
//! rendering of the cut-point tree, and the run manifest.
//!
//! The report (`report.json`) is the durable summary of an evaluation —
//! everything downstream tooling needs without the per-round vectors. The
//! raw per-round distributions go to `estimates.csv`; plot-shaped views
//! (quadrant scatter, validity bars, mediation curve) are emitted as a CSV
//! bundle with a `schema.json` documenting columns and threshold lines.
//! The manifest records content hashes of every artifact so a run
//! directory can be verified after the fact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluate::{mediation_curve, EvalConfig, Evaluation, MediationSeries, ReasonerClass};

// ── Errors ──────────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("CSV write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("report carries no external-validity verdicts; rendering needs an evaluation run with ground truth")]
    MissingValidity,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("artifact {path} does not match its recorded hash")]
    HashMismatch { path: String },
}

// ── Report summary ──────────────────────────────────────────────────────────

/// Per-quantity summary: truth, estimate distribution, validity verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub cause: String,
    pub effect: String,
    pub truth: Option<f64>,
    pub excluded: bool,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    /// Rounds where the raw arm difference needed clamping into [0, 1].
    pub clamped_rounds: usize,
    pub fraction_within: Option<f64>,
    pub valid: Option<bool>,
    pub near_valid: Option<bool>,
    pub shortest: usize,
    pub mediators: usize,
}

/// Per-composition summary: internal and external agreement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositionSummary {
    pub path: Vec<String>,
    pub mean_estimate: f64,
    pub gamma_fraction: f64,
    pub consistent: bool,
    pub epsilon_fraction: Option<f64>,
    /// Whether the composed estimate tracks the exact global quantity —
    /// the composition-level analogue of a quantity's validity.
    pub externally_valid: Option<bool>,
}

/// The durable evaluation summary written to `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub task_id: String,
    pub config: EvalConfig,
    pub n_samples: usize,
    pub unknown_fraction: f64,
    pub cct_chain: Vec<String>,
    /// Largest deviation of an exact path product from the exact global
    /// quantity; absent in consistency-only mode.
    pub commutation_residual: Option<f64>,
    pub quantities: Vec<QuantitySummary>,
    pub compositions: Vec<CompositionSummary>,
    pub consistent: bool,
    pub label: Option<ReasonerClass>,
    pub excluded_pairs: Vec<(String, String)>,
    pub mediation: MediationSeries,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Collapse a full evaluation into its report summary.
pub fn summarize(eval: &Evaluation) -> EvalSummary {
    let quantities = eval
        .quantities
        .iter()
        .map(|q| {
            let (mean, sd) = mean_sd(q.rounds.iter().map(|r| r.estimate));
            QuantitySummary {
                cause: q.cause.clone(),
                effect: q.effect.clone(),
                truth: q.truth,
                excluded: q.excluded,
                mean_estimate: mean,
                sd_estimate: sd,
                clamped_rounds: q.rounds.iter().filter(|r| r.clamped).count(),
                fraction_within: q.fraction_within,
                valid: q.valid,
                near_valid: q.near_valid,
                shortest: q.shortest,
                mediators: q.mediators,
            }
        })
        .collect();
    let compositions = eval
        .compositions
        .iter()
        .map(|c| {
            let (mean, _) = mean_sd(c.rounds.iter().copied());
            CompositionSummary {
                path: c.path.clone(),
                mean_estimate: mean,
                gamma_fraction: c.gamma_fraction,
                consistent: c.consistent,
                epsilon_fraction: c.epsilon_fraction,
                externally_valid: c
                    .epsilon_fraction
                    .map(|f| f >= eval.config.validity_threshold),
            }
        })
        .collect();
    EvalSummary {
        task_id: eval.task_id.clone(),
        config: eval.config.clone(),
        n_samples: eval.n_samples,
        unknown_fraction: eval.unknown_fraction,
        cct_chain: eval.cct_chain.clone(),
        commutation_residual: eval.truth.as_ref().map(|t| t.commutation_residual),
        quantities,
        compositions,
        consistent: eval.consistent,
        label: eval.label,
        excluded_pairs: eval.excluded_pairs.clone(),
        mediation: mediation_curve(eval),
    }
}

/// Write `report.json`: pretty-printed, newline-terminated, byte-stable
/// for a fixed evaluation.
pub fn write_report(eval: &Evaluation, path: &Path) -> Result<EvalSummary, ReportError> {
    let summary = summarize(eval);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(summary)
}

/// Read a previously written `report.json`.
pub fn read_report(path: &Path) -> Result<EvalSummary, ReportError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

// ── Raw estimate distributions ──────────────────────────────────────────────

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Write `estimates.csv`: one row per subsample round per quantity and per
/// composition — the raw distributions behind every summary figure.
pub fn write_estimates_csv(eval: &Evaluation, path: &Path) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kind", "name", "round", "estimate", "clamped", "used", "eta", "epsilon", "gamma"])?;
    for q in &eval.quantities {
        let name = format!("{}->{}", q.cause, q.effect);
        for (round, r) in q.rounds.iter().enumerate() {
            w.write_record([
                "direct",
                &name,
                &round.to_string(),
                &r.estimate.to_string(),
                &r.clamped.to_string(),
                &r.used.to_string(),
                &fmt_opt(q.eta.as_ref().map(|e| e[round])),
                "",
                "",
            ])?;
        }
    }
    for c in &eval.compositions {
        let name = c.path.join("->");
        for (round, &est) in c.rounds.iter().enumerate() {
            w.write_record([
                "composed",
                &name,
                &round.to_string(),
                &est.to_string(),
                "",
                "",
                "",
                &fmt_opt(c.epsilon.as_ref().map(|e| e[round])),
                &c.gamma[round].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

// ── Plot-ready bundles ──────────────────────────────────────────────────────

/// Write the plot-data bundle into `dir`: `scatter.csv` (one point per
/// composition per round, internal vs external error), `validity.csv`
/// (per-quantity bars against the validity line), `mediation.csv` (error
/// by mediator count and by distance), and `schema.json` documenting
/// columns and threshold lines. Returns the files written.
pub fn export_plot_data(eval: &Evaluation, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let scatter = dir.join("scatter.csv");
    {
        let mut w = csv::Writer::from_path(&scatter)?;
        w.write_record(["composition", "round", "internal_rae", "external_rae"])?;
        for c in &eval.compositions {
            let name = c.path.join("->");
            for round in 0..c.gamma.len() {
                w.write_record([
                    name.as_str(),
                    &round.to_string(),
                    &c.gamma[round].to_string(),
                    &fmt_opt(c.epsilon.as_ref().map(|e| e[round])),
                ])?;
            }
        }
        w.flush()?;
    }
    written.push(scatter);

    let validity = dir.join("validity.csv");
    {
        let mut w = csv::Writer::from_path(&validity)?;
        w.write_record([
            "cause",
            "effect",
            "role",
            "truth",
            "percent_within",
            "threshold_percent",
            "valid",
            "near_valid",
        ])?;
        let threshold = (eval.config.validity_threshold * 100.0).to_string();
        for (i, q) in eval.quantities.iter().enumerate() {
            w.write_record([
                q.cause.as_str(),
                q.effect.as_str(),
                if i == 0 { "global" } else { "local" },
                &fmt_opt(q.truth),
                &fmt_opt(q.fraction_within.map(|f| f * 100.0)),
                &threshold,
                &q.valid.map(|v| v.to_string()).unwrap_or_default(),
                &q.near_valid.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
    }
    written.push(validity);

    let mediation = dir.join("mediation.csv");
    {
        let series = mediation_curve(eval);
        let mut w = csv::Writer::from_path(&mediation)?;
        w.write_record(["grouping", "key", "mean_eta", "n_pairs"])?;
        for (grouping, points) in
            [("mediators", &series.by_mediators), ("distance", &series.by_distance)]
        {
            for p in points {
                w.write_record([
                    grouping,
                    &p.key.to_string(),
                    &p.mean_eta.to_string(),
                    &p.n_pairs.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    written.push(mediation);

    let schema = dir.join("schema.json");
    let doc = serde_json::json!({
        "thresholds": {
            "rae": eval.config.delta,
            "validity_fraction": eval.config.validity_threshold,
            "near_fraction": eval.config.near_threshold,
        },
        "files": {
            "scatter.csv": {
                "columns": ["composition", "round", "internal_rae", "external_rae"],
                "notes": "One point per (composition, subsample round). Draw both threshold lines at thresholds.rae; external_rae is empty in consistency-only runs.",
            },
            "validity.csv": {
                "columns": ["cause", "effect", "role", "truth", "percent_within", "threshold_percent", "valid", "near_valid"],
                "notes": "One bar per quantity; threshold_percent is the validity line (100 * thresholds.validity_fraction).",
            },
            "mediation.csv": {
                "columns": ["grouping", "key", "mean_eta", "n_pairs"],
                "notes": "Mean external error grouped by mediator count and by shortest causal distance.",
            },
        },
    });
    write_atomic(&schema, format!("{:#}\n", doc).as_bytes())?;
    written.push(schema);

    Ok(written)
}

// ── DOT rendering ───────────────────────────────────────────────────────────

/// Distinct overlay colors, cycled when a tree has more valid paths.
const PATH_PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#17becf", "#bcbd22",
];

const INVALID_GRAY: &str = "gray60";

/// Render the cut-point tree with its verdicts: quantity edges black when
/// externally valid and gray otherwise (dashed when excluded from
/// classification), every externally valid root-to-leaf path overlaid in
/// its own color, and nodes filled black exactly when all paths through
/// them are valid.
///
/// Needs a report from a run with ground truth; consistency-only reports
/// have no validity verdicts to draw.
pub fn export_cct_dot(report: &EvalSummary) -> Result<String, ReportError> {
    if report.quantities.iter().all(|q| q.valid.is_none()) {
        return Err(ReportError::MissingValidity);
    }

    // Every root-to-leaf path with its external verdict: the direct edge is
    // judged by the global quantity, compositions by their own tracking of
    // the exact global value.
    let global = &report.quantities[0];
    let mut paths: Vec<(Vec<String>, bool)> =
        vec![(vec![global.cause.clone(), global.effect.clone()], global.valid == Some(true))];
    for c in &report.compositions {
        paths.push((c.path.clone(), c.externally_valid == Some(true)));
    }

    let mut out = String::new();
    out.push_str("digraph cct {\n");
    out.push_str(&format!("  // task: {}\n", report.task_id));
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle, style=filled, fontcolor=white];\n");

    for node in &report.cct_chain {
        let all_valid = paths
            .iter()
            .filter(|(nodes, _)| nodes.contains(node))
            .all(|&(_, valid)| valid);
        let fill = if all_valid { "black" } else { INVALID_GRAY };
        out.push_str(&format!("  \"{node}\" [fillcolor=\"{fill}\"];\n"));
    }

    for q in &report.quantities {
        let attrs = match (q.valid, q.excluded) {
            (Some(true), _) => "color=\"black\"".to_string(),
            (Some(false), _) => format!("color=\"{INVALID_GRAY}\""),
            (None, _) => format!("color=\"{INVALID_GRAY}\", style=\"dashed\""),
        };
        out.push_str(&format!("  \"{}\" -> \"{}\" [{attrs}];\n", q.cause, q.effect));
    }

    let mut overlay = 0usize;
    for (nodes, valid) in &paths {
        if !valid {
            continue;
        }
        let color = PATH_PALETTE[overlay % PATH_PALETTE.len()];
        out.push_str(&format!("  // path via: {}\n", nodes.join(" ")));
        for edge in nodes.windows(2) {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [color=\"{color}\", penwidth=2.4, constraint=false];\n",
                edge[0], edge[1]
            ));
        }
        overlay += 1;
    }

    out.push_str("}\n");
    Ok(out)
}

// ── Run manifest ────────────────────────────────────────────────────────────

/// One recorded artifact state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Artifact role, e.g. "task", "corpus", "responses", "report".
    pub kind: String,
    /// File name relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub recorded_unix: u64,
}

/// Append-only record of a run directory's artifacts. Re-recording a file
/// appends a new entry rather than rewriting history, so a resumed run
/// keeps the trail of every state the artifacts passed through;
/// verification checks files against their latest entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub task_id: String,
    pub created_unix: u64,
    /// Snapshot of the effective configuration, as recorded by the caller.
    pub config: Option<serde_json::Value>,
    pub entries: Vec<ManifestEntry>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Hash a file's content; returns the hex digest and the byte count.
pub fn sha256_file(path: &Path) -> Result<(String, u64), ReportError> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok((hex::encode(digest), bytes.len() as u64))
}

impl RunManifest {
    pub fn new(task_id: &str) -> Self {
        RunManifest {
            task_id: task_id.to_string(),
            created_unix: unix_now(),
            config: None,
            entries: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Load an existing manifest (it must belong to the same task) or start
    /// a fresh one.
    pub fn load_or_new(path: &Path, task_id: &str) -> Result<Self, ReportError> {
        if !path.exists() {
            return Ok(RunManifest::new(task_id));
        }
        let manifest = RunManifest::load(path)?;
        if manifest.task_id != task_id {
            return Err(ReportError::Manifest(format!(
                "manifest at {} belongs to task {}, not {}",
                path.display(),
                manifest.task_id,
                task_id
            )));
        }
        Ok(manifest)
    }

    /// Store the effective configuration alongside the artifact trail.
    pub fn set_config<C: Serialize>(&mut self, config: &C) -> Result<(), ReportError> {
        self.config = Some(serde_json::to_value(config)?);
        Ok(())
    }

    /// Hash `run_dir/file_name` and append its current state.
    pub fn record(&mut self, run_dir: &Path, kind: &str, file_name: &str) -> Result<(), ReportError> {
        let (sha256, bytes) = sha256_file(&run_dir.join(file_name))?;
        self.entries.push(ManifestEntry {
            kind: kind.to_string(),
            path: file_name.to_string(),
            sha256,
            bytes,
            recorded_unix: unix_now(),
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    /// Check every recorded file against its latest entry.
    pub fn verify(&self, run_dir: &Path) -> Result<(), ReportError> {
        let mut latest: BTreeMap<&str, &ManifestEntry> = BTreeMap::new();
        for entry in &self.entries {
            latest.insert(&entry.path, entry);
        }
        for (path, entry) in latest {
            let (sha256, _) = sha256_file(&run_dir.join(path))?;
            if sha256 != entry.sha256 {
                return Err(ReportError::HashMismatch { path: path.to_string() });
            }
        }
        Ok(())
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────
