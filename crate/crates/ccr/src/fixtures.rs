//! Pinned reference graphs, tasks, and prompting exemplars.
//!
//! Everything here is fixed by construction — same graph, same characters,
//! same thresholds on every machine — so tests, examples, and the CLI's
//! `--fixture` flag all speak about identical objects. The two task
//! families share the eight-node two-block graph and differ only in their
//! noise profile:
//!
//! - [`candyparty_eight`]: every threshold 7, the classic demonstration
//!   task. Its global PNS is tiny (0.3^7), which makes it ideal for
//!   convergence studies but useless for validity classification.
//! - [`taxonomy_eight`]: root threshold 7, everything else 1. All exact
//!   quantities stay far from zero, so reasoner classification has the
//!   statistical headroom to separate valid from invalid behavior.

use crate::graph::Dag;
use crate::reasoner::FlipPolicy;
use crate::scm::LinearScm;
use crate::task::{CotExemplar, Pronoun, Surface, TaskError, TaskSpec, Theme, FLOWER_POOL};

/// The eight-node, two-block task graph: two fused cycles joined by a
/// bridge, with cut points `C` and `D`.
pub fn eight_node_dag() -> Dag {
    Dag::try_new(
        ["X", "A", "B", "C", "D", "E", "F", "Y"].iter().map(|s| s.to_string()).collect(),
        &[
            ("X", "A"),
            ("X", "B"),
            ("X", "C"),
            ("A", "C"),
            ("B", "C"),
            ("C", "D"),
            ("D", "E"),
            ("D", "F"),
            ("E", "F"),
            ("E", "Y"),
            ("F", "Y"),
        ],
        "X",
        "Y",
    )
    .expect("pinned graph is well-formed")
}

/// A four-diamond chain `A..M` with cut points `D`, `G`, `J` — the
/// reference shape for multi-block decomposition.
pub fn cactus_dag() -> Dag {
    Dag::try_new(
        ["A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        &[
            ("A", "B"),
            ("A", "C"),
            ("B", "D"),
            ("C", "D"),
            ("D", "E"),
            ("D", "F"),
            ("E", "G"),
            ("F", "G"),
            ("G", "H"),
            ("G", "I"),
            ("H", "J"),
            ("I", "J"),
            ("J", "K"),
            ("J", "L"),
            ("K", "M"),
            ("L", "M"),
        ],
        "A",
        "M",
    )
    .expect("pinned graph is well-formed")
}

/// The eight canonical characters, in node order `X, A, B, C, D, E, F, Y`.
pub const CANONICAL_CAST: [(&str, Pronoun); 8] = [
    ("Xinyu", Pronoun::She),
    ("Ara", Pronoun::He),
    ("Becca", Pronoun::She),
    ("Celine", Pronoun::She),
    ("Daphne", Pronoun::She),
    ("Emma", Pronoun::She),
    ("Fox", Pronoun::He),
    ("Yasmin", Pronoun::She),
];

fn eight_node_task(
    id: String,
    theme: Theme,
    thresholds: Vec<u8>,
    favorites: Vec<String>,
    seed: u64,
) -> Result<TaskSpec, TaskError> {
    let (names, pronouns) = CANONICAL_CAST
        .iter()
        .map(|&(name, p)| (name.to_string(), p))
        .unzip();
    TaskSpec::try_new(
        id,
        theme,
        eight_node_dag(),
        vec![crate::scm::BoolFunc::Or; 8],
        names,
        pronouns,
        thresholds,
        favorites,
        seed,
    )
}

/// The candy-party task on the eight-node graph with every threshold 7.
pub fn candyparty_eight(seed: u64) -> TaskSpec {
    eight_node_task(
        format!("candyparty-eight-s{seed}"),
        Theme::CandyParty,
        vec![7; 8],
        Vec::new(),
        seed,
    )
    .expect("pinned task is well-formed")
}

/// The classification task: same graph and cast, root threshold 7,
/// every other threshold 1.
pub fn taxonomy_eight(seed: u64) -> TaskSpec {
    let mut thresholds = vec![1u8; 8];
    thresholds[0] = 7;
    eight_node_task(
        format!("taxonomy-eight-s{seed}"),
        Theme::FlowerGarden,
        thresholds,
        FLOWER_POOL.iter().take(8).map(|f| f.to_string()).collect(),
        seed,
    )
    .expect("pinned task is well-formed")
}

/// The flower-garden variant of the candy-party task: same graph, every
/// threshold 7, each character favoring a distinct flower.
pub fn flowergarden_eight(seed: u64) -> TaskSpec {
    eight_node_task(
        format!("flowergarden-eight-s{seed}"),
        Theme::FlowerGarden,
        vec![7; 8],
        FLOWER_POOL.iter().take(8).map(|f| f.to_string()).collect(),
        seed,
    )
    .expect("pinned task is well-formed")
}

/// Fixture names accepted by task-generation entry points.
pub const FIXTURE_NAMES: [&str; 3] = ["candyparty-eight", "taxonomy-eight", "flowergarden-eight"];

/// Build a pinned task by fixture name.
pub fn fixture_by_name(name: &str, seed: u64) -> Result<TaskSpec, TaskError> {
    match name {
        "candyparty-eight" => Ok(candyparty_eight(seed)),
        "taxonomy-eight" => Ok(taxonomy_eight(seed)),
        "flowergarden-eight" => Ok(flowergarden_eight(seed)),
        other => Err(TaskError::Config(format!(
            "unknown fixture {other:?}; expected one of {FIXTURE_NAMES:?}"
        ))),
    }
}

/// The flip policy whose noise grows with mediation structure — flips with
/// probability 0.15 on every pair with at least two mediators.
pub fn mediator_noise_policy() -> FlipPolicy {
    FlipPolicy::MediatorThreshold { min_mediators: 2, flip: 0.15 }
}

/// The per-mediator noise policy for mediation-curve studies: each
/// mediator adds 0.05 flip probability, capped at 0.45.
pub fn distance_noise_policy() -> FlipPolicy {
    FlipPolicy::PerMediator { per: 0.05, cap: 0.45 }
}

/// The seven-node linear walkthrough: a chain `X1 → X2 → X3 → X4 → Y` with
/// a parallel route `X1 → X5 → X3 → X6 → Y` through the cut point `X3`,
/// all coefficients 1.5. With `with_extra_edge`, the edge `X5 → X6` opens
/// a route around `X3`: the cut point disappears, the global effect picks
/// up the off-tree term, and `X5` becomes a confounder for `(X3, Y)`.
pub fn linear_seven(with_extra_edge: bool) -> LinearScm {
    let mut edges = vec![
        ("X1", "X2"),
        ("X2", "X3"),
        ("X3", "X4"),
        ("X4", "Y"),
        ("X1", "X5"),
        ("X5", "X3"),
        ("X3", "X6"),
        ("X6", "Y"),
    ];
    if with_extra_edge {
        edges.push(("X5", "X6"));
    }
    let dag = Dag::try_new(
        ["X1", "X2", "X3", "X4", "X5", "X6", "Y"].iter().map(|s| s.to_string()).collect(),
        &edges,
        "X1",
        "Y",
    )
    .expect("pinned graph is well-formed");
    let n = dag.edges().len();
    LinearScm::new(dag, vec![1.5; n]).expect("coefficient count matches edges")
}

/// The two demonstration exchanges for chain-of-thought prompting: one
/// factual and one counterfactual worked example on the eight-node task
/// with thresholds (3, 4, 10, 7, 5, 6, 10, 1) and a fixed candy count.
pub fn cot_exemplars() -> Vec<CotExemplar> {
    let task = eight_node_task(
        "cot-demo".into(),
        Theme::CandyParty,
        vec![3, 4, 10, 7, 5, 6, 10, 1],
        Vec::new(),
        0,
    )
    .expect("pinned task is well-formed");
    let scene = format!(
        "{} {}",
        task.render_context(),
        task.render_surface(&Surface::Counts(vec![6, 7, 5, 1, 3, 4, 9, 8]))
    );
    let becca = task.dag().index_of("B").expect("pinned node");
    let factual_q = task.factual_question(becca);
    vec![
        CotExemplar {
            question: format!("{scene} {factual_q}"),
            answer: "Since Xinyu gets 6 candies, which is more than 3, she is happy. In that \
                     case, Becca is happy no matter how many candies she got, because she will \
                     be happy if Xinyu is happy. Therefore, yes, Becca is happy!"
                .into(),
        },
        CotExemplar {
            question: format!(
                "{scene} Now, suppose that Xinyu is not happy regardless of the candy \
                 distribution. {factual_q}"
            ),
            answer: "Since Xinyu gets 6 candies, which is more than 3, she is happy. However, \
                     we are asked to assume Xinyu is not happy regardless. In that case, Becca \
                     is happy only if she gets at least 10 candies. Becca gets 5 candies, which \
                     is less than 10. Therefore, no, Becca is not happy!"
                .into(),
        },
    ]
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimand::linear_ate_paths;
    use crate::evaluate::compute_truth;

    const TOL: f64 = 1e-12;

    #[test]
    fn eight_node_graph_decomposes_into_the_pinned_chain() {
        let task = candyparty_eight(0);
        let analysis = task.analysis().unwrap();
        let names: Vec<&str> =
            analysis.cct.chain().iter().map(|&v| task.dag().name(v)).collect();
        assert_eq!(names, vec!["X", "C", "D", "Y"]);
        assert_eq!(analysis.plan.locals.len(), 5);
        assert_eq!(analysis.plan.compositions.len(), 3);
    }

    #[test]
    fn cactus_has_ten_pairs_and_seven_compositions() {
        let dag = cactus_dag();
        assert_eq!(dag.len(), 13);
        assert_eq!(dag.edges().len(), 16);
        let bcc = dag.validate_assumptions().unwrap();
        let cuts: Vec<&str> = bcc.cut_points.iter().map(|&v| dag.name(v)).collect();
        assert_eq!(cuts, vec!["D", "G", "J"]);
        let cct = crate::graph::Cct::build(&dag, &bcc);
        let plan = cct.quantity_plan();
        assert_eq!(plan.all_pairs().len(), 10);
        assert_eq!(plan.compositions.len(), 7);
    }

    #[test]
    fn candyparty_truths_match_closed_forms() {
        let truth = compute_truth(&candyparty_eight(0)).unwrap();
        let by_pair = |c: &str, e: &str| {
            truth
                .pairs
                .iter()
                .find(|p| p.cause == c && p.effect == e)
                .map(|p| p.pns)
                .unwrap()
        };
        // Survival of one 0.7 leak per hop along the cut-point chain.
        assert!((by_pair("X", "Y") - 0.3f64.powi(7)).abs() < TOL);
        assert!((by_pair("X", "C") - 0.027).abs() < TOL);
        assert!((by_pair("C", "D") - 0.3).abs() < TOL);
        assert!((by_pair("D", "Y") - 0.027).abs() < TOL);
        assert!((by_pair("X", "D") - 0.0081).abs() < TOL);
        assert!((by_pair("C", "Y") - 0.0081).abs() < TOL);
        assert!(truth.commutation_residual < TOL);
    }

    #[test]
    fn taxonomy_truths_stay_classifiable() {
        let truth = compute_truth(&taxonomy_eight(0)).unwrap();
        let global = truth.pairs[0].pns;
        assert!((global - 0.9f64.powi(7)).abs() < TOL);
        // Every plan quantity sits far above the classification floor.
        assert!(truth.pairs.iter().all(|p| p.pns > 0.4), "{:?}", truth.pairs);
        assert!(truth.commutation_residual < TOL);
    }

    #[test]
    fn linear_walkthrough_matches_the_worked_numbers() {
        let scm = linear_seven(false);
        let dag = scm.dag();
        let (x1, x3, y) = (
            dag.index_of("X1").unwrap(),
            dag.index_of("X3").unwrap(),
            dag.index_of("Y").unwrap(),
        );
        assert!((linear_ate_paths(&scm, x1, x3) - 4.5).abs() < TOL);
        assert!((linear_ate_paths(&scm, x3, y) - 4.5).abs() < TOL);
        assert!((linear_ate_paths(&scm, x1, y) - 20.25).abs() < TOL);

        let with_edge = linear_seven(true);
        assert!((linear_ate_paths(&with_edge, x1, y) - 23.625).abs() < TOL);
        // The bypass route is exactly the three-hop product.
        assert!(
            (linear_ate_paths(&with_edge, x1, y) - linear_ate_paths(&scm, x1, y) - 1.5f64.powi(3))
                .abs()
                < TOL
        );
    }

    #[test]
    fn cut_point_vanishes_with_the_extra_edge() {
        assert!(linear_seven(false).dag().validate_assumptions().is_ok());
        assert!(linear_seven(true).dag().validate_assumptions().is_err());
    }

    #[test]
    fn cot_exemplars_are_byte_frozen() {
        let exemplars = cot_exemplars();
        assert_eq!(exemplars.len(), 2);
        let context = "Xinyu, Ara, Becca, Celine, Daphne, Emma, Fox, and Yasmin are going to a \
                       party, where the host is going to distribute candies. Xinyu will be happy \
                       if she gets at least 3 candies. Ara will be happy if Xinyu is happy or if \
                       he gets at least 4 candies. Becca will be happy if Xinyu is happy or if \
                       she gets at least 10 candies. Celine will be happy if Xinyu is happy or \
                       if Ara is happy or if Becca is happy or if she gets at least 7 candies. \
                       Daphne will be happy if Celine is happy or if she gets at least 5 \
                       candies. Emma will be happy if Daphne is happy or if she gets at least 6 \
                       candies. Fox will be happy if Daphne is happy or if Emma is happy or if \
                       he gets at least 10 candies. Yasmin will be happy if Emma is happy or if \
                       Fox is happy or if she gets at least 1 candies. After distributing the \
                       candies, Xinyu gets 6, Ara gets 7, Becca gets 5, Celine gets 1, Daphne \
                       gets 3, Emma gets 4, Fox gets 9, and Yasmin gets 8.";
        assert_eq!(
            exemplars[0].question,
            format!("{context} Is Becca happy? Be as concise as possible.")
        );
        assert_eq!(
            exemplars[1].question,
            format!(
                "{context} Now, suppose that Xinyu is not happy regardless of the candy \
                 distribution. Is Becca happy? Be as concise as possible."
            )
        );
        assert!(exemplars[0].answer.starts_with("Since Xinyu gets 6 candies"));
        assert!(exemplars[0].answer.ends_with("Therefore, yes, Becca is happy!"));
        assert!(exemplars[1].answer.ends_with("Therefore, no, Becca is not happy!"));
    }

    #[test]
    fn fixtures_resolve_by_name() {
        for name in FIXTURE_NAMES {
            let task = fixture_by_name(name, 3).unwrap();
            assert_eq!(task.id(), format!("{name}-s3"));
            assert_eq!(task.seed(), 3);
        }
        assert!(matches!(
            fixture_by_name("nonesuch", 0),
            Err(TaskError::Config(_))
        ));
    }

    #[test]
    fn noise_policies_have_the_pinned_shapes() {
        match mediator_noise_policy() {
            FlipPolicy::MediatorThreshold { min_mediators, flip } => {
                assert_eq!(min_mediators, 2);
                assert!((flip - 0.15).abs() < TOL);
            }
            other => panic!("unexpected policy {other:?}"),
        }
        match distance_noise_policy() {
            FlipPolicy::PerMediator { per, cap } => {
                assert!((per - 0.05).abs() < TOL);
                assert!((cap - 0.45).abs() < TOL);
            }
            other => panic!("unexpected policy {other:?}"),
        }
    }
}
