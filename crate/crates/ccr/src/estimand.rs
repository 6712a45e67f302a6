//! Probabilities of causation and their composition rules.
//!
//! For a binary cause→effect pair the three central quantities are:
//!
//! - **PNS** (necessity *and* sufficiency): `P(Y_{x=1}=1, Y_{x=0}=0)` — the
//!   probability that the effect responds to the cause. Under monotonicity
//!   it is identified as the interventional contrast
//!   `P(y | do(x)) − P(y | do(x'))`, which is also the ATE of a binary pair.
//! - **PN** (necessity): `P(Y_{x=0}=0 | X=1, Y=1)`, identified under
//!   monotonicity and exogeneity as `(P(y) − P(y|do(x'))) / P(x, y)`.
//! - **PS** (sufficiency): `P(Y_{x=1}=1 | X=0, Y=0)`, identified as
//!   `(P(y|do(x)) − P(y)) / P(x', y')`.
//!
//! Across a cut point the pair quantities compose:
//!
//! - PNS multiplies: the effect responds to the root cause iff every link
//!   responds ([`compose_product`]).
//! - PN and PS compose through their reciprocals
//!   ([`compose_pn_chain`], [`compose_ps_chain`]); the naive product is
//!   *wrong* for PN/PS, which is easy to verify against brute-force
//!   enumeration and is the reason these rules exist.
//!
//! The linear-Gaussian analogue lives here too: total effects by path
//! tracing ([`linear_ate_paths`]) and by least squares on samples
//! ([`linear_ate_regress`]), where the regression needs a correct
//! adjustment set to be unbiased.

use thiserror::Error;

use crate::graph::NodeIdx;
use crate::scm::{LinearScm, NumericBatch};

#[derive(Debug, Error)]
pub enum EstimandError {
    #[error("{what} is zero; the estimand is undefined")]
    ZeroDenominator { what: &'static str },
    #[error("{what} = {value} outside the valid range {range}")]
    OutOfRange { what: &'static str, value: f64, range: &'static str },
    #[error("regression design matrix is singular")]
    SingularDesign,
}

// ── Point estimands ─────────────────────────────────────────────────────────

/// A PNS value with a record of whether it was clamped into `[0, 1]`.
///
/// Exact computations never clamp; noisy estimates of a near-zero PNS can
/// land slightly outside the unit interval, and the flag keeps that visible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnsPoint {
    pub value: f64,
    pub clamped: bool,
}

/// PNS from the two interventional arms (monotone identification).
pub fn pns_point(p_do1: f64, p_do0: f64) -> PnsPoint {
    let raw = p_do1 - p_do0;
    let value = raw.clamp(0.0, 1.0);
    PnsPoint { value, clamped: value != raw }
}

/// Average treatment effect of a binary pair: the raw interventional
/// contrast, unclamped.
pub fn ate_binary(p_do1: f64, p_do0: f64) -> f64 {
    p_do1 - p_do0
}

/// PN from observational and interventional quantities:
/// `(P(y) − P(y|do(x'))) / P(x, y)`.
pub fn pn_point(p_y: f64, p_y_do0: f64, p_xy: f64) -> Result<f64, EstimandError> {
    if p_xy <= 0.0 {
        return Err(EstimandError::ZeroDenominator { what: "P(x, y)" });
    }
    Ok((p_y - p_y_do0) / p_xy)
}

/// PS from observational and interventional quantities:
/// `(P(y|do(x)) − P(y)) / P(x', y')`.
pub fn ps_point(p_y_do1: f64, p_y: f64, p_nx_ny: f64) -> Result<f64, EstimandError> {
    if p_nx_ny <= 0.0 {
        return Err(EstimandError::ZeroDenominator { what: "P(x', y')" });
    }
    Ok((p_y_do1 - p_y) / p_nx_ny)
}

// ── Composition ─────────────────────────────────────────────────────────────

/// Compose PNS (or any multiplicative quantity) along a path.
pub fn compose_product(parts: &[f64]) -> f64 {
    parts.iter().product()
}

/// Recover one local factor from the global value and the other factors
/// along a path: `global / Π others`.
pub fn deduce_local(global: f64, others: &[f64]) -> Result<f64, EstimandError> {
    let denom = compose_product(others);
    if denom == 0.0 {
        return Err(EstimandError::ZeroDenominator { what: "product of sibling factors" });
    }
    Ok(global / denom)
}

fn check_unit_open(what: &'static str, value: f64) -> Result<(), EstimandError> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(EstimandError::OutOfRange { what, value, range: "(0, 1]" });
    }
    Ok(())
}

/// PN of a two-link chain from the link quantities:
///
/// ```text
/// 1/PN_XZ = (1/PN_XY)(1/PN_YZ) + (1/PS_XY − 1)(1/PN_YZ − 1)
/// ```
///
/// Both links must be monotone with the mediator a cut point, so their
/// response types are independent. Note the first link contributes its PS
/// as well — PN alone does not compose.
pub fn compose_pn_chain(pn_xy: f64, ps_xy: f64, pn_yz: f64) -> Result<f64, EstimandError> {
    check_unit_open("PN of the first link", pn_xy)?;
    check_unit_open("PS of the first link", ps_xy)?;
    check_unit_open("PN of the second link", pn_yz)?;
    let inv = (1.0 / pn_xy) * (1.0 / pn_yz) + (1.0 / ps_xy - 1.0) * (1.0 / pn_yz - 1.0);
    Ok(1.0 / inv)
}

/// PS of a two-link chain; the mirror image of [`compose_pn_chain`]:
///
/// ```text
/// 1/PS_XZ = (1/PS_XY)(1/PS_YZ) + (1/PN_XY − 1)(1/PS_YZ − 1)
/// ```
pub fn compose_ps_chain(ps_xy: f64, pn_xy: f64, ps_yz: f64) -> Result<f64, EstimandError> {
    check_unit_open("PS of the first link", ps_xy)?;
    check_unit_open("PN of the first link", pn_xy)?;
    check_unit_open("PS of the second link", ps_yz)?;
    let inv = (1.0 / ps_xy) * (1.0 / ps_yz) + (1.0 / pn_xy - 1.0) * (1.0 / ps_yz - 1.0);
    Ok(1.0 / inv)
}

// ── Linear total effects ────────────────────────────────────────────────────

/// Total effect of `cause` on `effect` in a linear SCM: the sum over all
/// directed paths of the product of edge coefficients.
pub fn linear_ate_paths(scm: &LinearScm, cause: NodeIdx, effect: NodeIdx) -> f64 {
    // One topological sweep: te[v] = Σ_parents te[p]·coef(p→v), te[cause]=1.
    let dag = scm.dag();
    let mut te = vec![0.0f64; dag.len()];
    te[cause] = 1.0;
    for &v in dag.topo_order() {
        if v == cause {
            continue;
        }
        let mut total = 0.0;
        for &p in dag.parents(v) {
            if te[p] != 0.0 {
                total += te[p] * scm.coef(p, v).expect("parent edge has coefficient");
            }
        }
        te[v] = total;
    }
    te[effect]
}

/// OLS total-effect estimate: regress `effect` on `cause` plus the
/// adjustment set (with intercept) and report the coefficient on `cause`.
///
/// With a valid back-door adjustment set this is consistent for the total
/// effect; with an invalid one it converges to a biased value — that
/// contrast is exactly what the linear fixtures demonstrate.
pub fn linear_ate_regress(
    batch: &NumericBatch,
    cause: NodeIdx,
    effect: NodeIdx,
    adjust: &[NodeIdx],
) -> Result<f64, EstimandError> {
    let n = batch.len();
    let k = 2 + adjust.len();
    if n < k {
        return Err(EstimandError::SingularDesign);
    }
    // Design columns: intercept, cause, adjust…
    let mut cols: Vec<&[f64]> = Vec::with_capacity(k - 1);
    cols.push(batch.column(cause));
    for &a in adjust {
        cols.push(batch.column(a));
    }
    let y = batch.column(effect);

    // Normal equations over the (k × k) Gram matrix.
    let mut gram = vec![vec![0.0f64; k]; k];
    let mut rhs = vec![0.0f64; k];
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let sum = |a: &[f64]| -> f64 { a.iter().sum() };
    gram[0][0] = n as f64;
    for (i, ci) in cols.iter().enumerate() {
        gram[0][i + 1] = sum(ci);
        gram[i + 1][0] = gram[0][i + 1];
        for (j, cj) in cols.iter().enumerate().skip(i) {
            gram[i + 1][j + 1] = dot(ci, cj);
            gram[j + 1][i + 1] = gram[i + 1][j + 1];
        }
    }
    rhs[0] = sum(y);
    for (i, ci) in cols.iter().enumerate() {
        rhs[i + 1] = dot(ci, y);
    }

    let beta = solve_linear(gram, rhs)?;
    Ok(beta[1])
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, EstimandError> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-12 {
            return Err(EstimandError::SingularDesign);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..k {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; k];
    for row in (0..k).rev() {
        let mut acc = b[row];
        for c in (row + 1)..k {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

// ── Tests ───────────────────────────────────────────────────────────────────
