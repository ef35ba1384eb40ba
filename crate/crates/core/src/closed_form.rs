//! Dense closed-form solver and cascading-effect expansion.
//!
//! These paths solve the per-behavior linear system
//! `(I - gamma * A_b) r_b = alpha * q_b + beta * r_prev` directly by dense
//! factorization, where `A_b` is the 2x2 block operator pairing the
//! behavior's forward and backward matrices. They are verification oracles
//! for the power iteration, not production paths, and refuse graphs above a
//! configurable node cap.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::CascadingGraph;
use crate::ranker::{build_query_vectors, BehaviorScores, RankParams, RankingResult};

/// Node cap for dense solves; cubic factorizations stay sub-second below it.
pub const DEFAULT_DENSE_CAP: usize = 2000;

fn check_cap(cg: &CascadingGraph, cap: usize) -> Result<usize> {
    let n = cg.num_users() + cg.num_items();
    if n > cap {
        return Err(Error::DenseCapExceeded { nodes: n, cap });
    }
    Ok(n)
}

// Dense `I - gamma * [[0, F], [B, 0]]` for one behavior.
fn system_matrix(cg: &CascadingGraph, pos: usize, gamma: f64) -> DMatrix<f64> {
    let nu = cg.num_users();
    let ni = cg.num_items();
    let n = nu + ni;
    let ng = cg.normalized(pos);
    let mut m = DMatrix::<f64>::identity(n, n);
    for u in 0..nu {
        for (i, w) in ng.forward().row(u) {
            m[(u, nu + i as usize)] = -gamma * w;
        }
    }
    for i in 0..ni {
        for (u, w) in ng.backward().row(i) {
            m[(nu + i, u as usize)] = -gamma * w;
        }
    }
    m
}

fn stacked_query(cg: &CascadingGraph, pos: usize, q: u32) -> Result<DVector<f64>> {
    let qv = build_query_vectors(cg, &cg.sequence()[pos], q)?;
    let mut v = DVector::<f64>::zeros(cg.num_users() + cg.num_items());
    v.as_mut_slice()[..cg.num_users()].copy_from_slice(&qv.users);
    v.as_mut_slice()[cg.num_users()..].copy_from_slice(&qv.items);
    Ok(v)
}

fn split_scores(cg: &CascadingGraph, v: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let nu = cg.num_users();
    (v.as_slice()[..nu].to_vec(), v.as_slice()[nu..].to_vec())
}

/// Solve the chain's score vectors exactly, behavior by behavior.
pub fn rank_closed_form(cg: &CascadingGraph, q: u32, p: &RankParams) -> Result<RankingResult> {
    rank_closed_form_with_cap(cg, q, p, DEFAULT_DENSE_CAP)
}

/// [`rank_closed_form`] with an explicit dense node cap.
pub fn rank_closed_form_with_cap(
    cg: &CascadingGraph,
    q: u32,
    p: &RankParams,
    cap: usize,
) -> Result<RankingResult> {
    p.validate()?;
    if p.scheme != cg.scheme() {
        return Err(Error::Config(format!(
            "params use scheme '{}' but the graph was normalized with '{}'",
            p.scheme.as_str(),
            cg.scheme().as_str()
        )));
    }
    check_cap(cg, cap)?;
    let gamma = p.gamma();

    let mut r_prev = stacked_query(cg, 0, q)?;
    let mut per_behavior = Vec::with_capacity(cg.len());
    for pos in 0..cg.len() {
        let rhs = p.alpha * stacked_query(cg, pos, q)? + p.beta * &r_prev;
        let lu = system_matrix(cg, pos, gamma).lu();
        let r = lu.solve(&rhs).ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "singular ranking system for behavior '{}'",
                cg.sequence()[pos]
            ))
        })?;
        let (users, items) = split_scores(cg, &r);
        per_behavior.push(BehaviorScores {
            behavior: cg.sequence()[pos].clone(),
            users,
            items,
            iterations: 0,
            residual: 0.0,
        });
        r_prev = r;
    }
    Ok(RankingResult { per_behavior })
}

/// One term of the cascading-effect expansion of the target-behavior scores.
#[derive(Debug, Clone)]
pub struct ExpansionTerm {
    /// Power of `beta` weighting this term.
    pub power: usize,
    /// `beta^power`.
    pub weight: f64,
    /// Chain-propagated vector the weight multiplies: the composed inverse
    /// systems applied to `alpha * q` (query terms) or to the initial score
    /// vector `q_{b_1}` (the trailing term). Stacked users then items.
    pub basis: Vec<f64>,
    /// `weight * basis`, element-wise.
    pub contribution: Vec<f64>,
}

/// Target-behavior scores decomposed into geometrically decaying terms,
/// one per behavior of the chain plus the initial-vector remainder.
#[derive(Debug, Clone)]
pub struct CascadeExpansion {
    /// Query terms for i = 0..t-1 (most recent behavior first), followed by
    /// the initial-score term with power t.
    pub terms: Vec<ExpansionTerm>,
    /// Sum over all contributions; equals the closed-form target scores.
    pub total: Vec<f64>,
    num_users: usize,
}

impl CascadeExpansion {
    pub fn total_user_scores(&self) -> &[f64] {
        &self.total[..self.num_users]
    }

    pub fn total_item_scores(&self) -> &[f64] {
        &self.total[self.num_users..]
    }
}

/// Expand the target-behavior score vector as
/// `sum_i beta^i * Linv(b_t .. b_{t-i}) * (alpha * q_{b_{t-i}}) + beta^t *
/// Linv(b_t .. b_1) * q_{b_1}`, where `Linv(b_j .. b_i)` composes the
/// per-behavior inverse systems from position i up the chain to j.
pub fn cascading_expansion(
    cg: &CascadingGraph,
    q: u32,
    p: &RankParams,
) -> Result<CascadeExpansion> {
    cascading_expansion_with_cap(cg, q, p, DEFAULT_DENSE_CAP)
}

/// [`cascading_expansion`] with an explicit dense node cap.
pub fn cascading_expansion_with_cap(
    cg: &CascadingGraph,
    q: u32,
    p: &RankParams,
    cap: usize,
) -> Result<CascadeExpansion> {
    p.validate()?;
    if p.scheme != cg.scheme() {
        return Err(Error::Config(format!(
            "params use scheme '{}' but the graph was normalized with '{}'",
            p.scheme.as_str(),
            cg.scheme().as_str()
        )));
    }
    let n = check_cap(cg, cap)?;
    let gamma = p.gamma();
    let t = cg.len();

    let factorizations: Vec<_> = (0..t)
        .map(|pos| system_matrix(cg, pos, gamma).lu())
        .collect();
    let solve_chain = |from: usize, mut v: DVector<f64>| -> Result<DVector<f64>> {
        for lu in &factorizations[from..] {
            v = lu.solve(&v).ok_or_else(|| {
                Error::DimensionMismatch("singular ranking system in expansion".into())
            })?;
        }
        Ok(v)
    };

    let mut terms = Vec::with_capacity(t + 1);
    let mut total = DVector::<f64>::zeros(n);
    for i in 0..t {
        let from = t - 1 - i;
        let basis = solve_chain(from, p.alpha * stacked_query(cg, from, q)?)?;
        let weight = p.beta.powi(i as i32);
        let contribution = weight * &basis;
        total += &contribution;
        terms.push(ExpansionTerm {
            power: i,
            weight,
            basis: basis.as_slice().to_vec(),
            contribution: contribution.as_slice().to_vec(),
        });
    }
    let basis = solve_chain(0, stacked_query(cg, 0, q)?)?;
    let weight = p.beta.powi(t as i32);
    let contribution = weight * &basis;
    total += &contribution;
    terms.push(ExpansionTerm {
        power: t,
        weight,
        basis: basis.as_slice().to_vec(),
        contribution: contribution.as_slice().to_vec(),
    });

    Ok(CascadeExpansion {
        terms,
        total: total.as_slice().to_vec(),
        num_users: cg.num_users(),
    })
}
