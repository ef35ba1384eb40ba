//! Personalized ranking along a cascading behavior graph.
//!
//! For each behavior in chain order the score pair `(r_U, r_I)` is refined
//! by power iteration:
//!
//! ```text
//! r_U <- gamma * F * r_I' + alpha * q_U + beta * r_U_prev
//! r_I <- gamma * B * r_U' + alpha * q_I + beta * r_I_prev
//! ```
//!
//! where both updates read the previous iterate pair (a Jacobi sweep), `F`
//! and `B` are the behavior's normalized forward/backward operators, `q` is
//! the behavior's query pair, and `r_prev` is the converged pair of the
//! previous behavior (the first behavior uses its own query pair). The
//! iteration stops when the summed L1 residual
//! `||r_U - r_U'||_1 + ||r_I - r_I'||_1` drops to `epsilon` or after
//! `max_iters` sweeps.

use crate::error::{Error, Result};
use crate::graph::{CascadingGraph, NormalizedGraph, Scheme};

/// Ranking hyperparameters.
///
/// `alpha` weights query fitting, `beta` weights alignment with the previous
/// behavior's scores, and the derived `gamma = 1 - alpha - beta` weights
/// neighborhood smoothing. Valid configurations satisfy
/// `alpha, beta in [0, 1]` and `alpha + beta in (0, 1]`, so `gamma in [0, 1)`
/// and the per-behavior fixed point exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankParams {
    pub alpha: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub epsilon: f64,
    pub scheme: Scheme,
}

/// Iteration cap when none is configured.
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Convergence threshold when none is configured.
pub const DEFAULT_EPSILON: f64 = 1e-5;

impl RankParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = RankParams {
            alpha,
            beta,
            max_iters: DEFAULT_MAX_ITERS,
            epsilon: DEFAULT_EPSILON,
            scheme: Scheme::Symmetric,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_iteration(mut self, max_iters: usize, epsilon: f64) -> Result<Self> {
        self.max_iters = max_iters;
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Smoothing strength `1 - alpha - beta`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha - self.beta
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        let sum = self.alpha + self.beta;
        if sum <= 0.0 {
            return Err(Error::Config("alpha + beta must be positive".into()));
        }
        if sum > 1.0 {
            return Err(Error::Config(format!("alpha + beta = {sum} exceeds 1")));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return Err(Error::Config(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

/// Query pair for one behavior and one querying user.
///
/// `users` is the indicator of the querying user. `items` spreads unit mass
/// uniformly over the user's interaction history under the behavior, and is
/// all-zero when that history is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVectors {
    pub users: Vec<f64>,
    pub items: Vec<f64>,
}

/// Build the query pair for behavior `b` of the chain and user `q`.
pub fn build_query_vectors(cg: &CascadingGraph, b: &str, q: u32) -> Result<QueryVectors> {
    let pos = cg
        .position(b)
        .ok_or_else(|| Error::MissingBehavior(b.to_owned()))?;
    if (q as usize) >= cg.num_users() {
        return Err(Error::Config(format!(
            "query user index {q} outside [0, {})",
            cg.num_users()
        )));
    }
    Ok(query_vectors_at(cg, pos, q))
}

fn query_vectors_at(cg: &CascadingGraph, pos: usize, q: u32) -> QueryVectors {
    let mut users = vec![0.0; cg.num_users()];
    users[q as usize] = 1.0;
    let mut items = vec![0.0; cg.num_items()];
    let history = cg.graph(pos).user_neighbors(q);
    if !history.is_empty() {
        let mass = 1.0 / history.len() as f64;
        for &i in history {
            items[i as usize] = mass;
        }
    }
    QueryVectors { users, items }
}

/// Converged score pair for one behavior of the chain.
#[derive(Debug, Clone)]
pub struct BehaviorScores {
    pub behavior: String,
    pub users: Vec<f64>,
    pub items: Vec<f64>,
    /// Sweeps performed before stopping.
    pub iterations: usize,
    /// Summed L1 residual at the stopping sweep (0 for direct solves).
    pub residual: f64,
}

/// Scores for every behavior in chain order.
#[derive(Debug, Clone)]
pub struct RankingResult {
    pub per_behavior: Vec<BehaviorScores>,
}

impl RankingResult {
    /// Item scores on the target (last) behavior.
    pub fn target_scores(&self) -> &[f64] {
        &self.per_behavior.last().unwrap().items
    }

    pub fn target_user_scores(&self) -> &[f64] {
        &self.per_behavior.last().unwrap().users
    }
}

fn check_rank_inputs(cg: &CascadingGraph, q: u32, p: &RankParams) -> Result<()> {
    p.validate()?;
    if p.scheme != cg.scheme() {
        return Err(Error::Config(format!(
            "params use scheme '{}' but the graph was normalized with '{}'",
            p.scheme.as_str(),
            cg.scheme().as_str()
        )));
    }
    if (q as usize) >= cg.num_users() {
        return Err(Error::Config(format!(
            "query user index {q} outside [0, {})",
            cg.num_users()
        )));
    }
    Ok(())
}

struct SweepState {
    r_users: Vec<f64>,
    r_items: Vec<f64>,
    iterations: usize,
    residual: f64,
}

// One behavior's power iteration. `observe` sees each new pair after the
// residual is computed and before the primed iterates advance.
fn power_iterate(
    ng: &NormalizedGraph,
    query: &QueryVectors,
    prev_users: &[f64],
    prev_items: &[f64],
    p: &RankParams,
    mut observe: impl FnMut(&[f64], &[f64], f64),
) -> SweepState {
    let gamma = p.gamma();
    let (alpha, beta) = (p.alpha, p.beta);
    let nu = query.users.len();
    let ni = query.items.len();

    let mut users_primed = query.users.clone();
    let mut items_primed = query.items.clone();
    let mut users = vec![0.0; nu];
    let mut items = vec![0.0; ni];

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..p.max_iters {
        iterations += 1;
        ng.forward().matvec_into(&items_primed, &mut users);
        for u in 0..nu {
            users[u] = gamma * users[u] + alpha * query.users[u] + beta * prev_users[u];
        }
        ng.backward().matvec_into(&users_primed, &mut items);
        for i in 0..ni {
            items[i] = gamma * items[i] + alpha * query.items[i] + beta * prev_items[i];
        }

        residual = l1_diff(&users, &users_primed) + l1_diff(&items, &items_primed);
        observe(&users, &items, residual);
        if residual <= p.epsilon {
            break;
        }
        users_primed.copy_from_slice(&users);
        items_primed.copy_from_slice(&items);
    }

    SweepState {
        r_users: users,
        r_items: items,
        iterations,
        residual,
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Compute ranking scores for user `q` along the chain.
///
/// Pure over immutable inputs: concurrent calls over the same graph are
/// safe, and identical inputs produce identical outputs.
pub fn rank(cg: &CascadingGraph, q: u32, p: &RankParams) -> Result<RankingResult> {
    check_rank_inputs(cg, q, p)?;

    let first = query_vectors_at(cg, 0, q);
    let mut prev_users = first.users;
    let mut prev_items = first.items;

    let mut per_behavior = Vec::with_capacity(cg.len());
    for pos in 0..cg.len() {
        let query = query_vectors_at(cg, pos, q);
        let state = power_iterate(
            cg.normalized(pos),
            &query,
            &prev_users,
            &prev_items,
            p,
            |_, _, _| {},
        );
        prev_users = state.r_users.clone();
        prev_items = state.r_items.clone();
        per_behavior.push(BehaviorScores {
            behavior: cg.sequence()[pos].clone(),
            users: state.r_users,
            items: state.r_items,
            iterations: state.iterations,
            residual: state.residual,
        });
    }
    Ok(RankingResult { per_behavior })
}

/// Regularization terms of the ranking objective at a score pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ObjectiveParts {
    pub smoothness: f64,
    pub query_fit: f64,
    pub cascade_fit: f64,
    pub total: f64,
}

/// Evaluate the per-behavior objective
/// `r^T (I - A) r + theta * ||r - q||^2 + omega * ||r - r_prev||^2`
/// with `theta = alpha / gamma` and `omega = beta / gamma`, where `A` is the
/// block operator pairing the behavior's forward and backward matrices and
/// `r` stacks `(r_users, r_items)`.
///
/// The quadratic form is accumulated edge-wise:
/// `||r||^2 - r_U^T F r_I - r_I^T B r_U`. Fails with a configuration error
/// when `gamma = 0`, where `theta` and `omega` are undefined.
#[allow(clippy::too_many_arguments)]
pub fn objective_value(
    cg: &CascadingGraph,
    b: &str,
    r_users: &[f64],
    r_items: &[f64],
    query: &QueryVectors,
    prev_users: &[f64],
    prev_items: &[f64],
    p: &RankParams,
) -> Result<ObjectiveParts> {
    let pos = cg
        .position(b)
        .ok_or_else(|| Error::MissingBehavior(b.to_owned()))?;
    if r_users.len() != cg.num_users() || r_items.len() != cg.num_items() {
        return Err(Error::DimensionMismatch(format!(
            "score pair ({}, {}) does not match graph ({}, {})",
            r_users.len(),
            r_items.len(),
            cg.num_users(),
            cg.num_items()
        )));
    }
    objective_parts(cg.normalized(pos), r_users, r_items, query, prev_users, prev_items, p)
}

fn objective_parts(
    ng: &NormalizedGraph,
    r_users: &[f64],
    r_items: &[f64],
    query: &QueryVectors,
    prev_users: &[f64],
    prev_items: &[f64],
    p: &RankParams,
) -> Result<ObjectiveParts> {
    let gamma = p.gamma();
    if gamma == 0.0 {
        return Err(Error::Config(
            "objective weights theta and omega are undefined at alpha + beta = 1 (gamma = 0)"
                .into(),
        ));
    }
    let theta = p.alpha / gamma;
    let omega = p.beta / gamma;

    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut cross = 0.0;
    for (u, ru) in r_users.iter().enumerate() {
        for (i, w) in ng.forward().row(u) {
            cross += w * ru * r_items[i as usize];
        }
    }
    for (i, ri) in r_items.iter().enumerate() {
        for (u, w) in ng.backward().row(i) {
            cross += w * ri * r_users[u as usize];
        }
    }
    let smoothness = sq(r_users) + sq(r_items) - cross;

    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let query_fit = theta * (dist2(r_users, &query.users) + dist2(r_items, &query.items));
    let cascade_fit = omega * (dist2(r_users, prev_users) + dist2(r_items, prev_items));

    Ok(ObjectiveParts {
        smoothness,
        query_fit,
        cascade_fit,
        total: smoothness + query_fit + cascade_fit,
    })
}

/// Per-sweep record captured by [`rank_with_trajectory`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    /// `None` when `gamma = 0` (objective weights undefined).
    pub objective: Option<ObjectiveParts>,
}

/// One behavior's convergence trajectory.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BehaviorTrajectory {
    pub behavior: String,
    pub records: Vec<IterationRecord>,
}

/// [`rank`] plus per-iteration residual and objective values per behavior.
pub fn rank_with_trajectory(
    cg: &CascadingGraph,
    q: u32,
    p: &RankParams,
) -> Result<(RankingResult, Vec<BehaviorTrajectory>)> {
    check_rank_inputs(cg, q, p)?;

    let first = query_vectors_at(cg, 0, q);
    let mut prev_users = first.users;
    let mut prev_items = first.items;

    let mut per_behavior = Vec::with_capacity(cg.len());
    let mut trajectories = Vec::with_capacity(cg.len());
    for pos in 0..cg.len() {
        let query = query_vectors_at(cg, pos, q);
        let mut records = Vec::new();
        let ng = cg.normalized(pos);
        let state = {
            let (pu, pi) = (&prev_users, &prev_items);
            power_iterate(ng, &query, pu, pi, p, |users, items, residual| {
                let objective =
                    objective_parts(ng, users, items, &query, pu, pi, p).ok();
                records.push(IterationRecord {
                    iteration: records.len() + 1,
                    residual,
                    objective,
                });
            })
        };
        prev_users = state.r_users.clone();
        prev_items = state.r_items.clone();
        trajectories.push(BehaviorTrajectory {
            behavior: cg.sequence()[pos].clone(),
            records,
        });
        per_behavior.push(BehaviorScores {
            behavior: cg.sequence()[pos].clone(),
            users: state.r_users,
            items: state.r_items,
            iterations: state.iterations,
            residual: state.residual,
        });
    }
    Ok((RankingResult { per_behavior }, trajectories))
}
