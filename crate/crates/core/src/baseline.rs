//! Single-graph bipartite ranking baselines.
//!
//! The shared update family
//!
//! ```text
//! r_U(u) = (1 - lambda_U) * sum_i w(i,u) r_I(i) + lambda_U * q_U(u)
//! r_I(i) = (1 - lambda_I) * sum_u w(u,i) r_U(u) + lambda_I * q_I(i)
//! ```
//!
//! covers the classic variants through its normalization and query choices:
//! symmetric weights for BiRank, column-stochastic weights both directions
//! for CoHITS, and column-stochastic weights with all restart mass on the
//! querying user (zero item query) for RWR. The iteration mirrors the
//! cascading ranker's: Jacobi sweeps from query-vector initial values with
//! the same summed L1 stopping rule.

use crate::error::{Error, Result};
use crate::graph::{build_behavior_graph, BehaviorGraph, NormalizedGraph, Scheme};
use crate::ingest::InteractionLog;
use crate::ranker::{DEFAULT_EPSILON, DEFAULT_MAX_ITERS};

/// Baseline model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BaselineVariant {
    BiRank,
    CoHits,
    Rwr,
}

impl BaselineVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "birank" => Ok(BaselineVariant::BiRank),
            "cohits" => Ok(BaselineVariant::CoHits),
            "rwr" => Ok(BaselineVariant::Rwr),
            other => Err(Error::Config(format!(
                "unknown baseline variant '{other}' (expected birank, cohits, or rwr)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineVariant::BiRank => "birank",
            BaselineVariant::CoHits => "cohits",
            BaselineVariant::Rwr => "rwr",
        }
    }

    /// Normalization fixed by the variant.
    pub fn scheme(&self) -> Scheme {
        match self {
            BaselineVariant::BiRank => Scheme::Symmetric,
            BaselineVariant::CoHits | BaselineVariant::Rwr => Scheme::Column,
        }
    }
}

/// Configuration for one baseline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub variant: BaselineVariant,
    pub lambda_users: f64,
    pub lambda_items: f64,
    pub max_iters: usize,
    pub epsilon: f64,
}

impl BaselineConfig {
    pub fn new(variant: BaselineVariant, lambda_users: f64, lambda_items: f64) -> Result<Self> {
        let c = BaselineConfig {
            variant,
            lambda_users,
            lambda_items,
            max_iters: DEFAULT_MAX_ITERS,
            epsilon: DEFAULT_EPSILON,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_iteration(mut self, max_iters: usize, epsilon: f64) -> Result<Self> {
        self.max_iters = max_iters;
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_users", self.lambda_users), ("lambda_items", self.lambda_items)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
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

/// Element-wise union of all behaviors' bi-adjacency matrices.
pub fn build_unified_graph(log: &InteractionLog) -> BehaviorGraph {
    let edges: Vec<(u32, u32)> = log.records().iter().map(|r| (r.user, r.item)).collect();
    BehaviorGraph::from_edges("unified", log.num_users(), log.num_items(), &edges)
}

/// Single-behavior alternative to the unified graph: the target behavior's
/// own bipartite graph.
pub fn build_single_behavior_graph(log: &InteractionLog, target: &str) -> Result<BehaviorGraph> {
    build_behavior_graph(log, target)
}

/// Converged baseline scores.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub users: Vec<f64>,
    pub items: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Reusable baseline ranker holding the pre-normalized operators.
pub struct BaselineRanker {
    normalized: NormalizedGraph,
    history: HistorySource,
    config: BaselineConfig,
    num_users: usize,
    num_items: usize,
}

// RWR zeroes the item query; the others spread mass over the query user's
// interaction history in the ranked graph.
enum HistorySource {
    Graph(Vec<Vec<u32>>),
    None,
}

impl BaselineRanker {
    pub fn new(graph: &BehaviorGraph, config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        let normalized = graph.normalize(config.variant.scheme());
        let history = match config.variant {
            BaselineVariant::Rwr => HistorySource::None,
            _ => HistorySource::Graph(
                (0..graph.num_users() as u32)
                    .map(|u| graph.user_neighbors(u).to_vec())
                    .collect(),
            ),
        };
        Ok(BaselineRanker {
            normalized,
            history,
            config,
            num_users: graph.num_users(),
            num_items: graph.num_items(),
        })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn rank(&self, q: u32) -> Result<BaselineResult> {
        if (q as usize) >= self.num_users {
            return Err(Error::Config(format!(
                "query user index {q} outside [0, {})",
                self.num_users
            )));
        }
        let mut q_users = vec![0.0; self.num_users];
        q_users[q as usize] = 1.0;
        let mut q_items = vec![0.0; self.num_items];
        if let HistorySource::Graph(neighbors) = &self.history {
            let history = &neighbors[q as usize];
            if !history.is_empty() {
                let mass = 1.0 / history.len() as f64;
                for &i in history {
                    q_items[i as usize] = mass;
                }
            }
        }

        let (lu, li) = (self.config.lambda_users, self.config.lambda_items);
        let mut users_primed = q_users.clone();
        let mut items_primed = q_items.clone();
        let mut users = vec![0.0; self.num_users];
        let mut items = vec![0.0; self.num_items];
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        for _ in 0..self.config.max_iters {
            iterations += 1;
            self.normalized.forward().matvec_into(&items_primed, &mut users);
            for u in 0..self.num_users {
                users[u] = (1.0 - lu) * users[u] + lu * q_users[u];
            }
            self.normalized.backward().matvec_into(&users_primed, &mut items);
            for i in 0..self.num_items {
                items[i] = (1.0 - li) * items[i] + li * q_items[i];
            }
            residual = users
                .iter()
                .zip(&users_primed)
                .chain(items.iter().zip(&items_primed))
                .map(|(a, b)| (a - b).abs())
                .sum();
            if residual <= self.config.epsilon {
                break;
            }
            users_primed.copy_from_slice(&users);
            items_primed.copy_from_slice(&items);
        }

        Ok(BaselineResult {
            users,
            items,
            iterations,
            residual,
        })
    }
}

/// Rank items on a single graph for user `q` under configuration `c`.
pub fn baseline_rank(g: &BehaviorGraph, q: u32, c: &BaselineConfig) -> Result<BaselineResult> {
    BaselineRanker::new(g, *c)?.rank(q)
}
