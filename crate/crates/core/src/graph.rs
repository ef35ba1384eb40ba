//! Bipartite behavior graphs and their normalized operators.
//!
//! A [`BehaviorGraph`] stores one behavior's 0/1 bi-adjacency in both
//! row-major (by user) and column-major (by item) compressed form.
//! [`NormalizedGraph`] holds the weighted forward (`|U|x|I|`) and backward
//! (`|I|x|U|`) operators used by the rankers, and [`CascadingGraph`] chains
//! per-behavior graphs in sequence order over shared index spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::InteractionLog;

/// Edge-weight normalization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// `w(u,i) = 1 / (sqrt(d(u)) * sqrt(d(i)))`; backward is the exact transpose.
    Symmetric,
    /// Forward `w(u,i) = 1/d(i)`, backward `w(i,u) = 1/d(u)`; each nonzero
    /// column of either operator sums to 1.
    Column,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Symmetric => "sym",
            Scheme::Column => "col",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sym" | "symmetric" => Ok(Scheme::Symmetric),
            "col" | "column" => Ok(Scheme::Column),
            other => Err(Error::Config(format!(
                "unknown normalization scheme '{other}' (expected 'sym' or 'col')"
            ))),
        }
    }
}

/// Sparse real matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `out = self * x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *o = acc;
        }
    }

    /// Column sums, length `ncols`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sums[*c as usize] += v;
        }
        sums
    }

    fn from_sorted_edges(
        nrows: usize,
        ncols: usize,
        edges: impl Iterator<Item = (u32, u32, f64)>,
        counts: &[u32],
    ) -> Self {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0usize);
        for &c in counts {
            row_ptr.push(row_ptr.last().unwrap() + c as usize);
        }
        let nnz = *row_ptr.last().unwrap();
        let mut col_idx = vec![0u32; nnz];
        let mut values = vec![0.0f64; nnz];
        let mut cursor = row_ptr[..nrows].to_vec();
        for (r, c, v) in edges {
            let k = cursor[r as usize];
            col_idx[k] = c;
            values[k] = v;
            cursor[r as usize] += 1;
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// One behavior's bipartite graph with 0/1 edges and degree vectors.
#[derive(Debug, Clone)]
pub struct BehaviorGraph {
    behavior: String,
    num_users: usize,
    num_items: usize,
    // CSR by user: items of user u at item_idx[user_ptr[u]..user_ptr[u+1]]
    user_ptr: Vec<usize>,
    item_idx: Vec<u32>,
    // CSC by item: users of item i at user_idx[item_ptr[i]..item_ptr[i+1]]
    item_ptr: Vec<usize>,
    user_idx: Vec<u32>,
    user_degrees: Vec<u32>,
    item_degrees: Vec<u32>,
}

impl BehaviorGraph {
    /// Build from a unique `(user, item)` edge list. Duplicates are merged.
    pub fn from_edges(
        behavior: impl Into<String>,
        num_users: usize,
        num_items: usize,
        edges: &[(u32, u32)],
    ) -> Self {
        let mut edges: Vec<(u32, u32)> = edges.to_vec();
        edges.sort_unstable();
        edges.dedup();

        let mut user_degrees = vec![0u32; num_users];
        let mut item_degrees = vec![0u32; num_items];
        for &(u, i) in &edges {
            user_degrees[u as usize] += 1;
            item_degrees[i as usize] += 1;
        }

        let mut user_ptr = Vec::with_capacity(num_users + 1);
        user_ptr.push(0usize);
        for &d in &user_degrees {
            user_ptr.push(user_ptr.last().unwrap() + d as usize);
        }
        // edges are sorted by (u, i), so the CSR arrays fill in order
        let item_idx: Vec<u32> = edges.iter().map(|&(_, i)| i).collect();

        let mut item_ptr = Vec::with_capacity(num_items + 1);
        item_ptr.push(0usize);
        for &d in &item_degrees {
            item_ptr.push(item_ptr.last().unwrap() + d as usize);
        }
        let mut user_idx = vec![0u32; edges.len()];
        let mut cursor = item_ptr[..num_items].to_vec();
        for &(u, i) in &edges {
            user_idx[cursor[i as usize]] = u;
            cursor[i as usize] += 1;
        }

        BehaviorGraph {
            behavior: behavior.into(),
            num_users,
            num_items,
            user_ptr,
            item_idx,
            item_ptr,
            user_idx,
            user_degrees,
            item_degrees,
        }
    }

    pub fn behavior(&self) -> &str {
        &self.behavior
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn edge_count(&self) -> usize {
        self.item_idx.len()
    }

    pub fn user_degree(&self, u: u32) -> u32 {
        self.user_degrees[u as usize]
    }

    pub fn item_degree(&self, i: u32) -> u32 {
        self.item_degrees[i as usize]
    }

    pub fn user_degrees(&self) -> &[u32] {
        &self.user_degrees
    }

    pub fn item_degrees(&self) -> &[u32] {
        &self.item_degrees
    }

    /// Items interacted with by user `u`, ascending.
    pub fn user_neighbors(&self, u: u32) -> &[u32] {
        &self.item_idx[self.user_ptr[u as usize]..self.user_ptr[u as usize + 1]]
    }

    /// Users who interacted with item `i`, ascending.
    pub fn item_neighbors(&self, i: u32) -> &[u32] {
        &self.user_idx[self.item_ptr[i as usize]..self.item_ptr[i as usize + 1]]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_users as u32)
            .flat_map(move |u| self.user_neighbors(u).iter().map(move |&i| (u, i)))
    }

    /// Build the weighted forward/backward operators under `scheme`.
    ///
    /// Zero-degree rows and columns produce no entries, so no division by
    /// zero is ever evaluated and isolated nodes stay isolated.
    pub fn normalize(&self, scheme: Scheme) -> NormalizedGraph {
        let du = &self.user_degrees;
        let di = &self.item_degrees;
        let fwd_weight = |u: u32, i: u32| -> f64 {
            match scheme {
                Scheme::Symmetric => {
                    1.0 / ((du[u as usize] as f64).sqrt() * (di[i as usize] as f64).sqrt())
                }
                Scheme::Column => 1.0 / di[i as usize] as f64,
            }
        };
        let bwd_weight = |u: u32, i: u32| -> f64 {
            match scheme {
                Scheme::Symmetric => fwd_weight(u, i),
                Scheme::Column => 1.0 / du[u as usize] as f64,
            }
        };

        let forward = CsrMatrix::from_sorted_edges(
            self.num_users,
            self.num_items,
            self.edges().map(|(u, i)| (u, i, fwd_weight(u, i))),
            &self.user_degrees,
        );
        let backward = CsrMatrix::from_sorted_edges(
            self.num_items,
            self.num_users,
            (0..self.num_items as u32).flat_map(|i| {
                self.item_neighbors(i)
                    .iter()
                    .map(move |&u| (i, u, bwd_weight(u, i)))
            }),
            &self.item_degrees,
        );

        NormalizedGraph {
            behavior: self.behavior.clone(),
            scheme,
            forward,
            backward,
        }
    }
}

/// Build one behavior's bipartite graph from the log.
pub fn build_behavior_graph(log: &InteractionLog, behavior: &str) -> Result<BehaviorGraph> {
    let b = log
        .behavior_id(behavior)
        .ok_or_else(|| Error::MissingBehavior(behavior.to_owned()))?;
    let edges: Vec<(u32, u32)> = log
        .records()
        .iter()
        .filter(|r| r.behavior == b)
        .map(|r| (r.user, r.item))
        .collect();
    Ok(BehaviorGraph::from_edges(
        behavior,
        log.num_users(),
        log.num_items(),
        &edges,
    ))
}

/// Normalized forward/backward operators for one behavior.
#[derive(Debug, Clone)]
pub struct NormalizedGraph {
    behavior: String,
    scheme: Scheme,
    forward: CsrMatrix,
    backward: CsrMatrix,
}

impl NormalizedGraph {
    pub fn behavior(&self) -> &str {
        &self.behavior
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `|U| x |I|` operator aggregating item scores into user scores.
    pub fn forward(&self) -> &CsrMatrix {
        &self.forward
    }

    /// `|I| x |U|` operator aggregating user scores into item scores.
    pub fn backward(&self) -> &CsrMatrix {
        &self.backward
    }
}

/// Ordered chain of behavior graphs over shared user/item index spaces.
///
/// The chain's inter-behavior links are an ordering contract: the ranker
/// consumes scores in sequence order, so no cross-behavior edges are
/// materialized.
#[derive(Debug, Clone)]
pub struct CascadingGraph {
    sequence: Vec<String>,
    graphs: Vec<BehaviorGraph>,
    normalized: Vec<NormalizedGraph>,
    num_users: usize,
    num_items: usize,
    scheme: Scheme,
}

impl CascadingGraph {
    /// Build per-behavior graphs and normalized operators for `sequence`.
    /// The last sequence element is the target behavior.
    pub fn build(log: &InteractionLog, sequence: &[String], scheme: Scheme) -> Result<Self> {
        if sequence.is_empty() {
            return Err(Error::Config("behavior sequence is empty".into()));
        }
        for (i, label) in sequence.iter().enumerate() {
            if sequence[..i].contains(label) {
                return Err(Error::DuplicateBehavior(label.clone()));
            }
        }
        let mut graphs = Vec::with_capacity(sequence.len());
        for label in sequence {
            graphs.push(build_behavior_graph(log, label)?);
        }
        let normalized = graphs.iter().map(|g| g.normalize(scheme)).collect();
        Ok(CascadingGraph {
            sequence: sequence.to_vec(),
            graphs,
            normalized,
            num_users: log.num_users(),
            num_items: log.num_items(),
            scheme,
        })
    }

    /// Assemble a chain from pre-built edge lists sharing index spaces.
    pub fn from_edge_lists(
        num_users: usize,
        num_items: usize,
        behaviors: &[(String, Vec<(u32, u32)>)],
        scheme: Scheme,
    ) -> Result<Self> {
        if behaviors.is_empty() {
            return Err(Error::Config("behavior sequence is empty".into()));
        }
        for (i, (label, _)) in behaviors.iter().enumerate() {
            if behaviors[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateBehavior(label.clone()));
            }
        }
        let graphs: Vec<BehaviorGraph> = behaviors
            .iter()
            .map(|(label, edges)| BehaviorGraph::from_edges(label.clone(), num_users, num_items, edges))
            .collect();
        let normalized = graphs.iter().map(|g| g.normalize(scheme)).collect();
        Ok(CascadingGraph {
            sequence: behaviors.iter().map(|(l, _)| l.clone()).collect(),
            graphs,
            normalized,
            num_users,
            num_items,
            scheme,
        })
    }

    pub fn sequence(&self) -> &[String] {
        &self.sequence
    }

    pub fn target(&self) -> &str {
        self.sequence.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn graph(&self, pos: usize) -> &BehaviorGraph {
        &self.graphs[pos]
    }

    pub fn normalized(&self, pos: usize) -> &NormalizedGraph {
        &self.normalized[pos]
    }

    pub fn position(&self, behavior: &str) -> Option<usize> {
        self.sequence.iter().position(|b| b == behavior)
    }

    /// Total interaction count across the chain.
    pub fn total_edges(&self) -> usize {
        self.graphs.iter().map(|g| g.edge_count()).sum()
    }
}
