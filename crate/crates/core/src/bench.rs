//! Scalability benchmarking.
//!
//! Measures ranking wall-clock against interaction count by slicing a log
//! down to principal submatrices: one seeded permutation of the user and
//! item index spaces is shared across all behaviors, and each fraction
//! keeps the upper-left block at that row/column ratio. A least-squares
//! line over (edges, seconds) quantifies how close the measured cost is to
//! linear in the number of interactions.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{CascadingGraph, Scheme};
use crate::ingest::InteractionLog;
use crate::ranker::{rank, RankParams};

/// One measured grid point.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BenchPoint {
    pub fraction: f64,
    /// Total interactions across the sliced chain.
    pub edges: usize,
    /// Wall-clock for the fixed query batch.
    pub seconds: f64,
}

/// Measurements plus the least-squares line over (edges, seconds).
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares fit `y = intercept + slope * x` with R^2.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r_squared)
}

/// Uniform random multi-behavior log for synthetic benchmarks. Duplicate
/// draws collapse during dedup, so realized counts can fall slightly below
/// the requested ones.
pub fn synthetic_log(
    num_users: usize,
    num_items: usize,
    edges_per_behavior: &[(String, usize)],
    seed: u64,
) -> Result<InteractionLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user_tokens: Vec<String> = (0..num_users).map(|u| format!("u{u}")).collect();
    let item_tokens: Vec<String> = (0..num_items).map(|i| format!("i{i}")).collect();
    let behaviors: Vec<String> = edges_per_behavior.iter().map(|(l, _)| l.clone()).collect();
    let mut raw = Vec::new();
    let mut ts = 0i64;
    for (b, (_, count)) in edges_per_behavior.iter().enumerate() {
        for _ in 0..*count {
            raw.push((
                rng.random_range(0..num_users) as u32,
                rng.random_range(0..num_items) as u32,
                b as u32,
                ts,
            ));
            ts += 1;
        }
    }
    InteractionLog::from_parts(user_tokens, item_tokens, behaviors, raw)
}

// Sliced chain at `fraction`, under one shared index permutation.
fn slice_chain(
    log: &InteractionLog,
    sequence: &[String],
    scheme: Scheme,
    user_perm: &[u32],
    item_perm: &[u32],
    fraction: f64,
) -> Result<(CascadingGraph, usize)> {
    let ku = ((log.num_users() as f64 * fraction).ceil() as usize).max(1);
    let ki = ((log.num_items() as f64 * fraction).ceil() as usize).max(1);
    let mut lists: Vec<(String, Vec<(u32, u32)>)> = sequence
        .iter()
        .map(|label| (label.clone(), Vec::new()))
        .collect();
    for r in log.records() {
        let label = &log.behaviors()[r.behavior as usize];
        if let Some(pos) = sequence.iter().position(|s| s == label) {
            let pu = user_perm[r.user as usize];
            let pi = item_perm[r.item as usize];
            if (pu as usize) < ku && (pi as usize) < ki {
                lists[pos].1.push((pu, pi));
            }
        }
    }
    let cg = CascadingGraph::from_edge_lists(ku, ki, &lists, scheme)?;
    let edges = cg.total_edges();
    Ok((cg, edges))
}

/// Time a fixed batch of [`rank`] calls at each fraction of the log.
///
/// The same random index permutation (from `seed`) is applied to every
/// behavior, and the same number of query users is ranked at every grid
/// point so that measured time varies with edge count alone. Each point is
/// timed `repeats` times and the minimum kept, since scheduling noise only
/// ever inflates a measurement.
pub fn bench_scalability(
    log: &InteractionLog,
    sequence: &[String],
    params: &RankParams,
    fractions: &[f64],
    queries_per_point: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchReport> {
    params.validate()?;
    if fractions.is_empty() {
        return Err(Error::Config("fraction grid is empty".into()));
    }
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("fraction {f} outside (0, 1]")));
        }
    }
    if queries_per_point == 0 {
        return Err(Error::Config("queries_per_point must be at least 1".into()));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut user_perm: Vec<u32> = (0..log.num_users() as u32).collect();
    let mut item_perm: Vec<u32> = (0..log.num_items() as u32).collect();
    user_perm.shuffle(&mut rng);
    item_perm.shuffle(&mut rng);

    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let (cg, edges) = slice_chain(log, sequence, params.scheme, &user_perm, &item_perm, fraction)?;
        let queries: Vec<u32> = (0..queries_per_point)
            .map(|_| rng.random_range(0..cg.num_users()) as u32)
            .collect();
        // warmup outside the timed region
        rank(&cg, queries[0], params)?;
        let mut seconds = f64::INFINITY;
        for _ in 0..repeats {
            let start = Instant::now();
            for &q in &queries {
                rank(&cg, q, params)?;
            }
            seconds = seconds.min(start.elapsed().as_secs_f64());
        }
        points.push(BenchPoint {
            fraction,
            edges,
            seconds,
        });
    }

    let xs: Vec<f64> = points.iter().map(|p| p.edges as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(BenchReport {
        points,
        slope,
        intercept,
        r_squared,
    })
}
