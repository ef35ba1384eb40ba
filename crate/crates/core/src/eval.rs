//! Leave-one-out evaluation harness.
//!
//! Splits a log into train/validation/test holdouts per user, scores every
//! test user with a pluggable [`Scorer`], and reports HR@k and NDCG@k over
//! configurable cutoffs. Also drives the hyperparameter sweep and the
//! sequence-permutation experiments.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_behavior_graph, CascadingGraph, Scheme};
use crate::ingest::InteractionLog;
use crate::ranker::{rank, RankParams};

/// Leave-one-out split of an interaction log around a target behavior.
///
/// For every user with target-behavior interactions, the latest one (by
/// timestamp, ties broken by file order) is the test item; the second-latest,
/// when it exists, is the validation item. Neither remains in `train` under
/// the target behavior. Auxiliary-behavior records are untouched.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: InteractionLog,
    pub target: String,
    /// user -> held-out test item
    pub test: BTreeMap<u32, u32>,
    /// user -> held-out validation item
    pub validation: BTreeMap<u32, u32>,
    /// Users with at least two target interactions, so both holdouts exist.
    pub eligible_users: Vec<u32>,
}

/// Split `log` around `target`, holding out the last (test) and second-last
/// (validation) target interaction per user.
pub fn leave_one_out_split(log: &InteractionLog, target: &str) -> Result<SplitResult> {
    let b = log
        .behavior_id(target)
        .ok_or_else(|| Error::MissingBehavior(target.to_owned()))?;

    // per-user target interactions ordered by (timestamp, file row)
    let mut per_user: BTreeMap<u32, Vec<(i64, u64, u32)>> = BTreeMap::new();
    for r in log.records() {
        if r.behavior == b {
            per_user
                .entry(r.user)
                .or_default()
                .push((r.timestamp, r.row, r.item));
        }
    }

    let mut test = BTreeMap::new();
    let mut validation = BTreeMap::new();
    let mut eligible_users = Vec::new();
    let mut held_out: std::collections::HashSet<(u32, u32)> = std::collections::HashSet::new();
    for (user, mut interactions) in per_user {
        interactions.sort_unstable();
        let (_, _, test_item) = *interactions.last().unwrap();
        test.insert(user, test_item);
        held_out.insert((user, test_item));
        if interactions.len() >= 2 {
            let (_, _, val_item) = interactions[interactions.len() - 2];
            validation.insert(user, val_item);
            held_out.insert((user, val_item));
            eligible_users.push(user);
        }
    }
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }

    let train = log.filter_records(|r| r.behavior != b || !held_out.contains(&(r.user, r.item)));
    Ok(SplitResult {
        train,
        target: target.to_owned(),
        test,
        validation,
        eligible_users,
    })
}

/// Which holdout the metrics are computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Holdout {
    Test,
    Validation,
}

/// Produces a full item-score vector for one querying user.
pub trait Scorer: Sync {
    fn score_items(&self, user: u32) -> Result<Vec<f64>>;
}

/// [`Scorer`] over a cascading graph built from the training log.
pub struct CascadingScorer<'a> {
    pub cg: &'a CascadingGraph,
    pub params: RankParams,
}

impl Scorer for CascadingScorer<'_> {
    fn score_items(&self, user: u32) -> Result<Vec<f64>> {
        let mut result = rank(self.cg, user, &self.params)?;
        Ok(result.per_behavior.pop().unwrap().items)
    }
}

/// [`Scorer`] over a single-graph baseline ranker.
pub struct BaselineScorer {
    pub ranker: crate::baseline::BaselineRanker,
}

impl Scorer for BaselineScorer {
    fn score_items(&self, user: u32) -> Result<Vec<f64>> {
        Ok(self.ranker.rank(user)?.items)
    }
}

/// Evaluation settings.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub k_list: Vec<usize>,
    /// Worker threads; 0 uses the global rayon pool.
    pub jobs: usize,
    pub holdout: Holdout,
    /// Keep per-user held-out ranks in the report.
    pub per_user: bool,
}

impl EvalOptions {
    pub fn new(k_list: Vec<usize>) -> Self {
        EvalOptions {
            k_list,
            jobs: 0,
            holdout: Holdout::Test,
            per_user: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() {
            return Err(Error::Config("k list is empty".into()));
        }
        if self.k_list.contains(&0) {
            return Err(Error::Config("k values must be positive".into()));
        }
        Ok(())
    }
}

/// Rank of one user's held-out item among the allowed candidates.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct UserOutcome {
    pub user: u32,
    pub held_out: u32,
    /// 1-based rank after masking training target items; descending score,
    /// ascending item index on ties.
    pub rank: usize,
}

/// Aggregated top-k quality over all evaluated users.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricsReport {
    pub hr: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub evaluated_users: usize,
    /// Not serialized: report artifacts stay byte-identical across runs of
    /// the same configuration; timings belong to the run manifest.
    #[serde(skip)]
    pub wall_clock_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_user: Option<Vec<UserOutcome>>,
}

// rank = 1 + |{allowed j : s_j > s_t}| + |{allowed j < t : s_j = s_t}|
fn held_out_rank(scores: &[f64], masked: &[u32], held_out: u32) -> usize {
    let target_score = scores[held_out as usize];
    let mut mask_iter = masked.iter().peekable();
    let mut rank = 1usize;
    for (j, &s) in scores.iter().enumerate() {
        while let Some(&&m) = mask_iter.peek() {
            if (m as usize) < j {
                mask_iter.next();
            } else {
                break;
            }
        }
        if mask_iter.peek() == Some(&&(j as u32)) {
            continue; // masked training item
        }
        if s > target_score || (s == target_score && (j as u32) < held_out) {
            rank += 1;
        }
    }
    rank
}

/// Score every held-out user and aggregate HR@k / NDCG@k.
///
/// The scorer must be built from the split's training log only. For each
/// user the items they interacted with under the target behavior in
/// training are masked out of the candidate set before ranking.
pub fn evaluate(
    scorer: &dyn Scorer,
    split: &SplitResult,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    opts.validate()?;
    let holdout_map = match opts.holdout {
        Holdout::Test => &split.test,
        Holdout::Validation => &split.validation,
    };
    if holdout_map.is_empty() {
        return Err(Error::EmptyTestSet);
    }

    let train_target = build_behavior_graph(&split.train, &split.target)?;
    let users: Vec<(u32, u32)> = holdout_map.iter().map(|(&u, &i)| (u, i)).collect();

    let start = Instant::now();
    let score_user = |&(user, held_out): &(u32, u32)| -> Result<UserOutcome> {
        let scores = scorer.score_items(user)?;
        if scores.len() != train_target.num_items() {
            return Err(Error::DimensionMismatch(format!(
                "scorer returned {} item scores for a graph with {} items",
                scores.len(),
                train_target.num_items()
            )));
        }
        let masked = train_target.user_neighbors(user);
        Ok(UserOutcome {
            user,
            held_out,
            rank: held_out_rank(&scores, masked, held_out),
        })
    };
    let outcomes: Vec<UserOutcome> = if opts.jobs == 1 {
        users.iter().map(score_user).collect::<Result<_>>()?
    } else if opts.jobs == 0 {
        users.par_iter().map(score_user).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| users.par_iter().map(score_user).collect::<Result<Vec<_>>>())?
    };
    let wall_clock_secs = start.elapsed().as_secs_f64();

    let n = outcomes.len() as f64;
    let mut hr = BTreeMap::new();
    let mut ndcg = BTreeMap::new();
    for &k in &opts.k_list {
        let mut hits = 0.0;
        let mut gain = 0.0;
        for o in &outcomes {
            if o.rank <= k {
                hits += 1.0;
                gain += 1.0 / ((o.rank as f64) + 1.0).log2();
            }
        }
        hr.insert(k, hits / n);
        ndcg.insert(k, gain / n);
    }

    Ok(MetricsReport {
        hr,
        ndcg,
        evaluated_users: outcomes.len(),
        wall_clock_secs,
        per_user: opts.per_user.then_some(outcomes),
    })
}

/// Evaluate the cascading ranker over a split.
pub fn evaluate_cascading(
    cg: &CascadingGraph,
    split: &SplitResult,
    params: &RankParams,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    evaluate(&CascadingScorer { cg, params: *params }, split, opts)
}

/// One cell of the (alpha, beta) sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub report: MetricsReport,
}

/// All valid grid cells at the given step: `alpha, beta in {0, step, .., 1}`
/// with `alpha + beta in (0, 1]`. Enumerated in integer steps so cells land
/// exactly on multiples of `step`.
pub fn sweep_grid(step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("sweep step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round() as i64;
    if n < 1 || ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("sweep step {step} does not divide 1")));
    }
    let mut cells = Vec::new();
    for a in 0..=n {
        for b in 0..=n {
            if a + b >= 1 && a + b <= n {
                cells.push((a as f64 / n as f64, b as f64 / n as f64));
            }
        }
    }
    Ok(cells)
}

/// Evaluate every valid (alpha, beta) cell of the grid.
pub fn sweep(
    cg: &CascadingGraph,
    split: &SplitResult,
    base: &RankParams,
    step: f64,
    opts: &EvalOptions,
) -> Result<Vec<SweepCell>> {
    let mut out = Vec::new();
    for (alpha, beta) in sweep_grid(step)? {
        let params = RankParams {
            alpha,
            beta,
            ..*base
        };
        params.validate()?;
        let report = evaluate_cascading(cg, split, &params, opts)?;
        out.push(SweepCell { alpha, beta, report });
    }
    Ok(out)
}

/// Best metric value achieved for each setting of one hyperparameter.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AxisMaxima {
    pub axis: &'static str,
    /// (hyperparameter value, best HR@k or NDCG@k over the other axes)
    pub points: Vec<(f64, f64)>,
}

/// Per-hyperparameter maxima over the sweep cells (curves for alpha, beta,
/// and the derived gamma), using HR at cutoff `k`.
pub fn per_hyperparameter_maxima(cells: &[SweepCell], k: usize) -> Vec<AxisMaxima> {
    let value = |c: &SweepCell| c.report.hr.get(&k).copied().unwrap_or(0.0);
    let collect = |key: &dyn Fn(&SweepCell) -> f64, axis: &'static str| {
        let mut best: BTreeMap<i64, f64> = BTreeMap::new();
        for c in cells {
            let v = key(c);
            let bucket = (v * 1e6).round() as i64;
            let m = best.entry(bucket).or_insert(f64::NEG_INFINITY);
            if value(c) > *m {
                *m = value(c);
            }
        }
        AxisMaxima {
            axis,
            points: best
                .into_iter()
                .map(|(b, m)| (b as f64 / 1e6, m))
                .collect(),
        }
    };
    vec![
        collect(&|c| c.alpha, "alpha"),
        collect(&|c| c.beta, "beta"),
        collect(&|c| 1.0 - c.alpha - c.beta, "gamma"),
    ]
}

/// Metrics for one candidate behavior sequence.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SequenceReport {
    pub sequence: Vec<String>,
    pub report: MetricsReport,
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, head) in items.iter().enumerate() {
        let mut rest: Vec<T> = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Evaluate every ordering of the auxiliary behaviors with the target fixed
/// last. Graphs are rebuilt from the training log per permutation.
pub fn permute_sequences(
    train: &InteractionLog,
    sequence: &[String],
    scheme: Scheme,
    params: &RankParams,
    split: &SplitResult,
    opts: &EvalOptions,
) -> Result<Vec<SequenceReport>> {
    if sequence.is_empty() {
        return Err(Error::Config("behavior sequence is empty".into()));
    }
    let (aux, target) = sequence.split_at(sequence.len() - 1);
    let mut out = Vec::new();
    for perm in permutations(aux) {
        let mut seq = perm;
        seq.push(target[0].clone());
        let cg = CascadingGraph::build(train, &seq, scheme)?;
        let report = evaluate_cascading(&cg, split, params, opts)?;
        out.push(SequenceReport { sequence: seq, report });
    }
    Ok(out)
}

/// Evaluate the suffixes of the sequence: the full chain, then the chain
/// with the earliest behavior dropped, down to the target behavior alone.
pub fn prefix_ablation(
    train: &InteractionLog,
    sequence: &[String],
    scheme: Scheme,
    params: &RankParams,
    split: &SplitResult,
    opts: &EvalOptions,
) -> Result<Vec<SequenceReport>> {
    if sequence.is_empty() {
        return Err(Error::Config("behavior sequence is empty".into()));
    }
    let mut out = Vec::new();
    for start in 0..sequence.len() {
        let seq: Vec<String> = sequence[start..].to_vec();
        let cg = CascadingGraph::build(train, &seq, scheme)?;
        let report = evaluate_cascading(&cg, split, params, opts)?;
        out.push(SequenceReport { sequence: seq, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ingest_tsv;
    use std::collections::HashMap;
    use std::io::Cursor;

    fn log_from(data: &str, behaviors: &[&str]) -> InteractionLog {
        let labels: Vec<String> = behaviors.iter().map(|s| s.to_string()).collect();
        ingest_tsv(Cursor::new(data), &labels, false).unwrap()
    }

    struct FixedScorer {
        scores: HashMap<u32, Vec<f64>>,
    }

    impl Scorer for FixedScorer {
        fn score_items(&self, user: u32) -> Result<Vec<f64>> {
            Ok(self.scores[&user].clone())
        }
    }

    #[test]
    fn split_holds_out_latest_and_second_latest() {
        let data = "u\ta\tbuy\t1\nu\tb\tbuy\t2\nu\tc\tbuy\t3\n";
        let log = log_from(data, &["buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        let u = log.user_id("u").unwrap();
        assert_eq!(split.test[&u], log.item_id("c").unwrap());
        assert_eq!(split.validation[&u], log.item_id("b").unwrap());
        let train_items: Vec<u32> = split.train.records().iter().map(|r| r.item).collect();
        assert_eq!(train_items, vec![log.item_id("a").unwrap()]);
        assert_eq!(split.eligible_users, vec![u]);
    }

    #[test]
    fn single_interaction_user_contributes_only_a_test_item() {
        let data = "u\ta\tbuy\t1\n";
        let log = log_from(data, &["buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        let u = log.user_id("u").unwrap();
        assert_eq!(split.test[&u], 0);
        assert!(split.validation.is_empty());
        assert!(split.eligible_users.is_empty());
        assert!(split
            .train
            .records()
            .iter()
            .all(|r| split.train.behaviors()[r.behavior as usize] != "buy"));
    }

    #[test]
    fn split_ties_break_by_file_order() {
        // same timestamp: the later row is the later interaction
        let data = "u\ta\tbuy\t5\nu\tb\tbuy\t5\n";
        let log = log_from(data, &["buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        assert_eq!(split.test[&0], log.item_id("b").unwrap());
        assert_eq!(split.validation[&0], log.item_id("a").unwrap());
    }

    #[test]
    fn split_keeps_auxiliary_edges_of_holdout_items() {
        let data = "u\ta\tview\t1\nu\ta\tbuy\t2\n";
        let log = log_from(data, &["view", "buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        // the view of the held-out item stays in training
        assert_eq!(split.train.records().len(), 1);
        assert_eq!(split.train.counts_per_behavior()[0].1, 1);
    }

    #[test]
    fn split_round_trips_the_target_multiset() {
        let data = "\
u1\ta\tbuy\t1\nu1\tb\tbuy\t2\nu1\tc\tbuy\t3\n\
u2\ta\tbuy\t9\n\
u3\tb\tbuy\t4\nu3\tc\tbuy\t2\n\
u1\ta\tview\t1\n";
        let log = log_from(data, &["view", "buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        let b = log.behavior_id("buy").unwrap();
        let mut original: Vec<(u32, u32)> = log
            .records()
            .iter()
            .filter(|r| r.behavior == b)
            .map(|r| (r.user, r.item))
            .collect();
        let mut rebuilt: Vec<(u32, u32)> = split
            .train
            .records()
            .iter()
            .filter(|r| r.behavior == b)
            .map(|r| (r.user, r.item))
            .collect();
        rebuilt.extend(split.test.iter().map(|(&u, &i)| (u, i)));
        rebuilt.extend(split.validation.iter().map(|(&u, &i)| (u, i)));
        original.sort_unstable();
        rebuilt.sort_unstable();
        assert_eq!(original, rebuilt);
    }

    #[test]
    fn user_without_target_interactions_is_excluded() {
        let data = "u1\ta\tbuy\t1\nu2\ta\tview\t1\n";
        let log = log_from(data, &["view", "buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        assert!(!split.test.contains_key(&log.user_id("u2").unwrap()));
    }

    // u0's buys: "maskme" stays in training, "valitem" becomes the
    // validation holdout, "cand0" the test holdout. Item indices follow
    // first appearance: maskme=0, valitem=1, cand0=2, cand1=3, ...
    fn toy_split(num_items: usize) -> SplitResult {
        let mut rows = String::new();
        rows.push_str("u0\tmaskme\tbuy\t0\n");
        rows.push_str("u0\tvalitem\tbuy\t1\n");
        for j in 0..num_items {
            rows.push_str(&format!("u0\tcand{j}\tview\t2\n"));
        }
        rows.push_str("u0\tcand0\tbuy\t9\n");
        let log = log_from(&rows, &["view", "buy"]);
        leave_one_out_split(&log, "buy").unwrap()
    }

    #[test]
    fn rank_1_gives_perfect_metrics() {
        let split = toy_split(3);
        let n = split.train.num_items();
        let mut scores = vec![0.0; n];
        scores[split.test[&0] as usize] = 10.0;
        let scorer = FixedScorer {
            scores: HashMap::from([(0, scores)]),
        };
        let report = evaluate(&scorer, &split, &EvalOptions::new(vec![10])).unwrap();
        assert_eq!(report.hr[&10], 1.0);
        assert_eq!(report.ndcg[&10], 1.0);
    }

    #[test]
    fn rank_3_gives_half_ndcg() {
        let split = toy_split(4);
        let n = split.train.num_items();
        let held = split.test[&0] as usize;
        let mut scores = vec![0.0; n];
        // two unmasked items above the held-out one
        let mut strong = 100.0;
        let mut placed = 0;
        for j in 0..n {
            if j != held && j != 0 {
                // index 0 is "maskme", excluded from candidates
                scores[j] = strong;
                strong -= 1.0;
                placed += 1;
                if placed == 2 {
                    break;
                }
            }
        }
        scores[held] = 1.0;
        let scorer = FixedScorer {
            scores: HashMap::from([(0, scores)]),
        };
        let report = evaluate(&scorer, &split, &EvalOptions::new(vec![10])).unwrap();
        assert_eq!(report.hr[&10], 1.0);
        assert!((report.ndcg[&10] - 0.5).abs() < 1e-15); // 1/log2(4)
    }

    #[test]
    fn masked_training_items_never_occupy_ranks() {
        let split = toy_split(3);
        let n = split.train.num_items();
        let held = split.test[&0] as usize;
        let mut scores = vec![0.0; n];
        scores[0] = 100.0; // "maskme" is a training buy: masked
        scores[held] = 1.0;
        let scorer = FixedScorer {
            scores: HashMap::from([(0, scores)]),
        };
        let report = evaluate(
            &scorer,
            &split,
            &EvalOptions {
                per_user: true,
                ..EvalOptions::new(vec![1])
            },
        )
        .unwrap();
        let outcome = &report.per_user.as_ref().unwrap()[0];
        assert_eq!(outcome.rank, 1, "masked item must not outrank the held-out one");
        assert_eq!(report.hr[&1], 1.0);
    }

    #[test]
    fn tie_break_is_ascending_item_index() {
        let split = toy_split(4);
        let n = split.train.num_items();
        let held = split.test[&0] as usize;
        let scorer = FixedScorer {
            scores: HashMap::from([(0, vec![1.0; n])]),
        };
        let report = evaluate(
            &scorer,
            &split,
            &EvalOptions {
                per_user: true,
                ..EvalOptions::new(vec![10])
            },
        )
        .unwrap();
        let outcome = &report.per_user.as_ref().unwrap()[0];
        // all scores equal: rank = 1 + #unmasked items with smaller index
        let masked = [0usize]; // maskme
        let expected = 1 + (0..held).filter(|j| !masked.contains(j)).count();
        assert_eq!(outcome.rank, expected);
    }

    #[test]
    fn empty_test_set_and_bad_k_are_errors() {
        let data = "u\ta\tview\t1\n";
        let log = log_from(data, &["view", "buy"]);
        assert!(matches!(
            leave_one_out_split(&log, "buy"),
            Err(Error::EmptyTestSet)
        ));

        let split = toy_split(3);
        let scorer = FixedScorer {
            scores: HashMap::from([(0, vec![0.0; split.train.num_items()])]),
        };
        assert!(evaluate(&scorer, &split, &EvalOptions::new(vec![])).is_err());
        assert!(evaluate(&scorer, &split, &EvalOptions::new(vec![0])).is_err());
    }

    #[test]
    fn metrics_are_monotone_in_k_and_ndcg_below_hr() {
        let split = toy_split(6);
        let n = split.train.num_items();
        let held = split.test[&0] as usize;
        let mut scores = vec![0.0; n];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = (n - j) as f64;
        }
        scores[held] = 2.5;
        let scorer = FixedScorer {
            scores: HashMap::from([(0, scores)]),
        };
        let ks: Vec<usize> = (1..=n).collect();
        let report = evaluate(&scorer, &split, &EvalOptions::new(ks.clone())).unwrap();
        let mut prev_hr = 0.0;
        let mut prev_ndcg = 0.0;
        for k in ks {
            assert!(report.hr[&k] >= prev_hr);
            assert!(report.ndcg[&k] >= prev_ndcg);
            assert!(report.ndcg[&k] <= report.hr[&k] + 1e-15);
            prev_hr = report.hr[&k];
            prev_ndcg = report.ndcg[&k];
        }
    }

    #[test]
    fn sweep_grid_counts_65_cells_at_tenth_steps() {
        let cells = sweep_grid(0.1).unwrap();
        // enumerate-and-count oracle over integer tenths
        let mut expected = 0;
        for a in 0..=10 {
            for b in 0..=10 {
                if a + b >= 1 && a + b <= 10 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 65);
        assert_eq!(cells.len(), 65);
        for (a, b) in cells {
            assert!(a + b > 0.0 && a + b <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn permutation_counts_match_factorials() {
        assert_eq!(permutations(&["a", "b"]).len(), 2);
        assert_eq!(permutations(&["a", "b", "c"]).len(), 6);
        assert_eq!(permutations::<&str>(&[]).len(), 1);
    }

    #[test]
    fn permute_and_prefix_tables_cover_expected_sequences() {
        let data = "\
u0\ta\tview\t1\nu0\tb\tview\t2\nu1\ta\tview\t3\n\
u0\ta\tcart\t4\n\
u0\ta\tbuy\t5\nu0\tb\tbuy\t6\nu1\ta\tbuy\t7\nu1\tb\tbuy\t8\n";
        let log = log_from(data, &["view", "cart", "buy"]);
        let split = leave_one_out_split(&log, "buy").unwrap();
        let seq: Vec<String> = ["view", "cart", "buy"].iter().map(|s| s.to_string()).collect();
        let params = RankParams::new(0.2, 0.3).unwrap();
        let opts = EvalOptions::new(vec![10]);

        let table = permute_sequences(&split.train, &seq, Scheme::Symmetric, &params, &split, &opts)
            .unwrap();
        assert_eq!(table.len(), 2);
        for row in &table {
            assert_eq!(row.sequence.last().unwrap(), "buy");
        }
        let seqs: Vec<Vec<String>> = table.iter().map(|r| r.sequence.clone()).collect();
        assert!(seqs.contains(&seq));

        let ablation =
            prefix_ablation(&split.train, &seq, Scheme::Symmetric, &params, &split, &opts).unwrap();
        assert_eq!(ablation.len(), 3);
        assert_eq!(ablation[0].sequence.len(), 3);
        assert_eq!(ablation[2].sequence, vec!["buy".to_string()]);
    }

    #[test]
    fn jobs_one_and_parallel_agree() {
        let split = toy_split(5);
        let n = split.train.num_items();
        let held = split.test[&0] as usize;
        let mut scores = vec![0.0; n];
        scores[held] = 5.0;
        let scorer = FixedScorer {
            scores: HashMap::from([(0, scores)]),
        };
        let seq = evaluate(
            &scorer,
            &split,
            &EvalOptions {
                jobs: 1,
                ..EvalOptions::new(vec![1, 3])
            },
        )
        .unwrap();
        let par = evaluate(
            &scorer,
            &split,
            &EvalOptions {
                jobs: 2,
                ..EvalOptions::new(vec![1, 3])
            },
        )
        .unwrap();
        assert_eq!(seq.hr, par.hr);
        assert_eq!(seq.ndcg, par.ndcg);
    }
}
