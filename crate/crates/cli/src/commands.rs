//! Subcommand implementations and artifact writers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use cascading_rank::baseline::{
    build_single_behavior_graph, build_unified_graph, BaselineConfig, BaselineRanker,
    BaselineVariant,
};
use cascading_rank::bench::bench_scalability;
use cascading_rank::diagnostics::convergence_diagnostics;
use cascading_rank::eval::{
    evaluate, leave_one_out_split, per_hyperparameter_maxima, permute_sequences, prefix_ablation,
    sweep, BaselineScorer, CascadingScorer, EvalOptions, Holdout, MetricsReport,
    SequenceReport,
};
use cascading_rank::graph::{CascadingGraph, Scheme};
use cascading_rank::ingest::{ingest_behavior_files, ingest_tsv, InteractionLog};
use cascading_rank::ranker::{rank, rank_with_trajectory, RankParams};

use crate::config::Resolved;
use crate::CliError;

pub fn load_log(r: &Resolved) -> Result<InteractionLog, CliError> {
    if let Some(path) = &r.input {
        let file = File::open(path)
            .with_context(|| format!("opening {}", path.display()))
            .map_err(CliError::Runtime)?;
        Ok(ingest_tsv(BufReader::new(file), &r.behaviors, r.has_header)?)
    } else {
        let mut readers = Vec::new();
        for (label, path) in &r.behavior_files {
            let file = File::open(path)
                .with_context(|| format!("opening {}", path.display()))
                .map_err(CliError::Runtime)?;
            readers.push((label.clone(), BufReader::new(file)));
        }
        Ok(ingest_behavior_files(readers, r.has_header)?)
    }
}

fn rank_params(r: &Resolved) -> Result<RankParams, CliError> {
    let scheme = Scheme::parse(&r.scheme)?;
    Ok(RankParams::new(r.alpha, r.beta)?
        .with_iteration(r.max_iters, r.epsilon)?
        .with_scheme(scheme))
}

fn eval_options(r: &Resolved) -> Result<EvalOptions, CliError> {
    let holdout = match r.holdout.as_str() {
        "test" => Holdout::Test,
        "validation" => Holdout::Validation,
        other => {
            return Err(CliError::Config(format!(
                "unknown holdout '{other}' (expected test or validation)"
            )))
        }
    };
    Ok(EvalOptions {
        k_list: r.k.clone(),
        jobs: r.jobs,
        holdout,
        per_user: false,
    })
}

enum RankBackend {
    Cascading(Box<CascadingGraph>, RankParams),
    Baseline(Box<BaselineRanker>),
}

impl RankBackend {
    fn score_items(&self, user: u32) -> Result<Vec<f64>, CliError> {
        match self {
            RankBackend::Cascading(cg, p) => {
                let mut result = rank(cg, user, p)?;
                Ok(result.per_behavior.pop().unwrap().items)
            }
            RankBackend::Baseline(ranker) => Ok(ranker.rank(user)?.items),
        }
    }
}

// Build the scoring backend over `log` for the configured variant. Baseline
// variants rank the unified graph (or the target behavior's graph with
// --single-behavior) and take lambda_U = lambda_I = alpha.
fn backend(r: &Resolved, log: &InteractionLog) -> Result<RankBackend, CliError> {
    if r.variant == "cascading" {
        let scheme = Scheme::parse(&r.scheme)?;
        let cg = CascadingGraph::build(log, &r.sequence, scheme)?;
        Ok(RankBackend::Cascading(Box::new(cg), rank_params(r)?))
    } else {
        let variant = BaselineVariant::parse(&r.variant)?;
        let graph = if r.single_behavior {
            build_single_behavior_graph(log, &r.target)?
        } else {
            build_unified_graph(log)
        };
        let config = BaselineConfig::new(variant, r.alpha, r.alpha)?
            .with_iteration(r.max_iters, r.epsilon)?;
        Ok(RankBackend::Baseline(Box::new(BaselineRanker::new(&graph, config)?)))
    }
}

fn out_writer(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(CliError::Runtime)?;
    Ok(BufWriter::new(file))
}

fn prepare_out(r: &Resolved) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&r.out)
        .with_context(|| format!("creating output directory {}", r.out.display()))
        .map_err(CliError::Runtime)?;
    Ok(r.out.clone())
}

fn write_manifest(
    dir: &Path,
    command: &str,
    r: &Resolved,
    wall_clock_secs: f64,
    artifacts: &[&str],
) -> Result<(), CliError> {
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": r,
        "artifacts": artifacts,
        "timing": { "wall_clock_secs": wall_clock_secs },
    });
    let mut w = out_writer(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest)
        .context("writing manifest")
        .map_err(CliError::Runtime)?;
    writeln!(w).map_err(|e| CliError::Runtime(e.into()))?;
    Ok(())
}

pub fn cmd_ingest(r: &Resolved) -> Result<(), CliError> {
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;

    let users = out_writer(&out, "user_index.tsv")?;
    let items = out_writer(&out, "item_index.tsv")?;
    log.write_index_sidecars(users, items)?;

    let mut counts = out_writer(&out, "behavior_counts.tsv")?;
    for (label, count) in log.counts_per_behavior() {
        writeln!(counts, "{label}\t{count}").map_err(|e| CliError::Runtime(e.into()))?;
    }

    println!(
        "ingested {} records: {} users, {} items",
        log.records().len(),
        log.num_users(),
        log.num_items()
    );
    for (label, count) in log.counts_per_behavior() {
        println!("  {label}: {count}");
    }
    write_manifest(
        &out,
        "ingest",
        r,
        start.elapsed().as_secs_f64(),
        &["user_index.tsv", "item_index.tsv", "behavior_counts.tsv"],
    )
}

fn resolve_users(r: &Resolved, log: &InteractionLog, cli_users: &[String], all: bool) -> Result<Vec<u32>, CliError> {
    if all {
        return Ok((0..log.num_users() as u32).collect());
    }
    let tokens: &[String] = if cli_users.is_empty() { &r.users } else { cli_users };
    if tokens.is_empty() {
        return Err(CliError::Config(
            "no querying users: pass --user TOKEN (repeatable) or --all-users".into(),
        ));
    }
    tokens
        .iter()
        .map(|t| {
            log.user_id(t)
                .ok_or_else(|| CliError::Config(format!("unknown user token '{t}'")))
        })
        .collect()
}

pub fn cmd_rank(r: &Resolved, cli_users: &[String], all_users: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;
    let users = resolve_users(r, &log, cli_users, all_users)?;
    let backend = backend(r, &log)?;
    let topk = r.k.first().copied().unwrap_or(r.topk);

    let mut w = out_writer(&out, "scores.tsv")?;
    for &u in &users {
        let scores = backend.score_items(u)?;
        let mut order: Vec<u32> = (0..scores.len() as u32).collect();
        order.sort_by(|&a, &b| {
            scores[b as usize]
                .partial_cmp(&scores[a as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        for (pos, &item) in order.iter().take(topk).enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                log.user_token(u),
                log.item_token(item),
                scores[item as usize],
                pos + 1
            )
            .map_err(|e| CliError::Runtime(e.into()))?;
        }
    }
    drop(w);
    println!("wrote top-{topk} scores for {} user(s)", users.len());
    write_manifest(&out, "rank", r, start.elapsed().as_secs_f64(), &["scores.tsv"])
}

fn write_report_tsv(dir: &Path, name: &str, report: &MetricsReport) -> Result<(), CliError> {
    let mut w = out_writer(dir, name)?;
    writeln!(w, "k\thr\tndcg").map_err(|e| CliError::Runtime(e.into()))?;
    for (k, hr) in &report.hr {
        writeln!(w, "{k}\t{hr}\t{}", report.ndcg[k]).map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = out_writer(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)
        .with_context(|| format!("writing {name}"))
        .map_err(CliError::Runtime)?;
    writeln!(w).map_err(|e| CliError::Runtime(e.into()))?;
    Ok(())
}

pub fn cmd_evaluate(r: &Resolved) -> Result<(), CliError> {
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;
    let split = leave_one_out_split(&log, &r.target)?;
    let opts = eval_options(r)?;

    let report = match backend(r, &split.train)? {
        RankBackend::Cascading(cg, params) => {
            evaluate(&CascadingScorer { cg: &cg, params }, &split, &opts)?
        }
        RankBackend::Baseline(ranker) => evaluate(&BaselineScorer { ranker: *ranker }, &split, &opts)?,
    };

    write_json(&out, "report.json", &report)?;
    write_report_tsv(&out, "report.tsv", &report)?;
    for (k, hr) in &report.hr {
        println!("HR@{k} = {hr:.6}  NDCG@{k} = {:.6}", report.ndcg[k]);
    }
    println!("evaluated {} users", report.evaluated_users);
    write_manifest(
        &out,
        "evaluate",
        r,
        start.elapsed().as_secs_f64(),
        &["report.json", "report.tsv"],
    )
}

fn require_cascading(r: &Resolved, mode: &str) -> Result<(), CliError> {
    if r.variant != "cascading" {
        return Err(CliError::Config(format!(
            "{mode} sweeps the cascading ranker; --variant must be 'cascading'"
        )));
    }
    Ok(())
}

pub fn cmd_sweep(r: &Resolved) -> Result<(), CliError> {
    require_cascading(r, "sweep")?;
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;
    let split = leave_one_out_split(&log, &r.target)?;
    let scheme = Scheme::parse(&r.scheme)?;
    let cg = CascadingGraph::build(&split.train, &r.sequence, scheme)?;
    let base = rank_params(r)?;
    let opts = eval_options(r)?;

    let cells = sweep(&cg, &split, &base, r.grid_step, &opts)?;

    let mut w = out_writer(&out, "sweep.tsv")?;
    write!(w, "alpha\tbeta").map_err(|e| CliError::Runtime(e.into()))?;
    for k in &r.k {
        write!(w, "\thr@{k}\tndcg@{k}").map_err(|e| CliError::Runtime(e.into()))?;
    }
    writeln!(w).map_err(|e| CliError::Runtime(e.into()))?;
    for cell in &cells {
        write!(w, "{}\t{}", cell.alpha, cell.beta).map_err(|e| CliError::Runtime(e.into()))?;
        for k in &r.k {
            write!(w, "\t{}\t{}", cell.report.hr[k], cell.report.ndcg[k])
                .map_err(|e| CliError::Runtime(e.into()))?;
        }
        writeln!(w).map_err(|e| CliError::Runtime(e.into()))?;
    }
    drop(w);

    let k0 = r.k[0];
    let maxima = per_hyperparameter_maxima(&cells, k0);
    let mut w = out_writer(&out, "sweep_maxima.tsv")?;
    writeln!(w, "axis\tvalue\tbest_hr@{k0}").map_err(|e| CliError::Runtime(e.into()))?;
    for axis in &maxima {
        for (value, best) in &axis.points {
            writeln!(w, "{}\t{}\t{}", axis.axis, value, best)
                .map_err(|e| CliError::Runtime(e.into()))?;
        }
    }
    drop(w);

    println!("swept {} (alpha, beta) cells", cells.len());
    write_manifest(
        &out,
        "sweep",
        r,
        start.elapsed().as_secs_f64(),
        &["sweep.tsv", "sweep_maxima.tsv"],
    )
}

fn write_sequence_table(
    dir: &Path,
    name: &str,
    rows: &[SequenceReport],
    k_list: &[usize],
) -> Result<(), CliError> {
    let mut w = out_writer(dir, name)?;
    write!(w, "sequence").map_err(|e| CliError::Runtime(e.into()))?;
    for k in k_list {
        write!(w, "\thr@{k}\tndcg@{k}").map_err(|e| CliError::Runtime(e.into()))?;
    }
    writeln!(w).map_err(|e| CliError::Runtime(e.into()))?;
    for row in rows {
        write!(w, "{}", row.sequence.join(",")).map_err(|e| CliError::Runtime(e.into()))?;
        for k in k_list {
            write!(w, "\t{}\t{}", row.report.hr[k], row.report.ndcg[k])
                .map_err(|e| CliError::Runtime(e.into()))?;
        }
        writeln!(w).map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}

pub fn cmd_permute(r: &Resolved) -> Result<(), CliError> {
    require_cascading(r, "permute")?;
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;
    let split = leave_one_out_split(&log, &r.target)?;
    let scheme = Scheme::parse(&r.scheme)?;
    let params = rank_params(r)?;
    let opts = eval_options(r)?;

    let (rows, artifact) = if r.prefix {
        (
            prefix_ablation(&split.train, &r.sequence, scheme, &params, &split, &opts)?,
            "prefix.tsv",
        )
    } else {
        (
            permute_sequences(&split.train, &r.sequence, scheme, &params, &split, &opts)?,
            "permute.tsv",
        )
    };
    write_sequence_table(&out, artifact, &rows, &r.k)?;
    println!("evaluated {} sequence(s)", rows.len());
    write_manifest(&out, "permute", r, start.elapsed().as_secs_f64(), &[artifact])
}

pub fn cmd_bench(r: &Resolved) -> Result<(), CliError> {
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;
    let params = rank_params(r)?;
    let fractions: Vec<f64> = if r.fractions.is_empty() {
        // log-spaced defaults from ~3% of the edges up to the full graph
        (0..7).map(|j| 10f64.powf(-0.75 + 0.125 * j as f64)).collect()
    } else {
        r.fractions.clone()
    };

    let report = bench_scalability(
        &log,
        &r.sequence,
        &params,
        &fractions,
        r.queries_per_point,
        r.repeats,
        r.seed,
    )?;

    let mut w = out_writer(&out, "bench.tsv")?;
    writeln!(w, "fraction\tedges\tseconds").map_err(|e| CliError::Runtime(e.into()))?;
    for p in &report.points {
        writeln!(w, "{}\t{}\t{}", p.fraction, p.edges, p.seconds)
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    drop(w);

    println!(
        "linear fit: seconds = {:.3e} * edges + {:.3e} (R^2 = {:.4})",
        report.slope, report.intercept, report.r_squared
    );
    write_json(&out, "bench_fit.json", &report)?;
    write_manifest(
        &out,
        "bench",
        r,
        start.elapsed().as_secs_f64(),
        &["bench.tsv", "bench_fit.json"],
    )
}

pub fn cmd_diagnose(r: &Resolved, cli_users: &[String]) -> Result<(), CliError> {
    require_cascading(r, "diagnose")?;
    let start = Instant::now();
    let out = prepare_out(r)?;
    let log = load_log(r)?;
    let users = resolve_users(r, &log, cli_users, false)?;
    let user = users[0];
    let scheme = Scheme::parse(&r.scheme)?;
    let cg = CascadingGraph::build(&log, &r.sequence, scheme)?;
    let params = rank_params(r)?;

    let (result, trajectories) = rank_with_trajectory(&cg, user, &params)?;
    let mut behaviors = Vec::new();
    for (scores, trajectory) in result.per_behavior.iter().zip(&trajectories) {
        let spectral = convergence_diagnostics(&cg, &scores.behavior, &params).ok();
        behaviors.push(serde_json::json!({
            "behavior": scores.behavior,
            "iterations": scores.iterations,
            "final_residual": scores.residual,
            "spectral": spectral,
            "trajectory": trajectory.records,
        }));
    }
    let diagnose = serde_json::json!({
        "user": log.user_token(user),
        "alpha": params.alpha,
        "beta": params.beta,
        "gamma": params.gamma(),
        "epsilon": params.epsilon,
        "behaviors": behaviors,
    });
    write_json(&out, "diagnose.json", &diagnose)?;

    for scores in &result.per_behavior {
        println!(
            "{}: {} iterations, final residual {:.3e}",
            scores.behavior, scores.iterations, scores.residual
        );
    }
    write_manifest(
        &out,
        "diagnose",
        r,
        start.elapsed().as_secs_f64(),
        &["diagnose.json"],
    )
}
