//! Convergence diagnostics for the power iteration.
//!
//! The per-behavior iteration contracts through the operator
//! `S = gamma^2 * B * F` acting on item scores, whose eigenvalues lie in
//! `[-gamma^2, gamma^2]`. [`convergence_diagnostics`] reports the analytic
//! bound `gamma^2` next to the numerically measured top eigenvalue of `S`,
//! and [`contraction_ratios`] measures the realized contraction of the
//! substituted item-score recurrence `r_I <- S * r_I + x`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::closed_form::DEFAULT_DENSE_CAP;
use crate::error::{Error, Result};
use crate::graph::CascadingGraph;
use crate::ranker::{build_query_vectors, rank, RankParams};

/// Spectral bound versus measurement for one behavior's contraction operator.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConvergenceDiagnostics {
    /// Analytic bound `gamma^2` on the spectral radius of `S`.
    pub bound: f64,
    /// Largest-magnitude eigenvalue of `S`, measured by the power method.
    pub measured: f64,
}

// y = gamma^2 * B * (F * x), applied sparsely.
fn apply_s(cg: &CascadingGraph, pos: usize, gamma2: f64, x: &[f64], tmp: &mut [f64], y: &mut [f64]) {
    let ng = cg.normalized(pos);
    ng.forward().matvec_into(x, tmp);
    ng.backward().matvec_into(tmp, y);
    for v in y.iter_mut() {
        *v *= gamma2;
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Measure the top eigenvalue of `S = gamma^2 * B * F` for behavior `b`.
///
/// The measurement normalizes the iterate each step, so the reported value
/// never exceeds the operator norm; `measured <= bound + 1e-9` holds for
/// every valid configuration.
pub fn convergence_diagnostics(
    cg: &CascadingGraph,
    b: &str,
    p: &RankParams,
) -> Result<ConvergenceDiagnostics> {
    convergence_diagnostics_with_cap(cg, b, p, DEFAULT_DENSE_CAP)
}

/// [`convergence_diagnostics`] with an explicit node cap.
pub fn convergence_diagnostics_with_cap(
    cg: &CascadingGraph,
    b: &str,
    p: &RankParams,
    cap: usize,
) -> Result<ConvergenceDiagnostics> {
    p.validate()?;
    let pos = cg
        .position(b)
        .ok_or_else(|| Error::MissingBehavior(b.to_owned()))?;
    let nodes = cg.num_users() + cg.num_items();
    if nodes > cap {
        return Err(Error::DenseCapExceeded { nodes, cap });
    }
    let gamma2 = p.gamma() * p.gamma();
    let bound = gamma2;

    let ni = cg.num_items();
    let nu = cg.num_users();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..ni).map(|_| rng.random_range(0.1..1.0)).collect();
    let norm = l2_norm(&x);
    for v in &mut x {
        *v /= norm;
    }
    let mut tmp = vec![0.0; nu];
    let mut y = vec![0.0; ni];

    let mut measured = 0.0f64;
    for _ in 0..1000 {
        apply_s(cg, pos, gamma2, &x, &mut tmp, &mut y);
        let norm = l2_norm(&y);
        if norm == 0.0 {
            measured = 0.0;
            break;
        }
        let prev = measured;
        measured = norm;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (measured - prev).abs() <= 1e-13 * measured.max(1.0) {
            break;
        }
    }
    Ok(ConvergenceDiagnostics { bound, measured })
}

/// Successive L2 contraction ratios of the substituted recurrence
/// `r_I <- S * r_I + x` for behavior at chain position `pos`.
///
/// This is the recurrence whose powers of `S` drive the iterate error, so
/// every ratio is bounded by the spectral norm of `S`, i.e. by `gamma^2`.
/// Measurement stops once the difference norm falls to 1e-8: below that,
/// cancellation in subtracting near-equal O(1) iterates injects relative
/// noise above 1e-7 and the ratios quantify rounding, not contraction.
pub fn contraction_ratios(
    cg: &CascadingGraph,
    pos: usize,
    q: u32,
    p: &RankParams,
    steps: usize,
) -> Result<Vec<f64>> {
    p.validate()?;
    if pos >= cg.len() {
        return Err(Error::Config(format!(
            "behavior position {pos} outside chain of length {}",
            cg.len()
        )));
    }
    let gamma = p.gamma();
    let gamma2 = gamma * gamma;
    let nu = cg.num_users();
    let ni = cg.num_items();

    // previous-behavior scores: the chain prefix result, or the first
    // behavior's query pair when there is no prefix
    let query = build_query_vectors(cg, &cg.sequence()[pos], q)?;
    let (prev_users, prev_items) = if pos == 0 {
        let first = build_query_vectors(cg, &cg.sequence()[0], q)?;
        (first.users, first.items)
    } else {
        let prefix = CascadingGraph::from_edge_lists(
            nu,
            ni,
            &cg.sequence()[..pos]
                .iter()
                .enumerate()
                .map(|(i, label)| {
                    (
                        label.clone(),
                        cg.graph(i).edges().collect::<Vec<_>>(),
                    )
                })
                .collect::<Vec<_>>(),
            cg.scheme(),
        )?;
        let r = rank(&prefix, q, p)?;
        let last = r.per_behavior.last().unwrap();
        (last.users.clone(), last.items.clone())
    };

    // invariant term x = gamma * B * (alpha q_U + beta r_prev_U) + alpha q_I + beta r_prev_I
    let ng = cg.normalized(pos);
    let mut user_part = vec![0.0; nu];
    for u in 0..nu {
        user_part[u] = p.alpha * query.users[u] + p.beta * prev_users[u];
    }
    let mut x_const = vec![0.0; ni];
    ng.backward().matvec_into(&user_part, &mut x_const);
    for i in 0..ni {
        x_const[i] = gamma * x_const[i] + p.alpha * query.items[i] + p.beta * prev_items[i];
    }

    let mut r = query.items.clone();
    let mut r_next = vec![0.0; ni];
    let mut tmp = vec![0.0; nu];
    let mut prev_diff: Option<f64> = None;
    let mut ratios = Vec::new();
    for _ in 0..steps {
        apply_s(cg, pos, gamma2, &r, &mut tmp, &mut r_next);
        for i in 0..ni {
            r_next[i] += x_const[i];
        }
        let diff = r_next
            .iter()
            .zip(&r)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if let Some(d) = prev_diff {
            if d <= 1e-8 {
                break;
            }
            ratios.push(diff / d);
        }
        prev_diff = Some(diff);
        std::mem::swap(&mut r, &mut r_next);
    }
    Ok(ratios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Scheme;
    use nalgebra::DMatrix;

    fn random_cg(seed: u64, nu: usize, ni: usize, m: usize) -> CascadingGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<(u32, u32)> = (0..m)
            .map(|_| {
                (
                    rng.random_range(0..nu) as u32,
                    rng.random_range(0..ni) as u32,
                )
            })
            .collect();
        CascadingGraph::from_edge_lists(nu, ni, &[("b".to_string(), edges)], Scheme::Symmetric)
            .unwrap()
    }

    #[test]
    fn bound_is_gamma_squared() {
        let cg = random_cg(1, 4, 4, 6);
        let p = RankParams::new(0.5, 0.4).unwrap(); // gamma = 0.1
        let d = convergence_diagnostics(&cg, "b", &p).unwrap();
        assert!((d.bound - 0.01).abs() < 1e-15);
    }

    #[test]
    fn single_edge_operator_is_exactly_gamma_squared() {
        let cg = CascadingGraph::from_edge_lists(
            1,
            1,
            &[("b".to_string(), vec![(0, 0)])],
            Scheme::Symmetric,
        )
        .unwrap();
        let p = RankParams::new(0.2, 0.3).unwrap(); // gamma = 0.5
        let d = convergence_diagnostics(&cg, "b", &p).unwrap();
        assert!((d.measured - 0.25).abs() < 1e-12);
        assert!(d.measured <= d.bound + 1e-9);
    }

    // Dense eigensolve oracle: the power-method measurement must match the
    // top eigenvalue of the materialized operator.
    #[test]
    fn measurement_matches_dense_eigensolve() {
        let cg = random_cg(23, 14, 16, 40);
        let p = RankParams::new(0.3, 0.2).unwrap(); // gamma = 0.5
        let d = convergence_diagnostics(&cg, "b", &p).unwrap();
        assert!(d.measured <= 0.25 + 1e-12);

        let gamma2 = p.gamma() * p.gamma();
        let ng = cg.normalized(0);
        let nu = cg.num_users();
        let ni = cg.num_items();
        let mut f = DMatrix::<f64>::zeros(nu, ni);
        for u in 0..nu {
            for (i, w) in ng.forward().row(u) {
                f[(u, i as usize)] = w;
            }
        }
        let s = gamma2 * f.transpose() * f;
        let eig = s.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        assert!(
            (d.measured - top).abs() < 1e-8,
            "power method {} vs eigensolve {}",
            d.measured,
            top
        );
    }

    #[test]
    fn missing_behavior_and_cap_are_rejected() {
        let cg = random_cg(3, 4, 4, 6);
        let p = RankParams::new(0.3, 0.3).unwrap();
        assert!(matches!(
            convergence_diagnostics(&cg, "nope", &p),
            Err(Error::MissingBehavior(_))
        ));
        assert!(matches!(
            convergence_diagnostics_with_cap(&cg, "b", &p, 4),
            Err(Error::DenseCapExceeded { .. })
        ));
    }

    // The L2 ratio is bounded by gamma^2 from the very first step, so every
    // recorded ratio must respect the bound, not just the post-burn-in ones.
    #[test]
    fn contraction_ratios_respect_gamma_squared() {
        for (seed, alpha, beta) in [(5u64, 0.45, 0.45), (6, 0.3, 0.3), (7, 0.2, 0.1), (8, 0.05, 0.05)] {
            let cg = random_cg(seed, 10, 12, 30);
            let p = RankParams::new(alpha, beta).unwrap();
            let g2 = p.gamma() * p.gamma();
            let ratios = contraction_ratios(&cg, 0, 0, &p, 60).unwrap();
            assert!(!ratios.is_empty());
            for (k, r) in ratios.iter().enumerate() {
                assert!(r <= &(g2 + 1e-6), "ratio {r} at step {k} exceeds {g2}");
            }
        }
    }

    #[test]
    fn contraction_ratios_use_prefix_scores_for_later_behaviors() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let edges_a: Vec<(u32, u32)> = (0..20)
            .map(|_| (rng.random_range(0..8u32), rng.random_range(0..9u32)))
            .collect();
        let edges_b: Vec<(u32, u32)> = (0..15)
            .map(|_| (rng.random_range(0..8u32), rng.random_range(0..9u32)))
            .collect();
        let cg = CascadingGraph::from_edge_lists(
            8,
            9,
            &[("a".to_string(), edges_a), ("b".to_string(), edges_b)],
            Scheme::Symmetric,
        )
        .unwrap();
        let p = RankParams::new(0.2, 0.2).unwrap();
        let g2 = p.gamma() * p.gamma();
        let ratios = contraction_ratios(&cg, 1, 3, &p, 30).unwrap();
        assert!(!ratios.is_empty());
        for r in ratios.iter().skip(3) {
            assert!(r <= &(g2 + 1e-6));
        }
    }
}
