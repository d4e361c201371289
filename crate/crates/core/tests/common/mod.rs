//! Oracles and seeded generators shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use neural_core::graphs::{Adjacency, Modality, UnifiedGraph, UnifiedNode};
use neural_core::patch_grid::FeatureVector;
use neural_core::rng::SplitMix64;
use num_rational::Ratio;

/// Betweenness by enumerating every shortest path of every ordered pair.
///
/// Returns twice the unordered-pair score, exactly.
pub fn brute_force_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<Ratio<i64>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    // Floyd-Warshall hop distances
    let inf = usize::MAX / 4;
    let mut dist = vec![vec![inf; n]; n];
    for i in 0..n {
        dist[i][i] = 0;
        for j in 0..n {
            if adj[i][j] {
                dist[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if dist[i][k] + dist[k][j] < dist[i][j] {
                    dist[i][j] = dist[i][k] + dist[k][j];
                }
            }
        }
    }

    let mut score = vec![Ratio::from_integer(0i64); n];
    for s in 0..n {
        for t in 0..n {
            if s == t || dist[s][t] >= inf {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![s];
            enumerate(&adj, t, dist[s][t], &mut stack, &mut paths);
            let sigma = paths.len() as i64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count() as i64;
                score[v] += Ratio::new(through, sigma);
            }
        }
    }
    score
}

fn enumerate(adj: &[Vec<bool>], target: usize, length: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let here = *stack.last().unwrap();
    if stack.len() - 1 == length {
        if here == target {
            out.push(stack.clone());
        }
        return;
    }
    for next in 0..adj.len() {
        if adj[here][next] && !stack.contains(&next) {
            stack.push(next);
            enumerate(adj, target, length, stack, out);
            stack.pop();
        }
    }
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return true;
    }
    let adj = Adjacency::from_edges(n, edges.iter().copied());
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in adj.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Simple graph where each pair is an edge with probability `p`.
pub fn random_graph(rng: &mut SplitMix64, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.next_f64() < p {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Connected graph: a random spanning tree plus random extra edges.
pub fn random_connected_graph(rng: &mut SplitMix64, n: usize, extra: f64) -> Vec<(usize, usize)> {
    let order = rng.permutation(n);
    let mut edges: Vec<(usize, usize)> = (1..n)
        .map(|i| {
            let parent = order[rng.below(i as u64) as usize];
            let (a, b) = (parent, order[i]);
            (a.min(b), a.max(b))
        })
        .collect();
    for (a, b) in random_graph(rng, n, extra) {
        if !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    edges
}

/// Random unified graph with `visual` and `text` nodes, random intra-modality
/// edges, one bridge and features drawn from `[-1, 1)`.
pub fn random_unified(rng: &mut SplitMix64, visual: usize, text: usize, dim: usize) -> UnifiedGraph<f64> {
    let mut origins = rng.permutation(visual * 4);
    origins.truncate(visual);
    let feature = |rng: &mut SplitMix64| FeatureVector::new((0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let mut nodes = Vec::new();
    for &o in &origins {
        nodes.push(UnifiedNode { modality: Modality::Visual, origin: o as u32, feature: feature(rng) });
    }
    for o in 0..text {
        nodes.push(UnifiedNode { modality: Modality::Text, origin: o as u32, feature: feature(rng) });
    }
    let mut edges = random_graph(rng, visual, 0.4);
    edges.extend(random_graph(rng, text, 0.5).into_iter().map(|(a, b)| (a + visual, b + visual)));
    let bridge = (rng.below(visual as u64) as usize, visual + rng.below(text as u64) as usize);
    edges.push(bridge);
    UnifiedGraph::new(dim, nodes, edges, bridge).expect("generated graph is valid")
}

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
}

/// Compare analytic and central-difference gradients on `coords` randomly drawn
/// parameter coordinates.
///
/// A coordinate whose perturbation flips any ReLU or the output clamp is skipped
/// and replaced: the loss is not differentiable across a kink, so neither side of
/// the comparison is meaningful there. Relative error is `|a - n| / max(|a|, |n|,
/// 1e-8)`; the floor keeps round-off on near-zero gradients from counting.
pub fn gradient_check<G: neural_core::mpnn::MessageGraph<f64>>(
    model: &neural_core::MpnnModel,
    graph: &G,
    label: bool,
    rng: &mut SplitMix64,
    coords: usize,
    step: f64,
) -> GradCheck {
    use neural_core::mpnn::{grad, loss, trace};

    let (analytic, _) = grad(model, graph, label).unwrap();
    let flat_analytic: Vec<f64> = analytic.tensors().iter().flat_map(|t| t.iter().copied()).collect();
    let total = flat_analytic.len();
    let base_pattern = trace(model, graph).unwrap().activation_pattern();

    let perturbed = |index: usize, delta: f64| {
        let mut m = model.clone();
        let mut remaining = index;
        for t in m.tensors_mut() {
            if remaining < t.len() {
                t[remaining] += delta;
                break;
            }
            remaining -= t.len();
        }
        let tr = trace(&m, graph).unwrap();
        (loss(tr.prob, label), tr.activation_pattern())
    };

    let mut out = GradCheck { checked: 0, skipped_kinks: 0, max_rel_error: 0.0 };
    let mut attempts = 0;
    while out.checked < coords {
        attempts += 1;
        assert!(attempts < coords * 50, "too many kinks: {out:?}");
        let i = rng.below(total as u64) as usize;
        let (plus, p_plus) = perturbed(i, step);
        let (minus, p_minus) = perturbed(i, -step);
        if p_plus != base_pattern || p_minus != base_pattern {
            out.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * step);
        let a = flat_analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        out.max_rel_error = out.max_rel_error.max(rel);
        out.checked += 1;
    }
    out
}
