use std::collections::VecDeque;

use num_traits::Num;

use super::Adjacency;

/// Betweenness score per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores<S> {
    scores: Vec<S>,
}

impl<S: Clone + PartialOrd> CentralityScores<S> {
    pub fn scores(&self) -> &[S] {
        &self.scores
    }

    pub fn into_scores(self) -> Vec<S> {
        self.scores
    }

    /// Index of the highest score; ties go to the lowest index. `None` when empty.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.scores.iter().enumerate() {
            match best {
                Some(b) if s.partial_cmp(&self.scores[b]) != Some(std::cmp::Ordering::Greater) => {}
                _ => best = Some(i),
            }
        }
        best
    }
}

/// Exact unnormalized betweenness (Brandes) of an undirected, unweighted graph.
///
/// Dependencies are accumulated from every source and halved, so each unordered
/// pair is counted once. Generic over the accumulator so that exact rationals can
/// be used; shortest-path counts are kept as `S` as well.
pub fn betweenness_centrality<S>(graph: &Adjacency) -> CentralityScores<S>
where
    S: Num + Clone,
{
    let n = graph.node_count();
    let mut centrality = vec![S::zero(); n];
    if n < 3 {
        return CentralityScores { scores: centrality };
    }

    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![S::zero(); n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![S::zero(); n];

    for s in 0..n {
        stack.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = S::zero();
            dist[v] = usize::MAX;
            delta[v] = S::zero();
        }
        sigma[s] = S::one();
        dist[s] = 0;
        queue.push_back(s);

        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in graph.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] = sigma[w].clone() + sigma[v].clone();
                    preds[w].push(v);
                }
            }
        }

        while let Some(w) = stack.pop() {
            let coeff = (S::one() + delta[w].clone()) / sigma[w].clone();
            for &v in &preds[w] {
                delta[v] = delta[v].clone() + sigma[v].clone() * coeff.clone();
            }
            if w != s {
                centrality[w] = centrality[w].clone() + delta[w].clone();
            }
        }
    }

    let two = S::one() + S::one();
    for c in &mut centrality {
        *c = c.clone() / two.clone();
    }
    CentralityScores { scores: centrality }
}
