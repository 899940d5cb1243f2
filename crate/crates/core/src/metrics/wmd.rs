//! Word mover's distance: exact optimal transport between normalized
//! bag-of-words distributions with Euclidean ground cost, solved by
//! successive-shortest-path min-cost flow on exact integer masses (token
//! counts scaled by `lcm(|candidate|, |reference|)`), so no probability
//! rounding enters the problem.

use std::collections::HashMap;

use crate::corpus::TokenSeq;
use crate::embeddings::{EmbeddingProvider, Vector};
use crate::{Error, Result};

/// Distinct tokens in first-occurrence order with their counts.
fn bag(seq: &TokenSeq) -> (Vec<&str>, Vec<u64>) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut types = Vec::new();
    let mut counts = Vec::new();
    for token in seq.tokens() {
        match index.get(token.as_str()) {
            Some(&i) => counts[i] += 1,
            None => {
                index.insert(token, types.len());
                types.push(token.as_str());
                counts.push(1);
            }
        }
    }
    (types, counts)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Exact word mover's distance. Errors on empty input; callers that need a
/// defined value for empty candidates handle that case themselves (see
/// `r_seq`).
pub fn wmd(candidate: &TokenSeq, reference: &TokenSeq, provider: &EmbeddingProvider) -> Result<f64> {
    if candidate.is_empty() {
        return Err(Error::EmptyInput("wmd candidate"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput("wmd reference"));
    }
    let (cand_types, cand_counts) = bag(candidate);
    let (ref_types, ref_counts) = bag(reference);
    let total = lcm(candidate.len() as u64, reference.len() as u64);
    let cand_scale = total / candidate.len() as u64;
    let ref_scale = total / reference.len() as u64;

    let cand_vecs: Vec<Vector> = cand_types.iter().map(|t| provider.token_vector(t)).collect();
    let ref_vecs: Vec<Vector> = ref_types.iter().map(|t| provider.token_vector(t)).collect();

    let nc = cand_types.len();
    let nr = ref_types.len();
    let source = 0;
    let sink = nc + nr + 1;
    let mut flow = MinCostFlow::new(nc + nr + 2);
    for (i, &count) in cand_counts.iter().enumerate() {
        flow.add_edge(source, 1 + i, count * cand_scale, 0.0);
    }
    for (j, &count) in ref_counts.iter().enumerate() {
        flow.add_edge(1 + nc + j, sink, count * ref_scale, 0.0);
    }
    for (i, cv) in cand_vecs.iter().enumerate() {
        for (j, rv) in ref_vecs.iter().enumerate() {
            flow.add_edge(1 + i, 1 + nc + j, total, cv.euclidean(rv));
        }
    }
    let cost = flow.solve(source, sink, total)?;
    Ok(cost / total as f64)
}

/// Largest Euclidean distance between any two distinct-token embeddings of
/// the sequence; 0 for a single token type.
pub fn max_pairwise_distance(seq: &TokenSeq, provider: &EmbeddingProvider) -> f64 {
    let (types, _) = bag(seq);
    let vecs: Vec<Vector> = types.iter().map(|t| provider.token_vector(t)).collect();
    let mut best = 0.0f64;
    for i in 0..vecs.len() {
        for j in (i + 1)..vecs.len() {
            best = best.max(vecs[i].euclidean(&vecs[j]));
        }
    }
    best
}

struct FlowEdge {
    to: usize,
    rev: usize,
    cap: u64,
    cost: f64,
}

/// Successive shortest paths with Johnson potentials; all initial costs are
/// non-negative, so plain Dijkstra applies from the start.
struct MinCostFlow {
    graph: Vec<Vec<FlowEdge>>,
}

impl MinCostFlow {
    fn new(n: usize) -> Self {
        Self {
            graph: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u64, cost: f64) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push(FlowEdge {
            to,
            rev: rev_from,
            cap,
            cost,
        });
        self.graph[to].push(FlowEdge {
            to: from,
            rev: rev_to,
            cap: 0,
            cost: -cost,
        });
    }

    fn solve(&mut self, source: usize, sink: usize, mut required: u64) -> Result<f64> {
        let n = self.graph.len();
        let mut potential = vec![0.0f64; n];
        let mut total_cost = 0.0f64;
        while required > 0 {
            let (dist, prev) = self.dijkstra(source, &potential);
            let Some(_) = dist[sink] else {
                return Err(Error::NonFinite(
                    "min-cost flow could not route all mass".into(),
                ));
            };
            for v in 0..n {
                if let Some(d) = dist[v] {
                    potential[v] += d;
                }
            }
            // bottleneck along the shortest path
            let mut push = required;
            let mut v = sink;
            while v != source {
                let (u, e) = prev[v].expect("path exists");
                push = push.min(self.graph[u][e].cap);
                v = u;
            }
            let mut v = sink;
            while v != source {
                let (u, e) = prev[v].expect("path exists");
                total_cost += push as f64 * self.graph[u][e].cost;
                self.graph[u][e].cap -= push;
                let rev = self.graph[u][e].rev;
                self.graph[v][rev].cap += push;
                v = u;
            }
            required -= push;
        }
        Ok(total_cost)
    }

    #[allow(clippy::type_complexity)]
    fn dijkstra(
        &self,
        source: usize,
        potential: &[f64],
    ) -> (Vec<Option<f64>>, Vec<Option<(usize, usize)>>) {
        use std::collections::BinaryHeap;

        struct State {
            dist: f64,
            node: usize,
        }
        impl PartialEq for State {
            fn eq(&self, other: &Self) -> bool {
                self.dist.total_cmp(&other.dist).is_eq()
            }
        }
        impl Eq for State {}
        impl PartialOrd for State {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for State {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                other.dist.total_cmp(&self.dist) // min-heap
            }
        }

        let n = self.graph.len();
        let mut dist: Vec<Option<f64>> = vec![None; n];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(0.0);
        heap.push(State {
            dist: 0.0,
            node: source,
        });
        while let Some(State { dist: d, node: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for (ei, e) in self.graph[u].iter().enumerate() {
                if e.cap == 0 {
                    continue;
                }
                // float rounding can push reduced costs epsilon-negative
                let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                let nd = d + reduced;
                if dist[e.to].map_or(true, |cur| nd < cur) {
                    dist[e.to] = Some(nd);
                    prev[e.to] = Some((u, ei));
                    heap.push(State {
                        dist: nd,
                        node: e.to,
                    });
                }
            }
        }
        (dist, prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::embeddings::OovPolicy;
    use std::collections::HashMap;

    fn grid_provider() -> EmbeddingProvider {
        let mut rows = HashMap::new();
        rows.insert("origin".to_string(), vec![0.0, 0.0]);
        rows.insert("far".to_string(), vec![3.0, 4.0]);
        rows.insert("east".to_string(), vec![1.0, 0.0]);
        rows.insert("north".to_string(), vec![0.0, 1.0]);
        EmbeddingProvider::from_table(rows, OovPolicy::Zero).unwrap()
    }

    #[test]
    fn identical_bags_cost_zero() {
        let p = EmbeddingProvider::hash(8, 0);
        let a = tokenize("the court found merit");
        assert!(wmd(&a, &a, &p).unwrap().abs() <= 1e-9);
        // same bag, different order
        let b = tokenize("found the merit court");
        assert!(wmd(&a, &b, &p).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn single_tokens_give_euclidean_distance() {
        let p = grid_provider();
        let d = wmd(&tokenize("origin"), &tokenize("far"), &p).unwrap();
        assert!((d - 5.0).abs() <= 1e-9);
    }

    #[test]
    fn unequal_lengths_use_exact_masses() {
        let p = grid_provider();
        // candidate mass: origin 1/2, east 1/2; reference all at origin
        let d = wmd(&tokenize("origin east"), &tokenize("origin"), &p).unwrap();
        assert!((d - 0.5).abs() <= 1e-9, "got {d}");
    }

    #[test]
    fn three_token_bags_match_assignment_oracle() {
        let p = EmbeddingProvider::hash(4, 11);
        let a = tokenize("alpha beta gamma");
        let b = tokenize("delta epsilon zeta");
        let d = wmd(&a, &b, &p).unwrap();

        let av: Vec<Vector> = a.tokens().iter().map(|t| p.token_vector(t)).collect();
        let bv: Vec<Vector> = b.tokens().iter().map(|t| p.token_vector(t)).collect();
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let oracle = perms
            .iter()
            .map(|perm| {
                perm.iter()
                    .enumerate()
                    .map(|(i, &j)| av[i].euclidean(&bv[j]))
                    .sum::<f64>()
                    / 3.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((d - oracle).abs() <= 1e-9, "flow {d} vs oracle {oracle}");
    }

    #[test]
    fn empty_inputs_error() {
        let p = EmbeddingProvider::hash(4, 0);
        let empty = tokenize("");
        let word = tokenize("word");
        assert!(wmd(&empty, &word, &p).is_err());
        assert!(wmd(&word, &empty, &p).is_err());
    }

    #[test]
    fn max_pairwise_distance_examples() {
        let p = grid_provider();
        assert_eq!(max_pairwise_distance(&tokenize("origin origin"), &p), 0.0);
        let d = max_pairwise_distance(&tokenize("origin far east"), &p);
        assert!((d - 5.0).abs() <= 1e-12);
    }
}
