#![allow(dead_code)]

use boostne::graph::Graph;
use boostne::sparse::CsrMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected random graph: a shuffled spanning path plus Erdős–Rényi extras,
/// with random weights when `weighted`.
pub fn random_graph(n: usize, p: f64, weighted: bool, seed: u64) -> Graph {
    let mut rng = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut edges = Vec::new();
    let weight = |rng: &mut ChaCha8Rng| if weighted { rng.random_range(0.1..3.0) } else { 1.0 };
    for w in order.windows(2) {
        let wt = weight(&mut rng);
        edges.push((w[0], w[1], wt));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                let wt = weight(&mut rng);
                edges.push((i, j, wt));
            }
        }
    }
    Graph::from_index_edges(n, &edges).unwrap()
}

/// Two dense communities joined by a few bridges. Returns the graph and the
/// community of each node.
pub fn two_clusters(per_side: usize, p_in: f64, bridges: usize, seed: u64) -> (Graph, Vec<usize>) {
    let n = 2 * per_side;
    let mut rng = rng(seed);
    let mut edges = Vec::new();
    for side in 0..2 {
        let base = side * per_side;
        for i in 0..per_side {
            edges.push((base + i, base + (i + 1) % per_side, 1.0));
            for j in i + 1..per_side {
                if rng.random::<f64>() < p_in {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
    }
    for _ in 0..bridges {
        let a = rng.random_range(0..per_side);
        let b = per_side + rng.random_range(0..per_side);
        edges.push((a, b, 1.0));
    }
    let g = Graph::from_index_edges(n, &edges).unwrap();
    let community = (0..n).map(|i| i / per_side).collect();
    (g, community)
}

/// Dense adjacency straight from the edge list.
pub fn dense_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let mut a = Array2::zeros((n, n));
    for (i, j, w) in g.edges() {
        a[[i, j]] += w;
        a[[j, i]] += w;
    }
    a
}

/// `D^-1 A` with explicit loops.
pub fn dense_transition(g: &Graph) -> Array2<f64> {
    let a = dense_adjacency(g);
    let n = g.n();
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        let d: f64 = (0..n).map(|j| a[[i, j]]).sum();
        for j in 0..n {
            s[[i, j]] = a[[i, j]] / d;
        }
    }
    s
}

/// Triple-loop matrix product.
pub fn naive_matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let m = b.ncols();
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a[[i, t]] * b[[t, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

pub fn dense_power(s: &Array2<f64>, p: usize) -> Array2<f64> {
    let mut out = s.clone();
    for _ in 1..p {
        out = naive_matmul(s, &out);
    }
    out
}

pub fn dense_walk_sum(g: &Graph, window: usize) -> Array2<f64> {
    let s = dense_transition(g);
    let mut acc = Array2::zeros(s.dim());
    for r in 1..=window {
        acc += &dense_power(&s, r);
    }
    acc / window as f64
}

/// Random sparse nonnegative matrix with about `density` of entries set.
pub fn random_sparse(rows: usize, cols: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = rng(seed);
    let mut trip = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if rng.random::<f64>() < density {
                trip.push((i, j, rng.random_range(0.01..5.0)));
            }
        }
    }
    CsrMatrix::from_triplets(rows, cols, trip).unwrap()
}

pub fn random_nonneg(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.random::<f64>())
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Planted partition graph: `classes` communities, each node attaching
/// `edges_per_node` times, inside its community with probability `p_in`.
/// Only nodes that end up with an edge are kept; labels follow the graph's
/// node order.
pub fn planted_partition(n: usize, classes: usize, edges_per_node: usize, p_in: f64, seed: u64) -> (Graph, Vec<usize>) {
    let mut rng = rng(seed);
    let label: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let members: Vec<Vec<usize>> = (0..classes).map(|k| (0..n).filter(|&i| label[i] == k).collect()).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for _ in 0..edges_per_node {
            let b = if rng.random::<f64>() < p_in {
                let m = &members[label[a]];
                m[rng.random_range(0..m.len())]
            } else {
                rng.random_range(0..n)
            };
            if a != b {
                edges.push((a, b, 1.0));
            }
        }
    }
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let g = Graph::from_edges(ids, &edges).unwrap().drop_isolated().unwrap();
    let labels = g.node_ids().iter().map(|id| label[id.parse::<usize>().unwrap()]).collect();
    (g, labels)
}
