//! Shared helpers and independent oracles for the integration suites. The
//! oracles here deliberately avoid the library's own algorithms: table counts
//! come from direct dynamic programming / naive enumeration, backbone tails
//! from Monte-Carlo resampling, and optimality checks from exhaustive search.

#![allow(dead_code)]

use std::collections::BTreeSet;

use coalmux::netmodel::{
    Layer, LayerId, ModelParams, MultilayerNetwork, MultilayerPartition, VertexRecord,
    VertexRegistry,
};
use coalmux::rng::StreamRng;

pub fn registry(n: usize) -> VertexRegistry {
    VertexRegistry::new(
        (0..n)
            .map(|i| VertexRecord {
                id: format!("v{i:03}"),
                name: format!("Actor {i}"),
                actor_type: "org".into(),
                power: 1.0,
            })
            .collect(),
    )
    .unwrap()
}

pub fn layer_from(token: &str, time: u32, n: usize, edges: Vec<(u32, u32, f64)>) -> Layer {
    let participants: BTreeSet<u32> = (0..n as u32).collect();
    Layer::new(
        token.to_string(),
        LayerId { mode: token.split('_').next().unwrap().to_string(), time },
        participants,
        edges,
    )
    .unwrap()
}

/// Erdos-Renyi edges with unit weights.
pub fn er_edges(rng: &mut StreamRng, n: u32, p: f64) -> Vec<(u32, u32, f64)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.bernoulli(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    edges
}

pub fn single_layer_net(n: usize, edges: Vec<(u32, u32, f64)>) -> MultilayerNetwork {
    MultilayerNetwork::new(registry(n), vec![layer_from("L_T0", 0, n, edges)], vec![]).unwrap()
}

pub fn two_layer_net(
    n: usize,
    e0: Vec<(u32, u32, f64)>,
    e1: Vec<(u32, u32, f64)>,
) -> MultilayerNetwork {
    let layers = vec![layer_from("A_T0", 0, n, e0), layer_from("A_T1", 1, n, e1)];
    MultilayerNetwork::new(registry(n), layers, vec![(0, 1)]).unwrap()
}

/// Enumerate set partitions of `n` items with at most `k` labels, in
/// restricted growth form.
pub fn enumerate_rgs(n: usize, k: u32, visit: &mut impl FnMut(&[u32])) {
    fn rec(labels: &mut Vec<u32>, n: usize, k: u32, visit: &mut impl FnMut(&[u32])) {
        if labels.len() == n {
            visit(labels);
            return;
        }
        let used = labels.iter().copied().max().map(|m| m + 1).unwrap_or(0);
        for lab in 0..used.min(k) {
            labels.push(lab);
            rec(labels, n, k, visit);
            labels.pop();
        }
        if used < k {
            labels.push(used);
            rec(labels, n, k, visit);
            labels.pop();
        }
    }
    rec(&mut Vec::new(), n, k, visit);
}

/// Integer partitions of `n` (weakly decreasing parts).
pub fn integer_partitions(n: u64) -> Vec<Vec<u64>> {
    fn rec(n: u64, max: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if n == 0 {
            out.push(current.clone());
            return;
        }
        let top = n.min(max);
        for part in (1..=top).rev() {
            current.push(part);
            rec(n - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Independent table-count oracle #1: forward dynamic programming over
/// columns with explicit remaining-row-sum vectors (no sorting, no memoized
/// recursion).
pub fn dp_count_tables(a: &[u64], b: &[u64]) -> u128 {
    use std::collections::HashMap;
    let mut states: HashMap<Vec<u64>, u128> = HashMap::new();
    states.insert(a.to_vec(), 1);
    for &bj in b {
        let mut next: HashMap<Vec<u64>, u128> = HashMap::new();
        for (rem, count) in &states {
            // Distribute bj over the rows, bounded by remaining sums.
            fn go(
                rem: &[u64],
                idx: usize,
                left: u64,
                current: &mut Vec<u64>,
                count: u128,
                next: &mut HashMap<Vec<u64>, u128>,
            ) {
                if idx == rem.len() {
                    if left == 0 {
                        *next.entry(current.clone()).or_insert(0) += count;
                    }
                    return;
                }
                let cap = left.min(rem[idx]);
                for x in 0..=cap {
                    current.push(rem[idx] - x);
                    go(rem, idx + 1, left - x, current, count, next);
                    current.pop();
                }
            }
            go(rem, 0, bj, &mut Vec::new(), *count, &mut next);
        }
        states = next;
    }
    states
        .iter()
        .filter(|(rem, _)| rem.iter().all(|&r| r == 0))
        .map(|(_, &c)| c)
        .sum()
}

/// Independent table-count oracle #2: naive cell-by-cell enumeration with
/// margin pruning. Only viable for small totals.
pub fn naive_count_tables(a: &[u64], b: &[u64]) -> u128 {
    fn rec(a: &[u64], col_rem: &mut Vec<u64>, row: usize, col: usize, row_rem: u64) -> u128 {
        if row == a.len() {
            return u128::from(col_rem.iter().all(|&c| c == 0));
        }
        if col == col_rem.len() {
            if row_rem != 0 {
                return 0;
            }
            let next_rem = a.get(row + 1).copied().unwrap_or(0);
            return rec(a, col_rem, row + 1, 0, next_rem);
        }
        let mut total = 0;
        let cap = row_rem.min(col_rem[col]);
        for x in 0..=cap {
            col_rem[col] -= x;
            total += rec(a, col_rem, row, col + 1, row_rem - x);
            col_rem[col] += x;
        }
        total
    }
    let mut col_rem = b.to_vec();
    rec(a, &mut col_rem, 0, 0, a.first().copied().unwrap_or(0))
}

/// Monte-Carlo backbone oracle: redistribute the integer total weight T as T
/// independent strength-proportional stub pairings and measure per-edge upper
/// tails empirically.
pub fn multinomial_edge_oracle(layer: &Layer, samples: usize, seed: u64) -> Vec<f64> {
    let strengths = layer.strengths();
    let total = layer.total_weight();
    let t_int = total.round() as u64;
    assert!((total - t_int as f64).abs() < 1e-9, "oracle needs integer totals");
    let verts: Vec<u32> = layer.participants().to_vec();
    let mut cdf = Vec::new();
    let mut acc = 0.0;
    for &i in &verts {
        for &j in &verts {
            if i == j {
                continue;
            }
            acc += strengths[&i] * strengths[&j] / (4.0 * total * total);
            cdf.push(((i.min(j), i.max(j)), acc));
        }
    }
    let mut rng = StreamRng::new(seed);
    let mut exceed = vec![0u64; layer.edges().len()];
    let mut counts: std::collections::HashMap<(u32, u32), u64> = Default::default();
    for _ in 0..samples {
        counts.clear();
        for _ in 0..t_int {
            let x = rng.next_f64();
            if x >= acc {
                continue; // self-pairing mass, discarded
            }
            let idx = cdf.partition_point(|&(_, c)| c <= x);
            *counts.entry(cdf[idx].0).or_insert(0) += 1;
        }
        for (k, &(u, v, w)) in layer.edges().iter().enumerate() {
            if counts.get(&(u, v)).copied().unwrap_or(0) as f64 >= w {
                exceed[k] += 1;
            }
        }
    }
    exceed.iter().map(|&e| e as f64 / samples as f64).collect()
}

/// Assemble a partition over a two-layer network from supra labels in
/// (layer, vertex) order.
pub fn partition_from_labels(net: &MultilayerNetwork, labels: &[u32]) -> MultilayerPartition {
    let mut offsets = Vec::new();
    let mut acc = 0usize;
    for l in 0..net.n_layers() {
        offsets.push(acc);
        acc += net.layer(l).participants().len();
    }
    MultilayerPartition::from_fn(net, |l, v| {
        let pos = net.layer(l).participants().iter().position(|&x| x == v).unwrap();
        labels[offsets[l] + pos]
    })
}

pub fn uniform_params(net: &MultilayerNetwork, gamma: f64, omega: f64, k_max: Option<u32>) -> ModelParams {
    ModelParams::uniform(net, gamma, omega).with_k_max(k_max)
}
