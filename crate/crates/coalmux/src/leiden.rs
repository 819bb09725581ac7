//! Seeded Leiden-style maximisation of multilayer modularity over the supra
//! graph, with an optional hard cap on the number of communities per layer.
//!
//! The supra graph has one node per participating (vertex, layer) pair.
//! Within-layer edges carry `beta_s * A_ij`; coupled layers are joined by
//! same-vertex edges of weight `omega_sr`. The configuration-model null term
//! applies within layers only, so every node carries its per-layer strength.
//!
//! Gain formulas are derived from the same unnormalized quality the scorer
//! computes, and debug builds recompute the quality from scratch after moves
//! to assert agreement. One maximisation call is sequential by design; calls
//! with different seeds share no state and may run concurrently.

use std::collections::{BTreeSet, HashMap};

use crate::netmodel::{ModelParams, MultilayerNetwork, MultilayerPartition};
use crate::rng::StreamRng;
use crate::Result;

const GAIN_EPS: f64 = 1e-12;
const MAX_LEVELS: usize = 32;
const MAX_PASSES_PER_LEVEL: usize = 256;

// ---------------------------------------------------------------------------
// Supra graph
// ---------------------------------------------------------------------------

/// Maps participating (vertex, layer) pairs to dense supra-node indices, in
/// (layer order, vertex index) order.
#[derive(Clone, Debug)]
pub struct SupraIndex {
    pub node_layer: Vec<u32>,
    pub node_vertex: Vec<u32>,
    lookup: Vec<HashMap<u32, u32>>,
}

impl SupraIndex {
    pub fn new(net: &MultilayerNetwork) -> Self {
        let mut node_layer = Vec::new();
        let mut node_vertex = Vec::new();
        let mut lookup = Vec::with_capacity(net.n_layers());
        for (l, layer) in net.layers().iter().enumerate() {
            let mut map = HashMap::with_capacity(layer.participants().len());
            for &v in layer.participants() {
                map.insert(v, node_layer.len() as u32);
                node_layer.push(l as u32);
                node_vertex.push(v);
            }
            lookup.push(map);
        }
        SupraIndex { node_layer, node_vertex, lookup }
    }

    pub fn len(&self) -> usize {
        self.node_layer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_layer.is_empty()
    }

    pub fn node_of(&self, layer: usize, vertex: u32) -> Option<u32> {
        self.lookup[layer].get(&vertex).copied()
    }

    pub fn partition_from_labels(&self, net: &MultilayerNetwork, labels: &[u32]) -> MultilayerPartition {
        debug_assert_eq!(labels.len(), self.len());
        MultilayerPartition::from_fn(net, |l, v| labels[self.node_of(l, v).unwrap() as usize])
    }

    pub fn labels_from_partition(&self, partition: &MultilayerPartition) -> Vec<u32> {
        (0..self.len())
            .map(|i| {
                partition
                    .label(self.node_layer[i] as usize, self.node_vertex[i])
                    .expect("partition covers all supra nodes")
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
struct SupraNode {
    /// Per-layer (layer, strength, original node count), sorted by layer.
    layers: Vec<(u32, f64, u32)>,
    /// Total weight of edges internal to this (aggregated) node.
    internal: f64,
    /// Original supra-node ids merged into this node.
    members: Vec<u32>,
}

/// The graph the maximiser walks: intra edges scaled by `beta`, inter edges
/// carrying coupling weights, and per-layer null factors
/// `f_s = beta_s * gamma_s / (2 m_s)`.
#[derive(Clone, Debug)]
pub struct SupraGraph {
    nodes: Vec<SupraNode>,
    adj: Vec<Vec<(u32, f64)>>,
    layer_factor: Vec<f64>,
    k_max: Vec<Option<u32>>,
    n_layers: usize,
}

impl SupraGraph {
    /// Assemble from node-level edges: same-layer edges feed the null model
    /// (strengths and totals), cross-layer edges are taken as given.
    pub fn from_node_edges(
        node_layer: &[u32],
        n_layers: usize,
        intra: &[(u32, u32, f64)],
        inter: &[(u32, u32, f64)],
        gamma: &[f64],
        beta: &[f64],
        k_max: &[Option<u32>],
    ) -> Self {
        let n = node_layer.len();
        let mut strength = vec![0.0; n];
        let mut layer_weight = vec![0.0; n_layers];
        for &(u, v, w) in intra {
            debug_assert_eq!(node_layer[u as usize], node_layer[v as usize]);
            strength[u as usize] += w;
            strength[v as usize] += w;
            layer_weight[node_layer[u as usize] as usize] += w;
        }
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(u, v, w) in intra {
            let b = beta[node_layer[u as usize] as usize];
            adj[u as usize].push((v, b * w));
            adj[v as usize].push((u, b * w));
        }
        for &(u, v, w) in inter {
            if w == 0.0 {
                continue;
            }
            adj[u as usize].push((v, w));
            adj[v as usize].push((u, w));
        }
        for list in adj.iter_mut() {
            list.sort_unstable_by_key(|a| a.0);
        }
        let layer_factor = (0..n_layers)
            .map(|s| {
                if layer_weight[s] > 0.0 {
                    beta[s] * gamma[s] / (2.0 * layer_weight[s])
                } else {
                    0.0
                }
            })
            .collect();
        let nodes = (0..n)
            .map(|i| SupraNode {
                layers: vec![(node_layer[i], strength[i], 1)],
                internal: 0.0,
                members: vec![i as u32],
            })
            .collect();
        SupraGraph {
            nodes,
            adj,
            layer_factor,
            k_max: k_max.to_vec(),
            n_layers,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of adjacency entries joining different layers, counted once.
    pub fn inter_edge_count(&self) -> usize {
        let mut count = 0;
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, _) in list {
                if (v as usize) > u {
                    let lu = &self.nodes[u].layers;
                    let lv = &self.nodes[v as usize].layers;
                    if lu.len() == 1 && lv.len() == 1 && lu[0].0 != lv[0].0 {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Build the supra graph of a network under given parameters.
pub fn build_supra(net: &MultilayerNetwork, params: &ModelParams) -> Result<(SupraGraph, SupraIndex)> {
    params.validate(net)?;
    let index = SupraIndex::new(net);
    let mut intra = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for &(u, v, w) in layer.edges() {
            intra.push((index.node_of(l, u).unwrap(), index.node_of(l, v).unwrap(), w));
        }
    }
    let mut inter = Vec::new();
    for (i, &(a, b)) in net.couplings().iter().enumerate() {
        let w = params.omega[i];
        if w == 0.0 {
            continue;
        }
        for v in net.shared_participants(a as usize, b as usize) {
            inter.push((
                index.node_of(a as usize, v).unwrap(),
                index.node_of(b as usize, v).unwrap(),
                w,
            ));
        }
    }
    let g = SupraGraph::from_node_edges(
        &index.node_layer,
        net.n_layers(),
        &intra,
        &inter,
        &params.gamma,
        &params.beta,
        &params.k_max,
    );
    Ok((g, index))
}

// ---------------------------------------------------------------------------
// Partition state
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct PartState {
    comm: Vec<u32>,
    comm_strength: Vec<Vec<f64>>,
    comm_ncount: Vec<Vec<u32>>,
    comm_nodes: Vec<u32>,
    layer_ncomms: Vec<u32>,
    empties: BTreeSet<u32>,
    n_comms: usize,
}

impl PartState {
    fn from_labels(g: &SupraGraph, labels: &[u32]) -> Self {
        let n = g.len();
        let slots = n.max(labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0));
        let mut st = PartState {
            comm: labels.to_vec(),
            comm_strength: vec![vec![0.0; g.n_layers]; slots],
            comm_ncount: vec![vec![0; g.n_layers]; slots],
            comm_nodes: vec![0; slots],
            layer_ncomms: vec![0; g.n_layers],
            empties: BTreeSet::new(),
            n_comms: 0,
        };
        for (i, &c) in labels.iter().enumerate() {
            let c = c as usize;
            st.comm_nodes[c] += 1;
            for &(s, x, cnt) in &g.nodes[i].layers {
                if st.comm_ncount[c][s as usize] == 0 && cnt > 0 {
                    st.layer_ncomms[s as usize] += 1;
                }
                st.comm_strength[c][s as usize] += x;
                st.comm_ncount[c][s as usize] += cnt;
            }
        }
        for c in 0..slots {
            if st.comm_nodes[c] == 0 {
                st.empties.insert(c as u32);
            } else {
                st.n_comms += 1;
            }
        }
        st
    }

    fn singletons(g: &SupraGraph) -> Self {
        let labels: Vec<u32> = (0..g.len() as u32).collect();
        Self::from_labels(g, &labels)
    }

    /// Per-layer community-count change if node `v` moved from `c` to `d`.
    /// Positive entries may violate a cap; negative or zero never do.
    fn move_allowed(&self, g: &SupraGraph, v: usize, c: u32, d: u32) -> bool {
        for &(s, _, cnt) in &g.nodes[v].layers {
            if cnt == 0 {
                continue;
            }
            let s = s as usize;
            let gains = self.comm_ncount[d as usize][s] == 0;
            let loses = self.comm_ncount[c as usize][s] == cnt;
            let delta = i64::from(gains) - i64::from(loses);
            if delta > 0 {
                if let Some(cap) = g.k_max[s] {
                    if self.layer_ncomms[s] as i64 + delta > cap as i64 {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn apply_move(&mut self, g: &SupraGraph, v: usize, d: u32) {
        let c = self.comm[v];
        debug_assert_ne!(c, d);
        for &(s, x, cnt) in &g.nodes[v].layers {
            let s = s as usize;
            self.comm_strength[c as usize][s] -= x;
            self.comm_strength[d as usize][s] += x;
            if cnt > 0 {
                if self.comm_ncount[d as usize][s] == 0 {
                    self.layer_ncomms[s] += 1;
                }
                self.comm_ncount[c as usize][s] -= cnt;
                if self.comm_ncount[c as usize][s] == 0 {
                    self.layer_ncomms[s] -= 1;
                }
                self.comm_ncount[d as usize][s] += cnt;
            }
        }
        self.comm_nodes[c as usize] -= 1;
        if self.comm_nodes[c as usize] == 0 {
            self.empties.insert(c);
            self.n_comms -= 1;
        }
        if self.comm_nodes[d as usize] == 0 {
            self.empties.remove(&d);
            self.n_comms += 1;
        }
        self.comm_nodes[d as usize] += 1;
        self.comm[v] = d;
    }

    fn members(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = vec![Vec::new(); self.comm_nodes.len()];
        for (i, &c) in self.comm.iter().enumerate() {
            out[c as usize].push(i as u32);
        }
        out
    }
}

/// Quality of a supra partition, recomputed from scratch: within-community
/// edge weight (internal weights always count) minus the per-layer null term.
#[cfg_attr(not(any(test, debug_assertions)), allow(dead_code))]
fn q_supra(g: &SupraGraph, comm: &[u32]) -> f64 {
    let mut q = 0.0;
    for (u, list) in g.adj.iter().enumerate() {
        for &(v, w) in list {
            if (v as usize) > u && comm[u] == comm[v as usize] {
                q += w;
            }
        }
    }
    for node in &g.nodes {
        q += node.internal;
    }
    let slots = comm.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut sums = vec![vec![0.0; g.n_layers]; slots];
    for (i, &c) in comm.iter().enumerate() {
        for &(s, x, _) in &g.nodes[i].layers {
            sums[c as usize][s as usize] += x;
        }
    }
    for row in &sums {
        for (s, &k) in row.iter().enumerate() {
            q -= g.layer_factor[s] * k * k / 2.0;
        }
    }
    q
}

// ---------------------------------------------------------------------------
// Local moving
// ---------------------------------------------------------------------------

struct Scratch {
    w_to: Vec<f64>,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(capacity: usize) -> Self {
        Scratch { w_to: vec![0.0; capacity], touched: Vec::new() }
    }

    fn gather(&mut self, g: &SupraGraph, st: &PartState, v: usize) {
        for &c in &self.touched {
            self.w_to[c as usize] = 0.0;
        }
        self.touched.clear();
        for &(u, w) in &g.adj[v] {
            let c = st.comm[u as usize];
            if self.w_to[c as usize] == 0.0 {
                self.touched.push(c);
            }
            self.w_to[c as usize] += w;
        }
        self.touched.sort_unstable();
    }
}

/// Change in quality if node `v` moves from its community `c` to `d` (which
/// may be empty). `w_to_c` and `w_to_d` are v's edge weights into each.
fn move_gain(g: &SupraGraph, st: &PartState, v: usize, w_to_c: f64, w_to_d: f64, d: u32) -> f64 {
    let c = st.comm[v];
    let mut null = 0.0;
    for &(s, x, _) in &g.nodes[v].layers {
        let s_us = s as usize;
        let f = g.layer_factor[s_us];
        if f == 0.0 || x == 0.0 {
            continue;
        }
        null += f * x * (st.comm_strength[c as usize][s_us] - x - st.comm_strength[d as usize][s_us]);
    }
    (w_to_d - w_to_c) + null
}

/// Best admissible target for one node: maximal gain, ties to the lowest
/// community index, staying put scored as gain zero. Founding a new community
/// is considered only when strictly better and permitted by the caps.
fn best_move_for(g: &SupraGraph, st: &PartState, scratch: &mut Scratch, v: usize) -> (u32, f64) {
    let c = st.comm[v];
    scratch.gather(g, st, v);
    let w_to_c = scratch.w_to[c as usize];
    let mut best_target = c;
    let mut best_gain = 0.0;
    for &d in &scratch.touched {
        if d == c {
            continue;
        }
        if !st.move_allowed(g, v, c, d) {
            continue;
        }
        let gain = move_gain(g, st, v, w_to_c, scratch.w_to[d as usize], d);
        if gain > best_gain + GAIN_EPS
            || ((gain - best_gain).abs() <= GAIN_EPS && d < best_target)
        {
            best_target = d;
            best_gain = gain;
        }
    }
    if st.comm_nodes[c as usize] > 1 {
        if let Some(&slot) = st.empties.iter().next() {
            if st.move_allowed(g, v, c, slot) {
                let gain = move_gain(g, st, v, w_to_c, 0.0, slot);
                if gain > best_gain + GAIN_EPS {
                    best_target = slot;
                    best_gain = gain;
                }
            }
        }
    }
    (best_target, best_gain)
}

fn local_move(g: &SupraGraph, st: &mut PartState, rng: &mut StreamRng) -> bool {
    let n = g.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut scratch = Scratch::new(st.comm_nodes.len());
    let mut any = false;
    #[cfg(debug_assertions)]
    let mut audits = 0u32;
    for _ in 0..MAX_PASSES_PER_LEVEL {
        rng.shuffle(&mut order);
        let mut moved = false;
        for &v in &order {
            let v = v as usize;
            let (target, _gain) = best_move_for(g, st, &mut scratch, v);
            if target != st.comm[v] {
                #[cfg(debug_assertions)]
                let before = if audits < 8 { Some(q_supra(g, &st.comm)) } else { None };
                st.apply_move(g, v, target);
                #[cfg(debug_assertions)]
                if let Some(qb) = before {
                    audits += 1;
                    let qa = q_supra(g, &st.comm);
                    debug_assert!(
                        ((qa - qb) - _gain).abs() <= 1e-9 * (1.0 + qa.abs()),
                        "incremental gain {} disagrees with recomputed {}",
                        _gain,
                        qa - qb
                    );
                }
                moved = true;
                any = true;
            }
        }
        if !moved {
            break;
        }
    }
    any
}

// ---------------------------------------------------------------------------
// Refinement and aggregation
// ---------------------------------------------------------------------------

/// Split each community into well-connected sub-communities: singletons merge
/// greedily into connected refined communities of the same parent when the
/// merge does not lower quality.
fn refine(g: &SupraGraph, st: &PartState, rng: &mut StreamRng) -> Vec<u32> {
    let n = g.len();
    let mut ref_comm: Vec<u32> = (0..n as u32).collect();
    let mut ref_strength: Vec<Vec<f64>> = g
        .nodes
        .iter()
        .map(|node| {
            let mut row = vec![0.0; g.n_layers];
            for &(s, x, _) in &node.layers {
                row[s as usize] += x;
            }
            row
        })
        .collect();
    let mut ref_size: Vec<u32> = vec![1; n];
    let mut order: Vec<u32> = (0..n as u32).collect();
    rng.shuffle(&mut order);
    let mut w_to: Vec<f64> = vec![0.0; n];
    let mut touched: Vec<u32> = Vec::new();
    for &v in &order {
        let v = v as usize;
        if ref_size[ref_comm[v] as usize] > 1 {
            continue;
        }
        let parent = st.comm[v];
        for &c in &touched {
            w_to[c as usize] = 0.0;
        }
        touched.clear();
        for &(u, w) in &g.adj[v] {
            if st.comm[u as usize] == parent && u as usize != v {
                let rc = ref_comm[u as usize];
                if w_to[rc as usize] == 0.0 {
                    touched.push(rc);
                }
                w_to[rc as usize] += w;
            }
        }
        touched.sort_unstable();
        let own = ref_comm[v];
        let mut best_target = own;
        let mut best_gain = 0.0;
        let mut found = false;
        for &d in &touched {
            if d == own {
                continue;
            }
            let mut null = 0.0;
            for &(s, x, _) in &g.nodes[v].layers {
                let f = g.layer_factor[s as usize];
                if f != 0.0 && x != 0.0 {
                    null += f * x * ref_strength[d as usize][s as usize];
                }
            }
            let gain = w_to[d as usize] - null;
            if !found && gain >= -GAIN_EPS {
                best_target = d;
                best_gain = gain;
                found = true;
            } else if found
                && (gain > best_gain + GAIN_EPS
                    || ((gain - best_gain).abs() <= GAIN_EPS && d < best_target))
            {
                best_target = d;
                best_gain = gain;
            }
        }
        if best_target != own {
            let row = std::mem::take(&mut ref_strength[v]);
            for (s, add) in row.iter().enumerate() {
                ref_strength[best_target as usize][s] += add;
            }
            ref_strength[v] = row;
            ref_size[best_target as usize] += 1;
            ref_size[own as usize] -= 1;
            ref_comm[v] = best_target;
        }
    }
    ref_comm
}

/// Aggregate refined communities into super-nodes; the returned initial label
/// vector groups them back into their parent communities.
fn aggregate(g: &SupraGraph, st: &PartState, refined: &[u32]) -> (SupraGraph, Vec<u32>) {
    let n = g.len();
    // Compact refined ids by first appearance in node order; remember one
    // witness node per refined community for the parent lookup below.
    let mut compact: HashMap<u32, u32> = HashMap::new();
    let mut witness: Vec<u32> = Vec::new();
    for (i, &r) in refined.iter().take(n).enumerate() {
        compact.entry(r).or_insert_with(|| {
            witness.push(i as u32);
            (witness.len() - 1) as u32
        });
    }
    let m = witness.len();
    let mut nodes: Vec<SupraNode> = (0..m)
        .map(|_| SupraNode { layers: Vec::new(), internal: 0.0, members: Vec::new() })
        .collect();
    let mut layer_acc: Vec<HashMap<u32, (f64, u32)>> = vec![HashMap::new(); m];
    for i in 0..n {
        let r = compact[&refined[i]] as usize;
        for &(s, x, cnt) in &g.nodes[i].layers {
            let entry = layer_acc[r].entry(s).or_insert((0.0, 0));
            entry.0 += x;
            entry.1 += cnt;
        }
        nodes[r].internal += g.nodes[i].internal;
        nodes[r].members.extend_from_slice(&g.nodes[i].members);
    }
    for (r, acc) in layer_acc.into_iter().enumerate() {
        let mut layers: Vec<(u32, f64, u32)> = acc.into_iter().map(|(s, (x, c))| (s, x, c)).collect();
        layers.sort_unstable_by_key(|e| e.0);
        nodes[r].layers = layers;
    }
    let mut edge_acc: HashMap<(u32, u32), f64> = HashMap::new();
    for (u, list) in g.adj.iter().enumerate() {
        let ru = compact[&refined[u]];
        for &(v, w) in list {
            if (v as usize) <= u {
                continue;
            }
            let rv = compact[&refined[v as usize]];
            if ru == rv {
                nodes[ru as usize].internal += w;
            } else {
                *edge_acc.entry((ru.min(rv), ru.max(rv))).or_insert(0.0) += w;
            }
        }
    }
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m];
    let mut edges: Vec<((u32, u32), f64)> = edge_acc.into_iter().collect();
    edges.sort_unstable_by_key(|e| e.0);
    for ((a, b), w) in edges {
        adj[a as usize].push((b, w));
        adj[b as usize].push((a, w));
    }
    for list in adj.iter_mut() {
        list.sort_unstable_by_key(|a| a.0);
    }
    let g2 = SupraGraph {
        nodes,
        adj,
        layer_factor: g.layer_factor.clone(),
        k_max: g.k_max.clone(),
        n_layers: g.n_layers,
    };
    // Parent labels for the aggregated nodes, compacted by first appearance.
    let mut parent_compact: HashMap<u32, u32> = HashMap::new();
    let mut labels = Vec::with_capacity(m);
    for &node in &witness {
        let p = st.comm[node as usize];
        let next = parent_compact.len() as u32;
        labels.push(*parent_compact.entry(p).or_insert(next));
    }
    (g2, labels)
}

// ---------------------------------------------------------------------------
// Cap enforcement
// ---------------------------------------------------------------------------

/// Merge communities until every configured per-layer cap holds, choosing at
/// each step the merge with the best (least harmful) quality change among
/// pairs co-present in an over-cap layer. When the cap binds, a merged
/// community may be disconnected; connectivity is only guaranteed for
/// partitions the cap leaves untouched.
fn enforce_k_max(g: &SupraGraph, st: &mut PartState) {
    loop {
        let over: Vec<usize> = (0..g.n_layers)
            .filter(|&s| matches!(g.k_max[s], Some(cap) if st.layer_ncomms[s] > cap))
            .collect();
        if over.is_empty() {
            return;
        }
        let members = st.members();
        let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &s in &over {
            let present: Vec<u32> = (0..st.comm_nodes.len() as u32)
                .filter(|&c| st.comm_ncount[c as usize][s] > 0)
                .collect();
            for i in 0..present.len() {
                for j in (i + 1)..present.len() {
                    pairs.insert((present[i], present[j]));
                }
            }
        }
        let mut best: Option<((u32, u32), f64)> = None;
        for &(a, b) in &pairs {
            let (small, large) = if members[a as usize].len() <= members[b as usize].len() {
                (a, b)
            } else {
                (b, a)
            };
            let mut w_between = 0.0;
            for &u in &members[small as usize] {
                for &(v, w) in &g.adj[u as usize] {
                    if st.comm[v as usize] == large {
                        w_between += w;
                    }
                }
            }
            let mut null = 0.0;
            for s in 0..g.n_layers {
                null += g.layer_factor[s]
                    * st.comm_strength[a as usize][s]
                    * st.comm_strength[b as usize][s];
            }
            let delta = w_between - null;
            if best.is_none_or(|(_, d)| delta > d + GAIN_EPS) {
                best = Some(((a, b), delta));
            }
        }
        let ((a, b), _) = best.expect("over-cap layer has at least two communities");
        for &v in &members[b as usize] {
            st.apply_move(g, v as usize, a);
        }
    }
}

/// Move every connected component of a community beyond its first into a
/// fresh community, where the caps allow it. Splitting a disconnected
/// community never lowers quality (there are no edges between components and
/// the null term only shrinks), so this restores the connectivity guarantee
/// after flat local moving. Returns whether anything split.
fn split_disconnected(g: &SupraGraph, st: &mut PartState) -> bool {
    let members = st.members();
    let mut any = false;
    for c in 0..members.len() {
        let nodes = &members[c];
        if nodes.len() < 2 {
            continue;
        }
        // Connected components within the community, discovered in node order.
        let mut comp_of: HashMap<u32, usize> = HashMap::new();
        let mut n_comps = 0usize;
        for &start in nodes {
            if comp_of.contains_key(&start) {
                continue;
            }
            let comp = n_comps;
            n_comps += 1;
            let mut stack = vec![start];
            comp_of.insert(start, comp);
            while let Some(u) = stack.pop() {
                for &(v, _) in &g.adj[u as usize] {
                    if st.comm[v as usize] == c as u32 && !comp_of.contains_key(&v) {
                        comp_of.insert(v, comp);
                        stack.push(v);
                    }
                }
            }
        }
        if n_comps < 2 {
            continue;
        }
        for comp in 1..n_comps {
            let moving: Vec<u32> = nodes.iter().copied().filter(|n| comp_of[n] == comp).collect();
            // Cap audit: the split adds presence wherever both the remainder
            // and the moving component keep nodes in a layer.
            let mut comp_count = vec![0u32; g.n_layers];
            for &n in &moving {
                for &(s, _, cnt) in &g.nodes[n as usize].layers {
                    comp_count[s as usize] += cnt;
                }
            }
            let allowed = (0..g.n_layers).all(|s| match g.k_max[s] {
                Some(cap) => {
                    let gains = comp_count[s] > 0 && st.comm_ncount[c][s] > comp_count[s];
                    !gains || st.layer_ncomms[s] + 1 <= cap
                }
                None => true,
            });
            if !allowed {
                continue;
            }
            let slot = match st.empties.iter().next() {
                Some(&e) => e,
                None => continue,
            };
            for &n in &moving {
                st.apply_move(g, n as usize, slot);
            }
            any = true;
        }
    }
    any
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Run the three-phase loop on a supra graph; returns labels compacted by
/// first appearance in node order. Deterministic in (graph, seed).
pub(crate) fn maximize_supra(g0: &SupraGraph, seed: u64) -> Vec<u32> {
    if g0.is_empty() {
        return Vec::new();
    }
    let mut rng = StreamRng::new(seed);
    let mut g = g0.clone();
    let mut st = PartState::singletons(&g);
    for _level in 0..MAX_LEVELS {
        local_move(&g, &mut st, &mut rng);
        if st.n_comms == g.len() {
            break;
        }
        let refined = refine(&g, &st, &mut rng);
        let distinct = refined.iter().collect::<std::collections::HashSet<_>>().len();
        if distinct == g.len() {
            break;
        }
        let (g2, init) = aggregate(&g, &st, &refined);
        let st2 = PartState::from_labels(&g2, &init);
        #[cfg(debug_assertions)]
        {
            let q_old = q_supra(&g, &st.comm);
            let q_new = q_supra(&g2, &st2.comm);
            debug_assert!(
                (q_old - q_new).abs() <= 1e-9 * (1.0 + q_old.abs()),
                "aggregation must preserve quality: {q_old} vs {q_new}"
            );
        }
        g = g2;
        st = st2;
    }
    // Expand to the original nodes.
    let mut labels0 = vec![0u32; g0.len()];
    for (i, node) in g.nodes.iter().enumerate() {
        for &m in &node.members {
            labels0[m as usize] = st.comm[i];
        }
    }
    let mut st0 = PartState::from_labels(g0, &labels0);
    enforce_k_max(g0, &mut st0);
    // Final polish at original granularity; keeps the result move-stable
    // under the caps after any forced merges. Splitting can re-enable moves,
    // but a freshly split component has no edges back to its old community,
    // so the loop cannot oscillate.
    local_move(g0, &mut st0, &mut rng);
    for _ in 0..16 {
        if !split_disconnected(g0, &mut st0) {
            break;
        }
        local_move(g0, &mut st0, &mut rng);
    }
    compact_labels(&st0.comm)
}

fn compact_labels(labels: &[u32]) -> Vec<u32> {
    let mut map: HashMap<u32, u32> = HashMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = map.len() as u32;
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Maximise multilayer modularity; deterministic in (network, params, seed).
/// Every layer respects its configured community-count cap. Empty networks
/// yield the empty partition.
pub fn maximize(net: &MultilayerNetwork, params: &ModelParams, seed: u64) -> Result<MultilayerPartition> {
    let (g, index) = build_supra(net, params)?;
    let labels = maximize_supra(&g, seed);
    Ok(index.partition_from_labels(net, &labels).renumber_global())
}
