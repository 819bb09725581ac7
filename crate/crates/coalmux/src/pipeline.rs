//! Model selection: grid initialisation over uniform (gamma, omega)
//! combinations, coordinate ascent accepting only strict profile-likelihood
//! increases, consensus clustering over stochastic maximiser runs, and the
//! per-layer monolayer baseline.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::CoalError;
use crate::leiden::{maximize, maximize_supra, SupraGraph, SupraIndex};
use crate::netmodel::{ModelParams, MultilayerNetwork, MultilayerPartition};
use crate::quality::{total_loglik_with, ScoreBreakdown};
use crate::rng::mix_seed;
use crate::Result;

const TAG_EVAL: u64 = 0x45;
const TAG_CONS: u64 = 0x43;
const TAG_MONO: u64 = 0x4d;

pub const GAMMA_FLOOR: f64 = 0.05;
pub const CONSENSUS_MAX_ITER: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    Multilayer,
    Monolayer,
}

#[derive(Clone, Debug)]
pub struct SelectionConfig {
    pub gamma_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub step_gamma: f64,
    pub step_omega: f64,
    pub runs_per_eval: u32,
    pub max_passes: u32,
    pub base_seed: u64,
    /// Per-layer community caps: empty = unbounded, a single entry is
    /// broadcast to every layer.
    pub k_max: Vec<Option<u32>>,
    pub mode: SelectionMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            gamma_grid: vec![0.6, 0.8, 1.0, 1.2, 1.4],
            omega_grid: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            step_gamma: 0.05,
            step_omega: 0.05,
            runs_per_eval: 10,
            max_passes: 50,
            base_seed: 0,
            k_max: Vec::new(),
            mode: SelectionMode::Multilayer,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() || (self.mode == SelectionMode::Multilayer && self.omega_grid.is_empty()) {
            return Err(CoalError::Data("parameter grids must be non-empty".into()));
        }
        if self.step_gamma <= 0.0 || self.step_omega <= 0.0 {
            return Err(CoalError::Data("steps must be positive".into()));
        }
        if self.runs_per_eval == 0 {
            return Err(CoalError::Data("runs_per_eval must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve_k_max(&self, net: &MultilayerNetwork) -> Result<Vec<Option<u32>>> {
        match self.k_max.len() {
            0 => Ok(vec![None; net.n_layers()]),
            1 => Ok(vec![self.k_max[0]; net.n_layers()]),
            n if n == net.n_layers() => Ok(self.k_max.clone()),
            n => Err(CoalError::Data(format!(
                "k_max has {n} entries for {} layers",
                net.n_layers()
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub eval_index: u64,
    pub stage: &'static str,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub pg: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SelectionTrace {
    pub trials: Vec<TrialRecord>,
    pub params: ModelParams,
    pub partition: MultilayerPartition,
    pub scores: ScoreBreakdown,
}

// ---------------------------------------------------------------------------
// Consensus clustering
// ---------------------------------------------------------------------------

fn coassignment(
    index: &SupraIndex,
    net: &MultilayerNetwork,
    label_sets: &[Vec<u32>],
) -> HashMap<(u32, u32), u32> {
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    let n_layers = net.n_layers();
    // Within-layer pairs.
    let mut layer_nodes: Vec<Vec<u32>> = vec![Vec::new(); n_layers];
    for i in 0..index.len() {
        layer_nodes[index.node_layer[i] as usize].push(i as u32);
    }
    for labels in label_sets {
        for nodes in layer_nodes.iter() {
            for (i, &u) in nodes.iter().enumerate() {
                for &v in nodes.iter().skip(i + 1) {
                    if labels[u as usize] == labels[v as usize] {
                        *counts.entry((u, v)).or_insert(0) += 1;
                    }
                }
            }
        }
        // Coupled same-vertex pairs.
        for &(a, b) in net.couplings() {
            for v in net.shared_participants(a as usize, b as usize) {
                let u = index.node_of(a as usize, v).unwrap();
                let w = index.node_of(b as usize, v).unwrap();
                if labels[u as usize] == labels[w as usize] {
                    *counts.entry((u.min(w), u.max(w)), ).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

fn components_from_unanimous(index: &SupraIndex, counts: &HashMap<(u32, u32), u32>, runs: u32) -> Vec<u32> {
    // Union-find over pairs co-assigned in every run.
    let n = index.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut root = x;
        while parent[root as usize] != root {
            root = parent[root as usize];
        }
        let mut cur = x;
        while parent[cur as usize] != root {
            let next = parent[cur as usize];
            parent[cur as usize] = root;
            cur = next;
        }
        root
    }
    for (&(u, v), &c) in counts {
        if c == runs {
            let ru = find(&mut parent, u);
            let rv = find(&mut parent, v);
            if ru != rv {
                parent[ru.max(rv) as usize] = ru.min(rv);
            }
        }
    }
    let mut compact: HashMap<u32, u32> = HashMap::new();
    (0..n as u32)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = compact.len() as u32;
            *compact.entry(root).or_insert(next)
        })
        .collect()
}

/// Reconcile stochastic runs: recluster the co-assignment graph with the same
/// maximiser until every co-assignment weight is 0 or 1 (at most
/// [`CONSENSUS_MAX_ITER`] iterations); on non-convergence return the input
/// partition scoring best.
pub fn consensus(
    net: &MultilayerNetwork,
    params: &ModelParams,
    partitions: &[MultilayerPartition],
    scorer: &dyn Fn(&MultilayerPartition) -> Result<f64>,
    seed: u64,
) -> Result<MultilayerPartition> {
    if partitions.is_empty() {
        return Err(CoalError::Data("consensus needs at least one partition".into()));
    }
    for p in partitions {
        if p.n_layers() != net.n_layers() {
            return Err(CoalError::Data("consensus inputs cover different node sets".into()));
        }
        for l in 0..net.n_layers() {
            for &v in net.layer(l).participants() {
                if p.label(l, v).is_none() {
                    return Err(CoalError::Data("consensus inputs cover different node sets".into()));
                }
            }
        }
    }
    if partitions.iter().all(|p| p == &partitions[0]) {
        return Ok(partitions[0].clone());
    }
    let index = SupraIndex::new(net);
    let runs = partitions.len() as u32;
    let mut label_sets: Vec<Vec<u32>> = partitions.iter().map(|p| index.labels_from_partition(p)).collect();
    for iter in 0..CONSENSUS_MAX_ITER {
        let counts = coassignment(&index, net, &label_sets);
        if counts.values().all(|&c| c == runs) {
            let labels = components_from_unanimous(&index, &counts, runs);
            return Ok(index.partition_from_labels(net, &labels).renumber_global());
        }
        // Recluster the weighted co-assignment graph with the same maximiser
        // (unit resolution and layer weight on the consensus weights).
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for (&(u, v), &c) in &counts {
            let w = c as f64 / runs as f64;
            if index.node_layer[u as usize] == index.node_layer[v as usize] {
                intra.push((u, v, w));
            } else {
                inter.push((u, v, w));
            }
        }
        intra.sort_unstable_by_key(|e| (e.0, e.1));
        inter.sort_unstable_by_key(|e| (e.0, e.1));
        let ones = vec![1.0; net.n_layers()];
        let g = SupraGraph::from_node_edges(
            &index.node_layer,
            net.n_layers(),
            &intra,
            &inter,
            &ones,
            &ones,
            &params.k_max,
        );
        label_sets = (0..runs as u64)
            .into_par_iter()
            .map(|r| maximize_supra(&g, mix_seed(seed, &[iter as u64, r])))
            .collect();
    }
    // Non-convergence: best input by score, first on ties.
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in partitions.iter().enumerate() {
        let s = scorer(p)?;
        if best.is_none_or(|(bs, _)| s > bs) {
            best = Some((s, i));
        }
    }
    Ok(partitions[best.unwrap().1].clone())
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Run the maximiser `runs_per_eval` times with derived seeds, reconcile by
/// consensus, and score. A pure function of (net, params, config, eval_index).
pub fn evaluate(
    net: &MultilayerNetwork,
    params: &ModelParams,
    config: &SelectionConfig,
    eval_index: u64,
) -> Result<(MultilayerPartition, ScoreBreakdown)> {
    let runs: Vec<MultilayerPartition> = (0..config.runs_per_eval as u64)
        .into_par_iter()
        .map(|r| maximize(net, params, mix_seed(config.base_seed, &[TAG_EVAL, eval_index, r])))
        .collect::<Result<_>>()?;
    let scorer = |p: &MultilayerPartition| Ok(total_loglik_with(net, p, &params.k_max)?.total);
    let part = consensus(
        net,
        params,
        &runs,
        &scorer,
        mix_seed(config.base_seed, &[TAG_CONS, eval_index]),
    )?;
    let scores = total_loglik_with(net, &part, &params.k_max)?;
    Ok((part, scores))
}

struct EvalCache<'a> {
    net: &'a MultilayerNetwork,
    config: &'a SelectionConfig,
    k_max: Vec<Option<u32>>,
    cache: HashMap<Vec<i64>, (MultilayerPartition, ScoreBreakdown)>,
    next_eval: u64,
}

impl<'a> EvalCache<'a> {
    fn key(params: &ModelParams) -> Vec<i64> {
        params
            .gamma
            .iter()
            .chain(params.omega.iter())
            .map(|&x| (x * 1e4).round() as i64)
            .collect()
    }

    fn eval(&mut self, params: &ModelParams) -> Result<(u64, MultilayerPartition, ScoreBreakdown)> {
        let idx = self.next_eval;
        self.next_eval += 1;
        let key = Self::key(params);
        if let Some((p, s)) = self.cache.get(&key) {
            return Ok((idx, p.clone(), s.clone()));
        }
        let mut full = params.clone();
        full.k_max = self.k_max.clone();
        let (p, s) = evaluate(self.net, &full, self.config, idx)?;
        self.cache.insert(key, (p.clone(), s.clone()));
        Ok((idx, p, s))
    }
}

// ---------------------------------------------------------------------------
// Grid initialisation and coordinate ascent
// ---------------------------------------------------------------------------

fn uniform_params(
    net: &MultilayerNetwork,
    gamma: f64,
    omega: f64,
    k_max: &[Option<u32>],
) -> ModelParams {
    let mut p = ModelParams::uniform(net, gamma, omega);
    p.k_max = k_max.to_vec();
    p
}

/// Scan uniform (gamma, omega) combinations and return the best-scoring
/// params; ties resolve to smaller omega, then smaller gamma.
pub fn grid_init(net: &MultilayerNetwork, config: &SelectionConfig) -> Result<(ModelParams, Vec<TrialRecord>)> {
    config.validate()?;
    let k_max = config.resolve_k_max(net)?;
    let mut cache = EvalCache {
        net,
        config,
        k_max: k_max.clone(),
        cache: HashMap::new(),
        next_eval: 0,
    };
    let (params, trials, _) = grid_phase(net, config, &mut cache, &k_max)?;
    Ok((params, trials))
}

fn grid_phase<'a>(
    net: &MultilayerNetwork,
    config: &SelectionConfig,
    cache: &mut EvalCache<'a>,
    k_max: &[Option<u32>],
) -> Result<(ModelParams, Vec<TrialRecord>, f64)> {
    let omegas: Vec<f64> = match config.mode {
        SelectionMode::Multilayer => {
            let mut o = config.omega_grid.clone();
            o.sort_by(|a, b| a.partial_cmp(b).unwrap());
            o
        }
        SelectionMode::Monolayer => vec![0.0],
    };
    let mut gammas = config.gamma_grid.clone();
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut trials = Vec::new();
    let mut best: Option<(f64, ModelParams)> = None;
    for &omega in &omegas {
        for &gamma in &gammas {
            let params = uniform_params(net, gamma, omega, k_max);
            let (idx, _, scores) = cache.eval(&params)?;
            let accepted = best.as_ref().is_none_or(|(bs, _)| scores.total > *bs);
            trials.push(TrialRecord {
                eval_index: idx,
                stage: "grid",
                gamma: params.gamma.clone(),
                omega: params.omega.clone(),
                pg: scores.total,
                accepted,
            });
            if accepted {
                best = Some((scores.total, params));
            }
        }
    }
    let (pg, params) = best.expect("non-empty grids");
    Ok((params, trials, pg))
}

/// Full selection: grid initialisation, then per-parameter +-step sweeps
/// accepting strict increases of P(g), until a pass makes no update or
/// `max_passes` is reached.
pub fn coordinate_ascent(net: &MultilayerNetwork, config: &SelectionConfig) -> Result<SelectionTrace> {
    config.validate()?;
    let net_eff = match config.mode {
        SelectionMode::Multilayer => net.clone(),
        SelectionMode::Monolayer => net.decoupled(),
    };
    let k_max = config.resolve_k_max(&net_eff)?;
    let mut cache = EvalCache {
        net: &net_eff,
        config,
        k_max: k_max.clone(),
        cache: HashMap::new(),
        next_eval: 0,
    };
    let (mut params, mut trials, mut best_pg) = grid_phase(&net_eff, config, &mut cache, &k_max)?;

    let n_gamma = net_eff.n_layers();
    let n_omega = net_eff.couplings().len();
    for _pass in 0..config.max_passes {
        let mut updated = false;
        for pos in 0..(n_gamma + n_omega) {
            for dir in [1.0f64, -1.0] {
                let (cur, floor, step) = if pos < n_gamma {
                    (params.gamma[pos], GAMMA_FLOOR, config.step_gamma)
                } else {
                    (params.omega[pos - n_gamma], 0.0, config.step_omega)
                };
                let trial_value = (cur + dir * step).max(floor);
                if (trial_value - cur).abs() < 1e-12 {
                    continue;
                }
                let mut trial = params.clone();
                if pos < n_gamma {
                    trial.gamma[pos] = trial_value;
                } else {
                    trial.omega[pos - n_gamma] = trial_value;
                }
                let (idx, _, scores) = cache.eval(&trial)?;
                let accepted = scores.total > best_pg;
                trials.push(TrialRecord {
                    eval_index: idx,
                    stage: "sweep",
                    gamma: trial.gamma.clone(),
                    omega: trial.omega.clone(),
                    pg: scores.total,
                    accepted,
                });
                if accepted {
                    params = trial;
                    best_pg = scores.total;
                    updated = true;
                    break;
                }
            }
        }
        if !updated {
            break;
        }
    }
    let (_, partition, scores) = cache.eval(&params)?;
    Ok(SelectionTrace { trials, params, partition, scores })
}

// ---------------------------------------------------------------------------
// Monolayer baseline
// ---------------------------------------------------------------------------

/// Select gamma per layer independently with the same ascent, couplings
/// removed. The combined breakdown carries an inter entry of exactly zero for
/// every coupling of the original network.
pub fn run_monolayer_baseline(
    net: &MultilayerNetwork,
    config: &SelectionConfig,
) -> Result<(ModelParams, MultilayerPartition, ScoreBreakdown, Vec<SelectionTrace>)> {
    config.validate()?;
    let caps = config.resolve_k_max(net)?;
    let mut gammas = Vec::with_capacity(net.n_layers());
    let mut layer_partitions = Vec::with_capacity(net.n_layers());
    let mut intra = Vec::with_capacity(net.n_layers());
    let mut layer_stats = Vec::with_capacity(net.n_layers());
    let mut traces = Vec::with_capacity(net.n_layers());
    for (l, &cap) in caps.iter().enumerate() {
        let sub = net.single_layer(l);
        let cfg = SelectionConfig {
            mode: SelectionMode::Monolayer,
            base_seed: mix_seed(config.base_seed, &[TAG_MONO, l as u64]),
            k_max: vec![cap],
            ..config.clone()
        };
        let trace = coordinate_ascent(&sub, &cfg)?;
        gammas.push(trace.params.gamma[0]);
        intra.push(trace.scores.intra[0]);
        layer_stats.push(trace.scores.layer_stats[0].clone());
        layer_partitions.push(trace.partition.clone());
        traces.push(trace);
    }
    let partition = MultilayerPartition::from_fn(net, |l, v| {
        layer_partitions[l].label(0, v).expect("sub-partition covers layer")
    });
    let params = ModelParams {
        gamma: gammas,
        omega: vec![0.0; net.couplings().len()],
        beta: vec![1.0; net.n_layers()],
        k_max: caps,
    };
    // Inter is zero by construction; pair statistics record the observed
    // agreement with the copy rate pinned at the independence point.
    let mut pair_stats = Vec::with_capacity(net.couplings().len());
    for &pair in net.couplings() {
        let (shared, same) = crate::quality::pair_agreement(net, &partition, pair);
        pair_stats.push(crate::quality::PairStats {
            n_shared: shared,
            n_same: same,
            k_pair: 2,
            p_hat: 0.0,
        });
    }
    let total = intra.iter().sum();
    let scores = ScoreBreakdown {
        intra,
        inter: vec![0.0; net.couplings().len()],
        total,
        layer_stats,
        pair_stats,
    };
    Ok((params, partition, scores, traces))
}

// ---------------------------------------------------------------------------
// Move-stability audit
// ---------------------------------------------------------------------------

/// Largest quality improvement any single supra-node reassignment can achieve
/// against a partition, computed from scratch through the scorer (independent
/// of the maximiser's incremental bookkeeping). Candidate targets are every
/// label present in the partition plus one fresh label, subject to the caps.
pub fn best_single_move_gain(
    net: &MultilayerNetwork,
    params: &ModelParams,
    partition: &MultilayerPartition,
) -> Result<f64> {
    let base = crate::quality::multilayer_modularity(net, params, partition)?;
    let mut labels_present: std::collections::BTreeSet<u32> = Default::default();
    for l in 0..net.n_layers() {
        labels_present.extend(partition.distinct_labels_in_layer(l));
    }
    let fresh = labels_present.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut candidates: Vec<u32> = labels_present.into_iter().collect();
    candidates.push(fresh);
    let mut best = 0.0f64;
    for l in 0..net.n_layers() {
        for &v in net.layer(l).participants() {
            let current = partition.label(l, v).unwrap();
            for &target in &candidates {
                if target == current {
                    continue;
                }
                let mut moved = partition.clone();
                moved.set_label(l, v, target);
                if let Some(cap) = params.k_max[l] {
                    if moved.distinct_labels_in_layer(l).len() as u32 > cap {
                        continue;
                    }
                }
                let q = crate::quality::multilayer_modularity(net, params, &moved)?;
                best = best.max(q - base);
            }
        }
    }
    Ok(best)
}
