//! Core data model: vertex registry, layers, couplings, partitions, and model
//! parameters, plus the CSV/JSON file formats.
//!
//! All values are immutable after construction; operations build new values.
//! Vertex ids are opaque string tokens; internally everything is indexed by
//! dense integer handles assigned in registry file order, which makes seeded
//! runs reproducible from the input files alone.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CoalError;
use crate::Result;

pub const PARTITION_SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct VertexRecord {
    pub id: String,
    pub name: String,
    pub actor_type: String,
    /// Reputational power score, non-negative.
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexRegistry {
    entries: Vec<VertexRecord>,
    by_id: HashMap<String, u32>,
}

impl VertexRegistry {
    pub fn new(entries: Vec<VertexRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.id.is_empty() {
                return Err(CoalError::Data("empty vertex id".into()));
            }
            if !e.power.is_finite() || e.power < 0.0 {
                return Err(CoalError::Data(format!(
                    "vertex {}: power must be a non-negative number",
                    e.id
                )));
            }
            if by_id.insert(e.id.clone(), i as u32).is_some() {
                return Err(CoalError::Data(format!("duplicate vertex id {}", e.id)));
            }
        }
        Ok(VertexRegistry { entries, by_id })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).copied()
    }

    pub fn record(&self, index: u32) -> &VertexRecord {
        &self.entries[index as usize]
    }

    pub fn records(&self) -> &[VertexRecord] {
        &self.entries
    }

    pub fn total_power(&self) -> f64 {
        self.entries.iter().map(|e| e.power).sum()
    }
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

/// A layer identity: one tie mode at one time slice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerId {
    pub mode: String,
    pub time: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Unique file-format token, e.g. `Res_T0`.
    pub token: String,
    pub id: LayerId,
    participants: Vec<u32>,
    participant_set: HashSet<u32>,
    edges: Vec<(u32, u32, f64)>,
}

impl Layer {
    /// Build a validated layer. Edges must connect participants, carry
    /// strictly positive weights, and contain no self-loops or duplicate
    /// unordered pairs. Participants may include isolates.
    pub fn new(
        token: String,
        id: LayerId,
        participants: BTreeSet<u32>,
        mut edges: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        let participant_set: HashSet<u32> = participants.iter().copied().collect();
        let mut seen = HashSet::new();
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(CoalError::Data(format!(
                    "layer {token}: self-loop on vertex index {}",
                    e.0
                )));
            }
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
            if !e.2.is_finite() || e.2 <= 0.0 {
                return Err(CoalError::Data(format!(
                    "layer {token}: non-positive weight on edge ({}, {})",
                    e.0, e.1
                )));
            }
            if !participant_set.contains(&e.0) || !participant_set.contains(&e.1) {
                return Err(CoalError::Data(format!(
                    "layer {token}: edge ({}, {}) has an endpoint outside the participant set",
                    e.0, e.1
                )));
            }
            if !seen.insert((e.0, e.1)) {
                return Err(CoalError::Data(format!(
                    "layer {token}: duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
        }
        edges.sort_by_key(|a| (a.0, a.1));
        Ok(Layer {
            token,
            id,
            participants: participants.into_iter().collect(),
            participant_set,
            edges,
        })
    }

    pub fn participants(&self) -> &[u32] {
        &self.participants
    }

    pub fn is_participant(&self, v: u32) -> bool {
        self.participant_set.contains(&v)
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Weighted degree (strength) per participant; isolates map to 0.
    pub fn strengths(&self) -> HashMap<u32, f64> {
        let mut s: HashMap<u32, f64> = self.participants.iter().map(|&v| (v, 0.0)).collect();
        for &(u, v, w) in &self.edges {
            *s.get_mut(&u).unwrap() += w;
            *s.get_mut(&v).unwrap() += w;
        }
        s
    }

    /// Edge count over possible participant pairs.
    pub fn density(&self) -> f64 {
        let n = self.participants.len();
        if n < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n as f64 * (n as f64 - 1.0) / 2.0)
    }
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Which layer pairs are coupled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CouplingSpec {
    /// Complete graph over layers (default).
    AllPairs,
    /// Same mode, adjacent time slices only.
    TemporalAdjacent,
    /// Explicit list of layer-token pairs.
    Custom(Vec<(String, String)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultilayerNetwork {
    pub registry: VertexRegistry,
    layers: Vec<Layer>,
    couplings: Vec<(u32, u32)>,
}

impl MultilayerNetwork {
    pub fn new(registry: VertexRegistry, layers: Vec<Layer>, couplings: Vec<(u32, u32)>) -> Result<Self> {
        let mut tokens = HashSet::new();
        let mut ids = HashSet::new();
        for l in &layers {
            if !tokens.insert(l.token.clone()) {
                return Err(CoalError::Data(format!("duplicate layer token {}", l.token)));
            }
            if !ids.insert(l.id.clone()) {
                return Err(CoalError::Data(format!(
                    "duplicate layer identity ({}, {})",
                    l.id.mode, l.id.time
                )));
            }
            for &v in l.participants() {
                if v as usize >= registry.len() {
                    return Err(CoalError::Data(format!(
                        "layer {}: participant index {v} outside registry",
                        l.token
                    )));
                }
            }
        }
        let mut seen = HashSet::new();
        let mut sorted = Vec::with_capacity(couplings.len());
        for (a, b) in couplings {
            if a == b {
                return Err(CoalError::Data("layer coupled to itself".into()));
            }
            if a as usize >= layers.len() || b as usize >= layers.len() {
                return Err(CoalError::Data("coupling references an unknown layer".into()));
            }
            let pair = (a.min(b), a.max(b));
            if !seen.insert(pair) {
                return Err(CoalError::Data(format!("duplicate coupling {pair:?}")));
            }
            sorted.push(pair);
        }
        sorted.sort_unstable();
        Ok(MultilayerNetwork {
            registry,
            layers,
            couplings: sorted,
        })
    }

    /// Default coupling topology: every unordered pair of layers.
    pub fn all_pairs(n_layers: usize) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for a in 0..n_layers {
            for b in (a + 1)..n_layers {
                out.push((a as u32, b as u32));
            }
        }
        out
    }

    pub fn couplings_from_spec(layers: &[Layer], spec: &CouplingSpec) -> Result<Vec<(u32, u32)>> {
        match spec {
            CouplingSpec::AllPairs => Ok(Self::all_pairs(layers.len())),
            CouplingSpec::TemporalAdjacent => {
                let mut out = Vec::new();
                for a in 0..layers.len() {
                    for b in (a + 1)..layers.len() {
                        let (x, y) = (&layers[a].id, &layers[b].id);
                        if x.mode == y.mode && x.time.abs_diff(y.time) == 1 {
                            out.push((a as u32, b as u32));
                        }
                    }
                }
                Ok(out)
            }
            CouplingSpec::Custom(pairs) => {
                let index: HashMap<&str, u32> = layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.token.as_str(), i as u32))
                    .collect();
                let mut out = Vec::new();
                for (a, b) in pairs {
                    let ia = *index
                        .get(a.as_str())
                        .ok_or_else(|| CoalError::Data(format!("unknown layer token {a}")))?;
                    let ib = *index
                        .get(b.as_str())
                        .ok_or_else(|| CoalError::Data(format!("unknown layer token {b}")))?;
                    out.push((ia, ib));
                }
                Ok(out)
            }
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &Layer {
        &self.layers[index]
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn couplings(&self) -> &[(u32, u32)] {
        &self.couplings
    }

    pub fn layer_index(&self, token: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.token == token)
    }

    /// The same network with all couplings removed.
    pub fn decoupled(&self) -> MultilayerNetwork {
        MultilayerNetwork {
            registry: self.registry.clone(),
            layers: self.layers.clone(),
            couplings: Vec::new(),
        }
    }

    /// A single-layer network sharing this registry.
    pub fn single_layer(&self, index: usize) -> MultilayerNetwork {
        MultilayerNetwork {
            registry: self.registry.clone(),
            layers: vec![self.layers[index].clone()],
            couplings: Vec::new(),
        }
    }

    /// Vertices participating in both layers of a pair.
    pub fn shared_participants(&self, a: usize, b: usize) -> Vec<u32> {
        self.layers[a]
            .participants()
            .iter()
            .copied()
            .filter(|&v| self.layers[b].is_participant(v))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

/// Community label per participating (vertex, layer) pair. Labels are plain
/// non-negative integers; a label shared across layers means the same
/// community, which is what the coupling terms reward.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilayerPartition {
    labels: Vec<Vec<Option<u32>>>,
}

impl MultilayerPartition {
    /// Build from a labelling function over the participating pairs.
    pub fn from_fn(net: &MultilayerNetwork, mut f: impl FnMut(usize, u32) -> u32) -> Self {
        let mut labels = Vec::with_capacity(net.n_layers());
        for (l, layer) in net.layers().iter().enumerate() {
            let mut row = vec![None; net.registry.len()];
            for &v in layer.participants() {
                row[v as usize] = Some(f(l, v));
            }
            labels.push(row);
        }
        MultilayerPartition { labels }
    }

    /// Build from explicit per-layer maps; the domain must match the
    /// participating pairs exactly.
    pub fn from_assignments(
        net: &MultilayerNetwork,
        assignments: &BTreeMap<String, BTreeMap<String, u32>>,
    ) -> Result<Self> {
        let mut labels: Vec<Vec<Option<u32>>> =
            (0..net.n_layers()).map(|_| vec![None; net.registry.len()]).collect();
        for (token, map) in assignments {
            let l = net
                .layer_index(token)
                .ok_or_else(|| CoalError::Data(format!("unknown layer {token} in partition")))?;
            for (vid, &label) in map {
                let v = net
                    .registry
                    .index_of(vid)
                    .ok_or_else(|| CoalError::Data(format!("unknown vertex {vid} in partition")))?;
                if !net.layer(l).is_participant(v) {
                    return Err(CoalError::Data(format!(
                        "partition assigns non-participating pair ({vid}, {token})"
                    )));
                }
                labels[l][v as usize] = Some(label);
            }
        }
        for (l, layer) in net.layers().iter().enumerate() {
            for &v in layer.participants() {
                if labels[l][v as usize].is_none() {
                    return Err(CoalError::Data(format!(
                        "partition misses participating pair ({}, {})",
                        net.registry.record(v).id,
                        layer.token
                    )));
                }
            }
        }
        Ok(MultilayerPartition { labels })
    }

    pub fn label(&self, layer: usize, vertex: u32) -> Option<u32> {
        self.labels.get(layer)?.get(vertex as usize).copied().flatten()
    }

    pub fn n_layers(&self) -> usize {
        self.labels.len()
    }

    /// `(vertex, label)` pairs of one layer, in vertex-index order.
    pub fn layer_entries(&self, layer: usize) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.labels[layer]
            .iter()
            .enumerate()
            .filter_map(|(v, l)| l.map(|lab| (v as u32, lab)))
    }

    pub fn distinct_labels_in_layer(&self, layer: usize) -> BTreeSet<u32> {
        self.layer_entries(layer).map(|(_, l)| l).collect()
    }

    /// Relabel globally by first appearance in (layer order, vertex index)
    /// order. Preserves co-assignment everywhere; used to make maximiser
    /// output byte-stable.
    pub fn renumber_global(&self) -> Self {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut next = 0u32;
        let labels = self
            .labels
            .iter()
            .map(|row| {
                row.iter()
                    .map(|slot| {
                        slot.map(|lab| {
                            *map.entry(lab).or_insert_with(|| {
                                let id = next;
                                next += 1;
                                id
                            })
                        })
                    })
                    .collect()
            })
            .collect();
        MultilayerPartition { labels }
    }

    pub fn set_label(&mut self, layer: usize, vertex: u32, label: u32) {
        debug_assert!(self.labels[layer][vertex as usize].is_some());
        self.labels[layer][vertex as usize] = Some(label);
    }
}

/// Relabel each layer independently to contiguous labels 0..K_l-1 by first
/// appearance in vertex-id (lexicographic) order. Idempotent. This is a
/// per-layer normal form: it preserves co-assignment within every layer but
/// deliberately forgets cross-layer label identity, so it is not applied
/// anywhere scores are computed.
pub fn canonicalize(net: &MultilayerNetwork, partition: &MultilayerPartition) -> MultilayerPartition {
    let mut order: Vec<u32> = (0..net.registry.len() as u32).collect();
    order.sort_by(|&a, &b| net.registry.record(a).id.cmp(&net.registry.record(b).id));
    let mut out = partition.clone();
    for l in 0..net.n_layers() {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut next = 0u32;
        for &v in &order {
            if let Some(lab) = partition.label(l, v) {
                let new = *map.entry(lab).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                });
                out.set_label(l, v, new);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

/// Per-layer resolution, per-pair coupling, per-layer weight, and per-layer
/// community-count cap. `omega` is aligned with `net.couplings()`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub beta: Vec<f64>,
    pub k_max: Vec<Option<u32>>,
}

impl ModelParams {
    pub fn uniform(net: &MultilayerNetwork, gamma: f64, omega: f64) -> Self {
        ModelParams {
            gamma: vec![gamma; net.n_layers()],
            omega: vec![omega; net.couplings().len()],
            beta: vec![1.0; net.n_layers()],
            k_max: vec![None; net.n_layers()],
        }
    }

    pub fn with_k_max(mut self, cap: Option<u32>) -> Self {
        for slot in self.k_max.iter_mut() {
            *slot = cap;
        }
        self
    }

    pub fn validate(&self, net: &MultilayerNetwork) -> Result<()> {
        if self.gamma.len() != net.n_layers()
            || self.beta.len() != net.n_layers()
            || self.k_max.len() != net.n_layers()
            || self.omega.len() != net.couplings().len()
        {
            return Err(CoalError::Data("parameter vectors do not match the network".into()));
        }
        if self.gamma.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return Err(CoalError::Data("gamma must be positive".into()));
        }
        if self.beta.iter().any(|&b| !b.is_finite() || b <= 0.0) {
            return Err(CoalError::Data("beta must be positive".into()));
        }
        if self.omega.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(CoalError::Data("omega must be non-negative".into()));
        }
        if self.k_max.iter().any(|k| matches!(k, Some(0))) {
            return Err(CoalError::Data("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)
        .map_err(|e| CoalError::Data(format!("{}: {e}", path.display())))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn check_headers(path: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| CoalError::Data(format!("{}: {e}", path.display())))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(CoalError::parse(
            path.display().to_string(),
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Load and validate a multilayer network from its file set.
///
/// When `participation` is absent, a vertex participates in a layer iff it has
/// at least one edge there; an explicit participation file may add isolates.
pub fn load_network(
    vertices: &Path,
    layers: &Path,
    edges: &Path,
    participation: Option<&Path>,
) -> Result<MultilayerNetwork> {
    load_network_with(vertices, layers, edges, participation, &CouplingSpec::AllPairs)
}

pub fn load_network_with(
    vertices: &Path,
    layers: &Path,
    edges: &Path,
    participation: Option<&Path>,
    coupling: &CouplingSpec,
) -> Result<MultilayerNetwork> {
    let vfile = vertices.display().to_string();
    let mut rdr = reader(vertices)?;
    check_headers(vertices, &mut rdr, &["id", "name", "actor_type", "power"])?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CoalError::Data(format!("{vfile}: {e}")))?;
        let line = line_of(&row);
        let power: f64 = row[3]
            .trim()
            .parse()
            .map_err(|_| CoalError::parse(&vfile, line, format!("bad power value `{}`", &row[3])))?;
        if power < 0.0 || !power.is_finite() {
            return Err(CoalError::parse(&vfile, line, "power must be non-negative"));
        }
        if row[0].trim().is_empty() {
            return Err(CoalError::parse(&vfile, line, "empty vertex id"));
        }
        records.push(VertexRecord {
            id: row[0].trim().to_string(),
            name: row[1].to_string(),
            actor_type: row[2].to_string(),
            power,
        });
    }
    let registry = VertexRegistry::new(records)?;

    let lfile = layers.display().to_string();
    let mut rdr = reader(layers)?;
    check_headers(layers, &mut rdr, &["layer_id", "mode", "time"])?;
    let mut layer_meta: Vec<(String, LayerId)> = Vec::new();
    let mut layer_lookup: HashMap<String, usize> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CoalError::Data(format!("{lfile}: {e}")))?;
        let line = line_of(&row);
        let token = row[0].trim().to_string();
        if token.is_empty() {
            return Err(CoalError::parse(&lfile, line, "empty layer_id"));
        }
        let time: u32 = row[2]
            .trim()
            .parse()
            .map_err(|_| CoalError::parse(&lfile, line, format!("bad time value `{}`", &row[2])))?;
        if layer_lookup.insert(token.clone(), layer_meta.len()).is_some() {
            return Err(CoalError::parse(&lfile, line, format!("duplicate layer_id {token}")));
        }
        layer_meta.push((token, LayerId { mode: row[1].trim().to_string(), time }));
    }

    let efile = edges.display().to_string();
    let mut rdr = reader(edges)?;
    check_headers(edges, &mut rdr, &["layer_id", "source", "target", "weight"])?;
    let mut layer_edges: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); layer_meta.len()];
    let mut seen: HashSet<(usize, u32, u32)> = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CoalError::Data(format!("{efile}: {e}")))?;
        let line = line_of(&row);
        let l = *layer_lookup
            .get(row[0].trim())
            .ok_or_else(|| CoalError::parse(&efile, line, format!("unknown layer_id `{}`", &row[0])))?;
        let u = registry
            .index_of(row[1].trim())
            .ok_or_else(|| CoalError::parse(&efile, line, format!("unknown vertex_id `{}`", &row[1])))?;
        let v = registry
            .index_of(row[2].trim())
            .ok_or_else(|| CoalError::parse(&efile, line, format!("unknown vertex_id `{}`", &row[2])))?;
        if u == v {
            return Err(CoalError::parse(&efile, line, format!("self-loop on `{}`", &row[1])));
        }
        let w: f64 = row[3]
            .trim()
            .parse()
            .map_err(|_| CoalError::parse(&efile, line, format!("bad weight `{}`", &row[3])))?;
        if !w.is_finite() || w <= 0.0 {
            return Err(CoalError::parse(&efile, line, format!("weight must be positive, got {w}")));
        }
        let key = (l, u.min(v), u.max(v));
        if !seen.insert(key) {
            return Err(CoalError::parse(
                &efile,
                line,
                format!("duplicate edge ({}, {})", &row[1], &row[2]),
            ));
        }
        layer_edges[l].push((u, v, w));
    }

    let mut participants: Vec<BTreeSet<u32>> = layer_edges
        .iter()
        .map(|es| es.iter().flat_map(|&(u, v, _)| [u, v]).collect())
        .collect();
    if let Some(ppath) = participation {
        let pfile = ppath.display().to_string();
        let mut rdr = reader(ppath)?;
        check_headers(ppath, &mut rdr, &["layer_id", "vertex_id"])?;
        let mut explicit: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); layer_meta.len()];
        for row in rdr.records() {
            let row = row.map_err(|e| CoalError::Data(format!("{pfile}: {e}")))?;
            let line = line_of(&row);
            let l = *layer_lookup
                .get(row[0].trim())
                .ok_or_else(|| CoalError::parse(&pfile, line, format!("unknown layer_id `{}`", &row[0])))?;
            let v = registry
                .index_of(row[1].trim())
                .ok_or_else(|| CoalError::parse(&pfile, line, format!("unknown vertex_id `{}`", &row[1])))?;
            explicit[l].insert(v);
        }
        // The explicit file replaces the default; endpoints must be covered.
        for (l, endpoints) in participants.iter().enumerate() {
            if let Some(&missing) = endpoints.difference(&explicit[l]).next() {
                return Err(CoalError::Data(format!(
                    "layer {}: vertex {} has edges but is not listed in {}",
                    layer_meta[l].0,
                    registry.record(missing).id,
                    pfile
                )));
            }
        }
        participants = explicit;
    }

    let layers: Vec<Layer> = layer_meta
        .into_iter()
        .zip(participants)
        .zip(layer_edges)
        .map(|(((token, id), parts), es)| Layer::new(token, id, parts, es))
        .collect::<Result<_>>()?;

    let couplings = MultilayerNetwork::couplings_from_spec(&layers, coupling)?;
    MultilayerNetwork::new(registry, layers, couplings)
}

/// Conventional file names inside a network directory.
pub fn network_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf, Option<PathBuf>) {
    let p = dir.join("participation.csv");
    (
        dir.join("vertices.csv"),
        dir.join("layers.csv"),
        dir.join("edges.csv"),
        p.exists().then_some(p),
    )
}

pub fn load_network_dir(dir: &Path, coupling: &CouplingSpec) -> Result<MultilayerNetwork> {
    let (v, l, e, p) = network_paths(dir);
    load_network_with(&v, &l, &e, p.as_deref(), coupling)
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// Write bytes atomically: to a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(meta: &[String], header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = Vec::new();
    for line in meta {
        out.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(header).expect("csv header");
    for row in rows {
        w.write_record(row).expect("csv row");
    }
    w.flush().expect("csv flush");
    drop(w);
    out
}

/// Write the full network file set into `dir`. The participation file is
/// always written so isolates survive a round trip.
pub fn write_network_dir(net: &MultilayerNetwork, dir: &Path, meta: &[String]) -> Result<()> {
    let vrows: Vec<Vec<String>> = net
        .registry
        .records()
        .iter()
        .map(|r| vec![r.id.clone(), r.name.clone(), r.actor_type.clone(), format!("{}", r.power)])
        .collect();
    write_atomic(
        &dir.join("vertices.csv"),
        &csv_bytes(meta, &["id", "name", "actor_type", "power"], &vrows),
    )?;

    let lrows: Vec<Vec<String>> = net
        .layers()
        .iter()
        .map(|l| vec![l.token.clone(), l.id.mode.clone(), format!("{}", l.id.time)])
        .collect();
    write_atomic(
        &dir.join("layers.csv"),
        &csv_bytes(meta, &["layer_id", "mode", "time"], &lrows),
    )?;

    let mut erows = Vec::new();
    for layer in net.layers() {
        for &(u, v, w) in layer.edges() {
            erows.push(vec![
                layer.token.clone(),
                net.registry.record(u).id.clone(),
                net.registry.record(v).id.clone(),
                format!("{w}"),
            ]);
        }
    }
    write_atomic(
        &dir.join("edges.csv"),
        &csv_bytes(meta, &["layer_id", "source", "target", "weight"], &erows),
    )?;

    let mut prows = Vec::new();
    for layer in net.layers() {
        for &v in layer.participants() {
            prows.push(vec![layer.token.clone(), net.registry.record(v).id.clone()]);
        }
    }
    write_atomic(
        &dir.join("participation.csv"),
        &csv_bytes(meta, &["layer_id", "vertex_id"], &prows),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Partition document (JSON)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub gamma: BTreeMap<String, f64>,
    pub omega: BTreeMap<String, f64>,
    pub beta: BTreeMap<String, f64>,
    pub k_max: BTreeMap<String, Option<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoresDoc {
    pub intra: BTreeMap<String, f64>,
    pub inter: BTreeMap<String, f64>,
    pub total: f64,
}

/// Versioned on-disk form of a partition with its parameters and scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<BTreeMap<String, String>>,
    pub assignments: BTreeMap<String, BTreeMap<String, u32>>,
    pub params: ParamsDoc,
    pub scores: ScoresDoc,
}

pub fn pair_token(net: &MultilayerNetwork, pair: (u32, u32)) -> String {
    format!(
        "{}|{}",
        net.layer(pair.0 as usize).token,
        net.layer(pair.1 as usize).token
    )
}

impl PartitionDoc {
    pub fn build(
        net: &MultilayerNetwork,
        partition: &MultilayerPartition,
        params: &ModelParams,
        intra: &[f64],
        inter: &[f64],
        total: f64,
        meta: Option<BTreeMap<String, String>>,
    ) -> Self {
        let mut assignments = BTreeMap::new();
        for (l, layer) in net.layers().iter().enumerate() {
            let mut map = BTreeMap::new();
            for (v, lab) in partition.layer_entries(l) {
                map.insert(net.registry.record(v).id.clone(), lab);
            }
            assignments.insert(layer.token.clone(), map);
        }
        let gamma = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| (layer.token.clone(), params.gamma[l]))
            .collect();
        let beta = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| (layer.token.clone(), params.beta[l]))
            .collect();
        let k_max = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| (layer.token.clone(), params.k_max[l]))
            .collect();
        let omega = net
            .couplings()
            .iter()
            .enumerate()
            .map(|(i, &pair)| (pair_token(net, pair), params.omega[i]))
            .collect();
        let intra_map = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| (layer.token.clone(), intra[l]))
            .collect();
        let inter_map = net
            .couplings()
            .iter()
            .enumerate()
            .map(|(i, &pair)| (pair_token(net, pair), inter[i]))
            .collect();
        PartitionDoc {
            version: PARTITION_SCHEMA_VERSION,
            meta,
            assignments,
            params: ParamsDoc { gamma, omega, beta, k_max },
            scores: ScoresDoc { intra: intra_map, inter: inter_map, total },
        }
    }

    /// Bind the document back to a network, recovering the in-memory types.
    pub fn resolve(&self, net: &MultilayerNetwork) -> Result<(MultilayerPartition, ModelParams)> {
        let partition = MultilayerPartition::from_assignments(net, &self.assignments)?;
        let mut gamma = Vec::with_capacity(net.n_layers());
        let mut beta = Vec::with_capacity(net.n_layers());
        let mut k_max = Vec::with_capacity(net.n_layers());
        for layer in net.layers() {
            gamma.push(*self.params.gamma.get(&layer.token).ok_or_else(|| {
                CoalError::Data(format!("partition document misses gamma for {}", layer.token))
            })?);
            beta.push(self.params.beta.get(&layer.token).copied().unwrap_or(1.0));
            k_max.push(self.params.k_max.get(&layer.token).copied().flatten());
        }
        let mut omega = Vec::with_capacity(net.couplings().len());
        for &pair in net.couplings() {
            omega.push(self.params.omega.get(&pair_token(net, pair)).copied().unwrap_or(0.0));
        }
        let params = ModelParams { gamma, omega, beta, k_max };
        params.validate(net)?;
        Ok((partition, params))
    }
}

pub fn save_partition(path: &Path, doc: &PartitionDoc) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_partition(path: &Path) -> Result<PartitionDoc> {
    let bytes = fs::read(path)?;
    let doc: PartitionDoc = serde_json::from_slice(&bytes)?;
    if doc.version != PARTITION_SCHEMA_VERSION {
        return Err(CoalError::Data(format!(
            "partition schema version {} unsupported (expected {})",
            doc.version, PARTITION_SCHEMA_VERSION
        )));
    }
    Ok(doc)
}
