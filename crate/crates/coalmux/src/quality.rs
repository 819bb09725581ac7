//! Partition scoring.
//!
//! Two quality functions share their sufficient statistics:
//!
//! * multilayer modularity `Q` drives the maximiser: per layer,
//!   `beta_s * (W_in - gamma_s * sum_c kappa_c^2 / (4 m_s))` (half the sum of
//!   the null term over ordered vertex pairs, diagonal included), plus
//!   `omega_sr * n_same` for every coupled pair. No global normalisation.
//! * the profile log-likelihood `P(g)` drives model selection: per layer the
//!   likelihood ratio of a two-rate degree-corrected planted partition model
//!   against the undifferentiated one-rate model, plus, per coupled pair, the
//!   ratio of a label-copy process against independence. Both terms are
//!   non-negative by construction, and the monolayer model scores inter = 0.
//!
//! The two are linked: at fixed rates the likelihood orders partitions exactly
//! as `Q` does at `gamma = (theta_in - theta_out) / ln(theta_in / theta_out)`.

use crate::error::CoalError;
use crate::netmodel::{Layer, ModelParams, MultilayerNetwork, MultilayerPartition};
use crate::Result;

/// Clamp applied to the copy-probability estimate so `ln(1 - p)` stays finite.
pub const P_HAT_EPS: f64 = 1e-3;
/// Clamp applied to a vanishing rate before taking logs.
pub const THETA_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSufficientStats {
    /// Total edge weight.
    pub m: f64,
    /// Within-community edge weight.
    pub m_in: f64,
    /// Expected within weight under the configuration null: sum_c kappa_c^2 / 4m.
    pub e_in: f64,
    pub theta_in: f64,
    pub theta_out: f64,
    /// Set when the layer is empty or the partition leaves no between mass.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairStats {
    pub n_shared: u64,
    pub n_same: u64,
    pub k_pair: u32,
    pub p_hat: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreBreakdown {
    pub intra: Vec<f64>,
    pub inter: Vec<f64>,
    pub total: f64,
    pub layer_stats: Vec<LayerSufficientStats>,
    pub pair_stats: Vec<PairStats>,
}

impl ScoreBreakdown {
    pub fn intra_sum(&self) -> f64 {
        self.intra.iter().sum()
    }

    pub fn inter_sum(&self) -> f64 {
        self.inter.iter().sum()
    }
}

fn xlnx_ratio(x: f64, y: f64) -> f64 {
    // x * ln(x / y) with 0 ln 0 := 0.
    if x <= 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

// ---------------------------------------------------------------------------
// Modularity
// ---------------------------------------------------------------------------

/// Unnormalized multilayer modularity of a partition.
///
/// Weighted layers treat weights as edge multiplicities. Empty layers
/// contribute zero. Errors if the partition domain does not match the
/// network's participating pairs.
pub fn multilayer_modularity(
    net: &MultilayerNetwork,
    params: &ModelParams,
    partition: &MultilayerPartition,
) -> Result<f64> {
    params.validate(net)?;
    let mut q = 0.0;
    for (l, layer) in net.layers().iter().enumerate() {
        let m = layer.total_weight();
        if m <= 0.0 {
            continue;
        }
        let label = |v: u32| -> Result<u32> {
            partition.label(l, v).ok_or_else(|| {
                CoalError::Data(format!(
                    "partition misses ({}, {})",
                    net.registry.record(v).id,
                    layer.token
                ))
            })
        };
        let mut w_in = 0.0;
        for &(u, v, w) in layer.edges() {
            if label(u)? == label(v)? {
                w_in += w;
            }
        }
        let strengths = layer.strengths();
        let mut kappa: std::collections::HashMap<u32, f64> = Default::default();
        for &v in layer.participants() {
            *kappa.entry(label(v)?).or_insert(0.0) += strengths[&v];
        }
        let e_in: f64 = kappa.values().map(|k| k * k).sum::<f64>() / (4.0 * m);
        q += params.beta[l] * (w_in - params.gamma[l] * e_in);
    }
    for (i, &(a, b)) in net.couplings().iter().enumerate() {
        if params.omega[i] == 0.0 {
            continue;
        }
        let mut same = 0u64;
        for v in net.shared_participants(a as usize, b as usize) {
            let la = partition.label(a as usize, v);
            let lb = partition.label(b as usize, v);
            if la.is_some() && la == lb {
                same += 1;
            }
        }
        q += params.omega[i] * same as f64;
    }
    Ok(q)
}

// ---------------------------------------------------------------------------
// Layer likelihood
// ---------------------------------------------------------------------------

/// Profile log-likelihood ratio of a layer's partition against the
/// undifferentiated model, together with its sufficient statistics.
///
/// `labels` must assign a community to every participant of the layer.
pub fn intra_loglik(
    layer: &Layer,
    mut labels: impl FnMut(u32) -> Option<u32>,
) -> Result<(f64, LayerSufficientStats)> {
    if layer.edges().is_empty() {
        return Ok((
            0.0,
            LayerSufficientStats {
                m: 0.0,
                m_in: 0.0,
                e_in: 0.0,
                theta_in: 1.0,
                theta_out: 1.0,
                degenerate: true,
            },
        ));
    }
    let mut get = |v: u32| -> Result<u32> {
        labels(v).ok_or_else(|| {
            CoalError::Data(format!("layer {}: vertex index {v} has no label", layer.token))
        })
    };
    let m = layer.total_weight();
    let mut m_in = 0.0;
    for &(u, v, w) in layer.edges() {
        if get(u)? == get(v)? {
            m_in += w;
        }
    }
    let strengths = layer.strengths();
    let mut kappa: std::collections::HashMap<u32, f64> = Default::default();
    for &v in layer.participants() {
        *kappa.entry(get(v)?).or_insert(0.0) += strengths[&v];
    }
    let e_in: f64 = kappa.values().map(|k| k * k).sum::<f64>() / (4.0 * m);

    let rel = 1e-12 * m;
    if (m - e_in).abs() <= rel {
        // All degree mass in one community. Every edge is then internal; a
        // within-weight below m would be an impossible configuration.
        if (m - m_in).abs() > rel {
            return Err(CoalError::Numeric(format!(
                "layer {}: expected within weight equals m but observed within weight is {m_in} < {m}",
                layer.token
            )));
        }
        return Ok((
            0.0,
            LayerSufficientStats {
                m,
                m_in,
                e_in,
                theta_in: 1.0,
                theta_out: 1.0,
                degenerate: true,
            },
        ));
    }

    let theta_in = m_in / e_in;
    let theta_out = (m - m_in) / (m - e_in);
    let ll = (xlnx_ratio(m_in, e_in) + xlnx_ratio(m - m_in, m - e_in)).max(0.0);
    Ok((
        ll,
        LayerSufficientStats {
            m,
            m_in,
            e_in,
            theta_in,
            theta_out,
            degenerate: false,
        },
    ))
}

/// Resolution at which modularity orders partitions like the fixed-rate
/// likelihood: `(theta_in - theta_out) / (ln theta_in - ln theta_out)`, with
/// the continuous limit `theta_in` when the rates coincide. Returns the value
/// and a flag marking that a vanishing rate was clamped.
pub fn gamma_hat(stats: &LayerSufficientStats) -> (f64, bool) {
    let mut clamped = false;
    let mut t_in = stats.theta_in;
    let mut t_out = stats.theta_out;
    if t_in < THETA_EPS {
        t_in = THETA_EPS;
        clamped = true;
    }
    if t_out < THETA_EPS {
        t_out = THETA_EPS;
        clamped = true;
    }
    if (t_in - t_out).abs() < 1e-9 {
        (t_in, clamped)
    } else {
        ((t_in - t_out) / (t_in.ln() - t_out.ln()), clamped)
    }
}

// ---------------------------------------------------------------------------
// Pair likelihood
// ---------------------------------------------------------------------------

/// Likelihood ratio of the label-copy process against independence for one
/// coupled pair, from agreement counts.
///
/// The copy process over a universe of `k_pair` labels matches with
/// probability `p + (1 - p) / K`; the maximum-likelihood copy rate is
/// `p_hat = (f K - 1) / (K - 1)` for agreement fraction `f`, clamped to
/// `[0, 1 - eps]`.
pub fn inter_loglik_counts(n_shared: u64, n_same: u64, k_pair: u32) -> Result<(f64, PairStats)> {
    if k_pair < 2 {
        return Err(CoalError::Data(format!("k_pair must be at least 2, got {k_pair}")));
    }
    if n_same > n_shared {
        return Err(CoalError::Data("n_same exceeds n_shared".into()));
    }
    if n_shared == 0 {
        return Ok((0.0, PairStats { n_shared, n_same, k_pair, p_hat: 0.0 }));
    }
    let k = k_pair as f64;
    let f = n_same as f64 / n_shared as f64;
    let p_hat = ((f * k - 1.0) / (k - 1.0)).clamp(0.0, 1.0 - P_HAT_EPS);
    let ll = (n_same as f64 * (1.0 - p_hat + p_hat * k).ln()
        + (n_shared - n_same) as f64 * (1.0 - p_hat).ln())
    .max(0.0);
    Ok((ll, PairStats { n_shared, n_same, k_pair, p_hat }))
}

/// Agreement counts of a coupled pair under a partition.
pub fn pair_agreement(
    net: &MultilayerNetwork,
    partition: &MultilayerPartition,
    pair: (u32, u32),
) -> (u64, u64) {
    let (a, b) = (pair.0 as usize, pair.1 as usize);
    let mut shared = 0u64;
    let mut same = 0u64;
    for v in net.shared_participants(a, b) {
        shared += 1;
        if partition.label(a, v) == partition.label(b, v) {
            same += 1;
        }
    }
    (shared, same)
}

/// Default label-universe size for a coupled pair: distinct labels appearing
/// in the two layers combined, floored at 2 and capped at the larger of the
/// two layers' K_max when configured.
pub fn default_k_pair(
    partition: &MultilayerPartition,
    pair: (u32, u32),
    k_max: &[Option<u32>],
) -> u32 {
    let mut labels = partition.distinct_labels_in_layer(pair.0 as usize);
    labels.extend(partition.distinct_labels_in_layer(pair.1 as usize));
    let mut k = labels.len().max(2) as u32;
    let cap = match (k_max[pair.0 as usize], k_max[pair.1 as usize]) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    if let Some(c) = cap {
        k = k.min(c.max(2));
    }
    k
}

/// Likelihood ratio for one coupled pair of a partition.
pub fn inter_loglik(
    net: &MultilayerNetwork,
    partition: &MultilayerPartition,
    pair: (u32, u32),
    k_pair: u32,
) -> Result<(f64, PairStats)> {
    let (shared, same) = pair_agreement(net, partition, pair);
    inter_loglik_counts(shared, same, k_pair)
}

// ---------------------------------------------------------------------------
// Coupling parameter bridge
// ---------------------------------------------------------------------------

/// Coupling strength equivalent to copy probability `p` over `k` labels:
/// `omega = ln((1 - p + pK) / (1 - p))`. Strictly increasing in `p`.
pub fn omega_from_p(p: f64, k: u32) -> f64 {
    assert!((0.0..1.0).contains(&p), "p must lie in [0, 1)");
    assert!(k >= 2, "k must be at least 2");
    ((1.0 - p + p * k as f64) / (1.0 - p)).ln()
}

/// Inverse of [`omega_from_p`].
pub fn p_from_omega(omega: f64, k: u32) -> f64 {
    assert!(omega >= 0.0, "omega must be non-negative");
    assert!(k >= 2, "k must be at least 2");
    let e = omega.exp();
    (e - 1.0) / (e + k as f64 - 1.0)
}

// ---------------------------------------------------------------------------
// Totals
// ---------------------------------------------------------------------------

/// Full profile log-likelihood breakdown with an explicit per-layer cap for
/// the pair label universes.
pub fn total_loglik_with(
    net: &MultilayerNetwork,
    partition: &MultilayerPartition,
    k_max: &[Option<u32>],
) -> Result<ScoreBreakdown> {
    let mut intra = Vec::with_capacity(net.n_layers());
    let mut layer_stats = Vec::with_capacity(net.n_layers());
    for (l, layer) in net.layers().iter().enumerate() {
        let (ll, stats) = intra_loglik(layer, |v| partition.label(l, v))?;
        intra.push(ll);
        layer_stats.push(stats);
    }
    let mut inter = Vec::with_capacity(net.couplings().len());
    let mut pair_stats = Vec::with_capacity(net.couplings().len());
    for &pair in net.couplings() {
        let k = default_k_pair(partition, pair, k_max);
        let (ll, stats) = inter_loglik(net, partition, pair, k)?;
        inter.push(ll);
        pair_stats.push(stats);
    }
    let total = intra.iter().sum::<f64>() + inter.iter().sum::<f64>();
    Ok(ScoreBreakdown { intra, inter, total, layer_stats, pair_stats })
}

/// Breakdown with uncapped pair label universes.
pub fn total_loglik(net: &MultilayerNetwork, partition: &MultilayerPartition) -> Result<ScoreBreakdown> {
    let caps = vec![None; net.n_layers()];
    total_loglik_with(net, partition, &caps)
}

/// Re-estimate `gamma` and `omega` from a partition, keeping `beta` and
/// `k_max`. Degenerate layers fall back to `gamma = 1`.
pub fn update_params_from_partition(
    net: &MultilayerNetwork,
    partition: &MultilayerPartition,
    prior: &ModelParams,
) -> Result<ModelParams> {
    let breakdown = total_loglik_with(net, partition, &prior.k_max)?;
    let mut gamma = Vec::with_capacity(net.n_layers());
    for stats in &breakdown.layer_stats {
        if stats.degenerate {
            gamma.push(1.0);
        } else {
            gamma.push(gamma_hat(stats).0);
        }
    }
    let omega = breakdown
        .pair_stats
        .iter()
        .map(|ps| omega_from_p(ps.p_hat, ps.k_pair))
        .collect();
    Ok(ModelParams {
        gamma,
        omega,
        beta: prior.beta.clone(),
        k_max: prior.k_max.clone(),
    })
}
