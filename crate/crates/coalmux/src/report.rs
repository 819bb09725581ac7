//! Plot-ready report tables: score breakdowns, coalition composition,
//! participation rates, pairwise RMI grids, AEI polarization entries, and
//! per-vertex degrees. All emitters return CSV/JSON bodies as strings; the
//! CLI prepends metadata comment lines and writes atomically.

use std::fmt::Write as _;

use crate::metrics;
use crate::netmodel::{pair_token, MultilayerNetwork, MultilayerPartition};
use crate::quality::ScoreBreakdown;
use crate::Result;

/// Human-readable breakdown table for the `score` subcommand.
pub fn score_table(net: &MultilayerNetwork, scores: &ScoreBreakdown) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>14}", "layer", "intra");
    for (l, layer) in net.layers().iter().enumerate() {
        let _ = writeln!(out, "{:<16} {:>14.6}", layer.token, scores.intra[l]);
    }
    let _ = writeln!(out, "{:<16} {:>14}", "pair", "inter");
    for (i, &pair) in net.couplings().iter().enumerate() {
        let _ = writeln!(out, "{:<16} {:>14.6}", pair_token(net, pair), scores.inter[i]);
    }
    let _ = writeln!(out, "{:<16} {:>14.6}", "intra total", scores.intra_sum());
    let _ = writeln!(out, "{:<16} {:>14.6}", "inter total", scores.inter_sum());
    let _ = writeln!(out, "{:<16} {:>14.6}", "total", scores.total);
    out
}

/// Score summary document; with a baseline total it carries the fit delta and
/// the log-likelihood-ratio exponent (`delta` in nats, also as a power of 10).
pub fn scores_json(
    net: &MultilayerNetwork,
    scores: &ScoreBreakdown,
    baseline_total: Option<f64>,
) -> serde_json::Value {
    let intra: serde_json::Map<String, serde_json::Value> = net
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| (layer.token.clone(), serde_json::json!(scores.intra[l])))
        .collect();
    let inter: serde_json::Map<String, serde_json::Value> = net
        .couplings()
        .iter()
        .enumerate()
        .map(|(i, &pair)| (pair_token(net, pair), serde_json::json!(scores.inter[i])))
        .collect();
    let mut doc = serde_json::json!({
        "intra": intra,
        "inter": inter,
        "intra_total": scores.intra_sum(),
        "inter_total": scores.inter_sum(),
        "total": scores.total,
    });
    if let Some(base) = baseline_total {
        let delta = scores.total - base;
        let log10_ratio = delta / std::f64::consts::LN_10;
        doc["baseline_total"] = serde_json::json!(base);
        doc["delta"] = serde_json::json!(delta);
        doc["log10_likelihood_ratio"] = serde_json::json!(log10_ratio);
        doc["summary"] = serde_json::json!(format!(
            "delta={delta:.3}, likelihood ratio e^{delta:.1} ~ 10^{log10_ratio:.1}"
        ));
    }
    doc
}

fn push_csv_row(out: &mut String, fields: &[String]) {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains(',') || f.contains('"') || f.contains('\n') {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    out.push_str(&escaped.join(","));
    out.push('\n');
}

/// Coalition composition per layer: active member counts, member shares, and
/// reputational-power shares.
pub fn coalitions_csv(net: &MultilayerNetwork, partition: &MultilayerPartition) -> String {
    let report = metrics::participation_and_power(net, partition);
    let mut out = String::from("layer_id,community,members,member_share,power,power_share\n");
    for row in &report.coalitions {
        push_csv_row(
            &mut out,
            &[
                row.layer.clone(),
                row.label.to_string(),
                row.members.to_string(),
                format!("{}", row.member_share),
                format!("{}", row.power),
                row.power_share.map(|p| format!("{p}")).unwrap_or_default(),
            ],
        );
    }
    out
}

pub fn power_shares_csv(net: &MultilayerNetwork, partition: &MultilayerPartition) -> String {
    let report = metrics::participation_and_power(net, partition);
    let mut out = String::from("layer_id,community,power_share\n");
    for row in &report.coalitions {
        push_csv_row(
            &mut out,
            &[
                row.layer.clone(),
                row.label.to_string(),
                row.power_share.map(|p| format!("{p}")).unwrap_or_default(),
            ],
        );
    }
    out
}

pub fn participation_csv(net: &MultilayerNetwork, partition: &MultilayerPartition) -> String {
    let report = metrics::participation_and_power(net, partition);
    let mut out = String::from("layer_id,active,registry_size,rate\n");
    for row in &report.layers {
        push_csv_row(
            &mut out,
            &[
                row.layer.clone(),
                row.active.to_string(),
                row.registry_size.to_string(),
                format!("{}", row.rate),
            ],
        );
    }
    out
}

/// Pairwise RMI grid over layers (raw and normalized), mirroring a
/// context-similarity matrix; undefined entries stay empty.
pub fn rmi_matrix_csv(net: &MultilayerNetwork, partition: &MultilayerPartition) -> Result<String> {
    let mut out = String::from("layer_a,layer_b,rmi,rmi_normalized,approximate\n");
    for a in 0..net.n_layers() {
        for b in 0..net.n_layers() {
            let (raw, norm, approx) = if net.shared_participants(a, b).is_empty() {
                (String::new(), String::new(), String::new())
            } else {
                let r = metrics::rmi_layers(net, partition, a, b, false)?;
                let n = metrics::rmi_layers(net, partition, a, b, true)?;
                (
                    format!("{}", r.value),
                    format!("{}", n.value),
                    format!("{}", r.approximate || n.approximate),
                )
            };
            push_csv_row(
                &mut out,
                &[
                    net.layer(a).token.clone(),
                    net.layer(b).token.clone(),
                    raw,
                    norm,
                    approx,
                ],
            );
        }
    }
    Ok(out)
}

/// AEI rows for every community pair in every layer; degenerate pairs are
/// skipped.
pub fn aei_csv(
    net: &MultilayerNetwork,
    partition: &MultilayerPartition,
    rewires: u32,
    seed: u64,
) -> String {
    let mut out =
        String::from("layer_id,community_a,community_b,m_int,m_ext,ei_obs,ei_null_mean,ei_null_sd,aei\n");
    for l in 0..net.n_layers() {
        for e in metrics::aei_all_pairs(net, partition, l, rewires, seed) {
            push_csv_row(
                &mut out,
                &[
                    e.layer.clone(),
                    e.community_a.to_string(),
                    e.community_b.to_string(),
                    e.m_int.to_string(),
                    e.m_ext.to_string(),
                    format!("{}", e.ei_obs),
                    format!("{}", e.ei_null_mean),
                    format!("{}", e.ei_null_sd),
                    format!("{}", e.aei),
                ],
            );
        }
    }
    out
}

/// Layer-similarity matrices (edge Jaccard, degree Kendall tau-b).
pub fn layer_similarity_csv(net: &MultilayerNetwork) -> Result<String> {
    let sim = metrics::layer_similarity(net)?;
    let mut out = String::from("layer_a,layer_b,edge_jaccard,degree_kendall\n");
    for a in 0..net.n_layers() {
        for b in 0..net.n_layers() {
            push_csv_row(
                &mut out,
                &[
                    net.layer(a).token.clone(),
                    net.layer(b).token.clone(),
                    sim.jaccard[a][b].map(|x| format!("{x}")).unwrap_or_default(),
                    sim.kendall[a][b].map(|x| format!("{x}")).unwrap_or_default(),
                ],
            );
        }
    }
    Ok(out)
}

/// Per-vertex degree by layer, with community labels: the plot-ready input
/// for actor-size displays.
pub fn degrees_csv(net: &MultilayerNetwork, partition: Option<&MultilayerPartition>) -> String {
    let mut out = String::from("vertex_id,layer_id,degree,strength,community\n");
    for (l, layer) in net.layers().iter().enumerate() {
        let strengths = layer.strengths();
        let mut degree: std::collections::HashMap<u32, u32> = Default::default();
        for &(u, v, _) in layer.edges() {
            *degree.entry(u).or_insert(0) += 1;
            *degree.entry(v).or_insert(0) += 1;
        }
        for &v in layer.participants() {
            push_csv_row(
                &mut out,
                &[
                    net.registry.record(v).id.clone(),
                    layer.token.clone(),
                    degree.get(&v).copied().unwrap_or(0).to_string(),
                    format!("{}", strengths[&v]),
                    partition
                        .and_then(|p| p.label(l, v))
                        .map(|c| c.to_string())
                        .unwrap_or_default(),
                ],
            );
        }
    }
    out
}

/// Backbone diagnostics: one row per original edge with its p-value and
/// keep decision.
pub fn pvalues_csv(net: &MultilayerNetwork, results: &[crate::backbone::BackboneResult]) -> String {
    let mut out = String::from("layer_id,source,target,weight,pvalue,kept\n");
    for res in results {
        for &(u, v, w, p, kept) in &res.edges {
            push_csv_row(
                &mut out,
                &[
                    res.layer_token.clone(),
                    net.registry.record(u).id.clone(),
                    net.registry.record(v).id.clone(),
                    format!("{w}"),
                    format!("{p}"),
                    kept.to_string(),
                ],
            );
        }
    }
    out
}
