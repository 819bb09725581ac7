//! Command-line front end. Every subcommand is a deterministic function of
//! its inputs and seed; outputs carry metadata blocks (tool version, the
//! invoked command, seeds) and are written atomically.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 numeric degeneracy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::backbone;
use crate::error::CoalError;
use crate::netmodel::{
    self, CouplingSpec, ModelParams, MultilayerNetwork, MultilayerPartition, PartitionDoc,
};
use crate::pipeline::{self, SelectionConfig, SelectionMode};
use crate::quality::{total_loglik_with, ScoreBreakdown};
use crate::report;
use crate::synth;
use crate::Result;

#[derive(Parser)]
#[command(
    name = "coalmux",
    version,
    about = "Coalition inference in multilayer networks",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Directory holding vertices.csv, layers.csv, edges.csv and optionally
    /// participation.csv.
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    vertices: Option<PathBuf>,
    #[arg(long)]
    layers: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    participation: Option<PathBuf>,
    /// Coupling topology: all-pairs, temporal, or custom:<pairs.csv>.
    #[arg(long, default_value = "all-pairs")]
    coupling: String,
}

impl NetArgs {
    fn coupling_spec(&self) -> Result<CouplingSpec> {
        if self.coupling == "all-pairs" {
            Ok(CouplingSpec::AllPairs)
        } else if self.coupling == "temporal" {
            Ok(CouplingSpec::TemporalAdjacent)
        } else if let Some(path) = self.coupling.strip_prefix("custom:") {
            let mut rdr = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .from_path(path)
                .map_err(|e| CoalError::Data(format!("{path}: {e}")))?;
            let mut pairs = Vec::new();
            for row in rdr.records() {
                let row = row.map_err(|e| CoalError::Data(format!("{path}: {e}")))?;
                if row.len() != 2 {
                    return Err(CoalError::Data(format!("{path}: expected two columns")));
                }
                pairs.push((row[0].trim().to_string(), row[1].trim().to_string()));
            }
            Ok(CouplingSpec::Custom(pairs))
        } else {
            Err(CoalError::Data(format!(
                "unknown coupling `{}` (expected all-pairs, temporal, custom:<file>)",
                self.coupling
            )))
        }
    }

    fn load(&self) -> Result<MultilayerNetwork> {
        let spec = self.coupling_spec()?;
        if let Some(dir) = &self.net {
            let (v, l, e, p) = netmodel::network_paths(dir);
            let vertices = self.vertices.clone().unwrap_or(v);
            let layers = self.layers.clone().unwrap_or(l);
            let edges = self.edges.clone().unwrap_or(e);
            let participation = self.participation.clone().or(p);
            netmodel::load_network_with(&vertices, &layers, &edges, participation.as_deref(), &spec)
        } else {
            let (v, l, e) = match (&self.vertices, &self.layers, &self.edges) {
                (Some(v), Some(l), Some(e)) => (v, l, e),
                _ => {
                    return Err(CoalError::Data(
                        "provide --net DIR or all of --vertices/--layers/--edges".into(),
                    ))
                }
            };
            netmodel::load_network_with(v, l, e, self.participation.as_deref(), &spec)
        }
    }
}

#[derive(Args, Clone)]
struct SelectArgs {
    /// Stochastic maximiser runs reconciled per evaluation.
    #[arg(long, default_value_t = 10)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-layer community cap.
    #[arg(long)]
    kmax: Option<u32>,
    /// Comma-separated resolution grid.
    #[arg(long, default_value = "0.6,0.8,1.0,1.2,1.4")]
    gamma_grid: String,
    /// Comma-separated coupling grid.
    #[arg(long, default_value = "0,0.25,0.5,1.0,2.0")]
    omega_grid: String,
    #[arg(long, default_value_t = 0.05)]
    step_gamma: f64,
    #[arg(long, default_value_t = 0.05)]
    step_omega: f64,
    #[arg(long, default_value_t = 50)]
    max_passes: u32,
}

impl SelectArgs {
    fn config(&self, mode: SelectionMode) -> Result<SelectionConfig> {
        Ok(SelectionConfig {
            gamma_grid: parse_grid(&self.gamma_grid)?,
            omega_grid: parse_grid(&self.omega_grid)?,
            step_gamma: self.step_gamma,
            step_omega: self.step_omega,
            runs_per_eval: self.runs,
            max_passes: self.max_passes,
            base_seed: self.seed,
            k_max: match self.kmax {
                Some(k) => vec![Some(k)],
                None => Vec::new(),
            },
            mode,
        })
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CoalError::Data(format!("bad grid value `{t}`")))
        })
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-structure benchmark network.
    Synth {
        /// Recipe JSON; omit to use the built-in case preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Write the built-in case preset recipe and use it.
        #[arg(long, default_value_t = false)]
        preset: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep only edges significant against the weight-redistribution null.
    Backbone {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bypass filtering; copy the network and report p-values only.
        #[arg(long, default_value_t = false)]
        keep_all: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the maximiser at fixed uniform parameters.
    Infer {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        omega: f64,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Model selection by coordinate ascent on the profile log-likelihood.
    Select {
        #[command(flatten)]
        net: NetArgs,
        /// multilayer or monolayer.
        #[arg(long, default_value = "multilayer")]
        mode: String,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the score breakdown of a stored partition.
    Score {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        partition: PathBuf,
    },
    /// Partition and polarization metrics tables.
    Metrics {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, default_value_t = 100)]
        rewires: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full report: scores, coalitions, participation, RMI grid, AEI,
    /// degrees.
    Report {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        partition: PathBuf,
        /// Baseline partition (e.g. the monolayer selection) for the fit
        /// comparison.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        rewires: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

const AEI_CONVENTION: &str =
    "aei: (null_mean - ei_obs)/(null_mean + 1) against a degree-preserving rewired null";

fn meta_lines(seed: Option<u64>) -> Vec<String> {
    let argv: Vec<String> = std::env::args().collect();
    let mut lines = vec![
        format!("coalmux {}", crate::VERSION),
        format!("command: {}", argv.join(" ")),
    ];
    if let Some(s) = seed {
        lines.push(format!("seed: {s}"));
    }
    lines
}

fn doc_meta(seed: Option<u64>) -> BTreeMap<String, String> {
    let argv: Vec<String> = std::env::args().collect();
    let mut meta = BTreeMap::new();
    meta.insert("tool".into(), format!("coalmux {}", crate::VERSION));
    meta.insert("command".into(), argv.join(" "));
    meta.insert(
        "conventions".into(),
        "unnormalized multilayer modularity; profile log-likelihood ratios in nats".into(),
    );
    if let Some(s) = seed {
        meta.insert("seed".into(), s.to_string());
    }
    meta
}

fn write_with_meta(path: &Path, meta: &[String], body: &str) -> Result<()> {
    let mut bytes = Vec::new();
    for line in meta {
        bytes.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    bytes.extend_from_slice(body.as_bytes());
    netmodel::write_atomic(path, &bytes)
}

fn save_partition_with_meta(
    path: &Path,
    net: &MultilayerNetwork,
    partition: &MultilayerPartition,
    params: &ModelParams,
    scores: &ScoreBreakdown,
    seed: u64,
) -> Result<()> {
    let doc = PartitionDoc::build(
        net,
        partition,
        params,
        &scores.intra,
        &scores.inter,
        scores.total,
        Some(doc_meta(Some(seed))),
    );
    netmodel::save_partition(path, &doc)
}

fn resolve_partition(net: &MultilayerNetwork, path: &Path) -> Result<(MultilayerPartition, ModelParams)> {
    netmodel::load_partition(path)?.resolve(net)
}

fn run_command(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { spec, preset, seed, out } => {
            let mut recipe = match (&spec, preset) {
                (Some(path), _) => {
                    let bytes = std::fs::read(path)?;
                    serde_json::from_slice::<synth::SyntheticSpec>(&bytes)?
                }
                (None, _) => synth::case_preset(),
            };
            if let Some(s) = seed {
                recipe.seed = s;
            }
            let (net, truth) = synth::generate(&recipe)?;
            let meta = meta_lines(Some(recipe.seed));
            netmodel::write_network_dir(&net, &out, &meta)?;
            // Ground truth with its scores under default parameters.
            let params = ModelParams::uniform(&net, 1.0, 0.0).with_k_max(Some(2 * recipe.k));
            let scores = total_loglik_with(&net, &truth, &params.k_max)?;
            save_partition_with_meta(&out.join("truth.json"), &net, &truth, &params, &scores, recipe.seed)?;
            let spec_bytes = serde_json::to_vec_pretty(&recipe)?;
            netmodel::write_atomic(&out.join("spec.json"), &spec_bytes)?;
            Ok(())
        }
        Command::Backbone { net, alpha, keep_all, out } => {
            let network = net.load()?;
            let mut meta = meta_lines(None);
            meta.push(format!("alpha: {alpha}"));
            meta.push(format!("null: {}", backbone::NULL_MODEL));
            if keep_all {
                netmodel::write_network_dir(&network, &out, &meta)?;
                let results: Vec<backbone::BackboneResult> = network
                    .layers()
                    .iter()
                    .map(|l| backbone::filter_layer(l, 0.5).map(|(_, mut r)| {
                        // Report p-values but keep everything.
                        for e in r.edges.iter_mut() {
                            e.4 = true;
                        }
                        r.alpha = 1.0;
                        r
                    }))
                    .collect::<Result<_>>()?;
                write_with_meta(&out.join("pvalues.csv"), &meta, &report::pvalues_csv(&network, &results))?;
                return Ok(());
            }
            let (filtered, results) = backbone::filter_network(&network, alpha)?;
            netmodel::write_network_dir(&filtered, &out, &meta)?;
            write_with_meta(&out.join("pvalues.csv"), &meta, &report::pvalues_csv(&network, &results))?;
            let mut density = String::from("layer_id,density_before,density_after,kept,total\n");
            for r in &results {
                density.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.layer_token,
                    r.density_before,
                    r.density_after,
                    r.kept_count(),
                    r.edges.len()
                ));
            }
            write_with_meta(&out.join("density.csv"), &meta, &density)?;
            Ok(())
        }
        Command::Infer { net, gamma, omega, select, out } => {
            let network = net.load()?;
            let config = select.config(SelectionMode::Multilayer)?;
            let caps = config.resolve_k_max(&network)?;
            let mut params = ModelParams::uniform(&network, gamma, omega);
            params.k_max = caps;
            let (partition, scores) = pipeline::evaluate(&network, &params, &config, 0)?;
            std::fs::create_dir_all(&out)?;
            save_partition_with_meta(&out.join("partition.json"), &network, &partition, &params, &scores, config.base_seed)?;
            println!("{}", report::score_table(&network, &scores));
            Ok(())
        }
        Command::Select { net, mode, select, out } => {
            let network = net.load()?;
            let mode = match mode.as_str() {
                "multilayer" => SelectionMode::Multilayer,
                "monolayer" => SelectionMode::Monolayer,
                other => {
                    return Err(CoalError::Data(format!(
                        "unknown mode `{other}` (expected multilayer or monolayer)"
                    )))
                }
            };
            let config = select.config(mode)?;
            std::fs::create_dir_all(&out)?;
            let meta = doc_meta(Some(config.base_seed));
            match mode {
                SelectionMode::Multilayer => {
                    let trace = pipeline::coordinate_ascent(&network, &config)?;
                    write_trace(&out.join("trace.jsonl"), &meta, &trace.trials, &trace.scores)?;
                    save_partition_with_meta(
                        &out.join("partition.json"),
                        &network,
                        &trace.partition,
                        &trace.params,
                        &trace.scores,
                        config.base_seed,
                    )?;
                    println!("{}", report::score_table(&network, &trace.scores));
                }
                SelectionMode::Monolayer => {
                    let (params, partition, scores, traces) =
                        pipeline::run_monolayer_baseline(&network, &config)?;
                    let trials: Vec<pipeline::TrialRecord> =
                        traces.into_iter().flat_map(|t| t.trials).collect();
                    write_trace(&out.join("trace.jsonl"), &meta, &trials, &scores)?;
                    save_partition_with_meta(
                        &out.join("partition.json"),
                        &network,
                        &partition,
                        &params,
                        &scores,
                        config.base_seed,
                    )?;
                    println!("{}", report::score_table(&network, &scores));
                }
            }
            Ok(())
        }
        Command::Score { net, partition } => {
            let network = net.load()?;
            let (part, params) = resolve_partition(&network, &partition)?;
            let scores = total_loglik_with(&network, &part, &params.k_max)?;
            println!("{}", report::score_table(&network, &scores));
            Ok(())
        }
        Command::Metrics { net, partition, rewires, seed, out } => {
            let network = net.load()?;
            let (part, _) = resolve_partition(&network, &partition)?;
            let mut meta = meta_lines(Some(seed));
            meta.push(AEI_CONVENTION.into());
            std::fs::create_dir_all(&out)?;
            write_with_meta(&out.join("rmi_matrix.csv"), &meta, &report::rmi_matrix_csv(&network, &part)?)?;
            write_with_meta(&out.join("aei.csv"), &meta, &report::aei_csv(&network, &part, rewires, seed))?;
            write_with_meta(&out.join("participation.csv"), &meta, &report::participation_csv(&network, &part))?;
            write_with_meta(&out.join("power_shares.csv"), &meta, &report::power_shares_csv(&network, &part))?;
            if network.n_layers() >= 2 {
                write_with_meta(&out.join("layer_similarity.csv"), &meta, &report::layer_similarity_csv(&network)?)?;
            }
            Ok(())
        }
        Command::Report { net, partition, baseline, rewires, seed, out } => {
            let network = net.load()?;
            let (part, params) = resolve_partition(&network, &partition)?;
            let scores = total_loglik_with(&network, &part, &params.k_max)?;
            let baseline_total = match baseline {
                Some(path) => Some(netmodel::load_partition(&path)?.scores.total),
                None => None,
            };
            let mut meta = meta_lines(Some(seed));
            meta.push(AEI_CONVENTION.into());
            std::fs::create_dir_all(&out)?;
            let mut scores_doc = report::scores_json(&network, &scores, baseline_total);
            scores_doc["meta"] = serde_json::json!(doc_meta(Some(seed)));
            let mut bytes = serde_json::to_vec_pretty(&scores_doc)?;
            bytes.push(b'\n');
            netmodel::write_atomic(&out.join("scores.json"), &bytes)?;
            write_with_meta(&out.join("coalitions.csv"), &meta, &report::coalitions_csv(&network, &part))?;
            write_with_meta(&out.join("participation.csv"), &meta, &report::participation_csv(&network, &part))?;
            write_with_meta(&out.join("rmi_matrix.csv"), &meta, &report::rmi_matrix_csv(&network, &part)?)?;
            write_with_meta(&out.join("aei.csv"), &meta, &report::aei_csv(&network, &part, rewires, seed))?;
            write_with_meta(&out.join("degrees.csv"), &meta, &report::degrees_csv(&network, Some(&part)))?;
            Ok(())
        }
    }
}

fn write_trace(
    path: &Path,
    meta: &BTreeMap<String, String>,
    trials: &[pipeline::TrialRecord],
    final_scores: &ScoreBreakdown,
) -> Result<()> {
    let mut body = String::new();
    body.push_str(&serde_json::to_string(&serde_json::json!({ "meta": meta }))?);
    body.push('\n');
    for t in trials {
        body.push_str(&serde_json::to_string(&serde_json::json!({
            "eval_index": t.eval_index,
            "stage": t.stage,
            "gamma": t.gamma,
            "omega": t.omega,
            "pg": t.pg,
            "accepted": t.accepted,
        }))?);
        body.push('\n');
    }
    body.push_str(&serde_json::to_string(&serde_json::json!({
        "final": { "total": final_scores.total }
    }))?);
    body.push('\n');
    netmodel::write_atomic(path, body.as_bytes())
}

/// Entry point: parse, dispatch, map errors to exit codes with a
/// machine-readable record on stderr.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            let record = serde_json::json!({
                "error": { "code": err.exit_code(), "message": err.to_string() }
            });
            eprintln!("{record}");
            err.exit_code()
        }
    }
}
