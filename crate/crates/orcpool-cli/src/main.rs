//! Command-line front end for curvature-driven graph coarsening:
//! generate benchmark graphs, score edge curvature, run the discrete
//! flow, pool, evaluate partitions, verify the closed-form clique
//! family, and emit tidy plot data.
//!
//! Exit codes: 0 on success, 1 on validation problems (bad flags,
//! missing files, schema violations), 2 on numeric failures. Errors
//! print a single machine-parsable line `error[validation]: …` or
//! `error[numeric]: …` to stderr. Every file-writing run drops a
//! `<stem>.config.json` echo of its invocation next to the output;
//! timestamps appear only there, so reruns with the same seed produce
//! byte-identical outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use orcpool::curvature::{orc_all_with_options, CurvatureMethod, SinkhornOptions};
use orcpool::flow::{ricci_flow, FlowOptions, Normalization};
use orcpool::graph::{build_graph, generate_dumbbell, generate_gab, generate_sbm, Graph};
use orcpool::io;
use orcpool::metrics::{modularity_report, nmi_report, ModularityConvention, NmiVariant};
use orcpool::pooling::{pool, FeatureMode, PoolConfig, PoolMode};
use orcpool::theory::{gab_modularity_series, verify_eigenstructure, ClaimCheck, SeriesSource};
use orcpool::{Error, Result};

#[derive(Parser)]
#[command(
    name = "orcpool",
    version,
    about = "Curvature-driven coarsening of weighted graphs",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark graph and write it as JSON.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Score the curvature of every edge and write a CSV table.
    Curvature {
        /// Input graph (.json schema or u,v[,w] edge list).
        #[arg(short, long)]
        input: PathBuf,
        /// Optional node-attribute CSV to attach (one row per node).
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// Output curvature CSV.
        #[arg(short, long)]
        output: PathBuf,
        /// Curvature back end.
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Laziness parameter of the neighborhood measures.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Worker threads for the per-edge pass.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Entropic regularization (sinkhorn back end only).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Evolve edge weights by the discrete curvature flow.
    Flow {
        /// Input graph (.json schema or u,v[,w] edge list).
        #[arg(short, long)]
        input: PathBuf,
        /// Optional node-attribute CSV to attach (one row per node).
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// Output graph JSON with the evolved weights.
        #[arg(short, long)]
        output: PathBuf,
        /// Number of flow iterations.
        #[arg(long, default_value_t = 4)]
        iters: usize,
        /// Curvature back end driving the flow.
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Laziness parameter of the neighborhood measures.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Worker threads for the per-edge curvature pass.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Entropic regularization (sinkhorn back end only).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Post-step weight rescaling.
        #[arg(long, value_enum, default_value_t = NormalizationArg::Sum)]
        normalization: NormalizationArg,
        /// Approximate the ground distance by the current edge weight
        /// instead of re-solving shortest paths each step.
        #[arg(long)]
        approx_distances: bool,
        /// Also write the per-iteration weight history (t,u,v,w CSV).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Coarsen a graph: flow, select supernodes, reduce and connect.
    Pool {
        /// Input graph (.json schema or u,v[,w] edge list).
        #[arg(short, long)]
        input: PathBuf,
        /// Optional node-attribute CSV to attach (one row per node).
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// Output coarse-graph JSON (graph schema plus provenance).
        #[arg(short, long)]
        output: PathBuf,
        /// Number of supernodes.
        #[arg(short, long)]
        k: usize,
        /// Flow iterations before selection.
        #[arg(long, default_value_t = 4)]
        iters: usize,
        /// Selection solver.
        #[arg(long, value_enum, default_value_t = ModeArg::Spectral)]
        mode: ModeArg,
        /// Seed for selection randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// k-means restarts (spectral mode).
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// Training epochs (trained mode).
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        /// Learning rate (trained mode).
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Feature construction (trained mode).
        #[arg(long, value_enum, default_value_t = FeaturesArg::Auto)]
        features: FeaturesArg,
        /// Curvature back end driving the flow.
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Laziness parameter of the neighborhood measures.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Worker threads for the per-edge curvature pass.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Entropic regularization (sinkhorn back end only).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also write the node→cluster assignment CSV.
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
    /// Score a partition: normalized mutual information or modularity.
    Eval {
        /// Which metric to compute.
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Graph input (modularity only).
        #[arg(short, long, required_if_eq("metric", "modularity"))]
        input: Option<PathBuf>,
        /// Partition CSV to score against the graph (modularity only).
        #[arg(long, required_if_eq("metric", "modularity"))]
        partition: Option<PathBuf>,
        /// Predicted partition CSV (nmi only).
        #[arg(long, required_if_eq("metric", "nmi"))]
        pred: Option<PathBuf>,
        /// Reference partition: CSV, or a graph JSON carrying labels
        /// (nmi only).
        #[arg(long, required_if_eq("metric", "nmi"))]
        truth: Option<PathBuf>,
        /// Mutual-information normalization.
        #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
        variant: VariantArg,
        /// Modularity pair-counting convention.
        #[arg(long, value_enum, default_value_t = ConventionArg::Ordered)]
        convention: ConventionArg,
        /// Write the JSON report here as well as to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the closed-form claims for a generated family.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Rewrite a history or series CSV as tidy t,key,value plot data.
    PlotData {
        /// Input CSV: t,u,v,w history, t,Q series, or t,key,value.
        #[arg(short, long)]
        input: PathBuf,
        /// Output tidy CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Hub-linked clique family: b cliques of size a plus per-clique
    /// hubs in a central clique. Writes planted labels with the graph.
    Gab {
        /// Clique size parameter (a ≥ b).
        #[arg(long)]
        a: usize,
        /// Number of cliques (b ≥ 2).
        #[arg(long)]
        b: usize,
        /// Output graph JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Stochastic block model with planted blocks.
    Sbm {
        /// Block sizes, comma separated (e.g. 25,25).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Vec<usize>,
        /// Within-block edge probability.
        #[arg(long)]
        p_in: f64,
        /// Between-block edge probability.
        #[arg(long)]
        p_out: f64,
        /// Seed for edge sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output graph JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Two cliques joined by bridge edges.
    Dumbbell {
        /// Nodes per clique.
        #[arg(long)]
        clique_size: usize,
        /// Number of bridge edges.
        #[arg(long, default_value_t = 1)]
        bridges: usize,
        /// Output graph JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyTarget {
    /// Spectral and modularity claims of the hub-linked clique family.
    Gab {
        /// Clique size parameter (a ≥ b).
        #[arg(long)]
        a: usize,
        /// Number of cliques (b ≥ 2).
        #[arg(long)]
        b: usize,
        /// Length of the analytic modularity series to check.
        #[arg(long, default_value_t = 10)]
        iters: usize,
        /// Write the JSON report here as well as to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the analytic modularity series as t,Q CSV.
        #[arg(long)]
        series: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Sinkhorn,
    Combinatorial,
}

impl From<MethodArg> for CurvatureMethod {
    fn from(m: MethodArg) -> CurvatureMethod {
        match m {
            MethodArg::Exact => CurvatureMethod::Exact,
            MethodArg::Sinkhorn => CurvatureMethod::Sinkhorn,
            MethodArg::Combinatorial => CurvatureMethod::Combinatorial,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum NormalizationArg {
    Sum,
    Max,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Spectral,
    Trained,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FeaturesArg {
    Auto,
    Identity,
    Constant,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Nmi,
    Modularity,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Standard,
    ConditionalEntropy,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    Ordered,
    Unordered,
}

#[derive(Serialize)]
struct ConfigEcho {
    command: String,
    argv: Vec<String>,
    unix_time_seconds: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    a: usize,
    b: usize,
    eigenvalues: [f64; 3],
    claims: Vec<ClaimCheck>,
    modularity_series: Vec<f64>,
    all_passed: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ORCPOOL_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let first = e
                    .to_string()
                    .lines()
                    .next()
                    .unwrap_or("bad arguments")
                    .to_string();
                eprintln!("error[validation]: {}", first);
                eprint!("{}", e);
                std::process::exit(1);
            }
            // --help / --version land here.
            e.print().expect("stderr is writable");
            std::process::exit(0);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            let (tag, code) = if e.is_validation() {
                ("validation", 1)
            } else {
                ("numeric", 2)
            };
            let line = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {}", tag, line);
            std::process::exit(code);
        }
    }
}

fn load_graph(path: &Path, attributes: Option<&Path>) -> Result<Graph> {
    let g = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => io::read_graph_json(path)?,
        _ => io::read_edge_list_csv(path)?,
    };
    let Some(attr_path) = attributes else {
        return Ok(g);
    };
    let attrs = io::read_attributes_csv(attr_path)?;
    let edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.u, e.v, e.w)).collect();
    let with_attrs = build_graph(&edges, g.node_count(), Some(attrs))?;
    match g.labels() {
        Some(l) => with_attrs.with_labels(l.to_vec()),
        None => Ok(with_attrs),
    }
}

fn write_config_echo(output: &Path) -> Result<()> {
    let argv: Vec<String> = std::env::args().collect();
    let echo = ConfigEcho {
        command: argv.get(1).cloned().unwrap_or_default(),
        argv,
        unix_time_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
    };
    io::write_json_report(&echo, output.with_extension("config.json"))
}

fn read_partition_or_labels(path: &Path) -> Result<Vec<usize>> {
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let g = io::read_graph_json(path)?;
        return g
            .labels()
            .map(|l| l.to_vec())
            .ok_or_else(|| Error::Validation(format!("{} carries no labels", path.display())));
    }
    io::read_partition_csv(path)
}

fn sinkhorn_options(epsilon: Option<f64>) -> SinkhornOptions {
    let mut opts = SinkhornOptions::default();
    if let Some(eps) = epsilon {
        opts.epsilon = eps;
    }
    opts
}

fn flow_options(
    method: MethodArg,
    alpha: f64,
    workers: usize,
    epsilon: Option<f64>,
    normalization: NormalizationArg,
    approx_distances: bool,
    record_history: bool,
) -> FlowOptions {
    FlowOptions {
        method: method.into(),
        alpha,
        workers,
        sinkhorn: sinkhorn_options(epsilon),
        normalization: match normalization {
            NormalizationArg::Sum => Normalization::Sum,
            NormalizationArg::Max => Normalization::Max,
        },
        exact_distances: !approx_distances,
        record_history,
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Generate { family } => {
            let (g, output) = match family {
                Family::Gab { a, b, output } => {
                    let (g, _, _) = generate_gab(a, b)?;
                    (g, output)
                }
                Family::Sbm {
                    sizes,
                    p_in,
                    p_out,
                    seed,
                    output,
                } => {
                    let (g, _, isolated) = generate_sbm(&sizes, p_in, p_out, seed)?;
                    if !isolated.is_empty() {
                        log::warn!(
                            "{} isolated nodes in the sampled graph: {:?}",
                            isolated.len(),
                            isolated
                        );
                    }
                    (g, output)
                }
                Family::Dumbbell {
                    clique_size,
                    bridges,
                    output,
                } => {
                    let (g, _) = generate_dumbbell(clique_size, bridges)?;
                    (g, output)
                }
            };
            io::write_graph_json(&g, &output)?;
            write_config_echo(&output)?;
            log::info!(
                "wrote {} ({} nodes, {} edges)",
                output.display(),
                g.node_count(),
                g.edge_count()
            );
            Ok(0)
        }
        Command::Curvature {
            input,
            attributes,
            output,
            method,
            alpha,
            workers,
            epsilon,
        } => {
            let g = load_graph(&input, attributes.as_deref())?;
            let curvatures = orc_all_with_options(
                &g,
                alpha,
                method.into(),
                workers,
                &sinkhorn_options(epsilon),
            )?;
            io::write_curvature_csv(&curvatures, &g, &output)?;
            write_config_echo(&output)?;
            log::info!("wrote {} ({} edges)", output.display(), g.edge_count());
            Ok(0)
        }
        Command::Flow {
            input,
            attributes,
            output,
            iters,
            method,
            alpha,
            workers,
            epsilon,
            normalization,
            approx_distances,
            history,
        } => {
            let g = load_graph(&input, attributes.as_deref())?;
            let opts = flow_options(
                method,
                alpha,
                workers,
                epsilon,
                normalization,
                approx_distances,
                history.is_some(),
            );
            let (adjusted, state) = ricci_flow(&g, iters, &opts)?;
            io::write_graph_json(&adjusted.graph, &output)?;
            if let Some(history_path) = history {
                let snapshots = state.history.as_deref().ok_or_else(|| {
                    Error::State("flow ran without recording history".to_string())
                })?;
                io::write_history_csv(snapshots, &g, history_path)?;
            }
            write_config_echo(&output)?;
            log::info!("wrote {} after {} iterations", output.display(), iters);
            Ok(0)
        }
        Command::Pool {
            input,
            attributes,
            output,
            k,
            iters,
            mode,
            seed,
            restarts,
            epochs,
            lr,
            features,
            method,
            alpha,
            workers,
            epsilon,
            assignment,
        } => {
            let g = load_graph(&input, attributes.as_deref())?;
            let pool_mode = match mode {
                ModeArg::Spectral => PoolMode::Spectral,
                ModeArg::Trained => PoolMode::Trained,
            };
            let config = PoolConfig {
                seed,
                kmeans_restarts: restarts,
                flow: flow_options(
                    method,
                    alpha,
                    workers,
                    epsilon,
                    NormalizationArg::Sum,
                    false,
                    false,
                ),
                epochs,
                lr,
                features: match features {
                    FeaturesArg::Auto => FeatureMode::Auto,
                    FeaturesArg::Identity => FeatureMode::Identity,
                    FeaturesArg::Constant => FeatureMode::ConstantOne,
                },
            };
            let coarse = pool(&g, k, iters, pool_mode, &config)?;
            let provenance = io::Provenance {
                t: iters,
                k,
                mode: pool_mode.as_str().to_string(),
                seed,
            };
            io::write_coarse_json(&coarse, &provenance, &output)?;
            if let Some(assignment_path) = assignment {
                io::write_assignment_csv(&coarse.assignment, assignment_path)?;
            }
            write_config_echo(&output)?;
            log::info!(
                "wrote {} ({} supernodes, {} superedges)",
                output.display(),
                coarse.k,
                coarse.graph.edge_count()
            );
            Ok(0)
        }
        Command::Eval {
            metric,
            input,
            partition,
            pred,
            truth,
            variant,
            convention,
            output,
        } => {
            let report = match metric {
                MetricArg::Nmi => {
                    let pred_path = pred.expect("clap enforces --pred");
                    let truth_path = truth.expect("clap enforces --truth");
                    let p1 = read_partition_or_labels(&pred_path)?;
                    let p2 = read_partition_or_labels(&truth_path)?;
                    let v = match variant {
                        VariantArg::Standard => NmiVariant::Standard,
                        VariantArg::ConditionalEntropy => NmiVariant::ConditionalEntropy,
                    };
                    nmi_report(
                        &p1,
                        &p2,
                        v,
                        &format!("{} vs {}", pred_path.display(), truth_path.display()),
                    )?
                }
                MetricArg::Modularity => {
                    let input_path = input.expect("clap enforces --input");
                    let partition_path = partition.expect("clap enforces --partition");
                    let g = load_graph(&input_path, None)?;
                    let labels = read_partition_or_labels(&partition_path)?;
                    let c = match convention {
                        ConventionArg::Ordered => ModularityConvention::Ordered,
                        ConventionArg::Unordered => ModularityConvention::Unordered,
                    };
                    modularity_report(
                        &g,
                        &labels,
                        c,
                        &format!("{} with {}", input_path.display(), partition_path.display()),
                    )?
                }
            };
            let text =
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
            println!("{}", text);
            if let Some(output_path) = output {
                io::write_json_report(&report, &output_path)?;
                write_config_echo(&output_path)?;
            }
            Ok(0)
        }
        Command::Verify { target } => {
            let VerifyTarget::Gab {
                a,
                b,
                iters,
                output,
                series,
            } = target;
            if iters < 1 {
                return Err(Error::Parameter(
                    "the series needs at least one iteration".to_string(),
                ));
            }
            let eigen = verify_eigenstructure(a, b)?;
            let modularity_series = gab_modularity_series(a, b, iters, SeriesSource::Analytic)?;
            let mut claims = eigen.claims.clone();
            let mut worst: Option<(usize, f64)> = None;
            for (t, w) in modularity_series.windows(2).enumerate().skip(1) {
                let delta = w[1] - w[0];
                if delta < -1e-12 && worst.map_or(true, |(_, d)| delta < d) {
                    worst = Some((t + 1, delta));
                }
            }
            claims.push(ClaimCheck {
                claim: format!(
                    "modularity series nondecreasing over t in [1, {}]",
                    iters
                ),
                passed: worst.is_none(),
                evidence: match worst {
                    None => format!(
                        "min step {:+.3e}",
                        modularity_series
                            .windows(2)
                            .skip(1)
                            .map(|w| w[1] - w[0])
                            .fold(f64::INFINITY, f64::min)
                    ),
                    Some((t, delta)) => format!("Q drops by {:.3e} at t = {}", -delta, t),
                },
            });
            let all_passed = claims.iter().all(|c| c.passed);
            for c in &claims {
                println!(
                    "{}: {} ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.claim,
                    c.evidence
                );
            }
            let report = VerifyReport {
                a,
                b,
                eigenvalues: eigen.eigenvalues,
                claims,
                modularity_series: modularity_series.clone(),
                all_passed,
            };
            if let Some(series_path) = series {
                io::write_series_csv(&modularity_series, series_path)?;
            }
            if let Some(output_path) = output {
                io::write_json_report(&report, &output_path)?;
                write_config_echo(&output_path)?;
            }
            Ok(if all_passed { 0 } else { 2 })
        }
        Command::PlotData { input, output } => {
            let rows = tidy_rows(&input)?;
            io::write_plot_csv(&rows, &output)?;
            write_config_echo(&output)?;
            Ok(0)
        }
    }
}

/// Convert a `t,u,v,w` history, `t,Q` series, or pass through an
/// existing `t,key,value` table.
fn tidy_rows(input: &Path) -> Result<Vec<io::PlotRow>> {
    let text = std::fs::read_to_string(input)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("plot input is empty".to_string()))?
        .trim()
        .to_ascii_lowercase();
    let mut rows = Vec::new();
    let parse_t = |f: &str, lineno: usize| -> Result<usize> {
        f.trim().parse().map_err(|_| {
            Error::Validation(format!("line {}: bad iteration index {:?}", lineno, f))
        })
    };
    let parse_value = |f: &str, lineno: usize| -> Result<f64> {
        f.trim()
            .parse()
            .map_err(|_| Error::Validation(format!("line {}: bad value {:?}", lineno, f)))
    };
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let row = match (header.as_str(), fields.as_slice()) {
            ("t,u,v,w", [t, u, v, w]) => io::PlotRow {
                t: parse_t(t, lineno)?,
                key: format!("{}-{}", u.trim(), v.trim()),
                value: parse_value(w, lineno)?,
            },
            ("t,q", [t, q]) => io::PlotRow {
                t: parse_t(t, lineno)?,
                key: "Q".to_string(),
                value: parse_value(q, lineno)?,
            },
            ("t,key,value", [t, key, value]) => io::PlotRow {
                t: parse_t(t, lineno)?,
                key: key.trim().to_string(),
                value: parse_value(value, lineno)?,
            },
            _ => {
                return Err(Error::Validation(format!(
                    "line {}: row shape does not match header {:?}",
                    lineno, header
                )))
            }
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Validation(format!(
            "{} has a header but no data rows",
            input.display()
        )));
    }
    Ok(rows)
}
