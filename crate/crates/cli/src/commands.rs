use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fenode::evaluation::{
    classification_protocol, clustering_protocol, link_prediction_protocol, ClassificationOptions,
    ClusteringOptions, EvalReport, LinkPredictionOptions, PairOperator,
};
use fenode::graph::{load_edge_list_with, load_labels, preprocess, Graph, LabelSet};
use fenode::io::{
    read_embedding, read_matrix_binary, read_matrix_csv, write_embedding, write_loss_trace,
    write_matrix_binary, write_matrix_csv, MatrixSidecar,
};
use fenode::ndarray::Array2;
use fenode::pipeline::{embed_graph, embed_rows, embed_similarity, fe_for_config};
use fenode::synthetic::recon_demo;
use fenode::{ct_distance, sp_distance, SimilarityMatrix, SimilaritySource};
use serde_json::json;

use crate::settings::Settings;
use crate::{Cli, Command, DistanceKind, SweepTask};

const CLUSTER_DIM: usize = 8;
const DEFAULT_DIM: usize = 128;

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    let started = Instant::now();
    let (name, tune) = match &cli.command {
        Command::Prep { tune, .. } => ("prep", tune),
        Command::Distance { tune, .. } => ("distance", tune),
        Command::Embed { tune, .. } => ("embed", tune),
        Command::EvalCluster { tune, .. } => ("eval-cluster", tune),
        Command::EvalClassify { tune, .. } => ("eval-classify", tune),
        Command::EvalLinkpred { tune, .. } => ("eval-linkpred", tune),
        Command::ReconDemo { tune, .. } => ("recon-demo", tune),
        Command::Sweep { tune, .. } => ("sweep", tune),
    };
    let settings = tune.resolve(config)?;
    if let Some(threads) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let default_dim = if matches!(cli.command, Command::EvalCluster { .. }) { CLUSTER_DIM } else { DEFAULT_DIM };
    let recon_dim = matches!(cli.command, Command::ReconDemo { .. });
    let resolved = settings.to_json(if recon_dim { CLUSTER_DIM } else { default_dim });
    log::info!("{name} with {resolved}");

    match cli.command {
        Command::Prep { input, output, .. } => prep(&settings, &input, &output)?,
        Command::Distance { input, output, kind, .. } => distance(&settings, &input, &output, kind, &resolved)?,
        Command::Embed { input, output, save_similarity, .. } => {
            embed(&settings, &input, &output, save_similarity.as_deref(), &resolved)?
        }
        Command::EvalCluster { input, labels, output, embedding, .. } => {
            let g = load_graph(&settings, &input)?;
            let labels = read_labels(&labels, &g)?;
            let report = eval_cluster(&settings, &g, &labels, embedding.as_deref())?;
            emit_report(report, &resolved, output.as_deref())?
        }
        Command::EvalClassify { input, labels, output, embedding, .. } => {
            let g = load_graph(&settings, &input)?;
            let labels = read_labels(&labels, &g)?;
            let report = eval_classify(&settings, &g, &labels, embedding.as_deref())?;
            emit_report(report, &resolved, output.as_deref())?
        }
        Command::EvalLinkpred { input, output, .. } => {
            let g = load_graph(&settings, &input)?;
            emit_report(eval_linkpred(&settings, &g)?, &resolved, output.as_deref())?
        }
        Command::ReconDemo { n, p, value, output, .. } => recon(&settings, n, p, value, output.as_deref())?,
        Command::Sweep { task, param, values, input, labels, output, .. } => {
            sweep(&settings, task, &param, &values, &input, labels.as_deref(), output.as_deref())?
        }
    }
    eprintln!("{name} finished in {:.3} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let w = create(path)?;
    if is_csv(path) {
        write_matrix_csv(w, m)?;
    } else {
        write_matrix_binary(w, m)?;
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let r = open(path)?;
    Ok(if is_csv(path) { read_matrix_csv(r)? } else { read_matrix_binary(r)? })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_raw(settings: &Settings, path: &Path) -> Result<Graph> {
    load_edge_list_with(open(path)?, settings.load_options())
        .with_context(|| format!("reading edge list {}", path.display()))
}

fn load_graph(settings: &Settings, path: &Path) -> Result<Graph> {
    let raw = load_raw(settings, path)?;
    let g = preprocess(&raw)?;
    log::info!(
        "graph: {} nodes, {} edges (raw {} nodes, {} edges)",
        g.node_count(),
        g.edge_count(),
        raw.node_count(),
        raw.edge_count()
    );
    Ok(g)
}

fn read_labels(path: &Path, g: &Graph) -> Result<LabelSet> {
    load_labels(open(path)?, g).with_context(|| format!("reading labels {}", path.display()))
}

fn prep(settings: &Settings, input: &Path, output: &Path) -> Result<()> {
    let g = load_graph(settings, input)?;
    let mut w = create(output)?;
    for &(i, j, weight) in g.edges() {
        writeln!(w, "{} {} {}", g.name(i), g.name(j), weight)?;
    }
    w.flush()?;
    Ok(())
}

fn distance(settings: &Settings, input: &Path, output: &Path, kind: DistanceKind, resolved: &serde_json::Value) -> Result<()> {
    let g = load_graph(settings, input)?;
    let delta = match kind {
        DistanceKind::Fe => fe_for_config(&g, &settings.embed_config(DEFAULT_DIM))?,
        DistanceKind::Sp => sp_distance(&g)?,
        DistanceKind::Ct => ct_distance(&g)?,
    };
    if !delta.converged {
        log::warn!("the recurrence hit its iteration cap before converging");
    }
    write_matrix(output, &delta.values)?;
    let mut meta = serde_json::to_value(MatrixSidecar::for_dissimilarity(&delta))?;
    meta["config"] = resolved.clone();
    meta["nodes"] = json!(g.names());
    write_json(&with_suffix(output, ".json"), &meta)
}

fn embed(
    settings: &Settings,
    input: &Path,
    output: &Path,
    save_similarity: Option<&Path>,
    resolved: &serde_json::Value,
) -> Result<()> {
    let cfg = settings.embed_config(DEFAULT_DIM);
    let (similarity, embedding, nodes) = if settings.similarity == SimilaritySource::External {
        let s = SimilarityMatrix::external(read_matrix(input)?);
        let e = embed_similarity(&s, &cfg)?;
        (s, e, None)
    } else {
        let g = load_graph(settings, input)?;
        let out = embed_graph(&g, &cfg)?;
        (out.similarity, out.embedding, Some(g.names().to_vec()))
    };
    write_embedding(create(output)?, &embedding.u)?;
    write_loss_trace(create(&with_suffix(output, ".loss.csv"))?, &embedding.loss_trace)?;
    if let Some(path) = save_similarity {
        write_matrix(path, &similarity.values)?;
        write_json(&with_suffix(path, ".json"), &serde_json::to_value(MatrixSidecar::for_similarity(&similarity))?)?;
    }
    let meta = json!({
        "config": resolved,
        "final_loss": embedding.final_loss(),
        "similarity": MatrixSidecar::for_similarity(&similarity),
        "nodes": nodes,
    });
    write_json(&with_suffix(output, ".json"), &meta)
}

fn read_embedding_for(path: &Path, g: &Graph) -> Result<Array2<f64>> {
    let u = read_embedding(open(path)?)?;
    if u.nrows() != g.node_count() {
        bail!(
            "embedding {} has {} rows but the preprocessed graph has {} nodes",
            path.display(),
            u.nrows(),
            g.node_count()
        );
    }
    Ok(u)
}

fn eval_cluster(settings: &Settings, g: &Graph, labels: &LabelSet, embedding: Option<&Path>) -> Result<EvalReport> {
    let opts = ClusteringOptions { embed_reps: settings.embed_reps, kmeans_runs: settings.kmeans_runs };
    let cfg = settings.embed_config(CLUSTER_DIM);
    let report = match embedding {
        Some(path) => {
            let u = read_embedding_for(path, g)?;
            clustering_protocol(|_| Ok(u.clone()), labels, &ClusteringOptions { embed_reps: 1, ..opts }, settings.seed)?
        }
        None => clustering_protocol(
            |seed| embed_rows(g, &fenode::EmbedConfig { seed, ..cfg }),
            labels,
            &opts,
            settings.seed,
        )?,
    };
    Ok(report)
}

fn eval_classify(settings: &Settings, g: &Graph, labels: &LabelSet, embedding: Option<&Path>) -> Result<EvalReport> {
    let u = match embedding {
        Some(path) => read_embedding_for(path, g)?,
        None => embed_rows(g, &settings.embed_config(DEFAULT_DIM))?,
    };
    let opts = ClassificationOptions {
        train_fraction: settings.train_fraction,
        splits: settings.splits,
        logreg: settings.logreg(),
    };
    Ok(classification_protocol(&u, labels, &opts, settings.seed)?)
}

fn eval_linkpred(settings: &Settings, g: &Graph) -> Result<EvalReport> {
    let cfg = settings.embed_config(DEFAULT_DIM);
    let opts = LinkPredictionOptions {
        removal_fraction: settings.removal_fraction,
        repetitions: settings.repetitions,
        operators: settings.operator.map_or(PairOperator::ALL.to_vec(), |op| vec![op]),
        logreg: settings.logreg(),
    };
    Ok(link_prediction_protocol(
        g,
        |train, seed| embed_rows(train, &fenode::EmbedConfig { seed, ..cfg }),
        &opts,
        settings.seed,
    )?)
}

fn emit_report(mut report: EvalReport, resolved: &serde_json::Value, output: Option<&Path>) -> Result<()> {
    report.hyperparameters.insert("config".into(), resolved.clone());
    match output {
        Some(path) => write_json(path, &serde_json::to_value(&report)?),
        None => {
            println!("{}", report.to_json()?);
            Ok(())
        }
    }
}

fn recon(settings: &Settings, n: usize, p: f64, value: f64, output: Option<&Path>) -> Result<()> {
    let cfg = settings.embed_config(CLUSTER_DIM);
    let demo = recon_demo(n, p, value, &cfg.fit, settings.seed)?;
    let summary = json!({
        "n": n,
        "p": p,
        "value": value,
        "d": cfg.fit.dim,
        "iterations": cfg.fit.iterations,
        "seed": settings.seed,
        "edges": demo.graph.edge_count(),
        "gmf_error": demo.gmf_error,
        "svd_error": demo.svd_error,
    });
    if let Some(dir) = output {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_matrix(&dir.join("target.csv"), &demo.target)?;
        write_matrix(&dir.join("gmf.csv"), &demo.gmf)?;
        write_matrix(&dir.join("svd.csv"), &demo.svd)?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

const SWEEP_PARAMS: [&str; 6] = ["eta", "percentile", "max_target", "d", "horizon", "targets"];

fn sweep(
    settings: &Settings,
    task: SweepTask,
    param: &str,
    values: &[String],
    input: &Path,
    labels: Option<&Path>,
    output: Option<&Path>,
) -> Result<()> {
    let param = param.replace('-', "_");
    if !SWEEP_PARAMS.contains(&param.as_str()) {
        bail!("cannot sweep {param:?}; choose one of {}", SWEEP_PARAMS.join(", "));
    }
    let g = load_graph(settings, input)?;
    let labels = match (task, labels) {
        (SweepTask::Linkpred, _) => None,
        (_, Some(path)) => Some(read_labels(path, &g)?),
        (_, None) => bail!("--labels is required for this task"),
    };
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for value in values {
        let mut s = settings.clone();
        s.set(&param, value)?;
        let started = Instant::now();
        let report = match task {
            SweepTask::Cluster => eval_cluster(&s, &g, labels.as_ref().unwrap(), None)?,
            SweepTask::Classify => eval_classify(&s, &g, labels.as_ref().unwrap(), None)?,
            SweepTask::Linkpred => eval_linkpred(&s, &g)?,
        };
        let seconds = started.elapsed().as_secs_f64();
        log::info!("{param}={value}: {:?} ({seconds:.2} s)", report.metrics);
        let names: Vec<String> = report.metrics.keys().cloned().collect();
        let header = header.get_or_insert_with(|| names.clone());
        if *header != names {
            bail!("metric set changed between sweep values");
        }
        let mut row = vec![param.clone(), value.trim().to_string()];
        row.extend(report.metrics.values().map(|v| v.to_string()));
        row.push(format!("{seconds:.3}"));
        rows.push(row.join(","));
    }
    let mut text = format!("param,value,{},seconds\n", header.unwrap_or_default().join(","));
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
