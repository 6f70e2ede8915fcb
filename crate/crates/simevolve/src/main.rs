//! Command-line front end: synthetic data generation, similarity-function
//! evolution, clustering with saved models, baselines, evaluation, and
//! multi-run benchmark sweeps. Logs go to stderr; machine-readable output
//! (JSON, CSV) goes to stdout or the requested files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use simevolve::baselines::{kmeanspp, ng_graph};
use simevolve::cluster::{cluster, Partition};
use simevolve::data::{Dataset, NeighborIndex};
use simevolve::datagen::{gen_elliptical, gen_gaussian};
use simevolve::error::Error;
use simevolve::expr::{ExprTree, Individual};
use simevolve::gp::{evolve, CrossoverKind, GpConfig};
use simevolve::metrics::{mann_whitney_u, partition_report, PartitionReport};

#[derive(Parser)]
#[command(name = "simevolve", version, about = "Evolved-similarity graph clustering")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Gaussian,
    Elliptical,
}

#[derive(Clone, Copy, ValueEnum)]
enum CrossoverArg {
    Single,
    Ric,
    Sic,
    Aic,
}

impl From<CrossoverArg> for CrossoverKind {
    fn from(v: CrossoverArg) -> CrossoverKind {
        match v {
            CrossoverArg::Single => CrossoverKind::Single,
            CrossoverArg::Ric => CrossoverKind::Ric,
            CrossoverArg::Sic => CrossoverKind::Sic,
            CrossoverArg::Aic => CrossoverKind::Aic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineAlgo {
    Kmeanspp,
    Ng,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labelled synthetic dataset CSV.
    Generate {
        #[arg(long, value_enum)]
        kind: DataKind,
        #[arg(long)]
        dims: usize,
        #[arg(long)]
        clusters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Minimum cluster size; defaults to 50 for up to 10 clusters, else 10.
        #[arg(long)]
        min_size: Option<usize>,
        /// Maximum cluster size; defaults to 500 for up to 10 clusters, else 100.
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Evolve a similarity function and cluster the dataset with it.
    Evolve {
        #[arg(long)]
        data: PathBuf,
        /// Treat the last CSV column as gold labels.
        #[arg(long)]
        labels: bool,
        #[arg(long, default_value_t = 1)]
        trees: usize,
        #[arg(long, value_enum, default_value = "single")]
        crossover: CrossoverArg,
        #[arg(long, default_value_t = 1024)]
        pop: usize,
        #[arg(long, default_value_t = 100)]
        gens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum tree depth; defaults to 7 for one tree, 5 otherwise.
        #[arg(long)]
        max_depth: Option<usize>,
        /// Fold constant subtrees in the saved model.
        #[arg(long)]
        simplify: bool,
        #[arg(long)]
        out_model: Option<PathBuf>,
        #[arg(long)]
        out_assign: Option<PathBuf>,
        #[arg(long)]
        out_log: Option<PathBuf>,
    },
    /// Apply a saved similarity model to a dataset.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: bool,
        #[arg(long)]
        model: PathBuf,
        /// Assignment CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a baseline clusterer.
    Baseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: bool,
        #[arg(long, value_enum)]
        algo: BaselineAlgo,
        /// Cluster count for kmeanspp.
        #[arg(long)]
        k: Option<usize>,
        /// Neighbour count for the nearest-neighbour graph.
        #[arg(long)]
        nn: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adjusted Rand Index between two partitions.
    Evaluate {
        /// Assignment CSV, or a labelled dataset CSV.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Repeated runs of several methods with mean/std and pairwise rank tests.
    Benchmark {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: bool,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        /// Comma-separated: gpgc, gpgc-ric, gpgc-sic, gpgc-aic, kmeanspp, ng<N>.
        #[arg(long)]
        methods: String,
        /// Cluster count for kmeanspp; defaults to the gold cluster count.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 1024)]
        pop: usize,
        #[arg(long, default_value_t = 100)]
        gens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_file(path: &Path, contents: &str) -> simevolve::Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> simevolve::Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_scaled(path: &Path, labels: bool) -> simevolve::Result<Dataset> {
    Ok(Dataset::load_csv(path, labels)?.scale_unit())
}

fn gp_config(
    trees: usize,
    crossover: CrossoverKind,
    pop: usize,
    gens: usize,
    max_depth: Option<usize>,
    seed: u64,
) -> simevolve::Result<GpConfig> {
    let mut cfg = if trees == 1 && crossover == CrossoverKind::Single {
        GpConfig::single_tree(seed)
    } else {
        let mut c = GpConfig::multi_tree(seed, crossover);
        c.tree_count = trees;
        c
    };
    cfg.population_size = pop;
    cfg.generations = gens;
    if let Some(d) = max_depth {
        cfg.depth_max = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn gold_partition(ds: &Dataset) -> Option<Partition> {
    ds.gold_labels().map(Partition::from_labels)
}

fn print_report(report: &PartitionReport) {
    println!("{}", serde_json::to_string(report).unwrap());
}

/// A partition file is either an assignment CSV or a labelled dataset CSV.
fn load_partition(path: &Path) -> simevolve::Result<Partition> {
    let text = read_file(path)?;
    if text.lines().next().map(str::trim) == Some("instance_id,cluster_id") {
        Partition::parse_csv(&text)
    } else {
        let ds = Dataset::load_csv(path, true)?;
        Ok(Partition::from_labels(ds.gold_labels().unwrap()))
    }
}

fn run_generate(
    kind: DataKind,
    dims: usize,
    clusters: usize,
    seed: u64,
    out: &Path,
    min_size: Option<usize>,
    max_size: Option<usize>,
) -> simevolve::Result<()> {
    let defaults = if clusters <= 10 { (50, 500) } else { (10, 100) };
    let range = (min_size.unwrap_or(defaults.0), max_size.unwrap_or(defaults.1));
    let ds = match kind {
        DataKind::Gaussian => gen_gaussian(dims, clusters, range, seed)?,
        DataKind::Elliptical => gen_elliptical(dims, clusters, range, seed)?,
    };
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    write_file(out, std::str::from_utf8(&buf).unwrap())?;
    eprintln!(
        "generated n={} m={} K={} -> {}",
        ds.n(),
        ds.m(),
        clusters,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_evolve(
    data: &Path,
    labels: bool,
    trees: usize,
    crossover: CrossoverKind,
    pop: usize,
    gens: usize,
    seed: u64,
    max_depth: Option<usize>,
    simplify: bool,
    out_model: Option<&Path>,
    out_assign: Option<&Path>,
    out_log: Option<&Path>,
) -> simevolve::Result<()> {
    let ds = load_scaled(data, labels)?;
    let cfg = gp_config(trees, crossover, pop, gens, max_depth, seed)?;
    let (best, log) = evolve(&ds, &cfg)?;
    let model = if simplify {
        Individual::new(best.trees.iter().map(ExprTree::simplify).collect())
    } else {
        best.clone()
    };

    let idx = NeighborIndex::build(&ds);
    let part = cluster(&best, &ds, &idx);
    if let Some(path) = out_model {
        write_file(path, &model.to_model_string())?;
    }
    if let Some(path) = out_assign {
        let mut buf = Vec::new();
        part.write_csv(&mut buf).unwrap();
        write_file(path, std::str::from_utf8(&buf).unwrap())?;
    }
    if let Some(path) = out_log {
        write_file(path, &log.to_jsonl())?;
    }

    let gold = gold_partition(&ds);
    let report = partition_report(&part, &ds, &idx, gold.as_ref())?;
    let features: Vec<usize> = model.features_used().into_iter().collect();
    eprintln!(
        "best model uses {} of {} features: {:?}",
        features.len(),
        ds.m(),
        features
    );
    print_report(&report);
    Ok(())
}

fn run_cluster(
    data: &Path,
    labels: bool,
    model_path: &Path,
    out: Option<&Path>,
) -> simevolve::Result<()> {
    let ds = load_scaled(data, labels)?;
    let model = Individual::from_model_string(&read_file(model_path)?)?;
    if let Some(max) = model.max_feature_index() {
        if max >= ds.m() {
            return Err(Error::Dimension(format!(
                "model references feature {max} but dataset has {} features",
                ds.m()
            )));
        }
    }
    let idx = NeighborIndex::build(&ds);
    let part = cluster(&model, &ds, &idx);
    emit_partition(&part, &ds, &idx, out)
}

fn emit_partition(
    part: &Partition,
    ds: &Dataset,
    idx: &NeighborIndex,
    out: Option<&Path>,
) -> simevolve::Result<()> {
    match out {
        Some(path) => {
            let mut buf = Vec::new();
            part.write_csv(&mut buf).unwrap();
            write_file(path, std::str::from_utf8(&buf).unwrap())?;
            let gold = gold_partition(ds);
            let report = partition_report(part, ds, idx, gold.as_ref())?;
            print_report(&report);
        }
        None => {
            let stdout = std::io::stdout();
            part.write_csv(stdout.lock()).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?;
        }
    }
    Ok(())
}

fn run_baseline(
    data: &Path,
    labels: bool,
    algo: BaselineAlgo,
    k: Option<usize>,
    nn: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> simevolve::Result<()> {
    let ds = load_scaled(data, labels)?;
    let part = match algo {
        BaselineAlgo::Kmeanspp => {
            let k = k.ok_or_else(|| Error::Config("kmeanspp requires --k".into()))?;
            kmeanspp(&ds, k, 100, &mut ChaCha8Rng::seed_from_u64(seed))?
        }
        BaselineAlgo::Ng => {
            let nn = nn.ok_or_else(|| Error::Config("ng requires --nn".into()))?;
            ng_graph(&ds, nn)?
        }
    };
    let idx = NeighborIndex::build(&ds);
    emit_partition(&part, &ds, &idx, out)
}

fn run_evaluate(pred: &Path, gold: &Path) -> simevolve::Result<()> {
    let pred = load_partition(pred)?;
    let gold = load_partition(gold)?;
    let ari = simevolve::ari(&pred, &gold)?;
    println!("{}", serde_json::json!({ "ari": ari }));
    Ok(())
}

enum Method {
    Gp(CrossoverKind),
    Kmeanspp,
    Ng(usize),
}

fn parse_method(name: &str) -> simevolve::Result<Method> {
    match name {
        "gpgc" => Ok(Method::Gp(CrossoverKind::Single)),
        "gpgc-ric" => Ok(Method::Gp(CrossoverKind::Ric)),
        "gpgc-sic" => Ok(Method::Gp(CrossoverKind::Sic)),
        "gpgc-aic" => Ok(Method::Gp(CrossoverKind::Aic)),
        "kmeanspp" => Ok(Method::Kmeanspp),
        _ => match name.strip_prefix("ng").and_then(|s| s.parse::<usize>().ok()) {
            Some(nn) if nn >= 1 => Ok(Method::Ng(nn)),
            _ => Err(Error::Config(format!("unknown method {name:?}"))),
        },
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[allow(clippy::too_many_arguments)]
fn run_benchmark(
    data: &Path,
    labels: bool,
    runs: usize,
    methods: &str,
    k: Option<usize>,
    pop: usize,
    gens: usize,
    seed: u64,
    out: Option<&Path>,
) -> simevolve::Result<()> {
    if runs == 0 {
        return Err(Error::Config("benchmark requires --runs >= 1".into()));
    }
    let ds = load_scaled(data, labels)?;
    let idx = NeighborIndex::build(&ds);
    let gold = gold_partition(&ds);
    let names: Vec<String> = methods
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    let parsed: Vec<Method> = names
        .iter()
        .map(|n| parse_method(n))
        .collect::<simevolve::Result<_>>()?;
    let kmeans_k = match (k, &gold) {
        (Some(k), _) => Some(k),
        (None, Some(g)) => Some(g.k()),
        (None, None) => None,
    };

    // (method, run) jobs evaluated in parallel, merged back in order.
    let jobs: Vec<(usize, usize)> = (0..parsed.len())
        .flat_map(|mi| (0..runs).map(move |r| (mi, r)))
        .collect();
    let reports: Vec<simevolve::Result<PartitionReport>> = jobs
        .par_iter()
        .map(|&(mi, r)| {
            let run_seed = seed.wrapping_add(r as u64);
            let part = match &parsed[mi] {
                Method::Gp(kind) => {
                    let trees = if *kind == CrossoverKind::Single { 1 } else { 7 };
                    let cfg = gp_config(trees, *kind, pop, gens, None, run_seed)?;
                    let (best, _) = evolve(&ds, &cfg)?;
                    cluster(&best, &ds, &idx)
                }
                Method::Kmeanspp => {
                    let k = kmeans_k.ok_or_else(|| {
                        Error::Config("kmeanspp needs --k or gold labels".into())
                    })?;
                    kmeanspp(&ds, k, 100, &mut ChaCha8Rng::seed_from_u64(run_seed))?
                }
                Method::Ng(nn) => ng_graph(&ds, *nn)?,
            };
            partition_report(&part, &ds, &idx, gold.as_ref())
        })
        .collect();

    let mut per_method: Vec<Vec<PartitionReport>> = vec![Vec::new(); parsed.len()];
    for ((mi, _), rep) in jobs.into_iter().zip(reports) {
        per_method[mi].push(rep?);
    }

    let field = |reps: &[PartitionReport], f: fn(&PartitionReport) -> f64| -> Vec<f64> {
        reps.iter().map(f).collect()
    };
    let mut method_blocks = BTreeMap::new();
    let mut aris: Vec<Option<Vec<f64>>> = Vec::new();
    let mut fitnesses: Vec<Vec<f64>> = Vec::new();
    for (name, reps) in names.iter().zip(&per_method) {
        let mut block = serde_json::Map::new();
        let columns: [(&str, fn(&PartitionReport) -> f64); 5] = [
            ("k", |r| r.k as f64),
            ("fitness", |r| r.fitness),
            ("connectedness", |r| r.connectedness),
            ("sparsity_mean", |r| r.sparsity_mean),
            ("separation_mean", |r| r.separation_mean),
        ];
        for (col, f) in columns {
            let (mean, std) = mean_std(&field(reps, f));
            block.insert(col.to_string(), serde_json::json!({"mean": mean, "std": std}));
        }
        let ari_vals: Option<Vec<f64>> = reps.iter().map(|r| r.ari).collect();
        if let Some(vals) = &ari_vals {
            let (mean, std) = mean_std(vals);
            block.insert("ari".to_string(), serde_json::json!({"mean": mean, "std": std}));
        }
        aris.push(ari_vals);
        fitnesses.push(field(reps, |r| r.fitness));
        method_blocks.insert(name.clone(), serde_json::Value::Object(block));
    }

    // Pairwise rank tests on ARI when gold labels exist, else on fitness.
    let mut pairwise = Vec::new();
    for a in 0..names.len() {
        for b in (a + 1)..names.len() {
            let (metric, xs, ys) = match (&aris[a], &aris[b]) {
                (Some(x), Some(y)) => ("ari", x, y),
                _ => ("fitness", &fitnesses[a], &fitnesses[b]),
            };
            let t = mann_whitney_u(xs, ys)?;
            pairwise.push(serde_json::json!({
                "a": names[a], "b": names[b], "metric": metric,
                "u": t.u, "p": t.p, "significant": t.significant,
            }));
        }
    }

    let report = serde_json::json!({
        "runs": runs,
        "methods": method_blocks,
        "pairwise": pairwise,
    });
    let text = serde_json::to_string_pretty(&report).unwrap();
    match out {
        Some(path) => {
            write_file(path, &text)?;
            eprintln!("benchmark report -> {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> simevolve::Result<()> {
    match cli.cmd {
        Cmd::Generate {
            kind,
            dims,
            clusters,
            seed,
            out,
            min_size,
            max_size,
        } => run_generate(kind, dims, clusters, seed, &out, min_size, max_size),
        Cmd::Evolve {
            data,
            labels,
            trees,
            crossover,
            pop,
            gens,
            seed,
            max_depth,
            simplify,
            out_model,
            out_assign,
            out_log,
        } => run_evolve(
            &data,
            labels,
            trees,
            crossover.into(),
            pop,
            gens,
            seed,
            max_depth,
            simplify,
            out_model.as_deref(),
            out_assign.as_deref(),
            out_log.as_deref(),
        ),
        Cmd::Cluster {
            data,
            labels,
            model,
            out,
        } => run_cluster(&data, labels, &model, out.as_deref()),
        Cmd::Baseline {
            data,
            labels,
            algo,
            k,
            nn,
            seed,
            out,
        } => run_baseline(&data, labels, algo, k, nn, seed, out.as_deref()),
        Cmd::Evaluate { pred, gold } => run_evaluate(&pred, &gold),
        Cmd::Benchmark {
            data,
            labels,
            runs,
            methods,
            k,
            pop,
            gens,
            seed,
            out,
        } => run_benchmark(
            &data,
            labels,
            runs,
            &methods,
            k,
            pop,
            gens,
            seed,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SIMEVOLVE_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: SIMEVOLVE_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let _ = std::io::stderr().flush();
            ExitCode::from(1)
        }
    }
}
