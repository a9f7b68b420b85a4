//! The `seedsynth` command line.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::bench::{generate, Family};
use crate::circuit::{emit_qasm, parse_qasm, QubitTopology};
use crate::error::{Error, Result};
use crate::harness::{
    benchmark_suite, block_width, evaluate_holdout, label_ranks, optimize_circuit, OptimizeOptions, SeedStrategy,
};
use crate::instantiate::InstantiationConfig;
use crate::recommend::{
    generate_dataset, load_model, pca_explained_variance, read_dataset, save_model, split_fraction, split_holdout,
    top_k_accuracy, train_recommender, write_dataset, LabeledUnitary, SourceCircuit, TrainConfig,
};
use crate::synth::SearchConfig;
use crate::templates::{default_topologies, enumerate, TemplateCatalog, DEFAULT_CONSECUTIVE_LIMIT, DEFAULT_K};

#[derive(Debug, Parser)]
#[command(name = "seedsynth", version, about = "Seeded bottom-up unitary synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export the template catalog as JSON lines.
    Templates(TemplatesArgs),
    /// Partition a QASM circuit, resynthesize its blocks and verify the result.
    Optimize(OptimizeArgs),
    /// Label partitioned benchmark blocks with root-start synthesis.
    GenDataset(GenDatasetArgs),
    /// Train the seed recommender.
    Train(TrainArgs),
    /// Held-out accuracy, per-strategy synthesis metrics and PCA.
    Eval(EvalArgs),
    /// Write a benchmark circuit as QASM.
    BenchGen(BenchGenArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Deepest template, in CNOTs.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Convergence threshold on the phase-invariant cost.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

impl SearchArgs {
    fn search(&self) -> SearchConfig {
        SearchConfig {
            instantiation: InstantiationConfig {
                epsilon: self.epsilon,
                rng_seed: self.seed,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TemplatesArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub qubits: usize,
    /// `lines` (every labeling of the line) or `line` (0–1–…–n−1 only).
    #[arg(long, default_value = "lines")]
    pub topologies: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Per-block metrics CSV (appended).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Verification report JSON.
    #[arg(long)]
    pub verification: Option<PathBuf>,
    /// Partition report JSON.
    #[arg(long)]
    pub partition_report: Option<PathBuf>,
    #[arg(long, default_value = "root")]
    pub strategy: String,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub seeds_per_block: usize,
    /// Record wall-clock times in the metrics (makes them run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Benchmark widths to generate.
    #[arg(long, value_delimiter = ',', default_value = "3,4,5,6")]
    pub widths: Vec<usize>,
    /// Random instances per TFIM / random-layer width.
    #[arg(long, default_value_t = 12)]
    pub variants: usize,
    /// Extra QASM circuits, labelled with family `qasm`.
    #[arg(long)]
    pub qasm: Vec<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HoldoutArgs {
    /// `family:width,...` to hold out, or a fraction in (0, 1).
    #[arg(long)]
    pub holdout: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub holdout: HoldoutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Per-block accuracy CSV, one row per evaluated block.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-block, per-strategy synthesis metrics CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// PCA report CSV over the evaluated features.
    #[arg(long)]
    pub pca: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "root,random,learned")]
    pub strategies: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub seeds_per_block: usize,
    #[arg(long, default_value_t = 7)]
    pub split_seed: u64,
    #[command(flatten)]
    pub holdout: HoldoutArgs,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct BenchGenArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub width: usize,
    /// Trotter steps or random layers (ignored for qft).
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub enum Holdout {
    Pairs(Vec<(String, usize)>),
    Fraction(f64),
}

pub fn parse_holdout(spec: &str) -> Result<Holdout> {
    if let Ok(f) = spec.parse::<f64>() {
        return Ok(Holdout::Fraction(f));
    }
    spec.split(',')
        .map(|part| {
            let (fam, w) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("holdout entry '{part}' is not family:width")))?;
            let w = w
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad width in holdout entry '{part}'")))?;
            Ok((fam.trim().to_string(), w))
        })
        .collect::<Result<_>>()
        .map(Holdout::Pairs)
}

/// `(train, held_out)` per the holdout spec; without one, everything is training data.
fn apply_holdout(samples: &[LabeledUnitary], spec: Option<&str>, seed: u64) -> Result<(Vec<LabeledUnitary>, Vec<LabeledUnitary>)> {
    match spec.map(parse_holdout).transpose()? {
        None => Ok((samples.to_vec(), Vec::new())),
        Some(Holdout::Pairs(p)) => Ok(split_holdout(samples, &p)),
        Some(Holdout::Fraction(f)) => split_fraction(samples, f, seed),
    }
}

fn init_pool(jobs: usize) {
    if jobs > 0 {
        // ignore the error if a pool already exists (tests run in-process)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_templates(a: &TemplatesArgs) -> Result<()> {
    let topologies = match a.topologies.as_str() {
        "lines" => default_topologies(a.qubits),
        "line" => vec![QubitTopology::line(&(0..a.qubits).collect::<Vec<_>>())?],
        other => return Err(Error::InvalidArgument(format!("unknown topology set '{other}'"))),
    };
    let catalog = enumerate(a.qubits, a.k, &topologies, DEFAULT_CONSECUTIVE_LIMIT)?;
    if let Some(out) = &a.out {
        catalog.export(out)?;
    }
    println!("{}", catalog.len());
    Ok(())
}

/// Exit status 1 when a block failed to synthesize.
fn cmd_optimize(a: &OptimizeArgs) -> Result<i32> {
    let strategy: SeedStrategy = a.strategy.parse()?;
    let model = match (strategy, &a.model) {
        (SeedStrategy::Learned, None) => return Err(Error::InvalidArgument("--strategy learned needs --model".into())),
        (_, Some(p)) => Some(load_model(p)?),
        _ => None,
    };
    let circuit = parse_qasm(&fs::read_to_string(&a.input)?)?;
    let catalog = TemplateCatalog::standard(block_width(circuit.n_qubits()), a.search.k)?;
    let opts = OptimizeOptions {
        search: a.search.search(),
        strategy,
        seeds_per_block: a.seeds_per_block,
        seed: a.search.seed,
        jobs: a.search.jobs,
        timing: a.timing,
    };
    let out = optimize_circuit(&circuit, &catalog, model.as_ref(), &opts)?;
    fs::write(&a.output, emit_qasm(out.circuit()))?;
    if let Some(p) = &a.metrics {
        out.metrics.append_csv(p)?;
    }
    let mut verification = out.verification.clone();
    verification.circuit = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if let Some(p) = &a.verification {
        write_json(p, &verification)?;
    }
    if let Some(p) = &a.partition_report {
        write_json(p, &out.partitioned.report())?;
    }
    println!(
        "blocks={} cnots {} -> {} calls={} total_bound={:.3e} exact={}",
        out.partitioned.blocks.len(),
        circuit.cnot_count(),
        out.circuit().cnot_count(),
        out.metrics.total_calls(),
        verification.total_bound,
        verification.exact_distance.map_or("n/a".into(), |d| format!("{d:.3e}")),
    );
    let failed = out.metrics.failures();
    if failed > 0 {
        eprintln!("{failed} block(s) failed to synthesize");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_gen_dataset(a: &GenDatasetArgs) -> Result<()> {
    init_pool(a.search.jobs);
    let mut circuits = benchmark_suite(&a.widths, a.variants, a.search.seed)?;
    for p in &a.qasm {
        let circuit = parse_qasm(&fs::read_to_string(p)?)?;
        let width = circuit.n_qubits();
        circuits.push(SourceCircuit {
            circuit,
            family: "qasm".into(),
            width,
        });
    }
    let catalog = TemplateCatalog::standard(3, a.search.k)?;
    let ds = generate_dataset(&circuits, &catalog, &a.search.search())?;
    write_dataset(&a.out, &ds.samples)?;
    println!(
        "circuits={} blocks={} samples={} failures={}",
        circuits.len(),
        ds.blocks_total,
        ds.samples.len(),
        ds.failures.len()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = read_dataset(&a.data)?;
    let (train, held) = apply_holdout(&data, a.holdout.holdout.as_deref(), a.seed)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training samples after holdout".into()));
    }
    let catalog = TemplateCatalog::standard(3, a.k)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        noise_std: a.noise_std,
        rng_seed: a.seed,
        ..Default::default()
    };
    let (model, pre, fine) = train_recommender(&train, &catalog, &cfg)?;
    save_model(&a.model, &model)?;
    let acc = top_k_accuracy(&model, &train, 1)?;
    println!(
        "train={} held_out={} pretrain_loss={:.4e} finetune_loss={:.4e} train_top1={:.3}",
        train.len(),
        held.len(),
        pre.epoch_losses.last().copied().unwrap_or(f64::NAN),
        fine.epoch_losses.last().copied().unwrap_or(f64::NAN),
        acc.accuracy
    );
    info!("finetune losses: {:?}", fine.epoch_losses);
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    init_pool(a.search.jobs);
    let data = read_dataset(&a.data)?;
    let model = load_model(&a.model)?;
    let (_, held) = apply_holdout(&data, a.holdout.holdout.as_deref(), a.split_seed)?;
    let samples = if a.holdout.holdout.is_some() { held } else { data };
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let strategies = a.strategies.iter().map(|s| s.parse()).collect::<Result<Vec<SeedStrategy>>>()?;
    let catalog = TemplateCatalog::standard(3, a.search.k)?;
    let opts = OptimizeOptions {
        search: a.search.search(),
        seeds_per_block: a.seeds_per_block,
        seed: a.search.seed,
        jobs: a.search.jobs,
        ..Default::default()
    };
    let report = evaluate_holdout(&samples, &catalog, &model, &strategies, &opts)?;
    println!(
        "samples={} top1={:.4} top3={:.4} chance3={:.4} masked_chance3={:.4}",
        samples.len(),
        report.top1.accuracy,
        report.top3.accuracy,
        report.top3.chance,
        report.top3.masked_chance
    );
    for (tag, acc, n) in &report.top3.per_tag {
        println!("  tag {tag}: top3={acc:.4} n={n}");
    }
    let root = report.strategy(SeedStrategy::Root);
    for s in &strategies {
        let m = report.strategy(*s);
        println!(
            "{s}: mean_calls={:.3} relative_cnot_ratio={} speedup_vs_root={}",
            m.mean_calls(),
            m.relative_cnot_ratio().map_or("n/a".into(), |r| format!("{r:.4}")),
            m.speedup_vs(&root).filter(|_| !root.rows.is_empty()).map_or("n/a".into(), |r| format!("{r:.3}")),
        );
    }
    if let Some(p) = &a.out {
        let ranks = label_ranks(&model, &samples)?;
        let mut csv = String::from("block,family,width,topology_tag,template_id,label_rank,top1,top3\n");
        for (i, (s, r)) in samples.iter().zip(&ranks).enumerate() {
            csv.push_str(&format!(
                "{i},{},{},{},{},{r},{},{}\n",
                s.family,
                s.width,
                s.topology_tag,
                s.template_id,
                (*r < 1) as u8,
                (*r < 3) as u8
            ));
        }
        fs::write(p, csv)?;
    }
    if let Some(p) = &a.metrics {
        report.metrics.append_csv(p)?;
    }
    if let Some(p) = &a.pca {
        let feats: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
        let pca = pca_explained_variance(&feats)?;
        let mut buf = Vec::new();
        pca.write_csv(&mut buf)?;
        fs::write(p, buf)?;
        println!("pca: cumulative@16={:.4} degenerate={}", pca.cumulative_at(16), pca.degenerate);
    }
    Ok(())
}

fn cmd_bench_gen(a: &BenchGenArgs) -> Result<()> {
    let family: Family = a.family.parse()?;
    let c = generate(family, a.width, a.depth, a.seed)?;
    fs::write(&a.out, emit_qasm(&c))?;
    println!("qubits={} gates={} cnots={}", c.n_qubits(), c.gates().len(), c.cnot_count());
    Ok(())
}

/// Run a parsed command; returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Templates(a) => cmd_templates(a).map(|_| 0),
        Command::Optimize(a) => cmd_optimize(a),
        Command::GenDataset(a) => cmd_gen_dataset(a).map(|_| 0),
        Command::Train(a) => cmd_train(a).map(|_| 0),
        Command::Eval(a) => cmd_eval(a).map(|_| 0),
        Command::BenchGen(a) => cmd_bench_gen(a).map(|_| 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holdout_specs() {
        match parse_holdout("qft:6, tfim:5").unwrap() {
            Holdout::Pairs(p) => assert_eq!(p, vec![("qft".into(), 6), ("tfim".into(), 5)]),
            Holdout::Fraction(_) => panic!(),
        }
        assert!(matches!(parse_holdout("0.2").unwrap(), Holdout::Fraction(f) if f == 0.2));
        assert!(parse_holdout("qft").is_err());
        assert!(parse_holdout("qft:x").is_err());
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "seedsynth", "optimize", "--input", "a.qasm", "--output", "b.qasm", "--strategy", "random", "--k", "5",
            "--epsilon", "1e-9", "--seeds-per-block", "2", "--jobs", "1", "--seed", "4",
        ])
        .unwrap();
        match cli.command {
            Command::Optimize(a) => {
                assert_eq!(a.search.k, 5);
                assert_eq!(a.seeds_per_block, 2);
                assert_eq!(a.search.search().instantiation.epsilon, 1e-9);
            }
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["seedsynth", "frobnicate"]).is_err());
    }
}
