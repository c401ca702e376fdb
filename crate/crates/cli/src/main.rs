use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use marketclust::clustering::{Distance, Init, KMeansConfig};
use marketclust::corpus::{
    corpus_summary, deduplicate, ingest_products, product_vendor_distribution,
    vendor_market_distribution, write_jsonl, DedupKey, IngestMode, InputFormat, ProductRecord,
};
use marketclust::evaluation::write_facet_csv;
use marketclust::pipeline::{
    cluster_corpus, evaluate_assignments, read_assignments, read_labeled_file, read_truth,
    run_grid, run_report, write_assignments, write_labeled, ClusterOptions, Experiment, GridConfig,
    LabeledTitle,
};
use marketclust::synthgen::{generate_corpus, SynthConfig};
use marketclust::textprep::{NgramSpec, Stopwords, TextPipeline};
use marketclust::vectorizer::TfIdfModel;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "marketclust",
    version,
    about = "Categorize hacker-market product listings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a listing file and rewrite it as JSONL.
    Ingest(IngestArgs),
    /// Merge cross-posted listings into distinct products.
    Dedup(DedupArgs),
    /// Corpus counts and vendor/market histograms.
    Stats(StatsArgs),
    /// Fit a TF-IDF model over the distinct titles.
    Vectorize(VectorizeArgs),
    /// Cluster the distinct products.
    Cluster(ClusterArgs),
    /// Score assignments against truth, or run a seeded holdout evaluation.
    Evaluate(EvaluateArgs),
    /// Every feature, distance and initialization combination.
    Grid(GridArgs),
    /// Per-cluster market and vendor entropy.
    Report(ReportArgs),
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct InputArgs {
    /// Listing file (JSONL or CSV).
    #[arg(long)]
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<InputFormat>,
    /// Abort on the first bad line (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Skip bad lines and report them on stderr.
    #[arg(long)]
    lenient: bool,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<Vec<ProductRecord>> {
        let format = self
            .format
            .unwrap_or_else(|| InputFormat::from_path(&self.input));
        let mode = if self.lenient {
            IngestMode::Lenient
        } else {
            IngestMode::Strict
        };
        let ingested = ingest_products(&self.input, format, mode)?;
        for e in &ingested.skipped {
            eprintln!("{}", json!({"warning": e.kind(), "message": e.to_string()}));
        }
        Ok(ingested.records)
    }
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    output_format: OutputFormat,
}

impl OutArgs {
    fn file(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    fn path(&self, name: &str) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }

    fn ext(&self) -> &'static str {
        match self.output_format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Args)]
struct TextArgs {
    /// Feature spec such as `char:3-6` or `word:1-2`.
    #[arg(long, default_value = "char:3-6")]
    spec: NgramSpec,
    /// Replaces the built-in English stopword list.
    #[arg(long)]
    stopwords_file: Option<PathBuf>,
}

impl TextArgs {
    fn pipeline(&self) -> anyhow::Result<TextPipeline> {
        Ok(match &self.stopwords_file {
            Some(p) => TextPipeline::new(Stopwords::from_file(p)?),
            None => TextPipeline::default(),
        })
    }
}

#[derive(Args)]
struct DedupKeyArg {
    /// Merge only byte-identical titles instead of normalized ones.
    #[arg(long)]
    raw_titles: bool,
}

impl DedupKeyArg {
    fn key(&self) -> DedupKey {
        if self.raw_titles {
            DedupKey::Raw
        } else {
            DedupKey::Normalized
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DedupArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct VectorizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    text: TextArgs,
    /// Labeled titles (CSV title,label) added to the fitting vocabulary.
    #[arg(long)]
    seeds_file: Option<PathBuf>,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct KMeansArgs {
    #[arg(long, default_value = "cosine")]
    distance: Distance,
    #[arg(long, default_value = "seeded")]
    init: Init,
    /// Cluster count; seeded runs take it from the seed labels.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl KMeansArgs {
    fn config(&self, n_labels: Option<usize>, frozen: bool) -> anyhow::Result<KMeansConfig> {
        let k = match (self.init, self.k, n_labels) {
            (Init::Seeded, Some(k), Some(n)) if k != n => {
                bail!(marketclust::Error::InvalidConfig(format!(
                    "--k {k} does not match the {n} seed labels"
                )))
            }
            (Init::Seeded, _, Some(n)) => n,
            (_, Some(k), _) => k,
            (Init::Random, None, Some(n)) => n,
            (_, None, None) => KMeansConfig::default().k,
        };
        Ok(KMeansConfig {
            k,
            distance: self.distance,
            init: self.init,
            max_iter: self.max_iter,
            rng_seed: self.rng_seed,
            frozen,
            ..KMeansConfig::default()
        })
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    text: TextArgs,
    #[command(flatten)]
    kmeans: KMeansArgs,
    /// Labeled titles (CSV title,label); required for seeded init.
    #[arg(long)]
    seeds_file: Option<PathBuf>,
    /// Reuse a model written by `vectorize` instead of fitting one.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = marketclust::clustering::DEFAULT_OUTLIER_THRESHOLD)]
    outlier_threshold: f64,
    /// Skip the outlier filter.
    #[arg(long)]
    no_outlier_filter: bool,
    /// Keep the seed centroids fixed and assign once.
    #[arg(long)]
    frozen_centroids: bool,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Assignment CSV written by `cluster`.
    #[arg(long, requires = "truth")]
    assignments: Option<PathBuf>,
    /// Truth CSV of listing_id,category.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Corpus for holdout evaluation.
    #[arg(long, conflicts_with = "assignments")]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<InputFormat>,
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    seeds_file: Option<PathBuf>,
    #[arg(long, default_value_t = marketclust::pipeline::DEFAULT_HOLDOUT_FRAC)]
    holdout_frac: f64,
    /// Seed of the holdout split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[command(flatten)]
    text: TextArgs,
    #[command(flatten)]
    kmeans: KMeansArgs,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    seeds_file: PathBuf,
    #[arg(long, default_value_t = marketclust::pipeline::DEFAULT_HOLDOUT_FRAC)]
    holdout_frac: f64,
    /// Seed of the holdout split and of the first random run.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value_t = 10)]
    random_runs: usize,
    /// Restrict the grid to these specs (repeatable).
    #[arg(long)]
    spec: Vec<NgramSpec>,
    #[arg(long)]
    stopwords_file: Option<PathBuf>,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Assignment CSV written by `cluster`.
    #[arg(long)]
    assignments: PathBuf,
    #[command(flatten)]
    dedup: DedupKeyArg,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON generator config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rng_seed: Option<u64>,
    #[arg(long)]
    n_categories: Option<usize>,
    #[arg(long)]
    titles_per_category: Option<usize>,
    #[arg(long)]
    cross_list_rate: Option<f64>,
    #[arg(long)]
    keyword_overlap_rate: Option<f64>,
    /// Labeled titles written to seeds.csv.
    #[arg(long, default_value_t = 500)]
    labeled: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn labeled(path: Option<&Path>) -> anyhow::Result<Vec<LabeledTitle>> {
    Ok(match path {
        Some(p) => read_labeled_file(p)?,
        None => Vec::new(),
    })
}

fn titles(records: &[ProductRecord], key: DedupKey) -> Vec<String> {
    deduplicate(records, key)
        .into_iter()
        .map(|p| p.canonical_title)
        .collect()
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let mut w = a.out.file("listings.jsonl")?;
    write_jsonl(&records, &mut w)?;
    w.flush()?;
    println!("{}", json!({"records": records.len()}));
    Ok(())
}

fn dedup(a: DedupArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let products = deduplicate(&records, a.dedup.key());
    let mut w = a.out.file("products.jsonl")?;
    for p in &products {
        serde_json::to_writer(&mut w, p)?;
        writeln!(w)?;
    }
    w.flush()?;
    println!(
        "{}",
        json!({"listings": records.len(), "products": products.len()})
    );
    Ok(())
}

fn stats(a: StatsArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let products = deduplicate(&records, a.dedup.key());
    let summary = corpus_summary(&records, &products);
    let vm = vendor_market_distribution(&records);
    let pv = product_vendor_distribution(&products);
    match a.out.output_format {
        OutputFormat::Csv => {
            summary.write_csv(a.out.file("summary.csv")?)?;
            vm.write_csv(a.out.file("vendor_markets.csv")?)?;
            pv.write_csv(a.out.file("product_vendors.csv")?)?;
        }
        OutputFormat::Json => {
            a.out.json("summary.json", &summary)?;
            a.out.json("vendor_markets.json", &vm)?;
            a.out.json("product_vendors.json", &pv)?;
        }
    }
    println!(
        "{}",
        json!({"summary": summary, "unique_fraction": pv.unique_fraction()})
    );
    Ok(())
}

fn vectorize(a: VectorizeArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let seeds = labeled(a.seeds_file.as_deref())?;
    let mut docs = titles(&records, a.dedup.key());
    docs.extend(seeds.into_iter().map(|l| l.title));
    let mut seen = std::collections::HashSet::new();
    let docs: Vec<_> = docs
        .iter()
        .map(|t| marketclust::textprep::normalize_text(t))
        .filter(|t| seen.insert(t.clone()))
        .collect();
    let model = TfIdfModel::fit(&docs, a.text.spec, a.text.pipeline()?)?;
    model.save_json(&a.out.path("model.json")?)?;
    let mut w = a.out.file("vectors.jsonl")?;
    for (doc, v) in docs.iter().zip(model.transform_all(&docs)) {
        serde_json::to_writer(&mut w, &json!({"title": doc, "vector": v}))?;
        writeln!(w)?;
    }
    w.flush()?;
    println!(
        "{}",
        json!({"documents": docs.len(), "features": model.dim(), "spec": a.text.spec.to_string()})
    );
    Ok(())
}

fn cluster(a: ClusterArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let seeds = labeled(a.seeds_file.as_deref())?;
    let n_labels = (!seeds.is_empty()).then(|| {
        seeds
            .iter()
            .map(|l| l.label.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    });
    let model = a.model.as_deref().map(TfIdfModel::load_json).transpose()?;
    let spec = model.as_ref().map_or(a.text.spec, TfIdfModel::spec);
    let options = ClusterOptions {
        kmeans: a.kmeans.config(n_labels, a.frozen_centroids)?,
        outlier_threshold: (!a.no_outlier_filter).then_some(a.outlier_threshold),
        dedup: a.dedup.key(),
    };
    let run = cluster_corpus(&records, &seeds, spec, a.text.pipeline()?, model, &options)?;
    if a.model.is_none() {
        run.model.save_json(&a.out.path("model.json")?)?;
    }
    run.centroids.save_json(&a.out.path("centroids.json")?)?;
    let rows = run.assignment_rows();
    write_assignments(&rows, a.out.file("assignments.csv")?)?;
    let mut w = csv_writer(a.out.file("outliers.csv")?);
    w.write_record(["title", "max_similarity"])?;
    for &i in &run.outliers {
        w.write_record([
            run.products[i].canonical_title.clone(),
            run.seed_similarity[i].to_string(),
        ])?;
    }
    w.flush()?;
    println!(
        "{}",
        json!({
            "products": run.products.len(),
            "clustered": run.kept.len(),
            "outliers": run.outliers.len(),
            "k": run.centroids.k(),
            "iterations": run.result.n_iterations,
            "converged": run.result.converged,
            "objective": run.result.objective,
        })
    );
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let report = if let Some(path) = &a.assignments {
        let truth_path = a
            .truth
            .as_ref()
            .context("--truth is required with --assignments")?;
        let rows = read_assignments(open(path)?)?;
        let truth = read_truth(open(truth_path)?)?;
        evaluate_assignments(&rows, &truth)?
    } else {
        let input = InputArgs {
            input: a
                .input
                .clone()
                .context("either --assignments or --input is required")?,
            format: a.format,
            strict: !a.lenient,
            lenient: a.lenient,
        };
        let seeds_file = a
            .seeds_file
            .as_deref()
            .context("holdout evaluation needs --seeds-file")?;
        let records = input.load()?;
        let seeds = read_labeled_file(seeds_file)?;
        let exp = Experiment::new(
            &titles(&records, a.dedup.key()),
            &seeds,
            a.holdout_frac,
            a.split_seed,
            a.text.pipeline()?,
        )?;
        let space = exp.features(a.text.spec)?;
        let config = a.kmeans.config(Some(exp.n_labels()), false)?;
        space.evaluate(config.distance, config.init, &config)?
    };
    match a.out.output_format {
        OutputFormat::Json => a.out.json("metrics.json", &report)?,
        OutputFormat::Csv => {
            let mut w = csv_writer(a.out.file("metrics.csv")?);
            w.write_record(["metric", "value"])?;
            w.write_record(["rand_index".to_string(), report.rand_index.to_string()])?;
            w.write_record([
                "total_entropy_bits".to_string(),
                report.total_entropy_bits.to_string(),
            ])?;
            w.write_record(["n_points".to_string(), report.n_points.to_string()])?;
            w.flush()?;
            let mut w = csv_writer(a.out.file("cluster_entropy.csv")?);
            w.write_record(["cluster", "size", "entropy_bits"])?;
            for c in &report.per_cluster_entropy {
                w.write_record([
                    c.cluster.to_string(),
                    c.size.to_string(),
                    c.entropy_bits.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    println!(
        "{}",
        json!({"rand_index": report.rand_index, "total_entropy_bits": report.total_entropy_bits, "n_points": report.n_points})
    );
    Ok(())
}

fn grid(a: GridArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let seeds = read_labeled_file(&a.seeds_file)?;
    let pipeline = match &a.stopwords_file {
        Some(p) => TextPipeline::new(Stopwords::from_file(p)?),
        None => TextPipeline::default(),
    };
    let exp = Experiment::new(
        &titles(&records, a.dedup.key()),
        &seeds,
        a.holdout_frac,
        a.rng_seed,
        pipeline,
    )?;
    let mut config = GridConfig {
        random_runs: a.random_runs,
        rng_seed: a.rng_seed,
        ..GridConfig::default()
    };
    if !a.spec.is_empty() {
        if !a.spec.contains(&config.random_spec) {
            config.random_spec = a.spec[0];
        }
        config.specs = a.spec;
    }
    let table = run_grid(&exp, &config)?;
    match a.out.output_format {
        OutputFormat::Csv => {
            table.write_panels_csv(a.out.file("grid_panels.csv")?)?;
            table.write_cells_csv(a.out.file("grid_cells.csv")?)?;
        }
        OutputFormat::Json => a.out.json("grid.json", &table)?,
    }
    println!(
        "{}",
        json!({"cells": table.cells.len(), "labels": exp.n_labels()})
    );
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let records = a.input.load()?;
    let rows = read_assignments(open(&a.assignments)?)?;
    let report = run_report(&records, &rows, a.dedup.key())?;
    match a.out.output_format {
        OutputFormat::Csv => {
            write_facet_csv(&report.rows, a.out.file("facet_entropy.csv")?)?;
            report
                .vendor_markets
                .write_csv(a.out.file("vendor_markets.csv")?)?;
            report
                .product_vendors
                .write_csv(a.out.file("product_vendors.csv")?)?;
        }
        OutputFormat::Json => a.out.json("report.json", &report)?,
    }
    println!(
        "{}",
        json!({"clusters": report.rows.len(), "file": format!("facet_entropy.{}", a.out.ext())})
    );
    Ok(())
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut config: SynthConfig = match &a.config {
        Some(p) => serde_json::from_reader(open(p)?).map_err(marketclust::Error::from)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.rng_seed {
        config.rng_seed = v;
    }
    if let Some(v) = a.n_categories {
        config.n_categories = v;
    }
    if let Some(v) = a.titles_per_category {
        config.titles_per_category = v;
    }
    if let Some(v) = a.cross_list_rate {
        config.cross_list_rate = v;
    }
    if let Some(v) = a.keyword_overlap_rate {
        config.keyword_overlap_rate = v;
    }
    let corpus = generate_corpus(&config)?;
    let out = OutArgs {
        out_dir: a.out_dir,
        output_format: OutputFormat::Json,
    };
    let mut w = out.file("listings.jsonl")?;
    write_jsonl(&corpus.records, &mut w)?;
    w.flush()?;
    corpus.write_truth_csv(out.file("truth.csv")?)?;
    let seeds: Vec<LabeledTitle> = corpus
        .labeled_sample(a.labeled, config.rng_seed)
        .into_iter()
        .map(|(t, l)| LabeledTitle::new(t, l))
        .collect();
    write_labeled(&seeds, out.file("seeds.csv")?)?;
    out.json("config.json", &config)?;
    println!(
        "{}",
        json!({"listings": corpus.records.len(), "products": corpus.products.len(), "labeled": seeds.len()})
    );
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).map_err(|e| {
        anyhow::Error::from(marketclust::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(e) = e.downcast_ref::<marketclust::Error>() {
        return e.kind();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    "error"
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Dedup(a) => dedup(a),
        Command::Stats(a) => stats(a),
        Command::Vectorize(a) => vectorize(a),
        Command::Cluster(a) => cluster(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Grid(a) => grid(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "usage", "message": first}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Join the cause chain, dropping causes already quoted by a parent.
            let mut message = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if message.contains(&cause) {
                    continue;
                }
                if !message.is_empty() {
                    message.push_str(": ");
                }
                message.push_str(&cause);
            }
            let message = message.replace('\n', " ");
            eprintln!("{}", json!({"error": error_kind(&e), "message": message}));
            ExitCode::FAILURE
        }
    }
}
