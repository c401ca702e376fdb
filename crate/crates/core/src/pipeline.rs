//! End-to-end experiment drivers: holdout evaluation over the feature ×
//! distance × initialization grid, full-corpus clustering with outlier
//! removal, and the per-cluster diversity report.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    filter_outliers, kmeans, kmeans_from, seed_centroids, CentroidSet, ClusteringResult, Distance,
    Init, KMeansConfig, LabeledSeedSet,
};
use crate::corpus::{
    deduplicate, product_vendor_distribution, vendor_market_distribution, DedupKey,
    DistinctProduct, DistributionHistogram, ProductRecord,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate, facet_entropy_report, holdout_evaluate, EvalReport, FacetEntropyRow,
};
use crate::textprep::{normalize_text, NgramSpec, NormalizedTitle, TextPipeline, STANDARD_SPECS};
use crate::vectorizer::{SparseVector, TfIdfModel};

/// Default share of labeled samples held out for scoring (100 of 500).
pub const DEFAULT_HOLDOUT_FRAC: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTitle {
    pub title: String,
    pub label: String,
}

impl LabeledTitle {
    pub fn new(title: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            label: label.into(),
        }
    }
}

/// Reads a `title,label` CSV with a header row.
pub fn read_labeled<R: Read>(reader: R) -> Result<Vec<LabeledTitle>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<LabeledTitle>() {
        let row = row?;
        if row.title.trim().is_empty() || row.label.trim().is_empty() {
            return Err(Error::InvalidConfig(
                "seed rows need a title and a label".into(),
            ));
        }
        out.push(row);
    }
    Ok(out)
}

pub fn read_labeled_file(path: &Path) -> Result<Vec<LabeledTitle>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_labeled(std::io::BufReader::new(file))
}

pub fn write_labeled<W: Write>(rows: &[LabeledTitle], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Errors with the labels of `required` that `labeled` lacks.
pub fn check_label_coverage<'a>(
    labeled: &[LabeledTitle],
    required: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let present: HashSet<&str> = labeled.iter().map(|l| l.label.as_str()).collect();
    let missing: BTreeSet<String> = required
        .into_iter()
        .filter(|l| !present.contains(l))
        .map(String::from)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingLabels(missing.into_iter().collect()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub train: Vec<LabeledTitle>,
    pub holdout: Vec<LabeledTitle>,
}

/// Per-label split: each label holds out `round(frac * size)` samples but
/// always keeps at least one for training.
pub fn split_labeled(
    labeled: &[LabeledTitle],
    holdout_frac: f64,
    rng_seed: u64,
) -> Result<HoldoutSplit> {
    if !(holdout_frac > 0.0 && holdout_frac < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must be in (0, 1), got {holdout_frac}"
        )));
    }
    let mut by_label: BTreeMap<&str, Vec<&LabeledTitle>> = BTreeMap::new();
    for l in labeled {
        by_label.entry(l.label.as_str()).or_default().push(l);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut split = HoldoutSplit {
        train: Vec::new(),
        holdout: Vec::new(),
    };
    // Largest-remainder apportionment so the holdout total is exactly
    // round(frac * N), with at least one training title per label.
    let quotas: Vec<f64> = by_label
        .values()
        .map(|m| holdout_frac * m.len() as f64)
        .collect();
    let mut counts: Vec<usize> = by_label
        .values()
        .zip(&quotas)
        .map(|(m, q)| (q.floor() as usize).min(m.len() - 1))
        .collect();
    let target = (holdout_frac * labeled.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor()))
    });
    let sizes: Vec<usize> = by_label.values().map(Vec::len).collect();
    let mut assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(order.len() * 2) {
        if assigned >= target {
            break;
        }
        if counts[i] + 1 < sizes[i] {
            counts[i] += 1;
            assigned += 1;
        }
    }
    for (members, n_holdout) in by_label.values_mut().zip(counts) {
        members.shuffle(&mut rng);
        split
            .holdout
            .extend(members[..n_holdout].iter().map(|&l| l.clone()));
        split
            .train
            .extend(members[n_holdout..].iter().map(|&l| l.clone()));
    }
    Ok(split)
}

fn unique_titles<'a>(titles: impl IntoIterator<Item = &'a str>) -> Vec<NormalizedTitle> {
    let mut seen = HashSet::new();
    titles
        .into_iter()
        .map(normalize_text)
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

fn seed_set(model: &TfIdfModel, labeled: &[LabeledTitle]) -> LabeledSeedSet {
    labeled
        .iter()
        .map(|l| (l.label.clone(), model.transform(&normalize_text(&l.title))))
        .collect()
}

/// Corpus titles and a labeled holdout split, ready to be vectorized under
/// any n-gram configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    corpus: Vec<NormalizedTitle>,
    split: HoldoutSplit,
    pipeline: TextPipeline,
}

/// One n-gram configuration applied to an [`Experiment`].
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    pub model: TfIdfModel,
    pub train_points: Vec<SparseVector>,
    pub seeds: LabeledSeedSet,
    pub holdout_points: Vec<SparseVector>,
    pub holdout_truth: Vec<String>,
}

impl Experiment {
    /// `corpus` holds the unlabeled product titles; holdout titles are
    /// removed from it before clustering.
    pub fn new(
        corpus: &[String],
        labeled: &[LabeledTitle],
        holdout_frac: f64,
        split_seed: u64,
        pipeline: TextPipeline,
    ) -> Result<Self> {
        let split = split_labeled(labeled, holdout_frac, split_seed)?;
        Self::from_split(corpus, split, pipeline)
    }

    pub fn from_split(
        corpus: &[String],
        split: HoldoutSplit,
        pipeline: TextPipeline,
    ) -> Result<Self> {
        if split.train.is_empty() || split.holdout.len() < 2 {
            return Err(Error::InvalidConfig(
                "need at least one training and two holdout samples".into(),
            ));
        }
        let holdout: HashSet<NormalizedTitle> = split
            .holdout
            .iter()
            .map(|l| normalize_text(&l.title))
            .collect();
        let corpus = unique_titles(corpus.iter().map(String::as_str))
            .into_iter()
            .filter(|t| !holdout.contains(t))
            .collect();
        Ok(Self {
            corpus,
            split,
            pipeline,
        })
    }

    pub fn split(&self) -> &HoldoutSplit {
        &self.split
    }

    pub fn n_labels(&self) -> usize {
        self.split
            .train
            .iter()
            .map(|l| &l.label)
            .collect::<HashSet<_>>()
            .len()
    }

    /// Fits TF-IDF on corpus and labeled titles together and vectorizes
    /// every part.
    pub fn features(&self, spec: NgramSpec) -> Result<FeatureSpace> {
        let docs = unique_titles(
            self.corpus
                .iter()
                .map(NormalizedTitle::as_str)
                .chain(self.split.train.iter().map(|l| l.title.as_str()))
                .chain(self.split.holdout.iter().map(|l| l.title.as_str())),
        );
        let model = TfIdfModel::fit(&docs, spec, self.pipeline.clone())?;
        let train_points = model.transform_all(&self.corpus);
        let seeds = seed_set(&model, &self.split.train);
        let holdout_points = self
            .split
            .holdout
            .iter()
            .map(|l| model.transform(&normalize_text(&l.title)))
            .collect();
        let holdout_truth = self.split.holdout.iter().map(|l| l.label.clone()).collect();
        Ok(FeatureSpace {
            model,
            train_points,
            seeds,
            holdout_points,
            holdout_truth,
        })
    }
}

impl FeatureSpace {
    /// Holdout evaluation for one distance / initialization. `base` supplies
    /// iteration limits, the frozen flag and the rng seed; `k` follows the
    /// label count.
    pub fn evaluate(
        &self,
        distance: Distance,
        init: Init,
        base: &KMeansConfig,
    ) -> Result<EvalReport> {
        let config = KMeansConfig {
            k: self.seeds.len(),
            distance,
            init,
            frozen: base.frozen && init == Init::Seeded,
            ..base.clone()
        };
        let train: Vec<SparseVector>;
        let points = if self.train_points.is_empty() {
            // Nothing unlabeled: cluster the training seeds themselves.
            train = self.seeds.groups().values().flatten().cloned().collect();
            &train
        } else {
            &self.train_points
        };
        let seeds = (init == Init::Seeded).then_some(&self.seeds);
        let (report, _) = holdout_evaluate(
            points,
            &self.holdout_points,
            &self.holdout_truth,
            self.model.dim(),
            &config,
            seeds,
        )?;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub specs: Vec<NgramSpec>,
    pub distances: Vec<Distance>,
    pub inits: Vec<Init>,
    /// Random-initialization runs averaged per cell.
    pub random_runs: usize,
    /// Rng seed of the first random run; run `i` uses `rng_seed + i`.
    pub rng_seed: u64,
    /// Feature configuration shown in the panels' "Random" column.
    pub random_spec: NgramSpec,
    pub kmeans: KMeansConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            specs: STANDARD_SPECS.to_vec(),
            distances: vec![Distance::Cosine, Distance::Euclidean],
            inits: vec![Init::Seeded, Init::Random],
            random_runs: 10,
            rng_seed: 0,
            random_spec: NgramSpec::char(3, 6),
            kmeans: KMeansConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: NgramSpec,
    pub distance: Distance,
    pub init: Init,
    pub runs: usize,
    pub rand_index_mean: f64,
    pub rand_index_sd: f64,
    pub entropy_mean: f64,
    pub entropy_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub specs: Vec<NgramSpec>,
    pub distances: Vec<Distance>,
    pub random_spec: NgramSpec,
    pub cells: Vec<GridCell>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn capitalized(d: Distance) -> &'static str {
    match d {
        Distance::Cosine => "Cosine",
        Distance::Euclidean => "Euclidean",
    }
}

impl GridTable {
    pub fn cell(&self, spec: NgramSpec, distance: Distance, init: Init) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.spec == spec && c.distance == distance && c.init == init)
    }

    /// Header row of the panel layout.
    pub fn panel_header(&self) -> Vec<String> {
        let mut h = vec!["Panel".to_string(), "Distance".to_string()];
        h.extend(self.specs.iter().map(ToString::to_string));
        h.push("Random".into());
        h
    }

    /// The two panels (Rand-index, then Entropy), one row per distance,
    /// seeded cells per feature configuration plus the random baseline.
    pub fn panel_rows(&self) -> Vec<Vec<String>> {
        let fmt = |c: Option<&GridCell>, entropy: bool| match c {
            Some(c) if entropy => format!("{:.3}", c.entropy_mean),
            Some(c) => format!("{:.3}", c.rand_index_mean),
            None => String::new(),
        };
        let mut rows = Vec::new();
        for (panel, entropy) in [("Rand-index", false), ("Entropy", true)] {
            for &d in &self.distances {
                let mut row = vec![panel.to_string(), capitalized(d).to_string()];
                for &spec in &self.specs {
                    row.push(fmt(self.cell(spec, d, Init::Seeded), entropy));
                }
                row.push(fmt(self.cell(self.random_spec, d, Init::Random), entropy));
                rows.push(row);
            }
        }
        rows
    }

    pub fn write_panels_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.panel_header())?;
        for row in self.panel_rows() {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }

    /// One row per cell with full-precision means and standard deviations.
    pub fn write_cells_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "spec",
            "distance",
            "init",
            "runs",
            "rand_index_mean",
            "rand_index_sd",
            "entropy_mean",
            "entropy_sd",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.spec.to_string(),
                c.distance.to_string(),
                c.init.to_string(),
                c.runs.to_string(),
                c.rand_index_mean.to_string(),
                c.rand_index_sd.to_string(),
                c.entropy_mean.to_string(),
                c.entropy_sd.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }
}

/// Runs holdout evaluation for every spec × distance × init. Seeded cells
/// are a single deterministic run; random cells average `random_runs` runs.
pub fn run_grid(experiment: &Experiment, config: &GridConfig) -> Result<GridTable> {
    if config.specs.is_empty() || config.distances.is_empty() || config.inits.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    if config.inits.contains(&Init::Random) && config.random_runs == 0 {
        return Err(Error::InvalidConfig(
            "random_runs must be at least 1".into(),
        ));
    }
    let mut cells = Vec::new();
    for &spec in &config.specs {
        let space = experiment.features(spec)?;
        for &distance in &config.distances {
            for &init in &config.inits {
                let runs = match init {
                    Init::Seeded => 1,
                    Init::Random => config.random_runs,
                };
                let mut ri = Vec::with_capacity(runs);
                let mut ent = Vec::with_capacity(runs);
                for run in 0..runs {
                    let base = KMeansConfig {
                        rng_seed: config.rng_seed.wrapping_add(run as u64),
                        ..config.kmeans.clone()
                    };
                    let report = space.evaluate(distance, init, &base)?;
                    ri.push(report.rand_index);
                    ent.push(report.total_entropy_bits);
                }
                let (rand_index_mean, rand_index_sd) = mean_sd(&ri);
                let (entropy_mean, entropy_sd) = mean_sd(&ent);
                cells.push(GridCell {
                    spec,
                    distance,
                    init,
                    runs,
                    rand_index_mean,
                    rand_index_sd,
                    entropy_mean,
                    entropy_sd,
                });
            }
        }
    }
    let random_spec = if config.specs.contains(&config.random_spec) {
        config.random_spec
    } else {
        config.specs[0]
    };
    Ok(GridTable {
        specs: config.specs.clone(),
        distances: config.distances.clone(),
        random_spec,
        cells,
    })
}

/// Full-corpus clustering output. `result` covers only the kept products.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub products: Vec<DistinctProduct>,
    pub model: TfIdfModel,
    pub centroids: CentroidSet,
    pub result: ClusteringResult,
    /// Product indices that were clustered, aligned with `result`.
    pub kept: Vec<usize>,
    pub outliers: Vec<usize>,
    /// Best cosine similarity of each product to the seed centroids; empty
    /// when no outlier filter ran.
    pub seed_similarity: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClusterOptions {
    pub kmeans: KMeansConfig,
    /// Applied against the seed centroids before clustering (seeded init
    /// only); `None` disables the filter.
    pub outlier_threshold: Option<f64>,
    pub dedup: DedupKey,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            kmeans: KMeansConfig::default(),
            outlier_threshold: Some(crate::clustering::DEFAULT_OUTLIER_THRESHOLD),
            dedup: DedupKey::Normalized,
        }
    }
}

/// Deduplicates, vectorizes and clusters a corpus. With seeded init the
/// labeled titles define the starting centroids, products below the outlier
/// threshold are dropped, and K-means runs on the rest. `model` is fitted
/// on product and labeled titles when not supplied.
pub fn cluster_corpus(
    records: &[ProductRecord],
    labeled: &[LabeledTitle],
    spec: NgramSpec,
    pipeline: TextPipeline,
    model: Option<TfIdfModel>,
    options: &ClusterOptions,
) -> Result<ClusterRun> {
    let products = deduplicate(records, options.dedup);
    if products.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let titles: Vec<NormalizedTitle> = products
        .iter()
        .map(|p| normalize_text(&p.canonical_title))
        .collect();
    let model = match model {
        Some(m) => m,
        None => {
            let docs = unique_titles(
                titles
                    .iter()
                    .map(NormalizedTitle::as_str)
                    .chain(labeled.iter().map(|l| l.title.as_str())),
            );
            TfIdfModel::fit(&docs, spec, pipeline)?
        }
    };
    let points = model.transform_all(&titles);
    let dim = model.dim();
    let config = &options.kmeans;

    let (centroids, result, kept, outliers, seed_similarity) = match config.init {
        Init::Seeded => {
            let seeds = seed_set(&model, labeled);
            if seeds.is_empty() {
                return Err(Error::InvalidConfig(
                    "seeded init requires labeled titles".into(),
                ));
            }
            let initial = seed_centroids(&seeds, dim, config.distance)?;
            let (kept, outliers, sims) = match options.outlier_threshold {
                Some(t) => {
                    let split = filter_outliers(&points, &initial, t)?;
                    (split.kept, split.outliers, split.max_similarity)
                }
                None => ((0..points.len()).collect(), Vec::new(), Vec::new()),
            };
            if kept.is_empty() {
                return Err(Error::TooFewPoints { needed: 1, got: 0 });
            }
            let kept_points: Vec<SparseVector> = kept.iter().map(|&i| points[i].clone()).collect();
            let config = KMeansConfig {
                k: seeds.len(),
                ..config.clone()
            };
            let (c, r) = kmeans_from(&kept_points, initial, &config)?;
            (c, r, kept, outliers, sims)
        }
        Init::Random => {
            let (c, r) = kmeans(&points, dim, config, None)?;
            ((c), r, (0..points.len()).collect(), Vec::new(), Vec::new())
        }
    };
    Ok(ClusterRun {
        products,
        model,
        centroids,
        result,
        kept,
        outliers,
        seed_similarity,
    })
}

/// One clustered listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub listing_id: String,
    pub cluster_index: usize,
    pub cluster_label: String,
    pub best_score: f64,
}

impl ClusterRun {
    /// One row per listing of every kept product, in product order.
    pub fn assignment_rows(&self) -> Vec<AssignmentRow> {
        let mut rows = Vec::new();
        for (pos, &p) in self.kept.iter().enumerate() {
            let cluster = self.result.assignment[pos];
            for id in &self.products[p].listing_ids {
                rows.push(AssignmentRow {
                    listing_id: id.clone(),
                    cluster_index: cluster,
                    cluster_label: self.centroids.name(cluster),
                    best_score: self.result.best_score[pos],
                });
            }
        }
        rows
    }
}

pub fn write_assignments<W: Write>(rows: &[AssignmentRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn read_assignments<R: Read>(reader: R) -> Result<Vec<AssignmentRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Scores listing-level assignments against `listing_id → category` truth.
/// Listings without truth are skipped.
pub fn evaluate_assignments(
    rows: &[AssignmentRow],
    truth: &HashMap<String, String>,
) -> Result<EvalReport> {
    let (pred, labels): (Vec<usize>, Vec<&str>) = rows
        .iter()
        .filter_map(|r| {
            truth
                .get(&r.listing_id)
                .map(|t| (r.cluster_index, t.as_str()))
        })
        .unzip();
    evaluate(&pred, &labels)
}

/// Reads `listing_id,category` rows.
pub fn read_truth<R: Read>(reader: R) -> Result<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::InvalidConfig(
                "truth rows need listing_id,category".into(),
            ));
        }
        out.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<FacetEntropyRow>,
    pub vendor_markets: DistributionHistogram,
    pub product_vendors: DistributionHistogram,
}

/// Ranked market/vendor diversity per cluster plus the corpus histograms.
/// Assignments naming unknown listings are an error.
pub fn run_report(
    records: &[ProductRecord],
    assignments: &[AssignmentRow],
    dedup: DedupKey,
) -> Result<Report> {
    let by_id: HashMap<&str, &ProductRecord> =
        records.iter().map(|r| (r.listing_id.as_str(), r)).collect();
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut clustered = Vec::with_capacity(assignments.len());
    let mut assignment = Vec::with_capacity(assignments.len());
    for row in assignments {
        let rec = by_id.get(row.listing_id.as_str()).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "assignment for unknown listing {:?}",
                row.listing_id
            ))
        })?;
        names
            .entry(row.cluster_index)
            .or_insert_with(|| row.cluster_label.clone());
        clustered.push(*rec);
        assignment.push(row.cluster_index);
    }
    let n_names = names.keys().next_back().map_or(0, |&m| m + 1);
    let names: Vec<String> = (0..n_names)
        .map(|i| names.get(&i).cloned().unwrap_or_else(|| i.to_string()))
        .collect();
    let rows = facet_entropy_report(&assignment, &clustered, &names)?;
    let products = deduplicate(records, dedup);
    Ok(Report {
        rows,
        vendor_markets: vendor_market_distribution(records),
        product_vendors: product_vendor_distribution(&products),
    })
}
