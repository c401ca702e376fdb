//! K-means over sparse TF-IDF vectors with dense centroids.
//!
//! Cosine mode is spherical K-means: a point joins the centroid with the
//! highest cosine similarity and centroids are re-normalized member sums.
//! Euclidean mode is plain Lloyd iteration. Centroids start either from the
//! means of labeled seed groups or from `k` distinct randomly drawn points.
//! Ties always go to the lowest cluster index.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorizer::SparseVector;

/// Outlier cutoff on the best cosine similarity to any centroid.
pub const DEFAULT_OUTLIER_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Cosine,
    Euclidean,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Cosine => "cosine",
            Distance::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Distance::Cosine),
            "euclidean" => Ok(Distance::Euclidean),
            _ => Err(Error::InvalidConfig(format!("unknown distance {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Seeded,
    Random,
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::Seeded => "seeded",
            Init::Random => "random",
        })
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "seeded" => Ok(Init::Seeded),
            "random" => Ok(Init::Random),
            _ => Err(Error::InvalidConfig(format!("unknown init {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub distance: Distance,
    pub init: Init,
    pub max_iter: usize,
    /// Stop once no centroid coordinate moves by more than this.
    pub tol: f64,
    pub rng_seed: u64,
    /// Seeded init only: assign to the seed centroids without updating them.
    pub frozen: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 34,
            distance: Distance::Cosine,
            init: Init::Seeded,
            max_iter: 100,
            tol: 1e-6,
            rng_seed: 0,
            frozen: false,
        }
    }
}

impl KMeansConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tol must be >= 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Labeled example vectors, one group per label. Labels iterate in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSeedSet {
    groups: BTreeMap<String, Vec<SparseVector>>,
}

impl LabeledSeedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: impl Into<String>, vector: SparseVector) {
        self.groups.entry(label.into()).or_default().push(vector);
    }

    /// Registers a label with no vectors yet; [`seed_centroids`] rejects it
    /// unless vectors are added.
    pub fn declare(&mut self, label: impl Into<String>) {
        self.groups.entry(label.into()).or_default();
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<SparseVector>> {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

impl FromIterator<(String, SparseVector)> for LabeledSeedSet {
    fn from_iter<I: IntoIterator<Item = (String, SparseVector)>>(iter: I) -> Self {
        let mut set = Self::new();
        for (label, v) in iter {
            set.push(label, v);
        }
        set
    }
}

/// `k` dense centroids in a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    dim: usize,
    centroids: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl CentroidSet {
    pub fn new(dim: usize, centroids: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(c) = centroids.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.len(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != centroids.len() {
                return Err(Error::LengthMismatch {
                    left: labels.len(),
                    right: centroids.len(),
                });
            }
        }
        Ok(Self {
            dim,
            centroids,
            labels,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The label of cluster `i`, or its index when unlabeled.
    pub fn name(&self, i: usize) -> String {
        match &self.labels {
            Some(labels) => labels[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &CentroidFile::from(self))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: CentroidFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct CentroidFile {
    dim: usize,
    centroids: Vec<CentroidEntry>,
}

#[derive(Serialize, Deserialize)]
struct CentroidEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    entries: SparseVector,
}

impl From<&CentroidSet> for CentroidFile {
    fn from(set: &CentroidSet) -> Self {
        let centroids = set
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| CentroidEntry {
                label: set.labels.as_ref().map(|l| l[i].clone()),
                entries: SparseVector::from_dense(c),
            })
            .collect();
        Self {
            dim: set.dim,
            centroids,
        }
    }
}

impl TryFrom<CentroidFile> for CentroidSet {
    type Error = Error;

    fn try_from(f: CentroidFile) -> Result<Self> {
        let labeled = f.centroids.iter().filter(|c| c.label.is_some()).count();
        let labels = match labeled {
            0 => None,
            n if n == f.centroids.len() => Some(
                f.centroids
                    .iter()
                    .map(|c| c.label.clone().unwrap())
                    .collect(),
            ),
            _ => {
                return Err(Error::InvalidConfig(
                    "either all centroids are labeled or none".into(),
                ))
            }
        };
        let mut dense = Vec::with_capacity(f.centroids.len());
        for c in &f.centroids {
            if c.entries.min_dim() > f.dim {
                return Err(Error::DimensionMismatch {
                    expected: f.dim,
                    got: c.entries.min_dim(),
                });
            }
            dense.push(c.entries.to_dense(f.dim));
        }
        CentroidSet::new(f.dim, dense, labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub assignment: Vec<usize>,
    /// Cosine similarity (cosine mode) or Euclidean distance to the assigned
    /// centroid.
    pub best_score: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Sum of similarities (cosine) or of squared distances (Euclidean)
    /// under the final assignment.
    pub objective: f64,
    /// Objective after every assignment pass, in order.
    pub objective_trace: Vec<f64>,
}

fn check_dims(points: &[SparseVector], dim: usize) -> Result<()> {
    match points.iter().map(SparseVector::min_dim).max() {
        Some(d) if d > dim => Err(Error::DimensionMismatch {
            expected: dim,
            got: d,
        }),
        _ => Ok(()),
    }
}

fn normalize_dense(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

/// Per-label mean of the seed vectors, re-normalized in cosine mode.
/// Centroids come out in lexicographic label order.
pub fn seed_centroids(
    seeds: &LabeledSeedSet,
    dim: usize,
    distance: Distance,
) -> Result<CentroidSet> {
    let mut centroids = Vec::with_capacity(seeds.len());
    let mut labels = Vec::with_capacity(seeds.len());
    for (label, vectors) in &seeds.groups {
        if vectors.is_empty() {
            return Err(Error::EmptySeedGroup(label.clone()));
        }
        check_dims(vectors, dim)?;
        let mut mean = vec![0.0; dim];
        let scale = 1.0 / vectors.len() as f64;
        for v in vectors {
            v.add_to_dense(&mut mean, scale);
        }
        let nonzero = match distance {
            Distance::Cosine => normalize_dense(&mut mean),
            Distance::Euclidean => mean.iter().any(|&x| x != 0.0),
        };
        if !nonzero {
            return Err(Error::DegenerateSeedGroup(label.clone()));
        }
        centroids.push(mean);
        labels.push(label.clone());
    }
    CentroidSet::new(dim, centroids, Some(labels))
}

/// Nearest-centroid scorer with per-call cached centroid norms.
struct Scorer<'a> {
    distance: Distance,
    centroids: &'a [Vec<f64>],
    norms_sq: Vec<f64>,
}

impl<'a> Scorer<'a> {
    fn new(distance: Distance, centroids: &'a [Vec<f64>]) -> Self {
        let norms_sq = centroids
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum())
            .collect();
        Self {
            distance,
            centroids,
            norms_sq,
        }
    }

    /// Returns (cluster, raw score) where raw score is cosine similarity or
    /// squared distance.
    fn best(&self, point: &SparseVector, point_norm_sq: f64) -> (usize, f64) {
        let mut best = (0, 0.0);
        for (c, centroid) in self.centroids.iter().enumerate() {
            let dot = point.dot_dense(centroid);
            let score = match self.distance {
                Distance::Cosine => {
                    let denom = (point_norm_sq * self.norms_sq[c]).sqrt();
                    if denom > 0.0 {
                        dot / denom
                    } else {
                        0.0
                    }
                }
                Distance::Euclidean => (point_norm_sq - 2.0 * dot + self.norms_sq[c]).max(0.0),
            };
            let better = match self.distance {
                Distance::Cosine => score > best.1,
                Distance::Euclidean => score < best.1,
            };
            if c == 0 || better {
                best = (c, score);
            }
        }
        best
    }
}

fn assign_raw(
    points: &[SparseVector],
    norms_sq: &[f64],
    centroids: &CentroidSet,
    distance: Distance,
) -> (Vec<usize>, Vec<f64>) {
    let scorer = Scorer::new(distance, &centroids.centroids);
    points
        .iter()
        .zip(norms_sq)
        .map(|(p, &n)| scorer.best(p, n))
        .unzip()
}

fn raw_objective(raw_scores: &[f64]) -> f64 {
    raw_scores.iter().sum()
}

fn finish_scores(distance: Distance, raw: Vec<f64>) -> Vec<f64> {
    match distance {
        Distance::Cosine => raw,
        Distance::Euclidean => raw.into_iter().map(f64::sqrt).collect(),
    }
}

/// Assigns every point to its nearest centroid. Scores are cosine
/// similarities or Euclidean distances.
pub fn assign(
    points: &[SparseVector],
    centroids: &CentroidSet,
    distance: Distance,
) -> Result<(Vec<usize>, Vec<f64>)> {
    check_dims(points, centroids.dim)?;
    if centroids.k() == 0 {
        return Err(Error::InvalidConfig("no centroids".into()));
    }
    let norms: Vec<f64> = points.iter().map(SparseVector::norm_squared).collect();
    let (a, raw) = assign_raw(points, &norms, centroids, distance);
    Ok((a, finish_scores(distance, raw)))
}

/// Runs K-means. Seeded init derives centroids from `seeds` (which must
/// carry exactly `config.k` labels); random init draws `config.k` distinct
/// points using `config.rng_seed`.
pub fn kmeans(
    points: &[SparseVector],
    dim: usize,
    config: &KMeansConfig,
    seeds: Option<&LabeledSeedSet>,
) -> Result<(CentroidSet, ClusteringResult)> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    check_dims(points, dim)?;
    let initial = match config.init {
        Init::Seeded => {
            let seeds = seeds.ok_or_else(|| {
                Error::InvalidConfig("seeded init requires a labeled seed set".into())
            })?;
            if seeds.len() != config.k {
                return Err(Error::InvalidConfig(format!(
                    "k = {} but the seed set has {} labels",
                    config.k,
                    seeds.len()
                )));
            }
            seed_centroids(seeds, dim, config.distance)?
        }
        Init::Random => random_centroids(points, dim, config)?,
    };
    kmeans_from(points, initial, config)
}

fn random_centroids(
    points: &[SparseVector],
    dim: usize,
    config: &KMeansConfig,
) -> Result<CentroidSet> {
    if config.k > points.len() {
        return Err(Error::TooFewPoints {
            needed: config.k,
            got: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let picks = rand::seq::index::sample(&mut rng, points.len(), config.k);
    let centroids = picks
        .iter()
        .map(|i| {
            let mut c = points[i].to_dense(dim);
            if config.distance == Distance::Cosine {
                normalize_dense(&mut c);
            }
            c
        })
        .collect();
    CentroidSet::new(dim, centroids, None)
}

/// Runs K-means from explicit starting centroids. Empty clusters are
/// re-seeded with the worst-fitting points when the set is unlabeled and
/// keep their previous centroid otherwise.
pub fn kmeans_from(
    points: &[SparseVector],
    initial: CentroidSet,
    config: &KMeansConfig,
) -> Result<(CentroidSet, ClusteringResult)> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if initial.k() == 0 {
        return Err(Error::InvalidConfig("no centroids".into()));
    }
    check_dims(points, initial.dim)?;
    let distance = config.distance;
    let norms: Vec<f64> = points.iter().map(SparseVector::norm_squared).collect();
    let mut centroids = initial;
    let mut trace = Vec::new();

    if config.frozen {
        let (assignment, raw) = assign_raw(points, &norms, &centroids, distance);
        let objective = raw_objective(&raw);
        trace.push(objective);
        let result = ClusteringResult {
            assignment,
            best_score: finish_scores(distance, raw),
            n_iterations: 0,
            converged: true,
            objective,
            objective_trace: trace,
        };
        return Ok((centroids, result));
    }

    let repair = centroids.labels.is_none();
    let mut previous: Option<Vec<usize>> = None;
    let mut converged = false;
    let mut n_iterations = 0;
    let (mut assignment, mut raw);
    loop {
        n_iterations += 1;
        (assignment, raw) = assign_raw(points, &norms, &centroids, distance);
        trace.push(raw_objective(&raw));
        if previous.as_ref() == Some(&assignment) {
            converged = true;
            break;
        }
        if n_iterations >= config.max_iter {
            break;
        }
        let movement = update_centroids(
            points,
            &norms,
            &assignment,
            &raw,
            &mut centroids,
            distance,
            repair,
        );
        if movement <= config.tol {
            (assignment, raw) = assign_raw(points, &norms, &centroids, distance);
            trace.push(raw_objective(&raw));
            converged = true;
            break;
        }
        previous = Some(assignment);
    }
    let objective = raw_objective(&raw);
    let result = ClusteringResult {
        assignment,
        best_score: finish_scores(distance, raw),
        n_iterations,
        converged,
        objective,
        objective_trace: trace,
    };
    Ok((centroids, result))
}

/// Recomputes centroids from `assignment` and returns the largest absolute
/// coordinate change.
fn update_centroids(
    points: &[SparseVector],
    norms_sq: &[f64],
    assignment: &[usize],
    raw: &[f64],
    centroids: &mut CentroidSet,
    distance: Distance,
    repair: bool,
) -> f64 {
    let k = centroids.k();
    let dim = centroids.dim;
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for ((p, &c), &n) in points.iter().zip(assignment).zip(norms_sq) {
        counts[c] += 1;
        let scale = match distance {
            // Unit-normalize members so the sum direction maximizes total cosine.
            Distance::Cosine if n > 0.0 => 1.0 / n.sqrt(),
            Distance::Cosine => 0.0,
            Distance::Euclidean => 1.0,
        };
        p.add_to_dense(&mut sums[c], scale);
    }
    let mut updated = Vec::with_capacity(k);
    for (c, mut sum) in sums.into_iter().enumerate() {
        let ok = counts[c] > 0
            && match distance {
                Distance::Cosine => normalize_dense(&mut sum),
                Distance::Euclidean => {
                    let inv = 1.0 / counts[c] as f64;
                    sum.iter_mut().for_each(|x| *x *= inv);
                    true
                }
            };
        updated.push(if ok { Some(sum) } else { None });
    }

    if repair {
        let empty: Vec<usize> = (0..k).filter(|&c| updated[c].is_none()).collect();
        if !empty.is_empty() {
            // Worst-fitting points first; lowest index breaks ties.
            let mut order: Vec<usize> = (0..points.len())
                .filter(|&i| distance == Distance::Euclidean || norms_sq[i] > 0.0)
                .collect();
            order.sort_by(|&a, &b| {
                let ord = match distance {
                    Distance::Cosine => raw[a].total_cmp(&raw[b]),
                    Distance::Euclidean => raw[b].total_cmp(&raw[a]),
                };
                ord.then(a.cmp(&b))
            });
            for (c, &i) in empty.iter().zip(&order) {
                let mut v = points[i].to_dense(dim);
                if distance == Distance::Cosine {
                    normalize_dense(&mut v);
                }
                updated[*c] = Some(v);
            }
        }
    }

    let mut movement: f64 = 0.0;
    for (old, new) in centroids.centroids.iter_mut().zip(updated) {
        if let Some(new) = new {
            for (o, n) in old.iter().zip(&new) {
                movement = movement.max((o - n).abs());
            }
            *old = new;
        }
    }
    movement
}

/// Points split by whether their best cosine similarity to any centroid
/// reaches the threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutlierSplit {
    pub kept: Vec<usize>,
    pub outliers: Vec<usize>,
    pub max_similarity: Vec<f64>,
}

/// A point is an outlier iff its highest cosine similarity to any centroid
/// is strictly below `threshold`.
pub fn filter_outliers(
    points: &[SparseVector],
    centroids: &CentroidSet,
    threshold: f64,
) -> Result<OutlierSplit> {
    let (_, best) = assign(points, centroids, Distance::Cosine)?;
    let mut split = OutlierSplit::default();
    for (i, &sim) in best.iter().enumerate() {
        if sim < threshold {
            split.outliers.push(i);
        } else {
            split.kept.push(i);
        }
    }
    split.max_similarity = best;
    Ok(split)
}
