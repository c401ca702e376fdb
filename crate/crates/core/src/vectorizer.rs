//! N-gram vocabulary and L2-normalized TF-IDF document vectors.
//!
//! Weighting: raw in-document count times smoothed idf
//! `ln((1 + n_docs) / (1 + df)) + 1`, then scaled to unit length. Feature
//! indices follow lexicographic feature order so a refit of the same corpus,
//! in any document order, yields the same model.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::{NgramSpec, NormalizedTitle, Stopwords, TextPipeline};

/// Sparse vector with strictly ascending indices and finite nonzero weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct SparseVector {
    indices: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a vector from `(index, weight)` pairs in any order. Duplicate
    /// indices are summed; zero results are dropped. Non-finite weights are
    /// rejected.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        if let Some((i, w)) = pairs.iter().find(|(_, w)| !w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite weight {w} at index {i}"
            )));
        }
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices: Vec<u32> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            if indices.last() == Some(&i) {
                *weights.last_mut().unwrap() += w;
            } else {
                indices.push(i);
                weights.push(w);
            }
        }
        let (indices, weights) = indices
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w != 0.0)
            .unzip();
        Ok(Self { indices, weights })
    }

    /// Sparse view of a dense vector, skipping zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, weights) = dense
            .iter()
            .enumerate()
            .filter(|&(_, &w)| w != 0.0)
            .map(|(i, &w)| (i as u32, w))
            .unzip();
        Self { indices, weights }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    /// One past the largest index, or 0 for the zero vector.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn norm_squared(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut sum = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.weights[a] * other.weights[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        sum
    }

    /// Dot product with a dense vector; indices past its end count as zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter()
            .map(|(i, w)| dense.get(i as usize).map_or(0.0, |d| w * d))
            .sum()
    }

    /// Adds `scale * self` into `dense`.
    pub fn add_to_dense(&self, dense: &mut [f64], scale: f64) {
        for (i, w) in self.iter() {
            dense[i as usize] += scale * w;
        }
    }

    /// Scales to unit L2 length; the zero vector is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= norm);
        }
        self
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut dense = vec![0.0; dim];
        self.add_to_dense(&mut dense, 1.0);
        dense
    }
}

impl TryFrom<Vec<(u32, f64)>> for SparseVector {
    type Error = Error;

    fn try_from(pairs: Vec<(u32, f64)>) -> Result<Self> {
        let strictly_sorted = pairs.windows(2).all(|w| w[0].0 < w[1].0);
        let valid = pairs.iter().all(|&(_, w)| w.is_finite() && w != 0.0);
        if !strictly_sorted || !valid {
            return Err(Error::InvalidConfig(
                "sparse entries must be strictly ascending with finite nonzero weights".into(),
            ));
        }
        let (indices, weights) = pairs.into_iter().unzip();
        Ok(Self { indices, weights })
    }
}

impl From<SparseVector> for Vec<(u32, f64)> {
    fn from(v: SparseVector) -> Self {
        v.indices.into_iter().zip(v.weights).collect()
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(b) / denom
    }
}

/// Feature strings in index order with their document frequencies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    features: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: usize,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_parts(features: Vec<String>, doc_freq: Vec<u32>, n_docs: usize) -> Result<Self> {
        if features.len() != doc_freq.len() {
            return Err(Error::InvalidConfig(format!(
                "{} features but {} doc_freq entries",
                features.len(),
                doc_freq.len()
            )));
        }
        if let Some(df) = doc_freq.iter().find(|&&df| df == 0 || df as usize > n_docs) {
            return Err(Error::InvalidConfig(format!(
                "doc_freq {df} outside 1..={n_docs}"
            )));
        }
        let index: HashMap<String, u32> = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        if index.len() != features.len() {
            return Err(Error::InvalidConfig("duplicate vocabulary feature".into()));
        }
        Ok(Self {
            features,
            doc_freq,
            n_docs,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, feature: &str) -> Option<u32> {
        self.index.get(feature).copied()
    }

    pub fn feature(&self, index: u32) -> Option<&str> {
        self.features.get(index as usize).map(String::as_str)
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn doc_freq(&self) -> &[u32] {
        &self.doc_freq
    }
}

/// A fitted TF-IDF weighting for one n-gram configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    spec: NgramSpec,
    pipeline: TextPipeline,
    vocabulary: Vocabulary,
    idf: Vec<f64>,
    min_df: u32,
}

pub fn smoothed_idf(n_docs: usize, doc_freq: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

impl TfIdfModel {
    pub fn fit(docs: &[NormalizedTitle], spec: NgramSpec, pipeline: TextPipeline) -> Result<Self> {
        Self::fit_with_min_df(docs, spec, pipeline, 1)
    }

    /// Like [`TfIdfModel::fit`] but drops features seen in fewer than
    /// `min_df` documents.
    pub fn fit_with_min_df(
        docs: &[NormalizedTitle],
        spec: NgramSpec,
        pipeline: TextPipeline,
        min_df: u32,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut counts: HashMap<String, u32> = HashMap::new();
        for doc in docs {
            let unique: HashSet<String> = pipeline.features(doc, spec).into_iter().collect();
            for feature in unique {
                *counts.entry(feature).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u32)> = counts
            .into_iter()
            .filter(|&(_, df)| df >= min_df.max(1))
            .collect();
        kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let (features, doc_freq) = kept.into_iter().unzip();
        let vocabulary = Vocabulary::from_parts(features, doc_freq, docs.len())?;
        Ok(Self::from_vocabulary(
            spec,
            pipeline,
            vocabulary,
            min_df.max(1),
        ))
    }

    fn from_vocabulary(
        spec: NgramSpec,
        pipeline: TextPipeline,
        vocabulary: Vocabulary,
        min_df: u32,
    ) -> Self {
        let idf = vocabulary
            .doc_freq
            .iter()
            .map(|&df| smoothed_idf(vocabulary.n_docs, df))
            .collect();
        Self {
            spec,
            pipeline,
            vocabulary,
            idf,
            min_df,
        }
    }

    pub fn spec(&self) -> NgramSpec {
        self.spec
    }

    pub fn pipeline(&self) -> &TextPipeline {
        &self.pipeline
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Dimension of the vector space.
    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    /// TF-IDF vector of `doc`, unit length unless no feature of `doc` is in
    /// the vocabulary, in which case the zero vector is returned.
    pub fn transform(&self, doc: &NormalizedTitle) -> SparseVector {
        let mut tf: HashMap<u32, f64> = HashMap::new();
        for feature in self.pipeline.features(doc, self.spec) {
            if let Some(i) = self.vocabulary.index_of(&feature) {
                *tf.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut pairs: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(i, count)| (i, count * self.idf[i as usize]))
            .collect();
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let (indices, weights) = pairs.into_iter().unzip();
        SparseVector { indices, weights }.normalized()
    }

    pub fn transform_all(&self, docs: &[NormalizedTitle]) -> Vec<SparseVector> {
        docs.iter().map(|d| self.transform(d)).collect()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &ModelFile::from(self))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: ModelFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        raw.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(s)?.try_into()
    }
}

/// On-disk model layout. `idf` is recomputed on load.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    spec: NgramSpec,
    n_docs: usize,
    min_df: u32,
    stopwords: Vec<String>,
    features: Vec<String>,
    doc_freq: Vec<u32>,
}

impl From<&TfIdfModel> for ModelFile {
    fn from(m: &TfIdfModel) -> Self {
        Self {
            spec: m.spec,
            n_docs: m.vocabulary.n_docs,
            min_df: m.min_df,
            stopwords: m.pipeline.stopwords.sorted(),
            features: m.vocabulary.features.clone(),
            doc_freq: m.vocabulary.doc_freq.clone(),
        }
    }
}

impl TryFrom<ModelFile> for TfIdfModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let spec = NgramSpec::new(f.spec.analyzer, f.spec.n_min, f.spec.n_max)?;
        let vocabulary = Vocabulary::from_parts(f.features, f.doc_freq, f.n_docs)?;
        let pipeline = TextPipeline::new(Stopwords::from_words(f.stopwords));
        Ok(Self::from_vocabulary(spec, pipeline, vocabulary, f.min_df))
    }
}

pub fn fit_vocabulary(
    docs: &[NormalizedTitle],
    spec: NgramSpec,
    pipeline: TextPipeline,
) -> Result<TfIdfModel> {
    TfIdfModel::fit(docs, spec, pipeline)
}

pub fn transform(doc: &NormalizedTitle, model: &TfIdfModel) -> SparseVector {
    model.transform(doc)
}

pub fn fit_transform(
    docs: &[NormalizedTitle],
    spec: NgramSpec,
    pipeline: TextPipeline,
) -> Result<(TfIdfModel, Vec<SparseVector>)> {
    let model = TfIdfModel::fit(docs, spec, pipeline)?;
    let vectors = model.transform_all(docs);
    Ok((model, vectors))
}
