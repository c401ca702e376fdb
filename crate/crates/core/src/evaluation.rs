//! Rand index, class-mixture entropy of clusters, holdout scoring and the
//! per-cluster market / vendor diversity report.
//!
//! Cluster entropy is `-Σ_j p_j log2 p_j` over the classes `j` present in one
//! cluster, where `p_j` is the share of the cluster's points in class `j`.
//! Total entropy weights each cluster's entropy by its share of all points.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::clustering::{assign, kmeans, CentroidSet, KMeansConfig, LabeledSeedSet};
use crate::corpus::ProductRecord;
use crate::error::{Error, Result};
use crate::vectorizer::SparseVector;

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn counts<T: Eq + Hash>(labels: &[T]) -> HashMap<&T, u64> {
    let mut m = HashMap::new();
    for l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// Number of point pairs on which the two labelings agree (together in both
/// or apart in both).
pub fn agreeing_pairs<A, B>(pred: &[A], truth: &[B]) -> Result<u64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let n = pred.len() as u64;
    let mut joint: HashMap<(&A, &B), u64> = HashMap::new();
    for pair in pred.iter().zip(truth) {
        *joint.entry(pair).or_insert(0) += 1;
    }
    let together_both: u64 = joint.values().map(|&c| choose2(c)).sum();
    let together_pred: u64 = counts(pred).values().map(|&c| choose2(c)).sum();
    let together_truth: u64 = counts(truth).values().map(|&c| choose2(c)).sum();
    let apart_both = choose2(n) + together_both - together_pred - together_truth;
    Ok(together_both + apart_both)
}

/// Fraction of the `n(n-1)/2` point pairs on which `pred` and `truth` agree.
pub fn rand_index<A, B>(pred: &[A], truth: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    let agree = agreeing_pairs(pred, truth)?;
    if pred.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: pred.len(),
        });
    }
    Ok(agree as f64 / choose2(pred.len() as u64) as f64)
}

/// Entropy in bits of one cluster's class counts. Zero counts are skipped.
pub fn cluster_entropy(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyCluster);
    }
    let total = total as f64;
    let h = class_counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>();
    // A single class gives -1 * log2(1) = -0.0.
    Ok(h.max(0.0))
}

/// Size-weighted mean of per-cluster entropies. Empty clusters carry zero
/// weight.
pub fn total_entropy(clusters: &[Vec<usize>]) -> Result<f64> {
    let sizes: Vec<usize> = clusters.iter().map(|c| c.iter().sum()).collect();
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return Err(Error::EmptyCluster);
    }
    let mut total = 0.0;
    for (cluster, &size) in clusters.iter().zip(&sizes) {
        if size > 0 {
            total += size as f64 / n as f64 * cluster_entropy(cluster)?;
        }
    }
    Ok(total)
}

/// Class counts per predicted cluster, clusters and classes in sorted order.
pub fn contingency<A, B>(pred: &[A], truth: &[B]) -> Result<BTreeMap<A, BTreeMap<B, usize>>>
where
    A: Ord + Clone,
    B: Ord + Clone,
{
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut table: BTreeMap<A, BTreeMap<B, usize>> = BTreeMap::new();
    for (p, t) in pred.iter().zip(truth) {
        *table
            .entry(p.clone())
            .or_default()
            .entry(t.clone())
            .or_insert(0) += 1;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rand_index: f64,
    pub total_entropy_bits: f64,
    /// (cluster index, size, entropy) for every nonempty predicted cluster.
    pub per_cluster_entropy: Vec<ClusterEntropy>,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntropy {
    pub cluster: usize,
    pub size: usize,
    pub entropy_bits: f64,
}

/// Scores a predicted partition against ground truth.
pub fn evaluate<B: Ord + Clone + Hash>(pred: &[usize], truth: &[B]) -> Result<EvalReport> {
    let rand_index = rand_index(pred, truth)?;
    let table = contingency(pred, truth)?;
    let mut per_cluster = Vec::with_capacity(table.len());
    let mut class_counts = Vec::with_capacity(table.len());
    for (&cluster, classes) in &table {
        let cc: Vec<usize> = classes.values().copied().collect();
        per_cluster.push(ClusterEntropy {
            cluster,
            size: cc.iter().sum(),
            entropy_bits: cluster_entropy(&cc)?,
        });
        class_counts.push(cc);
    }
    Ok(EvalReport {
        rand_index,
        total_entropy_bits: total_entropy(&class_counts)?,
        per_cluster_entropy: per_cluster,
        n_points: pred.len(),
    })
}

/// Clusters `train_points`, assigns `holdout_points` to the final
/// centroids, and scores that assignment against `holdout_truth`.
pub fn holdout_evaluate<B: Ord + Clone + Hash>(
    train_points: &[SparseVector],
    holdout_points: &[SparseVector],
    holdout_truth: &[B],
    dim: usize,
    config: &KMeansConfig,
    seeds: Option<&LabeledSeedSet>,
) -> Result<(EvalReport, CentroidSet)> {
    if holdout_points.len() != holdout_truth.len() {
        return Err(Error::LengthMismatch {
            left: holdout_points.len(),
            right: holdout_truth.len(),
        });
    }
    let (centroids, _) = kmeans(train_points, dim, config, seeds)?;
    let (pred, _) = assign(holdout_points, &centroids, config.distance)?;
    Ok((evaluate(&pred, holdout_truth)?, centroids))
}

/// One row of the per-cluster diversity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetEntropyRow {
    pub rank: usize,
    pub cluster_name: String,
    pub n_products: usize,
    pub n_markets: usize,
    /// Market entropy divided by `log2(max(2, n_markets))`.
    pub market_entropy: f64,
    pub market_entropy_bits: f64,
    pub n_vendors: usize,
    /// Vendor entropy divided by `log2(max(2, n_vendors))`.
    pub vendor_entropy: f64,
    pub vendor_entropy_bits: f64,
}

pub const FACET_HEADER: [&str; 7] = [
    "Rank",
    "Cluster Name",
    "No of Products",
    "No of Markets",
    "Market Entropy",
    "No of Vendors",
    "Vendor Entropy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Facet {
    Market,
    Vendor,
}

impl Facet {
    fn of(self, record: &ProductRecord) -> &str {
        match self {
            Facet::Market => &record.market,
            Facet::Vendor => &record.vendor,
        }
    }
}

/// Distinct-value count, raw entropy in bits and normalized entropy of one
/// facet within one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetStat {
    pub n_values: usize,
    pub entropy_bits: f64,
    pub entropy_normalized: f64,
}

pub fn facet_stat<'a>(
    records: impl IntoIterator<Item = &'a ProductRecord>,
    facet: Facet,
) -> Result<FacetStat> {
    let mut by_value: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *by_value.entry(facet.of(r)).or_insert(0) += 1;
    }
    let counts: Vec<usize> = by_value.into_values().collect();
    let bits = cluster_entropy(&counts)?;
    let n_values = counts.len();
    Ok(FacetStat {
        n_values,
        entropy_bits: bits,
        entropy_normalized: bits / (n_values.max(2) as f64).log2(),
    })
}

/// Market and vendor diversity per cluster, ranked by product count
/// (descending; ties by cluster name). `assignment[i]` is the cluster of
/// `records[i]`; `names[c]` names cluster `c`. Clusters without members
/// produce no row.
pub fn facet_entropy_report(
    assignment: &[usize],
    records: &[&ProductRecord],
    names: &[String],
) -> Result<Vec<FacetEntropyRow>> {
    if assignment.len() != records.len() {
        return Err(Error::LengthMismatch {
            left: assignment.len(),
            right: records.len(),
        });
    }
    let mut members: BTreeMap<usize, Vec<&ProductRecord>> = BTreeMap::new();
    for (&c, &r) in assignment.iter().zip(records) {
        if c >= names.len() {
            return Err(Error::InvalidConfig(format!(
                "cluster index {c} has no name ({} names)",
                names.len()
            )));
        }
        members.entry(c).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(members.len());
    for (c, recs) in members {
        let market = facet_stat(recs.iter().copied(), Facet::Market)?;
        let vendor = facet_stat(recs.iter().copied(), Facet::Vendor)?;
        rows.push(FacetEntropyRow {
            rank: 0,
            cluster_name: names[c].clone(),
            n_products: recs.len(),
            n_markets: market.n_values,
            market_entropy: market.entropy_normalized,
            market_entropy_bits: market.entropy_bits,
            n_vendors: vendor.n_values,
            vendor_entropy: vendor.entropy_normalized,
            vendor_entropy_bits: vendor.entropy_bits,
        });
    }
    rows.sort_by(|a, b| {
        b.n_products
            .cmp(&a.n_products)
            .then_with(|| a.cluster_name.cmp(&b.cluster_name))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(rows)
}

/// Writes the ranked table with the normalized entropies, 3 decimals.
pub fn write_facet_csv<W: Write>(rows: &[FacetEntropyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FACET_HEADER)?;
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            r.cluster_name.clone(),
            r.n_products.to_string(),
            r.n_markets.to_string(),
            format!("{:.3}", r.market_entropy),
            r.n_vendors.to_string(),
            format!("{:.3}", r.vendor_entropy),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}
