//! Listing ingestion, cross-post deduplication and corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::normalize_text;

/// One marketplace listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub listing_id: String,
    pub market: String,
    pub vendor: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posted_date: Option<NaiveDate>,
}

/// Input row before validation: every field optional, dates as text.
#[derive(Debug, Default, Deserialize)]
struct RawRecord {
    #[serde(default)]
    listing_id: Option<String>,
    #[serde(default)]
    market: Option<String>,
    #[serde(default)]
    vendor: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    price: Option<f64>,
    #[serde(default)]
    currency: Option<String>,
    #[serde(default)]
    rating: Option<f64>,
    #[serde(default)]
    posted_date: Option<String>,
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().or_else(|| {
        chrono::DateTime::parse_from_rfc3339(s)
            .ok()
            .map(|dt| dt.date_naive())
    })
}

fn non_blank(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.trim().is_empty())
}

impl RawRecord {
    fn validate(self, source: &str, line: usize) -> Result<ProductRecord> {
        let fail = |message: String| Error::Record { line, message };
        let title = non_blank(self.title).ok_or_else(|| fail("empty title".into()))?;
        let market = non_blank(self.market).ok_or_else(|| fail("empty market".into()))?;
        let vendor = non_blank(self.vendor).ok_or_else(|| fail("empty vendor".into()))?;
        if let Some(p) = self.price {
            if !(p.is_finite() && p >= 0.0) {
                return Err(fail(format!("invalid price {p}")));
            }
        }
        if let Some(r) = self.rating {
            if !r.is_finite() {
                return Err(fail(format!("invalid rating {r}")));
            }
        }
        let posted_date = match non_blank(self.posted_date) {
            Some(d) => {
                Some(parse_date(&d).ok_or_else(|| fail(format!("invalid posted_date {d:?}")))?)
            }
            None => None,
        };
        let listing_id = non_blank(self.listing_id).unwrap_or_else(|| format!("{source}:{line}"));
        Ok(ProductRecord {
            listing_id,
            market,
            vendor,
            title,
            description: non_blank(self.description),
            price: self.price,
            currency: non_blank(self.currency),
            rating: self.rating,
            posted_date,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    /// Guesses from the file extension; anything but `.csv` reads as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            _ => Err(Error::InvalidConfig(format!("unknown input format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// Abort on the first bad line.
    #[default]
    Strict,
    /// Skip bad lines and report them.
    Lenient,
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub records: Vec<ProductRecord>,
    /// Lines rejected in lenient mode, each an [`Error::Record`] or
    /// [`Error::DuplicateListing`].
    pub skipped: Vec<Error>,
}

struct Collector {
    mode: IngestMode,
    seen: HashSet<String>,
    out: Ingested,
}

impl Collector {
    fn new(mode: IngestMode) -> Self {
        Self {
            mode,
            seen: HashSet::new(),
            out: Ingested::default(),
        }
    }

    fn push(&mut self, line: usize, parsed: Result<ProductRecord>) -> Result<()> {
        let parsed = parsed.and_then(|rec| {
            if self.seen.insert(rec.listing_id.clone()) {
                Ok(rec)
            } else {
                Err(Error::DuplicateListing {
                    id: rec.listing_id,
                    line,
                })
            }
        });
        match (parsed, self.mode) {
            (Ok(rec), _) => self.out.records.push(rec),
            (Err(e), IngestMode::Strict) => return Err(e),
            (Err(e), IngestMode::Lenient) => self.out.skipped.push(e),
        }
        Ok(())
    }
}

/// Parses line-delimited JSON objects. `source` names the input for
/// synthesized listing ids (`<source>:<line>`).
pub fn parse_jsonl<R: BufRead>(reader: R, source: &str, mode: IngestMode) -> Result<Ingested> {
    let mut collector = Collector::new(mode);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawRecord>(&line)
            .map_err(|e| Error::Record {
                line: line_no,
                message: format!("malformed record ({e})"),
            })
            .and_then(|raw| raw.validate(source, line_no));
        collector.push(line_no, parsed)?;
    }
    Ok(collector.out)
}

/// Parses CSV with a header row using the JSONL key names. Line numbers
/// count the header as line 1.
pub fn parse_csv<R: std::io::Read>(reader: R, source: &str, mode: IngestMode) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut collector = Collector::new(mode);
    let mut row = csv::StringRecord::new();
    loop {
        let line_no = rdr.position().line() as usize;
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line_no = row.position().map_or(line_no, |p| p.line() as usize);
                let parsed = row
                    .deserialize::<RawRecord>(Some(&headers))
                    .map_err(|e| Error::Record {
                        line: line_no,
                        message: format!("malformed record ({e})"),
                    })
                    .and_then(|raw| raw.validate(source, line_no));
                collector.push(line_no, parsed)?;
            }
            Err(e) => {
                let line_no = e.position().map_or(line_no, |p| p.line() as usize);
                let err = Error::Record {
                    line: line_no,
                    message: format!("malformed record ({e})"),
                };
                collector.push(line_no, Err(err))?;
            }
        }
    }
    Ok(collector.out)
}

/// Reads a listing file. Synthesized ids use the file name, e.g.
/// `listings.jsonl:7`.
pub fn ingest_products(path: &Path, format: InputFormat, mode: IngestMode) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let source = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let reader = std::io::BufReader::new(file);
    match format {
        InputFormat::Jsonl => parse_jsonl(reader, &source, mode),
        InputFormat::Csv => parse_csv(reader, &source, mode),
    }
}

pub fn write_jsonl<W: Write>(records: &[ProductRecord], mut out: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

/// An equivalence class of listings sharing one title key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinctProduct {
    pub canonical_title: String,
    pub listing_ids: Vec<String>,
    pub vendors: BTreeSet<String>,
    pub markets: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupKey {
    /// Group by [`normalize_text`] of the title.
    #[default]
    Normalized,
    /// Group by exact title string.
    Raw,
}

impl DedupKey {
    pub fn key(self, title: &str) -> String {
        match self {
            DedupKey::Normalized => normalize_text(title).into_string(),
            DedupKey::Raw => title.to_string(),
        }
    }
}

/// Collapses cross-posted listings. Products come out in order of first
/// appearance; listing ids keep input order.
pub fn deduplicate(records: &[ProductRecord], key: DedupKey) -> Vec<DistinctProduct> {
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut products: Vec<DistinctProduct> = Vec::new();
    for rec in records {
        let title = key.key(&rec.title);
        let idx = *slot.entry(title.clone()).or_insert_with(|| {
            products.push(DistinctProduct {
                canonical_title: title,
                listing_ids: Vec::new(),
                vendors: BTreeSet::new(),
                markets: BTreeSet::new(),
            });
            products.len() - 1
        });
        let p = &mut products[idx];
        p.listing_ids.push(rec.listing_id.clone());
        p.vendors.insert(rec.vendor.clone());
        p.markets.insert(rec.market.clone());
    }
    products
}

/// Counts of a positive-integer quantity; empty buckets are absent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DistributionHistogram {
    pub buckets: BTreeMap<usize, usize>,
}

impl DistributionHistogram {
    pub fn from_values<I: IntoIterator<Item = usize>>(values: I) -> Self {
        let mut buckets = BTreeMap::new();
        for v in values {
            *buckets.entry(v).or_insert(0) += 1;
        }
        Self { buckets }
    }

    /// Size of the bucketed population.
    pub fn population(&self) -> usize {
        self.buckets.values().sum()
    }

    pub fn count(&self, bucket: usize) -> usize {
        self.buckets.get(&bucket).copied().unwrap_or(0)
    }

    /// Share of the population in bucket 1, or 0 when empty.
    pub fn unique_fraction(&self) -> f64 {
        match self.population() {
            0 => 0.0,
            n => self.count(1) as f64 / n as f64,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bucket", "count"])?;
        for (b, c) in &self.buckets {
            w.write_record([b.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }
}

/// Histogram over the number of distinct markets each vendor name appears in.
pub fn vendor_market_distribution(records: &[ProductRecord]) -> DistributionHistogram {
    let mut markets: HashMap<&str, HashSet<&str>> = HashMap::new();
    for rec in records {
        markets
            .entry(rec.vendor.as_str())
            .or_default()
            .insert(rec.market.as_str());
    }
    DistributionHistogram::from_values(markets.values().map(HashSet::len))
}

/// Histogram over the number of vendors sharing each distinct product.
pub fn product_vendor_distribution(products: &[DistinctProduct]) -> DistributionHistogram {
    DistributionHistogram::from_values(products.iter().map(|p| p.vendors.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_markets: usize,
    pub n_listings_total: usize,
    pub n_products_distinct: usize,
    pub n_vendors: usize,
}

impl CorpusSummary {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "value"])?;
        for (k, v) in [
            ("Marketplaces", self.n_markets),
            ("Products (Total)", self.n_listings_total),
            ("Products (Distinct)", self.n_products_distinct),
            ("Vendors", self.n_vendors),
        ] {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }
}

pub fn corpus_summary(records: &[ProductRecord], products: &[DistinctProduct]) -> CorpusSummary {
    let markets: HashSet<&str> = records.iter().map(|r| r.market.as_str()).collect();
    let vendors: HashSet<&str> = records.iter().map(|r| r.vendor.as_str()).collect();
    CorpusSummary {
        n_markets: markets.len(),
        n_listings_total: records.len(),
        n_products_distinct: products.len(),
        n_vendors: vendors.len(),
    }
}

#[cfg(test)]
pub(crate) fn record(id: &str, market: &str, vendor: &str, title: &str) -> ProductRecord {
    ProductRecord {
        listing_id: id.into(),
        market: market.into(),
        vendor: vendor.into(),
        title: title.into(),
        description: None,
        price: None,
        currency: None,
        rating: None,
        posted_date: None,
    }
}
