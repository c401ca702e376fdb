//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.
//!
//! `cargo test -p marketclust-core --test acceptance`

// NaN must fail every check, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use marketclust::clustering::{
    assign, filter_outliers, kmeans, seed_centroids, Distance, Init, KMeansConfig,
    DEFAULT_OUTLIER_THRESHOLD,
};
use marketclust::corpus::{
    corpus_summary, deduplicate, product_vendor_distribution, vendor_market_distribution, DedupKey,
    ProductRecord,
};
use marketclust::evaluation::{cluster_entropy, rand_index, total_entropy, write_facet_csv};
use marketclust::pipeline::{
    cluster_corpus, run_grid, run_report, ClusterOptions, Experiment, GridConfig, LabeledTitle,
    DEFAULT_HOLDOUT_FRAC,
};
use marketclust::synthgen::{generate_corpus, SynthConfig};
use marketclust::textprep::{normalize_text, NgramSpec, Stopwords, TextPipeline, STANDARD_SPECS};
use marketclust::vectorizer::{fit_transform, SparseVector, TfIdfModel};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);
/// (title, listing ids, vendors, markets)
type ProductView<'a> = (&'a str, Vec<&'a str>, Vec<&'a str>, Vec<&'a str>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- fixtures

/// The desk-scale stand-in for the labeled marketplace corpus: 34
/// categories, ~3000 distinct products, 15% shared vocabulary, and 500
/// labeled products split 400/100.
struct LabeledCorpus {
    titles: Vec<String>,
    labeled: Vec<LabeledTitle>,
}

fn labeled_corpus() -> LabeledCorpus {
    let config = SynthConfig {
        n_categories: 34,
        titles_per_category: 90,
        keyword_overlap_rate: 0.15,
        rng_seed: 2016,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config).expect("valid config");
    let products = deduplicate(&corpus.records, DedupKey::Normalized);
    let titles = products.iter().map(|p| p.canonical_title.clone()).collect();
    let labeled = corpus
        .labeled_sample(500, 1)
        .into_iter()
        .map(|(t, l)| LabeledTitle::new(t, l))
        .collect();
    LabeledCorpus { titles, labeled }
}

fn experiment(c: &LabeledCorpus) -> Result<Experiment, String> {
    Experiment::new(
        &c.titles,
        &c.labeled,
        DEFAULT_HOLDOUT_FRAC,
        0,
        TextPipeline::default(),
    )
    .map_err(err)
}

// ------------------------------------------------------------- criterion 1

/// Restricted-growth strings: every set partition of `n` points exactly once.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let max = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=max {
            prefix.push(b);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn brute_force_rand(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0u64;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / pairs as f64
}

/// Total entropy as `(1/N) Σ_i Σ_j n_ij log2(n_i / n_ij)`.
fn direct_total_entropy(pred: &[usize], truth: &[usize]) -> f64 {
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut size: HashMap<usize, f64> = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_default() += 1.0;
        *size.entry(p).or_default() += 1.0;
    }
    let n = pred.len() as f64;
    joint
        .iter()
        .map(|(&(p, _), &nij)| nij * (size[&p] / nij).log2())
        .sum::<f64>()
        / n
}

fn tables(pred: &[usize], truth: &[usize]) -> Vec<Vec<usize>> {
    let mut t: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&p, &c) in pred.iter().zip(truth) {
        *t.entry(p).or_default().entry(c).or_default() += 1;
    }
    t.into_values().map(|m| m.into_values().collect()).collect()
}

fn criterion_1() -> Outcome {
    let mut cases = 0usize;
    let mut worst_entropy = 0.0f64;
    for n in 2..=6 {
        let parts = partitions(n);
        for a in &parts {
            for b in &parts {
                let got = rand_index(a, b).map_err(err)?;
                let want = brute_force_rand(a, b);
                ensure!(
                    got == want,
                    "rand_index({a:?}, {b:?}) = {got}, brute force {want}"
                );
                let te = total_entropy(&tables(a, b)).map_err(err)?;
                worst_entropy = worst_entropy.max((te - direct_total_entropy(a, b)).abs());
                cases += 1;
            }
        }
    }
    // Larger random contingency tables.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let n = rng.gen_range(2..300);
        let k = rng.gen_range(1..12);
        let c = rng.gen_range(1..12);
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let got = rand_index(&pred, &truth).map_err(err)?;
        ensure!(
            got == brute_force_rand(&pred, &truth),
            "rand_index mismatch at n={n}"
        );
        let t = tables(&pred, &truth);
        worst_entropy = worst_entropy
            .max((total_entropy(&t).map_err(err)? - direct_total_entropy(&pred, &truth)).abs());
        for cluster in &t {
            let total: usize = cluster.iter().sum();
            let direct: f64 = cluster
                .iter()
                .map(|&m| m as f64 * (total as f64 / m as f64).log2())
                .sum::<f64>()
                / total as f64;
            worst_entropy =
                worst_entropy.max((cluster_entropy(cluster).map_err(err)? - direct).abs());
        }
        cases += 1;
    }
    ensure!(
        worst_entropy <= 1e-12,
        "entropy deviates from direct summation by {worst_entropy:e}"
    );
    Ok(format!(
        "{cases} partition pairs exact; max entropy deviation {worst_entropy:.1e}"
    ))
}

// ------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let docs = vec![normalize_text("cvv dump"), normalize_text("cvv shop")];
    let pipeline = TextPipeline::new(Stopwords::empty());
    let (model, vectors) = fit_transform(&docs, NgramSpec::word(1, 1), pipeline).map_err(err)?;
    // Hand oracle: idf(cvv) = ln(3/3) + 1, idf(dump) = ln(3/2) + 1.
    let idf_cvv = 1.0f64;
    let idf_dump = (3.0f64 / 2.0).ln() + 1.0;
    let norm = (idf_cvv * idf_cvv + idf_dump * idf_dump).sqrt();
    let got: HashMap<u32, f64> = vectors[0].iter().collect();
    let vocab = model.vocabulary();
    let cvv = got[&vocab.index_of("cvv").unwrap()];
    let dump = got[&vocab.index_of("dump").unwrap()];
    ensure!((cvv - idf_cvv / norm).abs() <= 1e-9, "cvv weight {cvv}");
    ensure!((dump - idf_dump / norm).abs() <= 1e-9, "dump weight {dump}");

    let corpus = generate_corpus(&SynthConfig {
        n_categories: 20,
        titles_per_category: 50,
        cross_list_rate: 0.0,
        rng_seed: 11,
        ..SynthConfig::default()
    })
    .map_err(err)?;
    let titles: Vec<_> = corpus
        .products
        .iter()
        .map(|p| normalize_text(&p.title))
        .collect();
    ensure!(
        titles.len() == 1000,
        "expected 1000 titles, got {}",
        titles.len()
    );
    let mut worst = 0.0f64;
    let mut checked = 0;
    for spec in STANDARD_SPECS {
        let (_, vs) = fit_transform(&titles, spec, TextPipeline::default()).map_err(err)?;
        for v in vs.iter().filter(|v| !v.is_zero()) {
            worst = worst.max((v.norm() - 1.0).abs());
            checked += 1;
        }
    }
    ensure!(worst <= 1e-9, "norm deviates from 1 by {worst:e}");
    Ok(format!(
        "weights ({cvv:.9}, {dump:.9}); {checked} vectors over 10 specs, max |norm-1| {worst:.1e}"
    ))
}

// ------------------------------------------------------------- criterion 3

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<SparseVector>, usize, usize) {
    let dim = rng.gen_range(10..60);
    let n = rng.gen_range(20..150);
    let k = rng.gen_range(2..10);
    let points = (0..n)
        .map(|_| {
            let nnz = rng.gen_range(1..8);
            let pairs = (0..nnz)
                .map(|_| (rng.gen_range(0..dim) as u32, rng.gen_range(0.05..1.0)))
                .collect();
            SparseVector::from_pairs(pairs).unwrap().normalized()
        })
        .collect();
    (points, dim, k)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut iterations = 0;
    for instance in 0..100 {
        let (points, dim, k) = random_instance(&mut rng);
        for distance in [Distance::Cosine, Distance::Euclidean] {
            let config = KMeansConfig {
                k,
                distance,
                init: Init::Random,
                rng_seed: instance,
                tol: 0.0,
                ..KMeansConfig::default()
            };
            let (centroids, result) = kmeans(&points, dim, &config, None).map_err(err)?;
            for w in result.objective_trace.windows(2) {
                // Slack covers only floating-point summation order.
                let slack = 1e-9 * w[0].abs().max(1.0);
                let monotone = match distance {
                    Distance::Cosine => w[1] >= w[0] - slack,
                    Distance::Euclidean => w[1] <= w[0] + slack,
                };
                ensure!(
                    monotone,
                    "instance {instance} {distance}: objective {} -> {}",
                    w[0],
                    w[1]
                );
            }
            let (again, _) = assign(&points, &centroids, distance).map_err(err)?;
            ensure!(
                again == result.assignment,
                "instance {instance} {distance}: not a fixed point"
            );
            iterations += result.objective_trace.len();
        }
    }
    Ok(format!(
        "200 runs, {iterations} assignment passes, all monotone and fixed"
    ))
}

// ------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let corpus = labeled_corpus();
    ensure!(
        (2800..=3200).contains(&corpus.titles.len()),
        "corpus has {} products",
        corpus.titles.len()
    );
    let exp = experiment(&corpus)?;
    let (n_train, n_holdout) = (exp.split().train.len(), exp.split().holdout.len());
    let space = exp.features(NgramSpec::char(3, 6)).map_err(err)?;
    let base = KMeansConfig::default();
    let seeded = space
        .evaluate(Distance::Cosine, Init::Seeded, &base)
        .map_err(err)?;
    let mut random_ri = Vec::new();
    let mut random_h = Vec::new();
    for seed in 0..10 {
        let cfg = KMeansConfig {
            rng_seed: seed,
            ..base.clone()
        };
        let r = space
            .evaluate(Distance::Cosine, Init::Random, &cfg)
            .map_err(err)?;
        random_ri.push(r.rand_index);
        random_h.push(r.total_entropy_bits);
    }
    let ri_rand = random_ri.iter().sum::<f64>() / 10.0;
    let h_rand = random_h.iter().sum::<f64>() / 10.0;
    let summary = format!(
        "split {n_train}/{n_holdout}; seeded RI {:.4} H {:.4}; random mean RI {ri_rand:.4} H {h_rand:.4}",
        seeded.rand_index, seeded.total_entropy_bits
    );
    ensure!(
        seeded.rand_index >= 0.95,
        "{summary}: seeded Rand-index below 0.95"
    );
    ensure!(
        seeded.total_entropy_bits <= 0.15,
        "{summary}: seeded entropy above 0.15"
    );
    ensure!(
        seeded.rand_index > ri_rand,
        "{summary}: seeded Rand-index does not beat random"
    );
    ensure!(
        seeded.total_entropy_bits < h_rand,
        "{summary}: seeded entropy does not beat random"
    );
    Ok(summary)
}

// ------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let corpus = labeled_corpus();
    let exp = experiment(&corpus)?;
    let config = GridConfig::default();
    let mut elapsed = Vec::new();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        let table = run_grid(&exp, &config).map_err(err)?;
        elapsed.push(start.elapsed());
        let mut panels = Vec::new();
        table.write_panels_csv(&mut panels).map_err(err)?;
        let mut cells = Vec::new();
        table.write_cells_csv(&mut cells).map_err(err)?;
        outputs.push((table, panels, cells));
    }
    let (t0, p0, c0) = &outputs[0];
    let (t1, p1, c1) = &outputs[1];
    ensure!(
        t0.cells.len() == 40,
        "expected 40 cells, got {}",
        t0.cells.len()
    );
    ensure!(
        t0 == t1 && p0 == p1 && c0 == c1,
        "repeated grid runs differ"
    );
    let slowest = elapsed.iter().max().unwrap();
    ensure!(
        *slowest < Duration::from_secs(15 * 60),
        "grid took {slowest:?}"
    );
    print!("{}", String::from_utf8_lossy(p0));
    Ok(format!(
        "40 cells, identical across 2 runs, slowest run {:.1}s",
        slowest.as_secs_f64()
    ))
}

// ------------------------------------------------------------- criterion 6

fn rec(id: &str, market: &str, vendor: &str, title: &str) -> ProductRecord {
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

fn criterion_6() -> Outcome {
    let fixture = [
        rec("1", "Alpha", "v1", "Fresh CVV Dumps"),
        rec("2", "Beta", "v1", "fresh cvv dumps!!"),
        rec("3", "Gamma", "v2", "FRESH  CVV - DUMPS"),
        rec("4", "Alpha", "v3", "PayPal verified account"),
        rec("5", "Alpha", "v3", "paypal verified account"),
        rec("6", "Beta", "v4", "Netflix lifetime"),
        rec("7", "Alpha", "v2", "Botnet rental"),
    ];
    // Hand-computed ground truth.
    let products = deduplicate(&fixture, DedupKey::Normalized);
    let got: Vec<ProductView> = products
        .iter()
        .map(|p| {
            (
                p.canonical_title.as_str(),
                p.listing_ids.iter().map(String::as_str).collect(),
                p.vendors.iter().map(String::as_str).collect(),
                p.markets.iter().map(String::as_str).collect(),
            )
        })
        .collect();
    let want = vec![
        (
            "fresh cvv dumps",
            vec!["1", "2", "3"],
            vec!["v1", "v2"],
            vec!["Alpha", "Beta", "Gamma"],
        ),
        (
            "paypal verified account",
            vec!["4", "5"],
            vec!["v3"],
            vec!["Alpha"],
        ),
        ("netflix lifetime", vec!["6"], vec!["v4"], vec!["Beta"]),
        ("botnet rental", vec!["7"], vec!["v2"], vec!["Alpha"]),
    ];
    ensure!(got == want, "dedup mismatch: {got:?}");
    // v1: {Alpha, Beta}; v2: {Gamma, Alpha}; v3: {Alpha}; v4: {Beta}.
    let vm = vendor_market_distribution(&fixture);
    ensure!(
        vm.buckets == BTreeMap::from([(1, 2), (2, 2)]),
        "vendor/market histogram {:?}",
        vm.buckets
    );
    let pv = product_vendor_distribution(&products);
    ensure!(
        pv.buckets == BTreeMap::from([(1, 3), (2, 1)]),
        "product/vendor histogram {:?}",
        pv.buckets
    );
    let s = corpus_summary(&fixture, &products);
    ensure!(
        (
            s.n_markets,
            s.n_listings_total,
            s.n_products_distinct,
            s.n_vendors
        ) == (3, 7, 4, 4),
        "summary {s:?}"
    );

    let config = SynthConfig {
        cross_list_rate: 0.43,
        rng_seed: 57,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config).map_err(err)?;
    let products = deduplicate(&corpus.records, DedupKey::Normalized);
    ensure!(
        products.len() == corpus.products.len(),
        "dedup found {} products",
        products.len()
    );
    let unique = product_vendor_distribution(&products).unique_fraction();
    let expected = config.expected_unique_fraction();
    ensure!(
        (unique - expected).abs() <= 0.05,
        "unique fraction {unique:.4} vs expected {expected:.4}"
    );
    let ratio = products.len() as f64 / corpus.records.len() as f64;
    let expected_ratio = config.expected_distinct_ratio();
    ensure!(
        (ratio - expected_ratio).abs() <= 0.05,
        "distinct ratio {ratio:.4} vs expected {expected_ratio:.4}"
    );
    Ok(format!(
        "fixture exact; synthetic unique fraction {unique:.4} (expected {expected:.4}), distinct ratio {ratio:.4} (expected {expected_ratio:.4})"
    ))
}

// ------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    // Compact, disjoint categories: small keyword pools, no shared words.
    let config = SynthConfig {
        keywords_per_category: 6,
        keyword_overlap_rate: 0.0,
        noise_token_rate: 0.0,
        titles_per_category: 40,
        rng_seed: 70,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config).map_err(err)?;
    let pipeline = TextPipeline::default();
    let spec = NgramSpec::char(3, 6);
    let titles: Vec<_> = corpus
        .products
        .iter()
        .map(|p| normalize_text(&p.title))
        .collect();
    let category_grams: HashSet<String> = titles
        .iter()
        .flat_map(|t| pipeline.features(t, spec))
        .collect();

    // Junk titles whose n-grams never occur in category titles.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut junk = Vec::new();
    while junk.len() < 100 {
        let words: Vec<String> = (0..rng.gen_range(1..4))
            .map(|_| {
                (0..rng.gen_range(4..9))
                    .map(|_| rng.gen_range(b'a'..=b'z') as char)
                    .collect()
            })
            .collect();
        let t = normalize_text(&words.join(" "));
        if pipeline
            .features(&t, spec)
            .iter()
            .all(|g| !category_grams.contains(g))
        {
            junk.push(t);
        }
    }
    let mut docs = titles.clone();
    docs.extend(junk.iter().cloned());
    let model = TfIdfModel::fit(&docs, spec, pipeline).map_err(err)?;
    let points = model.transform_all(&docs);
    let seeds = corpus
        .labeled_sample(500, 1)
        .into_iter()
        .map(|(t, l)| (l, model.transform(&normalize_text(&t))))
        .collect();
    let centroids = seed_centroids(&seeds, model.dim(), Distance::Cosine).map_err(err)?;
    let split = filter_outliers(&points, &centroids, DEFAULT_OUTLIER_THRESHOLD).map_err(err)?;
    let n_real = titles.len();
    let flagged_junk = split.outliers.iter().filter(|&&i| i >= n_real).count();
    let flagged_real = split.outliers.iter().filter(|&&i| i < n_real).count();
    let min_real = split.max_similarity[..n_real]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max_junk = split.max_similarity[n_real..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    ensure!(
        flagged_junk == junk.len(),
        "recall {flagged_junk}/{}",
        junk.len()
    );
    ensure!(
        flagged_real == 0,
        "{flagged_real} in-category titles flagged (min sim {min_real:.3})"
    );
    Ok(format!(
        "{flagged_junk}/{} junk flagged, 0/{n_real} in-category flagged; min in-category sim {min_real:.3}, max junk sim {max_junk:.3}",
        junk.len()
    ))
}

// ------------------------------------------------------------- criterion 8

fn criterion_8() -> Outcome {
    const LINKS: usize = 13;
    const HACKING_TOOLS: usize = 5;
    let config = SynthConfig {
        keyword_overlap_rate: 0.0,
        noise_token_rate: 0.0,
        titles_per_category: 40,
        single_market_category: Some(LINKS),
        single_vendor_category: Some(HACKING_TOOLS),
        rng_seed: 88,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config).map_err(err)?;
    let names = config.category_names();
    let labeled: Vec<LabeledTitle> = corpus
        .labeled_sample(500, 2)
        .into_iter()
        .map(|(t, l)| LabeledTitle::new(t, l))
        .collect();
    let run = cluster_corpus(
        &corpus.records,
        &labeled,
        NgramSpec::char(3, 6),
        TextPipeline::default(),
        None,
        &ClusterOptions::default(),
    )
    .map_err(err)?;
    let rows = run.assignment_rows();
    let report = run_report(&corpus.records, &rows, DedupKey::Normalized).map_err(err)?;

    let mut csv = Vec::new();
    write_facet_csv(&report.rows, &mut csv).map_err(err)?;
    let csv = String::from_utf8(csv).map_err(err)?;
    let header = csv.lines().next().unwrap_or_default();
    ensure!(
        header == "Rank,Cluster Name,No of Products,No of Markets,Market Entropy,No of Vendors,Vendor Entropy",
        "header {header:?}"
    );
    let total: usize = report.rows.iter().map(|r| r.n_products).sum();
    ensure!(
        total == rows.len(),
        "rows cover {total} of {} clustered listings",
        rows.len()
    );
    for w in report.rows.windows(2) {
        ensure!(
            w[0].rank < w[1].rank && w[0].n_products >= w[1].n_products,
            "ranking broken"
        );
    }
    let row = |name: &str| report.rows.iter().find(|r| r.cluster_name == name);
    let links = row(&names[LINKS]).ok_or("no Links row")?;
    let tools = row(&names[HACKING_TOOLS]).ok_or("no Hacking Tools row")?;
    ensure!(
        links.n_markets == 1 && links.market_entropy == 0.0 && links.market_entropy_bits == 0.0,
        "Links row {links:?}"
    );
    ensure!(
        tools.n_vendors == 1 && tools.vendor_entropy == 0.0 && tools.vendor_entropy_bits == 0.0,
        "Hacking Tools row {tools:?}"
    );
    Ok(format!(
        "{} rows; {:?}: {} listings, market entropy 0; {:?}: {} listings, vendor entropy 0",
        report.rows.len(),
        links.cluster_name,
        links.n_products,
        tools.cluster_name,
        tools.n_products
    ))
}

// ------------------------------------------------------------------ runner

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "1 metric oracle equivalence",
            criterion_1,
            Duration::from_secs(10),
        ),
        (
            "2 TF-IDF hand oracle and unit norms",
            criterion_2,
            Duration::MAX,
        ),
        (
            "3 K-means monotonicity and fixed point",
            criterion_3,
            Duration::from_secs(60),
        ),
        (
            "4 seeded vs random ordering",
            criterion_4,
            Duration::from_secs(5 * 60),
        ),
        (
            "5 full grid determinism",
            criterion_5,
            Duration::from_secs(2 * 15 * 60),
        ),
        ("6 dedup and distributions", criterion_6, Duration::MAX),
        ("7 outlier filter", criterion_7, Duration::MAX),
        ("8 facet report contract", criterion_8, Duration::MAX),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > budget => Err(format!("took {elapsed:?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {name} ({:.2}s): {detail}",
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {name} ({:.2}s): {detail}",
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
