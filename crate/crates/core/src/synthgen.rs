//! Labeled synthetic marketplace corpora.
//!
//! Each category owns a keyword pool: a few themed words followed by
//! generated pseudo-words, plus a share of generic marketing words that every
//! category can draw from (`keyword_overlap_rate`). A product title is 2 to 6
//! pool words, with random junk tokens mixed in at `noise_token_rate`.
//!
//! Re-listing law: a product gets one listing, and each further listing is
//! added with probability `cross_list_rate`, up to the number of distinct
//! (market, vendor) slots available. Extra listings go to markets and vendors
//! the product does not use yet, so a product's listing count equals both
//! its market count and its vendor count unless a category is pinned.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use chrono::NaiveDate;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DistinctProduct, ProductRecord};
use crate::error::{Error, Result};
use crate::textprep::{normalize_text, stem, Stopwords};

/// The 34 product categories, largest first.
pub const DEFAULT_TAXONOMY: [&str; 34] = [
    "Carding",
    "PayPal-related",
    "Cashing Credit Cards",
    "PGP",
    "Netflix-related",
    "Hacking Tools - General",
    "Dumps - General",
    "Linux-related",
    "Email Hacking Tools",
    "Network Security Tools",
    "Ebay-related",
    "Amazon-related",
    "Bitcoin",
    "Links (Lists)",
    "Banking",
    "Point of Sale",
    "VPN",
    "Botnet",
    "Hacking Groups Invitation",
    "RATs",
    "Browser-related",
    "Physical Layer Hacking",
    "Password Cracking",
    "Smartphone - General",
    "Wireless Hacking",
    "Phishing",
    "Exploit Kits",
    "Viruses/Counter AntiVirus",
    "Network Layer Hacking",
    "RDP Servers",
    "Android-related",
    "Keyloggers",
    "Windows-related",
    "Facebook-related",
];

const THEMED_WORDS: [&[&str]; 34] = [
    &["carding", "cvv", "fullz", "bins", "cardable", "skimmer"],
    &[
        "paypal",
        "chargeback",
        "ppbalance",
        "stealthacc",
        "transfers",
        "ppverified",
    ],
    &[
        "cashout",
        "atm",
        "withdrawal",
        "moneymule",
        "drops",
        "cashapp",
    ],
    &["pgp", "gpg", "encryption", "keypair", "cipher", "privacy"],
    &[
        "netflix",
        "streaming",
        "hulu",
        "subscription",
        "screens",
        "uhd",
    ],
    &[
        "toolkit",
        "hacktools",
        "pentest",
        "metasploit",
        "sqlmap",
        "payload",
    ],
    &["dumps", "track1", "track2", "magstripe", "emv", "dumpspin"],
    &["linux", "ubuntu", "debian", "kernel", "bash", "centos"],
    &["email", "gmail", "yahoo", "hotmail", "spammer", "mailer"],
    &[
        "firewall",
        "nmap",
        "wireshark",
        "sniffer",
        "portscan",
        "ids",
    ],
    &[
        "ebay",
        "auctions",
        "sellers",
        "feedbacks",
        "ebaystealth",
        "buyitnow",
    ],
    &["amazon", "aws", "prime", "giftcard", "kindle", "refunds"],
    &["bitcoin", "btc", "wallet", "blockchain", "mixer", "tumbler"],
    &[
        "links",
        "onion",
        "urls",
        "directory",
        "hiddenwiki",
        "deepweb",
    ],
    &[
        "bank",
        "banklogin",
        "wiretransfer",
        "iban",
        "swift",
        "chase",
    ],
    &[
        "pos",
        "pointofsale",
        "terminal",
        "retail",
        "register",
        "alina",
    ],
    &["vpn", "openvpn", "proxy", "socks5", "anonymity", "tunnel"],
    &["botnet", "zombie", "ddos", "zeus", "bots", "c2panel"],
    &[
        "invitation",
        "forum",
        "membership",
        "crew",
        "hackgroup",
        "invitecode",
    ],
    &["rat", "darkcomet", "njrat", "remote", "trojan", "backdoor"],
    &[
        "browser",
        "chrome",
        "firefox",
        "extension",
        "cookies",
        "useragent",
    ],
    &[
        "lockpick",
        "hardware",
        "rfid",
        "usb",
        "rubberducky",
        "badge",
    ],
    &[
        "password",
        "cracking",
        "hashcat",
        "bruteforce",
        "wordlist",
        "rainbow",
    ],
    &["smartphone", "iphone", "imei", "unlock", "simcard", "ios"],
    &["wifi", "wireless", "wpa2", "aircrack", "wep", "antenna"],
    &[
        "phishing",
        "scampage",
        "lure",
        "fakepage",
        "clone",
        "spoofmail",
    ],
    &[
        "exploit",
        "exploitkit",
        "angler",
        "zeroday",
        "cve",
        "rigkit",
    ],
    &[
        "virus",
        "antivirus",
        "fud",
        "crypter",
        "malware",
        "avbypass",
    ],
    &["arp", "spoofing", "mitm", "dns", "packet", "tcp"],
    &["rdp", "servers", "vps", "dedicated", "hosting", "cpanel"],
    &[
        "android",
        "apk",
        "googleplay",
        "samsung",
        "rooting",
        "droid",
    ],
    &[
        "keylogger",
        "keystrokes",
        "spyware",
        "stealer",
        "logs",
        "recorder",
    ],
    &[
        "windows",
        "microsoft",
        "win10",
        "activation",
        "license",
        "office",
    ],
    &[
        "facebook",
        "fb",
        "likes",
        "fanpage",
        "followers",
        "instagram",
    ],
];

/// Marketing words shared across categories.
const SHARED_WORDS: [&str; 30] = [
    "fresh",
    "new",
    "best",
    "cheap",
    "premium",
    "private",
    "lifetime",
    "verified",
    "instant",
    "tutorial",
    "guide",
    "pack",
    "bundle",
    "full",
    "working",
    "update",
    "method",
    "service",
    "quality",
    "fast",
    "bulk",
    "valid",
    "unlimited",
    "original",
    "pro",
    "edition",
    "hq",
    "mega",
    "legit",
    "autoshop",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_categories: usize,
    pub keywords_per_category: usize,
    pub titles_per_category: usize,
    pub n_vendors: usize,
    pub n_markets: usize,
    pub cross_list_rate: f64,
    /// Share of each category's pool taken from the shared generic words.
    pub keyword_overlap_rate: f64,
    pub noise_token_rate: f64,
    pub rng_seed: u64,
    /// Category whose listings all sit in one market.
    #[serde(default)]
    pub single_market_category: Option<usize>,
    /// Category whose listings are all by one vendor.
    #[serde(default)]
    pub single_vendor_category: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_categories: 34,
            keywords_per_category: 12,
            titles_per_category: 90,
            n_vendors: 400,
            n_markets: 17,
            cross_list_rate: 0.43,
            keyword_overlap_rate: 0.15,
            noise_token_rate: 0.1,
            rng_seed: 7,
            single_market_category: None,
            single_vendor_category: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_categories", self.n_categories),
            ("keywords_per_category", self.keywords_per_category),
            ("titles_per_category", self.titles_per_category),
            ("n_vendors", self.n_vendors),
            ("n_markets", self.n_markets),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("cross_list_rate", self.cross_list_rate),
            ("keyword_overlap_rate", self.keyword_overlap_rate),
            ("noise_token_rate", self.noise_token_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        for c in [self.single_market_category, self.single_vendor_category]
            .into_iter()
            .flatten()
        {
            if c >= self.n_categories {
                return Err(Error::InvalidConfig(format!(
                    "pinned category {c} out of range ({} categories)",
                    self.n_categories
                )));
            }
        }
        Ok(())
    }

    pub fn category_names(&self) -> Vec<String> {
        (0..self.n_categories)
            .map(|i| match DEFAULT_TAXONOMY.get(i) {
                Some(name) => name.to_string(),
                None => format!("Category {}", i + 1),
            })
            .collect()
    }

    /// Most listings a product of `category` can have.
    pub fn listing_cap(&self, category: usize) -> usize {
        let market_pinned = self.single_market_category == Some(category);
        let vendor_pinned = self.single_vendor_category == Some(category);
        match (market_pinned, vendor_pinned) {
            (true, true) => 1,
            (true, false) => self.n_vendors,
            (false, true) => self.n_markets,
            (false, false) => self.n_markets.min(self.n_vendors),
        }
    }

    fn expected_listings(&self, cap: usize) -> f64 {
        let r = self.cross_list_rate;
        if r >= 1.0 {
            cap as f64
        } else {
            (1.0 - r.powi(cap as i32)) / (1.0 - r)
        }
    }

    /// Expected share of distinct products with a single listing (and, with no
    /// pinned categories, a single vendor).
    pub fn expected_unique_fraction(&self) -> f64 {
        self.mean_over_categories(|cap| {
            if cap >= 2 {
                1.0 - self.cross_list_rate
            } else {
                1.0
            }
        })
    }

    /// Expected distinct products per listing.
    pub fn expected_distinct_ratio(&self) -> f64 {
        1.0 / self.mean_over_categories(|cap| self.expected_listings(cap))
    }

    fn mean_over_categories(&self, f: impl Fn(usize) -> f64) -> f64 {
        let total: f64 = (0..self.n_categories).map(|c| f(self.listing_cap(c))).sum();
        total / self.n_categories as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProduct {
    pub title: String,
    pub category: usize,
    pub listing_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<ProductRecord>,
    pub categories: Vec<String>,
    pub products: Vec<SynthProduct>,
    /// Category index of every record.
    pub record_category: Vec<usize>,
    /// Keyword pool of every category.
    pub pools: Vec<Vec<String>>,
}

impl SynthCorpus {
    /// Category name per distinct product, in generation order.
    pub fn truth(&self) -> Vec<String> {
        self.products
            .iter()
            .map(|p| self.categories[p.category].clone())
            .collect()
    }

    /// Category name of each deduplicated product, matched by normalized
    /// title.
    pub fn truth_for(&self, products: &[DistinctProduct]) -> Result<Vec<String>> {
        let by_title: HashMap<String, usize> = self
            .products
            .iter()
            .map(|p| (normalize_text(&p.title).into_string(), p.category))
            .collect();
        products
            .iter()
            .map(|p| {
                by_title
                    .get(&p.canonical_title)
                    .map(|&c| self.categories[c].clone())
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "no generated product titled {:?}",
                            p.canonical_title
                        ))
                    })
            })
            .collect()
    }

    /// `listing_id,category` rows for every record.
    pub fn write_truth_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["listing_id", "category"])?;
        for (r, &c) in self.records.iter().zip(&self.record_category) {
            w.write_record([r.listing_id.as_str(), self.categories[c].as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<output>", e))?;
        Ok(())
    }

    /// A labeled sample of `n` distinct products as `(title, label)`,
    /// stratified so category sizes differ by at most one.
    pub fn labeled_sample(&self, n: usize, rng_seed: u64) -> Vec<(String, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut by_cat: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, p) in self.products.iter().enumerate() {
            by_cat.entry(p.category).or_default().push(i);
        }
        let k = by_cat.len().max(1);
        let mut out = Vec::with_capacity(n);
        for (rank, (cat, members)) in by_cat.iter_mut().enumerate() {
            let quota = n / k + usize::from(rank < n % k);
            members.shuffle(&mut rng);
            for &i in members.iter().take(quota) {
                out.push((
                    self.products[i].title.clone(),
                    self.categories[*cat].clone(),
                ));
            }
        }
        out
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
        w.push(*VOWELS.choose(rng).unwrap() as char);
    }
    if rng.gen_bool(0.5) {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
    }
    w
}

fn noise_token(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let len = rng.gen_range(3..=6);
    (0..len)
        .map(|_| *ALPHABET.choose(rng).unwrap() as char)
        .collect()
}

fn build_pools(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let stopwords = Stopwords::english();
    let mut used_stems: HashSet<String> = SHARED_WORDS.iter().map(|w| stem(w)).collect();
    let n_shared = ((config.keyword_overlap_rate * config.keywords_per_category as f64).round()
        as usize)
        .min(config.keywords_per_category)
        .min(SHARED_WORDS.len());
    let mut pools = Vec::with_capacity(config.n_categories);
    for c in 0..config.n_categories {
        let n_own = config.keywords_per_category - n_shared;
        let mut pool: Vec<String> = Vec::with_capacity(config.keywords_per_category);
        let themed = THEMED_WORDS.get(c).copied().unwrap_or(&[]);
        for w in themed {
            if pool.len() == n_own {
                break;
            }
            if used_stems.insert(stem(w)) {
                pool.push(w.to_string());
            }
        }
        while pool.len() < n_own {
            let w = pseudo_word(rng);
            if !stopwords.contains(&w) && used_stems.insert(stem(&w)) {
                pool.push(w);
            }
        }
        let shared: Vec<&str> = SHARED_WORDS
            .choose_multiple(rng, n_shared)
            .copied()
            .collect();
        pool.extend(shared.into_iter().map(String::from));
        pools.push(pool);
    }
    pools
}

fn decorate(words: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut title: Vec<String> = words
        .iter()
        .map(|w| {
            if rng.gen_bool(0.3) {
                w.to_uppercase()
            } else if rng.gen_bool(0.4) {
                let mut cs = w.chars();
                cs.next()
                    .map(|f| f.to_uppercase().chain(cs).collect())
                    .unwrap_or_default()
            } else {
                w.clone()
            }
        })
        .collect();
    if rng.gen_bool(0.15) {
        title.push("!!".into());
    }
    let sep = if rng.gen_bool(0.1) { " - " } else { " " };
    title.join(sep)
}

fn make_title(
    pool: &[String],
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    seen: &mut HashSet<String>,
) -> (String, Vec<String>) {
    for attempt in 0.. {
        let n = rng.gen_range(2..=6).min(pool.len());
        let picks: Vec<&String> = pool.choose_multiple(rng, n).collect();
        let mut words = Vec::with_capacity(n + 2);
        for w in picks {
            words.push(w.clone());
            if rng.gen_bool(config.noise_token_rate) {
                words.push(noise_token(rng));
            }
        }
        if attempt >= 50 {
            words.push(noise_token(rng));
        }
        let title = decorate(&words, rng);
        if seen.insert(normalize_text(&title).into_string()) {
            return (title, words);
        }
    }
    unreachable!()
}

/// Generates a corpus; identical configs give identical output.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let pools = build_pools(config, &mut rng);
    let categories = config.category_names();
    let vendors: Vec<String> = (1..=config.n_vendors)
        .map(|i| format!("vendor{i:04}"))
        .collect();
    let markets: Vec<String> = (1..=config.n_markets)
        .map(|i| format!("market{i:02}"))
        .collect();
    let home_market: Vec<usize> = (0..config.n_vendors)
        .map(|_| rng.gen_range(0..config.n_markets))
        .collect();
    // Zipf-like vendor activity.
    let vendor_weights = WeightedIndex::new((1..=config.n_vendors).map(|r| 1.0 / r as f64))
        .expect("positive weights");

    struct Draft {
        product: usize,
        market: usize,
        vendor: usize,
        // Cross-posts sometimes differ in case and punctuation.
        restyle: bool,
    }
    let mut word_lists = Vec::new();
    let mut seen_titles = HashSet::new();
    let mut products = Vec::new();
    let mut drafts = Vec::new();
    for (category, pool) in pools.iter().enumerate() {
        let market_pinned = config.single_market_category == Some(category);
        let vendor_pinned = config.single_vendor_category == Some(category);
        let cap = config.listing_cap(category);
        for _ in 0..config.titles_per_category {
            let product = products.len();
            let (title, words) = make_title(pool, config, &mut rng, &mut seen_titles);
            word_lists.push(words);
            products.push(SynthProduct {
                title,
                category,
                listing_ids: Vec::new(),
            });

            let vendor = if vendor_pinned {
                0
            } else {
                vendor_weights.sample(&mut rng)
            };
            let market = if market_pinned {
                0
            } else if rng.gen_bool(0.7) {
                home_market[vendor]
            } else {
                rng.gen_range(0..config.n_markets)
            };
            let mut n_listings = 1;
            while n_listings < cap && rng.gen_bool(config.cross_list_rate) {
                n_listings += 1;
            }
            let mut used_markets = vec![market];
            let mut used_vendors = vec![vendor];
            drafts.push(Draft {
                product,
                market,
                vendor,
                restyle: false,
            });
            for _ in 1..n_listings {
                let market = if market_pinned {
                    0
                } else {
                    pick_unused(&mut rng, config.n_markets, &mut used_markets)
                };
                let vendor = if vendor_pinned {
                    0
                } else {
                    pick_unused(&mut rng, config.n_vendors, &mut used_vendors)
                };
                let restyle = rng.gen_bool(0.5);
                drafts.push(Draft {
                    product,
                    market,
                    vendor,
                    restyle,
                });
            }
        }
    }
    drafts.shuffle(&mut rng);

    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let currencies = ["USD", "BTC", "EUR"];
    let mut records = Vec::with_capacity(drafts.len());
    let mut record_category = Vec::with_capacity(drafts.len());
    for (i, d) in drafts.into_iter().enumerate() {
        let listing_id = format!("synth:{:06}", i + 1);
        let p = &mut products[d.product];
        p.listing_ids.push(listing_id.clone());
        record_category.push(p.category);
        records.push(ProductRecord {
            listing_id,
            market: markets[d.market].clone(),
            vendor: vendors[d.vendor].clone(),
            title: if d.restyle {
                decorate(&word_lists[d.product], &mut rng)
            } else {
                p.title.clone()
            },
            description: None,
            price: Some((rng.gen_range(500..50_000) as f64) / 100.0),
            currency: Some(currencies.choose(&mut rng).unwrap().to_string()),
            rating: rng
                .gen_bool(0.6)
                .then(|| rng.gen_range(1..=10) as f64 / 2.0),
            posted_date: start.checked_add_days(chrono::Days::new(rng.gen_range(0..180))),
        });
    }
    Ok(SynthCorpus {
        records,
        categories,
        products,
        record_category,
        pools,
    })
}

fn pick_unused(rng: &mut ChaCha8Rng, n: usize, used: &mut Vec<usize>) -> usize {
    debug_assert!(used.len() < n);
    loop {
        let v = rng.gen_range(0..n);
        if !used.contains(&v) {
            used.push(v);
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{deduplicate, product_vendor_distribution, DedupKey};
    use crate::textprep::TextPipeline;

    fn small() -> SynthConfig {
        SynthConfig {
            n_categories: 6,
            titles_per_category: 40,
            n_vendors: 50,
            n_markets: 8,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&SynthConfig {
            rng_seed: 99,
            ..small()
        })
        .unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_corpus(&SynthConfig {
            cross_list_rate: 1.5,
            ..small()
        })
        .is_err());
        assert!(generate_corpus(&SynthConfig {
            n_markets: 0,
            ..small()
        })
        .is_err());
        assert!(generate_corpus(&SynthConfig {
            single_vendor_category: Some(6),
            ..small()
        })
        .is_err());
    }

    #[test]
    fn pools_are_disjoint_without_overlap() {
        let cfg = SynthConfig {
            keyword_overlap_rate: 0.0,
            noise_token_rate: 0.0,
            ..SynthConfig::default()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        let pipeline = TextPipeline::default();
        let mut owner: HashMap<String, usize> = HashMap::new();
        for (c, pool) in corpus.pools.iter().enumerate() {
            assert_eq!(pool.len(), cfg.keywords_per_category);
            for w in pool {
                assert_eq!(owner.insert(stem(w), c), None, "{w}");
            }
        }
        // Every title's lexemes belong to its own category.
        for p in &corpus.products {
            for lexeme in pipeline.lexemes(&normalize_text(&p.title)) {
                assert_eq!(owner.get(&lexeme), Some(&p.category), "{}", p.title);
            }
        }
    }

    #[test]
    fn no_cross_listing_makes_dedup_identity() {
        let corpus = generate_corpus(&SynthConfig {
            cross_list_rate: 0.0,
            ..small()
        })
        .unwrap();
        let products = deduplicate(&corpus.records, DedupKey::Normalized);
        assert_eq!(products.len(), corpus.records.len());
        assert_eq!(products.len(), corpus.products.len());
    }

    #[test]
    fn truth_round_trips_through_dedup() {
        let corpus = generate_corpus(&small()).unwrap();
        let products = deduplicate(&corpus.records, DedupKey::Normalized);
        assert_eq!(products.len(), corpus.products.len());
        let truth = corpus.truth_for(&products).unwrap();
        let by_id: HashMap<&str, usize> = corpus
            .records
            .iter()
            .zip(&corpus.record_category)
            .map(|(r, &c)| (r.listing_id.as_str(), c))
            .collect();
        for (p, label) in products.iter().zip(&truth) {
            for id in &p.listing_ids {
                assert_eq!(&corpus.categories[by_id[id.as_str()]], label);
            }
        }
    }

    #[test]
    fn relisting_matches_analytic_expectation() {
        let cfg = SynthConfig {
            cross_list_rate: 0.3,
            n_categories: 10,
            titles_per_category: 100,
            ..SynthConfig::default()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        let products = deduplicate(&corpus.records, DedupKey::Normalized);
        let unique = product_vendor_distribution(&products).unique_fraction();
        assert!((unique - cfg.expected_unique_fraction()).abs() < 0.05);
        let ratio = products.len() as f64 / corpus.records.len() as f64;
        assert!((ratio - cfg.expected_distinct_ratio()).abs() < 0.05);
    }

    #[test]
    fn analytic_expectations() {
        let cfg = SynthConfig {
            cross_list_rate: 0.43,
            n_markets: 17,
            n_vendors: 400,
            ..small()
        };
        assert!((cfg.expected_unique_fraction() - 0.57).abs() < 1e-12);
        let e = (1.0 - 0.43f64.powi(17)) / 0.57;
        assert!((cfg.expected_distinct_ratio() - 1.0 / e).abs() < 1e-12);
        let none = SynthConfig {
            cross_list_rate: 0.0,
            ..small()
        };
        assert_eq!(none.expected_distinct_ratio(), 1.0);
    }

    #[test]
    fn pinned_categories() {
        let cfg = SynthConfig {
            single_market_category: Some(1),
            single_vendor_category: Some(2),
            ..small()
        };
        let corpus = generate_corpus(&cfg).unwrap();
        let markets: HashSet<&str> = corpus
            .records
            .iter()
            .zip(&corpus.record_category)
            .filter(|(_, &c)| c == 1)
            .map(|(r, _)| r.market.as_str())
            .collect();
        let vendors: HashSet<&str> = corpus
            .records
            .iter()
            .zip(&corpus.record_category)
            .filter(|(_, &c)| c == 2)
            .map(|(r, _)| r.vendor.as_str())
            .collect();
        assert_eq!(markets.len(), 1);
        assert_eq!(vendors.len(), 1);
    }

    #[test]
    fn cross_posts_vary_in_surface_form() {
        let corpus = generate_corpus(&small()).unwrap();
        let normalized = deduplicate(&corpus.records, DedupKey::Normalized);
        let raw = deduplicate(&corpus.records, DedupKey::Raw);
        assert_eq!(normalized.len(), corpus.products.len());
        assert!(raw.len() > normalized.len());
    }

    #[test]
    fn labeled_sample_is_stratified() {
        let corpus = generate_corpus(&small()).unwrap();
        let sample = corpus.labeled_sample(40, 1);
        assert_eq!(sample.len(), 40);
        let mut per: HashMap<&str, usize> = HashMap::new();
        for (_, l) in &sample {
            *per.entry(l.as_str()).or_default() += 1;
        }
        assert_eq!(per.len(), 6);
        assert!(per.values().all(|&n| n == 6 || n == 7));
    }
}
