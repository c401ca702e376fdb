//! Title normalization, tokenization, stopword removal, stemming and n-gram
//! extraction.
//!
//! Both analyzers see the same lexical material: tokens are stopword-filtered
//! and stemmed first, then either grouped into word n-grams or re-joined with
//! single spaces and cut into character n-grams that span word boundaries.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// A title after [`normalize_text`]: lowercase alphanumeric words separated by
/// single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedTitle(String);

impl NormalizedTitle {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedTitle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedTitle {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// NFKC-folds, lowercases, replaces every non-alphanumeric codepoint with a
/// space, collapses whitespace runs and trims.
pub fn normalize_text(raw: &str) -> NormalizedTitle {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.nfkc().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    NormalizedTitle(out)
}

pub fn tokenize(title: &NormalizedTitle) -> Vec<&str> {
    if title.is_empty() {
        return Vec::new();
    }
    title.as_str().split(' ').collect()
}

const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Set of words removed before stemming.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The embedded English list (one word per line in `stopwords_en.txt`).
    pub fn english() -> Self {
        Self::from_lines(DEFAULT_STOPWORDS.lines())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::from_lines(words)
    }

    /// Reads a plain-text list, one word per line. Blank lines and lines
    /// starting with `#` are ignored; words are normalized like titles.
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let lines = std::io::BufReader::new(file)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(path, e))?;
        Ok(Self::from_lines(lines))
    }

    fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = lines
            .into_iter()
            .filter(|l| !l.as_ref().trim_start().starts_with('#'))
            .map(|l| normalize_text(l.as_ref()).into_string())
            .filter(|w| !w.is_empty())
            .collect();
        Stopwords(words)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Words in sorted order, for serialization.
    pub fn sorted(&self) -> Vec<String> {
        let mut words: Vec<_> = self.0.iter().cloned().collect();
        words.sort();
        words
    }
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    // Snowball English (Porter2), as shipped by rust-stemmers 1.2.
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

pub fn stem(word: &str) -> String {
    stemmer().stem(word).into_owned()
}

/// Drops stopwords and stems the survivors, preserving order.
pub fn filter_and_stem<S: AsRef<str>>(tokens: &[S], stopwords: &Stopwords) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !stopwords.contains(t))
        .map(stem)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyzer {
    Word,
    Char,
}

/// Which n-grams to extract: word or character grams for every length in
/// `n_min..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NgramSpec {
    pub analyzer: Analyzer,
    pub n_min: usize,
    pub n_max: usize,
}

impl NgramSpec {
    pub fn new(analyzer: Analyzer, n_min: usize, n_max: usize) -> Result<Self> {
        if n_min == 0 || n_min > n_max {
            return Err(Error::InvalidSpec(format!(
                "{}({n_min},{n_max})",
                analyzer.name()
            )));
        }
        Ok(Self {
            analyzer,
            n_min,
            n_max,
        })
    }

    pub const fn word(n_min: usize, n_max: usize) -> Self {
        Self {
            analyzer: Analyzer::Word,
            n_min,
            n_max,
        }
    }

    pub const fn char(n_min: usize, n_max: usize) -> Self {
        Self {
            analyzer: Analyzer::Char,
            n_min,
            n_max,
        }
    }
}

/// The ten feature configurations compared in the evaluation grid.
pub const STANDARD_SPECS: [NgramSpec; 10] = [
    NgramSpec::word(1, 1),
    NgramSpec::word(1, 2),
    NgramSpec::char(3, 4),
    NgramSpec::char(3, 5),
    NgramSpec::char(3, 6),
    NgramSpec::char(3, 7),
    NgramSpec::char(4, 4),
    NgramSpec::char(4, 5),
    NgramSpec::char(4, 6),
    NgramSpec::char(4, 7),
];

impl Analyzer {
    fn name(self) -> &'static str {
        match self {
            Analyzer::Word => "word",
            Analyzer::Char => "char",
        }
    }
}

impl fmt::Display for NgramSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.analyzer.name(), self.n_min, self.n_max)
    }
}

/// Accepts `char:3-6`, `word:1`, or the display form `char(3,6)`.
impl FromStr for NgramSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(s.to_string());
        let s = s.trim();
        let (analyzer, range) = if let Some((a, rest)) = s.split_once(':') {
            (a, rest.to_string())
        } else if let Some((a, rest)) = s.split_once('(') {
            let rest = rest.strip_suffix(')').ok_or_else(bad)?;
            (a, rest.replace(',', "-"))
        } else {
            return Err(bad());
        };
        let analyzer = match analyzer.trim().to_ascii_lowercase().as_str() {
            "word" => Analyzer::Word,
            "char" => Analyzer::Char,
            _ => return Err(bad()),
        };
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        let (n_min, n_max) = match range.split_once('-') {
            Some((lo, hi)) => (parse(lo)?, parse(hi)?),
            None => {
                let n = parse(&range)?;
                (n, n)
            }
        };
        NgramSpec::new(analyzer, n_min, n_max).map_err(|_| bad())
    }
}

/// All contiguous n-grams of `tokens` for each length in the spec's range,
/// with multiplicity. Word grams join tokens with one space; char grams are
/// taken over the tokens re-joined with single spaces.
pub fn extract_ngrams<S: AsRef<str>>(tokens: &[S], spec: NgramSpec) -> Vec<String> {
    match spec.analyzer {
        Analyzer::Word => word_ngrams(tokens, spec.n_min, spec.n_max),
        Analyzer::Char => {
            let joined = tokens
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" ");
            char_ngrams(&joined, spec.n_min, spec.n_max)
        }
    }
}

fn word_ngrams<S: AsRef<str>>(tokens: &[S], n_min: usize, n_max: usize) -> Vec<String> {
    let mut grams = Vec::new();
    for n in n_min..=n_max {
        for window in tokens.windows(n) {
            let gram = window
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" ");
            grams.push(gram);
        }
    }
    grams
}

fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> Vec<String> {
    // Byte offsets of every char boundary, including the end.
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    let mut grams = Vec::new();
    for n in n_min..=n_max {
        if n > n_chars {
            break;
        }
        for start in 0..=n_chars - n {
            grams.push(text[bounds[start]..bounds[start + n]].to_string());
        }
    }
    grams
}

/// The preprocessing applied to every title before feature extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPipeline {
    pub stopwords: Stopwords,
}

impl Default for TextPipeline {
    fn default() -> Self {
        Self {
            stopwords: Stopwords::english(),
        }
    }
}

impl TextPipeline {
    pub fn new(stopwords: Stopwords) -> Self {
        Self { stopwords }
    }

    /// Stopword-filtered, stemmed tokens of a normalized title.
    pub fn lexemes(&self, title: &NormalizedTitle) -> Vec<String> {
        filter_and_stem(&tokenize(title), &self.stopwords)
    }

    pub fn features(&self, title: &NormalizedTitle, spec: NgramSpec) -> Vec<String> {
        extract_ngrams(&self.lexemes(title), spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<String>) -> Vec<String> {
        v.sort();
        v
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_text("  FreSh CVV,  Dumps!! ").as_str(),
            "fresh cvv dumps"
        );
        assert_eq!(normalize_text("PayPal→$$$").as_str(), "paypal");
        assert_eq!(normalize_text("").as_str(), "");
        assert_eq!(normalize_text("!!!---").as_str(), "");
    }

    #[test]
    fn normalize_folds_compatibility_forms_and_keeps_non_latin() {
        // Fullwidth letters fold under NFKC.
        assert_eq!(normalize_text("ＰａｙＰａｌ").as_str(), "paypal");
        assert_eq!(normalize_text("Карты VISA").as_str(), "карты visa");
        assert_eq!(normalize_text("ﬁle").as_str(), "file");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize(&normalize_text("fresh cvv dumps")),
            ["fresh", "cvv", "dumps"]
        );
        assert_eq!(tokenize(&normalize_text("paypal")), ["paypal"]);
        assert!(tokenize(&normalize_text("")).is_empty());
    }

    #[test]
    fn filter_and_stem_examples() {
        let sw = Stopwords::from_words(["the"]);
        assert_eq!(
            filter_and_stem(&["the", "hacking", "tools"], &sw),
            ["hack", "tool"]
        );
        assert!(filter_and_stem::<&str>(&[], &sw).is_empty());
        assert!(filter_and_stem(&["the", "the"], &sw).is_empty());
    }

    #[test]
    fn embedded_stopwords_cover_common_function_words() {
        let sw = Stopwords::english();
        for w in ["the", "a", "and", "for", "with", "of"] {
            assert!(sw.contains(w), "{w}");
        }
        for w in ["paypal", "fresh", "new", "hacking"] {
            assert!(!sw.contains(w), "{w}");
        }
    }

    #[test]
    fn char_ngram_examples() {
        let got = sorted(extract_ngrams(&["paypal"], NgramSpec::char(3, 4)));
        let want = sorted(
            ["pay", "ayp", "ypa", "pal", "payp", "aypa", "ypal"]
                .map(String::from)
                .to_vec(),
        );
        assert_eq!(got, want);
        assert!(extract_ngrams(&["ab"], NgramSpec::char(3, 6)).is_empty());
    }

    #[test]
    fn char_ngrams_span_spaces() {
        let grams = extract_ngrams(&["ab", "cd"], NgramSpec::char(3, 3));
        assert_eq!(grams, ["ab ", "b c", " cd"]);
    }

    #[test]
    fn char_ngrams_count_codepoints() {
        let grams = extract_ngrams(&["карта"], NgramSpec::char(4, 4));
        assert_eq!(grams, ["карт", "арта"]);
    }

    #[test]
    fn word_ngram_example() {
        let got = extract_ngrams(&["fresh", "cvv", "dump"], NgramSpec::word(1, 2));
        assert_eq!(got, ["fresh", "cvv", "dump", "fresh cvv", "cvv dump"]);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "char:3-6".parse::<NgramSpec>().unwrap(),
            NgramSpec::char(3, 6)
        );
        assert_eq!(
            "word:1".parse::<NgramSpec>().unwrap(),
            NgramSpec::word(1, 1)
        );
        assert_eq!(
            "char(4,7)".parse::<NgramSpec>().unwrap(),
            NgramSpec::char(4, 7)
        );
        for bad in ["char:0-2", "char:5-3", "byte:1-2", "char", "word:x"] {
            assert!(bad.parse::<NgramSpec>().is_err(), "{bad}");
        }
        for spec in STANDARD_SPECS {
            assert_eq!(spec.to_string().parse::<NgramSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn pipeline_applies_stemming_to_char_path() {
        let p = TextPipeline::default();
        let t = normalize_text("The Hacking Tools");
        assert_eq!(p.lexemes(&t), ["hack", "tool"]);
        let grams = p.features(&t, NgramSpec::char(9, 9));
        assert_eq!(grams, ["hack tool"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_is_idempotent(s in "\\PC{0,40}") {
                let once = normalize_text(&s);
                prop_assert_eq!(normalize_text(once.as_str()), once);
            }

            #[test]
            fn normalized_shape(s in "\\PC{0,40}") {
                let t = normalize_text(&s);
                let t = t.as_str();
                prop_assert!(!t.starts_with(' ') && !t.ends_with(' '));
                prop_assert!(!t.contains("  "));
                prop_assert!(t.chars().all(|c| c == ' ' || c.is_alphanumeric()));
            }

            #[test]
            fn char_gram_counts(s in "[a-z ]{0,30}", lo in 1usize..5, extra in 0usize..4) {
                let spec = NgramSpec::char(lo, lo + extra);
                let grams = extract_ngrams(&[s.as_str()], spec);
                let len = s.chars().count();
                for n in spec.n_min..=spec.n_max {
                    let got = grams.iter().filter(|g| g.chars().count() == n).count();
                    prop_assert_eq!(got, (len + 1).saturating_sub(n));
                }
            }
        }
    }
}
