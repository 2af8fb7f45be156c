//! Urdu text cleanup: diacritic removal, NFC + Urdu letter folding,
//! whitespace tokenization, stopword removal and lemma lookup.
//!
//! The pipeline order is fixed: diacritics, normalization, tokenization,
//! stopwords, lemmas. Stopwords are matched on normalized surface forms,
//! before lemmas rewrite them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{open_text, Document};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

const DEFAULT_FOLDING: &str = include_str!("../data/urdu_folding.tsv");

/// Arabic harakat U+064B..=U+065F plus superscript alef U+0670.
pub fn is_diacritic(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{065F}' | '\u{0670}')
}

pub fn remove_diacritics(s: &str) -> String {
    s.chars().filter(|&c| !is_diacritic(c)).collect()
}

/// Code point replacement table applied after NFC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldingTable {
    map: BTreeMap<char, char>,
}

impl Default for FoldingTable {
    fn default() -> Self {
        Self::parse(DEFAULT_FOLDING).expect("bundled folding table is valid")
    }
}

fn parse_codepoint(field: &str, line: usize) -> Result<char> {
    let hex = field
        .trim()
        .strip_prefix("U+")
        .or_else(|| field.trim().strip_prefix("u+"))
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("expected U+XXXX, got `{field}`"),
        })?;
    u32::from_str_radix(hex, 16)
        .ok()
        .and_then(char::from_u32)
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid code point `{field}`"),
        })
}

impl FoldingTable {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (char, char)>) -> Result<Self> {
        let map: BTreeMap<char, char> = pairs.into_iter().collect();
        for (&from, &to) in &map {
            if map.contains_key(&to) && from != to {
                return Err(Error::Validation(format!(
                    "folding table chains U+{:04X} -> U+{:04X}, which is itself folded",
                    from as u32, to as u32
                )));
            }
            let s = to.to_string();
            if s.nfc().collect::<String>() != s || is_diacritic(to) {
                return Err(Error::Validation(format!(
                    "folding target U+{:04X} is not normalization-stable",
                    to as u32
                )));
            }
        }
        Ok(FoldingTable { map })
    }

    /// Parses `U+XXXX<TAB>U+XXXX` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected two tab-separated code points".into(),
                });
            };
            pairs.push((parse_codepoint(a, line_no)?, parse_codepoint(b, line_no)?));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_all(path)?)
    }

    pub fn fold_char(&self, c: char) -> char {
        self.map.get(&c).copied().unwrap_or(c)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.map.iter().map(|(&a, &b)| (a, b))
    }

    /// NFC, fold, then NFC again. Folding can expose new canonical
    /// compositions (U+06C1 + U+0654 composes to U+06C2), so the final pass is
    /// what makes this idempotent.
    pub fn normalize(&self, s: &str) -> String {
        let folded: String = s.nfc().map(|c| self.fold_char(c)).collect();
        folded.nfc().collect()
    }
}

fn default_table() -> &'static FoldingTable {
    static TABLE: OnceLock<FoldingTable> = OnceLock::new();
    TABLE.get_or_init(FoldingTable::default)
}

/// NFC plus the bundled Urdu folding table.
pub fn normalize_text(s: &str) -> String {
    default_table().normalize(s)
}

pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn read_all(path: &Path) -> Result<String> {
    let mut s = String::new();
    open_text(path)?
        .read_to_string(&mut s)
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn clean(word: &str, table: &FoldingTable) -> String {
    table.normalize(&remove_diacritics(word.trim()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    /// Entries are cleaned the same way document text is, so matching happens
    /// on normalized forms.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let table = default_table();
        Self::from_words_with(words, table)
    }

    pub fn from_words_with<I, S>(words: I, table: &FoldingTable) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| clean(w.as_ref(), table))
            .filter(|w| !w.is_empty())
            .collect();
        StopwordList { words }
    }

    /// One word per line, `#` comment lines ignored.
    pub fn parse(text: &str, table: &FoldingTable) -> Self {
        Self::from_words_with(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
            table,
        )
    }

    pub fn load(path: &Path, table: &FoldingTable) -> Result<Self> {
        Ok(Self::parse(&read_all(path)?, table))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Surface form to lemma map; misses map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaLexicon {
    surface_to_lemma: HashMap<String, String>,
}

impl LemmaLexicon {
    pub fn from_pairs<I, S, T>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Self::from_pairs_with(pairs, default_table())
    }

    pub fn from_pairs_with<I, S, T>(pairs: I, table: &FoldingTable) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut surface_to_lemma = HashMap::new();
        for (s, l) in pairs {
            let s = clean(s.as_ref(), table);
            let l = clean(l.as_ref(), table);
            if !s.is_empty() && !l.is_empty() {
                surface_to_lemma.entry(s).or_insert(l);
            }
        }
        LemmaLexicon { surface_to_lemma }
    }

    /// `surface<TAB>lemma` per line.
    pub fn parse(text: &str, table: &FoldingTable) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            match trimmed.split_once('\t') {
                Some((s, l)) if !l.contains('\t') => pairs.push((s.to_owned(), l.to_owned())),
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "expected `surface<TAB>lemma`".into(),
                    })
                }
            }
        }
        Ok(Self::from_pairs_with(pairs, table))
    }

    pub fn load(path: &Path, table: &FoldingTable) -> Result<Self> {
        Self::parse(&read_all(path)?, table)
    }

    pub fn lookup<'a>(&'a self, w: &'a str) -> &'a str {
        self.surface_to_lemma.get(w).map(String::as_str).unwrap_or(w)
    }

    pub fn len(&self) -> usize {
        self.surface_to_lemma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_to_lemma.is_empty()
    }
}

pub fn remove_stopwords(tokens: &[String], list: &StopwordList) -> Vec<String> {
    tokens.iter().filter(|t| !list.contains(t)).cloned().collect()
}

pub fn lemmatize(tokens: &[String], lex: &LemmaLexicon) -> Vec<String> {
    tokens.iter().map(|t| lex.lookup(t).to_owned()).collect()
}

/// Diacritic removal and normalization are always applied; these two steps
/// are optional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub struct PreprocessConfig {
    pub remove_stopwords: bool,
    pub lemmatize: bool,
}

/// Bundles the resources the pipeline needs.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    pub folding: FoldingTable,
    pub stopwords: StopwordList,
    pub lexicon: LemmaLexicon,
}

impl Preprocessor {
    pub fn tokens(&self, text: &str, cfg: PreprocessConfig) -> Vec<String> {
        let mut tokens = tokenize(&self.folding.normalize(&remove_diacritics(text)));
        if cfg.remove_stopwords {
            tokens = remove_stopwords(&tokens, &self.stopwords);
        }
        if cfg.lemmatize {
            tokens = lemmatize(&tokens, &self.lexicon);
        }
        tokens
    }

    pub fn document(&self, doc: &Document, cfg: PreprocessConfig) -> Document {
        Document {
            tokens: self.tokens(&doc.raw_text, cfg),
            ..doc.clone()
        }
    }

    pub fn token_lists(&self, docs: &[Document], cfg: PreprocessConfig, exec: Execution) -> Vec<Vec<String>> {
        par::map(docs, exec, |d| self.tokens(&d.raw_text, cfg))
    }
}

/// Runs the full cleanup chain with the bundled folding table.
pub fn preprocess_document(
    doc: &Document,
    cfg: PreprocessConfig,
    list: &StopwordList,
    lex: &LemmaLexicon,
) -> Document {
    let mut tokens = tokenize(&normalize_text(&remove_diacritics(&doc.raw_text)));
    if cfg.remove_stopwords {
        tokens = remove_stopwords(&tokens, list);
    }
    if cfg.lemmatize {
        tokens = lemmatize(&tokens, lex);
    }
    Document {
        tokens,
        ..doc.clone()
    }
}
