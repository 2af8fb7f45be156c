//! Seeded synthetic corpora with planted class-marker tokens, plus matching
//! stopword lists, lemma lexicons and embedding tables.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, LabeledDataset};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::preprocess::normalize_text;

const CONSONANTS: &[u8] = b"bdfgklmnprst";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Script {
    Latin,
    /// Arabic-script letters; raw text gets optional diacritics and
    /// confusable code points so normalization has work to do.
    Urdu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Documents per class, `[negative, positive]`.
    pub n_per_class: [usize; 2],
    pub markers_per_class: usize,
    /// Chance a document carries a marker of its own class.
    pub p_marker: f64,
    /// Chance a document also carries a marker of the other class.
    pub p_cross: f64,
    pub noise_vocab: usize,
    /// Inclusive range of noise tokens per document.
    pub doc_len: (usize, usize),
    pub script: Script,
    pub id_prefix: String,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_negative: usize, n_positive: usize, seed: u64) -> Self {
        SynthSpec {
            n_per_class: [n_negative, n_positive],
            markers_per_class: 8,
            p_marker: 0.95,
            p_cross: 0.0,
            noise_vocab: 400,
            doc_len: (4, 12),
            script: Script::Latin,
            id_prefix: "d".into(),
            seed,
        }
    }

    /// Train and test specs with the abusive-task class counts.
    pub fn task_a(seed: u64) -> (SynthSpec, SynthSpec) {
        (
            SynthSpec { id_prefix: "train".into(), ..Self::new(1213, 1187, seed) },
            SynthSpec { id_prefix: "test".into(), ..Self::new(537, 563, seed.wrapping_add(1)) },
        )
    }

    /// Train and test specs with the threatening-task class counts.
    pub fn task_b(seed: u64) -> (SynthSpec, SynthSpec) {
        (
            SynthSpec { id_prefix: "train".into(), ..Self::new(4929, 1071, seed) },
            SynthSpec { id_prefix: "test".into(), ..Self::new(3231, 719, seed.wrapping_add(1)) },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.into()));
        if self.markers_per_class == 0 {
            return bad("markers_per_class must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.p_marker) || !(0.0..=1.0).contains(&self.p_cross) {
            return bad("p_marker and p_cross must lie in [0, 1]");
        }
        if self.doc_len.0 > self.doc_len.1 {
            return bad("doc_len range is empty");
        }
        if self.doc_len.1 > 0 && self.noise_vocab == 0 {
            return bad("noise tokens requested but noise_vocab is 0");
        }
        if self.doc_len.1 == 0 && self.p_marker < 1.0 {
            return bad("documents without noise need p_marker = 1 to be non-empty");
        }
        if self.id_prefix.is_empty() {
            return bad("id_prefix must be non-empty");
        }
        Ok(())
    }

    /// Normalized marker tokens of `class`.
    pub fn markers(&self, class: u8) -> Vec<String> {
        (0..self.markers_per_class).map(|i| marker_word(class, i)).map(|w| spell(&w, self.script)).collect()
    }

    /// Normalized noise tokens, index order.
    pub fn noise_tokens(&self) -> Vec<String> {
        (0..self.noise_vocab).map(|i| spell(&noise_word(i), self.script)).collect()
    }

    /// The first `n` noise tokens, for use as a stopword list.
    pub fn stopwords(&self, n: usize) -> Vec<String> {
        self.noise_tokens().into_iter().take(n).collect()
    }

    /// `n` inflected-form to lemma pairs drawn from the noise vocabulary
    /// (disjoint from [`SynthSpec::stopwords`] of the same `n`).
    pub fn lemma_pairs(&self, n: usize) -> Vec<(String, String)> {
        let noise = self.noise_tokens();
        (0..n)
            .filter_map(|i| {
                let form = noise.get(n + 2 * i + 1)?;
                Some((form.clone(), noise[n + 2 * i].clone()))
            })
            .collect()
    }
}

fn syllable(k: usize) -> [u8; 2] {
    [CONSONANTS[k / VOWELS.len() % CONSONANTS.len()], VOWELS[k % VOWELS.len()]]
}

fn syllable_word(mut i: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut out = Vec::new();
    // at least two syllables so noise words never collide with short markers
    for _ in 0..2 {
        out.extend(syllable(i % base));
        i /= base;
    }
    while i > 0 {
        out.extend(syllable(i % base));
        i /= base;
    }
    String::from_utf8(out).expect("ascii")
}

fn noise_word(i: usize) -> String {
    syllable_word(i)
}

fn marker_word(class: u8, i: usize) -> String {
    // `x` and `z` never occur in noise words
    format!("{}{}", if class == 1 { 'x' } else { 'z' }, syllable_word(i))
}

fn urdu_letter(c: char) -> char {
    match c {
        'b' => '\u{0628}',
        'd' => '\u{062F}',
        'f' => '\u{0641}',
        'g' => '\u{06AF}',
        'k' => '\u{06A9}',
        'l' => '\u{0644}',
        'm' => '\u{0645}',
        'n' => '\u{0646}',
        'p' => '\u{067E}',
        'r' => '\u{0631}',
        's' => '\u{0633}',
        't' => '\u{062A}',
        'a' => '\u{0627}',
        'e' => '\u{06D2}',
        'i' => '\u{06CC}',
        'o' => '\u{0648}',
        'u' => '\u{0639}',
        'x' => '\u{062E}',
        'z' => '\u{0632}',
        other => other,
    }
}

fn spell(latin: &str, script: Script) -> String {
    match script {
        Script::Latin => latin.to_string(),
        Script::Urdu => latin.chars().map(urdu_letter).collect(),
    }
}

/// Surface form as it appears in raw text. Urdu words may pick up a fatha
/// or have keheh / farsi yeh written with their Arabic look-alikes.
fn surface(word: &str, script: Script, rng: &mut ChaCha8Rng) -> String {
    if script == Script::Latin {
        return word.to_string();
    }
    let mut out = String::with_capacity(word.len() + 2);
    for (i, c) in word.chars().enumerate() {
        out.push(match c {
            '\u{06A9}' if rng.gen_bool(0.3) => '\u{0643}',
            '\u{06CC}' if rng.gen_bool(0.3) => '\u{064A}',
            c => c,
        });
        if i == 0 && rng.gen_bool(0.2) {
            out.push('\u{064E}');
        }
    }
    out
}

fn plant<'a>(words: &mut Vec<&'a str>, markers: &'a [String], rng: &mut ChaCha8Rng) {
    let m = markers[rng.gen_range(0..markers.len())].as_str();
    let at = rng.gen_range(0..=words.len());
    words.insert(at, m);
}

/// Draws the documents of `spec`, classes shuffled together. Same spec,
/// same bytes.
pub fn generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = spec.noise_tokens();
    let markers = [spec.markers(0), spec.markers(1)];
    let mut labels: Vec<u8> = std::iter::repeat(0).take(spec.n_per_class[0]).chain(std::iter::repeat(1).take(spec.n_per_class[1])).collect();
    labels.shuffle(&mut rng);
    let width = labels.len().max(1).to_string().len();
    let mut docs = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        let len = rng.gen_range(spec.doc_len.0..=spec.doc_len.1);
        let mut words: Vec<&str> = (0..len).map(|_| noise[rng.gen_range(0..noise.len())].as_str()).collect();
        if rng.gen_bool(spec.p_marker) {
            plant(&mut words, &markers[label as usize], &mut rng);
        }
        if rng.gen_bool(spec.p_cross) {
            plant(&mut words, &markers[1 - label as usize], &mut rng);
        }
        if words.is_empty() {
            words.push(noise.first().unwrap_or(&markers[label as usize][0]));
        }
        let text: Vec<String> = words.iter().map(|w| surface(w, spec.script, &mut rng)).collect();
        docs.push(Document::new(format!("{}{:0width$}", spec.id_prefix, i), text.join(" "), Some(label)));
    }
    LabeledDataset::new(docs, "1")
}

/// Embedding table over every token of `spec`. Noise vectors are uniform in
/// [-1, 1]; positive markers are shifted by `+signal` along the first axis
/// and negative markers by `-signal`.
pub fn embedding_table(spec: &SynthSpec, dim: usize, signal: f64, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Validation("embedding dim must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    let draw = |shift: f64, rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        v[0] += shift;
        v
    };
    for w in spec.noise_tokens() {
        let v = draw(0.0, &mut rng);
        table.insert(normalize_text(&w), v)?;
    }
    for (class, shift) in [(0u8, -signal), (1, signal)] {
        for w in spec.markers(class) {
            let v = draw(shift, &mut rng);
            table.insert(normalize_text(&w), v)?;
        }
    }
    Ok(table)
}
