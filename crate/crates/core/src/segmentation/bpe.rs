//! Byte-level byte-pair encoding for token accounting.
//!
//! Text is pre-tokenized, each pre-token is mapped byte-by-byte onto the
//! printable alphabet used by GPT-2 style merge files, and merges are applied
//! greedily by rank. Only counts are produced; there is no vocabulary lookup.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use fancy_regex::Regex;

use super::SegmentError;

const GPT2_PATTERN: &str = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreTokenizer {
    /// The GPT-2 splitting regex (contractions, letter runs, digit runs,
    /// punctuation runs, whitespace).
    #[default]
    Gpt2,
    /// Words with their leading whitespace attached.
    Whitespace,
}

impl PreTokenizer {
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            PreTokenizer::Gpt2 => gpt2_regex()
                .find_iter(text)
                .filter_map(Result::ok)
                .map(|m| m.as_str())
                .collect(),
            PreTokenizer::Whitespace => {
                let mut out = Vec::new();
                let mut begin = 0;
                let mut in_word = false;
                for (i, c) in text.char_indices() {
                    if c.is_whitespace() && in_word {
                        out.push(&text[begin..i]);
                        begin = i;
                        in_word = false;
                    } else if !c.is_whitespace() {
                        in_word = true;
                    }
                }
                if begin < text.len() {
                    out.push(&text[begin..]);
                }
                out
            }
        }
    }
}

fn gpt2_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(GPT2_PATTERN).expect("valid pre-tokenizer pattern"))
}

/// GPT-2's reversible byte → printable char table.
fn byte_alphabet() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let mut extra = 0u32;
        for b in 0..=255u8 {
            let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
            table[b as usize] = if printable {
                char::from(b)
            } else {
                let c = char::from_u32(256 + extra).expect("valid code point");
                extra += 1;
                c
            };
        }
        table
    })
}

fn to_symbols(piece: &str) -> Vec<String> {
    let table = byte_alphabet();
    piece.bytes().map(|b| table[b as usize].to_string()).collect()
}

/// Merge table with symbols interned as integers.
#[derive(Debug, Clone, Default)]
pub struct BpeCounter {
    texts: Vec<String>,
    ids: HashMap<String, u32>,
    /// (left, right) → (rank, merged symbol)
    merges: HashMap<(u32, u32), (usize, u32)>,
    bytes: Vec<u32>,
    pretokenizer: PreTokenizer,
    /// Token counts of pre-tokens already seen.
    cache: Arc<RwLock<HashMap<String, usize>>>,
}

const CACHE_LIMIT: usize = 200_000;

impl BpeCounter {
    pub fn new(merges: Vec<(String, String)>, pretokenizer: PreTokenizer) -> Self {
        let mut counter = Self {
            pretokenizer,
            ..Self::default()
        };
        counter.bytes = byte_alphabet().iter().map(|c| counter.intern(&c.to_string())).collect();
        for (rank, (a, b)) in merges.into_iter().enumerate() {
            let merged = counter.intern(&format!("{a}{b}"));
            let key = (counter.intern(&a), counter.intern(&b));
            counter.merges.entry(key).or_insert((rank, merged));
        }
        counter
    }

    fn intern(&mut self, text: &str) -> u32 {
        if let Some(&id) = self.ids.get(text) {
            return id;
        }
        let id = self.texts.len() as u32;
        self.texts.push(text.to_string());
        self.ids.insert(text.to_string(), id);
        id
    }

    /// Parses a merges file: `tokenA tokenB` per line in rank order. A leading
    /// `#version` line and blank lines are skipped.
    pub fn from_merges(text: &str, pretokenizer: PreTokenizer) -> Result<Self, SegmentError> {
        let mut merges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (idx == 0 && line.starts_with("#version")) {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    merges.push((a.to_string(), b.to_string()));
                }
                _ => {
                    return Err(SegmentError::Config(format!(
                        "merge table line {}: expected `tokenA tokenB`, found `{line}`",
                        idx + 1
                    )))
                }
            }
        }
        Ok(Self::new(merges, pretokenizer))
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn count(&self, text: &str) -> usize {
        self.pretokenizer
            .split(text)
            .into_iter()
            .map(|piece| self.count_piece(piece))
            .sum()
    }

    fn count_piece(&self, piece: &str) -> usize {
        if let Some(&n) = self.cache.read().expect("bpe cache").get(piece) {
            return n;
        }
        let n = self.encode_ids(piece).len();
        let mut cache = self.cache.write().expect("bpe cache");
        if cache.len() < CACHE_LIMIT {
            cache.insert(piece.to_string(), n);
        }
        n
    }

    /// Merged symbols for one pre-token.
    pub fn encode_piece(&self, piece: &str) -> Vec<String> {
        self.encode_ids(piece)
            .into_iter()
            .map(|id| self.texts[id as usize].clone())
            .collect()
    }

    fn encode_ids(&self, piece: &str) -> Vec<u32> {
        let mut symbols: Vec<u32> = piece.bytes().map(|b| self.bytes[b as usize]).collect();
        let mut merged = Vec::with_capacity(symbols.len());
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merges.get(&(w[0], w[1])).map(|&(rank, to)| (rank, w[0], w[1], to)))
                .min_by_key(|m| m.0);
            let Some((_, left, right, to)) = best else {
                break;
            };
            merged.clear();
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    merged.push(to);
                    i += 2;
                } else {
                    merged.push(symbols[i]);
                    i += 1;
                }
            }
            std::mem::swap(&mut symbols, &mut merged);
        }
        symbols
    }
}

/// Learns `n` merges from a corpus (most frequent adjacent pair first,
/// lexicographically smallest pair on ties).
pub fn learn_merges(corpus: &str, n: usize, pretokenizer: PreTokenizer) -> Vec<(String, String)> {
    let mut freqs: HashMap<&str, usize> = HashMap::new();
    for piece in pretokenizer.split(corpus) {
        *freqs.entry(piece).or_default() += 1;
    }
    let mut words: Vec<(Vec<String>, usize)> = freqs.into_iter().map(|(w, f)| (to_symbols(w), f)).collect();
    words.sort();

    let mut merges = Vec::with_capacity(n);
    while merges.len() < n {
        let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
        for (symbols, freq) in &words {
            for w in symbols.windows(2) {
                *pairs.entry((w[0].as_str(), w[1].as_str())).or_default() += freq;
            }
        }
        let Some(((a, b), _)) = pairs
            .into_iter()
            .max_by(|(pa, fa), (pb, fb)| fa.cmp(fb).then_with(|| pb.cmp(pa)))
        else {
            break;
        };
        let (a, b) = (a.to_string(), b.to_string());
        for (symbols, _) in &mut words {
            let mut i = 0;
            while i + 1 < symbols.len() {
                if symbols[i] == a && symbols[i + 1] == b {
                    symbols[i] = format!("{a}{b}");
                    symbols.remove(i + 1);
                }
                i += 1;
            }
        }
        merges.push((a, b));
    }
    merges
}

pub fn write_merges(merges: &[(String, String)]) -> String {
    let mut out = String::from("#version: 0.2\n");
    for (a, b) in merges {
        out.push_str(a);
        out.push(' ');
        out.push_str(b);
        out.push('\n');
    }
    out
}
