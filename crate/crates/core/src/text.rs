//! Text normalization and the shared tokenizer.
//!
//! Every lexical metric and every corpus operation goes through these two
//! functions, so results are byte-stable across platforms.

use std::ops::Range;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Hebrew cantillation and pointing block.
const NIQQUD: std::ops::RangeInclusive<char> = '\u{0591}'..='\u{05C7}';

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizeOptions {
    pub strip_niqqud: bool,
}

/// NFC, CRLF/CR to LF, trimmed. Optionally drops Hebrew pointing marks.
pub fn normalize(text: &str, opts: NormalizeOptions) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let nfc: String = if opts.strip_niqqud {
        // Only the combining marks in the block; maqaf and sof pasuq are punctuation.
        unified
            .nfd()
            .filter(|c| !(NIQQUD.contains(c) && is_combining_mark(*c)))
            .nfc()
            .collect()
    } else {
        unified.nfc().collect()
    };
    nfc.trim().to_string()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Space,
    Word,
    Punct,
}

fn classify(c: char) -> Class {
    if c.is_whitespace() {
        Class::Space
    } else if is_word_char(c) {
        Class::Word
    } else {
        Class::Punct
    }
}

/// Byte spans of tokens: maximal runs of letters/digits (with their combining
/// marks) and maximal runs of punctuation. Whitespace separates tokens.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut current: Option<(Class, usize)> = None;
    for (i, c) in text.char_indices() {
        let mut class = classify(c);
        // A leading combining mark after punctuation stays with that run.
        if class == Class::Word && !c.is_alphanumeric() {
            if let Some((Class::Punct, _)) = current {
                class = Class::Punct;
            }
        }
        match current {
            Some((cls, _)) if cls == class => {}
            Some((cls, start)) => {
                if cls != Class::Space {
                    spans.push(start..i);
                }
                current = Some((class, i));
            }
            None => current = Some((class, i)),
        }
    }
    if let Some((cls, start)) = current {
        if cls != Class::Space {
            spans.push(start..text.len());
        }
    }
    spans
}

pub fn tokenize(text: &str) -> Vec<&str> {
    token_spans(text).into_iter().map(|r| &text[r]).collect()
}

/// Byte spans of whitespace-delimited chunks.
pub fn whitespace_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

/// `ceil(fraction * n)`, at least 1. The small epsilon absorbs float error
/// such as `0.15 * 20 = 3.0000000000000004`.
pub fn ceil_count(fraction: f64, n: usize) -> usize {
    let raw = (fraction * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n.max(1))
}

/// Stable 64-bit FNV-1a, used wherever a platform-independent hash is needed.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives an independent seed for a named sub-stream of a master seed.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    let mut bytes = master.to_le_bytes().to_vec();
    bytes.extend_from_slice(stream.as_bytes());
    fnv1a64(&bytes)
}
