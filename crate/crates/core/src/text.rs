//! Text normalization and tokenization shared by the generator, the rule
//! validator, and the simulator.
//!
//! All string matching in this crate goes through [`normalize_for_match`],
//! so queries and shop fields compare stably regardless of the Unicode
//! form or casing they were ingested with.

use alloc::string::String;
use alloc::vec::Vec;

use unicode_normalization::UnicodeNormalization;

/// Canonicalize a stored text field: NFC, trimmed, internal whitespace
/// collapsed to single spaces. Case is preserved.
pub fn normalize_field(s: &str) -> String {
    let composed: String = s.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    let mut pending_space = false;
    for ch in composed.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        }
    }
    out
}

/// Matching key: [`normalize_field`] plus simple case folding.
///
/// This is the dedup equivalence for query groups. Deliberately no
/// stemming; distinct user phrasings must stay distinct.
pub fn normalize_for_match(s: &str) -> String {
    normalize_field(s).to_lowercase()
}

fn char_class(ch: char) -> u8 {
    if ch.is_ascii_digit() {
        1
    } else if is_cjk(ch) {
        2
    } else {
        3
    }
}

fn is_cjk(ch: char) -> bool {
    matches!(u32::from(ch),
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

/// Whitespace and script-boundary tokenization over the match-normalized
/// form. Punctuation (parentheses, commas, quotes) separates tokens;
/// apostrophes inside a word are kept so "chen's" stays one token. A run
/// of CJK characters is split from adjacent Latin/digit runs.
pub fn tokenize(s: &str) -> Vec<String> {
    let norm = normalize_for_match(s);
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_class = 0u8;
    let flush = |buf: &mut String, tokens: &mut Vec<String>| {
        if !buf.is_empty() {
            tokens.push(core::mem::take(buf));
        }
    };
    for ch in norm.chars() {
        let word_char = ch.is_alphanumeric() || ch == '\'' || ch == '\u{2019}';
        if !word_char {
            flush(&mut current, &mut tokens);
            current_class = 0;
            continue;
        }
        let class = char_class(ch);
        if !current.is_empty() && class != current_class {
            flush(&mut current, &mut tokens);
        }
        current_class = class;
        current.push(ch);
    }
    flush(&mut current, &mut tokens);
    tokens
}
