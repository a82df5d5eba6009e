//! Script-aware segmentation shared by passage length counting, F1
//! tokenization and BLEU tokenization.

use unicode_normalization::{is_nfc, UnicodeNormalization};

/// Returns true for CJK unified ideographs (all extension blocks) and
/// compatibility ideographs.
pub fn is_han(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x2F800..=0x2FA1F
        | 0x30000..=0x323AF
    )
}

/// Languages whose text is segmented per Han character.
pub fn uses_han_segmentation(language: &str) -> bool {
    let lang = language.to_ascii_lowercase();
    lang == "zh" || lang.starts_with("zh-") || lang.starts_with("zh_")
}

/// Splits `text` so that every Han character is its own token and every other
/// maximal non-whitespace run is one token.
pub fn split_mixed(text: &str) -> MixedTokens<'_> {
    MixedTokens { rest: text }
}

#[derive(Debug, Clone)]
pub struct MixedTokens<'a> {
    rest: &'a str,
}

impl<'a> Iterator for MixedTokens<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        let trimmed = self.rest.trim_start();
        let first = trimmed.chars().next()?;
        let end = if is_han(first) {
            first.len_utf8()
        } else {
            trimmed
                .char_indices()
                .find(|&(_, c)| c.is_whitespace() || is_han(c))
                .map_or(trimmed.len(), |(i, _)| i)
        };
        let (token, rest) = trimmed.split_at(end);
        self.rest = rest;
        Some(token)
    }
}

/// NFC-normalizes `text`, borrowing when it is already normalized.
pub fn nfc(text: &str) -> std::borrow::Cow<'_, str> {
    if is_nfc(text) {
        std::borrow::Cow::Borrowed(text)
    } else {
        std::borrow::Cow::Owned(text.nfc().collect())
    }
}

/// Whitespace-delimited tokens paired with their byte offsets.
pub(crate) fn token_spans(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace()
        .map(move |tok| (tok.as_ptr() as usize - text.as_ptr() as usize, tok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_split_separates_han_characters() {
        let toks: Vec<_> = split_mixed("曾参加2008年夏季 Category:美国").collect();
        assert_eq!(
            toks,
            [
                "曾",
                "参",
                "加",
                "2008",
                "年",
                "夏",
                "季",
                "Category:",
                "美",
                "国"
            ]
        );
    }

    #[test]
    fn mixed_split_of_blank_text_is_empty() {
        assert_eq!(split_mixed("  \t\n").count(), 0);
    }

    #[test]
    fn nfc_composes_decomposed_input() {
        let decomposed = "an\u{0303}o";
        assert_eq!(nfc(decomposed), "año");
        assert!(matches!(nfc("año"), std::borrow::Cow::Borrowed(_)));
    }

    #[test]
    fn token_spans_report_byte_offsets() {
        let spans: Vec<_> = token_spans(" añ  b").collect();
        assert_eq!(spans, [(1, "añ"), (6, "b")]);
    }
}
