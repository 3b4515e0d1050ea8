//! Text helpers shared by the corpus, scoring and transform layers.
//!
//! Arabic text is stored as-is. Every comparison goes through NFC so that
//! precomposed and decomposed hamza forms compare equal, while distinct
//! letters (for example `أ` and `ا`) stay distinct.

use std::borrow::Cow;

use sha2::{Digest, Sha256};
use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

/// Placeholder for the slot that candidate targets fill.
pub const MASK_MARKER: &str = "[MASK]";

/// The standalone first-person singular pronoun.
pub const FIRST_PERSON_PRONOUN: &str = "أنا";

/// NFC form of `s`, borrowing when the input is already normalized.
pub fn nfc(s: &str) -> Cow<'_, str> {
    match is_nfc_quick(s.chars()) {
        IsNormalized::Yes => Cow::Borrowed(s),
        _ => Cow::Owned(s.nfc().collect()),
    }
}

/// Code-point equality after NFC.
pub fn nfc_eq(a: &str, b: &str) -> bool {
    nfc(a) == nfc(b)
}

pub fn count_mask_markers(text: &str) -> usize {
    text.matches(MASK_MARKER).count()
}

/// True when `text` contains the pronoun as a whitespace-delimited token.
pub fn has_first_person_pronoun(text: &str) -> bool {
    nfc(text)
        .split_whitespace()
        .any(|tok| tok == FIRST_PERSON_PRONOUN)
}

/// Derive a 64-bit seed from a base seed and a list of string parts.
///
/// Parts are length-prefixed before hashing so `("ab", "c")` and
/// `("a", "bc")` never collide.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in parts {
        let normalized = nfc(part);
        hasher.update((normalized.len() as u64).to_le_bytes());
        hasher.update(normalized.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Lowercase hex SHA-256 of the NFC form of `text`.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(nfc(text).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nfc_merges_composed_and_decomposed_hamza() {
        // U+0623 vs U+0627 U+0654
        let composed = "\u{0623}نا";
        let decomposed = "\u{0627}\u{0654}نا";
        assert!(nfc_eq(composed, decomposed));
        assert!(has_first_person_pronoun(&format!("{decomposed} هنا")));
    }

    #[test]
    fn bare_alef_is_not_the_pronoun() {
        assert!(!has_first_person_pronoun("انا شربت [MASK]"));
        assert!(has_first_person_pronoun("شوف أنا أشجع [MASK]"));
        assert!(!has_first_person_pronoun("أنا، [MASK]"));
    }

    #[test]
    fn mask_counting() {
        assert_eq!(count_mask_markers("a [MASK] b"), 1);
        assert_eq!(count_mask_markers("[MASK][MASK]"), 2);
        assert_eq!(count_mask_markers("nothing"), 0);
    }

    #[test]
    fn derived_seeds_are_stable_and_separated() {
        assert_eq!(derive_seed(7, &["p1", "x"]), derive_seed(7, &["p1", "x"]));
        assert_ne!(derive_seed(7, &["ab", "c"]), derive_seed(7, &["a", "bc"]));
        assert_ne!(derive_seed(7, &["p1"]), derive_seed(8, &["p1"]));
    }
}
