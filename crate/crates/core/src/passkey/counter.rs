/// Token length of a text under some tokenizer.
///
/// Implementations should be close to additive: the count of a concatenation
/// stays within one of the sum of the parts.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

impl<F: Fn(&str) -> usize> TokenCounter for F {
    fn count(&self, text: &str) -> usize {
        self(text)
    }
}

/// Tokenizer-free estimate: one token per four non-CJK characters (rounded
/// up) plus one per CJK codepoint.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxCounter;

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3000..=0x303F     // punctuation
        | 0x3040..=0x30FF   // kana
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF   // hangul
        | 0xF900..=0xFAFF
        | 0xFF00..=0xFFEF   // fullwidth forms
        | 0x20000..=0x2FA1F)
}

impl TokenCounter for ApproxCounter {
    fn count(&self, text: &str) -> usize {
        let (cjk, other) =
            text.chars().fold((0usize, 0usize), |(c, o), ch| if is_cjk(ch) { (c + 1, o) } else { (c, o + 1) });
        cjk + other.div_ceil(4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts() {
        let c = ApproxCounter;
        assert_eq!(c.count(""), 0);
        assert_eq!(c.count("abcd"), 1);
        assert_eq!(c.count("abcde"), 2);
        assert_eq!(c.count("你好"), 2);
        assert_eq!(c.count("你好ab"), 3);
    }

    proptest! {
        #[test]
        fn near_additive(a in "\\PC{0,40}", b in "\\PC{0,40}") {
            let c = ApproxCounter;
            let whole = c.count(&format!("{a}{b}"));
            let parts = c.count(&a) + c.count(&b);
            prop_assert!(whole <= parts && parts <= whole + 1);
        }
    }
}
