//! Common interface over the two tokenizers so vectorization and the
//! pipeline can treat them interchangeably.

use crate::error::Result;
use crate::lattice::LexDictionary;
use crate::subword::SubwordVocab;

pub trait Tokenizer: Send + Sync {
    /// Splits one document into tokens.
    fn tokenize(&self, text: &str) -> Result<Vec<String>>;

    /// Short display name used in reports ("Lattice" / "SP").
    fn name(&self) -> &'static str;
}

impl Tokenizer for LexDictionary {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        Ok(crate::lattice::tokenize(text, self))
    }

    fn name(&self) -> &'static str {
        "Lattice"
    }
}

impl Tokenizer for SubwordVocab {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        self.encode(text)
    }

    fn name(&self) -> &'static str {
        "SP"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_and_vocab_share_the_interface() {
        let dict = crate::lattice::load_dictionary(&b"ab\t1\n"[..]).unwrap();
        let tokens = Tokenizer::tokenize(&dict, "abc").unwrap();
        assert_eq!(tokens, ["ab", "c"]);
        assert_eq!(dict.name(), "Lattice");

        let vocab = SubwordVocab::from_probs(&[("a", 0.5), ("b", 0.5)], None).unwrap();
        let tokens = Tokenizer::tokenize(&vocab, "ab").unwrap();
        assert_eq!(tokens, ["a", "b"]);
        assert_eq!(vocab.name(), "SP");
    }
}
