//! Trainable unigram language-model subword tokenizer.
//!
//! A [`SubwordVocab`] assigns each piece a log-probability; the probability
//! of a segmentation is the product of its piece probabilities. Encoding
//! picks the maximum-probability segmentation by Viterbi search, training
//! runs EM over the segmentation lattice (see [`train`]), and decoding
//! losslessly restores the original text via the whitespace meta symbol.

mod trainer;

pub use trainer::{em_iteration, prune, seed_vocab, train, TrainerConfig};

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::trie::Trie;

/// Character substituted for whitespace so detokenization is lossless.
pub const META_SYMBOL: char = '\u{2581}'; // ▁

/// Replaces every whitespace run with one `meta_symbol` and prepends one
/// `meta_symbol` when the text is non-empty.
pub fn normalize(text: &str, meta_symbol: char) -> String {
    if text.is_empty() {
        return String::new();
    }
    let mut out = String::with_capacity(text.len() + meta_symbol.len_utf8());
    out.push(meta_symbol);
    let mut in_whitespace = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            in_whitespace = true;
        } else {
            if in_whitespace {
                out.push(meta_symbol);
                in_whitespace = false;
            }
            out.push(ch);
        }
    }
    if in_whitespace {
        out.push(meta_symbol);
    }
    out
}

/// Inverse of [`normalize`]: concatenates pieces, maps the meta symbol
/// back to a space, and strips the single leading space the meta prefix
/// produces.
pub fn decode<S: AsRef<str>>(pieces: &[S], meta_symbol: char) -> String {
    let replaced: String = pieces
        .iter()
        .flat_map(|p| p.as_ref().chars())
        .map(|c| if c == meta_symbol { ' ' } else { c })
        .collect();
    match replaced.strip_prefix(' ') {
        Some(rest) => rest.to_string(),
        None => replaced,
    }
}

/// Subword pieces with natural-log probabilities.
///
/// Invariants: piece probabilities exponentiate and sum to 1 (within
/// 1e-6), every log-probability is finite and non-positive, and after
/// training every character of the training corpus is itself a piece.
#[derive(Debug, Clone)]
pub struct SubwordVocab {
    pieces: Vec<(String, f64)>,
    trie: Trie<usize>,
    meta_symbol: Option<char>,
    vocab_size: usize,
}

impl SubwordVocab {
    /// Builds a vocabulary from `(piece, log_probability)` pairs.
    ///
    /// `meta_symbol` of `None` disables whitespace handling: encode works
    /// on the raw text. Used by toy setups and tests; models trained via
    /// [`train`] carry `Some` unless configured otherwise.
    pub fn from_log_probs(
        pieces: Vec<(String, f64)>,
        meta_symbol: Option<char>,
        vocab_size: usize,
    ) -> Result<SubwordVocab> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument("vocabulary has no pieces".into()));
        }
        let mut trie = Trie::new();
        let mut prob_sum = 0.0;
        for (piece, log_prob) in &pieces {
            if piece.is_empty() {
                return Err(Error::InvalidArgument("empty piece".into()));
            }
            if !log_prob.is_finite() || *log_prob > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "piece {piece:?} has invalid log-probability {log_prob}"
                )));
            }
            prob_sum += log_prob.exp();
        }
        if (prob_sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "piece probabilities sum to {prob_sum}, expected 1"
            )));
        }
        for (i, (piece, _)) in pieces.iter().enumerate() {
            if trie.insert(piece, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate piece {piece:?}")));
            }
        }
        Ok(SubwordVocab {
            pieces,
            trie,
            meta_symbol,
            vocab_size,
        })
    }

    /// Convenience constructor from plain probabilities.
    pub fn from_probs(pieces: &[(&str, f64)], meta_symbol: Option<char>) -> Result<SubwordVocab> {
        let pairs = pieces
            .iter()
            .map(|(p, prob)| (p.to_string(), prob.ln()))
            .collect::<Vec<_>>();
        let n = pairs.len();
        SubwordVocab::from_log_probs(pairs, meta_symbol, n)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn meta_symbol(&self) -> Option<char> {
        self.meta_symbol
    }

    /// Target size requested at training time (not the piece count).
    pub fn target_vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&str, f64)> {
        self.pieces.iter().map(|(p, lp)| (p.as_str(), *lp))
    }

    pub fn log_prob(&self, piece: &str) -> Option<f64> {
        self.trie.get(piece).map(|&i| self.pieces[i].1)
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.trie.get(piece).is_some()
    }

    pub(crate) fn piece_at(&self, id: usize) -> (&str, f64) {
        let (p, lp) = &self.pieces[id];
        (p.as_str(), *lp)
    }

    pub(crate) fn matches_at<'a>(
        &'a self,
        chars: &'a [char],
        start: usize,
    ) -> impl Iterator<Item = (usize, usize)> + 'a {
        self.trie
            .common_prefix_search(chars, start)
            .map(|(len, &id)| (len, id))
    }

    pub(crate) fn single_char_id(&self, ch: char) -> Option<usize> {
        let mut buf = [0u8; 4];
        self.trie.get(ch.encode_utf8(&mut buf)).copied()
    }

    /// Normalizes `text` (when a meta symbol is set) and returns the
    /// maximum-probability segmentation. Ties break toward fewer pieces,
    /// then longest-first spans.
    pub fn encode(&self, text: &str) -> Result<Vec<String>> {
        match self.meta_symbol {
            Some(meta) => self.encode_normalized(&normalize(text, meta)),
            None => self.encode_normalized(text),
        }
    }

    /// Viterbi segmentation of already-normalized text.
    pub fn encode_normalized(&self, text: &str) -> Result<Vec<String>> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        for (offset, &ch) in chars.iter().enumerate() {
            if self.single_char_id(ch).is_none() {
                return Err(Error::Unencodable { ch, offset });
            }
        }

        // Best suffix starting at each position: maximize score, then
        // fewer pieces, then a longer first span.
        let mut best_score = vec![f64::NEG_INFINITY; n + 1];
        let mut best_count = vec![u32::MAX; n + 1];
        let mut best_step: Vec<usize> = vec![0; n + 1]; // span length taken at i
        best_score[n] = 0.0;
        best_count[n] = 0;
        for i in (0..n).rev() {
            for (len, id) in self.matches_at(&chars, i) {
                let j = i + len;
                if best_count[j] == u32::MAX {
                    continue;
                }
                let score = self.pieces[id].1 + best_score[j];
                let count = 1 + best_count[j];
                let replace = score > best_score[i]
                    || (score == best_score[i]
                        && (count < best_count[i]
                            || (count == best_count[i] && len > best_step[i])));
                if replace {
                    best_score[i] = score;
                    best_count[i] = count;
                    best_step[i] = len;
                }
            }
        }
        debug_assert!(best_count[0] != u32::MAX, "single chars guarantee a path");

        let mut out = Vec::with_capacity(best_count[0] as usize);
        let mut pos = 0;
        while pos < n {
            let len = best_step[pos];
            out.push(chars[pos..pos + len].iter().collect());
            pos += len;
        }
        Ok(out)
    }

    /// Viterbi score of the best segmentation of `chars`; when
    /// `exclude_full` is set, the single piece spanning all of `chars`
    /// may not be used. Returns `NEG_INFINITY` when no path exists.
    pub(crate) fn best_segmentation_score(&self, chars: &[char], exclude_full: bool) -> f64 {
        let n = chars.len();
        let mut best = vec![f64::NEG_INFINITY; n + 1];
        best[n] = 0.0;
        for i in (0..n).rev() {
            for (len, id) in self.matches_at(chars, i) {
                if exclude_full && i == 0 && len == n {
                    continue;
                }
                let score = self.pieces[id].1 + best[i + len];
                if score > best[i] {
                    best[i] = score;
                }
            }
        }
        best[0]
    }

    /// Decodes with this vocabulary's meta symbol (plain concatenation
    /// when whitespace handling is disabled).
    pub fn decode_pieces<S: AsRef<str>>(&self, pieces: &[S]) -> String {
        match self.meta_symbol {
            Some(meta) => decode(pieces, meta),
            None => pieces.iter().map(|p| p.as_ref()).collect(),
        }
    }

    /// Writes the model TSV: a `#unigram v1` header, then
    /// `piece<TAB>log_prob` rows sorted by descending log-probability
    /// (ties by piece string), log-probabilities with 17 significant
    /// digits so the file round-trips bit-exactly.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let meta = match self.meta_symbol {
            Some(m) => m.to_string(),
            None => "none".to_string(),
        };
        writeln!(out, "#unigram v1 meta={meta} vocab_size={}", self.vocab_size)?;
        let mut rows: Vec<(&str, f64)> = self.pieces().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (piece, log_prob) in rows {
            writeln!(out, "{piece}\t{log_prob:.16e}")?;
        }
        Ok(())
    }

    /// Reads the TSV format written by [`SubwordVocab::write_tsv`].
    pub fn read_tsv<R: Read>(input: R) -> Result<SubwordVocab> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::ModelFormat("empty model file".into()))?;
        let mut meta_symbol = None;
        let mut vocab_size = None;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("#unigram") || fields.next() != Some("v1") {
            return Err(Error::ModelFormat(format!(
                "bad header {header:?}, expected `#unigram v1 ...`"
            )));
        }
        for field in fields {
            if let Some(value) = field.strip_prefix("meta=") {
                meta_symbol = match value {
                    "none" => None,
                    v => {
                        let mut chars = v.chars();
                        let ch = chars.next().ok_or_else(|| {
                            Error::ModelFormat("empty meta symbol".into())
                        })?;
                        if chars.next().is_some() {
                            return Err(Error::ModelFormat(format!(
                                "meta symbol {v:?} is not a single character"
                            )));
                        }
                        Some(ch)
                    }
                };
            } else if let Some(value) = field.strip_prefix("vocab_size=") {
                vocab_size = Some(value.parse::<usize>().map_err(|_| {
                    Error::ModelFormat(format!("bad vocab_size {value:?}"))
                })?);
            }
        }
        let vocab_size =
            vocab_size.ok_or_else(|| Error::ModelFormat("header missing vocab_size".into()))?;
        let mut pieces = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (piece, lp) = line.split_once('\t').ok_or_else(|| {
                Error::ModelFormat(format!("line {}: expected `piece<TAB>log_prob`", i + 2))
            })?;
            let log_prob: f64 = lp.parse().map_err(|_| {
                Error::ModelFormat(format!("line {}: bad log_prob {lp:?}", i + 2))
            })?;
            pieces.push((piece.to_string(), log_prob));
        }
        SubwordVocab::from_log_probs(pieces, meta_symbol, vocab_size)
            .map_err(|e| Error::ModelFormat(e.to_string()))
    }

    /// Σ exp(log_prob); 1 within 1e-6 for a valid vocabulary.
    pub fn probability_sum(&self) -> f64 {
        self.pieces.iter().map(|(_, lp)| lp.exp()).sum()
    }
}

/// Expected piece counts and sentence coverage checks shared by the EM
/// trainer; kept here so the lattice walk sits next to the Viterbi code.
pub(crate) fn sentence_lattice_pass(
    vocab: &SubwordVocab,
    sentence: &str,
    counts: &mut [f64],
) -> Result<f64> {
    let chars: Vec<char> = sentence.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Ok(0.0);
    }
    for (offset, &ch) in chars.iter().enumerate() {
        if vocab.single_char_id(ch).is_none() {
            return Err(Error::Unencodable { ch, offset });
        }
    }
    // nodes grouped by start
    let mut starts: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n);
    for i in 0..n {
        starts.push(vocab.matches_at(&chars, i).collect());
    }

    let mut alpha = vec![f64::NEG_INFINITY; n + 1];
    alpha[0] = 0.0;
    for i in 0..n {
        if alpha[i] == f64::NEG_INFINITY {
            continue;
        }
        for &(len, id) in &starts[i] {
            let j = i + len;
            alpha[j] = log_add_exp(alpha[j], alpha[i] + vocab.pieces[id].1);
        }
    }
    let z = alpha[n];
    debug_assert!(z.is_finite());

    let mut beta = vec![f64::NEG_INFINITY; n + 1];
    beta[n] = 0.0;
    for i in (0..n).rev() {
        for &(len, id) in &starts[i] {
            let j = i + len;
            beta[i] = log_add_exp(beta[i], vocab.pieces[id].1 + beta[j]);
        }
    }

    for i in 0..n {
        if alpha[i] == f64::NEG_INFINITY {
            continue;
        }
        for &(len, id) in &starts[i] {
            let j = i + len;
            if beta[j] == f64::NEG_INFINITY {
                continue;
            }
            counts[id] += (alpha[i] + vocab.pieces[id].1 + beta[j] - z).exp();
        }
    }
    Ok(z)
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_prepends_meta_and_collapses_whitespace() {
        assert_eq!(normalize("かわいいです", META_SYMBOL), "▁かわいいです");
        assert_eq!(normalize("", META_SYMBOL), "");
        assert_eq!(normalize("a b", META_SYMBOL), "▁a▁b");
        assert_eq!(normalize("a \t b", META_SYMBOL), "▁a▁b");
        assert_eq!(normalize("a ", META_SYMBOL), "▁a▁");
    }

    #[test]
    fn decode_inverts_normalize() {
        assert_eq!(decode(&["▁かわいいです"], META_SYMBOL), "かわいいです");
        assert_eq!(decode(&[] as &[&str], META_SYMBOL), "");
        assert_eq!(decode(&["▁a", "▁b"], META_SYMBOL), "a b");
        let s = "自転車 通勤用に購入";
        let normalized = normalize(s, META_SYMBOL);
        assert_eq!(decode(&[normalized.as_str()], META_SYMBOL), s);
    }

    #[test]
    fn toy_encode_picks_max_probability_segmentation() {
        let vocab = SubwordVocab::from_probs(
            &[("ab", 0.4), ("a", 0.2), ("b", 0.2), ("c", 0.2)],
            None,
        )
        .unwrap();
        // ln 0.4 + ln 0.2 ≈ -2.526 beats all alternatives
        assert_eq!(vocab.encode("abc").unwrap(), ["ab", "c"]);
        assert_eq!(vocab.encode("ab").unwrap(), ["ab"]); // ln 0.4 > 2 ln 0.2
        assert_eq!(vocab.encode("").unwrap(), Vec::<String>::new());
    }

    #[test]
    fn encode_reports_unencodable_character_and_offset() {
        let vocab =
            SubwordVocab::from_probs(&[("a", 0.5), ("b", 0.5)], None).unwrap();
        match vocab.encode("abx").unwrap_err() {
            Error::Unencodable { ch, offset } => {
                assert_eq!(ch, 'x');
                assert_eq!(offset, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn encode_tie_breaks_fewer_pieces_then_longest_first() {
        // p(ab)·p(c) == p(a)·p(bc) == 0.04; both have 2 pieces; the first
        // span 2 beats first span 1.
        let vocab = SubwordVocab::from_probs(
            &[("ab", 0.2), ("bc", 0.2), ("a", 0.2), ("b", 0.2), ("c", 0.2)],
            None,
        )
        .unwrap();
        assert_eq!(vocab.encode("abc").unwrap(), ["ab", "c"]);
    }

    #[test]
    fn vocab_rejects_bad_inputs() {
        assert!(SubwordVocab::from_probs(&[], None).is_err());
        assert!(SubwordVocab::from_probs(&[("a", 0.5), ("a", 0.5)], None).is_err());
        assert!(SubwordVocab::from_probs(&[("a", 0.9)], None).is_err()); // sum != 1
        assert!(
            SubwordVocab::from_log_probs(vec![("a".into(), f64::NAN)], None, 1).is_err()
        );
        assert!(
            SubwordVocab::from_log_probs(vec![("a".into(), 0.5)], None, 1).is_err()
        );
    }

    #[test]
    fn zero_log_prob_single_piece_is_valid() {
        let vocab =
            SubwordVocab::from_log_probs(vec![("x".into(), 0.0)], None, 1).unwrap();
        assert_eq!(vocab.encode("xx").unwrap(), ["x", "x"]);
    }

    #[test]
    fn tsv_round_trip_is_bit_exact() {
        let vocab = SubwordVocab::from_probs(
            &[("ab", 0.4), ("a", 0.2), ("b", 0.2), ("c", 0.2)],
            Some(META_SYMBOL),
        )
        .unwrap();
        let mut buf = Vec::new();
        vocab.write_tsv(&mut buf).unwrap();
        let loaded = SubwordVocab::read_tsv(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        loaded.write_tsv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(loaded.meta_symbol(), Some(META_SYMBOL));
        for (piece, lp) in vocab.pieces() {
            assert_eq!(loaded.log_prob(piece), Some(lp), "exact bits for {piece:?}");
        }
    }

    #[test]
    fn tsv_rows_sorted_by_descending_log_prob_then_piece() {
        let vocab = SubwordVocab::from_probs(
            &[("b", 0.25), ("a", 0.25), ("ab", 0.5)],
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        vocab.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "#unigram v1 meta=none vocab_size=3");
        assert!(lines[1].starts_with("ab\t"));
        assert!(lines[2].starts_with("a\t"));
        assert!(lines[3].starts_with("b\t"));
    }

    #[test]
    fn read_rejects_corrupt_models() {
        assert!(SubwordVocab::read_tsv(&b""[..]).is_err());
        assert!(SubwordVocab::read_tsv(&b"#wrong v1 meta=none vocab_size=1\na\t0.0\n"[..]).is_err());
        assert!(
            SubwordVocab::read_tsv(&b"#unigram v1 meta=none vocab_size=1\na\tnotanumber\n"[..])
                .is_err()
        );
        // probabilities must sum to one
        assert!(SubwordVocab::read_tsv(
            &b"#unigram v1 meta=none vocab_size=2\na\t-3.0\nb\t-3.0\n"[..]
        )
        .is_err());
    }
}
