//! EM training for the unigram subword model.
//!
//! Training seeds a large candidate vocabulary from corpus substrings,
//! then alternates EM refinement with likelihood-guided pruning until the
//! vocabulary fits the target size. Every step is deterministic: a given
//! corpus and configuration always produce a byte-identical model file.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::subword::{normalize, sentence_lattice_pass, SubwordVocab, META_SYMBOL};

/// Fixed chunk size for the parallel E-step. Partial sums are merged in
/// chunk order, so results do not depend on the thread count.
const E_STEP_CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    /// Target vocabulary size (counting single-character pieces).
    pub vocab_size: usize,
    /// Longest candidate piece considered at seeding, in characters.
    pub max_piece_len: usize,
    /// Seed candidate cap; `None` means 20 × `vocab_size`.
    pub seed_size: Option<usize>,
    /// Fraction of the vocabulary kept by each pruning round, in (0, 1).
    pub shrink_factor: f64,
    /// EM iterations between pruning rounds.
    pub em_iters_per_round: usize,
    /// Training sentences longer than this many characters are split.
    pub max_sentence_len: usize,
    /// Whitespace meta symbol; `None` trains on raw text.
    pub meta_symbol: Option<char>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            vocab_size: 2000,
            max_piece_len: 8,
            seed_size: None,
            shrink_factor: 0.75,
            em_iters_per_round: 2,
            max_sentence_len: 4096,
            meta_symbol: Some(META_SYMBOL),
        }
    }
}

impl TrainerConfig {
    pub fn with_vocab_size(vocab_size: usize) -> Self {
        TrainerConfig {
            vocab_size,
            ..TrainerConfig::default()
        }
    }

    fn effective_seed_size(&self) -> usize {
        self.seed_size.unwrap_or(20 * self.vocab_size)
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::InvalidArgument("vocab_size must be positive".into()));
        }
        if self.max_piece_len == 0 {
            return Err(Error::InvalidArgument(
                "max_piece_len must be positive".into(),
            ));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "shrink_factor must be in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        if self.em_iters_per_round == 0 {
            return Err(Error::InvalidArgument(
                "em_iters_per_round must be positive".into(),
            ));
        }
        if self.max_sentence_len == 0 {
            return Err(Error::InvalidArgument(
                "max_sentence_len must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the seed vocabulary: every substring of up to `max_piece_len`
/// characters plus every single character, capped at the seed size by
/// count × length score (single characters are always kept). Initial
/// probabilities are proportional to occurrence counts.
pub fn seed_vocab(corpus: &[String], config: &TrainerConfig) -> Result<SubwordVocab> {
    config.validate()?;
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total_chars = 0usize;
    for sentence in corpus {
        let chars: Vec<char> = sentence.chars().collect();
        total_chars += chars.len();
        for i in 0..chars.len() {
            let max_len = config.max_piece_len.min(chars.len() - i);
            let mut piece = String::new();
            for len in 1..=max_len {
                piece.push(chars[i + len - 1]);
                *counts.entry(piece.clone()).or_insert(0) += 1;
            }
        }
    }
    if total_chars == 0 {
        return Err(Error::EmptyCorpus);
    }

    let mut singles: Vec<(String, u64)> = Vec::new();
    let mut multis: Vec<(String, u64)> = Vec::new();
    for (piece, count) in counts {
        if piece.chars().nth(1).is_none() {
            singles.push((piece, count));
        } else {
            multis.push((piece, count));
        }
    }
    let seed_size = config.effective_seed_size();
    if singles.len() + multis.len() > seed_size {
        // score = count × piece length; keep the best multis that fit
        multis.sort_by(|a, b| {
            let score_a = a.1 * a.0.chars().count() as u64;
            let score_b = b.1 * b.0.chars().count() as u64;
            score_b.cmp(&score_a).then_with(|| a.0.cmp(&b.0))
        });
        multis.truncate(seed_size.saturating_sub(singles.len()));
    }

    let mut pieces: Vec<(String, u64)> = singles;
    pieces.append(&mut multis);
    pieces.sort_by(|a, b| a.0.cmp(&b.0));
    let total: u64 = pieces.iter().map(|(_, c)| c).sum();
    let log_total = (total as f64).ln();
    let pairs: Vec<(String, f64)> = pieces
        .into_iter()
        .map(|(piece, count)| (piece, (count as f64).ln() - log_total))
        .collect();
    SubwordVocab::from_log_probs(pairs, config.meta_symbol, config.vocab_size)
}

/// Expected piece counts over the corpus and the total marginal
/// log-likelihood Σ_sentences log Σ_segmentations Π p(piece), both under
/// the current vocabulary.
fn expected_counts(corpus: &[String], vocab: &SubwordVocab) -> Result<(Vec<f64>, f64)> {
    let partials: Vec<Result<(Vec<f64>, f64)>> = corpus
        .par_chunks(E_STEP_CHUNK)
        .map(|chunk| {
            let mut counts = vec![0.0; vocab.len()];
            let mut log_likelihood = 0.0;
            for sentence in chunk {
                log_likelihood += sentence_lattice_pass(vocab, sentence, &mut counts)?;
            }
            Ok((counts, log_likelihood))
        })
        .collect();

    let mut counts = vec![0.0; vocab.len()];
    let mut log_likelihood = 0.0;
    for partial in partials {
        let (chunk_counts, chunk_ll) = partial?;
        for (acc, c) in counts.iter_mut().zip(chunk_counts) {
            *acc += c;
        }
        log_likelihood += chunk_ll;
    }
    Ok((counts, log_likelihood))
}

/// One EM iteration: the E-step computes expected piece counts by
/// forward–backward over each sentence's segmentation lattice; the M-step
/// re-estimates probabilities as normalized expected counts. Returns the
/// new vocabulary and the corpus log-likelihood under the *input*
/// vocabulary.
pub fn em_iteration(corpus: &[String], vocab: &SubwordVocab) -> Result<(SubwordVocab, f64)> {
    let (counts, log_likelihood) = expected_counts(corpus, vocab)?;

    // Multi-character pieces that no segmentation used are dropped;
    // single characters are kept (encodability) with a floor count.
    let mut raw: Vec<(String, f64)> = Vec::with_capacity(vocab.len());
    for (id, (piece, _)) in vocab.pieces().enumerate() {
        let count = counts[id];
        let single = piece.chars().nth(1).is_none();
        if count > 0.0 {
            raw.push((piece.to_string(), count.ln()));
        } else if single {
            raw.push((piece.to_string(), f64::MIN_POSITIVE.ln()));
        }
    }
    let log_total = raw
        .iter()
        .map(|(_, lc)| *lc)
        .fold(f64::NEG_INFINITY, crate::subword::log_add_exp);
    let pairs: Vec<(String, f64)> = raw
        .into_iter()
        .map(|(piece, lc)| (piece, (lc - log_total).min(0.0)))
        .collect();
    let new_vocab =
        SubwordVocab::from_log_probs(pairs, vocab.meta_symbol(), vocab.target_vocab_size())?;
    Ok((new_vocab, log_likelihood))
}

/// Removes the `ceil((1 − shrink_factor) · |vocab|)` multi-character
/// pieces whose removal costs the corpus likelihood least, then
/// renormalizes. Single-character pieces and pieces in `protected` are
/// never removed. The removal loss of a piece is its expected count times
/// the gap between its own log-probability and its best alternative
/// segmentation.
pub fn prune(
    corpus: &[String],
    vocab: &SubwordVocab,
    shrink_factor: f64,
    protected: &HashSet<String>,
) -> Result<SubwordVocab> {
    if !(shrink_factor > 0.0 && shrink_factor < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink_factor must be in (0, 1), got {shrink_factor}"
        )));
    }
    let (counts, _) = expected_counts(corpus, vocab)?;
    let n_remove = ((1.0 - shrink_factor) * vocab.len() as f64).ceil() as usize;

    let mut candidates: Vec<(usize, f64)> = Vec::new(); // (id, loss)
    for (id, (piece, log_prob)) in vocab.pieces().enumerate() {
        if piece.chars().nth(1).is_none() || protected.contains(piece) {
            continue;
        }
        let chars: Vec<char> = piece.chars().collect();
        let alternative = vocab.best_segmentation_score(&chars, true);
        let loss = counts[id] * (log_prob - alternative);
        candidates.push((id, loss));
    }
    candidates.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| vocab.piece_at(a.0).0.cmp(vocab.piece_at(b.0).0))
    });
    let removed: HashSet<usize> = candidates
        .iter()
        .take(n_remove)
        .map(|&(id, _)| id)
        .collect();

    let kept: Vec<(String, f64)> = vocab
        .pieces()
        .enumerate()
        .filter(|(id, _)| !removed.contains(id))
        .map(|(_, (piece, lp))| (piece.to_string(), lp))
        .collect();
    let log_total = kept
        .iter()
        .map(|(_, lp)| *lp)
        .fold(f64::NEG_INFINITY, crate::subword::log_add_exp);
    let pairs: Vec<(String, f64)> = kept
        .into_iter()
        .map(|(piece, lp)| (piece, (lp - log_total).min(0.0)))
        .collect();
    SubwordVocab::from_log_probs(pairs, vocab.meta_symbol(), vocab.target_vocab_size())
}

/// Trains a subword vocabulary: normalize → seed → (EM × n, prune) until
/// the vocabulary is within the target size, with a final EM round after
/// the last prune.
pub fn train(corpus: &[String], config: &TrainerConfig) -> Result<SubwordVocab> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut sentences: Vec<String> = Vec::with_capacity(corpus.len());
    for text in corpus {
        let normalized = match config.meta_symbol {
            Some(meta) => normalize(text, meta),
            None => text.clone(),
        };
        if normalized.is_empty() {
            continue;
        }
        let chars: Vec<char> = normalized.chars().collect();
        if chars.len() <= config.max_sentence_len {
            sentences.push(normalized);
        } else {
            for chunk in chars.chunks(config.max_sentence_len) {
                sentences.push(chunk.iter().collect());
            }
        }
    }

    let alphabet: HashSet<char> = sentences.iter().flat_map(|s| s.chars()).collect();
    if alphabet.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.vocab_size < alphabet.len() {
        return Err(Error::InvalidArgument(format!(
            "vocab_size {} is smaller than the corpus alphabet ({} characters)",
            config.vocab_size,
            alphabet.len()
        )));
    }

    let mut vocab = seed_vocab(&sentences, config)?;
    let protected = HashSet::new();
    loop {
        for _ in 0..config.em_iters_per_round {
            let (next, _) = em_iteration(&sentences, &vocab)?;
            vocab = next;
        }
        if vocab.len() <= config.vocab_size {
            break;
        }
        vocab = prune(&sentences, &vocab, config.shrink_factor, &protected)?;
    }
    Ok(vocab)
}
