//! TF-IDF vectorization over tokenized documents.
//!
//! The weighting is fixed: smoothed idf `ln((1+N)/(1+df)) + 1`, raw term
//! counts, L2-normalized rows. Tokens pass straight through from the
//! tokenizer — no lowercasing, stop words, or frequency cutoffs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::tokenizer::Tokenizer;

/// Token → column mapping with document frequencies. Columns are assigned
/// in ascending lexicographic token order, so the same token set always
/// produces the same indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    lookup: HashMap<String, usize>,
    df: Vec<usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.lookup.get(token).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.as_str())
    }
}

/// Row-sparse matrix: per row, strictly ascending `(column, value)` pairs
/// with no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    row_offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row pair lists; each row must be sorted by column
    /// with no duplicates (debug-asserted).
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>, n_cols: usize) -> SparseMatrix {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                debug_assert!((c as usize) < n_cols && v != 0.0);
                cols.push(c);
                vals.push(v);
            }
            row_offsets.push(cols.len());
        }
        SparseMatrix {
            n_cols,
            row_offsets,
            cols,
            vals,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn row_l2_norm(&self, i: usize) -> f64 {
        let (_, vals) = self.row(i);
        vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> SparseMatrix {
        let rows = indices
            .iter()
            .map(|&i| {
                let (cols, vals) = self.row(i);
                cols.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        SparseMatrix::from_rows(rows, self.n_cols)
    }

    /// Debug export: one line per row of space-separated `col:value`
    /// pairs, values printed with 9 decimal digits.
    pub fn write_debug<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.n_rows() {
            let (cols, vals) = self.row(i);
            let mut first = true;
            for (c, v) in cols.iter().zip(vals) {
                if !first {
                    write!(out, " ")?;
                }
                write!(out, "{c}:{v:.9}")?;
                first = false;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Fitted TF-IDF weights: `idf(t) = ln((1+N)/(1+df(t))) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfidfModel {
    /// Builds the vocabulary and idf weights from tokenized documents.
    pub fn fit(docs: &[Vec<String>]) -> Result<TfidfModel> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot fit TF-IDF on zero documents".into(),
            ));
        }
        let mut df_map: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for token in seen {
                *df_map.entry(token).or_insert(0) += 1;
            }
        }
        let mut terms: Vec<&str> = df_map.keys().copied().collect();
        terms.sort_unstable();
        let n = docs.len();
        let mut df = Vec::with_capacity(terms.len());
        let mut idf = Vec::with_capacity(terms.len());
        let mut lookup = HashMap::with_capacity(terms.len());
        for (i, term) in terms.iter().enumerate() {
            let d = df_map[term];
            df.push(d);
            idf.push(((1 + n) as f64 / (1 + d) as f64).ln() + 1.0);
            lookup.insert(term.to_string(), i);
        }
        Ok(TfidfModel {
            vocabulary: Vocabulary {
                terms: terms.into_iter().map(str::to_string).collect(),
                lookup,
                df,
            },
            idf,
            n_docs: n,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    /// Raw term counts × idf, L2-normalized per row. Tokens outside the
    /// vocabulary are ignored; a document with no known tokens becomes an
    /// all-zero row.
    pub fn transform(&self, docs: &[Vec<String>]) -> SparseMatrix {
        let rows: Vec<Vec<(u32, f64)>> = docs
            .par_iter()
            .map(|doc| self.transform_row(doc))
            .collect();
        SparseMatrix::from_rows(rows, self.n_features())
    }

    fn transform_row(&self, doc: &[String]) -> Vec<(u32, f64)> {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for token in doc {
            if let Some(col) = self.vocabulary.index_of(token) {
                *counts.entry(col).or_insert(0.0) += 1.0;
            }
        }
        let mut row: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(col, count)| (col as u32, count * self.idf[col]))
            .collect();
        row.sort_unstable_by_key(|&(c, _)| c);
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut row {
                *v /= norm;
            }
        }
        row
    }

    /// Model TSV: `#tfidf v1 n_docs=<N>` header, then
    /// `token<TAB>index<TAB>df<TAB>idf` rows. Tabs, newlines, carriage
    /// returns, and backslashes inside tokens are backslash-escaped so
    /// arbitrary tokenizer output stays parseable.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#tfidf v1 n_docs={}", self.n_docs)?;
        for (i, term) in self.vocabulary.terms.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.16e}",
                escape(term),
                i,
                self.vocabulary.df[i],
                self.idf[i]
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(input: R) -> Result<TfidfModel> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::ModelFormat("empty tfidf model".into()))?;
        let n_docs = header
            .strip_prefix("#tfidf v1 n_docs=")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| Error::ModelFormat(format!("bad tfidf header {header:?}")))?;
        let mut rows: Vec<(String, usize, usize, f64)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(Error::ModelFormat(format!(
                    "tfidf line {}: expected 4 fields",
                    i + 2
                )));
            }
            let term = unescape(parts[0])
                .ok_or_else(|| Error::ModelFormat(format!("tfidf line {}: bad escape", i + 2)))?;
            let index: usize = parts[1].parse().map_err(|_| {
                Error::ModelFormat(format!("tfidf line {}: bad index", i + 2))
            })?;
            let df: usize = parts[2].parse().map_err(|_| {
                Error::ModelFormat(format!("tfidf line {}: bad df", i + 2))
            })?;
            let idf: f64 = parts[3].parse().map_err(|_| {
                Error::ModelFormat(format!("tfidf line {}: bad idf", i + 2))
            })?;
            rows.push((term, index, df, idf));
        }
        rows.sort_by_key(|r| r.1);
        let mut terms = Vec::with_capacity(rows.len());
        let mut df = Vec::with_capacity(rows.len());
        let mut idf = Vec::with_capacity(rows.len());
        let mut lookup = HashMap::with_capacity(rows.len());
        for (expect, (term, index, d, w)) in rows.into_iter().enumerate() {
            if index != expect {
                return Err(Error::ModelFormat(format!(
                    "tfidf indices not dense: expected {expect}, found {index}"
                )));
            }
            if lookup.insert(term.clone(), index).is_some() {
                return Err(Error::ModelFormat(format!("duplicate token {term:?}")));
            }
            terms.push(term);
            df.push(d);
            idf.push(w);
        }
        Ok(TfidfModel {
            vocabulary: Vocabulary { terms, lookup, df },
            idf,
            n_docs,
        })
    }
}

fn escape(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for ch in token.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(token: &str) -> Option<String> {
    let mut out = String::with_capacity(token.len());
    let mut chars = token.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Tokenizes the dataset bodies, fits TF-IDF, and transforms the same
/// documents, reporting the wall-clock seconds the three steps took
/// together (monotonic clock).
pub fn fit_transform_timed(
    tokenizer: &dyn Tokenizer,
    data: &Dataset,
) -> Result<(TfidfModel, SparseMatrix, f64)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot vectorize an empty dataset".into(),
        ));
    }
    let start = Instant::now();
    let docs = tokenize_bodies(tokenizer, data)?;
    let model = TfidfModel::fit(&docs)?;
    let matrix = model.transform(&docs);
    let elapsed = start.elapsed().as_secs_f64();
    Ok((model, matrix, elapsed))
}

/// Tokenizes every body in parallel, preserving document order.
pub fn tokenize_bodies(tokenizer: &dyn Tokenizer, data: &Dataset) -> Result<Vec<Vec<String>>> {
    data.records()
        .par_iter()
        .map(|r| tokenizer.tokenize(&r.body))
        .collect()
}
