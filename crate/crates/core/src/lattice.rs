//! Dictionary-driven word segmentation.
//!
//! A [`Lattice`] holds every dictionary match over the input plus
//! single-character unknown nodes, so each segmentation of the text into
//! dictionary entries and unknown single characters is a BOS→EOS path.
//! [`segment_min_cost`] selects the cheapest path; ties go to the path
//! with fewer tokens, then to the one whose span lengths, read left to
//! right, are lexicographically longest-first.
//!
//! Costs are per-entry unigram costs. Transition costs between adjacent
//! nodes default to zero; [`Lattice::min_cost_path_with_edge_cost`] takes
//! a hook for callers that want them.

use std::io::{BufRead, BufReader, Read};

use crate::error::{Error, Result};
use crate::trie::Trie;

pub const DEFAULT_UNKNOWN_CHAR_COST: i32 = 10_000;

/// Surface string with its segmentation cost; lower cost is preferred.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub surface: String,
    pub cost: i32,
}

/// Set of surface entries indexed for common-prefix lookup, plus the cost
/// charged to a single character not covered by any entry.
#[derive(Debug, Clone)]
pub struct LexDictionary {
    trie: Trie<i32>,
    unknown_char_cost: i32,
}

impl LexDictionary {
    /// Builds a dictionary from entries, rejecting duplicate surfaces and
    /// empty surfaces.
    pub fn new<I>(entries: I, unknown_char_cost: i32) -> Result<LexDictionary>
    where
        I: IntoIterator<Item = DictionaryEntry>,
    {
        let mut trie = Trie::new();
        for (i, entry) in entries.into_iter().enumerate() {
            let line = i as u64 + 1;
            if entry.surface.is_empty() {
                return Err(Error::DictionaryParse {
                    line,
                    message: "empty surface".to_string(),
                });
            }
            if trie.insert(&entry.surface, entry.cost).is_some() {
                return Err(Error::DuplicateEntry {
                    surface: entry.surface,
                    line,
                });
            }
        }
        Ok(LexDictionary {
            trie,
            unknown_char_cost,
        })
    }

    pub fn len(&self) -> usize {
        self.trie.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trie.is_empty()
    }

    pub fn unknown_char_cost(&self) -> i32 {
        self.unknown_char_cost
    }

    pub fn cost_of(&self, surface: &str) -> Option<i32> {
        self.trie.get(surface).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.trie.get(surface).is_some()
    }
}

/// Loads the TSV dictionary format: `surface<TAB>cost` per line, comment
/// lines starting with `#` ignored, optional `__UNKNOWN__<TAB>cost` line
/// setting the unknown-character cost (default 10000).
pub fn load_dictionary<R: Read>(input: R) -> Result<LexDictionary> {
    let reader = BufReader::new(input);
    let mut trie = Trie::new();
    let mut unknown_char_cost = DEFAULT_UNKNOWN_CHAR_COST;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (surface, cost_str) = line.split_once('\t').ok_or_else(|| Error::DictionaryParse {
            line: line_no,
            message: "expected `surface<TAB>cost`".to_string(),
        })?;
        let cost: i32 = cost_str.trim().parse().map_err(|_| Error::DictionaryParse {
            line: line_no,
            message: format!("non-integer cost {cost_str:?}"),
        })?;
        if surface == "__UNKNOWN__" {
            unknown_char_cost = cost;
            continue;
        }
        if surface.is_empty() {
            return Err(Error::DictionaryParse {
                line: line_no,
                message: "empty surface".to_string(),
            });
        }
        if trie.insert(surface, cost).is_some() {
            return Err(Error::DuplicateEntry {
                surface: surface.to_string(),
                line: line_no,
            });
        }
    }
    Ok(LexDictionary {
        trie,
        unknown_char_cost,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenSource {
    Dictionary,
    Unknown,
}

/// One segmented token; `span` is in character offsets and `surface`
/// equals the input substring at that span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub span: (usize, usize),
    pub source: TokenSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Bos,
    Eos,
    Dictionary,
    Unknown,
}

/// Candidate token: a span of the input with its cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeNode {
    pub start: usize,
    pub end: usize,
    pub cost: i32,
    pub kind: NodeKind,
}

impl LatticeNode {
    fn span_len(&self) -> usize {
        self.end - self.start
    }
}

/// Per-position segmentation graph over one input string.
#[derive(Debug, Clone)]
pub struct Lattice {
    chars: Vec<char>,
    /// Nodes grouped by start position; every position has at least one.
    starts: Vec<Vec<LatticeNode>>,
    bos: LatticeNode,
    eos: LatticeNode,
}

impl Lattice {
    /// Adds every dictionary match starting at each position, plus an
    /// unknown single-character node wherever the dictionary has no
    /// single-character entry for that character. This guarantees every
    /// position is covered, so a BOS→EOS path always exists.
    pub fn build(text: &str, dict: &LexDictionary) -> Lattice {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        let mut starts: Vec<Vec<LatticeNode>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut nodes = Vec::new();
            let mut has_single = false;
            for (len, &cost) in dict.trie.common_prefix_search(&chars, i) {
                if len == 1 {
                    has_single = true;
                }
                nodes.push(LatticeNode {
                    start: i,
                    end: i + len,
                    cost,
                    kind: NodeKind::Dictionary,
                });
            }
            if !has_single {
                nodes.push(LatticeNode {
                    start: i,
                    end: i + 1,
                    cost: dict.unknown_char_cost,
                    kind: NodeKind::Unknown,
                });
            }
            starts.push(nodes);
        }
        Lattice {
            chars,
            starts,
            bos: LatticeNode {
                start: 0,
                end: 0,
                cost: 0,
                kind: NodeKind::Bos,
            },
            eos: LatticeNode {
                start: n,
                end: n,
                cost: 0,
                kind: NodeKind::Eos,
            },
        }
    }

    pub fn len_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn nodes_starting_at(&self, pos: usize) -> &[LatticeNode] {
        &self.starts[pos]
    }

    pub fn bos(&self) -> &LatticeNode {
        &self.bos
    }

    pub fn eos(&self) -> &LatticeNode {
        &self.eos
    }

    /// Minimum-cost path with zero transition costs.
    pub fn min_cost_path(&self) -> (Vec<Token>, i64) {
        self.min_cost_path_with_edge_cost(|_, _| 0)
    }

    /// Minimum-cost path where `edge_cost(prev, next)` is added for every
    /// traversed edge, including the BOS→first and last→EOS edges.
    ///
    /// Tie-breaking among equal-cost paths: fewer tokens first, then the
    /// lexicographically earliest sequence of span lengths read left to
    /// right with longer spans ordered first.
    pub fn min_cost_path_with_edge_cost<F>(&self, edge_cost: F) -> (Vec<Token>, i64)
    where
        F: Fn(&LatticeNode, &LatticeNode) -> i64,
    {
        let n = self.chars.len();
        if n == 0 {
            return (Vec::new(), 0);
        }

        // Flatten nodes and remember where each position's nodes live.
        let mut flat: Vec<LatticeNode> = Vec::new();
        let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(n);
        for nodes in &self.starts {
            let lo = flat.len();
            flat.extend_from_slice(nodes);
            ranges.push((lo, flat.len()));
        }

        // Best suffix path starting with each node, computed right to left.
        let mut best_cost = vec![0i64; flat.len()];
        let mut best_count = vec![0u32; flat.len()];
        let mut best_next: Vec<Option<usize>> = vec![None; flat.len()];

        for pos in (0..n).rev() {
            let (lo, hi) = ranges[pos];
            for id in lo..hi {
                let node = flat[id];
                if node.end == n {
                    best_cost[id] = node.cost as i64 + edge_cost(&node, &self.eos);
                    best_count[id] = 1;
                    best_next[id] = None;
                    continue;
                }
                let (nlo, nhi) = ranges[node.end];
                let mut chosen: Option<usize> = None;
                let mut chosen_key = (i64::MAX, u32::MAX, 0usize);
                for next_id in nlo..nhi {
                    let next = flat[next_id];
                    let cost = node.cost as i64 + edge_cost(&node, &next) + best_cost[next_id];
                    let key = (cost, 1 + best_count[next_id], next.span_len());
                    if better(key, chosen_key) {
                        chosen_key = key;
                        chosen = Some(next_id);
                    }
                }
                let next_id = chosen.expect("every position is covered");
                best_cost[id] = chosen_key.0;
                best_count[id] = chosen_key.1;
                best_next[id] = Some(next_id);
            }
        }

        // BOS picks the best node starting at position 0.
        let (lo, hi) = ranges[0];
        let mut first: Option<usize> = None;
        let mut first_key = (i64::MAX, u32::MAX, 0usize);
        for id in lo..hi {
            let node = flat[id];
            let cost = edge_cost(&self.bos, &node) + best_cost[id];
            let key = (cost, best_count[id], node.span_len());
            if better(key, first_key) {
                first_key = key;
                first = Some(id);
            }
        }

        let mut tokens = Vec::with_capacity(first_key.1 as usize);
        let mut cur = first;
        while let Some(id) = cur {
            let node = flat[id];
            tokens.push(Token {
                surface: self.chars[node.start..node.end].iter().collect(),
                span: (node.start, node.end),
                source: match node.kind {
                    NodeKind::Unknown => TokenSource::Unknown,
                    _ => TokenSource::Dictionary,
                },
            });
            cur = best_next[id];
        }
        (tokens, first_key.0)
    }
}

/// Candidate ordering: lower cost, then fewer tokens, then longer next
/// span. Spans are unique per position, so this is a total order among
/// candidates.
fn better(a: (i64, u32, usize), b: (i64, u32, usize)) -> bool {
    (a.0, a.1, std::cmp::Reverse(a.2)) < (b.0, b.1, std::cmp::Reverse(b.2))
}

/// Returns the cheapest segmentation of `text` and its total cost.
pub fn segment_min_cost(text: &str, dict: &LexDictionary) -> (Vec<Token>, i64) {
    Lattice::build(text, dict).min_cost_path()
}

/// Token surfaces of [`segment_min_cost`], in order; concatenating them
/// reproduces the input.
pub fn tokenize(text: &str, dict: &LexDictionary) -> Vec<String> {
    segment_min_cost(text, dict)
        .0
        .into_iter()
        .map(|t| t.surface)
        .collect()
}
