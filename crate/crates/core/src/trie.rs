//! Character trie with common-prefix search, shared by the dictionary
//! tokenizer and the subword vocabulary.

use std::collections::HashMap;

#[derive(Debug, Clone)]
struct Node<V> {
    children: HashMap<char, u32>,
    value: Option<V>,
}

impl<V> Node<V> {
    fn new() -> Self {
        Node {
            children: HashMap::new(),
            value: None,
        }
    }
}

/// Maps strings to values and answers "which keys start at position `i`
/// of this text" in one walk from the root.
#[derive(Debug, Clone)]
pub struct Trie<V> {
    nodes: Vec<Node<V>>,
    len: usize,
}

impl<V> Default for Trie<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> Trie<V> {
    pub fn new() -> Self {
        Trie {
            nodes: vec![Node::new()],
            len: 0,
        }
    }

    /// Number of keys stored.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts `key`, returning the previous value if the key was present.
    pub fn insert(&mut self, key: &str, value: V) -> Option<V> {
        let mut cur = 0usize;
        for ch in key.chars() {
            cur = match self.nodes[cur].children.get(&ch) {
                Some(&next) => next as usize,
                None => {
                    let next = self.nodes.len() as u32;
                    self.nodes.push(Node::new());
                    self.nodes[cur].children.insert(ch, next);
                    next as usize
                }
            };
        }
        let old = self.nodes[cur].value.replace(value);
        if old.is_none() {
            self.len += 1;
        }
        old
    }

    pub fn get(&self, key: &str) -> Option<&V> {
        let mut cur = 0usize;
        for ch in key.chars() {
            cur = *self.nodes[cur].children.get(&ch)? as usize;
        }
        self.nodes[cur].value.as_ref()
    }

    /// Yields `(match_len_chars, value)` for every key that is a prefix of
    /// `text[start..]`, shortest first.
    pub fn common_prefix_search<'a>(
        &'a self,
        text: &'a [char],
        start: usize,
    ) -> impl Iterator<Item = (usize, &'a V)> + 'a {
        PrefixIter {
            trie: self,
            text,
            start,
            pos: start,
            node: Some(0),
        }
    }
}

struct PrefixIter<'a, V> {
    trie: &'a Trie<V>,
    text: &'a [char],
    start: usize,
    pos: usize,
    node: Option<usize>,
}

impl<'a, V> Iterator for PrefixIter<'a, V> {
    type Item = (usize, &'a V);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let node = self.node?;
            let ch = match self.text.get(self.pos) {
                Some(&ch) => ch,
                None => {
                    self.node = None;
                    return None;
                }
            };
            self.pos += 1;
            match self.trie.nodes[node].children.get(&ch) {
                Some(&next) => {
                    let next = next as usize;
                    self.node = Some(next);
                    if let Some(value) = self.trie.nodes[next].value.as_ref() {
                        return Some((self.pos - self.start, value));
                    }
                }
                None => {
                    self.node = None;
                    return None;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn insert_and_get() {
        let mut t = Trie::new();
        assert_eq!(t.insert("ab", 1), None);
        assert_eq!(t.insert("a", 2), None);
        assert_eq!(t.insert("ab", 3), Some(1));
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a"), Some(&2));
        assert_eq!(t.get("ab"), Some(&3));
        assert_eq!(t.get("b"), None);
        assert_eq!(t.get(""), None);
    }

    #[test]
    fn common_prefix_search_yields_all_matches_shortest_first() {
        let mut t = Trie::new();
        for (k, v) in [("a", 1), ("ab", 2), ("abc", 3), ("b", 4), ("自転車", 5)] {
            t.insert(k, v);
        }
        let text = chars("abcd");
        let hits: Vec<(usize, i32)> = t
            .common_prefix_search(&text, 0)
            .map(|(l, &v)| (l, v))
            .collect();
        assert_eq!(hits, vec![(1, 1), (2, 2), (3, 3)]);

        let text = chars("自転車通勤");
        let hits: Vec<(usize, i32)> = t
            .common_prefix_search(&text, 0)
            .map(|(l, &v)| (l, v))
            .collect();
        assert_eq!(hits, vec![(3, 5)]);
    }

    #[test]
    fn search_from_offset_and_empty() {
        let mut t = Trie::new();
        t.insert("bc", 7);
        let text = chars("abc");
        let hits: Vec<(usize, i32)> = t
            .common_prefix_search(&text, 1)
            .map(|(l, &v)| (l, v))
            .collect();
        assert_eq!(hits, vec![(2, 7)]);
        assert!(t.common_prefix_search(&text, 3).next().is_none());
    }
}
