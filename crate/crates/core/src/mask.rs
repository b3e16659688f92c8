//! Sparse non-negative masks over edges (explanation masks, ground-truth
//! masks, task masks) or over nodes (node-task masks).

use crate::graph::{Edge, NodeId};

/// Only strictly positive weights are stored; entries are sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask<K> {
    entries: Vec<(K, f64)>,
}

impl<K> Default for Mask<K> {
    fn default() -> Self {
        Mask { entries: Vec::new() }
    }
}

pub type EdgeMask = Mask<Edge>;
pub type NodeMask = Mask<NodeId>;

impl<K: Ord + Copy> Mask<K> {
    /// Keeps the positive part of every weight; duplicate keys are summed.
    pub fn from_weights(items: impl IntoIterator<Item = (K, f64)>) -> Self {
        let mut entries: Vec<(K, f64)> = items.into_iter().filter(|(_, w)| *w > 0.0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(K, f64)> = Vec::with_capacity(entries.len());
        for (k, w) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += w,
                _ => merged.push((k, w)),
            }
        }
        Mask { entries: merged }
    }

    /// Binary mask with weight 1 on every key.
    pub fn indicator(keys: impl IntoIterator<Item = K>) -> Self {
        Self::from_weights(keys.into_iter().map(|k| (k, 1.0)))
    }

    pub fn entries(&self) -> &[(K, f64)] {
        &self.entries
    }

    pub fn keys(&self) -> impl Iterator<Item = K> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn get(&self, key: &K) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.cmp(key))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_weights(self.entries.iter().map(|&(k, w)| (k, w * factor)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_non_positive_and_merges() {
        let m = NodeMask::from_weights([(3, 1.0), (1, -2.0), (3, 0.5), (2, 0.0), (0, 0.25)]);
        assert_eq!(m.entries(), &[(0, 0.25), (3, 1.5)]);
        assert_eq!(m.get(&1), 0.0);
        assert_eq!(m.total(), 1.75);
    }
}
