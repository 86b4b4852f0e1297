use std::collections::HashMap;
use std::hash::Hash;

/// Bijection between raw keys and dense IDs `0..len`, assigned in ascending key order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdIndex<K: Eq + Hash> {
    keys: Vec<K>,
    ids: HashMap<K, usize>,
}

impl<K: Ord + Hash + Clone> IdIndex<K> {
    pub fn from_keys<I: IntoIterator<Item = K>>(keys: I) -> Self {
        let mut keys: Vec<K> = keys.into_iter().collect();
        keys.sort();
        keys.dedup();
        let ids = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        Self { keys, ids }
    }

    pub fn encode<Q>(&self, key: &Q) -> Option<usize>
    where
        K: std::borrow::Borrow<Q>,
        Q: Hash + Eq + ?Sized,
    {
        self.ids.get(key).copied()
    }

    pub fn decode(&self, id: usize) -> Option<&K> {
        self.keys.get(id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[K] {
        &self.keys
    }
}

impl<K: Ord + Hash + Clone> Default for IdIndex<K> {
    fn default() -> Self {
        Self::from_keys(std::iter::empty())
    }
}

pub fn encode_ids<K: Ord + Hash + Clone>(raw: impl IntoIterator<Item = K>) -> IdIndex<K> {
    IdIndex::from_keys(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorted_assignment() {
        let idx = encode_ids([20060002_i64, 20060001]);
        assert_eq!(idx.encode(&20060001), Some(0));
        assert_eq!(idx.encode(&20060002), Some(1));

        let years = encode_ids([1994, 1972]);
        assert_eq!(years.encode(&1972), Some(0));
        assert_eq!(years.encode(&1994), Some(1));
    }

    #[test]
    fn empty_input() {
        let idx = encode_ids(Vec::<i64>::new());
        assert!(idx.is_empty());
        assert_eq!(idx.decode(0), None);
    }

    proptest! {
        #[test]
        fn bijective(keys in proptest::collection::vec(-1000i64..1000, 0..64)) {
            let idx = encode_ids(keys.clone());
            for k in &keys {
                let id = idx.encode(k).unwrap();
                prop_assert_eq!(idx.decode(id), Some(k));
            }
            for d in 0..idx.len() {
                prop_assert_eq!(idx.encode(idx.decode(d).unwrap()), Some(d));
            }
            prop_assert!(idx.keys().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
