use indexmap::IndexMap;

use super::Array;
use crate::error::{Error, Result};

/// Named collection of trainable arrays.
///
/// Iteration follows insertion order, so two sets built by the same sequence
/// of `insert` calls line up index for index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    arrays: IndexMap<String, Array>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) -> Result<()> {
        let name = name.into();
        if self.arrays.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        self.arrays.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array> {
        self.arrays.get_mut(name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.arrays.get_index_of(name)
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.arrays.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array)> {
        self.arrays.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn size(&self) -> usize {
        self.arrays.values().map(Array::len).sum()
    }

    /// Parameters whose name starts with `prefix`, in order.
    pub fn subset(&self, prefix: &str) -> ParamSet {
        ParamSet {
            arrays: self
                .arrays
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Appends every array of `other`; names must not collide.
    pub fn extend(&mut self, other: ParamSet) -> Result<()> {
        for (k, v) in other.arrays {
            self.insert(k, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamSet::new();
        p.insert("w", Array::scalar(1.0)).unwrap();
        assert!(p.insert("w", Array::scalar(2.0)).is_err());
    }

    #[test]
    fn order_is_insertion_order() {
        let mut p = ParamSet::new();
        for name in ["z", "a", "m"] {
            p.insert(name, Array::scalar(0.0)).unwrap();
        }
        assert_eq!(p.names().collect::<Vec<_>>(), ["z", "a", "m"]);
        assert_eq!(p.index_of("a"), Some(1));
    }
}
