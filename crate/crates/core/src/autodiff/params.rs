use std::ops::Range;

use super::AutodiffError;

/// Flat vector of trainable values partitioned into named, disjoint slices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    values: Vec<f64>,
    slices: Vec<(String, Range<usize>)>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a slice. Names must be unique.
    pub fn push(&mut self, name: &str, values: &[f64]) -> Result<Range<usize>, AutodiffError> {
        if self.index_of(name).is_some() {
            return Err(AutodiffError::DuplicateSlice(name.to_string()));
        }
        let start = self.values.len();
        self.values.extend_from_slice(values);
        let range = start..self.values.len();
        self.slices.push((name.to_string(), range.clone()));
        Ok(range)
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.slices.iter().position(|(n, _)| n == name)
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.index_of(name).map(|i| self.slices[i].1.clone())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.range(name).map(|r| &self.values[r])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.range(name)?;
        Some(&mut self.values[r])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slices.iter().map(|(n, _)| n.as_str())
    }

    pub fn slices(&self) -> &[(String, Range<usize>)] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Replaces all values, keeping the slice layout.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<(), AutodiffError> {
        if flat.len() != self.values.len() {
            return Err(AutodiffError::LengthMismatch {
                what: "parameter vector",
                expected: self.values.len(),
                got: flat.len(),
            });
        }
        self.values.copy_from_slice(flat);
        Ok(())
    }

    /// Splits any flat vector with this layout into named pieces.
    pub fn split<'a, T>(&self, flat: &'a [T]) -> Vec<&'a [T]> {
        self.slices.iter().map(|(_, r)| &flat[r.clone()]).collect()
    }
}
