//! Index subsets of a finite ground set.

use crate::{Error, Result};

/// A subset of `{0, .., ground - 1}`, stored as sorted distinct indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subset {
    indices: Vec<usize>,
    ground: usize,
}

impl Subset {
    /// Sorts, then rejects duplicates and out-of-range indices.
    pub fn new(mut indices: Vec<usize>, ground: usize) -> Result<Self> {
        indices.sort_unstable();
        for pair in indices.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::invalid(format!("duplicate index {}", pair[0])));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= ground {
                return Err(Error::invalid(format!(
                    "index {last} out of range for ground set of size {ground}"
                )));
            }
        }
        Ok(Subset { indices, ground })
    }

    pub fn empty(ground: usize) -> Self {
        Subset {
            indices: Vec::new(),
            ground,
        }
    }

    /// Decodes a bitmask; bit `i` selects index `i`. Requires `ground <= 64`.
    pub fn from_mask(mask: u64, ground: usize) -> Self {
        assert!(ground <= 64, "mask form limited to 64 elements");
        assert!(
            ground == 64 || mask < (1u64 << ground),
            "mask has bits outside the ground set"
        );
        let indices = (0..ground).filter(|i| mask & (1 << i) != 0).collect();
        Subset { indices, ground }
    }

    /// Encodes as a bitmask. Requires `ground <= 64`.
    pub fn mask(&self) -> u64 {
        assert!(self.ground <= 64, "mask form limited to 64 elements");
        self.indices.iter().fold(0u64, |m, &i| m | (1 << i))
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }

    pub fn ground(&self) -> usize {
        self.ground
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.indices.iter().enumerate() {
            if pos > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let s = Subset::new(vec![3, 0, 2], 5).unwrap();
        assert_eq!(s.indices(), &[0, 2, 3]);
        assert!(s.contains(2));
        assert!(!s.contains(1));
        assert!(Subset::new(vec![1, 1], 5).is_err());
        assert!(Subset::new(vec![5], 5).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let s = Subset::from_mask(0b10110, 6);
        assert_eq!(s.indices(), &[1, 2, 4]);
        assert_eq!(s.mask(), 0b10110);
        assert_eq!(Subset::empty(6).mask(), 0);
    }

    #[test]
    fn display_is_braced_list() {
        let s = Subset::new(vec![4, 1], 6).unwrap();
        assert_eq!(s.to_string(), "{1, 4}");
    }
}
