use std::hash::Hasher;

use fnv::FnvHasher;

use crate::error::{Error, Result};

/// Sparse nonnegative feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from unsorted `(index, value)` pairs, summing duplicates.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        if let Some(&(i, _)) = pairs.iter().find(|(i, _)| *i as usize >= dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: i as usize + 1,
            });
        }
        pairs.sort_unstable_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.1 == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(i as u32), |e| e.0)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }

    fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for e in &mut self.entries {
                e.1 /= n;
            }
        }
    }
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// 64-bit FNV-1a of the UTF-8 bytes.
pub fn fnv1a(s: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(s.as_bytes());
    h.finish()
}

/// Hashed bag of n-grams. Each n-gram is its tokens joined by a single space,
/// hashed with FNV-1a and reduced modulo `buckets`. Counts are L2-normalized.
pub fn featurize(text: &str, buckets: usize, orders: &[usize]) -> SparseVec {
    let tokens = tokenize(text);
    let mut pairs = Vec::new();
    for &n in orders {
        if n == 0 || n > tokens.len() {
            continue;
        }
        for gram in tokens.windows(n) {
            let key = gram.join(" ");
            pairs.push(((fnv1a(&key) % buckets as u64) as u32, 1.0));
        }
    }
    let mut v = SparseVec::from_pairs(buckets, pairs).expect("bucket index below dimension");
    v.normalize();
    v
}
