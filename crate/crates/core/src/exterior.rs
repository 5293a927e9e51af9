//! Ordered multi-indices and the sign bookkeeping of wedge-basis merges.
//!
//! A [`MultiIndex`] labels the basis covector `dx_a1 ∧ … ∧ dx_ap` with
//! `a1 < … < ap`. Indices are 1-based everywhere in the public surface.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Strictly increasing tuple of 1-based axis indices in `1..=dim`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawMultiIndex")]
pub struct MultiIndex {
    // Field order matters for the derived `Ord`: lexicographic on the tuple.
    indices: Vec<usize>,
    dim: usize,
}

#[derive(Deserialize)]
struct RawMultiIndex {
    indices: Vec<usize>,
    dim: usize,
}

impl TryFrom<RawMultiIndex> for MultiIndex {
    type Error = crate::Error;

    fn try_from(raw: RawMultiIndex) -> Result<Self> {
        MultiIndex::new(raw.dim, raw.indices)
    }
}

/// Outcome of concatenating two multi-indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeResult {
    /// The two index sets intersect, so the wedge vanishes.
    Zero,
    /// Sorted union together with the parity of the sorting permutation.
    Signed { sign: i8, merged: MultiIndex },
}

impl MultiIndex {
    pub fn new(dim: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.len() > dim {
            return domain(format!("multi-index {indices:?} longer than ambient dimension {dim}"));
        }
        for (k, &i) in indices.iter().enumerate() {
            if i == 0 || i > dim {
                return domain(format!("index {i} outside 1..={dim}"));
            }
            if k > 0 && indices[k - 1] >= i {
                return domain(format!("multi-index {indices:?} is not strictly increasing"));
            }
        }
        Ok(MultiIndex { indices, dim })
    }

    /// The empty index (degree 0).
    pub fn empty(dim: usize) -> Self {
        MultiIndex { indices: Vec::new(), dim }
    }

    /// `(i)` for a single axis.
    pub fn single(dim: usize, i: usize) -> Result<Self> {
        Self::new(dim, vec![i])
    }

    /// `(1, 2, …, dim)`.
    pub fn top(dim: usize) -> Self {
        MultiIndex { indices: (1..=dim).collect(), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All elements of I(dim, p) in lexicographic order.
pub fn enumerate_multiindices(dim: usize, p: usize) -> Result<Vec<MultiIndex>> {
    if p > dim {
        return domain(format!("degree {p} exceeds ambient dimension {dim}"));
    }
    let mut out = Vec::with_capacity(binomial(dim, p));
    let mut current: Vec<usize> = (1..=p).collect();
    loop {
        out.push(MultiIndex { indices: current.clone(), dim });
        // advance to the next combination in lexicographic order
        let mut k = p;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if current[k] < dim - (p - 1 - k) {
                current[k] += 1;
                for r in k + 1..p {
                    current[r] = current[r - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Wedge of two basis covectors: `dx_a ∧ dx_b = sign · dx_merged`.
pub fn merge(a: &MultiIndex, b: &MultiIndex) -> Result<MergeResult> {
    if a.dim != b.dim {
        return domain(format!(
            "cannot merge multi-indices of ambient dimensions {} and {}",
            a.dim, b.dim
        ));
    }
    let mut merged = Vec::with_capacity(a.degree() + b.degree());
    // Each element of `b` that precedes an element of `a` costs one
    // transposition per such element of `a`.
    let mut inversions = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => {
                merged.push(a.indices[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                merged.push(b.indices[j]);
                inversions += a.indices.len() - i;
                j += 1;
            }
            std::cmp::Ordering::Equal => return Ok(MergeResult::Zero),
        }
    }
    merged.extend_from_slice(&a.indices[i..]);
    merged.extend_from_slice(&b.indices[j..]);
    let sign = if inversions % 2 == 0 { 1 } else { -1 };
    Ok(MergeResult::Signed { sign, merged: MultiIndex { indices: merged, dim: a.dim } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(dim: usize, ix: &[usize]) -> MultiIndex {
        MultiIndex::new(dim, ix.to_vec()).unwrap()
    }

    // Sign of the permutation sorting `seq`, by counting inversions directly.
    fn brute_sign(seq: &[usize]) -> Option<i8> {
        let mut inv = 0;
        for x in 0..seq.len() {
            for y in x + 1..seq.len() {
                if seq[x] == seq[y] {
                    return None;
                }
                if seq[x] > seq[y] {
                    inv += 1;
                }
            }
        }
        Some(if inv % 2 == 0 { 1 } else { -1 })
    }

    #[test]
    fn enumeration_examples() {
        let e = enumerate_multiindices(3, 2).unwrap();
        let tuples: Vec<_> = e.iter().map(|m| m.indices().to_vec()).collect();
        assert_eq!(tuples, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(enumerate_multiindices(4, 2).unwrap().len(), 6);
        assert_eq!(enumerate_multiindices(5, 5).unwrap(), vec![MultiIndex::top(5)]);
        assert_eq!(enumerate_multiindices(3, 0).unwrap(), vec![MultiIndex::empty(3)]);
        assert!(enumerate_multiindices(2, 3).is_err());
    }

    #[test]
    fn enumeration_counts_and_order() {
        for dim in 1..=6 {
            for p in 0..=dim {
                let e = enumerate_multiindices(dim, p).unwrap();
                assert_eq!(e.len(), binomial(dim, p));
                for w in e.windows(2) {
                    assert!(w[0] < w[1]);
                }
                for m in &e {
                    assert!(MultiIndex::new(dim, m.indices().to_vec()).is_ok());
                }
            }
        }
    }

    #[test]
    fn merge_examples() {
        assert_eq!(
            merge(&mi(3, &[1, 3]), &mi(3, &[2])).unwrap(),
            MergeResult::Signed { sign: -1, merged: mi(3, &[1, 2, 3]) }
        );
        assert_eq!(merge(&mi(3, &[1, 2]), &mi(3, &[2])).unwrap(), MergeResult::Zero);
        assert_eq!(
            merge(&mi(3, &[1]), &mi(3, &[2])).unwrap(),
            MergeResult::Signed { sign: 1, merged: mi(3, &[1, 2]) }
        );
        assert!(merge(&mi(3, &[1]), &mi(4, &[2])).is_err());
    }

    #[test]
    fn invalid_indices_rejected() {
        assert!(MultiIndex::new(3, vec![0]).is_err());
        assert!(MultiIndex::new(3, vec![4]).is_err());
        assert!(MultiIndex::new(3, vec![2, 2]).is_err());
        assert!(MultiIndex::new(3, vec![3, 1]).is_err());
        assert!(MultiIndex::new(2, vec![1, 2, 3]).is_err());
    }

    fn all_indices(dim: usize) -> Vec<MultiIndex> {
        (0..=dim).flat_map(|p| enumerate_multiindices(dim, p).unwrap()).collect()
    }

    #[test]
    fn merge_matches_brute_force_and_is_graded_antisymmetric() {
        for dim in 1..=5 {
            let all = all_indices(dim);
            for a in &all {
                for b in &all {
                    let concat: Vec<usize> =
                        a.indices().iter().chain(b.indices()).copied().collect();
                    let ab = merge(a, b).unwrap();
                    match (brute_sign(&concat), &ab) {
                        (None, MergeResult::Zero) => {}
                        (Some(s), MergeResult::Signed { sign, merged }) => {
                            assert_eq!(s, *sign);
                            let mut sorted = concat.clone();
                            sorted.sort_unstable();
                            assert_eq!(merged.indices(), &sorted[..]);
                        }
                        other => panic!("mismatch for {a} {b}: {other:?}"),
                    }
                    if let (
                        MergeResult::Signed { sign: s1, .. },
                        MergeResult::Signed { sign: s2, .. },
                    ) = (&ab, merge(b, a).unwrap())
                    {
                        let graded = if (a.degree() * b.degree()) % 2 == 0 { 1 } else { -1 };
                        assert_eq!(*s1, graded * s2);
                    }
                }
            }
        }
    }

    #[test]
    fn triple_merges_are_associative() {
        for dim in 1..=5 {
            let all = all_indices(dim);
            for a in &all {
                for b in &all {
                    for c in &all {
                        let left = match merge(a, b).unwrap() {
                            MergeResult::Zero => MergeResult::Zero,
                            MergeResult::Signed { sign, merged } => match merge(&merged, c).unwrap() {
                                MergeResult::Zero => MergeResult::Zero,
                                MergeResult::Signed { sign: s2, merged } => {
                                    MergeResult::Signed { sign: sign * s2, merged }
                                }
                            },
                        };
                        let right = match merge(b, c).unwrap() {
                            MergeResult::Zero => MergeResult::Zero,
                            MergeResult::Signed { sign, merged } => match merge(a, &merged).unwrap() {
                                MergeResult::Zero => MergeResult::Zero,
                                MergeResult::Signed { sign: s2, merged } => {
                                    MergeResult::Signed { sign: sign * s2, merged }
                                }
                            },
                        };
                        assert_eq!(left, right, "{a} {b} {c}");
                    }
                }
            }
        }
    }
}
