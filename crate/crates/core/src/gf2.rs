//! Linear algebra over the two-element field: sparse column reduction for
//! the production paths and dense bit-matrix rank for the oracles.

/// Sparse column: strictly increasing row positions.
pub type Column = Vec<u32>;

/// Symmetric difference of two sorted columns, written into `out`.
pub fn add_into(a: &[u32], b: &[u32], out: &mut Column) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Left-to-right reduction with lowest-one pivots.
///
/// Columns are indexed by position in processing order. `rows` is the number
/// of distinct row positions. Returns the pivot row of each column.
pub struct Reducer {
    owner: Vec<u32>,
    reduced: Vec<Column>,
    scratch: Column,
}

const NONE: u32 = u32::MAX;

impl Reducer {
    pub fn new(rows: usize) -> Self {
        Self { owner: vec![NONE; rows], reduced: Vec::new(), scratch: Vec::new() }
    }

    /// Reduce one column against the ones already added. Returns its pivot.
    pub fn push(&mut self, mut col: Column) -> Option<u32> {
        while let Some(&low) = col.last() {
            let other = self.owner[low as usize];
            if other == NONE {
                self.owner[low as usize] = self.reduced.len() as u32;
                self.reduced.push(col);
                return Some(low);
            }
            add_into(&col, &self.reduced[other as usize], &mut self.scratch);
            std::mem::swap(&mut col, &mut self.scratch);
        }
        self.reduced.push(Vec::new());
        None
    }

    pub fn is_pivot(&self, row: u32) -> bool {
        self.owner[row as usize] != NONE
    }
}

/// Dense bit vector over a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn highest(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(k, &w)| k * 64 + 63 - w.leading_zeros() as usize)
    }
}

/// Rank of a set of vectors.
pub fn rank(vectors: &[BitVec]) -> usize {
    let mut basis: Vec<BitVec> = Vec::new();
    let mut by_lead: std::collections::HashMap<usize, usize> = Default::default();
    for v in vectors {
        let mut v = v.clone();
        while let Some(h) = v.highest() {
            match by_lead.get(&h) {
                Some(&k) => v.xor_assign(&basis[k]),
                None => {
                    by_lead.insert(h, basis.len());
                    basis.push(v);
                    break;
                }
            }
        }
    }
    basis.len()
}

/// Basis of the nullspace of the linear map sending basis vector `j` of the
/// source (length `images.len()`) to `images[j]`.
pub fn nullspace(images: &[BitVec]) -> Vec<BitVec> {
    let n = images.len();
    // Row-reduce the images while tracking which source combination produced each.
    let mut rows: Vec<(BitVec, BitVec)> = Vec::new();
    let mut by_lead: std::collections::HashMap<usize, usize> = Default::default();
    let mut kernel = Vec::new();
    for (j, img) in images.iter().enumerate() {
        let mut v = img.clone();
        let mut combo = BitVec::zeros(n);
        combo.flip(j);
        loop {
            match v.highest() {
                None => {
                    kernel.push(combo);
                    break;
                }
                Some(h) => match by_lead.get(&h) {
                    Some(&k) => {
                        v.xor_assign(&rows[k].0);
                        combo.xor_assign(&rows[k].1);
                    }
                    None => {
                        by_lead.insert(h, rows.len());
                        rows.push((v, combo));
                        break;
                    }
                },
            }
        }
    }
    kernel
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(len: usize, ones: &[usize]) -> BitVec {
        let mut v = BitVec::zeros(len);
        for &i in ones {
            v.flip(i);
        }
        v
    }

    #[test]
    fn add_is_symmetric_difference() {
        let mut out = Vec::new();
        add_into(&[1, 3, 5], &[3, 4], &mut out);
        assert_eq!(out, vec![1, 4, 5]);
    }

    #[test]
    fn reducer_finds_triangle_pivots() {
        // Edges of a triangle on vertices 0,1,2.
        let mut r = Reducer::new(3);
        assert_eq!(r.push(vec![0, 1]), Some(1));
        assert_eq!(r.push(vec![1, 2]), Some(2));
        assert_eq!(r.push(vec![0, 2]), None);
    }

    #[test]
    fn rank_and_nullspace_of_cycle_boundary() {
        // Boundary of the 3-cycle: rank 2, nullspace spanned by the full cycle.
        let imgs = vec![bv(3, &[0, 1]), bv(3, &[1, 2]), bv(3, &[0, 2])];
        assert_eq!(rank(&imgs), 2);
        let k = nullspace(&imgs);
        assert_eq!(k, vec![bv(3, &[0, 1, 2])]);
        assert_eq!(bv(130, &[3, 129]).highest(), Some(129));
    }
}
