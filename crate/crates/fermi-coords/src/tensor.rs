//! Dense tensors of components at a single point, with per-slot basis
//! contraction. All tensors here are fully covariant; raising happens
//! explicitly against a metric where needed.

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorAtPoint {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl TensorAtPoint {
    pub fn zeros(dims: &[usize]) -> TensorAtPoint {
        let len = dims.iter().product();
        TensorAtPoint {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_data(dims: &[usize], data: Vec<f64>) -> TensorAtPoint {
        assert_eq!(data.len(), dims.iter().product::<usize>());
        TensorAtPoint {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, (&x, &d)) in idx.iter().zip(&self.dims).enumerate() {
            debug_assert!(x < d, "index {x} out of bounds {d} in slot {i}");
            off = off * d + x;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn add_at(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Iterate all index tuples in row-major order.
    pub fn indices(&self) -> IndexIter {
        IndexIter {
            dims: self.dims.clone(),
            next: Some(vec![0; self.dims.len()]),
        }
    }

    /// Replace `slot` by contraction against a family of vectors expressed
    /// in the current basis: out[.., a, ..] = sum_i T[.., i, ..] v_a[i].
    pub fn contract_slot(&self, slot: usize, vectors: &[Vec<f64>]) -> Result<TensorAtPoint, Error> {
        let d = self.dims[slot];
        for v in vectors {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "tensor slot contraction",
                    expected: d,
                    got: v.len(),
                });
            }
        }
        let mut dims = self.dims.clone();
        dims[slot] = vectors.len();
        let mut out = TensorAtPoint::zeros(&dims);
        let mut idx_out: Vec<usize> = vec![0; dims.len()];
        loop {
            let mut acc = 0.0;
            let a = idx_out[slot];
            let mut idx_in = idx_out.clone();
            for i in 0..d {
                idx_in[slot] = i;
                acc += self.get(&idx_in) * vectors[a][i];
            }
            let off = out.offset(&idx_out);
            out.data[off] = acc;
            // advance
            let mut s = dims.len();
            loop {
                if s == 0 {
                    return Ok(out);
                }
                s -= 1;
                idx_out[s] += 1;
                if idx_out[s] < dims[s] {
                    break;
                }
                idx_out[s] = 0;
            }
        }
    }

    /// Contract every slot against the same vector family (a full change of
    /// frame for an all-covariant tensor).
    pub fn contract_all_slots(&self, vectors: &[Vec<f64>]) -> Result<TensorAtPoint, Error> {
        let mut t = self.clone();
        for slot in 0..self.rank() {
            t = t.contract_slot(slot, vectors)?;
        }
        Ok(t)
    }

    /// Move one slot to a new position, shifting the slots in between.
    pub fn move_slot(&self, from: usize, to: usize) -> TensorAtPoint {
        let rank = self.rank();
        assert!(from < rank && to < rank);
        if from == to {
            return self.clone();
        }
        // perm[new_slot] = old_slot
        let mut perm: Vec<usize> = (0..rank).filter(|&s| s != from).collect();
        perm.insert(to, from);
        let dims: Vec<usize> = perm.iter().map(|&s| self.dims[s]).collect();
        let mut out = TensorAtPoint::zeros(&dims);
        let mut idx_old = vec![0usize; rank];
        for idx_new in out.indices() {
            for (new_slot, &old_slot) in perm.iter().enumerate() {
                idx_old[old_slot] = idx_new[new_slot];
            }
            let off = out.offset(&idx_new);
            out.data[off] = self.get(&idx_old);
        }
        out
    }
}

pub struct IndexIter {
    dims: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for IndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        if self.dims.iter().any(|&d| d == 0) {
            return None;
        }
        let mut succ = current.clone();
        let mut s = self.dims.len();
        loop {
            if s == 0 {
                self.next = None;
                break;
            }
            s -= 1;
            succ[s] += 1;
            if succ[s] < self.dims[s] {
                self.next = Some(succ);
                break;
            }
            succ[s] = 0;
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn contraction_rotates_components() {
        // v slot-contraction of a rank-2 tensor equals matrix congruence
        let t = TensorAtPoint::from_data(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let e0 = vec![0.6, 0.8];
        let e1 = vec![-0.8, 0.6];
        let r = t.contract_all_slots(&[e0.clone(), e1.clone()]).unwrap();
        let basis = [e0, e1];
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        acc += t.get(&[i, j]) * basis[a][i] * basis[b][j];
                    }
                }
                assert_relative_eq!(r.get(&[a, b]), acc, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn mixed_dims_and_iteration() {
        let mut t = TensorAtPoint::zeros(&[2, 3]);
        let mut count = 0;
        for idx in t.indices().collect::<Vec<_>>() {
            t.set(&idx, (idx[0] * 3 + idx[1]) as f64);
            count += 1;
        }
        assert_eq!(count, 6);
        assert_eq!(t.get(&[1, 2]), 5.0);
        // contract second slot down to a smaller family
        let r = t.contract_slot(1, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(r.dims(), &[2, 1]);
        assert_eq!(r.get(&[1, 0]), 3.0);
    }

    #[test]
    fn slot_moves_preserve_entries() {
        let mut t = TensorAtPoint::zeros(&[2, 3, 4]);
        for idx in t.indices().collect::<Vec<_>>() {
            t.set(&idx, (idx[0] * 100 + idx[1] * 10 + idx[2]) as f64);
        }
        let m = t.move_slot(2, 0);
        assert_eq!(m.dims(), &[4, 2, 3]);
        for idx in t.indices() {
            assert_eq!(m.get(&[idx[2], idx[0], idx[1]]), t.get(&idx));
        }
        let back = m.move_slot(0, 2);
        assert_eq!(back.dims(), t.dims());
        for idx in t.indices() {
            assert_eq!(back.get(&idx), t.get(&idx));
        }
    }
}
