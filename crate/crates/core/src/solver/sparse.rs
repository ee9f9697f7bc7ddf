//! Block-sparse symmetric matrices and a block Cholesky solver.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::Mat12;

/// Symmetric matrix over bodies with 12×12 blocks: one diagonal block per
/// dynamic body and upper off-diagonal blocks keyed by `(i, j)`, `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSparseMatrix {
    pub diag: Vec<Mat12>,
    pub upper: BTreeMap<(usize, usize), Mat12>,
}

impl BlockSparseMatrix {
    /// Zero matrix with the given off-diagonal pattern.
    pub fn with_pattern(n: usize, pattern: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            diag: vec![Mat12::zeros(); n],
            upper: pattern.into_iter().map(|(i, j)| ((i.min(j), i.max(j)), Mat12::zeros())).collect(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    /// Block `(i, j)` of the full symmetric matrix, if stored.
    pub fn block(&self, i: usize, j: usize) -> Option<Mat12> {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => self.diag.get(i).copied(),
            Less => self.upper.get(&(i, j)).copied(),
            Greater => self.upper.get(&(j, i)).map(|b| b.transpose()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = 12 * self.n_blocks();
        let mut m = DMatrix::zeros(n, n);
        for (i, b) in self.diag.iter().enumerate() {
            m.view_mut((12 * i, 12 * i), (12, 12)).copy_from(b);
        }
        for (&(i, j), b) in &self.upper {
            m.view_mut((12 * i, 12 * j), (12, 12)).copy_from(b);
            m.view_mut((12 * j, 12 * i), (12, 12)).copy_from(&b.transpose());
        }
        m
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        for (i, b) in self.diag.iter().enumerate() {
            let r = b * x.fixed_rows::<12>(12 * i);
            let mut yi = y.fixed_rows_mut::<12>(12 * i);
            yi += r;
        }
        for (&(i, j), b) in &self.upper {
            let r = b * x.fixed_rows::<12>(12 * j);
            let mut yi = y.fixed_rows_mut::<12>(12 * i);
            yi += r;
            let r = b.transpose() * x.fixed_rows::<12>(12 * i);
            let mut yj = y.fixed_rows_mut::<12>(12 * j);
            yj += r;
        }
        y
    }
}

/// Symmetric matrix with variable-size blocks, stored as the upper triangle.
#[derive(Clone, Debug)]
pub struct VarBlockMatrix {
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    pub upper: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl VarBlockMatrix {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &d in &dims {
            offsets.push(acc);
            acc += d;
        }
        Self {
            dims,
            offsets,
            upper: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Adds `m` to block `(i, j)` of the full matrix (and implicitly its
    /// transpose to `(j, i)`).
    pub fn add_block(&mut self, i: usize, j: usize, m: &DMatrix<f64>) {
        if i <= j {
            let e = self.upper.entry((i, j)).or_insert_with(|| DMatrix::zeros(self.dims[i], self.dims[j]));
            *e += m;
        } else {
            let e = self.upper.entry((j, i)).or_insert_with(|| DMatrix::zeros(self.dims[j], self.dims[i]));
            *e += m.transpose();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for (&(i, j), b) in &self.upper {
            m.view_mut((self.offsets[i], self.offsets[j]), (self.dims[i], self.dims[j])).copy_from(b);
            if i != j {
                m.view_mut((self.offsets[j], self.offsets[i]), (self.dims[j], self.dims[i]))
                    .copy_from(&b.transpose());
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        for (&(i, j), b) in &self.upper {
            let xi = x.rows(self.offsets[i], self.dims[i]);
            let xj = x.rows(self.offsets[j], self.dims[j]);
            let r = b * xj;
            let mut yi = y.rows_mut(self.offsets[i], self.dims[i]);
            yi += r;
            if i != j {
                let r = b.transpose() * xi;
                let mut yj = y.rows_mut(self.offsets[j], self.dims[j]);
                yj += r;
            }
        }
        y
    }
}

/// Lower block Cholesky factor `L` with `H = L Lᵀ`, column-wise storage.
#[derive(Clone, Debug)]
pub struct BlockCholesky {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    /// `cols[j]` maps row block `i ≥ j` to `L_ij`.
    cols: Vec<BTreeMap<usize, DMatrix<f64>>>,
}

impl BlockCholesky {
    /// Right-looking factorization in natural block order with fill-in.
    pub fn factor(h: &VarBlockMatrix) -> Result<Self> {
        let n = h.dims.len();
        let mut cols: Vec<BTreeMap<usize, DMatrix<f64>>> = vec![BTreeMap::new(); n];
        for (&(i, j), b) in &h.upper {
            // lower block (j, i) = bᵀ stored in column i
            cols[i].insert(j, b.transpose());
        }
        for k in 0..n {
            let akk = cols[k].remove(&k).unwrap_or_else(|| DMatrix::zeros(h.dims[k], h.dims[k]));
            let sym = (&akk + akk.transpose()) * 0.5;
            let lkk = nalgebra::Cholesky::new(sym).ok_or(Error::Factorization { block: k })?.unpack();
            let below: Vec<usize> = cols[k].keys().copied().collect();
            for &i in &below {
                let aik = cols[k].remove(&i).expect("present");
                // L_ik = A_ik L_kk⁻ᵀ, i.e. L_kk L_ikᵀ = A_ikᵀ
                let lt = lkk
                    .solve_lower_triangular(&aik.transpose())
                    .ok_or(Error::Factorization { block: k })?;
                cols[k].insert(i, lt.transpose());
            }
            for (a, &j) in below.iter().enumerate() {
                let ljk = cols[k][&j].clone();
                for &i in &below[a..] {
                    let update = &cols[k][&i] * ljk.transpose();
                    let e = cols[j].entry(i).or_insert_with(|| DMatrix::zeros(h.dims[i], h.dims[j]));
                    *e -= update;
                }
            }
            cols[k].insert(k, lkk);
        }
        Ok(Self {
            dims: h.dims.clone(),
            offsets: h.offsets.clone(),
            cols,
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dims.len();
        let mut y = b.clone();
        // forward: L y = b
        for k in 0..n {
            let (ok, dk) = (self.offsets[k], self.dims[k]);
            let lkk = &self.cols[k][&k];
            let yk = lkk
                .solve_lower_triangular(&y.rows(ok, dk).into_owned())
                .expect("nonsingular diagonal");
            y.rows_mut(ok, dk).copy_from(&yk);
            for (&i, lik) in self.cols[k].range(k + 1..) {
                let r = lik * &yk;
                let mut yi = y.rows_mut(self.offsets[i], self.dims[i]);
                yi -= r;
            }
        }
        // backward: Lᵀ x = y
        for k in (0..n).rev() {
            let (ok, dk) = (self.offsets[k], self.dims[k]);
            let mut rhs = y.rows(ok, dk).into_owned();
            for (&i, lik) in self.cols[k].range(k + 1..) {
                rhs -= lik.transpose() * y.rows(self.offsets[i], self.dims[i]);
            }
            let xk = self.cols[k][&k]
                .transpose()
                .solve_upper_triangular(&rhs)
                .expect("nonsingular diagonal");
            y.rows_mut(ok, dk).copy_from(&xk);
        }
        y
    }
}

/// Solves `H x = −g`.
pub fn solve_newton_system(h: &VarBlockMatrix, g: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(-BlockCholesky::factor(h)?.solve(g))
}
