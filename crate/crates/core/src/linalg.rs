//! Symmetric block-tridiagonal matrices and their block Cholesky factorization.
//!
//! Every precision and Hessian in the planner shares one envelope: square
//! blocks of size `state_dim` on the diagonal plus the first sub-diagonal.
//! The factor of such a matrix is block lower-bidiagonal, so factorization,
//! solves and log-determinants are linear in the number of support states.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric matrix with nonzero blocks only on the diagonal and the first
/// off-diagonal. `lower[n]` holds block `(n + 1, n)`; the upper half is implied.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTridiag {
    block: usize,
    diag: Vec<DMatrix<f64>>,
    lower: Vec<DMatrix<f64>>,
}

impl BlockTridiag {
    pub fn zeros(num_blocks: usize, block: usize) -> Self {
        assert!(num_blocks >= 1 && block >= 1);
        Self {
            block,
            diag: vec![DMatrix::zeros(block, block); num_blocks],
            lower: vec![DMatrix::zeros(block, block); num_blocks - 1],
        }
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    /// Total dimension of the (square) matrix.
    pub fn dim(&self) -> usize {
        self.block * self.diag.len()
    }

    pub fn diag(&self, n: usize) -> &DMatrix<f64> {
        &self.diag[n]
    }

    pub fn diag_mut(&mut self, n: usize) -> &mut DMatrix<f64> {
        &mut self.diag[n]
    }

    /// Block `(n + 1, n)`.
    pub fn lower(&self, n: usize) -> &DMatrix<f64> {
        &self.lower[n]
    }

    pub fn lower_mut(&mut self, n: usize) -> &mut DMatrix<f64> {
        &mut self.lower[n]
    }

    /// Adds a symmetric contribution coupling blocks `n` and `n + 1`, given as
    /// a `2b x 2b` matrix over the stacked pair `[x_n; x_{n+1}]`.
    pub fn add_pair(&mut self, n: usize, contribution: &DMatrix<f64>) {
        let b = self.block;
        assert_eq!(contribution.nrows(), 2 * b);
        self.diag[n] += contribution.view((0, 0), (b, b));
        self.diag[n + 1] += contribution.view((b, b), (b, b));
        self.lower[n] += contribution.view((b, 0), (b, b));
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let b = self.block;
        assert_eq!(x.len(), self.dim());
        let mut y = DVector::zeros(self.dim());
        for n in 0..self.num_blocks() {
            let xn = x.rows(n * b, b);
            let mut yn = &self.diag[n] * xn;
            if n > 0 {
                yn += &self.lower[n - 1] * x.rows((n - 1) * b, b);
            }
            if n + 1 < self.num_blocks() {
                yn += self.lower[n].tr_mul(&x.rows((n + 1) * b, b));
            }
            y.rows_mut(n * b, b).copy_from(&yn);
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    pub fn scale(&mut self, factor: f64) {
        self.diag.iter_mut().for_each(|d| *d *= factor);
        self.lower.iter_mut().for_each(|l| *l *= factor);
    }

    pub fn add_assign(&mut self, other: &BlockTridiag) {
        assert_eq!(self.block, other.block);
        assert_eq!(self.num_blocks(), other.num_blocks());
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += b;
        }
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a += b;
        }
    }

    /// Largest absolute difference between the stored diagonal blocks and
    /// their transposes. Off-diagonal blocks are symmetric by storage.
    pub fn asymmetry(&self) -> f64 {
        self.diag
            .iter()
            .map(|d| (d - d.transpose()).amax())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let b = self.block;
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (n, d) in self.diag.iter().enumerate() {
            m.view_mut((n * b, n * b), (b, b)).copy_from(d);
        }
        for (n, l) in self.lower.iter().enumerate() {
            m.view_mut(((n + 1) * b, n * b), (b, b)).copy_from(l);
            m.view_mut((n * b, (n + 1) * b), (b, b))
                .copy_from(&l.transpose());
        }
        m
    }

    /// Smallest eigenvalue of the dense matrix. Diagnostic only; O(dim³).
    pub fn min_eigenvalue(&self) -> f64 {
        self.to_dense()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cholesky(&self) -> Result<BlockCholesky> {
        BlockCholesky::factor(self)
    }
}

/// Block lower-bidiagonal factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct BlockCholesky {
    block: usize,
    /// Lower-triangular diagonal blocks `L_nn`.
    diag: Vec<DMatrix<f64>>,
    /// Sub-diagonal blocks `L_{n+1,n}`.
    lower: Vec<DMatrix<f64>>,
}

impl BlockCholesky {
    fn factor(a: &BlockTridiag) -> Result<Self> {
        let b = a.block;
        let nb = a.num_blocks();
        let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        let mut lower: Vec<DMatrix<f64>> = Vec::with_capacity(nb.saturating_sub(1));
        for n in 0..nb {
            let mut schur = a.diag[n].clone();
            if n > 0 {
                // L_{n,n-1} = A_{n,n-1} L_{n-1,n-1}^{-T}
                let prev = &diag[n - 1];
                let off = prev
                    .solve_lower_triangular(&a.lower[n - 1].transpose())
                    .ok_or(Error::NotPositiveDefinite { block: n - 1 })?
                    .transpose();
                schur -= &off * off.transpose();
                lower.push(off);
            }
            let chol =
                nalgebra::Cholesky::new(schur).ok_or(Error::NotPositiveDefinite { block: n })?;
            diag.push(chol.l());
        }
        debug_assert_eq!(diag.iter().map(|d| d.nrows()).sum::<usize>(), nb * b);
        Ok(Self {
            block: b,
            diag,
            lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.block * self.diag.len()
    }

    /// `log det A = 2 Σ log diag(L)`.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .diag
            .iter()
            .flat_map(|l| (0..l.nrows()).map(move |i| l[(i, i)].ln()))
            .sum::<f64>()
    }

    /// Solves `L y = rhs`.
    pub fn solve_lower(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let b = self.block;
        let mut y = DVector::zeros(self.dim());
        for n in 0..self.diag.len() {
            let mut r: DVector<f64> = rhs.rows(n * b, b).into_owned();
            if n > 0 {
                r -= &self.lower[n - 1] * y.rows((n - 1) * b, b);
            }
            let yn = self.diag[n]
                .solve_lower_triangular(&r)
                .expect("cholesky diagonal is nonsingular");
            y.rows_mut(n * b, b).copy_from(&yn);
        }
        y
    }

    /// Solves `Lᵀ x = rhs`.
    pub fn solve_upper(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let b = self.block;
        let nb = self.diag.len();
        let mut x = DVector::zeros(self.dim());
        for n in (0..nb).rev() {
            let mut r: DVector<f64> = rhs.rows(n * b, b).into_owned();
            if n + 1 < nb {
                r -= self.lower[n].tr_mul(&x.rows((n + 1) * b, b));
            }
            let xn = self.diag[n]
                .tr_solve_lower_triangular(&r)
                .expect("cholesky diagonal is nonsingular");
            x.rows_mut(n * b, b).copy_from(&xn);
        }
        x
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(rhs))
    }
}
