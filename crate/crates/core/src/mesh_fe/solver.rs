use std::sync::{Arc, Mutex, Once};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, Par, Side};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Sparse LU factorization.
    Direct,
    /// Jacobi-preconditioned BiCGSTAB.
    Iterative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Relative residual bound `‖Ax − b‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: SolverKind::Direct,
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

const CACHE_SLOTS: usize = 4;

struct CachedSymbolic<S> {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: S,
}

impl<S: Clone> CachedSymbolic<S> {
    fn lookup(cache: &mut Vec<Self>, a: &SparseMatrix, build: impl FnOnce() -> Result<S>) -> Result<S> {
        if let Some(hit) = cache
            .iter()
            .find(|c| c.row_ptr == a.row_ptr() && c.col_idx == a.col_idx())
        {
            return Ok(hit.symbolic.clone());
        }
        let symbolic = build()?;
        if cache.len() == CACHE_SLOTS {
            cache.remove(0);
        }
        cache.push(CachedSymbolic {
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
            symbolic: symbolic.clone(),
        });
        Ok(symbolic)
    }
}

/// Linear solver that reuses symbolic factorizations across calls with an
/// unchanged sparsity pattern.
pub struct LinearSolver {
    config: SolverConfig,
    cache: Mutex<Vec<CachedSymbolic<SymbolicLu<usize>>>>,
    ldlt_cache: Mutex<Vec<CachedSymbolic<Arc<SymbolicCholesky<usize>>>>>,
}

static SEQUENTIAL: Once = Once::new();

impl LinearSolver {
    pub fn new(config: SolverConfig) -> Self {
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
        LinearSolver {
            config,
            cache: Mutex::new(Vec::new()),
            ldlt_cache: Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn solve(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        Self::check_dims(a, b)?;
        if a.dim() == 0 {
            return Ok(Vec::new());
        }
        match self.config.kind {
            SolverKind::Direct => self.solve_direct(a, b),
            SolverKind::Iterative => bicgstab(a, b, self.config.tol, self.config.max_iter),
        }
    }

    fn check_dims(a: &SparseMatrix, b: &[f64]) -> Result<()> {
        if b.len() != a.dim() {
            return Err(Error::Dimension(format!(
                "rhs has {} entries for a {}x{} matrix",
                b.len(),
                a.dim(),
                a.dim()
            )));
        }
        Ok(())
    }

    /// Solve with a matrix known to be symmetric. The direct path uses a
    /// sparse LDLᵀ factorization without pivoting and falls back to LU when
    /// that factorization breaks down or misses the tolerance.
    pub fn solve_symmetric(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        Self::check_dims(a, b)?;
        if a.dim() == 0 {
            return Ok(Vec::new());
        }
        match self.config.kind {
            SolverKind::Direct => self.solve_ldlt(a, b).or_else(|_| self.solve_direct(a, b)),
            SolverKind::Iterative => bicgstab(a, b, self.config.tol, self.config.max_iter),
        }
    }

    fn symbolic_for(&self, a: &SparseMatrix) -> Result<SymbolicLu<usize>> {
        let mut cache = self.cache.lock().expect("solver cache poisoned");
        CachedSymbolic::lookup(&mut cache, a, || {
            let n = a.dim();
            // CSR arrays of A read as CSC describe Aᵀ; the transpose solve undoes it.
            let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
            SymbolicLu::try_new(sym).map_err(|e| Error::SolverFailure {
                reason: format!("symbolic factorization: {e:?}"),
                residual: f64::INFINITY,
            })
        })
    }

    fn solve_ldlt(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let symbolic = {
            let mut cache = self.ldlt_cache.lock().expect("solver cache poisoned");
            CachedSymbolic::lookup(&mut cache, a, || {
                factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, CholeskySymbolicParams::default())
                    .map(Arc::new)
                    .map_err(|e| Error::SolverFailure {
                        reason: format!("symbolic factorization: {e:?}"),
                        residual: f64::INFINITY,
                    })
            })?
        };
        let mat = SparseColMatRef::new(sym, a.values());
        let mut values = vec![0.0; symbolic.len_val()];
        let req = symbolic
            .factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default())
            .or(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let mut buf = MemBuffer::new(req);
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                mat,
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| Error::SolverFailure {
                reason: format!("LDLT factorization: {e:?}"),
                residual: f64::INFINITY,
            })?;
        let ldlt = LdltRef::new(&symbolic, &values);
        self.refine(a, b, |rhs| {
            let mut m = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
            ldlt.solve_in_place_with_conj(Conj::No, m.as_mut(), Par::Seq, MemStack::new(&mut buf));
            (0..n).map(|i| m[(i, 0)]).collect()
        })
    }

    fn solve_direct(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.dim();
        let symbolic = self.symbolic_for(a)?;
        let sym = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let at = SparseColMatRef::new(sym, a.values());
        let lu = Lu::try_new_with_symbolic(symbolic, at).map_err(|e| Error::SolverFailure {
            reason: format!("numeric factorization: {e:?}"),
            residual: f64::INFINITY,
        })?;
        self.refine(a, b, |rhs| {
            let mut m = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
            lu.solve_transpose_in_place_with_conj(Conj::No, m.as_mut());
            (0..n).map(|i| m[(i, 0)]).collect()
        })
    }

    fn refine(&self, a: &SparseMatrix, b: &[f64], mut solve: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
        let bnorm = norm(b);
        let mut x = solve(b);
        let mut res = relative_residual(a, &x, b, bnorm);
        // A couple of refinement sweeps recover accuracy on badly scaled systems.
        for _ in 0..3 {
            if res <= self.config.tol || !res.is_finite() {
                break;
            }
            let r: Vec<f64> = b.iter().zip(a.matvec(&x)).map(|(bi, ai)| bi - ai).collect();
            let dx = solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
            res = relative_residual(a, &x, b, bnorm);
        }
        if res.is_finite() && res <= self.config.tol {
            Ok(x)
        } else {
            Err(Error::SolverFailure {
                reason: "direct solve residual above tolerance".into(),
                residual: res,
            })
        }
    }
}

/// One-shot solve of `A x = b` under `config`.
pub fn solve_sparse(a: &SparseMatrix, b: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
    LinearSolver::new(config.clone()).solve(a, b)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.matvec(x);
    let r = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    if bnorm > 0.0 {
        r / bnorm
    } else {
        r
    }
}

fn bicgstab(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut res = 1.0;
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::SolverFailure {
                reason: "BiCGSTAB breakdown".into(),
                residual: res,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = a.matvec(&p_hat);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(Error::SolverFailure {
                reason: "BiCGSTAB breakdown".into(),
                residual: res,
            });
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let s_hat = precond(&s);
        let t = a.matvec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = relative_residual(a, &x, b, bnorm);
        if res <= tol {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure {
        reason: format!("BiCGSTAB did not converge in {max_iter} iterations"),
        residual: res,
    })
}
