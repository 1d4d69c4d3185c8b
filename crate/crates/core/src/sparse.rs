//! Minimal sparse symmetric matrix support: CSR storage, matrix-vector
//! products, a preconditioned conjugate-gradient solver (with optional
//! projection of the constant null space and optional pinned "active" rows),
//! and a masked Thomas solve for tridiagonal chains.
//!
//! The stiffness operators produced by the grid module are small
//! (at most ~10^5 nodes) M-matrices, so this hand-rolled kernel set is all
//! the linear algebra the crate needs.

/// Compressed sparse row matrix with `f64` entries.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from (row, col, value) triplets.
    /// Duplicate entries are summed; columns are sorted within each row.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet index out of range");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// y = A x restricted to rows/columns where `pinned[i]` is false;
    /// pinned entries of `x` are treated as zero and `y` is zero there.
    pub fn mul_vec_masked(&self, x: &[f64], pinned: &[bool], y: &mut [f64]) {
        for i in 0..self.n {
            if pinned[i] {
                y[i] = 0.0;
                continue;
            }
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if !pinned[j] {
                    acc += v * x[j];
                }
            }
            y[i] = acc;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if (v - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Neighbour indices of node `i` (off-diagonal pattern of row `i`).
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (cols, _) = self.row(i);
        cols.iter().copied().filter(move |&j| j != i)
    }

    /// Returns `Some((sub, diag, sup))` if the sparsity pattern is contained
    /// in the three central diagonals (an open chain).
    pub fn as_tridiagonal(&self) -> Option<Tridiagonal> {
        let n = self.n;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j + 1 == i {
                    sub[i] = v;
                } else if j == i {
                    diag[i] = v;
                } else if j == i + 1 {
                    sup[i] = v;
                } else if v != 0.0 {
                    return None;
                }
            }
        }
        Some(Tridiagonal { sub, diag, sup })
    }

    /// Returns the circular-chain view if the pattern couples only cyclic
    /// neighbours (a periodic grid): diagonal plus `next[i] = A[i, i+1 mod n]`.
    pub fn as_circular_tridiagonal(&self) -> Option<CircularTridiagonal> {
        let n = self.n;
        if n < 3 {
            return None;
        }
        let mut diag = vec![0.0; n];
        let mut next = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag[i] = v;
                } else if j == (i + 1) % n {
                    next[i] = v;
                } else if (j + 1) % n == i {
                    // symmetric partner, checked below
                } else if v != 0.0 {
                    return None;
                }
            }
        }
        Some(CircularTridiagonal { diag, next })
    }
}

/// Cyclic chain view: diagonal and the coupling to the next node (mod n).
#[derive(Debug, Clone)]
pub struct CircularTridiagonal {
    pub diag: Vec<f64>,
    pub next: Vec<f64>,
}

impl CircularTridiagonal {
    /// Solves the subsystem on the cyclic run `start, start+1, ...` of
    /// length `len < n`, with unknowns outside the run held at zero.
    pub fn solve_run(&self, start: usize, len: usize, rhs: &[f64], x: &mut [f64]) {
        let n = self.diag.len();
        debug_assert!(len < n);
        let idx = |k: usize| (start + k) % n;
        let mut c = vec![0.0; len];
        let mut d = vec![0.0; len];
        let mut denom = self.diag[idx(0)];
        c[0] = if len > 1 { self.next[idx(0)] / denom } else { 0.0 };
        d[0] = rhs[idx(0)] / denom;
        for k in 1..len {
            let i = idx(k);
            let sub = self.next[idx(k - 1)];
            denom = self.diag[i] - sub * c[k - 1];
            c[k] = if k + 1 < len { self.next[i] / denom } else { 0.0 };
            d[k] = (rhs[i] - sub * d[k - 1]) / denom;
        }
        x[idx(len - 1)] = d[len - 1];
        for k in (0..len - 1).rev() {
            x[idx(k)] = d[k] - c[k] * x[idx(k + 1)];
        }
    }
}

/// Three-diagonal view used for direct solves on profile grids.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    /// Solves the subsystem on the contiguous index run `lo..=hi` with the
    /// unknowns outside the run held at zero, writing into `x`.
    /// Standard Thomas algorithm; the runs produced by active-set solves on
    /// M-matrix chains are strictly diagonally dominant.
    pub fn solve_run(&self, lo: usize, hi: usize, rhs: &[f64], x: &mut [f64]) {
        let m = hi - lo + 1;
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut denom = self.diag[lo];
        c[0] = self.sup[lo] / denom;
        d[0] = rhs[lo] / denom;
        for k in 1..m {
            let i = lo + k;
            denom = self.diag[i] - self.sub[i] * c[k - 1];
            c[k] = self.sup[i] / denom;
            d[k] = (rhs[i] - self.sub[i] * d[k - 1]) / denom;
        }
        x[hi] = d[m - 1];
        for k in (0..m - 1).rev() {
            x[lo + k] = d[k] - c[k] * x[lo + k + 1];
        }
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Jacobi-preconditioned conjugate gradients for `A x = b` with `A`
/// symmetric positive (semi)definite.
///
/// * `pinned`: optional mask of rows forced to zero (active-set solves);
///   the solve then runs on the principal submatrix of the free rows.
/// * `warm`: optional starting iterate (pinned entries are zeroed).
/// * `deflate`: project the constant vector out of residual and search
///   direction every iteration. Required on closed manifolds where the
///   constants span the null space of `A`; `b` must be (numerically)
///   orthogonal to constants for the system to be consistent.
/// * `tol_abs`: absolute bound on the Euclidean residual norm.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    pinned: Option<&[bool]>,
    warm: Option<&[f64]>,
    deflate: bool,
    tol_abs: f64,
    max_iter: usize,
) -> (Vec<f64>, CgOutcome) {
    let n = a.dim();
    let all_free = vec![false; n];
    let pinned = pinned.unwrap_or(&all_free);
    let free_count = pinned.iter().filter(|&&p| !p).count();
    let mut x = match warm {
        Some(w) => (0..n).map(|i| if pinned[i] { 0.0 } else { w[i] }).collect(),
        None => vec![0.0; n],
    };
    if free_count == 0 {
        return (
            x,
            CgOutcome { converged: true, iterations: 0, residual_norm: 0.0 },
        );
    }

    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let mean_free = |v: &mut [f64]| {
        let mut s = 0.0;
        for i in 0..n {
            if !pinned[i] {
                s += v[i];
            }
        }
        let m = s / free_count as f64;
        for i in 0..n {
            if !pinned[i] {
                v[i] -= m;
            }
        }
    };

    let mut r: Vec<f64> = if warm.is_some() {
        let mut ax = vec![0.0; n];
        a.mul_vec_masked(&x, pinned, &mut ax);
        (0..n).map(|i| if pinned[i] { 0.0 } else { b[i] - ax[i] }).collect()
    } else {
        (0..n).map(|i| if pinned[i] { 0.0 } else { b[i] }).collect()
    };
    if deflate {
        mean_free(&mut r);
    }
    let norm = |v: &[f64]| v.iter().map(|&t| t * t).sum::<f64>().sqrt();
    let mut res_norm = norm(&r);
    if res_norm <= tol_abs {
        return (
            x,
            CgOutcome { converged: true, iterations: 0, residual_norm: res_norm },
        );
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    if deflate {
        mean_free(&mut z);
    }
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    for it in 1..=max_iter {
        iterations = it;
        a.mul_vec_masked(&p, pinned, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        if pap <= 0.0 {
            // Search direction fell into the null space; nothing left to do.
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if deflate {
            mean_free(&mut r);
        }
        res_norm = norm(&r);
        if res_norm <= tol_abs {
            return (
                x,
                CgOutcome { converged: true, iterations: it, residual_norm: res_norm },
            );
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        if deflate {
            mean_free(&mut z);
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    (
        x,
        CgOutcome { converged: res_norm <= tol_abs, iterations, residual_norm: res_norm },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_chain(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, 1.0));
            t.push((i + 1, i + 1, 1.0));
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        // ground the first node so the matrix is positive definite
        t.push((0, 0, 1.0));
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn pcg_solves_chain() {
        let n = 50;
        let a = laplacian_chain(n);
        assert!(a.is_symmetric(0.0));
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.17).sin()).collect();
        let b = a.mul_vec_alloc(&x_true);
        let (x, out) = pcg(&a, &b, None, None, false, 1e-12, 10 * n);
        assert!(out.converged);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn pcg_masked_matches_submatrix() {
        let n = 30;
        let a = laplacian_chain(n);
        let mut pinned = vec![false; n];
        pinned[4] = true;
        pinned[5] = true;
        pinned[20] = true;
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let (x, out) = pcg(&a, &b, Some(&pinned), None, false, 1e-13, 20 * n);
        assert!(out.converged);
        // residual on free rows only
        let mut ax = vec![0.0; n];
        a.mul_vec_masked(&x, &pinned, &mut ax);
        for i in 0..n {
            if !pinned[i] {
                assert!((ax[i] - b[i]).abs() < 1e-9);
            } else {
                assert_eq!(x[i], 0.0);
            }
        }
    }

    #[test]
    fn thomas_run_matches_cg() {
        let n = 40;
        let a = laplacian_chain(n);
        let tri = a.as_tridiagonal().expect("chain is tridiagonal");
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut pinned = vec![true; n];
        for i in 10..=25 {
            pinned[i] = false;
        }
        let mut x_dir = vec![0.0; n];
        tri.solve_run(10, 25, &b, &mut x_dir);
        let (x_cg, out) = pcg(&a, &b, Some(&pinned), None, false, 1e-13, 20 * n);
        assert!(out.converged);
        for i in 0..n {
            assert!((x_dir[i] - x_cg[i]).abs() < 1e-8, "node {i}");
        }
    }
}
