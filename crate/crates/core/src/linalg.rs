//! Symmetric positive-definite solvers: preconditioned conjugate gradients
//! over structured 5-point or generic sparse operators, and the Thomas
//! algorithm for tridiagonal systems.

use crate::error::{FlowError, Result};

/// A symmetric positive-definite linear operator.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

/// Five-point operator on an `nx` by `nz` cell grid.
///
/// Only the upper couplings are stored: `east[k]` couples cell `(i,j)` to
/// `(i+1,j)` and `north[k]` couples `(i,j)` to `(i,j+1)`. With `periodic_z`
/// the north coupling of the top layer wraps around to the bottom layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilMatrix {
    pub nx: usize,
    pub nz: usize,
    pub periodic_z: bool,
    pub diag: Vec<f64>,
    pub east: Vec<f64>,
    pub north: Vec<f64>,
}

impl StencilMatrix {
    pub fn zeros(nx: usize, nz: usize, periodic_z: bool) -> Self {
        let n = nx * nz;
        StencilMatrix {
            nx,
            nz,
            periodic_z,
            diag: vec![0.0; n],
            east: vec![0.0; n],
            north: vec![0.0; n],
        }
    }

    /// Index of the cell above `k`, if a north coupling exists.
    #[inline]
    fn up(&self, i: usize, j: usize) -> Option<usize> {
        if j + 1 < self.nz {
            Some((j + 1) * self.nx + i)
        } else if self.periodic_z && self.nz > 1 {
            Some(i)
        } else {
            None
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..self.nz {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                a[k][k] += self.diag[k];
                if i + 1 < self.nx {
                    a[k][k + 1] += self.east[k];
                    a[k + 1][k] += self.east[k];
                }
                if let Some(u) = self.up(i, j) {
                    a[k][u] += self.north[k];
                    a[u][k] += self.north[k];
                }
            }
        }
        a
    }
}

impl SpdOperator for StencilMatrix {
    fn dim(&self) -> usize {
        self.nx * self.nz
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.nx;
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = self.diag[k] * x[k];
        }
        for j in 0..self.nz {
            let row = j * nx;
            for i in 0..nx - 1 {
                let k = row + i;
                let c = self.east[k];
                y[k] += c * x[k + 1];
                y[k + 1] += c * x[k];
            }
            let upper = if j + 1 < self.nz {
                Some(row + nx)
            } else if self.periodic_z && self.nz > 1 {
                Some(0)
            } else {
                None
            };
            if let Some(up_row) = upper {
                for i in 0..nx {
                    let (k, u) = (row + i, up_row + i);
                    let c = self.north[k];
                    y[k] += c * x[u];
                    y[u] += c * x[k];
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }
}

/// Generic sparse symmetric matrix; stores the upper triangle row-compressed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrSymmetric {
    /// Builds from a dense symmetric matrix, keeping nonzeros with `col >= row`.
    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (r, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(FlowError::Dimension("matrix is not square".into()));
            }
            for c in r..n {
                if row[c] != a[c][r] {
                    return Err(FlowError::Dimension(format!("matrix not symmetric at ({r},{c})")));
                }
                if row[c] != 0.0 {
                    cols.push(c);
                    vals.push(row[c]);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(CsrSymmetric { n, row_ptr, cols, vals })
    }
}

impl SpdOperator for CsrSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (c, v) = (self.cols[p], self.vals[p]);
                y[r] += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let p = self.row_ptr[r];
                if p < self.row_ptr[r + 1] && self.cols[p] == r {
                    self.vals[p]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||`.
    pub relative_residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximate inverse applied once per conjugate-gradient iteration.
/// Must be symmetric positive definite.
pub trait Preconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]);
}

/// Inverse of the operator's diagonal.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &impl SpdOperator) -> Self {
        let inv_diag = a
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Jacobi { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        for ((zk, rk), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zk = rk * d;
        }
    }
}

/// Factored tridiagonal systems laid out along strided lines of a grid.
#[derive(Debug, Clone)]
struct LineFactors {
    starts: Vec<usize>,
    stride: usize,
    len: usize,
    /// Coupling of each entry to its predecessor on the line.
    lower: Vec<f64>,
    /// Thomas multipliers and inverse pivots, indexed like the unknowns.
    c: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl LineFactors {
    /// `coupling(k)` is the entry linking unknown `k` to `k + stride`.
    fn new(
        n: usize,
        starts: Vec<usize>,
        stride: usize,
        len: usize,
        diag: impl Fn(usize) -> f64,
        coupling: impl Fn(usize) -> f64,
    ) -> Result<Self> {
        let mut lower = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for &s in &starts {
            let mut prev_c = 0.0;
            for m in 0..len {
                let k = s + m * stride;
                let l = if m > 0 { coupling(k - stride) } else { 0.0 };
                let pivot = diag(k) - l * prev_c;
                if !(pivot > 0.0) {
                    return Err(FlowError::ZeroPivot(k));
                }
                lower[k] = l;
                inv_pivot[k] = 1.0 / pivot;
                c[k] = if m + 1 < len { coupling(k) / pivot } else { 0.0 };
                prev_c = c[k];
            }
        }
        Ok(LineFactors {
            starts,
            stride,
            len,
            lower,
            c,
            inv_pivot,
        })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        let st = self.stride;
        for &s in &self.starts {
            z[s] = r[s] * self.inv_pivot[s];
            for m in 1..self.len {
                let k = s + m * st;
                z[k] = (r[k] - self.lower[k] * z[k - st]) * self.inv_pivot[k];
            }
            for m in (0..self.len - 1).rev() {
                let k = s + m * st;
                z[k] -= self.c[k] * z[k + st];
            }
        }
    }
}

/// Two-level line preconditioner for non-periodic 5-point operators.
///
/// Exact tridiagonal solves along every grid line in the more strongly
/// coupled direction, plus a coarse correction that is exact on fields
/// constant along those lines. The two parts are added, so the result stays
/// symmetric positive definite. Anisotropic pressure systems on flat grids
/// converge in a few dozen iterations instead of thousands.
#[derive(Debug, Clone)]
pub struct LinePreconditioner {
    along_z: bool,
    nx: usize,
    nz: usize,
    lines: LineFactors,
    coarse: Option<LineFactors>,
}

impl LinePreconditioner {
    pub fn new(a: &StencilMatrix) -> Result<Self> {
        if a.periodic_z && a.nz > 1 {
            return Err(FlowError::Unsupported(
                "line preconditioner needs a non-periodic operator".into(),
            ));
        }
        let (nx, nz, n) = (a.nx, a.nz, a.dim());
        let strength = |v: &[f64]| v.iter().map(|c| c.abs()).sum::<f64>();
        let along_z = nz > 1 && (nx == 1 || strength(&a.north) >= strength(&a.east));
        let (lines, coarse) = if along_z {
            let lines = LineFactors::new(n, (0..nx).collect(), nx, nz, |k| a.diag[k], |k| a.north[k])?;
            let mut cd = vec![0.0; nx];
            let mut ce = vec![0.0; nx];
            for j in 0..nz {
                for i in 0..nx {
                    let k = j * nx + i;
                    cd[i] += a.diag[k] + if j + 1 < nz { 2.0 * a.north[k] } else { 0.0 };
                    ce[i] += a.east[k];
                }
            }
            let coarse = LineFactors::new(nx, vec![0], 1, nx, |i| cd[i], |i| ce[i])?;
            (lines, coarse)
        } else {
            let lines = LineFactors::new(n, (0..nz).map(|j| j * nx).collect(), 1, nx, |k| a.diag[k], |k| {
                a.east[k]
            })?;
            let mut cd = vec![0.0; nz];
            let mut cn = vec![0.0; nz];
            for j in 0..nz {
                for i in 0..nx {
                    let k = j * nx + i;
                    cd[j] += a.diag[k] + if i + 1 < nx { 2.0 * a.east[k] } else { 0.0 };
                    cn[j] += a.north[k];
                }
            }
            let coarse = LineFactors::new(nz, vec![0], 1, nz, |j| cd[j], |j| cn[j])?;
            (lines, coarse)
        };
        Ok(LinePreconditioner {
            along_z,
            nx,
            nz,
            lines,
            coarse: Some(coarse),
        })
    }

    /// Exact solves along every row, nothing else. Works with periodic `z`
    /// couplings, which it ignores; suits operators whose off-row part is
    /// small next to the diagonal.
    pub fn rows(a: &StencilMatrix) -> Result<Self> {
        let (nx, nz) = (a.nx, a.nz);
        let lines = LineFactors::new(a.dim(), (0..nz).map(|j| j * nx).collect(), 1, nx, |k| a.diag[k], |k| {
            a.east[k]
        })?;
        Ok(LinePreconditioner {
            along_z: false,
            nx,
            nz,
            lines,
            coarse: None,
        })
    }

    /// Whether the line solves run along `z` (columns) rather than `x` (rows).
    pub fn along_z(&self) -> bool {
        self.along_z
    }
}

impl Preconditioner for LinePreconditioner {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self.lines.solve(r, z);
        let Some(coarse) = &self.coarse else {
            return;
        };
        let m = if self.along_z { self.nx } else { self.nz };
        let (mut rc, mut zc) = (vec![0.0; m], vec![0.0; m]);
        let nx = self.nx;
        for j in 0..self.nz {
            for i in 0..nx {
                rc[if self.along_z { i } else { j }] += r[j * nx + i];
            }
        }
        coarse.solve(&rc, &mut zc);
        for j in 0..self.nz {
            for i in 0..nx {
                z[j * nx + i] += zc[if self.along_z { i } else { j }];
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub fn cg_solve(
    a: &impl SpdOperator,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    pcg_solve(a, &Jacobi::new(a), b, x0, rel_tol, max_iter, |_| {})
}

/// As [`cg_solve`], calling `observe` with every iterate (including `x0`).
pub fn cg_solve_observed(
    a: &impl SpdOperator,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
    observe: impl FnMut(&[f64]),
) -> Result<CgSolution> {
    pcg_solve(a, &Jacobi::new(a), b, x0, rel_tol, max_iter, observe)
}

/// Preconditioned conjugate gradients, stopping once `||b - A x|| <= rel_tol ||b||`.
pub fn pcg_solve(
    a: &impl SpdOperator,
    m: &impl Preconditioner,
    b: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n || x0.len() != n {
        return Err(FlowError::Dimension(format!(
            "operator of size {n}, rhs {}, guess {}",
            b.len(),
            x0.len()
        )));
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    observe(&x);

    let target = rel_tol * b_norm;
    let mut r_norm = dot(&r, &r).sqrt();
    if r_norm <= target {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: r_norm / b_norm,
        });
    }
    let mut z = vec![0.0; n];
    m.precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FlowError::NoConvergence {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        observe(&x);
        r_norm = dot(&r, &r).sqrt();
        if r_norm <= target {
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: r_norm / b_norm,
            });
        }
        m.precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(FlowError::NoConvergence {
        iterations: max_iter,
        residual: r_norm / b_norm,
    })
}

/// Thomas algorithm. `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]`
/// unused), `upper[i]` multiplies `x[i+1]` (`upper[n-1]` unused).
pub fn tridiag_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(FlowError::Dimension("tridiagonal bands must share one length".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(FlowError::ZeroPivot(0));
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 {
            return Err(FlowError::ZeroPivot(i));
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
