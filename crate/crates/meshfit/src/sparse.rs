//! Minimal sparse CSR matrix and a Jacobi-preconditioned conjugate-gradient
//! solver for the symmetric positive-definite systems this crate assembles.

use std::io::Write;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &mut Vec<(usize, usize, f64)>,
    ) -> CsrMatrix {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut columns = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        let mut row = 0usize;
        for &(r, c, v) in triplets.iter() {
            debug_assert!(r < rows && c < cols);
            while row < r {
                offsets.push(columns.len());
                row += 1;
            }
            let row_start = offsets[row];
            if columns.len() > row_start && *columns.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                columns.push(c);
                values.push(v);
            }
        }
        while row < rows {
            offsets.push(columns.len());
            row += 1;
        }
        CsrMatrix {
            rows,
            cols,
            offsets,
            columns,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[row]..self.offsets[row + 1];
        self.columns[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&c, &v)| (c, v))
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for (c, v) in self.row_entries(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    /// y += A^T x
    pub fn add_transpose_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row_entries(r) {
                y[c] += v * xr;
            }
        }
    }

    /// Column sums of squared entries, i.e. diag(A^T A).
    pub fn column_squared_norms(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                d[c] += v * v;
            }
        }
        d
    }

    /// Dump in Matrix Market coordinate format, for debugging.
    pub fn write_matrix_market(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Symmetric positive-definite linear operator for CG.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal of A, for the Jacobi preconditioner.
    fn diagonal(&self) -> Vec<f64>;
}

impl SpdOperator for CsrMatrix {
    fn dim(&self) -> usize {
        assert_eq!(self.rows, self.cols);
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows];
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                if c == r {
                    d[r] += v;
                }
            }
        }
        d
    }
}

/// Normal-equations operator `A^T A + diag(extra)` built from a rectangular
/// CSR `A`, applied without forming the product explicitly.
pub struct NormalEquations<'a> {
    pub matrix: &'a CsrMatrix,
    pub extra_diagonal: Vec<f64>,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a> NormalEquations<'a> {
    pub fn new(matrix: &'a CsrMatrix, extra_diagonal: Vec<f64>) -> NormalEquations<'a> {
        assert_eq!(extra_diagonal.len(), matrix.cols());
        let scratch = std::cell::RefCell::new(vec![0.0; matrix.rows()]);
        NormalEquations {
            matrix,
            extra_diagonal,
            scratch,
        }
    }
}

impl SpdOperator for NormalEquations<'_> {
    fn dim(&self) -> usize {
        self.matrix.cols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = self.scratch.borrow_mut();
        self.matrix.mul_vec(x, &mut tmp);
        y.fill(0.0);
        self.matrix.add_transpose_mul_vec(&tmp, y);
        for (yi, (&xi, &di)) in y.iter_mut().zip(x.iter().zip(&self.extra_diagonal)) {
            *yi += di * xi;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.matrix.column_squared_norms();
        for (di, &e) in d.iter_mut().zip(&self.extra_diagonal) {
            *di += e;
        }
        d
    }
}

/// Jacobi-preconditioned conjugate gradients. Converges when the residual
/// norm drops below `tolerance * ||b||`; errors if `max_iterations` is
/// exhausted first.
pub fn conjugate_gradient(
    op: &impl SpdOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let threshold = tolerance * b_norm;

    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n);
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    for _ in 0..max_iterations {
        if norm(&r) <= threshold {
            return Ok(x);
        }
        op.apply(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 {
            // loss of positive definiteness (numerically singular system)
            break;
        }
        let alpha = rz / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = norm(&r) / b_norm;
    if residual <= tolerance {
        Ok(x)
    } else {
        Err(Error::SolverDiverged {
            tolerance,
            residual,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_duplicates() {
        let mut t = vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0), (0, 1, -1.0)];
        let m = CsrMatrix::from_triplets(2, 2, &mut t);
        assert_eq!(m.nnz(), 3);
        let mut y = vec![0.0; 2];
        m.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![2.0, 4.0]);
    }

    #[test]
    fn cg_solves_small_spd() {
        // A = [[4,1],[1,3]], b = [1,2]; exact x = [1/11, 7/11]
        let mut t = vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)];
        let a = CsrMatrix::from_triplets(2, 2, &mut t);
        let x = conjugate_gradient(&a, &[1.0, 2.0], None, 1e-14, 100).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn normal_equations_match_explicit_product() {
        // A is 3x2
        let mut t = vec![
            (0, 0, 1.0),
            (0, 1, 2.0),
            (1, 0, -1.0),
            (2, 1, 3.0),
        ];
        let a = CsrMatrix::from_triplets(3, 2, &mut t);
        let op = NormalEquations::new(&a, vec![0.5, 0.25]);
        let x = [2.0, -1.0];
        let mut y = vec![0.0; 2];
        op.apply(&x, &mut y);
        // A^T A = [[2,2],[2,13]]; plus diag(0.5,0.25)
        assert!((y[0] - (2.5 * 2.0 + 2.0 * -1.0)).abs() < 1e-14);
        assert!((y[1] - (2.0 * 2.0 + 13.25 * -1.0)).abs() < 1e-14);
        let d = op.diagonal();
        assert_eq!(d, vec![2.5, 13.25]);
    }

    #[test]
    fn matrix_market_dump() {
        let mut t = vec![(0, 0, 1.0), (1, 0, 2.0)];
        let m = CsrMatrix::from_triplets(2, 1, &mut t);
        let mut out = Vec::new();
        m.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("%%MatrixMarket"));
        assert!(text.contains("2 1 2"));
    }
}
