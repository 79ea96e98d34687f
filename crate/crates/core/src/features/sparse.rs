//! Compressed sparse row storage.

use serde::{Deserialize, Serialize};

/// Row-major sparse matrix. Column indices within a row are strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Entries are sorted, zero
    /// values dropped, and duplicate columns summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = indices.len();
            for (c, v) in row {
                assert!((c as usize) < n_cols, "column {c} out of range {n_cols}");
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            // Drop explicit zeros (including ones produced by summing).
            let mut w = start;
            for r in start..indices.len() {
                if values[r] != 0.0 {
                    indices[w] = indices[r];
                    values[w] = values[r];
                    w += 1;
                }
            }
            indices.truncate(w);
            values.truncate(w);
            indptr.push(indices.len());
        }
        SparseMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        SparseMatrix::from_rows(
            n_cols,
            rows.iter()
                .map(|r| {
                    assert_eq!(r.len(), n_cols, "ragged dense input");
                    r.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(c, &v)| (c as u32, v))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_values_mut(&mut self, i: usize) -> &mut [f64] {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        &mut self.values[a..b]
    }

    /// Value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&(j as u32)) {
            Ok(k) => val[k],
            Err(_) => 0.0,
        }
    }

    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&c, &v)| v * w[c as usize]).sum()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `out += alpha * row_i`.
    pub fn add_row_to(&self, i: usize, alpha: f64, out: &mut [f64]) {
        let (idx, val) = self.row(i);
        for (&c, &v) in idx.iter().zip(val) {
            out[c as usize] += alpha * v;
        }
    }

    /// Submatrix with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(|&r| self.indptr[r + 1] - self.indptr[r]).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for &r in rows {
            let (idx, val) = self.row(r);
            indices.extend_from_slice(idx);
            values.extend_from_slice(val);
            indptr.push(indices.len());
        }
        SparseMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            indptr,
            indices,
            values,
        }
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, u32, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn has_non_finite(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }
}

/// Column-major copy of a matrix with each column's entries sorted by value.
/// Used by the threshold searches of the tree-based learners.
#[derive(Clone, Debug)]
pub struct SortedColumns {
    n_rows: usize,
    colptr: Vec<usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl SortedColumns {
    pub fn new(m: &SparseMatrix) -> Self {
        let mut counts = vec![0usize; m.n_cols() + 1];
        for &c in &m.indices {
            counts[c as usize + 1] += 1;
        }
        for j in 0..m.n_cols() {
            counts[j + 1] += counts[j];
        }
        let colptr = counts.clone();
        let mut next = counts;
        let mut rows = vec![0u32; m.nnz()];
        let mut values = vec![0.0; m.nnz()];
        for (i, c, v) in m.triplets() {
            let slot = &mut next[c as usize];
            rows[*slot] = i as u32;
            values[*slot] = v;
            *slot += 1;
        }
        for j in 0..m.n_cols() {
            let (a, b) = (colptr[j], colptr[j + 1]);
            let mut pairs: Vec<(f64, u32)> =
                values[a..b].iter().copied().zip(rows[a..b].iter().copied()).collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for (k, (v, r)) in pairs.into_iter().enumerate() {
                values[a + k] = v;
                rows[a + k] = r;
            }
        }
        SortedColumns {
            n_rows: m.n_rows(),
            colptr,
            rows,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.colptr.len() - 1
    }

    /// Entries of column `j` as `(rows, values)`, ascending by value.
    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.colptr[j], self.colptr[j + 1]);
        (&self.rows[a..b], &self.values[a..b])
    }
}
