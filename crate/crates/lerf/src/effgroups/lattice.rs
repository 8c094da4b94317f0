//! Exact integer lattice arithmetic: column Hermite normal form with
//! coefficient tracking, Smith normal form with the left transform, and the
//! membership / solve / kernel operations built on them. Everything is
//! elementary column and row reduction over i64; instances stay small.

pub type Vector = Vec<i64>;

/// A column with its pivot position: the basis columns of a Hermite form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HnfBasis {
    pub dim: usize,
    /// (pivot row, column) with pivot rows strictly increasing and positive
    /// pivot entries; below-pivot entries of earlier columns reduced.
    pub columns: Vec<(usize, Vector)>,
}

fn first_nonzero(col: &[i64], from: usize) -> Option<usize> {
    (from..col.len()).find(|&i| col[i] != 0)
}

/// Column Hermite normal form of the lattice spanned by `cols` in Z^dim,
/// tracking an expression of each basis column in the input columns.
/// Returns (basis, coefficient columns) where basis column j equals
/// `sum_i cols[i] * coeffs[j][i]`, plus the kernel of the input columns.
pub fn column_hnf_full(cols: &[Vector], dim: usize) -> (HnfBasis, Vec<Vector>, Vec<Vector>) {
    let k = cols.len();
    let mut work: Vec<(Vector, Vector)> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| {
            assert_eq!(c.len(), dim, "column has wrong dimension");
            let mut coeff = vec![0i64; k];
            coeff[i] = 1;
            (c.clone(), coeff)
        })
        .collect();

    let mut basis: Vec<(usize, Vector, Vector)> = Vec::new();
    for row in 0..dim {
        // eliminate until at most one remaining column is supported at `row`
        loop {
            let mut hits: Vec<usize> = work
                .iter()
                .enumerate()
                .filter(|(_, (c, _))| first_nonzero(c, 0) == Some(row))
                .map(|(i, _)| i)
                .collect();
            if hits.len() <= 1 {
                break;
            }
            hits.sort_by_key(|&i| work[i].0[row].unsigned_abs());
            let (pivot_idx, rest) = (hits[0], hits[1..].to_vec());
            let pivot_val = work[pivot_idx].0[row];
            for j in rest {
                let q = work[j].0[row] / pivot_val;
                for r in 0..dim {
                    work[j].0[r] -= q * work[pivot_idx].0[r];
                }
                for r in 0..k {
                    work[j].1[r] -= q * work[pivot_idx].1[r];
                }
            }
        }
        if let Some(i) = work
            .iter()
            .position(|(c, _)| first_nonzero(c, 0) == Some(row))
        {
            let (mut c, mut t) = work.remove(i);
            if c[row] < 0 {
                c.iter_mut().for_each(|x| *x = -*x);
                t.iter_mut().for_each(|x| *x = -*x);
            }
            basis.push((row, c, t));
        }
    }

    // leftover columns are zero: their coefficients span the kernel
    let kernel: Vec<Vector> = work
        .iter()
        .filter(|(c, _)| c.iter().all(|&x| x == 0))
        .map(|(_, t)| t.clone())
        .collect();

    // back-reduce: entries of earlier columns at later pivot rows into
    // [0, pivot); columns are zero above their own pivot, so this leaves
    // pivots intact and makes the basis canonical
    for j in 0..basis.len() {
        let (row_j, col_j, coeff_j) = {
            let b = &basis[j];
            (b.0, b.1.clone(), b.2.clone())
        };
        let pivot = col_j[row_j];
        for i in 0..j {
            let q = basis[i].1[row_j].div_euclid(pivot);
            if q != 0 {
                for r in 0..dim {
                    basis[i].1[r] -= q * col_j[r];
                }
                for r in 0..k {
                    basis[i].2[r] -= q * coeff_j[r];
                }
            }
        }
    }

    let coeffs = basis.iter().map(|(_, _, t)| t.clone()).collect();
    let columns = basis.into_iter().map(|(r, c, _)| (r, c)).collect();
    (HnfBasis { dim, columns }, coeffs, kernel)
}

pub fn column_hnf(cols: &[Vector], dim: usize) -> HnfBasis {
    column_hnf_full(cols, dim).0
}

impl HnfBasis {
    /// Canonical residue of `v` modulo the lattice: at each pivot row the
    /// entry is floor-reduced into `[0, pivot)`. Two vectors have equal
    /// residues exactly when they differ by a lattice element.
    pub fn reduce(&self, v: &[i64]) -> Vector {
        assert_eq!(v.len(), self.dim);
        let mut out = v.to_vec();
        for (row, col) in &self.columns {
            let q = out[*row].div_euclid(col[*row]);
            if q != 0 {
                for r in 0..self.dim {
                    out[r] -= q * col[r];
                }
            }
        }
        out
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    /// Coefficients of `v` over the basis columns, when `v` is in the lattice.
    pub fn solve(&self, v: &[i64]) -> Option<Vector> {
        let mut rest = v.to_vec();
        let mut ys = Vec::with_capacity(self.columns.len());
        for (row, col) in &self.columns {
            if rest[*row] % col[*row] != 0 {
                return None;
            }
            let y = rest[*row] / col[*row];
            for r in 0..self.dim {
                rest[r] -= y * col[r];
            }
            ys.push(y);
        }
        if rest.iter().all(|&x| x == 0) {
            Some(ys)
        } else {
            None
        }
    }
}

/// Membership of `v` in the lattice spanned by `cols`.
pub fn lattice_contains(cols: &[Vector], dim: usize, v: &[i64]) -> bool {
    column_hnf(cols, dim).contains(v)
}

/// Express `v` as an integer combination of `cols`, if possible.
pub fn lattice_solve(cols: &[Vector], dim: usize, v: &[i64]) -> Option<Vector> {
    let (basis, coeffs, _) = column_hnf_full(cols, dim);
    let ys = basis.solve(v)?;
    let mut out = vec![0i64; cols.len()];
    for (y, coeff) in ys.iter().zip(coeffs.iter()) {
        for (o, c) in out.iter_mut().zip(coeff.iter()) {
            *o += y * c;
        }
    }
    Some(out)
}

/// Basis of `{ x : cols · x = 0 }`.
pub fn lattice_kernel(cols: &[Vector], dim: usize) -> Vec<Vector> {
    column_hnf_full(cols, dim).2
}

/// Smith normal form data for a row-major matrix: `left * a * right = diag`,
/// with the diagonal forming a divisibility chain. Only the left transform is
/// kept; it rewrites ambient coordinates into the cyclic decomposition.
#[derive(Debug, Clone)]
pub struct Smith {
    pub diag: Vec<i64>,
    pub left: Vec<Vector>,
}

pub fn smith_normal_form(a: &[Vector]) -> Smith {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut a: Vec<Vector> = a.to_vec();
    let mut left: Vec<Vector> = (0..m)
        .map(|i| {
            let mut row = vec![0i64; m];
            row[i] = 1;
            row
        })
        .collect();

    let steps = m.min(n);
    for t in 0..steps {
        loop {
            // locate the minimal nonzero entry in the remaining block
            let mut best: Option<(usize, usize)> = None;
            for i in t..m {
                for j in t..n {
                    if a[i][j] != 0
                        && best
                            .map(|(bi, bj)| a[i][j].unsigned_abs() < a[bi][bj].unsigned_abs())
                            .unwrap_or(true)
                    {
                        best = Some((i, j));
                    }
                }
            }
            let (pi, pj) = match best {
                Some(p) => p,
                None => return finish(a, left, t),
            };
            a.swap(t, pi);
            left.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }

            let mut dirty = false;
            for i in t + 1..m {
                let q = a[i][t].div_euclid(a[t][t]);
                if q != 0 {
                    for j in 0..n {
                        a[i][j] -= q * a[t][j];
                    }
                    for j in 0..m {
                        left[i][j] -= q * left[t][j];
                    }
                }
                if a[i][t] != 0 {
                    dirty = true;
                }
            }
            for j in t + 1..n {
                let q = a[t][j].div_euclid(a[t][t]);
                if q != 0 {
                    for row in a.iter_mut() {
                        let v = q * row[t];
                        row[j] -= v;
                    }
                }
                if a[t][j] != 0 {
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // divisibility: every lower-right entry must be divisible by the pivot
            let mut fixed = true;
            'scan: for i in t + 1..m {
                for j in t + 1..n {
                    if a[i][j] % a[t][t] != 0 {
                        for jj in 0..n {
                            a[t][jj] += a[i][jj];
                        }
                        for jj in 0..m {
                            left[t][jj] += left[i][jj];
                        }
                        fixed = false;
                        break 'scan;
                    }
                }
            }
            if fixed {
                break;
            }
        }
        if a[t][t] < 0 {
            for j in 0..n {
                a[t][j] = -a[t][j];
            }
            for j in 0..m {
                left[t][j] = -left[t][j];
            }
        }
    }
    finish(a, left, steps)
}

fn finish(a: Vec<Vector>, left: Vec<Vector>, rank_bound: usize) -> Smith {
    let m = a.len();
    let mut diag = Vec::with_capacity(m);
    for t in 0..m {
        if t < rank_bound && t < a[t].len() {
            diag.push(a[t][t].abs());
        } else {
            diag.push(0);
        }
    }
    Smith { diag, left }
}

/// Invariant factors of Z^dim / (lattice spanned by cols): the diagonal of
/// the Smith form padded with zeros for the free part. Entries equal to 1 are
/// dropped; zeros count the free rank.
pub fn quotient_invariants(cols: &[Vector], dim: usize) -> (usize, Vec<u64>) {
    if dim == 0 {
        return (0, Vec::new());
    }
    // rows of the matrix are ambient coordinates, columns the lattice gens
    let rows: Vec<Vector> = (0..dim)
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect();
    let smith = smith_normal_form(&rows);
    let mut torsion = Vec::new();
    let mut free = 0usize;
    for &d in &smith.diag {
        match d {
            0 => free += 1,
            1 => {}
            d => torsion.push(d as u64),
        }
    }
    (free, torsion)
}
