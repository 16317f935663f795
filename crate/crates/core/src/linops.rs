//! Matrix-calculus primitives for differentiating functions of symmetric
//! matrices.
//!
//! Conventions: `vec` stacks columns, `v` (vech) stacks the lower triangle
//! including the diagonal column by column. Positions are 0-based
//! `(row, col)` pairs internally.
//!
//! The structural matrices (commutation, symmetrization, duplication,
//! selection) are returned densely only up to [`MAX_DENSE_DIM`]; for larger
//! `p` the [`StructuralOp`] type applies the same maps to vectors without
//! materializing `p^2 x p^2` storage.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest `p` for which structural `p^2 x p^2` matrices are materialized.
pub const MAX_DENSE_DIM: usize = 32;

/// Relative asymmetry accepted (and then removed) when wrapping a computed
/// matrix as symmetric.
const SYMMETRY_SLACK: f64 = 1e-9;

/// A dense symmetric matrix. Entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, which must be exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let asym = max_asymmetry(&m);
        if asym != 0.0 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(SymMatrix(m))
    }

    /// Replaces `m` by `(m + m^T) / 2`; any square input is accepted.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        Ok(SymMatrix(symmetric_part(m)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry (up to rounding, which is then removed) and
    /// positive definiteness via a Cholesky factorization.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = max_asymmetry(&m);
        if asym > SYMMETRY_SLACK * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let m = if asym == 0.0 { m } else { symmetric_part(&m) };
        if !m.iter().all(|x| x.is_finite()) || Cholesky::new(m.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(SpdMatrix(m))
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn cholesky(&self) -> Cholesky<f64, Dyn> {
        Cholesky::new(self.0.clone()).expect("validated positive definite")
    }

    pub fn inverse(&self) -> SpdMatrix {
        let inv = self.cholesky().inverse();
        SpdMatrix(symmetric_part(&inv))
    }

    pub fn log_det(&self) -> f64 {
        let l = self.cholesky();
        2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Ratio of the largest to the smallest eigenvalue.
    pub fn condition_number(&self) -> f64 {
        let eig = SymmetricEigen::new(self.0.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        max / min
    }

    /// Symmetric square root by eigendecomposition. Diagonal input takes the
    /// entrywise root exactly.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let p = self.dim();
        let diagonal = (0..p).all(|j| (0..p).all(|i| i == j || self.0[(i, j)] == 0.0));
        if diagonal {
            return DMatrix::from_diagonal(&self.0.diagonal().map(f64::sqrt));
        }
        let eig = SymmetricEigen::new(self.0.clone());
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let q = &eig.eigenvectors;
        symmetric_part(&(q * DMatrix::from_diagonal(&roots) * q.transpose()))
    }
}

impl From<SpdMatrix> for SymMatrix {
    fn from(m: SpdMatrix) -> Self {
        SymMatrix(m.0)
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Argument("empty matrix".into()));
    }
    Ok(())
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..p {
        for i in (j + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + m^T) / 2`.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ordered set of matrix positions, strictly increasing in the column-major
/// key `col * p + row`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionSet {
    p: usize,
    positions: Vec<(usize, usize)>,
}

impl PositionSet {
    pub fn new(p: usize, positions: Vec<(usize, usize)>) -> Result<Self> {
        for &(i, j) in &positions {
            if i >= p || j >= p {
                return Err(Error::InvalidPositions(format!(
                    "position ({i}, {j}) outside a {p}x{p} matrix"
                )));
            }
        }
        for w in positions.windows(2) {
            if vec_index(w[0], p) >= vec_index(w[1], p) {
                return Err(Error::InvalidPositions(format!(
                    "positions {:?} and {:?} are not strictly increasing",
                    w[0], w[1]
                )));
            }
        }
        Ok(PositionSet { p, positions })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(p: usize, mut positions: Vec<(usize, usize)>) -> Result<Self> {
        positions.sort_by_key(|&pos| vec_index(pos, p));
        positions.dedup();
        PositionSet::new(p, positions)
    }

    /// The `m` lower-triangle-with-diagonal positions.
    pub fn lower_triangle(p: usize) -> Self {
        let positions = (0..p).flat_map(|j| (j..p).map(move |i| (i, j))).collect();
        PositionSet { p, positions }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.positions.iter().copied()
    }
}

/// Index of position `(i, j)` in `vec` of a `p x p` matrix.
#[inline]
pub fn vec_index((i, j): (usize, usize), p: usize) -> usize {
    j * p + i
}

/// Index of lower-triangle position `(i, j)`, `i >= j`, in `v(A)`.
#[inline]
pub fn vech_index((i, j): (usize, usize), p: usize) -> usize {
    debug_assert!(i >= j);
    j * p + i - j * (j + 1) / 2
}

/// Column-major stacking.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn mat(v: &[f64], p: usize) -> Result<DMatrix<f64>> {
    if v.len() != p * p {
        return Err(Error::Dimension {
            expected: p * p,
            actual: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(p, p, v))
}

/// Lower triangle (with diagonal) stacked column by column.
pub fn vech(a: &DMatrix<f64>) -> DVector<f64> {
    let p = a.nrows();
    DVector::from_iterator(p * (p + 1) / 2, (0..p).flat_map(|j| (j..p).map(move |i| a[(i, j)])))
}

/// Symmetric matrix with lower triangle `v`.
pub fn unvech(v: &[f64], p: usize) -> Result<DMatrix<f64>> {
    let m = p * (p + 1) / 2;
    if v.len() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: v.len(),
        });
    }
    let mut a = DMatrix::zeros(p, p);
    let mut k = 0;
    for j in 0..p {
        for i in j..p {
            a[(i, j)] = v[k];
            a[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(a)
}

/// Kronecker product: block `(i, j)` equals `a[(i, j)] * b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

fn dense_guard(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    if p > MAX_DENSE_DIM {
        return Err(Error::TooLargeForDense {
            p,
            limit: MAX_DENSE_DIM,
        });
    }
    Ok(())
}

/// `K_p`, with `K_p vec(A) = vec(A^T)`.
pub fn commutation_matrix(p: usize) -> Result<DMatrix<f64>> {
    dense_guard(p)?;
    let mut k = DMatrix::zeros(p * p, p * p);
    for j in 0..p {
        for i in 0..p {
            k[(vec_index((j, i), p), vec_index((i, j), p))] = 1.0;
        }
    }
    Ok(k)
}

/// `M_p = (I + K_p) / 2`.
pub fn symmetrization_matrix(p: usize) -> Result<DMatrix<f64>> {
    let k = commutation_matrix(p)?;
    Ok((DMatrix::identity(p * p, p * p) + k) * 0.5)
}

/// Duplication matrix `D_p` together with its Moore-Penrose inverse.
pub fn duplication_matrix(p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    dense_guard(p)?;
    let m = p * (p + 1) / 2;
    let mut d = DMatrix::zeros(p * p, m);
    let mut d_pinv = DMatrix::zeros(m, p * p);
    for (k, (i, j)) in PositionSet::lower_triangle(p).iter().enumerate() {
        d[(vec_index((i, j), p), k)] = 1.0;
        d[(vec_index((j, i), p), k)] = 1.0;
        if i == j {
            d_pinv[(k, vec_index((i, i), p))] = 1.0;
        } else {
            d_pinv[(k, vec_index((i, j), p))] = 0.5;
            d_pinv[(k, vec_index((j, i), p))] = 0.5;
        }
    }
    Ok((d, d_pinv))
}

/// `Q_Z`: row `k` holds a single 1 in the `vec` column of the `k`-th
/// position of `z`.
pub fn selection_matrix(z: &PositionSet) -> Result<DMatrix<f64>> {
    let p = z.dim();
    dense_guard(p)?;
    let mut q = DMatrix::zeros(z.len(), p * p);
    for (k, pos) in z.iter().enumerate() {
        q[(k, vec_index(pos, p))] = 1.0;
    }
    Ok(q)
}

/// `Gamma^T (V kron V) Gamma` for `Gamma = D_p Q~_Z^T`, where `Z` lists
/// lower-triangle positions. Entry `(a, b)` is `tr(E_a V E_b V)` with `E_a`
/// the symmetric unit matrix of position `a`; computed without forming any
/// `p^2`-sized object.
pub fn duplication_gram(v: &DMatrix<f64>, z: &[(usize, usize)]) -> DMatrix<f64> {
    fn terms((i, j): (usize, usize)) -> ([(usize, usize); 2], usize) {
        if i == j {
            ([(i, i), (i, i)], 1)
        } else {
            ([(i, j), (j, i)], 2)
        }
    }
    let r = z.len();
    let mut g = DMatrix::zeros(r, r);
    for a in 0..r {
        let (ta, na) = terms(z[a]);
        for b in a..r {
            let (tb, nb) = terms(z[b]);
            let mut acc = 0.0;
            for &(r1, s1) in &ta[..na] {
                for &(t1, u1) in &tb[..nb] {
                    acc += v[(s1, t1)] * v[(u1, r1)];
                }
            }
            g[(a, b)] = acc;
            g[(b, a)] = acc;
        }
    }
    g
}

/// `Gamma^T vec(R)` for `Gamma = D_p Q~_Z^T`: `R_ij + R_ji` off the
/// diagonal, `R_ii` on it.
pub fn duplication_project(r: &DMatrix<f64>, z: &[(usize, usize)]) -> DVector<f64> {
    DVector::from_iterator(
        z.len(),
        z.iter()
            .map(|&(i, j)| if i == j { r[(i, i)] } else { r[(i, j)] + r[(j, i)] }),
    )
}

/// Matrix-free forms of the structural matrices, valid for any `p`.
#[derive(Debug, Clone, PartialEq)]
pub enum StructuralOp {
    Commutation(usize),
    Symmetrization(usize),
    Duplication(usize),
    DuplicationPinv(usize),
    Selection(PositionSet),
}

impl StructuralOp {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            StructuralOp::Commutation(p) | StructuralOp::Symmetrization(p) => (p * p, p * p),
            StructuralOp::Duplication(p) => (p * p, p * (p + 1) / 2),
            StructuralOp::DuplicationPinv(p) => (p * (p + 1) / 2, p * p),
            StructuralOp::Selection(z) => (z.len(), z.dim() * z.dim()),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (rows, cols) = self.shape();
        if x.len() != cols {
            return Err(Error::Dimension {
                expected: cols,
                actual: x.len(),
            });
        }
        let out = match self {
            StructuralOp::Commutation(p) => {
                let a = mat(x.as_slice(), *p)?;
                vec(&a.transpose())
            }
            StructuralOp::Symmetrization(p) => {
                let a = mat(x.as_slice(), *p)?;
                vec(&symmetric_part(&a))
            }
            StructuralOp::Duplication(p) => vec(&unvech(x.as_slice(), *p)?),
            StructuralOp::DuplicationPinv(p) => {
                let a = mat(x.as_slice(), *p)?;
                vech(&symmetric_part(&a))
            }
            StructuralOp::Selection(z) => {
                let p = z.dim();
                DVector::from_iterator(z.len(), z.iter().map(|pos| x[vec_index(pos, p)]))
            }
        };
        debug_assert_eq!(out.len(), rows);
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match self {
            StructuralOp::Commutation(p) => commutation_matrix(*p),
            StructuralOp::Symmetrization(p) => symmetrization_matrix(*p),
            StructuralOp::Duplication(p) => Ok(duplication_matrix(*p)?.0),
            StructuralOp::DuplicationPinv(p) => Ok(duplication_matrix(*p)?.1),
            StructuralOp::Selection(z) => selection_matrix(z),
        }
    }
}
