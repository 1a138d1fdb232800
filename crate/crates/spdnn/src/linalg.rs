//! Small dense linear algebra and Voigt-convention utilities.
//!
//! Stress and strain live in Voigt vectors of dimension 1 (uniaxial) or 3
//! (plane stress `[xx, yy, xy]`). Shear strain is stored as engineering shear
//! `2·ε₁₂` so that `σ·ε` is work-conjugate.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub mod band;

/// Strain or stress in Voigt convention, dimension 1 or 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Voigt {
    dim: usize,
    data: [f64; 3],
}

impl Voigt {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 1 || dim == 3, "Voigt dim must be 1 or 3");
        Voigt { dim, data: [0.0; 3] }
    }

    pub fn scalar(x: f64) -> Self {
        Voigt { dim: 1, data: [x, 0.0, 0.0] }
    }

    pub fn plane(xx: f64, yy: f64, xy: f64) -> Self {
        Voigt { dim: 3, data: [xx, yy, xy] }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        assert!(v.len() == 1 || v.len() == 3);
        let mut data = [0.0; 3];
        data[..v.len()].copy_from_slice(v);
        Voigt { dim: v.len(), data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Voigt) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &Voigt) -> Voigt {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (o, b) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &Voigt) -> Voigt {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (o, b) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *o -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Voigt {
        let mut out = *self;
        for o in out.as_mut_slice() {
            *o *= s;
        }
        out
    }

    /// `self + s * other`, used by blend updates so that `s = 0` is exact.
    pub fn add_scaled(&self, s: f64, other: &Voigt) -> Voigt {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (o, b) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *o += s * b;
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        debug_assert!(i < self.dim);
        self.data[i] = v;
    }
}

/// Sparsity layout of a packed lower-triangular tangent factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CholLayout {
    /// 1×1 factor, one entry.
    Dim1,
    /// Orthotropic plane stress: nonzeros at (0,0), (1,0), (1,1), (2,2).
    Orthotropic,
    /// Full lower triangle of a 3×3 factor, six entries column-major by rows:
    /// (0,0), (1,0), (1,1), (2,0), (2,1), (2,2).
    FullLower,
}

impl CholLayout {
    pub fn entry_count(&self) -> usize {
        match self {
            CholLayout::Dim1 => 1,
            CholLayout::Orthotropic => 4,
            CholLayout::FullLower => 6,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CholLayout::Dim1 => 1,
            CholLayout::Orthotropic | CholLayout::FullLower => 3,
        }
    }

    /// (row, col) position of each packed entry.
    pub fn positions(&self) -> &'static [(usize, usize)] {
        match self {
            CholLayout::Dim1 => &[(0, 0)],
            CholLayout::Orthotropic => &[(0, 0), (1, 0), (1, 1), (2, 2)],
            CholLayout::FullLower => &[(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)],
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "dim1" => Ok(CholLayout::Dim1),
            "orthotropic" => Ok(CholLayout::Orthotropic),
            "full-lower" => Ok(CholLayout::FullLower),
            other => Err(Error::Config(format!("unknown Cholesky layout `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CholLayout::Dim1 => "dim1",
            CholLayout::Orthotropic => "orthotropic",
            CholLayout::FullLower => "full-lower",
        }
    }
}

/// Packed lower-triangular factor with a declared sparsity layout.
///
/// No sign constraint is placed on the diagonal: `L Lᵀ` is positive
/// semidefinite for any entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerTri {
    layout: CholLayout,
    entries: [f64; 6],
}

/// Builds a factor from packed entries; errors when the count does not match
/// the layout.
pub fn chol_assemble(entries: &[f64], layout: CholLayout) -> Result<LowerTri> {
    if entries.len() != layout.entry_count() {
        return Err(Error::InvalidArgument(format!(
            "layout {} expects {} entries, got {}",
            layout.name(),
            layout.entry_count(),
            entries.len()
        )));
    }
    let mut packed = [0.0; 6];
    packed[..entries.len()].copy_from_slice(entries);
    Ok(LowerTri { layout, entries: packed })
}

impl LowerTri {
    pub fn layout(&self) -> CholLayout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries[..self.layout.entry_count()]
    }

    /// Dense `dim×dim` matrix with zeros outside the layout.
    pub fn to_dense(&self) -> SmallMat {
        let d = self.dim();
        let mut m = SmallMat::zeros(d);
        for (k, &(i, j)) in self.layout.positions().iter().enumerate() {
            m.set(i, j, self.entries[k]);
        }
        m
    }

    /// `L (Lᵀ v)` without forming `L Lᵀ`.
    pub fn spd_apply(&self, v: &Voigt) -> Result<Voigt> {
        if v.dim() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch: factor dim {} vs vector dim {}",
                self.dim(),
                v.dim()
            )));
        }
        let d = self.dim();
        let l = self.to_dense();
        // w = Lᵀ v
        let mut w = [0.0; 3];
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                s += l.get(i, j) * v.get(i);
            }
            w[j] = s;
        }
        // out = L w
        let mut out = Voigt::zeros(d);
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += l.get(i, j) * w[j];
            }
            out.set(i, s);
        }
        Ok(out)
    }

    /// Dense `L Lᵀ`.
    pub fn gram(&self) -> SmallMat {
        let d = self.dim();
        let l = self.to_dense();
        let mut h = SmallMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += l.get(i, k) * l.get(j, k);
                }
                h.set(i, j, s);
            }
        }
        h
    }
}

/// Applies `L Lᵀ` to a Voigt vector. Thin wrapper kept for call-site clarity.
pub fn spd_apply(l: &LowerTri, v: &Voigt) -> Result<Voigt> {
    l.spd_apply(v)
}

/// Dense row-major matrix of dimension at most 3, used for material tangents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat {
    dim: usize,
    a: [f64; 9],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= 3);
        SmallMat { dim, a: [0.0; 9] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SmallMat::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = SmallMat::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim);
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.a[i * 3 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.a[i * 3 + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * 3 + j] += v;
    }

    pub fn matvec(&self, v: &Voigt) -> Voigt {
        assert_eq!(self.dim, v.dim());
        let mut out = Voigt::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.get(i, j) * v.get(j);
            }
            out.set(i, s);
        }
        out
    }

    /// `Aᵀ v`.
    pub fn matvec_t(&self, v: &Voigt) -> Voigt {
        assert_eq!(self.dim, v.dim());
        let mut out = Voigt::zeros(self.dim);
        for j in 0..self.dim {
            let mut s = 0.0;
            for i in 0..self.dim {
                s += self.get(i, j) * v.get(i);
            }
            out.set(j, s);
        }
        out
    }

    pub fn scale(&self, s: f64) -> SmallMat {
        let mut out = *self;
        for v in out.a.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (o, b) in out.a.iter_mut().zip(other.a.iter()) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &SmallMat) -> SmallMat {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (o, b) in out.a.iter_mut().zip(other.a.iter()) {
            *o -= b;
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j) * self.get(i, j);
            }
        }
        s.sqrt()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }
}

/// Solves `A x = b` for square nonsingular `A`, or the least-squares problem
/// for tall full-column-rank `A`.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "solve_dense: {}x{} matrix with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.nrows() == a.ncols() {
        let lu = a.clone().full_piv_lu();
        match lu.solve(b) {
            Some(x) => Ok(x),
            None => {
                let svd = a.clone().svd(false, false);
                let smax = svd.singular_values.max();
                let smin = svd.singular_values.min();
                let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
                Err(Error::Solver(format!(
                    "singular square system (condition estimate {cond:.3e})"
                )))
            }
        }
    } else if a.nrows() > a.ncols() {
        lstsq(a, b)
    } else {
        Err(Error::InvalidArgument(
            "solve_dense: underdetermined systems are not supported".into(),
        ))
    }
}

/// Least-squares solution of a tall system via thin QR.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let diag_max = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let tol = 1e-12 * diag_max.max(1.0);
    let rank = (0..r.ncols()).filter(|&i| r[(i, i)].abs() > tol).count();
    if rank < a.ncols() {
        return Err(Error::Solver(format!(
            "rank-deficient least squares: rank {} < {} columns",
            rank,
            a.ncols()
        )));
    }
    let rhs = qr.q().transpose() * b;
    r.solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Solver("least-squares solve failed".into()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_eig_min(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("sym_eig_min: matrix not square".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("sym_eig_min: non-finite entries".into()));
    }
    // Symmetrize to guard against round-off asymmetry in assembled tangents.
    let sym = (m + m.transpose()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    Ok(eig.eigenvalues.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn chol_assemble_dim1() {
        let l = chol_assemble(&[2.0], CholLayout::Dim1).unwrap();
        assert_eq!(l.to_dense().get(0, 0), 2.0);
    }

    #[test]
    fn chol_assemble_identity_orthotropic() {
        let l = chol_assemble(&[1.0, 0.0, 1.0, 1.0], CholLayout::Orthotropic).unwrap();
        let d = l.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn chol_assemble_placement() {
        let l = chol_assemble(&[1.0, 0.5, 1.0, 2.0], CholLayout::Orthotropic).unwrap();
        let d = l.to_dense();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(1, 0), 0.5);
        assert_eq!(d.get(1, 1), 1.0);
        assert_eq!(d.get(2, 2), 2.0);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(2, 0), 0.0);
    }

    #[test]
    fn chol_assemble_wrong_count() {
        assert!(chol_assemble(&[1.0, 2.0], CholLayout::Orthotropic).is_err());
        assert!(chol_assemble(&[], CholLayout::Dim1).is_err());
    }

    #[test]
    fn chol_roundtrip_entries() {
        let entries = [1.0, -0.5, 0.0, 2.5];
        let l = chol_assemble(&entries, CholLayout::Orthotropic).unwrap();
        assert_eq!(l.entries(), &entries);
    }

    #[test]
    fn spd_apply_1d_square() {
        let l = chol_assemble(&[3.0], CholLayout::Dim1).unwrap();
        let out = spd_apply(&l, &Voigt::scalar(1.0)).unwrap();
        assert_eq!(out.get(0), 9.0);
    }

    #[test]
    fn spd_apply_identity() {
        let l = chol_assemble(&[1.0, 0.0, 1.0, 1.0], CholLayout::Orthotropic).unwrap();
        let v = Voigt::plane(1.0, 2.0, 3.0);
        let out = spd_apply(&l, &v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn spd_apply_hand_example() {
        let l = chol_assemble(&[1.0, 0.5, 1.0, 2.0], CholLayout::Orthotropic).unwrap();
        let out = spd_apply(&l, &Voigt::plane(1.0, 0.0, 0.0)).unwrap();
        // L Lᵀ = [[1, .5, 0], [.5, 1.25, 0], [0, 0, 4]]
        assert_relative_eq!(out.get(0), 1.0);
        assert_relative_eq!(out.get(1), 0.5);
        assert_relative_eq!(out.get(2), 0.0);
    }

    #[test]
    fn spd_apply_dim_mismatch() {
        let l = chol_assemble(&[3.0], CholLayout::Dim1).unwrap();
        assert!(spd_apply(&l, &Voigt::plane(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn solve_dense_identity() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_dense(&a, &b).unwrap();
        assert_relative_eq!(x[0], 1.0);
        assert_relative_eq!(x[1], 2.0);
    }

    #[test]
    fn solve_dense_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = DVector::from_vec(vec![2.0, 4.0]);
        let x = solve_dense(&a, &b).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_dense_least_squares_mean() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 3.0]);
        let x = solve_dense(&a, &b).unwrap();
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_dense_singular_reports_condition() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let err = solve_dense(&a, &b).unwrap_err();
        assert!(matches!(err, Error::Solver(_)));
    }

    #[test]
    fn solve_dense_well_conditioned_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 5.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = solve_dense(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() / b.norm() <= 1e-10);
    }

    #[test]
    fn sym_eig_min_examples() {
        let i3 = DMatrix::identity(3, 3);
        assert_relative_eq!(sym_eig_min(&i3).unwrap(), 1.0, epsilon = 1e-12);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 3.0]));
        assert_relative_eq!(sym_eig_min(&d).unwrap(), -2.0, epsilon = 1e-12);

        // Characteristic polynomial of [[2,1],[1,2]]: (2-λ)² - 1 = 0 → λ ∈ {1, 3}.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(sym_eig_min(&m).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn sym_eig_min_rejects_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(sym_eig_min(&m).is_err());
    }

    proptest! {
        #[test]
        fn gram_is_psd(entries in proptest::collection::vec(-10.0f64..10.0, 4),
                       v in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let l = chol_assemble(&entries, CholLayout::Orthotropic).unwrap();
            let vv = Voigt::from_slice(&v);
            let hv = spd_apply(&l, &vv).unwrap();
            let quad = vv.dot(&hv);
            prop_assert!(quad >= -1e-12 * (1.0 + vv.norm().powi(2) * l.gram().frob_norm()));
        }

        #[test]
        fn spd_apply_matches_explicit_product(entries in proptest::collection::vec(-5.0f64..5.0, 6),
                                              v in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let l = chol_assemble(&entries, CholLayout::FullLower).unwrap();
            let vv = Voigt::from_slice(&v);
            let fast = spd_apply(&l, &vv).unwrap();
            let explicit = l.gram().matvec(&vv);
            for i in 0..3 {
                let scale = explicit.norm().max(1.0);
                prop_assert!((fast.get(i) - explicit.get(i)).abs() <= 1e-14 * scale);
            }
        }
    }
}
