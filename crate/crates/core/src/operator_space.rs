//! Coordinates on the space of Hermitian operators.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{
    c, ensure_hermitian, ensure_same_dim, ensure_square, hermitian_eigen, hs_inner_unchecked,
    spectral_apply, CMat, CVec, RMat, RVec, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    GellMann,
    General,
}

/// An ordered orthonormal basis of the traceless Hermitian d×d matrices.
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    dim: usize,
    elements: Vec<CMat>,
    layout: Layout,
    /// Rows are [Re E | Im E] flattened row-major; only used for general bases.
    analysis: Option<RMat>,
}

impl HermitianBasis {
    /// Generalized Gell-Mann matrices: diagonal elements first, then the
    /// symmetric and antisymmetric off-diagonal pairs.
    pub fn gell_mann(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("basis dimension must be >= 2, got {d}")));
        }
        let count = d * d - 1;
        let mut elements = vec![CMat::zeros(d, d); count];
        for k in 1..d {
            let norm = ((k + k * k) as f64).sqrt();
            let e = &mut elements[k - 1];
            for i in 0..k {
                e[(i, i)] = c(1.0 / norm, 0.0);
            }
            e[(k, k)] = c(-(k as f64) / norm, 0.0);
        }
        let s = d * (d - 1) / 2;
        for ii in 1..d {
            for jj in 0..ii {
                let n = off_diagonal_index(d, ii, jj);
                let sym = &mut elements[n];
                sym[(ii, jj)] = c(1.0 / SQRT_2, 0.0);
                sym[(jj, ii)] = c(1.0 / SQRT_2, 0.0);
                let anti = &mut elements[n + s];
                anti[(ii, jj)] = c(0.0, 1.0 / SQRT_2);
                anti[(jj, ii)] = c(0.0, -1.0 / SQRT_2);
            }
        }
        Ok(Self { dim: d, elements, layout: Layout::GellMann, analysis: None })
    }

    /// Wraps an arbitrary list of elements after checking the basis invariants.
    pub fn from_elements(dim: usize, elements: Vec<CMat>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(format!("basis dimension must be >= 2, got {dim}")));
        }
        ensure_same_dim(dim * dim - 1, elements.len())?;
        for (k, e) in elements.iter().enumerate() {
            ensure_same_dim(dim, ensure_square(e, "basis element")?)?;
            ensure_hermitian(e, 1e-10, "basis element")?;
            let tr = crate::linalg::trace(e).norm();
            if tr > 1e-10 {
                return Err(Error::Precondition(format!("basis element {k} has trace {tr:.3e}")));
            }
        }
        let mut analysis = RMat::zeros(elements.len(), 2 * dim * dim);
        for (k, e) in elements.iter().enumerate() {
            for (idx, z) in row_major(e).enumerate() {
                analysis[(k, idx)] = z.re;
                analysis[(k, dim * dim + idx)] = z.im;
            }
        }
        let basis = Self { dim, elements, layout: Layout::General, analysis: Some(analysis) };
        let defect = basis.orthonormality_defect();
        if defect > 1e-8 {
            return Err(Error::Precondition(format!("basis is not orthonormal (defect {defect:.3e})")));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn element(&self, alpha: usize) -> &CMat {
        &self.elements[alpha]
    }

    /// Tr(E_a E_b).
    pub fn gram(&self) -> RMat {
        let p = self.len();
        RMat::from_fn(p, p, |a, b| hs_inner_unchecked(&self.elements[a], &self.elements[b]).re)
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.gram();
        let p = self.len();
        let mut worst = 0.0f64;
        for a in 0..p {
            for b in 0..p {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[(a, b)] - target).abs());
            }
        }
        worst
    }

    /// Real coordinates Tr(O E_a) of a Hermitian operator.
    pub fn coordinates(&self, op: &CMat) -> Result<RVec> {
        ensure_same_dim(self.dim, ensure_square(op, "operator")?)?;
        Ok(match self.layout {
            Layout::GellMann => RVec::from_vec(gell_mann_coordinates(op, self.dim)),
            Layout::General => {
                let x = stacked_parts(op);
                self.analysis.as_ref().expect("general layout keeps analysis") * x
            }
        })
    }

    /// Design matrix whose row n holds the coordinates of `ops[n]`.
    pub fn design(&self, ops: &[CMat]) -> Result<RMat> {
        for op in ops {
            ensure_same_dim(self.dim, ensure_square(op, "operator")?)?;
        }
        let p = self.len();
        match self.layout {
            Layout::GellMann => {
                let mut out = RMat::zeros(ops.len(), p);
                for (n, op) in ops.iter().enumerate() {
                    let row = gell_mann_coordinates(op, self.dim);
                    for (a, v) in row.into_iter().enumerate() {
                        out[(n, a)] = v;
                    }
                }
                Ok(out)
            }
            Layout::General => {
                let d2 = self.dim * self.dim;
                let mut x = RMat::zeros(2 * d2, ops.len());
                for (n, op) in ops.iter().enumerate() {
                    x.column_mut(n).copy_from(&stacked_parts(op));
                }
                Ok((self.analysis.as_ref().expect("general layout keeps analysis") * x).transpose())
            }
        }
    }

    /// Σ_a coeffs[a] E_a.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<CMat> {
        ensure_same_dim(self.len(), coeffs.len())?;
        let d = self.dim;
        Ok(match self.layout {
            Layout::GellMann => {
                let mut out = CMat::zeros(d, d);
                let mut diag = vec![0.0; d];
                for k in 1..d {
                    let w = coeffs[k - 1] / ((k + k * k) as f64).sqrt();
                    for v in diag.iter_mut().take(k) {
                        *v += w;
                    }
                    diag[k] -= k as f64 * w;
                }
                for (i, v) in diag.into_iter().enumerate() {
                    out[(i, i)] = c(v, 0.0);
                }
                let s = d * (d - 1) / 2;
                for ii in 1..d {
                    for jj in 0..ii {
                        let n = off_diagonal_index(d, ii, jj);
                        let z = c(coeffs[n], coeffs[n + s]) / SQRT_2;
                        out[(ii, jj)] = z;
                        out[(jj, ii)] = z.conj();
                    }
                }
                out
            }
            Layout::General => {
                let mut out = CMat::zeros(d, d);
                for (e, &w) in self.elements.iter().zip(coeffs) {
                    if w != 0.0 {
                        out += e * c(w, 0.0);
                    }
                }
                out
            }
        })
    }

    /// The basis {V E_a V†} for a unitary V; orthonormality is preserved.
    pub fn conjugated(&self, v: &CMat) -> Result<Self> {
        ensure_same_dim(self.dim, ensure_square(v, "unitary")?)?;
        let vd = v.adjoint();
        let elements = self.elements.iter().map(|e| v * e * &vd).collect();
        Self::from_elements(self.dim, elements)
    }
}

fn off_diagonal_index(d: usize, ii: usize, jj: usize) -> usize {
    ii * (ii - 1) / 2 + jj + d - 1
}

fn row_major(op: &CMat) -> impl Iterator<Item = C64> + '_ {
    let d = op.ncols();
    (0..op.nrows() * d).map(move |idx| op[(idx / d, idx % d)])
}

fn stacked_parts(op: &CMat) -> RVec {
    let d2 = op.nrows() * op.ncols();
    let mut x = RVec::zeros(2 * d2);
    for (idx, z) in row_major(op).enumerate() {
        x[idx] = z.re;
        x[d2 + idx] = z.im;
    }
    x
}

fn gell_mann_coordinates(op: &CMat, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d - 1];
    let mut prefix = 0.0;
    for k in 1..d {
        prefix += op[(k - 1, k - 1)].re;
        out[k - 1] = (prefix - k as f64 * op[(k, k)].re) / ((k + k * k) as f64).sqrt();
    }
    let s = d * (d - 1) / 2;
    for ii in 1..d {
        for jj in 0..ii {
            let n = off_diagonal_index(d, ii, jj);
            // Averaging the two triangles keeps the result exact for Hermitian
            // input and equal to Re Tr(O E) otherwise.
            let z = (op[(ii, jj)] + op[(jj, ii)].conj()) * 0.5;
            out[n] = SQRT_2 * z.re;
            out[n + s] = SQRT_2 * z.im;
        }
    }
    out
}

/// Real coordinates of the traceless part of a state.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector(pub RVec);

impl BlochVector {
    pub fn zeros(len: usize) -> Self {
        Self(RVec::zeros(len))
    }

    pub fn components(&self) -> &RVec {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// Row-major flattening of a d×d operator.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorVec(pub CVec);

impl OperatorVec {
    pub fn dim(&self) -> usize {
        (self.0.len() as f64).sqrt().round() as usize
    }
}

pub fn vectorize(op: &CMat) -> OperatorVec {
    OperatorVec(CVec::from_iterator(op.nrows() * op.ncols(), row_major(op)))
}

pub fn devectorize(v: &OperatorVec) -> Result<CMat> {
    let d = v.dim();
    if d * d != v.0.len() {
        return Err(Error::InvalidDimension(format!("length {} is not a perfect square", v.0.len())));
    }
    Ok(CMat::from_row_iterator(d, d, v.0.iter().copied()))
}

pub fn gell_mann_basis(d: usize) -> Result<HermitianBasis> {
    HermitianBasis::gell_mann(d)
}

pub fn bloch_encode(rho: &CMat, basis: &HermitianBasis) -> Result<BlochVector> {
    ensure_hermitian(rho, 1e-10, "state")?;
    basis.coordinates(rho).map(BlochVector)
}

pub fn bloch_decode(r: &BlochVector, basis: &HermitianBasis) -> Result<CMat> {
    let d = basis.dim();
    let mut rho = basis.synthesize(r.0.as_slice())?;
    for i in 0..d {
        rho[(i, i)] += c(1.0 / d as f64, 0.0);
    }
    Ok(rho)
}

pub fn hs_inner(a: &CMat, b: &CMat) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(hs_inner_unchecked(a, b))
}

/// V |D| V† / Tr|D| for the eigendecomposition O = V D V†.
pub fn regularize_operator(op: &CMat) -> Result<CMat> {
    ensure_square(op, "operator")?;
    ensure_hermitian(op, 1e-8, "operator")?;
    let (values, vectors) = hermitian_eigen(op);
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total <= 1e-300 {
        return Err(Error::ZeroOperator);
    }
    Ok(spectral_apply(&values, &vectors, |v| c(v.abs() / total, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ginibre, max_abs, trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pure(d: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ginibre(d, &mut rng);
        let psi = g.column(0).normalize();
        &psi * psi.adjoint()
    }

    #[test]
    fn qubit_basis_is_scaled_paulis() {
        let b = gell_mann_basis(2).unwrap();
        assert_eq!(b.len(), 3);
        let s = 1.0 / SQRT_2;
        assert_eq!(b.element(0)[(0, 0)], c(s, 0.0));
        assert_eq!(b.element(0)[(1, 1)], c(-s, 0.0));
        assert_eq!(b.element(1)[(0, 1)], c(s, 0.0));
        assert_eq!(b.element(2)[(1, 0)], c(0.0, s));
        for e in b.elements() {
            assert!(trace(e).norm() < 1e-15);
        }
    }

    #[test]
    fn gram_is_identity_up_to_32() {
        for d in 2..=32 {
            let b = gell_mann_basis(d).unwrap();
            assert_eq!(b.len(), d * d - 1);
            if d <= 12 || d % 8 == 0 {
                assert!(b.orthonormality_defect() < 1e-12, "d={d}");
            }
            for e in b.elements() {
                assert!(trace(e).norm() < 1e-12);
                assert!(crate::linalg::hermiticity_defect(e) < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_trivial_dimension() {
        assert!(matches!(gell_mann_basis(1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn structured_coordinates_match_traces() {
        let d = 5;
        let b = gell_mann_basis(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = ginibre(d, &mut rng);
        let h = (&g + g.adjoint()) * c(0.5, 0.0);
        let fast = b.coordinates(&h).unwrap();
        for (a, e) in b.elements().iter().enumerate() {
            let direct = trace(&(&h * e));
            assert!(direct.im.abs() < 1e-12);
            assert!((direct.re - fast[a]).abs() < 1e-12);
        }
        let general = HermitianBasis::from_elements(d, b.elements().to_vec()).unwrap();
        assert!((general.coordinates(&h).unwrap() - fast).amax() < 1e-12);
        let coeffs: Vec<f64> = (0..24).map(|k| (k as f64 * 0.37).sin()).collect();
        assert!(max_abs(&(general.synthesize(&coeffs).unwrap() - b.synthesize(&coeffs).unwrap())) < 1e-12);
    }

    #[test]
    fn maximally_mixed_encodes_to_zero() {
        let b = gell_mann_basis(4).unwrap();
        let rho = CMat::identity(4, 4) * c(0.25, 0.0);
        assert!(bloch_encode(&rho, &b).unwrap().0.amax() < 1e-15);
        assert!(max_abs(&(bloch_decode(&BlochVector::zeros(15), &b).unwrap() - rho)) < 1e-15);
    }

    #[test]
    fn pure_state_norm_and_round_trip() {
        for d in [2, 3, 7] {
            let b = gell_mann_basis(d).unwrap();
            let rho = random_pure(d, d as u64);
            let r = bloch_encode(&rho, &b).unwrap();
            assert!((r.norm_sq() - (1.0 - 1.0 / d as f64)).abs() < 1e-10);
            let back = bloch_decode(&r, &b).unwrap();
            assert!(max_abs(&(back - rho)) < 1e-12);
        }
    }

    #[test]
    fn round_trip_removes_trace_excess() {
        let d = 4;
        let b = gell_mann_basis(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = ginibre(d, &mut rng);
        let h = (&g + g.adjoint()) * c(0.5, 0.0);
        let back = bloch_decode(&bloch_encode(&h, &b).unwrap(), &b).unwrap();
        let expected = &h - CMat::identity(d, d) * ((trace(&h) - c(1.0, 0.0)) / c(d as f64, 0.0));
        assert!(max_abs(&(back - expected)) < 1e-12);
    }

    #[test]
    fn hs_inner_examples() {
        let b = gell_mann_basis(3).unwrap();
        assert!((hs_inner(b.element(0), b.element(0)).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        assert!(hs_inner(b.element(0), b.element(1)).unwrap().norm() < 1e-14);
        let jy = crate::dynamics::angular_momentum_ops(10.0).unwrap().jy;
        assert!((hs_inner(&jy, &jy).unwrap().re - 770.0).abs() < 1e-9);
        assert!(hs_inner(&jy, &CMat::zeros(3, 3)).is_err());
    }

    #[test]
    fn vectorization_is_row_major_and_invertible() {
        let m = CMat::from_fn(3, 3, |r, col| c(r as f64, col as f64));
        let v = vectorize(&m);
        assert_eq!(v.0[1], c(0.0, 1.0));
        assert_eq!(devectorize(&v).unwrap(), m);
    }

    #[test]
    fn regularize_examples() {
        let rho = random_pure(3, 1) * c(0.5, 0.0) + CMat::identity(3, 3) * c(0.5 / 3.0, 0.0);
        assert!(max_abs(&(regularize_operator(&rho).unwrap() - &rho)) < 1e-12);
        let z = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(max_abs(&(regularize_operator(&z).unwrap() - CMat::identity(2, 2) * c(0.5, 0.0))) < 1e-14);
        let jz = crate::dynamics::angular_momentum_ops(1.0).unwrap().jz;
        let reg = regularize_operator(&jz).unwrap();
        let expected = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)]));
        assert!(max_abs(&(reg - expected)) < 1e-14);
        assert!(matches!(regularize_operator(&CMat::zeros(2, 2)), Err(Error::ZeroOperator)));
    }
}
