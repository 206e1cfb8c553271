//! Krylov subspaces of operator dynamics.
//!
//! Hamiltonian evolution goes through Lanczos with full re-orthogonalization
//! (every new vector is Gram-Schmidt'd twice against the whole basis). Floquet
//! evolution only gets a span dimension, from an Arnoldi-style sweep over the
//! stroboscopic sequence U†ⁿ O Uⁿ.

use std::f64::consts::PI;

use crate::dynamics::UnitaryPropagator;
use crate::error::{Error, Result};
use crate::linalg::{
    c, ensure_hermitian, ensure_square, expm_hermitian, hermitian_eigen, hermitian_eigenvalues, identity, kron,
    unitary_eigen, CMat, CVec, C64,
};
use crate::operator_space::{vectorize, OperatorVec};

/// Relative termination threshold: recursion stops once b_k·‖O‖ ≤ 1e-8·‖O‖.
pub const DEFAULT_TERM_TOL_FRACTION: f64 = 1e-8;

/// Above this Hilbert-space dimension the Liouvillian is applied matrix-free.
pub const DENSE_MAX_DIM: usize = 16;

/// L = H ⊗ I − I ⊗ Hᵀ acting on row-major vectorized operators, i.e. X ↦ [H, X].
pub fn liouvillian(h: &CMat) -> Result<CMat> {
    let d = ensure_square(h, "H")?;
    ensure_hermitian(h, 1e-10, "H")?;
    Ok(kron(h, &identity(d)) - kron(&identity(d), &h.transpose()))
}

#[derive(Debug, Clone)]
pub enum LiouvillianAction {
    Dense { matrix: CMat, h: CMat },
    Commutator { h: CMat },
}

impl LiouvillianAction {
    /// Dense for d ≤ `DENSE_MAX_DIM`, commutator products otherwise.
    pub fn new(h: &CMat) -> Result<Self> {
        if h.nrows() <= DENSE_MAX_DIM {
            Self::dense(h)
        } else {
            Self::matrix_free(h)
        }
    }

    pub fn dense(h: &CMat) -> Result<Self> {
        Ok(Self::Dense { matrix: liouvillian(h)?, h: h.clone() })
    }

    pub fn matrix_free(h: &CMat) -> Result<Self> {
        ensure_square(h, "H")?;
        ensure_hermitian(h, 1e-10, "H")?;
        Ok(Self::Commutator { h: h.clone() })
    }

    pub fn hamiltonian(&self) -> &CMat {
        match self {
            Self::Dense { h, .. } | Self::Commutator { h } => h,
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian().nrows()
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        match self {
            Self::Dense { matrix, .. } => matrix * v,
            Self::Commutator { h } => {
                let d = h.nrows();
                let x = CMat::from_row_slice(d, d, v.as_slice());
                vectorize(&(h * &x - &x * h)).0
            }
        }
    }

    /// Operator norm, the spectral width of H.
    pub fn norm(&self) -> f64 {
        let e = hermitian_eigenvalues(self.hamiltonian());
        e[e.len() - 1] - e[0]
    }
}

#[derive(Debug, Clone)]
pub struct KrylovBasis {
    pub vectors: Vec<OperatorVec>,
    /// b_1..b_{K−1}.
    pub lanczos_b: Vec<f64>,
    /// Hilbert-Schmidt norm of the seed operator.
    pub seed_norm: f64,
}

impl KrylovBasis {
    pub fn dim_k(&self) -> usize {
        self.vectors.len()
    }

    /// max |⟨Q_i|Q_j⟩ − δ_ij|.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.0.dotc(&b.0) - c(target, 0.0)).norm());
            }
        }
        worst
    }

    /// max |⟨Q_i|L|Q_j⟩| over |i − j| ≥ 2, and max |⟨Q_k|L|Q_{k−1}⟩ − b_k|.
    pub fn tridiagonality_residuals(&self, l: &LiouvillianAction) -> (f64, f64) {
        let images: Vec<CVec> = self.vectors.iter().map(|q| l.apply(&q.0)).collect();
        let mut off = 0.0f64;
        let mut diag = 0.0f64;
        for (i, q) in self.vectors.iter().enumerate() {
            for (j, lq) in images.iter().enumerate() {
                let z = q.0.dotc(lq);
                if i.abs_diff(j) >= 2 {
                    off = off.max(z.norm());
                } else if i == j + 1 {
                    diag = diag.max((z - c(self.lanczos_b[j], 0.0)).norm());
                }
            }
        }
        (off, diag)
    }
}

/// Eigenspace labels for sorted-by-index eigenvalues, merging values closer than `tol`.
/// `period` closes the clustering around the circle for eigenphases.
fn eigenspace_labels(values: &[f64], tol: f64, period: Option<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut labels = vec![0; values.len()];
    let mut label = 0;
    for w in 0..order.len() {
        if w > 0 && values[order[w]] - values[order[w - 1]] > tol {
            label += 1;
        }
        labels[order[w]] = label;
    }
    if let (Some(p), Some(&first), Some(&last)) = (period, order.first(), order.last()) {
        if label > 0 && values[first] + p - values[last] <= tol {
            let wrap = labels[last];
            for l in labels.iter_mut() {
                if *l == wrap {
                    *l = 0;
                }
            }
        }
    }
    labels
}

/// The part of the generator's commutant that the seed never reaches.
///
/// Operators commuting with H (or U) form a degenerate invariant subspace of
/// the superoperator. The seed touches it along one direction only; rounding
/// errors in the remaining directions are amplified by roughly 1/∏b_k over a
/// long recursion and eventually pass for new Krylov vectors. Stripping them
/// after each Gram-Schmidt pass changes nothing in exact arithmetic.
struct InvisibleCommutant {
    vectors: CMat,
    labels: Vec<usize>,
    seed_part: Option<CMat>,
}

impl InvisibleCommutant {
    fn new(vectors: CMat, labels: Vec<usize>, seed: &CMat) -> Self {
        let mut me = Self { vectors, labels, seed_part: None };
        let p = me.pinch(seed);
        let n = p.norm();
        if n > DEFAULT_TERM_TOL_FRACTION * seed.norm() {
            me.seed_part = Some(p / c(n, 0.0));
        }
        me
    }

    /// Block-diagonal part of X in the generator's eigenspaces.
    fn pinch(&self, x: &CMat) -> CMat {
        let xb = self.vectors.adjoint() * x * &self.vectors;
        let d = x.nrows();
        let kept = CMat::from_fn(d, d, |a, b| if self.labels[a] == self.labels[b] { xb[(a, b)] } else { c(0.0, 0.0) });
        &self.vectors * kept * self.vectors.adjoint()
    }

    fn strip(&self, v: &mut CVec) {
        let d = self.vectors.nrows();
        let x = CMat::from_row_slice(d, d, v.as_slice());
        let mut p = self.pinch(&x);
        if let Some(s) = &self.seed_part {
            let overlap = s.iter().zip(p.iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
            p -= s * overlap;
        }
        *v -= vectorize(&p).0;
    }
}

fn orthogonalize_twice(v: &mut CVec, basis: &[OperatorVec]) {
    for _ in 0..2 {
        for q in basis {
            let overlap = q.0.dotc(v);
            v.axpy(-overlap, &q.0, c(1.0, 0.0));
        }
    }
}

/// Lanczos with doubled full Gram-Schmidt.
///
/// `term_tol` defaults to 1e-8·‖O‖ and is compared with b_k·‖O‖.
pub fn lanczos_full_orth(l: &LiouvillianAction, o: &CMat, term_tol: Option<f64>) -> Result<KrylovBasis> {
    ensure_square(o, "O")?;
    if o.nrows() != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: o.nrows() });
    }
    ensure_hermitian(o, 1e-10, "O")?;
    let seed = vectorize(o).0;
    let seed_norm = seed.norm();
    if seed_norm <= 1e-300 {
        return Err(Error::ZeroOperator);
    }
    let tol = term_tol.unwrap_or(DEFAULT_TERM_TOL_FRACTION * seed_norm);
    let d = l.dim();
    let (energies, eigvecs) = hermitian_eigen(l.hamiltonian());
    let width = energies[d - 1] - energies[0];
    let guard = InvisibleCommutant::new(eigvecs, eigenspace_labels(&energies, 1e-9 * width.max(1.0), None), o);
    let mut vectors = vec![OperatorVec(seed / c(seed_norm, 0.0))];
    let mut b: Vec<f64> = Vec::new();
    while vectors.len() < d * d {
        let k = vectors.len();
        let mut a = l.apply(&vectors[k - 1].0);
        if k >= 2 {
            a.axpy(c(-b[k - 2], 0.0), &vectors[k - 2].0, c(1.0, 0.0));
        }
        orthogonalize_twice(&mut a, &vectors);
        guard.strip(&mut a);
        let bk = a.norm();
        if bk * seed_norm <= tol {
            break;
        }
        b.push(bk);
        vectors.push(OperatorVec(a / c(bk, 0.0)));
    }
    Ok(KrylovBasis { vectors, lanczos_b: b, seed_norm })
}

/// e^{iHt} O e^{−iHt}.
pub fn evolve_operator(h: &CMat, o: &CMat, t: f64) -> CMat {
    let u = expm_hermitian(h, t);
    u.adjoint() * o * u
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovAmplitudes {
    pub phi: Vec<f64>,
}

impl KrylovAmplitudes {
    pub fn norm_sq(&self) -> f64 {
        self.phi.iter().map(|p| p * p).sum()
    }
}

/// φ_k = i^{−k}(Q_k|O(t))/‖O‖.
pub fn krylov_amplitudes(o_t: &CMat, basis: &KrylovBasis) -> Result<KrylovAmplitudes> {
    let v = vectorize(o_t).0;
    let expected = basis.vectors[0].0.len();
    if v.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: v.len() });
    }
    let mut phase = c(1.0, 0.0);
    let mut phi = Vec::with_capacity(basis.dim_k());
    for q in &basis.vectors {
        let z: C64 = q.0.dotc(&v) * phase / basis.seed_norm;
        if z.im.abs() > 1e-6 {
            return Err(Error::Consistency(format!(
                "Krylov amplitude {} has imaginary part {:.3e}; operator and basis do not match",
                phi.len(),
                z.im
            )));
        }
        phi.push(z.re);
        phase *= c(0.0, -1.0);
    }
    Ok(KrylovAmplitudes { phi })
}

pub fn krylov_complexity(amp: &KrylovAmplitudes) -> f64 {
    amp.phi.iter().enumerate().map(|(k, p)| k as f64 * p * p).sum()
}

pub fn krylov_entropy(amp: &KrylovAmplitudes) -> f64 {
    amp.phi
        .iter()
        .map(|p| p * p)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// Dimension of span{U†ⁿ O Uⁿ}, by Arnoldi on the superoperator U† ⊗ Uᵀ.
pub fn arnoldi_unitary_dim(u: &UnitaryPropagator, o: &CMat, term_tol: Option<f64>) -> Result<usize> {
    let d = ensure_square(o, "O")?;
    if d != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: d });
    }
    let norm = o.norm();
    if norm <= 1e-300 {
        return Err(Error::ZeroOperator);
    }
    let tol = term_tol.unwrap_or(DEFAULT_TERM_TOL_FRACTION * norm) / norm;
    let (phases, eigvecs) = unitary_eigen(&u.matrix)?;
    let guard = InvisibleCommutant::new(eigvecs, eigenspace_labels(&phases, 1e-9, Some(2.0 * PI)), o);
    let udag = u.matrix.adjoint();
    let mut current = o / c(norm, 0.0);
    let mut basis = vec![vectorize(&current)];
    while basis.len() < d * d {
        // Mapping the newest orthonormal vector spans the same space as the
        // raw powers but stays well conditioned.
        let mut v = vectorize(&(&udag * &current * &u.matrix)).0;
        orthogonalize_twice(&mut v, &basis);
        guard.strip(&mut v);
        let r = v.norm();
        if r <= tol {
            break;
        }
        v /= c(r, 0.0);
        current = CMat::from_row_slice(d, d, v.as_slice());
        basis.push(OperatorVec(v));
    }
    Ok(basis.len())
}
