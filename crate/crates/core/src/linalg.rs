//! Small dense complex linear-algebra helpers shared by the other modules.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

/// Tr(A† B) without forming the product.
pub fn hs_inner_unchecked(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Hilbert-Schmidt norm, Tr(A† A).
pub fn hs_norm_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(a: &CMat) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn ensure_square(a: &CMat, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

pub fn ensure_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn ensure_hermitian(a: &CMat, tol: f64, what: &str) -> Result<()> {
    let scale = max_abs(a).max(1.0);
    let defect = hermiticity_defect(a);
    if defect > tol * scale {
        return Err(Error::Precondition(format!(
            "{what} is not Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(())
}

pub fn ensure_unitary(u: &CMat, tol: f64, what: &str) -> Result<()> {
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(Error::Precondition(format!(
            "{what} is not unitary (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let d = h.nrows();
    let eig = ((h + h.adjoint()) * c(0.5, 0.0)).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(d, order.len(), |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    let h = (h + h.adjoint()) * c(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// V f(Λ) V† for a spectral decomposition.
pub fn spectral_apply(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        let fk = f(lam);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= fk;
        }
    }
    scaled * vectors.adjoint()
}

/// exp(-i t H) for Hermitian H.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let (values, vectors) = hermitian_eigen(h);
    spectral_apply(&values, &vectors, |lam| C64::from_polar(1.0, -t * lam))
}

/// Eigenphases and eigenvectors of a unitary, via the complex Schur form.
pub fn unitary_eigen(u: &CMat) -> Result<(Vec<f64>, CMat)> {
    let d = ensure_square(u, "unitary")?;
    ensure_unitary(u, 1e-8, "unitary")?;
    let schur = u.clone().schur();
    let (q, t) = schur.unpack();
    let phases: Vec<f64> = (0..d).map(|k| t[(k, k)].arg()).collect();
    let mut off = 0.0f64;
    for r in 0..d {
        for col in (r + 1)..d {
            off = off.max(t[(r, col)].norm());
        }
    }
    if off > 1e-8 {
        return Err(Error::Consistency(format!(
            "Schur form of a unitary is not diagonal (off-diagonal {off:.3e})"
        )));
    }
    Ok((phases, q))
}

/// U^eta on the principal branch of the eigenphases.
///
/// An eigenvalue sitting on the branch cut at -1 is nudged by 1e-12 so the
/// phase is taken as +pi consistently.
pub fn unitary_power(u: &CMat, eta: f64) -> Result<CMat> {
    let (phases, q) = unitary_eigen(u)?;
    let phases: Vec<f64> = phases
        .into_iter()
        .map(|p| if p <= -std::f64::consts::PI + 1e-12 { p + 2.0 * std::f64::consts::PI } else { p })
        .collect();
    Ok(spectral_apply(&phases, &q, |p| C64::from_polar(1.0, eta * p)))
}

pub fn matrix_power(u: &CMat, n: usize) -> CMat {
    let d = u.nrows();
    let mut result = identity(d);
    let mut base = u.clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    CMat::from_fn(d, d, |_, _| complex_gaussian(rng))
}

/// Projection of a real vector onto the probability simplex {x >= 0, sum x = total}.
pub fn project_simplex(values: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - total) / (k as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(d: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ginibre(d, &mut rng);
        (&g + g.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn expm_matches_taylor_series() {
        let h = random_hermitian(5, 1) * c(0.3, 0.0);
        let mut term = identity(5);
        let mut sum = identity(5);
        for k in 1..40 {
            term = &term * &h * (-I / c(k as f64, 0.0));
            sum += &term;
        }
        assert!(max_abs(&(sum - expm_hermitian(&h, 1.0))) < 1e-12);
    }

    #[test]
    fn unitary_power_composes() {
        let u = expm_hermitian(&random_hermitian(6, 2), 1.0);
        let half = unitary_power(&u, 0.5).unwrap();
        assert!(max_abs(&(&half * &half - &u)) < 1e-10);
        assert!(max_abs(&(unitary_power(&u, 1.0).unwrap() - &u)) < 1e-10);
        assert!(max_abs(&(unitary_power(&u, 0.0).unwrap() - identity(6))) < 1e-10);
    }

    #[test]
    fn unitary_power_at_branch_cut() {
        let u = CMat::from_diagonal(&CVec::from_vec(vec![c(-1.0, 0.0), c(1.0, 0.0)]));
        let half = unitary_power(&u, 0.5).unwrap();
        assert!((half[(0, 0)] - I).norm() < 1e-10);
    }

    #[test]
    fn matrix_power_matches_repeated_product() {
        let u = expm_hermitian(&random_hermitian(4, 3), 0.7);
        let mut slow = identity(4);
        for _ in 0..13 {
            slow = &slow * &u;
        }
        assert!(max_abs(&(slow - matrix_power(&u, 13))) < 1e-12);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.7, -0.2], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15 && p[2] == 0.0);
        let q = project_simplex(&[0.25; 4], 1.0);
        assert_eq!(q, vec![0.25; 4]);
    }
}
