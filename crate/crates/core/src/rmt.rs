//! Random-matrix ensembles and the reflection-symmetric block sampling used as
//! chaotic baselines for the spin chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ginibre, CMat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EnsembleKind {
    Goe,
    Gue,
    Cue,
    Coe,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub block_dims: Option<Vec<usize>>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dim: usize, seed: u64) -> Self {
        Self { kind, dim, block_dims: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidDimension("ensemble dimension must be positive".into()));
        }
        if let Some(blocks) = &self.block_dims {
            let total: usize = blocks.iter().sum();
            if total != self.dim || blocks.contains(&0) {
                return Err(Error::InvalidDimension(format!(
                    "block dimensions {blocks:?} do not partition {}",
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// Haar unitary: QR of a complex Ginibre matrix with the phases of R's
/// diagonal moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let (mut q, r) = ginibre(d, rng).qr().unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { c(1.0, 0.0) };
        for row in 0..d {
            q[(row, k)] *= phase;
        }
    }
    q
}

pub fn gaussian_with_rng<R: Rng + ?Sized>(kind: EnsembleKind, d: usize, rng: &mut R) -> Result<CMat> {
    match kind {
        EnsembleKind::Goe => {
            let a = CMat::from_fn(d, d, |_, _| c(rng.sample(StandardNormal), 0.0));
            Ok((&a + a.transpose()) * c(0.5, 0.0))
        }
        EnsembleKind::Gue => {
            let a = CMat::from_fn(d, d, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            Ok((&a + a.adjoint()) * c(0.5, 0.0))
        }
        other => Err(Error::param("kind", format!("{other:?} is not a Gaussian ensemble"))),
    }
}

pub fn circular_with_rng<R: Rng + ?Sized>(kind: EnsembleKind, d: usize, rng: &mut R) -> Result<CMat> {
    match kind {
        EnsembleKind::Cue => Ok(haar_unitary(d, rng)),
        EnsembleKind::Coe => {
            let v = haar_unitary(d, rng);
            Ok(v.transpose() * v)
        }
        other => Err(Error::param("kind", format!("{other:?} is not a circular ensemble"))),
    }
}

fn sample_with_rng<R: Rng + ?Sized>(kind: EnsembleKind, d: usize, rng: &mut R) -> Result<CMat> {
    match kind {
        EnsembleKind::Goe | EnsembleKind::Gue => gaussian_with_rng(kind, d, rng),
        EnsembleKind::Cue | EnsembleKind::Coe => circular_with_rng(kind, d, rng),
    }
}

pub fn sample_gaussian(spec: &EnsembleSpec) -> Result<CMat> {
    spec.validate()?;
    gaussian_with_rng(spec.kind, spec.dim, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

pub fn sample_circular(spec: &EnsembleSpec) -> Result<CMat> {
    spec.validate()?;
    circular_with_rng(spec.kind, spec.dim, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

fn reverse_bits(x: usize, l: usize) -> usize {
    (0..l).fold(0, |acc, k| acc | (((x >> k) & 1) << (l - 1 - k)))
}

/// Site-order reversal on an L-qubit chain.
pub fn reflection_operator(l: usize) -> Result<CMat> {
    if l < 2 {
        return Err(Error::param("L", format!("chain length must be >= 2, got {l}")));
    }
    let d = 1 << l;
    let mut p = CMat::zeros(d, d);
    for x in 0..d {
        p[(reverse_bits(x, l), x)] = c(1.0, 0.0);
    }
    Ok(p)
}

/// Real orthogonal eigenbasis of the reflection: columns for eigenvalue +1
/// first, then −1. Returns the basis and the two multiplicities.
pub fn reflection_eigenbasis(l: usize) -> Result<(CMat, [usize; 2])> {
    if l < 2 {
        return Err(Error::param("L", format!("chain length must be >= 2, got {l}")));
    }
    let d = 1 << l;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for x in 0..d {
        let y = reverse_bits(x, l);
        if y == x {
            plus.push(vec![(x, 1.0)]);
        } else if x < y {
            plus.push(vec![(x, s), (y, s)]);
            minus.push(vec![(x, s), (y, -s)]);
        }
    }
    let dims = [plus.len(), minus.len()];
    let mut basis = CMat::zeros(d, d);
    for (col, entries) in plus.iter().chain(minus.iter()).enumerate() {
        for &(row, v) in entries {
            basis[(row, col)] = c(v, 0.0);
        }
    }
    Ok((basis, dims))
}

/// Independent blocks embedded in the reflection eigenbasis `basis_change`
/// (columns grouped as `spec.block_dims`), rotated back to the computational basis.
pub fn block_diagonal_sample(spec: &EnsembleSpec, basis_change: &CMat) -> Result<CMat> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    block_diagonal_with_rng(spec, basis_change, &mut rng)
}

pub fn block_diagonal_with_rng<R: Rng + ?Sized>(spec: &EnsembleSpec, basis_change: &CMat, rng: &mut R) -> Result<CMat> {
    spec.validate()?;
    let blocks = spec
        .block_dims
        .clone()
        .ok_or_else(|| Error::param("block_dims", "block-diagonal sampling needs block dimensions"))?;
    if basis_change.nrows() != spec.dim || basis_change.ncols() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, found: basis_change.nrows() });
    }
    let mut inner = CMat::zeros(spec.dim, spec.dim);
    let mut offset = 0;
    for b in blocks {
        let block = sample_with_rng(spec.kind, b, rng)?;
        inner.view_mut((offset, offset), (b, b)).copy_from(&block);
        offset += b;
    }
    Ok(basis_change * inner * basis_change.adjoint())
}

/// Eigenphases of a unitary in [−π, π), sorted.
pub fn eigenphases(u: &CMat) -> Result<Vec<f64>> {
    let (mut phases, _) = crate::linalg::unitary_eigen(u)?;
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

/// Nearest-neighbour spacings normalized to unit mean.
pub fn normalized_spacings(levels: &[f64], period: Option<f64>) -> Vec<f64> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    if let (Some(t), Some(first), Some(last)) = (period, sorted.first(), sorted.last()) {
        gaps.push(first + t - last);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    gaps.iter().map(|g| g / mean).collect()
}

pub fn is_symmetric(a: &CMat, tol: f64) -> bool {
    crate::linalg::max_abs(&(a - a.transpose())) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tki_floquet;
    use crate::linalg::{commutator, hermiticity_defect, hermitian_eigenvalues, identity, max_abs, unitarity_defect};

    fn spec(kind: EnsembleKind, dim: usize, seed: u64) -> EnsembleSpec {
        EnsembleSpec::new(kind, dim, seed)
    }

    #[test]
    fn gaussian_ensembles() {
        let goe = sample_gaussian(&spec(EnsembleKind::Goe, 12, 1)).unwrap();
        assert!(goe.iter().all(|z| z.im == 0.0));
        assert!(is_symmetric(&goe, 0.0));
        let gue = sample_gaussian(&spec(EnsembleKind::Gue, 12, 2)).unwrap();
        assert!(hermiticity_defect(&gue) == 0.0);
        assert!(gue[(0, 1)].im.abs() > 0.0);
        assert!(sample_gaussian(&spec(EnsembleKind::Cue, 4, 0)).is_err());
    }

    #[test]
    fn circular_ensembles() {
        let cue = sample_circular(&spec(EnsembleKind::Cue, 16, 3)).unwrap();
        assert!(unitarity_defect(&cue) < 1e-12);
        let coe = sample_circular(&spec(EnsembleKind::Coe, 16, 4)).unwrap();
        assert!(unitarity_defect(&coe) < 1e-12);
        assert!(is_symmetric(&coe, 1e-12));
        let (_, q) = crate::linalg::unitary_eigen(&coe).unwrap();
        for k in 0..16 {
            let v = q.column(k);
            let lam = (v.adjoint() * &coe * v)[(0, 0)];
            assert!((lam.norm() - 1.0).abs() < 1e-10);
        }
        assert!(sample_circular(&spec(EnsembleKind::Goe, 4, 0)).is_err());
    }

    #[test]
    fn same_seed_same_sample() {
        let a = sample_circular(&spec(EnsembleKind::Cue, 5, 9)).unwrap();
        let b = sample_circular(&spec(EnsembleKind::Cue, 5, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reflection_properties() {
        let p = reflection_operator(2).unwrap();
        assert_eq!(p[(2, 1)], c(1.0, 0.0));
        assert_eq!(p[(1, 2)], c(1.0, 0.0));
        assert_eq!(p[(0, 0)], c(1.0, 0.0));
        assert_eq!(p[(3, 3)], c(1.0, 0.0));
        for l in 2..=5 {
            let p = reflection_operator(l).unwrap();
            assert_eq!(&p * &p, identity(1 << l));
            let u = tki_floquet(l, 1.0, 1.4, 1.4).unwrap();
            assert!(max_abs(&commutator(&p, &u.matrix)) < 1e-10);
        }
    }

    #[test]
    fn reflection_eigenbasis_blocks() {
        let (b, dims) = reflection_eigenbasis(5).unwrap();
        assert_eq!(dims, [20, 12]);
        assert!(unitarity_defect(&b) < 1e-14);
        let p = reflection_operator(5).unwrap();
        let diag = b.adjoint() * p * &b;
        for k in 0..32 {
            let expected = if k < 20 { 1.0 } else { -1.0 };
            assert!((diag[(k, k)].re - expected).abs() < 1e-14);
        }
        // Count palindromes independently: 2^ceil(L/2).
        assert_eq!(reflection_eigenbasis(4).unwrap().1, [4 + 6, 6]);
    }

    #[test]
    fn block_samples_commute_with_reflection() {
        let (b, dims) = reflection_eigenbasis(4).unwrap();
        let p = reflection_operator(4).unwrap();
        for kind in [EnsembleKind::Coe, EnsembleKind::Cue, EnsembleKind::Goe] {
            let s = EnsembleSpec { kind, dim: 16, block_dims: Some(dims.to_vec()), seed: 5 };
            let m = block_diagonal_sample(&s, &b).unwrap();
            assert!(max_abs(&commutator(&m, &p)) < 1e-10);
            if kind == EnsembleKind::Coe {
                assert!(unitarity_defect(&m) < 1e-10);
            }
        }
        let bad = EnsembleSpec { kind: EnsembleKind::Coe, dim: 16, block_dims: Some(vec![10, 5]), seed: 0 };
        assert!(block_diagonal_sample(&bad, &b).is_err());
    }

    fn small_spacing_fraction(spacings: &[f64], cut: f64) -> f64 {
        spacings.iter().filter(|&&s| s < cut).count() as f64 / spacings.len() as f64
    }

    #[test]
    fn level_repulsion() {
        // Poisson gives P(s < 0.1) = 1 − e^{−0.1} ≈ 0.095; Wigner-Dyson is ~0.008 (GOE).
        let poisson = 1.0 - (-0.1f64).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [EnsembleKind::Goe, EnsembleKind::Gue, EnsembleKind::Coe] {
            let mut spacings = Vec::new();
            for _ in 0..200 {
                let m = sample_with_rng(kind, 64, &mut rng).unwrap();
                if matches!(kind, EnsembleKind::Coe) {
                    let phases = eigenphases(&m).unwrap();
                    spacings.extend(normalized_spacings(&phases, Some(2.0 * std::f64::consts::PI)));
                } else {
                    // Central half of the spectrum, where the density is roughly flat.
                    let e = hermitian_eigenvalues(&m);
                    spacings.extend(normalized_spacings(&e[16..48], None));
                }
            }
            let frac = small_spacing_fraction(&spacings, 0.1);
            assert!(frac < 0.5 * poisson, "{kind:?}: {frac}");
        }
    }
}
