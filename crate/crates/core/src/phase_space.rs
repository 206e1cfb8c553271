//! Spin coherent states, the Husimi Q-function and the Husimi (Wehrl) entropy.
//!
//! Sphere integrals use a product grid: Gauss-Legendre nodes in cos θ and a
//! uniform trapezoid rule in φ. For spin j the Q-function of any operator is a
//! polynomial of degree 2j in the unit vector, so the default 64 x 128 grid
//! integrates it exactly up to j = 40 (the entropy integrand is smooth but not
//! polynomial and converges spectrally instead).

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use crate::dynamics::{angular_momentum_ops, spin_dimension, spin_of_dimension};
use crate::error::{Error, Result};
use crate::linalg::{c, ensure_hermitian, ensure_square, expm_hermitian, hermitian_eigenvalues, CMat, CVec, C64};
use crate::operator_space::regularize_operator;

pub const DEFAULT_THETA_NODES: usize = 64;
pub const DEFAULT_PHI_NODES: usize = 128;

/// Normalization errors below this are treated as converged regardless of the ratio.
pub const QUADRATURE_FLOOR: f64 = 1e-12;

/// Required error reduction when the grid is doubled.
pub const CONVERGENCE_RATIO: f64 = 0.3;

const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SphereGrid {
    n_theta: usize,
    n_phi: usize,
    thetas: Vec<f64>,
    theta_weights: Vec<f64>,
    phis: Vec<f64>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        let nt = NonZeroUsize::new(n_theta).ok_or_else(|| Error::param("n_theta", "must be positive"))?;
        if n_phi == 0 {
            return Err(Error::param("n_phi", "must be positive"));
        }
        let rule = GaussLegendre::new(nt);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        // Order by increasing theta, i.e. decreasing cos theta.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let thetas = pairs.iter().map(|p| p.0.clamp(-1.0, 1.0).acos()).collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let theta_weights = pairs.iter().map(|p| p.1 * dphi).collect();
        let phis = (0..n_phi).map(|k| k as f64 * dphi).collect();
        Ok(Self { n_theta, n_phi, thetas, theta_weights, phis })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same grid at twice the resolution in both angles.
    pub fn refined(&self) -> Result<Self> {
        Self::new(2 * self.n_theta, 2 * self.n_phi)
    }

    /// Nodes in theta-major order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.thetas.iter().flat_map(|&t| self.phis.iter().map(move |&p| (t, p))).collect()
    }

    /// Weights matching `nodes`, including the sin θ Jacobian.
    pub fn weights(&self) -> Vec<f64> {
        self.theta_weights.iter().flat_map(|&w| std::iter::repeat_n(w, self.n_phi)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: values.len() });
        }
        Ok(values
            .chunks(self.n_phi)
            .zip(&self.theta_weights)
            .map(|(row, w)| w * row.iter().sum::<f64>())
            .sum())
    }
}

impl Default for SphereGrid {
    fn default() -> Self {
        Self::new(DEFAULT_THETA_NODES, DEFAULT_PHI_NODES).expect("default grid is valid")
    }
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::param("theta", format!("{theta} is outside [0, pi]")));
    }
    if !phi.is_finite() {
        return Err(Error::param("phi", "must be finite"));
    }
    Ok(())
}

/// sqrt(C(n, k)) cos^{n-k}(θ/2) sin^k(θ/2) for k = 0..=n.
fn coherent_magnitudes(n: usize, theta: f64) -> Vec<f64> {
    let (s, co) = (theta / 2.0).sin_cos();
    let mut out = Vec::with_capacity(n + 1);
    let mut binom = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            binom *= (n - k + 1) as f64 / k as f64;
        }
        out.push(binom.sqrt() * co.powi((n - k) as i32) * s.powi(k as i32));
    }
    out
}

/// |θ,φ⟩ in the basis |j⟩, …, |−j⟩.
///
/// Evaluated in closed form from the rotation of |j,j⟩, so the south pole
/// needs no special handling.
pub fn spin_coherent(j: f64, theta: f64, phi: f64) -> Result<CVec> {
    let d = spin_dimension(j)?;
    check_angles(theta, phi)?;
    let mags = coherent_magnitudes(d - 1, theta);
    Ok(CVec::from_fn(d, |k, _| C64::from_polar(mags[k], k as f64 * phi)))
}

/// (1+|μ|²)^{−j} e^{μ J₋}|j,j⟩ with μ = e^{iφ} tan(θ/2). Undefined at θ = π.
pub fn spin_coherent_ladder(j: f64, theta: f64, phi: f64) -> Result<CVec> {
    let ops = angular_momentum_ops(j)?;
    check_angles(theta, phi)?;
    if theta > PI - 1e-6 {
        return Err(Error::param("theta", "ladder form diverges at the south pole"));
    }
    let d = ops.jz.nrows();
    let mu = C64::from_polar((theta / 2.0).tan(), phi);
    let jminus = &ops.jx - &ops.jy * c(0.0, 1.0);
    let mut term = CVec::zeros(d);
    term[0] = c(1.0, 0.0);
    let mut sum = term.clone();
    for k in 1..d {
        term = &jminus * term * (mu / k as f64);
        sum += &term;
    }
    Ok(sum * c((1.0 + mu.norm_sqr()).powf(-j), 0.0))
}

/// exp(iθ(sin φ J_x − cos φ J_y))|j,j⟩.
pub fn spin_coherent_rotation(j: f64, theta: f64, phi: f64) -> Result<CVec> {
    let ops = angular_momentum_ops(j)?;
    check_angles(theta, phi)?;
    let axis = &ops.jy * c(phi.cos(), 0.0) - &ops.jx * c(phi.sin(), 0.0);
    let r = expm_hermitian(&axis, theta);
    Ok(r.column(0).into_owned())
}

fn check_density_like(rho: &CMat) -> Result<usize> {
    let d = ensure_square(rho, "rho")?;
    ensure_hermitian(rho, PSD_TOL, "rho")?;
    let min = hermitian_eigenvalues(rho)[0];
    if min < -PSD_TOL {
        return Err(Error::Precondition(format!("rho is not positive semidefinite (eigenvalue {min:.3e})")));
    }
    Ok(d)
}

/// ⟨θ,φ|ρ|θ,φ⟩ at a single point.
pub fn husimi_at(rho: &CMat, theta: f64, phi: f64) -> Result<f64> {
    let d = check_density_like(rho)?;
    let v = spin_coherent(spin_of_dimension(d), theta, phi)?;
    Ok((v.adjoint() * rho * &v)[(0, 0)].re)
}

/// Q at every node of `grid`, in `grid.nodes()` order.
///
/// Per theta row the sums Σ_{l−k=m} a_k a_l ρ_kl are formed once, leaving a
/// short Fourier series in φ.
fn husimi_unchecked(rho: &CMat, grid: &SphereGrid) -> Vec<f64> {
    let d = rho.nrows();
    let n = d - 1;
    grid.thetas
        .par_iter()
        .flat_map_iter(|&theta| {
            let a = coherent_magnitudes(n, theta);
            // bands[m] for l − k = m ≥ 0; negative m is the conjugate.
            let bands: Vec<C64> = (0..d)
                .map(|m| (0..d - m).map(|k| rho[(k, k + m)] * (a[k] * a[k + m])).sum())
                .collect();
            grid.phis
                .iter()
                .map(|&phi| {
                    let mut q = bands[0].re;
                    for (m, b) in bands.iter().enumerate().skip(1) {
                        q += 2.0 * (b * C64::from_polar(1.0, m as f64 * phi)).re;
                    }
                    q
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn husimi_q(rho: &CMat, grid: &SphereGrid) -> Result<Vec<f64>> {
    check_density_like(rho)?;
    Ok(husimi_unchecked(rho, grid))
}

/// ((2j+1)/4π) ∫ Q dΩ, which is Tr ρ exactly.
pub fn husimi_normalization(rho: &CMat, grid: &SphereGrid) -> Result<f64> {
    let d = check_density_like(rho)?;
    let q = husimi_unchecked(rho, grid);
    Ok(d as f64 / (4.0 * PI) * grid.integrate(&q)?)
}

/// Husimi entropy of the regularized operator V|D|V†/Tr|D|.
pub fn husimi_entropy(op: &CMat, grid: &SphereGrid) -> Result<f64> {
    let rho = regularize_operator(op)?;
    let d = rho.nrows();
    let integrand: Vec<f64> = husimi_unchecked(&rho, grid)
        .into_iter()
        .map(|q| if q > 0.0 { -q * q.ln() } else { 0.0 })
        .collect();
    Ok(d as f64 / (4.0 * PI) * grid.integrate(&integrand)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConvergence {
    pub coarse_error: f64,
    pub fine_error: f64,
    pub converged: bool,
}

impl QuadratureConvergence {
    pub fn ratio(&self) -> f64 {
        if self.coarse_error == 0.0 {
            0.0
        } else {
            self.fine_error / self.coarse_error
        }
    }
}

/// Compares the normalization error of `grid` with that of the doubled grid.
///
/// Once the coarse grid already integrates Q exactly both errors are roundoff,
/// so the ratio test is replaced by `fine_error <= QUADRATURE_FLOOR`.
pub fn normalization_convergence(rho: &CMat, grid: &SphereGrid) -> Result<QuadratureConvergence> {
    let target = crate::linalg::trace(rho).re;
    let coarse_error = (husimi_normalization(rho, grid)? - target).abs();
    let fine_error = (husimi_normalization(rho, &grid.refined()?)? - target).abs();
    let converged = fine_error <= QUADRATURE_FLOOR || fine_error <= CONVERGENCE_RATIO * coarse_error;
    Ok(QuadratureConvergence { coarse_error, fine_error, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{heisenberg_timeline, kicked_top_floquet};
    use crate::linalg::identity;
    use crate::tomography::{haar_random_pure, pure_density};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uncertainty(j: f64, v: &CVec) -> f64 {
        let ops = angular_momentum_ops(j).unwrap();
        let ev = |o: &CMat| (v.adjoint() * o * v)[(0, 0)].re;
        let j2 = ev(&(&ops.jx * &ops.jx + &ops.jy * &ops.jy + &ops.jz * &ops.jz));
        let mean = [ev(&ops.jx), ev(&ops.jy), ev(&ops.jz)];
        (j2 - mean.iter().map(|x| x * x).sum::<f64>()) / (j * j)
    }

    #[test]
    fn grid_weights_sum_to_sphere_area() {
        for (nt, np) in [(1, 1), (7, 5), (64, 128)] {
            let g = SphereGrid::new(nt, np).unwrap();
            assert_relative_eq!(g.weights().iter().sum::<f64>(), 4.0 * PI, epsilon = 1e-12);
            assert!(g.weights().iter().all(|&w| w > 0.0));
            assert!(g.nodes().iter().all(|&(t, p)| (0.0..=PI).contains(&t) && (0.0..2.0 * PI).contains(&p)));
        }
        assert!(SphereGrid::new(0, 4).is_err());
        assert!(SphereGrid::new(4, 0).is_err());
    }

    #[test]
    fn north_pole_is_top_state() {
        let v = spin_coherent(3.5, 0.0, 1.2).unwrap();
        assert_relative_eq!(v[0].re, 1.0, epsilon = 1e-15);
        assert!(v.iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn south_pole_is_bottom_state() {
        let v = spin_coherent(2.0, PI, 0.4).unwrap();
        assert_relative_eq!(v[4].norm(), 1.0, epsilon = 1e-14);
        let r = spin_coherent_rotation(2.0, PI, 0.4).unwrap();
        assert!((&v - &r).norm() < 1e-10);
        assert!(spin_coherent_ladder(2.0, PI, 0.4).is_err());
    }

    #[test]
    fn benchmark_state_has_minimal_uncertainty() {
        let v = spin_coherent(20.0, 2.04, 2.42).unwrap();
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(uncertainty(20.0, &v), 1.0 / 20.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(spin_coherent(1.0, -0.1, 0.0).is_err());
        assert!(spin_coherent(1.0, 3.2, 0.0).is_err());
        assert!(spin_coherent(1.0, 1.0, f64::NAN).is_err());
        assert!(spin_coherent(0.3, 1.0, 0.0).is_err());
    }

    #[test]
    fn husimi_of_maximally_mixed_is_flat() {
        let d = 7;
        let rho = identity(d) * c(1.0 / d as f64, 0.0);
        let q = husimi_q(&rho, &SphereGrid::new(9, 11).unwrap()).unwrap();
        assert!(q.iter().all(|&x| (x - 1.0 / d as f64).abs() < 1e-14));
    }

    #[test]
    fn husimi_of_top_state_at_north_pole() {
        let v = spin_coherent(4.0, 0.0, 0.0).unwrap();
        let rho = pure_density(&v);
        for phi in [0.0, 1.0, 4.0] {
            assert_relative_eq!(husimi_at(&rho, 0.0, phi).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_evaluation_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = pure_density(&haar_random_pure(6, &mut rng).unwrap());
        let g = SphereGrid::new(5, 7).unwrap();
        let q = husimi_q(&rho, &g).unwrap();
        for (qi, (t, p)) in q.iter().zip(g.nodes()) {
            assert_relative_eq!(*qi, husimi_at(&rho, t, p).unwrap(), epsilon = 1e-13);
        }
    }

    #[test]
    fn husimi_rejects_non_psd() {
        let mut rho = identity(3) * c(0.5, 0.0);
        rho[(2, 2)] = c(-1e-6, 0.0);
        assert!(husimi_q(&rho, &SphereGrid::default()).is_err());
    }

    #[test]
    fn normalization_on_default_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 11, 21, 41, 81] {
            let rho = pure_density(&haar_random_pure(d, &mut rng).unwrap());
            let n = husimi_normalization(&rho, &SphereGrid::default()).unwrap();
            assert!((n - 1.0).abs() < 1e-3);
            assert!((n - 1.0).abs() < 1e-11, "d={d} err={}", (n - 1.0).abs());
        }
    }

    #[test]
    fn normalization_converges_under_refinement() {
        let rho = pure_density(&spin_coherent(10.0, 2.04, 2.42).unwrap());
        let coarse = normalization_convergence(&rho, &SphereGrid::new(4, 8).unwrap()).unwrap();
        assert!(coarse.coarse_error > 1e-3);
        assert!(coarse.ratio() <= CONVERGENCE_RATIO);
        assert!(coarse.converged);
        let fine = normalization_convergence(&rho, &SphereGrid::default()).unwrap();
        assert!(fine.converged && fine.fine_error <= QUADRATURE_FLOOR);
    }

    #[test]
    fn entropy_of_maximally_mixed_is_log_dimension() {
        for d in [2usize, 5, 21] {
            let rho = identity(d);
            let s = husimi_entropy(&rho, &SphereGrid::default()).unwrap();
            assert_relative_eq!(s, (d as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn coherent_entropy_is_wehrl_minimum() {
        // The minimum over all states is 2j/(2j+1), attained by coherent states.
        // Q ln Q is not smooth where Q vanishes, hence the looser tolerance at small j.
        for (j, tol) in [(0.5, 1e-7), (2.0, 1e-8), (10.0, 1e-8)] {
            let rho = pure_density(&spin_coherent(j, 1.1, 0.3).unwrap());
            let s = husimi_entropy(&rho, &SphereGrid::default()).unwrap();
            assert_relative_eq!(s, 2.0 * j / (2.0 * j + 1.0), epsilon = tol);
        }
    }

    #[test]
    fn coherent_projector_beats_test_set() {
        let j = 5.0;
        let d = 11;
        let g = SphereGrid::default();
        let s_coh = husimi_entropy(&pure_density(&spin_coherent(j, 0.7, 2.0).unwrap()), &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = angular_momentum_ops(j).unwrap();
        let mut others = vec![ops.jx.clone(), ops.jy.clone(), ops.jz.clone(), identity(d)];
        for _ in 0..10 {
            others.push(pure_density(&haar_random_pure(d, &mut rng).unwrap()));
        }
        let mut dicke = CVec::zeros(d);
        dicke[5] = c(1.0, 0.0);
        others.push(pure_density(&dicke));
        for o in &others {
            assert!(husimi_entropy(o, &g).unwrap() > s_coh + 1e-6);
        }
    }

    #[test]
    fn entropy_of_zero_operator_is_error() {
        assert!(matches!(husimi_entropy(&CMat::zeros(3, 3), &SphereGrid::default()), Err(Error::ZeroOperator)));
    }

    #[test]
    fn evolved_jy_spreads_more_under_chaos() {
        let j = 10.0;
        let g = SphereGrid::default();
        let o = angular_momentum_ops(j).unwrap().jy;
        let s: Vec<f64> = [0.5, 1.5, 2.5, 4.0, 7.0]
            .iter()
            .map(|&lambda| {
                let u = kicked_top_floquet(j, lambda, PI / 2.0).unwrap();
                let tl = heisenberg_timeline(&o, &u, 2).unwrap();
                husimi_entropy(tl.get(2), &g).unwrap()
            })
            .collect();
        for w in s.windows(2) {
            assert!(w[1] > w[0] + 1e-3, "{s:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn constructions_agree(two_j in 1usize..24, theta in 0.0..(PI - 1e-6), phi in 0.0..(2.0 * PI)) {
            let j = two_j as f64 / 2.0;
            let a = spin_coherent(j, theta, phi).unwrap();
            let b = spin_coherent_ladder(j, theta, phi).unwrap();
            let r = spin_coherent_rotation(j, theta, phi).unwrap();
            prop_assert!((&a - &b).norm() < 1e-10);
            prop_assert!((&a - &r).norm() < 1e-10);
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn uncertainty_is_one_over_j(two_j in 1usize..60, theta in 0.0..PI, phi in 0.0..(2.0 * PI)) {
            let j = two_j as f64 / 2.0;
            let v = spin_coherent(j, theta, phi).unwrap();
            prop_assert!((uncertainty(j, &v) - 1.0 / j).abs() < 1e-12);
        }

        #[test]
        fn husimi_nonnegative(d in 2usize..16, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = pure_density(&haar_random_pure(d, &mut rng).unwrap());
            let q = husimi_q(&rho, &SphereGrid::new(16, 32).unwrap()).unwrap();
            prop_assert!(q.iter().all(|&x| x >= -1e-12 && x <= 1.0 + 1e-12));
        }
    }
}
