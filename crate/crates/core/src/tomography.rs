//! Measurement records, covariance, maximum-likelihood estimation and the
//! positivity-constrained projection.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{heisenberg_timeline, propagator, ModelSpec, OperatorTimeline};
use crate::error::{Error, Result};
use crate::linalg::{
    c, complex_gaussian, ensure_hermitian, ensure_same_dim, ensure_square, hermitian_eigen, hermitian_eigenvalues,
    project_simplex, spectral_apply, trace, CMat, CVec, RMat, RVec,
};
use crate::operator_space::{bloch_decode, bloch_encode, BlochVector, HermitianBasis};

pub const DEFAULT_SIGMA: f64 = 0.1;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Negative eigenvalues down to this size are treated as roundoff of a state.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Haar-random pure state: a normalized complex Gaussian vector.
pub fn haar_random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CVec> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("state dimension must be >= 2, got {d}")));
    }
    let v = CVec::from_fn(d, |_, _| complex_gaussian(rng));
    Ok(v.normalize())
}

pub fn pure_density(psi: &CVec) -> CMat {
    psi * psi.adjoint()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub values: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `n` entries as a record of their own.
    pub fn prefix(&self, n: usize) -> Self {
        Self { values: self.values[..n.min(self.values.len())].to_vec(), sigma: self.sigma, seed: self.seed }
    }
}

/// One record entry per timeline operator: M_n = Tr(O_n ρ₀) + σ·W_n.
pub fn generate_record(rho0: &CMat, timeline: &OperatorTimeline, sigma: f64, seed: u64) -> Result<MeasurementRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_record_with_rng(rho0, timeline.steps(), sigma, &mut rng).map(|values| MeasurementRecord { values, sigma, seed })
}

pub fn generate_record_with_rng<R: Rng + ?Sized>(
    rho0: &CMat,
    ops: &[CMat],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be a finite non-negative number, got {sigma}")));
    }
    let d = ensure_square(rho0, "state")?;
    let mut values = Vec::with_capacity(ops.len());
    for op in ops {
        ensure_same_dim(d, op.nrows())?;
        // Tr(O ρ) = Σ_ab O_ab ρ_ba
        let mut expectation = 0.0;
        for a in 0..d {
            for b in 0..d {
                expectation += (op[(a, b)] * rho0[(b, a)]).re;
            }
        }
        let noise: f64 = rng.sample(StandardNormal);
        values.push(expectation + sigma * noise);
    }
    Ok(values)
}

/// Thin singular structure of the design matrix on its measured subspace.
#[derive(Clone, Debug)]
pub struct MeasuredSubspace {
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors (p × rank) for singular values above tolerance.
    pub directions: RMat,
    pub rank: usize,
}

impl MeasuredSubspace {
    pub fn from_design(design: &RMat, rank_tol: f64) -> Self {
        let (n, p) = design.shape();
        if n == 0 {
            return Self { singular_values: Vec::new(), directions: RMat::zeros(p, 0), rank: 0 };
        }
        // Reduce to a square factor first; QR is far cheaper than SVD on tall shapes.
        let (values, right) = if n >= p {
            let r = design.clone().qr().r();
            let svd = r.svd(false, true);
            (svd.singular_values, svd.v_t.expect("requested V").transpose())
        } else {
            let qr = design.transpose().qr();
            let (q, r) = qr.unpack();
            let svd = r.transpose().svd(false, true);
            let w = svd.v_t.expect("requested V").transpose();
            (svd.singular_values, q * w)
        };
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let singular_values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
        let largest = singular_values.first().copied().unwrap_or(0.0);
        let rank = if largest > 0.0 {
            singular_values.iter().take_while(|&&s| s > rank_tol * largest).count()
        } else {
            0
        };
        let directions = RMat::from_fn(p, rank, |row, col| right[(row, order[col])]);
        Self { singular_values, directions, rank }
    }

    /// Eigenvalues s² of C⁻¹ on the measured subspace, descending.
    pub fn weights(&self) -> Vec<f64> {
        self.singular_values[..self.rank].iter().map(|s| s * s).collect()
    }
}

#[derive(Clone, Debug)]
pub struct CovarianceData {
    design: RMat,
    subspace: MeasuredSubspace,
    rank_tol: f64,
}

impl CovarianceData {
    pub fn from_design(design: RMat, rank_tol: f64) -> Result<Self> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::param("rank_tol", format!("must lie in (0, 1), got {rank_tol}")));
        }
        let subspace = MeasuredSubspace::from_design(&design, rank_tol);
        Ok(Self { design, subspace, rank_tol })
    }

    pub fn design(&self) -> &RMat {
        &self.design
    }

    /// C⁻¹ = ÕᵀÕ.
    pub fn inv_cov(&self) -> RMat {
        self.design.tr_mul(&self.design)
    }

    pub fn trace_inv_cov(&self) -> f64 {
        self.design.norm_squared()
    }

    /// All eigenvalues of C⁻¹, descending, padded with zeros to d²−1.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let p = self.design.ncols();
        let mut v: Vec<f64> = self.subspace.singular_values.iter().map(|s| s * s).collect();
        v.resize(p, 0.0);
        v
    }

    pub fn subspace(&self) -> &MeasuredSubspace {
        &self.subspace
    }

    pub fn rank(&self) -> usize {
        self.subspace.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.design.nrows());
        Self::from_design(self.design.rows(0, n).into_owned(), self.rank_tol)
    }
}

pub fn build_covariance(timeline: &OperatorTimeline, basis: &HermitianBasis, rank_tol: f64) -> Result<CovarianceData> {
    ensure_same_dim(basis.dim(), timeline.dim())?;
    CovarianceData::from_design(basis.design(timeline.steps())?, rank_tol)
}

/// Pseudoinverse estimate r = V S⁻² Vᵀ Õᵀ M on the measured subspace.
pub fn ml_estimate(record: &MeasurementRecord, cov: &CovarianceData) -> Result<BlochVector> {
    ml_estimate_values(&record.values, cov.design(), cov.subspace())
}

fn ml_estimate_values(values: &[f64], design: &RMat, subspace: &MeasuredSubspace) -> Result<BlochVector> {
    if values.is_empty() {
        return Err(Error::EmptyRecord);
    }
    ensure_same_dim(design.nrows(), values.len())?;
    let m = RVec::from_column_slice(values);
    let projected = design.tr_mul(&m);
    let mut coeffs = subspace.directions.tr_mul(&projected);
    for (k, w) in coeffs.iter_mut().enumerate() {
        let s = subspace.singular_values[k];
        *w /= s * s;
    }
    Ok(BlochVector(&subspace.directions * coeffs))
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Bound on the projected-gradient residual.
    pub tol: f64,
    /// Cap on the total number of Newton steps.
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 400 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Decoded density matrix and its Euclidean projection onto the state space,
/// both in Bloch coordinates.
fn project_state(z: &RVec, basis: &HermitianBasis) -> (RVec, f64) {
    let rho = bloch_decode(&BlochVector(z.clone()), basis).expect("coordinate length matches basis");
    let (values, vectors) = hermitian_eigen(&rho);
    let min_eig = values[0];
    if min_eig >= -FEASIBILITY_TOL {
        return (z.clone(), min_eig);
    }
    let clipped = project_simplex(&values, 1.0);
    let projected = spectral_apply(&clipped, &vectors, |v| c(v, 0.0));
    (basis.coordinates(&projected).expect("basis dimension matches"), min_eig)
}

/// Barrier residual below which the low-rank polish is attempted.
const POLISH_START: f64 = 1e-4;

/// Largest number of real unknowns (2·d·rank) for which the polish is tried.
const MAX_POLISH_VARS: usize = 600;

/// Candidate ranks for the low-rank polish: up to three spectral gaps of at
/// least a factor ten below 1e-4, sharpest first.
fn polish_ranks(x: &RVec, basis: &HermitianBasis) -> Vec<usize> {
    let Ok(y) = bloch_decode(&BlochVector(x.clone()), basis) else { return Vec::new() };
    let desc: Vec<f64> = hermitian_eigenvalues(&y).into_iter().rev().collect();
    let max_rank = MAX_POLISH_VARS / (2 * desc.len());
    let mut gaps: Vec<(f64, usize)> = (1..desc.len().min(max_rank + 1))
        .filter(|&m| desc[m] < 1e-4 && desc[m] < 0.1 * desc[m - 1])
        .map(|m| (desc[m] / desc[m - 1].max(f64::MIN_POSITIVE), m))
        .collect();
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    gaps.into_iter().take(3).map(|(_, m)| m).collect()
}

/// log det of a Hermitian positive-definite matrix, None if not positive definite.
fn log_det_pd(a: &CMat) -> Option<f64> {
    let values = hermitian_eigenvalues(a);
    if !(values[0] > 0.0) {
        return None;
    }
    Some(values.iter().map(|v| v.ln()).sum())
}

/// Weighted least-squares projection onto the positive cone, shared by every
/// state reconstructed against one covariance.
#[derive(Clone, Debug)]
pub struct PsdProjector<'a> {
    basis: &'a HermitianBasis,
    directions: RMat,
    weights: Vec<f64>,
    /// Measured directions as traceless operators.
    operators: Vec<CMat>,
    options: SolverOptions,
}

#[derive(Clone, Debug)]
pub struct PsdProjection {
    pub r_bar: BlochVector,
    pub rho_bar: CMat,
    pub diagnostics: SolverDiagnostics,
}

struct NewtonStep {
    delta: CMat,
    delta_a: RVec,
    decrement: f64,
}

impl<'a> PsdProjector<'a> {
    pub fn new(subspace: &MeasuredSubspace, basis: &'a HermitianBasis, options: SolverOptions) -> Result<Self> {
        ensure_same_dim(basis.len(), subspace.directions.nrows())?;
        let weights = subspace.weights();
        let operators = (0..subspace.rank)
            .map(|i| basis.synthesize(subspace.directions.column(i).into_owned().as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, directions: subspace.directions.clone(), weights, operators, options })
    }

    fn gradient(&self, x: &RVec, target: &RVec) -> RVec {
        let mut g = self.directions.tr_mul(&(x - target));
        for (k, v) in g.iter_mut().enumerate() {
            *v *= self.weights[k];
        }
        &self.directions * g
    }

    /// Norm of the projected-gradient map x − Π(x − ∇f(x)/L), zero exactly at optima.
    pub fn kkt_residual(&self, x: &RVec, target: &RVec) -> f64 {
        let lmax = self.weights.first().copied().unwrap_or(0.0);
        if lmax == 0.0 {
            return (x - project_state(x, self.basis).0).norm();
        }
        let step = x - self.gradient(x, target) / lmax;
        (x - project_state(&step, self.basis).0).norm()
    }

    /// Minimizes (r − r_ml)ᵀ C⁻¹ (r − r_ml) over states.
    ///
    /// Log-barrier path following: t f(ρ) − log det ρ is minimized by Newton's
    /// method for increasing t until the projected-gradient residual drops below
    /// tolerance. Directions outside the measured subspace carry no cost and
    /// end up at the maximum-determinant completion.
    pub fn project(&self, r_ml: &BlochVector) -> Result<PsdProjection> {
        ensure_same_dim(self.basis.len(), r_ml.len())?;
        let target = r_ml.0.clone();
        let (start, min_eig) = project_state(&target, self.basis);
        if min_eig >= -FEASIBILITY_TOL {
            return self.finish(target.clone(), &target, 0, true);
        }
        let lmax = self.weights.first().copied().unwrap_or(0.0);
        if self.operators.is_empty() || lmax == 0.0 {
            return self.finish(start, &target, 0, true);
        }
        let d = self.basis.dim();
        let w: Vec<f64> = self.weights.iter().map(|v| v / lmax).collect();
        let c_target = self.directions.tr_mul(&target);
        let mut y = CMat::identity(d, d) * c(1.0 / d as f64, 0.0);
        let mut t = 1.0;
        let mut iterations = 0;
        let mut best: Option<(f64, RVec)> = None;
        while iterations < self.options.max_iters {
            for _ in 0..60 {
                if iterations >= self.options.max_iters {
                    break;
                }
                iterations += 1;
                let Some(step) = self.newton_step(&y, t, &w, &c_target) else { break };
                if step.decrement < 1e-10 {
                    break;
                }
                let Some(s) = self.line_search(&y, &step, t, &w, &c_target) else { break };
                y += &step.delta * c(s, 0.0);
                y = (&y + y.adjoint()) * c(0.5, 0.0);
                if step.decrement < 1e-6 && s == 1.0 {
                    break;
                }
            }
            let x = self.basis.coordinates(&y)?;
            let mut residual = self.kkt_residual(&x, &target);
            let mut x = x;
            if residual > self.options.tol && residual < POLISH_START {
                (residual, x) = self.polish(x, residual, &w, &c_target, &target);
            }
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, x));
            }
            if residual <= self.options.tol || t > 1e16 {
                break;
            }
            t *= 20.0;
        }
        let (residual, x) = best.expect("at least one stage ran");
        self.finish(x, &target, iterations, residual <= self.options.tol)
    }

    /// Best of the low-rank polishes at each candidate rank, or `x` itself.
    fn polish(&self, x: RVec, residual: f64, w: &[f64], c_target: &RVec, target: &RVec) -> (f64, RVec) {
        let mut best = (residual, x);
        for m in polish_ranks(&best.1, self.basis) {
            if let Some(polished) = self.polish_low_rank(&best.1, m, w, c_target) {
                let r = self.kkt_residual(&polished, target);
                if r < best.0 {
                    best = (r, polished);
                }
            }
        }
        best
    }

    /// Damped Newton on ρ = ZZ†/Tr(ZZ†) at rank m, seeded from the barrier
    /// solution.
    ///
    /// Near a low-rank optimum the barrier Newton systems lose accuracy and the
    /// path stalls around a 1e-7 residual; on the face the problem is smooth
    /// and Newton converges quadratically. The gauge freedom Z → ZV makes the
    /// Hessian singular, which the damping absorbs.
    fn polish_low_rank(&self, x: &RVec, m: usize, w: &[f64], c_target: &RVec) -> Option<RVec> {
        let y = bloch_decode(&BlochVector(x.clone()), self.basis).ok()?;
        let (values, vectors) = hermitian_eigen(&y);
        let d = values.len();
        let desc: Vec<f64> = values.iter().rev().copied().collect();
        let mut z = CMat::from_fn(d, m, |r, col| vectors[(r, d - 1 - col)] * desc[col].max(0.0).sqrt());
        let k = w.len();
        let nvar = 2 * d * m;
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let flatten = |a: &CMat| RVec::from_fn(nvar, |i, _| if i < d * m { a[(i % d, i / d)].re } else { a[((i - d * m) % d, (i - d * m) / d)].im });
        let eval = |z: &CMat| -> Option<(RVec, f64)> {
            let n = z.norm_squared();
            let rho = z * z.adjoint() * c(1.0 / n, 0.0);
            let a = self.directions.tr_mul(&self.basis.coordinates(&rho).ok()?);
            let cost = (0..k).map(|i| w[i] * (a[i] - c_target[i]).powi(2)).sum::<f64>();
            Some((a, cost))
        };
        let (mut a, mut cost) = eval(&z)?;
        let mut mu = 1e-8;
        for _ in 0..60 {
            let n = z.norm_squared();
            let mut jac = RMat::zeros(k, nvar);
            let mut res = RVec::zeros(k);
            let mut g_op = CMat::zeros(d, d);
            for (i, op) in self.operators.iter().enumerate() {
                let g = (op * &z - &z * c(a[i], 0.0)) * c(2.0 * sw[i] / n, 0.0);
                for (idx, v) in g.iter().enumerate() {
                    jac[(i, idx)] = v.re;
                    jac[(i, d * m + idx)] = v.im;
                }
                res[i] = sw[i] * (a[i] - c_target[i]);
                g_op += op * c(sw[i] * res[i], 0.0);
            }
            let grad = jac.tr_mul(&res);
            if grad.norm() < 1e-15 {
                break;
            }
            // Second-order part: the Hessian of Tr(Z†GZ)/Tr(Z†Z) for G = Σ √w r E.
            let q = (z.adjoint() * &g_op * &z).trace().re;
            let gq = flatten(&(&g_op * &z * c(2.0, 0.0)));
            let gn = flatten(&(&z * c(2.0, 0.0)));
            let mut hess = jac.tr_mul(&jac);
            for col in 0..m {
                for r in 0..d {
                    for r2 in 0..d {
                        let (re, im) = (2.0 * g_op[(r2, r)].re / n, 2.0 * g_op[(r2, r)].im / n);
                        let (i_re, j_re) = (col * d + r2, col * d + r);
                        let (i_im, j_im) = (d * m + i_re, d * m + j_re);
                        hess[(i_re, j_re)] += re;
                        hess[(i_im, j_im)] += re;
                        hess[(i_im, j_re)] += im;
                        hess[(i_re, j_im)] -= im;
                    }
                }
            }
            hess -= (&gq * gn.transpose() + &gn * gq.transpose()) / (n * n);
            hess += &gn * gn.transpose() * (2.0 * q / (n * n * n));
            for v in 0..nvar {
                hess[(v, v)] -= 2.0 * q / (n * n);
            }
            let scale = hess.diagonal().amax().max(1e-300);
            let mut improved = false;
            while mu < 1e10 {
                let mut lhs = hess.clone();
                for v in 0..nvar {
                    lhs[(v, v)] += mu * scale;
                }
                let Some(step) = lhs.cholesky().map(|ch| ch.solve(&(-&grad))) else {
                    mu *= 10.0;
                    continue;
                };
                let trial = &z + CMat::from_fn(d, m, |r, col| {
                    let idx = col * d + r;
                    c(step[idx], step[d * m + idx])
                });
                if let Some((a_new, cost_new)) = eval(&trial) {
                    if cost_new < cost {
                        z = trial;
                        a = a_new;
                        cost = cost_new;
                        mu = (mu / 10.0).max(1e-14);
                        improved = true;
                        break;
                    }
                }
                mu *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let n = z.norm_squared();
        self.basis.coordinates(&(&z * z.adjoint() * c(1.0 / n, 0.0))).ok()
    }

    /// Equality-constrained Newton direction for t f(Y) − log det Y with Tr Y fixed.
    ///
    /// The Hessian is Y⁻¹·Y⁻¹ plus a rank-k term, inverted with Woodbury so the
    /// only dense solve is k × k.
    fn newton_step(&self, y: &CMat, t: f64, w: &[f64], c_target: &RVec) -> Option<NewtonStep> {
        let k = self.operators.len();
        let x = self.basis.coordinates(y).ok()?;
        let a = self.directions.tr_mul(&x);
        let y2 = y * y;
        let x2 = self.basis.coordinates(&y2).ok()?;
        let h = self.directions.tr_mul(&x2);
        let mut q_coords = RMat::zeros(self.basis.len(), k);
        for (i, op) in self.operators.iter().enumerate() {
            let q = y * op * y;
            q_coords.set_column(i, &self.basis.coordinates(&q).ok()?);
        }
        let kmat = self.directions.tr_mul(&q_coords);
        // M = K + diag(1/(t w)) is solved as S (I + S K S)⁻¹ S with S = diag(√(t w)):
        // at large t the diagonal falls below the rounding error of K.
        let sc: Vec<f64> = w.iter().map(|wi| (t * wi).sqrt()).collect();
        let mut m = RMat::from_fn(k, k, |i, j| 0.5 * (kmat[(i, j)] + kmat[(j, i)]) * sc[i] * sc[j]);
        for i in 0..k {
            m[(i, i)] += 1.0;
        }
        let chol = m.cholesky()?;
        let solve = |v: &RVec| {
            let scaled = RVec::from_fn(k, |i, _| v[i] * sc[i]);
            let x = chol.solve(&scaled);
            RVec::from_fn(k, |i, _| x[i] * sc[i])
        };
        let beta = solve(&(&a * 2.0 - c_target));
        let mh = solve(&h);
        let tr_y2 = y2.diagonal().iter().map(|z| z.re).sum::<f64>();
        let nu = -(h.dot(&beta) - 1.0) / (tr_y2 - h.dot(&mh));
        let gamma = &mh * nu - &beta;
        let delta_x = &x - &x2 * nu + &q_coords * &gamma;
        let delta_a = &a - &h * nu + &kmat * &gamma;
        let grad_dot = (0..k).map(|i| t * w[i] * (a[i] - c_target[i]) * delta_a[i]).sum::<f64>()
            - (y.nrows() as f64 - nu + gamma.dot(&a));
        let delta = self.basis.synthesize(delta_x.as_slice()).ok()?;
        Some(NewtonStep { delta, delta_a, decrement: (-grad_dot).max(0.0) })
    }

    fn line_search(&self, y: &CMat, step: &NewtonStep, t: f64, w: &[f64], c_target: &RVec) -> Option<f64> {
        let x = self.basis.coordinates(y).ok()?;
        let a = self.directions.tr_mul(&x);
        let base = log_det_pd(y)?;
        let mut s = 1.0;
        while s > 1e-14 {
            let trial = y + &step.delta * c(s, 0.0);
            if let Some(ld) = log_det_pd(&trial) {
                let df: f64 = (0..w.len())
                    .map(|i| {
                        let da = step.delta_a[i];
                        w[i] * ((a[i] - c_target[i]) * s * da + 0.5 * s * s * da * da)
                    })
                    .sum();
                let change = t * df - (ld - base);
                if change <= -0.25 * s * step.decrement {
                    return Some(s);
                }
            }
            s *= 0.5;
        }
        None
    }

    fn finish(&self, z: RVec, target: &RVec, iterations: usize, converged: bool) -> Result<PsdProjection> {
        let residual = self.kkt_residual(&z, target);
        let r_bar = BlochVector(z);
        let rho_bar = bloch_decode(&r_bar, self.basis)?;
        Ok(PsdProjection {
            r_bar,
            rho_bar,
            diagnostics: SolverDiagnostics { iterations, residual, converged },
        })
    }
}

pub fn psd_project(r_ml: &BlochVector, cov: &CovarianceData, basis: &HermitianBasis) -> Result<PsdProjection> {
    psd_project_with(r_ml, cov, basis, SolverOptions::default())
}

pub fn psd_project_with(
    r_ml: &BlochVector,
    cov: &CovarianceData,
    basis: &HermitianBasis,
    options: SolverOptions,
) -> Result<PsdProjection> {
    PsdProjector::new(cov.subspace(), basis, options)?.project(r_ml)
}

/// ⟨ψ|ρ|ψ⟩ clamped to [0, 1].
pub fn fidelity(psi0: &CVec, rho_bar: &CMat) -> Result<f64> {
    ensure_same_dim(rho_bar.nrows(), psi0.len())?;
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("state vector must be normalized, norm {norm}")));
    }
    let f = (psi0.adjoint() * rho_bar * psi0)[(0, 0)].re;
    if !(-1e-8..=1.0 + 1e-8).contains(&f) {
        return Err(Error::Consistency(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub step: usize,
    pub r_ml: BlochVector,
    pub r_bar: BlochVector,
    pub rho_bar: CMat,
    pub fidelity: f64,
    pub solver: SolverDiagnostics,
}

/// Everything needed to reconstruct any state from the first n record entries:
/// the truncated design, its measured subspace and the projector.
pub struct StepEstimator<'a> {
    pub step: usize,
    design: RMat,
    /// Tr(O_n)/d, the part of each record entry no state parameter can explain.
    offsets: Vec<f64>,
    subspace: MeasuredSubspace,
    projector: PsdProjector<'a>,
}

impl<'a> StepEstimator<'a> {
    pub fn new(design: RMat, basis: &'a HermitianBasis, rank_tol: f64, options: SolverOptions) -> Result<Self> {
        let subspace = MeasuredSubspace::from_design(&design, rank_tol);
        let projector = PsdProjector::new(&subspace, basis, options)?;
        let offsets = vec![0.0; design.nrows()];
        Ok(Self { step: design.nrows(), design, offsets, subspace, projector })
    }

    /// Record offsets Tr(O_n)/d for observables with a trace.
    pub fn with_offsets(mut self, offsets: &[f64]) -> Result<Self> {
        ensure_same_dim(self.step, offsets.len())?;
        self.offsets = offsets.to_vec();
        Ok(self)
    }

    pub fn subspace(&self) -> &MeasuredSubspace {
        &self.subspace
    }

    /// Reconstructs from the first `step` entries of `record`.
    pub fn reconstruct(&self, record: &[f64], psi0: &CVec) -> Result<ReconstructionResult> {
        if record.len() < self.step {
            return Err(Error::DimensionMismatch { expected: self.step, found: record.len() });
        }
        let values: Vec<f64> = record[..self.step].iter().zip(&self.offsets).map(|(m, o)| m - o).collect();
        let r_ml = ml_estimate_values(&values, &self.design, &self.subspace)?;
        let projection = self.projector.project(&r_ml)?;
        let fidelity = fidelity(psi0, &projection.rho_bar)?;
        Ok(ReconstructionResult {
            step: self.step,
            r_ml,
            r_bar: projection.r_bar,
            rho_bar: projection.rho_bar,
            fidelity,
            solver: projection.diagnostics,
        })
    }
}

/// Estimator-side design for a whole timeline; hands out per-step estimators.
pub struct Reconstructor<'a> {
    basis: &'a HermitianBasis,
    design: RMat,
    offsets: Vec<f64>,
    rank_tol: f64,
    options: SolverOptions,
}

impl<'a> Reconstructor<'a> {
    /// `ops[n]` is the operator measured at record entry n.
    pub fn new(basis: &'a HermitianBasis, ops: &[CMat], rank_tol: f64, options: SolverOptions) -> Result<Self> {
        let d = basis.dim() as f64;
        let offsets = ops.iter().map(|o| trace(o).re / d).collect();
        Ok(Self { basis, design: basis.design(ops)?, offsets, rank_tol, options })
    }

    pub fn len(&self) -> usize {
        self.design.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.design.nrows() == 0
    }

    pub fn design(&self) -> &RMat {
        &self.design
    }

    pub fn estimator(&self, step: usize) -> Result<StepEstimator<'a>> {
        if step == 0 || step > self.design.nrows() {
            return Err(Error::param("step", format!("must lie in 1..={}, got {step}", self.design.nrows())));
        }
        StepEstimator::new(self.design.rows(0, step).into_owned(), self.basis, self.rank_tol, self.options)?
            .with_offsets(&self.offsets[..step])
    }
}

#[derive(Clone, Debug)]
pub struct TomographyRun {
    pub fidelity: Vec<f64>,
    pub results: Vec<ReconstructionResult>,
}

/// Full pipeline for one state: the n-th record entry measures O_{n−1}, and
/// each prefix of the record is reconstructed independently.
pub fn run_tomography(
    model: &ModelSpec,
    psi0: &CVec,
    observable: &CMat,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<TomographyRun> {
    if n == 0 {
        return Err(Error::EmptyRecord);
    }
    let u = propagator(model)?;
    let timeline = heisenberg_timeline(observable, &u, n - 1)?;
    let basis = HermitianBasis::gell_mann(u.dim())?;
    let rho0 = pure_density(psi0);
    ensure_hermitian(&rho0, 1e-10, "state")?;
    let record = generate_record(&rho0, &timeline, sigma, seed)?;
    let recon = Reconstructor::new(&basis, timeline.steps(), DEFAULT_RANK_TOL, SolverOptions::default())?;
    let mut results = Vec::with_capacity(n);
    for step in 1..=n {
        results.push(recon.estimator(step)?.reconstruct(&record.values, psi0)?);
    }
    Ok(TomographyRun { fidelity: results.iter().map(|r| r.fidelity).collect(), results })
}

/// Bloch vector of a pure state.
pub fn pure_bloch(psi: &CVec, basis: &HermitianBasis) -> Result<BlochVector> {
    bloch_encode(&pure_density(psi), basis)
}

/// Unit vector e_k of length d.
pub fn basis_state(d: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[k] = c(1.0, 0.0);
    v
}

pub fn real_vector(values: &[f64]) -> RVec {
    DVector::from_column_slice(values)
}
