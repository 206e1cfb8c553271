//! Tomography when the dynamics generating the record differ from the
//! dynamics assumed by the estimator.
//!
//! Convention: unprimed quantities belong to the true (perturbed) propagator,
//! which produces the measurement record. Primed quantities belong to the
//! model (ideal) propagator, which builds the estimator's design matrix.

use rayon::prelude::*;

use crate::dynamics::{heisenberg_timeline_matrix, kicked_top_floquet, OperatorTimeline, UnitaryPropagator};
use crate::error::{Error, Result};
use crate::linalg::{
    commutator, ensure_hermitian, ensure_same_dim, ensure_square, ensure_unitary, hermitian_eigen, hs_inner_unchecked,
    hs_norm_sq, identity, matrix_power, unitary_power, CMat, CVec, RMat,
};
use crate::operator_space::{bloch_encode, regularize_operator, HermitianBasis};
use crate::quantifiers::{ordered_bloch_values, BlochOrder};
use crate::tomography::{
    fidelity, generate_record, pure_density, MeasurementRecord, ReconstructionResult, Reconstructor, SolverOptions,
    StepEstimator,
};

/// Eigenvalues below this are clamped before taking logarithms.
pub const RELATIVE_ENTROPY_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Perturbation {
    KickedTopLambda { delta_lambda: f64 },
    Custom(String),
}

#[derive(Clone, Debug)]
pub struct PerturbedPair {
    pub u_true: UnitaryPropagator,
    pub u_model: UnitaryPropagator,
    pub descriptor: Perturbation,
}

impl PerturbedPair {
    pub fn new(u_true: UnitaryPropagator, u_model: UnitaryPropagator, descriptor: Perturbation) -> Result<Self> {
        ensure_same_dim(u_true.dim(), u_model.dim())?;
        ensure_unitary(&u_true.matrix, 1e-10, "true propagator")?;
        ensure_unitary(&u_model.matrix, 1e-10, "model propagator")?;
        Ok(Self { u_true, u_model, descriptor })
    }

    pub fn dim(&self) -> usize {
        self.u_true.dim()
    }

    /// Heisenberg timelines O_0..O_n under the true and the model propagator.
    pub fn timelines(&self, o: &CMat, n: usize) -> Result<(OperatorTimeline, OperatorTimeline)> {
        Ok((
            heisenberg_timeline_matrix(o, &self.u_true.matrix, n)?,
            heisenberg_timeline_matrix(o, &self.u_model.matrix, n)?,
        ))
    }
}

/// True map with λ + δλ, model map with λ, same α.
pub fn perturbed_kicked_top(j: f64, lambda: f64, alpha: f64, delta_lambda: f64) -> Result<PerturbedPair> {
    if !delta_lambda.is_finite() {
        return Err(Error::param("delta_lambda", "must be finite"));
    }
    PerturbedPair::new(
        kicked_top_floquet(j, lambda + delta_lambda, alpha)?,
        kicked_top_floquet(j, lambda, alpha)?,
        Perturbation::KickedTopLambda { delta_lambda },
    )
}

/// Reconstructs from `record` (true dynamics) with the model timeline's
/// design, at each requested prefix length.
pub fn mismatched_reconstruction(
    record: &MeasurementRecord,
    model_timeline: &OperatorTimeline,
    basis: &HermitianBasis,
    psi0: &CVec,
    steps: &[usize],
    options: SolverOptions,
    rank_tol: f64,
) -> Result<Vec<ReconstructionResult>> {
    if record.len() != model_timeline.steps().len() {
        return Err(Error::DimensionMismatch { expected: model_timeline.steps().len(), found: record.len() });
    }
    let recon = Reconstructor::new(basis, model_timeline.steps(), rank_tol, options)?;
    steps
        .par_iter()
        .map(|&n| recon.estimator(n)?.reconstruct(&record.values, psi0))
        .collect()
}

/// Record from the true pair member, estimator from the model, for one state.
/// Record entry n measures O_{n−1}, as in the ideal pipeline.
#[allow(clippy::too_many_arguments)]
pub fn run_mismatched(
    pair: &PerturbedPair,
    o: &CMat,
    psi0: &CVec,
    n: usize,
    sigma: f64,
    seed: u64,
    steps: &[usize],
    basis: &HermitianBasis,
) -> Result<Vec<ReconstructionResult>> {
    if n == 0 {
        return Err(Error::EmptyRecord);
    }
    let (truth, model) = pair.timelines(o, n - 1)?;
    let record = generate_record(&pure_density(psi0), &truth, sigma, seed)?;
    mismatched_reconstruction(
        &record,
        &model,
        basis,
        psi0,
        steps,
        SolverOptions::default(),
        crate::tomography::DEFAULT_RANK_TOL,
    )
}

/// F_O = Tr(O_n O'_n)/Tr(O²).
pub fn operator_loschmidt_echo(o_n: &CMat, o_n_prime: &CMat, o: &CMat) -> Result<f64> {
    ensure_same_dim(o.nrows(), o_n.nrows())?;
    ensure_same_dim(o.nrows(), o_n_prime.nrows())?;
    let norm = hs_norm_sq(o);
    if norm <= 1e-300 {
        return Err(Error::ZeroOperator);
    }
    Ok(hs_inner_unchecked(o_n, o_n_prime).re / norm)
}

/// D(ρ‖σ) between the regularized operators, eigenvalues clamped at 1e-12.
pub fn operator_relative_entropy(o_n: &CMat, o_n_prime: &CMat) -> Result<f64> {
    ensure_same_dim(o_n.nrows(), o_n_prime.nrows())?;
    let (p, vp) = hermitian_eigen(&regularize_operator(o_n)?);
    let (q, vq) = hermitian_eigen(&regularize_operator(o_n_prime)?);
    let overlap = vp.adjoint() * vq;
    let log_q: Vec<f64> = q.iter().map(|x| x.max(RELATIVE_ENTROPY_CLAMP).ln()).collect();
    let mut d = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi <= 0.0 {
            continue;
        }
        let cross: f64 = log_q.iter().enumerate().map(|(k, lq)| overlap[(i, k)].norm_sqr() * lq).sum();
        d += pi * (pi.max(RELATIVE_ENTROPY_CLAMP).ln() - cross);
    }
    Ok(d)
}

/// 1/(2j⁴), the kicked-top normalization of the incompatibility.
pub fn spin_incompatibility_norm(j: f64) -> f64 {
    1.0 / (2.0 * j.powi(4))
}

/// 1/(2·Tr(O²)²), the default for observables without a spin label.
pub fn default_incompatibility_norm(o: &CMat) -> Result<f64> {
    let n = hs_norm_sq(o);
    if n <= 1e-300 {
        return Err(Error::ZeroOperator);
    }
    Ok(1.0 / (2.0 * n * n))
}

/// I_O = norm·Tr([O_t, O'_t]†[O_t, O'_t]).
pub fn operator_incompatibility(o_t: &CMat, o_t_prime: &CMat, normalization: f64) -> Result<f64> {
    ensure_same_dim(o_t.nrows(), o_t_prime.nrows())?;
    ensure_hermitian(o_t, 1e-8, "O_t")?;
    ensure_hermitian(o_t_prime, 1e-8, "O'_t")?;
    Ok(normalization * hs_norm_sq(&commutator(o_t, o_t_prime)))
}

/// 𝒰_n = U'ⁿ U†ⁿ: n model steps forward after n true steps backward.
pub fn error_unitary(u_true: &UnitaryPropagator, u_model: &UnitaryPropagator, n: usize) -> Result<CMat> {
    ensure_same_dim(u_true.dim(), u_model.dim())?;
    Ok(matrix_power(&u_model.matrix, n) * matrix_power(&u_true.matrix, n).adjoint())
}

/// norm·Tr(|[O, 𝒰†O𝒰]|²), the same quantity as `operator_incompatibility`
/// written as an out-of-time-order correlator with the error unitary.
pub fn error_scrambling(o: &CMat, error_u: &CMat, normalization: f64) -> Result<f64> {
    ensure_same_dim(o.nrows(), error_u.nrows())?;
    let moved = error_u.adjoint() * o * error_u;
    Ok(normalization * hs_norm_sq(&commutator(o, &moved)))
}

/// {U_r^η E_α U_r^{−η}} with the principal branch of the eigenphases.
pub fn fractional_unitary_perturb(basis: &HermitianBasis, u_r: &CMat, eta: f64) -> Result<HermitianBasis> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")));
    }
    ensure_same_dim(basis.dim(), ensure_square(u_r, "U_r")?)?;
    basis.conjugated(&unitary_power(u_r, eta)?)
}

/// Frobenius distance ‖U_r^η − I‖.
pub fn fractional_distance(u_r: &CMat, eta: f64) -> Result<f64> {
    Ok((unitary_power(u_r, eta)? - identity(u_r.nrows())).norm())
}

/// Zero-noise reconstruction measuring the perturbed elements E'_α one at a
/// time, in order of the state's Bloch magnitudes, while the estimator assumes
/// the ideal E_α. Returns the fidelity after each measurement.
pub fn ordered_perturbed_fidelity(
    psi0: &CVec,
    basis: &HermitianBasis,
    perturbed: &HermitianBasis,
    order: BlochOrder,
    options: SolverOptions,
) -> Result<Vec<f64>> {
    ensure_same_dim(basis.dim(), psi0.len())?;
    ensure_same_dim(basis.len(), perturbed.len())?;
    let rho0 = pure_density(psi0);
    let ordered = ordered_bloch_values(&rho0, basis, order)?;
    let record = bloch_encode(&rho0, perturbed)?;
    let values: Vec<f64> = ordered.order.iter().map(|&a| record.0[a]).collect();
    let p = basis.len();
    let design = RMat::from_fn(p, p, |row, col| if ordered.order[row] == col { 1.0 } else { 0.0 });
    (1..=p)
        .into_par_iter()
        .map(|k| {
            let est = StepEstimator::new(design.rows(0, k).into_owned(), basis, crate::tomography::DEFAULT_RANK_TOL, options)?;
            let result = est.reconstruct(&values, psi0)?;
            fidelity(psi0, &result.rho_bar)
        })
        .collect()
}
