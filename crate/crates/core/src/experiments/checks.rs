//! Quick invariant checks behind `check`: each runs in well under a second.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{angular_momentum_ops, heisenberg_timeline, heisenberg_timeline_matrix, kicked_top_floquet, sigma, tki_floquet, Axis};
use crate::error::Result;
use crate::krylov::arnoldi_unitary_dim;
use crate::linalg::{hs_norm_sq, CMat};
use crate::operator_space::HermitianBasis;
use crate::perturbation::{error_scrambling, error_unitary, operator_incompatibility, perturbed_kicked_top, spin_incompatibility_norm};
use crate::phase_space::{husimi_normalization, spin_coherent, SphereGrid};
use crate::rmt::haar_unitary;
use crate::tomography::{build_covariance, generate_record, haar_random_pure, pure_density, Reconstructor, SolverOptions, DEFAULT_RANK_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    match run() {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
    }
}

pub fn fast_checks() -> Vec<CheckOutcome> {
    vec![
        outcome("gell-mann orthonormality", || {
            let defect = HermitianBasis::gell_mann(6)?.orthonormality_defect();
            Ok((defect < 1e-12, format!("defect {defect:.2e}")))
        }),
        outcome("trace identity", || {
            let ops = angular_momentum_ops(3.0)?;
            let u = kicked_top_floquet(3.0, 7.0, 1.4)?;
            let n = 40;
            let tl = heisenberg_timeline(&ops.jy, &u, n - 1)?;
            let cov = build_covariance(&tl, &HermitianBasis::gell_mann(7)?, DEFAULT_RANK_TOL)?;
            let expected = n as f64 * hs_norm_sq(&ops.jy);
            let rel = (cov.trace_inv_cov() - expected).abs() / expected;
            Ok((rel < 1e-10, format!("relative error {rel:.2e}")))
        }),
        outcome("kicked Ising krylov dimension", || {
            let k = arnoldi_unitary_dim(&tki_floquet(2, 1.0, 1.4, 1.4)?, &(sigma(2, 1, Axis::Y)? * crate::linalg::c(0.5, 0.0)), None)?;
            Ok((k == 13, format!("K = {k}")))
        }),
        outcome("error scrambling identity", || {
            let j = 4.0;
            let pair = perturbed_kicked_top(j, 7.0, 1.4, 0.01)?;
            let o = angular_momentum_ops(j)?.jy;
            let (truth, model) = pair.timelines(&o, 20)?;
            let norm = spin_incompatibility_norm(j);
            let mut worst: f64 = 0.0;
            for n in 0..=20 {
                let direct = operator_incompatibility(truth.get(n), model.get(n), norm)?;
                let otoc = error_scrambling(&o, &error_unitary(&pair.u_true, &pair.u_model, n)?, norm)?;
                worst = worst.max((direct - otoc).abs());
            }
            Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
        }),
        outcome("coherent-state uncertainty", || {
            let j = 5.0;
            let psi = spin_coherent(j, 1.1, 0.3)?;
            let ops = angular_momentum_ops(j)?;
            let ev = |a: &CMat| (psi.adjoint() * a * &psi)[(0, 0)].re;
            let sq = ev(&(&ops.jx * &ops.jx + &ops.jy * &ops.jy + &ops.jz * &ops.jz));
            let mean_sq = ev(&ops.jx).powi(2) + ev(&ops.jy).powi(2) + ev(&ops.jz).powi(2);
            let dev = ((sq - mean_sq) / (j * j) - 1.0 / j).abs();
            Ok((dev < 1e-12, format!("deviation {dev:.2e}")))
        }),
        outcome("husimi normalization", || {
            let rho = pure_density(&spin_coherent(10.0, 2.04, 2.42)?);
            let norm = husimi_normalization(&rho, &SphereGrid::default())?;
            Ok(((norm - 1.0).abs() < 1e-3, format!("integral {norm:.12}")))
        }),
        outcome("zero-noise completeness", || {
            let d = 8;
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let u = haar_unitary(d, &mut rng);
            let g = crate::linalg::ginibre(d, &mut rng);
            let o = (&g + g.adjoint()) * crate::linalg::c(0.5, 0.0);
            let tl = heisenberg_timeline_matrix(&o, &u, d * d - 1)?;
            let basis = HermitianBasis::gell_mann(d)?;
            let recon = Reconstructor::new(&basis, tl.steps(), DEFAULT_RANK_TOL, SolverOptions::default())?;
            let est = recon.estimator(d * d)?;
            let mut worst: f64 = 1.0;
            for k in 0..3 {
                let psi = haar_random_pure(d, &mut rng)?;
                let record = generate_record(&pure_density(&psi), &tl, 0.0, k)?;
                worst = worst.min(est.reconstruct(&record.values, &psi)?.fidelity);
            }
            Ok((worst >= 1.0 - 1e-6, format!("min fidelity {worst:.10}")))
        }),
    ]
}
