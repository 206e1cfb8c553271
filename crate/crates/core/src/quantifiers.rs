//! Information measures read off the spectrum of C⁻¹, and the ordered-Bloch
//! and alignment analyses.

use rayon::prelude::*;

use crate::dynamics::OperatorTimeline;
use crate::error::{Error, Result};
use crate::linalg::{ensure_hermitian, ensure_same_dim, hermitian_eigenvalues, trace, CMat, RMat};
use crate::operator_space::{bloch_encode, BlochVector, HermitianBasis};
use crate::tomography::CovarianceData;

/// Fraction of the largest eigenvalue of C⁻¹ used as the default Fisher regularizer.
pub const DEFAULT_FISHER_REG_FRACTION: f64 = 1e-6;

/// Eigenvalues of C⁻¹ (squared singular values of the design), descending,
/// padded with zeros to the full operator-space dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSpectrum {
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
}

impl CovarianceSpectrum {
    pub fn from_cov(cov: &CovarianceData) -> Self {
        Self { eigenvalues: cov.eigenvalues(), rank: cov.rank() }
    }

    /// Singular values only; skips the right singular vectors.
    pub fn from_design(design: &RMat, rank_tol: f64) -> Self {
        let (n, p) = design.shape();
        let mut values: Vec<f64> = if n == 0 {
            Vec::new()
        } else if n >= p {
            design.clone().qr().r().singular_values().iter().copied().collect()
        } else {
            design.transpose().qr().r().singular_values().iter().copied().collect()
        };
        values.sort_by(|a, b| b.total_cmp(a));
        let largest = values.first().copied().unwrap_or(0.0);
        let rank = if largest > 0.0 { values.iter().take_while(|&&s| s > rank_tol * largest).count() } else { 0 };
        let mut eigenvalues: Vec<f64> = values.iter().map(|s| s * s).collect();
        eigenvalues.resize(p, 0.0);
        Self { eigenvalues, rank }
    }

    pub fn measured(&self) -> &[f64] {
        &self.eigenvalues[..self.rank]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn shannon(&self) -> Result<f64> {
        let measured = self.measured();
        let total: f64 = measured.iter().sum();
        if measured.is_empty() || total <= 0.0 {
            return Err(Error::ZeroOperator);
        }
        Ok(-measured
            .iter()
            .map(|&l| l / total)
            .filter(|&q| q > 0.0)
            .map(|q| q * q.ln())
            .sum::<f64>())
    }

    pub fn fisher(&self, reg: f64) -> Result<f64> {
        if !(reg > 0.0) {
            return Err(Error::param("reg", format!("must be positive, got {reg}")));
        }
        let tr: f64 = self.eigenvalues.iter().map(|l| 1.0 / (l + reg)).sum();
        Ok(1.0 / tr)
    }

    pub fn default_reg(&self) -> f64 {
        let top = self.largest();
        DEFAULT_FISHER_REG_FRACTION * if top > 0.0 { top } else { 1.0 }
    }

    pub fn mutual_information(&self) -> f64 {
        0.5 * self.measured().iter().map(|l| l.ln()).sum::<f64>()
    }

    /// (k/2) ln(Tr C⁻¹ / k) with k the measured rank.
    pub fn am_gm_bound(&self) -> f64 {
        let k = self.rank as f64;
        if self.rank == 0 {
            return 0.0;
        }
        0.5 * k * (self.measured().iter().sum::<f64>() / k).ln()
    }
}

/// S_c = −Σ λ̂ ln λ̂ over the normalized measured spectrum of C⁻¹.
pub fn shannon_entropy(cov: &CovarianceData) -> Result<f64> {
    CovarianceSpectrum::from_cov(cov).shannon()
}

/// J = 1 / Tr((C⁻¹ + reg·I)⁻¹) over the full operator space.
pub fn fisher_information(cov: &CovarianceData, reg: f64) -> Result<f64> {
    CovarianceSpectrum::from_cov(cov).fisher(reg)
}

pub fn default_fisher_reg(cov: &CovarianceData) -> f64 {
    CovarianceSpectrum::from_cov(cov).default_reg()
}

pub fn covariance_rank(cov: &CovarianceData) -> usize {
    cov.rank()
}

/// Half the pseudo-log-determinant of C⁻¹.
pub fn mutual_information(cov: &CovarianceData) -> f64 {
    CovarianceSpectrum::from_cov(cov).mutual_information()
}

/// Mean squared Hilbert-Schmidt distance Tr((ρ̄ − ρ₀)²) for one estimate.
pub fn hs_distance_sq(rho0: &CMat, rho_bar: &CMat) -> Result<f64> {
    ensure_same_dim(rho0.nrows(), rho_bar.nrows())?;
    let diff = rho_bar - rho0;
    Ok(diff.iter().map(|z| z.norm_sqr()).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantifierSeries {
    pub times: Vec<usize>,
    pub shannon: Vec<f64>,
    pub fisher: Vec<f64>,
    pub rank: Vec<usize>,
    pub mutual_info: Vec<f64>,
}

impl QuantifierSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Quantifiers of the first n design rows for each n in `times`.
///
/// A single regularizer is used for the whole series (default: relative to the
/// largest eigenvalue of the longest prefix) so that J is comparable across n.
pub fn quantifier_series(design: &RMat, times: &[usize], rank_tol: f64, reg: Option<f64>) -> Result<QuantifierSeries> {
    if times.is_empty() {
        return Err(Error::param("times", "must be nonempty"));
    }
    if let Some(&bad) = times.iter().find(|&&n| n == 0 || n > design.nrows()) {
        return Err(Error::param("times", format!("step {bad} outside 1..={}", design.nrows())));
    }
    let spectra: Vec<CovarianceSpectrum> = times
        .par_iter()
        .map(|&n| CovarianceSpectrum::from_design(&design.rows(0, n).into_owned(), rank_tol))
        .collect();
    let reg = match reg {
        Some(r) => r,
        None => {
            let last = times.iter().enumerate().max_by_key(|(_, &n)| n).map(|(i, _)| i).unwrap_or(0);
            spectra[last].default_reg()
        }
    };
    let mut out = QuantifierSeries {
        times: times.to_vec(),
        shannon: Vec::with_capacity(times.len()),
        fisher: Vec::with_capacity(times.len()),
        rank: Vec::with_capacity(times.len()),
        mutual_info: Vec::with_capacity(times.len()),
    };
    for s in &spectra {
        out.shannon.push(s.shannon().unwrap_or(0.0));
        out.fisher.push(s.fisher(reg)?);
        out.rank.push(s.rank);
        out.mutual_info.push(s.mutual_information());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlochOrder {
    Descending,
    Ascending,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderedBloch {
    /// Basis indices in measurement order.
    pub order: Vec<usize>,
    /// Σ_{i≤k} r_i² for k = 1..d²−1.
    pub partial_sums: Vec<f64>,
    /// Zero-noise fidelity lower bound 1/d + partial sum.
    pub fidelity_bound: Vec<f64>,
}

fn ensure_state(rho: &CMat) -> Result<()> {
    ensure_hermitian(rho, 1e-10, "state")?;
    let tr = trace(rho);
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::Precondition(format!("state trace is {tr}, expected 1")));
    }
    let min = hermitian_eigenvalues(rho)[0];
    if min < -1e-8 {
        return Err(Error::Precondition(format!("state has negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// Cumulative squared Bloch components taken in order of magnitude.
/// Ties keep ascending basis index in both directions.
pub fn ordered_bloch_values(rho0: &CMat, basis: &HermitianBasis, direction: BlochOrder) -> Result<OrderedBloch> {
    ensure_same_dim(basis.dim(), rho0.nrows())?;
    ensure_state(rho0)?;
    let r = bloch_encode(rho0, basis)?;
    let mags: Vec<f64> = r.0.iter().map(|v| v.abs()).collect();
    let mut order: Vec<usize> = (0..mags.len()).collect();
    order.sort_by(|&a, &b| {
        let by_mag = match direction {
            BlochOrder::Descending => mags[b].total_cmp(&mags[a]),
            BlochOrder::Ascending => mags[a].total_cmp(&mags[b]),
        };
        by_mag.then(a.cmp(&b))
    });
    let inv_d = 1.0 / basis.dim() as f64;
    let mut acc = 0.0;
    let mut partial_sums = Vec::with_capacity(order.len());
    for &k in &order {
        acc += r.0[k] * r.0[k];
        partial_sums.push(acc);
    }
    let fidelity_bound = partial_sums.iter().map(|s| inv_d + s).collect();
    Ok(OrderedBloch { order, partial_sums, fidelity_bound })
}

/// Tr(S̃ᵀS̃) for the alignment matrix S̃_{nα} = r_α Tr(O_n E_α), accumulated
/// over the first n timeline operators.
pub fn state_operator_alignment(timeline: &OperatorTimeline, basis: &HermitianBasis, r: &BlochVector) -> Result<Vec<f64>> {
    ensure_same_dim(basis.dim(), timeline.dim())?;
    ensure_same_dim(basis.len(), r.len())?;
    let mut acc = 0.0;
    timeline
        .steps()
        .iter()
        .map(|op| {
            let row = basis.coordinates(op)?;
            acc += row.iter().zip(r.0.iter()).map(|(o, x)| (o * x).powi(2)).sum::<f64>();
            Ok(acc)
        })
        .collect()
}
