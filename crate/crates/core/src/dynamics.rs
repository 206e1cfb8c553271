//! Propagators for the kicked top and the spin chains, and Heisenberg timelines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, ensure_hermitian, ensure_same_dim, ensure_square, expm_hermitian, identity, kron,
    unitarity_defect, CMat, CVec, C64,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    KickedTop {
        j: f64,
        lambda: f64,
        alpha: f64,
    },
    KickedIsing {
        #[serde(rename = "L")]
        l: usize,
        #[serde(rename = "J")]
        coupling: f64,
        hx: f64,
        hz: f64,
    },
    TiltedIsing {
        #[serde(rename = "L")]
        l: usize,
        #[serde(rename = "J")]
        coupling: f64,
        hx: f64,
        hz: f64,
        dt: f64,
    },
    Xxz {
        #[serde(rename = "L")]
        l: usize,
        jxy: f64,
        jzz: f64,
        g: f64,
        site: usize,
        dt: f64,
        #[serde(default)]
        impurity_axis: Axis,
    },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::KickedTop { j, lambda, alpha } => {
                spin_dimension(j)?;
                finite("lambda", lambda)?;
                finite("alpha", alpha)
            }
            ModelSpec::KickedIsing { l, coupling, hx, hz } => {
                chain_length(l)?;
                finite("J", coupling)?;
                finite("hx", hx)?;
                finite("hz", hz)
            }
            ModelSpec::TiltedIsing { l, coupling, hx, hz, dt } => {
                chain_length(l)?;
                finite("J", coupling)?;
                finite("hx", hx)?;
                finite("hz", hz)?;
                step_duration(dt)
            }
            ModelSpec::Xxz { l, jxy, jzz, g, site, dt, .. } => {
                chain_length(l)?;
                if site == 0 || site > l {
                    return Err(Error::param("site", format!("must lie in 1..={l}, got {site}")));
                }
                finite("jxy", jxy)?;
                finite("jzz", jzz)?;
                finite("g", g)?;
                step_duration(dt)
            }
        }
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> Result<usize> {
        self.validate()?;
        Ok(match *self {
            ModelSpec::KickedTop { j, .. } => spin_dimension(j)?,
            ModelSpec::KickedIsing { l, .. }
            | ModelSpec::TiltedIsing { l, .. }
            | ModelSpec::Xxz { l, .. } => 1 << l,
        })
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::param(name, "must be finite"));
    }
    Ok(())
}

fn chain_length(l: usize) -> Result<()> {
    if !(2..=12).contains(&l) {
        return Err(Error::param("L", format!("chain length must lie in 2..=12, got {l}")));
    }
    Ok(())
}

fn step_duration(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    Ok(())
}

/// 2j+1 for a valid spin quantum number.
pub fn spin_dimension(j: f64) -> Result<usize> {
    let twice = 2.0 * j;
    if !(j > 0.0) || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::InvalidSpin(j));
    }
    Ok(twice.round() as usize + 1)
}

/// Spin quantum number of a (2j+1)-dimensional representation.
pub fn spin_of_dimension(d: usize) -> f64 {
    (d as f64 - 1.0) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSemantics {
    Floquet,
    ContinuousTime(f64),
}

#[derive(Clone, Debug)]
pub struct UnitaryPropagator {
    pub matrix: CMat,
    pub semantics: StepSemantics,
}

impl UnitaryPropagator {
    pub fn new(matrix: CMat, semantics: StepSemantics) -> Result<Self> {
        ensure_square(&matrix, "propagator")?;
        let defect = unitarity_defect(&matrix);
        if defect > 1e-10 {
            return Err(Error::Consistency(format!("propagator is not unitary (defect {defect:.3e})")));
        }
        Ok(Self { matrix, semantics })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct SpinOps {
    pub jx: CMat,
    pub jy: CMat,
    pub jz: CMat,
}

impl SpinOps {
    pub fn j(&self) -> f64 {
        spin_of_dimension(self.jz.nrows())
    }
}

/// Spin-j angular momentum matrices in the basis |j⟩, |j−1⟩, …, |−j⟩.
pub fn angular_momentum_ops(j: f64) -> Result<SpinOps> {
    let d = spin_dimension(j)?;
    let m = |k: usize| j - k as f64;
    let mut jplus = CMat::zeros(d, d);
    for k in 1..d {
        // ⟨m+1|J+|m⟩ with |m⟩ at index k and |m+1⟩ at index k−1.
        let mk = m(k);
        jplus[(k - 1, k)] = c(((j - mk) * (j + mk + 1.0)).sqrt(), 0.0);
    }
    let jminus = jplus.adjoint();
    let jx = (&jplus + &jminus) * c(0.5, 0.0);
    let jy = (&jplus - &jminus) * c(0.0, -0.5);
    let jz = CMat::from_diagonal(&CVec::from_fn(d, |k, _| c(m(k), 0.0)));
    Ok(SpinOps { jx, jy, jz })
}

pub fn kicked_top_floquet(j: f64, lambda: f64, alpha: f64) -> Result<UnitaryPropagator> {
    let ops = angular_momentum_ops(j)?;
    let d = ops.jz.nrows();
    let twist = CMat::from_diagonal(&CVec::from_fn(d, |k, _| {
        let m = j - k as f64;
        C64::from_polar(1.0, -lambda * m * m / (2.0 * j))
    }));
    let rotation = expm_hermitian(&ops.jx, alpha);
    UnitaryPropagator::new(twist * rotation, StepSemantics::Floquet)
}

/// One iterate of the classical kicked-top map on the unit sphere.
pub fn classical_kicked_top_step(p: [f64; 3], lambda: f64, alpha: f64) -> Result<[f64; 3]> {
    let [x, y, z] = p;
    let norm = (x * x + y * y + z * z).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("point must lie on the unit sphere, norm {norm}")));
    }
    let (sa, ca) = alpha.sin_cos();
    let xt = x;
    let yt = y * ca - z * sa;
    let zt = y * sa + z * ca;
    let (sl, cl) = (lambda * zt).sin_cos();
    Ok([xt * cl - yt * sl, xt * sl + yt * cl, zt])
}

pub fn pauli(axis: Axis) -> CMat {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match axis {
        Axis::X => CMat::from_row_slice(2, 2, &[o, one, one, o]),
        Axis::Y => CMat::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
        Axis::Z => CMat::from_row_slice(2, 2, &[one, o, o, -one]),
    }
}

/// A single-site operator embedded in an L-site chain; `site` is 1-based and
/// site 1 is the most significant tensor factor.
pub fn site_operator(l: usize, site: usize, op: &CMat) -> Result<CMat> {
    if site == 0 || site > l {
        return Err(Error::param("site", format!("must lie in 1..={l}, got {site}")));
    }
    ensure_same_dim(2, ensure_square(op, "local operator")?)?;
    let mut out = CMat::identity(1, 1);
    for k in 1..=l {
        out = if k == site { kron(&out, op) } else { kron(&out, &identity(2)) };
    }
    Ok(out)
}

/// σ_site^axis on the chain.
pub fn sigma(l: usize, site: usize, axis: Axis) -> Result<CMat> {
    site_operator(l, site, &pauli(axis))
}

/// s_site^axis = σ/2.
pub fn spin_half(l: usize, site: usize, axis: Axis) -> Result<CMat> {
    Ok(sigma(l, site, axis)? * c(0.5, 0.0))
}

/// Collective spin S^axis = Σ_j s_j^axis.
pub fn total_spin(l: usize, axis: Axis) -> Result<CMat> {
    let mut out = CMat::zeros(1 << l, 1 << l);
    for site in 1..=l {
        out += spin_half(l, site, axis)?;
    }
    Ok(out)
}

fn bond_sum(l: usize, axis: Axis) -> Result<CMat> {
    let mut out = CMat::zeros(1 << l, 1 << l);
    for site in 1..l {
        out += sigma(l, site, axis)? * sigma(l, site + 1, axis)?;
    }
    Ok(out)
}

fn field_sum(l: usize, axis: Axis) -> Result<CMat> {
    let mut out = CMat::zeros(1 << l, 1 << l);
    for site in 1..=l {
        out += sigma(l, site, axis)?;
    }
    Ok(out)
}

pub fn tki_floquet(l: usize, coupling: f64, hx: f64, hz: f64) -> Result<UnitaryPropagator> {
    chain_length(l)?;
    let ising = bond_sum(l, Axis::Z)? * c(coupling, 0.0);
    let field = field_sum(l, Axis::Z)? * c(hz, 0.0) + field_sum(l, Axis::X)? * c(hx, 0.0);
    let u = expm_hermitian(&ising, 1.0) * expm_hermitian(&field, 1.0);
    UnitaryPropagator::new(u, StepSemantics::Floquet)
}

pub fn ti_hamiltonian(l: usize, coupling: f64, hx: f64, hz: f64) -> Result<CMat> {
    chain_length(l)?;
    let h = bond_sum(l, Axis::Z)? * c(coupling, 0.0)
        + field_sum(l, Axis::Z)? * c(hz, 0.0)
        + field_sum(l, Axis::X)? * c(hx, 0.0);
    ensure_hermitian(&h, 1e-12, "tilted Ising Hamiltonian")?;
    Ok(h)
}

pub fn ti_unitary(l: usize, coupling: f64, hx: f64, hz: f64, dt: f64) -> Result<UnitaryPropagator> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(Error::param("dt", format!("must be non-negative, got {dt}")));
    }
    let h = ti_hamiltonian(l, coupling, hx, hz)?;
    UnitaryPropagator::new(expm_hermitian(&h, dt), StepSemantics::ContinuousTime(dt))
}

pub fn xxz_hamiltonian(l: usize, jxy: f64, jzz: f64, g: f64, site: usize, axis: Axis) -> Result<CMat> {
    chain_length(l)?;
    let h = (bond_sum(l, Axis::X)? + bond_sum(l, Axis::Y)?) * c(jxy / 4.0, 0.0)
        + bond_sum(l, Axis::Z)? * c(jzz / 4.0, 0.0)
        + sigma(l, site, axis)? * c(g / 2.0, 0.0);
    ensure_hermitian(&h, 1e-12, "XXZ Hamiltonian")?;
    Ok(h)
}

pub fn xxz_unitary(
    l: usize,
    jxy: f64,
    jzz: f64,
    g: f64,
    site: usize,
    axis: Axis,
    dt: f64,
) -> Result<UnitaryPropagator> {
    step_duration(dt)?;
    let h = xxz_hamiltonian(l, jxy, jzz, g, site, axis)?;
    UnitaryPropagator::new(expm_hermitian(&h, dt), StepSemantics::ContinuousTime(dt))
}

/// The generator for continuous-time models, if any.
pub fn hamiltonian(spec: &ModelSpec) -> Result<Option<CMat>> {
    spec.validate()?;
    Ok(match *spec {
        ModelSpec::TiltedIsing { l, coupling, hx, hz, .. } => Some(ti_hamiltonian(l, coupling, hx, hz)?),
        ModelSpec::Xxz { l, jxy, jzz, g, site, impurity_axis, .. } => {
            Some(xxz_hamiltonian(l, jxy, jzz, g, site, impurity_axis)?)
        }
        _ => None,
    })
}

pub fn propagator(spec: &ModelSpec) -> Result<UnitaryPropagator> {
    spec.validate()?;
    match *spec {
        ModelSpec::KickedTop { j, lambda, alpha } => kicked_top_floquet(j, lambda, alpha),
        ModelSpec::KickedIsing { l, coupling, hx, hz } => tki_floquet(l, coupling, hx, hz),
        ModelSpec::TiltedIsing { l, coupling, hx, hz, dt } => ti_unitary(l, coupling, hx, hz, dt),
        ModelSpec::Xxz { l, jxy, jzz, g, site, dt, impurity_axis } => {
            xxz_unitary(l, jxy, jzz, g, site, impurity_axis, dt)
        }
    }
}

/// O_0 = O, O_n = U† O_{n−1} U.
#[derive(Clone, Debug)]
pub struct OperatorTimeline {
    steps: Vec<CMat>,
}

impl OperatorTimeline {
    pub fn from_steps(steps: Vec<CMat>) -> Result<Self> {
        let first = steps.first().ok_or(Error::EmptyRecord)?;
        let d = ensure_square(first, "observable")?;
        for op in &steps {
            ensure_same_dim(d, ensure_square(op, "observable")?)?;
        }
        Ok(Self { steps })
    }

    pub fn initial(&self) -> &CMat {
        &self.steps[0]
    }

    pub fn steps(&self) -> &[CMat] {
        &self.steps
    }

    pub fn get(&self, n: usize) -> &CMat {
        &self.steps[n]
    }

    /// Number of evolution steps N (the timeline holds N+1 operators).
    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.steps.len() == 1
    }

    pub fn dim(&self) -> usize {
        self.steps[0].nrows()
    }
}

pub fn heisenberg_timeline(o: &CMat, u: &UnitaryPropagator, n: usize) -> Result<OperatorTimeline> {
    heisenberg_timeline_matrix(o, &u.matrix, n)
}

pub fn heisenberg_timeline_matrix(o: &CMat, u: &CMat, n: usize) -> Result<OperatorTimeline> {
    let d = ensure_square(o, "observable")?;
    ensure_same_dim(d, ensure_square(u, "propagator")?)?;
    ensure_hermitian(o, 1e-10, "observable")?;
    let ud = u.adjoint();
    let mut steps = Vec::with_capacity(n + 1);
    steps.push(o.clone());
    for k in 0..n {
        let next = &ud * &steps[k] * u;
        // Symmetrize to stop Hermiticity drift over long timelines.
        let next = (&next + next.adjoint()) * c(0.5, 0.0);
        steps.push(next);
    }
    Ok(OperatorTimeline { steps })
}
