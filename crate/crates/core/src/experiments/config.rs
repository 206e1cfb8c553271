use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{angular_momentum_ops, spin_half, total_spin, Axis, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::rmt::haar_unitary;

use super::shared_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PhaseSpace,
    Tomo,
    Krylov,
    Perturb,
    RmtCompare,
    OrderedBloch,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseSpace => "phase-space",
            ExperimentKind::Tomo => "tomo",
            ExperimentKind::Krylov => "krylov",
            ExperimentKind::Perturb => "perturb",
            ExperimentKind::RmtCompare => "rmt-compare",
            ExperimentKind::OrderedBloch => "ordered-bloch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

/// Initial state family for tomography runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    #[default]
    Haar,
    /// A fixed spin coherent state; `n_states` then counts noise realizations.
    Coherent { theta: f64, phi: f64 },
}

/// Parameters that are not part of the model and may still be swept.
pub const RUN_PARAMS: [&str; 3] = ["sigma", "delta_lambda", "eta"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub observable: String,
    /// Record length N; 2d² when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Averaging count; the per-family default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_states: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Report every k-th step (the last step is always reported).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_lambda: Option<f64>,
    /// Accept reconstructions whose projection did not reach tolerance.
    #[serde(default)]
    pub allow_unconverged: bool,
    /// Preset name and where its numbers come from, echoed in the CSV header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default)]
    pub state: StateSpec,
    pub model: ModelSpec,
    pub sweep: Sweep,
}

fn default_sigma() -> f64 {
    crate::tomography::DEFAULT_SIGMA
}

pub const DEFAULT_DELTA_LAMBDA: f64 = 0.01;

fn field(name: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("invalid config field `{name}`: {reason}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, output path excluded.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output_path = None;
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// 50 states for the kicked top, 80 for spin chains, 100 under model
    /// mismatch, 10 random-matrix samples.
    pub fn n_states(&self) -> usize {
        self.n_states.unwrap_or(match (self.experiment, &self.model) {
            (ExperimentKind::Perturb, _) => 100,
            (ExperimentKind::RmtCompare, _) => 10,
            (_, ModelSpec::KickedTop { .. }) => 50,
            _ => 80,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.values.is_empty() {
            return Err(field("sweep.values", "must be nonempty"));
        }
        if let Some(v) = self.sweep.values.iter().find(|v| !v.is_finite()) {
            return Err(field("sweep.values", format!("{v} is not finite")));
        }
        if self.n_states == Some(0) {
            return Err(field("n_states", "must be at least 1"));
        }
        if self.steps == Some(0) {
            return Err(field("steps", "must be at least 1"));
        }
        if self.report_every == Some(0) {
            return Err(field("report_every", "must be at least 1"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(field("sigma", format!("must be finite and non-negative, got {}", self.sigma)));
        }
        if let Some(dl) = self.delta_lambda {
            if !dl.is_finite() {
                return Err(field("delta_lambda", "must be finite"));
            }
        }
        for &v in &self.sweep.values {
            let point = self.at(v)?;
            point.model.validate().map_err(|e| field("model", e))?;
            point.observable_matrix()?;
            point.check_compatibility()?;
        }
        Ok(())
    }

    fn check_compatibility(&self) -> Result<()> {
        let is_top = matches!(self.model, ModelSpec::KickedTop { .. });
        match self.experiment {
            ExperimentKind::Perturb if !is_top => {
                return Err(field("model", "perturb runs need the kicked top"));
            }
            ExperimentKind::RmtCompare
                if !matches!(self.model, ModelSpec::KickedIsing { .. } | ModelSpec::TiltedIsing { .. }) =>
            {
                return Err(field("model", "rmt-compare needs a reflection-symmetric Ising chain"));
            }
            _ => {}
        }
        if let StateSpec::Coherent { theta, phi } = self.state {
            if !is_top {
                return Err(field("state", "coherent states need the kicked top"));
            }
            if !(0.0..=std::f64::consts::PI).contains(&theta) || !phi.is_finite() {
                return Err(field("state", format!("angles ({theta}, {phi}) out of range")));
            }
        }
        match self.sweep.param.as_str() {
            "eta" if self.sweep.values.iter().any(|v| !(0.0..=1.0).contains(v)) => {
                Err(field("sweep.values", "eta must lie in [0, 1]"))
            }
            "eta" if self.experiment != ExperimentKind::OrderedBloch => {
                Err(field("sweep.param", "eta only applies to ordered-bloch runs"))
            }
            "delta_lambda" if self.experiment != ExperimentKind::Perturb => {
                Err(field("sweep.param", "delta_lambda only applies to perturb runs"))
            }
            _ => Ok(()),
        }
    }

    /// The config with the sweep parameter set to `value`.
    pub fn at(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let param = self.sweep.param.as_str();
        match param {
            "sigma" => {
                if !(value >= 0.0) {
                    return Err(field("sweep.values", "sigma must be non-negative"));
                }
                out.sigma = value;
            }
            "delta_lambda" => out.delta_lambda = Some(value),
            "eta" => {}
            _ => out.model = set_model_param(&self.model, param, value)?,
        }
        Ok(out)
    }

    /// Fractional basis perturbation for ordered-bloch runs at this point.
    pub fn eta_at(&self, value: f64) -> f64 {
        if self.sweep.param == "eta" {
            value
        } else {
            0.0
        }
    }

    pub fn delta_lambda(&self) -> f64 {
        self.delta_lambda.unwrap_or(DEFAULT_DELTA_LAMBDA)
    }

    pub fn observable_matrix(&self) -> Result<CMat> {
        observable(&self.observable, &self.model, self.seed)
    }
}

fn as_count(param: &str, value: f64) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 {
        return Err(field("sweep.values", format!("`{param}` needs non-negative integers, got {value}")));
    }
    Ok(value as usize)
}

fn unknown_param(param: &str, model: &ModelSpec) -> Error {
    let names: &[&str] = match model {
        ModelSpec::KickedTop { .. } => &["j", "lambda", "alpha"],
        ModelSpec::KickedIsing { .. } => &["L", "J", "hx", "hz"],
        ModelSpec::TiltedIsing { .. } => &["L", "J", "hx", "hz", "dt"],
        ModelSpec::Xxz { .. } => &["L", "jxy", "jzz", "g", "site", "dt"],
    };
    field(
        "sweep.param",
        format!("unknown parameter `{param}`; this model accepts {} and {}", names.join(", "), RUN_PARAMS.join(", ")),
    )
}

fn set_model_param(model: &ModelSpec, param: &str, value: f64) -> Result<ModelSpec> {
    let mut m = model.clone();
    match &mut m {
        ModelSpec::KickedTop { j, lambda, alpha } => match param {
            "j" => *j = value,
            "lambda" => *lambda = value,
            "alpha" => *alpha = value,
            _ => return Err(unknown_param(param, model)),
        },
        ModelSpec::KickedIsing { l, coupling, hx, hz } => match param {
            "L" => *l = as_count(param, value)?,
            "J" => *coupling = value,
            "hx" => *hx = value,
            "hz" => *hz = value,
            _ => return Err(unknown_param(param, model)),
        },
        ModelSpec::TiltedIsing { l, coupling, hx, hz, dt } => match param {
            "L" => *l = as_count(param, value)?,
            "J" => *coupling = value,
            "hx" => *hx = value,
            "hz" => *hz = value,
            "dt" => *dt = value,
            _ => return Err(unknown_param(param, model)),
        },
        ModelSpec::Xxz { l, jxy, jzz, g, site, dt, .. } => match param {
            "L" => *l = as_count(param, value)?,
            "jxy" => *jxy = value,
            "jzz" => *jzz = value,
            "g" => *g = value,
            "site" => *site = as_count(param, value)?,
            "dt" => *dt = value,
            _ => return Err(unknown_param(param, model)),
        },
    }
    Ok(m)
}

pub const KNOWN_OBSERVABLES: [&str; 10] =
    ["J_x", "J_y", "J_z", "random-jx", "Sx", "Sy", "Sz", "s<site><axis> (e.g. s1y)", "sums such as s2y+s4y", "random-local"];

fn unknown_observable(name: &str) -> Error {
    Error::Config(format!("unknown observable `{name}`; known observables: {}", KNOWN_OBSERVABLES.join(", ")))
}

fn parse_axis(s: &str) -> Option<Axis> {
    match s {
        "x" => Some(Axis::X),
        "y" => Some(Axis::Y),
        "z" => Some(Axis::Z),
        _ => None,
    }
}

fn chain_length(model: &ModelSpec, name: &str) -> Result<usize> {
    match *model {
        ModelSpec::KickedIsing { l, .. } | ModelSpec::TiltedIsing { l, .. } | ModelSpec::Xxz { l, .. } => Ok(l),
        ModelSpec::KickedTop { .. } => {
            Err(Error::Config(format!("observable `{name}` needs a spin chain; the kicked top takes J_x, J_y, J_z")))
        }
    }
}

/// Resolves an observable name for a model.
///
/// `random-local` is u_r† s_1^y u_r with a single-qubit Haar u_r, and
/// `random-jx` is u J_x u† with a Haar u on the whole spin. Both draw from the
/// shared stream, so every sweep point sees the same operator.
pub fn observable(name: &str, model: &ModelSpec, seed: u64) -> Result<CMat> {
    match name {
        "J_x" | "J_y" | "J_z" => {
            let ModelSpec::KickedTop { j, .. } = *model else {
                return Err(Error::Config(format!("observable `{name}` needs the kicked top")));
            };
            let ops = angular_momentum_ops(j)?;
            return Ok(match name {
                "J_x" => ops.jx,
                "J_y" => ops.jy,
                _ => ops.jz,
            });
        }
        "Sx" | "Sy" | "Sz" => {
            let l = chain_length(model, name)?;
            return total_spin(l, parse_axis(&name[1..].to_lowercase()).expect("axis letter"));
        }
        "random-jx" => {
            let ModelSpec::KickedTop { j, .. } = *model else {
                return Err(Error::Config(format!("observable `{name}` needs the kicked top")));
            };
            let jx = angular_momentum_ops(j)?.jx;
            let u = haar_unitary(jx.nrows(), &mut shared_rng(seed));
            return Ok(&u * jx * u.adjoint());
        }
        "random-local" => {
            let l = chain_length(model, name)?;
            let u = haar_unitary(2, &mut shared_rng(seed));
            let local = u.adjoint() * crate::dynamics::pauli(Axis::Y) * c(0.5, 0.0) * &u;
            return crate::dynamics::site_operator(l, 1, &local);
        }
        _ => {}
    }
    let mut total: Option<CMat> = None;
    for term in name.split('+').map(str::trim) {
        let parsed = term
            .strip_prefix('s')
            .filter(|rest| rest.len() >= 2)
            .and_then(|rest| {
                let (digits, axis) = rest.split_at(rest.len() - 1);
                Some((digits.parse::<usize>().ok()?, parse_axis(axis)?))
            });
        let Some((site, axis)) = parsed else {
            return Err(unknown_observable(name));
        };
        let l = chain_length(model, name)?;
        let op = spin_half(l, site, axis).map_err(|e| Error::Config(format!("observable `{name}`: {e}")))?;
        total = Some(match total {
            Some(t) => t + op,
            None => op,
        });
    }
    total.ok_or_else(|| unknown_observable(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "tomo"
observable = "J_y"
n_states = 3
seed = 5

[model]
kind = "kicked-top"
j = 2.0
lambda = 0.5
alpha = 1.5

[sweep]
param = "lambda"
values = [0.5, 7.0]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Tomo);
        assert_eq!(cfg.sigma, 0.1);
        assert_eq!(cfg.n_states(), 3);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn hash_ignores_output_path_only() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        let mut moved = cfg.clone();
        moved.output_path = Some("elsewhere.csv".into());
        assert_eq!(moved.hash().unwrap(), cfg.hash().unwrap());
        let mut reseeded = cfg.clone();
        reseeded.seed = 6;
        assert_ne!(reseeded.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn empty_sweep_is_rejected_by_name() {
        let text = BASE.replace("values = [0.5, 7.0]", "values = []");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("sweep.values"), "{err}");
    }

    #[test]
    fn zero_states_is_rejected() {
        let text = BASE.replace("n_states = 3", "n_states = 0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("n_states"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = BASE.replace("seed = 5", "seed = 5\nsede = 6");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn unknown_observable_lists_known_names() {
        let text = BASE.replace("\"J_y\"", "\"P_q\"");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        for name in ["J_y", "Sx", "s1y", "random-local"] {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn unknown_sweep_parameter_names_the_alternatives() {
        let text = BASE.replace("param = \"lambda\"", "param = \"hz\"");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("lambda") && err.contains("alpha"), "{err}");
    }

    #[test]
    fn family_defaults_for_state_counts() {
        let mut cfg = ExperimentConfig::from_toml(BASE).unwrap();
        cfg.n_states = None;
        assert_eq!(cfg.n_states(), 50);
        cfg.experiment = ExperimentKind::Perturb;
        assert_eq!(cfg.n_states(), 100);
    }

    #[test]
    fn chain_observables() {
        let model = ModelSpec::Xxz { l: 5, jxy: 1.0, jzz: 1.1, g: 0.16, site: 3, dt: 1.0, impurity_axis: Axis::Y };
        let sum = observable("s2y+s4y", &model, 0).unwrap();
        let expected = spin_half(5, 2, Axis::Y).unwrap() + spin_half(5, 4, Axis::Y).unwrap();
        assert!((sum - expected).norm() < 1e-15);
        assert!(observable("s6y", &model, 0).is_err());
        assert!(observable("J_y", &model, 0).is_err());
        let a = observable("random-local", &model, 3).unwrap();
        let b = observable("random-local", &model, 3).unwrap();
        assert_eq!(a, b);
        assert!((a.trace().norm()) < 1e-12);
        assert!(((&a * &a).trace().re - 32.0 / 4.0).abs() < 1e-10);
    }

    #[test]
    fn random_jx_is_a_rotated_jx() {
        let model = ModelSpec::KickedTop { j: 3.0, lambda: 1.0, alpha: 1.4 };
        let o = observable("random-jx", &model, 9).unwrap();
        assert_eq!(o, observable("random-jx", &model, 9).unwrap());
        assert_ne!(o, observable("random-jx", &model, 10).unwrap());
        let mut spectrum = crate::linalg::hermitian_eigenvalues(&o);
        spectrum.iter_mut().for_each(|v| *v = v.round());
        assert_eq!(spectrum, vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let chain = ModelSpec::KickedIsing { l: 2, coupling: 1.0, hx: 1.4, hz: 1.4 };
        assert!(observable("random-jx", &chain, 0).is_err());
    }

    #[test]
    fn integer_parameters_reject_fractions() {
        let model = ModelSpec::KickedIsing { l: 3, coupling: 1.0, hx: 1.4, hz: 1.4 };
        assert!(set_model_param(&model, "L", 2.5).is_err());
        assert_eq!(set_model_param(&model, "L", 4.0).unwrap(), ModelSpec::KickedIsing { l: 4, coupling: 1.0, hx: 1.4, hz: 1.4 });
    }
}
