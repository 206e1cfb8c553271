use std::f64::consts::FRAC_PI_2;

use crate::dynamics::{Axis, ModelSpec};

use super::config::{ExperimentConfig, ExperimentKind, StateSpec, Sweep};

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    /// Which numbers come from the figure caption and which are artifact defaults.
    pub provenance: &'static str,
    pub config: ExperimentConfig,
}

fn base(experiment: ExperimentKind, observable: &str, model: ModelSpec, param: &str, values: &[f64]) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        observable: observable.into(),
        steps: None,
        sigma: crate::tomography::DEFAULT_SIGMA,
        n_states: None,
        seed: 2024,
        output_path: None,
        report_every: None,
        delta_lambda: None,
        allow_unconverged: false,
        provenance: None,
        state: StateSpec::Haar,
        model,
        sweep: Sweep { param: param.into(), values: values.to_vec() },
    }
}

fn top(j: f64, lambda: f64, alpha: f64) -> ModelSpec {
    ModelSpec::KickedTop { j, lambda, alpha }
}

fn kicked_ising(l: usize, hz: f64) -> ModelSpec {
    ModelSpec::KickedIsing { l, coupling: 1.0, hx: 1.4, hz }
}

fn preset(name: &'static str, provenance: &'static str, mut config: ExperimentConfig) -> Preset {
    config.provenance = Some(format!("{name}: {provenance}"));
    config.output_path = Some(format!("{name}.csv").into());
    Preset { name, provenance, config }
}

/// Named parameter sets, one or more per reproduced figure family.
pub fn list_presets() -> Vec<Preset> {
    let mut out = Vec::new();

    let mut c = base(ExperimentKind::PhaseSpace, "J_y", top(10.0, 0.5, FRAC_PI_2), "lambda", &[0.5, 2.5, 3.0, 6.5]);
    c.steps = Some(20);
    out.push(preset("fig2.1-phase-space", "caption: alpha = pi/2, lambda in {0.5, 2.5, 3.0, 6.5}; j and steps are artifact defaults", c));

    let ti = ModelSpec::TiltedIsing { l: 5, coupling: 1.0, hx: 1.4, hz: 0.0, dt: 0.1 };
    let mut c = base(ExperimentKind::Krylov, "Sz", ti, "hz", &[0.0, 0.4, 1.4]);
    c.steps = Some(100);
    out.push(preset("fig2.3-krylov-complexity", "caption: L = 5, J = 1, hx = 1.4, O = Sz, hz increasing; hz values, dt and steps are artifact defaults", c));

    let c = base(ExperimentKind::Krylov, "s1y", kicked_ising(2, 1.4), "L", &[2.0, 3.0, 4.0]);
    out.push(preset("fig2.4-krylov-dim", "caption: J = 1, hx = hz = 1.4, O = s1y, L in {2, 3, 4}; N = 2d^2 default", c));

    let mut c = base(ExperimentKind::Tomo, "J_y", top(20.0, 0.5, FRAC_PI_2), "lambda", &[0.5, 2.5, 7.0]);
    c.state = StateSpec::Coherent { theta: 2.04, phi: 2.42 };
    c.n_states = Some(10);
    c.steps = Some(100);
    c.report_every = Some(10);
    out.push(preset("fig3.1-coherent", "caption: j = 20, theta = 2.04, phi = 2.42, alpha = pi/2; lambda set, 10 noise seeds, steps and sigma are artifact defaults", c));

    let mut c = base(ExperimentKind::Tomo, "J_y", top(10.0, 0.5, FRAC_PI_2), "lambda", &[0.5, 2.5, 7.0]);
    c.n_states = Some(50);
    c.steps = Some(100);
    c.report_every = Some(10);
    out.push(preset("fig3.1-random", "caption: j = 10, 50 Haar states, alpha = pi/2; lambda set, steps and sigma are artifact defaults", c));

    let mut c = base(ExperimentKind::OrderedBloch, "J_y", top(10.0, 7.0, FRAC_PI_2), "lambda", &[7.0]);
    c.n_states = Some(50);
    out.push(preset("fig3.3-ordered-bloch", "zero-noise ordered Bloch values; j and state count are artifact defaults", c));

    let mut c = base(ExperimentKind::PhaseSpace, "J_y", top(10.0, 0.5, FRAC_PI_2), "lambda", &[0.5, 2.5, 7.0]);
    c.steps = Some(50);
    out.push(preset("fig3.6-husimi", "caption: O = J_y; j, alpha, lambda set and steps are artifact defaults", c));

    let mut c = base(ExperimentKind::Tomo, "s1y", kicked_ising(5, 0.0), "hz", &[0.0, 0.1, 1.4]);
    c.steps = Some(1100);
    c.report_every = Some(100);
    out.push(preset("fig4.2-kicked-ising", "caption: L = 5, J = 1, hx = 1.4, O = s1y, hz in {0.0, 0.1, 1.4}; 80 states; steps are an artifact default", c));

    let c = base(ExperimentKind::RmtCompare, "random-local", kicked_ising(5, 1.4), "hz", &[1.4]);
    out.push(preset("fig4.6-rmt", "caption: L = 5, J = 1, hx = 1.4, hz = 1.4, random local observable; 10 reflection-block COE samples", c));

    let xxz = ModelSpec::Xxz { l: 5, jxy: 1.0, jzz: 1.1, g: 0.0, site: 3, dt: 1.0, impurity_axis: Axis::Y };
    let mut c = base(ExperimentKind::Tomo, "s2y+s4y", xxz, "g", &[0.0, 0.16, 0.94]);
    c.steps = Some(1100);
    c.report_every = Some(100);
    out.push(preset("fig4.8-xxz", "caption: L = 5, Jxy = 1, Jzz = 1.1, impurity s3y, O = s2y + s4y, g in {0, 0.16, 0.94}; dt and steps are artifact defaults", c));

    let mut c = base(ExperimentKind::Perturb, "random-jx", top(10.0, 0.5, 1.4), "lambda", &[0.5, 2.5, 7.0]);
    c.delta_lambda = Some(0.01);
    c.n_states = Some(100);
    c.steps = Some(200);
    c.report_every = Some(10);
    out.push(preset("fig5.2-perturb", "caption: j = 10, alpha = 1.4, delta_lambda = 0.01, 100 Haar states, Haar-rotated J_x observable; lambda set and steps are artifact defaults", c));

    let mut c = base(ExperimentKind::OrderedBloch, "J_y", top(3.0, 7.0, 1.4), "eta", &[0.0, 0.02, 0.05, 0.1]);
    c.n_states = Some(20);
    out.push(preset("fig5.3-ordered-perturbed", "fractional random-unitary perturbation of the measured basis; j, eta set and state count are artifact defaults", c));

    out
}

pub fn find_preset(name: &str) -> Option<Preset> {
    list_presets().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_least_eight_presets_all_valid() {
        let presets = list_presets();
        assert!(presets.len() >= 8);
        for p in &presets {
            p.config.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(p.config.provenance.as_deref().unwrap().starts_with(p.name));
        }
        let mut names: Vec<_> = presets.iter().map(|p| p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), presets.len());
    }

    #[test]
    fn phase_space_lambda_set() {
        let p = find_preset("fig2.1-phase-space").unwrap();
        assert_eq!(p.config.sweep.param, "lambda");
        assert_eq!(p.config.sweep.values, vec![0.5, 2.5, 3.0, 6.5]);
        assert!(matches!(p.config.model, ModelSpec::KickedTop { alpha, .. } if alpha == FRAC_PI_2));
    }

    #[test]
    fn xxz_couplings() {
        let p = find_preset("fig4.8-xxz").unwrap();
        assert_eq!(p.config.sweep.values, vec![0.0, 0.16, 0.94]);
        assert!(matches!(p.config.model, ModelSpec::Xxz { jxy, jzz, .. } if jxy == 1.0 && jzz == 1.1));
    }

    #[test]
    fn coherent_state_parameters() {
        let p = find_preset("fig3.1-coherent").unwrap();
        assert_eq!(p.config.state, StateSpec::Coherent { theta: 2.04, phi: 2.42 });
        assert!(matches!(p.config.model, ModelSpec::KickedTop { j, alpha, .. } if j == 20.0 && alpha == FRAC_PI_2));
    }

    #[test]
    fn perturbation_parameters() {
        let p = find_preset("fig5.2-perturb").unwrap();
        assert_eq!(p.config.delta_lambda, Some(0.01));
        assert_eq!(p.config.n_states(), 100);
        assert!(matches!(p.config.model, ModelSpec::KickedTop { j, alpha, .. } if j == 10.0 && alpha == 1.4));
    }
}
