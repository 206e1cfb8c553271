//! Config-driven runs that tabulate quantifiers as long-format CSV.
//!
//! Random streams: the (sweep index s, state index k) cell draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `(s << 32) | k`.
//! Draws shared by every cell (the random-local observable) use stream
//! `u64::MAX`. Inside a cell the state is drawn first, then any random
//! matrix or basis perturbation, then the measurement noise. Cells run in
//! parallel and are merged by index, so thread count never changes output.

mod checks;
mod config;
mod presets;

use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{hamiltonian, heisenberg_timeline, heisenberg_timeline_matrix, propagator, ModelSpec};
use crate::error::{Error, Result};
use crate::krylov::{
    arnoldi_unitary_dim, evolve_operator, krylov_amplitudes, krylov_complexity, krylov_entropy, lanczos_full_orth,
    LiouvillianAction,
};
use crate::linalg::{c, expm_hermitian, hs_norm_sq, trace, CMat};
use crate::operator_space::HermitianBasis;
use crate::perturbation::{
    fractional_distance, fractional_unitary_perturb, operator_incompatibility,
    operator_loschmidt_echo, operator_relative_entropy, ordered_perturbed_fidelity, perturbed_kicked_top,
    spin_incompatibility_norm,
};
use crate::phase_space::{husimi_entropy, spin_coherent, SphereGrid};
use crate::quantifiers::{hs_distance_sq, ordered_bloch_values, quantifier_series, state_operator_alignment, BlochOrder};
use crate::rmt::{block_diagonal_with_rng, haar_unitary, reflection_eigenbasis, EnsembleKind, EnsembleSpec};
use crate::tomography::{
    generate_record_with_rng, haar_random_pure, pure_bloch, pure_density, Reconstructor, SolverDiagnostics,
    SolverOptions, StepEstimator, DEFAULT_RANK_TOL,
};

pub use checks::{fast_checks, CheckOutcome};
pub use config::{observable, ExperimentConfig, ExperimentKind, StateSpec, Sweep, DEFAULT_DELTA_LAMBDA, KNOWN_OBSERVABLES};
pub use presets::{find_preset, list_presets, Preset};

pub const TOOL_NAME: &str = "qtomo";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reported steps per series when `report_every` is absent.
pub const DEFAULT_REPORT_POINTS: usize = 50;

pub fn cell_rng(seed: u64, sweep_index: usize, state_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sweep_index as u64) << 32) | state_index as u64);
    rng
}

pub(crate) fn shared_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub step: usize,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub sweep_param: String,
    /// Comment lines written before the column header, without the `# `.
    pub comments: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub const COLUMNS: [&'static str; 7] = ["sweep_param", "sweep_value", "step", "metric", "mean", "stderr", "n"];

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for line in &self.comments {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(Self::COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                self.sweep_param.clone(),
                r.sweep_value.to_string(),
                r.step.to_string(),
                r.metric.clone(),
                r.mean.to_string(),
                r.stderr.to_string(),
                r.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn get(&self, metric: &str, sweep_value: f64, step: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.metric == metric && r.sweep_value == sweep_value && r.step == step)
    }

    /// Rows of one metric at one sweep value, in step order.
    pub fn series(&self, metric: &str, sweep_value: f64) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| r.metric == metric && r.sweep_value == sweep_value).collect()
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Steps `every, 2·every, …` up to `n`, always ending at `n`.
pub fn report_steps(n: usize, every: Option<usize>) -> Vec<usize> {
    let every = every.unwrap_or_else(|| n.div_ceil(DEFAULT_REPORT_POINTS).max(1));
    let mut steps: Vec<usize> = (every..=n).step_by(every).collect();
    if steps.last() != Some(&n) {
        steps.push(n);
    }
    steps
}

/// Runs the configured experiment, writing the CSV when `output_path` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let mut comments = vec![
        format!("{TOOL_NAME} {TOOL_VERSION}"),
        format!("experiment: {}", config.experiment.name()),
        format!("config_sha256: {}", config.hash()?),
        format!("seed: {}", config.seed),
    ];
    if let Some(p) = &config.provenance {
        comments.push(format!("provenance: {p}"));
    }
    comments.push("streams: ChaCha8 from seed; cell (sweep s, state k) on stream (s << 32) | k; shared draws on stream 2^64 - 1".into());

    let mut rows = Vec::new();
    let mut solver = SolverTally::default();
    for (s, &value) in config.sweep.values.iter().enumerate() {
        let point = config.at(value)?;
        let mut ctx = Ctx { point: &point, s, value, rows: Vec::new(), solver: SolverTally::default() };
        match config.experiment {
            ExperimentKind::PhaseSpace => phase_space(&mut ctx)?,
            ExperimentKind::Tomo => tomo(&mut ctx)?,
            ExperimentKind::Krylov => krylov(&mut ctx)?,
            ExperimentKind::Perturb => perturb(&mut ctx)?,
            ExperimentKind::RmtCompare => rmt_compare(&mut ctx)?,
            ExperimentKind::OrderedBloch => ordered_bloch(&mut ctx)?,
        }
        solver.merge(&ctx.solver);
        rows.append(&mut ctx.rows);
    }
    if solver.unconverged > 0 {
        if !config.allow_unconverged {
            return Err(Error::NotConverged { iterations: solver.worst_iterations, residual: solver.worst_residual });
        }
        comments.push(format!("unconverged projections: {} (worst residual {:e})", solver.unconverged, solver.worst_residual));
    }
    let table = ResultTable { sweep_param: config.sweep.param.clone(), comments, rows };
    if let Some(path) = &config.output_path {
        write_table(&table, path)?;
    }
    Ok(table)
}

fn write_table(table: &ResultTable, path: &PathBuf) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    table.write_csv(file)
}

#[derive(Clone, Copy, Debug, Default)]
struct SolverTally {
    unconverged: usize,
    worst_residual: f64,
    worst_iterations: usize,
}

impl SolverTally {
    fn record(&mut self, d: &SolverDiagnostics) {
        if !d.converged {
            self.unconverged += 1;
            if d.residual > self.worst_residual {
                self.worst_residual = d.residual;
                self.worst_iterations = d.iterations;
            }
        }
    }

    fn merge(&mut self, other: &SolverTally) {
        self.unconverged += other.unconverged;
        if other.worst_residual > self.worst_residual {
            self.worst_residual = other.worst_residual;
            self.worst_iterations = other.worst_iterations;
        }
    }
}

struct Ctx<'a> {
    point: &'a ExperimentConfig,
    s: usize,
    value: f64,
    rows: Vec<ResultRow>,
    solver: SolverTally,
}

impl Ctx<'_> {
    fn push(&mut self, step: usize, metric: &str, mean: f64, stderr: f64, n: usize) {
        self.rows.push(ResultRow { sweep_value: self.value, step, metric: metric.into(), mean, stderr, n });
    }

    fn exact(&mut self, step: usize, metric: &str, value: f64) {
        self.push(step, metric, value, 0.0, 1);
    }

    fn sample(&mut self, step: usize, metric: &str, values: &[f64]) {
        let (m, e) = mean_stderr(values);
        self.push(step, metric, m, e, values.len());
    }

    fn rng(&self, k: usize) -> ChaCha8Rng {
        cell_rng(self.point.seed, self.s, k)
    }

    fn dim(&self) -> Result<usize> {
        self.point.model.dim()
    }

    fn record_length(&self) -> Result<usize> {
        let d = self.dim()?;
        Ok(self.point.steps.unwrap_or(2 * d * d))
    }

    fn report(&self, n: usize) -> Vec<usize> {
        report_steps(n, self.point.report_every)
    }

    /// Design quantifiers of the first k rows for each reported k.
    fn design_quantifiers(&mut self, design: &crate::linalg::RMat, steps: &[usize], prefix: &str) -> Result<()> {
        let q = quantifier_series(design, steps, DEFAULT_RANK_TOL, None)?;
        for (i, &k) in steps.iter().enumerate() {
            self.exact(k, &format!("{prefix}shannon"), q.shannon[i]);
            self.exact(k, &format!("{prefix}fisher"), q.fisher[i]);
            self.exact(k, &format!("{prefix}rank"), q.rank[i] as f64);
            self.exact(k, &format!("{prefix}mutual_information"), q.mutual_info[i]);
        }
        Ok(())
    }
}

/// Per-state series at the reported steps, as (metric, values-by-step).
type CellSeries = Vec<(&'static str, Vec<f64>)>;

/// Transposes per-cell series into sample rows.
fn push_cells(ctx: &mut Ctx, steps: &[usize], cells: &[CellSeries]) {
    let Some(first) = cells.first() else { return };
    for (m, (metric, _)) in first.iter().enumerate() {
        for (i, &k) in steps.iter().enumerate() {
            let values: Vec<f64> = cells.iter().map(|cell| cell[m].1[i]).collect();
            ctx.sample(k, metric, &values);
        }
    }
}

fn kicked_top_j(model: &ModelSpec) -> Option<f64> {
    match *model {
        ModelSpec::KickedTop { j, .. } => Some(j),
        _ => None,
    }
}

fn estimators<'a>(recon: &Reconstructor<'a>, steps: &[usize]) -> Result<Vec<StepEstimator<'a>>> {
    steps.par_iter().map(|&k| recon.estimator(k)).collect()
}

fn phase_space(ctx: &mut Ctx) -> Result<()> {
    let u = propagator(&ctx.point.model)?;
    let o = ctx.point.observable_matrix()?;
    let n = ctx.record_length()?;
    let timeline = heisenberg_timeline(&o, &u, n)?;
    let grid = SphereGrid::default();
    let mut steps = vec![0];
    steps.extend(ctx.report(n));
    let values: Vec<f64> =
        steps.par_iter().map(|&k| husimi_entropy(timeline.get(k), &grid)).collect::<Result<_>>()?;
    for (&k, v) in steps.iter().zip(values) {
        ctx.exact(k, "husimi_entropy", v);
    }
    Ok(())
}

/// Fidelity, Hilbert-Schmidt error and state-operator alignment over states,
/// plus the design quantifiers. Step k uses the first k record entries.
fn tomo(ctx: &mut Ctx) -> Result<()> {
    let point = ctx.point;
    let u = propagator(&point.model)?;
    let d = u.dim();
    let n = ctx.record_length()?;
    let o = point.observable_matrix()?;
    let timeline = heisenberg_timeline(&o, &u, n - 1)?;
    let basis = HermitianBasis::gell_mann(d)?;
    let steps = ctx.report(n);
    let recon = Reconstructor::new(&basis, timeline.steps(), DEFAULT_RANK_TOL, SolverOptions::default())?;
    let ests = estimators(&recon, &steps)?;
    let fixed = match point.state {
        StateSpec::Haar => None,
        StateSpec::Coherent { theta, phi } => {
            let j = kicked_top_j(&point.model).expect("validated: coherent states need the kicked top");
            Some(spin_coherent(j, theta, phi)?)
        }
    };
    let outcomes: Vec<(CellSeries, SolverTally)> = (0..point.n_states())
        .into_par_iter()
        .map(|k| {
            let mut rng = ctx.rng(k);
            let psi = match &fixed {
                Some(p) => p.clone(),
                None => haar_random_pure(d, &mut rng)?,
            };
            let rho = pure_density(&psi);
            let record = generate_record_with_rng(&rho, timeline.steps(), point.sigma, &mut rng)?;
            let mut tally = SolverTally::default();
            let mut fid = Vec::with_capacity(steps.len());
            let mut dist = Vec::with_capacity(steps.len());
            for est in &ests {
                let r = est.reconstruct(&record, &psi)?;
                tally.record(&r.solver);
                fid.push(r.fidelity);
                dist.push(hs_distance_sq(&rho, &r.rho_bar)?);
            }
            let align = state_operator_alignment(&timeline, &basis, &pure_bloch(&psi, &basis)?)?;
            let align = steps.iter().map(|&k| align[k - 1]).collect();
            Ok((vec![("fidelity", fid), ("hs_distance_sq", dist), ("alignment", align)], tally))
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(outcomes.len());
    for (cell, tally) in outcomes {
        ctx.solver.merge(&tally);
        cells.push(cell);
    }
    push_cells(ctx, &steps, &cells);
    ctx.design_quantifiers(recon.design(), &steps, "")
}

/// Krylov dimension (Lanczos for Hamiltonians, Arnoldi for Floquet maps),
/// covariance rank of the record, and for Hamiltonians the Lanczos
/// coefficients and Krylov complexity at t = k·dt.
fn krylov(ctx: &mut Ctx) -> Result<()> {
    let point = ctx.point;
    let u = propagator(&point.model)?;
    let o = point.observable_matrix()?;
    let n = ctx.record_length()?;
    match hamiltonian(&point.model)? {
        Some(h) => {
            let action = LiouvillianAction::new(&h)?;
            let kb = lanczos_full_orth(&action, &o, None)?;
            ctx.exact(0, "krylov_dim", kb.dim_k() as f64);
            for (i, b) in kb.lanczos_b.iter().enumerate() {
                ctx.exact(i + 1, "lanczos_b", *b);
            }
            let dt = match u.semantics {
                crate::dynamics::StepSemantics::ContinuousTime(dt) => dt,
                crate::dynamics::StepSemantics::Floquet => 1.0,
            };
            let steps = ctx.report(n);
            let series: Vec<(f64, f64)> = steps
                .par_iter()
                .map(|&k| {
                    let amp = krylov_amplitudes(&evolve_operator(&h, &o, k as f64 * dt), &kb)?;
                    Ok((krylov_complexity(&amp), krylov_entropy(&amp)))
                })
                .collect::<Result<_>>()?;
            for (&k, (cplx, ent)) in steps.iter().zip(series) {
                ctx.exact(k, "krylov_complexity", cplx);
                ctx.exact(k, "krylov_entropy", ent);
            }
        }
        None => {
            let k = arnoldi_unitary_dim(&u, &o, None)?;
            ctx.exact(0, "krylov_dim", k as f64);
        }
    }
    let timeline = heisenberg_timeline(&o, &u, n - 1)?;
    let basis = HermitianBasis::gell_mann(u.dim())?;
    let design = basis.design(timeline.steps())?;
    let steps = ctx.report(n);
    let q = quantifier_series(&design, &steps, DEFAULT_RANK_TOL, None)?;
    for (&k, &r) in steps.iter().zip(&q.rank) {
        ctx.exact(k, "covariance_rank", r as f64);
    }
    Ok(())
}

/// Record from λ + δλ, estimator from λ. Fidelity at step k uses k entries;
/// the operator metrics compare O_k under both maps.
fn perturb(ctx: &mut Ctx) -> Result<()> {
    let point = ctx.point;
    let ModelSpec::KickedTop { j, lambda, alpha } = point.model else {
        return Err(Error::Config("perturb runs need the kicked top".into()));
    };
    let pair = perturbed_kicked_top(j, lambda, alpha, point.delta_lambda())?;
    let d = pair.dim();
    let o = point.observable_matrix()?;
    let n = ctx.record_length()?;
    let (truth, model) = pair.timelines(&o, n)?;
    let basis = HermitianBasis::gell_mann(d)?;
    let steps = ctx.report(n);
    let recon = Reconstructor::new(&basis, &model.steps()[..n], DEFAULT_RANK_TOL, SolverOptions::default())?;
    let ests = estimators(&recon, &steps)?;
    let outcomes: Vec<(Vec<f64>, SolverTally)> = (0..point.n_states())
        .into_par_iter()
        .map(|k| {
            let mut rng = ctx.rng(k);
            let psi = haar_random_pure(d, &mut rng)?;
            let record = generate_record_with_rng(&pure_density(&psi), &truth.steps()[..n], point.sigma, &mut rng)?;
            let mut tally = SolverTally::default();
            let mut fid = Vec::with_capacity(steps.len());
            for est in &ests {
                let r = est.reconstruct(&record, &psi)?;
                tally.record(&r.solver);
                fid.push(r.fidelity);
            }
            Ok((fid, tally))
        })
        .collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(outcomes.len());
    for (fid, tally) in outcomes {
        ctx.solver.merge(&tally);
        cells.push(vec![("fidelity", fid)]);
    }
    push_cells(ctx, &steps, &cells);

    let norm = spin_incompatibility_norm(j);
    let ops: Vec<[f64; 3]> = steps
        .par_iter()
        .map(|&k| {
            let (t, m) = (truth.get(k), model.get(k));
            Ok([operator_loschmidt_echo(t, m, &o)?, operator_relative_entropy(m, t)?, operator_incompatibility(t, m, norm)?])
        })
        .collect::<Result<_>>()?;
    for (&k, [echo, dkl, inc]) in steps.iter().zip(ops) {
        ctx.exact(k, "loschmidt_echo", echo);
        ctx.exact(k, "relative_entropy", dkl);
        ctx.exact(k, "incompatibility", inc);
    }
    Ok(())
}

/// Traceless second moment Tr(H̃²)/d.
fn spectral_variance(h: &CMat) -> f64 {
    let d = h.nrows() as f64;
    let tr = trace(h).re / d;
    hs_norm_sq(h) / d - tr * tr
}

/// Design quantifiers of the model against reflection-block random matrices:
/// COE blocks for Floquet maps, GOE blocks (rescaled to the model's spectral
/// variance) propagated for dt for Hamiltonians.
fn rmt_compare(ctx: &mut Ctx) -> Result<()> {
    let point = ctx.point;
    let l = match point.model {
        ModelSpec::KickedIsing { l, .. } | ModelSpec::TiltedIsing { l, .. } => l,
        _ => return Err(Error::Config("rmt-compare needs a reflection-symmetric Ising chain".into())),
    };
    let u = propagator(&point.model)?;
    let d = u.dim();
    let o = point.observable_matrix()?;
    let n = ctx.record_length()?;
    let basis = HermitianBasis::gell_mann(d)?;
    let steps = ctx.report(n);
    let timeline = heisenberg_timeline(&o, &u, n - 1)?;
    ctx.design_quantifiers(&basis.design(timeline.steps())?, &steps, "model_")?;

    let (refl, dims) = reflection_eigenbasis(l)?;
    let h_model = hamiltonian(&point.model)?;
    let kind = if h_model.is_some() { EnsembleKind::Goe } else { EnsembleKind::Coe };
    let mut spec = EnsembleSpec::new(kind, d, point.seed);
    spec.block_dims = Some(dims.to_vec());
    let dt = match u.semantics {
        crate::dynamics::StepSemantics::ContinuousTime(dt) => dt,
        crate::dynamics::StepSemantics::Floquet => 1.0,
    };
    let cells: Vec<CellSeries> = (0..point.n_states())
        .into_par_iter()
        .map(|k| {
            let mut rng = ctx.rng(k);
            let sample = block_diagonal_with_rng(&spec, &refl, &mut rng)?;
            let u_r = match &h_model {
                Some(h) => {
                    let scale = (spectral_variance(h) / spectral_variance(&sample)).sqrt();
                    expm_hermitian(&(sample * c(scale, 0.0)), dt)
                }
                None => sample,
            };
            let tl = heisenberg_timeline_matrix(&o, &u_r, n - 1)?;
            let q = quantifier_series(&basis.design(tl.steps())?, &steps, DEFAULT_RANK_TOL, None)?;
            Ok(vec![
                ("rmt_shannon", q.shannon),
                ("rmt_fisher", q.fisher),
                ("rmt_rank", q.rank.iter().map(|&r| r as f64).collect()),
                ("rmt_mutual_information", q.mutual_info),
            ])
        })
        .collect::<Result<_>>()?;
    push_cells(ctx, &steps, &cells);
    Ok(())
}

/// Zero-noise ordered-Bloch analysis over d² − 1 measurements. With an `eta`
/// sweep, also the fidelity when the measured elements are perturbed by U_r^η.
fn ordered_bloch(ctx: &mut Ctx) -> Result<()> {
    let point = ctx.point;
    let d = ctx.dim()?;
    let basis = HermitianBasis::gell_mann(d)?;
    let p = basis.len();
    let steps = ctx.report(p);
    let perturbed = point.sweep.param == "eta";
    let eta = point.eta_at(ctx.value);
    let pick = |v: &[f64]| steps.iter().map(|&k| v[k - 1]).collect::<Vec<f64>>();
    let outcomes: Vec<(CellSeries, f64)> = (0..point.n_states())
        .into_par_iter()
        .map(|k| {
            let mut rng = ctx.rng(k);
            let psi = haar_random_pure(d, &mut rng)?;
            let rho = pure_density(&psi);
            let desc = ordered_bloch_values(&rho, &basis, BlochOrder::Descending)?;
            let asc = ordered_bloch_values(&rho, &basis, BlochOrder::Ascending)?;
            let mut cell = vec![("bloch_desc", pick(&desc.partial_sums)), ("bloch_asc", pick(&asc.partial_sums))];
            let mut distance = 0.0;
            if perturbed {
                let u_r = haar_unitary(d, &mut rng);
                let moved = fractional_unitary_perturb(&basis, &u_r, eta)?;
                let options = SolverOptions::default();
                let fd = ordered_perturbed_fidelity(&psi, &basis, &moved, BlochOrder::Descending, options)?;
                let fa = ordered_perturbed_fidelity(&psi, &basis, &moved, BlochOrder::Ascending, options)?;
                cell.push(("fidelity_desc", pick(&fd)));
                cell.push(("fidelity_asc", pick(&fa)));
                distance = fractional_distance(&u_r, eta)?;
            }
            Ok((cell, distance))
        })
        .collect::<Result<_>>()?;
    if perturbed {
        let distances: Vec<f64> = outcomes.iter().map(|(_, dist)| *dist).collect();
        ctx.sample(0, "perturbation_distance", &distances);
    }
    let cells: Vec<CellSeries> = outcomes.into_iter().map(|(c, _)| c).collect();
    push_cells(ctx, &steps, &cells);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small(experiment: &str, model: &str, param: &str, values: &str, extra: &str) -> ExperimentConfig {
        let obs = if model.contains("kicked-top") { "J_y" } else if model.contains("tilted") { "Sz" } else { "s1y" };
        let text = format!(
            "experiment = \"{experiment}\"\nobservable = \"{obs}\"\nseed = 11\n{extra}\n[model]\n{model}\n[sweep]\nparam = \"{param}\"\nvalues = {values}\n"
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    const TOP: &str = "kind = \"kicked-top\"\nj = 1.5\nlambda = 3.0\nalpha = 1.4";

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = cell_rng(1, 0, 0).random();
        let b: u64 = cell_rng(1, 0, 1).random();
        let c2: u64 = cell_rng(1, 1, 0).random();
        let s: u64 = shared_rng(1).random();
        assert_eq!(a, cell_rng(1, 0, 0).random::<u64>());
        assert!(a != b && a != c2 && b != c2 && s != a);
    }

    #[test]
    fn report_steps_end_at_n() {
        assert_eq!(report_steps(10, Some(3)), vec![3, 6, 9, 10]);
        assert_eq!(report_steps(10, Some(5)), vec![5, 10]);
        assert_eq!(report_steps(4, None), vec![1, 2, 3, 4]);
        assert_eq!(report_steps(200, None).len(), 50);
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, e) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((e - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn tomo_is_deterministic_and_thread_independent() {
        let cfg = small("tomo", TOP, "lambda", "[0.5, 7.0]", "n_states = 3\nsteps = 12\nreport_every = 4");
        let a = run_experiment(&cfg).unwrap().to_csv_string().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_experiment(&cfg)).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("config_sha256: "));
        assert!(a.contains("\nsweep_param,sweep_value,step,metric,mean,stderr,n\n"));
        assert!(!a.contains('\r'));
        let fid = run_experiment(&cfg).unwrap();
        let row = fid.get("fidelity", 7.0, 12).unwrap();
        assert_eq!(row.n, 3);
        assert!(row.mean > 0.0 && row.mean <= 1.0);
        assert!(fid.get("rank", 0.5, 4).unwrap().mean <= 4.0);
    }

    #[test]
    fn seed_changes_output() {
        let a = small("tomo", TOP, "lambda", "[3.0]", "n_states = 2\nsteps = 6");
        let mut b = a.clone();
        b.seed = 12;
        assert_ne!(run_experiment(&a).unwrap().rows, run_experiment(&b).unwrap().rows);
    }

    #[test]
    fn coherent_state_fixed_across_noise_seeds() {
        let cfg = small(
            "tomo",
            TOP,
            "lambda",
            "[3.0]",
            "n_states = 4\nsteps = 20\nsigma = 0.0\n[state]\nkind = \"coherent\"\ntheta = 2.04\nphi = 2.42",
        );
        let t = run_experiment(&cfg).unwrap();
        // Without noise every realization is the same reconstruction.
        assert!(t.get("fidelity", 3.0, 20).unwrap().stderr < 1e-9);
    }

    #[test]
    fn krylov_dims_for_small_chains() {
        let model = "kind = \"kicked-ising\"\nL = 2\nJ = 1.0\nhx = 1.4\nhz = 1.4";
        let cfg = small("krylov", model, "L", "[2.0]", "");
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.get("krylov_dim", 2.0, 0).unwrap().mean, 13.0);
        assert_eq!(t.get("covariance_rank", 2.0, 32).unwrap().mean, 13.0);
    }

    #[test]
    fn lanczos_rows_for_hamiltonians() {
        let model = "kind = \"tilted-ising\"\nL = 2\nJ = 1.0\nhx = 1.4\nhz = 1.4\ndt = 0.1";
        let cfg = small("krylov", model, "hz", "[1.4]", "steps = 10");
        let t = run_experiment(&cfg).unwrap();
        let k = t.get("krylov_dim", 1.4, 0).unwrap().mean as usize;
        assert_eq!(t.series("lanczos_b", 1.4).len(), k - 1);
        assert!(t.get("krylov_complexity", 1.4, 10).unwrap().mean > 0.0);
    }

    #[test]
    fn perturb_reports_all_metrics() {
        let cfg = small("perturb", TOP, "lambda", "[3.0]", "n_states = 2\nsteps = 8\ndelta_lambda = 0.01");
        let t = run_experiment(&cfg).unwrap();
        for m in ["fidelity", "loschmidt_echo", "relative_entropy", "incompatibility"] {
            assert_eq!(t.series(m, 3.0).len(), 8, "{m}");
        }
        let echo = t.get("loschmidt_echo", 3.0, 1).unwrap().mean;
        assert!((echo - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ordered_bloch_descending_dominates() {
        let cfg = small("ordered-bloch", TOP, "eta", "[0.0, 0.1]", "n_states = 2");
        let t = run_experiment(&cfg).unwrap();
        for k in 1..=15 {
            let desc = t.get("bloch_desc", 0.1, k).unwrap().mean;
            let asc = t.get("bloch_asc", 0.1, k).unwrap().mean;
            assert!(desc >= asc - 1e-12);
        }
        assert!(t.get("perturbation_distance", 0.0, 0).unwrap().mean < 1e-12);
        assert!(t.get("fidelity_desc", 0.0, 15).unwrap().mean > 1.0 - 1e-6);
    }

    #[test]
    fn phase_space_starts_at_step_zero() {
        let cfg = small("phase-space", TOP, "lambda", "[3.0]", "steps = 3");
        let t = run_experiment(&cfg).unwrap();
        let s: Vec<usize> = t.series("husimi_entropy", 3.0).iter().map(|r| r.step).collect();
        assert_eq!(s, vec![0, 1, 2, 3]);
    }

    #[test]
    fn rmt_compare_small_chain() {
        let model = "kind = \"kicked-ising\"\nL = 3\nJ = 1.0\nhx = 1.4\nhz = 1.4";
        let mut cfg = small("rmt-compare", model, "hz", "[1.4]", "n_states = 3\nsteps = 80\nreport_every = 80");
        cfg.observable = "random-local".into();
        let t = run_experiment(&cfg).unwrap();
        let model_s = t.get("model_shannon", 1.4, 80).unwrap().mean;
        let rmt_s = t.get("rmt_shannon", 1.4, 80).unwrap();
        assert_eq!(rmt_s.n, 3);
        assert!(model_s > 0.0 && rmt_s.mean > 0.0);
    }

    #[test]
    fn writes_output_file() {
        let dir = std::env::temp_dir().join(format!("qtomo-exp-{}", std::process::id()));
        let mut cfg = small("phase-space", TOP, "lambda", "[3.0]", "steps = 1");
        cfg.output_path = Some(dir.join("sub/out.csv"));
        let t = run_experiment(&cfg).unwrap();
        let written = std::fs::read_to_string(dir.join("sub/out.csv")).unwrap();
        assert_eq!(written, t.to_csv_string().unwrap());
        std::fs::remove_dir_all(dir).ok();
    }
}
