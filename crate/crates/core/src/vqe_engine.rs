//! VQE optimisation and the three-stage warm-start sweep.
//!
//! Stage 1 runs `n_restarts` random initialisations per `(g, p)`. Stage 2
//! walks the depths in ascending order and starts one run per `(g, p)` from
//! the best lower-depth parameters. Stage 3 starts one run per `(g, p)` from
//! the same-depth record (any `g`) whose stored sub-Hamiltonian expectations
//! give the lowest energy at the target `g`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{order_parameter, OrderKind};
use crate::error::{Error, Result};
use crate::exact_oracle::{ground_space, ground_space_fidelity, ExactOptions, GroundSpace, StateRef};
use crate::flo_sim::{FloSimulator, MajoranaCovariance};
use crate::model::{build_model, BuildOptions, HamiltonianParams, ModelConstants, ModelInstance, ModelSpec};
use crate::optimize::{self, LbfgsOptions};
use crate::qudit_sim::{AnsatzParams, QuditSimulator, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    Random,
    DepthExtrapolated,
    CrossG,
}

/// Exact ground-state reference attached to a record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactRef {
    #[serde(rename = "E0")]
    pub e0: f64,
    pub fidelity: f64,
}

/// Outcome of one VQE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub model: ModelSpec,
    pub g: HamiltonianParams,
    pub p: usize,
    pub seed: u64,
    /// Pipeline stage (1 random, 2 depth extrapolation, 3 cross-g).
    pub stage: u8,
    pub init_strategy: InitStrategy,
    pub theta_final: Vec<f64>,
    pub sub_expectations: Vec<f64>,
    pub energy: f64,
    pub energy_initial: f64,
    pub order_params: BTreeMap<OrderKind, f64>,
    pub iterations: usize,
    pub grad_norm_final: f64,
    pub converged: bool,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_ref: Option<ExactRef>,
    /// Lowest-energy record of its `(g, p)` cell.
    #[serde(default)]
    pub best: bool,
}

impl RunRecord {
    /// Energy at another parameter of the same model from the stored expectations.
    pub fn energy_at(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.sub_expectations).map(|(c, e)| c * e).sum()
    }

    /// Identity of the task that produced this record.
    pub fn key(&self) -> RecordKey {
        RecordKey { g_bits: self.g.value().to_bits(), p: self.p, seed: self.seed, stage: self.stage }
    }

    /// Tie-break order for "best": energy, then seed.
    fn rank(&self) -> (f64, u64) {
        (self.energy, self.seed)
    }
}

fn better(a: &RunRecord, b: &RunRecord) -> bool {
    a.rank().partial_cmp(&b.rank()) == Some(std::cmp::Ordering::Less)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordKey {
    pub g_bits: u64,
    pub p: usize,
    pub seed: u64,
    pub stage: u8,
}

/// How stage 2 stretches lower-depth parameters to a deeper circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtrapolationMode {
    SmoothResample,
    ZeroPad,
    /// Evaluate both and keep the lower-energy start.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WarmStartStrategy {
    Random { bound: f64 },
    DepthExtrapolate { mode: ExtrapolationMode },
    CrossG { source: Vec<RunRecord> },
}

impl WarmStartStrategy {
    pub fn random(bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::ParamRange(format!("random init bound {bound} must be > 0")));
        }
        Ok(Self::Random { bound })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    SmoothResample,
    ZeroPad,
    CrossG,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub theta: Vec<f64>,
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes (no overshoot).
fn monotone_cubic(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if n == 1 {
        return y[0];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let i = match x.iter().position(|&xi| xi > t) {
        Some(0) => 0,
        Some(j) => j - 1,
        None => n - 2,
    };
    let s = (t - x[i]) / h[i];
    let (h00, h10, h01, h11) =
        (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
    h00 * y[i] + h10 * h[i] * m[i] + h01 * y[i + 1] + h11 * h[i] * m[i + 1]
}

/// Resample the layer angles of a depth-`p_src` vector to depth `p`. Layers
/// sit at normalized positions `(l−1)/(p−1)`; boundary angles are copied.
pub fn smooth_resample(theta: &[f64], k: usize, p_src: usize, p: usize) -> Vec<f64> {
    let pos = |l: usize, depth: usize| if depth == 1 { 0.0 } else { l as f64 / (depth - 1) as f64 };
    let xs: Vec<f64> = (0..p_src).map(|l| pos(l, p_src)).collect();
    let mut out = vec![0.0; p * k];
    for i in 0..k {
        let ys: Vec<f64> = (0..p_src).map(|l| theta[l * k + i]).collect();
        for l in 0..p {
            out[l * k + i] = monotone_cubic(&xs, &ys, pos(l, p));
        }
    }
    out.extend_from_slice(&theta[p_src * k..]);
    out
}

/// Extend a depth-`p_src` vector with zero layers up to depth `p`.
pub fn zero_pad(theta: &[f64], k: usize, p_src: usize, p: usize) -> Vec<f64> {
    let mut out = theta[..p_src * k].to_vec();
    out.resize(p * k, 0.0);
    out.extend_from_slice(&theta[p_src * k..]);
    out
}

fn best_of<'a>(records: impl Iterator<Item = &'a RunRecord>) -> Option<&'a RunRecord> {
    records.fold(None, |acc: Option<&RunRecord>, r| match acc {
        Some(b) if !better(r, b) => Some(b),
        _ => Some(r),
    })
}

/// Warm-start candidates for `(g, p)`: smooth-resample and zero-pad of the
/// best lower-depth record at `g`, then the cross-g argmin at depth `p`.
pub fn warm_start_candidates(history: &[RunRecord], model: &ModelInstance, g: &HamiltonianParams, p: usize) -> Result<Vec<Candidate>> {
    let k = model.k();
    let mut out = Vec::new();
    if let Some(src) = best_of(history.iter().filter(|r| r.g == *g && r.p < p)) {
        out.push(Candidate { kind: CandidateKind::SmoothResample, theta: smooth_resample(&src.theta_final, k, src.p, p) });
        out.push(Candidate { kind: CandidateKind::ZeroPad, theta: zero_pad(&src.theta_final, k, src.p, p) });
    }
    let coeffs = model.coefficients(g)?;
    let mut cross: Option<(&RunRecord, f64)> = None;
    for r in history.iter().filter(|r| r.p == p) {
        let score = r.energy_at(&coeffs);
        let take = match cross {
            None => true,
            Some((b, s)) => (score, r.seed).partial_cmp(&(s, b.seed)) == Some(std::cmp::Ordering::Less),
        };
        if take {
            cross = Some((r, score));
        }
    }
    if let Some((r, _)) = cross {
        out.push(Candidate { kind: CandidateKind::CrossG, theta: r.theta_final.clone() });
    }
    Ok(out)
}

/// Final state of a run in the representation of its backend.
#[derive(Debug, Clone)]
pub enum FinalState {
    Spin(StateVector),
    Gaussian(MajoranaCovariance),
}

impl FinalState {
    pub fn as_ref(&self) -> StateRef<'_> {
        match self {
            FinalState::Spin(s) => StateRef::Spin(s),
            FinalState::Gaussian(m) => StateRef::Gaussian(m),
        }
    }
}

enum Backend {
    Qudit(QuditSimulator),
    Flo(FloSimulator),
}

/// A model with its compiled simulator, shared by every task of a sweep.
pub struct Engine {
    pub model: ModelInstance,
    backend: Backend,
}

/// The cost function at one `g`.
pub struct Problem<'a> {
    engine: &'a Engine,
    pub g: HamiltonianParams,
    pub coeffs: Vec<f64>,
    init: Option<MajoranaCovariance>,
}

impl Engine {
    pub fn new(model: ModelInstance) -> Result<Self> {
        let backend = if model.is_fermionic() { Backend::Flo(FloSimulator::new(&model)?) } else { Backend::Qudit(QuditSimulator::new(&model)?) };
        Ok(Self { model, backend })
    }

    pub fn problem(&self, g: &HamiltonianParams) -> Result<Problem<'_>> {
        let coeffs = self.model.coefficients(g)?;
        let init = match &self.backend {
            Backend::Flo(sim) => Some(sim.prepare_trivial(&coeffs)?),
            Backend::Qudit(_) => None,
        };
        Ok(Problem { engine: self, g: *g, coeffs, init })
    }
}

impl Problem<'_> {
    fn check_len(&self, p: usize, theta: &[f64]) -> Result<()> {
        let expected = self.engine.model.n_params(p);
        if p == 0 || theta.len() != expected {
            return Err(Error::ParamMismatch(format!("depth {p} needs {expected} parameters, got {}", theta.len())));
        }
        Ok(())
    }

    pub fn energy_and_gradient(&self, p: usize, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(p, theta)?;
        match &self.engine.backend {
            Backend::Qudit(sim) => sim.energy_and_gradient(&self.coeffs, &AnsatzParams::from_flat(&self.engine.model, p, theta)?),
            Backend::Flo(sim) => sim.energy_and_gradient(&self.coeffs, self.init.as_ref().expect("FLO init"), p, theta),
        }
    }

    pub fn state(&self, p: usize, theta: &[f64]) -> Result<FinalState> {
        self.check_len(p, theta)?;
        Ok(match &self.engine.backend {
            Backend::Qudit(sim) => FinalState::Spin(sim.run_circuit(&AnsatzParams::from_flat(&self.engine.model, p, theta)?)?),
            Backend::Flo(sim) => FinalState::Gaussian(sim.run_circuit(self.init.as_ref().expect("FLO init"), p, theta)?),
        })
    }

    pub fn sub_expectations(&self, state: &FinalState) -> Vec<f64> {
        match (&self.engine.backend, state) {
            (Backend::Qudit(sim), FinalState::Spin(s)) => sim.sub_expectations(s),
            (Backend::Flo(sim), FinalState::Gaussian(m)) => sim.sub_expectations(m),
            _ => unreachable!("state built by the same backend"),
        }
    }

    pub fn energy(&self, p: usize, theta: &[f64]) -> Result<f64> {
        let s = self.state(p, theta)?;
        Ok(self.coeffs.iter().zip(self.sub_expectations(&s)).map(|(c, e)| c * e).sum())
    }

    /// Optimise from `theta0` and build the record. Metadata fields (`seed`,
    /// `stage`, `init_strategy`) are left at their defaults for the caller.
    pub fn minimize(&self, p: usize, theta0: &[f64], opts: &RunOptions, exact: Option<&GroundSpace>) -> Result<RunRecord> {
        self.check_len(p, theta0)?;
        let start = Instant::now();
        let f = |x: &[f64]| self.energy_and_gradient(p, x).unwrap_or_else(|_| (f64::INFINITY, vec![0.0; x.len()]));
        let res = optimize::minimize(f, theta0, &opts.lbfgs);
        let state = self.state(p, &res.x)?;
        let subs = self.sub_expectations(&state);
        let energy = self.coeffs.iter().zip(&subs).map(|(c, e)| c * e).sum();
        let mut order_params = BTreeMap::new();
        for &kind in &opts.order_params {
            order_params.insert(kind, order_parameter(state.as_ref(), kind, &self.engine.model)?);
        }
        let exact_ref = match exact {
            Some(gs) => Some(ExactRef { e0: gs.energy, fidelity: ground_space_fidelity(state.as_ref(), gs)? }),
            None => None,
        };
        let converged = res.converged();
        Ok(RunRecord {
            model: self.engine.model.spec,
            g: self.g,
            p,
            seed: 0,
            stage: 1,
            init_strategy: InitStrategy::Random,
            theta_final: res.x,
            sub_expectations: subs,
            energy,
            energy_initial: res.f_initial,
            order_params,
            iterations: res.iterations,
            grad_norm_final: res.grad_norm,
            converged,
            wall_time: start.elapsed().as_secs_f64(),
            exact_ref,
            best: false,
        })
    }
}

/// Optimiser settings plus what to measure at the end of each run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub lbfgs: LbfgsOptions,
    pub order_params: Vec<OrderKind>,
}

/// One-shot optimisation of a single `(model, g, p)` from `theta0`.
pub fn minimize(model: &ModelInstance, g: &HamiltonianParams, p: usize, theta0: &[f64], opts: &RunOptions) -> Result<RunRecord> {
    let engine = Engine::new(model.clone())?;
    engine.problem(g)?.minimize(p, theta0, opts, None)
}

/// Uniform `[0, bound)` layer angles, `[0, π)` boundary angles.
pub fn random_theta(model: &ModelInstance, p: usize, bound: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..p * model.k()).map(|_| rng.gen_range(0.0..bound)).collect();
    theta.extend((0..model.n_boundary()).map(|_| rng.gen_range(0.0..std::f64::consts::PI)));
    theta
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one task; independent of scheduling.
pub fn task_seed(base: u64, g_index: usize, p: usize, restart: usize, stage: u8) -> u64 {
    [g_index as u64, p as u64, restart as u64, stage as u64].iter().fold(splitmix64(base), |h, &x| splitmix64(h ^ splitmix64(x)))
}

/// The g axis of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GGrid {
    List(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl GGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GGrid::List(v) => v.clone(),
            GGrid::Range { min, max, count } => match count {
                0 => vec![],
                1 => vec![*min],
                n => (0..*n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmStartConfig {
    pub depth_extrapolation: bool,
    pub cross_g: bool,
    pub mode: ExtrapolationMode,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self { depth_extrapolation: true, cross_g: true, mode: ExtrapolationMode::Auto }
    }
}

fn default_restarts() -> usize {
    5
}

fn default_output() -> PathBuf {
    PathBuf::from("phasesketch-out")
}

/// Declarative `(g × p × restarts)` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub constants: ModelConstants,
    pub g_grid: GGrid,
    pub p_grid: Vec<usize>,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    #[serde(default)]
    pub warm_start: WarmStartConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub compute_exact: bool,
    /// Empty means every order parameter defined for the model.
    #[serde(default)]
    pub order_params: Vec<OrderKind>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Random layer angles are drawn from `[0, init_scale/p)`.
    #[serde(default = "one")]
    pub init_scale: f64,
    #[serde(default)]
    pub optimizer: LbfgsOptions,
    #[serde(default)]
    pub exact: ExactSettings,
}

fn one() -> f64 {
    1.0
}

/// Serializable subset of [`ExactOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactSettings {
    pub degeneracy_tol: f64,
    pub seed: u64,
}

impl Default for ExactSettings {
    fn default() -> Self {
        let d = ExactOptions::default();
        Self { degeneracy_tol: d.degeneracy_tol, seed: d.seed }
    }
}

impl ExactSettings {
    pub fn options(&self) -> ExactOptions {
        ExactOptions { degeneracy_tol: self.degeneracy_tol, seed: self.seed, ..ExactOptions::default() }
    }
}

impl SweepConfig {
    /// A config with defaults for everything but the grid.
    pub fn new(model: ModelSpec, g_grid: Vec<f64>, p_grid: Vec<usize>) -> Self {
        Self {
            model,
            constants: ModelConstants::default(),
            g_grid: GGrid::List(g_grid),
            p_grid,
            n_restarts: default_restarts(),
            warm_start: WarmStartConfig::default(),
            seed: 0,
            compute_exact: false,
            order_params: vec![],
            output_dir: default_output(),
            workers: None,
            init_scale: 1.0,
            optimizer: LbfgsOptions::default(),
            exact: ExactSettings::default(),
        }
    }

    /// Semantic checks; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config { path: field.into(), msg });
        let g = self.g_grid.values();
        if g.is_empty() {
            return bad("g_grid", "must not be empty".into());
        }
        for (i, &v) in g.iter().enumerate() {
            if let Err(e) = self.model.params(v).validate() {
                return bad(&format!("g_grid[{i}]"), e.to_string());
            }
        }
        let mut sorted = g.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("g_grid", "values must be distinct".into());
        }
        if self.p_grid.is_empty() {
            return bad("p_grid", "must not be empty".into());
        }
        if self.p_grid[0] == 0 || self.p_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("p_grid", "must be positive and strictly increasing".into());
        }
        if self.n_restarts == 0 {
            return bad("n_restarts", "must be ≥ 1".into());
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale", "must be > 0".into());
        }
        if self.workers == Some(0) {
            return bad("workers", "must be ≥ 1".into());
        }
        for (i, k) in self.order_params.iter().enumerate() {
            if !k.applies_to(&self.model) {
                return bad(&format!("order_params[{i}]"), format!("{k} is not defined for {}", self.model));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ModelInstance> {
        build_model(self.model, &BuildOptions { constants: self.constants, ..BuildOptions::default() })
    }

    pub fn order_kinds(&self) -> Vec<OrderKind> {
        if self.order_params.is_empty() {
            OrderKind::defaults_for(&self.model)
        } else {
            self.order_params.clone()
        }
    }

    /// Number of records a complete sweep produces.
    pub fn expected_records(&self) -> usize {
        let extra = self.warm_start.depth_extrapolation as usize + self.warm_start.cross_g as usize;
        self.g_grid.values().len() * self.p_grid.len() * (self.n_restarts + extra)
    }
}

/// Flag the best record (lowest energy, then seed) of every `(g, p)` cell.
pub fn mark_best(records: &mut [RunRecord]) {
    let mut best: HashMap<(u64, usize), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let key = (r.g.value().to_bits(), r.p);
        match best.get(&key) {
            Some(&j) if !better(r, &records[j]) => {}
            _ => {
                best.insert(key, i);
            }
        }
    }
    let winners: HashSet<usize> = best.into_values().collect();
    for (i, r) in records.iter_mut().enumerate() {
        r.best = winners.contains(&i);
    }
}

/// Canonical record order: g, p, stage, seed.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        a.g.value().partial_cmp(&b.g.value()).unwrap().then(a.p.cmp(&b.p)).then(a.stage.cmp(&b.stage)).then(a.seed.cmp(&b.seed))
    });
}

/// Exact ground spaces for every grid point.
pub fn exact_references(model: &ModelInstance, g_values: &[f64], settings: &ExactSettings) -> Result<Vec<GroundSpace>> {
    g_values.iter().map(|&g| ground_space(model, &model.spec.params(g), &settings.options())).collect()
}

struct Task {
    g_index: usize,
    p: usize,
    stage: u8,
    seed: u64,
}

/// Run the sweep without persistence.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<RunRecord>> {
    run_sweep_with(config, Vec::new(), &|_| Ok(()))
}

/// Run the sweep, skipping tasks already present in `existing` and handing
/// every new record to `sink` as soon as it is produced. Returns the full
/// record set in canonical order with `best` flags.
pub fn run_sweep_with(config: &SweepConfig, existing: Vec<RunRecord>, sink: &(dyn Fn(&RunRecord) -> Result<()> + Sync)) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let model = config.build_model()?;
    let engine = Engine::new(model)?;
    let g_values = config.g_grid.values();
    let problems: Vec<Problem<'_>> = g_values.iter().map(|&g| engine.problem(&engine.model.spec.params(g))).collect::<Result<_>>()?;
    let exact = if config.compute_exact { Some(exact_references(&engine.model, &g_values, &config.exact)?) } else { None };
    let opts = RunOptions { lbfgs: config.optimizer.clone(), order_params: config.order_kinds() };

    let mut done: HashMap<RecordKey, RunRecord> = HashMap::new();
    for mut r in existing {
        if r.model != config.model {
            return Err(Error::Store(format!("existing record for {} does not match {}", r.model, config.model)));
        }
        r.best = false;
        done.insert(r.key(), r);
    }
    let sink = Mutex::new(sink);
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = config.workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::Config { path: "workers".into(), msg: e.to_string() })?
    };

    let key_of = |t: &Task| RecordKey { g_bits: g_values[t.g_index].to_bits(), p: t.p, seed: t.seed, stage: t.stage };
    // Runs the pending tasks of one barrier-synchronised batch and merges them.
    let run_batch = |tasks: Vec<Task>, done: &mut HashMap<RecordKey, RunRecord>, start: &(dyn Fn(&Task, &HashMap<RecordKey, RunRecord>) -> Result<(Vec<f64>, InitStrategy)> + Sync)| -> Result<()> {
        let pending: Vec<Task> = tasks.into_iter().filter(|t| !done.contains_key(&key_of(t))).collect();
        let snapshot = &*done;
        let out: Vec<Result<RunRecord>> = pool.install(|| {
            pending
                .par_iter()
                .map(|t| {
                    let (theta0, strategy) = start(t, snapshot)?;
                    let ex = exact.as_ref().map(|v| &v[t.g_index]);
                    let mut rec = problems[t.g_index].minimize(t.p, &theta0, &opts, ex)?;
                    rec.seed = t.seed;
                    rec.stage = t.stage;
                    rec.init_strategy = strategy;
                    sink.lock().expect("sink lock")(&rec)?;
                    Ok(rec)
                })
                .collect()
        });
        for r in out {
            let r = r?;
            done.insert(r.key(), r);
        }
        Ok(())
    };

    let task = |g_index: usize, p: usize, restart: usize, stage: u8| Task { g_index, p, stage, seed: task_seed(config.seed, g_index, p, restart, stage) };
    let model = &engine.model;

    // Stage 1: random starts.
    let stage1: Vec<Task> = (0..g_values.len())
        .flat_map(|gi| config.p_grid.iter().flat_map(move |&p| (0..config.n_restarts).map(move |r| (gi, p, r))))
        .map(|(gi, p, r)| task(gi, p, r, 1))
        .collect();
    run_batch(stage1, &mut done, &|t, _| {
        let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
        Ok((random_theta(model, t.p, config.init_scale / t.p as f64, &mut rng), InitStrategy::Random))
    })?;

    // Stage 2: depth extrapolation, one depth at a time.
    if config.warm_start.depth_extrapolation {
        for &p in &config.p_grid {
            let tasks: Vec<Task> = (0..g_values.len()).map(|gi| task(gi, p, 0, 2)).collect();
            run_batch(tasks, &mut done, &|t, done| {
                let g = &problems[t.g_index].g;
                let history: Vec<RunRecord> = done.values().filter(|r| r.g == *g && r.stage <= 2 && r.p <= t.p).cloned().collect();
                let theta = depth_start(&problems[t.g_index], &history, t.p, config.warm_start.mode)?;
                Ok((theta, InitStrategy::DepthExtrapolated))
            })?;
        }
    }

    // Stage 3: cross-g reuse at each depth.
    if config.warm_start.cross_g {
        let tasks: Vec<Task> = (0..g_values.len()).flat_map(|gi| config.p_grid.iter().map(move |&p| (gi, p))).map(|(gi, p)| task(gi, p, 0, 3)).collect();
        run_batch(tasks, &mut done, &|t, done| {
            let prior: Vec<RunRecord> = done.values().filter(|r| r.p == t.p && r.stage <= 2).cloned().collect();
            let cands = warm_start_candidates(&prior, model, &problems[t.g_index].g, t.p)?;
            let c = cands.into_iter().find(|c| c.kind == CandidateKind::CrossG).expect("stage 1 records exist at every depth");
            Ok((c.theta, InitStrategy::CrossG))
        })?;
    }

    let mut records: Vec<RunRecord> = done.into_values().collect();
    sort_records(&mut records);
    mark_best(&mut records);
    Ok(records)
}

/// Starting point of a stage-2 run. Below the lowest grid depth the circuit
/// is extended from depth 0 (all-zero angles), keeping the boundary angles of
/// the best same-depth record.
fn depth_start(problem: &Problem<'_>, history: &[RunRecord], p: usize, mode: ExtrapolationMode) -> Result<Vec<f64>> {
    let model = &problem.engine.model;
    let cands = warm_start_candidates(history, model, &problem.g, p)?;
    let pick = |kind: CandidateKind| cands.iter().find(|c| c.kind == kind).map(|c| c.theta.clone());
    let (smooth, pad) = (pick(CandidateKind::SmoothResample), pick(CandidateKind::ZeroPad));
    let Some(pad) = pad else {
        let mut theta = vec![0.0; p * model.k()];
        if model.n_boundary() > 0 {
            match best_of(history.iter().filter(|r| r.p == p)) {
                Some(r) => theta.extend_from_slice(&r.theta_final[p * model.k()..]),
                None => theta.extend(std::iter::repeat(0.0).take(model.n_boundary())),
            }
        }
        return Ok(theta);
    };
    let smooth = smooth.expect("both depth candidates come together");
    Ok(match mode {
        ExtrapolationMode::ZeroPad => pad,
        ExtrapolationMode::SmoothResample => smooth,
        ExtrapolationMode::Auto => {
            if problem.energy(p, &smooth)? < problem.energy(p, &pad)? {
                smooth
            } else {
                pad
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(g: f64, p: usize, seed: u64, theta: Vec<f64>, subs: Vec<f64>, energy: f64) -> RunRecord {
        RunRecord {
            model: ModelSpec::Tfim1d { l: 4 },
            g: HamiltonianParams::Tfim { h_x: g },
            p,
            seed,
            stage: 1,
            init_strategy: InitStrategy::Random,
            theta_final: theta,
            sub_expectations: subs,
            energy,
            energy_initial: energy,
            order_params: BTreeMap::new(),
            iterations: 0,
            grad_norm_final: 0.0,
            converged: true,
            wall_time: 0.0,
            exact_ref: None,
            best: false,
        }
    }

    #[test]
    fn zero_pad_example() {
        let m = ModelInstance::build(ModelSpec::Tfim1d { l: 4 }).unwrap();
        let h = vec![rec(0.5, 1, 0, vec![0.3, 0.1, 0.2, 0.05], vec![0.0; 4], -1.0)];
        let c = warm_start_candidates(&h, &m, &HamiltonianParams::Tfim { h_x: 0.5 }, 2).unwrap();
        let pad = c.iter().find(|c| c.kind == CandidateKind::ZeroPad).unwrap();
        assert_eq!(pad.theta, vec![0.3, 0.1, 0.2, 0.05, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn smooth_resample_linear() {
        // Two layers, k = 2: angle i at layer l is (i + 1)·(1 + l).
        let theta = vec![1.0, 2.0, 2.0, 4.0];
        let out = smooth_resample(&theta, 2, 2, 4);
        for l in 0..4 {
            let x = l as f64 / 3.0;
            assert!((out[l * 2] - (1.0 + x)).abs() < 1e-14);
            assert!((out[l * 2 + 1] - 2.0 * (1.0 + x)).abs() < 1e-14);
        }
        // Boundary angles ride along.
        let out = smooth_resample(&[0.1, 0.2, 7.0, 8.0, 9.0, 10.0], 2, 1, 3);
        assert_eq!(out, vec![0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 7.0, 8.0, 9.0, 10.0]);
    }

    #[test]
    fn monotone_cubic_has_no_overshoot() {
        let x = [0.0, 0.25, 0.5, 0.75, 1.0];
        let y = [0.0, 0.0, 1.0, 1.0, 1.0];
        for i in 0..=100 {
            let v = monotone_cubic(&x, &y, i as f64 / 100.0);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v), "{v}");
        }
    }

    #[test]
    fn cross_g_scoring_example() {
        // Two-group scoring: c = (1, 0.5); A: (−2, 1) → −1.5, B: (−1.9, 0.9) → −1.45.
        let model = ModelInstance::build(ModelSpec::Bbc { l: 3 }).unwrap();
        let phi = (0.5f64).atan2(1.0);
        let c = model.coefficients(&HamiltonianParams::Bbc { phi }).unwrap();
        let scale = c[0];
        let a = rec(0.1, 2, 5, vec![1.0], vec![-2.0 / scale / 2.0, -2.0 / scale / 2.0, 0.5 / scale, 0.5 / scale], 0.0);
        let b = rec(0.2, 2, 1, vec![2.0], vec![-1.9 / scale / 2.0, -1.9 / scale / 2.0, 0.45 / scale, 0.45 / scale], 0.0);
        assert!((a.energy_at(&c) + 1.5).abs() < 1e-12);
        assert!((b.energy_at(&c) + 1.45).abs() < 1e-12);
        let mut h = vec![b, a];
        for r in &mut h {
            r.model = model.spec;
        }
        let cands = warm_start_candidates(&h, &model, &HamiltonianParams::Bbc { phi }, 2).unwrap();
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].theta, vec![1.0]);
    }

    #[test]
    fn empty_history_gives_no_candidates() {
        let m = ModelInstance::build(ModelSpec::Tfim1d { l: 4 }).unwrap();
        assert!(warm_start_candidates(&[], &m, &HamiltonianParams::Tfim { h_x: 1.0 }, 3).unwrap().is_empty());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = HashSet::new();
        for gi in 0..5 {
            for p in 1..5 {
                for r in 0..5 {
                    for s in 1..=3 {
                        assert!(seen.insert(task_seed(7, gi, p, r, s)));
                    }
                }
            }
        }
        assert_eq!(task_seed(7, 1, 2, 3, 1), task_seed(7, 1, 2, 3, 1));
        assert_ne!(task_seed(7, 1, 2, 3, 1), task_seed(8, 1, 2, 3, 1));
    }

    #[test]
    fn best_ties_break_on_seed() {
        let mut rs = vec![rec(0.1, 1, 9, vec![], vec![], -1.0), rec(0.1, 1, 3, vec![], vec![], -1.0), rec(0.1, 1, 1, vec![], vec![], -0.5)];
        mark_best(&mut rs);
        assert_eq!(rs.iter().map(|r| r.best).collect::<Vec<_>>(), vec![false, true, false]);
    }

    #[test]
    fn sweep_record_count_and_determinism() {
        let mut cfg = SweepConfig::new(ModelSpec::Tfim1d { l: 4 }, vec![0.5, 1.0, 1.5], vec![1, 2]);
        cfg.n_restarts = 2;
        cfg.compute_exact = true;
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.len(), 24);
        assert_eq!(cfg.expected_records(), 24);
        assert_eq!(a.iter().filter(|r| r.best).count(), 6);
        let b = run_sweep(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.energy.to_bits(), y.energy.to_bits());
            assert_eq!(x.theta_final, y.theta_final);
        }
        for r in &a {
            assert!(r.energy <= r.energy_initial + 1e-12);
            let ex = r.exact_ref.unwrap();
            assert!(r.energy >= ex.e0 - 1e-9);
            assert!(r.order_params.contains_key(&OrderKind::MZ));
        }
    }

    #[test]
    fn resume_skips_finished_tasks() {
        let mut cfg = SweepConfig::new(ModelSpec::Tfim1d { l: 4 }, vec![0.5, 1.0], vec![1, 2]);
        cfg.n_restarts = 2;
        let full = run_sweep(&cfg).unwrap();
        let partial: Vec<RunRecord> = full.iter().filter(|r| r.stage == 1).cloned().collect();
        let count = Mutex::new(0usize);
        let resumed = run_sweep_with(&cfg, partial, &|_| {
            *count.lock().unwrap() += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(*count.lock().unwrap(), 8);
        assert_eq!(resumed.len(), full.len());
        for (x, y) in resumed.iter().zip(&full) {
            assert_eq!(x.energy.to_bits(), y.energy.to_bits());
            assert_eq!(x.best, y.best);
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = SweepConfig::new(ModelSpec::Tfim1d { l: 4 }, vec![0.5], vec![2, 1]);
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "p_grid"));
        cfg.p_grid = vec![1];
        cfg.order_params = vec![OrderKind::Coop];
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "order_params[0]"));
        cfg.order_params.clear();
        cfg.g_grid = GGrid::List(vec![-1.0]);
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "g_grid[0]"));
    }
}
