//! Phase-diagram signals: order parameters, depth and field derivatives,
//! transition locators and exponential fits of `E(p)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_oracle::{GroundSpace, GroundStates};
use crate::model::{ModelInstance, ModelSpec, OperatorKind, SiteOperator};
use crate::qudit_sim::{expectation, StateVector};

pub use crate::exact_oracle::StateRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKind {
    /// `(1/N) Σ Z_i`.
    MZ,
    /// `S_2^z e^{iπ(S_3^z + … + S_{L−2}^z)} S_{L−1}^z`.
    String,
    /// `(1/(L−2)) Σ_{i=2}^{L−1} (−1)^i (S_{i−1}·S_i − S_i·S_{i+1})`.
    Dimer,
    /// `(1/(L−1)) Σ_{i=2}^{L} S_{i−1}·S_i`.
    SpinCorr,
    /// `e^{iπ(n_1 + n_L + n_{L²−L+1} + n_{L²})}`.
    Coop,
}

impl OrderKind {
    pub const ALL: [OrderKind; 5] = [OrderKind::MZ, OrderKind::String, OrderKind::Dimer, OrderKind::SpinCorr, OrderKind::Coop];

    pub fn name(&self) -> &'static str {
        match self {
            OrderKind::MZ => "m_z",
            OrderKind::String => "string",
            OrderKind::Dimer => "dimer",
            OrderKind::SpinCorr => "spin_corr",
            OrderKind::Coop => "coop",
        }
    }

    pub fn applies_to(&self, spec: &ModelSpec) -> bool {
        match self {
            OrderKind::MZ => spec.is_tfim(),
            OrderKind::String | OrderKind::Dimer | OrderKind::SpinCorr => matches!(spec, ModelSpec::Bbc { .. }),
            OrderKind::Coop => matches!(spec, ModelSpec::Ssh2d { .. }),
        }
    }

    /// Order parameters defined for a model, in canonical order.
    pub fn defaults_for(spec: &ModelSpec) -> Vec<OrderKind> {
        Self::ALL.into_iter().filter(|k| k.applies_to(spec)).collect()
    }

    /// Range every emitted value must respect.
    fn bound(&self) -> f64 {
        match self {
            OrderKind::MZ | OrderKind::Coop | OrderKind::String => 1.0,
            OrderKind::Dimer => 4.0,
            OrderKind::SpinCorr => 2.0,
        }
    }
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Analysis(format!("unknown order parameter `{s}`")))
    }
}

fn exchange(a: usize, b: usize) -> SiteOperator {
    SiteOperator::new(OperatorKind::SpinExchange, vec![a, b], 1.0)
}

/// `e^{iπ S^z}` on a spin-1 digit (0, 1, 2 ↔ m = +1, 0, −1).
fn string_phase(digit: usize) -> f64 {
    if digit == 1 {
        1.0
    } else {
        -1.0
    }
}

fn sz(digit: usize) -> f64 {
    1.0 - digit as f64
}

/// String order between 1-based sites `i < j`.
pub fn string_order(state: &StateVector, i: usize, j: usize) -> f64 {
    state.diagonal_expectation(|x| {
        let mut v = sz(state.digit(x, i)) * sz(state.digit(x, j));
        for s in i + 1..j {
            v *= string_phase(state.digit(x, s));
        }
        v
    })
}

/// Expectation of an order parameter, checked against its admissible range.
pub fn order_parameter(state: StateRef<'_>, kind: OrderKind, model: &ModelInstance) -> Result<f64> {
    if !kind.applies_to(&model.spec) {
        return Err(Error::IncompatibleObservable { kind: kind.to_string(), model: model.spec.to_string() });
    }
    let n = model.lattice.n_sites;
    let value = match (kind, state) {
        (OrderKind::MZ, StateRef::Spin(s)) => {
            let ops: Vec<SiteOperator> = (1..=n).map(|i| SiteOperator::new(OperatorKind::PauliZ, vec![i], 1.0)).collect();
            expectation(s, &ops)? / n as f64
        }
        (OrderKind::String, StateRef::Spin(s)) => {
            if n < 4 {
                return Err(Error::Analysis(format!("string order needs L ≥ 4, got {n}")));
            }
            string_order(s, 2, n - 1)
        }
        (OrderKind::Dimer, StateRef::Spin(s)) => {
            if n < 3 {
                return Err(Error::Analysis(format!("dimerisation needs L ≥ 3, got {n}")));
            }
            let mut total = 0.0;
            for i in 2..n {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * (expectation(s, &[exchange(i - 1, i)])? - expectation(s, &[exchange(i, i + 1)])?);
            }
            total / (n - 2) as f64
        }
        (OrderKind::SpinCorr, StateRef::Spin(s)) => {
            let ops: Vec<SiteOperator> = (2..=n).map(|i| exchange(i - 1, i)).collect();
            expectation(s, &ops)? / (n - 1) as f64
        }
        (OrderKind::Coop, StateRef::Gaussian(m)) => m.parity(&model.corners().expect("grid model"))?,
        _ => return Err(Error::WrongBackend(format!("{kind} state representation does not match {}", model.spec))),
    };
    let bound = kind.bound() + 1e-9;
    if !(value.abs() <= bound) {
        return Err(Error::Analysis(format!("{kind} = {value} outside [−{bound}, {bound}]")));
    }
    Ok(value)
}

/// Order parameters of the exact ground space: the average over an orthonormal
/// ground basis for spins, a representative Slater determinant for fermions.
pub fn exact_order_parameter(gs: &GroundSpace, kind: OrderKind, model: &ModelInstance) -> Result<f64> {
    match &gs.states {
        GroundStates::Spin(states) => {
            let mut total = 0.0;
            for s in states {
                total += order_parameter(StateRef::Spin(s), kind, model)?;
            }
            Ok(total / states.len() as f64)
        }
        GroundStates::Fermionic(_) => {
            let rep = gs.representative_gaussian().expect("fermionic ground space");
            order_parameter(StateRef::Gaussian(&rep), kind, model)
        }
    }
}

/// `ΔE/Δp` on a `(p, g)` grid. Row `r` belongs to `p_grid[r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTable {
    pub g_grid: Vec<f64>,
    pub p_grid: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub normalized: bool,
}

/// One best-energy cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCell {
    pub g: f64,
    pub p: usize,
    pub energy: f64,
}

fn sorted_unique_f64(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

fn grid_of(cells: &[EnergyCell]) -> (Vec<f64>, Vec<usize>, BTreeMap<(usize, u64), f64>) {
    let gs = sorted_unique_f64(cells.iter().map(|c| c.g));
    let mut ps: Vec<usize> = cells.iter().map(|c| c.p).collect();
    ps.sort_unstable();
    ps.dedup();
    let map = cells.iter().map(|c| ((c.p, c.g.to_bits()), c.energy)).collect();
    (gs, ps, map)
}

impl DerivativeTable {
    /// Forward differences over consecutive grid depths. Missing cells become
    /// NaN and are returned in the hole list.
    pub fn from_cells_lenient(cells: &[EnergyCell], normalize: bool) -> (Self, Vec<(f64, usize)>) {
        let (g_grid, ps, map) = grid_of(cells);
        let mut holes = Vec::new();
        for &p in &ps {
            for &g in &g_grid {
                if !map.contains_key(&(p, g.to_bits())) {
                    holes.push((g, p));
                }
            }
        }
        let mut values = Vec::new();
        for w in ps.windows(2) {
            let (p0, p1) = (w[0], w[1]);
            let row = g_grid
                .iter()
                .map(|g| match (map.get(&(p0, g.to_bits())), map.get(&(p1, g.to_bits()))) {
                    (Some(e0), Some(e1)) => (e1 - e0) / (p1 - p0) as f64,
                    _ => f64::NAN,
                })
                .collect();
            values.push(row);
        }
        let p_grid = ps.iter().skip(1).copied().collect();
        let table = Self { g_grid, p_grid, values, normalized: false };
        (if normalize { table.normalize() } else { table }, holes)
    }

    /// Per-depth rescaling to `max |value| = 1` (all-zero rows stay zero).
    pub fn normalize(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|row| {
                let m = row.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
                if m == 0.0 {
                    row.clone()
                } else {
                    row.iter().map(|v| v / m).collect()
                }
            })
            .collect();
        Self { g_grid: self.g_grid.clone(), p_grid: self.p_grid.clone(), values, normalized: true }
    }

    pub fn row(&self, p: usize) -> Option<&[f64]> {
        self.p_grid.iter().position(|&q| q == p).map(|i| self.values[i].as_slice())
    }
}

/// Strict variant of [`DerivativeTable::from_cells_lenient`]: any missing cell is an error.
pub fn energy_derivative_table(cells: &[EnergyCell], normalize: bool) -> Result<DerivativeTable> {
    let (table, holes) = DerivativeTable::from_cells_lenient(cells, normalize);
    if !holes.is_empty() {
        return Err(Error::Analysis(format!("missing (g, p) cells: {holes:?}")));
    }
    if table.p_grid.is_empty() {
        return Err(Error::Analysis("need at least two depths".into()));
    }
    Ok(table)
}

/// Derivative of a series over a sorted grid: central differences inside,
/// one-sided at the ends.
pub fn g_derivative(g: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = g.len();
    if n < 3 || y.len() != n {
        return Err(Error::Analysis(format!("need ≥ 3 matching points, got {} g and {} values", n, y.len())));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Analysis("g grid must be strictly increasing".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (y[b] - y[a]) / (g[b] - g[a])
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremumMode {
    Argmin,
    ArgmaxAbs,
}

/// Three-point running median; the end points are kept.
pub fn median3(row: &[f64]) -> Vec<f64> {
    let n = row.len();
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                row[i]
            } else {
                let mut w = [row[i - 1], row[i], row[i + 1]];
                w.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                w[1]
            }
        })
        .collect()
}

/// Grid point of the extremum of `row`; ties go to the smaller g, NaN entries are skipped.
pub fn locate_extremum(g: &[f64], row: &[f64], mode: ExtremumMode, smooth: bool) -> Option<f64> {
    let data = if smooth && row.len() >= 3 { median3(row) } else { row.to_vec() };
    let score = |v: f64| match mode {
        ExtremumMode::Argmin => v,
        ExtremumMode::ArgmaxAbs => -v.abs(),
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        if best.map_or(true, |(_, b)| score(v) < b) {
            best = Some((i, score(v)));
        }
    }
    best.map(|(i, _)| g[i])
}

/// Per-depth transition estimates from a derivative table.
pub fn locate_transition(table: &DerivativeTable, mode: ExtremumMode, smooth: bool) -> Vec<(usize, Option<f64>)> {
    table.p_grid.iter().zip(&table.values).map(|(&p, row)| (p, locate_extremum(&table.g_grid, row, mode, smooth))).collect()
}

/// `E(p) ≈ a e^{−γp} + e0_fit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub gamma: f64,
    pub e0_fit: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Linear least squares for `(a, e0)` at fixed `γ`; returns `(a, e0, rss)`.
fn project(p: &[f64], e: &[f64], gamma: f64) -> (f64, f64, f64) {
    let n = p.len() as f64;
    let x: Vec<f64> = p.iter().map(|&q| (-gamma * q).exp()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let me = e.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxe: f64 = x.iter().zip(e).map(|(v, w)| (v - mx) * (w - me)).sum();
    if sxx <= 1e-300 {
        return (0.0, me, e.iter().map(|w| (w - me).powi(2)).sum());
    }
    let a = sxe / sxx;
    let e0 = me - a * mx;
    let rss = x.iter().zip(e).map(|(v, w)| (a * v + e0 - w).powi(2)).sum();
    (a, e0, rss)
}

/// Variable-projection fit: log-spaced scan over `γ`, then golden-section refinement.
pub fn exp_fit(p: &[f64], e: &[f64]) -> Result<ExpFit> {
    if p.len() != e.len() || p.len() < 4 {
        return Err(Error::Analysis(format!("exp fit needs ≥ 4 matching points, got {} / {}", p.len(), e.len())));
    }
    let spread = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread == 0.0 {
        return Ok(ExpFit { a: 0.0, gamma: 0.0, e0_fit: e[0], residual: 0.0 });
    }
    if e.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        log::warn!("exp fit on a series that is not non-increasing");
    }
    // Shift p so that e^{−γp} stays representable for large depths.
    let p0 = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let ps: Vec<f64> = p.iter().map(|q| q - p0).collect();
    let (lo, hi, steps) = (1e-4f64.ln(), 20f64.ln(), 240);
    let grid: Vec<f64> = (0..=steps).map(|i| (lo + (hi - lo) * i as f64 / steps as f64).exp()).collect();
    let rss: Vec<f64> = grid.iter().map(|&g| project(&ps, e, g).2).collect();
    let ibest = (0..grid.len()).min_by(|&a, &b| rss[a].partial_cmp(&rss[b]).unwrap()).unwrap();
    let mut a = grid[ibest.saturating_sub(1)].ln();
    let mut b = grid[(ibest + 1).min(grid.len() - 1)].ln();
    let f = |lg: f64| project(&ps, e, lg.exp()).2;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let gamma = (0.5 * (a + b)).exp();
    let (amp, e0, rss) = project(&ps, e, gamma);
    // Undo the depth shift: a e^{−γ(p − p0)} = (a e^{γ p0}) e^{−γp}.
    Ok(ExpFit { a: amp * (gamma * p0).exp(), gamma, e0_fit: e0, residual: (rss / p.len() as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flo_sim::MajoranaCovariance;
    use crate::qudit_sim::prepare_initial;

    fn cells(data: &[(f64, usize, f64)]) -> Vec<EnergyCell> {
        data.iter().map(|&(g, p, energy)| EnergyCell { g, p, energy }).collect()
    }

    #[test]
    fn m_z_on_all_down() {
        let m = ModelInstance::build(ModelSpec::Tfim1d { l: 5 }).unwrap();
        let s = prepare_initial(&m, None).unwrap();
        assert!((order_parameter(StateRef::Spin(&s), OrderKind::MZ, &m).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn spin_corr_fully_polarized_is_one() {
        let m = ModelInstance::build(ModelSpec::Bbc { l: 4 }).unwrap();
        let s = StateVector::product(3, &[0; 4]);
        assert!((order_parameter(StateRef::Spin(&s), OrderKind::SpinCorr, &m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dimer_on_singlet_pairs() {
        // Singlets on bonds (1,2), (3,4): S·S = −2 inside, 0 across.
        let m = ModelInstance::build(ModelSpec::Bbc { l: 4 }).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let singlet: Vec<(usize, usize, f64)> = vec![(0, 2, r), (1, 1, -r), (2, 0, r)];
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 81];
        for &(a, b, x) in &singlet {
            for &(c, d, y) in &singlet {
                amps[((a * 3 + b) * 3 + c) * 3 + d] += x * y;
            }
        }
        let s = StateVector { amps, local_dim: 3, n_sites: 4 };
        let dimer = order_parameter(StateRef::Spin(&s), OrderKind::Dimer, &m).unwrap();
        // i=2: +(−2 − 0); i=3: −(0 − (−2)) → mean −2.
        assert!((dimer + 2.0).abs() < 1e-12, "{dimer}");
    }

    #[test]
    fn incompatible_kinds() {
        let m = ModelInstance::build(ModelSpec::Tfim1d { l: 4 }).unwrap();
        let s = prepare_initial(&m, None).unwrap();
        assert!(matches!(order_parameter(StateRef::Spin(&s), OrderKind::Coop, &m), Err(Error::IncompatibleObservable { .. })));
        let ssh = ModelInstance::build(ModelSpec::Ssh2d { l: 4 }).unwrap();
        let v = MajoranaCovariance::vacuum(16);
        assert!((order_parameter(StateRef::Gaussian(&v), OrderKind::Coop, &ssh).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(order_parameter(StateRef::Gaussian(&v), OrderKind::MZ, &ssh), Err(Error::IncompatibleObservable { .. })));
    }

    #[test]
    fn derivative_examples() {
        let t = energy_derivative_table(&cells(&[(0.5, 1, -1.0), (0.5, 2, -1.5)]), false).unwrap();
        assert_eq!(t.values, vec![vec![-0.5]]);
        let t = energy_derivative_table(&cells(&[(0.1, 1, 0.0), (0.2, 1, 0.0), (0.1, 2, -0.5), (0.2, 2, -0.25)]), true).unwrap();
        assert_eq!(t.values, vec![vec![-1.0, -0.5]]);
        let t = energy_derivative_table(&cells(&[(0.1, 1, -2.0), (0.2, 1, -3.0), (0.1, 2, -2.0), (0.2, 2, -3.0)]), true).unwrap();
        assert_eq!(t.values, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn derivative_uses_depth_spacing() {
        let t = energy_derivative_table(&cells(&[(0.1, 2, -1.0), (0.1, 5, -2.5)]), false).unwrap();
        assert_eq!(t.p_grid, vec![5]);
        assert!((t.values[0][0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn missing_cells_reported() {
        let err = energy_derivative_table(&cells(&[(0.1, 1, -1.0), (0.2, 1, -1.0), (0.1, 2, -2.0)]), false).unwrap_err();
        assert!(err.to_string().contains("0.2"));
        let (t, holes) = DerivativeTable::from_cells_lenient(&cells(&[(0.1, 1, -1.0), (0.2, 1, -1.0), (0.1, 2, -2.0)]), false);
        assert_eq!(holes, vec![(0.2, 2)]);
        assert!(t.values[0][1].is_nan());
    }

    #[test]
    fn g_derivative_examples() {
        let g: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let lin: Vec<f64> = g.iter().map(|x| 3.0 * x + 1.0).collect();
        for d in g_derivative(&g, &lin).unwrap() {
            assert!((d - 3.0).abs() < 1e-12);
        }
        assert!(g_derivative(&g, &[2.0; 6]).unwrap().iter().all(|&d| d == 0.0));
        let step = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let d = g_derivative(&g, &step).unwrap();
        let peak = d.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0 / (2.0 * 0.1)).abs() < 1e-9);
        assert!(g_derivative(&g[..2], &lin[..2]).is_err());
    }

    #[test]
    fn locate_examples() {
        let g = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(locate_extremum(&g, &[0.0, -1.0, -2.0, -3.0, -1.0], ExtremumMode::Argmin, false), Some(0.4));
        assert_eq!(locate_extremum(&g, &[1.0; 5], ExtremumMode::Argmin, false), Some(0.1));
        assert_eq!(locate_extremum(&g, &[0.5, -2.0, 1.0, 0.0, 0.1], ExtremumMode::ArgmaxAbs, false), Some(0.2));
        // A single-point spike is removed by the median filter.
        assert_eq!(locate_extremum(&g, &[-1.0, -1.2, -9.0, -1.1, -1.0], ExtremumMode::Argmin, true), Some(0.2));
    }

    #[test]
    fn exp_fit_recovers_model() {
        let p: Vec<f64> = (1..=10).map(|x| x as f64).collect();
        let e: Vec<f64> = p.iter().map(|q| 2.0 * (-0.5 * q).exp() - 3.0).collect();
        let fit = exp_fit(&p, &e).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.gamma - 0.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.e0_fit + 3.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn exp_fit_flat_and_short() {
        let fit = exp_fit(&[1.0, 2.0, 3.0, 4.0], &[-4.0; 4]).unwrap();
        assert_eq!(fit, ExpFit { a: 0.0, gamma: 0.0, e0_fit: -4.0, residual: 0.0 });
        assert!(exp_fit(&[1.0, 2.0, 3.0], &[0.0, -1.0, -1.5]).is_err());
    }

    #[test]
    fn order_kind_names_round_trip() {
        for k in OrderKind::ALL {
            assert_eq!(k.name().parse::<OrderKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }
}
