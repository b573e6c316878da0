//! Model Hamiltonians and their splittings into commuting sub-Hamiltonians.
//!
//! Every model is written as `H(g) = Σ_i c_i(g) H_i` where each `H_i` is a sum
//! of mutually commuting local terms. The `H_i` carry no coefficients; all
//! dependence on the Hamiltonian parameter `g` lives in [`ModelInstance::coefficients`].
//!
//! Site indices are 1-based throughout. On grids sites are numbered row-major,
//! so site `y * Lx + x + 1` sits at column `x`, row `y` (both 0-based).
//!
//! Conventions:
//!
//! | quantity            | convention                                          |
//! |---------------------|-----------------------------------------------------|
//! | Pauli Z             | `+1` on `|0⟩`, `-1` on `|1⟩`                         |
//! | spin-1 basis        | local index 0, 1, 2 = `m = +1, 0, -1`               |
//! | two-site matrices   | first support site is the more significant digit    |
//! | fermionic operators | local basis `|n⟩`, hopping ignores Jordan–Wigner strings |

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of statevector amplitudes (`2^20`).
pub const DEFAULT_STATEVECTOR_CAP: usize = 1 << 20;

pub type CMatrix = DMatrix<Complex64>;

/// Which model and which lattice size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Open transverse-field Ising chain of length `l`.
    #[serde(rename = "tfim-1d")]
    Tfim1d { l: usize },
    /// Open transverse-field Ising model on an `lx × ly` grid.
    #[serde(rename = "tfim-2d")]
    Tfim2d { lx: usize, ly: usize },
    /// Open bilinear-biquadratic spin-1 chain of length `l`.
    Bbc { l: usize },
    /// Open 2D SSH model on an `l × l` grid of `2 × 2` unit cells.
    #[serde(rename = "ssh-2d")]
    Ssh2d { l: usize },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Tfim1d { .. } => "tfim-1d",
            ModelSpec::Tfim2d { .. } => "tfim-2d",
            ModelSpec::Bbc { .. } => "bbc",
            ModelSpec::Ssh2d { .. } => "ssh-2d",
        }
    }

    pub fn is_tfim(&self) -> bool {
        matches!(self, ModelSpec::Tfim1d { .. } | ModelSpec::Tfim2d { .. })
    }

    /// Wrap a scalar grid value into the parameter variant of this model.
    pub fn params(&self, value: f64) -> HamiltonianParams {
        match self {
            ModelSpec::Tfim1d { .. } | ModelSpec::Tfim2d { .. } => HamiltonianParams::Tfim { h_x: value },
            ModelSpec::Bbc { .. } => HamiltonianParams::Bbc { phi: value },
            ModelSpec::Ssh2d { .. } => HamiltonianParams::Ssh { r: value },
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Tfim1d { l } => write!(f, "tfim-1d(L={l})"),
            ModelSpec::Tfim2d { lx, ly } => write!(f, "tfim-2d({lx}x{ly})"),
            ModelSpec::Bbc { l } => write!(f, "bbc(L={l})"),
            ModelSpec::Ssh2d { l } => write!(f, "ssh-2d({l}x{l})"),
        }
    }
}

/// The Hamiltonian parameter `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HamiltonianParams {
    /// Transverse field strength, `h_x ≥ 0`.
    Tfim { h_x: f64 },
    /// Mixing angle in radians, `φ ∈ [−π, π)`.
    Bbc { phi: f64 },
    /// Hopping ratio `r = v/w > 0`.
    Ssh { r: f64 },
}

impl HamiltonianParams {
    pub fn value(&self) -> f64 {
        match *self {
            HamiltonianParams::Tfim { h_x } => h_x,
            HamiltonianParams::Bbc { phi } => phi,
            HamiltonianParams::Ssh { r } => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::PI;
        match *self {
            HamiltonianParams::Tfim { h_x } if !(h_x >= 0.0 && h_x.is_finite()) => {
                Err(Error::ParamRange(format!("h_x = {h_x} must be finite and ≥ 0")))
            }
            HamiltonianParams::Bbc { phi } if !(-PI..PI).contains(&phi) => {
                Err(Error::ParamRange(format!("phi = {phi} must lie in [-π, π)")))
            }
            HamiltonianParams::Ssh { r } if !(r > 0.0 && r.is_finite()) => {
                Err(Error::ParamRange(format!("r = {r} must be finite and > 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Fixed model constants. The defaults are the standard choices; every one of
/// them can be overridden for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConstants {
    /// Ising coupling `J`.
    pub j: f64,
    /// Bias field `h_z`; `None` means `1/|V|²`.
    pub h_z: Option<f64>,
    /// SSH corner potential `μ`; `None` means `1/L²`.
    pub mu: Option<f64>,
    /// SSH hopping scale `v + w`.
    pub hopping_sum: f64,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self { j: -1.0, h_z: None, mu: None, hopping_sum: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Chain { l: usize },
    Grid { lx: usize, ly: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub n_sites: usize,
    pub local_dim: usize,
    pub geometry: Geometry,
}

impl Lattice {
    /// Nearest-neighbour edges of the open lattice as 1-based `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self.geometry {
            Geometry::Chain { l } => (1..l).map(|i| (i, i + 1)).collect(),
            Geometry::Grid { lx, ly } => {
                let mut out = Vec::new();
                for y in 0..ly {
                    for x in 0..lx {
                        let s = y * lx + x + 1;
                        if x + 1 < lx {
                            out.push((s, s + 1));
                        }
                        if y + 1 < ly {
                            out.push((s, s + lx));
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    PauliZ,
    PauliX,
    /// `Z_i Z_j`.
    PauliZz,
    /// `S_i · S_j` for spin 1.
    SpinExchange,
    /// `(S_i · S_j)²` for spin 1.
    SpinExchangeSquared,
    /// `c_i† c_j + c_j† c_i`.
    Hopping,
    /// `n_i`.
    Number,
}

/// A weighted local operator on one or two sites.
#[derive(Debug, Clone)]
pub struct SiteOperator {
    pub kind: OperatorKind,
    /// 1-based site indices, length 1 or 2.
    pub support: Vec<usize>,
    /// Real prefactor already folded into `matrix`.
    pub weight: f64,
    /// Dense `d^|support| × d^|support|` matrix.
    pub matrix: CMatrix,
}

impl SiteOperator {
    pub fn new(kind: OperatorKind, support: Vec<usize>, weight: f64) -> Self {
        let base = match kind {
            OperatorKind::PauliZ => pauli_z(),
            OperatorKind::PauliX => pauli_x(),
            OperatorKind::PauliZz => pauli_z().kronecker(&pauli_z()),
            OperatorKind::SpinExchange => spin_exchange(),
            OperatorKind::SpinExchangeSquared => {
                let s = spin_exchange();
                &s * &s
            }
            OperatorKind::Hopping => hopping_matrix(),
            OperatorKind::Number => number_matrix(),
        };
        let matrix = base * Complex64::new(weight, 0.0);
        Self { kind, support, weight, matrix }
    }

    pub fn is_diagonal(&self) -> bool {
        let m = &self.matrix;
        (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)].norm() == 0.0))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint()).iter().all(|z| z.norm() <= tol)
    }
}

/// A group of mutually commuting local terms.
#[derive(Debug, Clone)]
pub struct SubHamiltonian {
    pub label: String,
    pub terms: Vec<SiteOperator>,
}

impl SubHamiltonian {
    pub fn new(label: impl Into<String>, terms: Vec<SiteOperator>) -> Self {
        Self { label: label.into(), terms }
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(SiteOperator::is_diagonal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialStateRecipe {
    /// Computational product state `|1…1⟩`.
    AllDown,
    /// Open-boundary AKLT state with two variational edge spins.
    Aklt,
    /// Slater determinant of the intra-cell (trivial) limit.
    TrivialSlater,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub statevector_cap: usize,
    pub constants: ModelConstants,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { statevector_cap: DEFAULT_STATEVECTOR_CAP, constants: ModelConstants::default() }
    }
}

/// An immutable model: lattice, splitting, coefficient map and initial state.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub spec: ModelSpec,
    pub lattice: Lattice,
    pub subs: Vec<SubHamiltonian>,
    pub constants: ModelConstants,
    pub initial_state: InitialStateRecipe,
}

impl ModelInstance {
    pub fn build(spec: ModelSpec) -> Result<Self> {
        build_model(spec, &BuildOptions::default())
    }

    pub fn k(&self) -> usize {
        self.subs.len()
    }

    /// Number of variational parameters at depth `p`.
    pub fn n_params(&self, p: usize) -> usize {
        p * self.k() + self.n_boundary()
    }

    /// Extra state-preparation parameters appended after the layer angles.
    pub fn n_boundary(&self) -> usize {
        match self.initial_state {
            InitialStateRecipe::Aklt => 4,
            _ => 0,
        }
    }

    pub fn is_fermionic(&self) -> bool {
        matches!(self.spec, ModelSpec::Ssh2d { .. })
    }

    /// `h_z` actually in use.
    pub fn h_z(&self) -> f64 {
        self.constants.h_z.unwrap_or_else(|| 1.0 / (self.lattice.n_sites as f64).powi(2))
    }

    /// `μ` actually in use.
    pub fn mu(&self) -> f64 {
        self.constants.mu.unwrap_or_else(|| 1.0 / (self.lattice.n_sites as f64))
    }

    /// Particle number for fermionic models (half filling).
    pub fn n_particles(&self) -> usize {
        self.lattice.n_sites / 2
    }

    /// Site indices of the four corners `1, L, L²−L+1, L²` for grid models.
    pub fn corners(&self) -> Option<[usize; 4]> {
        match self.lattice.geometry {
            Geometry::Grid { lx, ly } => Some([1, lx, lx * (ly - 1) + 1, lx * ly]),
            Geometry::Chain { .. } => None,
        }
    }

    /// `c_i(g)` in sub-Hamiltonian order.
    pub fn coefficients(&self, g: &HamiltonianParams) -> Result<Vec<f64>> {
        match (self.spec, *g) {
            (ModelSpec::Tfim1d { .. }, HamiltonianParams::Tfim { h_x }) => {
                let j = self.constants.j;
                Ok(vec![j, j, h_x, self.h_z()])
            }
            (ModelSpec::Tfim2d { .. }, HamiltonianParams::Tfim { h_x }) => {
                let j = self.constants.j;
                Ok(vec![j, j, j, j, h_x, self.h_z()])
            }
            (ModelSpec::Bbc { .. }, HamiltonianParams::Bbc { phi }) => {
                let (s, c) = phi.sin_cos();
                Ok(vec![c, c, s, s])
            }
            (ModelSpec::Ssh2d { .. }, HamiltonianParams::Ssh { r }) => {
                let (v, w) = self.hoppings(r);
                Ok(vec![-v, -v, -w, -w, self.mu()])
            }
            _ => Err(Error::ParamMismatch(self.spec.name().into())),
        }
    }

    /// Intra-cell `v` and inter-cell `w` hopping for the ratio `r = v/w`.
    pub fn hoppings(&self, r: f64) -> (f64, f64) {
        let s = self.constants.hopping_sum;
        (s * r / (1.0 + r), s / (1.0 + r))
    }

    pub fn check_params(&self, g: &HamiltonianParams) -> Result<()> {
        g.validate()?;
        self.coefficients(g).map(|_| ())
    }

    /// All interaction edges named by the splitting, in group order.
    pub fn interaction_edges(&self) -> Vec<(usize, usize)> {
        self.subs
            .iter()
            .flat_map(|s| s.terms.iter())
            .filter(|t| t.support.len() == 2 && t.kind != OperatorKind::SpinExchangeSquared)
            .map(|t| (t.support[0].min(t.support[1]), t.support[0].max(t.support[1])))
            .collect()
    }

    pub fn validate_splitting(&self) -> SplittingReport {
        validate_groups(&self.subs, self.lattice.local_dim)
    }
}

/// Construct a model with its fixed splitting and coefficient map.
pub fn build_model(spec: ModelSpec, opts: &BuildOptions) -> Result<ModelInstance> {
    let (lattice, subs, initial_state) = match spec {
        ModelSpec::Tfim1d { l } => {
            require(l >= 2, "chain length must be at least 2")?;
            let lattice = Lattice { n_sites: l, local_dim: 2, geometry: Geometry::Chain { l } };
            let odd = chain_bonds(l, 1, OperatorKind::PauliZz);
            let even = chain_bonds(l, 2, OperatorKind::PauliZz);
            let subs = vec![
                SubHamiltonian::new("odd ZZ edges", odd),
                SubHamiltonian::new("even ZZ edges", even),
                field(l, OperatorKind::PauliX, "transverse field"),
                field(l, OperatorKind::PauliZ, "bias field"),
            ];
            (lattice, subs, InitialStateRecipe::AllDown)
        }
        ModelSpec::Tfim2d { lx, ly } => {
            require(lx >= 2 && ly >= 2, "grid sides must be at least 2")?;
            let n = lx * ly;
            let lattice = Lattice { n_sites: n, local_dim: 2, geometry: Geometry::Grid { lx, ly } };
            let [h0, h1, v0, v1] = grid_colouring(lx, ly);
            let zz = |edges: Vec<(usize, usize)>| {
                edges.into_iter().map(|(a, b)| SiteOperator::new(OperatorKind::PauliZz, vec![a, b], 1.0)).collect()
            };
            let subs = vec![
                SubHamiltonian::new("horizontal ZZ, even columns", zz(h0)),
                SubHamiltonian::new("horizontal ZZ, odd columns", zz(h1)),
                SubHamiltonian::new("vertical ZZ, even rows", zz(v0)),
                SubHamiltonian::new("vertical ZZ, odd rows", zz(v1)),
                field(n, OperatorKind::PauliX, "transverse field"),
                field(n, OperatorKind::PauliZ, "bias field"),
            ];
            (lattice, subs, InitialStateRecipe::AllDown)
        }
        ModelSpec::Bbc { l } => {
            require(l >= 2, "chain length must be at least 2")?;
            let lattice = Lattice { n_sites: l, local_dim: 3, geometry: Geometry::Chain { l } };
            let subs = vec![
                SubHamiltonian::new("linear, odd edges", chain_bonds(l, 1, OperatorKind::SpinExchange)),
                SubHamiltonian::new("linear, even edges", chain_bonds(l, 2, OperatorKind::SpinExchange)),
                SubHamiltonian::new("quadratic, odd edges", chain_bonds(l, 1, OperatorKind::SpinExchangeSquared)),
                SubHamiltonian::new("quadratic, even edges", chain_bonds(l, 2, OperatorKind::SpinExchangeSquared)),
            ];
            (lattice, subs, InitialStateRecipe::Aklt)
        }
        ModelSpec::Ssh2d { l } => {
            require(l >= 2, "grid side must be at least 2")?;
            if l % 2 != 0 {
                return Err(Error::InvalidLattice(format!("SSH side L = {l} must be even (whole 2x2 cells)")));
            }
            let n = l * l;
            let lattice = Lattice { n_sites: n, local_dim: 2, geometry: Geometry::Grid { lx: l, ly: l } };
            // Even columns/rows start a unit cell, so those edges are intra-cell.
            let [h_intra, h_inter, v_intra, v_inter] = grid_colouring(l, l);
            let hop = |edges: Vec<(usize, usize)>| {
                edges.into_iter().map(|(a, b)| SiteOperator::new(OperatorKind::Hopping, vec![a, b], 1.0)).collect()
            };
            let potential = vec![
                SiteOperator::new(OperatorKind::Number, vec![l], 1.0),
                SiteOperator::new(OperatorKind::Number, vec![n - l + 1], 1.0),
                SiteOperator::new(OperatorKind::Number, vec![1], -1.0),
                SiteOperator::new(OperatorKind::Number, vec![n], -1.0),
            ];
            let subs = vec![
                SubHamiltonian::new("intra-cell horizontal hopping", hop(h_intra)),
                SubHamiltonian::new("intra-cell vertical hopping", hop(v_intra)),
                SubHamiltonian::new("inter-cell horizontal hopping", hop(h_inter)),
                SubHamiltonian::new("inter-cell vertical hopping", hop(v_inter)),
                SubHamiltonian::new("corner potentials", potential),
            ];
            (lattice, subs, InitialStateRecipe::TrivialSlater)
        }
    };

    if !matches!(spec, ModelSpec::Ssh2d { .. }) {
        let amps = (lattice.local_dim as u128).checked_pow(lattice.n_sites as u32).unwrap_or(u128::MAX);
        if amps > opts.statevector_cap as u128 {
            return Err(Error::StateTooLarge { amplitudes: amps, cap: opts.statevector_cap });
        }
    }

    Ok(ModelInstance { spec, lattice, subs, constants: opts.constants, initial_state })
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidLattice(msg.into()))
    }
}

/// Bonds `(i, i+1)` of a chain with `i ≡ start (mod 2)`, 1-based.
fn chain_bonds(l: usize, start: usize, kind: OperatorKind) -> Vec<SiteOperator> {
    (start..l).step_by(2).map(|i| SiteOperator::new(kind, vec![i, i + 1], 1.0)).collect()
}

fn field(n: usize, kind: OperatorKind, label: &str) -> SubHamiltonian {
    SubHamiltonian::new(label, (1..=n).map(|i| SiteOperator::new(kind, vec![i], 1.0)).collect())
}

/// Proper 4-colouring of the open grid: horizontal edges by column parity of
/// their left end, vertical edges by row parity of their upper end.
/// Returned as `[horizontal even, horizontal odd, vertical even, vertical odd]`.
fn grid_colouring(lx: usize, ly: usize) -> [Vec<(usize, usize)>; 4] {
    let mut out: [Vec<(usize, usize)>; 4] = Default::default();
    for y in 0..ly {
        for x in 0..lx {
            let s = y * lx + x + 1;
            if x + 1 < lx {
                out[x % 2].push((s, s + 1));
            }
            if y + 1 < ly {
                out[2 + y % 2].push((s, s + lx));
            }
        }
    }
    out
}

/// Outcome of [`validate_groups`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingReport {
    pub ok: bool,
    /// `(group label, term index, term index)` of the first non-commuting pair.
    pub violation: Option<(String, usize, usize)>,
}

/// Check that every pair of terms inside each group commutes, using explicit
/// commutators on the joined support.
pub fn validate_groups(groups: &[SubHamiltonian], local_dim: usize) -> SplittingReport {
    for g in groups {
        for a in 0..g.terms.len() {
            for b in (a + 1)..g.terms.len() {
                if !terms_commute(&g.terms[a], &g.terms[b], local_dim) {
                    return SplittingReport { ok: false, violation: Some((g.label.clone(), a, b)) };
                }
            }
        }
    }
    SplittingReport { ok: true, violation: None }
}

fn terms_commute(a: &SiteOperator, b: &SiteOperator, d: usize) -> bool {
    if a.support.iter().all(|s| !b.support.contains(s)) {
        return true;
    }
    let mut joined: Vec<usize> = a.support.iter().chain(b.support.iter()).copied().collect();
    joined.sort_unstable();
    joined.dedup();
    let ea = embed(&a.matrix, &a.support, &joined, d);
    let eb = embed(&b.matrix, &b.support, &joined, d);
    let comm = &ea * &eb - &eb * &ea;
    comm.iter().all(|z| z.norm() < 1e-12)
}

/// Embed a local matrix acting on `support` into the space of `sites`
/// (a superset, sorted), with the first listed site most significant.
pub fn embed(m: &CMatrix, support: &[usize], sites: &[usize], d: usize) -> CMatrix {
    let n = sites.len();
    let dim = d.pow(n as u32);
    let pos: Vec<usize> = support.iter().map(|s| sites.iter().position(|t| t == s).expect("support ⊆ sites")).collect();
    let digit = |idx: usize, p: usize| (idx / d.pow((n - 1 - p) as u32)) % d;
    let mut out = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            // Identity on the complement of the support.
            if (0..n).filter(|p| !pos.contains(p)).any(|p| digit(r, p) != digit(c, p)) {
                continue;
            }
            let lr = pos.iter().fold(0, |acc, &p| acc * d + digit(r, p));
            let lc = pos.iter().fold(0, |acc, &p| acc * d + digit(c, p));
            out[(r, c)] = m[(lr, lc)];
        }
    }
    out
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

/// Spin-1 `(S^x, S^y, S^z)` in the `S^z`-diagonal basis `m = +1, 0, −1`.
pub fn spin1_matrices() -> [CMatrix; 3] {
    let s = 1.0 / SQRT_2;
    let i = Complex64::i();
    let z = c(0.0);
    let sx = CMatrix::from_row_slice(3, 3, &[z, c(s), z, c(s), z, c(s), z, c(s), z]);
    let sy = CMatrix::from_row_slice(3, 3, &[z, -i * s, z, i * s, z, -i * s, z, i * s, z]);
    let sz = CMatrix::from_row_slice(3, 3, &[c(1.0), z, z, z, z, z, z, z, c(-1.0)]);
    [sx, sy, sz]
}

/// `S_1 · S_2` on two spin-1 sites (9×9).
pub fn spin_exchange() -> CMatrix {
    let s = spin1_matrices();
    s.iter().map(|m| m.kronecker(m)).fold(CMatrix::zeros(9, 9), |acc, m| acc + m)
}

/// `c_a† c_b + c_b† c_a` on two modes in the local basis `|n_a n_b⟩`.
fn hopping_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(1, 2)] = c(1.0);
    m[(2, 1)] = c(1.0);
    m
}

fn number_matrix() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn tfim_1d_constants() {
        let m = ModelInstance::build(ModelSpec::Tfim1d { l: 4 }).unwrap();
        assert_eq!(m.k(), 4);
        assert_eq!(m.h_z(), 1.0 / 16.0);
        let c = m.coefficients(&HamiltonianParams::Tfim { h_x: 1.0 }).unwrap();
        assert_eq!(c, vec![-1.0, -1.0, 1.0, 0.0625]);
    }

    #[test]
    fn bbc_three_sites_groups() {
        let m = ModelInstance::build(ModelSpec::Bbc { l: 3 }).unwrap();
        assert_eq!(m.k(), 4);
        let sup = |g: usize| m.subs[g].terms.iter().map(|t| t.support.clone()).collect::<Vec<_>>();
        assert_eq!(sup(0), vec![vec![1, 2]]);
        assert_eq!(sup(1), vec![vec![2, 3]]);
        let c = m.coefficients(&HamiltonianParams::Bbc { phi: 0.0 }).unwrap();
        assert_eq!(c, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn ssh_constants_and_symmetric_point() {
        let m = ModelInstance::build(ModelSpec::Ssh2d { l: 4 }).unwrap();
        assert_eq!(m.k(), 5);
        assert_eq!(m.mu(), 1.0 / 16.0);
        assert_eq!(m.n_particles(), 8);
        let c = m.coefficients(&HamiltonianParams::Ssh { r: 1.0 }).unwrap();
        assert_eq!(c, vec![-1.0, -1.0, -1.0, -1.0, 1.0 / 16.0]);
        assert_eq!(m.corners(), Some([1, 4, 13, 16]));
    }

    #[test]
    fn rejects_bad_lattices() {
        assert!(matches!(ModelInstance::build(ModelSpec::Ssh2d { l: 3 }), Err(Error::InvalidLattice(_))));
        assert!(matches!(ModelInstance::build(ModelSpec::Tfim1d { l: 1 }), Err(Error::InvalidLattice(_))));
        assert!(matches!(ModelInstance::build(ModelSpec::Tfim1d { l: 21 }), Err(Error::StateTooLarge { .. })));
        assert!(matches!(ModelInstance::build(ModelSpec::Bbc { l: 13 }), Err(Error::StateTooLarge { .. })));
        // SSH routes to the Gaussian backend, so no cap applies.
        assert!(ModelInstance::build(ModelSpec::Ssh2d { l: 10 }).is_ok());
    }

    #[test]
    fn param_mismatch_and_range() {
        let m = ModelInstance::build(ModelSpec::Bbc { l: 3 }).unwrap();
        assert!(matches!(m.coefficients(&HamiltonianParams::Tfim { h_x: 1.0 }), Err(Error::ParamMismatch(_))));
        assert!(HamiltonianParams::Bbc { phi: std::f64::consts::PI }.validate().is_err());
        assert!(HamiltonianParams::Ssh { r: 0.0 }.validate().is_err());
        assert!(HamiltonianParams::Tfim { h_x: -0.1 }.validate().is_err());
    }

    #[test]
    fn built_in_splittings_commute() {
        for spec in [
            ModelSpec::Tfim1d { l: 5 },
            ModelSpec::Tfim2d { lx: 3, ly: 3 },
            ModelSpec::Bbc { l: 5 },
            ModelSpec::Ssh2d { l: 4 },
        ] {
            let m = ModelInstance::build(spec).unwrap();
            let rep = m.validate_splitting();
            assert!(rep.ok, "{spec}: {:?}", rep.violation);
        }
    }

    #[test]
    fn synthetic_x_z_group_fails() {
        let g = SubHamiltonian::new(
            "bad",
            vec![SiteOperator::new(OperatorKind::PauliX, vec![1], 1.0), SiteOperator::new(OperatorKind::PauliZ, vec![1], 1.0)],
        );
        let rep = validate_groups(&[g], 2);
        assert!(!rep.ok);
        assert_eq!(rep.violation, Some(("bad".to_string(), 0, 1)));
    }

    #[test]
    fn edge_partition_is_exact() {
        for spec in [
            ModelSpec::Tfim1d { l: 7 },
            ModelSpec::Tfim2d { lx: 5, ly: 4 },
            ModelSpec::Bbc { l: 6 },
            ModelSpec::Ssh2d { l: 6 },
        ] {
            let m = ModelInstance::build(spec).unwrap();
            let listed = m.interaction_edges();
            let set: BTreeSet<_> = listed.iter().copied().collect();
            assert_eq!(set.len(), listed.len(), "{spec}: duplicate edges");
            let lattice: BTreeSet<_> = m.lattice.edges().into_iter().collect();
            assert_eq!(set, lattice, "{spec}");
        }
    }

    #[test]
    fn local_matrices_are_hermitian() {
        for kind in [
            OperatorKind::PauliZ,
            OperatorKind::PauliX,
            OperatorKind::PauliZz,
            OperatorKind::SpinExchange,
            OperatorKind::SpinExchangeSquared,
            OperatorKind::Hopping,
            OperatorKind::Number,
        ] {
            let n = match kind {
                OperatorKind::PauliZ | OperatorKind::PauliX | OperatorKind::Number => 1,
                _ => 2,
            };
            let op = SiteOperator::new(kind, (1..=n).collect(), 0.7);
            assert!(op.is_hermitian(1e-14), "{kind:?}");
        }
    }

    #[test]
    fn spin_exchange_spectrum() {
        // S·S = [S(S+1) − 4]/2 for total spin S ∈ {0, 1, 2}: −2 once, −1 thrice, +1 five times.
        let m = spin_exchange().map(|z| z.re);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-2.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
