//! Fermionic-linear-optics simulation of the 2D SSH model.
//!
//! A pure fermionic Gaussian state on `N` modes is stored as its real
//! antisymmetric Majorana covariance `M_jk = (i/2)⟨[γ_j, γ_k]⟩`.
//!
//! Sign conventions (0-based mode `i`):
//!
//! | symbol                | definition                                  |
//! |-----------------------|---------------------------------------------|
//! | `γ_{2i}`              | `c_i + c_i†`                                |
//! | `γ_{2i+1}`            | `−i (c_i − c_i†)`                           |
//! | `n_i`                 | `(1 + M_{2i,2i+1}) / 2`                     |
//! | quadratic form `h`    | `H = (i/4) Σ h_jk γ_j γ_k + offset`         |
//! | hopping `t(c_i†c_j + h.c.)` | `h_{2i,2j+1} = h_{2j,2i+1} = t`       |
//! | potential `ε n_i`     | `h_{2i,2i+1} = ε`, offset `ε/2`             |
//! | gate `e^{iθH}`        | `M ← R M Rᵀ`, `R = exp(−θ h)`              |
//! | `e^{iπ Σ_{c∈S} n_c}`  | `(−1)^{|S|} Pf(M restricted to S's Majoranas)` |

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{pfaffian, principal_submatrix};
use crate::model::{Geometry, HamiltonianParams, ModelInstance, OperatorKind, SubHamiltonian};

/// Real antisymmetric covariance of a pure Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaCovariance {
    pub m: DMatrix<f64>,
    pub n_modes: usize,
}

impl MajoranaCovariance {
    /// Fock vacuum (all modes empty).
    pub fn vacuum(n_modes: usize) -> Self {
        let mut m = DMatrix::zeros(2 * n_modes, 2 * n_modes);
        for i in 0..n_modes {
            m[(2 * i, 2 * i + 1)] = -1.0;
            m[(2 * i + 1, 2 * i)] = 1.0;
        }
        Self { m, n_modes }
    }

    /// Slater determinant of the real orthonormal orbitals in the columns of `orbitals`.
    pub fn slater(orbitals: &DMatrix<f64>) -> Self {
        let n = orbitals.nrows();
        let corr = orbitals * orbitals.transpose();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let v = 2.0 * corr[(i, j)] - if i == j { 1.0 } else { 0.0 };
                m[(2 * i, 2 * j + 1)] = v;
                m[(2 * j + 1, 2 * i)] = -v;
            }
        }
        Self { m, n_modes: n }
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        (&self.m + self.m.transpose()).amax()
    }

    /// `max |M Mᵀ − I|`.
    pub fn purity_defect(&self) -> f64 {
        let n = 2 * self.n_modes;
        (&self.m * self.m.transpose() - DMatrix::<f64>::identity(n, n)).amax()
    }

    fn check_pure(&self) -> Result<()> {
        let d = self.purity_defect();
        if d > 1e-6 {
            Err(Error::NotPure(d))
        } else {
            Ok(())
        }
    }

    /// `⟨n_site⟩` for a 1-based site.
    pub fn occupation(&self, site: usize) -> Result<f64> {
        if site == 0 || site > self.n_modes {
            return Err(Error::InvalidSite(site));
        }
        let i = site - 1;
        Ok((1.0 + self.m[(2 * i, 2 * i + 1)]) / 2.0)
    }

    pub fn total_particles(&self) -> f64 {
        (0..self.n_modes).map(|i| (1.0 + self.m[(2 * i, 2 * i + 1)]) / 2.0).sum()
    }

    /// `⟨e^{iπ Σ n_s}⟩` over the given 1-based sites.
    pub fn parity(&self, sites: &[usize]) -> Result<f64> {
        let mut idx = Vec::with_capacity(2 * sites.len());
        for &s in sites {
            if s == 0 || s > self.n_modes {
                return Err(Error::InvalidSite(s));
            }
            idx.push(2 * (s - 1));
            idx.push(2 * (s - 1) + 1);
        }
        let sign = if sites.len() % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * pfaffian(&principal_submatrix(&self.m, &idx)))
    }

    /// Apply `M ← R M Rᵀ`.
    pub fn rotate(&mut self, r: &Rotation) {
        match r {
            Rotation::Givens(gs) => {
                for g in gs {
                    g.apply(&mut self.m);
                }
            }
            Rotation::Dense(r) => {
                self.m = r * &self.m * r.transpose();
            }
        }
    }
}

/// One plane of a block-diagonal generator: `h_xy = s`, `h_yx = −s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub x: usize,
    pub y: usize,
    pub s: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Givens {
    x: usize,
    y: usize,
    c: f64,
    sn: f64,
}

impl Givens {
    /// Conjugate rows and columns `x, y` of `m` by this rotation.
    fn apply(&self, m: &mut DMatrix<f64>) {
        let n = m.nrows();
        let (x, y, c, s) = (self.x, self.y, self.c, self.sn);
        for j in 0..n {
            let (mx, my) = (m[(x, j)], m[(y, j)]);
            m[(x, j)] = c * mx - s * my;
            m[(y, j)] = s * mx + c * my;
        }
        for j in 0..n {
            let (mx, my) = (m[(j, x)], m[(j, y)]);
            m[(j, x)] = c * mx - s * my;
            m[(j, y)] = s * mx + c * my;
        }
    }
}

/// An orthogonal Majorana rotation.
#[derive(Debug, Clone)]
pub enum Rotation {
    /// Product of rotations on disjoint planes.
    Givens(Vec<Givens>),
    Dense(DMatrix<f64>),
}

impl Rotation {
    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            Rotation::Dense(r) => r.clone(),
            Rotation::Givens(gs) => {
                let mut r = DMatrix::identity(dim, dim);
                for g in gs {
                    r[(g.x, g.x)] = g.c;
                    r[(g.x, g.y)] = -g.sn;
                    r[(g.y, g.x)] = g.sn;
                    r[(g.y, g.y)] = g.c;
                }
                r
            }
        }
    }
}

/// A quadratic Hamiltonian `(i/4) Σ h_jk γ_j γ_k + offset`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub h: DMatrix<f64>,
    pub offset: f64,
    /// Disjoint planes spanning `h`, when it decomposes that way.
    planes: Option<Vec<Plane>>,
    /// Eigen-decomposition of `i·h`, computed for forms without planes.
    eig: Option<(DVector<f64>, DMatrix<Complex64>)>,
}

impl QuadraticForm {
    /// Build from a single-particle matrix entries list `(i, j, A_ij)` with
    /// 0-based modes; `(i, i, ε)` is an on-site term, `(i, j, t)` with `i ≠ j`
    /// stands for `t (c_i† c_j + c_j† c_i)`.
    pub fn from_terms(n_modes: usize, terms: &[(usize, usize, f64)]) -> Self {
        let mut planes = Vec::new();
        let mut offset = 0.0;
        for &(i, j, t) in terms {
            if i == j {
                planes.push(Plane { x: 2 * i, y: 2 * i + 1, s: t });
                offset += t / 2.0;
            } else {
                planes.push(Plane { x: 2 * i, y: 2 * j + 1, s: t });
                planes.push(Plane { x: 2 * j, y: 2 * i + 1, s: t });
            }
        }
        let mut h = DMatrix::zeros(2 * n_modes, 2 * n_modes);
        for p in &planes {
            h[(p.x, p.y)] += p.s;
            h[(p.y, p.x)] -= p.s;
        }
        let mut used = vec![false; 2 * n_modes];
        let disjoint = planes.iter().all(|p| {
            let ok = !used[p.x] && !used[p.y];
            used[p.x] = true;
            used[p.y] = true;
            ok
        });
        let mut form = Self { h, offset, planes: disjoint.then_some(planes), eig: None };
        if form.planes.is_none() {
            form.eig = Some(hermitian_eig(&form.h));
        }
        form
    }

    /// Dense form without plane structure.
    pub fn from_dense(h: DMatrix<f64>, offset: f64) -> Self {
        let eig = Some(hermitian_eig(&h));
        Self { h, offset, planes: None, eig }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn has_planes(&self) -> bool {
        self.planes.is_some()
    }

    /// `Σ_i c_i h_i` (dense, no plane structure).
    pub fn combine(forms: &[QuadraticForm], coeffs: &[f64]) -> Self {
        let dim = forms[0].dim();
        let mut h = DMatrix::zeros(dim, dim);
        let mut offset = 0.0;
        for (f, &c) in forms.iter().zip(coeffs) {
            h += &f.h * c;
            offset += c * f.offset;
        }
        Self { h, offset, planes: None, eig: None }
    }

    /// `R = exp(−θ h)`, the Majorana rotation implementing `e^{iθH}`.
    pub fn rotation(&self, theta: f64) -> Rotation {
        if let Some(planes) = &self.planes {
            return Rotation::Givens(
                planes
                    .iter()
                    .map(|p| {
                        let (sn, c) = (theta * p.s).sin_cos();
                        Givens { x: p.x, y: p.y, c, sn }
                    })
                    .collect(),
            );
        }
        let (vals, vecs) = match &self.eig {
            Some((v, u)) => (v.clone(), u.clone()),
            None => hermitian_eig(&self.h),
        };
        // i·h = U D U†  ⇒  −θh = iθ U D U†.
        let n = vals.len();
        let phases = DMatrix::<Complex64>::from_fn(n, n, |r, c| if r == c { Complex64::from_polar(1.0, theta * vals[r]) } else { Complex64::new(0.0, 0.0) });
        let r = &vecs * phases * vecs.adjoint();
        Rotation::Dense(r.map(|z| z.re))
    }

    /// `(1/4) Σ h_jk M_jk + offset`.
    pub fn energy(&self, state: &MajoranaCovariance) -> f64 {
        0.25 * self.h.component_mul(&state.m).sum() + self.offset
    }

    /// `⟨Λ, [M, h]⟩_F`.
    fn commutator_pairing(&self, lam: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
        match &self.planes {
            Some(planes) => {
                let n = m.nrows();
                let mut total = 0.0;
                for p in planes {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += lam[(p.y, j)] * m[(p.x, j)] - lam[(p.x, j)] * m[(p.y, j)];
                    }
                    total += 2.0 * p.s * acc;
                }
                total
            }
            None => {
                let comm = m * &self.h - &self.h * m;
                lam.component_mul(&comm).sum()
            }
        }
    }
}

fn hermitian_eig(h: &DMatrix<f64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let ih = h.map(|x| Complex64::new(0.0, x));
    let eig = ih.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// `M ← exp(−θh) M exp(−θh)ᵀ`.
pub fn evolve_layer(state: &MajoranaCovariance, h: &QuadraticForm, theta: f64) -> MajoranaCovariance {
    let mut out = state.clone();
    out.rotate(&h.rotation(theta));
    out
}

/// Single-particle matrix `A` of a fermionic sub-Hamiltonian as `(i, j, A_ij)` entries (0-based).
fn single_particle_terms(sub: &SubHamiltonian) -> Vec<(usize, usize, f64)> {
    sub.terms
        .iter()
        .map(|t| match t.kind {
            OperatorKind::Hopping => (t.support[0] - 1, t.support[1] - 1, t.weight),
            OperatorKind::Number => (t.support[0] - 1, t.support[0] - 1, t.weight),
            other => panic!("non-fermionic operator {other:?} in a fermionic model"),
        })
        .collect()
}

/// Dense single-particle matrix of a sub-Hamiltonian.
pub fn single_particle_matrix(sub: &SubHamiltonian, n_modes: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n_modes, n_modes);
    for (i, j, t) in single_particle_terms(sub) {
        a[(i, j)] += t;
        if i != j {
            a[(j, i)] += t;
        }
    }
    a
}

/// Quadratic forms for every sub-Hamiltonian plus the combined form at `g`.
pub fn quadratic_forms(model: &ModelInstance, g: &HamiltonianParams) -> Result<(Vec<QuadraticForm>, QuadraticForm)> {
    let sim = FloSimulator::new(model)?;
    let coeffs = model.coefficients(g)?;
    let combined = QuadraticForm::combine(&sim.forms, &coeffs);
    Ok((sim.forms, combined))
}

/// Precompiled Gaussian-state circuit for the SSH model.
#[derive(Debug, Clone)]
pub struct FloSimulator {
    pub n_modes: usize,
    pub n_particles: usize,
    pub forms: Vec<QuadraticForm>,
    side: usize,
    /// Single-particle matrices of the sub-Hamiltonians.
    sp: Vec<DMatrix<f64>>,
}

/// Modes within this distance of the Fermi level count as degenerate.
pub const FERMI_TOL: f64 = 1e-9;

impl FloSimulator {
    pub fn new(model: &ModelInstance) -> Result<Self> {
        let side = match (model.is_fermionic(), model.lattice.geometry) {
            (true, Geometry::Grid { lx, .. }) => lx,
            _ => return Err(Error::WrongBackend(model.spec.to_string())),
        };
        let n = model.lattice.n_sites;
        let forms = model.subs.iter().map(|s| QuadraticForm::from_terms(n, &single_particle_terms(s))).collect();
        let sp = model.subs.iter().map(|s| single_particle_matrix(s, n)).collect();
        Ok(Self { n_modes: n, n_particles: model.n_particles(), forms, side, sp })
    }

    pub fn k(&self) -> usize {
        self.forms.len()
    }

    /// Single-particle matrix `Σ_i c_i A_i`.
    pub fn single_particle(&self, coeffs: &[f64]) -> DMatrix<f64> {
        self.sp.iter().zip(coeffs).fold(DMatrix::zeros(self.n_modes, self.n_modes), |acc, (a, &c)| acc + a * c)
    }

    /// Slater determinant filling the lowest modes of the intra-cell plus
    /// corner-potential part. Degenerate shells at the Fermi level (bulk
    /// cells) are resolved by filling each cell's main-diagonal standing wave
    /// `(|top-left⟩ − |bottom-right⟩)/√2` projected into the shell.
    pub fn prepare_trivial(&self, coeffs: &[f64]) -> Result<MajoranaCovariance> {
        Ok(MajoranaCovariance::slater(&self.trivial_orbitals(coeffs)?))
    }

    /// Filled orbitals (columns) of the trivial-limit Slater determinant.
    pub fn trivial_orbitals(&self, coeffs: &[f64]) -> Result<DMatrix<f64>> {
        // Groups 0, 1 are intra-cell hopping, 4 is the corner potential.
        let mut c = vec![0.0; self.k()];
        c[0] = coeffs[0];
        c[1] = coeffs[1];
        c[4] = coeffs[4];
        let a = self.single_particle(&c);
        self.fill_lowest(&a, Some(&self.cell_diagonals()))
    }

    fn cell_diagonals(&self) -> DMatrix<f64> {
        let l = self.side;
        let cells = (l / 2) * (l / 2);
        let mut t = DMatrix::zeros(self.n_modes, cells);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for cy in 0..l / 2 {
            for cx in 0..l / 2 {
                let col = cy * (l / 2) + cx;
                let tl = (2 * cy) * l + 2 * cx;
                let br = (2 * cy + 1) * l + 2 * cx + 1;
                t[(tl, col)] = h;
                t[(br, col)] = -h;
            }
        }
        t
    }

    /// Orthonormal orbitals for the `n_particles` lowest modes of `a`.
    fn fill_lowest(&self, a: &DMatrix<f64>, tie_break: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
        let split = FermiSplit::new(a, self.n_particles);
        if split.needed == 0 || split.shell.is_empty() {
            return Ok(split.orbitals(&split.below));
        }
        let shell = split.vecs.select_columns(&split.shell);
        let gap = split.fermi_gap();
        let Some(t) = tie_break else {
            return Err(Error::DegenerateFermiLevel { gap, tol: FERMI_TOL });
        };
        // Projection of the tie-break vectors into the shell, orthonormalized.
        let proj = &shell * (shell.transpose() * t);
        let svd = proj.svd(true, false);
        let u = svd.u.expect("left singular vectors");
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-8).collect();
        if keep.len() != split.needed {
            return Err(Error::DegenerateFermiLevel { gap, tol: FERMI_TOL });
        }
        let below = split.orbitals(&split.below);
        let mut cols: Vec<DVector<f64>> = below.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(keep.iter().map(|&i| u.column(i).into_owned()));
        Ok(DMatrix::from_columns(&cols))
    }

    pub fn run_circuit(&self, init: &MajoranaCovariance, p: usize, theta: &[f64]) -> Result<MajoranaCovariance> {
        let k = self.k();
        if theta.len() != p * k {
            return Err(Error::Dimension { expected: p * k, got: theta.len() });
        }
        let mut state = init.clone();
        for l in 0..p {
            for i in 0..k {
                let th = theta[l * k + i];
                if th != 0.0 {
                    state.rotate(&self.forms[i].rotation(th));
                }
            }
        }
        Ok(state)
    }

    pub fn sub_expectations(&self, state: &MajoranaCovariance) -> Vec<f64> {
        self.forms.iter().map(|f| f.energy(state)).collect()
    }

    /// Energy and adjoint gradient with respect to the layer angles.
    pub fn energy_and_gradient(&self, coeffs: &[f64], init: &MajoranaCovariance, p: usize, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = self.k();
        let mut m = self.run_circuit(init, p, theta)?.m;
        let combined = QuadraticForm::combine(&self.forms, coeffs);
        let energy = 0.25 * combined.h.component_mul(&m).sum() + combined.offset;
        let mut lam = combined.h;
        let mut grad = vec![0.0; p * k];
        for l in (0..p).rev() {
            for i in (0..k).rev() {
                grad[l * k + i] = 0.25 * self.forms[i].commutator_pairing(&lam, &m);
                let th = theta[l * k + i];
                if th != 0.0 {
                    let inv = self.forms[i].rotation(-th);
                    let mut ms = MajoranaCovariance { m, n_modes: self.n_modes };
                    ms.rotate(&inv);
                    m = ms.m;
                    let mut ls = MajoranaCovariance { m: lam, n_modes: self.n_modes };
                    ls.rotate(&inv);
                    lam = ls.m;
                }
            }
        }
        Ok((energy, grad))
    }
}

/// Spectrum of a single-particle matrix split around the Fermi level.
#[derive(Debug, Clone)]
pub struct FermiSplit {
    pub energies: Vec<f64>,
    pub vecs: DMatrix<f64>,
    /// Modes strictly below the Fermi shell.
    pub below: Vec<usize>,
    /// Modes degenerate with the highest filled level, when that shell is
    /// only partially filled; empty otherwise.
    pub shell: Vec<usize>,
    /// Modes above the Fermi shell.
    pub above: Vec<usize>,
    /// Particles that go into the shell.
    pub needed: usize,
}

impl FermiSplit {
    pub fn new(a: &DMatrix<f64>, n_particles: usize) -> Self {
        let eig = a.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap().then(x.cmp(&y)));
        let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let n = energies.len();
        let scale = energies.iter().fold(1.0f64, |a, e| a.max(e.abs()));
        let tol = FERMI_TOL * scale;
        if n_particles == 0 || n_particles == n {
            return Self { energies, vecs, below: (0..n_particles).collect(), shell: vec![], above: (n_particles..n).collect(), needed: 0 };
        }
        let ef = energies[n_particles - 1];
        let degenerate_across = (energies[n_particles] - ef).abs() <= tol;
        if !degenerate_across {
            return Self { energies, vecs, below: (0..n_particles).collect(), shell: vec![], above: (n_particles..n).collect(), needed: 0 };
        }
        let below: Vec<usize> = (0..n).filter(|&i| energies[i] < ef - tol).collect();
        let shell: Vec<usize> = (0..n).filter(|&i| (energies[i] - ef).abs() <= tol).collect();
        let above: Vec<usize> = (0..n).filter(|&i| energies[i] > ef + tol).collect();
        let needed = n_particles - below.len();
        Self { energies, vecs, below, shell, above, needed }
    }

    pub fn orbitals(&self, idx: &[usize]) -> DMatrix<f64> {
        self.vecs.select_columns(idx)
    }

    /// Gap between the last filled and first empty level in ascending order.
    pub fn fermi_gap(&self) -> f64 {
        let n = self.below.len() + self.needed;
        if n == 0 || n >= self.energies.len() {
            return f64::INFINITY;
        }
        self.energies[n] - self.energies[n - 1]
    }

    /// Ground energy `Σ` of the lowest levels.
    pub fn ground_energy(&self) -> f64 {
        self.energies[..self.below.len() + self.needed].iter().sum()
    }

    /// Number of degenerate many-body ground states, `binom(|shell|, needed)`.
    pub fn degeneracy(&self) -> f64 {
        if self.shell.is_empty() {
            return 1.0;
        }
        let (n, k) = (self.shell.len() as f64, self.needed as f64);
        (0..self.needed).fold(1.0, |acc, i| acc * (n - i as f64) / (k - i as f64))
    }
}

/// Purity-checked `|⟨a|b⟩|² = sqrt|det((M_a + M_b)/2)|`.
pub fn gaussian_fidelity(a: &MajoranaCovariance, b: &MajoranaCovariance) -> Result<f64> {
    a.check_pure()?;
    b.check_pure()?;
    if a.n_modes != b.n_modes {
        return Err(Error::Dimension { expected: a.n_modes, got: b.n_modes });
    }
    let det = ((&a.m + &b.m) * 0.5).determinant();
    Ok(det.abs().sqrt().clamp(0.0, 1.0))
}

/// `⟨Π_{k∈filled} n_k Π_{k∈empty} (1 − n_k)⟩` for real orthonormal modes
/// given as columns of `modes`; `filled` and `empty` index those columns.
pub fn mode_projector_expectation(state: &MajoranaCovariance, modes: &DMatrix<f64>, filled: &[usize], empty: &[usize]) -> f64 {
    let sel: Vec<(usize, f64)> = filled.iter().map(|&k| (k, 1.0)).chain(empty.iter().map(|&k| (k, -1.0))).collect();
    if sel.is_empty() {
        return 1.0;
    }
    let n = state.n_modes;
    // Majorana rotation into the selected modes: γ'_{2r} = Σ_i U_{i,k} γ_{2i}, same for odd.
    let mut q = DMatrix::zeros(2 * sel.len(), 2 * n);
    for (r, &(k, _)) in sel.iter().enumerate() {
        for i in 0..n {
            q[(2 * r, 2 * i)] = modes[(i, k)];
            q[(2 * r + 1, 2 * i + 1)] = modes[(i, k)];
        }
    }
    let sub = &q * &state.m * q.transpose();
    let mut proj = DMatrix::zeros(2 * sel.len(), 2 * sel.len());
    for (r, &(_, s)) in sel.iter().enumerate() {
        proj[(2 * r, 2 * r + 1)] = s;
        proj[(2 * r + 1, 2 * r)] = -s;
    }
    let dim = 2 * sel.len();
    let x = (DMatrix::<f64>::identity(dim, dim) - &sub * &proj) * 0.5;
    x.determinant().abs().sqrt().clamp(0.0, 1.0)
}

/// Trivial-limit initial state for the SSH model at `g`.
pub fn prepare_trivial_gs(model: &ModelInstance, g: &HamiltonianParams) -> Result<MajoranaCovariance> {
    let sim = FloSimulator::new(model)?;
    sim.prepare_trivial(&model.coefficients(g)?)
}

/// Energy and gradient of the HV circuit on the SSH model, starting from the
/// trivial-limit state at the same `g`.
pub fn flo_energy_and_gradient(model: &ModelInstance, g: &HamiltonianParams, p: usize, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let sim = FloSimulator::new(model)?;
    let coeffs = model.coefficients(g)?;
    let init = sim.prepare_trivial(&coeffs)?;
    sim.energy_and_gradient(&coeffs, &init, p, theta)
}
