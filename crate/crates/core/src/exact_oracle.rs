//! Exact ground spaces: Lanczos with deflation for spin models, single-particle
//! mode filling for the SSH model.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flo_sim::{mode_projector_expectation, FermiSplit, FloSimulator, MajoranaCovariance};
use crate::model::{HamiltonianParams, ModelInstance};
use crate::qudit_sim::{inner, QuditSimulator, StateVector};

type C = Complex64;

#[derive(Debug, Clone)]
pub struct ExactOptions {
    /// Absolute energy window defining the degenerate manifold.
    pub degeneracy_tol: f64,
    /// Eigenpairs requested on the first pass; doubled until a gap shows up.
    pub initial_nev: usize,
    pub max_nev: usize,
    /// Largest Krylov dimension per Lanczos restart.
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { degeneracy_tol: 1e-8, initial_nev: 6, max_nev: 512, max_krylov: 150, max_restarts: 60, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub enum GroundStates {
    /// Orthonormal eigenvectors spanning the ground manifold.
    Spin(Vec<StateVector>),
    /// Mode filling of the single-particle matrix.
    Fermionic(FermiSplit),
}

#[derive(Debug, Clone)]
pub struct GroundSpace {
    pub energy: f64,
    pub degeneracy: usize,
    /// Distance from the ground manifold to the next level (infinite if none was resolved).
    pub gap: f64,
    pub states: GroundStates,
}

impl GroundSpace {
    /// Mean of `f` over an orthonormal ground basis (the maximally mixed ground
    /// state for linear observables).
    pub fn spin_average(&self, f: impl Fn(&StateVector) -> f64) -> Option<f64> {
        match &self.states {
            GroundStates::Spin(v) => Some(v.iter().map(&f).sum::<f64>() / v.len() as f64),
            GroundStates::Fermionic(_) => None,
        }
    }

    /// One Slater determinant from the ground manifold: all modes below the
    /// Fermi shell plus the lowest-index shell modes.
    pub fn representative_gaussian(&self) -> Option<MajoranaCovariance> {
        match &self.states {
            GroundStates::Fermionic(split) => {
                let mut idx = split.below.clone();
                idx.extend(split.shell.iter().take(split.needed));
                Some(MajoranaCovariance::slater(&split.orbitals(&idx)))
            }
            GroundStates::Spin(_) => None,
        }
    }
}

/// Lowest eigenpairs of a Hermitian operator given by `apply`, found one at a
/// time by restarted Lanczos deflated against the vectors found so far.
pub struct Lanczos<'a> {
    apply: Box<dyn Fn(&[C]) -> Vec<C> + Sync + 'a>,
    dim: usize,
    opts: ExactOptions,
    rng: ChaCha8Rng,
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C>>,
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn orthogonalize(w: &mut [C], against: &[Vec<C>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for b in against {
            let ov = inner(b, w);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= ov * y);
        }
    }
}

impl<'a> Lanczos<'a> {
    pub fn new(apply: impl Fn(&[C]) -> Vec<C> + Sync + 'a, dim: usize, opts: ExactOptions) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(opts.seed);
        Self { apply: Box::new(apply), dim, opts, rng, values: Vec::new(), vectors: Vec::new() }
    }

    fn random_start(&mut self) -> Vec<C> {
        (0..self.dim).map(|_| C::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))).collect()
    }

    /// Find eigenpairs until `count` are known (or the space is exhausted).
    pub fn extend_to(&mut self, count: usize) -> Result<()> {
        while self.vectors.len() < count.min(self.dim) {
            let (val, vec) = self.next_pair()?;
            self.values.push(val);
            self.vectors.push(vec);
        }
        Ok(())
    }

    fn next_pair(&mut self) -> Result<(f64, Vec<C>)> {
        let mut start = self.random_start();
        for _ in 0..self.opts.max_restarts {
            let (val, vec, converged) = self.run(start);
            if converged {
                return Ok((val, vec));
            }
            start = vec;
        }
        Err(Error::NoConvergence(format!("Lanczos after {} restarts (eigenpair {})", self.opts.max_restarts, self.vectors.len())))
    }

    /// One Lanczos run with full reorthogonalisation; returns the lowest Ritz
    /// pair. The Rayleigh quotient matrix keeps every reorthogonalisation
    /// coefficient, not just the tridiagonal part.
    fn run(&self, mut start: Vec<C>) -> (f64, Vec<C>, bool) {
        orthogonalize(&mut start, &self.vectors);
        let nrm = norm(&start);
        start.iter_mut().for_each(|a| *a /= nrm);
        let room = self.dim - self.vectors.len();
        let m_max = self.opts.max_krylov.min(room);
        let mut basis = vec![start];
        let mut cols: Vec<Vec<C>> = Vec::new();
        loop {
            let j = basis.len() - 1;
            let mut w = (self.apply)(&basis[j]);
            let mut col = vec![C::new(0.0, 0.0); j + 1];
            // Deflate inside every pass; deflating once up front lets the
            // locked directions creep back in through the recurrence.
            for _ in 0..2 {
                for f in &self.vectors {
                    let ov = inner(f, &w);
                    w.iter_mut().zip(f).for_each(|(x, y)| *x -= ov * y);
                }
                for (i, b) in basis.iter().enumerate() {
                    let ov = inner(b, &w);
                    col[i] += ov;
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= ov * y);
                }
            }
            cols.push(col);
            let beta = norm(&w);
            let m = cols.len();
            let exhausted = beta < 1e-12 || m >= m_max;
            if exhausted || m % 5 == 0 {
                let a = DMatrix::from_fn(m, m, |r, c| if r <= c { cols[c][r] } else { cols[r][c].conj() });
                let eig = a.symmetric_eigen();
                let (imin, &theta) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .expect("non-empty projection");
                let y = eig.eigenvectors.column(imin);
                let residual = beta * y[m - 1].norm();
                let tol = 1e-10 * theta.abs().max(1.0);
                if residual < tol || exhausted {
                    let mut x = vec![C::new(0.0, 0.0); self.dim];
                    for (b, &c) in basis.iter().zip(y.iter()) {
                        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += bi * c);
                    }
                    orthogonalize(&mut x, &self.vectors);
                    let nx = norm(&x);
                    x.iter_mut().for_each(|a| *a /= nx);
                    return (theta, x, residual < tol || beta < 1e-12);
                }
            }
            w.iter_mut().for_each(|a| *a /= beta);
            basis.push(w);
        }
    }
}

/// Exact ground space of `model` at `g`.
pub fn ground_space(model: &ModelInstance, g: &HamiltonianParams, opts: &ExactOptions) -> Result<GroundSpace> {
    let coeffs = model.coefficients(g)?;
    if model.is_fermionic() {
        let sim = FloSimulator::new(model)?;
        let split = FermiSplit::new(&sim.single_particle(&coeffs), model.n_particles());
        let gap = if split.shell.is_empty() {
            split.fermi_gap()
        } else {
            let last = split.shell[split.shell.len() - 1];
            let first = split.shell[0];
            let up = if last + 1 < split.energies.len() { split.energies[last + 1] - split.energies[last] } else { f64::INFINITY };
            let down = if first > 0 { split.energies[first] - split.energies[first - 1] } else { f64::INFINITY };
            up.min(down)
        };
        return Ok(GroundSpace {
            energy: split.ground_energy(),
            degeneracy: split.degeneracy().round() as usize,
            gap,
            states: GroundStates::Fermionic(split),
        });
    }
    let sim = QuditSimulator::new(model)?;
    let dim = sim.dim();
    let mut lz = Lanczos::new(|v: &[C]| sim.apply_hamiltonian(v, &coeffs), dim, opts.clone());
    let mut nev = opts.initial_nev.max(1);
    loop {
        lz.extend_to(nev)?;
        let e0 = lz.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let in_manifold = lz.values.iter().filter(|&&e| e - e0 <= opts.degeneracy_tol).count();
        if in_manifold < lz.values.len() || lz.values.len() == dim {
            return Ok(assemble_spin(model, lz.values, lz.vectors, opts.degeneracy_tol));
        }
        if nev >= opts.max_nev {
            return Err(Error::NoConvergence(format!("ground manifold larger than {nev} states")));
        }
        nev = (2 * nev).min(opts.max_nev);
    }
}

fn assemble_spin(model: &ModelInstance, values: Vec<f64>, vectors: Vec<Vec<C>>, tol: f64) -> GroundSpace {
    let e0 = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut states = Vec::new();
    let mut energy_sum = 0.0;
    let mut above = f64::INFINITY;
    for (e, v) in values.into_iter().zip(vectors) {
        if e - e0 <= tol {
            energy_sum += e;
            states.push(StateVector { amps: v, local_dim: model.lattice.local_dim, n_sites: model.lattice.n_sites });
        } else {
            above = above.min(e);
        }
    }
    let degeneracy = states.len();
    GroundSpace { energy: e0.min(energy_sum / degeneracy as f64), degeneracy, gap: above - e0, states: GroundStates::Spin(states) }
}

/// A state to compare against a ground space.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Spin(&'a StateVector),
    Gaussian(&'a MajoranaCovariance),
}

/// `Σ_k |⟨ψ₀,k|ψ⟩|²` over the ground manifold.
pub fn ground_space_fidelity(state: StateRef<'_>, gs: &GroundSpace) -> Result<f64> {
    match (state, &gs.states) {
        (StateRef::Spin(psi), GroundStates::Spin(basis)) => {
            if let Some(b) = basis.first() {
                if b.dim() != psi.dim() {
                    return Err(Error::Dimension { expected: b.dim(), got: psi.dim() });
                }
            }
            Ok(basis.iter().map(|b| b.fidelity(psi)).sum::<f64>().clamp(0.0, 1.0))
        }
        (StateRef::Gaussian(m), GroundStates::Fermionic(split)) => {
            if m.n_modes != split.energies.len() {
                return Err(Error::Dimension { expected: split.energies.len(), got: m.n_modes });
            }
            Ok(mode_projector_expectation(m, &split.vecs, &split.below, &split.above))
        }
        _ => Err(Error::WrongBackend("state and ground space come from different backends".into())),
    }
}

/// Dense diagonalisation of the full Hamiltonian (small spin systems only).
pub fn dense_spectrum(model: &ModelInstance, g: &HamiltonianParams) -> Result<Vec<f64>> {
    let coeffs = model.coefficients(g)?;
    let h = crate::qudit_sim::dense_hamiltonian(model, &coeffs)?;
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn tfim_two_sites_diagonal() {
        let mut m = ModelInstance::build(ModelSpec::Tfim1d { l: 2 }).unwrap();
        m.constants.h_z = Some(0.25);
        let gs = ground_space(&m, &HamiltonianParams::Tfim { h_x: 0.0 }, &ExactOptions::default()).unwrap();
        assert!((gs.energy + 1.5).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 1);
        let GroundStates::Spin(v) = &gs.states else { panic!() };
        assert!((v[0].fidelity(&StateVector::product(2, &[1, 1])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense_up_to_eight_spins() {
        for (spec, g) in [
            (ModelSpec::Tfim1d { l: 6 }, HamiltonianParams::Tfim { h_x: 0.9 }),
            (ModelSpec::Tfim1d { l: 8 }, HamiltonianParams::Tfim { h_x: 1.3 }),
            (ModelSpec::Tfim2d { lx: 2, ly: 3 }, HamiltonianParams::Tfim { h_x: 2.0 }),
            (ModelSpec::Bbc { l: 4 }, HamiltonianParams::Bbc { phi: -1.2 }),
            (ModelSpec::Bbc { l: 5 }, HamiltonianParams::Bbc { phi: 0.4 }),
            // Degenerate multiplets right above a degenerate ground level.
            (ModelSpec::Bbc { l: 5 }, HamiltonianParams::Bbc { phi: 1.0 }),
            (ModelSpec::Bbc { l: 5 }, HamiltonianParams::Bbc { phi: 2.5 }),
        ] {
            let m = ModelInstance::build(spec).unwrap();
            let gs = ground_space(&m, &g, &ExactOptions::default()).unwrap();
            let dense = dense_spectrum(&m, &g).unwrap();
            assert!((gs.energy - dense[0]).abs() < 1e-9, "{spec}: {} vs {}", gs.energy, dense[0]);
            let d = dense.iter().filter(|&&e| e - dense[0] <= 1e-8).count();
            assert_eq!(gs.degeneracy, d, "{spec}");
        }
    }

    #[test]
    fn aklt_point_is_fourfold() {
        let m = ModelInstance::build(ModelSpec::Bbc { l: 4 }).unwrap();
        let gs = ground_space(&m, &HamiltonianParams::Bbc { phi: (1.0f64 / 3.0).atan() }, &ExactOptions::default()).unwrap();
        assert_eq!(gs.degeneracy, 4);
        assert!(gs.gap > 1e-3);
    }

    #[test]
    fn ground_basis_orthonormal_and_fidelities() {
        let m = ModelInstance::build(ModelSpec::Bbc { l: 4 }).unwrap();
        let gs = ground_space(&m, &HamiltonianParams::Bbc { phi: (1.0f64 / 3.0).atan() }, &ExactOptions::default()).unwrap();
        let GroundStates::Spin(v) = &gs.states else { panic!() };
        for i in 0..v.len() {
            for j in 0..v.len() {
                let ov = v[i].inner(&v[j]).norm();
                assert!((ov - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
            assert!((ground_space_fidelity(StateRef::Spin(&v[i]), &gs).unwrap() - 1.0).abs() < 1e-9);
        }
        // Fully polarized state is outside the singlet/triplet AKLT manifold.
        let up = StateVector::product(3, &[0, 0, 0, 0]);
        assert!(ground_space_fidelity(StateRef::Spin(&up), &gs).unwrap() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let m = ModelInstance::build(ModelSpec::Tfim1d { l: 3 }).unwrap();
        let gs = ground_space(&m, &HamiltonianParams::Tfim { h_x: 0.5 }, &ExactOptions::default()).unwrap();
        let other = StateVector::product(2, &[0, 0]);
        assert!(matches!(ground_space_fidelity(StateRef::Spin(&other), &gs), Err(Error::Dimension { .. })));
    }

    #[test]
    fn ssh_energy_is_sum_of_filled_levels() {
        let m = ModelInstance::build(ModelSpec::Ssh2d { l: 4 }).unwrap();
        let g = HamiltonianParams::Ssh { r: 0.2 };
        let gs = ground_space(&m, &g, &ExactOptions::default()).unwrap();
        let sim = FloSimulator::new(&m).unwrap();
        let mut ev: Vec<f64> = sim.single_particle(&m.coefficients(&g).unwrap()).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((gs.energy - ev[..8].iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(gs.degeneracy, 2);
        let rep = gs.representative_gaussian().unwrap();
        assert!((ground_space_fidelity(StateRef::Gaussian(&rep), &gs).unwrap() - 1.0).abs() < 1e-9);
    }

    /// `1 − 2⟨n⟩` on the corner site of an isolated 2x2 ring `−v` with potential `ε` on that site.
    fn isolated_corner_parity(v: f64, eps: f64) -> f64 {
        let mut a = DMatrix::<f64>::zeros(4, 4);
        // Ring order 0-1-3-2-0 matches (0,0),(1,0),(1,1),(0,1).
        for (i, j) in [(0, 1), (1, 3), (3, 2), (2, 0)] {
            a[(i, j)] = -v;
            a[(j, i)] = -v;
        }
        a[(0, 0)] = eps;
        let eig = a.symmetric_eigen();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap());
        let n: f64 = order[..2].iter().map(|&k| eig.eigenvectors[(0, k)].powi(2)).sum();
        1.0 - 2.0 * n
    }

    #[test]
    fn ssh_coop_limits() {
        let m = ModelInstance::build(ModelSpec::Ssh2d { l: 6 }).unwrap();
        let corners = m.corners().unwrap();
        let topo = ground_space(&m, &HamiltonianParams::Ssh { r: 1e-6 }, &ExactOptions::default()).unwrap();
        let c_topo = topo.representative_gaussian().unwrap().parity(&corners).unwrap();
        assert!((c_topo - 1.0).abs() < 1e-6, "{c_topo}");

        // With μ fixed and w → 0 the corner cells decouple; COOP is the product
        // of the four isolated-cell parities, not 0.
        let r = 1e6;
        let (v, _) = m.hoppings(r);
        let mu = m.mu();
        let iso = isolated_corner_parity(v, -mu).powi(2) * isolated_corner_parity(v, mu).powi(2);
        let deep = ground_space(&m, &HamiltonianParams::Ssh { r }, &ExactOptions::default()).unwrap();
        let c_deep = deep.representative_gaussian().unwrap().parity(&corners).unwrap();
        assert!((c_deep - iso).abs() < 1e-4, "{c_deep} vs {iso}");

        let m10 = ModelInstance::build(ModelSpec::Ssh2d { l: 10 }).unwrap();
        let gs = ground_space(&m10, &HamiltonianParams::Ssh { r: 5.0 }, &ExactOptions::default()).unwrap();
        let c = gs.representative_gaussian().unwrap().parity(&m10.corners().unwrap()).unwrap();
        assert!(c.abs() < 1e-4, "{c}");
    }
}
