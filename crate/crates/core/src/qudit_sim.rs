//! Dense statevector simulation of Hamiltonian-variational circuits on qubit
//! and qutrit chains.
//!
//! Amplitude index: `Σ_i s_i · d^(N−i)` for 1-based site `i` with local digit
//! `s_i`, so site 1 is the most significant digit.
//!
//! A circuit of depth `p` applies `p` identical layers; each layer applies
//! `e^{iθ H_1}, …, e^{iθ H_k}` in sub-Hamiltonian order. Every factor is the
//! product of the exact exponentials of its commuting local terms. Groups that
//! are diagonal in the computational basis are stored as a compressed diagonal.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CMatrix, InitialStateRecipe, ModelInstance, SiteOperator};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Dense amplitude vector over `n_sites` sites of local dimension `local_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amps: Vec<C>,
    pub local_dim: usize,
    pub n_sites: usize,
}

impl StateVector {
    /// Product state with the given local digit on every site.
    pub fn product(local_dim: usize, digits: &[usize]) -> Self {
        let n_sites = digits.len();
        let dim = local_dim.pow(n_sites as u32);
        let idx = digits.iter().fold(0, |acc, &s| acc * local_dim + s);
        let mut amps = vec![ZERO; dim];
        amps[idx] = C::new(1.0, 0.0);
        Self { amps, local_dim, n_sites }
    }

    /// Product state from one local vector per site.
    pub fn product_of(local_dim: usize, locals: &[Vec<C>]) -> Self {
        let mut amps = vec![C::new(1.0, 0.0)];
        for v in locals {
            assert_eq!(v.len(), local_dim);
            amps = amps.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        Self { amps, local_dim, n_sites: locals.len() }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        self.amps.iter_mut().for_each(|a| *a /= n);
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C {
        inner(&self.amps, &other.amps)
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Local digit of site `site` (1-based) in basis index `idx`.
    pub fn digit(&self, idx: usize, site: usize) -> usize {
        (idx / self.local_dim.pow((self.n_sites - site) as u32)) % self.local_dim
    }

    /// `Σ_x |ψ_x|² f(x)` for a function of the basis index.
    pub fn diagonal_expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.amps.iter().enumerate().map(|(x, a)| a.norm_sqr() * f(x)).sum()
    }
}

pub fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// HV-ansatz parameters: a `p × k` angle matrix plus optional boundary angles.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzParams {
    pub p: usize,
    pub k: usize,
    /// Row-major, `theta[l * k + i]` is the angle of sub-Hamiltonian `i` in layer `l`.
    pub theta: Vec<f64>,
    /// `(θ_left, φ_left, θ_right, φ_right)` Bloch angles of the two edge spins.
    pub boundary: Option<[f64; 4]>,
}

impl AnsatzParams {
    pub fn zeros(model: &ModelInstance, p: usize) -> Self {
        let boundary = (model.n_boundary() > 0).then_some([0.0; 4]);
        Self { p, k: model.k(), theta: vec![0.0; p * model.k()], boundary }
    }

    /// Split a flat vector laid out as `theta ‖ boundary`.
    pub fn from_flat(model: &ModelInstance, p: usize, flat: &[f64]) -> Result<Self> {
        let k = model.k();
        let expected = model.n_params(p);
        if flat.len() != expected {
            return Err(Error::Dimension { expected, got: flat.len() });
        }
        let theta = flat[..p * k].to_vec();
        let boundary = (model.n_boundary() > 0).then(|| {
            let b = &flat[p * k..];
            [b[0], b[1], b[2], b[3]]
        });
        Ok(Self { p, k, theta, boundary })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.theta.clone();
        if let Some(b) = self.boundary {
            out.extend_from_slice(&b);
        }
        out
    }

    pub fn angle(&self, layer: usize, group: usize) -> f64 {
        self.theta[layer * self.k + group]
    }

    fn check(&self, model: &ModelInstance) -> Result<()> {
        if self.k != model.k() || self.theta.len() != self.p * self.k {
            return Err(Error::Dimension { expected: self.p * model.k(), got: self.theta.len() });
        }
        if self.boundary.is_some() != (model.n_boundary() > 0) {
            return Err(if self.boundary.is_none() { Error::MissingBoundary } else { Error::Dimension { expected: 0, got: 4 } });
        }
        Ok(())
    }
}

/// A local term compiled against a fixed lattice.
#[derive(Debug, Clone)]
struct CompiledTerm {
    /// Basis indices with zero digits on the support.
    bases: Arc<Vec<u32>>,
    /// Offsets of the `d^s` local configurations relative to a base index.
    offsets: Arc<Vec<usize>>,
    matrix: CMatrix,
    eigvals: Vec<f64>,
    eigvecs: CMatrix,
    /// Digit stride for single-site terms.
    stride: Option<usize>,
    d: usize,
    dim: usize,
}

impl CompiledTerm {
    fn exp_matrix(&self, theta: f64) -> CMatrix {
        let m = self.eigvals.len();
        let phases = CMatrix::from_fn(m, m, |r, c| if r == c { C::from_polar(1.0, theta * self.eigvals[r]) } else { ZERO });
        &self.eigvecs * phases * self.eigvecs.adjoint()
    }

    fn layout(&self) -> Layout<'_> {
        match self.stride {
            Some(stride) => Layout::Site { stride, d: self.d, dim: self.dim },
            None => Layout::Gather { bases: &self.bases, offsets: &self.offsets },
        }
    }
}

#[derive(Debug, Clone)]
enum CompiledGroup {
    /// `H_i` is diagonal; `levels[x]` indexes into `values`.
    Diagonal { levels: Vec<u16>, values: Vec<f64> },
    Local(Vec<CompiledTerm>),
}

/// Where the local blocks of a term live in the full amplitude vector.
#[derive(Clone, Copy)]
enum Layout<'a> {
    /// Single site with digit stride `stride`: contiguous runs, no index tables.
    Site { stride: usize, d: usize, dim: usize },
    Gather { bases: &'a [u32], offsets: &'a [usize] },
}

impl Layout<'_> {
    fn block_size(&self) -> usize {
        match self {
            Layout::Site { d, .. } => *d,
            Layout::Gather { offsets, .. } => offsets.len(),
        }
    }

    #[inline(always)]
    fn for_each<const M: usize>(&self, mut f: impl FnMut([usize; M])) {
        match *self {
            Layout::Site { stride, d, dim } => {
                for hi in (0..dim).step_by(d * stride) {
                    for lo in hi..hi + stride {
                        f(std::array::from_fn(|j| lo + j * stride));
                    }
                }
            }
            Layout::Gather { bases, offsets } => {
                let off: [usize; M] = offsets.try_into().expect("offset count");
                for &b in bases {
                    let b = b as usize;
                    f(std::array::from_fn(|j| b + off[j]));
                }
            }
        }
    }
}

/// Split a chunk of `M · stride` amplitudes into its `M` digit planes.
fn split_parts<const M: usize>(chunk: &mut [C], stride: usize) -> [&mut [C]; M] {
    let mut rest = chunk;
    std::array::from_fn(|_| {
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(stride);
        rest = tail;
        head
    })
}

fn fixed<const M: usize>(u: &CMatrix, scale: f64) -> [[C; M]; M] {
    std::array::from_fn(|r| std::array::from_fn(|c| u[(r, c)] * scale))
}

/// Apply a small dense matrix to every local block in place.
fn apply_local_inplace(amps: &mut [C], layout: Layout<'_>, u: &CMatrix) {
    fn run<const M: usize>(amps: &mut [C], layout: Layout<'_>, u: &CMatrix) {
        let mat = fixed::<M>(u, 1.0);
        if let Layout::Site { stride, .. } = layout {
            for chunk in amps.chunks_exact_mut(M * stride) {
                let parts = split_parts::<M>(chunk, stride);
                for j in 0..stride {
                    let buf: [C; M] = std::array::from_fn(|r| parts[r][j]);
                    for r in 0..M {
                        let mut acc = ZERO;
                        for c in 0..M {
                            acc += mat[r][c] * buf[c];
                        }
                        parts[r][j] = acc;
                    }
                }
            }
            return;
        }
        layout.for_each::<M>(|idx| {
            let buf: [C; M] = std::array::from_fn(|j| amps[idx[j]]);
            for r in 0..M {
                let mut acc = ZERO;
                for c in 0..M {
                    acc += mat[r][c] * buf[c];
                }
                amps[idx[r]] = acc;
            }
        });
    }
    match layout.block_size() {
        2 => run::<2>(amps, layout, u),
        3 => run::<3>(amps, layout, u),
        4 => run::<4>(amps, layout, u),
        9 => run::<9>(amps, layout, u),
        m => panic!("unsupported block size {m}"),
    }
}

/// `Σ_blocks ⟨bra|h|ket⟩` over the local blocks of a term.
fn local_matrix_element(bra: &[C], ket: &[C], layout: Layout<'_>, h: &CMatrix) -> C {
    fn run<const M: usize>(bra: &[C], ket: &[C], layout: Layout<'_>, h: &CMatrix) -> C {
        let mat = fixed::<M>(h, 1.0);
        let mut total = ZERO;
        if let Layout::Site { stride, .. } = layout {
            for (bc, kc) in bra.chunks_exact(M * stride).zip(ket.chunks_exact(M * stride)) {
                let bp: [&[C]; M] = std::array::from_fn(|r| &bc[r * stride..(r + 1) * stride]);
                let kp: [&[C]; M] = std::array::from_fn(|r| &kc[r * stride..(r + 1) * stride]);
                for j in 0..stride {
                    for r in 0..M {
                        let mut acc = ZERO;
                        for c in 0..M {
                            acc += mat[r][c] * kp[c][j];
                        }
                        total += bp[r][j].conj() * acc;
                    }
                }
            }
            return total;
        }
        layout.for_each::<M>(|idx| {
            let buf: [C; M] = std::array::from_fn(|j| ket[idx[j]]);
            for r in 0..M {
                let mut acc = ZERO;
                for c in 0..M {
                    acc += mat[r][c] * buf[c];
                }
                total += bra[idx[r]].conj() * acc;
            }
        });
        total
    }
    match layout.block_size() {
        2 => run::<2>(bra, ket, layout, h),
        3 => run::<3>(bra, ket, layout, h),
        4 => run::<4>(bra, ket, layout, h),
        9 => run::<9>(bra, ket, layout, h),
        m => panic!("unsupported block size {m}"),
    }
}

/// `dst += scale · h ψ` for a local matrix `h`.
fn apply_local_add(src: &[C], dst: &mut [C], layout: Layout<'_>, h: &CMatrix, scale: f64) {
    fn run<const M: usize>(src: &[C], dst: &mut [C], layout: Layout<'_>, h: &CMatrix, scale: f64) {
        let mat = fixed::<M>(h, scale);
        layout.for_each::<M>(|idx| {
            let buf: [C; M] = std::array::from_fn(|j| src[idx[j]]);
            for r in 0..M {
                let mut acc = ZERO;
                for c in 0..M {
                    acc += mat[r][c] * buf[c];
                }
                dst[idx[r]] += acc;
            }
        });
    }
    match layout.block_size() {
        2 => run::<2>(src, dst, layout, h, scale),
        3 => run::<3>(src, dst, layout, h, scale),
        4 => run::<4>(src, dst, layout, h, scale),
        9 => run::<9>(src, dst, layout, h, scale),
        m => panic!("unsupported block size {m}"),
    }
}

/// Precompiled HV circuit for one spin model.
#[derive(Debug, Clone)]
pub struct QuditSimulator {
    pub local_dim: usize,
    pub n_sites: usize,
    dim: usize,
    groups: Vec<CompiledGroup>,
    recipe: InitialStateRecipe,
    /// For the AKLT recipe: the four boundary-basis states `B_ab`, index `2a + b`.
    aklt_basis: Option<[Vec<C>; 4]>,
}

impl QuditSimulator {
    pub fn new(model: &ModelInstance) -> Result<Self> {
        if model.is_fermionic() {
            return Err(Error::WrongBackend(model.spec.to_string()));
        }
        let d = model.lattice.local_dim;
        let n = model.lattice.n_sites;
        let dim = d.pow(n as u32);
        let mut cache: HashMap<Vec<usize>, (Arc<Vec<u32>>, Arc<Vec<usize>>)> = HashMap::new();
        let mut groups = Vec::with_capacity(model.k());
        for sub in &model.subs {
            if sub.is_diagonal() {
                groups.push(compile_diagonal(&sub.terms, d, n, dim));
            } else {
                let mut terms = Vec::with_capacity(sub.terms.len());
                for t in &sub.terms {
                    let (bases, offsets) = cache
                        .entry(t.support.clone())
                        .or_insert_with(|| {
                            let (b, o) = local_layout(&t.support, d, n);
                            (Arc::new(b), Arc::new(o))
                        })
                        .clone();
                    let eig = t.matrix.clone().symmetric_eigen();
                    terms.push(CompiledTerm {
                        bases,
                        offsets,
                        matrix: t.matrix.clone(),
                        eigvals: eig.eigenvalues.iter().copied().collect(),
                        eigvecs: eig.eigenvectors,
                        stride: (t.support.len() == 1).then(|| d.pow((n - t.support[0]) as u32)),
                        d,
                        dim,
                    });
                }
                groups.push(CompiledGroup::Local(terms));
            }
        }
        let aklt_basis = (model.initial_state == InitialStateRecipe::Aklt).then(|| aklt_boundary_basis(n));
        Ok(Self { local_dim: d, n_sites: n, dim, groups, recipe: model.initial_state, aklt_basis })
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Initial state of the ansatz. `boundary` is required for the AKLT recipe.
    pub fn prepare_initial(&self, boundary: Option<&[f64; 4]>) -> Result<StateVector> {
        match self.recipe {
            InitialStateRecipe::AllDown => Ok(StateVector::product(self.local_dim, &vec![1; self.n_sites])),
            InitialStateRecipe::Aklt => {
                let b = boundary.ok_or(Error::MissingBoundary)?;
                let (amps, _) = self.aklt_state(b);
                Ok(StateVector { amps, local_dim: 3, n_sites: self.n_sites })
            }
            InitialStateRecipe::TrivialSlater => Err(Error::WrongBackend("ssh-2d".into())),
        }
    }

    /// Normalized AKLT state and the derivative of it w.r.t. each boundary angle.
    fn aklt_state(&self, b: &[f64; 4]) -> (Vec<C>, [Vec<C>; 4]) {
        let basis = self.aklt_basis.as_ref().expect("AKLT basis");
        let (l, dl) = edge_spinor(b[0], b[1]);
        let (r, dr) = edge_spinor(b[2], b[3]);
        let combine = |lv: &[C; 2], rv: &[C; 2]| -> Vec<C> {
            let mut out = vec![ZERO; self.dim];
            for a in 0..2 {
                for c in 0..2 {
                    let w = lv[a] * rv[c];
                    for (o, x) in out.iter_mut().zip(&basis[2 * a + c]) {
                        *o += w * x;
                    }
                }
            }
            out
        };
        let raw = combine(&l, &r);
        let raw_d = [combine(&dl[0], &r), combine(&dl[1], &r), combine(&l, &dr[0]), combine(&l, &dr[1])];
        let nrm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C> = raw.iter().map(|a| a / nrm).collect();
        let dpsi = raw_d.map(|dv| {
            let dn = inner(&psi, &dv).re;
            dv.iter().zip(&psi).map(|(x, p)| (x - p * dn) / nrm).collect::<Vec<_>>()
        });
        (psi, dpsi)
    }

    /// Apply `e^{iθ H_group}` in place.
    pub fn apply_group_exp(&self, amps: &mut [C], group: usize, theta: f64) {
        if theta == 0.0 {
            return;
        }
        match &self.groups[group] {
            CompiledGroup::Diagonal { levels, values } => {
                let phases: Vec<C> = values.iter().map(|v| C::from_polar(1.0, theta * v)).collect();
                for (a, &lv) in amps.iter_mut().zip(levels) {
                    *a *= phases[lv as usize];
                }
            }
            CompiledGroup::Local(terms) => {
                for t in terms {
                    let u = t.exp_matrix(theta);
                    apply_local_inplace(amps, t.layout(), &u);
                }
            }
        }
    }

    /// `dst += scale · H_group src`.
    pub fn apply_group_add(&self, src: &[C], dst: &mut [C], group: usize, scale: f64) {
        match &self.groups[group] {
            CompiledGroup::Diagonal { levels, values } => {
                for ((d, s), &lv) in dst.iter_mut().zip(src).zip(levels) {
                    *d += s * (scale * values[lv as usize]);
                }
            }
            CompiledGroup::Local(terms) => {
                for t in terms {
                    apply_local_add(src, dst, t.layout(), &t.matrix, scale);
                }
            }
        }
    }

    /// `Σ_i coeffs[i] H_i ψ`.
    pub fn apply_hamiltonian(&self, src: &[C], coeffs: &[f64]) -> Vec<C> {
        let mut out = vec![ZERO; src.len()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                self.apply_group_add(src, &mut out, i, c);
            }
        }
        out
    }

    pub fn run_circuit(&self, params: &AnsatzParams) -> Result<StateVector> {
        if params.k != self.k() || params.theta.len() != params.p * params.k {
            return Err(Error::Dimension { expected: params.p * self.k(), got: params.theta.len() });
        }
        let mut state = self.prepare_initial(params.boundary.as_ref())?;
        for l in 0..params.p {
            for i in 0..self.k() {
                self.apply_group_exp(&mut state.amps, i, params.angle(l, i));
            }
        }
        Ok(state)
    }

    /// `⟨H_i⟩` for every sub-Hamiltonian.
    pub fn sub_expectations(&self, state: &StateVector) -> Vec<f64> {
        (0..self.k())
            .map(|i| {
                let mut tmp = vec![ZERO; state.dim()];
                self.apply_group_add(&state.amps, &mut tmp, i, 1.0);
                inner(&state.amps, &tmp).re
            })
            .collect()
    }

    /// Energy and its gradient by a reverse (adjoint) sweep over the layers.
    /// Gradient layout matches [`AnsatzParams::to_flat`].
    pub fn energy_and_gradient(&self, coeffs: &[f64], params: &AnsatzParams) -> Result<(f64, Vec<f64>)> {
        if params.k != self.k() || params.theta.len() != params.p * params.k {
            return Err(Error::Dimension { expected: params.p * self.k(), got: params.theta.len() });
        }
        let k = self.k();
        let n_layers = params.p * k;
        // Keep every intermediate state when it fits, so the backward sweep
        // only has to rotate the adjoint vector.
        let cache = n_layers * self.dim * std::mem::size_of::<C>() <= FORWARD_CACHE_BYTES;
        let mut phi = self.prepare_initial(params.boundary.as_ref())?.amps;
        let mut snapshots = Vec::with_capacity(if cache { n_layers } else { 0 });
        for l in 0..params.p {
            for i in 0..k {
                self.apply_group_exp(&mut phi, i, params.angle(l, i));
                if cache {
                    snapshots.push(phi.clone());
                }
            }
        }
        let mut lam = self.apply_hamiltonian(&phi, coeffs);
        let energy = inner(&phi, &lam).re;

        let mut grad = vec![0.0; n_layers];
        for l in (0..params.p).rev() {
            for i in (0..k).rev() {
                let th = params.angle(l, i);
                let ket = if cache { &snapshots[l * k + i] } else { &phi };
                grad[l * k + i] = -2.0 * self.group_matrix_element(&lam, ket, i).im;
                if !cache {
                    self.apply_group_exp(&mut phi, i, -th);
                }
                self.apply_group_exp(&mut lam, i, -th);
            }
        }
        if let Some(b) = params.boundary {
            let (_, dpsi) = self.aklt_state(&b);
            for dv in &dpsi {
                grad.push(2.0 * inner(&lam, dv).re);
            }
        }
        Ok((energy, grad))
    }

    /// `⟨bra|H_group|ket⟩` without materialising `H_group |ket⟩`.
    pub fn group_matrix_element(&self, bra: &[C], ket: &[C], group: usize) -> C {
        match &self.groups[group] {
            CompiledGroup::Diagonal { levels, values } => {
                let mut acc = ZERO;
                for ((b, k), &lv) in bra.iter().zip(ket).zip(levels) {
                    acc += b.conj() * k * values[lv as usize];
                }
                acc
            }
            CompiledGroup::Local(terms) => terms.iter().map(|t| local_matrix_element(bra, ket, t.layout(), &t.matrix)).sum(),
        }
    }
}

/// Intermediate states are cached in the gradient sweep up to this size.
const FORWARD_CACHE_BYTES: usize = 64 << 20;

/// Bloch spinor `(cos(θ/2), e^{iφ} sin(θ/2))` and its partial derivatives.
fn edge_spinor(theta: f64, phi: f64) -> ([C; 2], [[C; 2]; 2]) {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = C::from_polar(1.0, phi);
    let v = [C::new(c, 0.0), e * s];
    let d_theta = [C::new(-s / 2.0, 0.0), e * (c / 2.0)];
    let d_phi = [ZERO, C::i() * e * s];
    (v, [d_theta, d_phi])
}

/// Bond-dimension-2 AKLT tensors `A^m` for `m = +1, 0, −1`.
pub fn aklt_tensors() -> [[[f64; 2]; 2]; 3] {
    let a = (2.0f64 / 3.0).sqrt();
    let b = (1.0f64 / 3.0).sqrt();
    [[[0.0, a], [0.0, 0.0]], [[-b, 0.0], [0.0, b]], [[0.0, 0.0], [-a, 0.0]]]
}

/// Unnormalized open-chain AKLT amplitudes `[A^{s_1} ⋯ A^{s_N}]_{ab}` for the
/// four boundary choices `(a, b)`.
fn aklt_boundary_basis(n: usize) -> [Vec<C>; 4] {
    let t = aklt_tensors();
    // prefix[x] is the 2×2 product for the first `len` sites in configuration x.
    let mut prefix: Vec<[[f64; 2]; 2]> = vec![[[1.0, 0.0], [0.0, 1.0]]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(prefix.len() * 3);
        for m in &prefix {
            for a in &t {
                let mut out = [[0.0; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        out[r][c] = m[r][0] * a[0][c] + m[r][1] * a[1][c];
                    }
                }
                next.push(out);
            }
        }
        prefix = next;
    }
    let pick = |a: usize, b: usize| prefix.iter().map(|m| C::new(m[a][b], 0.0)).collect::<Vec<_>>();
    [pick(0, 0), pick(0, 1), pick(1, 0), pick(1, 1)]
}

/// Base indices and local offsets for a term on `support` (1-based sites).
fn local_layout(support: &[usize], d: usize, n: usize) -> (Vec<u32>, Vec<usize>) {
    let dim = d.pow(n as u32);
    let strides: Vec<usize> = support.iter().map(|&s| d.pow((n - s) as u32)).collect();
    let m = d.pow(support.len() as u32);
    let offsets: Vec<usize> = (0..m)
        .map(|local| {
            let mut rem = local;
            let mut off = 0;
            for st in strides.iter().rev() {
                off += (rem % d) * st;
                rem /= d;
            }
            off
        })
        .collect();
    let bases = (0..dim).filter(|&x| strides.iter().all(|&st| (x / st) % d == 0)).map(|x| x as u32).collect();
    (bases, offsets)
}

fn compile_diagonal(terms: &[SiteOperator], d: usize, n: usize, dim: usize) -> CompiledGroup {
    let mut diag = vec![0.0f64; dim];
    for t in terms {
        let strides: Vec<usize> = t.support.iter().map(|&s| d.pow((n - s) as u32)).collect();
        for (x, v) in diag.iter_mut().enumerate() {
            let local = strides.iter().fold(0, |acc, &st| acc * d + (x / st) % d);
            *v += t.matrix[(local, local)].re;
        }
    }
    let mut values: Vec<f64> = Vec::new();
    let mut levels = Vec::with_capacity(dim);
    for &v in &diag {
        let idx = match values.iter().position(|&u| (u - v).abs() < 1e-12) {
            Some(i) => i,
            None => {
                values.push(v);
                values.len() - 1
            }
        };
        levels.push(u16::try_from(idx).expect("too many distinct diagonal values"));
    }
    CompiledGroup::Diagonal { levels, values }
}

/// Initial state for a spin model.
pub fn prepare_initial(model: &ModelInstance, boundary: Option<&[f64; 4]>) -> Result<StateVector> {
    QuditSimulator::new(model)?.prepare_initial(boundary)
}

pub fn run_circuit(model: &ModelInstance, params: &AnsatzParams) -> Result<StateVector> {
    params.check(model)?;
    QuditSimulator::new(model)?.run_circuit(params)
}

pub fn energy_and_gradient(
    model: &ModelInstance,
    g: &crate::model::HamiltonianParams,
    params: &AnsatzParams,
) -> Result<(f64, Vec<f64>)> {
    params.check(model)?;
    let coeffs = model.coefficients(g)?;
    QuditSimulator::new(model)?.energy_and_gradient(&coeffs, params)
}

pub fn sub_expectations(state: &StateVector, model: &ModelInstance) -> Result<Vec<f64>> {
    let sim = QuditSimulator::new(model)?;
    if state.dim() != sim.dim() {
        return Err(Error::Dimension { expected: sim.dim(), got: state.dim() });
    }
    Ok(sim.sub_expectations(state))
}

/// `⟨ψ|Σ_t O_t|ψ⟩` for a list of local operators. Rejects non-Hermitian terms.
pub fn expectation(state: &StateVector, terms: &[SiteOperator]) -> Result<f64> {
    let d = state.local_dim;
    let n = state.n_sites;
    let mut total = C::new(0.0, 0.0);
    for t in terms {
        if !t.is_hermitian(1e-12) {
            return Err(Error::NonHermitian(format!("{:?} on {:?}", t.kind, t.support)));
        }
        if t.support.iter().any(|&s| s == 0 || s > n) || t.matrix.nrows() != d.pow(t.support.len() as u32) {
            return Err(Error::InvalidSite(*t.support.iter().max().unwrap_or(&0)));
        }
        let (bases, offsets) = local_layout(&t.support, d, n);
        let mut tmp = vec![ZERO; state.dim()];
        apply_local_add(&state.amps, &mut tmp, Layout::Gather { bases: &bases, offsets: &offsets }, &t.matrix, 1.0);
        total += inner(&state.amps, &tmp);
    }
    assert!(total.im.abs() < 1e-10, "imaginary part {} of a Hermitian expectation", total.im);
    Ok(total.re)
}

/// Dense matrix of `Σ_i coeffs[i] H_i` (small systems only).
pub fn dense_hamiltonian(model: &ModelInstance, coeffs: &[f64]) -> Result<DMatrix<C>> {
    let sim = QuditSimulator::new(model)?;
    let dim = sim.dim();
    let mut out = DMatrix::<C>::zeros(dim, dim);
    let mut e = vec![ZERO; dim];
    for c in 0..dim {
        e[c] = C::new(1.0, 0.0);
        let col = sim.apply_hamiltonian(&e, coeffs);
        for (r, v) in col.into_iter().enumerate() {
            out[(r, c)] = v;
        }
        e[c] = ZERO;
    }
    Ok(out)
}
