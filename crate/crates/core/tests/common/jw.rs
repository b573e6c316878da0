//! Brute-force Jordan–Wigner simulation of the 2D SSH model.
//!
//! Mode `i` (0-based, row-major site `i + 1`) is bit `i` of the basis index.
//! Everything here is built from the lattice geometry directly, not from the
//! crate's model or Gaussian code.

use num_complex::Complex64 as C;

#[derive(Debug, Clone)]
pub struct JwState {
    pub amps: Vec<C>,
    pub n_modes: usize,
}

/// The five SSH groups built from geometry: `(hoppings (i, j), potentials (i, ε))`.
pub struct SshGroups {
    pub hops: Vec<Vec<(usize, usize)>>,
    pub pots: Vec<(usize, f64)>,
}

pub fn ssh_groups(l: usize) -> SshGroups {
    let idx = |x: usize, y: usize| y * l + x;
    let mut hops = vec![Vec::new(); 4];
    for y in 0..l {
        for x in 0..l - 1 {
            // Edge between x and x+1 is intra-cell when x is even.
            hops[if x % 2 == 0 { 0 } else { 2 }].push((idx(x, y), idx(x + 1, y)));
        }
    }
    for y in 0..l - 1 {
        for x in 0..l {
            hops[if y % 2 == 0 { 1 } else { 3 }].push((idx(x, y), idx(x, y + 1)));
        }
    }
    let n = l * l;
    let pots = vec![(l - 1, 1.0), (n - l, 1.0), (0, -1.0), (n - 1, -1.0)];
    SshGroups { hops, pots }
}

/// Coefficients `(−v, −v, −w, −w, μ)` at `r = v/w`.
pub fn ssh_coeffs(l: usize, r: f64) -> [f64; 5] {
    let v = 2.0 * r / (1.0 + r);
    let w = 2.0 / (1.0 + r);
    [-v, -v, -w, -w, 1.0 / (l * l) as f64]
}

fn parity_below(s: usize, i: usize) -> f64 {
    if (s & ((1usize << i) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl JwState {
    pub fn vacuum(n_modes: usize) -> Self {
        let mut amps = vec![C::new(0.0, 0.0); 1 << n_modes];
        amps[0] = C::new(1.0, 0.0);
        Self { amps, n_modes }
    }

    /// Apply `Σ_i φ_i c_i†`.
    pub fn create(&self, phi: &[f64]) -> Self {
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        for (s, &a) in self.amps.iter().enumerate() {
            if a == C::new(0.0, 0.0) {
                continue;
            }
            for (i, &f) in phi.iter().enumerate() {
                if f == 0.0 || s & (1 << i) != 0 {
                    continue;
                }
                out[s | (1 << i)] += a * f * parity_below(s, i);
            }
        }
        Self { amps: out, n_modes: self.n_modes }
    }

    /// Slater determinant `Π_k (Σ_i U_ik c_i†)|0⟩` over the columns of `orbitals`.
    pub fn slater(n_modes: usize, orbitals: &[Vec<f64>]) -> Self {
        let mut s = Self::vacuum(n_modes);
        for phi in orbitals {
            s = s.create(phi);
        }
        let norm = s.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut s.amps {
            *a /= norm;
        }
        s
    }

    /// `c_i† c_j |ψ⟩`.
    pub fn hop(&self, i: usize, j: usize) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        for (s, &a) in self.amps.iter().enumerate() {
            if s & (1 << j) == 0 {
                continue;
            }
            let sign_j = parity_below(s, j);
            let t = s & !(1 << j);
            if t & (1 << i) != 0 {
                continue;
            }
            let sign_i = parity_below(t, i);
            out[t | (1 << i)] += a * sign_i * sign_j;
        }
        out
    }

    pub fn inner(&self, other: &[C]) -> C {
        self.amps.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn occupation(&self, i: usize) -> f64 {
        self.amps.iter().enumerate().filter(|(s, _)| s & (1 << i) != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// `⟨Π_{i∈sites} (−1)^{n_i}⟩`.
    pub fn parity(&self, sites: &[usize]) -> f64 {
        let mask: usize = sites.iter().map(|&i| 1 << i).sum();
        self.amps
            .iter()
            .enumerate()
            .map(|(s, a)| if (s & mask).count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// `e^{iφ(c_i†c_j + c_j†c_i)}`.
    pub fn apply_hop_exp(&mut self, i: usize, j: usize, phi: f64) {
        let (c, s_) = (phi.cos(), phi.sin());
        let bi = 1 << i;
        let bj = 1 << j;
        for s in 0..self.amps.len() {
            // Visit each {n_i=1,n_j=0} / {n_i=0,n_j=1} pair once from the n_j=1 side.
            if s & bj == 0 || s & bi != 0 {
                continue;
            }
            let t = s & !bj;
            let partner = t | bi;
            // c_i† c_j |s⟩ = σ |partner⟩; the Hermitian conjugate maps back with the same σ.
            let sigma = parity_below(s, j) * parity_below(t, i);
            let (a, b) = (self.amps[s], self.amps[partner]);
            let isn = C::new(0.0, s_ * sigma);
            self.amps[s] = a * c + isn * b;
            self.amps[partner] = b * c + isn * a;
        }
    }

    /// `e^{iφ n_i}`.
    pub fn apply_number_exp(&mut self, i: usize, phi: f64) {
        let ph = C::from_polar(1.0, phi);
        for (s, a) in self.amps.iter_mut().enumerate() {
            if s & (1 << i) != 0 {
                *a *= ph;
            }
        }
    }

    /// `e^{iθ H_group}` for group index `g` of [`ssh_groups`].
    pub fn apply_group(&mut self, groups: &SshGroups, g: usize, theta: f64) {
        if g < 4 {
            for &(i, j) in &groups.hops[g] {
                self.apply_hop_exp(i, j, theta);
            }
        } else {
            for &(i, e) in &groups.pots {
                self.apply_number_exp(i, theta * e);
            }
        }
    }

    /// `H|ψ⟩` for `H = Σ_g c_g H_g`.
    pub fn apply_h(&self, groups: &SshGroups, coeffs: &[f64; 5]) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        for g in 0..4 {
            for &(i, j) in &groups.hops[g] {
                for (o, x) in out.iter_mut().zip(self.hop(i, j)) {
                    *o += x * coeffs[g];
                }
                for (o, x) in out.iter_mut().zip(self.hop(j, i)) {
                    *o += x * coeffs[g];
                }
            }
        }
        for &(i, e) in &groups.pots {
            for (s, o) in out.iter_mut().enumerate() {
                if s & (1 << i) != 0 {
                    *o += self.amps[s] * (coeffs[4] * e);
                }
            }
        }
        out
    }

    pub fn energy(&self, groups: &SshGroups, coeffs: &[f64; 5]) -> f64 {
        self.inner(&self.apply_h(groups, coeffs)).re
    }

    pub fn overlap_sqr(&self, other: &JwState) -> f64 {
        self.inner(&other.amps).norm_sqr()
    }
}

/// Lowest eigenvalue of the SSH Hamiltonian in the `n_particles` sector by
/// plain Lanczos with full reorthogonalisation.
pub fn sector_ground_energy(l: usize, r: f64, n_particles: usize, iters: usize) -> f64 {
    let n = l * l;
    let groups = ssh_groups(l);
    let coeffs = ssh_coeffs(l, r);
    let dim = 1usize << n;
    // Deterministic start vector spread over the sector.
    let mut v = vec![C::new(0.0, 0.0); dim];
    let mut k = 0u64;
    for (s, a) in v.iter_mut().enumerate() {
        if s.count_ones() as usize == n_particles {
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *a = C::new(((k >> 33) as f64 / (1u64 << 31) as f64) - 0.5, 0.0);
        }
    }
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    let mut basis: Vec<Vec<C>> = vec![v];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for it in 0..iters {
        let st = JwState { amps: basis[it].clone(), n_modes: n };
        let mut w = st.apply_h(&groups, &coeffs);
        let alpha = st.inner(&w).re;
        alphas.push(alpha);
        for b in &basis {
            let ov: C = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
            w.iter_mut().zip(b).for_each(|(y, x)| *y -= ov * x);
        }
        let beta = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if beta < 1e-12 {
            break;
        }
        betas.push(beta);
        w.iter_mut().for_each(|a| *a /= beta);
        basis.push(w);
    }
    let m = alphas.len();
    let t = nalgebra::DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}
