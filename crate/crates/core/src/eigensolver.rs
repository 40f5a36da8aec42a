//! Dense symmetric diagonalization, ground-state observables and a sparse
//! Lanczos path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spin_model::{build_hamiltonian, build_sparse, sz_diag, ChainSpec, SparseHamiltonian};

/// Levels closer than this are one degenerate block.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Minimum ground gap accepted by Hellmann-Feynman evaluations.
pub const HF_GAP_MIN: f64 = 1e-6;
/// Residual bound relative to the spectral norm.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Levels {
    All,
    Lowest(usize),
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending energies (GHz).
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, aligned with `energies`.
    pub states: DMatrix<f64>,
    pub dim: usize,
    pub residuals: Vec<f64>,
    /// Spectral norm max |E|.
    pub norm: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.states.column(k).into_owned()
    }

    pub fn ground(&self) -> DVector<f64> {
        self.state(0)
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// E1 - E0, or +inf for a one-level spectrum.
    pub fn gap(&self) -> f64 {
        if self.energies.len() < 2 {
            f64::INFINITY
        } else {
            self.energies[1] - self.energies[0]
        }
    }

    /// Index ranges of levels within `DEGENERACY_TOL` of their neighbour.
    pub fn degenerate_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.energies.len() {
            if k == self.energies.len() || self.energies[k] - self.energies[k - 1] > DEGENERACY_TOL {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    pub fn require_nondegenerate_ground(&self, min_gap: f64) -> Result<()> {
        let g = self.gap();
        if g <= min_gap {
            return Err(Error::DegenerateGround(g));
        }
        Ok(())
    }

    /// max |V^T V - I|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.states.transpose() * &self.states;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let scale = h.amax().max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in (i + 1)..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    if worst > 1e-12 * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

pub fn diagonalize(h: &DMatrix<f64>, levels: Levels) -> Result<Spectrum> {
    check_symmetric(h)?;
    let dim = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let keep = match levels {
        Levels::All => dim,
        Levels::Lowest(k) => k.min(dim),
    };
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut energies = Vec::with_capacity(keep);
    let mut states = DMatrix::zeros(dim, keep);
    let mut residuals = Vec::with_capacity(keep);
    for (c, &k) in order.iter().take(keep).enumerate() {
        let e = eig.eigenvalues[k];
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
        fix_sign(&mut v);
        let v = DVector::from_vec(v);
        let r = (h * &v - &v * e).norm();
        if r > RESIDUAL_TOL * norm.max(f64::MIN_POSITIVE) && r > 1e-14 {
            return Err(Error::Convergence(format!("residual {r:e} exceeds bound for level {c}")));
        }
        energies.push(e);
        states.set_column(c, &v);
        residuals.push(r);
    }
    Ok(Spectrum { energies, states, dim, residuals, norm })
}

pub fn diagonalize_spec(spec: &ChainSpec, levels: Levels) -> Result<Spectrum> {
    diagonalize(&build_hamiltonian(spec)?, levels)
}

pub fn expectation(state: &DVector<f64>, op: &DMatrix<f64>) -> Result<f64> {
    if op.nrows() != state.len() || op.ncols() != state.len() {
        return Err(Error::DimensionMismatch { expected: state.len(), got: op.nrows() });
    }
    Ok(state.dot(&(op * state)))
}

pub fn expectation_diag(state: &DVector<f64>, diag: &[f64]) -> Result<f64> {
    if diag.len() != state.len() {
        return Err(Error::DimensionMismatch { expected: state.len(), got: diag.len() });
    }
    Ok(state.iter().zip(diag).map(|(c, d)| c * c * d).sum())
}

fn n_from_dim(dim: usize) -> usize {
    dim.trailing_zeros() as usize
}

/// <ψ|σ^z_site|ψ> for a state of the 2^n product space.
pub fn sz_expectation(state: &DVector<f64>, site: usize) -> Result<f64> {
    let n = n_from_dim(state.len());
    if site >= n {
        return Err(Error::IndexOutOfRange { index: site, n });
    }
    expectation_diag(state, &sz_diag(site, n))
}

/// <ψ|σ^z_a σ^z_b|ψ>.
pub fn szsz_expectation(state: &DVector<f64>, a: usize, b: usize) -> Result<f64> {
    let n = n_from_dim(state.len());
    for &s in &[a, b] {
        if s >= n {
            return Err(Error::IndexOutOfRange { index: s, n });
        }
    }
    let za = sz_diag(a, n);
    let zb = sz_diag(b, n);
    let d: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x * y).collect();
    expectation_diag(state, &d)
}

/// <σ^z_a><σ^z_b> - <σ^z_a σ^z_b> in the ground state.
pub fn connected_correlator(spectrum: &Spectrum, site_a: usize, site_b: usize) -> Result<f64> {
    let g = spectrum.ground();
    let za = sz_expectation(&g, site_a)?;
    let zb = sz_expectation(&g, site_b)?;
    Ok(za * zb - szsz_expectation(&g, site_a, site_b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bias {
    Epsilon,
    Delta,
}

/// dE0/d(bias of `site`) = <0|∂H/∂bias|0>.
pub fn hellmann_feynman_current(spec: &ChainSpec, site: usize, bias: Bias) -> Result<f64> {
    let n = spec.n_sites();
    if site >= n {
        return Err(Error::IndexOutOfRange { index: site, n });
    }
    let h = build_hamiltonian(spec)?;
    let sp = diagonalize(&h, Levels::Lowest(2))?;
    sp.require_nondegenerate_ground(HF_GAP_MIN)?;
    let g = sp.ground();
    match bias {
        Bias::Epsilon => Ok(0.5 * sz_expectation(&g, site)?),
        Bias::Delta => {
            let m = 1usize << (n - 1 - site);
            let sx: f64 = (0..g.len()).map(|b| g[b] * g[b ^ m]).sum();
            Ok(0.5 * sx)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-10, seed: 1 }
    }
}

/// Lowest `k` eigenpairs of a sparse Hamiltonian by Lanczos with full
/// reorthogonalization.
pub fn lanczos_lowest(h: &SparseHamiltonian, k: usize, opts: LanczosOptions) -> Result<Spectrum> {
    use rand::{Rng, SeedableRng};
    let dim = h.dim();
    let m_max = opts.max_iter.min(dim).max(k.min(dim));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= qn);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut prev: Option<Vec<f64>> = None;
    let mut ritz: Option<(Vec<f64>, DMatrix<f64>)> = None;

    for it in 0..m_max {
        basis.push(q.clone());
        h.matvec(&q, &mut w);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi -= a * q[i] + prev.as_ref().map_or(0.0, |p| beta.last().unwrap() * p[i]);
        }
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();

        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let kk = k.min(m);
        let vals: Vec<f64> = order.iter().take(kk).map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = DMatrix::zeros(m, kk);
        for (c, &i) in order.iter().take(kk).enumerate() {
            vecs.set_column(c, &eig.eigenvectors.column(i));
        }
        let converged = m >= k && (0..kk).all(|c| (bnorm * vecs[(m - 1, c)]).abs() < opts.tol * vals[c].abs().max(1.0));
        ritz = Some((vals, vecs));
        if converged || bnorm < 1e-14 || it + 1 == m_max {
            if !converged && bnorm >= 1e-14 && m < dim {
                return Err(Error::Convergence(format!("Lanczos did not converge in {m} iterations")));
            }
            break;
        }
        beta.push(bnorm);
        prev = Some(q.clone());
        q = w.iter().map(|x| x / bnorm).collect();
    }

    let (vals, vecs) = ritz.expect("at least one iteration");
    let kk = vals.len();
    let mut states = DMatrix::zeros(dim, kk);
    let mut residuals = Vec::with_capacity(kk);
    let norm = vals.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    for c in 0..kk {
        let mut v = vec![0.0; dim];
        for (j, b) in basis.iter().enumerate() {
            let s = vecs[(j, c)];
            v.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        fix_sign(&mut v);
        h.matvec(&v, &mut w);
        let r = w.iter().zip(&v).map(|(hx, x)| (hx - vals[c] * x).powi(2)).sum::<f64>().sqrt();
        residuals.push(r);
        states.set_column(c, &DVector::from_vec(v));
    }
    Ok(Spectrum { energies: vals, states, dim, residuals, norm })
}

pub fn lanczos_spec(spec: &ChainSpec, k: usize, opts: LanczosOptions) -> Result<Spectrum> {
    lanczos_lowest(&build_sparse(spec)?, k, opts)
}
