//! Qubit-coupler-qubit transverse-field Ising Hamiltonian in the σ^z product basis.
//!
//! H = Σ_i (ε_i/2 σ^z_i + Δ_i/2 σ^x_i) + Σ_edges J σ^z_a σ^z_b
//!
//! Site 0 is the most significant bit of the basis index; bit value 0 is
//! σ^z = +1. J > 0 is antiferromagnetic.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default site cap for dense construction (2^14 = 16384).
pub const DEFAULT_N_CAP: usize = 14;
/// Site cap for the matrix-free sparse representation.
pub const SPARSE_N_CAP: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Qubit,
    Coupler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteLabel {
    pub role: Role,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSite {
    pub epsilon: f64,
    pub delta: f64,
    pub label: SiteLabel,
}

impl SpinSite {
    pub fn new(epsilon: f64, delta: f64, role: Role, index: usize) -> Result<Self> {
        let s = Self { epsilon, delta, label: SiteLabel { role, index } };
        s.validate()?;
        Ok(s)
    }

    pub fn qubit(epsilon: f64, delta: f64, index: usize) -> Result<Self> {
        Self::new(epsilon, delta, Role::Qubit, index)
    }

    pub fn coupler(epsilon: f64, delta: f64, index: usize) -> Result<Self> {
        Self::new(epsilon, delta, Role::Coupler, index)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidModel(format!("non-finite epsilon {}", self.epsilon)));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::InvalidModel(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub j: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingGraph {
    pub edges: Vec<Edge>,
}

impl CouplingGraph {
    pub fn new(edges: Vec<Edge>) -> Self {
        Self { edges }
    }

    pub fn from_triples(triples: &[(usize, usize, f64)]) -> Self {
        Self { edges: triples.iter().map(|&(a, b, j)| Edge { a, b, j }).collect() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.a >= n || e.b >= n {
                return Err(Error::InvalidModel(format!("edge ({}, {}) outside {} sites", e.a, e.b, n)));
            }
            if e.a == e.b {
                return Err(Error::InvalidModel(format!("self-edge on site {}", e.a)));
            }
            if !e.j.is_finite() {
                return Err(Error::InvalidModel(format!("non-finite coupling on ({}, {})", e.a, e.b)));
            }
            let key = (e.a.min(e.b), e.a.max(e.b));
            if !seen.insert(key) {
                return Err(Error::InvalidModel(format!("duplicate edge ({}, {})", key.0, key.1)));
            }
        }
        Ok(())
    }

    /// Sum of |J| over edges touching `site`.
    pub fn degree_weight(&self, site: usize) -> f64 {
        self.edges.iter().filter(|e| e.a == site || e.b == site).map(|e| e.j.abs()).sum()
    }
}

/// Parameters of the homogeneous device: qubit, n couplers, qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousChain {
    pub n_couplers: usize,
    pub eps_c: f64,
    pub delta_c: f64,
    pub j_cc: f64,
    pub eps_q: f64,
    pub delta_q: f64,
    pub j_qc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub sites: Vec<SpinSite>,
    pub couplings: CouplingGraph,
}

impl ChainSpec {
    pub fn new(sites: Vec<SpinSite>, couplings: CouplingGraph) -> Result<Self> {
        let s = Self { sites, couplings };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::InvalidModel("no sites".into()));
        }
        for s in &self.sites {
            s.validate()?;
        }
        self.couplings.validate(self.sites.len())
    }

    /// Couplers only: a uniform open chain.
    pub fn coupler_chain(n: usize, eps: f64, delta: f64, j: f64) -> Result<Self> {
        let sites = (0..n).map(|i| SpinSite::coupler(eps, delta, i + 1)).collect::<Result<Vec<_>>>()?;
        let edges = (0..n.saturating_sub(1)).map(|i| Edge { a: i, b: i + 1, j }).collect();
        Self::new(sites, CouplingGraph::new(edges))
    }

    /// q1 - c1 - ... - cn - q2 with uniform coupler parameters.
    pub fn homogeneous(p: &HomogeneousChain) -> Result<Self> {
        let n = p.n_couplers;
        if n == 0 {
            return Err(Error::InvalidModel("homogeneous chain needs at least one coupler".into()));
        }
        let mut sites = vec![SpinSite::qubit(p.eps_q, p.delta_q, 1)?];
        for i in 0..n {
            sites.push(SpinSite::coupler(p.eps_c, p.delta_c, i + 1)?);
        }
        sites.push(SpinSite::qubit(p.eps_q, p.delta_q, 2)?);
        let mut edges = vec![Edge { a: 0, b: 1, j: p.j_qc }];
        for i in 1..n {
            edges.push(Edge { a: i, b: i + 1, j: p.j_cc });
        }
        edges.push(Edge { a: n, b: n + 1, j: p.j_qc });
        Self::new(sites, CouplingGraph::new(edges))
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.sites.len()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.epsilon).collect()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.delta).collect()
    }

    pub fn with_epsilon(&self, site: usize, eps: f64) -> Self {
        let mut s = self.clone();
        s.sites[site].epsilon = eps;
        s
    }

    pub fn with_coupling(&self, a: usize, b: usize, j: f64) -> Self {
        let mut s = self.clone();
        for e in &mut s.couplings.edges {
            if (e.a == a && e.b == b) || (e.a == b && e.b == a) {
                e.j = j;
            }
        }
        s
    }

    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.sites.len()).filter(|&i| self.sites[i].label.role == role).collect()
    }

    /// Restriction to a subset of sites (kept in the given order) with only the
    /// edges internal to that subset, relabelled.
    pub fn subsystem(&self, keep: &[usize]) -> Result<Self> {
        let sites = keep.iter().map(|&i| self.sites[i].clone()).collect();
        let pos = |i: usize| keep.iter().position(|&k| k == i);
        let edges = self
            .couplings
            .edges
            .iter()
            .filter_map(|e| match (pos(e.a), pos(e.b)) {
                (Some(a), Some(b)) => Some(Edge { a, b, j: e.j }),
                _ => None,
            })
            .collect();
        Self::new(sites, CouplingGraph::new(edges))
    }

    /// The coupler-only chain with the qubits removed.
    pub fn couplers_only(&self) -> Result<Self> {
        self.subsystem(&self.indices_with_role(Role::Coupler))
    }
}

#[inline]
fn bit(state: usize, site: usize, n: usize) -> usize {
    (state >> (n - 1 - site)) & 1
}

#[inline]
fn mask(site: usize, n: usize) -> usize {
    1usize << (n - 1 - site)
}

/// Diagonal of σ^z_site in the product basis.
pub fn sz_diag(site: usize, n: usize) -> Vec<f64> {
    (0..1usize << n).map(|b| if bit(b, site, n) == 0 { 1.0 } else { -1.0 }).collect()
}

fn diagonal(spec: &ChainSpec) -> Vec<f64> {
    let n = spec.n_sites();
    (0..spec.dim())
        .map(|b| {
            let z = |i: usize| if bit(b, i, n) == 0 { 1.0 } else { -1.0 };
            let mut d = 0.0;
            for (i, s) in spec.sites.iter().enumerate() {
                d += 0.5 * s.epsilon * z(i);
            }
            for e in &spec.couplings.edges {
                d += e.j * z(e.a) * z(e.b);
            }
            d
        })
        .collect()
}

pub fn build_hamiltonian(spec: &ChainSpec) -> Result<DMatrix<f64>> {
    build_hamiltonian_capped(spec, DEFAULT_N_CAP)
}

pub fn build_hamiltonian_capped(spec: &ChainSpec, cap: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n_sites();
    if n > cap {
        return Err(Error::DimensionCap { n, cap });
    }
    let dim = spec.dim();
    let mut h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diagonal(spec)));
    for (i, s) in spec.sites.iter().enumerate() {
        let half = 0.5 * s.delta;
        if half == 0.0 {
            continue;
        }
        let m = mask(i, n);
        for b in 0..dim {
            h[(b, b ^ m)] += half;
        }
    }
    Ok(h)
}

/// Matrix-free form: diagonal plus one σ^x flip per site.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub n_sites: usize,
    pub diag: Vec<f64>,
    pub flips: Vec<(usize, f64)>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.dim() * (1 + self.flips.len())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (b, yb) in y.iter_mut().enumerate() {
            let mut acc = self.diag[b] * x[b];
            for &(m, amp) in &self.flips {
                acc += amp * x[b ^ m];
            }
            *yb = acc;
        }
    }
}

pub fn build_sparse(spec: &ChainSpec) -> Result<SparseHamiltonian> {
    spec.validate()?;
    let n = spec.n_sites();
    if n > SPARSE_N_CAP {
        return Err(Error::DimensionCap { n, cap: SPARSE_N_CAP });
    }
    let flips = spec
        .sites
        .iter()
        .enumerate()
        .filter(|(_, s)| s.delta != 0.0)
        .map(|(i, s)| (mask(i, n), 0.5 * s.delta))
        .collect();
    Ok(SparseHamiltonian { n_sites: n, diag: diagonal(spec), flips })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

fn check_site(site: usize, n: usize) -> Result<()> {
    if site >= n {
        return Err(Error::IndexOutOfRange { index: site, n });
    }
    if n > DEFAULT_N_CAP {
        return Err(Error::DimensionCap { n, cap: DEFAULT_N_CAP });
    }
    Ok(())
}

/// σ^axis on `site`, identity elsewhere.
pub fn embed_pauli(site: usize, axis: Axis, n: usize) -> Result<DMatrix<Complex<f64>>> {
    check_site(site, n)?;
    let dim = 1usize << n;
    let m = mask(site, n);
    let mut out = DMatrix::from_element(dim, dim, Complex::new(0.0, 0.0));
    for b in 0..dim {
        let up = bit(b, site, n) == 0;
        match axis {
            Axis::Z => out[(b, b)] = Complex::new(if up { 1.0 } else { -1.0 }, 0.0),
            Axis::X => out[(b ^ m, b)] = Complex::new(1.0, 0.0),
            // σ^y|0> = i|1>, σ^y|1> = -i|0>
            Axis::Y => out[(b ^ m, b)] = Complex::new(0.0, if up { 1.0 } else { -1.0 }),
        }
    }
    Ok(out)
}

/// Real embedding for the x and z axes.
pub fn embed_pauli_real(site: usize, axis: Axis, n: usize) -> Result<DMatrix<f64>> {
    check_site(site, n)?;
    let dim = 1usize << n;
    let m = mask(site, n);
    let mut out = DMatrix::zeros(dim, dim);
    match axis {
        Axis::Z => {
            for (b, z) in sz_diag(site, n).into_iter().enumerate() {
                out[(b, b)] = z;
            }
        }
        Axis::X => {
            for b in 0..dim {
                out[(b ^ m, b)] = 1.0;
            }
        }
        Axis::Y => return Err(Error::InvalidModel("sigma^y has no real embedding".into())),
    }
    Ok(out)
}
