//! Grouped truncation: diagonalize contiguous site groups, keep the lowest k
//! levels of each, and couple the groups through projected σ^z operators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{diagonalize, diagonalize_spec, Levels, Spectrum};
use crate::error::{Error, Result};
use crate::spin_model::{build_hamiltonian, sz_diag, ChainSpec, Edge};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    pub groups: Vec<Vec<usize>>,
    pub kept: Vec<usize>,
}

impl GroupingPlan {
    pub fn new(groups: Vec<Vec<usize>>, kept: Vec<usize>) -> Self {
        Self { groups, kept }
    }

    /// q1 | c1 c2 | c3 c4 c5 | c6 c7 | q2 for the nine-site device.
    pub fn device_groups() -> Vec<Vec<usize>> {
        vec![vec![0], vec![1, 2], vec![3, 4, 5], vec![6, 7], vec![8]]
    }

    /// Full dimension in every group.
    pub fn full(groups: Vec<Vec<usize>>) -> Self {
        let kept = groups.iter().map(|g| 1usize << g.len()).collect();
        Self { groups, kept }
    }

    /// Same k in every group, capped at the group dimension.
    pub fn uniform(groups: Vec<Vec<usize>>, k: usize) -> Self {
        let kept = groups.iter().map(|g| k.min(1usize << g.len())).collect();
        Self { groups, kept }
    }

    pub fn composite_dim(&self) -> usize {
        self.kept.iter().product()
    }

    pub fn is_full(&self) -> bool {
        self.groups.iter().zip(&self.kept).all(|(g, &k)| k == 1usize << g.len())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.groups.len() != self.kept.len() {
            return Err(Error::InvalidPlan(format!("{} groups but {} kept counts", self.groups.len(), self.kept.len())));
        }
        let mut next = 0;
        for (g, &k) in self.groups.iter().zip(&self.kept) {
            if g.is_empty() {
                return Err(Error::InvalidPlan("empty group".into()));
            }
            let mut sorted = g.clone();
            sorted.sort_unstable();
            if sorted != (next..next + g.len()).collect::<Vec<_>>() {
                return Err(Error::InvalidPlan(format!("group {g:?} is not the contiguous block starting at site {next}")));
            }
            next += g.len();
            if k == 0 || k > 1usize << g.len() {
                return Err(Error::InvalidPlan(format!("k = {k} outside [1, {}] for group {g:?}", 1usize << g.len())));
            }
        }
        if next != n {
            return Err(Error::InvalidPlan(format!("plan covers {next} of {n} sites")));
        }
        Ok(())
    }

    fn group_of(&self, site: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&site))
    }
}

#[derive(Debug, Clone)]
pub struct ReducedGroup {
    pub sites: Vec<usize>,
    pub energies: Vec<f64>,
    /// (global site, σ^z projected into the kept basis).
    pub z_ops: Vec<(usize, DMatrix<f64>)>,
}

impl ReducedGroup {
    pub fn k(&self) -> usize {
        self.energies.len()
    }

    fn z_of(&self, site: usize) -> Option<&DMatrix<f64>> {
        self.z_ops.iter().find(|(s, _)| *s == site).map(|(_, m)| m)
    }
}

/// Edges whose endpoints lie in different groups.
pub fn inter_group_edges(spec: &ChainSpec, plan: &GroupingPlan) -> Vec<Edge> {
    spec.couplings.edges.iter().filter(|e| plan.group_of(e.a) != plan.group_of(e.b)).cloned().collect()
}

pub fn group_reduce(spec: &ChainSpec, plan: &GroupingPlan) -> Result<Vec<ReducedGroup>> {
    plan.validate(spec.n_sites())?;
    let inter = inter_group_edges(spec, plan);
    plan.groups
        .par_iter()
        .zip(plan.kept.par_iter())
        .map(|(g, &k)| {
            let sub = spec.subsystem(g)?;
            let sp = diagonalize(&build_hamiltonian(&sub)?, Levels::Lowest(k))?;
            let boundary: Vec<usize> = g.iter().copied().filter(|s| inter.iter().any(|e| e.a == *s || e.b == *s)).collect();
            let z_ops = boundary
                .iter()
                .map(|&s| {
                    let local = g.iter().position(|&x| x == s).expect("site in group");
                    let z = DVector::from_vec(sz_diag(local, g.len()));
                    let zv = DMatrix::from_fn(sp.dim, k, |r, c| z[r] * sp.states[(r, c)]);
                    (s, sp.states.transpose() * zv)
                })
                .collect();
            Ok(ReducedGroup { sites: g.clone(), energies: sp.energies, z_ops })
        })
        .collect()
}

pub fn assemble_composite(groups: &[ReducedGroup], edges: &[Edge]) -> Result<DMatrix<f64>> {
    let ks: Vec<usize> = groups.iter().map(|g| g.k()).collect();
    let dim: usize = ks.iter().product();
    let mut strides = vec![1usize; ks.len()];
    for g in (0..ks.len().saturating_sub(1)).rev() {
        strides[g] = strides[g + 1] * ks[g + 1];
    }
    let locate = |site: usize| -> Result<(usize, &DMatrix<f64>)> {
        groups
            .iter()
            .enumerate()
            .find_map(|(i, g)| g.z_of(site).map(|z| (i, z)))
            .ok_or_else(|| Error::InvalidPlan(format!("no projected operator for site {site}")))
    };
    let terms = edges
        .iter()
        .map(|e| {
            let (ga, za) = locate(e.a)?;
            let (gb, zb) = locate(e.b)?;
            if ga == gb {
                return Err(Error::InvalidPlan(format!("edge ({}, {}) is internal to a group", e.a, e.b)));
            }
            Ok((e.j, ga, za, gb, zb))
        })
        .collect::<Result<Vec<_>>>()?;
    let digit = |idx: usize, g: usize| (idx / strides[g]) % ks[g];
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] += groups.iter().enumerate().map(|(g, grp)| grp.energies[digit(i, g)]).sum::<f64>();
        for &(j, ga, za, gb, zb) in &terms {
            let (da, db) = (digit(i, ga), digit(i, gb));
            let rest = i - da * strides[ga] - db * strides[gb];
            for ja in 0..ks[ga] {
                let va = za[(ja, da)];
                if va == 0.0 {
                    continue;
                }
                for jb in 0..ks[gb] {
                    let vb = zb[(jb, db)];
                    if vb == 0.0 {
                        continue;
                    }
                    h[(rest + ja * strides[ga] + jb * strides[gb], i)] += j * va * vb;
                }
            }
        }
    }
    // exact symmetry against round-off in the accumulation order
    let hs = (&h + h.transpose()) * 0.5;
    Ok(hs)
}

pub fn hierarchical_spectrum(spec: &ChainSpec, plan: &GroupingPlan) -> Result<Spectrum> {
    let groups = group_reduce(spec, plan)?;
    let h = assemble_composite(&groups, &inter_group_edges(spec, plan))?;
    diagonalize(&h, Levels::All)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub dim: usize,
    /// max |E_hier - E_exact| over the lowest levels compared (GHz).
    pub max_error: f64,
    /// E0_hier - E0_exact (GHz).
    pub ground_error: f64,
    pub variational_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub n_levels: usize,
    pub tolerance: f64,
    /// Smallest k whose error meets the tolerance.
    pub k_meeting_tolerance: Option<usize>,
}

/// Slack on the variational comparison for round-off.
pub const VARIATIONAL_SLACK: f64 = 1e-9;

pub fn convergence_sweep(spec: &ChainSpec, groups: &[Vec<usize>], k_ladder: &[usize], n_levels: usize, tolerance: f64) -> Result<ConvergenceTable> {
    let exact = diagonalize_spec(spec, Levels::All)?;
    let mut rows = Vec::with_capacity(k_ladder.len());
    for &k in k_ladder {
        let plan = GroupingPlan::uniform(groups.to_vec(), k);
        let hs = hierarchical_spectrum(spec, &plan)?;
        let m = n_levels.min(hs.len());
        let max_error = (0..m).map(|l| (hs.energies[l] - exact.energies[l]).abs()).fold(0.0, f64::max);
        let ground_error = hs.energies[0] - exact.energies[0];
        let slack = VARIATIONAL_SLACK * exact.energies[0].abs().max(1.0);
        rows.push(ConvergenceRow { k, dim: plan.composite_dim(), max_error, ground_error, variational_ok: ground_error >= -slack });
    }
    let k_meeting_tolerance = rows.iter().filter(|r| r.max_error <= tolerance && r.dim >= n_levels).map(|r| r.k).min();
    Ok(ConvergenceTable { rows, n_levels, tolerance, k_meeting_tolerance })
}
