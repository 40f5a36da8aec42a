//! Virtual flux experiments on the spin model: effective symmetry points,
//! flux propagation, sigmoid susceptibility curves, and the two-qubit
//! splitting.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit_map::{epsilon_to_flux, flux_to_epsilon, PHI0, PLANCK};
use crate::eigensolver::{diagonalize, diagonalize_spec, sz_expectation, Levels, Spectrum, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::spin_model::{build_hamiltonian, ChainSpec, Role};

/// Bisection tolerance on ε (GHz).
pub const SYMMETRY_TOL: f64 = 1e-6;
/// Default source offset for propagation (Φ0).
pub const SIGNAL_OFFSET: f64 = 0.020;
/// Default sweep resolution.
pub const DEFAULT_GRID_POINTS: usize = 41;
/// Default flux jitter for slope resampling (Φ0).
pub const DEFAULT_JITTER: f64 = 1.2e-3;

const FIT_MAX_ITER: usize = 500;
const FIT_STEP_TOL: f64 = 1e-8;
/// Bound on |w| in units of the x span.
const FIT_W_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub w: f64,
    /// b/(4w).
    pub midpoint_slope: f64,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SigmoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        sigmoid(x, self.a, self.b, self.x0, self.w)
    }
}

pub fn sigmoid(x: f64, a: f64, b: f64, x0: f64, w: f64) -> f64 {
    a + b / (1.0 + (-(x - x0) / w).exp())
}

fn cost(xs: &[f64], ys: &[f64], p: &[f64; 4]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (sigmoid(x, p[0], p[1], p[2], p[3]) - y).powi(2)).sum()
}

fn solve4(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().cholesky().map(|c| c.solve(rhs))
}

/// Damped least-squares fit of S(x) = a + b/(1 + exp(-(x - x0)/w)).
pub fn fit_sigmoid(xs: &[f64], ys: &[f64]) -> Result<SigmoidFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let span = xmax - xmin;
    let range = ymax - ymin;
    if span <= 0.0 {
        return Err(Error::Fit("zero x span".into()));
    }
    let xmid = 0.5 * (xmin + xmax);
    if range <= 1e-14 * ymax.abs().max(ymin.abs()).max(1e-300) || range == 0.0 {
        return Ok(SigmoidFit { a: ymin, b: 0.0, x0: xmid, w: span / 10.0, midpoint_slope: 0.0, residual_rms: 0.0, iterations: 0, converged: true });
    }
    // unit-scaled problem
    let sx: Vec<f64> = xs.iter().map(|x| (x - xmid) / span).collect();
    let sy: Vec<f64> = ys.iter().map(|y| (y - ymin) / range).collect();
    let mid = 0.5;
    let mut x0 = 0.0;
    for i in 0..sx.len() - 1 {
        let (ya, yb) = (sy[i] - mid, sy[i + 1] - mid);
        if ya == 0.0 {
            x0 = sx[i];
            break;
        }
        if ya * yb < 0.0 {
            x0 = sx[i] + (sx[i + 1] - sx[i]) * ya / (ya - yb);
            break;
        }
    }
    let decreasing = sy[sy.len() - 1] < sy[0];
    let mut p = [0.0, 1.0, x0, if decreasing { -0.1 } else { 0.1 }];
    let mut c = cost(&sx, &sy, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut pinned = false;
    let mut iterations = 0;
    let m = sx.len();
    while iterations < FIT_MAX_ITER {
        iterations += 1;
        let mut jac = DMatrix::zeros(m, 4);
        let mut r = DVector::zeros(m);
        for (i, (&x, &y)) in sx.iter().zip(&sy).enumerate() {
            let u = (x - p[2]) / p[3];
            let s = 1.0 / (1.0 + (-u).exp());
            let ds = s * (1.0 - s);
            jac[(i, 0)] = 1.0;
            jac[(i, 1)] = s;
            jac[(i, 2)] = -p[1] * ds / p[3];
            jac[(i, 3)] = -p[1] * ds * u / p[3];
            r[i] = p[0] + p[1] * s - y;
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e14 {
            let mut a = jtj.clone();
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = solve4(&a, &(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let mut hit = false;
            if trial[3].abs() > FIT_W_BOUND {
                trial[3] = FIT_W_BOUND * trial[3].signum();
                hit = true;
            }
            if trial[3].abs() < 1e-9 {
                trial[3] = 1e-9 * if p[3] < 0.0 { -1.0 } else { 1.0 };
            }
            let ct = cost(&sx, &sy, &trial);
            if ct.is_finite() && ct <= c {
                let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dn = (0..4).map(|k| (trial[k] - p[k]).powi(2)).sum::<f64>().sqrt();
                p = trial;
                c = ct;
                pinned = hit;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if dn < FIT_STEP_TOL * (pn + 1e-12) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step at any damping: stationary point
            converged = grad.norm() < 1e-10 * (1.0 + c.sqrt());
            break;
        }
    }
    if pinned || (p[3].abs() >= FIT_W_BOUND * (1.0 - 1e-12)) {
        converged = false;
    }
    let a = ymin + range * p[0];
    let b = range * p[1];
    let x0 = xmid + span * p[2];
    let w = span * p[3];
    let residual_rms = (c / m as f64).sqrt() * range;
    Ok(SigmoidFit { a, b, x0, w, midpoint_slope: b / (4.0 * w), residual_rms, iterations, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeUncertainty {
    pub std: f64,
    pub mean: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Standard deviation of midpoint slopes over Gaussian-jittered refits.
pub fn slope_uncertainty(xs: &[f64], ys: &[f64], jitter_sigma: f64, n_resamples: usize, seed: u64) -> Result<SlopeUncertainty> {
    if jitter_sigma < 0.0 || !jitter_sigma.is_finite() {
        return Err(Error::Fit(format!("invalid jitter {jitter_sigma}")));
    }
    if jitter_sigma == 0.0 {
        let f = fit_sigmoid(xs, ys)?;
        return Ok(if f.converged {
            SlopeUncertainty { std: 0.0, mean: f.midpoint_slope, n_ok: n_resamples, n_failed: 0 }
        } else {
            SlopeUncertainty { std: f64::NAN, mean: f64::NAN, n_ok: 0, n_failed: n_resamples }
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, jitter_sigma).map_err(|e| Error::Fit(e.to_string()))?;
    let mut slopes = Vec::with_capacity(n_resamples);
    let mut failed = 0;
    for _ in 0..n_resamples {
        let yj: Vec<f64> = ys.iter().map(|&y| y + normal.sample(&mut rng)).collect();
        match fit_sigmoid(xs, &yj) {
            Ok(f) if f.converged => slopes.push(f.midpoint_slope),
            _ => failed += 1,
        }
    }
    let n = slopes.len();
    if n == 0 {
        return Err(Error::Fit(format!("all {n_resamples} resampled fits failed")));
    }
    let mean = slopes.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Ok(SlopeUncertainty { std: var.sqrt(), mean, n_ok: n, n_failed: failed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasUnit {
    Ghz,
    Phi0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub unit: BiasUnit,
    pub source_bias: Vec<f64>,
    pub target_symmetry_point: Vec<f64>,
    pub sigmoid_fit: SigmoidFit,
    pub midpoint_slope: f64,
    pub fit_residual: f64,
}

impl ResponseCurve {
    pub fn from_data(unit: BiasUnit, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 7 {
            return Err(Error::Fit(format!("response curve needs >= 7 paired points, got {}/{}", xs.len(), ys.len())));
        }
        let fit = fit_sigmoid(&xs, &ys)?;
        Ok(Self { unit, source_bias: xs, target_symmetry_point: ys, midpoint_slope: fit.midpoint_slope, fit_residual: fit.residual_rms, sigmoid_fit: fit })
    }
}

fn ground_sz(spec: &ChainSpec, site: usize) -> Result<(f64, f64)> {
    let sp = diagonalize_spec(spec, Levels::Lowest(2))?;
    Ok((sz_expectation(&sp.ground(), site)?, sp.gap()))
}

/// Default search half-width for a target's effective symmetry point.
pub fn default_interval(spec: &ChainSpec, target: usize) -> (f64, f64) {
    let hw = 4.0 * spec.couplings.degree_weight(target) + spec.sites[target].delta + 1.0;
    (-hw, hw)
}

/// Root of ε_target ↦ <σ^z_target> with all other sites fixed.
pub fn effective_symmetry_point(spec: &ChainSpec, target: usize, interval: (f64, f64), tol: f64) -> Result<f64> {
    let n = spec.n_sites();
    if target >= n {
        return Err(Error::IndexOutOfRange { index: target, n });
    }
    let f = |e: f64| ground_sz(&spec.with_epsilon(target, e), target);
    let (mut lo, mut hi) = interval;
    let mut flo = f(lo)?.0;
    let mut fhi = f(hi)?.0;
    let mut widen = 0;
    while flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        // fallback scan on a widened interval
        widen += 1;
        if widen > 3 {
            return Err(Error::NoBracket { lo, hi });
        }
        let c = 0.5 * (lo + hi);
        let hw = 2.0 * (hi - lo);
        let pts: Vec<f64> = (0..=40).map(|i| c - hw + 2.0 * hw * i as f64 / 40.0).collect();
        let vals = pts.iter().map(|&e| f(e).map(|v| v.0)).collect::<Result<Vec<_>>>()?;
        if let Some(i) = (0..40).find(|&i| vals[i].signum() != vals[i + 1].signum()) {
            lo = pts[i];
            hi = pts[i + 1];
            flo = vals[i];
            fhi = vals[i + 1];
        } else {
            lo = pts[0];
            hi = pts[40];
            flo = vals[0];
            fhi = vals[40];
        }
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?.0;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let gap = f(root)?.1;
    if gap <= DEGENERACY_TOL {
        return Err(Error::DegenerateGround(gap));
    }
    Ok(root)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSignal {
    pub source: usize,
    pub offset: f64,
    /// (target site, |shift| in mΦ0).
    pub magnitudes: Vec<(usize, f64)>,
}

impl FluxSignal {
    pub fn at(&self, site: usize) -> Option<f64> {
        self.magnitudes.iter().find(|m| m.0 == site).map(|m| m.1)
    }
}

/// Shift of every other unit's symmetry point between source at ±offset.
pub fn flux_propagation(spec: &ChainSpec, source: usize, i_p: &[f64], offset: f64, tol: f64) -> Result<FluxSignal> {
    let n = spec.n_sites();
    if i_p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: i_p.len() });
    }
    if source >= n {
        return Err(Error::IndexOutOfRange { index: source, n });
    }
    let base = spec.sites[source].epsilon;
    let de = flux_to_epsilon(i_p[source], offset);
    let plus = spec.with_epsilon(source, base + de);
    let minus = spec.with_epsilon(source, base - de);
    let targets: Vec<usize> = (0..n).filter(|&t| t != source).collect();
    let magnitudes = targets
        .par_iter()
        .map(|&t| {
            let e_p = effective_symmetry_point(&plus, t, default_interval(&plus, t), tol)?;
            let e_m = effective_symmetry_point(&minus, t, default_interval(&minus, t), tol)?;
            Ok((t, 1e3 * epsilon_to_flux(i_p[t], e_p - e_m).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FluxSignal { source, offset, magnitudes })
}

pub fn flux_grid(half_span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -half_span + 2.0 * half_span * i as f64 / (n - 1) as f64).collect()
}

/// Target symmetry point (Φ0 offset) against source flux offset (Φ0).
pub fn susceptibility_curve(spec: &ChainSpec, source: usize, target: usize, source_offsets: &[f64], i_p: &[f64], tol: f64) -> Result<ResponseCurve> {
    let n = spec.n_sites();
    if i_p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: i_p.len() });
    }
    if source_offsets.len() < 21 {
        return Err(Error::Fit(format!("susceptibility grid needs >= 21 points, got {}", source_offsets.len())));
    }
    let base_s = spec.sites[source].epsilon;
    let base_t = spec.sites[target].epsilon;
    let ys = source_offsets
        .par_iter()
        .map(|&df| {
            let s = spec.with_epsilon(source, base_s + flux_to_epsilon(i_p[source], df));
            let e = effective_symmetry_point(&s, target, default_interval(&s, target), tol)?;
            Ok(epsilon_to_flux(i_p[target], e - base_t))
        })
        .collect::<Result<Vec<_>>>()?;
    // a response inside the bisection resolution is no response
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let resolution = 2.0 * epsilon_to_flux(i_p[target], tol).abs();
    let ys = if hi - lo <= resolution { vec![0.5 * (lo + hi); ys.len()] } else { ys };
    ResponseCurve::from_data(BiasUnit::Phi0, source_offsets.to_vec(), ys)
}

/// χ_c1c7 (M_q1c1 I_q1)(M_q2c7 I_q2) in GHz.
pub fn j_eff_from_susceptibility(slope: f64, d_iz_d_fz: f64, i_q1: f64, i_q2: f64, m_q1c1: f64, m_q2c7: f64) -> f64 {
    let chi = slope * d_iz_d_fz * 1e-9 / PHI0;
    chi * (m_q1c1 * 1e-12 * i_q1 * 1e-9) * (m_q2c7 * 1e-12 * i_q2 * 1e-9) / PLANCK / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub splitting: f64,
    pub lower: usize,
    pub upper: usize,
    pub min_overlap: f64,
}

/// Decoupled one-qubit-excited doublet |e, g_chain, g> and |g, g_chain, e>.
pub fn decoupled_doublet(spec: &ChainSpec) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = spec.n_sites();
    if n < 3 || spec.sites[0].label.role != Role::Qubit || spec.sites[n - 1].label.role != Role::Qubit {
        return Err(Error::InvalidModel("expected qubits at both chain ends".into()));
    }
    let chain = spec.subsystem(&(1..n - 1).collect::<Vec<_>>())?;
    let csp = diagonalize(&build_hamiltonian(&chain)?, Levels::Lowest(2))?;
    csp.require_nondegenerate_ground(DEGENERACY_TOL)?;
    let g = csp.ground();
    let qubit_state = |site: usize, excited: bool| -> Result<DVector<f64>> {
        let sp = diagonalize_spec(&spec.subsystem(&[site])?, Levels::All)?;
        Ok(sp.state(if excited { 1 } else { 0 }))
    };
    let kron3 = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>| {
        let ab = a.kronecker(b);
        ab.kronecker(c)
    };
    let d1 = kron3(&qubit_state(0, true)?, &g, &qubit_state(n - 1, false)?);
    let d2 = kron3(&qubit_state(0, false)?, &g, &qubit_state(n - 1, true)?);
    Ok((d1, d2))
}

/// The two levels with the largest weight on the decoupled doublet, ascending.
pub fn qubit_like_levels(spec: &ChainSpec, sp: &Spectrum) -> Result<(usize, usize, f64)> {
    let (d1, d2) = decoupled_doublet(spec)?;
    let proj1 = sp.states.transpose() * &d1;
    let proj2 = sp.states.transpose() * &d2;
    let w: Vec<f64> = (0..sp.len()).map(|k| proj1[k].powi(2) + proj2[k].powi(2)).collect();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let (i, j) = (order[0].min(order[1]), order[0].max(order[1]));
    let min_ov = w[i].min(w[j]);
    if min_ov < 0.5 {
        return Err(Error::LevelIdentification(min_ov));
    }
    Ok((i, j, min_ov))
}

/// Separation of the two qubit-like levels of the full device (≈ 2 J_eff).
pub fn spectral_splitting(spec: &ChainSpec) -> Result<Splitting> {
    let n = spec.n_sites();
    let (q1, q2) = (&spec.sites[0], &spec.sites[n - 1]);
    if q1.epsilon != 0.0 || q2.epsilon != 0.0 || (q1.delta - q2.delta).abs() > 1e-12 {
        return Err(Error::InvalidModel("splitting requires ε_q = 0 and equal Δ_q on both qubits".into()));
    }
    let sp = diagonalize_spec(spec, Levels::All)?;
    let (lower, upper, min_overlap) = qubit_like_levels(spec, &sp)?;
    Ok(Splitting { splitting: sp.energies[upper] - sp.energies[lower], lower, upper, min_overlap })
}
