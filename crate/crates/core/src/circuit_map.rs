//! Single-mode quantization of a tunable rf-SQUID (coupler) or the z-mode of a
//! flux qubit, and extraction of its spin-model parameters.
//!
//! H = 4 E_C n² + E_L (φ - 2π f_z)²/2 - E_J(f_x) cos(φ + θ(f_x, d))
//!
//! solved in the harmonic-oscillator basis of the inductive term, centred at
//! φ = 2π f_z. The loop current is Î_z = (Φ0 / 2π L_z)(φ - 2π f_z).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{diagonalize, Levels, Spectrum};
use crate::error::{Error, Result};
use crate::experiments::{fit_sigmoid, SigmoidFit};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const E_CHARGE: f64 = 1.602_176_634e-19;
pub const PHI0: f64 = PLANCK / (2.0 * E_CHARGE);

pub const DEFAULT_BASIS: usize = 60;
pub const MAX_BASIS: usize = 320;
const CONVERGENCE_REL: f64 = 1e-6;

pub const REF_COUPLER_IC_NA: f64 = 240.0;
pub const REF_COUPLER_L_IN_PH: f64 = 378.0;
pub const REF_COUPLER_L_OUT_PH: f64 = 378.0;
pub const REF_COUPLER_L_X_PH: f64 = 31.4;
pub const REF_M_CC_PH: f64 = 64.2;
pub const REF_M_QC_PH: f64 = 62.6;
pub const REF_QUBIT_IC_LARGE_NA: f64 = 210.0;
pub const REF_QUBIT_IC_SMALL_NA: f64 = 90.0;
pub const REF_QUBIT_L_Z_PH: f64 = 690.0;

/// Island capacitances of the coupler (fF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IslandCapacitances {
    pub c_gr: f64,
    pub c_gl: f64,
    pub c_gz: f64,
    pub c_rl: f64,
    pub c_rz: f64,
    pub c_lz: f64,
}

impl IslandCapacitances {
    pub fn reference() -> Self {
        Self { c_gr: 32.7, c_gl: 25.8, c_gz: 49.5, c_rl: 6.54, c_rz: 7.22, c_lz: 7.19 }
    }

    /// Capacitance seen by the z island with every other node held at ground:
    /// C_eff = C_gz + C_rz + C_lz.
    pub fn z_mode_effective(&self) -> f64 {
        self.c_gz + self.c_rz + self.c_lz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitUnitParams {
    /// Total z-loop inductance (pH).
    pub l_z: f64,
    /// Effective shunt capacitance (fF).
    pub c_eff: f64,
    /// Critical current of one x-loop junction (nA).
    pub i_c: f64,
    /// x-loop junction asymmetry.
    #[serde(default)]
    pub d: f64,
    #[serde(default = "two")]
    pub n_junctions_x: u8,
}

fn two() -> u8 {
    2
}

impl CircuitUnitParams {
    /// Tunable coupler with the lumped values of the reference device.
    pub fn reference_coupler() -> Self {
        Self {
            l_z: REF_COUPLER_L_IN_PH + REF_COUPLER_L_OUT_PH,
            c_eff: IslandCapacitances::reference().z_mode_effective(),
            i_c: REF_COUPLER_IC_NA,
            d: 0.0,
            n_junctions_x: 2,
        }
    }

    /// Effective single-mode qubit: Δ ≈ 2.3 GHz near f_x = 0.29 and a
    /// minimum gap near 10 MHz at f_x = 0.
    pub fn effective_qubit() -> Self {
        Self { l_z: 6000.0, c_eff: 45.0, i_c: 55.0, d: 0.0, n_junctions_x: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [("l_z", self.l_z), ("c_eff", self.c_eff), ("i_c", self.i_c)];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidCircuit(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.d.is_finite() && self.d.abs() < 1.0) {
            return Err(Error::InvalidCircuit(format!("|d| must be < 1, got {}", self.d)));
        }
        if !(self.n_junctions_x == 1 || self.n_junctions_x == 2) {
            return Err(Error::InvalidCircuit(format!("n_junctions_x must be 1 or 2, got {}", self.n_junctions_x)));
        }
        Ok(())
    }

    /// Charging energy e²/2C (GHz).
    pub fn e_c(&self) -> f64 {
        E_CHARGE * E_CHARGE / (2.0 * self.c_eff * 1e-15) / PLANCK / 1e9
    }

    /// Inductive energy (Φ0/2π)²/L (GHz).
    pub fn e_l(&self) -> f64 {
        (PHI0 / (2.0 * PI)).powi(2) / (self.l_z * 1e-12) / PLANCK / 1e9
    }

    /// Single-junction Josephson energy I_c Φ0/2π (GHz).
    pub fn e_j0(&self) -> f64 {
        self.i_c * 1e-9 * PHI0 / (2.0 * PI) / PLANCK / 1e9
    }

    /// Effective junction (E_J, θ) of the x loop.
    pub fn junction(&self, f_x: f64) -> (f64, f64) {
        if self.n_junctions_x == 1 {
            return (self.e_j0(), 0.0);
        }
        let (s, c) = (PI * f_x.rem_euclid(1.0)).sin_cos();
        let amp = (c * c + self.d * self.d * s * s).sqrt();
        (2.0 * self.e_j0() * amp, (self.d * s).atan2(c))
    }

    /// Oscillator frequency √(8 E_C E_L) (GHz).
    pub fn plasma(&self) -> f64 {
        (8.0 * self.e_c() * self.e_l()).sqrt()
    }

    /// Zero-point phase spread (2 E_C/E_L)^{1/4}.
    pub fn zpf(&self) -> f64 {
        (2.0 * self.e_c() / self.e_l()).powf(0.25)
    }

    /// Φ0/(2π L_z) in nA.
    pub fn current_scale(&self) -> f64 {
        PHI0 / (2.0 * PI * self.l_z * 1e-12) * 1e9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxBias {
    pub f_z: f64,
    pub f_x: f64,
    pub branch_z: i64,
    pub branch_x: i64,
}

impl FluxBias {
    pub fn new(f_z: f64, f_x: f64) -> Self {
        Self { f_z: f_z.rem_euclid(1.0), f_x: f_x.rem_euclid(1.0), branch_z: f_z.floor() as i64, branch_x: f_x.floor() as i64 }
    }
}

/// ⟨m|cos(λX + φ0)|n⟩ with X = a + a†, exact in the truncated basis.
fn cos_matrix(nb: usize, lambda: f64, phi0: f64) -> DMatrix<f64> {
    let x = lambda * lambda;
    let damp = (-0.5 * x).exp();
    let (sp, cp) = phi0.sin_cos();
    let mut out = DMatrix::zeros(nb, nb);
    let mut c0 = 1.0;
    for k in 0..nb {
        if k > 0 {
            c0 *= lambda / (k as f64).sqrt();
        }
        let kf = k as f64;
        let mut c = c0;
        let (mut l_prev, mut l_cur) = (0.0, 1.0);
        for n in 0..(nb - k) {
            if n == 1 {
                l_prev = 1.0;
                l_cur = 1.0 + kf - x;
            } else if n > 1 {
                let nf = (n - 1) as f64;
                let next = ((2.0 * nf + 1.0 + kf - x) * l_cur - (nf + kf) * l_prev) / (nf + 1.0);
                l_prev = l_cur;
                l_cur = next;
            }
            if n > 0 {
                c *= ((n as f64) / ((n + k) as f64)).sqrt();
            }
            let mag = damp * c * l_cur;
            // i^k split into real and imaginary parts
            let v = match k % 4 {
                0 => cp * mag,
                1 => -sp * mag,
                2 => -cp * mag,
                _ => sp * mag,
            };
            let m = n + k;
            out[(m, n)] = v;
            out[(n, m)] = v;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct UnitSpectrum {
    pub spectrum: Spectrum,
    /// Loop-current operator in the eigenbasis (nA).
    pub current: DMatrix<f64>,
    pub basis_size: usize,
}

impl UnitSpectrum {
    pub fn gap(&self) -> f64 {
        self.spectrum.gap()
    }

    pub fn ground_energy(&self) -> f64 {
        self.spectrum.energies[0]
    }

    /// ⟨0|Î_z|0⟩ (nA).
    pub fn ground_current(&self) -> f64 {
        self.current[(0, 0)]
    }

    /// |⟨0|Î_z|1⟩| (nA).
    pub fn dipole(&self) -> f64 {
        self.current[(0, 1)].abs()
    }
}

/// Hamiltonian and current operator in the oscillator basis.
pub fn unit_matrices(params: &CircuitUnitParams, bias: FluxBias, nb: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    params.validate()?;
    if !(2..=MAX_BASIS).contains(&nb) {
        return Err(Error::InvalidCircuit(format!("basis size {nb} outside [2, {MAX_BASIS}]")));
    }
    let (ej, theta) = params.junction(bias.f_x);
    let w = params.plasma();
    let lam = params.zpf();
    let mut h = cos_matrix(nb, lam, 2.0 * PI * bias.f_z + theta) * (-ej);
    for n in 0..nb {
        h[(n, n)] += w * (n as f64 + 0.5);
    }
    let scale = params.current_scale() * lam;
    let mut i_op = DMatrix::zeros(nb, nb);
    for n in 1..nb {
        let v = scale * (n as f64).sqrt();
        i_op[(n, n - 1)] = v;
        i_op[(n - 1, n)] = v;
    }
    Ok((h, i_op))
}

/// Diagonalize at a fixed basis size.
pub fn quantize_unit_fixed(params: &CircuitUnitParams, bias: FluxBias, nb: usize) -> Result<UnitSpectrum> {
    let (h, i_op) = unit_matrices(params, bias, nb)?;
    let spectrum = diagonalize(&h, Levels::All)?;
    let current = spectrum.states.transpose() * i_op * &spectrum.states;
    Ok(UnitSpectrum { spectrum, current, basis_size: nb })
}

/// Diagonalize, doubling the basis until E1 - E0 moves by < 1e-6 relative.
pub fn quantize_unit(params: &CircuitUnitParams, bias: FluxBias, basis_size: usize) -> Result<UnitSpectrum> {
    if basis_size < 20 {
        return Err(Error::InvalidCircuit(format!("basis size {basis_size} < 20")));
    }
    let mut nb = basis_size;
    let mut cur = quantize_unit_fixed(params, bias, nb)?;
    while 2 * nb <= MAX_BASIS {
        let next = quantize_unit_fixed(params, bias, 2 * nb)?;
        let rel = (next.gap() - cur.gap()).abs() / next.gap().abs().max(1e-300);
        if rel < CONVERGENCE_REL {
            return Ok(cur);
        }
        nb *= 2;
        cur = next;
    }
    Err(Error::Convergence(format!("circuit gap not converged at basis cap {MAX_BASIS}")))
}

/// Smallest basis in the doubling ladder from `start` that meets the gap criterion at `bias`.
pub fn converged_basis(params: &CircuitUnitParams, bias: FluxBias, start: usize) -> Result<usize> {
    Ok(quantize_unit(params, bias, start)?.basis_size)
}

/// 2π L_z I_c,eff(f_x) / Φ0.
pub fn beta_c(params: &CircuitUnitParams, f_x: f64) -> f64 {
    let i_eff = if params.n_junctions_x == 1 {
        params.i_c
    } else {
        let (s, c) = (PI * f_x).sin_cos();
        2.0 * params.i_c * (c * c + params.d * params.d * s * s).sqrt()
    };
    2.0 * PI * params.l_z * 1e-12 * i_eff * 1e-9 / PHI0
}

/// Symmetric point of the potential: f_z = 1/2 - θ/2π.
pub fn nominal_symmetry_point(params: &CircuitUnitParams, f_x: f64) -> f64 {
    (0.5 - params.junction(f_x).1 / (2.0 * PI)).rem_euclid(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCharacter {
    pub f_x: f64,
    /// f_z where ⟨0|Î_z|0⟩ = 0.
    pub symmetry_fz: f64,
    /// E1 - E0 at the symmetry point (GHz).
    pub delta: f64,
    /// |⟨0|Î_z|1⟩| at the symmetry point (nA).
    pub persistent_current: f64,
    /// (f_z, ⟨0|Î_z|0⟩ in nA).
    pub iz_ground_curve: Vec<(f64, f64)>,
    pub beta_c: f64,
    /// Sigmoid midpoint slope of the ground current curve (nA/Φ0).
    pub d_iz_d_fz: f64,
    /// Central difference of ⟨Î_z⟩ at the symmetry point (nA/Φ0).
    pub d_iz_d_fz_local: f64,
    pub fit: Option<SigmoidFit>,
    pub basis_size: usize,
}

/// Evenly spaced f_z grid centred on 1/2.
pub fn fz_grid(half_span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - half_span + 2.0 * half_span * i as f64 / (n - 1) as f64).collect()
}

pub fn ground_current(params: &CircuitUnitParams, f_z: f64, f_x: f64, nb: usize) -> Result<f64> {
    Ok(quantize_unit_fixed(params, FluxBias::new(f_z, f_x), nb)?.ground_current())
}

pub fn ground_energy(params: &CircuitUnitParams, f_z: f64, f_x: f64, nb: usize) -> Result<f64> {
    Ok(quantize_unit_fixed(params, FluxBias::new(f_z, f_x), nb)?.ground_energy())
}

fn symmetry_point(params: &CircuitUnitParams, f_x: f64, curve: &[(f64, f64)], nb: usize) -> Result<f64> {
    let full_scale = curve.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let nominal = nominal_symmetry_point(params, f_x);
    if full_scale < 1e-6 {
        return Ok(nominal);
    }
    let bracket = curve.windows(2).find(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum());
    let Some(w) = bracket else {
        return Err(Error::NoBracket { lo: curve[0].0, hi: curve[curve.len() - 1].0 });
    };
    let (mut lo, mut hi) = (w[0].0, w[1].0);
    let mut ilo = w[0].1;
    if ilo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let im = ground_current(params, mid, f_x, nb)?;
        if im == 0.0 {
            return Ok(mid);
        }
        if im.signum() == ilo.signum() {
            lo = mid;
            ilo = im;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Δ, I_p, ground-current curve and susceptibility of one unit at `f_x`.
pub fn extract_character(params: &CircuitUnitParams, f_x: f64, f_z_grid: &[f64], basis_size: usize) -> Result<UnitCharacter> {
    if f_z_grid.len() < 5 {
        return Err(Error::InvalidCircuit("f_z grid needs at least 5 points".into()));
    }
    let nominal = nominal_symmetry_point(params, f_x);
    let (gmin, gmax) = f_z_grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(gmin < nominal && nominal < gmax) {
        return Err(Error::NoBracket { lo: gmin, hi: gmax });
    }
    let nb = converged_basis(params, FluxBias::new(nominal, f_x), basis_size)?;
    let curve = f_z_grid
        .iter()
        .map(|&fz| Ok((fz, ground_current(params, fz, f_x, nb)?)))
        .collect::<Result<Vec<_>>>()?;
    let fz0 = symmetry_point(params, f_x, &curve, nb)?;
    let at = quantize_unit_fixed(params, FluxBias::new(fz0, f_x), nb)?;
    let step = 1e-4;
    let local = (ground_current(params, fz0 + step, f_x, nb)? - ground_current(params, fz0 - step, f_x, nb)?) / (2.0 * step);
    let xs: Vec<f64> = curve.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.1).collect();
    let fit = fit_sigmoid(&xs, &ys).ok();
    let d_iz_d_fz = match &fit {
        Some(f) if f.converged => f.midpoint_slope,
        _ => local,
    };
    Ok(UnitCharacter {
        f_x,
        symmetry_fz: fz0,
        delta: at.gap(),
        persistent_current: at.dipole(),
        iz_ground_curve: curve,
        beta_c: beta_c(params, f_x),
        d_iz_d_fz,
        d_iz_d_fz_local: local,
        fit,
        basis_size: nb,
    })
}

/// Gap and dipole at the nominal symmetry point, without the f_z sweep.
pub fn quick_character(params: &CircuitUnitParams, f_x: f64, nb: usize) -> Result<(f64, f64)> {
    let u = quantize_unit_fixed(params, FluxBias::new(nominal_symmetry_point(params, f_x), f_x), nb)?;
    Ok((u.gap(), u.dipole()))
}

/// M·I_i·I_j/h in GHz (M in pH, currents in nA).
pub fn coupling_ghz(m_ph: f64, i_a_na: f64, i_b_na: f64) -> f64 {
    m_ph * 1e-12 * i_a_na * 1e-9 * i_b_na * 1e-9 / PLANCK / 1e9
}

pub fn spin_parameters_from_circuit(a: &UnitCharacter, b: &UnitCharacter, m_ph: f64) -> f64 {
    coupling_ghz(m_ph, a.persistent_current, b.persistent_current)
}

/// Linearization limit for the flux-to-energy map (Φ0).
pub const LINEAR_FLUX_LIMIT: f64 = 0.05;

/// ε = 2 I_p Φ0 δf_z / h in GHz.
pub fn flux_to_epsilon(i_p_na: f64, delta_f_z: f64) -> f64 {
    2.0 * i_p_na * 1e-9 * PHI0 * delta_f_z / PLANCK / 1e9
}

/// flux_to_epsilon plus a flag that is false outside the linear regime.
pub fn flux_to_epsilon_checked(i_p_na: f64, delta_f_z: f64) -> (f64, bool) {
    (flux_to_epsilon(i_p_na, delta_f_z), delta_f_z.abs() <= LINEAR_FLUX_LIMIT)
}

pub fn epsilon_to_flux(i_p_na: f64, epsilon: f64) -> f64 {
    epsilon / flux_to_epsilon(i_p_na, 1.0)
}

/// dΔ/df_x at the symmetry point by central difference (GHz/Φ0).
pub fn delta_sensitivity(params: &CircuitUnitParams, f_x: f64, nb: usize, step: f64) -> Result<f64> {
    let up = quick_character(params, f_x + step, nb)?.0;
    let dn = quick_character(params, f_x - step, nb)?.0;
    Ok((up - dn) / (2.0 * step))
}

/// f_x in [lo, hi] where the symmetry-point gap equals `target` (Δ increasing in f_x).
pub fn bias_for_delta(params: &CircuitUnitParams, target: f64, lo: f64, hi: f64, nb: usize) -> Result<f64> {
    let g = |f: f64| quick_character(params, f, nb).map(|c| c.0 - target);
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a)?, g(b)?);
    if ga.signum() == gb.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    let rising = ga < 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if (gm < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}
