//! Quasistatic 1/f^α flux noise: RMS offsets, seeded Gaussian sampling and
//! ensemble statistics of the device spectrum.
//!
//! One-sided PSD S(f) = A² (f / 1 Hz)^{-α}, so σ² = ∫ S(f) df over the band.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolver::{diagonalize, diagonalize_spec, Levels};
use crate::error::{Error, Result};
use crate::experiments::qubit_like_levels;
use crate::spin_model::{build_hamiltonian, ChainSpec};

pub const DEFAULT_AMPLITUDE: f64 = 3.0;
pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_F_LOW: f64 = 1e-3;
pub const DEFAULT_F_HIGH: f64 = 1e6;
pub const DEFAULT_RUNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// μΦ0/√Hz at 1 Hz.
    pub amplitude: f64,
    pub alpha: f64,
    pub f_low: f64,
    pub f_high: f64,
    /// Per-loop multipliers on σ; empty means 1 everywhere.
    #[serde(default)]
    pub geometry: Vec<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { amplitude: DEFAULT_AMPLITUDE, alpha: DEFAULT_ALPHA, f_low: DEFAULT_F_LOW, f_high: DEFAULT_F_HIGH, geometry: Vec::new() }
    }
}

impl NoiseSpec {
    pub fn new(amplitude: f64, alpha: f64, f_low: f64, f_high: f64) -> Self {
        Self { amplitude, alpha, f_low, f_high, geometry: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidNoise(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidNoise(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.f_low > 0.0 && self.f_low < self.f_high && self.f_high.is_finite()) {
            return Err(Error::InvalidNoise(format!("invalid band [{}, {}]", self.f_low, self.f_high)));
        }
        if self.geometry.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidNoise("geometry factors must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn geometry_factor(&self, loop_index: usize) -> f64 {
        self.geometry.get(loop_index).copied().unwrap_or(1.0)
    }

    pub fn with_amplitude(&self, a: f64) -> Self {
        Self { amplitude: a, ..self.clone() }
    }
}

/// RMS offset in μΦ0.
pub fn rms_flux_offset(noise: &NoiseSpec) -> Result<f64> {
    noise.validate()?;
    let (a, al, lo, hi) = (noise.amplitude, noise.alpha, noise.f_low, noise.f_high);
    let integral = if (al - 1.0).abs() < 1e-12 { (hi / lo).ln() } else { (hi.powf(1.0 - al) - lo.powf(1.0 - al)) / (1.0 - al) };
    Ok(a * integral.sqrt())
}

/// Independent zero-mean Gaussian offsets (μΦ0), σ scaled per loop.
pub fn sample_offsets(noise: &NoiseSpec, n_loops: usize, seed: u64) -> Result<Vec<f64>> {
    let sigma = rms_flux_offset(noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw(&mut rng, sigma, noise, n_loops))
}

fn draw(rng: &mut ChaCha8Rng, sigma: f64, noise: &NoiseSpec, n_loops: usize) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n_loops)
        .map(|i| {
            let z: f64 = unit.sample(rng);
            let s = sigma * noise.geometry_factor(i);
            if s == 0.0 {
                0.0
            } else {
                s * z
            }
        })
        .collect()
}

/// Flux-to-parameter sensitivities of one unit (GHz per Φ0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSensitivity {
    /// dε/df_z = 2 I_p Φ0 / h.
    pub d_eps_d_fz: f64,
    /// dΔ/df_x.
    pub d_delta_d_fx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEnsembleStats {
    /// Noiseless transition frequencies E_k - E_0 of the tracked levels.
    pub noiseless: Vec<f64>,
    pub mean: Vec<f64>,
    /// Linewidth proxy per level.
    pub std: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Runs where some tracked level had overlap < 0.5.
    pub ambiguous_runs: Vec<usize>,
}

/// Per-run substream seed derived from the master seed.
pub fn run_seed(master: u64, run: usize) -> u64 {
    let mut z = master ^ (run as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Flux offsets for one run: loops 0..N are z loops, N..2N are x loops.
pub fn perturbed_spec(base: &ChainSpec, sens: &[LoopSensitivity], offsets_uphi0: &[f64]) -> Result<ChainSpec> {
    let n = base.n_sites();
    let mut s = base.clone();
    for i in 0..n {
        let fz = offsets_uphi0[i] * 1e-6;
        let fx = offsets_uphi0[n + i] * 1e-6;
        s.sites[i].epsilon += sens[i].d_eps_d_fz * fz;
        s.sites[i].delta = (s.sites[i].delta + sens[i].d_delta_d_fx * fx).max(0.0);
    }
    Ok(s)
}

/// Quasistatic ensemble: re-diagonalize with frozen offsets per run and
/// track the lowest `n_levels` levels by overlap with the noiseless basis.
pub fn noisy_spectrum_ensemble(
    base: &ChainSpec,
    sens: &[LoopSensitivity],
    noise: &NoiseSpec,
    n_runs: usize,
    n_levels: usize,
    seed: u64,
) -> Result<NoiseEnsembleStats> {
    let n = base.n_sites();
    if sens.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sens.len() });
    }
    if n_runs == 0 {
        return Err(Error::InvalidNoise("n_runs must be >= 1".into()));
    }
    let sigma = rms_flux_offset(noise)?;
    let sp0 = diagonalize_spec(base, Levels::All)?;
    let k = n_levels.min(sp0.len());
    let e0 = sp0.energies[0];
    let noiseless: Vec<f64> = (0..k).map(|l| sp0.energies[l] - e0).collect();
    let v0 = sp0.states.columns(0, k).into_owned();

    let runs = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, r));
            let offs = draw(&mut rng, sigma, noise, 2 * n);
            let spec = perturbed_spec(base, sens, &offs)?;
            let sp = diagonalize(&build_hamiltonian(&spec)?, Levels::All)?;
            let ov: DMatrix<f64> = sp.states.transpose() * &v0;
            let mut freqs = Vec::with_capacity(k);
            let mut ambiguous = false;
            for l in 0..k {
                let (mut best, mut bw) = (0, -1.0);
                for m in 0..sp.len() {
                    let w = ov[(m, l)].powi(2);
                    if w > bw + 1e-14 {
                        best = m;
                        bw = w;
                    }
                }
                if bw < 0.5 {
                    ambiguous = true;
                }
                freqs.push(sp.energies[best] - sp.energies[0]);
            }
            Ok((freqs, ambiguous))
        })
        .collect::<Result<Vec<_>>>()?;

    // shifted by the first run so identical samples give exactly zero spread
    let first = runs[0].0.clone();
    let mut shift = vec![0.0; k];
    for (f, _) in &runs {
        for l in 0..k {
            shift[l] += f[l] - first[l];
        }
    }
    shift.iter_mut().for_each(|m| *m /= n_runs as f64);
    let mean: Vec<f64> = (0..k).map(|l| first[l] + shift[l]).collect();
    let mut std = vec![0.0; k];
    if n_runs > 1 {
        for (f, _) in &runs {
            for l in 0..k {
                std[l] += (f[l] - first[l] - shift[l]).powi(2);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / (n_runs - 1) as f64).sqrt());
    }
    let ambiguous_runs = runs.iter().enumerate().filter(|(_, r)| r.1).map(|(i, _)| i).collect();
    Ok(NoiseEnsembleStats { noiseless, mean, std, n_samples: n_runs, seed, ambiguous_runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linewidth {
    pub level: usize,
    pub frequency: f64,
    pub linewidth: f64,
    pub stats: NoiseEnsembleStats,
}

/// Linewidth of the lower qubit-like level of a q-chain-q device; at least
/// `n_levels` levels are tracked.
pub fn lower_qubit_linewidth(base: &ChainSpec, sens: &[LoopSensitivity], noise: &NoiseSpec, n_runs: usize, n_levels: usize, seed: u64) -> Result<Linewidth> {
    let sp0 = diagonalize_spec(base, Levels::All)?;
    let (lower, _, _) = qubit_like_levels(base, &sp0)?;
    let stats = noisy_spectrum_ensemble(base, sens, noise, n_runs, n_levels.max(lower + 1), seed)?;
    Ok(Linewidth { level: lower, frequency: stats.noiseless[lower], linewidth: stats.std[lower], stats })
}
