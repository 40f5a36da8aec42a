use rayon::prelude::*;

use super::config::{NoiseMode, RunConfig};
use super::table::{col, Cell, Table};
use super::Subcommand;
use crate::circuit_map::{
    bias_for_delta, converged_basis, coupling_ghz, delta_sensitivity, extract_character, flux_to_epsilon, fz_grid, quick_character, CircuitUnitParams, FluxBias,
};
use crate::eigensolver::{diagonalize_spec, Levels};
use crate::error::{Error, Result};
use crate::experiments::{flux_grid, flux_propagation, j_eff_from_susceptibility, slope_uncertainty, spectral_splitting, susceptibility_curve, SYMMETRY_TOL};
use crate::hierarchy::{convergence_sweep, hierarchical_spectrum, GroupingPlan};
use crate::noise_mc::{lower_qubit_linewidth, rms_flux_offset, LoopSensitivity};
use crate::perturbation::effective_coupling;
use crate::spin_model::{ChainSpec, HomogeneousChain, Role};

pub(crate) fn dispatch(cmd: Subcommand, cfg: &RunConfig, seed: u64) -> Result<Vec<Table>> {
    match cmd {
        Subcommand::Spectrum => spectrum(cfg),
        Subcommand::CouplerCharacter => coupler_character(cfg),
        Subcommand::FluxPropagation => flux_propagation_cmd(cfg),
        Subcommand::Susceptibility => susceptibility(cfg, seed),
        Subcommand::JeffCompare => jeff_compare(cfg),
        Subcommand::Noise => noise(cfg, seed),
        Subcommand::HierarchyBench => hierarchy_bench(cfg),
    }
}

fn spectrum(cfg: &RunConfig) -> Result<Vec<Table>> {
    let s = &cfg.spectrum;
    let spec = s.chain.resolve()?;
    let levels = s.levels.map_or(Levels::All, Levels::Lowest);
    let sp = diagonalize_spec(&spec, levels)?;
    let mut t = Table::new(
        "spectrum",
        vec![
            col("level", "", "eigensolver::diagonalize"),
            col("energy", "GHz", "eigensolver::diagonalize"),
            col("block", "", "eigensolver::degenerate_blocks"),
            col("residual", "GHz", "eigensolver::diagonalize"),
        ],
    );
    for (b, r) in sp.degenerate_blocks().into_iter().enumerate() {
        for k in r {
            t.push(vec![k.into(), sp.energies[k].into(), b.into(), sp.residuals[k].into()]);
        }
    }
    Ok(vec![t])
}

/// Root of Δ·scale - J_cc in f_x between two bracketing points.
fn crossing(params: &CircuitUnitParams, m_cc: f64, scale: f64, lo: f64, hi: f64, nb: usize) -> Result<f64> {
    let g = |f: f64| quick_character(params, f, nb).map(|(d, ip)| scale * d - coupling_ghz(m_cc, ip, ip));
    let (mut a, mut b) = (lo, hi);
    let ga = g(a)?;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm.signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn coupler_character(cfg: &RunConfig) -> Result<Vec<Table>> {
    let s = &cfg.coupler_character;
    let params = s.unit.resolve()?;
    let fxs = s.f_x.values()?;
    let grid = fz_grid(s.fz_half_span, s.fz_points);
    let chars = fxs.par_iter().map(|&fx| extract_character(&params, fx, &grid, s.basis_size)).collect::<Result<Vec<_>>>()?;
    let p = "circuit_map::extract_character";
    let mut t = Table::new(
        "coupler_character",
        vec![
            col("f_x", "Phi0", "input"),
            col("delta_c", "GHz", p),
            col("delta_c_half", "GHz", p),
            col("i_p", "nA", p),
            col("j_cc", "GHz", "circuit_map::spin_parameters_from_circuit"),
            col("beta_c", "", "circuit_map::beta_c"),
            col("d_iz_d_fz", "nA/Phi0", p),
            col("d_iz_d_fz_local", "nA/Phi0", p),
            col("symmetry_fz", "Phi0", p),
            col("basis_size", "", "circuit_map::quantize_unit"),
        ],
    );
    let mut curves = Table::new("iz_curves", vec![col("f_x", "Phi0", "input"), col("f_z", "Phi0", "input"), col("iz_ground", "nA", p)]);
    for c in &chars {
        let j = coupling_ghz(s.m_cc, c.persistent_current, c.persistent_current);
        t.push(vec![
            c.f_x.into(),
            c.delta.into(),
            (0.5 * c.delta).into(),
            c.persistent_current.into(),
            j.into(),
            c.beta_c.into(),
            c.d_iz_d_fz.into(),
            c.d_iz_d_fz_local.into(),
            c.symmetry_fz.into(),
            c.basis_size.into(),
        ]);
        for &(fz, iz) in &c.iz_ground_curve {
            curves.push(vec![c.f_x.into(), fz.into(), iz.into()]);
        }
    }
    let mut cross = Table::new(
        "crossing",
        vec![
            col("criterion", "", "input"),
            col("f_x_star", "Phi0", "circuit_map::quick_character bisection"),
            col("beta_c", "", "circuit_map::beta_c"),
            col("delta_c", "GHz", "circuit_map::quick_character"),
            col("j_cc", "GHz", "circuit_map::coupling_ghz"),
        ],
    );
    for (label, scale) in [("delta_half_eq_jcc", 0.5), ("delta_eq_jcc", 1.0)] {
        let diff: Vec<f64> = chars.iter().map(|c| scale * c.delta - coupling_ghz(s.m_cc, c.persistent_current, c.persistent_current)).collect();
        let bracket = (0..chars.len().saturating_sub(1)).find(|&i| diff[i].signum() != diff[i + 1].signum());
        match bracket {
            Some(i) => {
                let nb = chars[i].basis_size.max(chars[i + 1].basis_size);
                let f = crossing(&params, s.m_cc, scale, chars[i].f_x, chars[i + 1].f_x, nb)?;
                let (d, ip) = quick_character(&params, f, nb)?;
                cross.push(vec![label.into(), f.into(), crate::circuit_map::beta_c(&params, f).into(), d.into(), coupling_ghz(s.m_cc, ip, ip).into()]);
            }
            None => cross.push(vec![label.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into()]),
        }
    }
    Ok(vec![t, curves, cross])
}

fn flux_propagation_cmd(cfg: &RunConfig) -> Result<Vec<Table>> {
    let s = &cfg.flux_propagation;
    let n = s.n_couplers;
    let source = s.source.unwrap_or(n - 1);
    if source >= n {
        return Err(Error::Config(format!("source {source} outside chain of {n}")));
    }
    let mut t = Table::new(
        "flux_signal",
        vec![
            col("ratio", "", "input"),
            col("source", "", "input"),
            col("target", "", "input"),
            col("distance", "", "input"),
            col("signal", "mPhi0", "experiments::flux_propagation"),
        ],
    );
    for &r in &s.ratios {
        let spec = ChainSpec::coupler_chain(n, 0.0, s.delta_c, r * s.delta_c / 2.0)?;
        let sig = flux_propagation(&spec, source, &vec![s.i_p; n], s.offset_mphi0 * 1e-3, SYMMETRY_TOL)?;
        for &(tgt, m) in &sig.magnitudes {
            t.push(vec![r.into(), source.into(), tgt.into(), tgt.abs_diff(source).into(), m.into()]);
        }
    }
    Ok(vec![t])
}

struct Setting {
    ratio: f64,
    f_x: f64,
    spec: ChainSpec,
    i_p: f64,
}

fn susceptibility(cfg: &RunConfig, seed: u64) -> Result<Vec<Table>> {
    let s = &cfg.susceptibility;
    let n = s.n_couplers;
    let source = s.source.unwrap_or(n - 1);
    if source >= n || s.target >= n {
        return Err(Error::Config(format!("source/target outside chain of {n}")));
    }
    let settings = match &s.f_x {
        None => s
            .ratios
            .iter()
            .map(|&r| Ok(Setting { ratio: r, f_x: f64::NAN, spec: ChainSpec::coupler_chain(n, 0.0, s.delta_c, r * s.delta_c / 2.0)?, i_p: s.i_p }))
            .collect::<Result<Vec<_>>>()?,
        Some(g) => {
            let params = s.unit.resolve()?;
            g.values()?
                .iter()
                .map(|&fx| {
                    let nb = converged_basis(&params, FluxBias::new(0.5, fx), s.basis_size)?;
                    let (d, ip) = quick_character(&params, fx, nb)?;
                    let j = coupling_ghz(s.m_cc, ip, ip);
                    Ok(Setting { ratio: j / (d / 2.0), f_x: fx, spec: ChainSpec::coupler_chain(n, 0.0, d, j)?, i_p: ip })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let grid = flux_grid(s.span_mphi0 * 1e-3, s.n_points);
    let mut slopes = Table::new(
        "slopes",
        vec![
            col("setting", "", "input"),
            col("ratio", "", "input"),
            col("f_x", "Phi0", "input"),
            col("slope", "", "experiments::susceptibility_curve"),
            col("slope_std", "", "experiments::slope_uncertainty"),
            col("a", "mPhi0", "experiments::fit_sigmoid"),
            col("b", "mPhi0", "experiments::fit_sigmoid"),
            col("x0", "mPhi0", "experiments::fit_sigmoid"),
            col("w", "mPhi0", "experiments::fit_sigmoid"),
            col("residual", "mPhi0", "experiments::fit_sigmoid"),
            col("converged", "", "experiments::fit_sigmoid"),
            col("resample_failures", "", "experiments::slope_uncertainty"),
        ],
    );
    let mut curves = Table::new(
        "response_curves",
        vec![
            col("setting", "", "input"),
            col("ratio", "", "input"),
            col("source_offset", "mPhi0", "input"),
            col("target_offset", "mPhi0", "experiments::effective_symmetry_point"),
            col("fit", "mPhi0", "experiments::fit_sigmoid"),
        ],
    );
    for (i, st) in settings.iter().enumerate() {
        let curve = susceptibility_curve(&st.spec, source, s.target, &grid, &vec![st.i_p; n], SYMMETRY_TOL)?;
        let f = curve.sigmoid_fit;
        let unc = slope_uncertainty(&curve.source_bias, &curve.target_symmetry_point, s.jitter_mphi0 * 1e-3, s.n_resamples, seed.wrapping_add(i as u64));
        let (std, failed) = match unc {
            Ok(u) => (u.std, u.n_failed),
            Err(_) => (f64::NAN, s.n_resamples),
        };
        slopes.push(vec![
            i.into(),
            st.ratio.into(),
            st.f_x.into(),
            curve.midpoint_slope.into(),
            std.into(),
            (f.a * 1e3).into(),
            (f.b * 1e3).into(),
            (f.x0 * 1e3).into(),
            (f.w * 1e3).into(),
            (f.residual_rms * 1e3).into(),
            f.converged.into(),
            failed.into(),
        ]);
        for (x, y) in curve.source_bias.iter().zip(&curve.target_symmetry_point) {
            curves.push(vec![i.into(), st.ratio.into(), (x * 1e3).into(), (y * 1e3).into(), (f.eval(*x) * 1e3).into()]);
        }
    }
    Ok(vec![slopes, curves])
}

/// Qubit bias and persistent current at a target transverse field.
pub fn qubit_operating_point(qubit: &CircuitUnitParams, delta_q: f64, basis: usize) -> Result<(f64, f64, usize)> {
    let nb = converged_basis(qubit, FluxBias::new(0.5, 0.3), basis)?;
    let fx = bias_for_delta(qubit, delta_q, 0.0, 0.45, nb)?;
    let (_, iq) = quick_character(qubit, fx, nb)?;
    Ok((fx, iq, nb))
}

fn jeff_compare(cfg: &RunConfig) -> Result<Vec<Table>> {
    let s = &cfg.jeff_compare;
    let coupler = s.coupler.resolve()?;
    let qubit = s.qubit.resolve()?;
    let n = s.n_couplers;
    let (_, iq, _) = qubit_operating_point(&qubit, s.delta_q, s.basis_size)?;
    let grid = fz_grid(s.fz_half_span, 41);
    let flux = flux_grid(s.span_mphi0 * 1e-3, s.n_points);
    let rows = s
        .f_x
        .values()?
        .iter()
        .map(|&fx| {
            let ch = extract_character(&coupler, fx, &grid, s.basis_size)?;
            let (dc, ip) = (ch.delta, ch.persistent_current);
            let jcc = coupling_ghz(s.m_cc, ip, ip);
            let jqc = coupling_ghz(s.m_qc, iq, ip);
            let chain = ChainSpec::coupler_chain(n, 0.0, dc, jcc)?;
            let curve = susceptibility_curve(&chain, n - 1, 0, &flux, &vec![ip; n], SYMMETRY_TOL)?;
            let slope = curve.midpoint_slope;
            let j_a = j_eff_from_susceptibility(slope, ch.d_iz_d_fz, iq, iq, s.m_qc, s.m_qc);
            let device = ChainSpec::homogeneous(&HomogeneousChain { n_couplers: n, eps_c: 0.0, delta_c: dc, j_cc: jcc, eps_q: 0.0, delta_q: s.delta_q, j_qc: jqc })?;
            let (half, overlap) = match spectral_splitting(&device) {
                Ok(sp) => (0.5 * sp.splitting, sp.min_overlap),
                Err(Error::LevelIdentification(ov)) => (f64::NAN, ov),
                Err(e) => return Err(e),
            };
            let ec = effective_coupling(&chain, 0, n - 1, jqc, jqc)?;
            let mags = [j_a.abs(), half.abs(), ec.j_eff_exact_sum.abs()];
            let spread = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / mags.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let weak = slope.abs() < 0.5;
            Ok(vec![
                Cell::from(fx),
                dc.into(),
                ip.into(),
                jcc.into(),
                (jcc / (dc / 2.0)).into(),
                jqc.into(),
                ec.omega_c.into(),
                slope.into(),
                ch.d_iz_d_fz.into(),
                j_a.into(),
                half.into(),
                ec.j_eff_exact_sum.into(),
                ec.j_eff_gap_approx.into(),
                spread.into(),
                weak.into(),
                (spread.is_finite() && spread <= s.tolerance).into(),
                overlap.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "jeff_compare",
        vec![
            col("f_x", "Phi0", "input"),
            col("delta_c", "GHz", "circuit_map::extract_character"),
            col("i_p", "nA", "circuit_map::extract_character"),
            col("j_cc", "GHz", "circuit_map::spin_parameters_from_circuit"),
            col("ratio", "", "j_cc/(delta_c/2)"),
            col("j_qc", "GHz", "circuit_map::spin_parameters_from_circuit"),
            col("omega_c", "GHz", "perturbation::effective_coupling"),
            col("slope", "", "experiments::susceptibility_curve"),
            col("d_iz_d_fz", "nA/Phi0", "circuit_map::extract_character"),
            col("j_eff_susceptibility", "GHz", "experiments::j_eff_from_susceptibility"),
            col("half_splitting", "GHz", "experiments::spectral_splitting"),
            col("j_eff_sum", "GHz", "perturbation::j_eff_second_order_sum"),
            col("j_eff_gap", "GHz", "perturbation::j_eff_gap_approx"),
            col("spread", "", "max/min - 1 of the three magnitudes"),
            col("weak", "", "|slope| < 0.5"),
            col("agree", "", "spread <= tolerance"),
            col("qubit_overlap", "", "experiments::qubit_like_levels"),
        ],
    );
    for r in rows {
        t.push(r);
    }
    Ok(vec![t])
}

struct NoiseSetting {
    ratio: f64,
    f_x: f64,
    spec: ChainSpec,
    sens: Vec<LoopSensitivity>,
}

fn noise(cfg: &RunConfig, seed: u64) -> Result<Vec<Table>> {
    let s = &cfg.noise;
    let n = s.n_couplers;
    let coupler = s.coupler.resolve()?;
    let qubit = s.qubit.resolve()?;
    let (fq, iq, nbq) = qubit_operating_point(&qubit, s.delta_q, s.basis_size)?;
    let q_sens = LoopSensitivity { d_eps_d_fz: flux_to_epsilon(iq, 1.0), d_delta_d_fx: delta_sensitivity(&qubit, fq, nbq, 1e-4)? };
    let build = |dc: f64, jcc: f64, jqc: f64, c_sens: LoopSensitivity| -> Result<(ChainSpec, Vec<LoopSensitivity>)> {
        let spec = ChainSpec::homogeneous(&HomogeneousChain { n_couplers: n, eps_c: 0.0, delta_c: dc, j_cc: jcc, eps_q: 0.0, delta_q: s.delta_q, j_qc: jqc })?;
        let sens = spec.sites.iter().map(|site| if site.label.role == Role::Qubit { q_sens } else { c_sens }).collect();
        Ok((spec, sens))
    };
    let coupler_point = |fx: f64| -> Result<(f64, f64, LoopSensitivity)> {
        let nb = converged_basis(&coupler, FluxBias::new(0.5, fx), s.basis_size)?;
        let (d, ip) = quick_character(&coupler, fx, nb)?;
        Ok((d, ip, LoopSensitivity { d_eps_d_fz: flux_to_epsilon(ip, 1.0), d_delta_d_fx: delta_sensitivity(&coupler, fx, nb, 1e-4)? }))
    };
    let settings = match s.mode {
        NoiseMode::Ratio => {
            let (_, ip, c_sens) = coupler_point(s.coupler_f_x)?;
            let jqc = s.j_qc.unwrap_or_else(|| coupling_ghz(s.m_qc, iq, ip));
            s.ratios
                .iter()
                .map(|&r| {
                    let (spec, sens) = build(s.delta_c, r * s.delta_c / 2.0, jqc, c_sens)?;
                    Ok(NoiseSetting { ratio: r, f_x: f64::NAN, spec, sens })
                })
                .collect::<Result<Vec<_>>>()?
        }
        NoiseMode::Circuit => s
            .f_x
            .values()?
            .iter()
            .map(|&fx| {
                let (d, ip, c_sens) = coupler_point(fx)?;
                let jcc = coupling_ghz(s.m_cc, ip, ip);
                let jqc = s.j_qc.unwrap_or_else(|| coupling_ghz(s.m_qc, iq, ip));
                let (spec, sens) = build(d, jcc, jqc, c_sens)?;
                Ok(NoiseSetting { ratio: jcc / (d / 2.0), f_x: fx, spec, sens })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let sigma = rms_flux_offset(&s.flux_noise)?;
    let mut lw = Table::new(
        "linewidths",
        vec![
            col("setting", "", "input"),
            col("ratio", "", "input"),
            col("f_x", "Phi0", "input"),
            col("j_qc", "GHz", "circuit_map::spin_parameters_from_circuit"),
            col("sigma_flux", "uPhi0", "noise_mc::rms_flux_offset"),
            col("lower_qubit_level", "", "experiments::qubit_like_levels"),
            col("frequency", "GHz", "eigensolver::diagonalize"),
            col("linewidth", "GHz", "noise_mc::noisy_spectrum_ensemble"),
            col("ambiguous_runs", "", "noise_mc::noisy_spectrum_ensemble"),
        ],
    );
    let mut levels = Table::new(
        "noise_levels",
        vec![
            col("setting", "", "input"),
            col("level", "", "input"),
            col("noiseless", "GHz", "eigensolver::diagonalize"),
            col("mean", "GHz", "noise_mc::noisy_spectrum_ensemble"),
            col("std", "GHz", "noise_mc::noisy_spectrum_ensemble"),
        ],
    );
    for (i, st) in settings.iter().enumerate() {
        let res = lower_qubit_linewidth(&st.spec, &st.sens, &s.flux_noise, s.n_runs, s.n_levels, seed)?;
        let jqc = st.spec.couplings.edges[0].j;
        lw.push(vec![
            i.into(),
            st.ratio.into(),
            st.f_x.into(),
            jqc.into(),
            sigma.into(),
            res.level.into(),
            res.frequency.into(),
            res.linewidth.into(),
            res.stats.ambiguous_runs.len().into(),
        ]);
        for l in 0..res.stats.std.len() {
            levels.push(vec![i.into(), l.into(), res.stats.noiseless[l].into(), res.stats.mean[l].into(), res.stats.std[l].into()]);
        }
    }
    Ok(vec![lw, levels])
}

/// Sets every coupler-coupler edge to ratio·Δ_c/2.
pub fn with_ratio(spec: &ChainSpec, ratio: f64) -> ChainSpec {
    let mut s = spec.clone();
    let couplers = s.indices_with_role(Role::Coupler);
    let Some(&c0) = couplers.first() else { return s };
    let dc = s.sites[c0].delta;
    for e in &mut s.couplings.edges {
        if couplers.contains(&e.a) && couplers.contains(&e.b) {
            e.j = ratio * dc / 2.0;
        }
    }
    s
}

fn hierarchy_bench(cfg: &RunConfig) -> Result<Vec<Table>> {
    let s = &cfg.hierarchy_bench;
    let mut spec = s.chain.resolve()?;
    if let Some(r) = s.ratio {
        spec = with_ratio(&spec, r);
    }
    GroupingPlan::full(s.groups.clone()).validate(spec.n_sites()).map_err(|e| Error::Config(e.to_string()))?;
    let table = convergence_sweep(&spec, &s.groups, &s.k_ladder, s.n_levels, s.tolerance)?;
    let mut t = Table::new(
        "convergence",
        vec![
            col("k", "", "input"),
            col("dim", "", "hierarchy::assemble_composite"),
            col("max_error", "GHz", "hierarchy::convergence_sweep"),
            col("ground_error", "GHz", "hierarchy::convergence_sweep"),
            col("variational_ok", "", "hierarchy::convergence_sweep"),
        ],
    );
    for r in &table.rows {
        t.push(vec![r.k.into(), r.dim.into(), r.max_error.into(), r.ground_error.into(), r.variational_ok.into()]);
    }
    let full = hierarchical_spectrum(&spec, &GroupingPlan::full(s.groups.clone()))?;
    let exact = diagonalize_spec(&spec, Levels::All)?;
    let full_rel = full.energies.iter().zip(&exact.energies).map(|(a, b)| (a - b).abs() / b.abs().max(1e-300)).fold(0.0, f64::max);
    let mut summary = Table::new(
        "summary",
        vec![
            col("n_levels", "", "input"),
            col("tolerance", "GHz", "input"),
            col("k_meeting_tolerance", "", "hierarchy::convergence_sweep"),
            col("full_k_max_rel_error", "", "hierarchy::hierarchical_spectrum"),
            col("variational_violations", "", "hierarchy::convergence_sweep"),
        ],
    );
    let k_meet = table.k_meeting_tolerance.map_or(Cell::Text("none".into()), Cell::from);
    let violations = table.rows.iter().filter(|r| !r.variational_ok).count();
    summary.push(vec![s.n_levels.into(), s.tolerance.into(), k_meet, full_rel.into(), violations.into()]);
    Ok(vec![t, summary])
}
