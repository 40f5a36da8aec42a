//! Run configuration (TOML, schema version 1) and built-in fixtures.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit_map::{CircuitUnitParams, DEFAULT_BASIS, REF_M_CC_PH, REF_M_QC_PH};
use crate::error::{Error, Result};
use crate::noise_mc::NoiseSpec;
use crate::spin_model::{ChainSpec, CouplingGraph, Edge, HomogeneousChain, Role, SpinSite};

pub const SCHEMA_VERSION: u32 = 1;

pub const FIXTURE_COUPLER: &str = "sm-table-1-coupler";
pub const FIXTURE_QUBIT: &str = "sm-table-1-qubit";
pub const FIXTURE_CHAIN: &str = "paper-chain-homogeneous";
pub const FIXTURE_TWO_SITE: &str = "two-site-trivial";

/// Homogeneous device used by the spin-only experiments.
pub fn reference_chain() -> HomogeneousChain {
    HomogeneousChain { n_couplers: 7, eps_c: 0.0, delta_c: 5.0, j_cc: 0.25, eps_q: 0.0, delta_q: 2.0, j_qc: 0.25 }
}

pub fn chain_fixture(name: &str) -> Result<ChainSpec> {
    match name {
        FIXTURE_CHAIN => ChainSpec::homogeneous(&reference_chain()),
        FIXTURE_TWO_SITE => ChainSpec::coupler_chain(2, 0.0, 0.0, 1.0),
        other => Err(Error::Config(format!("unknown chain fixture '{other}'"))),
    }
}

pub fn unit_fixture(name: &str) -> Result<CircuitUnitParams> {
    match name {
        FIXTURE_COUPLER => Ok(CircuitUnitParams::reference_coupler()),
        FIXTURE_QUBIT => Ok(CircuitUnitParams::effective_qubit()),
        other => Err(Error::Config(format!("unknown circuit fixture '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(RangeGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::Values(v) if !v.is_empty() => Ok(v.clone()),
            Grid::Values(_) => Err(Error::Config("empty grid".into())),
            Grid::Range(r) => {
                if r.n == 0 {
                    return Err(Error::Config("grid needs n >= 1".into()));
                }
                if r.n == 1 {
                    return Ok(vec![r.start]);
                }
                Ok((0..r.n).map(|i| r.start + (r.stop - r.start) * i as f64 / (r.n - 1) as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub a: usize,
    pub b: usize,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitChain {
    pub sites: Vec<SiteConfig>,
    #[serde(default)]
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousConfig {
    pub n_couplers: usize,
    #[serde(default)]
    pub eps_c: f64,
    pub delta_c: f64,
    pub j_cc: f64,
    #[serde(default)]
    pub eps_q: f64,
    pub delta_q: f64,
    pub j_qc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainSource {
    Fixture(String),
    Homogeneous(HomogeneousConfig),
    Explicit(ExplicitChain),
}

impl ChainSource {
    pub fn resolve(&self) -> Result<ChainSpec> {
        let spec = match self {
            ChainSource::Fixture(name) => chain_fixture(name),
            ChainSource::Homogeneous(h) => ChainSpec::homogeneous(&HomogeneousChain {
                n_couplers: h.n_couplers,
                eps_c: h.eps_c,
                delta_c: h.delta_c,
                j_cc: h.j_cc,
                eps_q: h.eps_q,
                delta_q: h.delta_q,
                j_qc: h.j_qc,
            }),
            ChainSource::Explicit(e) => {
                let mut counts = [0usize; 2];
                let sites = e
                    .sites
                    .iter()
                    .map(|s| {
                        let slot = if s.role == Role::Qubit { 0 } else { 1 };
                        counts[slot] += 1;
                        SpinSite::new(s.epsilon, s.delta, s.role, counts[slot])
                    })
                    .collect::<Result<Vec<_>>>()?;
                ChainSpec::new(sites, CouplingGraph::new(e.edges.iter().map(|x| Edge { a: x.a, b: x.b, j: x.j }).collect()))
            }
        };
        spec.map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitSource {
    Fixture(String),
    Explicit(CircuitUnitParams),
}

impl UnitSource {
    pub fn resolve(&self) -> Result<CircuitUnitParams> {
        let p = match self {
            UnitSource::Fixture(name) => unit_fixture(name)?,
            UnitSource::Explicit(p) => *p,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }
}

fn fixture_chain() -> ChainSource {
    ChainSource::Fixture(FIXTURE_CHAIN.into())
}
fn fixture_coupler() -> UnitSource {
    UnitSource::Fixture(FIXTURE_COUPLER.into())
}
fn fixture_qubit() -> UnitSource {
    UnitSource::Fixture(FIXTURE_QUBIT.into())
}
fn basis() -> usize {
    DEFAULT_BASIS
}
fn m_cc() -> f64 {
    REF_M_CC_PH
}
fn m_qc() -> f64 {
    REF_M_QC_PH
}
fn seven() -> usize {
    7
}
fn delta_c() -> f64 {
    5.0
}
fn i_p_chain() -> f64 {
    180.0
}
fn points() -> usize {
    41
}
fn span() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "fixture_chain")]
    pub chain: ChainSource,
    #[serde(default)]
    pub levels: Option<usize>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { chain: fixture_chain(), levels: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerCharacterSection {
    #[serde(default = "fixture_coupler")]
    pub unit: UnitSource,
    #[serde(default = "CouplerCharacterSection::default_fx")]
    pub f_x: Grid,
    #[serde(default = "CouplerCharacterSection::default_half_span")]
    pub fz_half_span: f64,
    #[serde(default = "points")]
    pub fz_points: usize,
    #[serde(default = "basis")]
    pub basis_size: usize,
    #[serde(default = "m_cc")]
    pub m_cc: f64,
}

impl CouplerCharacterSection {
    fn default_fx() -> Grid {
        Grid::Range(RangeGrid { start: 0.10, stop: 0.30, n: 21 })
    }
    fn default_half_span() -> f64 {
        0.02
    }
}

impl Default for CouplerCharacterSection {
    fn default() -> Self {
        Self { unit: fixture_coupler(), f_x: Self::default_fx(), fz_half_span: 0.02, fz_points: 41, basis_size: DEFAULT_BASIS, m_cc: REF_M_CC_PH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxPropagationSection {
    #[serde(default = "seven")]
    pub n_couplers: usize,
    #[serde(default = "delta_c")]
    pub delta_c: f64,
    /// Persistent current used for flux/energy conversion (nA).
    #[serde(default = "i_p_chain")]
    pub i_p: f64,
    #[serde(default = "FluxPropagationSection::default_ratios")]
    pub ratios: Vec<f64>,
    /// Source site; defaults to the last coupler.
    #[serde(default)]
    pub source: Option<usize>,
    #[serde(default = "span")]
    pub offset_mphi0: f64,
}

impl FluxPropagationSection {
    fn default_ratios() -> Vec<f64> {
        vec![0.2, 0.5, 1.0, 2.0]
    }
}

impl Default for FluxPropagationSection {
    fn default() -> Self {
        Self { n_couplers: 7, delta_c: 5.0, i_p: 180.0, ratios: Self::default_ratios(), source: None, offset_mphi0: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SusceptibilitySection {
    #[serde(default = "seven")]
    pub n_couplers: usize,
    #[serde(default = "delta_c")]
    pub delta_c: f64,
    #[serde(default = "i_p_chain")]
    pub i_p: f64,
    #[serde(default = "SusceptibilitySection::default_ratios")]
    pub ratios: Vec<f64>,
    /// When set, the chain is mapped from the coupler circuit at each f_x instead.
    #[serde(default)]
    pub f_x: Option<Grid>,
    #[serde(default = "fixture_coupler")]
    pub unit: UnitSource,
    #[serde(default = "m_cc")]
    pub m_cc: f64,
    #[serde(default = "basis")]
    pub basis_size: usize,
    #[serde(default)]
    pub source: Option<usize>,
    #[serde(default)]
    pub target: usize,
    #[serde(default = "points")]
    pub n_points: usize,
    #[serde(default = "span")]
    pub span_mphi0: f64,
    #[serde(default = "SusceptibilitySection::default_jitter")]
    pub jitter_mphi0: f64,
    #[serde(default = "SusceptibilitySection::default_resamples")]
    pub n_resamples: usize,
}

impl SusceptibilitySection {
    fn default_ratios() -> Vec<f64> {
        vec![0.2, 0.5, 1.0, 1.5, 2.0]
    }
    fn default_jitter() -> f64 {
        1.2
    }
    fn default_resamples() -> usize {
        200
    }
}

impl Default for SusceptibilitySection {
    fn default() -> Self {
        Self {
            n_couplers: 7,
            delta_c: 5.0,
            i_p: 180.0,
            ratios: Self::default_ratios(),
            f_x: None,
            unit: fixture_coupler(),
            m_cc: REF_M_CC_PH,
            basis_size: DEFAULT_BASIS,
            source: None,
            target: 0,
            n_points: 41,
            span_mphi0: 20.0,
            jitter_mphi0: 1.2,
            n_resamples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JeffCompareSection {
    #[serde(default = "fixture_coupler")]
    pub coupler: UnitSource,
    #[serde(default = "fixture_qubit")]
    pub qubit: UnitSource,
    #[serde(default = "JeffCompareSection::default_fx")]
    pub f_x: Grid,
    /// Qubit transverse field at the operating point (GHz).
    #[serde(default = "JeffCompareSection::default_delta_q")]
    pub delta_q: f64,
    #[serde(default = "m_cc")]
    pub m_cc: f64,
    #[serde(default = "m_qc")]
    pub m_qc: f64,
    #[serde(default = "seven")]
    pub n_couplers: usize,
    #[serde(default = "points")]
    pub n_points: usize,
    #[serde(default = "span")]
    pub span_mphi0: f64,
    #[serde(default = "JeffCompareSection::default_fz_half_span")]
    pub fz_half_span: f64,
    #[serde(default = "basis")]
    pub basis_size: usize,
    /// Agreement tolerance on max/min of the three estimates.
    #[serde(default = "JeffCompareSection::default_tolerance")]
    pub tolerance: f64,
}

impl JeffCompareSection {
    fn default_fx() -> Grid {
        Grid::Values(vec![0.14, 0.16, 0.18, 0.20, 0.22])
    }
    fn default_delta_q() -> f64 {
        1.0
    }
    fn default_fz_half_span() -> f64 {
        0.02
    }
    fn default_tolerance() -> f64 {
        0.25
    }
}

impl Default for JeffCompareSection {
    fn default() -> Self {
        Self {
            coupler: fixture_coupler(),
            qubit: fixture_qubit(),
            f_x: Self::default_fx(),
            delta_q: 1.0,
            m_cc: REF_M_CC_PH,
            m_qc: REF_M_QC_PH,
            n_couplers: 7,
            n_points: 41,
            span_mphi0: 20.0,
            fz_half_span: 0.02,
            basis_size: DEFAULT_BASIS,
            tolerance: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Spin chain at fixed Δ_c with J_cc = ratio·Δ_c/2.
    Ratio,
    /// Chain mapped from the coupler circuit at each f_x.
    Circuit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "NoiseSection::default_mode")]
    pub mode: NoiseMode,
    #[serde(default = "NoiseSection::default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "NoiseSection::default_fx")]
    pub f_x: Grid,
    #[serde(default = "seven")]
    pub n_couplers: usize,
    #[serde(default = "delta_c")]
    pub delta_c: f64,
    /// Coupler operating f_x for sensitivities in ratio mode.
    #[serde(default = "NoiseSection::default_coupler_fx")]
    pub coupler_f_x: f64,
    /// Qubit transverse field at the operating point (GHz).
    #[serde(default = "NoiseSection::default_delta_q")]
    pub delta_q: f64,
    /// Override of the circuit-derived qubit-coupler coupling (GHz).
    #[serde(default)]
    pub j_qc: Option<f64>,
    #[serde(default = "fixture_coupler")]
    pub coupler: UnitSource,
    #[serde(default = "fixture_qubit")]
    pub qubit: UnitSource,
    #[serde(default = "m_cc")]
    pub m_cc: f64,
    #[serde(default = "m_qc")]
    pub m_qc: f64,
    #[serde(default)]
    pub flux_noise: NoiseSpec,
    #[serde(default = "NoiseSection::default_runs")]
    pub n_runs: usize,
    #[serde(default = "NoiseSection::default_levels")]
    pub n_levels: usize,
    #[serde(default = "basis")]
    pub basis_size: usize,
}

impl NoiseSection {
    fn default_mode() -> NoiseMode {
        NoiseMode::Ratio
    }
    fn default_ratios() -> Vec<f64> {
        vec![0.2, 2.0]
    }
    fn default_fx() -> Grid {
        Grid::Values(vec![0.13, 0.15, 0.18])
    }
    fn default_coupler_fx() -> f64 {
        0.15
    }
    fn default_delta_q() -> f64 {
        2.3
    }
    fn default_runs() -> usize {
        crate::noise_mc::DEFAULT_RUNS
    }
    fn default_levels() -> usize {
        8
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            mode: NoiseMode::Ratio,
            ratios: Self::default_ratios(),
            f_x: Self::default_fx(),
            n_couplers: 7,
            delta_c: 5.0,
            coupler_f_x: 0.15,
            delta_q: 2.3,
            j_qc: None,
            coupler: fixture_coupler(),
            qubit: fixture_qubit(),
            m_cc: REF_M_CC_PH,
            m_qc: REF_M_QC_PH,
            flux_noise: NoiseSpec::default(),
            n_runs: crate::noise_mc::DEFAULT_RUNS,
            n_levels: 8,
            basis_size: DEFAULT_BASIS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySection {
    #[serde(default = "fixture_chain")]
    pub chain: ChainSource,
    /// Overrides J_cc = ratio·Δ_c/2 on coupler-coupler edges when set.
    #[serde(default = "HierarchySection::default_ratio")]
    pub ratio: Option<f64>,
    #[serde(default = "HierarchySection::default_groups")]
    pub groups: Vec<Vec<usize>>,
    #[serde(default = "HierarchySection::default_ladder")]
    pub k_ladder: Vec<usize>,
    #[serde(default = "HierarchySection::default_levels")]
    pub n_levels: usize,
    #[serde(default = "HierarchySection::default_tolerance")]
    pub tolerance: f64,
}

impl HierarchySection {
    fn default_ratio() -> Option<f64> {
        Some(0.5)
    }
    fn default_groups() -> Vec<Vec<usize>> {
        crate::hierarchy::GroupingPlan::device_groups()
    }
    fn default_ladder() -> Vec<usize> {
        (1..=8).collect()
    }
    fn default_levels() -> usize {
        4
    }
    fn default_tolerance() -> f64 {
        1e-3
    }
}

impl Default for HierarchySection {
    fn default() -> Self {
        Self {
            chain: fixture_chain(),
            ratio: Some(0.5),
            groups: Self::default_groups(),
            k_ladder: Self::default_ladder(),
            n_levels: 4,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub coupler_character: CouplerCharacterSection,
    #[serde(default)]
    pub flux_propagation: FluxPropagationSection,
    #[serde(default)]
    pub susceptibility: SusceptibilitySection,
    #[serde(default)]
    pub jeff_compare: JeffCompareSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub hierarchy_bench: HierarchySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            spectrum: Default::default(),
            coupler_character: Default::default(),
            flux_propagation: Default::default(),
            susceptibility: Default::default(),
            jeff_compare: Default::default(),
            noise: Default::default(),
            hierarchy_bench: Default::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("susceptibility.i_p", self.susceptibility.i_p)?;
        pos("flux_propagation.i_p", self.flux_propagation.i_p)?;
        pos("jeff_compare.delta_q", self.jeff_compare.delta_q)?;
        pos("noise.delta_q", self.noise.delta_q)?;
        self.noise.flux_noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.susceptibility.n_points < 21 || self.jeff_compare.n_points < 21 {
            return Err(Error::Config("sweeps need at least 21 points".into()));
        }
        if self.noise.n_runs == 0 {
            return Err(Error::Config("noise.n_runs must be >= 1".into()));
        }
        Ok(())
    }

    /// SHA-256 over the resolved configuration, independent of formatting,
    /// comments and spelled-out defaults.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canon))
    }
}
