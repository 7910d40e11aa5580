//! Scenario description, read from TOML with dotted section keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, LinkBudget};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, CandidateGrid, CorrelationKernel, KernelMode, SurfaceGeometry};
use crate::qlearn::{FixedPhaseBeam, LearnParams};

const SPEED_OF_LIGHT: f64 = 3e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    FrisSpo,
    FrisSpoBfPs,
    RisConventionalRandomPs,
    RisConventionalBfPs,
    RisCompactBfPs,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::FrisSpo,
        Architecture::FrisSpoBfPs,
        Architecture::RisConventionalRandomPs,
        Architecture::RisConventionalBfPs,
        Architecture::RisCompactBfPs,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::FrisSpo => "fris_spo",
            Architecture::FrisSpoBfPs => "fris_spo_bf_ps",
            Architecture::RisConventionalRandomPs => "ris_conventional_random_ps",
            Architecture::RisConventionalBfPs => "ris_conventional_bf_ps",
            Architecture::RisCompactBfPs => "ris_compact_bf_ps",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    pub fn is_fris(&self) -> bool {
        matches!(self, Architecture::FrisSpo | Architecture::FrisSpoBfPs)
    }

    pub fn optimizes_phases(&self) -> bool {
        !matches!(self, Architecture::FrisSpo | Architecture::RisConventionalRandomPs)
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalization of the end-to-end gain before it is scaled by the mean SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// Divide by `A_ref^2 beta_1 beta_2,B`, so the mean SNR is quoted per
    /// unit cascaded gain of one reference element.
    Cascade,
    /// Use the gain as drawn: the mean SNR is the transmit SNR.
    Transmit,
}

/// How FRIS positions relate to the channel realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Learn positions for every realization from its candidate-level channels.
    PerRealization,
    /// Learn once against a fixed batch of draws and keep the positions.
    FrozenBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamChoice {
    Mrt,
    Uniform,
}

impl From<BeamChoice> for FixedPhaseBeam {
    fn from(b: BeamChoice) -> Self {
        match b {
            BeamChoice::Mrt => FixedPhaseBeam::Mrt,
            BeamChoice::Uniform => FixedPhaseBeam::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub n_h: usize,
    pub n_v: usize,
    pub m_h: usize,
    pub m_v: usize,
    /// Defaults to `(n_h - 1) d_h`.
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    pub carrier_hz: f64,
    /// Overrides `carrier_hz` when present.
    pub wavelength_m: Option<f64>,
    /// Sets both element dimensions, in wavelengths.
    pub d_wl: Option<f64>,
    pub d_h_wl: f64,
    pub d_v_wl: f64,
    /// Minimum element distance; defaults to the grid pitch.
    pub min_spacing_m: Option<f64>,
    /// Lattice pitch of the compact surface, in wavelengths.
    pub compact_spacing_wl: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            n_h: 48,
            n_v: 48,
            m_h: 6,
            m_v: 6,
            width_m: None,
            height_m: None,
            carrier_hz: 2.4e9,
            wavelength_m: None,
            d_wl: None,
            d_h_wl: 1.0 / 3.0,
            d_v_wl: 1.0 / 3.0,
            min_spacing_m: None,
            compact_spacing_wl: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetBlock {
    pub beta1_db: f64,
    pub beta2_b_db: f64,
    pub beta2_e_db: f64,
    pub gamma_bar_e_db: f64,
    pub gamma_bar_b_db: Vec<f64>,
    pub snr_reference: SnrReference,
    /// Element area of the cascade reference; defaults to `(lambda/2)^2`.
    pub reference_area_m2: Option<f64>,
}

impl Default for BudgetBlock {
    fn default() -> Self {
        Self {
            beta1_db: -40.0,
            beta2_b_db: -40.0,
            beta2_e_db: -40.0,
            gamma_bar_e_db: 12.0,
            gamma_bar_b_db: (0..=20).map(|i| 2.0 * i as f64).collect(),
            snr_reference: SnrReference::Cascade,
            reference_area_m2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecrecyBlock {
    pub rate_rs: f64,
}

impl Default for SecrecyBlock {
    fn default() -> Self {
        Self { rate_rs: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningBlock {
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub episodes: usize,
    /// Defaults to two sweeps over the elements.
    pub steps_per_episode: Option<usize>,
    pub convergence_window: usize,
    /// Draws averaged by the reward in `frozen_batch` placement.
    pub batch: usize,
    pub placement: Placement,
}

impl Default for LearningBlock {
    fn default() -> Self {
        let p = LearnParams::default();
        Self {
            alpha: p.alpha,
            delta: p.delta,
            epsilon: p.epsilon,
            episodes: p.episodes,
            steps_per_episode: None,
            convergence_window: p.convergence_window,
            batch: 16,
            placement: Placement::PerRealization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamphaseBlock {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BeamphaseBlock {
    fn default() -> Self {
        Self {
            tol: crate::beamphase::DEFAULT_TOL,
            max_iter: crate::beamphase::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomPsBlock {
    pub beamformer: BeamChoice,
}

impl Default for RandomPsBlock {
    fn default() -> Self {
        Self {
            beamformer: BeamChoice::Mrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FittingBlock {
    pub t_sp: usize,
}

impl Default for FittingBlock {
    fn default() -> Self {
        Self { t_sp: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBlock {
    pub trials: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for McBlock {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 1,
            stream_id: 0,
        }
    }
}

fn default_name() -> String {
    "scenario".into()
}

fn default_antennas() -> usize {
    4
}

fn default_kernel() -> KernelMode {
    KernelMode::PaperLiteral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub architectures: Vec<Architecture>,
    /// Transmit antennas `L`.
    #[serde(default = "default_antennas")]
    pub antennas: usize,
    #[serde(default = "default_kernel")]
    pub kernel: KernelMode,
    #[serde(default)]
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub budget: BudgetBlock,
    #[serde(default)]
    pub secrecy: SecrecyBlock,
    #[serde(default)]
    pub learning: LearningBlock,
    #[serde(default)]
    pub beamphase: BeamphaseBlock,
    #[serde(default)]
    pub random_ps: RandomPsBlock,
    #[serde(default)]
    pub fitting: FittingBlock,
    #[serde(default)]
    pub mc: McBlock,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid scenario file: {e}")))?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ScenarioConfig = table
            .try_into()
            .map_err(|e| Error::Config(format!("invalid scenario: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn wavelength(&self) -> f64 {
        self.geometry
            .wavelength_m
            .unwrap_or(SPEED_OF_LIGHT / self.geometry.carrier_hz)
    }

    /// Checks the description and derives the model objects.
    pub fn resolve(&self) -> Result<Scenario> {
        let g = &self.geometry;
        let lambda = self.wavelength();
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("invalid wavelength {lambda}")));
        }
        if self.architectures.is_empty() {
            return Err(Error::Config("no architectures selected".into()));
        }
        let mut seen = self.architectures.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.architectures.len() {
            return Err(Error::Config("architectures listed twice".into()));
        }
        if self.antennas == 0 {
            return Err(Error::Config("antennas must be >= 1".into()));
        }
        let (dh_wl, dv_wl) = match g.d_wl {
            Some(d) => (d, d),
            None => (g.d_h_wl, g.d_v_wl),
        };
        let d_h = dh_wl * lambda;
        let d_v = dv_wl * lambda;
        let geometry = SurfaceGeometry {
            width_m: g.width_m.unwrap_or(g.n_h.saturating_sub(1) as f64 * d_h),
            height_m: g.height_m.unwrap_or(g.n_v.saturating_sub(1) as f64 * d_v),
            n_h: g.n_h,
            n_v: g.n_v,
            d_h,
            d_v,
            wavelength_m: lambda,
            m_subareas_h: g.m_h,
            m_subareas_v: g.m_v,
        };
        let grid = build_grid(&geometry)?;
        let min_spacing = g.min_spacing_m.unwrap_or_else(|| geometry.min_grid_spacing());
        if !(min_spacing >= 0.0 && min_spacing.is_finite()) {
            return Err(Error::Config(format!("invalid minimum spacing {min_spacing}")));
        }
        let b = &self.budget;
        if b.gamma_bar_b_db.is_empty() {
            return Err(Error::Config("the mean-SNR sweep is empty".into()));
        }
        if b.gamma_bar_b_db.iter().any(|v| !v.is_finite())
            || b.gamma_bar_b_db.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::Config("the mean-SNR sweep must be finite and sorted".into()));
        }
        let budget = LinkBudget {
            beta1: db_to_linear(b.beta1_db),
            beta2_b: db_to_linear(b.beta2_b_db),
            beta2_e: db_to_linear(b.beta2_e_db),
            a_p: geometry.element_area(),
            gamma_bar_b: 1.0,
            gamma_bar_e: db_to_linear(b.gamma_bar_e_db),
        };
        budget.validate()?;
        let reference = match b.snr_reference {
            SnrReference::Transmit => 1.0,
            SnrReference::Cascade => {
                let area = b.reference_area_m2.unwrap_or((lambda / 2.0).powi(2));
                if !(area > 0.0 && area.is_finite()) {
                    return Err(Error::Config(format!("invalid reference area {area}")));
                }
                area * area * budget.beta1 * budget.beta2_b
            }
        };
        if !(self.secrecy.rate_rs >= 0.0 && self.secrecy.rate_rs.is_finite()) {
            return Err(Error::Config("secrecy rate must be >= 0".into()));
        }
        let l = &self.learning;
        let learn = LearnParams {
            alpha: l.alpha,
            delta: l.delta,
            epsilon: l.epsilon,
            episodes: l.episodes,
            steps_per_episode: l.steps_per_episode.unwrap_or(2 * geometry.n_subareas()),
            convergence_window: l.convergence_window,
        };
        learn.validate()?;
        if l.batch == 0 {
            return Err(Error::Config("learning batch must be >= 1".into()));
        }
        if !(self.beamphase.tol > 0.0) || self.beamphase.max_iter == 0 {
            return Err(Error::Config("beamphase needs tol > 0 and max_iter >= 1".into()));
        }
        if self.mc.trials < crate::secrecy::MIN_MC_PAIRS {
            return Err(Error::Config(format!(
                "mc.trials must be >= {}",
                crate::secrecy::MIN_MC_PAIRS
            )));
        }
        if self.fitting.t_sp < 2 {
            return Err(Error::Config("fitting.t_sp must be >= 2".into()));
        }
        let compact_spacing = g.compact_spacing_wl * lambda;
        let kernel = CorrelationKernel::new(self.kernel, lambda)?;
        Ok(Scenario {
            config: self.clone(),
            geometry,
            grid,
            kernel,
            budget,
            reference,
            min_spacing,
            compact_spacing,
            learn,
        })
    }
}

/// A validated scenario with its derived model objects.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub geometry: SurfaceGeometry,
    pub grid: CandidateGrid,
    pub kernel: CorrelationKernel,
    /// Path losses and element area; the mean SNRs are applied per sweep point.
    pub budget: LinkBudget,
    /// Divisor applied to every drawn gain.
    pub reference: f64,
    pub min_spacing: f64,
    pub compact_spacing: f64,
    pub learn: LearnParams,
}

/// Replaces the value at a dotted key (`learning.episodes`) with `raw`,
/// read as a TOML value when possible and as a string otherwise.
pub fn override_key(table: &mut toml::Table, dotted: &str, raw: &str) -> Result<()> {
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("invalid key '{dotted}'")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{part}' in '{dotted}' is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_and_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            "architectures = [\"fris_spo\"]\ngeometry.n_h = 24\ngeometry.n_v = 24\nbudget.gamma_bar_e_db = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry.n_h, 24);
        assert_eq!(cfg.budget.gamma_bar_e_db, 10.0);
        assert_eq!(cfg.kernel, KernelMode::PaperLiteral);
        assert_eq!(cfg.antennas, 4);
        let s = cfg.resolve().unwrap();
        assert!((s.geometry.wavelength_m - 0.125).abs() < 1e-15);
        assert!((s.geometry.width_m - 23.0 * 0.125 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn defaults_resolve_to_full_grid() {
        let cfg = ScenarioConfig::from_toml_str("architectures = [\"ris_conventional_bf_ps\"]").unwrap();
        let s = cfg.resolve().unwrap();
        assert_eq!(s.grid.candidates.len(), 2304);
        assert!((s.geometry.width_m - 47.0 * 0.125 / 3.0).abs() < 1e-12);
        assert_eq!(cfg.budget.gamma_bar_b_db.len(), 21);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("architectures = [\"nope\"]"),
            Err(Error::Config(_))
        ));
        assert!(ScenarioConfig::from_toml_str("architectures = [\"fris_spo\"]\nbogus = 1").is_err());
        let cfg = ScenarioConfig::from_toml_str(
            "architectures = [\"fris_spo\"]\nbudget.gamma_bar_b_db = [10, 0]",
        )
        .unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::Config(_))));
        let cfg = ScenarioConfig::from_toml_str(
            "architectures = [\"fris_spo\"]\ngeometry.m_h = 5",
        )
        .unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn override_dotted_key() {
        let mut t: toml::Table = toml::from_str("architectures = [\"fris_spo\"]").unwrap();
        override_key(&mut t, "geometry.d_wl", "0.2").unwrap();
        override_key(&mut t, "kernel", "jakes_2pi").unwrap();
        let cfg = ScenarioConfig::from_table(t).unwrap();
        assert_eq!(cfg.geometry.d_wl, Some(0.2));
        assert_eq!(cfg.kernel, KernelMode::Jakes2Pi);
    }

    #[test]
    fn round_trip() {
        let cfg = ScenarioConfig::from_toml_str("architectures = [\"fris_spo\", \"ris_compact_bf_ps\"]").unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
