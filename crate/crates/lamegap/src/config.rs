//! Experiment configuration: TOML schema, defaults, and validation.
//!
//! A configuration names everything a sweep needs: the gap geometry and
//! its contact set, the ambient dimension the rate formulas are read in,
//! the element order and linear solver, the boundary-datum preset, the
//! gap widths to visit, and how the measured gradients are fitted against
//! the predicted rate. The domain radius is a pinned constant of the
//! build; the schema accepts it for completeness but rejects any attempt
//! to change it. The gap-patch radius is adjustable inside the bracket
//! the mesh generator's grading and blending are calibrated for.

use crate::error::{Error, Result};
use crate::fem::ElasticConstants;
use crate::geometry::{build_gap_profile, default_kappa, GapProfile, ProfileVariant, Sigma};
use crate::mesh::{MeshParams, DOMAIN_RADIUS, EPS_MAX};
use crate::rates::Preset;
use crate::skyline::LinearSolver;
use crate::tol::{EPS_FLOOR, LINEAR_SOLVE_TOL, RATE_SPREAD_FACTOR, SLOPE_TOL};
use serde::{Deserialize, Serialize};

fn default_n() -> u32 {
    2
}
fn default_m() -> u32 {
    2
}
fn default_patch_radius() -> f64 {
    crate::geometry::DEFAULT_PATCH_RADIUS
}
fn default_opening_length() -> f64 {
    1.0
}
fn default_domain_radius() -> f64 {
    DOMAIN_RADIUS
}
fn default_order() -> u32 {
    2
}
fn default_tol() -> f64 {
    LINEAR_SOLVE_TOL
}
fn default_lambda() -> f64 {
    1.0
}
fn default_mu() -> f64 {
    1.0
}
fn default_spread() -> f64 {
    RATE_SPREAD_FACTOR
}
fn default_slope_tol() -> f64 {
    SLOPE_TOL
}

/// Default gap-width ladder: half-decade steps over three decades.
pub fn default_eps_list() -> Vec<f64> {
    vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Ambient dimension used by the rate formulas.
    #[serde(default = "default_n")]
    pub n: u32,
    /// Convexity order of the gap opening.
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default)]
    pub sigma: Sigma,
    #[serde(default)]
    pub variant: ProfileVariant,
    /// Admissibility constants; omitted means the family defaults.
    #[serde(default)]
    pub kappa: Option<[f64; 4]>,
    /// Gap-patch radius; adjustable inside the calibrated bracket.
    #[serde(default = "default_patch_radius", rename = "R")]
    pub patch_radius: f64,
    /// Opening length of the gap families; adjustable inside the
    /// calibrated bracket.
    #[serde(default = "default_opening_length", rename = "ell")]
    pub opening_length: f64,
    /// Domain radius; accepted but pinned to the build constant.
    #[serde(default = "default_domain_radius", rename = "R_D")]
    pub domain_radius: f64,
    /// Single gap width for one-shot solves.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub grading: GradingConfig,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            n: 2,
            m: 2,
            sigma: Sigma::default(),
            variant: ProfileVariant::default(),
            kappa: None,
            patch_radius: default_patch_radius(),
            opening_length: default_opening_length(),
            domain_radius: default_domain_radius(),
            eps: None,
            grading: GradingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingConfig {
    pub q_v: u32,
    pub g_h: f64,
}

impl Default for GradingConfig {
    fn default() -> Self {
        let p = MeshParams::default();
        GradingConfig {
            q_v: p.q_v,
            g_h: p.g_h,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Element order, 1 or 2.
    #[serde(default = "default_order")]
    pub p: u32,
    #[serde(default)]
    pub linear_solver: LinearSolver,
    /// Iterative-solver tolerance; the direct path ignores it.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            p: 2,
            linear_solver: LinearSolver::Direct,
            tol: LINEAR_SOLVE_TOL,
            lambda: 1.0,
            mu: 1.0,
        }
    }
}

/// How measured gradients are compared against a predicted rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Least-squares slope in log-log coordinates; only for pure power
    /// rates.
    PowerFit,
    /// Ratio of value to predicted rate, constant up to a bounded spread;
    /// the only sound mode when the rate carries a logarithm.
    RateRatio,
    /// Picks the ratio mode when the predicted rate has a log factor and
    /// the slope mode otherwise.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub mode: FitMode,
    #[serde(default = "default_spread")]
    pub spread_factor: f64,
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: FitMode::Auto,
            spread_factor: RATE_SPREAD_FACTOR,
            slope_tol: SLOPE_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Boundary-datum preset.
    pub data: Preset,
    /// Gap widths, strictly decreasing, at least three.
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub fit: FitConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometry.n < 2 {
            return Err(Error::Config(format!(
                "ambient dimension must be >= 2, got {}",
                self.geometry.n
            )));
        }
        // The outer disk, its flattened chord, and the blend band are sized
        // for patches in this bracket; outside it the mouth fan and the
        // blend into the circle are untested.
        if !(0.1..=0.25).contains(&self.geometry.patch_radius) {
            return Err(Error::Config(format!(
                "gap patch radius must lie in [0.1, 0.25] for the fixed outer geometry, got {}",
                self.geometry.patch_radius
            )));
        }
        // Sharper openings raise the gap mouth; the mesh generator checks
        // the mouth height itself, this bracket just rejects nonsense early.
        if !(0.1..=10.0).contains(&self.geometry.opening_length) {
            return Err(Error::Config(format!(
                "opening length must lie in [0.1, 10], got {}",
                self.geometry.opening_length
            )));
        }
        if (self.geometry.domain_radius - default_domain_radius()).abs() > 1e-15 {
            return Err(Error::Config(format!(
                "domain radius is pinned to {} in this build",
                default_domain_radius()
            )));
        }
        if self.eps_list.len() < 3 {
            return Err(Error::Config(format!(
                "a sweep needs at least three gap widths, got {}",
                self.eps_list.len()
            )));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Config(format!(
                    "gap widths must strictly decrease, got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        for &e in &self.eps_list {
            if !(EPS_FLOOR..=EPS_MAX).contains(&e) {
                return Err(Error::Config(format!(
                    "gap width {e} outside the meshable range [{EPS_FLOOR}, {EPS_MAX}]"
                )));
            }
        }
        if !(self.fit.spread_factor > 1.0) {
            return Err(Error::Config(
                "spread factor must exceed 1".into(),
            ));
        }
        // Building the profile and constants exercises their own checks.
        self.profile()?;
        self.constants()?;
        Ok(())
    }

    /// The sweep solves the planar section; rate formulas for higher
    /// ambient dimension are analytic only.
    pub fn validate_for_sweep(&self) -> Result<()> {
        self.validate()?;
        if self.geometry.n != 2 {
            return Err(Error::Config(format!(
                "numerical sweeps realize the planar section n = 2; n = {} is analytic only",
                self.geometry.n
            )));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<GapProfile> {
        build_gap_profile(
            self.geometry.m,
            self.geometry.sigma,
            self.geometry.variant,
            self.geometry.kappa.unwrap_or(default_kappa(self.geometry.m)),
        )?
        .with_patch_radius(self.geometry.patch_radius)?
        .with_opening_length(self.geometry.opening_length)
    }

    pub fn constants(&self) -> Result<ElasticConstants> {
        ElasticConstants::new(self.solver.lambda, self.solver.mu)
    }

    pub fn mesh_params(&self) -> MeshParams {
        MeshParams {
            q_v: self.geometry.grading.q_v,
            g_h: self.geometry.grading.g_h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::ParityClass;
    use approx::assert_relative_eq;

    #[test]
    fn minimal_toml_round_trip() {
        let text = r#"
            [data]
            preset = "phi_two"
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.geometry.n, 2);
        assert_eq!(cfg.geometry.m, 2);
        assert_eq!(cfg.eps_list, default_eps_list());
        assert_eq!(cfg.fit.mode, FitMode::Auto);
        assert!(matches!(cfg.data, Preset::PhiTwo));
        // The tilted profile demanded by that preset must build.
        let text_tilted = r#"
            [geometry]
            variant = "tilted"
            [data]
            preset = "phi_two"
        "#;
        let cfg2 = ExperimentConfig::from_toml(text_tilted).unwrap();
        assert_eq!(cfg2.profile().unwrap().variant, ProfileVariant::Tilted);
    }

    #[test]
    fn full_schema_parses() {
        let text = r#"
            eps_list = [1e-2, 1e-3, 1e-4]
            [geometry]
            n = 2
            m = 4
            variant = "pure_power"
            R = 0.25
            R_D = 1.0
            eps = 1e-3
            [geometry.sigma]
            type = "disk"
            r = 0.1
            [geometry.grading]
            q_v = 6
            g_h = 0.4
            [solver]
            p = 1
            linear_solver = "pcg"
            tol = 1e-10
            lambda = 0.5
            mu = 1.5
            [data]
            preset = "custom_parity"
            class = "a1"
            k = 2
            eta = 1.0
            [fit]
            mode = "rate_ratio"
            spread_factor = 3.0
            slope_tol = 0.1
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.geometry.m, 4);
        assert_eq!(cfg.solver.p, 1);
        assert_eq!(cfg.eps_list, vec![1e-2, 1e-3, 1e-4]);
        match cfg.data {
            Preset::CustomParity { class, k, .. } => {
                assert_eq!(class, ParityClass::A1);
                assert_eq!(k, 2);
            }
            other => panic!("wrong preset {other:?}"),
        }
    }

    #[test]
    fn bad_ladders_rejected() {
        let base = |eps_list: &str| {
            format!(
                r#"
                eps_list = {eps_list}
                [data]
                preset = "zero"
            "#
            )
        };
        assert!(ExperimentConfig::from_toml(&base("[1e-2, 1e-3]")).is_err());
        assert!(ExperimentConfig::from_toml(&base("[1e-3, 1e-2, 1e-4]")).is_err());
        assert!(ExperimentConfig::from_toml(&base("[1e-2, 1e-3, 1e-8]")).is_err());
        assert!(ExperimentConfig::from_toml(&base("[0.2, 1e-2, 1e-3]")).is_err());
    }

    #[test]
    fn pinned_lengths_are_enforced() {
        let text = r#"
            [geometry]
            R = 0.3
            [data]
            preset = "zero"
        "#;
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("[0.1, 0.25]"));

        let text = r#"
            [geometry]
            R = 0.15
            [data]
            preset = "zero"
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_relative_eq!(cfg.profile().unwrap().patch_radius, 0.15);

        let text = r#"
            [geometry]
            R_D = 2.0
            [data]
            preset = "zero"
        "#;
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(err.to_string().contains("pinned"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
            [geometry]
            inclusions = 2
            [data]
            preset = "zero"
        "#;
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn higher_dimension_blocks_sweeps_only() {
        let text = r#"
            [geometry]
            n = 4
            m = 2
            [data]
            preset = "zero"
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(cfg.validate().is_ok());
        assert!(cfg.validate_for_sweep().is_err());
    }
}
