//! Experiment configuration: TOML with nested sections, schema-validated
//! (unknown keys rejected), with all resolved defaults recorded into the
//! emitted report.

use serde::{Deserialize, Serialize};

use crate::error::{GeobeamError, Result};
use crate::manifold::{Manifold, Profile};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldConfig {
    FlatTorus {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    RoundSphere {
        #[serde(default = "default_dim")]
        n: usize,
    },
    SurfaceOfRevolution {
        /// "sin" or a path to a two-column CSV (r, α)
        alpha: String,
        /// "pendulum" or a path to a two-column CSV (r, V); omit for pure metric
        #[serde(default)]
        potential: Option<String>,
        /// pendulum energy E
        #[serde(default = "default_energy")]
        energy: f64,
    },
    Product {
        first: Box<ManifoldConfig>,
        second: Box<ManifoldConfig>,
    },
    TriaxialEllipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
}

fn default_dim() -> usize {
    2
}

fn default_energy() -> f64 {
    3.5
}

impl ManifoldConfig {
    pub fn build(&self) -> Result<Manifold> {
        match self {
            ManifoldConfig::FlatTorus { dim } => Manifold::flat_torus(*dim),
            ManifoldConfig::RoundSphere { n } => Manifold::round_sphere(*n),
            ManifoldConfig::SurfaceOfRevolution {
                alpha,
                potential,
                energy,
            } => {
                let alpha_profile = match alpha.as_str() {
                    "sin" => Profile::Sin,
                    path => {
                        let text = std::fs::read_to_string(path).map_err(|e| {
                            GeobeamError::Config(format!("alpha profile {path}: {e}"))
                        })?;
                        Profile::from_csv(&text)?
                    }
                };
                let v_profile = match potential.as_deref() {
                    None => None,
                    Some("pendulum") => Some(Profile::Pendulum { e: *energy }),
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| {
                            GeobeamError::Config(format!("potential profile {path}: {e}"))
                        })?;
                        Some(Profile::from_csv(&text)?)
                    }
                };
                Manifold::revolution(alpha_profile, v_profile)
            }
            ManifoldConfig::Product { first, second } => {
                Manifold::product(first.build()?, second.build()?)
            }
            ManifoldConfig::TriaxialEllipsoid { a, b, c } => Manifold::triaxial_ellipsoid(*a, *b, *c),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasePointConfig {
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// fixed tube radius; alternatively derive from R(h) = scale·h^delta
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_radius_scale")]
    pub radius_scale: f64,
    #[serde(default = "default_verify_samples")]
    pub verify_samples: usize,
    #[serde(default = "default_family_cap")]
    pub family_cap: usize,
}

fn default_tau() -> f64 {
    0.2
}
fn default_h() -> f64 {
    1e-5
}
fn default_delta() -> f64 {
    0.3
}
fn default_radius_scale() -> f64 {
    8.0
}
fn default_verify_samples() -> usize {
    10_000
}
fn default_family_cap() -> usize {
    64
}

impl CoverConfig {
    pub fn resolve_radius(&self) -> f64 {
        self.radius
            .unwrap_or_else(|| self.radius_scale * self.h.powf(self.delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyMode {
    Single,
    Iterative,
    TorusOracle,
    Revolution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default = "default_mode")]
    pub mode: ClassifyMode,
    #[serde(default = "default_t0")]
    pub t0: f64,
    pub t_max: f64,
    #[serde(default = "default_contraction")]
    pub contraction: f64,
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    /// run the backward window too and keep the smaller bad set
    #[serde(default = "default_true")]
    pub bidirectional: bool,
    #[serde(default = "default_verify_seeds")]
    pub verify_seeds: usize,
}

fn default_mode() -> ClassifyMode {
    ClassifyMode::Single
}
fn default_t0() -> f64 {
    1.0
}
fn default_contraction() -> f64 {
    1.0
}
fn default_alpha1() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_verify_seeds() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateConfig {
    #[serde(default = "default_a")]
    pub a: f64,
    pub t_grid: Vec<f64>,
    #[serde(default = "default_direction_count")]
    pub direction_count: usize,
}

fn default_a() -> f64 {
    1.0
}
fn default_direction_count() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigBlock {
    pub radii: Vec<f64>,
    /// T(R) = R^{−exponent}; omit to use classify.t_max fixed
    #[serde(default)]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_outdir")]
    pub dir: String,
    #[serde(default = "default_true")]
    pub svg: bool,
    #[serde(default)]
    pub relation: bool,
}

fn default_outdir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_outdir(),
            svg: true,
            relation: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default = "default_cover_seed")]
    pub cover: u64,
    #[serde(default = "default_loop_seed")]
    pub loops: u64,
}

fn default_cover_seed() -> u64 {
    7
}
fn default_loop_seed() -> u64 {
    11
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            cover: default_cover_seed(),
            loops: default_loop_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt_scan")]
    pub dt_scan: f64,
    #[serde(default = "default_lambda_floor")]
    pub lambda_floor: f64,
}

fn default_abs_tol() -> f64 {
    1e-11
}
fn default_horizon() -> f64 {
    1e3
}
fn default_dt_scan() -> f64 {
    0.01
}
fn default_lambda_floor() -> f64 {
    1e-3
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            abs_tol: default_abs_tol(),
            rel_tol: default_abs_tol(),
            horizon: default_horizon(),
            dt_scan: default_dt_scan(),
            lambda_floor: default_lambda_floor(),
        }
    }
}

impl FlowConfig {
    pub fn to_opts(&self) -> crate::flow::FlowOpts {
        crate::flow::FlowOpts {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            horizon: self.horizon,
            max_step: 0.2,
            dt_scan: self.dt_scan,
            lambda_floor: self.lambda_floor,
        }
    }
}

/// The full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: ManifoldConfig,
    pub base_point: BasePointConfig,
    #[serde(default)]
    pub cover: Option<CoverConfig>,
    #[serde(default)]
    pub classify: Option<ClassifyConfig>,
    #[serde(default)]
    pub conjugate: Option<ConjugateConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfigBlock>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default)]
    pub flow: FlowConfig,
}

impl ExperimentConfig {
    /// Parse TOML text with `--set section.key=value` overrides applied
    /// before schema validation.
    pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| GeobeamError::Config(format!("toml parse error: {e}")))?;
        for ov in overrides {
            let (path, raw) = ov
                .split_once('=')
                .ok_or_else(|| GeobeamError::Config(format!("override '{ov}' is not key=value")))?;
            // parse the raw value as a toml literal by wrapping it in a
            // one-key document; fall back to a plain string
            let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
                Ok(toml::Value::Table(mut t)) => t.remove("v").unwrap(),
                _ => toml::Value::String(raw.to_string()),
            };
            let mut cursor = &mut value;
            let parts: Vec<&str> = path.split('.').collect();
            for (k, part) in parts.iter().enumerate() {
                if k + 1 == parts.len() {
                    cursor
                        .as_table_mut()
                        .ok_or_else(|| {
                            GeobeamError::Config(format!("override path '{path}' is not a table"))
                        })?
                        .insert(part.to_string(), parsed.clone());
                } else {
                    let table = cursor.as_table_mut().ok_or_else(|| {
                        GeobeamError::Config(format!("override path '{path}' is not a table"))
                    })?;
                    cursor = table
                        .entry(part.to_string())
                        .or_insert(toml::Value::Table(Default::default()));
                }
            }
        }
        let config: ExperimentConfig = value
            .try_into()
            .map_err(|e| GeobeamError::Config(format!("{e}")))?;
        if config.base_point.coords.is_empty() {
            return Err(GeobeamError::Config("base_point.coords must be non-empty".into()));
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[manifold]
kind = "flat-torus"
dim = 2

[base_point]
coords = [0.0, 0.0]

[cover]
radius = 0.01

[classify]
t0 = 1.6
t_max = 2.7
"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::parse(MINIMAL, &[]).unwrap();
        assert_eq!(c.cover.as_ref().unwrap().resolve_radius(), 0.01);
        assert_eq!(c.classify.as_ref().unwrap().t0, 1.6);
        assert!(c.classify.as_ref().unwrap().bidirectional);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = MINIMAL.replace("radius = 0.01", "radius = 0.01\nbogus_key = 3");
        let err = ExperimentConfig::parse(&bad, &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key"), "error should name the key: {msg}");
    }

    #[test]
    fn applies_set_overrides() {
        let c = ExperimentConfig::parse(
            MINIMAL,
            &["classify.t_max=5.0".into(), "output.svg=false".into()],
        )
        .unwrap();
        assert_eq!(c.classify.as_ref().unwrap().t_max, 5.0);
        assert!(!c.output.svg);
    }

    #[test]
    fn radius_rule_resolution() {
        let text = MINIMAL.replace("radius = 0.01", "h = 1e-5\ndelta = 0.3");
        let c = ExperimentConfig::parse(&text, &[]).unwrap();
        let r = c.cover.as_ref().unwrap().resolve_radius();
        assert!((r - 8.0 * 1e-5_f64.powf(0.3)).abs() < 1e-15);
    }

    #[test]
    fn builds_product_manifold() {
        let text = r#"
[manifold]
kind = "product"
first = { kind = "round-sphere", n = 2 }
second = { kind = "flat-torus", dim = 1 }

[base_point]
coords = [1.5707963, 0.1, 0.4]
"#;
        let c = ExperimentConfig::parse(text, &[]).unwrap();
        let m = c.manifold.build().unwrap();
        assert_eq!(m.dim(), 3);
    }
}
