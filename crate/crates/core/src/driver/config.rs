//! Problem description read from a TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::darcy::{penetration_drainage, FlowParams};
use crate::error::{Error, Result};
use crate::fields::{MaterialSet, MAX_VARS};
use crate::mesh::{Edge, MeshLayout};
use crate::mma::MmaSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: String,
    pub domain: DomainConfig,
    pub materials: MaterialsConfig,
    pub volume: VolumeConfig,
    /// Edge name → prescribed pressure (Pa).
    pub pressure: BTreeMap<String, f64>,
    #[serde(default, rename = "support")]
    pub supports: Vec<SupportConfig>,
    #[serde(default)]
    pub flow: FlowConfig,
    pub filter: FilterConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lx: f64,
    pub ly: f64,
    pub nex: usize,
    pub ney: usize,
    #[serde(default)]
    pub layout: MeshLayout,
    /// Edge that carries the symmetry condition of a half model.
    #[serde(default)]
    pub symmetry_edge: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    /// Young's moduli (Pa), softest first.
    pub youngs: Vec<f64>,
    pub nu: f64,
    pub thickness: f64,
    #[serde(default = "default_penal")]
    pub penal: f64,
}

fn default_penal() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeConfig {
    /// Volume fraction per material, same order as the moduli.
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fix {
    X,
    Y,
    Xy,
}

/// Supported stretch of a boundary edge, as fractions of the edge length
/// measured from its lower coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    pub edge: String,
    #[serde(default)]
    pub from: f64,
    #[serde(default = "one")]
    pub to: f64,
    pub fix: Fix,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub kv: f64,
    pub epsilon: f64,
    pub eta_k: f64,
    pub beta_k: f64,
    pub eta_d: f64,
    pub beta_d: f64,
    /// Pressure fraction left after the penetration depth.
    pub remainder: f64,
    /// Penetration depth in element heights.
    pub penetration_elements: f64,
    /// Explicit drainage coefficient; overrides the penetration rule.
    pub ds: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            kv: 1.0,
            epsilon: 1e-7,
            eta_k: 0.2,
            beta_k: 10.0,
            eta_d: 0.2,
            beta_d: 10.0,
            remainder: 0.1,
            penetration_elements: 2.0,
            ds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Filter radius in element widths `Lx / nex`.
    pub radius_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once the largest design change falls below this; off when absent.
    pub change_tolerance: Option<f64>,
    pub move_limit: f64,
    pub asymptote_init: f64,
    pub asymptote_incr: f64,
    pub asymptote_decr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let mma = MmaSettings::default();
        OptimizerConfig {
            max_iters: 100,
            change_tolerance: None,
            move_limit: mma.move_limit,
            asymptote_init: mma.asymptote_init,
            asymptote_incr: mma.asymptote_incr,
            asymptote_decr: mma.asymptote_decr,
        }
    }
}

impl OptimizerConfig {
    pub fn mma_settings(&self) -> MmaSettings {
        MmaSettings {
            move_limit: self.move_limit,
            asymptote_init: self.asymptote_init,
            asymptote_incr: self.asymptote_incr,
            asymptote_decr: self.asymptote_decr,
            ..MmaSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub write_vtk: bool,
    pub write_svg: bool,
    pub isolines: bool,
    pub log_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
            write_vtk: true,
            write_svg: true,
            isolines: true,
            log_every: 1,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ProblemConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn num_materials(&self) -> usize {
        self.materials.youngs.len()
    }

    /// Resolves an edge name, mapping `symmetry` to the configured edge.
    pub fn edge(&self, name: &str) -> Result<Edge> {
        if name == "symmetry" {
            let sym = self
                .domain
                .symmetry_edge
                .as_deref()
                .ok_or_else(|| config_err("edge 'symmetry' used but domain.symmetry_edge is not set"))?;
            return sym
                .parse()
                .map_err(|_| config_err(format!("unknown symmetry edge '{sym}'")));
        }
        name.parse()
            .map_err(|_| config_err(format!("unknown edge '{name}' (expected top, bottom, left, right or symmetry)")))
    }

    pub fn pressure_bc(&self) -> Result<BTreeMap<Edge, f64>> {
        let mut out = BTreeMap::new();
        for (name, &v) in &self.pressure {
            if out.insert(self.edge(name)?, v).is_some() {
                return Err(config_err(format!("edge '{name}' has two pressure values")));
            }
        }
        Ok(out)
    }

    pub fn material_set(&self) -> Result<MaterialSet> {
        let m = &self.materials;
        MaterialSet::new(m.youngs.clone(), m.penal, m.nu, m.thickness).map_err(|e| config_err(e.to_string()))
    }

    pub fn element_width(&self) -> f64 {
        self.domain.lx / self.domain.nex as f64
    }

    pub fn element_height(&self) -> f64 {
        self.domain.ly / self.domain.ney as f64
    }

    pub fn filter_radius(&self) -> f64 {
        self.filter.radius_factor * self.element_width()
    }

    pub fn flow_params(&self) -> Result<FlowParams> {
        let f = &self.flow;
        let ds = match f.ds {
            Some(ds) => ds,
            None => penetration_drainage(
                f.epsilon * f.kv,
                f.remainder,
                f.penetration_elements * self.element_height(),
            )
            .map_err(|e| config_err(e.to_string()))?,
        };
        FlowParams::new(f.kv, f.epsilon, (f.eta_k, f.beta_k), (f.eta_d, f.beta_d), ds)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.lx > 0.0 && d.ly > 0.0 && d.lx.is_finite() && d.ly.is_finite()) {
            return Err(config_err("domain lengths must be positive"));
        }
        if d.nex == 0 || d.ney == 0 {
            return Err(config_err("element counts must be positive"));
        }
        let nm = self.num_materials();
        if nm == 0 || nm > MAX_VARS {
            return Err(config_err(format!("between 1 and {MAX_VARS} materials supported, got {nm}")));
        }
        if self.materials.youngs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("moduli must be listed in increasing order"));
        }
        self.material_set()?;
        let vf = &self.volume.fractions;
        if vf.len() != nm {
            return Err(config_err(format!("{nm} materials but {} volume fractions", vf.len())));
        }
        if vf.iter().any(|&v| !(v > 0.0)) {
            return Err(config_err("volume fractions must be positive"));
        }
        let total: f64 = vf.iter().sum();
        if total > 1.0 {
            return Err(config_err(format!("volume fractions sum to {total} > 1")));
        }
        if let Some(sym) = &d.symmetry_edge {
            if sym.parse::<Edge>().is_err() {
                return Err(config_err(format!("unknown symmetry edge '{sym}'")));
            }
        }
        if self.pressure.is_empty() {
            return Err(config_err("at least one pressure boundary is required"));
        }
        self.pressure_bc()?;
        if self.supports.is_empty() {
            return Err(config_err("at least one support is required"));
        }
        for s in &self.supports {
            self.edge(&s.edge)?;
            if !(0.0 <= s.from && s.from < s.to && s.to <= 1.0) {
                return Err(config_err(format!(
                    "support on '{}' needs 0 ≤ from < to ≤ 1, got {}..{}",
                    s.edge, s.from, s.to
                )));
            }
        }
        self.flow_params()?;
        if !(self.filter.radius_factor > 0.0) {
            return Err(config_err("filter radius factor must be positive"));
        }
        if self.optimizer.max_iters == 0 {
            return Err(config_err("max_iters must be at least 1"));
        }
        if let Some(t) = self.optimizer.change_tolerance {
            if !(t > 0.0) {
                return Err(config_err("change_tolerance must be positive"));
            }
        }
        self.optimizer.mma_settings().validate().map_err(|e| config_err(e.to_string()))?;
        if self.output.log_every == 0 {
            return Err(config_err("log_every must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
name = "sample"

[domain]
lx = 0.2
ly = 0.1
nex = 12
ney = 8
layout = "symmetric"

[materials]
youngs = [40e6, 100e6]
nu = 0.4
thickness = 0.001

[volume]
fractions = [0.1, 0.1]

[pressure]
top = 1e5
bottom = 0.0

[[support]]
edge = "bottom"
from = 0.0
to = 0.05
fix = "xy"

[[support]]
edge = "bottom"
from = 0.95
to = 1.0
fix = "xy"

[filter]
radius_factor = 3.0
"#;

    #[test]
    fn parses_sample_with_defaults() {
        let c = ProblemConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.domain.layout, MeshLayout::Symmetric);
        assert_eq!(c.optimizer.max_iters, 100);
        assert_eq!(c.optimizer.mma_settings(), MmaSettings::default());
        assert_eq!(c.flow.epsilon, 1e-7);
        assert_eq!(c.supports.len(), 2);
        assert!((c.filter_radius() - 3.0 * 0.2 / 12.0).abs() < 1e-15);
        let fp = c.flow_params().unwrap();
        let dz = 2.0 * 0.1 / 8.0;
        assert!((fp.ds - (0.1f64.ln() / dz).powi(2) * 1e-7).abs() < 1e-18);
        let round = ProblemConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            SAMPLE.replace("fractions = [0.1, 0.1]", "fractions = [0.6, 0.6]"),
            SAMPLE.replace("fractions = [0.1, 0.1]", "fractions = [0.1]"),
            SAMPLE.replace("top = 1e5", "front = 1e5"),
            SAMPLE.replace("nex = 12", "nex = 0"),
            SAMPLE.replace("lx = 0.2", "lx = -0.2"),
            SAMPLE.replace("to = 0.05", "to = 1.5"),
            SAMPLE.replace("[filter]", "[filter]\nunknown = 1"),
            SAMPLE.replace("youngs = [40e6, 100e6]", "youngs = [100e6, 40e6]"),
            SAMPLE.replace("edge = \"bottom\"\nfrom = 0.0", "edge = \"symmetry\"\nfrom = 0.0"),
            SAMPLE.replace("nu = 0.4", "nu = 0.6"),
            "not toml at all [".to_string(),
        ];
        for (i, text) in bad.iter().enumerate() {
            assert!(
                matches!(ProblemConfig::from_toml(text), Err(Error::Config(_))),
                "case {i} accepted"
            );
        }
    }

    #[test]
    fn symmetry_alias() {
        let text = SAMPLE
            .replace("layout = \"symmetric\"", "symmetry_edge = \"left\"")
            .replace("edge = \"bottom\"\nfrom = 0.0", "edge = \"symmetry\"\nfrom = 0.0");
        let c = ProblemConfig::from_toml(&text).unwrap();
        assert_eq!(c.edge("symmetry").unwrap(), Edge::Left);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            ProblemConfig::from_file("/nonexistent/presstopo.toml"),
            Err(Error::Io { .. })
        ));
    }
}
