//! Pipeline configuration: a TOML file with one table per stage.
//!
//! ```toml
//! [model]
//! omega_x = 1.1
//! omega_y = 1.0
//! lambda = -0.11
//!
//! [search]
//! method = "se"
//! state = [2, 2]
//! energy_range = [5.1, 5.3]
//! ```
//!
//! Every key has a default; see `configs/barbanis.toml` for the full list.

use std::path::{Path, PathBuf};

use causticwave::arc1d::{Method, SearchOptions};
use causticwave::caustic::HarvestOptions;
use causticwave::dynamics::{default_dt, default_t_max};
use causticwave::field2d::{AmplitudeMode, Parity};
use causticwave::Model;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub omega_x: f64,
    pub omega_y: f64,
    pub lambda: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = Model::barbanis();
        Self {
            omega_x: m.omega_x,
            omega_y: m.omega_y,
            lambda: m.lambda,
            mass: m.mass,
            hbar: m.hbar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub method: Method,
    /// `(n1, n2)`: nodes along x and along y.
    pub state: [usize; 2],
    pub parity: Parity,
    pub energy_range: [f64; 2],
    /// Vertex direction range in degrees from the +x axis.
    pub theta_range_deg: [f64; 2],
    pub energy_tol: f64,
    pub regularity_tol: f64,
    pub max_iter: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            method: Method::Se,
            state: [2, 2],
            parity: Parity::Even,
            energy_range: [5.1, 5.3],
            theta_range_deg: [-170.0, -100.0],
            energy_tol: 1e-7,
            regularity_tol: 1e-3,
            max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    /// Time step; `0` selects `T_min / 2000`.
    pub dt: f64,
    /// Longest harvesting time; `0` selects `400 T_min`.
    pub t_max: f64,
    /// Harvest stop tolerance on the arc change between refits.
    pub stop_tol: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self {
            dt: 0.0,
            t_max: 0.0,
            stop_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    /// Start point at rest, used when no eigenstate is cached.
    pub vertex: [f64; 2],
    pub duration: f64,
    /// Keep every `stride`-th sample in the trajectory output.
    pub stride: usize,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            vertex: [-2.204, -1.650],
            duration: 60.0,
            stride: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    /// Target mesh edge length.
    pub h: f64,
    /// Outer box margin in units of `ħ max(ω)` above `E`.
    pub margin: f64,
    pub amplitude: AmplitudeMode,
    /// Points per axis of the CSV rasters.
    pub raster: usize,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            h: 0.05,
            margin: 5.0,
            amplitude: AmplitudeMode::Constant,
            raster: 121,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub basis: [usize; 2],
    /// Half-width of the square raster.
    pub extent: f64,
    pub raster: usize,
    /// Raster points per axis used by `compare`.
    pub compare_raster: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            basis: [30, 30],
            extent: 6.0,
            raster: 241,
            compare_raster: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSection,
    pub search: SearchSection,
    pub dynamics: DynamicsSection,
    pub trace: TraceSection,
    pub field: FieldSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.model().map_err(|e| CliError::Config(e.to_string()))?;
        let s = &self.search;
        if !(s.energy_range[0] > 0.0 && s.energy_range[1] > s.energy_range[0]) {
            return bad(format!(
                "search.energy_range {:?} must be increasing and positive",
                s.energy_range
            ));
        }
        if !(s.theta_range_deg[1] > s.theta_range_deg[0]) {
            return bad("search.theta_range_deg must be increasing".into());
        }
        for (name, v) in [
            ("search.energy_tol", s.energy_tol),
            ("search.regularity_tol", s.regularity_tol),
            ("dynamics.stop_tol", self.dynamics.stop_tol),
            ("field.h", self.field.h),
            ("field.margin", self.field.margin),
            ("oracle.extent", self.oracle.extent),
            ("trace.duration", self.trace.duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("dynamics.dt", self.dynamics.dt),
            ("dynamics.t_max", self.dynamics.t_max),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if s.max_iter == 0 || self.trace.stride == 0 {
            return bad("search.max_iter and trace.stride must be at least 1".into());
        }
        if self.field.raster < 2 || self.oracle.raster < 2 || self.oracle.compare_raster < 2 {
            return bad("raster sizes must be at least 2".into());
        }
        if self.oracle.basis.iter().any(|&n| !(2..=40).contains(&n)) {
            return bad(format!(
                "oracle.basis {:?} must lie in 2..=40 per axis",
                self.oracle.basis
            ));
        }
        if s.method == Method::Qhje && self.field.h > 0.1 {
            return bad(
                "field.h above 0.1 is too coarse for the phase unwrapping of the qhje field".into(),
            );
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, causticwave::PotentialError> {
        let m = &self.model;
        Model::new(m.omega_x, m.omega_y, m.lambda, m.mass, m.hbar)
    }

    pub fn harvest(&self, model: &Model) -> HarvestOptions {
        let mut h = HarvestOptions::for_model(model);
        if self.dynamics.dt > 0.0 {
            h.dt = self.dynamics.dt;
        }
        h.t_max = if self.dynamics.t_max > 0.0 {
            self.dynamics.t_max
        } else {
            default_t_max(model)
        };
        h.stop_tol = self.dynamics.stop_tol;
        h
    }

    pub fn dt(&self, model: &Model) -> f64 {
        if self.dynamics.dt > 0.0 {
            self.dynamics.dt
        } else {
            default_dt(model)
        }
    }

    pub fn search_options(&self, model: &Model) -> SearchOptions {
        let s = &self.search;
        let mut o = SearchOptions::new(s.method, (s.state[0], s.state[1]), s.energy_range);
        o.theta_range = [
            s.theta_range_deg[0].to_radians(),
            s.theta_range_deg[1].to_radians(),
        ];
        o.energy_tol = s.energy_tol;
        o.regularity_tol = s.regularity_tol;
        o.max_iter = s.max_iter;
        o.harvest = Some(self.harvest(model));
        o
    }

    /// SHA-256 of the whole configuration.
    pub fn hash(&self) -> String {
        digest(self)
    }

    /// Hash of everything the eigen-search result depends on.
    pub fn search_hash(&self) -> String {
        digest(&(
            &self.model,
            &self.search.method,
            &self.search.state,
            &self.search.energy_range,
            &self.search.theta_range_deg,
            &self.search.energy_tol,
            &self.search.regularity_tol,
            &self.search.max_iter,
            &self.dynamics,
        ))
    }
}

fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("configuration serializes");
    let d = Sha256::digest(json.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::parse("").unwrap();
        assert_eq!(c, PipelineConfig::default());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::parse("[model]\nomega = 1.0\n").is_err());
        assert!(PipelineConfig::parse("[field]\nh = -0.1\n").is_err());
        assert!(PipelineConfig::parse("[model]\nmass = 0.0\n").is_err());
        assert!(PipelineConfig::parse("[search]\nenergy_range = [5.3, 5.1]\n").is_err());
    }

    #[test]
    fn search_hash_ignores_output_settings() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.field.h = 0.02;
        b.output.dir = "elsewhere".into();
        assert_eq!(a.search_hash(), b.search_hash());
        assert_ne!(a.hash(), b.hash());
        b.search.state = [1, 2];
        assert_ne!(a.search_hash(), b.search_hash());
    }
}
