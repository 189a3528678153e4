use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::field::{FracParams, Grid};
use crate::profiles::ProfileConfig;
use crate::subcritical::{DefectConfig, DomainSpec, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "dim_N")]
    pub dim: usize,
    #[serde(rename = "points_M")]
    pub points: usize,
    #[serde(rename = "extent_L")]
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracConfig {
    pub order_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    #[serde(rename = "dim_N")]
    pub dim: usize,
    pub order_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpConstantConfig {
    pub points: Vec<SweepPoint>,
}

impl Default for SharpConstantConfig {
    fn default() -> Self {
        let table: [(usize, [f64; 5]); 4] = [
            (1, [0.05, 0.1, 0.2, 0.25, 0.4]),
            (2, [0.1, 0.25, 0.5, 0.75, 0.9]),
            (3, [0.25, 0.5, 1.0, 1.25, 1.4]),
            (4, [0.5, 1.0, 1.5, 1.75, 1.9]),
        ];
        let points = table
            .iter()
            .flat_map(|(n, ss)| ss.iter().map(move |&s| SweepPoint { dim: *n, order_s: s }))
            .collect();
        Self { points }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    /// Field file to report on; the reference corpus when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Interpolation exponent; `2/2*` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default = "default_r")]
    pub morrey_r: f64,
}

fn default_r() -> f64 {
    2.0
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            theta: None,
            morrey_r: default_r(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesConfig {
    #[serde(default = "d_profiles")]
    pub max_profiles: usize,
    #[serde(default = "d_tau")]
    pub stop_fraction: f64,
    #[serde(default = "d_rho")]
    pub window_radius: f64,
    /// Fractional order for this experiment; the global one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_s: Option<f64>,
    /// Field file to decompose; the two-bubble synthetic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub write_fields: bool,
}

fn d_profiles() -> usize {
    ProfileConfig::default().max_profiles
}
fn d_tau() -> f64 {
    ProfileConfig::default().stop_fraction
}
fn d_rho() -> f64 {
    ProfileConfig::default().window_radius
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        Self {
            max_profiles: d_profiles(),
            stop_fraction: d_tau(),
            window_radius: d_rho(),
            order_s: None,
            input: None,
            write_fields: false,
        }
    }
}

impl ProfilesConfig {
    pub fn extraction(&self) -> ProfileConfig {
        ProfileConfig {
            max_profiles: self.max_profiles,
            stop_fraction: self.stop_fraction,
            window_radius: self.window_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcriticalConfig {
    /// Disk of radius `0.225·L` at the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(rename = "points_M", default = "d_sub_m")]
    pub points: usize,
    #[serde(rename = "extent_L", default = "d_sub_l")]
    pub extent: f64,
    /// `{0.8, 0.4, 0.2, 0.1}·(2*-2)/2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default = "d_iter")]
    pub max_iter: usize,
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default = "d_starts")]
    pub starts: usize,
    #[serde(default = "d_cell")]
    pub cell_points: usize,
    #[serde(default = "d_thr")]
    pub atom_threshold: f64,
}

fn d_sub_m() -> usize {
    64
}
fn d_sub_l() -> f64 {
    4.0
}
fn d_iter() -> usize {
    SolverConfig::default().max_iter
}
fn d_tol() -> f64 {
    SolverConfig::default().tolerance
}
fn d_starts() -> usize {
    SolverConfig::default().starts
}
fn d_cell() -> usize {
    DefectConfig::default().cell_points
}
fn d_thr() -> f64 {
    DefectConfig::default().atom_threshold
}

impl Default for SubcriticalConfig {
    fn default() -> Self {
        Self {
            domain: None,
            points: d_sub_m(),
            extent: d_sub_l(),
            eps_list: None,
            max_iter: d_iter(),
            tolerance: d_tol(),
            starts: d_starts(),
            cell_points: d_cell(),
            atom_threshold: d_thr(),
        }
    }
}

fn d_seed() -> u64 {
    20260101
}

fn d_out() -> PathBuf {
    PathBuf::from("fslab-out")
}

/// Everything a run needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out")]
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub frac: FracConfig,
    #[serde(default)]
    pub sharp_constant: SharpConstantConfig,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub profiles: ProfilesConfig,
    #[serde(default)]
    pub subcritical: SubcriticalConfig,
}

fn at(key: &str, e: LabError) -> LabError {
    let message = match e {
        LabError::InvalidParameter(m) => m,
        other => other.to_string(),
    };
    LabError::Config {
        path: key.to_string(),
        message,
    }
}

/// Sets `key` (dotted path) to `value`, read as a TOML value when it parses
/// as one and as a string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| LabError::Config {
        path: assignment.to_string(),
        message: "override must look like key=value".into(),
    })?;
    let key = key.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| LabError::Config {
            path: key.to_string(),
            message: format!("`{part}` is not a section"),
        })?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl LabConfig {
    pub fn from_toml_str(text: &str, origin: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| LabError::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: LabConfig = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| LabError::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string(), overrides)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.points, self.grid.extent).map_err(|e| at("grid", e))
    }

    pub fn frac(&self) -> Result<FracParams> {
        FracParams::new(self.grid.dim, self.frac.order_s).map_err(|e| at("frac.order_s", e))
    }

    pub fn profile_frac(&self) -> Result<FracParams> {
        match self.profiles.order_s {
            Some(s) => FracParams::new(self.grid.dim, s).map_err(|e| at("profiles.order_s", e)),
            None => self.frac(),
        }
    }

    pub fn subcritical_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.subcritical.points, self.subcritical.extent)
            .map_err(|e| at("subcritical", e))
    }

    pub fn domain(&self) -> DomainSpec {
        self.subcritical.domain.clone().unwrap_or(DomainSpec::Disk {
            center: vec![0.0; self.grid.dim],
            radius: 0.225 * self.subcritical.extent,
        })
    }

    pub fn eps_list(&self) -> Result<Vec<f64>> {
        Ok(match &self.subcritical.eps_list {
            Some(list) => list.clone(),
            None => crate::subcritical::default_eps_list(&self.frac()?),
        })
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iter: self.subcritical.max_iter,
            tolerance: self.subcritical.tolerance,
            window: SolverConfig::default().window,
            starts: self.subcritical.starts,
            seed: self.seed,
        }
    }

    pub fn defect(&self) -> DefectConfig {
        DefectConfig {
            cell_points: self.subcritical.cell_points,
            atom_threshold: self.subcritical.atom_threshold,
        }
    }

    /// Re-checks every cross-field constraint of the owning modules.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let p = self.frac()?;
        let pp = self.profile_frac()?;
        for (i, pt) in self.sharp_constant.points.iter().enumerate() {
            FracParams::new(pt.dim, pt.order_s).map_err(|e| at(&format!("sharp_constant.points[{i}]"), e))?;
        }
        let lower = 2.0 / p.two_star();
        if let Some(theta) = self.audit.theta {
            if !(theta >= lower && theta < 1.0) {
                return Err(at(
                    "audit.theta",
                    LabError::invalid(format!("theta must satisfy 2/2* = {lower} ≤ θ < 1, got {theta}")),
                ));
            }
        }
        let r = self.audit.morrey_r;
        if !(r >= 1.0 && r < p.two_star()) {
            return Err(at(
                "audit.morrey_r",
                LabError::invalid(format!("r must satisfy 1 ≤ r < 2* = {}, got {r}", p.two_star())),
            ));
        }
        self.profiles.extraction().validate().map_err(|e| at("profiles", e))?;
        let _ = pp;
        let sub = self.subcritical_grid()?;
        let mask = self.domain().mask(&sub).map_err(|e| at("subcritical.domain", e))?;
        let k = mask.iter().filter(|&&m| m).count();
        if k > crate::field::MAX_RESTRICTED_POINTS {
            return Err(at(
                "subcritical.domain",
                LabError::invalid(format!(
                    "domain holds {k} points, the dense solver accepts {}",
                    crate::field::MAX_RESTRICTED_POINTS
                )),
            ));
        }
        let eps = self.eps_list()?;
        let top = p.two_star() - 2.0;
        if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| !(e > 0.0 && e < top)) {
            return Err(at(
                "subcritical.eps_list",
                LabError::invalid(format!("need a strictly decreasing list inside (0, 2*-2) = (0, {top})")),
            ));
        }
        if self.subcritical.max_iter == 0 || !(self.subcritical.tolerance > 0.0) || self.subcritical.starts == 0 {
            return Err(at(
                "subcritical",
                LabError::invalid("max_iter, tolerance and starts must be positive"),
            ));
        }
        let c = self.subcritical.cell_points;
        if c == 0 || sub.points_per_axis() % c != 0 {
            return Err(at(
                "subcritical.cell_points",
                LabError::invalid("cell size must divide the grid"),
            ));
        }
        if !(self.subcritical.atom_threshold > 0.0 && self.subcritical.atom_threshold <= 1.0) {
            return Err(at("subcritical.atom_threshold", LabError::invalid("must lie in (0, 1]")));
        }
        let _ = grid;
        Ok(())
    }

    /// Canonical text: every default spelled out, fixed key order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
