//! JSON experiment configurations. Unknown keys are rejected everywhere.
//!
//! ```json
//! {
//!   "name": "clover",
//!   "domain": { "shape": "mask", "mask": { "kind": "clover" }, "resolution": 200 },
//!   "kernel": { "family": "exponential", "sigma": 1.0 },
//!   "bounds": { "mass_fraction": 0.25 },
//!   "solver": { "seed": 1, "init": "random" },
//!   "output": { "dir": "out/clover", "snapshot_every": 10 }
//! }
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use maxenergy::geometry::{
    build_circle, build_cross, build_interval, build_interval_union, build_mask_region, BBox, Mask,
};
use maxenergy::pointset::{parameter_bridge, AdmissibleParams};
use maxenergy::rearrange::random_admissible_init;
use maxenergy::{io, DensityBounds, DensityField, Domain, Kernel, SolverSettings};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval {
        #[serde(default = "minus_one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
        n_cells: usize,
    },
    IntervalUnion {
        segments: Vec<(f64, f64)>,
        n_cells_per_unit: usize,
    },
    Mask {
        mask: Mask,
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<BBox>,
    },
    Circle {
        n_nodes: usize,
    },
    Cross {
        #[serde(default = "one")]
        half_length: f64,
        n_cells_per_axis: usize,
    },
    /// A node file as written by `io::write_nodes`.
    File {
        path: PathBuf,
    },
}

fn minus_one() -> f64 {
    -1.0
}

fn one() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        Ok(match self {
            DomainSpec::Interval { a, b, n_cells } => build_interval(*a, *b, *n_cells)?,
            DomainSpec::IntervalUnion {
                segments,
                n_cells_per_unit,
            } => build_interval_union(segments, *n_cells_per_unit)?,
            DomainSpec::Mask { mask, resolution, bbox } => build_mask_region(*mask, *bbox, *resolution)?,
            DomainSpec::Circle { n_nodes } => build_circle(*n_nodes)?,
            DomainSpec::Cross {
                half_length,
                n_cells_per_axis,
            } => build_cross(*half_length, *n_cells_per_axis)?,
            DomainSpec::File { path } => {
                let f = File::open(path).with_context(|| format!("opening domain file {}", path.display()))?;
                io::read_nodes(f)
                    .with_context(|| format!("reading domain file {}", path.display()))?
                    .0
            }
        })
    }
}

/// Exactly one of three forms:
/// `{rho_plus, rho_minus}`, `{r, R, d}` (through the parameter bridge) or
/// `{mass_fraction, rho_minus_ratio?}` (ρ₋ = ratio/|Ω|, default ratio ½).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_minus_ratio: Option<f64>,
}

impl BoundsSpec {
    pub fn resolve(&self, domain: &Domain) -> Result<DensityBounds> {
        let explicit = self.rho_plus.is_some() || self.rho_minus.is_some();
        let bridge = self.r.is_some() || self.big_r.is_some() || self.d.is_some();
        let fraction = self.mass_fraction.is_some() || self.rho_minus_ratio.is_some();
        let given = [explicit, bridge, fraction].iter().filter(|&&b| b).count();
        ensure!(
            given == 1,
            "bounds need exactly one of {{rho_plus, rho_minus}}, {{r, R, d}} or {{mass_fraction}}"
        );
        let bounds = if explicit {
            match (self.rho_plus, self.rho_minus) {
                (Some(p), Some(m)) => DensityBounds::new(m, p)?,
                _ => bail!("explicit bounds need both rho_plus and rho_minus"),
            }
        } else if bridge {
            match (self.r, self.big_r, self.d) {
                (Some(r), Some(big_r), Some(d)) => {
                    ensure!(
                        d == domain.intrinsic_dim(),
                        "bounds use d = {d} but the domain has dimension {}",
                        domain.intrinsic_dim()
                    );
                    parameter_bridge(r, big_r, d)?
                }
                _ => bail!("bridge bounds need r, R and d"),
            }
        } else {
            let f = self.mass_fraction.context("mass_fraction is missing")?;
            DensityBounds::from_mass_fraction(domain.total_measure(), f, self.rho_minus_ratio.unwrap_or(0.5))?
        };
        bounds
            .target_plus_mass(domain)
            .context("bounds are infeasible on this domain")?;
        Ok(bounds)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// ρ ≡ 1/|Ω|.
    Uniform,
    /// Seeded random bang-bang density.
    #[default]
    Random,
    /// Density file with a value column on the same nodes.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitSpec,
}

fn default_max_iter() -> usize {
    SolverSettings::default().max_iter
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol: 0.0,
            max_iter: default_max_iter(),
            seed: 0,
            init: InitSpec::Random,
        }
    }
}

impl SolverSpec {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn initial_density(&self, domain: &Domain, bounds: DensityBounds) -> Result<DensityField> {
        Ok(match &self.init {
            InitSpec::Uniform => DensityField::uniform(domain, bounds)?,
            InitSpec::Random => random_admissible_init(domain, bounds, self.seed)?,
            InitSpec::File(path) => {
                let f = File::open(path).with_context(|| format!("opening init file {}", path.display()))?;
                let (nodes, values) =
                    io::read_nodes(f).with_context(|| format!("reading init file {}", path.display()))?;
                let values = values.with_context(|| format!("{} has no value column", path.display()))?;
                ensure!(
                    nodes.len() == domain.len()
                        && nodes
                            .coords()
                            .iter()
                            .zip(domain.coords())
                            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs())),
                    "init file {} is not on the configured domain",
                    path.display()
                );
                DensityField::new(domain, values, bounds)?
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write a snapshot every K iterations; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
}

/// Configuration of `solve-density`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub domain: DomainSpec,
    pub kernel: Kernel,
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DomainSpec::File { path } = &mut cfg.domain {
            *path = base.join(&*path);
        }
        if let InitSpec::File(p) = &mut cfg.solver.init {
            *p = base.join(&*p);
        }
        if let Some(dir) = &mut cfg.output.dir {
            *dir = base.join(&*dir);
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn check_files(&self) -> Result<()> {
        let mut files = Vec::new();
        if let DomainSpec::File { path } = &self.domain {
            files.push(path);
        }
        if let InitSpec::File(p) = &self.solver.init {
            files.push(p);
        }
        for f in files {
            ensure!(f.is_file(), "referenced file {} does not exist", f.display());
        }
        Ok(())
    }
}

/// Configuration of `solve-discrete`: n points on [−1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub n: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub kernel: Kernel,
    #[serde(default = "default_coarse")]
    pub coarse: usize,
    #[serde(default = "default_refine")]
    pub refine_levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_coarse() -> usize {
    64
}

fn default_refine() -> usize {
    3
}

impl DiscreteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: DiscreteConfig = read_json(path)?;
        if let Some(dir) = &mut cfg.out_dir {
            *dir = path.parent().unwrap_or(Path::new("")).join(&*dir);
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<AdmissibleParams> {
        Ok(AdmissibleParams::new(self.r, self.big_r, 1)?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}
