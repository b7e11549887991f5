//! `solve-discrete`: exhaustive search for n points on [−1, 1].

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use maxenergy::geometry::build_interval;
use maxenergy::oracles::{interval4_optimum, Interval4Case};
use maxenergy::pointset::{brute_force_interval, discrete_energy, is_admissible, mesh_ratio, separation, Admissibility};
use maxenergy::{io, Configuration, Kernel};
use serde::Serialize;

use crate::config::DiscreteConfig;
use crate::output;

/// The n = 4 closed-form optimum, when it applies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleComparison {
    pub case: Interval4Case,
    pub points: Vec<f64>,
    pub energy: f64,
    /// Largest coordinate gap to the closed form or its mirror image,
    /// whichever is closer.
    pub max_coordinate_gap: f64,
}

/// Contents of `report.json` for `solve-discrete`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub kernel: Kernel,
    pub coarse: usize,
    pub refine_levels: usize,
    pub lattice_step: f64,
    pub points: Vec<f64>,
    pub energy: f64,
    pub separation: f64,
    pub mesh_ratio: f64,
    pub admissibility: Admissibility,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
}

pub struct DiscreteRun {
    pub configuration: Configuration,
    pub report: DiscreteReport,
}

fn max_gap(a: &Configuration, b: &Configuration) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs the search. With `out`, writes `configuration.csv`, `report.json`
/// and `config.echo.json`.
pub fn run(cfg: &DiscreteConfig, out: Option<&Path>) -> Result<DiscreteRun> {
    let params = cfg.params()?;
    cfg.kernel.validate_for_dim(1)?;
    let bf = brute_force_interval(cfg.n, &params, &cfg.kernel, cfg.coarse, cfg.refine_levels)?;
    let domain = build_interval(-1.0, 1.0, 2)?;
    let admissibility = is_admissible(&bf.configuration, &params, &domain)?;
    let oracle = if cfg.n == 4 && cfg.kernel.completely_monotone() {
        interval4_optimum(cfg.r, cfg.big_r).ok().map(|o| OracleComparison {
            case: o.case,
            points: o.configuration.coords().to_vec(),
            energy: discrete_energy(&o.configuration, &cfg.kernel),
            max_coordinate_gap: max_gap(&o.configuration, &bf.configuration)
                .min(max_gap(&o.mirrored(), &bf.configuration)),
        })
    } else {
        None
    };
    let report = DiscreteReport {
        name: cfg.name.clone(),
        n: cfg.n,
        r: cfg.r,
        big_r: cfg.big_r,
        kernel: cfg.kernel,
        coarse: cfg.coarse,
        refine_levels: cfg.refine_levels,
        lattice_step: bf.step,
        points: bf.configuration.coords().to_vec(),
        energy: bf.energy,
        separation: separation(&bf.configuration),
        mesh_ratio: mesh_ratio(&bf.configuration, &domain)?,
        admissibility,
        oracle,
    };
    if let Some(dir) = out {
        output::write_json(&dir.join("config.echo.json"), cfg)?;
        let path = dir.join("configuration.csv");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        io::write_configuration(BufWriter::new(f), &bf.configuration)?;
        output::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(DiscreteRun {
        configuration: bf.configuration,
        report,
    })
}
