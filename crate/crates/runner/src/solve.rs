//! `solve-density`: run the rearrangement iteration for one configuration
//! and write its artifacts.

use std::cell::RefCell;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use maxenergy::analysis::{centroid, circular_runs, diameter, grid_components, index_runs, second_moment_ratio};
use maxenergy::energy::Backend;
use maxenergy::geometry::Descriptor;
use maxenergy::rearrange::solve_with;
use maxenergy::{DensityBounds, DensityField, Domain, Kernel, KernelOperator, SolveReport, StopReason};
use serde::Serialize;

use crate::config::{ExperimentConfig, InitSpec};
use crate::output;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSummary {
    pub descriptor: Descriptor,
    pub metric: &'static str,
    pub intrinsic_dim: usize,
    pub nodes: usize,
    pub measure: f64,
}

impl DomainSummary {
    pub fn of(domain: &Domain) -> Self {
        DomainSummary {
            descriptor: domain.descriptor().clone(),
            metric: domain.metric().name(),
            intrinsic_dim: domain.intrinsic_dim(),
            nodes: domain.len(),
            measure: domain.total_measure(),
        }
    }
}

/// Geometry of the final ρ₊ node set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeSummary {
    pub centroid: Vec<f64>,
    pub centroid_norm: f64,
    pub diameter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_moment_ratio: Option<f64>,
    /// Connected pieces: 4-connected components on grids, runs of nodes on
    /// intervals and circles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
}

impl ShapeSummary {
    pub fn of(domain: &Domain, nodes: &[usize]) -> Self {
        let c = centroid(domain, nodes);
        let planar = domain.ambient_dim() == 2 && domain.intrinsic_dim() == 2;
        let components = match domain.descriptor() {
            Descriptor::Mask { .. } => grid_components(domain, nodes).ok(),
            Descriptor::Circle { n_nodes } => Some(circular_runs(*n_nodes, nodes)),
            Descriptor::Interval { .. } => Some(index_runs(nodes)),
            _ => None,
        };
        ShapeSummary {
            centroid_norm: c.iter().map(|v| v * v).sum::<f64>().sqrt(),
            centroid: c,
            diameter: diameter(domain, nodes),
            second_moment_ratio: if planar && nodes.len() > 2 {
                second_moment_ratio(domain, nodes).ok()
            } else {
                None
            },
            components,
        }
    }
}

/// Contents of `report.json`. Holds no timings, so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub domain: DomainSummary,
    pub kernel: Kernel,
    pub bounds: DensityBounds,
    pub target_plus_measure: f64,
    pub backend: &'static str,
    pub init: InitSpec,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(flatten)]
    pub solve: SolveReport,
    pub final_energy: f64,
    pub mass: f64,
    pub plus_measure: f64,
    pub fractional_nodes: Vec<usize>,
    pub shape: ShapeSummary,
}

pub struct DensityRun {
    pub domain: Domain,
    pub density: DensityField,
    pub report: RunReport,
}

impl DensityRun {
    pub fn stationary(&self) -> bool {
        self.report.solve.stop_reason != StopReason::MaxIter
    }
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Direct => "direct",
        Backend::GridFft => "grid_fft",
    }
}

/// Runs one configuration. With `out`, writes `density.csv`, `density.pgm`,
/// `trace.csv`, `report.json`, `config.echo.json` and the snapshots.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<DensityRun> {
    let domain = cfg.domain.build()?;
    cfg.kernel.validate_for_dim(domain.intrinsic_dim())?;
    let bounds = cfg.bounds.resolve(&domain)?;
    let init = cfg.solver.initial_density(&domain, bounds)?;
    let op = KernelOperator::new(&domain, cfg.kernel)?;

    if let Some(dir) = out {
        output::write_json(&dir.join("config.echo.json"), cfg)?;
    }
    let every = cfg.output.snapshot_every;
    let snapshot_error = RefCell::new(None);
    let snapshot = |s: &maxenergy::rearrange::Step<'_>| {
        let (Some(dir), true) = (out, every > 0 && s.iteration % every == 0) else {
            return;
        };
        if snapshot_error.borrow().is_some() {
            return;
        }
        let stem = snapshot_stem(dir, s.iteration);
        let written = output::write_density_csv(&stem.with_extension("csv"), &domain, s.density)
            .and_then(|_| output::write_pgm(&stem.with_extension("pgm"), &domain, s.density));
        if let Err(e) = written {
            *snapshot_error.borrow_mut() = Some(e);
        }
    };
    let (density, solve) = solve_with(&op, bounds, &init, cfg.solver.settings(), snapshot)?;
    if let Some(e) = snapshot_error.into_inner() {
        return Err(e.context("writing a snapshot"));
    }

    let plus = density.plus_set();
    let report = RunReport {
        name: cfg.name.clone(),
        domain: DomainSummary::of(&domain),
        kernel: cfg.kernel,
        bounds,
        target_plus_measure: bounds.target_plus_mass(&domain)?,
        backend: backend_name(op.backend()),
        init: cfg.solver.init.clone(),
        seed: cfg.solver.seed,
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        final_energy: *solve.energies.last().expect("energy trace starts with the initial energy"),
        mass: density.mass(&domain),
        plus_measure: density.plus_measure(&domain),
        fractional_nodes: density.fractional_nodes(),
        shape: ShapeSummary::of(&domain, &plus),
        solve,
    };

    if let Some(dir) = out {
        output::write_density_csv(&dir.join("density.csv"), &domain, &density)?;
        output::write_pgm(&dir.join("density.pgm"), &domain, &density)?;
        output::write_trace(&dir.join("trace.csv"), &report.solve)?;
        if let Err(msg) = report.solve.check_monotone() {
            bail!("energy trace failed the monotonicity check ({msg}); report.json not written");
        }
        output::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(DensityRun {
        domain,
        density,
        report,
    })
}

pub fn snapshot_stem(dir: &Path, iteration: usize) -> PathBuf {
    dir.join("snapshots").join(format!("iter_{iteration:05}"))
}
