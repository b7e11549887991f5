//! `eval-energy`: E[ρ] of a density file on a domain file.

use std::fs::File;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use maxenergy::energy::inner;
use maxenergy::{io, Domain, Kernel, KernelOperator};
use serde::Serialize;

use crate::config::read_json;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyEvaluation {
    pub kernel: Kernel,
    pub nodes: usize,
    pub measure: f64,
    pub mass: f64,
    pub energy: f64,
}

fn read_node_file(path: &Path) -> Result<(Domain, Option<Vec<f64>>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    io::read_nodes(f).with_context(|| format!("reading {}", path.display()))
}

pub fn run(domain_csv: &Path, density_csv: &Path, kernel_json: &Path) -> Result<EnergyEvaluation> {
    let (domain, _) = read_node_file(domain_csv)?;
    let (density_nodes, values) = read_node_file(density_csv)?;
    let values = values.with_context(|| format!("{} has no value column", density_csv.display()))?;
    ensure!(
        density_nodes.coords() == domain.coords() && density_nodes.weights() == domain.weights(),
        "{} is not on the nodes of {}",
        density_csv.display(),
        domain_csv.display()
    );
    let kernel: Kernel = read_json(kernel_json)?;
    kernel.validate_for_dim(domain.intrinsic_dim())?;
    let op = KernelOperator::new(&domain, kernel)?;
    Ok(EnergyEvaluation {
        kernel,
        nodes: domain.len(),
        measure: domain.total_measure(),
        mass: inner(&domain, &values, &vec![1.0; values.len()]),
        energy: op.energy(&values)?,
    })
}
