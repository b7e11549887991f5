//! The volume-preserving threshold and the rearrangement iteration.
//!
//! One step maps ρ_s to the maximizer of ⟨Kρ_s, ρ⟩ over the admissible
//! class: ρ₊ on the superlevel set of Kρ_s of measure m₊, ρ₋ elsewhere. On a
//! grid the measure m₊ rarely fits a whole number of cells, so the node
//! straddling the threshold takes the one intermediate value that makes the
//! total mass exactly 1.
//!
//! Ties in φ are broken by node index. Stationarity is detected on the pair
//! (ρ₊ node set, fractional node), which is integer data and immune to
//! rounding in φ.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{DensityField, KernelOperator, NodeState};
use crate::{Domain, Error, Kernel, Result};

/// Relative slack when checking ρ₊ ≥ |Ω|⁻¹ ≥ ρ₋.
const BOUND_TOLERANCE: f64 = 1e-9;

/// Largest mass change accepted when snapping the fractional node to a bound.
const SNAP_MASS: f64 = 1e-13;

/// The pointwise bounds ρ₋ ≤ ρ ≤ ρ₊.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityBounds {
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl DensityBounds {
    /// Requires 0 < ρ₋ ≤ ρ₊ < ∞.
    pub fn new(rho_minus: f64, rho_plus: f64) -> Result<Self> {
        if !(rho_minus > 0.0 && rho_plus.is_finite() && rho_minus <= rho_plus) {
            return Err(Error::InvalidBounds(format!(
                "need 0 < rho_minus <= rho_plus, got rho_minus = {rho_minus}, rho_plus = {rho_plus}"
            )));
        }
        Ok(DensityBounds {
            rho_minus,
            rho_plus,
        })
    }

    /// Bounds giving ρ₊-mass fraction `fraction` of |Ω|, with ρ₋ = ratio/|Ω|.
    pub fn from_mass_fraction(measure: f64, fraction: f64, rho_minus_ratio: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidBounds(format!(
                "mass fraction must be in (0, 1], got {fraction}"
            )));
        }
        if !(rho_minus_ratio > 0.0 && rho_minus_ratio < 1.0) {
            return Err(Error::InvalidBounds(format!(
                "rho_minus ratio must be in (0, 1), got {rho_minus_ratio}"
            )));
        }
        let rho_minus = rho_minus_ratio / measure;
        let rho_plus = rho_minus + (1.0 - rho_minus * measure) / (fraction * measure);
        DensityBounds::new(rho_minus, rho_plus)
    }

    /// Checks ρ₊ ≥ |Ω|⁻¹ ≥ ρ₋ up to a relative 1e−9.
    pub fn check_measure(&self, measure: f64) -> Result<()> {
        let inv = 1.0 / measure;
        if self.rho_plus < inv * (1.0 - BOUND_TOLERANCE) || self.rho_minus > inv * (1.0 + BOUND_TOLERANCE) {
            return Err(Error::InvalidBounds(format!(
                "need rho_plus >= 1/|Omega| >= rho_minus with 1/|Omega| = {inv}, got [{}, {}]",
                self.rho_minus, self.rho_plus
            )));
        }
        Ok(())
    }

    /// m₊ = (1 − ρ₋|Ω|)/(ρ₊ − ρ₋), clamped to [0, |Ω|]; |Ω| when ρ₊ = ρ₋.
    pub fn plus_mass(&self, measure: f64) -> Result<f64> {
        self.check_measure(measure)?;
        let gap = self.rho_plus - self.rho_minus;
        if gap <= BOUND_TOLERANCE * self.rho_plus {
            return Ok(measure);
        }
        Ok(((1.0 - self.rho_minus * measure) / gap).clamp(0.0, measure))
    }

    pub fn target_plus_mass(&self, domain: &Domain) -> Result<f64> {
        self.plus_mass(domain.total_measure())
    }
}

/// Measure of the ρ₊ region of any bang-bang admissible density.
pub fn target_plus_mass(domain: &Domain, rho_plus: f64, rho_minus: f64) -> Result<f64> {
    DensityBounds::new(rho_minus, rho_plus)?.target_plus_mass(domain)
}

/// The admissible density maximizing ⟨φ, ρ⟩: ρ₊ on the nodes with the
/// largest φ (ties by lower index) up to measure m₊, one fractional node to
/// make the mass exact, ρ₋ on the rest.
pub fn volume_threshold(domain: &Domain, phi: &[f64], bounds: DensityBounds) -> Result<DensityField> {
    if phi.len() != domain.len() {
        return Err(Error::DimensionMismatch {
            expected: domain.len(),
            got: phi.len(),
        });
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameters("threshold input is not finite".into()));
    }
    let measure = domain.total_measure();
    let m_plus = bounds.plus_mass(measure)?;
    let w = domain.weights();
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));

    let mut values = vec![bounds.rho_minus; phi.len()];
    let slack = 1e-12 * measure;
    let mut cum = 0.0;
    let mut next = order.len();
    for (k, &i) in order.iter().enumerate() {
        if cum + w[i] > m_plus + slack {
            next = k;
            break;
        }
        cum += w[i];
        values[i] = bounds.rho_plus;
    }
    if let Some(&f) = order.get(next) {
        // Mass of everything except f, with f's own ρ₋ share removed.
        let rest = bounds.rho_plus * cum + bounds.rho_minus * (measure - cum - w[f]);
        let mut v = ((1.0 - rest) / w[f]).clamp(bounds.rho_minus, bounds.rho_plus);
        // A value that is a bound up to rounding in the mass sums is snapped
        // to it; the mass moves by at most SNAP_MASS.
        for bound in [bounds.rho_minus, bounds.rho_plus] {
            if (v - bound).abs() * w[f] <= SNAP_MASS {
                v = bound;
            }
        }
        values[f] = v;
    }
    Ok(DensityField::from_parts(values, bounds))
}

/// A pseudo-random bang-bang density: nodes are shuffled with a seeded
/// ChaCha8 generator and the first ones in shuffled order receive ρ₊.
pub fn random_admissible_init(domain: &Domain, bounds: DensityBounds, seed: u64) -> Result<DensityField> {
    let mut perm: Vec<usize> = (0..domain.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut score = vec![0.0; domain.len()];
    for (rank, &i) in perm.iter().enumerate() {
        score[i] = -(rank as f64);
    }
    volume_threshold(domain, &score, bounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Stop once ‖ρ_s − ρ_{s−1}‖_{L¹} ≤ tol; 0 disables the test.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 0.0,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StationarySet,
    L1BelowTol,
    MaxIter,
}

/// Per-iteration record of a solve.
///
/// `energies[0]` is the energy of the initial density and `energies[s]` the
/// energy after step s; `l1_changes[s − 1]` and `set_changed[s − 1]` describe
/// step s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub energies: Vec<f64>,
    pub l1_changes: Vec<f64>,
    pub set_changed: Vec<bool>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub kkt_alpha_star: f64,
    pub kkt_violating_mass: f64,
    pub tie_break: String,
}

/// Relative slack allowed on an energy decrease.
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

impl SolveReport {
    /// Checks E(ρ_{s+1}) ≥ E(ρ_s) − 1e−12|E(ρ_s)| for every step and strict
    /// increase on steps that changed the ρ₊ set. Returns the first failure.
    pub fn check_monotone(&self) -> std::result::Result<(), String> {
        for (s, pair) in self.energies.windows(2).enumerate() {
            let (prev, next) = (pair[0], pair[1]);
            if next < prev - MONOTONE_TOLERANCE * prev.abs() {
                return Err(format!("energy decreased at step {}: {prev} -> {next}", s + 1));
            }
            if self.set_changed.get(s).copied().unwrap_or(false) && next <= prev {
                return Err(format!(
                    "set changed at step {} without an energy increase: {prev} -> {next}",
                    s + 1
                ));
            }
        }
        Ok(())
    }
}

/// State passed to a [`solve_with`] observer after each step.
pub struct Step<'a> {
    pub iteration: usize,
    pub density: &'a DensityField,
    pub energy: f64,
}

/// Runs the rearrangement iteration from `init` to a stationary ρ₊ set.
pub fn solve(
    domain: &Domain,
    kernel: Kernel,
    bounds: DensityBounds,
    init: &DensityField,
    settings: SolverSettings,
) -> Result<(DensityField, SolveReport)> {
    let op = KernelOperator::new(domain, kernel)?;
    solve_with(&op, bounds, init, settings, |_| {})
}

/// [`solve`] on a prepared operator, calling `observer` after every step.
pub fn solve_with(
    op: &KernelOperator<'_>,
    bounds: DensityBounds,
    init: &DensityField,
    settings: SolverSettings,
    mut observer: impl FnMut(&Step<'_>),
) -> Result<(DensityField, SolveReport)> {
    let domain = op.domain();
    if init.bounds() != bounds {
        return Err(Error::NotAdmissible(
            "initial density was built for different bounds".into(),
        ));
    }
    if !(settings.tol >= 0.0) {
        return Err(Error::InvalidParameters(format!("tol must be >= 0, got {}", settings.tol)));
    }
    let mut rho = DensityField::new(domain, init.values().to_vec(), bounds)?;
    bounds.target_plus_mass(domain)?;
    let w = domain.weights();

    let mut phi = op.apply(rho.values())?;
    let mut energies = vec![op.energy_given(rho.values(), &phi)];
    let mut l1_changes = Vec::new();
    let mut set_changed = Vec::new();
    let mut signature = set_signature(&rho);
    let mut stop_reason = StopReason::MaxIter;

    for s in 1..=settings.max_iter {
        let next = volume_threshold(domain, &phi, bounds)?;
        let l1: f64 = next
            .values()
            .iter()
            .zip(rho.values())
            .zip(w)
            .map(|((a, b), w)| (a - b).abs() * w)
            .sum();
        let next_phi = op.apply(next.values())?;
        let energy = op.energy_given(next.values(), &next_phi);
        let next_signature = set_signature(&next);
        let changed = next_signature != signature;

        energies.push(energy);
        l1_changes.push(l1);
        set_changed.push(changed);
        rho = next;
        phi = next_phi;
        signature = next_signature;
        observer(&Step {
            iteration: s,
            density: &rho,
            energy,
        });

        if !changed {
            stop_reason = StopReason::StationarySet;
            break;
        }
        if settings.tol > 0.0 && l1 <= settings.tol {
            stop_reason = StopReason::L1BelowTol;
            break;
        }
    }

    let kkt = op.kkt_residual_given(&rho, &phi)?;
    let report = SolveReport {
        iterations: l1_changes.len(),
        energies,
        l1_changes,
        set_changed,
        stop_reason,
        kkt_alpha_star: kkt.alpha_star,
        kkt_violating_mass: kkt.violating_mass,
        tie_break: "lowest_node_index".into(),
    };
    Ok((rho, report))
}

fn set_signature(rho: &DensityField) -> (Vec<usize>, Option<usize>) {
    let plus = rho.plus_set();
    let frac = (0..rho.len()).find(|&i| rho.state(i) == NodeState::Fractional);
    (plus, frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::inner;
    use crate::geometry::{build_interval, build_mask_region, Mask};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn b(minus: f64, plus: f64) -> DensityBounds {
        DensityBounds::new(minus, plus).unwrap()
    }

    #[test]
    fn target_plus_mass_examples() {
        let d = build_interval(-1.0, 1.0, 10).unwrap();
        assert_relative_eq!(target_plus_mass(&d, 1.0, 0.25).unwrap(), 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(target_plus_mass(&d, 0.5, 0.5).unwrap(), d.total_measure());
        let d4 = build_interval(-2.0, 2.0, 10).unwrap();
        assert_relative_eq!(target_plus_mass(&d4, 0.5, 0.125).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        assert!(target_plus_mass(&d, 0.4, 0.25).is_err());
        assert!(target_plus_mass(&d, 1.0, 0.6).is_err());
        assert!(DensityBounds::new(0.5, 0.25).is_err());
    }

    #[test]
    fn mass_fraction_bounds() {
        let bounds = DensityBounds::from_mass_fraction(4.0, 0.25, 0.5).unwrap();
        assert_relative_eq!(bounds.plus_mass(4.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(bounds.rho_minus, 0.125);
    }

    #[test]
    fn threshold_exact_fit() {
        let d = build_interval(-1.0, 1.0, 3).unwrap();
        let rho = volume_threshold(&d, &[0.0, 1.0, 0.0], b(0.25, 1.0)).unwrap();
        assert_relative_eq!(rho.values()[1], 1.0);
        assert_relative_eq!(rho.values()[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(rho.values()[2], 0.25, epsilon = 1e-12);
        assert_eq!(rho.plus_set(), vec![1]);
        assert!(rho.fractional_nodes().is_empty());
    }

    #[test]
    fn threshold_constant_phi_uses_index_order() {
        let d = build_interval(-1.0, 1.0, 12).unwrap();
        let rho = volume_threshold(&d, &[0.0; 12], b(0.25, 1.0)).unwrap();
        // m₊ = 2/3 = 4 cells of width 1/6.
        assert_eq!(rho.plus_set(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn threshold_of_negative_distance_gives_centered_interval() {
        let d = build_interval(-1.0, 1.0, 2000).unwrap();
        let phi: Vec<f64> = d.nodes().map(|x| -x[0].abs()).collect();
        let rho = volume_threshold(&d, &phi, b(0.25, 1.0)).unwrap();
        let h = 1e-3;
        for i in rho.plus_set() {
            assert!(d.node(i)[0].abs() <= 1.0 / 3.0 + h);
        }
        assert!((rho.plus_measure(&d) - 2.0 / 3.0).abs() <= h);
        assert!(rho.is_bang_bang());
        assert_relative_eq!(rho.mass(&d), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_init_is_seeded() {
        let d = build_interval(-1.0, 1.0, 200).unwrap();
        let bounds = b(0.25, 1.0);
        let a = random_admissible_init(&d, bounds, 0).unwrap();
        assert_eq!(a, random_admissible_init(&d, bounds, 0).unwrap());
        assert_ne!(a.plus_set(), random_admissible_init(&d, bounds, 1).unwrap().plus_set());
        assert!(DensityField::new(&d, a.values().to_vec(), bounds).is_ok());
    }

    #[test]
    fn interval_solve_finds_centered_block() {
        let d = build_interval(-1.0, 1.0, 400).unwrap();
        let bounds = b(0.25, 1.0);
        let init = random_admissible_init(&d, bounds, 7).unwrap();
        let kernel = Kernel::Exponential { sigma: 1.0 };
        let (rho, report) = solve(&d, kernel, bounds, &init, SolverSettings::default()).unwrap();
        assert_eq!(report.stop_reason, StopReason::StationarySet);
        report.check_monotone().unwrap();
        let h = 2.0 / 400.0;
        for i in rho.plus_set() {
            assert!(d.node(i)[0].abs() <= 1.0 / 3.0 + 2.0 * h);
        }
        assert!(report.kkt_violating_mass <= 2.0 * h);
    }

    #[test]
    fn stationary_init_takes_one_step() {
        let d = build_interval(-1.0, 1.0, 300).unwrap();
        let bounds = b(0.25, 1.0);
        let kernel = Kernel::Exponential { sigma: 1.0 };
        let init = random_admissible_init(&d, bounds, 3).unwrap();
        let (fixed, _) = solve(&d, kernel, bounds, &init, SolverSettings::default()).unwrap();
        let (again, report) = solve(&d, kernel, bounds, &fixed, SolverSettings::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(report.stop_reason, StopReason::StationarySet);
        assert_eq!(again, fixed);
    }

    #[test]
    fn clover_blob_contains_center() {
        let d = build_mask_region(Mask::Clover, None, 48).unwrap();
        let bounds = DensityBounds::from_mass_fraction(d.total_measure(), 0.25, 0.5).unwrap();
        let init = random_admissible_init(&d, bounds, 0).unwrap();
        let kernel = Kernel::Exponential { sigma: 1.0 };
        let (rho, report) = solve(&d, kernel, bounds, &init, SolverSettings::default()).unwrap();
        assert_eq!(report.stop_reason, StopReason::StationarySet);
        let center = d.nearest_node(&[0.0, 0.0]);
        assert!(rho.plus_set().contains(&center));
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = build_interval(-1.0, 1.0, 10).unwrap();
        let bounds = b(0.25, 1.0);
        let init = random_admissible_init(&d, bounds, 0).unwrap();
        let kernel = Kernel::Exponential { sigma: 1.0 };
        let other = b(0.2, 1.0);
        assert!(solve(&d, kernel, other, &init, SolverSettings::default()).is_err());
        let d2 = build_interval(-1.0, 1.0, 12).unwrap();
        assert!(solve(&d2, kernel, bounds, &init, SolverSettings::default()).is_err());
        assert!(volume_threshold(&d, &[f64::NAN; 10], bounds).is_err());
    }

    #[test]
    fn symmetric_iterates_stay_symmetric() {
        // m₊ = 0.6 is exactly 600 cells, so no fractional node breaks the mirror.
        let d = build_interval(-1.0, 1.0, 2000).unwrap();
        let bounds = b(2.0 / 7.0, 1.0);
        let phi: Vec<f64> = d.nodes().map(|x| (3.0 * x[0]).cos() + x[0] * x[0]).collect();
        let init = volume_threshold(&d, &phi, bounds).unwrap();
        let op = KernelOperator::new(&d, Kernel::Exponential { sigma: 0.3 }).unwrap();
        let mut checked = 0;
        solve_with(&op, bounds, &init, SolverSettings::default(), |step| {
            let rho = step.density;
            assert!((0..2000).all(|i| rho.state(i) == rho.state(1999 - i)), "step {}", step.iteration);
            checked += 1;
        })
        .unwrap();
        assert!(checked >= 1);
    }

    /// Max of ⟨φ, ρ⟩ over the vertices of the admissible polytope: a ρ₊ set
    /// plus at most one fractional node.
    fn bathtub_brute_force(d: &Domain, phi: &[f64], bounds: DensityBounds) -> f64 {
        let n = d.len();
        let w = d.weights();
        let measure = d.total_measure();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << n) {
            let plus_w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum();
            let mut candidates: Vec<Option<usize>> = vec![None];
            candidates.extend((0..n).filter(|i| mask >> i & 1 == 0).map(Some));
            for f in candidates {
                let mut v: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { bounds.rho_plus } else { bounds.rho_minus })
                    .collect();
                if let Some(f) = f {
                    let rest = bounds.rho_plus * plus_w + bounds.rho_minus * (measure - plus_w - w[f]);
                    v[f] = (1.0 - rest) / w[f];
                }
                let mass: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                let in_bounds = v
                    .iter()
                    .all(|&x| x >= bounds.rho_minus - 1e-12 && x <= bounds.rho_plus + 1e-12);
                if in_bounds && (mass - 1.0).abs() < 1e-9 {
                    best = best.max(inner(d, phi, &v));
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn threshold_solves_the_bathtub_problem(
            weights in proptest::collection::vec(0.05f64..0.5, 8),
            phi in proptest::collection::vec(-1.0f64..1.0, 8),
            frac in 0.1f64..0.9,
        ) {
            let coords: Vec<f64> = (0..8).map(|i| i as f64).collect();
            let d = Domain::from_nodes(coords, weights, 1, 1, crate::Metric::Euclidean).unwrap();
            let bounds = DensityBounds::from_mass_fraction(d.total_measure(), frac, 0.5).unwrap();
            let rho = volume_threshold(&d, &phi, bounds).unwrap();
            prop_assert!(DensityField::new(&d, rho.values().to_vec(), bounds).is_ok());
            prop_assert!(rho.is_bang_bang());
            let best = bathtub_brute_force(&d, &phi, bounds);
            prop_assert!(inner(&d, &phi, rho.values()) >= best - 1e-12);
        }
    }
}
