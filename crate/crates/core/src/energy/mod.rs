//! The integral operator K, the energy E, the potential V and the KKT
//! residual, all under the domain's quadrature.
//!
//! (Kφ)_i = Σ_j k(x_i, x_j) φ_j w_j and E[ρ] = ½ Σ_i ρ_i w_i (Kρ)_i. For the
//! singular Riesz kernel the self-pair j = i is dropped, which matches the
//! i ≠ j sum of the discrete energy and leaves an O(h^{d−s}) quadrature bias.
//!
//! Two backends compute the same sums. [`Backend::Direct`] streams kernel
//! evaluations row by row (no matrix is stored). [`Backend::GridFft`] is used
//! automatically on mask domains, where the kernel is a convolution on the
//! grid. Both are bit-reproducible across thread counts: each output entry is
//! produced by one fixed sequence of floating-point operations.

mod convolution;

use std::ops::Deref;

use rayon::prelude::*;

use crate::geometry::Metric;
use crate::kernels::Profile;
use crate::rearrange::DensityBounds;
use crate::{Domain, Error, Kernel, Result};

use convolution::GridConvolution;

/// Relative tolerance for Σ ρ_i w_i = 1 when validating a density.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Values within `VALUE_TOLERANCE · ρ₊` of a bound count as that bound.
pub const VALUE_TOLERANCE: f64 = 1e-12;

/// Per-node values with no constraints (Kρ, V, scores).
#[derive(Clone, Debug, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Where a node's value sits relative to the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Plus,
    Minus,
    Fractional,
}

/// A density in the admissible class: ρ₋ ≤ ρ ≤ ρ₊ pointwise and unit mass.
///
/// Densities produced by the threshold step have at most one fractional
/// node; that is not enforced here because uniform starting points are
/// admissible too (see [`DensityField::is_bang_bang`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
    bounds: DensityBounds,
}

impl DensityField {
    /// Checks length, pointwise bounds and unit mass (relative 1e−9).
    pub fn new(domain: &Domain, values: Vec<f64>, bounds: DensityBounds) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: values.len(),
            });
        }
        let slack = VALUE_TOLERANCE * bounds.rho_plus;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= bounds.rho_minus - slack && v <= bounds.rho_plus + slack))
        {
            return Err(Error::NotAdmissible(format!(
                "value {v} at node {i} outside [{}, {}]",
                bounds.rho_minus, bounds.rho_plus
            )));
        }
        let mass = mass_of(domain, &values);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotAdmissible(format!("total mass {mass} is not 1")));
        }
        Ok(DensityField { values, bounds })
    }

    /// Builds a field without checks. Callers guarantee the invariants.
    pub(crate) fn from_parts(values: Vec<f64>, bounds: DensityBounds) -> Self {
        DensityField { values, bounds }
    }

    /// ρ ≡ 1/|Ω|.
    pub fn uniform(domain: &Domain, bounds: DensityBounds) -> Result<Self> {
        let v = 1.0 / domain.total_measure();
        DensityField::new(domain, vec![v; domain.len()], bounds)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> DensityBounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self, domain: &Domain) -> f64 {
        mass_of(domain, &self.values)
    }

    pub fn state(&self, i: usize) -> NodeState {
        let v = self.values[i];
        let slack = VALUE_TOLERANCE * self.bounds.rho_plus;
        if v >= self.bounds.rho_plus - slack {
            NodeState::Plus
        } else if v <= self.bounds.rho_minus + slack {
            NodeState::Minus
        } else {
            NodeState::Fractional
        }
    }

    /// Indices of nodes at ρ₊, increasing.
    pub fn plus_set(&self) -> Vec<usize> {
        self.indices_in(NodeState::Plus)
    }

    pub fn fractional_nodes(&self) -> Vec<usize> {
        self.indices_in(NodeState::Fractional)
    }

    /// At most one node strictly between the bounds.
    pub fn is_bang_bang(&self) -> bool {
        (0..self.len())
            .filter(|&i| self.state(i) == NodeState::Fractional)
            .nth(1)
            .is_none()
    }

    /// Weight of the ρ₊ nodes.
    pub fn plus_measure(&self, domain: &Domain) -> f64 {
        self.plus_set().iter().map(|&i| domain.weights()[i]).sum()
    }

    fn indices_in(&self, s: NodeState) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.state(i) == s).collect()
    }
}

fn mass_of(domain: &Domain, values: &[f64]) -> f64 {
    values.iter().zip(domain.weights()).map(|(v, w)| v * w).sum()
}

/// ⟨a, b⟩ = Σ a_i b_i w_i.
pub fn inner(domain: &Domain, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(domain.weights())
        .map(|((x, y), w)| x * y * w)
        .sum()
}

/// How K is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Streaming double sum over node pairs.
    Direct,
    /// FFT convolution; needs a mask domain with the Euclidean metric.
    GridFft,
}

enum Engine {
    Direct(Profile),
    Grid(GridConvolution),
}

/// K on a fixed domain and kernel, with any per-pair precomputation done once.
pub struct KernelOperator<'a> {
    domain: &'a Domain,
    kernel: Kernel,
    engine: Engine,
}

/// Rows per parallel task in the direct backend.
const ROW_BLOCK: usize = 64;

impl<'a> KernelOperator<'a> {
    /// Picks the FFT backend on mask domains, the direct one elsewhere.
    pub fn new(domain: &'a Domain, kernel: Kernel) -> Result<Self> {
        let backend = if domain.grid().is_some() && domain.metric() == Metric::Euclidean {
            Backend::GridFft
        } else {
            Backend::Direct
        };
        Self::with_backend(domain, kernel, backend)
    }

    pub fn with_backend(domain: &'a Domain, kernel: Kernel, backend: Backend) -> Result<Self> {
        kernel.validate_for_dim(domain.intrinsic_dim())?;
        let profile = kernel.profile(domain.intrinsic_dim());
        let engine = match backend {
            Backend::Direct => Engine::Direct(profile),
            Backend::GridFft => {
                let grid = domain.grid().filter(|_| domain.metric() == Metric::Euclidean);
                let grid = grid.ok_or_else(|| {
                    Error::InvalidParameters("grid backend needs a euclidean mask domain".into())
                })?;
                Engine::Grid(GridConvolution::new(grid, profile, kernel.singular_at_zero()))
            }
        };
        Ok(KernelOperator {
            domain,
            kernel,
            engine,
        })
    }

    pub fn domain(&self) -> &'a Domain {
        self.domain
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn backend(&self) -> Backend {
        match self.engine {
            Engine::Direct(_) => Backend::Direct,
            Engine::Grid(_) => Backend::GridFft,
        }
    }

    /// (Kφ)_i = Σ_j k(x_i, x_j) φ_j w_j.
    pub fn apply(&self, phi: &[f64]) -> Result<Field> {
        let n = self.domain.len();
        if phi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.len(),
            });
        }
        let u: Vec<f64> = phi.iter().zip(self.domain.weights()).map(|(p, w)| p * w).collect();
        let out = match &self.engine {
            Engine::Direct(profile) => self.direct(*profile, &u),
            Engine::Grid(conv) => conv.apply(&u),
        };
        Ok(Field(out))
    }

    fn direct(&self, profile: Profile, u: &[f64]) -> Vec<f64> {
        let n = self.domain.len();
        let singular = self.kernel.singular_at_zero();
        let metric = self.domain.metric();
        let mut out = vec![0.0; n];
        out.par_chunks_mut(ROW_BLOCK)
            .enumerate()
            .for_each(|(block, rows)| {
                for (k, slot) in rows.iter_mut().enumerate() {
                    let i = block * ROW_BLOCK + k;
                    let xi = self.domain.node(i);
                    let mut acc = 0.0;
                    for (j, xj) in self.domain.nodes().enumerate() {
                        if singular && j == i {
                            continue;
                        }
                        acc += profile.at(metric.distance(xi, xj)) * u[j];
                    }
                    *slot = acc;
                }
            });
        out
    }

    /// E = ½ ⟨ρ, Kρ⟩.
    pub fn energy(&self, rho: &[f64]) -> Result<f64> {
        let phi = self.apply(rho)?;
        Ok(self.energy_given(rho, &phi))
    }

    /// ½ ⟨ρ, φ⟩ for a precomputed φ = Kρ.
    pub fn energy_given(&self, rho: &[f64], phi: &[f64]) -> f64 {
        0.5 * inner(self.domain, rho, phi)
    }

    /// V = K1 and its argmax.
    pub fn potential(&self) -> Potential {
        let ones = vec![1.0; self.domain.len()];
        let values = self.apply(&ones).expect("length matches domain");
        let argmax = argmax_lowest(&values);
        Potential { values, argmax }
    }

    /// Discrete form of the KKT conditions for a density.
    ///
    /// With φ = Kρ, α* is the smallest φ value whose sublevel set
    /// {φ ≤ α*} carries more than the ρ₋ share of the measure,
    /// m₋ = |Ω| − m₊. A stationary density has ρ = ρ₊ where φ > α* and
    /// ρ = ρ₋ where φ < α*; the violating mass is the weight of nodes that
    /// break this. Intermediate values are allowed only on {φ = α*}, except
    /// at the one fractional node nearest the threshold, which is excluded.
    pub fn kkt_residual(&self, rho: &DensityField) -> Result<KktResidual> {
        let phi = self.apply(rho.values())?;
        self.kkt_residual_given(rho, &phi)
    }

    /// [`KernelOperator::kkt_residual`] for a precomputed φ = Kρ.
    pub fn kkt_residual_given(&self, rho: &DensityField, phi: &[f64]) -> Result<KktResidual> {
        let w = self.domain.weights();
        let m_minus = self.domain.total_measure() - rho.bounds().target_plus_mass(self.domain)?;
        let mut order: Vec<usize> = (0..phi.len()).collect();
        order.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));
        let mut cum = 0.0;
        let mut alpha_star = phi[*order.last().expect("domain is non-empty")];
        for &i in &order {
            cum += w[i];
            if cum > m_minus {
                alpha_star = phi[i];
                break;
            }
        }
        // The fractional node closest to the threshold is the boundary cell.
        let boundary = (0..phi.len())
            .filter(|&i| rho.state(i) == NodeState::Fractional)
            .min_by(|&a, &b| (phi[a] - alpha_star).abs().total_cmp(&(phi[b] - alpha_star).abs()));
        let violating_mass = (0..phi.len())
            .filter(|&i| match rho.state(i) {
                NodeState::Plus => phi[i] < alpha_star,
                NodeState::Minus => phi[i] > alpha_star,
                NodeState::Fractional => Some(i) != boundary && phi[i] != alpha_star,
            })
            .map(|i| w[i])
            .fold(0.0, |a, b| a + b);
        Ok(KktResidual {
            alpha_star,
            violating_mass,
        })
    }
}

/// Lowest index among entries within 1e−12 (relative) of the maximum.
pub(crate) fn argmax_lowest(v: &[f64]) -> usize {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = max - 1e-12 * max.abs();
    v.iter().position(|&x| x >= cut).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub values: Field,
    pub argmax: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResidual {
    pub alpha_star: f64,
    pub violating_mass: f64,
}

/// Kρ for one-off use. Prefer [`KernelOperator`] when applying repeatedly.
pub fn apply_k(domain: &Domain, kernel: Kernel, rho: &[f64]) -> Result<Field> {
    KernelOperator::new(domain, kernel)?.apply(rho)
}

pub fn energy(domain: &Domain, kernel: Kernel, rho: &[f64]) -> Result<f64> {
    KernelOperator::new(domain, kernel)?.energy(rho)
}

pub fn potential(domain: &Domain, kernel: Kernel) -> Result<Potential> {
    Ok(KernelOperator::new(domain, kernel)?.potential())
}

pub fn kkt_residual(domain: &Domain, kernel: Kernel, rho: &DensityField) -> Result<KktResidual> {
    KernelOperator::new(domain, kernel)?.kkt_residual(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_circle, build_interval, build_interval_union, build_mask_region, Mask};
    use crate::rearrange::{random_admissible_init, volume_threshold};
    use approx::assert_relative_eq;

    fn exp1() -> Kernel {
        Kernel::Exponential { sigma: 1.0 }
    }

    fn bounds(minus: f64, plus: f64) -> DensityBounds {
        DensityBounds::new(minus, plus).unwrap()
    }

    #[test]
    fn constant_kernel_gives_unit_potential_and_half_energy() {
        let d = build_interval(-1.0, 1.0, 50).unwrap();
        let rho = random_admissible_init(&d, bounds(0.25, 1.0), 3).unwrap();
        let phi = apply_k(&d, Kernel::Constant, rho.values()).unwrap();
        assert!(phi.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_relative_eq!(energy(&d, Kernel::Constant, rho.values()).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn exponential_at_center_of_interval() {
        let d = build_interval(-1.0, 1.0, 1000).unwrap();
        let phi = apply_k(&d, exp1(), &vec![0.5; 1000]).unwrap();
        let expected = 1.0 - (-1.0f64).exp();
        assert!((phi[499] - expected).abs() < 1e-3);
        assert!((phi[500] - expected).abs() < 1e-3);
    }

    #[test]
    fn symmetric_density_gives_symmetric_field() {
        let d = build_interval(-1.0, 1.0, 101).unwrap();
        let rho: Vec<f64> = d.nodes().map(|x| 1.0 - x[0].abs()).collect();
        let phi = apply_k(&d, exp1(), &rho).unwrap();
        for i in 0..101 {
            assert_relative_eq!(phi[i], phi[100 - i], max_relative = 1e-12);
        }
    }

    #[test]
    fn two_interval_energy_at_quarter() {
        let d = build_interval_union(&[(-2.0, -1.0), (1.0, 2.0)], 2000).unwrap();
        let b = bounds(1.0 / 3.0, 2.0 / 3.0);
        // ρ_{1/4}: ρ₊ on [1.25, 1.75] and [−1.75, −1.25].
        let rho: Vec<f64> = d
            .nodes()
            .map(|x| if (x[0].abs() - 1.5).abs() < 0.25 { b.rho_plus } else { b.rho_minus })
            .collect();
        let e = energy(&d, Kernel::TruncatedLinear { c: 2.0 }, &rho).unwrap();
        assert_relative_eq!(e, 185.0 / 432.0, max_relative = 1e-3);
    }

    #[test]
    fn permutation_invariance() {
        let d = build_interval(-1.0, 1.0, 40).unwrap();
        let rho = random_admissible_init(&d, bounds(0.25, 1.0), 9).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let coords: Vec<f64> = perm.iter().map(|&i| d.node(i)[0]).collect();
        let weights: Vec<f64> = perm.iter().map(|&i| d.weights()[i]).collect();
        let values: Vec<f64> = perm.iter().map(|&i| rho.values()[i]).collect();
        let shuffled = Domain::from_nodes(coords, weights, 1, 1, Metric::Euclidean).unwrap();
        let a = energy(&d, exp1(), rho.values()).unwrap();
        let b = energy(&shuffled, exp1(), &values).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }

    #[test]
    fn potential_argmax_examples() {
        let d = build_interval(-1.0, 1.0, 201).unwrap();
        let v = potential(&d, exp1()).unwrap();
        assert_eq!(v.argmax, 100);
        let v = potential(&d, Kernel::Constant).unwrap();
        assert_eq!(v.argmax, 0);
        assert!(v.values.iter().all(|&x| (x - 2.0).abs() < 1e-12));
        let disk = build_mask_region(Mask::Disk { radius: 1.0 }, None, 60).unwrap();
        let v = potential(&disk, exp1()).unwrap();
        let p = disk.node(v.argmax);
        assert!(p[0].hypot(p[1]) <= disk.cell_diameter());
    }

    #[test]
    fn fft_matches_direct_sum() {
        let kernels = [
            exp1(),
            Kernel::Gaussian { tau: 0.1 },
            Kernel::TruncatedLinear { c: 0.8 },
            Kernel::Riesz { s: 1.0 },
        ];
        for mask in [Mask::Clover, Mask::annulus(0.6), Mask::Ellipse { eps: 0.3 }] {
            let d = build_mask_region(mask, None, 40).unwrap();
            let rho: Vec<f64> = d.nodes().map(|x| 1.0 + 0.5 * (3.0 * x[0]).sin() * x[1]).collect();
            for k in kernels {
                let fast = KernelOperator::with_backend(&d, k, Backend::GridFft).unwrap();
                let slow = KernelOperator::with_backend(&d, k, Backend::Direct).unwrap();
                let a = fast.apply(&rho).unwrap();
                let b = slow.apply(&rho).unwrap();
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (x, y) in a.iter().zip(b.iter()) {
                    assert!((x - y).abs() <= 1e-10 * scale, "{k:?}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let d = build_circle(300).unwrap();
        let b = bounds(1.0 / (4.0 * std::f64::consts::PI), 1.0 / std::f64::consts::PI);
        let op = KernelOperator::new(&d, exp1()).unwrap();
        let r1 = random_admissible_init(&d, b, 1).unwrap();
        let r2 = random_admissible_init(&d, b, 2).unwrap();
        let a = inner(&d, r1.values(), &op.apply(r2.values()).unwrap());
        let c = inner(&d, r2.values(), &op.apply(r1.values()).unwrap());
        assert_relative_eq!(a, c, max_relative = 1e-12);
    }

    #[test]
    fn convexity_identity() {
        let d = build_interval(-1.0, 1.0, 300).unwrap();
        let b = bounds(0.25, 1.0);
        let op = KernelOperator::new(&d, exp1()).unwrap();
        let r1 = random_admissible_init(&d, b, 4).unwrap();
        let r2 = random_admissible_init(&d, b, 5).unwrap();
        let theta = 0.3;
        let mix: Vec<f64> = r1
            .values()
            .iter()
            .zip(r2.values())
            .map(|(a, c)| theta * a + (1.0 - theta) * c)
            .collect();
        let diff: Vec<f64> = r1.values().iter().zip(r2.values()).map(|(a, c)| a - c).collect();
        let lhs = op.energy(&mix).unwrap();
        let rhs = theta * op.energy(r1.values()).unwrap() + (1.0 - theta) * op.energy(r2.values()).unwrap()
            - theta * (1.0 - theta) * op.energy(&diff).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn frechet_derivative() {
        let d = build_interval(-1.0, 1.0, 200).unwrap();
        let op = KernelOperator::new(&d, exp1()).unwrap();
        let rho = vec![0.5; 200];
        let dir: Vec<f64> = d.nodes().map(|x| x[0] * x[0] - 1.0 / 3.0).collect();
        let grad = inner(&d, &op.apply(&rho).unwrap(), &dir);
        let e0 = op.energy(&rho).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let moved: Vec<f64> = rho.iter().zip(&dir).map(|(r, p)| r + eps * p).collect();
            let fd = (op.energy(&moved).unwrap() - e0) / eps;
            let err = (fd - grad).abs();
            assert!(err < last);
            // E is quadratic, so the error is exactly ε·E[φ].
            assert_relative_eq!(err, eps * op.energy(&dir).unwrap().abs(), max_relative = 1e-6);
            last = err;
        }
    }

    #[test]
    fn kkt_of_uniform_on_two_intervals_is_positive() {
        let d = build_interval_union(&[(-2.0, -1.0), (1.0, 2.0)], 200).unwrap();
        let b = bounds(1.0 / 3.0, 2.0 / 3.0);
        let rho = DensityField::uniform(&d, b).unwrap();
        let res = kkt_residual(&d, Kernel::TruncatedLinear { c: 2.0 }, &rho).unwrap();
        assert!(res.violating_mass > 0.0);
    }

    #[test]
    fn kkt_of_centered_interval_is_small() {
        let d = build_interval(-1.0, 1.0, 2000).unwrap();
        let b = bounds(0.25, 1.0);
        let score: Vec<f64> = d.nodes().map(|x| -x[0].abs()).collect();
        let rho = volume_threshold(&d, &score, b).unwrap();
        let res = kkt_residual(&d, exp1(), &rho).unwrap();
        assert!(res.violating_mass <= 2.0 * d.weights()[0]);
    }

    #[test]
    fn density_validation() {
        let d = build_interval(-1.0, 1.0, 4).unwrap();
        let b = bounds(0.25, 1.0);
        assert!(DensityField::new(&d, vec![0.5; 4], b).is_ok());
        assert!(DensityField::new(&d, vec![0.5; 3], b).is_err());
        assert!(DensityField::new(&d, vec![0.6; 4], b).is_err());
        assert!(DensityField::new(&d, vec![1.5, 0.5, 0.0, 0.0], b).is_err());
        let f = DensityField::new(&d, vec![1.0, 0.25, 0.5, 0.25], b).unwrap();
        assert_eq!(f.plus_set(), vec![0]);
        assert_eq!(f.fractional_nodes(), vec![2]);
        assert!(f.is_bang_bang());
        assert!(!DensityField::uniform(&d, b).unwrap().is_bang_bang());
    }
}
