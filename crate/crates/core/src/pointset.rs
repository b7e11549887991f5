//! Finite point configurations under separation and covering constraints.
//!
//! For n points in a d-dimensional domain the constraints are
//! δ(X) ≥ r·n^{−1/d} (separation) and η(X) ≤ R·n^{−1/d} (covering), and
//! the objective is (1/2n²) Σ_{i≠j} k(x_i, x_j).
//!
//! On [−1, 1] everything is exact: the covering radius of sorted points is
//! max(x₁ + 1, 1 − x_n, half the largest gap). On other domains the
//! covering radius is taken over the quadrature nodes, which can
//! underestimate it by half a cell; [`Admissibility::uncertain`] flags
//! verdicts inside that band.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::Field;
use crate::geometry::Descriptor;
use crate::rearrange::DensityBounds;
use crate::{Domain, Error, Kernel, Result};

/// Relative slack on admissibility margins, absorbing rounding in sums of gaps.
const MARGIN_TOLERANCE: f64 = 1e-12;

/// n ≥ 2 pairwise distinct points in ℝ^p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    coords: Vec<f64>,
    ambient_dim: usize,
}

impl Configuration {
    /// `coords` is row-major with `ambient_dim` entries per point.
    pub fn new(coords: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        if ambient_dim == 0 || coords.len() % ambient_dim != 0 {
            return Err(Error::InvalidParameters(format!(
                "{} coordinates do not split into points of dimension {ambient_dim}",
                coords.len()
            )));
        }
        let x = Configuration {
            coords,
            ambient_dim,
        };
        if x.len() < 2 {
            return Err(Error::InvalidParameters("a configuration needs n >= 2".into()));
        }
        if x.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameters("non-finite coordinate".into()));
        }
        for i in 0..x.len() {
            for j in 0..i {
                if x.point(i) == x.point(j) {
                    return Err(Error::InvalidParameters(format!("points {j} and {i} coincide")));
                }
            }
        }
        Ok(x)
    }

    pub fn from_1d(xs: Vec<f64>) -> Result<Self> {
        Configuration::new(xs, 1)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn points(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    /// x ↦ −x with the order reversed, so sorted 1-D input stays sorted.
    pub fn mirrored(&self) -> Configuration {
        let mut coords: Vec<f64> = self
            .points()
            .rev()
            .flat_map(|p| p.iter().map(|c| -c))
            .collect();
        // −0.0 + 0.0 is +0.0.
        coords.iter_mut().for_each(|c| *c += 0.0);
        Configuration {
            coords,
            ambient_dim: self.ambient_dim,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// δ(X) = min_{i≠j} |x_i − x_j|.
pub fn separation(x: &Configuration) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..x.len() {
        for j in 0..i {
            best = best.min(euclidean(x.point(i), x.point(j)));
        }
    }
    best
}

/// A covering radius with its discretization error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub radius: f64,
    /// The true radius lies in [radius, radius + tolerance].
    pub tolerance: f64,
}

/// η(X) = max_{y∈Ω} min_j |y − x_j|: exact on intervals, over the nodes
/// (with half a cell of tolerance) elsewhere.
pub fn covering_radius(x: &Configuration, domain: &Domain) -> Result<Covering> {
    if x.ambient_dim() != domain.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.ambient_dim(),
            got: x.ambient_dim(),
        });
    }
    if let Descriptor::Interval { a, b, .. } = *domain.descriptor() {
        return Ok(Covering {
            radius: interval_covering_radius(x.coords(), a, b),
            tolerance: 0.0,
        });
    }
    let radius = domain
        .nodes()
        .map(|y| x.points().map(|p| euclidean(y, p)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(Covering {
        radius,
        tolerance: 0.5 * domain.cell_diameter(),
    })
}

/// Exact covering radius of points on [a, b].
pub fn interval_covering_radius(xs: &[f64], a: f64, b: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let mut eta = (s[0] - a).max(b - s[s.len() - 1]).max(0.0);
    for w in s.windows(2) {
        eta = eta.max(0.5 * (w[1] - w[0]));
    }
    eta
}

/// γ(X) = η/δ.
pub fn mesh_ratio(x: &Configuration, domain: &Domain) -> Result<f64> {
    Ok(covering_radius(x, domain)?.radius / separation(x))
}

/// The constraint constants of the discrete problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibleParams {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub d: usize,
}

impl AdmissibleParams {
    pub fn new(r: f64, big_r: f64, d: usize) -> Result<Self> {
        if !(r > 0.0 && big_r > 0.0 && r.is_finite() && big_r.is_finite()) || d == 0 {
            return Err(Error::InvalidParameters(format!(
                "need r > 0, R > 0, d >= 1, got r = {r}, R = {big_r}, d = {d}"
            )));
        }
        Ok(AdmissibleParams { r, big_r, d })
    }

    /// (r·n^{−1/d}, R·n^{−1/d}).
    pub fn scaled(&self, n: usize) -> (f64, f64) {
        let s = (n as f64).powf(-1.0 / self.d as f64);
        (self.r * s, self.big_r * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// The covering verdict could flip within the covering tolerance.
    pub uncertain: bool,
    /// δ − r·n^{−1/d}.
    pub separation_margin: f64,
    /// R·n^{−1/d} − η.
    pub covering_margin: f64,
    pub covering_tolerance: f64,
}

pub fn is_admissible(x: &Configuration, params: &AdmissibleParams, domain: &Domain) -> Result<Admissibility> {
    if params.d != domain.intrinsic_dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.intrinsic_dim(),
            got: params.d,
        });
    }
    let (sep_bound, cov_bound) = params.scaled(x.len());
    let cov = covering_radius(x, domain)?;
    let separation_margin = separation(x) - sep_bound;
    let covering_margin = cov_bound - cov.radius;
    let sep_ok = separation_margin >= -MARGIN_TOLERANCE * sep_bound;
    let cov_ok = covering_margin >= -MARGIN_TOLERANCE * cov_bound;
    Ok(Admissibility {
        admissible: sep_ok && cov_ok,
        uncertain: sep_ok && covering_margin.abs() < cov.tolerance,
        separation_margin,
        covering_margin,
        covering_tolerance: cov.tolerance,
    })
}

/// (1/2n²) Σ_{i≠j} f(|x_i − x_j|), with the kernel normalized for the
/// ambient dimension.
pub fn discrete_energy(x: &Configuration, kernel: &Kernel) -> f64 {
    let f = kernel.profile(x.ambient_dim());
    let n = x.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..i {
            sum += f.at(euclidean(x.point(i), x.point(j)));
        }
    }
    // Each unordered pair stands for two ordered ones.
    sum / (n * n) as f64
}

/// Result of [`brute_force_interval`].
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub configuration: Configuration,
    pub energy: f64,
    /// Lattice step of the finest refinement level.
    pub step: f64,
}

/// Exhaustive lattice search for the best n-point configuration on [−1, 1].
///
/// A sorted configuration is parameterized by its n + 1 gaps g₀ = x₁ + 1,
/// g_i = x_{i+1} − x_i, g_n = 1 − x_n, which sum to 2. Admissibility is
/// exactly g₀, g_n ∈ [0, R/n] and g_i ∈ [r/n, 2R/n] for interior gaps, so
/// the feasible set is a box cut by a hyperplane. Each gap ranges over a
/// lattice of step 2/`coarse` anchored at its lower bound, with the upper
/// bound added; one gap is solved from the sum and must land inside its
/// bounds, and every choice of solved gap is tried. Optima sitting on
/// constraint bounds are therefore hit exactly.
///
/// Each of the `refine_levels` passes shrinks the step by 4 and searches
/// ±4 new steps around the incumbent gaps. The best configuration is the
/// one with largest energy, ties going to the lexicographically smallest
/// coordinates, so the result does not depend on thread scheduling.
pub fn brute_force_interval(
    n: usize,
    params: &AdmissibleParams,
    kernel: &Kernel,
    coarse: usize,
    refine_levels: usize,
) -> Result<BruteForce> {
    if !(2..=6).contains(&n) {
        return Err(Error::InvalidParameters(format!("brute force needs 2 <= n <= 6, got {n}")));
    }
    if params.d != 1 {
        return Err(Error::InvalidParameters("brute force works on the interval (d = 1)".into()));
    }
    if coarse < 2 {
        return Err(Error::InvalidParameters(format!("coarse must be at least 2, got {coarse}")));
    }
    kernel.validate()?;
    let nf = n as f64;
    let mut bounds = vec![(params.r / nf, 2.0 * params.big_r / nf); n + 1];
    bounds[0] = (0.0, params.big_r / nf);
    bounds[n] = (0.0, params.big_r / nf);

    let infeasible = || {
        Error::Infeasible(format!(
            "infeasible-at-resolution: no admissible {n}-point configuration on the lattice \
             (r = {}, R = {}, coarse = {coarse})",
            params.r, params.big_r
        ))
    };
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Err(infeasible());
    }
    let mut step = 2.0 / coarse as f64;
    let lattices: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let mut v: Vec<f64> = (0..)
                .map(|k| lo + k as f64 * step)
                .take_while(|&g| g < hi)
                .collect();
            v.push(hi);
            v
        })
        .collect();
    let mut best = search(&lattices, &bounds, kernel).ok_or_else(infeasible)?;
    for _ in 0..refine_levels {
        step /= 4.0;
        let windows: Vec<Vec<f64>> = best
            .gaps
            .iter()
            .zip(&bounds)
            .map(|(&g, &(lo, hi))| {
                let mut v: Vec<f64> = (-4i32..=4)
                    .map(|k| g + k as f64 * step)
                    .filter(|&c| c > lo && c < hi)
                    .collect();
                if (g - 4.0 * step..=g + 4.0 * step).contains(&lo) {
                    v.push(lo);
                }
                if (g - 4.0 * step..=g + 4.0 * step).contains(&hi) {
                    v.push(hi);
                }
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            })
            .collect();
        if let Some(c) = search(&windows, &bounds, kernel) {
            if better(&c, &best) {
                best = c;
            }
        }
    }
    Ok(BruteForce {
        configuration: Configuration::from_1d(best.xs)?,
        energy: best.energy,
        step,
    })
}

#[derive(Clone, Debug)]
struct Candidate {
    energy: f64,
    xs: Vec<f64>,
    gaps: Vec<f64>,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.energy.total_cmp(&b.energy) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.xs.iter().zip(&b.xs).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne())
            == Some(Ordering::Less),
    }
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if better(&b, &a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Best candidate over the product of `values` (one list per gap), with
/// each gap in turn solved from Σg = 2.
fn search(values: &[Vec<f64>], bounds: &[(f64, f64)], kernel: &Kernel) -> Option<Candidate> {
    let m = values.len();
    let f = kernel.profile(1);
    (0..m)
        .into_par_iter()
        .map(|dep| {
            let free: Vec<usize> = (0..m).filter(|&i| i != dep).collect();
            let first = free[0];
            values[first]
                .par_iter()
                .map(|&g_first| {
                    let mut gaps = vec![0.0; m];
                    gaps[first] = g_first;
                    let mut best = None;
                    enumerate(values, bounds, &free, 1, dep, &mut gaps, &f, &mut best);
                    best
                })
                .reduce(|| None, pick)
        })
        .reduce(|| None, pick)
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    values: &[Vec<f64>],
    bounds: &[(f64, f64)],
    free: &[usize],
    depth: usize,
    dep: usize,
    gaps: &mut Vec<f64>,
    f: &crate::kernels::Profile,
    best: &mut Option<Candidate>,
) {
    if depth == free.len() {
        let others: f64 = free.iter().map(|&i| gaps[i]).sum();
        let g = 2.0 - others;
        let (lo, hi) = bounds[dep];
        let slack = MARGIN_TOLERANCE * 2.0;
        if g < lo - slack || g > hi + slack {
            return;
        }
        gaps[dep] = g.clamp(lo, hi);
        let n = gaps.len() - 1;
        let mut xs = Vec::with_capacity(n);
        let mut x = -1.0;
        for &g in &gaps[..n] {
            x += g;
            xs.push(x);
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..i {
                sum += f.at(xs[i] - xs[j]);
            }
        }
        let c = Candidate {
            energy: sum / (n * n) as f64,
            xs,
            gaps: gaps.clone(),
        };
        if best.as_ref().map_or(true, |b| better(&c, b)) {
            *best = Some(c);
        }
        return;
    }
    let i = free[depth];
    for &g in &values[i] {
        gaps[i] = g;
        enumerate(values, bounds, free, depth + 1, dep, gaps, f, best);
    }
}

/// Packing density Δ_d, covering density Θ_d and unit-ball volume β_d.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeConstants {
    pub packing_density: f64,
    pub covering_density: f64,
    pub ball_volume: f64,
}

/// Volume of the unit ball in ℝ^d: β₀ = 1, β₁ = 2, β_d = β_{d−2}·2π/d.
pub fn ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Known optimal lattice constants. In d = 1 intervals tile the line
/// (Δ₁ = Θ₁ = 1); in d = 2 the triangular lattice is optimal for both
/// packing (Thue, Fejes Tóth: π/√12) and covering (Kershner: 2π/√27).
pub fn lattice_constants(d: usize) -> Result<LatticeConstants> {
    let (packing_density, covering_density) = match d {
        1 => (1.0, 1.0),
        2 => (std::f64::consts::PI / 12f64.sqrt(), 2.0 * std::f64::consts::PI / 27f64.sqrt()),
        _ => {
            return Err(Error::InvalidParameters(format!(
                "lattice constants are tabulated for d = 1, 2 only, got {d}"
            )))
        }
    };
    Ok(LatticeConstants {
        packing_density,
        covering_density,
        ball_volume: ball_volume(d),
    })
}

/// Mesh ratio ½(Θ_d/Δ_d)^{1/d} of a configuration that is simultaneously a
/// best packing and a best covering. Informational only.
pub fn mesh_ratio_constant(d: usize) -> Result<f64> {
    let c = lattice_constants(d)?;
    Ok(0.5 * (c.covering_density / c.packing_density).powf(1.0 / d as f64))
}

/// Density bounds matching separation r and covering R:
/// ρ₊ = 2^d Δ_d / (r^d β_d) and ρ₋ = Θ_d / (R^d β_d).
pub fn parameter_bridge(r: f64, big_r: f64, d: usize) -> Result<DensityBounds> {
    AdmissibleParams::new(r, big_r, d)?;
    let c = lattice_constants(d)?;
    let di = d as i32;
    let rho_plus = 2f64.powi(di) * c.packing_density / (r.powi(di) * c.ball_volume);
    let rho_minus = c.covering_density / (big_r.powi(di) * c.ball_volume);
    DensityBounds::new(rho_minus, rho_plus)
}

/// An admissible n-point configuration on [−1, 1] shaped like the
/// continuous optimum: a block of n₊ points at spacing r/n centered at 0,
/// flanked on each side by k = (n − n₊)/2 points at a common spacing g
/// whose outermost point sits R/(2n) from the endpoint.
///
/// n₊ is chosen closest to n·L₊/r (L₊ = 2r(R−1)/(2R−r), the length of the
/// ρ₊ interval) among the values for which r/n ≤ g ≤ 2R/n; ties go to the
/// smaller block, so the slack is taken out of the packed part.
pub fn construct_1d_sequence(n: usize, r: f64, big_r: f64) -> Result<Configuration> {
    if !(r > 0.0 && r < 2.0 && big_r > 1.0 && big_r.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "need 0 < r < 2 and R > 1, got r = {r}, R = {big_r}"
        )));
    }
    let nf = n as f64;
    let spacing = r / nf;
    let l_plus = 2.0 * r * (big_r - 1.0) / (2.0 * big_r - r);
    let target = nf * l_plus / r;
    let outer = 1.0 - big_r / (2.0 * nf);
    let tol = MARGIN_TOLERANCE * spacing;

    let feasible = |n_plus: usize| -> Option<(f64, f64)> {
        let k = (n - n_plus) / 2;
        let half = (n_plus as f64 - 1.0) * spacing / 2.0;
        if k == 0 {
            // Only the block: it must fit and cover on its own.
            let ok = half <= 1.0 && 1.0 - half <= big_r / nf + tol;
            return ok.then_some((half, 0.0));
        }
        let g = (outer - half) / k as f64;
        (g >= spacing - tol && g <= 2.0 * big_r / nf + tol).then_some((half, g))
    };
    let choice = (1..=n)
        .filter(|n_plus| (n - n_plus) % 2 == 0)
        .filter_map(|n_plus| feasible(n_plus).map(|hg| (n_plus, hg)))
        .min_by(|a, b| {
            let da = (a.0 as f64 - target).abs();
            let db = (b.0 as f64 - target).abs();
            da.total_cmp(&db).then(a.0.cmp(&b.0))
        });
    let Some((n_plus, (half, g))) = choice else {
        return Err(Error::Infeasible(format!(
            "no admissible block/flank split for n = {n}, r = {r}, R = {big_r}"
        )));
    };
    let k = (n - n_plus) / 2;
    let mut xs = Vec::with_capacity(n);
    for i in (1..=k).rev() {
        xs.push(-half - i as f64 * g);
    }
    for j in 0..n_plus {
        xs.push(-half + j as f64 * spacing);
    }
    for i in 1..=k {
        xs.push(half + i as f64 * g);
    }
    Configuration::from_1d(xs)
}

/// Histogram of X on the domain: each point's mass 1/n is spread uniformly
/// (by weight) over the nodes within `bandwidth_cells` cell diameters of its
/// nearest node. The result has unit mass.
pub fn empirical_density(x: &Configuration, domain: &Domain, bandwidth_cells: usize) -> Result<Field> {
    if bandwidth_cells == 0 {
        return Err(Error::InvalidParameters("bandwidth must be at least one cell".into()));
    }
    if x.ambient_dim() != domain.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.ambient_dim(),
            got: x.ambient_dim(),
        });
    }
    let radius = bandwidth_cells as f64 * domain.cell_diameter() * (1.0 + 1e-9);
    let w = domain.weights();
    let mut values = vec![0.0; domain.len()];
    let share = 1.0 / x.len() as f64;
    for p in x.points() {
        let center = domain.node(domain.nearest_node(p));
        let near: Vec<usize> = (0..domain.len())
            .filter(|&i| domain.metric().distance(domain.node(i), center) <= radius)
            .collect();
        let total: f64 = near.iter().map(|&i| w[i]).sum();
        for i in near {
            values[i] += share / total;
        }
    }
    Ok(Field::new(values))
}
