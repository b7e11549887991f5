//! Closed-form optima used to validate the solver.
//!
//! Energies follow the ½∫∫ convention of [`crate::energy`]. The `*_density`
//! functions discretize an analytic optimum onto a domain by thresholding a
//! score whose superlevel sets are the analytic ρ₊ regions, so the result
//! has the exact ρ₊ measure and a single fractional boundary node.

use serde::{Deserialize, Serialize};

use crate::energy::{argmax_lowest, DensityField, KernelOperator};
use crate::pointset::{ball_volume, Configuration};
use crate::rearrange::{volume_threshold, DensityBounds};
use crate::{Domain, Error, Kernel, Result};

/// Optimum on [−1, 1] for separation r and covering R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalOptimum {
    /// Length of the centered ρ₊ interval, 2r(R − 1)/(2R − r).
    pub center_length: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
}

impl IntervalOptimum {
    pub fn bounds(&self) -> DensityBounds {
        DensityBounds {
            rho_minus: self.rho_minus,
            rho_plus: self.rho_plus,
        }
    }

    /// ρ at x ∈ [−1, 1].
    pub fn density_at(&self, x: f64) -> f64 {
        if x.abs() < self.center_length / 2.0 {
            self.rho_plus
        } else {
            self.rho_minus
        }
    }

    /// Exact E[ρ*] for f(r) = exp(−r/σ).
    pub fn exponential_energy(&self, sigma: f64) -> Result<f64> {
        let c = self.center_length / 2.0;
        piecewise_exponential_energy(
            &[(-1.0, -c, self.rho_minus), (-c, c, self.rho_plus), (c, 1.0, self.rho_minus)],
            sigma,
        )
    }
}

pub fn interval_optimum(r: f64, big_r: f64) -> Result<IntervalOptimum> {
    if !(r > 0.0 && r < 2.0 && big_r > 1.0 && big_r.is_finite()) {
        return Err(Error::InvalidParameters(format!(
            "interval optimum needs 0 < r < 2 and R > 1, got r = {r}, R = {big_r}"
        )));
    }
    Ok(IntervalOptimum {
        center_length: 2.0 * r * (big_r - 1.0) / (2.0 * big_r - r),
        rho_plus: 1.0 / r,
        rho_minus: 1.0 / (2.0 * big_r),
    })
}

/// Exact ½∫∫ exp(−|x − y|/σ) ρ(x) ρ(y) dx dy for a piecewise constant ρ on
/// the line, given as disjoint pieces (a, b, value).
///
/// ∫_P∫_P = 2σ(L − σ(1 − e^{−L/σ})) for a piece of length L, and for P left
/// of Q the double integral factors into
/// σ²(1 − e^{−L_P/σ})(1 − e^{−L_Q/σ}) e^{−gap/σ}.
pub fn piecewise_exponential_energy(pieces: &[(f64, f64, f64)], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidKernel(format!("sigma must be positive, got {sigma}")));
    }
    let mut p = pieces.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    if p.iter().any(|&(a, b, _)| !(a < b)) || p.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::InvalidParameters("pieces must be disjoint with a < b".into()));
    }
    let decay = |len: f64| -(-len / sigma).exp_m1();
    let mut total = 0.0;
    for (i, &(a, b, u)) in p.iter().enumerate() {
        let len = b - a;
        total += 0.5 * u * u * 2.0 * sigma * (len - sigma * decay(len));
        for &(c, d, v) in &p[i + 1..] {
            total += u * v * sigma * sigma * decay(len) * decay(d - c) * (-(c - b) / sigma).exp();
        }
    }
    Ok(total)
}

/// Radius of the centered ρ₊ ball in a ball of radius `domain_radius` in ℝ^d.
pub fn ball_optimum_radius(domain_radius: f64, d: usize, bounds: DensityBounds) -> Result<f64> {
    if !(domain_radius > 0.0) || d == 0 {
        return Err(Error::InvalidParameters(format!(
            "need a positive radius and d >= 1, got {domain_radius}, d = {d}"
        )));
    }
    let beta = ball_volume(d);
    let m_plus = bounds.plus_mass(beta * domain_radius.powi(d as i32))?;
    Ok((m_plus / beta).powf(1.0 / d as f64))
}

/// Arc length of the optimal ρ₊ cap on the unit circle (|Ω| = 2π).
pub fn circle_cap_measure(bounds: DensityBounds) -> Result<f64> {
    bounds.plus_mass(2.0 * std::f64::consts::PI)
}

/// E[ρ_t] on [−2, −1] ∪ [1, 2] with ρ₊ = 2/3, ρ₋ = 1/3 and f(r) = max(2 − r, 0),
/// where ρ_t = ρ₊ on [1.5 − t, 1.5 + t] and on [−1.5 − (½ − t), −1.5 + (½ − t)].
///
/// E[ρ_t] = 185/432 + (5/9)(t − 1/4)².
pub fn two_interval_energy(t: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&t) {
        return Err(Error::InvalidParameters(format!("t must be in [0, 1/2], got {t}")));
    }
    Ok(185.0 / 432.0 + 5.0 / 9.0 * (t - 0.25) * (t - 0.25))
}

/// Half-length t = (1 − 4ρ₋)/(4(ρ₊ − ρ₋)) of the centered ρ₊ segment on
/// each arm of the unit cross (|Ω| = 4).
pub fn cross_optimum_t(bounds: DensityBounds) -> Result<f64> {
    let DensityBounds {
        rho_minus,
        rho_plus,
    } = bounds;
    if !(rho_minus < 0.25 && 0.25 < rho_plus) {
        return Err(Error::InvalidBounds(format!(
            "the unit cross needs rho_minus < 1/4 < rho_plus, got [{rho_minus}, {rho_plus}]"
        )));
    }
    Ok((1.0 - 4.0 * rho_minus) / (4.0 * (rho_plus - rho_minus)))
}

/// Which n = 4 closed-form case applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interval4Case {
    /// 8 ≤ 3r + 2R: all spacings r/4.
    I,
    /// 2r + 4R ≥ 8 > 3r + 2R.
    II,
    /// 8 > 3r + 2R, 6R + r ≥ 8 > 2r + 4R.
    III,
    /// 8 > max(3r + 2R, 6R + r, 2r + 4R).
    IV,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interval4Optimum {
    pub case: Interval4Case,
    pub configuration: Configuration,
}

impl Interval4Optimum {
    /// The reflected optimum (x ↦ −x); optimal as well.
    pub fn mirrored(&self) -> Configuration {
        self.configuration.mirrored()
    }
}

pub fn interval4_case(r: f64, big_r: f64) -> Result<Interval4Case> {
    // Interior gaps lie in [r/4, 2R/4], so r <= 2R is needed as well.
    if !(r > 0.0 && r <= 8.0 / 3.0 && r <= 2.0 * big_r && big_r >= 1.0 && big_r.is_finite()) {
        return Err(Error::Infeasible(format!(
            "four admissible points on [-1, 1] need 0 < r <= min(8/3, 2R) and R >= 1, \
             got r = {r}, R = {big_r}"
        )));
    }
    Ok(if 3.0 * r + 2.0 * big_r >= 8.0 {
        Interval4Case::I
    } else if 2.0 * r + 4.0 * big_r >= 8.0 {
        Interval4Case::II
    } else if 6.0 * big_r + r >= 8.0 {
        Interval4Case::III
    } else {
        Interval4Case::IV
    })
}

/// The optimal four-point configuration on [−1, 1] for a completely
/// monotone kernel, x₁ < x₂ < x₃ < x₄.
///
/// Case I fixes only the spacings, and any placement with x₁ ≤ −1 + R/4 and
/// x₄ ≥ 1 − R/4 is optimal; the centered one is returned (the case
/// inequality is exactly what makes it feasible). Cases II and III are not
/// symmetric; the representative with the short gaps on the left
/// (x₂ − x₁ ≤ x₄ − x₃) is returned and [`Interval4Optimum::mirrored`] gives
/// the other.
pub fn interval4_optimum(r: f64, big_r: f64) -> Result<Interval4Optimum> {
    let case = interval4_case(r, big_r)?;
    let s = r / 4.0;
    let wide = 2.0 * big_r / 4.0;
    let x1 = -1.0 + big_r / 4.0;
    let x4 = 1.0 - big_r / 4.0;
    let xs = match case {
        Interval4Case::I => vec![-1.5 * s, -0.5 * s, 0.5 * s, 1.5 * s],
        Interval4Case::II => vec![x1, x1 + s, x1 + 2.0 * s, x4],
        Interval4Case::III => vec![x1, x4 - wide - s, x4 - wide, x4],
        Interval4Case::IV => vec![x1, x1 + wide, x4 - wide, x4],
    };
    Ok(Interval4Optimum {
        case,
        configuration: Configuration::from_1d(xs)?,
    })
}

/// Location of the point mass in the ρ₊ → ∞ limit ρ₋ + m·δ(x₀).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaLimit {
    /// Node maximizing V(y) = ∫ k(x, y) dx (lowest index on ties).
    pub node: usize,
    /// m = 1 − ρ₋|Ω|.
    pub mass: f64,
}

pub fn delta_limit_center(domain: &Domain, kernel: Kernel, rho_minus: f64) -> Result<DeltaLimit> {
    let v = KernelOperator::new(domain, kernel)?.potential();
    Ok(DeltaLimit {
        node: argmax_lowest(&v.values),
        mass: 1.0 - rho_minus * domain.total_measure(),
    })
}

fn threshold_by<F: Fn(&[f64]) -> f64>(domain: &Domain, bounds: DensityBounds, score: F) -> Result<DensityField> {
    let s: Vec<f64> = domain.nodes().map(score).collect();
    volume_threshold(domain, &s, bounds)
}

/// Centered ρ₊ ball (interval in 1-D, disk on masks, any domain centered
/// at the origin).
pub fn ball_density(domain: &Domain, bounds: DensityBounds) -> Result<DensityField> {
    threshold_by(domain, bounds, |x| -x.iter().map(|c| c * c).sum::<f64>().sqrt())
}

/// ρ_t on [−2, −1] ∪ [1, 2] (see [`two_interval_energy`]).
pub fn two_interval_density(domain: &Domain, t: f64) -> Result<DensityField> {
    two_interval_energy(t)?;
    let bounds = DensityBounds::new(1.0 / 3.0, 2.0 / 3.0)?;
    threshold_by(domain, bounds, |x| {
        (t - (x[0] - 1.5).abs()).max((0.5 - t) - (x[0] + 1.5).abs())
    })
}

/// Centered segments on both arms of the cross.
pub fn cross_density(domain: &Domain, bounds: DensityBounds) -> Result<DensityField> {
    threshold_by(domain, bounds, |x| -(x[0].abs() + x[1].abs()))
}

/// Cap centered at angle 0 on the unit circle.
pub fn cap_density(domain: &Domain, bounds: DensityBounds) -> Result<DensityField> {
    threshold_by(domain, bounds, |x| x[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy;
    use crate::geometry::{build_circle, build_cross, build_interval, build_interval_union};
    use crate::pointset::{discrete_energy, is_admissible, AdmissibleParams};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn interval_optimum_examples() {
        let o = interval_optimum(1.0, 2.0).unwrap();
        assert_relative_eq!(o.center_length, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!((o.rho_plus, o.rho_minus), (1.0, 0.25));
        let o = interval_optimum(0.5, 2.5).unwrap();
        assert_relative_eq!(o.center_length, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!((o.rho_plus, o.rho_minus), (2.0, 0.2));
        for (r, big_r) in [(0.2, 1.1), (1.0, 2.0), (1.9, 1.01), (1.5, 7.0)] {
            let o = interval_optimum(r, big_r).unwrap();
            let mass = o.rho_plus * o.center_length + o.rho_minus * (2.0 - o.center_length);
            assert_relative_eq!(mass, 1.0, epsilon = 1e-14);
        }
        assert!(interval_optimum(2.0, 2.0).is_err());
    }

    #[test]
    fn piecewise_energy_against_fine_quadrature() {
        // ρ ≡ ½ on [−1, 1]: ½·¼·2(2 − (1 − e^{−2})).
        let e = piecewise_exponential_energy(&[(-1.0, 1.0, 0.5)], 1.0).unwrap();
        assert_relative_eq!(e, 0.25 * (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
        let split = piecewise_exponential_energy(&[(0.0, 1.0, 0.5), (-1.0, 0.0, 0.5)], 1.0).unwrap();
        assert_relative_eq!(split, e, epsilon = 1e-15);

        let o = interval_optimum(1.0, 2.0).unwrap();
        let d = build_interval(-1.0, 1.0, 3000).unwrap();
        let rho: Vec<f64> = d.nodes().map(|x| o.density_at(x[0])).collect();
        let numeric = energy(&d, Kernel::Exponential { sigma: 1.0 }, &rho).unwrap();
        assert_relative_eq!(o.exponential_energy(1.0).unwrap(), numeric, max_relative = 1e-6);
        assert!(piecewise_exponential_energy(&[(-1.0, 0.5, 1.0), (0.0, 1.0, 1.0)], 1.0).is_err());
        assert!(interval_optimum(1.0, 1.0).is_err());
    }

    #[test]
    fn ball_radius_examples() {
        let b = DensityBounds::new(0.25, 1.0).unwrap();
        assert_relative_eq!(ball_optimum_radius(1.0, 1, b).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // m₊ = π/4 with ρ₋ = 1/(2π): ρ₊ = ρ₋ + (1/2)/(π/4).
        let rho_minus = 1.0 / (2.0 * PI);
        let b = DensityBounds::new(rho_minus, rho_minus + 2.0 / PI).unwrap();
        assert_relative_eq!(ball_optimum_radius(1.0, 2, b).unwrap(), 0.5, epsilon = 1e-14);
        let b = DensityBounds::new(0.1, 1.0 / PI).unwrap();
        assert_relative_eq!(ball_optimum_radius(1.0, 2, b).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cap_examples() {
        let b = DensityBounds::new(1.0 / (4.0 * PI), 1.0 / PI).unwrap();
        assert_relative_eq!(circle_cap_measure(b).unwrap(), 2.0 * PI / 3.0, epsilon = 1e-14);
        let near = DensityBounds::new(1.0 / (2.0 * PI) * (1.0 - 1e-9), 1.0).unwrap();
        assert!(circle_cap_measure(near).unwrap() < 1e-8);
        let wide = DensityBounds::new(0.01, 1.0 / (2.0 * PI) * (1.0 + 1e-9)).unwrap();
        assert!(circle_cap_measure(wide).unwrap() > 2.0 * PI - 1e-6);
    }

    #[test]
    fn two_interval_values() {
        assert_relative_eq!(two_interval_energy(0.25).unwrap(), 185.0 / 432.0);
        assert_relative_eq!(two_interval_energy(0.0).unwrap(), 25.0 / 54.0, epsilon = 1e-15);
        assert_eq!(two_interval_energy(0.5).unwrap(), two_interval_energy(0.0).unwrap());
        assert!(two_interval_energy(0.6).is_err());
    }

    #[test]
    fn two_interval_discretization_matches() {
        let d = build_interval_union(&[(-2.0, -1.0), (1.0, 2.0)], 2000).unwrap();
        let k = Kernel::TruncatedLinear { c: 2.0 };
        for t in [0.0, 0.125, 0.25, 0.375, 0.5] {
            let rho = two_interval_density(&d, t).unwrap();
            let e = energy(&d, k, rho.values()).unwrap();
            assert_relative_eq!(e, two_interval_energy(t).unwrap(), max_relative = 1e-3);
        }
    }

    #[test]
    fn cross_examples() {
        let b = DensityBounds::new(0.125, 0.5).unwrap();
        assert_relative_eq!(cross_optimum_t(b).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        let b = DensityBounds::new(0.125, 0.75).unwrap();
        assert_relative_eq!(cross_optimum_t(b).unwrap(), 0.2, epsilon = 1e-15);
        let b = DensityBounds::new(0.25 - 1e-12, 0.5).unwrap();
        assert!(cross_optimum_t(b).unwrap() < 1e-10);
        let d = build_cross(1.0, 600).unwrap();
        let rho = cross_density(&d, DensityBounds::new(0.125, 0.5).unwrap()).unwrap();
        let h = 2.0 / 600.0;
        for i in rho.plus_set() {
            let x = d.node(i);
            assert!(x[0].abs() + x[1].abs() <= 1.0 / 3.0 + h);
        }
    }

    #[test]
    fn interval4_examples() {
        let o = interval4_optimum(2.0, 2.0).unwrap();
        assert_eq!(o.case, Interval4Case::I);
        assert_eq!(o.configuration.coords(), &[-0.75, -0.25, 0.25, 0.75]);
        let o = interval4_optimum(0.5, 2.5).unwrap();
        assert_eq!(o.case, Interval4Case::II);
        assert_eq!(o.configuration.coords(), &[-0.375, -0.25, -0.125, 0.375]);
        let o = interval4_optimum(0.5, 1.5).unwrap();
        assert_eq!(o.case, Interval4Case::III);
        assert_eq!(o.configuration.coords(), &[-0.625, -0.25, -0.125, 0.625]);
        let o = interval4_optimum(0.1, 1.1).unwrap();
        assert_eq!(o.case, Interval4Case::IV);
        for (a, b) in o.configuration.coords().iter().zip([-0.725, -0.175, 0.175, 0.725]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(interval4_optimum(3.0, 1.0).is_err());
        assert!(interval4_optimum(1.0, 0.9).is_err());
        assert!(interval4_optimum(2.1, 1.0).is_err());
    }

    #[test]
    fn interval4_outputs_are_admissible_and_mirror_invariant() {
        let d = build_interval(-1.0, 1.0, 100).unwrap();
        let k = Kernel::Exponential { sigma: 1.0 };
        for i in 1..=26 {
            for j in 0..=12 {
                let r = i as f64 * 0.1;
                let big_r = 1.0 + j as f64 * 0.25;
                if r > 2.0 * big_r {
                    assert!(interval4_optimum(r, big_r).is_err());
                    continue;
                }
                let o = interval4_optimum(r, big_r).unwrap();
                let p = AdmissibleParams::new(r, big_r, 1).unwrap();
                assert!(is_admissible(&o.configuration, &p, &d).unwrap().admissible, "{r} {big_r}");
                assert_relative_eq!(
                    discrete_energy(&o.configuration, &k),
                    discrete_energy(&o.mirrored(), &k),
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn delta_limit_examples() {
        let k = Kernel::Exponential { sigma: 1.0 };
        let d = build_interval(-1.0, 1.0, 301).unwrap();
        let c = delta_limit_center(&d, k, 0.25).unwrap();
        assert_eq!(c.node, 150);
        assert_relative_eq!(c.mass, 0.5, epsilon = 1e-12);
        let circle = build_circle(64).unwrap();
        let c = delta_limit_center(&circle, Kernel::Constant, 1.0 / (4.0 * PI)).unwrap();
        assert_eq!(c.node, 0);
        assert_relative_eq!(c.mass, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn oracle_densities_are_admissible() {
        let d = build_interval(-1.0, 1.0, 500).unwrap();
        let b = interval_optimum(1.0, 2.0).unwrap().bounds();
        let rho = ball_density(&d, b).unwrap();
        assert!(DensityField::new(&d, rho.values().to_vec(), b).is_ok());
        assert!(rho.is_bang_bang());
        let circle = build_circle(500).unwrap();
        let b = DensityBounds::new(1.0 / (4.0 * PI), 1.0 / PI).unwrap();
        let rho = cap_density(&circle, b).unwrap();
        assert!((rho.plus_measure(&circle) - 2.0 * PI / 3.0).abs() <= circle.weights()[0]);
    }
}
