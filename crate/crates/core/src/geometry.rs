//! Discretized domains.
//!
//! A [`Domain`] is a finite set of quadrature nodes with positive weights
//! approximating d-dimensional Hausdorff measure on a compact set Ω ⊂ ℝ^p.
//! Every constructor uses midpoint (cell-center) quadrature: the bang-bang
//! densities this crate works with are piecewise constant, so each node
//! carries one value and thresholding is unambiguous per node.
//!
//! Node ordering is part of the contract. Intervals are ordered by increasing
//! coordinate, circles by increasing angle and grids row-major (rows of
//! constant y from bottom to top, x increasing within a row). Downstream tie
//! breaking is by node index, so the ordering makes results reproducible.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distance used for kernel evaluation on a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// ℓ¹ distance. Only the cross uses it.
    Manhattan,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// Axis-aligned rectangle in ℝ².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn square(half_width: f64) -> Self {
        BBox {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!("degenerate bounding box {self:?}")))
        }
    }
}

/// Planar regions available to [`build_mask_region`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mask {
    /// Closed disk of the given radius centered at the origin.
    Disk { radius: f64 },
    /// inner ≤ |x| ≤ outer.
    Annulus { inner: f64, outer: f64 },
    /// r ≤ 1 + 0.3 cos 4θ in polar coordinates.
    Clover,
    /// B_{0.5}(±1, 0) ∪ [−1, 1] × [−0.1, 0.1].
    Dumbbell,
    /// (1 + ε) x² + y² / (1 + ε) ≤ 1, area π for every ε.
    Ellipse { eps: f64 },
}

impl Mask {
    /// Annulus with `outer` fixed at 1.2.
    pub fn annulus(inner: f64) -> Self {
        Mask::Annulus { inner, outer: 1.2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mask::Disk { .. } => "disk",
            Mask::Annulus { .. } => "annulus",
            Mask::Clover => "clover",
            Mask::Dumbbell => "dumbbell",
            Mask::Ellipse { .. } => "ellipse",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        match *self {
            Mask::Disk { radius } if !(radius > 0.0 && radius.is_finite()) => {
                bad(format!("disk radius must be positive, got {radius}"))
            }
            Mask::Annulus { inner, outer } if !(inner >= 0.0 && inner < outer && outer.is_finite()) => {
                bad(format!("annulus needs 0 <= inner < outer, got ({inner}, {outer})"))
            }
            Mask::Ellipse { eps } if !(eps > -1.0 && eps.is_finite()) => {
                bad(format!("ellipse needs eps > -1, got {eps}"))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Mask::Disk { radius } => x * x + y * y <= radius * radius,
            Mask::Annulus { inner, outer } => {
                let r2 = x * x + y * y;
                inner * inner <= r2 && r2 <= outer * outer
            }
            Mask::Clover => {
                let r = x.hypot(y);
                let theta = y.atan2(x);
                r <= 1.0 + 0.3 * (4.0 * theta).cos()
            }
            Mask::Dumbbell => {
                let lobe = |cx: f64| (x - cx) * (x - cx) + y * y <= 0.25;
                lobe(1.0) || lobe(-1.0) || (x.abs() <= 1.0 && y.abs() <= 0.1)
            }
            Mask::Ellipse { eps } => (1.0 + eps) * x * x + y * y / (1.0 + eps) <= 1.0,
        }
    }

    /// Square box centered at the origin that contains the region.
    pub fn default_bbox(&self) -> BBox {
        match *self {
            Mask::Disk { radius } => BBox::square(radius),
            Mask::Annulus { outer, .. } => BBox::square(outer),
            Mask::Clover => BBox::square(1.3),
            Mask::Dumbbell => BBox::square(1.5),
            Mask::Ellipse { eps } => {
                let a = (1.0 + eps).sqrt();
                BBox::square(a.max(1.0 / a))
            }
        }
    }

    /// Exact area where a closed form exists.
    pub fn area(&self) -> Option<f64> {
        match *self {
            Mask::Disk { radius } => Some(PI * radius * radius),
            Mask::Annulus { inner, outer } => Some(PI * (outer * outer - inner * inner)),
            // ½∫(1 + 0.3 cos 4θ)² dθ = π(1 + 0.3²/2)
            Mask::Clover => Some(PI * (1.0 + 0.045)),
            Mask::Ellipse { .. } => Some(PI),
            Mask::Dumbbell => None,
        }
    }
}

/// How a domain was built; echoed into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Descriptor {
    Interval { a: f64, b: f64, n_cells: usize },
    IntervalUnion { segments: Vec<(f64, f64)>, n_cells_per_unit: usize },
    Mask { mask: Mask, bbox: BBox, resolution: usize },
    Circle { n_nodes: usize },
    Cross { half_length: f64, n_cells_per_axis: usize },
    /// Loaded from a node file; no construction recipe is known.
    Nodes,
}

/// Regular-grid structure of a mask domain. Node `i` sits at the center of
/// cell `cells[i] = (ix, iy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLayout {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub hx: f64,
    pub hy: f64,
    pub cells: Vec<(usize, usize)>,
}

impl GridLayout {
    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.x_min + (ix as f64 + 0.5) * self.hx,
            self.y_min + (iy as f64 + 0.5) * self.hy,
        ]
    }
}

/// A discretized compact set: nodes, quadrature weights and metric.
///
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct Domain {
    coords: Vec<f64>,
    weights: Vec<f64>,
    intrinsic_dim: usize,
    ambient_dim: usize,
    metric: Metric,
    descriptor: Descriptor,
    grid: Option<GridLayout>,
    total_measure: f64,
    cell_diameter: f64,
    measure_tolerance: f64,
}

impl Domain {
    /// Assemble a domain from raw parts, checking every invariant.
    ///
    /// `coords` is row-major with `ambient_dim` entries per node.
    pub fn from_nodes(
        coords: Vec<f64>,
        weights: Vec<f64>,
        intrinsic_dim: usize,
        ambient_dim: usize,
        metric: Metric,
    ) -> Result<Self> {
        if ambient_dim == 0 || intrinsic_dim == 0 || intrinsic_dim > ambient_dim {
            return Err(Error::InvalidDomain(format!(
                "need 1 <= d <= p, got d = {intrinsic_dim}, p = {ambient_dim}"
            )));
        }
        if coords.len() != weights.len() * ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: weights.len() * ambient_dim,
                got: coords.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::InvalidDomain("no nodes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDomain(format!("non-positive weight {w}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("non-finite coordinate".into()));
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        let node = |i: usize| &coords[i * ambient_dim..(i + 1) * ambient_dim];
        order.sort_by(|&i, &j| {
            node(i)
                .iter()
                .zip(node(j))
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if order.windows(2).any(|w| node(w[0]) == node(w[1])) {
            return Err(Error::InvalidDomain("nodes are not pairwise distinct".into()));
        }
        // Without a recipe the best local scale is the typical cell size.
        let total: f64 = weights.iter().sum();
        let mean_w = total / weights.len() as f64;
        let cell_diameter = mean_w.powf(1.0 / intrinsic_dim as f64) * (intrinsic_dim as f64).sqrt();
        Ok(Domain {
            coords,
            weights,
            intrinsic_dim,
            ambient_dim,
            metric,
            descriptor: Descriptor::Nodes,
            grid: None,
            total_measure: total,
            cell_diameter,
            measure_tolerance: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn grid(&self) -> Option<&GridLayout> {
        self.grid.as_ref()
    }

    /// |Ω|_d ≈ Σ weights.
    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Diameter of one quadrature cell (under the domain metric).
    pub fn cell_diameter(&self) -> f64 {
        self.cell_diameter
    }

    /// Declared bound on |total_measure − true measure| / true measure.
    /// Zero for interval, circle and cross; 2/resolution for mask regions;
    /// NaN when unknown (loaded from a node file).
    pub fn measure_tolerance(&self) -> f64 {
        self.measure_tolerance
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.metric.distance(self.node(i), self.node(j))
    }

    /// Index of the node closest to `p` (lowest index on ties).
    pub fn nearest_node(&self, p: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, x) in self.nodes().enumerate() {
            let d = self.metric.distance(x, p);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

fn check_cells(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        Err(Error::InvalidDomain(format!("{what} must be at least {min}, got {n}")))
    } else {
        Ok(())
    }
}

fn midpoints(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = (b - a) / n as f64;
    (0..n).map(move |i| a + (i as f64 + 0.5) * h)
}

/// Midpoint discretization of [a, b] with `n_cells` equal cells.
pub fn build_interval(a: f64, b: f64, n_cells: usize) -> Result<Domain> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
    }
    check_cells(n_cells, 2, "n_cells")?;
    let h = (b - a) / n_cells as f64;
    let coords: Vec<f64> = midpoints(a, b, n_cells).collect();
    let weights = vec![h; n_cells];
    Ok(Domain {
        total_measure: weights.iter().sum(),
        coords,
        weights,
        intrinsic_dim: 1,
        ambient_dim: 1,
        metric: Metric::Euclidean,
        descriptor: Descriptor::Interval { a, b, n_cells },
        grid: None,
        cell_diameter: h,
        measure_tolerance: 0.0,
    })
}

/// Union of disjoint closed segments, each discretized with
/// `round((b − a) · n_cells_per_unit)` midpoint cells (at least one).
///
/// Segments may be given in any order; nodes come out in increasing
/// coordinate. Segments sharing an endpoint overlap and are rejected.
pub fn build_interval_union(segments: &[(f64, f64)], n_cells_per_unit: usize) -> Result<Domain> {
    if segments.is_empty() {
        return Err(Error::InvalidDomain("no segments".into()));
    }
    check_cells(n_cells_per_unit, 1, "n_cells_per_unit")?;
    let mut sorted = segments.to_vec();
    for &(a, b) in &sorted {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
        }
    }
    sorted.sort_by(|s, t| s.0.total_cmp(&t.0));
    if let Some(w) = sorted.windows(2).find(|w| w[1].0 <= w[0].1) {
        return Err(Error::InvalidDomain(format!(
            "segments [{}, {}] and [{}, {}] overlap",
            w[0].0, w[0].1, w[1].0, w[1].1
        )));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut cell_diameter: f64 = 0.0;
    for &(a, b) in &sorted {
        let n = (((b - a) * n_cells_per_unit as f64).round() as usize).max(1);
        let h = (b - a) / n as f64;
        cell_diameter = cell_diameter.max(h);
        coords.extend(midpoints(a, b, n));
        weights.extend(std::iter::repeat(h).take(n));
    }
    Ok(Domain {
        total_measure: weights.iter().sum(),
        coords,
        weights,
        intrinsic_dim: 1,
        ambient_dim: 1,
        metric: Metric::Euclidean,
        descriptor: Descriptor::IntervalUnion {
            segments: sorted,
            n_cells_per_unit,
        },
        grid: None,
        cell_diameter,
        measure_tolerance: 0.0,
    })
}

/// Planar region: the centers of a `resolution × resolution` grid over `bbox`
/// that satisfy the mask. Each node carries the cell area.
pub fn build_mask_region(mask: Mask, bbox: Option<BBox>, resolution: usize) -> Result<Domain> {
    mask.validate()?;
    check_cells(resolution, 16, "resolution")?;
    let bbox = bbox.unwrap_or_else(|| mask.default_bbox());
    bbox.validate()?;
    let hx = (bbox.x_max - bbox.x_min) / resolution as f64;
    let hy = (bbox.y_max - bbox.y_min) / resolution as f64;
    let mut layout = GridLayout {
        nx: resolution,
        ny: resolution,
        x_min: bbox.x_min,
        y_min: bbox.y_min,
        hx,
        hy,
        cells: Vec::new(),
    };
    let mut coords = Vec::new();
    for iy in 0..resolution {
        for ix in 0..resolution {
            let [x, y] = layout.center(ix, iy);
            if mask.contains(x, y) {
                layout.cells.push((ix, iy));
                coords.extend([x, y]);
            }
        }
    }
    if layout.cells.is_empty() {
        return Err(Error::InvalidDomain(format!(
            "mask `{}` has no cell centers inside {bbox:?}",
            mask.name()
        )));
    }
    let weights = vec![hx * hy; layout.cells.len()];
    Ok(Domain {
        total_measure: weights.iter().sum(),
        coords,
        weights,
        intrinsic_dim: 2,
        ambient_dim: 2,
        metric: Metric::Euclidean,
        descriptor: Descriptor::Mask {
            mask,
            bbox,
            resolution,
        },
        grid: Some(layout),
        cell_diameter: hx.hypot(hy),
        measure_tolerance: 2.0 / resolution as f64,
    })
}

/// Unit circle S¹ ⊂ ℝ² with `n_nodes` equispaced nodes, node 0 at (1, 0).
pub fn build_circle(n_nodes: usize) -> Result<Domain> {
    check_cells(n_nodes, 8, "n_nodes")?;
    let dtheta = 2.0 * PI / n_nodes as f64;
    let coords = (0..n_nodes)
        .flat_map(|i| {
            let t = i as f64 * dtheta;
            [t.cos(), t.sin()]
        })
        .collect();
    let weights = vec![dtheta; n_nodes];
    Ok(Domain {
        total_measure: weights.iter().sum(),
        coords,
        weights,
        intrinsic_dim: 1,
        ambient_dim: 2,
        metric: Metric::Euclidean,
        descriptor: Descriptor::Circle { n_nodes },
        grid: None,
        cell_diameter: 2.0 * (dtheta / 2.0).sin(),
        measure_tolerance: 0.0,
    })
}

/// The cross {|x| ≤ L, y = 0} ∪ {x = 0, |y| ≤ L} under the Manhattan metric.
///
/// Each arm has `n_cells_per_axis` cells; the count must be even so that no
/// cell center lands on the origin (which both arms would then share).
/// Nodes on the x-axis come first, then the y-axis, each increasing.
pub fn build_cross(half_length: f64, n_cells_per_axis: usize) -> Result<Domain> {
    if !(half_length > 0.0 && half_length.is_finite()) {
        return Err(Error::InvalidDomain(format!(
            "half_length must be positive, got {half_length}"
        )));
    }
    check_cells(n_cells_per_axis, 2, "n_cells_per_axis")?;
    if n_cells_per_axis % 2 != 0 {
        return Err(Error::InvalidDomain(format!(
            "n_cells_per_axis must be even, got {n_cells_per_axis}"
        )));
    }
    let h = 2.0 * half_length / n_cells_per_axis as f64;
    let mut coords = Vec::with_capacity(4 * n_cells_per_axis);
    for t in midpoints(-half_length, half_length, n_cells_per_axis) {
        coords.extend([t, 0.0]);
    }
    for t in midpoints(-half_length, half_length, n_cells_per_axis) {
        coords.extend([0.0, t]);
    }
    let weights = vec![h; 2 * n_cells_per_axis];
    Ok(Domain {
        total_measure: weights.iter().sum(),
        coords,
        weights,
        intrinsic_dim: 1,
        ambient_dim: 2,
        metric: Metric::Manhattan,
        descriptor: Descriptor::Cross {
            half_length,
            n_cells_per_axis,
        },
        grid: None,
        cell_diameter: h,
        measure_tolerance: 0.0,
    })
}
