//! Shape statistics of node sets, used to describe ρ₊ regions.

use std::collections::{HashMap, HashSet};

use crate::{Domain, Error, Result};

/// Σ w_i over the given nodes.
pub fn measure(domain: &Domain, nodes: &[usize]) -> f64 {
    nodes.iter().map(|&i| domain.weights()[i]).fold(0.0, |a, b| a + b)
}

/// Weighted mean position.
pub fn centroid(domain: &Domain, nodes: &[usize]) -> Vec<f64> {
    let p = domain.ambient_dim();
    let mut c = vec![0.0; p];
    let mut total = 0.0;
    for &i in nodes {
        let w = domain.weights()[i];
        total += w;
        for (ck, xk) in c.iter_mut().zip(domain.node(i)) {
            *ck += w * xk;
        }
    }
    if total > 0.0 {
        c.iter_mut().for_each(|v| *v /= total);
    }
    c
}

/// λ_max/λ_min of the weighted covariance of a planar node set.
pub fn second_moment_ratio(domain: &Domain, nodes: &[usize]) -> Result<f64> {
    if domain.ambient_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: domain.ambient_dim(),
        });
    }
    let c = centroid(domain, nodes);
    let (mut sxx, mut sxy, mut syy, mut total) = (0.0, 0.0, 0.0, 0.0);
    for &i in nodes {
        let w = domain.weights()[i];
        let x = domain.node(i);
        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
        total += w;
    }
    let (sxx, sxy, syy) = (sxx / total, sxy / total, syy / total);
    let mean = 0.5 * (sxx + syy);
    let radius = (0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy).sqrt();
    Ok((mean + radius) / (mean - radius))
}

/// Largest distance between two of the nodes (Euclidean, via the convex hull
/// in the plane).
pub fn diameter(domain: &Domain, nodes: &[usize]) -> f64 {
    let pts: Vec<&[f64]> = nodes.iter().map(|&i| domain.node(i)).collect();
    let candidates: Vec<[f64; 2]> = match domain.ambient_dim() {
        1 => pts.iter().map(|p| [p[0], 0.0]).collect(),
        2 => convex_hull(pts.iter().map(|p| [p[0], p[1]]).collect()),
        _ => pts.iter().map(|p| [p[0], p[1]]).collect(),
    };
    let mut best: f64 = 0.0;
    for (k, a) in candidates.iter().enumerate() {
        for b in &candidates[..k] {
            best = best.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    best
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Number of 4-connected components of a node set on a mask grid.
pub fn grid_components(domain: &Domain, nodes: &[usize]) -> Result<usize> {
    let grid = domain
        .grid()
        .ok_or_else(|| Error::InvalidDomain("connected components need a grid domain".into()))?;
    let cells: HashSet<(usize, usize)> = nodes.iter().map(|&i| grid.cells[i]).collect();
    let mut seen = HashSet::new();
    let mut count = 0;
    for &start in &cells {
        if !seen.insert(start) {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        while let Some((x, y)) = stack.pop() {
            let neighbours = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for q in neighbours {
                if cells.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
    }
    Ok(count)
}

/// Number of maximal runs of consecutive indices, treating index n − 1 and
/// 0 as adjacent (nodes around a circle).
pub fn circular_runs(n: usize, nodes: &[usize]) -> usize {
    let set: HashSet<usize> = nodes.iter().copied().collect();
    if set.is_empty() {
        return 0;
    }
    if set.len() == n {
        return 1;
    }
    set.iter().filter(|&&i| !set.contains(&((i + n - 1) % n))).count()
}

/// Number of maximal runs of consecutive indices.
pub fn index_runs(nodes: &[usize]) -> usize {
    let set: HashSet<usize> = nodes.iter().copied().collect();
    set.iter().filter(|&&i| i == 0 || !set.contains(&(i - 1))).count()
}

/// Weight of the nodes in exactly one of the two sets.
pub fn symmetric_difference(domain: &Domain, a: &[usize], b: &[usize]) -> f64 {
    let sa: HashSet<usize> = a.iter().copied().collect();
    let sb: HashSet<usize> = b.iter().copied().collect();
    let mut diff: Vec<usize> = sa.symmetric_difference(&sb).copied().collect();
    diff.sort_unstable();
    measure(domain, &diff)
}

/// The node permutation induced by a point map, if the map sends every
/// node onto a node (coordinates compared after rounding to 1e−9).
pub fn reflection_permutation(domain: &Domain, map: impl Fn(&[f64]) -> Vec<f64>) -> Option<Vec<usize>> {
    let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|c| (c * 1e9).round() as i64).collect() };
    let index: HashMap<Vec<i64>, usize> = domain.nodes().enumerate().map(|(i, x)| (key(x), i)).collect();
    domain.nodes().map(|x| index.get(&key(&map(x))).copied()).collect()
}
