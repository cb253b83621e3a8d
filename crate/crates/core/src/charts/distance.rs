//! Ground distances `d_0` on the built-in charts, plus a grid
//! shortest-path fallback for user-supplied metrics.
//!
//! The cylinder distance is the geodesic distance of the flat Euclidean
//! metric on the solid annular cylinder: planar chord when the segment
//! clears the excised core `r < r_min`, otherwise the tangent-wrap path
//! around the core. The Hopf chart uses the round `S^3` geodesic through
//! the embedding angle.

use std::sync::Mutex;

use crate::charts::grid::{decode_index, inclusive_axes, tensor_points};
use crate::charts::ContactChart;

/// Geodesic distance between `(r1, t1)` and `(r2, t2)` in the flat annulus
/// `r_min <= r`, angles in radians.
pub fn annulus_distance(r_min: f64, r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
    let p1 = [r1 * t1.cos(), r1 * t1.sin()];
    let p2 = [r2 * t2.cos(), r2 * t2.sin()];
    let chord = ((p1[0] - p2[0]).powi(2) + (p1[1] - p2[1]).powi(2)).sqrt();
    if r_min <= 0.0 {
        return chord;
    }
    // Closest approach of the segment to the origin.
    let dx = [p2[0] - p1[0], p2[1] - p1[1]];
    let len2 = dx[0] * dx[0] + dx[1] * dx[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (-(p1[0] * dx[0] + p1[1] * dx[1]) / len2).clamp(0.0, 1.0)
    };
    let cx = p1[0] + t * dx[0];
    let cy = p1[1] + t * dx[1];
    let closest = (cx * cx + cy * cy).sqrt();
    if closest >= r_min {
        return chord;
    }
    // Wrap around the core: two tangent segments plus an arc.
    let dtheta = {
        let d = (t1 - t2).abs() % std::f64::consts::TAU;
        d.min(std::f64::consts::TAU - d)
    };
    let a1 = (r_min / r1).min(1.0).acos();
    let a2 = (r_min / r2).min(1.0).acos();
    let arc = (dtheta - a1 - a2).max(0.0);
    (r1 * r1 - r_min * r_min).max(0.0).sqrt()
        + (r2 * r2 - r_min * r_min).max(0.0).sqrt()
        + r_min * arc
}

/// Distance on the flat cylinder chart: annulus geodesic in `(r, theta)`
/// combined with the flat `z` factor (periodic when the chart says so).
pub fn cylinder_distance(r_min: f64, z_periodic: bool, z_period: f64, p: &[f64], q: &[f64]) -> f64 {
    let planar = annulus_distance(r_min, p[0], p[1], q[0], q[1]);
    let mut dz = (p[2] - q[2]).abs();
    if z_periodic {
        dz %= z_period;
        dz = dz.min(z_period - dz);
    }
    (planar * planar + dz * dz).sqrt()
}

/// Embed a Hopf-coordinate point `(eta, xi1, xi2)` on the unit `S^3`.
pub fn hopf_embed(p: &[f64]) -> [f64; 4] {
    let (eta, x1, x2) = (p[0], p[1], p[2]);
    [
        eta.cos() * x1.cos(),
        eta.cos() * x1.sin(),
        eta.sin() * x2.cos(),
        eta.sin() * x2.sin(),
    ]
}

/// Round geodesic distance on `S^3` in Hopf coordinates, via the chord
/// (`2 asin(|a - b| / 2)`), which is exact at zero separation where the
/// `acos` form loses half the significant digits.
pub fn hopf_distance(p: &[f64], q: &[f64]) -> f64 {
    let a = hopf_embed(p);
    let b = hopf_embed(q);
    let chord: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    2.0 * (chord / 2.0).clamp(0.0, 1.0).asin()
}

/// Geodesic distance on the radius-1/2 round sphere in `(theta, phi)`
/// coordinates (the base of the Hopf bundle).
pub fn half_sphere_distance(p: &[f64], q: &[f64]) -> f64 {
    let u = [
        p[0].sin() * p[1].cos(),
        p[0].sin() * p[1].sin(),
        p[0].cos(),
    ];
    let v = [
        q[0].sin() * q[1].cos(),
        q[0].sin() * q[1].sin(),
        q[0].cos(),
    ];
    let chord: f64 = u
        .iter()
        .zip(&v)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    (chord / 2.0).clamp(0.0, 1.0).asin()
}

/// Dijkstra over an inclusive grid with edges to all neighbor offsets in
/// `{-1,0,1}^dim`, edge lengths from the chart metric at the midpoint.
/// Coarse (accuracy is limited by the graph anisotropy), but metric-true
/// up to that bias; used only for charts without a closed-form distance.
pub struct GridDistance {
    sizes: Vec<usize>,
    points: crate::charts::grid::PointSet,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl GridDistance {
    pub fn build(chart: &ContactChart, res: &[usize]) -> GridDistance {
        let axes = inclusive_axes(&chart.domain, &chart.periodic, res);
        let sizes: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let points = tensor_points(&axes);
        let dim = chart.dim;
        let n = points.len();
        let offsets: Vec<Vec<isize>> = {
            let mut offs = vec![vec![]];
            for _ in 0..dim {
                let mut next = Vec::new();
                for o in &offs {
                    for d in [-1isize, 0, 1] {
                        let mut v = o.clone();
                        v.push(d);
                        next.push(v);
                    }
                }
                offs = next;
            }
            offs.into_iter().filter(|o| o.iter().any(|&d| d != 0)).collect()
        };
        let mut adjacency = vec![Vec::new(); n];
        let mut idx = vec![0usize; dim];
        let mut nidx = vec![0usize; dim];
        for flat in 0..n {
            decode_index(flat, &sizes, &mut idx);
            'offsets: for off in &offsets {
                for d in 0..dim {
                    let raw = idx[d] as isize + off[d];
                    if chart.periodic[d] {
                        nidx[d] = raw.rem_euclid(sizes[d] as isize) as usize;
                    } else if raw < 0 || raw >= sizes[d] as isize {
                        continue 'offsets;
                    } else {
                        nidx[d] = raw as usize;
                    }
                }
                let mut nflat = 0usize;
                for d in 0..dim {
                    nflat = nflat * sizes[d] + nidx[d];
                }
                let p = points.point(flat);
                let q = points.point(nflat);
                let mut mid = vec![0.0; dim];
                let mut dx = vec![0.0; dim];
                for d in 0..dim {
                    let mut diff = q[d] - p[d];
                    if chart.periodic[d] {
                        let period = chart.domain[d][1] - chart.domain[d][0];
                        if diff > period / 2.0 {
                            diff -= period;
                        }
                        if diff < -period / 2.0 {
                            diff += period;
                        }
                    }
                    dx[d] = diff;
                    mid[d] = p[d] + 0.5 * diff;
                }
                let g = chart.metric(&mid);
                let mut len2 = 0.0;
                for a in 0..dim {
                    for b in 0..dim {
                        len2 += g[(a, b)] * dx[a] * dx[b];
                    }
                }
                adjacency[flat].push((nflat as u32, len2.max(0.0).sqrt()));
            }
        }
        GridDistance {
            sizes,
            points,
            adjacency,
        }
    }

    fn nearest_node(&self, x: &[f64]) -> usize {
        // Axes are uniform per dimension; snap per coordinate.
        let dim = self.points.dim;
        let mut best = vec![0usize; dim];
        for d in 0..dim {
            let mut bi = 0;
            let mut bd = f64::INFINITY;
            for k in 0..self.sizes[d] {
                // Points are in row-major order; axis value recoverable from
                // any point with index k along d. Use stride arithmetic.
                let mut stride = 1usize;
                for dd in (d + 1)..dim {
                    stride *= self.sizes[dd];
                }
                let v = self.points.coords[(k * stride) * dim + d];
                let dist = (v - x[d]).abs();
                if dist < bd {
                    bd = dist;
                    bi = k;
                }
            }
            best[d] = bi;
        }
        let mut flat = 0usize;
        for d in 0..dim {
            flat = flat * self.sizes[d] + best[d];
        }
        flat
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        use std::cmp::Ordering;
        use std::collections::BinaryHeap;

        #[derive(PartialEq)]
        struct Entry(f64, u32);
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let src = self.nearest_node(p);
        let dst = self.nearest_node(q);
        let mut dist = vec![f64::INFINITY; self.adjacency.len()];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, src as u32));
        while let Some(Entry(d, u)) = heap.pop() {
            let u = u as usize;
            if d > dist[u] {
                continue;
            }
            if u == dst {
                return d;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist[dst]
    }
}

/// Lazily built grid-distance fallback, one per chart.
pub struct FallbackDistance {
    inner: Mutex<Option<std::sync::Arc<GridDistance>>>,
}

impl FallbackDistance {
    pub fn new() -> Self {
        FallbackDistance {
            inner: Mutex::new(None),
        }
    }

    pub fn get(&self, chart: &ContactChart) -> std::sync::Arc<GridDistance> {
        let mut guard = self.inner.lock().unwrap();
        if let Some(g) = guard.as_ref() {
            return g.clone();
        }
        let res = vec![13usize; chart.dim];
        let g = std::sync::Arc::new(GridDistance::build(chart, &res));
        *guard = Some(g.clone());
        g
    }
}

impl Default for FallbackDistance {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_chord_when_clear() {
        // Same radius, small angle: chord, strictly below the arc.
        let d = annulus_distance(0.1, 0.8, 0.0, 0.8, 0.3);
        let chord = 2.0 * 0.8 * (0.15f64).sin();
        assert!((d - chord).abs() < 1e-14);
        assert!(d < 0.8 * 0.3);
    }

    #[test]
    fn annulus_wraps_around_core() {
        // Antipodal points at the core radius must wrap: length = pi*r_min
        // plus two zero tangents.
        let rm = 0.5;
        let d = annulus_distance(rm, rm, 0.0, rm, std::f64::consts::PI);
        assert!((d - rm * std::f64::consts::PI).abs() < 1e-12);
        // Antipodal at radius 1 with core 0.5: tangents + arc beats any chord
        // through the hole.
        let d2 = annulus_distance(0.5, 1.0, 0.0, 1.0, std::f64::consts::PI);
        let expect = 2.0 * (1.0f64 - 0.25).sqrt() + 0.5 * (std::f64::consts::PI - 2.0 * (0.5f64).acos());
        assert!((d2 - expect).abs() < 1e-12);
        // Longer than the forbidden straight chord, shorter than the arc.
        assert!(d2 > 2.0 && d2 < std::f64::consts::PI);
    }

    #[test]
    fn annulus_triangle_inequality_random() {
        let mut rng = crate::sampling::rng(11);
        use rand::Rng;
        for _ in 0..500 {
            let pts: Vec<[f64; 2]> = (0..3)
                .map(|_| {
                    [
                        rng.random_range(0.2..1.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    ]
                })
                .collect();
            let d = |a: &[f64; 2], b: &[f64; 2]| annulus_distance(0.2, a[0], a[1], b[0], b[1]);
            let (ab, bc, ac) = (d(&pts[0], &pts[1]), d(&pts[1], &pts[2]), d(&pts[0], &pts[2]));
            assert!(ac <= ab + bc + 1e-12, "triangle violated: {ac} > {ab} + {bc}");
        }
    }

    #[test]
    fn hopf_distance_is_angle() {
        let p = [0.7, 0.0, 0.0];
        let q = [0.7, 0.0, 0.0];
        assert!(hopf_distance(&p, &q).abs() < 1e-15);
        // Moving along eta is a great circle.
        let q2 = [0.9, 0.0, 0.0];
        assert!((hopf_distance(&p, &q2) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn half_sphere_distance_halves_angles() {
        let p = [1.0, 0.0];
        let q = [1.4, 0.0];
        assert!((half_sphere_distance(&p, &q) - 0.2).abs() < 1e-12);
    }
}
