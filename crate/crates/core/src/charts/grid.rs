//! Tensor grids over chart domains: midpoint quadrature nodes with weights
//! and endpoint-inclusive sampling grids for oscillation estimates.
//!
//! Midpoint nodes are used for integration (spectrally accurate along
//! periodic coordinates); the inclusive grid contains the domain boundary
//! so that extrema on the boundary are sampled exactly.

/// A flattened list of points in a box, `coords[i*dim..(i+1)*dim]`.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Decode a flat index into per-axis indices for a tensor grid with the
/// given per-axis sizes (first axis slowest).
#[inline]
pub fn decode_index(mut flat: usize, sizes: &[usize], out: &mut [usize]) {
    for d in (0..sizes.len()).rev() {
        out[d] = flat % sizes[d];
        flat /= sizes[d];
    }
}

/// Midpoint tensor rule: node positions per axis and the constant per-axis
/// weight `(hi - lo) / n`.
pub fn midpoint_axes(domain: &[[f64; 2]], res: &[usize]) -> (Vec<Vec<f64>>, f64) {
    let mut axes = Vec::with_capacity(domain.len());
    let mut cell = 1.0;
    for (d, &[lo, hi]) in domain.iter().enumerate() {
        let n = res[d].max(1);
        let step = (hi - lo) / n as f64;
        cell *= step;
        axes.push((0..n).map(|k| lo + (k as f64 + 0.5) * step).collect());
    }
    (axes, cell)
}

/// Endpoint-inclusive axes: non-periodic coordinates include both ends,
/// periodic coordinates cover the period uniformly without duplicating the
/// identified endpoint.
pub fn inclusive_axes(domain: &[[f64; 2]], periodic: &[bool], res: &[usize]) -> Vec<Vec<f64>> {
    domain
        .iter()
        .enumerate()
        .map(|(d, &[lo, hi])| {
            let n = res[d].max(2);
            if periodic[d] {
                let step = (hi - lo) / n as f64;
                (0..n).map(|k| lo + k as f64 * step).collect()
            } else {
                let step = (hi - lo) / (n - 1) as f64;
                (0..n).map(|k| lo + k as f64 * step).collect()
            }
        })
        .collect()
}

/// Materialize the tensor product of `axes` as a flattened `PointSet`.
pub fn tensor_points(axes: &[Vec<f64>]) -> PointSet {
    let dim = axes.len();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let sizes: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let mut coords = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for flat in 0..total {
        decode_index(flat, &sizes, &mut idx);
        for d in 0..dim {
            coords.push(axes[d][idx[d]]);
        }
    }
    PointSet { dim, coords }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_axes_cover_interior() {
        let (axes, cell) = midpoint_axes(&[[0.0, 1.0], [0.0, 2.0]], &[4, 2]);
        assert_eq!(axes[0], vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(axes[1], vec![0.5, 1.5]);
        assert!((cell - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inclusive_axes_hit_bounds() {
        let axes = inclusive_axes(&[[0.0, 1.0], [0.0, 4.0]], &[false, true], &[3, 4]);
        assert_eq!(axes[0], vec![0.0, 0.5, 1.0]);
        assert_eq!(axes[1], vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn tensor_points_order_and_count() {
        let pts = tensor_points(&[vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts.point(0), &[0.0, 5.0]);
        assert_eq!(pts.point(1), &[0.0, 6.0]);
        assert_eq!(pts.point(5), &[1.0, 7.0]);
    }
}
