//! Uniform tensor-product grids on the truncated half-space
//! `(-L, L)^(n-1) x (0, L)`.
//!
//! Tangential nodes sit at cell midpoints `(j + 1/2) h - L`, so no node lies on
//! the symmetry axis and `|x| >= h/2` everywhere for `n >= 2`. Normal nodes sit
//! at `j h`, `j = 0..=L/h`, with the first layer on the boundary `x_n = 0` and
//! the last on the artificial wall `x_n = L`.
//!
//! Flat node index: `idx = b * normal_count + k`, where `k` is the normal index
//! and `b` the flat tangential index (first tangential direction slowest).

use crate::error::{Error, Result};

/// Default cap on the number of stored nodes.
pub const DEFAULT_NODE_CAP: usize = 8_000_000;

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    spacing: f64,
    tangential: Vec<f64>,
    normal: Vec<f64>,
    boundary_only: bool,
    quadrature_weights: Vec<f64>,
    surface_weights: Vec<f64>,
    boundary_index_set: Vec<usize>,
}

/// Values of `|x|` on every node.
#[derive(Clone, Debug)]
pub struct RadialWeight {
    pub values: Vec<f64>,
    /// Node where `|x| = 0` (only the boundary node of the half-line).
    pub singular_node: Option<usize>,
}

fn cells_per_half_width(half_width: f64, spacing: f64) -> Result<usize> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::Sizing(format!("half width must be positive, got {half_width}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Sizing(format!("spacing must be positive, got {spacing}")));
    }
    let ratio = half_width / spacing;
    let m = ratio.round();
    if (ratio - m).abs() > 1e-9 * ratio.max(1.0) || m < 2.0 {
        return Err(Error::Sizing(format!(
            "half width / spacing must be an integer >= 2, got {half_width}/{spacing} = {ratio}"
        )));
    }
    Ok(m as usize)
}

impl Grid {
    /// Volume grid for `dim` in 1..=3 with the default node cap.
    pub fn new(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        Self::with_cap(dim, half_width, spacing, DEFAULT_NODE_CAP)
    }

    pub fn with_cap(dim: usize, half_width: f64, spacing: f64, cap: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension { op: "volume grid", dim });
        }
        let m = cells_per_half_width(half_width, spacing)?;
        let nt = if dim == 1 { 0 } else { 2 * m };
        let nn = m + 1;
        let nb = if dim == 1 { 1 } else { nt.pow(dim as u32 - 1) };
        let nodes = nb
            .checked_mul(nn)
            .ok_or(Error::Capacity { nodes: usize::MAX, cap })?;
        if nodes > cap {
            return Err(Error::Capacity { nodes, cap });
        }
        let h = half_width / m as f64;
        let tangential: Vec<f64> = (0..nt).map(|j| (j as f64 + 0.5) * h - half_width).collect();
        let normal: Vec<f64> = (0..nn).map(|j| j as f64 * h).collect();

        let cell = h.powi(dim as i32 - 1);
        let mut quadrature_weights = Vec::with_capacity(nodes);
        for _ in 0..nb {
            for k in 0..nn {
                let wn = if k == 0 || k == nn - 1 { 0.5 * h } else { h };
                quadrature_weights.push(cell * wn);
            }
        }
        let surface_weights = vec![cell; nb];
        let boundary_index_set = (0..nb).map(|b| b * nn).collect();
        Ok(Self {
            dim,
            half_width,
            spacing: h,
            tangential,
            normal,
            boundary_only: false,
            quadrature_weights,
            surface_weights,
            boundary_index_set,
        })
    }

    /// Grid that stores only the boundary layer `x_n = 0`; `dim` in 2..=4.
    pub fn boundary_only(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        Self::boundary_only_with_cap(dim, half_width, spacing, DEFAULT_NODE_CAP)
    }

    pub fn boundary_only_with_cap(
        dim: usize,
        half_width: f64,
        spacing: f64,
        cap: usize,
    ) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::UnsupportedDimension { op: "boundary grid", dim });
        }
        let m = cells_per_half_width(half_width, spacing)?;
        let nt = 2 * m;
        let nb = nt.pow(dim as u32 - 1);
        if nb > cap {
            return Err(Error::Capacity { nodes: nb, cap });
        }
        let h = half_width / m as f64;
        let tangential = (0..nt).map(|j| (j as f64 + 0.5) * h - half_width).collect();
        Ok(Self {
            dim,
            half_width,
            spacing: h,
            tangential,
            normal: vec![0.0],
            boundary_only: true,
            quadrature_weights: Vec::new(),
            surface_weights: vec![h.powi(dim as i32 - 1); nb],
            boundary_index_set: (0..nb).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the boundary hyperplane.
    pub fn boundary_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_boundary_only(&self) -> bool {
        self.boundary_only
    }

    pub fn tangential_nodes(&self) -> &[f64] {
        &self.tangential
    }

    pub fn normal_nodes(&self) -> &[f64] {
        &self.normal
    }

    /// Nodes per tangential direction (0 for the half-line).
    pub fn tangential_count(&self) -> usize {
        self.tangential.len()
    }

    /// Normal layers including `x_n = 0` and `x_n = L` (1 for boundary-only grids).
    pub fn normal_count(&self) -> usize {
        self.normal.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.surface_weights.len()
    }

    pub fn node_count(&self) -> usize {
        if self.boundary_only {
            self.boundary_count()
        } else {
            self.boundary_count() * self.normal_count()
        }
    }

    /// Per-node volume weights (midpoint tangential times trapezoid normal).
    /// Empty for boundary-only grids.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.quadrature_weights
    }

    pub fn surface_weights(&self) -> &[f64] {
        &self.surface_weights
    }

    /// Flat node indices of the `x_n = 0` layer, ordered by tangential index.
    pub fn boundary_index_set(&self) -> &[usize] {
        &self.boundary_index_set
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        let nn = self.normal_count();
        (idx / nn, idx % nn)
    }

    #[inline]
    pub fn join(&self, b: usize, k: usize) -> usize {
        b * self.normal_count() + k
    }

    /// Multi-index of a flat tangential index; unused slots are zero.
    #[inline]
    pub fn tangential_multi_index(&self, mut b: usize) -> [usize; 3] {
        let nt = self.tangential_count();
        let d = self.boundary_dim();
        let mut out = [0usize; 3];
        for slot in (0..d).rev() {
            out[slot] = b % nt;
            b /= nt;
        }
        out
    }

    #[inline]
    pub fn tangential_flat_index(&self, multi: &[usize]) -> usize {
        let nt = self.tangential_count();
        multi.iter().fold(0, |acc, &i| acc * nt + i)
    }

    /// Tangential coordinates `x'` of boundary node `b`; unused slots are zero.
    #[inline]
    pub fn boundary_point(&self, b: usize) -> [f64; 3] {
        let m = self.tangential_multi_index(b);
        let mut p = [0.0; 3];
        for (slot, value) in p.iter_mut().enumerate().take(self.boundary_dim()) {
            *value = self.tangential[m[slot]];
        }
        p
    }

    /// Coordinates of a node: `x'` in the first `n-1` slots, `x_n` in slot `n-1`.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 4] {
        let (b, k) = self.split(idx);
        let bp = self.boundary_point(b);
        let mut p = [0.0; 4];
        p[..3].copy_from_slice(&bp);
        p[self.dim - 1] = self.normal[k];
        p
    }

    /// Flat index of the neighbour one step along `direction` (0-based; the last
    /// direction is normal), or `None` outside the stored grid.
    #[inline]
    pub fn neighbor(&self, idx: usize, direction: usize, step: isize) -> Option<usize> {
        let (b, k) = self.split(idx);
        if direction == self.dim - 1 {
            let kk = k as isize + step;
            if kk < 0 || kk >= self.normal_count() as isize {
                return None;
            }
            return Some(self.join(b, kk as usize));
        }
        let nb = self.boundary_neighbor(b, direction, step)?;
        Some(self.join(nb, k))
    }

    /// Tangential neighbour within the boundary layer.
    #[inline]
    pub fn boundary_neighbor(&self, b: usize, direction: usize, step: isize) -> Option<usize> {
        let mut m = self.tangential_multi_index(b);
        let j = m[direction] as isize + step;
        if j < 0 || j >= self.tangential_count() as isize {
            return None;
        }
        m[direction] = j as usize;
        Some(self.tangential_flat_index(&m[..self.boundary_dim()]))
    }

    /// `|x|` at every node. For the half-line the boundary node has `|x| = 0`
    /// and is flagged.
    pub fn radial_weight(&self) -> RadialWeight {
        let d = self.dim;
        let values: Vec<f64> = (0..self.node_count())
            .map(|i| {
                let p = self.point(i);
                p[..d].iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .collect();
        let singular_node = if d == 1 { Some(0) } else { None };
        RadialWeight { values, singular_node }
    }

    /// `|x'|` at every boundary node.
    pub fn boundary_radius(&self) -> Vec<f64> {
        let d = self.boundary_dim();
        (0..self.boundary_count())
            .map(|b| {
                let p = self.boundary_point(b);
                p[..d].iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// True when the node lies in the inner half `|x_j| < L/2`, `x_n < L/2`.
    pub fn in_inner_half(&self, idx: usize) -> bool {
        let p = self.point(idx);
        let half = 0.5 * self.half_width;
        p[..self.dim].iter().all(|x| x.abs() < half)
    }

    /// Samples a function of the node coordinates.
    pub fn sample<T, F>(&self, f: F) -> Vec<T>
    where
        F: Fn(&[f64]) -> T,
    {
        (0..self.node_count())
            .map(|i| {
                let p = self.point(i);
                f(&p[..self.dim])
            })
            .collect()
    }

    /// Samples a function of the tangential coordinates on the boundary layer.
    pub fn sample_boundary<T, F>(&self, f: F) -> Vec<T>
    where
        F: Fn(&[f64]) -> T,
    {
        let d = self.boundary_dim();
        (0..self.boundary_count())
            .map(|b| {
                let p = self.boundary_point(b);
                f(&p[..d])
            })
            .collect()
    }

    /// Boundary trace of a node vector.
    pub fn trace<T: Copy>(&self, u: &[T]) -> Vec<T> {
        self.boundary_index_set.iter().map(|&i| u[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_line_nodes() {
        let g = Grid::new(1, 10.0, 0.1).unwrap();
        assert_eq!(g.normal_count(), 101);
        assert_eq!(g.tangential_count(), 0);
        assert_eq!(g.node_count(), 101);
        assert!((g.normal_nodes()[100] - 10.0).abs() < 1e-12);
        assert!((g.normal_nodes()[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn plane_nodes() {
        let g = Grid::new(2, 1.0, 0.5).unwrap();
        assert_eq!(g.tangential_nodes(), &[-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.normal_nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.node_count(), 12);
    }

    #[test]
    fn volume_weights_sum() {
        let g = Grid::new(3, 1.0, 0.5).unwrap();
        assert_eq!(g.node_count(), 48);
        let s: f64 = g.quadrature_weights().iter().sum();
        assert!((s - 4.0).abs() < 1e-12);
        let a: f64 = g.surface_weights().iter().sum();
        assert!((a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn radial_examples() {
        let g = Grid::new(2, 1.0, 0.5).unwrap();
        let r = g.radial_weight();
        let idx = g.join(2, 1);
        assert_eq!(&g.point(idx)[..2], &[0.25, 0.5]);
        assert!((r.values[idx] - 0.559017).abs() < 1e-6);
        assert!(r.singular_node.is_none());

        let g1 = Grid::new(1, 1.0, 0.5).unwrap();
        let r1 = g1.radial_weight();
        assert_eq!(r1.values[0], 0.0);
        assert_eq!(r1.singular_node, Some(0));

        let g3 = Grid::new(3, 1.0, 0.25).unwrap();
        let b = g3.tangential_flat_index(&[4, 4]);
        assert_eq!(&g3.point(g3.join(b, 0))[..3], &[0.125, 0.125, 0.0]);
        let g3 = Grid::new(3, 1.0, 0.5).unwrap();
        let b = g3.tangential_flat_index(&[2, 2]);
        let r3 = g3.radial_weight();
        assert!((r3.values[g3.join(b, 0)] - 0.353553).abs() < 1e-6);
        assert!(r3.values.iter().all(|&v| v >= 0.25 - 1e-15));
    }

    #[test]
    fn sizing_and_capacity() {
        assert!(matches!(Grid::new(2, 1.0, 0.3), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(2, 1.0, 0.5 + 1e-3), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(2, 1.0, 1.0), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(2, -1.0, 0.5), Err(Error::Sizing(_))));
        assert!(matches!(
            Grid::with_cap(3, 10.0, 0.05, 1_000_000),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(Grid::new(4, 1.0, 0.5), Err(Error::UnsupportedDimension { .. })));
        let b = Grid::boundary_only(4, 1.0, 0.25).unwrap();
        assert_eq!(b.boundary_count(), 512);
        assert!(b.quadrature_weights().is_empty());
        let a: f64 = b.surface_weights().iter().sum();
        assert!((a - 8.0).abs() < 1e-12);
    }

    #[test]
    fn neighbours() {
        let g = Grid::new(3, 1.0, 0.5).unwrap();
        let idx = g.join(g.tangential_flat_index(&[0, 3]), 0);
        assert_eq!(g.neighbor(idx, 0, -1), None);
        assert_eq!(g.neighbor(idx, 1, 1), None);
        assert_eq!(g.neighbor(idx, 2, -1), None);
        let up = g.neighbor(idx, 2, 1).unwrap();
        assert_eq!(g.split(up), (g.split(idx).0, 1));
        let right = g.neighbor(idx, 0, 1).unwrap();
        assert_eq!(g.tangential_multi_index(g.split(right).0)[..2], [1, 3]);
    }

    #[test]
    fn doubling_keeps_nodes() {
        let a = Grid::new(2, 2.0, 0.25).unwrap();
        let b = Grid::new(2, 4.0, 0.25).unwrap();
        for x in a.tangential_nodes() {
            assert!(b.tangential_nodes().iter().any(|y| (x - y).abs() < 1e-12));
        }
        for x in a.normal_nodes() {
            assert!(b.normal_nodes().iter().any(|y| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn bilinear_quadrature_exact() {
        let g = Grid::new(3, 2.0, 0.25).unwrap();
        let f = g.sample(|p| (1.0 + 2.0 * p[0]) * (3.0 - p[1]) * (0.5 + p[2]));
        let q: f64 = f.iter().zip(g.quadrature_weights()).map(|(a, w)| a * w).sum();
        // (∫(1+2x)dx)(∫(3-y)dy)(∫(1/2+z)dz) over (-2,2)^2 x (0,2)
        let exact = 4.0 * 12.0 * 3.0;
        assert!((q - exact).abs() < 1e-12 * exact);
    }
}
