//! Grid-sampled fields on periodic boxes and cubes.
//!
//! Nodes are cell centers `x0 + (k + ½)h`; values are stored z-fastest,
//! i.e. the flat index of node `(ix, iy, iz)` is `(ix * ny + iy) * nz + iz`.
//! A matrix field stores its nine components row-major, so row `i` is the
//! vector field made of components `3i, 3i+1, 3i+2`.

mod diff;
mod io;
mod random;

pub use diff::{curl, curl_rows, derivative, div, div_rows, gradient};
pub use io::{read_field, write_field, write_field_to, read_field_from};
pub use random::{
    bump, bump_gradient, random_band_limited, random_band_limited_spec, sample_components, Bump, TrigPoly,
    WindowedTrig,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operators::MatrixRep;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    dims: [usize; 3],
    lo: [f64; 3],
    hi: [f64; 3],
    periodic: bool,
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], lo: [f64; 3], hi: [f64; 3], periodic: bool) -> Result<Self> {
        if dims.iter().any(|&n| n < 4) {
            return Err(invalid(format!("grid dims {dims:?} must all be at least 4")));
        }
        if (0..3).any(|d| !(hi[d] > lo[d]) || !lo[d].is_finite() || !hi[d].is_finite()) {
            return Err(invalid(format!("degenerate box {lo:?}..{hi:?}")));
        }
        Ok(Self { dims, lo, hi, periodic })
    }

    /// Periodic box `(−L/2, L/2)³` with `n` nodes per axis.
    pub fn periodic_cube(n: usize, width: f64) -> Result<Self> {
        let h = 0.5 * width;
        Self::new([n; 3], [-h; 3], [h; 3], true)
    }

    /// Non-periodic cube `(lo, hi)³` with `n` nodes per axis.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new([n; 3], [lo; 3], [hi; 3], false)
    }

    /// The unit cube `Q = (0,1)³`.
    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::cube(n, 0.0, 1.0)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lo(&self) -> [f64; 3] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 3] {
        self.hi
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.width(axis) / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..3).map(|d| self.spacing(d)).product()
    }

    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|d| 0.5 * (self.lo[d] + self.hi[d]))
    }

    /// Coordinate of node `k` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        self.lo[axis] + (k as f64 + 0.5) * self.spacing(axis)
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.dims[axis]).map(|k| self.coord(axis, k)).collect()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let nz = self.dims[2];
        let ny = self.dims[1];
        [idx / (ny * nz), (idx / nz) % ny, idx % nz]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.unravel(idx);
        [self.coord(0, ix), self.coord(1, iy), self.coord(2, iz)]
    }

    /// Same box and layout, but flagged periodic or not.
    pub fn with_periodic(&self, periodic: bool) -> Self {
        Self { periodic, ..*self }
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.dims == other.dims && self.lo == other.lo && self.hi == other.hi
    }
}

/// A field with `m` real components sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    geometry: GridGeometry,
    comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn new(geometry: GridGeometry, comps: Vec<Vec<f64>>) -> Result<Self> {
        if comps.is_empty() {
            return Err(invalid("a field needs at least one component"));
        }
        let n = geometry.len();
        for (c, data) in comps.iter().enumerate() {
            if data.len() != n {
                return Err(invalid(format!(
                    "component {c} has {} values, grid has {n} nodes",
                    data.len()
                )));
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("component {c} has non-finite values")));
            }
        }
        Ok(Self { geometry, comps })
    }

    /// Construct without validation; callers guarantee shape and finiteness.
    pub(crate) fn from_parts(geometry: GridGeometry, comps: Vec<Vec<f64>>) -> Self {
        debug_assert!(comps.iter().all(|c| c.len() == geometry.len()));
        Self { geometry, comps }
    }

    pub fn zeros(geometry: GridGeometry, ncomp: usize) -> Self {
        Self::from_parts(geometry, vec![vec![0.0; geometry.len()]; ncomp])
    }

    /// Sample `f` at every node; `f` writes `ncomp` values.
    pub fn from_fn(
        geometry: GridGeometry,
        ncomp: usize,
        mut f: impl FnMut([f64; 3], &mut [f64]),
    ) -> Self {
        let n = geometry.len();
        let mut comps = vec![vec![0.0; n]; ncomp];
        let mut buf = vec![0.0; ncomp];
        for idx in 0..n {
            buf.iter_mut().for_each(|x| *x = 0.0);
            f(geometry.point(idx), &mut buf);
            for (c, v) in buf.iter().enumerate() {
                comps[c][idx] = *v;
            }
        }
        Self::from_parts(geometry, comps)
    }

    /// The constant matrix field `M`.
    pub fn constant(geometry: GridGeometry, values: &[f64]) -> Self {
        Self::from_parts(
            geometry,
            values.iter().map(|&v| vec![v; geometry.len()]).collect(),
        )
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn len(&self) -> usize {
        self.geometry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometry.is_empty()
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// Values of all components at one node.
    pub fn at(&self, idx: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[idx]).collect()
    }

    /// Matrix value `F(x)` (row-major) of a nine-component field.
    pub fn matrix_at(&self, idx: usize) -> [f64; 9] {
        debug_assert_eq!(self.ncomp(), 9);
        std::array::from_fn(|k| self.comps[k][idx])
    }

    /// Frobenius norm of the value at one node.
    #[inline]
    pub fn abs_at(&self, idx: usize) -> f64 {
        self.comps.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    }

    pub fn pointwise_abs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.abs_at(i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.len()).map(|i| self.abs_at(i)).fold(0.0, f64::max)
    }

    pub(crate) fn expect_components(&self, m: usize, what: &str) -> Result<()> {
        if self.ncomp() != m {
            return Err(invalid(format!(
                "{what} needs a {m}-component field, got {}",
                self.ncomp()
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_same_layout(&self, other: &Field) -> Result<()> {
        if !self.geometry.same_layout(&other.geometry) || self.ncomp() != other.ncomp() {
            return Err(invalid("fields live on different grids or have different shapes"));
        }
        Ok(())
    }

    /// Row `i` of a matrix field as a vector field.
    pub fn row(&self, i: usize) -> Field {
        debug_assert_eq!(self.ncomp(), 9);
        Self::from_parts(self.geometry, self.comps[3 * i..3 * i + 3].to_vec())
    }

    /// Stack three vector fields as the rows of a matrix field.
    pub fn from_rows(rows: [Field; 3]) -> Result<Field> {
        let geometry = rows[0].geometry;
        let mut comps = Vec::with_capacity(9);
        for r in rows {
            r.expect_components(3, "matrix row")?;
            if !r.geometry.same_layout(&geometry) {
                return Err(invalid("rows live on different grids"));
            }
            comps.extend(r.comps);
        }
        Ok(Self::from_parts(geometry, comps))
    }

    /// Select components into a new field.
    pub fn select(&self, components: &[usize]) -> Field {
        Self::from_parts(
            self.geometry,
            components.iter().map(|&c| self.comps[c].clone()).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Self::from_parts(
            self.geometry,
            self.comps.iter().map(|c| c.iter().map(|&x| f(x)).collect()).collect(),
        )
    }

    pub fn scale(&self, t: f64) -> Field {
        self.map(|x| t * x)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + t·other`
    pub fn axpy(&self, t: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + t * b)
    }

    fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.expect_same_layout(other)?;
        Ok(Self::from_parts(
            self.geometry,
            self.comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        ))
    }

    /// Same data, relabelled onto `geometry` (must have the same layout).
    pub fn with_geometry(&self, geometry: GridGeometry) -> Result<Field> {
        if geometry.dims != self.geometry.dims {
            return Err(invalid("cannot relabel onto a grid with different dims"));
        }
        Ok(Self::from_parts(geometry, self.comps.clone()))
    }

    /// Apply a pointwise linear map `ℝ^{3×3} → ℝ^{3×3}`.
    pub fn map_matrix(&self, f: impl Fn(&[f64; 9]) -> [f64; 9]) -> Result<Field> {
        self.expect_components(9, "map_matrix")?;
        let n = self.len();
        let mut comps = vec![vec![0.0; n]; 9];
        for idx in 0..n {
            let m = f(&self.matrix_at(idx));
            for (c, v) in m.iter().enumerate() {
                comps[c][idx] = *v;
            }
        }
        Ok(Self::from_parts(self.geometry, comps))
    }

    /// L²-inner product with midpoint quadrature.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.expect_same_layout(other)?;
        let dot: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| {
                let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
                crate::norms::ordered_sum(&prods)
            })
            .sum();
        Ok(dot * self.geometry.cell_volume())
    }

    pub fn all_finite(&self) -> bool {
        self.comps.iter().flatten().all(|x| x.is_finite())
    }
}

/// Pointwise `A[F(x)]`; the result has `A.n_out()` components.
pub fn apply_matrix_rep(a: &MatrixRep, f: &Field) -> Result<Field> {
    f.expect_components(9, "apply_matrix_rep")?;
    let n = f.len();
    let rows = a.entries();
    let mut comps = vec![vec![0.0; n]; rows.len()];
    for (out, row) in comps.iter_mut().zip(rows) {
        for (col, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(&f.comps[col]) {
                *o += w * x;
            }
        }
    }
    Ok(Field::from_parts(f.geometry, comps))
}
