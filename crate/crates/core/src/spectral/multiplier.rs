use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{fft, map_modes};
use crate::error::{invalid, KmsError, Result};
use crate::fields::{Field, GridGeometry};
use crate::operators::{ellipticity, EllipticityOptions, MatrixRep};

/// The multipliers `T_𝔸^i`, symbol `ξ_i (𝔸*[ξ]𝔸[ξ])^{−1} 𝔸*[ξ]`, for one
/// elliptic operator on one periodic grid.
///
/// The symbol is homogeneous of degree zero, so it is evaluated at `ξ/|ξ|`.
/// Pseudoinverses are computed once per distinct lattice direction.
#[derive(Debug, Clone)]
pub struct MultiplierT {
    geometry: GridGeometry,
    n_out: usize,
    /// Row-major `3 × N` pseudoinverses, one per distinct direction.
    pinvs: Vec<Vec<f64>>,
    unit_dirs: Vec<[f64; 3]>,
    /// Index into `pinvs` per bin, `u32::MAX` for the zero bin.
    slot: Vec<u32>,
}

const ZERO_SLOT: u32 = u32::MAX;

impl MultiplierT {
    pub fn new(a: &MatrixRep, geometry: &GridGeometry) -> Result<Self> {
        Self::with_options(a, geometry, &EllipticityOptions::default())
    }

    pub fn with_options(
        a: &MatrixRep,
        geometry: &GridGeometry,
        opts: &EllipticityOptions,
    ) -> Result<Self> {
        if !geometry.is_periodic() {
            return Err(invalid("multiplier_T needs a periodic geometry"));
        }
        let report = ellipticity(a, opts)?;
        if !report.is_elliptic {
            return Err(KmsError::Precondition(format!(
                "operator '{}' is not elliptic: min_singular = {:e} <= {:e}",
                a.name(),
                report.min_singular,
                report.tolerance
            )));
        }

        let dims = geometry.dims();
        let mut cache: HashMap<[i64; 3], u32> = HashMap::new();
        let mut pinvs = Vec::new();
        let mut unit_dirs = Vec::new();
        let mut slot = vec![ZERO_SLOT; geometry.len()];
        for (idx, s) in slot.iter_mut().enumerate() {
            let j = geometry.unravel(idx);
            let k: [i64; 3] = std::array::from_fn(|ax| {
                if dims[ax] % 2 == 0 && j[ax] == dims[ax] / 2 {
                    0
                } else {
                    fft::signed_frequency(j[ax], dims[ax])
                }
            });
            if k == [0, 0, 0] {
                continue;
            }
            let g = gcd(gcd(k[0].unsigned_abs(), k[1].unsigned_abs()), k[2].unsigned_abs()) as i64;
            let key = k.map(|x| x / g);
            *s = match cache.get(&key) {
                Some(&i) => i,
                None => {
                    let xi = fft::xi_at(geometry, idx);
                    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let unit = xi.map(|x| x / norm);
                    pinvs.push(unit_pseudoinverse(a, &unit)?);
                    unit_dirs.push(unit);
                    let i = (pinvs.len() - 1) as u32;
                    cache.insert(key, i);
                    i
                }
            };
        }
        Ok(Self {
            geometry: *geometry,
            n_out: a.n_out(),
            pinvs,
            unit_dirs,
            slot,
        })
    }

    pub fn distinct_directions(&self) -> usize {
        self.pinvs.len()
    }

    /// The `3 × N` symbol matrix (row-major) at bin `idx`, or `None` at zero.
    pub fn symbol_at(&self, i: usize, idx: usize) -> Option<Vec<f64>> {
        let s = self.slot[idx];
        if s == ZERO_SLOT {
            return None;
        }
        let w = self.unit_dirs[s as usize][i];
        Some(self.pinvs[s as usize].iter().map(|p| w * p).collect())
    }

    /// `T_𝔸^i G` for an `N`-component field `G`.
    pub fn apply(&self, i: usize, g: &Field) -> Result<Field> {
        if i >= 3 {
            return Err(invalid("direction index must be 0, 1 or 2"));
        }
        g.expect_components(self.n_out, "multiplier_T")?;
        if !g.geometry().same_layout(&self.geometry) || !g.geometry().is_periodic() {
            return Err(invalid("field grid differs from the multiplier's grid"));
        }
        let n = self.n_out;
        map_modes(g, 3, |idx, _, input, out| {
            let s = self.slot[idx];
            if s == ZERO_SLOT {
                return;
            }
            let w = self.unit_dirs[s as usize][i];
            let p = &self.pinvs[s as usize];
            for (r, o) in out.iter_mut().enumerate() {
                let row = &p[r * n..(r + 1) * n];
                *o = row.iter().zip(input).map(|(a, z)| z * *a).sum::<Complex64>() * w;
            }
        })
    }
}

/// `(𝔸*[ξ]𝔸[ξ])^{−1} 𝔸*[ξ]` at a unit vector, via SVD.
fn unit_pseudoinverse(a: &MatrixRep, unit: &[f64; 3]) -> Result<Vec<f64>> {
    let s: DMatrix<f64> = a.symbol(unit);
    let svd = s.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(KmsError::Internal("SVD did not return singular vectors".into())),
    };
    let sigma = &svd.singular_values;
    if sigma.len() < 3 || sigma.iter().any(|&x| x <= 0.0) {
        return Err(KmsError::Internal("symbol lost rank at a lattice direction".into()));
    }
    let n = a.n_out();
    let mut out = vec![0.0; 3 * n];
    for r in 0..3 {
        for c in 0..n {
            out[r * n + c] = (0..sigma.len())
                .map(|k| v_t[(k, r)] * u[(c, k)] / sigma[k])
                .sum();
        }
    }
    Ok(out)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
