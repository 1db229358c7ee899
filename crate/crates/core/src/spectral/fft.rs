use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::fields::{Field, GridGeometry};

/// Unnormalized 3-D complex FFT on z-fastest buffers.
pub(crate) struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub(crate) fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims,
            forward: dims.map(|n| planner.plan_fft_forward(n)),
            inverse: dims.map(|n| planner.plan_fft_inverse(n)),
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        debug_assert_eq!(data.len(), nx * ny * nz);

        // z lines are contiguous.
        plans[2].process(data);

        // y lines: for each x slab gather nz lines of length ny.
        let mut block = vec![Complex64::default(); ny.max(nx) * nz];
        for ix in 0..nx {
            let slab = &mut data[ix * ny * nz..(ix + 1) * ny * nz];
            for iy in 0..ny {
                for iz in 0..nz {
                    block[iz * ny + iy] = slab[iy * nz + iz];
                }
            }
            plans[1].process(&mut block[..ny * nz]);
            for iy in 0..ny {
                for iz in 0..nz {
                    slab[iy * nz + iz] = block[iz * ny + iy];
                }
            }
        }

        // x lines: for each y gather nz lines of length nx.
        for iy in 0..ny {
            for ix in 0..nx {
                let base = (ix * ny + iy) * nz;
                for iz in 0..nz {
                    block[iz * nx + ix] = data[base + iz];
                }
            }
            plans[0].process(&mut block[..nx * nz]);
            for ix in 0..nx {
                let base = (ix * ny + iy) * nz;
                for iz in 0..nz {
                    data[base + iz] = block[iz * nx + ix];
                }
            }
        }
    }
}

/// Signed integer frequency of FFT bin `j` on an axis with `n` nodes.
#[inline]
pub fn signed_frequency(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Continuous frequency `ξ = k/L` used by derivatives and multipliers. The
/// Nyquist bin of an even axis is zeroed so that odd symbols keep real
/// fields real.
#[inline]
pub fn effective_frequency(geometry: &GridGeometry, axis: usize, j: usize) -> f64 {
    let n = geometry.dims()[axis];
    if n % 2 == 0 && j == n / 2 {
        0.0
    } else {
        signed_frequency(j, n) as f64 / geometry.width(axis)
    }
}

/// Spectral coefficients of a periodic grid field.
///
/// The coefficient at integer frequency `k` approximates
/// `∫ f(x) e^{−2πi⟨x,k⟩/L} dx`, i.e. the DFT scaled by the cell volume with
/// the phase of the cell-centered node positions folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    geometry: GridGeometry,
    comps: Vec<Vec<Complex64>>,
}

impl FourierField {
    pub fn forward(field: &Field) -> Result<Self> {
        let geometry = *field.geometry();
        if !geometry.is_periodic() {
            return Err(invalid("Fourier transforms need a periodic geometry"));
        }
        let fft = Fft3::new(geometry.dims());
        let phase = phase_table(&geometry);
        let h3 = geometry.cell_volume();
        let comps = field
            .comps()
            .iter()
            .map(|c| {
                let mut buf: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fft.forward(&mut buf);
                apply_phase(&geometry, &phase, &mut buf, h3, false);
                buf
            })
            .collect();
        Ok(Self { geometry, comps })
    }

    pub fn from_parts(geometry: GridGeometry, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if !geometry.is_periodic() {
            return Err(invalid("Fourier transforms need a periodic geometry"));
        }
        if comps.iter().any(|c| c.len() != geometry.len()) {
            return Err(invalid("coefficient arrays do not match the grid"));
        }
        Ok(Self { geometry, comps })
    }

    /// Back to the grid; imaginary residue of the inverse is discarded.
    pub fn inverse(&self) -> Field {
        let fft = Fft3::new(self.geometry.dims());
        let phase = phase_table(&self.geometry);
        let scale = 1.0 / (self.geometry.cell_volume() * self.geometry.len() as f64);
        let comps = self
            .comps
            .iter()
            .map(|c| {
                let mut buf = c.clone();
                apply_phase(&self.geometry, &phase, &mut buf, 1.0, true);
                fft.inverse(&mut buf);
                buf.iter().map(|z| z.re * scale).collect()
            })
            .collect();
        Field::from_parts(self.geometry, comps)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Signed integer frequency triple of flat bin `idx`.
    pub fn frequency(&self, idx: usize) -> [i64; 3] {
        let j = self.geometry.unravel(idx);
        let d = self.geometry.dims();
        std::array::from_fn(|a| signed_frequency(j[a], d[a]))
    }

    /// Effective continuous frequency `ξ` of flat bin `idx`.
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        xi_at(&self.geometry, idx)
    }
}

#[inline]
pub(crate) fn xi_at(geometry: &GridGeometry, idx: usize) -> [f64; 3] {
    let j = geometry.unravel(idx);
    std::array::from_fn(|a| effective_frequency(geometry, a, j[a]))
}

/// Per-axis phase factors `e^{−2πi k (x0 + h/2) / L}`. The Nyquist bin of an
/// even axis is its own mirror image, so it gets no phase (keeps `c(−k) =
/// conj c(k)` for real fields).
fn phase_table(g: &GridGeometry) -> [Vec<Complex64>; 3] {
    std::array::from_fn(|a| {
        let n = g.dims()[a];
        let shift = g.coord(a, 0);
        (0..n)
            .map(|j| {
                if n % 2 == 0 && j == n / 2 {
                    return Complex64::new(1.0, 0.0);
                }
                let k = signed_frequency(j, n) as f64;
                Complex64::from_polar(1.0, -2.0 * PI * k * shift / g.width(a))
            })
            .collect()
    })
}

fn apply_phase(
    g: &GridGeometry,
    phase: &[Vec<Complex64>; 3],
    buf: &mut [Complex64],
    scale: f64,
    conjugate: bool,
) {
    let [nx, ny, nz] = g.dims();
    for ix in 0..nx {
        for iy in 0..ny {
            let pxy = phase[0][ix] * phase[1][iy] * scale;
            let base = (ix * ny + iy) * nz;
            for iz in 0..nz {
                let mut p = pxy * phase[2][iz];
                if conjugate {
                    p = p.conj();
                }
                buf[base + iz] *= p;
            }
        }
    }
}
