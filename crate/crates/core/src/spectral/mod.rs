//! Fourier-side operators on periodic grids: Helmholtz projection, Riesz
//! potentials, and the multipliers `T_𝔸^i` that invert an elliptic operator
//! up to one derivative.
//!
//! Every singular symbol is set to zero at the constant mode.

mod fft;
mod multiplier;

pub use fft::{effective_frequency, signed_frequency, FourierField};
pub use multiplier::MultiplierT;

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::fields::Field;

/// Transform `field`, map the coefficients mode by mode, transform back.
///
/// The callback receives the flat bin index, the effective frequency `ξ`
/// (see [`effective_frequency`]), the input coefficients at that bin and a
/// zeroed output slice of length `out_count`.
pub(crate) fn map_modes(
    field: &Field,
    out_count: usize,
    mut f: impl FnMut(usize, &[f64; 3], &[Complex64], &mut [Complex64]),
) -> Result<Field> {
    let spectrum = FourierField::forward(field)?;
    let g = *field.geometry();
    let n = g.len();
    let mut out = vec![vec![Complex64::default(); n]; out_count];
    let mut input = vec![Complex64::default(); spectrum.ncomp()];
    let mut output = vec![Complex64::default(); out_count];
    for idx in 0..n {
        for (slot, c) in input.iter_mut().zip(spectrum.comps()) {
            *slot = c[idx];
        }
        output.iter_mut().for_each(|z| *z = Complex64::default());
        f(idx, &fft::xi_at(&g, idx), &input, &mut output);
        for (dst, z) in out.iter_mut().zip(&output) {
            dst[idx] = *z;
        }
    }
    Ok(FourierField::from_parts(g, out)?.inverse())
}

#[inline]
fn norm_sq(xi: &[f64; 3]) -> f64 {
    xi.iter().map(|x| x * x).sum()
}

/// Helmholtz split of a periodic vector field into a solenoidal part and a
/// gradient part, `v = v_div + v_curl`. The constant mode belongs to `v_div`.
pub fn helmholtz(v: &Field) -> Result<(Field, Field)> {
    v.expect_components(3, "helmholtz")?;
    split_rows(v, 1)
}

/// Row-wise Helmholtz split of a matrix field.
pub fn helmholtz_rows(f: &Field) -> Result<(Field, Field)> {
    f.expect_components(9, "helmholtz_rows")?;
    split_rows(f, 3)
}

fn split_rows(f: &Field, rows: usize) -> Result<(Field, Field)> {
    if !f.geometry().is_periodic() {
        return Err(invalid("helmholtz needs a periodic geometry"));
    }
    let curl_part = map_modes(f, 3 * rows, |_, xi, input, out| {
        let k2 = norm_sq(xi);
        if k2 == 0.0 {
            return;
        }
        for r in 0..rows {
            let v = &input[3 * r..3 * r + 3];
            let proj: Complex64 = (0..3).map(|j| v[j] * xi[j]).sum::<Complex64>() / k2;
            for j in 0..3 {
                out[3 * r + j] = proj * xi[j];
            }
        }
    })?;
    let div_part = f.sub(&curl_part)?;
    Ok((div_part, curl_part))
}

/// Riesz potential `I_s` applied per component via the symbol `(2π|ξ|)^{−s}`.
/// The mean of the input is dropped.
pub fn riesz(f: &Field, s: f64) -> Result<Field> {
    if !(s > 0.0 && s < 3.0) {
        return Err(invalid(format!("Riesz order s = {s} must lie in (0, 3)")));
    }
    if !f.geometry().is_periodic() {
        return Err(invalid("riesz needs a periodic geometry"));
    }
    map_modes(f, f.ncomp(), |_, xi, input, out| {
        let k = norm_sq(xi).sqrt();
        if k == 0.0 {
            return;
        }
        let m = (2.0 * PI * k).powf(-s);
        for (o, i) in out.iter_mut().zip(input) {
            *o = i * m;
        }
    })
}

/// Normalization `γ(s) = π^{n/2} 2^s Γ(s/2) / Γ(n/2 − s/2)` of the Riesz
/// kernel `|x|^{s−n} / γ(s)`.
pub fn gamma_s(s: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(s > 0.0 && s < nf) {
        return Err(invalid(format!("gamma_s needs 0 < s < n, got s = {s}, n = {n}")));
    }
    Ok(PI.powf(nf / 2.0) * 2f64.powf(s) * gamma(s / 2.0) / gamma(nf / 2.0 - s / 2.0))
}

#[cfg(test)]
mod tests;
