//! Differential operators. Periodic grids differentiate spectrally; cubes use
//! second-order centered differences with second-order one-sided stencils on
//! the first and last node of each line.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::Field;
use crate::error::{invalid, Result};
use crate::spectral::map_modes;

/// `∂_axis` of component `comp`.
pub fn derivative(f: &Field, comp: usize, axis: usize) -> Result<Vec<f64>> {
    if comp >= f.ncomp() || axis >= 3 {
        return Err(invalid("component or axis out of range"));
    }
    if f.geometry().is_periodic() {
        let single = f.select(&[comp]);
        let out = map_modes(&single, 1, |_, xi, input, out| {
            out[0] = input[0] * Complex64::new(0.0, 2.0 * PI * xi[axis]);
        })?;
        Ok(out.into_comps().pop().expect("one component"))
    } else {
        Ok(finite_difference(f, comp, axis))
    }
}

fn finite_difference(f: &Field, comp: usize, axis: usize) -> Vec<f64> {
    let g = f.geometry();
    let dims = g.dims();
    let n = dims[axis];
    let h = g.spacing(axis);
    let stride = match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    };
    let data = f.comp(comp);
    let mut out = vec![0.0; data.len()];
    let inv2h = 0.5 / h;
    for idx in 0..data.len() {
        let k = g.unravel(idx)[axis];
        let at = |offset: isize| data[(idx as isize + offset * stride as isize) as usize];
        out[idx] = if k == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv2h
        } else if k == n - 1 {
            (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * inv2h
        } else {
            (at(1) - at(-1)) * inv2h
        };
    }
    out
}

#[inline]
fn ik(xi: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI * xi)
}

/// `(∇u)_{ij} = ∂_j u_i`
pub fn gradient(u: &Field) -> Result<Field> {
    u.expect_components(3, "gradient")?;
    if u.geometry().is_periodic() {
        return map_modes(u, 9, |_, xi, input, out| {
            for i in 0..3 {
                for j in 0..3 {
                    out[3 * i + j] = input[i] * ik(xi[j]);
                }
            }
        });
    }
    let mut comps = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            comps.push(finite_difference(u, i, j));
        }
    }
    Ok(Field::from_parts(*u.geometry(), comps))
}

pub fn div(v: &Field) -> Result<Field> {
    v.expect_components(3, "div")?;
    if v.geometry().is_periodic() {
        return map_modes(v, 1, |_, xi, input, out| {
            out[0] = (0..3).map(|j| input[j] * ik(xi[j])).sum();
        });
    }
    let mut acc = finite_difference(v, 0, 0);
    for j in 1..3 {
        for (a, d) in acc.iter_mut().zip(finite_difference(v, j, j)) {
            *a += d;
        }
    }
    Ok(Field::from_parts(*v.geometry(), vec![acc]))
}

pub fn curl(v: &Field) -> Result<Field> {
    v.expect_components(3, "curl")?;
    curl_components(v, 1)
}

/// Row-wise curl of a matrix field: row `i` of the result is `curl(F^i)`.
pub fn curl_rows(f: &Field) -> Result<Field> {
    f.expect_components(9, "curl_rows")?;
    curl_components(f, 3)
}

/// Row-wise divergence of a matrix field.
pub fn div_rows(f: &Field) -> Result<Field> {
    f.expect_components(9, "div_rows")?;
    if f.geometry().is_periodic() {
        return map_modes(f, 3, |_, xi, input, out| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| input[3 * i + j] * ik(xi[j])).sum();
            }
        });
    }
    let mut comps = Vec::with_capacity(3);
    for i in 0..3 {
        let mut acc = finite_difference(f, 3 * i, 0);
        for j in 1..3 {
            for (a, d) in acc.iter_mut().zip(finite_difference(f, 3 * i + j, j)) {
                *a += d;
            }
        }
        comps.push(acc);
    }
    Ok(Field::from_parts(*f.geometry(), comps))
}

/// Curl applied to each consecutive triple of components.
fn curl_components(f: &Field, rows: usize) -> Result<Field> {
    const PAIRS: [(usize, usize, usize, usize); 3] = [(1, 2, 2, 1), (2, 0, 0, 2), (0, 1, 1, 0)];
    if f.geometry().is_periodic() {
        return map_modes(f, 3 * rows, |_, xi, input, out| {
            for r in 0..rows {
                let v = &input[3 * r..3 * r + 3];
                for (c, &(a, b, p, q)) in PAIRS.iter().enumerate() {
                    // (curl v)_c = ∂_a v_b − ∂_p v_q
                    out[3 * r + c] = v[b] * ik(xi[a]) - v[q] * ik(xi[p]);
                }
            }
        });
    }
    let mut comps = Vec::with_capacity(3 * rows);
    for r in 0..rows {
        for &(a, b, p, q) in &PAIRS {
            let first = finite_difference(f, 3 * r + b, a);
            let second = finite_difference(f, 3 * r + q, p);
            comps.push(first.iter().zip(&second).map(|(x, y)| x - y).collect());
        }
    }
    Ok(Field::from_parts(*f.geometry(), comps))
}
