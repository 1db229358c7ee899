//! Smooth compactly supported sample fields: trigonometric polynomials
//! multiplied by a C^∞ bump, evaluated exactly at grid nodes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Field, GridGeometry};
use crate::error::{invalid, Result};

/// `χ(r) = exp(1 − 1/(1 − r²))` for `r < 1`, zero otherwise.
#[inline]
pub fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Gradient of `x ↦ χ(|x − c| / R)`.
#[inline]
pub fn bump_gradient(x: &[f64; 3], center: &[f64; 3], radius: f64) -> [f64; 3] {
    let d: [f64; 3] = std::array::from_fn(|k| x[k] - center[k]);
    let r2 = d.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
    if r2 >= 1.0 {
        return [0.0; 3];
    }
    let s = 1.0 - r2;
    let factor = -2.0 * (1.0 - 1.0 / s).exp() / (s * s * radius * radius);
    d.map(|v| factor * v)
}

/// Radial bump window `x ↦ χ(|x − center| / radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Bump {
    pub fn value(&self, x: &[f64; 3]) -> f64 {
        let r2: f64 = (0..3).map(|k| (x[k] - self.center[k]).powi(2)).sum();
        bump(r2.sqrt() / self.radius)
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        bump_gradient(x, &self.center, self.radius)
    }
}

/// Real trigonometric polynomial `Re Σ_k c_k e^{iθ_k(x)}` with
/// `θ_k(x) = 2π Σ_d k_d (x_d − origin_d) / period_d` and `|k|_∞ ≤ kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub origin: [f64; 3],
    pub period: [f64; 3],
    pub kmax: usize,
    /// Coefficients on the full cube of modes, kz fastest, offset by kmax.
    pub coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn zeros(origin: [f64; 3], period: [f64; 3], kmax: usize) -> Self {
        let side = 2 * kmax + 1;
        Self {
            origin,
            period,
            kmax,
            coeffs: vec![Complex64::default(); side * side * side],
        }
    }

    /// A polynomial with the single coefficient `c_0 = 1`.
    pub fn constant_one(origin: [f64; 3], period: [f64; 3], kmax: usize) -> Self {
        let mut t = Self::zeros(origin, period, kmax);
        let mid = t.mode_index([0, 0, 0]);
        t.coeffs[mid] = Complex64::new(1.0, 0.0);
        t
    }

    pub fn side(&self) -> usize {
        2 * self.kmax + 1
    }

    pub fn mode_index(&self, k: [i64; 3]) -> usize {
        let s = self.side();
        let o = self.kmax as i64;
        (((k[0] + o) as usize * s) + (k[1] + o) as usize) * s + (k[2] + o) as usize
    }

    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let s = self.side();
        let o = self.kmax as i64;
        [
            (idx / (s * s)) as i64 - o,
            ((idx / s) % s) as i64 - o,
            (idx % s) as i64 - o,
        ]
    }

    /// Modes with `k = 0` or first nonzero entry positive, in canonical order.
    pub fn half_lattice(kmax: usize) -> Vec<[i64; 3]> {
        let m = kmax as i64;
        let mut out = Vec::new();
        for kx in -m..=m {
            for ky in -m..=m {
                for kz in -m..=m {
                    let k = [kx, ky, kz];
                    let first = k.iter().copied().find(|&v| v != 0);
                    if first.is_none_or(|v| v > 0) {
                        out.push(k);
                    }
                }
            }
        }
        out
    }

    /// Random real polynomial with independent standard normal cosine and
    /// sine coefficients on the half lattice.
    pub fn random(
        rng: &mut ChaCha8Rng,
        origin: [f64; 3],
        period: [f64; 3],
        kmax: usize,
    ) -> Self {
        let mut t = Self::zeros(origin, period, kmax);
        for k in Self::half_lattice(kmax) {
            let a: f64 = StandardNormal.sample(rng);
            let idx = t.mode_index(k);
            if k == [0, 0, 0] {
                t.coeffs[idx] = Complex64::new(a, 0.0);
            } else {
                let b: f64 = StandardNormal.sample(rng);
                t.coeffs[idx] = Complex64::new(a, -b);
            }
        }
        t
    }

    /// Angular wavenumber `2π k_d / period_d` of mode `k` along `axis`.
    pub fn wavenumber(&self, k: [i64; 3], axis: usize) -> f64 {
        2.0 * PI * k[axis] as f64 / self.period[axis]
    }

    /// Direct evaluation at one point.
    pub fn value_at(&self, x: &[f64; 3]) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(idx, c)| {
                let k = self.mode(idx);
                let theta: f64 = (0..3)
                    .map(|d| self.wavenumber(k, d) * (x[d] - self.origin[d]))
                    .sum();
                (c * Complex64::from_polar(1.0, theta)).re
            })
            .sum()
    }

    fn axis_table(&self, g: &GridGeometry, axis: usize, conjugate: bool) -> Vec<Vec<Complex64>> {
        let m = self.kmax as i64;
        (-m..=m)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / self.period[axis];
                (0..g.dims()[axis])
                    .map(|i| {
                        let t = w * (g.coord(axis, i) - self.origin[axis]);
                        Complex64::from_polar(1.0, if conjugate { -t } else { t })
                    })
                    .collect()
            })
            .collect()
    }

    fn synthesize(&self, g: &GridGeometry, coeffs: &[Complex64]) -> Vec<f64> {
        let [nx, ny, nz] = g.dims();
        let s = self.side();
        let ex = self.axis_table(g, 0, false);
        let ey = self.axis_table(g, 1, false);
        let ez = self.axis_table(g, 2, false);

        let mut s1 = vec![Complex64::default(); s * s * nz];
        for a in 0..s {
            for b in 0..s {
                let dst = &mut s1[(a * s + b) * nz..(a * s + b + 1) * nz];
                for c in 0..s {
                    let coef = coeffs[(a * s + b) * s + c];
                    if coef.norm_sqr() == 0.0 {
                        continue;
                    }
                    for (d, e) in dst.iter_mut().zip(&ez[c]) {
                        *d += coef * e;
                    }
                }
            }
        }
        let mut s2 = vec![Complex64::default(); s * ny * nz];
        for a in 0..s {
            for b in 0..s {
                let src = &s1[(a * s + b) * nz..(a * s + b + 1) * nz];
                for iy in 0..ny {
                    let e = ey[b][iy];
                    let dst = &mut s2[(a * ny + iy) * nz..(a * ny + iy + 1) * nz];
                    for (d, v) in dst.iter_mut().zip(src) {
                        *d += v * e;
                    }
                }
            }
        }
        let mut out = vec![0.0; nx * ny * nz];
        for a in 0..s {
            for ix in 0..nx {
                let e = ex[a][ix];
                let src = &s2[a * ny * nz..(a + 1) * ny * nz];
                let dst = &mut out[ix * ny * nz..(ix + 1) * ny * nz];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += (v * e).re;
                }
            }
        }
        out
    }

    pub fn eval_grid(&self, g: &GridGeometry) -> Vec<f64> {
        self.synthesize(g, &self.coeffs)
    }

    /// `∂_axis` of the polynomial at every node.
    pub fn derivative_grid(&self, g: &GridGeometry, axis: usize) -> Vec<f64> {
        let scaled: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| c * Complex64::new(0.0, self.wavenumber(self.mode(idx), axis)))
            .collect();
        self.synthesize(g, &scaled)
    }

    /// `Σ_x w(x) e^{−iθ_k(x)}` for every mode on the full cube.
    pub fn analyze(&self, g: &GridGeometry, weights: &[f64]) -> Vec<Complex64> {
        let [nx, ny, nz] = g.dims();
        let s = self.side();
        let ex = self.axis_table(g, 0, true);
        let ey = self.axis_table(g, 1, true);
        let ez = self.axis_table(g, 2, true);

        // r1[ix][iy][c]
        let mut r1 = vec![Complex64::default(); nx * ny * s];
        for ix in 0..nx {
            for iy in 0..ny {
                let w = &weights[(ix * ny + iy) * nz..(ix * ny + iy + 1) * nz];
                for c in 0..s {
                    r1[(ix * ny + iy) * s + c] =
                        w.iter().zip(&ez[c]).map(|(x, e)| e * *x).sum();
                }
            }
        }
        // r2[ix][b][c]
        let mut r2 = vec![Complex64::default(); nx * s * s];
        for ix in 0..nx {
            for b in 0..s {
                for iy in 0..ny {
                    let e = ey[b][iy];
                    for c in 0..s {
                        r2[(ix * s + b) * s + c] += r1[(ix * ny + iy) * s + c] * e;
                    }
                }
            }
        }
        let mut out = vec![Complex64::default(); s * s * s];
        for a in 0..s {
            for ix in 0..nx {
                let e = ex[a][ix];
                let src = &r2[ix * s * s..(ix + 1) * s * s];
                let dst = &mut out[a * s * s..(a + 1) * s * s];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += v * e;
                }
            }
        }
        out
    }
}

/// A trigonometric polynomial multiplied by a bump window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedTrig {
    pub window: Bump,
    pub trig: TrigPoly,
}

impl WindowedTrig {
    pub fn value_at(&self, x: &[f64; 3]) -> f64 {
        let w = self.window.value(x);
        if w == 0.0 {
            0.0
        } else {
            w * self.trig.value_at(x)
        }
    }

    pub fn window_grid(&self, g: &GridGeometry) -> Vec<f64> {
        (0..g.len()).map(|i| self.window.value(&g.point(i))).collect()
    }

    pub fn window_gradient_grid(&self, g: &GridGeometry) -> [Vec<f64>; 3] {
        let mut out = [vec![0.0; g.len()], vec![0.0; g.len()], vec![0.0; g.len()]];
        for i in 0..g.len() {
            let d = self.window.gradient(&g.point(i));
            for k in 0..3 {
                out[k][i] = d[k];
            }
        }
        out
    }

    pub fn eval_grid(&self, g: &GridGeometry) -> Vec<f64> {
        let w = self.window_grid(g);
        self.trig
            .eval_grid(g)
            .into_iter()
            .zip(w)
            .map(|(t, w)| t * w)
            .collect()
    }

    /// Exact gradient `T∇χ + χ∇T` at every node.
    pub fn gradient_grid(&self, g: &GridGeometry) -> [Vec<f64>; 3] {
        let w = self.window_grid(g);
        let dw = self.window_gradient_grid(g);
        let t = self.trig.eval_grid(g);
        std::array::from_fn(|axis| {
            let dt = self.trig.derivative_grid(g, axis);
            (0..g.len())
                .map(|i| t[i] * dw[axis][i] + w[i] * dt[i])
                .collect()
        })
    }

    /// `x ↦ f(c + (x − c)/λ)` about the window center `c`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let c = self.window.center;
        let mut trig = self.trig.clone();
        trig.period = trig.period.map(|p| p * lambda);
        trig.origin = std::array::from_fn(|d| c[d] + lambda * (trig.origin[d] - c[d]));
        Self {
            window: Bump {
                center: c,
                radius: self.window.radius * lambda,
            },
            trig,
        }
    }
}

/// Sample a list of scalar windowed polynomials as the components of a field.
pub fn sample_components(parts: &[WindowedTrig], g: &GridGeometry) -> Field {
    Field::from_parts(*g, parts.iter().map(|p| p.eval_grid(g)).collect())
}

/// The continuous description behind [`random_band_limited`]: nine windowed
/// polynomials whose coefficients depend only on `(seed, kmax)` and the box,
/// never on the node counts.
pub fn random_band_limited_spec(
    seed: u64,
    geometry: &GridGeometry,
    kmax: usize,
    support_radius: f64,
) -> Result<Vec<WindowedTrig>> {
    let min_dim = *geometry.dims().iter().min().expect("three axes");
    if 4 * kmax > min_dim {
        return Err(invalid(format!(
            "kmax = {kmax} exceeds min(dims)/4 = {}",
            min_dim / 4
        )));
    }
    let half_width = (0..3).map(|d| geometry.width(d)).fold(f64::INFINITY, f64::min) / 2.0;
    if !(support_radius > 0.0 && support_radius < half_width) {
        return Err(invalid(format!(
            "support_radius = {support_radius} must lie in (0, {half_width})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = std::array::from_fn(|d| geometry.width(d));
    let window = Bump {
        center: geometry.center(),
        radius: support_radius,
    };
    Ok((0..9)
        .map(|_| WindowedTrig {
            window,
            trig: TrigPoly::random(&mut rng, geometry.lo(), period, kmax),
        })
        .collect())
}

/// Random smooth matrix field supported in the ball of radius
/// `support_radius` about the box center.
pub fn random_band_limited(
    seed: u64,
    geometry: &GridGeometry,
    kmax: usize,
    support_radius: f64,
) -> Result<Field> {
    let parts = random_band_limited_spec(seed, geometry, kmax, support_radius)?;
    Ok(sample_components(&parts, geometry))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(n: usize) -> GridGeometry {
        GridGeometry::periodic_cube(n, 3.0).unwrap()
    }

    #[test]
    fn bump_gradient_matches_finite_difference() {
        let c = [0.1, -0.2, 0.3];
        let x = [0.4, 0.1, 0.2];
        let g = bump_gradient(&x, &c, 0.8);
        let h = 1e-6;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let r = |y: [f64; 3]| {
                bump((0..3).map(|d| (y[d] - c[d]).powi(2)).sum::<f64>().sqrt() / 0.8)
            };
            let fd = (r(xp) - r(xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn separable_synthesis_matches_direct_sum() {
        let g = GridGeometry::new([5, 6, 7], [0.0, -1.0, 0.5], [1.0, 1.0, 2.0], false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TrigPoly::random(&mut rng, [0.2, 0.0, -0.1], [1.5, 2.0, 0.8], 2);
        let grid = t.eval_grid(&g);
        let dz = t.derivative_grid(&g, 2);
        for idx in [0, 13, 77, g.len() - 1] {
            let x = g.point(idx);
            assert!((grid[idx] - t.value_at(&x)).abs() < 1e-11);
            let h = 1e-6;
            let fd = (t.value_at(&[x[0], x[1], x[2] + h]) - t.value_at(&[x[0], x[1], x[2] - h]))
                / (2.0 * h);
            assert!((dz[idx] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn analyze_is_adjoint_of_synthesis() {
        let g = GridGeometry::new([5, 4, 6], [0.0; 3], [1.0; 3], false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = TrigPoly::random(&mut rng, [0.0; 3], [1.3, 1.1, 0.9], 1);
        let w: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        // ⟨w, Re Σ c e^{iθ}⟩ = Re Σ c · conj(A*w)... = Re Σ c · Σ w e^{iθ}
        let lhs: f64 = t.eval_grid(&g).iter().zip(&w).map(|(a, b)| a * b).sum();
        let a = t.analyze(&g, &w);
        let rhs: f64 = t.coeffs.iter().zip(&a).map(|(c, z)| (c * z.conj()).re).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn determinism_and_support() {
        let g = geo(16);
        let a = random_band_limited(11, &g, 3, 0.5).unwrap();
        let b = random_band_limited(11, &g, 3, 0.5).unwrap();
        assert_eq!(a, b);
        for idx in 0..g.len() {
            let x = g.point(idx);
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() >= 0.5 {
                assert!(a.at(idx).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let g = geo(16);
        for pair in 0..20u64 {
            let a = random_band_limited(2 * pair, &g, 3, 0.6).unwrap();
            let b = random_band_limited(2 * pair + 1, &g, 3, 0.6).unwrap();
            let diff = a.sub(&b).unwrap();
            let rel = diff.inner(&diff).unwrap().sqrt() / a.inner(&a).unwrap().sqrt();
            assert!(rel > 0.1, "pair {pair}: {rel}");
        }
    }

    #[test]
    fn coefficients_do_not_depend_on_resolution() {
        let a = random_band_limited_spec(4, &geo(16), 2, 0.5).unwrap();
        let b = random_band_limited_spec(4, &geo(32), 2, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn preconditions() {
        let g = geo(16);
        assert!(random_band_limited(0, &g, 5, 0.5).is_err());
        assert!(random_band_limited(0, &g, 4, 1.5).is_err());
        assert!(random_band_limited(0, &g, 4, 0.0).is_err());
    }

    #[test]
    fn dilation_rescales_argument() {
        let g = geo(8);
        let parts = random_band_limited_spec(9, &g, 1, 0.8).unwrap();
        let d = parts[0].dilate(0.5);
        let x = [0.1, -0.2, 0.05];
        let y = [0.2, -0.4, 0.1];
        assert!((d.value_at(&x) - parts[0].value_at(&y)).abs() < 1e-12);
    }
}
