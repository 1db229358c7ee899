use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fields::{curl, div, div_rows, gradient, curl_rows, apply_matrix_rep, GridGeometry, TrigPoly};
use crate::operators::{Builtin, MatrixRep};

fn box_geo(n: usize) -> GridGeometry {
    GridGeometry::periodic_cube(n, 3.0).unwrap()
}

/// Periodic band-limited field with `m` components and optional zero mean.
fn band_limited(seed: u64, g: &GridGeometry, m: usize, kmax: usize, mean_zero: bool) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = [g.width(0), g.width(1), g.width(2)];
    let comps = (0..m)
        .map(|_| {
            let mut t = TrigPoly::random(&mut rng, g.lo(), period, kmax);
            if mean_zero {
                let mid = t.mode_index([0, 0, 0]);
                t.coeffs[mid] = Default::default();
            }
            t.eval_grid(g)
        })
        .collect();
    Field::new(*g, comps).unwrap()
}

fn l2(f: &Field) -> f64 {
    f.inner(f).unwrap().sqrt()
}

#[test]
fn helmholtz_of_gradient_has_no_solenoidal_part() {
    let g = box_geo(16);
    let phi = band_limited(1, &g, 1, 3, true);
    let padded = Field::new(g, vec![phi.comp(0).to_vec(), vec![0.0; g.len()], vec![0.0; g.len()]]).unwrap();
    let v = gradient(&padded).unwrap().row(0);
    let (vd, vc) = helmholtz(&v).unwrap();
    assert!(vd.max_abs() <= 1e-10 * v.max_abs());
    assert!(vc.sub(&v).unwrap().max_abs() <= 1e-10 * v.max_abs());
}

#[test]
fn helmholtz_of_curl_has_no_gradient_part() {
    let g = box_geo(16);
    let w = band_limited(2, &g, 3, 3, false);
    let v = curl(&w).unwrap();
    let (vd, vc) = helmholtz(&v).unwrap();
    assert!(vc.max_abs() <= 1e-10 * v.max_abs());
    assert!(vd.sub(&v).unwrap().max_abs() <= 1e-10 * v.max_abs());
}

#[test]
fn helmholtz_reconstruction_orthogonality_idempotence() {
    let g = box_geo(16);
    for seed in 0..5 {
        let v = band_limited(10 + seed, &g, 3, 3, false);
        let (vd, vc) = helmholtz(&v).unwrap();
        let rec = v.sub(&vd).unwrap().sub(&vc).unwrap().max_abs();
        assert!(rec <= 1e-12 * v.max_abs());
        assert!(vd.inner(&vc).unwrap().abs() <= 1e-10 * v.inner(&v).unwrap());
        assert!(div(&vd).unwrap().max_abs() <= 1e-10 * v.max_abs() * 2.0 * PI);
        assert!(curl(&vc).unwrap().max_abs() <= 1e-10 * v.max_abs() * 2.0 * PI);
        let (vdd, vdc) = helmholtz(&vd).unwrap();
        assert!(vdd.sub(&vd).unwrap().max_abs() <= 1e-12 * v.max_abs());
        assert!(vdc.max_abs() <= 1e-12 * v.max_abs());
    }
}

#[test]
fn helmholtz_rows_matches_rowwise() {
    let g = box_geo(8);
    let f = band_limited(3, &g, 9, 2, false);
    let (fd, fc) = helmholtz_rows(&f).unwrap();
    for i in 0..3 {
        let (rd, rc) = helmholtz(&f.row(i)).unwrap();
        assert!(rd.sub(&fd.row(i)).unwrap().max_abs() < 1e-14 * f.max_abs().max(1.0) * 10.0);
        assert!(rc.sub(&fc.row(i)).unwrap().max_abs() < 1e-14 * f.max_abs().max(1.0) * 10.0);
    }
}

#[test]
fn helmholtz_needs_periodic_grid() {
    let g = GridGeometry::unit_cube(8).unwrap();
    assert!(helmholtz(&Field::zeros(g, 3)).is_err());
}

#[test]
fn riesz_scales_single_mode() {
    let g = box_geo(16);
    let l = g.width(0);
    let k0 = [1.0, 2.0, -1.0];
    let mode = Field::from_fn(g, 1, |x, out| {
        out[0] = (2.0 * PI * (0..3).map(|d| k0[d] * x[d]).sum::<f64>() / l).cos();
    });
    let r = riesz(&mode, 1.0).unwrap();
    let knorm = (k0.iter().map(|k| k * k).sum::<f64>()).sqrt();
    let expected = mode.scale(1.0 / (2.0 * PI * knorm / l));
    assert!(r.sub(&expected).unwrap().max_abs() <= 1e-12);
}

#[test]
fn riesz_semigroup_and_self_adjointness() {
    let g = box_geo(16);
    let f = band_limited(4, &g, 1, 3, true);
    let h = band_limited(5, &g, 1, 3, true);
    let twice = riesz(&riesz(&f, 0.7).unwrap(), 1.1).unwrap();
    let once = riesz(&f, 1.8).unwrap();
    assert!(twice.sub(&once).unwrap().max_abs() <= 1e-10 * once.max_abs());

    let a = riesz(&f, 1.3).unwrap().inner(&h).unwrap();
    let b = f.inner(&riesz(&h, 1.3).unwrap()).unwrap();
    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
}

#[test]
fn riesz_order_range() {
    let g = box_geo(8);
    let f = Field::zeros(g, 1);
    assert!(riesz(&f, 0.0).is_err());
    assert!(riesz(&f, 3.0).is_err());
}

#[test]
fn gamma_values() {
    // Γ(1/2) = √π gives closed forms for n = 3.
    assert!((gamma_s(1.0, 3).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
    assert!((gamma_s(2.0, 3).unwrap() - 4.0 * PI).abs() < 1e-12);
    for n in [2usize, 3, 4, 5] {
        let half = n as f64 / 2.0;
        let expected = PI.powf(half) * 2f64.powf(half);
        assert!((gamma_s(half, n).unwrap() - expected).abs() < 1e-10 * expected);
    }
    assert!(gamma_s(3.0, 3).is_err());
    assert!(gamma_s(0.0, 3).is_err());
}

#[test]
fn helmholtz_matches_potential_route() {
    // F_div^j = curl I_2 curl F^j and F_curl^j = −∇ I_2 div F^j, with
    // I_2 the Newtonian potential (γ(2) = 4π in three dimensions).
    let g = box_geo(16);
    let f = band_limited(7, &g, 9, 3, false);
    let (fd, fc) = helmholtz_rows(&f).unwrap();

    let pot_curl = riesz(&curl_rows(&f).unwrap(), 2.0).unwrap();
    let route_div = curl_rows(&pot_curl).unwrap();
    let pot_div = riesz(&div_rows(&f).unwrap(), 2.0).unwrap();
    let route_curl = gradient(&pot_div).unwrap().scale(-1.0);

    // The constant mode of F sits in F_div but not in the potential route.
    let means: Vec<f64> = (0..9)
        .map(|c| f.comp(c).iter().sum::<f64>() / g.len() as f64)
        .collect();
    let fd0 = fd.sub(&Field::constant(g, &means)).unwrap();
    assert!(l2(&fd0.sub(&route_div).unwrap()) <= 1e-8 * l2(&fd0));
    assert!(l2(&fc.sub(&route_curl).unwrap()) <= 1e-8 * l2(&fc));
}

#[test]
fn multiplier_inverts_elliptic_operators() {
    let g = box_geo(16);
    for b in [Builtin::Grad, Builtin::Sym, Builtin::Dev] {
        let a = MatrixRep::builtin(b);
        let t = MultiplierT::new(&a, &g).unwrap();
        for seed in 0..2 {
            let psi = band_limited(20 + seed, &g, 3, 3, true);
            let dpsi = gradient(&psi).unwrap();
            let apsi = apply_matrix_rep(&a, &dpsi).unwrap();
            for i in 0..3 {
                let recovered = t.apply(i, &apsi).unwrap();
                let expected = dpsi.select(&[i, 3 + i, 6 + i]);
                let err = l2(&recovered.sub(&expected).unwrap());
                assert!(err <= 1e-8 * l2(&expected), "{b} i={i}: {err}");
            }
        }
    }
}

#[test]
fn multiplier_symbol_is_zero_homogeneous() {
    let g = box_geo(16);
    let t = MultiplierT::new(&MatrixRep::builtin(Builtin::Sym), &g).unwrap();
    let k = g.index(1, 2, 3);
    let k2 = g.index(2, 4, 6);
    for i in 0..3 {
        let a = t.symbol_at(i, k).unwrap();
        let b = t.symbol_at(i, k2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
    assert!(t.symbol_at(0, 0).is_none());
    assert!(t.distinct_directions() < g.len());
}

#[test]
fn multiplier_symbol_matches_normal_equations() {
    // ξ_i (𝔸*𝔸)^{−1}𝔸* at an unnormalized ξ, solved directly.
    let g = box_geo(8);
    let a = MatrixRep::builtin(Builtin::Dev);
    let t = MultiplierT::new(&a, &g).unwrap();
    let idx = g.index(1, 3, 2);
    let xi = crate::spectral::fft::xi_at(&g, idx);
    let s = a.symbol(&xi);
    let normal = (s.transpose() * &s).try_inverse().unwrap() * s.transpose();
    for i in 0..3 {
        let direct = &normal * xi[i];
        let cached = t.symbol_at(i, idx).unwrap();
        for r in 0..3 {
            for c in 0..a.n_out() {
                assert!((direct[(r, c)] - cached[r * a.n_out() + c]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn multiplier_rejects_non_elliptic() {
    let g = box_geo(8);
    let err = MultiplierT::new(&MatrixRep::builtin(Builtin::Skew), &g).unwrap_err();
    assert!(err.to_string().contains("min_singular"));
}
