//! Oscillating fields along a kernel direction of a non-elliptic operator:
//! `ψ_k(x) = ρ(x) η_k(⟨x, ξ⟩) v` with `η_k(t) = χ(t) sin(kt)`. The operator
//! only sees the slowly varying factor, while the gradient grows like `k`.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, KmsError, Result};
use crate::fields::{apply_matrix_rep, bump, gradient, Field, GridGeometry};
use crate::norms::lp_norm;
use crate::operators::{kernel_direction, MatrixRep};

use super::report::fmt_float;

/// Side of the periodic box; both bumps have radius 1 about the origin.
pub const COUNTEREXAMPLE_BOX: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleStep {
    pub k: u32,
    pub grad_norm: f64,
    pub op_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleSequence {
    pub operator: String,
    pub xi: [f64; 3],
    pub v: [f64; 3],
    pub p: f64,
    pub dims: [usize; 3],
    /// `|A[v ⊗ ξ]|`, the part of the symbol that should vanish.
    pub kernel_residual: f64,
    pub steps: Vec<CounterexampleStep>,
}

impl CounterexampleSequence {
    pub fn ratios_increasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[1].ratio > w[0].ratio)
    }

    /// Last ratio over first ratio.
    pub fn growth(&self) -> f64 {
        match (self.steps.first(), self.steps.last()) {
            (Some(a), Some(b)) => b.ratio / a.ratio,
            _ => f64::NAN,
        }
    }

    /// `max ‖Aψ_k‖ / min ‖Aψ_k‖ − 1`.
    pub fn op_norm_variation(&self) -> f64 {
        let max = self.steps.iter().map(|s| s.op_norm).fold(f64::NEG_INFINITY, f64::max);
        let min = self.steps.iter().map(|s| s.op_norm).fold(f64::INFINITY, f64::min);
        max / min - 1.0
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "k,grad_norm,op_norm,ratio")?;
        for s in &self.steps {
            writeln!(
                out,
                "{},{},{},{}",
                s.k,
                fmt_float(s.grad_norm),
                fmt_float(s.op_norm),
                fmt_float(s.ratio)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// The vector field `ψ_k` on `g`.
pub fn oscillating_field(g: &GridGeometry, xi: &[f64; 3], v: &[f64; 3], k: f64) -> Field {
    Field::from_fn(*g, 3, |x, out| {
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let t: f64 = (0..3).map(|d| x[d] * xi[d]).sum();
        let s = bump(r) * bump(t.abs()) * (k * t).sin();
        for d in 0..3 {
            out[d] = s * v[d];
        }
    })
}

/// `‖Dψ_k‖_p / ‖Aψ_k‖_p` for each `k` on a periodic `n³` grid. Each `k` must
/// leave at least four nodes per period, i.e. `k · L / 2π ≤ n / 4`.
pub fn counterexample_sequence(
    a: &MatrixRep,
    ks: &[u32],
    p: f64,
    n: usize,
) -> Result<CounterexampleSequence> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(invalid("ks must be a nonempty list of positive integers"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p = {p} must be finite and ≥ 1")));
    }
    let kmax = *ks.iter().max().expect("nonempty");
    let periods = kmax as f64 * COUNTEREXAMPLE_BOX / (2.0 * PI);
    if periods > n as f64 / 4.0 {
        return Err(invalid(format!(
            "k = {kmax} makes {periods:.2} periods across the box, more than grid/4 = {}",
            n as f64 / 4.0
        )));
    }
    let (xi, v) = kernel_direction(a).ok_or_else(|| {
        KmsError::Precondition(format!(
            "operator '{}' is elliptic, so no kernel direction exists",
            a.name()
        ))
    })?;
    let outer: [f64; 9] = std::array::from_fn(|c| v[c / 3] * xi[c % 3]);
    let kernel_residual = a.apply(&outer).iter().map(|x| x * x).sum::<f64>().sqrt();
    let g = GridGeometry::periodic_cube(n, COUNTEREXAMPLE_BOX)?;
    let steps = ks
        .iter()
        .map(|&k| {
            let psi = oscillating_field(&g, &xi, &v, k as f64);
            let grad = gradient(&psi)?;
            let grad_norm = lp_norm(&grad, p, None)?;
            let op_norm = lp_norm(&apply_matrix_rep(a, &grad)?, p, None)?;
            Ok(CounterexampleStep {
                k,
                grad_norm,
                op_norm,
                ratio: grad_norm / op_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CounterexampleSequence {
        operator: a.name().to_owned(),
        xi,
        v,
        p,
        dims: g.dims(),
        kernel_residual,
        steps,
    })
}
