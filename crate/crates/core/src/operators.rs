//! First-order constant-coefficient operators `u ↦ A[∇u]`, their symbols
//! `ξ ↦ 𝔸[ξ]`, and a numerical ellipticity test.
//!
//! Matrices in ℝ^{3×3} are vectorized row-major: entry `M[i][j]` sits at
//! index `3 * i + j`. Rows of [`MatrixRep::entries`] act on that vector.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KmsError, Result};

/// Row-major index of `M[i][j]`.
#[inline]
pub const fn vec_index(i: usize, j: usize) -> usize {
    3 * i + j
}

/// The five operators addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Grad,
    Sym,
    Dev,
    Skew,
    Trace,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::Grad,
        Builtin::Sym,
        Builtin::Dev,
        Builtin::Skew,
        Builtin::Trace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Grad => "grad",
            Builtin::Sym => "sym",
            Builtin::Dev => "dev",
            Builtin::Skew => "skew",
            Builtin::Trace => "trace",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = KmsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(Builtin::Grad),
            "sym" => Ok(Builtin::Sym),
            "dev" => Ok(Builtin::Dev),
            "skew" => Ok(Builtin::Skew),
            "trace" => Ok(Builtin::Trace),
            other => Err(invalid(format!(
                "unknown operator '{other}' (expected grad, sym, dev, skew or trace)"
            ))),
        }
    }
}

/// Matrix representative `A ∈ ℒ(ℝ^{3×3}; ℝ^N)` of a first-order operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRep {
    name: Option<String>,
    entries: Vec<[f64; 9]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    name: String,
    n_out: usize,
    entries: Vec<Vec<f64>>,
}

impl MatrixRep {
    pub fn new(name: Option<String>, entries: Vec<[f64; 9]>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("matrix representative needs at least one row"));
        }
        if entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("matrix representative has non-finite entries"));
        }
        Ok(Self { name, entries })
    }

    /// Build a representative from a pointwise linear map on 3×3 matrices.
    pub fn from_linear_map(
        name: &str,
        n_out: usize,
        map: impl Fn(&[f64; 9]) -> Vec<f64>,
    ) -> Result<Self> {
        let mut entries = vec![[0.0; 9]; n_out];
        for col in 0..9 {
            let mut basis = [0.0; 9];
            basis[col] = 1.0;
            let image = map(&basis);
            if image.len() != n_out {
                return Err(invalid("linear map returned the wrong output length"));
            }
            for (row, value) in entries.iter_mut().zip(image) {
                row[col] = value;
            }
        }
        Self::new(Some(name.to_owned()), entries)
    }

    pub fn builtin(which: Builtin) -> Self {
        let entries = match which {
            Builtin::Grad => identity9(),
            Builtin::Sym => map_rows(|m| sym(m).to_vec()),
            Builtin::Skew => map_rows(|m| skew(m).to_vec()),
            Builtin::Dev => map_rows(|m| dev(m).to_vec()),
            Builtin::Trace => {
                let mut row = [0.0; 9];
                row[0] = 1.0;
                row[4] = 1.0;
                row[8] = 1.0;
                vec![row]
            }
        };
        Self {
            name: Some(which.name().to_owned()),
            entries,
        }
    }

    /// Look up a builtin by name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::builtin(name.parse()?))
    }

    /// Resolve `spec` as a builtin name, falling back to an operator JSON file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec.parse::<Builtin>() {
            Ok(b) => Ok(Self::builtin(b)),
            Err(_) if Path::new(spec).exists() => Self::from_json_file(spec),
            Err(e) => Err(e),
        }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("custom")
    }

    pub fn n_out(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[[f64; 9]] {
        &self.entries
    }

    /// `A[M]` for a row-major vectorized matrix.
    pub fn apply(&self, m: &[f64; 9]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| row.iter().zip(m).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Coefficient matrix `𝔸_j ∈ ℝ^{N×3}`: `(𝔸_j)_{k,i} = A_{k, 3i+j}`.
    pub fn coefficient(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_out(), 3, |k, i| self.entries[k][vec_index(i, j)])
    }

    /// The symbol `𝔸[ξ] = Σ_j ξ_j 𝔸_j`, i.e. the matrix of `v ↦ A[v ⊗ ξ]`.
    pub fn symbol(&self, xi: &[f64; 3]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_out(), 3, |k, i| {
            let row = &self.entries[k];
            (0..3).map(|j| row[vec_index(i, j)] * xi[j]).sum()
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: OperatorFile = serde_json::from_str(text)?;
        if file.n_out != file.entries.len() {
            return Err(invalid(format!(
                "operator file declares n_out = {} but has {} rows",
                file.n_out,
                file.entries.len()
            )));
        }
        let entries = file
            .entries
            .iter()
            .enumerate()
            .map(|(k, row)| {
                <[f64; 9]>::try_from(row.as_slice()).map_err(|_| {
                    invalid(format!("operator row {k} has {} entries, expected 9", row.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(Some(file.name), entries)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = OperatorFile {
            name: self.name().to_owned(),
            n_out: self.n_out(),
            entries: self.entries.iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("operator serialization cannot fail")
    }
}

fn identity9() -> Vec<[f64; 9]> {
    (0..9)
        .map(|k| {
            let mut row = [0.0; 9];
            row[k] = 1.0;
            row
        })
        .collect()
}

fn map_rows(map: impl Fn(&[f64; 9]) -> Vec<f64>) -> Vec<[f64; 9]> {
    let mut entries = vec![[0.0; 9]; 9];
    for col in 0..9 {
        let mut basis = [0.0; 9];
        basis[col] = 1.0;
        for (row, value) in entries.iter_mut().zip(map(&basis)) {
            row[col] = value;
        }
    }
    entries
}

pub fn transpose(m: &[f64; 9]) -> [f64; 9] {
    let mut t = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            t[vec_index(j, i)] = m[vec_index(i, j)];
        }
    }
    t
}

/// `½(M + Mᵀ)`
pub fn sym(m: &[f64; 9]) -> [f64; 9] {
    let t = transpose(m);
    std::array::from_fn(|k| 0.5 * (m[k] + t[k]))
}

/// `½(M − Mᵀ)`
pub fn skew(m: &[f64; 9]) -> [f64; 9] {
    let t = transpose(m);
    std::array::from_fn(|k| 0.5 * (m[k] - t[k]))
}

pub fn trace(m: &[f64; 9]) -> f64 {
    m[0] + m[4] + m[8]
}

/// `sym(M) − (tr M / 3) I`
pub fn dev(m: &[f64; 9]) -> [f64; 9] {
    let mut d = sym(m);
    let third = trace(m) / 3.0;
    d[0] -= third;
    d[4] -= third;
    d[8] -= third;
    d
}

/// Result of the sphere sweep for `min_ξ σ_min(𝔸[ξ])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub operator: String,
    pub min_singular: f64,
    pub argmin_xi: [f64; 3],
    pub near_kernel_v: [f64; 3],
    pub is_elliptic: bool,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityOptions {
    pub sphere_samples: usize,
    pub refine_tol: f64,
    pub elliptic_tol: f64,
}

impl Default for EllipticityOptions {
    fn default() -> Self {
        Self {
            sphere_samples: 2000,
            refine_tol: 1e-8,
            elliptic_tol: 1e-6,
        }
    }
}

/// Smallest singular value of `𝔸[ξ]` counted as a map on ℝ³ (so `N < 3`
/// always yields 0) together with the corresponding right singular vector.
pub fn min_singular_pair(a: &MatrixRep, xi: &[f64; 3]) -> (f64, [f64; 3]) {
    let s = a.symbol(xi);
    let rows = s.nrows().max(3);
    let padded = DMatrix::from_fn(rows, 3, |r, c| if r < s.nrows() { s[(r, c)] } else { 0.0 });
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("three singular values");
    let mut v = [v_t[(idx, 0)], v_t[(idx, 1)], v_t[(idx, 2)]];
    normalize(&mut v);
    (sigma.max(0.0), v)
}

/// Points of the Fibonacci lattice on 𝕊².
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

fn normalize(v: &mut [f64; 3]) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn tangent_frame(xi: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if xi[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut t1 = cross(xi, &pick);
    normalize(&mut t1);
    let t2 = cross(xi, &t1);
    (t1, t2)
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

const REFINE_STARTS: usize = 3;
const MAX_REFINE_ITERS: usize = 20_000;

/// Coordinate descent on the sphere along a rotating tangent frame.
fn refine(a: &MatrixRep, start: [f64; 3], step0: f64, tol: f64) -> (f64, [f64; 3]) {
    let mut xi = start;
    let mut best = min_singular_pair(a, &xi).0;
    let mut step = step0;
    let mut iters = 0;
    while step >= tol && iters < MAX_REFINE_ITERS {
        iters += 1;
        let (t1, t2) = tangent_frame(&xi);
        let mut moved = None;
        for (dir, sign) in [(t1, 1.0), (t1, -1.0), (t2, 1.0), (t2, -1.0)] {
            let mut cand = std::array::from_fn(|k| xi[k] + sign * step * dir[k]);
            normalize(&mut cand);
            let value = min_singular_pair(a, &cand).0;
            if value < best {
                best = value;
                moved = Some(cand);
            }
        }
        match moved {
            Some(next) => xi = next,
            None => step *= 0.5,
        }
    }
    (best, xi)
}

/// Approximate `min_{ξ∈𝕊²} σ_min(𝔸[ξ])` by a Fibonacci sweep plus local refinement.
pub fn ellipticity(a: &MatrixRep, opts: &EllipticityOptions) -> Result<EllipticityReport> {
    if opts.sphere_samples < 12 {
        return Err(invalid("sphere_samples must be at least 12"));
    }
    if !(opts.refine_tol > 0.0 && opts.elliptic_tol > 0.0) {
        return Err(invalid("tolerances must be positive"));
    }
    let lattice = fibonacci_sphere(opts.sphere_samples);
    let mut scored: Vec<(f64, usize)> = lattice
        .iter()
        .enumerate()
        .map(|(i, xi)| (min_singular_pair(a, xi).0, i))
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let step0 = (4.0 * std::f64::consts::PI / opts.sphere_samples as f64).sqrt();
    let mut best = (f64::INFINITY, lattice[scored[0].1]);
    for &(_, idx) in scored.iter().take(REFINE_STARTS) {
        let (value, xi) = refine(a, lattice[idx], step0, opts.refine_tol);
        if value < best.0 {
            best = (value, xi);
        }
    }
    let (_, xi) = best;
    let (min_singular, v) = min_singular_pair(a, &xi);
    Ok(EllipticityReport {
        operator: a.name().to_owned(),
        min_singular,
        argmin_xi: xi,
        near_kernel_v: v,
        is_elliptic: min_singular > opts.elliptic_tol,
        tolerance: opts.elliptic_tol,
    })
}

/// A pair `(ξ, v)` of unit vectors with `𝔸[ξ]v ≈ 0`, if the operator fails
/// to be elliptic.
pub fn kernel_direction(a: &MatrixRep) -> Option<([f64; 3], [f64; 3])> {
    kernel_direction_with(a, &EllipticityOptions::default())
}

pub fn kernel_direction_with(
    a: &MatrixRep,
    opts: &EllipticityOptions,
) -> Option<([f64; 3], [f64; 3])> {
    let report = ellipticity(a, opts).ok()?;
    (report.min_singular <= opts.elliptic_tol).then_some((report.argmin_xi, report.near_kernel_v))
}
