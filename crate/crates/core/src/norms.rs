//! Discrete norms and seminorms of sampled fields.
//!
//! The pointwise modulus is the Frobenius norm across components. Integrals
//! are midpoint sums with weight `h³` per node. Sums go through
//! [`ordered_sum`] so results never depend on thread scheduling.

use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fields::{Field, GridGeometry};

const LEAF: usize = 256;
const PAR_CUTOFF: usize = 1 << 15;

/// Pairwise-tree sum with split points fixed by the length alone.
pub fn ordered_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    if values.len() >= PAR_CUTOFF {
        let (x, y) = rayon::join(|| ordered_sum(a), || ordered_sum(b));
        x + y
    } else {
        ordered_sum(a) + ordered_sum(b)
    }
}

/// Axis-aligned sub-box of nodes, `start[d] ≤ i_d < end[d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mask {
    pub start: [usize; 3],
    pub end: [usize; 3],
}

impl Mask {
    pub fn full(g: &GridGeometry) -> Self {
        Self {
            start: [0; 3],
            end: g.dims(),
        }
    }

    /// Nodes whose coordinates lie in the closed box `[lo, hi]`.
    pub fn physical(g: &GridGeometry, lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        let mut start = [0; 3];
        let mut end = [0; 3];
        for d in 0..3 {
            let inside: Vec<usize> = (0..g.dims()[d])
                .filter(|&k| {
                    let x = g.coord(d, k);
                    x >= lo[d] && x <= hi[d]
                })
                .collect();
            match (inside.first(), inside.last()) {
                (Some(&a), Some(&b)) => {
                    start[d] = a;
                    end[d] = b + 1;
                }
                _ => return Err(invalid(format!("mask box is empty along axis {d}"))),
            }
        }
        Ok(Self { start, end })
    }

    pub fn extent(&self) -> [usize; 3] {
        std::array::from_fn(|d| self.end[d] - self.start[d])
    }

    pub fn count(&self) -> usize {
        self.extent().iter().product()
    }

    fn validate(&self, g: &GridGeometry) -> Result<()> {
        let dims = g.dims();
        if (0..3).any(|d| self.start[d] >= self.end[d] || self.end[d] > dims[d]) {
            return Err(invalid(format!(
                "mask {:?}..{:?} does not fit grid {:?}",
                self.start, self.end, dims
            )));
        }
        Ok(())
    }

    /// Flat node indices in x-major order.
    pub fn nodes(&self, g: &GridGeometry) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count());
        for ix in self.start[0]..self.end[0] {
            for iy in self.start[1]..self.end[1] {
                for iz in self.start[2]..self.end[2] {
                    out.push(g.index(ix, iy, iz));
                }
            }
        }
        out
    }
}

fn masked_nodes(f: &Field, mask: Option<&Mask>) -> Result<Vec<usize>> {
    let g = f.geometry();
    let m = mask.copied().unwrap_or_else(|| Mask::full(g));
    m.validate(g)?;
    Ok(m.nodes(g))
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent p = {p} must be finite and ≥ 1")));
    }
    Ok(())
}

/// `(Σ |f|^p h³)^{1/p}` over the masked nodes.
pub fn lp_norm(f: &Field, p: f64, mask: Option<&Mask>) -> Result<f64> {
    check_p(p)?;
    let nodes = masked_nodes(f, mask)?;
    let abs: Vec<f64> = nodes.iter().map(|&i| f.abs_at(i)).collect();
    let top = abs.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    let powers: Vec<f64> = abs.iter().map(|a| (a / top).powf(p)).collect();
    let h3 = f.geometry().cell_volume();
    Ok(top * (ordered_sum(&powers) * h3).powf(1.0 / p))
}

/// `3p/(3 − p)` for `1 ≤ p < 3`.
pub fn sobolev_conjugate(p: f64) -> Result<f64> {
    if !(1.0..3.0).contains(&p) {
        return Err(invalid(format!("Sobolev conjugate needs 1 ≤ p < 3, got {p}")));
    }
    Ok(3.0 * p / (3.0 - p))
}

/// `3p/(3 − (1 − θ)p)`.
pub fn frac_conjugate(p: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("θ = {theta} must lie in (0, 1)")));
    }
    check_p(p)?;
    let den = 3.0 - (1.0 - theta) * p;
    if den <= 0.0 {
        return Err(invalid(format!(
            "3 − (1 − θ)p = {den} must be positive (p = {p}, θ = {theta})"
        )));
    }
    Ok(3.0 * p / den)
}

/// Lorentz quasinorm `p^{1/q} (∫ t^q λ(t)^{q/p} dt/t)^{1/q}`, with
/// `sup_t t λ(t)^{1/p}` for `q = ∞`. The distribution function of the
/// sampled field is a step function, so the integral is an exact sum.
pub fn lorentz_norm(f: &Field, p: f64, q: f64, mask: Option<&Mask>) -> Result<f64> {
    check_p(p)?;
    if !(q >= 1.0) {
        return Err(invalid(format!("Lorentz q = {q} must be ≥ 1")));
    }
    let nodes = masked_nodes(f, mask)?;
    let mut a: Vec<f64> = nodes.iter().map(|&i| f.abs_at(i)).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    let top = a.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    let w = f.geometry().cell_volume();
    if q.is_infinite() {
        return Ok(a
            .iter()
            .enumerate()
            .map(|(j, &aj)| aj * ((j + 1) as f64 * w).powf(1.0 / p))
            .fold(0.0, f64::max));
    }
    // λ(t) = j·w on (a_{j+1}, a_j]; normalize by the top value against overflow.
    let terms: Vec<f64> = (0..a.len())
        .map(|j| {
            let hi = (a[j] / top).powf(q);
            let lo = a.get(j + 1).map_or(0.0, |&b| (b / top).powf(q));
            ((j + 1) as f64 * w).powf(q / p) * (hi - lo)
        })
        .collect();
    Ok(top * (p * ordered_sum(&terms) / q).powf(1.0 / q))
}

/// Dyadic BMO: the largest mean deviation `⨍_Q |f − f_Q|` over grid-aligned
/// cubes of `2^m` nodes per side inside the mask, together with the mask
/// itself when it is a cube.
pub fn bmo_norm(f: &Field, mask: Option<&Mask>) -> Result<f64> {
    let g = f.geometry();
    let m = mask.copied().unwrap_or_else(|| Mask::full(g));
    m.validate(g)?;
    let ext = m.extent();
    let min_side = *ext.iter().min().expect("three axes");
    let mut cubes: Vec<([usize; 3], usize)> = Vec::new();
    let mut side = 2;
    while side <= min_side {
        for bx in 0..ext[0] / side {
            for by in 0..ext[1] / side {
                for bz in 0..ext[2] / side {
                    let s = [
                        m.start[0] + bx * side,
                        m.start[1] + by * side,
                        m.start[2] + bz * side,
                    ];
                    cubes.push((s, side));
                }
            }
        }
        side *= 2;
    }
    if ext[0] == ext[1] && ext[1] == ext[2] && !ext[0].is_power_of_two() {
        cubes.push((m.start, ext[0]));
    }
    let best = cubes
        .par_iter()
        .map(|&(s, side)| {
            let sub = Mask {
                start: s,
                end: [s[0] + side, s[1] + side, s[2] + side],
            };
            mean_oscillation(f, &sub.nodes(g))
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

fn mean_oscillation(f: &Field, nodes: &[usize]) -> f64 {
    let n = nodes.len() as f64;
    let mean: Vec<f64> = (0..f.ncomp())
        .map(|c| {
            let vals: Vec<f64> = nodes.iter().map(|&i| f.comp(c)[i]).collect();
            ordered_sum(&vals) / n
        })
        .collect();
    let dev: Vec<f64> = nodes
        .iter()
        .map(|&i| {
            (0..f.ncomp())
                .map(|c| (f.comp(c)[i] - mean[c]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ordered_sum(&dev) / n
}

/// Result of [`holder_seminorm`]. When `exact` is false the value came from
/// a subset of anchor nodes and is a lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub value: f64,
    pub exact: bool,
}

/// `max |f(x) − f(y)| / |x − y|^α` over node pairs. Exact when the masked
/// node count is at most `pair_budget`; otherwise `pair_budget` anchors are
/// drawn with `seed` and paired with every node.
pub fn holder_seminorm(
    f: &Field,
    alpha: f64,
    mask: Option<&Mask>,
    pair_budget: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("Hölder exponent α = {alpha} must lie in (0, 1)")));
    }
    let nodes = masked_nodes(f, mask)?;
    let n = nodes.len();
    let exact = n <= pair_budget;
    let anchors: Vec<usize> = if exact {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, pair_budget.max(1)).into_vec();
        picked.sort_unstable();
        picked
    };
    let g = f.geometry();
    let points: Vec<[f64; 3]> = nodes.iter().map(|&i| g.point(i)).collect();
    let values: Vec<Vec<f64>> = nodes.iter().map(|&i| f.at(i)).collect();
    let value = anchors
        .par_iter()
        .map(|&a| {
            let mut best = 0.0f64;
            for b in 0..n {
                if b == a {
                    continue;
                }
                let dist2: f64 = (0..3).map(|d| (points[a][d] - points[b][d]).powi(2)).sum();
                let diff2: f64 = values[a]
                    .iter()
                    .zip(&values[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                best = best.max(diff2.sqrt() / dist2.powf(alpha / 2.0));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(HolderEstimate { value, exact })
}

/// Largest node count accepted by [`gagliardo_seminorm`].
pub const GAGLIARDO_MAX_NODES: usize = 16 * 16 * 16;

/// `(ΣΣ_{x≠y} |f(x) − f(y)|^p / |x − y|^{3+θp} h⁶)^{1/p}`.
pub fn gagliardo_seminorm(f: &Field, theta: f64, p: f64, mask: Option<&Mask>) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("θ = {theta} must lie in (0, 1)")));
    }
    check_p(p)?;
    let nodes = masked_nodes(f, mask)?;
    let n = nodes.len();
    if n > GAGLIARDO_MAX_NODES {
        return Err(invalid(format!(
            "Gagliardo double sum limited to {GAGLIARDO_MAX_NODES} nodes, got {n}; subsample or mask the field first"
        )));
    }
    let g = f.geometry();
    let points: Vec<[f64; 3]> = nodes.iter().map(|&i| g.point(i)).collect();
    let values: Vec<Vec<f64>> = nodes.iter().map(|&i| f.at(i)).collect();
    let expo = (3.0 + theta * p) / 2.0;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut row = vec![0.0; n];
            for (b, slot) in row.iter_mut().enumerate() {
                if b == a {
                    continue;
                }
                let dist2: f64 = (0..3).map(|d| (points[a][d] - points[b][d]).powi(2)).sum();
                let diff2: f64 = values[a]
                    .iter()
                    .zip(&values[b])
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                *slot = diff2.powf(p / 2.0) / dist2.powf(expo);
            }
            ordered_sum(&row)
        })
        .collect();
    let h3 = g.cell_volume();
    Ok((ordered_sum(&rows) * h3 * h3).powf(1.0 / p))
}

/// The norm families, each carrying exactly its own parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Lp { p: f64 },
    /// `q = f64::INFINITY` is the weak space.
    Lorentz { p: f64, q: f64 },
    Weak { p: f64 },
    Bmo,
    Holder { alpha: f64, pair_budget: usize, seed: u64 },
    Gagliardo { theta: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub kind: NormKind,
    pub mask: Option<Mask>,
}

impl NormSpec {
    pub fn new(kind: NormKind) -> Result<Self> {
        let spec = Self { kind, mask: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NormKind::Lp { p } | NormKind::Weak { p } => check_p(p),
            NormKind::Lorentz { p, q } => {
                check_p(p)?;
                if q >= 1.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("Lorentz q = {q} must be ≥ 1")))
                }
            }
            NormKind::Bmo => Ok(()),
            NormKind::Holder { alpha, .. } => {
                if alpha > 0.0 && alpha < 1.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("Hölder exponent α = {alpha} must lie in (0, 1)")))
                }
            }
            NormKind::Gagliardo { theta, p } => {
                check_p(p)?;
                if theta > 0.0 && theta < 1.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("θ = {theta} must lie in (0, 1)")))
                }
            }
        }
    }

    pub fn evaluate(&self, f: &Field) -> Result<f64> {
        let mask = self.mask.as_ref();
        match self.kind {
            NormKind::Lp { p } => lp_norm(f, p, mask),
            NormKind::Lorentz { p, q } => lorentz_norm(f, p, q, mask),
            NormKind::Weak { p } => lorentz_norm(f, p, f64::INFINITY, mask),
            NormKind::Bmo => bmo_norm(f, mask),
            NormKind::Holder {
                alpha,
                pair_budget,
                seed,
            } => holder_seminorm(f, alpha, mask, pair_budget, seed).map(|h| h.value),
            NormKind::Gagliardo { theta, p } => gagliardo_seminorm(f, theta, p, mask),
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NormKind::Lp { p } => write!(f, "L^{p}"),
            NormKind::Lorentz { p, q } if q.is_infinite() => write!(f, "L^{{{p},inf}}"),
            NormKind::Lorentz { p, q } => write!(f, "L^{{{p},{q}}}"),
            NormKind::Weak { p } => write!(f, "L^{{{p},inf}}"),
            NormKind::Bmo => write!(f, "BMO"),
            NormKind::Holder { alpha, .. } => write!(f, "C^{{0,{alpha}}}"),
            NormKind::Gagliardo { theta, p } => write!(f, "W^{{{theta},{p}}}"),
        }
    }
}
