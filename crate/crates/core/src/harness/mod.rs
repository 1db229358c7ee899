//! Inequality experiments. Each experiment draws a seeded corpus of smooth
//! matrix fields, evaluates the left-hand side and the two right-hand side
//! terms of an inequality for every field, and reports the ratios.
//!
//! Corpus items are independent and evaluated in parallel; rows are always
//! assembled in corpus order, so reports do not depend on the schedule.

mod counter;
mod first;
mod report;
mod second;

pub use counter::{counterexample_sequence, CounterexampleSequence, CounterexampleStep};
pub use first::{
    first_kind_corpus, kms_ratio_first, ratio_row, verify_first, verify_first_batch,
    verify_subcritical, verify_variant, RatioNorms, VariantKind, VariantParams,
    FRACTIONAL_MAX_GRID, ILL_CONDITIONED_THETA, RESCALE_RADII,
};
pub use report::{
    fmt_float, GridReport, GridSummary, InequalityKind, Params, RatioReport, RatioRow,
    RescaleRow, RowFlag, Summary, CSV_HEADER, DEGENERATE_RHS,
};
pub use second::{
    build_conformal_basis, build_rigid_basis, project_out, second_kind_corpus, verify_second,
    BasisSpace, ProjectionBasis, SecondMode, SECOND_KIND_PERIOD,
};

use rayon::prelude::*;

use crate::error::{invalid, KmsError, Result};
use crate::operators::{ellipticity, EllipticityOptions, MatrixRep};

/// Parameters of a seeded corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub size: usize,
    pub seed: u64,
    /// Degree of the trigonometric polynomials. Held fixed across grids so
    /// every grid samples the same continuous fields.
    pub kmax: usize,
    /// Radius of the bump window for compactly supported corpora.
    pub support_radius: f64,
    /// Side of the periodic box for compactly supported corpora.
    pub box_width: f64,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            size: 100,
            seed: 0,
            kmax: 2,
            support_radius: 0.5,
            box_width: 3.0,
            jobs: None,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(invalid("corpus size must be positive"));
        }
        if self.kmax == 0 {
            return Err(invalid("kmax must be positive"));
        }
        if !(self.box_width > 0.0 && self.box_width.is_finite()) {
            return Err(invalid("box width must be positive"));
        }
        if !(self.support_radius > 0.0 && self.support_radius < self.box_width / 2.0) {
            return Err(invalid(format!(
                "support radius {} must lie in (0, box_width/2 = {})",
                self.support_radius,
                self.box_width / 2.0
            )));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs must be at least 1"));
        }
        Ok(())
    }
}

/// `f(0), …, f(n−1)` evaluated in parallel and returned in index order.
pub(crate) fn par_map<T, F>(jobs: Option<usize>, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match jobs {
        None => run(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| KmsError::Internal(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// Refuse non-elliptic operators, pointing to the counterexample.
pub(crate) fn require_elliptic(a: &MatrixRep) -> Result<()> {
    let rep = ellipticity(a, &EllipticityOptions::default())?;
    if rep.is_elliptic {
        Ok(())
    } else {
        Err(KmsError::Precondition(format!(
            "operator '{}' is not elliptic (min singular value {:.3e} at xi = {:?}); \
             no inequality of this kind holds, see counterexample_sequence",
            a.name(),
            rep.min_singular,
            rep.argmin_xi
        )))
    }
}

pub(crate) fn check_grids(grids: &[usize]) -> Result<()> {
    if grids.is_empty() {
        return Err(invalid("at least one grid is required"));
    }
    if grids.iter().any(|&n| n < 4) {
        return Err(invalid("grids need at least 4 nodes per axis"));
    }
    Ok(())
}
