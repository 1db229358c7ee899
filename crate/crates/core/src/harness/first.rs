//! Inequalities of the first kind: compactly supported fields in a padded
//! periodic box, with the norm triple varying by experiment.

use crate::error::{invalid, Result};
use crate::fields::{
    apply_matrix_rep, curl_rows, random_band_limited_spec, sample_components, Field, GridGeometry,
    WindowedTrig,
};
use crate::norms::{frac_conjugate, sobolev_conjugate, Mask, NormKind, NormSpec};
use crate::operators::MatrixRep;

use super::report::{GridReport, InequalityKind, Params, RatioReport, RatioRow, RescaleRow};
use super::{check_grids, par_map, require_elliptic, CorpusConfig};

/// Support radii used for the rescaling rows of the subcritical experiment.
pub const RESCALE_RADII: [f64; 2] = [0.5, 0.25];
/// Largest grid side accepted by the fractional variant.
pub const FRACTIONAL_MAX_GRID: usize = 16;
/// Fractional runs with `θ` above this are reported as ill-conditioned.
pub const ILL_CONDITIONED_THETA: f64 = 0.9;

/// The norms applied to `F`, `A[F]` and `curl F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioNorms {
    pub lhs: NormSpec,
    pub elliptic: NormSpec,
    pub curl: NormSpec,
}

impl RatioNorms {
    fn lp(lhs: f64, elliptic: f64, curl: f64) -> Result<Self> {
        Ok(Self {
            lhs: NormSpec::new(NormKind::Lp { p: lhs })?,
            elliptic: NormSpec::new(NormKind::Lp { p: elliptic })?,
            curl: NormSpec::new(NormKind::Lp { p: curl })?,
        })
    }

    fn with_mask(self, mask: Mask) -> Self {
        Self {
            lhs: self.lhs.with_mask(mask),
            elliptic: self.elliptic.with_mask(mask),
            curl: self.curl.with_mask(mask),
        }
    }
}

/// One row: the three norms of `F`, `A[F]` and the row-wise curl of `F`.
pub fn ratio_row(a: &MatrixRep, f: &Field, norms: &RatioNorms) -> Result<RatioRow> {
    let af = apply_matrix_rep(a, f)?;
    let cf = curl_rows(f)?;
    Ok(RatioRow::new(
        0,
        norms.lhs.evaluate(f)?,
        norms.elliptic.evaluate(&af)?,
        norms.curl.evaluate(&cf)?,
    ))
}

fn check_first_p(p: f64) -> Result<f64> {
    if !(1.0..3.0).contains(&p) {
        return Err(invalid(format!("p = {p} must lie in [1, 3)")));
    }
    sobolev_conjugate(p)
}

/// `‖F‖_{p*}` against `‖A[F]‖_{p*} + ‖curl F‖_p` for a field that is
/// compactly supported well inside a periodic box.
pub fn kms_ratio_first(a: &MatrixRep, f: &Field, p: f64) -> Result<RatioRow> {
    let ps = check_first_p(p)?;
    if !f.geometry().is_periodic() {
        return Err(invalid("first-kind ratios need a periodic grid"));
    }
    ratio_row(a, f, &RatioNorms::lp(ps, ps, p)?)
}

fn periodic_grid(cfg: &CorpusConfig, n: usize) -> Result<GridGeometry> {
    GridGeometry::periodic_cube(n, cfg.box_width)
}

/// Continuous descriptions of the corpus; item `i` uses seed `seed + i` and
/// does not depend on the node count of `g`.
pub fn first_kind_corpus(cfg: &CorpusConfig, g: &GridGeometry) -> Result<Vec<Vec<WindowedTrig>>> {
    cfg.validate()?;
    (0..cfg.size)
        .map(|i| {
            random_band_limited_spec(cfg.seed.wrapping_add(i as u64), g, cfg.kmax, cfg.support_radius)
        })
        .collect()
}

fn run_grid(
    a: &MatrixRep,
    specs: &[Vec<WindowedTrig>],
    g: &GridGeometry,
    norms: &RatioNorms,
    jobs: Option<usize>,
) -> Result<GridReport> {
    let rows = par_map(jobs, specs.len(), |i| {
        let f = sample_components(&specs[i], g);
        let mut row = ratio_row(a, &f, norms)?;
        row.index = i;
        Ok(row)
    })?;
    Ok(GridReport::new(g.dims(), rows))
}

/// First-kind experiment at each grid side in `grids`.
pub fn verify_first(a: &MatrixRep, p: f64, cfg: &CorpusConfig, grids: &[usize]) -> Result<RatioReport> {
    let mut out = verify_first_batch(std::slice::from_ref(a), &[p], cfg, grids)?;
    Ok(out.pop().expect("one report"))
}

/// Several operators and exponents over one corpus. Each field and its curl
/// are computed once per grid. Reports come operator-major.
pub fn verify_first_batch(
    ops: &[MatrixRep],
    ps: &[f64],
    cfg: &CorpusConfig,
    grids: &[usize],
) -> Result<Vec<RatioReport>> {
    cfg.validate()?;
    check_grids(grids)?;
    if ops.is_empty() || ps.is_empty() {
        return Err(invalid("at least one operator and one exponent are required"));
    }
    for a in ops {
        require_elliptic(a)?;
    }
    let stars = ps.iter().map(|&p| check_first_p(p)).collect::<Result<Vec<_>>>()?;
    let combos: Vec<(usize, usize)> = (0..ops.len())
        .flat_map(|o| (0..ps.len()).map(move |q| (o, q)))
        .collect();
    let mut grid_reports: Vec<Vec<GridReport>> = vec![Vec::new(); combos.len()];
    for &n in grids {
        let g = periodic_grid(cfg, n)?;
        let specs = first_kind_corpus(cfg, &g)?;
        let per_item = par_map(cfg.jobs, specs.len(), |i| {
            let f = sample_components(&specs[i], &g);
            let cf = curl_rows(&f)?;
            let applied = ops
                .iter()
                .map(|a| apply_matrix_rep(a, &f))
                .collect::<Result<Vec<_>>>()?;
            combos
                .iter()
                .map(|&(o, q)| {
                    let lhs = NormSpec::new(NormKind::Lp { p: stars[q] })?;
                    let curl = NormSpec::new(NormKind::Lp { p: ps[q] })?;
                    let mut row = RatioRow::new(
                        0,
                        lhs.evaluate(&f)?,
                        lhs.evaluate(&applied[o])?,
                        curl.evaluate(&cf)?,
                    );
                    row.index = i;
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (c, reports) in grid_reports.iter_mut().enumerate() {
            let rows = per_item.iter().map(|r| r[c]).collect();
            reports.push(GridReport::new(g.dims(), rows));
        }
    }
    Ok(combos
        .iter()
        .zip(grid_reports)
        .map(|(&(o, q), grids)| {
            let params = Params {
                p: ps[q],
                lhs_exponent: Some(stars[q]),
                ..Default::default()
            };
            let mut rep = RatioReport::new(
                ops[o].name(),
                InequalityKind::FirstKind,
                params,
                cfg.seed,
                cfg.size,
                grids,
            );
            rep.notes.push(format!(
                "fields supported in a ball of radius {} inside a periodic box of side {}",
                cfg.support_radius, cfg.box_width
            ));
            rep
        })
        .collect())
}

fn support_mask(g: &GridGeometry, radius: f64) -> Result<Mask> {
    let c = g.center();
    Mask::physical(g, c.map(|v| v - radius), c.map(|v| v + radius))
}

/// All three norms at exponent `p`, restricted to the box enclosing the
/// support. The last grid is rerun with the corpus dilated to each radius in
/// [`RESCALE_RADII`], since this estimate is not scale invariant.
pub fn verify_subcritical(
    a: &MatrixRep,
    p: f64,
    cfg: &CorpusConfig,
    grids: &[usize],
) -> Result<RatioReport> {
    cfg.validate()?;
    check_grids(grids)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("subcritical p = {p} must lie in (1, ∞)")));
    }
    require_elliptic(a)?;
    let base = RatioNorms::lp(p, p, p)?;
    let mut reports = Vec::new();
    for &n in grids {
        let g = periodic_grid(cfg, n)?;
        let specs = first_kind_corpus(cfg, &g)?;
        let norms = base.with_mask(support_mask(&g, cfg.support_radius)?);
        reports.push(run_grid(a, &specs, &g, &norms, cfg.jobs)?);
    }
    let g = periodic_grid(cfg, *grids.last().expect("nonempty"))?;
    let specs = first_kind_corpus(cfg, &g)?;
    let mut rescaling = Vec::new();
    for radius in RESCALE_RADII {
        if radius >= cfg.box_width / 2.0 {
            continue;
        }
        let lambda = radius / cfg.support_radius;
        let scaled: Vec<Vec<WindowedTrig>> = specs
            .iter()
            .map(|s| s.iter().map(|w| w.dilate(lambda)).collect())
            .collect();
        let norms = base.with_mask(support_mask(&g, radius)?);
        let grid = run_grid(a, &scaled, &g, &norms, cfg.jobs)?;
        rescaling.push(RescaleRow {
            support_radius: radius,
            dims: g.dims(),
            sup_ratio: grid.sup_ratio,
        });
    }
    let params = Params {
        p,
        lhs_exponent: Some(p),
        ..Default::default()
    };
    let mut rep = RatioReport::new(a.name(), InequalityKind::Subcritical, params, cfg.seed, cfg.size, reports);
    rep.rescaling = rescaling;
    rep.notes.push(
        "norms restricted to the box enclosing the support; the estimate is not scale invariant, see the rescaling rows"
            .to_owned(),
    );
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantKind {
    Bmo,
    Morrey,
    Lorentz,
    Fractional,
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bmo => "bmo",
            Self::Morrey => "morrey",
            Self::Lorentz => "lorentz",
            Self::Fractional => "fractional",
        }
    }

    fn inequality(self) -> InequalityKind {
        match self {
            Self::Bmo => InequalityKind::Bmo,
            Self::Morrey => InequalityKind::Morrey,
            Self::Lorentz => InequalityKind::Lorentz,
            Self::Fractional => InequalityKind::Fractional,
        }
    }
}

impl std::str::FromStr for VariantKind {
    type Err = crate::error::KmsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bmo" => Ok(Self::Bmo),
            "morrey" => Ok(Self::Morrey),
            "lorentz" => Ok(Self::Lorentz),
            "fractional" => Ok(Self::Fractional),
            other => Err(invalid(format!(
                "unknown variant '{other}' (expected bmo, morrey, lorentz or fractional)"
            ))),
        }
    }
}

/// Parameters of a variant. `q = None` for the Lorentz variant pairs each
/// Lorentz norm with its own first index, so `L^{p*,p*}` and `L^{p,p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantParams {
    pub p: f64,
    pub q: Option<f64>,
    pub theta: Option<f64>,
    /// Anchor budget of the Hölder seminorm.
    pub pair_budget: usize,
}

impl VariantParams {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            q: None,
            theta: None,
            pair_budget: 4096,
        }
    }
}

fn variant_norms(kind: VariantKind, vp: &VariantParams, seed: u64) -> Result<(RatioNorms, Params)> {
    let p = vp.p;
    let spec = |k| NormSpec::new(k);
    match kind {
        VariantKind::Bmo => {
            if p != 3.0 {
                return Err(invalid(format!("bmo variant fixes p = 3, got {p}")));
            }
            let norms = RatioNorms {
                lhs: spec(NormKind::Bmo)?,
                elliptic: spec(NormKind::Bmo)?,
                curl: spec(NormKind::Lp { p })?,
            };
            Ok((norms, Params { p, ..Default::default() }))
        }
        VariantKind::Morrey => {
            if !(p > 3.0 && p.is_finite()) {
                return Err(invalid(format!("morrey variant needs 3 < p < ∞, got {p}")));
            }
            if vp.pair_budget == 0 {
                return Err(invalid("morrey variant needs a positive pair budget"));
            }
            let alpha = 1.0 - 3.0 / p;
            let holder = NormKind::Holder {
                alpha,
                pair_budget: vp.pair_budget,
                seed,
            };
            let norms = RatioNorms {
                lhs: spec(holder)?,
                elliptic: spec(holder)?,
                curl: spec(NormKind::Lp { p })?,
            };
            Ok((norms, Params { p, alpha: Some(alpha), ..Default::default() }))
        }
        VariantKind::Lorentz => {
            if !(1.0..3.0).contains(&p) {
                return Err(invalid(format!("lorentz variant needs 1 ≤ p < 3, got {p}")));
            }
            if let Some(q) = vp.q {
                if !(q >= 1.0) {
                    return Err(invalid(format!("lorentz variant needs q ≥ 1, got {q}")));
                }
            }
            let ps = sobolev_conjugate(p)?;
            let norms = RatioNorms {
                lhs: spec(NormKind::Lorentz { p: ps, q: vp.q.unwrap_or(ps) })?,
                elliptic: spec(NormKind::Lorentz { p: ps, q: vp.q.unwrap_or(ps) })?,
                curl: spec(NormKind::Lorentz { p, q: vp.q.unwrap_or(p) })?,
            };
            let params = Params {
                p,
                lhs_exponent: Some(ps),
                q: vp.q,
                ..Default::default()
            };
            Ok((norms, params))
        }
        VariantKind::Fractional => {
            let theta = vp
                .theta
                .ok_or_else(|| invalid("fractional variant needs θ in (0, 1)"))?;
            if !(theta > 0.0 && theta < 1.0) {
                return Err(invalid(format!("fractional variant needs θ in (0, 1), got {theta}")));
            }
            if !(1.0..3.0).contains(&p) {
                return Err(invalid(format!("fractional variant needs 1 ≤ p < 3, got {p}")));
            }
            let pt = frac_conjugate(p, theta)?;
            let norms = RatioNorms {
                lhs: spec(NormKind::Gagliardo { theta, p: pt })?,
                elliptic: spec(NormKind::Gagliardo { theta, p: pt })?,
                curl: spec(NormKind::Lp { p })?,
            };
            let params = Params {
                p,
                lhs_exponent: Some(pt),
                theta: Some(theta),
                ..Default::default()
            };
            Ok((norms, params))
        }
    }
}

/// First-kind experiment with the norm triple of a variant.
pub fn verify_variant(
    a: &MatrixRep,
    kind: VariantKind,
    vp: &VariantParams,
    cfg: &CorpusConfig,
    grids: &[usize],
) -> Result<RatioReport> {
    cfg.validate()?;
    check_grids(grids)?;
    let (norms, params) = variant_norms(kind, vp, cfg.seed)?;
    if kind == VariantKind::Fractional {
        if let Some(&n) = grids.iter().find(|&&n| n > FRACTIONAL_MAX_GRID) {
            return Err(invalid(format!(
                "fractional variant needs grids of at most {FRACTIONAL_MAX_GRID}³, got {n}³"
            )));
        }
    }
    require_elliptic(a)?;
    let mut reports = Vec::new();
    let mut exact_holder = true;
    for &n in grids {
        let g = periodic_grid(cfg, n)?;
        let specs = first_kind_corpus(cfg, &g)?;
        let norms = if kind == VariantKind::Morrey {
            // Outside the support both fields vanish, so a pair reaching out
            // of it is dominated by one ending at the support boundary.
            let mask = support_mask(&g, cfg.support_radius + 2.0 * g.spacing(0))?;
            exact_holder &= mask.count() <= vp.pair_budget;
            RatioNorms {
                lhs: norms.lhs.with_mask(mask),
                elliptic: norms.elliptic.with_mask(mask),
                curl: norms.curl,
            }
        } else {
            norms
        };
        reports.push(run_grid(a, &specs, &g, &norms, cfg.jobs)?);
    }
    let mut rep = RatioReport::new(a.name(), kind.inequality(), params, cfg.seed, cfg.size, reports);
    match kind {
        VariantKind::Fractional => {
            let theta = vp.theta.expect("validated");
            rep.ill_conditioned = theta > ILL_CONDITIONED_THETA;
            if rep.ill_conditioned {
                rep.notes.push(format!(
                    "θ = {theta} > {ILL_CONDITIONED_THETA}: the seminorm degenerates as θ → 1"
                ));
            }
        }
        VariantKind::Morrey if !exact_holder => rep.notes.push(format!(
            "Hölder seminorms from {} random anchors per field are lower bounds",
            vp.pair_budget
        )),
        VariantKind::Morrey => rep
            .notes
            .push("Hölder seminorms over the support box widened by two cells".to_owned()),
        VariantKind::Bmo => rep.notes.push("dyadic BMO over the whole box".to_owned()),
        _ => {}
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Builtin;

    fn small() -> CorpusConfig {
        CorpusConfig {
            size: 6,
            seed: 3,
            ..Default::default()
        }
    }

    fn op(b: Builtin) -> MatrixRep {
        MatrixRep::builtin(b)
    }

    #[test]
    fn zero_field_is_flagged() {
        let g = GridGeometry::periodic_cube(8, 3.0).unwrap();
        let row = kms_ratio_first(&op(Builtin::Sym), &Field::zeros(g, 9), 2.0).unwrap();
        assert_eq!(row.flag, super::super::RowFlag::ZeroField);
        assert_eq!(row.ratio, None);
    }

    #[test]
    fn grad_ratio_never_exceeds_one() {
        let rep = verify_first(&op(Builtin::Grad), 2.0, &small(), &[16]).unwrap();
        for r in &rep.grids[0].rows {
            assert!(r.ratio.unwrap() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn p_one_uses_three_halves() {
        let g = GridGeometry::periodic_cube(16, 3.0).unwrap();
        let spec = first_kind_corpus(&small(), &g).unwrap();
        let f = sample_components(&spec[0], &g);
        let row = kms_ratio_first(&op(Builtin::Sym), &f, 1.0).unwrap();
        let lhs = crate::norms::lp_norm(&f, 1.5, None).unwrap();
        assert_eq!(row.lhs, lhs);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridGeometry::periodic_cube(8, 3.0).unwrap();
        let f = Field::zeros(g, 9);
        assert!(kms_ratio_first(&op(Builtin::Sym), &f, 3.0).is_err());
        assert!(kms_ratio_first(&op(Builtin::Sym), &f, 0.5).is_err());
        let err = verify_first(&op(Builtin::Skew), 2.0, &small(), &[8]).unwrap_err();
        assert!(err.to_string().contains("counterexample_sequence"));
        assert!(verify_subcritical(&op(Builtin::Sym), 1.0, &small(), &[8]).is_err());
        let vp = VariantParams::new(2.0);
        let err = verify_variant(&op(Builtin::Sym), VariantKind::Bmo, &vp, &small(), &[8]).unwrap_err();
        assert!(err.to_string().contains("p = 3"));
        let err = verify_variant(&op(Builtin::Sym), VariantKind::Morrey, &vp, &small(), &[8]).unwrap_err();
        assert!(err.to_string().contains("3 < p"));
        let frac = VariantParams {
            theta: Some(0.5),
            ..vp
        };
        let err = verify_variant(&op(Builtin::Sym), VariantKind::Fractional, &frac, &small(), &[32]).unwrap_err();
        assert!(err.to_string().contains("at most 16"));
    }

    #[test]
    fn batch_matches_single_runs() {
        let ops = [op(Builtin::Sym), op(Builtin::Dev)];
        let batch = verify_first_batch(&ops, &[1.0, 2.0], &small(), &[8, 12]).unwrap();
        let single = verify_first(&ops[1], 1.0, &small(), &[8, 12]).unwrap();
        assert_eq!(batch[2], single);
        assert_eq!(batch[2].operator_name, "dev");
    }

    #[test]
    fn jobs_do_not_change_rows() {
        let a = op(Builtin::Sym);
        let one = verify_first(&a, 2.0, &CorpusConfig { jobs: Some(1), ..small() }, &[12]).unwrap();
        let three = verify_first(&a, 2.0, &CorpusConfig { jobs: Some(3), ..small() }, &[12]).unwrap();
        assert_eq!(one.to_csv_string(), three.to_csv_string());
    }

    #[test]
    fn lorentz_diagonal_reproduces_first_kind() {
        let a = op(Builtin::Sym);
        let first = verify_first(&a, 2.0, &small(), &[12]).unwrap();
        let lor = verify_variant(&a, VariantKind::Lorentz, &VariantParams::new(2.0), &small(), &[12]).unwrap();
        for (x, y) in first.grids[0].rows.iter().zip(&lor.grids[0].rows) {
            assert!((x.ratio.unwrap() - y.ratio.unwrap()).abs() <= 1e-9 * x.ratio.unwrap());
        }
    }

    #[test]
    fn morrey_exponent() {
        let (_, params) = variant_norms(VariantKind::Morrey, &VariantParams::new(6.0), 0).unwrap();
        assert_eq!(params.alpha, Some(0.5));
    }

    #[test]
    fn fractional_flags_large_theta() {
        let cfg = CorpusConfig { size: 2, ..small() };
        let a = op(Builtin::Sym);
        for (theta, ill) in [(0.3, false), (0.95, true)] {
            let vp = VariantParams {
                theta: Some(theta),
                ..VariantParams::new(2.0)
            };
            let rep = verify_variant(&a, VariantKind::Fractional, &vp, &cfg, &[8]).unwrap();
            assert_eq!(rep.ill_conditioned, ill);
            assert!(rep.sup_ratio().unwrap().is_finite());
        }
    }

    #[test]
    fn subcritical_reports_rescaling() {
        let rep = verify_subcritical(&op(Builtin::Sym), 2.0, &small(), &[16]).unwrap();
        assert_eq!(rep.rescaling.len(), RESCALE_RADII.len());
        assert!(rep.rescaling.iter().all(|r| r.sup_ratio.is_some()));
    }
}
