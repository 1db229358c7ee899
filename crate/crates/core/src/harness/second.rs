//! Inequalities of the second kind on a cube: fields with arbitrary boundary
//! values, made orthogonal to the kernel of the elliptic part before the
//! ratio is taken.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, KmsError, Result};
use crate::fields::{apply_matrix_rep, curl_rows, Field, GridGeometry, TrigPoly};
use crate::norms::{lp_norm, sobolev_conjugate};
use crate::operators::{Builtin, MatrixRep};

use super::report::{GridReport, InequalityKind, Params, RatioReport, RatioRow};
use super::{check_grids, par_map, CorpusConfig};

/// Period of the corpus polynomials. Twice the cube side, so the fields are
/// not periodic on the cube.
pub const SECOND_KIND_PERIOD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSpace {
    /// Gradients of rigid motions: constant skew matrices.
    Rigid,
    /// Gradients of conformal Killing fields.
    Conformal,
}

/// An orthonormal family of matrix fields in the discrete `L²` product.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    pub space: BasisSpace,
    pub fields: Vec<Field>,
}

impl ProjectionBasis {
    pub fn dimension(&self) -> usize {
        self.fields.len()
    }

    /// `max |G − I|` over the Gram matrix.
    pub fn gram_residual(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, a) in self.fields.iter().enumerate() {
            for (j, b) in self.fields.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner(b)? - target).abs());
            }
        }
        Ok(worst)
    }

    /// `max_ℓ |⟨F, b_ℓ⟩| / ‖F‖₂`, zero for `F = 0`.
    pub fn orthogonality_residual(&self, f: &Field) -> Result<f64> {
        let norm = f.inner(f)?.sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let mut worst = 0.0f64;
        for b in &self.fields {
            worst = worst.max(f.inner(b)?.abs());
        }
        Ok(worst / norm)
    }
}

fn check_cube(g: &GridGeometry) -> Result<()> {
    if g.is_periodic() {
        return Err(invalid("projection bases live on a cube, not a periodic box"));
    }
    Ok(())
}

fn skew_generators(g: &GridGeometry) -> Vec<Field> {
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| {
            let mut m = [0.0; 9];
            m[3 * i + j] = 1.0;
            m[3 * j + i] = -1.0;
            Field::constant(*g, &m)
        })
        .collect()
}

/// `x ⊗ a + ⟨a, x⟩ I − a ⊗ x` for `a = e_axis`, half the gradient of
/// `2⟨a, x⟩x − |x|² a`.
fn inversion_generator(g: &GridGeometry, axis: usize) -> Field {
    Field::from_fn(*g, 9, |x, out| {
        out.fill(0.0);
        for i in 0..3 {
            out[3 * i + axis] += x[i];
            out[3 * axis + i] -= x[i];
            out[3 * i + i] += x[axis];
        }
    })
}

/// Two passes of modified Gram–Schmidt.
fn orthonormalize(space: BasisSpace, generators: Vec<Field>) -> Result<ProjectionBasis> {
    let mut fields: Vec<Field> = Vec::with_capacity(generators.len());
    for (n, mut v) in generators.into_iter().enumerate() {
        let start = v.inner(&v)?.sqrt();
        for _ in 0..2 {
            for e in &fields {
                v = v.axpy(-v.inner(e)?, e)?;
            }
        }
        let norm = v.inner(&v)?.sqrt();
        if !(norm > 1e-8 * start) {
            return Err(KmsError::Internal(format!(
                "generator {n} is dependent on the previous ones (relative norm {:.3e})",
                norm / start
            )));
        }
        fields.push(v.scale(1.0 / norm));
    }
    Ok(ProjectionBasis { space, fields })
}

/// Orthonormal constant skew matrices, dimension 3.
pub fn build_rigid_basis(g: &GridGeometry) -> Result<ProjectionBasis> {
    check_cube(g)?;
    orthonormalize(BasisSpace::Rigid, skew_generators(g))
}

/// Orthonormal basis of the gradients of conformal Killing fields: constant
/// skew matrices, the identity and the three inversion generators,
/// dimension 7. Translations have zero gradient and drop out.
pub fn build_conformal_basis(g: &GridGeometry) -> Result<ProjectionBasis> {
    check_cube(g)?;
    let mut gens = skew_generators(g);
    gens.push(Field::constant(*g, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
    gens.extend((0..3).map(|a| inversion_generator(g, a)));
    orthonormalize(BasisSpace::Conformal, gens)
}

/// `F − Σ ⟨F, b_ℓ⟩ b_ℓ`.
pub fn project_out(f: &Field, basis: &ProjectionBasis) -> Result<Field> {
    let mut out = f.clone();
    for b in &basis.fields {
        out = out.axpy(-f.inner(b)?, b)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondMode {
    Sym,
    Dev,
}

impl SecondMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sym => "sym",
            Self::Dev => "dev",
        }
    }

    fn operator(self) -> MatrixRep {
        MatrixRep::builtin(match self {
            Self::Sym => Builtin::Sym,
            Self::Dev => Builtin::Dev,
        })
    }

    pub fn basis(self, g: &GridGeometry) -> Result<ProjectionBasis> {
        match self {
            Self::Sym => build_rigid_basis(g),
            Self::Dev => build_conformal_basis(g),
        }
    }

    /// A field in the span of the basis: a constant skew matrix for `sym`,
    /// a full conformal gradient for `dev`.
    fn kernel_field(self, g: &GridGeometry) -> Field {
        let skew = Field::constant(*g, &[0.0, 0.3, -0.7, -0.3, 0.0, 0.2, 0.7, -0.2, 0.0]);
        match self {
            Self::Sym => skew,
            Self::Dev => {
                let id = Field::constant(*g, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
                let inv = inversion_generator(g, 0).axpy(-0.5, &inversion_generator(g, 2));
                skew.axpy(0.4, &id)
                    .and_then(|f| f.axpy(2.0, &inv.expect("same layout")))
                    .expect("same layout")
            }
        }
    }
}

impl std::str::FromStr for SecondMode {
    type Err = KmsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" => Ok(Self::Sym),
            "dev" => Ok(Self::Dev),
            other => Err(invalid(format!("unknown mode '{other}' (expected sym or dev)"))),
        }
    }
}

/// Nine random polynomials per item, seed `seed + i`, independent of the grid.
pub fn second_kind_corpus(cfg: &CorpusConfig) -> Vec<Vec<TrigPoly>> {
    (0..cfg.size)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
            (0..9)
                .map(|_| TrigPoly::random(&mut rng, [0.0; 3], [SECOND_KIND_PERIOD; 3], cfg.kmax))
                .collect()
        })
        .collect()
}

/// Second-kind experiment on the unit cube at each grid side in `grids`.
/// Fields are projected onto the orthogonal complement of the mode's basis
/// before `‖F‖_{p*}` is compared with `‖A[F]‖_{p*} + ‖curl F‖_p`.
pub fn verify_second(
    mode: SecondMode,
    p: f64,
    cfg: &CorpusConfig,
    grids: &[usize],
) -> Result<RatioReport> {
    if !(1.0..3.0).contains(&p) {
        return Err(invalid(format!("p = {p} must lie in [1, 3)")));
    }
    if cfg.size == 0 || cfg.kmax == 0 || cfg.jobs == Some(0) {
        return Err(invalid("corpus size, kmax and jobs must be positive"));
    }
    check_grids(grids)?;
    let ps = sobolev_conjugate(p)?;
    let a = mode.operator();
    let corpus = second_kind_corpus(cfg);
    let mut reports = Vec::new();
    for &n in grids {
        let g = GridGeometry::unit_cube(n)?;
        let basis = mode.basis(&g)?;
        let per_item = par_map(cfg.jobs, corpus.len(), |i| {
            let raw = Field::new(g, corpus[i].iter().map(|t| t.eval_grid(&g)).collect())?;
            let f = project_out(&raw, &basis)?;
            let residual = basis.orthogonality_residual(&f)?;
            let mut row = RatioRow::new(
                0,
                lp_norm(&f, ps, None)?,
                lp_norm(&apply_matrix_rep(&a, &f)?, ps, None)?,
                lp_norm(&curl_rows(&f)?, p, None)?,
            );
            row.index = i;
            Ok((row, residual))
        })?;
        let orth = per_item.iter().map(|r| r.1).fold(0.0, f64::max);
        let mut grid = GridReport::new(g.dims(), per_item.into_iter().map(|r| r.0).collect());

        let kernel = mode.kernel_field(&g);
        let before = RatioRow::new(
            0,
            lp_norm(&kernel, ps, None)?,
            lp_norm(&apply_matrix_rep(&a, &kernel)?, ps, None)?,
            lp_norm(&curl_rows(&kernel)?, p, None)?,
        );
        let after = project_out(&kernel, &basis)?;
        let extras = &mut grid.extras;
        extras.insert("orthogonality_residual".into(), orth);
        extras.insert("gram_residual".into(), basis.gram_residual()?);
        extras.insert("basis_dimension".into(), basis.dimension() as f64);
        extras.insert("kernel_lhs_unprojected".into(), before.lhs);
        extras.insert(
            "kernel_rhs_unprojected".into(),
            before.rhs_elliptic + before.rhs_curl,
        );
        extras.insert("kernel_residual_projected".into(), after.max_abs() / kernel.max_abs());
        reports.push(grid);
    }
    let kind = match mode {
        SecondMode::Sym => InequalityKind::SecondSym,
        SecondMode::Dev => InequalityKind::SecondDev,
    };
    let params = Params {
        p,
        lhs_exponent: Some(ps),
        ..Default::default()
    };
    let mut rep = RatioReport::new(mode.name(), kind, params, cfg.seed, cfg.size, reports);
    rep.notes.push(format!(
        "fields on the unit cube orthogonal to the {} basis; curl by finite differences",
        match mode {
            SecondMode::Sym => "rigid",
            SecondMode::Dev => "conformal",
        }
    ));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube() -> GridGeometry {
        GridGeometry::unit_cube(8).unwrap()
    }

    fn random_matrix_field(seed: u64, g: &GridGeometry) -> Field {
        let cfg = CorpusConfig {
            size: 1,
            seed,
            kmax: 1,
            ..Default::default()
        };
        let polys = &second_kind_corpus(&cfg)[0];
        Field::new(*g, polys.iter().map(|t| t.eval_grid(g)).collect()).unwrap()
    }

    #[test]
    fn dimensions_and_gram() {
        let g = cube();
        let r = build_rigid_basis(&g).unwrap();
        let c = build_conformal_basis(&g).unwrap();
        assert_eq!((r.dimension(), c.dimension()), (3, 7));
        assert!(r.gram_residual().unwrap() <= 1e-10);
        assert!(c.gram_residual().unwrap() <= 1e-10);
        for f in &r.fields {
            let m = f.matrix_at(0);
            for k in 1..g.len() {
                assert_eq!(f.matrix_at(k), m);
            }
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(m[3 * i + j], -m[3 * j + i]);
                }
            }
        }
    }

    #[test]
    fn conformal_fields_are_affine() {
        let g = cube();
        let c = build_conformal_basis(&g).unwrap();
        let h = g.spacing(0);
        for f in &c.fields {
            for comp in f.comps() {
                for ix in 1..7 {
                    for iy in 1..7 {
                        for iz in 1..7 {
                            let at = |a: usize, b: usize, c: usize| comp[g.index(a, b, c)];
                            let second = at(ix + 1, iy, iz) - 2.0 * at(ix, iy, iz) + at(ix - 1, iy, iz);
                            assert!(second.abs() / (h * h) < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn conformal_generators_are_in_the_kernel_of_dev() {
        let g = cube();
        let dev = MatrixRep::builtin(Builtin::Dev);
        for f in build_conformal_basis(&g).unwrap().fields {
            assert!(apply_matrix_rep(&dev, &f).unwrap().max_abs() < 1e-12);
            assert!(curl_rows(&f).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn projection_examples() {
        let g = cube();
        let rigid = build_rigid_basis(&g).unwrap();
        let skew = SecondMode::Sym.kernel_field(&g);
        assert!(project_out(&skew, &rigid).unwrap().max_abs() <= 1e-10);
        let conformal = build_conformal_basis(&g).unwrap();
        let k = SecondMode::Dev.kernel_field(&g);
        assert!(project_out(&k, &conformal).unwrap().max_abs() <= 1e-10 * k.max_abs());
        let f = project_out(&random_matrix_field(1, &g), &conformal).unwrap();
        let again = project_out(&f, &conformal).unwrap();
        assert!(again.sub(&f).unwrap().max_abs() <= 1e-12 * f.max_abs());
    }

    #[test]
    fn unprojected_kernel_field_has_zero_rhs() {
        let g = cube();
        for mode in [SecondMode::Sym, SecondMode::Dev] {
            let k = mode.kernel_field(&g);
            let e = apply_matrix_rep(&mode.operator(), &k).unwrap().max_abs();
            let c = curl_rows(&k).unwrap().max_abs();
            assert!(e <= 1e-14 && c <= 1e-12, "{}: {e} {c}", mode.name());
        }
    }

    #[test]
    fn rejects_periodic_and_bad_p() {
        let g = GridGeometry::periodic_cube(8, 1.0).unwrap();
        assert!(build_rigid_basis(&g).is_err());
        let cfg = CorpusConfig::default();
        assert!(verify_second(SecondMode::Sym, 3.0, &cfg, &[8]).is_err());
    }

    #[test]
    fn report_extras() {
        let cfg = CorpusConfig {
            size: 4,
            kmax: 1,
            ..Default::default()
        };
        let rep = verify_second(SecondMode::Dev, 2.0, &cfg, &[8]).unwrap();
        let x = &rep.grids[0].extras;
        assert!(x["orthogonality_residual"] <= 1e-10);
        assert_eq!(x["basis_dimension"], 7.0);
        assert!(x["kernel_lhs_unprojected"] > 0.0);
        assert!(x["kernel_rhs_unprojected"] <= 1e-12);
        assert!(x["kernel_residual_projected"] <= 1e-10);
        assert!(rep.sup_ratio().unwrap().is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn projection_is_orthogonal(seed in 0u64..1000, other in 0u64..1000) {
            let g = cube();
            let basis = build_conformal_basis(&g).unwrap();
            let f = random_matrix_field(seed, &g);
            let h = random_matrix_field(other.wrapping_add(5000), &g);
            let pf = project_out(&f, &basis).unwrap();
            let ph = project_out(&h, &basis).unwrap();
            let scale = f.inner(&f).unwrap().sqrt() * h.inner(&h).unwrap().sqrt();
            prop_assert!((pf.inner(&h).unwrap() - f.inner(&ph).unwrap()).abs() <= 1e-10 * scale);
            prop_assert!(pf.inner(&pf).unwrap() <= f.inner(&f).unwrap() * (1.0 + 1e-10));
            prop_assert!(basis.orthogonality_residual(&pf).unwrap() <= 1e-10);
        }
    }
}
