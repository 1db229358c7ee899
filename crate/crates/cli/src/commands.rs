//! Subcommand bodies. Each reads its parameters from a merged [`RunConfig`].

use std::path::{Path, PathBuf};

use kms_core::extension::{extend_divfree_with, DEFAULT_DIV_TESTS};
use kms_core::fields::{read_field, write_field};
use kms_core::harness::{
    counterexample_sequence, verify_first, verify_second, verify_subcritical, verify_variant,
    CorpusConfig, RatioReport, RowFlag, SecondMode, VariantKind, VariantParams,
};
use kms_core::operators::{ellipticity, EllipticityOptions};
use kms_core::spectral::{helmholtz, helmholtz_rows};
use kms_core::MatrixRep;

use crate::config::RunConfig;
use crate::Failure;

/// Config-file keys each subcommand reads.
pub fn allowed_keys(command: &str) -> &'static [&'static str] {
    match command {
        "check-elliptic" => &["operator", "samples", "tol"],
        "decompose" => &["in", "out-div", "out-curl"],
        "verify" => &[
            "operator", "kind", "p", "grids", "corpus", "seed", "kmax", "out", "summary", "jobs",
            "support-radius", "box-width",
        ],
        "verify-variant" => &[
            "operator", "kind", "p", "q", "theta", "pair-budget", "grids", "corpus", "seed", "kmax",
            "out", "summary", "jobs", "support-radius", "box-width",
        ],
        "verify2" => &["mode", "p", "grids", "corpus", "seed", "kmax", "out", "summary", "jobs"],
        "counterexample" => &["operator", "ks", "p", "grid", "out", "summary"],
        "extend" => &["in", "out", "report", "div-tests", "seed"],
        _ => &[],
    }
}

pub fn dispatch(command: &str, cfg: &RunConfig) -> Result<u8, Failure> {
    match command {
        "check-elliptic" => check_elliptic(cfg),
        "decompose" => decompose(cfg),
        "verify" => verify(cfg),
        "verify-variant" => variant(cfg),
        "verify2" => verify2(cfg),
        "counterexample" => counterexample(cfg),
        "extend" => extend(cfg),
        other => Err(Failure::Usage(format!("unknown subcommand {other}"))),
    }
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, Failure> {
    value
        .as_ref()
        .ok_or_else(|| Failure::Usage(format!("missing required --{flag}")))
}

fn operator(cfg: &RunConfig, default: Option<&str>) -> Result<MatrixRep, Failure> {
    let spec = match (&cfg.operator, default) {
        (Some(s), _) => s.as_str(),
        (None, Some(d)) => d,
        (None, None) => return Err(Failure::Usage("missing required --operator".into())),
    };
    Ok(MatrixRep::resolve(spec)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Write to `path`, or print to stdout when no path is given.
fn emit(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_line(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn check_elliptic(cfg: &RunConfig) -> Result<u8, Failure> {
    let a = operator(cfg, None)?;
    let defaults = EllipticityOptions::default();
    let opts = EllipticityOptions {
        sphere_samples: cfg.samples.unwrap_or(defaults.sphere_samples),
        elliptic_tol: cfg.tol.unwrap_or(defaults.elliptic_tol),
        ..defaults
    };
    let report = ellipticity(&a, &opts)?;
    if !report.min_singular.is_finite() {
        return Err(Failure::Numerical("smallest singular value is not finite".into()));
    }
    print!("{}", json_line(&report));
    Ok(if report.is_elliptic { 0 } else { 2 })
}

fn decompose(cfg: &RunConfig) -> Result<u8, Failure> {
    let f = read_field(required(&cfg.input, "in")?)?;
    let out_div = required(&cfg.out_div, "out-div")?;
    let out_curl = required(&cfg.out_curl, "out-curl")?;
    let (d, c) = match f.ncomp() {
        3 => helmholtz(&f)?,
        9 => helmholtz_rows(&f)?,
        n => {
            return Err(Failure::Usage(format!(
                "decompose needs 3 or 9 components, got {n}"
            )))
        }
    };
    if !(d.all_finite() && c.all_finite()) {
        return Err(Failure::Numerical("non-finite values in the decomposition".into()));
    }
    write_field(&d, out_div)?;
    write_field(&c, out_curl)?;
    Ok(0)
}

fn corpus(cfg: &RunConfig, size: usize, kmax: usize) -> CorpusConfig {
    let d = CorpusConfig::default();
    CorpusConfig {
        size: cfg.corpus.unwrap_or(size),
        seed: cfg.seed.unwrap_or(0),
        kmax: cfg.kmax.unwrap_or(kmax),
        support_radius: cfg.support_radius.unwrap_or(d.support_radius),
        box_width: cfg.box_width.unwrap_or(d.box_width),
        jobs: cfg.jobs,
    }
}

/// Write the CSV and summary, then fail if any row is non-finite.
fn finish(cfg: &RunConfig, report: &RatioReport) -> Result<u8, Failure> {
    if let Some(path) = &cfg.out {
        write_text(path, &report.to_csv_string())?;
    }
    let mut summary = report.summary_json();
    summary.push('\n');
    emit(&cfg.summary, &summary)?;
    let bad: usize = report
        .grids
        .iter()
        .map(|g| g.rows.iter().filter(|r| r.flag == RowFlag::NonFinite).count())
        .sum();
    if bad > 0 {
        return Err(Failure::Numerical(format!("{bad} rows contain non-finite values")));
    }
    Ok(0)
}

fn verify(cfg: &RunConfig) -> Result<u8, Failure> {
    let a = operator(cfg, None)?;
    let p = cfg.p.unwrap_or(2.0);
    let grids = cfg.grids.clone().unwrap_or_else(|| vec![32, 48]);
    let corpus = corpus(cfg, 100, 2);
    let report = match cfg.kind.as_deref().unwrap_or("first_kind") {
        "first_kind" => verify_first(&a, p, &corpus, &grids)?,
        "subcritical" => verify_subcritical(&a, p, &corpus, &grids)?,
        other => {
            return Err(Failure::Usage(format!(
                "unknown kind '{other}' (expected first_kind or subcritical)"
            )))
        }
    };
    finish(cfg, &report)
}

fn variant(cfg: &RunConfig) -> Result<u8, Failure> {
    let kind: VariantKind = required(&cfg.kind, "kind")?.parse()?;
    let a = operator(cfg, Some("sym"))?;
    let p = cfg.p.unwrap_or(match kind {
        VariantKind::Bmo => 3.0,
        VariantKind::Morrey => 6.0,
        _ => 2.0,
    });
    let vp = VariantParams {
        p,
        q: cfg.q,
        theta: match kind {
            VariantKind::Fractional => Some(cfg.theta.unwrap_or(0.5)),
            _ => cfg.theta,
        },
        pair_budget: cfg.pair_budget.unwrap_or(VariantParams::new(p).pair_budget),
    };
    let grids = cfg.grids.clone().unwrap_or_else(|| match kind {
        VariantKind::Fractional => vec![8, 16],
        _ => vec![16, 32],
    });
    let report = verify_variant(&a, kind, &vp, &corpus(cfg, 50, 2), &grids)?;
    finish(cfg, &report)
}

fn verify2(cfg: &RunConfig) -> Result<u8, Failure> {
    let mode: SecondMode = required(&cfg.mode, "mode")?.parse()?;
    let p = cfg.p.unwrap_or(2.0);
    let grids = cfg.grids.clone().unwrap_or_else(|| vec![16, 32]);
    let report = verify_second(mode, p, &corpus(cfg, 50, 1), &grids)?;
    finish(cfg, &report)
}

fn counterexample(cfg: &RunConfig) -> Result<u8, Failure> {
    let a = operator(cfg, None)?;
    let ks = cfg.ks.clone().unwrap_or_else(|| vec![4, 8, 16, 32]);
    let seq = counterexample_sequence(&a, &ks, cfg.p.unwrap_or(2.0), cfg.grid.unwrap_or(64))?;
    if let Some(path) = &cfg.out {
        write_text(path, &seq.to_csv_string())?;
    }
    emit(&cfg.summary, &json_line(&seq))?;
    if seq.steps.iter().any(|s| !(s.grad_norm.is_finite() && s.op_norm.is_finite())) {
        return Err(Failure::Numerical("non-finite norms in the sequence".into()));
    }
    Ok(0)
}

fn extend(cfg: &RunConfig) -> Result<u8, Failure> {
    let phi = read_field(required(&cfg.input, "in")?)?;
    let out = required(&cfg.out, "out")?;
    let tests = cfg.div_tests.unwrap_or(DEFAULT_DIV_TESTS);
    let seed = cfg.seed.unwrap_or(0);
    let result = extend_divfree_with(&phi, tests, seed)?;
    if !result.extended.all_finite() {
        return Err(Failure::Numerical("non-finite values in the extension".into()));
    }
    write_field(&result.extended, out)?;
    let summary = result.summary(&phi, tests, seed)?;
    emit(&cfg.report, &json_line(&summary))?;
    Ok(0)
}
