use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    FirstKind,
    Subcritical,
    Bmo,
    Morrey,
    Lorentz,
    Fractional,
    SecondSym,
    SecondDev,
}

impl InequalityKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FirstKind => "first_kind",
            Self::Subcritical => "subcritical",
            Self::Bmo => "bmo",
            Self::Morrey => "morrey",
            Self::Lorentz => "lorentz",
            Self::Fractional => "fractional",
            Self::SecondSym => "second_sym",
            Self::SecondDev => "second_dev",
        }
    }
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    Ok,
    /// The field vanished, so the ratio is undefined.
    ZeroField,
    /// Right-hand side below `1e-14 · lhs`.
    DegenerateRhs,
    NonFinite,
}

impl RowFlag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::ZeroField => "zero_field",
            Self::DegenerateRhs => "degenerate_rhs",
            Self::NonFinite => "non_finite",
        }
    }
}

/// Rows whose right-hand side falls below this fraction of the left-hand
/// side are flagged and left out of the supremum.
pub const DEGENERATE_RHS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub index: usize,
    pub lhs: f64,
    pub rhs_elliptic: f64,
    pub rhs_curl: f64,
    pub ratio: Option<f64>,
    pub flag: RowFlag,
}

impl RatioRow {
    pub fn new(index: usize, lhs: f64, rhs_elliptic: f64, rhs_curl: f64) -> Self {
        let rhs = rhs_elliptic + rhs_curl;
        let flag = if !(lhs.is_finite() && rhs_elliptic.is_finite() && rhs_curl.is_finite()) {
            RowFlag::NonFinite
        } else if lhs == 0.0 {
            RowFlag::ZeroField
        } else if rhs < DEGENERATE_RHS * lhs {
            RowFlag::DegenerateRhs
        } else {
            RowFlag::Ok
        };
        Self {
            index,
            lhs,
            rhs_elliptic,
            rhs_curl,
            ratio: (flag == RowFlag::Ok).then(|| lhs / rhs),
            flag,
        }
    }
}

/// Rows of one grid and their supremum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub dims: [usize; 3],
    pub rows: Vec<RatioRow>,
    pub sup_ratio: Option<f64>,
    /// Corpus index attaining `sup_ratio`, lowest index on ties.
    pub argmax: Option<usize>,
    pub flagged: usize,
    /// Experiment-specific diagnostics.
    pub extras: BTreeMap<String, f64>,
}

impl GridReport {
    pub fn new(dims: [usize; 3], rows: Vec<RatioRow>) -> Self {
        let mut sup: Option<(f64, usize)> = None;
        for r in &rows {
            if let Some(x) = r.ratio {
                if sup.is_none_or(|(s, _)| x > s) {
                    sup = Some((x, r.index));
                }
            }
        }
        let flagged = rows.iter().filter(|r| r.flag != RowFlag::Ok).count();
        Self {
            dims,
            rows,
            sup_ratio: sup.map(|s| s.0),
            argmax: sup.map(|s| s.1),
            flagged,
            extras: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Params {
    pub p: f64,
    /// Exponent of the norm on the left and on the elliptic part.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Supremum of the ratio after dilating the corpus about its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaleRow {
    pub support_radius: f64,
    pub dims: [usize; 3],
    pub sup_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub operator_name: String,
    pub inequality_kind: InequalityKind,
    pub params: Params,
    pub seed: u64,
    pub corpus_size: usize,
    pub grids: Vec<GridReport>,
    /// `sup(grid i+1) / sup(grid i)`.
    pub stability: Vec<Option<f64>>,
    pub rescaling: Vec<RescaleRow>,
    pub ill_conditioned: bool,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str = "index,lhs,rhs_elliptic,rhs_curl,ratio,flag";

/// Seventeen significant digits, enough for an exact round trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl RatioReport {
    pub fn new(
        operator_name: impl Into<String>,
        inequality_kind: InequalityKind,
        params: Params,
        seed: u64,
        corpus_size: usize,
        grids: Vec<GridReport>,
    ) -> Self {
        let stability = grids
            .windows(2)
            .map(|w| match (w[0].sup_ratio, w[1].sup_ratio) {
                (Some(a), Some(b)) if a > 0.0 => Some(b / a),
                _ => None,
            })
            .collect();
        Self {
            operator_name: operator_name.into(),
            inequality_kind,
            params,
            seed,
            corpus_size,
            grids,
            stability,
            rescaling: Vec::new(),
            ill_conditioned: false,
            notes: Vec::new(),
        }
    }

    /// Largest per-grid supremum.
    pub fn sup_ratio(&self) -> Option<f64> {
        self.grids
            .iter()
            .filter_map(|g| g.sup_ratio)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
    }

    /// Worst `|quotient − 1|` over successive grids; `None` if any grid
    /// has no usable rows.
    pub fn max_drift(&self) -> Option<f64> {
        self.stability
            .iter()
            .try_fold(0.0f64, |acc, q| q.map(|q| acc.max((q - 1.0).abs())))
    }

    /// One row per field, grids in the order they were run.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for g in &self.grids {
            for r in &g.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.index,
                    fmt_float(r.lhs),
                    fmt_float(r.rhs_elliptic),
                    fmt_float(r.rhs_curl),
                    r.ratio.map(fmt_float).unwrap_or_default(),
                    r.flag.name()
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn summary(&self) -> Summary<'_> {
        Summary {
            operator: &self.operator_name,
            inequality_kind: self.inequality_kind,
            params: self.params,
            seed: self.seed,
            corpus_size: self.corpus_size,
            grids: self
                .grids
                .iter()
                .map(|g| GridSummary {
                    dims: g.dims,
                    sup_ratio: g.sup_ratio,
                    argmax: g.argmax,
                    rows: g.rows.len(),
                    flagged: g.flagged,
                    extras: &g.extras,
                })
                .collect(),
            stability_quotients: &self.stability,
            rescaling: &self.rescaling,
            ill_conditioned: self.ill_conditioned,
            notes: &self.notes,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

#[derive(Debug, Serialize)]
pub struct GridSummary<'a> {
    pub dims: [usize; 3],
    pub sup_ratio: Option<f64>,
    pub argmax: Option<usize>,
    pub rows: usize,
    pub flagged: usize,
    pub extras: &'a BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub operator: &'a str,
    pub inequality_kind: InequalityKind,
    pub params: Params,
    pub seed: u64,
    pub corpus_size: usize,
    pub grids: Vec<GridSummary<'a>>,
    pub stability_quotients: &'a [Option<f64>],
    pub rescaling: &'a [RescaleRow],
    pub ill_conditioned: bool,
    pub notes: &'a [String],
}
