//! Target registration error, paired t-tests and method comparison.
//!
//! Per-case TRE is the mean distance over that case's landmarks; cohort
//! statistics are taken over cases with the sample (n − 1) standard
//! deviation.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{check_correspondence, compose, decompose, AffineMatrix, PointSet};
use crate::refine::{refine, RefineConfig, RefineResult};
use crate::stats::student_t_two_sided;
use crate::umeyama::umeyama_fit;

/// Mean and sample standard deviation of a list of errors in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct TreStat {
    pub mean: f64,
    pub std: f64,
    /// The underlying errors: per correspondence for [`tre`], per case for
    /// cohort summaries.
    pub values: Vec<f64>,
    /// Set when only one value exists; `std` is then reported as 0.
    pub degenerate: bool,
}

impl TreStat {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientSample { needed: 1, got: 0 });
        }
        let (mean, std) = mean_std(&values);
        Ok(Self {
            mean,
            std: std.unwrap_or(0.0),
            degenerate: values.len() == 1,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl fmt::Display for TreStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, Some((ss / (n - 1.0)).sqrt()))
}

/// Distances `‖fixed_i − T(moving_i)‖` and their summary.
pub fn tre(transform: &AffineMatrix, moving_eval: &PointSet, fixed_eval: &PointSet) -> Result<TreStat> {
    check_correspondence(moving_eval, fixed_eval)?;
    let values = moving_eval
        .iter()
        .zip(fixed_eval.iter())
        .map(|(m, f)| f.distance(&transform.transform_point(m)))
        .collect();
    TreStat::from_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub dof: usize,
}

/// Paired two-sided t-test on `a − b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Correspondence(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: a.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&diffs);
    let sd = sd.expect("n >= 2");
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if !(sd > 4.0 * f64::EPSILON * scale) {
        return Err(Error::DegenerateTest);
    }
    let n = diffs.len() as f64;
    let t = mean / (sd / n.sqrt());
    let dof = diffs.len() - 1;
    Ok(TTest {
        t,
        p: student_t_two_sided(t, dof as f64),
        dof,
    })
}

/// A procedure mapping `(moving, fixed)` fitting landmarks to a transform.
pub trait Registrar {
    fn label(&self) -> String;
    fn register(&self, moving: &PointSet, fixed: &PointSet) -> Result<AffineMatrix>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// No registration.
    Identity,
    Umeyama,
    /// Umeyama initialization followed by Adam refinement.
    UmeyamaRefine(RefineConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Identity => "identity",
            Method::Umeyama => "umeyama",
            Method::UmeyamaRefine(_) => "umeyama+refine",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" | "none" => Ok(Method::Identity),
            "umeyama" => Ok(Method::Umeyama),
            "umeyama+refine" | "refine" | "umeyama+adam" => {
                Ok(Method::UmeyamaRefine(RefineConfig::default()))
            }
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Umeyama fit, then refinement of its nine parameters.
pub fn umeyama_refine(
    moving: &PointSet,
    fixed: &PointSet,
    config: &RefineConfig,
) -> Result<(AffineMatrix, RefineResult)> {
    let init = decompose(&umeyama_fit(moving, fixed)?)?;
    let result = refine(&init, moving, fixed, config)?;
    Ok((compose(&result.params)?, result))
}

impl Registrar for Method {
    fn label(&self) -> String {
        self.name().to_string()
    }

    fn register(&self, moving: &PointSet, fixed: &PointSet) -> Result<AffineMatrix> {
        match self {
            Method::Identity => {
                check_correspondence(moving, fixed)?;
                Ok(AffineMatrix::identity())
            }
            Method::Umeyama => umeyama_fit(moving, fixed),
            Method::UmeyamaRefine(cfg) => umeyama_refine(moving, fixed, cfg).map(|r| r.0),
        }
    }
}

/// Fitting landmarks plus optional hold-out landmarks for one case.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub id: String,
    pub moving: PointSet,
    pub fixed: PointSet,
    /// `(moving_eval, fixed_eval)`, never used for fitting.
    pub holdout: Option<(PointSet, PointSet)>,
}

impl EvalCase {
    pub fn new(
        id: impl Into<String>,
        moving: PointSet,
        fixed: PointSet,
        holdout: Option<(PointSet, PointSet)>,
    ) -> Result<Self> {
        let id = id.into();
        check_correspondence(&moving, &fixed)?;
        if let Some((hm, hf)) = &holdout {
            check_correspondence(hm, hf)?;
            if let (Some(fit), Some(held)) = (moving.names(), hm.names()) {
                let fit: HashSet<&String> = fit.iter().collect();
                if let Some(dup) = held.iter().find(|n| fit.contains(n)) {
                    return Err(Error::InvalidData(format!(
                        "case {id}: hold-out landmark '{dup}' is also a fitting landmark"
                    )));
                }
            }
        }
        Ok(Self {
            id,
            moving,
            fixed,
            holdout,
        })
    }
}

/// Which landmarks the comparison table aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalTarget {
    /// The landmarks the transform was fitted to.
    #[default]
    Fit,
    /// Landmarks excluded from fitting.
    Holdout,
}

impl EvalTarget {
    pub fn name(&self) -> &'static str {
        match self {
            EvalTarget::Fit => "fit",
            EvalTarget::Holdout => "holdout",
        }
    }
}

impl FromStr for EvalTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fit" => Ok(EvalTarget::Fit),
            "holdout" | "hold-out" => Ok(EvalTarget::Holdout),
            other => Err(Error::InvalidParameter(format!("unknown evaluation target `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationReport {
    pub case_id: String,
    pub method: String,
    pub transform: AffineMatrix,
    pub fit_tre: TreStat,
    pub holdout_tre: Option<TreStat>,
}

#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: String,
    /// Per-case mean TRE over the selected landmarks.
    pub stat: TreStat,
    pub reports: Vec<RegistrationReport>,
}

#[derive(Debug, Clone)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    /// The test on per-case means, or why it could not be run.
    pub outcome: std::result::Result<TTest, String>,
}

#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub target: EvalTarget,
    pub rows: Vec<MethodSummary>,
    pub tests: Vec<PairedComparison>,
}

/// Registers every case with every method and summarizes TRE per method.
///
/// Rows follow `methods` order, per-case values follow `cases` order, and a
/// paired t-test is run for every method pair `(i, j)` with `i < j`.
pub fn compare_methods<R: Registrar>(
    cases: &[EvalCase],
    methods: &[R],
    target: EvalTarget,
) -> Result<ComparisonTable> {
    if cases.is_empty() {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no registration methods given".into()));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let label = method.label();
        let mut reports = Vec::with_capacity(cases.len());
        let mut per_case = Vec::with_capacity(cases.len());
        for case in cases {
            let annotate = |e: Error| Error::Case {
                case: case.id.clone(),
                source: Box::new(e),
            };
            let transform = method.register(&case.moving, &case.fixed).map_err(annotate)?;
            let fit_tre = tre(&transform, &case.moving, &case.fixed).map_err(annotate)?;
            let holdout_tre = match &case.holdout {
                Some((m, f)) => Some(tre(&transform, m, f).map_err(annotate)?),
                None => None,
            };
            let selected = match target {
                EvalTarget::Fit => &fit_tre,
                EvalTarget::Holdout => holdout_tre.as_ref().ok_or_else(|| {
                    annotate(Error::InvalidData("case has no hold-out landmarks".into()))
                })?,
            };
            per_case.push(selected.mean);
            reports.push(RegistrationReport {
                case_id: case.id.clone(),
                method: label.clone(),
                transform,
                fit_tre,
                holdout_tre,
            });
        }
        rows.push(MethodSummary {
            method: label,
            stat: TreStat::from_values(per_case)?,
            reports,
        });
    }

    let mut tests = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            tests.push(PairedComparison {
                a: rows[i].method.clone(),
                b: rows[j].method.clone(),
                outcome: paired_ttest(&rows[i].stat.values, &rows[j].stat.values)
                    .map_err(|e| e.to_string()),
            });
        }
    }
    Ok(ComparisonTable { target, rows, tests })
}

impl ComparisonTable {
    pub fn row(&self, method: &str) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// `method,mean_mm,std_mm,n_cases` at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean_mm,std_mm,n_cases\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", row.method, row.stat.mean, row.stat.std, row.stat.len());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.stat.len());
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "TRE in mm over {} landmarks, mean ± std across {n} case{}",
            self.target.name(),
            if n == 1 { "" } else { "s" }
        );
        let _ = writeln!(out, "{:<width$}  TRE", "method");
        for row in &self.rows {
            let _ = writeln!(out, "{:<width$}  {}", row.method, row.stat);
        }
        if !self.tests.is_empty() {
            let _ = writeln!(out, "\npaired t-tests on per-case TRE");
            for test in &self.tests {
                match &test.outcome {
                    Ok(t) => {
                        let _ = writeln!(
                            out,
                            "{} vs {}: t = {:.3}, df = {}, p = {:.3e}",
                            test.a, test.b, t.t, t.dof, t.p
                        );
                    }
                    Err(why) => {
                        let _ = writeln!(out, "{} vs {}: not computed ({why})", test.a, test.b);
                    }
                }
            }
        }
        out
    }
}
