//! The certificate pipeline for one instance, its report format, and CSV export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{check_conditions, extend_l1, ConditionReport, ExtendedMap, EXTENSION_SAMPLES, EXTENSION_TOL};
use crate::error::{Error, Result};
use crate::matalg::{eigh, CutRule, Hermitian};
use crate::maxerg::{
    Certificate, CertificateKind, CertificateOptions, Instance, PointwiseOutcome, Residual, SolveStatus,
    UniformOptions, UniformOutcome,
};
use crate::scenario::{load_scenario, MatrixData, Mode, Scenario};
use crate::vna::LOneElement;

pub const REPORT_SCHEMA: &str = "ncmaxerg/report/v1";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CERTIFICATE_FAILURE: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_NUMERICAL_FAILURE: i32 = 3;

/// Exit code for an error that stops the pipeline.
pub fn exit_code_for(error: &Error) -> i32 {
    if error.is_numerical() {
        EXIT_NUMERICAL_FAILURE
    } else {
        EXIT_INVALID_INPUT
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunFlags {
    /// Ambiguous spectral cuts and a missing stable limit become numerical failures.
    pub strict: bool,
    /// Overrides the residual gate of the scenario.
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub lambda: f64,
    pub n_max: usize,
    pub horizon: usize,
    pub check_horizon: Option<usize>,
    pub tracial: bool,
    pub uniform: UniformOptions,
}

/// Pointwise outcomes for `n = 0..=n_max` and the uniform (or tracial) outcome.
pub struct PipelineOutput {
    pub pointwise: Vec<PointwiseOutcome>,
    pub uniform: Result<UniformOutcome>,
}

/// Run the full pipeline; the uniform stage reuses its own `e_1, …, e_horizon`
/// for the pointwise records it covers.
pub fn run_pipeline(ext: &ExtendedMap, a: &LOneElement, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let check_horizon = cfg.check_horizon.unwrap_or(4 * cfg.horizon);
    let r_max = cfg.n_max.max(cfg.horizon).max(if cfg.tracial { 0 } else { check_horizon });
    let mut inst = Instance::new(ext, a, cfg.lambda, r_max, cfg.uniform.certificate.tol)?;
    let uniform_opts = UniformOptions { check_horizon: Some(check_horizon), ..cfg.uniform.clone() };
    let uniform = match if cfg.tracial {
        inst.yeadon(cfg.horizon, &uniform_opts)
    } else {
        inst.uniform(cfg.horizon, &uniform_opts)
    } {
        Err(e) if !matches!(e, Error::NoStableLimit { .. }) => return Err(e),
        other => other,
    };
    let mut pointwise = Vec::with_capacity(cfg.n_max + 1);
    for n in 0..=cfg.n_max {
        let reused = match &uniform {
            Ok(u) if n >= 1 && n <= u.pointwise.len() => Some(u.pointwise[n - 1].clone()),
            _ => None,
        };
        pointwise.push(match reused {
            Some(p) => p,
            None => inst.pointwise(n, &cfg.uniform.certificate)?,
        });
    }
    Ok(PipelineOutput { pointwise, uniform })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRecord {
    pub n: usize,
    pub pass: bool,
    pub tolerance: f64,
    pub worst_gated_slack: f64,
    pub residuals: Vec<Residual>,
    pub status: SolveStatus,
    pub sweeps: usize,
    pub objective: f64,
    pub dual_bound: f64,
    pub gap: f64,
    pub scale: f64,
    pub eps_kernel: f64,
    pub identity_residual: f64,
    /// Smallest kept and largest dropped eigenvalue of `1 − Σ x̄_r`.
    pub smallest_kept: Option<f64>,
    pub largest_dropped: Option<f64>,
    pub projection_rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<MatrixData>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn rank(e: &Hermitian) -> usize {
    e.trace().round() as usize
}

fn worst(c: &Certificate) -> f64 {
    let w = c.worst_gated_slack();
    if w.is_finite() {
        w
    } else {
        0.0
    }
}

impl PointwiseRecord {
    pub fn new(p: &PointwiseOutcome, with_projection: bool) -> Self {
        let n = match p.certificate.kind {
            CertificateKind::Pointwise { n } => n,
            _ => p.solution.point.n(),
        };
        Self {
            n,
            pass: p.certificate.pass,
            tolerance: p.certificate.tolerance,
            worst_gated_slack: worst(&p.certificate),
            residuals: p.certificate.residuals.clone(),
            status: p.solution.status,
            sweeps: p.solution.sweeps,
            objective: p.solution.objective,
            dual_bound: p.solution.dual_bound,
            gap: p.solution.gap,
            scale: p.solution.scale,
            eps_kernel: p.extraction.eps_kernel,
            identity_residual: p.extraction.identity_residual,
            smallest_kept: finite(p.extraction.smallest_kept),
            largest_dropped: finite(p.extraction.largest_dropped),
            projection_rank: rank(&p.certificate.projection),
            projection: with_projection.then(|| MatrixData::from_block_matrix(p.certificate.projection.matrix())),
        }
    }

    pub fn mass_slack(&self) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == "mass").map(|r| r.slack)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRecord {
    pub kind: CertificateKind,
    pub pass: bool,
    pub tolerance: f64,
    pub worst_gated_slack: f64,
    pub residuals: Vec<Residual>,
    /// Indices `n` of the projections averaged into the limit.
    pub cluster: Vec<usize>,
    /// `‖e_{n+1} − e_n‖` for consecutive computed projections.
    pub distances: Vec<f64>,
    pub inverse_cut_norm: Option<f64>,
    pub limit_spectrum: Vec<f64>,
    pub projection_rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<MatrixData>,
}

impl UniformRecord {
    pub fn new(u: &UniformOutcome, with_projection: bool) -> Result<Self> {
        let c = &u.certificate;
        Ok(Self {
            kind: c.kind.clone(),
            pass: c.pass,
            tolerance: c.tolerance,
            worst_gated_slack: worst(c),
            residuals: c.residuals.clone(),
            cluster: u.diagnostics.cluster.clone(),
            distances: u.diagnostics.distances.clone(),
            inverse_cut_norm: u.diagnostics.inverse_cut_norm,
            limit_spectrum: eigh(&u.diagnostics.h)?.eigenvalues().collect(),
            projection_rank: rank(&c.projection),
            projection: with_projection.then(|| MatrixData::from_block_matrix(c.projection.matrix())),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub strict: bool,
    pub effective_signature: Vec<usize>,
    pub conditions: ConditionReport,
    pub pointwise: Vec<PointwiseRecord>,
    pub uniform: Option<UniformRecord>,
    pub uniform_error: Option<String>,
    pub pass: bool,
    pub exit_code: i32,
}

/// A pipeline stop with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub exit_code: i32,
    pub error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Self { exit_code: exit_code_for(&error), error }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

pub fn run_scenario_file(path: &Path, flags: &RunFlags) -> std::result::Result<Report, Failure> {
    run_scenario(&load_scenario(path)?, flags)
}

/// Verify a scenario. The report's `exit_code` is 0 iff every gated certificate passes.
pub fn run_scenario(scenario: &Scenario, flags: &RunFlags) -> std::result::Result<Report, Failure> {
    if let Some(tol) = flags.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")).into());
        }
    }
    let resolved = scenario.resolve()?;
    let conditions = check_conditions(&resolved.map, &resolved.reference, EXTENSION_SAMPLES, EXTENSION_TOL)?;
    let ext = extend_l1(&resolved.map, resolved.reference.clone())?;
    let rule = if flags.strict { CutRule::Strict } else { CutRule::Conservative };
    let certificate = CertificateOptions {
        tol: flags.tol.or(scenario.tolerances.gate),
        eps_kernel: scenario.tolerances.eps_kernel,
        rule,
        ..Default::default()
    };
    let cfg = PipelineConfig {
        lambda: scenario.lambda,
        n_max: scenario.n_max,
        horizon: scenario.horizon,
        check_horizon: scenario.check_horizon,
        tracial: scenario.mode == Mode::TracialWeight,
        uniform: UniformOptions {
            check_horizon: scenario.check_horizon,
            cluster_tol: scenario.tolerances.cluster_tol,
            window: scenario.tolerances.window,
            certificate,
        },
    };
    let out = run_pipeline(&ext, &resolved.input, &cfg)?;
    let pointwise: Vec<PointwiseRecord> = out.pointwise.iter().map(|p| PointwiseRecord::new(p, true)).collect();
    let (uniform, uniform_error) = match &out.uniform {
        Ok(u) => (Some(UniformRecord::new(u, true)?), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let pass = pointwise.iter().all(|p| p.pass) && uniform.as_ref().is_none_or(|u| u.pass);
    let exit_code = if flags.strict && uniform_error.is_some() {
        EXIT_NUMERICAL_FAILURE
    } else if pass {
        EXIT_PASS
    } else {
        EXIT_CERTIFICATE_FAILURE
    };
    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: scenario.clone(),
        seed: resolved.seed,
        strict: flags.strict,
        effective_signature: resolved.algebra.signature().to_vec(),
        conditions,
        pointwise,
        uniform,
        uniform_error,
        pass,
        exit_code,
    })
}

/// Pretty JSON with every float written as `{:.16e}` (17 significant digits).
struct FixedFloatFormatter<'a>(serde_json::ser::PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for FixedFloatFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// Serialize in the fixed report layout.
pub fn to_fixed_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFloatFormatter(serde_json::ser::PrettyFormatter::with_indent(b"  ")),
    );
    value.serialize(&mut ser).map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn parse_report(text: &str) -> Result<Report> {
    let report: Report =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed report: {e}")))?;
    if report.schema != REPORT_SCHEMA {
        return Err(Error::InvalidArgument(format!("unsupported report schema {:?}", report.schema)));
    }
    Ok(report)
}

/// One CSV row per `(instance, n)`; `n` is empty for uniform rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub instance: usize,
    pub kind: &'static str,
    pub n: Option<usize>,
    pub pass: bool,
    pub worst_gated_slack: f64,
    pub min_order_slack: Option<f64>,
    pub mass_slack: Option<f64>,
    pub mass_tight_slack: Option<f64>,
    pub sweeps: Option<usize>,
    pub gap: Option<f64>,
    pub identity_residual: Option<f64>,
    pub projection_rank: usize,
}

fn min_slack(residuals: &[Residual], names: &[&str]) -> Option<f64> {
    residuals.iter().filter(|r| names.contains(&r.name.as_str())).map(|r| r.slack).reduce(f64::min)
}

fn named(residuals: &[Residual], name: &str) -> Option<f64> {
    residuals.iter().find(|r| r.name == name).map(|r| r.slack)
}

pub fn csv_rows(instance: usize, pointwise: &[PointwiseRecord], uniform: Option<&UniformRecord>) -> Vec<CsvRow> {
    let mut rows: Vec<CsvRow> = pointwise
        .iter()
        .map(|p| CsvRow {
            instance,
            kind: "pointwise",
            n: Some(p.n),
            pass: p.pass,
            worst_gated_slack: p.worst_gated_slack,
            min_order_slack: min_slack(&p.residuals, &["order"]),
            mass_slack: named(&p.residuals, "mass"),
            mass_tight_slack: named(&p.residuals, "mass_tight"),
            sweeps: Some(p.sweeps),
            gap: Some(p.gap),
            identity_residual: Some(p.identity_residual),
            projection_rank: p.projection_rank,
        })
        .collect();
    if let Some(u) = uniform {
        rows.push(CsvRow {
            instance,
            kind: "uniform",
            n: None,
            pass: u.pass,
            worst_gated_slack: u.worst_gated_slack,
            min_order_slack: min_slack(&u.residuals, &["trace_bound", "operator_bound"]),
            mass_slack: named(&u.residuals, "mass"),
            mass_tight_slack: None,
            sweeps: None,
            gap: None,
            identity_residual: None,
            projection_rank: u.projection_rank,
        });
    }
    rows
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scenario_keeps_the_unit() {
        let report = run_scenario(&Scenario::identity_example(2, 2.0), &RunFlags::default()).unwrap();
        assert_eq!(report.exit_code, EXIT_PASS);
        assert_eq!(report.pointwise.len(), 4);
        for p in &report.pointwise {
            assert_eq!(p.projection_rank, 2);
            assert_eq!(p.status, SolveStatus::Trivial);
        }
        assert_eq!(report.uniform.as_ref().unwrap().projection_rank, 2);
    }

    #[test]
    fn report_round_trips() {
        let report = run_scenario(&Scenario::identity_example(2, 0.5), &RunFlags::default()).unwrap();
        let text = to_fixed_json(&report).unwrap();
        assert_eq!(parse_report(&text).unwrap(), report);
        assert_eq!(to_fixed_json(&parse_report(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let text = to_fixed_json(&vec![0.1f64, -2.5]).unwrap();
        assert!(text.contains("1.0000000000000001e-1"));
        assert!(text.contains("-2.5000000000000000e0"));
    }

    #[test]
    fn bad_tolerance_is_invalid_input() {
        let flags = RunFlags { strict: false, tol: Some(-1.0) };
        let err = run_scenario(&Scenario::identity_example(2, 1.0), &flags).unwrap_err();
        assert_eq!(err.exit_code, EXIT_INVALID_INPUT);
    }

    #[test]
    fn csv_has_one_row_per_n_plus_uniform() {
        let report = run_scenario(&Scenario::identity_example(2, 2.0), &RunFlags::default()).unwrap();
        let rows = csv_rows(0, &report.pointwise, report.uniform.as_ref());
        assert_eq!(rows.len(), report.pointwise.len() + 1);
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
