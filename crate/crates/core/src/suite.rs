//! Seeded randomized suites of certified instances.

use serde::{Deserialize, Serialize};

use crate::dynamics::{extend_l1, random_certified_map, PositiveMapModel};
use crate::error::{Error, Result};
use crate::matalg::CutRule;
use crate::maxerg::{pre_weak_type_predicate, type_infinity_excess, CertificateOptions, UniformOptions, PREDICATE_TOL};
use crate::random::{derive_seed, random_density, random_psd, seeded_rng};
use crate::report::{
    csv_rows, exit_code_for, run_pipeline, CsvRow, PipelineConfig, PointwiseRecord, UniformRecord,
    EXIT_CERTIFICATE_FAILURE, EXIT_INVALID_INPUT, EXIT_NUMERICAL_FAILURE, EXIT_PASS,
};
use crate::vna::{make_state, Algebra, LOneElement, State};

pub const SUITE_SCHEMA: &str = "ncmaxerg/suite/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub count: usize,
    /// Block sizes; instances cycle through each `M_d` and, for several sizes, their direct sum.
    pub dims: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub trace_range: (f64, f64),
    pub density_floor: f64,
    pub n_max: usize,
    pub horizon: usize,
    pub check_horizon: usize,
    pub cluster_tol: f64,
    pub window: usize,
    pub strict: bool,
    pub tol: Option<f64>,
    pub type_infinity_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 200,
            dims: vec![2, 3],
            lambdas: vec![0.1, 1.0, 10.0],
            trace_range: (0.1, 10.0),
            density_floor: 0.02,
            n_max: 12,
            horizon: 15,
            check_horizon: 60,
            cluster_tol: 1e-6,
            window: 5,
            strict: false,
            tol: None,
            type_infinity_samples: 8,
        }
    }
}

impl SuiteConfig {
    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("suite count must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("block sizes must be positive, got {:?}", self.dims)));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("lambdas must be positive, got {:?}", self.lambdas)));
        }
        let (lo, hi) = self.trace_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad trace range {:?}", self.trace_range)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// `M_d` for each size, then the direct sum of all of them.
    pub fn signatures(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.dims.iter().map(|&d| vec![d]).collect();
        if self.dims.len() > 1 {
            out.push(self.dims.clone());
        }
        out
    }
}

/// One generated instance.
#[derive(Clone, Debug)]
pub struct SuiteInstance {
    pub index: usize,
    pub seed: u64,
    pub algebra: Algebra,
    pub state: State,
    pub map: PositiveMapModel,
    pub input: LOneElement,
    pub lambda: f64,
}

pub fn generate_instance(cfg: &SuiteConfig, index: usize) -> Result<SuiteInstance> {
    let seed = derive_seed(cfg.seed, index as u64);
    let signatures = cfg.signatures();
    let signature = signatures[index % signatures.len()].clone();
    let lambda = cfg.lambdas[(index / signatures.len()) % cfg.lambdas.len()];
    let algebra = Algebra::new(signature.clone())?;
    let mut rng = seeded_rng(seed);
    let state = make_state(&algebra, random_density(&mut rng, &signature, cfg.density_floor))?;
    let map = random_certified_map(derive_seed(seed, 1), &algebra, &state)?;
    let (lo, hi) = cfg.trace_range;
    let trace = lo * (hi / lo).powf(rand::Rng::random::<f64>(&mut rng));
    let x = random_psd(&mut rng, &signature, None);
    let input = LOneElement::new(x.scale(trace / x.trace()).into_matrix());
    Ok(SuiteInstance { index, seed, algebra, state, map, input, lambda })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateRecord {
    pub holds: bool,
    pub mass_slack: f64,
    pub order_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub seed: u64,
    pub signature: Vec<usize>,
    pub lambda: f64,
    pub a_trace: f64,
    pub pointwise: Vec<PointwiseRecord>,
    pub uniform: Option<UniformRecord>,
    pub uniform_error: Option<String>,
    /// `pre_weak(e, a, 4λ, c = 2, p = 1)` on the uniform projection.
    pub pre_weak: Option<PredicateRecord>,
    pub type_infinity_excess: f64,
    pub error: Option<String>,
    pub error_code: Option<i32>,
    pub pass: bool,
}

impl InstanceRecord {
    fn failed(index: usize, seed: u64, e: &Error) -> Self {
        Self {
            index,
            seed,
            signature: Vec::new(),
            lambda: 0.0,
            a_trace: 0.0,
            pointwise: Vec::new(),
            uniform: None,
            uniform_error: None,
            pre_weak: None,
            type_infinity_excess: 0.0,
            error: Some(e.to_string()),
            error_code: Some(exit_code_for(e)),
            pass: false,
        }
    }
}

pub fn pipeline_config(cfg: &SuiteConfig, lambda: f64) -> PipelineConfig {
    PipelineConfig {
        lambda,
        n_max: cfg.n_max,
        horizon: cfg.horizon,
        check_horizon: Some(cfg.check_horizon),
        tracial: false,
        uniform: UniformOptions {
            check_horizon: Some(cfg.check_horizon),
            cluster_tol: cfg.cluster_tol,
            window: cfg.window,
            certificate: CertificateOptions {
                tol: cfg.tol,
                rule: if cfg.strict { CutRule::Strict } else { CutRule::Conservative },
                ..Default::default()
            },
        },
    }
}

fn run_instance(cfg: &SuiteConfig, inst: &SuiteInstance) -> Result<InstanceRecord> {
    let ext = extend_l1(&inst.map, &inst.state)?;
    let out = run_pipeline(&ext, &inst.input, &pipeline_config(cfg, inst.lambda))?;
    let pointwise: Vec<PointwiseRecord> = out.pointwise.iter().map(|p| PointwiseRecord::new(p, false)).collect();
    let (uniform, uniform_error, pre_weak) = match &out.uniform {
        Ok(u) => {
            let pw = pre_weak_type_predicate(
                &u.certificate.projection,
                inst.input.rep(),
                4.0 * inst.lambda,
                2.0,
                1.0,
                &ext,
                cfg.check_horizon,
            )?;
            let record = PredicateRecord { holds: pw.holds, mass_slack: pw.mass_slack, order_slack: pw.order_slack };
            (Some(UniformRecord::new(u, true)?), None, Some(record))
        }
        Err(e) => (None, Some(e.to_string()), None),
    };
    let type_infinity = type_infinity_excess(&inst.map, cfg.type_infinity_samples)?;
    let unstable_ok = !cfg.strict || uniform_error.is_none();
    let pass = pointwise.iter().all(|p| p.pass) && uniform.as_ref().is_none_or(|u| u.pass) && unstable_ok;
    Ok(InstanceRecord {
        index: inst.index,
        seed: inst.seed,
        signature: inst.algebra.signature().to_vec(),
        lambda: inst.lambda,
        a_trace: inst.input.integral().re,
        pointwise,
        uniform,
        uniform_error,
        pre_weak,
        type_infinity_excess: type_infinity,
        error: None,
        error_code: None,
        pass,
    })
}

fn evaluate(cfg: &SuiteConfig, index: usize) -> InstanceRecord {
    let seed = derive_seed(cfg.seed, index as u64);
    match generate_instance(cfg, index).and_then(|inst| run_instance(cfg, &inst)) {
        Ok(r) => r,
        Err(e) => InstanceRecord::failed(index, seed, &e),
    }
}

/// Evaluate every instance; the result is ordered by index whatever the execution mode.
pub fn run_instances(cfg: &SuiteConfig, execution: Execution) -> Vec<InstanceRecord> {
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..cfg.count).into_par_iter().map(|i| evaluate(cfg, i)).collect()
        }
        _ => (0..cfg.count).map(|i| evaluate(cfg, i)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub pass_rate: f64,
    pub pointwise_pass_rate: f64,
    /// Among instances with a stable limit.
    pub uniform_pass_rate: f64,
    pub no_stable_limit_rate: f64,
    /// Among instances with a stable limit.
    pub pre_weak_rate: f64,
    pub type_infinity_pass_rate: f64,
    pub error_count: usize,
    pub worst_pointwise_slack: f64,
    pub worst_uniform_slack: f64,
    pub worst_type_infinity_excess: f64,
    pub median_sweeps: f64,
    pub median_gap: f64,
    pub max_gap: f64,
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn aggregate(records: &[InstanceRecord]) -> Aggregate {
    let ok: Vec<&InstanceRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let stable: Vec<&&InstanceRecord> = ok.iter().filter(|r| r.uniform.is_some()).collect();
    let pointwise = ok.iter().flat_map(|r| r.pointwise.iter());
    let min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let sweeps: Vec<f64> = ok.iter().flat_map(|r| r.pointwise.iter().map(|p| p.sweeps as f64)).collect();
    let gaps: Vec<f64> = ok.iter().flat_map(|r| r.pointwise.iter().map(|p| p.gap)).collect();
    let worst_pointwise = min(&mut pointwise.clone().map(|p| p.worst_gated_slack));
    let worst_uniform = min(&mut stable.iter().map(|r| r.uniform.as_ref().unwrap().worst_gated_slack));
    Aggregate {
        count: records.len(),
        pass_rate: rate(records.iter().filter(|r| r.pass).count(), records.len()),
        pointwise_pass_rate: rate(ok.iter().filter(|r| r.pointwise.iter().all(|p| p.pass)).count(), records.len()),
        uniform_pass_rate: rate(stable.iter().filter(|r| r.uniform.as_ref().unwrap().pass).count(), stable.len()),
        no_stable_limit_rate: 1.0 - rate(stable.len(), ok.len()),
        pre_weak_rate: rate(
            stable.iter().filter(|r| r.pre_weak.as_ref().is_some_and(|p| p.holds)).count(),
            stable.len(),
        ),
        type_infinity_pass_rate: rate(ok.iter().filter(|r| r.type_infinity_excess <= PREDICATE_TOL).count(), ok.len()),
        error_count: records.len() - ok.len(),
        worst_pointwise_slack: if worst_pointwise.is_finite() { worst_pointwise } else { 0.0 },
        worst_uniform_slack: if worst_uniform.is_finite() { worst_uniform } else { 0.0 },
        worst_type_infinity_excess: ok.iter().map(|r| r.type_infinity_excess).fold(0.0, f64::max),
        median_sweeps: median(sweeps),
        median_gap: median(gaps.clone()),
        max_gap: gaps.into_iter().fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub schema: String,
    pub version: String,
    pub config: SuiteConfig,
    pub aggregate: Aggregate,
    pub instances: Vec<InstanceRecord>,
    pub exit_code: i32,
}

/// Exit 0 iff every instance passes; a numerical failure in any instance gives 3.
pub fn run_suite(cfg: &SuiteConfig, execution: Execution) -> Result<SuiteSummary> {
    cfg.validate()?;
    let instances = run_instances(cfg, execution);
    let aggregate = aggregate(&instances);
    let exit_code = if instances.iter().any(|r| r.error_code == Some(EXIT_NUMERICAL_FAILURE)) {
        EXIT_NUMERICAL_FAILURE
    } else if instances.iter().any(|r| r.error_code == Some(EXIT_INVALID_INPUT)) {
        EXIT_INVALID_INPUT
    } else if aggregate.pass_rate < 1.0 {
        EXIT_CERTIFICATE_FAILURE
    } else {
        EXIT_PASS
    };
    Ok(SuiteSummary {
        schema: SUITE_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        aggregate,
        instances,
        exit_code,
    })
}

pub fn parse_summary(text: &str) -> Result<SuiteSummary> {
    let summary: SuiteSummary =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed suite summary: {e}")))?;
    if summary.schema != SUITE_SCHEMA {
        return Err(Error::InvalidArgument(format!("unsupported suite schema {:?}", summary.schema)));
    }
    Ok(summary)
}

pub fn summary_csv_rows(summary: &SuiteSummary) -> Vec<CsvRow> {
    summary.instances.iter().flat_map(|r| csv_rows(r.index, &r.pointwise, r.uniform.as_ref())).collect()
}
