//! Scenario files: one verification problem in a versioned JSON schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    example_cond_expectation, example_tensor_markov, random_certified_map, KrausTerm, PositiveMapModel, SubalgebraSpec,
};
use crate::error::{Error, Result};
use crate::matalg::{BlockMatrix, Hermitian, Mat, SuperOp, C64};
use crate::random::{derive_seed, random_psd, seeded_rng};
use crate::vna::{embed_l1, make_state, Algebra, LOneElement, Reference, State, Weight};

pub const SCENARIO_SCHEMA: &str = "ncmaxerg/scenario/v1";

/// Block-diagonal matrix data: per block, rows of real parts and optional imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixData {
    pub re: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<Vec<f64>>>>,
}

impl MatrixData {
    pub fn from_block_matrix(m: &BlockMatrix) -> Self {
        let part = |f: fn(&C64) -> f64| -> Vec<Vec<Vec<f64>>> {
            m.blocks()
                .iter()
                .map(|b| (0..b.nrows()).map(|i| (0..b.ncols()).map(|j| f(&b[(i, j)])).collect()).collect())
                .collect()
        };
        let im = part(|z| z.im);
        let has_im = im.iter().flatten().flatten().any(|&v| v != 0.0);
        Self { re: part(|z| z.re), im: has_im.then_some(im) }
    }

    pub fn to_block_matrix(&self) -> Result<BlockMatrix> {
        if let Some(im) = &self.im {
            if im.len() != self.re.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} real blocks but {} imaginary blocks",
                    self.re.len(),
                    im.len()
                )));
            }
        }
        let mut blocks = Vec::with_capacity(self.re.len());
        for (bi, rows) in self.re.iter().enumerate() {
            let n = rows.len();
            let im = self.im.as_ref().map(|im| &im[bi]);
            if rows.iter().any(|r| r.len() != n)
                || im.is_some_and(|im| im.len() != n || im.iter().any(|r| r.len() != n))
            {
                return Err(Error::DimensionMismatch(format!("block {bi} is not square")));
            }
            blocks.push(Mat::from_fn(n, n, |i, j| C64::new(rows[i][j], im.map_or(0.0, |im| im[i][j]))));
        }
        BlockMatrix::new(blocks)
    }
}

/// A rectangular complex matrix given by rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectData {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl RectData {
    fn to_matrix(&self) -> Result<Mat> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, |r| r.len());
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == rows && m.iter().all(|r| r.len() == cols);
        if !shape_ok(&self.re) || self.im.as_ref().is_some_and(|im| !shape_ok(im)) {
            return Err(Error::DimensionMismatch("ragged Kraus operator".into()));
        }
        Ok(Mat::from_fn(rows, cols, |i, j| C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausSpec {
    pub from_block: usize,
    pub to_block: usize,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    pub op: RectData,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Kraus {
        terms: Vec<KrausSpec>,
    },
    /// `signature` and `state` describe the inner algebra; the scenario runs on
    /// `|Ω|` copies of it with state `μ ⊗ inner`.
    MarkovTensor {
        kernel: Vec<Vec<f64>>,
        measure: Vec<f64>,
    },
    CondExp {
        subalgebra: SubalgebraSpec,
    },
    /// Dense matrix on the coefficient space (blocks concatenated, column-major within a block).
    ExplicitSuperoperator {
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// The L¹ representative itself.
    Blocks { value: MatrixData },
    /// `d^{1/2} x d^{1/2}` for an algebra element `x` (the unit by default).
    Embed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        element: Option<MatrixData>,
    },
    /// A random positive element with the given trace.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        trace: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    State,
    TracialWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual gate; defaults to `1e-7 · max(1, ‖a‖₁, λ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_kernel: Option<f64>,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_cluster_tol() -> f64 {
    1e-6
}

fn default_window() -> usize {
    5
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gate: None, eps_kernel: None, cluster_tol: default_cluster_tol(), window: default_window() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub signature: Vec<usize>,
    #[serde(default)]
    pub mode: Mode,
    /// Density of the state; required in state mode, absent in tracial mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<MatrixData>,
    pub map: MapSpec,
    pub input: InputSpec,
    pub lambda: f64,
    pub n_max: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_horizon: Option<usize>,
    /// Base seed for random map and input specs that carry no seed of their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A scenario resolved into the objects the pipeline runs on.
pub struct Resolved {
    pub algebra: Algebra,
    pub reference: Reference,
    pub map: PositiveMapModel,
    pub input: LOneElement,
    pub seed: u64,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed scenario: {e}")))?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unsupported schema {:?}, expected {SCENARIO_SCHEMA:?}",
                self.schema
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.tolerances.window == 0 || !(self.tolerances.cluster_tol >= 0.0) {
            return Err(Error::InvalidArgument("window must be positive and cluster_tol nonnegative".into()));
        }
        match (self.mode, &self.state) {
            (Mode::State, None) => Err(Error::InvalidArgument("state mode requires a state density".into())),
            (Mode::TracialWeight, Some(_)) => {
                Err(Error::InvalidArgument("tracial_weight mode takes no state density".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let seed = self.base_seed();
        let inner = Algebra::new(self.signature.clone())?;
        let (algebra, reference, map) = match (&self.map, self.mode) {
            (MapSpec::MarkovTensor { kernel, measure }, Mode::State) => {
                let inner_state = self.state_on(&inner)?;
                let (algebra, state, map) = example_tensor_markov(kernel, measure, &inner_state)?;
                (algebra, Reference::State(state), map)
            }
            (MapSpec::MarkovTensor { .. }, Mode::TracialWeight) => {
                return Err(Error::InvalidArgument("markov_tensor maps need a state".into()));
            }
            (spec, mode) => {
                let reference = match mode {
                    Mode::State => Reference::State(self.state_on(&inner)?),
                    Mode::TracialWeight => Reference::Weight(Weight::tracial(&inner)),
                };
                let map = build_map(spec, &inner, &reference, seed)?;
                (inner, reference, map)
            }
        };
        let input = self.build_input(&algebra, &reference, seed)?;
        Ok(Resolved { algebra, reference, map, input, seed })
    }

    fn state_on(&self, algebra: &Algebra) -> Result<State> {
        let data = self.state.as_ref().ok_or_else(|| Error::InvalidArgument("missing state density".into()))?;
        make_state(algebra, Hermitian::new(data.to_block_matrix()?)?)
    }

    fn build_input(&self, algebra: &Algebra, reference: &Reference, seed: u64) -> Result<LOneElement> {
        let dims = algebra.signature();
        match &self.input {
            InputSpec::Blocks { value } => {
                let m = value.to_block_matrix()?;
                algebra.check(&m)?;
                Ok(LOneElement::new(m))
            }
            InputSpec::Embed { element } => {
                let x = match element {
                    Some(data) => data.to_block_matrix()?,
                    None => BlockMatrix::identity(dims),
                };
                algebra.check(&x)?;
                match reference {
                    Reference::State(state) => embed_l1(&x, state),
                    Reference::Weight(_) => Ok(LOneElement::new(x.sandwich(reference.power(0.5).matrix()))),
                }
            }
            InputSpec::Random { seed: own, trace } => {
                if !(*trace > 0.0 && trace.is_finite()) {
                    return Err(Error::InvalidArgument(format!("input trace must be positive, got {trace}")));
                }
                let mut rng = seeded_rng(own.unwrap_or_else(|| derive_seed(seed, 2)));
                let x = random_psd(&mut rng, dims, None);
                Ok(LOneElement::new(x.scale(trace / x.trace()).into_matrix()))
            }
        }
    }
}

fn build_map(spec: &MapSpec, algebra: &Algebra, reference: &Reference, seed: u64) -> Result<PositiveMapModel> {
    match spec {
        MapSpec::Identity => Ok(PositiveMapModel::identity(algebra)),
        MapSpec::Kraus { terms } => {
            let terms = terms
                .iter()
                .map(|t| {
                    Ok(KrausTerm {
                        from_block: t.from_block,
                        to_block: t.to_block,
                        weight: t.weight,
                        op: t.op.to_matrix()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            PositiveMapModel::from_kraus(algebra, &terms)
        }
        MapSpec::CondExp { subalgebra } => {
            let state = match reference {
                Reference::State(s) => s.clone(),
                Reference::Weight(_) => State::maximally_mixed(algebra)?,
            };
            example_cond_expectation(&state, subalgebra)
        }
        MapSpec::ExplicitSuperoperator { re, im } => {
            let op = RectData { re: re.clone(), im: im.clone() }.to_matrix()?;
            PositiveMapModel::from_superoperator(SuperOp::from_matrix(algebra.signature(), op)?)
        }
        MapSpec::Random { seed: own } => {
            random_certified_map(own.unwrap_or_else(|| derive_seed(seed, 1)), algebra, reference.clone())
        }
        MapSpec::MarkovTensor { .. } => unreachable!("handled by the caller"),
    }
}

/// Matrix data for a single square block, used by scenario writers.
pub fn single_block(m: &Mat) -> MatrixData {
    MatrixData::from_block_matrix(&BlockMatrix::from_blocks_unchecked(vec![m.clone()]))
}

impl Scenario {
    /// The unit-input identity scenario on `M_n` with the maximally mixed state.
    pub fn identity_example(n: usize, lambda: f64) -> Self {
        let rho = Mat::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        Scenario {
            schema: SCENARIO_SCHEMA.into(),
            signature: vec![n],
            mode: Mode::State,
            state: Some(single_block(&rho)),
            map: MapSpec::Identity,
            input: InputSpec::Embed { element: None },
            lambda,
            n_max: 3,
            horizon: 6,
            check_horizon: None,
            seed: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_data_round_trip() {
        let mut rng = seeded_rng(4);
        let m = crate::random::random_block_matrix(&mut rng, &[2, 1]);
        let back = MatrixData::from_block_matrix(&m).to_block_matrix().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn identity_example_resolves() {
        let s = Scenario::identity_example(2, 2.0);
        let text = serde_json::to_string(&s).unwrap();
        let parsed = parse_scenario(&text).unwrap();
        assert_eq!(parsed, s);
        let r = parsed.resolve().unwrap();
        assert!((r.input.rep().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_eigenvalue_is_not_faithful() {
        let mut s = Scenario::identity_example(2, 2.0);
        s.state = Some(single_block(&Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ]))));
        assert!(matches!(s.resolve(), Err(Error::NotFaithful { .. })));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let mut s = Scenario::identity_example(2, 1.0);
        s.schema = "other".into();
        assert!(matches!(s.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn markov_tensor_lifts_the_signature() {
        let mut s = Scenario::identity_example(1, 1.0);
        s.state = Some(single_block(&Mat::identity(1, 1)));
        s.map = MapSpec::MarkovTensor { kernel: vec![vec![0.5, 0.5], vec![0.5, 0.5]], measure: vec![0.5, 0.5] };
        let r = s.resolve().unwrap();
        assert_eq!(r.algebra.signature(), &[1, 1]);
    }
}
