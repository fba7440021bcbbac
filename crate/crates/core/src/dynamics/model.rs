use crate::error::{Error, Result};
use crate::matalg::{BlockMatrix, Hermitian, Mat, SuperOp};
use crate::vna::Algebra;

/// How positivity of a map is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pedigree {
    /// Positive by construction: Kraus form, conditional expectation, Markov tensor, or mixtures.
    ConstructedPositive,
    /// Positivity observed on sampled rank-one positives (necessary, not sufficient).
    SampledPositive,
    Unverified,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    Identity,
    Kraus,
    MarkovTensor,
    ConditionalExpectation { modular_invariant: bool },
    Explicit,
    Mixture,
}

/// One term `x ↦ w V* x_from V` landing in block `to_block`; `V` is `n_from × n_to`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausTerm {
    pub from_block: usize,
    pub to_block: usize,
    pub weight: f64,
    pub op: Mat,
}

/// A hermiticity-preserving linear map on the algebra, stored as a dense superoperator.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveMapModel {
    op: SuperOp,
    pedigree: Pedigree,
    kind: MapKind,
}

const HERMITICITY_TOL: f64 = 1e-10;

impl PositiveMapModel {
    pub fn identity(algebra: &Algebra) -> Self {
        Self {
            op: SuperOp::identity(algebra.signature()),
            pedigree: Pedigree::ConstructedPositive,
            kind: MapKind::Identity,
        }
    }

    pub fn from_kraus(algebra: &Algebra, terms: &[KrausTerm]) -> Result<Self> {
        let dims = algebra.signature();
        for (i, t) in terms.iter().enumerate() {
            if t.from_block >= dims.len() || t.to_block >= dims.len() {
                return Err(Error::DimensionMismatch(format!("Kraus term {i} references a missing block")));
            }
            if t.op.nrows() != dims[t.from_block] || t.op.ncols() != dims[t.to_block] {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus term {i} is {}x{}, expected {}x{}",
                    t.op.nrows(),
                    t.op.ncols(),
                    dims[t.from_block],
                    dims[t.to_block]
                )));
            }
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!("Kraus term {i} has weight {}", t.weight)));
            }
            if t.op.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let terms = terms.to_vec();
        let dims_owned = dims.to_vec();
        let op = SuperOp::from_fn(dims, move |x| {
            let mut out: Vec<Mat> = dims_owned.iter().map(|&n| Mat::zeros(n, n)).collect();
            for t in &terms {
                let img = t.op.adjoint() * x.block(t.from_block) * &t.op;
                out[t.to_block] += img * crate::matalg::C64::new(t.weight, 0.0);
            }
            BlockMatrix::from_blocks_unchecked(out)
        });
        Ok(Self { op, pedigree: Pedigree::ConstructedPositive, kind: MapKind::Kraus })
    }

    /// Wrap an explicit superoperator. Positivity is unknown until checked.
    pub fn from_superoperator(op: SuperOp) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > HERMITICITY_TOL * op.matrix().iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return Err(Error::NotHermiticityPreserving { defect });
        }
        Ok(Self { op, pedigree: Pedigree::Unverified, kind: MapKind::Explicit })
    }

    pub(crate) fn from_parts(op: SuperOp, pedigree: Pedigree, kind: MapKind) -> Self {
        Self { op, pedigree, kind }
    }

    /// `c · T` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor {c} must be finite and nonnegative")));
        }
        Ok(Self { op: self.op.scale(c), pedigree: self.pedigree, kind: self.kind.clone() })
    }

    /// `Σ wᵢ Tᵢ` with `wᵢ ≥ 0`. The weakest pedigree among the parts is kept.
    pub fn mixture(parts: &[(f64, &PositiveMapModel)]) -> Result<Self> {
        let (first, rest) = parts.split_first().ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let mut acc = first.1.scaled(first.0)?;
        for (w, m) in rest {
            if m.dims() != acc.dims() {
                return Err(Error::DimensionMismatch("mixture of maps on different algebras".into()));
            }
            let s = m.scaled(*w)?;
            acc.op = acc.op.add(&s.op);
            acc.pedigree = weaker(acc.pedigree, s.pedigree);
        }
        acc.kind = MapKind::Mixture;
        Ok(acc)
    }

    pub fn dims(&self) -> &[usize] {
        self.op.dims()
    }

    pub fn superop(&self) -> &SuperOp {
        &self.op
    }

    pub fn pedigree(&self) -> Pedigree {
        self.pedigree
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub(crate) fn set_pedigree(&mut self, p: Pedigree) {
        self.pedigree = p;
    }

    pub fn apply(&self, x: &BlockMatrix) -> BlockMatrix {
        self.op.apply(x)
    }

    pub fn apply_hermitian(&self, x: &Hermitian) -> Hermitian {
        Hermitian::symmetrized(&self.op.apply(x.matrix()))
    }

    /// Trace adjoint `T†` with `Tr(T(x) y) = Tr(x T†(y))`.
    pub fn trace_adjoint(&self) -> SuperOp {
        self.op.hs_adjoint()
    }
}

fn weaker(a: Pedigree, b: Pedigree) -> Pedigree {
    use Pedigree::*;
    match (a, b) {
        (Unverified, _) | (_, Unverified) => Unverified,
        (SampledPositive, _) | (_, SampledPositive) => SampledPositive,
        _ => ConstructedPositive,
    }
}
