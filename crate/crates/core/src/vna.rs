//! Finite-dimensional von Neumann algebras with a faithful state.
//!
//! The commutant weight is fixed as `ψ(·) = φ(J·J)`, so the spatial derivative
//! of the state is its modular operator and the density `rho` is its L¹
//! representative. Integration `∫·dψ` on L¹ representatives is the trace.

use crate::error::{Error, Result};
use crate::matalg::{eigh, schatten_norm, BlockMatrix, Hermitian, SpectralData, C64};

/// Direct sum `M_{n₁} ⊕ … ⊕ M_{n_k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Algebra {
    signature: Vec<usize>,
}

impl Algebra {
    /// Default cap on `Σ nᵢ²`.
    pub const DEFAULT_MAX_DIMENSION: usize = 4096;

    pub fn new(signature: Vec<usize>) -> Result<Self> {
        Self::with_max_dimension(signature, Self::DEFAULT_MAX_DIMENSION)
    }

    pub fn with_max_dimension(signature: Vec<usize>, max_dimension: usize) -> Result<Self> {
        if signature.is_empty() {
            return Err(Error::InvalidAlgebra("empty signature".into()));
        }
        if signature.contains(&0) {
            return Err(Error::InvalidAlgebra(format!("zero block in signature {signature:?}")));
        }
        let total: usize = signature.iter().map(|n| n * n).sum();
        if total > max_dimension {
            return Err(Error::InvalidAlgebra(format!(
                "dimension {total} exceeds the configured maximum {max_dimension}"
            )));
        }
        Ok(Self { signature })
    }

    /// The full matrix algebra `M_n`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn signature(&self) -> &[usize] {
        &self.signature
    }

    /// `Σ nᵢ²`.
    pub fn dimension(&self) -> usize {
        self.signature.iter().map(|n| n * n).sum()
    }

    /// Hilbert-space dimension `Σ nᵢ`.
    pub fn unit_trace(&self) -> usize {
        self.signature.iter().sum()
    }

    pub fn identity(&self) -> Hermitian {
        Hermitian::identity(&self.signature)
    }

    pub fn zeros(&self) -> Hermitian {
        Hermitian::zeros(&self.signature)
    }

    pub fn check(&self, x: &BlockMatrix) -> Result<()> {
        if x.dims() == self.signature {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "element has signature {:?}, algebra is {:?}",
                x.dims(),
                self.signature
            )))
        }
    }
}

/// Faithful normal state `φ = Tr(rho ·)` with cached powers of `rho`.
#[derive(Clone, Debug)]
pub struct State {
    algebra: Algebra,
    rho: Hermitian,
    spectrum: SpectralData,
    sqrt: Hermitian,
    inv_sqrt: Hermitian,
}

impl State {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const MAX_CONDITION: f64 = 1e12;

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn rho(&self) -> &Hermitian {
        &self.rho
    }

    pub fn spectrum(&self) -> &SpectralData {
        &self.spectrum
    }

    pub fn sqrt(&self) -> &Hermitian {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &Hermitian {
        &self.inv_sqrt
    }

    /// `rho^s` for any real `s`.
    pub fn power(&self, s: f64) -> Hermitian {
        self.spectrum.reconstruct(|v| v.powf(s))
    }

    /// `φ(x) = Tr(rho x)`.
    pub fn phi(&self, x: &Hermitian) -> f64 {
        self.rho.trace_with(x)
    }

    pub fn maximally_mixed(algebra: &Algebra) -> Result<State> {
        let n = algebra.unit_trace() as f64;
        make_state(algebra, algebra.identity().scale(1.0 / n))
    }
}

pub fn make_state(algebra: &Algebra, rho: Hermitian) -> Result<State> {
    algebra.check(rho.matrix())?;
    let spectrum = eigh(&rho)?;
    let (lo, hi) = (spectrum.min(), spectrum.max());
    if lo <= 0.0 {
        return Err(Error::NotFaithful { min_eigenvalue: lo });
    }
    let trace = rho.trace();
    if (trace - 1.0).abs() > State::TRACE_TOL {
        return Err(Error::NotNormalized { trace });
    }
    let condition = hi / lo;
    if condition > State::MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let sqrt = spectrum.reconstruct(f64::sqrt);
    let inv_sqrt = spectrum.reconstruct(|v| 1.0 / v.sqrt());
    Ok(State { algebra: algebra.clone(), rho, spectrum, sqrt, inv_sqrt })
}

/// Unnormalized faithful weight; `rho_w = 1` is the trace.
#[derive(Clone, Debug)]
pub struct Weight {
    algebra: Algebra,
    rho: Hermitian,
    spectrum: SpectralData,
    tracial: bool,
}

impl Weight {
    pub fn tracial(algebra: &Algebra) -> Weight {
        let rho = algebra.identity();
        let spectrum = eigh(&rho).expect("identity eigendecomposition");
        Weight { algebra: algebra.clone(), rho, spectrum, tracial: true }
    }

    pub fn new(algebra: &Algebra, rho: Hermitian) -> Result<Weight> {
        algebra.check(rho.matrix())?;
        let spectrum = eigh(&rho)?;
        if spectrum.min() <= 0.0 {
            return Err(Error::NotFaithful { min_eigenvalue: spectrum.min() });
        }
        let tracial = rho == algebra.identity();
        Ok(Weight { algebra: algebra.clone(), rho, spectrum, tracial })
    }

    pub fn is_tracial(&self) -> bool {
        self.tracial
    }

    pub fn rho(&self) -> &Hermitian {
        &self.rho
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }
}

/// The reference functional of a pipeline: a normalized state or a weight.
#[derive(Clone, Debug)]
pub enum Reference {
    State(State),
    Weight(Weight),
}

impl Reference {
    pub fn algebra(&self) -> &Algebra {
        match self {
            Reference::State(s) => s.algebra(),
            Reference::Weight(w) => w.algebra(),
        }
    }

    /// L¹ representative `d` of the reference.
    pub fn density(&self) -> &Hermitian {
        match self {
            Reference::State(s) => s.rho(),
            Reference::Weight(w) => w.rho(),
        }
    }

    fn spectrum(&self) -> &SpectralData {
        match self {
            Reference::State(s) => s.spectrum(),
            Reference::Weight(w) => &w.spectrum,
        }
    }

    pub fn power(&self, s: f64) -> Hermitian {
        match self {
            Reference::State(st) if s == 0.5 => st.sqrt().clone(),
            Reference::State(st) if s == -0.5 => st.inv_sqrt().clone(),
            _ => self.spectrum().reconstruct(|v| v.powf(s)),
        }
    }

    /// `Tr(d x)`.
    pub fn mass(&self, x: &Hermitian) -> f64 {
        self.density().trace_with(x)
    }

    /// `Tr(d)`: 1 for a state.
    pub fn total_mass(&self) -> f64 {
        self.density().trace()
    }

    pub fn is_tracial_weight(&self) -> bool {
        matches!(self, Reference::Weight(w) if w.is_tracial())
    }
}

impl From<State> for Reference {
    fn from(s: State) -> Self {
        Reference::State(s)
    }
}

impl From<&State> for Reference {
    fn from(s: &State) -> Self {
        Reference::State(s.clone())
    }
}

impl From<Weight> for Reference {
    fn from(w: Weight) -> Self {
        Reference::Weight(w)
    }
}

impl From<&Weight> for Reference {
    fn from(w: &Weight) -> Self {
        Reference::Weight(w.clone())
    }
}

/// Element of L¹(M;ψ) held by its trace-class representative.
#[derive(Clone, Debug, PartialEq)]
pub struct LOneElement {
    rep: BlockMatrix,
}

impl LOneElement {
    pub fn new(rep: BlockMatrix) -> Self {
        Self { rep }
    }

    /// A positive element; rejects representatives with eigenvalues below `−tol·max(1,‖a‖)`.
    pub fn positive(rep: Hermitian, tol: f64) -> Result<Self> {
        let spec = eigh(&rep)?;
        if spec.min() < -tol * spec.spectral_radius().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "L1 element is not positive (minimum eigenvalue {:e})",
                spec.min()
            )));
        }
        Ok(Self { rep: rep.into_matrix() })
    }

    pub fn rep(&self) -> &BlockMatrix {
        &self.rep
    }

    pub fn hermitian(&self) -> Result<Hermitian> {
        Hermitian::new(self.rep.clone())
    }

    /// `∫ a dψ = Tr(a)`.
    pub fn integral(&self) -> C64 {
        self.rep.trace()
    }

    /// `‖a‖₁`.
    pub fn norm(&self) -> Result<f64> {
        schatten_norm(&self.rep, 1.0)
    }
}

/// `d = dφ/dψ`, represented by `rho` itself (the identity for the trace).
pub fn spatial_derivative(reference: &Reference) -> LOneElement {
    LOneElement::new(reference.density().matrix().clone())
}

/// Symmetric embedding `x ↦ rho^{1/2} x rho^{1/2}`.
pub fn embed_l1(x: &BlockMatrix, state: &State) -> Result<LOneElement> {
    state.algebra().check(x)?;
    Ok(LOneElement::new(x.sandwich(state.sqrt().matrix())))
}

/// `‖rho^{1/(2p)} x rho^{1/(2p)}‖_{S_p}`; `p = ∞` is the operator norm of `x`.
pub fn kosaki_norm(x: &BlockMatrix, p: f64, state: &State) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    state.algebra().check(x)?;
    if p.is_infinite() {
        return schatten_norm(x, f64::INFINITY);
    }
    let s = if p == 1.0 { state.sqrt().clone() } else { state.power(1.0 / (2.0 * p)) };
    schatten_norm(&x.sandwich(s.matrix()), p)
}

/// Modular automorphism `σ_t(x) = rho^{it} x rho^{−it}`.
pub fn modular_flow(x: &BlockMatrix, t: f64, state: &State) -> Result<BlockMatrix> {
    state.algebra().check(x)?;
    let u = state.spectrum().reconstruct_complex(|v| C64::from_polar(1.0, t * v.ln()));
    Ok(&(&u * x) * &u.adjoint())
}
