use super::objective::penalty_blocks_from_table;
use super::solver::{solve_blocks, MaximizerSolution, SolverOptions};
use crate::dynamics::ExtendedMap;
use crate::error::{Error, Result};
use crate::matalg::{cut_flags, eigh, min_eigenvalue, schatten_norm, BlockMatrix, CutRule, Hermitian, Interval};
use crate::vna::LOneElement;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CertificateKind {
    Pointwise { n: usize },
    Uniform { horizon: usize, check_horizon: usize },
    YeadonTracial { horizon: usize },
}

/// Signed slack of one inequality: nonnegative means it holds outright.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Residual {
    pub name: String,
    pub index: Option<usize>,
    pub slack: f64,
    /// Whether the certificate's pass flag depends on this residual.
    pub gated: bool,
}

impl Residual {
    fn gated(name: &str, index: Option<usize>, slack: f64) -> Self {
        Self { name: name.into(), index, slack, gated: true }
    }

    fn info(name: &str, index: Option<usize>, slack: f64) -> Self {
        Self { name: name.into(), index, slack, gated: false }
    }
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub projection: Hermitian,
    pub lambda: f64,
    pub kind: CertificateKind,
    pub residuals: Vec<Residual>,
    pub pass: bool,
    pub tolerance: f64,
}

impl Certificate {
    fn new(
        projection: Hermitian,
        lambda: f64,
        kind: CertificateKind,
        residuals: Vec<Residual>,
        tolerance: f64,
    ) -> Self {
        let pass = residuals.iter().filter(|r| r.gated).all(|r| r.slack >= -tolerance);
        Self { projection, lambda, kind, residuals, pass, tolerance }
    }

    /// Smallest gated slack, or `+∞` if nothing is gated.
    pub fn worst_gated_slack(&self) -> f64 {
        self.residuals.iter().filter(|r| r.gated).map(|r| r.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn residual(&self, name: &str, index: Option<usize>) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name && r.index == index)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateOptions {
    /// Residual gate; defaults to `1e-7 · max(1, ‖a‖₁, λ)`.
    pub tol: Option<f64>,
    /// Kernel threshold for `1 − Σ x̄_r`; defaults to `1e-8 · max(1, ‖1 − Σ x̄_r‖)`.
    pub eps_kernel: Option<f64>,
    pub rule: CutRule,
    pub solver: SolverOptions,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { tol: None, eps_kernel: None, rule: CutRule::Conservative, solver: SolverOptions::default() }
    }
}

pub fn default_tolerance(a_norm1: f64, lambda: f64) -> f64 {
    1e-7 * a_norm1.max(lambda).max(1.0)
}

/// The kernel cut of `z = 1 − Σ x̄_r`.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub projection: Hermitian,
    pub z: Hermitian,
    pub eps_kernel: f64,
    /// `‖(1 − e)(1 − Σ x̄_r)‖_op`, the defect in `1 − e = (1 − e) Σ x̄_r`.
    pub identity_residual: f64,
    /// Smallest eigenvalue of `z` kept in the projection (`+∞` if none).
    pub smallest_kept: f64,
    /// Largest eigenvalue of `z` sent to the kernel (`−∞` if none).
    pub largest_dropped: f64,
}

/// `e_n = χ_{(ε,∞)}(1 − Σ x̄_r)`. Eigenvalues within `ε/2` of the cut are
/// ambiguous: excluded under the conservative rule, an error under the strict one.
pub fn extract_projection(solution: &MaximizerSolution, eps_kernel: Option<f64>, rule: CutRule) -> Result<Extraction> {
    let total = solution.point.sum();
    let one = Hermitian::identity(&total.dims());
    let z = one.sub(&total);
    let spec = eigh(&z)?;
    let eps = eps_kernel.unwrap_or(1e-8 * spec.spectral_radius().max(1.0));
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_kernel must be positive, got {eps}")));
    }
    let flags = cut_flags(&spec, &Interval::above(eps), 0.5 * eps, rule)?;
    let projection = spec.reconstruct_indexed(|bi, j, _| if flags[bi][j] { 1.0 } else { 0.0 });
    let mut smallest_kept = f64::INFINITY;
    let mut largest_dropped = f64::NEG_INFINITY;
    for (bi, b) in spec.blocks().iter().enumerate() {
        for (j, &s) in b.values.iter().enumerate() {
            if flags[bi][j] {
                smallest_kept = smallest_kept.min(s);
            } else {
                largest_dropped = largest_dropped.max(s);
            }
        }
    }
    let complement = one.sub(&projection);
    let identity_residual = schatten_norm(&(complement.matrix() * z.matrix()), f64::INFINITY)?;
    Ok(Extraction { projection, z, eps_kernel: eps, identity_residual, smallest_kept, largest_dropped })
}

/// A solved instance `a, λ, ext` with its Cesàro table.
pub(crate) struct Instance<'a> {
    pub ext: &'a ExtendedMap,
    pub a: Hermitian,
    pub lambda: f64,
    pub table: Vec<Hermitian>,
    pub a_trace: f64,
    pub tol: f64,
}

impl<'a> Instance<'a> {
    pub fn new(ext: &'a ExtendedMap, a: &LOneElement, lambda: f64, r_max: usize, tol: Option<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        if a.rep().dims() != ext.dims() {
            return Err(Error::DimensionMismatch(format!(
                "input has signature {:?}, map acts on {:?}",
                a.rep().dims(),
                ext.dims()
            )));
        }
        let a_h = a.hermitian()?;
        let spec = eigh(&a_h)?;
        let a_norm1: f64 = spec.eigenvalues().map(f64::abs).sum();
        if spec.min() < -1e-9 * spec.spectral_radius().max(1.0) {
            return Err(Error::InvalidArgument(format!("input is not positive (minimum eigenvalue {:e})", spec.min())));
        }
        let table = ext.cesaro_table_hermitian(&a_h, r_max);
        Ok(Self {
            ext,
            a_trace: a_h.trace(),
            a: a_h,
            lambda,
            table,
            tol: tol.unwrap_or_else(|| default_tolerance(a_norm1, lambda)),
        })
    }

    pub fn extend_table(&mut self, r_max: usize) {
        if self.table.len() <= r_max {
            self.table = self.ext.cesaro_table_hermitian(&self.a, r_max);
        }
    }

    fn density(&self) -> &Hermitian {
        self.ext.reference().density()
    }

    pub fn solve(&self, n: usize, opts: &SolverOptions) -> Result<MaximizerSolution> {
        solve_blocks(penalty_blocks_from_table(&self.table, self.density(), self.lambda, n), opts)
    }

    /// `min_eig(λ e d e − e S_r e)` for `r = 0..=n`.
    fn order_slacks(&self, e: &Hermitian, n: usize) -> Result<Vec<f64>> {
        let ede = self.density().congruence(e).scale(self.lambda);
        (0..=n).map(|r| min_eigenvalue(&ede.sub(&self.table[r].congruence(e)))).collect()
    }

    /// `Tr(d (1 − e))`.
    fn complement_mass(&self, e: &Hermitian) -> f64 {
        let one = Hermitian::identity(&e.dims());
        self.density().trace_with(&one.sub(e))
    }

    pub fn pointwise(&self, n: usize, opts: &CertificateOptions) -> Result<PointwiseOutcome> {
        let solution = self.solve(n, &opts.solver)?;
        let extraction = extract_projection(&solution, opts.eps_kernel, opts.rule)?;
        let e = &extraction.projection;
        let mut residuals: Vec<Residual> = self
            .order_slacks(e, n)?
            .into_iter()
            .enumerate()
            .map(|(r, s)| Residual::gated("order", Some(r), s))
            .collect();
        let mass = self.complement_mass(e);
        residuals.push(Residual::gated("mass", None, 2.0 / self.lambda * self.a_trace - mass));
        residuals.push(Residual::info("mass_tight", None, self.a_trace / self.lambda - mass));
        let certificate =
            Certificate::new(e.clone(), self.lambda, CertificateKind::Pointwise { n }, residuals, self.tol);
        Ok(PointwiseOutcome { certificate, solution, extraction })
    }
}

#[derive(Clone, Debug)]
pub struct PointwiseOutcome {
    pub certificate: Certificate,
    pub solution: MaximizerSolution,
    pub extraction: Extraction,
}

/// Solve at level `n`, extract `e_n`, and check `e_n S_r(a) e_n ⪯ λ e_n d e_n` for
/// `r ≤ n` together with `Tr(d(1 − e_n)) ≤ (2/λ) Tr a`.
pub fn pointwise_certificate(
    a: &LOneElement,
    lambda: f64,
    n: usize,
    ext: &ExtendedMap,
    opts: &CertificateOptions,
) -> Result<PointwiseOutcome> {
    Instance::new(ext, a, lambda, n, opts.tol)?.pointwise(n, opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformOptions {
    /// Largest `r` in the trace bound; defaults to `4 · horizon`.
    pub check_horizon: Option<usize>,
    pub cluster_tol: f64,
    pub window: usize,
    pub certificate: CertificateOptions,
}

impl Default for UniformOptions {
    fn default() -> Self {
        Self { check_horizon: None, cluster_tol: 1e-6, window: 5, certificate: CertificateOptions::default() }
    }
}

/// The limit point `h` of the projections `e_1, …, e_horizon` and its cut.
#[derive(Clone, Debug)]
pub struct LimitDiagnostics {
    pub h: Hermitian,
    /// `‖e_{n+1} − e_n‖_op` along the sequence.
    pub distances: Vec<f64>,
    /// Levels `n` of the projections averaged into `h`.
    pub cluster: Vec<usize>,
    pub window: usize,
    /// `g = ∫_{1/2}^1 s^{-1} de_s`, absent when no limit was found.
    pub inverse_cut: Option<Hermitian>,
    pub inverse_cut_norm: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct UniformOutcome {
    pub certificate: Certificate,
    pub diagnostics: LimitDiagnostics,
    pub pointwise: Vec<PointwiseOutcome>,
}

fn op_distance(a: &Hermitian, b: &Hermitian) -> Result<f64> {
    schatten_norm(&(a.matrix() - b.matrix()), f64::INFINITY)
}

/// Largest cluster of projections within `cluster_tol` of a center; ties go to the latest center.
fn limit_point(
    projections: &[(usize, Hermitian)],
    cluster_tol: f64,
    window: usize,
) -> Result<(LimitDiagnostics, bool)> {
    let count = projections.len();
    let mut dist = vec![vec![0.0; count]; count];
    for i in 0..count {
        for j in (i + 1)..count {
            let d = op_distance(&projections[i].1, &projections[j].1)?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut best: Vec<usize> = Vec::new();
    for row in &dist {
        let members: Vec<usize> = (0..count).filter(|&j| row[j] <= cluster_tol).collect();
        if members.len() >= best.len() {
            best = members;
        }
    }
    let dims = projections[0].1.dims();
    let mut sum = BlockMatrix::zeros(&dims);
    for &j in &best {
        sum = &sum + projections[j].1.matrix();
    }
    let h = Hermitian::symmetrized(&sum.scale(1.0 / best.len().max(1) as f64));
    let distances = (1..count).map(|i| dist[i - 1][i]).collect();
    let stable = best.len() >= window;
    Ok((
        LimitDiagnostics {
            h,
            distances,
            cluster: best.iter().map(|&j| projections[j].0).collect(),
            window,
            inverse_cut: None,
            inverse_cut_norm: None,
        },
        stable,
    ))
}

const HALF_CUT_BAND: f64 = 1e-8;

/// `e = χ_{(1/2, 1]}(h)` and `g = ∫_{1/2}^1 s^{-1} de_s`, with residuals for
/// `0 ⪯ h ⪯ 1`, `‖g‖ ≤ 2` and `e = g h`.
fn half_cut(diag: &mut LimitDiagnostics, residuals: &mut Vec<Residual>) -> Result<Hermitian> {
    let spec = eigh(&diag.h)?;
    let flags = cut_flags(&spec, &Interval::half_open(0.5, 1.0), HALF_CUT_BAND, CutRule::Conservative)?;
    let e = spec.reconstruct_indexed(|bi, j, _| if flags[bi][j] { 1.0 } else { 0.0 });
    let g = spec.reconstruct_indexed(|bi, j, s| if flags[bi][j] { 1.0 / s } else { 0.0 });
    let g_norm = schatten_norm(g.matrix(), f64::INFINITY)?;
    let gh = Hermitian::symmetrized(&(g.matrix() * diag.h.matrix()));
    residuals.push(Residual::gated("h_lower", None, spec.min()));
    residuals.push(Residual::gated("h_upper", None, 1.0 - spec.max()));
    residuals.push(Residual::gated("inverse_cut_norm", None, 2.0 - g_norm));
    residuals.push(Residual::gated("inverse_cut_identity", None, -op_distance(&e, &gh)?));
    diag.inverse_cut = Some(g);
    diag.inverse_cut_norm = Some(g_norm);
    Ok(e)
}

impl<'a> Instance<'a> {
    fn projections(&self, horizon: usize, opts: &CertificateOptions) -> Result<Vec<PointwiseOutcome>> {
        (1..=horizon).map(|n| self.pointwise(n, opts)).collect()
    }

    pub fn uniform(&mut self, horizon: usize, opts: &UniformOptions) -> Result<UniformOutcome> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        let check_horizon = opts.check_horizon.unwrap_or(4 * horizon);
        self.extend_table(check_horizon.max(horizon));
        let pointwise = self.projections(horizon, &opts.certificate)?;
        let pairs: Vec<(usize, Hermitian)> =
            pointwise.iter().enumerate().map(|(i, p)| (i + 1, p.extraction.projection.clone())).collect();
        let (mut diagnostics, stable) = limit_point(&pairs, opts.cluster_tol, opts.window)?;
        if !stable {
            return Err(Error::NoStableLimit { diagnostics: Box::new(diagnostics) });
        }
        let mut residuals = Vec::new();
        let e = half_cut(&mut diagnostics, &mut residuals)?;
        for r in 0..=check_horizon {
            let compressed = self.table[r].congruence(&e).trace();
            residuals.push(Residual::gated("trace_bound", Some(r), 4.0 * self.lambda - compressed));
        }
        let mass = self.complement_mass(&e);
        residuals.push(Residual::gated("mass", None, 2.0 / self.lambda * self.a_trace - mass));
        let certificate =
            Certificate::new(e, self.lambda, CertificateKind::Uniform { horizon, check_horizon }, residuals, self.tol);
        Ok(UniformOutcome { certificate, diagnostics, pointwise })
    }

    pub fn yeadon(&mut self, horizon: usize, opts: &UniformOptions) -> Result<UniformOutcome> {
        if !self.ext.reference().is_tracial_weight() {
            return Err(Error::NotTracial);
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        self.extend_table(horizon);
        let pointwise = self.projections(horizon, &opts.certificate)?;
        let mut residuals = Vec::new();
        for (i, p) in pointwise.iter().enumerate() {
            let order = p
                .certificate
                .residuals
                .iter()
                .filter(|r| r.name == "order")
                .map(|r| r.slack)
                .fold(f64::INFINITY, f64::min);
            residuals.push(Residual::gated("pointwise_order", Some(i + 1), order));
            let mass = p.certificate.residual("mass", None).expect("pointwise mass residual").slack;
            residuals.push(Residual::gated("pointwise_mass", Some(i + 1), mass));
        }
        let pairs: Vec<(usize, Hermitian)> =
            pointwise.iter().enumerate().map(|(i, p)| (i + 1, p.extraction.projection.clone())).collect();
        let (mut diagnostics, stable) = limit_point(&pairs, opts.cluster_tol, opts.window)?;
        if !stable {
            return Err(Error::NoStableLimit { diagnostics: Box::new(diagnostics) });
        }
        let e = half_cut(&mut diagnostics, &mut residuals)?;
        let bound = e.scale(2.0 * self.lambda);
        for r in 0..=horizon {
            let slack = min_eigenvalue(&bound.sub(&self.table[r].congruence(&e)))?;
            residuals.push(Residual::gated("operator_bound", Some(r), slack));
        }
        let mass = self.complement_mass(&e);
        residuals.push(Residual::gated("mass", None, 2.0 / self.lambda * self.a_trace - mass));
        let certificate =
            Certificate::new(e, self.lambda, CertificateKind::YeadonTracial { horizon }, residuals, self.tol);
        Ok(UniformOutcome { certificate, diagnostics, pointwise })
    }
}

/// Projections `e_1, …, e_horizon`, their stabilized limit `h`, the cut
/// `e = χ_{(1/2,1]}(h)`, and the checks `Tr(e S_r(a) e) ≤ 4λ` for
/// `r ≤ check_horizon` and `Tr(d(1 − e)) ≤ (2/λ) Tr a`.
pub fn uniform_projection(
    a: &LOneElement,
    lambda: f64,
    horizon: usize,
    ext: &ExtendedMap,
    opts: &UniformOptions,
) -> Result<UniformOutcome> {
    Instance::new(ext, a, lambda, horizon, opts.certificate.tol)?.uniform(horizon, opts)
}

/// Tracial path: `d = 1`, `e_n S_r(a) e_n ⪯ λ e_n`, and the operator bound
/// `e S_r(a) e ⪯ 2λ e` for `r ≤ horizon`.
pub fn yeadon_tracial(
    a: &LOneElement,
    lambda: f64,
    horizon: usize,
    ext: &ExtendedMap,
    opts: &UniformOptions,
) -> Result<UniformOutcome> {
    Instance::new(ext, a, lambda, horizon, opts.certificate.tol)?.yeadon(horizon, opts)
}
