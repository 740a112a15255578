//! The heat equation `u' - Δu = f`, `u = g` on the boundary, `u(T) = u_T` on
//! an interval or a rectangle, expanded in the Dirichlet eigenbasis.
//!
//! The boundary data enters through its Poisson lift `K(t) = K₀g(t)` and the
//! boundary yield `z_g = ⨍_0^T Δ e^{(T-s)Δ_D} K(s) ds`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duhamel::{
    duhamel_path, graded_bochner_integral, particular_path, source_yield, BochnerIntegral,
    ClusterEnd, Interpolation, SolutionPath, SourceTerm, TimeGrid,
};
use crate::error::{Error, Result};
use crate::fvp::{
    assess, compatibility_check, log_add, rounding_floor, solve_final_value, x_norm, y_norm_log,
    CompatibilityOptions, CompatibilityReport, FinalValueProblem,
};
use crate::linalg::Coefficients;
use crate::operator::{Operator, SpectralModel};
use crate::semigroup::{evolve, LogValue, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain1D {
    pub length: f64,
    pub truncation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain2DRect {
    pub lengths: [f64; 2],
    pub truncation: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatDomain {
    Interval(Domain1D),
    Rectangle(Domain2DRect),
}

impl HeatDomain {
    pub fn interval(length: f64, truncation: usize) -> Self {
        Self::Interval(Domain1D { length, truncation })
    }

    pub fn rectangle(lengths: [f64; 2], truncation: [usize; 2]) -> Self {
        Self::Rectangle(Domain2DRect { lengths, truncation })
    }

    pub fn spatial_dim(&self) -> usize {
        match self {
            Self::Interval(_) => 1,
            Self::Rectangle(_) => 2,
        }
    }

    /// Number of boundary components: the two end points of an interval, the
    /// four edges (bottom, top, left, right) of a rectangle.
    pub fn boundary_components(&self) -> usize {
        match self {
            Self::Interval(_) => 2,
            Self::Rectangle(_) => 4,
        }
    }

    /// Every Dirichlet eigenvalue below this value is kept by the truncation.
    pub fn coverage(&self) -> f64 {
        match *self {
            Self::Interval(d) => ((d.truncation + 1) as f64 * PI / d.length).powi(2),
            Self::Rectangle(d) => {
                let [l1, l2] = d.lengths;
                let [n1, n2] = d.truncation;
                let a = ((n1 + 1) as f64 * PI / l1).powi(2) + (PI / l2).powi(2);
                let b = (PI / l1).powi(2) + ((n2 + 1) as f64 * PI / l2).powi(2);
                a.min(b)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (lengths, truncation): (&[f64], &[usize]) = match self {
            Self::Interval(d) => (std::slice::from_ref(&d.length), std::slice::from_ref(&d.truncation)),
            Self::Rectangle(d) => (&d.lengths, &d.truncation),
        };
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidArgument(format!("domain lengths must be positive, got {lengths:?}")));
        }
        if truncation.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("truncation must be at least 1".into()));
        }
        Ok(())
    }
}

/// The truncated Dirichlet eigenbasis. `modes[i]` holds the mode numbers of the
/// `i`-th eigenvalue; the second entry is 0 on an interval.
#[derive(Debug, Clone)]
pub struct HeatBasis {
    pub domain: HeatDomain,
    pub modes: Vec<[usize; 2]>,
    op: Operator,
}

impl HeatBasis {
    pub fn model(&self) -> &SpectralModel {
        self.op.as_spectral().expect("heat basis is spectral")
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.model().eigenvalues()
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// `e_i` at a point of the domain.
    pub fn eigenfunction(&self, i: usize, point: &[f64]) -> f64 {
        let [j, k] = self.modes[i];
        match self.domain {
            HeatDomain::Interval(d) => (2.0 / d.length).sqrt() * (j as f64 * PI * point[0] / d.length).sin(),
            HeatDomain::Rectangle(d) => {
                let [l1, l2] = d.lengths;
                2.0 / (l1 * l2).sqrt()
                    * (j as f64 * PI * point[0] / l1).sin()
                    * (k as f64 * PI * point[1] / l2).sin()
            }
        }
    }
}

/// Eigenvalues in ascending order, ties ordered by mode numbers.
pub fn eigenbasis(domain: &HeatDomain) -> Result<HeatBasis> {
    domain.validate()?;
    let mut entries: Vec<(f64, [usize; 2])> = match *domain {
        HeatDomain::Interval(d) => (1..=d.truncation)
            .map(|j| ((j as f64 * PI / d.length).powi(2), [j, 0]))
            .collect(),
        HeatDomain::Rectangle(d) => {
            let [l1, l2] = d.lengths;
            let mut v = Vec::with_capacity(d.truncation[0] * d.truncation[1]);
            for j in 1..=d.truncation[0] {
                for k in 1..=d.truncation[1] {
                    v.push(((j as f64 * PI / l1).powi(2) + (k as f64 * PI / l2).powi(2), [j, k]));
                }
            }
            v
        }
    };
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let label = match domain {
        HeatDomain::Interval(_) => "dirichlet-interval",
        HeatDomain::Rectangle(_) => "dirichlet-rectangle",
    };
    let model = SpectralModel::new(entries.iter().map(|e| e.0).collect(), label)?;
    Ok(HeatBasis {
        domain: *domain,
        modes: entries.into_iter().map(|e| e.1).collect(),
        op: model.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// One value per component: the end points of an interval.
    PointValues,
    /// Sine coefficients along each edge of a rectangle.
    SineSeries,
}

/// Boundary traces sampled on a time grid: `components[c][i]` is the trace on
/// component `c` at node `i`, a single value for `PointValues` and the edge
/// sine coefficients for `SineSeries`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub kind: TraceKind,
    pub components: Vec<Vec<Coefficients>>,
    pub interpolation: Interpolation,
}

impl BoundaryData {
    pub fn zero(domain: &HeatDomain, grid: &TimeGrid) -> Self {
        let (kind, width) = match domain {
            HeatDomain::Interval(_) => (TraceKind::PointValues, 1),
            HeatDomain::Rectangle(_) => (TraceKind::SineSeries, 0),
        };
        Self {
            kind,
            components: vec![vec![Coefficients::zeros(width); grid.nodes().len()]; domain.boundary_components()],
            interpolation: Interpolation::PiecewiseLinear,
        }
    }

    /// Interval traces from the end-point values per node.
    pub fn interval(left: &[f64], right: &[f64], interpolation: Interpolation) -> Self {
        let column = |v: &[f64]| v.iter().map(|&x| Coefficients::from_element(1, Complex64::new(x, 0.0))).collect();
        Self {
            kind: TraceKind::PointValues,
            components: vec![column(left), column(right)],
            interpolation,
        }
    }

    /// Time-constant interval traces `(a, b)`.
    pub fn constant_interval(a: f64, b: f64, grid: &TimeGrid) -> Self {
        let n = grid.nodes().len();
        Self::interval(&vec![a; n], &vec![b; n], Interpolation::PiecewiseLinear)
    }

    pub fn is_zero(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.iter().all(|z| z.re == 0.0 && z.im == 0.0)))
    }

    /// The traces at node `i`, one entry per component.
    pub fn slice(&self, i: usize) -> Vec<Coefficients> {
        self.components.iter().map(|c| c[i].clone()).collect()
    }

    pub fn validate(&self, domain: &HeatDomain, grid: &TimeGrid) -> Result<()> {
        let expected_kind = match domain {
            HeatDomain::Interval(_) => TraceKind::PointValues,
            HeatDomain::Rectangle(_) => TraceKind::SineSeries,
        };
        if self.kind != expected_kind {
            return Err(Error::UnsupportedDomain(format!(
                "{:?} traces on a {}-dimensional domain; intervals take point values and rectangles take edge sine series",
                self.kind,
                domain.spatial_dim()
            )));
        }
        if self.components.len() != domain.boundary_components() {
            return Err(Error::DimensionMismatch {
                expected: domain.boundary_components(),
                found: self.components.len(),
            });
        }
        for c in &self.components {
            if c.len() != grid.nodes().len() {
                return Err(Error::GridMismatch(format!(
                    "{} boundary samples for {} nodes",
                    c.len(),
                    grid.nodes().len()
                )));
            }
            for v in c {
                if self.kind == TraceKind::PointValues && v.len() != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, found: v.len() });
                }
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite boundary sample".into()));
                }
            }
        }
        Ok(())
    }
}

/// Closed form of a lift at one time.
#[derive(Debug, Clone, PartialEq)]
pub enum LiftForm {
    /// `a + (b - a) x / L`.
    Affine { left: Complex64, right: Complex64, length: f64 },
    /// Sum of separable harmonic functions, one per edge sine mode.
    Harmonic { lengths: [f64; 2], edges: Vec<Coefficients> },
}

impl LiftForm {
    pub fn evaluate(&self, point: &[f64]) -> Complex64 {
        match self {
            Self::Affine { left, right, length } => left + (right - left) * (point[0] / length),
            Self::Harmonic { lengths, edges } => {
                let [l1, l2] = *lengths;
                let (x, y) = (point[0], point[1]);
                let mut sum = Complex64::new(0.0, 0.0);
                for (m, b) in edges[0].iter().enumerate() {
                    let a = (m + 1) as f64 * PI / l1;
                    sum += b * (a * x).sin() * sinh_ratio(a, l2 - y, l2);
                }
                for (m, b) in edges[1].iter().enumerate() {
                    let a = (m + 1) as f64 * PI / l1;
                    sum += b * (a * x).sin() * sinh_ratio(a, y, l2);
                }
                for (m, b) in edges[2].iter().enumerate() {
                    let a = (m + 1) as f64 * PI / l2;
                    sum += b * (a * y).sin() * sinh_ratio(a, l1 - x, l1);
                }
                for (m, b) in edges[3].iter().enumerate() {
                    let a = (m + 1) as f64 * PI / l2;
                    sum += b * (a * y).sin() * sinh_ratio(a, x, l1);
                }
                sum
            }
        }
    }
}

/// `sinh(a d) / sinh(a total)` for `0 ≤ d ≤ total`, without overflow.
fn sinh_ratio(a: f64, d: f64, total: f64) -> f64 {
    (-a * (total - d)).exp() * (-(-2.0 * a * d).exp_m1()) / (-(-2.0 * a * total).exp_m1())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftRow {
    pub coefficients: Coefficients,
    pub form: LiftForm,
}

/// Eigencoefficients `c_i = -(1/λ_i) ∫_{∂Ω} g ∂_n e_i dS` of the harmonic
/// extension of one boundary slice.
pub fn poisson_lift(basis: &HeatBasis, slice: &[Coefficients]) -> Result<LiftRow> {
    if slice.len() != basis.domain.boundary_components() {
        return Err(Error::DimensionMismatch {
            expected: basis.domain.boundary_components(),
            found: slice.len(),
        });
    }
    let lambdas = basis.eigenvalues();
    match basis.domain {
        HeatDomain::Interval(d) => {
            if slice.iter().any(|v| v.len() != 1) {
                return Err(Error::UnsupportedDomain("interval traces are single values".into()));
            }
            let (a, b) = (slice[0][0], slice[1][0]);
            let coefficients = Coefficients::from_iterator(
                basis.dim(),
                basis.modes.iter().map(|&[j, _]| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    (a - b * sign) * ((2.0 / d.length).sqrt() * d.length / (j as f64 * PI))
                }),
            );
            Ok(LiftRow {
                coefficients,
                form: LiftForm::Affine { left: a, right: b, length: d.length },
            })
        }
        HeatDomain::Rectangle(d) => {
            let [l1, l2] = d.lengths;
            let norm = 2.0 / (l1 * l2).sqrt();
            let coefficients = Coefficients::from_iterator(
                basis.dim(),
                basis.modes.iter().zip(lambdas).map(|(&[j, k], &lambda)| {
                    let sj = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let sk = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let edge = |c: usize, m: usize| slice[c].get(m - 1).copied().unwrap_or_default();
                    let horizontal = (edge(0, j) - edge(1, j) * sk) * (k as f64 * PI / l2 * l1 / 2.0);
                    let vertical = (edge(2, k) - edge(3, k) * sj) * (j as f64 * PI / l1 * l2 / 2.0);
                    (horizontal + vertical) * (norm / lambda)
                }),
            );
            Ok(LiftRow {
                coefficients,
                form: LiftForm::Harmonic { lengths: d.lengths, edges: slice.to_vec() },
            })
        }
    }
}

/// The lift at every node, interpolated in time like `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonLift {
    pub rows: Vec<LiftRow>,
    pub interpolation: Interpolation,
}

impl PoissonLift {
    pub fn build(basis: &HeatBasis, g: &BoundaryData) -> Result<Self> {
        let nodes = g.components.first().map_or(0, |c| c.len());
        let rows = (0..nodes).map(|i| poisson_lift(basis, &g.slice(i))).collect::<Result<_>>()?;
        Ok(Self { rows, interpolation: g.interpolation })
    }

    pub fn coefficients(&self) -> Vec<Coefficients> {
        self.rows.iter().map(|r| r.coefficients.clone()).collect()
    }

    fn as_source(&self) -> SourceTerm {
        SourceTerm::new(self.coefficients(), self.interpolation)
    }

    /// `K(t_k^-)`: the value the lift approaches from the left at each node.
    fn left_limits(&self) -> Vec<Coefficients> {
        let c = self.coefficients();
        match self.interpolation {
            Interpolation::PiecewiseLinear => c,
            Interpolation::PiecewiseConstantLeft => {
                let mut out = Vec::with_capacity(c.len());
                out.push(c[0].clone());
                out.extend(c[..c.len() - 1].iter().cloned());
                out
            }
        }
    }
}

/// `z(t_k) = -K(t_k^-) + e^{-t_k Λ} K(0) + r(t_k)` with `r(t) = ∫_0^t e^{-(t-s)Λ} dK(s)`,
/// the integration by parts of the boundary yield. Exact for the interpolated lift.
struct YieldParts {
    left_limits: Vec<Coefficients>,
    r: Vec<Coefficients>,
}

fn yield_parts(op: &Operator, lift: &PoissonLift, grid: &TimeGrid) -> Result<YieldParts> {
    let c = lift.coefficients();
    let nodes = grid.nodes();
    let n = op.dim();
    let r = match lift.interpolation {
        Interpolation::PiecewiseLinear => {
            let mut slopes: Vec<Coefficients> = nodes
                .windows(2)
                .enumerate()
                .map(|(i, w)| (&c[i + 1] - &c[i]).unscale(w[1] - w[0]))
                .collect();
            slopes.push(Coefficients::zeros(n));
            particular_path(op, &SourceTerm::new(slopes, Interpolation::PiecewiseConstantLeft), grid)?
        }
        Interpolation::PiecewiseConstantLeft => {
            let lambdas = op.as_spectral().expect("heat operator is spectral").eigenvalues();
            let mut out = Vec::with_capacity(nodes.len());
            let mut state = Coefficients::zeros(n);
            out.push(state.clone());
            for (i, w) in nodes.windows(2).enumerate() {
                if i > 0 {
                    state += &c[i] - &c[i - 1];
                }
                let h = w[1] - w[0];
                for (z, &lambda) in state.iter_mut().zip(lambdas) {
                    *z *= (-h * lambda).exp();
                }
                out.push(state.clone());
            }
            out
        }
    };
    Ok(YieldParts { left_limits: lift.left_limits(), r })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryYield {
    /// The improper integral by graded quadrature, with its error estimate.
    pub graded: BochnerIntegral,
    /// The same integral by integration by parts against the interpolated lift.
    pub exact: Coefficients,
}

impl BoundaryYield {
    pub fn value(&self) -> &Coefficients {
        &self.graded.value
    }

    pub fn error_estimate(&self) -> f64 {
        self.graded.error_estimate
    }

    /// `|graded - exact|`.
    pub fn discrepancy(&self) -> f64 {
        (&self.graded.value - &self.exact).norm()
    }
}

/// `z_g` by graded quadrature of `s ↦ -Λ e^{-(T-s)Λ} K(s)`, which is never
/// sampled at `s = T`.
pub fn boundary_yield(basis: &HeatBasis, g: &BoundaryData, grid: &TimeGrid) -> Result<BoundaryYield> {
    g.validate(&basis.domain, grid)?;
    let lift = PoissonLift::build(basis, g)?;
    boundary_yield_of_lift(basis, &lift, grid)
}

fn boundary_yield_of_lift(basis: &HeatBasis, lift: &PoissonLift, grid: &TimeGrid) -> Result<BoundaryYield> {
    if grid.cluster() != ClusterEnd::End {
        return Err(Error::GridNotGraded);
    }
    let lambdas = basis.eigenvalues();
    let t_final = grid.t_final();
    let source = lift.as_source();
    let graded = graded_bochner_integral(
        |s| {
            let k = source.value_at(grid, s);
            Coefficients::from_iterator(
                k.len(),
                k.iter().zip(lambdas).map(|(c, &l)| c * (-l * (-(t_final - s) * l).exp())),
            )
        },
        grid,
    )?;
    let parts = yield_parts(basis.operator(), lift, grid)?;
    let last = grid.nodes().len() - 1;
    let exact = running_yield(basis.operator(), &parts, &lift.rows[0].coefficients, t_final, last)?;
    Ok(BoundaryYield { graded, exact })
}

fn running_yield(op: &Operator, parts: &YieldParts, k0: &Coefficients, t: f64, k: usize) -> Result<Coefficients> {
    Ok(evolve(op, t, k0)? - &parts.left_limits[k] + &parts.r[k])
}

#[derive(Debug, Clone)]
pub struct HeatProblem {
    pub basis: HeatBasis,
    pub f: SourceTerm,
    pub g: BoundaryData,
    pub u_final: Coefficients,
    pub grid: TimeGrid,
}

impl HeatProblem {
    pub fn new(basis: HeatBasis, f: SourceTerm, g: BoundaryData, u_final: Coefficients, grid: TimeGrid) -> Result<Self> {
        basis.operator().check_dim(u_final.len())?;
        f.validate(&grid, basis.dim())?;
        g.validate(&basis.domain, &grid)?;
        Ok(Self { basis, f, g, u_final, grid })
    }

    /// The abstract problem obtained by dropping the boundary data.
    pub fn abstract_problem(&self) -> FinalValueProblem {
        FinalValueProblem {
            op: self.basis.operator().clone(),
            f: self.f.clone(),
            u_final: self.u_final.clone(),
            grid: self.grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatReport {
    /// `y_f`, `difference = u_T - y_f + z_g`, the domain diagnostic, `u(0)`
    /// and the Y₁ norm in `y_norm`.
    pub compatibility: CompatibilityReport,
    /// Absent when `g ≡ 0`.
    pub boundary_yield: Option<BoundaryYield>,
    pub lift: PoissonLift,
    /// Discrete `H^{1/2}` norm of `g`.
    pub g_norm: f64,
}

impl HeatReport {
    pub fn verdict(&self) -> Verdict {
        self.compatibility.verdict()
    }
}

/// Tests `u_T - y_f + z_g ∈ D(e^{-TΔ_D})` and reconstructs `u(0)`.
///
/// The difference is split as `e^{-TΛ}K(0) + P` with
/// `P = (u_T - K(T^-)) - y_f + r(T)`; only `P` is amplified, so the
/// cancellation between `u_T` and the lift never passes through `e^{TΛ}`.
/// With `g ≡ 0` the abstract check runs unchanged.
pub fn heat_compatibility(problem: &HeatProblem, options: &CompatibilityOptions) -> Result<HeatReport> {
    let op = problem.basis.operator();
    let lift = PoissonLift::build(&problem.basis, &problem.g)?;
    if problem.g.is_zero() {
        return Ok(HeatReport {
            compatibility: compatibility_check(&problem.abstract_problem(), options)?,
            boundary_yield: None,
            lift,
            g_norm: 0.0,
        });
    }

    let grid = &problem.grid;
    let t_final = grid.t_final();
    let last = grid.nodes().len() - 1;
    let by = boundary_yield_of_lift(&problem.basis, &lift, grid)?;
    let parts = yield_parts(op, &lift, grid)?;
    let k0 = &lift.rows[0].coefficients;
    let y_f = source_yield(op, &problem.f, grid)?;

    let k_end = &parts.left_limits[last];
    let r_end = &parts.r[last];
    let p = &problem.u_final - k_end - &y_f + r_end;
    let noise = rounding_floor(&[&problem.u_final, k_end, &y_f, r_end]);
    let scale = [&problem.u_final, k_end, &y_f, r_end]
        .iter()
        .map(|v| op.h_norm(v))
        .fold(0.0, f64::max);
    let assessment = assess(op, t_final, &p, noise, scale, options)?;

    let reconstructed_u0 = match (assessment.diagnostic.verdict, &assessment.amplified) {
        (Verdict::InDomain, Some(v)) => Some(v + k0),
        _ => None,
    };
    let amplified_log = match &reconstructed_u0 {
        Some(u0) => op.h_norm(u0).ln(),
        None => assessment.amplified_log_norm,
    };
    let g_norm = boundary_h_half_norm(&problem.basis.domain, &problem.g, grid)?;
    let f_sq = problem.f.dual_l2_squared(op, grid)?;
    let abstract_norm = y_norm_log(op.h_norm(&problem.u_final), f_sq, amplified_log);
    let y_norm = LogValue::from_log(0.5 * log_add(2.0 * abstract_norm.log, 2.0 * g_norm.ln()));

    let difference = &problem.u_final - &y_f + &by.exact;
    Ok(HeatReport {
        compatibility: CompatibilityReport {
            y_f,
            difference,
            diagnostic: assessment.diagnostic,
            reconstructed_u0,
            amplified_norm: LogValue::from_log(amplified_log),
            y_norm,
        },
        boundary_yield: Some(by),
        lift,
        g_norm,
    })
}

/// The backward solution split into its three terms
/// `e^{-tΛ}u(0)`, `∫_0^t e^{-(t-s)Λ} f ds` and `-z(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatSolution {
    pub path: SolutionPath,
    pub homogeneous: Vec<Coefficients>,
    pub source: Vec<Coefficients>,
    pub boundary: Vec<Coefficients>,
}

pub fn solve_heat_fvp(problem: &HeatProblem, report: &HeatReport) -> Result<HeatSolution> {
    let op = problem.basis.operator();
    let grid = &problem.grid;
    let u0 = report
        .compatibility
        .reconstructed_u0
        .as_ref()
        .filter(|_| report.verdict() == Verdict::InDomain)
        .ok_or_else(|| Error::NotCompatible { verdict: report.verdict().to_string() })?;
    let source = particular_path(op, &problem.f, grid)?;
    let homogeneous = grid.nodes().iter().map(|&t| evolve(op, t, u0)).collect::<Result<Vec<_>>>()?;

    if report.boundary_yield.is_none() {
        let path = solve_final_value(&problem.abstract_problem(), &report.compatibility)?;
        let boundary = vec![Coefficients::zeros(op.dim()); grid.nodes().len()];
        return Ok(HeatSolution { path, homogeneous, source, boundary });
    }

    let parts = yield_parts(op, &report.lift, grid)?;
    let k0 = &report.lift.rows[0].coefficients;
    let lift_nodes = report.lift.coefficients();
    let mut boundary = Vec::with_capacity(grid.nodes().len());
    let mut states = Vec::with_capacity(grid.nodes().len());
    let mut derivatives = Vec::with_capacity(grid.nodes().len());
    for (k, &t) in grid.nodes().iter().enumerate() {
        let z = running_yield(op, &parts, k0, t, k)?;
        let term = -z;
        let state = &homogeneous[k] + &source[k] + &term;
        derivatives.push(&problem.f.samples[k] - op.apply(&(&state - &lift_nodes[k]))?);
        states.push(state);
        boundary.push(term);
    }
    Ok(HeatSolution {
        path: SolutionPath {
            grid: grid.clone(),
            states,
            derivative_states: Some(derivatives),
        },
        homogeneous,
        source,
        boundary,
    })
}

/// The Y₁ norm of the data; requires compatible data.
pub fn y1_norm(report: &HeatReport) -> Result<f64> {
    if report.verdict() != Verdict::InDomain {
        return Err(Error::NotCompatible { verdict: report.verdict().to_string() });
    }
    Ok(report.compatibility.y_norm.value)
}

/// The X₁ norm with `H¹` realised by `diag(λ_j)`.
pub fn x1_norm(basis: &HeatBasis, path: &SolutionPath) -> Result<f64> {
    x_norm(basis.operator(), path)
}

/// Discrete `H^{1/2}(]0,T[ × ∂Ω)` norm: per component, the trapezoid `L₂` norm
/// plus the double sum `Σ_{i≠j} |g_i - g_j|² / |t_i - t_j|² w_i w_j`. Edge
/// series also carry the spatial half derivative `Σ_m (mπ/ℓ)(ℓ/2)|b_m|²`.
pub fn boundary_h_half_norm(domain: &HeatDomain, g: &BoundaryData, grid: &TimeGrid) -> Result<f64> {
    g.validate(domain, grid)?;
    let nodes = grid.nodes();
    let w = grid.trapezoid_weights();
    let edge_lengths: Vec<f64> = match *domain {
        HeatDomain::Interval(_) => vec![1.0, 1.0],
        HeatDomain::Rectangle(d) => vec![d.lengths[0], d.lengths[0], d.lengths[1], d.lengths[1]],
    };
    let mut total = 0.0;
    for (c, samples) in g.components.iter().enumerate() {
        let (mass, smooth): (f64, Vec<f64>) = match g.kind {
            TraceKind::PointValues => (1.0, vec![0.0; samples[0].len()]),
            TraceKind::SineSeries => {
                let l = edge_lengths[c];
                (l / 2.0, (1..=samples[0].len()).map(|m| m as f64 * PI / l).collect())
            }
        };
        for (i, v) in samples.iter().enumerate() {
            let local: f64 = v.iter().zip(&smooth).map(|(z, s)| (1.0 + s) * z.norm_sqr()).sum();
            total += w[i] * mass * local;
            for j in 0..samples.len() {
                if j == i {
                    continue;
                }
                let diff = (v - &samples[j]).norm_squared();
                total += mass * diff / (nodes[i] - nodes[j]).powi(2) * w[i] * w[j];
            }
        }
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylRow {
    pub lambda: f64,
    pub count: usize,
    /// `N(λ) / λ^{n/2}`.
    pub ratio: f64,
    /// Limit of the ratio: `L/π` on an interval, `|Ω|/(4π)` on a rectangle.
    pub limit: f64,
}

/// Eigenvalue counts `N(λ) = #{j : λ_j ≤ λ}` of the truncated spectrum.
pub fn weyl_count(basis: &HeatBasis, lambdas: &[f64]) -> Result<Vec<WeylRow>> {
    let covered = basis.domain.coverage();
    let limit = match basis.domain {
        HeatDomain::Interval(d) => d.length / PI,
        HeatDomain::Rectangle(d) => d.lengths[0] * d.lengths[1] / (4.0 * PI),
    };
    let exponent = basis.domain.spatial_dim() as f64 / 2.0;
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda > 0.0) {
                return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
            }
            if lambda >= covered {
                return Err(Error::TruncationTooSmall { covered, requested: lambda });
            }
            let count = basis.eigenvalues().partition_point(|&l| l <= lambda);
            Ok(WeylRow { lambda, count, ratio: count as f64 / lambda.powf(exponent), limit })
        })
        .collect()
}

/// `u(0)` and the solution of the forward problem with the given data, for
/// building compatible test instances.
pub fn forward_heat(
    basis: &HeatBasis,
    u0: &Coefficients,
    f: &SourceTerm,
    g: &BoundaryData,
    grid: &TimeGrid,
) -> Result<SolutionPath> {
    g.validate(&basis.domain, grid)?;
    let op = basis.operator();
    let mut path = duhamel_path(op, u0, f, grid)?;
    if g.is_zero() {
        return Ok(path);
    }
    let lift = PoissonLift::build(basis, g)?;
    let parts = yield_parts(op, &lift, grid)?;
    let k0 = &lift.rows[0].coefficients;
    let nodes = lift.coefficients();
    let mut derivatives = Vec::with_capacity(path.states.len());
    for (k, &t) in grid.nodes().iter().enumerate() {
        path.states[k] -= running_yield(op, &parts, k0, t, k)?;
        derivatives.push(&f.samples[k] - op.apply(&(&path.states[k] - &nodes[k]))?);
    }
    path.derivative_states = Some(derivatives);
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_vector;

    fn interval(n: usize) -> HeatBasis {
        eigenbasis(&HeatDomain::interval(PI, n)).unwrap()
    }

    #[test]
    fn eigenvalues_of_examples() {
        assert_eq!(interval(3).eigenvalues(), &[1.0, 4.0, 9.0]);
        let square = eigenbasis(&HeatDomain::rectangle([PI, PI], [3, 3])).unwrap();
        assert_eq!(&square.eigenvalues()[..4], &[2.0, 5.0, 5.0, 8.0]);
        assert_eq!(&square.modes[..4], &[[1, 1], [1, 2], [2, 1], [2, 2]]);
        let wide = eigenbasis(&HeatDomain::interval(2.0 * PI, 2)).unwrap();
        assert_eq!(wide.eigenvalues()[0], 0.25);
        assert!(eigenbasis(&HeatDomain::interval(PI, 0)).is_err());
    }

    #[test]
    fn interval_lift_closed_forms() {
        let b = interval(6);
        let one = |x: f64| Coefficients::from_element(1, Complex64::new(x, 0.0));
        let c = poisson_lift(&b, &[one(2.0), one(2.0)]).unwrap().coefficients;
        let lin = poisson_lift(&b, &[one(0.0), one(1.0)]).unwrap().coefficients;
        for j in 1..=6usize {
            let s = (2.0 / PI).sqrt();
            let odd = if j % 2 == 1 { 2.0 } else { 0.0 };
            assert!((c[j - 1].re - 2.0 * s * odd / j as f64).abs() < 1e-14);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            assert!((lin[j - 1].re - s * sign / j as f64).abs() < 1e-14);
        }
        let zero = poisson_lift(&b, &[one(0.0), one(0.0)]).unwrap();
        assert_eq!(zero.coefficients.norm(), 0.0);
        let row = poisson_lift(&b, &[one(-1.5), one(3.0)]).unwrap();
        assert_eq!(row.form.evaluate(&[0.0]).re, -1.5);
        assert_eq!(row.form.evaluate(&[PI]).re, 3.0);
    }

    #[test]
    fn rectangle_lift_matches_quadrature() {
        let (l1, l2) = (1.0, 1.5);
        let b = eigenbasis(&HeatDomain::rectangle([l1, l2], [4, 4])).unwrap();
        let edges = vec![real_vector(&[1.0, 0.3]), real_vector(&[0.0, -0.5]), real_vector(&[0.7]), real_vector(&[0.0, 0.0, 0.2])];
        let row = poisson_lift(&b, &edges).unwrap();
        let n = 400;
        let (hx, hy) = (l1 / n as f64, l2 / n as f64);
        for i in 0..6 {
            let mut acc = 0.0;
            for a in 0..n {
                for c in 0..n {
                    let p = [(a as f64 + 0.5) * hx, (c as f64 + 0.5) * hy];
                    acc += row.form.evaluate(&p).re * b.eigenfunction(i, &p);
                }
            }
            acc *= hx * hy;
            assert!((acc - row.coefficients[i].re).abs() < 2e-4, "mode {i}: {acc} vs {}", row.coefficients[i].re);
        }
        let point_values = BoundaryData::constant_interval(1.0, 1.0, &TimeGrid::uniform(1.0, 2).unwrap());
        assert!(matches!(
            point_values.validate(&b.domain, &TimeGrid::uniform(1.0, 2).unwrap()),
            Err(Error::UnsupportedDomain(_))
        ));
    }

    #[test]
    fn constant_boundary_yield() {
        let b = interval(16);
        let grid = TimeGrid::graded(1.0, 256, 2.0, ClusterEnd::End).unwrap();
        let g = BoundaryData::constant_interval(0.0, 1.0, &grid);
        let by = boundary_yield(&b, &g, &grid).unwrap();
        let want = (2.0 / PI).sqrt() * ((-1.0f64).exp() - 1.0);
        assert!((by.exact[0].re - want).abs() < 1e-14);
        assert!((by.value()[0].re - want).abs() < 1e-5);
        assert!(by.discrepancy() <= by.error_estimate());
        let uniform = TimeGrid::uniform(1.0, 8).unwrap();
        assert!(matches!(
            boundary_yield(&b, &BoundaryData::constant_interval(0.0, 1.0, &uniform), &uniform),
            Err(Error::GridNotGraded)
        ));
        let zero = boundary_yield(&b, &BoundaryData::zero(&b.domain, &grid), &grid).unwrap();
        assert_eq!(zero.value().norm(), 0.0);
    }

    #[test]
    fn steady_state_is_reproduced() {
        let b = interval(32);
        let grid = TimeGrid::graded(1.0, 256, 2.0, ClusterEnd::End).unwrap();
        let g = BoundaryData::constant_interval(1.0, -2.0, &grid);
        let lift = PoissonLift::build(&b, &g).unwrap();
        let k = lift.rows[0].coefficients.clone();
        let problem = HeatProblem::new(b.clone(), SourceTerm::zero(32, &grid), g, k.clone(), grid).unwrap();
        let report = heat_compatibility(&problem, &CompatibilityOptions::default()).unwrap();
        assert_eq!(report.verdict(), Verdict::InDomain);
        assert!((report.compatibility.reconstructed_u0.as_ref().unwrap() - &k).norm() < 1e-12);
        let sol = solve_heat_fvp(&problem, &report).unwrap();
        for s in &sol.path.states {
            assert!((s - &k).norm() < 1e-12);
        }
        let y1 = y1_norm(&report).unwrap();
        assert!(y1 >= k.norm());
    }

    #[test]
    fn piecewise_constant_lift_yield() {
        let b = interval(8);
        let grid = TimeGrid::graded(1.0, 64, 2.0, ClusterEnd::End).unwrap();
        let left: Vec<f64> = grid.nodes().iter().map(|t| (3.0 * t).sin()).collect();
        let right: Vec<f64> = grid.nodes().iter().map(|t| t * t).collect();
        let g = BoundaryData::interval(&left, &right, Interpolation::PiecewiseConstantLeft);
        let by = boundary_yield(&b, &g, &grid).unwrap();
        // cellwise closed form: Σ_i K_i (e^{-(T-t_i)λ} - e^{-(T-t_{i+1})λ})
        let lift = PoissonLift::build(&b, &g).unwrap();
        let nodes = grid.nodes();
        for (j, &l) in b.eigenvalues().iter().enumerate() {
            let mut want = 0.0;
            for i in 0..grid.cells() {
                let e = |t: f64| (-(1.0 - t) * l).exp();
                want += lift.rows[i].coefficients[j].re * (e(nodes[i]) - e(nodes[i + 1]));
            }
            assert!((by.exact[j].re - want).abs() < 1e-13, "mode {j}");
        }
    }

    #[test]
    fn weyl_counts() {
        let b = interval(20);
        let rows = weyl_count(&b, &[100.0, 50.0]).unwrap();
        assert_eq!(rows[0].count, 10);
        assert_eq!(rows[1].count, 7);
        assert!(matches!(weyl_count(&b, &[441.0]), Err(Error::TruncationTooSmall { .. })));
    }

    #[test]
    fn slobodeckij_norm_of_constant_trace() {
        let grid = TimeGrid::uniform(2.0, 10).unwrap();
        let g = BoundaryData::constant_interval(3.0, 0.0, &grid);
        let n = boundary_h_half_norm(&HeatDomain::interval(1.0, 4), &g, &grid).unwrap();
        assert!((n - (9.0f64 * 2.0).sqrt()).abs() < 1e-12);
    }
}
