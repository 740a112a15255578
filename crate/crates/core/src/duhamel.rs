//! Time grids, sampled sources, the source yield `y_f = ∫_0^T e^{-(T-s)A} f(s) ds`,
//! the variation-of-constants solution path and midpoint quadrature of improper
//! Bochner integrals on graded meshes.
//!
//! Sources are integrated by product quadrature: on every cell the exponential
//! kernel is integrated exactly against the interpolated samples, so the rules
//! stay exact for piecewise constant or linear data however stiff `A` is.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::linalg::{self, CMatrix, Coefficients};
use crate::operator::Operator;
use crate::semigroup::evolve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterEnd {
    Start,
    End,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    nodes: Vec<f64>,
    grading: f64,
    cluster: ClusterEnd,
}

impl TimeGrid {
    pub fn uniform(t_final: f64, cells: usize) -> Result<Self> {
        Self::graded(t_final, cells, 1.0, ClusterEnd::None)
    }

    /// Nodes clustered at one end with exponent `grading >= 1`; at the end,
    /// `t_{M-i} = T - T (i/M)^q`.
    pub fn graded(t_final: f64, cells: usize, grading: f64, cluster: ClusterEnd) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidGrid(format!("final time must be positive, got {t_final}")));
        }
        if cells == 0 {
            return Err(Error::InvalidGrid("grid needs at least one cell".into()));
        }
        if !(grading >= 1.0) || !grading.is_finite() {
            return Err(Error::InvalidGrid(format!("grading must be >= 1, got {grading}")));
        }
        let m = cells as f64;
        let nodes: Vec<f64> = (0..=cells)
            .map(|i| match (i, cluster) {
                (0, _) => 0.0,
                (i, _) if i == cells => t_final,
                (i, ClusterEnd::End) => t_final - t_final * ((cells - i) as f64 / m).powf(grading),
                (i, ClusterEnd::Start) => t_final * (i as f64 / m).powf(grading),
                (i, ClusterEnd::None) => t_final * i as f64 / m,
            })
            .collect();
        let grid = Self {
            t_final,
            nodes,
            grading,
            cluster,
        };
        grid.check_monotone()?;
        Ok(grid)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("nodes must start at 0 and hold at least two points".into()));
        }
        let grid = Self {
            t_final: nodes[nodes.len() - 1],
            nodes,
            grading: 1.0,
            cluster: ClusterEnd::None,
        };
        if !(grid.t_final > 0.0) || !grid.t_final.is_finite() {
            return Err(Error::InvalidGrid("final time must be positive".into()));
        }
        grid.check_monotone()?;
        Ok(grid)
    }

    fn check_monotone(&self) -> Result<()> {
        if self.nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid("nodes are not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn cluster(&self) -> ClusterEnd {
        self.cluster
    }

    /// Every other node (and the final one): the grid at half resolution with
    /// the same grading when the cell count is even.
    pub fn coarsened(&self) -> Self {
        let mut nodes: Vec<f64> = self.nodes.iter().step_by(2).copied().collect();
        if *nodes.last().unwrap() != self.t_final {
            nodes.push(self.t_final);
        }
        Self {
            nodes,
            ..self.clone()
        }
    }

    /// Trapezoid weights `w_k` with `Σ_k w_k φ(t_k) ≈ ∫_0^T φ`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (i, pair) in self.nodes.windows(2).enumerate() {
            let half = 0.5 * (pair[1] - pair[0]);
            w[i] += half;
            w[i + 1] += half;
        }
        w
    }

    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        self.trapezoid_weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Index `i` of the cell `[t_i, t_{i+1})` holding `s` (the last cell for `s = T`).
    pub fn cell_of(&self, s: f64) -> usize {
        let idx = self.nodes.partition_point(|&t| t <= s);
        idx.saturating_sub(1).min(self.cells() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    PiecewiseConstantLeft,
    PiecewiseLinear,
}

/// A source `f` sampled at the nodes of a grid, in V* coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub samples: Vec<Coefficients>,
    pub interpolation: Interpolation,
    /// Free-form tag naming a closed form the samples were drawn from.
    pub closed_form: Option<String>,
}

impl SourceTerm {
    pub fn new(samples: Vec<Coefficients>, interpolation: Interpolation) -> Self {
        Self {
            samples,
            interpolation,
            closed_form: None,
        }
    }

    pub fn zero(dim: usize, grid: &TimeGrid) -> Self {
        Self::constant(&Coefficients::zeros(dim), grid)
    }

    pub fn constant(value: &Coefficients, grid: &TimeGrid) -> Self {
        Self::new(vec![value.clone(); grid.nodes().len()], Interpolation::PiecewiseLinear)
    }

    pub fn sample(
        grid: &TimeGrid,
        interpolation: Interpolation,
        f: impl Fn(f64) -> Coefficients,
    ) -> Self {
        Self::new(grid.nodes().iter().map(|&t| f(t)).collect(), interpolation)
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.len())
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| s.iter().all(|z| *z == linalg::ZERO))
    }

    pub fn validate(&self, grid: &TimeGrid, dim: usize) -> Result<()> {
        if self.samples.len() != grid.nodes().len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} grid nodes",
                self.samples.len(),
                grid.nodes().len()
            )));
        }
        if let Some(bad) = self.samples.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(())
    }

    /// Interpolated value at `s ∈ [0, T]`.
    pub fn value_at(&self, grid: &TimeGrid, s: f64) -> Coefficients {
        let i = grid.cell_of(s);
        match self.interpolation {
            Interpolation::PiecewiseConstantLeft => self.samples[i].clone(),
            Interpolation::PiecewiseLinear => {
                let (a, b) = (grid.nodes()[i], grid.nodes()[i + 1]);
                let theta = ((s - a) / (b - a)).clamp(0.0, 1.0);
                self.samples[i].scale(1.0 - theta) + self.samples[i + 1].scale(theta)
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s.scale(factor)).collect(),
            ..self.clone()
        }
    }

    /// `∫_0^T ‖f(t)‖_*^2 dt` by the trapezoid rule on the sample nodes.
    pub fn dual_l2_squared(&self, op: &Operator, grid: &TimeGrid) -> Result<f64> {
        let dual = self
            .samples
            .iter()
            .map(|s| op.norms(s).map(|n| n.dual * n.dual))
            .collect::<Result<Vec<_>>>()?;
        Ok(grid.trapezoid(&dual))
    }
}

/// `φ1(z) = (e^z - 1)/z` and `φ2(z) = (e^z - 1 - z)/z^2` for real `z <= 0`.
pub(crate) fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 0.5 {
        // Σ z^k/(k+1)! and Σ z^k/(k+2)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let (mut c1, mut c2) = (1.0, 0.5);
        let mut power = 1.0;
        for k in 0..24 {
            p1 += c1 * power;
            p2 += c2 * power;
            power *= z;
            c1 /= k as f64 + 2.0;
            c2 /= k as f64 + 3.0;
        }
        (p1, p2)
    } else {
        let em1 = z.exp_m1();
        (em1 / z, (em1 - z) / (z * z))
    }
}

struct MatrixCell {
    propagator: CMatrix,
    /// `∫_0^h e^{-rA} dr`
    integral: CMatrix,
    /// `∫_0^h r e^{-rA} dr`
    moment: CMatrix,
}

/// Advances `y ↦ e^{-hA} y + ∫_{cell} e^{-(t_{i+1}-s)A} f(s) ds` cell by cell.
pub(crate) struct Stepper<'a> {
    op: &'a Operator,
    cache: HashMap<u64, MatrixCell>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(op: &'a Operator) -> Self {
        Self {
            op,
            cache: HashMap::new(),
        }
    }

    fn matrix_cell(&mut self, h: f64) -> &MatrixCell {
        let Operator::Matrix(m) = self.op else {
            unreachable!("matrix cell requested for a spectral operator")
        };
        self.cache.entry(h.to_bits()).or_insert_with(|| {
            let n = m.dim();
            let mut block = CMatrix::zeros(3 * n, 3 * n);
            let ident = CMatrix::identity(n, n);
            block.view_mut((0, 0), (n, n)).copy_from(&(-m.matrix()));
            block.view_mut((0, n), (n, n)).copy_from(&ident);
            block.view_mut((n, 2 * n), (n, n)).copy_from(&ident);
            let e = expm(&block.scale(h));
            let propagator = e.view((0, 0), (n, n)).into_owned();
            let integral = e.view((0, n), (n, n)).into_owned();
            let weighted = e.view((0, 2 * n), (n, n)).into_owned();
            let moment = integral.scale(h) - weighted;
            MatrixCell {
                propagator,
                integral,
                moment,
            }
        })
    }

    /// One cell of length `h`. `right` is `None` for piecewise-constant data.
    pub(crate) fn step(
        &mut self,
        h: f64,
        state: &Coefficients,
        left: &Coefficients,
        right: Option<&Coefficients>,
    ) -> Coefficients {
        match self.op {
            Operator::Spectral(model) => {
                let mut out = state.clone();
                for (j, &lambda) in model.eigenvalues().iter().enumerate() {
                    let z = -h * lambda;
                    let (p1, p2) = phi12(z);
                    let i1 = h * p1;
                    let cell = match right {
                        None => left[j] * i1,
                        Some(right) => {
                            let moment = h * h * (p1 - p2);
                            right[j] * i1 - (right[j] - left[j]) * (moment / h)
                        }
                    };
                    out[j] = state[j] * z.exp() + cell;
                }
                out
            }
            Operator::Matrix(_) => {
                let cell = self.matrix_cell(h);
                let forced = match right {
                    None => &cell.integral * left,
                    Some(right) => {
                        &cell.integral * right - (&cell.moment * (right - left)).unscale(h)
                    }
                };
                &cell.propagator * state + forced
            }
        }
    }
}

/// `∫_0^{t_k} e^{-(t_k-s)A} f(s) ds` at every node `t_k`.
pub fn particular_path(op: &Operator, f: &SourceTerm, grid: &TimeGrid) -> Result<Vec<Coefficients>> {
    f.validate(grid, op.dim())?;
    let mut stepper = Stepper::new(op);
    let mut out = Vec::with_capacity(grid.nodes().len());
    let mut state = Coefficients::zeros(op.dim());
    out.push(state.clone());
    for (i, pair) in grid.nodes().windows(2).enumerate() {
        let right = match f.interpolation {
            Interpolation::PiecewiseConstantLeft => None,
            Interpolation::PiecewiseLinear => Some(&f.samples[i + 1]),
        };
        state = stepper.step(pair[1] - pair[0], &state, &f.samples[i], right);
        out.push(state.clone());
    }
    Ok(out)
}

/// The source yield `y_f`.
pub fn source_yield(op: &Operator, f: &SourceTerm, grid: &TimeGrid) -> Result<Coefficients> {
    Ok(particular_path(op, f, grid)?.pop().expect("grid has nodes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub grid: TimeGrid,
    pub states: Vec<Coefficients>,
    /// `u'(t_k)` per node.
    pub derivative_states: Option<Vec<Coefficients>>,
}

impl SolutionPath {
    pub fn final_state(&self) -> &Coefficients {
        self.states.last().expect("path has states")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            states: self.states.iter().map(|s| s.scale(factor)).collect(),
            derivative_states: self
                .derivative_states
                .as_ref()
                .map(|d| d.iter().map(|s| s.scale(factor)).collect()),
        }
    }
}

/// `u(t) = e^{-tA} u0 + ∫_0^t e^{-(t-s)A} f(s) ds` at every node, with
/// `u'(t_k) = f(t_k) - A u(t_k)`.
pub fn duhamel_path(
    op: &Operator,
    u0: &Coefficients,
    f: &SourceTerm,
    grid: &TimeGrid,
) -> Result<SolutionPath> {
    op.check_dim(u0.len())?;
    let particular = particular_path(op, f, grid)?;
    let homogeneous_only = f.is_zero();
    let mut states = Vec::with_capacity(particular.len());
    let mut derivatives = Vec::with_capacity(particular.len());
    for ((&t, part), sample) in grid.nodes().iter().zip(particular).zip(&f.samples) {
        let hom = evolve(op, t, u0)?;
        let state = if homogeneous_only { hom } else { hom + part };
        derivatives.push(sample - op.apply(&state)?);
        states.push(state);
    }
    Ok(SolutionPath {
        grid: grid.clone(),
        states,
        derivative_states: Some(derivatives),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BochnerIntegral {
    pub value: Coefficients,
    /// `|I(M) - I(M/2)|` per coordinate.
    pub error_per_coordinate: Vec<f64>,
    /// Euclidean (H) norm of `error_per_coordinate`.
    pub error_estimate: f64,
}

/// Composite midpoint rule over the cells of a grid graded towards `T`, taken
/// in the grading coordinate `σ` with `s = T - T (1 - σ)^q`: each cell
/// contributes `|Δσ| · s'(σ_mid) · F(s(σ_mid))`. The integrand is never
/// evaluated at `s = T`, and singularities like `(T - s)^{-1/2}` are smoothed by
/// the change of variables.
pub fn graded_bochner_integral(
    sampler: impl Fn(f64) -> Coefficients,
    grid: &TimeGrid,
) -> Result<BochnerIntegral> {
    if grid.cluster() != ClusterEnd::End {
        return Err(Error::GridNotGraded);
    }
    let (t_final, q) = (grid.t_final(), grid.grading());
    let midpoint = |cells: usize| -> Result<Coefficients> {
        let width = 1.0 / cells as f64;
        let mut acc: Option<Coefficients> = None;
        for i in 0..cells {
            let remaining = 1.0 - (i as f64 + 0.5) * width;
            let s = t_final - t_final * remaining.powf(q);
            let jacobian = t_final * q * remaining.powf(q - 1.0);
            let sample = sampler(s);
            if sample.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFiniteSample { s });
            }
            let contribution = sample.scale(width * jacobian);
            acc = Some(match acc {
                Some(a) => a + contribution,
                None => contribution,
            });
        }
        Ok(acc.expect("grid has at least one cell"))
    };
    let value = midpoint(grid.cells())?;
    let coarse = midpoint((grid.cells() / 2).max(1))?;
    if coarse.len() != value.len() {
        return Err(Error::DimensionMismatch {
            expected: value.len(),
            found: coarse.len(),
        });
    }
    let error_per_coordinate: Vec<f64> =
        value.iter().zip(coarse.iter()).map(|(a, b)| (a - b).norm()).collect();
    let error_estimate = error_per_coordinate.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(BochnerIntegral {
        value,
        error_per_coordinate,
        error_estimate,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_vector;
    use crate::operator::SpectralModel;

    fn scalar(lambda: f64) -> Operator {
        SpectralModel::new(vec![lambda], "scalar").unwrap().into()
    }

    #[test]
    fn phi_functions_match_closed_forms() {
        for &z in &[-1e-8, -1e-3, -0.3, -0.49, -0.51, -2.0, -40.0, -1e6] {
            let (p1, p2) = phi12(z);
            let want1 = if z.abs() < 1e-6 { 1.0 + z / 2.0 } else { z.exp_m1() / z };
            let want2 = if z.abs() < 1e-3 { 0.5 + z / 6.0 + z * z / 24.0 } else { (z.exp_m1() - z) / (z * z) };
            assert!((p1 - want1).abs() <= 1e-13 * want1.abs(), "phi1({z})");
            assert!((p2 - want2).abs() <= 1e-12 * want2.abs(), "phi2({z})");
        }
    }

    #[test]
    fn graded_nodes() {
        let g = TimeGrid::graded(2.0, 4, 2.0, ClusterEnd::End).unwrap();
        assert_eq!(g.nodes(), &[0.0, 2.0 - 2.0 * 0.5625, 2.0 - 2.0 * 0.25, 2.0 - 2.0 * 0.0625, 2.0]);
        let c = g.coarsened();
        assert_eq!(c.nodes(), &[0.0, 2.0 - 2.0 * 0.25, 2.0]);
        assert!(TimeGrid::uniform(0.0, 4).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::graded(1.0, 4, 0.5, ClusterEnd::End).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn constant_source_yield_is_exact() {
        for &lambda in &[1e-3, 0.5, 3.0, 250.0, 1e5] {
            let op = scalar(lambda);
            let grid = TimeGrid::uniform(1.0, 16).unwrap();
            let f = SourceTerm::constant(&real_vector(&[1.0]), &grid);
            let y = source_yield(&op, &f, &grid).unwrap();
            let want = -(-lambda).exp_m1() / lambda;
            assert!((y[0].re - want).abs() <= 1e-14 * want, "lambda = {lambda}");
        }
    }

    #[test]
    fn zero_source_has_zero_yield() {
        let op: Operator = SpectralModel::power_law(4, 1.0, 2.0).unwrap().into();
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let y = source_yield(&op, &SourceTerm::zero(4, &grid), &grid).unwrap();
        assert_eq!(y, Coefficients::zeros(4));
    }

    #[test]
    fn scalar_ode_with_unit_source() {
        let op = scalar(1.0);
        let grid = TimeGrid::uniform(3.0, 30).unwrap();
        let f = SourceTerm::constant(&real_vector(&[1.0]), &grid);
        let path = duhamel_path(&op, &real_vector(&[0.0]), &f, &grid).unwrap();
        for (t, u) in grid.nodes().iter().zip(&path.states) {
            assert!((u[0].re - (1.0 - (-t).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let op = scalar(1.0);
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let other = TimeGrid::uniform(1.0, 4).unwrap();
        let f = SourceTerm::zero(1, &other);
        assert!(matches!(source_yield(&op, &f, &grid), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn inverse_square_root_singularity() {
        let grid = TimeGrid::graded(1.0, 512, 2.0, ClusterEnd::End).unwrap();
        let r = graded_bochner_integral(|s| real_vector(&[(1.0 - s).powf(-0.5)]), &grid).unwrap();
        assert!((r.value[0].re - 2.0).abs() < 1e-3);
        assert!(r.error_estimate < 1e-3);
    }

    #[test]
    fn stiff_exponential_kernel() {
        let lambda = 25.0;
        let grid = TimeGrid::graded(1.0, 512, 2.0, ClusterEnd::End).unwrap();
        let r = graded_bochner_integral(|s| real_vector(&[lambda * (-(1.0 - s) * lambda).exp()]), &grid)
            .unwrap();
        assert!((r.value[0].re - (1.0 - (-lambda).exp())).abs() < 1e-4);
    }

    #[test]
    fn zero_integrand_and_errors() {
        let grid = TimeGrid::graded(1.0, 64, 2.0, ClusterEnd::End).unwrap();
        let r = graded_bochner_integral(|_| Coefficients::zeros(3), &grid).unwrap();
        assert_eq!(r.value, Coefficients::zeros(3));
        assert_eq!(r.error_estimate, 0.0);

        let nan = graded_bochner_integral(|s| real_vector(&[if s > 0.5 { f64::NAN } else { 0.0 }]), &grid);
        assert!(matches!(nan, Err(Error::NonFiniteSample { .. })));

        let uniform = TimeGrid::uniform(1.0, 64).unwrap();
        assert!(matches!(
            graded_bochner_integral(|_| Coefficients::zeros(1), &uniform),
            Err(Error::GridNotGraded)
        ));
    }

    #[test]
    fn value_at_interpolates() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let mut f = SourceTerm::new(
            vec![real_vector(&[0.0]), real_vector(&[1.0]), real_vector(&[3.0])],
            Interpolation::PiecewiseLinear,
        );
        assert!((f.value_at(&grid, 0.75)[0].re - 2.0).abs() < 1e-15);
        f.interpolation = Interpolation::PiecewiseConstantLeft;
        assert_eq!(f.value_at(&grid, 0.75)[0].re, 1.0);
        assert_eq!(f.value_at(&grid, 1.0)[0].re, 1.0);
    }
}
