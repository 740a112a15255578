//! The semigroup `e^{-tA}`, its inverse `e^{tA}`, truncation diagnostics for the
//! domains `D(e^{TA})`, and the height function `h(t) = |e^{-tA} u0|`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::linalg::{self, Coefficients};
use crate::operator::{Operator, SpectralModel};

/// Largest `x` with `exp(x)` finite in double precision.
pub const LN_MAX: f64 = 709.782_712_893_384;

pub fn evolve(op: &Operator, t: f64, x: &Coefficients) -> Result<Coefficients> {
    check_time(t)?;
    op.check_dim(x.len())?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    Ok(match op {
        Operator::Spectral(model) => Coefficients::from_iterator(
            x.len(),
            x.iter()
                .zip(model.eigenvalues())
                .map(|(z, &lambda)| z * (-t * lambda).exp()),
        ),
        Operator::Matrix(m) => expm(&m.matrix().scale(-t)) * x,
    })
}

/// `e^{tA} x`, the inverse of [`evolve`] at the same `t`.
pub fn inverse_evolve(op: &Operator, t: f64, x: &Coefficients) -> Result<Coefficients> {
    check_time(t)?;
    op.check_dim(x.len())?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    match op {
        Operator::Spectral(model) => {
            let mut out = x.clone();
            for (j, (z, &lambda)) in out.iter_mut().zip(model.eigenvalues()).enumerate() {
                *z = amplify(*z, t * lambda).ok_or(Error::OverflowRisk {
                    index: j,
                    log_magnitude: t * lambda + z.norm().ln(),
                })?;
            }
            Ok(out)
        }
        Operator::Matrix(m) => {
            let out = expm(&m.matrix().scale(t)) * x;
            if let Some(index) = out.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::OverflowRisk {
                    index,
                    log_magnitude: t * linalg::matrix_one_norm(m.matrix()),
                });
            }
            Ok(out)
        }
    }
}

/// `e^{exponent} z`, formed in log space; `None` if the result is not finite.
pub(crate) fn amplify(z: Complex64, exponent: f64) -> Option<Complex64> {
    let modulus = z.norm();
    if modulus == 0.0 {
        return Some(z);
    }
    let log_modulus = exponent + modulus.ln();
    if log_modulus > LN_MAX {
        return None;
    }
    let scaled = z / modulus * log_modulus.exp();
    scaled.re.is_finite().then_some(scaled)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// A positive value that may exceed the double range, kept with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    /// `exp(log)`; `+inf` once it overflows.
    pub value: f64,
    pub log: f64,
}

impl LogValue {
    pub fn from_log(log: f64) -> Self {
        Self {
            value: log.exp(),
            log,
        }
    }

    pub fn zero() -> Self {
        Self::from_log(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    InDomain,
    Borderline,
    NotInDomain,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Verdict::InDomain => "InDomain",
            Verdict::Borderline => "Borderline",
            Verdict::NotInDomain => "NotInDomain",
        };
        f.write_str(name)
    }
}

/// Thresholds of the truncation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSettings {
    /// Growth tolerance τ across the last two levels.
    pub tau: f64,
    /// Largest admissible `ln(e^{Tλ_j}|c_j| / scale)` for a single resolved coordinate.
    pub amplification_limit: f64,
}

impl DomainSettings {
    pub const DEFAULT_TAU: f64 = 1e-6;

    /// `ln(1/sqrt(ε))`: past this amplification a reconstruction keeps fewer
    /// than half of the significant digits of its data.
    pub fn default_amplification_limit() -> f64 {
        -0.5 * f64::EPSILON.ln()
    }

    pub fn with_tau(tau: f64) -> Self {
        Self {
            tau,
            ..Self::default()
        }
    }
}

impl Default for DomainSettings {
    fn default() -> Self {
        Self {
            tau: Self::DEFAULT_TAU,
            amplification_limit: Self::default_amplification_limit(),
        }
    }
}

type CoordinateFn = Arc<dyn Fn(usize, f64) -> Complex64 + Send + Sync>;

/// Supplies coordinates `c_j` for arbitrary mode indices.
#[derive(Clone)]
pub enum CoefficientRule {
    /// `c_j = e^{-β λ_j}`, evaluated in log space.
    ExpDecay { beta: f64 },
    /// A data vector, zero-padded beyond its length. Coordinates with
    /// `|c_j| <= noise[j]` cannot be told apart from rounding and only enter
    /// the H part of the graph norm. `scale` is the data magnitude that
    /// amplifications are measured against (its H norm when absent).
    Data {
        coefficients: Coefficients,
        noise: Vec<f64>,
        scale: Option<f64>,
    },
    /// `c_j = f(j, λ_j)` with zero-based `j`.
    Function(CoordinateFn),
}

impl CoefficientRule {
    pub fn data(coefficients: Coefficients) -> Self {
        CoefficientRule::Data {
            coefficients,
            noise: Vec::new(),
            scale: None,
        }
    }

    pub fn function(f: impl Fn(usize, f64) -> Complex64 + Send + Sync + 'static) -> Self {
        CoefficientRule::Function(Arc::new(f))
    }

    /// `(N, 2N, 4N)` with `N` the data length, or `(N/4, N/2, N)` with `N`
    /// the model size for closed-form rules.
    pub fn default_levels(&self, model_dim: usize) -> Vec<usize> {
        match self {
            CoefficientRule::Data { coefficients, .. } => {
                let n = coefficients.len().max(1);
                vec![n, 2 * n, 4 * n]
            }
            _ => {
                let mut levels = vec![(model_dim / 4).max(1), (model_dim / 2).max(1), model_dim];
                levels.dedup();
                levels
            }
        }
    }
}

impl fmt::Debug for CoefficientRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientRule::ExpDecay { beta } => write!(f, "ExpDecay {{ beta: {beta} }}"),
            CoefficientRule::Data { coefficients, .. } => {
                write!(f, "Data {{ len: {} }}", coefficients.len())
            }
            CoefficientRule::Function(_) => f.write_str("Function"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDiagnostic {
    pub levels: Vec<usize>,
    /// `(Σ_{j<=N} (1 + e^{2Tλ_j}) |c_j|^2)^{1/2}` per level.
    pub graph_norms: Vec<LogValue>,
    /// Successive growth factors of `graph_norms`.
    pub ratios: Vec<f64>,
    /// Norm of the top-level increment relative to the top graph norm.
    pub tail: f64,
    /// Largest `ln(e^{Tλ_j}|c_j| / scale)` over resolved coordinates.
    pub max_log_amplification: f64,
    /// Coordinates at or below their noise floor.
    pub unresolved: usize,
    pub verdict: Verdict,
    pub threshold: f64,
    pub amplification_limit: f64,
}

struct LogSum(f64);

impl LogSum {
    fn new() -> Self {
        LogSum(f64::NEG_INFINITY)
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        self.0 = if x > self.0 {
            x + (self.0 - x).exp().ln_1p()
        } else {
            self.0 + (x - self.0).exp().ln_1p()
        };
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Truncation-stability test for membership of the rule's vector in `D(e^{TA})`.
pub fn domain_membership(
    model: &SpectralModel,
    t_final: f64,
    rule: &CoefficientRule,
    levels: &[usize],
    settings: &DomainSettings,
) -> Result<DomainDiagnostic> {
    check_time(t_final)?;
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "levels must be positive and strictly increasing, got {levels:?}"
        )));
    }
    if !(settings.tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {}", settings.tau)));
    }
    let top = *levels.last().unwrap();
    let eigenvalues = model.eigenvalues();
    let needed = match rule {
        CoefficientRule::Data { coefficients, noise, .. } => {
            if coefficients.len() > model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    found: coefficients.len(),
                });
            }
            if !noise.is_empty() && noise.len() != coefficients.len() {
                return Err(Error::DimensionMismatch {
                    expected: coefficients.len(),
                    found: noise.len(),
                });
            }
            coefficients.len().min(top)
        }
        _ => {
            if top > model.dim() {
                return Err(Error::TruncationTooSmall {
                    covered: eigenvalues[model.dim() - 1],
                    requested: top as f64,
                });
            }
            top
        }
    };

    // (ln |c_j|, resolved)
    let coordinates: Vec<(f64, bool)> = (0..needed)
        .map(|j| match rule {
            CoefficientRule::ExpDecay { beta } => (-beta * eigenvalues[j], true),
            CoefficientRule::Data {
                coefficients,
                noise,
                ..
            } => {
                let modulus = coefficients[j].norm();
                let floor = noise.get(j).copied().unwrap_or(0.0);
                (modulus.ln(), modulus > floor)
            }
            CoefficientRule::Function(f) => (f(j, eigenvalues[j]).norm().ln(), true),
        })
        .collect();

    let log_scale = match rule {
        CoefficientRule::Data {
            scale: Some(scale), ..
        } => scale.ln(),
        _ => {
            let mut sum = LogSum::new();
            for &(log_c, _) in &coordinates {
                sum.add(2.0 * log_c);
            }
            0.5 * sum.0
        }
    };

    let mut total = LogSum::new();
    let mut tail = LogSum::new();
    let tail_start = if levels.len() > 1 { levels[levels.len() - 2] } else { top };
    let mut graph_norms = Vec::with_capacity(levels.len());
    let mut next_level = 0;
    let mut max_amp = f64::NEG_INFINITY;
    let mut unresolved = 0;
    for j in 0..top {
        if let Some(&(log_c, resolved)) = coordinates.get(j) {
            if log_c.is_finite() {
                let term = if resolved {
                    max_amp = max_amp.max(t_final * eigenvalues[j] + log_c - log_scale);
                    2.0 * log_c + softplus(2.0 * t_final * eigenvalues[j])
                } else {
                    unresolved += 1;
                    2.0 * log_c
                };
                total.add(term);
                if j >= tail_start {
                    tail.add(term);
                }
            }
        }
        if j + 1 == levels[next_level] {
            graph_norms.push(LogValue::from_log(0.5 * total.0));
            next_level += 1;
        }
    }

    let ratios: Vec<f64> = graph_norms
        .windows(2)
        .map(|w| match (w[0].log, w[1].log) {
            (a, b) if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY => 1.0,
            (a, _) if a == f64::NEG_INFINITY => f64::INFINITY,
            (a, b) => (b - a).exp(),
        })
        .collect();
    let tail_rel = if total.0 == f64::NEG_INFINITY || levels.len() == 1 {
        0.0
    } else {
        (0.5 * (tail.0 - total.0)).exp()
    };
    let final_ratio = ratios.last().copied().unwrap_or(1.0);

    let verdict = if max_amp > settings.amplification_limit {
        Verdict::NotInDomain
    } else if final_ratio <= 1.0 + settings.tau && tail_rel <= settings.tau {
        Verdict::InDomain
    } else if tail_rel <= settings.tau.sqrt() {
        Verdict::Borderline
    } else {
        Verdict::NotInDomain
    };

    Ok(DomainDiagnostic {
        levels: levels.to_vec(),
        graph_norms,
        ratios,
        tail: tail_rel,
        max_log_amplification: max_amp,
        unresolved,
        verdict,
        threshold: settings.tau,
        amplification_limit: settings.amplification_limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightProfile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Divided second differences at interior nodes (`values.len() - 2` entries).
    pub second_differences: Vec<f64>,
    /// Second-order one-sided estimate of `h'(0)` with step `slope_step`.
    pub initial_slope: f64,
    pub slope_step: f64,
    /// `m(A)`.
    pub lower_bound: f64,
    /// `-m(A) h(0)`.
    pub slope_bound: f64,
}

impl HeightProfile {
    pub fn min_second_difference(&self) -> f64 {
        self.second_differences.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn strictly_convex(&self) -> bool {
        self.second_differences.iter().all(|&d| d > 0.0)
    }

    /// `h'(0) <= -m(A) h(0) + allowance`.
    pub fn slope_bound_holds(&self, allowance: f64) -> bool {
        self.initial_slope <= self.slope_bound + allowance
    }
}

/// Samples `h(t) = |e^{-tA} u0|` on an increasing grid starting at 0.
pub fn height_profile(op: &Operator, u0: &Coefficients, times: &[f64]) -> Result<HeightProfile> {
    op.check_dim(u0.len())?;
    if op.h_norm(u0) == 0.0 {
        return Err(Error::ZeroInitialState);
    }
    if times.len() < 3 || times[0] != 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidGrid(
            "height profile needs at least three increasing times starting at 0".into(),
        ));
    }
    let h = |t: f64| -> Result<f64> { Ok(op.h_norm(&evolve(op, t, u0)?)) };
    let values = times.iter().map(|&t| h(t)).collect::<Result<Vec<_>>>()?;
    let second_differences = (1..times.len() - 1)
        .map(|k| {
            let (d1, d2) = (times[k] - times[k - 1], times[k + 1] - times[k]);
            2.0 * ((values[k + 1] - values[k]) / d2 - (values[k] - values[k - 1]) / d1) / (d1 + d2)
        })
        .collect();

    let step = times[times.len() - 1] / 1000.0;
    let initial_slope = (-3.0 * values[0] + 4.0 * h(step)? - h(2.0 * step)?) / (2.0 * step);
    let lower_bound = op.lower_bound();
    Ok(HeightProfile {
        times: times.to_vec(),
        slope_bound: -lower_bound * values[0],
        values,
        second_differences,
        initial_slope,
        slope_step: step,
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_matrix, real_vector};
    use crate::operator::LaxMilgramOperator;

    fn spectral(values: &[f64]) -> Operator {
        SpectralModel::new(values.to_vec(), "test").unwrap().into()
    }

    fn jordan() -> Operator {
        let eye = crate::linalg::CMatrix::identity(2, 2);
        LaxMilgramOperator::build(eye.clone(), eye, real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]))
            .unwrap()
            .into()
    }

    fn squares(n: usize) -> SpectralModel {
        SpectralModel::power_law(n, 1.0, 2.0).unwrap()
    }

    #[test]
    fn diagonal_evolution() {
        let op = spectral(&[1.0, 4.0]);
        let x = real_vector(&[1.0, 1.0]);
        let y = evolve(&op, 1.0, &x).unwrap();
        assert!((y[0].re - (-1f64).exp()).abs() < 1e-16);
        assert!((y[1].re - (-4f64).exp()).abs() < 1e-17);
        assert_eq!(evolve(&op, 0.0, &x).unwrap(), x);
        assert!(matches!(evolve(&op, -1.0, &x), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn jordan_block_evolution() {
        let y = evolve(&jordan(), 2.0, &real_vector(&[0.0, 1.0])).unwrap();
        let e = (-2f64).exp();
        assert!((y[0].re + 2.0 * e).abs() < 1e-15);
        assert!((y[1].re - e).abs() < 1e-15);
    }

    #[test]
    fn inverse_on_second_mode() {
        let op = spectral(&[1.0, 4.0]);
        let y = inverse_evolve(&op, 1.0, &real_vector(&[0.0, 1.0])).unwrap();
        assert_eq!(y[0].re, 0.0);
        assert!((y[1].re - 4f64.exp()).abs() < 1e-13 * 4f64.exp());
        let x = real_vector(&[1.0, 1.0]);
        let back = inverse_evolve(&op, 1.0, &evolve(&op, 1.0, &x).unwrap()).unwrap();
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn inverse_overflow_reports_index() {
        let mut values: Vec<f64> = (1..=30).map(|j| (j * j) as f64).collect();
        values.push(900.0);
        let op = spectral(&values);
        let mut x = Coefficients::zeros(31);
        x[30] = Complex64::new(1.0, 0.0);
        match inverse_evolve(&op, 1.0, &x) {
            Err(Error::OverflowRisk { index, .. }) => assert_eq!(index, 30),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn decaying_rule_is_in_domain() {
        let model = squares(32);
        let d = domain_membership(
            &model,
            1.0,
            &CoefficientRule::ExpDecay { beta: 2.0 },
            &[8, 16, 32],
            &DomainSettings::default(),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::InDomain);
        assert!(d.graph_norms.windows(2).all(|w| w[0].log <= w[1].log));
    }

    #[test]
    fn spike_is_not_in_domain() {
        let model = squares(8);
        let mut c = Coefficients::zeros(8);
        c[5] = Complex64::new(1.0, 0.0);
        let d = domain_membership(
            &model,
            1.0,
            &CoefficientRule::data(c.clone()),
            &CoefficientRule::data(c).default_levels(8),
            &DomainSettings::default(),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::NotInDomain);
        assert!((d.graph_norms.last().unwrap().log - 36.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rule_is_in_domain() {
        let model = squares(16);
        let d = domain_membership(
            &model,
            1.0,
            &CoefficientRule::data(Coefficients::zeros(16)),
            &[16, 32, 64],
            &DomainSettings::default(),
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::InDomain);
        assert_eq!(d.graph_norms.last().unwrap().value, 0.0);
    }

    #[test]
    fn noise_floor_excludes_coordinates() {
        let model = squares(4);
        let c = real_vector(&[1.0, 0.0, 0.0, 1e-20]);
        let rule = CoefficientRule::Data {
            coefficients: c,
            noise: vec![1e-16; 4],
            scale: None,
        };
        let d = domain_membership(&model, 10.0, &rule, &[4, 8, 16], &DomainSettings::default())
            .unwrap();
        assert_eq!(d.unresolved, 1);
        assert!((d.max_log_amplification - 10.0).abs() < 1e-12);
        assert_eq!(d.verdict, Verdict::InDomain);
    }

    #[test]
    fn bad_levels() {
        let model = squares(4);
        let rule = CoefficientRule::ExpDecay { beta: 1.0 };
        let s = DomainSettings::default();
        assert!(domain_membership(&model, 1.0, &rule, &[], &s).is_err());
        assert!(domain_membership(&model, 1.0, &rule, &[2, 2], &s).is_err());
        assert!(matches!(
            domain_membership(&model, 1.0, &rule, &[2, 8], &s),
            Err(Error::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn scalar_height_profile() {
        let op = spectral(&[1.0]);
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.02).collect();
        let p = height_profile(&op, &real_vector(&[1.0]), &times).unwrap();
        assert!(p.strictly_convex());
        assert!((p.initial_slope + 1.0).abs() < 1e-5);
        assert!(p.slope_bound_holds(1e-5));
    }

    #[test]
    fn two_mode_height_profile() {
        let op = spectral(&[1.0, 4.0]);
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.04).collect();
        let p = height_profile(&op, &real_vector(&[1.0, 1.0]), &times).unwrap();
        assert!((p.values[0] - 2f64.sqrt()).abs() < 1e-15);
        for (t, h) in p.times.iter().zip(&p.values) {
            let exact = ((-2.0 * t).exp() + (-8.0 * t).exp()).sqrt();
            assert!((h - exact).abs() < 1e-15);
        }
        assert!(p.strictly_convex());
    }

    #[test]
    fn jordan_height_profile() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let p = height_profile(&jordan(), &real_vector(&[1.0, 0.0]), &times).unwrap();
        assert!((p.initial_slope + 1.0).abs() < 1e-5);
        assert!((p.slope_bound + 0.5).abs() < 1e-14);
        assert!(p.slope_bound_holds(0.0));
        assert!(matches!(
            height_profile(&jordan(), &real_vector(&[0.0, 0.0]), &times),
            Err(Error::ZeroInitialState)
        ));
    }
}
