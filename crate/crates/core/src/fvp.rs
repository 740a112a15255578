//! The abstract final value problem `u' + Au = f`, `u(T) = u_T`: compatibility
//! of the data, reconstruction of `u(0)`, backward solution and the norms of the
//! solution and data spaces.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::duhamel::{duhamel_path, source_yield, Interpolation, SolutionPath, SourceTerm, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::Coefficients;
use crate::operator::{Operator, SpectralModel};
use crate::semigroup::{
    amplify, domain_membership, inverse_evolve, CoefficientRule, DomainDiagnostic, DomainSettings,
    LogValue, Verdict,
};

/// Multiple of machine epsilon used for the per-coordinate rounding floor of
/// computed differences.
pub const NOISE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct FinalValueProblem {
    pub op: Operator,
    pub f: SourceTerm,
    pub u_final: Coefficients,
    pub grid: TimeGrid,
}

impl FinalValueProblem {
    pub fn new(op: Operator, f: SourceTerm, u_final: Coefficients, grid: TimeGrid) -> Result<Self> {
        op.check_dim(u_final.len())?;
        f.validate(&grid, op.dim())?;
        Ok(Self {
            op,
            f,
            u_final,
            grid,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.grid.t_final()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompatibilityOptions {
    pub domain: DomainSettings,
    /// Truncation levels; the rule's defaults when absent.
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub y_f: Coefficients,
    /// The vector tested for membership in `D(e^{TA})`, here `u_T - y_f`.
    pub difference: Coefficients,
    pub diagnostic: DomainDiagnostic,
    /// `e^{TA}(u_T - y_f)`, present iff the verdict is `InDomain`.
    pub reconstructed_u0: Option<Coefficients>,
    /// `|e^{TA}(u_T - y_f)|` over resolved coordinates.
    pub amplified_norm: LogValue,
    /// `(|u_T|^2 + ∫ ‖f‖_*^2 dt + |e^{TA}(u_T - y_f)|^2)^{1/2}`.
    pub y_norm: LogValue,
}

impl CompatibilityReport {
    pub fn verdict(&self) -> Verdict {
        self.diagnostic.verdict
    }
}

/// Outcome of testing one vector for membership in `D(e^{TA})`.
pub(crate) struct Assessment {
    pub diagnostic: DomainDiagnostic,
    /// `e^{TA} x` over resolved coordinates when it is finite.
    pub amplified: Option<Coefficients>,
    pub amplified_log_norm: f64,
}

pub(crate) fn assess(
    op: &Operator,
    t_final: f64,
    x: &Coefficients,
    noise: Vec<f64>,
    scale: f64,
    options: &CompatibilityOptions,
) -> Result<Assessment> {
    match op {
        Operator::Spectral(model) => {
            let rule = CoefficientRule::Data {
                coefficients: x.clone(),
                noise: noise.clone(),
                scale: Some(scale),
            };
            let levels = options
                .levels
                .clone()
                .unwrap_or_else(|| rule.default_levels(model.dim()));
            let diagnostic = domain_membership(model, t_final, &rule, &levels, &options.domain)?;

            let mut amplified = Some(Coefficients::zeros(x.len()));
            let mut log_sq = f64::NEG_INFINITY;
            for (j, (z, &lambda)) in x.iter().zip(model.eigenvalues()).enumerate() {
                let modulus = z.norm();
                if modulus == 0.0 || modulus <= noise.get(j).copied().unwrap_or(0.0) {
                    continue;
                }
                log_sq = log_add(log_sq, 2.0 * (t_final * lambda + modulus.ln()));
                if let Some(v) = amplified.as_mut() {
                    match amplify(*z, t_final * lambda) {
                        Some(w) => v[j] = w,
                        None => amplified = None,
                    }
                }
            }
            Ok(Assessment {
                diagnostic,
                amplified,
                amplified_log_norm: 0.5 * log_sq,
            })
        }
        Operator::Matrix(_) => {
            let h_norm = op.h_norm(x);
            let (amplified, log_norm) = match inverse_evolve(op, t_final, x) {
                Ok(v) => {
                    let n = op.h_norm(&v);
                    (Some(v), n.ln())
                }
                Err(Error::OverflowRisk { log_magnitude, .. }) => (None, log_magnitude + h_norm.ln()),
                Err(e) => return Err(e),
            };
            let max_amp = log_norm - scale.ln();
            let graph_log = 0.5 * log_add(2.0 * h_norm.ln(), 2.0 * log_norm);
            let verdict = if amplified.is_none() || max_amp > options.domain.amplification_limit {
                Verdict::NotInDomain
            } else {
                Verdict::InDomain
            };
            Ok(Assessment {
                diagnostic: DomainDiagnostic {
                    levels: vec![op.dim()],
                    graph_norms: vec![LogValue::from_log(graph_log)],
                    ratios: Vec::new(),
                    tail: 0.0,
                    max_log_amplification: if h_norm == 0.0 { f64::NEG_INFINITY } else { max_amp },
                    unresolved: 0,
                    verdict,
                    threshold: options.domain.tau,
                    amplification_limit: options.domain.amplification_limit,
                },
                amplified,
                amplified_log_norm: log_norm,
            })
        }
    }
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Rounding floor `NOISE_FACTOR · ε · Σ |v_j|` of a sum of the given vectors.
pub(crate) fn rounding_floor(parts: &[&Coefficients]) -> Vec<f64> {
    let n = parts.first().map_or(0, |p| p.len());
    (0..n)
        .map(|j| NOISE_FACTOR * f64::EPSILON * parts.iter().map(|p| p[j].norm()).sum::<f64>())
        .collect()
}

/// Tests `u_T - y_f ∈ D(e^{TA})` and reconstructs `u(0)` on success.
pub fn compatibility_check(
    problem: &FinalValueProblem,
    options: &CompatibilityOptions,
) -> Result<CompatibilityReport> {
    let op = &problem.op;
    let y_f = source_yield(op, &problem.f, &problem.grid)?;
    let difference = &problem.u_final - &y_f;
    let noise = rounding_floor(&[&problem.u_final, &y_f]);
    let scale = op.h_norm(&problem.u_final).max(op.h_norm(&y_f));
    let assessment = assess(op, problem.t_final(), &difference, noise, scale, options)?;

    let f_sq = problem.f.dual_l2_squared(op, &problem.grid)?;
    let y_norm = y_norm_log(op.h_norm(&problem.u_final), f_sq, assessment.amplified_log_norm);
    let reconstructed_u0 = match assessment.diagnostic.verdict {
        Verdict::InDomain => assessment.amplified,
        _ => None,
    };
    Ok(CompatibilityReport {
        y_f,
        difference,
        diagnostic: assessment.diagnostic,
        reconstructed_u0,
        amplified_norm: LogValue::from_log(assessment.amplified_log_norm),
        y_norm,
    })
}

/// `(u_T_norm^2 + f_dual_sq + exp(2 amplified_log))^{1/2}` in log form.
pub(crate) fn y_norm_log(u_final_norm: f64, f_dual_sq: f64, amplified_log: f64) -> LogValue {
    let log_sq = log_add(
        log_add(2.0 * u_final_norm.ln(), f_dual_sq.ln()),
        2.0 * amplified_log,
    );
    LogValue::from_log(0.5 * log_sq)
}

/// The data-space norm of `(f, u_T)` given `|e^{TA}(u_T - y_f)|`.
pub fn y_norm(
    op: &Operator,
    f: &SourceTerm,
    grid: &TimeGrid,
    u_final: &Coefficients,
    amplified_norm: f64,
) -> Result<f64> {
    let f_sq = f.dual_l2_squared(op, grid)?;
    Ok((op.h_norm(u_final).powi(2) + f_sq + amplified_norm.powi(2)).sqrt())
}

/// The backward solution through the reconstructed initial state.
pub fn solve_final_value(
    problem: &FinalValueProblem,
    report: &CompatibilityReport,
) -> Result<SolutionPath> {
    let u0 = report
        .reconstructed_u0
        .as_ref()
        .filter(|_| report.verdict() == Verdict::InDomain)
        .ok_or_else(|| Error::NotCompatible {
            verdict: report.verdict().to_string(),
        })?;
    duhamel_path(&problem.op, u0, &problem.f, &problem.grid)
}

/// `(∫ (‖u‖^2 + ‖u'‖_*^2) dt + max_k |u(t_k)|^2)^{1/2}`, trapezoid in time.
pub fn x_norm(op: &Operator, path: &SolutionPath) -> Result<f64> {
    let derivatives = path.derivative_states.as_ref().ok_or(Error::MissingDerivatives)?;
    let mut integrand = Vec::with_capacity(path.states.len());
    let mut sup = 0.0f64;
    for (u, du) in path.states.iter().zip(derivatives) {
        let nu = op.norms(u)?;
        let ndu = op.norms(du)?;
        integrand.push(nu.v * nu.v + ndu.dual * ndu.dual);
        sup = sup.max(nu.h * nu.h);
    }
    Ok((path.grid.trapezoid(&integrand) + sup).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstabilityRow {
    /// One-based mode index.
    pub k: usize,
    pub lambda: f64,
    /// `ln |u_k(0)|` for final data `u_T = e_k`.
    pub log_norm: f64,
    pub norm: f64,
}

/// `|u_k(0)| = e^{Tλ_k}` for the unit final data `u_T = e_k`, read off the
/// reconstruction `e^{TA} e_k` in log form.
pub fn instability_table(model: &SpectralModel, t_final: f64, ks: &[usize]) -> Result<Vec<InstabilityRow>> {
    if !(t_final >= 0.0) {
        return Err(Error::NegativeTime(t_final));
    }
    ks.iter()
        .map(|&k| {
            if k == 0 || k > model.dim() {
                return Err(Error::InvalidArgument(format!(
                    "mode {k} outside 1..={}",
                    model.dim()
                )));
            }
            let lambda = model.eigenvalues()[k - 1];
            let unit = Complex64::new(1.0, 0.0);
            let log_norm = t_final * lambda + unit.norm().ln();
            Ok(InstabilityRow {
                k,
                lambda,
                log_norm,
                norm: log_norm.exp(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Running maximum of `ratios`.
    pub empirical_c: f64,
    /// `x_norm / y_norm` per sample.
    pub ratios: Vec<f64>,
}

/// Number of cosine modes in the time profile of a random source.
const PROBE_TIME_MODES: usize = 3;

/// Draws one compatible instance `(u0, f)`: `u0_j ~ N(0,1)/(1+λ_j)` and
/// `f(t) = Σ_m ξ_m cos(mπt/T)` with `ξ_m` standard normal in V*-normalised
/// coordinates. The time profile does not depend on the grid.
pub fn random_instance(op: &Operator, grid: &TimeGrid, rng: &mut ChaCha8Rng) -> (Coefficients, SourceTerm) {
    let n = op.dim();
    let weights: Vec<f64> = match op {
        Operator::Spectral(model) => model.eigenvalues().to_vec(),
        Operator::Matrix(_) => vec![0.0; n],
    };
    let u0 = Coefficients::from_iterator(
        n,
        weights.iter().map(|&l| {
            let x: f64 = StandardNormal.sample(rng);
            Complex64::new(x / (1.0 + l), 0.0)
        }),
    );
    let dual_scale: Vec<f64> = match op {
        Operator::Spectral(model) => model.eigenvalues().iter().map(|l| l.sqrt()).collect(),
        Operator::Matrix(_) => vec![1.0; n],
    };
    let xi: Vec<Vec<f64>> = (0..PROBE_TIME_MODES)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let t_final = grid.t_final();
    let f = SourceTerm::sample(grid, Interpolation::PiecewiseLinear, |t| {
        Coefficients::from_iterator(
            n,
            (0..n).map(|j| {
                let v: f64 = xi
                    .iter()
                    .enumerate()
                    .map(|(m, x)| x[j] * (m as f64 * std::f64::consts::PI * t / t_final).cos())
                    .sum();
                Complex64::new(dual_scale[j] * v, 0.0)
            }),
        )
    });
    (u0, f)
}

/// Empirical continuity constant `max ‖u‖_X / ‖(f, u_T)‖_Y` over random
/// compatible instances. For these `e^{TA}(u_T - y_f) = u0` exactly, which
/// supplies the last term of the data norm.
pub fn stability_probe(op: &Operator, grid: &TimeGrid, n_samples: usize, seed: u64) -> Result<ProbeResult> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<_> = (0..n_samples).map(|_| random_instance(op, grid, &mut rng)).collect();
    let ratios = instances
        .par_iter()
        .map(|(u0, f)| instance_ratio(op, grid, u0, f))
        .collect::<Result<Vec<_>>>()?;
    let empirical_c = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ProbeResult { empirical_c, ratios })
}

/// `x_norm / y_norm` of the instance generated from `(u0, f)`.
pub fn instance_ratio(op: &Operator, grid: &TimeGrid, u0: &Coefficients, f: &SourceTerm) -> Result<f64> {
    let path = duhamel_path(op, u0, f, grid)?;
    let x = x_norm(op, &path)?;
    let y = y_norm(op, f, grid, path.final_state(), op.h_norm(u0))?;
    Ok(if y == 0.0 { 0.0 } else { x / y })
}
