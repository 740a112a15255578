//! Finite-dimensional Gelfand triples `V ⊂ H ⊂ V*` and the Lax–Milgram
//! operators induced by bounded V-elliptic sesquilinear forms on them.
//!
//! All three spaces share one coordinate basis. `H` and `V` are described by
//! their Gram matrices; the dual space is never materialised and its norm is
//! evaluated through the Cholesky factor of the `V` Gram matrix.

use nalgebra::{Cholesky, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Coefficients};

/// Relative positive-definiteness tolerance for Gram matrices.
pub const TOL_PD: f64 = 1e-12;

const TOL_HERMITIAN: f64 = 1e-10;

/// The three norms of a vector: `|x|` in H, `‖x‖` in V and `‖x‖_*` in V*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleNorms {
    pub h: f64,
    pub v: f64,
    pub dual: f64,
}

#[derive(Debug, Clone)]
pub struct GelfandTriple {
    gram_h: CMatrix,
    gram_v: CMatrix,
    chol_h: Cholesky<Complex64, Dyn>,
    chol_v: Cholesky<Complex64, Dyn>,
    embedding: f64,
}

impl GelfandTriple {
    pub fn new(gram_h: CMatrix, gram_v: CMatrix) -> Result<Self> {
        check_square(&gram_h)?;
        check_square(&gram_v)?;
        if gram_h.nrows() != gram_v.nrows() {
            return Err(Error::DimensionMismatch {
                expected: gram_h.nrows(),
                found: gram_v.nrows(),
            });
        }
        if gram_h.nrows() == 0 {
            return Err(Error::InvalidArgument("empty Gram matrix".into()));
        }
        check_gram("H", &gram_h)?;
        check_gram("V", &gram_v)?;
        let chol_h = linalg::cholesky(&gram_h).ok_or(Error::NotPositiveDefinite {
            which: "H",
            min_eigenvalue: f64::NAN,
        })?;
        let chol_v = linalg::cholesky(&gram_v).ok_or(Error::NotPositiveDefinite {
            which: "V",
            min_eigenvalue: f64::NAN,
        })?;
        // |v|^2 <= c^2 ‖v‖^2 with c^2 the top eigenvalue of the pencil (gram_H, gram_V)
        let top = linalg::pencil_eigenvalues(&gram_h, &chol_v)
            .last()
            .copied()
            .unwrap_or(0.0);
        Ok(Self {
            gram_h,
            gram_v,
            chol_h,
            chol_v,
            embedding: top.max(0.0).sqrt(),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim), CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.gram_h.nrows()
    }

    pub fn gram_h(&self) -> &CMatrix {
        &self.gram_h
    }

    pub fn gram_v(&self) -> &CMatrix {
        &self.gram_v
    }

    /// Norm constant `c` of the embedding `V ⊂ H`: `|v| <= c ‖v‖`.
    pub fn embedding_constant(&self) -> f64 {
        self.embedding
    }

    pub fn norms(&self, x: &Coefficients) -> Result<TripleNorms> {
        self.check_dim(x.len())?;
        let gx = &self.gram_h * x;
        // sup_v |<x, v>_H| / ‖v‖ = |L_V^{-1} G_H x| with gram_V = L_V L_V^*
        let dual = self
            .chol_v
            .l()
            .solve_lower_triangular(&gx)
            .map(|w| linalg::euclidean_norm(&w))
            .unwrap_or(f64::NAN);
        Ok(TripleNorms {
            h: x.dotc(&gx).re.max(0.0).sqrt(),
            v: linalg::quadratic_form(&self.gram_v, x).sqrt(),
            dual,
        })
    }

    pub fn h_norm(&self, x: &Coefficients) -> f64 {
        linalg::quadratic_form(&self.gram_h, x).sqrt()
    }

    pub(crate) fn chol_h(&self) -> &Cholesky<Complex64, Dyn> {
        &self.chol_h
    }

    pub(crate) fn chol_v(&self) -> &Cholesky<Complex64, Dyn> {
        &self.chol_v
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_gram(which: &'static str, m: &CMatrix) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("{which} Gram matrix has non-finite entries")));
    }
    if linalg::hermitian_defect(m) > TOL_HERMITIAN {
        return Err(Error::InvalidArgument(format!("{which} Gram matrix is not Hermitian")));
    }
    let eig = linalg::hermitian_eigenvalues(m);
    let (min, max) = (eig[0], eig[eig.len() - 1]);
    if max <= 0.0 || min <= TOL_PD * max {
        return Err(Error::NotPositiveDefinite {
            which,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// The operator `A` on `H` with `a(u, v) = <Au, v>_H`, i.e. `gram_H · A = S`.
#[derive(Debug, Clone)]
pub struct LaxMilgramOperator {
    triple: GelfandTriple,
    form: CMatrix,
    operator: CMatrix,
    ellipticity: f64,
    bound: f64,
    lower_bound: f64,
}

impl LaxMilgramOperator {
    /// Builds the operator of the form `a(u, v) = v^* S u` and certifies its
    /// constants through generalised Hermitian eigenvalue problems.
    pub fn build(gram_h: CMatrix, gram_v: CMatrix, form: CMatrix) -> Result<Self> {
        check_square(&form)?;
        let triple = GelfandTriple::new(gram_h, gram_v)?;
        if form.nrows() != triple.dim() {
            return Err(Error::DimensionMismatch {
                expected: triple.dim(),
                found: form.nrows(),
            });
        }
        if form.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("form has non-finite entries".into()));
        }

        let whitened = linalg::whiten(&form, triple.chol_v());
        let bound = whitened.singular_values().max();
        let ellipticity = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&whitened))[0];
        if ellipticity <= TOL_PD * bound.max(f64::MIN_POSITIVE) {
            return Err(Error::NotElliptic { alpha: ellipticity });
        }
        let lower_bound = linalg::pencil_eigenvalues(&form, triple.chol_h())[0];
        let operator = triple.chol_h().solve(&form);

        Ok(Self {
            triple,
            form,
            operator,
            ellipticity,
            bound,
            lower_bound,
        })
    }

    pub fn triple(&self) -> &GelfandTriple {
        &self.triple
    }

    pub fn form(&self) -> &CMatrix {
        &self.form
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.operator
    }

    /// V-ellipticity constant α.
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    /// Boundedness constant C of the form.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `m(A)`: minimum of `Re <Ax, x>_H` over H-unit vectors.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }
}

/// Ascending positive eigenvalues with an implicit orthonormal eigenbasis.
///
/// Coordinates are taken in that eigenbasis, so `H` carries the identity Gram
/// matrix, `V = D(A^{1/2})` carries `diag(λ)` and the dual norm is `|A^{-1/2} x|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    label: String,
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidSpectrum("no eigenvalues".into()));
        }
        for (j, &lambda) in eigenvalues.iter().enumerate() {
            if !lambda.is_finite() || lambda <= 0.0 {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalue {j} is {lambda}, expected a positive finite value"
                )));
            }
            if j > 0 && lambda < eigenvalues[j - 1] {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalues decrease at index {j}"
                )));
            }
        }
        Ok(Self {
            eigenvalues,
            label: label.into(),
        })
    }

    /// `λ_j = scale · j^power` for `j = 1..=count`.
    pub fn power_law(count: usize, scale: f64, power: f64) -> Result<Self> {
        let eigenvalues = (1..=count).map(|j| scale * (j as f64).powf(power)).collect();
        Self::new(eigenvalues, format!("power law {scale}·j^{power}"))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lower_bound(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Leading `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} modes to {n}",
                self.dim()
            )));
        }
        Self::new(self.eigenvalues[..n].to_vec(), self.label.clone())
    }

    pub fn norms(&self, x: &Coefficients) -> Result<TripleNorms> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let (mut h, mut v, mut dual) = (0.0, 0.0, 0.0);
        for (z, &lambda) in x.iter().zip(&self.eigenvalues) {
            let sq = z.norm_sqr();
            h += sq;
            v += lambda * sq;
            dual += sq / lambda;
        }
        Ok(TripleNorms {
            h: h.sqrt(),
            v: v.sqrt(),
            dual: dual.sqrt(),
        })
    }

    /// The same operator seen through [`LaxMilgramOperator::build`].
    pub fn to_lax_milgram(&self) -> Result<LaxMilgramOperator> {
        let n = self.dim();
        LaxMilgramOperator::build(
            CMatrix::identity(n, n),
            linalg::diagonal(&self.eigenvalues),
            linalg::diagonal(&self.eigenvalues),
        )
    }
}

/// A generator `A` of the semigroup `e^{-tA}`, either diagonal in a known
/// eigenbasis or given as a dense matrix.
#[derive(Debug, Clone)]
pub enum Operator {
    Spectral(SpectralModel),
    Matrix(LaxMilgramOperator),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Spectral(model) => model.dim(),
            Operator::Matrix(op) => op.dim(),
        }
    }

    /// `m(A)`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Operator::Spectral(model) => model.lower_bound(),
            Operator::Matrix(op) => op.lower_bound(),
        }
    }

    pub fn norms(&self, x: &Coefficients) -> Result<TripleNorms> {
        match self {
            Operator::Spectral(model) => model.norms(x),
            Operator::Matrix(op) => op.triple().norms(x),
        }
    }

    pub fn h_norm(&self, x: &Coefficients) -> f64 {
        match self {
            Operator::Spectral(_) => linalg::euclidean_norm(x),
            Operator::Matrix(op) => op.triple().h_norm(x),
        }
    }

    pub fn apply(&self, x: &Coefficients) -> Result<Coefficients> {
        self.check_dim(x.len())?;
        Ok(match self {
            Operator::Spectral(model) => Coefficients::from_iterator(
                x.len(),
                x.iter().zip(model.eigenvalues()).map(|(z, &l)| z * l),
            ),
            Operator::Matrix(op) => op.matrix() * x,
        })
    }

    pub fn as_spectral(&self) -> Option<&SpectralModel> {
        match self {
            Operator::Spectral(model) => Some(model),
            Operator::Matrix(_) => None,
        }
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

impl From<SpectralModel> for Operator {
    fn from(model: SpectralModel) -> Self {
        Operator::Spectral(model)
    }
}

impl From<LaxMilgramOperator> for Operator {
    fn from(op: LaxMilgramOperator) -> Self {
        Operator::Matrix(op)
    }
}
