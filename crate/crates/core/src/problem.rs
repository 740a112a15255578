//! JSON problem files.
//!
//! ```json
//! {
//!   "operator": {"kind": "spectral", "eigenvalues": [1, 4, 9]},
//!   "T": 1.0,
//!   "grid": {"M": 64, "grading": 2.0, "cluster": "end"},
//!   "f": {"kind": "constant", "value": [0, 1, 0]},
//!   "u_T": [0.1, 0.2, [0.0, 1e-3]]
//! }
//! ```
//!
//! Scalars are reals or `[re, im]` pairs, matrices are arrays of rows. The
//! operator is one of `spectral`, `power_law` (`count`, `scale`, `power`) or
//! `matrix` (`gram_h`, `gram_v`, `form`); a `domain` (`interval` or `rectangle`
//! with `lengths` and `truncation`) replaces it with the Dirichlet Laplacian.
//! `f` is `zero`, `constant` or `samples` (one vector per node); `g` holds
//! `components` with one entry per boundary component, each either a constant
//! or one value per node (edge sine coefficients on a rectangle). `u_T` is a
//! vector, `"boundary_lift"` (the lift of `g(T)`) or `{"forward_from": u0}`.
//! Errors carry the JSON pointer of the offending value.

use num_complex::Complex64;
use serde_json::{Map, Value};

use crate::duhamel::{duhamel_path, ClusterEnd, Interpolation, SourceTerm, TimeGrid};
use crate::error::{Error, Result};
use crate::heat::{eigenbasis, forward_heat, poisson_lift, BoundaryData, HeatBasis, HeatDomain, TraceKind};
use crate::linalg::{CMatrix, Coefficients};
use crate::operator::{LaxMilgramOperator, Operator, SpectralModel};

pub const MAX_CELLS: usize = 1 << 16;
pub const MAX_DIM: usize = 1 << 14;
pub const MAX_MATRIX_DIM: usize = 256;
/// Bound on `(M + 1) · dim`, the size of one sampled path.
pub const MAX_PATH_ENTRIES: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub enum FinalData {
    Explicit(Coefficients),
    BoundaryLift,
    ForwardFrom(Coefficients),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub ks: Option<Vec<usize>>,
    pub lambdas: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub tau: Option<f64>,
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub operator: Operator,
    pub basis: Option<HeatBasis>,
    pub t_final: Option<f64>,
    pub grid: Option<TimeGrid>,
    pub f: Option<SourceTerm>,
    pub g: Option<BoundaryData>,
    pub u_final: Option<FinalData>,
    pub u0: Option<Coefficients>,
    pub params: Params,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn t_final(&self) -> Result<f64> {
        self.t_final.ok_or_else(|| Error::config("/T", "required by this command"))
    }

    pub fn grid(&self) -> Result<&TimeGrid> {
        self.grid.as_ref().ok_or_else(|| Error::config("/grid", "required by this command"))
    }

    pub fn basis(&self) -> Result<&HeatBasis> {
        self.basis.as_ref().ok_or_else(|| Error::config("/domain", "required by this command"))
    }

    pub fn spectral(&self) -> Result<&SpectralModel> {
        self.operator
            .as_spectral()
            .ok_or_else(|| Error::config("/operator", "a spectral operator is required by this command"))
    }

    /// The source, zero when absent.
    pub fn source(&self) -> Result<SourceTerm> {
        match &self.f {
            Some(f) => Ok(f.clone()),
            None => Ok(SourceTerm::zero(self.dim(), self.grid()?)),
        }
    }

    /// The boundary data, zero when absent.
    pub fn boundary(&self) -> Result<BoundaryData> {
        match &self.g {
            Some(g) => Ok(g.clone()),
            None => Ok(BoundaryData::zero(&self.basis()?.domain, self.grid()?)),
        }
    }

    pub fn initial_state(&self) -> Result<&Coefficients> {
        self.u0.as_ref().ok_or_else(|| Error::config("/u0", "required by this command"))
    }

    /// Resolves `u_T`.
    pub fn final_state(&self) -> Result<Coefficients> {
        match self.u_final.as_ref().ok_or_else(|| Error::config("/u_T", "required by this command"))? {
            FinalData::Explicit(v) => Ok(v.clone()),
            FinalData::BoundaryLift => {
                let basis = self.basis()?;
                let g = self.g.as_ref().ok_or_else(|| Error::config("/g", "boundary_lift needs g"))?;
                let last = self.grid()?.nodes().len() - 1;
                Ok(poisson_lift(basis, &g.slice(last))?.coefficients)
            }
            FinalData::ForwardFrom(u0) => {
                let grid = self.grid()?;
                let f = self.source()?;
                let path = match &self.basis {
                    Some(basis) => forward_heat(basis, u0, &f, &self.boundary()?, grid)?,
                    None => duhamel_path(&self.operator, u0, &f, grid)?,
                };
                Ok(path.final_state().clone())
            }
        }
    }
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::config("", e.to_string()))?;
    problem_from_value(&root)
}

pub fn problem_from_value(root: &Value) -> Result<ProblemSpec> {
    let obj = object(root, "")?;
    let (operator, basis) = match (obj.get("domain"), obj.get("operator")) {
        (Some(d), _) => {
            let basis = decode_domain(d, "/domain")?;
            (basis.operator().clone(), Some(basis))
        }
        (None, Some(op)) => (decode_operator(op, "/operator")?, None),
        (None, None) => return Err(Error::config("", "expected \"operator\" or \"domain\"")),
    };
    let dim = operator.dim();

    let t_final = obj.get("T").map(|t| positive(t, "/T")).transpose()?;
    let grid = match obj.get("grid") {
        Some(g) => {
            let t_final = t_final.ok_or_else(|| Error::config("/T", "required with a grid"))?;
            Some(decode_grid(g, "/grid", t_final)?)
        }
        None => None,
    };
    if let Some(grid) = &grid {
        if grid.nodes().len().saturating_mul(dim) > MAX_PATH_ENTRIES {
            return Err(Error::config("/grid/M", format!("(M + 1) · dim exceeds {MAX_PATH_ENTRIES}")));
        }
    }
    let need_grid = |p: &str| grid.as_ref().ok_or_else(|| Error::config(p, "requires \"grid\" and \"T\""));

    let f = match obj.get("f") {
        Some(v) => Some(decode_source(v, "/f", need_grid("/f")?, dim)?),
        None => None,
    };
    let g = match obj.get("g") {
        Some(v) => {
            let basis = basis.as_ref().ok_or_else(|| Error::config("/g", "boundary data needs a \"domain\""))?;
            Some(decode_boundary(v, "/g", &basis.domain, need_grid("/g")?)?)
        }
        None => None,
    };
    let u_final = match obj.get("u_T") {
        Some(Value::String(s)) if s == "boundary_lift" => {
            if g.is_none() {
                return Err(Error::config("/u_T", "boundary_lift needs g"));
            }
            Some(FinalData::BoundaryLift)
        }
        Some(Value::Object(m)) if m.contains_key("forward_from") => {
            need_grid("/u_T")?;
            Some(FinalData::ForwardFrom(decode_vector_dim(&m["forward_from"], "/u_T/forward_from", dim)?))
        }
        Some(v) => Some(FinalData::Explicit(decode_vector_dim(v, "/u_T", dim)?)),
        None => None,
    };
    let u0 = match obj.get("u0") {
        Some(v) => Some(decode_vector_dim(v, "/u0", dim)?),
        None => None,
    };
    let params = match obj.get("params") {
        Some(v) => decode_params(v, "/params")?,
        None => Params::default(),
    };
    Ok(ProblemSpec {
        operator,
        basis,
        t_final,
        grid,
        f,
        g,
        u_final,
        u0,
        params,
    })
}

fn object<'a>(v: &'a Value, pointer: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::config(pointer, "expected an object"))
}

fn array<'a>(v: &'a Value, pointer: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::config(pointer, "expected an array"))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, pointer: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::config(format!("{pointer}/{key}"), "missing"))
}

fn number(v: &Value, pointer: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(pointer, "expected a finite number"))
}

fn positive(v: &Value, pointer: &str) -> Result<f64> {
    let x = number(v, pointer)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::config(pointer, format!("expected a positive number, got {x}")))
    }
}

fn count(v: &Value, pointer: &str, max: usize) -> Result<usize> {
    let n = v.as_u64().ok_or_else(|| Error::config(pointer, "expected a non-negative integer"))?;
    if n == 0 || n > max as u64 {
        return Err(Error::config(pointer, format!("expected an integer in 1..={max}")));
    }
    Ok(n as usize)
}

fn kind<'a>(obj: &'a Map<String, Value>, pointer: &str) -> Result<&'a str> {
    field(obj, "kind", pointer)?
        .as_str()
        .ok_or_else(|| Error::config(format!("{pointer}/kind"), "expected a string"))
}

/// A real number or an `[re, im]` pair.
pub fn decode_scalar(v: &Value, pointer: &str) -> Result<Complex64> {
    match v {
        Value::Array(pair) if pair.len() == 2 => Ok(Complex64::new(
            number(&pair[0], &format!("{pointer}/0"))?,
            number(&pair[1], &format!("{pointer}/1"))?,
        )),
        Value::Array(_) => Err(Error::config(pointer, "complex scalars are [re, im] pairs")),
        _ => Ok(Complex64::new(number(v, pointer)?, 0.0)),
    }
}

pub fn decode_vector(v: &Value, pointer: &str) -> Result<Coefficients> {
    let items = array(v, pointer)?;
    if items.len() > MAX_DIM {
        return Err(Error::config(pointer, format!("more than {MAX_DIM} entries")));
    }
    let values = items
        .iter()
        .enumerate()
        .map(|(i, x)| decode_scalar(x, &format!("{pointer}/{i}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Coefficients::from_vec(values))
}

fn decode_vector_dim(v: &Value, pointer: &str, dim: usize) -> Result<Coefficients> {
    let x = decode_vector(v, pointer)?;
    if x.len() != dim {
        return Err(Error::config(pointer, format!("expected {dim} entries, found {}", x.len())));
    }
    Ok(x)
}

/// A square matrix given as an array of rows.
pub fn decode_matrix(v: &Value, pointer: &str) -> Result<CMatrix> {
    let rows = array(v, pointer)?;
    let n = rows.len();
    if n == 0 || n > MAX_MATRIX_DIM {
        return Err(Error::config(pointer, format!("expected 1..={MAX_MATRIX_DIM} rows")));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let p = format!("{pointer}/{i}");
        let entries = array(row, &p)?;
        if entries.len() != n {
            return Err(Error::config(p, format!("row has {} entries, matrix is {n}x{n}", entries.len())));
        }
        for (j, x) in entries.iter().enumerate() {
            m[(i, j)] = decode_scalar(x, &format!("{p}/{j}"))?;
        }
    }
    Ok(m)
}

fn decode_reals(v: &Value, pointer: &str) -> Result<Vec<f64>> {
    let items = array(v, pointer)?;
    if items.len() > MAX_DIM {
        return Err(Error::config(pointer, format!("more than {MAX_DIM} entries")));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{pointer}/{i}")))
        .collect()
}

fn with_pointer(pointer: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(pointer, other.to_string()),
    }
}

fn decode_operator(v: &Value, pointer: &str) -> Result<Operator> {
    let obj = object(v, pointer)?;
    match kind(obj, pointer)? {
        "spectral" => {
            let values = decode_reals(field(obj, "eigenvalues", pointer)?, &format!("{pointer}/eigenvalues"))?;
            let label = obj.get("label").and_then(Value::as_str).unwrap_or("spectral");
            Ok(SpectralModel::new(values, label).map_err(with_pointer(&format!("{pointer}/eigenvalues")))?.into())
        }
        "power_law" => {
            let n = count(field(obj, "count", pointer)?, &format!("{pointer}/count"), MAX_DIM)?;
            let scale = positive(field(obj, "scale", pointer)?, &format!("{pointer}/scale"))?;
            let power = number(field(obj, "power", pointer)?, &format!("{pointer}/power"))?;
            Ok(SpectralModel::power_law(n, scale, power).map_err(with_pointer(pointer))?.into())
        }
        "matrix" => {
            let form = decode_matrix(field(obj, "form", pointer)?, &format!("{pointer}/form"))?;
            let n = form.nrows();
            let gram = |key: &str| -> Result<CMatrix> {
                match obj.get(key) {
                    Some(m) => {
                        let g = decode_matrix(m, &format!("{pointer}/{key}"))?;
                        if g.nrows() != n {
                            return Err(Error::config(format!("{pointer}/{key}"), format!("expected {n}x{n}")));
                        }
                        Ok(g)
                    }
                    None => Ok(CMatrix::identity(n, n)),
                }
            };
            let (gram_h, gram_v) = (gram("gram_h")?, gram("gram_v")?);
            Ok(LaxMilgramOperator::build(gram_h, gram_v, form).map_err(with_pointer(pointer))?.into())
        }
        other => Err(Error::config(format!("{pointer}/kind"), format!("unknown operator kind {other:?}"))),
    }
}

fn decode_domain(v: &Value, pointer: &str) -> Result<HeatBasis> {
    let obj = object(v, pointer)?;
    let lengths = decode_reals(field(obj, "lengths", pointer)?, &format!("{pointer}/lengths"))?;
    let trunc_ptr = format!("{pointer}/truncation");
    let truncation = field(obj, "truncation", pointer)?;
    let domain = match kind(obj, pointer)? {
        "interval" => {
            if lengths.len() != 1 {
                return Err(Error::config(format!("{pointer}/lengths"), "an interval has one length"));
            }
            HeatDomain::interval(lengths[0], count(truncation, &trunc_ptr, MAX_DIM)?)
        }
        "rectangle" => {
            if lengths.len() != 2 {
                return Err(Error::config(format!("{pointer}/lengths"), "a rectangle has two lengths"));
            }
            let (n1, n2) = match truncation {
                Value::Array(a) if a.len() == 2 => (
                    count(&a[0], &format!("{trunc_ptr}/0"), MAX_DIM)?,
                    count(&a[1], &format!("{trunc_ptr}/1"), MAX_DIM)?,
                ),
                other => {
                    let n = count(other, &trunc_ptr, MAX_DIM)?;
                    (n, n)
                }
            };
            if n1.saturating_mul(n2) > MAX_DIM {
                return Err(Error::config(trunc_ptr, format!("more than {MAX_DIM} modes")));
            }
            HeatDomain::rectangle([lengths[0], lengths[1]], [n1, n2])
        }
        other => return Err(Error::config(format!("{pointer}/kind"), format!("unknown domain kind {other:?}"))),
    };
    eigenbasis(&domain).map_err(with_pointer(pointer))
}

fn decode_grid(v: &Value, pointer: &str, t_final: f64) -> Result<TimeGrid> {
    let obj = object(v, pointer)?;
    let cells = count(field(obj, "M", pointer)?, &format!("{pointer}/M"), MAX_CELLS)?;
    let grading = match obj.get("grading") {
        Some(q) => number(q, &format!("{pointer}/grading"))?,
        None => 1.0,
    };
    let cluster = match obj.get("cluster").map(|c| c.as_str()) {
        None if grading == 1.0 => ClusterEnd::None,
        None => ClusterEnd::End,
        Some(Some("end")) => ClusterEnd::End,
        Some(Some("start")) => ClusterEnd::Start,
        Some(Some("none")) => ClusterEnd::None,
        Some(_) => return Err(Error::config(format!("{pointer}/cluster"), "expected \"end\", \"start\" or \"none\"")),
    };
    TimeGrid::graded(t_final, cells, grading, cluster).map_err(with_pointer(pointer))
}

fn decode_interpolation(obj: &Map<String, Value>, pointer: &str) -> Result<Interpolation> {
    match obj.get("interpolation").map(|v| v.as_str()) {
        None | Some(Some("piecewise_linear")) => Ok(Interpolation::PiecewiseLinear),
        Some(Some("piecewise_constant_left")) => Ok(Interpolation::PiecewiseConstantLeft),
        Some(_) => Err(Error::config(
            format!("{pointer}/interpolation"),
            "expected \"piecewise_linear\" or \"piecewise_constant_left\"",
        )),
    }
}

fn decode_source(v: &Value, pointer: &str, grid: &TimeGrid, dim: usize) -> Result<SourceTerm> {
    let obj = object(v, pointer)?;
    let interpolation = decode_interpolation(obj, pointer)?;
    match kind(obj, pointer)? {
        "zero" => Ok(SourceTerm::zero(dim, grid)),
        "constant" => {
            let value = decode_vector_dim(field(obj, "value", pointer)?, &format!("{pointer}/value"), dim)?;
            Ok(SourceTerm { interpolation, ..SourceTerm::constant(&value, grid) })
        }
        "samples" => {
            let p = format!("{pointer}/samples");
            let rows = array(field(obj, "samples", pointer)?, &p)?;
            if rows.len() != grid.nodes().len() {
                return Err(Error::config(p, format!("expected {} samples (M + 1)", grid.nodes().len())));
            }
            let samples = rows
                .iter()
                .enumerate()
                .map(|(i, r)| decode_vector_dim(r, &format!("{p}/{i}"), dim))
                .collect::<Result<Vec<_>>>()?;
            Ok(SourceTerm::new(samples, interpolation))
        }
        other => Err(Error::config(format!("{pointer}/kind"), format!("unknown source kind {other:?}"))),
    }
}

/// Boundary traces. On an interval a component is a number (constant in time)
/// or one number per node; on a rectangle it is a coefficient vector (constant
/// in time) or `{"samples": [...]}` with one vector per node.
pub fn decode_boundary(v: &Value, pointer: &str, domain: &HeatDomain, grid: &TimeGrid) -> Result<BoundaryData> {
    let obj = object(v, pointer)?;
    let interpolation = decode_interpolation(obj, pointer)?;
    let p = format!("{pointer}/components");
    let comps = array(field(obj, "components", pointer)?, &p)?;
    let expected = domain.boundary_components();
    if comps.len() != expected {
        return Err(Error::config(p, format!("expected {expected} boundary components")));
    }
    let nodes = grid.nodes().len();
    let (kind, components) = match domain {
        HeatDomain::Interval(_) => {
            let components = comps
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    let cp = format!("{p}/{c}");
                    let values: Vec<Complex64> = match v {
                        Value::Array(items) if items.len() == nodes && !is_pair(v) => items
                            .iter()
                            .enumerate()
                            .map(|(i, x)| decode_scalar(x, &format!("{cp}/{i}")))
                            .collect::<Result<_>>()?,
                        Value::Array(items) if !is_pair(v) => {
                            return Err(Error::config(cp, format!("expected {nodes} samples, found {}", items.len())))
                        }
                        _ => vec![decode_scalar(v, &cp)?; nodes],
                    };
                    Ok(values.into_iter().map(|z| Coefficients::from_element(1, z)).collect())
                })
                .collect::<Result<Vec<Vec<Coefficients>>>>()?;
            (TraceKind::PointValues, components)
        }
        HeatDomain::Rectangle(_) => {
            let components = comps
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    let cp = format!("{p}/{c}");
                    match v {
                        Value::Object(m) => {
                            let sp = format!("{cp}/samples");
                            let rows = array(field(m, "samples", &cp)?, &sp)?;
                            if rows.len() != nodes {
                                return Err(Error::config(sp, format!("expected {nodes} samples")));
                            }
                            let out = rows
                                .iter()
                                .enumerate()
                                .map(|(i, r)| decode_vector(r, &format!("{sp}/{i}")))
                                .collect::<Result<Vec<_>>>()?;
                            if out.iter().any(|x| x.len() != out[0].len()) {
                                return Err(Error::config(sp, "edge samples differ in length"));
                            }
                            Ok(out)
                        }
                        Value::Array(_) => Ok(vec![decode_vector(v, &cp)?; nodes]),
                        _ => Err(Error::config(
                            cp,
                            "rectangle traces are edge sine coefficient vectors; pointwise traces are not supported",
                        )),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let total: usize = components.iter().map(|c| c[0].len()).sum();
            if total.saturating_mul(nodes) > MAX_PATH_ENTRIES {
                return Err(Error::config(p, "boundary data too large"));
            }
            (TraceKind::SineSeries, components)
        }
    };
    let data = BoundaryData { kind, components, interpolation };
    data.validate(domain, grid).map_err(with_pointer(pointer))?;
    Ok(data)
}

fn is_pair(v: &Value) -> bool {
    matches!(v, Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_number))
}

fn decode_params(v: &Value, pointer: &str) -> Result<Params> {
    let obj = object(v, pointer)?;
    let indices = |key: &str| -> Result<Option<Vec<usize>>> {
        obj.get(key)
            .map(|v| {
                let p = format!("{pointer}/{key}");
                let items = array(v, &p)?;
                if items.len() > MAX_DIM {
                    return Err(Error::config(p.clone(), format!("more than {MAX_DIM} entries")));
                }
                items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| count(x, &format!("{p}/{i}"), usize::MAX >> 1))
                    .collect()
            })
            .transpose()
    };
    Ok(Params {
        ks: indices("ks")?,
        lambdas: obj
            .get("lambdas")
            .map(|v| decode_reals(v, &format!("{pointer}/lambdas")))
            .transpose()?,
        samples: obj
            .get("samples")
            .map(|v| count(v, &format!("{pointer}/samples"), 100_000))
            .transpose()?,
        tau: obj.get("tau").map(|v| positive(v, &format!("{pointer}/tau"))).transpose()?,
        levels: indices("levels")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pointer_of(text: &str) -> String {
        match parse_problem(text) {
            Err(Error::Config { pointer, .. }) => pointer,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn spectral_problem_round_trip() {
        let p = parse_problem(
            r#"{"operator": {"kind": "spectral", "eigenvalues": [1, 4]},
                "T": 1, "grid": {"M": 8},
                "f": {"kind": "constant", "value": [1, [0, 2]]},
                "u_T": [0.5, [0, 0.1]]}"#,
        )
        .unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.grid().unwrap().cells(), 8);
        assert_eq!(p.source().unwrap().samples[3][1], Complex64::new(0.0, 2.0));
        assert_eq!(p.final_state().unwrap()[1], Complex64::new(0.0, 0.1));
    }

    #[test]
    fn pointers_locate_errors() {
        assert_eq!(pointer_of(""), "");
        assert_eq!(pointer_of("[]"), "");
        assert_eq!(pointer_of(r#"{"operator": {"kind": "spectral", "eigenvalues": [1, "x"]}}"#), "/operator/eigenvalues/1");
        assert_eq!(pointer_of(r#"{"operator": {"kind": "spectral", "eigenvalues": [1, -1]}}"#), "/operator/eigenvalues");
        assert_eq!(
            pointer_of(r#"{"operator": {"kind": "matrix", "form": [[1, 0], [0]]}}"#),
            "/operator/form/1"
        );
        assert_eq!(
            pointer_of(r#"{"operator": {"kind": "spectral", "eigenvalues": [1]}, "T": 1, "grid": {"M": 0}}"#),
            "/grid/M"
        );
        assert_eq!(pointer_of(r#"{"operator": {"kind": "spectral", "eigenvalues": [1]}, "u_T": [1, 2]}"#), "/u_T");
        assert_eq!(
            pointer_of(r#"{"domain": {"kind": "interval", "lengths": [3], "truncation": 4}, "T": 1, "grid": {"M": 2}, "g": {"components": [[1, 2, 3, 4], 0]}}"#),
            "/g/components/0"
        );
    }

    #[test]
    fn steady_state_file() {
        let p = parse_problem(
            r#"{"domain": {"kind": "interval", "lengths": [3.141592653589793], "truncation": 8},
                "T": 1, "grid": {"M": 16, "grading": 2},
                "g": {"components": [1, -1]}, "u_T": "boundary_lift"}"#,
        )
        .unwrap();
        assert_eq!(p.grid().unwrap().cluster(), ClusterEnd::End);
        let u = p.final_state().unwrap();
        let lift = poisson_lift(p.basis().unwrap(), &p.boundary().unwrap().slice(0)).unwrap();
        assert_eq!(u, lift.coefficients);
    }

    #[test]
    fn matrix_operator_defaults_to_identity_grams() {
        let p = parse_problem(r#"{"operator": {"kind": "matrix", "form": [[2, 1], [-1, 3]]}}"#).unwrap();
        assert!(matches!(p.operator, Operator::Matrix(_)));
        assert!(p.grid().is_err());
    }

    #[test]
    fn rectangle_rejects_point_traces() {
        let ptr = pointer_of(
            r#"{"domain": {"kind": "rectangle", "lengths": [1, 1], "truncation": 3}, "T": 1, "grid": {"M": 2},
                "g": {"components": [1, [0.5], [], []]}}"#,
        );
        assert_eq!(ptr, "/g/components/0");
    }
}
