//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9 and 13, selected by the 1-norm).

use num_complex::Complex64;

use crate::linalg::{matrix_one_norm, CMatrix};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `exp(a)` for a square complex matrix. Non-finite input propagates into the result.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if n == 1 {
        return CMatrix::from_element(1, 1, a[(0, 0)].exp());
    }

    let norm = matrix_one_norm(a);
    if !norm.is_finite() {
        return CMatrix::from_element(n, n, Complex64::new(f64::NAN, f64::NAN));
    }
    for &(degree, theta) in &THETA[..4] {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(a, coeffs);
        }
    }

    let theta13 = THETA[4].1;
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));
    let mut result = pade13(&scaled);
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn solve_pade(u: CMatrix, v: CMatrix) -> CMatrix {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .unwrap_or_else(|| CMatrix::from_element(p.nrows(), p.ncols(), Complex64::new(f64::NAN, 0.0)))
}

fn pade_low(a: &CMatrix, b: &[f64]) -> CMatrix {
    let n = a.nrows();
    let ident = CMatrix::identity(n, n);
    let a2 = a * a;
    let mut u_inner = ident.scale(b[1]);
    let mut v = ident.scale(b[0]);
    let mut power = ident;
    let mut k = 2;
    while k < b.len() {
        power = &power * &a2;
        v += power.scale(b[k]);
        u_inner += power.scale(b[k + 1]);
        k += 2;
    }
    solve_pade(a * u_inner, v)
}

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let ident = CMatrix::identity(n, n);
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_high = a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]);
    let u_inner = &a6 * u_high + a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + ident.scale(b[1]);
    let u = a * u_inner;

    let v_high = a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]);
    let v = &a6 * v_high + a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + ident.scale(b[0]);

    solve_pade(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;

    #[test]
    fn scalar_and_diagonal() {
        let e = expm(&real_matrix(1, 1, &[2.0]));
        assert!((e[(0, 0)].re - 2f64.exp()).abs() < 1e-14 * 2f64.exp());

        let d = expm(&crate::linalg::diagonal(&[-1.0, -4.0, 3.0]));
        for (i, x) in [-1.0f64, -4.0, 3.0].iter().enumerate() {
            assert!((d[(i, i)].re - x.exp()).abs() < 1e-13 * x.exp());
        }
    }

    #[test]
    fn jordan_block_closed_form() {
        // exp(-t [[1,1],[0,1]]) = e^{-t} [[1,-t],[0,1]]
        for &t in &[0.01, 0.7, 2.0, 9.0] {
            let e = expm(&real_matrix(2, 2, &[-t, -t, 0.0, -t]));
            let want = real_matrix(2, 2, &[1.0, -t, 0.0, 1.0]).scale((-t).exp());
            assert!((e - &want).norm() <= 1e-14 * want.norm(), "t = {t}");
        }
    }

    #[test]
    fn rotation_generator() {
        let theta = 1.3;
        let e = expm(&real_matrix(2, 2, &[0.0, -theta, theta, 0.0]));
        let want = real_matrix(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!((e - want).norm() < 1e-14);
    }

    #[test]
    fn zero_matrix_is_identity() {
        let e = expm(&CMatrix::zeros(4, 4));
        assert_eq!(e, CMatrix::identity(4, 4));
    }

    #[test]
    fn non_finite_input_propagates() {
        let e = expm(&real_matrix(2, 2, &[f64::INFINITY, 0.0, 0.0, 1.0]));
        assert!(e.iter().any(|z| !z.re.is_finite()));
    }
}
