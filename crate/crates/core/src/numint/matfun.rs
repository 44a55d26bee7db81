//! Matrix exponential (scaling and squaring with diagonal Padé approximants)
//! and the first φ-function.

use nalgebra::DMatrix;

use super::NumError;

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

// U and V with r_m(A) = (V - U)^{-1} (V + U).
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut power = DMatrix::identity(n, n);
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for k in (0..b.len()).step_by(2) {
        v += &power * b[k];
        if k + 1 < b.len() {
            u += &power * b[k + 1];
        }
        power = &power * &a2;
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &B13;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// `e^{tA}`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>, NumError> {
    if !a.is_square() {
        return Err(NumError::Dimension(format!("expm needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let scaled = a * t;
    if scaled.iter().any(|x| !x.is_finite()) {
        return Err(NumError::NonFinite("matrix exponential input"));
    }
    let norm = norm1(&scaled);
    for (m, theta) in THETA.iter().take(4) {
        if norm <= *theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(&scaled, b);
            return solve_pade(u, v, 0);
        }
    }
    let theta13 = THETA[4].1;
    let s = ((norm / theta13).log2().ceil()).max(0.0) as i32;
    let reduced = scaled / 2f64.powi(s);
    let (u, v) = pade13(&reduced);
    solve_pade(u, v, s)
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>, squarings: i32) -> Result<DMatrix<f64>, NumError> {
    let p = &v + &u;
    let q = v - u;
    let mut r = q.lu().solve(&p).ok_or(NumError::Singular)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(NumError::Overflow);
    }
    Ok(r)
}

/// `φ_1(tA) = Σ_k (tA)^k / (k+1)!`, read off the exponential of the block
/// matrix `[[tA, I], [0, 0]]`, which is `[[e^{tA}, φ_1(tA)], [0, I]]`.
pub fn phi1(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>, NumError> {
    if !a.is_square() {
        return Err(NumError::Dimension(format!("phi1 needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    block.view_mut((0, n), (n, n)).fill_with_identity();
    let e = expm(&block, 1.0)?;
    Ok(e.view((0, n), (n, n)).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, DVector};

    fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (a - b).iter().map(|x| x.abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn expm_zero_is_identity() {
        let e = expm(&DMatrix::zeros(3, 3), 2.0).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn expm_diagonal() {
        for t in [0.01, 0.3, 1.0, 7.5] {
            let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, -3.0, 2.0]));
            let e = expm(&a, t).unwrap();
            let expected = DMatrix::from_diagonal(&a.diagonal().map(|x| (x * t).exp()));
            assert!(max_rel(&e, &expected) < 1e-12, "t={t}: {}", max_rel(&e, &expected));
        }
    }

    #[test]
    fn expm_nilpotent() {
        let a = dmatrix![0.0, 1.0; 0.0, 0.0];
        let e = expm(&a, 1.0).unwrap();
        assert!(max_rel(&e, &dmatrix![1.0, 1.0; 0.0, 1.0]) < 1e-12);
    }

    #[test]
    fn expm_rotation_large_norm() {
        // e^{t [[0, 1], [-1, 0]]} is a rotation; ‖tA‖ = 60 forces squaring.
        let a = dmatrix![0.0, 1.0; -1.0, 0.0];
        let t = 60.0;
        let e = expm(&a, t).unwrap();
        let expected = dmatrix![t.cos(), t.sin(); -t.sin(), t.cos()];
        assert!(max_rel(&e, &expected) < 1e-12);
    }

    #[test]
    fn expm_overflow_is_reported() {
        let a = dmatrix![800.0];
        assert!(matches!(expm(&a, 1.0), Err(NumError::Overflow)));
        assert!(expm(&dmatrix![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn phi1_limits() {
        let p = phi1(&DMatrix::zeros(2, 2), 0.5).unwrap();
        assert!(max_rel(&p, &DMatrix::identity(2, 2)) < 1e-15);
        for a in [-3.0, -1e-9, 1e-9, 0.7, 4.0] {
            let p = phi1(&dmatrix![a], 1.0).unwrap()[(0, 0)];
            let expected = if a.abs() < 1e-6 { 1.0 + a / 2.0 } else { a.exp_m1() / a };
            assert!((p - expected).abs() <= 1e-12 * expected.abs(), "a={a}: {p} vs {expected}");
        }
    }

    #[test]
    fn phi1_consistent_with_expm() {
        // A φ_1(A) = e^A - I
        let a = dmatrix![-2.0, 0.3; 0.1, -0.5];
        let lhs = &a * phi1(&a, 1.0).unwrap();
        let rhs = expm(&a, 1.0).unwrap() - DMatrix::identity(2, 2);
        assert!(max_rel(&lhs, &rhs) < 1e-10);
    }
}
