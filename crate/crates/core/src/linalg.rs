//! Dense matrix helpers: principal matrix functions, spectra, null spaces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex_mat(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> Mat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> Mat {
    m.map(|z| z.im)
}

/// Frobenius distance scaled by the size of the reference, floored at 1.
pub fn rel_dev(a: &Mat, reference: &Mat) -> f64 {
    (a - reference).norm() / reference.norm().max(1.0)
}

pub fn check_square(m: &Mat, expected: usize) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(Error::Shape {
            rows: m.nrows(),
            cols: m.ncols(),
            expected,
        });
    }
    Ok(())
}

pub fn inverse(m: &Mat) -> Option<Mat> {
    m.clone().try_inverse()
}

pub fn inverse_c(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

pub fn expm(m: &Mat) -> Mat {
    m.clone().exp()
}

pub fn expm_c(m: &CMat) -> CMat {
    m.clone().exp()
}

/// Complex Schur factors `(Q, T)` with `m = Q T Q^*`, `T` upper triangular.
pub fn complex_schur(m: &CMat) -> (CMat, CMat) {
    let n = m.nrows();
    let scale = m.norm().max(1e-300);
    // QR iterations can stall on spectra symmetric about the origin; a complex
    // diagonal shift breaks the symmetry without changing Schur vectors.
    let shifts = [Complex64::new(0.0, 0.0), Complex64::new(0.137, 0.0731), Complex64::new(-0.291, 0.413)];
    // Near-scalar matrices can also stall at machine-epsilon deflation; loosen it step by step.
    let attempts = [1.0, 1e2, 1e4].iter().flat_map(|&tol| shifts.iter().map(move |&s| (tol, s)));
    let (q, mut t) = attempts
        .into_iter()
        .find_map(|(tol, s)| {
            let shift = s * scale;
            let shifted = m + CMat::identity(n, n) * shift;
            nalgebra::linalg::Schur::try_new(shifted, tol * f64::EPSILON, 200 * n.max(1)).map(|sch| {
                let (q, mut t) = sch.unpack();
                for i in 0..n {
                    t[(i, i)] -= shift;
                }
                (q, t)
            })
        })
        .expect("Schur iteration failed to converge");
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    (q, t)
}

pub fn eigenvalues_c(m: &CMat) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = complex_schur(m);
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn eigenvalues(m: &Mat) -> Vec<Complex64> {
    eigenvalues_c(&to_complex_mat(m))
}

pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Principal square root of an upper triangular matrix (Björck–Hammarling recurrence).
fn sqrt_upper_triangular(t: &CMat) -> Result<CMat> {
    let n = t.nrows();
    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        let d = t[(i, i)];
        if d.im.abs() <= 1e-14 * d.norm().max(1e-300) && d.re < 0.0 {
            return Err(Error::InvalidInput(
                "principal square root undefined on the negative real axis".into(),
            ));
        }
        r[(i, i)] = d.sqrt();
    }
    for j in 0..n {
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in (i + 1)..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let denom = r[(i, i)] + r[(j, j)];
            r[(i, j)] = if denom.norm() > 0.0 { s / denom } else { Complex64::new(0.0, 0.0) };
        }
    }
    Ok(r)
}

/// Principal square root via complex Schur; branch cut on the negative real axis.
pub fn sqrtm_c(m: &CMat) -> Result<CMat> {
    let (q, t) = complex_schur(m);
    let r = sqrt_upper_triangular(&t)?;
    Ok(&q * r * q.adjoint())
}

/// Principal square root of a real matrix whose spectrum avoids the closed negative axis.
pub fn sqrtm(m: &Mat) -> Result<Mat> {
    Ok(real_part(&sqrtm_c(&to_complex_mat(m))?))
}

/// Principal logarithm by inverse scaling and squaring on the Schur factor.
pub fn logm_c(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let (q, mut t) = complex_schur(m);
    let id = CMat::identity(n, n);
    let mut squarings = 0u32;
    while (&t - &id).norm() > 0.05 {
        t = sqrt_upper_triangular(&t)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::InvalidInput("matrix logarithm failed to converge".into()));
        }
    }
    // log A = 2 atanh(Y), Y = (A - 1)(A + 1)^-1
    let y = (&t - &id) * inverse_c(&(&t + &id)).expect("A + 1 invertible near identity");
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut acc = y.clone();
    for k in 1..40 {
        term = &term * &y2;
        let coef = 1.0 / (2 * k + 1) as f64;
        acc += &term * Complex64::new(coef, 0.0);
        if term.norm() * coef < 1e-18 {
            break;
        }
    }
    let scale = 2.0 * 2f64.powi(squarings as i32);
    Ok(&q * (acc * Complex64::new(scale, 0.0)) * q.adjoint())
}

pub fn logm(m: &Mat) -> Result<Mat> {
    Ok(real_part(&logm_c(&to_complex_mat(m))?))
}

/// Singular values and right singular vectors, sorted by increasing singular value.
pub fn svd_ascending(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.ncols();
    if m.nrows() < n {
        // pad to square so that the full right basis is produced
        let mut padded = CMat::zeros(n, n);
        padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        return svd_ascending(&padded);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            v[(r, col)] = vt[(i, r)].conj();
        }
    }
    (values, v)
}

/// Orthonormal basis of the numerical null space (singular values below `tol`).
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let (values, v) = svd_ascending(m);
    let k = values.iter().take_while(|&&s| s <= tol).count();
    v.columns(0, k).into_owned()
}

/// Orthonormal basis of the `k` least significant right singular directions.
pub fn smallest_singular_subspace(m: &CMat, k: usize) -> (CMat, Vec<f64>) {
    let (values, v) = svd_ascending(m);
    (v.columns(0, k).into_owned(), values)
}

/// Orthonormal basis for the column span, keeping directions above `tol`.
pub fn orth(m: &CMat, tol: f64) -> CMat {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let mut cols: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(i, &s)| (s, i))
        .collect();
    cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut out = CMat::zeros(m.nrows(), cols.len());
    for (j, &(_, i)) in cols.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Condition number in the spectral norm.
pub fn condition_number(m: &CMat) -> f64 {
    let s = m.clone().singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Symmetric eigen-decomposition returning (values, vectors).
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let sym = (m + m.transpose()) * 0.5;
    let e = sym.symmetric_eigen();
    (e.eigenvalues.iter().cloned().collect(), e.eigenvectors)
}

/// Block matrix [[a, b], [c, d]].
pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (n1, m1) = (a.nrows(), a.ncols());
    let (n2, m2) = (d.nrows(), d.ncols());
    let mut out = Mat::zeros(n1 + n2, m1 + m2);
    out.view_mut((0, 0), (n1, m1)).copy_from(a);
    out.view_mut((0, m1), (n1, m2)).copy_from(b);
    out.view_mut((n1, 0), (n2, m1)).copy_from(c);
    out.view_mut((n1, m1), (n2, m2)).copy_from(d);
    out
}

/// Argument in (-π, π], with points within `tol` of the negative axis sent to +π.
pub fn arg_plus_pi(z: Complex64, tol: f64) -> f64 {
    if z.re < 0.0 && z.im.abs() <= tol * z.norm().max(1.0) {
        std::f64::consts::PI
    } else {
        z.arg()
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schur_of_noisy_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let m = CMat::identity(4, 4)
                + CMat::from_fn(4, 4, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 1e-15);
            let (q, t) = complex_schur(&m);
            assert!((&q * &t * q.adjoint() - &m).norm() < 1e-13);
        }
    }

    fn sample(n: usize, seed: u64) -> Mat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn sqrt_squares_back() {
        let a = sample(5, 1);
        let spd = &a * a.transpose() + Mat::identity(5, 5);
        let r = sqrtm(&spd).unwrap();
        assert!(rel_dev(&(&r * &r), &spd) < 1e-12);
    }

    #[test]
    fn log_inverts_exp() {
        let a = sample(4, 2) * 0.7;
        let l = logm(&expm(&a)).unwrap();
        assert!(rel_dev(&l, &a) < 1e-11);
    }

    #[test]
    fn log_of_rotation_has_principal_angle() {
        let th = 2.5_f64;
        let r = Mat::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        let l = logm(&r).unwrap();
        assert_relative_eq!(l[(0, 1)], th, epsilon = 1e-12);
    }

    #[test]
    fn null_space_of_rank_deficient() {
        let m = Mat::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        let ns = null_space(&to_complex_mat(&m), 1e-10);
        assert_eq!(ns.ncols(), 1);
        assert!((to_complex_mat(&m) * ns).norm() < 1e-12);
    }

    #[test]
    fn negative_axis_argument_goes_to_plus_pi() {
        assert_eq!(arg_plus_pi(c(-2.0, -1e-14), 1e-10), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI, epsilon = 1e-12);
    }
}
