//! Complex-linear / antilinear split of real maps and their complex determinants.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, inverse, CMat, Mat};
use crate::phase_space::KahlerStructure;

/// Tolerance on [K, J] before complexification.
pub const COMMUTATION_TOL: f64 = 1e-9;
/// |det| below this is treated as singular (shared with the Cartan boundary test).
pub const SINGULAR_TOL: f64 = 1e-8;

/// M = C + D with C commuting and D anticommuting with J; Z = C⁻¹D when C is invertible.
#[derive(Clone, Debug)]
pub struct ComplexSplit {
    pub c_part: Mat,
    pub d_part: Mat,
    pub z_part: Option<Mat>,
}

/// Complex N×N matrix K₁ + iK₂ representing a real map that commutes with J.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(pub CMat);

impl ComplexMatrix {
    pub fn entries(&self) -> &CMat {
        &self.0
    }
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        linalg::eigenvalues_c(&self.0)
    }
    pub fn det(&self) -> Complex64 {
        self.eigenvalues().iter().product()
    }
    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }
    /// Real 2N×2N reconstruction [[Re, Im], [−Im, Re]].
    pub fn to_real(&self) -> Mat {
        let re = linalg::real_part(&self.0);
        let im = linalg::imag_part(&self.0);
        linalg::block2(&re, &im, &(-&im), &re)
    }
}

pub fn split(m: &Mat, j: &Mat) -> ComplexSplit {
    let jmj = j * m * j;
    let c_part = (m - &jmj) * 0.5;
    let d_part = (m + &jmj) * 0.5;
    let z_part = c_invertible(&c_part).then(|| inverse(&c_part)).flatten().map(|ci| ci * &d_part);
    ComplexSplit { c_part, d_part, z_part }
}

/// |det_bar C| = √|det C| compared against the shared singularity threshold.
fn c_invertible(c: &Mat) -> bool {
    c.clone().lu().determinant().abs().sqrt() > SINGULAR_TOL
}

/// Complexification relative to the standard block J.
pub fn to_complex(k: &Mat) -> Result<ComplexMatrix> {
    let dim = k.nrows();
    if !dim.is_multiple_of(2) || k.ncols() != dim {
        return Err(Error::Shape { rows: k.nrows(), cols: k.ncols(), expected: dim });
    }
    let n = dim / 2;
    let j = crate::phase_space::standard_block(n);
    let dev = (k * &j - &j * k).norm() / k.norm().max(1.0);
    if dev > COMMUTATION_TOL {
        return Err(Error::Invariant { what: "map commutes with J", deviation: dev });
    }
    let mut out = CMat::zeros(n, n);
    for r in 0..n {
        for s in 0..n {
            let k1 = 0.5 * (k[(r, s)] + k[(n + r, n + s)]);
            let k2 = 0.5 * (k[(r, n + s)] - k[(n + r, s)]);
            out[(r, s)] = Complex64::new(k1, k2);
        }
    }
    Ok(ComplexMatrix(out))
}

/// Complexification relative to the structure's J (conjugating into standard form first).
pub fn to_complex_in(k: &Mat, kahler: &KahlerStructure) -> Result<ComplexMatrix> {
    if kahler.is_standard_j() {
        return to_complex(k);
    }
    let (s, si) = kahler.standardizer();
    to_complex(&(si * k * s))
}

pub fn det_bar(k: &Mat, kahler: &KahlerStructure) -> Result<Complex64> {
    Ok(to_complex_in(k, kahler)?.det())
}

pub fn tr_bar(k: &Mat, kahler: &KahlerStructure) -> Result<Complex64> {
    Ok(to_complex_in(k, kahler)?.trace())
}

/// Eigenvalues of the complexified matrix.
pub fn eigenvalues_bar(k: &Mat, kahler: &KahlerStructure) -> Result<Vec<Complex64>> {
    Ok(to_complex_in(k, kahler)?.eigenvalues())
}

/// C_M = (M − JMJ)/2.
pub fn c_part(m: &Mat, j: &Mat) -> Mat {
    (m - j * m * j) * 0.5
}

/// Z_M = C_M⁻¹ D_M.
pub fn z_of(m: &Mat, j: &Mat) -> Result<Mat> {
    let s = split(m, j);
    match s.z_part {
        Some(z) => Ok(z),
        None => Err(Error::FermionBoundary { determinant: s.c_part.determinant().abs().sqrt() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{random_generator, relative_complex_structure, standard_block, standard_kahler, Statistics};
    use proptest::prelude::*;

    fn commuting_sample(n: usize, seed: u64) -> Mat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        linalg::block2(&a, &b, &(-&b), &a)
    }

    #[test]
    fn j_complexifies_to_i() {
        let j = standard_block(3);
        let jc = to_complex(&j).unwrap();
        assert_eq!(jc.0, CMat::identity(3, 3) * linalg::I);
        let kahler = standard_kahler(3, Statistics::Boson);
        assert_eq!(tr_bar(&j, &kahler).unwrap(), Complex64::new(0.0, 3.0));
        assert!((det_bar(&Mat::identity(6, 6), &kahler).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn antilinear_input_is_rejected() {
        let y = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(to_complex(&y).is_err());
    }

    #[test]
    fn commuting_map_has_no_antilinear_part() {
        let m = commuting_sample(2, 3);
        let s = split(&m, &standard_block(2));
        assert!(s.d_part.norm() < 1e-15);
        assert!(s.z_part.unwrap().norm() < 1e-15);
    }

    #[test]
    fn cartan_form_of_c_part() {
        let kahler = standard_kahler(2, Statistics::Boson);
        let (k, _) = random_generator(2, Statistics::Boson, 5, 0.6);
        let f = crate::cartan::cartan_decompose(&k.exp(), &kahler).unwrap();
        let tinv = inverse(&f.t).unwrap();
        let expected = (&f.t + &tinv) * 0.5 * &f.u;
        assert!(linalg::rel_dev(&c_part(k.exp().matrix(), kahler.j()), &expected) < 1e-10);
    }

    #[test]
    fn boundary_element_has_no_z() {
        // T_phi at phi = 0.4
        let (c, s) = (0.4_f64.cos(), 0.4_f64.sin());
        let t = Mat::from_row_slice(4, 4, &[0.0, c, 0.0, s, -c, 0.0, -s, 0.0, 0.0, s, 0.0, -c, -s, 0.0, c, 0.0]);
        let sp = split(&t, &standard_block(2));
        assert!(sp.c_part.norm() < 1e-15);
        assert!(sp.z_part.is_none());
        assert!(matches!(z_of(&t, &standard_block(2)), Err(Error::FermionBoundary { .. })));
    }

    #[test]
    fn z_matches_relative_structure_formula() {
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let kahler = standard_kahler(2, stats);
            let (k, _) = random_generator(2, stats, 11, 0.5);
            let m = k.exp();
            let z = z_of(m.matrix(), kahler.j()).unwrap();
            let d = relative_complex_structure(&m.inverse(&kahler), &kahler);
            let id = Mat::identity(4, 4);
            let expected = (&id - &d) * inverse(&(&id + &d)).unwrap();
            assert!(linalg::rel_dev(&z, &expected) < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn complexification_is_multiplicative(seed in 0u64..5000, n in 1usize..5) {
            let a = commuting_sample(n, seed);
            let b = commuting_sample(n, seed + 77_777);
            let lhs = to_complex(&(&a * &b)).unwrap().0;
            let rhs = to_complex(&a).unwrap().0 * to_complex(&b).unwrap().0;
            prop_assert!((lhs - rhs).norm() < 1e-11);
        }

        #[test]
        fn real_det_is_squared_modulus(seed in 0u64..5000, n in 1usize..5) {
            let a = commuting_sample(n, seed);
            let kahler = standard_kahler(n, Statistics::Boson);
            let db = det_bar(&a, &kahler).unwrap();
            prop_assert!((a.determinant() - db.norm_sqr()).abs() < 1e-10 * a.determinant().abs().max(1.0));
        }

        #[test]
        fn eigenvalue_pairing(seed in 0u64..5000, n in 1usize..4) {
            let a = commuting_sample(n, seed);
            let real_ev = linalg::eigenvalues(&a);
            let bar = to_complex(&a).unwrap().eigenvalues();
            for z in bar.iter().chain(bar.iter().map(|z| z.conj()).collect::<Vec<_>>().iter()) {
                prop_assert!(real_ev.iter().any(|w| (w - z).norm() < 1e-6));
            }
        }

        #[test]
        fn cosh_of_antilinear_generator_has_positive_det_bar(seed in 0u64..5000, n in 1usize..4, fermion in any::<bool>()) {
            let stats = if fermion { Statistics::Fermion } else { Statistics::Boson };
            let kahler = standard_kahler(n, stats);
            let (k, _) = random_generator(n, stats, seed, 0.4);
            let (_, kp) = crate::cartan::lie_split(&k, &kahler);
            let e = linalg::expm(&kp);
            let ei = linalg::expm(&(-&kp));
            let cosh = (e + ei) * 0.5;
            let db = det_bar(&cosh, &kahler).unwrap();
            prop_assert!(db.im.abs() < 1e-10 && db.re > 0.0);
            prop_assert!((db.re - cosh.determinant().sqrt()).abs() < 1e-9 * db.re.max(1.0));
        }

        #[test]
        fn z_identities(seed in 0u64..5000, n in 1usize..4) {
            let kahler = standard_kahler(n, Statistics::Boson);
            let (k, _) = random_generator(n, Statistics::Boson, seed, 0.5);
            let m = k.exp();
            let minv = m.inverse(&kahler);
            let z = z_of(m.matrix(), kahler.j()).unwrap();
            let id = Mat::identity(2 * n, 2 * n);
            let prod = c_part(minv.matrix(), kahler.j()) * c_part(m.matrix(), kahler.j()) * (&id - &z * &z);
            prop_assert!(linalg::rel_dev(&prod, &id) < 1e-9);
            prop_assert!((&z * kahler.j() + kahler.j() * &z).norm() < 1e-9 * z.norm().max(1.0));
        }

        #[test]
        fn fermionic_z_intertwining(seed in 0u64..5000, n in 2usize..4) {
            let kahler = standard_kahler(n, Statistics::Fermion);
            let (k, _) = random_generator(n, Statistics::Fermion, seed, 1.0);
            let m = k.exp();
            let minv = m.inverse(&kahler);
            let cm = c_part(m.matrix(), kahler.j());
            if let (Ok(zm), Ok(zinv)) = (z_of(m.matrix(), kahler.j()), z_of(minv.matrix(), kahler.j())) {
                let lhs = &zinv * &cm;
                let rhs = -(&cm * &zm);
                prop_assert!(linalg::rel_dev(&lhs, &rhs) < 1e-8);
            }
        }

        #[test]
        fn z_symmetry_under_complex_inner_product(seed in 0u64..5000, fermion in any::<bool>()) {
            let stats = if fermion { Statistics::Fermion } else { Statistics::Boson };
            let kahler = standard_kahler(2, stats);
            let (k, _) = random_generator(2, stats, seed, 0.5);
            let z = match z_of(k.exp().matrix(), kahler.j()) { Ok(z) => z, Err(_) => return Ok(()) };
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = nalgebra::DVector::<f64>::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let w = nalgebra::DVector::<f64>::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let inner = |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| {
                Complex64::new((x.transpose() * kahler.g_inv() * y)[(0, 0)], (x.transpose() * kahler.omega_inv() * y)[(0, 0)])
            };
            let lhs = inner(&(&z * &v), &w);
            let rhs = inner(&(&z * &w), &v);
            let sign = if fermion { -1.0 } else { 1.0 };
            prop_assert!((lhs - rhs * sign).norm() < 1e-9 * z.norm().max(1.0));
        }
    }
}
