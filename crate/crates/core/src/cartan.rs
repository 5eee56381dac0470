//! Canonical Cartan decomposition M = T u relative to a reference complex structure.

use crate::complexify::SINGULAR_TOL;
use crate::error::{Error, Result};
use crate::linalg::{self, inverse, Mat};
use crate::phase_space::{relative_complex_structure, GroupElement, KahlerStructure, LieGenerator, Statistics};

#[derive(Clone, Debug)]
pub struct CartanFactors {
    /// T = √Δ_M, generated by a J-anticommuting K₊.
    pub t: Mat,
    /// u = T⁻¹ M, commutes with J.
    pub u: Mat,
    pub k_plus: Mat,
    pub delta: Mat,
}

/// Principal square root and half-logarithm of Δ, returned as (T, K₊).
pub(crate) fn sqrt_and_half_log(delta: &Mat, kahler: &KahlerStructure) -> Result<(Mat, Mat)> {
    match kahler.statistics() {
        Statistics::Boson => {
            // g Δ is symmetric positive: work in a g-orthonormal frame.
            let g = kahler.g_inv();
            let chol = g
                .clone()
                .cholesky()
                .ok_or(Error::Invariant { what: "metric positive definite", deviation: f64::NAN })?;
            let l = chol.l();
            let lt = l.transpose();
            let lt_inv = inverse(&lt).expect("triangular factor invertible");
            let a = &lt * delta * &lt_inv;
            let (vals, vecs) = linalg::sym_eigen(&a);
            if let Some(&bad) = vals.iter().find(|&&v| v <= 0.0) {
                return Err(Error::Invariant { what: "bosonic relative structure positive", deviation: bad });
            }
            let diag = |f: &dyn Fn(f64) -> f64| {
                let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&v| f(v))));
                &lt_inv * &vecs * d * vecs.transpose() * &lt
            };
            Ok((diag(&|v: f64| v.sqrt()), diag(&|v: f64| 0.5 * v.ln())))
        }
        Statistics::Fermion => {
            let id = Mat::identity(delta.nrows(), delta.nrows());
            let margin = (&id + delta).determinant().abs();
            if margin < SINGULAR_TOL {
                return Err(Error::FermionBoundary { determinant: margin });
            }
            let t = linalg::sqrtm(delta)?;
            let k = linalg::logm(delta)? * 0.5;
            // project onto the J-anticommuting part to remove round-off
            let j = kahler.j();
            let k = (&k + j * &k * j) * 0.5;
            Ok((t, k))
        }
    }
}

pub fn cartan_decompose(m: &GroupElement, kahler: &KahlerStructure) -> Result<CartanFactors> {
    let delta = relative_complex_structure(m, kahler);
    let (t, k_plus) = sqrt_and_half_log(&delta, kahler)?;
    let u = linalg::expm(&(-&k_plus)) * m.matrix();
    Ok(CartanFactors { t, u, k_plus, delta })
}

/// K = K₋ + K₊ with K₋ commuting and K₊ anticommuting with J.
pub fn lie_split(k: &LieGenerator, kahler: &KahlerStructure) -> (Mat, Mat) {
    let j = kahler.j();
    let jkj = j * k.matrix() * j;
    ((k.matrix() - &jkj) * 0.5, (k.matrix() + &jkj) * 0.5)
}

/// Whether M lies off the fermionic quasi-boundary, with margin |det(1 + Δ_M)|.
pub fn is_interior(m: &GroupElement, kahler: &KahlerStructure) -> (bool, f64) {
    let delta = relative_complex_structure(m, kahler);
    let id = Mat::identity(delta.nrows(), delta.nrows());
    let margin = (&id + &delta).determinant().abs();
    match kahler.statistics() {
        Statistics::Boson => (true, margin),
        Statistics::Fermion => (margin >= SINGULAR_TOL, margin),
    }
}
