//! Moments ⟨J|ξ^{a₁}⋯ξ^{a_d} 𝒰(M,ψ)|J⟩ as a pairing sum over an effective covariance.

use num_complex::Complex64;

use crate::cartan::cartan_decompose;
use crate::double_cover::CoverElement;
use crate::error::{Error, Result};
use crate::expectation::cover_amplitude;
use crate::linalg::{self, to_complex_mat, CMat, I};
use crate::phase_space::Statistics;

/// Largest supported moment order; the pairing sum has (d−1)!! terms.
pub const MAX_ORDER: usize = 12;

#[derive(Clone, Debug)]
pub struct WickContext {
    /// R = 1 + ¼(1 + iJ) tanh(K₊) (1 − iJ).
    pub r_matrix: CMat,
    /// C̃ = ½ R (G + iΩ) Rᵀ.
    pub c_tilde: CMat,
    /// ⟨J|𝒰(M,ψ)|J⟩.
    pub base_amplitude: Complex64,
    statistics: Statistics,
}

impl WickContext {
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
    pub fn dim(&self) -> usize {
        self.c_tilde.nrows()
    }

    /// Moment for 0-based indices (unchecked beyond the dimension).
    pub fn moment_zero_based(&self, indices: &[usize]) -> Complex64 {
        if indices.len() % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        self.base_amplitude * pairing_sum(indices, &self.c_tilde, self.statistics)
    }
}

fn tanh_matrix(k: &CMat) -> Result<CMat> {
    let n = k.nrows();
    let id = CMat::identity(n, n);
    let e2 = linalg::expm_c(&(k * Complex64::new(2.0, 0.0)));
    let denom = linalg::inverse_c(&(&e2 + &id)).ok_or(Error::FermionBoundary { determinant: 0.0 })?;
    Ok((&e2 - &id) * denom)
}

pub fn wick_context(cover: &CoverElement) -> Result<WickContext> {
    let kahler = cover.reference();
    let factors = cartan_decompose(cover.group_element(), kahler)?;
    let n = kahler.dim();
    let id = CMat::identity(n, n);
    let j = to_complex_mat(kahler.j());
    let l = tanh_matrix(&to_complex_mat(&factors.k_plus))?;
    let r = &id + (&id + &j * I) * l * (&id - &j * I) * Complex64::new(0.25, 0.0);
    let c_tilde = &r * kahler.two_point() * r.transpose();

    let base_amplitude = cover_amplitude(cover)?;
    Ok(WickContext { r_matrix: r, c_tilde, base_amplitude, statistics: kahler.statistics() })
}

/// ⟨J|ξ^{a₁}⋯ξ^{a_d} 𝒰(M,ψ)|J⟩ for 1-based phase-space indices.
pub fn wick_moment(indices: &[usize], cover: &CoverElement) -> Result<Complex64> {
    let dim = cover.reference().dim();
    let zero_based = to_zero_based(indices, dim)?;
    if indices.len() > MAX_ORDER {
        return Err(Error::InvalidInput(format!("moment order {} exceeds {MAX_ORDER}", indices.len())));
    }
    if indices.len() % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(wick_context(cover)?.moment_zero_based(&zero_based))
}

pub(crate) fn to_zero_based(indices: &[usize], dim: usize) -> Result<Vec<usize>> {
    indices
        .iter()
        .map(|&a| if a == 0 || a > dim { Err(Error::IndexOutOfRange { index: a, max: dim }) } else { Ok(a - 1) })
        .collect()
}

/// Σ over perfect matchings of Π C̃^{a_i a_j} (i < j), signed by crossings for fermions.
pub fn pairing_sum(indices: &[usize], c: &CMat, statistics: Statistics) -> Complex64 {
    if indices.len() % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let mut rest: Vec<usize> = indices.to_vec();
    expand(&mut rest, c, statistics == Statistics::Fermion)
}

// Pair the first index with each later one; the fermionic sign is (−1)^{#skipped}.
fn expand(rest: &mut Vec<usize>, c: &CMat, fermionic: bool) -> Complex64 {
    if rest.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let first = rest.remove(0);
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..rest.len() {
        let partner = rest.remove(k);
        let weight = c[(first, partner)];
        if weight != Complex64::new(0.0, 0.0) {
            let sign = if fermionic && k % 2 == 1 { -1.0 } else { 1.0 };
            total += weight * expand(rest, c, fermionic) * sign;
        }
        rest.insert(k, partner);
    }
    rest.insert(0, first);
    total
}
