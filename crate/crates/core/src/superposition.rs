//! Superpositions Σ c_k 𝒰(M_k, ψ_k)|J⟩ of Gaussian branches.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::double_cover::{inverse, lift, multiply, CoverElement};
use crate::error::{Error, Result};
use crate::expectation::{cover_amplitude, expectation_squared};
use crate::linalg::{to_complex_mat, CMat};
use crate::phase_space::{KahlerStructure, LieGenerator};
use crate::wick::{pairing_sum, to_zero_based, wick_context};

/// Ratio of the near to far candidate distance above which a sign choice is refused.
pub const AMBIGUITY_RATIO: f64 = 0.8;
/// Largest admissible per-step change of an overlap entry.
pub const MAX_STEP_CHANGE: f64 = 0.5;
const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct SuperpositionState {
    coefficients: Vec<Complex64>,
    branches: Vec<CoverElement>,
    reference: KahlerStructure,
    overlap_cache: OnceLock<CMat>,
}

impl Clone for SuperpositionState {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(x) = self.overlap_cache.get() {
            let _ = cache.set(x.clone());
        }
        SuperpositionState {
            coefficients: self.coefficients.clone(),
            branches: self.branches.clone(),
            reference: self.reference.clone(),
            overlap_cache: cache,
        }
    }
}

impl SuperpositionState {
    pub fn new(coefficients: Vec<Complex64>, branches: Vec<CoverElement>) -> Result<Self> {
        if coefficients.len() != branches.len() || branches.is_empty() {
            return Err(Error::InvalidInput("need one coefficient per branch and at least one branch".into()));
        }
        let reference = branches[0].reference().clone();
        if branches.iter().any(|b| !b.reference().same_reference(&reference)) {
            return Err(Error::ReferenceMismatch);
        }
        Ok(SuperpositionState { coefficients, branches, reference, overlap_cache: OnceLock::new() })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }
    pub fn branches(&self) -> &[CoverElement] {
        &self.branches
    }
    pub fn reference(&self) -> &KahlerStructure {
        &self.reference
    }
    pub fn len(&self) -> usize {
        self.branches.len()
    }
    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Same branches with new coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != self.len() {
            return Err(Error::InvalidInput("coefficient count differs from branch count".into()));
        }
        let mut out = self.clone();
        out.coefficients = coefficients;
        Ok(out)
    }

    /// ⟨Ψ|Ψ⟩ = c†Xc.
    pub fn norm_squared(&self) -> Result<f64> {
        let x = overlap_matrix(self)?;
        let c = &self.coefficients;
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..c.len() {
            for l in 0..c.len() {
                total += c[k].conj() * x[(k, l)] * c[l];
            }
        }
        Ok(total.re)
    }
}

/// Relative element (M_k⁻¹M_l, ψ_k*ψ_l e^{iη(M_k⁻¹,M_l)/2}).
fn relative(state: &SuperpositionState, k: usize, l: usize) -> Result<CoverElement> {
    multiply(&inverse(&state.branches[k]), &state.branches[l]).map_err(|e| match e {
        Error::DegeneratePair { determinant } => Error::DegenerateBranchPair { k, l, determinant },
        other => other,
    })
}

fn compute_overlaps(state: &SuperpositionState) -> Result<CMat> {
    let m = state.len();
    let mut x = CMat::zeros(m, m);
    for k in 0..m {
        for l in 0..m {
            x[(k, l)] = cover_amplitude(&relative(state, k, l)?)?;
        }
    }
    let dev = (&x - x.adjoint()).norm();
    if dev > HERMITIAN_TOL * (1.0 + x.norm()) {
        return Err(Error::Invariant { what: "overlap matrix Hermitian", deviation: dev });
    }
    Ok(x)
}

/// X_{kl} = ⟨J|𝒰†(M_k,ψ_k)𝒰(M_l,ψ_l)|J⟩, cached on the state.
pub fn overlap_matrix(state: &SuperpositionState) -> Result<CMat> {
    if let Some(x) = state.overlap_cache.get() {
        return Ok(x.clone());
    }
    let x = compute_overlaps(state)?;
    let _ = state.overlap_cache.set(x.clone());
    Ok(x)
}

/// Picks ±√squared nearest to `previous`.
fn continue_sign(squared: Complex64, previous: Complex64, k: usize, l: usize) -> Result<Complex64> {
    let root = squared.sqrt();
    let (d_plus, d_minus) = ((root - previous).norm(), (-root - previous).norm());
    let (near, far, pick) = if d_plus <= d_minus { (d_plus, d_minus, root) } else { (d_minus, d_plus, -root) };
    if near > MAX_STEP_CHANGE || (far > 0.0 && near / far > AMBIGUITY_RATIO && root.norm() > 1e-12) {
        return Err(Error::ContinuationAmbiguous { k, l, ratio: if far > 0.0 { near / far } else { 1.0 } });
    }
    Ok(pick)
}

/// M_k → M_k e^{εK_k}; overlaps continued from the previous step, ψ_k by cover multiplication.
pub fn evolve_step(state: &SuperpositionState, directions: &[LieGenerator], epsilon: f64) -> Result<SuperpositionState> {
    if directions.len() != state.len() {
        return Err(Error::InvalidInput("need one direction per branch".into()));
    }
    let previous = overlap_matrix(state)?;
    if epsilon == 0.0 {
        return Ok(state.clone());
    }
    let kahler = &state.reference;
    let branches = state
        .branches
        .iter()
        .zip(directions)
        .map(|(b, k)| multiply(b, &lift(&k.scaled(epsilon).exp(), 1, kahler)?))
        .collect::<Result<Vec<_>>>()?;
    let next = SuperpositionState {
        coefficients: state.coefficients.clone(),
        branches,
        reference: kahler.clone(),
        overlap_cache: OnceLock::new(),
    };
    let m = next.len();
    let mut x = CMat::zeros(m, m);
    for k in 0..m {
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for l in k + 1..m {
            let rel = next.branches[k].group_element().inverse(kahler).compose(next.branches[l].group_element());
            let value = continue_sign(expectation_squared(&rel, kahler)?, previous[(k, l)], k, l)?;
            x[(k, l)] = value;
            x[(l, k)] = value.conj();
        }
    }
    let _ = next.overlap_cache.set(x);
    Ok(next)
}

/// ⟨Ψ|ξ^{a₁}⋯ξ^{a_d}|Ψ⟩ for 1-based indices.
pub fn moment(state: &SuperpositionState, indices: &[usize]) -> Result<Complex64> {
    let zero_based = to_zero_based(indices, state.reference.dim())?;
    if indices.is_empty() {
        return Ok(Complex64::new(state.norm_squared()?, 0.0));
    }
    if indices.len() % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let c = &state.coefficients;
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..state.len() {
        // 𝒰_k† ξᵃ = Mᵃ_b ξᵇ 𝒰_k†
        let mk = to_complex_mat(state.branches[k].matrix());
        for l in 0..state.len() {
            let ctx = wick_context(&relative(state, k, l)?)?;
            let rotated = &mk * &ctx.c_tilde * mk.transpose();
            total += c[k].conj() * c[l] * ctx.base_amplitude * pairing_sum(&zero_based, &rotated, ctx.statistics());
        }
    }
    Ok(total)
}
