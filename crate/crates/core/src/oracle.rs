//! Brute-force Fock-space reference values for Gaussian unitaries.
//!
//! Fermions use the dense Jordan–Wigner representation. Bosons use a sparse
//! representation truncated by total excitation number, with e^{K̂} applied to
//! vectors by a Chebyshev expansion.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Mat};
use crate::phase_space::{KahlerStructure, LieGenerator, Statistics};

pub const FERMION_MAX_MODES: usize = 6;
pub const BOSON_MAX_MODES: usize = 4;
/// Largest bosonic Hilbert-space dimension the oracle will build.
pub const BOSON_MAX_DIM: usize = 3_000_000;
pub const DEFAULT_CUTOFF: usize = 120;
/// Agreement required between cutoff L and 2L.
pub const CONVERGENCE_TOL: f64 = 1e-7;
const CHEB_RADIUS_PER_STEP: f64 = 40.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Sparse complex matrix in compressed-column form.
#[derive(Clone, Debug)]
pub struct SparseOp {
    dim: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOp {
    fn from_columns(dim: usize, mut columns: Vec<Vec<(usize, Complex64)>>) -> Self {
        let mut col_ptr = Vec::with_capacity(dim + 1);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        col_ptr.push(0);
        for col in columns.iter_mut() {
            col.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(r, v) in col.iter() {
                if last == Some(r) {
                    *vals.last_mut().expect("entry exists") += v;
                } else {
                    rows.push(r);
                    vals.push(v);
                    last = Some(r);
                }
            }
            col_ptr.push(rows.len());
        }
        SparseOp { dim, col_ptr, rows, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// out = scale · A · x
    pub fn apply_into(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = ZERO);
        for (c, &xc) in x.iter().enumerate() {
            if xc == ZERO {
                continue;
            }
            let sx = scale * xc;
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                out[self.rows[idx]] += self.vals[idx] * sx;
            }
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        self.apply_into(x, ONE, &mut out);
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for c in 0..self.dim {
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                m[(self.rows[idx], c)] += self.vals[idx];
            }
        }
        m
    }

    /// Gershgorin interval of i·A, valid when A is anti-Hermitian.
    fn hermitian_bounds_of_i_times(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in 0..self.dim {
            let mut diag = 0.0;
            let mut off = 0.0;
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                let v = I * self.vals[idx];
                if self.rows[idx] == c {
                    diag = v.re;
                } else {
                    off += v.norm();
                }
            }
            lo = lo.min(diag - off);
            hi = hi.max(diag + off);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// Occupation-number basis with ladder operators.
#[derive(Clone, Debug)]
pub struct FockSpace {
    statistics: Statistics,
    n_modes: usize,
    cutoff: Option<usize>,
    states: Vec<Vec<u16>>,
    index: HashMap<u64, usize>,
    radix: u64,
}

impl FockSpace {
    /// Bosonic `cutoff` is the number of levels of a single mode; multi-mode states keep
    /// total excitation number below it.
    pub fn new(statistics: Statistics, n_modes: usize, cutoff: Option<usize>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidInput("at least one mode required".into()));
        }
        let (states, radix) = match statistics {
            Statistics::Fermion => {
                if n_modes > FERMION_MAX_MODES {
                    return Err(Error::DimensionTooLarge { dim: 1 << n_modes, limit: 1 << FERMION_MAX_MODES });
                }
                let states = (0..1usize << n_modes)
                    .map(|bits| (0..n_modes).map(|j| ((bits >> j) & 1) as u16).collect())
                    .collect();
                (states, 2)
            }
            Statistics::Boson => {
                let levels = cutoff.unwrap_or(DEFAULT_CUTOFF);
                if n_modes > BOSON_MAX_MODES || levels < 2 {
                    return Err(Error::DimensionTooLarge { dim: levels.pow(n_modes as u32), limit: BOSON_MAX_DIM });
                }
                let dim = simplex_size(n_modes, levels - 1);
                if dim > BOSON_MAX_DIM {
                    return Err(Error::DimensionTooLarge { dim, limit: BOSON_MAX_DIM });
                }
                let mut states = Vec::with_capacity(dim);
                let mut cur = vec![0u16; n_modes];
                enumerate_simplex(&mut cur, 0, levels - 1, &mut states);
                states.sort_by_key(|s| s.iter().map(|&x| x as usize).sum::<usize>());
                (states, levels as u64)
            }
        };
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (encode(s, radix), i))
            .collect();
        Ok(FockSpace {
            statistics,
            n_modes,
            cutoff: match statistics {
                Statistics::Boson => Some(cutoff.unwrap_or(DEFAULT_CUTOFF)),
                Statistics::Fermion => None,
            },
            states,
            index,
            radix,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
    pub fn cutoff(&self) -> Option<usize> {
        self.cutoff
    }
    pub fn occupations(&self, index: usize) -> &[u16] {
        &self.states[index]
    }

    /// The reference vacuum |J_std⟩.
    pub fn vacuum(&self) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.dim()];
        v[0] = ONE;
        v
    }

    fn total(&self, index: usize) -> usize {
        self.states[index].iter().map(|&x| x as usize).sum()
    }

    /// Applies a_k (k < N) or a†_{k−N} to basis state `index`.
    fn ladder(&self, k: usize, index: usize) -> Option<(usize, f64)> {
        let n = self.n_modes;
        let (mode, raise) = if k < n { (k, false) } else { (k - n, true) };
        let state = &self.states[index];
        let occ = state[mode];
        let mut next = state.clone();
        let amp = match self.statistics {
            Statistics::Boson => {
                if raise {
                    next[mode] = occ + 1;
                    ((occ + 1) as f64).sqrt()
                } else {
                    if occ == 0 {
                        return None;
                    }
                    next[mode] = occ - 1;
                    (occ as f64).sqrt()
                }
            }
            Statistics::Fermion => {
                if raise == (occ == 1) {
                    return None;
                }
                next[mode] = 1 - occ;
                let parity: u16 = state[..mode].iter().sum();
                if parity.is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        self.index.get(&encode(&next, self.radix)).map(|&i| (i, amp))
    }

    /// ξ = W α with α = (a₁ … a_N, a₁† … a_N†).
    fn quadrature_weights(&self) -> CMat {
        let n = self.n_modes;
        let mut w = CMat::zeros(2 * n, 2 * n);
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        for j in 0..n {
            w[(j, j)] = s;
            w[(j, j + n)] = s;
            w[(j + n, j)] = -I * s;
            w[(j + n, j + n)] = I * s;
        }
        w
    }

    /// Sparse ξ̂ᵃ in the standard frame.
    pub fn xi(&self, a: usize) -> SparseOp {
        let w = self.quadrature_weights();
        let dim = self.dim();
        let columns = (0..dim)
            .map(|s| {
                let mut col = Vec::new();
                for k in 0..2 * self.n_modes {
                    if w[(a, k)] == ZERO {
                        continue;
                    }
                    if let Some((t, amp)) = self.ladder(k, s) {
                        col.push((t, w[(a, k)] * amp));
                    }
                }
                col
            })
            .collect();
        SparseOp::from_columns(dim, columns)
    }

    /// Σ P_kl α_k α_l, projected onto the truncated space.
    fn bilinear(&self, p: &CMat) -> SparseOp {
        let dim = self.dim();
        let m = 2 * self.n_modes;
        let terms: Vec<(usize, usize, Complex64)> = (0..m)
            .flat_map(|k| (0..m).map(move |l| (k, l)))
            .filter_map(|(k, l)| {
                let v = p[(k, l)];
                (v.norm() > 0.0).then_some((k, l, v))
            })
            .collect();
        let columns = (0..dim)
            .map(|s| {
                let mut col = Vec::new();
                for &(k, l, v) in &terms {
                    if let Some((mid, a1)) = self.ladder(l, s) {
                        if let Some((t, a2)) = self.ladder(k, mid) {
                            col.push((t, v * (a1 * a2)));
                        }
                    }
                }
                col
            })
            .collect();
        SparseOp::from_columns(dim, columns)
    }
}

fn encode(state: &[u16], radix: u64) -> u64 {
    state.iter().rev().fold(0u64, |acc, &x| acc * (radix + 1) + x as u64)
}

fn simplex_size(n: usize, max_total: usize) -> usize {
    // C(max_total + n, n)
    let mut r: u128 = 1;
    for i in 1..=n as u128 {
        r = r * (max_total as u128 + i) / i;
    }
    r.min(usize::MAX as u128) as usize
}

fn enumerate_simplex(cur: &mut Vec<u16>, pos: usize, remaining: usize, out: &mut Vec<Vec<u16>>) {
    if pos == cur.len() {
        out.push(cur.clone());
        return;
    }
    for x in 0..=remaining {
        cur[pos] = x as u16;
        enumerate_simplex(cur, pos + 1, remaining - x, out);
    }
    cur[pos] = 0;
}

/// K expressed in the frame where the reference structure is standard.
/// K̂ = −(i/2)(ωK)_{ab} ξ̂ᵃξ̂ᵇ for bosons, ½(gK)_{ab} ξ̂ᵃξ̂ᵇ for fermions, in the standard frame.
pub fn quad_operator(k: &Mat, fock: &FockSpace) -> SparseOp {
    let std = KahlerStructure::standard(fock.n_modes, fock.statistics);
    let q: CMat = match fock.statistics {
        Statistics::Boson => linalg::to_complex_mat(&(std.omega_inv() * k)) * (-0.5 * I),
        Statistics::Fermion => linalg::to_complex_mat(&(std.g_inv() * k)) * Complex64::new(0.5, 0.0),
    };
    let w = fock.quadrature_weights();
    let p = w.transpose() * q * w;
    fock.bilinear(&p)
}

/// e^{A} x for anti-Hermitian A via Chebyshev expansion of e^{−iH}, H = iA.
pub fn exp_action(a: &SparseOp, x: &[Complex64]) -> Vec<Complex64> {
    let (lo, hi) = a.hermitian_bounds_of_i_times();
    let steps = (((hi - lo) / 2.0) / CHEB_RADIUS_PER_STEP).ceil().max(1.0) as usize;
    let mut v = x.to_vec();
    for _ in 0..steps {
        v = chebyshev_step(a, &v, lo / steps as f64, hi / steps as f64, 1.0 / steps as f64);
    }
    v
}

fn chebyshev_step(a: &SparseOp, x: &[Complex64], lo: f64, hi: f64, dt: f64) -> Vec<Complex64> {
    let center = 0.5 * (hi + lo);
    let radius = (0.5 * (hi - lo)).max(1e-14);
    let n_terms = (radius + 10.0 * radius.cbrt() + 40.0) as usize;
    let bessel = bessel_j_all(radius, n_terms);
    // H̃ w = (i·dt·A w − center·w)/radius
    let apply = |w: &[Complex64], out: &mut [Complex64]| {
        a.apply_into(w, I * dt, out);
        for (o, wi) in out.iter_mut().zip(w) {
            *o = (*o - wi * center) / radius;
        }
    };
    let dim = x.len();
    let mut prev = x.to_vec();
    let mut cur = vec![ZERO; dim];
    apply(&prev, &mut cur);
    let mut acc: Vec<Complex64> = prev.iter().map(|p| p * bessel[0]).collect();
    let mut phase = -I;
    for (i, c) in acc.iter_mut().enumerate() {
        *c += cur[i] * (phase * 2.0 * bessel[1]);
    }
    let mut next = vec![ZERO; dim];
    for k in 2..=n_terms {
        apply(&cur, &mut next);
        for i in 0..dim {
            next[i] = next[i] * 2.0 - prev[i];
        }
        phase *= -I;
        let coeff = phase * 2.0 * bessel[k];
        if coeff.norm() > 0.0 {
            for i in 0..dim {
                acc[i] += next[i] * coeff;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let global = Complex64::from_polar(1.0, -center);
    acc.iter().map(|c| c * global).collect()
}

/// J_0(x) … J_n(x) by Miller's backward recurrence.
pub fn bessel_j_all(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x.abs() < 1e-300 {
        out[0] = 1.0;
        return out;
    }
    let start = {
        let m = n.max(x as usize) + 20 + (40.0 * (n.max(x as usize) as f64)).sqrt() as usize;
        m + (m % 2)
    };
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for k in 0..=n.min(start) {
        out[k] = vals[k] / norm;
    }
    out
}

fn fermion_dense_expectation(k: &Mat, fock: &FockSpace) -> Complex64 {
    let u = quad_operator(k, fock).to_dense().exp();
    u[(0, 0)]
}

/// ⟨J|e^{K̂}|J⟩ at one truncation level.
pub fn expectation_at_cutoff(k: &LieGenerator, kahler: &KahlerStructure, cutoff: Option<usize>) -> Result<Complex64> {
    let ks = crate::phase_space::to_standard_frame(k.matrix(), kahler)?;
    let fock = FockSpace::new(kahler.statistics(), kahler.n_modes(), cutoff)?;
    Ok(match kahler.statistics() {
        Statistics::Fermion => fermion_dense_expectation(&ks, &fock),
        Statistics::Boson => exp_action(&quad_operator(&ks, &fock), &fock.vacuum())[0],
    })
}

/// ⟨J|e^{K̂}|J⟩. Bosonic values are certified by comparing cutoff L with 2L.
pub fn exact_expectation(k: &LieGenerator, kahler: &KahlerStructure, cutoff: Option<usize>) -> Result<Complex64> {
    match kahler.statistics() {
        Statistics::Fermion => expectation_at_cutoff(k, kahler, None),
        Statistics::Boson => {
            let l = cutoff.unwrap_or(DEFAULT_CUTOFF);
            let coarse = expectation_at_cutoff(k, kahler, Some(l))?;
            let fine = expectation_at_cutoff(k, kahler, Some(2 * l))?;
            let difference = (fine - coarse).norm();
            if difference > CONVERGENCE_TOL {
                return Err(Error::TruncationNotConverged { difference });
            }
            Ok(fine)
        }
    }
}

/// ⟨J|e^{tK̂}|J⟩ for a sorted grid of times, by sequential propagation.
pub fn vacuum_trajectory(
    k: &LieGenerator,
    kahler: &KahlerStructure,
    times: &[f64],
    cutoff: Option<usize>,
) -> Result<Vec<Complex64>> {
    let ks = crate::phase_space::to_standard_frame(k.matrix(), kahler)?;
    let fock = FockSpace::new(kahler.statistics(), kahler.n_modes(), cutoff)?;
    let khat = quad_operator(&ks, &fock);
    let dense = match kahler.statistics() {
        Statistics::Fermion => Some(khat.to_dense()),
        Statistics::Boson => None,
    };
    let vac = fock.vacuum();
    let mut state = vac.clone();
    let mut t_prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - t_prev;
        if dt < 0.0 {
            return Err(Error::InvalidInput("time grid must be sorted and non-negative".into()));
        }
        if dt > 0.0 {
            state = match &dense {
                Some(d) => {
                    let u = (d * Complex64::new(dt, 0.0)).exp();
                    let v = nalgebra::DVector::from_vec(state);
                    (u * v).data.as_vec().clone()
                }
                None => {
                    let scaled = SparseOp { vals: khat.vals.iter().map(|v| v * dt).collect(), ..khat.clone() };
                    exp_action(&scaled, &state)
                }
            };
        }
        t_prev = t;
        out.push(state[0]);
    }
    Ok(out)
}

/// State e^{K̂}|J⟩ in the standard-frame Fock basis.
pub fn evolved_vacuum(k: &Mat, fock: &FockSpace) -> Vec<Complex64> {
    let khat = quad_operator(k, fock);
    match fock.statistics {
        Statistics::Fermion => {
            let u = khat.to_dense().exp();
            u.column(0).iter().cloned().collect()
        }
        Statistics::Boson => exp_action(&khat, &fock.vacuum()),
    }
}

fn moment_at_cutoff(indices: &[usize], k: &Mat, frame: &Mat, statistics: Statistics, n: usize, cutoff: Option<usize>) -> Result<Complex64> {
    let fock = FockSpace::new(statistics, n, cutoff)?;
    let xis: Vec<SparseOp> = (0..2 * n).map(|b| fock.xi(b)).collect();
    let mut state = evolved_vacuum(k, &fock);
    for &a in indices.iter().rev() {
        let mut next = vec![ZERO; state.len()];
        for (b, xi) in xis.iter().enumerate() {
            let w = frame[(a, b)];
            if w != 0.0 {
                for (o, v) in next.iter_mut().zip(xi.apply(&state)) {
                    *o += v * w;
                }
            }
        }
        state = next;
    }
    Ok(state[0])
}

/// ⟨J|ξ̂^{a₁}⋯ξ̂^{a_d} e^{K̂}|J⟩ with 0-based indices in the frame of `kahler`.
/// Bosonic values are certified by cutoff doubling.
pub fn exact_moment(indices: &[usize], k: &LieGenerator, kahler: &KahlerStructure, cutoff: Option<usize>) -> Result<Complex64> {
    let dim = kahler.dim();
    if let Some(&bad) = indices.iter().find(|&&a| a >= dim) {
        return Err(Error::IndexOutOfRange { index: bad + 1, max: dim });
    }
    let ks = crate::phase_space::to_standard_frame(k.matrix(), kahler)?;
    // ξᵃ = Sᵃ_b ξ_stdᵇ
    let (s, _) = kahler.standardizer();
    certified(kahler, cutoff, |c| moment_at_cutoff(indices, &ks, s, kahler.statistics(), kahler.n_modes(), c))
}

fn certified(
    kahler: &KahlerStructure,
    cutoff: Option<usize>,
    eval: impl Fn(Option<usize>) -> Result<Complex64>,
) -> Result<Complex64> {
    match kahler.statistics() {
        Statistics::Fermion => eval(None),
        Statistics::Boson => {
            let l = cutoff.unwrap_or(DEFAULT_CUTOFF);
            let coarse = eval(Some(l))?;
            let fine = eval(Some(2 * l))?;
            let difference = (fine - coarse).norm();
            if difference > CONVERGENCE_TOL {
                return Err(Error::TruncationNotConverged { difference });
            }
            Ok(fine)
        }
    }
}

/// max_a ‖([K̂, ξ̂ᵃ] + Kᵃ_b ξ̂ᵇ)|n⟩‖ over basis states; bosonic states within three
/// excitations of the truncation edge, or in its top tenth, are skipped.
pub fn exact_conjugation_check(k: &Mat, fock: &FockSpace) -> f64 {
    let khat = quad_operator(k, fock);
    let xis: Vec<SparseOp> = (0..2 * fock.n_modes).map(|a| fock.xi(a)).collect();
    let max_total = fock.cutoff.map(|l| {
        let edge = l.saturating_sub(4);
        edge.min((0.9 * l as f64) as usize)
    });
    let mut worst: f64 = 0.0;
    for s in 0..fock.dim() {
        if let Some(m) = max_total {
            if fock.total(s) > m {
                continue;
            }
        }
        let mut e = vec![ZERO; fock.dim()];
        e[s] = ONE;
        let ke = khat.apply(&e);
        for a in 0..xis.len() {
            let xke = xis[a].apply(&ke);
            let kxe = khat.apply(&xis[a].apply(&e));
            let mut r: Vec<Complex64> = kxe.iter().zip(&xke).map(|(p, q)| p - q).collect();
            for (b, xb) in xis.iter().enumerate() {
                let c = k[(a, b)];
                if c != 0.0 {
                    for (ri, v) in r.iter_mut().zip(xb.apply(&e)) {
                        *ri += v * c;
                    }
                }
            }
            worst = worst.max(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{random_generator, standard_kahler};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dense_xi(fock: &FockSpace) -> Vec<CMat> {
        (0..2 * fock.n_modes()).map(|a| fock.xi(a).to_dense()).collect()
    }

    #[test]
    fn single_fermion_relations() {
        let fock = FockSpace::new(Statistics::Fermion, 1, None).unwrap();
        let x = dense_xi(&fock);
        let anti = &x[0] * &x[1] + &x[1] * &x[0];
        assert!(anti.norm() < 1e-15);
        assert!((&x[0] * &x[0] - CMat::identity(2, 2) * Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fermionic_anticommutators_match_metric() {
        let fock = FockSpace::new(Statistics::Fermion, 3, None).unwrap();
        let x = dense_xi(&fock);
        for a in 0..6 {
            for b in 0..6 {
                let anti = &x[a] * &x[b] + &x[b] * &x[a];
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((anti - CMat::identity(8, 8) * Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn bosonic_commutator_below_cutoff() {
        let fock = FockSpace::new(Statistics::Boson, 1, Some(80)).unwrap();
        let x = dense_xi(&fock);
        let comm = &x[0] * &x[1] - &x[1] * &x[0];
        for n in 0..78 {
            for m in 0..78 {
                let expect = if n == m { I } else { ZERO };
                assert!((comm[(n, m)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_is_annihilated() {
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let fock = FockSpace::new(stats, 2, Some(10)).unwrap();
            let x = dense_xi(&fock);
            let j = KahlerStructure::standard(2, stats).j().clone();
            let vac = nalgebra::DVector::from_vec(fock.vacuum());
            for a in 0..4 {
                let mut op = CMat::zeros(fock.dim(), fock.dim());
                for b in 0..4 {
                    let coeff = (if a == b { ONE } else { ZERO }) + I * j[(a, b)];
                    op += &x[b] * (coeff * 0.5);
                }
                assert!((op * &vac).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rotation_generators_are_number_operators() {
        let fock = FockSpace::new(Statistics::Boson, 1, Some(12)).unwrap();
        let z = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let khat = quad_operator(&z, &fock).to_dense();
        for n in 0..11 {
            assert!((khat[(n, n)] + I * (n as f64 + 0.5)).norm() < 1e-13);
        }
        let ffock = FockSpace::new(Statistics::Fermion, 1, None).unwrap();
        let khat = quad_operator(&z, &ffock).to_dense();
        assert!((khat[(0, 0)] - I * 0.5).norm() < 1e-14);
        assert!((khat[(1, 1)] + I * 0.5).norm() < 1e-14);
    }

    #[test]
    fn quadratic_operator_is_anti_hermitian_and_parity_even() {
        let (k, _) = random_generator(2, Statistics::Fermion, 3, 1.0);
        let fock = FockSpace::new(Statistics::Fermion, 2, None).unwrap();
        let khat = quad_operator(k.matrix(), &fock).to_dense();
        assert!((&khat + khat.adjoint()).norm() < 1e-13);
        for r in 0..4 {
            for c in 0..4 {
                let pr: u16 = fock.occupations(r).iter().sum();
                let pc: u16 = fock.occupations(c).iter().sum();
                if pr % 2 != pc % 2 {
                    assert!(khat[(r, c)].norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn lie_homomorphism_fermions() {
        let fock = FockSpace::new(Statistics::Fermion, 3, None).unwrap();
        let (k1, _) = random_generator(3, Statistics::Fermion, 1, 1.0);
        let (k2, _) = random_generator(3, Statistics::Fermion, 2, 1.0);
        let a = quad_operator(k1.matrix(), &fock).to_dense();
        let b = quad_operator(k2.matrix(), &fock).to_dense();
        let comm = k1.matrix() * k2.matrix() - k2.matrix() * k1.matrix();
        let c = quad_operator(&comm, &fock).to_dense();
        assert!((&a * &b - &b * &a - c).norm() < 1e-10);
    }

    #[test]
    fn zero_generator_gives_one() {
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let kahler = standard_kahler(2, stats);
            let z = LieGenerator::zero(&kahler);
            let v = exact_expectation(&z, &kahler, Some(10)).unwrap();
            assert!((v - 1.0).norm() < 1e-14);
        }
    }

    #[test]
    fn boson_rotation_by_pi() {
        let kahler = standard_kahler(1, Statistics::Boson);
        let k = LieGenerator::new(kahler.j() * PI, &kahler).unwrap();
        let v = exact_expectation(&k, &kahler, Some(20)).unwrap();
        assert!((v + I).norm() < 1e-12, "{v}");
    }

    #[test]
    fn boson_double_cover_loop() {
        let kahler = standard_kahler(1, Statistics::Boson);
        let k = LieGenerator::new(kahler.j().clone(), &kahler).unwrap();
        let traj = vacuum_trajectory(&k, &kahler, &[2.0 * PI, 4.0 * PI], Some(16)).unwrap();
        assert!((traj[0] + 1.0).norm() < 1e-12);
        assert!((traj[1] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn single_mode_squeezing_closed_form() {
        // ⟨0|S(r)|0⟩ = 1/√cosh r for a real squeeze; K = r·diag(1, −1)
        let kahler = standard_kahler(1, Statistics::Boson);
        let r = 0.7;
        let k = LieGenerator::new(Mat::from_row_slice(2, 2, &[r, 0.0, 0.0, -r]), &kahler).unwrap();
        let v = exact_expectation(&k, &kahler, Some(60)).unwrap();
        assert!((v - 1.0 / r.cosh().sqrt()).norm() < 1e-10, "{v}");
    }

    #[test]
    fn fermion_pauli_case() {
        // x₃ = −x₄ = −n₁/2, x₂ = x₅ = −n₃/2 puts ½(n₁σ_x + n₃σ_z) on the even sector
        let kahler = standard_kahler(2, Statistics::Fermion);
        for (n1, n3) in [(0.8, -1.3), (2.0, 0.5), (0.0, 3.0)] {
            let (x2, x3, x4, x5) = (-n3 / 2.0, -n1 / 2.0, n1 / 2.0, -n3 / 2.0);
            let h = Mat::from_row_slice(4, 4, &[0.0, 0.0, x2, x3, 0.0, 0.0, x4, x5, -x2, -x4, 0.0, 0.0, -x3, -x5, 0.0, 0.0]);
            let k = LieGenerator::new(h, &kahler).unwrap();
            let v = exact_expectation(&k, &kahler, None).unwrap();
            let theta = (n1 * n1 + n3 * n3).sqrt();
            let expect = Complex64::new((theta / 2.0).cos(), -(theta / 2.0).sin() * n3 / theta);
            assert!((v - expect).norm() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn chebyshev_matches_dense_exponential() {
        let fock = FockSpace::new(Statistics::Boson, 2, Some(8)).unwrap();
        let (k, _) = random_generator(2, Statistics::Boson, 11, 0.8);
        let khat = quad_operator(k.matrix(), &fock);
        let dense = khat.to_dense().exp();
        let v = exp_action(&khat, &fock.vacuum());
        for i in 0..fock.dim() {
            assert!((v[i] - dense[(i, 0)]).norm() < 1e-11);
        }
    }

    #[test]
    fn bessel_values() {
        let j = bessel_j_all(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_all(30.0, 40);
        assert!((j[0] - (-0.086_367_983_581_040_23)).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn fermionic_equivariance(seed in 0u64..10_000, n in 1usize..4) {
            let fock = FockSpace::new(Statistics::Fermion, n, None).unwrap();
            let (k, _) = random_generator(n, Statistics::Fermion, seed, 1.0);
            prop_assert!(exact_conjugation_check(k.matrix(), &fock) < 1e-11);
        }

        #[test]
        fn bosonic_equivariance(seed in 0u64..10_000) {
            let fock = FockSpace::new(Statistics::Boson, 1, Some(80)).unwrap();
            let (k, _) = random_generator(1, Statistics::Boson, seed, 1.0);
            prop_assert!(exact_conjugation_check(k.matrix(), &fock) < 1e-9);
        }

        #[test]
        fn group_level_equivariance(seed in 0u64..10_000) {
            let fock = FockSpace::new(Statistics::Fermion, 2, None).unwrap();
            let (k, _) = random_generator(2, Statistics::Fermion, seed, 1.0);
            let u = quad_operator(k.matrix(), &fock).to_dense().exp();
            let x = dense_xi(&fock);
            let m = linalg::expm(k.matrix());
            for a in 0..4 {
                let lhs = u.adjoint() * &x[a] * &u;
                let mut rhs = CMat::zeros(4, 4);
                for b in 0..4 {
                    rhs += &x[b] * Complex64::new(m[(a, b)], 0.0);
                }
                prop_assert!((lhs - rhs).norm() < 1e-11);
            }
        }
    }
}
