//! Vacuum expectation values ⟨J|𝒰|J⟩: squared value, modulus and the full phase.

use num_complex::Complex64;
use serde::Serialize;

use crate::cartan::sqrt_and_half_log;
use crate::circle_cocycle::cocycle_with_threshold;
use crate::complexify::{self, c_part};
use crate::double_cover::CoverElement;
use crate::error::{Error, Result};
use crate::linalg::{self, inverse, wrap_angle, Mat};
use crate::normal_form::{self, c_eigenvalues};
use crate::phase_space::{standard_block, to_standard_frame, GroupElement, KahlerStructure, LieGenerator, Statistics};

/// Fermionic values with smaller modulus are reported as undefined.
pub const UNDEFINED_MODULUS: f64 = 1e-7;
/// Minimum |det(1 − J̃J)| accepted for the commuting fermionic structure.
pub const FLIP_MARGIN: f64 = 1e-6;
/// Largest admissible gap between the phase formula and the nearest root of the squared value.
pub const SNAP_TOL: f64 = 1e-3;
const COCYCLE_THRESHOLD: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpectationValue {
    pub modulus: f64,
    /// Radians in (−π, π]; 0 when undefined.
    pub phase: f64,
    pub squared: Complex64,
    pub defined: bool,
}

impl ExpectationValue {
    pub fn value(&self) -> Complex64 {
        if self.defined {
            Complex64::from_polar(self.modulus, self.phase)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// 1/det_bar C_M for bosons, det_bar C_M for fermions.
pub fn expectation_squared(m: &GroupElement, kahler: &KahlerStructure) -> Result<Complex64> {
    let d = complexify::det_bar(&c_part(m.matrix(), kahler.j()), kahler)?;
    Ok(match kahler.statistics() {
        Statistics::Boson => 1.0 / d,
        Statistics::Fermion => d,
    })
}

/// |det C_M|^{∓1/4}, with C_M = (M − JMJ)/2.
pub fn expectation_modulus(m: &GroupElement, kahler: &KahlerStructure) -> Result<f64> {
    let det = c_part(m.matrix(), kahler.j()).determinant().abs();
    Ok(match kahler.statistics() {
        Statistics::Boson => det.powf(-0.25),
        Statistics::Fermion => det.powf(0.25),
    })
}

/// ⟨J|𝒰(M,ψ)|J⟩: the modulus from C_M, the phase fixed by ψ (conjugated for bosons).
pub fn cover_amplitude(cover: &CoverElement) -> Result<Complex64> {
    let modulus = expectation_modulus(cover.group_element(), cover.reference())?;
    let psi = cover.psi();
    Ok(modulus
        * match cover.statistics() {
            Statistics::Boson => psi.conj(),
            Statistics::Fermion => psi,
        })
}

/// The cover element (e^K, ψ) represented by e^{K̂}.
pub fn exp_cover(k: &LieGenerator, kahler: &KahlerStructure) -> Result<CoverElement> {
    let v = expectation_value(k, kahler)?;
    if !v.defined {
        return Err(Error::FermionBoundary { determinant: v.modulus });
    }
    let phase = Complex64::from_polar(1.0, v.phase);
    let psi = match kahler.statistics() {
        Statistics::Boson => phase.conj(),
        Statistics::Fermion => phase,
    };
    CoverElement::new(k.exp(), psi, kahler.clone())
}

/// Dispatches on the statistics of `k`.
pub fn expectation_value(k: &LieGenerator, kahler: &KahlerStructure) -> Result<ExpectationValue> {
    match k.statistics() {
        Statistics::Boson => phase_boson(k, kahler),
        Statistics::Fermion => phase_fermion(k, kahler),
    }
}

/// Picks the root of `squared` nearest to the phase formula.
fn snap(raw_phase: f64, squared: Complex64, modulus: f64) -> Result<ExpectationValue> {
    let root = squared.sqrt();
    let guess = Complex64::from_polar(1.0, raw_phase);
    let unit = root / root.norm();
    let unit = if (unit - guess).norm() <= (unit + guess).norm() { unit } else { -unit };
    let gap = wrap_angle(unit.arg() - raw_phase).abs();
    if gap > SNAP_TOL {
        return Err(Error::Invariant { what: "phase formula consistent with the squared value", deviation: gap });
    }
    Ok(ExpectationValue { modulus, phase: wrap_angle(unit.arg()), squared, defined: true })
}

// ---------------------------------------------------------------------------
// fermions

type Plane = (nalgebra::DVector<f64>, nalgebra::DVector<f64>);

/// Orthonormal pairs (x, y) with Kx = ωy, Ky = −ωx for antisymmetric K, and the frequencies ω ≥ 0.
/// Built from the eigenspaces of −K², so coinciding frequencies stay well separated into planes.
fn rotation_planes(k: &Mat) -> (Vec<Plane>, Vec<f64>) {
    let dim = k.nrows();
    let square = -(k * k);
    let eig = ((&square + square.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let scale = k.norm().max(1.0);
    let tol = 1e-9 * scale;
    let cluster_tol = 1e-8 * scale * scale;
    let mut planes: Vec<Plane> = Vec::new();
    let mut freqs = Vec::new();
    let mut null_cols = Vec::new();
    let mut start = 0;
    while start < dim {
        let lead = eig.eigenvalues[order[start]];
        let end = (start..dim).find(|&i| lead - eig.eigenvalues[order[i]] > cluster_tol).unwrap_or(dim);
        let mut cluster: Vec<nalgebra::DVector<f64>> =
            order[start..end].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        if lead.max(0.0).sqrt() <= tol {
            null_cols.extend(cluster);
            break;
        }
        for _ in 0..cluster.len() / 2 {
            let (pick, _) = cluster
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty cluster");
            let x = cluster.swap_remove(pick).normalize();
            let kx = k * &x;
            let w = kx.norm();
            let y = kx / w;
            for v in cluster.iter_mut() {
                *v -= &x * x.dot(v) + &y * y.dot(v);
            }
            planes.push((x, y));
            freqs.push(w);
        }
        start = end;
    }
    for pair in null_cols.chunks_exact(2) {
        planes.push((pair[0].clone(), pair[1].clone()));
        freqs.push(0.0);
    }
    (planes, freqs)
}

fn structure_from_signs(planes: &[Plane], signs: u64) -> Mat {
    let dim = planes[0].0.len();
    let mut j = Mat::zeros(dim, dim);
    for (i, (x, y)) in planes.iter().enumerate() {
        let s = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
        // J̃x = −σy, J̃y = σx
        j -= (y * x.transpose() - x * y.transpose()) * s;
    }
    j
}

/// Complex structure commuting with K, with the fewest sign flips giving |det(1 − J̃J)| > FLIP_MARGIN.
pub(crate) fn commuting_structure(k: &Mat, j: &Mat) -> Result<Mat> {
    let (planes, _) = rotation_planes(k);
    let n = planes.len();
    let id = Mat::identity(k.nrows(), k.nrows());
    let margin = |jt: &Mat| (&id - jt * j).determinant().abs();
    let mut best: Option<(f64, Mat)> = None;
    if n <= 16 {
        for flips in 0..=n as u32 {
            let mut level: Option<(f64, Mat)> = None;
            for signs in (0u64..1 << n).filter(|s| s.count_ones() == flips) {
                let jt = structure_from_signs(&planes, signs);
                let m = margin(&jt);
                if level.as_ref().is_none_or(|(b, _)| m > *b) {
                    level = Some((m, jt));
                }
            }
            let (m, jt) = level.expect("nonempty level");
            if m > FLIP_MARGIN {
                return Ok(jt);
            }
            if best.as_ref().is_none_or(|(b, _)| m > *b) {
                best = Some((m, jt));
            }
        }
    } else {
        // greedy: flip whichever block most improves the margin
        let mut signs = 0u64;
        let mut current = margin(&structure_from_signs(&planes, signs));
        while current <= FLIP_MARGIN {
            let trial = (0..n)
                .filter(|i| signs >> i & 1 == 0)
                .map(|i| (margin(&structure_from_signs(&planes, signs | 1 << i)), i))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            match trial {
                Some((m, i)) if m > current => {
                    signs |= 1 << i;
                    current = m;
                }
                _ => break,
            }
        }
        best = Some((current, structure_from_signs(&planes, signs)));
    }
    let (m, jt) = best.expect("at least one candidate");
    if m > 1e-12 {
        Ok(jt)
    } else {
        Err(Error::Invariant { what: "commuting structure off the quasi-boundary", deviation: m })
    }
}

pub fn phase_fermion(k: &LieGenerator, kahler: &KahlerStructure) -> Result<ExpectationValue> {
    if k.statistics() != Statistics::Fermion || kahler.statistics() != Statistics::Fermion {
        return Err(Error::StatisticsMismatch);
    }
    let std = KahlerStructure::standard(kahler.n_modes(), Statistics::Fermion);
    let ks = to_standard_frame(k.matrix(), kahler)?;
    let m = GroupElement::trusted(linalg::expm(&ks), Statistics::Fermion);
    let squared = expectation_squared(&m, &std)?;
    let modulus = expectation_modulus(&m, &std)?;
    if modulus < UNDEFINED_MODULUS {
        return Ok(ExpectationValue { modulus, phase: 0.0, squared, defined: false });
    }
    let j = std.j();
    let j_tilde = commuting_structure(&ks, j)?;
    let delta = -(&j_tilde * j);
    let (t, _) = sqrt_and_half_log(&delta, &std)?;
    let t_inv = inverse(&t).ok_or(Error::Invariant { what: "T invertible", deviation: f64::INFINITY })?;
    let eta = cocycle_with_threshold(&t_inv, m.matrix(), &std, COCYCLE_THRESHOLD)?.eta;
    let raw = -0.25 * (&ks * &j_tilde).trace() - 0.5 * eta;
    snap(raw, squared, modulus)
}

// ---------------------------------------------------------------------------
// bosons

/// arg with the negative real axis sent to 0, so conjugate roots of negative pairs cancel.
fn arg_prime(z: Complex64) -> f64 {
    if z.re < 0.0 && z.im.abs() <= 1e-8 * z.norm() {
        0.0
    } else {
        z.arg()
    }
}

/// Unsnapped bosonic phase formula; exposed for diagnostics.
pub fn boson_phase_formula(k: &LieGenerator, kahler: &KahlerStructure) -> Result<f64> {
    if k.statistics() != Statistics::Boson || kahler.statistics() != Statistics::Boson {
        return Err(Error::StatisticsMismatch);
    }
    let n = kahler.n_modes();
    let std = KahlerStructure::standard(n, Statistics::Boson);
    let ks = to_standard_frame(k.matrix(), kahler)?;
    let nf = normal_form::symplectic_normal_form(&LieGenerator::trusted(ks.clone(), Statistics::Boson))?;
    let nf = normal_form::auto_rescale(&nf);
    let j = standard_block(n);
    let s_inv = nf.s_inv();
    let j_tilde = &nf.s * &j * &s_inv;
    let k_imag = nf.imaginary_part();
    let k_rest = &nf.k_normal - &k_imag;
    let (t, _) = sqrt_and_half_log(&(-(&j_tilde * &j)), &std)?;
    let t_inv = inverse(&t).ok_or(Error::Invariant { what: "T invertible", deviation: f64::INFINITY })?;
    let m = linalg::expm(&ks);
    let first = 0.25 * (&k_imag * &j).trace();
    let eta1 = cocycle_with_threshold(&t_inv, &m, &std, COCYCLE_THRESHOLD)?.eta;
    let root_arg: f64 = 0.5 * c_eigenvalues(&linalg::expm(&k_rest), &j).into_iter().map(arg_prime).sum::<f64>();
    let eta2 = cocycle_with_threshold(&(&t_inv * &m), &t, &std, COCYCLE_THRESHOLD)?.eta;
    Ok(first + 0.5 * eta1 - root_arg + 0.5 * eta2)
}

pub fn phase_boson(k: &LieGenerator, kahler: &KahlerStructure) -> Result<ExpectationValue> {
    let raw = boson_phase_formula(k, kahler)?;
    let m = k.exp();
    let squared = expectation_squared(&m, kahler)?;
    let modulus = expectation_modulus(&m, kahler)?;
    snap(raw, squared, modulus)
}

// ---------------------------------------------------------------------------
// trajectories

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub value: ExpectationValue,
    /// Continuous phase; carried across undefined points.
    pub phase_unwrapped: f64,
    /// arg √(squared) on the principal branch, in (−π/2, π/2].
    pub phase_naive: f64,
}

/// Evaluates the expectation value of e^{tK̂} on a sorted grid, in parallel over points.
pub fn phase_trajectory(k: &LieGenerator, kahler: &KahlerStructure, t_grid: &[f64]) -> Result<Vec<TrajectoryPoint>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("time grid must be sorted".into()));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(t_grid.len().max(1));
    let chunk = t_grid.len().div_ceil(workers).max(1);
    let values: Vec<Result<ExpectationValue>> = std::thread::scope(|scope| {
        let handles: Vec<_> = t_grid
            .chunks(chunk)
            .map(|ts| scope.spawn(move || ts.iter().map(|&t| expectation_value(&k.scaled(t), kahler)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(t_grid.len());
    let mut last: Option<f64> = None;
    for (&t, value) in t_grid.iter().zip(values) {
        let value = value?;
        let unwrapped = match (value.defined, last) {
            (false, Some(prev)) => prev,
            (false, None) => 0.0,
            (true, None) => value.phase,
            (true, Some(prev)) => prev + wrap_angle(value.phase - prev),
        };
        if value.defined {
            last = Some(unwrapped);
        }
        let naive = if value.defined { 0.5 * value.squared.arg() } else { 0.0 };
        out.push(TrajectoryPoint { t, value, phase_unwrapped: unwrapped, phase_naive: naive });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// one-mode and two-mode closed forms

/// Closed forms for K = aX + cZ (one boson) and the two-fermion Hamiltonian ½ n·σ on the even sector.
pub mod closed_form {
    use super::*;

    /// K = aX + cZ with X = σ_x and Z = J.
    pub fn boson_generator(a: f64, c: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[0.0, a + c, a - c, 0.0])
    }

    /// 2(a² − c²)/(a² − 2c² + a² cosh 2√(a² − c²)), continued through a² ≤ c².
    ///
    /// This equals 1/|det_bar C_M|², i.e. the fourth power of the modulus.
    pub fn boson_modulus_quartic(a: f64, c: f64) -> f64 {
        let s = a * a - c * c;
        if s.abs() < 1e-12 {
            return 1.0 / (1.0 + a * a);
        }
        if s > 0.0 {
            let r = s.sqrt();
            2.0 * s / (a * a - 2.0 * c * c + a * a * (2.0 * r).cosh())
        } else {
            let r = (-s).sqrt();
            2.0 * s / (a * a - 2.0 * c * c + a * a * (2.0 * r).cos())
        }
    }

    /// Phase of ⟨J|e^{K̂}|J⟩, continuous along t ↦ tK; not wrapped.
    pub fn boson_phase(a: f64, c: f64) -> f64 {
        let s = a * a - c * c;
        if s.abs() < 1e-12 {
            return -0.5 * c.atan();
        }
        if s > 0.0 {
            let r = s.sqrt();
            return -0.5 * (c * r.tanh() / r).atan();
        }
        if c < 0.0 {
            return -boson_phase(a, -c);
        }
        let r = (-s).sqrt();
        let (sin, cos) = r.sin_cos();
        -0.5 * ((c - r) * cos * sin / (c + (r - c) * cos * cos)).atan() - 0.5 * r
    }

    /// Generator with even-sector Hamiltonian ½(n₁σ_x + n₃σ_z) for two fermionic modes.
    pub fn fermion_generator(n1: f64, n3: f64) -> Mat {
        let (x2, x3, x4, x5) = (-n3 / 2.0, -n1 / 2.0, n1 / 2.0, -n3 / 2.0);
        Mat::from_row_slice(
            4,
            4,
            &[0.0, 0.0, x2, x3, 0.0, 0.0, x4, x5, -x2, -x4, 0.0, 0.0, -x3, -x5, 0.0, 0.0],
        )
    }

    /// cos(θ/2) − i sin(θ/2) n₃/θ with θ = |n|.
    pub fn fermion_value(n1: f64, n3: f64) -> Complex64 {
        let theta = (n1 * n1 + n3 * n3).sqrt();
        if theta == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        Complex64::new((theta / 2.0).cos(), -(theta / 2.0).sin() * n3 / theta)
    }
}
