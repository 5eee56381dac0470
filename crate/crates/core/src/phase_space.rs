//! Kähler structures, Lie-algebra generators, quadratic Hamiltonians and group elements.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_square, inverse, null_space, to_complex_mat, Mat};

/// Structural invariants are checked at this relative Frobenius tolerance.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Two reference complex structures closer than this are the same reference.
pub const REFERENCE_EQ_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Boson,
    Fermion,
}

impl Statistics {
    pub fn name(self) -> &'static str {
        match self {
            Statistics::Boson => "boson",
            Statistics::Fermion => "fermion",
        }
    }
}

impl std::str::FromStr for Statistics {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boson" | "bosons" | "bosonic" => Ok(Statistics::Boson),
            "fermion" | "fermions" | "fermionic" => Ok(Statistics::Fermion),
            other => Err(Error::InvalidInput(format!("unknown statistics `{other}`"))),
        }
    }
}

/// Standard block form [[0, 1], [-1, 0]] in the (q..., p...) ordering.
pub fn standard_block(n: usize) -> Mat {
    let mut m = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// A compatible triple (G, Ω, J) together with the inverses ω = Ω⁻¹, g = G⁻¹.
///
/// The kinematic form (Ω for bosons, G for fermions) is supplied; the other
/// form is derived from J. A real basis change bringing J to standard block
/// form is cached for complexification.
#[derive(Clone, Debug)]
pub struct KahlerStructure {
    n_modes: usize,
    statistics: Statistics,
    omega: Mat,
    g_metric: Mat,
    j: Mat,
    omega_inv: Mat,
    g_inv: Mat,
    standardizer: Mat,
    standardizer_inv: Mat,
    standard_j: bool,
}

impl KahlerStructure {
    pub fn standard(n_modes: usize, statistics: Statistics) -> Self {
        assert!(n_modes >= 1, "at least one mode required");
        let block = standard_block(n_modes);
        let id = Mat::identity(2 * n_modes, 2 * n_modes);
        KahlerStructure {
            n_modes,
            statistics,
            omega: block.clone(),
            g_metric: id.clone(),
            j: block.clone(),
            omega_inv: -block,
            g_inv: id.clone(),
            standardizer: id.clone(),
            standardizer_inv: id,
            standard_j: true,
        }
    }

    /// Builds a structure from the kinematic form and a complex structure `j`.
    pub fn from_complex_structure(statistics: Statistics, kinematic: &Mat, j: &Mat) -> Result<Self> {
        let dim = j.nrows();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidInput("phase-space dimension must be even and positive".into()));
        }
        check_square(j, dim)?;
        check_square(kinematic, dim)?;
        let n_modes = dim / 2;
        let id = Mat::identity(dim, dim);
        let dev = linalg::rel_dev(&(j * j), &(-&id));
        if dev > STRUCTURE_TOL {
            return Err(Error::Invariant { what: "J^2 = -1", deviation: dev });
        }
        let (omega, g_metric) = match statistics {
            Statistics::Boson => {
                let asym = (kinematic + kinematic.transpose()).norm() / kinematic.norm().max(1.0);
                if asym > STRUCTURE_TOL {
                    return Err(Error::Invariant { what: "symplectic form antisymmetry", deviation: asym });
                }
                let compat = linalg::rel_dev(&(j * kinematic * j.transpose()), kinematic);
                if compat > STRUCTURE_TOL {
                    return Err(Error::Invariant { what: "J Omega J^T = Omega", deviation: compat });
                }
                let g = -(j * kinematic);
                let g = (&g + g.transpose()) * 0.5;
                let (vals, _) = linalg::sym_eigen(&g);
                if vals.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Invariant { what: "-J Omega positive definite", deviation: vals.iter().cloned().fold(f64::INFINITY, f64::min) });
                }
                (kinematic.clone(), g)
            }
            Statistics::Fermion => {
                let asym = (kinematic - kinematic.transpose()).norm() / kinematic.norm().max(1.0);
                if asym > STRUCTURE_TOL {
                    return Err(Error::Invariant { what: "metric symmetry", deviation: asym });
                }
                let (vals, _) = linalg::sym_eigen(kinematic);
                if vals.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Invariant { what: "metric positive definite", deviation: 0.0 });
                }
                let compat = linalg::rel_dev(&(j * kinematic * j.transpose()), kinematic);
                if compat > STRUCTURE_TOL {
                    return Err(Error::Invariant { what: "J G J^T = G", deviation: compat });
                }
                let om = j * kinematic;
                let om = (&om - om.transpose()) * 0.5;
                (om, kinematic.clone())
            }
        };
        let omega_inv = inverse(&omega).ok_or(Error::Invariant { what: "Omega invertible", deviation: f64::INFINITY })?;
        let g_inv = inverse(&g_metric).ok_or(Error::Invariant { what: "G invertible", deviation: f64::INFINITY })?;
        let standard = standard_block(n_modes);
        let standard_j = (j - &standard).norm() <= REFERENCE_EQ_TOL;
        let (standardizer, standardizer_inv) = if standard_j {
            (id.clone(), id)
        } else {
            let s = standardizing_basis(j, &g_inv, n_modes)?;
            let si = inverse(&s).ok_or(Error::Invariant { what: "standardizing basis", deviation: f64::INFINITY })?;
            (s, si)
        };
        Ok(KahlerStructure {
            n_modes,
            statistics,
            omega,
            g_metric,
            j: j.clone(),
            omega_inv,
            g_inv,
            standardizer,
            standardizer_inv,
            standard_j,
        })
    }

    /// Same kinematic form, different complex structure.
    pub fn with_j(&self, j: &Mat) -> Result<Self> {
        Self::from_complex_structure(self.statistics, self.kinematic_form(), j)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
    pub fn omega(&self) -> &Mat {
        &self.omega
    }
    pub fn g_metric(&self) -> &Mat {
        &self.g_metric
    }
    pub fn j(&self) -> &Mat {
        &self.j
    }
    pub fn omega_inv(&self) -> &Mat {
        &self.omega_inv
    }
    pub fn g_inv(&self) -> &Mat {
        &self.g_inv
    }
    pub fn is_standard_j(&self) -> bool {
        self.standard_j
    }

    /// Ω for bosons, G for fermions.
    pub fn kinematic_form(&self) -> &Mat {
        match self.statistics {
            Statistics::Boson => &self.omega,
            Statistics::Fermion => &self.g_metric,
        }
    }

    /// Real basis change `S` with `S⁻¹ J S` in standard block form.
    pub fn standardizer(&self) -> (&Mat, &Mat) {
        (&self.standardizer, &self.standardizer_inv)
    }

    /// Complex two-point function ⟨J|ξᵃξᵇ|J⟩ = ½(G + iΩ).
    pub fn two_point(&self) -> crate::linalg::CMat {
        let mut out = crate::linalg::CMat::zeros(self.dim(), self.dim());
        for a in 0..self.dim() {
            for b in 0..self.dim() {
                out[(a, b)] = Complex64::new(0.5 * self.g_metric[(a, b)], 0.5 * self.omega[(a, b)]);
            }
        }
        out
    }

    pub fn same_reference(&self, other: &KahlerStructure) -> bool {
        self.statistics == other.statistics
            && self.n_modes == other.n_modes
            && (&self.j - &other.j).norm() < REFERENCE_EQ_TOL
            && (self.kinematic_form() - other.kinematic_form()).norm() < REFERENCE_EQ_TOL
    }
}

/// Real basis (q₁…q_N, p₁…p_N) from an orthonormal basis of the +i eigenspace of J.
fn standardizing_basis(j: &Mat, g_inv: &Mat, n: usize) -> Result<Mat> {
    let dim = 2 * n;
    let shifted = to_complex_mat(j) - crate::linalg::CMat::identity(dim, dim) * linalg::I;
    let scale = j.norm().max(1.0);
    let mut v = null_space(&shifted, 1e-8 * scale);
    if v.ncols() != n {
        return Err(Error::Invariant { what: "i-eigenspace of J has dimension N", deviation: v.ncols() as f64 });
    }
    // Gram-Schmidt against the Hermitian form v* g w so the real basis is metric-adapted.
    let gc = to_complex_mat(g_inv);
    for k in 0..n {
        for l in 0..k {
            let vl = v.column(l).into_owned();
            let proj = (vl.adjoint() * &gc * v.column(k))[(0, 0)];
            let updated = v.column(k) - vl * proj;
            v.set_column(k, &updated);
        }
        let nk = (v.column(k).adjoint() * &gc * v.column(k))[(0, 0)].re.sqrt();
        let scaled = v.column(k) / Complex64::new(nk / std::f64::consts::SQRT_2, 0.0);
        v.set_column(k, &scaled);
    }
    let mut s = Mat::zeros(dim, dim);
    for k in 0..n {
        for r in 0..dim {
            s[(r, k)] = v[(r, k)].re;
            s[(r, n + k)] = v[(r, k)].im;
        }
    }
    let check = inverse(&s).map(|si| linalg::rel_dev(&(&si * j * &s), &standard_block(n)));
    match check {
        Some(d) if d < 1e-8 => Ok(s),
        Some(d) => Err(Error::Invariant { what: "standardizing basis", deviation: d }),
        None => Err(Error::Invariant { what: "standardizing basis", deviation: f64::INFINITY }),
    }
}

pub fn standard_kahler(n_modes: usize, statistics: Statistics) -> KahlerStructure {
    KahlerStructure::standard(n_modes, statistics)
}

/// Real coefficient matrix h of Ĥ = ½ h_ab ξᵃξᵇ (times i for fermions).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticHamiltonian {
    h: Mat,
    statistics: Statistics,
}

impl QuadraticHamiltonian {
    pub fn new(h: Mat, statistics: Statistics) -> Result<Self> {
        if h.nrows() != h.ncols() || !h.nrows().is_multiple_of(2) {
            return Err(Error::Shape { rows: h.nrows(), cols: h.ncols(), expected: h.nrows() });
        }
        let sign = match statistics {
            Statistics::Boson => -1.0,
            Statistics::Fermion => 1.0,
        };
        let dev = (&h + h.transpose() * sign).norm() / h.norm().max(1.0);
        if dev > STRUCTURE_TOL {
            return Err(Error::Invariant {
                what: match statistics {
                    Statistics::Boson => "bosonic h symmetric",
                    Statistics::Fermion => "fermionic h antisymmetric",
                },
                deviation: dev,
            });
        }
        Ok(QuadraticHamiltonian { h, statistics })
    }
    pub fn matrix(&self) -> &Mat {
        &self.h
    }
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
}

/// K in 𝔰𝔭(2N) (bosons) or 𝔰𝔬(2N) (fermions).
#[derive(Clone, Debug, PartialEq)]
pub struct LieGenerator {
    k: Mat,
    statistics: Statistics,
}

impl LieGenerator {
    pub fn new(k: Mat, kahler: &KahlerStructure) -> Result<Self> {
        check_square(&k, kahler.dim())?;
        let form = kahler.kinematic_form();
        let dev = (&k * form + form * k.transpose()).norm() / (k.norm() * form.norm()).max(1.0);
        if dev > STRUCTURE_TOL {
            return Err(Error::Invariant { what: "generator in the Lie algebra", deviation: dev });
        }
        Ok(LieGenerator { k, statistics: kahler.statistics() })
    }

    /// Wraps a matrix known to lie in the algebra (e.g. built from an algebra basis).
    pub(crate) fn trusted(k: Mat, statistics: Statistics) -> Self {
        LieGenerator { k, statistics }
    }

    pub fn zero(kahler: &KahlerStructure) -> Self {
        LieGenerator { k: Mat::zeros(kahler.dim(), kahler.dim()), statistics: kahler.statistics() }
    }

    pub fn matrix(&self) -> &Mat {
        &self.k
    }
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
    pub fn scaled(&self, t: f64) -> Self {
        LieGenerator { k: &self.k * t, statistics: self.statistics }
    }
    pub fn exp(&self) -> GroupElement {
        GroupElement { m: linalg::expm(&self.k), statistics: self.statistics }
    }
}

/// M in Sp(2N, ℝ) or SO(2N, ℝ).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    m: Mat,
    statistics: Statistics,
}

impl GroupElement {
    pub fn new(m: Mat, kahler: &KahlerStructure) -> Result<Self> {
        check_square(&m, kahler.dim())?;
        let form = kahler.kinematic_form();
        let scale = (m.norm() * m.norm()).max(1.0);
        let dev = (&m * form * m.transpose() - form).norm() / (scale * form.norm().max(1.0));
        if dev > STRUCTURE_TOL {
            return Err(Error::Invariant { what: "group element preserves the kinematic form", deviation: dev });
        }
        if kahler.statistics() == Statistics::Fermion && m.determinant() <= 0.0 {
            return Err(Error::Invariant { what: "det M = 1", deviation: (m.determinant() - 1.0).abs() });
        }
        Ok(GroupElement { m, statistics: kahler.statistics() })
    }

    pub(crate) fn trusted(m: Mat, statistics: Statistics) -> Self {
        GroupElement { m, statistics }
    }

    pub fn identity(kahler: &KahlerStructure) -> Self {
        GroupElement { m: Mat::identity(kahler.dim(), kahler.dim()), statistics: kahler.statistics() }
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }
    pub fn statistics(&self) -> Statistics {
        self.statistics
    }
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Inverse through the preserved form (Ω Mᵀ ω or G Mᵀ g), exact for group elements.
    pub fn inverse(&self, kahler: &KahlerStructure) -> GroupElement {
        let (form, form_inv) = match self.statistics {
            Statistics::Boson => (kahler.omega(), kahler.omega_inv()),
            Statistics::Fermion => (kahler.g_metric(), kahler.g_inv()),
        };
        GroupElement { m: form * self.m.transpose() * form_inv, statistics: self.statistics }
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement { m: &self.m * &other.m, statistics: self.statistics }
    }

    /// Distance from the group manifold.
    pub fn drift(&self, kahler: &KahlerStructure) -> f64 {
        let form = kahler.kinematic_form();
        (&self.m * form * self.m.transpose() - form).norm() / (self.m.norm().powi(2)).max(1.0)
    }

    /// One Newton step back onto the group: M ← M(1 − ½(M̂M − 1)).
    pub fn reprojected(&self, kahler: &KahlerStructure) -> GroupElement {
        let dim = self.dim();
        let approx_inv = self.inverse(kahler).m;
        let resid = &approx_inv * &self.m - Mat::identity(dim, dim);
        GroupElement { m: &self.m * (Mat::identity(dim, dim) - resid * 0.5), statistics: self.statistics }
    }
}

pub fn generator_from_hamiltonian(h: &QuadraticHamiltonian, kahler: &KahlerStructure) -> Result<LieGenerator> {
    if h.statistics() != kahler.statistics() {
        return Err(Error::StatisticsMismatch);
    }
    check_square(h.matrix(), kahler.dim())?;
    let k = match kahler.statistics() {
        Statistics::Boson => kahler.omega() * h.matrix(),
        Statistics::Fermion => kahler.g_metric() * h.matrix(),
    };
    LieGenerator::new(k, kahler)
}

pub fn hamiltonian_from_generator(k: &LieGenerator, kahler: &KahlerStructure) -> QuadraticHamiltonian {
    let h = match kahler.statistics() {
        Statistics::Boson => {
            let h = kahler.omega_inv() * k.matrix();
            (&h + h.transpose()) * 0.5
        }
        Statistics::Fermion => {
            let h = kahler.g_inv() * k.matrix();
            (&h - h.transpose()) * 0.5
        }
    };
    QuadraticHamiltonian { h, statistics: kahler.statistics() }
}

/// Seeded random generator built from a Gaussian h, plus its spectral radius.
pub fn random_generator(n_modes: usize, statistics: Statistics, seed: u64, scale: f64) -> (LieGenerator, f64) {
    assert!(scale > 0.0, "scale must be positive");
    let kahler = KahlerStructure::standard(n_modes, statistics);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 2 * n_modes;
    let raw = Mat::from_fn(dim, dim, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        x * scale
    });
    let h = match statistics {
        Statistics::Boson => (&raw + raw.transpose()) * 0.5,
        Statistics::Fermion => (&raw - raw.transpose()) * 0.5,
    };
    let k = match statistics {
        Statistics::Boson => kahler.omega() * h,
        Statistics::Fermion => h,
    };
    let radius = linalg::spectral_radius(&k);
    (LieGenerator::trusted(k, statistics), radius)
}

/// Expresses K in the frame where J and the kinematic form are standard.
pub fn to_standard_frame(k: &Mat, kahler: &KahlerStructure) -> Result<Mat> {
    if kahler.is_standard_j() && kahler.same_reference(&KahlerStructure::standard(kahler.n_modes(), kahler.statistics())) {
        return Ok(k.clone());
    }
    let (s, si) = kahler.standardizer();
    let form = si * kahler.kinematic_form() * si.transpose();
    let target = KahlerStructure::standard(kahler.n_modes(), kahler.statistics());
    let dev = linalg::rel_dev(&form, target.kinematic_form());
    if dev > 1e-8 {
        return Err(Error::Invariant { what: "reference brought to standard form", deviation: dev });
    }
    Ok(si * k * s)
}

/// Δ_M = −M J M⁻¹ J.
pub fn relative_complex_structure(m: &GroupElement, kahler: &KahlerStructure) -> Mat {
    let minv = m.inverse(kahler);
    -(m.matrix() * kahler.j() * minv.matrix() * kahler.j())
}

/// One-mode element R(τ) exp(−ρ/2 (cos θ X + sin θ Y)), with X = σ_x, Y = σ_z and
/// R(τ) = exp(τ J_std). Its inverse has relative structure cosh ρ + sinh ρ (sin θ σ_z + cos θ σ_x).
pub fn one_mode_element(rho: f64, theta: f64, tau: f64) -> Mat {
    let (ch, sh) = ((rho / 2.0).cosh(), (rho / 2.0).sinh());
    let (c, s) = (theta.cos(), theta.sin());
    let squeeze = Mat::from_row_slice(2, 2, &[ch - s * sh, -c * sh, -c * sh, ch + s * sh]);
    let rotation = Mat::from_row_slice(2, 2, &[tau.cos(), tau.sin(), -tau.sin(), tau.cos()]);
    rotation * squeeze
}
