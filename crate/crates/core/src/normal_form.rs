//! Real symplectic normal form of bosonic generators.
//!
//! `K = S k_normal S⁻¹` with `S` symplectic for the standard form Ω and
//! `k_normal` a direct sum of model blocks `[[O_I, O_R], [O_L, −O_Iᵀ]]`:
//!
//! | class | spectrum      | chain structure                       |
//! |-------|---------------|---------------------------------------|
//! | 1     | ±μ            | lower Jordan block on the q side      |
//! | 2     | ±μ ± iν       | real 2×2 Jordan blocks on the q side  |
//! | 3     | 0             | one self-dual chain, D even           |
//! | 4     | 0             | two dual chains, D odd                |
//! | 5     | ±iν           | one chain, D even                     |
//! | 6     | ±iν           | one chain, D odd                      |
//!
//! Signs σ of classes 3, 5 and 6 are the sign of the top pairing
//! `ω(x, N^{D−1}x)` (class 3) or `−iω(x̄, N^{D−1}x)` (classes 5, 6) of a
//! generating vector `x` normalized so that all lower pairings vanish; the
//! model block with the same normalized top pairing fixes σ.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::complexify;
use crate::error::{Error, Result};
use crate::linalg::{self, c, inverse, inverse_c, real_part, to_complex_mat, CMat, CVec, Mat, I};
use crate::phase_space::{standard_block, LieGenerator, Statistics};

/// Relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-8;
/// Relative single-linkage radius used to collect perturbed Jordan blocks.
pub const CLUSTER_TOL: f64 = 2e-3;
/// Relative radius below which clustered eigenvalues are treated as one.
pub const FINE_CLUSTER_TOL: f64 = 1e-7;
/// Largest admissible condition number of the generalized eigenbasis.
pub const MAX_CONDITION: f64 = 1e8;
/// Target for the minimum branch-cut distance after class-3 rescaling.
pub const CERTIFICATE_MARGIN: f64 = 0.1;
/// Grid size used by the continuity certificate.
pub const CERTIFICATE_POINTS: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct BlockDescriptor {
    pub class_c: u8,
    pub eigenvalue: Complex64,
    pub jordan_dim: usize,
    pub sigma: i8,
    /// Mode indices `[start, end)` occupied by the block.
    pub index_range: (usize, usize),
    /// Class-3 rescaling factor applied to the block (1 otherwise).
    pub epsilon: f64,
}

impl BlockDescriptor {
    pub fn modes(&self) -> usize {
        block_modes(self.class_c, self.jordan_dim)
    }

    /// Model matrix of the block in local `(q₁…qₙ, p₁…pₙ)` coordinates.
    pub fn model(&self) -> Mat {
        let t = model_block(self.class_c, self.eigenvalue, self.jordan_dim, self.sigma);
        // class-3 blocks are nilpotent, so rescaling multiplies the whole block
        if self.class_c == 3 {
            t * self.epsilon
        } else {
            t
        }
    }

    /// Semisimple imaginary part of the model block.
    pub fn imaginary_part(&self) -> Mat {
        let n = self.modes();
        let nu = self.eigenvalue.im;
        let s = self.sigma as f64;
        let mut oi = Mat::zeros(n, n);
        let mut or = Mat::zeros(n, n);
        let mut ol = Mat::zeros(n, n);
        match self.class_c {
            2 => {
                for b in 0..self.jordan_dim {
                    oi[(2 * b, 2 * b + 1)] = nu;
                    oi[(2 * b + 1, 2 * b)] = -nu;
                }
            }
            5 => {
                for r in 0..n {
                    or[(r, n - 1 - r)] = s * nu;
                    ol[(r, n - 1 - r)] = -s * nu;
                }
            }
            6 => {
                for r in 0..n {
                    let v = s * sign(r) * nu;
                    or[(r, n - 1 - r)] = v;
                    ol[(r, n - 1 - r)] = -v;
                }
            }
            _ => {}
        }
        let oit = -oi.transpose();
        linalg::block2(&oi, &or, &ol, &oit)
    }
}

/// Direct sum of mode blocks, each in its own (q…, p…) ordering.
pub fn direct_sum(parts: &[Mat]) -> Mat {
    let modes: usize = parts.iter().map(|p| p.nrows() / 2).sum();
    let mut out = Mat::zeros(2 * modes, 2 * modes);
    let mut start = 0;
    for p in parts {
        let m = p.nrows() / 2;
        let g = |i: usize| if i < m { start + i } else { modes + start + i - m };
        for i in 0..2 * m {
            for j in 0..2 * m {
                out[(g(i), g(j))] = p[(i, j)];
            }
        }
        start += m;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalFormResult {
    pub s: Mat,
    pub blocks: Vec<BlockDescriptor>,
    pub k_normal: Mat,
}

impl NormalFormResult {
    pub fn s_inv(&self) -> Mat {
        let n = self.s.nrows() / 2;
        let omega = standard_block(n);
        // S⁻¹ = Ω Sᵀ Ω⁻¹ for symplectic S
        -&omega * self.s.transpose() * &omega
    }

    /// Direct sum of the model blocks in the global mode ordering.
    pub fn assembled(&self) -> Mat {
        self.embed(|b| b.model())
    }

    /// Semisimple imaginary part in the normal-form basis.
    pub fn imaginary_part(&self) -> Mat {
        self.embed(|b| b.imaginary_part())
    }

    pub fn has_class(&self, class_c: u8) -> bool {
        self.blocks.iter().any(|b| b.class_c == class_c)
    }

    fn embed(&self, f: impl Fn(&BlockDescriptor) -> Mat) -> Mat {
        let n = self.s.nrows() / 2;
        let mut out = Mat::zeros(2 * n, 2 * n);
        for b in &self.blocks {
            let local = f(b);
            let (start, end) = b.index_range;
            let m = end - start;
            let global = |i: usize| if i < m { start + i } else { n + start + i - m };
            for i in 0..2 * m {
                for j in 0..2 * m {
                    out[(global(i), global(j))] = local[(i, j)];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ChevalleySplit {
    pub k_imag: Mat,
    pub k_rest: Mat,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    /// Smallest distance of an eigenvalue of C to the cut (−∞, 0].
    pub min_cut_distance: f64,
    /// Number of eigenvalue passages through the negative real axis.
    pub crossings: usize,
    /// Whether every crossing step had an even number of passages.
    pub paired: bool,
    /// Whether the class-3 rescaling should be tightened.
    pub shrink_epsilon: bool,
}

fn sign(r: usize) -> f64 {
    if r.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub fn block_modes(class_c: u8, jordan_dim: usize) -> usize {
    match class_c {
        2 => 2 * jordan_dim,
        3 => jordan_dim / 2,
        _ => jordan_dim,
    }
}

/// Unscaled model block of the given class in local coordinates.
pub fn model_block(class_c: u8, eigenvalue: Complex64, jordan_dim: usize, sigma: i8) -> Mat {
    let n = block_modes(class_c, jordan_dim);
    let (mu, nu) = (eigenvalue.re, eigenvalue.im);
    let s = sigma as f64;
    let mut oi = Mat::zeros(n, n);
    let mut or = Mat::zeros(n, n);
    let mut ol = Mat::zeros(n, n);
    match class_c {
        1 => {
            for i in 0..n {
                oi[(i, i)] = mu;
                if i + 1 < n {
                    oi[(i + 1, i)] = 1.0;
                }
            }
        }
        2 => {
            for b in 0..jordan_dim {
                let r = 2 * b;
                oi[(r, r)] = mu;
                oi[(r + 1, r + 1)] = mu;
                oi[(r, r + 1)] = nu;
                oi[(r + 1, r)] = -nu;
                if b + 1 < jordan_dim {
                    oi[(r + 2, r)] = 1.0;
                    oi[(r + 3, r + 1)] = 1.0;
                }
            }
        }
        3 => {
            for i in 0..n.saturating_sub(1) {
                oi[(i + 1, i)] = s;
            }
            ol[(n - 1, n - 1)] = s * sign(n);
        }
        4 => {
            for i in 0..n.saturating_sub(1) {
                oi[(i + 1, i)] = 1.0;
            }
        }
        5 => {
            for r in 0..n {
                or[(r, n - 1 - r)] += s * nu;
                ol[(r, n - 1 - r)] -= s * nu;
            }
            for r in 1..n {
                or[(r, n - r)] += s * sign(r + 1);
            }
            for r in 0..n.saturating_sub(1) {
                ol[(r, n - 2 - r)] += s * sign(r + 1);
            }
        }
        6 => {
            for i in 0..n.saturating_sub(1) {
                oi[(i + 1, i)] = 1.0;
            }
            for r in 0..n {
                let v = s * sign(r) * nu;
                or[(r, n - 1 - r)] = v;
                ol[(r, n - 1 - r)] = -v;
            }
        }
        _ => panic!("block class {class_c} out of range"),
    }
    let oit = -oi.transpose();
    linalg::block2(&oi, &or, &ol, &oit)
}

// ---------------------------------------------------------------------------
// spectral clustering

struct Cluster {
    center: Complex64,
    size: usize,
}

fn single_linkage(values: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= radius {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut label, i);
        if index_of[r] == usize::MAX {
            index_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index_of[r]].push(i);
    }
    groups
}

fn power(m: &CMat, k: usize) -> CMat {
    let mut out = CMat::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

fn shifted(k: &CMat, center: Complex64) -> CMat {
    let mut out = k.clone();
    for i in 0..k.nrows() {
        out[(i, i)] -= center;
    }
    out
}

/// Orthonormal basis of the generalized eigenspace of dimension `size`.
fn generalized_eigenspace(k: &CMat, center: Complex64, size: usize) -> CMat {
    let p = power(&shifted(k, center), size);
    linalg::smallest_singular_subspace(&p, size).0
}

fn is_nilpotent_on(k: &CMat, center: Complex64, size: usize, scale: f64) -> bool {
    let v = generalized_eigenspace(k, center, size);
    let local = v.adjoint() * shifted(k, center) * &v;
    power(&local, size).norm() <= 1e-9 * scale.powi(size as i32)
}

fn clusters(k: &CMat, scale: f64) -> Vec<Cluster> {
    let values = linalg::eigenvalues_c(k);
    let mut out = Vec::new();
    for group in single_linkage(&values, CLUSTER_TOL * scale) {
        let mean = |g: &[usize]| g.iter().map(|&i| values[i]).sum::<Complex64>() / g.len() as f64;
        let center = mean(&group);
        if group.len() == 1 || is_nilpotent_on(k, center, group.len(), scale) {
            out.push(Cluster { center, size: group.len() });
            continue;
        }
        let sub: Vec<Complex64> = group.iter().map(|&i| values[i]).collect();
        for fine in single_linkage(&sub, FINE_CLUSTER_TOL * scale) {
            let center = fine.iter().map(|&i| sub[i]).sum::<Complex64>() / fine.len() as f64;
            out.push(Cluster { center, size: fine.len() });
        }
    }
    out
}

fn scale_of(k: &Mat) -> f64 {
    k.norm().max(1e-300)
}

// ---------------------------------------------------------------------------
// Jordan–Chevalley

pub fn jordan_chevalley(k: &LieGenerator) -> Result<ChevalleySplit> {
    if k.statistics() != Statistics::Boson {
        return Err(Error::StatisticsMismatch);
    }
    let km = k.matrix();
    let dim = km.nrows();
    if km.norm() == 0.0 {
        return Ok(ChevalleySplit { k_imag: Mat::zeros(dim, dim), k_rest: Mat::zeros(dim, dim) });
    }
    let kc = to_complex_mat(km);
    let scale = scale_of(km);
    let mut basis = CMat::zeros(dim, dim);
    let mut diag = Vec::with_capacity(dim);
    let mut col = 0;
    for cl in clusters(&kc, scale) {
        let v = generalized_eigenspace(&kc, cl.center, cl.size);
        basis.view_mut((0, col), (dim, cl.size)).copy_from(&v);
        diag.extend(std::iter::repeat_n(c(0.0, cl.center.im), cl.size));
        col += cl.size;
    }
    let condition = linalg::condition_number(&basis);
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let inv = inverse_c(&basis).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    let d = CMat::from_diagonal(&CVec::from_vec(diag));
    let ki = &basis * d * inv;
    let imag = linalg::imag_part(&ki).norm();
    if imag > 1e-9 * scale.max(1.0) {
        return Err(Error::Invariant { what: "imaginary part of K_I", deviation: imag });
    }
    let k_imag = real_part(&ki);
    let k_rest = km - &k_imag;
    Ok(ChevalleySplit { k_imag, k_rest })
}

// ---------------------------------------------------------------------------
// generic linear algebra over ℝ or ℂ

fn g_svd_ascending<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let n = m.ncols();
    let mut square = DMatrix::<T>::zeros(m.nrows().max(n), n);
    square.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = square.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::<T>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            v[(r, col)] = vt[(i, r)].clone().conjugate();
        }
    }
    (values, v)
}

fn g_null<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: f64) -> DMatrix<T> {
    let (values, v) = g_svd_ascending(m);
    let k = values.iter().take_while(|&&s| s <= tol).count();
    v.columns(0, k).into_owned()
}

fn g_orth<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, tol: f64) -> DMatrix<T> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let mut cols: Vec<(f64, usize)> =
        svd.singular_values.iter().enumerate().filter(|(_, &s)| s > tol).map(|(i, &s)| (s, i)).collect();
    cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut out = DMatrix::<T>::zeros(m.nrows(), cols.len());
    for (j, &(_, i)) in cols.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

fn g_power<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    let mut out = DMatrix::<T>::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Jordan chains `[g, Ng, N²g, …]` of a nilpotent operator, longest first.
fn jordan_chains<T: ComplexField<RealField = f64>>(n: &DMatrix<T>) -> Result<Vec<Vec<DVector<T>>>> {
    let d = n.nrows();
    let tol = RANK_TOL * n.norm().max(1.0);
    let mut kernels: Vec<DMatrix<T>> = vec![DMatrix::zeros(d, 0)];
    let mut index = 0;
    while kernels[index].ncols() < d {
        index += 1;
        if index > d {
            return Err(Error::NormalForm("operator is not nilpotent at tolerance".into()));
        }
        let p = g_power(n, index);
        kernels.push(g_null(&p, tol * p.norm().max(1.0)));
    }
    let mut chains: Vec<Vec<DVector<T>>> = Vec::new();
    for len in (1..=index).rev() {
        let kernel = &kernels[len];
        let mut excluded: Vec<DVector<T>> = kernels[len - 1].column_iter().map(|c| c.into_owned()).collect();
        for ch in &chains {
            let depth = ch.len() - len;
            excluded.extend(ch[depth..].iter().cloned());
        }
        let e = if excluded.is_empty() { DMatrix::zeros(d, 0) } else { DMatrix::from_columns(&excluded) };
        let e = g_orth(&e, 1e-10);
        let residual = kernel - &e * (e.adjoint() * kernel);
        let fresh = g_orth(&residual, 1e-6);
        for g in fresh.column_iter() {
            let mut chain = vec![g.into_owned()];
            for _ in 1..len {
                let next = n * chain.last().unwrap();
                chain.push(next);
            }
            chains.push(chain);
        }
    }
    let total: usize = chains.iter().map(Vec::len).sum();
    if total != d {
        return Err(Error::NormalForm(format!("Jordan chains cover {total} of {d} dimensions")));
    }
    Ok(chains)
}

// ---------------------------------------------------------------------------
// pairings and chain normalization

#[derive(Clone, Copy, PartialEq)]
enum Pairing {
    Bilinear,
    Sesquilinear,
}

struct Ambient {
    omega: CMat,
    pairing: Pairing,
}

impl Ambient {
    fn new(modes: usize, pairing: Pairing) -> Self {
        // ω = Ω⁻¹ = −Ω for the standard form
        Ambient { omega: to_complex_mat(&(-standard_block(modes))), pairing }
    }

    fn pair(&self, u: &CVec, v: &CVec) -> Complex64 {
        match self.pairing {
            Pairing::Bilinear => (u.transpose() * &self.omega * v)[0],
            Pairing::Sesquilinear => -I * (u.adjoint() * &self.omega * v)[0],
        }
    }

    fn form(&self, left: &CMat, right: &CMat) -> CMat {
        match self.pairing {
            Pairing::Bilinear => left.transpose() * &self.omega * right,
            Pairing::Sesquilinear => (left.adjoint() * &self.omega * right) * (-I),
        }
    }
}

fn chain_of(n: &CMat, x: &CVec, len: usize) -> Vec<CVec> {
    let mut out = vec![x.clone()];
    for _ in 1..len {
        let next = n * out.last().unwrap();
        out.push(next);
    }
    out
}

fn nilpotency_index(n: &CMat, basis: &CMat, scale: f64) -> usize {
    let local = basis.adjoint() * n * basis;
    let d = local.nrows();
    let mut p = CMat::identity(d, d);
    for k in 1..=d {
        p = &p * &local;
        if p.norm() <= 1e-9 * scale.powi(k as i32).max(1e-300) {
            return k;
        }
    }
    d
}

enum Generator {
    Single { x: CVec, top: Complex64 },
    Pair { x: CVec, y: CVec },
}

/// Picks a generator of a longest chain in span(basis) with nonzero top pairing.
fn pick_generator(n: &CMat, basis: &CMat, len: usize, amb: &Ambient) -> Generator {
    let top = amb.form(basis, &(power(n, len - 1) * basis));
    match amb.pairing {
        Pairing::Bilinear if len % 2 == 1 => {
            let t = real_part(&top);
            let svd = t.svd(true, true);
            let i = svd.singular_values.imax();
            let u = svd.u.unwrap().column(i).into_owned();
            let v = svd.v_t.unwrap().row(i).transpose();
            Generator::Pair { x: basis * to_complex_vec(&u), y: basis * to_complex_vec(&v) }
        }
        Pairing::Bilinear => {
            let (vals, vecs) = linalg::sym_eigen(&real_part(&top));
            let i = argmax_abs(&vals);
            let x = basis * to_complex_vec(&vecs.column(i).into_owned());
            Generator::Single { top: amb.pair(&x, &(power(n, len - 1) * &x)), x }
        }
        Pairing::Sesquilinear => {
            // top is Hermitian for odd length and anti-Hermitian otherwise
            let h = if len % 2 == 1 { top.clone() } else { &top * I };
            let h = (&h + h.adjoint()) * c(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
            let i = argmax_abs(&vals);
            let x = basis * eig.eigenvectors.column(i).into_owned();
            Generator::Single { top: amb.pair(&x, &(power(n, len - 1) * &x)), x }
        }
    }
}

fn argmax_abs(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if v.abs() > vals[best].abs() {
            best = i;
        }
    }
    best
}

fn to_complex_vec(v: &DVector<f64>) -> CVec {
    v.map(|x| c(x, 0.0))
}

/// Makes all pairings below the top vanish and scales the top to unit modulus.
fn normalize_single(n: &CMat, mut x: CVec, len: usize, amb: &Ambient) -> (CVec, Complex64) {
    let top = amb.pair(&x, &(power(n, len - 1) * &x));
    for k in (0..len.saturating_sub(1)).rev() {
        let ch = chain_of(n, &x, len);
        let ck = amb.pair(&x, &ch[k]);
        let alpha = -ck / (top * 2.0);
        x += &ch[len - 1 - k] * alpha;
    }
    let top = amb.pair(&x, &(power(n, len - 1) * &x));
    x /= c(top.norm().sqrt(), 0.0);
    (x, top / top.norm())
}

/// Normalizes a dual pair so that the only nonzero pairing is ω(x, N^{len−1}y) = −1.
fn normalize_pair(n: &CMat, mut x: CVec, mut y: CVec, len: usize, amb: &Ambient) -> (CVec, CVec) {
    let top = amb.pair(&x, &(power(n, len - 1) * &y));
    for k in (0..len - 1).rev() {
        let j = len - 1 - k;
        let ck = amb.pair(&y, &(power(n, k) * &y));
        y += power(n, j) * &x * (ck / (top * 2.0));
    }
    for k in (0..len - 1).rev() {
        let j = len - 1 - k;
        let ak = amb.pair(&x, &(power(n, k) * &x));
        x += power(n, j) * &y * (-ak / (top * 2.0));
    }
    for k in (0..len - 1).rev() {
        let j = len - 1 - k;
        let dk = amb.pair(&x, &(power(n, k) * &y));
        y += power(n, j) * &y * (-dk / top);
    }
    let top = amb.pair(&x, &(power(n, len - 1) * &y));
    y *= -1.0 / top;
    (x, y)
}

fn columns(vs: &[CVec]) -> CMat {
    CMat::from_columns(vs)
}

fn realify(basis: &CMat, dim: usize) -> CMat {
    let mut both = Mat::zeros(basis.nrows(), 2 * basis.ncols());
    both.view_mut((0, 0), (basis.nrows(), basis.ncols())).copy_from(&real_part(basis));
    both.view_mut((0, basis.ncols()), (basis.nrows(), basis.ncols())).copy_from(&linalg::imag_part(basis));
    let o = g_orth(&both, 0.0);
    to_complex_mat(&o.columns(0, dim).into_owned())
}

// ---------------------------------------------------------------------------
// block extraction

struct RawBlock {
    class_c: u8,
    eigenvalue: Complex64,
    jordan_dim: usize,
    sigma: i8,
    /// Real 2N × 2n columns (q part then p part).
    columns: Mat,
}

/// Chain data of the model block for a given class and sign.
fn model_chains(class_c: u8, eigenvalue: Complex64, len: usize, sigma: i8) -> (CMat, Complex64) {
    let model = to_complex_mat(&model_block(class_c, eigenvalue, len, sigma));
    let modes = model.nrows() / 2;
    let n = shifted(&model, eigenvalue);
    match class_c {
        3 => {
            let amb = Ambient::new(modes, Pairing::Bilinear);
            let basis = CMat::identity(2 * modes, 2 * modes);
            let Generator::Single { x, .. } = pick_generator(&n, &basis, len, &amb) else { unreachable!() };
            let (x, top) = normalize_single(&n, x, len, &amb);
            (columns(&chain_of(&n, &x, len)), top)
        }
        4 => {
            let amb = Ambient::new(modes, Pairing::Bilinear);
            let basis = CMat::identity(2 * modes, 2 * modes);
            let Generator::Pair { x, y } = pick_generator(&n, &basis, len, &amb) else { unreachable!() };
            let (x, y) = normalize_pair(&n, x, y, len, &amb);
            let mut all = chain_of(&n, &x, len);
            all.extend(chain_of(&n, &y, len));
            (columns(&all), c(-1.0, 0.0))
        }
        _ => {
            let amb = Ambient::new(modes, Pairing::Sesquilinear);
            let basis = generalized_eigenspace(&model, eigenvalue, len);
            let Generator::Single { x, .. } = pick_generator(&n, &basis, len, &amb) else { unreachable!() };
            let (x, top) = normalize_single(&n, x, len, &amb);
            let chain = chain_of(&n, &x, len);
            let mut all = chain.clone();
            all.extend(chain.iter().map(|v| v.conjugate()));
            (columns(&all), top)
        }
    }
}

fn match_sigma(class_c: u8, eigenvalue: Complex64, len: usize, top: Complex64) -> Result<(i8, CMat)> {
    for sigma in [1i8, -1] {
        let (chains, model_top) = model_chains(class_c, eigenvalue, len, sigma);
        if (model_top - top).norm() < 0.5 {
            return Ok((sigma, chains));
        }
    }
    Err(Error::NormalForm(format!("no model sign matches top pairing {top} for class {class_c}")))
}

/// Extracts classes 3/4 (zero eigenvalue) or 5/6 (eigenvalue iν) from a generalized eigenspace.
fn extract_paired(k: &CMat, eigenvalue: Complex64, space: CMat, scale: f64) -> Result<Vec<RawBlock>> {
    let modes = k.nrows() / 2;
    let zero = eigenvalue.norm() == 0.0;
    let amb = Ambient::new(modes, if zero { Pairing::Bilinear } else { Pairing::Sesquilinear });
    let n = shifted(k, eigenvalue);
    let mut basis = space;
    let mut out = Vec::new();
    while basis.ncols() > 0 {
        let len = nilpotency_index(&n, &basis, scale);
        let (actual, model, class_c, sigma) = match pick_generator(&n, &basis, len, &amb) {
            Generator::Pair { x, y } => {
                let (x, y) = normalize_pair(&n, x, y, len, &amb);
                let mut all = chain_of(&n, &x, len);
                all.extend(chain_of(&n, &y, len));
                let (model, _) = model_chains(4, eigenvalue, len, 1);
                (columns(&all), model, 4, 1)
            }
            Generator::Single { x, top } => {
                if top.norm() < 1e-12 * scale.powi(len as i32 - 1).max(1e-300) {
                    return Err(Error::NormalForm("degenerate top pairing".into()));
                }
                let (x, top) = normalize_single(&n, x, len, &amb);
                let chain = chain_of(&n, &x, len);
                let class_c = match (zero, len % 2) {
                    (true, _) => 3,
                    (false, 0) => 5,
                    (false, _) => 6,
                };
                let (sigma, model) = match_sigma(class_c, eigenvalue, len, top)?;
                let mut all = chain.clone();
                if !zero {
                    all.extend(chain.iter().map(|v| v.conjugate()));
                }
                (columns(&all), model, class_c, sigma)
            }
        };
        let model_inv = inverse_c(&model).ok_or_else(|| Error::NormalForm("singular model chain".into()))?;
        let columns = real_part(&(&actual * model_inv));
        // the chain space (complex part only for classes 5/6) is removed by orthogonality
        let own = if zero { actual.clone() } else { actual.columns(0, len).into_owned() };
        let f = amb.form(&own, &basis);
        let keep = basis.ncols() - own.ncols();
        let z = linalg::smallest_singular_subspace(&f, keep).0;
        basis = &basis * z;
        if zero && basis.ncols() > 0 {
            basis = realify(&basis, keep);
        }
        out.push(RawBlock { class_c, eigenvalue, jordan_dim: len, sigma, columns });
    }
    Ok(out)
}

/// Classes 1/2: Jordan chains on the expanding space and the dual basis on the contracting one.
fn extract_hyperbolic(k: &CMat, cl: &Cluster) -> Result<Vec<RawBlock>> {
    let modes = k.nrows() / 2;
    let real = cl.center.im == 0.0;
    let lambda = cl.center;
    let partner = c(-lambda.re, lambda.im);
    let omega = -standard_block(modes);
    let mut q_cols: Vec<DVector<f64>> = Vec::new();
    let mut dims = Vec::new();
    let contracting;
    if real {
        let expanding = real_part(&realify(&generalized_eigenspace(k, lambda, cl.size), cl.size));
        let local = expanding.transpose() * real_part(&shifted(k, lambda)) * &expanding;
        for chain in jordan_chains(&local)? {
            dims.push(chain.len());
            q_cols.extend(chain.iter().map(|v| &expanding * v));
        }
        contracting = real_part(&realify(&generalized_eigenspace(k, partner, cl.size), cl.size));
    } else {
        let expanding = generalized_eigenspace(k, lambda, cl.size);
        let local = expanding.adjoint() * shifted(k, lambda) * &expanding;
        for chain in jordan_chains(&local)? {
            dims.push(chain.len());
            for v in &chain {
                let z = &expanding * v;
                q_cols.push(z.map(|x| x.re));
                q_cols.push(z.map(|x| x.im));
            }
        }
        contracting = real_part(&realify(&generalized_eigenspace(k, partner, cl.size), 2 * cl.size));
    }
    let q = Mat::from_columns(&q_cols);
    let gram = q.transpose() * &omega * &contracting;
    let p = -(&contracting * inverse(&gram).ok_or_else(|| Error::NormalForm("expanding/contracting pairing singular".into()))?);
    let mut out = Vec::new();
    let mut offset = 0;
    for d in dims {
        let width = if real { d } else { 2 * d };
        let mut columns = Mat::zeros(2 * modes, 2 * width);
        columns.view_mut((0, 0), (2 * modes, width)).copy_from(&q.columns(offset, width));
        columns.view_mut((0, width), (2 * modes, width)).copy_from(&p.columns(offset, width));
        offset += width;
        out.push(RawBlock {
            class_c: if real { 1 } else { 2 },
            eigenvalue: if real { c(lambda.re, 0.0) } else { lambda },
            jordan_dim: d,
            sigma: 1,
            columns,
        });
    }
    Ok(out)
}

pub fn symplectic_normal_form(k: &LieGenerator) -> Result<NormalFormResult> {
    if k.statistics() != Statistics::Boson {
        return Err(Error::StatisticsMismatch);
    }
    let km = k.matrix();
    let dim = km.nrows();
    let modes = dim / 2;
    if km.norm() == 0.0 {
        let blocks = (0..modes)
            .map(|i| BlockDescriptor {
                class_c: 4,
                eigenvalue: c(0.0, 0.0),
                jordan_dim: 1,
                sigma: 1,
                index_range: (i, i + 1),
                epsilon: 1.0,
            })
            .collect();
        return Ok(NormalFormResult { s: Mat::identity(dim, dim), blocks, k_normal: Mat::zeros(dim, dim) });
    }
    let scale = scale_of(km);
    let kc = to_complex_mat(km);
    let tol = CLUSTER_TOL * scale;
    let all = clusters(&kc, scale);
    let mut raw = Vec::new();
    let zero_size: usize = all.iter().filter(|cl| cl.center.norm() <= tol).map(|cl| cl.size).sum();
    if zero_size > 0 {
        let space = realify(&generalized_eigenspace(&kc, c(0.0, 0.0), zero_size), zero_size);
        raw.extend(extract_paired(&kc, c(0.0, 0.0), space, scale)?);
    }
    for cl in all.iter().filter(|cl| cl.center.norm() > tol) {
        let (re, im) = (cl.center.re, cl.center.im);
        if re.abs() <= tol && im > 0.0 {
            let lambda = c(0.0, im);
            let space = generalized_eigenspace(&kc, lambda, cl.size);
            raw.extend(extract_paired(&kc, lambda, space, scale)?);
        } else if re > tol && im.abs() <= tol {
            raw.extend(extract_hyperbolic(&kc, &Cluster { center: c(re, 0.0), size: cl.size })?);
        } else if re > tol && im > 0.0 {
            raw.extend(extract_hyperbolic(&kc, &Cluster { center: cl.center, size: cl.size })?);
        }
    }
    assemble(km, raw)
}

fn assemble(km: &Mat, raw: Vec<RawBlock>) -> Result<NormalFormResult> {
    let dim = km.nrows();
    let modes = dim / 2;
    let total: usize = raw.iter().map(|b| b.columns.ncols()).sum();
    if total != dim {
        return Err(Error::NormalForm(format!("blocks cover {total} of {dim} dimensions")));
    }
    let mut s = Mat::zeros(dim, dim);
    let mut blocks = Vec::new();
    let mut start = 0;
    for b in raw {
        let m = b.columns.ncols() / 2;
        s.view_mut((0, start), (dim, m)).copy_from(&b.columns.columns(0, m));
        s.view_mut((0, modes + start), (dim, m)).copy_from(&b.columns.columns(m, m));
        blocks.push(BlockDescriptor {
            class_c: b.class_c,
            eigenvalue: b.eigenvalue,
            jordan_dim: b.jordan_dim,
            sigma: b.sigma,
            index_range: (start, start + m),
            epsilon: 1.0,
        });
        start += m;
    }
    let omega = standard_block(modes);
    let defect = linalg::rel_dev(&(&s * &omega * s.transpose()), &omega);
    if !(defect < 1e-6) {
        return Err(Error::Invariant { what: "normal-form basis symplectic", deviation: defect });
    }
    let result = NormalFormResult { s, blocks, k_normal: Mat::zeros(dim, dim) };
    let k_normal = result.s_inv() * km * &result.s;
    let result = NormalFormResult { k_normal, ..result };
    let mismatch = (&result.k_normal - result.assembled()).norm() / km.norm().max(1.0);
    if !(mismatch < 1e-6) {
        return Err(Error::Invariant { what: "normal form matches model blocks", deviation: mismatch });
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// class-3 rescaling and continuity

/// Conjugates every class-3 block by diag(ε^{(D−1)/2},…,ε^{1/2}, ε^{−(D−1)/2},…,ε^{−1/2}).
pub fn rescale_c3_blocks(nf: &NormalFormResult, epsilon: f64) -> NormalFormResult {
    assert!(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0, 1]");
    let dim = nf.s.nrows();
    let modes = dim / 2;
    let mut x = Mat::identity(dim, dim);
    let mut blocks = nf.blocks.clone();
    for b in blocks.iter_mut().filter(|b| b.class_c == 3) {
        let d = b.jordan_dim as f64;
        for (i, mode) in (b.index_range.0..b.index_range.1).enumerate() {
            let a = (d + 1.0) / 2.0 - (i + 1) as f64;
            x[(mode, mode)] = epsilon.powf(a);
            x[(modes + mode, modes + mode)] = epsilon.powf(-a);
        }
        b.epsilon *= epsilon;
    }
    let x_inv = Mat::from_diagonal(&x.diagonal().map(|v| 1.0 / v));
    NormalFormResult { s: &nf.s * &x, blocks, k_normal: &x_inv * &nf.k_normal * &x }
}

fn cut_distance(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.norm()
    } else {
        z.im.abs()
    }
}

/// Sweeps C_{exp(tK′)} = ½(e^{tK′} − J̃e^{tK′}J̃) for t ∈ [0, 1].
pub fn continuity_certificate(k_rest: &Mat, j_tilde: &Mat) -> ContinuityReport {
    continuity_certificate_on(k_rest, j_tilde, CERTIFICATE_POINTS)
}

pub fn continuity_certificate_on(k_rest: &Mat, j_tilde: &Mat, points: usize) -> ContinuityReport {
    let mut min_cut_distance = f64::INFINITY;
    let mut crossings = 0;
    let mut paired = true;
    let mut previous: Option<Vec<Complex64>> = None;
    for step in 0..=points {
        let t = step as f64 / points as f64;
        let values = c_eigenvalues(&linalg::expm(&(k_rest * t)), j_tilde);
        for &z in &values {
            min_cut_distance = min_cut_distance.min(cut_distance(z));
        }
        if let Some(prev) = &previous {
            let here = passages(prev, &values);
            if here % 2 == 1 {
                paired = false;
            }
            crossings += here;
        }
        previous = Some(values);
    }
    ContinuityReport { min_cut_distance, crossings, paired, shrink_epsilon: min_cut_distance <= CERTIFICATE_MARGIN }
}

/// Eigenvalues of the complexification of ½(M − J̃MJ̃) with respect to J̃.
pub(crate) fn c_eigenvalues(m: &Mat, j_tilde: &Mat) -> Vec<Complex64> {
    let cm = complexify::c_part(m, j_tilde);
    let kahler_free = standardize_for(j_tilde, &cm);
    match complexify::to_complex(&kahler_free) {
        Ok(z) => z.eigenvalues(),
        Err(_) => Vec::new(),
    }
}

// Brings a matrix commuting with j into the frame where j is standard.
fn standardize_for(j: &Mat, m: &Mat) -> Mat {
    let n = j.nrows() / 2;
    let std = standard_block(n);
    if linalg::rel_dev(j, &std) < 1e-14 {
        return m.clone();
    }
    // columns (e, −je) over greedily chosen unit vectors e intertwine j with the standard form
    let mut basis = Mat::zeros(2 * n, 2 * n);
    let mut col = 0;
    let mut used = Mat::zeros(2 * n, 0);
    for i in 0..2 * n {
        if col == n {
            break;
        }
        let mut e = DVector::<f64>::zeros(2 * n);
        e[i] = 1.0;
        let je = j * &e;
        let candidate = Mat::from_columns(&[e.clone(), -je.clone()]);
        let mut trial = Mat::zeros(2 * n, used.ncols() + 2);
        trial.view_mut((0, 0), (2 * n, used.ncols())).copy_from(&used);
        trial.view_mut((0, used.ncols()), (2 * n, 2)).copy_from(&candidate);
        let sv = trial.clone().singular_values();
        if sv.min() > 1e-8 {
            basis.set_column(col, &e);
            basis.set_column(n + col, &(-je));
            used = trial;
            col += 1;
        }
    }
    let inv = inverse(&basis).expect("independent basis");
    inv * m * basis
}

fn passages(prev: &[Complex64], next: &[Complex64]) -> usize {
    // eigenvalues are matched greedily by proximity
    let mut used = vec![false; next.len()];
    let mut count = 0;
    for &a in prev {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, &b) in next.iter().enumerate() {
            if !used[i] && (a - b).norm() < best_d {
                best_d = (a - b).norm();
                best = Some(i);
            }
        }
        if let Some(i) = best {
            used[i] = true;
            let b = next[i];
            if a.re < 0.0 && b.re < 0.0 && a.im * b.im < 0.0 {
                count += 1;
            }
        }
    }
    count
}

/// Class-3 ε schedule: halve from 0.5 until the class-3 part of the certificate clears the margin.
pub fn auto_rescale(nf: &NormalFormResult) -> NormalFormResult {
    if !nf.has_class(3) {
        return nf.clone();
    }
    let mut epsilon = 0.5;
    loop {
        let candidate = rescale_c3_blocks(nf, epsilon);
        let k_rest = &candidate.k_normal - candidate.imaginary_part();
        let masked = class3_part(&candidate, &k_rest);
        let j = standard_block(nf.s.nrows() / 2);
        let report = continuity_certificate_on(&masked, &j, 200);
        if !report.shrink_epsilon || epsilon < 1e-12 {
            return candidate;
        }
        epsilon *= 0.5;
    }
}

fn class3_part(nf: &NormalFormResult, k: &Mat) -> Mat {
    let n = nf.s.nrows() / 2;
    let mut mask = vec![false; 2 * n];
    for b in nf.blocks.iter().filter(|b| b.class_c == 3) {
        for mode in b.index_range.0..b.index_range.1 {
            mask[mode] = true;
            mask[n + mode] = true;
        }
    }
    Mat::from_fn(2 * n, 2 * n, |i, j| if mask[i] && mask[j] { k[(i, j)] } else { 0.0 })
}
