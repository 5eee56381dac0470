//! Elements (M, ψ) of the metaplectic / spin double cover.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cartan::{is_interior, sqrt_and_half_log};
use crate::circle_cocycle::{circle, cocycle, BRANCH_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::phase_space::{GroupElement, KahlerStructure, Statistics};

/// Margin |det(1 + Δ)| required of every element after reference repair.
pub const REPAIR_MARGIN: f64 = 1e-6;
/// Scale of the block perturbation applied to J during repair.
pub const REPAIR_STEP: f64 = 0.3;
const REPAIR_ATTEMPTS: usize = 64;
const DRIFT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CoverElement {
    m: GroupElement,
    psi: Complex64,
    reference: KahlerStructure,
}

impl CoverElement {
    /// Validates ψ² = φ(M) against the reference.
    pub fn new(m: GroupElement, psi: Complex64, reference: KahlerStructure) -> Result<Self> {
        if m.statistics() != reference.statistics() {
            return Err(Error::StatisticsMismatch);
        }
        let phi = circle(&m, &reference)?.value();
        let dev = (psi * psi - phi).norm();
        if dev > 1e-9 || (psi.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant { what: "psi^2 = phi(M)", deviation: dev });
        }
        Ok(CoverElement { m, psi: psi / psi.norm(), reference })
    }

    pub(crate) fn trusted(m: GroupElement, psi: Complex64, reference: KahlerStructure) -> Self {
        CoverElement { m, psi: psi / psi.norm(), reference }
    }

    pub fn identity(reference: &KahlerStructure) -> Self {
        CoverElement { m: GroupElement::identity(reference), psi: Complex64::new(1.0, 0.0), reference: reference.clone() }
    }

    pub fn group_element(&self) -> &GroupElement {
        &self.m
    }
    pub fn matrix(&self) -> &Mat {
        self.m.matrix()
    }
    pub fn psi(&self) -> Complex64 {
        self.psi
    }
    pub fn reference(&self) -> &KahlerStructure {
        &self.reference
    }
    pub fn statistics(&self) -> Statistics {
        self.reference.statistics()
    }

    /// (M, −ψ): the other preimage of M.
    pub fn flipped(&self) -> Self {
        CoverElement { m: self.m.clone(), psi: -self.psi, reference: self.reference.clone() }
    }
}

/// ψ = sheet · √φ(M), principal root with arg φ ∈ (−π, π].
pub fn lift(m: &GroupElement, sheet: i8, kahler: &KahlerStructure) -> Result<CoverElement> {
    if sheet != 1 && sheet != -1 {
        return Err(Error::InvalidInput("sheet must be +1 or -1".into()));
    }
    let phi = circle(m, kahler)?.value();
    let half = 0.5 * linalg::arg_plus_pi(phi, BRANCH_TOL);
    Ok(CoverElement::trusted(m.clone(), Complex64::from_polar(sheet as f64, half), kahler.clone()))
}

/// (M₁M₂, ψ₁ψ₂ e^{iη(M₁,M₂)/2}).
pub fn multiply(a: &CoverElement, b: &CoverElement) -> Result<CoverElement> {
    if !a.reference.same_reference(&b.reference) {
        return Err(Error::ReferenceMismatch);
    }
    let kahler = &a.reference;
    let eta = cocycle(&a.m, &b.m, kahler)?;
    let mut m = a.m.compose(&b.m);
    if m.drift(kahler) > DRIFT_TOL {
        m = m.reprojected(kahler);
    }
    Ok(CoverElement::trusted(m, a.psi * b.psi * eta.half_phase(), kahler.clone()))
}

/// (M⁻¹, ψ*).
pub fn inverse(a: &CoverElement) -> CoverElement {
    CoverElement::trusted(a.m.inverse(&a.reference), a.psi.conj(), a.reference.clone())
}

/// The same cover element expressed relative to a different complex structure.
pub fn migrate_reference(a: &CoverElement, new_reference: &KahlerStructure) -> Result<CoverElement> {
    let old = &a.reference;
    check_target(old, new_reference)?;
    if old.same_reference(new_reference) {
        return Ok(a.clone());
    }
    let (t, tinv) = reference_change(old, new_reference)?;
    let stats = old.statistics();
    let t_el = GroupElement::trusted(t, stats);
    let tinv_el = GroupElement::trusted(tinv, stats);
    let e1 = cocycle(&tinv_el, &a.m, old)?;
    let e2 = cocycle(&tinv_el.compose(&a.m), &t_el, old)?;
    let psi = a.psi * Complex64::from_polar(1.0, 0.5 * (e1.eta + e2.eta));
    Ok(CoverElement::trusted(a.m.clone(), psi, new_reference.clone()))
}

/// Same migration with the alternative factor order e^{i(η(M,T) + η(T⁻¹, MT))/2}.
pub fn migrate_reference_alt(a: &CoverElement, new_reference: &KahlerStructure) -> Result<CoverElement> {
    let old = &a.reference;
    check_target(old, new_reference)?;
    let (t, tinv) = reference_change(old, new_reference)?;
    let stats = old.statistics();
    let t_el = GroupElement::trusted(t, stats);
    let tinv_el = GroupElement::trusted(tinv, stats);
    let e1 = cocycle(&a.m, &t_el, old)?;
    let e2 = cocycle(&tinv_el, &a.m.compose(&t_el), old)?;
    let psi = a.psi * Complex64::from_polar(1.0, 0.5 * (e1.eta + e2.eta));
    Ok(CoverElement::trusted(a.m.clone(), psi, new_reference.clone()))
}

fn check_target(old: &KahlerStructure, new: &KahlerStructure) -> Result<()> {
    if old.statistics() != new.statistics() || old.n_modes() != new.n_modes() {
        return Err(Error::InvalidTarget("statistics or mode count differ".into()));
    }
    if (old.kinematic_form() - new.kinematic_form()).norm() > 1e-10 {
        return Err(Error::InvalidTarget("kinematic form differs".into()));
    }
    Ok(())
}

/// T = √(−J̃J) and its inverse, so that T J T⁻¹ = J̃.
pub(crate) fn reference_change(old: &KahlerStructure, new: &KahlerStructure) -> Result<(Mat, Mat)> {
    let delta = -(new.j() * old.j());
    let (t, k) = sqrt_and_half_log(&delta, old).map_err(|e| match e {
        Error::FermionBoundary { determinant } => Error::DegeneratePair { determinant },
        other => other,
    })?;
    let tinv = linalg::expm(&(-k));
    Ok((t, tinv))
}

/// Finds a complex structure under which every element, every pairwise product
/// and every relative product M_i⁻¹M_j is interior, then migrates the elements to it.
pub fn repair_reference(elements: &[CoverElement], seed: u64) -> Result<(KahlerStructure, Vec<CoverElement>)> {
    let Some(first) = elements.first() else {
        return Err(Error::InvalidInput("no elements to repair".into()));
    };
    let reference = first.reference.clone();
    if reference.statistics() != Statistics::Fermion {
        return Err(Error::InvalidInput("reference repair applies to fermionic elements".into()));
    }
    if elements.iter().any(|e| !e.reference.same_reference(&reference)) {
        return Err(Error::ReferenceMismatch);
    }
    let required = required_set(elements, &reference);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = reference.clone();
    let mut path = vec![current.clone()];
    let mut best = min_margin(&required, &current);
    let mut attempts = 0;
    while best.0 < REPAIR_MARGIN {
        attempts += 1;
        if attempts > REPAIR_ATTEMPTS {
            return Err(Error::RepairFailed { attempts: REPAIR_ATTEMPTS, best_margin: best.0 });
        }
        let worst = &required[best.1];
        let mut candidates = Vec::new();
        if let Some(dj) = block_perturbation(worst, &current, &mut rng) {
            candidates.push(dj);
        }
        for _ in 0..4 {
            candidates.push(random_perturbation(&current, &mut rng));
        }
        let mut chosen: Option<(f64, KahlerStructure)> = None;
        for dj in candidates {
            let Ok(next) = perturbed_structure(&current, &dj) else { continue };
            let m = min_margin(&required, &next).0;
            if chosen.as_ref().is_none_or(|(b, _)| m > *b) {
                chosen = Some((m, next));
            }
        }
        let Some((_, next)) = chosen else { continue };
        current = next;
        path.push(current.clone());
        best = min_margin(&required, &current);
    }
    let migrated = elements
        .iter()
        .map(|e| migrate_along(e, &path))
        .collect::<Result<Vec<_>>>()?;
    Ok((current, migrated))
}

fn required_set(elements: &[CoverElement], kahler: &KahlerStructure) -> Vec<GroupElement> {
    let mut out: Vec<GroupElement> = elements.iter().map(|e| e.m.clone()).collect();
    for a in elements {
        for b in elements {
            out.push(a.m.compose(&b.m));
            out.push(a.m.inverse(kahler).compose(&b.m));
        }
    }
    out
}

/// (smallest margin, index of the element attaining it).
fn min_margin(required: &[GroupElement], kahler: &KahlerStructure) -> (f64, usize) {
    required
        .iter()
        .enumerate()
        .map(|(i, m)| (is_interior(m, kahler).1, i))
        .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc })
}

/// δJ = a·T_E on a 4-dimensional block of the (−1)-eigenspace of Δ_M, where T_E is a
/// complex structure on that block anticommuting with J.
fn block_perturbation(m: &GroupElement, kahler: &KahlerStructure, rng: &mut ChaCha8Rng) -> Option<Mat> {
    let (to_frame, from_frame) = metric_frame(kahler);
    let j = &to_frame * kahler.j() * &from_frame;
    let mm = &to_frame * m.matrix() * &from_frame;
    let minv = linalg::inverse(&mm)?;
    let delta = -(&mm * &j * minv * &j);
    let (vals, vecs) = linalg::sym_eigen(&((&delta + delta.transpose()) * 0.5));
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < -1.0 + 1e-3).collect();
    if cols.len() < 4 {
        return None;
    }
    let basis = Mat::from_fn(vals.len(), cols.len(), |r, c| vecs[(r, cols[c])]);
    let pick = |rng: &mut ChaCha8Rng| {
        let coeff = nalgebra::DVector::<f64>::from_fn(cols.len(), |_, _| rng.sample(StandardNormal));
        &basis * coeff
    };
    let e1 = normalize(pick(rng));
    let e3 = -(&j * &e1);
    let mut e2 = pick(rng);
    for v in [&e1, &e3] {
        let proj = v.dot(&e2);
        e2 -= v * proj;
    }
    let e2 = normalize(e2);
    let e4 = -(&j * &e2);
    let t_block = &e1 * e2.transpose() - &e2 * e1.transpose() + &e4 * e3.transpose() - &e3 * e4.transpose();
    Some(&from_frame * (t_block * REPAIR_STEP) * &to_frame)
}

/// Random J-anticommuting rotation direction: δJ = [X, J] for X antisymmetric.
fn random_perturbation(kahler: &KahlerStructure, rng: &mut ChaCha8Rng) -> Mat {
    let (to_frame, from_frame) = metric_frame(kahler);
    let j = &to_frame * kahler.j() * &from_frame;
    let dim = j.nrows();
    let raw = Mat::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = (&raw - raw.transpose()) * 0.5;
    let x = &x / x.norm().max(1e-300) * REPAIR_STEP;
    let dj = &x * &j - &j * &x;
    &from_frame * dj * &to_frame
}

fn perturbed_structure(kahler: &KahlerStructure, dj: &Mat) -> Result<KahlerStructure> {
    let (to_frame, from_frame) = metric_frame(kahler);
    let a = &to_frame * (kahler.j() + dj) * &from_frame;
    let a = (&a - a.transpose()) * 0.5;
    // polar projection back onto orthogonal complex structures
    let inv_sqrt = linalg::inverse(&linalg::sqrtm(&(a.transpose() * &a))?)
        .ok_or(Error::InvalidTarget("singular perturbation".into()))?;
    let jn = &a * inv_sqrt;
    let jn = (&jn - jn.transpose()) * 0.5;
    kahler.with_j(&(&from_frame * jn * &to_frame))
}

/// Frame in which the metric G is the identity: (L⁻¹, L) with G = L Lᵀ.
fn metric_frame(kahler: &KahlerStructure) -> (Mat, Mat) {
    let g = kahler.g_metric();
    let l = g.clone().cholesky().expect("metric positive definite").l();
    (linalg::inverse(&l).expect("invertible"), l)
}

fn normalize(v: nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let n = v.norm();
    v / n
}

fn migrate_along(e: &CoverElement, path: &[KahlerStructure]) -> Result<CoverElement> {
    let target = path.last().expect("non-empty path");
    if let Ok(direct) = migrate_reference(e, target) {
        return Ok(direct);
    }
    let mut cur = e.clone();
    for k in path.iter().skip(1) {
        cur = migrate_reference(&cur, k)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{random_generator, standard_kahler, LieGenerator};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn fermion_kplus(theta: f64, phi: f64) -> Mat {
        let (c, s) = (phi.cos(), phi.sin());
        Mat::from_row_slice(4, 4, &[0.0, c, 0.0, s, -c, 0.0, -s, 0.0, 0.0, s, 0.0, -c, -s, 0.0, c, 0.0]) * (theta / 2.0)
    }

    fn z_rotation(kahler: &KahlerStructure, t: f64) -> GroupElement {
        LieGenerator::new(kahler.j() * t, kahler).unwrap().exp()
    }

    #[test]
    fn center_elements() {
        let kahler = standard_kahler(1, Statistics::Boson);
        let id = GroupElement::identity(&kahler);
        let plus = lift(&id, 1, &kahler).unwrap();
        let minus = lift(&id, -1, &kahler).unwrap();
        assert_eq!(plus.psi(), Complex64::new(1.0, 0.0));
        assert_eq!(minus.psi(), Complex64::new(-1.0, 0.0));
        let sq = multiply(&minus, &minus).unwrap();
        assert!((sq.psi() - 1.0).norm() < 1e-15);
        assert!((inverse(&minus).psi() + 1.0).norm() < 1e-15);
    }

    #[test]
    fn rotation_lift_is_half_angle() {
        let kahler = standard_kahler(1, Statistics::Boson);
        for tau in [-3.0, -1.0, 0.5, 2.9, PI] {
            let m = z_rotation(&kahler, tau);
            let e = lift(&m, 1, &kahler).unwrap();
            assert!((e.psi() - Complex64::from_polar(1.0, tau / 2.0)).norm() < 1e-12, "tau {tau}");
        }
    }

    #[test]
    fn bosonic_rotation_needs_four_pi() {
        let kahler = standard_kahler(1, Statistics::Boson);
        let quarter = lift(&z_rotation(&kahler, PI / 2.0), 1, &kahler).unwrap();
        let mut acc = CoverElement::identity(&kahler);
        for i in 1..=8 {
            acc = multiply(&acc, &quarter).unwrap();
            if i == 4 {
                assert!(linalg::rel_dev(acc.matrix(), &Mat::identity(2, 2)) < 1e-12);
                assert!((acc.psi() + 1.0).norm() < 1e-9);
            }
        }
        assert!((acc.psi() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn fermionic_mode_rotation_flips_at_two_pi() {
        let kahler = standard_kahler(2, Statistics::Fermion);
        let mut k = Mat::zeros(4, 4);
        k[(0, 2)] = 1.0;
        k[(2, 0)] = -1.0;
        let quarter = lift(&LieGenerator::new(k * (PI / 2.0), &kahler).unwrap().exp(), 1, &kahler).unwrap();
        let mut acc = CoverElement::identity(&kahler);
        for _ in 0..4 {
            acc = multiply(&acc, &quarter).unwrap();
        }
        assert!(linalg::rel_dev(acc.matrix(), &Mat::identity(4, 4)) < 1e-12);
        assert!((acc.psi() + 1.0).norm() < 1e-9);
    }

    #[test]
    fn migration_to_same_reference_is_identity() {
        let kahler = standard_kahler(2, Statistics::Fermion);
        let (k, _) = random_generator(2, Statistics::Fermion, 4, 0.5);
        let e = lift(&k.exp(), 1, &kahler).unwrap();
        let m = migrate_reference(&e, &kahler).unwrap();
        assert_eq!(m.psi(), e.psi());
    }

    fn other_reference(kahler: &KahlerStructure, seed: u64) -> KahlerStructure {
        let (k, _) = random_generator(kahler.n_modes(), kahler.statistics(), seed, 0.4);
        let m = k.exp();
        let j = m.matrix() * kahler.j() * m.inverse(kahler).matrix();
        kahler.with_j(&j).unwrap()
    }

    #[test]
    fn migrated_element_satisfies_invariant() {
        for stats in [Statistics::Boson, Statistics::Fermion] {
            let kahler = standard_kahler(2, stats);
            let (k, _) = random_generator(2, stats, 8, 0.6);
            let e = lift(&k.exp(), 1, &kahler).unwrap();
            let target = other_reference(&kahler, 99);
            let moved = migrate_reference(&e, &target).unwrap();
            let phi = circle(moved.group_element(), &target).unwrap().value();
            assert!((moved.psi() * moved.psi() - phi).norm() < 1e-9);
            let alt = migrate_reference_alt(&e, &target).unwrap();
            assert!((alt.psi() - moved.psi()).norm() < 1e-9);
        }
    }

    #[test]
    fn repair_of_interior_elements_is_trivial() {
        let kahler = standard_kahler(2, Statistics::Fermion);
        let e = lift(&GroupElement::identity(&kahler), 1, &kahler).unwrap();
        let (j, moved) = repair_reference(std::slice::from_ref(&e), 1).unwrap();
        assert!(j.same_reference(&kahler));
        assert_eq!(moved[0].psi(), e.psi());
    }

    #[test]
    fn repair_resolves_boundary_product() {
        let kahler = standard_kahler(2, Statistics::Fermion);
        let half = GroupElement::new(linalg::expm(&fermion_kplus(PI / 2.0, 0.7)), &kahler).unwrap();
        let a = lift(&half, 1, &kahler).unwrap();
        assert!(matches!(multiply(&a, &a), Err(Error::DegeneratePair { .. })));
        let (j, moved) = repair_reference(&[a.clone(), a.clone()], 5).unwrap();
        let prod = multiply(&moved[0], &moved[1]).unwrap();
        let (_, margin) = is_interior(prod.group_element(), &j);
        assert!(margin > REPAIR_MARGIN);
    }

    proptest! {
        #[test]
        fn multiplication_is_associative(seed in 0u64..50_000, n in 1usize..4, fermion in any::<bool>()) {
            let stats = if fermion { Statistics::Fermion } else { Statistics::Boson };
            let kahler = standard_kahler(n, stats);
            let scale = if fermion { 0.6 } else { 0.4 };
            let el = |s: u64| lift(&random_generator(n, stats, s, scale).0.exp(), 1, &kahler);
            if let (Ok(a), Ok(b), Ok(c)) = (el(seed), el(seed + 100_000), el(seed + 200_000)) {
                if let (Ok(ab), Ok(bc)) = (multiply(&a, &b), multiply(&b, &c)) {
                    if let (Ok(l), Ok(r)) = (multiply(&ab, &c), multiply(&a, &bc)) {
                        prop_assert!((l.psi() - r.psi()).norm() < 1e-9);
                        prop_assert!(linalg::rel_dev(l.matrix(), r.matrix()) < 1e-10);
                    }
                }
            }
        }

        #[test]
        fn inverse_round_trip(seed in 0u64..50_000, n in 1usize..4) {
            let kahler = standard_kahler(n, Statistics::Boson);
            let a = lift(&random_generator(n, Statistics::Boson, seed, 0.5).0.exp(), if seed % 2 == 0 { 1 } else { -1 }, &kahler).unwrap();
            let p = multiply(&a, &inverse(&a)).unwrap();
            prop_assert!((p.psi() - 1.0).norm() < 1e-9);
            prop_assert!(linalg::rel_dev(p.matrix(), &Mat::identity(2 * n, 2 * n)) < 1e-9);
            let phi = circle(inverse(&a).group_element(), &kahler).unwrap().value();
            prop_assert!((phi - a.psi().conj() * a.psi().conj()).norm() < 1e-9);
        }

        #[test]
        fn center_commutes_and_flips(seed in 0u64..50_000) {
            let kahler = standard_kahler(2, Statistics::Fermion);
            if let Ok(a) = lift(&random_generator(2, Statistics::Fermion, seed, 0.8).0.exp(), 1, &kahler) {
                let minus = lift(&GroupElement::identity(&kahler), -1, &kahler).unwrap();
                let l = multiply(&a, &minus).unwrap();
                let r = multiply(&minus, &a).unwrap();
                prop_assert!((l.psi() + a.psi()).norm() < 1e-12);
                prop_assert!((r.psi() + a.psi()).norm() < 1e-12);
            }
        }

        #[test]
        fn projection_is_homomorphism(seed in 0u64..50_000, fermion in any::<bool>()) {
            let stats = if fermion { Statistics::Fermion } else { Statistics::Boson };
            let kahler = standard_kahler(2, stats);
            let a = lift(&random_generator(2, stats, seed, 0.5).0.exp(), 1, &kahler);
            let b = lift(&random_generator(2, stats, seed + 1, 0.5).0.exp(), 1, &kahler);
            if let (Ok(a), Ok(b)) = (a, b) {
                if let Ok(p) = multiply(&a, &b) {
                    prop_assert_eq!(p.matrix(), &(a.matrix() * b.matrix()));
                }
            }
        }

        #[test]
        fn migration_round_trip(seed in 0u64..50_000, n in 2usize..4) {
            let kahler = standard_kahler(n, Statistics::Fermion);
            if let Ok(a) = lift(&random_generator(n, Statistics::Fermion, seed, 0.8).0.exp(), 1, &kahler) {
                let target = other_reference(&kahler, seed + 3);
                if let Ok(there) = migrate_reference(&a, &target) {
                    if let Ok(back) = migrate_reference(&there, &kahler) {
                        prop_assert!((back.psi() - a.psi()).norm() < 1e-9);
                    }
                }
            }
        }
    }
}
