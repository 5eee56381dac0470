//! Acceptance criteria as runnable checks, shared by the test suite and the CLI.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cartan::lie_split;
use crate::circle_cocycle::{circle, cocycle};
use crate::double_cover::{lift, migrate_reference, multiply, repair_reference, CoverElement, REPAIR_MARGIN};
use crate::error::{Error, Result};
use crate::expectation::{closed_form, exp_cover, expectation_value, phase_boson, phase_fermion, phase_trajectory};
use crate::io::{mat_to_rows, parse, GeneratorSpec, ReferenceSpec};
use crate::linalg::{self, c, wrap_angle, Mat};
use crate::normal_form::{auto_rescale, continuity_certificate, direct_sum, symplectic_normal_form, model_block};
use crate::oracle::{evolved_vacuum, exact_expectation, exact_moment, vacuum_trajectory, FockSpace, CONVERGENCE_TOL};
use crate::phase_space::{random_generator, standard_block, standard_kahler, GroupElement, KahlerStructure, LieGenerator, Statistics};
use crate::wick::wick_moment;

pub const DEFAULT_SEED: u64 = 20_240_611;

/// Shipped N = 4 trajectory fixtures.
pub const FERMION_FIXTURE: &str = include_str!("../fixtures/trajectory_fermion_n4.json");
pub const BOSON_FIXTURE: &str = include_str!("../fixtures/trajectory_boson_n4.json");

/// Truncation used for the N = 4 bosonic trajectory oracle (doubled for certification).
pub const FIXTURE_BOSON_CUTOFF: usize = 24;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub gating: bool,
    pub passed: bool,
    pub cases: usize,
    pub skipped: usize,
    /// Largest observed deviation against the tolerance.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {:<34} cases={:<5} skipped={:<3} worst={:.3e} tol={:.1e} time={:.2}s{}{}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.cases,
            self.skipped,
            self.worst,
            self.tolerance,
            self.seconds,
            if self.gating { "" } else { " (non-gating)" },
            if self.detail.is_empty() { String::new() } else { format!(" | {}", self.detail) },
        )
    }
}

/// Running maximum of deviations plus bookkeeping for one criterion.
struct Tally {
    cases: usize,
    skipped: usize,
    worst: f64,
    errors: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { cases: 0, skipped: 0, worst: 0.0, errors: Vec::new() }
    }
    fn record(&mut self, deviation: f64) {
        self.cases += 1;
        // NaN counts as a failure
        self.worst = if deviation.is_nan() { f64::INFINITY } else { self.worst.max(deviation) };
    }
    fn error(&mut self, context: String, e: Error) {
        self.cases += 1;
        self.worst = f64::INFINITY;
        if self.errors.len() < 3 {
            self.errors.push(format!("{context}: {e}"));
        }
    }
    fn report(self, id: u8, tolerance: f64, start: Instant, extra_ok: bool, note: String) -> CriterionReport {
        let (title, gating) = CRITERIA[(id - 1) as usize];
        let mut detail = note;
        if !self.errors.is_empty() {
            if !detail.is_empty() {
                detail.push_str("; ");
            }
            detail.push_str(&self.errors.join("; "));
        }
        CriterionReport {
            id,
            title,
            gating,
            passed: self.worst < tolerance && extra_ok && self.cases > 0,
            cases: self.cases,
            skipped: self.skipped,
            worst: self.worst,
            tolerance,
            seconds: start.elapsed().as_secs_f64(),
            detail,
        }
    }
}

/// (title, gating) per criterion.
pub const CRITERIA: [(&str, bool); 10] = [
    ("fermionic exactness", true),
    ("bosonic exactness", true),
    ("golden closed forms", true),
    ("double-cover topology", true),
    ("cocycle identity / associativity", true),
    ("reference migration and repair", true),
    ("generalized Wick moments", true),
    ("symplectic normal form", true),
    ("trajectory reproduction", true),
    ("triple-overlap phase", false),
];

fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ((id as u64) << 48))
}

pub fn run(id: u8, seed: u64) -> Result<CriterionReport> {
    Ok(match id {
        1 => fermionic_exactness(seed),
        2 => bosonic_exactness(seed),
        3 => golden_closed_forms(),
        4 => double_cover_topology(),
        5 => cocycle_identity(seed),
        6 => reference_migration(seed),
        7 => generalized_wick(seed),
        8 => normal_form_check(seed),
        9 => trajectory_reproduction(),
        10 => triple_overlap(seed),
        _ => return Err(Error::InvalidInput(format!("no criterion {id}; expected 1..=10"))),
    })
}

pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    (1..=10).map(|id| run(id, seed).expect("criterion ids are valid")).collect()
}

// ---------------------------------------------------------------------------

fn fermionic_exactness(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 1);
    let mut tally = Tally::new();
    for n in 2..=4 {
        let kahler = standard_kahler(n, Statistics::Fermion);
        for i in 0..200 {
            let (k, _) = random_generator(n, Statistics::Fermion, rng.gen(), 1.0);
            let exact = match exact_expectation(&k, &kahler, None) {
                Ok(v) => v,
                Err(e) => {
                    tally.error(format!("N={n} #{i} oracle"), e);
                    continue;
                }
            };
            if exact.norm() <= 1e-6 {
                tally.skipped += 1;
                continue;
            }
            match phase_fermion(&k, &kahler) {
                Ok(v) => tally.record((v.value() - exact).norm()),
                Err(e) => tally.error(format!("N={n} #{i}"), e),
            }
        }
    }
    let fast = start.elapsed().as_secs_f64() < 30.0;
    tally.report(1, 1e-9, start, fast, if fast { String::new() } else { "runtime above 30 s".into() })
}

/// Symplectic conjugate of a random assembly of normal-form model blocks on `n` modes, spectral radius ≤ 2.
pub fn engineered_boson_generator(n: usize, rng: &mut ChaCha8Rng) -> Mat {
    loop {
        let mut parts = Vec::new();
        let mut modes = 0;
        while modes < n {
            let sign: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
            let kind = if n - modes >= 2 { rng.gen_range(0..6) } else { rng.gen_range(0..4) };
            let block = match kind {
                0 => model_block(6, c(0.0, rng.gen_range(0.2..2.0)), 1, sign),
                1 => model_block(1, c(rng.gen_range(0.1..0.5), 0.0), 1, 1),
                2 => model_block(3, c(0.0, 0.0), 2, sign) * rng.gen_range(0.3..2.0),
                3 => model_block(4, c(0.0, 0.0), 1, 1) * rng.gen_range(0.3..2.0),
                4 => model_block(5, c(0.0, rng.gen_range(0.3..1.5)), 2, sign) * rng.gen_range(0.5..1.3),
                _ => model_block(2, c(rng.gen_range(0.05..0.4), rng.gen_range(0.3..1.8)), 1, 1),
            };
            modes += block.nrows() / 2;
            parts.push(block);
        }
        if modes != n {
            continue;
        }
        let model = direct_sum(&parts);
        if linalg::spectral_radius(&model) > 2.0 {
            continue;
        }
        let (r, _) = random_generator(n, Statistics::Boson, rng.gen(), 0.15);
        let s = r.exp().matrix().clone();
        return &s * model * linalg::inverse(&s).expect("symplectic matrices are invertible");
    }
}

fn bosonic_exactness(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 2);
    let mut tally = Tally::new();
    for i in 0..100 {
        let n = 1 + i % 2;
        let kahler = standard_kahler(n, Statistics::Boson);
        let k = if i % 4 < 2 {
            engineered_boson_generator(n, &mut rng)
        } else {
            let (r, radius) = random_generator(n, Statistics::Boson, rng.gen(), 1.0);
            r.matrix() * (rng.gen_range(0.2..2.0) / radius)
        };
        let k = LieGenerator::new(k, &kahler).expect("generator in the algebra");
        let exact = match exact_expectation(&k, &kahler, None) {
            Ok(v) => v,
            Err(e) => {
                tally.error(format!("#{i} oracle"), e);
                continue;
            }
        };
        match phase_boson(&k, &kahler) {
            Ok(v) => tally.record((v.value() - exact).norm()),
            Err(e) => tally.error(format!("#{i}"), e),
        }
    }
    let fast = start.elapsed().as_secs_f64() < 300.0;
    tally.report(2, 1e-5, start, fast, if fast { String::new() } else { "runtime above 5 min".into() })
}

pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

fn golden_closed_forms() -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let boson = standard_kahler(1, Statistics::Boson);
    let fermion = standard_kahler(2, Statistics::Fermion);
    let axis = grid(-3.0, 3.0, 21);
    for &a in &axis {
        for &cc in &axis {
            let k = LieGenerator::new(closed_form::boson_generator(a, cc), &boson).expect("sp(2) element");
            match phase_boson(&k, &boson) {
                Ok(v) => {
                    tally.record((v.modulus.powi(4) - closed_form::boson_modulus_quartic(a, cc)).abs());
                    tally.record(wrap_angle(v.phase - closed_form::boson_phase(a, cc)).abs());
                }
                Err(e) => tally.error(format!("boson a={a} c={cc}"), e),
            }
            let (n1, n3) = (a, cc);
            let k = LieGenerator::new(closed_form::fermion_generator(n1, n3), &fermion).expect("so(4) element");
            match phase_fermion(&k, &fermion) {
                Ok(v) => tally.record((v.value() - closed_form::fermion_value(n1, n3)).norm()),
                Err(e) => tally.error(format!("fermion n1={n1} n3={n3}"), e),
            }
        }
    }
    tally.report(3, 1e-10, start, true, String::new())
}

fn double_cover_topology() -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let mut run = |kahler: &KahlerStructure, k: Mat| -> Result<()> {
        let quarter = lift(&LieGenerator::new(k, kahler)?.exp(), 1, kahler)?;
        let dim = kahler.dim();
        let mut acc = CoverElement::identity(kahler);
        for i in 1..=8 {
            acc = multiply(&acc, &quarter)?;
            if i == 4 || i == 8 {
                let expected = if i == 4 { -1.0 } else { 1.0 };
                tally.record((acc.psi() - expected).norm());
                tally.record((acc.matrix() - Mat::identity(dim, dim)).norm());
            }
        }
        Ok(())
    };
    let boson = standard_kahler(1, Statistics::Boson);
    let r1 = run(&boson, boson.j() * (PI / 2.0));
    let fermion = standard_kahler(2, Statistics::Fermion);
    let mut rot = Mat::zeros(4, 4);
    rot[(0, 2)] = PI / 2.0;
    rot[(2, 0)] = -PI / 2.0;
    let r2 = run(&fermion, rot);
    for (name, r) in [("boson", r1), ("fermion", r2)] {
        if let Err(e) = r {
            tally.error(name.into(), e);
        }
    }
    tally.report(4, 1e-9, start, true, "psi after 4 and 8 quarter turns".into())
}

fn cocycle_identity(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 5);
    let mut tally = Tally::new();
    let random_element = |rng: &mut ChaCha8Rng, n: usize, stats: Statistics| -> GroupElement {
        random_generator(n, stats, rng.gen(), 1.0).0.exp()
    };
    for stats in [Statistics::Boson, Statistics::Fermion] {
        for i in 0..500 {
            let n = 1 + i % 4;
            let kahler = standard_kahler(n, stats);
            let (m1, m2) = (random_element(&mut rng, n, stats), random_element(&mut rng, n, stats));
            let check = || -> Result<f64> {
                let eta = cocycle(&m1, &m2, &kahler)?;
                let lhs = circle(&m1.compose(&m2), &kahler)?.value();
                let rhs = circle(&m1, &kahler)?.value() * circle(&m2, &kahler)?.value() * Complex64::from_polar(1.0, eta.eta);
                Ok((lhs - rhs).norm())
            };
            match check() {
                Ok(d) => tally.record(d),
                Err(Error::DegeneratePair { .. }) | Err(Error::FermionBoundary { .. }) => tally.skipped += 1,
                Err(e) => tally.error(format!("{} pair {i}", stats.name()), e),
            }
        }
    }
    for i in 0..200 {
        let stats = if i % 2 == 0 { Statistics::Boson } else { Statistics::Fermion };
        let n = 1 + i % 4;
        let kahler = standard_kahler(n, stats);
        let draw = |rng: &mut ChaCha8Rng| {
            let sheet = if rng.gen_bool(0.5) { 1 } else { -1 };
            lift(&random_element(rng, n, stats), sheet, &kahler)
        };
        let check = |rng: &mut ChaCha8Rng| -> Result<f64> {
            let (a, b, cc) = (draw(rng)?, draw(rng)?, draw(rng)?);
            let left = multiply(&multiply(&a, &b)?, &cc)?;
            let right = multiply(&a, &multiply(&b, &cc)?)?;
            let scale = left.matrix().norm().max(1.0);
            Ok((left.psi() - right.psi()).norm().max((left.matrix() - right.matrix()).norm() / scale))
        };
        match check(&mut rng) {
            Ok(d) => tally.record(d),
            Err(Error::DegeneratePair { .. }) | Err(Error::FermionBoundary { .. }) => tally.skipped += 1,
            Err(e) => tally.error(format!("triple {i}"), e),
        }
    }
    let note = format!("{} boundary-adjacent draws skipped", tally.skipped);
    let few_skips = tally.skipped <= 10;
    tally.report(5, 1e-9, start, few_skips, note)
}

/// T_φ boundary block: exp of a J-anticommuting rotation by angle θ in the first two fermionic modes.
pub fn fermion_boundary_block(theta: f64, phi: f64, n: usize) -> Mat {
    let (cs, sn) = (phi.cos(), phi.sin());
    let local = Mat::from_row_slice(4, 4, &[0.0, cs, 0.0, sn, -cs, 0.0, -sn, 0.0, 0.0, sn, 0.0, -cs, -sn, 0.0, cs, 0.0])
        * (theta / 2.0);
    let mut parts = vec![local];
    parts.extend((2..n).map(|_| Mat::zeros(2, 2)));
    linalg::expm(&direct_sum(&parts))
}

fn reference_migration(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 6);
    let mut tally = Tally::new();
    for i in 0..100 {
        let n = 2 + i % 3;
        let kahler = standard_kahler(n, Statistics::Fermion);
        let check = |rng: &mut ChaCha8Rng| -> Result<f64> {
            let sheet = if rng.gen_bool(0.5) { 1 } else { -1 };
            let e = lift(&random_generator(n, Statistics::Fermion, rng.gen(), 1.0).0.exp(), sheet, &kahler)?;
            let t = random_generator(n, Statistics::Fermion, rng.gen(), 0.4).0.exp();
            let j_new = t.matrix() * kahler.j() * t.inverse(&kahler).matrix();
            let target = kahler.with_j(&j_new)?;
            let there = migrate_reference(&e, &target)?;
            let back = migrate_reference(&there, &kahler)?;
            Ok((back.psi() - e.psi()).norm())
        };
        match check(&mut rng) {
            Ok(d) => tally.record(d),
            Err(e) => tally.error(format!("element {i}"), e),
        }
    }
    let mut repaired = 0;
    for i in 0..20 {
        let n = 2 + i % 2;
        let kahler = standard_kahler(n, Statistics::Fermion);
        let phi = 2.0 * PI * i as f64 / 20.0;
        let check = |rng: &mut ChaCha8Rng| -> Result<f64> {
            // conjugating by a J-commuting u keeps the product on the boundary
            let (k, _) = random_generator(n, Statistics::Fermion, rng.gen(), 0.7);
            let u = linalg::expm(&lie_split(&k, &kahler).0);
            let half = &u * fermion_boundary_block(PI / 2.0, phi, n) * u.transpose();
            let a = lift(&GroupElement::new(half, &kahler)?, 1, &kahler)?;
            if !matches!(multiply(&a, &a), Err(Error::DegeneratePair { .. })) {
                return Err(Error::InvalidInput("engineered product is not on the boundary".into()));
            }
            let (j, moved) = repair_reference(&[a.clone(), a], rng.gen())?;
            let prod = multiply(&moved[0], &moved[1])?;
            let (_, margin) = crate::cartan::is_interior(prod.group_element(), &j);
            let phi_check = (prod.psi() * prod.psi() - circle(prod.group_element(), &j)?.value()).norm();
            if margin <= REPAIR_MARGIN {
                return Err(Error::RepairFailed { attempts: 0, best_margin: margin });
            }
            Ok(phi_check)
        };
        match check(&mut rng) {
            Ok(d) => {
                repaired += 1;
                tally.record(d)
            }
            Err(e) => tally.error(format!("boundary {i}"), e),
        }
    }
    tally.report(6, 1e-9, start, repaired == 20, format!("{repaired}/20 boundary pairs repaired"))
}

fn random_indices(rng: &mut ChaCha8Rng, d: usize, dim: usize) -> Vec<usize> {
    (0..d).map(|_| rng.gen_range(1..=dim)).collect()
}

fn generalized_wick(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 7);
    // deviations are recorded relative to the per-statistics tolerance
    let mut tally = Tally::new();
    let mut worst = [0.0f64; 2];
    for (slot, stats, n, scale, tol) in [(0, Statistics::Fermion, 3, 1.0, 1e-8), (1, Statistics::Boson, 1, 0.6, 1e-5)] {
        let kahler = standard_kahler(n, stats);
        for i in 0..50 {
            let check = |rng: &mut ChaCha8Rng| -> Result<f64> {
                let (k, _) = random_generator(n, stats, rng.gen(), scale);
                let flip = rng.gen_bool(0.5);
                let base = exp_cover(&k, &kahler)?;
                let cover = if flip { base.flipped() } else { base };
                let mut dev: f64 = 0.0;
                for d in [2, 4, 6] {
                    let idx = random_indices(rng, d, 2 * n);
                    let zero: Vec<usize> = idx.iter().map(|a| a - 1).collect();
                    // (M, −ψ) represents −e^{K̂}
                    let exact = exact_moment(&zero, &k, &kahler, None)? * if flip { -1.0 } else { 1.0 };
                    dev = dev.max((wick_moment(&idx, &cover)? - exact).norm());
                }
                Ok(dev)
            };
            match check(&mut rng) {
                Ok(d) => {
                    worst[slot] = worst[slot].max(d);
                    tally.record(d / tol)
                }
                Err(e) => tally.error(format!("{} cover {i}", stats.name()), e),
            }
        }
    }
    let note = format!("error/tol; fermion worst {:.2e} (tol 1e-8), boson worst {:.2e} (tol 1e-5)", worst[0], worst[1]);
    tally.report(7, 1.0, start, true, note)
}

fn normal_form_check(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 8);
    let mut tally = Tally::new();
    let mut unpaired = 0;
    let mut cases: Vec<(String, Mat)> = Vec::new();
    for i in 0..100 {
        let n = 1 + i % 3;
        cases.push((format!("random {i}"), random_generator(n, Statistics::Boson, rng.gen(), 1.0).0.matrix().clone()));
    }
    cases.push(("K1".into(), Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])));
    cases.push(("K2".into(), Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])));
    cases.push(("K3".into(), Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])));
    for (i, (class_c, dim, sigma)) in [(3u8, 2usize, 1i8), (3, 2, -1), (3, 4, 1), (5, 2, 1), (5, 2, -1), (5, 4, 1)].into_iter().enumerate() {
        let lambda = if class_c == 5 { c(0.0, 0.9) } else { c(0.0, 0.0) };
        let model = model_block(class_c, lambda, dim, sigma);
        let n = model.nrows() / 2;
        let (r, _) = random_generator(n, Statistics::Boson, rng.gen(), 0.3);
        let s = r.exp().matrix().clone();
        cases.push((format!("class {class_c} #{i}"), &s * model * linalg::inverse(&s).expect("invertible")));
    }
    for (name, k) in cases {
        let n = k.nrows() / 2;
        let kahler = standard_kahler(n, Statistics::Boson);
        let check = || -> Result<(f64, bool)> {
            let k = LieGenerator::new(k.clone(), &kahler)?;
            let nf = symplectic_normal_form(&k)?;
            let omega = standard_block(n);
            let symplectic = (&nf.s * &omega * nf.s.transpose() - &omega).norm() / nf.s.norm().powi(2).max(1.0);
            let conj = nf.s_inv() * k.matrix() * &nf.s;
            let matches = (&conj - nf.assembled()).norm() / k.matrix().norm().max(1.0);
            let rescaled = auto_rescale(&nf);
            let k_rest = &rescaled.k_normal - rescaled.imaginary_part();
            let report = continuity_certificate(&k_rest, &omega);
            Ok((symplectic.max(matches), report.paired))
        };
        match check() {
            Ok((d, paired)) => {
                tally.record(d);
                if !paired {
                    unpaired += 1;
                }
            }
            Err(e) => tally.error(name, e),
        }
    }
    tally.report(8, 1e-9, start, unpaired == 0, format!("{unpaired} certificates with unpaired crossings"))
}

/// Deterministic N = 4 fixture generator (the shipped JSON is its output).
pub fn fixture_spec(statistics: Statistics) -> GeneratorSpec {
    let n = 4;
    let (k, t_max, steps) = match statistics {
        Statistics::Fermion => {
            let (k, _) = random_generator(n, Statistics::Fermion, 4_2024, 0.5);
            (k.matrix().clone(), 12.0, 240)
        }
        Statistics::Boson => {
            // elliptic frequencies under a mild symplectic conjugation
            let mut rng = ChaCha8Rng::seed_from_u64(4_2025);
            let parts: Vec<Mat> = (0..n).map(|_| model_block(6, c(0.0, rng.gen_range(0.4..1.2)), 1, 1)).collect();
            let (r, _) = random_generator(n, Statistics::Boson, rng.gen(), 0.08);
            let s = r.exp().matrix().clone();
            (&s * direct_sum(&parts) * linalg::inverse(&s).expect("invertible"), 6.0, 120)
        }
    };
    GeneratorSpec {
        reference: ReferenceSpec::standard(n, statistics),
        k: Some(mat_to_rows(&k)),
        random: None,
        t_max: Some(t_max),
        steps: Some(steps),
        t_grid: None,
    }
}

pub fn shipped_fixture(statistics: Statistics) -> Result<GeneratorSpec> {
    parse(match statistics {
        Statistics::Fermion => FERMION_FIXTURE,
        Statistics::Boson => BOSON_FIXTURE,
    })
}

fn trajectory_reproduction() -> CriterionReport {
    let start = Instant::now();
    let mut tally = Tally::new();
    let mut notes = Vec::new();
    let mut diverged = true;
    for (stats, tol) in [(Statistics::Fermion, 1e-6), (Statistics::Boson, 1e-4)] {
        let check = || -> Result<(f64, f64)> {
            let spec = shipped_fixture(stats)?;
            let (k, kahler) = spec.resolve(0)?;
            let grid = spec.time_grid()?;
            let library = phase_trajectory(&k, &kahler, &grid)?;
            let exact = match stats {
                Statistics::Fermion => vacuum_trajectory(&k, &kahler, &grid, None)?,
                Statistics::Boson => {
                    let coarse = vacuum_trajectory(&k, &kahler, &grid, Some(FIXTURE_BOSON_CUTOFF))?;
                    let fine = vacuum_trajectory(&k, &kahler, &grid, Some(2 * FIXTURE_BOSON_CUTOFF))?;
                    let difference = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    if difference > CONVERGENCE_TOL {
                        return Err(Error::TruncationNotConverged { difference });
                    }
                    fine
                }
            };
            let mut worst: f64 = 0.0;
            let mut naive_dev: f64 = 0.0;
            for (p, e) in library.iter().zip(&exact) {
                worst = worst.max((p.value.value() - e).norm());
                if e.norm() > 1e-6 {
                    naive_dev = naive_dev.max(wrap_angle(p.phase_naive - e.arg()).abs());
                }
            }
            Ok((worst / tol, naive_dev))
        };
        match check() {
            Ok((scaled, naive)) => {
                tally.record(scaled);
                diverged &= naive > 1.0;
                notes.push(format!("{}: error/tol {scaled:.2e}, naive deviation {naive:.2} rad", stats.name()));
            }
            Err(e) => {
                diverged = false;
                tally.error(stats.name().into(), e)
            }
        }
    }
    tally.report(9, 1.0, start, diverged, notes.join("; "))
}

fn triple_overlap(seed: u64) -> CriterionReport {
    let start = Instant::now();
    let mut rng = rng_for(seed, 10);
    let mut tally = Tally::new();
    let kahler = standard_kahler(2, Statistics::Fermion);
    let fock = FockSpace::new(Statistics::Fermion, 2, None).expect("small fermionic space");
    for i in 0..50 {
        let check = |rng: &mut ChaCha8Rng| -> Result<Option<f64>> {
            let (k1, _) = random_generator(2, Statistics::Fermion, rng.gen(), 1.0);
            let (k2, _) = random_generator(2, Statistics::Fermion, rng.gen(), 1.0);
            let (v1, v2) = (evolved_vacuum(k1.matrix(), &fock), evolved_vacuum(k2.matrix(), &fock));
            let overlap: Complex64 = v1.iter().zip(&v2).map(|(a, b)| a.conj() * b).sum();
            let product = v1[0] * overlap * v2[0].conj();
            if product.norm() < 1e-6 {
                return Ok(None);
            }
            let (m1, m2) = (k1.exp(), k2.exp());
            let half = cocycle(&m1.inverse(&kahler), &m2, &kahler)?.half_phase();
            Ok(Some((product / product.norm() - half).norm()))
        };
        match check(&mut rng) {
            Ok(Some(d)) => tally.record(d),
            Ok(None) => tally.skipped += 1,
            Err(e) => tally.error(format!("pair {i}"), e),
        }
    }
    tally.report(10, 1e-8, start, true, String::new())
}

/// Library amplitude of e^{K̂} next to the oracle amplitude.
pub fn compare_with_oracle(k: &LieGenerator, kahler: &KahlerStructure, cutoff: Option<usize>) -> Result<(Complex64, Complex64)> {
    let library = expectation_value(k, kahler)?.value();
    let exact = exact_expectation(k, kahler, cutoff)?;
    Ok((library, exact))
}
