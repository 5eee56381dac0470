use gausscover::expectation::{closed_form, cover_amplitude, expectation_value, phase_trajectory};
use gausscover::io::{complex_to_pair, mat_to_rows, EvolveSpec, GeneratorSpec, StateSpec, WickSpec};
use gausscover::oracle::{exact_expectation, exact_moment, vacuum_trajectory};
use gausscover::phase_space::standard_kahler;
use gausscover::selftest::{self, grid, CriterionReport};
use gausscover::superposition::{evolve_step, overlap_matrix, SuperpositionState};
use gausscover::wick::wick_moment;
use gausscover::{Error, KahlerStructure, LieGenerator, Statistics};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::render::{complex, Cell, Table};
use crate::CliError;

/// Halvings tried when a superposition step cannot continue the overlap signs.
pub const MAX_HALVINGS: u32 = 8;

/// One command result: JSON always, CSV and plain text when the command has a tabular form.
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    pub text: Option<String>,
    pub success: bool,
}

impl Report {
    fn new(json: Value, table: Table) -> Self {
        Report { json, table: Some(table), text: None, success: true }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub seed: u64,
    pub cutoff: Option<usize>,
    pub tol: Option<f64>,
}

fn default_tol(statistics: Statistics) -> f64 {
    match statistics {
        Statistics::Fermion => 1e-9,
        Statistics::Boson => 1e-5,
    }
}

fn header(k: &LieGenerator, kahler: &KahlerStructure, opts: &Options) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("statistics".into(), json!(kahler.statistics()));
    map.insert("n_modes".into(), json!(kahler.n_modes()));
    map.insert("seed".into(), json!(opts.seed));
    map.insert("k".into(), json!(mat_to_rows(k.matrix())));
    map
}

pub fn phase(spec: &GeneratorSpec, compare: bool, opts: &Options) -> Result<Report, CliError> {
    let (k, kahler) = spec.resolve(opts.seed)?;
    let v = expectation_value(&k, &kahler)?;
    let mut out = header(&k, &kahler, opts);
    out.insert("modulus".into(), json!(v.modulus));
    out.insert("phase".into(), json!(v.phase));
    out.insert("value".into(), complex(v.value()));
    out.insert("squared".into(), complex(v.squared));
    out.insert("defined".into(), json!(v.defined));
    let mut columns = vec!["modulus", "phase", "value_re", "value_im", "squared_re", "squared_im", "defined"];
    let mut row: Vec<Cell> = vec![
        v.modulus.into(),
        v.phase.into(),
        v.value().re.into(),
        v.value().im.into(),
        v.squared.re.into(),
        v.squared.im.into(),
        v.defined.into(),
    ];
    if compare {
        let exact = exact_expectation(&k, &kahler, opts.cutoff)?;
        let difference = (v.value() - exact).norm();
        let tolerance = opts.tol.unwrap_or_else(|| default_tol(kahler.statistics()));
        out.insert(
            "oracle".into(),
            json!({
                "value": complex(exact),
                "difference": difference,
                "tolerance": tolerance,
                "agrees": difference <= tolerance,
            }),
        );
        columns.extend(["oracle_re", "oracle_im", "difference"]);
        row.extend([exact.re.into(), exact.im.into(), difference.into()]);
    }
    let mut table = Table::new(columns);
    table.push(row);
    Ok(Report::new(Value::Object(out), table))
}

pub fn trajectory(spec: &GeneratorSpec, compare: bool, opts: &Options) -> Result<Report, CliError> {
    let (k, kahler) = spec.resolve(opts.seed)?;
    let times = spec.time_grid()?;
    let points = phase_trajectory(&k, &kahler, &times)?;
    let exact = if compare { Some(vacuum_trajectory(&k, &kahler, &times, opts.cutoff)?) } else { None };
    let mut columns = vec!["t", "modulus", "phase_wrapped", "phase_unwrapped", "phase_naive", "defined"];
    if exact.is_some() {
        columns.extend(["oracle_re", "oracle_im", "error"]);
    }
    let mut table = Table::new(columns);
    let mut rows = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<Cell> = vec![
            p.t.into(),
            p.value.modulus.into(),
            p.value.phase.into(),
            p.phase_unwrapped.into(),
            p.phase_naive.into(),
            p.value.defined.into(),
        ];
        let mut entry = json!({
            "t": p.t,
            "modulus": p.value.modulus,
            "phase_wrapped": p.value.phase,
            "phase_unwrapped": p.phase_unwrapped,
            "phase_naive": p.phase_naive,
            "defined": p.value.defined,
        });
        if let Some(exact) = &exact {
            let error = (p.value.value() - exact[i]).norm();
            row.extend([exact[i].re.into(), exact[i].im.into(), error.into()]);
            entry["oracle"] = complex(exact[i]);
            entry["error"] = json!(error);
        }
        table.push(row);
        rows.push(entry);
    }
    let mut out = header(&k, &kahler, opts);
    out.insert("points".into(), Value::Array(rows));
    Ok(Report::new(Value::Object(out), table))
}

pub fn oracle(spec: &GeneratorSpec, indices: &[usize], opts: &Options) -> Result<Report, CliError> {
    let (k, kahler) = spec.resolve(opts.seed)?;
    let value = if indices.is_empty() {
        exact_expectation(&k, &kahler, opts.cutoff)?
    } else {
        let dim = 2 * kahler.n_modes();
        let zero_based = indices
            .iter()
            .map(|&i| if (1..=dim).contains(&i) { Ok(i - 1) } else { Err(Error::IndexOutOfRange { index: i, max: dim }) })
            .collect::<Result<Vec<_>, _>>()?;
        exact_moment(&zero_based, &k, &kahler, opts.cutoff)?
    };
    let mut out = header(&k, &kahler, opts);
    out.insert("indices".into(), json!(indices));
    out.insert("cutoff".into(), json!(opts.cutoff));
    out.insert("value".into(), complex(value));
    out.insert("modulus".into(), json!(value.norm()));
    out.insert("phase".into(), json!(value.arg()));
    let mut table = Table::new(["value_re", "value_im", "modulus", "phase"]);
    table.push(vec![value.re.into(), value.im.into(), value.norm().into(), value.arg().into()]);
    Ok(Report::new(Value::Object(out), table))
}

pub fn wick(spec: &WickSpec, indices: &[usize]) -> Result<Report, CliError> {
    let kahler = spec.reference.resolve()?;
    let cover = spec.cover.resolve(&kahler)?;
    let indices = if indices.is_empty() { &spec.indices[..] } else { indices };
    let value = wick_moment(indices, &cover)?;
    let base = cover_amplitude(&cover)?;
    let out = json!({
        "statistics": kahler.statistics(),
        "indices": indices,
        "value": complex(value),
        "base_amplitude": complex(base),
    });
    let label = indices.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut table = Table::new(["indices", "value_re", "value_im"]);
    table.push(vec![label.into(), value.re.into(), value.im.into()]);
    Ok(Report::new(out, table))
}

fn overlap_json(x: &gausscover::linalg::CMat) -> Value {
    Value::Array(
        (0..x.nrows())
            .map(|k| Value::Array((0..x.ncols()).map(|l| complex(x[(k, l)])).collect()))
            .collect(),
    )
}

pub fn overlap(spec: &StateSpec) -> Result<Report, CliError> {
    let state = spec.resolve()?;
    let x = overlap_matrix(&state)?;
    let norm = state.norm_squared()?;
    let mut table = Table::new(["k", "l", "re", "im"]);
    for k in 0..x.nrows() {
        for l in 0..x.ncols() {
            table.push(vec![(k + 1).into(), (l + 1).into(), x[(k, l)].re.into(), x[(k, l)].im.into()]);
        }
    }
    Ok(Report::new(json!({"overlap": overlap_json(&x), "norm_squared": norm}), table))
}

/// One step of size ε, split recursively when the sign continuation is ambiguous.
fn advance(
    state: &SuperpositionState,
    directions: &[LieGenerator],
    epsilon: f64,
    depth: u32,
    substeps: &mut usize,
) -> Result<SuperpositionState, Error> {
    match evolve_step(state, directions, epsilon) {
        Err(Error::ContinuationAmbiguous { .. }) if depth < MAX_HALVINGS => {
            let half = advance(state, directions, epsilon / 2.0, depth + 1, substeps)?;
            advance(&half, directions, epsilon / 2.0, depth + 1, substeps)
        }
        result => {
            *substeps += 1;
            result
        }
    }
}

pub fn evolve(spec: &EvolveSpec) -> Result<Report, CliError> {
    let (mut state, directions) = spec.resolve()?;
    let m = state.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|k| (k + 1..m).map(move |l| (k, l))).collect();
    let mut columns = vec!["step".to_string(), "t".into(), "norm_squared".into()];
    for &(k, l) in &pairs {
        columns.push(format!("x_{}_{}_re", k + 1, l + 1));
        columns.push(format!("x_{}_{}_im", k + 1, l + 1));
    }
    let mut table = Table::new(columns);
    let mut steps = Vec::with_capacity(spec.steps + 1);
    let mut substeps = 0usize;
    for step in 0..=spec.steps {
        if step > 0 {
            state = advance(&state, &directions, spec.epsilon, 0, &mut substeps)?;
        }
        let x = overlap_matrix(&state)?;
        let norm = state.norm_squared()?;
        let t = spec.epsilon * step as f64;
        let mut row: Vec<Cell> = vec![step.into(), t.into(), norm.into()];
        for &(k, l) in &pairs {
            row.push(x[(k, l)].re.into());
            row.push(x[(k, l)].im.into());
        }
        table.push(row);
        steps.push(json!({"step": step, "t": t, "norm_squared": norm, "overlap": overlap_json(&x)}));
    }
    let out = json!({
        "steps": steps,
        "substeps": substeps,
        "final_state": serde_json::to_value(StateSpec::from_state(&state)).expect("state serializes"),
    });
    Ok(Report::new(out, table))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    Boson,
    Fermion,
}

pub fn case_study(family: Family, points: usize, range: f64) -> Result<Report, CliError> {
    if points < 2 || !(range > 0.0) {
        return Err(CliError::Usage("case study needs at least 2 points and a positive range".into()));
    }
    let axis = grid(-range, range, points);
    let mut rows = Vec::new();
    let table = match family {
        Family::Boson => {
            let kahler = standard_kahler(1, Statistics::Boson);
            let mut table =
                Table::new(["a", "c", "modulus", "phase", "modulus_quartic", "closed_modulus_quartic", "closed_phase"]);
            for &a in &axis {
                for &c in &axis {
                    let k = LieGenerator::new(closed_form::boson_generator(a, c), &kahler)?;
                    let v = expectation_value(&k, &kahler)?;
                    let (quartic, phase) = (closed_form::boson_modulus_quartic(a, c), closed_form::boson_phase(a, c));
                    table.push(vec![
                        a.into(),
                        c.into(),
                        v.modulus.into(),
                        v.phase.into(),
                        v.modulus.powi(4).into(),
                        quartic.into(),
                        phase.into(),
                    ]);
                    rows.push(json!({"a": a, "c": c, "modulus": v.modulus, "phase": v.phase,
                        "closed_modulus_quartic": quartic, "closed_phase": phase}));
                }
            }
            table
        }
        Family::Fermion => {
            let kahler = standard_kahler(2, Statistics::Fermion);
            let mut table = Table::new(["n1", "n3", "modulus", "phase", "value_re", "value_im", "closed_re", "closed_im"]);
            for &n1 in &axis {
                for &n3 in &axis {
                    let k = LieGenerator::new(closed_form::fermion_generator(n1, n3), &kahler)?;
                    let v = expectation_value(&k, &kahler)?;
                    let (value, closed): (Complex64, Complex64) = (v.value(), closed_form::fermion_value(n1, n3));
                    table.push(vec![
                        n1.into(),
                        n3.into(),
                        v.modulus.into(),
                        v.phase.into(),
                        value.re.into(),
                        value.im.into(),
                        closed.re.into(),
                        closed.im.into(),
                    ]);
                    rows.push(json!({"n1": n1, "n3": n3, "modulus": v.modulus, "phase": v.phase,
                        "value": complex_to_pair(value), "closed": complex_to_pair(closed)}));
                }
            }
            table
        }
    };
    Ok(Report::new(json!({"family": format!("{family:?}").to_lowercase(), "rows": rows}), table))
}

pub fn selftest(criteria: &[u8], seed: u64) -> Result<Report, CliError> {
    let reports: Vec<CriterionReport> = if criteria.is_empty() {
        selftest::run_all(seed)
    } else {
        criteria.iter().map(|&id| selftest::run(id, seed)).collect::<Result<_, _>>()?
    };
    let success = reports.iter().all(|r| r.passed || !r.gating);
    let mut table =
        Table::new(["id", "title", "gating", "passed", "cases", "skipped", "worst", "tolerance", "seconds", "detail"]);
    for r in &reports {
        table.push(vec![
            (r.id as usize).into(),
            r.title.to_string().into(),
            r.gating.into(),
            r.passed.into(),
            r.cases.into(),
            r.skipped.into(),
            r.worst.into(),
            r.tolerance.into(),
            r.seconds.into(),
            r.detail.clone().into(),
        ]);
    }
    let text = reports.iter().map(CriterionReport::line).collect::<Vec<_>>().join("\n") + "\n";
    let json = json!({"seed": seed, "passed": success,
        "criteria": serde_json::to_value(&reports).expect("reports serialize")});
    Ok(Report { json, table: Some(table), text: Some(text), success })
}
