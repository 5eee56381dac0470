//! JSON schemas for references, generators, cover elements and superposition states.
//!
//! Matrices are arrays of rows; complex numbers are `[re, im]` pairs; phase-space
//! indices are 1-based.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::double_cover::{lift, CoverElement};
use crate::error::{Error, Result};
use crate::expectation::exp_cover;
use crate::linalg::Mat;
use crate::phase_space::{random_generator, GroupElement, KahlerStructure, LieGenerator, Statistics};
use crate::superposition::SuperpositionState;

pub type MatrixRows = Vec<Vec<f64>>;
pub type ComplexPair = [f64; 2];

pub fn mat_from_rows(rows: &MatrixRows) -> Result<Mat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        let cols = rows.first().map_or(0, |r| r.len());
        return Err(Error::Shape { rows: n, cols, expected: n });
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn mat_to_rows(m: &Mat) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn complex_from_pair(p: ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn complex_to_pair(z: Complex64) -> ComplexPair {
    [z.re, z.im]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub statistics: Statistics,
    pub n_modes: usize,
    /// Complex structure; standard when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<MatrixRows>,
    /// Ω (bosons) or G (fermions); standard when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematic: Option<MatrixRows>,
}

impl ReferenceSpec {
    pub fn standard(n_modes: usize, statistics: Statistics) -> Self {
        ReferenceSpec { statistics, n_modes, j: None, kinematic: None }
    }

    pub fn from_kahler(kahler: &KahlerStructure) -> Self {
        let standard = KahlerStructure::standard(kahler.n_modes(), kahler.statistics());
        if kahler.same_reference(&standard) {
            return Self::standard(kahler.n_modes(), kahler.statistics());
        }
        ReferenceSpec {
            statistics: kahler.statistics(),
            n_modes: kahler.n_modes(),
            j: Some(mat_to_rows(kahler.j())),
            kinematic: Some(mat_to_rows(kahler.kinematic_form())),
        }
    }

    pub fn resolve(&self) -> Result<KahlerStructure> {
        if self.n_modes == 0 {
            return Err(Error::InvalidInput("n_modes must be positive".into()));
        }
        let standard = KahlerStructure::standard(self.n_modes, self.statistics);
        if self.j.is_none() && self.kinematic.is_none() {
            return Ok(standard);
        }
        let j = match &self.j {
            Some(rows) => mat_from_rows(rows)?,
            None => standard.j().clone(),
        };
        let form = match &self.kinematic {
            Some(rows) => mat_from_rows(rows)?,
            None => standard.kinematic_form().clone(),
        };
        KahlerStructure::from_complex_structure(self.statistics, &form, &j)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

/// A generator K given explicitly or drawn from the request seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub reference: ReferenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
    /// Trajectory end time (with `steps`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Explicit trajectory grid; overrides `t_max`/`steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
}

impl GeneratorSpec {
    pub fn resolve(&self, seed: u64) -> Result<(LieGenerator, KahlerStructure)> {
        let kahler = self.reference.resolve()?;
        let k = match (&self.k, &self.random) {
            (Some(rows), None) => LieGenerator::new(mat_from_rows(rows)?, &kahler)?,
            (None, Some(r)) => {
                if !kahler.same_reference(&KahlerStructure::standard(kahler.n_modes(), kahler.statistics())) {
                    return Err(Error::InvalidInput("random generators require the standard reference".into()));
                }
                if !(r.scale > 0.0) {
                    return Err(Error::InvalidInput("random scale must be positive".into()));
                }
                random_generator(kahler.n_modes(), kahler.statistics(), seed, r.scale).0
            }
            _ => return Err(Error::InvalidInput("give exactly one of `k` and `random`".into())),
        };
        Ok((k, kahler))
    }

    /// Time grid: `t_grid`, else `steps + 1` uniform points on [0, t_max].
    pub fn time_grid(&self) -> Result<Vec<f64>> {
        if let Some(grid) = &self.t_grid {
            if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::InvalidInput("t_grid must be sorted, finite and non-negative".into()));
            }
            return Ok(grid.clone());
        }
        match (self.t_max, self.steps) {
            (Some(t_max), Some(steps)) if t_max >= 0.0 && steps > 0 => {
                Ok((0..=steps).map(|i| t_max * i as f64 / steps as f64).collect())
            }
            _ => Err(Error::InvalidInput("trajectory needs `t_grid` or positive `t_max` and `steps`".into())),
        }
    }
}

/// A cover element: explicit (M, ψ), a lift of M to a sheet, or the element of e^{K̂}.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<ComplexPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sheet: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MatrixRows>,
}

impl CoverSpec {
    pub fn from_cover(cover: &CoverElement) -> Self {
        CoverSpec {
            m: Some(mat_to_rows(cover.matrix())),
            psi: Some(complex_to_pair(cover.psi())),
            sheet: None,
            generator: None,
        }
    }

    pub fn resolve(&self, kahler: &KahlerStructure) -> Result<CoverElement> {
        match (&self.m, self.psi, self.sheet, &self.generator) {
            (Some(m), Some(psi), None, None) => {
                CoverElement::new(GroupElement::new(mat_from_rows(m)?, kahler)?, complex_from_pair(psi), kahler.clone())
            }
            (Some(m), None, sheet, None) => lift(&GroupElement::new(mat_from_rows(m)?, kahler)?, sheet.unwrap_or(1), kahler),
            (None, None, None, Some(k)) => exp_cover(&LieGenerator::new(mat_from_rows(k)?, kahler)?, kahler),
            _ => Err(Error::InvalidInput("cover needs `m` with `psi` or `sheet`, or `generator` alone".into())),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WickSpec {
    pub reference: ReferenceSpec,
    pub cover: CoverSpec,
    #[serde(default)]
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub reference: ReferenceSpec,
    pub coefficients: Vec<ComplexPair>,
    pub branches: Vec<CoverSpec>,
}

impl StateSpec {
    pub fn from_state(state: &SuperpositionState) -> Self {
        StateSpec {
            reference: ReferenceSpec::from_kahler(state.reference()),
            coefficients: state.coefficients().iter().map(|&z| complex_to_pair(z)).collect(),
            branches: state.branches().iter().map(CoverSpec::from_cover).collect(),
        }
    }

    pub fn resolve(&self) -> Result<SuperpositionState> {
        let kahler = self.reference.resolve()?;
        let branches = self.branches.iter().map(|b| b.resolve(&kahler)).collect::<Result<Vec<_>>>()?;
        SuperpositionState::new(self.coefficients.iter().map(|&p| complex_from_pair(p)).collect(), branches)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub state: StateSpec,
    /// One generator per branch.
    pub directions: Vec<MatrixRows>,
    pub epsilon: f64,
    pub steps: usize,
}

impl EvolveSpec {
    pub fn resolve(&self) -> Result<(SuperpositionState, Vec<LieGenerator>)> {
        let state = self.state.resolve()?;
        let directions = self
            .directions
            .iter()
            .map(|rows| LieGenerator::new(mat_from_rows(rows)?, state.reference()))
            .collect::<Result<Vec<_>>>()?;
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidInput("epsilon must be finite".into()));
        }
        Ok((state, directions))
    }
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed input: {e}")))
}
