//! JSON file formats for models and generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{from_independent, Distribution, IndepModel, ValidationReport, Violation, YTransitionModel};
use crate::numerics::{Matrix, MatrixFamily, Vector};
use crate::settings::Settings;

/// `{"d", "dY", "W"}` or `{"d", "dY", "Wmat", "V"}`, optionally with `"P0"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub d: usize,
    #[serde(rename = "dY")]
    pub dy: usize,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "Wmat", default, skip_serializing_if = "Option::is_none")]
    pub wmat: Option<Vec<Vec<f64>>>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Vec<f64>>>,
    #[serde(rename = "P0", default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum LoadedModel {
    General(YTransitionModel),
    Independent { indep: IndepModel, model: YTransitionModel },
}

#[derive(Debug, Clone)]
pub struct ModelInput {
    pub model: LoadedModel,
    pub p0: Option<Distribution>,
}

impl ModelInput {
    pub fn y_model(&self) -> &YTransitionModel {
        match &self.model {
            LoadedModel::General(m) => m,
            LoadedModel::Independent { model, .. } => model,
        }
    }

    pub fn indep(&self) -> Option<&IndepModel> {
        match &self.model {
            LoadedModel::Independent { indep, .. } => Some(indep),
            LoadedModel::General(_) => None,
        }
    }
}

fn shape_error(message: String) -> Error {
    Error::Validation(ValidationReport { violations: vec![Violation::Shape { message }] })
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<Matrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(shape_error(format!("{name} must be {nrows}x{ncols}")));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn family_from_nested(w: &[Vec<Vec<f64>>], d: usize, dy: usize, name: &str) -> Result<Vec<Matrix>> {
    if w.len() != dy {
        return Err(shape_error(format!("{name} has {} matrices, expected dY = {dy}", w.len())));
    }
    w.iter().enumerate().map(|(y, m)| matrix_from_rows(m, d, d, &format!("{name}[{y}]"))).collect()
}

impl ModelFile {
    pub fn into_input(self, settings: &Settings) -> Result<ModelInput> {
        let (d, dy) = (self.d, self.dy);
        if d == 0 || dy == 0 {
            return Err(shape_error("d and dY must be positive".into()));
        }
        let model = match (self.w, self.wmat, self.v) {
            (Some(w), None, None) => {
                LoadedModel::General(YTransitionModel::new_with_tol(family_from_nested(&w, d, dy, "W")?, settings.stochastic_tol)?)
            }
            (None, Some(wm), Some(v)) => {
                let indep = IndepModel::new_with_tol(matrix_from_rows(&wm, d, d, "Wmat")?, matrix_from_rows(&v, dy, d, "V")?, settings.stochastic_tol)?;
                let model = from_independent(&indep)?;
                LoadedModel::Independent { indep, model }
            }
            _ => return Err(shape_error("exactly one of W or the pair (Wmat, V) must be present".into())),
        };
        let p0 = match self.p0 {
            Some(p) if p.len() != d => return Err(shape_error(format!("P0 has length {}, expected {d}", p.len()))),
            Some(p) => Some(Distribution::new_with_tol(Vector::from_vec(p), settings.stochastic_tol)?),
            None => None,
        };
        Ok(ModelInput { model, p0 })
    }

    pub fn from_model(model: &YTransitionModel, p0: Option<&Distribution>) -> Self {
        ModelFile {
            d: model.d(),
            dy: model.dy(),
            w: Some(model.matrices().iter().map(rows_of).collect()),
            wmat: None,
            v: None,
            p0: p0.map(|p| p.p().iter().copied().collect()),
        }
    }

    pub fn from_indep(m: &IndepModel, p0: Option<&Distribution>) -> Self {
        ModelFile {
            d: m.d(),
            dy: m.dy(),
            w: None,
            wmat: Some(rows_of(m.w())),
            v: Some(rows_of(m.v())),
            p0: p0.map(|p| p.p().iter().copied().collect()),
        }
    }
}

pub fn parse_model(text: &str, settings: &Settings) -> Result<ModelInput> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_input(settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseEntry {
    pub y: usize,
    pub x: usize,
    pub xp: usize,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorEntry {
    Dense(Vec<Vec<Vec<f64>>>),
    Sparse(Vec<SparseEntry>),
}

/// `{"gens": [{"dense": W-shaped} | {"sparse": [{"y","x","xp","v"}]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    pub gens: Vec<GeneratorEntry>,
}

impl GeneratorFile {
    pub fn to_families(&self, d: usize, dy: usize) -> Result<Vec<MatrixFamily>> {
        self.gens
            .iter()
            .enumerate()
            .map(|(j, g)| match g {
                GeneratorEntry::Dense(w) => MatrixFamily::new(family_from_nested(w, d, dy, &format!("generator {j}"))?),
                GeneratorEntry::Sparse(entries) => {
                    let mut f = MatrixFamily::zeros(d, dy);
                    for e in entries {
                        if e.y >= dy || e.x >= d || e.xp >= d {
                            return Err(shape_error(format!("generator {j}: index ({}, {}, {}) out of range", e.y, e.x, e.xp)));
                        }
                        f.get_mut(e.y)[(e.x, e.xp)] += e.v;
                    }
                    Ok(f)
                }
            })
            .collect()
    }

    pub fn from_families(gens: &[MatrixFamily]) -> Self {
        GeneratorFile { gens: gens.iter().map(|g| GeneratorEntry::Dense(g.matrices().iter().map(rows_of).collect())).collect() }
    }
}

pub fn parse_generators(text: &str, d: usize, dy: usize) -> Result<Vec<MatrixFamily>> {
    let file: GeneratorFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_families(d, dy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndepGeneratorEntry {
    pub ga: Vec<Vec<f64>>,
    pub gb: Vec<Vec<f64>>,
}

/// `{"gens": [{"ga": d x d, "gb": dY x d}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndepGeneratorFile {
    pub gens: Vec<IndepGeneratorEntry>,
}

impl IndepGeneratorFile {
    pub fn to_parts(&self, d: usize, dy: usize) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        let mut ga = Vec::with_capacity(self.gens.len());
        let mut gb = Vec::with_capacity(self.gens.len());
        for (j, g) in self.gens.iter().enumerate() {
            ga.push(matrix_from_rows(&g.ga, d, d, &format!("generator {j} ga"))?);
            gb.push(matrix_from_rows(&g.gb, dy, d, &format!("generator {j} gb"))?);
        }
        Ok((ga, gb))
    }

    pub fn from_parts(ga: &[Matrix], gb: &[Matrix]) -> Self {
        IndepGeneratorFile { gens: ga.iter().zip(gb).map(|(a, b)| IndepGeneratorEntry { ga: rows_of(a), gb: rows_of(b) }).collect() }
    }
}
