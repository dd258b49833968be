//! Experiment documents: a TOML file with `output`, `[frequency]`, `[model]`
//! and a subcommand-specific `[run]` section. Unknown keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cocycle_lab::cocycle::CocycleSpec;
use cocycle_lab::linalg::Matrix;
use cocycle_lab::models::{
    block_cocycle_s, jacobi_cocycle, schrodinger_cocycle, scalar_block_s, JacobiParams, SchrodingerParams,
};
use cocycle_lab::reduction::random_low_rank_cocycle;
use cocycle_lab::torus::{Frequency, TorusPoint};
use cocycle_lab::trig::{MatrixTrigPoly, MatrixTrigTerm, TrigPoly, TrigTerm};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document<R> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub frequency: FrequencyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    pub run: R,
}

impl<R: DeserializeOwned> Document<R> {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

impl<R: Serialize> Document<R> {
    /// The resolved document as TOML.
    pub fn resolved(&self) -> String {
        toml::to_string(self).expect("configuration documents serialize to TOML")
    }
}

impl<R> Document<R> {
    pub fn frequency(&self) -> Result<Frequency, CliError> {
        Ok(Frequency::new(self.frequency.omega.clone())?)
    }

    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Validation("this subcommand needs a [model] section".into()))
    }

    pub fn torus_dim(&self) -> usize {
        self.frequency.omega.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub omega: Vec<f64>,
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        FrequencyConfig { omega: Frequency::golden().omega().to_vec() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarTerm {
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTerm {
    pub k: Vec<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Constant matrix, given by rows.
    Constant { matrix: Vec<Vec<f64>> },
    /// Matrix trigonometric polynomial.
    Trig { terms: Vec<MatrixTerm> },
    Schrodinger {
        potential: Vec<ScalarTerm>,
        lambda: f64,
        #[serde(default)]
        energy: f64,
    },
    /// `[[f - s, -delta], [delta, 0]]`
    ScalarBlockS {
        potential: Vec<ScalarTerm>,
        #[serde(default)]
        s: f64,
        delta: f64,
    },
    /// `[[M, delta N], [delta P, delta Q]]`
    BlockS { m: Vec<MatrixTerm>, n: Vec<MatrixTerm>, p: Vec<MatrixTerm>, q: Vec<MatrixTerm>, delta: f64 },
    Jacobi {
        w: Vec<MatrixTerm>,
        r: Vec<MatrixTerm>,
        f: Vec<MatrixTerm>,
        lambda: f64,
        #[serde(default)]
        energy: f64,
        #[serde(default)]
        regularized: bool,
    },
    FreeLaplacian {
        #[serde(default)]
        energy: f64,
    },
    /// Seeded random cocycle of rank `k < m`.
    LowRank { m: usize, k: usize, seed: u64 },
}

fn scalar_poly(d: usize, terms: &[ScalarTerm]) -> Result<TrigPoly, CliError> {
    let terms = terms.iter().map(|t| TrigTerm { k: t.k.clone(), cos: t.cos, sin: t.sin }).collect();
    Ok(TrigPoly::new(d, terms)?)
}

fn matrix_poly(d: usize, name: &str, terms: &[MatrixTerm]) -> Result<MatrixTrigPoly, CliError> {
    let shape = terms
        .iter()
        .flat_map(|t| [&t.cos, &t.sin])
        .flatten()
        .map(|rows| (rows.len(), rows.first().map_or(0, Vec::len)))
        .next()
        .ok_or_else(|| CliError::Validation(format!("{name}: needs at least one coefficient matrix")))?;
    let mat = |m: &Option<Vec<Vec<f64>>>| -> Result<Matrix, CliError> {
        match m {
            Some(rows) => Ok(Matrix::from_rows(rows).map_err(|e| CliError::Validation(format!("{name}: {e}")))?),
            None => Ok(Matrix::zeros(shape.0, shape.1)),
        }
    };
    let terms = terms
        .iter()
        .map(|t| Ok(MatrixTrigTerm { k: t.k.clone(), cos: mat(&t.cos)?, sin: mat(&t.sin)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    MatrixTrigPoly::new(d, shape.0, shape.1, terms).map_err(|e| CliError::Validation(format!("{name}: {e}")))
}

impl ModelConfig {
    /// The cocycle this model describes.
    pub fn cocycle(&self, freq: &Frequency) -> Result<CocycleSpec, CliError> {
        let d = freq.dim();
        let spec = match self {
            ModelConfig::Constant { matrix } => {
                CocycleSpec::constant(Matrix::from_rows(matrix)?, freq.clone())?
            }
            ModelConfig::Trig { terms } => CocycleSpec::trig(matrix_poly(d, "terms", terms)?, freq.clone())?,
            ModelConfig::Schrodinger { potential, lambda, energy } => schrodinger_cocycle(
                SchrodingerParams::new(scalar_poly(d, potential)?, *lambda, *energy),
                freq.clone(),
            )?,
            ModelConfig::ScalarBlockS { potential, s, delta } => {
                scalar_block_s(&scalar_poly(d, potential)?, *s, *delta, freq.clone())?
            }
            ModelConfig::BlockS { m, n, p, q, delta } => block_cocycle_s(
                *delta,
                matrix_poly(d, "m", m)?,
                matrix_poly(d, "n", n)?,
                matrix_poly(d, "p", p)?,
                matrix_poly(d, "q", q)?,
                freq.clone(),
            )?,
            ModelConfig::Jacobi { energy, regularized, .. } => {
                jacobi_cocycle(&self.jacobi(d)?, freq.clone(), *energy, *regularized)?
            }
            ModelConfig::FreeLaplacian { energy } => {
                jacobi_cocycle(&self.jacobi(d)?, freq.clone(), *energy, false)?
            }
            ModelConfig::LowRank { m, k, seed } => random_low_rank_cocycle(*m, *k, freq.clone(), *seed)?,
        };
        Ok(spec)
    }

    pub fn jacobi(&self, d: usize) -> Result<JacobiParams, CliError> {
        match self {
            ModelConfig::Jacobi { w, r, f, lambda, .. } => Ok(JacobiParams::new(
                matrix_poly(d, "w", w)?,
                matrix_poly(d, "r", r)?,
                matrix_poly(d, "f", f)?,
                *lambda,
            )?),
            ModelConfig::FreeLaplacian { .. } if d == 1 => Ok(JacobiParams::free_laplacian()),
            ModelConfig::FreeLaplacian { .. } => {
                Err(CliError::Validation("free-laplacian is defined on the circle (one frequency)".into()))
            }
            _ => Err(CliError::Validation("this subcommand needs a jacobi or free-laplacian model".into())),
        }
    }

    pub fn schrodinger(&self, d: usize) -> Result<(TrigPoly, f64), CliError> {
        match self {
            ModelConfig::Schrodinger { potential, lambda, .. } => Ok((scalar_poly(d, potential)?, *lambda)),
            _ => Err(CliError::Validation("this subcommand needs a schrodinger model".into())),
        }
    }
}

/// Either an explicit list or `{ from, to, count }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range { from: f64, to: f64, count: usize },
}

impl Values {
    pub fn resolve(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Values::List(v) => v.clone(),
            Values::Range { from, to, count } => match count {
                0 => Vec::new(),
                1 => vec![*from],
                c => (0..*c).map(|i| from + (to - from) * i as f64 / (c - 1) as f64).collect(),
            },
        };
        if v.is_empty() {
            return Err(CliError::Validation(format!("{name} is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Validation(format!("{name} has non-finite entries")));
        }
        Ok(v)
    }
}

pub fn phase_or_origin(phase: &Option<Vec<f64>>, d: usize) -> Result<TorusPoint, CliError> {
    match phase {
        Some(p) if p.len() == d => Ok(TorusPoint::new(p.clone())?),
        Some(p) => Err(CliError::Validation(format!("phase has {} coordinates, the torus has {d}", p.len()))),
        None => Ok(TorusPoint::origin(d)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    Grid,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationMode {
    Off,
    Default,
    Floor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainSource {
    Cocycle,
    Random,
}

fn yes() -> bool {
    true
}

fn default_phases() -> usize {
    64
}

fn default_samples() -> usize {
    10_000
}

fn grid_sampling() -> SamplingMode {
    SamplingMode::Grid
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeRun {
    pub n: u64,
    /// Grid points per axis; the default depends on the torus dimension.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default = "truncation_off")]
    pub truncation: TruncationMode,
    /// Floor `T` for `truncation = "floor"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default = "yes")]
    pub birkhoff: bool,
}

fn truncation_off() -> TruncationMode {
    TruncationMode::Off
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRun {
    pub n: u64,
    #[serde(default = "default_phases")]
    pub phases: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRun {
    pub ns: Vec<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "grid_sampling")]
    pub sampling: SamplingMode,
    /// Required for random sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub type UnProfileRun = SampleRun;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdtRun {
    pub ns: Vec<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "grid_sampling")]
    pub sampling: SamplingMode,
    /// Required for random sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fixed threshold; exclusive with `epsilon_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Threshold `n^(-epsilon_power)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_power: Option<f64>,
}

impl LdtRun {
    pub fn sample(&self) -> SampleRun {
        SampleRun { ns: self.ns.clone(), samples: self.samples, sampling: self.sampling, seed: self.seed }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipRun {
    pub ns: Vec<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "grid_sampling")]
    pub sampling: SamplingMode,
    /// Required for random sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub t: f64,
}

impl DipRun {
    pub fn sample(&self) -> SampleRun {
        SampleRun { ns: self.ns.clone(), samples: self.samples, sampling: self.sampling, seed: self.seed }
    }
}

fn thirty() -> usize {
    30
}

fn hundred() -> usize {
    100
}

fn decomposition_n() -> usize {
    256
}

fn decomposition_grid() -> usize {
    2048
}

fn exponent_a() -> f64 {
    cocycle_lab::reduction::DEFAULT_A
}

fn constant_c0() -> f64 {
    cocycle_lab::reduction::DEFAULT_C0
}

fn reference_phases() -> usize {
    32
}

fn selection_grid() -> usize {
    512
}

fn rank_tol() -> f64 {
    cocycle_lab::reduction::DEFAULT_RANK_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceRun {
    pub seed: u64,
    /// Length of the products in the identity checks.
    #[serde(default = "thirty")]
    pub n: usize,
    #[serde(default = "hundred")]
    pub phases: usize,
    #[serde(default = "decomposition_n")]
    pub decomposition_n: usize,
    #[serde(default = "decomposition_grid")]
    pub grid: usize,
    #[serde(default = "exponent_a")]
    pub a: f64,
    #[serde(default = "constant_c0")]
    pub c0: f64,
    #[serde(default = "reference_phases")]
    pub reference_phases: usize,
    #[serde(default = "selection_grid")]
    pub selection_grid: usize,
    #[serde(default = "rank_tol")]
    pub rank_tol: f64,
}

fn ap_c() -> f64 {
    cocycle_lab::avalanche::DEFAULT_AP_C
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApRun {
    pub source: ChainSource,
    #[serde(default = "ap_c")]
    pub c: f64,
    // source = "cocycle"
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_len: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Vec<f64>>,
    // source = "random"
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirkhoffRun {
    pub n0: u64,
    pub terms: Vec<u64>,
    #[serde(default)]
    pub phase: Option<Vec<f64>>,
    /// Grid points per axis for the space mean.
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcRun {
    pub t: f64,
    #[serde(default)]
    pub k_max: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerRun {
    pub energies: Values,
    pub n: u64,
    #[serde(default)]
    pub grid: Option<usize>,
}

fn sixteen() -> usize {
    16
}

fn eight() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiLeRun {
    pub energies: Values,
    pub n: u64,
    #[serde(default = "sixteen")]
    pub phases: usize,
    #[serde(default)]
    pub regularized: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsRun {
    pub energies: Values,
    pub n: usize,
    #[serde(default = "eight")]
    pub phases: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThoulessRun {
    pub energies: Values,
    pub n: usize,
    /// Scale of the Lyapunov side; defaults to `n`.
    #[serde(default)]
    pub le_n: Option<u64>,
    #[serde(default = "eight")]
    pub phases: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositivityRun {
    pub lambdas: Values,
    pub energies: Values,
    pub n: u64,
    #[serde(default = "sixteen")]
    pub phases: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptRun {
    /// Criterion numbers to run; all when empty.
    #[serde(default)]
    pub criteria: Vec<usize>,
}
