use maxassoc::optimizer::SolveDiagnostics;
use maxassoc::oracle::TrueSolution;
use maxassoc::simlab::ScenarioSummary;
use nalgebra::DVector;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Coefficient {
    pub variable: String,
    pub value: f64,
}

pub fn named(names: &[String], v: &DVector<f64>) -> Vec<Coefficient> {
    names
        .iter()
        .zip(v.iter())
        .map(|(n, &value)| Coefficient {
            variable: n.clone(),
            value,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Hyperparameters {
    pub alpha_a: f64,
    pub bound_a: f64,
    pub alpha_b: f64,
    pub bound_b: f64,
    /// Whether the bounds came from the hyperparameter search.
    pub searched: bool,
}

#[derive(Debug, Serialize)]
pub struct OrderReport {
    pub order: usize,
    pub association: f64,
    pub a: Vec<Coefficient>,
    pub b: Vec<Coefficient>,
    pub nonzeros_a: usize,
    pub nonzeros_b: usize,
    pub hyperparameters: Hyperparameters,
    pub converged: bool,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Debug, Serialize)]
pub struct TestReport {
    pub n_test: usize,
    pub residual_score: f64,
    pub trimmed_residual_score: f64,
    pub trim: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub estimator: String,
    pub seed: u64,
    pub n_train: usize,
    pub p: usize,
    pub q: usize,
    pub converged: bool,
    pub orders: Vec<OrderReport>,
    pub failure: Option<String>,
    pub test: Option<TestReport>,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub source: String,
    pub p: usize,
    pub q: usize,
    pub rhos: Vec<f64>,
    pub a_vectors: Vec<Vec<f64>>,
    pub b_vectors: Vec<Vec<f64>>,
}

impl OracleReport {
    pub fn new(source: String, p: usize, q: usize, sol: &TrueSolution) -> Self {
        let plain = |vs: &[DVector<f64>]| vs.iter().map(|v| v.iter().copied().collect()).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            command: "oracle",
            source,
            p,
            q,
            rhos: sol.rhos.clone(),
            a_vectors: plain(&sol.a_vectors),
            b_vectors: plain(&sol.b_vectors),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub setting: String,
    pub estimator: String,
    pub n: usize,
    pub contamination_rate: f64,
    pub contamination_shift: f64,
    pub distribution: String,
    pub seed: u64,
    pub penalties: String,
    pub summary: ScenarioSummary,
}
