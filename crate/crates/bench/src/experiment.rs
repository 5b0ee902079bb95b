//! Solve runs with CSV traces and JSON summaries, singly or over a grid of
//! (method, ε, seed).

use std::fs;
use std::path::{Path, PathBuf};

use eot_core::{
    approx_ot, marginal_residuals, CostMatrix, Fidelity, Measure, Method, PipelineConfig, PipelineOutput,
    TraceRecord,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::grid::grid_cost;
use crate::idx::ImageSelector;

pub const CSV_COLUMNS: [&str; 11] = [
    "iter", "elapsed_s", "primal_f", "dual_phi", "gap", "row_l1", "col_l1", "row_l2", "col_l2", "rounded_cost",
    "sparsity",
];

/// Source, target and cost of one transport problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: Measure,
    pub b: Measure,
    pub cost: CostMatrix,
}

impl Instance {
    /// Two images of equal size with the pixel-grid cost.
    pub fn from_images(source: &ImageSelector, target: &ImageSelector, normalise_cost: bool) -> Result<Self> {
        let s = source.load()?;
        let t = target.load()?;
        if (s.height, s.width) != (t.height, t.width) {
            return Err(BenchError::Input(format!(
                "image sizes differ: {}x{} vs {}x{}",
                s.height, s.width, t.height, t.width
            )));
        }
        Ok(Self {
            a: s.measure,
            b: t.measure,
            cost: grid_cost(s.height, s.width, normalise_cost),
        })
    }

    /// Reads `{"a": [...], "b": [...], "cost": [[...], ...]}`; the measures
    /// are normalised to unit mass.
    pub fn from_json(path: &Path, normalise_cost: bool) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            a: Vec<f64>,
            b: Vec<f64>,
            cost: Vec<Vec<f64>>,
        }
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let raw: Raw = serde_json::from_str(&text)?;
        let m = raw.b.len();
        if raw.cost.len() != raw.a.len() || raw.cost.iter().any(|row| row.len() != m) {
            return Err(BenchError::Input(format!("cost must be {}x{m}", raw.a.len())));
        }
        let flat: Vec<f64> = raw.cost.into_iter().flatten().collect();
        let entries = Array2::from_shape_vec((raw.a.len(), m), flat).expect("shape checked above");
        let cost = CostMatrix::new(entries)?;
        Ok(Self {
            a: Measure::normalised(raw.a)?,
            b: Measure::normalised(raw.b)?,
            cost: if normalise_cost { cost.normalised() } else { cost },
        })
    }
}

/// Settings for one pipeline run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub method: Method,
    pub epsilon: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub fidelity: Fidelity,
    pub trace_every: usize,
    /// Record real elapsed time; off by default so that traces are reproducible byte for byte.
    pub wall_clock: bool,
}

impl RunSpec {
    pub fn new(method: Method, epsilon: f64) -> Self {
        Self {
            method,
            epsilon,
            seed: 0,
            max_iter: 100_000,
            fidelity: Fidelity::Corrected,
            trace_every: 1,
            wall_clock: false,
        }
    }

    pub fn file_stem(&self) -> String {
        format!("{}_eps{:e}_seed{}", self.method, self.epsilon, self.seed)
    }

    fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig::new(self.method, self.epsilon)
            .seed(self.seed)
            .max_iter(self.max_iter)
            .trace_every(self.trace_every)
            .fidelity(self.fidelity)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub epsilon: f64,
    pub seed: u64,
    pub fidelity: Fidelity,
    pub gamma: Option<f64>,
    /// `⟨C, X⟩` for the rounded plan.
    pub final_cost: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    /// Fraction of unrounded plan entries below 1e-21.
    pub sparsity: Option<f64>,
    /// Marginal ℓ1 residual of the rounded plan.
    pub rounded_marginal_l1: Option<f64>,
    pub trace_file: Option<String>,
    pub error: Option<String>,
}

#[derive(Serialize)]
struct CsvRow {
    iter: usize,
    elapsed_s: f64,
    primal_f: f64,
    dual_phi: f64,
    gap: f64,
    row_l1: f64,
    col_l1: f64,
    row_l2: f64,
    col_l2: f64,
    rounded_cost: f64,
    sparsity: f64,
}

pub fn write_trace<W: std::io::Write>(records: &[TraceRecord], wall_clock: bool, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.serialize(CsvRow {
            iter: r.iter,
            elapsed_s: if wall_clock { r.elapsed } else { 0.0 },
            primal_f: r.primal_f,
            dual_phi: r.dual_phi,
            gap: r.gap,
            row_l1: r.residuals.row_l1,
            col_l1: r.residuals.col_l1,
            row_l2: r.residuals.row_l2,
            col_l2: r.residuals.col_l2,
            rounded_cost: r.unregularised_cost,
            sparsity: r.sparsity,
        })?;
    }
    w.flush().map_err(|e| BenchError::io("<trace>", e))?;
    Ok(())
}

/// Runs the pipeline and writes `<stem>.csv` and `<stem>.json` into `out_dir`.
///
/// Solver failures are reported in the summary rather than returned; only
/// I/O problems are errors.
pub fn run_one(inst: &Instance, spec: &RunSpec, out_dir: &Path, stem: &str) -> Result<(RunSummary, Option<PipelineOutput>)> {
    fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let mut summary = RunSummary {
        method: spec.method,
        epsilon: spec.epsilon,
        seed: spec.seed,
        fidelity: spec.fidelity,
        gamma: None,
        final_cost: None,
        iterations: None,
        converged: false,
        sparsity: None,
        rounded_marginal_l1: None,
        trace_file: None,
        error: None,
    };
    let output = match approx_ot(&inst.a, &inst.b, &inst.cost, &spec.pipeline_config()) {
        Ok(out) => {
            let csv_path = out_dir.join(format!("{stem}.csv"));
            let file = fs::File::create(&csv_path).map_err(|e| BenchError::io(&csv_path, e))?;
            write_trace(&out.trace, spec.wall_clock, std::io::BufWriter::new(file))?;
            summary.gamma = Some(out.gamma);
            summary.final_cost = Some(out.cost);
            summary.iterations = Some(out.iterations);
            summary.converged = out.converged;
            summary.sparsity = Some(out.sparsity);
            summary.rounded_marginal_l1 = Some(marginal_residuals(&out.plan, &inst.a, &inst.b)?.l1());
            summary.trace_file = Some(format!("{stem}.csv"));
            Some(out)
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            None
        }
    };
    write_json(&out_dir.join(format!("{stem}.json")), &summary)?;
    Ok((summary, output))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| BenchError::io(path, e))
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_true() -> bool {
    true
}

fn default_max_iter() -> usize {
    100_000
}

fn default_trace_every() -> usize {
    1
}

/// JSON experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `<idx file>:<index>`.
    pub source: String,
    pub target: String,
    pub epsilons: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    #[serde(default = "default_true")]
    pub normalise_cost: bool,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub fidelity: Fidelity,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    #[serde(default)]
    pub wall_clock: bool,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(BenchError::Input("epsilons must not be empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(BenchError::Input(format!("epsilon {e} is not positive")));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Input("methods must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Input("seeds must not be empty".into()));
        }
        Ok(())
    }

    /// Every (method, ε, seed) run. Deterministic methods ignore the seed and
    /// run once, under the first seed.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut runs = Vec::new();
        for &method in &self.methods {
            for &epsilon in &self.epsilons {
                let seeds = if method.is_randomised() { &self.seeds[..] } else { &self.seeds[..1] };
                for &seed in seeds {
                    runs.push(RunSpec {
                        method,
                        epsilon,
                        seed,
                        max_iter: self.max_iter,
                        fidelity: self.fidelity,
                        trace_every: self.trace_every,
                        wall_clock: self.wall_clock,
                    });
                }
            }
        }
        runs
    }
}

/// Runs every configured combination and writes `summary.json` next to the
/// per-run files. A failing run is recorded and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let source: ImageSelector = cfg.source.parse()?;
    let target: ImageSelector = cfg.target.parse()?;
    let inst = Instance::from_images(&source, &target, cfg.normalise_cost)?;
    let mut summaries = Vec::new();
    for spec in cfg.runs() {
        let (summary, _) = run_one(&inst, &spec, &cfg.out, &spec.file_stem())?;
        summaries.push(summary);
    }
    write_json(&cfg.out.join("summary.json"), &summaries)?;
    Ok(summaries)
}
