use super::{BenchError, BenchmarkSuite, Category, SuiteCase};
use crate::agents::query::normalize;
use crate::agents::{run_pipeline, Agents, GraspOutcome, OutcomeStatus, PipelineConfig};
use crate::geometry::{grasp_success, within_workspace, GraspRect};
use crate::lexicon::Lexicon;
use crate::scene::Scene;
use crate::toolset::{MockConfig, MockTools, ToolBackend, Tools};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Runner {
    Loop,
    Baseline,
}

impl FromStr for Runner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loop" => Ok(Runner::Loop),
            "baseline" => Ok(Runner::Baseline),
            _ => Err(format!("unknown runner {s:?}; expected loop or baseline")),
        }
    }
}

/// Detect once with the query's last content word and take the top grasp.
pub fn single_pass_baseline(scene: &Scene, query: &str, tools: &dyn ToolBackend) -> GraspOutcome {
    let lex = Lexicon::builtin();
    let normalized = normalize(query);
    let noun = normalized
        .split(' ')
        .rev()
        .find(|w| !w.is_empty() && !lex.is_stopword(w));
    let not_found = GraspOutcome {
        grasp: None,
        reachable: None,
        status: OutcomeStatus::NotFound,
        iterations: 1,
        history: Vec::new(),
    };
    let Some(noun) = noun else { return not_found };
    let image = scene.full_patch();
    let Some(top) = tools
        .find(&image, noun)
        .ok()
        .and_then(|d| d.into_iter().next())
    else {
        return not_found;
    };
    let Some(grasp) = tools
        .grasp_detection(&top.patch)
        .ok()
        .and_then(|g| g.into_iter().next())
    else {
        return not_found;
    };
    let reachable = within_workspace(&grasp, &scene.workspace);
    GraspOutcome {
        grasp: Some(grasp),
        reachable: Some(reachable),
        status: if reachable {
            OutcomeStatus::Success
        } else {
            OutcomeStatus::Unreachable
        },
        iterations: 1,
        history: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub runner: Runner,
    pub tools: MockConfig,
    pub pipeline: PipelineConfig,
    /// Worker threads; 1 evaluates in order on the calling thread.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            runner: Runner::Loop,
            tools: MockConfig::default(),
            pipeline: PipelineConfig::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: u32,
    pub category: Category,
    pub status: OutcomeStatus,
    pub iterations: u32,
    pub success: bool,
    pub seconds: f64,
    pub grasp: Option<GraspRect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub cases: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runner: Runner,
    pub cases: usize,
    pub successes: usize,
    pub overall_rate: f64,
    pub categories: BTreeMap<Category, CategoryStats>,
    pub harmonic_mean: f64,
    pub seconds_mean: f64,
    pub seconds_std: f64,
    pub records: Vec<CaseRecord>,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "runner={:?} cases={} success_rate={:.4} harmonic_mean={:.4} time={:.4}±{:.4}s\n",
            self.runner,
            self.cases,
            self.overall_rate,
            self.harmonic_mean,
            self.seconds_mean,
            self.seconds_std
        );
        for (c, st) in &self.categories {
            let _ = writeln!(
                s,
                "  {c:<16} {:>4}/{:<4} {:.4}",
                st.successes, st.cases, st.rate
            );
        }
        s
    }
}

/// `n / Σ 1/r`; zero when any rate is zero or there are no rates.
pub fn harmonic_mean(rates: &[f64]) -> f64 {
    if rates.is_empty() || rates.iter().any(|r| *r <= 0.0) {
        return 0.0;
    }
    rates.len() as f64 / rates.iter().map(|r| 1.0 / r).sum::<f64>()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn evaluate_case(sc: &SuiteCase, config: &EvalConfig) -> Result<CaseRecord, BenchError> {
    let scene = Arc::new(sc.scene.clone());
    let tools = MockTools::new(scene.clone(), config.tools);
    let start = Instant::now();
    let outcome = match config.runner {
        Runner::Loop => {
            let agents = Agents::scripted(scene.clone());
            run_pipeline(
                &scene,
                &sc.case.query,
                &agents,
                &tools,
                &config.pipeline,
                None,
            )
            .map_err(|e| BenchError::Eval(format!("case {}: {e}", sc.case.case_id)))?
        }
        Runner::Baseline => single_pass_baseline(&scene, &sc.case.query, &tools),
    };
    let seconds = start.elapsed().as_secs_f64();
    let success = outcome.status == OutcomeStatus::Success
        && match &outcome.grasp {
            Some(g) => {
                grasp_success(g, &sc.case.truths).map_err(|e| BenchError::Eval(e.to_string()))?
            }
            None => false,
        };
    Ok(CaseRecord {
        case_id: sc.case.case_id,
        category: sc.case.category,
        status: outcome.status,
        iterations: outcome.iterations,
        success,
        seconds,
        grasp: outcome.grasp,
    })
}

pub fn evaluate(suite: &BenchmarkSuite, config: &EvalConfig) -> Result<EvalReport, BenchError> {
    if suite.cases.is_empty() {
        return Err(BenchError::Eval("the suite is empty".into()));
    }
    if config.jobs == 0 {
        return Err(BenchError::InvalidConfig("jobs must be at least 1".into()));
    }
    let mut records: Vec<CaseRecord> = if config.jobs == 1 {
        suite
            .cases
            .iter()
            .map(|c| evaluate_case(c, config))
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| BenchError::Eval(e.to_string()))?;
        pool.install(|| {
            suite
                .cases
                .par_iter()
                .map(|c| evaluate_case(c, config))
                .collect::<Result<_, _>>()
        })?
    };
    records.sort_by_key(|r| r.case_id);

    let mut categories: BTreeMap<Category, CategoryStats> = BTreeMap::new();
    for r in &records {
        let st = categories.entry(r.category).or_insert(CategoryStats {
            cases: 0,
            successes: 0,
            rate: 0.0,
        });
        st.cases += 1;
        st.successes += r.success as usize;
    }
    for st in categories.values_mut() {
        st.rate = st.successes as f64 / st.cases as f64;
    }
    let rates: Vec<f64> = categories.values().map(|s| s.rate).collect();
    let successes = records.iter().filter(|r| r.success).count();
    let seconds: Vec<f64> = records.iter().map(|r| r.seconds).collect();
    let (seconds_mean, seconds_std) = mean_std(&seconds);
    Ok(EvalReport {
        runner: config.runner,
        cases: records.len(),
        successes,
        overall_rate: successes as f64 / records.len() as f64,
        harmonic_mean: harmonic_mean(&rates),
        categories,
        seconds_mean,
        seconds_std,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    /// `.json` selects JSON; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ExportFormat::Json,
            _ => ExportFormat::Csv,
        }
    }
}

pub const CSV_HEADER: &str = "case_id,category,status,iterations,success,seconds";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.case_id, r.category, r.status, r.iterations, r.success, r.seconds
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization is infallible");
        text.push('\n');
        text
    }
}

pub fn export_report(
    report: &EvalReport,
    path: &Path,
    format: ExportFormat,
) -> Result<(), BenchError> {
    let text = match format {
        ExportFormat::Csv => report.to_csv(),
        ExportFormat::Json => report.to_json(),
    };
    std::fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}
