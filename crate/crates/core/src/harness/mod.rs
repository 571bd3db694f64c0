//! Experiment configuration, suite execution and report emission.

pub mod specs;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::asymptotics::{core, oracle_core, CoreConfig};
use crate::constructions::{
    core_equality_experiment, core_stability_check, sufficiency_certificate, CertificateConfig, CertificateError,
    StabilityOutcome,
};
use crate::ideals::Ideal;
use crate::matrices::InfiniteMatrix;
use crate::regularity::{allen_check, cfo_check, leo_check, silverman_toeplitz_check, CheckConfig, Status, TestFamily, Verdict};
use crate::sequences::{corpus, corpus_labels, BoundedSequence};

pub use specs::{parse_set, IdealSpec, MatrixSpec, SequenceSpec, SpecError};

#[derive(Debug, Error)]
#[error("config error at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    St,
    Allen,
    Cfo,
    Leo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: String,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteCfg {
    /// Rows scanned by checkers and certificates.
    pub horizon: u64,
    /// Prefix length for cores.
    pub core_horizon: u64,
    pub grid: f64,
    pub tol: f64,
    pub theta: f64,
    pub seed: u64,
}

impl Default for SuiteCfg {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            core_horizon: 100_000,
            grid: 1e-2,
            tol: 1e-2,
            theta: crate::ideals::DEFAULT_THETA,
            seed: 0,
        }
    }
}

impl SuiteCfg {
    pub fn check(&self) -> CheckConfig {
        CheckConfig {
            horizon: self.horizon,
            tol: self.tol,
            grid: self.grid,
            theta: self.theta,
        }
    }

    pub fn core(&self) -> CoreConfig {
        CoreConfig {
            horizon: self.core_horizon,
            grid: self.grid,
            theta: self.theta,
            exact: true,
        }
    }

    pub fn certificate(&self) -> CertificateConfig {
        CertificateConfig {
            core: self.core(),
            check: self.check(),
            horizon: self.horizon,
            seed: self.seed,
            ..CertificateConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityItem {
    pub x: SequenceSpec,
    pub y: SequenceSpec,
    pub ideal: IdealSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateItem {
    pub matrix: MatrixSpec,
    pub sequence: SequenceSpec,
    pub epsilon: f64,
    pub ideal_i: IdealSpec,
    pub ideal_j: IdealSpec,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_pairs() -> Vec<(IdealSpec, IdealSpec)> {
    vec![(IdealSpec::Named("fin".into()), IdealSpec::Named("fin".into()))]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub matrices: Vec<MatrixSpec>,
    #[serde(default = "default_pairs")]
    pub ideal_pairs: Vec<(IdealSpec, IdealSpec)>,
    #[serde(default)]
    pub theorems: Vec<Theorem>,
    /// Corpus subset; empty means the whole corpus.
    #[serde(default)]
    pub corpus_labels: Vec<String>,
    #[serde(default)]
    pub core_equality: bool,
    /// Ideals for which the grid core is compared against the symbolic core.
    #[serde(default)]
    pub oracle_ideals: Vec<IdealSpec>,
    #[serde(default)]
    pub stability: Vec<StabilityItem>,
    #[serde(default)]
    pub certificates: Vec<CertificateItem>,
    /// Replaces the default test family (validated against each `I`).
    #[serde(default)]
    pub family: Option<TestFamily>,
    #[serde(default)]
    pub cfg: SuiteCfg,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::at(e.path().to_string(), e.inner()))?;
        if cfg.corpus_labels.is_empty() {
            cfg.corpus_labels = corpus_labels();
        }
        Ok(cfg)
    }

    pub fn from_file(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at(path, e))?;
        Self::from_json(&text)
    }
}

/// Config with every spec built.
struct Resolved {
    matrices: Vec<InfiniteMatrix>,
    pairs: Vec<(Ideal, Ideal)>,
    corpus: Vec<BoundedSequence>,
    oracle_ideals: Vec<Ideal>,
}

fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, ConfigError> {
    let needs_matrices = !cfg.theorems.is_empty() || cfg.core_equality;
    if needs_matrices && cfg.matrices.is_empty() {
        return Err(ConfigError::at("matrices", "empty matrix list"));
    }
    let nothing = cfg.theorems.is_empty()
        && !cfg.core_equality
        && cfg.oracle_ideals.is_empty()
        && cfg.stability.is_empty()
        && cfg.certificates.is_empty();
    if nothing {
        return Err(ConfigError::at(
            if cfg.matrices.is_empty() { "matrices" } else { "theorems" },
            "nothing to run",
        ));
    }
    if needs_matrices && cfg.ideal_pairs.is_empty() {
        return Err(ConfigError::at("ideal_pairs", "empty ideal pair list"));
    }
    if !(cfg.cfg.tol > 0.0 && cfg.cfg.grid > 0.0 && cfg.cfg.theta > 0.0 && cfg.cfg.theta < 1.0) {
        return Err(ConfigError::at("cfg", "tol, grid and theta must be positive (theta < 1)"));
    }
    if cfg.cfg.horizon < 100 || cfg.cfg.core_horizon < 100 {
        return Err(ConfigError::at("cfg.horizon", "horizons must be at least 100"));
    }
    let matrices = cfg
        .matrices
        .iter()
        .enumerate()
        .map(|(k, m)| m.build().map_err(|e| ConfigError::at(format!("matrices[{k}]"), e)))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(Ideal, Ideal)> = cfg
        .ideal_pairs
        .iter()
        .enumerate()
        .map(|(k, (i, j))| {
            Ok((
                i.build().map_err(|e| ConfigError::at(format!("ideal_pairs[{k}][0]"), e))?,
                j.build().map_err(|e| ConfigError::at(format!("ideal_pairs[{k}][1]"), e))?,
            ))
        })
        .collect::<Result<_, ConfigError>>()?;
    let all = corpus();
    let corpus = cfg
        .corpus_labels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let wanted = l.replace('\u{2212}', "-");
            all.iter()
                .find(|x| x.label() == wanted)
                .cloned()
                .ok_or_else(|| ConfigError::at(format!("corpus_labels[{k}]"), format!("unknown corpus entry {l:?}")))
        })
        .collect::<Result<_, _>>()?;
    let oracle_ideals = cfg
        .oracle_ideals
        .iter()
        .enumerate()
        .map(|(k, i)| i.build().map_err(|e| ConfigError::at(format!("oracle_ideals[{k}]"), e)))
        .collect::<Result<_, _>>()?;
    for (k, s) in cfg.stability.iter().enumerate() {
        s.x.build().map_err(|e| ConfigError::at(format!("stability[{k}].x"), e))?;
        s.y.build().map_err(|e| ConfigError::at(format!("stability[{k}].y"), e))?;
        s.ideal.build().map_err(|e| ConfigError::at(format!("stability[{k}].ideal"), e))?;
    }
    for (k, c) in cfg.certificates.iter().enumerate() {
        let p = |f: &str| format!("certificates[{k}].{f}");
        c.matrix.build().map_err(|e| ConfigError::at(p("matrix"), e))?;
        c.sequence.build().map_err(|e| ConfigError::at(p("sequence"), e))?;
        c.ideal_i.build().map_err(|e| ConfigError::at(p("ideal_i"), e))?;
        c.ideal_j.build().map_err(|e| ConfigError::at(p("ideal_j"), e))?;
    }
    if let Some(f) = cfg.family.as_ref().filter(|_| !cfg.theorems.is_empty()) {
        for (i, _) in &pairs {
            f.validate(i).map_err(|e| ConfigError::at("family", e))?;
        }
    }
    Ok(Resolved {
        matrices,
        pairs,
        corpus,
        oracle_ideals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemStatus {
    Satisfied,
    Violated,
    Inconclusive,
    Confirmed,
    Refuted,
    NotApplicable,
    Error,
}

impl From<Status> for ItemStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Satisfied => ItemStatus::Satisfied,
            Status::Violated => ItemStatus::Violated,
            Status::Inconclusive => ItemStatus::Inconclusive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemReport {
    pub id: String,
    pub kind: &'static str,
    pub status: ItemStatus,
    pub detail: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportBundle {
    pub name: String,
    /// The config with every default filled in.
    pub config: ExperimentConfig,
    pub items: Vec<ItemReport>,
    pub exit_code: i32,
    /// Wall-clock seconds per item; left out of serialized reports so that
    /// identical configs give identical bytes.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

/// `0` iff every item is Satisfied/Confirmed, `1` if any is Violated/Refuted, else `2`.
pub fn exit_code(items: &[ItemReport]) -> i32 {
    if items
        .iter()
        .any(|i| matches!(i.status, ItemStatus::Violated | ItemStatus::Refuted))
    {
        1
    } else if items
        .iter()
        .all(|i| matches!(i.status, ItemStatus::Satisfied | ItemStatus::Confirmed))
    {
        0
    } else {
        2
    }
}

enum Job {
    Check {
        theorem: Theorem,
        matrix: usize,
        pair: usize,
    },
    Equality {
        matrix: usize,
        pair: usize,
    },
    Oracle {
        ideal: usize,
    },
    Stability(usize),
    Certificate(usize),
}

fn verdict_item(id: String, theorem: Theorem, r: Result<Verdict, crate::regularity::CheckError>) -> ItemReport {
    let kind = match theorem {
        Theorem::St => "st",
        Theorem::Allen => "allen",
        Theorem::Cfo => "cfo",
        Theorem::Leo => "leo",
    };
    match r {
        Ok(v) => ItemReport {
            id,
            kind,
            status: v.status.into(),
            detail: serde_json::to_value(&v).expect("verdicts serialize"),
        },
        Err(e) => ItemReport {
            id,
            kind,
            status: ItemStatus::Error,
            detail: json!({ "error": e.to_string() }),
        },
    }
}

/// Runs a verdict checker for `theorem`.
pub fn run_check(
    theorem: Theorem,
    a: &InfiniteMatrix,
    i: &Ideal,
    j: &Ideal,
    family: &TestFamily,
    cfg: &CheckConfig,
) -> Result<Verdict, crate::regularity::CheckError> {
    match theorem {
        Theorem::St => silverman_toeplitz_check(a, i, j, family, cfg),
        Theorem::Allen => allen_check(a, family, cfg),
        Theorem::Cfo => cfo_check(a, i, j, family, cfg),
        Theorem::Leo => leo_check(a, i, j, family, cfg),
    }
}

fn run_job(job: &Job, cfg: &ExperimentConfig, r: &Resolved) -> ItemReport {
    let sc = &cfg.cfg;
    match *job {
        Job::Check { theorem, matrix, pair } => {
            let a = &r.matrices[matrix];
            let (i, j) = &r.pairs[pair];
            let (i, j) = if theorem == Theorem::Allen {
                (&Ideal::fin(), &Ideal::fin())
            } else {
                (i, j)
            };
            let family = cfg.family.clone().unwrap_or_else(|| TestFamily::default_for(i, sc.seed));
            let id = format!("{}/{}/{i}/{j}", format!("{theorem:?}").to_lowercase(), a.label());
            verdict_item(id, theorem, run_check(theorem, a, i, j, &family, &sc.check()))
        }
        Job::Equality { matrix, pair } => {
            let a = &r.matrices[matrix];
            let (i, j) = &r.pairs[pair];
            let rep = core_equality_experiment(a, i, j, &r.corpus, &sc.core());
            let status = if rep.errors().count() > 0 {
                ItemStatus::Inconclusive
            } else if rep.max_deviation <= sc.tol {
                ItemStatus::Satisfied
            } else {
                ItemStatus::Violated
            };
            ItemReport {
                id: format!("core_equality/{}/{i}/{j}", a.label()),
                kind: "core_equality",
                status,
                detail: serde_json::to_value(&rep).expect("reports serialize"),
            }
        }
        Job::Oracle { ideal } => {
            let i = &r.oracle_ideals[ideal];
            let core_cfg = sc.core();
            let rows: Vec<Value> = r
                .corpus
                .iter()
                .filter(|x| x.is_structured())
                .map(|x| {
                    let grid = core(x, i, &core_cfg);
                    let oracle = oracle_core(x, i);
                    let deviation = match (&grid, &oracle) {
                        (Ok(g), Ok(o)) => Some(g.deviation(o)),
                        _ => None,
                    };
                    json!({
                        "label": x.label(),
                        "core": grid.as_ref().ok(),
                        "oracle": oracle.as_ref().ok(),
                        "deviation": deviation,
                        "error": grid.err().map(|e| e.to_string()).or(oracle.err().map(|e| e.to_string())),
                    })
                })
                .collect();
            let devs: Vec<Option<f64>> = rows.iter().map(|v| v["deviation"].as_f64()).collect();
            let status = if devs.iter().any(|d| d.is_some_and(|d| d > sc.grid)) {
                ItemStatus::Violated
            } else if devs.iter().all(Option::is_some) {
                ItemStatus::Satisfied
            } else {
                ItemStatus::Inconclusive
            };
            ItemReport {
                id: format!("oracle/{i}"),
                kind: "oracle",
                status,
                detail: json!({ "ideal": i.to_string(), "pairs": rows }),
            }
        }
        Job::Stability(k) => {
            let s = &cfg.stability[k];
            let (x, y, i) = (
                s.x.build().expect("validated"),
                s.y.build().expect("validated"),
                s.ideal.build().expect("validated"),
            );
            let out = core_stability_check(&x, &y, &i, &sc.core(), sc.tol);
            let status = match out {
                StabilityOutcome::Confirmed { .. } => ItemStatus::Confirmed,
                StabilityOutcome::Refuted { .. } => ItemStatus::Refuted,
                StabilityOutcome::NotApplicable { .. } => ItemStatus::NotApplicable,
            };
            ItemReport {
                id: format!("stability/{}/{}/{i}", x.label(), y.label()),
                kind: "stability",
                status,
                detail: serde_json::to_value(&out).expect("outcomes serialize"),
            }
        }
        Job::Certificate(k) => {
            let c = &cfg.certificates[k];
            let a = c.matrix.build().expect("validated");
            let x = c.sequence.build().expect("validated");
            let (i, j) = (c.ideal_i.build().expect("validated"), c.ideal_j.build().expect("validated"));
            let id = format!("certificate/{}/{}/{i}/{j}/{}", a.label(), x.label(), c.epsilon);
            let out = sufficiency_certificate(&a, &x, c.epsilon, &i, &j, &sc.certificate());
            let (status, detail) = match out {
                Ok(cert) => (ItemStatus::Satisfied, serde_json::to_value(&cert).expect("certificates serialize")),
                Err(e) => (
                    match e {
                        CertificateError::CertificateViolation(_) => ItemStatus::Violated,
                        CertificateError::EmptyWitnessSet { .. } => ItemStatus::Inconclusive,
                        _ => ItemStatus::Error,
                    },
                    json!({ "error": e.to_string() }),
                ),
            };
            ItemReport {
                id,
                kind: "certificate",
                status,
                detail,
            }
        }
    }
}

/// Runs every item of the config; item failures are reported, not raised.
pub fn run_suite(config: &ExperimentConfig) -> Result<ReportBundle, ConfigError> {
    let resolved = resolve(config)?;
    let mut jobs = Vec::new();
    for matrix in 0..resolved.matrices.len() {
        for pair in 0..resolved.pairs.len() {
            for &theorem in &config.theorems {
                // Allen's conditions do not depend on the ideal pair
                if theorem == Theorem::Allen && pair > 0 {
                    continue;
                }
                jobs.push(Job::Check { theorem, matrix, pair });
            }
            if config.core_equality {
                jobs.push(Job::Equality { matrix, pair });
            }
        }
    }
    jobs.extend((0..resolved.oracle_ideals.len()).map(|ideal| Job::Oracle { ideal }));
    jobs.extend((0..config.stability.len()).map(Job::Stability));
    jobs.extend((0..config.certificates.len()).map(Job::Certificate));

    let timed: Vec<(ItemReport, f64)> = jobs
        .par_iter()
        .map(|job| {
            let start = Instant::now();
            let item = run_job(job, config, &resolved);
            (item, start.elapsed().as_secs_f64())
        })
        .collect();
    let timings = timed.iter().map(|(i, t)| (i.id.clone(), *t)).collect();
    let items: Vec<ItemReport> = timed.into_iter().map(|(i, _)| i).collect();
    let bundle = ReportBundle {
        name: config.name.clone(),
        config: config.clone(),
        exit_code: exit_code(&items),
        items,
        timings,
    };
    if let Some(out) = &config.output {
        write_report(&bundle, &out.path, out.format).map_err(|e| ConfigError::at("output.path", e))?;
    }
    Ok(bundle)
}

const CSV_HEADER: [&str; 10] = [
    "id",
    "kind",
    "status",
    "label",
    "core_x_lo",
    "core_x_hi",
    "core_Ax_lo",
    "core_Ax_hi",
    "deviation",
    "detail",
];

fn num(v: &Value) -> String {
    v.as_f64().map(|f| f.to_string()).unwrap_or_default()
}

/// One CSV row per item, and one per corpus entry for core-equality items.
pub fn to_csv(bundle: &ReportBundle) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for item in &bundle.items {
        let status = format!("{:?}", item.status);
        if item.kind == "core_equality" {
            for row in item.detail["rows"].as_array().into_iter().flatten() {
                w.write_record([
                    item.id.as_str(),
                    item.kind,
                    status.as_str(),
                    row["label"].as_str().unwrap_or_default(),
                    &num(&row["core_x"]["lo"]),
                    &num(&row["core_x"]["hi"]),
                    &num(&row["core_ax"]["lo"]),
                    &num(&row["core_ax"]["hi"]),
                    &num(&row["deviation"]),
                    row["error"].as_str().unwrap_or_default(),
                ])?;
            }
            continue;
        }
        let detail = match item.kind {
            "st" | "allen" | "cfo" | "leo" => item.detail["witness"].to_string(),
            _ => item.detail.get("error").map(|e| e.to_string()).unwrap_or_default(),
        };
        w.write_record([item.id.as_str(), item.kind, status.as_str(), "", "", "", "", "", "", detail.as_str()])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn render(bundle: &ReportBundle, format: OutputFormat) -> Result<String, ReportError> {
    Ok(match format {
        OutputFormat::Json => serde_json::to_string_pretty(bundle)? + "\n",
        OutputFormat::Csv => to_csv(bundle)?,
    })
}

pub fn write_report(bundle: &ReportBundle, path: &str, format: OutputFormat) -> Result<(), ReportError> {
    let text = render(bundle, format)?;
    std::fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

/// Ideals, matrices and corpus entries with their metadata.
pub fn list_catalog() -> String {
    let mut out = String::from("Ideals:\n");
    let ideals = [
        Ideal::fin(),
        Ideal::density_zero(),
        Ideal::erdos_ulam(-1.0).expect("valid exponent"),
        Ideal::summable(-1.0).expect("valid exponent"),
        Ideal::fin_oplus_full(crate::ideals::SetDescription::evens()).expect("infinite"),
        Ideal::countably_generated(vec![crate::ideals::SetDescription::progression(1, 3)]),
        Ideal::fin_times_empty(),
    ];
    for i in &ideals {
        let c = i.classify();
        out.push_str(&format!("  {i}: {} ({})\n", c.flag_names().join(", "), c.canonical_form));
    }
    out.push_str("Matrices:\n");
    for (name, desc) in [
        ("Cesaro", "row n averages x_0..x_n"),
        ("Identity", "single 1 on the diagonal"),
        ("Zero", "all entries 0"),
        ("2identity", "twice the identity"),
        ("rk-2n", "selection matrix h(n) = 2n"),
        ("rk-evens", "selection matrix h(n) = t_n for T = evens"),
        ("rk-const0", "selection matrix h(n) = 0"),
        ("random:<seed>:<index>", "seeded nonnegative matrix"),
    ] {
        out.push_str(&format!("  {name}: {desc}\n"));
    }
    out.push_str("Corpus:\n");
    for x in corpus() {
        let kind = if x.is_structured() { "structured" } else { "unstructured" };
        out.push_str(&format!("  {}: {kind}, bound {}\n", x.label(), x.bound()));
    }
    out
}
