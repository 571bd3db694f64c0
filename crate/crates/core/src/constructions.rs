//! Selection matrices, identity perturbations, core stability, sufficiency
//! certificates and core-equality experiments.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::asymptotics::{core, core_of_samples, AsymptoticsError, CoreConfig, CoreInterval, CoreMethod};
use crate::ideals::{Ideal, Predicate, SetDescription};
use crate::index_map::IndexMap;
use crate::matrices::{identity, matrix_sum, norm_estimate, pos_neg_split, transform_prefix, InfiniteMatrix, Row};
use crate::regularity::{leo_check, row_functional, CheckConfig, CheckError, RowFunctional, Status, TestFamily};
use crate::sequences::{BoundedSequence, Level};

/// Row `n` is a single `1` in column `h(n)`.
pub fn rk_matrix(h: IndexMap) -> InfiniteMatrix {
    let label = format!("rk(h(n)={})", h.label());
    InfiniteMatrix::new(label, Some(1.0), move |n| Row::from_entries([(h.apply(n), 1.0)]))
}

/// `A + Id`.
pub fn perturb_identity(a: &InfiniteMatrix) -> InfiniteMatrix {
    matrix_sum(a, &identity())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum StabilityOutcome {
    Confirmed {
        core_x: CoreInterval,
        core_y: CoreInterval,
        deviation: f64,
    },
    Refuted {
        core_x: CoreInterval,
        core_y: CoreInterval,
        deviation: f64,
    },
    NotApplicable {
        reason: String,
    },
}

/// When `I-lim (x − y) = 0` (within `tol`), compares the two cores endpointwise.
pub fn core_stability_check(
    x: &BoundedSequence,
    y: &BoundedSequence,
    ideal: &Ideal,
    cfg: &CoreConfig,
    tol: f64,
) -> StabilityOutcome {
    let diff = x.sub(y);
    let d = match core(&diff, ideal, cfg) {
        Ok(d) => d,
        Err(e) => {
            return StabilityOutcome::NotApplicable {
                reason: format!("limit of x - y not estimable: {e}"),
            }
        }
    };
    if d.lo.abs() > tol || d.hi.abs() > tol {
        return StabilityOutcome::NotApplicable {
            reason: format!("{ideal}-core of x - y is [{}, {}], not 0", d.lo, d.hi),
        };
    }
    let (cx, cy) = match (core(x, ideal, cfg), core(y, ideal, cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return StabilityOutcome::NotApplicable {
                reason: format!("core not estimable: {e}"),
            }
        }
    };
    let deviation = cx.deviation(&cy);
    if deviation <= tol {
        StabilityOutcome::Confirmed {
            core_x: cx,
            core_y: cy,
            deviation,
        }
    } else {
        StabilityOutcome::Refuted {
            core_x: cx,
            core_y: cy,
            deviation,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("precondition failed: {0}")]
    PreconditionViolated(String),
    #[error("no row below {horizon} lies in {which}")]
    EmptyWitnessSet { which: &'static str, horizon: u64 },
    #[error("certificate inequality failed: {0}")]
    CertificateViolation(String),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertificateConfig {
    pub core: CoreConfig,
    pub check: CheckConfig,
    /// Rows `n < horizon` are scanned for `S` and `S′`.
    pub horizon: u64,
    /// Slack allowed for floating point in each inequality.
    pub slack: f64,
    pub seed: u64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            core: CoreConfig::default(),
            check: CheckConfig::default(),
            horizon: 10_000,
            slack: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// `I-limsup x` of the original sequence.
    pub eta: f64,
    /// Shift applied so the limsup is positive (0 if none was needed).
    pub kappa: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `E = {k : x_k ≥ η − δ}` and `E′ = {k : x_k ≤ η + δ}` (translated sequence).
    pub e: String,
    pub e_prime: String,
    #[serde(skip)]
    pub e_set: SetDescription,
    #[serde(skip)]
    pub e_prime_set: SetDescription,
    #[serde(skip)]
    pub s: Vec<u64>,
    #[serde(skip)]
    pub s_prime: Vec<u64>,
    pub s_count: usize,
    pub s_prime_count: usize,
    /// `min_{n∈S} (A_n x − (η − ε))`.
    pub lower_margin: f64,
    /// `min_{n∈S′} ((η + ε) − A_n x)`.
    pub upper_margin: f64,
    /// `max_{n∈S∪S′} Σ_k a⁻_{n,k}`.
    pub max_negative_mass: f64,
    /// `max_{n∈S} Σ_{k∉E} a⁺_{n,k}` and the same over `S′` with `E′`.
    pub max_outside_mass: f64,
    pub max_outside_mass_prime: f64,
    pub horizon: u64,
}

impl Certificate {
    pub fn two_delta(&self) -> f64 {
        2.0 * self.delta
    }

    pub fn bounds_hold(&self, slack: f64) -> bool {
        let b = self.two_delta() + slack;
        self.max_negative_mass <= b && self.max_outside_mass <= b && self.max_outside_mass_prime <= b
    }
}

/// Level-set description of `{k : pred(x_k)}` when `x` is structured.
fn level_preimage(x: &BoundedSequence, label: String, pred: impl Fn(f64) -> bool + Send + Sync + 'static) -> SetDescription {
    match x.levels() {
        Some(levels) => {
            let parts: Vec<SetDescription> = levels
                .iter()
                .filter(|l: &&Level| pred(l.value))
                .map(|l| l.indices.clone())
                .collect();
            if parts.is_empty() {
                SetDescription::empty()
            } else {
                SetDescription::union_all(parts)
            }
        }
        None => {
            let x = x.clone();
            SetDescription::predicate(Predicate::custom(label, move |k| pred(x.eval(k))))
        }
    }
}

/// Quantitative form of the sufficiency argument: on the rows where the
/// matrix concentrates near the extreme level sets, `A_n x` is `ε`-close to `η`.
pub fn sufficiency_certificate(
    a: &InfiniteMatrix,
    x: &BoundedSequence,
    epsilon: f64,
    i: &Ideal,
    j: &Ideal,
    cfg: &CertificateConfig,
) -> Result<Certificate, CertificateError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CertificateError::InvalidEpsilon(epsilon));
    }
    let family = TestFamily::default_for(i, cfg.seed);
    let verdict = leo_check(a, i, j, &family, &cfg.check)?;
    if verdict.status == Status::Violated {
        let names: Vec<&str> = verdict.violated_conditions().map(|c| c.name.as_str()).collect();
        return Err(CertificateError::PreconditionViolated(format!(
            "{} violates {}",
            a.label(),
            names.join(", ")
        )));
    }
    let eta = core(x, i, &cfg.core)?.hi;
    let kappa = if eta > 0.0 { 0.0 } else { x.bound() + 1.0 };
    let xt = if kappa == 0.0 { x.clone() } else { x.affine(1.0, kappa) };
    let eta_t = eta + kappa;
    let norm = xt.bound();
    let delta = (epsilon / (2.0 + eta_t + 4.0 * norm)).min(1.0);

    let (lo_cut, hi_cut) = (eta_t - delta, eta_t + delta);
    let e = level_preimage(&xt, format!("x >= {lo_cut}"), move |v| v >= lo_cut);
    let e_prime = level_preimage(&xt, format!("x <= {hi_cut}"), move |v| v <= hi_cut);

    let n = cfg.horizon;
    let (plus, minus) = pos_neg_split(a);
    let on = |m: &InfiniteMatrix, set: Option<&SetDescription>, absolute: bool| {
        row_functional(
            m,
            &RowFunctional {
                set: set.cloned(),
                absolute,
            },
            n,
        )
    };
    let abs_total = on(a, None, true);
    let plus_total = on(&plus, None, false);
    let minus_total = on(&minus, None, false);
    let plus_e = on(&plus, Some(&e), false);
    let plus_e_prime = on(&plus, Some(&e_prime), false);
    let ax = transform_prefix(a, &xt, n);

    let concentrated = |mass: &[f64], k: usize| 1.0 - delta <= mass[k] && abs_total[k] <= 1.0 + delta;
    let s: Vec<u64> = (0..n).filter(|&k| concentrated(&plus_e, k as usize)).collect();
    let s_prime: Vec<u64> = (0..n).filter(|&k| concentrated(&plus_e_prime, k as usize)).collect();
    if s.is_empty() {
        return Err(CertificateError::EmptyWitnessSet { which: "S", horizon: n });
    }
    if s_prime.is_empty() {
        return Err(CertificateError::EmptyWitnessSet { which: "S'", horizon: n });
    }

    let min_over = |idx: &[u64], f: &dyn Fn(usize) -> f64| idx.iter().map(|&k| f(k as usize)).fold(f64::INFINITY, f64::min);
    let max_over = |idx: &[u64], f: &dyn Fn(usize) -> f64| idx.iter().map(|&k| f(k as usize)).fold(0.0, f64::max);
    let lower_margin = min_over(&s, &|k| ax[k] - (eta_t - epsilon));
    let upper_margin = min_over(&s_prime, &|k| (eta_t + epsilon) - ax[k]);
    let max_negative_mass = max_over(&s, &|k| minus_total[k]).max(max_over(&s_prime, &|k| minus_total[k]));
    let max_outside_mass = max_over(&s, &|k| plus_total[k] - plus_e[k]);
    let max_outside_mass_prime = max_over(&s_prime, &|k| plus_total[k] - plus_e_prime[k]);

    let cert = Certificate {
        eta,
        kappa,
        epsilon,
        delta,
        e: e.to_string(),
        e_prime: e_prime.to_string(),
        e_set: e,
        e_prime_set: e_prime,
        s_count: s.len(),
        s_prime_count: s_prime.len(),
        s,
        s_prime,
        lower_margin,
        upper_margin,
        max_negative_mass,
        max_outside_mass,
        max_outside_mass_prime,
        horizon: n,
    };
    if cert.lower_margin < -cfg.slack || cert.upper_margin < -cfg.slack {
        return Err(CertificateError::CertificateViolation(format!(
            "margins {} / {} for {} at epsilon {epsilon}",
            cert.lower_margin,
            cert.upper_margin,
            x.label()
        )));
    }
    if !cert.bounds_hold(cfg.slack) {
        return Err(CertificateError::CertificateViolation(format!(
            "mass bounds {} / {} / {} exceed 2*delta = {}",
            cert.max_negative_mass,
            cert.max_outside_mass,
            cert.max_outside_mass_prime,
            cert.two_delta()
        )));
    }
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityRow {
    pub label: String,
    pub core_x: Option<CoreInterval>,
    pub core_ax: Option<CoreInterval>,
    pub deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityReport {
    pub matrix: String,
    pub ideal_i: String,
    pub ideal_j: String,
    pub rows: Vec<EqualityRow>,
    /// Largest deviation over rows that produced both cores.
    pub max_deviation: f64,
}

impl EqualityReport {
    pub fn row(&self, label: &str) -> Option<&EqualityRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn errors(&self) -> impl Iterator<Item = &EqualityRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

/// `core_{Ax}(J)` of the materialized transform.
pub fn transformed_core(a: &InfiniteMatrix, x: &BoundedSequence, j: &Ideal, cfg: &CoreConfig) -> Result<CoreInterval, AsymptoticsError> {
    if a.is_identity() {
        return core(x, j, cfg);
    }
    let ax = transform_prefix(a, x, cfg.horizon);
    let bound = norm_estimate(a, cfg.horizon).sup_rowsum * x.bound();
    core_of_samples(&ax, bound, j, cfg)
}

/// Compares `core_x(I)` with `core_{Ax}(J)` over a corpus; rows sorted by label.
pub fn core_equality_experiment(
    a: &InfiniteMatrix,
    i: &Ideal,
    j: &Ideal,
    corpus: &[BoundedSequence],
    cfg: &CoreConfig,
) -> EqualityReport {
    let mut rows: Vec<EqualityRow> = corpus
        .par_iter()
        .map(|x| {
            let cx = core(x, i, cfg);
            let cax = transformed_core(a, x, j, cfg);
            let error = match (&cx, &cax) {
                (Err(e), _) => Some(format!("core_x: {e}")),
                (_, Err(e)) => Some(format!("core_Ax: {e}")),
                _ => None,
            };
            let (cx, cax) = (cx.ok(), cax.ok());
            EqualityRow {
                label: x.label().to_string(),
                deviation: cx.zip(cax).map(|(p, q)| p.deviation(&q)),
                core_x: cx,
                core_ax: cax,
                error,
            }
        })
        .collect();
    rows.sort_by(|p, q| p.label.cmp(&q.label));
    let max_deviation = rows.iter().filter_map(|r| r.deviation).fold(0.0, f64::max);
    EqualityReport {
        matrix: a.label().to_string(),
        ideal_i: i.to_string(),
        ideal_j: j.to_string(),
        rows,
        max_deviation,
    }
}

/// Grid method tag for reports that mix exact and numeric cores.
pub fn method_name(m: &CoreMethod) -> &'static str {
    match m {
        CoreMethod::Exact => "exact",
        CoreMethod::Grid { .. } => "grid",
        CoreMethod::Numeric { .. } => "numeric",
    }
}
