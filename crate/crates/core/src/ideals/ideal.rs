use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::set::{PrefixSet, SetDescription, SetError};

/// Horizon used by [`Ideal::membership`] when a set needs the numeric estimator.
pub const DEFAULT_MEMBERSHIP_HORIZON: u64 = 100_000;
pub const DEFAULT_THETA: f64 = 1e-3;
/// Partial-sum cutoff of the summable-ideal divergence heuristic.
pub const SUMMABLE_DIVERGENCE_CUTOFF: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdealError {
    #[error("weights (n+1)^{0} are summable; the ideal would not contain Fin properly")]
    SummableWeights(f64),
    #[error("support set {0} is finite")]
    FiniteSupport(String),
    #[error("positivity threshold must be positive, got {0}")]
    Threshold(f64),
    #[error(transparent)]
    Set(#[from] SetError),
}

/// Generators of a countably generated ideal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generators {
    /// Finitely many generating sets (together with Fin).
    Sets(Vec<SetDescription>),
    /// Columns `{⟨i, j⟩ : i ≤ k}` of the Cantor pairing; yields a copy of Fin×{∅}.
    PairingColumns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdealKind {
    Fin,
    DensityZero,
    /// Weighted density zero with weights `h_n = (n+1)^exponent`, `exponent ≥ -1`.
    ErdosUlam { exponent: f64 },
    /// `Σ_{n∈S} (n+1)^exponent < ∞`, `exponent ≥ -1`.
    Summable { exponent: f64 },
    /// `{S : S ∩ T finite}`.
    FinOplusFull { t: SetDescription },
    CountablyGenerated { generators: Generators },
}

#[derive(Serialize, Deserialize)]
struct IdealRepr {
    #[serde(flatten)]
    kind: IdealKind,
    #[serde(default = "default_theta")]
    theta: f64,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

/// An ideal on ω from the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IdealRepr", into = "IdealRepr")]
pub struct Ideal {
    kind: IdealKind,
    theta: f64,
}

impl TryFrom<IdealRepr> for Ideal {
    type Error = IdealError;

    fn try_from(repr: IdealRepr) -> Result<Self, Self::Error> {
        Ideal::new(repr.kind)?.with_theta(repr.theta)
    }
}

impl From<Ideal> for IdealRepr {
    fn from(ideal: Ideal) -> Self {
        IdealRepr {
            kind: ideal.kind,
            theta: ideal.theta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Membership {
    InIdeal,
    /// Not in the ideal, and the complement is not in the ideal either.
    Positive,
    /// The complement is in the ideal (so the set is positive as well).
    InDualFilter,
    Inconclusive,
}

impl Membership {
    /// `InDualFilter` sets are positive too.
    pub fn is_positive(self) -> bool {
        matches!(self, Membership::Positive | Membership::InDualFilter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub membership: Membership,
    /// `false` when the numeric prefix estimator produced the answer.
    pub exact: bool,
}

/// Classification flags recorded for each catalog ideal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassificationReport {
    pub is_p_ideal: bool,
    pub is_p_plus_ideal: bool,
    pub is_tall: bool,
    pub is_nowhere_tall: bool,
    pub is_countably_generated: bool,
    pub canonical_form: String,
}

impl ClassificationReport {
    /// Names of the flags that hold, in a fixed order.
    pub fn flag_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.is_p_ideal {
            out.push("P-ideal");
        }
        if self.is_p_plus_ideal {
            out.push("P+-ideal");
        }
        if self.is_tall {
            out.push("tall");
        }
        if self.is_nowhere_tall {
            out.push("nowhere tall");
        }
        if self.is_countably_generated {
            out.push("countably generated");
        }
        out
    }
}

/// Column of `n` under the Cantor pairing `⟨i, j⟩ = (i+j)(i+j+1)/2 + j`.
pub fn pairing_column(n: u64) -> u64 {
    let w = (crate::numeric::isqrt(8 * n + 1) - 1) / 2;
    let t = w * (w + 1) / 2;
    let j = n - t;
    w - j
}

/// Cumulative weights `(n+1)^exponent` for a numeric estimate.
struct WeightTable {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WeightTable {
    fn new(exponent: f64, horizon: u64) -> Self {
        let weights: Vec<f64> = (0..horizon).map(|n| ((n + 1) as f64).powf(exponent)).collect();
        let mut cumulative = Vec::with_capacity(weights.len() + 1);
        let mut acc = crate::numeric::CompensatedSum::new();
        cumulative.push(0.0);
        for &w in &weights {
            acc.add(w);
            cumulative.push(acc.value());
        }
        Self { weights, cumulative }
    }
}

/// Numeric smallness test on index prefixes for a fixed ideal and horizon.
///
/// Built once and reused for many index sets (one per grid cell).
pub struct SmallnessEstimator<'a> {
    ideal: &'a Ideal,
    horizon: u64,
    theta: f64,
    weights: Option<WeightTable>,
}

impl<'a> SmallnessEstimator<'a> {
    pub fn new(ideal: &'a Ideal, horizon: u64, theta: f64) -> Self {
        let weights = match ideal.kind {
            IdealKind::ErdosUlam { exponent } | IdealKind::Summable { exponent } => {
                Some(WeightTable::new(exponent, horizon))
            }
            _ => None,
        };
        Self {
            ideal,
            horizon,
            theta,
            weights,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// `Some(true)`: looks like a member of the ideal; `Some(false)`: looks positive;
    /// `None`: the estimate falls in the uncertainty band.
    pub fn looks_small(&self, prefix: &PrefixSet) -> Option<bool> {
        debug_assert_eq!(prefix.horizon, self.horizon);
        let band = |estimate: f64| {
            if estimate > self.theta {
                Some(false)
            } else if estimate < self.theta / 10.0 {
                Some(true)
            } else {
                None
            }
        };
        match &self.ideal.kind {
            IdealKind::Fin => Some(prefix.tail().is_empty()),
            IdealKind::DensityZero => band(prefix.running_ratio_range().1),
            IdealKind::ErdosUlam { .. } => {
                let w = self.weights.as_ref().expect("weights built for weighted ideals");
                band(prefix.weighted_ratio_range(&w.weights, &w.cumulative).1)
            }
            IdealKind::Summable { .. } => {
                let w = self.weights.as_ref().expect("weights built for weighted ideals");
                let total: f64 = prefix.members.iter().map(|&m| w.weights[m as usize]).sum();
                if total > SUMMABLE_DIVERGENCE_CUTOFF {
                    return Some(false);
                }
                let tail: f64 = prefix.tail().iter().map(|&m| w.weights[m as usize]).sum();
                let window = w.cumulative[self.horizon as usize] - w.cumulative[prefix.window_start() as usize];
                if tail < window * self.theta / 10.0 {
                    Some(true)
                } else {
                    None
                }
            }
            IdealKind::FinOplusFull { t } => Some(!prefix.tail().iter().any(|&m| t.contains(m))),
            IdealKind::CountablyGenerated {
                generators: Generators::Sets(gens),
            } => Some(prefix.tail().iter().all(|&m| gens.iter().any(|g| g.contains(m)))),
            IdealKind::CountablyGenerated {
                generators: Generators::PairingColumns,
            } => {
                if prefix.tail().is_empty() {
                    Some(true)
                } else {
                    None
                }
            }
        }
    }
}

impl Ideal {
    pub fn new(kind: IdealKind) -> Result<Self, IdealError> {
        match &kind {
            IdealKind::ErdosUlam { exponent } | IdealKind::Summable { exponent } => {
                if !(exponent.is_finite() && *exponent >= -1.0) {
                    return Err(IdealError::SummableWeights(*exponent));
                }
            }
            IdealKind::FinOplusFull { t } => match t.is_finite() {
                Ok(true) => return Err(IdealError::FiniteSupport(t.to_string())),
                Ok(false) => {}
                Err(SetError::Unsupported(_)) => {
                    if t.prefix(DEFAULT_MEMBERSHIP_HORIZON).tail().is_empty() {
                        return Err(IdealError::FiniteSupport(t.to_string()));
                    }
                }
                Err(e) => return Err(e.into()),
            },
            _ => {}
        }
        Ok(Self {
            kind,
            theta: DEFAULT_THETA,
        })
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self, IdealError> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(IdealError::Threshold(theta));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn fin() -> Self {
        Self::new(IdealKind::Fin).expect("Fin is valid")
    }

    pub fn density_zero() -> Self {
        Self::new(IdealKind::DensityZero).expect("Z is valid")
    }

    pub fn erdos_ulam(exponent: f64) -> Result<Self, IdealError> {
        Self::new(IdealKind::ErdosUlam { exponent })
    }

    pub fn summable(exponent: f64) -> Result<Self, IdealError> {
        Self::new(IdealKind::Summable { exponent })
    }

    pub fn fin_oplus_full(t: SetDescription) -> Result<Self, IdealError> {
        Self::new(IdealKind::FinOplusFull { t })
    }

    pub fn countably_generated(generators: Vec<SetDescription>) -> Self {
        Self::new(IdealKind::CountablyGenerated {
            generators: Generators::Sets(generators),
        })
        .expect("finitely generated ideals are valid")
    }

    /// Copy of Fin×{∅} on ω through the Cantor pairing.
    pub fn fin_times_empty() -> Self {
        Self::new(IdealKind::CountablyGenerated {
            generators: Generators::PairingColumns,
        })
        .expect("valid")
    }

    pub fn kind(&self) -> &IdealKind {
        &self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_fin(&self) -> bool {
        matches!(self.kind, IdealKind::Fin)
    }

    pub fn is_countably_generated(&self) -> bool {
        matches!(
            self.kind,
            IdealKind::Fin | IdealKind::FinOplusFull { .. } | IdealKind::CountablyGenerated { .. }
        ) || matches!(self.kind, IdealKind::Summable { exponent } if exponent >= 0.0)
    }

    /// Exact decision of `S ∈ I`.
    pub fn contains_exact(&self, set: &SetDescription) -> Result<bool, SetError> {
        match &self.kind {
            IdealKind::Fin => set.is_finite(),
            IdealKind::DensityZero | IdealKind::ErdosUlam { .. } => set.has_zero_upper_density(),
            IdealKind::Summable { exponent } => {
                if !set.has_zero_upper_density()? {
                    return Ok(false);
                }
                // density zero predicate-free sets lie in squares ∪ finite
                if !set.meets_squares_infinitely()? {
                    return Ok(true);
                }
                Ok(*exponent < -0.5)
            }
            IdealKind::FinOplusFull { t } => set.clone().intersection(t.clone()).is_finite(),
            IdealKind::CountablyGenerated {
                generators: Generators::Sets(gens),
            } => set
                .clone()
                .difference(SetDescription::union_all(gens.iter().cloned()))
                .is_finite(),
            IdealKind::CountablyGenerated {
                generators: Generators::PairingColumns,
            } => {
                if set.is_finite()? {
                    Ok(true)
                } else if !set.has_zero_upper_density()? {
                    // finitely many columns have density zero
                    Ok(false)
                } else {
                    Err(SetError::Undecidable(format!(
                        "column coverage of density-zero set {set}"
                    )))
                }
            }
        }
    }

    /// Membership using the ideal's own threshold and the default horizon.
    pub fn membership(&self, set: &SetDescription) -> Membership {
        self.decide(set, DEFAULT_MEMBERSHIP_HORIZON).membership
    }

    /// Exact decision when available, else the numeric estimator on the
    /// prefix below `horizon` (only for sets containing predicates).
    pub fn decide(&self, set: &SetDescription, horizon: u64) -> Decision {
        let complement = set.clone().complement();
        let exact_in = self.contains_exact(set);
        let exact_dual = self.contains_exact(&complement);
        let unsupported = |r: &Result<bool, SetError>| matches!(r, Err(SetError::Unsupported(_)));
        if unsupported(&exact_in) || unsupported(&exact_dual) {
            let estimator = SmallnessEstimator::new(self, horizon, self.theta);
            let small = estimator.looks_small(&set.prefix(horizon));
            let dual = estimator.looks_small(&complement.prefix(horizon));
            return Decision {
                membership: combine(small, dual),
                exact: false,
            };
        }
        Decision {
            membership: combine(exact_in.ok(), exact_dual.ok()),
            exact: true,
        }
    }

    pub fn classify(&self) -> ClassificationReport {
        let fin_like = |canonical: String| ClassificationReport {
            is_p_ideal: true,
            is_p_plus_ideal: true,
            is_tall: false,
            is_nowhere_tall: true,
            is_countably_generated: true,
            canonical_form: canonical,
        };
        let tall_p = |canonical: String, p_plus: bool| ClassificationReport {
            is_p_ideal: true,
            is_p_plus_ideal: p_plus,
            is_tall: true,
            is_nowhere_tall: false,
            is_countably_generated: false,
            canonical_form: canonical,
        };
        match &self.kind {
            IdealKind::Fin => fin_like("Fin".into()),
            IdealKind::FinOplusFull { t } => fin_like(support_form(t)),
            IdealKind::CountablyGenerated {
                generators: Generators::Sets(gens),
            } => {
                // {S : S \ Q finite} with Q = ⋃ gens, i.e. a trace ideal on ω \ Q
                let q = SetDescription::union_all(gens.iter().cloned());
                fin_like(support_form(&q.complement()))
            }
            IdealKind::CountablyGenerated {
                generators: Generators::PairingColumns,
            } => ClassificationReport {
                is_p_ideal: false,
                is_p_plus_ideal: false,
                is_tall: false,
                is_nowhere_tall: true,
                is_countably_generated: true,
                canonical_form: "Fin×{∅} copy".into(),
            },
            IdealKind::DensityZero => tall_p("Z".into(), false),
            IdealKind::ErdosUlam { exponent } => tall_p(format!("Erdős–Ulam (n+1)^{exponent}"), false),
            IdealKind::Summable { exponent } if *exponent >= 0.0 => fin_like("Fin".into()),
            IdealKind::Summable { exponent } => tall_p(format!("summable (n+1)^{exponent}"), true),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

fn combine(in_ideal: Option<bool>, dual: Option<bool>) -> Membership {
    match (in_ideal, dual) {
        (Some(true), _) => Membership::InIdeal,
        (Some(false), Some(true)) => Membership::InDualFilter,
        (Some(false), Some(false)) => Membership::Positive,
        _ => Membership::Inconclusive,
    }
}

fn support_form(t: &SetDescription) -> String {
    match t.clone().complement().is_finite() {
        Ok(true) => "Fin".into(),
        Ok(false) => "Fin⊕P(ω) copy".into(),
        Err(_) => "Fin⊕P(ω) copy (co-infiniteness unverified)".into(),
    }
}

impl fmt::Display for Ideal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            IdealKind::Fin => write!(f, "Fin"),
            IdealKind::DensityZero => write!(f, "DensityZero"),
            IdealKind::ErdosUlam { exponent } => write!(f, "ErdosUlam((n+1)^{exponent})"),
            IdealKind::Summable { exponent } => write!(f, "Summable((n+1)^{exponent})"),
            IdealKind::FinOplusFull { t } => write!(f, "FinOplusFull({t})"),
            IdealKind::CountablyGenerated {
                generators: Generators::Sets(gens),
            } => {
                let parts: Vec<String> = gens.iter().map(ToString::to_string).collect();
                write!(f, "CountablyGenerated[{}]", parts.join(", "))
            }
            IdealKind::CountablyGenerated {
                generators: Generators::PairingColumns,
            } => write!(f, "FinTimesEmpty"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideals::set::Predicate;

    #[test]
    fn membership_examples() {
        assert_eq!(Ideal::fin().membership(&SetDescription::explicit([1, 5, 9])), Membership::InIdeal);
        assert_eq!(Ideal::density_zero().membership(&SetDescription::squares()), Membership::InIdeal);
        assert_eq!(Ideal::density_zero().membership(&SetDescription::evens()), Membership::Positive);
        let fo = Ideal::fin_oplus_full(SetDescription::odds()).unwrap();
        assert_eq!(fo.membership(&SetDescription::evens()), Membership::InIdeal);
        assert_eq!(fo.membership(&SetDescription::odds()), Membership::InDualFilter);
        assert_eq!(Ideal::fin().membership(&SetDescription::all()), Membership::InDualFilter);
    }

    #[test]
    fn squares_prefix_oracle_supports_density_zero() {
        // |squares ∩ [0,n]| ≤ √n + 1 at n = 10^6
        let count = SetDescription::squares().enumerate_prefix(1_000_001).len() as f64;
        assert!(count <= 1000.0 + 1.0);
        assert!(count / 1e6 < 1.1e-3);
    }

    #[test]
    fn summable_ideal_decisions() {
        let harmonic = Ideal::summable(-1.0).unwrap();
        assert_eq!(harmonic.membership(&SetDescription::squares()), Membership::InIdeal);
        assert_eq!(harmonic.membership(&SetDescription::progression(3, 7)), Membership::Positive);
        let slow = Ideal::summable(-0.5).unwrap();
        assert_eq!(slow.membership(&SetDescription::squares()), Membership::Positive);
        let flat = Ideal::summable(0.0).unwrap();
        assert_eq!(flat.classify().canonical_form, "Fin");
        assert!(Ideal::summable(-1.5).is_err());
    }

    #[test]
    fn erdos_ulam_validation_and_decisions() {
        assert!(Ideal::erdos_ulam(-2.0).is_err());
        let log = Ideal::erdos_ulam(-1.0).unwrap();
        assert_eq!(log.membership(&SetDescription::squares()), Membership::InIdeal);
        assert_eq!(log.membership(&SetDescription::oscillating_blocks(2)), Membership::Positive);
    }

    #[test]
    fn fin_oplus_full_requires_infinite_support() {
        assert!(matches!(
            Ideal::fin_oplus_full(SetDescription::explicit([1, 2])),
            Err(IdealError::FiniteSupport(_))
        ));
    }

    #[test]
    fn countably_generated_sets() {
        let cg = Ideal::countably_generated(vec![SetDescription::progression(0, 3), SetDescription::squares()]);
        assert_eq!(cg.membership(&SetDescription::progression(3, 6)), Membership::InIdeal);
        assert_eq!(cg.membership(&SetDescription::progression(1, 3)), Membership::Positive);
        let cover = SetDescription::progression(1, 3).union(SetDescription::progression(2, 3));
        assert_eq!(cg.membership(&cover), Membership::InDualFilter);
        assert!(cg.is_countably_generated());
    }

    #[test]
    fn pairing_columns() {
        // ⟨0,0⟩=0, ⟨1,0⟩=1, ⟨0,1⟩=2, ⟨2,0⟩=3, ⟨1,1⟩=4, ⟨0,2⟩=5
        let cols: Vec<u64> = (0..6).map(pairing_column).collect();
        assert_eq!(cols, vec![0, 1, 0, 2, 1, 0]);
        let ft = Ideal::fin_times_empty();
        assert_eq!(ft.membership(&SetDescription::explicit([3, 100])), Membership::InIdeal);
        assert_eq!(ft.membership(&SetDescription::evens()), Membership::Positive);
        assert_eq!(ft.membership(&SetDescription::squares()), Membership::Inconclusive);
        let c = ft.classify();
        assert!(!c.is_p_plus_ideal && c.is_countably_generated);
    }

    #[test]
    fn predicate_sets_use_threshold_band() {
        let z = Ideal::density_zero();
        let dense = SetDescription::predicate(Predicate::PseudoRandom { seed: 3, density: 0.3 });
        let d = z.decide(&dense, 20_000);
        assert_eq!(d.membership, Membership::Positive);
        assert!(!d.exact);
        // 20 hits below 10^6 put the running ratio under θ/10
        let sparse = SetDescription::predicate(Predicate::custom("powers of two", |n| n.is_power_of_two()));
        assert_eq!(z.decide(&sparse, 1_000_000).membership, Membership::InIdeal);
        // primes have estimated density ≈ 1/ln(N) ≫ θ
        assert_eq!(z.decide(&SetDescription::predicate(Predicate::Primes), 20_000).membership, Membership::Positive);
        // band: density ~ 5·10^-4 sits between θ/10 and θ
        let mid = SetDescription::predicate(Predicate::custom("mult 2000", |n| n % 2000 == 0));
        assert_eq!(z.decide(&mid, 100_000).membership, Membership::Inconclusive);
    }

    #[test]
    fn classification_metadata() {
        assert!(!Ideal::fin().classify().is_tall);
        let z = Ideal::density_zero().classify();
        assert!(z.is_tall && z.is_p_ideal);
        assert_eq!(z.flag_names(), vec!["P-ideal", "tall"]);
        let fo = Ideal::fin_oplus_full(SetDescription::evens()).unwrap().classify();
        assert_eq!(fo.canonical_form, "Fin⊕P(ω) copy");
        let cof = Ideal::fin_oplus_full(SetDescription::progression(5, 1)).unwrap().classify();
        assert_eq!(cof.canonical_form, "Fin");
    }

    #[test]
    fn density_zero_is_tall_on_sparse_subsets() {
        // every infinite S has an infinite subset with gaps 2^k; check for S = odds
        let mut picks = Vec::new();
        let mut next = 1u64;
        for k in 0..19 {
            let candidate = next + (1u64 << k);
            let odd = if candidate % 2 == 1 { candidate } else { candidate + 1 };
            picks.push(odd);
            next = odd;
        }
        let sparse = SetDescription::explicit(picks.clone());
        assert!(picks.iter().all(|p| p % 2 == 1));
        let (_, hi) = sparse.empirical_density(1_000_000);
        assert!(hi < 1e-4);
    }

    #[test]
    fn json_encoding() {
        let i: Ideal = serde_json::from_str(r#"{"kind":"fin_oplus_full","t":{"type":"progression","offset":0,"step":2}}"#).unwrap();
        assert_eq!(i.to_string(), "FinOplusFull(evens)");
        let z: Ideal = serde_json::from_str(r#"{"kind":"density_zero","theta":0.01}"#).unwrap();
        assert_eq!(z.theta(), 0.01);
        let bad = serde_json::from_str::<Ideal>(r#"{"kind":"erdos_ulam","exponent":-3}"#);
        assert!(bad.is_err());
        let cg: Ideal = serde_json::from_str(r#"{"kind":"countably_generated","generators":"pairing_columns"}"#).unwrap();
        assert_eq!(cg.to_string(), "FinTimesEmpty");
        let back: Ideal = serde_json::from_str(&serde_json::to_string(&i).unwrap()).unwrap();
        assert_eq!(back.to_string(), i.to_string());
    }
}
