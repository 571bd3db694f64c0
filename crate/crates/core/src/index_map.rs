//! Maps ω → ω used as Rudin–Keisler witnesses.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::ideals::SetDescription;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexMapError {
    #[error("map {label} declared injective but h({a}) = h({b}) = {value}")]
    NotInjective { label: String, a: u64, b: u64, value: u64 },
    #[error("map {label} declared finite-to-one but {count} of the first {horizon} indices map to {value}")]
    NotFiniteToOne { label: String, value: u64, count: u64, horizon: u64 },
    #[error("enumeration of {0} ran past the search limit")]
    EnumerationExhausted(String),
}

#[derive(Clone)]
enum Rule {
    Affine { scale: u64, shift: u64 },
    Constant(u64),
    Enumeration(Arc<Enumeration>),
    Custom(Arc<dyn Fn(u64) -> u64 + Send + Sync>),
}

/// Increasing enumeration `t_0 < t_1 < …` of an infinite set, filled lazily.
struct Enumeration {
    set: SetDescription,
    cache: RwLock<Vec<u64>>,
}

/// Upper limit on the scan when enumerating a set with no closed form.
const ENUMERATION_SCAN_LIMIT: u64 = 1 << 40;

impl Enumeration {
    fn nth(&self, n: u64) -> u64 {
        if let SetDescription::Progression { offset, step } = self.set {
            return offset + step * n;
        }
        if let SetDescription::Squares = self.set {
            return n * n;
        }
        {
            let cache = self.cache.read().expect("enumeration cache poisoned");
            if let Some(&v) = cache.get(n as usize) {
                return v;
            }
        }
        let mut cache = self.cache.write().expect("enumeration cache poisoned");
        let mut candidate = cache.last().map_or(0, |&v| v + 1);
        while cache.len() <= n as usize {
            assert!(
                candidate < ENUMERATION_SCAN_LIMIT,
                "{}",
                IndexMapError::EnumerationExhausted(self.set.to_string())
            );
            if self.set.contains(candidate) {
                cache.push(candidate);
            }
            candidate += 1;
        }
        cache[n as usize]
    }
}

/// A total map `h: ω → ω` with declared structural flags.
#[derive(Clone)]
pub struct IndexMap {
    rule: Rule,
    label: String,
    pub injective: bool,
    pub finite_to_one: bool,
}

impl IndexMap {
    pub fn identity() -> Self {
        Self::affine(1, 0)
    }

    /// `h(n) = scale·n + shift`.
    pub fn affine(scale: u64, shift: u64) -> Self {
        let label = match (scale, shift) {
            (1, 0) => "n".to_string(),
            (s, 0) => format!("{s}n"),
            (s, b) => format!("{s}n+{b}"),
        };
        Self {
            rule: Rule::Affine { scale, shift },
            label,
            injective: scale > 0,
            finite_to_one: scale > 0,
        }
    }

    pub fn constant(value: u64) -> Self {
        Self {
            rule: Rule::Constant(value),
            label: format!("{value}"),
            injective: false,
            finite_to_one: false,
        }
    }

    /// `h(n) = t_n`, the increasing enumeration of an infinite set `T`.
    pub fn enumeration_of(t: SetDescription) -> Self {
        let label = match t {
            SetDescription::Progression { offset, step } => Self::affine(step, offset).label,
            ref other => format!("t_n of {other}"),
        };
        Self {
            rule: Rule::Enumeration(Arc::new(Enumeration {
                set: t,
                cache: RwLock::new(Vec::new()),
            })),
            label,
            injective: true,
            finite_to_one: true,
        }
    }

    pub fn custom(
        label: impl Into<String>,
        injective: bool,
        finite_to_one: bool,
        h: impl Fn(u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            rule: Rule::Custom(Arc::new(h)),
            label: label.into(),
            injective,
            finite_to_one,
        }
    }

    pub fn apply(&self, n: u64) -> u64 {
        match &self.rule {
            Rule::Affine { scale, shift } => scale * n + shift,
            Rule::Constant(v) => *v,
            Rule::Enumeration(e) => e.nth(n),
            Rule::Custom(h) => h(n),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Checks the declared flags on `[0, horizon)`.
    ///
    /// Finite-to-one cannot be refuted on a prefix; a value hit by more than
    /// half of the prefix is reported as a violation.
    pub fn validate(&self, horizon: u64) -> Result<(), IndexMapError> {
        let mut first_seen: HashMap<u64, (u64, u64)> = HashMap::new();
        for n in 0..horizon {
            let v = self.apply(n);
            let entry = first_seen.entry(v).or_insert((n, 0));
            entry.1 += 1;
            if self.injective && entry.1 > 1 {
                return Err(IndexMapError::NotInjective {
                    label: self.label.clone(),
                    a: entry.0,
                    b: n,
                    value: v,
                });
            }
        }
        if self.finite_to_one {
            if let Some((&value, &(_, count))) = first_seen.iter().max_by_key(|(v, (_, c))| (*c, std::cmp::Reverse(**v))) {
                if horizon >= 4 && count > horizon / 2 {
                    return Err(IndexMapError::NotFiniteToOne {
                        label: self.label.clone(),
                        value,
                        count,
                        horizon,
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for IndexMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IndexMap(h(n)={})", self.label)
    }
}
