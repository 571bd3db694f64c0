//! Symbolic subsets of ω.
//!
//! Every variant except [`SetDescription::Predicate`] has a decidable
//! asymptotic profile: for all sufficiently large `n`, membership of `n`
//! depends only on `n mod L` (where `L` is the lcm of all progression steps),
//! on whether `n` is a perfect square, and on which oscillating block families
//! contain `n`. Finiteness and densities are read off that profile exactly.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::numeric::{isqrt, unit_hash};

/// Largest residue table the exact analysis will build.
const MAX_PROFILE_CELLS: u64 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("exact analysis is unsupported for predicate set {0}")]
    Unsupported(String),
    #[error("exact analysis undecided: {0}")]
    Undecidable(String),
    #[error("residue table too large (period {period}, {families} block families)")]
    TooComplex { period: u64, families: usize },
    #[error("sets overlap at {0}")]
    Overlap(u64),
}

/// Membership test backed by an opaque rule; no exact density.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    Primes,
    /// Each `n` is included independently with probability `density`,
    /// decided by a hash of `(seed, n)`.
    PseudoRandom { seed: u64, density: f64 },
    #[serde(skip)]
    Custom {
        label: String,
        test: Arc<dyn Fn(u64) -> bool + Send + Sync>,
    },
}

impl Predicate {
    pub fn custom(label: impl Into<String>, test: impl Fn(u64) -> bool + Send + Sync + 'static) -> Self {
        Predicate::Custom {
            label: label.into(),
            test: Arc::new(test),
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        match self {
            Predicate::Primes => is_prime(n),
            Predicate::PseudoRandom { seed, density } => unit_hash(*seed, n) < *density,
            Predicate::Custom { test, .. } => test(n),
        }
    }
}

/// Custom predicates are equal only when they share the same closure.
impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Predicate::Primes, Predicate::Primes) => true,
            (Predicate::PseudoRandom { seed: a, density: p }, Predicate::PseudoRandom { seed: b, density: q }) => {
                a == b && p == q
            }
            (Predicate::Custom { label: a, test: f }, Predicate::Custom { label: b, test: g }) => {
                a == b && Arc::ptr_eq(f, g)
            }
            _ => false,
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Primes => write!(f, "primes"),
            Predicate::PseudoRandom { seed, density } => write!(f, "random(seed={seed},p={density})"),
            Predicate::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A subset of the natural numbers.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetDescription {
    /// A finite set.
    Explicit {
        #[serde(deserialize_with = "sorted_unique")]
        elements: Vec<u64>,
    },
    /// `{offset + step·j : j ≥ 0}`.
    Progression {
        offset: u64,
        #[serde(deserialize_with = "positive")]
        step: u64,
    },
    Squares,
    /// Finite union of inclusive intervals `[lo, hi]`.
    Blocks { intervals: Vec<(u64, u64)> },
    /// `⋃_k [r^{2k}, r^{2k+1})`: lower density `1/(r+1)`, upper density `r/(r+1)`.
    OscillatingBlocks {
        #[serde(deserialize_with = "at_least_two")]
        ratio: u64,
    },
    Union {
        left: Box<SetDescription>,
        right: Box<SetDescription>,
    },
    Intersection {
        left: Box<SetDescription>,
        right: Box<SetDescription>,
    },
    Difference {
        left: Box<SetDescription>,
        right: Box<SetDescription>,
    },
    Complement { of: Box<SetDescription> },
    Predicate { predicate: Predicate },
}

fn sorted_unique<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
    let v: Vec<u64> = Vec::deserialize(d)?;
    Ok(v.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let v = u64::deserialize(d)?;
    if v == 0 {
        return Err(serde::de::Error::custom("step must be at least 1"));
    }
    Ok(v)
}

fn at_least_two<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let v = u64::deserialize(d)?;
    if v < 2 {
        return Err(serde::de::Error::custom("ratio must be at least 2"));
    }
    Ok(v)
}

/// Asymptotic density of a non-predicate set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Density {
    /// The density exists.
    Exact(Ratio<u64>),
    /// The density does not exist; lower and upper densities are exact.
    Oscillating { lower: Ratio<u64>, upper: Ratio<u64> },
    /// Lower and upper densities are only known to lie in `[lower, upper]`.
    Bounds { lower: Ratio<u64>, upper: Ratio<u64> },
}

impl Density {
    pub fn lower(&self) -> Ratio<u64> {
        match *self {
            Density::Exact(d) => d,
            Density::Oscillating { lower, .. } | Density::Bounds { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> Ratio<u64> {
        match *self {
            Density::Exact(d) => d,
            Density::Oscillating { upper, .. } | Density::Bounds { upper, .. } => upper,
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Density::Bounds { .. })
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Exact(d) => write!(f, "{d}"),
            Density::Oscillating { lower, upper } => write!(f, "oscillating [{lower}, {upper}]"),
            Density::Bounds { lower, upper } => write!(f, "within [{lower}, {upper}]"),
        }
    }
}

/// Sorted members of a set below a horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixSet {
    pub horizon: u64,
    pub members: Vec<u64>,
}

impl PrefixSet {
    pub fn new(horizon: u64, members: Vec<u64>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(members.last().is_none_or(|&m| m < horizon));
        Self { horizon, members }
    }

    pub fn window_start(&self) -> u64 {
        self.horizon / 2
    }

    /// Members in the tail window `[N/2, N)`.
    pub fn tail(&self) -> &[u64] {
        let start = self.members.partition_point(|&m| m < self.window_start());
        &self.members[start..]
    }

    /// `(min, max)` of `|S ∩ [0, n)| / n` over `n ∈ [N/2, N]`.
    pub fn running_ratio_range(&self) -> (f64, f64) {
        let start = self.window_start().max(1);
        let before = self.members.partition_point(|&m| m < start) as f64;
        let mut lo = before / start as f64;
        let mut hi = lo;
        let mut count = before;
        for &m in self.tail() {
            if m < start {
                continue;
            }
            // ratio just before m is counted (falls), just after it rises
            if m > start {
                lo = lo.min(count / m as f64);
            }
            count += 1.0;
            hi = hi.max(count / (m + 1) as f64);
        }
        lo = lo.min(count / self.horizon.max(1) as f64);
        hi = hi.max(count / self.horizon.max(1) as f64);
        (lo, hi)
    }

    /// `(min, max)` of `W_S(n) / W(n)` over `n ∈ [N/2, N]` where
    /// `W(n) = cumulative[n]` is the total weight of `[0, n)`.
    pub fn weighted_ratio_range(&self, weights: &[f64], cumulative: &[f64]) -> (f64, f64) {
        let start = self.window_start().max(1) as usize;
        let mut acc: f64 = self
            .members
            .iter()
            .take_while(|&&m| (m as usize) < start)
            .map(|&m| weights[m as usize])
            .sum();
        let mut lo = acc / cumulative[start];
        let mut hi = lo;
        for &m in self.tail() {
            let m = m as usize;
            if m > start {
                lo = lo.min(acc / cumulative[m]);
            }
            acc += weights[m];
            hi = hi.max(acc / cumulative[m + 1]);
        }
        let end = self.horizon as usize;
        lo = lo.min(acc / cumulative[end]);
        hi = hi.max(acc / cumulative[end]);
        (lo, hi)
    }
}

impl SetDescription {
    pub fn explicit(elements: impl IntoIterator<Item = u64>) -> Self {
        let set: BTreeSet<u64> = elements.into_iter().collect();
        SetDescription::Explicit {
            elements: set.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        SetDescription::Explicit { elements: Vec::new() }
    }

    /// The whole of ω.
    pub fn all() -> Self {
        Self::progression(0, 1)
    }

    /// # Panics
    /// If `step == 0`.
    pub fn progression(offset: u64, step: u64) -> Self {
        assert!(step >= 1, "progression step must be at least 1");
        SetDescription::Progression { offset, step }
    }

    pub fn evens() -> Self {
        Self::progression(0, 2)
    }

    pub fn odds() -> Self {
        Self::progression(1, 2)
    }

    pub fn squares() -> Self {
        SetDescription::Squares
    }

    pub fn blocks(intervals: impl IntoIterator<Item = (u64, u64)>) -> Self {
        SetDescription::Blocks {
            intervals: intervals.into_iter().collect(),
        }
    }

    /// # Panics
    /// If `ratio < 2`.
    pub fn oscillating_blocks(ratio: u64) -> Self {
        assert!(ratio >= 2, "block ratio must be at least 2");
        SetDescription::OscillatingBlocks { ratio }
    }

    pub fn predicate(predicate: Predicate) -> Self {
        SetDescription::Predicate { predicate }
    }

    pub fn union(self, other: SetDescription) -> Self {
        SetDescription::Union {
            left: Box::new(self),
            right: Box::new(other),
        }
    }

    pub fn intersection(self, other: SetDescription) -> Self {
        SetDescription::Intersection {
            left: Box::new(self),
            right: Box::new(other),
        }
    }

    pub fn difference(self, other: SetDescription) -> Self {
        SetDescription::Difference {
            left: Box::new(self),
            right: Box::new(other),
        }
    }

    pub fn complement(self) -> Self {
        SetDescription::Complement { of: Box::new(self) }
    }

    /// Union of all sets in the iterator; the empty union is `∅`.
    pub fn union_all(sets: impl IntoIterator<Item = SetDescription>) -> Self {
        sets.into_iter()
            .reduce(SetDescription::union)
            .unwrap_or_else(SetDescription::empty)
    }

    pub fn contains(&self, n: u64) -> bool {
        match self {
            SetDescription::Explicit { elements } => elements.binary_search(&n).is_ok(),
            SetDescription::Progression { offset, step } => n >= *offset && (n - offset) % step == 0,
            SetDescription::Squares => {
                let r = isqrt(n);
                r * r == n
            }
            SetDescription::Blocks { intervals } => intervals.iter().any(|&(lo, hi)| lo <= n && n <= hi),
            SetDescription::OscillatingBlocks { ratio } => in_oscillating_block(n, *ratio),
            SetDescription::Union { left, right } => left.contains(n) || right.contains(n),
            SetDescription::Intersection { left, right } => left.contains(n) && right.contains(n),
            SetDescription::Difference { left, right } => left.contains(n) && !right.contains(n),
            SetDescription::Complement { of } => !of.contains(n),
            SetDescription::Predicate { predicate } => predicate.contains(n),
        }
    }

    /// `{ n < horizon : n ∈ S }`, ascending.
    pub fn enumerate_prefix(&self, horizon: u64) -> Vec<u64> {
        (0..horizon).filter(|&n| self.contains(n)).collect()
    }

    pub fn prefix(&self, horizon: u64) -> PrefixSet {
        PrefixSet::new(horizon, self.enumerate_prefix(horizon))
    }

    pub fn is_predicate_free(&self) -> bool {
        match self {
            SetDescription::Predicate { .. } => false,
            SetDescription::Union { left, right }
            | SetDescription::Intersection { left, right }
            | SetDescription::Difference { left, right } => left.is_predicate_free() && right.is_predicate_free(),
            SetDescription::Complement { of } => of.is_predicate_free(),
            _ => true,
        }
    }

    fn profile(&self) -> Result<Profile, SetError> {
        Profile::build(self)
    }

    /// Exact decision of whether the set is finite.
    pub fn is_finite(&self) -> Result<bool, SetError> {
        self.profile()?.is_finite()
    }

    /// Exact asymptotic density (or exact lower/upper densities).
    pub fn exact_density(&self) -> Result<Density, SetError> {
        Ok(self.profile()?.density())
    }

    /// Whether the upper density is zero.
    pub fn has_zero_upper_density(&self) -> Result<bool, SetError> {
        let d = self.exact_density()?;
        if d.upper() == Ratio::from_integer(0) {
            Ok(true)
        } else if d.lower() > Ratio::from_integer(0) || d.is_exact() {
            Ok(false)
        } else {
            Err(SetError::Undecidable(format!("upper density of {self} is {d}")))
        }
    }

    /// Whether infinitely many perfect squares lie in the set.
    pub fn meets_squares_infinitely(&self) -> Result<bool, SetError> {
        self.profile()?.meets_squares_infinitely()
    }

    /// `(lower, upper)` estimates of the density from the prefix below `horizon`:
    /// min and max of `|S ∩ [0, n)| / n` for `n ∈ [N/2, N]`.
    ///
    /// # Panics
    /// If `horizon < 2`.
    pub fn empirical_density(&self, horizon: u64) -> (f64, f64) {
        assert!(horizon >= 2, "empirical density needs a horizon of at least 2");
        self.prefix(horizon).running_ratio_range()
    }

    /// Checks that two sets share no element below `horizon`.
    pub fn check_disjoint(&self, other: &SetDescription, horizon: u64) -> Result<(), SetError> {
        match (0..horizon).find(|&n| self.contains(n) && other.contains(n)) {
            Some(n) => Err(SetError::Overlap(n)),
            None => Ok(()),
        }
    }
}

fn in_oscillating_block(n: u64, ratio: u64) -> bool {
    if n == 0 {
        return false;
    }
    // position of n between consecutive powers of the ratio
    let mut exponent = 0u32;
    let mut power = 1u64;
    while let Some(next) = power.checked_mul(ratio) {
        if next > n {
            break;
        }
        power = next;
        exponent += 1;
    }
    exponent % 2 == 0
}

impl fmt::Debug for SetDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for SetDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetDescription::Explicit { elements } if elements.len() <= 12 => {
                let parts: Vec<String> = elements.iter().map(u64::to_string).collect();
                write!(f, "{{{}}}", parts.join(","))
            }
            SetDescription::Explicit { elements } => write!(
                f,
                "{{{},...,{}}}({} elements)",
                elements[0],
                elements[elements.len() - 1],
                elements.len()
            ),
            SetDescription::Progression { offset: 0, step: 1 } => write!(f, "omega"),
            SetDescription::Progression { offset: 0, step: 2 } => write!(f, "evens"),
            SetDescription::Progression { offset: 1, step: 2 } => write!(f, "odds"),
            SetDescription::Progression { offset, step } => write!(f, "AP({offset},{step})"),
            SetDescription::Squares => write!(f, "squares"),
            SetDescription::Blocks { intervals } => {
                let parts: Vec<String> = intervals.iter().map(|(a, b)| format!("[{a},{b}]")).collect();
                write!(f, "blocks{}", parts.join(""))
            }
            SetDescription::OscillatingBlocks { ratio } => write!(f, "oscillating_blocks({ratio})"),
            SetDescription::Union { left, right } => write!(f, "({left} | {right})"),
            SetDescription::Intersection { left, right } => write!(f, "({left} & {right})"),
            SetDescription::Difference { left, right } => write!(f, "({left} \\ {right})"),
            SetDescription::Complement { of } => write!(f, "~{of}"),
            SetDescription::Predicate { predicate } => write!(f, "{predicate}"),
        }
    }
}

/// Truth table of a predicate-free set for large `n`.
///
/// Rows are indexed by residue (mod `period`) and by the pattern of block
/// families containing `n`; `square` rows are indexed by `m mod period` for
/// `n = m²`.
struct Profile {
    period: u64,
    ratios: Vec<u64>,
    nonsquare: Vec<Vec<bool>>,
    square: Vec<Vec<bool>>,
}

struct Atoms {
    period: u64,
    ratios: BTreeSet<u64>,
}

impl Atoms {
    fn collect(set: &SetDescription, atoms: &mut Atoms) -> Result<(), SetError> {
        match set {
            SetDescription::Progression { step, .. } => {
                atoms.period = atoms.period.lcm(step);
                if atoms.period > MAX_PROFILE_CELLS {
                    return Err(SetError::TooComplex {
                        period: atoms.period,
                        families: atoms.ratios.len(),
                    });
                }
            }
            SetDescription::OscillatingBlocks { ratio } => {
                atoms.ratios.insert(*ratio);
            }
            SetDescription::Union { left, right }
            | SetDescription::Intersection { left, right }
            | SetDescription::Difference { left, right } => {
                Self::collect(left, atoms)?;
                Self::collect(right, atoms)?;
            }
            SetDescription::Complement { of } => Self::collect(of, atoms)?,
            SetDescription::Predicate { predicate } => return Err(SetError::Unsupported(predicate.to_string())),
            SetDescription::Explicit { .. } | SetDescription::Squares | SetDescription::Blocks { .. } => {}
        }
        Ok(())
    }
}

fn eval_type(set: &SetDescription, residue: u64, square: bool, ratios: &[u64], pattern: usize) -> bool {
    match set {
        SetDescription::Explicit { .. } | SetDescription::Blocks { .. } => false,
        SetDescription::Progression { offset, step } => residue % step == offset % step,
        SetDescription::Squares => square,
        SetDescription::OscillatingBlocks { ratio } => {
            let idx = ratios.iter().position(|r| r == ratio).expect("ratio collected");
            pattern & (1 << idx) != 0
        }
        SetDescription::Union { left, right } => {
            eval_type(left, residue, square, ratios, pattern) || eval_type(right, residue, square, ratios, pattern)
        }
        SetDescription::Intersection { left, right } => {
            eval_type(left, residue, square, ratios, pattern) && eval_type(right, residue, square, ratios, pattern)
        }
        SetDescription::Difference { left, right } => {
            eval_type(left, residue, square, ratios, pattern) && !eval_type(right, residue, square, ratios, pattern)
        }
        SetDescription::Complement { of } => !eval_type(of, residue, square, ratios, pattern),
        SetDescription::Predicate { .. } => unreachable!("predicates rejected during atom collection"),
    }
}

impl Profile {
    fn build(set: &SetDescription) -> Result<Self, SetError> {
        let mut atoms = Atoms {
            period: 1,
            ratios: BTreeSet::new(),
        };
        Atoms::collect(set, &mut atoms)?;
        let ratios: Vec<u64> = atoms.ratios.into_iter().collect();
        let patterns = 1usize
            .checked_shl(ratios.len() as u32)
            .filter(|&p| (p as u64).saturating_mul(atoms.period) <= MAX_PROFILE_CELLS)
            .ok_or(SetError::TooComplex {
                period: atoms.period,
                families: ratios.len(),
            })?;
        let period = atoms.period;
        let nonsquare = (0..period)
            .map(|r| (0..patterns).map(|p| eval_type(set, r, false, &ratios, p)).collect())
            .collect();
        let square = (0..period)
            .map(|m| {
                let r = ((m as u128 * m as u128) % period as u128) as u64;
                (0..patterns).map(|p| eval_type(set, r, true, &ratios, p)).collect()
            })
            .collect();
        Ok(Profile {
            period,
            ratios,
            nonsquare,
            square,
        })
    }

    fn patterns(&self) -> usize {
        1 << self.ratios.len()
    }

    /// Density of residues satisfied by non-squares, per block pattern.
    fn pattern_densities(&self) -> Vec<Ratio<u64>> {
        (0..self.patterns())
            .map(|p| {
                let hits = self.nonsquare.iter().filter(|row| row[p]).count() as u64;
                Ratio::new(hits, self.period)
            })
            .collect()
    }

    fn density(&self) -> Density {
        let d = self.pattern_densities();
        match self.ratios.len() {
            0 => Density::Exact(d[0]),
            1 => {
                let r = self.ratios[0];
                let (outside, inside) = (d[0], d[1]);
                if outside == inside {
                    return Density::Exact(inside);
                }
                // fraction of [0, n) inside the blocks sweeps [1/(r+1), r/(r+1)]
                let lo = Ratio::new(1, r + 1);
                let hi = Ratio::new(r, r + 1);
                let at = |beta: Ratio<u64>| inside * beta + outside * (Ratio::from_integer(1) - beta);
                let (a, b) = (at(lo), at(hi));
                Density::Oscillating {
                    lower: a.min(b),
                    upper: a.max(b),
                }
            }
            _ => {
                let lower = *d.iter().min().expect("at least one pattern");
                let upper = *d.iter().max().expect("at least one pattern");
                if lower == upper {
                    Density::Exact(lower)
                } else {
                    Density::Bounds { lower, upper }
                }
            }
        }
    }

    fn meets_squares_infinitely(&self) -> Result<bool, SetError> {
        let per_pattern: Vec<bool> = (0..self.patterns())
            .map(|p| self.square.iter().any(|row| row[p]))
            .collect();
        self.decide_over_patterns(&per_pattern, "squares")
    }

    fn is_finite(&self) -> Result<bool, SetError> {
        let per_pattern: Vec<bool> = (0..self.patterns())
            .map(|p| self.nonsquare.iter().any(|row| row[p]) || self.square.iter().any(|row| row[p]))
            .collect();
        self.decide_over_patterns(&per_pattern, "finiteness").map(|infinite| !infinite)
    }

    /// With at most one block family every pattern recurs infinitely often;
    /// with several families only unanimous answers are certain.
    fn decide_over_patterns(&self, per_pattern: &[bool], what: &str) -> Result<bool, SetError> {
        if self.ratios.len() <= 1 {
            return Ok(per_pattern.iter().any(|&b| b));
        }
        if per_pattern.iter().all(|&b| b) {
            Ok(true)
        } else if per_pattern.iter().all(|&b| !b) {
            Ok(false)
        } else {
            Err(SetError::Undecidable(format!(
                "{what} depends on joint recurrence of block families {:?}",
                self.ratios
            )))
        }
    }
}
