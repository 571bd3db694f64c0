//! Ideal cluster points, ideal limsup/liminf and cores of bounded sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ideals::{Ideal, PrefixSet, SetDescription, SetError, SmallnessEstimator, DEFAULT_THETA};
use crate::sequences::BoundedSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("{count} grid cells in the uncertainty band outside [{lo}, {hi}]")]
    InconclusiveCells { count: usize, lo: f64, hi: f64 },
    #[error("no grid cell was judged positive ({undecided} undecided)")]
    NoPositiveCell { undecided: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreConfig {
    pub horizon: u64,
    pub grid: f64,
    pub theta: f64,
    /// Use exact set decisions for level-structured sequences.
    pub exact: bool,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            grid: 1e-2,
            theta: DEFAULT_THETA,
            exact: true,
        }
    }
}

impl CoreConfig {
    pub fn numeric(self) -> Self {
        Self { exact: false, ..self }
    }

    fn validate(&self) -> Result<(), AsymptoticsError> {
        if self.horizon < 100 {
            return Err(AsymptoticsError::InvalidConfig(format!("horizon {} < 100", self.horizon)));
        }
        if !(self.grid > 0.0 && self.grid.is_finite()) {
            return Err(AsymptoticsError::InvalidConfig(format!("grid {}", self.grid)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(AsymptoticsError::InvalidConfig(format!("theta {}", self.theta)));
        }
        Ok(())
    }
}

/// How an interval was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CoreMethod {
    /// Symbolic, from exact decisions on level sets.
    Exact,
    /// Grid cells decided exactly on level sets; endpoints resolved to level values.
    Grid { grid: f64 },
    /// At least one cell used the prefix estimator.
    Numeric { horizon: u64, grid: f64, theta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreInterval {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub method: CoreMethod,
}

impl CoreInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Max endpoint distance.
    pub fn deviation(&self, other: &CoreInterval) -> f64 {
        (self.lo - other.lo).abs().max((self.hi - other.hi).abs())
    }

    pub fn contains_within(&self, other: &CoreInterval, tol: f64) -> bool {
        self.lo <= other.lo + tol && other.hi <= self.hi + tol
    }
}

/// Disjoint closed intervals approximating the cluster set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterSet {
    pub intervals: Vec<(f64, f64)>,
    /// Cells left in the uncertainty band (all inside the hull of `intervals`).
    pub undecided: Vec<(f64, f64)>,
    pub method: CoreMethod,
}

impl ClusterSet {
    pub fn min(&self) -> f64 {
        self.intervals[0].0
    }

    pub fn max(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].1
    }

    pub fn core(&self) -> CoreInterval {
        CoreInterval {
            lo: self.min(),
            hi: self.max(),
            method: self.method,
        }
    }

    /// Whether every interval of `self` lies within `tol` of some interval of
    /// `other` and vice versa.
    pub fn matches(&self, other: &ClusterSet, tol: f64) -> bool {
        let covered = |a: &ClusterSet, b: &ClusterSet| {
            a.intervals
                .iter()
                .all(|&(lo, hi)| b.intervals.iter().any(|&(l, h)| lo >= l - tol && hi <= h + tol))
        };
        covered(self, other) && covered(other, self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Small,
    Positive,
    Undecided,
}

struct Grid {
    lo: f64,
    hi: f64,
    r: f64,
    cells: usize,
}

impl Grid {
    fn new(bound: f64, r: f64) -> Self {
        let cells = ((2.0 * bound / r).ceil() as usize).max(1);
        Self {
            lo: -bound,
            hi: bound,
            r,
            cells,
        }
    }

    fn cell(&self, i: usize) -> (f64, f64) {
        let a = self.lo + i as f64 * self.r;
        (a, (a + self.r).min(self.hi).max(a))
    }

    /// Cell widened by `r/4` on each side, `1.5·r` wide overall.
    fn enlarged(&self, i: usize) -> (f64, f64) {
        let (a, b) = self.cell(i);
        (a - 0.25 * self.r, b + 0.25 * self.r)
    }

    /// Cells whose enlarged range contains `v`.
    fn cells_containing(&self, v: f64) -> impl Iterator<Item = usize> + '_ {
        let q = 0.25 * self.r;
        let first = ((v - q - self.lo) / self.r).floor().max(0.0) as usize;
        let last = (((v + q - self.lo) / self.r).floor().max(0.0) as usize).min(self.cells - 1);
        (first..=last).filter(move |&i| self.hits(i, v))
    }

    fn hits(&self, i: usize, v: f64) -> bool {
        let (a, b) = self.enlarged(i);
        a <= v && v <= b
    }
}

fn exact_cell(x: &BoundedSequence, ideal: &Ideal, grid: &Grid, i: usize) -> Option<Result<bool, SetError>> {
    let levels = x.levels()?;
    let (a, b) = grid.enlarged(i);
    let members: Vec<SetDescription> = levels
        .iter()
        .filter(|l| a <= l.value && l.value <= b)
        .map(|l| l.indices.clone())
        .collect();
    if members.is_empty() {
        return Some(Ok(true));
    }
    Some(ideal.contains_exact(&SetDescription::union_all(members)))
}

/// Per-cell index prefixes for a sampled sequence.
fn bucket(samples: &[f64], grid: &Grid) -> Vec<Vec<u64>> {
    let mut buckets = vec![Vec::new(); grid.cells];
    for (n, &v) in samples.iter().enumerate() {
        for i in grid.cells_containing(v) {
            buckets[i].push(n as u64);
        }
    }
    buckets
}

fn to_cell(small: Option<bool>) -> Cell {
    match small {
        Some(true) => Cell::Small,
        Some(false) => Cell::Positive,
        None => Cell::Undecided,
    }
}

fn assemble(
    cells: &[Cell],
    grid: &Grid,
    candidates: &[f64],
    method: CoreMethod,
) -> Result<ClusterSet, AsymptoticsError> {
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        if *c != Cell::Positive {
            continue;
        }
        match intervals.last_mut() {
            Some(last) if last.1 + 1 == i => last.1 = i,
            _ => intervals.push((i, i)),
        }
    }
    let undecided: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Undecided).collect();
    let (Some(first), Some(last)) = (intervals.first(), intervals.last()) else {
        return Err(AsymptoticsError::NoPositiveCell {
            undecided: undecided.len(),
        });
    };
    let (hull_lo, hull_hi) = (first.0, last.1);
    let outside = undecided.iter().filter(|&&i| i < hull_lo || i > hull_hi).count();
    if outside > 0 {
        return Err(AsymptoticsError::InconclusiveCells {
            count: outside,
            lo: grid.cell(hull_lo).0,
            hi: grid.cell(hull_hi).1,
        });
    }
    let resolved = intervals
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (grid.cell(i).0, grid.cell(j).1);
            let (ea, eb) = (grid.enlarged(i).0, grid.enlarged(j).1);
            let inside = candidates.iter().copied().filter(|&v| ea <= v && v <= eb);
            let (lo, hi) = inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if lo <= hi {
                (lo, hi)
            } else {
                (a, b)
            }
        })
        .collect();
    Ok(ClusterSet {
        intervals: resolved,
        undecided: undecided.iter().map(|&i| grid.cell(i)).collect(),
        method,
    })
}

fn numeric_cells(samples: &[f64], grid: &Grid, ideal: &Ideal, cfg: &CoreConfig) -> Vec<Cell> {
    let estimator = SmallnessEstimator::new(ideal, samples.len() as u64, cfg.theta);
    bucket(samples, grid)
        .into_par_iter()
        .map(|members| to_cell(estimator.looks_small(&PrefixSet::new(samples.len() as u64, members))))
        .collect()
}

/// Tail-window samples, used to resolve numeric interval endpoints.
fn tail_candidates(samples: &[f64]) -> Vec<f64> {
    samples[samples.len() / 2..].to_vec()
}

/// Approximates the set of `I`-cluster points of `x`.
pub fn cluster_points(x: &BoundedSequence, ideal: &Ideal, cfg: &CoreConfig) -> Result<ClusterSet, AsymptoticsError> {
    cfg.validate()?;
    let grid = Grid::new(x.bound(), cfg.grid);
    let numeric_method = CoreMethod::Numeric {
        horizon: cfg.horizon,
        grid: cfg.grid,
        theta: cfg.theta,
    };
    if cfg.exact && x.is_structured() {
        let decisions: Vec<Result<bool, SetError>> = (0..grid.cells)
            .into_par_iter()
            .map(|i| exact_cell(x, ideal, &grid, i).expect("structured sequence"))
            .collect();
        let fallback = decisions.iter().any(Result::is_err);
        let numeric = if fallback {
            Some(numeric_cells(&x.sample(cfg.horizon), &grid, ideal, cfg))
        } else {
            None
        };
        let cells: Vec<Cell> = decisions
            .iter()
            .enumerate()
            .map(|(i, d)| match d {
                Ok(true) => Cell::Small,
                Ok(false) => Cell::Positive,
                Err(_) => numeric.as_ref().expect("numeric fallback computed")[i],
            })
            .collect();
        let levels = x.levels().expect("structured sequence");
        let candidates: Vec<f64> = levels
            .iter()
            .filter(|l| !matches!(ideal.contains_exact(&l.indices), Ok(true)))
            .map(|l| l.value)
            .collect();
        let method = if fallback { numeric_method } else { CoreMethod::Grid { grid: cfg.grid } };
        return assemble(&cells, &grid, &candidates, method);
    }
    let samples = x.sample(cfg.horizon);
    let cells = numeric_cells(&samples, &grid, ideal, cfg);
    assemble(&cells, &grid, &tail_candidates(&samples), numeric_method)
}

/// Cluster set of a sampled sequence `x_0, …, x_{N-1}` with `|x_n| ≤ bound`.
pub fn cluster_points_of_samples(
    samples: &[f64],
    bound: f64,
    ideal: &Ideal,
    cfg: &CoreConfig,
) -> Result<ClusterSet, AsymptoticsError> {
    let cfg = CoreConfig {
        horizon: samples.len() as u64,
        ..*cfg
    };
    cfg.validate()?;
    let grid = Grid::new(bound, cfg.grid);
    let cells = numeric_cells(samples, &grid, ideal, &cfg);
    assemble(
        &cells,
        &grid,
        &tail_candidates(samples),
        CoreMethod::Numeric {
            horizon: cfg.horizon,
            grid: cfg.grid,
            theta: cfg.theta,
        },
    )
}

pub fn ideal_limsup(x: &BoundedSequence, ideal: &Ideal, cfg: &CoreConfig) -> Result<f64, AsymptoticsError> {
    cluster_points(x, ideal, cfg).map(|c| c.max())
}

pub fn ideal_liminf(x: &BoundedSequence, ideal: &Ideal, cfg: &CoreConfig) -> Result<f64, AsymptoticsError> {
    cluster_points(x, ideal, cfg).map(|c| c.min())
}

/// `[I-liminf x, I-limsup x]`.
pub fn core(x: &BoundedSequence, ideal: &Ideal, cfg: &CoreConfig) -> Result<CoreInterval, AsymptoticsError> {
    cluster_points(x, ideal, cfg).map(|c| c.core())
}

pub fn core_of_samples(
    samples: &[f64],
    bound: f64,
    ideal: &Ideal,
    cfg: &CoreConfig,
) -> Result<CoreInterval, AsymptoticsError> {
    cluster_points_of_samples(samples, bound, ideal, cfg).map(|c| c.core())
}

/// Symbolic core: extreme values among the level sets that are `I`-positive.
pub fn oracle_core(x: &BoundedSequence, ideal: &Ideal) -> Result<CoreInterval, AsymptoticsError> {
    let levels = x
        .levels()
        .ok_or_else(|| AsymptoticsError::UnsupportedInstance(format!("{} has no level structure", x.label())))?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for l in levels {
        let small = ideal
            .contains_exact(&l.indices)
            .map_err(|e| AsymptoticsError::UnsupportedInstance(format!("{} at level {}: {e}", x.label(), l.value)))?;
        if !small {
            lo = lo.min(l.value);
            hi = hi.max(l.value);
        }
    }
    if lo > hi {
        return Err(AsymptoticsError::UnsupportedInstance(format!(
            "{}: levels do not cover a positive set",
            x.label()
        )));
    }
    Ok(CoreInterval {
        lo,
        hi,
        method: CoreMethod::Exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{corpus_entry, indicator, signed_indicator};

    fn cfg() -> CoreConfig {
        CoreConfig::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-2
    }

    #[test]
    fn alternating_under_fin() {
        let x = corpus_entry("(-1)^n").unwrap();
        for c in [cfg(), cfg().numeric()] {
            let cl = cluster_points(&x, &Ideal::fin(), &c).unwrap();
            assert_eq!(cl.intervals, vec![(-1.0, -1.0), (1.0, 1.0)]);
            assert_eq!(ideal_limsup(&x, &Ideal::fin(), &c).unwrap(), 1.0);
            let k = core(&x, &Ideal::fin(), &c).unwrap();
            assert_eq!((k.lo, k.hi), (-1.0, 1.0));
        }
    }

    #[test]
    fn squares_under_density_zero() {
        let x = indicator(SetDescription::squares());
        let cl = cluster_points(&x, &Ideal::density_zero(), &cfg()).unwrap();
        assert_eq!(cl.intervals, vec![(0.0, 0.0)]);
        assert_eq!(ideal_limsup(&x, &Ideal::density_zero(), &cfg()).unwrap(), 0.0);
        // under Fin the squares are infinite, so 1 is a cluster point
        assert_eq!(ideal_limsup(&x, &Ideal::fin(), &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn evens_under_density_zero() {
        let x = indicator(SetDescription::evens());
        let z = Ideal::density_zero();
        assert_eq!(ideal_limsup(&x, &z, &cfg()).unwrap(), 1.0);
        let k = core(&x, &z, &cfg()).unwrap();
        assert_eq!((k.lo, k.hi), (0.0, 1.0));
        let o = oracle_core(&x, &z).unwrap();
        assert_eq!((o.lo, o.hi, o.method), (0.0, 1.0, CoreMethod::Exact));
    }

    #[test]
    fn equidistributed_sequence() {
        let x = corpus_entry("frac(n*phi)").unwrap();
        let cl = cluster_points(&x, &Ideal::fin(), &cfg()).unwrap();
        assert_eq!(cl.intervals.len(), 1);
        let (lo, hi) = cl.intervals[0];
        assert!(close(lo, 0.0) && close(hi, 1.0), "{lo} {hi}");
        // oracle by direct scan: every cell of [0,1) is visited in the tail window
        let n = cfg().horizon;
        for c in 0..100 {
            let (a, b) = (c as f64 / 100.0, (c + 1) as f64 / 100.0);
            assert!((n / 2..n).any(|k| (a..b).contains(&x.eval(k))));
        }
        assert!(matches!(oracle_core(&x, &Ideal::fin()), Err(AsymptoticsError::UnsupportedInstance(_))));
    }

    #[test]
    fn oracle_examples() {
        let z = Ideal::density_zero();
        let o = oracle_core(&indicator(SetDescription::squares()), &z).unwrap();
        assert_eq!((o.lo, o.hi), (0.0, 0.0));
        let s = signed_indicator(SetDescription::evens(), SetDescription::odds()).unwrap();
        let o = oracle_core(&s, &Ideal::fin()).unwrap();
        assert_eq!((o.lo, o.hi), (-1.0, 1.0));
    }

    #[test]
    fn constant_sequence_has_a_single_cluster_point() {
        for v in [0.0, 0.37, -2.0] {
            let k = core(&crate::sequences::constant(v), &Ideal::fin(), &cfg()).unwrap();
            assert_eq!((k.lo, k.hi), (v, v));
        }
    }

    #[test]
    fn samples_path_matches_sequence_path() {
        let x = corpus_entry("periodic(0,1/2,1)").unwrap();
        let s = x.sample(10_000);
        let cl = cluster_points_of_samples(&s, 1.0, &Ideal::fin(), &cfg()).unwrap();
        assert_eq!(cl.intervals, vec![(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]);
    }

    #[test]
    fn config_validation() {
        let bad = CoreConfig { horizon: 10, ..cfg() };
        assert!(matches!(
            core(&corpus_entry("1_evens").unwrap(), &Ideal::fin(), &bad),
            Err(AsymptoticsError::InvalidConfig(_))
        ));
    }

    #[test]
    fn grid_cell_lookup() {
        let g = Grid::new(1.0, 0.01);
        assert_eq!(g.cells, 200);
        let at = |v: f64| g.cells_containing(v).collect::<Vec<_>>();
        assert_eq!(at(-1.0), vec![0]);
        assert_eq!(at(1.0), vec![199]);
        assert_eq!(at(0.0), vec![99, 100]);
        assert!(at(5.0).is_empty());
        assert!(at(-5.0).is_empty());
    }
}
