//! Infinite real matrices with lazily materialized, cached sparse rows.

mod row;

pub use row::{Row, Run};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::numeric::CompensatedSum;
use crate::sequences::BoundedSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("cannot compose: row {row} of the left factor {label} has infinite support")]
    ComposeUnsupported { label: String, row: u64 },
    #[error("explicit matrix row {row} has duplicate or unsorted column {column}")]
    BadExplicitRow { row: u64, column: u64 },
}

/// Produces row `n` of a matrix. Must be deterministic.
pub trait RowSource: Send + Sync {
    fn row(&self, n: u64) -> Row;
}

impl<F> RowSource for F
where
    F: Fn(u64) -> Row + Send + Sync,
{
    fn row(&self, n: u64) -> Row {
        self(n)
    }
}

struct Inner {
    label: String,
    source: Box<dyn RowSource>,
    /// Certified `sup_n Σ_k |a_{n,k}|`, when known by construction.
    bound: Option<f64>,
    identity: bool,
    cache: RwLock<HashMap<u64, Arc<Row>>>,
}

/// Cheaply clonable handle to a lazily evaluated infinite matrix.
#[derive(Clone)]
pub struct InfiniteMatrix(Arc<Inner>);

impl fmt::Debug for InfiniteMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InfiniteMatrix({})", self.0.label)
    }
}

/// Sup row sum over a horizon, and whether a construction-level bound backs it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub sup_rowsum: f64,
    pub certified: bool,
    /// The declared global bound, if any.
    pub declared: Option<f64>,
}

impl InfiniteMatrix {
    pub fn new(label: impl Into<String>, bound: Option<f64>, source: impl RowSource + 'static) -> Self {
        InfiniteMatrix(Arc::new(Inner {
            label: label.into(),
            source: Box::new(source),
            bound,
            identity: false,
            cache: RwLock::new(HashMap::new()),
        }))
    }

    pub fn label(&self) -> &str {
        &self.0.label
    }

    /// Whether this is the identity matrix, so `Ax = x` keeps level structure.
    pub fn is_identity(&self) -> bool {
        self.0.identity
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.0.bound
    }

    pub fn relabel(&self, label: impl Into<String>) -> Self {
        let inner = self.clone();
        InfiniteMatrix::new(label, self.0.bound, move |n| (*inner.row(n)).clone())
    }

    pub fn row(&self, n: u64) -> Arc<Row> {
        if let Some(r) = self.0.cache.read().expect("row cache poisoned").get(&n) {
            return r.clone();
        }
        let row = Arc::new(self.0.source.row(n));
        self.0
            .cache
            .write()
            .expect("row cache poisoned")
            .entry(n)
            .or_insert(row)
            .clone()
    }

    pub fn entry(&self, n: u64, k: u64) -> f64 {
        self.row(n).get(k)
    }

    /// Number of rows currently cached.
    pub fn cached_rows(&self) -> usize {
        self.0.cache.read().expect("row cache poisoned").len()
    }

    /// Whether every row below `horizon` is entrywise nonnegative.
    pub fn is_nonnegative_below(&self, horizon: u64) -> Result<(), (u64, u64)> {
        for n in 0..horizon {
            let row = self.row(n);
            if let Some(r) = row.runs().iter().find(|r| r.value < 0.0) {
                return Err((n, r.start));
            }
        }
        Ok(())
    }

    /// One past the largest column used by rows below `horizon`.
    pub fn column_extent(&self, horizon: u64) -> u64 {
        (0..horizon).map(|n| self.row(n).support_end()).max().unwrap_or(0)
    }
}

/// `A_n x = Σ_k a_{n,k} x_k`, compensated. Error at most `τ_n·‖x‖`.
pub fn transform(a: &InfiniteMatrix, x: &BoundedSequence, n: u64) -> f64 {
    let row = a.row(n);
    row.entries().map(|(k, v)| v * x.eval(k)).sum::<CompensatedSum>().value()
}

/// `(A_0 x, …, A_{N-1} x)` using prefix sums of `x` over long runs.
pub fn transform_prefix(a: &InfiniteMatrix, x: &BoundedSequence, horizon: u64) -> Vec<f64> {
    let extent = a.column_extent(horizon);
    let xs = x.sample(extent);
    let mut prefix = Vec::with_capacity(xs.len() + 1);
    let mut acc = CompensatedSum::new();
    prefix.push(0.0);
    for &v in &xs {
        acc.add(v);
        prefix.push(acc.value());
    }
    (0..horizon)
        .map(|n| {
            let row = a.row(n);
            let mut s = CompensatedSum::new();
            for r in row.runs() {
                if r.len() <= 32 {
                    for k in r.start..r.end {
                        s.add(r.value * xs[k as usize]);
                    }
                } else {
                    s.add(r.value * (prefix[r.end as usize] - prefix[r.start as usize]));
                }
            }
            s.value()
        })
        .collect()
}

/// `sup_{n<N} (Σ_k |a_{n,k}| + τ_n)`.
pub fn norm_estimate(a: &InfiniteMatrix, horizon: u64) -> NormEstimate {
    let horizon = horizon.max(1);
    let sup = (0..horizon)
        .map(|n| {
            let r = a.row(n);
            r.abs_sum() + r.tail()
        })
        .fold(0.0, f64::max);
    NormEstimate {
        sup_rowsum: sup,
        certified: a.declared_bound().is_some(),
        declared: a.declared_bound(),
    }
}

/// `(A⁺, A⁻)` with `A = A⁺ − A⁻` and both parts nonnegative.
pub fn pos_neg_split(a: &InfiniteMatrix) -> (InfiniteMatrix, InfiniteMatrix) {
    let (p, m) = (a.clone(), a.clone());
    let bound = a.declared_bound();
    (
        InfiniteMatrix::new(format!("{}+", a.label()), bound, move |n| p.row(n).map_values(|v| v.max(0.0))),
        InfiniteMatrix::new(format!("{}-", a.label()), bound, move |n| m.row(n).map_values(|v| (-v).max(0.0))),
    )
}

pub fn matrix_sum(a: &InfiniteMatrix, b: &InfiniteMatrix) -> InfiniteMatrix {
    let bound = a.declared_bound().zip(b.declared_bound()).map(|(x, y)| x + y);
    let (a2, b2) = (a.clone(), b.clone());
    InfiniteMatrix::new(format!("({} + {})", a.label(), b.label()), bound, move |n| {
        a2.row(n).add_scaled(&b2.row(n), 1.0)
    })
}

pub fn scalar_mul(c: f64, a: &InfiniteMatrix) -> InfiniteMatrix {
    let bound = a.declared_bound().map(|b| c.abs() * b);
    let a2 = a.clone();
    InfiniteMatrix::new(format!("{c}*{}", a.label()), bound, move |n| a2.row(n).scale(c))
}

/// `BA`; row `n` is `Σ_j b_{n,j}·(row j of A)`.
///
/// Requires finite support in each row of `B`; checked on `check_rows` rows
/// up front and again lazily on every materialized row (panicking there, since
/// a row source cannot return errors).
pub fn compose(b: &InfiniteMatrix, a: &InfiniteMatrix, check_rows: u64) -> Result<InfiniteMatrix, MatrixError> {
    for n in 0..check_rows {
        if !b.row(n).is_finitely_supported() {
            return Err(MatrixError::ComposeUnsupported {
                label: b.label().to_string(),
                row: n,
            });
        }
    }
    let bound = a.declared_bound().zip(b.declared_bound()).map(|(x, y)| x * y);
    let (a2, b2) = (a.clone(), b.clone());
    Ok(InfiniteMatrix::new(format!("{}·{}", b.label(), a.label()), bound, move |n| {
        let brow = b2.row(n);
        assert!(
            brow.is_finitely_supported(),
            "{}",
            MatrixError::ComposeUnsupported {
                label: b2.label().to_string(),
                row: n
            }
        );
        let mut tail = 0.0;
        let mut parts = Vec::new();
        for (j, w) in brow.entries() {
            let arow = a2.row(j);
            tail += w.abs() * arow.tail();
            parts.extend(arow.runs().iter().map(|r| (w, *r)));
        }
        Row::combine(parts, tail)
    }))
}

/// Cesàro means: row `n` averages `x_0, …, x_n` with weights `1/(n+1)`.
pub fn cesaro() -> InfiniteMatrix {
    InfiniteMatrix::new("Cesaro", Some(1.0), |n: u64| Row::uniform(0, n + 1, 1.0 / (n + 1) as f64))
}

pub fn identity() -> InfiniteMatrix {
    InfiniteMatrix(Arc::new(Inner {
        label: "Identity".into(),
        source: Box::new(|n: u64| Row::from_entries([(n, 1.0)])),
        bound: Some(1.0),
        identity: true,
        cache: RwLock::new(HashMap::new()),
    }))
}

pub fn zero() -> InfiniteMatrix {
    InfiniteMatrix::new("Zero", Some(0.0), |_n: u64| Row::empty())
}

pub fn diagonal(d: &BoundedSequence) -> InfiniteMatrix {
    let d2 = d.clone();
    InfiniteMatrix::new(format!("diag({})", d.label()), Some(d.bound()), move |n| {
        Row::from_entries([(n, d2.eval(n))])
    })
}

/// Finitely many explicit rows; rows past the list are zero.
pub fn explicit(label: impl Into<String>, rows: Vec<Vec<(u64, f64)>>) -> Result<InfiniteMatrix, MatrixError> {
    for (n, r) in rows.iter().enumerate() {
        if let Some(w) = r.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(MatrixError::BadExplicitRow {
                row: n as u64,
                column: w[1].0,
            });
        }
    }
    let rows: Vec<Row> = rows.into_iter().map(Row::from_entries).collect();
    let bound = rows.iter().map(Row::abs_sum).fold(0.0, f64::max);
    Ok(InfiniteMatrix::new(label, Some(bound), move |n: u64| {
        rows.get(n as usize).cloned().unwrap_or_default()
    }))
}

/// Seeded nonnegative matrix with a declared bound.
///
/// The pair `(seed, index)` picks one of a few row shapes (trailing window
/// averages, single-column selections, two-column mixtures, prefix averages)
/// and a row mass; rows are then deterministic functions of `n`.
pub fn random_nonnegative(seed: u64, index: u64) -> InfiniteMatrix {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::numeric::splitmix64(seed ^ crate::numeric::splitmix64(index)));
    let mass = [1.0, 1.0, 1.0, 0.5][rng.random_range(0..4)];
    let label = format!("random({seed},{index})");
    match rng.random_range(0..5) {
        0 => {
            let w: u64 = [1, 2, 4, 8][rng.random_range(0..4)];
            InfiniteMatrix::new(format!("{label}:window{w}x{mass}"), Some(mass), move |n: u64| {
                let start = (n + 1).saturating_sub(w);
                Row::uniform(start, n + 1, mass / (n + 1 - start) as f64)
            })
        }
        1 => {
            let c: u64 = [1, 1, 2][rng.random_range(0..3)];
            let b: u64 = rng.random_range(0..5);
            InfiniteMatrix::new(format!("{label}:select({c}n+{b})x{mass}"), Some(mass), move |n: u64| {
                Row::from_entries([(c * n + b, mass)])
            })
        }
        2 => {
            let p = (rng.random_range(20..=80) as f64) / 100.0;
            InfiniteMatrix::new(format!("{label}:mix({p})x{mass}"), Some(mass), move |n: u64| {
                Row::from_entries([(n, p * mass), (2 * n, (1.0 - p) * mass)])
            })
        }
        3 => InfiniteMatrix::new(format!("{label}:prefix x{mass}"), Some(mass), move |n: u64| {
            Row::uniform(0, n + 1, mass / (n + 1) as f64)
        }),
        _ => {
            // diagonal with a vanishing leak to column 0
            InfiniteMatrix::new(format!("{label}:leaky-diagonal x{mass}"), Some(mass), move |n: u64| {
                let leak = mass / (n + 2) as f64;
                if n == 0 {
                    Row::from_entries([(0, mass)])
                } else {
                    Row::from_entries([(0, leak), (n, mass - leak)])
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideals::SetDescription;
    use crate::sequences::{corpus_entry, indicator};

    #[test]
    fn cesaro_rows() {
        let c = cesaro();
        assert_eq!(c.row(1).entries().collect::<Vec<_>>(), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(c.row(0).entries().collect::<Vec<_>>(), vec![(0, 1.0)]);
        for n in [0u64, 1, 9, 999, 10_000] {
            assert!((c.row(n).sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn builtin_rows() {
        assert_eq!(identity().row(7).entries().collect::<Vec<_>>(), vec![(7, 1.0)]);
        let d = diagonal(&crate::sequences::geometric());
        assert_eq!(d.row(3).entries().collect::<Vec<_>>(), vec![(3, 0.125)]);
    }

    #[test]
    fn transform_examples() {
        let alt = corpus_entry("(-1)^n").unwrap();
        assert_eq!(transform(&cesaro(), &alt, 3), 0.0);
        // row 4 averages x_0..x_4 = (1-1+1-1+1)/5
        assert!((transform(&cesaro(), &alt, 4) - 0.2).abs() < 1e-15);
        for n in 0..20 {
            assert_eq!(transform(&identity(), &alt, n), alt.eval(n));
        }
    }

    #[test]
    fn transform_prefix_agrees_with_direct() {
        let x = corpus_entry("frac(n*phi)").unwrap();
        let c = cesaro();
        let fast = transform_prefix(&c, &x, 300);
        for n in [0u64, 1, 50, 299] {
            assert!((fast[n as usize] - transform(&c, &x, n)).abs() < 1e-12);
        }
    }

    #[test]
    fn norms() {
        let e = norm_estimate(&cesaro(), 1000);
        assert!((e.sup_rowsum - 1.0).abs() <= 1e-12 && e.certified);
        assert_eq!(norm_estimate(&identity(), 10).sup_rowsum, 1.0);
        let two = scalar_mul(2.0, &identity());
        assert_eq!(norm_estimate(&two, 10).sup_rowsum, 2.0);
        assert_eq!(two.declared_bound(), Some(2.0));
        let uncertified = InfiniteMatrix::new("u", None, |n: u64| Row::from_entries([(n, 1.0)]));
        assert!(!norm_estimate(&uncertified, 5).certified);
    }

    #[test]
    fn split_examples() {
        let a = explicit("a", vec![vec![(0, 1.0), (1, -2.0)]]).unwrap();
        let (p, m) = pos_neg_split(&a);
        assert_eq!((p.entry(0, 0), p.entry(0, 1)), (1.0, 0.0));
        assert_eq!((m.entry(0, 0), m.entry(0, 1)), (0.0, 2.0));
        let (_, cm) = pos_neg_split(&cesaro());
        assert!((0..50).all(|n| cm.row(n).runs().is_empty()));
        let back = matrix_sum(&p, &scalar_mul(-1.0, &m));
        for n in 0..3 {
            for k in 0..3 {
                assert_eq!(back.entry(n, k), a.entry(n, k));
            }
        }
        // negation swaps the parts
        let (np, nm) = pos_neg_split(&scalar_mul(-1.0, &a));
        assert_eq!((np.entry(0, 1), nm.entry(0, 0)), (2.0, 1.0));
    }

    #[test]
    fn algebra_on_window() {
        let c = cesaro();
        let s = matrix_sum(&c, &zero());
        for n in 0..=100 {
            for k in 0..=100 {
                assert_eq!(s.entry(n, k), c.entry(n, k));
            }
        }
    }

    #[test]
    fn compose_with_selection_rows() {
        let sel = InfiniteMatrix::new("rk(2n)", Some(1.0), |n: u64| Row::from_entries([(2 * n, 1.0)]));
        let c = cesaro();
        let ba = compose(&sel, &c, 100).unwrap();
        for n in 0..50 {
            assert_eq!(*ba.row(n), *c.row(2 * n));
        }
        let infinite = InfiniteMatrix::new("inf", None, |_n: u64| Row::from_entries([(0, 0.5)]).with_tail(0.5));
        assert!(matches!(compose(&infinite, &c, 3), Err(MatrixError::ComposeUnsupported { row: 0, .. })));
    }

    #[test]
    fn explicit_validation() {
        assert!(explicit("bad", vec![vec![(2, 1.0), (1, 1.0)]]).is_err());
        let m = explicit("m", vec![vec![(0, 0.5), (3, -0.5)], vec![(1, 2.0)]]).unwrap();
        assert_eq!(m.declared_bound(), Some(2.0));
        assert_eq!(m.entry(5, 5), 0.0);
    }

    #[test]
    fn random_matrices_are_seeded_and_nonnegative() {
        for i in 0..20 {
            let a = random_nonnegative(42, i);
            let b = random_nonnegative(42, i);
            assert_eq!(a.label(), b.label());
            assert!(a.is_nonnegative_below(200).is_ok());
            let est = norm_estimate(&a, 200);
            assert!(est.sup_rowsum <= a.declared_bound().unwrap() + 1e-12);
            for n in [0u64, 5, 199] {
                assert_eq!(*a.row(n), *b.row(n));
            }
        }
        let labels: std::collections::HashSet<String> = (0..20).map(|i| random_nonnegative(42, i).label().to_string()).collect();
        assert!(labels.len() > 5);
    }

    #[test]
    fn cache_is_shared_across_threads() {
        let c = cesaro();
        std::thread::scope(|s| {
            for _ in 0..4 {
                let c = c.clone();
                s.spawn(move || {
                    for n in 0..200 {
                        assert!((c.row(n).sum() - 1.0).abs() < 1e-12);
                    }
                });
            }
        });
        assert_eq!(c.cached_rows(), 200);
        let _ = indicator(SetDescription::evens());
    }
}
