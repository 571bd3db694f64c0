//! Bounded real sequences evaluated lazily, and the fixed test corpus.
//!
//! A sequence may additionally carry a *level structure*: finitely many values
//! `v_i` with index sets `S_i` partitioning ω, `x_n = v_i` for `n ∈ S_i`.
//! Structured sequences admit exact core computations.

use std::fmt;
use std::sync::Arc;

use crate::ideals::{SetDescription, SetError};

/// Horizon on which `signed_indicator` checks disjointness.
pub const DISJOINTNESS_HORIZON: u64 = 10_000;

/// One value of a finitely-valued sequence with the indices where it is taken.
#[derive(Clone, Debug)]
pub struct Level {
    pub value: f64,
    pub indices: SetDescription,
}

#[derive(Clone)]
pub struct BoundedSequence {
    eval: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
    bound: f64,
    label: String,
    levels: Option<Arc<Vec<Level>>>,
}

impl fmt::Debug for BoundedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedSequence")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .field("structured", &self.levels.is_some())
            .finish()
    }
}

impl BoundedSequence {
    /// # Panics
    /// If `bound` is negative or not finite.
    pub fn from_fn(label: impl Into<String>, bound: f64, eval: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        assert!(bound.is_finite() && bound >= 0.0, "bound must be finite and nonnegative");
        Self {
            eval: Arc::new(eval),
            bound,
            label: label.into(),
            levels: None,
        }
    }

    /// A finitely-valued sequence. Level sets are taken in order: the value at
    /// `n` is that of the first level containing `n`, and indices in no level
    /// get `0`, so callers should pass a partition.
    pub fn from_levels(label: impl Into<String>, levels: Vec<Level>) -> Self {
        let bound = levels.iter().map(|l| l.value.abs()).fold(0.0, f64::max);
        let lv = Arc::new(levels);
        let lookup = lv.clone();
        Self {
            eval: Arc::new(move |n| {
                lookup
                    .iter()
                    .find(|l| l.indices.contains(n))
                    .map_or(0.0, |l| l.value)
            }),
            bound,
            label: label.into(),
            levels: Some(lv),
        }
    }

    pub fn eval(&self, n: u64) -> f64 {
        (self.eval)(n)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn levels(&self) -> Option<&[Level]> {
        self.levels.as_deref().map(Vec::as_slice)
    }

    pub fn is_structured(&self) -> bool {
        self.levels.is_some()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Forgets the level structure, forcing numeric treatment downstream.
    pub fn unstructured(mut self) -> Self {
        self.levels = None;
        self
    }

    /// Values `x_0, …, x_{horizon-1}`.
    pub fn sample(&self, horizon: u64) -> Vec<f64> {
        (0..horizon).map(|n| self.eval(n)).collect()
    }

    /// First index below `horizon` where `|x_n|` exceeds the declared bound.
    pub fn bound_violation(&self, horizon: u64) -> Option<u64> {
        (0..horizon).find(|&n| self.eval(n).abs() > self.bound * (1.0 + 1e-12) + 1e-300)
    }

    /// `α·x + κ`.
    pub fn affine(&self, alpha: f64, kappa: f64) -> BoundedSequence {
        let inner = self.eval.clone();
        let label = format!("{alpha}*({})+{kappa}", self.label);
        let levels = self.levels.as_ref().map(|lv| {
            Arc::new(
                lv.iter()
                    .map(|l| Level {
                        value: alpha * l.value + kappa,
                        indices: l.indices.clone(),
                    })
                    .collect::<Vec<_>>(),
            )
        });
        BoundedSequence {
            eval: Arc::new(move |n| alpha * inner(n) + kappa),
            bound: alpha.abs() * self.bound + kappa.abs(),
            label,
            levels,
        }
    }

    /// Pointwise `x + c·y`; level structure is kept when both operands have one.
    pub fn add_scaled(&self, other: &BoundedSequence, c: f64) -> BoundedSequence {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let levels = match (&self.levels, &other.levels) {
            (Some(la), Some(lb)) => {
                let mut out = Vec::new();
                for x in la.iter() {
                    for y in lb.iter() {
                        out.push(Level {
                            value: x.value + c * y.value,
                            indices: x.indices.clone().intersection(y.indices.clone()),
                        });
                    }
                }
                Some(Arc::new(out))
            }
            _ => None,
        };
        let op = if c == 1.0 { "+".to_string() } else if c == -1.0 { "-".to_string() } else { format!("+{c}*") };
        BoundedSequence {
            eval: Arc::new(move |n| a(n) + c * b(n)),
            bound: self.bound + c.abs() * other.bound,
            label: format!("{}{op}{}", self.label, other.label),
            levels,
        }
    }

    pub fn add(&self, other: &BoundedSequence) -> BoundedSequence {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &BoundedSequence) -> BoundedSequence {
        self.add_scaled(other, -1.0)
    }
}

/// `1_S`.
pub fn indicator(set: SetDescription) -> BoundedSequence {
    let label = format!("1_{set}");
    BoundedSequence::from_levels(
        label,
        vec![
            Level {
                value: 1.0,
                indices: set.clone(),
            },
            Level {
                value: 0.0,
                indices: set.complement(),
            },
        ],
    )
}

/// `1_F − 1_G` for disjoint `F`, `G` (checked below [`DISJOINTNESS_HORIZON`]).
pub fn signed_indicator(f: SetDescription, g: SetDescription) -> Result<BoundedSequence, SetError> {
    f.check_disjoint(&g, DISJOINTNESS_HORIZON)?;
    let label = format!("1_{f}-1_{g}");
    let rest = f.clone().union(g.clone()).complement();
    Ok(BoundedSequence::from_levels(
        label,
        vec![
            Level { value: 1.0, indices: f },
            Level { value: -1.0, indices: g },
            Level { value: 0.0, indices: rest },
        ],
    ))
}

/// `α·x + κ`.
pub fn affine(x: &BoundedSequence, alpha: f64, kappa: f64) -> BoundedSequence {
    x.affine(alpha, kappa)
}

/// `1/(n+1)`.
pub fn harmonic() -> BoundedSequence {
    BoundedSequence::from_fn("1/(n+1)", 1.0, |n| 1.0 / (n + 1) as f64)
}

/// `2^{-n}`.
pub fn geometric() -> BoundedSequence {
    BoundedSequence::from_fn("2^-n", 1.0, |n| 0.5f64.powi(n.min(2000) as i32))
}

pub fn constant(value: f64) -> BoundedSequence {
    BoundedSequence::from_levels(
        format!("{value}"),
        vec![Level {
            value,
            indices: SetDescription::all(),
        }],
    )
}

/// The fixed test corpus.
pub fn corpus() -> Vec<BoundedSequence> {
    let evens = SetDescription::evens();
    let odds = SetDescription::odds();
    let blocks = SetDescription::oscillating_blocks(2);
    let mut out = Vec::new();

    out.push(BoundedSequence::from_levels(
        "(-1)^n",
        vec![
            Level {
                value: 1.0,
                indices: evens.clone(),
            },
            Level {
                value: -1.0,
                indices: odds.clone(),
            },
        ],
    ));
    out.push(indicator(evens.clone()).with_label("1_evens"));
    out.push(indicator(SetDescription::squares()).with_label("1_squares"));
    out.push(indicator(blocks.clone()).with_label("1_blocks"));
    out.push(indicator(SetDescription::progression(1, 3)).with_label("1_AP(1,3)"));
    out.push(
        signed_indicator(blocks.clone(), odds.clone().difference(blocks.clone()))
            .expect("disjoint by construction")
            .with_label("1_F-1_G blocks"),
    );
    out.push(
        signed_indicator(SetDescription::squares(), SetDescription::progression(2, 4))
            .expect("squares avoid 2 mod 4")
            .with_label("1_F-1_G squares"),
    );
    out.push(BoundedSequence::from_levels(
        "periodic(0,1/2,1)",
        vec![
            Level {
                value: 0.0,
                indices: SetDescription::progression(0, 3),
            },
            Level {
                value: 0.5,
                indices: SetDescription::progression(1, 3),
            },
            Level {
                value: 1.0,
                indices: SetDescription::progression(2, 3),
            },
        ],
    ));
    let third = blocks.clone();
    let one = SetDescription::squares().difference(blocks.clone());
    let zero = third.clone().union(one.clone()).complement();
    out.push(BoundedSequence::from_levels(
        "blockwise{0,1/3,1}",
        vec![
            Level {
                value: 1.0 / 3.0,
                indices: third,
            },
            Level { value: 1.0, indices: one },
            Level { value: 0.0, indices: zero },
        ],
    ));
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    out.push(BoundedSequence::from_fn("frac(n*phi)", 1.0, move |n| (n as f64 * phi).fract()));
    out
}

/// Corpus entry by label; accepts `−` (U+2212) for `-`.
pub fn corpus_entry(label: &str) -> Option<BoundedSequence> {
    let wanted = label.replace('\u{2212}', "-");
    corpus().into_iter().find(|x| x.label() == wanted)
}

pub fn corpus_labels() -> Vec<String> {
    corpus().iter().map(|x| x.label().to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_examples() {
        let e = indicator(SetDescription::evens());
        assert_eq!((e.eval(4), e.eval(5)), (1.0, 0.0));
        let empty = indicator(SetDescription::empty());
        assert!((0..100).all(|n| empty.eval(n) == 0.0));
        let sq = indicator(SetDescription::squares());
        assert_eq!((sq.eval(16), sq.eval(17)), (1.0, 0.0));
        assert_eq!(sq.bound(), 1.0);
    }

    #[test]
    fn signed_indicator_examples() {
        let x = signed_indicator(SetDescription::progression(0, 4), SetDescription::progression(2, 4)).unwrap();
        assert_eq!((x.eval(0), x.eval(2), x.eval(1)), (1.0, -1.0, 0.0));
        assert!(matches!(
            signed_indicator(SetDescription::explicit([0]), SetDescription::explicit([0])),
            Err(SetError::Overlap(0))
        ));
        let alt = signed_indicator(SetDescription::evens(), SetDescription::odds()).unwrap();
        assert!((0..50).all(|n| alt.eval(n) == if n % 2 == 0 { 1.0 } else { -1.0 }));
    }

    #[test]
    fn signed_indicator_is_difference_of_indicators() {
        let f = SetDescription::oscillating_blocks(2);
        let g = SetDescription::odds().difference(f.clone());
        let x = signed_indicator(f.clone(), g.clone()).unwrap();
        let (a, b) = (indicator(f), indicator(g));
        assert!((0..10_000).all(|n| x.eval(n) == a.eval(n) - b.eval(n)));
    }

    #[test]
    fn affine_examples() {
        let e = indicator(SetDescription::evens());
        let y = affine(&e, 2.0, 1.0);
        assert_eq!((y.eval(0), y.eval(1)), (3.0, 1.0));
        assert_eq!(y.bound(), 3.0);
        let id = affine(&e, 1.0, 0.0);
        assert!((0..100).all(|n| id.eval(n) == e.eval(n)));
        let levels = y.levels().unwrap();
        assert_eq!(levels[0].value, 3.0);
    }

    #[test]
    fn corpus_contents() {
        let c = corpus();
        assert!(c.len() >= 8);
        let alt = corpus_entry("(−1)^n").expect("unicode minus accepted");
        assert_eq!(alt.bound(), 1.0);
        assert_eq!(corpus_entry("1_squares").unwrap().bound(), 1.0);
        assert!(corpus_entry("nope").is_none());
        let labels = corpus_labels();
        let mut dedup = labels.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), labels.len());
    }

    #[test]
    fn corpus_respects_bounds() {
        for x in corpus() {
            assert_eq!(x.bound_violation(100_000), None, "{}", x.label());
        }
    }

    #[test]
    fn structured_sum_keeps_levels() {
        let x = indicator(SetDescription::evens());
        let y = x.add(&indicator(SetDescription::squares()));
        let lv = y.levels().unwrap();
        assert_eq!(lv.len(), 4);
        for n in 0..1000 {
            let from_levels: f64 = lv.iter().filter(|l| l.indices.contains(n)).map(|l| l.value).sum();
            assert_eq!(from_levels, y.eval(n));
        }
        assert!(x.add(&harmonic()).levels().is_none());
    }
}
