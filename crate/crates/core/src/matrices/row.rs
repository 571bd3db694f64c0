use std::collections::BTreeMap;

use crate::numeric::CompensatedSum;

/// Constant-valued run of columns `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Run {
    pub start: u64,
    pub end: u64,
    pub value: f64,
}

impl Run {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// One materialized row: sorted disjoint runs plus a bound on the mass beyond them.
///
/// `Σ_{k outside runs} |a_{n,k}| ≤ tail`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row {
    runs: Vec<Run>,
    tail: f64,
}

impl Row {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Row from `(column, value)` pairs; duplicate columns are added.
    pub fn from_entries(entries: impl IntoIterator<Item = (u64, f64)>) -> Self {
        Self::from_runs(entries.into_iter().map(|(k, v)| Run {
            start: k,
            end: k + 1,
            value: v,
        }))
    }

    /// Normalizes arbitrary (possibly overlapping) runs by summing overlaps.
    pub fn from_runs(runs: impl IntoIterator<Item = Run>) -> Self {
        Self::combine(runs.into_iter().map(|r| (1.0, r)), 0.0)
    }

    pub fn uniform(start: u64, end: u64, value: f64) -> Self {
        Self::from_runs([Run { start, end, value }])
    }

    pub fn with_tail(mut self, tail: f64) -> Self {
        self.tail = tail;
        self
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn is_finitely_supported(&self) -> bool {
        self.tail == 0.0
    }

    /// Sweep-line sum of scaled runs; adjacent equal runs merge and zeros drop.
    ///
    /// Segments covered by few runs are summed afresh, so cancellation is exact
    /// there; otherwise a compensated running level is used.
    pub fn combine(scaled: impl IntoIterator<Item = (f64, Run)>, tail: f64) -> Self {
        const FRESH: usize = 16;
        let mut events: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
        for (id, (c, r)) in scaled.into_iter().enumerate() {
            if r.is_empty() || c * r.value == 0.0 {
                continue;
            }
            events.entry(r.start).or_default().push((id, c * r.value));
            events.entry(r.end).or_default().push((id, f64::NAN));
        }
        let mut runs: Vec<Run> = Vec::new();
        let mut active: BTreeMap<usize, f64> = BTreeMap::new();
        let mut level = CompensatedSum::new();
        let mut prev: Option<u64> = None;
        for (k, changes) in events {
            if let Some(p) = prev {
                let v = if active.len() <= FRESH {
                    active.values().copied().sum::<CompensatedSum>().value()
                } else {
                    level.value()
                };
                if v != 0.0 && p < k {
                    match runs.last_mut() {
                        Some(last) if last.end == p && last.value == v => last.end = k,
                        _ => runs.push(Run { start: p, end: k, value: v }),
                    }
                }
            }
            for (id, v) in changes {
                if v.is_nan() {
                    if let Some(old) = active.remove(&id) {
                        level.add(-old);
                    }
                } else {
                    active.insert(id, v);
                    level.add(v);
                }
            }
            prev = Some(k);
        }
        Self { runs, tail }
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, other: &Row, c: f64) -> Row {
        let scaled = self
            .runs
            .iter()
            .map(|r| (1.0, *r))
            .chain(other.runs.iter().map(|r| (c, *r)));
        Row::combine(scaled, self.tail + c.abs() * other.tail)
    }

    pub fn scale(&self, c: f64) -> Row {
        if c == 0.0 {
            return Row::empty();
        }
        Row {
            runs: self.runs.iter().map(|r| Run { value: c * r.value, ..*r }).collect(),
            tail: c.abs() * self.tail,
        }
    }

    /// Applies `f` to every stored value (e.g. positive or negative part).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Row {
        Row::from_runs(self.runs.iter().map(|r| Run { value: f(r.value), ..*r })).with_tail(self.tail)
    }

    pub fn get(&self, k: u64) -> f64 {
        let i = self.runs.partition_point(|r| r.end <= k);
        match self.runs.get(i) {
            Some(r) if r.start <= k => r.value,
            _ => 0.0,
        }
    }

    /// Explicit `(column, value)` pairs of the stored support.
    pub fn entries(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.runs.iter().flat_map(|r| (r.start..r.end).map(move |k| (k, r.value)))
    }

    /// One past the largest stored column.
    pub fn support_end(&self) -> u64 {
        self.runs.last().map_or(0, |r| r.end)
    }

    pub fn sum(&self) -> f64 {
        self.runs.iter().map(|r| r.value * r.len() as f64).sum::<CompensatedSum>().value()
    }

    pub fn abs_sum(&self) -> f64 {
        self.runs.iter().map(|r| r.value.abs() * r.len() as f64).sum::<CompensatedSum>().value()
    }

    pub fn max_entry(&self) -> f64 {
        self.runs.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.runs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min).min(0.0)
    }

    /// `Σ_k f(a_{n,k})·w_k` where `count(a, b)` returns `Σ_{a≤k<b} w_k`.
    pub fn weighted_sum(&self, f: impl Fn(f64) -> f64, count: impl Fn(u64, u64) -> f64) -> f64 {
        self.runs
            .iter()
            .map(|r| f(r.value) * count(r.start, r.end))
            .sum::<CompensatedSum>()
            .value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_merges_and_cancels() {
        let a = Row::from_entries([(0, 1.0), (1, -2.0)]);
        let b = Row::from_entries([(1, 2.0), (2, 3.0)]);
        let s = a.add_scaled(&b, 1.0);
        assert_eq!(s.entries().collect::<Vec<_>>(), vec![(0, 1.0), (2, 3.0)]);
        let u = Row::uniform(0, 3, 0.5).add_scaled(&Row::uniform(3, 6, 0.5), 1.0);
        assert_eq!(u.runs().len(), 1);
        assert_eq!(u.runs()[0], Run { start: 0, end: 6, value: 0.5 });
    }

    #[test]
    fn lookups_and_sums() {
        let r = Row::uniform(2, 6, 0.25).add_scaled(&Row::from_entries([(10, -1.0)]), 1.0);
        assert_eq!(r.get(1), 0.0);
        assert_eq!(r.get(2), 0.25);
        assert_eq!(r.get(5), 0.25);
        assert_eq!(r.get(6), 0.0);
        assert_eq!(r.get(10), -1.0);
        assert_eq!(r.sum(), 0.0);
        assert_eq!(r.abs_sum(), 2.0);
        assert_eq!(r.support_end(), 11);
        assert_eq!(r.max_entry(), 0.25);
    }

    #[test]
    fn overlapping_runs_add() {
        let r = Row::from_runs([
            Run { start: 0, end: 4, value: 1.0 },
            Run { start: 2, end: 6, value: 1.0 },
        ]);
        assert_eq!(r.entries().map(|e| e.1).collect::<Vec<_>>(), vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn tail_propagates() {
        let r = Row::from_entries([(0, 1.0)]).with_tail(0.1);
        assert_eq!(r.scale(-3.0).tail(), 0.30000000000000004);
        assert_eq!(r.add_scaled(&r, 2.0).tail(), 0.1 + 0.2);
        assert!(!r.is_finitely_supported());
    }
}
