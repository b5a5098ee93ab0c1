use std::cmp::Ordering;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::EngineError;

/// Ordered positions of the N particles of a system.
///
/// Entries are finite and ascending; the constructors enforce this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration(Vec<f64>);

impl Configuration {
    /// Ranks the input. Ties keep their original index order.
    pub fn new(raw: Vec<f64>) -> Result<Self, EngineError> {
        rank_sort(raw)
    }

    /// `n` particles all at `x`.
    pub fn uniform(n: usize, x: f64) -> Result<Self, EngineError> {
        Self::new(vec![x; n])
    }

    pub(crate) fn from_sorted_unchecked(v: Vec<f64>) -> Self {
        debug_assert!(is_sorted(&v));
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn leftmost(&self) -> f64 {
        self.0[0]
    }

    pub fn rightmost(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// The mirror image `x -> -x`, re-ranked.
    pub fn mirrored(&self) -> Self {
        Self(self.0.iter().rev().map(|x| -x).collect())
    }

    /// `-|x|` applied to every entry, re-ranked.
    pub fn negated_abs(&self) -> Self {
        let mut v: Vec<f64> = self.0.iter().map(|x| -x.abs()).collect();
        v.sort_by(f64::total_cmp);
        Self(v)
    }

    /// Every entry shifted by `dx`.
    pub fn shifted(&self, dx: f64) -> Self {
        Self(self.0.iter().map(|x| x + dx).collect())
    }
}

impl Index<usize> for Configuration {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = EngineError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Self {
        c.0
    }
}

fn is_sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

/// Rank the components of a vector, ties broken by original index.
pub fn rank_sort(mut raw: Vec<f64>) -> Result<Configuration, EngineError> {
    if raw.is_empty() {
        return Err(EngineError::EmptyConfiguration);
    }
    if let Some(pos) = raw.iter().position(|x| !x.is_finite()) {
        return Err(EngineError::NonFinite { index: pos });
    }
    // slice::sort_by is stable.
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(Configuration(raw))
}

/// `a ≼ b`: for every threshold `c`, `a` has no more entries `>= c` than `b`.
///
/// Counts only change at entry values, so it is enough to scan the merged
/// entries from the top down.
pub fn compare_left_of(a: &Configuration, b: &Configuration) -> bool {
    left_of_sorted(a.as_slice(), b.as_slice())
}

pub(crate) fn left_of_sorted(a: &[f64], b: &[f64]) -> bool {
    let (mut i, mut j) = (a.len(), b.len());
    while i > 0 {
        let c = a[i - 1].max(if j > 0 { b[j - 1] } else { f64::NEG_INFINITY });
        while i > 0 && a[i - 1] >= c {
            i -= 1;
        }
        while j > 0 && b[j - 1] >= c {
            j -= 1;
        }
        if a.len() - i > b.len() - j {
            return false;
        }
    }
    true
}

fn check_rank(n: usize, rank: usize) -> Result<(), EngineError> {
    if rank == 0 || rank > n {
        Err(EngineError::RankOutOfRange { rank, n })
    } else {
        Ok(())
    }
}

/// Duplicate the particle of rank `rank` (1-based) and kill the leftmost.
pub fn apply_l(v: &Configuration, rank: usize) -> Result<Configuration, EngineError> {
    check_rank(v.len(), rank)?;
    let mut out = v.0.clone();
    l_in_place(&mut out, rank);
    Ok(Configuration(out))
}

/// Duplicate the particle of rank `rank` (1-based) and kill the particle of
/// largest magnitude; `|v_1| >= |v_N|` kills the leftmost.
pub fn apply_k(v: &Configuration, rank: usize) -> Result<Configuration, EngineError> {
    check_rank(v.len(), rank)?;
    let mut out = v.0.clone();
    k_in_place(&mut out, rank);
    Ok(Configuration(out))
}

/// `(v_2, .., v_i, v_i, .., v_N)` on a sorted slice.
pub(crate) fn l_in_place(v: &mut [f64], rank: usize) {
    if rank <= 1 {
        return;
    }
    v[..rank].rotate_left(1);
    v[rank - 1] = v[rank - 2];
}

/// Which end `k` kills for this sorted slice.
pub(crate) fn k_kills_left(v: &[f64]) -> bool {
    v[0].abs() >= v[v.len() - 1].abs()
}

pub(crate) fn k_in_place(v: &mut [f64], rank: usize) {
    if k_kills_left(v) {
        l_in_place(v, rank);
        return;
    }
    let n = v.len();
    if rank == n {
        return;
    }
    v[rank - 1..].rotate_right(1);
    v[rank - 1] = v[rank];
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(v: &[f64]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    /// Threshold-count definition, checked at every entry value and midpoint.
    fn left_of_by_thresholds(a: &[f64], b: &[f64]) -> bool {
        let mut cs: Vec<f64> = a.iter().chain(b).copied().collect();
        cs.sort_by(f64::total_cmp);
        let mut probes = cs.clone();
        for w in cs.windows(2) {
            probes.push(0.5 * (w[0] + w[1]));
        }
        probes.push(cs[0] - 1.0);
        probes.push(cs[cs.len() - 1] + 1.0);
        probes.iter().all(|&c| a.iter().filter(|&&x| x >= c).count() <= b.iter().filter(|&&x| x >= c).count())
    }

    #[test]
    fn rank_sort_examples() {
        assert_eq!(cfg(&[3.0, 1.0, 2.0]).as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(cfg(&[0.0, 0.0]).as_slice(), &[0.0, 0.0]);
        assert_eq!(cfg(&[-1.5, -1.5, 2.0]).as_slice(), &[-1.5, -1.5, 2.0]);
    }

    #[test]
    fn rank_sort_rejects_non_finite() {
        assert!(matches!(rank_sort(vec![1.0, f64::NAN]), Err(EngineError::NonFinite { index: 1 })));
        assert!(rank_sort(vec![f64::INFINITY]).is_err());
        assert!(rank_sort(vec![]).is_err());
    }

    #[test]
    fn left_of_examples() {
        assert!(compare_left_of(&cfg(&[1.0, 2.0]), &cfg(&[1.0, 3.0])));
        let a = cfg(&[0.0, 5.0]);
        let b = cfg(&[1.0, 2.0]);
        assert!(!compare_left_of(&a, &b));
        assert!(!compare_left_of(&b, &a));
        assert!(compare_left_of(&cfg(&[0.0]), &cfg(&[0.0, 0.0])));
        assert!(!compare_left_of(&cfg(&[0.0, 0.0]), &cfg(&[0.0])));
    }

    #[test]
    fn l_examples() {
        assert_eq!(apply_l(&cfg(&[1.0, 2.0, 3.0]), 1).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(apply_l(&cfg(&[1.0, 2.0, 3.0]), 2).unwrap().as_slice(), &[2.0, 2.0, 3.0]);
        assert_eq!(apply_l(&cfg(&[-2.0, 0.0, 7.0]), 3).unwrap().as_slice(), &[0.0, 7.0, 7.0]);
    }

    #[test]
    fn k_examples() {
        assert_eq!(apply_k(&cfg(&[-3.0, 0.0, 2.0]), 2).unwrap().as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(apply_k(&cfg(&[-1.0, 0.0, 5.0]), 2).unwrap().as_slice(), &[-1.0, 0.0, 0.0]);
        // |v_1| = |v_N| kills the leftmost.
        assert_eq!(apply_k(&cfg(&[-2.0, 1.0, 2.0]), 1).unwrap().as_slice(), &[-2.0, 1.0, 2.0]);
        assert_eq!(apply_k(&cfg(&[-2.0, 1.0, 2.0]), 3).unwrap().as_slice(), &[1.0, 2.0, 2.0]);
    }

    #[test]
    fn k_second_branch_edges() {
        assert_eq!(apply_k(&cfg(&[0.0, 1.0, 5.0]), 3).unwrap().as_slice(), &[0.0, 1.0, 5.0]);
        assert_eq!(apply_k(&cfg(&[0.0, 1.0, 5.0]), 1).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn rank_out_of_range() {
        let v = cfg(&[1.0, 2.0]);
        assert!(matches!(apply_l(&v, 0), Err(EngineError::RankOutOfRange { .. })));
        assert!(matches!(apply_k(&v, 3), Err(EngineError::RankOutOfRange { .. })));
    }

    #[test]
    fn single_particle_operators_are_identity() {
        let v = cfg(&[0.3]);
        assert_eq!(apply_l(&v, 1).unwrap(), v);
        assert_eq!(apply_k(&v, 1).unwrap(), v);
    }

    fn sorted_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        // A coarse lattice makes ties common.
        prop::collection::vec((-6i32..=6).prop_map(|k| f64::from(k) * 0.5), 1..=max_len).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v
        })
    }

    fn same_len_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max_len).prop_flat_map(|n| {
            let one = prop::collection::vec((-6i32..=6).prop_map(|k| f64::from(k) * 0.5), n);
            (one.clone(), one).prop_map(|(mut a, mut b)| {
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                (a, b)
            })
        })
    }

    fn multiset_diff(pre: &[f64], post: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut removed = pre.to_vec();
        let mut added = Vec::new();
        for &x in post {
            if let Some(p) = removed.iter().position(|&y| y == x) {
                removed.remove(p);
            } else {
                added.push(x);
            }
        }
        (removed, added)
    }

    proptest! {
        #[test]
        fn rank_sort_is_sorted_permutation(raw in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let c = rank_sort(raw.clone()).unwrap();
            prop_assert!(is_sorted(c.as_slice()));
            let mut expected = raw;
            expected.sort_by(f64::total_cmp);
            prop_assert_eq!(c.as_slice(), expected.as_slice());
        }

        #[test]
        fn l_identity_at_rank_one(v in sorted_vec(8)) {
            let c = Configuration(v);
            prop_assert_eq!(apply_l(&c, 1).unwrap(), c);
        }

        #[test]
        fn operators_keep_sorted_and_conserve((v, i) in sorted_vec(6).prop_flat_map(|v| {
            let n = v.len();
            (Just(v), 1..=n)
        })) {
            let c = Configuration(v.clone());
            for out in [apply_l(&c, i).unwrap(), apply_k(&c, i).unwrap()] {
                prop_assert!(is_sorted(out.as_slice()));
                prop_assert_eq!(out.len(), v.len());
                let (removed, added) = multiset_diff(&v, out.as_slice());
                // One entry removed, one duplicated (or nothing, when the
                // duplicate replaces an equal value).
                prop_assert!(removed.len() == added.len() && removed.len() <= 1);
                if let Some(&a) = added.first() {
                    prop_assert_eq!(a, v[i - 1]);
                }
            }
        }

        #[test]
        fn k_left_of_l((v, i) in sorted_vec(5).prop_flat_map(|v| {
            let n = v.len();
            (Just(v), 1..=n)
        })) {
            let c = Configuration(v);
            prop_assert!(compare_left_of(&apply_k(&c, i).unwrap(), &apply_l(&c, i).unwrap()));
        }

        #[test]
        fn l_is_monotone((a, b) in same_len_pair(5), i in 1usize..=5) {
            let (a, b) = if left_of_sorted(&a, &b) { (a, b) } else if left_of_sorted(&b, &a) { (b, a) } else {
                // Make an ordered pair out of an incomparable one.
                let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
                (a, hi)
            };
            let i = i.min(a.len());
            let la = apply_l(&Configuration(a.clone()), i).unwrap();
            let lb = apply_l(&Configuration(b.clone()), i).unwrap();
            prop_assert!(left_of_sorted(&a, &b));
            prop_assert!(compare_left_of(&la, &lb));
        }

        #[test]
        fn left_of_matches_threshold_definition(a in sorted_vec(5), b in sorted_vec(5)) {
            prop_assert_eq!(left_of_sorted(&a, &b), left_of_by_thresholds(&a, &b));
        }

        #[test]
        fn left_of_equal_sizes_is_componentwise((a, b) in same_len_pair(6)) {
            let componentwise = a.iter().zip(&b).all(|(x, y)| x <= y);
            prop_assert_eq!(left_of_sorted(&a, &b), componentwise);
        }

        #[test]
        fn left_of_reflexive_transitive((a, b) in same_len_pair(5), shift in 0.0f64..2.0) {
            prop_assert!(left_of_sorted(&a, &a));
            let c: Vec<f64> = b.iter().map(|x| x + shift).collect();
            if left_of_sorted(&a, &b) {
                prop_assert!(left_of_sorted(&b, &c));
                prop_assert!(left_of_sorted(&a, &c));
            }
        }
    }
}
