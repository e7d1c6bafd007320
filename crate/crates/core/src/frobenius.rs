//! Nonnegative integer combinations of the group sizes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `k = sum_i coefficients[i] * sizes[i]`
    pub coefficients: Vec<u64>,
}

impl Decomposition {
    pub fn total(&self, sizes: &[u64]) -> u64 {
        self.coefficients.iter().zip(sizes).map(|(x, n)| x * n).sum()
    }
}

/// Lexicographically smallest `x >= 0` (minimizing `x[0]`, then `x[1]`, ...)
/// with `sum x[i] * sizes[i] == k`, or `None` when `k` is not representable.
///
/// `suffix[s][v]` records whether `v` is reachable with `sizes[s..]`; the
/// coefficients are then read off greedily from the front.
pub fn decompose(sizes: &[u64], k: u64) -> Option<Decomposition> {
    if sizes.contains(&0) {
        return (k == 0).then(|| Decomposition {
            coefficients: vec![0; sizes.len()],
        });
    }
    let d = sizes.len();
    let k_us = usize::try_from(k).ok()?;
    let mut suffix = vec![vec![false; k_us + 1]; d + 1];
    suffix[d][0] = true;
    for s in (0..d).rev() {
        let step = sizes[s] as usize;
        for v in 0..=k_us {
            suffix[s][v] = suffix[s + 1][v] || (v >= step && suffix[s][v - step]);
        }
    }
    if !suffix[0][k_us] {
        return None;
    }
    let mut remaining = k_us;
    let mut coefficients = Vec::with_capacity(d);
    for s in 0..d {
        let step = sizes[s] as usize;
        let mut x = 0usize;
        while !suffix[s + 1][remaining - x * step] {
            x += 1;
        }
        remaining -= x * step;
        coefficients.push(x as u64);
    }
    debug_assert_eq!(remaining, 0);
    Some(Decomposition { coefficients })
}

pub fn is_representable(sizes: &[u64], k: u64) -> bool {
    decompose(sizes, k).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::thresholds;

    /// Plain coin-change reachability, independent of `decompose`.
    fn reachable(sizes: &[u64], limit: u64) -> Vec<bool> {
        let mut r = vec![false; limit as usize + 1];
        r[0] = true;
        for v in 1..=limit as usize {
            r[v] = sizes
                .iter()
                .any(|&s| s as usize <= v && r[v - s as usize]);
        }
        r
    }

    #[test]
    fn examples() {
        assert_eq!(decompose(&[5, 7], 11), None);
        assert_eq!(decompose(&[5, 7], 0).unwrap().coefficients, vec![0, 0]);
        assert_eq!(decompose(&[5, 7], 24).unwrap().coefficients, vec![2, 2]);
        assert_eq!(decompose(&[3], 7), None);
        assert_eq!(decompose(&[3], 9).unwrap().coefficients, vec![3]);
        assert!(!is_representable(&[5, 7], 23));
        assert!(is_representable(&[5, 7], 24));
        assert!(!is_representable(&[2, 3], 1));
    }

    #[test]
    fn lexicographic_choice() {
        // 12 = 2*6 = 4*3; smallest first coefficient wins
        assert_eq!(decompose(&[2, 3], 12).unwrap().coefficients, vec![0, 4]);
        assert_eq!(decompose(&[1, 1], 1).unwrap().coefficients, vec![0, 1]);
    }

    #[test]
    fn agrees_with_reachability() {
        for sizes in [vec![5u64, 7], vec![3], vec![4, 6], vec![6, 10, 15], vec![2, 3], vec![1, 1, 1]] {
            let th = thresholds(&sizes).unwrap();
            let limit = 5 * th.theta + 100;
            let oracle = reachable(&sizes, limit);
            for k in 0..=limit {
                let got = decompose(&sizes, k);
                assert_eq!(got.is_some(), oracle[k as usize], "{sizes:?} k={k}");
                if let Some(dec) = got {
                    assert_eq!(dec.total(&sizes), k);
                }
            }
        }
    }
}
