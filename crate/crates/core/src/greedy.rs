//! Greedy allocation of goods by the first agent's valuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, IntegralAllocation, Kind, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyTrace {
    /// Items in processing order: descending by the first agent's value,
    /// ties in index order.
    pub order: Vec<usize>,
    /// `recipients[s]` received `order[s]`.
    pub recipients: Vec<usize>,
}

/// Hand out items from most to least valuable (for agent 0), each to the
/// agent whose bundle agent 0 values least, ties to the smallest index.
pub fn greedy_allocate(instance: &Instance) -> Result<(IntegralAllocation, GreedyTrace)> {
    if instance.kind() != Kind::Goods || !instance.is_single_agent_groups() || !instance.is_unit_copies() {
        return Err(Error::UnsupportedScope(
            "greedy allocation needs goods, single-agent groups and one copy per item".into(),
        ));
    }
    let n = instance.groups();
    let m = instance.types();
    let reference = &instance.values()[0];
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| reference[b].cmp(&reference[a]));

    let mut counts = vec![vec![0u64; m]; n];
    let mut worth = vec![Rational::from_integer(0.into()); n];
    let mut recipients = Vec::with_capacity(m);
    for &j in &order {
        let poorest = (0..n)
            .min_by(|&a, &b| worth[a].cmp(&worth[b]).then(a.cmp(&b)))
            .unwrap_or(0);
        counts[poorest][j] = 1;
        worth[poorest] += &reference[j];
        recipients.push(poorest);
    }
    Ok((IntegralAllocation::new(counts), GreedyTrace { order, recipients }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{is_efx, verify, Notion};

    fn goods(rows: &[Vec<i64>]) -> Instance {
        Instance::from_integers(vec![1; rows.len()], vec![1; rows[0].len()], rows, Kind::Goods).unwrap()
    }

    #[test]
    fn identical_three_items() {
        let inst = goods(&[vec![1, 3, 2], vec![1, 3, 2]]);
        let (alloc, trace) = greedy_allocate(&inst).unwrap();
        assert_eq!(trace.order, vec![1, 2, 0]);
        assert_eq!(trace.recipients, vec![0, 1, 1]);
        assert_eq!(alloc.bundle(0), &[0, 1, 0]);
        assert_eq!(alloc.bundle(1), &[1, 0, 1]);
        assert!(is_efx(&inst, &alloc).unwrap());
        assert!(verify(&inst, &alloc, Notion::Tefx).unwrap().holds);
    }

    #[test]
    fn single_item_goes_to_first_agent() {
        let inst = goods(&[vec![5], vec![7]]);
        let (alloc, _) = greedy_allocate(&inst).unwrap();
        assert_eq!(alloc.bundle(0), &[1]);
    }

    #[test]
    fn equal_items_balance() {
        let inst = goods(&[vec![1; 9], vec![1; 9], vec![1; 9]]);
        let (alloc, trace) = greedy_allocate(&inst).unwrap();
        assert_eq!(trace.order, (0..9).collect::<Vec<_>>());
        for i in 0..3 {
            assert_eq!(alloc.bundle(i).iter().sum::<u64>(), 3);
        }
    }

    #[test]
    fn rejects_chores() {
        let inst = Instance::from_integers(vec![1, 1], vec![1], &[vec![1], vec![1]], Kind::Chores).unwrap();
        assert!(greedy_allocate(&inst).is_err());
    }
}
