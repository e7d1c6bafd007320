//! Pairwise advantage matrices and exact fairness verdicts.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FractionalAllocation, Instance, IntegralAllocation, Kind, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapKind {
    /// `v_i(A_i) - v_i(A_i')`
    Goods,
    /// `c_i(A_i') - c_i(A_i)`
    Chores,
}

impl From<Kind> for GapKind {
    fn from(kind: Kind) -> Self {
        match kind {
            Kind::Goods => GapKind::Goods,
            Kind::Chores => GapKind::Chores,
        }
    }
}

/// `pair_gaps[i][i']` is the advantage of an agent of group `i` over an agent
/// of group `i'`. The diagonal is zero and excluded from `min_gap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport<T> {
    pub pair_gaps: Vec<Vec<T>>,
    /// `None` when there is a single group.
    pub min_gap: Option<T>,
    pub kind: GapKind,
}

/// Exact gaps for an integral allocation.
pub fn gap_report(instance: &Instance, allocation: &IntegralAllocation) -> Result<GapReport<Rational>> {
    allocation.check_dimensions(instance)?;
    let d = instance.groups();
    let mut gaps = vec![vec![Rational::zero(); d]; d];
    let mut min_gap: Option<Rational> = None;
    for i in 0..d {
        let own = instance.bundle_value(i, allocation.bundle(i));
        for other in 0..d {
            if other == i {
                continue;
            }
            let theirs = instance.bundle_value(i, allocation.bundle(other));
            let gap = match instance.kind() {
                Kind::Goods => &own - theirs,
                Kind::Chores => theirs - &own,
            };
            if min_gap.as_ref().is_none_or(|m| &gap < m) {
                min_gap = Some(gap.clone());
            }
            gaps[i][other] = gap;
        }
    }
    Ok(GapReport {
        pair_gaps: gaps,
        min_gap,
        kind: instance.kind().into(),
    })
}

/// Floating-point gaps for a fractional allocation.
pub fn fractional_gap_report(
    instance: &Instance,
    allocation: &FractionalAllocation,
) -> Result<GapReport<f64>> {
    allocation.check_dimensions(instance)?;
    let d = instance.groups();
    let mut gaps = vec![vec![0.0; d]; d];
    let mut min_gap: Option<f64> = None;
    for i in 0..d {
        let own = instance.bundle_value_f64(i, &allocation.shares[i]);
        for other in 0..d {
            if other == i {
                continue;
            }
            let theirs = instance.bundle_value_f64(i, &allocation.shares[other]);
            let gap = match instance.kind() {
                Kind::Goods => own - theirs,
                Kind::Chores => theirs - own,
            };
            min_gap = Some(min_gap.map_or(gap, |m| m.min(gap)));
            gaps[i][other] = gap;
        }
    }
    Ok(GapReport {
        pair_gaps: gaps,
        min_gap,
        kind: instance.kind().into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Notion {
    Ef,
    StrongEf,
    Prop,
    StrongProp,
    /// Transfer-EFX: moving any single item from the envied bundle to the
    /// envier removes the envy.
    Tefx,
}

impl std::str::FromStr for Notion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "EF" => Ok(Notion::Ef),
            "STRONG_EF" => Ok(Notion::StrongEf),
            "PROP" => Ok(Notion::Prop),
            "STRONG_PROP" => Ok(Notion::StrongProp),
            "TEFX" => Ok(Notion::Tefx),
            other => Err(Error::Parse {
                location: "notion".into(),
                message: format!("unknown fairness notion {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Envy { group: usize, envied: usize },
    Proportionality { group: usize },
    Transfer { group: usize, envied: usize, item_type: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub notion: Notion,
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl Verdict {
    fn pass(notion: Notion) -> Self {
        Self {
            notion,
            holds: true,
            witness: None,
        }
    }

    fn fail(notion: Notion, witness: Witness) -> Self {
        Self {
            notion,
            holds: false,
            witness: Some(witness),
        }
    }
}

/// Exact verdict for a complete integral allocation. The first failing pair
/// (or group) in index order is reported as the witness.
pub fn verify(instance: &Instance, allocation: &IntegralAllocation, notion: Notion) -> Result<Verdict> {
    allocation.check_complete(instance)?;
    match notion {
        Notion::Ef | Notion::StrongEf => {
            let strict = notion == Notion::StrongEf;
            let report = gap_report(instance, allocation)?;
            for (i, row) in report.pair_gaps.iter().enumerate() {
                for (other, gap) in row.iter().enumerate() {
                    if other == i {
                        continue;
                    }
                    let ok = if strict { gap.is_positive() } else { !gap.is_negative() };
                    if !ok {
                        return Ok(Verdict::fail(notion, Witness::Envy { group: i, envied: other }));
                    }
                }
            }
            Ok(Verdict::pass(notion))
        }
        Notion::Prop | Notion::StrongProp => {
            let strict = notion == Notion::StrongProp;
            let n = Rational::from_integer(instance.agents().into());
            for i in 0..instance.groups() {
                // per-agent form of n_i * v_i(A_i) >= n_i * v_i(M) / n
                let own = instance.bundle_value(i, allocation.bundle(i)) * &n;
                let total = instance.total_value(i);
                let ok = match (instance.kind(), strict) {
                    (Kind::Goods, false) => own >= total,
                    (Kind::Goods, true) => own > total,
                    (Kind::Chores, false) => own <= total,
                    (Kind::Chores, true) => own < total,
                };
                if !ok {
                    return Ok(Verdict::fail(notion, Witness::Proportionality { group: i }));
                }
            }
            Ok(Verdict::pass(notion))
        }
        Notion::Tefx => {
            if instance.kind() != Kind::Goods {
                return Err(Error::UnsupportedScope(
                    "transfer-EFX is defined for goods".into(),
                ));
            }
            let d = instance.groups();
            for i in 0..d {
                let own = instance.bundle_value(i, allocation.bundle(i));
                for other in 0..d {
                    if other == i {
                        continue;
                    }
                    let theirs = instance.bundle_value(i, allocation.bundle(other));
                    for (z, &count) in allocation.bundle(other).iter().enumerate() {
                        if count == 0 {
                            continue;
                        }
                        let v = instance.value(i, z);
                        if &own + v < &theirs - v {
                            return Ok(Verdict::fail(
                                notion,
                                Witness::Transfer {
                                    group: i,
                                    envied: other,
                                    item_type: z,
                                },
                            ));
                        }
                    }
                }
            }
            Ok(Verdict::pass(notion))
        }
    }
}

/// Removing any single item of the envied bundle removes the envy (goods).
pub fn is_efx(instance: &Instance, allocation: &IntegralAllocation) -> Result<bool> {
    allocation.check_complete(instance)?;
    let d = instance.groups();
    for i in 0..d {
        let own = instance.bundle_value(i, allocation.bundle(i));
        for other in 0..d {
            if other == i {
                continue;
            }
            let theirs = instance.bundle_value(i, allocation.bundle(other));
            for (z, &count) in allocation.bundle(other).iter().enumerate() {
                if count > 0 && own < &theirs - instance.value(i, z) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthogonal() -> Instance {
        Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![1, 0], vec![0, 1]], Kind::Goods)
            .unwrap()
    }

    #[test]
    fn identity_allocation_on_orthogonal_rows() {
        let inst = orthogonal();
        let alloc = IntegralAllocation::new(vec![vec![1, 0], vec![0, 1]]);
        let report = gap_report(&inst, &alloc).unwrap();
        assert_eq!(report.min_gap, Some(Rational::from_integer(1.into())));
        assert!(verify(&inst, &alloc, Notion::StrongEf).unwrap().holds);
    }

    #[test]
    fn symmetric_cases_have_zero_gaps() {
        let inst =
            Instance::from_integers(vec![1, 1], vec![4], &[vec![3], vec![3]], Kind::Goods).unwrap();
        let alloc = IntegralAllocation::new(vec![vec![2], vec![2]]);
        assert!(gap_report(&inst, &alloc).unwrap().min_gap.unwrap().is_zero());
        assert!(verify(&inst, &alloc, Notion::Ef).unwrap().holds);
        assert!(!verify(&inst, &alloc, Notion::StrongEf).unwrap().holds);

        let chores =
            Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![1, 1], vec![1, 1]], Kind::Chores)
                .unwrap();
        let alloc = IntegralAllocation::new(vec![vec![1, 0], vec![0, 1]]);
        let report = gap_report(&chores, &alloc).unwrap();
        assert!(report.pair_gaps.iter().flatten().all(Zero::is_zero));
    }

    #[test]
    fn tefx_witness() {
        let inst =
            Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![10, 1], vec![10, 1]], Kind::Goods)
                .unwrap();
        let alloc = IntegralAllocation::new(vec![vec![0, 0], vec![1, 1]]);
        let verdict = verify(&inst, &alloc, Notion::Tefx).unwrap();
        assert!(!verdict.holds);
        assert_eq!(
            verdict.witness,
            Some(Witness::Transfer {
                group: 0,
                envied: 1,
                item_type: 1
            })
        );
    }

    #[test]
    fn proportionality_uses_population_share() {
        // group of 2 and group of 1; 3 copies of one type
        let inst =
            Instance::from_integers(vec![2, 1], vec![3], &[vec![1], vec![1]], Kind::Goods).unwrap();
        let alloc = IntegralAllocation::new(vec![vec![1], vec![1]]);
        assert!(verify(&inst, &alloc, Notion::Prop).unwrap().holds);
        assert!(!verify(&inst, &alloc, Notion::StrongProp).unwrap().holds);
    }

    #[test]
    fn chores_envy_direction() {
        let inst =
            Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![1, 3], vec![3, 1]], Kind::Chores)
                .unwrap();
        let good = IntegralAllocation::new(vec![vec![1, 0], vec![0, 1]]);
        let bad = IntegralAllocation::new(vec![vec![0, 1], vec![1, 0]]);
        assert!(verify(&inst, &good, Notion::StrongEf).unwrap().holds);
        assert!(!verify(&inst, &bad, Notion::Ef).unwrap().holds);
        assert!(verify(&inst, &good, Notion::Prop).unwrap().holds);
    }

    #[test]
    fn incomplete_allocations_are_rejected() {
        let inst = orthogonal();
        let alloc = IntegralAllocation::new(vec![vec![1, 0], vec![0, 0]]);
        assert!(matches!(
            verify(&inst, &alloc, Notion::Ef),
            Err(Error::IncompleteAllocation { .. })
        ));
    }
}
