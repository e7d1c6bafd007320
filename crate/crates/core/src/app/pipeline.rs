use serde::Serialize;

use crate::conditions::{ef_condition_chores, ef_condition_goods, ConditionReport};
use crate::error::{Error, Result};
use crate::fairness::{gap_report, verify, GapReport, Notion, Verdict};
use crate::lp::{build_gap_lp, solve, sparsify_to_vertex, Certificate, Sparsified};
use crate::mechanisms::{log_relative_norm, relative_norm, MechanismOutput};
use crate::model::{Instance, IntegralAllocation, Kind, Rational};
use crate::rounding::{check_copy_preconditions, round_envy, round_envy_unchecked, RoundingTrace};

/// Everything produced by one run of the envy-freeness pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutcome {
    pub mechanism: MechanismOutput,
    pub lp_alpha: f64,
    pub certificate: Option<Certificate>,
    pub sparsified: Sparsified,
    pub allocation: IntegralAllocation,
    pub trace: RoundingTrace,
    /// Envy-freeness of the rounded allocation itself, before any fallback.
    pub rounded_ef: Verdict,
    /// The rounded allocation was not envy-free and every `k_z` is a
    /// multiple of `n`, so the uniform split (identical bundles) replaced it.
    pub uniform_fallback: bool,
    #[serde(skip)]
    pub gaps: GapReport<Rational>,
    pub ef: Verdict,
    pub strong_ef: Verdict,
    pub condition: Option<ConditionReport>,
    /// Set when the copy-count precondition failed and the run was forced.
    pub precondition: Option<String>,
}

impl PipelineOutcome {
    /// 0 when the allocation is envy-free, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.ef.holds {
            0
        } else {
            2
        }
    }
}

/// Closed-form mechanism, max-min gap program, vertex sparsification,
/// three-phase rounding and exact verification.
///
/// Without `force`, a failed copy-count precondition aborts the run.
pub fn pipeline_allocate(instance: &Instance, force: bool) -> Result<PipelineOutcome> {
    let precondition = match check_copy_preconditions(instance) {
        Ok(()) => None,
        Err(Error::Precondition(msg)) if force => Some(msg),
        Err(e) => return Err(e),
    };
    let mechanism = match instance.kind() {
        Kind::Goods => relative_norm(instance)?,
        Kind::Chores => log_relative_norm(instance)?,
    };
    let gap = build_gap_lp(instance)?;
    let solution = solve(&gap.lp)?;
    let sparsified = sparsify_to_vertex(&gap, &solution, instance)?;
    let (allocation, trace) = if precondition.is_some() {
        round_envy_unchecked(instance, &sparsified.allocation)?
    } else {
        round_envy(instance, &sparsified.allocation)?
    };
    let rounded_ef = verify(instance, &allocation, Notion::Ef)?;
    let n = instance.agents();
    let uniform_fallback = !rounded_ef.holds && instance.type_copies().iter().all(|k| k % n == 0);
    let allocation = if uniform_fallback {
        uniform_split(instance)
    } else {
        allocation
    };
    let gaps = gap_report(instance, &allocation)?;
    let ef = verify(instance, &allocation, Notion::Ef)?;
    let strong_ef = verify(instance, &allocation, Notion::StrongEf)?;
    let condition = match instance.kind() {
        Kind::Goods => ef_condition_goods(instance).ok(),
        Kind::Chores => ef_condition_chores(instance).ok(),
    };
    Ok(PipelineOutcome {
        mechanism,
        lp_alpha: solution.objective_value,
        certificate: solution.certificate,
        sparsified,
        allocation,
        trace,
        rounded_ef,
        uniform_fallback,
        gaps,
        ef,
        strong_ef,
        condition,
        precondition,
    })
}

/// Every agent receives `k_z / n` copies of each type. Needs `n | k_z`.
pub fn uniform_split(instance: &Instance) -> IntegralAllocation {
    let n = instance.agents();
    let share: Vec<u64> = instance.type_copies().iter().map(|k| k / n).collect();
    IntegralAllocation::new(vec![share; instance.groups()])
}
