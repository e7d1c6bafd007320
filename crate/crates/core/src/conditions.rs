//! Sufficient conditions for envy-free, proportional and transfer-EFX
//! allocations, the copy-count bounds that guarantee them, and the technical
//! inequalities their proofs rely on.

use serde::{Deserialize, Serialize};

use crate::divergence::{chi_squared, kullback_leibler, total_variation};
use crate::error::{Error, Result};
use crate::mechanisms::{harmonic_means, harmonic_penalty};
use crate::model::{Instance, Kind};
use crate::norms::{max_entry, min_entry, normalize_all, normalize_all_unit, thresholds, weighted_sq_distance, Norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    EfGoods,
    EfGoodsSingleAgents,
    MuGoods,
    EfChores,
    MuChores,
    PropGoods,
    PropChores,
    Tefx,
}

impl std::fmt::Display for Theorem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Theorem::EfGoods => "envy-free goods",
            Theorem::EfGoodsSingleAgents => "envy-free goods, single-agent groups",
            Theorem::MuGoods => "copies for envy-free goods",
            Theorem::EfChores => "envy-free chores",
            Theorem::MuChores => "copies for envy-free chores",
            Theorem::PropGoods => "proportional goods",
            Theorem::PropChores => "proportional chores",
            Theorem::Tefx => "transfer EFX",
        };
        f.write_str(name)
    }
}

/// Whether the condition asks for `lhs <= threshold` or `lhs >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    pub n: u64,
    pub d: usize,
    pub t: usize,
    pub g: u64,
    pub theta: u64,
    /// Smallest pairwise squared distance (goods) or divergence (chores),
    /// when the condition uses one.
    pub min_dissimilarity: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: Theorem,
    pub lhs: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub satisfied: bool,
    /// The inequality holds strictly.
    pub strict: bool,
    /// Distance to the threshold, positive when satisfied.
    pub margin: f64,
    /// Copies per type, a multiple of `g` and at least `theta`. `None` for
    /// conditions that are not copy bounds or when no finite bound exists.
    pub mu_bound: Option<u64>,
    /// The unrounded copy bound.
    pub mu_raw: Option<f64>,
    pub inputs: ConditionInputs,
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(theorem: Theorem, lhs: f64, threshold: f64, direction: Direction, inputs: ConditionInputs) -> Self {
        let margin = match direction {
            Direction::AtMost => threshold - lhs,
            Direction::AtLeast => lhs - threshold,
        };
        Self {
            theorem,
            lhs,
            threshold,
            direction,
            satisfied: margin >= 0.0,
            strict: margin > 0.0,
            margin,
            mu_bound: None,
            mu_raw: None,
            inputs,
            notes: Vec::new(),
        }
    }

    fn vacuous(theorem: Theorem, lhs: f64, inputs: ConditionInputs) -> Self {
        let mut report = Self::new(theorem, lhs, f64::INFINITY, Direction::AtMost, inputs);
        report.notes.push("a single group cannot envy anyone".into());
        report
    }
}

fn require_kind(instance: &Instance, kind: Kind) -> Result<()> {
    if instance.kind() != kind {
        return Err(Error::UnsupportedScope(format!(
            "condition is stated for {kind}, instance holds {}",
            instance.kind()
        )));
    }
    Ok(())
}

fn require_unit_scope(instance: &Instance) -> Result<()> {
    if !instance.is_single_agent_groups() || !instance.is_unit_copies() {
        return Err(Error::UnsupportedScope(
            "condition needs single-agent groups and one copy per item".into(),
        ));
    }
    Ok(())
}

fn inputs(instance: &Instance) -> Result<ConditionInputs> {
    let th = thresholds(instance.group_sizes())?;
    Ok(ConditionInputs {
        n: instance.agents(),
        d: instance.groups(),
        t: instance.types(),
        g: th.g,
        theta: th.theta,
        min_dissimilarity: None,
        lambda: None,
    })
}

/// `d(d-1) + t(theta + n + n_d - d - 1)`, the rounding loss in items.
pub fn rounding_constant(instance: &Instance) -> Result<f64> {
    let th = thresholds(instance.group_sizes())?;
    let d = instance.groups() as f64;
    let t = instance.types() as f64;
    let n = instance.agents() as f64;
    let nd = instance.largest_group() as f64;
    Ok(d * (d - 1.0) + t * (th.theta as f64 + n + nd - d - 1.0))
}

fn min_pairwise(rows: &[Vec<f64>], mut f: impl FnMut(&[f64], &[f64]) -> Result<f64>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for i in 0..rows.len() {
        for other in 0..rows.len() {
            if other != i {
                best = best.min(f(&rows[i], &rows[other])?);
            }
        }
    }
    Ok(best)
}

fn weights(instance: &Instance) -> Vec<f64> {
    instance.type_copies().iter().map(|&k| k as f64).collect()
}

/// Round a copy bound up to an integer that is a multiple of `g` and at
/// least `max(theta, 1)`.
pub fn round_copy_bound(raw: f64, g: u64, theta: u64) -> Option<u64> {
    if !raw.is_finite() {
        return None;
    }
    let base = raw.ceil().max(1.0).max(theta as f64);
    if base > 1e18 {
        return None;
    }
    let base = base as u64;
    Some(base.div_ceil(g) * g)
}

/// `v_max(k) <= sqrt(min_pairs ||v_i(k) - v_i'(k)||^2 / (2n L))` over
/// copy-weighted l2-normalized rows.
pub fn ef_condition_goods(instance: &Instance) -> Result<ConditionReport> {
    require_kind(instance, Kind::Goods)?;
    let normalized = normalize_all(instance, Norm::L2)?;
    let lhs = max_entry(&normalized);
    let mut inp = inputs(instance)?;
    if instance.groups() == 1 {
        return Ok(ConditionReport::vacuous(Theorem::EfGoods, lhs, inp));
    }
    let w = weights(instance);
    let min_d = min_pairwise(&normalized, |a, b| Ok(weighted_sq_distance(a, b, &w)))?;
    let l = rounding_constant(instance)?;
    let threshold = (min_d / (2.0 * inp.n as f64 * l)).sqrt();
    inp.min_dissimilarity = Some(min_d);
    Ok(ConditionReport::new(Theorem::EfGoods, lhs, threshold, Direction::AtMost, inp))
}

/// The single-agent-group form: `v_max(k) <= sqrt(min distance^2 / (2 n^3))`.
pub fn ef_condition_single_agents(instance: &Instance) -> Result<ConditionReport> {
    require_kind(instance, Kind::Goods)?;
    if !instance.is_single_agent_groups() {
        return Err(Error::UnsupportedScope("condition needs single-agent groups".into()));
    }
    let normalized = normalize_all(instance, Norm::L2)?;
    let lhs = max_entry(&normalized);
    let mut inp = inputs(instance)?;
    if instance.groups() == 1 {
        return Ok(ConditionReport::vacuous(Theorem::EfGoodsSingleAgents, lhs, inp));
    }
    let w = weights(instance);
    let min_d = min_pairwise(&normalized, |a, b| Ok(weighted_sq_distance(a, b, &w)))?;
    let n = inp.n as f64;
    let threshold = (min_d / (2.0 * n * n * n)).sqrt();
    inp.min_dissimilarity = Some(min_d);
    Ok(ConditionReport::new(
        Theorem::EfGoodsSingleAgents,
        lhs,
        threshold,
        Direction::AtMost,
        inp,
    ))
}

fn unbounded_mu(theorem: Theorem, instance: &Instance, inp: ConditionInputs, why: &str) -> ConditionReport {
    let lhs = instance.type_copies().iter().copied().min().unwrap_or(0) as f64;
    let mut report = ConditionReport::new(theorem, lhs, f64::INFINITY, Direction::AtLeast, inp);
    report.mu_raw = Some(f64::INFINITY);
    report.notes.push(why.into());
    report
}

fn mu_report(theorem: Theorem, instance: &Instance, raw: f64, inp: ConditionInputs) -> ConditionReport {
    let mu = round_copy_bound(raw, inp.g, inp.theta);
    let lhs = instance.type_copies().iter().copied().min().unwrap_or(0) as f64;
    let threshold = mu.map_or(f64::INFINITY, |m| m as f64);
    let mut report = ConditionReport::new(theorem, lhs, threshold, Direction::AtLeast, inp);
    report.mu_bound = mu;
    report.mu_raw = Some(raw);
    report
}

/// Copies per type that guarantee an envy-free allocation of goods:
/// `2n(d^2 + t(theta + n + n_d - d - 1)) / min ||v_i - v_i'||^2` over
/// unit-normalized rows. The report compares the instance's smallest `k_z`
/// against the rounded bound.
pub fn mu_bound_goods(instance: &Instance) -> Result<ConditionReport> {
    require_kind(instance, Kind::Goods)?;
    let mut inp = inputs(instance)?;
    if instance.groups() < 2 {
        let mut report = mu_report(Theorem::MuGoods, instance, 0.0, inp);
        report.notes.push("a single group cannot envy anyone".into());
        return Ok(report);
    }
    let normalized = normalize_all_unit(instance, Norm::L2)?;
    let ones = vec![1.0; instance.types()];
    let min_d = min_pairwise(&normalized, |a, b| Ok(weighted_sq_distance(a, b, &ones)))?;
    inp.min_dissimilarity = Some(min_d);
    if min_d <= 0.0 {
        return Ok(unbounded_mu(
            Theorem::MuGoods,
            instance,
            inp,
            "two groups have identical normalized values",
        ));
    }
    let th = thresholds(instance.group_sizes())?;
    let d = instance.groups() as f64;
    let t = instance.types() as f64;
    let n = instance.agents() as f64;
    let nd = instance.largest_group() as f64;
    let raw = 2.0 * n * (d * d + t * (th.theta as f64 + n + nd - d - 1.0)) / min_d;
    Ok(mu_report(Theorem::MuGoods, instance, raw, inp))
}

/// `lambda = 2n L`.
pub fn lambda(instance: &Instance) -> Result<f64> {
    Ok(2.0 * instance.agents() as f64 * rounding_constant(instance)?)
}

/// `c_max(k) <= min KL(c_i(k) || c_i'(k)) / (lambda ln(1 / c_min(k)))` over
/// copy-weighted l1-normalized costs.
pub fn ef_condition_chores(instance: &Instance) -> Result<ConditionReport> {
    require_kind(instance, Kind::Chores)?;
    if instance.items() < 2 {
        return Err(Error::Precondition("the chores condition needs at least two items".into()));
    }
    let normalized = normalize_all(instance, Norm::L1)?;
    let lhs = max_entry(&normalized);
    let mut inp = inputs(instance)?;
    if instance.groups() == 1 {
        return Ok(ConditionReport::vacuous(Theorem::EfChores, lhs, inp));
    }
    let w = weights(instance);
    let min_kl = min_pairwise(&normalized, |a, b| kullback_leibler(a, b, &w))?;
    let lam = lambda(instance)?;
    let c_min = min_entry(&normalized);
    let threshold = min_kl / (lam * (1.0 / c_min).ln());
    inp.min_dissimilarity = Some(min_kl);
    inp.lambda = Some(lam);
    Ok(ConditionReport::new(Theorem::EfChores, lhs, threshold, Direction::AtMost, inp))
}

/// Copies per type that guarantee an envy-free allocation of chores:
/// `2(n + (2.5n + lambda - 1) ln(1/c_min) + lambda(ln(2 lambda / KL) - 1)) / KL`
/// with `KL` the smallest pairwise divergence of unit-normalized costs.
pub fn mu_bound_chores(instance: &Instance) -> Result<ConditionReport> {
    require_kind(instance, Kind::Chores)?;
    if instance.items() < 2 {
        return Err(Error::Precondition("the chores bound needs at least two items".into()));
    }
    let mut inp = inputs(instance)?;
    if instance.groups() < 2 {
        let mut report = mu_report(Theorem::MuChores, instance, 0.0, inp);
        report.notes.push("a single group cannot envy anyone".into());
        return Ok(report);
    }
    let normalized = normalize_all_unit(instance, Norm::L1)?;
    let ones = vec![1.0; instance.types()];
    let min_kl = min_pairwise(&normalized, |a, b| kullback_leibler(a, b, &ones))?;
    let lam = lambda(instance)?;
    inp.min_dissimilarity = Some(min_kl);
    inp.lambda = Some(lam);
    if min_kl <= 0.0 {
        return Ok(unbounded_mu(
            Theorem::MuChores,
            instance,
            inp,
            "two groups have identical normalized costs",
        ));
    }
    let n = instance.agents() as f64;
    let log_inv_min = (1.0 / min_entry(&normalized)).ln();
    let log_term = (2.0 * lam / min_kl).ln();
    let raw = 2.0 * (n + (2.5 * n + lam - 1.0) * log_inv_min + lam * (log_term - 1.0)) / min_kl;
    let mut report = mu_report(Theorem::MuChores, instance, raw, inp);
    if log_term < 0.0 {
        report
            .notes
            .push(format!("ln(2 lambda / KL) = {log_term} is negative; formula used as stated"));
    }
    Ok(report)
}

/// Goods: `v_max <= D* / n` with `D* = min_i chi^2(v_i || S)`.
/// Chores: `c_max <= (1/n^2) sum_i sum_j (c_ij - H_j)^2 / c_ij`.
pub fn prop_condition(instance: &Instance) -> Result<ConditionReport> {
    require_unit_scope(instance)?;
    let normalized = normalize_all(instance, Norm::L1)?;
    let n = instance.agents() as f64;
    let m = instance.types();
    let lhs = max_entry(&normalized);
    let mut inp = inputs(instance)?;
    match instance.kind() {
        Kind::Goods => {
            let society: Vec<f64> = (0..m)
                .map(|j| normalized.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect();
            let ones = vec![1.0; m];
            let mut d_star = f64::INFINITY;
            for row in &normalized {
                d_star = d_star.min(chi_squared(row, &society, &ones)?);
            }
            inp.min_dissimilarity = Some(d_star);
            Ok(ConditionReport::new(
                Theorem::PropGoods,
                lhs,
                d_star / n,
                Direction::AtMost,
                inp,
            ))
        }
        Kind::Chores => {
            let h = harmonic_means(&normalized);
            let penalty = harmonic_penalty(&normalized, &h);
            inp.min_dissimilarity = Some(penalty);
            Ok(ConditionReport::new(
                Theorem::PropChores,
                lhs,
                penalty / (n * n),
                Direction::AtMost,
                inp,
            ))
        }
    }
}

/// `v_min >= 8 max_{i,i'} TV(v_i, v_i')` over l1-normalized goods.
pub fn tefx_condition(instance: &Instance) -> Result<ConditionReport> {
    require_kind(instance, Kind::Goods)?;
    require_unit_scope(instance)?;
    let normalized = normalize_all(instance, Norm::L1)?;
    let ones = vec![1.0; instance.types()];
    let mut max_tv = 0.0f64;
    for a in &normalized {
        for b in &normalized {
            max_tv = max_tv.max(total_variation(a, b, &ones));
        }
    }
    let mut inp = inputs(instance)?;
    inp.min_dissimilarity = Some(max_tv);
    let mut report = ConditionReport::new(
        Theorem::Tefx,
        min_entry(&normalized),
        8.0 * max_tv,
        Direction::AtLeast,
        inp,
    );
    report.notes.push("min_dissimilarity holds the largest pairwise total variation".into());
    Ok(report)
}

/// Discretization parameters for a cake with `n` agents whose normalized
/// densities are `k`-Lipschitz and pairwise `delta`-separated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CakeEpsilon {
    /// `max((8k)^(1/3), 2)`, a bound on any normalized density.
    pub density_bound: f64,
    /// Piece length from the formula, before rounding.
    pub epsilon_raw: f64,
    /// `ceil(1 / epsilon_raw)`.
    pub pieces: u64,
    /// `1 / pieces`.
    pub epsilon: f64,
    /// `n * pieces` value queries.
    pub query_budget: u64,
}

pub fn cake_epsilon(n: u64, lipschitz: f64, delta: f64) -> Result<CakeEpsilon> {
    if n < 2 || !(lipschitz > 0.0) || !(delta > 0.0) || !lipschitz.is_finite() {
        return Err(Error::Precondition(format!(
            "need n >= 2, k > 0 and delta > 0; got n = {n}, k = {lipschitz}, delta = {delta}"
        )));
    }
    let m = (8.0 * lipschitz).cbrt().max(2.0);
    let nf = n as f64;
    let a = 3.5 * lipschitz;
    let n3m2 = nf * nf * nf * m * m;
    let branch = ((a * a + 16.0 * n3m2 * delta).sqrt() - a) / (4.0 * n3m2);
    let epsilon_raw = branch.min(1.0 / lipschitz);
    let pieces = (1.0 / epsilon_raw).ceil().max(1.0) as u64;
    Ok(CakeEpsilon {
        density_bound: m,
        epsilon_raw,
        pieces,
        epsilon: 1.0 / pieces as f64,
        query_budget: n * pieces,
    })
}

/// Slack of `x (sqrt(x/(x+a)) b - (1 - sqrt(x/(x+a))))^2 >= b^2 x - a(b+1)`,
/// valid for `a, b >= 0` and `x >= a(b+1)/(2b)`.
pub fn function_lower_bound_slack(x: f64, a: f64, b: f64) -> f64 {
    let r = (x / (x + a)).sqrt();
    let lhs = x * (r * b - (1.0 - r)).powi(2);
    lhs - (b * b * x - a * (b + 1.0))
}

/// Slack of
/// `x((x/(x+a)) b - ln((x+a)/x)) - c ln(x+a) >= (b/2) x - (a(1.5b + 1) + c(ln(2c/b) - 1))`
/// for `x, b > 0` and `a, c >= 0`.
pub fn chores_inequality_slack(x: f64, a: f64, b: f64, c: f64) -> f64 {
    let lhs = x * (x / (x + a) * b - ((x + a) / x).ln()) - if c == 0.0 { 0.0 } else { c * (x + a).ln() };
    let c_term = if c == 0.0 { 0.0 } else { c * ((2.0 * c / b).ln() - 1.0) };
    lhs - (b / 2.0 * x - (a * (1.5 * b + 1.0) + c_term))
}

/// Slack of the goods copies lemma for one pair: with every `k_z` in
/// `[alpha, beta]`,
/// `||v_i(k) - v_i'(k)|| >= sqrt(alpha/beta) ||v_i - v_i'|| - (1 - sqrt(alpha/beta))`.
pub fn copies_lemma_goods_slack(instance: &Instance, i: usize, other: usize, alpha: f64, beta: f64) -> Result<f64> {
    let weighted = normalize_all(instance, Norm::L2)?;
    let unit = normalize_all_unit(instance, Norm::L2)?;
    let w = weights(instance);
    let ones = vec![1.0; instance.types()];
    let lhs = weighted_sq_distance(&weighted[i], &weighted[other], &w).sqrt();
    let base = weighted_sq_distance(&unit[i], &unit[other], &ones).sqrt();
    let r = (alpha / beta).sqrt();
    Ok(lhs - (r * base - (1.0 - r)))
}

/// Slack of the chores copies lemma for one pair:
/// `KL_k >= (alpha/beta) KL - (ln(beta/alpha) + ((beta - alpha)/alpha) ln(1/c_min))`.
pub fn copies_lemma_chores_slack(instance: &Instance, i: usize, other: usize, alpha: f64, beta: f64) -> Result<f64> {
    let weighted = normalize_all(instance, Norm::L1)?;
    let unit = normalize_all_unit(instance, Norm::L1)?;
    let w = weights(instance);
    let ones = vec![1.0; instance.types()];
    let lhs = kullback_leibler(&weighted[i], &weighted[other], &w)?;
    let base = kullback_leibler(&unit[i], &unit[other], &ones)?;
    let c_min = min_entry(&unit);
    let rhs = alpha / beta * base - ((beta / alpha).ln() + (beta - alpha) / alpha * (1.0 / c_min).ln());
    Ok(lhs - rhs)
}
