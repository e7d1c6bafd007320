//! Query access to divisible goods on `[0, 1]` and the discretize-then-round
//! protocol for envy-free cake cutting.
//!
//! Densities are piecewise linear with rational breakpoints, so every value
//! query and every piece value is an exact rational.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::app::pipeline::pipeline_allocate;
use crate::conditions::{cake_epsilon, ef_condition_single_agents, CakeEpsilon, ConditionReport};
use crate::error::{Error, Result};
use crate::fairness::{verify, Notion, Verdict};
use crate::model::{Instance, IntegralAllocation, Kind, Rational};

/// A continuous piecewise-linear density on `[0, 1]`, scaled at construction
/// so that it integrates to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearDensity {
    breakpoints: Vec<Rational>,
    values: Vec<Rational>,
}

fn trapezoid(h: &Rational, a: &Rational, b: &Rational) -> Rational {
    h * (a + b) / Rational::from_integer(2.into())
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Square root of a rational when numerator and denominator are both
/// perfect squares.
fn exact_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let root = |v: &BigInt| {
        let s = v.sqrt();
        (&s * &s == *v).then_some(s)
    };
    Some(Rational::new(root(r.numer())?, root(r.denom())?))
}

impl PiecewiseLinearDensity {
    /// `points` are `(breakpoint, value)` pairs, starting at 0 and ending at
    /// 1 with strictly increasing breakpoints and nonnegative values.
    pub fn new(points: Vec<(Rational, Rational)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInstance("a density needs at least two breakpoints".into()));
        }
        let (breakpoints, raw): (Vec<_>, Vec<_>) = points.into_iter().unzip();
        if !breakpoints[0].is_zero() || breakpoints[breakpoints.len() - 1] != Rational::from_integer(1.into()) {
            return Err(Error::InvalidInstance("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInstance("breakpoints must be strictly increasing".into()));
        }
        if raw.iter().any(|v| v.is_negative()) {
            return Err(Error::InvalidInstance("density values must be nonnegative".into()));
        }
        let unscaled = Self { breakpoints, values: raw };
        let total = unscaled.total_mass();
        if !total.is_positive() {
            return Err(Error::InvalidInstance("density integrates to zero".into()));
        }
        let values = unscaled.values.iter().map(|v| v / &total).collect();
        Ok(Self {
            breakpoints: unscaled.breakpoints,
            values,
        })
    }

    /// Build from `(breakpoint, value)` pairs given as `f64`, converted
    /// exactly.
    pub fn from_f64(points: &[(f64, f64)]) -> Result<Self> {
        let conv = |x: f64| {
            Rational::from_float(x).ok_or_else(|| Error::InvalidInstance(format!("{x} is not finite")))
        };
        let pts = points
            .iter()
            .map(|&(b, v)| Ok((conv(b)?, conv(v)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    fn total_mass(&self) -> Rational {
        (0..self.breakpoints.len() - 1)
            .map(|s| {
                let h = &self.breakpoints[s + 1] - &self.breakpoints[s];
                trapezoid(&h, &self.values[s], &self.values[s + 1])
            })
            .sum()
    }

    fn segment_of(&self, x: &Rational) -> usize {
        let last = self.breakpoints.len() - 2;
        self.breakpoints[1..].iter().position(|b| x < b).unwrap_or(last).min(last)
    }

    fn slope(&self, s: usize) -> Rational {
        (&self.values[s + 1] - &self.values[s]) / (&self.breakpoints[s + 1] - &self.breakpoints[s])
    }

    /// Density at `x`, for `x` in `[0, 1]`.
    pub fn value_at(&self, x: &Rational) -> Rational {
        let s = self.segment_of(x);
        &self.values[s] + self.slope(s) * (x - &self.breakpoints[s])
    }

    /// Exact `U([a, b])`.
    pub fn integral(&self, a: &Rational, b: &Rational) -> Rational {
        let mut total = Rational::zero();
        for s in 0..self.breakpoints.len() - 1 {
            let lo = a.max(&self.breakpoints[s]);
            let hi = b.min(&self.breakpoints[s + 1]);
            if lo < hi {
                total += trapezoid(&(hi - lo), &self.value_at_in(s, lo), &self.value_at_in(s, hi));
            }
        }
        total
    }

    fn value_at_in(&self, s: usize, x: &Rational) -> Rational {
        &self.values[s] + self.slope(s) * (x - &self.breakpoints[s])
    }

    /// Largest slope magnitude of the (mass-one) density.
    pub fn max_slope(&self) -> Rational {
        (0..self.breakpoints.len() - 1)
            .map(|s| self.slope(s).abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// `∫ u^2`.
    pub fn squared_l2(&self) -> Rational {
        self.inner(self)
    }

    /// `∫ u w`, exact over the merged breakpoints.
    pub fn inner(&self, other: &Self) -> Rational {
        let mut cuts: Vec<Rational> = self.breakpoints.iter().chain(&other.breakpoints).cloned().collect();
        cuts.sort();
        cuts.dedup();
        let six = Rational::from_integer(6.into());
        let two = Rational::from_integer(2.into());
        cuts.windows(2)
            .map(|w| {
                let h = &w[1] - &w[0];
                let (su, so) = (self.segment_of(&w[0]), other.segment_of(&w[0]));
                let (a, b) = (self.value_at_in(su, &w[0]), self.value_at_in(su, &w[1]));
                let (c, d) = (other.value_at_in(so, &w[0]), other.value_at_in(so, &w[1]));
                h * (&two * &a * &c + &two * &b * &d + &a * &d + &b * &c) / &six
            })
            .sum()
    }

    /// Lipschitz constant of `u / ||u||_2`.
    pub fn normalized_lipschitz(&self) -> f64 {
        to_f64(&self.max_slope()) / to_f64(&self.squared_l2()).sqrt()
    }

    /// Largest value of `u / ||u||_2`; attained at a breakpoint.
    pub fn normalized_max(&self) -> f64 {
        let max = self.values.iter().max().cloned().unwrap_or_else(Rational::zero);
        to_f64(&max) / to_f64(&self.squared_l2()).sqrt()
    }

    /// `∫ (u/||u|| - w/||w||)^2`.
    pub fn normalized_sq_distance(&self, other: &Self) -> f64 {
        let cross = to_f64(&self.inner(other));
        let denom = (to_f64(&self.squared_l2()) * to_f64(&other.squared_l2())).sqrt();
        (2.0 - 2.0 * cross / denom).max(0.0)
    }

    /// Smallest `y >= x` with `U([x, y]) = z`.
    ///
    /// Exact when the root is rational; otherwise the nearest `f64` converted
    /// exactly, accurate to about `1e-15`.
    pub fn cut(&self, x: &Rational, z: &Rational) -> Result<Rational> {
        let one = Rational::from_integer(1.into());
        if x.is_negative() || x > &one || z.is_negative() {
            return Err(Error::IntervalOutOfRange(x.to_string(), z.to_string()));
        }
        if z.is_zero() {
            return Ok(x.clone());
        }
        let available = self.integral(x, &one);
        if z > &available {
            return Err(Error::InsufficientMass {
                requested: z.to_string(),
                available: available.to_string(),
            });
        }
        let mut remaining = z.clone();
        for s in self.segment_of(x)..self.breakpoints.len() - 1 {
            let start = x.max(&self.breakpoints[s]).clone();
            let end = &self.breakpoints[s + 1];
            let mass = self.integral(&start, end);
            if remaining > mass {
                remaining -= mass;
                continue;
            }
            let p = self.value_at_in(s, &start);
            let q = self.slope(s);
            // p h + q h^2 / 2 = remaining
            let h = if q.is_zero() {
                &remaining / &p
            } else {
                let disc = &p * &p + Rational::from_integer(2.into()) * &q * &remaining;
                match exact_sqrt(&disc) {
                    Some(root) => (root - &p) / &q,
                    None => {
                        // the smaller nonnegative root, in a cancellation-free form
                        let hf = 2.0 * to_f64(&remaining) / (to_f64(&p) + to_f64(&disc).sqrt());
                        Rational::from_float(hf).unwrap_or_else(Rational::zero)
                    }
                }
            };
            let y = start + h;
            return Ok(y.min(end.clone()));
        }
        Ok(one)
    }
}

/// Counts of value and cut queries issued.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryMeter {
    pub eval_count: u64,
    pub cut_count: u64,
}

/// Query access to a set of agents' densities.
#[derive(Debug, Clone)]
pub struct CakeOracle {
    densities: Vec<PiecewiseLinearDensity>,
    meter: QueryMeter,
}

impl CakeOracle {
    pub fn new(densities: Vec<PiecewiseLinearDensity>) -> Self {
        Self {
            densities,
            meter: QueryMeter::default(),
        }
    }

    pub fn agents(&self) -> usize {
        self.densities.len()
    }

    pub fn densities(&self) -> &[PiecewiseLinearDensity] {
        &self.densities
    }

    pub fn meter(&self) -> QueryMeter {
        self.meter
    }

    fn density(&self, agent: usize) -> Result<&PiecewiseLinearDensity> {
        self.densities
            .get(agent)
            .ok_or_else(|| Error::DimensionMismatch(format!("no agent {agent}")))
    }

    /// `U_agent([a, b])`.
    pub fn eval_query(&mut self, agent: usize, a: &Rational, b: &Rational) -> Result<Rational> {
        let one = Rational::from_integer(1.into());
        if a.is_negative() || a > b || b > &one {
            return Err(Error::IntervalOutOfRange(a.to_string(), b.to_string()));
        }
        let value = self.density(agent)?.integral(a, b);
        self.meter.eval_count += 1;
        Ok(value)
    }

    /// Smallest `y >= x` with `U_agent([x, y]) = z`.
    pub fn cut_query(&mut self, agent: usize, x: &Rational, z: &Rational) -> Result<Rational> {
        let y = self.density(agent)?.cut(x, z)?;
        self.meter.cut_count += 1;
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Claimed Lipschitz constant of the normalized densities; measured when
    /// absent.
    pub lipschitz: Option<f64>,
    /// Claimed lower bound on pairwise squared normalized distance; measured
    /// when absent.
    pub delta: Option<f64>,
    /// Use this many equal pieces instead of the derived count.
    pub forced_pieces: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPreconditions {
    pub measured_lipschitz: f64,
    pub lipschitz: f64,
    pub lipschitz_ok: bool,
    pub measured_separation: f64,
    pub delta: f64,
    pub separation_ok: bool,
    pub notes: Vec<String>,
}

impl ProtocolPreconditions {
    pub fn hold(&self) -> bool {
        self.lipschitz_ok && self.separation_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CakeOutcome {
    pub pieces: u64,
    /// Derived parameters, when the preconditions allowed computing them.
    pub epsilon: Option<CakeEpsilon>,
    pub preconditions: ProtocolPreconditions,
    /// `bundles[i]` lists the pieces (in left-to-right order) agent `i` gets;
    /// piece `j` is `[j/pieces, (j+1)/pieces]`.
    pub bundles: Vec<Vec<usize>>,
    #[serde(skip)]
    pub instance: Instance,
    pub allocation: IntegralAllocation,
    pub meter: QueryMeter,
    /// The single-agent envy-freeness condition on the piece instance.
    pub condition: ConditionReport,
    /// Smallest pairwise squared distance of the re-normalized piece vectors.
    pub discrete_min_distance: f64,
    pub ef: Verdict,
    pub strong_ef: Verdict,
}

/// Cut `[0, 1]` into equal pieces, learn every piece value with one value
/// query per agent and piece, and allocate the pieces as indivisible goods
/// with the envy-freeness pipeline.
///
/// Failed preconditions are reported rather than refused; the verdicts are
/// always computed on exact piece values.
pub fn run_protocol(oracle: &mut CakeOracle, params: ProtocolParams) -> Result<CakeOutcome> {
    let n = oracle.agents();
    if n < 2 {
        return Err(Error::InvalidInstance("the protocol needs at least two agents".into()));
    }
    let densities = oracle.densities().to_vec();
    let measured_lipschitz = densities
        .iter()
        .map(|u| u.normalized_lipschitz())
        .fold(0.0f64, f64::max);
    let mut measured_separation = f64::INFINITY;
    for i in 0..n {
        for other in i + 1..n {
            measured_separation = measured_separation.min(densities[i].normalized_sq_distance(&densities[other]));
        }
    }
    let lipschitz = params.lipschitz.unwrap_or(measured_lipschitz);
    let delta = params.delta.unwrap_or(measured_separation);
    let mut pre = ProtocolPreconditions {
        measured_lipschitz,
        lipschitz,
        lipschitz_ok: measured_lipschitz <= lipschitz * (1.0 + 1e-12),
        measured_separation,
        delta,
        separation_ok: delta > 0.0 && measured_separation >= delta * (1.0 - 1e-12),
        notes: Vec::new(),
    };
    if !pre.lipschitz_ok {
        pre.notes.push(format!(
            "densities are {measured_lipschitz}-Lipschitz after normalization, above the claimed {lipschitz}"
        ));
    }
    if !pre.separation_ok {
        pre.notes.push(format!(
            "smallest squared distance is {measured_separation}, below the claimed {delta}"
        ));
    }
    // A constant density has slope zero; any positive constant bounds it.
    let epsilon = cake_epsilon(n as u64, lipschitz.max(f64::MIN_POSITIVE), delta).ok();
    let pieces = match (params.forced_pieces, &epsilon) {
        (Some(p), _) => p.max(1),
        (None, Some(e)) => e.pieces,
        (None, None) => {
            pre.notes.push("no piece count derivable; using 2n pieces".into());
            2 * n as u64
        }
    };

    let bounds: Vec<Rational> = (0..=pieces)
        .map(|j| Rational::new(BigInt::from(j), BigInt::from(pieces)))
        .collect();
    let mut values = vec![Vec::with_capacity(pieces as usize); n];
    for (i, row) in values.iter_mut().enumerate() {
        for j in 0..pieces as usize {
            row.push(oracle.eval_query(i, &bounds[j], &bounds[j + 1])?);
        }
    }
    let instance = Instance::unit(values, Kind::Goods)?;
    let outcome = pipeline_allocate(&instance, false)?;
    let allocation = outcome.allocation;
    let bundles = (0..n)
        .map(|i| {
            allocation
                .bundle(i)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let condition = ef_condition_single_agents(&instance)?;
    let discrete_min_distance = condition.inputs.min_dissimilarity.unwrap_or(f64::INFINITY);
    let ef = verify(&instance, &allocation, Notion::Ef)?;
    let strong_ef = verify(&instance, &allocation, Notion::StrongEf)?;
    Ok(CakeOutcome {
        pieces,
        epsilon,
        preconditions: pre,
        bundles,
        instance,
        allocation,
        meter: oracle.meter(),
        condition,
        discrete_min_distance,
        ef,
        strong_ef,
    })
}

/// Squared distance between the re-normalized piece vectors of two agents
/// for `pieces` equal pieces, from exact piece values.
pub fn discrete_sq_distance(u: &PiecewiseLinearDensity, w: &PiecewiseLinearDensity, pieces: u64) -> f64 {
    let bounds: Vec<Rational> = (0..=pieces)
        .map(|j| Rational::new(BigInt::from(j), BigInt::from(pieces)))
        .collect();
    let piece_values = |d: &PiecewiseLinearDensity| -> Vec<Rational> {
        bounds.windows(2).map(|b| d.integral(&b[0], &b[1])).collect()
    };
    let (pu, pw) = (piece_values(u), piece_values(w));
    let dot = |a: &[Rational], b: &[Rational]| -> Rational { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let cross = to_f64(&dot(&pu, &pw));
    let denom = (to_f64(&dot(&pu, &pu)) * to_f64(&dot(&pw, &pw))).sqrt();
    (2.0 - 2.0 * cross / denom).max(0.0)
}
