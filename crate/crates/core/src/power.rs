//! Power of the two-sided DID test and minimum sample sizes.
//!
//! `power = T_df(|β₃| / sqrt(Var(β̂₃)) - t_{α/2, df})` with
//! `df = (J_1 - 1) + (J_2 - 1)`, which is `2(J - 1)` for equal arms.
//!
//! The solvers search the power function directly (exponential bracketing
//! then bisection on the integer). Power increases in both `J` and `K`, so the
//! smallest passing value is well defined.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{t_cdf, t_quantile};
use crate::error::{Error, Result};
use crate::model::{DesignKind, PowerSpec, TrialDesign, VarianceComponents};
use crate::variance::did_variance;

/// Search cap on clusters per arm and subjects per cluster.
pub const SEARCH_CAP: u32 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub power: f64,
    pub df: u64,
    /// `|β₃| / sqrt(Var(β̂₃))`.
    pub noncentrality: f64,
    pub critical_t: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub k: u32,
    pub power: f64,
}

pub fn degrees_of_freedom(d: &TrialDesign) -> u64 {
    u64::from(d.j1.saturating_sub(1)) + u64::from(d.j2.saturating_sub(1))
}

fn power_from_variance(spec: &PowerSpec, variance: f64, df: u64) -> PowerResult {
    let dff = df as f64;
    let critical_t = t_quantile(1.0 - 0.5 * spec.alpha, dff);
    let noncentrality = if variance > 0.0 {
        spec.beta3.abs() / variance.sqrt()
    } else if spec.beta3 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    PowerResult {
        power: t_cdf(noncentrality - critical_t, dff),
        df,
        noncentrality,
        critical_t,
        variance,
    }
}

pub fn power(spec: &PowerSpec, d: &TrialDesign, vc: &VarianceComponents) -> Result<PowerResult> {
    spec.validate()?;
    let df = degrees_of_freedom(d);
    if df < 1 {
        return Err(Error::InsufficientDegreesOfFreedom { needed: 1, df });
    }
    let variance = did_variance(d, vc)?.total;
    Ok(power_from_variance(spec, variance, df))
}

/// Smallest `n` in `[lo, SEARCH_CAP]` with `pred(n)`, assuming `pred` is
/// monotone (false then true).
fn smallest_satisfying(lo: u32, mut pred: impl FnMut(u32) -> Result<bool>) -> Result<Option<u32>> {
    if pred(lo)? {
        return Ok(Some(lo));
    }
    let mut fail = lo;
    let mut pass = loop {
        let next = fail.saturating_mul(2).min(SEARCH_CAP);
        if next == fail {
            return Ok(None);
        }
        if pred(next)? {
            break next;
        }
        fail = next;
    };
    while pass - fail > 1 {
        let mid = fail + (pass - fail) / 2;
        if pred(mid)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(Some(pass))
}

/// Smallest equal number of clusters per arm reaching `spec.target_power`.
/// The template's `j1`/`j2` are ignored. At least two clusters per arm are
/// returned so that the test has two or more degrees of freedom.
pub fn required_clusters(spec: &PowerSpec, template: &TrialDesign, vc: &VarianceComponents) -> Result<u32> {
    spec.validate()?;
    let at = |j: u32| power(spec, &template.with_clusters(j), vc).map(|r| r.power);
    if spec.beta3 == 0.0 {
        let supremum = 0.5 * spec.alpha;
        if spec.target_power > supremum {
            return Err(Error::UnattainablePower {
                target: spec.target_power,
                supremum,
            });
        }
    }
    match smallest_satisfying(2, |j| Ok(at(j)? >= spec.target_power))? {
        Some(j) => Ok(j),
        None => Err(Error::UnattainablePower {
            target: spec.target_power,
            supremum: at(SEARCH_CAP)?,
        }),
    }
}

/// Smallest baseline cluster size reaching `spec.target_power` with the
/// template's clusters per arm. The template's `k` is ignored.
pub fn required_subjects(spec: &PowerSpec, template: &TrialDesign, vc: &VarianceComponents) -> Result<u32> {
    spec.validate()?;
    let df = degrees_of_freedom(template);
    if df < 1 {
        return Err(Error::InsufficientDegreesOfFreedom { needed: 1, df });
    }
    let lo = if template.kind == DesignKind::ReducedCohort {
        let stay = (1.0 - template.pattern.lambda1).min(1.0 - template.pattern.lambda2);
        let mut k = (1.0 / stay).ceil().max(1.0) as u32;
        // Guard against rounding in 1/stay.
        while template.with_k(k).reduced_cohort_size() < 1.0 {
            k += 1;
        }
        k
    } else {
        1
    };

    // The cluster-by-time term is the variance floor as K grows.
    let floor = did_variance(&template.with_k(lo), vc)?.cluster_time_term;
    let supremum = power_from_variance(spec, floor, df).power;
    if supremum <= spec.target_power {
        return Err(Error::UnattainablePower {
            target: spec.target_power,
            supremum,
        });
    }

    let at = |k: u32| power(spec, &template.with_k(k), vc).map(|r| r.power);
    match smallest_satisfying(lo, |k| Ok(at(k)? >= spec.target_power))? {
        Some(k) => Ok(k),
        None => Err(Error::UnattainablePower {
            target: spec.target_power,
            supremum,
        }),
    }
}

/// Power at each baseline cluster size in `ks`, in input order.
pub fn power_curve(
    spec: &PowerSpec,
    template: &TrialDesign,
    vc: &VarianceComponents,
    ks: impl IntoIterator<Item = u32>,
) -> Result<Vec<PowerPoint>> {
    let ks: Vec<u32> = ks.into_iter().collect();
    ks.par_iter()
        .map(|&k| power(spec, &template.with_k(k), vc).map(|r| PowerPoint { k, power: r.power }))
        .collect()
}
