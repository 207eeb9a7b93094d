//! Randomized equivalence suite: closed-form variance against the exact
//! covariance oracle over random designs with whole-subject counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::exact_did_variance;
use super::sim::{monte_carlo_replicates, summarize_replicates, FixedEffects, TestStatistic};
use crate::error::Result;
use crate::model::{DesignKind, FollowUpPattern, PowerSpec, TrialDesign, VarianceComponents};
use crate::variance::did_variance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub trial: usize,
    pub design: TrialDesign,
    pub components: VarianceComponents,
    pub closed_form: f64,
    pub exact: f64,
    pub relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<f64>,
    /// `(monte_carlo - closed_form) / mc_standard_error`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub seed: u64,
    pub max_relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_mc_z: Option<f64>,
    pub rows: Vec<EquivalenceRow>,
}

/// A random valid design of the given kind, with `J_i` in `[2, 50]`, `K` in
/// `[2, 200]`, whole-subject loss and gain counts and positive components.
pub fn random_configuration(rng: &mut impl Rng, kind: DesignKind) -> (TrialDesign, VarianceComponents) {
    let j1 = rng.random_range(2..=50);
    let j2 = rng.random_range(2..=50);
    let k: u32 = rng.random_range(2..=200);
    let kf = f64::from(k);
    let mut rate = |hi: u32| f64::from(rng.random_range(0..=hi)) / kf;
    let pattern = match kind {
        DesignKind::CohortNoLtf | DesignKind::CrossSectional => FollowUpPattern::none(),
        DesignKind::FullReplacement => FollowUpPattern::full_replacement(rate(k - 1), rate(k - 1)),
        DesignKind::NoReplacement | DesignKind::ReducedCohort => {
            FollowUpPattern::no_replacement(rate(k - 1), rate(k - 1))
        }
        DesignKind::PartialReplacement => {
            let (l1, l2) = (rate(k - 1), rate(k - 1));
            FollowUpPattern::partial(l1, l2, rate(k), rate(k))
        }
    };
    let vc = VarianceComponents {
        sigma_c2: rng.random_range(0.001..1.0),
        sigma_ct2: rng.random_range(0.001..1.0),
        sigma_s2: rng.random_range(0.001..1.0),
        sigma_st2: rng.random_range(0.001..1.0),
    };
    (TrialDesign::new(j1, j2, k, pattern, kind), vc)
}

/// Runs `trials` random configurations, cycling through every design kind.
/// With `mc_replicates > 0` each row also carries a Monte Carlo variance.
pub fn equivalence_report(trials: usize, seed: u64, mc_replicates: usize) -> Result<EquivalenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<_> = (0..trials)
        .map(|i| random_configuration(&mut rng, DesignKind::ALL[i % DesignKind::ALL.len()]))
        .collect();

    let rows = configs
        .into_par_iter()
        .enumerate()
        .map(|(trial, (design, components))| {
            let closed_form = did_variance(&design, &components)?.total;
            let exact = exact_did_variance(&design, &components)?;
            let (monte_carlo, mc_z) = if mc_replicates >= 2 {
                let reps = monte_carlo_replicates(
                    &design,
                    &components,
                    &FixedEffects::default(),
                    mc_replicates,
                    seed ^ trial as u64,
                )?;
                let spec = PowerSpec {
                    beta3: 0.0,
                    alpha: 0.05,
                    target_power: 0.8,
                };
                let s = summarize_replicates(&design, &components, &spec, &reps, seed, TestStatistic::ClusterT)?;
                (
                    Some(s.empirical_variance),
                    Some((s.empirical_variance - closed_form) / s.mc_standard_error),
                )
            } else {
                (None, None)
            };
            Ok(EquivalenceRow {
                trial,
                design,
                components,
                closed_form,
                exact,
                relative_error: (closed_form - exact).abs() / closed_form,
                monte_carlo,
                mc_z,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let max_relative_error = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let max_abs_mc_z = rows.iter().filter_map(|r| r.mc_z).map(f64::abs).reduce(f64::max);
    Ok(EquivalenceReport {
        trials,
        seed,
        max_relative_error,
        max_abs_mc_z,
        rows,
    })
}
