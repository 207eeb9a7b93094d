//! Monte Carlo simulation of the DID mixed model
//!
//! ```text
//! y = β₀ + β₁A + β₂T + β₃AT + C + CT + S + ST
//! ```
//!
//! with one `C` per cluster, one `CT` per cluster and period, one `S` per
//! subject (shared by a stayer's two measurements) and one `ST` per subject
//! and period. In each cluster the lost subjects are drawn uniformly without
//! replacement from the baseline subjects; gained subjects are new draws.
//!
//! Seeding: replicate `r` of a run with master seed `m` uses a ChaCha8 stream
//! seeded with [`replicate_seed`]`(m, r)`, a SplitMix64 mix of the two. Every
//! replicate is therefore reproducible on its own, replicates can run in any
//! order or in parallel, and extending a run keeps its first replicates.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::t_quantile;
use crate::error::{Error, Result};
use crate::model::{validate_design, Arm, ArmCounts, PowerSpec, TrialDesign, VarianceComponents};
use crate::variance::did_variance;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedEffects {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

/// `ȳ_it`: the mean of cluster means for arm `i` at period `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMeans {
    pub y11: f64,
    pub y12: f64,
    pub y21: f64,
    pub y22: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReplicate {
    /// `(ȳ22 - ȳ21) - (ȳ12 - ȳ11)`.
    pub beta3_hat: f64,
    pub cell_means: CellMeans,
    pub seed: u64,
    /// Pooled two-sample t statistic on cluster change scores; `None` when
    /// the pooled variance is zero or there are no degrees of freedom.
    pub cluster_t: Option<f64>,
}

/// Test statistic used for empirical power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStatistic {
    /// Pooled two-sample t-test on the per-cluster change scores, with
    /// `J_1 + J_2 - 2` degrees of freedom.
    #[default]
    ClusterT,
    /// `β̂₃ / sqrt(Var(β̂₃))` using the closed-form variance.
    KnownVariance,
}

impl TestStatistic {
    pub fn as_str(self) -> &'static str {
        match self {
            TestStatistic::ClusterT => "cluster-t",
            TestStatistic::KnownVariance => "known-variance",
        }
    }
}

impl std::str::FromStr for TestStatistic {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cluster-t" => Ok(TestStatistic::ClusterT),
            "known-variance" => Ok(TestStatistic::KnownVariance),
            _ => Err(format!(
                "unknown test statistic `{s}` (expected cluster-t or known-variance)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub replicates: usize,
    pub master_seed: u64,
    pub statistic: TestStatistic,
    pub closed_form_variance: f64,
    pub mean_beta3: f64,
    pub empirical_variance: f64,
    /// Monte Carlo standard error of `empirical_variance`.
    pub mc_standard_error: f64,
    pub empirical_power: f64,
    pub power_standard_error: f64,
    pub df: u64,
    pub critical_t: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

struct Sds {
    c: f64,
    ct: f64,
    s: f64,
    st: f64,
}

struct Scratch {
    subject: Vec<f64>,
    lost: Vec<bool>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws one cluster and returns its (baseline mean, follow-up mean) of the
/// random part.
fn draw_cluster(rng: &mut ChaCha8Rng, counts: ArmCounts, sd: &Sds, scratch: &mut Scratch) -> (f64, f64) {
    let k = counts.baseline as usize;
    let c = sd.c * normal(rng);
    let ct_base = sd.ct * normal(rng);
    let ct_follow = sd.ct * normal(rng);

    scratch.subject.clear();
    let mut base_sum = 0.0;
    for _ in 0..k {
        let s = sd.s * normal(rng);
        let st = sd.st * normal(rng);
        scratch.subject.push(s);
        base_sum += s + st;
    }

    scratch.lost.clear();
    scratch.lost.resize(k, false);
    for i in index::sample(rng, k, counts.lost as usize).iter() {
        scratch.lost[i] = true;
    }

    let mut follow_sum = 0.0;
    for (s, lost) in scratch.subject.iter().zip(&scratch.lost) {
        if !lost {
            follow_sum += s + sd.st * normal(rng);
        }
    }
    for _ in 0..counts.gained {
        follow_sum += sd.s * normal(rng) + sd.st * normal(rng);
    }

    (
        c + ct_base + base_sum / k as f64,
        c + ct_follow + follow_sum / f64::from(counts.followup()),
    )
}

fn checked_counts(d: &TrialDesign) -> Result<[ArmCounts; 2]> {
    validate_design(d).map_err(Error::InvalidDesign)?;
    d.counts()
}

fn simulate_counts(
    d: &TrialDesign,
    counts: &[ArmCounts; 2],
    vc: &VarianceComponents,
    fixed: &FixedEffects,
    seed: u64,
) -> SimReplicate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = Sds {
        c: vc.sigma_c2.sqrt(),
        ct: vc.sigma_ct2.sqrt(),
        s: vc.sigma_s2.sqrt(),
        st: vc.sigma_st2.sqrt(),
    };
    let mut scratch = Scratch {
        subject: Vec::new(),
        lost: Vec::new(),
    };

    let mut cells = [[0.0; 2]; 2];
    let mut change_mean = [0.0; 2];
    let mut change_sq = [0.0; 2];
    for arm in Arm::BOTH {
        let i = arm.index();
        let a = i as f64;
        let mu_base = fixed.beta0 + fixed.beta1 * a;
        let mu_follow = mu_base + fixed.beta2 + fixed.beta3 * a;
        let j = d.clusters(arm);
        let mut changes = Vec::with_capacity(j as usize);
        for _ in 0..j {
            let (base, follow) = draw_cluster(&mut rng, counts[i], &sd, &mut scratch);
            let (base, follow) = (mu_base + base, mu_follow + follow);
            cells[i][0] += base;
            cells[i][1] += follow;
            changes.push(follow - base);
        }
        let jf = f64::from(j);
        cells[i][0] /= jf;
        cells[i][1] /= jf;
        let mean = changes.iter().sum::<f64>() / jf;
        change_mean[i] = mean;
        change_sq[i] = changes.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }

    let cell_means = CellMeans {
        y11: cells[0][0],
        y12: cells[0][1],
        y21: cells[1][0],
        y22: cells[1][1],
    };
    let beta3_hat = (cell_means.y22 - cell_means.y21) - (cell_means.y12 - cell_means.y11);

    let (j1, j2) = (f64::from(d.j1), f64::from(d.j2));
    let df = j1 + j2 - 2.0;
    let cluster_t = if df > 0.0 {
        let pooled = (change_sq[0] + change_sq[1]) / df;
        let se = (pooled * (1.0 / j1 + 1.0 / j2)).sqrt();
        (se > 0.0).then(|| (change_mean[1] - change_mean[0]) / se)
    } else {
        None
    };

    SimReplicate {
        beta3_hat,
        cell_means,
        seed,
        cluster_t,
    }
}

/// One simulated trial. Loss and gain rates must correspond to whole subjects.
pub fn simulate_trial(
    d: &TrialDesign,
    vc: &VarianceComponents,
    fixed: &FixedEffects,
    seed: u64,
) -> Result<SimReplicate> {
    vc.validate()?;
    let counts = checked_counts(d)?;
    Ok(simulate_counts(d, &counts, vc, fixed, seed))
}

/// Replicates `0..replicates` under `master_seed`, in replicate order.
pub fn monte_carlo_replicates(
    d: &TrialDesign,
    vc: &VarianceComponents,
    fixed: &FixedEffects,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<SimReplicate>> {
    vc.validate()?;
    let counts = checked_counts(d)?;
    Ok((0..replicates as u64)
        .into_par_iter()
        .map(|r| simulate_counts(d, &counts, vc, fixed, replicate_seed(master_seed, r)))
        .collect())
}

/// Empirical variance of `β̂₃` and empirical power of the two-sided test at
/// level `spec.alpha`, simulated with effect `spec.beta3`.
pub fn monte_carlo_summary(
    d: &TrialDesign,
    vc: &VarianceComponents,
    spec: &PowerSpec,
    replicates: usize,
    master_seed: u64,
    statistic: TestStatistic,
) -> Result<MonteCarloSummary> {
    spec.validate()?;
    if replicates < 2 {
        return Err(Error::InvalidParameter {
            field: "replicates",
            message: "at least two replicates required".into(),
        });
    }
    let fixed = FixedEffects {
        beta3: spec.beta3,
        ..FixedEffects::default()
    };
    let reps = monte_carlo_replicates(d, vc, &fixed, replicates, master_seed)?;
    summarize_replicates(d, vc, spec, &reps, master_seed, statistic)
}

/// Summary statistics of replicates already simulated under `master_seed`.
pub fn summarize_replicates(
    d: &TrialDesign,
    vc: &VarianceComponents,
    spec: &PowerSpec,
    reps: &[SimReplicate],
    master_seed: u64,
    statistic: TestStatistic,
) -> Result<MonteCarloSummary> {
    let closed = did_variance(d, vc)?.total;
    let df = u64::from(d.j1) + u64::from(d.j2) - 2;
    if df < 1 {
        return Err(Error::InsufficientDegreesOfFreedom { needed: 1, df });
    }
    let critical_t = t_quantile(1.0 - 0.5 * spec.alpha, df as f64);

    // Sequential sums over replicate order keep results independent of threading.
    let n = reps.len() as f64;
    let mean = reps.iter().map(|r| r.beta3_hat).sum::<f64>() / n;
    let (m2, m4) = reps.iter().fold((0.0, 0.0), |(m2, m4), r| {
        let dev2 = (r.beta3_hat - mean).powi(2);
        (m2 + dev2, m4 + dev2 * dev2)
    });
    let variance = m2 / (n - 1.0);
    let central4 = m4 / n;
    let central2 = m2 / n;
    let mc_standard_error = ((central4 - central2 * central2).max(0.0) / n).sqrt();

    let closed_sd = closed.sqrt();
    let rejections = reps
        .iter()
        .filter(|r| match statistic {
            TestStatistic::ClusterT => r.cluster_t.is_some_and(|t| t.abs() > critical_t),
            TestStatistic::KnownVariance => r.beta3_hat.abs() / closed_sd > critical_t,
        })
        .count();
    let power = rejections as f64 / n;

    Ok(MonteCarloSummary {
        replicates: reps.len(),
        master_seed,
        statistic,
        closed_form_variance: closed,
        mean_beta3: mean,
        empirical_variance: variance,
        mc_standard_error,
        empirical_power: power,
        power_standard_error: (power * (1.0 - power) / n).sqrt(),
        df,
        critical_t,
    })
}
