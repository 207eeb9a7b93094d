//! Command parameters. Every command's flags double as the keys of its
//! `--params` JSON file; flags given on the command line override the file.

use std::path::{Path, PathBuf};

use clap::Args;
#[cfg(test)]
use clap::FromArgMatches;
use didpower_core::{
    components_from_correlations, validate_design, CorrelationProfile, DesignKind, FollowUpPattern, PowerSpec,
    ReComparison, Severity, TestStatistic, TrialDesign, VarianceComponents,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignArgs {
    /// Design kind: cohort-no-ltf, cross-sectional, full-replacement,
    /// no-replacement, partial-replacement or reduced-cohort
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<DesignKind>,
    /// Clusters per arm (sets both arms)
    #[arg(long, conflicts_with_all = ["j1", "j2"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    /// Clusters in the control arm
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j1: Option<u32>,
    /// Clusters in the treatment arm
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j2: Option<u32>,
    /// Baseline subjects per cluster
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Loss rate, control arm
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    /// Loss rate, treatment arm
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    /// Gain rate, control arm (defaults to lambda1 for full replacement, else 0)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    /// Gain rate, treatment arm (defaults to lambda2 for full replacement, else 0)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
}

const COMPONENT_KEYS: [&str; 4] = ["sigma_c2", "sigma_ct2", "sigma_s2", "sigma_st2"];
const CORRELATION_KEYS: [&str; 4] = ["total_var", "rho", "rho_c", "rho_s"];

/// Variance inputs, either as four components or as total variance plus
/// three correlations.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ComponentArgs {
    /// Cluster variance
    #[arg(long, conflicts_with_all = CORRELATION_KEYS)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_c2: Option<f64>,
    /// Cluster-by-time variance
    #[arg(long, conflicts_with_all = CORRELATION_KEYS)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_ct2: Option<f64>,
    /// Subject variance
    #[arg(long, conflicts_with_all = CORRELATION_KEYS)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_s2: Option<f64>,
    /// Subject-by-time (residual) variance
    #[arg(long, conflicts_with_all = CORRELATION_KEYS)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_st2: Option<f64>,
    /// Total outcome variance (default 1 when correlations are given)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_var: Option<f64>,
    /// Intraclass correlation
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Cluster autocorrelation
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_c: Option<f64>,
    /// Subject autocorrelation
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectArgs {
    /// DID effect size in outcome units
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta3: Option<f64>,
    /// Two-sided significance level (default 0.05)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Target power for the solvers (default 0.8)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_power: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub components: ComponentArgs,
    /// Include effective autocorrelation, stay fractions and follow-up sizes
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub explain: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub components: ComponentArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub effect: EffectArgs,
    /// Power curve over cluster sizes, as K_MIN:K_MAX[:STEP]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    /// Design kinds drawn as curve columns (default full-replacement,no-replacement)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_kinds: Option<Vec<DesignKind>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub components: ComponentArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub effect: EffectArgs,
    /// Solve for subjects per cluster (K) at the given clusters per arm
    #[arg(long, conflicts_with = "clusters")]
    #[serde(skip_serializing_if = "is_false")]
    pub subjects: bool,
    /// Solve for clusters per arm (J) at the given cluster size
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub clusters: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ReGridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub components: ComponentArgs,
    /// Clusters per arm
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    /// Baseline subjects per cluster
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// rep-vs-cohort, norep-vs-cohort or norep-vs-rep
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ReComparison>,
    /// Largest loss rate in the grid (default 0.8)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// Grid step (default 0.05)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionArgs {
    /// Follow-up rate of one arm (point mode)
    #[arg(long, requires = "f2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    /// Follow-up rate of the other arm (point mode)
    #[arg(long, requires = "f1")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<f64>,
    /// Subject autocorrelation (point mode)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_s: Option<f64>,
    /// Subject autocorrelations for the grid (default 0.3,0.5,0.6,0.7,0.8)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_values: Option<Vec<f64>>,
    /// Follow-up rate lattice step (default 0.05)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_step: Option<f64>,
    /// Emit the boundary curves instead of classified points
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub boundary: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub components: ComponentArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub effect: EffectArgs,
    /// Number of replicates (default 1000)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Master seed (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// cluster-t (default) or known-variance
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<TestStatistic>,
    /// Also write one CSV row per replicate to this file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckArgs {
    /// Number of random configurations (default 200)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Seed for the configurations (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Monte Carlo replicates per configuration (default 0: none)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_replicates: Option<usize>,
}

fn to_map<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value).expect("parameters serialize") {
        Value::Object(m) => m,
        _ => unreachable!("parameter structs serialize to objects"),
    }
}

/// Combines a parameter file with command-line values. A flag from one
/// mutually exclusive group on the command line drops the other group from
/// the file.
pub fn merge<T>(cli: &T, file: Option<&Path>) -> Result<T>
where
    T: Args + Serialize + DeserializeOwned,
{
    let Some(path) = file else {
        return from_map(to_map(cli), None);
    };
    let params_err = |message: String| CliError::Params {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| params_err(e.to_string()))?;
    let mut base = match serde_json::from_str::<Value>(&text).map_err(|e| params_err(e.to_string()))? {
        Value::Object(m) => m,
        _ => return Err(params_err("expected a JSON object".into())),
    };

    let known: Vec<String> = T::augment_args(clap::Command::new("params"))
        .get_arguments()
        .map(|a| a.get_id().as_str().to_owned())
        .collect();
    if let Some(unknown) = base.keys().find(|k| !known.contains(k)) {
        return Err(params_err(format!("unknown parameter `{unknown}`")));
    }

    let overrides = to_map(cli);
    let groups: [(&[&str], &[&str]); 2] = [(&COMPONENT_KEYS, &CORRELATION_KEYS), (&["j"], &["j1", "j2"])];
    for (a, b) in groups {
        for (given, drop) in [(a, b), (b, a)] {
            if given.iter().any(|k| overrides.contains_key(*k)) {
                drop.iter().for_each(|k| {
                    base.remove(*k);
                });
            }
        }
    }
    base.extend(overrides);
    from_map(base, Some(path))
}

fn from_map<T: DeserializeOwned>(map: Map<String, Value>, path: Option<&Path>) -> Result<T> {
    serde_json::from_value(Value::Object(map)).map_err(|e| match path {
        Some(p) => CliError::Params {
            path: p.to_path_buf(),
            message: e.to_string(),
        },
        None => CliError::Usage(e.to_string()),
    })
}

/// Parses `T` from bare arguments.
#[cfg(test)]
pub fn parse_args<T: Args + FromArgMatches>(args: &[&str]) -> std::result::Result<T, clap::Error> {
    let matches = T::augment_args(clap::Command::new("x"))
        .try_get_matches_from(std::iter::once("x").chain(args.iter().copied()))?;
    T::from_arg_matches(&matches)
}

impl DesignArgs {
    fn clusters(&self) -> Result<(u32, u32)> {
        match (self.j, self.j1, self.j2) {
            (Some(j), None, None) => Ok((j, j)),
            (None, Some(a), Some(b)) => Ok((a, b)),
            (None, None, None) => Err(usage("clusters per arm required: --j, or both --j1 and --j2")),
            (Some(_), _, _) => Err(usage("--j cannot be combined with --j1/--j2")),
            _ => Err(usage("--j1 and --j2 must be given together")),
        }
    }

    /// The design, with `k` supplied by commands that sweep or solve for it.
    /// Count warnings are only printed for a user-given `k`.
    pub fn design_with_k(&self, k: Option<u32>) -> Result<TrialDesign> {
        let warn = k.is_none();
        let kind = self.kind.ok_or_else(|| usage("--kind is required"))?;
        let (j1, j2) = self.clusters()?;
        let k = k.or(self.k).ok_or_else(|| usage("--k is required"))?;
        let lambda1 = self.lambda1.unwrap_or(0.0);
        let lambda2 = self.lambda2.unwrap_or(0.0);
        let (g1, g2) = if kind == DesignKind::FullReplacement {
            (lambda1, lambda2)
        } else {
            (0.0, 0.0)
        };
        let pattern = FollowUpPattern {
            lambda1,
            lambda2,
            gamma1: self.gamma1.unwrap_or(g1),
            gamma2: self.gamma2.unwrap_or(g2),
        };
        let design = TrialDesign::new(j1, j2, k, pattern, kind);
        match validate_design(&design) {
            Ok(v) => {
                for w in v.warnings.iter().filter(|w| warn && w.severity == Severity::Warning) {
                    eprintln!("warning: {}: {}", w.field, w.message);
                }
                Ok(design)
            }
            Err(issues) => Err(CliError::Core(didpower_core::Error::InvalidDesign(issues))),
        }
    }

    pub fn design(&self) -> Result<TrialDesign> {
        self.design_with_k(None)
    }
}

impl ComponentArgs {
    pub fn resolve(&self) -> Result<VarianceComponents> {
        let comps = [self.sigma_c2, self.sigma_ct2, self.sigma_s2, self.sigma_st2];
        let cors = [self.rho, self.rho_c, self.rho_s];
        let any_comp = comps.iter().any(Option::is_some);
        let any_cor = cors.iter().any(Option::is_some) || self.total_var.is_some();
        match (any_comp, any_cor) {
            (true, true) => Err(usage(
                "give either variance components (--sigma-*) or correlations (--total-var/--rho*), not both",
            )),
            (true, false) => match comps {
                [Some(c), Some(ct), Some(s), Some(st)] => Ok(VarianceComponents::new(c, ct, s, st)?),
                _ => Err(usage(
                    "all four of --sigma-c2, --sigma-ct2, --sigma-s2, --sigma-st2 are required",
                )),
            },
            (false, true) => match cors {
                [Some(rho), Some(rho_c), Some(rho_s)] => {
                    let profile = CorrelationProfile::new(self.total_var.unwrap_or(1.0), rho, rho_c, rho_s)?;
                    Ok(components_from_correlations(&profile)?)
                }
                _ => Err(usage("--rho, --rho-c and --rho-s are all required")),
            },
            (false, false) => Err(usage(
                "variance inputs required: --sigma-c2 ... or --rho/--rho-c/--rho-s",
            )),
        }
    }
}

impl EffectArgs {
    pub fn spec(&self) -> Result<PowerSpec> {
        let beta3 = self.beta3.ok_or_else(|| usage("--beta3 is required"))?;
        Ok(PowerSpec::new(
            beta3,
            self.alpha.unwrap_or(0.05),
            self.target_power.unwrap_or(0.8),
        )?)
    }
}

/// Parses `K_MIN:K_MAX[:STEP]`.
pub fn parse_curve(s: &str) -> Result<Vec<u32>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.trim()
            .parse::<u32>()
            .map_err(|_| usage(format!("invalid --curve `{s}`: expected K_MIN:K_MAX[:STEP]")))
    };
    let (lo, hi, step) = match parts.as_slice() {
        [a, b] => (num(a)?, num(b)?, 1),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(usage(format!("invalid --curve `{s}`: expected K_MIN:K_MAX[:STEP]"))),
    };
    if lo == 0 || hi < lo || step == 0 {
        return Err(usage(format!(
            "invalid --curve `{s}`: need 1 <= K_MIN <= K_MAX and STEP >= 1"
        )));
    }
    Ok((lo..=hi).step_by(step as usize).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_ranges() {
        assert_eq!(parse_curve("10:14").unwrap(), vec![10, 11, 12, 13, 14]);
        assert_eq!(parse_curve("10:30:10").unwrap(), vec![10, 20, 30]);
        assert!(parse_curve("0:5").is_err());
        assert!(parse_curve("5:4").is_err());
        assert!(parse_curve("5").is_err());
    }

    #[test]
    fn correlations_resolve() {
        let a: ComponentArgs = parse_args(&["--rho", "0.05", "--rho-c", "0.3", "--rho-s", "0.8"]).unwrap();
        let vc = a.resolve().unwrap();
        assert!((vc.sigma_c2 - 0.015).abs() < 1e-15 && (vc.sigma_st2 - 0.19).abs() < 1e-15);
        assert!(parse_args::<ComponentArgs>(&["--rho", "0.05", "--sigma-c2", "1"]).is_err());
    }

    #[test]
    fn full_replacement_gain_defaults_to_loss() {
        let a: DesignArgs = parse_args(&[
            "--kind",
            "full-replacement",
            "--j",
            "3",
            "--k",
            "10",
            "--lambda1",
            "0.2",
        ])
        .unwrap();
        let d = a.design().unwrap();
        assert_eq!(d.pattern.gamma1, 0.2);
        assert_eq!(d.pattern.gamma2, 0.0);
    }

    #[test]
    fn file_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(
            &path,
            r#"{"kind": "no-replacement", "j1": 4, "j2": 5, "k": 20, "sigma_c2": 1.0}"#,
        )
        .unwrap();
        let cli: VarianceArgs = parse_args(&["--j", "7", "--rho", "0.1"]).unwrap();
        let merged = merge(&cli, Some(&path)).unwrap();
        assert_eq!(
            (merged.design.j, merged.design.j1, merged.design.k),
            (Some(7), None, Some(20))
        );
        assert_eq!((merged.components.sigma_c2, merged.components.rho), (None, Some(0.1)));

        std::fs::write(&path, r#"{"kind": "no-replacement", "bogus": 1}"#).unwrap();
        assert!(matches!(merge(&cli, Some(&path)), Err(CliError::Params { .. })));
    }
}
