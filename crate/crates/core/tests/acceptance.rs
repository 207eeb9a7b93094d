//! Acceptance criteria. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero if any fails.
//!
//! Run with `cargo test -p didpower-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use didpower_core::oracle::equivalence_report;
use didpower_core::{
    correlations_from_components, did_variance, monte_carlo_summary, power, preferred_design, relative_efficiency,
    required_subjects, t_cdf, t_quantile, DesignKind, FollowUpPattern, PowerSpec, PreferredDesign, TestStatistic,
    TrialDesign, VarianceComponents,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn school() -> VarianceComponents {
    VarianceComponents::new(0.0218, 0.0047, 0.3342, 0.2567).unwrap()
}

fn reference() -> VarianceComponents {
    VarianceComponents::new(0.015, 0.035, 0.76, 0.19).unwrap()
}

fn reference_design(kind: DesignKind, lambda: f64) -> TrialDesign {
    TrialDesign::balanced(30, 100, FollowUpPattern::no_replacement(lambda, lambda), kind).with_kind(kind)
}

fn correlation_conversion() -> Outcome {
    let a = correlations_from_components(&school());
    let b = correlations_from_components(&reference());
    let school_ok =
        (a.rho - 0.0429).abs() <= 1e-4 && (a.rho_c - 0.8226).abs() <= 1e-4 && (a.rho_s - 0.5656).abs() <= 1e-4;
    let reference_ok =
        (b.rho - 0.05).abs() <= 1e-12 && (b.rho_c - 0.3).abs() <= 1e-12 && (b.rho_s - 0.8).abs() <= 1e-12;
    ensure(
        school_ok && reference_ok,
        format!(
            "school ({:.6}, {:.6}, {:.6}); second set ({}, {}, {})",
            a.rho, a.rho_c, a.rho_s, b.rho, b.rho_c, b.rho_s
        ),
    )
}

fn relative_efficiency_at_ten_percent() -> Outcome {
    let vc = reference();
    let cohort = reference_design(DesignKind::CohortNoLtf, 0.0);
    let rep = relative_efficiency(&reference_design(DesignKind::FullReplacement, 0.1), &cohort, &vc)
        .map_err(|e| e.to_string())?;
    let norep = relative_efficiency(&reference_design(DesignKind::NoReplacement, 0.1), &cohort, &vc)
        .map_err(|e| e.to_string())?;
    ensure(
        (rep - 1.0206).abs() <= 1e-3 && norep <= 1.02,
        format!("full replacement {rep:.6}, no replacement {norep:.6}"),
    )
}

fn exact_oracle_equivalence() -> Outcome {
    let report = equivalence_report(200, 20_240_501, 0).map_err(|e| e.to_string())?;
    let kinds = DesignKind::ALL
        .iter()
        .all(|k| report.rows.iter().any(|r| r.design.kind == *k));
    ensure(
        report.rows.len() == 200 && kinds && report.max_relative_error <= 1e-10,
        format!(
            "{} configurations, max relative error {:.3e}",
            report.rows.len(),
            report.max_relative_error
        ),
    )
}

fn monte_carlo_validation() -> Outcome {
    const REPS: usize = 20_000;
    let vc = reference();
    let mut lines = Vec::new();
    let mut ok = true;
    let null = PowerSpec::new(0.0, 0.05, 0.8).unwrap();
    for (kind, seed) in [
        (DesignKind::CohortNoLtf, 101),
        (DesignKind::FullReplacement, 102),
        (DesignKind::NoReplacement, 103),
    ] {
        let d = reference_design(kind, 0.1);
        let s = monte_carlo_summary(&d, &vc, &null, REPS, seed, TestStatistic::ClusterT).map_err(|e| e.to_string())?;
        let z = (s.empirical_variance - s.closed_form_variance) / s.mc_standard_error;
        ok &= z.abs() <= 3.0;
        lines.push(format!("{kind} z={z:+.2}"));
        if kind == DesignKind::CohortNoLtf {
            let size_z = (s.empirical_power - 0.05) / (0.05f64 * 0.95 / REPS as f64).sqrt();
            ok &= size_z.abs() <= 3.0;
            lines.push(format!("size {:.4} z={size_z:+.2}", s.empirical_power));
        }
    }
    ensure(ok, lines.join(", "))
}

fn crossover_components(rho_s: f64) -> VarianceComponents {
    VarianceComponents::new(0.015, 0.035, 0.95 * rho_s, 0.95 * (1.0 - rho_s)).unwrap()
}

fn power_curve_crossover() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for j in [4, 30] {
        let ltf = TrialDesign::balanced(
            j,
            100,
            FollowUpPattern::no_replacement(0.5, 0.5),
            DesignKind::NoReplacement,
        );
        let reduced = ltf.with_kind(DesignKind::ReducedCohort);
        let gap = |rho: f64| -> Result<f64, String> {
            let vc = crossover_components(rho);
            let a = did_variance(&ltf, &vc).map_err(|e| e.to_string())?.total;
            let b = did_variance(&reduced, &vc).map_err(|e| e.to_string())?.total;
            Ok((a - b) / a)
        };
        let at_half = gap(0.5)?;
        ok &= at_half.abs() <= 1e-12;
        for i in 0..=20 {
            let rho = f64::from(i) * 0.05;
            if i == 10 {
                continue;
            }
            let g = gap(rho)?;
            // Below 0.5 loss without replacement is better, above it the reduced cohort.
            ok &= if rho < 0.5 { g < 0.0 } else { g > 0.0 };
        }
        detail.push(format!("J={j} relative gap at 0.5 = {at_half:.1e}"));
    }
    ensure(ok, detail.join(", "))
}

fn region_classifier() -> Outcome {
    let mut checked = 0;
    let mut mismatches = 0;
    for r in 0..10 {
        let rho_s = 0.02 + 0.1 * f64::from(r);
        let vc = VarianceComponents::new(0.01, 0.02, rho_s, 1.0 - rho_s).unwrap();
        for a in 1..=10 {
            for b in 1..=10 {
                let (f1, f2) = (f64::from(a) / 10.0, f64::from(b) / 10.0);
                let ltf = TrialDesign::balanced(
                    10,
                    1000,
                    FollowUpPattern::no_replacement(1.0 - f1, 1.0 - f2),
                    DesignKind::NoReplacement,
                );
                let v_ltf = did_variance(&ltf, &vc).map_err(|e| e.to_string())?.total;
                let v_red = did_variance(&ltf.with_kind(DesignKind::ReducedCohort), &vc)
                    .map_err(|e| e.to_string())?
                    .total;
                let direct = if (v_red - v_ltf).abs() <= 1e-12 * v_ltf {
                    PreferredDesign::Tie
                } else if v_red < v_ltf {
                    PreferredDesign::ReducedCohort
                } else {
                    PreferredDesign::LtfNoReplacement
                };
                checked += 1;
                mismatches += usize::from(preferred_design(f1, f2, rho_s).preferred != direct);
            }
        }
    }

    let named = preferred_design(0.84, 0.95, 0.5656).preferred == PreferredDesign::LtfNoReplacement
        && preferred_design(0.84, 0.95, 0.70).preferred == PreferredDesign::ReducedCohort;

    let fine: Vec<f64> = (1..=20).map(|i| f64::from(i) * 0.05).collect();
    let pairs = || {
        fine.iter()
            .flat_map(|&f2| fine.iter().filter(move |&&f1| f1 <= f2).map(move |&f1| (f1, f2)))
    };
    // f1 = f2 = 1 is the same design twice, so it is a tie at every ρ_S.
    let high = pairs()
        .filter(|&(f1, f2)| f1 < 1.0 || f2 < 1.0)
        .all(|(f1, f2)| preferred_design(f1, f2, 0.8).preferred == PreferredDesign::ReducedCohort);
    let low = pairs()
        .filter(|&(f1, f2)| f1 < f2)
        .all(|(f1, f2)| preferred_design(f1, f2, 0.3).preferred == PreferredDesign::LtfNoReplacement);

    ensure(
        checked == 1000 && mismatches == 0 && named && high && low,
        format!("{checked} lattice points, {mismatches} mismatches; named points {named}; rho_s 0.8 {high}; rho_s 0.3 {low}"),
    )
}

fn power_properties() -> Outcome {
    let null = PowerSpec::new(0.0, 0.05, 0.8).unwrap();
    let mut worst_null: f64 = 0.0;
    for kind in DesignKind::ALL {
        for j in [2, 15, 400] {
            let d = TrialDesign::balanced(
                j,
                40,
                FollowUpPattern::partial(0.25, 0.1, 0.2, 0.05),
                DesignKind::PartialReplacement,
            )
            .with_kind(kind);
            let p = power(&null, &d, &school()).map_err(|e| e.to_string())?.power;
            worst_null = worst_null.max((p - 0.025).abs());
        }
    }

    let mut subject_solves = 0;
    for i in 0..100 {
        let (spec, design, vc) = common::random_solver_config(i);
        let b = common::check_bracketing(&spec, &design, &vc).map_err(|e| format!("config {i}: {e}"))?;
        subject_solves += usize::from(b.is_some());
    }

    let mut worst_t: f64 = 0.0;
    for df in 1..=200 {
        for i in 1..=999 {
            let p = f64::from(i) / 1000.0;
            worst_t = worst_t.max((t_cdf(t_quantile(p, f64::from(df)), f64::from(df)) - p).abs());
        }
    }
    ensure(
        worst_null <= 1e-9 && worst_t <= 1e-10,
        format!(
            "null power error {worst_null:.1e}; 100 configs bracketed ({subject_solves} with attainable K); t round trip {worst_t:.1e}"
        ),
    )
}

fn school_subject_minimum() -> Outcome {
    const REPS: usize = 20_000;
    let vc = school();
    let spec = PowerSpec::new(0.12, 0.05, 0.8).unwrap();
    let design = TrialDesign::balanced(
        15,
        100,
        FollowUpPattern::full_replacement(0.05, 0.16),
        DesignKind::FullReplacement,
    );
    let k = required_subjects(&spec, &design, &vc).map_err(|e| e.to_string())?;
    let norep =
        required_subjects(&spec, &design.with_kind(DesignKind::NoReplacement), &vc).map_err(|e| e.to_string())?;

    let mut ok = k == 171 && norep == 172;
    let mut detail = vec![format!("solver K={k} (no replacement {norep})")];
    // Loss counts at K = 170 and 171 are fractional; simulate with whole subjects.
    for (kk, seed) in [(170, 8170), (171, 8171)] {
        let d = design.with_k(kk).with_rounded_counts();
        let s = monte_carlo_summary(&d, &vc, &spec, REPS, seed, TestStatistic::ClusterT).map_err(|e| e.to_string())?;
        let z = (s.empirical_power - 0.8) / s.power_standard_error;
        ok &= z.abs() <= 3.0;
        detail.push(format!("K={kk} empirical power {:.4} z={z:+.2}", s.empirical_power));
    }
    ensure(ok, detail.join(", "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC1 correlation conversion", correlation_conversion),
        ("AC2 relative efficiency", relative_efficiency_at_ten_percent),
        ("AC3 exact oracle equivalence", exact_oracle_equivalence),
        ("AC4 monte carlo validation", monte_carlo_validation),
        ("AC5 reduced cohort crossover", power_curve_crossover),
        ("AC6 region classifier", region_classifier),
        ("AC7 power properties", power_properties),
        ("AC8 subject minimum by simulation", school_subject_minimum),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
