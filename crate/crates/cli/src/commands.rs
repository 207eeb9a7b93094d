use std::io::Write;

use didpower_core::compare::lattice;
use didpower_core::oracle::{equivalence_report, monte_carlo_replicates, summarize_replicates};
use didpower_core::{
    correlations_from_components, did_variance, power, power_curve, preferred_design, re_grid, region_grid,
    required_clusters, required_subjects, DesignKind, FixedEffects, ReComparison, TrialDesign, VarianceComponents,
};
use serde_json::{json, Map, Value};

use crate::error::{CliError, Result};
use crate::output::{open_output, to_json, Artifact, Cell, Table};
use crate::params::{parse_curve, CheckArgs, PowerArgs, ReGridArgs, RegionArgs, SimulateArgs, SolveArgs, VarianceArgs};

/// Relative tolerance for `check`.
pub const CHECK_TOLERANCE: f64 = 1e-10;

fn design_columns() -> Vec<&'static str> {
    vec!["kind", "j1", "j2", "k", "lambda1", "lambda2", "gamma1", "gamma2"]
}

fn design_cells(d: &TrialDesign) -> Vec<Cell> {
    let p = d.pattern;
    vec![
        Cell::from(d.kind.as_str()),
        d.j1.into(),
        d.j2.into(),
        d.k.into(),
        p.lambda1.into(),
        p.lambda2.into(),
        p.gamma1.into(),
        p.gamma2.into(),
    ]
}

fn header(d: &TrialDesign, vc: &VarianceComponents) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("design".into(), to_json(d));
    m.insert("components".into(), to_json(vc));
    m.insert("correlations".into(), to_json(&correlations_from_components(vc)));
    m
}

pub fn variance(args: &VarianceArgs) -> Result<Artifact> {
    let d = args.design.design()?;
    let vc = args.components.resolve()?;
    let v = did_variance(&d, &vc)?;

    let mut m = header(&d, &vc);
    m.insert("total".into(), to_json(&v.total));
    m.insert("per_arm".into(), to_json(&v.per_arm));
    m.insert("cluster_time_term".into(), to_json(&v.cluster_time_term));
    m.insert("subject_term".into(), to_json(&v.subject_term));
    m.insert("rho_s_star".into(), to_json(&v.rho_s_star));
    if args.explain {
        m.insert("diagnostics".into(), to_json(&v.diagnostics));
    }

    let mut columns = design_columns();
    columns.extend([
        "total",
        "var_arm1",
        "var_arm2",
        "cluster_time_term",
        "subject_term",
        "rho_s_star",
    ]);
    let mut row = design_cells(&d);
    row.extend(
        [
            v.total,
            v.per_arm[0],
            v.per_arm[1],
            v.cluster_time_term,
            v.subject_term,
            v.rho_s_star,
        ]
        .map(Cell::from),
    );
    if args.explain {
        let g = &v.diagnostics;
        columns.extend([
            "eta",
            "analysis_size",
            "stay_fraction1",
            "stay_fraction2",
            "followup_size1",
            "followup_size2",
        ]);
        row.push(g.eta.into());
        row.extend(
            [
                g.analysis_size,
                g.stay_fraction[0],
                g.stay_fraction[1],
                g.followup_size[0],
                g.followup_size[1],
            ]
            .map(Cell::from),
        );
    }
    let mut table = Table::new(columns);
    table.push(row);
    Ok(Artifact {
        json: Value::Object(m),
        table,
    })
}

pub fn power_cmd(args: &PowerArgs) -> Result<Artifact> {
    let vc = args.components.resolve()?;
    let spec = args.effect.spec()?;
    if let Some(range) = &args.curve {
        let ks = parse_curve(range)?;
        // K is swept, so the template only needs a placeholder size.
        let mut design = args.design.clone();
        design.kind.get_or_insert(DesignKind::NoReplacement);
        let template = design.design_with_k(Some(design.k.unwrap_or(ks[0])))?;
        let kinds = args
            .curve_kinds
            .clone()
            .unwrap_or_else(|| vec![DesignKind::FullReplacement, DesignKind::NoReplacement]);
        let mut columns = vec!["k".to_owned()];
        let mut curves = Vec::new();
        for kind in kinds {
            columns.push(format!("power_{}", kind.as_str().replace('-', "_")));
            curves.push(power_curve(&spec, &template.with_kind(kind), &vc, ks.iter().copied())?);
        }
        let mut table = Table::new(columns);
        for (i, &k) in ks.iter().enumerate() {
            let mut row = vec![Cell::from(k)];
            row.extend(curves.iter().map(|c| Cell::from(c[i].power)));
            table.push(row);
        }
        return Ok(Artifact::table(table));
    }

    let d = args.design.design()?;
    let r = power(&spec, &d, &vc)?;
    let mut m = header(&d, &vc);
    m.insert("beta3".into(), to_json(&spec.beta3));
    m.insert("alpha".into(), to_json(&spec.alpha));
    for (key, value) in [
        ("power", r.power),
        ("noncentrality", r.noncentrality),
        ("critical_t", r.critical_t),
        ("variance", r.variance),
    ] {
        m.insert(key.into(), to_json(&value));
    }
    m.insert("df".into(), Value::from(r.df));

    let mut columns = design_columns();
    columns.extend([
        "beta3",
        "alpha",
        "power",
        "df",
        "noncentrality",
        "critical_t",
        "variance",
    ]);
    let mut row = design_cells(&d);
    row.extend([
        spec.beta3.into(),
        spec.alpha.into(),
        r.power.into(),
        r.df.into(),
        r.noncentrality.into(),
        r.critical_t.into(),
        r.variance.into(),
    ]);
    let mut table = Table::new(columns);
    table.push(row);
    Ok(Artifact {
        json: Value::Object(m),
        table,
    })
}

pub fn solve(args: &SolveArgs) -> Result<Artifact> {
    let vc = args.components.resolve()?;
    let spec = args.effect.spec()?;
    let (target, value, solved) = match (args.subjects, args.clusters) {
        (true, false) => {
            // K is solved for, so any placeholder passes validation.
            let template = args.design.design_with_k(Some(args.design.k.unwrap_or(1)))?;
            let k = required_subjects(&spec, &template, &vc)?;
            ("subjects", k, template.with_k(k))
        }
        (false, true) => {
            let mut design = args.design.clone();
            if design.j.is_none() && design.j1.is_none() && design.j2.is_none() {
                design.j = Some(2);
            }
            let template = design.design()?;
            let j = required_clusters(&spec, &template, &vc)?;
            ("clusters", j, template.with_clusters(j))
        }
        _ => return Err(CliError::Usage("choose exactly one of --subjects or --clusters".into())),
    };
    let r = power(&spec, &solved, &vc)?;

    let key = if target == "subjects" { "k" } else { "j" };
    let mut m = Map::new();
    m.insert("solved_for".into(), Value::from(target));
    m.insert(key.into(), Value::from(value));
    m.insert("power".into(), to_json(&r.power));
    m.insert("target_power".into(), to_json(&spec.target_power));
    m.insert("df".into(), Value::from(r.df));
    m.extend(header(&solved, &vc));

    let mut table = Table::new(["solved_for", "value", "power", "target_power", "df"]);
    table.push(vec![
        target.into(),
        value.into(),
        r.power.into(),
        spec.target_power.into(),
        r.df.into(),
    ]);
    Ok(Artifact {
        json: Value::Object(m),
        table,
    })
}

pub fn re_grid_cmd(args: &ReGridArgs) -> Result<Artifact> {
    let vc = args.components.resolve()?;
    let comparison = args.comparison.unwrap_or(ReComparison::RepVsCohort);
    let j = args.j.ok_or_else(|| CliError::Usage("--j is required".into()))?;
    let k = args.k.ok_or_else(|| CliError::Usage("--k is required".into()))?;
    let max = args.lambda_max.unwrap_or(0.8);
    let step = args.lambda_step.unwrap_or(0.05);
    if !(step > 0.0 && (0.0..1.0).contains(&max)) {
        return Err(CliError::Usage(
            "need --lambda-step > 0 and 0 <= --lambda-max < 1".into(),
        ));
    }
    let base = TrialDesign::balanced(j, k, Default::default(), DesignKind::CohortNoLtf);
    let cells = re_grid(comparison, &vc, &base, &lattice(max, step))?;
    let mut table = Table::new(["lambda1", "lambda2", "rho_s", "value"]);
    for c in cells {
        table.push(vec![c.lambda1.into(), c.lambda2.into(), c.rho_s.into(), c.value.into()]);
    }
    Ok(Artifact::table(table))
}

fn check_rate(name: &str, f: f64) -> Result<f64> {
    if f > 0.0 && f <= 1.0 {
        Ok(f)
    } else {
        Err(CliError::Usage(format!("--{name} must lie in (0, 1], got {f}")))
    }
}

fn check_rho(rho: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&rho) {
        Ok(rho)
    } else {
        Err(CliError::Usage(format!(
            "subject autocorrelation must lie in [0, 1], got {rho}"
        )))
    }
}

pub fn region(args: &RegionArgs) -> Result<Artifact> {
    if let (Some(f1), Some(f2)) = (args.f1, args.f2) {
        let rho = check_rho(
            args.rho_s
                .ok_or_else(|| CliError::Usage("--rho-s is required with --f1/--f2".into()))?,
        )?;
        let p = preferred_design(check_rate("f1", f1)?, check_rate("f2", f2)?, rho);
        let json = json!({
            "f1": to_json(&p.f1),
            "f2": to_json(&p.f2),
            "rho_s": to_json(&p.rho_s),
            "class": p.preferred.as_str(),
            "threshold": to_json(&p.threshold),
        });
        let mut table = Table::new(["f1", "f2", "rho_s", "class", "threshold"]);
        table.push(vec![
            p.f1.into(),
            p.f2.into(),
            p.rho_s.into(),
            p.preferred.as_str().into(),
            p.threshold.into(),
        ]);
        return Ok(Artifact { json, table });
    }

    let rhos = args.rho_values.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.6, 0.7, 0.8]);
    for &r in &rhos {
        check_rho(r)?;
    }
    let step = args.f_step.unwrap_or(0.05);
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::Usage("--f-step must lie in (0, 1]".into()));
    }
    let fs: Vec<f64> = lattice(1.0, step).into_iter().skip(1).collect();
    let grid = region_grid(&rhos, &fs);
    let table = if args.boundary {
        let mut t = Table::new(["rho_s", "f2", "f1_threshold"]);
        for b in grid.boundary {
            t.push(vec![b.rho_s.into(), b.f2.into(), b.f1_threshold.into()]);
        }
        t
    } else {
        let mut t = Table::new(["f1", "f2", "rho_s", "class"]);
        for p in grid.points {
            t.push(vec![
                p.f1.into(),
                p.f2.into(),
                p.rho_s.into(),
                p.preferred.as_str().into(),
            ]);
        }
        t
    };
    Ok(Artifact::table(table))
}

pub fn simulate(args: &SimulateArgs) -> Result<Artifact> {
    let d = args.design.design()?;
    let vc = args.components.resolve()?;
    let mut effect = args.effect.clone();
    effect.beta3.get_or_insert(0.0);
    let spec = effect.spec()?;
    let replicates = args.replicates.unwrap_or(1000);
    let seed = args.seed.unwrap_or(1);
    let statistic = args.statistic.unwrap_or_default();
    if replicates < 2 {
        return Err(CliError::Usage("--replicates must be at least 2".into()));
    }

    let fixed = FixedEffects {
        beta3: spec.beta3,
        ..FixedEffects::default()
    };
    let reps = monte_carlo_replicates(&d, &vc, &fixed, replicates, seed)?;
    let s = summarize_replicates(&d, &vc, &spec, &reps, seed, statistic)?;

    if let Some(path) = &args.replicates_csv {
        let mut t = Table::new([
            "replicate",
            "seed",
            "beta3_hat",
            "y11",
            "y12",
            "y21",
            "y22",
            "cluster_t",
        ]);
        for (i, r) in reps.iter().enumerate() {
            let c = r.cell_means;
            t.push(vec![
                i.into(),
                r.seed.into(),
                r.beta3_hat.into(),
                c.y11.into(),
                c.y12.into(),
                c.y21.into(),
                c.y22.into(),
                r.cluster_t.into(),
            ]);
        }
        let mut out = open_output(Some(path))?;
        t.write_csv(&mut out)?;
        out.flush().map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }

    let mut m = header(&d, &vc);
    m.insert("beta3".into(), to_json(&spec.beta3));
    m.insert("alpha".into(), to_json(&spec.alpha));
    if let Value::Object(summary) = to_json(&s) {
        m.extend(summary);
    }

    let mut table = Table::new([
        "replicates",
        "master_seed",
        "statistic",
        "closed_form_variance",
        "mean_beta3",
        "empirical_variance",
        "mc_standard_error",
        "empirical_power",
        "power_standard_error",
        "df",
        "critical_t",
    ]);
    table.push(vec![
        s.replicates.into(),
        s.master_seed.into(),
        s.statistic.as_str().into(),
        s.closed_form_variance.into(),
        s.mean_beta3.into(),
        s.empirical_variance.into(),
        s.mc_standard_error.into(),
        s.empirical_power.into(),
        s.power_standard_error.into(),
        s.df.into(),
        s.critical_t.into(),
    ]);
    Ok(Artifact {
        json: Value::Object(m),
        table,
    })
}

/// The report plus whether it passed; the caller emits before failing.
pub fn check(args: &CheckArgs) -> Result<(Artifact, Option<CliError>)> {
    let trials = args.trials.unwrap_or(200);
    let seed = args.seed.unwrap_or(1);
    let report = equivalence_report(trials, seed, args.mc_replicates.unwrap_or(0))?;
    let passed = report.max_relative_error <= CHECK_TOLERANCE;

    let mut columns = design_columns();
    columns.insert(0, "trial");
    columns.extend(["closed_form", "exact", "relative_error", "monte_carlo", "mc_z"]);
    let mut table = Table::new(columns);
    let mut rows = Vec::new();
    for r in &report.rows {
        let mut row = vec![Cell::from(r.trial)];
        row.extend(design_cells(&r.design));
        row.extend([
            r.closed_form.into(),
            r.exact.into(),
            r.relative_error.into(),
            r.monte_carlo.into(),
            r.mc_z.into(),
        ]);
        table.push(row);
        rows.push(json!({
            "trial": r.trial,
            "design": to_json(&r.design),
            "components": to_json(&r.components),
            "closed_form": to_json(&r.closed_form),
            "exact": to_json(&r.exact),
            "relative_error": to_json(&r.relative_error),
            "monte_carlo": to_json(&r.monte_carlo),
            "mc_z": to_json(&r.mc_z),
        }));
    }
    let json = json!({
        "trials": report.trials,
        "seed": report.seed,
        "tolerance": CHECK_TOLERANCE,
        "passed": passed,
        "max_relative_error": to_json(&report.max_relative_error),
        "max_abs_mc_z": to_json(&report.max_abs_mc_z),
        "rows": rows,
    });
    let failure = (!passed).then_some(CliError::CheckFailed {
        max: report.max_relative_error,
        tolerance: CHECK_TOLERANCE,
    });
    Ok((Artifact { json, table }, failure))
}
