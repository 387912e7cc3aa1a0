//! Command implementations. Each returns the text printed on stdout.

use std::path::{Path, PathBuf};

use circpack::analysis::{
    budget_sweep, calibrate_case_study, sensitivity_distance, sensitivity_loss, CalibrationAnchors, SensitivityRun,
    SweepRecord, SweepSettings,
};
use circpack::engine::{optimize, BilevelOutcome, PolicyMode};
use circpack::lower::{solve_lower_greedy, solve_lower_milp};
use circpack::model::{Scenario, UpperObjective};
use circpack::oracle::enumerate_lower;
use circpack::oracle::random::{random_policy, random_scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde_json::{json, Value};

use crate::config::{Command, Parameter, RunConfig};
use crate::error::CliError;
use crate::output::{clear_marker, csv_bytes, fmt6, fmt_f6, svg_chart, write_atomic, write_marker, Series};
use crate::scenario_file::{bundled_scenario, load_scenario, save_scenario};

/// Runs one command against the filesystem; returns stdout text.
pub fn execute(config: &RunConfig) -> Result<String, CliError> {
    let out = config.out.as_path();
    std::fs::create_dir_all(out)?;
    clear_marker(out)?;
    let text = match &config.command {
        Command::Calibrate { output } => calibrate(out, output.clone())?,
        Command::Verify {
            demand,
            max_routes,
            linear,
            general,
        } => verify(out, config.seed, *demand, *max_routes, *linear, *general)?,
        cmd => {
            let scenario = match &config.scenario {
                Some(p) => load_scenario(p)?,
                None => bundled_scenario()?,
            };
            let settings = config.settings();
            match cmd {
                Command::Run {
                    objective,
                    budget,
                    mode,
                } => run(out, &scenario, *objective, *budget, *mode, &settings)?,
                Command::Sweep {
                    objective,
                    mode,
                    budgets,
                } => sweep(out, &scenario, *objective, *mode, &budgets.0, &settings, config.svg)?,
                Command::Sensitivity {
                    parameter,
                    values,
                    objective,
                    budgets,
                } => sensitivity(
                    out, &scenario, *parameter, values, *objective, &budgets.0, &settings, config.svg,
                )?,
                Command::Calibrate { .. } | Command::Verify { .. } => unreachable!("handled above"),
            }
        }
    };
    write_marker(out)?;
    Ok(text)
}

fn num(d: Decimal) -> Value {
    serde_json::to_value(d.normalize()).expect("decimal serializes")
}

fn record_header(s: &Scenario) -> Vec<String> {
    let mut h: Vec<String> = ["budget", "tax_rate", "tax_income", "subsidy_outlay", "upper_value"]
        .map(String::from)
        .to_vec();
    h.extend(s.routes().iter().map(|r| format!("units_{}", r.id)));
    h.extend(["industry_cost", "total_emissions", "circularity_index"].map(String::from));
    h.extend(
        s.routes()
            .iter()
            .filter(|r| r.subsidizable)
            .map(|r| format!("subsidy_{}", r.id)),
    );
    h.extend(["pathway", "feasible"].map(String::from));
    h
}

fn record_row(s: &Scenario, r: &SweepRecord) -> Vec<String> {
    let mut row = vec![
        fmt6(r.budget),
        fmt6(r.tax_rate),
        fmt6(r.tax_income),
        fmt6(r.subsidy_outlay),
        fmt6(r.upper_value),
    ];
    row.extend(
        s.routes()
            .iter()
            .map(|x| r.allocation.get(&x.id).copied().unwrap_or(0).to_string()),
    );
    row.extend([
        fmt6(r.industry_cost),
        fmt6(r.total_emissions),
        fmt6(r.circularity_index),
    ]);
    row.extend(
        s.routes()
            .iter()
            .filter(|x| x.subsidizable)
            .map(|x| fmt6(r.subsidies.get(&x.id).copied().unwrap_or_default())),
    );
    row.push(r.pathway.as_ref().map(|p| p.to_string()).unwrap_or_default());
    row.push(r.feasible.to_string());
    row
}

fn outcome_record(s: &Scenario, budget: Decimal, o: &BilevelOutcome) -> SweepRecord {
    let r = &o.response;
    SweepRecord {
        budget,
        tax_rate: o.best_policy.tax_rate,
        tax_income: r.tax_payment,
        subsidy_outlay: r.subsidy_outlay,
        upper_value: o.upper_value,
        allocation: s
            .routes()
            .iter()
            .zip(r.allocation.units())
            .map(|(x, &u)| (x.id.clone(), u))
            .collect(),
        industry_cost: r.industry_cost,
        total_emissions: r.total_emissions,
        circularity_index: r.circularity_index,
        subsidies: o.best_policy.subsidies.clone(),
        feasible: o.feasible,
        pathway: r.allocation.dominant_route().map(|i| s.route(i).id.clone()),
    }
}

fn run(
    out: &Path,
    s: &Scenario,
    objective: UpperObjective,
    budget: Decimal,
    mode: PolicyMode,
    settings: &SweepSettings,
) -> Result<String, CliError> {
    let problem = settings.problem(s, objective, budget, mode);
    let o = optimize(&problem, &settings.params(&problem))?;
    let rec = outcome_record(s, budget, &o);
    write_atomic(
        &out.join("run.csv"),
        &csv_bytes(&record_header(s), &[record_row(s, &rec)])?,
    )?;

    let trace: Vec<Vec<String>> = o.trace.iter().map(|(i, v)| vec![i.to_string(), fmt_f6(*v)]).collect();
    write_atomic(
        &out.join("trace.csv"),
        &csv_bytes(&["iteration".into(), "best_value".into()], &trace)?,
    )?;

    let r = &o.response;
    let record = json!({
        "command": "run",
        "objective": objective.name(),
        "mode": mode.name(),
        "budget": num(budget),
        "seed": settings.seed,
        "policy": {
            "tax_rate": num(o.best_policy.tax_rate),
            "subsidies": o.best_policy.subsidies.iter().map(|(k, v)| (k.to_string(), num(*v))).collect::<serde_json::Map<_, _>>(),
        },
        "response": {
            "allocation": r.allocation.summary(s).iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "industry_cost": num(r.industry_cost),
            "total_emissions": num(r.total_emissions),
            "circularity_index": num(r.circularity_index),
            "tax_income": num(r.tax_payment),
            "subsidy_outlay": num(r.subsidy_outlay),
            "fixed_cost": num(r.fixed_cost),
        },
        "upper_value": num(o.upper_value),
        "feasible": o.feasible,
        "evaluations": o.evaluations,
    });
    let mut text = serde_json::to_string_pretty(&record).expect("json");
    text.push('\n');
    write_atomic(&out.join("run.json"), text.as_bytes())?;
    Ok(text)
}

/// Splits sweep results; failures are reported after the rows are saved.
fn partition(
    results: Vec<circpack::Result<SweepRecord>>,
    budgets: &[Decimal],
    tag: &str,
) -> (Vec<SweepRecord>, Vec<String>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (r, b) in results.into_iter().zip(budgets) {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => failed.push(format!("{tag}budget {b}: {e}")),
        }
    }
    (ok, failed)
}

fn axis_label(objective: UpperObjective) -> &'static str {
    match objective {
        UpperObjective::MinGhg => "GHG emissions (kg CO2e)",
        UpperObjective::MaxCircularity => "Circularity index",
        UpperObjective::MostProfitable => "Industry cost ($)",
    }
}

fn points(recs: &[SweepRecord], f: impl Fn(&SweepRecord) -> Decimal) -> Vec<(Decimal, Decimal)> {
    recs.iter().map(|r| (r.budget, f(r))).collect()
}

fn sweep(
    out: &Path,
    s: &Scenario,
    objective: UpperObjective,
    mode: PolicyMode,
    budgets: &[Decimal],
    settings: &SweepSettings,
    svg: bool,
) -> Result<String, CliError> {
    let (recs, failed) = partition(budget_sweep(s, objective, budgets, mode, settings), budgets, "");
    let rows: Vec<Vec<String>> = recs.iter().map(|r| record_row(s, r)).collect();
    let csv = out.join("sweep.csv");
    write_atomic(&csv, &csv_bytes(&record_header(s), &rows)?)?;
    if svg {
        let caption = format!("{} under {} policy", objective.name(), mode.name());
        let value = svg_chart(
            &caption,
            "Budget ($)",
            axis_label(objective),
            &[Series {
                name: objective.name().into(),
                points: points(&recs, |r| r.upper_value),
            }],
        );
        write_atomic(&out.join("sweep_value.svg"), value.as_bytes())?;
        let mut series = vec![Series {
            name: "tax rate ($/kg CO2e)".into(),
            points: points(&recs, |r| r.tax_rate),
        }];
        for route in s.routes().iter().filter(|r| r.subsidizable) {
            series.push(Series {
                name: format!("subsidy {} ($/unit)", route.id),
                points: points(&recs, |r| r.subsidies.get(&route.id).copied().unwrap_or_default()),
            });
        }
        let policy = svg_chart(&caption, "Budget ($)", "Policy rate", &series);
        write_atomic(&out.join("sweep_policy.svg"), policy.as_bytes())?;
    }
    if !failed.is_empty() {
        return Err(CliError {
            details: failed,
            ..CliError::solver(format!("sweep incomplete; partial rows in {}", csv.display()))
        });
    }
    Ok(format!(
        "{}\n",
        json!({"command": "sweep", "objective": objective.name(), "mode": mode.name(), "rows": recs.len(), "csv": csv.display().to_string()})
    ))
}

#[allow(clippy::too_many_arguments)]
fn sensitivity(
    out: &Path,
    s: &Scenario,
    parameter: Parameter,
    values: &[Decimal],
    objective: UpperObjective,
    budgets: &[Decimal],
    settings: &SweepSettings,
    svg: bool,
) -> Result<String, CliError> {
    let runs: Vec<SensitivityRun> = match parameter {
        Parameter::Distance => sensitivity_distance(s, objective, values, budgets, settings)?,
        Parameter::Loss => sensitivity_loss(s, objective, values, budgets, settings)?,
    };
    let mut header = vec![parameter.name().to_string()];
    header.extend(record_header(s));
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    let mut series = Vec::new();
    for run in runs {
        let tag = format!("{} {}: ", parameter.name(), run.parameter);
        let (recs, bad) = partition(run.records, budgets, &tag);
        failed.extend(bad);
        for r in &recs {
            let mut row = vec![fmt6(run.parameter)];
            row.extend(record_row(s, r));
            rows.push(row);
        }
        let slope = |v: Option<f64>| v.map(fmt_f6).unwrap_or_default();
        summary.push(vec![
            fmt6(run.parameter),
            run.pathway.as_ref().map(|p| p.to_string()).unwrap_or_default(),
            slope(run.tax_rate_slope),
            slope(run.revenue_slope),
            slope(run.subsidy_slope),
            slope(run.cost_slope),
        ]);
        series.push(Series {
            name: format!("{} = {}", parameter.name(), run.parameter.normalize()),
            points: points(&recs, |r| r.tax_rate),
        });
    }
    let csv = out.join("sensitivity.csv");
    write_atomic(&csv, &csv_bytes(&header, &rows)?)?;
    let sheader: Vec<String> = [
        parameter.name(),
        "pathway",
        "tax_rate_slope",
        "tax_income_slope",
        "subsidy_outlay_slope",
        "industry_cost_slope",
    ]
    .map(String::from)
    .to_vec();
    write_atomic(&out.join("sensitivity_summary.csv"), &csv_bytes(&sheader, &summary)?)?;
    if svg {
        let chart = svg_chart(
            &format!("{} sensitivity, {}", parameter.name(), objective.name()),
            "Budget ($)",
            "Carbon tax ($/kg CO2e)",
            &series,
        );
        write_atomic(&out.join("sensitivity_tax.svg"), chart.as_bytes())?;
    }
    if !failed.is_empty() {
        return Err(CliError {
            details: failed,
            ..CliError::solver(format!("sensitivity incomplete; partial rows in {}", csv.display()))
        });
    }
    Ok(format!(
        "{}\n",
        json!({"command": "sensitivity", "parameter": parameter.name(), "objective": objective.name(), "rows": rows.len(), "csv": csv.display().to_string()})
    ))
}

fn verify(
    out: &Path,
    seed: u64,
    demand: u64,
    max_routes: usize,
    linear: usize,
    general: usize,
) -> Result<String, CliError> {
    if demand == 0 || max_routes == 0 {
        return Err(CliError::validation(
            "demand and max-routes must be at least 1",
            Vec::new(),
        ));
    }
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    let cases = (0..linear).map(|k| (false, k)).chain((0..general).map(|k| (true, k)));
    for (is_general, k) in cases {
        let kind = if is_general { "general" } else { "linear" };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(if is_general { 1 << 32 } else { 0 } | k as u64);
        let routes = rng.random_range(1..=max_routes);
        let s = random_scenario(&mut rng, routes, demand, is_general);
        let p = random_policy(&mut rng, &s);
        let brute = enumerate_lower(&s, &p)?.objective;
        let milp = solve_lower_milp(&s, &p)?.industry_cost;
        let greedy = if is_general {
            None
        } else {
            Some(solve_lower_greedy(&s, &p)?.objective)
        };
        let agree = milp == brute && greedy.is_none_or(|g| g == brute);
        if !agree {
            mismatches.push(format!(
                "{kind} #{k}: greedy {} milp {milp} enumeration {brute}",
                greedy.map(|g| g.to_string()).unwrap_or_else(|| "-".into())
            ));
        }
        rows.push(vec![
            kind.to_string(),
            k.to_string(),
            routes.to_string(),
            greedy.map(fmt6).unwrap_or_default(),
            fmt6(milp),
            fmt6(brute),
            agree.to_string(),
        ]);
    }
    let header: Vec<String> = ["kind", "instance", "routes", "greedy", "milp", "enumeration", "agree"]
        .map(String::from)
        .to_vec();
    write_atomic(&out.join("verify.csv"), &csv_bytes(&header, &rows)?)?;
    if !mismatches.is_empty() {
        return Err(CliError::mismatch(
            format!("{} of {} instances disagree", mismatches.len(), rows.len()),
            mismatches,
        ));
    }
    Ok(format!(
        "{}\n",
        json!({"command": "verify", "demand": demand, "linear": linear, "general": general, "mismatches": 0, "agree": true})
    ))
}

fn calibrate(out: &Path, output: Option<PathBuf>) -> Result<String, CliError> {
    let anchors = CalibrationAnchors::default();
    let s = calibrate_case_study(&anchors)?;
    let path = output.unwrap_or_else(|| out.join("coffee_case.scenario"));
    save_scenario(&s, &path)?;
    let residuals = anchors.residuals(&s)?;
    let rows: Vec<Vec<String>> = residuals
        .iter()
        .map(|r| {
            vec![
                r.name.to_string(),
                fmt6(r.anchor),
                fmt6(r.model),
                fmt6(r.model - r.anchor),
            ]
        })
        .collect();
    let header: Vec<String> = ["anchor", "target", "model", "residual"].map(String::from).to_vec();
    write_atomic(&out.join("calibration_residuals.csv"), &csv_bytes(&header, &rows)?)?;
    let report: Vec<Value> = residuals
        .iter()
        .map(|r| {
            json!({
                "anchor": r.name,
                "target": num(r.anchor),
                "model": num(r.model),
                "residual": num(r.model - r.anchor),
                "relative": (r.anchor != Decimal::ZERO).then(|| ((r.model - r.anchor) / r.anchor).abs().round_dp(6).to_f64()),
            })
        })
        .collect();
    Ok(format!(
        "{}\n",
        json!({"command": "calibrate", "scenario": path.display().to_string(), "residuals": report})
    ))
}
