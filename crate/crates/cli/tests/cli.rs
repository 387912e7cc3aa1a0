use std::path::Path;
use std::process::Command;

use circpack::analysis::{calibrate_case_study, CalibrationAnchors};
use circpack::model::{RouteId, Scenario};
use circpack_cli::scenario_file::{
    bundled_scenario, load_scenario, parse_scenario, render_scenario, save_scenario, ScenarioFile, BUNDLED_SCENARIO,
};
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

fn circpack(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_circpack"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn bundled_file_matches_calibration() {
    let s = calibrate_case_study(&CalibrationAnchors::default()).unwrap();
    assert_eq!(render_scenario(&s), BUNDLED_SCENARIO);
    let b = bundled_scenario().unwrap();
    assert_eq!(b, s);
    assert_eq!(b.demand(), 1000);
    assert_eq!(b.len(), 8);
    assert_eq!(b.routes().iter().filter(|r| r.placeholder).count(), 5);
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = bundled_scenario()
        .unwrap()
        .to_builder()
        .fixed_cost("glass_washing", dec!(2.5))
        .capacity("multilayer_bag_landfill", 700)
        .build()
        .unwrap();
    let path = dir.path().join("nested/case.scenario");
    save_scenario(&s, &path).unwrap();
    let back = load_scenario(&path).unwrap();
    assert_eq!(back, s);
    assert_eq!(render_scenario(&back), render_scenario(&s));
}

#[test]
fn capacity_shortfall_is_named() {
    let mut f = ScenarioFile::from_scenario(&bundled_scenario().unwrap());
    for r in &f.routes {
        f.capacity_limits.insert(r.route_id.clone(), 10);
    }
    let text = serde_json::to_string(&f).unwrap();
    let e = parse_scenario(&text).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(e.details.iter().any(|d| d.contains("capacit")), "{e}");
}

#[test]
fn every_violation_is_listed() {
    let mut f = ScenarioFile::from_scenario(&bundled_scenario().unwrap());
    f.demand = 0;
    f.routes[1].route_id = f.routes[0].route_id.clone();
    f.routes[2].unit_emissions = dec!(-1);
    f.capacity_limits.insert("nowhere".into(), 5);
    let e = parse_scenario(&serde_json::to_string(&f).unwrap()).unwrap_err();
    assert!(e.details.len() >= 4, "{e}");
    let all = e.details.join("\n");
    for needle in ["demand", "duplicate", "emission", "nowhere"] {
        assert!(all.to_lowercase().contains(needle), "missing {needle}: {all}");
    }
}

#[test]
fn parse_errors_carry_position() {
    let e = parse_scenario("{\n  \"demand\": 1000,\n  \"routes\": [,]\n}").unwrap_err();
    assert!(e.message.contains("line 3"), "{}", e.message);
    assert!(e.message.contains("column"), "{}", e.message);
    let e = parse_scenario("{\"demand\": 10, \"routes\": [], \"colour\": 1}").unwrap_err();
    assert!(e.message.contains("colour"), "{}", e.message);
}

#[test]
fn decimals_survive_exactly() {
    let text = BUNDLED_SCENARIO.replace("-0.00093", "-0.000930000000000000001");
    let s: Scenario = parse_scenario(&text).unwrap();
    assert_eq!(
        s.route_by_id(&RouteId::new("multilayer_bag_strap")).unwrap().unit_cost,
        Decimal::new(-930000000000000001, 21)
    );
}

#[test]
fn subsidy_only_sweep_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let o = circpack(
        dir.path(),
        &[
            "sweep",
            "--objective",
            "min-ghg",
            "--mode",
            "subsidy-only",
            "--budgets",
            "0:100:10",
            "--svg",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let e = column(&csv, "total_emissions");
    assert_eq!(e.len(), 11);
    assert_eq!(e.first().unwrap(), "64.240000");
    assert_eq!(e.last().unwrap(), "49.970000");
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("budget,tax_rate,tax_income,subsidy_outlay,upper_value,units_multilayer_bag_strap,"));
    assert!(dir.path().join("_COMPLETE").exists());
    let svg = std::fs::read_to_string(dir.path().join("sweep_value.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("Budget"));
}

#[test]
fn verify_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let o = circpack(dir.path(), &["verify", "--demand", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["agree"], true);
    let csv = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 221);
    assert!(column(&csv, "agree").iter().all(|a| a == "true"));
}

#[test]
fn run_twice_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "--budget", "0", "--objective", "max-circularity", "--seed", "7"];
    for d in [&a, &b] {
        let o = circpack(d.path(), &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["run.csv", "trace.csv", "run.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let trace = std::fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 5 * 201);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scenario");
    std::fs::write(&bad, "{ \"demand\": 5, \"routes\": [] }").unwrap();
    let o = circpack(dir.path(), &["run", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "validation");
    assert!(!dir.path().join("_COMPLETE").exists());

    let o = circpack(dir.path(), &["sweep", "--budgets", "5:1:1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = circpack(
        dir.path(),
        &[
            "verify",
            "--demand",
            "60",
            "--max-routes",
            "8",
            "--linear",
            "3",
            "--general",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_circpack"))
        .args(["calibrate"])
        .env("CIRCPACK_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("coffee_case.scenario")).unwrap(),
        BUNDLED_SCENARIO
    );
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["residuals"].as_array().unwrap().len(), 10);
}
