use grasploop_core::benchmark::{export_report, harmonic_mean, ExportFormat};
use grasploop_core::geometry::{angle_delta, rotated_iou};
use grasploop_core::{
    evaluate, generate_suite, within_workspace, BenchmarkSuite, Category, EvalConfig, MockConfig,
    OutcomeStatus, Runner, SuiteConfig,
};
use std::collections::BTreeMap;

fn small_suite(seed: u64, n: usize) -> BenchmarkSuite {
    let config = SuiteConfig {
        n_cases: n,
        ..Default::default()
    };
    generate_suite(&config, seed).unwrap()
}

fn eval(suite: &BenchmarkSuite, runner: Runner) -> grasploop_core::EvalReport {
    let config = EvalConfig {
        runner,
        tools: MockConfig::default(),
        ..Default::default()
    };
    evaluate(suite, &config).unwrap()
}

#[test]
fn report_statistics_match_a_brute_force_recount() {
    let suite = small_suite(7, 70);
    for runner in [Runner::Loop, Runner::Baseline] {
        let report = eval(&suite, runner);
        assert_eq!(report.records.len(), suite.cases.len());
        let mut per_cat: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
        for (rec, sc) in report.records.iter().zip(&suite.cases) {
            assert_eq!(rec.case_id, sc.case.case_id);
            assert_eq!(rec.category, sc.case.category);
            let matches = rec.grasp.is_some_and(|g| {
                sc.case
                    .truths
                    .iter()
                    .any(|t| rotated_iou(&g, t) > 0.25 && angle_delta(g.theta(), t.theta()) <= 30.0)
            });
            let reachable = rec
                .grasp
                .is_some_and(|g| within_workspace(&g, &sc.scene.workspace));
            let expected = rec.status == OutcomeStatus::Success && matches && reachable;
            assert_eq!(rec.success, expected, "case {}", rec.case_id);
            if rec.status == OutcomeStatus::Success {
                assert!(
                    reachable,
                    "case {} succeeded outside the workspace",
                    rec.case_id
                );
            }
            let e = per_cat.entry(rec.category).or_default();
            e.0 += 1;
            e.1 += rec.success as usize;
        }
        let successes: usize = per_cat.values().map(|c| c.1).sum();
        assert_eq!(report.successes, successes);
        assert!((report.overall_rate - successes as f64 / 70.0).abs() < 1e-12);
        let rates: Vec<f64> = per_cat
            .values()
            .map(|(n, s)| *s as f64 / *n as f64)
            .collect();
        for (cat, (n, s)) in &per_cat {
            assert_eq!(report.categories[cat].cases, *n);
            assert_eq!(report.categories[cat].successes, *s);
        }
        let hm = if rates.contains(&0.0) {
            0.0
        } else {
            rates.len() as f64 / rates.iter().map(|r| 1.0 / r).sum::<f64>()
        };
        assert!((report.harmonic_mean - hm).abs() < 1e-12);
        let am = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!(report.harmonic_mean <= am + 1e-12);
    }
}

#[test]
fn harmonic_mean_never_exceeds_arithmetic_mean() {
    let mut rates = vec![0.05];
    for i in 0..40 {
        rates.push(((i * 37) % 100) as f64 / 100.0 + 0.01);
        let am = rates.iter().sum::<f64>() / rates.len() as f64;
        assert!(harmonic_mean(&rates) <= am + 1e-12);
    }
    assert_eq!(harmonic_mean(&[]), 0.0);
    assert_eq!(harmonic_mean(&[0.9, 0.0]), 0.0);
}

#[test]
fn suites_survive_save_and_load() {
    let suite = small_suite(11, 25);
    let dir = tempfile::tempdir().unwrap();
    suite.save(dir.path()).unwrap();
    let loaded = BenchmarkSuite::load(dir.path()).unwrap();
    assert_eq!(loaded.seed, 11);
    assert_eq!(loaded.cases.len(), 25);
    for (a, b) in suite.cases.iter().zip(&loaded.cases) {
        assert_eq!(a.scene, b.scene);
        assert_eq!(a.case, b.case);
    }
    assert_eq!(loaded.manifest_json(), suite.manifest_json());

    std::fs::remove_file(dir.path().join("scenes/case_0003.json")).unwrap();
    assert!(BenchmarkSuite::load(dir.path()).is_err());
}

#[test]
fn reports_export_as_csv_and_json() {
    let suite = small_suite(5, 20);
    let report = eval(&suite, Runner::Loop);
    let dir = tempfile::tempdir().unwrap();

    let csv_path = dir.path().join("r.csv");
    export_report(&report, &csv_path, ExportFormat::from_path(&csv_path)).unwrap();
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "case_id,category,status,iterations,success,seconds"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    for (row, rec) in rows.iter().zip(&report.records) {
        assert_eq!(row[0], rec.case_id.to_string());
        assert_eq!(row[1], rec.category.as_str());
        assert_eq!(row[2], rec.status.as_str());
        assert_eq!(row[3], rec.iterations.to_string());
        assert_eq!(row[4], rec.success.to_string());
        assert!(row[5].parse::<f64>().unwrap() >= 0.0);
    }

    let json_path = dir.path().join("r.json");
    export_report(&report, &json_path, ExportFormat::from_path(&json_path)).unwrap();
    let back: grasploop_core::EvalReport =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn parallel_and_serial_evaluation_agree() {
    let suite = small_suite(3, 40);
    let serial = eval(&suite, Runner::Loop);
    let config = EvalConfig {
        jobs: 4,
        ..Default::default()
    };
    let parallel = evaluate(&suite, &config).unwrap();
    let strip = |r: &grasploop_core::EvalReport| {
        r.records
            .iter()
            .map(|c| (c.case_id, c.status, c.iterations, c.success, c.grasp))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&serial), strip(&parallel));
}
