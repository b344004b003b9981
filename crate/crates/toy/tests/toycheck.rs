use bangkit_toy::{run_toycheck, ToyCheckConfig, ToyCheckReport};

#[test]
fn default_suite_passes_and_serializes() {
    let report = run_toycheck(&ToyCheckConfig::default()).unwrap();
    for c in &report.checks {
        println!("{:<45} {:>5} measured={:.3e} tol={:.1e}", c.name, c.passed, c.measured, c.tolerance);
    }
    let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
    assert!(report.passed, "failed checks: {failed:?}");
    assert!(report.checks.len() >= 30);
    let json = serde_json::to_string(&report).unwrap();
    let back: ToyCheckReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn unknown_config_keys_rejected() {
    assert!(serde_json::from_str::<ToyCheckConfig>(r#"{"steps": 3, "bogus": 1}"#).is_err());
    let cfg: ToyCheckConfig = serde_json::from_str(r#"{"steps": 3}"#).unwrap();
    assert_eq!(cfg.cfg_scale, 7.0);
}
