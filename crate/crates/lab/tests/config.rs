use blowuplab::config::{Backend, RunConfig};
use blowuplab::presets;
use blowuplab::LabError;

const SMALL: &str = r#"
name = "small"

[domain]
shape = "square"

[partition]
gamma1 = 0.5

[solver]
q = 2.0
u0 = 0.5
h = 0.1
k_over_h2 = 0.2
threshold = 1.0
"#;

#[test]
fn presets_parse_and_match_the_grid_choices() {
    let all = presets::all().unwrap();
    assert_eq!(all.len(), 4);
    for (i, c) in all.iter().enumerate() {
        assert_eq!(c.name, format!("table{}", i + 1));
        assert_eq!(c.backend, Backend::Fdm);
        assert_eq!(c.solver.u0, 0.05);
        assert_eq!(c.solver.threshold, 10.0);
        assert_eq!(c.gamma1_values().len(), 4);
        let sc = c.solver_config(c.gamma1_values()[0]).unwrap();
        let dim = sc.domain.dim();
        let (h, ratio) = if dim == 2 { (1.0 / 40.0, 0.2) } else { (0.1, 0.1) };
        assert!((sc.h - h).abs() < 1e-15 && (sc.k - ratio * h * h).abs() < 1e-15);
    }
    assert_eq!(all[0].gamma1_values(), vec![20.0 / 40.0, 10.0 / 40.0, 5.0 / 40.0, 3.0 / 40.0]);
    assert_eq!(all[3].gamma1_values(), vec![49.0 / 100.0, 25.0 / 100.0, 16.0 / 100.0, 9.0 / 100.0]);
    assert!(presets::preset("table9").is_err());
}

#[test]
fn cfl_is_checked_at_load() {
    let text = SMALL.replace("k_over_h2 = 0.2", "k_over_h2 = 1.0");
    let err = RunConfig::from_toml_str(&text).unwrap_err();
    assert!(matches!(err, LabError::Cfl { .. }));
    assert_eq!(err.exit_code(), 3);
    // 3D limit is h²/6
    let cube = SMALL.replace("\"square\"", "\"cube\"").replace("k_over_h2 = 0.2", "k_over_h2 = 0.17");
    assert!(matches!(RunConfig::from_toml_str(&cube), Err(LabError::Cfl { .. })));
}

#[test]
fn schema_errors_exit_two() {
    for bad in [
        SMALL.replace("q = 2.0", "q = 2.0\nbogus = 1"),
        SMALL.replace("k_over_h2 = 0.2", "k_over_h2 = 0.2\nk = 0.001"),
        SMALL.replace("k_over_h2 = 0.2", ""),
        SMALL.replace("gamma1 = 0.5", "gamma1 = 1.5"),
        format!("{SMALL}\n[sweep]\ngamma1 = [0.25, 0.5]\n"),
        SMALL.replace("\"square\"", "\"disk\"\nradius = 1.0").replace("name = \"small\"", "name = \"small\"\nbackend = \"bie\""),
        SMALL.replace("\"square\"", "\"hexagon\""),
    ] {
        let err = RunConfig::from_toml_str(&bad).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
}

#[test]
fn digest_is_stable_and_ignores_output() {
    let a = RunConfig::from_toml_str(SMALL).unwrap();
    let mut b = a.clone();
    b.output = Some("elsewhere".into());
    assert_eq!(a.digest(), b.digest());
    assert_eq!(a.digest().len(), 64);
    let mut c = a.clone();
    c.solver.u0 = 0.6;
    assert_ne!(a.digest(), c.digest());
    // JSON round trip keeps the digest
    let back: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(back.digest(), a.digest());
}
