use std::path::PathBuf;

use laif::dsl;
use laif::engine::{run_schedule, EngineConfig};
use laif::tmaze::{build_tmaze_model, run_experiment, TmazeConfig};
use serde_json::Value;

fn path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

/// Compare against a frozen file; `UPDATE_GOLDEN=1` rewrites it.
fn golden(rel: &str, actual: &str) -> String {
    let p = path(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&p, actual).unwrap();
    }
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn assert_close(a: &Value, b: &Value, at: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "{at}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{at}");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                assert_close(u, v, &format!("{at}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>(), "{at}");
            for (k, u) in x {
                assert_close(u, &y[k], &format!("{at}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{at}"),
    }
}

#[test]
fn tmaze_model_file_is_frozen() {
    let (graph, schedule) = build_tmaze_model(&TmazeConfig::default()).unwrap();
    let text = dsl::print_with_schedule(&graph, Some(&schedule));
    assert_eq!(text, golden("models/tmaze.cffg", &text));
}

#[test]
fn tmaze_model_file_reproduces_the_experiment() {
    let text = std::fs::read_to_string(path("models/tmaze.cffg")).unwrap();
    let (parsed, schedule) = dsl::parse(&text).unwrap();
    let (built, _) = build_tmaze_model(&TmazeConfig::default()).unwrap();
    assert!(parsed.isomorphic(&built));
    let count = |kind: &str| parsed.nodes().iter().filter(|n| n.kind.name() == kind).count();
    assert_eq!((count("TransitionMixture"), count("GfeComposite"), count("Equality")), (2, 2, 2));

    let out = run_schedule(&parsed, &schedule.unwrap(), EngineConfig::default()).unwrap();
    let expected = run_experiment(&TmazeConfig::default()).unwrap();
    for (k, q) in expected.control_posteriors.iter().enumerate() {
        let u = parsed.edge_id(&format!("u{}", k + 1)).unwrap();
        let got = out.marginals[&u].probabilities().unwrap();
        for (a, b) in got.iter().zip(q) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_utility_run_is_frozen() {
    let result = run_experiment(&TmazeConfig { c_utility: 0.0, ..TmazeConfig::default() }).unwrap();
    let text = serde_json::to_string_pretty(&result).unwrap() + "\n";
    let frozen: Value = serde_json::from_str(&golden("tests/golden/tmaze_c0.json", &text)).unwrap();
    assert_close(&serde_json::to_value(&result).unwrap(), &frozen, "$");
}
