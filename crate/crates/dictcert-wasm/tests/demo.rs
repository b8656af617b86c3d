use dictcert_wasm::{balance_json, certificate_json, gram_json, MAX_CELLS};
use serde_json::Value;

#[test]
fn certificate_view_has_one_entry_per_column() {
    let v: Value = serde_json::from_str(&certificate_json(8, 1, 120, 3, true).unwrap()).unwrap();
    assert_eq!(v["q_norm"].as_array().unwrap().len(), 120);
    assert_eq!(v["offsup"].as_array().unwrap().len(), 120);
    assert_eq!(v["restarts"][0], 0);
    assert!(v["interp_dev"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn balance_view_matches_library() {
    let v: Value = serde_json::from_str(&balance_json(6, 2, 40, 1, false).unwrap()).unwrap();
    let xi = v["xi"].as_f64().unwrap();
    assert!(xi > 0.0 && v["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn gram_bounds_hold_on_every_subset() {
    let v: Value = serde_json::from_str(&gram_json(40, 60, 2, 200, 5).unwrap()).unwrap();
    assert_eq!(v["violations"], 0);
    assert_eq!(v["smin"].as_array().unwrap().len(), 200);
}

#[test]
fn oversized_and_invalid_requests_are_refused() {
    assert!(certificate_json(64, 2, MAX_CELLS, 1, true).is_err());
    assert!(balance_json(6, 0, 40, 1, true).is_err());
    assert!(gram_json(10, 10, 11, 5, 1).is_err());
}

#[test]
fn views_are_deterministic_in_the_seed() {
    assert_eq!(certificate_json(6, 1, 50, 9, false).unwrap(), certificate_json(6, 1, 50, 9, false).unwrap());
    assert_ne!(gram_json(20, 30, 2, 10, 1).unwrap(), gram_json(20, 30, 2, 10, 2).unwrap());
}
