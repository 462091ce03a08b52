//! The hand-labelled antibiotic and days-at-home cases, evaluated through the
//! bundled network and through the closed-form expressions directly.

use serde_json::Value;
use synsum_core::reference::synsum_network;
use synsum_core::Assignment;

fn cases() -> Value {
    serde_json::from_str(include_str!("fixtures/expert_cases.json")).unwrap()
}

fn assignment_of(case: &Value, keys: &[&str], extra: &[(&str, &str)]) -> Assignment {
    let mut a: Assignment = keys.iter().map(|k| (k.to_string(), case[*k].as_str().unwrap().to_string())).collect();
    a.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    a
}

fn yes(case: &Value, key: &str) -> f64 {
    f64::from(case[key] == "yes")
}

fn fever(case: &Value, low: f64, high: f64) -> f64 {
    match case["fever"].as_str().unwrap() {
        "low" => low,
        "high" => high,
        _ => 0.0,
    }
}

#[test]
fn antibiotics_probability_is_the_logistic_expression() {
    let net = synsum_network();
    for case in cases()["antibiotics_policy_low"].as_array().unwrap() {
        let a = assignment_of(case, &["dyspnea", "cough", "pain", "fever"], &[("policy", "low")]);
        let got = net.eval_cpd("antibiotics", "yes", &a).unwrap();
        let z = -3.0
            + 0.8 * yes(case, "dyspnea")
            + 0.665 * yes(case, "cough")
            + 0.665 * yes(case, "pain")
            + fever(case, 0.9, 2.25);
        assert!((got - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12, "{case}");
        // The printed predictions are rounded to two decimals.
        assert!((got - case["pred"].as_f64().unwrap()).abs() < 0.01, "{case}: {got}");
    }
}

#[test]
fn days_rate_is_the_poisson_expression() {
    let net = synsum_network();
    let all = cases();
    let rows = all["days_train"].as_array().unwrap().iter().chain(all["days_test"].as_array().unwrap());
    for case in rows {
        let a = assignment_of(case, &["dyspnea", "cough", "pain", "nasal", "fever"], &[("self_employed", "no")]);
        let l0 = (0.010
            + 0.64 * yes(case, "dyspnea")
            + 0.35 * yes(case, "cough")
            + 0.47 * yes(case, "pain")
            + 0.011 * yes(case, "nasal")
            + fever(case, 0.81, 1.23))
        .exp();
        let l1 = (0.16
            + 0.51 * yes(case, "dyspnea")
            + 0.42 * yes(case, "cough")
            + 0.26 * yes(case, "pain")
            + 0.0051 * yes(case, "nasal")
            + fever(case, 0.24, 0.57))
        .exp();
        assert!((net.eval_lambda("days_at_home", "no", &a).unwrap() - l0).abs() < 1e-12);
        assert!((net.eval_lambda("days_at_home", "yes", &a).unwrap() - l1).abs() < 1e-12);
    }
}

#[test]
fn self_employment_scales_the_rate() {
    let net = synsum_network();
    let mut a: Assignment = [("dyspnea", "yes"), ("cough", "no"), ("pain", "no"), ("nasal", "no"), ("fever", "high")]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    a.insert("self_employed".into(), "no".into());
    let base = net.eval_lambda("days_at_home", "no", &a).unwrap();
    a.insert("self_employed".into(), "yes".into());
    let reduced = net.eval_lambda("days_at_home", "no", &a).unwrap();
    assert!((reduced / base - (-0.5f64).exp()).abs() < 1e-12);
}

#[test]
fn antibiotics_base_rates() {
    let net = synsum_network();
    let quiet = [("dyspnea", "no"), ("cough", "no"), ("pain", "no"), ("fever", "none")];
    let mut a: Assignment = quiet.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    a.insert("policy".into(), "low".into());
    let low = net.eval_cpd("antibiotics", "yes", &a).unwrap();
    a.insert("policy".into(), "high".into());
    let high = net.eval_cpd("antibiotics", "yes", &a).unwrap();
    assert!((0.045..=0.050).contains(&low), "{low}");
    assert!((0.115..=0.125).contains(&high), "{high}");
}
