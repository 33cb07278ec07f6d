use conecert::operator::BoundarySpec;
use conecert::problem::{bundled, digest, Problem};
use conecert::{DomainSpec, Error};

fn pointer(text: &str) -> (bool, String) {
    match Problem::from_json(text) {
        Err(Error::SchemaError { pointer, .. }) => (true, pointer),
        Err(Error::ValidationError { pointer, .. }) => (false, pointer),
        other => panic!("expected an error, got {other:?}"),
    }
}

const RECT: &str = r#"{
  "domain": {"type": "rectangle", "lo": [0, 0], "hi": [2, 1]},
  "n": 1,
  "components": [{
    "L": {"diffusion": [["1 + x1", "0"], ["0", "2"]], "advection": ["x2", "0"], "reaction": "1"},
    "B": {"kind": "robin", "b": "1 + x1^2"},
    "f": "u1 / (1 + u1)",
    "h": {"primitives": {"m": {"integral": {"component": 1, "weight": "x1"}}}, "combiner": "m / 2"},
    "rho": 1,
    "lambda": "pi"
  }],
  "constants": {"tau": [1], "xi": ["1/2"], "i0": 1},
  "grid": {"h": 0.125, "strict_cuts": true},
  "solver": {"linear": {"method": "iterative"}, "picard": {"theta": 0.75}}
}"#;

#[test]
fn rectangle_problem_with_defaults() {
    let p = Problem::from_json(RECT).unwrap();
    assert_eq!(p.spec.domain, DomainSpec::Rectangle { lo: [0.0, 0.0], hi: [2.0, 1.0] });
    assert!(matches!(p.spec.components[0].boundary, BoundarySpec::Robin { .. }));
    assert_eq!(p.spec.components[0].lambda, std::f64::consts::PI);
    assert_eq!(p.spec.components[0].eta, 0.0);
    assert_eq!(p.config.constants.xi, Some(vec![0.5]));
    assert_eq!(p.config.constants.i0, Some(0));
    assert_eq!(p.config.picard.theta, 0.75);
    assert_eq!(Problem::from_json(&p.to_json()).unwrap(), p);
    let sys = p.discretize().unwrap();
    assert!(!sys.op(0).is_direct());
    assert_eq!(sys.digest(), digest(&p.spec));
}

#[test]
fn component_count_must_match() {
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["n"] = 3.into();
    assert_eq!(pointer(&v.to_string()), (false, "/components".to_string()));
}

#[test]
fn unknown_names_are_located() {
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["components"][0]["h"]["combiner"] = "a + c".into();
    assert_eq!(pointer(&v.to_string()), (false, "/components/0/h".to_string()));
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["components"][1]["L"]["reaction"] = "u1".into();
    assert_eq!(pointer(&v.to_string()), (false, "/components/1/L/reaction".to_string()));
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["components"][0]["h"]["primitives"]["a"]["component"] = 3.into();
    assert_eq!(pointer(&v.to_string()), (false, "/components/0/h/primitives/a".to_string()));
}

#[test]
fn schema_errors_are_located() {
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["components"][1]["B"]["kind"] = "oblique".into();
    let (schema, at) = pointer(&v.to_string());
    assert!(schema && at.starts_with("/components/1/B"), "{at}");
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["constants"]["tau"] = serde_json::json!([1]);
    assert_eq!(pointer(&v.to_string()), (false, "/constants/tau".to_string()));
    assert!(pointer("{\"domain\": ").0);
}

#[test]
fn invalid_values_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["components"][0]["rho"] = (-1).into();
    assert!(Problem::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(bundled::EXAMPLE2).unwrap();
    v["domain"]["radius"] = 0.into();
    assert_eq!(pointer(&v.to_string()), (false, "/domain".to_string()));
}
