use conecert_web::{bundled_problem, operator_fields, picard, region_sweep};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn operator_fields_on_the_disk() {
    let p = bundled_problem("example1").unwrap();
    let v = parse(&operator_fields(&p, 1, 1.0 / 16.0).unwrap());
    let nodes = v["mesh"]["nodes"].as_array().unwrap().len();
    assert_eq!(nodes % 2, 0);
    assert_eq!(v["k1"].as_array().unwrap().len(), nodes / 2);
    assert_eq!(v["phi"].as_array().unwrap().len(), nodes / 2);
    assert!((v["k1_norm"].as_f64().unwrap() - 0.25).abs() < 1e-3);
    assert!((v["gamma_norm"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let r = v["spectral_radius"].as_f64().unwrap();
    assert!((r - 0.1729).abs() < 2e-3, "{r}");
    assert!(operator_fields(&p, 3, 0.0).is_err());
}

#[test]
fn region_grid_matches_axes() {
    let p = bundled_problem("example2").unwrap();
    let out = region_sweep(&p, "nonexistence", "lambda1", "0:1:0.25", "eta1", "0:0.5:0.25", 1.0 / 8.0).unwrap();
    let v = parse(&out);
    let (xs, ys) = (v["xs"].as_array().unwrap().len(), v["ys"].as_array().unwrap().len());
    assert_eq!((xs, ys), (5, 3));
    let verdicts = v["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.len(), 15);
    assert_eq!(verdicts[0], "pass");
    assert_eq!(verdicts[14], "fail");
}

#[test]
fn region_rejects_bad_input() {
    let p = bundled_problem("example2").unwrap();
    assert!(region_sweep(&p, "both", "lambda1", "0:1:0.5", "eta1", "0:1:0.5", 0.125).is_err());
    assert!(region_sweep(&p, "existence", "lambda1", "0:1:0.5", "lambda1", "0:1:0.5", 0.125).is_err());
    assert!(region_sweep(&p, "existence", "lambda3", "0:1:0.5", "eta1", "0:1:0.5", 0.125).is_err());
    assert!(region_sweep(&p, "existence", "lambda1", "1:0", "eta1", "0:1:0.5", 0.125).is_err());
}

#[test]
fn picard_reaches_the_trivial_solution() {
    let p = bundled_problem("example2").unwrap();
    let v = parse(&picard(&p, r#"{"starts": 2, "seed": 7, "h": 0.125}"#).unwrap());
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(v["distinct"].as_array().unwrap().len(), 1);
    assert!(runs.iter().all(|r| r["status"] == "converged"));
    let sol = v["solution"].as_array().unwrap();
    assert_eq!(sol.len(), 2);
    assert!(sol.iter().flat_map(|c| c.as_array().unwrap()).all(|x| x.as_f64().unwrap().abs() < 1e-6));
}

#[test]
fn picard_options_are_checked() {
    let p = bundled_problem("example2").unwrap();
    assert!(picard(&p, r#"{"sides": 2}"#).unwrap_err().contains("sides"));
    assert!(picard(&p, r#"{"lambda": [0.1]}"#).is_err());
    assert!(picard("{}", "").is_err());
    assert!(bundled_problem("example9").is_err());
}
