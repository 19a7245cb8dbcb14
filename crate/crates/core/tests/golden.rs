use std::path::Path;

use serde_json::Value;

use superball::constants::{compute_constant_chain, density_lower_bound, pressure_bound_formula};

fn golden() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/constants.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1e-300)
}

#[test]
fn chain_matches_high_precision_oracle() {
    for row in golden()["chains"].as_array().unwrap() {
        let p = row["p"].as_f64().unwrap();
        let c = compute_constant_chain(p).unwrap();
        for (k, got) in [
            ("x_p", c.x_p),
            ("eps_p", c.eps_p),
            ("delta_at_eps", c.delta_at_eps),
            ("convexity_gap", c.convexity_gap),
            ("c_prime", c.c_prime),
            ("c_p", c.c_p),
        ] {
            let want = row[k].as_f64().unwrap();
            assert!(close(got, want, 1e-9), "p={p} {k}: {got} vs {want}");
        }
    }
}

#[test]
fn c2_to_nine_digits() {
    let want = golden()["chains"][0]["c_p"].as_f64().unwrap();
    let c = compute_constant_chain(2.0).unwrap();
    assert!((c.c_p - want).abs() <= 1e-9);
    // bracketing of the crossing point
    assert!(c.x_p > 1.85 && c.x_p < 1.86);
}

#[test]
fn density_table() {
    for row in golden()["density_bounds"].as_array().unwrap() {
        let n = row["n"].as_u64().unwrap() as u32;
        let p = row["p"].as_f64().unwrap();
        let b = density_lower_bound(n, p).unwrap();
        for (k, got) in [
            ("log_ratio", b.log_ratio),
            ("bound", b.bound),
            ("fugacity_threshold", b.fugacity_threshold),
        ] {
            let want = row[k].as_f64().unwrap();
            assert!(close(got, want, 1e-12), "n={n} p={p} {k}: {got} vs {want}");
        }
    }
}

#[test]
fn pressure_table() {
    for row in golden()["pressure_formula"].as_array().unwrap() {
        let n = row["n"].as_u64().unwrap() as u32;
        let lambda = row["fugacity"].as_f64().unwrap();
        let want = row["value"].as_f64().unwrap();
        let got = pressure_bound_formula(n, lambda);
        assert!(close(got, want, 1e-12), "n={n} λ={lambda}: {got} vs {want}");
    }
}
