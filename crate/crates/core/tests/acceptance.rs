//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the report is always printed; exits nonzero if any criterion
//! fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use superball::constants::{
    clarkson_check_with, compute_constant_chain, convexity_margin, density_lower_bound, pressure_bound_formula,
    ClarksonDirection,
};
use superball::geometry::{mc_unit_ball_volume, BlockSpec, Region, SpaceParams};
use superball::gibbs::{
    estimate_alpha_curve, exact_grand_partition, intersection_volume_check, monotonicity_excess, run_chain,
    run_replicas, ChainOptions, ModelParams,
};
use superball::lattice_graph::{self, build_lattice, cover_check, verify_packing, PackOptions};
use superball::seed::{derive_seed, rng_from_seed};
use superball::thermo::{entropy_estimate, entropy_monotonicity_check};

type Rng8 = rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn random_cuts(rng: &mut Rng8, max_n: usize) -> Vec<usize> {
    let n = rng.random_range(1..=max_n);
    let mut cuts = vec![0];
    let mut at = 0;
    while at < n {
        at += rng.random_range(1..=n - at);
        cuts.push(at);
    }
    cuts
}

fn gaussian(rng: &mut Rng8, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(rng: &mut Rng8, space: &SpaceParams) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, space.dim());
        let nv = space.norm(&v).unwrap();
        if nv > 1e-12 {
            v.iter_mut().for_each(|c| *c /= nv);
            return v;
        }
    }
}

fn clarkson_suite() -> Outcome {
    let mut rng = rng_from_seed(101);
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    let cases: [(f64, ClarksonDirection); 8] = [
        (1.05, ClarksonDirection::Reversed),
        (1.1, ClarksonDirection::Reversed),
        (1.25, ClarksonDirection::Reversed),
        (1.5, ClarksonDirection::Reversed),
        (1.75, ClarksonDirection::Reversed),
        (2.0, ClarksonDirection::Reversed),
        (2.0, ClarksonDirection::Stated),
        (2.5, ClarksonDirection::Stated),
    ];
    let mut all = cases.to_vec();
    all.push((3.0, ClarksonDirection::Stated));
    for (p, dir) in all {
        for _ in 0..10_000 {
            let space = SpaceParams::new(p, BlockSpec::new(random_cuts(&mut rng, 10)).unwrap()).unwrap();
            let sx = 10f64.powf(rng.random_range(-2.0..2.0));
            let sy = 10f64.powf(rng.random_range(-2.0..2.0));
            let x: Vec<f64> = gaussian(&mut rng, space.dim()).into_iter().map(|c| c * sx).collect();
            let y: Vec<f64> = gaussian(&mut rng, space.dim()).into_iter().map(|c| c * sy).collect();
            let r = clarkson_check_with(&x, &y, &space, dir).unwrap();
            worst = worst.min(r.residuals().into_iter().fold(f64::INFINITY, f64::min));
            if !r.holds(1e-9) {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("90000 pairs, {failures} failures, worst relative residual {worst:.3e}"))
}

fn uniform_convexity() -> Outcome {
    let mut rng = rng_from_seed(202);
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for p in [1.05, 1.1, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0] {
        for _ in 0..10_000 {
            let space = SpaceParams::new(p, BlockSpec::new(random_cuts(&mut rng, 10)).unwrap()).unwrap();
            let x = unit(&mut rng, &space);
            let y = unit(&mut rng, &space);
            let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let d = space.norm(&diff).unwrap().min(2.0);
            if d <= 0.0 {
                continue;
            }
            let eps = d * (1.0 - rng.random::<f64>());
            let m = convexity_margin(&x, &y, eps, &space).unwrap();
            worst = worst.min(m);
            if m < -1e-12 {
                failures += 1;
            }
        }
    }
    outcome(failures == 0, format!("80000 pairs, {failures} failures, smallest margin {worst:.3e}"))
}

fn golden() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/constants.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn constant_chain() -> Outcome {
    let mut bad = Vec::new();
    for i in 1..=50 {
        let p = 1.0 + i as f64 / 50.0;
        match compute_constant_chain(p) {
            Ok(c) => {
                let ok = (0.0..=1e-8).contains(&c.residual_h)
                    && c.c_gap > 0.0
                    && c.c_gap < c.x_gap
                    && c.convexity_gap > 0.0;
                if !ok {
                    bad.push(format!("p={p}"));
                }
            }
            Err(e) => bad.push(format!("p={p}: {e}")),
        }
    }
    let g = golden();
    let c2_ref = g["chains"][0]["c_p"].as_f64().unwrap();
    let c2 = compute_constant_chain(2.0).unwrap().c_p;
    let c2_ok = (c2 - c2_ref).abs() <= 1e-9;
    outcome(
        bad.is_empty() && c2_ok,
        format!("50-point grid, {} bad {:?}; c_2 = {c2:.13} vs golden {c2_ref:.13}", bad.len(), bad),
    )
}

fn volume_oracle() -> Outcome {
    let mut rng = rng_from_seed(404);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..10 {
        let p = rng.random_range(1.1..4.0);
        let space = SpaceParams::new(p, BlockSpec::new(random_cuts(&mut rng, 4)).unwrap()).unwrap();
        let est = mc_unit_ball_volume(&space, 10_000_000, derive_seed(404, i)).unwrap();
        let diff = (est.estimate - space.unit_ball_volume()).abs();
        // n = 1: every sample hits and the oracle is exact
        let z = if est.se > 0.0 { diff / est.se } else if diff <= 1e-12 * est.estimate { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
        if z > 3.0 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("10 spaces, 1e7 samples each, {failures} beyond 3 SE, max |z| {worst:.2}"))
}

fn rods(region: Region, lambda: f64) -> ModelParams {
    let s = SpaceParams::from_cuts(2.0, vec![0, 1]).unwrap();
    ModelParams::with_radius(s, region, lambda, 0.5).unwrap()
}

fn tonks_gas() -> Outcome {
    let opts = ChainOptions { steps: 1_000_000, burn_in: 100_000, ..Default::default() };
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, region) in [("torus", Region::Torus { side: 20.0 }), ("interval", Region::Ball { radius: 10.0 })] {
        for (k, lambda) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let params = rods(region, lambda);
            let exact = exact_grand_partition(&params).unwrap();
            let est = run_chain(&params, &opts, derive_seed(505, k as u64)).unwrap();
            let z = (est.alpha_hat - exact.density).abs() / est.alpha_se;
            let bound_ok = exact.ln_z <= lambda * 20.0;
            ok &= z <= 3.0 && bound_ok;
            lines.push(format!("{name} λ={lambda}: z={z:.2}"));
        }
    }
    outcome(ok, lines.join(", "))
}

fn model_grid() -> Vec<(usize, f64)> {
    let mut v = Vec::new();
    for n in 1..=3 {
        for p in [1.5, 2.0] {
            v.push((n, p));
        }
    }
    v
}

fn torus_model(n: usize, p: f64, lambda: f64) -> ModelParams {
    let space = SpaceParams::new(p, BlockSpec::singletons(n).unwrap()).unwrap();
    let side = 8.0 * space.r_unit();
    ModelParams::new(space, Region::Torus { side }, lambda).unwrap()
}

fn fv_identity() -> Outcome {
    let opts = ChainOptions { steps: 100_000, burn_in: 10_000, ..Default::default() };
    let mut worst = 1.0f64;
    let mut lines = Vec::new();
    for (i, (n, p)) in model_grid().into_iter().enumerate() {
        for (j, lambda) in [0.5, 2.0].into_iter().enumerate() {
            let params = torus_model(n, p, lambda);
            let reps = run_replicas(&params, &opts, derive_seed(606, (10 * i + j) as u64), 20).unwrap();
            let within = reps
                .iter()
                .filter(|e| e.identity_residual.abs() <= 3.0 * e.identity_se)
                .count();
            let frac = within as f64 / 20.0;
            worst = worst.min(frac);
            if frac < 0.95 {
                lines.push(format!("n={n} p={p} λ={lambda}: {within}/20"));
            }
        }
    }
    outcome(
        worst >= 0.95,
        format!("12 settings x 20 replicas, worst pass fraction {worst:.2} {}", lines.join(", ")),
    )
}

fn alpha_monotone() -> Outcome {
    let opts = ChainOptions { steps: 100_000, burn_in: 10_000, ..Default::default() };
    let grid = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0];
    let mut worst = f64::NEG_INFINITY;
    for (i, (n, p)) in model_grid().into_iter().enumerate() {
        let params = torus_model(n, p, 1.0);
        let curve = estimate_alpha_curve(&params, &grid, &opts, derive_seed(707, i as u64)).unwrap();
        worst = worst.max(monotonicity_excess(&curve));
    }
    outcome(worst <= 1.0, format!("6 settings, 6-point grid, worst drop/(3 SE) {worst:.3}"))
}

fn intersection_bound() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, n) in [2usize, 3, 4].into_iter().enumerate() {
        for (j, p) in [1.5, 2.0].into_iter().enumerate() {
            let space = SpaceParams::new(p, BlockSpec::singletons(n).unwrap()).unwrap();
            let chain = compute_constant_chain(p).unwrap();
            let rep = intersection_volume_check(&space, &chain, 200, 20_000, derive_seed(808, (10 * i + j) as u64))
                .unwrap();
            ok &= rep.all_passed;
            lines.push(format!("n={n} p={p}: max excess {:.3}", rep.max_excess));
        }
    }
    outcome(ok, lines.join(", "))
}

fn pipeline() -> Outcome {
    let space = SpaceParams::new(1.5, BlockSpec::singletons(2).unwrap()).unwrap();
    let big_r = 10.0 * space.r_unit();
    let eps = lattice_graph::eps_threshold(&space) * (1.0 - 1e-6);
    let (cert, report) = lattice_graph::pack(&space, big_r, eps, &PackOptions::default()).unwrap();
    let lattice = build_lattice(big_r, eps, &space).unwrap();
    let cover = cover_check(&lattice, 100_000, 909);
    let verified = verify_packing(&cert).unwrap();
    let degree_ok = (report.max_degree + 1) as f64 <= report.degree_bound;
    let ok = cover.misses == 0 && degree_ok && verified.valid && verified.density >= 0.25;
    outcome(
        ok,
        format!(
            "cover misses {}/{}, max degree {} (bound {:.0}), {} edges, verified {}, density {:.4}",
            cover.misses, cover.probes, report.max_degree, report.degree_bound, report.edges, verified.valid,
            verified.density
        ),
    )
}

fn entropy_oracle() -> Outcome {
    let params = rods(Region::Ball { radius: 5.0 }, 1.0);
    let est = entropy_estimate(&params, 3, 1_000_000, 1010).unwrap();
    let z3 = 8f64.powi(3) / 6.0;
    let exact = (z3 * 6.0 / 1000.0).ln() / 3.0;
    let f = est.value.unwrap_or(f64::NAN);
    let within = (f - exact).abs() <= 3.0 * est.se;
    let mono = entropy_monotonicity_check(&params, &[1, 2, 3], 1_000_000, 1011).unwrap();
    outcome(
        within && mono.passed,
        format!("f = {f:.5} ± {:.5}, exact {exact:.5}, monotone {}", est.se, mono.passed),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_superball"))
        .args(args)
        .env("SUPERBALL_OUT_DIR", dir)
        .output()
        .unwrap()
}

fn determinism() -> Outcome {
    let commands: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "simulate",
            vec![
                "simulate", "--p", "1.5", "--cuts", "0,1,2", "--size", "6", "--units", "r-unit", "--fugacity", "1",
                "--steps", "20000", "--burnin", "1000", "--replicas", "3", "--out", "trace.csv", "--summary",
                "summary.json",
            ],
            vec!["trace.csv", "summary.json"],
        ),
        (
            "pack",
            vec!["pack", "--p", "1.5", "--cuts", "0,1,2", "--R", "4", "--units", "r-unit", "--out", "cert.json"],
            vec!["cert.json"],
        ),
        (
            "volume",
            vec!["volume", "--p", "1.3", "--cuts", "0,2,3", "--mc-samples", "200000", "--seed", "9", "--out", "vol.json"],
            vec!["vol.json"],
        ),
        (
            "entropy",
            vec![
                "thermo", "entropy", "--p", "2", "--cuts", "0,1", "--region", "ball", "--size", "5", "--radius", "0.5",
                "--count", "3", "--samples", "100000", "--out", "entropy.json",
            ],
            vec!["entropy.json"],
        ),
        (
            "pressure",
            vec![
                "thermo", "pressure", "--p", "2", "--cuts", "0,1", "--size", "1.5", "--radius", "0.5", "--fugacity",
                "1.5", "--grid", "8", "--steps", "5000", "--burnin", "500", "--seed", "4", "--out", "pressure.json",
            ],
            vec!["pressure.json"],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args, files) in commands {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (oa, ob) = (run_cli(a.path(), &args), run_cli(b.path(), &args));
        if !oa.status.success() || !ob.status.success() {
            bad.push(format!("{name}: exit {:?} {}", oa.status.code(), String::from_utf8_lossy(&oa.stderr)));
            continue;
        }
        let same = oa.stdout == ob.stdout
            && files.iter().all(|f| {
                let x = std::fs::read(a.path().join(f));
                let y = std::fs::read(b.path().join(f));
                matches!((x, y), (Ok(x), Ok(y)) if x == y && !x.is_empty())
            });
        if !same {
            bad.push(format!("{name}: outputs differ"));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "5 commands byte-identical".into() } else { bad.join("; ") })
}

fn reporting() -> Outcome {
    let g = golden();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for row in g["density_bounds"].as_array().unwrap() {
        let b = density_lower_bound(row["n"].as_u64().unwrap() as u32, row["p"].as_f64().unwrap()).unwrap();
        for (k, got) in [("bound", b.bound), ("fugacity_threshold", b.fugacity_threshold), ("log_ratio", b.log_ratio)] {
            worst = worst.max(rel(got, row[k].as_f64().unwrap()));
        }
    }
    for row in g["pressure_formula"].as_array().unwrap() {
        let got = pressure_bound_formula(row["n"].as_u64().unwrap() as u32, row["fugacity"].as_f64().unwrap());
        worst = worst.max(rel(got, row["value"].as_f64().unwrap()));
    }
    outcome(worst <= 1e-12, format!("48 golden values, max relative deviation {worst:.2e}"))
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Clarkson inequalities", clarkson_suite),
        ("uniform convexity", uniform_convexity),
        ("constant chain", constant_chain),
        ("volume oracle", volume_oracle),
        ("hard-rod exactness", tonks_gas),
        ("free-volume identity", fv_identity),
        ("density monotone in fugacity", alpha_monotone),
        ("intersection-volume bound", intersection_bound),
        ("lattice packing pipeline", pipeline),
        ("entropy oracle", entropy_oracle),
        ("determinism", determinism),
        ("reported tables", reporting),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name} ({:.1} s): {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::ExitCode::FAILURE
    }
}

