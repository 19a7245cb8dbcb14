use proptest::prelude::*;

use superball::constants::{convexity_modulus, lambert_w, lambert_w_of_ln};
use superball::geometry::{self, minimum_image, BallSampler, BlockSpec, Region, SpaceParams};
use superball::lattice_graph::{greedy_independent_set, is_independent, GeoGraph, OrderRule};
use superball::seed::rng_from_seed;

/// Cuts of a random partition of `n` coordinates into consecutive blocks.
fn cuts_for(n: usize, splits: &[bool]) -> Vec<usize> {
    let mut cuts = vec![0];
    for (i, &s) in splits.iter().take(n - 1).enumerate() {
        if s {
            cuts.push(i + 1);
        }
    }
    cuts.push(n);
    cuts
}

fn space_strategy() -> impl Strategy<Value = SpaceParams> {
    (1.0f64..6.0, 1usize..=6, prop::collection::vec(any::<bool>(), 5))
        .prop_map(|(p, n, splits)| SpaceParams::new(p, BlockSpec::new(cuts_for(n, &splits)).unwrap()).unwrap())
}

fn with_points(k: usize) -> impl Strategy<Value = (SpaceParams, Vec<Vec<f64>>)> {
    space_strategy().prop_flat_map(move |s| {
        let n = s.dim();
        (Just(s), prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), k))
    })
}

fn rel_le(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn norm_is_a_norm((s, pts) in with_points(2), c in -5.0f64..5.0) {
        let (x, y) = (&pts[0], &pts[1]);
        let nx = s.norm(x).unwrap();
        let ny = s.norm(y).unwrap();
        prop_assert!(nx >= 0.0);
        let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        prop_assert!(rel_le(s.norm(&sum).unwrap(), nx + ny));
        let scaled: Vec<f64> = x.iter().map(|a| c * a).collect();
        let ns = s.norm(&scaled).unwrap();
        prop_assert!((ns - c.abs() * nx).abs() <= 1e-12 * (1.0 + ns));
        prop_assert_eq!(s.norm(&vec![0.0; s.dim()]).unwrap(), 0.0);
    }

    #[test]
    fn coordinates_bounded_and_monotone((s, pts) in with_points(1), i in 0usize..6, grow in 1.0f64..3.0) {
        let x = &pts[0];
        let i = i % s.dim();
        let nx = s.norm(x).unwrap();
        prop_assert!(rel_le(x[i].abs(), nx));
        let mut y = x.clone();
        y[i] *= grow;
        prop_assert!(rel_le(nx, s.norm(&y).unwrap()));
    }

    #[test]
    fn single_block_is_euclidean(p in 1.0f64..6.0, x in prop::collection::vec(-10.0f64..10.0, 1..6)) {
        let s = SpaceParams::new(p, BlockSpec::euclidean(x.len()).unwrap()).unwrap();
        let l2 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assert!((s.norm(&x).unwrap() - l2).abs() <= 1e-12 * (1.0 + l2));
    }

    #[test]
    fn singletons_give_lp(p in 1.0f64..6.0, x in prop::collection::vec(-10.0f64..10.0, 1..6)) {
        let s = SpaceParams::new(p, BlockSpec::singletons(x.len()).unwrap()).unwrap();
        let lp = x.iter().map(|a| a.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        prop_assert!((s.norm(&x).unwrap() - lp).abs() <= 1e-12 * (1.0 + lp));
    }

    #[test]
    fn torus_distance_is_a_metric((s, pts) in with_points(3), side in 1.0f64..30.0, shift in -3i32..3) {
        let region = Region::Torus { side };
        let d = |a: &[f64], b: &[f64]| geometry::distance(a, b, &s, &region).unwrap();
        let (x, y, z) = (&pts[0], &pts[1], &pts[2]);
        prop_assert!((d(x, y) - d(y, x)).abs() <= 1e-12);
        prop_assert!(rel_le(d(x, z), d(x, y) + d(y, z)));
        let flat = geometry::distance(x, y, &s, &Region::Ball { radius: 100.0 }).unwrap();
        prop_assert!(rel_le(d(x, y), flat));
        let moved: Vec<f64> = x.iter().map(|a| a + shift as f64 * side).collect();
        prop_assert!((d(&moved, y) - d(x, y)).abs() <= 1e-9);
        prop_assert!(d(x, x) == 0.0);
    }

    #[test]
    fn minimum_image_range(v in -100.0f64..100.0, side in 0.5f64..20.0) {
        let m = minimum_image(v, side);
        prop_assert!(m >= 0.0 && m <= side / 2.0 + 1e-12);
    }

    #[test]
    fn volume_scales_with_radius(s in space_strategy(), r in 0.1f64..5.0) {
        let n = s.dim() as i32;
        let v = s.ball_volume(r);
        prop_assert!((v - r.powi(n) * s.unit_ball_volume()).abs() <= 1e-12 * v);
        prop_assert!((s.ball_volume(s.r_unit()) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampled_points_lie_in_ball(s in space_strategy(), r in 0.1f64..5.0, seed in any::<u64>()) {
        let sampler = BallSampler::new(&s);
        let mut rng = rng_from_seed(seed);
        let center = vec![1.0; s.dim()];
        let mut out = vec![0.0; s.dim()];
        for _ in 0..50 {
            sampler.sample_into(&mut rng, &center, r, &mut out);
            let d = geometry::distance(&center, &out, &s, &Region::Ball { radius: 100.0 }).unwrap();
            prop_assert!(d <= r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn convexity_modulus_is_monotone(p in 1.01f64..6.0, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let dl = convexity_modulus(lo, p).unwrap();
        let dh = convexity_modulus(hi, p).unwrap();
        prop_assert!((0.0..=1.0).contains(&dl) && (0.0..=1.0).contains(&dh));
        prop_assert!(dl <= dh + 1e-15);
    }

    #[test]
    fn lambert_w_inverts(x in 0.0f64..1e6) {
        let w = lambert_w(x).unwrap();
        prop_assert!((w * w.exp() - x).abs() <= 1e-12 * (1.0 + x));
        if x > 0.0 {
            let wl = lambert_w_of_ln(x.ln());
            prop_assert!((wl - w).abs() <= 1e-12 * (1.0 + w));
        }
    }

    #[test]
    fn greedy_set_is_maximal_independent(
        n in 1usize..60,
        edges in prop::collection::vec((0u32..60, 0u32..60), 0..200),
        lex in any::<bool>(),
    ) {
        let edges: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|&(a, b)| (a as usize) < n && (b as usize) < n && a != b)
            .collect();
        let g = GeoGraph::from_edges(n, &edges).unwrap();
        let rule = if lex { OrderRule::Lex } else { OrderRule::Mindeg };
        let set = greedy_independent_set(&g, rule).unwrap();
        prop_assert!(is_independent(&g, &set));
        prop_assert!(set.len() as f64 >= n as f64 / (g.max_degree() + 1) as f64);
        let mut chosen = vec![false; n];
        for &v in &set {
            chosen[v] = true;
        }
        for v in 0..n {
            prop_assert!(chosen[v] || g.neighbors(v).iter().any(|&u| chosen[u as usize]));
        }
    }
}
