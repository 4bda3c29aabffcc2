use proptest::prelude::*;

use varlex_core::diagnostics::closedness_scan;
use varlex_core::interleave::{
    cube_image, decompose_to_cubes, interleave_point, rect_norm, DyadicRect, GridExponentND,
};
use varlex_core::measure::{common_refinement, indicator, ExponentProfile, Partition1D, StepFn};
use varlex_core::norms::{luxemburg_norm, modular};
use varlex_core::rearrangement::{
    decreasing_rearrangement, distribution_function, equimeasurable, pull_back, sorting_transport,
};

const TOL: f64 = 1e-12;

/// Interior breakpoints as multiples of `2^-12`, so every operation on them is exact.
fn dyadic_breaks(max_cells: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..4096, 0..max_cells).prop_map(|set| {
        let mut b = vec![0.0];
        b.extend(set.into_iter().map(|k| k as f64 / 4096.0));
        b.push(1.0);
        b
    })
}

fn step_fn(values: impl Strategy<Value = f64> + Clone + 'static) -> impl Strategy<Value = StepFn> {
    dyadic_breaks(64).prop_flat_map(move |b| {
        let n = b.len() - 1;
        prop::collection::vec(values.clone(), n).prop_map(move |v| StepFn::new(b.clone(), v).unwrap())
    })
}

fn small_values() -> impl Strategy<Value = f64> + Clone {
    prop_oneof![Just(0.0), 0.0f64..8.0, (-6i32..6).prop_map(|k| (k as f64).exp2())]
}

fn exponents() -> impl Strategy<Value = ExponentProfile> {
    step_fn(1.0f64..6.0).prop_map(|f| ExponentProfile::new(f).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn refinement_preserves_integral_and_values(f in step_fn(small_values()), extra in dyadic_breaks(32), t in 0.0f64..1.0) {
        let finer = f.partition().union(&Partition1D::new(extra).unwrap());
        let g = f.refine_to(&finer).unwrap();
        prop_assert!((g.integrate() - f.integrate()).abs() <= TOL * (1.0 + f.integrate().abs()));
        prop_assert_eq!(g.evaluate(t).unwrap(), f.evaluate(t).unwrap());
    }

    #[test]
    fn common_refinement_agrees_pointwise(f in step_fn(small_values()), g in step_fn(small_values()), t in 0.0f64..1.0) {
        let (fr, gr) = common_refinement(&f, &g);
        prop_assert_eq!(fr.breakpoints(), gr.breakpoints());
        prop_assert_eq!(fr.evaluate(t).unwrap(), f.evaluate(t).unwrap());
        prop_assert_eq!(gr.evaluate(t).unwrap(), g.evaluate(t).unwrap());
    }

    #[test]
    fn rearrangement_is_sorted_equimeasurable_idempotent(f in step_fn(small_values())) {
        let fs = decreasing_rearrangement(&f);
        prop_assert!(fs.is_non_increasing());
        prop_assert!(equimeasurable(&f, &fs, 0.0));
        prop_assert_eq!(decreasing_rearrangement(&fs), fs.clone());
        prop_assert_eq!(fs.integrate(), decreasing_rearrangement(&fs).integrate());
        for lambda in [0.0, 0.5, 1.0, 3.0] {
            prop_assert_eq!(distribution_function(&f, lambda), distribution_function(&fs, lambda));
        }
    }

    #[test]
    fn sorting_transport_reproduces_f(f in step_fn(small_values()), t in 0.0f64..1.0) {
        let fs = decreasing_rearrangement(&f);
        let omega = sorting_transport(&f);
        let back = pull_back(&fs, &omega).unwrap();
        prop_assert_eq!(back.evaluate(t).unwrap(), f.evaluate(t).unwrap());
        prop_assert_eq!(fs.evaluate(omega.apply(t).unwrap()).unwrap(), f.evaluate(t).unwrap());
    }

    #[test]
    fn norm_is_monotone(f in step_fn(small_values()), bump in step_fn(0.0f64..2.0), p in exponents()) {
        let (fr, br) = common_refinement(&f, &bump);
        let g = StepFn::new(fr.breakpoints().to_vec(), fr.values().iter().zip(br.values()).map(|(a, b)| a + b).collect()).unwrap();
        let nf = luxemburg_norm(&f, &p, 1e-10).unwrap().value;
        let ng = luxemburg_norm(&g, &p, 1e-10).unwrap().value;
        prop_assert!(nf <= ng + 1e-10, "{nf} > {ng}");
    }

    #[test]
    fn norm_is_homogeneous(f in step_fn(small_values()), c in 0.01f64..100.0, p in exponents()) {
        let tol = 1e-10;
        let nf = luxemburg_norm(&f, &p, tol).unwrap().value;
        let ncf = luxemburg_norm(&f.scale(c).unwrap(), &p, tol).unwrap().value;
        prop_assert!((ncf - c * nf).abs() <= (1.0 + c) * tol * (1.0 + nf), "{ncf} vs {}", c * nf);
    }

    #[test]
    fn unit_modular_at_norm(f in step_fn(small_values()), p in exponents()) {
        prop_assume!(!f.is_zero());
        let r = luxemburg_norm(&f, &p, 1e-13).unwrap();
        let m = modular(&f, &p, r.value).unwrap();
        prop_assert!((m - 1.0).abs() <= 1e-9, "modular {m}");
        prop_assert!(m <= 1.0 + 1e-12);
    }

    #[test]
    fn constant_exponent_matches_lp(f in step_fn(small_values()), p0 in 1.0f64..5.0) {
        prop_assume!(!f.is_zero());
        let p = ExponentProfile::constant(p0).unwrap();
        let direct = f.cells().map(|c| c.value.abs().powf(p0) * c.len()).sum::<f64>().powf(1.0 / p0);
        let n = luxemburg_norm(&f, &p, 1e-13).unwrap().value;
        prop_assert!((n - direct).abs() <= 1e-9 * (1.0 + direct), "{n} vs {direct}");
    }

    #[test]
    fn indicator_norm_closed_form(k in 0u32..4096, len in 1u32..4096, p0 in 1.0f64..8.0) {
        let a = k as f64 / 4096.0;
        let b = (a + len as f64 / 4096.0).min(1.0);
        prop_assume!(b > a);
        let f = indicator(a, b).unwrap();
        let n = luxemburg_norm(&f, &ExponentProfile::constant(p0).unwrap(), 1e-12).unwrap().value;
        prop_assert!((n - (b - a).powf(1.0 / p0)).abs() <= 1e-9);
    }

    #[test]
    fn cube_images_tile(m in 0u32..5, dim in 1usize..4) {
        let count = 1u64 << (dim as u32 * m);
        let mut starts: Vec<(f64, f64)> = Vec::new();
        let side = 1u64 << m;
        for flat in 0..count {
            let mut idx = Vec::with_capacity(dim);
            let mut r = flat;
            for _ in 0..dim {
                idx.push(r % side);
                r /= side;
            }
            let iv = cube_image(&DyadicRect::cube(dim, m, idx).unwrap()).unwrap();
            starts.push((iv.start(), iv.end()));
        }
        starts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut at = 0.0;
        for (s, e) in starts {
            prop_assert_eq!(s, at);
            at = e;
        }
        prop_assert_eq!(at, 1.0);
    }

    #[test]
    fn interleave_membership(x in prop::collection::vec(0.0f64..1.0, 2), m in 0u32..20) {
        let idx: Vec<u64> = x.iter().map(|&xi| (xi * (m as f64).exp2()).floor() as u64).collect();
        let q = DyadicRect::cube(2, m, idx).unwrap();
        prop_assert!(q.contains(&x));
        let z = interleave_point(&x, 26).unwrap();
        prop_assert!(cube_image(&q).unwrap().contains(z));
    }

    #[test]
    fn rectangle_decomposition_tiles(l0 in 0u32..4, l1 in 0u32..4, i0 in 0u64..16, i1 in 0u64..16) {
        let r = DyadicRect::new(vec![l0, l1], vec![i0 % (1 << l0), i1 % (1 << l1)]).unwrap();
        let cubes = decompose_to_cubes(&r);
        let total: f64 = cubes.iter().map(|c| c.measure()).sum();
        prop_assert_eq!(total, r.measure());
        prop_assert!(cubes.iter().all(|c| c.is_within(&r)));
    }

    #[test]
    fn scan_minimum_decreases_with_level(p in exponents()) {
        let pbar = GridExponentND::new(2, p, None).unwrap();
        let r = closedness_scan(&pbar, 4, 1e-12).unwrap();
        for w in r.min_norms.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn one_dimensional_rect_norm_is_interval_norm(p in exponents(), level in 0u32..12, k in 0u64..4096) {
        let k = k % (1 << level);
        let pbar = GridExponentND::new(1, p.clone(), None).unwrap();
        let r = DyadicRect::cube(1, level, vec![k]).unwrap();
        let a = rect_norm(&pbar, &r, 1e-12).unwrap().value;
        let s = (-(level as f64)).exp2();
        let f = indicator(k as f64 * s, (k + 1) as f64 * s).unwrap();
        let b = luxemburg_norm(&f, &p, 1e-12).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }

    #[test]
    fn step_fn_json_round_trip(f in step_fn(0.0f64..1.0), shift in 0.0f64..1e-3) {
        // non-dyadic breakpoints as well
        let b: Vec<f64> = f.breakpoints().iter().enumerate().map(|(i, &x)| if i == 0 || i + 1 == f.breakpoints().len() { x } else { x + shift * x * (1.0 - x) }).collect();
        prop_assume!(b.windows(2).all(|w| w[0] < w[1]));
        let g = StepFn::new(b, f.values().to_vec()).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: StepFn = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, g);
    }
}
