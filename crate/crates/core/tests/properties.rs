//! Randomized invariants.

use gbd_slice::anchor::{hat_weight_sum, kernel_discretize, truncate, Kernel};
use gbd_slice::generators::{build_field, exact_lambda, FieldKind, GeneratorSpec};
use gbd_slice::interpolation::{
    cube_energy, default_order, fd_rhs, interpolate, korn_constant, project_compatible,
    rigidity_defect, vertex, CubeVertexData, KornMethod, KornOptions,
};
use gbd_slice::reduce::{par_map_range, tree_sum};
use gbd_slice::slicing::{lambda_xi, Quadrature, SlicePath};
use gbd_slice::{BoxDomain, Displacement, VectorField};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, 3)
}

fn cube_data(d: usize) -> impl Strategy<Value = CubeVertexData> {
    prop::collection::vec(-1.0..1.0f64, d << d).prop_map(move |v| CubeVertexData::from_flat(d, &v))
}

fn jump_spec(normal: [f64; 2], offset: f64, jump: [f64; 2]) -> GeneratorSpec {
    GeneratorSpec {
        name: "jump".into(),
        dim: 2,
        lower: vec![0.0, 0.0],
        upper: vec![1.0, 1.0],
        field: FieldKind::ScalarJump {
            normal: normal.to_vec(),
            offset,
            jump: jump.to_vec(),
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn truncation_is_a_contraction(a in vec3(), b in vec3(), k in 0.1..10.0f64) {
        let (ta, tb) = (truncate(&a, k), truncate(&b, k));
        prop_assert!(norm(&ta) <= k * (1.0 + 1e-15));
        let d: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| x - y).collect();
        let e: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(norm(&d) <= norm(&e) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn truncations_compose(a in vec3(), k in 0.1..5.0f64, extra in 0.0..5.0f64) {
        let lhs = truncate(&truncate(&a, k + extra), k);
        let rhs = truncate(&a, k);
        for (x, y) in lhs.iter().zip(&rhs) {
            prop_assert!((x - y).abs() <= 1e-13);
        }
    }

    #[test]
    fn hat_weights_sum_to_one(
        y in prop::collection::vec(0.0..1.0f64, 2),
        x in prop::collection::vec(-2.0..2.0f64, 2),
        eps in 0.01..0.5f64,
    ) {
        prop_assert!((hat_weight_sum(eps, &y, &x) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn interpolation_hits_vertices(data in cube_data(3)) {
        for w in 0..8 {
            let v = interpolate(&data, &vertex(3, w)).unwrap();
            prop_assert_eq!(v.as_slice(), data.value(w));
        }
    }

    #[test]
    fn projection_yields_rigid_data(data in cube_data(2)) {
        let p = project_compatible(&data);
        prop_assert!(rigidity_defect(&p) < 1e-12);
        prop_assert!(fd_rhs(&p, 2.0, None) < 1e-20);
        prop_assert!(cube_energy(&p, 2.0, default_order(2, 2.0)) < 1e-20);
    }

    #[test]
    fn discrete_korn_inequality(data in cube_data(2)) {
        let c = korn_constant(2, 2.0, KornMethod::Eig, &KornOptions::default()).unwrap().constant;
        let lhs = cube_energy(&data, 2.0, default_order(2, 2.0));
        prop_assert!(lhs <= c * fd_rhs(&data, 2.0, None) * (1.0 + 1e-9) + 1e-24);
    }

    #[test]
    fn hat_reproduces_affine_fields(
        g in prop::collection::vec(-2.0..2.0f64, 4),
        y in prop::collection::vec(0.0..0.999f64, 2),
        x in prop::collection::vec(0.3..0.7f64, 2),
    ) {
        let u = VectorField::from_fn(BoxDomain::unit(2), move |p, o| {
            o[0] = g[0] * p[0] + g[1] * p[1] + 0.1;
            o[1] = g[2] * p[0] + g[3] * p[1] - 0.2;
        });
        let k = kernel_discretize(&u, 0.1, &y, Kernel::Hat).unwrap();
        let (a, b) = (k.eval(&x), u.eval(&x));
        prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn small_jumps_scale_linearly(
        theta in 0.0..std::f64::consts::FRAC_PI_4,
        offset in 0.3..0.7f64,
        jump in prop::collection::vec(-0.35..0.35f64, 2),
    ) {
        // |ξ·jump| ≤ β/2 for every ξ ∈ V, so the truncation never bites
        let n = [theta.cos(), theta.sin()];
        let once = jump_spec(n, offset, [jump[0], jump[1]]);
        let twice = jump_spec(n, offset, [2.0 * jump[0], 2.0 * jump[1]]);
        for xi in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let a = exact_lambda(&once, &xi, 2.0, 1.0).unwrap().lambda;
            let b = exact_lambda(&twice, &xi, 2.0, 1.0).unwrap().lambda;
            prop_assert!((b - 2.0 * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn tree_sum_is_thread_independent(v in prop::collection::vec(-1e6..1e6f64, 0..300)) {
        let serial = tree_sum(&v);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let parallel = pool.install(|| tree_sum(&par_map_range(v.len(), |i| v[i])));
        prop_assert_eq!(serial.to_bits(), parallel.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_path_matches_oracle_on_random_cracks(
        theta in 0.0..std::f64::consts::FRAC_PI_4,
        offset in 0.35..0.65f64,
        jump in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let spec = jump_spec([theta.cos(), theta.sin()], offset, [jump[0], jump[1]]);
        let u = build_field(&spec).unwrap();
        let quad = Quadrature { h: 1e-3, delta: 2e-3, tau: None, path: SlicePath::Exact };
        for xi in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let exact = exact_lambda(&spec, &xi, 1.0, 1.0).unwrap().lambda;
            let got = lambda_xi(&u, &xi, &quad, 1.0, 1.0).unwrap().lambda;
            prop_assert!((got - exact).abs() <= 0.02 * exact + 1e-9, "{xi:?}: {got} vs {exact}");
        }
    }
}
