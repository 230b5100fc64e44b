use num_traits::Zero;
use proptest::prelude::*;
use quadba::badness::{badness_margin, margin_curve};
use quadba::geometry::{sample_surface_point, Chart, Face, SurfacePoint};
use quadba::lattice::{enumerate_box, enumerate_window, equiv_key, Relation, Window};
use quadba::rational::{int, rat};
use quadba::{QuadraticForm, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_rat() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=6).prop_map(|(n, d)| rat(n, d))
}

/// Symmetric 3x3 integer matrices with nonzero determinant.
fn sym_matrix() -> impl Strategy<Value = Vec<Vec<Rational>>> {
    proptest::collection::vec(-4i64..=4, 6)
        .prop_map(|e| {
            let [a, b, c, d, f, g] = [e[0], e[1], e[2], e[3], e[4], e[5]];
            vec![vec![int(a), int(b), int(c)], vec![int(b), int(d), int(f)], vec![int(c), int(f), int(g)]]
        })
        .prop_filter("degenerate", |m| {
            let det = &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
                - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
                + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0]);
            !det.is_zero()
        })
}

fn diag_form() -> impl Strategy<Value = QuadraticForm> {
    prop_oneof![
        Just("1,1,-1"),
        Just("1,-1"),
        Just("2,-3,-1"),
        Just("1,1,-2"),
        Just("3,-1,-1"),
        Just("1/2,2,-1"),
        Just("1,1,-1,-1"),
    ]
    .prop_map(|s| QuadraticForm::parse(s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diagonalization_is_exact(m in sym_matrix(), v in proptest::collection::vec(small_rat(), 3)) {
        let Ok(q) = QuadraticForm::diagonalize(&m) else { return Ok(()); };
        // x = M v in the original coordinates
        let x = q.apply_transform(&v);
        let direct = q.signed_coeffs().iter().zip(&v).fold(Rational::zero(), |a, (c, t)| a + c * t * t);
        let sv = q.split_vector(&v);
        prop_assert_eq!(q.q1().eval(&sv.w) - q.q2().eval(&sv.u), direct.clone());
        prop_assert_eq!(q.evaluate_general(&x).unwrap(), q.evaluate(&v).unwrap());
        prop_assert_eq!(q.evaluate(&v).unwrap(), direct);
    }

    #[test]
    fn norm_axioms(q in diag_form(), a in proptest::collection::vec(-1e3f64..1e3, 4),
                   b in proptest::collection::vec(-1e3f64..1e3, 4), t in -50f64..50.0) {
        for p in [q.q1(), q.q2()] {
            let n = p.dim();
            let (a, b) = (&a[..n], &b[..n]);
            let na = p.norm(a);
            prop_assert!(na >= 0.0);
            prop_assert_eq!(na == 0.0, a.iter().all(|v| *v == 0.0));
            let ta: Vec<f64> = a.iter().map(|v| v * t).collect();
            prop_assert!((p.norm(&ta) - t.abs() * na).abs() <= 1e-12 * (1.0 + t.abs() * na));
            let s: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            prop_assert!(p.norm(&s) <= (na + p.norm(b)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn key_relation(q in diag_form(), m in -3i64..=3, n in 1i64..=6) {
        for p in enumerate_box(&q, &int(m), n).unwrap() {
            prop_assert_eq!(&p.q1_sq - &p.q2_sq, int(m));
            prop_assert_eq!(q.evaluate_int(&p.x).unwrap(), int(m));
        }
    }

    #[test]
    fn equivalence_keys_are_sound(q in diag_form(), m in -2i64..=2, hi in 1u8..=10) {
        let pts = enumerate_window(&q, &int(m), &Window::closed(0.0, f64::from(hi)).unwrap()).unwrap();
        for p in pts.iter().take(40) {
            for r in pts.iter().take(40) {
                // scaling one point keeps it in every class it was in
                prop_assert_eq!(equiv_key(&q, p, Relation::Sim) == equiv_key(&q, r, Relation::Sim),
                    sim(&p.x, &r.x));
                if equiv_key(&q, p, Relation::Sim) == equiv_key(&q, r, Relation::Sim) {
                    prop_assert_eq!(equiv_key(&q, p, Relation::Approx), equiv_key(&q, r, Relation::Approx));
                }
            }
        }
    }

    #[test]
    fn face_projection_round_trip(seed in any::<u64>(), q in diag_form()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_surface_point(&q, &mut rng);
        let f = Face::containing(&p.coords);
        let y = f.project(&p.coords).unwrap();
        let back = f.unproject(&y).unwrap();
        for (u, v) in back.iter().zip(&p.coords) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
        prop_assert_eq!(f.from_local(&f.to_local(&y)), y);
    }

    #[test]
    fn chart_round_trip(seed in any::<u64>(), q in diag_form()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_surface_point(&q, &mut rng);
        let chart = Chart::at(&q, &p).unwrap();
        let t = chart.forward(&p.coords).unwrap();
        prop_assert!(t.iter().all(|v| v.abs() <= 1e-9));
        let x = chart.inverse(&t).unwrap();
        let back = chart.forward(&x).unwrap();
        for (u, v) in back.iter().zip(&t) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
        prop_assert!(SurfacePoint::new(&q, x).is_ok());
    }
}

fn sim(x: &[i64], y: &[i64]) -> bool {
    (0..x.len()).all(|i| (0..x.len()).all(|j| x[i] as i128 * y[j] as i128 == x[j] as i128 * y[i] as i128))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn margin_vanishes_on_lattice_directions(i in 0usize..50) {
        let m = 0;
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let pts = enumerate_window(&q, &int(m), &Window::closed(1.0, 20.0).unwrap()).unwrap();
        let p = &pts[i % pts.len()];
        let v = p.normalize_f64().unwrap();
        let r = badness_margin(&q, &int(m), &v, 1.0, 1000).unwrap();
        prop_assert_eq!(r.margin, Some(0.0));
    }

    #[test]
    fn margin_curve_is_non_increasing(seed in any::<u64>(), m in 0i64..=1) {
        let q = QuadraticForm::parse("1,1,-1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = sample_surface_point(&q, &mut rng).coords;
        let c = margin_curve(&q, &int(m), &v, 1.0, &[10, 30, 100, 300, 1000]).unwrap();
        prop_assert!(c.curve_non_increasing());
        prop_assert!(c.margin_curve.iter().all(|p| p.margin.is_none_or(|g| g >= 0.0)));
    }
}
