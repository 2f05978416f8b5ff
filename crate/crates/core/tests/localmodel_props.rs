use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torclass_core::localmodel::{
    even_substitution, orbit_map, regular_section, standard_section, OrbitDiffeo, OrbitPoint, Poly, TorusFrame,
};

fn orbit_point(n: usize, m: usize) -> impl Strategy<Value = OrbitPoint> {
    let x = proptest::collection::vec(prop_oneof![Just(0.0), 0.0..3.0f64], n);
    let y = proptest::collection::vec(-2.0..2.0f64, m);
    (x, y).prop_map(|(x, y)| OrbitPoint::new(x, y).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (0usize..=3, 0usize..=2, 0usize..=2).prop_map(|(n, extra, m)| (n, (n + extra).max(1), m))
}

proptest! {
    #[test]
    fn sections_project_back((n, k, m) in dims(), seed in any::<u64>(), raw in orbit_point(3, 2)) {
        let q = OrbitPoint::new(raw.x[..n].to_vec(), raw.y[..m].to_vec()).unwrap();
        let s = standard_section(&q, k - n).unwrap();
        prop_assert!(orbit_map(&s).distance(&q) <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles = (0..k).map(|_| Poly::random(&mut rng, n, m, None, None, 1.0)).collect();
        let frame = TorusFrame::from_angles(angles, n, m);
        let r = regular_section(&frame, &q, k - n).unwrap();
        prop_assert!(orbit_map(&r).distance(&q) <= 1e-12);
        // boundary coordinates stay exactly on the boundary
        for i in 0..n {
            prop_assert_eq!(r.z[i].norm_sqr() == 0.0, q.x[i] == 0.0);
        }
    }

    #[test]
    fn even_substitution_is_even(u in proptest::collection::vec(-2.0..2.0f64, 3), flips in proptest::collection::vec(any::<bool>(), 3), y in -1.0..1.0f64) {
        let f = even_substitution(|x: &[f64], y: &[f64]| x[0].sin() + x[1] * y[0] + x[2].exp() * x[0]);
        let flipped: Vec<f64> = u.iter().zip(&flips).map(|(v, &s)| if s { -v } else { *v }).collect();
        prop_assert_eq!(f(&u, &[y]), f(&flipped, &[y]));
    }

    #[test]
    fn orbit_diffeos_invert((n, _, m) in dims(), seed in any::<u64>(), raw in orbit_point(3, 2)) {
        let q = OrbitPoint::new(raw.x[..n].to_vec(), raw.y[..m].to_vec()).unwrap();
        let phi = OrbitDiffeo::random(&mut ChaCha8Rng::seed_from_u64(seed), n, m);
        let image = phi.apply(&q).unwrap();
        for i in 0..n {
            prop_assert_eq!(image.x[i] == 0.0, q.x[i] == 0.0);
        }
        prop_assert!(phi.inverse().apply(&image).unwrap().distance(&q) <= 1e-10);
    }
}
