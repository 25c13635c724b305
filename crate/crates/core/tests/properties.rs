use proptest::prelude::*;

use descrambler_core::analysis::det_sign;
use descrambler_core::cayley::{cayley_map, AntisymParams};
use descrambler_core::replica::{apply_fir, design_fir, FilterKind};

fn params() -> impl Strategy<Value = AntisymParams> {
    (2usize..10).prop_flat_map(|n| {
        proptest::collection::vec(-5.0f64..5.0, n * (n - 1) / 2).prop_map(move |q| AntisymParams::new(n, q).unwrap())
    })
}

proptest! {
    #[test]
    fn cayley_images_are_rotations(q in params()) {
        let p = cayley_map(&q);
        prop_assert!(p.matrix().orthogonality_defect() <= 1e-12 * q.dim() as f64);
        prop_assert_eq!(det_sign(p.matrix()).unwrap(), 1);
    }

    #[test]
    fn cayley_round_trips_through_inverse(q in params()) {
        let p = cayley_map(&q);
        let prod = p.matrix() * p.inverse().matrix();
        let eye = descrambler_core::DenseMatrix::identity(q.dim());
        prop_assert!(prod.max_abs_diff(&eye).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_phase_filtering_is_linear(
        a in proptest::collection::vec(-1.0f64..1.0, 64),
        b in proptest::collection::vec(-1.0f64..1.0, 64),
        s in -3.0f64..3.0,
    ) {
        let f = design_fir(FilterKind::LowPass, 16, 0.1, 0.4).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let (fa, fb, fm) = (apply_fir(&f, &a).unwrap(), apply_fir(&f, &b).unwrap(), apply_fir(&f, &mix).unwrap());
        for i in 0..64 {
            prop_assert!((fm[i] - fa[i] - s * fb[i]).abs() <= 1e-12);
        }
    }
}
