use proptest::prelude::*;

use central_lyapunov::comparison::{i_integral, run_orbit, RunSettings};
use central_lyapunov::model::{make_cat_suspension, CatSuspension, PhasePoint};
use central_lyapunov::perturbation::{rotation, BumpProfiles, ChartField, PerturbationSpec, PerturbedField};
use central_lyapunov::poincare::{compose, poincare_map};

fn golden() -> CatSuspension {
    make_cat_suspension((5f64.sqrt() - 1.0) / 2.0).unwrap()
}

fn p0() -> PhasePoint {
    PhasePoint::new([0.2718, 0.5772, 0.1414], 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotations_form_a_group(a in -3.0..3.0f64, b in -3.0..3.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let two = rotation(a, rotation(b, [x, y]));
        let one = rotation(a + b, [x, y]);
        prop_assert!((two[0] - one[0]).abs() <= 1e-12 && (two[1] - one[1]).abs() <= 1e-12);
        let back = rotation(-a, rotation(a, [x, y]));
        prop_assert!((back[0] - x).abs() <= 1e-12 && (back[1] - y).abs() <= 1e-12);
    }

    #[test]
    fn transits_compose(s0 in 0.0..0.5f64, s1 in 0.0..0.5f64, w1 in -0.03..0.03f64, w2 in -0.03..0.03f64) {
        let f = ChartField { profiles: BumpProfiles::standard(), r: 0.05, xi: 0.3 };
        let u = nalgebra::Vector4::new(0.1, w1, w2, 0.01);
        let mid = f.transit(&u, s0);
        let two = f.transit(&mid, s1);
        let one = f.transit(&u, s0 + s1);
        prop_assert!((two - one).amax() <= 1e-12);
    }

    #[test]
    fn perturbed_cocycle_composes(s in 0.1..1.5f64, t in 0.1..1.5f64, w1 in -0.04..0.04f64, w2 in -0.04..0.04f64) {
        let sys = golden();
        let field = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.05, 0.3)).unwrap();
        let q = field.chart().section_point(&[w1, w2, 0.0]);
        let first = poincare_map(&field, &q, t).unwrap();
        let second = poincare_map(&field, &first.to.at, s).unwrap();
        let whole = poincare_map(&field, &q, s + t).unwrap();
        prop_assert!((&whole.matrix - &compose(&second, &first).matrix).amax() <= 1e-8);
    }

    #[test]
    fn i_integral_is_negative_and_decreasing(xi in 0.01..1.2f64) {
        let p = BumpProfiles::standard();
        let a = i_integral(&p, xi, 3).unwrap();
        let b = i_integral(&p, xi * 1.1, 3).unwrap();
        prop_assert!(a < 0.0 && b < a);
    }
}

#[test]
fn zero_angle_control_is_bitwise_unperturbed() {
    let sys = golden();
    let field = PerturbedField::new(&sys, PerturbationSpec::aligned(&sys, p0(), 0.1, 0.0)).unwrap();
    let s = RunSettings { steps: 30_000, burn_in: 100, keep_records: false };
    for id in 0..3 {
        let start = [0.1 * id as f64 + 0.05, 0.37, 0.81];
        let x = run_orbit(&sys, None, start, &s, id, 11).unwrap();
        let y = run_orbit(&sys, Some(&field), start, &s, id, 11).unwrap();
        assert!(y.box_entries > 0);
        for (a, b) in x.spectrum.raw.iter().zip(&y.spectrum.raw) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn i_integral_oracle() {
    let v = i_integral(&BumpProfiles::standard(), 0.3, 3).unwrap();
    assert!((v - (-0.016262528957637475)).abs() < 1e-12, "{v}");
}
