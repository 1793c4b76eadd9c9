use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use fpk::fields::{
    adjoint_subeigen, check_h1, check_h2, check_h3, grad_weight, h3_positive_radius, lambda0,
    laplace_weight, weight, FieldKind, ForceField, SampleSet, Verdict, WeightContext,
};

fn fields_2d(gamma: f64, theta: f64) -> Vec<ForceField> {
    vec![
        ForceField::linear(2, 0.7),
        ForceField::gradient_power(2, gamma).unwrap(),
        ForceField::gradient_power_plus_rotation(2, gamma, theta).unwrap(),
        ForceField::new(
            FieldKind::CustomPolynomial {
                components: vec![
                    vec![(1.0, 1, 0), (0.3, 0, 1)],
                    vec![(-0.3, 1, 0), (1.0, 0, 3)],
                ],
            },
            2,
        )
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_matches_central_differences(
        x in -6.0f64..6.0, y in -6.0f64..6.0, gamma in 1.05f64..2.0, theta in -3.0f64..3.0,
    ) {
        let h = 1e-5;
        for f in fields_2d(gamma, theta) {
            let fd = (f.eval(&[x + h, y])[0] - f.eval(&[x - h, y])[0] + f.eval(&[x, y + h])[1] - f.eval(&[x, y - h])[1])
                / (2.0 * h);
            let exact = f.divergence(&[x, y]);
            prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{}: fd {fd} exact {exact}", f.label());
        }
    }

    #[test]
    fn weight_derivatives_match_differences(x in -5.0f64..5.0, y in -5.0f64..5.0, k in 0.0f64..6.0) {
        let h = 1e-4;
        let w = |a: f64, b: f64| weight(&[a, b], k);
        let g = grad_weight(&[x, y], k);
        let gx = (w(x + h, y) - w(x - h, y)) / (2.0 * h);
        let gy = (w(x, y + h) - w(x, y - h)) / (2.0 * h);
        let scale = 1.0 + w(x, y);
        prop_assert!((g[0] - gx).abs() <= 1e-6 * scale && (g[1] - gy).abs() <= 1e-6 * scale);
        let lap = (w(x + h, y) + w(x - h, y) + w(x, y + h) + w(x, y - h) - 4.0 * w(x, y)) / (h * h);
        prop_assert!((laplace_weight(&[x, y], k) - lap).abs() <= 1e-4 * scale);
    }

    #[test]
    fn rotation_does_not_change_radial_component(x in -8.0f64..8.0, y in -8.0f64..8.0, theta in -5.0f64..5.0) {
        let plain = ForceField::gradient_power(2, 1.5).unwrap();
        let rotated = ForceField::gradient_power_plus_rotation(2, 1.5, theta).unwrap();
        let (a, b) = (plain.radial_component(&[x, y]), rotated.radial_component(&[x, y]));
        prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a.abs()));
    }
}

#[test]
fn ou_constants_in_two_dimensions() {
    let f = ForceField::linear(2, 1.0);
    let ctx = WeightContext::new(2.0, 2, 2.0).unwrap();
    let s = SampleSet::standard(2);
    let h2 = check_h2(&f, &ctx, &s).unwrap();
    // -(p - 1) div E + k x.E / <x>^2 = -2 + 2 r^2 / (1 + r^2), smallest at 0.
    assert_abs_diff_eq!(h2.beta0, -2.0, epsilon = 1e-12);
    let l = lambda0(h2.beta0, &ctx, &s);
    assert!(l.lambda0 >= 2.0 && l.lambda0.is_finite());
    let h1 = check_h1(&f, 2.0, 2.0, &s).unwrap();
    assert_eq!(h1.verdict, Verdict::Pass);
}

#[test]
fn h3_radius_choice_is_monotone() {
    let f = ForceField::gradient_power(2, 1.5).unwrap();
    let ctx = WeightContext::new(2.0, 2, 2.0).unwrap();
    let s = SampleSet::standard(2);
    let r = h3_positive_radius(&f, &ctx, &s).unwrap().unwrap();
    assert_eq!(check_h3(&f, &ctx, r, &s).unwrap().verdict, Verdict::Pass);
    assert_eq!(
        check_h3(&f, &ctx, r + 5.0, &s).unwrap().verdict,
        Verdict::Pass
    );
    assert!(
        check_h3(&f, &ctx, r + 5.0, &s).unwrap().omega_star
            >= check_h3(&f, &ctx, r, &s).unwrap().omega_star
    );
}

#[test]
fn adjoint_bound_is_stable_under_denser_sampling() {
    for f in fields_2d(1.5, 1.0) {
        let s = SampleSet::standard(2);
        let a = adjoint_subeigen(&f, 4.0, &s).unwrap();
        let b = adjoint_subeigen(&f, 4.0, &s.doubled()).unwrap();
        assert!(a.b.is_finite());
        assert!(
            (a.b - b.b).abs() <= 1e-6 * (1.0 + a.b.abs()),
            "{}: {} vs {}",
            f.label(),
            a.b,
            b.b
        );
    }
}

#[test]
fn field_spec_round_trips_through_json() {
    for f in fields_2d(1.3, 0.5) {
        let text = serde_json::to_string(&f).unwrap();
        let back: ForceField = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
}

#[test]
fn invalid_fields_are_rejected() {
    assert!(ForceField::gradient_power(1, 2.5).is_err());
    assert!(ForceField::gradient_power(3, 1.5).is_err());
    assert!(WeightContext::new(-1.0, 1, 2.0).is_err());
    assert!(WeightContext::new(2.0, 1, 1.5).is_err());
}
