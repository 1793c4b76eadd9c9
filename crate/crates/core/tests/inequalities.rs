use proptest::prelude::*;

use fpk::fields::{
    ForceField, HypothesisOptions, HypothesisReport, SampleSet, Verdict, WeightContext,
};
use fpk::grid::{assemble_operator, Grid};
use fpk::inequalities::{nash_check, nash_ratio, negpart_coercivity_check};
use fpk::probes;
use fpk::FpkError;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn positive_and_negative_parts_split_exactly(seed in any::<u64>()) {
        let g = Grid::new(2, 4.0, 21).unwrap();
        let f = probes::random_sign_changing(&g, &mut probes::trial_rng(seed, 1));
        let (p, m) = (f.positive_part(), f.negative_part());
        for ((a, b), v) in p.values().iter().zip(m.values()).zip(f.values()) {
            prop_assert_eq!(a - b, *v);
            prop_assert_eq!(a * b, 0.0);
        }
    }

    #[test]
    fn nash_ratio_is_homogeneous(c in 1e-6f64..1e6, width in 0.2f64..2.0, center in -4.0f64..4.0) {
        let g = Grid::new(1, 8.0, 201).unwrap();
        let f = probes::Bump { center: [center, 0.0], width, amplitude: 1.0 }.sample(&g);
        let r = nash_ratio(&f, 2.0).unwrap();
        let rc = nash_ratio(&f.scaled(c), 2.0).unwrap();
        prop_assert!((r - rc).abs() <= 1e-12 * r);
    }
}

#[test]
fn standard_gaussian_ratio_is_resolved() {
    let ratio = |n| {
        nash_ratio(
            &Grid::new(1, 8.0, n)
                .unwrap()
                .sample(|x| (-x[0] * x[0] / 2.0).exp()),
            2.0,
        )
        .unwrap()
    };
    let (a, b) = (ratio(401), ratio(801));
    assert!((a - b).abs() <= 5e-4 * b, "{a} vs {b}");
}

#[test]
fn nash_in_two_dimensions() {
    let g = Grid::new(2, 6.0, 41).unwrap();
    let r = nash_check(
        &g,
        &WeightContext::new(1.0, 2, 2.0).unwrap(),
        32,
        (0.2, 2.0),
    )
    .unwrap();
    assert!(r.sup_ratio.is_finite() && r.sup_ratio > 0.0);
    assert!(r.entries.iter().all(|e| e.ratio > 0.0));
    let k0 = WeightContext::new(0.0, 2, 2.0).unwrap();
    assert!(matches!(
        nash_check(&g, &k0, 32, (0.2, 2.0)),
        Err(FpkError::Config(_))
    ));
}

#[test]
fn nash_csv_lists_the_family() {
    let g = Grid::new(1, 8.0, 101).unwrap();
    let r = nash_check(
        &g,
        &WeightContext::new(2.0, 1, 2.0).unwrap(),
        16,
        (0.2, 2.0),
    )
    .unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("center_x,center_y,width,ratio"));
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn negpart_check_is_gated_on_h3() {
    let g = Grid::new(1, 8.0, 201).unwrap();
    let ctx = WeightContext::new(2.0, 1, 2.0).unwrap();
    let opts = HypothesisOptions {
        radius: Some(3.0),
        ..Default::default()
    };
    let zero = ForceField::zero(1);
    let h = HypothesisReport::compute(&zero, &ctx, &SampleSet::standard(1), &opts).unwrap();
    assert_eq!(h.h3.verdict, Verdict::Fail);
    let op = assemble_operator(&g, &zero).unwrap();
    assert_eq!(
        negpart_coercivity_check(&op, &ctx, None, 10, 0).verdict,
        Verdict::Skipped
    );

    let ou = ForceField::linear(1, 1.0);
    let op = assemble_operator(&g, &ou).unwrap();
    let r = negpart_coercivity_check(&op, &ctx, Some(0.6), 20, 0);
    assert!(r.min_residual.unwrap().is_finite());
    assert_ne!(r.verdict, Verdict::Skipped);
}
