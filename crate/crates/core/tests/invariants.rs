use levy_field::sampler::sample_replicate;
use levy_field::verify::{increment_samples, stationary_increment_test};
use levy_field::{
    box_increment, integrate, sheet_from_field, AxisBox, Decision, FieldRealization, JumpLaw, Preset, Region,
    SamplerConfig, TestFunction,
};
use proptest::prelude::*;

fn compound_poisson(dim: usize) -> levy_field::Characteristics {
    Preset::CompoundPoisson { rate: 6.0, jumps: JumpLaw::Normal { mean: 0.3, sd: 1.5 } }.build(dim).unwrap()
}

fn field(seed: u64, dim: usize) -> FieldRealization {
    let cfg = SamplerConfig::new(seed, Region::from_box(AxisBox::cube(dim, -1.0, 1.0))).with_horizon(2.0);
    sample_replicate(&compound_poisson(dim), &cfg, 0).unwrap()
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + scale)
}

fn boxes(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim).prop_filter_map("degenerate box", |pairs| {
        let lo: Vec<f64> = pairs.iter().map(|(a, b)| a.min(*b)).collect();
        let hi: Vec<f64> = pairs.iter().map(|(a, b)| a.max(*b)).collect();
        lo.iter().zip(&hi).all(|(l, h)| h - l > 1e-6).then_some((lo, hi))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measure_is_additive_over_cuts(seed in 0u64..1000, dim in 1usize..=2, (lo, hi) in boxes(2), frac in 0.0..1.0f64, t in 0.1..2.0f64) {
        let real = field(seed, dim);
        let (lo, hi) = (lo[..dim].to_vec(), hi[..dim].to_vec());
        let cut = lo[0] + frac * (hi[0] - lo[0]);
        let whole = AxisBox::new(lo.clone(), hi.clone()).unwrap();
        let mut left = whole.clone();
        left.hi[0] = cut;
        let mut right = whole.clone();
        right.lo[0] = cut;
        let m = |b: AxisBox| real.evaluate(t, &Region::from_box(b)).unwrap();
        let (ml, mr, mw) = (m(left), m(right), m(whole));
        prop_assert!(close(mw, ml + mr, ml.abs() + mr.abs()), "{mw} vs {ml} + {mr}");
    }

    #[test]
    fn indicator_integral_is_the_measure(seed in 0u64..1000, dim in 1usize..=2, (lo, hi) in boxes(2), t in 0.1..2.0f64) {
        let real = field(seed, dim);
        let a = Region::from_box(AxisBox::new(lo[..dim].to_vec(), hi[..dim].to_vec()).unwrap());
        let m = real.evaluate(t, &a).unwrap();
        let l = integrate(&real, &TestFunction::indicator(a.clone()), t, real.window()).unwrap();
        prop_assert!(close(l.value, m, m.abs()), "{} vs {m}", l.value);
    }

    #[test]
    fn box_increment_recovers_the_measure(seed in 0u64..1000, dim in 1usize..=2, (lo, hi) in boxes(2), t in 0.1..2.0f64) {
        let real = field(seed, dim);
        let (lo, hi) = (lo[..dim].to_vec(), hi[..dim].to_vec());
        let m = real.evaluate(t, &Region::from_box(AxisBox::new(lo.clone(), hi.clone()).unwrap())).unwrap();
        let scale = 1.0 + real.jumps().iter().map(|j| j.size.abs()).sum::<f64>();
        let inc = box_increment(&sheet_from_field(real), t, &lo, &hi).unwrap();
        prop_assert!(close(inc.value, m, scale), "{} vs {m}", inc.value);
    }

    #[test]
    fn sampling_is_reproducible(seed in 0u64..1000, dim in 1usize..=2) {
        let (a, b) = (field(seed, dim), field(seed, dim));
        prop_assert_eq!(a.jumps(), b.jumps());
    }
}

fn increment_report(mutate: Option<&(dyn Fn(FieldRealization) -> FieldRealization + Sync)>) -> Decision {
    let chars = compound_poisson(1);
    let a = Region::interval(0.0, 1.0).unwrap();
    let cfg = SamplerConfig::new(77, a.clone()).with_horizon(2.0).with_replicates(1500);
    let samples = increment_samples(&chars, &a, 1.0, 2.0, &cfg, mutate).unwrap();
    stationary_increment_test(&samples, 0.01, 77).unwrap().decision
}

#[test]
fn stationary_increments_pass() {
    assert_eq!(increment_report(None), Decision::Pass);
}

#[test]
fn inflated_late_jumps_are_detected() {
    let mutant = |r: FieldRealization| {
        let jumps = r
            .jumps()
            .iter()
            .cloned()
            .map(|mut j| {
                if j.time > 1.0 {
                    j.size *= 2.0;
                }
                j
            })
            .collect();
        r.with_jumps(jumps)
    };
    assert_eq!(increment_report(Some(&mutant)), Decision::Fail);
}
