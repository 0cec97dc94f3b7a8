use proptest::prelude::*;

use roth_core::averages::{AverageContext, Extremum, KernelSpec, ScaleGrid};
use roth_core::frequency::{decompose_lmh, Side, SplitParams};
use roth_core::grid::{GridFunction, Norm, TorusConfig};
use roth_core::sets::{random_set, DensitySet};
use roth_core::Curve;

fn torus() -> TorusConfig {
    TorusConfig::with_resolution(1 << 10).unwrap()
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn set_json_round_trip(delta in 0.01f64..1.0, pieces in 1usize..40, seed in any::<u64>()) {
        let set = random_set(delta, pieces, seed).unwrap();
        let back = DensitySet::from_json(&set.to_json(None), true).unwrap();
        prop_assert_eq!(back.intervals(), set.intervals());
        prop_assert_eq!(back.measure_ticks(), set.measure_ticks());
    }

    #[test]
    fn complement_is_exact(delta in 0.01f64..1.0, pieces in 1usize..40, seed in any::<u64>()) {
        let set = random_set(delta, pieces, seed).unwrap();
        let comp = set.complement();
        prop_assert_eq!(set.measure_ticks() + comp.measure_ticks(), 1u64 << 40);
        let back = comp.complement();
        prop_assert_eq!(back.intervals(), set.intervals());
    }

    #[test]
    fn reconstruction_is_exact(v in samples(1 << 10), l in 0.0f64..3.0, gap in 0.0f64..3.0, delta in 0.5f64..1.0) {
        let f = GridFunction::new(torus(), v).unwrap();
        let params = SplitParams::new(l, l + gap, delta).with_constant(1.0);
        for side in [Side::F, Side::G] {
            let d = decompose_lmh(&f, &params, side).unwrap();
            let sum = d.low.add(&d.medium).unwrap().add(&d.high).unwrap();
            prop_assert!(sum.sub(&f).unwrap().norm(Norm::Sup) <= 1e-12);
        }
    }

    #[test]
    fn averages_are_bilinear(u in samples(1 << 10), v in samples(1 << 10), w in samples(1 << 10), a in -2.0f64..2.0) {
        let c = torus();
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::smooth());
        let (f, f2, g) = (GridFunction::new(c, u).unwrap(), GridFunction::new(c, v).unwrap(), GridFunction::new(c, w).unwrap());
        let r = 0.125;
        let combo = f.scaled(a).add(&f2).unwrap();
        let lhs = ctx.bilinear_average(&combo, &g, r).unwrap();
        let rhs = ctx.bilinear_average(&f, &g, r).unwrap().scaled(a)
            .add(&ctx.bilinear_average(&f2, &g, r).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().norm(Norm::Sup) <= 1e-12);
    }

    #[test]
    fn density_functionals_are_ordered(delta in 0.05f64..1.0, pieces in 1usize..24, seed in any::<u64>()) {
        let c = torus();
        let ctx = AverageContext::new(c, Curve::parabola(), KernelSpec::sharp());
        let set = random_set(delta, pieces, seed).unwrap();
        let grid = ScaleGrid::dyadic(3, 6).unwrap();
        let inf = ctx.paired_extremal(&set, &grid, Extremum::Inf).unwrap();
        let sup = ctx.paired_extremal(&set, &grid, Extremum::Sup).unwrap();
        let global = ctx.global_inf(&set, &grid).unwrap();
        prop_assert!(inf >= 0.0);
        prop_assert!(inf <= global + 1e-12);
        prop_assert!(global <= sup + 1e-12);
        prop_assert!(sup <= set.density() + 1e-9);
    }

    #[test]
    fn rasterization_error_halves_with_resolution(delta in 0.01f64..1.0, pieces in 1usize..40, seed in any::<u64>()) {
        let set = random_set(delta, pieces, seed).unwrap();
        let ends = 2.0 * set.intervals().len() as f64;
        for n in [1usize << 8, 1 << 10, 1 << 12] {
            let c = TorusConfig::with_resolution(n).unwrap();
            let err = (set.rasterize(&c).integral() - set.density()).abs();
            prop_assert!(err <= ends * c.spacing(), "N = {}: {}", n, err);
        }
    }
}
