use moveblock::condensing::synthetic::{random_lengths, random_stage_data, rel_err};
use moveblock::condensing::{condense, expand, naive_condense, predicted_hessian_flops, FlopCounter};
use moveblock::model::ProblemDims;
use moveblock::BlockStructure;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn col(v: &nalgebra::DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tailored_matches_reference(seed in any::<u64>(), nx in 1usize..5, nu in 1usize..3, coupling in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bs = BlockStructure::from_block_lengths(&random_lengths(&mut rng, 24)).unwrap();
        let sd = random_stage_data(&mut rng, &bs, nx, nu, coupling);
        let (fast, chain) = condense(&sd, &bs, &mut FlopCounter::default()).unwrap();
        let (slow, full) = naive_condense(&sd, &bs, &mut FlopCounter::default()).unwrap();
        prop_assert!(rel_err(&fast.h, &slow.h) < 1e-10);
        prop_assert!(rel_err(&col(&fast.g), &col(&slow.g)) < 1e-10);
        prop_assert!(rel_err(&fast.c, &slow.c) < 1e-10);
        prop_assert!(rel_err(&col(&fast.cvec), &col(&slow.cvec)) < 1e-10);
        prop_assert_eq!(&fast.lb, &slow.lb);
        prop_assert_eq!(&fast.ub, &slow.ub);

        // Expanded states agree with the explicit map x = G T du + L.
        let du = nalgebra::DVector::from_fn(bs.num_blocks() * nu, |i, _| (i as f64 * 0.37).sin());
        let dx = expand(&chain, &bs, &sd.dx0, &du);
        let stacked = &full.g * (bs.build_t(nu) * &du) + &full.l;
        for (k, x) in dx.iter().enumerate().skip(1) {
            let reference = stacked.rows((k - 1) * nx, nx).into_owned();
            prop_assert!((x - &reference).amax() <= 1e-10 * reference.amax().max(1.0));
        }
    }

    #[test]
    fn hessian_count_depends_on_structure_only(seed in any::<u64>(), nx in 1usize..5, nu in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bs = BlockStructure::from_block_lengths(&random_lengths(&mut rng, 30)).unwrap();
        let count = |sd| {
            let mut flops = FlopCounter::default();
            condense(&sd, &bs, &mut flops).unwrap();
            flops.multiplies
        };
        let first = count(random_stage_data(&mut rng, &bs, nx, nu, false));
        let second = count(random_stage_data(&mut rng, &bs, nx, nu, true));
        prop_assert_eq!(first, second);
        let predicted = predicted_hessian_flops(&ProblemDims::new(nx, nu).unwrap(), &bs) as f64;
        let ratio = first as f64 / predicted;
        prop_assert!((1.0 / 3.0..=3.0).contains(&ratio), "ratio {}", ratio);
    }
}
