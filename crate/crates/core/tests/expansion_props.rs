mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_cond, random_model, run_probe};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn compiled_conditions_match_guarded_reference(seed in any::<u64>(), depth in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cond = random_cond(&mut rng, depth);
        let model = random_model(&mut rng, 0.6);
        let got = run_probe(&model, &cond).map_err(TestCaseError::fail)?;
        prop_assert_eq!(got, cond.guarded(&model), "{}", cond.render());
    }

    // with every link present, guards never decide the outcome
    #[test]
    fn full_data_matches_plain_evaluation(seed in any::<u64>(), depth in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cond = random_cond(&mut rng, depth);
        let model = random_model(&mut rng, 1.0);
        let got = run_probe(&model, &cond).map_err(TestCaseError::fail)?;
        prop_assert_eq!(got, cond.guarded(&model), "{}", cond.render());
    }

    // absent links make terms false instead of failing the agent
    #[test]
    fn empty_store_never_faults(seed in any::<u64>(), depth in 0u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cond = random_cond(&mut rng, depth);
        let model = random_model(&mut rng, 0.0);
        prop_assert!(run_probe(&model, &cond).is_ok());
    }
}
