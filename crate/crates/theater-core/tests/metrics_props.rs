//! Metric invariants over randomized condition results.

use proptest::prelude::*;

use theater_core::{
    delta, group_average, improvement, robustness_rate, BiasKind, ConditionKey, ConditionResult,
    MitigationStrategy, ModelGroup, ModelMeta,
};

fn key(model: &str, bias: BiasKind, mitigation: MitigationStrategy) -> ConditionKey {
    ConditionKey {
        model_id: model.to_string(),
        dataset_id: "prop".to_string(),
        bias,
        mitigation,
    }
}

proptest! {
    /// robustness_rate * baseline accuracy = biased accuracy.
    #[test]
    fn rate_times_baseline_recovers_biased_accuracy(
        biased_correct in 0usize..=100,
        baseline_correct in 1usize..=100,
    ) {
        let biased = ConditionResult::new(
            key("m", BiasKind::WaitCue, MitigationStrategy::NoMitigation),
            100,
            biased_correct,
            0,
        );
        let baseline = ConditionResult::new(
            key("m", BiasKind::NoneBaseline, MitigationStrategy::NoMitigation),
            100,
            baseline_correct,
            0,
        );
        let rate = robustness_rate(&biased, &baseline).unwrap();
        let recovered = rate * baseline.accuracy.unwrap();
        prop_assert!((recovered - biased.accuracy.unwrap()).abs() < 1e-12);
    }

    /// delta and improvement flip sign under argument swap.
    #[test]
    fn delta_and_improvement_are_antisymmetric(
        a_correct in 0usize..=100,
        b_correct in 0usize..=100,
    ) {
        let biased = ConditionResult::new(
            key("m", BiasKind::DeepReasoning, MitigationStrategy::NoMitigation),
            100,
            a_correct,
            0,
        );
        let baseline = ConditionResult::new(
            key("m", BiasKind::NoneBaseline, MitigationStrategy::NoMitigation),
            100,
            b_correct,
            0,
        );
        let d = delta(&biased, &baseline).unwrap();
        // Swapping roles means treating the baseline as "biased" relative
        // to the other; the signed difference must negate exactly.
        prop_assert_eq!(
            d,
            -(baseline.accuracy.unwrap() - biased.accuracy.unwrap())
        );

        let mitigated = ConditionResult::new(
            key("m", BiasKind::DeepReasoning, MitigationStrategy::Targeted),
            100,
            a_correct,
            0,
        );
        let unmitigated = ConditionResult::new(
            key("m", BiasKind::DeepReasoning, MitigationStrategy::NoMitigation),
            100,
            b_correct,
            0,
        );
        let imp = improvement(&mitigated, &unmitigated).unwrap();
        prop_assert_eq!(imp, -(unmitigated.accuracy.unwrap() - mitigated.accuracy.unwrap()));
    }

    /// Group means stay within the member accuracy envelope and are
    /// invariant to the order results arrive in.
    #[test]
    fn group_mean_is_bounded_and_permutation_invariant(
        corrects in proptest::collection::vec(0usize..=100, 2..8),
        seed in 0u64..1000,
    ) {
        let metas: Vec<ModelMeta> = (0..corrects.len())
            .map(|i| ModelMeta {
                model_id: format!("m{i}"),
                family: "prop".to_string(),
                is_lrm: true,
                open_source: true,
            })
            .collect();
        let mut results: Vec<ConditionResult> = corrects
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                ConditionResult::new(
                    key(&format!("m{i}"), BiasKind::WaitCue, MitigationStrategy::NoMitigation),
                    100,
                    c,
                    0,
                )
            })
            .collect();
        let forward = group_average(&results, &metas, ModelGroup::Lrm).unwrap();

        // Deterministic pseudo-shuffle.
        let n = results.len();
        for i in 0..n {
            let j = ((seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % n;
            results.swap(i, j);
        }
        let shuffled = group_average(&results, &metas, ModelGroup::Lrm).unwrap();
        prop_assert_eq!(&forward, &shuffled);

        let cell = forward.values().next().unwrap();
        let lo = corrects.iter().min().unwrap();
        let hi = corrects.iter().max().unwrap();
        prop_assert!(cell.mean_accuracy >= *lo as f64 / 100.0 - 1e-12);
        prop_assert!(cell.mean_accuracy <= *hi as f64 / 100.0 + 1e-12);
    }
}
