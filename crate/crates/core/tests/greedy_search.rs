mod common;

use rand::Rng;
use token_insight::attribution::stubs::{AdditiveStub, ConstantStub, KeyedStub};
use token_insight::attribution::{
    evaluate_candidates, run_token_insight, CountingClassifier, Scheduler, SubsetClassifier,
    Target, TokenInsight, TokenModel, TraceStatus,
};
use token_insight::vit::TokenSubset;
use token_insight::Error;

#[test]
fn matches_naive_oracle_on_random_stubs() {
    let mut rng = common::rng(31);
    for case in 0..150 {
        let stub = common::random_stub(&mut rng, case);
        let n = stub.token_count();
        let trace = run_token_insight(stub.as_ref(), Target::Auto, None).unwrap();
        let (tokens, confidences, status) = common::naive_greedy(stub.as_ref(), n);
        assert_eq!(
            trace.removed_tokens().collect::<Vec<_>>(),
            tokens,
            "case {case}"
        );
        let got: Vec<f32> = trace.steps.iter().map(|s| s.confidence).collect();
        assert_eq!(got, confidences, "case {case}");
        assert_eq!(trace.status, status, "case {case}");
        trace.check().unwrap();
    }
}

#[test]
fn capped_search_matches_naive_oracle() {
    let mut rng = common::rng(32);
    for case in 0..60 {
        let stub = common::random_stub(&mut rng, case);
        let cap = rng.gen_range(0..=stub.token_count());
        let trace = run_token_insight(stub.as_ref(), Target::Auto, Some(cap)).unwrap();
        let (tokens, _, status) = common::naive_greedy(stub.as_ref(), cap);
        assert_eq!(trace.removed_tokens().collect::<Vec<_>>(), tokens);
        assert_eq!(trace.status, status);
        assert!(trace.steps.len() <= cap);
    }
}

/// Weights are multiples of 2^-10 so every partial sum is exact in f32.
fn dyadic_weights(rng: &mut impl Rng, n: usize) -> Vec<f32> {
    (0..n)
        .map(|_| rng.gen_range(33u32..=64) as f32 / 1024.0)
        .collect()
}

#[test]
fn additive_stub_removes_in_descending_weight_order() {
    let mut rng = common::rng(33);
    for _ in 0..200 {
        let w = dyadic_weights(&mut rng, 16);
        let trace = run_token_insight(&AdditiveStub::new(w.clone()), Target::Auto, None).unwrap();
        assert_eq!(trace.target_class, 1);
        let mut order: Vec<usize> = (0..16).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        let removed: Vec<usize> = trace.removed_tokens().collect();
        assert_eq!(removed, order[..removed.len()]);
        assert_eq!(trace.status, TraceStatus::Flipped);
    }
}

#[test]
fn every_step_is_the_best_available_removal() {
    let model = common::tiny_model();
    let classifier = model.subset_classifier(&common::tiny_input()).unwrap();
    let trace = run_token_insight(classifier.as_ref(), Target::Auto, None).unwrap();
    let mut current = TokenSubset::full(16);
    for step in &trace.steps {
        let candidates = evaluate_candidates(
            classifier.as_ref(),
            &current,
            trace.target_class,
            &Scheduler::sequential(),
        )
        .unwrap();
        for c in &candidates {
            assert!(step.confidence <= c.confidence);
        }
        current = current.without(step.token);
    }
}

#[test]
fn flip_is_real_and_earlier_steps_are_not_flipped() {
    let model = common::tiny_model();
    let classifier = model.subset_classifier(&common::tiny_input()).unwrap();
    let trace = run_token_insight(classifier.as_ref(), Target::Auto, None).unwrap();
    assert_eq!(trace.status, TraceStatus::Flipped);
    let mut current = TokenSubset::full(16);
    for (i, step) in trace.steps.iter().enumerate() {
        current = current.without(step.token);
        let pred = classifier.evaluate(&current).unwrap();
        assert_eq!(pred.probs[trace.target_class], step.confidence);
        let last = i + 1 == trace.steps.len();
        assert_eq!(pred.top_class != trace.target_class, last, "step {}", i + 1);
    }
}

#[test]
fn tiny_vit_trace_matches_reference_order() {
    let model = common::tiny_model();
    let classifier = model.subset_classifier(&common::tiny_input()).unwrap();
    let trace = run_token_insight(classifier.as_ref(), Target::Auto, None).unwrap();
    let g = &common::golden()["trace"];
    assert_eq!(
        trace.target_class as u64,
        g["target_class"].as_u64().unwrap()
    );
    assert_eq!(trace.status.to_string(), g["status"].as_str().unwrap());
    let steps = g["steps"].as_array().unwrap();
    assert_eq!(trace.steps.len(), steps.len());
    for (s, want) in trace.steps.iter().zip(steps) {
        assert_eq!(s.token as u64, want["token"].as_u64().unwrap());
        assert!((f64::from(s.confidence) - want["confidence"].as_f64().unwrap()).abs() < 1e-5);
        assert!((f64::from(s.drop) - want["drop"].as_f64().unwrap()).abs() < 1e-5);
    }
}

#[test]
fn worker_count_and_wave_size_do_not_change_the_trace() {
    let model = common::tiny_model();
    let classifier = model.subset_classifier(&common::tiny_input()).unwrap();
    let reference = run_token_insight(classifier.as_ref(), Target::Auto, None)
        .unwrap()
        .to_json();
    for (workers, wave) in [(8, None), (3, Some(5)), (2, Some(1)), (1, Some(4))] {
        let trace = TokenInsight::new()
            .scheduler(Scheduler::new(workers, wave).unwrap())
            .run(classifier.as_ref(), Target::Auto)
            .unwrap();
        assert_eq!(
            trace.to_json(),
            reference,
            "workers {workers} wave {wave:?}"
        );
    }
}

#[test]
fn evaluation_count_is_one_plus_the_shrinking_waves() {
    let mut rng = common::rng(34);
    for case in 0..60 {
        let stub = common::random_stub(&mut rng, case);
        let n = stub.token_count();
        let counted = CountingClassifier::new(stub);
        let trace = run_token_insight(&counted, Target::Auto, None).unwrap();
        let k = trace.steps.len();
        let waves: usize = (0..k).map(|j| n - j).sum();
        assert_eq!(
            counted.calls(),
            1 + waves,
            "case {case}: n {n}, k {k}, {:?}",
            trace.status
        );
    }
}

#[test]
fn constant_model_exhausts_in_index_order() {
    let trace =
        run_token_insight(&ConstantStub::new(5, vec![0.3, 0.7]), Target::Auto, None).unwrap();
    assert_eq!(trace.status, TraceStatus::Exhausted);
    assert_eq!(
        trace.removed_tokens().collect::<Vec<_>>(),
        vec![0, 1, 2, 3, 4]
    );
    assert!(trace.steps.iter().all(|s| s.drop == 0.0));
}

#[test]
fn keyed_pair_interaction_is_found() {
    // Tokens 2 and 3 only matter together; removing either breaks the pair.
    let stub = KeyedStub::new(
        vec![0.0, 0.0],
        vec![vec![0.0, 0.1, 0.0, 0.0], vec![0.0; 4]],
        vec![(2, 3, vec![0.0, 2.0])],
    );
    let trace = run_token_insight(&stub, Target::Auto, None).unwrap();
    assert_eq!(trace.target_class, 1);
    assert_eq!(trace.steps[0].token, 2);
    assert_eq!(trace.status, TraceStatus::Flipped);
}

#[test]
fn explicit_wrong_target_is_refused() {
    let stub = AdditiveStub::new(vec![0.4, 0.4]);
    let err = run_token_insight(&stub, Target::Class(0), None).unwrap_err();
    assert!(matches!(
        err,
        Error::InitialMisprediction {
            requested: 0,
            predicted: 1,
            ..
        }
    ));
    let err = run_token_insight(&stub, Target::Class(5), None).unwrap_err();
    assert!(matches!(err, Error::ClassOutOfRange { .. }));
    let ok = run_token_insight(&stub, Target::Class(1), None).unwrap();
    assert_eq!(ok.target_class, 1);
}

#[test]
fn zero_token_model_exhausts_immediately() {
    let counted = CountingClassifier::new(ConstantStub::new(0, vec![0.2, 0.8]));
    let trace = run_token_insight(&counted, Target::Auto, None).unwrap();
    assert_eq!(trace.status, TraceStatus::Exhausted);
    assert!(trace.steps.is_empty());
    assert_eq!(counted.calls(), 1);
}
