use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::engine::{compile_with_environment, simulate_key};
use crate::facts::{parse_environment, parse_model, Environment, Trial};
use crate::fixtures::{T1_ENV, T1_INCOMPLETE_MODEL, T1_MODEL};
use crate::synth::{generate, observable_deletion, SynthParams};

use Phenotype::{Growth, NoGrowth};

fn load(text: &str) -> (MetabolicModel, CompiledModel) {
    let model = parse_model(text).unwrap();
    let compiled = compile_with_environment(&model, &parse_environment(T1_ENV).unwrap()).unwrap();
    (model, compiled)
}

fn obs(gene: &str, medium: &str, p: Phenotype) -> Observation {
    Observation::new(Trial::from_labels(gene, medium), p)
}

/// Ground-truth T1 outcomes, enumerated by hand: WT grows on both media,
/// Δg1 grows only when B is supplied, Δg2 never grows.
fn t1_truth() -> Vec<Observation> {
    vec![
        obs("WT", "M_A", Growth),
        obs("WT", "M_B", Growth),
        obs("g1", "M_A", NoGrowth),
        obs("g1", "M_B", Growth),
        obs("g2", "M_A", NoGrowth),
        obs("g2", "M_B", NoGrowth),
    ]
}

fn ids(space: &HypothesisSpace) -> Vec<&str> {
    space.alive().map(|h| h.id()).collect()
}

#[test]
fn t1_candidates() {
    let (_, c) = load(T1_INCOMPLETE_MODEL);
    let space = generate_candidates(&c, None);
    assert_eq!(ids(&space), vec!["codes(g1,e2)", "codes(g2,e1)", "codes(g2,e2)"]);
    assert!(generate_candidates(&c, Some(&[])).is_empty());
}

#[test]
fn saturated_model_has_nothing_to_abduce() {
    let (_, c) = load(&format!("{T1_MODEL}codes g1 e2\ncodes g2 e1\n"));
    assert!(generate_candidates(&c, None).is_empty());
}

#[test]
fn t1_walkthrough() {
    let (model, c) = load(T1_INCOMPLETE_MODEL);
    let mut space = generate_candidates(&c, None);

    let first = obs("g2", "M_A", NoGrowth);
    let report = space.prune(&c, &first, 1).unwrap();
    assert_eq!((report.alive_before, report.alive_after), (3, 2));
    assert_eq!(ids(&space), vec!["codes(g2,e1)", "codes(g2,e2)"]);
    let refuted = space.position("codes(g1,e2)").unwrap();
    assert_eq!(space.refuted_by(refuted), Some(&first));

    // both survivors predict no growth of Δg1 on M_A
    let unchanged = space.prune(&c, &obs("g1", "M_A", NoGrowth), 1).unwrap();
    assert!(unchanged.refuted.is_empty());
    assert_eq!(space.alive_count(), 2);

    // representative before the last observation: smaller id wins
    assert_eq!(space.candidate(space.representative().unwrap()).id(), "codes(g2,e1)");

    space.prune(&c, &obs("g2", "M_B", NoGrowth), 1).unwrap();
    assert_eq!(ids(&space), vec!["codes(g2,e2)"]);

    let recovered = recovered_model(&model, &c, &space).unwrap();
    assert_eq!(recovered, parse_model(T1_MODEL).unwrap());
    let env = parse_environment(T1_ENV).unwrap();
    let rc = compile_with_environment(&recovered, &env).unwrap();
    assert_eq!(predictive_accuracy(&rc, &t1_truth(), 1).unwrap(), 1.0);
}

#[test]
fn accuracy_of_incomplete_and_true_models() {
    let (_, truth) = load(T1_MODEL);
    let (_, incomplete) = load(T1_INCOMPLETE_MODEL);
    assert_eq!(predictive_accuracy(&truth, &t1_truth(), 1).unwrap(), 1.0);
    assert_eq!(predictive_accuracy(&incomplete, &t1_truth(), 1).unwrap(), 4.0 / 6.0);
    assert_eq!(predictive_accuracy(&truth, &[], 1), Err(AbductionError::EmptyEvaluation));
}

#[test]
fn exhaustion_and_empty_recovery() {
    let (model, c) = load(T1_INCOMPLETE_MODEL);
    let mut space = generate_candidates(&c, None);
    // WT never fails to grow on M_A, whatever is added
    let err = space.prune(&c, &obs("WT", "M_A", NoGrowth), 1).unwrap_err();
    assert!(matches!(err, AbductionError::Exhausted { .. }));
    assert_eq!(space.alive_count(), 0);
    assert_eq!(recovered_model(&model, &c, &space), Err(AbductionError::NoAliveHypothesis));
}

#[test]
fn table_matches_direct_simulation_on_t1() {
    let (_, c) = load(T1_INCOMPLETE_MODEL);
    let space = generate_candidates(&c, None);
    let trials = c.design_space();
    let table = PredictionTable::build(&c, space.candidates(), trials.clone(), 1);
    for (h, hyp) in space.candidates().iter().enumerate() {
        for (t, &key) in trials.iter().enumerate() {
            assert_eq!(table.predict(h, t), simulate_key(&c, Some(hyp), key));
        }
    }
}

fn synthetic(seed: u64) -> Option<(MetabolicModel, Environment, (String, String))> {
    let (model, env) = generate(&SynthParams { genes: 12, reactions: 30, metabolites: 28, media: 4, seed });
    let (incomplete, fact) = observable_deletion(&model, &env, seed, 1)?;
    Some((incomplete, env, fact))
}

#[test]
fn table_matches_direct_simulation_on_synthetic_models() {
    let instances: Vec<_> = (0..20).filter_map(synthetic).take(6).collect();
    assert_eq!(instances.len(), 6);
    for (model, env, _) in instances {
        let c = compile_with_environment(&model, &env).unwrap();
        let space = generate_candidates(&c, None);
        let trials = c.design_space();
        let table = PredictionTable::build(&c, space.candidates(), trials.clone(), 3);
        for (h, hyp) in space.candidates().iter().enumerate() {
            for (t, &key) in trials.iter().enumerate() {
                assert_eq!(table.predict(h, t), simulate_key(&c, Some(hyp), key), "{} {t}", hyp.id());
            }
        }
    }
}

#[test]
fn table_handles_multi_fact_hypotheses() {
    let (model, env, _) = (0..20).find_map(synthetic).unwrap();
    let c = compile_with_environment(&model, &env).unwrap();
    let singles = generate_candidates(&c, None);
    let facts: Vec<_> = singles.candidates().iter().map(|h| h.added()[0]).collect();
    let pairs: Vec<Hypothesis> =
        facts.iter().zip(facts.iter().skip(7)).step_by(5).map(|(&a, &b)| Hypothesis::new(&c, [a, b]).unwrap()).collect();
    let trials = c.design_space();
    let table = PredictionTable::build(&c, &pairs, trials.clone(), 2);
    for (h, hyp) in pairs.iter().enumerate() {
        for (t, &key) in trials.iter().enumerate() {
            assert_eq!(table.predict(h, t), simulate_key(&c, Some(hyp), key));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pruning_is_sound_monotone_and_order_independent(seed in 0u64..1000) {
        let instance = synthetic(seed);
        prop_assume!(instance.is_some());
        let (model, env, fact) = instance.unwrap();
        let c = compile_with_environment(&model, &env).unwrap();
        let truth_model = model.with_codes([&fact]);
        let truth = compile_with_environment(&truth_model, &env).unwrap();
        let trials = c.design_space();
        let outcomes: Vec<Observation> = trials
            .iter()
            .map(|&k| Observation::new(c.trial(k), simulate_key(&truth, None, k)))
            .collect();

        let space0 = generate_candidates(&c, None);
        prop_assert_eq!(space0.len(), c.gene_count() * c.enzyme_count() - model.codes.len());
        let target = space0.position(&format!("codes({},{})", fact.0, fact.1)).unwrap();

        let mut forward = space0.clone();
        let mut last = forward.alive_count();
        for o in &outcomes {
            forward.prune(&c, o, 1).unwrap();
            prop_assert!(forward.alive_count() <= last);
            last = forward.alive_count();
            prop_assert!(forward.is_alive(target));
        }

        let mut shuffled = outcomes.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut backward = space0.clone();
        let table = PredictionTable::build(&c, space0.candidates(), trials.clone(), 2);
        for o in &shuffled {
            let t = table.position(c.resolve_trial(&o.trial).unwrap()).unwrap();
            backward.prune_tabulated(&table, t, o).unwrap();
        }
        prop_assert_eq!(ids(&forward), ids(&backward));
    }
}
