mod common;

use common::*;
use lmssc::data::{generate_synthetic, make_split, SyntheticSpec};
use lmssc::propagate::decide;
use lmssc::solver::{fit, objective, predict, unlabeled_accuracy, SubStep};
use lmssc::{permute_labeled_first, LmsscConfig};

fn cfg(seed: u64) -> LmsscConfig {
    LmsscConfig {
        latent_dim: 4,
        neighbor_count: 8,
        rng_seed: seed,
        ..LmsscConfig::default()
    }
}

#[test]
fn objective_matches_entrywise_sum() {
    let ds = small_planted(1, 45, 0.2);
    let c = cfg(1);
    let state = fit(&ds, &c).unwrap();
    let alpha = *state.alpha_trace.last().unwrap();
    let fast = objective(&state, &ds, c.beta, c.gamma, alpha);
    let slow = naive_objective(
        &ds.views,
        &state.model.view_factors,
        &state.model.shared,
        &state.graph.weights,
        &state.labels.scores,
        c.beta,
        c.gamma,
        alpha,
    );
    assert!(
        (fast - slow).abs() <= 1e-9 * slow.abs().max(1.0),
        "{fast} vs {slow}"
    );
    assert_eq!(*state.objective_trace.last().unwrap(), fast);
}

#[test]
fn every_sub_step_descends() {
    for seed in 0..5 {
        let ds = small_planted(seed, 45, 0.2);
        let state = fit(&ds, &cfg(seed)).unwrap();
        for s in &state.steps {
            let rel = (s.after - s.before) / s.before.abs().max(1.0);
            assert!(rel <= 1e-8, "seed {seed}: {s:?}");
        }
    }
}

#[test]
fn single_iteration_records_four_steps() {
    let ds = small_planted(2, 30, 0.3);
    let state = fit(
        &ds,
        &LmsscConfig {
            max_iters: 1,
            ..cfg(2)
        },
    )
    .unwrap();
    assert_eq!(state.iteration, 1);
    assert_eq!(state.objective_trace.len(), 4);
    assert_eq!(state.alpha_trace.len(), 1);
    let order: Vec<SubStep> = state.steps.iter().map(|s| s.step).collect();
    assert_eq!(
        order,
        vec![
            SubStep::ViewFactors,
            SubStep::SharedFactor,
            SubStep::Similarity,
            SubStep::Labels
        ]
    );
    for pair in state.steps.windows(2) {
        assert_eq!(pair[0].after, pair[1].before);
    }
}

#[test]
fn fit_is_deterministic() {
    let ds = small_planted(3, 40, 0.2);
    let a = fit(&ds, &cfg(9)).unwrap();
    let b = fit(&ds, &cfg(9)).unwrap();
    assert_eq!(a.objective_trace, b.objective_trace);
    assert_eq!(a.labels.scores, b.labels.scores);
    assert_eq!(a.graph.weights, b.graph.weights);
}

#[test]
fn state_invariants_hold_after_fit() {
    let ds = small_planted(4, 45, 0.2);
    let state = fit(&ds, &cfg(4)).unwrap();
    state.graph.check_invariants().unwrap();
    assert!(state
        .model
        .view_factors
        .iter()
        .all(|w| w.iter().all(|&x| x >= 0.0)));
    let l = ds.labeled_count;
    assert_eq!(state.labels.scores.rows(0, l), ds.labeled_indicator());
    for row in state.labels.unlabeled_scores().row_iter() {
        assert!((row.sum() - 1.0).abs() <= 1e-6);
    }
    assert!(state.converged);
}

#[test]
fn recovers_planted_classes() {
    let ds = planted(5, 0.1, 5);
    let state = fit(
        &ds,
        &LmsscConfig {
            rng_seed: 5,
            ..LmsscConfig::default()
        },
    )
    .unwrap();
    let acc = unlabeled_accuracy(&decide(&state.labels), ds.unlabeled_labels());
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn predictions_follow_sample_order() {
    let spec = SyntheticSpec {
        n_samples: 45,
        n_classes: 3,
        latent_dim: 3,
        view_dims: vec![8, 6],
        rng_seed: 6,
        ..SyntheticSpec::default()
    };
    let raw = generate_synthetic(&spec).unwrap().raw;
    let mask = make_split(&raw.labels, raw.class_count, 0.2, 6).unwrap();
    let ds = permute_labeled_first(&raw.views, &raw.labels, raw.class_count, &mask).unwrap();
    let pred = predict(&fit(&ds, &cfg(6)).unwrap(), &ds);
    for i in (0..45).filter(|&i| mask[i]) {
        assert_eq!(pred[i], raw.labels[i]);
    }

    // Reorder the raw samples so that labeled ones come first while keeping
    // each group's relative order: storage is unchanged, so predictions must
    // move with their samples.
    let order: Vec<usize> = (0..45)
        .filter(|&i| mask[i])
        .chain((0..45).filter(|&i| !mask[i]))
        .collect();
    let views: Vec<_> = raw
        .views
        .iter()
        .map(|x| x.select_columns(order.iter()))
        .collect();
    let labels: Vec<usize> = order.iter().map(|&i| raw.labels[i]).collect();
    let mask2: Vec<bool> = order.iter().map(|&i| mask[i]).collect();
    let ds2 = permute_labeled_first(&views, &labels, raw.class_count, &mask2).unwrap();
    let pred2 = predict(&fit(&ds2, &cfg(6)).unwrap(), &ds2);
    for (pos, &i) in order.iter().enumerate() {
        assert_eq!(pred2[pos], pred[i]);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let ds = small_planted(7, 30, 0.3);
    for bad in [
        LmsscConfig {
            beta: 0.0,
            ..cfg(0)
        },
        LmsscConfig {
            gamma: -1.0,
            ..cfg(0)
        },
        LmsscConfig {
            neighbor_count: 30,
            ..cfg(0)
        },
        LmsscConfig {
            latent_dim: 0,
            ..cfg(0)
        },
        LmsscConfig {
            max_iters: 0,
            ..cfg(0)
        },
    ] {
        assert!(fit(&ds, &bad).is_err(), "{bad:?}");
    }
}
