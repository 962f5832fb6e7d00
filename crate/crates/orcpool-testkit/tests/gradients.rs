//! Finite-difference verification of the training gradients.
//!
//! The soft-assignment trainer backpropagates hand-derived formulas
//! through the min-cut trace ratio, the orthogonality penalty, the
//! softmax and both ELU layers. Central finite differences over the
//! full flat parameter vector are the independent oracle.

use orcpool::flow::{ricci_flow, FlowOptions};
use orcpool::graph::{build_graph, generate_dumbbell};
use orcpool::pooling::{FeatureMode, TrainingProblem};
use orcpool_testkit::finite_difference_gradient;

const STEP: f64 = 1e-5;
const MAX_REL_ERR: f64 = 1e-4;

fn relative_gradient_error(problem: &TrainingProblem, params: &[f64]) -> f64 {
    let eval = problem.loss_and_gradient(params).unwrap();
    let numeric = finite_difference_gradient(|p| problem.loss(p).unwrap(), params, STEP);
    let scale = numeric
        .iter()
        .chain(&eval.gradient)
        .fold(0.0f64, |m, &g| m.max(g.abs()))
        .max(1e-12);
    numeric
        .iter()
        .zip(&eval.gradient)
        .fold(0.0f64, |m, (&n, &a)| m.max((n - a).abs()))
        / scale
}

#[test]
fn analytic_gradient_matches_finite_differences_on_the_dumbbell() {
    let (g, _) = generate_dumbbell(5, 1).unwrap();
    let (ct, _) = ricci_flow(&g, 1, &FlowOptions::default()).unwrap();
    let problem = TrainingProblem::new(&g, &ct, 2, FeatureMode::Auto).unwrap();
    for seed in 0..5 {
        let params = problem.initial_parameters(seed);
        let err = relative_gradient_error(&problem, &params);
        assert!(
            err < MAX_REL_ERR,
            "seed {}: relative gradient error {} exceeds {}",
            seed,
            err,
            MAX_REL_ERR
        );
    }
}

#[test]
fn analytic_gradient_matches_finite_differences_with_attributes() {
    let attrs: Vec<Vec<f64>> = (0..6)
        .map(|v| vec![(v % 2) as f64, (v as f64) / 3.0, if v < 3 { 1.0 } else { -1.0 }])
        .collect();
    let g = build_graph(
        &[
            (0, 1, 1.0),
            (1, 2, 2.0),
            (0, 2, 1.5),
            (3, 4, 1.0),
            (4, 5, 0.5),
            (3, 5, 1.0),
            (2, 3, 0.25),
        ],
        6,
        Some(attrs),
    )
    .unwrap();
    let (ct, _) = ricci_flow(&g, 2, &FlowOptions::default()).unwrap();
    for k in [2, 3] {
        let problem = TrainingProblem::new(&g, &ct, k, FeatureMode::Auto).unwrap();
        assert_eq!(problem.feature_label(), "attributes");
        for seed in [7, 8] {
            let params = problem.initial_parameters(seed);
            let err = relative_gradient_error(&problem, &params);
            assert!(
                err < MAX_REL_ERR,
                "K = {}, seed {}: relative gradient error {}",
                k,
                seed,
                err
            );
        }
    }
}

#[test]
fn gradient_stays_accurate_after_training_steps() {
    // Check a point away from initialization: take 40 optimizer steps,
    // then compare again where the loss surface has real curvature.
    let (g, _) = generate_dumbbell(4, 1).unwrap();
    let (ct, _) = ricci_flow(&g, 1, &FlowOptions::default()).unwrap();
    let (_, state) =
        orcpool::pooling::train_soft_assignment(&g, &ct, 2, 40, 1e-2, 3).unwrap();
    let problem = TrainingProblem::new(&g, &ct, 2, FeatureMode::Auto).unwrap();
    let err = relative_gradient_error(&problem, &state.parameters);
    assert!(err < MAX_REL_ERR, "relative gradient error {}", err);
}
