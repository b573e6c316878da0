mod common;

use common::fd::{central_gradient, max_relative_error};
use phasesketch::model::{ModelInstance, ModelSpec};
use phasesketch::vqe_engine::Engine;
use proptest::prelude::*;

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Tfim1d { l: 5 },
        ModelSpec::Tfim2d { lx: 2, ly: 3 },
        ModelSpec::Bbc { l: 5 },
        ModelSpec::Ssh2d { l: 4 },
    ]
}

fn g_value(spec: &ModelSpec, u: f64) -> f64 {
    match spec {
        ModelSpec::Tfim1d { .. } | ModelSpec::Tfim2d { .. } => 2.0 * u,
        ModelSpec::Bbc { .. } => -std::f64::consts::PI + 2.0 * std::f64::consts::PI * u,
        ModelSpec::Ssh2d { .. } => 0.1 + 5.0 * u,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn analytic_gradient_matches_central_differences(
        which in 0usize..4,
        u in 0.0f64..1.0,
        p in 1usize..=3,
        raw in prop::collection::vec(-1.5f64..1.5, 19),
    ) {
        let spec = models()[which];
        let engine = Engine::new(ModelInstance::build(spec).unwrap()).unwrap();
        let problem = engine.problem(&spec.params(g_value(&spec, u))).unwrap();
        let n = engine.model.n_params(p);
        let theta: Vec<f64> = raw.iter().cycle().take(n).copied().collect();
        let (_, grad) = problem.energy_and_gradient(p, &theta).unwrap();
        let fd = central_gradient(|x| problem.energy_and_gradient(p, x).unwrap().0, &theta, 1e-5);
        let err = max_relative_error(&grad, &fd);
        prop_assert!(err < 1e-5, "{spec} p={p}: relative error {err}");
    }
}
