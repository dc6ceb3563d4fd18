use alloc::string::String;
use alloc::vec;

use super::network::flat_target;
use super::{ModelConfig, Precision, PredictorError, PredictorModel, SceneInput};
use crate::vectorizer::VectorizedScene;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Init seed of the default tiny gradient-check model. With a 1e-6 step,
/// parameters whose true gradient is below ~1e-8 sit at the roundoff floor
/// of the difference quotient, and some seeds land a ReLU or max tie within
/// a step of its kink; this seed stays clear of both on every scene kind.
pub const GRADCHECK_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Maximum of `|a - n| / max(|a|, |n|, 1e-12)` over all parameters.
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub worst_block: String,
    pub analytic: f64,
    pub numeric: f64,
    pub parameters_checked: usize,
}

/// Compares the analytic loss gradient of every parameter with central
/// finite differences.
pub fn grad_check(
    model: &PredictorModel<f64>,
    scene: &VectorizedScene,
    config: &ModelConfig,
) -> Result<GradCheckReport, PredictorError> {
    grad_check_with(model, scene, config, None)
}

/// Like [`grad_check`]; `corrupt = Some((i, delta))` adds `delta` to the
/// analytic gradient of parameter `i` before comparing (mutation hook).
pub fn grad_check_with(
    model: &PredictorModel<f64>,
    scene: &VectorizedScene,
    config: &ModelConfig,
    corrupt: Option<(usize, f64)>,
) -> Result<GradCheckReport, PredictorError> {
    if config.precision != Precision::Double {
        return Err(PredictorError::PrecisionRequired);
    }
    let input = SceneInput::<f64>::from_scene(scene)?;
    let target = flat_target::<f64>(scene);
    let mut analytic = vec![0.0; model.params().len()];
    model.loss_and_gradient(&input, &target, 1.0, &mut analytic)?;
    if let Some((i, delta)) = corrupt {
        if let Some(g) = analytic.get_mut(i) {
            *g += delta;
        }
    }

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: 0,
        worst_block: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        parameters_checked: analytic.len(),
    };
    for (i, &a) in analytic.iter().enumerate() {
        let original = probe.params[i];
        probe.params[i] = original + FD_STEP;
        let plus = probe.sample_loss(&input, &target)?;
        probe.params[i] = original - FD_STEP;
        let minus = probe.sample_loss(&input, &target)?;
        probe.params[i] = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_parameter = i;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    report.worst_block = model
        .blocks()
        .into_iter()
        .find(|b| b.range().contains(&report.worst_parameter))
        .map(|b| b.name)
        .unwrap_or_default();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_scene, SamplerConfig};
    use crate::scenario::ScenarioKind;
    use crate::simulator::SimParams;
    use crate::vectorizer::vectorize;

    fn scene(kind: ScenarioKind) -> VectorizedScene {
        let cfg = SamplerConfig::new(kind, 5, 1).unwrap();
        vectorize(&sample_scene(&cfg, 0, &SimParams::default()).unwrap())
    }

    fn tiny() -> (ModelConfig, PredictorModel<f64>) {
        let c = ModelConfig { hidden_dim: 4, init_seed: GRADCHECK_SEED, ..ModelConfig::default() };
        (c, PredictorModel::new(&c).unwrap())
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let (c, m) = tiny();
        for kind in ScenarioKind::ALL {
            let r = grad_check(&m, &scene(kind), &c).unwrap();
            assert!(r.max_relative_error <= 1e-4, "{kind}: {r:?}");
        }
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let (c, m) = tiny();
        let r = grad_check_with(&m, &scene(ScenarioKind::Acc), &c, Some((3, 0.5))).unwrap();
        assert!(r.max_relative_error > 1e-4);
        assert_eq!(r.worst_parameter, 3);
    }

    #[test]
    fn single_precision_is_refused() {
        let (c, m) = tiny();
        let single = ModelConfig { precision: Precision::Single, ..c };
        assert_eq!(
            grad_check(&m, &scene(ScenarioKind::Acc), &single),
            Err(PredictorError::PrecisionRequired)
        );
    }

    #[test]
    fn unused_parameter_has_zero_gradients() {
        // A dead decoder hidden unit: its incoming weights never affect the loss.
        let (c, mut m) = tiny();
        let s = scene(ScenarioKind::Lk);
        m.block_mut("decoder.hidden.bias").unwrap()[0] = -1e6;
        let input = SceneInput::<f64>::from_scene(&s).unwrap();
        let target = flat_target::<f64>(&s);
        let mut grad = vec![0.0; m.params().len()];
        m.loss_and_gradient(&input, &target, 1.0, &mut grad).unwrap();
        let w = m.blocks().into_iter().find(|b| b.name == "decoder.hidden.weight").unwrap();
        let i = w.offset; // row 0, column 0
        assert_eq!(grad[i], 0.0);
        let mut probe = m.clone();
        probe.params[i] += FD_STEP;
        let plus = probe.sample_loss(&input, &target).unwrap();
        probe.params[i] -= 2.0 * FD_STEP;
        let minus = probe.sample_loss(&input, &target).unwrap();
        assert_eq!(plus - minus, 0.0);
        assert!(grad_check(&m, &s, &c).unwrap().max_relative_error <= 1e-4);
    }

    #[test]
    fn perturbation_follows_gradient_sign() {
        let (_, m) = tiny();
        let s = scene(ScenarioKind::AccLk);
        let input = SceneInput::<f64>::from_scene(&s).unwrap();
        let target = flat_target::<f64>(&s);
        let mut grad = vec![0.0; m.params().len()];
        let base = m.loss_and_gradient(&input, &target, 1.0, &mut grad).unwrap();
        let i = m.blocks().into_iter().find(|b| b.name == "decoder.output.bias").unwrap().offset;
        assert!(grad[i] != 0.0);
        let mut probe = m.clone();
        probe.params[i] -= 1e-3 * grad[i].signum();
        assert!(probe.sample_loss(&input, &target).unwrap() < base);
    }
}
