use serde::Serialize;

use super::ParamSet;

/// Relative errors use `max(|analytic|, |numeric|, DENOM_FLOOR)` as the
/// denominator, so entries whose true gradient is ~0 are judged on an
/// absolute scale instead of amplifying rounding noise.
const DENOM_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Tensor name and flat offset of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Set when the loss was non-finite at a perturbed point.
    pub failure: Option<String>,
    pub tol: f64,
    pub passed: bool,
}

/// Compares the gradients already stored in `params` against central
/// finite differences of `loss` with step `h`.
pub fn gradient_check<F>(params: &mut ParamSet, mut loss: F, h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&ParamSet) -> f64,
{
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        failure: None,
        tol,
        passed: false,
    };
    for t in 0..params.tensors.len() {
        for k in 0..params[t].len() {
            let original = params[t].values[k];
            params[t].values[k] = original + h;
            let plus = loss(params);
            params[t].values[k] = original - h;
            let minus = loss(params);
            params[t].values[k] = original;
            if !plus.is_finite() || !minus.is_finite() {
                report.failure = Some(format!("non-finite loss perturbing {}[{k}]", params[t].name));
                report.worst = Some((params[t].name.clone(), k));
                return report;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = params[t].grad[k];
            let denom = analytic.abs().max(numeric.abs()).max(DENOM_FLOOR);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = Some((params[t].name.clone(), k));
            }
        }
    }
    report.passed = report.max_rel_error < tol;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::ParamTensor;

    fn quadratic() -> ParamSet {
        let mut p = ParamSet::new();
        p.push(ParamTensor::from_values("a", &[3], vec![0.5, -2.0, 1.25]).unwrap());
        p.push(ParamTensor::from_values("b", &[2, 2], vec![3.0, 0.1, -0.7, 4.0]).unwrap());
        p
    }

    fn half_sq_norm(p: &ParamSet) -> f64 {
        p.tensors.iter().flat_map(|t| &t.values).map(|v| 0.5 * v * v).sum()
    }

    fn set_exact_grads(p: &mut ParamSet) {
        for t in &mut p.tensors {
            t.grad = t.values.clone();
        }
    }

    #[test]
    fn quadratic_passes_tightly() {
        let mut p = quadratic();
        set_exact_grads(&mut p);
        let r = gradient_check(&mut p, half_sq_norm, 1e-5, 1e-8);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 7);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut p = quadratic();
        set_exact_grads(&mut p);
        p[1].grad[2] += 0.01;
        let r = gradient_check(&mut p, half_sq_norm, 1e-5, 1e-4);
        assert!(!r.passed);
        assert_eq!(r.worst, Some(("b".into(), 2)));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut p = quadratic();
        set_exact_grads(&mut p);
        let r = gradient_check(&mut p, |p| if p[0].values[0] > 0.5 { f64::NAN } else { 0.0 }, 1e-5, 1e-4);
        assert!(!r.passed);
        assert!(r.failure.unwrap().contains("a[0]"));
    }

    #[test]
    fn parameters_are_restored() {
        let mut p = quadratic();
        set_exact_grads(&mut p);
        let before = p.clone();
        gradient_check(&mut p, half_sq_norm, 1e-5, 1e-8);
        assert_eq!(p, before);
    }
}
