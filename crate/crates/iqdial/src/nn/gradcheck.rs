//! Central finite-difference verification of analytic gradients.

use indexmap::IndexMap;

use super::tensor::ParameterSet;

#[derive(Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst: String,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compares analytic gradients against central differences of `loss_fn`.
///
/// `analytic` maps parameter name to the gradient produced by a backward
/// pass; `loss_fn` must evaluate the same loss purely from a parameter set.
/// Relative error uses |a−n| / max(|a|+|n|, 1e-8), which treats tiny
/// gradients on both sides as agreement.
pub fn finite_difference_check<F>(
    ps: &ParameterSet,
    analytic: &IndexMap<String, Vec<f64>>,
    loss_fn: F,
    step: f64,
) -> GradCheckReport
where
    F: Fn(&ParameterSet) -> f64,
{
    let mut max_rel_err: f64 = 0.0;
    let mut worst = String::new();
    let mut checked = 0;
    let mut work = ps.clone();
    for (name, grad) in analytic {
        let numel = ps.get(name).expect("analytic grad for unknown parameter").numel();
        assert_eq!(grad.len(), numel, "gradient length mismatch for {name}");
        for i in 0..numel {
            let orig = work.get(name).unwrap().data()[i];
            work.get_mut(name).unwrap().data_mut()[i] = orig + step;
            let up = loss_fn(&work);
            work.get_mut(name).unwrap().data_mut()[i] = orig - step;
            let down = loss_fn(&work);
            work.get_mut(name).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = grad[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            checked += 1;
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = format!("{name}[{i}] analytic={a} numeric={numeric}");
            }
        }
    }
    GradCheckReport { max_rel_err, worst, checked }
}
