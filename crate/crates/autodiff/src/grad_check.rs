//! Central-difference checks for analytic gradients.

use crate::{Graph, Result, Tensor, Var};

fn eval<F>(build: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let out = build(&g, &vars)?;
    let v = out.value();
    if !v.is_scalar() {
        return Err(crate::AdError::NonScalarLoss(v.shape().to_vec()));
    }
    Ok(v.item())
}

/// Central-difference gradient of a scalar function with respect to
/// `inputs[which]`.
pub fn numerical_gradient<F>(build: F, inputs: &[Tensor], which: usize, h: f64) -> Result<Tensor>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let mut work = inputs.to_vec();
    let n = work[which].numel();
    let mut grad = vec![0.0; n];
    for (i, gi) in grad.iter_mut().enumerate() {
        let orig = work[which].data()[i];
        work[which].data_mut()[i] = orig + h;
        let fp = eval(&build, &work)?;
        work[which].data_mut()[i] = orig - h;
        let fm = eval(&build, &work)?;
        work[which].data_mut()[i] = orig;
        *gi = (fp - fm) / (2.0 * h);
    }
    Tensor::new(inputs[which].shape().to_vec(), grad)
}

/// Compares the backward pass against central differences for every input.
///
/// Returns the largest `|analytic - numeric| / max(1, |analytic|)` seen.
pub fn grad_check<F>(build: F, inputs: &[Tensor], h: f64) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&g, &vars)?;
    let grads = g.backward(out)?;
    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(v);
        let numeric = numerical_gradient(&build, inputs, k, h)?;
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            worst = worst.max((a - n).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Like [`grad_check`] but only compares the listed `(input, element)`
/// coordinates, for functions with too many inputs to sweep exhaustively.
pub fn grad_check_at<F>(
    build: F,
    inputs: &[Tensor],
    h: f64,
    coords: &[(usize, usize)],
) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&g, &vars)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.get_or_zeros(v)).collect();
    let mut work = inputs.to_vec();
    let mut worst: f64 = 0.0;
    for &(k, i) in coords {
        let orig = work[k].data()[i];
        work[k].data_mut()[i] = orig + h;
        let fp = eval(&build, &work)?;
        work[k].data_mut()[i] = orig - h;
        let fm = eval(&build, &work)?;
        work[k].data_mut()[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[k].data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
