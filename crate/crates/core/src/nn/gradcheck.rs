//! Central-difference gradient checking.

use super::Tensor;

/// Relative error with an absolute floor so that vanishing gradients compare
/// on an absolute scale.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Worst relative error between `grads` and central differences of `f`
/// over every coordinate of `params`.
pub fn grad_check<F>(mut f: F, params: &mut [Tensor], grads: &[Tensor], eps: f64) -> f64
where
    F: FnMut(&[Tensor]) -> f64,
{
    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.len()).map(move |i| (p, i)))
        .collect();
    grad_check_coords(&mut f, params, grads, eps, &coords)
}

/// Like [`grad_check`] but only over the listed `(tensor, index)` coordinates.
pub fn grad_check_coords<F>(
    f: &mut F,
    params: &mut [Tensor],
    grads: &[Tensor],
    eps: f64,
    coords: &[(usize, usize)],
) -> f64
where
    F: FnMut(&[Tensor]) -> f64,
{
    assert!(eps > 0.0, "eps must be positive");
    let mut worst = 0.0f64;
    for &(p, i) in coords {
        let original = params[p].data()[i];
        params[p].data_mut()[i] = original + eps;
        let plus = f(params);
        params[p].data_mut()[i] = original - eps;
        let minus = f(params);
        params[p].data_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(grads[p].data()[i], numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form() {
        // f(x) = xᵀ A x with symmetric A; ∇f = 2 A x.
        let a = [[2.0, 0.5, -1.0], [0.5, 1.0, 0.3], [-1.0, 0.3, 3.0]];
        let f = |p: &[Tensor]| {
            let x = p[0].data();
            (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| x[i] * a[i][j] * x[j])
                .sum()
        };
        let mut params = vec![Tensor::new(&[3], vec![0.7, -1.2, 0.4]).unwrap()];
        let x = params[0].data().to_vec();
        let g: Vec<f64> = (0..3)
            .map(|i| 2.0 * (0..3).map(|j| a[i][j] * x[j]).sum::<f64>())
            .collect();
        let grads = vec![Tensor::new(&[3], g).unwrap()];
        assert!(grad_check(f, &mut params, &grads, 1e-5) < 1e-6);
    }

    #[test]
    fn linear_function() {
        let f = |p: &[Tensor]| 3.0 * p[0].data()[0] - 2.0 * p[0].data()[1];
        let mut params = vec![Tensor::new(&[2], vec![1.0, 1.0]).unwrap()];
        let grads = vec![Tensor::new(&[2], vec![3.0, -2.0]).unwrap()];
        assert!(grad_check(f, &mut params, &grads, 1e-3) < 1e-8);
    }

    #[test]
    fn detects_wrong_gradient() {
        let f = |p: &[Tensor]| p[0].data()[0].powi(2);
        let mut params = vec![Tensor::scalar(1.0)];
        let grads = vec![Tensor::scalar(1.0)];
        assert!(grad_check(f, &mut params, &grads, 1e-5) > 0.4);
    }
}
