use crate::error::{Error, Result};
use crate::image::Image;
use crate::matching::ssim::mssim_with_grad;
use crate::scalar::Scalar;

/// Mean squared error and its gradient with respect to `x_hat`.
pub fn reconstruction_loss<T: Scalar>(x: &[T], x_hat: &[T]) -> Result<(T, Vec<T>)> {
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(Error::Dimension(format!(
            "reconstruction of {} values against {}",
            x_hat.len(),
            x.len()
        )));
    }
    let n = T::count(x.len());
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let grad = x
        .iter()
        .zip(x_hat)
        .map(|(&a, &b)| {
            let d = b - a;
            loss += d * d;
            two * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// `1 - MSSIM(x, y)` and its gradient with respect to the prediction `y`.
pub fn mssim_loss<T: Scalar>(x: &Image<T>, y: &Image<T>) -> Result<(T, Vec<T>)> {
    let (m, mut grad) = mssim_with_grad(x, y)?;
    grad.iter_mut().for_each(|g| *g = -*g);
    Ok((T::one() - m, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::ssim::C1;

    #[test]
    fn mse_cases() {
        assert_eq!(reconstruction_loss(&[0.3f64, 0.7], &[0.3, 0.7]).unwrap().0, 0.0);
        assert_eq!(reconstruction_loss(&[0.0f64; 4], &[1.0; 4]).unwrap().0, 1.0);
        let x = [0.1f64, 0.9, 0.4, 0.2];
        let y = [0.3f64, 0.5, 0.4, 0.8];
        let oracle = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 4.0;
        assert!((reconstruction_loss(&x, &y).unwrap().0 - oracle).abs() < 1e-15);
        assert!(reconstruction_loss(&x, &y[..3]).is_err());
    }

    #[test]
    fn mssim_loss_cases() {
        let x = Image::filled(10, 10, 0.2f64);
        let y = Image::filled(10, 10, 0.8f64);
        assert!(mssim_loss(&x, &x).unwrap().0.abs() < 1e-12);
        let expected = 1.0 - (2.0 * 0.2 * 0.8 + C1) / (0.04 + 0.64 + C1);
        assert!((mssim_loss(&x, &y).unwrap().0 - expected).abs() < 1e-12);
    }
}
