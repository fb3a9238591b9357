use crate::error::{Error, Result};
use crate::numeric::tape::{Tape, Var};
use crate::numeric::tensor::Tensor;
use crate::scalar::Scalar;

/// Compares reverse-mode gradients of `f` at `point` against central
/// differences with step `eps`.
///
/// Returns `max_i |g_ad - g_fd| / max(1e-8, |g_fd|)`.
pub fn grad_check<T, F>(f: F, point: &Tensor<T>, eps: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    if eps <= T::zero() {
        return Err(Error::invalid("grad_check needs eps > 0"));
    }
    let mut tape = Tape::new();
    let x = tape.var(point.clone());
    let loss = f(&mut tape, x)?;
    let grads = tape.backward(loss)?;
    let analytic = grads.get_or_zeros(x, point);

    let eval = |p: Tensor<T>| -> Result<T> {
        let mut t = Tape::new();
        let v = t.constant(p);
        let l = f(&mut t, v)?;
        t.value(l).item()
    };

    let floor = T::lit(1e-8);
    let two = T::lit(2.0);
    let mut worst = T::zero();
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += eps;
        let mut minus = point.clone();
        minus.data_mut()[i] -= eps;
        let fd = (eval(plus)? - eval(minus)?) / (two * eps);
        let err = (analytic.data()[i] - fd).abs() / fd.abs().max(floor);
        if err.is_nan() {
            return Err(Error::Numerical(format!("NaN gradient at coordinate {i}")));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn quadratic_form_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&[4, 4], &mut rng);
        let x0 = random(&[4, 1], &mut rng);
        let err = grad_check(
            |t, x| {
                let am = t.constant(a.clone());
                let ax = t.matmul(am, x)?;
                let xt = t.transpose(x)?;
                let q = t.matmul(xt, ax)?;
                t.reshape(q, vec![])
            },
            &x0,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "err = {err}");
    }

    #[test]
    fn constant_function_reports_zero() {
        let x0 = Tensor::row(vec![0.3, -0.2]);
        let err = grad_check(
            |t, x| {
                let z = t.scale(x, 0.0);
                let s = t.sum(z);
                Ok(t.add_scalar(s, 4.0))
            },
            &x0,
            1e-6,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn rejects_nonpositive_eps() {
        let x0 = Tensor::row(vec![1.0]);
        assert!(grad_check(|t, x| Ok(t.sum(x)), &x0, 0.0).is_err());
    }
}
