use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Pooling weights over tokens: triggers count twice, then normalized.
pub fn summary_weights<T: Scalar>(c_mask: &[u8]) -> Vec<T> {
    let raw: Vec<T> = c_mask.iter().map(|&c| T::from_usize_lossy(1 + c as usize)).collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Stage-1 output on a tape.
#[derive(Clone, Copy, Debug)]
pub struct Stage1 {
    /// `[R, joint_dim]` region vectors.
    pub vectors: Var,
    /// `[1, text_dim]` pooled text.
    pub text_summary: Var,
}

/// Values of a stage-1 output.
#[derive(Clone, Debug, PartialEq)]
pub struct JointEmbedding<T> {
    pub vectors: Tensor<T>,
    pub text_summary: Tensor<T>,
}

impl Stage1 {
    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> JointEmbedding<T> {
        JointEmbedding { vectors: tape.value(self.vectors).clone(), text_summary: tape.value(self.text_summary).clone() }
    }
}

/// Region vector `i` is `R * prior_i * (h_i W_v) + ts W_t` where `ts` is the
/// trigger-weighted mean of the token vectors. The factor `R` (region
/// count) keeps a uniform prior at unit scale.
pub fn fuse_stage1<T: Scalar>(
    tape: &mut Tape<T>,
    text_h: Var,
    c_mask: &[u8],
    prior: Var,
    region_h: Var,
    w_v: Var,
    w_t: Var,
) -> Result<Stage1> {
    let (n, _) = tape.value(text_h).dims2()?;
    let (r, _) = tape.value(region_h).dims2()?;
    if c_mask.len() != n || n == 0 {
        return Err(Error::invalid(format!("c_mask has {} entries for {n} tokens", c_mask.len())));
    }
    if tape.value(prior).numel() != r {
        return Err(Error::invalid(format!("prior has {} entries for {r} regions", tape.value(prior).numel())));
    }
    let pool = tape.constant(Tensor::row(summary_weights(c_mask)));
    let ts = tape.matmul(pool, text_h)?;
    let proj = tape.matmul(region_h, w_v)?;
    let col = tape.reshape(prior, vec![r, 1])?;
    let col = tape.scale(col, T::from_usize_lossy(r));
    let scaled = tape.mul_rows(proj, col)?;
    let text_proj = tape.matmul(ts, w_t)?;
    let vectors = tape.add_row(scaled, text_proj)?;
    Ok(Stage1 { vectors, text_summary: ts })
}

/// Mixes region vectors by normalized `weights` (`[R, 1]`, nonnegative) and
/// appends the text summary: `[sum_i w_i v_i | ts]`.
pub fn fuse_stage2<T: Scalar>(tape: &mut Tape<T>, stage1: &Stage1, weights: Var) -> Result<Var> {
    let (r, _) = tape.value(stage1.vectors).dims2()?;
    let w = tape.value(weights);
    if w.numel() != r {
        return Err(Error::invalid(format!("{} causal weights for {r} regions", w.numel())));
    }
    if w.data().iter().any(|&v| !(v >= T::zero())) {
        return Err(Error::invalid("causal weights must be nonnegative"));
    }
    if w.sum() <= T::zero() {
        return Err(Error::invalid("causal weights sum to zero"));
    }
    let w = tape.reshape(weights, vec![1, r])?;
    let total = tape.sum(w);
    let inv = tape.recip(total);
    let w = tape.mul_scalar(w, inv)?;
    let z = tape.matmul(w, stage1.vectors)?;
    tape.concat(&[z, stage1.text_summary], 1)
}

/// Indices of the `k` largest entries (ties to the lower index).
pub fn top_k_mask<T: Scalar>(weights: &[T], k: usize) -> Result<Vec<bool>> {
    if k == 0 || k > weights.len() {
        return Err(Error::invalid(format!("top_k = {k} must be in 1..={}", weights.len())));
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut keep = vec![false; weights.len()];
    for &i in &order[..k] {
        keep[i] = true;
    }
    Ok(keep)
}

/// Keeps the `top_k` largest entries and renormalizes them to sum 1.
pub fn sparsify<T: Scalar>(weights: &[T], top_k: usize) -> Result<Vec<T>> {
    let keep = top_k_mask(weights, top_k)?;
    let total: T = weights.iter().zip(&keep).filter(|(_, &k)| k).map(|(&w, _)| w).sum();
    Ok(weights
        .iter()
        .zip(&keep)
        .map(|(&w, &k)| {
            if !k {
                T::zero()
            } else if total > T::zero() {
                w / total
            } else {
                T::one() / T::from_usize_lossy(top_k)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparsify_examples() {
        let s = sparsify(&[0.5, 0.3, 0.2], 2).unwrap();
        assert!((s[0] - 0.625f64).abs() < 1e-15 && (s[1] - 0.375).abs() < 1e-15 && s[2] == 0.0);
        assert_eq!(sparsify(&[0.2, 0.5, 0.3], 1).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(sparsify(&[0.25f64; 4], 4).unwrap(), vec![0.25; 4]);
        assert_eq!(top_k_mask(&[1.0, 1.0, 1.0], 2).unwrap(), vec![true, true, false]);
        assert!(sparsify(&[1.0], 2).is_err());
        assert!(sparsify::<f64>(&[1.0], 0).is_err());
    }

    fn identity_setup(tape: &mut Tape<f64>, text: Vec<f64>, prior: Vec<f64>) -> Stage1 {
        let text_h = tape.var(Tensor::new(vec![2, 2], text).unwrap());
        let prior = tape.var(Tensor::row(prior));
        let regions = tape.var(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let w_v = tape.var(Tensor::identity(2));
        let w_t = tape.var(Tensor::identity(2));
        fuse_stage1(tape, text_h, &[0, 1], prior, regions, w_v, w_t).unwrap()
    }

    #[test]
    fn one_hot_prior_keeps_one_region() {
        let mut tape = Tape::new();
        let s = identity_setup(&mut tape, vec![0.0; 4], vec![0.0, 1.0]);
        let v = tape.value(s.vectors);
        assert_eq!(v.data(), &[0.0, 0.0, 6.0, 8.0]);
    }

    #[test]
    fn stage2_weighting() {
        let mut tape = Tape::new();
        let s = identity_setup(&mut tape, vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 0.5]);
        let uniform = tape.constant(Tensor::column(vec![1.0, 1.0]));
        let z = fuse_stage2(&mut tape, &s, uniform).unwrap();
        let v = tape.value(s.vectors).clone();
        let out = tape.value(z).data().to_vec();
        assert_eq!(out.len(), 4);
        assert!((out[0] - (v.get2(0, 0) + v.get2(1, 0)) / 2.0).abs() < 1e-12);
        let one_hot = tape.constant(Tensor::column(vec![0.0, 3.0]));
        let z = fuse_stage2(&mut tape, &s, one_hot).unwrap();
        assert_eq!(&tape.value(z).data()[..2], v.row_slice(1));
        let neg = tape.constant(Tensor::column(vec![-1.0, 2.0]));
        assert!(fuse_stage2(&mut tape, &s, neg).is_err());
    }
}
