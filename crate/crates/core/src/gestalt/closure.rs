use crate::error::{Error, Result};
use crate::gestalt::contour::BinaryMap;
use crate::gestalt::proximity::normalize_or_uniform;
use crate::numeric::{Tape, Tensor, Var};
use crate::region::RegionGraph;
use crate::scalar::Scalar;

/// `1 - IoU`; two empty masks give 0, exactly one empty gives 1.
pub fn mask_loss(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("mask sizes {} and {}", a.len(), b.len())));
    }
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    Ok(if union == 0 { 0.0 } else { 1.0 - inter as f64 / union as f64 })
}

/// Binarizes a prior map at `theta * max` and compares it with `mask`.
pub fn closure_loss<T: Scalar>(prior_map: &[T], mask: &[bool], theta: f64) -> Result<f64> {
    mask_loss(&binarize(prior_map, theta), mask)
}

pub fn binarize<T: Scalar>(map: &[T], theta: f64) -> Vec<bool> {
    let max = map.iter().fold(T::zero(), |m, &v| m.max(v));
    if max <= T::zero() {
        return vec![false; map.len()];
    }
    let cut = max * T::lit(theta);
    map.iter().map(|&v| v > T::zero() && v >= cut).collect()
}

/// Soft surrogate `1 - sum(min) / sum(max)`; 0 when both maps are zero.
pub fn soft_iou_loss<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("map sizes {} and {}", a.len(), b.len())));
    }
    let lo: T = a.iter().zip(b).map(|(&x, &y)| x.min(y)).sum();
    let hi: T = a.iter().zip(b).map(|(&x, &y)| x.max(y)).sum();
    Ok(if hi == T::zero() { T::zero() } else { T::one() - lo / hi })
}

/// Differentiable soft-IoU loss between two same-shaped nodes.
pub fn soft_iou_loss_tape<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    let lo = tape.minimum(a, b)?;
    let hi = tape.maximum(a, b)?;
    let lo = tape.sum(lo);
    let hi = tape.sum(hi);
    let hi = tape.add_scalar(hi, T::lit(1e-12));
    let ratio = tape.div(lo, hi)?;
    let neg = tape.scale(ratio, -T::one());
    Ok(tape.add_scalar(neg, T::one()))
}

/// Soft-IoU between the rasterized region prior (rescaled so its peak is 1)
/// and an object mask, computed from per-region pixel counts. `weights` is
/// a `[1, R]` node; `inside[i]` / `outside[i]` count region pixels in and
/// out of the mask.
pub fn region_soft_iou_tape<T: Scalar>(
    tape: &mut Tape<T>,
    weights: Var,
    inside: &[usize],
    outside: &[usize],
) -> Result<Var> {
    let n = tape.value(weights).numel();
    if inside.len() != n || outside.len() != n {
        return Err(Error::shape("region counts do not match prior length"));
    }
    let peak = tape.max_all(weights)?;
    let peak = tape.add_scalar(peak, T::lit(1e-12));
    let inv = tape.recip(peak);
    let s = tape.mul_scalar(weights, inv)?;
    let shape = tape.value(weights).shape().to_vec();
    let a_in = tape.constant(Tensor::new(shape.clone(), inside.iter().map(|&c| T::from_usize_lossy(c)).collect())?);
    let a_out = tape.constant(Tensor::new(shape, outside.iter().map(|&c| T::from_usize_lossy(c)).collect())?);
    let lo = tape.mul(s, a_in)?;
    let lo = tape.sum(lo);
    let hi = tape.mul(s, a_out)?;
    let hi = tape.sum(hi);
    let total_in = T::from_usize_lossy(inside.iter().sum());
    let hi = tape.add_scalar(hi, total_in + T::lit(1e-12));
    let ratio = tape.div(lo, hi)?;
    let neg = tape.scale(ratio, -T::one());
    Ok(tape.add_scalar(neg, T::one()))
}

/// Per-pixel map holding each pixel's region weight.
pub fn rasterize_prior<T: Scalar>(graph: &RegionGraph<T>, weights: &[T]) -> Result<Vec<T>> {
    if weights.len() != graph.len() {
        return Err(Error::invalid(format!("{} weights for {} regions", weights.len(), graph.len())));
    }
    Ok(graph.labels().iter().map(|&l| weights[l]).collect())
}

/// Fraction of each region lying inside `fill`, normalized over regions.
pub fn closure_layer<T: Scalar>(graph: &RegionGraph<T>, fill: &BinaryMap) -> Result<Vec<T>> {
    if fill.width != graph.width() || fill.height != graph.height() {
        return Err(Error::shape("fill map size differs from the graph's image"));
    }
    let raw = graph
        .regions()
        .iter()
        .map(|r| {
            let inside = r.pixels.iter().filter(|&&(x, y)| fill.get(x, y)).count();
            T::from_usize_lossy(inside) / T::from_usize_lossy(r.area())
        })
        .collect();
    Ok(normalize_or_uniform(raw))
}
