use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numeric::{Gradients, Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor<T>>>,
}

/// Parameters recorded on one tape, in store order.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, id: usize) -> Var {
        self.vars[id]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn add(&mut self, name: &str, value: Tensor<T>) -> Result<usize> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        self.names.push(name.to_string());
        self.tensors.push(Arc::new(value));
        Ok(self.tensors.len() - 1)
    }

    /// Gaussian init scaled by `1/sqrt(fan_in)`.
    pub fn add_random(&mut self, name: &str, shape: &[usize], rng: &mut ChaCha8Rng) -> Result<usize> {
        let fan_in = shape.first().copied().unwrap_or(1).max(1) as f64;
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal) / fan_in.sqrt())).collect();
        self.add(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> Result<usize> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::not_found(format!("parameter {name}")))
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: usize) -> &Tensor<T> {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.tensors[id])
    }

    pub fn set(&mut self, id: usize, value: Tensor<T>) -> Result<()> {
        self.tensors[id].same_shape(&value)?;
        self.tensors[id] = Arc::new(value);
        Ok(())
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.tensors.iter().map(|t| t.shape().to_vec()).collect()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        Bound { vars: self.tensors.iter().map(|t| tape.param(Arc::clone(t))).collect() }
    }

    /// Gradient per parameter, zeros where the loss does not depend on it.
    pub fn collect_grads(&self, bound: &Bound, grads: &Gradients<T>) -> Vec<Tensor<T>> {
        bound.vars.iter().zip(&self.tensors).map(|(&v, t)| grads.get_or_zeros(v, t)).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors.iter_mut().map(Arc::make_mut).collect()
    }

    /// All parameters flattened in store order.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Inverse of [`ParamStore::flatten`].
    pub fn unflatten(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.count() {
            return Err(Error::shape(format!("{} values for {} parameters", flat.len(), self.count())));
        }
        let mut at = 0;
        for t in self.tensors.iter_mut() {
            let n = t.numel();
            Arc::make_mut(t).data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }
}

/// Seeded generator for parameter initialization.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_round_trip() {
        let mut p = ParamStore::<f64>::new();
        let mut rng = init_rng(1);
        p.add_random("a", &[2, 3], &mut rng).unwrap();
        p.add_zeros("b", &[1, 3]).unwrap();
        assert!(p.add_zeros("a", &[1]).is_err());
        let flat = p.flatten();
        assert_eq!(flat.len(), 9);
        let mut q = p.clone();
        q.unflatten(&vec![0.0; 9]).unwrap();
        q.unflatten(&flat).unwrap();
        assert_eq!(q.flatten(), flat);
        assert_eq!(p.id("b").unwrap(), 1);
    }
}
