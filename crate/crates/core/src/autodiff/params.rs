use std::sync::Arc;

use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// A trainable tensor and its accumulated gradient.
#[derive(Clone, Debug)]
pub struct ComplexParam<T> {
    pub id: ParamId,
    pub name: String,
    pub(crate) value: Arc<ComplexTensor<T>>,
    pub grad: ComplexTensor<T>,
    pub trainable: bool,
    /// Multiplier on the optimizer learning rate for this parameter.
    pub lr_scale: f64,
}

impl<T: Real> ComplexParam<T> {
    pub fn value(&self) -> &ComplexTensor<T> {
        &self.value
    }
}

/// Registry of every parameter of a model, addressed by [`ParamId`].
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<ComplexParam<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: ComplexTensor<T>) -> ParamId {
        let id = ParamId(self.params.len());
        let grad = ComplexTensor::zeros(value.shape());
        self.params.push(ComplexParam {
            id,
            name: name.into(),
            value: Arc::new(value),
            grad,
            trainable: true,
            lr_scale: 1.0,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComplexParam<T>> {
        self.params.iter()
    }

    pub fn param(&self, id: ParamId) -> &ComplexParam<T> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &ComplexTensor<T> {
        &self.params[id.0].value
    }

    pub(crate) fn value_arc(&self, id: ParamId) -> Arc<ComplexTensor<T>> {
        Arc::clone(&self.params[id.0].value)
    }

    pub fn grad(&self, id: ParamId) -> &ComplexTensor<T> {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().find(|p| p.name == name).map(|p| p.id)
    }

    pub fn set_value(&mut self, id: ParamId, value: ComplexTensor<T>) -> Result<()> {
        let p = &mut self.params[id.0];
        if value.shape() != p.value.shape() {
            return Err(Error::Dimension(format!(
                "parameter {} has shape {:?}, got {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = Arc::new(value);
        Ok(())
    }

    pub(crate) fn value_and_grad_mut(&mut self, id: ParamId) -> (&mut ComplexTensor<T>, &ComplexTensor<T>) {
        let p = &mut self.params[id.0];
        (Arc::make_mut(&mut p.value), &p.grad)
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn set_lr_scale(&mut self, id: ParamId, scale: f64) {
        self.params[id.0].lr_scale = scale;
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.params[id.0].trainable
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill_zero();
        }
    }

    pub(crate) fn grad_mut(&mut self, id: ParamId) -> &mut ComplexTensor<T> {
        &mut self.params[id.0].grad
    }

    /// Scale every gradient, e.g. to average an accumulated batch.
    pub fn scale_grads(&mut self, s: T) {
        for p in &mut self.params {
            let (r, i) = p.grad.planes_mut();
            r.iter_mut().chain(i.iter_mut()).for_each(|v| *v *= s);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| 2 * p.value.numel()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_shape_guard() {
        let mut s = ParamStore::<f32>::new();
        let a = s.add("layer.w", ComplexTensor::zeros(&[2, 3]));
        s.add("layer.b", ComplexTensor::zeros(&[2]));
        assert_eq!(s.find("layer.w"), Some(a));
        assert_eq!(s.find("nope"), None);
        assert_eq!(s.num_scalars(), 16);
        assert!(s.set_value(a, ComplexTensor::zeros(&[3, 2])).is_err());
        assert!(s.set_value(a, ComplexTensor::from_fn(&[2, 3], |i| (i as f32, 0.0))).is_ok());
        assert_eq!(s.value(a).re()[5], 5.0);
    }

    #[test]
    fn grads_zero_and_scale() {
        let mut s = ParamStore::<f64>::new();
        let a = s.add("a", ComplexTensor::zeros(&[2]));
        s.grad_mut(a).set(1, (4.0, -2.0));
        s.scale_grads(0.5);
        assert_eq!(s.grad(a).get(1), (2.0, -1.0));
        s.zero_grad();
        assert_eq!(s.grad(a).get(1), (0.0, 0.0));
    }
}
