//! Bias-corrected Adam.

use crate::error::{NumericsError, Result};
use crate::params::{Gradients, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, _, t)| Tensor::zeros(t.shape())).collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.len() != params.len() || self.first.len() != params.len() {
            return Err(NumericsError::shape(
                "adam_step",
                format!(
                    "{} parameters, {} gradients, {} moment slots",
                    params.len(),
                    grads.len(),
                    self.first.len()
                ),
            ));
        }
        for id in params.ids() {
            let (p, g) = (params.get(id), grads.get(id));
            if !p.same_shape(g) || !p.same_shape(&self.first[id.index()]) {
                return Err(NumericsError::shape(
                    "adam_step",
                    format!(
                        "parameter {} has shape {:?}, gradient {:?}",
                        params.name(id),
                        p.shape(),
                        g.shape()
                    ),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for id in params.ids() {
            let i = id.index();
            let g = grads.get(id).data();
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            let p = params.get_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        if !params.all_finite() {
            return Err(NumericsError::NonFinite { op: "adam_step" });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row(vec![1.0, -2.0, 0.5])).unwrap();
        let mut grads = Gradients::zeros_like(&store);
        grads.get_mut(id).data_mut().copy_from_slice(&[0.3, -4.0, 1e-3]);
        let mut adam = AdamState::new(&store);
        adam.step(&mut store, &grads, 0.01).unwrap();
        let expect = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01];
        for (a, b) in store.get(id).data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row(vec![1.0, 2.0])).unwrap();
        let grads = Gradients::zeros_like(&store);
        let mut adam = AdamState::new(&store);
        adam.step(&mut store, &grads, 0.1).unwrap();
        assert_eq!(store.get(id).data(), &[1.0, 2.0]);
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let mut store = ParamStore::new();
        let x = store.add("x", Tensor::scalar(0.0)).unwrap();
        let mut adam = AdamState::new(&store);
        for _ in 0..200 {
            let grads = {
                let mut g = Graph::new(&store);
                let xn = g.param(x).unwrap();
                let three = g.constant(Tensor::scalar(3.0)).unwrap();
                let d = g.sub(xn, three).unwrap();
                let l = g.square(d).unwrap();
                g.backward(l).unwrap()
            };
            adam.step(&mut store, &grads, 0.1).unwrap();
        }
        let xv = store.get(x).item().unwrap();
        assert!((xv - 3.0).abs() < 0.05, "x = {xv}");
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::row(vec![1.0])).unwrap();
        let mut other = ParamStore::new();
        other.add("w", Tensor::row(vec![1.0, 2.0])).unwrap();
        let grads = Gradients::zeros_like(&other);
        let mut adam = AdamState::new(&store);
        assert!(adam.step(&mut store, &grads, 0.1).is_err());
    }
}
