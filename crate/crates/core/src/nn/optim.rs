use super::params::ParamStore;
use super::tensor::Tensor;
use crate::scalar::Scalar;

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(store: &ParamStore<T>, lr: f64) -> Self {
        let zeros: Vec<Tensor<T>> = store
            .ids()
            .map(|id| {
                let (r, c) = store.get(id).shape();
                Tensor::zeros(r, c)
            })
            .collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Tensor<T>]) {
        assert_eq!(grads.len(), store.len(), "one gradient per parameter");
        self.step += 1;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let c1 = T::one() - T::lit(self.beta1.powi(self.step));
        let c2 = T::one() - T::lit(self.beta2.powi(self.step));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = store.get_mut(id).data_mut();
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut store = ParamStore::<f64>::new();
        store.add("w", Tensor::row_vector(vec![1.0, -2.0]));
        let before = store.clone();
        let mut adam = Adam::new(&store, 0.0);
        adam.step(&mut store, &[Tensor::row_vector(vec![0.5, 0.5])]);
        assert_eq!(store.get(store.id("w").unwrap()), before.get(before.id("w").unwrap()));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::scalar(1.0));
        let mut adam = Adam::new(&store, 0.1);
        adam.step(&mut store, &[Tensor::scalar(3.0)]);
        assert!((store.get(w).get(0, 0) - 0.9).abs() < 1e-6);
    }
}
