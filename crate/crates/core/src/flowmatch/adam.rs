use crate::autodiff::Tensor;
use crate::models::ParamStore;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one tensor per parameter in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(params: &mut ParamStore, grads: &[Tensor], state: &mut AdamState, lr: f64) {
    assert_eq!(grads.len(), params.len(), "one gradient per parameter");
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, g), m), v) in params
        .tensors_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..pd.len() {
            let gi = g.data()[i];
            md[i] = BETA1 * md[i] + (1.0 - BETA1) * gi;
            vd[i] = BETA2 * vd[i] + (1.0 - BETA2) * gi * gi;
            let mhat = md[i] / c1;
            let vhat = vd[i] / c2;
            pd[i] -= lr * mhat / (vhat.sqrt() + EPSILON);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: Vec<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        s.register("p", Tensor::row(values));
        s
    }

    #[test]
    fn zero_gradient_leaves_params_and_moments() {
        let mut p = store(vec![1.5, -0.5]);
        let mut st = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &[Tensor::zeros(&[1, 2])], &mut st, 0.1);
        }
        assert_eq!(p.by_name("p").unwrap().data(), &[1.5, -0.5]);
        assert!(st.m[0].data().iter().chain(st.v[0].data()).all(|&x| x == 0.0));
    }

    #[test]
    fn first_step_is_learning_rate() {
        let mut p = store(vec![0.0]);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::row(vec![1.0])], &mut st, 0.1);
        assert!((p.by_name("p").unwrap().data()[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn three_step_trace() {
        // independent hand trace of the textbook recurrences
        let expected = [
            [0.9900000002, -1.9900000001],
            [0.9810142483902928, -1.9857215142429225],
            [0.9792514598208205, -1.9869850478877318],
        ];
        let grads = [[0.5, -1.0], [0.2, 0.3], [-0.4, 0.8]];
        let mut p = store(vec![1.0, -2.0]);
        let mut st = AdamState::new(&p);
        for (g, e) in grads.iter().zip(expected) {
            adam_step(&mut p, &[Tensor::row(g.to_vec())], &mut st, 0.01);
            let d = p.by_name("p").unwrap().data();
            assert!((d[0] - e[0]).abs() < 1e-12 && (d[1] - e[1]).abs() < 1e-12, "{d:?} vs {e:?}");
        }
    }
}
