use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    assert_eq!(
        params.len(),
        state.m.len(),
        "optimizer state built for a different parameter set"
    );
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        assert_eq!(p.shape(), g.shape(), "gradient shape for parameter {i}");
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (w, gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Graph;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap()];
        let before = params.clone();
        let mut state = AdamState::new(&params);
        let zeros = vec![Tensor::zeros(&[3])];
        for _ in 0..10 {
            adam_step(&mut params, &zeros, &mut state, &AdamConfig::default());
        }
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = vec![Tensor::new(vec![2], vec![1.0, 1.0]).unwrap()];
        let mut state = AdamState::new(&params);
        let g = vec![Tensor::new(vec![2], vec![0.3, -7.0]).unwrap()];
        let cfg = AdamConfig {
            lr: 0.01,
            ..Default::default()
        };
        adam_step(&mut params, &g, &mut state, &cfg);
        assert!((params[0].data()[0] - (1.0 - 0.01)).abs() < 1e-9);
        assert!((params[0].data()[1] - (1.0 + 0.01)).abs() < 1e-9);
    }

    #[test]
    fn quadratic_bowl_descends() {
        let target = Tensor::new(vec![4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let mut params = vec![Tensor::zeros(&[4])];
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig {
            lr: 1e-2,
            ..Default::default()
        };
        let loss_at = |p: &Tensor| -> (f64, Tensor) {
            let mut g = Graph::new();
            let x = g.param(p.clone());
            let c = g.constant(target.clone());
            let d = g.sub(x, c).unwrap();
            let sq = g.mul(d, d).unwrap();
            let l = g.sum(sq);
            let grads = g.backward(l).unwrap();
            (g.value(l).data()[0], grads.get(x).unwrap().clone())
        };
        let (initial, _) = loss_at(&params[0]);
        for _ in 0..500 {
            let (_, grad) = loss_at(&params[0]);
            adam_step(&mut params, &[grad], &mut state, &cfg);
        }
        let (last, _) = loss_at(&params[0]);
        assert!(last <= 0.01 * initial, "{initial} -> {last}");
    }
}
