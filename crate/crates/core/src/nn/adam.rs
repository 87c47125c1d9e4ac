//! Adam with bias correction, one state over an ordered parameter group.
//!
//! One `AdamState` covers every parameter of a group (all generators, or all
//! discriminators): the step counter is shared, moments are per-parameter,
//! and the parameter ordering is the group's canonical traversal order so
//! that optimizer state survives checkpointing.

use ndarray::ArrayD;

use super::Param;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of steps taken so far.
    pub t: u64,
    pub m: Vec<ArrayD<f64>>,
    pub v: Vec<ArrayD<f64>>,
}

impl AdamState {
    pub fn new(params: &[&Param], beta1: f64, beta2: f64) -> AdamState {
        AdamState {
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: params.iter().map(|p| ArrayD::zeros(p.value.raw_dim())).collect(),
            v: params.iter().map(|p| ArrayD::zeros(p.value.raw_dim())).collect(),
        }
    }

    /// One update over the whole group from the accumulated gradients.
    /// Parameter order must match the order used at construction.
    pub fn step(&mut self, params: Vec<&mut Param>, lr: f64) {
        assert_eq!(params.len(), self.m.len(), "optimizer/parameter group mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.into_iter().enumerate() {
            assert_eq!(p.value.raw_dim(), self.m[i].raw_dim(), "optimizer slot {i} shape");
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|pv, &g, mv, vv| {
                    *mv = self.beta1 * *mv + (1.0 - self.beta1) * g;
                    *vv = self.beta2 * *vv + (1.0 - self.beta2) * g * g;
                    let mhat = *mv / bc1;
                    let vhat = *vv / bc2;
                    *pv -= lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }
}
