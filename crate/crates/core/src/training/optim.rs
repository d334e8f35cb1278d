use crate::autodiff::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// `v ← μv − lr·g; θ ← θ + v`, elementwise.
pub fn sgd_momentum_update(theta: &mut [f64], velocity: &mut [f64], grad: &[f64], lr: f64, mu: f64) {
    debug_assert!(theta.len() == velocity.len() && theta.len() == grad.len());
    for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = mu * *v - lr * g;
        *t += *v;
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// One bias-corrected Adam update; `step` is the 1-based count of updates
/// this parameter has received, this one included.
pub fn adam_update(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    grad: &[f64],
    lr: f64,
) {
    let c1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(step as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// Updates the parameters a gradient reached; the others are left alone,
/// slots included.
pub trait Optimizer {
    fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()>;
}

fn slot(slots: &mut Vec<Option<Vec<f64>>>, index: usize, len: usize) -> Result<&mut Vec<f64>> {
    if slots.len() <= index {
        slots.resize(index + 1, None);
    }
    let s = slots[index].get_or_insert_with(|| vec![0.0; len]);
    if s.len() != len {
        return Err(Error::Shape {
            op: "optimizer",
            detail: format!("slot of {} values for a parameter of {len}", s.len()),
        });
    }
    Ok(s)
}

fn check_grad(store: &ParamStore, grads: &Gradients, id: crate::autodiff::ParamId) -> Result<()> {
    if store.get(id).shape() != grads.get(id).shape() {
        return Err(Error::Shape {
            op: "optimizer",
            detail: format!(
                "{}: parameter {:?} vs gradient {:?}",
                store.name(id),
                store.get(id).shape(),
                grads.get(id).shape()
            ),
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SgdMomentum {
    pub momentum: f64,
    velocity: Vec<Option<Vec<f64>>>,
}

impl SgdMomentum {
    pub fn new(momentum: f64) -> Self {
        SgdMomentum {
            momentum,
            velocity: Vec::new(),
        }
    }
}

impl Optimizer for SgdMomentum {
    fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        for id in grads.reached() {
            check_grad(store, grads, id)?;
            let v = slot(&mut self.velocity, id.index(), store.get(id).len())?;
            sgd_momentum_update(store.get_mut(id).data_mut(), v, grads.get(id).data(), lr, self.momentum);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Adam {
    m: Vec<Option<Vec<f64>>>,
    v: Vec<Option<Vec<f64>>>,
    steps: Vec<u64>,
}

impl Adam {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Optimizer for Adam {
    fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        for id in grads.reached() {
            check_grad(store, grads, id)?;
            let len = store.get(id).len();
            let i = id.index();
            if self.steps.len() <= i {
                self.steps.resize(i + 1, 0);
            }
            self.steps[i] += 1;
            let m = slot(&mut self.m, i, len)?;
            let v = slot(&mut self.v, i, len)?;
            adam_update(store.get_mut(id).data_mut(), m, v, self.steps[i], grads.get(id).data(), lr);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn build(self, momentum: f64) -> Box<dyn Optimizer> {
        match self {
            OptimizerKind::Sgd => Box::new(SgdMomentum::new(momentum)),
            OptimizerKind::Adam => Box::new(Adam::new()),
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}
