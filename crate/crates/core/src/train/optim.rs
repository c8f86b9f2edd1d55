use std::collections::BTreeMap;
use std::fmt;

use crate::nn::ParamSlot;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub learning_rate: f64,
    pub weight_decay: f64,
}

/// Updates a fixed list of parameters in place. The list must be presented
/// in the same order on every step.
pub trait Optimizer: Send + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn settings(&self) -> OptimizerSettings;

    /// Applies one update, then zeroes every gradient. Fails without touching
    /// anything if some parameter has no gradient since the last step.
    fn step(&mut self, params: &mut [ParamSlot<'_>]) -> Result<()>;
}

fn check_populated(params: &[ParamSlot<'_>]) -> Result<()> {
    match params.iter().find(|p| !*p.populated) {
        Some(p) => Err(Error::InvalidState(format!(
            "optimizer step without a gradient for '{}'",
            p.name
        ))),
        None => Ok(()),
    }
}

/// Plain gradient descent with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Sgd {
    settings: OptimizerSettings,
}

impl Sgd {
    pub fn new(settings: OptimizerSettings) -> Self {
        Self { settings }
    }
}

impl Optimizer for Sgd {
    fn kind(&self) -> &'static str {
        "sgd"
    }

    fn settings(&self) -> OptimizerSettings {
        self.settings
    }

    fn step(&mut self, params: &mut [ParamSlot<'_>]) -> Result<()> {
        check_populated(params)?;
        let OptimizerSettings {
            learning_rate: lr,
            weight_decay: wd,
        } = self.settings;
        for p in params.iter_mut() {
            for (w, g) in p.value.iter_mut().zip(p.grad.iter()) {
                *w -= lr * (g + wd * *w);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam with bias correction and decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    settings: OptimizerSettings,
    t: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(settings: OptimizerSettings) -> Self {
        Self {
            settings,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

impl Optimizer for Adam {
    fn kind(&self) -> &'static str {
        "adam"
    }

    fn settings(&self) -> OptimizerSettings {
        self.settings
    }

    fn step(&mut self, params: &mut [ParamSlot<'_>]) -> Result<()> {
        check_populated(params)?;
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![0.0; p.value.len()], vec![0.0; p.value.len()]))
                .collect();
        }
        if self.moments.len() != params.len()
            || self.moments.iter().zip(params.iter()).any(|(m, p)| m.0.len() != p.value.len())
        {
            return Err(Error::InvalidState("parameter layout changed between optimizer steps".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let OptimizerSettings {
            learning_rate: lr,
            weight_decay: wd,
        } = self.settings;
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.value[i] -= lr * (m_hat / (v_hat.sqrt() + ADAM_EPSILON) + wd * p.value[i]);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

pub type OptimizerFactory = fn(OptimizerSettings) -> Box<dyn Optimizer>;

/// Name → constructor table for optimizers.
pub struct OptimizerRegistry {
    factories: BTreeMap<&'static str, OptimizerFactory>,
}

impl OptimizerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: OptimizerFactory) -> &mut Self {
        self.factories.insert(name, factory);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, settings: OptimizerSettings) -> Result<Box<dyn Optimizer>> {
        if !(settings.learning_rate > 0.0 && settings.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                settings.learning_rate
            )));
        }
        if !(settings.weight_decay >= 0.0 && settings.weight_decay.is_finite()) {
            return Err(Error::invalid(format!(
                "weight decay must be ≥ 0, got {}",
                settings.weight_decay
            )));
        }
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::invalid(format!("unknown optimizer '{name}' (known: {})", self.names().join(", ")))
        })?;
        Ok(factory(settings))
    }
}

impl Default for OptimizerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("adam", |s| Box::new(Adam::new(s)))
            .register("sgd", |s| Box::new(Sgd::new(s)));
        r
    }
}
