//! Float interpreter for loss programs, generic over the scalar type so
//! the same code yields values (`f64`) and weight gradients (`Dual`).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Domain, Logic, LossError, LossProgram, LossTerm};
use crate::network::Network;
use crate::rational::to_f64;
use crate::scalar::{Dual, Scalar};

/// Bindings for a program's resource slots. Datasets are row-major.
#[derive(Clone, Debug, Default)]
pub struct Resources<'a> {
    pub networks: BTreeMap<String, &'a Network>,
    pub datasets: BTreeMap<String, Vec<f64>>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossGradient {
    pub value: f64,
    /// Per network, in [`Network::params_f64`] order.
    pub grads: BTreeMap<String, Vec<f64>>,
    /// Smallest distance to a non-differentiable point seen (ReLU
    /// pre-activations, max/min operand gaps, indicator gaps).
    pub kink_margin: f64,
}

/// Sample `index` of quantifier node `node`: uniform on the box, drawn
/// from a ChaCha8 stream selected by `(seed, node)` at a position fixed by
/// `index`, so any sample can be regenerated on its own.
pub fn sample_point(seed: u64, node: usize, index: usize, domain: &Domain) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng.set_word_pos((index as u128) * (domain.lo.len() as u128) * 2);
    domain
        .lo
        .iter()
        .zip(&domain.hi)
        .map(|(l, h)| {
            let (l, h) = (to_f64(l), to_f64(h));
            l + (h - l) * rng.gen::<f64>()
        })
        .collect()
}

fn check_resources(lp: &LossProgram, res: &Resources) -> Result<(), LossError> {
    for slot in &lp.networks {
        let net = res.networks.get(&slot.name).ok_or_else(|| LossError::MissingResource { what: format!("network `{}`", slot.name) })?;
        let actual = alloc::vec![net.input_dim(), net.output_dim()];
        if actual != slot.dims {
            return Err(LossError::Shape { what: format!("network `{}`", slot.name), expected: slot.dims.clone(), actual });
        }
    }
    for slot in &lp.datasets {
        let data = res.datasets.get(&slot.name).ok_or_else(|| LossError::MissingResource { what: format!("dataset `{}`", slot.name) })?;
        if data.len() != slot.dims.iter().product::<usize>() {
            return Err(LossError::Shape { what: format!("dataset `{}`", slot.name), expected: slot.dims.clone(), actual: alloc::vec![data.len()] });
        }
    }
    for p in &lp.parameters {
        if !res.params.contains_key(p) {
            return Err(LossError::MissingResource { what: format!("parameter `{p}`") });
        }
    }
    Ok(())
}

struct Interp<'a, T> {
    lp: &'a LossProgram,
    res: &'a Resources<'a>,
    weights: &'a BTreeMap<String, Vec<T>>,
    seed: u64,
    samples: usize,
    kink: f64,
}

impl<T: Scalar> Interp<'_, T> {
    fn note(&mut self, gap: f64) {
        self.kink = self.kink.min(libm::fabs(gap));
    }

    fn and(&self, s: &T, t: &T) -> T {
        let one = T::constant(1.0);
        let zero = T::constant(0.0);
        match &self.lp.logic {
            Logic::Dl2 => s.add(t),
            Logic::Godel => s.min(t),
            Logic::Lukasiewicz => zero.max(&s.add(t).sub(&one)),
            Logic::Product => s.mul(t),
            Logic::Yager(p) => {
                let p = to_f64(p);
                let sum = one.sub(s).powf(p).add(&one.sub(t).powf(p));
                zero.max(&one.sub(&sum.powf(1.0 / p)))
            }
        }
    }

    fn or(&self, s: &T, t: &T) -> T {
        let one = T::constant(1.0);
        match &self.lp.logic {
            Logic::Dl2 => s.mul(t),
            Logic::Godel => s.max(t),
            Logic::Lukasiewicz => one.min(&s.add(t)),
            Logic::Product => s.add(t).sub(&s.mul(t)),
            Logic::Yager(p) => {
                let p = to_f64(p);
                one.min(&s.powf(p).add(&t.powf(p)).powf(1.0 / p))
            }
        }
    }

    fn eval(&mut self, t: &LossTerm, env: &mut BTreeMap<usize, Vec<T>>) -> Result<T, LossError> {
        Ok(match t {
            LossTerm::Const(q) => T::constant(to_f64(q)),
            LossTerm::Var { var, offset } => env
                .get(var)
                .and_then(|v| v.get(*offset))
                .cloned()
                .ok_or_else(|| LossError::Unsupported { what: format!("free variable #{var}") })?,
            LossTerm::Param(p) => T::constant(
                *self.res.params.get(p).ok_or_else(|| LossError::MissingResource { what: format!("parameter `{p}`") })?,
            ),
            LossTerm::Data { name, offset } => T::constant(
                *self
                    .res
                    .datasets
                    .get(name)
                    .and_then(|d| d.get(*offset))
                    .ok_or_else(|| LossError::MissingResource { what: format!("dataset `{name}`") })?,
            ),
            LossTerm::NetworkApply { network, inputs, output } => {
                let net = *self
                    .res
                    .networks
                    .get(network)
                    .ok_or_else(|| LossError::MissingResource { what: format!("network `{network}`") })?;
                let xs = inputs.iter().map(|i| self.eval(i, env)).collect::<Result<Vec<_>, _>>()?;
                let w = self
                    .weights
                    .get(network)
                    .ok_or_else(|| LossError::MissingResource { what: format!("weights of `{network}`") })?;
                let ys = net.eval_with(w, &xs, &mut self.kink)?;
                ys.get(*output).cloned().ok_or_else(|| LossError::Shape {
                    what: format!("network `{network}`"),
                    expected: alloc::vec![*output + 1],
                    actual: alloc::vec![ys.len()],
                })?
            }
            LossTerm::Add(a, b) => self.eval(a, env)?.add(&self.eval(b, env)?),
            LossTerm::Sub(a, b) => self.eval(a, env)?.sub(&self.eval(b, env)?),
            LossTerm::Mul(a, b) => self.eval(a, env)?.mul(&self.eval(b, env)?),
            LossTerm::Div(a, b) => self.eval(a, env)?.div(&self.eval(b, env)?),
            LossTerm::Max(a, b) => {
                let (x, y) = (self.eval(a, env)?, self.eval(b, env)?);
                self.note(x.value() - y.value());
                x.max(&y)
            }
            LossTerm::Min(a, b) => {
                let (x, y) = (self.eval(a, env)?, self.eval(b, env)?);
                self.note(x.value() - y.value());
                x.min(&y)
            }
            LossTerm::Pow(a, p) => self.eval(a, env)?.powf(to_f64(p)),
            LossTerm::Indicator(a, b) => {
                let (x, y) = (self.eval(a, env)?, self.eval(b, env)?);
                self.note(x.value() - y.value());
                T::constant(if x.value() == y.value() { 1.0 } else { 0.0 })
            }
            LossTerm::SampleForall { id, var, domain, body } | LossTerm::SampleExists { id, var, domain, body } => {
                let forall = matches!(t, LossTerm::SampleForall { .. });
                let mut acc: Option<T> = None;
                for i in 0..self.samples {
                    let point = sample_point(self.seed, *id, i, domain);
                    env.insert(var.id, point.into_iter().map(T::constant).collect());
                    let v = self.eval(body, env)?;
                    acc = Some(match acc {
                        None => v,
                        Some(a) => match (&self.lp.logic, forall) {
                            (Logic::Dl2, true) => a.add(&v),
                            (Logic::Dl2, false) => {
                                self.note(a.value() - v.value());
                                a.min(&v)
                            }
                            (_, true) => self.and(&a, &v),
                            (_, false) => self.or(&a, &v),
                        },
                    });
                }
                env.remove(&var.id);
                let acc = acc.expect("at least one sample");
                if forall && self.lp.logic == Logic::Dl2 {
                    acc.div(&T::constant(self.samples as f64))
                } else {
                    acc
                }
            }
        })
    }
}

/// Loss with the given network weights. `kink` is lowered to the smallest
/// distance to a non-differentiable point met during evaluation.
pub fn eval_loss_with<T: Scalar>(
    lp: &LossProgram,
    res: &Resources,
    weights: &BTreeMap<String, Vec<T>>,
    seed: u64,
    samples: usize,
    kink: &mut f64,
) -> Result<T, LossError> {
    if samples == 0 {
        return Err(LossError::NoSamples);
    }
    check_resources(lp, res)?;
    let mut it = Interp { lp, res, weights, seed, samples, kink: *kink };
    let v = it.eval(&lp.root, &mut BTreeMap::new())?;
    *kink = it.kink;
    Ok(v)
}

fn float_weights(res: &Resources) -> BTreeMap<String, Vec<f64>> {
    res.networks.iter().map(|(n, net)| (n.clone(), net.params_f64())).collect()
}

/// Loss with the networks' own weights.
pub fn eval_loss(lp: &LossProgram, res: &Resources, seed: u64, samples: usize) -> Result<f64, LossError> {
    let mut kink = f64::INFINITY;
    eval_loss_with(lp, res, &float_weights(res), seed, samples, &mut kink)
}

/// Loss and its gradient with respect to every weight of every bound
/// network, by forward-mode differentiation. At ties the left operand of
/// `max`/`min` is taken.
pub fn grad_loss(lp: &LossProgram, res: &Resources, seed: u64, samples: usize) -> Result<LossGradient, LossError> {
    let flat = float_weights(res);
    let total: usize = flat.values().map(Vec::len).sum();
    let mut at = 0;
    let mut duals: BTreeMap<String, Vec<Dual>> = BTreeMap::new();
    for (name, ws) in &flat {
        let v = ws.iter().enumerate().map(|(i, &w)| Dual::variable(w, at + i, total)).collect();
        duals.insert(name.clone(), v);
        at += ws.len();
    }
    let mut kink = f64::INFINITY;
    let out = eval_loss_with(lp, res, &duals, seed, samples, &mut kink)?;
    let mut grads = BTreeMap::new();
    let mut at = 0;
    for (name, ws) in &flat {
        grads.insert(name.clone(), (0..ws.len()).map(|i| out.d(at + i)).collect());
        at += ws.len();
    }
    Ok(LossGradient { value: out.value, grads, kink_margin: kink })
}
