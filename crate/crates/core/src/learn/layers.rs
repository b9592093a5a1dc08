use rand::Rng;

use super::{ParamId, ParamStore, Tensor2};
use crate::error::{Error, Result};

/// Negative slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Fully connected layer `y = act(x W + b)` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub inputs: usize,
    pub outputs: usize,
}

/// Forward cache of a [`Dense`] layer.
#[derive(Debug, Clone)]
pub struct DenseOut {
    pub input: Tensor2,
    pub pre: Tensor2,
    pub out: Tensor2,
}

impl Dense {
    /// Registers `{name}.weight` and `{name}.bias`, Glorot-uniform weights and zero bias.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = (6.0 / (inputs + outputs).max(1) as f64).sqrt();
        let w: Vec<f64> = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let weight = store.add(format!("{name}.weight"), Tensor2::from_vec(inputs, outputs, w)?)?;
        let bias = store.add(format!("{name}.bias"), Tensor2::zeros(1, outputs))?;
        Ok(Dense {
            weight,
            bias,
            activation,
            inputs,
            outputs,
        })
    }

    /// Binds to existing `{name}.weight` / `{name}.bias` blocks.
    pub fn lookup(store: &ParamStore, name: &str, activation: Activation) -> Result<Self> {
        let weight = store.require(&format!("{name}.weight"))?;
        let bias = store.require(&format!("{name}.bias"))?;
        let (inputs, outputs) = store.param(weight).shape();
        if store.param(bias).shape() != (1, outputs) {
            return Err(Error::config(format!("bias shape mismatch for layer `{name}`")));
        }
        Ok(Dense {
            weight,
            bias,
            activation,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2) -> Result<DenseOut> {
        if x.cols() != self.inputs {
            return Err(Error::config(format!(
                "dense layer `{}` expects width {}, got {}",
                store.name(self.weight),
                self.inputs,
                x.cols()
            )));
        }
        let mut pre = x.matmul(store.param(self.weight))?;
        let b = store.param(self.bias).row(0);
        for i in 0..pre.rows() {
            for (v, bb) in pre.row_mut(i).iter_mut().zip(b) {
                *v += bb;
            }
        }
        let mut out = pre.clone();
        if self.activation != Activation::Identity {
            out.data_mut()
                .iter_mut()
                .for_each(|v| *v = self.activation.apply(*v));
        }
        Ok(DenseOut {
            input: x.clone(),
            pre,
            out,
        })
    }

    /// Accumulates parameter gradients; returns `dL/dx` when `need_input_grad`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &DenseOut,
        d_out: &Tensor2,
        need_input_grad: bool,
    ) -> Option<Tensor2> {
        let mut d_pre = d_out.clone();
        if self.activation != Activation::Identity {
            for ((d, &x), &y) in d_pre
                .data_mut()
                .iter_mut()
                .zip(cache.pre.data())
                .zip(cache.out.data())
            {
                *d *= self.activation.derivative(x, y);
            }
        }
        cache.input.matmul_tn_into(&d_pre, store.grad_mut(self.weight));
        d_pre.sum_rows_into(store.grad_mut(self.bias));
        need_input_grad.then(|| d_pre.matmul_nt(store.param(self.weight)))
    }
}

/// Forward pass of the named dense layer.
pub fn dense_forward(
    store: &ParamStore,
    layer: &str,
    activation: Activation,
    x: &Tensor2,
) -> Result<Tensor2> {
    Ok(Dense::lookup(store, layer, activation)?.forward(store, x)?.out)
}

/// Gated recurrent unit with gate order `[reset, update, candidate]`:
///
/// ```text
/// r  = σ(x Wxr + bxr + h Whr + bhr)
/// z  = σ(x Wxz + bxz + h Whz + bhz)
/// n  = tanh(x Wxn + bxn + r ⊙ (h Whn + bhn))
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub b_input: ParamId,
    pub b_hidden: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct GruOut {
    pub input: Tensor2,
    pub h_prev: Tensor2,
    pub reset: Tensor2,
    pub update: Tensor2,
    pub candidate: Tensor2,
    /// `h Whn + bhn`, needed for the reset-gate gradient.
    pub hidden_cand: Tensor2,
    pub out: Tensor2,
}

impl Gru {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = 1.0 / (hidden as f64).sqrt();
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-limit..limit)).collect()
        };
        let w_input = store.add(
            format!("{name}.w_input"),
            Tensor2::from_vec(inputs, 3 * hidden, uniform(inputs * 3 * hidden))?,
        )?;
        let w_hidden = store.add(
            format!("{name}.w_hidden"),
            Tensor2::from_vec(hidden, 3 * hidden, uniform(hidden * 3 * hidden))?,
        )?;
        let b_input = store.add(format!("{name}.b_input"), Tensor2::zeros(1, 3 * hidden))?;
        let b_hidden = store.add(format!("{name}.b_hidden"), Tensor2::zeros(1, 3 * hidden))?;
        Ok(Gru {
            w_input,
            w_hidden,
            b_input,
            b_hidden,
            inputs,
            hidden,
        })
    }

    pub fn lookup(store: &ParamStore, name: &str) -> Result<Self> {
        let w_input = store.require(&format!("{name}.w_input"))?;
        let w_hidden = store.require(&format!("{name}.w_hidden"))?;
        let b_input = store.require(&format!("{name}.b_input"))?;
        let b_hidden = store.require(&format!("{name}.b_hidden"))?;
        let (inputs, three_h) = store.param(w_input).shape();
        let hidden = three_h / 3;
        if store.param(w_hidden).shape() != (hidden, 3 * hidden) {
            return Err(Error::config(format!("GRU `{name}` hidden weight shape mismatch")));
        }
        Ok(Gru {
            w_input,
            w_hidden,
            b_input,
            b_hidden,
            inputs,
            hidden,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2, h_prev: &Tensor2) -> Result<GruOut> {
        let hdim = self.hidden;
        if x.cols() != self.inputs || h_prev.cols() != hdim || x.rows() != h_prev.rows() {
            return Err(Error::config(format!(
                "GRU expects input width {} and hidden width {hdim}, got {:?} and {:?}",
                self.inputs,
                x.shape(),
                h_prev.shape()
            )));
        }
        let ax = x.matmul(store.param(self.w_input))?;
        let ah = h_prev.matmul(store.param(self.w_hidden))?;
        let bx = store.param(self.b_input).row(0);
        let bh = store.param(self.b_hidden).row(0);
        let batch = x.rows();
        let mut reset = Tensor2::zeros(batch, hdim);
        let mut update = Tensor2::zeros(batch, hdim);
        let mut candidate = Tensor2::zeros(batch, hdim);
        let mut hidden_cand = Tensor2::zeros(batch, hdim);
        let mut out = Tensor2::zeros(batch, hdim);
        for i in 0..batch {
            let axr = ax.row(i);
            let ahr = ah.row(i);
            let hp = h_prev.row(i);
            for k in 0..hdim {
                let r = sigmoid(axr[k] + bx[k] + ahr[k] + bh[k]);
                let z = sigmoid(axr[hdim + k] + bx[hdim + k] + ahr[hdim + k] + bh[hdim + k]);
                let hn = ahr[2 * hdim + k] + bh[2 * hdim + k];
                let n = (axr[2 * hdim + k] + bx[2 * hdim + k] + r * hn).tanh();
                reset.set(i, k, r);
                update.set(i, k, z);
                candidate.set(i, k, n);
                hidden_cand.set(i, k, hn);
                out.set(i, k, (1.0 - z) * n + z * hp[k]);
            }
        }
        Ok(GruOut {
            input: x.clone(),
            h_prev: h_prev.clone(),
            reset,
            update,
            candidate,
            hidden_cand,
            out,
        })
    }

    /// Accumulates parameter gradients and returns `(dL/dx, dL/dh_prev)`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &GruOut,
        d_out: &Tensor2,
        need_input_grad: bool,
    ) -> (Option<Tensor2>, Tensor2) {
        let hdim = self.hidden;
        let batch = d_out.rows();
        let mut d_ax = Tensor2::zeros(batch, 3 * hdim);
        let mut d_ah = Tensor2::zeros(batch, 3 * hdim);
        let mut dh_direct = Tensor2::zeros(batch, hdim);
        for i in 0..batch {
            for k in 0..hdim {
                let dh = d_out.get(i, k);
                let r = cache.reset.get(i, k);
                let z = cache.update.get(i, k);
                let n = cache.candidate.get(i, k);
                let hp = cache.h_prev.get(i, k);
                let hn = cache.hidden_cand.get(i, k);
                let dn = dh * (1.0 - z);
                let dz = dh * (hp - n);
                dh_direct.set(i, k, dh * z);
                let dan = dn * (1.0 - n * n);
                let dr = dan * hn;
                let dar = dr * r * (1.0 - r);
                let daz = dz * z * (1.0 - z);
                d_ax.set(i, k, dar);
                d_ax.set(i, hdim + k, daz);
                d_ax.set(i, 2 * hdim + k, dan);
                d_ah.set(i, k, dar);
                d_ah.set(i, hdim + k, daz);
                d_ah.set(i, 2 * hdim + k, dan * r);
            }
        }
        cache.input.matmul_tn_into(&d_ax, store.grad_mut(self.w_input));
        d_ax.sum_rows_into(store.grad_mut(self.b_input));
        cache.h_prev.matmul_tn_into(&d_ah, store.grad_mut(self.w_hidden));
        d_ah.sum_rows_into(store.grad_mut(self.b_hidden));
        let mut dh_prev = d_ah.matmul_nt(store.param(self.w_hidden));
        dh_prev.add_assign(&dh_direct);
        let dx = need_input_grad.then(|| d_ax.matmul_nt(store.param(self.w_input)));
        (dx, dh_prev)
    }
}

/// One step of the named GRU cell.
pub fn gru_step(store: &ParamStore, cell: &str, x: &Tensor2, h_prev: &Tensor2) -> Result<Tensor2> {
    Ok(Gru::lookup(store, cell)?.forward(store, x, h_prev)?.out)
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &Tensor2) -> Tensor2 {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Row-wise log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

/// Shannon entropy (nats) of a categorical distribution.
pub fn categorical_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}
