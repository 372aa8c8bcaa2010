//! Parameterized layers: dense, GRU cell, LSTM cell, two-layer MLP, and
//! the per-head attention scorer. Layers hold [`ParamId`]s into a shared
//! [`ParamSet`]; forward passes record onto a [`Graph`].

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamSet};
use crate::rng::Rng;
use crate::tensor::Tensor;
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    XavierUniform,
    Orthogonal,
    Zeros,
}

impl InitScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "xavier-uniform" => Ok(InitScheme::XavierUniform),
            "orthogonal" => Ok(InitScheme::Orthogonal),
            "zeros" => Ok(InitScheme::Zeros),
            other => Err(Error::config(format!("unknown init scheme {other:?}"))),
        }
    }
}

/// Deterministic parameter initialization given (scheme, shape, seed).
pub fn init_params(shape: &[usize], scheme: InitScheme, rng: &mut Rng) -> Result<Tensor> {
    let numel: usize = shape.iter().product();
    match scheme {
        InitScheme::Zeros => Ok(Tensor::zeros(shape.to_vec())),
        InitScheme::XavierUniform => {
            let (fan_in, fan_out) = match shape {
                [n] => (*n, *n),
                [out, inp] => (*inp, *out),
                s => {
                    return Err(Error::config(format!(
                        "xavier-uniform expects rank 1 or 2, got {s:?}"
                    )))
                }
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..numel).map(|_| rng.gen_range(-limit..limit)).collect();
            Tensor::new(shape.to_vec(), data)
        }
        InitScheme::Orthogonal => {
            let [rows, cols] = shape else {
                return Err(Error::config(format!(
                    "orthogonal init expects rank 2, got {shape:?}"
                )));
            };
            Ok(orthogonal(*rows, *cols, rng))
        }
    }
}

/// Rows×cols matrix with orthonormal rows (cols ≥ rows) or columns
/// (rows ≥ cols): QR of a Gaussian matrix with the sign fix that makes
/// the decomposition unique.
fn orthogonal(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    use rand_distr::{Distribution, StandardNormal};
    let n = rows.max(cols);
    let m = rows.min(cols);
    let gauss = nalgebra::DMatrix::from_fn(n, m, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v
    });
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let mut data = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            data[i * cols + j] = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
        }
    }
    Tensor::from_parts(vec![rows, cols], data)
}

/// Fully connected layer: activation(Wx + b).
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let w = params.register(
            format!("{name}.w"),
            init_params(&[out_dim, in_dim], InitScheme::XavierUniform, rng)?,
        );
        let b = params.register(format!("{name}.b"), Tensor::zeros(vec![out_dim]));
        Ok(Dense { w, b, activation, in_dim, out_dim })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let n = g.value(x).vector_len()?;
        if n != self.in_dim {
            return Err(Error::shape(format!(
                "dense expects input of length {}, got {n}",
                self.in_dim
            )));
        }
        let w = g.param(self.w);
        let b = g.param(self.b);
        let h = g.matvec(w, x)?;
        let h = g.add(h, b)?;
        match self.activation {
            Activation::Identity => Ok(h),
            Activation::Tanh => g.tanh(h),
            Activation::Relu => g.relu(h),
        }
    }
}

/// Two dense layers; the attention scorer and the memory decoder use this
/// shape directly.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub l1: Dense,
    pub l2: Dense,
}

impl Mlp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        hidden_activation: Activation,
        out_activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(Mlp {
            l1: Dense::new(params, &format!("{name}.l1"), in_dim, hidden, hidden_activation, rng)?,
            l2: Dense::new(params, &format!("{name}.l2"), hidden, out_dim, out_activation, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let h = self.l1.forward(g, x)?;
        self.l2.forward(g, h)
    }
}

/// Gated recurrent unit cell.
///
/// z = σ(W_z x + U_z h + b_z); r = σ(W_r x + U_r h + b_r);
/// h̃ = tanh(W_h x + U_h (r∘h) + b_h); h′ = (1−z)∘h + z∘h̃.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruCell {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut input_mat = |params: &mut ParamSet, gate: &str, rng: &mut Rng| {
            init_params(&[hidden_dim, input_dim], InitScheme::XavierUniform, rng)
                .map(|t| params.register(format!("{name}.w_{gate}"), t))
        };
        let w_z = input_mat(params, "z", rng)?;
        let w_r = input_mat(params, "r", rng)?;
        let w_h = input_mat(params, "h", rng)?;
        let mut rec_mat = |params: &mut ParamSet, gate: &str, rng: &mut Rng| {
            init_params(&[hidden_dim, hidden_dim], InitScheme::Orthogonal, rng)
                .map(|t| params.register(format!("{name}.u_{gate}"), t))
        };
        let u_z = rec_mat(params, "z", rng)?;
        let u_r = rec_mat(params, "r", rng)?;
        let u_h = rec_mat(params, "h", rng)?;
        let b_z = params.register(format!("{name}.b_z"), Tensor::zeros(vec![hidden_dim]));
        let b_r = params.register(format!("{name}.b_r"), Tensor::zeros(vec![hidden_dim]));
        let b_h = params.register(format!("{name}.b_h"), Tensor::zeros(vec![hidden_dim]));
        Ok(GruCell {
            w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h,
            input_dim,
            hidden_dim,
        })
    }

    pub fn step(&self, g: &mut Graph, x: NodeId, h: NodeId) -> Result<NodeId> {
        if g.value(x).vector_len()? != self.input_dim {
            return Err(Error::shape(format!(
                "gru expects input of length {}, got {:?}",
                self.input_dim,
                g.value(x).shape()
            )));
        }
        if g.value(h).vector_len()? != self.hidden_dim {
            return Err(Error::shape(format!(
                "gru expects state of length {}, got {:?}",
                self.hidden_dim,
                g.value(h).shape()
            )));
        }
        let gate = |g: &mut Graph, w: ParamId, u: ParamId, b: ParamId, hin: NodeId| -> Result<NodeId> {
            let wn = g.param(w);
            let un = g.param(u);
            let bn = g.param(b);
            let a = g.matvec(wn, x)?;
            let c = g.matvec(un, hin)?;
            let s = g.add(a, c)?;
            g.add(s, bn)
        };
        let z_pre = gate(g, self.w_z, self.u_z, self.b_z, h)?;
        let z = g.sigmoid(z_pre)?;
        let r_pre = gate(g, self.w_r, self.u_r, self.b_r, h)?;
        let r = g.sigmoid(r_pre)?;
        let rh = g.mul(r, h)?;
        let cand_pre = gate(g, self.w_h, self.u_h, self.b_h, rh)?;
        let cand = g.tanh(cand_pre)?;
        let ones = g.constant_vector(&vec![1.0; self.hidden_dim]);
        let one_minus_z = g.sub(ones, z)?;
        let keep = g.mul(one_minus_z, h)?;
        let write = g.mul(z, cand)?;
        g.add(keep, write)
    }
}

/// LSTM cell with forget-gate bias initialized to 1.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_i: ParamId,
    pub w_f: ParamId,
    pub w_o: ParamId,
    pub w_c: ParamId,
    pub u_i: ParamId,
    pub u_f: ParamId,
    pub u_o: ParamId,
    pub u_c: ParamId,
    pub b_i: ParamId,
    pub b_f: ParamId,
    pub b_o: ParamId,
    pub b_c: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmCell {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut input_mat = |params: &mut ParamSet, gate: &str, rng: &mut Rng| {
            init_params(&[hidden_dim, input_dim], InitScheme::XavierUniform, rng)
                .map(|t| params.register(format!("{name}.w_{gate}"), t))
        };
        let w_i = input_mat(params, "i", rng)?;
        let w_f = input_mat(params, "f", rng)?;
        let w_o = input_mat(params, "o", rng)?;
        let w_c = input_mat(params, "c", rng)?;
        let mut rec_mat = |params: &mut ParamSet, gate: &str, rng: &mut Rng| {
            init_params(&[hidden_dim, hidden_dim], InitScheme::Orthogonal, rng)
                .map(|t| params.register(format!("{name}.u_{gate}"), t))
        };
        let u_i = rec_mat(params, "i", rng)?;
        let u_f = rec_mat(params, "f", rng)?;
        let u_o = rec_mat(params, "o", rng)?;
        let u_c = rec_mat(params, "c", rng)?;
        let b_i = params.register(format!("{name}.b_i"), Tensor::zeros(vec![hidden_dim]));
        let b_f = params.register(
            format!("{name}.b_f"),
            Tensor::vector(vec![1.0; hidden_dim]),
        );
        let b_o = params.register(format!("{name}.b_o"), Tensor::zeros(vec![hidden_dim]));
        let b_c = params.register(format!("{name}.b_c"), Tensor::zeros(vec![hidden_dim]));
        Ok(LstmCell {
            w_i, w_f, w_o, w_c, u_i, u_f, u_o, u_c, b_i, b_f, b_o, b_c,
            input_dim,
            hidden_dim,
        })
    }

    pub fn step(
        &self,
        g: &mut Graph,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        if g.value(x).vector_len()? != self.input_dim
            || g.value(h).vector_len()? != self.hidden_dim
            || g.value(c).vector_len()? != self.hidden_dim
        {
            return Err(Error::shape(format!(
                "lstm dims: input {} hidden {}, got x {:?} h {:?} c {:?}",
                self.input_dim,
                self.hidden_dim,
                g.value(x).shape(),
                g.value(h).shape(),
                g.value(c).shape()
            )));
        }
        let gate = |g: &mut Graph, w: ParamId, u: ParamId, b: ParamId| -> Result<NodeId> {
            let wn = g.param(w);
            let un = g.param(u);
            let bn = g.param(b);
            let a = g.matvec(wn, x)?;
            let rec = g.matvec(un, h)?;
            let s = g.add(a, rec)?;
            g.add(s, bn)
        };
        let i_pre = gate(g, self.w_i, self.u_i, self.b_i)?;
        let i = g.sigmoid(i_pre)?;
        let f_pre = gate(g, self.w_f, self.u_f, self.b_f)?;
        let f = g.sigmoid(f_pre)?;
        let o_pre = gate(g, self.w_o, self.u_o, self.b_o)?;
        let o = g.sigmoid(o_pre)?;
        let cand_pre = gate(g, self.w_c, self.u_c, self.b_c)?;
        let cand = g.tanh(cand_pre)?;
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_new = g.add(keep, write)?;
        let c_act = g.tanh(c_new)?;
        let h_new = g.mul(o, c_act)?;
        Ok((h_new, c_new))
    }
}

/// One spatial-attention head: a two-layer scorer shared across
/// positions, softmaxed over the position axis.
#[derive(Debug, Clone)]
pub struct AttentionHead {
    pub scorer: Mlp,
    pub position_dim: usize,
    pub state_dim: usize,
}

impl AttentionHead {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        position_dim: usize,
        state_dim: usize,
        hidden: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(AttentionHead {
            scorer: Mlp::new(
                params,
                name,
                position_dim + state_dim,
                hidden,
                1,
                Activation::Tanh,
                Activation::Identity,
                rng,
            )?,
            position_dim,
            state_dim,
        })
    }

    /// Softmax weights over the N positions given the recurrent state.
    pub fn scores(&self, g: &mut Graph, positions: &[NodeId], d_prev: NodeId) -> Result<NodeId> {
        if positions.is_empty() {
            return Err(Error::shape("attention over zero positions"));
        }
        let mut raw = Vec::with_capacity(positions.len());
        for &p in positions {
            let joint = g.concat(&[p, d_prev])?;
            let s = self.scorer.forward(g, joint)?;
            raw.push(g.index(s, 0)?);
        }
        let stacked = g.concat(&raw)?;
        g.softmax(stacked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{finite_diff_check, graph_builder, sigmoid};
    use crate::rng::rng_from;
    use rand::Rng as _;

    fn rand_vec(r: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| r.gen_range(-1.5..1.5)).collect()
    }

    fn set_param(params: &mut ParamSet, id: ParamId, data: Vec<f64>) {
        params.get_mut(id).data_mut().copy_from_slice(&data);
    }

    fn zero_all(params: &mut ParamSet) {
        for idx in 0..params.len() {
            let pid = ParamId(idx);
            let n = params.get(pid).numel();
            set_param(params, pid, vec![0.0; n]);
        }
    }

    #[test]
    fn dense_identity_and_bias_cases() {
        let mut r = rng_from(1, "layers");
        let mut params = ParamSet::new();
        let layer =
            Dense::new(&mut params, "d", 3, 3, Activation::Identity, &mut r).unwrap();
        set_param(&mut params, layer.w, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let x = vec![0.3, -0.7, 2.5];
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&x);
        let y = layer.forward(&mut g, xn).unwrap();
        assert_eq!(g.value(y).data(), x.as_slice());

        // W = 0, b = c  =>  output c
        set_param(&mut params, layer.w, vec![0.0; 9]);
        set_param(&mut params, layer.b, vec![4.0, 5.0, 6.0]);
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&x);
        let y = layer.forward(&mut g, xn).unwrap();
        assert_eq!(g.value(y).data(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn dense_matches_loop_oracle() {
        let mut r = rng_from(2, "layers");
        for trial in 0..20u64 {
            let mut tr = rng_from(trial, "dense-oracle");
            let mut params = ParamSet::new();
            let layer = Dense::new(&mut params, "d", 4, 3, Activation::Tanh, &mut tr).unwrap();
            set_param(&mut params, layer.b, rand_vec(&mut r, 3));
            let x = rand_vec(&mut r, 4);
            let mut g = Graph::new(&params);
            let xn = g.constant_vector(&x);
            let y = layer.forward(&mut g, xn).unwrap();
            let wv = params.get(layer.w).data();
            let bv = params.get(layer.b).data();
            for i in 0..3 {
                let mut acc = bv[i];
                for j in 0..4 {
                    acc += wv[i * 4 + j] * x[j];
                }
                let want = acc.tanh();
                assert!((g.value(y).data()[i] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_rejects_wrong_input_len() {
        let mut r = rng_from(3, "layers");
        let mut params = ParamSet::new();
        let layer = Dense::new(&mut params, "d", 4, 2, Activation::Identity, &mut r).unwrap();
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&[1.0, 2.0]);
        assert!(matches!(
            layer.forward(&mut g, xn),
            Err(crate::Error::Shape(_))
        ));
    }

    fn scalar_gru_oracle(
        params: &ParamSet,
        cell: &GruCell,
        x: &[f64],
        h: &[f64],
    ) -> Vec<f64> {
        let hd = cell.hidden_dim;
        let id = cell.input_dim;
        let w = |pid: ParamId| params.get(pid).data();
        let mut out = vec![0.0; hd];
        for i in 0..hd {
            let mut z = w(cell.b_z)[i];
            for j in 0..id {
                z += w(cell.w_z)[i * id + j] * x[j];
            }
            for j in 0..hd {
                z += w(cell.u_z)[i * hd + j] * h[j];
            }
            let z = sigmoid(z);
            let mut cand = w(cell.b_h)[i];
            for j in 0..id {
                cand += w(cell.w_h)[i * id + j] * x[j];
            }
            for j in 0..hd {
                let mut rj = w(cell.b_r)[j];
                for k in 0..id {
                    rj += w(cell.w_r)[j * id + k] * x[k];
                }
                for k in 0..hd {
                    rj += w(cell.u_r)[j * hd + k] * h[k];
                }
                cand += w(cell.u_h)[i * hd + j] * (sigmoid(rj) * h[j]);
            }
            let cand = cand.tanh();
            out[i] = (1.0 - z) * h[i] + z * cand;
        }
        out
    }

    #[test]
    fn gru_zero_params_halves_state() {
        let mut r = rng_from(4, "layers");
        let mut params = ParamSet::new();
        let cell = GruCell::new(&mut params, "gru", 3, 4, &mut r).unwrap();
        zero_all(&mut params);
        let h = vec![0.8, -0.4, 0.2, 1.0];
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&[5.0, -3.0, 2.0]);
        let hn = g.constant_vector(&h);
        let out = cell.step(&mut g, xn, hn).unwrap();
        for (got, want) in g.value(out).data().iter().zip(&h) {
            assert!((got - 0.5 * want).abs() < 1e-12);
        }
        // and x = 0, h = 0 stays 0
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&[0.0; 3]);
        let hn = g.constant_vector(&[0.0; 4]);
        let out = cell.step(&mut g, xn, hn).unwrap();
        assert_eq!(g.value(out).data(), &[0.0; 4]);
    }

    #[test]
    fn gru_matches_scalar_oracle() {
        for trial in 0..20u64 {
            let mut r = rng_from(trial, "gru-oracle");
            let mut params = ParamSet::new();
            let cell = GruCell::new(&mut params, "gru", 3, 4, &mut r).unwrap();
            set_param(&mut params, cell.b_z, rand_vec(&mut r, 4));
            set_param(&mut params, cell.b_r, rand_vec(&mut r, 4));
            set_param(&mut params, cell.b_h, rand_vec(&mut r, 4));
            let x = rand_vec(&mut r, 3);
            let h = rand_vec(&mut r, 4);
            let mut g = Graph::new(&params);
            let xn = g.constant_vector(&x);
            let hn = g.constant_vector(&h);
            let out = cell.step(&mut g, xn, hn).unwrap();
            let want = scalar_gru_oracle(&params, &cell, &x, &h);
            for (got, want) in g.value(out).data().iter().zip(&want) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gru_gradients_pass_finite_diff() {
        for attempt in 0..20u64 {
            let mut r = rng_from(70 + attempt, "gru-fd");
            let mut params = ParamSet::new();
            let cell = GruCell::new(&mut params, "gru", 3, 4, &mut r).unwrap();
            let x = rand_vec(&mut r, 3);
            let h = rand_vec(&mut r, 4);
            let w = vec![1.3, -1.1, 0.9, -1.7];
            let mut build = graph_builder(|p: &ParamSet| {
                let mut g = Graph::new(p);
                let xn = g.constant_vector(&x);
                let hn = g.constant_vector(&h);
                let out = cell.step(&mut g, xn, hn)?;
                let wn = g.constant_vector(&w);
                let t = g.mul(out, wn)?;
                let loss = g.sum(t)?;
                Ok((g, loss))
            });
            let (graph, loss) = build(&params).unwrap();
            let grads = graph.backward(loss).unwrap();
            let ok = grads.min_nonzero_abs() >= 1e-3;
            drop(graph);
            if !ok {
                continue;
            }
            let err = finite_diff_check(&mut params, build).unwrap();
            assert!(err < 1e-6, "gru fd error {err}");
            return;
        }
        panic!("no well-conditioned gru instance");
    }

    fn scalar_lstm_oracle(
        params: &ParamSet,
        cell: &LstmCell,
        x: &[f64],
        h: &[f64],
        c: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let hd = cell.hidden_dim;
        let id = cell.input_dim;
        let w = |pid: ParamId| params.get(pid).data();
        let mut h_new = vec![0.0; hd];
        let mut c_new = vec![0.0; hd];
        for i in 0..hd {
            let mut pre = [
                w(cell.b_i)[i],
                w(cell.b_f)[i],
                w(cell.b_o)[i],
                w(cell.b_c)[i],
            ];
            let ws = [cell.w_i, cell.w_f, cell.w_o, cell.w_c];
            let us = [cell.u_i, cell.u_f, cell.u_o, cell.u_c];
            for g in 0..4 {
                for j in 0..id {
                    pre[g] += w(ws[g])[i * id + j] * x[j];
                }
                for j in 0..hd {
                    pre[g] += w(us[g])[i * hd + j] * h[j];
                }
            }
            let i_g = sigmoid(pre[0]);
            let f_g = sigmoid(pre[1]);
            let o_g = sigmoid(pre[2]);
            let cand = pre[3].tanh();
            c_new[i] = f_g * c[i] + i_g * cand;
            h_new[i] = o_g * c_new[i].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn lstm_forced_cases() {
        let mut r = rng_from(5, "layers");
        let mut params = ParamSet::new();
        let cell = LstmCell::new(&mut params, "lstm", 2, 3, &mut r).unwrap();
        // zero all weights; keep the forget bias at its init value of 1
        for idx in 0..params.len() {
            let pid = ParamId(idx);
            if pid == cell.b_f {
                continue;
            }
            let n = params.get(pid).numel();
            set_param(&mut params, pid, vec![0.0; n]);
        }
        let c = vec![0.5, -1.0, 2.0];
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&[3.0, -2.0]);
        let hn = g.constant_vector(&[0.0; 3]);
        let cn = g.constant_vector(&c);
        let (h_new, c_new) = cell.step(&mut g, xn, hn, cn).unwrap();
        let s1 = sigmoid(1.0);
        for i in 0..3 {
            let want_c = s1 * c[i];
            assert!((g.value(c_new).data()[i] - want_c).abs() < 1e-12);
            assert!((g.value(h_new).data()[i] - 0.5 * want_c.tanh()).abs() < 1e-12);
        }
        // zero everything including states -> (0, 0)
        set_param(&mut params, cell.b_f, vec![0.0; 3]);
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&[0.0; 2]);
        let hn = g.constant_vector(&[0.0; 3]);
        let cn = g.constant_vector(&[0.0; 3]);
        let (h_new, c_new) = cell.step(&mut g, xn, hn, cn).unwrap();
        assert_eq!(g.value(h_new).data(), &[0.0; 3]);
        assert_eq!(g.value(c_new).data(), &[0.0; 3]);
    }

    #[test]
    fn lstm_matches_scalar_oracle() {
        for trial in 0..20u64 {
            let mut r = rng_from(trial, "lstm-oracle");
            let mut params = ParamSet::new();
            let cell = LstmCell::new(&mut params, "lstm", 3, 4, &mut r).unwrap();
            let x = rand_vec(&mut r, 3);
            let h = rand_vec(&mut r, 4);
            let c = rand_vec(&mut r, 4);
            let mut g = Graph::new(&params);
            let xn = g.constant_vector(&x);
            let hn = g.constant_vector(&h);
            let cn = g.constant_vector(&c);
            let (h_new, c_new) = cell.step(&mut g, xn, hn, cn).unwrap();
            let (want_h, want_c) = scalar_lstm_oracle(&params, &cell, &x, &h, &c);
            for (got, want) in g.value(h_new).data().iter().zip(&want_h) {
                assert!((got - want).abs() < 1e-12);
            }
            for (got, want) in g.value(c_new).data().iter().zip(&want_c) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lstm_gradients_pass_finite_diff() {
        for attempt in 0..20u64 {
            let mut r = rng_from(90 + attempt, "lstm-fd");
            let mut params = ParamSet::new();
            let cell = LstmCell::new(&mut params, "lstm", 2, 3, &mut r).unwrap();
            let x = rand_vec(&mut r, 2);
            let h = rand_vec(&mut r, 3);
            let c = rand_vec(&mut r, 3);
            let w = vec![1.3, -1.1, 0.9];
            let mut build = graph_builder(|p: &ParamSet| {
                let mut g = Graph::new(p);
                let xn = g.constant_vector(&x);
                let hn = g.constant_vector(&h);
                let cn = g.constant_vector(&c);
                let (h_new, c_new) = cell.step(&mut g, xn, hn, cn)?;
                let wn = g.constant_vector(&w);
                let a = g.mul(h_new, wn)?;
                let b = g.mul(c_new, wn)?;
                let s = g.add(a, b)?;
                let loss = g.sum(s)?;
                Ok((g, loss))
            });
            let (graph, loss) = build(&params).unwrap();
            let grads = graph.backward(loss).unwrap();
            let ok = grads.min_nonzero_abs() >= 1e-3;
            drop(graph);
            if !ok {
                continue;
            }
            let err = finite_diff_check(&mut params, build).unwrap();
            assert!(err < 1e-6, "lstm fd error {err}");
            return;
        }
        panic!("no well-conditioned lstm instance");
    }

    #[test]
    fn recurrent_cells_contract_at_zero_params() {
        let mut r = rng_from(6, "layers");
        let mut params = ParamSet::new();
        let cell = GruCell::new(&mut params, "gru", 2, 8, &mut r).unwrap();
        zero_all(&mut params);
        let h = rand_vec(&mut r, 8);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut g = Graph::new(&params);
        let xn = g.constant_vector(&rand_vec(&mut r, 2));
        let hn = g.constant_vector(&h);
        let out = cell.step(&mut g, xn, hn).unwrap();
        assert!((norm(g.value(out).data()) - 0.5 * norm(&h)).abs() < 1e-12);
    }

    #[test]
    fn attention_uniform_when_scorer_output_zeroed() {
        let mut r = rng_from(7, "layers");
        let mut params = ParamSet::new();
        let head = AttentionHead::new(&mut params, "att", 3, 2, 8, &mut r).unwrap();
        // zero the output layer: every score becomes the same bias
        let n = params.get(head.scorer.l2.w).numel();
        set_param(&mut params, head.scorer.l2.w, vec![0.0; n]);
        let mut g = Graph::new(&params);
        let positions: Vec<_> = (0..5)
            .map(|i| g.constant_vector(&[i as f64, 1.0, -0.5]))
            .collect();
        let d_prev = g.constant_vector(&[0.3, -0.8]);
        let alpha = head.scores(&mut g, &positions, d_prev).unwrap();
        for a in g.value(alpha).data() {
            assert!((a - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_single_position_is_one() {
        let mut r = rng_from(8, "layers");
        let mut params = ParamSet::new();
        let head = AttentionHead::new(&mut params, "att", 3, 2, 8, &mut r).unwrap();
        let mut g = Graph::new(&params);
        let p0 = g.constant_vector(&[0.1, 0.2, 0.3]);
        let d_prev = g.constant_vector(&[0.0, 0.0]);
        let alpha = head.scores(&mut g, &[p0], d_prev).unwrap();
        assert_eq!(g.value(alpha).data(), &[1.0]);

        assert!(matches!(
            head.scores(&mut g, &[], d_prev),
            Err(crate::Error::Shape(_))
        ));
    }

    #[test]
    fn attention_matches_per_position_mlp_oracle() {
        for trial in 0..10u64 {
            let mut r = rng_from(trial, "att-oracle");
            let mut params = ParamSet::new();
            let head = AttentionHead::new(&mut params, "att", 3, 2, 8, &mut r).unwrap();
            let positions: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut r, 3)).collect();
            let d_prev = rand_vec(&mut r, 2);
            let mut g = Graph::new(&params);
            let pos_nodes: Vec<_> = positions
                .iter()
                .map(|p| g.constant_vector(p))
                .collect();
            let dn = g.constant_vector(&d_prev);
            let alpha = head.scores(&mut g, &pos_nodes, dn).unwrap();

            // explicit oracle: per-position mlp then softmax
            let w1 = params.get(head.scorer.l1.w).data();
            let b1 = params.get(head.scorer.l1.b).data();
            let w2 = params.get(head.scorer.l2.w).data();
            let b2 = params.get(head.scorer.l2.b).data();
            let mut scores = Vec::new();
            for p in &positions {
                let joint: Vec<f64> = p.iter().chain(&d_prev).cloned().collect();
                let mut hidden = vec![0.0; 8];
                for i in 0..8 {
                    let mut acc = b1[i];
                    for j in 0..5 {
                        acc += w1[i * 5 + j] * joint[j];
                    }
                    hidden[i] = acc.tanh();
                }
                let mut s = b2[0];
                for j in 0..8 {
                    s += w2[j] * hidden[j];
                }
                scores.push(s);
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let sum: f64 = g.value(alpha).data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for (got, e) in g.value(alpha).data().iter().zip(&exps) {
                assert!((got - e / z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_zeros_and_seed_determinism() {
        let mut r1 = rng_from(42, "init");
        let mut r2 = rng_from(42, "init");
        let z = init_params(&[3, 2], InitScheme::Zeros, &mut r1).unwrap();
        assert!(z.data().iter().all(|x| *x == 0.0));
        let a = init_params(&[4, 4], InitScheme::XavierUniform, &mut r1).unwrap();
        let _ = init_params(&[3, 2], InitScheme::Zeros, &mut r2).unwrap();
        let b = init_params(&[4, 4], InitScheme::XavierUniform, &mut r2).unwrap();
        assert_eq!(a.data(), b.data());
        let limit = (6.0 / 8.0_f64).sqrt();
        assert!(a.data().iter().all(|x| x.abs() < limit));
    }

    #[test]
    fn init_orthogonal_gram_is_identity() {
        let mut r = rng_from(43, "init");
        let q = init_params(&[8, 8], InitScheme::Orthogonal, &mut r).unwrap();
        let d = q.data();
        for i in 0..8 {
            for j in 0..8 {
                let mut acc = 0.0;
                for k in 0..8 {
                    acc += d[k * 8 + i] * d[k * 8 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (acc - want).abs() < 1e-10,
                    "gram[{i}][{j}] = {acc}, want {want}"
                );
            }
        }
    }

    #[test]
    fn init_scheme_parse_rejects_unknown() {
        assert!(matches!(
            InitScheme::parse("uniform-he"),
            Err(crate::Error::Config(_))
        ));
    }
}
