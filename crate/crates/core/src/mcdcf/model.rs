//! Parameters and the fused forward/backward pass of the model.
//!
//! Each side owns an encoder (a shared per-cause tanh layer followed by a
//! mean head and a log-variance head) and a decoder (tanh layer, linear
//! output). A side's posterior is the average over causes of the per-cause
//! means and of the per-cause variances.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::context::Contexts;
use super::ops::{kl_from_moments, GaussianPosterior};
use crate::error::{Error, Result};
use crate::numkit::linalg::{affine, axpy, dot, matvec_t_acc, outer_acc, sigmoid, softplus};
use crate::numkit::{gradient_check, GradCheckReport, ParamSet, ParamTensor};
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    User,
    Item,
}

impl Side {
    fn prefix(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct NetSlots {
    enc_w1: usize,
    enc_b1: usize,
    enc_wmu: usize,
    enc_bmu: usize,
    enc_wlv: usize,
    enc_blv: usize,
    dec_w1: usize,
    dec_b1: usize,
    dec_w2: usize,
    dec_b2: usize,
}

const NET_TENSORS: [&str; 10] = [
    "encoder.w1",
    "encoder.b1",
    "encoder.w_mu",
    "encoder.b_mu",
    "encoder.w_logvar",
    "encoder.b_logvar",
    "decoder.w1",
    "decoder.b1",
    "decoder.w2",
    "decoder.b2",
];

impl NetSlots {
    fn from_slots(s: [usize; 10]) -> Self {
        Self {
            enc_w1: s[0],
            enc_b1: s[1],
            enc_wmu: s[2],
            enc_bmu: s[3],
            enc_wlv: s[4],
            enc_blv: s[5],
            dec_w1: s[6],
            dec_b1: s[7],
            dec_w2: s[8],
            dec_b2: s[9],
        }
    }
}

/// Architecture choices that fix the parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub dim: usize,
    pub user_confounder: bool,
    pub item_confounder: bool,
    pub alpha: f64,
    pub beta: f64,
    pub init_std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub params: ParamSet,
    dim: usize,
    alpha: f64,
    beta: f64,
    user_emb: usize,
    item_emb: usize,
    user_net: Option<NetSlots>,
    item_net: Option<NetSlots>,
}

/// One pairwise training example: a user, an item the user interacted
/// with, and an item the user did not interact with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingTriple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

/// Frozen standard-normal noise for one batch, `batch × dim` per side.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNoise {
    pub user: Vec<f64>,
    pub item: Vec<f64>,
}

impl BatchNoise {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, batch: usize, dim: usize) -> Self {
        let mut normals = |n: usize| (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let user = normals(batch * dim);
        let item = normals(batch * dim);
        Self { user, item }
    }

    pub fn zeros(batch: usize, dim: usize) -> Self {
        Self {
            user: vec![0.0; batch * dim],
            item: vec![0.0; batch * dim],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub click: f64,
    pub elbo: f64,
    pub total: f64,
}

/// Everything the loss needs for one mini-batch.
pub struct BatchInput<'a> {
    pub triples: &'a [TrainingTriple],
    /// Per-triple multipliers of the click term (IPS); `None` means 1.
    pub weights: Option<&'a [f64]>,
    pub noise: &'a BatchNoise,
    pub elbo_weight: f64,
}

struct EncodeTrace {
    h: Vec<f64>,
    s: Vec<f64>,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

struct SideTrace {
    enc: EncodeTrace,
    x: Vec<f64>,
    dec_h: Vec<f64>,
    recon: Vec<f64>,
    kl: f64,
    rec: f64,
}

impl ModelParams {
    /// Fresh parameters: embeddings `N(0, init_std²)`, weight matrices
    /// `N(0, 1/dim)`, biases zero. Embeddings are drawn first so models
    /// with and without confounder networks share them under one seed.
    pub fn init(num_users: usize, num_items: usize, shape: &ModelShape, seed: u64) -> Self {
        let d = shape.dim;
        let mut rng = stream(seed, Stream::Init);
        let mut params = ParamSet::new();
        let mut gaussian = |name: String, dims: &[usize], std: f64| {
            let n = dims.iter().product();
            let values = (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
            ParamTensor::from_values(name, dims, values).expect("shape matches")
        };
        let user_emb = params.push(gaussian("user_emb".into(), &[num_users, d], shape.init_std));
        let item_emb = params.push(gaussian("item_emb".into(), &[num_items, d], shape.init_std));
        let w_std = 1.0 / (d as f64).sqrt();
        let mut nets = [None, None];
        for (slot, side, on) in [(0, Side::User, shape.user_confounder), (1, Side::Item, shape.item_confounder)] {
            if !on {
                continue;
            }
            let mut ids = [0usize; 10];
            for (k, name) in NET_TENSORS.iter().enumerate() {
                let full = format!("{}_{name}", side.prefix());
                let is_matrix = name.contains(".w");
                ids[k] = if is_matrix {
                    params.push(gaussian(full, &[d, d], w_std))
                } else {
                    params.push(ParamTensor::zeros(full, &[d]))
                };
            }
            nets[slot] = Some(NetSlots::from_slots(ids));
        }
        Self {
            params,
            dim: d,
            alpha: shape.alpha,
            beta: shape.beta,
            user_emb,
            item_emb,
            user_net: nets[0],
            item_net: nets[1],
        }
    }

    /// Rebuilds the layout from tensor names.
    pub fn from_param_set(params: ParamSet, alpha: f64, beta: f64) -> Result<Self> {
        let find = |name: &str| {
            params
                .index_of(name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name}")))
        };
        let user_emb = find("user_emb")?;
        let item_emb = find("item_emb")?;
        let dim = params[user_emb].shape[1];
        if params[item_emb].shape[1] != dim {
            return Err(Error::Dimension("user and item embeddings differ in width".into()));
        }
        let net = |side: Side| -> Result<Option<NetSlots>> {
            let first = format!("{}_{}", side.prefix(), NET_TENSORS[0]);
            if params.index_of(&first).is_none() {
                return Ok(None);
            }
            let mut ids = [0usize; 10];
            for (k, name) in NET_TENSORS.iter().enumerate() {
                let idx = find(&format!("{}_{name}", side.prefix()))?;
                let want: &[usize] = if name.contains(".w") { &[dim, dim] } else { &[dim] };
                if params[idx].shape != want {
                    return Err(Error::Dimension(format!("{} has shape {:?}", params[idx].name, params[idx].shape)));
                }
                ids[k] = idx;
            }
            Ok(Some(NetSlots::from_slots(ids)))
        };
        let (user_net, item_net) = (net(Side::User)?, net(Side::Item)?);
        Ok(Self {
            params,
            dim,
            alpha,
            beta,
            user_emb,
            item_emb,
            user_net,
            item_net,
        })
    }

    /// Parameter set plus `meta.alpha` / `meta.beta` scalars, ready to be
    /// written as a checkpoint.
    pub fn to_checkpoint(&self) -> ParamSet {
        let mut out = self.params.clone();
        out.push(ParamTensor::from_values("meta.alpha", &[1], vec![self.alpha]).expect("scalar"));
        out.push(ParamTensor::from_values("meta.beta", &[1], vec![self.beta]).expect("scalar"));
        out
    }

    pub fn from_checkpoint(mut params: ParamSet) -> Result<Self> {
        let mut take = |name: &str| -> Result<f64> {
            let idx = params
                .index_of(name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks {name}")))?;
            Ok(params.tensors.remove(idx).values[0])
        };
        let alpha = take("meta.alpha")?;
        let beta = take("meta.beta")?;
        Self::from_param_set(params, alpha, beta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn num_users(&self) -> usize {
        self.params[self.user_emb].shape[0]
    }

    pub fn num_items(&self) -> usize {
        self.params[self.item_emb].shape[0]
    }

    pub fn has_confounder(&self, side: Side) -> bool {
        self.net(side).is_some()
    }

    pub fn user_embedding(&self, u: u32) -> &[f64] {
        self.params[self.user_emb].row(u as usize)
    }

    pub fn item_embedding(&self, i: u32) -> &[f64] {
        self.params[self.item_emb].row(i as usize)
    }

    pub fn user_embeddings(&self) -> &ParamTensor {
        &self.params[self.user_emb]
    }

    pub fn item_embeddings(&self) -> &ParamTensor {
        &self.params[self.item_emb]
    }

    fn net(&self, side: Side) -> Option<NetSlots> {
        match side {
            Side::User => self.user_net,
            Side::Item => self.item_net,
        }
    }

    /// Embedding table that supplies the causes of `side`.
    fn cause_table(&self, side: Side) -> usize {
        match side {
            Side::User => self.item_emb,
            Side::Item => self.user_emb,
        }
    }

    fn own_table(&self, side: Side) -> usize {
        match side {
            Side::User => self.user_emb,
            Side::Item => self.item_emb,
        }
    }

    fn v(&self, slot: usize) -> &[f64] {
        &self.params[slot].values
    }

    fn encode_trace(&self, net: &NetSlots, side: Side, ctx: &[u32]) -> EncodeTrace {
        let d = self.dim;
        let n = ctx.len();
        let table = self.v(self.cause_table(side));
        let mut h = vec![0.0; n * d];
        let mut s = vec![0.0; n * d];
        let mut mu = vec![0.0; d];
        let mut sigma2 = vec![0.0; d];
        let mut head = vec![0.0; d];
        for (j, &c) in ctx.iter().enumerate() {
            let e = &table[c as usize * d..(c as usize + 1) * d];
            let hj = &mut h[j * d..(j + 1) * d];
            affine(self.v(net.enc_w1), self.v(net.enc_b1), e, hj);
            hj.iter_mut().for_each(|x| *x = x.tanh());
            affine(self.v(net.enc_wmu), self.v(net.enc_bmu), hj, &mut head);
            axpy(1.0, &head, &mut mu);
            let sj = &mut s[j * d..(j + 1) * d];
            affine(self.v(net.enc_wlv), self.v(net.enc_blv), hj, sj);
            sj.iter_mut().for_each(|x| *x = x.exp());
            axpy(1.0, sj, &mut sigma2);
        }
        let inv_n = 1.0 / n as f64;
        mu.iter_mut().chain(sigma2.iter_mut()).for_each(|x| *x *= inv_n);
        EncodeTrace { h, s, mu, sigma2 }
    }

    /// Posterior over `side`'s substitute confounder given its causes.
    pub fn encode(&self, side: Side, ctx: &[u32]) -> Result<GaussianPosterior> {
        let net = self
            .net(side)
            .ok_or_else(|| Error::Config(format!("model has no {} confounder network", side.prefix())))?;
        if ctx.is_empty() {
            return Err(Error::Data(format!("empty {} context", side.prefix())));
        }
        let tr = self.encode_trace(&net, side, ctx);
        Ok(GaussianPosterior::from_variance(tr.mu, &tr.sigma2))
    }

    fn decode_into(&self, net: &NetSlots, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        affine(self.v(net.dec_w1), self.v(net.dec_b1), x, hidden);
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        affine(self.v(net.dec_w2), self.v(net.dec_b2), hidden, out);
    }

    /// Reconstruction of an embedding from a confounder sample.
    pub fn decode(&self, side: Side, x: &[f64]) -> Result<Vec<f64>> {
        let net = self
            .net(side)
            .ok_or_else(|| Error::Config(format!("model has no {} confounder network", side.prefix())))?;
        let mut hidden = vec![0.0; self.dim];
        let mut out = vec![0.0; self.dim];
        self.decode_into(&net, x, &mut hidden, &mut out);
        Ok(out)
    }

    /// `‖base − Decoder(x)‖²`
    pub fn reconstruction_loss(&self, side: Side, x: &[f64], base: &[f64]) -> Result<f64> {
        Ok(super::ops::squared_error(base, &self.decode(side, x)?))
    }

    fn side_forward(&self, net: &NetSlots, side: Side, ctx: &[u32], own_row: usize, eps: &[f64]) -> SideTrace {
        let d = self.dim;
        let enc = self.encode_trace(net, side, ctx);
        let x: Vec<f64> = (0..d).map(|j| enc.mu[j] + enc.sigma2[j].sqrt() * eps[j]).collect();
        let kl = kl_from_moments(&enc.mu, &enc.sigma2);
        let mut dec_h = vec![0.0; d];
        let mut recon = vec![0.0; d];
        self.decode_into(net, &x, &mut dec_h, &mut recon);
        let base = self.params[self.own_table(side)].row(own_row);
        let rec = super::ops::squared_error(base, &recon);
        SideTrace {
            enc,
            x,
            dec_h,
            recon,
            kl,
            rec,
        }
    }

    /// Backpropagates `dx_click` (gradient of the click term w.r.t. the
    /// sample) plus `c·(reconstruction + KL)` into `g`.
    #[allow(clippy::too_many_arguments)]
    fn side_backward(&self, net: &NetSlots, side: Side, ctx: &[u32], own_row: usize, tr: &SideTrace, eps: &[f64], dx_click: &[f64], c: f64, g: &mut [Vec<f64>]) {
        let d = self.dim;
        let mut dx = dx_click.to_vec();
        if c != 0.0 {
            let own = self.own_table(side);
            let base = self.params[own].row(own_row);
            let d_recon: Vec<f64> = (0..d).map(|j| -2.0 * c * (base[j] - tr.recon[j])).collect();
            for (gb, dr) in g[own][own_row * d..(own_row + 1) * d].iter_mut().zip(&d_recon) {
                *gb -= dr;
            }
            outer_acc(&mut g[net.dec_w2], &d_recon, &tr.dec_h);
            axpy(1.0, &d_recon, &mut g[net.dec_b2]);
            let mut d_hidden = vec![0.0; d];
            matvec_t_acc(self.v(net.dec_w2), &d_recon, &mut d_hidden);
            let d_pre: Vec<f64> = d_hidden
                .iter()
                .zip(&tr.dec_h)
                .map(|(dh, h)| dh * (1.0 - h * h))
                .collect();
            outer_acc(&mut g[net.dec_w1], &d_pre, &tr.x);
            axpy(1.0, &d_pre, &mut g[net.dec_b1]);
            matvec_t_acc(self.v(net.dec_w1), &d_pre, &mut dx);
        }

        let (mu, s2) = (&tr.enc.mu, &tr.enc.sigma2);
        let n = ctx.len();
        let inv_n = 1.0 / n as f64;
        // Per-cause gradients of the averaged heads.
        let d_head_mu: Vec<f64> = (0..d).map(|j| (dx[j] + c * mu[j]) * inv_n).collect();
        let d_s2: Vec<f64> = (0..d)
            .map(|j| (dx[j] * eps[j] * 0.5 / s2[j].sqrt() + c * 0.5 * (1.0 - 1.0 / s2[j])) * inv_n)
            .collect();

        let mut h_sum = vec![0.0; d];
        let mut dh_from_mu = vec![0.0; d];
        matvec_t_acc(self.v(net.enc_wmu), &d_head_mu, &mut dh_from_mu);
        let table = self.cause_table(side);
        let table_v = self.v(table);
        let mut d_lv = vec![0.0; d];
        let mut d_pre = vec![0.0; d];
        for (j, &cause) in ctx.iter().enumerate() {
            let hj = &tr.enc.h[j * d..(j + 1) * d];
            let sj = &tr.enc.s[j * d..(j + 1) * d];
            axpy(1.0, hj, &mut h_sum);
            for k in 0..d {
                d_lv[k] = d_s2[k] * sj[k];
            }
            outer_acc(&mut g[net.enc_wlv], &d_lv, hj);
            axpy(1.0, &d_lv, &mut g[net.enc_blv]);
            d_pre.copy_from_slice(&dh_from_mu);
            matvec_t_acc(self.v(net.enc_wlv), &d_lv, &mut d_pre);
            for k in 0..d {
                d_pre[k] *= 1.0 - hj[k] * hj[k];
            }
            let c_row = cause as usize;
            outer_acc(&mut g[net.enc_w1], &d_pre, &table_v[c_row * d..(c_row + 1) * d]);
            axpy(1.0, &d_pre, &mut g[net.enc_b1]);
            matvec_t_acc(self.v(net.enc_w1), &d_pre, &mut g[table][c_row * d..(c_row + 1) * d]);
        }
        outer_acc(&mut g[net.enc_wmu], &d_head_mu, &h_sum);
        axpy(n as f64, &d_head_mu, &mut g[net.enc_bmu]);
    }

    /// Whether `side`'s confounder participates in this objective at all.
    fn side_active(&self, side: Side, elbo_weight: f64) -> Option<NetSlots> {
        let weight = match side {
            Side::User => self.alpha,
            Side::Item => self.beta,
        };
        self.net(side).filter(|_| weight != 0.0 || elbo_weight != 0.0)
    }

    fn run_batch(&self, ctx: &Contexts, input: &BatchInput<'_>, mut grads: Option<&mut [Vec<f64>]>) -> Result<LossBreakdown> {
        let d = self.dim;
        let b = input.triples.len();
        if b == 0 {
            return Ok(LossBreakdown::default());
        }
        if input.noise.user.len() < b * d || input.noise.item.len() < b * d {
            return Err(Error::Dimension("batch noise is smaller than the batch".into()));
        }
        let inv_b = 1.0 / b as f64;
        let user_net = self.side_active(Side::User, input.elbo_weight);
        let item_net = self.side_active(Side::Item, input.elbo_weight);
        let c = input.elbo_weight * 0.5 * inv_b;
        let (mut click_sum, mut elbo_sum) = (0.0, 0.0);
        let zero = vec![0.0; d];

        for (t, tri) in input.triples.iter().enumerate() {
            let (u, i, j) = (tri.user as usize, tri.pos as usize, tri.neg as usize);
            let eps_u = &input.noise.user[t * d..(t + 1) * d];
            let eps_i = &input.noise.item[t * d..(t + 1) * d];
            let user_ctx = ctx.user.get(u).map_or(&[][..], Vec::as_slice);
            let item_ctx = ctx.item.get(i).map_or(&[][..], Vec::as_slice);
            if (user_net.is_some() && user_ctx.is_empty()) || (item_net.is_some() && item_ctx.is_empty()) {
                return Err(Error::Data(format!("triple ({u}, {i}, {j}) has an empty context")));
            }
            let ut = user_net.map(|n| self.side_forward(&n, Side::User, user_ctx, u, eps_u));
            let it = item_net.map(|n| self.side_forward(&n, Side::Item, item_ctx, i, eps_i));
            let x_u = ut.as_ref().map_or(&zero, |tr| &tr.x);
            let x_i = it.as_ref().map_or(&zero, |tr| &tr.x);

            let ue = self.user_embedding(tri.user);
            let ie = self.item_embedding(tri.pos);
            let je = self.item_embedding(tri.neg);
            let f: Vec<f64> = (0..d).map(|k| ue[k] + self.alpha * x_u[k]).collect();
            let kpos: Vec<f64> = (0..d).map(|k| ie[k] + self.beta * x_i[k]).collect();
            let z = dot(&f, &kpos) - dot(&f, je);
            let w = input.weights.map_or(1.0, |ws| ws[t]);
            click_sum += w * softplus(-z);
            let side_terms = |tr: &Option<SideTrace>| tr.as_ref().map_or(0.0, |tr| tr.rec + tr.kl);
            elbo_sum += 0.5 * (side_terms(&ut) + side_terms(&it));

            let Some(g) = grads.as_deref_mut() else { continue };
            let gz = -w * sigmoid(-z) * inv_b;
            let df: Vec<f64> = (0..d).map(|k| gz * (kpos[k] - je[k])).collect();
            axpy(1.0, &df, &mut g[self.user_emb][u * d..(u + 1) * d]);
            axpy(gz, &f, &mut g[self.item_emb][i * d..(i + 1) * d]);
            axpy(-gz, &f, &mut g[self.item_emb][j * d..(j + 1) * d]);
            if let (Some(net), Some(tr)) = (user_net, ut.as_ref()) {
                let dx: Vec<f64> = df.iter().map(|v| self.alpha * v).collect();
                self.side_backward(&net, Side::User, user_ctx, u, tr, eps_u, &dx, c, g);
            }
            if let (Some(net), Some(tr)) = (item_net, it.as_ref()) {
                let dx: Vec<f64> = f.iter().map(|v| self.beta * gz * v).collect();
                self.side_backward(&net, Side::Item, item_ctx, i, tr, eps_i, &dx, c, g);
            }
        }
        let click = click_sum * inv_b;
        let elbo = elbo_sum * inv_b;
        let out = LossBreakdown {
            click,
            elbo,
            total: click + input.elbo_weight * elbo,
        };
        if !out.click.is_finite() {
            return Err(Error::NonFinite("click loss".into()));
        }
        if !out.elbo.is_finite() {
            return Err(Error::NonFinite("ELBO loss".into()));
        }
        Ok(out)
    }

    /// Batch objective without touching gradients.
    pub fn batch_loss(&self, ctx: &Contexts, input: &BatchInput<'_>) -> Result<LossBreakdown> {
        self.run_batch(ctx, input, None)
    }

    /// Batch objective; its gradient is added to the parameters' grad buffers.
    pub fn accumulate_grad(&mut self, ctx: &Contexts, input: &BatchInput<'_>) -> Result<LossBreakdown> {
        let mut g: Vec<Vec<f64>> = self
            .params
            .tensors
            .iter_mut()
            .map(|t| std::mem::take(&mut t.grad))
            .collect();
        let out = self.run_batch(ctx, input, Some(&mut g));
        for (t, grad) in self.params.tensors.iter_mut().zip(g) {
            t.grad = grad;
        }
        out
    }

    /// Central finite differences of the total batch loss against the
    /// analytic gradient, over every parameter. Grad buffers are reset.
    pub fn check_gradient(&mut self, ctx: &Contexts, input: &BatchInput<'_>, h: f64, tol: f64) -> Result<GradCheckReport> {
        self.params.zero_grad();
        self.accumulate_grad(ctx, input)?;
        let layout = self.clone();
        Ok(gradient_check(
            &mut self.params,
            |p| {
                let m = ModelParams {
                    params: p.clone(),
                    ..layout.clone()
                };
                m.batch_loss(ctx, input).map_or(f64::NAN, |l| l.total)
            },
            h,
            tol,
        ))
    }
}
