//! The encoder-decoder network.
//!
//! Every sample contributes `S` series: the member slots, preceded by the
//! center's own track for the metric framework. The encoder reads the last
//! `T_h` history steps through input attention over the series; the decoder
//! unrolls `T_f` steps with temporal attention over the encoder states and
//! emits one output row per series and step.
//!
//! Output rows of one decoder step are series-major: row `k * B + b` belongs
//! to series `k` of batch sample `b`.

use masi_core::{ClusterSample, SampleData, Vec2};
use masi_numerics::{lstm_cell, Gradients, Graph, LstmParams, NodeId, ParamId, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy)]
enum InputIds {
    Embedding(ParamId),
    Projection { weight: ParamId, bias: ParamId },
}

#[derive(Debug, Clone, Copy)]
struct AttentionIds {
    w: ParamId,
    u: ParamId,
    b: ParamId,
    v: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Ids {
    input: InputIds,
    slot: ParamId,
    input_attention: AttentionIds,
    encoder: LstmParams,
    temporal_attention: AttentionIds,
    decoder: LstmParams,
    head_w: ParamId,
    head_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

/// Weights and configuration of one model.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    ids: Ids,
}

/// Greedy or extrapolated forecast for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Dictionary index per member slot and step, slot-major.
    Symbolic { t_future: usize, indices: Vec<usize> },
    /// Positions of the center and of every member slot (slot-major) per
    /// step, relative to `origin`.
    Metric {
        t_future: usize,
        origin: Vec2,
        center: Vec<Vec2>,
        members: Vec<Vec2>,
    },
}

impl Prediction {
    /// World-frame center path (metric only).
    pub fn world_center(&self) -> Option<Vec<Vec2>> {
        match self {
            Prediction::Metric { origin, center, .. } => Some(center.iter().map(|&p| *origin + p).collect()),
            Prediction::Symbolic { .. } => None,
        }
    }

    /// World-frame member paths, slot-major (metric only).
    pub fn world_members(&self) -> Option<Vec<Vec2>> {
        match self {
            Prediction::Metric { origin, members, .. } => Some(members.iter().map(|&p| *origin + p).collect()),
            Prediction::Symbolic { .. } => None,
        }
    }
}

/// Attention weights of one sample: one row over the series per encoder
/// step, one row over the encoder steps per decoder step.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub input: Vec<Vec<f64>>,
    pub temporal: Vec<Vec<f64>>,
}

/// Nodes produced by one unrolled pass.
pub(crate) struct Trace {
    pub outputs: Vec<NodeId>,
    pub alpha: Vec<Tensor>,
    pub beta: Vec<Tensor>,
}

fn attention_params(
    store: &mut ParamStore,
    prefix: &str,
    query: usize,
    key: usize,
    width: usize,
    rng: &mut ChaCha8Rng,
) -> Result<AttentionIds> {
    Ok(AttentionIds {
        w: store.add_uniform(format!("{prefix}.w"), &[query, width], query, rng)?,
        u: store.add_uniform(format!("{prefix}.u"), &[key, width], key, rng)?,
        b: store.add_uniform(format!("{prefix}.b"), &[1, width], width, rng)?,
        v: store.add_uniform(format!("{prefix}.v"), &[width, 1], width, rng)?,
    })
}

impl Model {
    /// Fresh weights drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let (s, e, h, t) = (config.series(), config.embed_dim, config.hidden, config.t_history);
        let input = if config.framework.is_symbolic() {
            InputIds::Embedding(store.add_uniform("embed", &[config.dict_size, e], e, &mut rng)?)
        } else {
            InputIds::Projection {
                weight: store.add_uniform("proj.weight", &[2, e], 2, &mut rng)?,
                bias: store.add_uniform("proj.bias", &[1, e], 2, &mut rng)?,
            }
        };
        let slot = store.add_uniform("slot_embed", &[s, e], e, &mut rng)?;
        let input_attention = attention_params(&mut store, "input_attention", 2 * h, t * e, h, &mut rng)?;
        let encoder = LstmParams::init(&mut store, "encoder", s * e, h, &mut rng)?;
        let temporal_attention = attention_params(&mut store, "temporal_attention", 2 * h, h, h, &mut rng)?;
        let decoder = LstmParams::init(&mut store, "decoder", s * e + h, h, &mut rng)?;
        let head_w = store.add_uniform("head.weight", &[2 * h, s * e], 2 * h, &mut rng)?;
        let head_b = store.add_uniform("head.bias", &[1, s * e], 2 * h, &mut rng)?;
        let o = config.output_dim();
        let out_w = store.add_uniform("out.weight", &[e, o], e, &mut rng)?;
        let out_b = store.add_uniform("out.bias", &[1, o], e, &mut rng)?;
        let ids = Ids {
            input,
            slot,
            input_attention,
            encoder,
            temporal_attention,
            decoder,
            head_w,
            head_b,
            out_w,
            out_b,
        };
        Ok(Model { config, params: store, ids })
    }

    /// Rebuilds a model from stored weights, which must match the layout
    /// `config` implies.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let template = Model::new(config)?;
        if template.params.len() != params.len() {
            return Err(ModelError::Compatibility(format!(
                "expected {} parameter blocks, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for ((_, name, want), (_, got_name, got)) in template.params.iter().zip(params.iter()) {
            if name != got_name || want.shape() != got.shape() {
                return Err(ModelError::Compatibility(format!(
                    "parameter {got_name} {:?} does not match {name} {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        if !params.all_finite() {
            return Err(ModelError::Compatibility("stored parameters are not finite".into()));
        }
        Ok(Model {
            config: template.config,
            params,
            ids: template.ids,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Checks that a sample fits this model's shape and framework.
    pub fn check_sample(&self, s: &ClusterSample) -> Result<()> {
        let c = &self.config;
        if s.is_metric() == c.framework.is_symbolic() {
            return Err(ModelError::usage(format!(
                "{} model cannot consume {} samples",
                c.framework.name(),
                if s.is_metric() { "metric" } else { "symbolic" }
            )));
        }
        if s.slots != c.n_star {
            return Err(ModelError::usage(format!("sample has {} slots, model expects {}", s.slots, c.n_star)));
        }
        if s.t_history < c.t_history || s.t_future < c.t_future {
            return Err(ModelError::usage(format!(
                "sample window {}+{} is shorter than the model's {}+{}",
                s.t_history, s.t_future, c.t_history, c.t_future
            )));
        }
        if let Some(idx) = s.indices() {
            if let Some(&bad) = idx.iter().find(|&&i| i >= c.dict_size) {
                return Err(ModelError::usage(format!(
                    "index {bad} out of range for dictionary of {}",
                    c.dict_size
                )));
            }
        }
        Ok(())
    }

    fn check_batch(&self, batch: &[&ClusterSample]) -> Result<()> {
        if batch.is_empty() {
            return Err(ModelError::usage("empty batch"));
        }
        batch.iter().try_for_each(|s| self.check_sample(s))
    }

    /// Teacher-forced loss of one batch.
    pub fn loss(&self, batch: &[&ClusterSample]) -> Result<f64> {
        self.check_batch(batch)?;
        let mut g = Graph::new(&self.params);
        let trace = self.forward(&mut g, batch, true)?;
        let l = self.loss_node(&mut g, batch, &trace)?;
        Ok(g.value(l).item()?)
    }

    /// Teacher-forced loss of one batch and its parameter gradients.
    pub fn loss_and_gradients(&self, batch: &[&ClusterSample]) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let mut g = Graph::new(&self.params);
        let trace = self.forward(&mut g, batch, true)?;
        let l = self.loss_node(&mut g, batch, &trace)?;
        let value = g.value(l).item()?;
        Ok((value, g.backward(l)?))
    }

    /// Per-step output rows (`[S*B x dict_size]` logits or `[S*B x 2]`
    /// origin-relative positions).
    pub fn raw_outputs(&self, batch: &[&ClusterSample], teacher: bool) -> Result<Vec<Tensor>> {
        self.check_batch(batch)?;
        let mut g = Graph::new(&self.params);
        let trace = self.forward(&mut g, batch, teacher)?;
        Ok(trace.outputs.iter().map(|&n| g.value(n).clone()).collect())
    }

    /// Autoregressive forecasts for every sample of the batch.
    pub fn predict(&self, batch: &[&ClusterSample]) -> Result<Vec<Prediction>> {
        Ok(self.predict_with_attention(batch)?.into_iter().map(|(p, _)| p).collect())
    }

    pub fn predict_with_attention(&self, batch: &[&ClusterSample]) -> Result<Vec<(Prediction, Attention)>> {
        self.check_batch(batch)?;
        let mut g = Graph::new(&self.params);
        let trace = self.forward(&mut g, batch, false)?;
        let (n, s, tf) = (batch.len(), self.config.series(), self.config.t_future);
        let outs: Vec<&Tensor> = trace.outputs.iter().map(|&o| g.value(o)).collect();
        let argmax: Vec<Vec<usize>> = if self.config.framework.is_symbolic() {
            outs.iter().map(|t| t.argmax_rows()).collect()
        } else {
            Vec::new()
        };
        let mut result = Vec::with_capacity(n);
        for (b, sample) in batch.iter().enumerate() {
            let prediction = match &sample.data {
                SampleData::Symbolic(_) => {
                    let mut indices = Vec::with_capacity(s * tf);
                    for k in 0..s {
                        indices.extend(argmax.iter().map(|step| step[k * n + b]));
                    }
                    Prediction::Symbolic { t_future: tf, indices }
                }
                SampleData::Metric { origin, .. } => {
                    let point = |k: usize, j: usize| {
                        let r = outs[j].row_slice(k * n + b);
                        Vec2::new(r[0], r[1])
                    };
                    let center = (0..tf).map(|j| point(0, j)).collect();
                    let members = (1..s).flat_map(|k| (0..tf).map(move |j| (k, j))).map(|(k, j)| point(k, j)).collect();
                    Prediction::Metric {
                        t_future: tf,
                        origin: *origin,
                        center,
                        members,
                    }
                }
            };
            let attention = Attention {
                input: trace.alpha.iter().map(|a| a.row_slice(b).to_vec()).collect(),
                temporal: trace.beta.iter().map(|a| a.row_slice(b).to_vec()).collect(),
            };
            result.push((prediction, attention));
        }
        Ok(result)
    }

    /// Driving vectors of one sample: a `[T_h x embed_dim]` tensor per series,
    /// slot embedding included.
    pub fn embed_inputs(&self, sample: &ClusterSample) -> Result<Vec<Tensor>> {
        self.check_sample(sample)?;
        let mut g = Graph::new(&self.params);
        let table = g.param(self.ids.slot)?;
        let mut out = Vec::with_capacity(self.config.series());
        for k in 0..self.config.series() {
            let slot = g.gather_rows(table, &[k])?;
            let mut rows = Vec::with_capacity(self.config.t_history);
            for t in 0..self.config.t_history {
                let x = self.embed_step(&mut g, &[sample], k, |s| self.history_offset(s) + t)?;
                rows.push(g.add(x, slot)?);
            }
            let all = g.concat_rows(&rows)?;
            out.push(g.value(all).clone());
        }
        Ok(out)
    }

    fn history_offset(&self, s: &ClusterSample) -> usize {
        s.t_history - self.config.t_history
    }

    fn symbol(s: &ClusterSample, series: usize, step: usize) -> usize {
        s.indices().expect("symbolic sample")[s.at(series, step)]
    }

    fn coord(s: &ClusterSample, series: usize, step: usize) -> Vec2 {
        match &s.data {
            SampleData::Metric { center, coords, .. } => {
                if series == 0 {
                    center[step]
                } else {
                    coords[s.at(series - 1, step)]
                }
            }
            SampleData::Symbolic(_) => unreachable!("metric sample"),
        }
    }

    fn present(&self, s: &ClusterSample, series: usize, step: usize) -> bool {
        if self.config.framework.is_symbolic() {
            true
        } else {
            series == 0 || s.present[s.at(series - 1, step)]
        }
    }

    /// Content embedding of one series value per batch row, before the slot
    /// embedding.
    fn embed_symbols(&self, g: &mut Graph<'_>, indices: &[usize]) -> Result<NodeId> {
        let InputIds::Embedding(table) = self.ids.input else {
            unreachable!("symbolic model")
        };
        let t = g.param(table)?;
        Ok(g.gather_rows(t, indices)?)
    }

    fn embed_coords(&self, g: &mut Graph<'_>, points: &[Vec2]) -> Result<NodeId> {
        let InputIds::Projection { weight, bias } = self.ids.input else {
            unreachable!("metric model")
        };
        let data = points.iter().flat_map(|p| [p.x, p.y]).collect();
        let x = g.constant(Tensor::matrix(points.len(), 2, data)?)?;
        let w = g.param(weight)?;
        let b = g.param(bias)?;
        let y = g.matmul(x, w)?;
        Ok(g.add_row(y, b)?)
    }

    /// Content embedding of `series` at window `step` for every sample.
    fn embed_step(&self, g: &mut Graph<'_>, batch: &[&ClusterSample], series: usize, step: impl Fn(&ClusterSample) -> usize) -> Result<NodeId> {
        if self.config.framework.is_symbolic() {
            let idx: Vec<usize> = batch.iter().map(|s| Self::symbol(s, series, step(s))).collect();
            self.embed_symbols(g, &idx)
        } else {
            let pts: Vec<Vec2> = batch.iter().map(|s| Self::coord(s, series, step(s))).collect();
            self.embed_coords(g, &pts)
        }
    }

    fn attention_scores(&self, g: &mut Graph<'_>, ids: &AttentionIds, query: NodeId, keys: &[NodeId]) -> Result<NodeId> {
        let w = g.param(ids.w)?;
        let b = g.param(ids.b)?;
        let v = g.param(ids.v)?;
        let q = g.matmul(query, w)?;
        let q = g.add_row(q, b)?;
        let mut scores = Vec::with_capacity(keys.len());
        for &k in keys {
            let a = g.add(q, k)?;
            let a = g.tanh(a)?;
            scores.push(g.matmul(a, v)?);
        }
        let e = g.concat_cols(&scores)?;
        Ok(g.softmax_rows(e)?)
    }

    /// Softmax weights over the series from the encoder state `[h ; c]` and
    /// per-series history keys (`U * x^k`, each `[B x H]`).
    pub(crate) fn input_attention(&self, g: &mut Graph<'_>, state: NodeId, keys: &[NodeId]) -> Result<NodeId> {
        self.attention_scores(g, &self.ids.input_attention, state, keys)
    }

    /// Context vector over encoder states and its weights.
    pub(crate) fn temporal_attention(
        &self,
        g: &mut Graph<'_>,
        state: NodeId,
        keys: &[NodeId],
        encoder_states: &[NodeId],
    ) -> Result<(NodeId, NodeId)> {
        let beta = self.attention_scores(g, &self.ids.temporal_attention, state, keys)?;
        let mut context = None;
        for (i, &h) in encoder_states.iter().enumerate() {
            let w = g.slice_cols(beta, i, 1)?;
            let term = g.mul_col(h, w)?;
            context = Some(match context {
                None => term,
                Some(acc) => g.add(acc, term)?,
            });
        }
        Ok((context.expect("at least one encoder state"), beta))
    }

    pub(crate) fn forward(&self, g: &mut Graph<'_>, batch: &[&ClusterSample], teacher: bool) -> Result<Trace> {
        let c = &self.config;
        let (n, s_count, e, h, th, tf) = (batch.len(), c.series(), c.embed_dim, c.hidden, c.t_history, c.t_future);
        let symbolic = c.framework.is_symbolic();

        let slot_table = g.param(self.ids.slot)?;
        let slot_rows: Vec<NodeId> =
            (0..s_count).map(|k| g.gather_rows(slot_table, &vec![k; n])).collect::<std::result::Result<_, _>>()?;

        let mut content: Vec<Vec<NodeId>> = Vec::with_capacity(s_count);
        for k in 0..s_count {
            let mut row = Vec::with_capacity(th);
            for t in 0..th {
                row.push(self.embed_step(g, batch, k, |s| self.history_offset(s) + t)?);
            }
            content.push(row);
        }

        let ia_u = g.param(self.ids.input_attention.u)?;
        let mut keys = Vec::with_capacity(s_count);
        for series in &content {
            let x = g.concat_cols(series)?;
            keys.push(g.matmul(x, ia_u)?);
        }

        let zeros = g.constant(Tensor::zeros(&[n, h]))?;
        let (mut hs, mut cs) = (zeros, zeros);
        let mut encoder_states = Vec::with_capacity(th);
        let mut alpha = Vec::with_capacity(th);
        for t in 0..th {
            let state = g.concat_cols(&[hs, cs])?;
            let weights = self.input_attention(g, state, &keys)?;
            alpha.push(g.value(weights).clone());
            let mut parts = Vec::with_capacity(s_count);
            for k in 0..s_count {
                let x = g.add(content[k][t], slot_rows[k])?;
                let w = g.slice_cols(weights, k, 1)?;
                parts.push(g.mul_col(x, w)?);
            }
            let input = g.concat_cols(&parts)?;
            (hs, cs) = lstm_cell(g, input, hs, cs, &self.ids.encoder)?;
            encoder_states.push(hs);
        }

        let ta_u = g.param(self.ids.temporal_attention.u)?;
        let temporal_keys: Vec<NodeId> =
            encoder_states.iter().map(|&x| g.matmul(x, ta_u)).collect::<std::result::Result<_, _>>()?;

        let head_w = g.param(self.ids.head_w)?;
        let head_b = g.param(self.ids.head_b)?;
        let out_w = g.param(self.ids.out_w)?;
        let out_b = g.param(self.ids.out_b)?;

        let (mut d, mut ds) = (hs, cs);
        let mut prev: Vec<NodeId> = content.iter().map(|series| series[th - 1]).collect();
        let mut position = if symbolic {
            None
        } else {
            let mut data = Vec::with_capacity(s_count * n * 2);
            for k in 0..s_count {
                for smp in batch {
                    let p = Self::coord(smp, k, smp.t_history - 1);
                    data.extend([p.x, p.y]);
                }
            }
            Some(g.constant(Tensor::matrix(s_count * n, 2, data)?)?)
        };
        let mut outputs = Vec::with_capacity(tf);
        let mut beta = Vec::with_capacity(tf);
        for j in 0..tf {
            let state = g.concat_cols(&[d, ds])?;
            let (context, weights) = self.temporal_attention(g, state, &temporal_keys, &encoder_states)?;
            beta.push(g.value(weights).clone());
            let mut parts = Vec::with_capacity(s_count + 1);
            for k in 0..s_count {
                parts.push(g.add(prev[k], slot_rows[k])?);
            }
            parts.push(context);
            let input = g.concat_cols(&parts)?;
            (d, ds) = lstm_cell(g, input, d, ds, &self.ids.decoder)?;

            let dc = g.concat_cols(&[d, context])?;
            let z = g.matmul(dc, head_w)?;
            let z = g.add_row(z, head_b)?;
            let z = g.tanh(z)?;
            let rows: Vec<NodeId> =
                (0..s_count).map(|k| g.slice_cols(z, k * e, e)).collect::<std::result::Result<_, _>>()?;
            let rows = g.concat_rows(&rows)?;
            let out = g.matmul(rows, out_w)?;
            let mut out = g.add_row(out, out_b)?;
            if let Some(p) = position {
                out = g.add(p, out)?;
                position = Some(out);
            }
            outputs.push(out);

            if j + 1 == tf {
                break;
            }
            prev = if teacher {
                (0..s_count)
                    .map(|k| self.embed_step(g, batch, k, |s| s.t_history + j))
                    .collect::<Result<_>>()?
            } else if symbolic {
                let am = g.value(out).argmax_rows();
                (0..s_count).map(|k| self.embed_symbols(g, &am[k * n..(k + 1) * n])).collect::<Result<_>>()?
            } else {
                let v = g.value(out).clone();
                (0..s_count)
                    .map(|k| {
                        let pts: Vec<Vec2> = (0..n)
                            .map(|b| {
                                let r = v.row_slice(k * n + b);
                                Vec2::new(r[0], r[1])
                            })
                            .collect();
                        self.embed_coords(g, &pts)
                    })
                    .collect::<Result<_>>()?
            };
        }
        Ok(Trace { outputs, alpha, beta })
    }

    /// Mean cross-entropy over every series and step, or the masked
    /// coordinate RMSE.
    pub(crate) fn loss_node(&self, g: &mut Graph<'_>, batch: &[&ClusterSample], trace: &Trace) -> Result<NodeId> {
        let s_count = self.config.series();
        if self.config.framework.is_symbolic() {
            let logits = g.concat_rows(&trace.outputs)?;
            let mut targets = Vec::with_capacity(trace.outputs.len() * s_count * batch.len());
            for j in 0..trace.outputs.len() {
                for k in 0..s_count {
                    targets.extend(batch.iter().map(|s| Self::symbol(s, k, s.t_history + j)));
                }
            }
            return Ok(g.softmax_cross_entropy(logits, &targets)?);
        }
        let rows = s_count * batch.len();
        let mut terms = Vec::with_capacity(trace.outputs.len());
        let mut count = 0usize;
        for (j, &out) in trace.outputs.iter().enumerate() {
            let mut target = Vec::with_capacity(rows * 2);
            let mut mask = Vec::with_capacity(rows);
            for k in 0..s_count {
                for s in batch {
                    let step = s.t_history + j;
                    let p = Self::coord(s, k, step);
                    target.extend([p.x, p.y]);
                    let m = self.present(s, k, step);
                    count += usize::from(m);
                    mask.push(if m { 1.0 } else { 0.0 });
                }
            }
            let target = g.constant(Tensor::matrix(rows, 2, target)?)?;
            let mask = g.constant(Tensor::column(mask))?;
            let diff = g.sub(out, target)?;
            let sq = g.square(diff)?;
            terms.push(g.mul_col(sq, mask)?);
        }
        let all = g.concat_rows(&terms)?;
        let total = g.sum_all(all)?;
        let mean = g.scale(total, 1.0 / (2 * count.max(1)) as f64)?;
        if g.value(mean).item()? == 0.0 {
            return Ok(mean);
        }
        Ok(g.sqrt(mean)?)
    }
}
