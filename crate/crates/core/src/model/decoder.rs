use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::linalg::{gelu, gelu_grad, gemm, layer_norm, layer_norm_backward, linear, linear_backward, LayerNormOut};
use super::{InterleavedInput, ParamStore, Slot, ToyModelConfig};
use crate::error::{Error, Result};
use crate::losses::lm_loss;

#[derive(Debug, Clone)]
struct LayerIds {
    ln1_g: usize,
    ln1_b: usize,
    qkv_w: usize,
    qkv_b: usize,
    proj_w: usize,
    proj_b: usize,
    ln2_g: usize,
    ln2_b: usize,
    fc_w: usize,
    fc_b: usize,
    out_w: usize,
    out_b: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    wte: usize,
    wpe: usize,
    frame_w: usize,
    frame_b: usize,
    layers: Vec<LayerIds>,
    lnf_g: usize,
    lnf_b: usize,
    head_w: usize,
    head_b: usize,
}

/// Pre-norm GPT-style decoder with a linear frame projection.
#[derive(Debug, Clone)]
pub struct ToyDecoder {
    config: ToyModelConfig,
    params: ParamStore,
    layout: Layout,
}

/// Logits for every position of every input and the LM loss over the
/// supervised answer rows.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Per sample, `seq_len × vocab`.
    pub logits: Vec<Vec<f64>>,
    /// `None` when no input carries answer targets.
    pub lm_loss: Option<f64>,
}

/// Key/value cache for incremental decoding.
#[derive(Debug, Clone)]
pub struct DecodeState {
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    pos: usize,
    /// Logits of the most recent position.
    pub logits: Vec<f64>,
}

impl DecodeState {
    pub fn position(&self) -> usize {
        self.pos
    }
}

struct LayerCache {
    ln1: LayerNormOut,
    qkv: Vec<f64>,
    /// `heads × n × n` attention weights.
    att: Vec<f64>,
    attn_out: Vec<f64>,
    ln2: LayerNormOut,
    fc: Vec<f64>,
    act: Vec<f64>,
}

pub(crate) struct SeqCache {
    n: usize,
    layers: Vec<LayerCache>,
    lnf: LayerNormOut,
    rows: Range<usize>,
}

impl ToyDecoder {
    pub fn new(config: ToyModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = config.init_std;
        let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        let proj_std = std / (2.0 * config.n_layers as f64).sqrt();
        let proj_normal = Normal::new(0.0, proj_std).map_err(|e| Error::invalid(e.to_string()))?;
        let d = config.d_model;
        let v = config.vocab.len();
        let mut rand = |n: usize, dist: &Normal<f64>| -> Vec<f64> { (0..n).map(|_| dist.sample(&mut rng)).collect() };

        let mut p = ParamStore::new();
        let wte = p.push("wte", vec![v, d], rand(v * d, &normal));
        let wpe = p.push("wpe", vec![config.max_seq_len, d], rand(config.max_seq_len * d, &normal));
        let fdim = config.frame_feature_dim;
        let frame_w = p.push("frame.w", vec![fdim, d], rand(fdim * d, &normal));
        let frame_b = p.push("frame.b", vec![d], vec![0.0; d]);
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let name = |s: &str| format!("h{l}.{s}");
            layers.push(LayerIds {
                ln1_g: p.push(name("ln1.g"), vec![d], vec![1.0; d]),
                ln1_b: p.push(name("ln1.b"), vec![d], vec![0.0; d]),
                qkv_w: p.push(name("attn.qkv.w"), vec![d, 3 * d], rand(3 * d * d, &normal)),
                qkv_b: p.push(name("attn.qkv.b"), vec![3 * d], vec![0.0; 3 * d]),
                proj_w: p.push(name("attn.proj.w"), vec![d, d], rand(d * d, &proj_normal)),
                proj_b: p.push(name("attn.proj.b"), vec![d], vec![0.0; d]),
                ln2_g: p.push(name("ln2.g"), vec![d], vec![1.0; d]),
                ln2_b: p.push(name("ln2.b"), vec![d], vec![0.0; d]),
                fc_w: p.push(name("mlp.fc.w"), vec![d, 4 * d], rand(4 * d * d, &normal)),
                fc_b: p.push(name("mlp.fc.b"), vec![4 * d], vec![0.0; 4 * d]),
                out_w: p.push(name("mlp.out.w"), vec![4 * d, d], rand(4 * d * d, &proj_normal)),
                out_b: p.push(name("mlp.out.b"), vec![d], vec![0.0; d]),
            });
        }
        let lnf_g = p.push("lnf.g", vec![d], vec![1.0; d]);
        let lnf_b = p.push("lnf.b", vec![d], vec![0.0; d]);
        let head_w = p.push("head.w", vec![d, v], rand(d * v, &normal));
        let head_b = p.push("head.b", vec![v], vec![0.0; v]);
        Ok(Self {
            config,
            params: p,
            layout: Layout {
                wte,
                wpe,
                frame_w,
                frame_b,
                layers,
                lnf_g,
                lnf_b,
                head_w,
                head_b,
            },
        })
    }

    /// Rebuild a decoder around stored parameters; names and shapes must match
    /// what `config` produces.
    pub fn from_params(config: ToyModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        if model.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for (i, (name, shape, _)) in params.iter().enumerate() {
            if model.params.name(i) != name || model.params.shape(i) != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: found {name} {shape:?}, expected {} {:?}",
                    model.params.name(i),
                    model.params.shape(i)
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ToyModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab.len()
    }

    /// Zero the output projection, making every prediction uniform.
    pub fn zero_head(&mut self) {
        for id in [self.layout.head_w, self.layout.head_b] {
            self.params.get_mut(id).iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Full-sequence logits for a batch, with the LM loss averaged over all
    /// supervised answer rows.
    pub fn forward(&self, inputs: &[InterleavedInput]) -> Result<ForwardOutput> {
        let v = self.vocab_size();
        let mut logits = Vec::with_capacity(inputs.len());
        let mut sup_logits = Vec::new();
        let mut sup_targets = Vec::new();
        for input in inputs {
            self.check_answer(input)?;
            let n = input.slots.len();
            let (l, _) = self.forward_cached(input, 0..n, false)?;
            for (k, r) in input.answer_rows().enumerate() {
                sup_logits.extend_from_slice(&l[r * v..(r + 1) * v]);
                sup_targets.push(input.answer_targets[k]);
            }
            logits.push(l);
        }
        let lm_loss = if sup_targets.is_empty() {
            None
        } else {
            Some(lm_loss(&sup_logits, v, &sup_targets)?)
        };
        Ok(ForwardOutput { logits, lm_loss })
    }

    fn check_answer(&self, input: &InterleavedInput) -> Result<()> {
        let rows = input.answer_rows();
        if !input.answer_targets.is_empty() && rows.end > input.slots.len() {
            return Err(Error::invalid(format!(
                "answer rows {rows:?} exceed sequence length {}",
                input.slots.len()
            )));
        }
        Ok(())
    }

    /// Logits of `rows` and, when `record` is set, every activation needed by
    /// [`backward`](Self::backward).
    pub(crate) fn forward_cached(
        &self,
        input: &InterleavedInput,
        rows: Range<usize>,
        record: bool,
    ) -> Result<(Vec<f64>, Option<SeqCache>)> {
        let n = input.slots.len();
        if rows.end > n || rows.start > rows.end {
            return Err(Error::invalid(format!("logit rows {rows:?} outside sequence of {n}")));
        }
        if input.frame_slots() != self.config.frames {
            return Err(Error::invalid(format!(
                "input has {} frame slots, model expects {}",
                input.frame_slots(),
                self.config.frames
            )));
        }
        let x = self.embed(&input.slots, &input.frame_features, 0)?;
        let d = self.config.d_model;
        let mut keys = vec![Vec::new(); self.config.n_layers];
        let mut values = vec![Vec::new(); self.config.n_layers];
        let mut layers = Vec::new();
        let x = self.run_layers(x, n, 0, &mut keys, &mut values, record.then_some(&mut layers));
        let lnf = layer_norm(&x, self.params.get(self.layout.lnf_g), self.params.get(self.layout.lnf_b), d);
        let logits = self.head(&lnf.out[rows.start * d..rows.end * d], rows.len());
        let cache = record.then_some(SeqCache {
            n,
            layers,
            lnf,
            rows,
        });
        Ok((logits, cache))
    }

    fn head(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let d = self.config.d_model;
        linear(
            x,
            self.params.get(self.layout.head_w),
            self.params.get(self.layout.head_b),
            rows,
            d,
            self.vocab_size(),
        )
    }

    fn embed(&self, slots: &[Slot], features: &[f64], pos0: usize) -> Result<Vec<f64>> {
        let d = self.config.d_model;
        let fdim = self.config.frame_feature_dim;
        let frames = self.config.frames;
        if pos0 + slots.len() > self.config.max_seq_len {
            return Err(Error::invalid(format!(
                "sequence of {} positions exceeds max_seq_len {}",
                pos0 + slots.len(),
                self.config.max_seq_len
            )));
        }
        let wte = self.params.get(self.layout.wte);
        let wpe = self.params.get(self.layout.wpe);
        let fw = self.params.get(self.layout.frame_w);
        let fb = self.params.get(self.layout.frame_b);
        let mut x = vec![0.0; slots.len() * d];
        for (t, slot) in slots.iter().enumerate() {
            let row = &mut x[t * d..(t + 1) * d];
            match *slot {
                Slot::Token(id) => {
                    let id = id as usize;
                    if id >= self.vocab_size() {
                        return Err(Error::invalid(format!("token id {id} outside vocab")));
                    }
                    row.copy_from_slice(&wte[id * d..(id + 1) * d]);
                }
                Slot::Frame(j) => {
                    if j >= frames || features.len() != frames * fdim {
                        return Err(Error::invalid(format!(
                            "frame slot {j} with {} feature values for {frames}x{fdim}",
                            features.len()
                        )));
                    }
                    row.copy_from_slice(fb);
                    gemm(1, fdim, d, 1.0, &features[j * fdim..], (fdim, 1), fw, (d, 1), 1.0, row, (d, 1));
                }
            }
            let p = pos0 + t;
            for (r, e) in row.iter_mut().zip(&wpe[p * d..(p + 1) * d]) {
                *r += e;
            }
        }
        Ok(x)
    }

    /// Push `n` new rows through every block, attending to the cached keys
    /// and values of the `pos` earlier rows.
    fn run_layers(
        &self,
        mut x: Vec<f64>,
        n: usize,
        pos: usize,
        keys: &mut [Vec<f64>],
        values: &mut [Vec<f64>],
        mut record: Option<&mut Vec<LayerCache>>,
    ) -> Vec<f64> {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let total = pos + n;
        for (l, ids) in self.layout.layers.iter().enumerate() {
            let p = &self.params;
            let ln1 = layer_norm(&x, p.get(ids.ln1_g), p.get(ids.ln1_b), d);
            let qkv = linear(&ln1.out, p.get(ids.qkv_w), p.get(ids.qkv_b), n, d, 3 * d);
            for r in 0..n {
                keys[l].extend_from_slice(&qkv[r * 3 * d + d..r * 3 * d + 2 * d]);
                values[l].extend_from_slice(&qkv[r * 3 * d + 2 * d..(r + 1) * 3 * d]);
            }
            let mut attn_out = vec![0.0; n * d];
            let mut att_all = if record.is_some() {
                vec![0.0; heads * n * total]
            } else {
                Vec::new()
            };
            let mut scores = vec![0.0; n * total];
            for h in 0..heads {
                gemm(
                    n,
                    hd,
                    total,
                    scale,
                    &qkv[h * hd..],
                    (3 * d, 1),
                    &keys[l][h * hd..],
                    (1, d),
                    0.0,
                    &mut scores,
                    (total, 1),
                );
                for i in 0..n {
                    let row = &mut scores[i * total..(i + 1) * total];
                    let visible = pos + i + 1;
                    let max = row[..visible].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for s in &mut row[..visible] {
                        *s = (*s - max).exp();
                        sum += *s;
                    }
                    for s in &mut row[..visible] {
                        *s /= sum;
                    }
                    row[visible..].iter_mut().for_each(|s| *s = 0.0);
                }
                gemm(
                    n,
                    total,
                    hd,
                    1.0,
                    &scores,
                    (total, 1),
                    &values[l][h * hd..],
                    (d, 1),
                    0.0,
                    &mut attn_out[h * hd..],
                    (d, 1),
                );
                if record.is_some() {
                    att_all[h * n * total..(h + 1) * n * total].copy_from_slice(&scores);
                }
            }
            let y = linear(&attn_out, p.get(ids.proj_w), p.get(ids.proj_b), n, d, d);
            for (a, b) in x.iter_mut().zip(&y) {
                *a += b;
            }
            let ln2 = layer_norm(&x, p.get(ids.ln2_g), p.get(ids.ln2_b), d);
            let fc = linear(&ln2.out, p.get(ids.fc_w), p.get(ids.fc_b), n, d, 4 * d);
            let act: Vec<f64> = fc.iter().map(|&u| gelu(u)).collect();
            let z = linear(&act, p.get(ids.out_w), p.get(ids.out_b), n, 4 * d, d);
            for (a, b) in x.iter_mut().zip(&z) {
                *a += b;
            }
            if let Some(rec) = record.as_deref_mut() {
                rec.push(LayerCache {
                    ln1,
                    qkv,
                    att: att_all,
                    attn_out,
                    ln2,
                    fc,
                    act,
                });
            }
        }
        x
    }

    /// Accumulate into `grads` the gradient of `Σ dlogits · logits` for the
    /// rows recorded in `cache`.
    pub(crate) fn backward(&self, input: &InterleavedInput, cache: &SeqCache, dlogits: &[f64], grads: &mut ParamStore) {
        let d = self.config.d_model;
        let v = self.vocab_size();
        let heads = self.config.n_heads;
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let n = cache.n;
        let lay = &self.layout;
        let p = &self.params;
        debug_assert_eq!(dlogits.len(), cache.rows.len() * v);

        // output head
        let rows = cache.rows.clone();
        let xr = &cache.lnf.out[rows.start * d..rows.end * d];
        let dxr = {
            let (dw, db) = grads.pair_mut(lay.head_w, lay.head_b);
            linear_backward(xr, p.get(lay.head_w), dlogits, rows.len(), d, v, dw, db)
        };
        let mut dlnf = vec![0.0; n * d];
        dlnf[rows.start * d..rows.end * d].copy_from_slice(&dxr);
        let mut dx = {
            let (dg, db) = grads.pair_mut(lay.lnf_g, lay.lnf_b);
            layer_norm_backward(&dlnf, &cache.lnf.xhat, &cache.lnf.rstd, p.get(lay.lnf_g), d, dg, db)
        };

        for (ids, c) in lay.layers.iter().zip(&cache.layers).rev() {
            // MLP branch
            let mut dact = {
                let (dw, db) = grads.pair_mut(ids.out_w, ids.out_b);
                linear_backward(&c.act, p.get(ids.out_w), &dx, n, 4 * d, d, dw, db)
            };
            for (g, &u) in dact.iter_mut().zip(&c.fc) {
                *g *= gelu_grad(u);
            }
            let dln2 = {
                let (dw, db) = grads.pair_mut(ids.fc_w, ids.fc_b);
                linear_backward(&c.ln2.out, p.get(ids.fc_w), &dact, n, d, 4 * d, dw, db)
            };
            let dmid = {
                let (dg, db) = grads.pair_mut(ids.ln2_g, ids.ln2_b);
                layer_norm_backward(&dln2, &c.ln2.xhat, &c.ln2.rstd, p.get(ids.ln2_g), d, dg, db)
            };
            for (a, b) in dx.iter_mut().zip(&dmid) {
                *a += b;
            }

            // attention branch
            let dattn = {
                let (dw, db) = grads.pair_mut(ids.proj_w, ids.proj_b);
                linear_backward(&c.attn_out, p.get(ids.proj_w), &dx, n, d, d, dw, db)
            };
            let mut dqkv = vec![0.0; n * 3 * d];
            let mut datt = vec![0.0; n * n];
            for h in 0..heads {
                let att = &c.att[h * n * n..(h + 1) * n * n];
                // d(att) = d(out_h) V_hᵀ
                gemm(n, hd, n, 1.0, &dattn[h * hd..], (d, 1), &c.qkv[2 * d + h * hd..], (1, 3 * d), 0.0, &mut datt, (n, 1));
                // dV_h = attᵀ d(out_h)
                gemm(n, n, hd, 1.0, att, (1, n), &dattn[h * hd..], (d, 1), 0.0, &mut dqkv[2 * d + h * hd..], (3 * d, 1));
                for i in 0..n {
                    let a = &att[i * n..(i + 1) * n];
                    let g = &mut datt[i * n..(i + 1) * n];
                    let dot: f64 = a[..=i].iter().zip(&g[..=i]).map(|(x, y)| x * y).sum();
                    for j in 0..n {
                        g[j] = if j <= i { a[j] * (g[j] - dot) * scale } else { 0.0 };
                    }
                }
                // dQ_h = dS K_h, dK_h = dSᵀ Q_h
                gemm(n, n, hd, 1.0, &datt, (n, 1), &c.qkv[d + h * hd..], (3 * d, 1), 0.0, &mut dqkv[h * hd..], (3 * d, 1));
                gemm(n, n, hd, 1.0, &datt, (1, n), &c.qkv[h * hd..], (3 * d, 1), 0.0, &mut dqkv[d + h * hd..], (3 * d, 1));
            }
            let dln1 = {
                let (dw, db) = grads.pair_mut(ids.qkv_w, ids.qkv_b);
                linear_backward(&c.ln1.out, p.get(ids.qkv_w), &dqkv, n, d, 3 * d, dw, db)
            };
            let din = {
                let (dg, db) = grads.pair_mut(ids.ln1_g, ids.ln1_b);
                layer_norm_backward(&dln1, &c.ln1.xhat, &c.ln1.rstd, p.get(ids.ln1_g), d, dg, db)
            };
            for (a, b) in dx.iter_mut().zip(&din) {
                *a += b;
            }
        }

        // embeddings
        let fdim = self.config.frame_feature_dim;
        for (t, slot) in input.slots.iter().enumerate() {
            let g = &dx[t * d..(t + 1) * d];
            let wpe = grads.get_mut(lay.wpe);
            for (w, gi) in wpe[t * d..(t + 1) * d].iter_mut().zip(g) {
                *w += gi;
            }
            match *slot {
                Slot::Token(id) => {
                    let id = id as usize;
                    let wte = grads.get_mut(lay.wte);
                    for (w, gi) in wte[id * d..(id + 1) * d].iter_mut().zip(g) {
                        *w += gi;
                    }
                }
                Slot::Frame(j) => {
                    let feat = &input.frame_features[j * fdim..(j + 1) * fdim];
                    let fw = grads.get_mut(lay.frame_w);
                    for (k, &fv) in feat.iter().enumerate() {
                        for (w, gi) in fw[k * d..(k + 1) * d].iter_mut().zip(g) {
                            *w += fv * gi;
                        }
                    }
                    let fb = grads.get_mut(lay.frame_b);
                    for (w, gi) in fb.iter_mut().zip(g) {
                        *w += gi;
                    }
                }
            }
        }
    }

    /// Run the prompt of `input` and return a cache positioned after it.
    pub fn start_decoding(&self, input: &InterleavedInput) -> Result<DecodeState> {
        if input.frame_slots() != self.config.frames {
            return Err(Error::invalid(format!(
                "input has {} frame slots, model expects {}",
                input.frame_slots(),
                self.config.frames
            )));
        }
        let prompt = &input.slots[..input.prompt_len()];
        let mut state = DecodeState {
            keys: vec![Vec::new(); self.config.n_layers],
            values: vec![Vec::new(); self.config.n_layers],
            pos: 0,
            logits: Vec::new(),
        };
        self.advance(&mut state, prompt, &input.frame_features)?;
        Ok(state)
    }

    /// Append one token and refresh `state.logits`.
    pub fn decode_step(&self, state: &mut DecodeState, token: u32) -> Result<()> {
        self.advance(state, &[Slot::Token(token)], &[])
    }

    fn advance(&self, state: &mut DecodeState, slots: &[Slot], features: &[f64]) -> Result<()> {
        let d = self.config.d_model;
        let n = slots.len();
        let x = self.embed(slots, features, state.pos)?;
        let x = self.run_layers(x, n, state.pos, &mut state.keys, &mut state.values, None);
        let last = &x[(n - 1) * d..n * d];
        let lnf = layer_norm(last, self.params.get(self.layout.lnf_g), self.params.get(self.layout.lnf_b), d);
        state.logits = self.head(&lnf.out, 1);
        state.pos += n;
        Ok(())
    }
}
