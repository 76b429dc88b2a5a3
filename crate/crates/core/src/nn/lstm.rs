//! Two-layer LSTM shared by both traversal directions of a cycle.
//!
//! The feature of a cycle is `(h₁ + h₂) ⊕ (c₁ + c₂)`, the top-layer final
//! hidden and cell states of the forward sequence and its reverse. Features
//! are computed once per distinct forward sequence; the backward pass reruns
//! the forward with the same dropout masks instead of storing traces.

use super::model::Mode;
use super::params::{LstmLayer, ModelConfig, ModelParams};
use super::sequence::{reverse_tokens, SequenceTable};
use super::tensor::{sigmoid, Tensor};
use crate::par;

/// Sequences per work unit; fixed so reductions do not depend on threads.
pub const CHUNK: usize = 256;
const DROPOUT_TAG: u64 = 1;

#[derive(Debug, Default, Clone)]
struct LayerTrace {
    din: usize,
    x: Vec<f64>,
    /// Activated gates per step: i, f, g, o.
    gates: Vec<f64>,
    /// States with the zero initial state at position 0.
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Per-step record of one sequence through both layers.
#[derive(Debug, Default, Clone)]
pub struct Trace {
    steps: usize,
    hidden: usize,
    layers: [LayerTrace; 2],
}

impl Trace {
    pub fn final_hidden(&self) -> &[f64] {
        let l = &self.layers[1];
        &l.h[self.steps * self.hidden..]
    }

    pub fn final_cell(&self) -> &[f64] {
        let l = &self.layers[1];
        &l.c[self.steps * self.hidden..]
    }
}

/// Input of a layer: dense rows of `tr.x`, or a lookup into precomputed
/// `embedding · W_input` rows for the bottom layer.
#[derive(Clone, Copy)]
enum Input<'a> {
    Dense,
    Projected { table: &'a Tensor, tokens: &'a [u32] },
}

fn run_layer(
    layer: &LstmLayer,
    hd: usize,
    din: usize,
    steps: usize,
    input: Input<'_>,
    tr: &mut LayerTrace,
) {
    tr.din = din;
    tr.gates.clear();
    tr.gates.resize(steps * 4 * hd, 0.0);
    tr.c.clear();
    tr.c.resize((steps + 1) * hd, 0.0);
    tr.h.clear();
    tr.h.resize((steps + 1) * hd, 0.0);
    tr.tanh_c.clear();
    tr.tanh_c.resize(steps * hd, 0.0);
    for t in 0..steps {
        let a = &mut tr.gates[t * 4 * hd..(t + 1) * 4 * hd];
        a.copy_from_slice(&layer.bias.data);
        match input {
            Input::Projected { table, tokens } => {
                for (av, &w) in a.iter_mut().zip(table.row(tokens[t] as usize)) {
                    *av += w;
                }
            }
            Input::Dense => {
                for (k, &xk) in tr.x[t * din..(t + 1) * din].iter().enumerate() {
                    if xk == 0.0 {
                        continue;
                    }
                    for (av, &w) in a.iter_mut().zip(layer.w_input.row(k)) {
                        *av += xk * w;
                    }
                }
            }
        }
        for k in 0..hd {
            let hk = tr.h[t * hd + k];
            if hk == 0.0 {
                continue;
            }
            for (av, &w) in a.iter_mut().zip(layer.w_hidden.row(k)) {
                *av += hk * w;
            }
        }
        for j in 0..hd {
            let i = sigmoid(a[j]);
            let f = sigmoid(a[hd + j]);
            let g = a[2 * hd + j].tanh();
            let o = sigmoid(a[3 * hd + j]);
            a[j] = i;
            a[hd + j] = f;
            a[2 * hd + j] = g;
            a[3 * hd + j] = o;
            let c = f * tr.c[t * hd + j] + i * g;
            let tc = c.tanh();
            tr.c[(t + 1) * hd + j] = c;
            tr.tanh_c[t * hd + j] = tc;
            tr.h[(t + 1) * hd + j] = o * tc;
        }
    }
}

/// `embedding · W_input` of the bottom layer, one row per token.
pub fn input_projection(p: &ModelParams) -> Tensor {
    p.embeddings.matmul(&p.lstm[0].w_input)
}

/// Runs both layers over `tokens`. `proj` is [`input_projection`]; `mask`
/// (steps × hidden) scales the layer-0 outputs fed to layer 1.
pub fn encode(
    p: &ModelParams,
    proj: &Tensor,
    hd: usize,
    tokens: &[u32],
    mask: Option<&[f64]>,
    tr: &mut Trace,
) {
    let steps = tokens.len();
    let de = p.embeddings.cols;
    tr.steps = steps;
    tr.hidden = hd;
    let [l0, l1] = &mut tr.layers;
    l0.x.clear();
    run_layer(&p.lstm[0], hd, de, steps, Input::Projected { table: proj, tokens }, l0);
    l1.x.clear();
    l1.x.extend_from_slice(&l0.h[hd..]);
    if let Some(m) = mask {
        for (x, &s) in l1.x.iter_mut().zip(m) {
            *x *= s;
        }
    }
    run_layer(&p.lstm[1], hd, hd, steps, Input::Dense, l1);
}

/// Backpropagates through one layer. `dh_ext` adds per-step gradients on
/// the outputs; returns the gradient on the inputs.
///
/// With `dproj` set the layer input was a projection lookup: gate gradients
/// go to the token's row of `dproj` and no input gradient is returned.
fn backward_layer(
    layer: &LstmLayer,
    grad: &mut LstmLayer,
    hd: usize,
    steps: usize,
    tr: &LayerTrace,
    dh_ext: Option<&[f64]>,
    dh_final: &[f64],
    dc_final: &[f64],
    mut dproj: Option<(&mut Tensor, &[u32])>,
) -> Vec<f64> {
    let din = tr.din;
    let mut dx = if dproj.is_some() {
        Vec::new()
    } else {
        vec![0.0; steps * din]
    };
    let mut dh = dh_final.to_vec();
    let mut dc = dc_final.to_vec();
    let mut da = vec![0.0; 4 * hd];
    for t in (0..steps).rev() {
        if let Some(e) = dh_ext {
            for (d, &v) in dh.iter_mut().zip(&e[t * hd..(t + 1) * hd]) {
                *d += v;
            }
        }
        let a = &tr.gates[t * 4 * hd..(t + 1) * 4 * hd];
        for j in 0..hd {
            let (i, f, g, o) = (a[j], a[hd + j], a[2 * hd + j], a[3 * hd + j]);
            let tc = tr.tanh_c[t * hd + j];
            let c_prev = tr.c[t * hd + j];
            let d_o = dh[j] * tc;
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            da[j] = dcj * g * i * (1.0 - i);
            da[hd + j] = dcj * c_prev * f * (1.0 - f);
            da[2 * hd + j] = dcj * i * (1.0 - g * g);
            da[3 * hd + j] = d_o * o * (1.0 - o);
            dc[j] = dcj * f;
        }
        for (b, &d) in grad.bias.data.iter_mut().zip(&da) {
            *b += d;
        }
        if let Some((dp, tokens)) = dproj.as_mut() {
            for (g, &d) in dp.row_mut(tokens[t] as usize).iter_mut().zip(&da) {
                *g += d;
            }
        } else {
            let x = &tr.x[t * din..(t + 1) * din];
            for k in 0..din {
                let xk = x[k];
                if xk != 0.0 {
                    for (w, &d) in grad.w_input.row_mut(k).iter_mut().zip(&da) {
                        *w += xk * d;
                    }
                }
                dx[t * din + k] = super::tensor::dot(layer.w_input.row(k), &da);
            }
        }
        let h_prev = &tr.h[t * hd..(t + 1) * hd];
        for k in 0..hd {
            let hk = h_prev[k];
            if hk != 0.0 {
                for (w, &d) in grad.w_hidden.row_mut(k).iter_mut().zip(&da) {
                    *w += hk * d;
                }
            }
            dh[k] = super::tensor::dot(layer.w_hidden.row(k), &da);
        }
    }
    dx
}

/// Accumulates gradients for one sequence whose top-layer final states
/// received `dh_top` and `dc_top`. Bottom-layer input gradients land in
/// `dproj` (see [`projection_backward`]).
pub fn backward_sequence(
    p: &ModelParams,
    hd: usize,
    tokens: &[u32],
    mask: Option<&[f64]>,
    tr: &Trace,
    dh_top: &[f64],
    dc_top: &[f64],
    grads: &mut ModelParams,
    dproj: &mut Tensor,
) {
    let steps = tokens.len();
    let [g0, g1] = &mut grads.lstm;
    let mut dx1 =
        backward_layer(&p.lstm[1], g1, hd, steps, &tr.layers[1], None, dh_top, dc_top, None);
    if let Some(m) = mask {
        for (d, &s) in dx1.iter_mut().zip(m) {
            *d *= s;
        }
    }
    let zeros = vec![0.0; hd];
    backward_layer(
        &p.lstm[0],
        g0,
        hd,
        steps,
        &tr.layers[0],
        Some(&dx1),
        &zeros,
        &zeros,
        Some((dproj, tokens)),
    );
}

/// Turns the gradient on `embedding · W_input` into gradients on both
/// factors.
pub fn projection_backward(p: &ModelParams, dproj: &Tensor, grads: &mut ModelParams) {
    p.embeddings.t_matmul_into(dproj, &mut grads.lstm[0].w_input);
    let de = dproj.matmul_t(&p.lstm[0].w_input);
    grads.embeddings.add_assign(&de);
}

/// Dropout masks for both directions of sequence `id`, or `None` outside
/// training.
fn masks(cfg: &ModelConfig, mode: Mode, id: usize, steps: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut rng = mode.dropout_rng(cfg.dropout, &[DROPOUT_TAG, id as u64])?;
    let n = steps * cfg.hidden;
    let m1 = super::dropout_mask(&mut rng, n, cfg.dropout);
    let m2 = super::dropout_mask(&mut rng, n, cfg.dropout);
    Some((m1, m2))
}

/// Feature of one cycle from its forward token sequence.
pub fn cycle_feature(p: &ModelParams, cfg: &ModelConfig, tokens: &[u32]) -> Vec<f64> {
    let mut tr = [Trace::default(), Trace::default()];
    feature_into(p, &input_projection(p), cfg, tokens, None, &mut tr)
}

fn feature_into(
    p: &ModelParams,
    proj: &Tensor,
    cfg: &ModelConfig,
    tokens: &[u32],
    masks: Option<&(Vec<f64>, Vec<f64>)>,
    tr: &mut [Trace; 2],
) -> Vec<f64> {
    let hd = cfg.hidden;
    let reverse = reverse_tokens(tokens, cfg.num_relations);
    let [t1, t2] = tr;
    encode(p, proj, hd, tokens, masks.map(|m| m.0.as_slice()), t1);
    encode(p, proj, hd, &reverse, masks.map(|m| m.1.as_slice()), t2);
    let mut out = Vec::with_capacity(2 * hd);
    out.extend(t1.final_hidden().iter().zip(t2.final_hidden()).map(|(a, b)| a + b));
    out.extend(t1.final_cell().iter().zip(t2.final_cell()).map(|(a, b)| a + b));
    out
}

fn chunks(n: usize) -> usize {
    n.div_ceil(CHUNK)
}

/// Features of every sequence in `table`, one row each.
pub fn features(p: &ModelParams, cfg: &ModelConfig, table: &SequenceTable, mode: Mode) -> Tensor {
    let fd = cfg.feature_dim();
    let proj = input_projection(p);
    let parts = par::map_indexed(chunks(table.len()), |c| {
        let mut tr = [Trace::default(), Trace::default()];
        let end = ((c + 1) * CHUNK).min(table.len());
        let mut rows = Vec::with_capacity((end - c * CHUNK) * fd);
        for id in c * CHUNK..end {
            let tokens = table.get(id);
            let m = masks(cfg, mode, id, tokens.len());
            rows.extend(feature_into(p, &proj, cfg, tokens, m.as_ref(), &mut tr));
        }
        rows
    });
    Tensor::from_vec(table.len(), fd, parts.concat())
}

/// Gradients of the LSTM and embeddings given feature gradients `dfeat`.
pub fn backward(
    p: &ModelParams,
    cfg: &ModelConfig,
    table: &SequenceTable,
    mode: Mode,
    dfeat: &Tensor,
    grads: &mut ModelParams,
) {
    let hd = cfg.hidden;
    let proj = input_projection(p);
    let parts = par::map_indexed(chunks(table.len()), |c| {
        let mut g = p.zeros_like();
        let mut dproj = Tensor::zeros(proj.rows, proj.cols);
        let mut tr = [Trace::default(), Trace::default()];
        let end = ((c + 1) * CHUNK).min(table.len());
        for id in c * CHUNK..end {
            let d = dfeat.row(id);
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            let tokens = table.get(id);
            let m = masks(cfg, mode, id, tokens.len());
            feature_into(p, &proj, cfg, tokens, m.as_ref(), &mut tr);
            let reverse = reverse_tokens(tokens, cfg.num_relations);
            let (dh, dc) = d.split_at(hd);
            let m1 = m.as_ref().map(|m| m.0.as_slice());
            let m2 = m.as_ref().map(|m| m.1.as_slice());
            backward_sequence(p, hd, tokens, m1, &tr[0], dh, dc, &mut g, &mut dproj);
            backward_sequence(p, hd, &reverse, m2, &tr[1], dh, dc, &mut g, &mut dproj);
        }
        (g, dproj)
    });
    let mut dproj = Tensor::zeros(proj.rows, proj.cols);
    for (g, dp) in &parts {
        dproj.add_assign(dp);
        for l in 0..2 {
            grads.lstm[l].w_input.add_assign(&g.lstm[l].w_input);
            grads.lstm[l].w_hidden.add_assign(&g.lstm[l].w_hidden);
            grads.lstm[l].bias.add_assign(&g.lstm[l].bias);
        }
    }
    projection_backward(p, &dproj, grads);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        let mut c = ModelConfig::new(3, 1);
        c.embed_dim = 4;
        c.hidden = 3;
        c
    }

    #[test]
    fn zero_parameters_give_zero_feature() {
        let c = ModelConfig::new(5, 2);
        let p = ModelParams::zeros(&c);
        let f = cycle_feature(&p, &c, &[0, 7, 3, 2]);
        assert_eq!(f.len(), 20);
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identical_sequences_identical_features() {
        let c = cfg();
        let p = ModelParams::init(&c, 3);
        assert_eq!(cycle_feature(&p, &c, &[0, 4, 2]), cycle_feature(&p, &c, &[0, 4, 2]));
        assert_ne!(cycle_feature(&p, &c, &[0, 4, 2]), cycle_feature(&p, &c, &[1, 4, 2]));
    }

    /// Hand-rolled single step against the gate equations.
    #[test]
    fn one_step_matches_equations() {
        let c = cfg();
        let p = ModelParams::init(&c, 9);
        let mut tr = Trace::default();
        encode(&p, &input_projection(&p), c.hidden, &[2], None, &mut tr);
        let hd = c.hidden;
        let x = p.embeddings.row(2);
        let mut h0 = vec![0.0; hd];
        let mut c0 = vec![0.0; hd];
        for j in 0..hd {
            let pre = |gate: usize| -> f64 {
                let col = gate * hd + j;
                (0..x.len()).map(|k| x[k] * p.lstm[0].w_input.get(k, col)).sum::<f64>()
            };
            let (i, g, o) = (sigmoid(pre(0)), pre(2).tanh(), sigmoid(pre(3)));
            c0[j] = i * g;
            h0[j] = o * c0[j].tanh();
        }
        let mut h1 = vec![0.0; hd];
        let mut c1 = vec![0.0; hd];
        for j in 0..hd {
            let pre = |gate: usize| -> f64 {
                let col = gate * hd + j;
                (0..hd).map(|k| h0[k] * p.lstm[1].w_input.get(k, col)).sum::<f64>()
            };
            let (i, g, o) = (sigmoid(pre(0)), pre(2).tanh(), sigmoid(pre(3)));
            c1[j] = i * g;
            h1[j] = o * c1[j].tanh();
        }
        for j in 0..hd {
            assert!((tr.final_hidden()[j] - h1[j]).abs() < 1e-14);
            assert!((tr.final_cell()[j] - c1[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn features_match_single_cycle_path() {
        let c = cfg();
        let p = ModelParams::init(&c, 5);
        let mut table = SequenceTable::new();
        table.insert(vec![0, 1, 5]);
        table.insert(vec![3, 2]);
        let f = features(&p, &c, &table, Mode::Eval);
        assert_eq!(f.row(1), cycle_feature(&p, &c, &[3, 2]).as_slice());
    }
}
