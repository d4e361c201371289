use crate::graphs::{Modality, UnifiedGraph};
use crate::Scalar;

use super::{Gradient, Model, MpnnError};

/// What the network needs to see of a graph.
pub trait MessageGraph<T> {
    fn feature_dim(&self) -> usize;
    fn node_count(&self) -> usize;
    fn feature(&self, node: usize) -> &[T];
    fn modality(&self, node: usize) -> Modality;
    /// Neighbours in the order their messages are summed.
    fn neighbors(&self, node: usize) -> &[usize];
    /// Order in which node states are summed by the readout.
    fn canonical_order(&self) -> &[usize];
}

impl<T: Scalar> MessageGraph<T> for UnifiedGraph<T> {
    fn feature_dim(&self) -> usize {
        self.dim()
    }

    fn node_count(&self) -> usize {
        UnifiedGraph::node_count(self)
    }

    fn feature(&self, node: usize) -> &[T] {
        self.nodes()[node].feature.values()
    }

    fn modality(&self, node: usize) -> Modality {
        self.nodes()[node].modality
    }

    fn neighbors(&self, node: usize) -> &[usize] {
        UnifiedGraph::neighbors(self, node)
    }

    fn canonical_order(&self) -> &[usize] {
        UnifiedGraph::canonical_order(self)
    }
}

/// Predicted probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

/// Every intermediate of one forward pass. Row-major `nodes x width` buffers.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub inputs: Vec<T>,
    pub input_pre: Vec<T>,
    /// `layers + 1` hidden states, the first being `relu(input_pre)`.
    pub hidden: Vec<Vec<T>>,
    pub messages: Vec<Vec<T>>,
    pub update_pre: Vec<Vec<T>>,
    pub readout: Vec<T>,
    pub logit: T,
    pub raw_prob: T,
    pub prob: T,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Sign pattern of every ReLU input, plus whether the output clamp is active.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut p: Vec<bool> = self.input_pre.iter().map(|v| *v > T::zero()).collect();
        for z in &self.update_pre {
            p.extend(z.iter().map(|v| *v > T::zero()));
        }
        p.push(self.prob != self.raw_prob);
        p
    }
}

#[inline]
fn relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let lo = T::of(PROB_CLAMP);
    let hi = T::one() - lo;
    p.max(lo).min(hi)
}

/// `out[r] = sum_c w[r * cols + c] * x[c]`, ascending `c`.
#[inline]
fn matvec<T: Scalar>(w: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (a, b) in row.iter().zip(x) {
            acc += *a * *b;
        }
        *o = acc;
    }
}

/// Binary cross-entropy of the clamped probability.
pub fn loss<T: Scalar>(p: T, label: bool) -> T {
    let p = clamp_prob(p);
    if label {
        -p.ln()
    } else {
        -(T::one() - p).ln()
    }
}

pub fn trace<T: Scalar, G: MessageGraph<T> + ?Sized>(
    model: &Model<T>,
    graph: &G,
) -> Result<ForwardTrace<T>, MpnnError> {
    let arch = model.architecture();
    if graph.feature_dim() != arch.feature_dim {
        return Err(MpnnError::DimensionMismatch { expected: arch.feature_dim, actual: graph.feature_dim() });
    }
    let (n, h, d) = (graph.node_count(), arch.hidden, arch.input_width());

    let mut inputs = Vec::with_capacity(n * d);
    for i in 0..n {
        let f = graph.feature(i);
        if f.len() != arch.feature_dim {
            return Err(MpnnError::DimensionMismatch { expected: arch.feature_dim, actual: f.len() });
        }
        inputs.extend_from_slice(f);
        inputs.push(match graph.modality(i) {
            Modality::Visual => T::one(),
            Modality::Text => -T::one(),
        });
    }
    let mut input_pre = vec![T::zero(); n * h];
    for i in 0..n {
        matvec(&model.input, d, &inputs[i * d..(i + 1) * d], &mut input_pre[i * h..(i + 1) * h]);
    }
    let mut hidden = vec![input_pre.iter().map(|&v| relu(v)).collect::<Vec<T>>()];
    let mut messages = Vec::with_capacity(arch.layers);
    let mut update_pre = Vec::with_capacity(arch.layers);

    let mut projected = vec![T::zero(); n * h];
    let mut concat = vec![T::zero(); 2 * h];
    for l in 0..arch.layers {
        let cur = &hidden[l];
        for i in 0..n {
            matvec(&model.msg[l], h, &cur[i * h..(i + 1) * h], &mut projected[i * h..(i + 1) * h]);
        }
        let mut m = vec![T::zero(); n * h];
        for i in 0..n {
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                continue;
            }
            let mi = &mut m[i * h..(i + 1) * h];
            for &j in nbrs {
                for (a, b) in mi.iter_mut().zip(&projected[j * h..(j + 1) * h]) {
                    *a += *b;
                }
            }
            let deg = T::of(nbrs.len() as f64);
            mi.iter_mut().for_each(|v| *v /= deg);
        }
        let mut z = vec![T::zero(); n * h];
        for i in 0..n {
            concat[..h].copy_from_slice(&cur[i * h..(i + 1) * h]);
            concat[h..].copy_from_slice(&m[i * h..(i + 1) * h]);
            let zi = &mut z[i * h..(i + 1) * h];
            matvec(&model.upd[l], 2 * h, &concat, zi);
            for (v, b) in zi.iter_mut().zip(&model.bias[l]) {
                *v += *b;
            }
        }
        hidden.push(z.iter().map(|&v| relu(v)).collect());
        messages.push(m);
        update_pre.push(z);
    }

    let last = hidden.last().expect("at least the input layer");
    let mut readout = vec![T::zero(); h];
    for &i in graph.canonical_order() {
        for (a, b) in readout.iter_mut().zip(&last[i * h..(i + 1) * h]) {
            *a += *b;
        }
    }
    let count = T::of(n as f64);
    readout.iter_mut().for_each(|v| *v /= count);

    let mut logit = model.out_bias;
    for (w, g) in model.out.iter().zip(&readout) {
        logit += *w * *g;
    }
    let raw_prob = sigmoid(logit);
    Ok(ForwardTrace {
        inputs,
        input_pre,
        hidden,
        messages,
        update_pre,
        readout,
        logit,
        raw_prob,
        prob: clamp_prob(raw_prob),
    })
}

/// Clamped probability that `graph` is positive.
pub fn forward<T: Scalar, G: MessageGraph<T> + ?Sized>(model: &Model<T>, graph: &G) -> Result<T, MpnnError> {
    Ok(trace(model, graph)?.prob)
}

/// Exact gradient of `loss(forward(model, graph), label)`, and the loss itself.
pub fn grad<T: Scalar, G: MessageGraph<T> + ?Sized>(
    model: &Model<T>,
    graph: &G,
    label: bool,
) -> Result<(Gradient<T>, T), MpnnError> {
    let tr = trace(model, graph)?;
    let arch = model.architecture();
    let (n, h, d) = (graph.node_count(), arch.hidden, arch.input_width());
    let y = if label { T::one() } else { T::zero() };
    let value = loss(tr.prob, label);
    let mut g = Model::zeros(arch);
    // Every accumulation over nodes runs in canonical order so the gradient, like
    // the forward pass, does not depend on node numbering.
    let order = graph.canonical_order();

    // The clamp is flat outside its range.
    let dlogit = if tr.prob == tr.raw_prob { tr.raw_prob - y } else { T::zero() };
    g.out_bias = dlogit;
    for (gw, r) in g.out.iter_mut().zip(&tr.readout) {
        *gw = dlogit * *r;
    }
    let count = T::of(n as f64);
    let mut dh = vec![T::zero(); n * h];
    for i in 0..n {
        for (k, w) in model.out.iter().enumerate() {
            dh[i * h + k] = dlogit * *w / count;
        }
    }

    let mut dz = vec![T::zero(); h];
    let mut dproj = vec![T::zero(); n * h];
    for l in (0..arch.layers).rev() {
        let (cur, z, m) = (&tr.hidden[l], &tr.update_pre[l], &tr.messages[l]);
        let w_upd = &model.upd[l];
        let mut dprev = vec![T::zero(); n * h];
        let mut dm = vec![T::zero(); n * h];
        for &i in order {
            for r in 0..h {
                dz[r] = if z[i * h + r] > T::zero() { dh[i * h + r] } else { T::zero() };
            }
            let (hi, mi) = (&cur[i * h..(i + 1) * h], &m[i * h..(i + 1) * h]);
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == T::zero() {
                    continue;
                }
                g.bias[l][r] += dzr;
                let grow = &mut g.upd[l][r * 2 * h..(r + 1) * 2 * h];
                let wrow = &w_upd[r * 2 * h..(r + 1) * 2 * h];
                for c in 0..h {
                    grow[c] += dzr * hi[c];
                    grow[h + c] += dzr * mi[c];
                    dprev[i * h + c] += dzr * wrow[c];
                    dm[i * h + c] += dzr * wrow[h + c];
                }
            }
        }
        // m_i averages W_msg h_j over neighbours j.
        dproj.iter_mut().for_each(|v| *v = T::zero());
        for &i in order {
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                continue;
            }
            let deg = T::of(nbrs.len() as f64);
            for &j in nbrs {
                for c in 0..h {
                    dproj[j * h + c] += dm[i * h + c] / deg;
                }
            }
        }
        let w_msg = &model.msg[l];
        for &j in order {
            let hj = &cur[j * h..(j + 1) * h];
            for r in 0..h {
                let dp = dproj[j * h + r];
                if dp == T::zero() {
                    continue;
                }
                let grow = &mut g.msg[l][r * h..(r + 1) * h];
                let wrow = &w_msg[r * h..(r + 1) * h];
                for c in 0..h {
                    grow[c] += dp * hj[c];
                    dprev[j * h + c] += dp * wrow[c];
                }
            }
        }
        dh = dprev;
    }

    for &i in order {
        let xi = &tr.inputs[i * d..(i + 1) * d];
        for r in 0..h {
            if tr.input_pre[i * h + r] <= T::zero() {
                continue;
            }
            let da = dh[i * h + r];
            let grow = &mut g.input[r * d..(r + 1) * d];
            for c in 0..d {
                grow[c] += da * xi[c];
            }
        }
    }
    Ok((g, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::UnifiedNode;
    use crate::mpnn::Architecture;
    use crate::patch_grid::FeatureVector;

    fn graph(
        dim: usize,
        visual: usize,
        text: usize,
        edges: Vec<(usize, usize)>,
        bridge: (usize, usize),
    ) -> UnifiedGraph<f64> {
        let nodes = (0..visual + text)
            .map(|i| UnifiedNode {
                modality: if i < visual { Modality::Visual } else { Modality::Text },
                origin: i as u32,
                feature: FeatureVector::new((0..dim).map(|k| ((i * 7 + k * 3) % 5) as f64 / 5.0).collect()),
            })
            .collect();
        UnifiedGraph::new(dim, nodes, edges, bridge).unwrap()
    }

    #[test]
    fn zero_model_is_one_half() {
        let m = Model::<f64>::zeros(Architecture::new(3, 8, 4).unwrap());
        let g = graph(4, 2, 2, vec![(0, 1), (1, 2), (2, 3)], (1, 2));
        assert_eq!(forward(&m, &g).unwrap(), 0.5);
    }

    #[test]
    fn loss_values() {
        assert!((loss(0.5f64, true) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss(0.5f64, false) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss(1.0 - 1e-7f64, true) - 1e-7).abs() < 1e-12);
        assert!(loss(1.0f64, true).is_finite() && loss(0.0f64, true).is_finite());
        for p in [0.01f64, 0.3, 0.77] {
            assert!((loss(p, true) - loss(1.0 - p, false)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = Model::<f64>::zeros(Architecture::new(1, 2, 5).unwrap());
        let g = graph(4, 1, 1, vec![(0, 1)], (0, 1));
        assert_eq!(forward(&m, &g).unwrap_err(), MpnnError::DimensionMismatch { expected: 5, actual: 4 });
    }

    #[test]
    fn saturated_output_has_vanishing_gradient() {
        let mut m = Model::<f64>::zeros(Architecture::new(2, 4, 3).unwrap());
        m.out_bias = 40.0;
        let g = graph(3, 1, 1, vec![(0, 1)], (0, 1));
        let (gr, l) = grad(&m, &g, true).unwrap();
        assert!(l < 1e-6);
        assert!(gr.out_bias.abs() < 1e-6);
        assert!(gr.out.iter().all(|v| v.abs() < 1e-6));
    }
}
