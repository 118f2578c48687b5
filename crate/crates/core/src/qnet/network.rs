use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncodedInput, QNetError, Scalar, Vocabulary};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
struct Dense {
    weight: usize,
    bias: usize,
    inputs: usize,
    outputs: usize,
}

#[derive(Clone, Copy, Debug)]
struct Mlp {
    first: Dense,
    second: Dense,
}

#[derive(Clone, Debug)]
struct Layout {
    /// One message function per vocabulary predicate; nullary ones have none.
    messages: Vec<Option<Mlp>>,
    update: Mlp,
    gain: usize,
    bias: usize,
    readout: Mlp,
    total: usize,
}

impl Layout {
    fn new(vocab: &Vocabulary, k: usize) -> Self {
        let mut total = 0;
        let mut dense = |inputs: usize, outputs: usize| {
            let d = Dense {
                weight: total,
                bias: total + inputs * outputs,
                inputs,
                outputs,
            };
            total += inputs * outputs + outputs;
            d
        };
        let mut mlp = |inputs: usize, hidden: usize, outputs: usize| Mlp {
            first: dense(inputs, hidden),
            second: dense(hidden, outputs),
        };
        let messages = (0..vocab.len())
            .map(|p| {
                let n = vocab.arity(p);
                (n > 0).then(|| mlp(n * k, k, n * k))
            })
            .collect();
        let update = mlp(2 * k, k, k);
        let readout = mlp(2 * k, k, 1);
        let gain = total;
        let bias = total + k;
        total += 2 * k;
        Layout {
            messages,
            update,
            gain,
            bias,
            readout,
            total,
        }
    }

    fn dense_layers(&self) -> Vec<Dense> {
        let mut out = Vec::new();
        for m in self.messages.iter().flatten().chain([&self.update, &self.readout]) {
            out.push(m.first);
            out.push(m.second);
        }
        out
    }
}

/// Atoms of one predicate across the whole batch, with global object ids.
struct Group {
    predicate: usize,
    arity: usize,
    args: Vec<usize>,
}

impl Group {
    fn rows(&self) -> usize {
        self.args.len() / self.arity
    }
}

/// Disjoint union of the batch's graphs.
struct Batch {
    objects: usize,
    groups: Vec<Group>,
    /// Global object of each action, in batch order.
    action_objects: Vec<usize>,
    action_graph: Vec<usize>,
    /// Global ranges of the original (non-action) objects per graph.
    originals: Vec<(usize, usize)>,
    q_offsets: Vec<usize>,
}

impl Batch {
    fn new(vocab: &Vocabulary, inputs: &[&EncodedInput]) -> Result<Self, QNetError> {
        let mut groups: Vec<Group> = (0..vocab.len())
            .map(|p| Group {
                predicate: p,
                arity: vocab.arity(p),
                args: Vec::new(),
            })
            .collect();
        let mut base = 0;
        let mut action_objects = Vec::new();
        let mut action_graph = Vec::new();
        let mut originals = Vec::with_capacity(inputs.len());
        let mut q_offsets = vec![0];
        for (g, input) in inputs.iter().enumerate() {
            if input.vocabulary_hash != vocab.hash() {
                return Err(QNetError::VocabularyMismatch {
                    expected: vocab.hash(),
                    found: input.vocabulary_hash,
                });
            }
            for atom in &input.atoms {
                let p = atom.predicate as usize;
                if p >= groups.len() || groups[p].arity != atom.args.len() {
                    return Err(QNetError::UnknownPredicate(format!("#{p}/{}", atom.args.len())));
                }
                groups[p].args.extend(atom.args.iter().map(|&o| base + o as usize));
            }
            originals.push((base, base + input.num_original));
            for a in 0..input.num_actions() {
                action_objects.push(base + input.action_object(a));
                action_graph.push(g);
            }
            q_offsets.push(action_objects.len());
            base += input.num_objects;
        }
        groups.retain(|g| g.arity > 0 && !g.args.is_empty());
        Ok(Batch {
            objects: base,
            groups,
            action_objects,
            action_graph,
            originals,
            q_offsets,
        })
    }
}

struct MlpRecord<F> {
    input: Array2<F>,
    pre: Array2<F>,
    hidden: Array2<F>,
}

struct LayerRecord<F> {
    messages: Vec<MlpRecord<F>>,
    /// Flat message index that won the max for each (object, dim); `u32::MAX`
    /// when the object received no message.
    argmax: Vec<u32>,
    update: MlpRecord<F>,
    xhat: Array2<F>,
    inv_std: Vec<F>,
}

struct Tape<F> {
    batch: Batch,
    layers: Vec<LayerRecord<F>>,
    readout: MlpRecord<F>,
    aux: Option<(usize, MlpRecord<F>)>,
}

/// Q-values for a batch, flattened; graph `g` owns `offsets[g]..offsets[g+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QBatch<F> {
    pub q: Vec<F>,
    /// Q-values read out from an intermediate layer, when requested.
    pub aux: Option<Vec<F>>,
    pub offsets: Vec<usize>,
}

impl<F> QBatch<F> {
    pub fn graph(&self, g: usize) -> &[F] {
        &self.q[self.offsets[g]..self.offsets[g + 1]]
    }

    pub fn aux_graph(&self, g: usize) -> Option<&[F]> {
        self.aux.as_ref().map(|a| &a[self.offsets[g]..self.offsets[g + 1]])
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Message-passing network whose parameters are shared by all layers, so the
/// layer count only sets how many rounds are run.
pub struct QNetwork<F: Scalar> {
    vocab: Arc<Vocabulary>,
    width: usize,
    layers: usize,
    params: Vec<F>,
    layout: Layout,
    tape: Option<Tape<F>>,
}

impl<F: Scalar> Clone for QNetwork<F> {
    fn clone(&self) -> Self {
        QNetwork {
            vocab: Arc::clone(&self.vocab),
            width: self.width,
            layers: self.layers,
            params: self.params.clone(),
            layout: self.layout.clone(),
            tape: None,
        }
    }
}

impl<F: Scalar> std::fmt::Debug for QNetwork<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QNetwork")
            .field("domain", &self.vocab.domain)
            .field("width", &self.width)
            .field("layers", &self.layers)
            .field("params", &self.params.len())
            .finish()
    }
}

fn silu<F: Scalar>(x: F) -> F {
    x / (F::one() + (-x).exp())
}

fn silu_grad<F: Scalar>(x: F) -> F {
    let s = F::one() / (F::one() + (-x).exp());
    s * (F::one() + x * (F::one() - s))
}

impl<F: Scalar> QNetwork<F> {
    /// Weights and biases are uniform in ±1/sqrt(fan_in); layer norm gain one
    /// and bias zero. Nonzero biases matter: embeddings start at zero.
    pub fn new(vocab: Arc<Vocabulary>, width: usize, layers: usize, seed: u64) -> Self {
        assert!(width > 0, "embedding width must be positive");
        let layout = Layout::new(&vocab, width);
        let mut params = vec![F::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in layout.dense_layers() {
            let bound = 1.0 / (d.inputs as f64).sqrt();
            for w in &mut params[d.weight..d.bias + d.outputs] {
                *w = F::of(rng.gen_range(-bound..bound));
            }
        }
        for g in &mut params[layout.gain..layout.gain + width] {
            *g = F::one();
        }
        QNetwork {
            vocab,
            width,
            layers,
            params,
            layout,
            tape: None,
        }
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn set_layers(&mut self, layers: usize) {
        self.layers = layers;
        self.tape = None;
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    /// Mutable parameter access; drops any recorded forward pass.
    pub fn params_mut(&mut self) -> &mut [F] {
        self.tape = None;
        &mut self.params
    }

    pub fn copy_params_from(&mut self, other: &QNetwork<F>) {
        assert_eq!(self.params.len(), other.params.len());
        self.params.copy_from_slice(&other.params);
        self.tape = None;
    }

    /// Uniform over `1..=layers`; 0 for a network without layers.
    pub fn sample_aux_layer<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.layers == 0 {
            0
        } else {
            rng.gen_range(1..=self.layers)
        }
    }

    pub fn q_values(&self, input: &EncodedInput) -> Result<Vec<F>, QNetError> {
        Ok(self.forward(&[input])?.q)
    }

    pub fn forward(&self, inputs: &[&EncodedInput]) -> Result<QBatch<F>, QNetError> {
        let batch = Batch::new(&self.vocab, inputs)?;
        let (q, _, _) = self.run(batch, None, false);
        Ok(q)
    }

    /// Forward pass that records what `backward` needs. With `aux_layer`,
    /// the readout is also applied to the embeddings after that many layers.
    pub fn forward_train(
        &mut self,
        inputs: &[&EncodedInput],
        aux_layer: Option<usize>,
    ) -> Result<QBatch<F>, QNetError> {
        if let Some(l) = aux_layer {
            assert!(l <= self.layers, "aux layer {l} beyond {} layers", self.layers);
        }
        let batch = Batch::new(&self.vocab, inputs)?;
        let (q, tape, _) = self.run(batch, aux_layer, true);
        self.tape = tape;
        Ok(q)
    }

    /// Object embeddings after all layers (rows follow the batch's objects).
    pub fn embeddings(&self, inputs: &[&EncodedInput]) -> Result<Array2<F>, QNetError> {
        let batch = Batch::new(&self.vocab, inputs)?;
        let (_, _, emb) = self.run(batch, None, false);
        Ok(emb)
    }

    fn view(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, F> {
        ArrayView2::from_shape((rows, cols), &self.params[offset..offset + rows * cols]).expect("layout")
    }

    fn vector(&self, offset: usize, len: usize) -> ArrayView1<'_, F> {
        ArrayView1::from(&self.params[offset..offset + len])
    }

    fn dense(&self, d: &Dense, x: &Array2<F>) -> Array2<F> {
        let mut y = x.dot(&self.view(d.weight, d.inputs, d.outputs));
        y += &self.vector(d.bias, d.outputs);
        y
    }

    fn mlp(&self, m: &Mlp, input: Array2<F>) -> (Array2<F>, MlpRecord<F>) {
        let pre = self.dense(&m.first, &input);
        let hidden = pre.mapv(silu);
        let out = self.dense(&m.second, &hidden);
        (out, MlpRecord { input, pre, hidden })
    }

    fn readout(&self, batch: &Batch, emb: &Array2<F>) -> (Vec<F>, MlpRecord<F>) {
        let k = self.width;
        let mut sums = Array2::<F>::zeros((batch.originals.len(), k));
        for (g, &(lo, hi)) in batch.originals.iter().enumerate() {
            if hi > lo {
                sums.row_mut(g).assign(&emb.slice(s![lo..hi, ..]).sum_axis(Axis(0)));
            }
        }
        let mut input = Array2::<F>::zeros((batch.action_objects.len(), 2 * k));
        for (a, (&o, &g)) in batch.action_objects.iter().zip(&batch.action_graph).enumerate() {
            input.slice_mut(s![a, ..k]).assign(&emb.row(o));
            input.slice_mut(s![a, k..]).assign(&sums.row(g));
        }
        let (out, rec) = self.mlp(&self.layout.readout, input);
        (out.into_iter().collect(), rec)
    }

    fn layer(&self, batch: &Batch, emb: &Array2<F>) -> (Array2<F>, LayerRecord<F>) {
        let k = self.width;
        let n_obj = batch.objects;
        let emb_flat = emb.as_slice().expect("standard layout");
        let mut agg = vec![F::neg_infinity(); n_obj * k];
        let mut argmax = vec![u32::MAX; n_obj * k];
        let mut records = Vec::with_capacity(batch.groups.len());
        let mut flat_base = 0usize;
        for group in &batch.groups {
            let n = group.arity;
            let rows = group.rows();
            let mut x = Array2::<F>::zeros((rows, n * k));
            {
                let xs = x.as_slice_mut().expect("standard layout");
                for (slot, &o) in group.args.iter().enumerate() {
                    xs[slot * k..(slot + 1) * k].copy_from_slice(&emb_flat[o * k..(o + 1) * k]);
                }
            }
            let mlp = self.layout.messages[group.predicate].as_ref().expect("non-nullary");
            let (y, rec) = self.mlp(mlp, x);
            let ys = y.as_slice().expect("standard layout");
            for (slot, &o) in group.args.iter().enumerate() {
                for d in 0..k {
                    let v = ys[slot * k + d];
                    let cell = o * k + d;
                    if v > agg[cell] || argmax[cell] == u32::MAX {
                        agg[cell] = v;
                        argmax[cell] = (flat_base + slot * k + d) as u32;
                    }
                }
            }
            flat_base += rows * n * k;
            records.push(rec);
        }
        for (a, &i) in agg.iter_mut().zip(&argmax) {
            if i == u32::MAX {
                *a = F::zero();
            }
        }

        let mut z = Array2::<F>::zeros((n_obj, 2 * k));
        z.slice_mut(s![.., ..k]).assign(emb);
        z.slice_mut(s![.., k..])
            .assign(&ArrayView2::from_shape((n_obj, k), &agg).expect("shape"));
        let (u, update) = self.mlp(&self.layout.update, z);
        let r = u + emb;

        let kf = F::of(k as f64);
        let eps = F::of(LAYER_NORM_EPS);
        let gain = self.vector(self.layout.gain, k);
        let bias = self.vector(self.layout.bias, k);
        let mut xhat = Array2::<F>::zeros((n_obj, k));
        let mut inv_std = Vec::with_capacity(n_obj);
        for (i, row) in r.outer_iter().enumerate() {
            let mean = row.sum() / kf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / kf;
            let is = F::one() / (var + eps).sqrt();
            inv_std.push(is);
            for (d, &v) in row.iter().enumerate() {
                xhat[[i, d]] = (v - mean) * is;
            }
        }
        let out = &xhat * &gain + bias;
        (
            out,
            LayerRecord {
                messages: records,
                argmax,
                update,
                xhat,
                inv_std,
            },
        )
    }

    fn run(&self, batch: Batch, aux_layer: Option<usize>, record: bool) -> (QBatch<F>, Option<Tape<F>>, Array2<F>) {
        let mut emb = Array2::<F>::zeros((batch.objects, self.width));
        let mut layer_records = Vec::new();
        let mut aux = None;
        if aux_layer == Some(0) {
            aux = Some((0, self.readout(&batch, &emb)));
        }
        for l in 0..self.layers {
            let (next, rec) = self.layer(&batch, &emb);
            emb = next;
            if record {
                layer_records.push(rec);
            }
            if aux_layer == Some(l + 1) && l + 1 < self.layers {
                aux = Some((l + 1, self.readout(&batch, &emb)));
            }
        }
        let (q, readout) = self.readout(&batch, &emb);
        let aux = match (aux_layer, aux) {
            (Some(l), None) if l == self.layers => {
                // Same embeddings as the final readout.
                Some((l, MlpRecord {
                    input: readout.input.clone(),
                    pre: readout.pre.clone(),
                    hidden: readout.hidden.clone(),
                }, q.clone()))
            }
            (_, Some((l, (values, rec)))) => Some((l, rec, values)),
            _ => None,
        };
        let qbatch = QBatch {
            q,
            aux: aux.as_ref().map(|(_, _, v)| v.clone()),
            offsets: batch.q_offsets.clone(),
        };
        let tape = record.then(|| Tape {
            batch,
            layers: layer_records,
            readout,
            aux: aux.map(|(l, rec, _)| (l, rec)),
        });
        (qbatch, tape, emb)
    }

    /// Backpropagates d loss / d q (and d loss / d aux q, if the recorded pass
    /// had an auxiliary readout) and returns the parameter gradient.
    pub fn backward(&mut self, dq: &[F], daux: Option<&[F]>) -> Result<Vec<F>, QNetError> {
        let tape = self.tape.take().ok_or(QNetError::NoRecordedForward)?;
        let outputs = tape.batch.action_objects.len();
        for g in std::iter::once(dq).chain(daux) {
            if g.len() != outputs {
                return Err(QNetError::GradientShape {
                    expected: outputs,
                    found: g.len(),
                });
            }
        }
        let mut grads = vec![F::zero(); self.params.len()];
        let mut d = self.readout_backward(&tape.batch, &tape.readout, dq, &mut grads);
        let aux_grad = match (&tape.aux, daux) {
            (Some((l, rec)), Some(da)) => Some((*l, self.readout_backward(&tape.batch, rec, da, &mut grads))),
            _ => None,
        };
        if let Some((l, da)) = &aux_grad {
            if *l == self.layers {
                d += da;
            }
        }
        for l in (0..tape.layers.len()).rev() {
            if let Some((al, da)) = &aux_grad {
                if *al == l + 1 && *al < self.layers {
                    d += da;
                }
            }
            d = self.layer_backward(&tape.batch, &tape.layers[l], d, &mut grads);
        }
        Ok(grads)
    }

    fn dense_backward(&self, dense: &Dense, input: &Array2<F>, dout: &Array2<F>, grads: &mut [F]) -> Array2<F> {
        {
            let len = dense.inputs * dense.outputs;
            let mut dw = ArrayViewMut2::from_shape(
                (dense.inputs, dense.outputs),
                &mut grads[dense.weight..dense.weight + len],
            )
            .expect("layout");
            general_mat_mul(F::one(), &input.t(), dout, F::one(), &mut dw);
        }
        {
            let mut db = ArrayViewMut1::from(&mut grads[dense.bias..dense.bias + dense.outputs]);
            db += &dout.sum_axis(Axis(0));
        }
        dout.dot(&self.view(dense.weight, dense.inputs, dense.outputs).t())
    }

    fn mlp_backward(&self, m: &Mlp, rec: &MlpRecord<F>, dout: &Array2<F>, grads: &mut [F]) -> Array2<F> {
        let dh = self.dense_backward(&m.second, &rec.hidden, dout, grads);
        let dpre = ndarray::Zip::from(&dh).and(&rec.pre).map_collect(|&g, &x| g * silu_grad(x));
        self.dense_backward(&m.first, &rec.input, &dpre, grads)
    }

    fn readout_backward(&self, batch: &Batch, rec: &MlpRecord<F>, dq: &[F], grads: &mut [F]) -> Array2<F> {
        let k = self.width;
        let dout = Array2::from_shape_vec((dq.len(), 1), dq.to_vec()).expect("shape");
        let din = self.mlp_backward(&self.layout.readout, rec, &dout, grads);
        let mut demb = Array2::<F>::zeros((batch.objects, k));
        let mut dsum = Array2::<F>::zeros((batch.originals.len(), k));
        for (a, (&o, &g)) in batch.action_objects.iter().zip(&batch.action_graph).enumerate() {
            let mut row = demb.row_mut(o);
            row += &din.slice(s![a, ..k]);
            let mut srow = dsum.row_mut(g);
            srow += &din.slice(s![a, k..]);
        }
        for (g, &(lo, hi)) in batch.originals.iter().enumerate() {
            for o in lo..hi {
                let mut row = demb.row_mut(o);
                row += &dsum.row(g);
            }
        }
        demb
    }

    fn layer_backward(&self, batch: &Batch, rec: &LayerRecord<F>, dout: Array2<F>, grads: &mut [F]) -> Array2<F> {
        let k = self.width;
        let n_obj = batch.objects;
        let kf = F::of(k as f64);

        {
            let mut dgain = ArrayViewMut1::from(&mut grads[self.layout.gain..self.layout.gain + k]);
            dgain += &(&dout * &rec.xhat).sum_axis(Axis(0));
        }
        {
            let mut dbias = ArrayViewMut1::from(&mut grads[self.layout.bias..self.layout.bias + k]);
            dbias += &dout.sum_axis(Axis(0));
        }
        let gain: Array1<F> = self.vector(self.layout.gain, k).to_owned();
        let dxhat = &dout * &gain;
        let mut dr = Array2::<F>::zeros((n_obj, k));
        for i in 0..n_obj {
            let dx = dxhat.row(i);
            let xh = rec.xhat.row(i);
            let m1 = dx.sum() / kf;
            let m2 = dx.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<F>() / kf;
            for d in 0..k {
                dr[[i, d]] = rec.inv_std[i] * (dx[d] - m1 - xh[d] * m2);
            }
        }

        let dz = self.mlp_backward(&self.layout.update, &rec.update, &dr, grads);
        let mut demb = dr;
        demb += &dz.slice(s![.., ..k]);
        let dagg = dz.slice(s![.., k..]);

        // Route the aggregate gradient to the winning messages.
        let mut dmsg: Vec<Array2<F>> = batch
            .groups
            .iter()
            .map(|g| Array2::zeros((g.rows(), g.arity * k)))
            .collect();
        let mut starts = Vec::with_capacity(batch.groups.len());
        let mut acc = 0usize;
        for g in &batch.groups {
            starts.push(acc);
            acc += g.args.len() * k;
        }
        for o in 0..n_obj {
            for d in 0..k {
                let idx = rec.argmax[o * k + d];
                if idx == u32::MAX {
                    continue;
                }
                let idx = idx as usize;
                let gi = starts.partition_point(|&s| s <= idx) - 1;
                let local = idx - starts[gi];
                dmsg[gi].as_slice_mut().expect("standard layout")[local] += dagg[[o, d]];
            }
        }
        for ((group, mrec), dy) in batch.groups.iter().zip(&rec.messages).zip(&dmsg) {
            let mlp = self.layout.messages[group.predicate].as_ref().expect("non-nullary");
            let dx = self.mlp_backward(mlp, mrec, dy, grads);
            let dxs = dx.as_slice().expect("standard layout");
            let de = demb.as_slice_mut().expect("standard layout");
            for (slot, &o) in group.args.iter().enumerate() {
                for d in 0..k {
                    de[o * k + d] += dxs[slot * k + d];
                }
            }
        }
        demb
    }
}
