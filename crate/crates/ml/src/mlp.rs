use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MlError, Result};

const NORM_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    LayerNorm,
    BatchNorm,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::LayerNorm => "layer_norm",
            Normalization::BatchNorm => "batch_norm",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Normalization {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "none" | "" => Ok(Normalization::None),
            "layernorm" | "ln" | "layer" => Ok(Normalization::LayerNorm),
            "batchnorm" | "bn" | "batch" => Ok(Normalization::BatchNorm),
            other => Err(MlError::InvalidConfig(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub num_layers: usize,
    pub hidden_channels: usize,
    pub dropout: f64,
    pub normalization: Normalization,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            num_layers: 2,
            hidden_channels: 64,
            dropout: 0.0,
            normalization: Normalization::None,
            learning_rate: 0.01,
            weight_decay: 0.0,
            max_epochs: 2500,
            seed: 0,
        }
    }
}

impl MlpConfig {
    /// The single affine map baseline.
    pub fn linear() -> Self {
        MlpConfig {
            num_layers: 1,
            ..MlpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MlError::InvalidConfig(msg));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1".into());
        }
        if self.num_layers > 1 && self.hidden_channels == 0 {
            return bad("hidden_channels must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        Ok(())
    }
}

/// Anything that maps a feature matrix to class logits.
pub trait Classifier {
    fn predict_logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Affine {
    /// `in x out`
    weight: Array2<f64>,
    bias: Array1<f64>,
}

impl Affine {
    fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound));
        let bias = Array1::from_shape_simple_fn(fan_out, || rng.random_range(-bound..bound));
        Affine { weight, bias }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weight);
        z += &self.bias;
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Norm {
    None,
    Layer {
        gamma: Array1<f64>,
        beta: Array1<f64>,
    },
    Batch {
        gamma: Array1<f64>,
        beta: Array1<f64>,
        running_mean: Array1<f64>,
        running_var: Array1<f64>,
    },
}

impl Norm {
    fn new(kind: Normalization, width: usize) -> Self {
        match kind {
            Normalization::None => Norm::None,
            Normalization::LayerNorm => Norm::Layer {
                gamma: Array1::ones(width),
                beta: Array1::zeros(width),
            },
            Normalization::BatchNorm => Norm::Batch {
                gamma: Array1::ones(width),
                beta: Array1::zeros(width),
                running_mean: Array1::zeros(width),
                running_var: Array1::ones(width),
            },
        }
    }
}

/// How a forward pass treats batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics for batch norm, dropout active when a noise stream is given.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

enum NormCache {
    None,
    /// `inv_std` per column; `batch_moments` holds (mean, biased var) when
    /// batch statistics were used.
    Batch {
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
        batch_moments: Option<(Array1<f64>, Array1<f64>)>,
    },
    /// `inv_std` per row.
    Layer { xhat: Array2<f64>, inv_std: Array1<f64> },
}

struct HiddenCache {
    norm: NormCache,
    /// Output of the layer after rectifier and dropout. A positive entry
    /// means the unit was active and kept.
    output: Array2<f64>,
    dropout_scale: f64,
}

/// Values saved by a recorded forward pass for the backward pass.
pub struct Tape<'a> {
    input: ArrayView2<'a, f64>,
    hidden: Vec<HiddenCache>,
}

impl Tape<'_> {
    fn layer_input(&self, l: usize) -> ArrayView2<'_, f64> {
        if l == 0 {
            self.input.view()
        } else {
            self.hidden[l - 1].output.view()
        }
    }
}

/// Gradients in the order of [`Mlp::param_slices_mut`].
pub type Gradients = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    input_dim: usize,
    num_classes: usize,
    dropout: f64,
    layers: Vec<Affine>,
    norms: Vec<Norm>,
}

impl Mlp {
    /// Fan-in scaled uniform initialization from `cfg.seed`.
    pub fn new(cfg: &MlpConfig, input_dim: usize, num_classes: usize) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 || num_classes == 0 {
            return Err(MlError::InvalidConfig(format!(
                "need positive input width and class count, got {input_dim} and {num_classes}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut widths = vec![input_dim];
        widths.extend(std::iter::repeat_n(cfg.hidden_channels, cfg.num_layers - 1));
        widths.push(num_classes);
        let layers = widths
            .windows(2)
            .map(|w| Affine::init(w[0], w[1], &mut rng))
            .collect();
        let norms = (0..cfg.num_layers - 1)
            .map(|_| Norm::new(cfg.normalization, cfg.hidden_channels))
            .collect();
        let dropout = if cfg.num_layers > 1 { cfg.dropout } else { 0.0 };
        Ok(Mlp {
            input_dim,
            num_classes,
            dropout,
            layers,
            norms,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_parameters(&self) -> usize {
        self.param_slices().iter().map(|p| p.len()).sum()
    }

    /// Weight matrix (`in x out`) of affine layer `l`.
    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        self.layers[l].weight.view()
    }

    /// Trainable tensors: per layer the weight and bias, then the scale and
    /// shift of that layer's normalization if it has one.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        let mut norms = self.norms.iter_mut();
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
            match norms.next() {
                Some(Norm::Layer { gamma, beta }) | Some(Norm::Batch { gamma, beta, .. }) => {
                    out.push(gamma.as_slice_mut().expect("standard layout"));
                    out.push(beta.as_slice_mut().expect("standard layout"));
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        let mut norms = self.norms.iter();
        for layer in &self.layers {
            out.push(layer.weight.as_slice().expect("standard layout"));
            out.push(layer.bias.as_slice().expect("standard layout"));
            match norms.next() {
                Some(Norm::Layer { gamma, beta }) | Some(Norm::Batch { gamma, beta, .. }) => {
                    out.push(gamma.as_slice().expect("standard layout"));
                    out.push(beta.as_slice().expect("standard layout"));
                }
                _ => {}
            }
        }
        out
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(MlError::DimensionMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Forward pass. With `record` the intermediate values are kept for
    /// [`Mlp::backward`]; `noise` enables dropout in [`Mode::Train`].
    pub fn forward<'a>(
        &self,
        x: ArrayView2<'a, f64>,
        mode: Mode,
        mut noise: Option<&mut ChaCha8Rng>,
        record: bool,
    ) -> (Array2<f64>, Option<Tape<'a>>) {
        let last = self.layers.len() - 1;
        let mut hidden: Vec<HiddenCache> = Vec::new();
        let mut carry: Option<Array2<f64>> = None;
        for l in 0..last {
            let input = match (&carry, hidden.last()) {
                (Some(h), _) => h.view(),
                (None, Some(c)) => c.output.view(),
                (None, None) => x.view(),
            };
            let rng = match mode {
                Mode::Train => noise.as_deref_mut(),
                Mode::Eval => None,
            };
            let cache = self.hidden_forward(l, input, mode, rng);
            if record {
                hidden.push(cache);
            } else {
                carry = Some(cache.output);
            }
        }
        let input = match (&carry, hidden.last()) {
            (Some(h), _) => h.view(),
            (None, Some(c)) => c.output.view(),
            (None, None) => x.view(),
        };
        let logits = self.layers[last].apply(input);
        let tape = record.then_some(Tape { input: x, hidden });
        (logits, tape)
    }

    fn hidden_forward(
        &self,
        l: usize,
        input: ArrayView2<'_, f64>,
        mode: Mode,
        noise: Option<&mut ChaCha8Rng>,
    ) -> HiddenCache {
        let mut z = self.layers[l].apply(input);
        let width = z.ncols();
        let (mut out, norm) = match &self.norms[l] {
            Norm::None => (z, NormCache::None),
            Norm::Layer { gamma, beta } => {
                let mut inv_std = Array1::zeros(z.nrows());
                let zs = z.as_slice_mut().expect("standard layout");
                for (row, is) in zs.chunks_exact_mut(width).zip(inv_std.iter_mut()) {
                    let mean = row.iter().sum::<f64>() / width as f64;
                    let mut var = 0.0;
                    for v in row.iter_mut() {
                        *v -= mean;
                        var += *v * *v;
                    }
                    *is = 1.0 / (var / width as f64 + NORM_EPS).sqrt();
                    for v in row.iter_mut() {
                        *v *= *is;
                    }
                }
                let out = scale_shift(&z, gamma, beta);
                (out, NormCache::Layer { xhat: z, inv_std })
            }
            Norm::Batch {
                gamma,
                beta,
                running_mean,
                running_var,
            } => {
                let (mean, var) = match mode {
                    Mode::Train => column_moments(&z),
                    Mode::Eval => (running_mean.clone(), running_var.clone()),
                };
                let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
                let (m, is) = (mean.as_slice().unwrap(), inv_std.as_slice().unwrap());
                for row in z.as_slice_mut().expect("standard layout").chunks_exact_mut(width) {
                    for j in 0..width {
                        row[j] = (row[j] - m[j]) * is[j];
                    }
                }
                let out = scale_shift(&z, gamma, beta);
                let batch_moments = (mode == Mode::Train).then_some((mean, var));
                (
                    out,
                    NormCache::Batch {
                        xhat: z,
                        inv_std,
                        batch_moments,
                    },
                )
            }
        };
        let values = out.as_slice_mut().expect("standard layout");
        let dropout_scale = match noise {
            Some(rng) if self.dropout > 0.0 => {
                // four 16-bit uniforms per draw
                let threshold = (self.dropout * 65_536.0).round() as u64;
                let scale = 1.0 / (1.0 - self.dropout);
                for chunk in values.chunks_mut(4) {
                    let bits = rng.next_u64();
                    for (k, v) in chunk.iter_mut().enumerate() {
                        let kept = ((bits >> (16 * k)) & 0xffff >= threshold) as u8 as f64;
                        *v = v.max(0.0) * scale * kept;
                    }
                }
                scale
            }
            _ => {
                for v in values.iter_mut() {
                    *v = v.max(0.0);
                }
                1.0
            }
        };
        HiddenCache {
            norm,
            output: out,
            dropout_scale,
        }
    }

    /// Folds the batch moments of a train-mode tape into the running
    /// estimates of every batch-norm layer.
    pub fn update_running_stats(&mut self, tape: &Tape<'_>, num_rows: usize) {
        let correction = if num_rows > 1 {
            num_rows as f64 / (num_rows - 1) as f64
        } else {
            1.0
        };
        for (norm, cache) in self.norms.iter_mut().zip(&tape.hidden) {
            if let (
                Norm::Batch {
                    running_mean,
                    running_var,
                    ..
                },
                NormCache::Batch {
                    batch_moments: Some((mean, var)),
                    ..
                },
            ) = (norm, &cache.norm)
            {
                Zip::from(&mut *running_mean)
                    .and(mean)
                    .for_each(|r, &m| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m);
                Zip::from(&mut *running_var)
                    .and(var)
                    .for_each(|r, &v| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v * correction);
            }
        }
    }

    /// Backpropagates `dlogits` through a recorded pass.
    pub fn backward(&self, tape: &Tape<'_>, dlogits: Array2<f64>) -> Gradients {
        let last = self.layers.len() - 1;
        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];

        per_layer[last].push(flat(tape.layer_input(last).t().dot(&dlogits)));
        per_layer[last].push(column_sums(&dlogits));
        let mut g = (last > 0).then(|| dlogits.dot(&self.layers[last].weight.t()));

        for l in (0..last).rev() {
            let cache = &tape.hidden[l];
            let mut grad = g.take().expect("hidden gradient");
            let scale = cache.dropout_scale;
            Zip::from(&mut grad).and(&cache.output).for_each(|d, &o| {
                *d = if o > 0.0 { *d * scale } else { 0.0 };
            });
            let (dz, norm_grads) = normalize_backward(&self.norms[l], &cache.norm, grad);
            per_layer[l].push(flat(tape.layer_input(l).t().dot(&dz)));
            per_layer[l].push(column_sums(&dz));
            per_layer[l].extend(norm_grads);
            if l > 0 {
                g = Some(dz.dot(&self.layers[l].weight.t()));
            }
        }
        per_layer.into_iter().flatten().collect()
    }

    /// Mean cross-entropy over `rows` and its gradient, without dropout.
    /// `mode` picks batch or running statistics for batch norm.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[i64],
        rows: &[usize],
        mode: Mode,
    ) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        let (logits, tape) = self.forward(x, mode, None, true);
        let (loss, dlogits) = softmax_cross_entropy(logits.view(), labels, rows);
        Ok((loss, self.backward(&tape.expect("recorded"), dlogits)))
    }

    pub fn loss(&self, x: ArrayView2<'_, f64>, labels: &[i64], rows: &[usize], mode: Mode) -> Result<f64> {
        self.check_input(x)?;
        let (logits, _) = self.forward(x, mode, None, false);
        Ok(softmax_cross_entropy(logits.view(), labels, rows).0)
    }
}

impl Classifier for Mlp {
    fn predict_logits(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input_dim, "feature width");
        self.forward(x, Mode::Eval, None, false).0
    }
}

fn flat(a: Array2<f64>) -> Vec<f64> {
    if a.is_standard_layout() {
        a.into_raw_vec_and_offset().0
    } else {
        a.iter().copied().collect()
    }
}

fn column_sums(a: &Array2<f64>) -> Vec<f64> {
    let width = a.ncols();
    let mut sums = vec![0.0; width];
    for row in a.rows() {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Column means and biased variances.
fn column_moments(z: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = z.nrows() as f64;
    let mean = Array1::from(column_sums(z)) / n;
    let mut var = Array1::<f64>::zeros(z.ncols());
    for row in z.rows() {
        Zip::from(&mut var).and(row).and(&mean).for_each(|s, &v, &m| {
            let d = v - m;
            *s += d * d;
        });
    }
    (mean, var / n)
}

fn scale_shift(xhat: &Array2<f64>, gamma: &Array1<f64>, beta: &Array1<f64>) -> Array2<f64> {
    let mut out = xhat * gamma;
    out += beta;
    out
}

/// Returns the gradient with respect to the pre-normalization values and
/// the scale/shift gradients.
fn normalize_backward(norm: &Norm, cache: &NormCache, grad: Array2<f64>) -> (Array2<f64>, Vec<Vec<f64>>) {
    let width = grad.ncols();
    match (norm, cache) {
        (Norm::None, _) => (grad, Vec::new()),
        (Norm::Layer { gamma, .. }, NormCache::Layer { xhat, inv_std }) => {
            let mut dgamma = vec![0.0; width];
            let dbeta = column_sums(&grad);
            let mut dz = grad;
            let gam = gamma.as_slice().unwrap();
            let h = width as f64;
            for ((d, xh), &is) in dz.rows_mut().into_iter().zip(xhat.rows()).zip(inv_std) {
                let (d, xh) = (d.into_slice().unwrap(), xh.to_slice().unwrap());
                let mut s = 0.0;
                let mut p = 0.0;
                for j in 0..width {
                    dgamma[j] += d[j] * xh[j];
                    d[j] *= gam[j];
                    s += d[j];
                    p += d[j] * xh[j];
                }
                for j in 0..width {
                    d[j] = is * (d[j] - s / h - xh[j] * p / h);
                }
            }
            (dz, vec![dgamma, dbeta])
        }
        (Norm::Batch { gamma, .. }, NormCache::Batch { xhat, inv_std, batch_moments }) => {
            let n = grad.nrows() as f64;
            let mut dgamma = vec![0.0; width];
            for (g, xh) in grad.rows().into_iter().zip(xhat.rows()) {
                for ((dg, &gv), &xv) in dgamma.iter_mut().zip(g).zip(xh) {
                    *dg += gv * xv;
                }
            }
            let dbeta = column_sums(&grad);
            let factor: Vec<f64> = gamma.iter().zip(inv_std).map(|(g, i)| g * i).collect();
            let mut dz = grad;
            let batch = batch_moments.is_some();
            for (d, xh) in dz.rows_mut().into_iter().zip(xhat.rows()) {
                let (d, xh) = (d.into_slice().unwrap(), xh.to_slice().unwrap());
                for j in 0..width {
                    d[j] = if batch {
                        factor[j] * (d[j] - dbeta[j] / n - xh[j] * dgamma[j] / n)
                    } else {
                        factor[j] * d[j]
                    };
                }
            }
            (dz, vec![dgamma, dbeta])
        }
        _ => unreachable!("normalization cache does not match layer"),
    }
}

/// Mean softmax cross-entropy over `rows` and its gradient with respect to
/// all logits (zero outside `rows`).
pub fn softmax_cross_entropy(logits: ArrayView2<'_, f64>, labels: &[i64], rows: &[usize]) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(logits.raw_dim());
    if rows.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &v in rows {
        let row = logits.row(v);
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let norm: f64 = row.iter().map(|&x| (x - max).exp()).sum();
        let log_norm = max + norm.ln();
        let y = labels[v] as usize;
        loss += log_norm - row[y];
        let mut g = grad.row_mut(v);
        for (c, (gc, &x)) in g.iter_mut().zip(row.iter()).enumerate() {
            let p = (x - log_norm).exp();
            *gc = scale * (p - if c == y { 1.0 } else { 0.0 });
        }
    }
    (loss * scale, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn config(layers: usize, norm: Normalization) -> MlpConfig {
        MlpConfig {
            num_layers: layers,
            hidden_channels: 5,
            normalization: norm,
            seed: 3,
            ..MlpConfig::default()
        }
    }

    #[test]
    fn parameter_count() {
        let m = Mlp::new(&config(1, Normalization::None), 4, 3).unwrap();
        assert_eq!(m.num_parameters(), 4 * 3 + 3);
        let m = Mlp::new(&config(3, Normalization::BatchNorm), 4, 3).unwrap();
        assert_eq!(m.num_parameters(), (4 * 5 + 5 + 10) + (5 * 5 + 5 + 10) + (5 * 3 + 3));
        assert_eq!(m.param_slices().len(), 10);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let m = Mlp::new(&config(2, Normalization::None), 16, 2).unwrap();
        assert!(m.weight(0).iter().all(|w| w.abs() < 0.25));
        assert!(m.weight(1).iter().all(|w| w.abs() < 1.0 / 5f64.sqrt()));
    }

    #[test]
    fn linear_model_ignores_dropout() {
        let cfg = MlpConfig {
            dropout: 0.5,
            ..MlpConfig::linear()
        };
        let m = Mlp::new(&cfg, 2, 2).unwrap();
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, _) = m.forward(x.view(), Mode::Train, Some(&mut rng), false);
        assert_eq!(a, m.predict_logits(x.view()));
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let logits = Array2::zeros((3, 4));
        let (loss, grad) = softmax_cross_entropy(logits.view(), &[0, 1, 2], &[0, 2]);
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        assert_eq!(grad.row(1).sum(), 0.0);
        assert!((grad[[0, 0]] + 0.375).abs() < 1e-15);
        assert!((grad[[0, 1]] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn batch_norm_train_output_is_standardized() {
        let cfg = config(2, Normalization::BatchNorm);
        let m = Mlp::new(&cfg, 3, 2).unwrap();
        let x = Array2::from_shape_fn((20, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 4.0);
        let (_, tape) = m.forward(x.view(), Mode::Train, None, true);
        let tape = tape.unwrap();
        if let NormCache::Batch { xhat, .. } = &tape.hidden[0].norm {
            for c in xhat.columns() {
                assert!(c.mean().unwrap().abs() < 1e-12);
            }
        } else {
            panic!("expected batch norm cache");
        }
    }

    #[test]
    fn running_stats_use_momentum() {
        let cfg = config(2, Normalization::BatchNorm);
        let mut m = Mlp::new(&cfg, 1, 2).unwrap();
        let x = array![[1.0], [2.0], [3.0], [6.0]];
        let (_, tape) = m.forward(x.view(), Mode::Train, None, true);
        let tape = tape.unwrap();
        let (mean, var) = match &tape.hidden[0].norm {
            NormCache::Batch {
                batch_moments: Some(mv),
                ..
            } => mv.clone(),
            _ => panic!("expected batch moments"),
        };
        m.update_running_stats(&tape, 4);
        if let Norm::Batch {
            running_mean,
            running_var,
            ..
        } = &m.norms[0]
        {
            for c in 0..5 {
                assert!((running_mean[c] - 0.1 * mean[c]).abs() < 1e-15);
                assert!((running_var[c] - (0.9 + 0.1 * var[c] * 4.0 / 3.0)).abs() < 1e-15);
            }
        } else {
            panic!("expected batch norm");
        }
    }

    #[test]
    fn config_validation() {
        assert!(MlpConfig::default().validate().is_ok());
        for bad in [
            MlpConfig {
                num_layers: 0,
                ..MlpConfig::default()
            },
            MlpConfig {
                dropout: 1.0,
                ..MlpConfig::default()
            },
            MlpConfig {
                learning_rate: 0.0,
                ..MlpConfig::default()
            },
            MlpConfig {
                weight_decay: -1.0,
                ..MlpConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn normalization_names() {
        for n in [Normalization::None, Normalization::LayerNorm, Normalization::BatchNorm] {
            assert_eq!(n.name().parse::<Normalization>().unwrap(), n);
        }
        assert_eq!("BatchNorm".parse::<Normalization>().unwrap(), Normalization::BatchNorm);
    }
}
