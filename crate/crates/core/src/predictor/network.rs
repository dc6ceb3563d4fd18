use alloc::vec;
use alloc::vec::Vec;

use super::model::{Affine, Layout};
use super::{PredictorError, PredictorModel, Real, COORD_SCALE, TIME_SCALE};
use crate::vectorizer::{VectorizedScene, FEATURES, TARGET_STEPS};

/// Scaled network input: one row of features per vector, grouped by polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInput<T> {
    pub polylines: Vec<Vec<[T; FEATURES]>>,
    pub ego_index: usize,
}

impl<T: Real> SceneInput<T> {
    /// Scales coordinates by `1/COORD_SCALE` and timestamps by `1/TIME_SCALE`;
    /// type and id pass through.
    pub fn from_scene(scene: &VectorizedScene) -> Result<Self, PredictorError> {
        let ego_index = scene.ego_index().ok_or(PredictorError::NoEgo)?;
        let polylines = scene
            .polylines
            .iter()
            .map(|p| {
                p.vectors
                    .iter()
                    .map(|v| {
                        let f = v.features();
                        let mut row = [T::zero(); FEATURES];
                        for c in 0..4 {
                            row[c] = T::lit(f[c] / COORD_SCALE);
                        }
                        row[4] = T::lit(f[4]);
                        row[5] = T::lit(f[5]);
                        row[6] = T::lit(f[6] / TIME_SCALE);
                        row
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            polylines,
            ego_index,
        })
    }

    fn check(&self) -> Result<(), PredictorError> {
        if self.ego_index >= self.polylines.len() {
            return Err(PredictorError::BadEgoIndex {
                index: self.ego_index,
                count: self.polylines.len(),
            });
        }
        if let Some(i) = self.polylines.iter().position(Vec::is_empty) {
            return Err(PredictorError::EmptyPolyline(i));
        }
        Ok(())
    }
}

/// Target displacements as a flat `[dx0, dy0, dx1, ...]` vector.
pub(crate) fn flat_target<T: Real>(scene: &VectorizedScene) -> Vec<T> {
    scene
        .ego_target
        .iter()
        .flat_map(|d| [T::lit(d[0]), T::lit(d[1])])
        .collect()
}

/// Mean over steps of the squared displacement error.
pub fn loss<T: Real>(predicted: &[[T; 2]], target: &[[T; 2]]) -> Result<T, PredictorError> {
    if predicted.len() != target.len() {
        return Err(PredictorError::LengthMismatch(predicted.len(), target.len()));
    }
    if target.is_empty() {
        return Ok(T::zero());
    }
    let sum = predicted
        .iter()
        .zip(target)
        .fold(T::zero(), |acc, (p, t)| {
            let (dx, dy) = (p[0] - t[0], p[1] - t[1]);
            acc + dx * dx + dy * dy
        });
    Ok(sum / T::lit(target.len() as f64))
}

fn affine<T: Real>(params: &[T], a: &Affine, x: &[T], out: &mut [T]) {
    debug_assert_eq!(x.len(), a.cols);
    let w = &params[a.w..a.w + a.rows * a.cols];
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * a.cols..(r + 1) * a.cols];
        let init = a.b.map_or(T::zero(), |b| params[b + r]);
        *o = row.iter().zip(x).fold(init, |acc, (&wi, &xi)| acc + wi * xi);
    }
}

/// Accumulates weight/bias gradients for `g = dL/d(out)` and optionally
/// adds `W^T g` into `dx`.
fn affine_backward<T: Real>(params: &[T], grad: &mut [T], a: &Affine, x: &[T], g: &[T], dx: Option<&mut [T]>) {
    for (r, &gr) in g.iter().enumerate() {
        if gr == T::zero() {
            continue;
        }
        if let Some(b) = a.b {
            grad[b + r] = grad[b + r] + gr;
        }
        let dw = &mut grad[a.w + r * a.cols..a.w + (r + 1) * a.cols];
        for (d, &xi) in dw.iter_mut().zip(x) {
            *d = *d + gr * xi;
        }
    }
    if let Some(dx) = dx {
        let w = &params[a.w..a.w + a.rows * a.cols];
        for (r, &gr) in g.iter().enumerate() {
            if gr == T::zero() {
                continue;
            }
            let row = &w[r * a.cols..(r + 1) * a.cols];
            for (d, &wi) in dx.iter_mut().zip(row) {
                *d = *d + gr * wi;
            }
        }
    }
}

struct LayerCache<T> {
    in_dim: usize,
    /// `n × in_dim` inputs.
    input: Vec<T>,
    /// `n × h` pre-activations.
    pre: Vec<T>,
    /// Row holding the maximum of each output column.
    argmax: Vec<usize>,
}

struct PolylineCache<T> {
    n: usize,
    layers: Vec<LayerCache<T>>,
    feature: Vec<T>,
}

pub(crate) struct Cache<T> {
    polylines: Vec<PolylineCache<T>>,
    ego: usize,
    query: Vec<T>,
    keys: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
    weights: Vec<T>,
    decoder_in: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    pub output: Vec<T>,
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

impl<T: Real> PredictorModel<T> {
    fn encode_cached(&self, layout: &Layout, vectors: &[[T; FEATURES]]) -> PolylineCache<T> {
        let n = vectors.len();
        let h = self.config().hidden_dim;
        let mut input: Vec<T> = vectors.iter().flatten().copied().collect();
        let mut in_dim = FEATURES;
        let mut layers = Vec::with_capacity(layout.encoder.len());
        let mut feature = Vec::new();
        for (l, a) in layout.encoder.iter().enumerate() {
            let mut pre = vec![T::zero(); n * h];
            for i in 0..n {
                affine(&self.params, a, &input[i * in_dim..(i + 1) * in_dim], &mut pre[i * h..(i + 1) * h]);
            }
            let mut argmax = vec![0usize; h];
            let mut maxv = vec![T::zero(); h];
            for d in 0..h {
                let mut best = relu(pre[d]);
                for i in 1..n {
                    let v = relu(pre[i * h + d]);
                    if v > best {
                        best = v;
                        argmax[d] = i;
                    }
                }
                maxv[d] = best;
            }
            let next = if l + 1 < layout.encoder.len() {
                let mut next = Vec::with_capacity(n * 2 * h);
                for i in 0..n {
                    next.extend(pre[i * h..(i + 1) * h].iter().map(|&x| relu(x)));
                    next.extend_from_slice(&maxv);
                }
                next
            } else {
                feature = maxv;
                Vec::new()
            };
            layers.push(LayerCache {
                in_dim,
                input: core::mem::replace(&mut input, next),
                pre,
                argmax,
            });
            in_dim = 2 * h;
        }
        PolylineCache { n, layers, feature }
    }

    fn encode_backward(&self, layout: &Layout, cache: &PolylineCache<T>, dfeature: &[T], grad: &mut [T]) {
        let h = self.config().hidden_dim;
        let n = cache.n;
        let top = cache.layers.last().unwrap();
        let mut dpost = vec![T::zero(); n * h];
        for d in 0..h {
            dpost[top.argmax[d] * h + d] = dfeature[d];
        }
        for (l, lc) in cache.layers.iter().enumerate().rev() {
            let a = &layout.encoder[l];
            let g: Vec<T> = dpost
                .iter()
                .zip(&lc.pre)
                .map(|(&dp, &p)| if p > T::zero() { dp } else { T::zero() })
                .collect();
            if l == 0 {
                for i in 0..n {
                    let x = &lc.input[i * lc.in_dim..(i + 1) * lc.in_dim];
                    affine_backward(&self.params, grad, a, x, &g[i * h..(i + 1) * h], None);
                }
                break;
            }
            let below = &cache.layers[l - 1];
            let mut next = vec![T::zero(); n * h];
            let mut dmax = vec![T::zero(); h];
            let mut dx = vec![T::zero(); 2 * h];
            for i in 0..n {
                let x = &lc.input[i * lc.in_dim..(i + 1) * lc.in_dim];
                dx.iter_mut().for_each(|v| *v = T::zero());
                affine_backward(&self.params, grad, a, x, &g[i * h..(i + 1) * h], Some(&mut dx));
                next[i * h..(i + 1) * h].copy_from_slice(&dx[..h]);
                for (m, &v) in dmax.iter_mut().zip(&dx[h..]) {
                    *m = *m + v;
                }
            }
            for d in 0..h {
                let k = below.argmax[d] * h + d;
                next[k] = next[k] + dmax[d];
            }
            dpost = next;
        }
    }

    /// Encodes one polyline of scaled feature rows into a `hidden_dim` vector.
    pub fn encode_polyline(&self, vectors: &[[T; FEATURES]]) -> Result<Vec<T>, PredictorError> {
        if vectors.is_empty() {
            return Err(PredictorError::EmptyPolyline(0));
        }
        Ok(self.encode_cached(&self.layout(), vectors).feature)
    }

    fn attend(&self, layout: &Layout, feats: &[&[T]], ego: usize) -> (Vec<T>, Vec<Vec<T>>, Vec<Vec<T>>, Vec<T>, Vec<T>) {
        let h = self.config().hidden_dim;
        let mut query = vec![T::zero(); h];
        affine(&self.params, &layout.query, feats[ego], &mut query);
        let project = |a: &Affine| -> Vec<Vec<T>> {
            feats
                .iter()
                .map(|f| {
                    let mut out = vec![T::zero(); h];
                    affine(&self.params, a, f, &mut out);
                    out
                })
                .collect()
        };
        let keys = project(&layout.key);
        let values = project(&layout.value);
        let scale = T::one() / T::lit(h as f64).sqrt();
        let scores: Vec<T> = keys
            .iter()
            .map(|k| k.iter().zip(&query).fold(T::zero(), |acc, (&a, &b)| acc + a * b) * scale)
            .collect();
        let top = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = scores.iter().map(|&s| (s - top).exp()).collect();
        let total = exps.iter().fold(T::zero(), |acc, &e| acc + e);
        let weights: Vec<T> = exps.iter().map(|&e| e / total).collect();
        let mut attended = vec![T::zero(); h];
        for (w, v) in weights.iter().zip(&values) {
            for (a, &x) in attended.iter_mut().zip(v) {
                *a = *a + *w * x;
            }
        }
        (query, keys, values, weights, attended)
    }

    /// Attention weights of the Ego query over all polyline features.
    pub fn attention_weights(&self, feats: &[Vec<T>], ego_index: usize) -> Result<Vec<T>, PredictorError> {
        let refs = self.check_nodes(feats, ego_index)?;
        Ok(self.attend(&self.layout(), &refs, ego_index).3)
    }

    /// Attended feature at the Ego node.
    pub fn global_interact(&self, feats: &[Vec<T>], ego_index: usize) -> Result<Vec<T>, PredictorError> {
        let refs = self.check_nodes(feats, ego_index)?;
        Ok(self.attend(&self.layout(), &refs, ego_index).4)
    }

    fn check_nodes<'a>(&self, feats: &'a [Vec<T>], ego_index: usize) -> Result<Vec<&'a [T]>, PredictorError> {
        if ego_index >= feats.len() {
            return Err(PredictorError::BadEgoIndex {
                index: ego_index,
                count: feats.len(),
            });
        }
        let h = self.config().hidden_dim;
        if let Some(f) = feats.iter().find(|f| f.len() != h) {
            return Err(PredictorError::LengthMismatch(f.len(), h));
        }
        Ok(feats.iter().map(Vec::as_slice).collect())
    }

    pub(crate) fn forward_cached(&self, input: &SceneInput<T>) -> Result<Cache<T>, PredictorError> {
        input.check()?;
        let layout = self.layout();
        let h = self.config().hidden_dim;
        let polylines: Vec<PolylineCache<T>> = input
            .polylines
            .iter()
            .map(|p| self.encode_cached(&layout, p))
            .collect();
        let feats: Vec<&[T]> = polylines.iter().map(|p| p.feature.as_slice()).collect();
        let ego = input.ego_index;
        let (query, keys, values, weights, attended) = self.attend(&layout, &feats, ego);

        let mut decoder_in = attended;
        decoder_in.extend_from_slice(feats[ego]);
        let mut hidden_pre = vec![T::zero(); h];
        affine(&self.params, &layout.hidden, &decoder_in, &mut hidden_pre);
        let hidden: Vec<T> = hidden_pre.iter().map(|&x| relu(x)).collect();
        let mut output = vec![T::zero(); 2 * TARGET_STEPS];
        affine(&self.params, &layout.output, &hidden, &mut output);
        Ok(Cache {
            polylines,
            ego,
            query,
            keys,
            values,
            weights,
            decoder_in,
            hidden_pre,
            hidden,
            output,
        })
    }

    /// Accumulates `dL/dθ` into `grad` given `doutput = dL/d(output)`.
    pub(crate) fn backward(&self, cache: &Cache<T>, doutput: &[T], grad: &mut [T]) {
        let layout = self.layout();
        let h = self.config().hidden_dim;
        let p = cache.polylines.len();

        let mut dhidden = vec![T::zero(); h];
        affine_backward(&self.params, grad, &layout.output, &cache.hidden, doutput, Some(&mut dhidden));
        for (d, &pre) in dhidden.iter_mut().zip(&cache.hidden_pre) {
            if pre <= T::zero() {
                *d = T::zero();
            }
        }
        let mut dz = vec![T::zero(); 2 * h];
        affine_backward(&self.params, grad, &layout.hidden, &cache.decoder_in, &dhidden, Some(&mut dz));
        let (dattended, dego_direct) = dz.split_at(h);

        let mut dfeats = vec![vec![T::zero(); h]; p];
        for (a, &b) in dfeats[cache.ego].iter_mut().zip(dego_direct) {
            *a = *a + b;
        }

        let scale = T::one() / T::lit(h as f64).sqrt();
        let dweights: Vec<T> = cache
            .values
            .iter()
            .map(|v| v.iter().zip(dattended).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect();
        let mean = cache
            .weights
            .iter()
            .zip(&dweights)
            .fold(T::zero(), |acc, (&w, &d)| acc + w * d);
        let mut dquery = vec![T::zero(); h];
        for j in 0..p {
            let feat = cache.polylines[j].feature.as_slice();
            let w = cache.weights[j];
            let dscore = w * (dweights[j] - mean) * scale;
            let dvalue: Vec<T> = dattended.iter().map(|&d| w * d).collect();
            let dkey: Vec<T> = cache.query.iter().map(|&q| dscore * q).collect();
            for (dq, &k) in dquery.iter_mut().zip(&cache.keys[j]) {
                *dq = *dq + dscore * k;
            }
            affine_backward(&self.params, grad, &layout.value, feat, &dvalue, Some(&mut dfeats[j]));
            affine_backward(&self.params, grad, &layout.key, feat, &dkey, Some(&mut dfeats[j]));
        }
        let ego_feat = cache.polylines[cache.ego].feature.as_slice();
        affine_backward(&self.params, grad, &layout.query, ego_feat, &dquery, Some(&mut dfeats[cache.ego]));

        for (pc, df) in cache.polylines.iter().zip(&dfeats) {
            self.encode_backward(&layout, pc, df, grad);
        }
    }

    /// Predicts the 24 Ego displacement vectors (m) for a scene.
    pub fn forward(&self, scene: &VectorizedScene) -> Result<Vec<[T; 2]>, PredictorError> {
        self.forward_input(&SceneInput::from_scene(scene)?)
    }

    pub fn forward_input(&self, input: &SceneInput<T>) -> Result<Vec<[T; 2]>, PredictorError> {
        let cache = self.forward_cached(input)?;
        Ok(cache.output.chunks(2).map(|c| [c[0], c[1]]).collect())
    }

    /// Loss of one sample and its gradient, accumulated into `grad` after
    /// multiplying by `weight`.
    pub(crate) fn loss_and_gradient(&self, input: &SceneInput<T>, target: &[T], weight: T, grad: &mut [T]) -> Result<T, PredictorError> {
        let cache = self.forward_cached(input)?;
        let steps = T::lit(TARGET_STEPS as f64);
        let mut value = T::zero();
        let doutput: Vec<T> = cache
            .output
            .iter()
            .zip(target)
            .map(|(&o, &t)| {
                let e = o - t;
                value = value + e * e;
                weight * T::lit(2.0) * e / steps
            })
            .collect();
        self.backward(&cache, &doutput, grad);
        Ok(value / steps)
    }

    /// Loss of one sample without gradients.
    pub(crate) fn sample_loss(&self, input: &SceneInput<T>, target: &[T]) -> Result<T, PredictorError> {
        let cache = self.forward_cached(input)?;
        let sum = cache
            .output
            .iter()
            .zip(target)
            .fold(T::zero(), |acc, (&o, &t)| acc + (o - t) * (o - t));
        Ok(sum / T::lit(TARGET_STEPS as f64))
    }
}
