use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::params::{DcnParameters, Segment};
use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Example {
    pub individual: usize,
    pub question: usize,
    pub year: usize,
}

/// Inverted dropout applied after every cross and dense layer in training mode.
pub struct Dropout<'a, R: Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    examples: Vec<Example>,
    raw: Array2<f64>,
    x0: Array2<f64>,
    cross_in: Vec<Array2<f64>>,
    cross_z: Vec<Array2<f64>>,
    cross_mask: Vec<Option<Array2<f64>>>,
    dense_in: Vec<Array2<f64>>,
    dense_pre: Vec<Array2<f64>>,
    dense_mask: Vec<Option<Array2<f64>>>,
    head_in: Array2<f64>,
    probs: Array1<f64>,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Array1<f64> {
        &self.probs
    }

    pub fn x0(&self) -> &Array2<f64> {
        &self.x0
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of one prediction, with the probability clamped.
pub fn loss_bce(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn mean_bce(probs: &[f64], labels: &[u8]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    probs.iter().zip(labels).map(|(p, y)| loss_bce(*p, *y)).sum::<f64>() / probs.len() as f64
}

/// `x0 ⊙ (W·xl + b) + xl` for a single vector.
pub fn cross_layer_forward(
    x0: ArrayView1<'_, f64>,
    xl: ArrayView1<'_, f64>,
    weight: ArrayView2<'_, f64>,
    bias: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let h = x0.len();
    if xl.len() != h || weight.dim() != (h, h) || bias.len() != h {
        return Err(Error::Shape(format!(
            "cross layer: x0 {}, xl {}, W {:?}, b {}",
            h,
            xl.len(),
            weight.dim(),
            bias.len()
        )));
    }
    let z = weight.dot(&xl) + &bias;
    Ok(&x0 * &z + &xl)
}

fn check_ids(params: &DcnParameters, raw: ArrayView2<'_, f64>, ex: &Example) -> Result<()> {
    if ex.individual >= params.belief.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "individual",
            index: ex.individual,
            size: params.belief.nrows(),
        });
    }
    if ex.year >= params.period.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "year",
            index: ex.year,
            size: params.period.nrows(),
        });
    }
    if ex.question >= raw.nrows() {
        return Err(Error::IndexOutOfRange {
            what: "question",
            index: ex.question,
            size: raw.nrows(),
        });
    }
    Ok(())
}

fn dropout_mask<R: Rng>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < keep { scale } else { 0.0 })
}

/// Batched forward pass. `frozen` holds one raw question vector per row.
/// Passing `dropout = None` is inference mode and is fully deterministic.
pub fn forward_batch<R: Rng>(
    params: &DcnParameters,
    frozen: ArrayView2<'_, f64>,
    examples: &[Example],
    mut dropout: Option<Dropout<'_, R>>,
) -> Result<ForwardCache> {
    if frozen.ncols() != params.raw_dim() {
        return Err(Error::Shape(format!(
            "frozen embeddings are {} wide, projection expects {}",
            frozen.ncols(),
            params.raw_dim()
        )));
    }
    let b = examples.len();
    let e = params.embed_dim();
    let h = params.hidden();
    let mut raw = Array2::zeros((b, frozen.ncols()));
    for (r, ex) in examples.iter().enumerate() {
        check_ids(params, frozen, ex)?;
        raw.row_mut(r).assign(&frozen.row(ex.question));
    }
    let semantic = raw.dot(&params.projection.weight.t()) + &params.projection.bias;
    let mut x0 = Array2::zeros((b, h));
    let (bel, sem, per) = (
        Segment::Belief.range(e),
        Segment::Semantic.range(e),
        Segment::Period.range(e),
    );
    for (r, ex) in examples.iter().enumerate() {
        x0.slice_mut(s![r, bel.clone()])
            .assign(&params.belief.row(ex.individual));
        x0.slice_mut(s![r, sem.clone()]).assign(&semantic.row(r));
        x0.slice_mut(s![r, per.clone()]).assign(&params.period.row(ex.year));
    }

    let nc = params.cross.len();
    let nd = params.dense.len();
    let mut cross_in = Vec::with_capacity(nc);
    let mut cross_z = Vec::with_capacity(nc);
    let mut cross_mask = Vec::with_capacity(nc);
    let mut x = x0.clone();
    for layer in &params.cross {
        let z = x.dot(&layer.weight.t()) + &layer.bias;
        let mut next = &x0 * &z + &x;
        let mask = dropout.as_mut().map(|d| dropout_mask((b, h), d.rate, d.rng));
        if let Some(m) = &mask {
            next *= m;
        }
        cross_in.push(std::mem::replace(&mut x, next));
        cross_z.push(z);
        cross_mask.push(mask);
    }

    let mut dense_in = Vec::with_capacity(nd);
    let mut dense_pre = Vec::with_capacity(nd);
    let mut dense_mask = Vec::with_capacity(nd);
    for layer in &params.dense {
        let pre = x.dot(&layer.weight.t()) + &layer.bias;
        let mut post = pre.mapv(|v| v.max(0.0));
        let mask = dropout.as_mut().map(|d| dropout_mask((b, h), d.rate, d.rng));
        if let Some(m) = &mask {
            post *= m;
        }
        dense_in.push(std::mem::replace(&mut x, post));
        dense_pre.push(pre);
        dense_mask.push(mask);
    }

    let logits = x.dot(&params.head.weight.row(0)) + params.head.bias[0];
    let probs = logits.mapv(sigmoid);
    Ok(ForwardCache {
        version: params.version(),
        examples: examples.to_vec(),
        raw,
        x0,
        cross_in,
        cross_z,
        cross_mask,
        dense_in,
        dense_pre,
        dense_mask,
        head_in: x,
        probs,
    })
}

/// Single-example forward pass. The returned probability is strictly inside (0, 1).
pub fn forward<R: Rng>(
    params: &DcnParameters,
    frozen: ArrayView2<'_, f64>,
    example: Example,
    dropout: Option<Dropout<'_, R>>,
) -> Result<(f64, ForwardCache)> {
    let cache = forward_batch(params, frozen, &[example], dropout)?;
    let p = cache.probs[0].clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    Ok((p, cache))
}

/// Inference-mode probabilities in batches of `batch_size`.
pub fn predict(
    params: &DcnParameters,
    frozen: ArrayView2<'_, f64>,
    examples: &[Example],
    batch_size: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let cache = forward_batch::<rand_chacha::ChaCha8Rng>(params, frozen, chunk, None)?;
        out.extend(
            cache
                .probs
                .iter()
                .map(|p| p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)),
        );
    }
    Ok(out)
}

/// Gradients of the mean batch cross-entropy with respect to every trainable
/// tensor, plus the batch loss. The gradient at the logit is `ŷ − y` per example.
pub fn backward(cache: &ForwardCache, labels: &[u8], params: &DcnParameters) -> Result<(DcnParameters, f64)> {
    if cache.version != params.version() {
        return Err(Error::CacheMismatch(format!(
            "cache built at parameter version {}, parameters are at {}",
            cache.version,
            params.version()
        )));
    }
    if cache.cross_in.len() != params.cross.len()
        || cache.dense_in.len() != params.dense.len()
        || cache.x0.ncols() != params.hidden()
    {
        return Err(Error::CacheMismatch("layer structure differs".into()));
    }
    let b = cache.examples.len();
    if labels.len() != b {
        return Err(Error::Shape(format!("{} labels for a batch of {b}", labels.len())));
    }
    let e = params.embed_dim();
    let mut grads = params.zeros_like();
    let loss = mean_bce(cache.probs.as_slice().expect("contiguous"), labels);
    if b == 0 {
        return Ok((grads, loss));
    }
    let inv_b = 1.0 / b as f64;
    let g_logit = Array1::from_iter(cache.probs.iter().zip(labels).map(|(p, y)| (p - f64::from(*y)) * inv_b));

    grads.head.weight.row_mut(0).assign(&cache.head_in.t().dot(&g_logit));
    grads.head.bias[0] = g_logit.sum();
    let mut g = g_logit
        .view()
        .insert_axis(Axis(1))
        .dot(&params.head.weight.row(0).insert_axis(Axis(0)));

    for l in (0..params.dense.len()).rev() {
        if let Some(m) = &cache.dense_mask[l] {
            g *= m;
        }
        g.zip_mut_with(&cache.dense_pre[l], |gv, pre| {
            if *pre <= 0.0 {
                *gv = 0.0;
            }
        });
        grads.dense[l].weight = g.t().dot(&cache.dense_in[l]);
        grads.dense[l].bias = g.sum_axis(Axis(0));
        g = g.dot(&params.dense[l].weight);
    }

    let mut g_x0 = Array2::<f64>::zeros(cache.x0.raw_dim());
    for l in (0..params.cross.len()).rev() {
        if let Some(m) = &cache.cross_mask[l] {
            g *= m;
        }
        let gz = &g * &cache.x0;
        g_x0 += &(&g * &cache.cross_z[l]);
        grads.cross[l].weight = gz.t().dot(&cache.cross_in[l]);
        grads.cross[l].bias = gz.sum_axis(Axis(0));
        g += &gz.dot(&params.cross[l].weight);
    }
    g_x0 += &g;

    let g_sem = g_x0.slice(s![.., Segment::Semantic.range(e)]);
    grads.projection.weight = g_sem.t().dot(&cache.raw);
    grads.projection.bias = g_sem.sum_axis(Axis(0));
    let bel = Segment::Belief.range(e);
    let per = Segment::Period.range(e);
    for (r, ex) in cache.examples.iter().enumerate() {
        let mut row = grads.belief.row_mut(ex.individual);
        row += &g_x0.slice(s![r, bel.clone()]);
        let mut row = grads.period.row_mut(ex.year);
        row += &g_x0.slice(s![r, per.clone()]);
    }
    Ok((grads, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcn::DcnConfig;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cross_layer_identities() {
        let x0 = array![0.3, -1.2, 2.0];
        let xl = array![1.0, 0.5, -0.25];
        let w0 = Array2::zeros((3, 3));
        let b0 = Array1::zeros(3);
        assert_eq!(
            cross_layer_forward(x0.view(), xl.view(), w0.view(), b0.view()).unwrap(),
            xl
        );
        let w = Array2::from_elem((3, 3), 0.7);
        let b = array![1.0, 2.0, 3.0];
        let zero = Array1::zeros(3);
        assert_eq!(
            cross_layer_forward(zero.view(), xl.view(), w.view(), b.view()).unwrap(),
            xl
        );
    }

    #[test]
    fn cross_layer_desk_check() {
        let out = cross_layer_forward(
            array![1.0, 2.0].view(),
            array![1.0, 1.0].view(),
            Array2::eye(2).view(),
            Array1::zeros(2).view(),
        )
        .unwrap();
        assert_eq!(out, array![2.0, 3.0]);
    }

    #[test]
    fn cross_layer_shape_mismatch() {
        assert!(matches!(
            cross_layer_forward(
                array![1.0, 2.0].view(),
                array![1.0].view(),
                Array2::eye(2).view(),
                Array1::zeros(2).view()
            ),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn bce_values() {
        assert!((loss_bce(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss_bce(1.0 - 1e-9, 1) - 1.000_000_05e-7).abs() < 1e-12);
        assert!((loss_bce(0.9, 0) - 2.302_585_092_994_046).abs() < 1e-12);
    }

    fn setup() -> (DcnParameters, Array2<f64>) {
        let cfg = DcnConfig {
            embed_dim: 4,
            ..DcnConfig::default()
        };
        let p = DcnParameters::init(&cfg, 6, 5, 3, 11).unwrap();
        let frozen = Array2::from_shape_fn((4, 6), |(i, j)| ((i * 7 + j) as f64).sin());
        (p, frozen)
    }

    #[test]
    fn inference_is_deterministic_and_in_range() {
        let (p, frozen) = setup();
        let ex = Example {
            individual: 2,
            question: 3,
            year: 1,
        };
        let (a, _) = forward::<ChaCha8Rng>(&p, frozen.view(), ex, None).unwrap();
        let (b, _) = forward::<ChaCha8Rng>(&p, frozen.view(), ex, None).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn saturated_head_stays_inside_unit_interval() {
        let (mut p, frozen) = setup();
        p.head.bias[0] = 1e4;
        let ex = Example {
            individual: 0,
            question: 0,
            year: 0,
        };
        let (hi, _) = forward::<ChaCha8Rng>(&p, frozen.view(), ex, None).unwrap();
        p.head.bias[0] = -1e4;
        let (lo, _) = forward::<ChaCha8Rng>(&p, frozen.view(), ex, None).unwrap();
        assert!(hi < 1.0 && lo > 0.0);
    }

    #[test]
    fn out_of_range_ids() {
        let (p, frozen) = setup();
        let bad = Example {
            individual: 5,
            question: 0,
            year: 0,
        };
        assert!(matches!(
            forward::<ChaCha8Rng>(&p, frozen.view(), bad, None),
            Err(Error::IndexOutOfRange { what: "individual", .. })
        ));
        let bad = Example {
            individual: 0,
            question: 4,
            year: 0,
        };
        assert!(forward::<ChaCha8Rng>(&p, frozen.view(), bad, None).is_err());
    }

    #[test]
    fn logit_gradient_identity() {
        let (p, frozen) = setup();
        let ex = [Example {
            individual: 1,
            question: 2,
            year: 0,
        }];
        let cache = forward_batch::<ChaCha8Rng>(&p, frozen.view(), &ex, None).unwrap();
        let (g, _) = backward(&cache, &[1], &p).unwrap();
        let yhat = cache.probabilities()[0];
        assert!((g.head.bias[0] - (yhat - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn untouched_belief_rows_get_zero_gradient() {
        let (p, frozen) = setup();
        let ex = [
            Example {
                individual: 1,
                question: 2,
                year: 0,
            },
            Example {
                individual: 3,
                question: 0,
                year: 2,
            },
        ];
        let cache = forward_batch::<ChaCha8Rng>(&p, frozen.view(), &ex, None).unwrap();
        let (g, _) = backward(&cache, &[1, 0], &p).unwrap();
        for i in [0, 2, 4] {
            assert!(g.belief.row(i).iter().all(|v| *v == 0.0));
        }
        assert!(g.belief.row(1).iter().any(|v| *v != 0.0));
        assert!(g.period.row(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let (mut p, frozen) = setup();
        let ex = [Example {
            individual: 0,
            question: 0,
            year: 0,
        }];
        let cache = forward_batch::<ChaCha8Rng>(&p, frozen.view(), &ex, None).unwrap();
        p.bump_version();
        assert!(matches!(backward(&cache, &[1], &p), Err(Error::CacheMismatch(_))));
    }

    #[test]
    fn dropout_is_inverted_and_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = Array1::from_iter((0..32).map(|i| 0.5 + i as f64 * 0.1));
        let trials = 10_000;
        let mut acc = Array1::<f64>::zeros(32);
        for _ in 0..trials {
            let m = dropout_mask((1, 32), 0.2, &mut rng);
            assert!(m.iter().all(|x| *x == 0.0 || (*x - 1.25).abs() < 1e-15));
            acc += &(&v * &m.row(0));
        }
        acc /= trials as f64;
        let total_expected: f64 = v.sum();
        assert!((acc.sum() - total_expected).abs() / total_expected < 0.01);
    }

    #[test]
    fn training_mode_uses_masks_inference_does_not() {
        let (p, frozen) = setup();
        let ex = [Example {
            individual: 1,
            question: 1,
            year: 1,
        }; 8];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let train = forward_batch(
            &p,
            frozen.view(),
            &ex,
            Some(Dropout {
                rate: 0.2,
                rng: &mut rng,
            }),
        )
        .unwrap();
        let infer = forward_batch::<ChaCha8Rng>(&p, frozen.view(), &ex, None).unwrap();
        let probs = infer.probabilities();
        assert!(probs.iter().all(|x| *x == probs[0]));
        assert!(train.probabilities().iter().any(|x| *x != train.probabilities()[0]));
    }
}
