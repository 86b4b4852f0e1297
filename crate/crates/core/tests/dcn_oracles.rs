//! Independent checks of the network: a scalar re-evaluation of the forward
//! formulas, central finite differences for every gradient, and a hand-worked
//! Adam update.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survey_dcn::dcn::{adam_step, backward, forward_batch, mean_bce, AdamState, DcnConfig, DcnParameters, Example};

type NoRng = ChaCha8Rng;

fn random_params(cfg: &DcnConfig, raw: usize, n: usize, y: usize, rng: &mut ChaCha8Rng) -> DcnParameters {
    let mut p = DcnParameters::zeros(cfg, raw, n, y);
    for s in p.slices_mut() {
        for v in s.iter_mut() {
            *v = rng.random_range(-0.6..0.6);
        }
    }
    p
}

/// Scalar-loop evaluation of `x0 = [b; W_s e + b_s; p]`, cross layers
/// `x0 ⊙ (W x + b) + x`, ReLU dense layers and the sigmoid head.
fn reference_forward(p: &DcnParameters, frozen: &Array2<f64>, ex: Example) -> (f64, Vec<f64>) {
    let e = p.embed_dim();
    let h = 3 * e;
    let mut x0 = vec![0.0; h];
    for k in 0..e {
        x0[k] = p.belief[[ex.individual, k]];
        let mut s = p.projection.bias[k];
        for j in 0..frozen.ncols() {
            s += p.projection.weight[[k, j]] * frozen[[ex.question, j]];
        }
        x0[e + k] = s;
        x0[2 * e + k] = p.period[[ex.year, k]];
    }
    let mut x = x0.clone();
    let mut pre_acts = Vec::new();
    for l in &p.cross {
        let mut next = vec![0.0; h];
        for i in 0..h {
            let mut z = l.bias[i];
            for j in 0..h {
                z += l.weight[[i, j]] * x[j];
            }
            next[i] = x0[i] * z + x[i];
        }
        x = next;
    }
    for l in &p.dense {
        let mut next = vec![0.0; h];
        for i in 0..h {
            let mut a = l.bias[i];
            for j in 0..h {
                a += l.weight[[i, j]] * x[j];
            }
            pre_acts.push(a);
            next[i] = a.max(0.0);
        }
        x = next;
    }
    let mut logit = p.head.bias[0];
    for j in 0..h {
        logit += p.head.weight[[0, j]] * x[j];
    }
    (1.0 / (1.0 + (-logit).exp()), pre_acts)
}

fn batch_loss(p: &DcnParameters, frozen: &Array2<f64>, ex: &[Example], labels: &[u8]) -> f64 {
    let cache = forward_batch::<NoRng>(p, frozen.view(), ex, None).unwrap();
    mean_bce(cache.probabilities().as_slice().unwrap(), labels)
}

struct Draw {
    params: DcnParameters,
    frozen: Array2<f64>,
    examples: Vec<Example>,
    labels: Vec<u8>,
}

/// Draws a tiny configuration whose ReLU pre-activations all sit away from the
/// kink, where a central difference would straddle the non-differentiable point.
fn draw(rng: &mut ChaCha8Rng) -> Draw {
    loop {
        let embed_dim = if rng.random_bool(0.5) { 2 } else { 4 };
        let cfg = DcnConfig {
            embed_dim,
            num_cross_layers: rng.random_range(1..=3),
            num_dense_layers: rng.random_range(1..=3),
            ..DcnConfig::default()
        };
        let raw = rng.random_range(2..=6);
        let (n, y, q) = (3, 2, 3);
        let params = random_params(&cfg, raw, n, y, rng);
        let frozen = Array2::from_shape_simple_fn((q, raw), || rng.random_range(-1.0..1.0));
        let examples: Vec<Example> = (0..5)
            .map(|_| Example {
                individual: rng.random_range(0..n),
                question: rng.random_range(0..q),
                year: rng.random_range(0..y),
            })
            .collect();
        let labels: Vec<u8> = (0..5).map(|_| rng.random_range(0..=1)).collect();
        let near_kink = examples.iter().any(|ex| {
            reference_forward(&params, &frozen, *ex)
                .1
                .iter()
                .any(|a| a.abs() < 1e-3)
        });
        if !near_kink {
            return Draw {
                params,
                frozen,
                examples,
                labels,
            };
        }
    }
}

/// Relative error with an absolute floor so that entries that are zero on
/// both routes do not divide by zero.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn forward_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = DcnConfig {
        embed_dim: 2,
        num_cross_layers: 1,
        num_dense_layers: 1,
        ..DcnConfig::default()
    };
    for _ in 0..20 {
        let p = random_params(&cfg, 3, 2, 2, &mut rng);
        let frozen = Array2::from_shape_simple_fn((2, 3), || rng.random_range(-1.0..1.0));
        for ex in [
            Example {
                individual: 0,
                question: 1,
                year: 0,
            },
            Example {
                individual: 1,
                question: 0,
                year: 1,
            },
        ] {
            let cache = forward_batch::<NoRng>(&p, frozen.view(), &[ex], None).unwrap();
            let (want, _) = reference_forward(&p, &frozen, ex);
            assert!((cache.probabilities()[0] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = draw(&mut rng);
        let cache = forward_batch::<NoRng>(&d.params, d.frozen.view(), &d.examples, None).unwrap();
        let (grads, _) = backward(&cache, &d.labels, &d.params).unwrap();
        let analytic: Vec<f64> = grads.flatten();
        let mut probe = d.params.clone();
        let mut k = 0;
        let sizes: Vec<usize> = probe.slices().iter().map(|s| s.len()).collect();
        for (t, len) in sizes.iter().enumerate() {
            for i in 0..*len {
                let orig = probe.slices()[t][i];
                probe.slices_mut()[t][i] = orig + h;
                let up = batch_loss(&probe, &d.frozen, &d.examples, &d.labels);
                probe.slices_mut()[t][i] = orig - h;
                let down = batch_loss(&probe, &d.frozen, &d.examples, &d.labels);
                probe.slices_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                worst = worst.max(rel_err(analytic[k], numeric));
                k += 1;
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn frozen_embeddings_untouched_by_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = draw(&mut rng);
    let frozen_before = d.frozen.clone();
    let cfg = DcnConfig {
        embed_dim: d.params.embed_dim(),
        learning_rate: 1e-2,
        ..DcnConfig::default()
    };
    let mut params = d.params.clone();
    let mut state = AdamState::new(&params);
    for _ in 0..25 {
        let mut drng = ChaCha8Rng::seed_from_u64(1);
        let cache = forward_batch(
            &params,
            d.frozen.view(),
            &d.examples,
            Some(survey_dcn::dcn::Dropout {
                rate: 0.2,
                rng: &mut drng,
            }),
        )
        .unwrap();
        let (g, _) = backward(&cache, &d.labels, &params).unwrap();
        adam_step(&mut params, &g, &mut state, &cfg).unwrap();
    }
    assert_eq!(d.frozen, frozen_before);
    assert_ne!(params.flatten(), d.params.flatten());
}

#[test]
fn adam_one_parameter_quadratic() {
    // minimise (θ − 3)² stored in the single projection weight
    let cfg = DcnConfig {
        embed_dim: 1,
        num_cross_layers: 0,
        num_dense_layers: 0,
        learning_rate: 0.1,
        ..DcnConfig::default()
    };
    let mut params = DcnParameters::zeros(&cfg, 1, 1, 1);
    params.projection.weight[[0, 0]] = 1.0;
    let mut state = AdamState::new(&params);

    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-7f64, 0.1f64);
    let mut theta = 1.0f64;
    let (mut m, mut v) = (0.0f64, 0.0f64);
    for t in 1..=3 {
        let g = 2.0 * (theta - 3.0);
        let mut grads = params.zeros_like();
        grads.projection.weight[[0, 0]] = 2.0 * (params.projection.weight[[0, 0]] - 3.0);
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();

        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        assert!((params.projection.weight[[0, 0]] - theta).abs() < 1e-12);
    }
    // first step of Adam moves by ~lr in the descent direction
    assert!(theta > 1.0);
}

#[test]
fn zero_gradient_is_a_fixed_point() {
    let cfg = DcnConfig {
        embed_dim: 3,
        ..DcnConfig::default()
    };
    let mut params = DcnParameters::init(&cfg, 4, 3, 2, 5).unwrap();
    let before = params.flatten();
    let mut state = AdamState::new(&params);
    let zeros = params.zeros_like();
    for _ in 0..3 {
        adam_step(&mut params, &zeros, &mut state, &cfg).unwrap();
    }
    assert_eq!(params.flatten(), before);
}

#[test]
fn non_finite_gradient_aborts() {
    let cfg = DcnConfig {
        embed_dim: 2,
        ..DcnConfig::default()
    };
    let mut params = DcnParameters::init(&cfg, 2, 2, 2, 5).unwrap();
    let mut state = AdamState::new(&params);
    let mut g = params.zeros_like();
    g.period[[1, 0]] = f64::NAN;
    assert!(adam_step(&mut params, &g, &mut state, &cfg).is_err());
}

#[test]
fn full_batch_training_reduces_loss_on_separable_toy() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = DcnConfig {
        embed_dim: 4,
        learning_rate: 1e-2,
        dropout: 0.0,
        ..DcnConfig::default()
    };
    // 10 questions whose first raw coordinate decides the answer for everyone
    let frozen = Array2::from_shape_fn((10, 3), |(q, j)| {
        if j == 0 {
            if q < 5 {
                1.0
            } else {
                -1.0
            }
        } else {
            rng.random_range(-0.1..0.1)
        }
    });
    let examples: Vec<Example> = (0..50)
        .map(|i| Example {
            individual: i % 5,
            question: i % 10,
            year: i % 2,
        })
        .collect();
    let labels: Vec<u8> = examples.iter().map(|e| u8::from(e.question < 5)).collect();
    let mut params = DcnParameters::init(&cfg, 3, 5, 2, 1).unwrap();
    let mut state = AdamState::new(&params);
    let initial = batch_loss(&params, &frozen, &examples, &labels);
    for _ in 0..200 {
        let cache = forward_batch::<NoRng>(&params, frozen.view(), &examples, None).unwrap();
        let (g, _) = backward(&cache, &labels, &params).unwrap();
        adam_step(&mut params, &g, &mut state, &cfg).unwrap();
    }
    let last = batch_loss(&params, &frozen, &examples, &labels);
    assert!(last < 0.5 * initial, "initial {initial}, final {last}");
}

#[test]
fn importance_matches_elementwise_block_sums() {
    use survey_dcn::dcn::{block_importance, feature_importance};
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..20 {
        let e = rng.random_range(1..8);
        let cfg = DcnConfig {
            embed_dim: e,
            ..DcnConfig::default()
        };
        let params = random_params(&cfg, 3, 2, 2, &mut rng);
        let w = &params.cross[0].weight;
        // x0 is laid out [belief; semantic; period]
        let mut sq = [[0.0f64; 3]; 3];
        for i in 0..3 * e {
            for j in 0..3 * e {
                sq[i / e][j / e] += w[[i, j]] * w[[i, j]];
            }
        }
        let (b, s, p) = (0, 1, 2);
        let f = |r: usize, c: usize| sq[r][c].sqrt();
        let raw = [
            f(s, s),
            f(b, b),
            f(p, p),
            (f(s, b) + f(b, s)) / 2.0,
            (f(s, p) + f(p, s)) / 2.0,
            (f(b, p) + f(p, b)) / 2.0,
        ];
        let total: f64 = raw.iter().sum();
        let got = feature_importance(&params).unwrap().as_array();
        for (g, r) in got.iter().zip(raw) {
            assert!((g - r / total).abs() < 1e-10);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(got.iter().all(|v| *v >= 0.0));
        assert_eq!(block_importance(w.view(), e).unwrap().as_array(), got);
    }
}
