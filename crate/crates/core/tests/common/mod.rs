#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use token_insight::archive::TensorMap;
use token_insight::attribution::stubs::{AdditiveStub, ConstantStub, KeyedStub};
use token_insight::attribution::{SubsetClassifier, TraceStatus};
use token_insight::imageio::{load_image, InputImage, Normalization};
use token_insight::tensor::Tensor;
use token_insight::vit::{
    canonical_schema, validate_vit_schema, TokenSequence, TokenSubset, ViTConfig, ViTModel,
    ViTWeights,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn tiny() -> ViTConfig {
    ViTConfig::preset("tiny").unwrap()
}

pub fn tiny_model() -> ViTModel {
    let weights = ViTWeights::load(fixture("tiny_seed42.tnsa"), &tiny()).unwrap();
    ViTModel::new(weights, Normalization::IMAGENET)
}

pub fn tiny_input() -> InputImage {
    load_image(fixture("tiny_input.ppm")).unwrap()
}

pub fn golden() -> serde_json::Value {
    let text = std::fs::read_to_string(fixture("golden.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn f64s(v: &serde_json::Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: Vec<usize>, scale: f32) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape, data).unwrap()
}

pub fn random_tensor_map(cfg: &ViTConfig, seed: u64) -> TensorMap {
    let mut rng = rng(seed);
    canonical_schema(cfg)
        .into_iter()
        .map(|(key, shape)| {
            let fan_in = if shape.len() == 2 { shape[1] } else { 4 };
            let scale = 1.5 / (fan_in as f32).sqrt();
            let t = random_tensor(&mut rng, shape, scale);
            (key, t)
        })
        .collect()
}

pub fn random_weights(cfg: &ViTConfig, seed: u64) -> ViTWeights {
    validate_vit_schema(random_tensor_map(cfg, seed), cfg).unwrap()
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize) -> InputImage {
    let pixels = (0..width * height * 3).map(|_| rng.gen::<f32>()).collect();
    InputImage::new(width, height, pixels).unwrap()
}

/// Retained tokens, ascending, drawn uniformly from all non-empty subsets.
pub fn random_subset(rng: &mut impl Rng, n: usize) -> TokenSubset {
    loop {
        let kept: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if !kept.is_empty() {
            return TokenSubset::new(kept, n).unwrap();
        }
    }
}

/// Greedy removal written as a plain double loop straight from the
/// definition. Returns (removed tokens, confidences, status).
pub fn naive_greedy(
    model: &dyn SubsetClassifier,
    max_iters: usize,
) -> (Vec<usize>, Vec<f32>, TraceStatus) {
    let n = model.token_count();
    let mut present = vec![true; n];
    let full: Vec<usize> = (0..n).collect();
    let initial = model.evaluate(&TokenSubset::new(full, n).unwrap()).unwrap();
    let class = initial.top_class;
    let mut removed = Vec::new();
    let mut confidences = Vec::new();
    loop {
        if present.iter().all(|p| !p) {
            return (removed, confidences, TraceStatus::Exhausted);
        }
        if removed.len() == max_iters {
            return (removed, confidences, TraceStatus::MaxItersReached);
        }
        let mut best: Option<(usize, f32, usize)> = None;
        for t in 0..n {
            if !present[t] {
                continue;
            }
            let kept: Vec<usize> = (0..n).filter(|&i| present[i] && i != t).collect();
            let pred = model.evaluate(&TokenSubset::new(kept, n).unwrap()).unwrap();
            let conf = pred.probs[class];
            if best.is_none_or(|(_, c, _)| conf < c) {
                best = Some((t, conf, pred.top_class));
            }
        }
        let (t, conf, top) = best.unwrap();
        present[t] = false;
        removed.push(t);
        confidences.push(conf);
        if top != class {
            return (removed, confidences, TraceStatus::Flipped);
        }
    }
}

/// One of the three closed-form stub families, chosen by `kind % 3`.
pub fn random_stub(rng: &mut impl Rng, kind: usize) -> Box<dyn SubsetClassifier> {
    let n = rng.gen_range(1..=12);
    match kind % 3 {
        0 => {
            let total: f32 = rng.gen_range(0.3..1.4);
            let raw: Vec<f32> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let sum: f32 = raw.iter().sum::<f32>().max(1e-3);
            Box::new(AdditiveStub::new(
                raw.iter().map(|w| w * total / sum).collect(),
            ))
        }
        1 => {
            let classes = rng.gen_range(2..=4);
            let raw: Vec<f32> = (0..classes).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sum: f32 = raw.iter().sum();
            Box::new(ConstantStub::new(n, raw.iter().map(|p| p / sum).collect()))
        }
        _ => {
            let classes = rng.gen_range(2..=4);
            let bias = (0..classes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let unary = (0..classes)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let pairs = (0..rng.gen_range(0..=n))
                .map(|_| {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(0..n);
                    (
                        a,
                        b,
                        (0..classes).map(|_| rng.gen_range(-1.5..1.5)).collect(),
                    )
                })
                .collect();
            Box::new(KeyedStub::new(bias, unary, pairs))
        }
    }
}

fn layer_norm64(x: &[f64], gamma: &[f32], beta: &[f32]) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
    let inv = 1.0 / (var + 1e-6).sqrt();
    x.iter()
        .zip(gamma.iter().zip(beta))
        .map(|(v, (&g, &b))| (v - mean) * inv * f64::from(g) + f64::from(b))
        .collect()
}

fn affine64(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    let k = x.len();
    (0..w.shape()[0])
        .map(|o| {
            let row = &w.data()[o * k..(o + 1) * k];
            f64::from(b.data()[o])
                + row
                    .iter()
                    .zip(x)
                    .map(|(&a, v)| f64::from(a) * v)
                    .sum::<f64>()
        })
        .collect()
}

fn gelu64(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Logits from the full `[cls; all tokens]` sequence, where attention to
/// discarded tokens is masked out instead of the tokens being dropped.
/// Computed in f64, independently of the library's encoder.
pub fn masked_logits(weights: &ViTWeights, seq: &TokenSequence, subset: &TokenSubset) -> Vec<f64> {
    let cfg = &weights.config;
    let n = seq.token_count();
    let (d, heads) = (cfg.dim, cfg.heads);
    let dh = d / heads;
    let mut visible = vec![true; n + 1];
    for t in 0..n {
        visible[t + 1] = subset.contains(t);
    }
    let mut x: Vec<Vec<f64>> = std::iter::once(seq.cls.data())
        .chain((0..n).map(|t| seq.embeddings.row(t)))
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect();

    for block in &weights.blocks {
        let qkv: Vec<Vec<f64>> = x
            .iter()
            .map(|r| {
                let h = layer_norm64(r, block.ln1_weight.data(), block.ln1_bias.data());
                affine64(&h, &block.qkv_weight, &block.qkv_bias)
            })
            .collect();
        let mut attn = vec![vec![0.0f64; d]; n + 1];
        for h in 0..heads {
            for i in 0..=n {
                let q = &qkv[i][h * dh..(h + 1) * dh];
                let scores: Vec<f64> = (0..=n)
                    .map(|j| {
                        if !visible[j] {
                            return f64::NEG_INFINITY;
                        }
                        let k = &qkv[j][d + h * dh..d + (h + 1) * dh];
                        q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / (dh as f64).sqrt()
                    })
                    .collect();
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for j in 0..=n {
                    let v = &qkv[j][2 * d + h * dh..2 * d + (h + 1) * dh];
                    for c in 0..dh {
                        attn[i][h * dh + c] += e[j] / z * v[c];
                    }
                }
            }
        }
        for i in 0..=n {
            let o = affine64(&attn[i], &block.proj_weight, &block.proj_bias);
            x[i].iter_mut().zip(o).for_each(|(a, b)| *a += b);
            let h = layer_norm64(&x[i], block.ln2_weight.data(), block.ln2_bias.data());
            let h: Vec<f64> = affine64(&h, &block.fc1_weight, &block.fc1_bias)
                .into_iter()
                .map(gelu64)
                .collect();
            let o = affine64(&h, &block.fc2_weight, &block.fc2_bias);
            x[i].iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }
    let cls = layer_norm64(
        &x[0],
        weights.ln_final_weight.data(),
        weights.ln_final_bias.data(),
    );
    affine64(&cls, &weights.head_weight, &weights.head_bias)
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_token-insight")
}

/// Common `--weights/--config` arguments for the tiny fixture model.
pub fn tiny_model_args() -> Vec<String> {
    vec![
        "--weights".into(),
        fixture("tiny_seed42.tnsa").display().to_string(),
        "--config".into(),
        "tiny".into(),
    ]
}

/// Ten hand-built traces over 16 tokens with varied lengths and outcomes.
pub fn synthetic_traces() -> Vec<(String, token_insight::attribution::AttributionTrace)> {
    use token_insight::attribution::{AttributionStep, AttributionTrace, TRACE_SCHEMA};
    let specs: [(f32, &[f32], TraceStatus); 10] = [
        (0.91, &[0.85, 0.70, 0.42], TraceStatus::Flipped),
        (0.88, &[0.80, 0.61, 0.55, 0.47], TraceStatus::Flipped),
        (
            0.97,
            &[0.96, 0.93, 0.90, 0.72, 0.66, 0.31],
            TraceStatus::Flipped,
        ),
        (0.64, &[0.45], TraceStatus::Flipped),
        (0.75, &[0.74, 0.70], TraceStatus::MaxItersReached),
        (
            0.99,
            &[
                0.99, 0.98, 0.98, 0.97, 0.97, 0.96, 0.95, 0.95, 0.94, 0.94, 0.93, 0.93, 0.92, 0.92,
                0.91, 0.91,
            ],
            TraceStatus::Exhausted,
        ),
        (0.70, &[0.62, 0.58, 0.49], TraceStatus::Flipped),
        (
            0.83,
            &[0.79, 0.73, 0.68, 0.61, 0.57, 0.52, 0.44],
            TraceStatus::Flipped,
        ),
        (0.58, &[0.51, 0.48], TraceStatus::Flipped),
        (0.86, &[0.81, 0.66, 0.63, 0.41], TraceStatus::Flipped),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(i, (initial, confs, status))| {
            let mut prev = *initial;
            let steps = confs
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let step = AttributionStep {
                        iteration: j + 1,
                        token: (i * 5 + j * 7) % 16,
                        confidence: c,
                        drop: prev - c,
                    };
                    prev = c;
                    step
                })
                .collect();
            let trace = AttributionTrace {
                schema: TRACE_SCHEMA,
                target_class: i % 2,
                initial_confidence: *initial,
                status: *status,
                steps,
            };
            (format!("img{i:02}"), trace)
        })
        .collect()
}

/// Sort, then `v[lo] + (v[hi] - v[lo]) * frac` at position `q (n - 1)`.
pub fn oracle_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn oracle_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.iter().sum::<f64>() / v.len() as f64
}
