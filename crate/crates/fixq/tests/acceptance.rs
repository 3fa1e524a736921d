//! Acceptance suite: one test per criterion, each printing a single
//! pass line (visible with `cargo test --test acceptance -- --nocapture`).
//! A failed assertion marks the criterion failed.

use std::time::Instant;

use fixq::accounting::{proposed_model_size, size_report};
use fixq::io::{fxq1_header_bytes, save_quantized_model};
use fixq::lloyd::{assignment_mse, init_grid, lloyd_codebook, optimal_codebook};
use fixq::net::data::synth_dataset;
use fixq::net::train::{batch_loss_and_grads, TrainConfig};
use fixq::net::ToyAutoencoder;
use fixq::pipeline::{precision_sweep, quantize_model};
use fixq::quant::{
    lq_encode, nlq_decode, nlq_encode, quantize_lq, quantize_nlq, scale_exponent, scale_group,
    NlqCode,
};
use fixq::tensor::LayerDims;
use fixq::wcft::run_wcft;
use fixq::{FixedPointFormat, FloatModel, Grouping, ModelManifest, Scheme, WeightTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FMT: FixedPointFormat = FixedPointFormat { il: 1, fl: 6 };

fn report(criterion: u32, name: &str, started: Instant, limit_secs: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < limit_secs,
        "criterion {criterion} overran its budget: {elapsed:.1}s >= {limit_secs}s"
    );
    println!("criterion {criterion} ({name}): pass [{elapsed:.1}s]");
}

/// Criterion 1: quantizer correctness over a dense grid, exhaustive
/// code round-trip, monotonicity, idempotence.
#[test]
fn criterion_1_quantizer_correctness() {
    let started = Instant::now();
    let steps = 40_000; // step 1e-4 over (-2, 2)
    let mut prev_lq = f64::NEG_INFINITY;
    let mut prev_nlq = f64::NEG_INFINITY;
    for i in 1..steps {
        let x = -2.0 + i as f64 * 1e-4;

        let lq = quantize_lq(x, FMT.fl as u32).unwrap();
        // Uniform step 1/64 => error at most a half step, except in the
        // saturation band above the largest code 127/64.
        let lq_bound = if x > 127.0 / 64.0 { 1.0 / 64.0 } else { 1.0 / 128.0 };
        assert!(
            (lq - x).abs() <= lq_bound + 1e-12,
            "lq({x}) = {lq} off by more than {lq_bound}"
        );
        assert!(lq >= prev_lq, "lq not monotone at {x}");
        prev_lq = lq;
        let lq2 = quantize_lq(lq, FMT.fl as u32).unwrap();
        assert_eq!(lq, lq2, "lq not idempotent at {x}");

        let nlq = quantize_nlq(x, FMT).unwrap();
        // Three regions keyed on |x|: steps 1/256, 1/64, 1/32 give
        // half-step bounds 1/512, 1/128, 1/64; the band above the
        // largest code 63/32 saturates with error up to 1/32.
        let a = x.abs();
        let nlq_bound = if a > 63.0 / 32.0 {
            1.0 / 32.0
        } else if a >= 0.5 {
            1.0 / 64.0
        } else if a >= 0.25 {
            1.0 / 128.0
        } else {
            1.0 / 512.0
        };
        assert!(
            (nlq - x).abs() <= nlq_bound + 1e-12,
            "nlq({x}) = {nlq} off by more than {nlq_bound}"
        );
        assert!(nlq >= prev_nlq, "nlq not monotone at {x}");
        prev_nlq = nlq;
        let nlq2 = quantize_nlq(nlq, FMT).unwrap();
        assert_eq!(nlq, nlq2, "nlq not idempotent at {x}");
    }

    // Exhaustive round-trip over the 255 valid codes (0x80 is invalid).
    let mut valid = 0;
    for byte in 0..=255u8 {
        match nlq_decode(NlqCode(byte), FMT) {
            Ok(value) => {
                valid += 1;
                let back = nlq_encode(value, FMT).unwrap();
                assert_eq!(back.0, byte, "code {byte:#04x} did not round-trip");
            }
            Err(_) => assert_eq!(byte, 0x80),
        }
    }
    assert_eq!(valid, 255);

    report(1, "quantizer correctness", started, 10.0);
}

/// Criterion 2: hand-computed worked values, exact equality.
#[test]
fn criterion_2_worked_values() {
    let started = Instant::now();
    assert_eq!(quantize_lq(0.7, 6).unwrap(), 45.0 / 64.0);
    assert_eq!(quantize_lq(-0.3, 6).unwrap(), -19.0 / 64.0);
    assert_eq!(quantize_lq(44.5 / 64.0, 6).unwrap(), 44.0 / 64.0);
    assert_eq!(quantize_nlq(0.9, FMT).unwrap(), 29.0 / 32.0);
    assert_eq!(quantize_nlq(0.3, FMT).unwrap(), 19.0 / 64.0);
    assert_eq!(quantize_nlq(0.1, FMT).unwrap(), 26.0 / 256.0);
    // and the stored bytes behind two of them
    assert_eq!(lq_encode(45.0 / 64.0, FMT).unwrap(), 45i8 as u8);
    assert_eq!(nlq_encode(29.0 / 32.0, FMT).unwrap().0, 0x5d);
    report(2, "worked values", started, 10.0);
}

/// Criterion 3: codebook design. Grid-initialized Lloyd never loses to
/// its own starting grid on 100 seeded Gaussian groups, and the small-
/// group solver matches an independently written dynamic-programming
/// oracle within 1% relative MSE.
#[test]
fn criterion_3_lloyd_vs_oracle() {
    let started = Instant::now();

    let grid = init_grid(64);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0f64, 0.3).unwrap();
        let raw: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
        let data = scale_group(&raw, scale_exponent(&raw));
        let book = lloyd_codebook(&data, 64, 200, 1e-12).unwrap();
        assert!(
            book.final_mse <= assignment_mse(&grid, &data) + 1e-15,
            "seed {seed}: final MSE above the starting grid's"
        );
    }

    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let n = 50 + (seed as usize * 7) % 151; // n <= 200
        let k = 2 + (seed as usize) % 7; // K <= 8
        let normal = Normal::new(0.0f64, 0.3).unwrap();
        let raw: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let data = scale_group(&raw, scale_exponent(&raw));
        let oracle = oracle_kmeans_mse(&data, k);
        let got = optimal_codebook(&data, k).unwrap().final_mse;
        let rel = ((got - oracle) / oracle).abs();
        assert!(
            rel < 0.01,
            "seed {seed} n={n} k={k}: {got:.6e} vs oracle {oracle:.6e} (rel {rel:.4})"
        );
    }

    report(3, "codebook optimality", started, 60.0);
}

/// Independent oracle: optimal 1-D k-means cost by forward dynamic
/// programming over prefix sums of the sorted samples.
fn oracle_kmeans_mse(data: &[f64], k: usize) -> f64 {
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let mut sum = vec![0.0f64; n + 1];
    let mut sq = vec![0.0f64; n + 1];
    for (i, &x) in xs.iter().enumerate() {
        sum[i + 1] = sum[i] + x;
        sq[i + 1] = sq[i] + x * x;
    }
    let seg = |i: usize, j: usize| -> f64 {
        let s = sum[j] - sum[i];
        (sq[j] - sq[i]) - s * s / (j - i) as f64
    };
    let mut best = vec![f64::INFINITY; n + 1];
    best[0] = 0.0;
    for _ in 0..k {
        let mut next = vec![f64::INFINITY; n + 1];
        for j in 1..=n {
            for i in 0..j {
                if best[i].is_finite() {
                    next[j] = next[j].min(best[i] + seg(i, j));
                }
            }
        }
        best = next;
    }
    best[n] / n as f64
}

/// A model whose channels have very different scales, so channel-wise
/// grouping has something to win.
fn diverse_model(seed: u64) -> FloatModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for _ in 0..3 {
        let (o, i, h, w) = (12usize, 8usize, 3usize, 3usize);
        let mut values = Vec::with_capacity(o * i * h * w);
        for _ in 0..o {
            let sigma = 0.01f64 * (0.5f64 / 0.01).powf(rng.gen::<f64>());
            let normal = Normal::new(0.0f64, sigma).unwrap();
            values.extend((0..i * h * w).map(|_| normal.sample(&mut rng)));
        }
        tensors.push(WeightTensor::new(o, i, h, w, values).unwrap());
    }
    FloatModel::new(tensors).unwrap()
}

fn model_mse(model: &FloatModel, scheme: Scheme, grouping: Grouping) -> f64 {
    let q = quantize_model(model, scheme, grouping, FMT).unwrap();
    fixq::accounting::quant_error_stats(model, &q).unwrap().model_mse
}

/// Criterion 4: scheme ordering on scale-diverse models.
#[test]
fn criterion_4_scheme_ordering() {
    let started = Instant::now();
    for seed in 0..10u64 {
        let model = diverse_model(seed);
        let cw_nlq = model_mse(&model, Scheme::Nlq, Grouping::Cw);
        let lw_nlq = model_mse(&model, Scheme::Nlq, Grouping::Lw);
        let lw_lq = model_mse(&model, Scheme::Lq, Grouping::Lw);
        assert!(
            cw_nlq < lw_nlq && lw_nlq < lw_lq,
            "seed {seed}: expected cw-nlq < lw-nlq < lw-lq, got {cw_nlq:.3e} / {lw_nlq:.3e} / {lw_lq:.3e}"
        );
    }
    report(4, "scheme ordering", started, 60.0);
}

/// Criterion 5: precision ladder strictly decreasing for offsets 0..=3.
#[test]
fn criterion_5_precision_ladder() {
    let started = Instant::now();
    for seed in 0..10u64 {
        let model = diverse_model(seed.wrapping_add(100));
        let points = precision_sweep(&model, Grouping::Cw, &[0, 1, 2, 3], FMT).unwrap();
        for pair in points.windows(2) {
            assert!(
                pair[1].mse < pair[0].mse,
                "seed {seed}: MSE not strictly decreasing at offset {}",
                pair[1].offset
            );
        }
    }
    report(5, "precision ladder", started, 60.0);
}

/// Criterion 6: clip-then-fine-tune on three seeds of the autoencoder.
#[test]
fn criterion_6_wcft() {
    let started = Instant::now();
    for seed in [0u64, 1, 2] {
        let config = TrainConfig {
            seed,
            iterations_train: 1500,
            iterations_finetune: 300,
            ..TrainConfig::default()
        };
        let outcome = run_wcft(
            ToyAutoencoder::new(seed),
            &config,
            Grouping::Cw,
            Scheme::Nlq,
            FMT,
            |_| {},
        )
        .unwrap();
        let r = &outcome.report;
        for p in &r.plans {
            assert_eq!(
                p.new_exponent,
                p.old_exponent - 1,
                "seed {seed}: group {}.{} exponent did not drop by exactly 1",
                p.layer,
                p.group
            );
        }
        for (g, (after, before)) in r
            .clipped_only
            .per_group_zero_fraction
            .iter()
            .zip(&r.baseline_zero_fraction)
            .enumerate()
        {
            assert!(
                after <= before,
                "seed {seed}: zero-code fraction grew in group {g}"
            );
        }
        assert!(
            r.finetuned.quantized_eval.mse < r.clipped_only.quantized_eval.mse,
            "seed {seed}: fine-tuning did not improve quantized MSE"
        );
    }
    report(6, "weight-clipping fine tuning", started, 300.0);
}

/// Criterion 7: size accounting matches byte-counted files exactly, and
/// the 5.18M-parameter reference manifest reproduces the expected
/// figures.
#[test]
fn criterion_7_size_accounting() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let layer_count = rng.gen_range(1..=5);
        let mut tensors = Vec::new();
        for _ in 0..layer_count {
            let o = rng.gen_range(1..=9usize);
            let i = rng.gen_range(1..=6usize);
            let values = (0..o * i * 9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            tensors.push(WeightTensor::new(o, i, 3, 3, values).unwrap());
        }
        let model = FloatModel::new(tensors).unwrap();
        let scheme = if rng.gen() { Scheme::Lq } else { Scheme::Nlq };
        let grouping = if rng.gen() { Grouping::Lw } else { Grouping::Cw };
        let quantized = quantize_model(&model, scheme, grouping, FMT).unwrap();

        let mut bytes = Vec::new();
        save_quantized_model(&quantized, &mut bytes).unwrap();
        let payload = bytes.len() as u64 - fxq1_header_bytes(model.manifest().layer_count());
        let accounted = proposed_model_size(model.manifest(), grouping).total_serialized;
        assert_eq!(payload, accounted, "accounting disagrees with the file");
    }

    let mut layers = vec![LayerDims::new(190, 65, 5, 5); 16];
    layers.push(LayerDims::new(160, 60, 5, 5));
    let manifest = ModelManifest::new(layers).unwrap();
    assert_eq!(manifest.total_params(), 5_180_000);
    let channels: u64 = manifest.layers().iter().map(|d| d.out_channels as u64).sum();
    assert_eq!(channels, 3200);

    let rep = size_report(&manifest, Grouping::Cw);
    let mb = 1e6;
    assert_eq!(rep.original_bytes as f64 / mb, 20.72);
    assert_eq!(rep.proposed.weight_bytes as f64 / mb, 5.18);
    assert_eq!(rep.proposed.sf_bytes_exact / mb, 0.0016);
    assert_eq!(rep.proposed.total_exact / mb, 5.1816);
    assert!((rep.ratio * 100.0 - 25.01).abs() < 0.005, "ratio {}", rep.ratio);

    report(7, "size accounting", started, 60.0);
}

/// Criterion 8: analytic gradients against central differences.
#[test]
fn criterion_8_gradient_check() {
    let started = Instant::now();
    let mut net = ToyAutoencoder::with_channels(2, 3, 424242);
    let dataset = synth_dataset(9, 4, 8, 2);
    let config = TrainConfig {
        batch_size: 4,
        patch: 8,
        ..TrainConfig::default()
    };

    let (_, grads) = batch_loss_and_grads(&net, &dataset, config.lambda).unwrap();

    let h = 1e-5;
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    for layer in 0..net.layers.len() {
        let n = net.layers[layer].weight.len();
        // probe a deterministic subset of each layer's weights
        for idx in (0..n).step_by(n / 40 + 1) {
            let orig = net.layers[layer].weight.values()[idx];
            net.layers[layer].weight.values_mut()[idx] = orig + h;
            let (lp, _) = batch_loss_and_grads(&net, &dataset, config.lambda).unwrap();
            net.layers[layer].weight.values_mut()[idx] = orig - h;
            let (lm, _) = batch_loss_and_grads(&net, &dataset, config.lambda).unwrap();
            net.layers[layer].weight.values_mut()[idx] = orig;

            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads.weights[layer][idx];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            let rel = (numeric - analytic).abs() / denom;
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    assert!(checked > 100, "too few weights probed: {checked}");
    assert!(max_rel < 1e-4, "max relative gradient error {max_rel:.3e}");

    report(8, "gradient check", started, 30.0);
}
