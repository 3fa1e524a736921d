//! Train the small convolutional autoencoder on synthetic patches and
//! evaluate it with and without 8-bit quantized weights.
//!
//!     cargo run --release --example train_autoencoder

use fixq::net::data::synth_dataset;
use fixq::net::train::{evaluate, train_loop, TrainConfig, TrainRecord};
use fixq::net::ToyAutoencoder;
use fixq::pipeline::quantize_model;
use fixq::{FixedPointFormat, Grouping, Scheme};

fn main() -> fixq::Result<()> {
    let config = TrainConfig {
        iterations_train: 1000,
        ..TrainConfig::default()
    };
    let mut net = ToyAutoencoder::new(config.seed);

    train_loop(&mut net, &config, config.iterations_train, None, &mut |r: &TrainRecord| {
        if r.iteration % 200 == 0 {
            println!("{}", r.render());
        }
    })?;

    let eval_data = synth_dataset(config.seed.wrapping_add(1), 16, config.patch, 3);
    let float_eval = evaluate(&net, &eval_data, None)?;
    println!("float:     mse={:.4e} psnr={:.2} dB", float_eval.mse, float_eval.psnr);

    for scheme in [Scheme::Lq, Scheme::Nlq] {
        let quantized = quantize_model(
            &net.weights_to_float_model()?,
            scheme,
            Grouping::Cw,
            FixedPointFormat::default(),
        )?;
        let q_eval = evaluate(&net, &eval_data, Some(&quantized))?;
        println!(
            "{:>5}(cw): mse={:.4e} psnr={:.2} dB",
            scheme.to_string(),
            q_eval.mse,
            q_eval.psnr
        );
    }
    Ok(())
}
