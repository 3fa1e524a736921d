//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 invalid
//! configuration, 3 numerical failure, 64 usage.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::accounting::{quant_error_stats, size_report};
use crate::error::Error;
use crate::grouping::Grouping;
use crate::io::{
    load_float_model, load_quantized_model, save_float_model, save_quantized_model, FXF1_MAGIC,
    FXQ1_MAGIC,
};
use crate::net::train::{train_loop, TrainConfig};
use crate::net::ToyAutoencoder;
use crate::pipeline::{precision_sweep, quantize_model_with_threads};
use crate::quant::FixedPointFormat;
use crate::tensor::Scheme;
use crate::wcft::finetune_from;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser)]
#[command(name = "fixq", version, about = "8-bit fixed-point weight quantization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Lq,
    Nlq,
    Lloyd,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Lq => Scheme::Lq,
            SchemeArg::Nlq => Scheme::Nlq,
            SchemeArg::Lloyd => Scheme::Lloyd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    Lw,
    Cw,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Lw => Grouping::Lw,
            GroupingArg::Cw => Grouping::Cw,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Quantize an FXF1 float model into an FXQ1 file.
    Quantize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, value_enum)]
        grouping: GroupingArg,
        /// Fractional bits of the {1, IL, FL} format.
        #[arg(long, default_value_t = 6)]
        fl: u8,
    },
    /// Print size accounting for a float or quantized model.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Grouping assumed for an FXF1 input (FXQ1 carries its own).
        #[arg(long, value_enum, default_value = "cw")]
        grouping: GroupingArg,
        /// Emit line-delimited key/value records instead of the table.
        #[arg(long)]
        records: bool,
    },
    /// Evaluate LQ precision offsets 0..=3 above FL (analysis only).
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "cw")]
        grouping: GroupingArg,
        /// Comma-separated exponent offsets, each in 0..=3.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        offsets: Vec<u32>,
    },
    /// Train the toy autoencoder and save its weights as FXF1.
    TrainToy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        #[arg(long, default_value_t = 0.015)]
        lambda: f64,
        #[arg(long, default_value_t = 20.0)]
        lr: f64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 16)]
        patch: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Clip a trained toy model and fine-tune with STE; compare arms.
    Finetune {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "nlq")]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value = "cw")]
        grouping: GroupingArg,
        /// Fine-tuning iterations.
        #[arg(long, default_value_t = 500)]
        i2: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20.0)]
        lr: f64,
        #[arg(long, default_value_t = 0.015)]
        lambda: f64,
        /// Optional path for the comparison report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Parse and execute. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::BadMagic { .. }
        | Error::Truncated(_)
        | Error::Overflow(_)
        | Error::Format(_)
        | Error::Validation(_) => EXIT_IO,
        Error::Domain(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Numeric(_) => EXIT_NUMERIC,
    }
}

fn worker_threads() -> crate::error::Result<usize> {
    match std::env::var("FIXQ_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Domain(format!("FIXQ_THREADS={} is not a positive integer", v))),
        Err(_) => Ok(1),
    }
}

fn open_input(path: &Path) -> crate::error::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e))))
}

fn execute(command: Command) -> crate::error::Result<i32> {
    match command {
        Command::Quantize {
            input,
            output,
            scheme,
            grouping,
            fl,
        } => {
            let format = FixedPointFormat::new(7u8.checked_sub(fl).ok_or_else(|| {
                Error::Domain(format!("fl {} exceeds the 8-bit budget", fl))
            })?, fl)?;
            let threads = worker_threads()?;
            let model = load_float_model(&mut open_input(&input)?)?;
            let qm = quantize_model_with_threads(
                &model,
                scheme.into(),
                grouping.into(),
                format,
                threads,
            )?;
            let mut sink = BufWriter::new(File::create(&output)?);
            let bytes = save_quantized_model(&qm, &mut sink)?;
            let stats = quant_error_stats(&model, &qm)?;
            print!("{}", stats.render_records());
            println!(
                "record=quantize output={} bytes={} scheme={} grouping={}",
                output.display(),
                bytes,
                qm.scheme,
                qm.grouping
            );
            Ok(EXIT_OK)
        }
        Command::Report {
            input,
            grouping,
            records,
        } => {
            let mut reader = open_input(&input)?;
            let mut magic = [0u8; 4];
            reader
                .read_exact(&mut magic)
                .map_err(|_| Error::Truncated("magic".into()))?;
            reader.seek(SeekFrom::Start(0))?;
            let (manifest, grouping) = if magic == FXQ1_MAGIC {
                let qm = load_quantized_model(&mut reader)?;
                (qm.manifest.clone(), qm.grouping)
            } else if magic == FXF1_MAGIC {
                let fm = load_float_model(&mut reader)?;
                (fm.manifest().clone(), grouping.into())
            } else {
                return Err(Error::BadMagic {
                    expected: FXF1_MAGIC,
                    found: magic,
                });
            };
            let report = size_report(&manifest, grouping);
            if records {
                print!("{}", report.render_records());
            } else {
                print!("{}", report.render_table());
            }
            Ok(EXIT_OK)
        }
        Command::Sweep {
            input,
            grouping,
            offsets,
        } => {
            let model = load_float_model(&mut open_input(&input)?)?;
            let points = precision_sweep(
                &model,
                grouping.into(),
                &offsets,
                FixedPointFormat::default(),
            )?;
            for p in &points {
                println!(
                    "record=sweep offset={} fl_eff={} mse={:e} zero_fraction={:.6}",
                    p.offset, p.fl_eff, p.mse, p.zero_fraction
                );
            }
            Ok(EXIT_OK)
        }
        Command::TrainToy {
            seed,
            iters,
            lambda,
            lr,
            batch,
            patch,
            output,
        } => {
            let config = TrainConfig {
                lambda,
                learning_rate: lr,
                iterations_train: iters,
                batch_size: batch,
                seed,
                patch,
                ..TrainConfig::default()
            };
            let mut net = ToyAutoencoder::new(seed);
            if let Err(e) = train_loop(&mut net, &config, iters, None, |r| println!("{}", r.render()))
            {
                if matches!(e, Error::Numeric(_)) {
                    let ckpt = checkpoint_path(&output);
                    save_weights(&net, &ckpt)?;
                    eprintln!("error: {} (last-good checkpoint: {})", e, ckpt.display());
                    return Ok(EXIT_NUMERIC);
                }
                return Err(e);
            }
            let bytes = save_weights(&net, &output)?;
            println!("record=train_toy output={} bytes={}", output.display(), bytes);
            Ok(EXIT_OK)
        }
        Command::Finetune {
            input,
            scheme,
            grouping,
            i2,
            seed,
            lr,
            lambda,
            report,
        } => {
            let model = load_float_model(&mut open_input(&input)?)?;
            if model.manifest().layer_count() != 4 {
                return Err(Error::Validation(format!(
                    "expected the 4-layer toy topology, found {} layers",
                    model.manifest().layer_count()
                )));
            }
            let image_channels = model.manifest().layers()[0].in_channels as usize;
            let features = model.manifest().layers()[0].out_channels as usize;
            let mut net = ToyAutoencoder::with_channels(image_channels, features, seed);
            net.set_weights(&model)?;
            let config = TrainConfig {
                lambda,
                learning_rate: lr,
                iterations_finetune: i2,
                seed,
                ..TrainConfig::default()
            };
            let outcome = match finetune_from(
                net.clone(),
                &config,
                grouping.into(),
                scheme.into(),
                FixedPointFormat::default(),
                |r| println!("{}", r.render()),
            ) {
                Ok(outcome) => outcome,
                Err(e @ Error::Numeric(_)) => {
                    let ckpt = checkpoint_path(&input);
                    save_weights(&net, &ckpt)?;
                    eprintln!("error: {} (last-good checkpoint: {})", e, ckpt.display());
                    return Ok(EXIT_NUMERIC);
                }
                Err(e) => return Err(e),
            };
            let rendered = outcome.report.render();
            print!("{}", rendered);
            if let Some(path) = report {
                std::fs::write(&path, rendered)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn checkpoint_path(base: &Path) -> PathBuf {
    let mut name = base.file_name().unwrap_or_default().to_os_string();
    name.push(".ckpt");
    base.with_file_name(name)
}

fn save_weights(net: &ToyAutoencoder, path: &Path) -> crate::error::Result<u64> {
    let model = net.weights_to_float_model()?;
    let mut sink = BufWriter::new(File::create(path)?);
    save_float_model(&model, &mut sink)
}
