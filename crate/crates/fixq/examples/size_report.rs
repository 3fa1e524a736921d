//! Size accounting for a 17-layer convolutional model: 8-bit weights
//! plus half a byte per group scale factor versus 32-bit floats.
//!
//!     cargo run --example size_report

use fixq::accounting::size_report;
use fixq::tensor::LayerDims;
use fixq::{Grouping, ModelManifest};

fn main() -> fixq::Result<()> {
    // A deep super-resolution style stack: 16 wide 5x5 layers plus a
    // narrower final one, 5.18M parameters in total.
    let mut layers = vec![LayerDims::new(190, 65, 5, 5); 16];
    layers.push(LayerDims::new(160, 60, 5, 5));
    let manifest = ModelManifest::new(layers)?;

    for grouping in [Grouping::Lw, Grouping::Cw] {
        let report = size_report(&manifest, grouping);
        println!("--- grouping: {:?} ---", grouping);
        print!("{}", report.render_table());
        println!(
            "compression ratio: {:.4}% of the original",
            report.ratio * 100.0
        );
        println!();
    }
    Ok(())
}
