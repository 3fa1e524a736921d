//! Fit a 64-entry Lloyd codebook to bell-shaped scaled weights and
//! compare it against the uniform grid it starts from.
//!
//!     cargo run --example lloyd_codebook

use fixq::lloyd::{assignment_mse, init_grid, lloyd_codebook, DEFAULT_MAX_ITER, DEFAULT_TOL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> fixq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0f64, 0.6).unwrap();
    // Scaled weights live in (-2, 2); clamp the tails like the scaler does.
    let data: Vec<f64> = (0..20_000)
        .map(|_| normal.sample(&mut rng).clamp(-1.999, 1.999))
        .collect();

    let k = 64;
    let grid = init_grid(k);
    let grid_mse = assignment_mse(&grid, &data);

    let book = lloyd_codebook(&data, k, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    println!("codewords: {} (after merging duplicates)", book.codewords.len());
    println!("iterations: {}", book.iterations);
    println!("uniform-grid mse: {:.6e}", grid_mse);
    println!("lloyd mse:        {:.6e}", book.final_mse);
    println!("improvement:      {:.2}x", grid_mse / book.final_mse);

    // The codebook concentrates entries where the data is dense.
    let near_zero = book.codewords.iter().filter(|c| c.abs() < 0.5).count();
    let grid_near_zero = grid.iter().filter(|c| c.abs() < 0.5).count();
    println!(
        "entries with |c| < 0.5: lloyd {} vs grid {}",
        near_zero, grid_near_zero
    );
    Ok(())
}
