//! Penalized changepoint detection on a noisy step signal.
//!
//! ```bash
//! cargo run --example detect_changepoints
//! ```

use cshap::changepoint::{exhaustive_segmentation, pelt_with_objective, CpdParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> cshap::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut signal = Vec::new();
    for (len, level) in [(1200usize, 0.0), (800, 4.0), (1000, 1.5)] {
        for _ in 0..len {
            signal.push(level + noise.sample(&mut rng));
        }
    }

    let params = CpdParams::default();
    let (cps, objective) = pelt_with_objective(&signal, &params)?;
    println!("true boundaries: 1200, 2000");
    println!("detected:        {:?}", cps.indices());
    println!("objective:       {objective:.6}");

    // the pruned search matches the unpruned dynamic program exactly
    let (_, reference) = exhaustive_segmentation(&signal, &params)?;
    println!("unpruned DP:     {reference:.6} (gap {:.2e})", (objective - reference).abs());

    for (start, end) in cps.segments(signal.len()) {
        let mean: f64 = signal[start..end].iter().sum::<f64>() / (end - start) as f64;
        println!("segment [{start:>5}, {end:>5})  mean {mean:+.3}");
    }
    Ok(())
}
