//! SNR of a tone with noise-only gaps, and SRR from known components.

use mtadv::corpus::{snr_estimate, srr_components};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> mtadv::Result<()> {
    let frame = 400;
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for target_db in [10.0, 20.0, 30.0] {
        let amp = (2.0 * 1e-4 * 10f64.powf(target_db / 10.0)).sqrt();
        let wave: Vec<f64> = (0..frame * 200)
            .map(|i| {
                let tone = if (i / frame) % 10 == 0 { 0.0 } else { amp * (i as f64 * 0.07).sin() };
                tone + noise.sample(&mut rng)
            })
            .collect();
        println!("target {target_db:>4} dB  estimate {:.2} dB", snr_estimate(&wave, frame, frame)?);
    }

    let direct: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.03).sin()).collect();
    let reverberant: Vec<f64> = (0..2000)
        .map(|n| (1..50).filter(|&k| k <= n).map(|k| 0.2 * (-0.08 * k as f64).exp() * direct[n - k]).sum())
        .collect();
    println!("SRR {:.2} dB", srr_components(&direct, &reverberant)?);
    Ok(())
}
