//! L∞ PGD against a standard and an adversarially trained MLP on 2-D blobs.
//!
//! `cargo run --release --example pgd_attack`

use transrobust::attacks::transfer_attack;
use transrobust::io::synth::{blobs_2d, BlobParams};
use transrobust::learners::{train_adversarial, train_standard, TrainConfig};
use transrobust::{accuracy, ModelSpec, PerturbationBudget};

fn main() -> transrobust::Result<()> {
    let train = blobs_2d(&BlobParams::overlapping(400), 0)?;
    let test = blobs_2d(&BlobParams::overlapping(200), 1)?;
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 16,
        learning_rate: 0.3,
        ..TrainConfig::default()
    };
    let arch = ModelSpec::mlp(2, &[16], 2);
    let train_budget = PerturbationBudget::new(0.08, 0.02, 10)?.with_unit_box(true);
    let standard = train_standard(&train, &cfg, &arch)?;
    let robust = train_adversarial(&train, &cfg, &train_budget, &arch)?;

    println!("{:>6} {:>10} {:>12}", "eps", "standard", "adversarial");
    for eps in [0.0, 0.02, 0.05, 0.08, 0.12, 0.16] {
        let budget = PerturbationBudget::new(eps, (eps / 4.0).max(1e-3), 20)?
            .with_unit_box(true)
            .with_random_init(true);
        let a = accuracy(&standard, &transfer_attack(&standard, &test, &budget, 7)?)?;
        let b = accuracy(&robust, &transfer_attack(&robust, &test, &budget, 7)?)?;
        println!("{eps:>6.2} {a:>10.3} {b:>12.3}");
    }
    Ok(())
}
