//! Runtime masking and cleansing on a stream of test points: each point is
//! attacked against the attacker's simulation of the model adapted so far.
//!
//! `cargo run --release --example rmc_sequence`

use transrobust::game::{play, AdaptorSpec, AttackerSpec, GameKind, GameMode, Seeds};
use transrobust::io::config::AttackBenchSpec;
use transrobust::learners::TrainConfig;

fn main() -> transrobust::Result<()> {
    let mut spec = AttackBenchSpec::desk().game;
    spec.n_test = 40;
    spec.mode = GameMode::Sequence;
    spec.attacker = AttackerSpec::Pgd { restarts: 1 };
    spec.adaptor = AdaptorSpec::Rmc {
        k_neighbors: 16,
        adapt: TrainConfig {
            epochs: 3,
            batch_size: 8,
            learning_rate: 0.1,
            ..TrainConfig::default()
        },
        pool_budget: spec.budget,
    };
    let seeds = Seeds {
        data: 0,
        attacker: 1,
        defender: 2,
    };
    let rmc = play(GameKind::Transductive, &spec.with_seeds(seeds))?;
    let inductive = play(GameKind::Inductive, &{
        let mut s = spec.clone();
        s.mode = GameMode::Batch;
        s
    }
    .with_seeds(seeds))?;
    println!("inductive PGD: clean {:.3} robust {:.3}", inductive.clean_accuracy, inductive.robust_accuracy());
    println!(
        "RMC sequence:  clean {:.3} robust {:.3} (attacker's estimate {:.3})",
        rmc.clean_accuracy,
        rmc.robust_accuracy(),
        1.0 - rmc.attacker_valuation
    );
    Ok(())
}
