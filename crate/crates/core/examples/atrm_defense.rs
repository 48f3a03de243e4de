//! ATRM (adversarial training plus representation matching on the test
//! batch) against transfer PGD and GMSA, next to a non-adaptive baseline.
//!
//! `cargo run --release --example atrm_defense -- [trials]`

use transrobust::game::{AdaptorSpec, AttackerSpec, GameKind, Seeds};
use transrobust::attacks::GmsaMode;
use transrobust::io::config::AttackBenchSpec;
use transrobust::io::play_trials;
use transrobust::learners::{AlphaSchedule, AtrmConfig, Matcher};
use transrobust::PerturbationBudget;

fn main() -> transrobust::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let base = AttackBenchSpec::desk().game;
    let atrm = AdaptorSpec::Atrm {
        train: base.trainer.train.clone(),
        atrm: AtrmConfig {
            alpha_max: 1.0,
            schedule: AlphaSchedule::Progressive,
            inner_budget: PerturbationBudget::new(0.1, 0.025, 5)?.with_unit_box(true),
            matcher: Matcher::MeanFeature,
        },
    };
    let attackers = [
        AttackerSpec::Pgd { restarts: 1 },
        AttackerSpec::Gmsa {
            iterations: 3,
            mode: GmsaMode::Avg,
        },
    ];
    let seeds = Seeds {
        data: 0,
        attacker: 1,
        defender: 2,
    };
    println!("{:<10} {:<10} {:>8} {:>8}", "adaptor", "attacker", "clean", "robust");
    for adaptor in [AdaptorSpec::Identity, atrm] {
        for attacker in &attackers {
            let mut spec = base.clone();
            spec.adaptor = adaptor.clone();
            spec.attacker = attacker.clone();
            let ts = play_trials(GameKind::Transductive, &spec, seeds, trials)?;
            let n = ts.len() as f64;
            println!(
                "{:<10} {:<10} {:>8.3} {:>8.3}",
                adaptor.name(),
                attacker.name(),
                ts.iter().map(|t| t.clean_accuracy).sum::<f64>() / n,
                ts.iter().map(|t| t.robust_accuracy()).sum::<f64>() / n
            );
        }
    }
    Ok(())
}
