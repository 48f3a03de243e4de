//! Transfer PGD vs FPA vs GMSA against a retraining defense on 2-D blobs.
//!
//! `cargo run --release --example attack_strength -- [trials]`

use transrobust::game::{GameKind, Seeds};
use transrobust::io::config::AttackBenchSpec;
use transrobust::io::play_trials;

fn main() -> transrobust::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let bench = AttackBenchSpec::desk();
    let seeds = Seeds {
        data: 0,
        attacker: 1,
        defender: 2,
    };
    println!("{:<10} {:>10} {:>10} {:>10}", "attacker", "clean", "robust", "simulated");
    for attacker in &bench.attackers {
        let mut spec = bench.game.clone();
        spec.attacker = attacker.clone();
        let ts = play_trials(GameKind::Transductive, &spec, seeds, trials)?;
        let n = ts.len() as f64;
        let clean = ts.iter().map(|t| t.clean_accuracy).sum::<f64>() / n;
        let robust = ts.iter().map(|t| t.robust_accuracy()).sum::<f64>() / n;
        let sim = ts.iter().map(|t| 1.0 - t.attacker_valuation).sum::<f64>() / n;
        println!("{:<10} {clean:>10.4} {robust:>10.4} {sim:>10.4}", attacker.name());
    }
    Ok(())
}
