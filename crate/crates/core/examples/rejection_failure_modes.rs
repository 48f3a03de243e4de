//! Discriminator-based rejection against plain PGD, a benign shift and a
//! mimic attack that also optimizes against the rejector.

use transrobust::game::Seeds;
use transrobust::rejectron::{admits, RejectronScenario};

fn main() -> transrobust::Result<()> {
    let report = RejectronScenario::desk().run(Seeds { data: 0, attacker: 1, defender: 2 })?;
    for case in [&report.adversarial, &report.benign, &report.mimic] {
        let best = case
            .exhaustive
            .iter()
            .filter(|p| p.valuation.rej <= 0.2)
            .filter_map(|p| p.valuation.err)
            .fold(f64::INFINITY, f64::min);
        println!(
            "{:<12} admits (rej<=0.1, err<=0.1): {:<5}  admits (rej<=0.2, err<=0.4): {:<5}  min err at rej<=0.2: {:.3}",
            case.name,
            admits(&case.exhaustive, 0.1, 0.1),
            admits(&case.exhaustive, 0.2, 0.4),
            best
        );
    }
    Ok(())
}
