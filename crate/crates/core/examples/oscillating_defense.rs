//! A defense whose adapted model flips with the batch mean defeats the fixed
//! point attack, but not GMSA, which attacks every model seen so far.
//!
//! `cargo run --release --example oscillating_defense`

use transrobust::attacks::{fpa, gmsa, GmsaMode};
use transrobust::learners::Adaptor;
use transrobust::{LabeledSet, Model, PerturbationBudget, UnlabeledSet};

/// `A` (class 1 iff x > 0) when the batch mean is non-negative, else `B`
/// (class 1 iff x < 0).
struct Oscillating {
    a: Model,
    b: Model,
}

impl Adaptor for Oscillating {
    fn name(&self) -> &str {
        "oscillating"
    }

    fn adapt(&self, _: &Model, _: &LabeledSet, batch: &UnlabeledSet, _: u64) -> transrobust::Result<Model> {
        let mean = batch.mean().expect("non-empty batch")[0];
        Ok(if mean >= 0.0 { self.a.clone() } else { self.b.clone() })
    }
}

fn main() -> transrobust::Result<()> {
    let gamma = Oscillating {
        a: Model::binary_linear(&[1.0], 0.0)?,
        b: Model::binary_linear(&[-1.0], 0.0)?,
    };
    let mut rows = vec![vec![-0.1]; 9];
    rows.push(vec![2.7]);
    let v = LabeledSet::from_rows(&rows, vec![1; 10])?;
    let d = LabeledSet::from_rows(&[vec![-1.0], vec![1.0]], vec![0, 1])?;
    let budget = PerturbationBudget::new(0.2, 0.05, 10)?;

    let f = fpa(&gamma, &d, &v, &gamma.a, 9, &budget, 0)?;
    let g = gmsa(&gamma, &d, &v, &gamma.a, 9, GmsaMode::Avg, &budget, 0)?;
    println!("iteration  fpa  gmsa-avg");
    for i in 0..f.valuations.len() {
        println!("{i:>9}  {:.1}  {:.1}", f.valuations[i], g.valuations[i]);
    }
    println!(
        "selected: fpa {:.1} (iteration {}), gmsa-avg {:.1} (iteration {})",
        f.selected_valuation(),
        f.selected,
        g.selected_valuation(),
        g.selected
    );
    Ok(())
}
