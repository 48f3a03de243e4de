//! Attack and game properties beyond the reductions: the averaged objective
//! on a 2-D grid, attacker-vs-referee consistency and attack strength.

use ndarray::ArrayView1;

use transrobust::attacks::{composite_loss, pgd_maximize, CompositeLoss};
use transrobust::game::{play, AttackerSpec, GameKind, Seeds};
use transrobust::io::config::AttackBenchSpec;
use transrobust::io::play_trials;
use transrobust::{LabeledSet, Model, PerturbationBudget};

#[test]
fn averaged_objective_reaches_the_grid_optimum() {
    // Two linear models; the averaged CE is convex in x, so its maximum over
    // the L∞ box sits at a corner and PGD should find it.
    let models = vec![
        Model::binary_linear(&[1.0, 0.4], 0.1).unwrap(),
        Model::binary_linear(&[-0.3, 1.2], -0.2).unwrap(),
    ];
    let eps = 0.3;
    let budget = PerturbationBudget::new(eps, 0.05, 20).unwrap();
    for (x0, y) in [([0.2, -0.1], 1usize), ([-0.5, 0.4], 0), ([0.0, 0.0], 1)] {
        let v = LabeledSet::from_rows(&[x0.to_vec()], vec![y]).unwrap();
        let out = pgd_maximize(&models, CompositeLoss::Avg, &v, &budget, 0).unwrap();
        let got = composite_loss(&models, CompositeLoss::Avg, out.row(0), y).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                let p = [x0[0] - eps + 2.0 * eps * i as f64 / 100.0, x0[1] - eps + 2.0 * eps * j as f64 / 100.0];
                best = best.max(composite_loss(&models, CompositeLoss::Avg, ArrayView1::from(&p[..]), y).unwrap());
            }
        }
        assert!(got >= best - 1e-9, "PGD {got} < grid {best}");
    }
}

fn small_bench(attacker: AttackerSpec) -> transrobust::game::GameSpec {
    let mut spec = AttackBenchSpec::desk().game;
    spec.n_train = 100;
    spec.n_test = 30;
    spec.attacker = attacker;
    spec
}

#[test]
fn attacker_estimate_tracks_the_referee() {
    // The attacker simulates Γ with its own seed; on average its estimate of
    // the valuation should not be far from what the referee measures.
    let spec = small_bench(AttackerSpec::Fpa { iterations: 3 });
    let ts = play_trials(
        GameKind::Transductive,
        &spec,
        Seeds {
            data: 5,
            attacker: 6,
            defender: 7,
        },
        6,
    )
    .unwrap();
    let n = ts.len() as f64;
    let attacker = ts.iter().map(|t| t.attacker_valuation).sum::<f64>() / n;
    let referee = ts.iter().map(|t| t.referee_valuation).sum::<f64>() / n;
    assert!(attacker >= referee - 0.15, "attacker {attacker} vs referee {referee}");
}

#[test]
fn gmsa_is_at_least_as_strong_as_transfer_on_the_attackers_simulation() {
    // The selected GMSA valuation is a max over iterations whose first entry is
    // the transfer attack's simulated valuation under the same seeds.
    let seeds = Seeds {
        data: 1,
        attacker: 2,
        defender: 3,
    };
    let g = play(
        GameKind::Transductive,
        &small_bench(AttackerSpec::Gmsa {
            iterations: 2,
            mode: transrobust::attacks::GmsaMode::Avg,
        })
        .with_seeds(seeds),
    )
    .unwrap();
    let h = g.history.as_ref().unwrap();
    assert_eq!(g.attacker_valuation, h.valuations.iter().cloned().fold(f64::MIN, f64::max));
    assert!(g.attacker_valuation >= h.valuations[0]);
}

#[test]
fn inductive_game_is_the_plain_pgd_oracle() {
    let spec = small_bench(AttackerSpec::Pgd { restarts: 1 });
    let t = play(
        GameKind::Inductive,
        &spec.with_seeds(Seeds {
            data: 0,
            attacker: 1,
            defender: 2,
        }),
    )
    .unwrap();
    assert_eq!(t.f_star, t.f);
    assert!(t.history.is_none());
    // Every attacked point stays within ε of its clean counterpart.
    for i in 0..t.v.len() {
        assert!(transrobust::in_neighborhood(t.v.row(i), t.v_prime.row(i), &spec.budget).unwrap());
    }
    assert!(t.robust_accuracy() <= t.clean_accuracy + 1e-12);
}

#[test]
fn restarts_never_lower_the_loss() {
    let m = transrobust::ModelSpec::mlp(2, &[6], 2).init(3).unwrap();
    let v = LabeledSet::from_rows(&[vec![0.4, 0.6], vec![0.7, 0.2]], vec![0, 1]).unwrap();
    let b = PerturbationBudget::new(0.2, 0.05, 5).unwrap().with_random_init(true);
    let one = transrobust::attacks::pgd_maximize_restarts(std::slice::from_ref(&m), CompositeLoss::Single, &v, &b, 9, 1).unwrap();
    let five = transrobust::attacks::pgd_maximize_restarts(std::slice::from_ref(&m), CompositeLoss::Single, &v, &b, 9, 5).unwrap();
    for i in 0..v.len() {
        let y = v.labels()[i];
        let l1 = composite_loss(std::slice::from_ref(&m), CompositeLoss::Single, one.row(i), y).unwrap();
        let l5 = composite_loss(std::slice::from_ref(&m), CompositeLoss::Single, five.row(i), y).unwrap();
        assert!(l5 >= l1);
    }
}
