//! Inductive mean-estimator vs transductive margin check on two Gaussians.
//!
//! `cargo run --release --example gaussian_separation -- [d] [trials]`

use transrobust::gaussian_sep::{run_separation, GaussianInstance, RegimeParams};

fn main() -> transrobust::Result<()> {
    let mut args = std::env::args().skip(1);
    let d: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4096);
    let trials: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(500);
    let inst = GaussianInstance::theorem_regime(&RegimeParams::desk(d))?;
    let r = run_separation(&inst, trials, 0)?;
    println!("d={} σ={:.3} ε={} m={} m'={} t={:.3}", r.d, r.sigma, r.epsilon, r.m, r.m_prime, r.t);
    println!(
        "inductive    error {:.3}  95% [{:.3}, {:.3}]  analytic {:.3}",
        r.inductive_error, r.inductive_interval.low, r.inductive_interval.high, r.inductive_error_analytic
    );
    println!(
        "transductive error {:.3}  95% [{:.3}, {:.3}]",
        r.transductive_error, r.transductive_interval.low, r.transductive_interval.high
    );
    println!("intervals disjoint: {}", r.inductive_interval.disjoint(&r.transductive_interval));
    Ok(())
}
