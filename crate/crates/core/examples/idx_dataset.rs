//! Writes a tiny IDX dataset (two stroke orientations on 8×8 images), loads
//! it back as MNIST files would be loaded, and plays a game on it.
//!
//! `cargo run --release --example idx_dataset [-- images labels]`

use transrobust::game::{play, AdaptorSpec, AttackerSpec, DataSource, GameKind, Seeds};
use transrobust::io::config::AttackBenchSpec;
use transrobust::io::{load_mnist_idx, write_idx};

fn synthetic_strokes(n: usize) -> (Vec<u8>, Vec<u8>) {
    let mut pixels = Vec::with_capacity(n * 64);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let offset = (i / 2) % 6 + 1;
        for r in 0..8 {
            for c in 0..8 {
                let on = if label == 0 { c == offset } else { r == offset };
                let noise = ((i * 31 + r * 7 + c * 13) % 40) as u8;
                pixels.push(if on { 215 + noise } else { noise });
            }
        }
        labels.push(label);
    }
    (pixels, labels)
}

fn main() -> transrobust::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = std::env::temp_dir().join("transrobust-idx-example");
    let (images, labels) = if args.len() == 2 {
        (args[0].clone().into(), args[1].clone().into())
    } else {
        std::fs::create_dir_all(&dir)?;
        let (pixels, labels) = synthetic_strokes(300);
        let paths = (dir.join("images-idx3-ubyte"), dir.join("labels-idx1-ubyte"));
        write_idx(&paths.0, &paths.1, 8, 8, &pixels, &labels)?;
        paths
    };
    let set = load_mnist_idx(&images, &labels)?;
    println!("loaded {} images of dimension {} ({} classes)", set.len(), set.dim(), set.num_classes());

    let mut spec = AttackBenchSpec::desk().game;
    spec.data = DataSource::Idx { images, labels };
    spec.n_train = 200;
    spec.n_test = 50;
    spec.adaptor = AdaptorSpec::Identity;
    spec.attacker = AttackerSpec::Pgd { restarts: 1 };
    let t = play(
        GameKind::Inductive,
        &spec.with_seeds(Seeds {
            data: 0,
            attacker: 1,
            defender: 2,
        }),
    )?;
    println!("clean accuracy {:.3}, robust accuracy at ε = {}: {:.3}", t.clean_accuracy, spec.budget.epsilon, t.robust_accuracy());
    Ok(())
}
