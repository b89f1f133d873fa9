//! Trains a one-class SVM on a Gaussian cloud and shows that roughly a
//! fraction nu of the training points fall outside the learned region.
//!
//! cargo run --release --example one_class_svm

use netanom::svm::{default_gamma, solve_dual, train_ocsvm, OcsvmParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> netanom::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<Vec<f64>> = (0..400).map(|_| vec![StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]).collect();
    let gamma = default_gamma(&data);
    println!("gamma {gamma:.3}");
    for nu in [0.05, 0.1, 0.3] {
        let params = OcsvmParams::new(nu, gamma);
        let sol = solve_dual(&data, &params)?;
        let model = train_ocsvm(&data, &params)?;
        let outside = data.iter().filter(|x| model.decision_value(x).map(|v| v < 0.0).unwrap_or(false)).count();
        let sv = sol.alpha.iter().filter(|&&a| a > 0.0).count();
        println!(
            "nu {nu:<4}: {outside:>3}/400 outside, {sv} support vectors, objective {:.5}, worst KKT {:.1e}",
            sol.objective(),
            sol.kkt_residuals().into_iter().fold(0.0, f64::max)
        );
    }
    let model = train_ocsvm(&data, &OcsvmParams::new(0.1, gamma))?;
    for p in [[0.0, 0.0], [2.0, 0.0], [4.0, 4.0]] {
        println!("f({p:?}) = {:+.4}", model.decision_value(&p)?);
    }
    Ok(())
}
