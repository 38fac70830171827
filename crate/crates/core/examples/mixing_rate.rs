//! Fitted geometric rate of `||P^n - Pi||` in the weighted norm against `|alpha|`.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::ergodicity::estimate_rate;
use ergoperturb::{Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let grid = Grid::uniform(401, 80.0)?;
    let noise = NoiseModel::new(NoiseFamily::student_t(3.0), 1.0)?;
    for alpha in [0.3, 0.5, 0.7] {
        let spec = ArKernelSpec::new(alpha, noise.clone(), grid.clone())?.with_tau_trunc(1e-3);
        let est = estimate_rate(&build_kernel(&spec)?, WeightSpec::new(1.0, 1.0)?)?;
        println!(
            "alpha = {alpha}: kappa = {:.4}, c = {:.3}, window {:?}, residual {:.2}%",
            est.kappa_hat,
            est.c_hat,
            est.fit_window,
            100.0 * est.residual
        );
    }
    Ok(())
}
