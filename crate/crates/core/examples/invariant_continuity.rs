//! Continuity norms and invariant-measure gaps along an alpha ladder.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::perturbation::{continuity_profile, eps_ladder, KernelFamily};
use ergoperturb::{Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let grid = Grid::uniform(1000, 12.0)?;
    let noise = NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0)?;
    let spec = ArKernelSpec::new(0.5, noise, grid)?;
    let family = KernelFamily::from_fn(&eps_ladder(0.2, 7), |e| build_kernel(&spec.with_alpha(0.5 + e)?))?;
    let profile = continuity_profile(&family, WeightSpec::new(1.0, 0.5)?)?;
    println!("{:>10} {:>10} {:>10} {:>10} {:>10}", "eps", "cont_01", "cont_11", "tv_gap", "beta_gap");
    for p in &profile {
        println!(
            "{:>10.6} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}",
            p.eps, p.cont_norm_01, p.cont_norm_11, p.tv_gap, p.beta_gap
        );
    }
    Ok(())
}
