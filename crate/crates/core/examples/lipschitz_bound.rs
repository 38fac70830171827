//! Lipschitz constant `beta_gap / cont_norm_beta1` at two resolutions, and the
//! resolvent-based constant on a coarse grid.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::ergodicity::estimate_rate;
use ergoperturb::perturbation::{
    check_lipschitz_bound, continuity_profile, eps_ladder, resolvent_constant, KernelFamily,
};
use ergoperturb::{Grid, WeightSpec};

fn family(n: usize, eps: &[f64]) -> ergoperturb::Result<KernelFamily> {
    let noise = NoiseModel::new(NoiseFamily::student_t(3.0), 1.5)?;
    let spec = ArKernelSpec::new(0.5, noise, Grid::uniform(n, 100.0)?)?.with_tau_trunc(1e-4);
    KernelFamily::from_fn(eps, |e| build_kernel(&spec.with_alpha(0.5 + e)?))
}

fn main() -> ergoperturb::Result<()> {
    let beta = WeightSpec::new(1.5, 0.5)?;
    for n in [500, 1000] {
        let profile = continuity_profile(&family(n, &eps_ladder(0.2, 7))?, beta)?;
        let check = check_lipschitz_bound(&profile, beta)?;
        println!("n = {n}: C = {:.4}", check.c_hat);
    }

    let small = family(160, &eps_ladder(0.02, 3))?;
    let check = check_lipschitz_bound(&continuity_profile(&small, beta)?, beta)?;
    let kappa = estimate_rate(small.base(), beta.with_beta(1.0))?.kappa_hat;
    let rc = resolvent_constant(&small, beta, (1.0 - kappa) / 2.0, 16)?;
    println!(
        "n = 160: C = {:.4} <= radius M M0 = {:.4} * {:.3} * {:.3} = {:.3}",
        check.c_hat, rc.radius, rc.m, rc.m0, rc.bound
    );
    Ok(())
}
