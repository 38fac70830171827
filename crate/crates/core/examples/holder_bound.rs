//! Hölder envelope `tv_gap <= D cont_norm_01^eta` with `eta` from the drift and rate constants.

use ergoperturb::ar::{build_kernel, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::ergodicity::estimate_rate;
use ergoperturb::kernel::certify_family;
use ergoperturb::perturbation::{check_holder_bound, continuity_profile, eps_ladder, KernelFamily};
use ergoperturb::{Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let grid = Grid::uniform(1000, 12.0)?;
    let noise = NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0)?;
    let spec = ArKernelSpec::new(0.5, noise, grid)?;
    let family = KernelFamily::from_fn(&eps_ladder(0.2, 7), |e| build_kernel(&spec.with_alpha(0.5 + e)?))?;

    let v = WeightSpec::new(1.0, 1.0)?;
    let (_, cert) = certify_family(&family.kernels(), v, 1, 100.0)?;
    let kappa = estimate_rate(family.base(), v)?.kappa_hat.max(cert.delta);
    let profile = continuity_profile(&family, v.with_beta(0.0))?;
    let check = check_holder_bound(&profile, cert.delta, (1.0 + kappa) / 2.0)?;
    println!(
        "delta = {:.4}, rho = {:.4}, eta = {:.4}, fitted slope = {:.4}, D = {:.4}, envelope holds: {}",
        check.delta, check.rho, check.eta, check.fitted_exponent, check.d_hat, check.envelope_holds
    );
    Ok(())
}
