//! Derivatives of `alpha -> pi_alpha` and the expansion remainder.

use ergoperturb::ar::{build_kernel, central_difference_gap, taylor_expansion, ArKernelSpec, NoiseFamily, NoiseModel};
use ergoperturb::ergodicity::invariant_measure;
use ergoperturb::{dual_distance, Grid, WeightSpec};

fn main() -> ergoperturb::Result<()> {
    let grid = Grid::uniform(501, 100.0)?;
    let tv = WeightSpec::new(1.0, 0.0)?;

    let spec = ArKernelSpec::new(0.5, NoiseModel::new(NoiseFamily::student_t(3.0), 1.5)?, grid.clone())?.with_tau_trunc(1e-4);
    let first = taylor_expansion(&spec, 1, 0.2)?;
    for h in [1e-2, 5e-3, 2.5e-3] {
        println!("h = {h}: |mu_1 - central difference| = {:.3e}", central_difference_gap(&spec, &first, h)?);
    }
    for eps in [0.08, 0.04, 0.02, 0.01] {
        let exact = invariant_measure(&build_kernel(&spec.with_alpha(0.5 + eps)?)?)?;
        println!("eps = {eps}: sup |R_eps| = {:.4e}", first.remainder(&exact, eps, 1)?);
    }

    let spec = ArKernelSpec::new(0.5, NoiseModel::new(NoiseFamily::student_t(3.0), 2.5)?, grid)?.with_tau_trunc(1e-4);
    let second = taylor_expansion(&spec, 2, 0.1)?;
    for eps in [0.04, 0.02, 0.01] {
        let exact = invariant_measure(&build_kernel(&spec.with_alpha(0.5 + eps)?)?)?;
        let gap = |o| dual_distance(&exact, &second.partial_sum(eps, o)?, tv);
        println!("eps = {eps}: tv order 1 = {:.3e}, order 2 = {:.3e}", gap(1)?, gap(2)?);
    }
    Ok(())
}
