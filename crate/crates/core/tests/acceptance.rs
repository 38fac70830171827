//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use ergoperturb::ar::{
    build_kernel, central_difference_gap, derivative_kernel, run_counterexample, taylor_expansion, ArKernelSpec,
    CounterexampleStatus, NoiseFamily, NoiseModel,
};
use ergoperturb::ergodicity::{estimate_rate, generalized_potential, invariant_measure, spectral_projection};
use ergoperturb::harness::mc_oracle;
use ergoperturb::kernel::certify_family;
use ergoperturb::perturbation::{
    check_holder_bound, check_lipschitz_bound, continuity_profile, kartashov_expansion, CheckStatus,
    ExpansionStatus, KernelFamily,
};
use ergoperturb::{dual_distance, DiscretizedKernel, Grid, Result, WeightSpec, WeightedFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

const ALPHA0: f64 = 0.5;

fn ladder() -> Vec<f64> {
    (0..7).map(|k| ALPHA0 + 0.2 * 0.5f64.powi(k)).collect()
}

fn t3(r: f64) -> NoiseModel {
    NoiseModel::new(NoiseFamily::student_t(3.0), r).unwrap()
}

fn student_spec(alpha: f64, r: f64, n: usize, x_max: f64, tau: f64) -> Result<ArKernelSpec> {
    Ok(ArKernelSpec::new(alpha, t3(r), Grid::uniform(n, x_max)?)?.with_tau_trunc(tau))
}

/// Gaussian noise on `[-12, 12]`: noise mass outside is ~4e-33.
fn gaussian_family() -> Result<(ArKernelSpec, KernelFamily)> {
    let spec = ArKernelSpec::new(
        ALPHA0,
        NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0)?,
        Grid::uniform(1000, 12.0)?,
    )?
    .with_tau_trunc(1e-8);
    let eps: Vec<f64> = ladder().iter().map(|a| a - ALPHA0).collect();
    let fam = KernelFamily::from_fn(&eps, |e| build_kernel(&spec.with_alpha(ALPHA0 + e)?))?;
    Ok((spec, fam))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn c1_drift() -> Outcome {
    let spec = student_spec(0.0, 1.0, 501, 100.0, 1e-4)?;
    let v = WeightSpec::new(1.0, 1.0)?;
    let alphas = [-0.6, -0.3, 0.0, 0.3, 0.6];
    let kernels = alphas
        .iter()
        .map(|&a| build_kernel(&spec.with_alpha(a)?))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&DiscretizedKernel> = kernels.iter().collect();
    let (certs, fam) = certify_family(&refs, v, 1, spec.noise.default_l_cap())?;
    let delta_ok = alphas.iter().zip(&certs).all(|(a, c)| c.is_certified() && c.delta <= a.abs() + 0.05);
    let resid_ok = certs.iter().all(|c| c.residual <= 1e-10) && fam.max_residual <= 1e-10;
    let worst = alphas
        .iter()
        .zip(&certs)
        .map(|(a, c)| c.delta - a.abs())
        .fold(f64::MIN, f64::max);
    Ok((
        delta_ok && resid_ok,
        format!(
            "max(delta - |alpha|) = {worst:.2e}, common L = {:.4}, recheck residual = {:.1e}",
            fam.l, fam.max_residual
        ),
    ))
}

fn c2_rate() -> Outcome {
    let v = WeightSpec::new(1.0, 1.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let est = estimate_rate(&build_kernel(&student_spec(alpha, 1.0, 401, 80.0, 1e-3)?)?, v)?;
        ok &= (est.kappa_hat - alpha).abs() <= 0.03 && est.residual < 0.05;
        parts.push(format!("{alpha}: {:.4} ({:.2}%)", est.kappa_hat, 100.0 * est.residual));
    }
    Ok((ok, format!("kappa (fit residual) {}", parts.join(", "))))
}

fn c3_weak_strong() -> Outcome {
    let spec = student_spec(ALPHA0, 1.0, 501, 100.0, 1e-4)?;
    let p0 = build_kernel(&spec)?;
    let (w0, w1) = (WeightSpec::new(1.0, 0.0)?, WeightSpec::new(1.0, 1.0)?);
    let alphas = ladder();
    let weak = alphas
        .iter()
        .map(|&a| build_kernel(&spec.with_alpha(a)?)?.sub(&p0)?.operator_norm(w0, w1))
        .collect::<Result<Vec<_>>>()?;
    let drop = weak[0] / weak[weak.len() - 1];
    let ce = run_counterexample(&spec.noise, ALPHA0, &alphas)?;
    let rel = ce.limit_check / ce.limit.abs();
    Ok((
        strictly_decreasing(&weak) && drop >= 10.0 && ce.status == CounterexampleStatus::Ok && rel <= 1e-3,
        format!(
            "||.||_01 drop {drop:.1}x (monotone {}), ratio {:.6} vs alpha0*I_a {:.6}, rel err {rel:.1e}",
            strictly_decreasing(&weak),
            ce.ratios.last().unwrap().1,
            ce.limit
        ),
    ))
}

fn c4_tv_continuity() -> Outcome {
    let (spec, fam) = gaussian_family()?;
    let tail = spec.noise.family.tail_mass(spec.grid.x_max());
    let prof = continuity_profile(&fam, WeightSpec::new(1.0, 0.0)?)?;
    let tv: Vec<f64> = prof[1..].iter().rev().map(|p| p.tv_gap).collect();
    let smallest = prof[1].tv_gap;
    Ok((
        strictly_decreasing(&tv) && smallest < 1e-2 && tail < 1e-8,
        format!(
            "tv_gap monotone {}, at smallest eps {smallest:.3e}, noise tail {tail:.1e}",
            strictly_decreasing(&tv)
        ),
    ))
}

fn c5_holder() -> Outcome {
    let (_, fam) = gaussian_family()?;
    let v = WeightSpec::new(1.0, 1.0)?;
    let (_, cert) = certify_family(&fam.kernels(), v, 1, 100.0)?;
    let kappa = estimate_rate(fam.base(), v)?.kappa_hat.max(cert.delta);
    let prof = continuity_profile(&fam, v.with_beta(0.0))?;
    let h = check_holder_bound(&prof, cert.delta, (1.0 + kappa) / 2.0)?;
    Ok((
        cert.all_certified
            && h.status == CheckStatus::Ok
            && h.fitted_exponent >= h.eta - 0.1
            && h.envelope_holds,
        format!(
            "delta {:.4}, rho {:.4}, eta {:.4}, slope {:.4}, D {:.4}, envelope {}",
            h.delta, h.rho, h.eta, h.fitted_exponent, h.d_hat, h.envelope_holds
        ),
    ))
}

fn c6_lipschitz() -> Outcome {
    let beta = WeightSpec::new(1.5, 0.5)?;
    let eps: Vec<f64> = ladder().iter().map(|a| a - ALPHA0).collect();
    let mut c = Vec::new();
    for n in [500, 1000] {
        let spec = student_spec(ALPHA0, 1.5, n, 100.0, 1e-4)?;
        let fam = KernelFamily::from_fn(&eps, |e| build_kernel(&spec.with_alpha(ALPHA0 + e)?))?;
        let check = check_lipschitz_bound(&continuity_profile(&fam, beta)?, beta)?;
        c.push(check.c_hat);
    }
    let factor = c[0].max(c[1]) / c[0].min(c[1]);
    Ok((
        c.iter().all(|x| x.is_finite() && *x > 0.0) && factor < 2.0,
        format!("C(500) = {:.4}, C(1000) = {:.4}, factor {factor:.3}", c[0], c[1]),
    ))
}

fn c7_taylor() -> Outcome {
    let tv = WeightSpec::new(1.0, 0.0)?;
    let spec = student_spec(ALPHA0, 1.5, 501, 100.0, 1e-4)?;
    let first = taylor_expansion(&spec, 1, 0.2)?;
    let hs = [1e-2, 5e-3, 2.5e-3];
    let gaps = hs
        .iter()
        .map(|&h| central_difference_gap(&spec, &first, h))
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let order = slope(&lx, &ly);
    let c = gaps[0] / (hs[0] * hs[0]);
    let fd_ok = order >= 1.8 && hs.iter().zip(&gaps).all(|(h, g)| *g <= c * h * h + 1e-6);

    let eps = [0.08, 0.04, 0.02, 0.01];
    let rem = eps
        .iter()
        .map(|&e| first.remainder(&invariant_measure(&build_kernel(&spec.with_alpha(ALPHA0 + e)?)?)?, e, 1))
        .collect::<Result<Vec<_>>>()?;
    let halving: Vec<f64> = rem.windows(2).map(|w| w[0] / w[1]).collect();
    let rem_ok = halving.iter().all(|r| *r >= 4.0);

    let spec2 = student_spec(ALPHA0, 2.5, 501, 100.0, 1e-4)?;
    let second = taylor_expansion(&spec2, 2, 0.1)?;
    let mut beats = true;
    for e in [0.04, 0.02, 0.01] {
        let exact = invariant_measure(&build_kernel(&spec2.with_alpha(ALPHA0 + e)?)?)?;
        beats &= dual_distance(&exact, &second.partial_sum(e, 2)?, tv)? < dual_distance(&exact, &second.partial_sum(e, 1)?, tv)?;
    }
    Ok((
        fd_ok && rem_ok && beats,
        format!(
            "fd order {order:.2} (ok {fd_ok}); sup|R_eps| {:?} per-halving ratios {:?} (need >= 4: {rem_ok}); order 2 beats order 1: {beats}",
            rem.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>(),
            halving.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    ))
}

fn c8_kartashov() -> Outcome {
    let spec = student_spec(ALPHA0, 1.0, 501, 100.0, 1e-4)?;
    let p0 = build_kernel(&spec)?;
    let v = WeightSpec::new(1.0, 1.0)?;
    let mut ok = true;
    let mut used = 0;
    let mut parts = Vec::new();
    for e in [0.02, 0.01, 0.005, 0.0025] {
        let pe = build_kernel(&spec.with_alpha(ALPHA0 + e)?)?;
        let exp = kartashov_expansion(&p0, &pe, 8, v)?;
        if exp.q > 0.5 {
            continue;
        }
        used += 1;
        let tv = dual_distance(&exp.partial_sum, &invariant_measure(&pe)?, v.with_beta(0.0))?;
        let mass = exp.term_masses.iter().fold(0.0_f64, |a, m| a.max(m.abs()));
        ok &= exp.status == ExpansionStatus::Converged && tv <= exp.tail_bound && mass <= 1e-10;
        parts.push(format!("eps {e}: q {:.3} tv {tv:.1e} <= {:.1e}, mass {mass:.1e}", exp.q, exp.tail_bound));
    }
    Ok((ok && used > 0, parts.join("; ")))
}

fn c9_oracle() -> Outcome {
    let gaussian = ArKernelSpec::new(
        0.5,
        NoiseModel::new(NoiseFamily::gaussian(1.0), 1.0)?,
        Grid::uniform(241, 12.0)?,
    )?;
    let student = student_spec(0.3, 1.0, 501, 100.0, 1e-4)?;
    let g = mc_oracle(&gaussian, 1_000_000, 1000, 11)?;
    let s = mc_oracle(&student, 1_000_000, 1000, 12)?;
    Ok((
        g.tv_distance < 0.02 && s.tv_distance < 0.02,
        format!("tv gaussian {:.4}, student-t {:.4}", g.tv_distance, s.tv_distance),
    ))
}

fn c10_structural() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let trials = 100;
    let mut fails = [0usize; 5];
    for _ in 0..trials {
        // random signed kernels on random grids
        let n = rng.random_range(5..40);
        let grid = Grid::uniform(n, rng.random_range(1.0..50.0))?;
        let op = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = DiscretizedKernel::from_operator(grid, op, false)?;
        let r = rng.random_range(1.0..3.0);
        let (b1, b2) = {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            (a.min(b), a.max(b))
        };
        let to = WeightSpec::new(r, 1.0)?;
        if k.operator_norm(WeightSpec::new(r, b1)?, to)? > k.operator_norm(WeightSpec::new(r, b2)?, to)? * (1.0 + 1e-12) {
            fails[0] += 1;
        }

        // AR pieces on small grids
        let alpha = rng.random_range(-0.8..0.8);
        let alpha2 = rng.random_range(-0.8..0.8);
        let rr = [1.5, 2.5][rng.random_range(0..2)];
        let spec = student_spec(alpha, rr, rng.random_range(40..90), 40.0, 1e-2)?;
        let p = build_kernel(&spec)?;
        let q = build_kernel(&spec.with_alpha(alpha2)?)?;
        let d = p.sub(&q)?;
        let (w0, w1) = (WeightSpec::new(rr, 0.0)?, WeightSpec::new(rr, 1.0)?);
        if d.operator_norm(w0, w1)? > d.operator_norm(w1, w1)? * (1.0 + 1e-12) {
            fails[1] += 1;
        }
        let kappa = estimate_rate(&p, w1)?.kappa_hat;
        let proj = spectral_projection(&p, Complex64::new(1.0, 0.0), (1.0 - kappa) / 2.0, 64);
        match proj {
            Ok(pr) if pr.compose(&pr)?.sub(&pr)?.operator_norm(w1, w1)? < 1e-8 => {}
            _ => fails[2] += 1,
        }
        let pot = generalized_potential(&p)?;
        if pot.identity_residual > 1e-9 || pot.constant_residual > 1e-9 || pot.invariance_residual > 1e-9 {
            fails[3] += 1;
        }
        let one = derivative_kernel(&spec, 1)?.apply(&WeightedFunction::constant(&spec.grid, 1.0))?;
        if one.values().iter().any(|v| v.abs() > 1e-10) {
            fails[4] += 1;
        }
    }
    Ok((
        fails.iter().all(|f| *f == 0),
        format!(
            "{trials} trials each; failures: beta-monotone {}, 01<=11 {}, idempotence {}, R-identities {}, P1 1 = 0 {}",
            fails[0], fails[1], fails[2], fails[3], fails[4]
        ),
    ))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 drift certification", c1_drift, Some(Duration::from_secs(60))),
        ("2 rate identity", c2_rate, Some(Duration::from_secs(120))),
        ("3 weak vs strong continuity", c3_weak_strong, Some(Duration::from_secs(120))),
        ("4 TV continuity of invariant measures", c4_tv_continuity, None),
        ("5 Hölder bound", c5_holder, None),
        ("6 Lipschitz bound", c6_lipschitz, None),
        ("7 Taylor expansion", c7_taylor, None),
        ("8 Neumann expansion consistency", c8_kartashov, None),
        ("9 Monte Carlo oracle", c9_oracle, Some(Duration::from_secs(180))),
        ("10 structural invariants", c10_structural, None),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (mut pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let took = start.elapsed();
        let mut timing = format!("{:.1}s", took.as_secs_f64());
        if let Some(b) = budget {
            if took > b {
                pass = false;
                timing.push_str(&format!(" over the {}s budget", b.as_secs()));
            }
        }
        println!("criterion {name}: {} [{timing}] {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
