//! Configuration-driven experiment runner. Each run writes CSV tables and one
//! JSON summary, all carrying the full configuration and the artifact version.

pub mod config;
pub mod mc;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::ar::{
    build_kernel, central_difference_gap, run_counterexample, taylor_expansion, ArKernelSpec, NoiseModel,
};
use crate::ergodicity::{estimate_rate, invariant_measure, RateStatus};
use crate::error::Error;
use crate::kernel::{certify_family, DiscretizedKernel};
use crate::perturbation::{
    check_holder_bound, check_lipschitz_bound, continuity_profile, continuity_profile_with_measures,
    kartashov_expansion, operational_eps1, resolvent_constant, strong_stability_diagnostic, CheckStatus,
    ExpansionStatus, KernelFamily, PerturbationReport,
};
use crate::weighted_space::{dual_distance, Grid, WeightSpec};

pub use config::{Experiment, ExperimentConfig};
pub use mc::{mc_oracle, McOracleResult, RNG_NAME};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Overrides the output directory of the configuration file.
pub const OUT_DIR_ENV: &str = "ERGOPERTURB_OUT_DIR";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl RunError {
    /// 1 for validation errors, 2 for everything that fails after dispatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 1,
            RunError::Numerical(_) | RunError::Output(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub summary: Value,
}

/// `--out`, then the environment variable, then `output_dir`, then `.`.
pub fn resolve_out_dir(cli: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    config
        .output_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn validate(exp: Experiment, config: &ExperimentConfig) -> Result<(), RunError> {
    let v = config.validate(exp);
    if v.is_empty() {
        Ok(())
    } else {
        Err(RunError::Validation(v))
    }
}

pub fn run(exp: Experiment, config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, RunError> {
    validate(exp, config)?;
    let mut cfg = config.clone();
    cfg.experiment = Some(exp);
    let ctx = Context::new(&cfg)?;
    let mut out = Output::new(exp, &cfg);
    match exp {
        Experiment::DriftCertify => drift_certify(&ctx, &mut out)?,
        Experiment::RateTable => rate_table(&ctx, &mut out)?,
        Experiment::ContinuityProfile => continuity(&ctx, &mut out)?,
        Experiment::HolderCheck => holder(&ctx, &mut out)?,
        Experiment::LipschitzCheck => lipschitz(&ctx, &mut out)?,
        Experiment::Counterexample => counterexample(&ctx, &mut out)?,
        Experiment::TaylorExpansion => taylor(&ctx, &mut out)?,
        Experiment::KartashovCompare => kartashov(&ctx, &mut out)?,
        Experiment::McOracle => monte_carlo(&ctx, &mut out)?,
    }
    out.write(out_dir)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    grid: Arc<Grid>,
    noise: NoiseModel,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, Error> {
        Ok(Context {
            cfg,
            grid: Grid::uniform(cfg.n, cfg.x_max)?,
            noise: cfg.noise_model()?,
        })
    }

    fn spec(&self, alpha: f64) -> Result<ArKernelSpec, Error> {
        let mut s = ArKernelSpec::new(alpha, self.noise.clone(), self.grid.clone())?.with_tau_trunc(self.cfg.tau_trunc);
        s.max_row_defect = self.cfg.max_row_defect;
        Ok(s)
    }

    fn kernel(&self, alpha: f64) -> Result<DiscretizedKernel, Error> {
        build_kernel(&self.spec(alpha)?)
    }

    fn family(&self) -> Result<KernelFamily, Error> {
        let a0 = self.cfg.alpha0;
        KernelFamily::from_fn(&self.cfg.eps_values(), |e| self.kernel(a0 + e))
    }

    fn w(&self, beta: f64) -> WeightSpec {
        WeightSpec {
            r: self.cfg.r,
            beta,
        }
    }

    fn l_cap(&self) -> f64 {
        self.cfg.l_cap.unwrap_or_else(|| self.noise.default_l_cap())
    }
}

struct Output {
    exp: Experiment,
    config: Value,
    rng: Option<&'static str>,
    tables: Vec<(String, String, Vec<String>)>,
    result: Value,
    warnings: Vec<String>,
}

impl Output {
    fn new(exp: Experiment, cfg: &ExperimentConfig) -> Self {
        Output {
            exp,
            config: serde_json::to_value(cfg).expect("config serializes"),
            rng: None,
            tables: Vec::new(),
            result: Value::Null,
            warnings: Vec::new(),
        }
    }

    fn table(&mut self, suffix: &str, columns: &str, rows: Vec<String>) {
        self.tables.push((suffix.to_string(), columns.to_string(), rows));
    }

    fn header(&self) -> String {
        let mut h = String::new();
        writeln!(h, "# artifact: ergoperturb {VERSION}").unwrap();
        writeln!(h, "# experiment: {}", self.exp).unwrap();
        if let Some(rng) = self.rng {
            writeln!(h, "# rng: {rng}").unwrap();
        }
        writeln!(h, "# config: {}", self.config).unwrap();
        h
    }

    fn write(self, dir: &Path) -> Result<RunOutcome, RunError> {
        std::fs::create_dir_all(dir)?;
        let header = self.header();
        let mut files = Vec::new();
        for (suffix, columns, rows) in &self.tables {
            let name = if suffix.is_empty() {
                format!("{}.csv", self.exp)
            } else {
                format!("{}.{suffix}.csv", self.exp)
            };
            let mut body = header.clone();
            body.push_str(columns);
            body.push('\n');
            for r in rows {
                body.push_str(r);
                body.push('\n');
            }
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            files.push(path);
        }
        let mut summary = json!({
            "artifact": "ergoperturb",
            "version": VERSION,
            "experiment": self.exp.name(),
            "config": self.config,
            "result": self.result,
            "warnings": self.warnings,
        });
        if let Some(rng) = self.rng {
            summary["rng"] = json!(rng);
        }
        let path = dir.join(format!("{}.summary.json", self.exp));
        std::fs::write(&path, serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n")?;
        files.push(path);
        Ok(RunOutcome {
            files,
            warnings: self.warnings,
            summary,
        })
    }
}

fn profile_rows(profile: &[PerturbationReport]) -> Vec<String> {
    profile
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{}",
                p.eps, p.cont_norm_01, p.cont_norm_beta1, p.cont_norm_11, p.tv_gap, p.beta_gap
            )
        })
        .collect()
}

const PROFILE_COLUMNS: &str = "eps,cont_norm_01,cont_norm_beta1,cont_norm_11,tv_gap,beta_gap";

fn drift_certify(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let w = ctx.w(1.0);
    let kernels = ctx
        .cfg
        .alphas
        .iter()
        .map(|&a| ctx.kernel(a))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&DiscretizedKernel> = kernels.iter().collect();
    let (certs, fam) = certify_family(&refs, w, ctx.cfg.n_steps, ctx.l_cap())?;
    let mut rows = Vec::new();
    for (a, c) in ctx.cfg.alphas.iter().zip(&certs) {
        rows.push(format!("{a},{},{},{},{:?}", c.delta, c.l, c.residual, c.status));
        if !c.is_certified() {
            out.warnings.push(format!("drift not certified at alpha = {a} (delta = {})", c.delta));
        }
    }
    out.table("", "alpha,delta,l,residual,status", rows);
    out.result = json!({ "family": fam, "members": certs, "l_cap": ctx.l_cap() });
    Ok(())
}

fn rate_table(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let w = ctx.w(ctx.cfg.beta);
    let mut rows = Vec::new();
    let mut diag = Vec::new();
    let mut results = Vec::new();
    for &a in &ctx.cfg.alphas {
        let est = estimate_rate(&ctx.kernel(a)?, w)?;
        rows.push(format!(
            "{a},{},{},{},{},{},{:?}",
            est.kappa_hat, est.c_hat, est.residual, est.fit_window.0, est.fit_window.1, est.status
        ));
        for (k, d) in &est.diagnostics {
            diag.push(format!("{a},{k},{d}"));
        }
        if est.status == RateStatus::NotDecaying {
            out.warnings.push(format!("no geometric decay at alpha = {a}"));
        }
        results.push(json!({ "alpha": a, "estimate": est }));
    }
    out.table("", "alpha,kappa_hat,c_hat,residual,window_start,window_end,status", rows);
    out.table("diagnostics", "alpha,n,d_n", diag);
    out.result = json!({ "rates": results });
    Ok(())
}

fn continuity(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let fam = ctx.family()?;
    let (profile, pis) = continuity_profile_with_measures(&fam, ctx.w(ctx.cfg.beta))?;
    let w1 = ctx.w(1.0);
    let mut members = Vec::new();
    for ((eps, k), pi) in fam.members().iter().zip(&pis) {
        let est = estimate_rate(k, w1).map_err(|e| Error::at_eps(*eps, e))?;
        members.push(json!({
            "eps": eps,
            "kappa_hat": est.kappa_hat,
            "pi_v": pi.dual_norm(w1),
        }));
    }
    let eps1 = operational_eps1(&fam, w1, ctx.cfg.n_steps, ctx.l_cap())?;
    let tv: Vec<f64> = profile.iter().map(|p| p.tv_gap).collect();
    let monotone = tv.windows(2).all(|w| w[0] < w[1]);
    if !monotone {
        out.warnings.push("tv_gap is not strictly increasing in |eps|".into());
    }
    out.table("", PROFILE_COLUMNS, profile_rows(&profile));
    out.result = json!({
        "profile": profile,
        "members": members,
        "eps1": eps1,
        "tv_gap_monotone": monotone,
    });
    Ok(())
}

fn holder(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let fam = ctx.family()?;
    let profile = continuity_profile(&fam, ctx.w(0.0))?;
    let w1 = ctx.w(1.0);
    let (_, cert) = certify_family(&fam.kernels(), w1, ctx.cfg.n_steps, ctx.l_cap())?;
    let rate = estimate_rate(fam.base(), w1)?;
    let kappa = rate.kappa_hat.max(cert.delta);
    let rho = (1.0 + kappa) / 2.0;
    if !cert.all_certified {
        out.warnings.push(format!("family drift not certified (delta = {})", cert.delta));
    }
    out.table("", PROFILE_COLUMNS, profile_rows(&profile));
    if cert.delta <= 0.0 || cert.delta >= 1.0 {
        out.warnings.push("delta outside (0,1); Hölder exponent undefined".into());
        out.result = json!({ "profile": profile, "certificate": cert, "kappa_hat": rate.kappa_hat });
        return Ok(());
    }
    let check = check_holder_bound(&profile, cert.delta, rho)?;
    if check.status == CheckStatus::InsufficientSignal {
        out.warnings.push("insufficient signal for the Hölder fit".into());
    }
    out.result = json!({
        "check": check,
        "certificate": cert,
        "kappa_hat": rate.kappa_hat,
        "kappa_used": kappa,
        "delta_choice": "family-wide certified delta",
    });
    Ok(())
}

fn lipschitz(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let fam = ctx.family()?;
    let beta = ctx.w(ctx.cfg.beta);
    let profile = continuity_profile(&fam, beta)?;
    let check = check_lipschitz_bound(&profile, beta)?;
    for e in &check.excluded {
        out.warnings.push(format!("eps = {e} excluded: vanishing continuity norm"));
    }
    let constant = if ctx.cfg.contour_points > 0 {
        let kappa = estimate_rate(fam.base(), ctx.w(1.0))?.kappa_hat;
        Some(resolvent_constant(&fam, beta, (1.0 - kappa) / 2.0, ctx.cfg.contour_points)?)
    } else {
        None
    };
    out.table(
        "",
        "eps,ratio",
        check.ratios.iter().map(|(e, r)| format!("{e},{r}")).collect(),
    );
    out.table("profile", PROFILE_COLUMNS, profile_rows(&profile));
    out.result = json!({ "check": check, "resolvent_constant": constant });
    Ok(())
}

fn counterexample(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let a0 = ctx.cfg.alpha0;
    let res = run_counterexample(&ctx.noise, a0, &ctx.cfg.alphas)?;
    let p0 = ctx.kernel(a0)?;
    let (w0, w1) = (ctx.w(0.0), ctx.w(1.0));
    let mut rows = Vec::new();
    for &(alpha, ratio) in &res.ratios {
        let d = ctx.kernel(alpha)?.sub(&p0)?;
        rows.push(format!(
            "{alpha},{},{ratio},{},{}",
            res.a / (alpha - a0),
            d.operator_norm(w0, w1)?,
            d.operator_norm(w1, w1)?
        ));
    }
    if res.status != crate::ar::CounterexampleStatus::Ok {
        out.warnings.push("no separation parameter with |I_a| > 0.01 on the ladder".into());
    }
    out.table("", "alpha,x_alpha,ratio,cont_norm_01,cont_norm_11", rows);
    out.result = json!({ "counterexample": res });
    Ok(())
}

fn taylor(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let a0 = ctx.cfg.alpha0;
    let spec = ctx.spec(a0)?;
    let order = ctx.cfg.order;
    let coeffs = taylor_expansion(&spec, order, ctx.cfg.beta_r)?;
    let mut fd = Vec::new();
    let mut gaps = Vec::new();
    for &h in &ctx.cfg.h {
        let g = central_difference_gap(&spec, &coeffs, h)?;
        fd.push(format!("{h},{g}"));
        gaps.push((h, g));
    }
    let fd_orders: Vec<f64> = gaps
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect();
    let tv = WeightSpec { r: 1.0, beta: 0.0 };
    let mut rows = Vec::new();
    let mut remainders = Vec::new();
    for eps in ctx.cfg.eps_values() {
        let exact = invariant_measure(&ctx.kernel(a0 + eps)?).map_err(|e| Error::at_eps(eps, e))?;
        let rem = coeffs.remainder(&exact, eps, order)?;
        let mut row = format!("{eps},{rem}");
        for o in 0..=order {
            write!(row, ",{}", dual_distance(&exact, &coeffs.partial_sum(eps, o)?, tv)?).unwrap();
        }
        rows.push(row);
        remainders.push((eps, rem));
    }
    let cols = std::iter::once("eps,remainder".to_string())
        .chain((0..=order).map(|o| format!("tv_order_{o}")))
        .collect::<Vec<_>>()
        .join(",");
    out.table("", &cols, rows);
    out.table("fd", "h,gap", fd);
    let x = ctx.grid.nodes();
    let dens: Vec<String> = (0..x.len())
        .map(|i| {
            let mut r = format!("{},{}", x[i], coeffs.pi.density()[i]);
            for m in &coeffs.mu {
                write!(r, ",{}", m.density()[i]).unwrap();
            }
            r
        })
        .collect();
    let dcols = std::iter::once("x,pi".to_string())
        .chain((1..=order).map(|j| format!("mu_{j}")))
        .collect::<Vec<_>>()
        .join(",");
    out.table("coefficients", &dcols, dens);
    out.result = json!({
        "alpha": a0,
        "order": order,
        "beta_r": ctx.cfg.beta_r,
        "mu_masses": coeffs.masses,
        "mu_dual_norms": coeffs.dual_norms,
        "fd_gaps": gaps,
        "fd_orders": fd_orders,
        "remainders": remainders,
    });
    Ok(())
}

fn kartashov(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let a0 = ctx.cfg.alpha0;
    let p0 = ctx.kernel(a0)?;
    let w1 = ctx.w(1.0);
    let kappa = estimate_rate(&p0, w1)?.kappa_hat;
    let rho = (1.0 + kappa) / 2.0;
    let tv = WeightSpec { r: 1.0, beta: 0.0 };
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for eps in ctx.cfg.eps_values() {
        let pe = ctx.kernel(a0 + eps)?;
        let exp = kartashov_expansion(&p0, &pe, ctx.cfg.order, w1).map_err(|e| Error::at_eps(eps, e))?;
        let exact = invariant_measure(&pe).map_err(|e| Error::at_eps(eps, e))?;
        let gap = dual_distance(&exp.partial_sum, &exact, tv)?;
        let max_mass = exp.term_masses.iter().fold(0.0_f64, |a, m| a.max(m.abs()));
        let ss = strong_stability_diagnostic(&p0, &pe, ctx.cfg.n_steps, rho, w1)?;
        if exp.status == ExpansionStatus::Divergent {
            out.warnings.push(format!("expansion divergent at eps = {eps} (q = {})", exp.q));
        }
        rows.push(format!(
            "{eps},{},{},{gap},{max_mass},{},{:?},{},{}",
            exp.q,
            exp.tail_bound,
            exp.measured_ratio(),
            exp.status,
            ss.delta_n,
            ss.bound.map(|b| b.to_string()).unwrap_or_default()
        ));
        results.push(json!({
            "eps": eps,
            "q": exp.q,
            "tail_bound": exp.tail_bound,
            "tv": gap,
            "within_bound": gap <= exp.tail_bound,
            "max_term_mass": max_mass,
            "total_mass": exp.total_mass,
            "measured_ratio": exp.measured_ratio(),
            "status": exp.status,
            "strong_stability": ss,
        }));
    }
    out.table(
        "",
        "eps,q,tail_bound,tv,max_term_mass,measured_ratio,status,delta_n,strong_stability_bound",
        rows,
    );
    out.result = json!({ "order": ctx.cfg.order, "rho": rho, "kappa_hat": kappa, "members": results });
    Ok(())
}

fn monte_carlo(ctx: &Context, out: &mut Output) -> Result<(), Error> {
    let spec = ctx.spec(ctx.cfg.alpha0)?;
    let res = mc_oracle(&spec, ctx.cfg.n_samples, ctx.cfg.burn_in, ctx.cfg.seed)?;
    let pi = invariant_measure(&build_kernel(&spec)?)?;
    let x = ctx.grid.nodes();
    let rows = (0..x.len())
        .map(|i| format!("{},{},{}", x[i], res.histogram.density()[i], pi.density()[i]))
        .collect();
    out.rng = Some(RNG_NAME);
    out.table("", "x,empirical,quadrature", rows);
    out.result = json!({ "oracle": res });
    Ok(())
}
