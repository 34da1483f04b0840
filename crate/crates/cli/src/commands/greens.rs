use std::fmt::Write;

use pamsim_core::greens::{
    lambda_lower_bound, paley_zygmund_floor, report_from, second_moment_bound, upsilon_quadrature,
    CollisionWalk, GreensConfig, GreensReport,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::manifest::Campaign;
use crate::runner::map_replicas;
use crate::tables;

use super::{Context, Outcome};

#[derive(Debug, Clone, Default)]
pub struct GreensArgs {
    pub mc_replicas: Option<usize>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct GreensOutput<'a> {
    upsilon_zero: f64,
    return_probability: f64,
    lambda_lower_bound: f64,
    lambda: Option<f64>,
    second_moment_bound: Option<f64>,
    paley_zygmund_floor: Option<f64>,
    report: &'a GreensReport,
}

pub fn greens(ctx: &Context, args: &GreensArgs) -> Result<Outcome> {
    let lm = ctx.load_model()?;
    let mut sec = ctx.config.greens.clone();
    sec.mc_replicas = args.mc_replicas.unwrap_or(sec.mc_replicas);
    sec.lambda = args.lambda.or(sec.lambda);
    if sec.mc_replicas < 2 || !(sec.mc_horizon > 0.0) {
        return Err(CliError::config(
            "greens needs at least 2 Monte Carlo replicas and a positive horizon",
        ));
    }
    let cfg = GreensConfig {
        mc_horizon: sec.mc_horizon,
        mc_replicas: sec.mc_replicas,
        seed: ctx.seed,
        ..GreensConfig::default()
    };
    let echo = serde_json::json!({ "greens": sec, "config": cfg });
    let mut camp = Campaign::start(
        &ctx.out_dir,
        "greens",
        ctx.seed,
        Some(&lm),
        echo,
        ctx.threads,
    )?;

    let quad = upsilon_quadrature(&lm.model.step, &cfg).map_err(CliError::run)?;
    let walk = CollisionWalk::new(&lm.model.step);
    let samples = map_replicas(ctx.threads, cfg.mc_replicas, |r| {
        Ok(walk.sample(cfg.mc_horizon, cfg.seed, r))
    })?;
    let mc = walk.combine(&samples, cfg.mc_horizon);
    let report = report_from(quad, mc);
    let sigma = &lm.model.sigma;
    let lower = lambda_lower_bound(sigma, &report);
    let m2 = sec
        .lambda
        .map(|l| second_moment_bound(l, sigma, &report, sec.c0))
        .transpose()
        .map_err(CliError::run)?;
    let pz = m2
        .map(|m| paley_zygmund_floor(sec.c0, m))
        .transpose()
        .map_err(CliError::run)?;
    let out = GreensOutput {
        upsilon_zero: report.upsilon_zero,
        return_probability: report.return_probability,
        lambda_lower_bound: lower,
        lambda: sec.lambda,
        second_moment_bound: m2,
        paley_zygmund_floor: pz,
        report: &report,
    };
    camp.write_json("greens.json", &out)?;
    camp.write("greens_trace.csv", &tables::records_csv(&report.trace)?)?;

    let mc = &report.monte_carlo;
    let mut s = String::new();
    let _ = writeln!(s, "# greens\n");
    let _ = writeln!(s, "model `{}` (d = {})\n", lm.source, lm.model.dim());
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    let _ = writeln!(
        s,
        "| Υ(0), quadrature | {:.8} ± {:.1e} |",
        report.upsilon_zero, report.quadrature_error
    );
    let _ = writeln!(
        s,
        "| Υ(0), Monte Carlo | {:.5} ± {:.5} ({} replicas, T = {}) |",
        mc.estimate, mc.se, mc.replicas, mc.horizon
    );
    let _ = writeln!(
        s,
        "| return probability | {:.6} (MC {:.4} ± {:.4}) |",
        report.return_probability, mc.return_probability, mc.return_probability_se
    );
    let _ = writeln!(s, "| λ lower bound | {lower:.6} |");
    if let (Some(l), Some(m2), Some(pz)) = (sec.lambda, m2, pz) {
        let _ = writeln!(s, "| E m² bound at λ = {l} | {m2:.6} |");
        let _ = writeln!(s, "| survival floor | {pz:.6} |");
    }
    camp.write("summary.md", s.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome::ok(manifest, s))
}
