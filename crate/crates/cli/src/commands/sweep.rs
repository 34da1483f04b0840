use std::fmt::Write;

use pamsim_core::analysis::{
    laplace_monotonicity, survival_monotonicity, MonotonicityReport, SweepResult,
};
use pamsim_core::sde::simulate_coupled;
use pamsim_core::SimParams;
use serde::Serialize;

use crate::config::parse_grid;
use crate::error::{CliError, Result};
use crate::manifest::Campaign;
use crate::modelfile::load_model;
use crate::plot::{Figure, Series};
use crate::runner::map_replicas;
use crate::tables;

use super::{analysis_err, sim_err, Context, Outcome};

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    /// `a:b:n` or a comma-separated list.
    pub lambdas: Option<String>,
    /// Use the built-in walk in this dimension.
    pub dim: Option<usize>,
    pub replicas: Option<usize>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct SweepReport<'a> {
    result: &'a SweepResult,
    laplace_monotonicity: Option<MonotonicityReport>,
    survival_monotonicity: Option<MonotonicityReport>,
}

pub fn sweep(ctx: &Context, args: &SweepArgs) -> Result<Outcome> {
    let lm = match args.dim {
        Some(d) => load_model(&format!("srw{d}"))?,
        None => ctx.load_model()?,
    };
    let mut sec = ctx.config.sweep.clone();
    sec.replicas = args.replicas.unwrap_or(sec.replicas);
    sec.horizon = args.horizon.unwrap_or(sec.horizon);
    let lambdas = match &args.lambdas {
        Some(s) => parse_grid(s)?,
        None => sec.lambdas.values()?,
    };
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(
            "λ grid must be nonempty and strictly increasing",
        ));
    }
    let threshold = sec.threshold.unwrap_or(0.5 * sec.c0);
    let params = SimParams {
        lambda: lambdas[0],
        c0: sec.c0,
        dt: sec.dt,
        horizon: sec.horizon,
        box_policy: sec.box_policy,
        replicas: sec.replicas,
        seed: ctx.seed,
        scheme: sec.scheme,
        samples_per_decade: 1,
        extinction_floor: sec.extinction_floor,
        snapshot_times: Vec::new(),
    };
    for &l in &lambdas {
        SimParams {
            lambda: l,
            ..params.clone()
        }
        .validate(&lm.model)
        .map_err(sim_err)?;
    }
    let echo = serde_json::json!({ "sweep": sec, "lambdas": lambdas, "threshold": threshold });
    let mut camp = Campaign::start(
        &ctx.out_dir,
        "sweep",
        ctx.seed,
        Some(&lm),
        echo,
        ctx.threads,
    )?;

    let masses: Vec<Vec<f64>> = map_replicas(ctx.threads, params.replicas, |r| {
        let out = simulate_coupled(&params, &lm.model, &lambdas, r).map_err(sim_err)?;
        Ok(out.iter().map(|o| o.trajectory.final_mass()).collect())
    })?;
    let result = SweepResult::from_final_masses(&lambdas, &masses, threshold, params.horizon)
        .map_err(analysis_err)?;
    let lap = laplace_monotonicity(&result).ok();
    let surv = survival_monotonicity(&result).ok();

    camp.write("sweep.csv", &tables::sweep_csv(&result)?)?;
    camp.write_json(
        "sweep.json",
        &SweepReport {
            result: &result,
            laplace_monotonicity: lap.clone(),
            survival_monotonicity: surv.clone(),
        },
    )?;
    let pts = |v: &[f64]| {
        lambdas
            .iter()
            .copied()
            .zip(v.iter().copied())
            .collect::<Vec<_>>()
    };
    let fig = Figure::new(
        format!("sweep, d = {}, T = {}", lm.model.dim(), params.horizon),
        "λ",
        "fraction",
    )
    .with(Series::dots(
        "P(m_T > threshold)",
        pts(&result.survival_fraction),
        Some(result.survival_se.iter().map(|s| 3.0 * s).collect()),
    ))
    .with(Series::dots(
        "E exp(-m_T)",
        pts(&result.laplace),
        Some(result.laplace_se.iter().map(|s| 3.0 * s).collect()),
    ));
    camp.write("sweep.svg", fig.to_svg().as_bytes())?;

    let mut s = String::new();
    let _ = writeln!(s, "# sweep\n");
    let _ = writeln!(
        s,
        "campaign `{}`, model `{}` (d = {}), {} paired replicas, T = {}\n",
        camp.campaign_id(),
        lm.source,
        lm.model.dim(),
        params.replicas,
        params.horizon
    );
    let _ = writeln!(
        s,
        "| λ | survival | Laplace | mean mass |\n|---|---|---|---|"
    );
    for k in 0..lambdas.len() {
        let _ = writeln!(
            s,
            "| {} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.4} ± {:.4} |",
            lambdas[k],
            result.survival_fraction[k],
            result.survival_se[k],
            result.laplace[k],
            result.laplace_se[k],
            result.mean_mass[k],
            result.mean_mass_se[k]
        );
    }
    let verdict = |r: &Option<MonotonicityReport>| {
        r.as_ref().map_or("n/a (fewer than 3 λ)".to_string(), |r| {
            if r.pass {
                "pass".into()
            } else {
                format!("fail ({} violations)", r.violations.len())
            }
        })
    };
    let _ = writeln!(
        s,
        "\nLaplace nondecreasing: {}; survival nonincreasing: {}",
        verdict(&lap),
        verdict(&surv)
    );
    if let Some(lc) = result.lambda_c_hat {
        let _ = writeln!(s, "survival crosses 1/2 near λ ≈ {lc:.4}");
    }
    camp.write("summary.md", s.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome::ok(manifest, s))
}
