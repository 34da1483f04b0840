use std::fmt::Write;

use pamsim_core::analysis::{
    fit_decay, fit_decay_jackknife, fractional_moment, local_decay_check, DecayFit, DecayLaw,
    MomentSeries, SnapshotSet,
};
use pamsim_core::sde::{simulate_path_with_snapshots, MassTrajectory, PathOutput};
use pamsim_core::{stats, SimParams};
use serde::Serialize;

use crate::config::SimulateSection;
use crate::error::Result;
use crate::manifest::Campaign;
use crate::plot::{Figure, Series};
use crate::runner::map_replicas;
use crate::tables;

use super::{analysis_err, pm, sim_err, Context, Outcome};

/// Flags overriding the `[simulate]` section.
#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub lambda: Option<f64>,
    pub horizon: Option<f64>,
    pub replicas: Option<usize>,
    pub dt: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub(crate) struct DecayFits {
    pub eta: f64,
    pub law: DecayLaw,
    pub ols: DecayFit,
    /// Same point estimate, replica-jackknife standard error.
    pub jackknife: DecayFit,
}

pub(crate) fn default_law(dim: usize) -> Option<DecayLaw> {
    match dim {
        1 => Some(DecayLaw::D1),
        2 => Some(DecayLaw::D2),
        _ => None,
    }
}

pub(crate) fn decay_figure(series: &MomentSeries, fit: &DecayFit, what: &str) -> Figure {
    let law = fit.law;
    let label = match law {
        DecayLaw::D1 => "t^(1/3)",
        DecayLaw::D2 => "sqrt(log t)",
    };
    let mut pts = Vec::new();
    let mut errs = Vec::new();
    for i in 0..series.times.len() {
        let t = series.times[i];
        if t >= 1.0 && series.estimates[i] > 0.0 {
            pts.push((law.regressor(t), series.estimates[i].ln()));
            errs.push(series.standard_errors[i] / series.estimates[i]);
        }
    }
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let line = vec![
        (lo, fit.intercept - fit.v_hat * lo),
        (hi, fit.intercept - fit.v_hat * hi),
    ];
    Figure::new(
        format!("{what}: decay fit, v = {:.4} ± {:.2}", fit.v_hat, fit.v_se),
        label,
        format!("log E[{what}^{}]", series.eta),
    )
    .with(Series::dots("estimate", pts, Some(errs)))
    .with(Series::line("fit", line))
}

pub(crate) fn write_decay(
    camp: &mut Campaign,
    trajs: &[MassTrajectory],
    eta: f64,
    law: Option<DecayLaw>,
    what: &str,
    summary: &mut String,
) -> Result<MomentSeries> {
    let series = fractional_moment(trajs, eta, None).map_err(analysis_err)?;
    camp.write("moments.csv", &tables::moments_csv(&series)?)?;
    camp.write_json("moments.json", &series)?;
    if let Some(law) = law {
        match (
            fit_decay(&series, law),
            fit_decay_jackknife(trajs, eta, law),
        ) {
            (Ok(ols), Ok(jackknife)) => {
                let _ = writeln!(
                    summary,
                    "| decay fit ({law:?}, η = {eta}) | v = {:.4}, jackknife 95% CI [{:.4}, {:.4}] |",
                    ols.v_hat, jackknife.ci.0, jackknife.ci.1
                );
                camp.write(
                    "decay.svg",
                    decay_figure(&series, &ols, what).to_svg().as_bytes(),
                )?;
                camp.write_json(
                    "decay_fit.json",
                    &DecayFits {
                        eta,
                        law,
                        ols,
                        jackknife,
                    },
                )?;
            }
            (Err(e), _) | (_, Err(e)) => {
                let _ = writeln!(summary, "| decay fit | skipped: {e} |");
            }
        }
    }
    Ok(series)
}

pub(crate) fn mass_summary(trajs: &[MassTrajectory], m0: f64, summary: &mut String) {
    let finals: Vec<f64> = trajs.iter().map(|t| t.final_mass()).collect();
    let mean = stats::mean(&finals);
    let se = stats::standard_error(&finals);
    let z = if se > 0.0 { (mean - m0) / se } else { 0.0 };
    let clamps: u64 = trajs.iter().map(|t| t.clamp_count).sum();
    let steps: u64 = trajs.iter().map(|t| t.site_steps).sum();
    let warnings = trajs.iter().filter(|t| t.boundary_warning).count();
    let aborted = trajs.iter().filter(|t| t.aborted.is_some()).count();
    let _ = writeln!(summary, "| replicas | {} |", trajs.len());
    let _ = writeln!(
        summary,
        "| mean final mass | {} (initial {m0}, z = {z:.2}) |",
        pm(mean, se)
    );
    let _ = writeln!(
        summary,
        "| clamp fraction | {:.3e} |",
        if steps > 0 {
            clamps as f64 / steps as f64
        } else {
            0.0
        }
    );
    let _ = writeln!(summary, "| boundary warnings | {warnings} |");
    let _ = writeln!(summary, "| aborted | {aborted} |");
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<Outcome> {
    let lm = ctx.load_model()?;
    let mut sec: SimulateSection = ctx.config.simulate.clone();
    sec.lambda = args.lambda.unwrap_or(sec.lambda);
    sec.horizon = args.horizon.unwrap_or(sec.horizon);
    sec.replicas = args.replicas.unwrap_or(sec.replicas);
    sec.dt = args.dt.unwrap_or(sec.dt);
    let params = SimParams {
        lambda: sec.lambda,
        c0: sec.c0,
        dt: sec.dt,
        horizon: sec.horizon,
        box_policy: sec.box_policy,
        replicas: sec.replicas,
        seed: ctx.seed,
        scheme: sec.scheme,
        samples_per_decade: sec.samples_per_decade,
        extinction_floor: sec.extinction_floor,
        snapshot_times: sec.snapshot_times.clone(),
    };
    params.validate(&lm.model).map_err(sim_err)?;
    let radius = params.box_radius(&lm.model.step);
    let echo = serde_json::json!({ "simulate": sec, "boxRadius": radius, "effectiveDt": params.effective_dt() });
    let mut camp = Campaign::start(
        &ctx.out_dir,
        "simulate",
        ctx.seed,
        Some(&lm),
        echo,
        ctx.threads,
    )?;

    let outs: Vec<PathOutput> = map_replicas(ctx.threads, params.replicas, |r| {
        simulate_path_with_snapshots(&params, &lm.model, r).map_err(sim_err)
    })?;
    let trajs: Vec<MassTrajectory> = outs.iter().map(|o| o.trajectory.clone()).collect();
    camp.write(
        "trajectories.csv",
        &tables::trajectories_csv("lattice", &trajs)?,
    )?;
    camp.write("replicas.csv", &tables::replicas_csv(&trajs)?)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "# simulate\n");
    let _ = writeln!(
        summary,
        "campaign `{}`, model `{}` (d = {}), seed {}\n",
        camp.campaign_id(),
        lm.source,
        lm.model.dim(),
        ctx.seed
    );
    let _ = writeln!(summary, "| quantity | value |\n|---|---|");
    let _ = writeln!(
        summary,
        "| λ, T, dt | {}, {}, {} |",
        params.lambda,
        params.horizon,
        params.effective_dt()
    );
    let _ = writeln!(summary, "| box radius | {radius} |");
    mass_summary(&trajs, params.c0, &mut summary);
    let law = sec.law.or_else(|| default_law(lm.model.dim()));
    write_decay(&mut camp, &trajs, sec.eta, law, "m_t", &mut summary)?;

    if !params.snapshot_times.is_empty() && !sec.local_decay_c.is_empty() {
        let sets: Vec<SnapshotSet> = (0..outs[0].snapshots.len())
            .map(|k| SnapshotSet {
                time: outs[0].snapshots[k].time,
                fields: outs
                    .iter()
                    .filter_map(|o| o.snapshots.get(k).map(|s| s.field.clone()))
                    .collect(),
            })
            .collect();
        let rep = local_decay_check(&sets, &sec.local_decay_c);
        let _ = writeln!(
            summary,
            "| local decay | {:?}, best c = {:?} |",
            rep.verdict, rep.best_c
        );
        camp.write_json("local_decay.json", &rep)?;
    }
    camp.write("summary.md", summary.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome::ok(manifest, summary))
}
