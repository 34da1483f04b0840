use std::fmt::Write;

use pamsim_core::analysis::DecayLaw;
use pamsim_core::continuum::{
    default_initial, gaussian_heat_flow, mean_field_probes, simulate_continuum, ContinuumField,
    ContinuumParams, ContinuumPath,
};
use pamsim_core::sde::MassTrajectory;
use pamsim_core::Nonlinearity;

use crate::error::{CliError, Result};
use crate::manifest::Campaign;
use crate::runner::map_replicas;
use crate::tables;

use super::simulate::{mass_summary, write_decay};
use super::{Context, Outcome};

pub const PROBES: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

#[derive(Debug, Clone, Default)]
pub struct ContinuumArgs {
    pub dx: Option<f64>,
    pub horizon: Option<f64>,
    pub replicas: Option<usize>,
    pub noise: Option<f64>,
}

pub fn continuum(ctx: &Context, args: &ContinuumArgs) -> Result<Outcome> {
    let mut sec = ctx.config.continuum.clone();
    sec.dx = args.dx.unwrap_or(sec.dx);
    sec.horizon = args.horizon.unwrap_or(sec.horizon);
    sec.replicas = args.replicas.unwrap_or(sec.replicas);
    sec.noise = args.noise.unwrap_or(sec.noise);
    // σ comes from an explicitly chosen model; otherwise the identity.
    let lm = match &ctx.model {
        Some(spec) => Some(crate::modelfile::load_model(spec)?),
        None => None,
    };
    let sigma = lm
        .as_ref()
        .map_or_else(Nonlinearity::identity, |m| m.model.sigma.clone());
    let params = ContinuumParams {
        noise: sec.noise,
        dx: sec.dx,
        dt: sec.dt,
        horizon: sec.horizon,
        half_width: sec.half_width,
        replicas: sec.replicas,
        seed: ctx.seed,
        samples_per_decade: sec.samples_per_decade,
        snapshot_times: vec![sec.horizon],
    };
    params.validate().map_err(CliError::config)?;
    let echo = serde_json::json!({ "continuum": sec, "halfWidth": params.half_width(), "effectiveDt": params.dt() });
    let mut camp = Campaign::start(
        &ctx.out_dir,
        "continuum",
        ctx.seed,
        lm.as_ref(),
        echo,
        ctx.threads,
    )?;

    let paths: Vec<ContinuumPath> = map_replicas(ctx.threads, params.replicas, |r| {
        simulate_continuum(&params, &sigma, default_initial, r).map_err(CliError::run)
    })?;
    let trajs: Vec<MassTrajectory> = paths.iter().map(|p| p.trajectory.clone()).collect();
    camp.write(
        "trajectories.csv",
        &tables::trajectories_csv("continuum", &trajs)?,
    )?;
    camp.write("replicas.csv", &tables::replicas_csv(&trajs)?)?;

    let m0 = trajs[0].mass[0];
    let mut s = String::new();
    let _ = writeln!(s, "# continuum\n");
    let _ = writeln!(s, "campaign `{}`, seed {}\n", camp.campaign_id(), ctx.seed);
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    let _ = writeln!(
        s,
        "| dx, dt, L, T | {}, {:.3e}, {}, {} |",
        params.dx,
        params.dt(),
        params.half_width(),
        params.horizon
    );
    mass_summary(&trajs, m0, &mut s);
    let loss = paths.iter().map(|p| p.boundary_loss).fold(0.0, f64::max);
    let _ = writeln!(s, "| max boundary loss | {loss:.3e} |");
    write_decay(
        &mut camp,
        &trajs,
        sec.eta,
        Some(DecayLaw::D1),
        "M_t",
        &mut s,
    )?;

    let finals: Vec<&ContinuumField> = paths
        .iter()
        .filter_map(|p| p.snapshots.last().map(|snap| &snap.field))
        .collect();
    let rows = mean_field_probes(&finals, &PROBES, |x| gaussian_heat_flow(params.horizon, x));
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let _ = writeln!(
        s,
        "| mean field vs heat flow | max abs z = {worst:.2} over {} probes |",
        rows.len()
    );
    camp.write_json("mean_field.json", &rows)?;
    camp.write("summary.md", s.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome::ok(manifest, s))
}
