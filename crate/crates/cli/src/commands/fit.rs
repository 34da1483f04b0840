use std::fmt::Write;
use std::path::PathBuf;

use pamsim_core::analysis::{fit_decay, DecayLaw, MomentSeries};
use pamsim_core::odeclass::SampledFunction;

use crate::error::{CliError, Result};
use crate::manifest::Campaign;
use crate::tables::{self, SeriesInput};

use super::simulate::{decay_figure, write_decay};
use super::{analysis_err, Context, Outcome};

#[derive(Debug, Clone, Default)]
pub struct FitArgs {
    pub input: Option<PathBuf>,
    pub law: Option<DecayLaw>,
    pub eta: Option<f64>,
}

pub fn fit(ctx: &Context, args: &FitArgs) -> Result<Outcome> {
    let mut sec = ctx.config.fit.clone();
    sec.input = args.input.clone().or(sec.input);
    sec.law = args.law.unwrap_or(sec.law);
    sec.eta = args.eta.unwrap_or(sec.eta);
    let input = sec
        .input
        .clone()
        .ok_or_else(|| CliError::config("fit needs an input file"))?;
    let data = tables::read_series_csv(&input)?;
    let echo = serde_json::json!({ "fit": sec });
    let mut camp = Campaign::start(&ctx.out_dir, "fit", ctx.seed, None, echo, ctx.threads)?;

    let mut s = String::new();
    let _ = writeln!(s, "# fit\n");
    let _ = writeln!(s, "input `{}`, law {:?}\n", input.display(), sec.law);
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    match data {
        SeriesInput::Trajectories(trajs) => {
            let _ = writeln!(s, "| replicas | {} |", trajs.len());
            write_decay(&mut camp, &trajs, sec.eta, Some(sec.law), "m_t", &mut s)?;
        }
        SeriesInput::Values { times, values } => {
            let f = SampledFunction::new(times, values).map_err(CliError::config)?;
            let n = f.times.len();
            let series = MomentSeries {
                eta: 1.0,
                replicas: 1,
                times: f.times,
                estimates: f.values,
                standard_errors: vec![0.0; n],
                derivatives: f.derivatives,
                derivative_errors: vec![0.0; n],
                concentration: Vec::new(),
            };
            let fit = fit_decay(&series, sec.law).map_err(analysis_err)?;
            let _ = writeln!(
                s,
                "| v | {:.6} (95% CI [{:.6}, {:.6}], {} points) |",
                fit.v_hat, fit.ci.0, fit.ci.1, fit.points
            );
            camp.write(
                "decay.svg",
                decay_figure(&series, &fit, "f").to_svg().as_bytes(),
            )?;
            camp.write_json("decay_fit.json", &fit)?;
        }
    }
    camp.write("summary.md", s.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome::ok(manifest, s))
}
