use std::fmt::Write;
use std::path::{Path, PathBuf};

use pamsim_core::analysis::MomentSeries;
use pamsim_core::odeclass::{
    check_membership, fit_membership, verify_decay_conclusion, ClassParams, DecayConclusion,
    MembershipReport, SampledFunction,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::manifest::Campaign;
use crate::tables::{self, SeriesInput};

use super::{Context, Outcome};

#[derive(Debug, Clone, Default)]
pub struct OdeClassArgs {
    pub input: Option<PathBuf>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct OdeClassOutput {
    params: Option<ClassParams>,
    membership: Option<MembershipReport>,
    fit: Option<pamsim_core::odeclass::MembershipFit>,
    decay: Option<DecayConclusion>,
    decay_skipped: Option<String>,
    pass: bool,
}

fn oc_err(e: pamsim_core::odeclass::OdeClassError) -> CliError {
    CliError::run(e)
}

/// A `t,f` CSV or a moment-series JSON, multiplied by `scale`.
pub(crate) fn read_function(path: &Path, scale: f64) -> Result<SampledFunction> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let series: MomentSeries = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        return SampledFunction::from_moment_series(&series, scale).map_err(oc_err);
    }
    match tables::read_series_csv(path)? {
        SeriesInput::Values { times, values } => {
            SampledFunction::new(times, values.into_iter().map(|v| scale * v).collect())
                .map_err(oc_err)
        }
        SeriesInput::Trajectories(_) => Err(CliError::config(format!(
            "{}: expected columns t,f or a moment-series JSON",
            path.display()
        ))),
    }
}

pub fn odeclass(ctx: &Context, args: &OdeClassArgs) -> Result<Outcome> {
    let mut sec = ctx.config.odeclass.clone();
    sec.input = args.input.clone().or(sec.input);
    sec.delta = args.delta.unwrap_or(sec.delta);
    sec.gamma = args.gamma.unwrap_or(sec.gamma);
    sec.alpha = args.alpha.or(sec.alpha);
    let input = sec
        .input
        .clone()
        .ok_or_else(|| CliError::config("odeclass needs an input file"))?;
    let f = read_function(&input, sec.scale)?;
    let echo = serde_json::json!({ "odeclass": sec });
    let mut camp = Campaign::start(&ctx.out_dir, "odeclass", ctx.seed, None, echo, ctx.threads)?;

    let mut out = OdeClassOutput {
        params: None,
        membership: None,
        fit: None,
        decay: None,
        decay_skipped: None,
        pass: false,
    };
    let mut s = String::new();
    let _ = writeln!(s, "# odeclass\n");
    let _ = writeln!(
        s,
        "input `{}`, {} samples on [{}, {}]\n",
        input.display(),
        f.times.len(),
        f.times[0],
        f.times[f.times.len() - 1]
    );
    let report = match sec.alpha {
        Some(alpha) => {
            let p = ClassParams {
                alpha,
                delta: sec.delta,
                gamma: sec.gamma,
                a: sec.a,
                b: sec.b,
            };
            out.params = Some(p);
            let r = check_membership(&f, p).map_err(oc_err)?;
            out.membership = Some(r.clone());
            Some(r)
        }
        None => {
            let fit = fit_membership(&f, sec.delta, sec.gamma, sec.a, sec.b, sec.preferred_alpha)
                .map_err(oc_err)?;
            let _ = writeln!(
                s,
                "feasible α range [{:.4e}, {:.4e}] ({} active points), fitted α = {:?}\n",
                fit.alpha.alpha_min, fit.alpha.alpha_max, fit.alpha.active_points, fit.fitted_alpha
            );
            let r = fit.report.clone();
            out.fit = Some(fit);
            r
        }
    };
    out.pass = report.as_ref().is_some_and(|r| r.pass);
    match &report {
        Some(r) => {
            let _ = writeln!(
                s,
                "membership (δ = {}, γ = {}): {} (worst margin {:.3e} at t = {})",
                sec.delta,
                sec.gamma,
                if r.pass { "pass" } else { "fail" },
                r.worst_margin,
                r.worst_time
            );
            camp.write("membership.csv", &tables::records_csv(&r.rows)?)?;
        }
        None => {
            let _ = writeln!(s, "membership: no feasible α");
        }
    }
    match verify_decay_conclusion(&f, sec.delta) {
        Ok(d) => {
            let _ = writeln!(
                s,
                "decay conclusion {:?}: limsup estimate {:.4e}, {}",
                d.exponent,
                d.limsup_estimate,
                if d.pass { "pass" } else { "fail" }
            );
            out.decay = Some(d);
        }
        Err(e) => {
            let _ = writeln!(s, "decay conclusion skipped: {e}");
            out.decay_skipped = Some(e.to_string());
        }
    }
    camp.write_json("odeclass.json", &out)?;
    camp.write("summary.md", s.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome {
        manifest: Some(manifest),
        summary: s,
        exit_code: if out.pass { 0 } else { 1 },
    })
}
