use std::fmt::Write;

use pamsim_core::kernel::{check_hoeffding_bound, exact_radius, transition_kernel, KGrid};

use crate::error::{CliError, Result};
use crate::manifest::Campaign;
use crate::tables;

use super::{Context, Outcome};

#[derive(Debug, Clone, Default)]
pub struct KernelArgs {
    pub t: Option<f64>,
    pub radius: Option<usize>,
    /// Comma list or `a:b:n` of times for the tail-bound check.
    pub hoeffding_times: Option<String>,
}

pub fn kernel(ctx: &Context, args: &KernelArgs) -> Result<Outcome> {
    let lm = ctx.load_model()?;
    let step = &lm.model.step;
    let mut sec = ctx.config.kernel.clone();
    sec.t = args.t.unwrap_or(sec.t);
    sec.radius = args.radius.or(sec.radius);
    if let Some(s) = &args.hoeffding_times {
        sec.hoeffding_times = crate::config::parse_grid(s)?;
    }
    if !(sec.t >= 0.0 && sec.t.is_finite()) {
        return Err(CliError::config(
            "kernel time must be finite and nonnegative",
        ));
    }
    if !(sec.q > 0.0)
        || sec
            .hoeffding_times
            .iter()
            .any(|&t| !(t >= 1.0 && t.is_finite()))
    {
        return Err(CliError::config(
            "tail-bound check needs q > 0 and times ≥ 1",
        ));
    }
    let radius = sec.radius.unwrap_or_else(|| exact_radius(step, sec.t, 0));
    let echo = serde_json::json!({ "kernel": sec, "effectiveRadius": radius });
    let mut camp = Campaign::start(
        &ctx.out_dir,
        "kernel",
        ctx.seed,
        Some(&lm),
        echo,
        ctx.threads,
    )?;

    let k = transition_kernel(step, sec.t, radius);
    camp.write("kernel.csv", &tables::kernel_csv(&k)?)?;
    let mut s = String::new();
    let _ = writeln!(s, "# kernel\n");
    let _ = writeln!(
        s,
        "model `{}` (d = {}), t = {}, radius {}\n",
        lm.source,
        step.dim(),
        k.time,
        k.radius()
    );
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    let _ = writeln!(s, "| p_t(0) | {:.10e} |", k.get(&vec![0; step.dim()]));
    let _ = writeln!(s, "| Poisson terms | {} |", k.terms);
    let _ = writeln!(s, "| truncation error | {:.3e} |", k.truncation_error);
    let _ = writeln!(s, "| coordinate variance | {:?} |", k.coordinate_variance());

    if !sec.hoeffding_times.is_empty() {
        let grid = match sec.k_points {
            Some(n) => KGrid::Uniform(n),
            None => KGrid::Integers,
        };
        let rep = check_hoeffding_bound(step, sec.q, &sec.hoeffding_times, &grid);
        let _ = writeln!(
            s,
            "| tail bound 2d·exp(-cK²/t) | c = {}, {} violations |",
            rep.fitted_c.map_or("none".into(), |c| format!("{c:.6}")),
            rep.violations.len()
        );
        camp.write("hoeffding.csv", &tables::records_csv(&rep.points)?)?;
        camp.write_json("hoeffding.json", &rep)?;
    }
    camp.write("summary.md", s.as_bytes())?;
    let manifest = camp.finish()?;
    Ok(Outcome::ok(manifest, s))
}
