use std::fmt::Write;

use crate::error::Result;
use crate::modelfile::load_model;

use super::Outcome;

/// Loads and validates a model; the summary describes it.
pub fn validate(spec: &str) -> Result<Outcome> {
    let m = load_model(spec)?;
    let step = &m.model.step;
    let mut s = String::new();
    let _ = writeln!(s, "model {spec}: valid");
    let _ = writeln!(s, "  dimension        {}", step.dim());
    let _ = writeln!(s, "  support points   {}", step.support().len());
    let _ = writeln!(s, "  range R0         {}", step.range());
    let _ = writeln!(s, "  stay probability {}", step.stay_probability() + 0.0);
    let _ = writeln!(s, "  symmetric        {}", step.is_symmetric());
    let _ = writeln!(s, "  covariance       {:?}", step.covariance());
    let _ = writeln!(
        s,
        "  sigma            lip = {}, lower = {}",
        m.model.sigma.lip(),
        m.model.sigma.lower()
    );
    let _ = writeln!(s, "  hash             {}", m.hash);
    Ok(Outcome {
        manifest: None,
        summary: s,
        exit_code: 0,
    })
}
