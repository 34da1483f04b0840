use std::fmt::Write;
use std::path::Path;

use crate::error::Result;
use crate::manifest::{read_manifest, verify_outputs, OutputProblem};

use super::Outcome;

/// Verifies a finished campaign directory and renders it as markdown.
pub fn report(dir: &Path) -> Result<Outcome> {
    let m = read_manifest(dir)?;
    let problems = verify_outputs(dir, &m);
    let mut s = String::new();
    let _ = writeln!(s, "# {} campaign {}\n", m.command, m.campaign_id);
    let _ = writeln!(s, "| field | value |\n|---|---|");
    let _ = writeln!(s, "| seed | {} |", m.seed);
    let _ = writeln!(
        s,
        "| model hash | {} |",
        m.model_hash.as_deref().unwrap_or("-")
    );
    let _ = writeln!(s, "| code version | {} |", m.code_version);
    let _ = writeln!(s, "| rng | {} |", m.rng);
    let _ = writeln!(s, "| threads | {} |", m.threads);
    let _ = writeln!(s, "| started | {} |", m.started_at);
    let _ = writeln!(
        s,
        "| finished | {} |",
        m.finished_at.as_deref().unwrap_or("(incomplete)")
    );
    if let Some(w) = m.wall_seconds {
        let _ = writeln!(s, "| wall time | {w:.2} s |");
    }
    let _ = writeln!(s, "\n## outputs\n");
    for o in &m.outputs {
        let _ = writeln!(
            s,
            "- `{}` ({} bytes, sha256 {})",
            o.path,
            o.bytes,
            &o.sha256[..12.min(o.sha256.len())]
        );
    }
    if problems.is_empty() {
        let _ = writeln!(s, "\nall {} outputs verified", m.outputs.len());
    } else {
        let _ = writeln!(s, "\n## problems\n");
        for p in &problems {
            match p {
                OutputProblem::Missing(path) => {
                    let _ = writeln!(s, "- `{path}` is missing");
                }
                OutputProblem::HashMismatch {
                    path,
                    expected,
                    found,
                } => {
                    let _ = writeln!(s, "- `{path}` hash {found} does not match {expected}");
                }
            }
        }
    }
    if let Ok(summary) = std::fs::read_to_string(dir.join("summary.md")) {
        let _ = writeln!(s, "\n{summary}");
    }
    Ok(Outcome {
        manifest: Some(m),
        summary: s,
        exit_code: if problems.is_empty() { 0 } else { 1 },
    })
}
