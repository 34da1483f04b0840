//! CSV artifacts and inputs.

use std::collections::BTreeMap;
use std::path::Path;

use pamsim_core::analysis::{MomentSeries, SweepResult};
use pamsim_core::kernel::TransitionKernel;
use pamsim_core::sde::MassTrajectory;
use serde::Serialize;

use crate::error::{CliError, Result};

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(true)
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| CliError::run(e.to_string()))
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One row per flat serializable record, headers from the field names.
pub fn records_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = writer();
    for r in rows {
        w.serialize(r).map_err(CliError::run)?;
    }
    finish(w)
}

pub const TRAJECTORY_COLUMNS: [&str; 8] = [
    "model",
    "replicaId",
    "lambda",
    "t",
    "mass",
    "qv",
    "l2Integral",
    "concentration",
];

/// Long format: one row per replica and sample time.
pub fn trajectories_csv(model: &str, trajs: &[MassTrajectory]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(TRAJECTORY_COLUMNS).map_err(CliError::run)?;
    for tr in trajs {
        let (id, lambda) = (tr.replica_id.to_string(), num(tr.lambda));
        for i in 0..tr.times.len() {
            w.write_record([
                model,
                &id,
                &lambda,
                &num(tr.times[i]),
                &num(tr.mass[i]),
                &num(tr.qv[i]),
                &num(tr.l2_integral[i]),
                &num(tr.concentration[i]),
            ])
            .map_err(CliError::run)?;
        }
    }
    finish(w)
}

/// Per-replica diagnostics.
pub fn replicas_csv(trajs: &[MassTrajectory]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record([
        "replicaId",
        "seed",
        "lambda",
        "finalMass",
        "clampCount",
        "siteSteps",
        "boundaryRatio",
        "boundaryWarning",
        "frozenAt",
        "aborted",
    ])
    .map_err(CliError::run)?;
    for tr in trajs {
        let aborted = tr
            .aborted
            .as_ref()
            .map(|a| format!("{a:?}"))
            .unwrap_or_default();
        w.write_record([
            tr.replica_id.to_string(),
            tr.seed.to_string(),
            num(tr.lambda),
            num(tr.mass.last().copied().unwrap_or(f64::NAN)),
            tr.clamp_count.to_string(),
            tr.site_steps.to_string(),
            num(tr.boundary_ratio),
            tr.boundary_warning.to_string(),
            opt(tr.frozen_at),
            aborted,
        ])
        .map_err(CliError::run)?;
    }
    finish(w)
}

pub fn moments_csv(s: &MomentSeries) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record([
        "t",
        "estimate",
        "se",
        "derivative",
        "derivativeSe",
        "concentration",
    ])
    .map_err(CliError::run)?;
    for i in 0..s.times.len() {
        let conc = s.concentration.get(i).copied();
        w.write_record([
            num(s.times[i]),
            num(s.estimates[i]),
            num(s.standard_errors[i]),
            num(s.derivatives[i]),
            num(s.derivative_errors[i]),
            opt(conc),
        ])
        .map_err(CliError::run)?;
    }
    finish(w)
}

pub fn sweep_csv(s: &SweepResult) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record([
        "lambda",
        "survival",
        "survivalSe",
        "laplace",
        "laplaceSe",
        "meanMass",
        "meanMassSe",
        "secondMoment",
        "secondMomentSe",
    ])
    .map_err(CliError::run)?;
    for k in 0..s.lambdas.len() {
        w.write_record(
            [
                s.lambdas[k],
                s.survival_fraction[k],
                s.survival_se[k],
                s.laplace[k],
                s.laplace_se[k],
                s.mean_mass[k],
                s.mean_mass_se[k],
                s.second_moment[k],
                s.second_moment_se[k],
            ]
            .map(num),
        )
        .map_err(CliError::run)?;
    }
    finish(w)
}

/// A `# t=…,d=…,truncationError=…` line, then `x1..xd,probability` rows.
pub fn kernel_csv(k: &TransitionKernel) -> Result<Vec<u8>> {
    let d = k.probabilities.dim();
    let mut out = format!(
        "# t={},d={},truncationError={}\n",
        num(k.time),
        d,
        num(k.truncation_error)
    )
    .into_bytes();
    let mut w = writer();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("probability".into());
    w.write_record(&header).map_err(CliError::run)?;
    for (x, p) in k.probabilities.iter() {
        let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        row.push(num(p));
        w.write_record(&row).map_err(CliError::run)?;
    }
    out.extend(finish(w)?);
    Ok(out)
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_f64(path: &Path, line: u64, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| CliError::config(format!("{}:{line}: not a number: {s:?}", path.display())))
}

/// Input of `fit` and `odeclass`.
#[derive(Debug, Clone)]
pub enum SeriesInput {
    Trajectories(Vec<MassTrajectory>),
    /// Two columns `t, f`.
    Values {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Reads a trajectory CSV (detected by a `replicaId` column) or a `t,f` CSV.
pub fn read_series_csv(path: &Path) -> Result<SeriesInput> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    if let Some(id_col) = col("replicaId") {
        let t_col = col("t").ok_or_else(|| CliError::config("trajectory CSV needs a t column"))?;
        let m_col =
            col("mass").ok_or_else(|| CliError::config("trajectory CSV needs a mass column"))?;
        let l_col = col("lambda");
        let q_col = col("qv");
        let mut by_id: BTreeMap<u64, MassTrajectory> = BTreeMap::new();
        for (n, rec) in rdr.records().enumerate() {
            let line = n as u64 + 2;
            let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let id: u64 = rec[id_col].parse().map_err(|_| {
                CliError::config(format!("{}:{line}: bad replicaId", path.display()))
            })?;
            let lambda = match l_col {
                Some(c) => parse_f64(path, line, &rec[c])?,
                None => f64::NAN,
            };
            let tr = by_id.entry(id).or_insert_with(|| MassTrajectory {
                replica_id: id,
                seed: 0,
                lambda,
                times: Vec::new(),
                mass: Vec::new(),
                qv: Vec::new(),
                l2_integral: Vec::new(),
                concentration: Vec::new(),
                clamp_count: 0,
                site_steps: 0,
                boundary_ratio: 0.0,
                boundary_warning: false,
                frozen_at: None,
                aborted: None,
            });
            tr.times.push(parse_f64(path, line, &rec[t_col])?);
            tr.mass.push(parse_f64(path, line, &rec[m_col])?);
            tr.qv.push(match q_col {
                Some(c) => parse_f64(path, line, &rec[c])?,
                None => 0.0,
            });
        }
        if by_id.is_empty() {
            return Err(CliError::config(format!("{}: no rows", path.display())));
        }
        return Ok(SeriesInput::Trajectories(by_id.into_values().collect()));
    }
    if headers.len() < 2 {
        return Err(CliError::config(format!(
            "{}: expected columns t,f",
            path.display()
        )));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (n, rec) in rdr.records().enumerate() {
        let line = n as u64 + 2;
        let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        times.push(parse_f64(path, line, &rec[0])?);
        values.push(parse_f64(path, line, &rec[1])?);
    }
    Ok(SeriesInput::Values { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: u64) -> MassTrajectory {
        MassTrajectory {
            replica_id: id,
            seed: 3,
            lambda: 1.5,
            times: vec![0.0, 0.5, 1.0],
            mass: vec![1.0, 0.75 + id as f64, 0.1],
            qv: vec![0.0, 0.2, 0.3],
            l2_integral: vec![0.0, 0.1, 0.2],
            concentration: vec![1.0, 0.5, 0.25],
            clamp_count: 0,
            site_steps: 10,
            boundary_ratio: 0.0,
            boundary_warning: false,
            frozen_at: None,
            aborted: None,
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("t.csv");
        let trajs = vec![traj(0), traj(1)];
        std::fs::write(&path, trajectories_csv("lattice", &trajs).unwrap()).unwrap();
        match read_series_csv(&path).unwrap() {
            SeriesInput::Trajectories(back) => {
                assert_eq!(back.len(), 2);
                assert_eq!(back[1].mass, trajs[1].mass);
                assert_eq!(back[0].times, trajs[0].times);
                assert_eq!(back[0].lambda, 1.5);
            }
            _ => panic!("expected trajectories"),
        }
    }

    #[test]
    fn two_column_series() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("s.csv");
        std::fs::write(&path, "# comment\nt,f\n1,0.5\n2, 0.25\n").unwrap();
        match read_series_csv(&path).unwrap() {
            SeriesInput::Values { times, values } => {
                assert_eq!(times, vec![1.0, 2.0]);
                assert_eq!(values, vec![0.5, 0.25]);
            }
            _ => panic!("expected values"),
        }
        std::fs::write(&path, "t,f\n1,abc\n").unwrap();
        assert_eq!(read_series_csv(&path).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn kernel_header() {
        let k = pamsim_core::kernel::transition_kernel(
            &pamsim_core::model::builtin_laplacian(1),
            1.0,
            3,
        );
        let text = String::from_utf8(kernel_csv(&k).unwrap()).unwrap();
        let mut lines = text.lines();
        assert!(lines
            .next()
            .unwrap()
            .starts_with("# t=1,d=1,truncationError="));
        assert_eq!(lines.next().unwrap(), "x1,probability");
        assert_eq!(text.lines().count(), 2 + 7);
    }

    #[test]
    fn number_format_round_trips() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(9.461018111005255e-15), "9.461018111005255e-15");
        assert_eq!(num(0.0), "0");
        for x in [1e-300, 3.0e-5, 0.1 + 0.2, 123456.789, 2.5e20, -7.25e-9] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
