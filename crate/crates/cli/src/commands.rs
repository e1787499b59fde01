//! The four subcommands. Each writes its data product and returns a JSON
//! report for stdout (or `None` when stdout already carries the data).

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use locmom_core::classical::wigner_as_classical;
use locmom_core::dynamics::{convergence_study, Potential};
use locmom_core::io::{
    write_distribution_binary, write_distribution_csv, write_profiles_csv, write_trace_csv, TraceHeader,
};
use locmom_core::local::{local_profile, variance_decomposition, LocalProfile};
use locmom_core::phase_space::{margenau_hill_transform, wigner_transform, QuasiDistribution, QuasiKind};
use locmom_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, Resolved};

/// Tolerance on `|components − direct variance|` before a run is rejected.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-8;

/// Largest marginal error accepted for an exported distribution.
pub const MARGINAL_TOLERANCE: f64 = 1e-8;

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::input(format!("out: cannot create {}: {e}", path.display())))
}

fn write_json(w: &mut dyn Write, value: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn profile_json(lp: &LocalProfile) -> Value {
    json!({
        "definition": lp.definition.to_string(),
        "order": lp.order.to_string(),
        "q": lp.profile.grid().positions(),
        // NaN (masked out) serializes as null.
        "value": lp.values(),
        "mask": lp.mask(),
    })
}

pub fn moments(cfg: &Resolved) -> Result<Option<Value>> {
    let psi = cfg.state()?;
    let a = cfg.observable.spec(&cfg.grid);
    let profiles = cfg
        .definitions
        .iter()
        .map(|&d| local_profile(&psi, &a, d, cfg.order))
        .collect::<Result<Vec<_>>>()?;
    let mut w = sink(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => write_profiles_csv(&mut w, &profiles)?,
        Format::Json => write_json(
            &mut w,
            &json!({
                "config": cfg.canonical(),
                "observable": cfg.observable.to_string(),
                "profiles": profiles.iter().map(profile_json).collect::<Vec<_>>(),
            }),
        )?,
    }
    w.flush()?;
    Ok(None)
}

#[derive(Debug, Serialize)]
struct DecompositionRecord {
    definition: String,
    avg_local_variance: f64,
    variance_of_local_avg: f64,
    total: f64,
    direct_total: f64,
    residual: f64,
}

pub fn decompose(cfg: &Resolved) -> Result<Option<Value>> {
    let psi = cfg.state()?;
    let a = cfg.observable.spec(&cfg.grid);
    let records = cfg
        .definitions
        .iter()
        .map(|&d| {
            variance_decomposition(&psi, &a, d).map(|v| DecompositionRecord {
                definition: d.to_string(),
                avg_local_variance: v.avg_local_variance,
                variance_of_local_avg: v.variance_of_local_avg,
                total: v.sum(),
                direct_total: v.total,
                residual: v.residual(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = sink(cfg.out.as_deref())?;
    match cfg.format {
        Format::Json => write_json(&mut w, &serde_json::to_value(&records).map_err(io::Error::from)?)?,
        Format::Csv => {
            use locmom_core::io::format_float as f;
            writeln!(
                w,
                "definition,avg_local_variance,variance_of_local_avg,total,direct_total,residual"
            )?;
            for r in &records {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.definition,
                    f(r.avg_local_variance),
                    f(r.variance_of_local_avg),
                    f(r.total),
                    f(r.direct_total),
                    f(r.residual)
                )?;
            }
        }
    }
    w.flush()?;
    if let Some(r) = records
        .iter()
        .find(|r| r.residual.is_nan() || r.residual >= DECOMPOSITION_TOLERANCE)
    {
        return Err(Error::SelfCheck(format!(
            "decomposition for {} misses the direct variance by {:.3e}",
            r.definition, r.residual
        )));
    }
    Ok(None)
}

fn distribution_json(f: &QuasiDistribution) -> Value {
    let rows: Vec<&[f64]> = (0..f.grid().n()).map(|i| f.row(i)).collect();
    json!({ "kind": f.kind().to_string(), "q": f.grid().positions(), "p": f.momenta(), "values": rows })
}

pub fn distribution(cfg: &Resolved) -> Result<Option<Value>> {
    let out = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::input("out: the distribution command needs an output file"))?;
    let psi = cfg.state()?;
    let dist = match cfg.kind {
        QuasiKind::WeylWigner => wigner_transform(&psi)?,
        QuasiKind::MargenauHill => margenau_hill_transform(&psi),
        QuasiKind::Classical => wigner_as_classical(&psi, &cfg.recipe)?.to_distribution(),
    };
    let (q_err, p_err) = dist.check_marginals(&psi, MARGINAL_TOLERANCE)?;
    let mut w = BufWriter::new(create(out)?);
    if cfg.binary {
        write_distribution_binary(&mut w, &dist)?;
    } else {
        match cfg.format {
            Format::Csv => write_distribution_csv(&mut w, &dist)?,
            Format::Json => write_json(&mut w, &distribution_json(&dist))?,
        }
    }
    w.flush()?;
    let grid = dist.grid();
    Ok(Some(json!({
        "config": cfg.canonical(),
        "kind": dist.kind().to_string(),
        "n": grid.n(),
        "dq": grid.dq(),
        "dp": dist.dp(),
        "hbar": grid.hbar(),
        "total": dist.total(),
        "min": dist.min_cell(),
        "max": dist.max_cell(),
        "marginal_error_q": q_err,
        "marginal_error_p": p_err,
    })))
}

pub fn evolve(cfg: &Resolved) -> Result<Option<Value>> {
    let dir = cfg
        .out
        .as_deref()
        .ok_or_else(|| Error::input("out: the evolve command needs an output directory"))?;
    let psi = cfg.state()?;
    let potential = Potential::new(cfg.potential, &cfg.grid);
    let (trace, _, residuals) = convergence_study(&psi, &potential, &cfg.propagation)?;

    fs::create_dir_all(dir).map_err(|e| Error::input(format!("out: cannot create {}: {e}", dir.display())))?;
    let header = TraceHeader {
        potential: potential.label(),
        dt: cfg.propagation.dt,
        hbar: cfg.grid.hbar(),
        mass: cfg.grid.mass(),
    };
    let mut w = BufWriter::new(create(&dir.join("density.csv"))?);
    write_trace_csv(&mut w, &header, trace.times(), &trace.density_profiles())?;
    w.flush()?;
    let mut w = BufWriter::new(create(&dir.join("mean_momentum.csv"))?);
    write_trace_csv(&mut w, &header, trace.times(), &trace.mean_momentum_profiles()?)?;
    w.flush()?;

    let positions = trace.mean_positions();
    let energies = trace.energies();
    let (start, end) = (positions[0], *positions.last().expect("trace is never empty"));
    let norm_drift = trace
        .snapshots()
        .iter()
        .map(|s| (s.norm_sq() - 1.0).abs())
        .fold(0.0, f64::max);
    let energy_drift = energies
        .iter()
        .map(|e| (e - energies[0]).abs() / energies[0].abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let report = json!({
        "config": cfg.canonical(),
        "potential": potential.label(),
        "dt": cfg.propagation.dt,
        "steps": cfg.propagation.steps,
        "stride": cfg.propagation.snapshot_stride,
        "final_time": trace.times().last(),
        "residuals": residuals,
        "mean_position_start": start,
        "mean_position_end": end,
        "sign_flip": start * end < 0.0,
        "norm_drift": norm_drift,
        "relative_energy_drift": energy_drift,
    });
    let mut w = BufWriter::new(create(&dir.join("report.json"))?);
    write_json(&mut w, &report)?;
    w.flush()?;
    Ok(Some(report))
}
