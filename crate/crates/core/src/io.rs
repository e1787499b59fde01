//! CSV and binary writers for profiles, phase-space arrays and traces.
//!
//! Floats are written with 17 significant digits so identical inputs give
//! byte-identical files.

use std::io::{Read, Write};

use crate::local::LocalProfile;
use crate::phase_space::{QuasiDistribution, QuasiKind};
use crate::{Error, GridSpec, RealProfile, Result};

/// Leading bytes of the binary phase-space layout.
pub const MAGIC: &[u8; 8] = b"LOCMOMQD";

/// Fixed-width scientific notation; NaN for masked-out values.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Long-format CSV with columns `q,value,mask,definition,order`, one block
/// per profile in the given order.
pub fn write_profiles_csv<W: Write>(mut w: W, profiles: &[LocalProfile]) -> Result<()> {
    writeln!(w, "q,value,mask,definition,order")?;
    for lp in profiles {
        let grid = lp.profile.grid();
        for (j, (&v, &m)) in lp.values().iter().zip(lp.mask()).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                format_float(grid.q(j)),
                format_float(v),
                u8::from(m),
                lp.definition,
                lp.order
            )?;
        }
    }
    Ok(())
}

/// Dense CSV with columns `q,p,value`, rows ordered by `q` then ascending `p`.
pub fn write_distribution_csv<W: Write>(mut w: W, f: &QuasiDistribution) -> Result<()> {
    writeln!(w, "q,p,value")?;
    let grid = f.grid();
    let p: Vec<String> = f.momenta().iter().map(|&x| format_float(x)).collect();
    for i in 0..grid.n() {
        let q = format_float(grid.q(i));
        for (pk, v) in p.iter().zip(f.row(i)) {
            writeln!(w, "{q},{pk},{}", format_float(*v))?;
        }
    }
    Ok(())
}

/// Little-endian layout: magic, `kind` and `n` as u64, then `dq, dp, ħ,
/// q_min, q_max, m, p_min` as f64, then the `n×n` values row-major (`q` rows).
pub fn write_distribution_binary<W: Write>(mut w: W, f: &QuasiDistribution) -> Result<()> {
    let grid = f.grid();
    w.write_all(MAGIC)?;
    w.write_all(&f.kind().code().to_le_bytes())?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    let p_min = f.momenta().first().copied().unwrap_or(0.0);
    for x in [
        grid.dq(),
        f.dp(),
        grid.hbar(),
        grid.q_min(),
        grid.q_max(),
        grid.mass(),
        p_min,
    ] {
        w.write_all(&x.to_le_bytes())?;
    }
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Inverse of [`write_distribution_binary`].
pub fn read_distribution_binary<R: Read>(mut r: R) -> Result<QuasiDistribution> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::input("binary: not a phase-space file"));
    }
    let kind = QuasiKind::from_code(read_u64(&mut r)?).ok_or_else(|| Error::input("binary: unknown kind"))?;
    let n = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::input("binary: size overflow"))?;
    let [dq, dp, hbar, q_min, q_max, mass, p_min] = {
        let mut h = [0.0; 7];
        for x in h.iter_mut() {
            *x = read_f64(&mut r)?;
        }
        h
    };
    let grid = GridSpec::new(n, q_min, q_max, hbar, mass)?;
    if grid.dq().to_bits() != dq.to_bits() {
        return Err(Error::input("binary: header spacing is inconsistent with the window"));
    }
    let first = (p_min / dp).round() as i64;
    let p = (0..n as i64).map(|k| (first + k) as f64 * dp).collect();
    let mut values = vec![0.0; n * n];
    for v in values.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    Ok(QuasiDistribution::from_parts(kind, grid, p, dp, values))
}

/// Metadata recorded on the first line of every trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub potential: String,
    pub dt: f64,
    pub hbar: f64,
    pub mass: f64,
}

/// `# potential=… dt=… hbar=… mass=…`, then columns `t,q,value,mask`.
pub fn write_trace_csv<W: Write>(
    mut w: W,
    header: &TraceHeader,
    times: &[f64],
    profiles: &[RealProfile],
) -> Result<()> {
    if times.len() != profiles.len() {
        return Err(Error::input("trace: one profile per time required"));
    }
    writeln!(
        w,
        "# potential={} dt={} hbar={} mass={}",
        header.potential,
        format_float(header.dt),
        format_float(header.hbar),
        format_float(header.mass)
    )?;
    writeln!(w, "t,q,value,mask")?;
    for (t, profile) in times.iter().zip(profiles) {
        let t = format_float(*t);
        for (j, (&v, &m)) in profile.values().iter().zip(profile.mask()).enumerate() {
            writeln!(
                w,
                "{t},{},{},{}",
                format_float(profile.grid().q(j)),
                format_float(v),
                u8::from(m)
            )?;
        }
    }
    Ok(())
}
