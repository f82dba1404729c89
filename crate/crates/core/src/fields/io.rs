//! Plain-text field formats.
//!
//! Particles: CSV with header `r,z,q,vol`. Grids: JSON object
//! `{"type":"grid","r_max":..,"z_min":..,"z_max":..,"h":..,"values":[..]}`
//! with values row-major (rows along `z`). Floats are written with 17
//! significant digits so that a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{GridField, Lattice, MeridianPoint, ParticleField, RelativeVorticityField, VortexParticle};
use crate::error::{Error, Result};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_number(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::Format(format!("cannot write non-finite value {x} as JSON")));
    }
    Ok(fmt_f64(x))
}

pub fn write_particles_csv<W: Write>(field: &ParticleField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "z", "q", "vol"])?;
    for p in &field.particles {
        w.write_record([fmt_f64(p.pos.r), fmt_f64(p.pos.z), fmt_f64(p.q), fmt_f64(p.vol)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ParticleRow {
    r: f64,
    z: f64,
    q: f64,
    vol: f64,
}

pub fn read_particles_csv<R: Read>(input: R) -> Result<ParticleField> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["r", "z", "q", "vol"] {
        return Err(Error::Format(format!("expected header r,z,q,vol, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: ParticleRow = row?;
        out.push(VortexParticle::new(MeridianPoint::new(row.r, row.z)?, row.q, row.vol)?);
    }
    Ok(ParticleField::new(out))
}

pub fn grid_to_json(grid: &GridField) -> Result<String> {
    let l = &grid.lattice;
    let mut s = String::with_capacity(32 * grid.values.len() + 128);
    write!(
        s,
        "{{\"type\":\"grid\",\"r_max\":{},\"z_min\":{},\"z_max\":{},\"h\":{},\"values\":[",
        json_number(l.r_max)?,
        json_number(l.z_min)?,
        json_number(l.z_max)?,
        json_number(l.h)?
    )
    .expect("string write");
    for (k, &v) in grid.values.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        s.push_str(&json_number(v)?);
    }
    s.push_str("]}");
    Ok(s)
}

#[derive(Deserialize)]
struct GridDoc {
    #[serde(rename = "type")]
    kind: String,
    r_max: f64,
    z_min: f64,
    z_max: f64,
    h: f64,
    values: Vec<f64>,
}

pub fn grid_from_json(text: &str) -> Result<GridField> {
    let doc: GridDoc = serde_json::from_str(text)?;
    if doc.kind != "grid" {
        return Err(Error::Format(format!("expected type \"grid\", got \"{}\"", doc.kind)));
    }
    let lattice = Lattice::new(doc.r_max, doc.z_min, doc.z_max, doc.h)?;
    GridField::new(lattice, doc.values)
}

/// Write a field to `path`: grids as JSON, particles as CSV.
pub fn save_field(field: &RelativeVorticityField, path: &Path) -> Result<()> {
    match field {
        RelativeVorticityField::Grid(g) => fs::write(path, grid_to_json(g)?)?,
        RelativeVorticityField::Particles(p) => write_particles_csv(p, fs::File::create(path)?)?,
    }
    Ok(())
}

/// Read a field written by [`save_field`]; the format is sniffed from the
/// first non-blank character.
pub fn load_field(path: &Path) -> Result<RelativeVorticityField> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(grid_from_json(&text)?.into())
    } else {
        Ok(read_particles_csv(text.as_bytes())?.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn particle_round_trip_is_exact() {
        let ps = ParticleField::new(vec![
            VortexParticle::new(MeridianPoint::new(0.1, -0.3).unwrap(), 1.0 / 3.0, 2e-5).unwrap(),
            VortexParticle::new(MeridianPoint::new(1.7, 2.0).unwrap(), -std::f64::consts::E, 0.125).unwrap(),
        ]);
        let mut buf = Vec::new();
        write_particles_csv(&ps, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("r,z,q,vol\n"));
        assert_eq!(read_particles_csv(buf.as_slice()).unwrap(), ps);
    }

    #[test]
    fn grid_round_trip_is_exact() {
        let l = Lattice::new(1.0, -0.5, 0.5, 0.25).unwrap();
        let g = GridField::from_fn(l, |r, z| (r * 7.1).sin() + z / 3.0);
        let text = grid_to_json(&g).unwrap();
        assert!(text.starts_with("{\"type\":\"grid\""));
        assert_eq!(grid_from_json(&text).unwrap(), g);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(read_particles_csv("a,b,c,d\n1,2,3,4\n".as_bytes()).is_err());
        assert!(read_particles_csv("r,z,q,vol\n1,2,3,-4\n".as_bytes()).is_err());
        assert!(grid_from_json("{\"type\":\"mesh\",\"r_max\":1,\"z_min\":0,\"z_max\":1,\"h\":0.5,\"values\":[0,0,0,0]}").is_err());
        assert!(grid_from_json("{\"type\":\"grid\",\"r_max\":1,\"z_min\":0,\"z_max\":1,\"h\":0.5,\"values\":[0]}").is_err());
        let l = Lattice::new(1.0, 0.0, 1.0, 0.5).unwrap();
        assert!(grid_to_json(&GridField::new(l, vec![0.0, f64::NAN, 0.0, 0.0]).unwrap()).is_err());
    }
}
