//! KMSF field files: a five-line ASCII header followed by little-endian f64
//! payload, component-major and z-fastest.
//!
//! ```text
//! KMSF1
//! grid nx ny nz
//! domain x0 x1 y0 y1 z0 z1
//! components m periodic b
//! data
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Field, GridGeometry};
use crate::error::{KmsError, Result};

const MAGIC: &str = "KMSF1";

fn malformed(msg: impl Into<String>) -> KmsError {
    KmsError::MalformedHeader(msg.into())
}

pub fn write_field_to(field: &Field, mut out: impl Write) -> Result<()> {
    let m = field.ncomp();
    if ![1, 3, 9].contains(&m) {
        return Err(KmsError::InvalidArgument(format!(
            "KMSF stores 1, 3 or 9 components, field has {m}"
        )));
    }
    let g = field.geometry();
    let [nx, ny, nz] = g.dims();
    let (lo, hi) = (g.lo(), g.hi());
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("grid {nx} {ny} {nz}\n"));
    header.push_str("domain");
    for d in 0..3 {
        header.push_str(&format!(" {:.16e} {:.16e}", lo[d], hi[d]));
    }
    header.push('\n');
    header.push_str(&format!(
        "components {m} periodic {}\n",
        u8::from(g.is_periodic())
    ));
    header.push_str("data\n");
    out.write_all(header.as_bytes())?;
    let mut bytes = Vec::with_capacity(8 * m * g.len());
    for c in field.comps() {
        for v in c {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn write_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field_to(field, &mut file)?;
    file.flush()?;
    Ok(())
}

fn header_line(reader: &mut impl BufRead, what: &str) -> Result<String> {
    let mut line = String::new();
    let n = reader.read_line(&mut line)?;
    if n == 0 || !line.ends_with('\n') {
        return Err(malformed(format!("missing {what} line")));
    }
    Ok(line.trim_end_matches('\n').to_owned())
}

fn fields_after<'a>(line: &'a str, key: &str, count: usize) -> Result<Vec<&'a str>> {
    let mut parts = line.split(' ');
    if parts.next() != Some(key) {
        return Err(malformed(format!("expected '{key}' line, got '{line}'")));
    }
    let rest: Vec<&str> = parts.collect();
    if rest.len() != count {
        return Err(malformed(format!("'{key}' line needs {count} values, got '{line}'")));
    }
    Ok(rest)
}

pub fn read_field_from(input: impl Read) -> Result<Field> {
    let mut reader = BufReader::new(input);
    if header_line(&mut reader, "magic")? != MAGIC {
        return Err(malformed("bad magic, expected KMSF1"));
    }
    let grid = header_line(&mut reader, "grid")?;
    let dims: Vec<usize> = fields_after(&grid, "grid", 3)?
        .iter()
        .map(|s| s.parse().map_err(|_| malformed(format!("bad grid size '{s}'"))))
        .collect::<Result<_>>()?;
    let domain = header_line(&mut reader, "domain")?;
    let bounds: Vec<f64> = fields_after(&domain, "domain", 6)?
        .iter()
        .map(|s| s.parse().map_err(|_| malformed(format!("bad domain bound '{s}'"))))
        .collect::<Result<_>>()?;
    let comp_line = header_line(&mut reader, "components")?;
    let mut parts = comp_line.split(' ');
    let (m, periodic) = match (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
    {
        (Some("components"), Some(m), Some("periodic"), Some(b), None) => {
            let m: usize = m.parse().map_err(|_| malformed("bad component count"))?;
            let periodic = match b {
                "0" => false,
                "1" => true,
                _ => return Err(malformed("periodic flag must be 0 or 1")),
            };
            (m, periodic)
        }
        _ => return Err(malformed(format!("bad components line '{comp_line}'"))),
    };
    if ![1, 3, 9].contains(&m) {
        return Err(malformed(format!("component count {m} not in {{1, 3, 9}}")));
    }
    if header_line(&mut reader, "data")? != "data" {
        return Err(malformed("expected 'data' line"));
    }
    let geometry = GridGeometry::new(
        [dims[0], dims[1], dims[2]],
        [bounds[0], bounds[2], bounds[4]],
        [bounds[1], bounds[3], bounds[5]],
        periodic,
    )
    .map_err(|e| malformed(e.to_string()))?;

    let n = geometry.len();
    let expected = 8 * m * n;
    let mut payload = Vec::with_capacity(expected);
    reader.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(KmsError::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    let mut comps = vec![Vec::with_capacity(n); m];
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !v.is_finite() {
            return Err(KmsError::NonFinite {
                component: i / n,
                node: i % n,
            });
        }
        comps[i / n].push(v);
    }
    Ok(Field::from_parts(geometry, comps))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    read_field_from(std::fs::File::open(path)?)
}
