use std::io::{BufRead, Read, Write};

use super::{Geometry, LatticeField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LFLD";

fn header(g: Geometry) -> String {
    match g {
        Geometry::Torus { dimension, side } => format!("torus {dimension} {side}"),
        Geometry::Graph { vertices } => format!("graph {vertices}"),
    }
}

fn parse_header(line: &str) -> Result<Geometry> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("field header: {e}")));
    match parts.as_slice() {
        ["torus", d, s] => Ok(Geometry::Torus { dimension: num(d)?, side: num(s)? }),
        ["graph", n] => Ok(Geometry::Graph { vertices: num(n)? }),
        _ => Err(Error::Parse(format!("field header: {line:?}"))),
    }
}

/// Header line, then one value per line in storage order.
pub fn write_text(f: &LatticeField, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", header(f.geometry()))?;
    for v in f.values() {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

pub fn read_text(r: impl BufRead) -> Result<LatticeField> {
    let mut lines = r.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty field dump".into()))??;
    let geometry = parse_header(&head)?;
    let values = lines
        .map(|l| {
            let l = l?;
            l.trim().parse::<f64>().map_err(|e| Error::Parse(format!("field value {l:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    LatticeField::new(geometry, values)
}

/// Magic, geometry tag and parameters as little-endian `u64`, then `f64` values.
pub fn write_binary(f: &LatticeField, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    let params: [u64; 3] = match f.geometry() {
        Geometry::Torus { dimension, side } => [0, dimension as u64, side as u64],
        Geometry::Graph { vertices } => [1, vertices as u64, 0],
    };
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<LatticeField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a binary field dump".into()));
    }
    let mut word = [0u8; 8];
    let mut params = [0u64; 3];
    for p in params.iter_mut() {
        r.read_exact(&mut word)?;
        *p = u64::from_le_bytes(word);
    }
    let geometry = match params[0] {
        0 => Geometry::Torus { dimension: params[1] as usize, side: params[2] as usize },
        1 => Geometry::Graph { vertices: params[1] as usize },
        t => return Err(Error::Parse(format!("unknown geometry tag {t}"))),
    };
    let mut values = Vec::with_capacity(geometry.len());
    for _ in 0..geometry.len() {
        r.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    LatticeField::new(geometry, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let f = LatticeField::torus_from_fn(2, 3, |x| 0.1 * (x[0] + 2 * x[1] + 4) as f64 + 1e-17).unwrap();
        let mut buf = Vec::new();
        write_text(&f, &mut buf).unwrap();
        assert_eq!(read_text(buf.as_slice()).unwrap(), f);
        let mut bin = Vec::new();
        write_binary(&f, &mut bin).unwrap();
        assert_eq!(bin.len(), 4 + 24 + 8 * 9);
        assert_eq!(read_binary(bin.as_slice()).unwrap(), f);
        let g = LatticeField::delta(Geometry::Graph { vertices: 3 });
        let mut buf = Vec::new();
        write_text(&g, &mut buf).unwrap();
        assert!(buf.starts_with(b"graph 3\n"));
        assert_eq!(read_text(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_text("cube 3\n1.0\n".as_bytes()).is_err());
        assert!(read_binary(&b"XXXX"[..]).is_err());
        assert!(read_text("torus 1 2\n1.0\n-2.0\n".as_bytes()).is_err());
    }
}
