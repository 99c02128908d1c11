//! Raw field files: little-endian f64 arrays, row-major, with a plain-text
//! sidecar header at `<data path>.hdr`:
//!
//! ```text
//! kind = real            # or hermitian
//! n = 2
//! shape = 64 64 1 1
//! ```
//!
//! Hermitian fields store each n × n matrix row-major as interleaved
//! (re, im) pairs. CSV export writes grid coordinates followed by values.

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, HermitianField, ScalarField};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Hermitian,
}

impl FieldKind {
    fn as_str(self) -> &'static str {
        match self {
            FieldKind::Real => "real",
            FieldKind::Hermitian => "hermitian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldHeader {
    pub kind: FieldKind,
    pub n: usize,
    pub shape: Vec<usize>,
}

impl FieldHeader {
    pub fn render(&self) -> String {
        let shape: Vec<String> = self.shape.iter().map(|s| s.to_string()).collect();
        format!("kind = {}\nn = {}\nshape = {}\n", self.kind.as_str(), self.n, shape.join(" "))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Config {
            key: None,
            line: Some(line),
            message,
        };
        let (mut kind, mut n, mut shape) = (None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "kind" => {
                    kind = Some(match value {
                        "real" => FieldKind::Real,
                        "hermitian" => FieldKind::Hermitian,
                        other => return Err(bad(i + 1, format!("unknown kind `{other}`"))),
                    })
                }
                "n" => n = Some(value.parse().map_err(|_| bad(i + 1, format!("bad n `{value}`")))?),
                "shape" => {
                    shape = Some(
                        value
                            .split_whitespace()
                            .map(|s| s.parse())
                            .collect::<std::result::Result<Vec<usize>, _>>()
                            .map_err(|_| bad(i + 1, format!("bad shape `{value}`")))?,
                    )
                }
                other => return Err(bad(i + 1, format!("unknown header key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Config {
            key: Some(k.into()),
            line: None,
            message: "missing from field header".into(),
        };
        Ok(Self {
            kind: kind.ok_or_else(|| missing("kind"))?,
            n: n.ok_or_else(|| missing("n"))?,
            shape: shape.ok_or_else(|| missing("shape"))?,
        })
    }

    fn check(&self, geom: &GridGeometry, kind: FieldKind) -> Result<()> {
        if self.kind != kind || self.n != geom.n() || self.shape != geom.shape() {
            return Err(Error::InvalidField(format!(
                "header {:?} does not match a {} field on n = {}, shape {:?}",
                self,
                kind.as_str(),
                geom.n(),
                geom.shape()
            )));
        }
        Ok(())
    }
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn encode(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| v.to_le_bytes()).collect()
}

fn decode(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::InvalidField(format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn header_for(geom: &GridGeometry, kind: FieldKind) -> FieldHeader {
    FieldHeader {
        kind,
        n: geom.n(),
        shape: geom.shape().to_vec(),
    }
}

pub fn write_scalar(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, encode(field.values().iter().copied()))?;
    fs::write(sidecar_path(path), header_for(field.geometry(), FieldKind::Real).render())?;
    Ok(())
}

pub fn write_hermitian(path: &Path, field: &HermitianField) -> Result<()> {
    fs::write(path, encode(field.raw().iter().flat_map(|z| [z.re, z.im])))?;
    fs::write(sidecar_path(path), header_for(field.geometry(), FieldKind::Hermitian).render())?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<FieldHeader> {
    FieldHeader::parse(&fs::read_to_string(sidecar_path(path))?)
}

pub fn read_scalar(path: &Path, geom: &Arc<GridGeometry>) -> Result<ScalarField> {
    read_header(path)?.check(geom, FieldKind::Real)?;
    ScalarField::new(geom.clone(), decode(&fs::read(path)?)?)
}

pub fn read_hermitian(path: &Path, geom: &Arc<GridGeometry>) -> Result<HermitianField> {
    read_header(path)?.check(geom, FieldKind::Hermitian)?;
    let vals = decode(&fs::read(path)?)?;
    let data = vals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    HermitianField::from_raw(geom.clone(), data)
}

fn coord_header(geom: &GridGeometry) -> String {
    (0..geom.real_dims())
        .map(|c| format!("{}{}", if c.is_multiple_of(2) { 'x' } else { 'y' }, c / 2 + 1))
        .collect::<Vec<_>>()
        .join(",")
}

fn coords(geom: &GridGeometry, p: usize) -> String {
    geom.point(p)
        .iter()
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn scalar_csv(field: &ScalarField) -> String {
    let g = field.geometry();
    let mut s = format!("{},value\n", coord_header(g));
    for (p, v) in field.values().iter().enumerate() {
        let _ = writeln!(s, "{},{v:.17e}", coords(g, p));
    }
    s
}

pub fn hermitian_csv(field: &HermitianField) -> String {
    let g = field.geometry();
    let n = g.n();
    let mut cols = vec![coord_header(g)];
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("m{}{}_re,m{}{}_im", i + 1, j + 1, i + 1, j + 1));
        }
    }
    let mut s = cols.join(",");
    s.push('\n');
    for p in 0..field.len() {
        let m = field.matrix(p);
        let entries: Vec<String> = m.as_slice().iter().map(|z| format!("{:.17e},{:.17e}", z.re, z.im)).collect();
        let _ = writeln!(s, "{},{}", coords(g, p), entries.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    #[test]
    fn header_round_trip() {
        let h = FieldHeader {
            kind: FieldKind::Hermitian,
            n: 2,
            shape: vec![64, 64, 1, 1],
        };
        assert_eq!(FieldHeader::parse(&h.render()).unwrap(), h);
        assert!(FieldHeader::parse("kind = real\nn = 1\n").is_err());
        assert!(FieldHeader::parse("kind = complex\nn = 1\nshape = 4 1\n").is_err());
    }

    #[test]
    fn raw_layout_is_little_endian_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let g = Arc::new(GridGeometry::new(1, vec![4, 1]).unwrap());
        let f = ScalarField::new(g.clone(), vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        let path = dir.path().join("u.f64");
        write_scalar(&path, &f).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[24..32], &4.5f64.to_le_bytes());
        assert_eq!(read_scalar(&path, &g).unwrap().values(), f.values());

        let m = CMatrix::from_rows(1, vec![Complex64::new(2.0, 0.0)]);
        let hf = HermitianField::constant(g.clone(), &m).unwrap();
        let hp = dir.path().join("chi.c128");
        write_hermitian(&hp, &hf).unwrap();
        let bytes = fs::read(&hp).unwrap();
        assert_eq!(bytes.len(), 4 * 16);
        assert_eq!(read_hermitian(&hp, &g).unwrap().raw(), hf.raw());

        let other = Arc::new(GridGeometry::new(1, vec![8, 1]).unwrap());
        assert!(read_scalar(&path, &other).is_err());
        assert!(read_scalar(&hp, &g).is_err());
    }

    #[test]
    fn csv_has_coordinates() {
        let g = Arc::new(GridGeometry::new(1, vec![4, 1]).unwrap());
        let f = ScalarField::constant(g, 1.0);
        let csv = scalar_csv(&f);
        assert!(csv.starts_with("x1,y1,value\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
