//! Report formats: fixed-precision CSV and JSON, atomic writes, checksums and
//! little-endian field snapshots.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use blochscatter_core::fields::{GridFunction, TorusGrid};
use num_complex::Complex64;
use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// 17 significant digits; non-finite values are spelled `inf`, `-inf`, `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number printed with `fmt_f64`; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(fmt_f64(x).parse::<Number>().expect("formatted float is a JSON number"))
    } else {
        Value::String(fmt_f64(x))
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::U(x as u64)
    }
}

pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "row width");
        let parts: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(x) => fmt_f64(x),
                Cell::I(x) => x.to_string(),
                Cell::U(x) => x.to_string(),
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `u64 N`, `f64 Λ`, `f64 t`, then `N` pairs `(re, im)`, all little-endian.
pub fn snapshot_bytes(f: &GridFunction, t: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * f.len());
    out.extend_from_slice(&(f.len() as u64).to_le_bytes());
    out.extend_from_slice(&f.grid().length().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for z in f.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub length: f64,
    pub time: f64,
    pub values: Vec<Complex64>,
}

impl Snapshot {
    /// Rebuilds the field on a grid of matching size and length.
    pub fn field(&self, grid: TorusGrid) -> Option<GridFunction> {
        if grid.len() != self.values.len() || grid.length() != self.length {
            return None;
        }
        GridFunction::new(grid, self.values.clone()).ok()
    }
}

pub fn read_snapshot(bytes: &[u8]) -> io::Result<Snapshot> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let word = |i: usize| -> io::Result<[u8; 8]> {
        bytes.get(8 * i..8 * i + 8).and_then(|s| s.try_into().ok()).ok_or_else(|| bad("truncated snapshot"))
    };
    let n = u64::from_le_bytes(word(0)?) as usize;
    if bytes.len() != 24 + 16 * n {
        return Err(bad("snapshot length does not match its header"));
    }
    let length = f64::from_le_bytes(word(1)?);
    let time = f64::from_le_bytes(word(2)?);
    let values = (0..n)
        .map(|i| Ok(Complex64::new(f64::from_le_bytes(word(3 + 2 * i)?), f64::from_le_bytes(word(4 + 2 * i)?))))
        .collect::<io::Result<Vec<_>>>()?;
    Ok(Snapshot { length, time, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        let x = 0.1f64 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        assert_eq!(serde_json::to_string(&num(0.1)).unwrap(), "1.0000000000000001e-1");
        assert_eq!(num(f64::NAN), Value::String("nan".into()));
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b", "c"]);
        c.row(vec![1.5.into(), 3usize.into(), true.into()]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "a,b,c\n1.5000000000000000e0,3,1\n");
    }

    #[test]
    fn snapshot_round_trip() {
        let grid = TorusGrid::new(2.0, 8, 4).unwrap();
        let f = GridFunction::from_fn(grid, |x| Complex64::new(x.sin(), x * x));
        let bytes = snapshot_bytes(&f, -3.25);
        let s = read_snapshot(&bytes).unwrap();
        assert_eq!(s.time, -3.25);
        assert_eq!(s.field(grid).unwrap(), f);
        assert!(read_snapshot(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    proptest::proptest! {
        #[test]
        fn printed_floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            proptest::prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
            let back: f64 = serde_json::from_value(num(x)).unwrap();
            proptest::prop_assert_eq!(back, x);
        }

        #[test]
        fn snapshots_round_trip(vals in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 4), t in -1e3f64..1e3) {
            let grid = TorusGrid::new(1.0, 2, 2).unwrap();
            let f = GridFunction::new(grid, vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let s = read_snapshot(&snapshot_bytes(&f, t)).unwrap();
            proptest::prop_assert_eq!(s.time.to_bits(), t.to_bits());
            proptest::prop_assert_eq!(s.field(grid).unwrap(), f);
        }
    }

    #[test]
    fn checksum_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
