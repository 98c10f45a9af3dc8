//! Bit-stable writers. Every float is printed as `{:.16e}` (17 significant
//! digits, exact on reload); non-finite floats become `null` in JSON.

use std::io;
use std::path::Path;

use mixeig_core::{Field, Grid};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

/// 17 significant digits in scientific notation.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Fixed<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with two-space indent and a final newline.
pub fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser).expect("serializing into memory does not fail");
    out.push(b'\n');
    out
}

/// Field as CSV: header `x,u` or `x,y,u`, one node per row, LF endings.
pub fn field_csv(grid: &Grid, u: &Field) -> Vec<u8> {
    let mut out = String::from(if grid.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (x, v) in grid.nodes().iter().zip(u.iter()) {
        for c in &x[..grid.dim()] {
            out.push_str(&float(*c));
            out.push(',');
        }
        out.push_str(&float(*v));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
