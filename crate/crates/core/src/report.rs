//! Deterministic JSON and CSV emission: sorted keys, every float written
//! with 17 significant digits so that parsing restores the exact bits.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::lab::envelope::RatioReport;

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty printer that writes floats in `{:.16e}` form.
struct ExactFloats<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident $(, $arg:ident: $ty:ty)*);* $(;)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(writer $(, $arg)*)
        })*
    };
}

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    delegate! {
        begin_array;
        end_array;
        begin_array_value, first: bool;
        end_array_value;
        begin_object;
        end_object;
        begin_object_key, first: bool;
        end_object_value;
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }
}

/// Goes through `serde_json::Value` so that object keys come out sorted.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats(PrettyFormatter::with_indent(b"  ")));
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub const CSV_HEADER: [&str; 5] = ["sample_id", "rank", "lhs", "rhs", "ratio"];

/// One row per kept sample.
pub fn write_ratio_csv<W: Write>(writer: W, report: &RatioReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(CSV_HEADER)?;
    for s in &report.samples {
        csv.write_record([
            s.sample_id.to_string(),
            s.rank.to_string(),
            format_float(s.lhs),
            format_float(s.rhs),
            format_float(s.ratio),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_ratio_csv_file(path: &Path, report: &RatioReport) -> Result<()> {
    write_ratio_csv(BufWriter::new(File::create(path)?), report)
}
