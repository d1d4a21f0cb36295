//! Run directories and number formatting for reports.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::format_f64;

/// Pretty JSON with every float written to 17 significant digits.
struct SigFigFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SigFigFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(format_f64(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes utf-8"))
}

/// `<outdir>/<command>-<timestamp>/`, with a numeric suffix if that exists already.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(outdir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(outdir)?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = format!("{command}-{stamp}");
        for n in 0..1000 {
            let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
            let path = outdir.join(name);
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        outputs: Vec::new(),
                    })
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::Resource(format!("cannot allocate a run directory under `{}`", outdir.display())))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Opens `name` for writing and records it in the output list.
    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.path.join(name))?))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut f = self.file(name)?;
        f.write_all(to_json_string(value)?.as_bytes())?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}
