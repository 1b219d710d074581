//! JSON artifacts: floats at 17 significant digits, schema-tagged documents,
//! timestamped run directories.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

/// Pretty JSON with every float written as `d.dddddddddddddddde±x`, enough
/// digits to round-trip any f64.
struct SigFigFormatter {
    pretty: PrettyFormatter<'static>,
}

impl Formatter for SigFigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

pub fn to_json_writer<W: Write, T: Serialize + ?Sized>(out: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(
        out,
        SigFigFormatter {
            pretty: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    to_json_writer(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Parses a document whose top-level `schema` field must equal `expected`.
pub fn from_json_str<T: DeserializeOwned>(text: &str, expected: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if found != expected {
        return Err(Error::Schema {
            expected: expected.into(),
            found: found.into(),
        });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, expected: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?;
    from_json_str(&text, expected)
}

/// Creates `root/<UTC timestamp>/`, suffixing `-1`, `-2`, ... on collision.
pub fn run_dir(root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.6fZ").to_string();
    let mut dir = root.join(&stamp);
    let mut k = 0;
    loop {
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                k += 1;
                dir = root.join(format!("{stamp}-{k}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Doc {
        schema: String,
        x: f64,
        v: Vec<f64>,
        n: usize,
    }

    #[test]
    fn floats_round_trip_exactly() {
        let doc = Doc {
            schema: "t/1".into(),
            x: 0.1 + 0.2,
            v: vec![1.0 / 3.0, -2.5e-300, 7.0],
            n: 4,
        };
        let text = to_json_string(&doc).unwrap();
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
        assert!(text.contains("\"n\": 4"));
        let back: Doc = from_json_str(&text, "t/1").unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn wrong_schema() {
        let text = r#"{"schema": "t/2", "x": 1, "v": [], "n": 0}"#;
        assert!(matches!(
            from_json_str::<Doc>(text, "t/1"),
            Err(Error::Schema { .. })
        ));
        assert!(matches!(
            from_json_str::<Doc>("{}", "t/1"),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn run_dirs_are_distinct() {
        let root = tempfile::tempdir().unwrap();
        let a = run_dir(root.path()).unwrap();
        let b = run_dir(root.path()).unwrap();
        assert_ne!(a, b);
        assert!(a.is_dir() && b.is_dir());
    }
}
