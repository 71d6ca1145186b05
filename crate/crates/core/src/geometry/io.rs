//! XYZL and ASCII PLY readers, XYZL writer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Label, LabeledCloud, Point3};
use crate::error::{Error, Result};

/// Formats a real at 9 significant digits, then prints the shortest decimal
/// that reads back to the rounded value.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads `.ply` files as PLY and everything else as XYZL.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    let path = path.as_ref();
    let is_ply = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if is_ply {
        load_ply(path)
    } else {
        load_xyzl(path)
    }
}

pub fn load_xyzl(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    parse_xyzl(&read_to_string(path.as_ref())?)
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid coordinate `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite coordinate `{tok}`")));
    }
    Ok(v)
}

fn parse_label(tok: &str, line: usize) -> Result<Label> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid label `{tok}`")))
}

/// Parses "x y z [label]" lines. Blank lines and `#` comments are skipped.
pub fn parse_xyzl(text: &str) -> Result<LabeledCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut labeled: Option<bool> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let has_label = match toks.len() {
            3 => false,
            4 => true,
            k => return Err(Error::parse(line, format!("expected 3 or 4 fields, found {k}"))),
        };
        match labeled {
            None => labeled = Some(has_label),
            Some(prev) if prev != has_label => return Err(Error::parse(line, "mixed labeled and unlabeled lines")),
            _ => {}
        }
        points.push(Point3::new(
            parse_coord(toks[0], line)?,
            parse_coord(toks[1], line)?,
            parse_coord(toks[2], line)?,
        ));
        if has_label {
            labels.push(parse_label(toks[3], line)?);
        }
    }
    let labels = (labeled == Some(true)).then_some(labels);
    LabeledCloud::new(points, labels)
}

pub fn write_xyzl(cloud: &LabeledCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 32);
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{} {} {}", format_real(p.x), format_real(p.y), format_real(p.z));
        if let Some(labels) = cloud.labels() {
            let _ = write!(out, " {}", labels[i]);
        }
        out.push('\n');
    }
    out
}

pub fn save_xyzl(path: impl AsRef<Path>, cloud: &LabeledCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_xyzl(cloud)).map_err(|e| Error::io(path, e))
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    parse_ply(&read_to_string(path.as_ref())?)
}

#[derive(Debug)]
struct PlyProperty {
    name: String,
    integer: bool,
    list: bool,
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn is_integer_type(ty: &str) -> Option<bool> {
    match ty {
        "char" | "uchar" | "short" | "ushort" | "int" | "uint" | "int8" | "uint8" | "int16" | "uint16" | "int32"
        | "uint32" => Some(true),
        "float" | "double" | "float32" | "float64" => Some(false),
        _ => None,
    }
}

/// Parses the ASCII 1.0 subset: a `vertex` element with float `x`, `y`, `z`
/// and an optional integer `label`. Other elements are skipped.
pub fn parse_ply(text: &str) -> Result<LabeledCloud> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::UnsupportedFormat("missing `ply` magic".into())),
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    loop {
        let (line, body) = lines
            .next()
            .ok_or_else(|| Error::UnsupportedFormat("header ends without end_header".into()))?;
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", "ascii", _] => saw_format = true,
            ["format", fmt, _] => {
                return Err(Error::UnsupportedFormat(format!("{fmt} PLY")));
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad element count `{count}`")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, "property before element"))?;
                el.properties.push(PlyProperty {
                    name: name.to_string(),
                    integer: false,
                    list: true,
                });
            }
            ["property", ty, name] => {
                let integer =
                    is_integer_type(ty).ok_or_else(|| Error::parse(line, format!("unknown property type `{ty}`")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, "property before element"))?;
                el.properties.push(PlyProperty {
                    name: name.to_string(),
                    integer,
                    list: false,
                });
            }
            _ => return Err(Error::parse(line, format!("unrecognized header line `{body}`"))),
        }
    }
    if !saw_format {
        return Err(Error::UnsupportedFormat("missing format line".into()));
    }

    let vertex = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::MissingProperty("vertex".into()))?;
    let position = |name: &str| {
        vertex
            .properties
            .iter()
            .position(|p| p.name == name && !p.list)
            .ok_or_else(|| Error::MissingProperty(name.into()))
    };
    let (ix, iy, iz) = (position("x")?, position("y")?, position("z")?);
    if vertex.properties.iter().any(|p| p.list) {
        return Err(Error::UnsupportedFormat("list property on vertex".into()));
    }
    let ilabel = vertex.properties.iter().position(|p| p.name == "label" && p.integer);

    let mut points = Vec::with_capacity(vertex.count);
    let mut labels = ilabel.map(|_| Vec::with_capacity(vertex.count));
    for el in &elements {
        for _ in 0..el.count {
            let (line, body) = lines
                .next()
                .ok_or_else(|| Error::UnsupportedFormat(format!("truncated `{}` data", el.name)))?;
            if el.name != "vertex" {
                continue;
            }
            let toks: Vec<&str> = body.split_whitespace().collect();
            if toks.len() != el.properties.len() {
                return Err(Error::parse(
                    line,
                    format!("expected {} values, found {}", el.properties.len(), toks.len()),
                ));
            }
            points.push(Point3::new(
                parse_coord(toks[ix], line)?,
                parse_coord(toks[iy], line)?,
                parse_coord(toks[iz], line)?,
            ));
            if let (Some(i), Some(labels)) = (ilabel, labels.as_mut()) {
                labels.push(parse_label(toks[i], line)?);
            }
        }
    }
    LabeledCloud::new(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xyzl_with_labels() {
        let c = parse_xyzl("0 0 0 1\n1 0 0 2\n").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.labels(), Some(&[1, 2][..]));
        assert_eq!(c.point(1), Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn xyzl_empty_and_comments() {
        let c = parse_xyzl("").unwrap();
        assert!(c.is_empty());
        assert!(!c.is_labeled());
        let c = parse_xyzl("# header\n\n0.5 1 2\n").unwrap();
        assert_eq!(c.len(), 1);
        assert!(!c.is_labeled());
    }

    #[test]
    fn xyzl_nan_reports_line() {
        let err = parse_xyzl("1 1 1\n0 0 nan\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn xyzl_mixed_labels_rejected() {
        let err = parse_xyzl("0 0 0 1\n1 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn xyzl_negative_label_rejected() {
        assert!(parse_xyzl("0 0 0 -1\n").is_err());
    }

    const PLY: &str = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn ply_minimal() {
        let c = parse_ply(PLY).unwrap();
        assert_eq!(c.len(), 3);
        assert!(!c.is_labeled());
        assert_eq!(c.point(2), Point3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn ply_with_label_property() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nproperty int label\nend_header\n0 0 0 4\n1 1 1 0\n";
        let c = parse_ply(text).unwrap();
        assert_eq!(c.labels(), Some(&[4, 0][..]));
    }

    #[test]
    fn ply_binary_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(matches!(parse_ply(text), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn ply_missing_z_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n";
        assert!(matches!(parse_ply(text), Err(Error::MissingProperty(p)) if p == "z"));
    }

    #[test]
    fn format_real_examples() {
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(-2.0), "-2");
        assert_eq!(format_real(1.0 / 3.0), "0.333333333");
        assert_eq!(format_real(0.0), "0");
    }

    proptest! {
        #[test]
        fn xyzl_round_trip_at_nine_digits(
            pts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3, 0u32..50), 1..30),
        ) {
            let points: Vec<Point3> = pts.iter().map(|&(x, y, z, _)| Point3::new(x, y, z)).collect();
            let labels: Vec<u32> = pts.iter().map(|p| p.3).collect();
            let cloud = LabeledCloud::new(points, Some(labels)).unwrap();
            let text = write_xyzl(&cloud);
            let back = parse_xyzl(&text).unwrap();
            prop_assert_eq!(back.labels(), cloud.labels());
            for (a, b) in cloud.points().iter().zip(back.points()) {
                for i in 0..3 {
                    let (x, y) = (a.axis(i), b.axis(i));
                    prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300));
                }
            }
            // a second write is a fixed point
            prop_assert_eq!(write_xyzl(&back), text);
        }
    }
}
