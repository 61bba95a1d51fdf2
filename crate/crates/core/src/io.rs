//! Point cloud readers/writers (plain XYZ text and ASCII PLY).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// `x y z` per line, `#` comments.
    Xyz,
    /// ASCII PLY with float/double x, y, z vertex properties.
    PlyAscii,
}

impl CloudFormat {
    /// Guesses from the file extension; anything but `.ply` is XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => CloudFormat::PlyAscii,
            _ => CloudFormat::Xyz,
        }
    }
}

pub fn read_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(_) if format == CloudFormat::PlyAscii => {
            return Err(Error::UnsupportedFormat("binary PLY is not supported".into()))
        }
        Err(_) => return Err(Error::Parse { line: 0, message: "file is not UTF-8 text".into() }),
    };
    match format {
        CloudFormat::Xyz => parse_xyz(&text),
        CloudFormat::PlyAscii => parse_ply_ascii(&text),
    }
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("not a number: {tok:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("non-finite coordinate {tok:?}") });
    }
    Ok(v)
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::Parse { line, message: format!("expected 3 coordinates, found {}", toks.len()) });
        }
        points.push(Point3::new(parse_coord(toks[0], line)?, parse_coord(toks[1], line)?, parse_coord(toks[2], line)?));
    }
    PointCloud::new(points)
}

pub fn parse_ply_ascii(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::Parse { line: 1, message: "missing 'ply' magic".into() }),
    }
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    // elements declared before "vertex" whose rows must be skipped
    let mut leading_rows = 0usize;
    let mut seen_vertex = false;
    let mut header_done = false;
    for (i, raw) in lines.by_ref() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::UnsupportedFormat(format!("PLY format {fmt} (only ascii is supported)")));
                }
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("bad element count {count:?}") })?;
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count);
                    seen_vertex = true;
                } else if !seen_vertex {
                    leading_rows += count;
                }
            }
            ["property", "list", ..] => {}
            ["property", _ty, name] => {
                if in_vertex {
                    props.push((*name).to_string());
                }
            }
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(Error::Parse { line: text.lines().count(), message: "missing end_header".into() });
    }
    let count = vertex_count.ok_or(Error::Parse { line: 0, message: "no vertex element".into() })?;
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or(Error::Parse { line: 0, message: format!("vertex has no {name} property") })
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(count);
    let mut skipped = 0;
    for (i, raw) in lines {
        if points.len() == count {
            break;
        }
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if skipped < leading_rows {
            skipped += 1;
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() < props.len() {
            return Err(Error::Parse { line, message: format!("expected {} values, found {}", props.len(), toks.len()) });
        }
        points.push(Point3::new(parse_coord(toks[cx], line)?, parse_coord(toks[cy], line)?, parse_coord(toks[cz], line)?));
    }
    if points.len() != count {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("expected {count} vertices, found {}", points.len()),
        });
    }
    PointCloud::new(points)
}

pub fn write_xyz<W: Write>(cloud: &PointCloud, mut out: W) -> std::io::Result<()> {
    for p in cloud.points() {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn write_xyz_file(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_xyz(cloud, std::io::BufWriter::new(file)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// `%.{digits}g`-style formatting: shortest of fixed or scientific with
/// `digits` significant digits, trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent value");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
