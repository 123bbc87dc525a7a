//! ASCII PLY export for inspecting frames in a point cloud viewer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Frame, IoError};
use crate::geometry::{ObjectClass, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// Grayscale ramp of reflection intensity.
    Intensity,
    /// Background gray, one color per class.
    Class,
}

impl FromStr for ColorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intensity" => Ok(ColorMode::Intensity),
            "class" => Ok(ColorMode::Class),
            other => Err(format!("unknown color mode `{other}` (expected intensity|class)")),
        }
    }
}

const BACKGROUND_RGB: [u8; 3] = [128, 128, 128];

fn class_rgb(class: ObjectClass) -> [u8; 3] {
    match class {
        ObjectClass::Car => [230, 57, 70],
        ObjectClass::Pedestrian => [42, 157, 143],
        ObjectClass::Cyclist => [69, 123, 230],
    }
}

fn intensity_rgb(r: f64) -> [u8; 3] {
    let v = (r.clamp(0.0, 1.0) * 255.0).round() as u8;
    [v, v, v]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlyVertex {
    pub xyz: [f32; 3],
    pub rgb: [u8; 3],
}

/// Writes colored vertices as an ASCII PLY document.
pub fn write_ply(vertices: &[PlyVertex]) -> String {
    let mut out = String::with_capacity(64 + vertices.len() * 40);
    out.push_str("ply\nformat ascii 1.0\ncomment drcpo frame export\n");
    let _ = writeln!(out, "element vertex {}", vertices.len());
    out.push_str(
        "property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for v in vertices {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            v.xyz[0], v.xyz[1], v.xyz[2], v.rgb[0], v.rgb[1], v.rgb[2]
        );
    }
    out
}

fn vertex(p: &Point, rgb: [u8; 3]) -> PlyVertex {
    PlyVertex { xyz: [p.x as f32, p.y as f32, p.z as f32], rgb }
}

pub fn export_ply(frame: &Frame, path: impl AsRef<Path>, mode: ColorMode) -> Result<(), IoError> {
    let path = path.as_ref();
    let color = |p: &Point, class: Option<ObjectClass>| match (mode, class) {
        (ColorMode::Intensity, _) => intensity_rgb(p.r),
        (ColorMode::Class, None) => BACKGROUND_RGB,
        (ColorMode::Class, Some(c)) => class_rgb(c),
    };
    let mut vertices: Vec<PlyVertex> =
        frame.background.iter().map(|p| vertex(p, color(p, None))).collect();
    for obj in &frame.objects {
        vertices.extend(obj.points.iter().map(|p| vertex(p, color(p, Some(obj.class)))));
    }
    fs::write(path, write_ply(&vertices)).map_err(|e| IoError::io(path, e))
}

/// Parses the ASCII PLY subset written by [`write_ply`]: a single vertex element
/// with `x y z` floats followed by `red green blue` uchars.
pub fn parse_ply(text: &str, path: &Path) -> Result<Vec<PlyVertex>, IoError> {
    let bad = |reason: &str| IoError::MalformedPly { path: path.to_path_buf(), reason: reason.into() };
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing magic"));
    }
    if lines.next() != Some("format ascii 1.0") {
        return Err(bad("expected ascii format"));
    }
    let mut count = None;
    let mut properties = Vec::new();
    for line in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["comment", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?)
            }
            ["element", ..] => return Err(bad("unexpected element")),
            ["property", ty, name] => {
                if count.is_none() {
                    return Err(bad("property before element"));
                }
                properties.push((ty.to_string(), name.to_string()));
            }
            ["end_header"] => break,
            _ => return Err(bad("unexpected header line")),
        }
    }
    let expected = [
        ("float", "x"),
        ("float", "y"),
        ("float", "z"),
        ("uchar", "red"),
        ("uchar", "green"),
        ("uchar", "blue"),
    ];
    let matches = properties.len() == expected.len()
        && properties.iter().zip(expected).all(|((t, n), (et, en))| t == et && n == en);
    if !matches {
        return Err(bad("unexpected vertex properties"));
    }
    let count = count.ok_or_else(|| bad("missing vertex element"))?;
    let mut vertices = Vec::with_capacity(count);
    for line in lines.by_ref().take(count) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 6 {
            return Err(bad("wrong field count"));
        }
        let f = |s: &str| s.parse::<f32>().map_err(|_| bad("bad float"));
        let u = |s: &str| s.parse::<u8>().map_err(|_| bad("bad uchar"));
        vertices.push(PlyVertex { xyz: [f(t[0])?, f(t[1])?, f(t[2])?], rgb: [u(t[3])?, u(t[4])?, u(t[5])?] });
    }
    if vertices.len() != count || lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("vertex count mismatch"));
    }
    Ok(vertices)
}
