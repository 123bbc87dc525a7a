//! Label files.
//!
//! The native format is LiDAR-frame, one object per line:
//! `class cx cy cz l w h theta`, whitespace separated, `#` comments allowed.
//! KITTI camera-frame labels are converted with the frame's calibration.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use super::IoError;
use crate::geometry::{BoundingBox, ObjectClass};

/// Parsed labels; lines with classes outside Car/Pedestrian/Cyclist are counted in `skipped`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelFile {
    pub boxes: Vec<(ObjectClass, BoundingBox)>,
    pub skipped: usize,
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

fn parse_floats(tokens: &[&str]) -> Option<Vec<f64>> {
    tokens
        .iter()
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelFile, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = LabelFile::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || IoError::MalformedLine { path: path.to_path_buf(), line: i + 1 };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Ok(class) = tokens[0].parse::<ObjectClass>() else {
            out.skipped += 1;
            continue;
        };
        if tokens.len() != 8 {
            return Err(malformed());
        }
        let v = parse_floats(&tokens[1..]).ok_or_else(malformed)?;
        let bbox = BoundingBox::new([v[0], v[1], v[2]], [v[3], v[4], v[5]], v[6]);
        if !bbox.is_valid() {
            return Err(malformed());
        }
        out.boxes.push((class, bbox));
    }
    if out.skipped > 0 {
        log::warn!("{}: skipped {} labels of other classes", path.display(), out.skipped);
    }
    Ok(out)
}

/// Formats with 9 significant digits, enough to round-trip any `f32`.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{}", v);
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{:.8e}", v);
    }
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{:.*}", decimals, v);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn write_labels(
    labels: &[(ObjectClass, BoundingBox)],
    path: impl AsRef<Path>,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut text = String::new();
    for (class, b) in labels {
        let fields = [b.cx, b.cy, b.cz, b.l, b.w, b.h, b.theta].map(format_sig9);
        let _ = writeln!(text, "{} {}", class, fields.join(" "));
    }
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// KITTI calibration: rectification and velodyne-to-camera transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// `R0_rect · Tr_velo_to_cam` as a homogeneous matrix.
    velo_to_rect: Matrix4<f64>,
    rect_to_velo: Matrix4<f64>,
}

impl Calibration {
    pub fn new(r0_rect: [f64; 9], tr_velo_to_cam: [f64; 12]) -> Option<Self> {
        let mut r0 = Matrix4::identity();
        let mut tr = Matrix4::identity();
        for row in 0..3 {
            for col in 0..3 {
                r0[(row, col)] = r0_rect[row * 3 + col];
            }
            for col in 0..4 {
                tr[(row, col)] = tr_velo_to_cam[row * 4 + col];
            }
        }
        let velo_to_rect = r0 * tr;
        let rect_to_velo = velo_to_rect.try_inverse()?;
        Some(Self { velo_to_rect, rect_to_velo })
    }

    pub fn rect_to_velo(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.rect_to_velo * Vector4::new(p[0], p[1], p[2], 1.0);
        [v[0], v[1], v[2]]
    }

    pub fn velo_to_rect(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.velo_to_rect * Vector4::new(p[0], p[1], p[2], 1.0);
        [v[0], v[1], v[2]]
    }
}

pub fn parse_calibration(path: impl AsRef<Path>) -> Result<Calibration, IoError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut r0 = None;
    let mut tr = None;
    for (i, line) in text.lines().enumerate() {
        let Some((key, values)) = line.split_once(':') else {
            continue;
        };
        let malformed = || IoError::MalformedLine { path: path.to_path_buf(), line: i + 1 };
        let key = key.trim();
        if key != "R0_rect" && key != "Tr_velo_to_cam" {
            continue;
        }
        let tokens: Vec<&str> = values.split_whitespace().collect();
        let v = parse_floats(&tokens).ok_or_else(malformed)?;
        match key {
            "R0_rect" => r0 = Some(<[f64; 9]>::try_from(v).map_err(|_| malformed())?),
            _ => tr = Some(<[f64; 12]>::try_from(v).map_err(|_| malformed())?),
        }
    }
    let missing = |key| IoError::MissingCalibKey { path: path.to_path_buf(), key };
    let r0 = r0.ok_or_else(|| missing("R0_rect"))?;
    let tr = tr.ok_or_else(|| missing("Tr_velo_to_cam"))?;
    Calibration::new(r0, tr).ok_or_else(|| IoError::MalformedLine { path: path.to_path_buf(), line: 0 })
}

/// Reads a KITTI camera-frame label file and converts boxes into the LiDAR frame.
pub fn read_kitti_labels(
    label_path: impl AsRef<Path>,
    calib_path: impl AsRef<Path>,
) -> Result<LabelFile, IoError> {
    let calib = parse_calibration(calib_path)?;
    let path = label_path.as_ref();
    let text = read_text(path)?;
    let mut out = LabelFile::default();
    for (i, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let Ok(class) = tokens[0].parse::<ObjectClass>() else {
            out.skipped += 1;
            continue;
        };
        let malformed = || IoError::MalformedLine { path: path.to_path_buf(), line: i + 1 };
        if tokens.len() < 15 {
            return Err(malformed());
        }
        let v = parse_floats(&tokens[8..15]).ok_or_else(malformed)?;
        let (h, w, l) = (v[0], v[1], v[2]);
        let mut center = calib.rect_to_velo([v[3], v[4], v[5]]);
        // KITTI locations sit on the bottom face.
        center[2] += h / 2.0;
        let bbox = BoundingBox::new(center, [l, w, h], -v[6] - FRAC_PI_2);
        if !bbox.is_valid() {
            return Err(malformed());
        }
        out.boxes.push((class, bbox));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    const KITTI_CALIB: &str = "P0: 7.215377e+02 0.000000e+00 6.095593e+02 0.000000e+00 0.000000e+00 7.215377e+02 1.728540e+02 0.000000e+00 0.000000e+00 0.000000e+00 1.000000e+00 0.000000e+00
R0_rect: 9.999239e-01 9.837760e-03 -7.445048e-03 -9.869795e-03 9.999421e-01 -4.278459e-03 7.402527e-03 4.351614e-03 9.999631e-01
Tr_velo_to_cam: 7.533745e-03 -9.999714e-01 -6.166020e-04 -4.069766e-03 1.480249e-02 7.280733e-04 -9.998902e-01 -7.631618e-02 9.998621e-01 7.523790e-03 1.480755e-02 -2.717806e-01
Tr_imu_to_velo: 9.999976e-01 7.553071e-04 -2.035826e-03 -8.086759e-01 -7.854027e-04 9.998898e-01 -1.482298e-02 3.195559e-01 2.024406e-03 1.482454e-02 9.998881e-01 -7.997231e-01
";

    const IDENTITY_CALIB: &str = "R0_rect: 1 0 0 0 1 0 0 0 1
Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0
";

    #[test]
    fn native_examples() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write(dir.path(), "e.txt", "");
        assert!(read_labels(&empty).unwrap().boxes.is_empty());

        let one = write(dir.path(), "o.txt", "# header\nCar 10 0 -1 4 1.8 1.5 0\nDontCare 1 2 3\n");
        let parsed = read_labels(&one).unwrap();
        assert_eq!(parsed.skipped, 1);
        assert_eq!(
            parsed.boxes,
            vec![(ObjectClass::Car, BoundingBox::new([10.0, 0.0, -1.0], [4.0, 1.8, 1.5], 0.0))]
        );

        let short = write(dir.path(), "s.txt", "Car 10 0 -1 4\n");
        assert!(matches!(read_labels(&short), Err(IoError::MalformedLine { line: 1, .. })));
        let bad = write(dir.path(), "b.txt", "Car 1 2 3 4 5 6 7\nCar 1 2 x 4 5 6 7\n");
        assert!(matches!(read_labels(&bad), Err(IoError::MalformedLine { line: 2, .. })));
    }

    #[test]
    fn theta_normalized_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.txt", "Cyclist 0 0 0 2 1 1 4.71238898038469\n");
        let theta = read_labels(&p).unwrap().boxes[0].1.theta;
        assert!((theta + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(10.0), "10");
        assert_eq!(format_sig9(-1.5), "-1.5");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(70.4), "70.4");
        assert_eq!(format_sig9(1.5e-9), "1.50000000e-9");
    }

    #[test]
    fn label_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<(ObjectClass, BoundingBox)> = (0..50)
            .map(|i| {
                let f = |v: f64| v as f32 as f64;
                let t = i as f64;
                (
                    ObjectClass::ALL[i % 3],
                    BoundingBox::new(
                        [f(t * 1.37 - 20.1), f(-t * 0.731), f(-1.6 + t * 1e-3)],
                        [f(3.9 + t * 0.01), f(1.6), f(1.52 + t * 1e-4)],
                        f(-3.1 + t * 0.123),
                    ),
                )
            })
            .collect();
        let path = dir.path().join("rt.txt");
        write_labels(&labels, &path).unwrap();
        let back = read_labels(&path).unwrap().boxes;
        assert_eq!(back.len(), labels.len());
        for ((ca, a), (cb, b)) in labels.iter().zip(&back) {
            assert_eq!(ca, cb);
            let va = [a.cx, a.cy, a.cz, a.l, a.w, a.h, a.theta];
            let vb = [b.cx, b.cy, b.cz, b.l, b.w, b.h, b.theta];
            for (x, y) in va.iter().zip(vb) {
                assert_eq!(*x as f32, y as f32);
            }
        }
    }

    #[test]
    fn kitti_identity_calibration() {
        let dir = tempfile::tempdir().unwrap();
        let calib = write(dir.path(), "c.txt", IDENTITY_CALIB);
        let label = write(
            dir.path(),
            "l.txt",
            "Car 0.00 0 0.0 0 0 10 10 1.5 1.6 3.9 0 0 0 -1.5707963267948966\nVan 0 0 0 0 0 0 0 1 1 1 0 0 0 0\n",
        );
        let parsed = read_kitti_labels(&label, &calib).unwrap();
        assert_eq!(parsed.skipped, 1);
        let b = parsed.boxes[0].1;
        assert!(b.theta.abs() < 1e-12);
        assert_eq!([b.l, b.w, b.h], [3.9, 1.6, 1.5]);
        assert_eq!([b.cx, b.cy], [0.0, 0.0]);
        assert!((b.cz - 0.75).abs() < 1e-12);
    }

    #[test]
    fn kitti_devkit_calibration_forward_axis() {
        let dir = tempfile::tempdir().unwrap();
        let calib_path = write(dir.path(), "c.txt", KITTI_CALIB);
        let calib = parse_calibration(&calib_path).unwrap();
        // Camera optical axis (z) is LiDAR forward (x); the camera sits ~0.27 m ahead of the LiDAR.
        let p = calib.rect_to_velo([0.0, 0.0, 10.0]);
        assert!((p[0] - 10.27).abs() < 0.05, "{p:?}");
        assert!(p[1].abs() < 0.2 && p[2].abs() < 0.2, "{p:?}");
        let back = calib.velo_to_rect(p);
        assert!((back[2] - 10.0).abs() < 1e-9);

        let label = write(
            dir.path(),
            "l.txt",
            "Pedestrian 0.00 0 -0.20 712.40 143.00 810.73 307.92 1.89 0.48 1.20 1.84 1.47 8.41 0.01\n",
        );
        let b = read_kitti_labels(&label, &calib_path).unwrap().boxes[0].1;
        assert!((b.cx - 8.68).abs() < 0.1 && (b.cy + 1.86).abs() < 0.1, "{b:?}");
        assert!((b.theta - (-0.01 - FRAC_PI_2)).abs() < 1e-12);
    }

    #[test]
    fn kitti_missing_key() {
        let dir = tempfile::tempdir().unwrap();
        let calib = write(dir.path(), "c.txt", "R0_rect: 1 0 0 0 1 0 0 0 1\n");
        let label = write(dir.path(), "l.txt", "");
        assert!(matches!(
            read_kitti_labels(&label, &calib),
            Err(IoError::MissingCalibKey { key: "Tr_velo_to_cam", .. })
        ));
    }
}
