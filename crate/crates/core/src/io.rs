//! File formats: control-net JSON, occupancy-grid CSV/PGM, and the small
//! CSV layouts used by the CLI.
//!
//! Control-net JSON schema:
//! `{"E":int,"F":int,"points":[[[x,y,z],…F],…E]}`, coordinates written with
//! 17 significant digits so round trips are lossless.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampler::SemanticOccupancyGrid;
use crate::scalar::Real;
use crate::surface::{ControlNet, SurfacePoint};

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a control net to the JSON schema.
pub fn control_net_to_json<R: Real>(net: &ControlNet<R>) -> String {
    let mut out = String::new();
    out.push_str(&format!("{{\"E\":{},\"F\":{},\"points\":[", net.e(), net.f()));
    for e in 0..net.e() {
        if e > 0 {
            out.push(',');
        }
        out.push('[');
        for f in 0..net.f() {
            if f > 0 {
                out.push(',');
            }
            let p = net.point(e, f);
            out.push_str(&format!(
                "[{},{},{}]",
                fmt17(p.x.to_f64().unwrap()),
                fmt17(p.y.to_f64().unwrap()),
                fmt17(p.z.to_f64().unwrap())
            ));
        }
        out.push(']');
    }
    out.push_str("]}");
    out
}

/// Parses a control net from the JSON schema.
pub fn control_net_from_json<R: Real>(text: &str) -> Result<ControlNet<R>> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse { line: 1, msg: "expected a JSON object".into() })?;
    let get_dim = |key: &str| -> Result<usize> {
        obj.get(key)
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing integer field {key}") })
    };
    let e = get_dim("E")?;
    let f = get_dim("F")?;
    let rows = obj
        .get("points")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Parse { line: 1, msg: "missing points array".into() })?;
    if rows.len() != e {
        return Err(Error::Parse { line: 1, msg: format!("expected {e} point rows, got {}", rows.len()) });
    }
    let mut points = Vec::with_capacity(e * f);
    for row in rows {
        let cols = row
            .as_array()
            .ok_or_else(|| Error::Parse { line: 1, msg: "point row is not an array".into() })?;
        if cols.len() != f {
            return Err(Error::Parse { line: 1, msg: format!("expected {f} points per row, got {}", cols.len()) });
        }
        for cell in cols {
            let xyz = cell
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::Parse { line: 1, msg: "point is not [x,y,z]".into() })?;
            let mut coord = [0.0f64; 3];
            for (slot, v) in coord.iter_mut().zip(xyz) {
                *slot = v
                    .as_f64()
                    .ok_or_else(|| Error::Parse { line: 1, msg: "non-numeric coordinate".into() })?;
            }
            points.push(SurfacePoint::new(
                R::from_f64_lossy(coord[0]),
                R::from_f64_lossy(coord[1]),
                R::from_f64_lossy(coord[2]),
            ));
        }
    }
    ControlNet::new(e, f, points)
}

pub fn write_control_net<R: Real>(path: &Path, net: &ControlNet<R>) -> Result<()> {
    fs::write(path, control_net_to_json(net) + "\n")?;
    Ok(())
}

pub fn read_control_net<R: Real>(path: &Path) -> Result<ControlNet<R>> {
    control_net_from_json(&fs::read_to_string(path)?)
}

/// SOG CSV: header `width,height,resolution,M,t`, then row-major integer
/// labels (line breaks between grid rows are conventional, not required).
pub fn sog_to_csv(sog: &SemanticOccupancyGrid) -> String {
    let mut out = format!(
        "{},{},{},{},{}\n",
        sog.width(),
        sog.height(),
        sog.resolution(),
        sog.class_count(),
        sog.t
    );
    for row in 0..sog.height() {
        let line: Vec<String> = (0..sog.width())
            .map(|col| sog.label(col, row).to_string())
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn sog_from_csv(text: &str) -> Result<SemanticOccupancyGrid> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty file".into() })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header needs width,height,resolution,M,t — got {} fields", fields.len()),
        });
    }
    let parse_usize = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Parse { line: 1, msg: format!("bad {what}: {s:?}") })
    };
    let width = parse_usize(fields[0], "width")?;
    let height = parse_usize(fields[1], "height")?;
    let resolution: f64 = fields[2]
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("bad resolution: {:?}", fields[2]) })?;
    let m = parse_usize(fields[3], "M")?;
    let t = parse_usize(fields[4], "t")?;

    let mut labels = Vec::with_capacity(width * height);
    for (idx, line) in lines {
        for tok in line.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let v: u8 = tok
                .parse()
                .map_err(|_| Error::Parse { line: idx + 1, msg: format!("bad label {tok:?}") })?;
            labels.push(v);
        }
    }
    if labels.len() != width * height {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected {} labels, got {}", width * height, labels.len()),
        });
    }
    SemanticOccupancyGrid::new(width, height, resolution, labels, m, t)
}

/// 8-bit PGM (P2 or P5) where the pixel value is the class id. Resolution
/// and time index are not carried by PGM; callers supply them.
pub fn sog_from_pgm(bytes: &[u8], resolution: f64, m: usize, t: usize) -> Result<SemanticOccupancyGrid> {
    let mut pos = 0usize;
    let mut tokens: Vec<(usize, String)> = Vec::new(); // (offset after token, token)
    // tokenize the header: magic, width, height, maxval, skipping comments
    while tokens.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos > start {
            tokens.push((pos, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
        }
    }
    if tokens.len() < 4 {
        return Err(Error::Parse { line: 1, msg: "truncated PGM header".into() });
    }
    let magic = tokens[0].1.as_str();
    let width: usize = tokens[1].1.parse().map_err(|_| Error::Parse { line: 1, msg: "bad PGM width".into() })?;
    let height: usize = tokens[2].1.parse().map_err(|_| Error::Parse { line: 1, msg: "bad PGM height".into() })?;
    let maxval: usize = tokens[3].1.parse().map_err(|_| Error::Parse { line: 1, msg: "bad PGM maxval".into() })?;
    if maxval > 255 {
        return Err(Error::Parse { line: 1, msg: "only 8-bit PGM supported".into() });
    }

    let labels: Vec<u8> = match magic {
        "P5" => {
            let data_start = tokens[3].0 + 1; // single whitespace after maxval
            let data = &bytes[data_start..];
            if data.len() < width * height {
                return Err(Error::Parse { line: 1, msg: "truncated P5 pixel data".into() });
            }
            data[..width * height].to_vec()
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[tokens[3].0..]);
            let vals: std::result::Result<Vec<u8>, _> =
                text.split_ascii_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|_| Error::Parse { line: 1, msg: "bad P2 pixel value".into() })?;
            if vals.len() != width * height {
                return Err(Error::Parse { line: 1, msg: "P2 pixel count mismatch".into() });
            }
            vals
        }
        other => {
            return Err(Error::Parse { line: 1, msg: format!("unsupported PGM magic {other:?}") })
        }
    };
    SemanticOccupancyGrid::new(width, height, resolution, labels, m, t)
}

/// Reads a SOG from a path, dispatching on the `.pgm` extension.
pub fn read_sog(path: &Path, pgm_resolution: f64, pgm_m: usize, pgm_t: usize) -> Result<SemanticOccupancyGrid> {
    if path.extension().and_then(|s| s.to_str()) == Some("pgm") {
        sog_from_pgm(&fs::read(path)?, pgm_resolution, pgm_m, pgm_t)
    } else {
        sog_from_csv(&fs::read_to_string(path)?)
    }
}

/// Parses numeric CSV rows of a fixed column count, skipping an optional
/// non-numeric header line. Returns `(line_number, fields)` pairs.
pub fn read_numeric_csv(text: &str, cols: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue; // header
        }
        if fields.len() != cols {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {cols} columns, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(cols);
        for f in fields {
            row.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("bad number {f:?}"),
            })?);
        }
        out.push((idx + 1, row));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn control_net_round_trip_lossless() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<SurfacePoint<f64>> = (0..12)
            .map(|_| {
                SurfacePoint::new(
                    rng.gen_range(-100.0..100.0),
                    rng.gen::<f64>() * 1e-7,
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let net = ControlNet::new(3, 4, pts).unwrap();
        let json = control_net_to_json(&net);
        let back: ControlNet<f64> = control_net_from_json(&json).unwrap();
        for (a, b) in net.points().iter().zip(back.points()) {
            assert!((a.x - b.x).abs() < 1e-12 * a.x.abs().max(1.0));
            assert!((a.y - b.y).abs() < 1e-12 * a.y.abs().max(1.0));
            assert!((a.z - b.z).abs() < 1e-12 * a.z.abs().max(1.0));
        }
    }

    #[test]
    fn control_net_json_rejects_malformed() {
        assert!(control_net_from_json::<f64>("{}").is_err());
        assert!(control_net_from_json::<f64>("{\"E\":2,\"F\":2,\"points\":[]}").is_err());
        assert!(control_net_from_json::<f64>("not json").is_err());
    }

    #[test]
    fn sog_csv_round_trip() {
        let labels = vec![0u8, 1, 2, 1, 0, 1];
        let sog = SemanticOccupancyGrid::new(3, 2, 0.25, labels, 5, 2).unwrap();
        let csv = sog_to_csv(&sog);
        assert!(csv.starts_with("3,2,0.25,5,2\n"));
        let back = sog_from_csv(&csv).unwrap();
        assert_eq!(sog, back);
    }

    #[test]
    fn sog_csv_errors_carry_line_numbers() {
        let err = sog_from_csv("3,2,0.25,5,2\n0,1,2\n0,x,1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pgm_both_flavors() {
        let p2 = b"P2\n# comment\n3 2\n255\n0 1 2\n1 0 1\n";
        let a = sog_from_pgm(p2, 0.5, 5, 1).unwrap();
        let mut p5 = b"P5\n3 2\n255\n".to_vec();
        p5.extend_from_slice(&[0, 1, 2, 1, 0, 1]);
        let b = sog_from_pgm(&p5, 0.5, 5, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label(2, 0), 2);
    }

    #[test]
    fn numeric_csv_header_and_errors() {
        let rows = read_numeric_csv("x,y,z\n1,2,3\n4,5,6\n", 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].1, vec![1.0, 2.0, 3.0]);
        let err = read_numeric_csv("1,2,3\n4,oops,6\n", 3).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
