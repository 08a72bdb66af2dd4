use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PointCloud, Tessellation};
use crate::error::{read_text, Error, Result};

/// Parse a cloud file: header `id,x1,...,xl`, then one row per point.
pub fn load_cloud(path: &Path, intrinsic_dim: usize) -> Result<PointCloud> {
    let text = read_text(path)?;
    parse_cloud(&text, &path.display().to_string(), intrinsic_dim)
}

pub(crate) fn parse_cloud(text: &str, source_name: &str, intrinsic_dim: usize) -> Result<PointCloud> {
    let parse_err = |row: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        row,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "id" || columns[1..].iter().enumerate().any(|(k, c)| *c != format!("x{}", k + 1)) {
        return Err(parse_err(1, format!("expected header id,x1,...,xl, found {header:?}")));
    }
    let dim = columns.len() - 1;
    let mut coords = Vec::new();
    for (line_no, line) in lines {
        let row = line_no + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                source_name: source_name.to_string(),
                row,
                expected: dim,
                found: fields.len().saturating_sub(1),
            });
        }
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| parse_err(row, format!("cannot parse coordinate {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, format!("non-finite coordinate {f:?}")));
            }
            coords.push(v);
        }
    }
    PointCloud::from_flat(dim, intrinsic_dim, coords)
}

pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::from("id");
    for k in 1..=cloud.dim() {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for (i, p) in cloud.points().enumerate() {
        out.push_str(&i.to_string());
        for x in p {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TessellationFile {
    volumes: Vec<f64>,
    faces: Vec<(usize, usize, f64)>,
    #[serde(default)]
    clipped: Vec<usize>,
}

pub fn save_tessellation(tess: &Tessellation, path: &Path) -> Result<()> {
    let file = TessellationFile {
        volumes: tess.volumes().to_vec(),
        faces: tess.faces().collect(),
        clipped: tess.clipped_cells().to_vec(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_tessellation(path: &Path) -> Result<Tessellation> {
    let file: TessellationFile = serde_json::from_str(&read_text(path)?)?;
    if let Some(f) = file.faces.iter().find(|f| f.0 >= f.1) {
        return Err(Error::InvalidArgument(format!("face ({}, {}) must be listed with i < j", f.0, f.1)));
    }
    Ok(Tessellation::from_faces(file.volumes, &file.faces)?.with_clipped(file.clipped))
}
