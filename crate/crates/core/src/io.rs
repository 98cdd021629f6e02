//! On-disk formats.
//!
//! * Point sets: CSV with header `name,x,y,z`, millimeters.
//! * Transforms: JSON `{"matrix": [16 row-major], "params": {"t", "r", "s"}}`.
//! * Volumes: a JSON header naming a raw little-endian `f32` file stored
//!   next to it, x fastest.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{decompose, AffineMatrix, AffineParams9, Point3, PointSet, Volume3};

const POINT_HEADER: [&str; 4] = ["name", "x", "y", "z"];

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    name: String,
    x: f64,
    y: f64,
    z: f64,
}

pub fn read_point_set_from<R: Read>(reader: R, path: &Path) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if headers.iter().ne(POINT_HEADER) {
        return Err(Error::format(
            path,
            format!("expected header `name,x,y,z`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut points = Vec::new();
    let mut names = Vec::new();
    for row in rdr.deserialize::<PointRow>() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        points.push(Point3::new(row.x, row.y, row.z));
        names.push(row.name);
    }
    PointSet::with_names(points, names).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_point_set(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_point_set_from(file, path)
}

/// Writes a point set. Unnamed sets get names `p0`, `p1`, ...
pub fn write_point_set_to<W: Write>(writer: W, pts: &PointSet) -> std::io::Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(POINT_HEADER)?;
    for (i, p) in pts.iter().enumerate() {
        let name = match pts.names() {
            Some(names) => names[i].clone(),
            None => format!("p{i}"),
        };
        wtr.write_record([name, p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    wtr.flush()
}

pub fn write_point_set(path: impl AsRef<Path>, pts: &PointSet) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_point_set_to(std::io::BufWriter::new(file), pts).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct TransformFile {
    matrix: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<AffineParams9>,
}

/// A stored transform. The matrix is authoritative; `params` is carried
/// along when the matrix lies in the nine-parameter family.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformRecord {
    pub matrix: AffineMatrix,
    pub params: Option<AffineParams9>,
}

impl TransformRecord {
    pub fn new(matrix: AffineMatrix) -> Self {
        Self {
            params: decompose(&matrix).ok(),
            matrix,
        }
    }

    pub fn to_json(&self) -> String {
        let file = TransformFile {
            matrix: self.matrix.to_row_major().to_vec(),
            params: self.params,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("transform serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let file: TransformFile =
            serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
        let matrix =
            AffineMatrix::from_row_major(&file.matrix).map_err(|e| Error::format(path, e.to_string()))?;
        if let Some(p) = &file.params {
            p.validate().map_err(|e| Error::format(path, e.to_string()))?;
        }
        Ok(Self {
            matrix,
            params: file.params,
        })
    }
}

pub fn write_transform(path: impl AsRef<Path>, record: &TransformRecord) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, record.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<TransformRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TransformRecord::from_json(&text, path)
}

#[derive(Debug, Serialize, Deserialize)]
struct VolumeHeader {
    dims: [usize; 3],
    spacing: [f64; 3],
    #[serde(default)]
    origin: [f64; 3],
    dtype: String,
    data: String,
}

/// Reads a volume header and its raw payload. The payload path is resolved
/// relative to the header's directory.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: VolumeHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(Error::format(path, format!("unsupported dtype `{other}`"))),
    };
    let raw_path = path.parent().unwrap_or(Path::new("")).join(&header.data);
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let n = header.dims.iter().product::<usize>();
    if bytes.len() != n * width {
        return Err(Error::format(
            &raw_path,
            format!("expected {} bytes for {n} voxels, found {}", n * width, bytes.len()),
        ));
    }
    let data: Vec<f64> = if width == 4 {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()
    } else {
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    };
    Volume3::new(header.dims, header.spacing, header.origin.into(), data)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Raw payload path used by [`write_volume`]: `foo.json` stores into `foo.raw`.
pub fn raw_path_for(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

/// Writes `vol` as a JSON header at `path` plus an `f32` payload alongside.
pub fn write_volume(path: impl AsRef<Path>, vol: &Volume3) -> Result<()> {
    let path = path.as_ref();
    let raw = raw_path_for(path);
    let raw_name = raw
        .file_name()
        .expect("header path has a file name")
        .to_string_lossy()
        .into_owned();
    let header = VolumeHeader {
        dims: vol.dims(),
        spacing: vol.spacing(),
        origin: vol.origin().to_array(),
        dtype: "f32".into(),
        data: raw_name,
    };
    let mut bytes = Vec::with_capacity(vol.len() * 4);
    for v in vol.data() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
    let mut text = serde_json::to_string(&header).expect("header serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
