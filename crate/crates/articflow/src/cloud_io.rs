//! Columnar binary point-cloud format and a CSV debug dump.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic     8 bytes  "AFCLOUD\0"
//! version   u32      1
//! flags     u32      bit 0 labels, 1 mask, 2 normals, 3 flow, 4 sensor origin
//! n         u64
//! x[n] y[n] z[n]                     f64 columns
//! sensor origin                      3 × f64            (bit 4)
//! label table: u32 count, strings;   then u32 index[n]  (bit 0)
//! mask[n]                            u8 0/1             (bit 1)
//! nx[n] ny[n] nz[n]                                     (bit 2)
//! target joint string; fx[n] fy[n] fz[n]                (bit 3)
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8 bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use articflow_core::flow::FlowField;
use articflow_core::geom::PointCloud;
use articflow_core::{Point3, Vector3};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"AFCLOUD\0";
pub const VERSION: u32 = 1;

const LABELS: u32 = 1;
const MASK: u32 = 2;
const NORMALS: u32 = 4;
const FLOW: u32 = 8;
const SENSOR: u32 = 16;

pub fn encode_cloud(cloud: &PointCloud, flow: Option<&FlowField>) -> Result<Vec<u8>> {
    let n = cloud.len();
    if let Some(f) = flow {
        if f.len() != n {
            return Err(articflow_core::Error::LengthMismatch { expected: n, found: f.len() }.into());
        }
    }
    let mut flags = 0;
    flags |= if cloud.link_labels().is_some() { LABELS } else { 0 };
    flags |= if cloud.part_mask().is_some() { MASK } else { 0 };
    flags |= if cloud.normals().is_some() { NORMALS } else { 0 };
    flags |= if flow.is_some() { FLOW } else { 0 };
    flags |= if cloud.sensor_origin().is_some() { SENSOR } else { 0 };

    let mut out = Vec::with_capacity(24 + n * 8 * 3);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    let points: Vec<Vector3<f64>> = cloud.points().iter().map(|p| p.coords).collect();
    put_columns(&mut out, &points);
    if let Some(o) = cloud.sensor_origin() {
        for c in o.coords.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    if let Some(labels) = cloud.link_labels() {
        let mut table: BTreeMap<&str, u32> = BTreeMap::new();
        for l in labels {
            let next = table.len() as u32;
            table.entry(l.as_str()).or_insert(next);
        }
        let mut names = vec![""; table.len()];
        for (name, &i) in &table {
            names[i as usize] = name;
        }
        out.extend_from_slice(&(names.len() as u32).to_le_bytes());
        for name in names {
            put_str(&mut out, name);
        }
        for l in labels {
            out.extend_from_slice(&table[l.as_str()].to_le_bytes());
        }
    }
    if let Some(mask) = cloud.part_mask() {
        out.extend(mask.iter().map(|&m| m as u8));
    }
    if let Some(normals) = cloud.normals() {
        put_columns(&mut out, normals);
    }
    if let Some(f) = flow {
        put_str(&mut out, f.target_joint());
        put_columns(&mut out, f.vectors());
    }
    Ok(out)
}

pub fn decode_cloud(bytes: &[u8]) -> Result<(PointCloud, Option<FlowField>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a cloud file (bad magic)".to_string()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported cloud format version {version}")));
    }
    let flags = r.u32()?;
    if flags & !(LABELS | MASK | NORMALS | FLOW | SENSOR) != 0 {
        return Err(Error::Format(format!("unknown cloud flags {flags:#x}")));
    }
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Format("point count overflows".to_string()))?;
    if n.checked_mul(24).is_none_or(|b| b > bytes.len()) {
        return Err(Error::Format(format!("point count {n} exceeds file size")));
    }
    let points = r.columns(n)?.into_iter().map(Point3::from).collect();
    let mut cloud = PointCloud::new(points);
    if flags & SENSOR != 0 {
        cloud = cloud.with_sensor_origin(Point3::new(r.f64()?, r.f64()?, r.f64()?));
    }
    if flags & LABELS != 0 {
        let count = r.u32()? as usize;
        let names = (0..count).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let labels = (0..n)
            .map(|_| {
                let i = r.u32()? as usize;
                names.get(i).cloned().ok_or_else(|| Error::Format(format!("label index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        cloud = cloud.with_labels(labels)?;
    }
    if flags & MASK != 0 {
        let mask = r.take(n)?.iter().map(|&b| b != 0).collect();
        cloud = cloud.with_mask(mask)?;
    }
    if flags & NORMALS != 0 {
        cloud = cloud.with_normals(r.columns(n)?)?;
    }
    let flow = if flags & FLOW != 0 {
        let target = r.string()?;
        Some(FlowField::new(r.columns(n)?, target)?)
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((cloud, flow))
}

pub fn write_cloud(path: &Path, cloud: &PointCloud, flow: Option<&FlowField>) -> Result<()> {
    let bytes = encode_cloud(cloud, flow)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: &Path) -> Result<(PointCloud, Option<FlowField>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_cloud(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// One row per point; optional columns appear only when present.
pub fn cloud_to_csv(cloud: &PointCloud, flow: Option<&FlowField>) -> String {
    let mut out = String::from("x,y,z");
    if cloud.link_labels().is_some() {
        out.push_str(",link");
    }
    if cloud.part_mask().is_some() {
        out.push_str(",mask");
    }
    if cloud.normals().is_some() {
        out.push_str(",nx,ny,nz");
    }
    if flow.is_some() {
        out.push_str(",fx,fy,fz");
    }
    out.push('\n');
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{},{},{}", p.x, p.y, p.z);
        if let Some(l) = cloud.link_labels() {
            let _ = write!(out, ",{}", csv_field(&l[i]));
        }
        if let Some(m) = cloud.part_mask() {
            let _ = write!(out, ",{}", m[i] as u8);
        }
        if let Some(n) = cloud.normals() {
            let _ = write!(out, ",{},{},{}", n[i].x, n[i].y, n[i].z);
        }
        if let Some(f) = flow {
            let v = f.vectors()[i];
            let _ = write!(out, ",{},{},{}", v.x, v.y, v.z);
        }
        out.push('\n');
    }
    out
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

fn put_columns(out: &mut Vec<u8>, v: &[Vector3<f64>]) {
    for axis in 0..3 {
        for p in v {
            out.extend_from_slice(&p[axis].to_le_bytes());
        }
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated cloud file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".to_string()))
    }

    fn columns(&mut self, n: usize) -> Result<Vec<Vector3<f64>>> {
        let mut v = vec![Vector3::zeros(); n];
        for axis in 0..3 {
            for p in v.iter_mut() {
                p[axis] = self.f64()?;
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (PointCloud, FlowField) {
        let pts = vec![Point3::new(0.1, 0.2, 0.3), Point3::new(-1.0, 1e-300, 7.5), Point3::new(0.0, -0.0, 2.0)];
        let cloud = PointCloud::new(pts)
            .with_labels(vec!["body".into(), "door".into(), "body".into()])
            .unwrap()
            .with_mask(vec![false, true, false])
            .unwrap()
            .with_normals(vec![Vector3::x(), Vector3::y(), -Vector3::z()])
            .unwrap()
            .with_sensor_origin(Point3::new(1.0, 2.0, 3.0));
        let flow = FlowField::new(vec![Vector3::zeros(), Vector3::new(0.0, 1.0, 0.0), Vector3::zeros()], "hinge").unwrap();
        (cloud, flow)
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let (cloud, flow) = sample();
        let bytes = encode_cloud(&cloud, Some(&flow)).unwrap();
        let (c2, f2) = decode_cloud(&bytes).unwrap();
        assert_eq!(c2, cloud);
        assert_eq!(f2.unwrap(), flow);

        let bare = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)]);
        let (c3, f3) = decode_cloud(&encode_cloud(&bare, None).unwrap()).unwrap();
        assert_eq!(c3, bare);
        assert!(f3.is_none());
        assert_eq!(encode_cloud(&bare, None).unwrap().len(), 24 + 24);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let (cloud, flow) = sample();
        let bytes = encode_cloud(&cloud, Some(&flow)).unwrap();
        assert!(decode_cloud(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_cloud(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_cloud(&bad).is_err());
        let mut huge = bytes;
        huge[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_cloud(&huge).is_err());
    }

    #[test]
    fn csv_has_optional_columns() {
        let (cloud, flow) = sample();
        let csv = cloud_to_csv(&cloud, Some(&flow));
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,y,z,link,mask,nx,ny,nz,fx,fy,fz"));
        assert_eq!(lines.next(), Some("0.1,0.2,0.3,body,0,1,0,0,0,0,0"));
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
