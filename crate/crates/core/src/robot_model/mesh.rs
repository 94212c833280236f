//! Vertex bounds of OBJ and STL meshes. Only the extents are needed since
//! collision meshes degrade to their bounding boxes.

use std::io;
use std::path::Path;

use nalgebra::Vector3;

type Bounds = (Vector3<f64>, Vector3<f64>);

pub(super) fn load_bounds(path: &Path) -> io::Result<Bounds> {
    let bytes = std::fs::read(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let bounds = match ext.as_deref() {
        Some("obj") => obj_bounds(&String::from_utf8_lossy(&bytes)),
        Some("stl") => stl_bounds(&bytes),
        _ => None,
    };
    bounds.ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "no readable vertices"))
}

fn accumulate(points: impl Iterator<Item = Vector3<f64>>) -> Option<Bounds> {
    points.fold(None, |acc, p| match acc {
        None => Some((p, p)),
        Some((lo, hi)) => Some((lo.inf(&p), hi.sup(&p))),
    })
}

fn parse_xyz<'a>(mut it: impl Iterator<Item = &'a str>) -> Option<Vector3<f64>> {
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    let z = it.next()?.parse().ok()?;
    Some(Vector3::new(x, y, z))
}

fn obj_bounds(text: &str) -> Option<Bounds> {
    accumulate(text.lines().filter_map(|line| {
        let mut it = line.split_whitespace();
        (it.next()? == "v").then_some(())?;
        parse_xyz(it)
    }))
}

fn stl_bounds(bytes: &[u8]) -> Option<Bounds> {
    // Binary STL: 80-byte header, u32 triangle count, 50 bytes per triangle.
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().ok()?) as usize;
        if bytes.len() == 84 + count * 50 {
            let read = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
            return accumulate((0..count).flat_map(|t| {
                let base = 84 + t * 50 + 12;
                (0..3).map(move |v| {
                    let o = base + v * 12;
                    Vector3::new(read(o), read(o + 4), read(o + 8))
                })
            }));
        }
    }
    let text = std::str::from_utf8(bytes).ok()?;
    accumulate(text.lines().filter_map(|line| {
        let mut it = line.split_whitespace();
        (it.next()? == "vertex").then_some(())?;
        parse_xyz(it)
    }))
}
