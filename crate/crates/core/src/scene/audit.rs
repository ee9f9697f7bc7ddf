//! Exhaustive inter-body triangle intersection audit.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::obj::{read_obj, ObjObject};
use crate::error::{Error, Result};
use crate::intersect::triangles_intersect;
use crate::math::Vec3;
use crate::mesh::{aabb_of, Aabb};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offense {
    pub body_a: String,
    pub body_b: String,
    pub triangle_a: usize,
    pub triangle_b: usize,
}

/// Every intersecting (or touching) triangle pair between distinct objects.
/// Triangle boxes only skip pairs that cannot touch; the test is exhaustive.
pub fn audit_objects(objects: &[ObjObject]) -> Vec<Offense> {
    let tris: Vec<Vec<([Vec3; 3], Aabb)>> = objects
        .iter()
        .map(|o| {
            o.triangles
                .iter()
                .map(|t| {
                    let p = t.map(|i| o.vertices[i]);
                    (p, aabb_of(&p, 0.0))
                })
                .collect()
        })
        .collect();
    let boxes: Vec<Aabb> = tris
        .iter()
        .map(|ts| {
            ts.iter().fold(Aabb::empty(), |mut b, (_, t)| {
                b.merge(t);
                b
            })
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..objects.len())
        .flat_map(|a| (a + 1..objects.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| boxes[a].overlaps(&boxes[b]))
        .collect();
    pairs
        .par_iter()
        .flat_map_iter(|&(a, b)| {
            let mut out = Vec::new();
            for (i, (ta, ba)) in tris[a].iter().enumerate() {
                if !ba.overlaps(&boxes[b]) {
                    continue;
                }
                for (j, (tb, bb)) in tris[b].iter().enumerate() {
                    if ba.overlaps(bb) && triangles_intersect(ta, tb) {
                        out.push(Offense {
                            body_a: objects[a].name.clone(),
                            body_b: objects[b].name.clone(),
                            triangle_a: i,
                            triangle_b: j,
                        });
                    }
                }
            }
            out
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub frames_checked: usize,
    /// `(frame file, offense)` for every flagged pair.
    pub offenses: Vec<(PathBuf, Offense)>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.offenses.is_empty()
    }
}

/// Frame files of a run directory (`frame_*.obj`), sorted by name.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("frame_") && name.ends_with(".obj") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn audit_intersections(dir: &Path) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    for file in frame_files(dir)? {
        let objects = read_obj(&file)?;
        report.offenses.extend(audit_objects(&objects).into_iter().map(|o| (file.clone(), o)));
        report.frames_checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::box_mesh;

    fn cube_at(name: &str, c: Vec3) -> ObjObject {
        let m = box_mesh(Vec3::repeat(1.0));
        ObjObject {
            name: name.into(),
            vertices: m.vertices.iter().map(|v| v + c).collect(),
            triangles: m.triangles.clone(),
        }
    }

    #[test]
    fn separated_cubes_pass_and_overlap_is_flagged() {
        assert!(audit_objects(&[cube_at("a", Vec3::zeros()), cube_at("b", Vec3::new(1.001, 0.0, 0.0))]).is_empty());
        let bad = audit_objects(&[cube_at("a", Vec3::zeros()), cube_at("b", Vec3::new(0.5, 0.2, 0.1))]);
        assert!(!bad.is_empty());
        assert_eq!(bad[0].body_a, "a");
        assert_eq!(bad[0].body_b, "b");
    }
}
