//! Wavefront OBJ subset: `v`, `f` (polygons fan-triangulated, `v/vt/vn`
//! references and negative indices accepted) and `o`/`g` object groups.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct ObjObject {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

/// Parses OBJ text into objects with object-local vertex indices. Vertices
/// referenced by an object's faces are copied into it; files without groups
/// yield a single object named `default`.
pub fn parse_obj(text: &str, path: &Path) -> Result<Vec<ObjObject>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {}: {message}", line + 1),
    };
    let mut positions: Vec<Vec3> = Vec::new();
    let mut groups: Vec<(String, Vec<[usize; 3]>)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(ln, format!("bad coordinate `{s}`: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err(ln, "vertex needs three coordinates".into()));
                }
                if c.iter().any(|x| !x.is_finite()) {
                    return Err(err(ln, "non-finite vertex coordinate".into()));
                }
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let s = tok.split('/').next().unwrap_or("");
                        let i: i64 = s.parse().map_err(|e| err(ln, format!("bad face index `{tok}`: {e}")))?;
                        let n = positions.len() as i64;
                        let k = if i > 0 { i - 1 } else { n + i };
                        if i == 0 || k < 0 || k >= n {
                            return Err(err(ln, format!("face index {i} out of range")));
                        }
                        Ok(k as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err(ln, "face needs at least three vertices".into()));
                }
                if groups.is_empty() {
                    groups.push(("default".into(), Vec::new()));
                }
                let tris = &mut groups.last_mut().expect("non-empty").1;
                for k in 1..idx.len() - 1 {
                    tris.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            Some("o") | Some("g") => {
                let name = it.collect::<Vec<_>>().join(" ");
                groups.push((if name.is_empty() { "default".into() } else { name }, Vec::new()));
            }
            _ => {}
        }
    }
    let objects = groups
        .into_iter()
        .filter(|(_, t)| !t.is_empty())
        .map(|(name, tris)| {
            let mut map = vec![usize::MAX; positions.len()];
            let mut vertices = Vec::new();
            let triangles = tris
                .iter()
                .map(|t| {
                    t.map(|i| {
                        if map[i] == usize::MAX {
                            map[i] = vertices.len();
                            vertices.push(positions[i]);
                        }
                        map[i]
                    })
                })
                .collect();
            ObjObject { name, vertices, triangles }
        })
        .collect();
    Ok(objects)
}

pub fn read_obj(path: &Path) -> Result<Vec<ObjObject>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

/// All faces of a file as one mesh.
pub fn read_obj_merged(path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for o in read_obj(path)? {
        let base = vertices.len();
        vertices.extend(o.vertices);
        triangles.extend(o.triangles.iter().map(|t| t.map(|i| i + base)));
    }
    if triangles.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "no faces".into(),
        });
    }
    Ok((vertices, triangles))
}

/// One `o` group per object; floats use shortest round-trip formatting.
pub fn format_obj(objects: &[ObjObject]) -> String {
    let mut s = String::new();
    let mut base = 1;
    for o in objects {
        let _ = writeln!(s, "o {}", o.name);
        for v in &o.vertices {
            let _ = writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for t in &o.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += o.vertices.len();
    }
    s
}

pub fn write_obj(path: &Path, objects: &[ObjObject]) -> Result<()> {
    std::fs::write(path, format_obj(objects)).map_err(|e| Error::io(path, e))
}
