//! Mesh and report files: Wavefront OBJ, binary little-endian PLY and JSON.
//!
//! Coordinates are written with the shortest decimal form that parses back to
//! the same `f64`, so OBJ round trips are bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::discretize::{BoundaryTag, Mesh};
use crate::{Error, Result};

/// Write vertices and 0-based triangles as OBJ.
pub fn write_obj_to(mut w: impl Write, vertices: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Result<()> {
    for v in vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_obj(path: impl AsRef<Path>, vertices: &[Vector3<f64>], triangles: &[[usize; 3]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_obj_to(&mut w, vertices, triangles)?;
    w.flush()?;
    Ok(())
}

/// Read `v` and triangular `f` records; other records are ignored.
pub fn read_obj_from(r: impl BufRead) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| bad("bad vertex coordinate")))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or(s);
                        head.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1).ok_or_else(|| bad("bad face index"))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(bad("only triangular faces are supported"));
                }
                triangles.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
        return Err(Error::Parse(format!("face {t:?} refers to a missing vertex")));
    }
    Ok((vertices, triangles))
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>)> {
    read_obj_from(BufReader::new(File::open(path)?))
}

/// Binary little-endian PLY with double vertex coordinates, an optional
/// per-vertex scalar named `h`, and `uchar`/`int` face lists.
pub fn write_ply_to(
    mut w: impl Write,
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    scalar: Option<&[f64]>,
) -> Result<()> {
    if let Some(s) = scalar {
        if s.len() != vertices.len() {
            return Err(Error::InvalidParameter(format!("{} scalars for {} vertices", s.len(), vertices.len())));
        }
    }
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", vertices.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property double {axis}")?;
    }
    if scalar.is_some() {
        writeln!(w, "property double h")?;
    }
    writeln!(w, "element face {}", triangles.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, v) in vertices.iter().enumerate() {
        for c in [v.x, v.y, v.z] {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(s) = scalar {
            w.write_all(&s[i].to_le_bytes())?;
        }
    }
    for t in triangles {
        w.write_all(&[3u8])?;
        for &i in t {
            let i = i32::try_from(i).map_err(|_| Error::InvalidParameter(format!("vertex index {i} too large for PLY")))?;
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_ply(
    path: impl AsRef<Path>,
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    scalar: Option<&[f64]>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply_to(&mut w, vertices, triangles, scalar)?;
    w.flush()?;
    Ok(())
}

/// Contents of a PLY file written by [`write_ply_to`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub scalar: Option<Vec<f64>>,
}

/// Read the PLY layout produced by [`write_ply_to`].
pub fn read_ply_from(mut r: impl BufRead) -> Result<PlyData> {
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse("PLY header is not terminated".into()));
        }
        let line = line.trim_end().to_string();
        if line == "end_header" {
            break;
        }
        header.push(line);
    }
    if header.first().map(String::as_str) != Some("ply") || !header.iter().any(|l| l == "format binary_little_endian 1.0") {
        return Err(Error::Parse("not a binary little-endian PLY file".into()));
    }
    let count = |name: &str| -> Result<usize> {
        header
            .iter()
            .find_map(|l| l.strip_prefix(&format!("element {name} ")))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("missing element {name}")))
    };
    let (nv, nf) = (count("vertex")?, count("face")?);
    let has_h = header.iter().any(|l| l == "property double h");
    let mut buf8 = [0u8; 8];
    let mut read_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut buf8)?;
        Ok(f64::from_le_bytes(buf8))
    };
    let mut vertices = Vec::with_capacity(nv);
    let mut scalar = has_h.then(Vec::new);
    for _ in 0..nv {
        let (x, y, z) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
        vertices.push(Vector3::new(x, y, z));
        if let Some(s) = scalar.as_mut() {
            s.push(read_f64(&mut r)?);
        }
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let mut k = [0u8; 1];
        r.read_exact(&mut k)?;
        if k[0] != 3 {
            return Err(Error::Parse(format!("face with {} vertices", k[0])));
        }
        let mut t = [0usize; 3];
        for slot in &mut t {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *slot = usize::try_from(i32::from_le_bytes(b)).map_err(|_| Error::Parse("negative face index".into()))?;
        }
        triangles.push(t);
    }
    Ok(PlyData { vertices, triangles, scalar })
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyData> {
    read_ply_from(BufReader::new(File::open(path)?))
}

/// Mesh data that an OBJ file cannot hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSidecar {
    pub boundary_tag: Vec<BoundaryTag>,
    pub rxz: Vec<usize>,
    pub ryz: Vec<usize>,
    pub phi0: f64,
    pub refinement: u32,
}

/// Path of the JSON sidecar next to an OBJ file.
pub fn sidecar_path(obj: &Path) -> PathBuf {
    obj.with_extension("mesh.json")
}

/// Write a sphere mesh as OBJ plus a JSON sidecar with tags and mirror maps.
pub fn save_mesh(mesh: &Mesh, obj: impl AsRef<Path>) -> Result<()> {
    let obj = obj.as_ref();
    write_obj(obj, &mesh.nodes, &mesh.triangles)?;
    let side = MeshSidecar {
        boundary_tag: mesh.boundary_tag.clone(),
        rxz: mesh.rxz.clone(),
        ryz: mesh.ryz.clone(),
        phi0: mesh.phi0,
        refinement: mesh.refinement,
    };
    write_json(sidecar_path(obj), &side)
}

pub fn load_mesh(obj: impl AsRef<Path>) -> Result<Mesh> {
    let obj = obj.as_ref();
    let (nodes, triangles) = read_obj(obj)?;
    let side: MeshSidecar = read_json(sidecar_path(obj))?;
    let n = nodes.len();
    if side.boundary_tag.len() != n || side.rxz.len() != n || side.ryz.len() != n {
        return Err(Error::Parse(format!("sidecar does not match the {n} OBJ vertices")));
    }
    if side.rxz.iter().chain(&side.ryz).any(|&i| i >= n) {
        return Err(Error::Parse("mirror map refers to a missing vertex".into()));
    }
    Ok(Mesh {
        nodes,
        triangles,
        boundary_tag: side.boundary_tag,
        rxz: side.rxz,
        ryz: side.ryz,
        phi0: side.phi0,
        refinement: side.refinement,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_mesh;
    use proptest::prelude::*;

    #[test]
    fn mesh_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(0.3, 2).unwrap();
        let path = dir.path().join("sphere.obj");
        save_mesh(&mesh, &path).unwrap();
        assert!(sidecar_path(&path).exists());
        let back = load_mesh(&path).unwrap();
        assert_eq!(back, mesh);
        for (a, b) in back.nodes.iter().zip(&mesh.nodes) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits());
            }
        }
    }

    #[test]
    fn ply_header_and_payload() {
        let v = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, -0.5)];
        let t = vec![[0, 1, 2]];
        let mut buf = Vec::new();
        write_ply_to(&mut buf, &v, &t, Some(&[0.1, 0.2, 0.3])).unwrap();
        let text = String::from_utf8_lossy(&buf);
        assert!(text.starts_with("ply\nformat binary_little_endian 1.0\nelement vertex 3\n"));
        let header_len = text.find("end_header\n").unwrap() + "end_header\n".len();
        assert_eq!(buf.len() - header_len, 3 * 4 * 8 + (1 + 3 * 4));
        let back = read_ply_from(&buf[..]).unwrap();
        assert_eq!(back.vertices, v);
        assert_eq!(back.triangles, t);
        assert_eq!(back.scalar.unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn obj_rejects_bad_faces() {
        assert!(read_obj_from("v 0 0 0\nf 1 2 3\n".as_bytes()).is_err());
        assert!(read_obj_from("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\n".as_bytes()).is_err());
        let (v, t) = read_obj_from("# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n".as_bytes()).unwrap();
        assert_eq!((v.len(), t), (3, vec![[0, 1, 2]]));
    }

    proptest! {
        #[test]
        fn obj_coordinates_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite()), y in -1e300f64..1e300, z in -1e-300f64..1e-300) {
            let v = vec![Vector3::new(x, y, z)];
            let mut buf = Vec::new();
            write_obj_to(&mut buf, &v, &[]).unwrap();
            let (back, _) = read_obj_from(&buf[..]).unwrap();
            prop_assert_eq!(back[0].x.to_bits(), x.to_bits());
            prop_assert_eq!(back[0].y.to_bits(), y.to_bits());
            prop_assert_eq!(back[0].z.to_bits(), z.to_bits());
        }
    }
}
