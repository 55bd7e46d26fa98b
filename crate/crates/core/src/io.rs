//! ASCII PLY / OBJ writers and 16-bit PGM height-map dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, TriMesh};
use crate::sensing::HeightMap;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: BufWriter<File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

/// Point cloud as ASCII PLY with an integer `touch_id` property (0 = visual).
pub fn write_cloud_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(
        w,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty int touch_id\nend_header\n",
        cloud.len()
    )
    .map_err(io)?;
    for (p, tag) in cloud.iter() {
        writeln!(w, "{:.7} {:.7} {:.7} {}", p.x, p.y, p.z, tag.id()).map_err(io)?;
    }
    finish(path, w)
}

/// Mesh as ASCII PLY; the scalar channel, when present, becomes a `quality` property.
pub fn write_mesh_ply(mesh: &TriMesh, path: &Path) -> Result<()> {
    mesh.validate()?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(
        w,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        mesh.vertices.len()
    )
    .map_err(io)?;
    if mesh.scalars.is_some() {
        writeln!(w, "property float quality").map_err(io)?;
    }
    write!(
        w,
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangles.len()
    )
    .map_err(io)?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(w, "{:.7} {:.7} {:.7}", v.x, v.y, v.z).map_err(io)?;
        if let Some(s) = &mesh.scalars {
            write!(w, " {:.6e}", s[i]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(io)?;
    }
    finish(path, w)
}

/// Mesh as Wavefront OBJ (1-based indices).
pub fn write_mesh_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    mesh.validate()?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for v in &mesh.vertices {
        writeln!(w, "v {:.7} {:.7} {:.7}", v.x, v.y, v.z).map_err(io)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io)?;
    }
    finish(path, w)
}

/// Binary 16-bit PGM (P5, big-endian) with heights in micrometers.
pub fn write_height_map_pgm(m: &HeightMap, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "P5\n{} {}\n65535\n", m.cols(), m.rows()).map_err(io)?;
    for &v in m.values() {
        let um = (v * 1e6).round().clamp(0.0, 65535.0) as u16;
        w.write_all(&um.to_be_bytes()).map_err(io)?;
    }
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Provenance, Vec3};

    #[test]
    fn cloud_ply_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let mut c = PointCloud::new();
        c.push(Vec3::new(0.1, 0.2, 0.3), Provenance::Visual).unwrap();
        c.push(Vec3::new(-0.1, 0.0, 1.0), Provenance::Touch(4)).unwrap();
        write_cloud_ply(&c, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("element vertex 2\n"));
        assert!(text.contains("property int touch_id\n"));
        assert!(text.ends_with("0.1000000 0.2000000 0.3000000 0\n-0.1000000 0.0000000 1.0000000 4\n"));
    }

    #[test]
    fn mesh_ply_and_obj() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = TriMesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            triangles: vec![[0, 1, 2]],
            scalars: Some(vec![0.5, 0.25, 0.0]),
        };
        let ply = dir.path().join("m.ply");
        write_mesh_ply(&mesh, &ply).unwrap();
        let text = std::fs::read_to_string(&ply).unwrap();
        assert!(text.contains("property float quality\nelement face 1\n"));
        assert!(text.contains("1.0000000 0.0000000 0.0000000 2.500000e-1\n"));
        assert!(text.ends_with("3 0 1 2\n"));

        let obj = dir.path().join("m.obj");
        write_mesh_obj(&mesh, &obj).unwrap();
        let text = std::fs::read_to_string(&obj).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.ends_with("f 1 2 3\n"));
    }

    #[test]
    fn pgm_in_micrometers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.pgm");
        let m = HeightMap::new(8, 8, (0..64).map(|i| i as f64 * 1e-5).collect(), Pose::identity()).unwrap();
        write_height_map_pgm(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n8 8\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 128);
        assert_eq!(u16::from_be_bytes([px[2], px[3]]), 10);
        assert_eq!(u16::from_be_bytes([px[126], px[127]]), 630);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_cloud_ply(&PointCloud::new(), Path::new("/nonexistent/dir/x.ply")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
