use std::collections::HashMap;

use super::mc_tables::{CORNERS, EDGES, TRIANGLES};
use super::mesh::MIN_TRIANGLE_AREA;
use super::{Aabb, TriMesh, Vec3};
use crate::error::{Error, Result};

/// Extracts the zero level set of `field` over `bounds` on a regular grid.
///
/// Negative values are inside. Vertices on shared cell edges are welded, so
/// neighbouring cells share vertices.
pub fn marching_cubes<F>(field: F, bounds: &Aabb, cells_per_axis: usize) -> Result<TriMesh>
where
    F: Fn(&Vec3) -> f64,
{
    marching_cubes_with_scalar(field, None, bounds, cells_per_axis)
}

/// Same as [`marching_cubes`], filling the vertex scalar channel from `scalar` when given.
pub fn marching_cubes_with_scalar<F>(
    field: F,
    scalar: Option<&dyn Fn(&Vec3) -> f64>,
    bounds: &Aabb,
    cells_per_axis: usize,
) -> Result<TriMesh>
where
    F: Fn(&Vec3) -> f64,
{
    if bounds.is_degenerate() {
        return Err(Error::InvalidArgument("extraction bounds are degenerate".into()));
    }
    if cells_per_axis < 2 {
        return Err(Error::InvalidArgument("cells_per_axis must be at least 2".into()));
    }
    let n = cells_per_axis;
    let nodes = n + 1;
    let step = bounds.extent() / n as f64;
    let node_pos =
        |i: usize, j: usize, k: usize| bounds.min + Vec3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z);
    let node_index = |i: usize, j: usize, k: usize| i + nodes * (j + nodes * k);

    let mut values = vec![0.0; nodes * nodes * nodes];
    for k in 0..nodes {
        for j in 0..nodes {
            for i in 0..nodes {
                let v = field(&node_pos(i, j, k));
                if !v.is_finite() {
                    return Err(Error::NonFiniteField { i, j, k });
                }
                values[node_index(i, j, k)] = v;
            }
        }
    }

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // Keyed by (lower node index, axis).
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let corner = |c: usize| {
                    let [di, dj, dk] = CORNERS[c];
                    (i + di, j + dj, k + dk)
                };
                let mut case = 0usize;
                let mut cv = [0.0; 8];
                for c in 0..8 {
                    let (a, b, d) = corner(c);
                    cv[c] = values[node_index(a, b, d)];
                    if cv[c] < 0.0 {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRIANGLES[case];
                let mut idx = [0u32; 16];
                for (slot, &e) in row.iter().enumerate() {
                    if e < 0 {
                        break;
                    }
                    let [c0, c1] = EDGES[e as usize];
                    let (p0, p1) = (corner(c0), corner(c1));
                    let lower = if (p0.0, p0.1, p0.2) <= (p1.0, p1.1, p1.2) {
                        p0
                    } else {
                        p1
                    };
                    let axis = if p0.0 != p1.0 {
                        0
                    } else if p0.1 != p1.1 {
                        1
                    } else {
                        2
                    };
                    let key = (node_index(lower.0, lower.1, lower.2), axis);
                    idx[slot] = *edge_vertex.entry(key).or_insert_with(|| {
                        let (v0, v1) = (cv[c0], cv[c1]);
                        let t = v0 / (v0 - v1);
                        let a = node_pos(p0.0, p0.1, p0.2);
                        let b = node_pos(p1.0, p1.1, p1.2);
                        vertices.push(a + (b - a) * t);
                        (vertices.len() - 1) as u32
                    });
                }
                for s in (0..15).step_by(3).take_while(|&s| row[s] >= 0) {
                    // Table winding is clockwise seen from outside; flip to counter-clockwise.
                    triangles.push([idx[s], idx[s + 2], idx[s + 1]]);
                }
            }
        }
    }

    let mut mesh = compact(vertices, triangles);
    if let Some(s) = scalar {
        mesh.scalars = Some(mesh.vertices.iter().map(s).collect());
    }
    Ok(mesh)
}

/// Drops degenerate triangles and any vertices left unreferenced.
fn compact(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> TriMesh {
    let mut remap = vec![u32::MAX; vertices.len()];
    let mut out = TriMesh::default();
    for tri in triangles {
        let [a, b, c] = tri.map(|i| vertices[i as usize]);
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            continue;
        }
        if 0.5 * (b - a).cross(&(c - a)).norm() <= MIN_TRIANGLE_AREA {
            continue;
        }
        let mapped = tri.map(|i| {
            let slot = &mut remap[i as usize];
            if *slot == u32::MAX {
                *slot = out.vertices.len() as u32;
                out.vertices.push(vertices[i as usize]);
            }
            *slot
        });
        out.triangles.push(mapped);
    }
    out
}
