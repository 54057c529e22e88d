use std::collections::HashMap;

use super::{SurfaceMesh, Vec3};
use crate::error::{Error, Result};

/// Icosahedron subdivided `refinement_level` times with every vertex
/// projected onto the sphere; 20·4^level panels.
pub fn make_sphere_mesh(radius: f64, refinement_level: u32) -> Result<SurfaceMesh> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let (vertices, triangles) = unit_icosphere(refinement_level);
    SurfaceMesh::new(vertices.into_iter().map(|v| v * radius).collect(), triangles)
}

/// Unit icosphere stretched along the coordinate axes to semi-axes
/// `(a, b, c)`.
pub fn make_ellipsoid_mesh(axes: [f64; 3], refinement_level: u32) -> Result<SurfaceMesh> {
    if axes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "ellipsoid semi-axes must be positive, got {axes:?}"
        )));
    }
    let (vertices, triangles) = unit_icosphere(refinement_level);
    let scaled = vertices
        .into_iter()
        .map(|v| Vec3::new(v.x * axes[0], v.y * axes[1], v.z * axes[2]))
        .collect();
    SurfaceMesh::new(scaled, triangles)
}

fn unit_icosphere(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    (vertices, triangles)
}
