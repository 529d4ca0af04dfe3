//! Midpoint subdivision to a face budget.

use std::collections::HashMap;

use crate::mesh::TriangleMesh;

/// Splits every face into four at edge midpoints until another round would
/// exceed `max_faces`. Returns the mesh and, per new face, its source face.
/// Face groups carry over to children.
pub fn subdivide_to_budget(mesh: &TriangleMesh, max_faces: usize) -> (TriangleMesh, Vec<usize>) {
    let mut current = mesh.clone();
    let mut origin: Vec<usize> = (0..mesh.face_count()).collect();
    while current.face_count() * 4 <= max_faces {
        let mut verts = current.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<crate::Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]) * 0.5);
                verts.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(current.face_count() * 4);
        let mut next_origin = Vec::with_capacity(current.face_count() * 4);
        for (f, &[a, b, c]) in current.faces.iter().enumerate() {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            next_origin.extend([origin[f]; 4]);
        }
        let groups = current
            .face_groups
            .as_ref()
            .map(|g| g.iter().flat_map(|&x| [x; 4]).collect::<Vec<u32>>());
        let mut next = TriangleMesh::new(verts, faces).expect("subdivision preserves validity");
        next.face_groups = groups;
        current = next;
        origin = next_origin;
    }
    (current, origin)
}
