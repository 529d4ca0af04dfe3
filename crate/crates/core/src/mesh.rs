//! Triangle meshes and the handful of topological queries the pipeline needs.

use std::collections::HashMap;

use nalgebra::{Matrix4, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Weld distance applied to object meshes before any adjacency query.
pub const WELD_TOLERANCE: f64 = 1e-6;

/// An indexed triangle mesh with per-vertex normals.
///
/// `face_groups` carries optional material-group ids per face (OBJ `usemtl`
/// blocks); they are metadata only and never influence geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Vec<Vec3>,
    pub face_groups: Option<Vec<u32>>,
}

impl TriangleMesh {
    /// Builds a mesh and fills in area-weighted vertex normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mut mesh = TriangleMesh {
            vertices,
            faces,
            normals: Vec::new(),
            face_groups: None,
        };
        mesh.check()?;
        mesh.normals = mesh.area_weighted_normals();
        Ok(mesh)
    }

    pub fn with_face_groups(mut self, groups: Vec<u32>) -> Result<Self> {
        if groups.len() != self.faces.len() {
            return Err(Error::InvalidMesh(format!(
                "{} face groups for {} faces",
                groups.len(),
                self.faces.len()
            )));
        }
        self.face_groups = Some(groups);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Checks index ranges, finiteness and degenerate faces.
    pub fn check(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        let n = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
            }
        }
        let (lo, hi) = self.bounding_box();
        let diag2 = (hi - lo).norm_squared().max(f64::MIN_POSITIVE);
        for (f, face) in self.faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {f} references vertex {bad} but mesh has {n} vertices"
                )));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::InvalidMesh(format!("face {f} repeats a vertex")));
            }
            if self.face_area(f) <= 1e-12 * diag2 {
                return Err(Error::InvalidMesh(format!("face {f} has zero area")));
            }
        }
        if let Some(groups) = &self.face_groups {
            if groups.len() != self.faces.len() {
                return Err(Error::InvalidMesh("face group count mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let n = self.face_cross(f);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn area_weighted_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let n = self.face_cross(f);
            for &v in face {
                acc[v] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Merges vertices closer than `tol`, keeping the first occurrence.
    ///
    /// Returns the welded mesh and the old-to-new vertex map. Normals are
    /// recomputed; faces keep their order so per-face data stays valid.
    pub fn welded(&self, tol: f64) -> Result<(TriangleMesh, Vec<usize>)> {
        let cell = tol.max(f64::MIN_POSITIVE);
        let key = |v: &Vec3| -> [i64; 3] { [0, 1, 2].map(|k| (v[k] / cell).floor() as i64) };
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut kept: Vec<Vec3> = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            let k = key(v);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &j in list {
                                if (kept[j] - v).norm() <= tol {
                                    found = Some(j);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            remap[i] = match found {
                Some(j) => j,
                None => {
                    kept.push(*v);
                    grid.entry(k).or_default().push(kept.len() - 1);
                    kept.len() - 1
                }
            };
        }
        let faces = self.faces.iter().map(|f| f.map(|i| remap[i])).collect();
        let mut mesh = TriangleMesh {
            vertices: kept,
            faces,
            normals: Vec::new(),
            face_groups: self.face_groups.clone(),
        };
        mesh.check()?;
        mesh.normals = mesh.area_weighted_normals();
        Ok((mesh, remap))
    }

    /// Map from undirected edge `(lo, hi)` to the faces that contain it.
    pub fn edge_faces(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (f, face) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
        map
    }

    /// Faces sharing an edge with each face, sorted ascending.
    pub fn face_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.faces.len()];
        for faces in self.edge_faces().values() {
            for &a in faces {
                for &b in faces {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Connected components over shared vertices: (component per vertex, count).
    pub fn vertex_components(&self) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for face in &self.faces {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, face[0]), find(&mut parent, face[k]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut out = vec![0; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            out[v] = label[r];
        }
        (out, count)
    }

    /// Applies an affine transform; normals follow the linear part.
    pub fn transformed(&self, m: &Matrix4<f64>) -> TriangleMesh {
        let lin = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t = Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
        let normal_map = lin.try_inverse().map(|i| i.transpose()).unwrap_or(lin);
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| lin * v + t).collect(),
            faces: self.faces.clone(),
            normals: self
                .normals
                .iter()
                .map(|n| {
                    let m = normal_map * n;
                    let len = m.norm();
                    if len > 0.0 {
                        m / len
                    } else {
                        *n
                    }
                })
                .collect(),
            face_groups: self.face_groups.clone(),
        }
    }

    /// Bytes of vertex and face data, used as a cache key.
    pub fn content_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.vertices.len() * 24 + self.faces.len() * 24);
        for v in &self.vertices {
            for c in v.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                out.extend_from_slice(&(i as u64).to_le_bytes());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_index_and_nan() {
        let verts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(matches!(
            TriangleMesh::new(verts.clone(), vec![[0, 1, 3]]),
            Err(Error::InvalidMesh(_))
        ));
        let mut nan = verts.clone();
        nan[1].x = f64::NAN;
        assert!(matches!(
            TriangleMesh::new(nan, vec![[0, 1, 2]]),
            Err(Error::InvalidMesh(_))
        ));
        let flat = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(
            TriangleMesh::new(flat, vec![[0, 1, 2]]),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn normals_are_unit() {
        let m = quad();
        for n in &m.normals {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn weld_merges_duplicates() {
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 5e-7),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let (w, remap) = m.welded(WELD_TOLERANCE).unwrap();
        assert_eq!(w.vertex_count(), 4);
        assert_eq!(remap, vec![0, 1, 2, 0, 2, 3]);
        assert_eq!(w.edge_faces()[&(0, 2)].len(), 2);
        assert_eq!(w.face_neighbors(), vec![vec![1], vec![0]]);
    }

    #[test]
    fn components_of_disjoint_triangles() {
        let m = TriangleMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::x(),
                Vec3::y(),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(6.0, 0.0, 0.0),
                Vec3::new(5.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let (labels, count) = m.vertex_components();
        assert_eq!(count, 2);
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
    }
}
