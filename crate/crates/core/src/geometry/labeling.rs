//! Per-face segment labelings and the segment adjacency graph.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Per-face segment ids covering exactly `0..segment_count`.
///
/// Serializes as a plain JSON array of per-face ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PartLabeling {
    labels: Vec<usize>,
    count: usize,
}

impl TryFrom<Vec<usize>> for PartLabeling {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        PartLabeling::new(labels)
    }
}

impl From<PartLabeling> for Vec<usize> {
    fn from(l: PartLabeling) -> Self {
        l.labels
    }
}

impl PartLabeling {
    /// Accepts labels whose id set is exactly `0..K`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::LabelMismatch("labeling has no faces".into()));
        }
        let count = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; count];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::LabelMismatch(format!(
                "segment id {missing} is unused; ids must cover 0..{count}"
            )));
        }
        Ok(PartLabeling { labels, count })
    }

    /// Renumbers arbitrary ids contiguously in order of first appearance.
    pub fn compact(raw: &[usize]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&r| {
                let next = map.len();
                *map.entry(r).or_insert(next)
            })
            .collect();
        PartLabeling::new(labels)
    }

    /// Every face in one segment.
    pub fn single(face_count: usize) -> Result<Self> {
        PartLabeling::new(vec![0; face_count])
    }

    pub fn segment_count(&self) -> usize {
        self.count
    }

    pub fn face_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn segment_of(&self, face: usize) -> usize {
        self.labels[face]
    }

    /// Face count of each segment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn check_mesh(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.labels.len() != mesh.face_count() {
            return Err(Error::LabelMismatch(format!(
                "{} labels for {} faces",
                self.labels.len(),
                mesh.face_count()
            )));
        }
        Ok(())
    }

    /// Whether every segment's faces form one edge-connected set.
    pub fn is_edge_connected(&self, mesh: &TriangleMesh) -> bool {
        self.split_disconnected(mesh)
            .map(|s| s.count == self.count)
            .unwrap_or(false)
    }

    /// Splits segments into their edge-connected components.
    pub fn split_disconnected(&self, mesh: &TriangleMesh) -> Result<Self> {
        self.check_mesh(mesh)?;
        let adj = mesh.face_neighbors();
        let mut out = vec![usize::MAX; self.labels.len()];
        let mut next = 0;
        for start in 0..self.labels.len() {
            if out[start] != usize::MAX {
                continue;
            }
            out[start] = next;
            let mut stack = vec![start];
            while let Some(f) = stack.pop() {
                for &g in &adj[f] {
                    if out[g] == usize::MAX && self.labels[g] == self.labels[start] {
                        out[g] = next;
                        stack.push(g);
                    }
                }
            }
            next += 1;
        }
        PartLabeling::new(out)
    }

    /// Applies a segment-to-new-id map and renumbers contiguously.
    pub fn relabel(&self, segment_map: &[usize]) -> Result<Self> {
        if segment_map.len() != self.count {
            return Err(Error::LabelMismatch(format!(
                "map has {} entries for {} segments",
                segment_map.len(),
                self.count
            )));
        }
        let raw: Vec<usize> = self.labels.iter().map(|&l| segment_map[l]).collect();
        PartLabeling::compact(&raw)
    }

    /// Majority segment of each vertex's incident faces; ties go to the
    /// smallest id. Isolated vertices get segment 0.
    pub fn vertex_segments(&self, mesh: &TriangleMesh) -> Vec<usize> {
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertex_count()];
        for (f, face) in mesh.faces.iter().enumerate() {
            for &v in face {
                incident[v].push(self.labels[f]);
            }
        }
        incident
            .into_iter()
            .map(|mut segs| {
                segs.sort_unstable();
                let mut best = (0usize, 0usize);
                let mut i = 0;
                while i < segs.len() {
                    let j = segs[i..].iter().take_while(|&&s| s == segs[i]).count();
                    if j > best.1 {
                        best = (segs[i], j);
                    }
                    i += j;
                }
                best.0
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.labels).expect("labels serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let labels: Vec<usize> = serde_json::from_str(text)?;
        PartLabeling::new(labels)
    }
}

/// Undirected graph over segment ids; an edge joins segments sharing a mesh
/// edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentGraph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SegmentGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == node || b == node)
            .count()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            out[a].push(b);
            out[b].push(a);
        }
        out
    }
}

/// Builds the segment adjacency graph of a labeling.
pub fn segment_adjacency(mesh: &TriangleMesh, labeling: &PartLabeling) -> Result<SegmentGraph> {
    labeling.check_mesh(mesh)?;
    let mut edges = BTreeSet::new();
    for faces in mesh.edge_faces().values() {
        for (i, &fa) in faces.iter().enumerate() {
            for &fb in &faces[i + 1..] {
                let (a, b) = (labeling.segment_of(fa), labeling.segment_of(fb));
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    Ok(SegmentGraph {
        node_count: labeling.segment_count(),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn cube_faces_labeling() -> PartLabeling {
        // synthetic::cube lists the two triangles of each side consecutively.
        PartLabeling::new((0..12).map(|f| f / 2).collect()).unwrap()
    }

    #[test]
    fn rejects_gaps_in_ids() {
        assert!(matches!(
            PartLabeling::new(vec![0, 2]),
            Err(Error::LabelMismatch(_))
        ));
        assert!(PartLabeling::new(vec![1, 0, 1]).is_ok());
    }

    #[test]
    fn compact_orders_by_first_appearance() {
        let l = PartLabeling::compact(&[7, 7, 3, 9, 3]).unwrap();
        assert_eq!(l.labels(), &[0, 0, 1, 2, 1]);
    }

    #[test]
    fn json_round_trip() {
        let l = cube_faces_labeling();
        assert_eq!(l.to_json(), "[0,0,1,1,2,2,3,3,4,4,5,5]");
        assert_eq!(PartLabeling::from_json(&l.to_json()).unwrap(), l);
        assert!(PartLabeling::from_json("[0,2]").is_err());
    }

    #[test]
    fn cube_sides_have_degree_four() {
        let cube = synthetic::cube(1.0);
        let g = segment_adjacency(&cube, &cube_faces_labeling()).unwrap();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edge_count(), 12);
        for n in 0..6 {
            assert_eq!(g.degree(n), 4);
        }
    }

    #[test]
    fn single_segment_has_no_edges() {
        let cube = synthetic::cube(1.0);
        let g = segment_adjacency(&cube, &PartLabeling::single(12).unwrap()).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
    }

    #[test]
    fn disjoint_components_are_not_adjacent() {
        let a = synthetic::cube(1.0);
        let mut verts = a.vertices.clone();
        verts.extend(
            a.vertices
                .iter()
                .map(|v| v + crate::Vec3::new(5.0, 0.0, 0.0)),
        );
        let mut faces = a.faces.clone();
        faces.extend(a.faces.iter().map(|f| f.map(|i| i + 8)));
        let two = TriangleMesh::new(verts, faces).unwrap();
        let labels = PartLabeling::new((0..24).map(|f| f / 12).collect()).unwrap();
        let g = segment_adjacency(&two, &labels).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 0));
    }

    #[test]
    fn face_count_mismatch_is_reported() {
        let cube = synthetic::cube(1.0);
        let l = PartLabeling::single(4).unwrap();
        assert!(matches!(
            segment_adjacency(&cube, &l),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn split_disconnected_separates_opposite_sides() {
        let cube = synthetic::cube(1.0);
        // Sides z- and z+ share a label but no edge.
        let raw: Vec<usize> = (0..12).map(|f| if f < 4 { 0 } else { f / 2 }).collect();
        let l = PartLabeling::compact(&raw).unwrap();
        assert!(!l.is_edge_connected(&cube));
        let s = l.split_disconnected(&cube).unwrap();
        assert_eq!(s.segment_count(), 6);
        assert!(s.is_edge_connected(&cube));
    }

    #[test]
    fn vertex_majority_breaks_ties_low() {
        let cube = synthetic::cube(1.0);
        let l = cube_faces_labeling();
        let vs = l.vertex_segments(&cube);
        for (v, &s) in vs.iter().enumerate() {
            let incident: Vec<usize> = cube
                .faces
                .iter()
                .enumerate()
                .filter(|(_, f)| f.contains(&v))
                .map(|(i, _)| l.segment_of(i))
                .collect();
            let count = |x: usize| incident.iter().filter(|&&y| y == x).count();
            let best = incident.iter().map(|&x| count(x)).max().unwrap();
            let expected = *incident
                .iter()
                .filter(|&&x| count(x) == best)
                .min()
                .unwrap();
            assert_eq!(s, expected);
        }
    }
}
