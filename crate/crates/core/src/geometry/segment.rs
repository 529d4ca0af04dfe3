//! Geometric over-segmentation: dihedral region growing, small-segment
//! absorption and balanced splitting to a target count.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::labeling::PartLabeling;
use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

/// Granularity of the initial over-segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GranularityConfig {
    /// Adjacent faces join while their normals differ by less than this.
    pub angle_deg: f64,
    pub min_segments: usize,
    pub max_segments: usize,
    /// Overrides the default `min(64, faces / 50)` target.
    pub target: Option<usize>,
    /// Lloyd refinement passes when splitting a region.
    pub lloyd_iterations: usize,
}

impl Default for GranularityConfig {
    fn default() -> Self {
        GranularityConfig {
            angle_deg: 25.0,
            min_segments: 1,
            max_segments: 64,
            target: None,
            lloyd_iterations: 6,
        }
    }
}

impl GranularityConfig {
    pub fn with_target(mut self, target: usize) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_min(mut self, min: usize) -> Self {
        self.min_segments = min;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.angle_deg > 0.0 && self.angle_deg < 180.0) {
            return Err(Error::InvalidConfig(
                "angle_deg must lie in (0, 180)".into(),
            ));
        }
        if self.min_segments == 0 || self.min_segments > self.max_segments {
            return Err(Error::InvalidConfig(
                "need 1 <= min_segments <= max_segments".into(),
            ));
        }
        Ok(())
    }

    /// Target segment count for a mesh with `faces` faces.
    pub fn target_for(&self, faces: usize) -> usize {
        let t = self.target.unwrap_or_else(|| (faces / 50).min(64));
        t.clamp(self.min_segments, self.max_segments).min(faces)
    }
}

/// Over-segments a mesh into edge-connected segments whose boundaries follow
/// dihedral feature lines.
pub fn super_segment(mesh: &TriangleMesh, params: &GranularityConfig) -> Result<PartLabeling> {
    params.check()?;
    let nf = mesh.face_count();
    if nf < params.min_segments {
        return Err(Error::SegmentationFailure(format!(
            "{nf} faces cannot form {} segments",
            params.min_segments
        )));
    }
    let target = params.target_for(nf);
    let adj = mesh.face_neighbors();
    let normals: Vec<Vec3> = (0..nf).map(|f| mesh.face_normal(f)).collect();
    let centroids: Vec<Vec3> = (0..nf).map(|f| mesh.face_centroid(f)).collect();

    let cos_limit = params.angle_deg.to_radians().cos();
    let mut regions = grow_regions(&adj, |a, b| normals[a].dot(&normals[b]) > cos_limit);

    let small = (nf as f64 / target as f64 * 0.1).floor() as usize;
    regions = absorb_small(
        &adj,
        &normals,
        regions,
        small,
        target.max(params.min_segments),
    );
    regions = merge_to_max(&adj, &normals, regions, params.max_segments);

    let mut count = regions.iter().max().map_or(0, |m| m + 1);
    if count > params.max_segments {
        return Err(Error::SegmentationFailure(format!(
            "{count} disconnected pieces exceed max_segments {}",
            params.max_segments
        )));
    }
    while count < target {
        let mut sizes = vec![0usize; count];
        for &r in &regions {
            sizes[r] += 1;
        }
        let (largest, &size) = sizes
            .iter()
            .enumerate()
            .max_by_key(|&(i, s)| (*s, Reverse(i)))
            .expect("nonempty");
        if size < 2 {
            break;
        }
        let faces: Vec<usize> = (0..nf).filter(|&f| regions[f] == largest).collect();
        let half = bisect(&adj, &centroids, &faces, params.lloyd_iterations);
        for (f, side) in faces.iter().zip(half) {
            if side {
                regions[*f] = count;
            }
        }
        count += 1;
    }
    PartLabeling::compact(&regions)?.split_disconnected(mesh)
}

/// Union of faces over adjacent pairs accepted by `join`, numbered by first
/// face.
fn grow_regions(adj: &[Vec<usize>], join: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut label = vec![usize::MAX; adj.len()];
    let mut next = 0;
    for start in 0..adj.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut stack = vec![start];
        while let Some(f) = stack.pop() {
            for &g in &adj[f] {
                if label[g] == usize::MAX && join(f, g) {
                    label[g] = next;
                    stack.push(g);
                }
            }
        }
        next += 1;
    }
    label
}

struct RegionSet {
    size: Vec<usize>,
    normal: Vec<Vec3>,
    /// Shared mesh-edge counts with neighboring regions.
    border: Vec<BTreeMap<usize, usize>>,
    alive: Vec<bool>,
    parent: Vec<usize>,
}

impl RegionSet {
    fn new(adj: &[Vec<usize>], normals: &[Vec3], regions: &[usize]) -> Self {
        let count = regions.iter().max().map_or(0, |m| m + 1);
        let mut size = vec![0; count];
        let mut normal = vec![Vec3::zeros(); count];
        let mut border = vec![BTreeMap::new(); count];
        for (f, &r) in regions.iter().enumerate() {
            size[r] += 1;
            normal[r] += normals[f];
            for &g in &adj[f] {
                let s = regions[g];
                if s != r {
                    *border[r].entry(s).or_insert(0) += 1;
                }
            }
        }
        RegionSet {
            size,
            normal,
            border,
            alive: vec![true; count],
            parent: (0..count).collect(),
        }
    }

    fn live_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    /// Neighbor sharing the longest border, then the most similar normal,
    /// then the smallest id.
    fn best_neighbor(&self, r: usize) -> Option<usize> {
        let n = self.normal[r].normalize();
        self.border[r]
            .iter()
            .max_by(|(ia, la), (ib, lb)| {
                la.cmp(lb)
                    .then_with(|| {
                        let ca = n.dot(&self.normal[**ia].normalize());
                        let cb = n.dot(&self.normal[**ib].normalize());
                        ca.total_cmp(&cb)
                    })
                    .then_with(|| ib.cmp(ia))
            })
            .map(|(i, _)| *i)
    }

    fn merge(&mut self, from: usize, into: usize) {
        self.alive[from] = false;
        self.parent[from] = into;
        self.size[into] += self.size[from];
        let n = self.normal[from];
        self.normal[into] += n;
        let border = std::mem::take(&mut self.border[from]);
        for (nb, len) in border {
            self.border[nb].remove(&from);
            if nb != into {
                *self.border[into].entry(nb).or_insert(0) += len;
                *self.border[nb].entry(into).or_insert(0) += len;
            }
        }
        self.border[into].remove(&from);
    }

    fn resolve(&self, mut r: usize) -> usize {
        while self.parent[r] != r {
            r = self.parent[r];
        }
        r
    }

    /// Final region per face, renumbered by first face.
    fn labels(&self, regions: &[usize]) -> Vec<usize> {
        let mut map = BTreeMap::new();
        regions
            .iter()
            .map(|&r| {
                let next = map.len();
                *map.entry(self.resolve(r)).or_insert(next)
            })
            .collect()
    }

    /// Repeatedly merges the smallest region accepted by `pick` into its best
    /// neighbor until `stop` holds.
    fn merge_smallest(&mut self, mut stop: impl FnMut(&RegionSet, usize) -> bool) {
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..self.size.len())
            .map(|r| Reverse((self.size[r], r)))
            .collect();
        while let Some(Reverse((size, r))) = heap.pop() {
            if !self.alive[r] || self.size[r] != size {
                continue;
            }
            if stop(self, r) {
                break;
            }
            let Some(into) = self.best_neighbor(r) else {
                continue;
            };
            self.merge(r, into);
            heap.push(Reverse((self.size[into], into)));
        }
    }
}

fn absorb_small(
    adj: &[Vec<usize>],
    normals: &[Vec3],
    regions: Vec<usize>,
    small: usize,
    keep_at_least: usize,
) -> Vec<usize> {
    if small == 0 {
        return regions;
    }
    let mut set = RegionSet::new(adj, normals, &regions);
    set.merge_smallest(|s, r| s.size[r] >= small || s.live_count() <= keep_at_least);
    set.labels(&regions)
}

fn merge_to_max(
    adj: &[Vec<usize>],
    normals: &[Vec3],
    regions: Vec<usize>,
    max: usize,
) -> Vec<usize> {
    let mut set = RegionSet::new(adj, normals, &regions);
    if set.live_count() <= max {
        return regions;
    }
    set.merge_smallest(|s, _| s.live_count() <= max);
    set.labels(&regions)
}

/// Splits a connected face set in two: farthest-point seeds, then Lloyd
/// iterations of a two-source geodesic Voronoi partition on the dual graph.
/// Returns `true` for faces of the second part.
fn bisect(adj: &[Vec<usize>], centroids: &[Vec3], faces: &[usize], iterations: usize) -> Vec<bool> {
    let local: BTreeMap<usize, usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let ladj: Vec<Vec<(usize, f64)>> = faces
        .iter()
        .map(|&f| {
            adj[f]
                .iter()
                .filter_map(|g| {
                    local
                        .get(g)
                        .map(|&j| (j, (centroids[f] - centroids[*g]).norm()))
                })
                .collect()
        })
        .collect();
    let far = |seeds: &[usize]| -> usize {
        let (dist, _) = voronoi(&ladj, seeds);
        (0..faces.len())
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("nonempty")
    };
    let a = far(&[0]);
    let b = far(&[a]);
    let mut seeds = [a, b];
    let mut owner = voronoi(&ladj, &seeds).1;
    for _ in 0..iterations {
        let mut next = seeds;
        for (k, seed) in next.iter_mut().enumerate() {
            let members: Vec<usize> = (0..faces.len()).filter(|&i| owner[i] == k).collect();
            let mean =
                members.iter().map(|&i| centroids[faces[i]]).sum::<Vec3>() / members.len() as f64;
            *seed = *members
                .iter()
                .min_by(|&&x, &&y| {
                    (centroids[faces[x]] - mean)
                        .norm_squared()
                        .total_cmp(&(centroids[faces[y]] - mean).norm_squared())
                        .then(x.cmp(&y))
                })
                .expect("nonempty cell");
        }
        if next == seeds || next[0] == next[1] {
            break;
        }
        seeds = next;
        owner = voronoi(&ladj, &seeds).1;
    }
    owner.into_iter().map(|o| o == 1).collect()
}

/// Multi-source Dijkstra; each node inherits its tree parent's source, so
/// every cell is connected.
fn voronoi(adj: &[Vec<(usize, f64)>], seeds: &[usize]) -> (Vec<f64>, Vec<usize>) {
    #[derive(PartialEq)]
    struct Item(f64, usize, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0)
                .then_with(|| o.2.cmp(&self.2))
                .then_with(|| o.1.cmp(&self.1))
        }
    }
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut owner = vec![usize::MAX; adj.len()];
    let mut done = vec![false; adj.len()];
    let mut heap = BinaryHeap::new();
    for (k, &s) in seeds.iter().enumerate() {
        dist[s] = 0.0;
        owner[s] = k;
        heap.push(Item(0.0, s, k));
    }
    while let Some(Item(d, v, k)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        owner[v] = k;
        for &(w, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Item(nd, w, k));
            }
        }
    }
    (dist, owner)
}
