//! Part discovery: color each segment of an over-segmentation against the
//! class prompt, then merge adjacent segments whose colors agree, until the
//! segment count stops falling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::{delta_e76, rgb_to_lab};
use crate::config::{OptimizerConfig, DEFAULT_MERGE_THRESHOLD};
use crate::error::{Error, Result};
use crate::geometry::{
    segment_adjacency, super_segment, GranularityConfig, PartLabeling, SegmentGraph,
};
use crate::losses::{clip_loss_grad, EmbeddingBackend};
use crate::mesh::TriangleMesh;
use crate::optim::Adam;
use crate::render::{
    rasterize, sample_object_camera, ObjectCameraConfig, Paint, RenderSettings, Shading, Surface,
};
use crate::scene::{class_prompt, UnitBox};

pub const INITIAL_COLOR: [f64; 3] = [0.5, 0.5, 0.5];

/// One RGB color per segment id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentColorTable {
    colors: Vec<[f64; 3]>,
}

impl SegmentColorTable {
    pub fn new(colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::OutOfRange(
                "segment colors must lie in [0, 1]".into(),
            ));
        }
        Ok(SegmentColorTable { colors })
    }

    pub fn gray(segments: usize) -> Self {
        SegmentColorTable {
            colors: vec![INITIAL_COLOR; segments],
        }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn get(&self, segment: usize) -> [f64; 3] {
        self.colors[segment]
    }
}

/// How object views are drawn during color optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewSampling {
    pub views_per_step: usize,
    pub resolution: usize,
    pub camera: ObjectCameraConfig,
}

impl Default for ViewSampling {
    fn default() -> Self {
        ViewSampling {
            views_per_step: 5,
            resolution: 128,
            camera: ObjectCameraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// ΔE76 below which adjacent segments merge.
    pub merge_threshold: f64,
    /// Gradient steps per round (L).
    pub iterations: usize,
    pub max_rounds: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub views: ViewSampling,
    pub granularity: GranularityConfig,
}

pub const MOCK_ITERATIONS: usize = 100;
pub const REAL_ITERATIONS: usize = 300;

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            iterations: MOCK_ITERATIONS,
            max_rounds: 10,
            seed: 0,
            learning_rate: 0.03,
            views: ViewSampling::default(),
            granularity: GranularityConfig::default(),
        }
    }
}

impl DiscoveryConfig {
    /// Defaults sized for a pretrained encoder.
    pub fn real() -> Self {
        DiscoveryConfig {
            iterations: REAL_ITERATIONS,
            ..DiscoveryConfig::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.merge_threshold > 0.0 && self.merge_threshold.is_finite()) {
            return Err(Error::InvalidConfig("merge_threshold must be > 0".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidConfig("max_rounds must be >= 1".into()));
        }
        if self.views.views_per_step == 0 {
            return Err(Error::InvalidConfig("views_per_step must be >= 1".into()));
        }
        self.optimizer().check()?;
        self.granularity.check()
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig::default()
            .with_lr(self.learning_rate)
            .with_iterations(self.iterations)
            .with_seed(self.seed)
    }
}

/// [`optimize_segment_colors_with`] under default view sampling.
pub fn optimize_segment_colors(
    mesh: &TriangleMesh,
    labeling: &PartLabeling,
    prompt: &str,
    backend: &dyn EmbeddingBackend,
    opt: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SegmentColorTable> {
    optimize_segment_colors_with(
        mesh,
        labeling,
        prompt,
        backend,
        opt,
        &ViewSampling::default(),
        rng,
    )
}

/// Optimizes free per-segment colors, starting from gray, for
/// `opt.iterations` steps. Each step averages the embedding loss over
/// `views.views_per_step` unshaded views of the mesh in its unit box.
pub fn optimize_segment_colors_with(
    mesh: &TriangleMesh,
    labeling: &PartLabeling,
    prompt: &str,
    backend: &dyn EmbeddingBackend,
    opt: &OptimizerConfig,
    views: &ViewSampling,
    rng: &mut ChaCha8Rng,
) -> Result<SegmentColorTable> {
    opt.check()?;
    labeling.check_mesh(mesh)?;
    if views.views_per_step == 0 {
        return Err(Error::InvalidConfig("views_per_step must be >= 1".into()));
    }
    let unit = mesh.transformed(&UnitBox::of(mesh).matrix());
    let settings = RenderSettings::square(views.resolution).with_shading(Shading::Unshaded);
    let k = labeling.segment_count();
    let mut params: Vec<f64> = INITIAL_COLOR.repeat(k);
    let mut adam = Adam::new(*opt, params.len());
    let scale = 1.0 / views.views_per_step as f64;

    for step in 0..opt.iterations {
        let colors: Vec<[f64; 3]> = params.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let surfaces = [Surface::new(
            &unit,
            Paint::face_classes(labeling.labels(), &colors),
        )];
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for _ in 0..views.views_per_step {
            let view = sample_object_camera(rng, &views.camera);
            let out = rasterize(&surfaces, &view.pose, &settings)?;
            let (l, g_img) = clip_loss_grad(&out.image, prompt, backend)?;
            loss += scale * l;
            for (s, g) in out.color_grad(&surfaces, 0, &g_img).iter().enumerate() {
                for j in 0..3 {
                    grad[3 * s + j] += scale * g[j];
                }
            }
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("segment color loss {loss} for prompt {prompt:?}"),
            });
        }
        adam.step(&mut params, &grad);
        for p in &mut params {
            *p = p.clamp(0.0, 1.0);
        }
    }
    SegmentColorTable::new(params.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Unions every graph edge whose endpoint colors are within `threshold` ΔE76
/// in one pass, then relabels contiguously in first-face order.
pub fn merge_segments(
    labeling: &PartLabeling,
    graph: &SegmentGraph,
    colors: &SegmentColorTable,
    threshold: f64,
) -> Result<PartLabeling> {
    let k = labeling.segment_count();
    if colors.len() != k || graph.node_count() != k {
        return Err(Error::LabelMismatch(format!(
            "{k} segments, {} colors, {} graph nodes",
            colors.len(),
            graph.node_count()
        )));
    }
    let lab = colors
        .colors()
        .iter()
        .map(|&c| rgb_to_lab(c))
        .collect::<Result<Vec<_>>>()?;
    let mut parent: Vec<usize> = (0..k).collect();
    for (a, b) in graph.edges() {
        if delta_e76(lab[a], lab[b]) < threshold {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..k).map(|s| find(&mut parent, s)).collect();
    let raw: Vec<usize> = labeling.labels().iter().map(|&s| roots[s]).collect();
    PartLabeling::compact(&raw)
}

/// One optimize-and-merge round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub segments_before: usize,
    pub segments_after: usize,
    pub colors: SegmentColorTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub initial: PartLabeling,
    pub labeling: PartLabeling,
    /// Color of each final part from the last round (its first face's segment).
    pub part_colors: Vec<[f64; 3]>,
    pub rounds: Vec<RoundRecord>,
}

impl Discovery {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Audit log as JSON lines, one per round.
    pub fn audit_jsonl(&self) -> String {
        self.rounds
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
            .collect()
    }
}

/// Super-segments `mesh` and runs the discovery loop on the result.
pub fn discover_parts(
    mesh: &TriangleMesh,
    class_label: &str,
    backend: &dyn EmbeddingBackend,
    cfg: &DiscoveryConfig,
) -> Result<Discovery> {
    cfg.check()?;
    let initial = super_segment(mesh, &cfg.granularity)?;
    discover_parts_from(mesh, initial, class_label, backend, cfg)
}

/// The discovery loop from a given initial segmentation. Stops once a round
/// leaves the segment count unchanged or after `cfg.max_rounds` rounds.
pub fn discover_parts_from(
    mesh: &TriangleMesh,
    initial: PartLabeling,
    class_label: &str,
    backend: &dyn EmbeddingBackend,
    cfg: &DiscoveryConfig,
) -> Result<Discovery> {
    cfg.check()?;
    initial.check_mesh(mesh)?;
    let prompt = class_prompt(class_label);
    let opt = cfg.optimizer();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = initial.clone();
    let mut rounds = Vec::new();
    let mut last_input = initial.clone();
    for round in 0..cfg.max_rounds {
        let colors = optimize_segment_colors_with(
            mesh, &current, &prompt, backend, &opt, &cfg.views, &mut rng,
        )?;
        let graph = segment_adjacency(mesh, &current)?;
        let merged = merge_segments(&current, &graph, &colors, cfg.merge_threshold)?;
        let (before, after) = (current.segment_count(), merged.segment_count());
        log::debug!("discovery round {round}: {before} -> {after} segments");
        rounds.push(RoundRecord {
            round,
            segments_before: before,
            segments_after: after,
            colors,
        });
        last_input = current;
        current = merged;
        if after == before {
            break;
        }
    }
    let last = &rounds.last().expect("max_rounds >= 1").colors;
    let mut part_colors = vec![None; current.segment_count()];
    for (f, &s) in last_input.labels().iter().enumerate() {
        part_colors[current.segment_of(f)].get_or_insert(last.get(s));
    }
    Ok(Discovery {
        initial,
        part_colors: part_colors
            .into_iter()
            .map(|c| c.unwrap_or(INITIAL_COLOR))
            .collect(),
        labeling: current,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{MockColors, MockOracleBackend, MockTable};
    use crate::synthetic::{cube, part_suite, BLUE, RED};

    fn strip() -> (TriangleMesh, PartLabeling) {
        // Three faces in a row: 0-1 share an edge, 1-2 share an edge.
        let v = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [2.0, 0.0],
            [2.0, 1.0],
        ]
        .map(|[x, y]| crate::Vec3::new(x, y, 0.0))
        .to_vec();
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [1, 3, 2], [1, 4, 3]]).unwrap();
        (mesh, PartLabeling::new(vec![0, 1, 2]).unwrap())
    }

    #[test]
    fn identical_neighbors_merge() {
        let (mesh, lab) = strip();
        let graph = segment_adjacency(&mesh, &lab).unwrap();
        let colors =
            SegmentColorTable::new(vec![[0.2, 0.3, 0.4], [0.2, 0.3, 0.4], [1.0, 0.0, 0.0]])
                .unwrap();
        let merged = merge_segments(&lab, &graph, &colors, 3.0).unwrap();
        assert_eq!(merged.labels(), &[0, 0, 1]);
    }

    #[test]
    fn red_and_green_stay_apart() {
        let (mesh, lab) = strip();
        let graph = segment_adjacency(&mesh, &lab).unwrap();
        let colors =
            SegmentColorTable::new(vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
                .unwrap();
        assert_eq!(
            merge_segments(&lab, &graph, &colors, 3.0).unwrap().labels(),
            &[0, 1, 1]
        );
    }

    #[test]
    fn non_adjacent_equal_colors_stay_apart() {
        let (mesh, lab) = strip();
        let graph = segment_adjacency(&mesh, &lab).unwrap();
        assert!(!graph.contains(0, 2));
        let colors =
            SegmentColorTable::new(vec![[0.1, 0.1, 0.9], [0.9, 0.9, 0.1], [0.1, 0.1, 0.9]])
                .unwrap();
        assert_eq!(
            merge_segments(&lab, &graph, &colors, 3.0)
                .unwrap()
                .segment_count(),
            3
        );
    }

    #[test]
    fn merge_rejects_short_color_table() {
        let (mesh, lab) = strip();
        let graph = segment_adjacency(&mesh, &lab).unwrap();
        let colors = SegmentColorTable::gray(2);
        assert!(matches!(
            merge_segments(&lab, &graph, &colors, 3.0),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn single_segment_cube_turns_red() {
        let mesh = cube(1.0);
        let lab = PartLabeling::single(mesh.face_count()).unwrap();
        let backend = MockOracleBackend::with_colors([("cube", RED)]);
        let opt = OptimizerConfig::default()
            .with_lr(0.01)
            .with_iterations(200);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table =
            optimize_segment_colors(&mesh, &lab, "a cube", &backend, &opt, &mut rng).unwrap();
        assert!(crate::color::rgb_delta_e(table.get(0), RED).unwrap() < 2.0);
    }

    #[test]
    fn zero_iterations_is_rejected() {
        let mesh = cube(1.0);
        let lab = PartLabeling::single(mesh.face_count()).unwrap();
        let backend = MockOracleBackend::with_colors([]);
        let opt = OptimizerConfig::default().with_iterations(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(optimize_segment_colors(&mesh, &lab, "a cube", &backend, &opt, &mut rng).is_err());
    }

    #[test]
    fn color_optimization_is_deterministic() {
        let mesh = cube(1.0);
        let lab = PartLabeling::compact(&(0..12).map(|f| f / 2).collect::<Vec<_>>()).unwrap();
        let backend = MockOracleBackend::with_colors([("cube", [0.2, 0.7, 0.4])]);
        let opt = OptimizerConfig::default().with_lr(0.01).with_iterations(20);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            optimize_segment_colors(&mesh, &lab, "a cube", &backend, &opt, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_segment_input_takes_one_round() {
        let mesh = cube(1.0);
        let lab = PartLabeling::single(mesh.face_count()).unwrap();
        let backend = MockOracleBackend::with_colors([]);
        let cfg = DiscoveryConfig {
            iterations: 5,
            ..DiscoveryConfig::default()
        };
        let d = discover_parts_from(&mesh, lab.clone(), "cube", &backend, &cfg).unwrap();
        assert_eq!(d.labeling, lab);
        assert_eq!(d.round_count(), 1);
    }

    #[test]
    fn two_material_chair_yields_two_parts() {
        let chair = part_suite()
            .into_iter()
            .find(|m| m.name == "chair")
            .unwrap();
        assert_eq!(chair.materials, vec![RED, BLUE]);
        let table: MockTable = [(
            "chair".to_string(),
            MockColors::PerTag(chair.materials.clone()),
        )]
        .into();
        let backend = MockOracleBackend::new(&table).unwrap();
        let cfg = DiscoveryConfig {
            granularity: GranularityConfig::default().with_target(12),
            ..DiscoveryConfig::default()
        };
        let d = discover_parts(&chair.mesh, "chair", &backend, &cfg).unwrap();
        assert_eq!(d.initial.segment_count(), 12);
        assert_eq!(
            d.labeling,
            PartLabeling::compact(&chair.ground_truth).unwrap()
        );
        assert!(d.round_count() <= 3);
        let counts: Vec<usize> = d.rounds.iter().map(|r| r.segments_after).collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]));
        assert!(d.labeling.is_edge_connected(&chair.mesh));
    }
}
