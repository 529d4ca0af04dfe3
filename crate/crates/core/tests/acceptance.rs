//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! the real stdout (bypassing capture) and fails when its criterion does.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use scenestyle::color::rgb_delta_e;
use scenestyle::config::{OptimizerConfig, StyleSpec, StyleWeights, DEFAULT_MERGE_THRESHOLD};
use scenestyle::geometry::{
    fourier_features, laplace_beltrami_basis, segment_adjacency, super_segment, FrequencyMatrix,
    GranularityConfig, PartLabeling,
};
use scenestyle::losses::{
    clip_loss, hist_loss, histogram_distance, soft_color_histogram_vjp, ColorHistogram, MockColors,
    MockOracleBackend, MockTable, BINS,
};
use scenestyle::partdiscovery::{
    discover_parts, merge_segments, DiscoveryConfig, SegmentColorTable,
};
use scenestyle::pipeline::{Pipeline, PipelineConfig};
use scenestyle::render::camera::orbit_camera;
use scenestyle::render::{
    rasterize_vertex_colors, ObjectCameraConfig, Paint, RenderSettings, Shading, Surface,
};
use scenestyle::scene::validate_scene;
use scenestyle::stylize::detail::{
    compose_channel, eval_final_colors, train_lnsf, ComposeMode, DetailConfig, ObjectGeometry,
};
use scenestyle::stylize::structure::{
    render_structure, retrieve_structure_textures, structure_camera, structure_render_settings,
};
use scenestyle::stylize::{
    assign_base_colors, BaseColorConfig, BaseColorTable, FieldSpec, Lnsf, Texture,
    DEFAULT_CANDIDATES,
};
use scenestyle::synthetic::{
    cube, icosphere, part_suite, toy_library, toy_mock_table, toy_scene, write_toy_project,
    TOY_TARGET_TEXTURES,
};
use scenestyle::{Raster, TriangleMesh, Vec3};

/// Runs one criterion, prints its verdict and re-raises any failure.
fn criterion(n: usize, budget: Duration, body: impl FnOnce() -> String) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let line = match &outcome {
        Ok(detail) if elapsed <= budget => format!("criterion {n}: PASS ({elapsed:.1?}) {detail}"),
        Ok(detail) => {
            format!("criterion {n}: FAIL ({elapsed:.1?} over the {budget:?} budget) {detail}")
        }
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            format!("criterion {n}: FAIL ({elapsed:.1?}) {msg}")
        }
    };
    let _ = writeln!(std::io::stdout().lock(), "{line}");
    match outcome {
        Err(e) => std::panic::resume_unwind(e),
        Ok(_) => assert!(
            elapsed <= budget,
            "criterion {n} took {elapsed:?}, budget {budget:?}"
        ),
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// Smooth, colorful test image with no clipped channels.
fn wavy_image(w: usize, h: usize, phase: f64) -> Raster {
    Raster::from_fn(w, h, |x, y| {
        let t = phase + x as f64 * 0.61 + y as f64 * 1.37;
        [
            0.5 + 0.4 * (t * 1.1).sin(),
            0.5 + 0.4 * (t * 0.7 + 1.0).cos(),
            0.5 + 0.4 * (t * 1.9 + 2.0).sin(),
        ]
    })
}

/// `|a − b| ≤ 1e-4·max(|a|, floor)`.
fn close(fd: f64, an: f64, floor: f64) -> bool {
    (fd - an).abs() <= 1e-4 * fd.abs().max(floor)
}

#[test]
fn criterion_01_loss_fixed_points() {
    criterion(1, secs(5), || {
        let img = wavy_image(16, 16, 0.3);
        let self_loss = hist_loss(&img, &img).unwrap();
        assert!(self_loss < 1e-7, "hist_loss(I, I) = {self_loss}");

        let text = "a wavy pattern";
        let backend = MockOracleBackend::with_colors([(text, img.mean_color())]);
        let clip = clip_loss(&img, text, &backend).unwrap();
        assert!(clip.abs() < 1e-12, "clip_loss = {clip}");

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let mut a = Array3::zeros((3, BINS, BINS));
            let mut b = Array3::zeros((3, BINS, BINS));
            // Random masses on a random split of the bins.
            for v in a.iter_mut().zip(b.iter_mut()) {
                let mass: f64 = rng.random();
                if rng.random_bool(0.1) {
                    if rng.random_bool(0.5) {
                        *v.0 = mass;
                    } else {
                        *v.1 = mass;
                    }
                }
            }
            let (sa, sb) = (a.sum(), b.sum());
            a /= sa;
            b /= sb;
            let d =
                histogram_distance(&ColorHistogram { values: a }, &ColorHistogram { values: b });
            worst = worst.max((d - 2f64.sqrt()).abs());
        }
        assert!(
            worst <= 1e-6,
            "disjoint pairs deviate from sqrt 2 by {worst}"
        );
        format!("self hist {self_loss:.1e}, clip {clip:.1e}, disjoint |d - sqrt2| <= {worst:.1e}")
    });
}

#[test]
fn criterion_02_gradients_match_finite_differences() {
    criterion(2, secs(60), || {
        let eps = 1e-6;

        // (a) Soft histogram, 8x8 image, against a random linear functional.
        let img = wavy_image(8, 8, 1.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coef = Array3::from_shape_simple_fn((3, BINS, BINS), || rng.random::<f64>() - 0.5);
        let f = |im: &Raster| {
            let (h, _) = soft_color_histogram_vjp(im, &coef).unwrap();
            (h.values * &coef).sum()
        };
        let (_, g) = soft_color_histogram_vjp(&img, &coef).unwrap();
        let mut checked_a = 0;
        for p in 0..img.len() {
            for c in 0..3 {
                let (mut plus, mut minus) = (img.clone(), img.clone());
                plus.pixels[p][c] += eps;
                minus.pixels[p][c] -= eps;
                let fd = (f(&plus) - f(&minus)) / (2.0 * eps);
                assert!(
                    close(fd, g[p][c], 1e-6),
                    "histogram pixel {p} ch {c}: {fd} vs {}",
                    g[p][c]
                );
                checked_a += 1;
            }
        }

        // (b) Rasterized pixels against vertex colors, 80-face sphere.
        let mesh = icosphere(1);
        assert!(mesh.face_count() <= 100);
        let mut colors: Vec<[f64; 3]> = (0..mesh.vertex_count())
            .map(|_| {
                [
                    rng.random_range(0.1..0.9),
                    rng.random_range(0.1..0.9),
                    rng.random_range(0.1..0.9),
                ]
            })
            .collect();
        let settings = RenderSettings::square(64).with_shading(Shading::Lambertian);
        let cam = orbit_camera(&ObjectCameraConfig::default(), 20.0, 30.0);
        let w: Vec<[f64; 3]> = (0..64 * 64)
            .map(|_| [rng.random::<f64>(), rng.random(), rng.random()])
            .collect();
        let loss = |cs: &[[f64; 3]]| {
            let out = rasterize_vertex_colors(&mesh, cs, &cam, &settings).unwrap();
            out.image
                .pixels
                .iter()
                .zip(&w)
                .map(|(p, q)| p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
                .sum::<f64>()
        };
        let out = rasterize_vertex_colors(&mesh, &colors, &cam, &settings).unwrap();
        let grad = out.color_grad(
            &[Surface::new(&mesh, Paint::vertex_colors(&mesh, &colors))],
            0,
            &w,
        );
        let mut checked_b = 0;
        for v in 0..mesh.vertex_count() {
            for c in 0..3 {
                let base = colors[v][c];
                colors[v][c] = base + eps;
                let lp = loss(&colors);
                colors[v][c] = base - eps;
                let lm = loss(&colors);
                colors[v][c] = base;
                let fd = (lp - lm) / (2.0 * eps);
                assert!(
                    close(fd, grad[v][c], 1e-6),
                    "vertex {v} ch {c}: {fd} vs {}",
                    grad[v][c]
                );
                checked_b += 1;
            }
        }

        // (c) Final colors against field parameters, 12-face cube.
        let mesh = cube(1.0);
        let labels: Vec<usize> = (0..12).map(|f| f / 6).collect();
        let geom = ObjectGeometry::build(&mesh, &PartLabeling::compact(&labels).unwrap(), 3, None)
            .unwrap();
        let mut base = BaseColorTable::new();
        base.insert("box", vec![[0.5, 0.45, 0.55], [0.4, 0.6, 0.5]])
            .unwrap();
        let mut field = Lnsf::new(FieldSpec::color(2, 5)).unwrap();
        // A nonzero output layer so every parameter receives gradient.
        let normal = Normal::new(0.0, 0.05).unwrap();
        let last = field.tensors().len() - 2;
        for x in field.tensors_mut()[last].iter_mut() {
            *x = normal.sample(&mut rng);
        }
        let alpha = 0.3;
        let nv = geom.mesh.vertex_count();
        let coef = Array2::from_shape_fn((nv, 3), |(v, k)| ((v * 3 + k) as f64 * 0.71).sin());
        let objective = |f: &Lnsf| {
            let cs = eval_final_colors(f, &geom, &base, "box", alpha, ComposeMode::Eq5).unwrap();
            cs.iter()
                .enumerate()
                .map(|(v, c)| (0..3).map(|k| c[k] * coef[(v, k)]).sum::<f64>())
                .sum::<f64>()
        };
        let cache = field.forward(&geom.inputs).unwrap();
        let vb = geom.vertex_base(&base, "box").unwrap();
        let grad_out = Array2::from_shape_fn((nv, 3), |(v, k)| {
            coef[(v, k)]
                * compose_channel(vb[v][k], cache.output()[(v, k)], alpha, ComposeMode::Eq5).1
        });
        let grad = field.backward(&cache, &grad_out);
        let flat: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.to_vec()).collect();
        let mut checked_c = 0;
        for t in 0..flat.len() {
            let len = flat[t].len();
            for _ in 0..4 {
                let i = rng.random_range(0..len);
                let mut a = field.clone();
                a.tensors_mut()[t][i] += eps;
                let mut b = field.clone();
                b.tensors_mut()[t][i] -= eps;
                let fd = (objective(&a) - objective(&b)) / (2.0 * eps);
                assert!(
                    close(fd, flat[t][i], 1e-6),
                    "tensor {t}[{i}]: {fd} vs {}",
                    flat[t][i]
                );
                checked_c += 1;
            }
        }
        format!("histogram {checked_a}, raster {checked_b}, field {checked_c} partials within 1e-4 relative")
    });
}

#[test]
fn criterion_03_spectral_basis() {
    criterion(3, secs(120), || {
        let sphere = icosphere(4);
        assert_eq!(sphere.vertex_count(), 2562);
        let basis = laplace_beltrami_basis(&sphere, 8).unwrap();
        let l = basis.eigenvalues();
        assert!(l[0].abs() < 1e-5, "lambda0 = {}", l[0]);
        let f0 = basis.eigenfunction(0);
        let (lo, hi) = f0
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(
            hi - lo <= 1e-6 * hi.abs().max(lo.abs()),
            "first eigenfunction spans [{lo}, {hi}]"
        );
        let dev = basis.gram_deviation();
        assert!(dev < 1e-4, "Gram deviation {dev}");
        let rel = (l[1] - 2.0).abs() / 2.0;
        assert!(rel < 0.05, "lambda1 = {} ({:.2}% off)", l[1], 100.0 * rel);
        format!(
            "lambda0 {:.1e}, Gram deviation {dev:.1e}, lambda1 {:.6} ({:.3}% from 2)",
            l[0],
            l[1],
            100.0 * rel
        )
    });
}

#[test]
fn criterion_04_part_discovery_matches_ground_truth() {
    criterion(4, secs(600), || {
        let suite = part_suite();
        assert_eq!(suite.len(), 10);
        let cfg = DiscoveryConfig::default();
        let mut report = Vec::new();
        let mut failures = Vec::new();
        for m in &suite {
            let table: MockTable =
                [(m.name.clone(), MockColors::PerTag(m.materials.clone()))].into();
            let backend = MockOracleBackend::new(&table).unwrap();
            let d = discover_parts(&m.mesh, &m.name, &backend, &cfg).unwrap();
            let exact = d.labeling == PartLabeling::compact(&m.ground_truth).unwrap();
            if !exact || d.round_count() > 3 {
                failures.push(format!(
                    "{}: {} parts vs {} expected, {} rounds",
                    m.name,
                    d.labeling.segment_count(),
                    m.materials.len(),
                    d.round_count()
                ));
            }
            report.push(format!("{}:{}", m.name, d.round_count()));
        }
        assert!(failures.is_empty(), "{}", failures.join("; "));
        format!("10/10 exact; rounds {}", report.join(" "))
    });
}

/// Components of `graph` joined only by edges between equal colors.
fn equal_color_components(
    labeling: &PartLabeling,
    edges: &[(usize, usize)],
    colors: &[[f64; 3]],
) -> PartLabeling {
    let k = colors.len();
    let mut comp: Vec<usize> = (0..k).collect();
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            if colors[a] == colors[b] && comp[a] != comp[b] {
                let m = comp[a].min(comp[b]);
                comp[a] = m;
                comp[b] = m;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let raw: Vec<usize> = labeling.labels().iter().map(|&s| comp[s]).collect();
    PartLabeling::compact(&raw).unwrap()
}

#[test]
fn criterion_05_merge_semantics() {
    criterion(5, secs(30), || {
        let lambda = DEFAULT_MERGE_THRESHOLD;
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        // Two faces sharing an edge.
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
            .map(|[x, y]| Vec3::new(x, y, 0.0))
            .to_vec();
        let pair = TriangleMesh::new(v, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        let two = PartLabeling::new(vec![0, 1]).unwrap();
        let g = segment_adjacency(&pair, &two).unwrap();
        let random_color = |rng: &mut ChaCha8Rng| [rng.random::<f64>(), rng.random(), rng.random()];
        for _ in 0..500 {
            let c = random_color(&mut rng);
            let same = SegmentColorTable::new(vec![c, c]).unwrap();
            assert_eq!(
                merge_segments(&two, &g, &same, lambda)
                    .unwrap()
                    .segment_count(),
                1,
                "{c:?} twice"
            );
            let far = loop {
                let d = random_color(&mut rng);
                if rgb_delta_e(c, d).unwrap() >= 2.0 * lambda {
                    break d;
                }
            };
            let apart = SegmentColorTable::new(vec![c, far]).unwrap();
            assert_eq!(
                merge_segments(&two, &g, &apart, lambda)
                    .unwrap()
                    .segment_count(),
                2,
                "{c:?} vs {far:?}"
            );
        }

        // A super-segmented mesh painted from a palette with pairwise ΔE >= 2λ.
        let palette = [
            [0.9, 0.1, 0.1],
            [0.1, 0.7, 0.2],
            [0.15, 0.2, 0.9],
            [0.95, 0.9, 0.2],
        ];
        for (i, a) in palette.iter().enumerate() {
            for b in &palette[i + 1..] {
                assert!(rgb_delta_e(*a, *b).unwrap() >= 2.0 * lambda);
            }
        }
        let mesh = &part_suite()[5].mesh;
        let initial = super_segment(mesh, &GranularityConfig::default()).unwrap();
        let k = initial.segment_count();
        let colors: Vec<[f64; 3]> = (0..k)
            .map(|_| palette[rng.random_range(0..palette.len())])
            .collect();
        let graph = segment_adjacency(mesh, &initial).unwrap();
        let edges: Vec<(usize, usize)> = graph.edges().collect();
        let expected = equal_color_components(&initial, &edges, &colors);
        let merged = merge_segments(
            &initial,
            &graph,
            &SegmentColorTable::new(colors.clone()).unwrap(),
            lambda,
        )
        .unwrap();
        assert_eq!(merged, expected);

        // Relabeling the segments reorders the edge pass; the result must not move.
        let mut perm: Vec<usize> = (0..k).collect();
        for _ in 0..100 {
            perm.shuffle(&mut rng);
            let lab =
                PartLabeling::new(initial.labels().iter().map(|&s| perm[s]).collect()).unwrap();
            let mut shuffled = vec![[0.0; 3]; k];
            for s in 0..k {
                shuffled[perm[s]] = colors[s];
            }
            let g = segment_adjacency(mesh, &lab).unwrap();
            let m = merge_segments(&lab, &g, &SegmentColorTable::new(shuffled).unwrap(), lambda)
                .unwrap();
            assert_eq!(m, expected, "shuffle changed the merge");
        }
        format!(
            "500 exact pairs merged, 500 far pairs kept, {k} segments -> {} parts stable over 100 shuffles",
            expected.segment_count()
        )
    });
}

#[test]
fn criterion_06_structure_retrieval_argmin() {
    criterion(6, secs(120), || {
        let scene = validate_scene(toy_scene()).unwrap();
        let lib = toy_library();
        assert_eq!(lib.len(), 8);
        let pick: Vec<&Texture> = TOY_TARGET_TEXTURES
            .iter()
            .map(|id| lib.get(id).unwrap())
            .collect();
        let camera = structure_camera(scene.structure()).unwrap();
        let target = render_structure(
            scene.structure(),
            &pick,
            &camera,
            &structure_render_settings(),
        )
        .unwrap()
        .image;
        let backends = [
            ("empty table", MockOracleBackend::with_colors([])),
            (
                "toy table",
                MockOracleBackend::new(&toy_mock_table()).unwrap(),
            ),
        ];
        let mut notes = Vec::new();
        for (name, backend) in &backends {
            for lambda1 in [0.0, 0.2] {
                let mut rng = ChaCha8Rng::seed_from_u64(6);
                let a = retrieve_structure_textures(
                    scene.structure(),
                    &scene.description().structure_prompt,
                    &lib,
                    &target,
                    lambda1,
                    backend,
                    DEFAULT_CANDIDATES,
                    &mut rng,
                )
                .unwrap();
                let winner: Vec<&str> = a.candidates[a.winner]
                    .textures
                    .iter()
                    .map(String::as_str)
                    .collect();
                assert_eq!(winner, TOY_TARGET_TEXTURES, "{name}, lambda1 {lambda1}");
                assert!(a.candidates.iter().all(|c| a.winning_score() <= c.score));
                notes.push(format!(
                    "{name} l1={lambda1} score {:.4} over {} candidates",
                    a.winning_score(),
                    a.candidates.len()
                ));
            }
        }
        format!("target wins: {}", notes.join(", "))
    });
}

#[test]
fn criterion_07_base_color_convergence() {
    criterion(7, secs(180), || {
        let scene = validate_scene(toy_scene()).unwrap();
        let labelings: Vec<PartLabeling> = scene
            .objects()
            .iter()
            .map(|o| {
                let n = o.mesh.face_count();
                PartLabeling::compact(&(0..n).map(|f| usize::from(f >= n / 2)).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        // Adam moves each channel by at most about the step size, and the
        // schedule sums to ~0.13 over 300 steps, so targets lie near gray.
        let targets = [
            ("chair0", "chair", [0.58, 0.47, 0.44]),
            ("table0", "table", [0.44, 0.54, 0.5]),
        ];
        let backend = MockOracleBackend::with_colors(targets.iter().map(|t| (t.1, t.2)));
        let mut style = StyleSpec::new(Raster::filled(8, 8, [0.5; 3]), "").unwrap();
        style.weights = StyleWeights {
            lambda3: 0.0,
            hist_weight: 0.0,
            ..StyleWeights::default()
        };
        let prompts: Vec<String> = scene.objects().iter().map(|o| o.text()).collect();
        let opt = OptimizerConfig::default();
        assert_eq!(
            (
                opt.initial_lr,
                opt.decay_factor,
                opt.decay_every,
                opt.iterations
            ),
            (5e-4, 0.9, 100, 300)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let run = assign_base_colors(
            &scene,
            &labelings,
            &style,
            &prompts,
            &[],
            &backend,
            &opt,
            &BaseColorConfig::default(),
            &mut rng,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for (id, _, target) in targets {
            for &c in run.table.object(id).unwrap() {
                worst = worst.max(rgb_delta_e(c, target).unwrap());
            }
        }
        assert!(worst < 2.0, "worst part is {worst:.3} ΔE76 from its target");
        format!(
            "{} steps, worst part {worst:.3} ΔE76 from target",
            run.steps.len()
        )
    });
}

#[test]
fn criterion_08_zero_field_identity() {
    criterion(8, secs(120), || {
        let mesh = icosphere(2);
        let labels: Vec<usize> = (0..mesh.face_count())
            .map(|f| usize::from(mesh.face_centroid(f).z > 0.0))
            .collect();
        let geom = ObjectGeometry::build(&mesh, &PartLabeling::compact(&labels).unwrap(), 0, None)
            .unwrap();
        let mut base = BaseColorTable::new();
        base.insert("ball", vec![[0.4, 0.5, 0.3], [0.6, 0.3, 0.5]])
            .unwrap();
        let vb = geom.vertex_base(&base, "ball").unwrap();
        let bits = |cs: &[[f64; 3]]| cs.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();

        for seed in 0..4 {
            let field = Lnsf::new(FieldSpec::color(2, seed)).unwrap();
            for alpha in [0.0, 0.3, 1.0] {
                let cs = eval_final_colors(&field, &geom, &base, "ball", alpha, ComposeMode::Eq5)
                    .unwrap();
                assert_eq!(
                    bits(&cs),
                    bits(&vb),
                    "fresh field, seed {seed}, alpha {alpha}"
                );
            }
        }

        let mut style = StyleSpec::new(Raster::filled(4, 4, [0.5; 3]), "").unwrap();
        style.weights.alpha = 0.0;
        let backend = MockOracleBackend::with_colors([("ball", [0.9, 0.1, 0.1])]);
        let mut render = RenderSettings::square(96);
        render.encoder_resolution = 64;
        let cfg = DetailConfig {
            render,
            ..DetailConfig::default()
        };
        let opt = OptimizerConfig::default().with_iterations(20);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = train_lnsf(
            "ball", &geom, &base, "a ball", &style, &backend, &opt, &cfg, &mut rng,
        )
        .unwrap();
        assert_eq!(bits(&t.final_colors), bits(&vb), "alpha 0 after training");
        format!(
            "fresh fields bit-exact for 4 seeds x 3 alphas; alpha 0 bit-exact after {} steps",
            opt.iterations
        )
    });
}

#[test]
fn criterion_09_end_to_end_determinism() {
    criterion(9, secs(900), || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::load(&write_toy_project(dir.path()).unwrap()).unwrap();
        let mut outputs = Vec::new();
        for run in ["first", "second"] {
            let mut c = cfg.clone();
            c.out = dir.path().join(run);
            let mut p = Pipeline::open(c.clone(), false).unwrap();
            p.run(None).unwrap();
            let files: BTreeMap<&str, Vec<u8>> =
                ["base_colors/base_colors.json", "parts/labelings.json"]
                    .into_iter()
                    .map(|f| (f, std::fs::read(c.out.join(f)).unwrap()))
                    .collect();
            outputs.push(files);
        }
        for (f, bytes) in &outputs[0] {
            assert!(*bytes == outputs[1][f], "{f} differs between runs");
        }
        let sizes: Vec<String> = outputs[0]
            .iter()
            .map(|(f, b)| format!("{f} {} B", b.len()))
            .collect();
        format!("two full runs byte-identical: {}", sizes.join(", "))
    });
}

#[test]
fn criterion_10_fourier_feature_norm() {
    criterion(10, secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = FrequencyMatrix::sample(10);
        let points: Vec<Vec3> = (0..100_000)
            .map(|i| {
                // Mostly unit-box points, with a tail of far ones.
                let r = if i % 10 == 0 { 100.0 } else { 1.0 };
                Vec3::new(
                    rng.random_range(-r..r),
                    rng.random_range(-r..r),
                    rng.random_range(-r..r),
                )
            })
            .collect();
        let f = fourier_features(&points, &b).unwrap();
        let worst = f
            .rows()
            .into_iter()
            .map(|row| (row.dot(&row) - 128.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "worst |norm^2 - 128| = {worst}");
        format!("1e5 points, worst |norm^2 - 128| = {worst:.1e}")
    });
}
