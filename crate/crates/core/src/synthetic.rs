//! Procedural meshes and scenes with known ground truth, used by the test
//! suites, the CLI's toy assets and the browser demo.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::obj::write_obj;
use crate::io::scene_file::{ObjectEntry, SceneFile, StructureEntry};
use crate::io::write_atomic;
use crate::losses::{MockColors, MockTable};
use crate::mesh::{TriangleMesh, Vec3};
use crate::raster::Raster;
use crate::scene::{
    ElementClass, Placement, SceneDescription, SceneObject, StructureElement,
    DEFAULT_STRUCTURE_PROMPT,
};
use crate::stylize::structure::{render_structure, structure_camera, structure_render_settings};
use crate::stylize::{Texture, TextureEntry, TextureLibrary};

pub const RED: [f64; 3] = [1.0, 0.0, 0.0];
pub const GREEN: [f64; 3] = [0.0, 1.0, 0.0];
pub const BLUE: [f64; 3] = [0.0, 0.0, 1.0];

/// Axis-aligned cube centered at the origin, 8 vertices and 12 faces.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let v: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3], // z-
        [4, 5, 6],
        [5, 7, 6], // z+
        [0, 1, 4],
        [1, 5, 4], // y-
        [2, 6, 3],
        [3, 6, 7], // y+
        [0, 4, 2],
        [2, 4, 6], // x-
        [1, 3, 5],
        [3, 7, 5], // x+
    ];
    TriangleMesh::new(v, faces).expect("cube is valid")
}

/// Unit icosphere; `level` 4 gives 2562 vertices.
pub fn icosphere(level: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts, faces).expect("icosphere is valid")
}

/// Regular grid on `[x0,x1]×[y0,y1]` with height `z(x, y)`, `n×m` cells.
pub fn height_grid(
    n: usize,
    m: usize,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    z: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    let mut verts = Vec::with_capacity((n + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=n {
            let x = x0 + (x1 - x0) * i as f64 / n as f64;
            let y = y0 + (y1 - y0) * j as f64 / m as f64;
            verts.push(Vec3::new(x, y, z(x, y)));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * m);
    for j in 0..m {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(verts, faces).expect("grid is valid")
}

/// Vertical wall quad in the xz-plane facing +y, `width` wide and `height` tall.
pub fn wall_quad(width: f64, height: f64) -> TriangleMesh {
    let w = width / 2.0;
    TriangleMesh::new(
        vec![
            Vec3::new(-w, 0.0, 0.0),
            Vec3::new(w, 0.0, 0.0),
            Vec3::new(w, 0.0, height),
            Vec3::new(-w, 0.0, height),
        ],
        vec![[0, 2, 1], [0, 3, 2]],
    )
    .expect("quad is valid")
}

/// Horizontal floor quad `[0,w]×[0,d]` at `z`, facing `up` or down.
pub fn floor_quad(width: f64, depth: f64, z: f64, up: bool) -> TriangleMesh {
    let faces = if up {
        vec![[0, 1, 2], [0, 2, 3]]
    } else {
        vec![[0, 2, 1], [0, 3, 2]]
    };
    TriangleMesh::new(
        vec![
            Vec3::new(0.0, 0.0, z),
            Vec3::new(width, 0.0, z),
            Vec3::new(width, depth, z),
            Vec3::new(0.0, depth, z),
        ],
        faces,
    )
    .expect("quad is valid")
}

/// A mesh whose faces carry material groups, plus the texture-part ground
/// truth implied by them.
#[derive(Debug, Clone)]
pub struct SyntheticPartMesh {
    pub name: String,
    pub mesh: TriangleMesh,
    /// Target color per material group.
    pub materials: Vec<[f64; 3]>,
    /// Ground-truth part per face: connected components of equal material.
    pub ground_truth: Vec<usize>,
}

/// Faceted heightfield over the unit square: `z = g(x) + h(y)` with `g`, `h`
/// piecewise linear, kinking on grid lines. Each rectangle between kinks is
/// planar and takes material `layout(col, row)`.
pub fn faceted_terrace(
    name: &str,
    cells: usize,
    x_breaks: &[usize],
    y_breaks: &[usize],
    slope: f64,
    materials: Vec<[f64; 3]>,
    layout: impl Fn(usize, usize) -> u32,
) -> SyntheticPartMesh {
    let piecewise = |breaks: &[usize]| {
        let breaks = breaks.to_vec();
        move |t: f64| -> f64 {
            // t in [-0.5, 0.5]; slopes alternate sign at each break.
            let mut z = 0.0;
            let mut prev = -0.5;
            let mut s = slope;
            for &b in &breaks {
                let edge = -0.5 + b as f64 / cells as f64;
                if t <= edge {
                    return z + s * (t - prev);
                }
                z += s * (edge - prev);
                prev = edge;
                s = -s;
            }
            z + s * (t - prev)
        }
    };
    let g = piecewise(x_breaks);
    let h = piecewise(y_breaks);
    let mesh = height_grid(cells, cells, (-0.5, 0.5), (-0.5, 0.5), |x, y| g(x) + h(y));
    let band = |k: usize, breaks: &[usize]| breaks.iter().filter(|&&b| k >= b).count();
    let groups: Vec<u32> = (0..mesh.face_count())
        .map(|f| {
            let cell = f / 2;
            let (i, j) = (cell % cells, cell / cells);
            layout(band(i, x_breaks), band(j, y_breaks))
        })
        .collect();
    let mesh = mesh.with_face_groups(groups.clone()).expect("group count");
    let ground_truth = material_components(&mesh, &groups);
    SyntheticPartMesh {
        name: name.to_string(),
        mesh,
        materials,
        ground_truth,
    }
}

/// Connected components of faces with equal group, numbered by first face.
pub fn material_components(mesh: &TriangleMesh, groups: &[u32]) -> Vec<usize> {
    let adj = mesh.face_neighbors();
    let mut label = vec![usize::MAX; mesh.face_count()];
    let mut next = 0;
    for start in 0..mesh.face_count() {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(f) = stack.pop() {
            for &g in &adj[f] {
                if label[g] == usize::MAX && groups[g] == groups[start] {
                    label[g] = next;
                    stack.push(g);
                }
            }
        }
        next += 1;
    }
    label
}

/// Ten terraces with two or three materials each.
pub fn part_suite() -> Vec<SyntheticPartMesh> {
    let two = vec![RED, BLUE];
    let three = vec![RED, BLUE, GREEN];
    vec![
        // 3 columns × 4 rows = 12 planar facets: a "seat" block and "legs".
        faceted_terrace(
            "chair",
            24,
            &[8, 16],
            &[6, 12, 18],
            0.45,
            two.clone(),
            |_, r| u32::from(r < 2),
        ),
        faceted_terrace(
            "table",
            24,
            &[8, 16],
            &[8, 16],
            0.45,
            two.clone(),
            |c, r| u32::from(c == 1 && r == 1),
        ),
        faceted_terrace("bed", 24, &[6, 12, 18], &[12], 0.4, two.clone(), |c, _| {
            u32::from(c == 0)
        }),
        faceted_terrace("lamp", 20, &[10], &[5, 10, 15], 0.5, two.clone(), |c, r| {
            u32::from(r == 3 || (c == 1 && r == 2))
        }),
        faceted_terrace(
            "shelf",
            24,
            &[8, 16],
            &[8, 16],
            0.45,
            three.clone(),
            |c, _| c as u32,
        ),
        faceted_terrace(
            "sofa",
            24,
            &[8, 16],
            &[6, 12, 18],
            0.4,
            three.clone(),
            |c, r| {
                if r == 0 {
                    2
                } else {
                    u32::from(c == 2)
                }
            },
        ),
        faceted_terrace(
            "desk",
            20,
            &[5, 10, 15],
            &[10],
            0.5,
            three.clone(),
            |c, r| match (c, r) {
                (0, _) => 0,
                (3, _) => 1,
                _ => 2,
            },
        ),
        faceted_terrace(
            "cabinet",
            24,
            &[12],
            &[6, 12, 18],
            0.45,
            two.clone(),
            |_, r| u32::from(r % 2 == 1),
        ),
        faceted_terrace("stool", 24, &[8, 16], &[8, 16], 0.45, three, |c, r| {
            if r == 2 {
                2
            } else {
                u32::from(c >= 1)
            }
        }),
        faceted_terrace("bench", 20, &[5, 10, 15], &[5, 10, 15], 0.5, two, |c, r| {
            u32::from(c + r >= 4)
        }),
    ]
}

/// A small room (floor + one back wall) with two terrace objects.
pub fn toy_scene() -> SceneDescription {
    let suite = part_suite();
    let floor = floor_quad(4.0, 4.0, 0.0, true);
    let wall = wall_quad(4.0, 2.5).transformed(&nalgebra::Matrix4::new_translation(&Vec3::new(
        2.0, 4.0, 0.0,
    )));
    // Flip the wall so it faces into the room (-y).
    let wall = TriangleMesh::new(
        wall.vertices.clone(),
        wall.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
    )
    .expect("wall");
    let place = |x: f64, y: f64, s: f64| {
        let mut m = nalgebra::Matrix4::identity() * s;
        m[(3, 3)] = 1.0;
        m[(0, 3)] = x;
        m[(1, 3)] = y;
        m[(2, 3)] = 0.3 * s;
        Placement { matrix: m }
    };
    SceneDescription {
        structure: vec![
            StructureElement::with_planar_uv("floor", ElementClass::Floor, floor),
            StructureElement::with_planar_uv("back_wall", ElementClass::Wall, wall),
        ],
        objects: vec![
            SceneObject {
                id: "chair0".into(),
                class_label: "chair".into(),
                description: None,
                mesh: suite[0].mesh.clone(),
                placement: place(1.2, 2.2, 1.0),
            },
            SceneObject {
                id: "table0".into(),
                class_label: "table".into(),
                description: None,
                mesh: suite[1].mesh.clone(),
                placement: place(2.8, 2.0, 1.2),
            },
        ],
        scene_type: "a bedroom".into(),
        structure_prompt: DEFAULT_STRUCTURE_PROMPT.into(),
    }
}

/// Eight small tileable textures: four floors and four walls.
pub fn toy_library() -> TextureLibrary {
    let solid = |c: [f64; 3]| Raster::filled(32, 32, c);
    let pattern = |a: [f64; 3], b: [f64; 3], pick: fn(usize, usize) -> bool| {
        Raster::from_fn(32, 32, move |x, y| if pick(x, y) { a } else { b })
    };
    let entry = |id: &str, class: ElementClass, image: Raster| Texture {
        entry: TextureEntry {
            id: id.into(),
            path: format!("{id}.png").into(),
            tiling: 1.0,
            classes: vec![class],
        },
        image,
    };
    use ElementClass::{Floor, Wall};
    TextureLibrary::new(vec![
        entry(
            "floor_oak",
            Floor,
            pattern([0.55, 0.38, 0.22], [0.47, 0.31, 0.18], |_, y| {
                (y / 8) % 2 == 0
            }),
        ),
        entry(
            "floor_tile",
            Floor,
            pattern([0.86, 0.85, 0.82], [0.6, 0.6, 0.58], |x, y| {
                (x / 8 + y / 8) % 2 == 0
            }),
        ),
        entry("floor_slate", Floor, solid([0.33, 0.36, 0.41])),
        entry("floor_carpet", Floor, solid([0.55, 0.2, 0.22])),
        entry("wall_cream", Wall, solid([0.92, 0.88, 0.78])),
        entry("wall_sage", Wall, solid([0.6, 0.7, 0.58])),
        entry(
            "wall_stripe",
            Wall,
            pattern([0.8, 0.8, 0.86], [0.66, 0.7, 0.82], |x, _| (x / 4) % 2 == 0),
        ),
        entry(
            "wall_brick",
            Wall,
            pattern([0.86, 0.82, 0.77], [0.64, 0.3, 0.24], |x, y| {
                y % 8 == 0 || (x + if (y / 8) % 2 == 0 { 0 } else { 8 }) % 16 == 0
            }),
        ),
    ])
    .expect("non-empty library")
}

/// Mock prompt colors for the toy scene: two per object class, one for the
/// scene type and one for the structure prompt.
pub fn toy_mock_table() -> MockTable {
    [
        (
            "chair",
            MockColors::PerTag(vec![[0.75, 0.35, 0.25], [0.25, 0.35, 0.7]]),
        ),
        (
            "table",
            MockColors::PerTag(vec![[0.6, 0.45, 0.3], [0.3, 0.55, 0.35]]),
        ),
        ("bedroom", MockColors::One([0.7, 0.55, 0.4])),
        ("room", MockColors::One([0.8, 0.7, 0.55])),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Texture ids of the toy target room, in structure element order.
pub const TOY_TARGET_TEXTURES: [&str; 2] = ["floor_oak", "wall_cream"];

/// Writes the toy scene, its texture library, a target image (the bare room
/// with [`TOY_TARGET_TEXTURES`]), a style file and a mock-backend pipeline
/// config into `dir`. Returns the config path.
pub fn write_toy_project(dir: &Path) -> Result<PathBuf> {
    let scene = toy_scene();
    let library = toy_library();
    std::fs::create_dir_all(dir.join("meshes"))?;
    let mut file = SceneFile {
        scene_type: scene.scene_type.clone(),
        structure_prompt: scene.structure_prompt.clone(),
        structure: Vec::new(),
        objects: Vec::new(),
    };
    for s in &scene.structure {
        let path = PathBuf::from("meshes").join(format!("{}.obj", s.id));
        write_atomic(&dir.join(&path), write_obj(&s.mesh).as_bytes())?;
        file.structure.push(StructureEntry {
            id: s.id.clone(),
            class: s.class,
            mesh: path,
            texture_id: None,
        });
    }
    for o in &scene.objects {
        let path = PathBuf::from("meshes").join(format!("{}.obj", o.class_label));
        write_atomic(&dir.join(&path), write_obj(&o.mesh).as_bytes())?;
        file.objects.push(ObjectEntry {
            id: o.id.clone(),
            mesh: path,
            class_label: o.class_label.clone(),
            description: o.description.clone(),
            placement: Some(o.placement.to_row_major()),
        });
    }
    write_atomic(
        &dir.join("scene.json"),
        serde_json::to_string_pretty(&file)?.as_bytes(),
    )?;
    library.save(&dir.join("textures"))?;

    let targets: Vec<&Texture> = TOY_TARGET_TEXTURES
        .iter()
        .map(|id| library.get(id).expect("toy texture"))
        .collect();
    let camera = structure_camera(&scene.structure)?;
    let target = render_structure(
        &scene.structure,
        &targets,
        &camera,
        &structure_render_settings(),
    )?
    .image;
    target.save_png(&dir.join("target.png"))?;
    let style = serde_json::json!({"target_image": "target.png", "style_text": "warm rustic"});
    write_atomic(
        &dir.join("style.json"),
        serde_json::to_string_pretty(&style)?.as_bytes(),
    )?;

    let config = serde_json::json!({
        "scene": "scene.json",
        "style": "style.json",
        "library": "textures",
        "out": "out",
        "seed": 0,
        "backend": {
            "backend": "mock",
            "mock_table": toy_mock_table()
        },
        "optimizers": {"base_colors": {"initial_lr": 0.01}, "detail": {"iterations": 60}}
    });
    let path = dir.join("pipeline.json");
    write_atomic(&path, serde_json::to_string_pretty(&config)?.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_sizes() {
        assert_eq!(icosphere(0).vertex_count(), 12);
        let s = icosphere(4);
        assert_eq!(s.vertex_count(), 2562);
        assert_eq!(s.face_count(), 5120);
        for v in &s.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_normals_point_outward() {
        let c = cube(2.0);
        for f in 0..c.face_count() {
            assert!(c.face_normal(f).dot(&c.face_centroid(f)) > 0.0);
        }
    }

    #[test]
    fn suite_has_two_or_three_materials() {
        let suite = part_suite();
        assert_eq!(suite.len(), 10);
        for s in &suite {
            let groups = s.mesh.face_groups.as_ref().unwrap();
            let mut distinct: Vec<u32> = groups.clone();
            distinct.sort_unstable();
            distinct.dedup();
            assert!(distinct.len() == 2 || distinct.len() == 3, "{}", s.name);
            assert!(distinct.iter().all(|&g| (g as usize) < s.materials.len()));
            // Facets face upward so every part is visible from above.
            for f in 0..s.mesh.face_count() {
                assert!(s.mesh.face_normal(f).z > 0.8);
            }
        }
    }
}
