//! Scene description, placements and validation.

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3, WELD_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementClass {
    Wall,
    Floor,
    Ceiling,
}

impl ElementClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementClass::Wall => "wall",
            ElementClass::Floor => "floor",
            ElementClass::Ceiling => "ceiling",
        }
    }
}

/// A planar wall, floor or ceiling. UVs are in tiling units.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureElement {
    pub id: String,
    pub class: ElementClass,
    pub mesh: TriangleMesh,
    pub uv: Vec<[f64; 2]>,
    pub texture_id: Option<String>,
}

impl StructureElement {
    /// Builds an element with planar UVs derived from the mesh orientation.
    pub fn with_planar_uv(id: impl Into<String>, class: ElementClass, mesh: TriangleMesh) -> Self {
        let uv = planar_uv(&mesh);
        StructureElement {
            id: id.into(),
            class,
            mesh,
            uv,
            texture_id: None,
        }
    }
}

/// Projects vertices onto the dominant plane of the mesh: floors and ceilings
/// map to (x, y), walls to (horizontal, z).
pub fn planar_uv(mesh: &TriangleMesh) -> Vec<[f64; 2]> {
    let mut n = Vec3::zeros();
    for f in 0..mesh.face_count() {
        n += mesh.face_cross(f);
    }
    let n = if n.norm() > 0.0 {
        n.normalize()
    } else {
        Vec3::z()
    };
    if n.z.abs() > 0.9 {
        mesh.vertices.iter().map(|p| [p.x, p.y]).collect()
    } else {
        let u = Vec3::z().cross(&n).normalize();
        mesh.vertices.iter().map(|p| [p.dot(&u), p.z]).collect()
    }
}

/// Rigid transform with uniform scale, stored as a 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub matrix: Matrix4<f64>,
}

impl Default for Placement {
    fn default() -> Self {
        Placement {
            matrix: Matrix4::identity(),
        }
    }
}

impl Placement {
    /// Parses a row-major 4×4 matrix.
    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::InvalidConfig(format!(
                "placement needs 16 values, got {}",
                values.len()
            )));
        }
        let p = Placement {
            matrix: Matrix4::from_row_slice(values),
        };
        p.check()?;
        Ok(p)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(16);
        for r in 0..4 {
            for c in 0..4 {
                out.push(self.matrix[(r, c)]);
            }
        }
        out
    }

    pub fn translation(t: Vec3) -> Self {
        Placement {
            matrix: Matrix4::new_translation(&t),
        }
    }

    pub fn scale(&self) -> f64 {
        self.matrix.fixed_view::<3, 1>(0, 0).norm()
    }

    pub fn translation_part(&self) -> Vec3 {
        Vec3::new(
            self.matrix[(0, 3)],
            self.matrix[(1, 3)],
            self.matrix[(2, 3)],
        )
    }

    /// Requires `[sR | t; 0 0 0 1]` with orthonormal R and s > 0.
    pub fn check(&self) -> Result<()> {
        let m = &self.matrix;
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("placement is not finite".into()));
        }
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom
            .iter()
            .zip([0.0, 0.0, 0.0, 1.0])
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(Error::InvalidConfig(
                "placement bottom row must be 0 0 0 1".into(),
            ));
        }
        let s = self.scale();
        if s <= 0.0 {
            return Err(Error::InvalidConfig("placement has zero scale".into()));
        }
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0) / s;
        let gram = r.transpose() * r;
        if (gram - Matrix3::identity()).abs().max() > 1e-6 || r.determinant() <= 0.0 {
            return Err(Error::InvalidConfig(
                "placement rotation is not orthonormal with uniform scale".into(),
            ));
        }
        Ok(())
    }

    pub fn then_translate(&self, t: Vec3) -> Placement {
        Placement {
            matrix: Matrix4::new_translation(&t) * self.matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub class_label: String,
    pub description: Option<String>,
    pub mesh: TriangleMesh,
    pub placement: Placement,
}

impl SceneObject {
    /// The object text: its description when given, else "a {class_label}".
    pub fn text(&self) -> String {
        match &self.description {
            Some(d) if !d.trim().is_empty() => d.clone(),
            _ => class_prompt(&self.class_label),
        }
    }
}

/// "a {label}", the plain class prompt.
pub fn class_prompt(label: &str) -> String {
    format!("a {label}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    pub structure: Vec<StructureElement>,
    pub objects: Vec<SceneObject>,
    pub scene_type: String,
    pub structure_prompt: String,
}

pub const DEFAULT_STRUCTURE_PROMPT: &str = "a structure of a room";

/// Center and scale taking an object's local frame into the unit box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBox {
    pub center: Vec3,
    pub scale: f64,
}

impl UnitBox {
    pub fn of(mesh: &TriangleMesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let extent = (hi - lo).max();
        UnitBox {
            center: (lo + hi) * 0.5,
            scale: if extent > 0.0 { 1.0 / extent } else { 1.0 },
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::new_scaling(self.scale) * Matrix4::new_translation(&(-self.center))
    }
}

/// A scene whose meshes passed validation. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedScene {
    desc: SceneDescription,
    unit_boxes: Vec<UnitBox>,
}

impl ValidatedScene {
    pub fn description(&self) -> &SceneDescription {
        &self.desc
    }

    pub fn into_description(self) -> SceneDescription {
        self.desc
    }

    pub fn structure(&self) -> &[StructureElement] {
        &self.desc.structure
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.desc.objects
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.desc.objects.iter().position(|o| o.id == id)
    }

    pub fn unit_box(&self, i: usize) -> UnitBox {
        self.unit_boxes[i]
    }

    /// Object `i` centered and scaled into the unit box (per-object stages).
    pub fn unit_mesh(&self, i: usize) -> TriangleMesh {
        self.desc.objects[i]
            .mesh
            .transformed(&self.unit_boxes[i].matrix())
    }

    /// Object `i` in scene coordinates.
    pub fn world_mesh(&self, i: usize) -> TriangleMesh {
        let o = &self.desc.objects[i];
        o.mesh.transformed(&o.placement.matrix)
    }

    /// Bounds of the structure elements alone, if there are any.
    pub fn structure_bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.desc.structure.iter().map(|s| s.mesh.bounding_box());
        let first = it.next()?;
        Some(it.fold(first, |(lo, hi), (a, b)| (lo.inf(&a), hi.sup(&b))))
    }

    /// Axis-aligned bounds of all geometry in scene coordinates.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for s in &self.desc.structure {
            let (a, b) = s.mesh.bounding_box();
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
        for i in 0..self.desc.objects.len() {
            let (a, b) = self.world_mesh(i).bounding_box();
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
        (lo, hi)
    }
}

/// Verifies every mesh, welds object meshes, normalizes normals and computes
/// the per-object unit-box transforms.
pub fn validate_scene(desc: SceneDescription) -> Result<ValidatedScene> {
    if desc.structure.is_empty() && desc.objects.is_empty() {
        return Err(Error::EmptyScene);
    }
    if desc.scene_type.trim().is_empty() {
        return Err(Error::InvalidConfig("scene_type is empty".into()));
    }
    let mut desc = desc;
    for s in &mut desc.structure {
        s.mesh = with_unit_normals(s.mesh.clone())?;
        if s.uv.is_empty() {
            s.uv = planar_uv(&s.mesh);
        }
        if s.uv.len() != s.mesh.vertex_count() {
            return Err(Error::InvalidMesh(format!(
                "structure {} has {} uvs for {} vertices",
                s.id,
                s.uv.len(),
                s.mesh.vertex_count()
            )));
        }
        if s.uv.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "structure {} has non-finite uv",
                s.id
            )));
        }
    }
    let mut unit_boxes = Vec::with_capacity(desc.objects.len());
    for o in &mut desc.objects {
        if o.class_label.trim().is_empty() {
            return Err(Error::InvalidConfig(format!(
                "object {} has an empty class label",
                o.id
            )));
        }
        o.placement.check()?;
        o.mesh.check()?;
        let (welded, remap) = o.mesh.welded(WELD_TOLERANCE)?;
        let mut kept_normals = vec![None; welded.vertex_count()];
        if o.mesh.normals.len() == o.mesh.vertex_count() {
            for (old, &new) in remap.iter().enumerate() {
                if kept_normals[new].is_none() {
                    kept_normals[new] = Some(o.mesh.normals[old]);
                }
            }
        }
        let mut mesh = welded;
        for (n, kept) in mesh.normals.iter_mut().zip(kept_normals) {
            if let Some(k) = kept {
                if k.iter().all(|c| c.is_finite()) && k.norm() > 1e-12 {
                    *n = k.normalize();
                }
            }
        }
        o.mesh = mesh;
        unit_boxes.push(UnitBox::of(&o.mesh));
    }
    Ok(ValidatedScene { desc, unit_boxes })
}

fn with_unit_normals(mut mesh: TriangleMesh) -> Result<TriangleMesh> {
    mesh.check()?;
    let computed = mesh.area_weighted_normals();
    if mesh.normals.len() != mesh.vertex_count() {
        mesh.normals = computed;
    } else {
        for (n, c) in mesh.normals.iter_mut().zip(computed) {
            *n = if n.iter().all(|v| v.is_finite()) && n.norm() > 1e-12 {
                n.normalize()
            } else {
                c
            };
        }
    }
    Ok(mesh)
}
