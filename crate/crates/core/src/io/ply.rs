//! PLY reader (ASCII and binary little-endian) and writer for colored meshes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::LoadedMesh;
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::parse("ply header", format!("unknown type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

/// Pulls numbers out of the body, ASCII or binary.
struct Reader<'a> {
    format: Format,
    bytes: &'a [u8],
    pos: usize,
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl Reader<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        match self.format {
            Format::Ascii => self
                .tokens
                .next()
                .ok_or_else(|| Error::parse("ply body", "unexpected end of data"))?
                .parse::<f64>()
                .map_err(|e| Error::parse("ply body", e.to_string())),
            Format::BinaryLe => {
                let n = ty.size();
                if self.pos + n > self.bytes.len() {
                    return Err(Error::parse("ply body", "unexpected end of data"));
                }
                let v = ty.read_le(&self.bytes[self.pos..self.pos + n]);
                self.pos += n;
                Ok(v)
            }
        }
    }
}

pub fn parse_ply(data: &[u8]) -> Result<LoadedMesh> {
    const END: &[u8] = b"end_header";
    let end = data
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::parse("ply header", "missing end_header"))?;
    let mut body_start = end + END.len();
    while body_start < data.len() && data[body_start] != b'\n' {
        body_start += 1;
    }
    body_start = (body_start + 1).min(data.len());
    let header =
        std::str::from_utf8(&data[..end]).map_err(|e| Error::parse("ply header", e.to_string()))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse("ply header", "missing magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "ascii", _] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", _] => format = Some(Format::BinaryLe),
            ["format", other, _] => {
                return Err(Error::parse(
                    "ply header",
                    format!("unsupported format {other}"),
                ))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse("ply header", "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse("ply header", "property before element"))?
                .props
                .push(Property::List(
                    name.to_string(),
                    Scalar::parse(count_ty)?,
                    Scalar::parse(item_ty)?,
                )),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse("ply header", "property before element"))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            _ => {}
        }
    }
    let format = format.ok_or_else(|| Error::parse("ply header", "missing format line"))?;
    let body = &data[body_start..];
    let text = match format {
        Format::Ascii => {
            std::str::from_utf8(body).map_err(|e| Error::parse("ply body", e.to_string()))?
        }
        Format::BinaryLe => "",
    };
    let mut reader = Reader {
        format,
        bytes: body,
        pos: 0,
        tokens: text.split_ascii_whitespace(),
    };

    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut scalars: Vec<(&str, f64, Scalar)> = Vec::new();
            let mut lists: Vec<(&str, Vec<f64>)> = Vec::new();
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => scalars.push((name, reader.next(*ty)?, *ty)),
                    Property::List(name, cty, ity) => {
                        let n = reader.next(*cty)? as usize;
                        let items = (0..n)
                            .map(|_| reader.next(*ity))
                            .collect::<Result<Vec<_>>>()?;
                        lists.push((name, items));
                    }
                }
            }
            let get = |key: &str| scalars.iter().find(|s| s.0 == key).map(|s| (s.1, s.2));
            match el.name.as_str() {
                "vertex" => {
                    let (x, y, z) = match (get("x"), get("y"), get("z")) {
                        (Some(x), Some(y), Some(z)) => (x.0, y.0, z.0),
                        _ => return Err(Error::parse("ply vertex", "missing x/y/z")),
                    };
                    positions.push(Vec3::new(x, y, z));
                    if let (Some(a), Some(b), Some(c)) = (get("nx"), get("ny"), get("nz")) {
                        normals.push(Vec3::new(a.0, b.0, c.0));
                    }
                    if let (Some(r), Some(g), Some(b)) = (get("red"), get("green"), get("blue")) {
                        let scale = |(v, ty): (f64, Scalar)| match ty {
                            Scalar::F32 | Scalar::F64 => v,
                            _ => v / 255.0,
                        };
                        colors.push([scale(r), scale(g), scale(b)]);
                    }
                    let u = get("u").or_else(|| get("s")).or_else(|| get("texture_u"));
                    let v = get("v").or_else(|| get("t")).or_else(|| get("texture_v"));
                    if let (Some(u), Some(v)) = (u, v) {
                        uvs.push([u.0, v.0]);
                    }
                }
                "face" => {
                    let idx = lists
                        .iter()
                        .find(|l| l.0 == "vertex_indices" || l.0 == "vertex_index")
                        .ok_or_else(|| Error::parse("ply face", "missing vertex_indices"))?;
                    let ids: Vec<usize> = idx.1.iter().map(|&v| v as usize).collect();
                    if ids.len() < 3 {
                        return Err(Error::parse("ply face", "face needs 3 corners"));
                    }
                    for k in 1..ids.len() - 1 {
                        faces.push([ids[0], ids[k], ids[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut mesh = TriangleMesh::new(positions, faces)?;
    if normals.len() == mesh.vertex_count() {
        mesh.normals = normals
            .into_iter()
            .zip(mesh.normals.iter())
            .map(|(n, fb)| if n.norm() > 1e-12 { n.normalize() } else { *fb })
            .collect();
    }
    let n = mesh.vertex_count();
    Ok(LoadedMesh {
        mesh,
        uv: (uvs.len() == n).then_some(uvs),
        colors: (colors.len() == n).then_some(colors),
        group_names: Vec::new(),
    })
}

/// ASCII PLY with per-vertex normals and 8-bit RGB colors.
pub fn write_ply(mesh: &TriangleMesh, colors: &[[f64; 3]]) -> Result<String> {
    if colors.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch(format!(
            "{} colors for {} vertices",
            colors.len(),
            mesh.vertex_count()
        )));
    }
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
property float nx\nproperty float ny\nproperty float nz\n\
property uchar red\nproperty uchar green\nproperty uchar blue\n\
element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.face_count()
    );
    for (i, v) in mesh.vertices.iter().enumerate() {
        let n = mesh.normals.get(i).copied().unwrap_or_else(Vec3::z);
        let c = colors[i].map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8);
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {}",
            v.x as f32,
            v.y as f32,
            v.z as f32,
            n.x as f32,
            n.y as f32,
            n.z as f32,
            c[0],
            c[1],
            c[2]
        );
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    Ok(out)
}
