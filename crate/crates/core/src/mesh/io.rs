//! OBJ and PLY reading, OBJ writing. Only positions and triangles are read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MeshError, SurfaceMesh};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh, MeshError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => load_obj_str(&fs::read_to_string(path)?),
        "ply" => load_ply_bytes(&fs::read(path)?),
        other => Err(MeshError::UnsupportedFormat(other.to_string())),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line, message: message.into() }
}

pub fn load_obj_str(text: &str) -> Result<SurfaceMesh, MeshError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.split('#').next().unwrap_or("");
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in &mut p {
                    let tok = tokens.next().ok_or_else(|| parse_err(line, "vertex needs 3 coordinates"))?;
                    *c = tok.parse().map_err(|_| parse_err(line, format!("bad coordinate {tok:?}")))?;
                }
                positions.push(p);
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(3);
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let k: i64 = first
                        .parse()
                        .map_err(|_| parse_err(line, format!("bad face index {tok:?}")))?;
                    let v = if k > 0 {
                        k - 1
                    } else if k < 0 {
                        positions.len() as i64 + k
                    } else {
                        return Err(parse_err(line, "face index 0"));
                    };
                    if v < 0 {
                        return Err(MeshError::IndexOutOfRange { face: faces.len() });
                    }
                    idx.push(v as usize);
                }
                if idx.len() != 3 {
                    return Err(MeshError::NonTriangleFace { face: faces.len() });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    SurfaceMesh::new(positions, faces)
}

/// Write positions with round-trip float formatting.
pub fn save_obj(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let mut s = String::new();
    for p in mesh.positions() {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    for f in mesh.topology().faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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
    fn read(self, b: &[u8], little: bool) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(&b[..$n]);
                (if little { <$t>::from_le_bytes(a) } else { <$t>::from_be_bytes(a) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => rd!(i16, 2),
            Scalar::U16 => rd!(u16, 2),
            Scalar::I32 => rd!(i32, 4),
            Scalar::U32 => rd!(u32, 4),
            Scalar::F32 => rd!(f32, 4),
            Scalar::F64 => rd!(f64, 8),
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn load_ply_bytes(bytes: &[u8]) -> Result<SurfaceMesh, MeshError> {
    let header_end = bytes
        .windows(10)
        .position(|w| w == b"end_header")
        .ok_or_else(|| parse_err(1, "missing end_header"))?;
    let mut body = header_end + 10;
    while body < bytes.len() && bytes[body] != b'\n' {
        body += 1;
    }
    body += 1;
    let header = String::from_utf8_lossy(&bytes[..header_end]);
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, line) in header.lines().enumerate() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => format = t.get(1).map(|s| s.to_string()),
            Some("element") if t.len() == 3 => elements.push(Element {
                name: t[1].to_string(),
                count: t[2].parse().map_err(|_| parse_err(i + 1, "bad element count"))?,
                props: Vec::new(),
            }),
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| parse_err(i + 1, "property before element"))?;
                let bad = || parse_err(i + 1, format!("unsupported property {line:?}"));
                if t.get(1) == Some(&"list") && t.len() == 5 {
                    let c = Scalar::parse(t[2]).ok_or_else(bad)?;
                    let v = Scalar::parse(t[3]).ok_or_else(bad)?;
                    el.props.push(Property::List(t[4].to_string(), c, v));
                } else if t.len() == 3 {
                    el.props.push(Property::Scalar(t[2].to_string(), Scalar::parse(t[1]).ok_or_else(bad)?));
                } else {
                    return Err(bad());
                }
            }
            _ => {}
        }
    }
    let format = format.ok_or_else(|| parse_err(2, "missing format line"))?;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut record = |el: &Element, values: Vec<Vec<f64>>| -> Result<(), MeshError> {
        if el.name == "vertex" {
            let mut p = [0.0; 3];
            for (prop, v) in el.props.iter().zip(&values) {
                if let Property::Scalar(n, _) = prop {
                    match n.as_str() {
                        "x" => p[0] = v[0],
                        "y" => p[1] = v[0],
                        "z" => p[2] = v[0],
                        _ => {}
                    }
                }
            }
            positions.push(p);
        } else if el.name == "face" {
            for (prop, v) in el.props.iter().zip(&values) {
                if let Property::List(n, _, _) = prop {
                    if n == "vertex_indices" || n == "vertex_index" {
                        if v.len() != 3 {
                            return Err(MeshError::NonTriangleFace { face: faces.len() });
                        }
                        faces.push([v[0] as usize, v[1] as usize, v[2] as usize]);
                    }
                }
            }
        }
        Ok(())
    };
    match format.as_str() {
        "ascii" => {
            let text = String::from_utf8_lossy(&bytes[body.min(bytes.len())..]);
            let mut tokens = text.split_whitespace();
            let mut next = |what: &str| -> Result<f64, MeshError> {
                let tok = tokens.next().ok_or_else(|| parse_err(0, format!("truncated {what}")))?;
                tok.parse().map_err(|_| parse_err(0, format!("bad number {tok:?}")))
            };
            for el in &elements {
                for _ in 0..el.count {
                    let mut values = Vec::with_capacity(el.props.len());
                    for prop in &el.props {
                        match prop {
                            Property::Scalar(..) => values.push(vec![next(&el.name)?]),
                            Property::List(..) => {
                                let n = next(&el.name)? as usize;
                                values.push((0..n).map(|_| next(&el.name)).collect::<Result<_, _>>()?);
                            }
                        }
                    }
                    record(el, values)?;
                }
            }
        }
        "binary_little_endian" | "binary_big_endian" => {
            let little = format == "binary_little_endian";
            let mut at = body;
            let mut take = |s: Scalar| -> Result<f64, MeshError> {
                if at + s.size() > bytes.len() {
                    return Err(parse_err(0, "truncated binary body"));
                }
                let v = s.read(&bytes[at..], little);
                at += s.size();
                Ok(v)
            };
            for el in &elements {
                for _ in 0..el.count {
                    let mut values = Vec::with_capacity(el.props.len());
                    for prop in &el.props {
                        match prop {
                            Property::Scalar(_, s) => values.push(vec![take(*s)?]),
                            Property::List(_, c, s) => {
                                let n = take(*c)? as usize;
                                values.push((0..n).map(|_| take(*s)).collect::<Result<_, _>>()?);
                            }
                        }
                    }
                    record(el, values)?;
                }
            }
        }
        other => return Err(MeshError::UnsupportedFormat(format!("ply {other}"))),
    }
    SurfaceMesh::new(positions, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 3 1 4\n";

    #[test]
    fn obj_tetrahedron() {
        let m = load_obj_str(TETRA).unwrap();
        assert_eq!((m.n_vertices(), m.n_edges(), m.n_faces()), (4, 6, 4));
        assert_eq!(m.genus(), 0);
    }

    #[test]
    fn obj_quad_is_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 2 3 4\n";
        assert!(matches!(load_obj_str(text), Err(MeshError::NonTriangleFace { face: 1 })));
    }

    #[test]
    fn obj_boundary_and_orientation() {
        let open = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        assert!(matches!(load_obj_str(open), Err(MeshError::Boundary { .. })));
        let flipped = TETRA.replace("f 1 3 2", "f 1 2 3");
        assert!(matches!(load_obj_str(&flipped), Err(MeshError::InconsistentOrientation { .. })));
    }

    #[test]
    fn ply_ascii_and_binary_agree() {
        let m = load_obj_str(TETRA).unwrap();
        let mut ascii = String::from("ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nelement face 4\nproperty list uchar int vertex_indices\nend_header\n");
        for p in m.positions() {
            ascii += &format!("{} {} {}\n", p[0], p[1], p[2]);
        }
        for f in m.topology().faces() {
            ascii += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
        }
        let a = load_ply_bytes(ascii.as_bytes()).unwrap();
        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 4\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for p in m.positions() {
            for c in p {
                bin.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        for f in m.topology().faces() {
            bin.push(3);
            for v in f {
                bin.extend_from_slice(&(*v as i32).to_le_bytes());
            }
        }
        let b = load_ply_bytes(&bin).unwrap();
        assert_eq!(a, m);
        assert_eq!(b, m);
    }
}
