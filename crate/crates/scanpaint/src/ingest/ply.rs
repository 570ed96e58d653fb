use crate::geom::{PointCloud, TriangleMesh, Vec3, NORMAL_UNIT_TOL};

use super::IngestError;

/// The two PLY encodings this crate reads and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

/// Parsed PLY content: a bare vertex cloud, or a mesh when faces exist.
#[derive(Debug, Clone, PartialEq)]
pub enum PlyGeometry {
    Cloud(PointCloud),
    Mesh(TriangleMesh),
}

impl PlyGeometry {
    pub fn vertices(&self) -> &PointCloud {
        match self {
            PlyGeometry::Cloud(c) => c,
            PlyGeometry::Mesh(m) => m.vertices(),
        }
    }

    pub fn as_mesh(&self) -> Option<&TriangleMesh> {
        match self {
            PlyGeometry::Cloud(_) => None,
            PlyGeometry::Mesh(m) => Some(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F32,
    F64,
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
}

impl Scalar {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            "uchar" | "uint8" => Scalar::U8,
            "char" | "int8" => Scalar::I8,
            "ushort" | "uint16" => Scalar::U16,
            "short" | "int16" => Scalar::I16,
            "uint" | "uint32" => Scalar::U32,
            "int" | "int32" => Scalar::I32,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::U8 | Scalar::I8 => 1,
            Scalar::U16 | Scalar::I16 => 2,
            Scalar::F32 | Scalar::U32 | Scalar::I32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    scalar: Scalar,
    list_count: Option<Scalar>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    vertex_count: usize,
    vertex_props: Vec<Property>,
    face_count: usize,
    face_props: Vec<Property>,
    has_faces: bool,
    data_start: usize,
    data_line: usize,
}

/// Parses ASCII or binary little-endian PLY.
///
/// Vertices need `x y z`; `nx ny nz` and `red green blue` triples are picked
/// up when present and other vertex properties are skipped. Colors may be
/// 8-bit integers (scaled by 1/255) or floats already in [0, 1]. Normals
/// that are not unit length are normalized (exact unit vectors pass through
/// bit-identically); zero or non-finite normals become the invalid flag.
/// A face element turns the result into a mesh; only triangles are accepted.
pub fn parse_ply(bytes: &[u8]) -> Result<PlyGeometry, IngestError> {
    let header = parse_header(bytes)?;

    let want = |name: &str| header.vertex_props.iter().position(|p| p.name == name);
    let (px, py, pz) = match (want("x"), want("y"), want("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(IngestError::PlyParse {
                line: header.data_line,
                message: "vertex element must declare x, y and z".into(),
            })
        }
    };
    let normal_idx = match (want("nx"), want("ny"), want("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => {
            return Err(IngestError::PlyParse {
                line: header.data_line,
                message: "normals need all of nx, ny, nz".into(),
            })
        }
    };
    let color_idx = match (want("red"), want("green"), want("blue")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        (None, None, None) => None,
        _ => {
            return Err(IngestError::PlyParse {
                line: header.data_line,
                message: "colors need all of red, green, blue".into(),
            })
        }
    };

    let mut positions = Vec::with_capacity(header.vertex_count);
    let mut normals = normal_idx.map(|_| Vec::with_capacity(header.vertex_count));
    let mut colors = color_idx.map(|_| Vec::with_capacity(header.vertex_count));
    let mut faces = Vec::with_capacity(header.face_count);

    let mut reader: Box<dyn RowReader> = match header.encoding {
        PlyEncoding::Ascii => {
            Box::new(AsciiReader::new(bytes, header.data_start, header.data_line)?)
        }
        PlyEncoding::BinaryLittleEndian => Box::new(BinaryReader::new(bytes, header.data_start)),
    };

    let mut row = Vec::new();
    for v in 0..header.vertex_count {
        reader.read_row(&header.vertex_props, &mut row, &format!("vertex {v}"))?;
        positions.push(Vec3::new(row[px], row[py], row[pz]));
        if let (Some(idx), Some(out)) = (normal_idx, normals.as_mut()) {
            out.push(clean_normal(Vec3::new(row[idx[0]], row[idx[1]], row[idx[2]])));
        }
        if let (Some(idx), Some(out)) = (color_idx, colors.as_mut()) {
            let scale = |i: usize| {
                let raw = row[i];
                let v = match header.vertex_props[i].scalar {
                    Scalar::F32 | Scalar::F64 => raw,
                    _ => raw / 255.0,
                };
                v.clamp(0.0, 1.0)
            };
            out.push([scale(idx[0]), scale(idx[1]), scale(idx[2])]);
        }
    }
    if header.has_faces {
        for f in 0..header.face_count {
            let idx = reader.read_face(&header.face_props, &format!("face {f}"))?;
            faces.push(idx);
        }
    }

    let mut cloud = PointCloud::new(positions)?;
    if let Some(n) = normals {
        cloud = cloud.with_normals(n)?;
    }
    if let Some(c) = colors {
        cloud = cloud.with_colors(c)?;
    }
    if header.has_faces {
        Ok(PlyGeometry::Mesh(TriangleMesh::new(cloud, faces)?))
    } else {
        Ok(PlyGeometry::Cloud(cloud))
    }
}

fn clean_normal(n: Vec3) -> Vec3 {
    if !n.iter().all(|v| v.is_finite()) {
        return Vec3::zeros();
    }
    let len = n.norm();
    if len == 0.0 {
        Vec3::zeros()
    } else if (len - 1.0).abs() <= NORMAL_UNIT_TOL {
        n
    } else {
        n / len
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, IngestError> {
    let err = |line: usize, message: &str| IngestError::PlyParse { line, message: message.into() };

    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut next_line = || -> Option<(usize, String)> {
        if pos >= bytes.len() {
            return None;
        }
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map(|i| pos + i);
        let slice = &bytes[pos..end.unwrap_or(bytes.len())];
        pos = end.map(|e| e + 1).unwrap_or(bytes.len());
        line_no += 1;
        Some((line_no, String::from_utf8_lossy(slice).trim_end_matches('\r').to_string()))
    };

    let (l, magic) = next_line().ok_or_else(|| err(1, "empty file"))?;
    if magic.trim() != "ply" {
        return Err(err(l, "missing 'ply' magic line"));
    }

    let mut encoding = None;
    let mut elements: Vec<(String, usize, Vec<Property>)> = Vec::new();
    let (data_start, data_line) = loop {
        let Some((l, line)) = next_line() else {
            return Err(err(line_no, "header ended before end_header"));
        };
        let line = line.trim();
        if line.is_empty() || line.starts_with("comment") || line.starts_with("obj_info") {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let kind = tok.next().unwrap_or("");
                let version = tok.next().unwrap_or("");
                if version != "1.0" {
                    return Err(err(l, &format!("unsupported PLY version '{version}'")));
                }
                encoding = Some(match kind {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(err(l, &format!("unsupported PLY format '{other}'"))),
                });
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| err(l, "element without a name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(l, "element without a valid count"))?;
                match (name, elements.len()) {
                    ("vertex", 0) | ("face", 1) => {}
                    ("vertex", _) => return Err(err(l, "vertex element must come first")),
                    ("face", _) => return Err(err(l, "face element must follow vertex")),
                    (other, _) => {
                        return Err(err(l, &format!("unsupported element '{other}'")))
                    }
                }
                elements.push((name.to_string(), count, Vec::new()));
            }
            Some("property") => {
                let (_, _, props) = elements
                    .last_mut()
                    .ok_or_else(|| err(l, "property before any element"))?;
                let first = tok.next().ok_or_else(|| err(l, "property without a type"))?;
                if first == "list" {
                    let count_ty = tok
                        .next()
                        .and_then(Scalar::from_name)
                        .ok_or_else(|| err(l, "bad list count type"))?;
                    let item_ty = tok
                        .next()
                        .and_then(Scalar::from_name)
                        .ok_or_else(|| err(l, "bad list item type"))?;
                    let name = tok.next().ok_or_else(|| err(l, "list property without a name"))?;
                    props.push(Property {
                        name: name.to_string(),
                        scalar: item_ty,
                        list_count: Some(count_ty),
                    });
                } else {
                    let scalar = Scalar::from_name(first)
                        .ok_or_else(|| err(l, &format!("unknown property type '{first}'")))?;
                    let name =
                        tok.next().ok_or_else(|| err(l, "property without a name"))?;
                    props.push(Property { name: name.to_string(), scalar, list_count: None });
                }
            }
            Some("end_header") => break (pos, l + 1),
            Some(other) => return Err(err(l, &format!("unexpected header keyword '{other}'"))),
            None => continue,
        }
    };

    let encoding = encoding.ok_or_else(|| err(data_line, "missing format line"))?;
    let mut vertex_count = 0;
    let mut vertex_props = Vec::new();
    let mut face_count = 0;
    let mut face_props = Vec::new();
    let mut has_faces = false;
    for (name, count, props) in elements {
        if name == "vertex" {
            if props.iter().any(|p| p.list_count.is_some()) {
                return Err(err(data_line, "list properties on vertices are unsupported"));
            }
            vertex_count = count;
            vertex_props = props;
        } else {
            has_faces = true;
            face_count = count;
            if props.len() != 1
                || props[0].list_count.is_none()
                || !(props[0].name == "vertex_indices" || props[0].name == "vertex_index")
            {
                return Err(err(
                    data_line,
                    "face element must have exactly one list property named vertex_indices",
                ));
            }
            face_props = props;
        }
    }
    if vertex_props.is_empty() {
        return Err(err(data_line, "missing vertex element"));
    }
    Ok(Header {
        encoding,
        vertex_count,
        vertex_props,
        face_count,
        face_props,
        has_faces,
        data_start,
        data_line,
    })
}

trait RowReader {
    /// Reads one row of scalar properties into `out` (parallel to props).
    fn read_row(
        &mut self,
        props: &[Property],
        out: &mut Vec<f64>,
        context: &str,
    ) -> Result<(), IngestError>;

    /// Reads one triangle row (list property).
    fn read_face(&mut self, props: &[Property], context: &str) -> Result<[usize; 3], IngestError>;
}

struct AsciiReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> AsciiReader<'a> {
    fn new(bytes: &'a [u8], start: usize, first_line: usize) -> Result<Self, IngestError> {
        let text = std::str::from_utf8(&bytes[start..]).map_err(|_| IngestError::PlyParse {
            line: first_line,
            message: "ascii payload is not valid UTF-8".into(),
        })?;
        Ok(Self { lines: text.lines(), line_no: first_line - 1 })
    }

    fn next_tokens(&mut self, context: &str) -> Result<(usize, Vec<f64>), IngestError> {
        loop {
            let Some(line) = self.lines.next() else {
                return Err(IngestError::PlyTruncated { context: context.to_string() });
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut vals = Vec::new();
            for tok in trimmed.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| IngestError::PlyParse {
                    line: self.line_no,
                    message: format!("invalid number '{tok}' in {context}"),
                })?;
                vals.push(v);
            }
            return Ok((self.line_no, vals));
        }
    }
}

impl RowReader for AsciiReader<'_> {
    fn read_row(
        &mut self,
        props: &[Property],
        out: &mut Vec<f64>,
        context: &str,
    ) -> Result<(), IngestError> {
        let (line, vals) = self.next_tokens(context)?;
        if vals.len() != props.len() {
            return Err(IngestError::PlyParse {
                line,
                message: format!(
                    "{context}: expected {} values, found {}",
                    props.len(),
                    vals.len()
                ),
            });
        }
        out.clear();
        out.extend_from_slice(&vals);
        Ok(())
    }

    fn read_face(&mut self, _props: &[Property], context: &str) -> Result<[usize; 3], IngestError> {
        let (line, vals) = self.next_tokens(context)?;
        face_from_values(&vals, line, context)
    }
}

struct BinaryReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BinaryReader<'a> {
    fn new(bytes: &'a [u8], start: usize) -> Self {
        Self { bytes, pos: start }
    }

    fn read_scalar(&mut self, s: Scalar, context: &str) -> Result<f64, IngestError> {
        let size = s.size();
        if self.pos + size > self.bytes.len() {
            return Err(IngestError::PlyTruncated { context: context.to_string() });
        }
        let raw = &self.bytes[self.pos..self.pos + size];
        self.pos += size;
        Ok(match s {
            Scalar::F32 => f32::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(raw.try_into().unwrap()),
            Scalar::U8 => raw[0] as f64,
            Scalar::I8 => raw[0] as i8 as f64,
            Scalar::U16 => u16::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::I16 => i16::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(raw.try_into().unwrap()) as f64,
            Scalar::I32 => i32::from_le_bytes(raw.try_into().unwrap()) as f64,
        })
    }
}

impl RowReader for BinaryReader<'_> {
    fn read_row(
        &mut self,
        props: &[Property],
        out: &mut Vec<f64>,
        context: &str,
    ) -> Result<(), IngestError> {
        out.clear();
        for p in props {
            out.push(self.read_scalar(p.scalar, context)?);
        }
        Ok(())
    }

    fn read_face(&mut self, props: &[Property], context: &str) -> Result<[usize; 3], IngestError> {
        let p = &props[0];
        let count = self.read_scalar(p.list_count.unwrap(), context)?;
        let mut vals = vec![count];
        for _ in 0..count as usize {
            vals.push(self.read_scalar(p.scalar, context)?);
        }
        face_from_values(&vals, 0, context)
    }
}

fn face_from_values(vals: &[f64], line: usize, context: &str) -> Result<[usize; 3], IngestError> {
    let fail = |message: String| IngestError::PlyParse { line, message };
    if vals.is_empty() {
        return Err(fail(format!("{context}: empty face row")));
    }
    if vals[0] != 3.0 {
        return Err(fail(format!(
            "{context}: only triangles are supported, face has {} vertices",
            vals[0]
        )));
    }
    if vals.len() != 4 {
        return Err(fail(format!("{context}: expected 3 indices, found {}", vals.len() - 1)));
    }
    let mut idx = [0usize; 3];
    for i in 0..3 {
        let v = vals[i + 1];
        if v < 0.0 || v.fract() != 0.0 {
            return Err(fail(format!("{context}: bad vertex index {v}")));
        }
        idx[i] = v as usize;
    }
    Ok(idx)
}

/// Serializes geometry to PLY.
///
/// Positions and normals are written as doubles, colors as 8-bit integers,
/// so parsing the output reproduces coordinates bit-exactly and colors to
/// within one 8-bit step. Output is deterministic for identical input.
pub fn write_ply(geometry: &PlyGeometry, encoding: PlyEncoding) -> Vec<u8> {
    let vertices = geometry.vertices();
    let faces = geometry.as_mesh().map(|m| m.faces());

    let mut out = Vec::new();
    out.extend_from_slice(b"ply\n");
    out.extend_from_slice(match encoding {
        PlyEncoding::Ascii => b"format ascii 1.0\n".as_slice(),
        PlyEncoding::BinaryLittleEndian => b"format binary_little_endian 1.0\n".as_slice(),
    });
    out.extend_from_slice(format!("element vertex {}\n", vertices.len()).as_bytes());
    for axis in ["x", "y", "z"] {
        out.extend_from_slice(format!("property double {axis}\n").as_bytes());
    }
    if vertices.normals().is_some() {
        for axis in ["nx", "ny", "nz"] {
            out.extend_from_slice(format!("property double {axis}\n").as_bytes());
        }
    }
    if vertices.colors().is_some() {
        for ch in ["red", "green", "blue"] {
            out.extend_from_slice(format!("property uchar {ch}\n").as_bytes());
        }
    }
    if let Some(faces) = faces {
        out.extend_from_slice(format!("element face {}\n", faces.len()).as_bytes());
        out.extend_from_slice(b"property list uchar int vertex_indices\n");
    }
    out.extend_from_slice(b"end_header\n");

    let quantize = |c: f64| (c * 255.0).round() as u8;
    match encoding {
        PlyEncoding::Ascii => {
            for i in 0..vertices.len() {
                let p = vertices.points()[i];
                let mut line = format!("{} {} {}", p.x, p.y, p.z);
                if let Some(normals) = vertices.normals() {
                    let n = normals[i];
                    line.push_str(&format!(" {} {} {}", n.x, n.y, n.z));
                }
                if let Some(colors) = vertices.colors() {
                    let c = colors[i];
                    line.push_str(&format!(
                        " {} {} {}",
                        quantize(c[0]),
                        quantize(c[1]),
                        quantize(c[2])
                    ));
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            if let Some(faces) = faces {
                for f in faces {
                    out.extend_from_slice(format!("3 {} {} {}\n", f[0], f[1], f[2]).as_bytes());
                }
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            for i in 0..vertices.len() {
                let p = vertices.points()[i];
                for c in 0..3 {
                    out.extend_from_slice(&p[c].to_le_bytes());
                }
                if let Some(normals) = vertices.normals() {
                    for c in 0..3 {
                        out.extend_from_slice(&normals[i][c].to_le_bytes());
                    }
                }
                if let Some(colors) = vertices.colors() {
                    for c in colors[i] {
                        out.push(quantize(c));
                    }
                }
            }
            if let Some(faces) = faces {
                for f in faces {
                    out.push(3);
                    for &v in f {
                        out.extend_from_slice(&(v as i32).to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(seed: u64, n: usize, normals: bool, colors: bool) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random::<f64>() * 10.0 - 5.0,
                    rng.random::<f64>() * 2e3,
                    rng.random::<f64>() * 1e-3,
                )
            })
            .collect();
        let mut cloud = PointCloud::new(pts).unwrap();
        if normals {
            let ns: Vec<Vec3> = (0..n)
                .map(|i| {
                    if i % 7 == 0 {
                        Vec3::zeros()
                    } else {
                        Vec3::new(
                            rng.random::<f64>() - 0.5,
                            rng.random::<f64>() - 0.5,
                            rng.random::<f64>() - 0.5,
                        )
                        .normalize()
                    }
                })
                .collect();
            cloud = cloud.with_normals(ns).unwrap();
        }
        if colors {
            let cs: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            cloud = cloud.with_colors(cs).unwrap();
        }
        cloud
    }

    #[test]
    fn ascii_round_trip_is_bit_exact_for_geometry() {
        let cloud = random_cloud(1, 50, true, true);
        let bytes = write_ply(&PlyGeometry::Cloud(cloud.clone()), PlyEncoding::Ascii);
        let parsed = parse_ply(&bytes).unwrap();
        assert_eq!(parsed.vertices().points(), cloud.points());
        assert_eq!(parsed.vertices().normals(), cloud.normals());
        for (a, b) in parsed.vertices().colors().unwrap().iter().zip(cloud.colors().unwrap()) {
            for ch in 0..3 {
                assert!((a[ch] - b[ch]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }

    #[test]
    fn binary_round_trip_is_bit_exact_for_geometry() {
        let cloud = random_cloud(2, 64, true, false);
        let bytes = write_ply(&PlyGeometry::Cloud(cloud.clone()), PlyEncoding::BinaryLittleEndian);
        let parsed = parse_ply(&bytes).unwrap();
        assert_eq!(parsed.vertices(), &cloud);
    }

    #[test]
    fn second_round_trip_is_identity_including_colors() {
        let cloud = random_cloud(3, 40, false, true);
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let once = parse_ply(&write_ply(&PlyGeometry::Cloud(cloud.clone()), enc)).unwrap();
            let twice = parse_ply(&write_ply(&once, enc)).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn mesh_round_trips_with_faces() {
        let cloud = random_cloud(4, 9, false, false);
        let faces = vec![[0usize, 1, 2], [2, 3, 4], [4, 5, 6], [6, 7, 8]];
        let mesh = TriangleMesh::new(cloud, faces.clone()).unwrap();
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let parsed = parse_ply(&write_ply(&PlyGeometry::Mesh(mesh.clone()), enc)).unwrap();
            let back = parsed.as_mesh().expect("faces preserved");
            assert_eq!(back.faces(), faces.as_slice());
            assert_eq!(back.vertices(), mesh.vertices());
        }
    }

    #[test]
    fn parses_foreign_ascii_with_extra_properties() {
        let text = "\
ply
format ascii 1.0
comment exported by a scanner
element vertex 2
property float x
property float y
property float z
property float confidence
property uchar red
property uchar green
property uchar blue
end_header
0.5 1 -2 0.99 255 0 128
-1 0.25 3 0.5 0 255 64
";
        let parsed = parse_ply(text.as_bytes()).unwrap();
        let v = parsed.vertices();
        assert_eq!(v.len(), 2);
        assert_eq!(v.points()[0], Vec3::new(0.5, 1.0, -2.0));
        assert_eq!(v.colors().unwrap()[0], [1.0, 0.0, 128.0 / 255.0]);
        assert!(v.normals().is_none());
    }

    #[test]
    fn header_errors_carry_line_numbers() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty banana x\nend_header\n0\n";
        match parse_ply(text.as_bytes()) {
            Err(IngestError::PlyParse { line: 4, message }) => {
                assert!(message.contains("banana"), "{message}");
            }
            other => panic!("expected line-4 error, got {other:?}"),
        }
        let missing = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(parse_ply(missing.as_bytes()), Err(IngestError::PlyTruncated { .. })));
    }

    #[test]
    fn bad_token_errors_carry_line_numbers() {
        let text = "\
ply
format ascii 1.0
element vertex 2
property float x
property float y
property float z
end_header
0 0 0
1 oops 1
";
        match parse_ply(text.as_bytes()) {
            Err(IngestError::PlyParse { line: 9, message }) => {
                assert!(message.contains("oops"), "{message}");
            }
            other => panic!("expected line-9 error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_data_is_reported() {
        let cloud = random_cloud(5, 10, false, false);
        let mut bytes = write_ply(&PlyGeometry::Cloud(cloud), PlyEncoding::BinaryLittleEndian);
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(parse_ply(&bytes), Err(IngestError::PlyTruncated { .. })));
    }

    #[test]
    fn non_triangle_faces_are_rejected() {
        let text = "\
ply
format ascii 1.0
element vertex 4
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
4 0 1 2 3
";
        match parse_ply(text.as_bytes()) {
            Err(IngestError::PlyParse { message, .. }) => {
                assert!(message.contains("triangles"), "{message}");
            }
            other => panic!("expected triangle error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_formats_are_named() {
        let text = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        match parse_ply(text.as_bytes()) {
            Err(IngestError::PlyParse { message, .. }) => {
                assert!(message.contains("binary_big_endian"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_unit_normals_are_normalized_and_zero_kept() {
        let text = "\
ply
format ascii 1.0
element vertex 2
property float x
property float y
property float z
property float nx
property float ny
property float nz
end_header
0 0 0 3 0 0
1 1 1 0 0 0
";
        let parsed = parse_ply(text.as_bytes()).unwrap();
        let normals = parsed.vertices().normals().unwrap();
        assert_eq!(normals[0], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(normals[1], Vec3::zeros());
    }
}
