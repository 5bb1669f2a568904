//! Colored point clouds and PLY file I/O.
//!
//! Only `vertex` elements are consumed; faces and edges are skipped. Clouds
//! without color properties load with every channel set to neutral gray and
//! `colorless() == true`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One point: 3D position plus an RGB color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, r: u8, g: u8, b: u8) -> Self {
        Self { x, y, z, r, g, b }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Immutable set of colored points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    colorless: bool,
}

impl PointCloud {
    /// Builds a cloud from points, rejecting non-finite coordinates.
    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        Self::with_colorless(points, false)
    }

    fn with_colorless(points: Vec<Point>, colorless: bool) -> Result<Self> {
        for p in &points {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFiniteCoordinate);
            }
        }
        Ok(Self { points, colorless })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when the source file carried no color properties.
    pub fn colorless(&self) -> bool {
        self.colorless
    }

    /// Componentwise min/max corners over all points.
    pub fn bounding_box(&self) -> Result<BoundingBox> {
        if self.points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for (i, c) in p.coords().iter().enumerate() {
                min[i] = min[i].min(*c);
                max[i] = max[i].max(*c);
            }
        }
        Ok(BoundingBox { min, max })
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoundingBox {
    /// Euclidean distance between the two corners.
    pub fn diagonal(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..3 {
            let d = self.max[i] - self.min[i];
            sum += d * d;
        }
        sum.sqrt()
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    /// Largest side length of the box.
    pub fn max_extent(&self) -> f64 {
        (self.max[0] - self.min[0])
            .max(self.max[1] - self.min[1])
            .max(self.max[2] - self.min[2])
    }
}

// ---------------------------------------------------------------------------
// PLY parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyType {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    ptype: PropertyType,
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

struct Header {
    format: Format,
    elements: Vec<ElementDecl>,
    body_offset: usize,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedHeader(msg.into())
}

fn parse_header(data: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut next_line = || -> Result<&str> {
        if pos >= data.len() {
            return Err(malformed("header ends before end_header"));
        }
        let rest = &data[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("header ends before end_header"))?;
        let line = &rest[..end];
        pos += end + 1;
        let line = std::str::from_utf8(line)
            .map_err(|_| malformed("header is not valid UTF-8"))?;
        Ok(line.trim_end_matches('\r'))
    };

    if next_line()?.trim() != "ply" {
        return Err(malformed("file does not start with 'ply'"));
    }

    let mut format: Option<Format> = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        let line = next_line()?;
        let mut tokens = line.split_ascii_whitespace();
        let Some(keyword) = tokens.next() else {
            continue; // blank line
        };
        match keyword {
            "comment" | "obj_info" => {}
            "format" => {
                if format.is_some() {
                    return Err(malformed("duplicate format line"));
                }
                let kind = tokens.next().ok_or_else(|| malformed("format line lacks a type"))?;
                let version = tokens.next().ok_or_else(|| malformed("format line lacks a version"))?;
                if version != "1.0" {
                    return Err(Error::UnsupportedFormat(format!("PLY version {version}")));
                }
                format = Some(match kind {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::UnsupportedFormat("binary_big_endian".into()))
                    }
                    other => return Err(malformed(format!("unknown format '{other}'"))),
                });
            }
            "element" => {
                let name = tokens.next().ok_or_else(|| malformed("element lacks a name"))?;
                let count: usize = tokens
                    .next()
                    .ok_or_else(|| malformed("element lacks a count"))?
                    .parse()
                    .map_err(|_| malformed("element count is not an integer"))?;
                elements.push(ElementDecl {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let elem = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property declared before any element"))?;
                let first = tokens.next().ok_or_else(|| malformed("property lacks a type"))?;
                let ptype = if first == "list" {
                    let count = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| malformed("bad list count type"))?;
                    let item = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| malformed("bad list item type"))?;
                    PropertyType::List { count, item }
                } else {
                    PropertyType::Scalar(
                        ScalarType::parse(first)
                            .ok_or_else(|| malformed(format!("unknown property type '{first}'")))?,
                    )
                };
                let name = tokens.next().ok_or_else(|| malformed("property lacks a name"))?;
                elem.properties.push(Property {
                    name: name.to_string(),
                    ptype,
                });
            }
            "end_header" => break,
            other => return Err(malformed(format!("unknown header keyword '{other}'"))),
        }
    }

    let format = format.ok_or_else(|| malformed("no format line"))?;
    Ok(Header {
        format,
        elements,
        body_offset: pos,
    })
}

/// Indices into the vertex property list for each consumed field.
struct VertexLayout {
    x: usize,
    y: usize,
    z: usize,
    rgb: Option<[usize; 3]>,
}

const COLOR_ALIASES: [[&str; 3]; 3] = [
    ["red", "green", "blue"],
    ["r", "g", "b"],
    ["diffuse_red", "diffuse_green", "diffuse_blue"],
];

fn resolve_vertex_layout(decl: &ElementDecl) -> Result<VertexLayout> {
    let find = |name: &str| decl.properties.iter().position(|p| p.name == name);
    let coord = |name: &str| -> Result<usize> {
        let idx = find(name).ok_or_else(|| malformed(format!("vertex element lacks '{name}'")))?;
        match decl.properties[idx].ptype {
            PropertyType::Scalar(ScalarType::F32) | PropertyType::Scalar(ScalarType::F64) => Ok(idx),
            _ => Err(Error::UnsupportedFormat(format!(
                "coordinate '{name}' is not float or double"
            ))),
        }
    };
    let x = coord("x")?;
    let y = coord("y")?;
    let z = coord("z")?;

    let mut rgb = None;
    for alias in COLOR_ALIASES {
        let idx: Vec<Option<usize>> = alias.iter().map(|n| find(n)).collect();
        if let [Some(r), Some(g), Some(b)] = idx[..] {
            let all_uchar = [r, g, b].iter().all(|&i| {
                matches!(decl.properties[i].ptype, PropertyType::Scalar(ScalarType::U8))
            });
            if all_uchar {
                rgb = Some([r, g, b]);
                break;
            }
        }
    }
    Ok(VertexLayout { x, y, z, rgb })
}

struct ByteCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::TruncatedData);
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_scalar_f64(&mut self, t: ScalarType) -> Result<f64> {
        let bytes = self.take(t.size())?;
        Ok(match t {
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes.try_into().unwrap()),
        })
    }

    fn skip_property(&mut self, p: &PropertyType) -> Result<()> {
        match p {
            PropertyType::Scalar(t) => {
                self.take(t.size())?;
            }
            PropertyType::List { count, item } => {
                let n = self.read_scalar_f64(*count)?;
                if !(n.is_finite() && n >= 0.0) {
                    return Err(Error::MalformedBody("negative list count".into()));
                }
                self.take(n as usize * item.size())?;
            }
        }
        Ok(())
    }
}

fn parse_binary_vertices(
    body: &[u8],
    header: &Header,
    decl_index: usize,
    layout: &VertexLayout,
) -> Result<Vec<Point>> {
    let mut cur = ByteCursor { data: body, pos: 0 };

    // Skip any elements declared before the vertex element.
    for elem in &header.elements[..decl_index] {
        for _ in 0..elem.count {
            for prop in &elem.properties {
                cur.skip_property(&prop.ptype)?;
            }
        }
    }

    let decl = &header.elements[decl_index];
    let mut points = Vec::with_capacity(decl.count);
    for _ in 0..decl.count {
        let mut coords = [0.0f64; 3];
        let mut rgb = [128u8; 3];
        for (idx, prop) in decl.properties.iter().enumerate() {
            let coord_slot = [layout.x, layout.y, layout.z].iter().position(|&i| i == idx);
            let color_slot = layout.rgb.and_then(|c| c.iter().position(|&i| i == idx));
            match (&prop.ptype, coord_slot, color_slot) {
                (PropertyType::Scalar(t), Some(slot), _) => {
                    coords[slot] = cur.read_scalar_f64(*t)?;
                }
                (PropertyType::Scalar(ScalarType::U8), _, Some(slot)) => {
                    rgb[slot] = cur.take(1)?[0];
                }
                (ptype, _, _) => cur.skip_property(ptype)?,
            }
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        points.push(Point::new(coords[0], coords[1], coords[2], rgb[0], rgb[1], rgb[2]));
    }
    Ok(points)
}

struct TokenCursor<'a> {
    it: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> TokenCursor<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.it.next().ok_or(Error::TruncatedData)
    }

    fn next_f64(&mut self) -> Result<f64> {
        let tok = self.next()?;
        tok.parse::<f64>()
            .map_err(|_| Error::MalformedBody(format!("expected a number, found '{tok}'")))
    }

    fn skip_property(&mut self, p: &PropertyType) -> Result<()> {
        match p {
            PropertyType::Scalar(_) => {
                self.next()?;
            }
            PropertyType::List { .. } => {
                let n: usize = self
                    .next()?
                    .parse()
                    .map_err(|_| Error::MalformedBody("list count is not an integer".into()))?;
                for _ in 0..n {
                    self.next()?;
                }
            }
        }
        Ok(())
    }
}

fn parse_ascii_vertices(
    body: &[u8],
    header: &Header,
    decl_index: usize,
    layout: &VertexLayout,
) -> Result<Vec<Point>> {
    let text = std::str::from_utf8(body)
        .map_err(|_| Error::MalformedBody("ascii body is not valid UTF-8".into()))?;
    let mut cur = TokenCursor {
        it: text.split_ascii_whitespace(),
    };

    for elem in &header.elements[..decl_index] {
        for _ in 0..elem.count {
            for prop in &elem.properties {
                cur.skip_property(&prop.ptype)?;
            }
        }
    }

    let decl = &header.elements[decl_index];
    let mut points = Vec::with_capacity(decl.count);
    for _ in 0..decl.count {
        let mut coords = [0.0f64; 3];
        let mut rgb = [128u8; 3];
        for (idx, prop) in decl.properties.iter().enumerate() {
            let coord_slot = [layout.x, layout.y, layout.z].iter().position(|&i| i == idx);
            let color_slot = layout.rgb.and_then(|c| c.iter().position(|&i| i == idx));
            match (&prop.ptype, coord_slot, color_slot) {
                (PropertyType::Scalar(_), Some(slot), _) => {
                    coords[slot] = cur.next_f64()?;
                }
                (PropertyType::Scalar(ScalarType::U8), _, Some(slot)) => {
                    let v = cur.next_f64()?;
                    if !(0.0..=255.0).contains(&v) {
                        return Err(Error::MalformedBody(format!("color value {v} out of range")));
                    }
                    rgb[slot] = v as u8;
                }
                (ptype, _, _) => cur.skip_property(ptype)?,
            }
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        points.push(Point::new(coords[0], coords[1], coords[2], rgb[0], rgb[1], rgb[2]));
    }
    Ok(points)
}

/// Loads a colored point cloud from an ascii or binary-little-endian PLY file.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let data = fs::read(path)?;
    load_ply_bytes(&data)
}

/// Same as [`load_ply`] but over an in-memory buffer.
pub fn load_ply_bytes(data: &[u8]) -> Result<PointCloud> {
    let header = parse_header(data)?;
    let decl_index = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| malformed("no vertex element"))?;
    let layout = resolve_vertex_layout(&header.elements[decl_index])?;
    let body = &data[header.body_offset..];
    let points = match header.format {
        Format::Ascii => parse_ascii_vertices(body, &header, decl_index, &layout)?,
        Format::BinaryLittleEndian => parse_binary_vertices(body, &header, decl_index, &layout)?,
    };
    PointCloud::with_colorless(points, layout.rgb.is_none())
}

/// Writes a cloud as binary-little-endian PLY with float32 coordinates and
/// uchar colors.
pub fn save_ply(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        pc.len()
    )?;
    for p in pc.points() {
        w.write_all(&(p.x as f32).to_le_bytes())?;
        w.write_all(&(p.y as f32).to_le_bytes())?;
        w.write_all(&(p.z as f32).to_le_bytes())?;
        w.write_all(&[p.r, p.g, p.b])?;
    }
    w.flush()?;
    Ok(())
}
