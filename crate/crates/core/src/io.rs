//! PLY point-cloud input and run-record output.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::BenchRow;
use crate::error::{Error, Result};
use crate::geom::{RigidTransform, Vec3};
use crate::icp::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyHeader {
    pub format: PlyFormat,
    pub elements: Vec<Element>,
    /// Byte offset of the first body byte.
    pub body_offset: usize,
}

impl PlyHeader {
    pub fn vertex_count(&self) -> usize {
        self.elements
            .iter()
            .find(|e| e.name == "vertex")
            .map_or(0, |e| e.count)
    }
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn parse_ply_header(bytes: &[u8]) -> Result<PlyHeader> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Result<(usize, String)> {
        let start = *pos;
        let rest = &bytes[start..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(bytes.len(), "header ended before end_header"))?;
        *pos = start + end + 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| parse_err(start, "header is not valid UTF-8"))?;
        Ok((start, line.trim_end_matches('\r').trim().to_string()))
    };

    let (start, magic) = next_line(&mut pos)?;
    if magic != "ply" {
        return Err(parse_err(start, "missing 'ply' magic"));
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (start, line) = next_line(&mut pos)?;
        let mut words = line.split_whitespace();
        match words.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                let kind = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if version != "1.0" {
                    return Err(parse_err(start, format!("unsupported PLY version '{version}'")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(parse_err(start, "binary_big_endian is not supported"))
                    }
                    other => return Err(parse_err(start, format!("unknown format '{other}'"))),
                });
            }
            Some("element") => {
                let name = words
                    .next()
                    .ok_or_else(|| parse_err(start, "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(start, "element count is not a non-negative integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(start, "property before any element"))?;
                let parts: Vec<&str> = words.collect();
                let scalar = |name: &str| {
                    ScalarType::parse(name)
                        .ok_or_else(|| parse_err(start, format!("unknown property type '{name}'")))
                };
                let property = match parts.as_slice() {
                    ["list", count, item, name] => Property {
                        name: name.to_string(),
                        kind: PropertyKind::List {
                            count: scalar(count)?,
                            item: scalar(item)?,
                        },
                    },
                    [ty, name] => Property {
                        name: name.to_string(),
                        kind: PropertyKind::Scalar(scalar(ty)?),
                    },
                    _ => return Err(parse_err(start, format!("malformed property line '{line}'"))),
                };
                element.properties.push(property);
            }
            Some("end_header") => break,
            Some(other) => return Err(parse_err(start, format!("unexpected header keyword '{other}'"))),
        }
    }

    let format = format.ok_or_else(|| parse_err(pos, "header has no format line"))?;
    let vertex = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| parse_err(pos, "header declares no vertex element"))?;
    for axis in ["x", "y", "z"] {
        let found = vertex.properties.iter().find(|p| p.name == axis);
        match found {
            Some(Property {
                kind: PropertyKind::Scalar(_),
                ..
            }) => {}
            Some(_) => return Err(parse_err(pos, format!("vertex property '{axis}' is a list"))),
            None => return Err(parse_err(pos, format!("vertex element has no '{axis}' property"))),
        }
    }
    Ok(PlyHeader {
        format,
        elements,
        body_offset: pos,
    })
}

/// Vertex positions from PLY bytes, in declaration order.
pub fn parse_ply(bytes: &[u8]) -> Result<Vec<Vec3>> {
    let header = parse_ply_header(bytes)?;
    match header.format {
        PlyFormat::Ascii => parse_ascii_body(bytes, &header),
        PlyFormat::BinaryLittleEndian => parse_binary_body(bytes, &header),
    }
}

fn xyz_slots(element: &Element) -> [usize; 3] {
    ["x", "y", "z"].map(|a| element.properties.iter().position(|p| p.name == a).unwrap())
}

fn parse_binary_body(bytes: &[u8], header: &PlyHeader) -> Result<Vec<Vec3>> {
    let mut pos = header.body_offset;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if bytes.len() - *pos < n {
            return Err(parse_err(bytes.len(), "truncated body: unexpected end of file"));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };

    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let slots = if is_vertex { Some(xyz_slots(element)) } else { None };
        let mut out = Vec::with_capacity(if is_vertex { element.count } else { 0 });
        for _ in 0..element.count {
            let mut xyz = [0.0; 3];
            for (k, prop) in element.properties.iter().enumerate() {
                match &prop.kind {
                    PropertyKind::Scalar(ty) => {
                        let raw = take(&mut pos, ty.size())?;
                        if let Some(s) = slots {
                            if let Some(axis) = s.iter().position(|&slot| slot == k) {
                                xyz[axis] = ty.decode_le(raw);
                            }
                        }
                    }
                    PropertyKind::List { count, item } => {
                        let at = pos;
                        let n = count.decode_le(take(&mut pos, count.size())?);
                        if !(n >= 0.0) {
                            return Err(parse_err(at, "negative list length"));
                        }
                        take(&mut pos, n as usize * item.size())?;
                    }
                }
            }
            if is_vertex {
                out.push(Vec3::from_array(xyz));
            }
        }
        if is_vertex {
            return Ok(out);
        }
    }
    unreachable!("header validation guarantees a vertex element")
}

fn parse_ascii_body(bytes: &[u8], header: &PlyHeader) -> Result<Vec<Vec3>> {
    let body = &bytes[header.body_offset..];
    let mut lines = LineCursor {
        bytes: body,
        pos: 0,
        base: header.body_offset,
    };
    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let slots = xyz_slots_opt(element);
        let mut out = Vec::with_capacity(if is_vertex { element.count } else { 0 });
        for row in 0..element.count {
            let (start, line) = lines.next_nonempty().ok_or_else(|| {
                parse_err(
                    bytes.len(),
                    format!(
                        "truncated body: element '{}' declares {} rows, found {}",
                        element.name, element.count, row
                    ),
                )
            })?;
            let mut tokens = line.split_ascii_whitespace();
            let mut xyz = [0.0; 3];
            for (k, prop) in element.properties.iter().enumerate() {
                let mut next = || {
                    tokens
                        .next()
                        .ok_or_else(|| parse_err(start, format!("row has too few values for '{}'", prop.name)))
                };
                match &prop.kind {
                    PropertyKind::Scalar(_) => {
                        let tok = next()?;
                        if let Some(axis) = slots.and_then(|s| s.iter().position(|&slot| slot == k)) {
                            xyz[axis] = tok
                                .parse::<f64>()
                                .map_err(|_| parse_err(start, format!("'{tok}' is not a number")))?;
                        }
                    }
                    PropertyKind::List { .. } => {
                        let tok = next()?;
                        let n: usize = tok
                            .parse()
                            .map_err(|_| parse_err(start, format!("'{tok}' is not a list length")))?;
                        for _ in 0..n {
                            next()?;
                        }
                    }
                }
            }
            if tokens.next().is_some() {
                return Err(parse_err(start, "row has more values than declared properties"));
            }
            if is_vertex {
                out.push(Vec3::from_array(xyz));
            }
        }
        if is_vertex {
            return Ok(out);
        }
    }
    unreachable!("header validation guarantees a vertex element")
}

fn xyz_slots_opt(element: &Element) -> Option<[usize; 3]> {
    (element.name == "vertex").then(|| xyz_slots(element))
}

struct LineCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> LineCursor<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let rest = &self.bytes[start..];
            let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
            self.pos = start + end + 1;
            let line = std::str::from_utf8(&rest[..end]).ok()?.trim();
            if !line.is_empty() {
                return Some((self.base + start, line));
            }
        }
        None
    }
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let points = parse_ply(&bytes).map_err(|e| match e {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{message} (in {})", path.display()),
        },
        other => other,
    })?;
    PointCloud::new(points).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Serializes vertices with `double` x, y, z properties.
pub fn ply_bytes(points: &[Vec3], format: PlyFormat) -> Vec<u8> {
    let name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {name} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )
    .into_bytes();
    for p in points {
        match format {
            PlyFormat::Ascii => out.extend_from_slice(format!("{:e} {:e} {:e}\n", p.x, p.y, p.z).as_bytes()),
            PlyFormat::BinaryLittleEndian => {
                for c in p.to_array() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn write_ply(path: impl AsRef<Path>, points: &[Vec3], format: PlyFormat) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ply_bytes(points, format)).map_err(|e| Error::io(path, e))
}

/// One solver result on one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case_id: u32,
    pub solver: String,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub loss: f64,
    pub wall_time_ns: u64,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 11] = [
    "case_id",
    "solver",
    "phi",
    "theta",
    "psi",
    "tx",
    "ty",
    "tz",
    "loss",
    "wall_time_ns",
    "seed",
];

impl RunRecord {
    pub fn new(case_id: u32, solver: &str, transform: &RigidTransform, loss: f64, wall_time_ns: u64, seed: u64) -> Self {
        let (phi, theta, psi) = transform.euler_xyz();
        let t = transform.translation;
        RunRecord {
            case_id,
            solver: solver.to_string(),
            phi,
            theta,
            psi,
            tx: t.x,
            ty: t.y,
            tz: t.z,
            loss,
            wall_time_ns,
            seed,
        }
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.tx, self.ty, self.tz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss >= 0.0) {
            return Err(Error::invalid(format!("record loss must be non-negative, got {}", self.loss)));
        }
        if self.wall_time_ns == 0 {
            return Err(Error::invalid("record wall time must be positive"));
        }
        Ok(())
    }

    fn csv_fields(&self) -> [String; 11] {
        let r = |x: f64| format!("{x:.16e}");
        [
            self.case_id.to_string(),
            self.solver.clone(),
            r(self.phi),
            r(self.theta),
            r(self.psi),
            r(self.tx),
            r(self.ty),
            r(self.tz),
            r(self.loss),
            self.wall_time_ns.to_string(),
            self.seed.to_string(),
        ]
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// CSV with a fixed header; reals carry 17 significant digits.
pub fn write_records_csv_to<W: Write>(records: &[RunRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let wrap = |e: csv::Error| Error::Format {
        path: "<stream>".into(),
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for rec in records {
        rec.validate()?;
        w.write_record(rec.csv_fields()).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<stream>", e))
}

pub fn write_records_json_to<W: Write>(records: &[RunRecord], mut sink: W) -> Result<()> {
    for rec in records {
        rec.validate()?;
    }
    serde_json::to_writer_pretty(&mut sink, records).map_err(|e| Error::Format {
        path: "<stream>".into(),
        message: e.to_string(),
    })?;
    sink.write_all(b"\n").map_err(|e| Error::io("<stream>", e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Format { message, .. } => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    }
}

pub fn write_records_csv(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_csv_to(records, BufWriter::new(file)).map_err(|e| with_path(path, e))
}

pub fn write_records_json(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records_json_to(records, &mut w).map_err(|e| with_path(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected CSV header {header:?}"),
        });
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()
        .map_err(|e| csv_error(path, e))
}

pub fn read_records_json(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Timing rows as CSV: `n,solver,mean_ns,std_ns,samples,ratio_to_eig`, the
/// ratio left empty when EIG was not run.
pub fn write_bench_csv_to<W: Write>(rows: &[BenchRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let wrap = |e: csv::Error| Error::Format {
        path: "<stream>".into(),
        message: e.to_string(),
    };
    if rows.is_empty() {
        w.write_record(["n", "solver", "mean_ns", "std_ns", "samples", "ratio_to_eig"])
            .map_err(wrap)?;
    }
    for row in rows {
        w.serialize(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<stream>", e))
}

pub fn write_bench_json_to<W: Write>(rows: &[BenchRow], mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, rows).map_err(|e| Error::Format {
        path: "<stream>".into(),
        message: e.to_string(),
    })?;
    sink.write_all(b"\n").map_err(|e| Error::io("<stream>", e))
}
