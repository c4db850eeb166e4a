//! The `tree-qi v1` map file format.
//!
//! ```text
//! tree-qi v1 degree=3 radius=1
//! . .
//! 0 1
//! 1 0
//! 2 2
//! ```
//!
//! One `<source> <image>` line per domain vertex, sources in lexicographic
//! order.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::FiniteTreeMap;
use crate::error::MapError;
use crate::tree::{Ball, TreeShape, VertexAddress, DEFAULT_MAX_VERTICES};

pub const MAP_HEADER: &str = "tree-qi v1";

pub fn write_map(m: &FiniteTreeMap) -> String {
    let mut out = String::new();
    writeln!(out, "{MAP_HEADER} degree={} radius={}", m.shape().degree(), m.radius()).unwrap();
    for (source, image) in m.entries() {
        writeln!(out, "{source} {image}").unwrap();
    }
    out
}

fn header_field(token: Option<&str>, key: &str) -> Result<u32, MapError> {
    let value = token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| MapError::format(1, format!("expected `{key}=<n>` in header")))?;
    value
        .parse()
        .map_err(|_| MapError::format(1, format!("invalid {key} value {value:?}")))
}

pub fn parse_map(text: &str) -> Result<FiniteTreeMap, MapError> {
    parse_map_with_budget(text, DEFAULT_MAX_VERTICES)
}

pub fn parse_map_with_budget(text: &str, max_vertices: u64) -> Result<FiniteTreeMap, MapError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| MapError::format(1, "empty map file"))?;
    let mut tokens = header.split(' ');
    if tokens.next() != Some("tree-qi") || tokens.next() != Some("v1") {
        return Err(MapError::format(1, format!("expected header `{MAP_HEADER} ...`")));
    }
    let degree = header_field(tokens.next(), "degree")?;
    let radius = header_field(tokens.next(), "radius")?;
    if tokens.next().is_some() {
        return Err(MapError::format(1, "trailing fields in header"));
    }
    let shape = TreeShape::new(degree).map_err(|e| MapError::format(1, e.to_string()))?;
    let ball = Arc::new(Ball::new(shape, radius, max_vertices)?);

    let mut slots: Vec<Option<VertexAddress>> = vec![None; ball.len()];
    for (offset, line) in lines.enumerate() {
        let number = offset + 2;
        let mut parts = line.split(' ');
        let (Some(source), Some(image), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(MapError::format(number, "expected `<source> <image>`"));
        };
        let parse = |s: &str| -> Result<VertexAddress, MapError> {
            let v: VertexAddress = s.parse().map_err(|e: crate::error::TreeError| MapError::format(number, e.to_string()))?;
            shape
                .validate(&v)
                .map_err(|e| MapError::format(number, e.to_string()))?;
            Ok(v)
        };
        let source = parse(source)?;
        let image = parse(image)?;
        let index = ball.index_of(&source).ok_or_else(|| {
            MapError::format(number, format!("source {source} lies outside radius {radius}"))
        })?;
        if slots[index].is_some() {
            return Err(MapError::format(number, format!("duplicate source {source}")));
        }
        slots[index] = Some(image);
    }
    let mut images = Vec::with_capacity(slots.len());
    for (index, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(image) => images.push(image),
            None => return Err(MapError::MissingVertex(ball.address(index).clone())),
        }
    }
    FiniteTreeMap::from_ball(ball, images)
}

pub fn read_map_file(path: impl AsRef<Path>, max_vertices: u64) -> Result<FiniteTreeMap, MapError> {
    parse_map_with_budget(&std::fs::read_to_string(path)?, max_vertices)
}

pub fn write_map_file(m: &FiniteTreeMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    std::fs::write(path, write_map(m))?;
    Ok(())
}
