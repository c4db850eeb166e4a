//! Recorded choices of a mixed-subtree construction.
//!
//! ```text
//! tree-qi-trace v1 degree=3 D=1 levels=1
//! level=0 class=. image=. seed=- subtree=. assign=0->0,1->1,2->2
//! ```
//!
//! One line per class, in construction order. `seed` is the per-class random
//! stream seed, or `-` for deterministic policies. `restricted=1` marks a
//! class whose recorded subtree was cut to the sources actually present.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::MixedError;
use crate::tree::VertexAddress;

pub const TRACE_HEADER: &str = "tree-qi-trace v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassRecord {
    pub level: u32,
    /// Least member of the class.
    pub key: VertexAddress,
    pub image: VertexAddress,
    pub seed: Option<u64>,
    /// Vertices of `S_v`, sorted.
    pub subtree: Vec<VertexAddress>,
    /// `(source, image)` pairs sorted by source.
    pub assignment: Vec<(VertexAddress, VertexAddress)>,
    pub restricted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildTrace {
    pub degree: u32,
    pub step: u32,
    pub levels: u32,
    pub classes: Vec<ClassRecord>,
}

fn join(items: &[VertexAddress]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_trace(trace: &BuildTrace) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{TRACE_HEADER} degree={} D={} levels={}",
        trace.degree, trace.step, trace.levels
    )
    .unwrap();
    for r in &trace.classes {
        let seed = r.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        let assign = r
            .assignment
            .iter()
            .map(|(s, i)| format!("{s}->{i}"))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            out,
            "level={} class={} image={} seed={seed} subtree={} assign={assign}",
            r.level,
            r.key,
            r.image,
            join(&r.subtree)
        )
        .unwrap();
        if r.restricted {
            out.push_str(" restricted=1");
        }
        out.push('\n');
    }
    out
}

fn field<'a>(token: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, MixedError> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| MixedError::TraceFormat {
            line,
            message: format!("expected `{key}=...`"),
        })
}

fn number<T: std::str::FromStr>(text: &str, line: usize) -> Result<T, MixedError> {
    text.parse().map_err(|_| MixedError::TraceFormat {
        line,
        message: format!("invalid number {text:?}"),
    })
}

fn address(text: &str, line: usize) -> Result<VertexAddress, MixedError> {
    text.parse().map_err(|e: crate::error::TreeError| MixedError::TraceFormat {
        line,
        message: e.to_string(),
    })
}

pub fn parse_trace(text: &str) -> Result<BuildTrace, MixedError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(MixedError::TraceFormat {
        line: 1,
        message: "empty trace".into(),
    })?;
    let rest = header.strip_prefix(TRACE_HEADER).ok_or(MixedError::TraceFormat {
        line: 1,
        message: format!("expected header `{TRACE_HEADER} ...`"),
    })?;
    let mut tokens = rest.split_whitespace();
    let mut trace = BuildTrace {
        degree: number(field(tokens.next(), "degree", 1)?, 1)?,
        step: number(field(tokens.next(), "D", 1)?, 1)?,
        levels: number(field(tokens.next(), "levels", 1)?, 1)?,
        classes: Vec::new(),
    };
    for (offset, text) in lines.enumerate() {
        let line = offset + 2;
        if text.trim().is_empty() {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let level = number(field(tokens.next(), "level", line)?, line)?;
        let key = address(field(tokens.next(), "class", line)?, line)?;
        let image = address(field(tokens.next(), "image", line)?, line)?;
        let seed = match field(tokens.next(), "seed", line)? {
            "-" => None,
            s => Some(number(s, line)?),
        };
        let subtree = field(tokens.next(), "subtree", line)?
            .split(',')
            .map(|s| address(s, line))
            .collect::<Result<Vec<_>, _>>()?;
        let assignment = field(tokens.next(), "assign", line)?
            .split(',')
            .map(|pair| {
                let (s, i) = pair.split_once("->").ok_or_else(|| MixedError::TraceFormat {
                    line,
                    message: format!("expected `<source>-><image>`, got {pair:?}"),
                })?;
                Ok((address(s, line)?, address(i, line)?))
            })
            .collect::<Result<Vec<_>, MixedError>>()?;
        let restricted = match tokens.next() {
            None => false,
            Some(t) => field(Some(t), "restricted", line)? == "1",
        };
        if tokens.next().is_some() {
            return Err(MixedError::TraceFormat {
                line,
                message: "trailing fields".into(),
            });
        }
        trace.classes.push(ClassRecord {
            level,
            key,
            image,
            seed,
            subtree,
            assignment,
            restricted,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixed::{build_mixed, MixedPolicy};
    use crate::tree::TreeShape;

    #[test]
    fn documented_layout() {
        let d3 = TreeShape::new(3).unwrap();
        let (_, trace) = build_mixed(d3, 1, 1, &MixedPolicy::Minimal).unwrap();
        assert_eq!(
            write_trace(&trace),
            "tree-qi-trace v1 degree=3 D=1 levels=1\n\
             level=0 class=. image=. seed=- subtree=. assign=0->0,1->1,2->2\n"
        );
    }

    #[test]
    fn round_trip() {
        let d4 = TreeShape::new(4).unwrap();
        let (_, mut trace) = build_mixed(d4, 2, 2, &MixedPolicy::Random { seed: 9 }).unwrap();
        trace.classes[0].restricted = true;
        assert_eq!(parse_trace(&write_trace(&trace)).unwrap(), trace);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "tree-qi-trace v1 degree=3 D=1 levels=1\nlevel=0 class=. image=. seed=x subtree=. assign=0->0\n";
        match parse_trace(text) {
            Err(MixedError::TraceFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_trace("tree-qi v1 degree=3 radius=1\n"),
            Err(MixedError::TraceFormat { line: 1, .. })
        ));
    }
}
