//! Line-oriented network file:
//!
//! ```text
//! JUNCTION id x y
//! LINK id from_junction to_junction length_m lanes dbl vff_kmh
//! SIGNAL junction cycle_s offset_s split
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{Junction, Link, RoadNetwork, Signal};
use crate::error::{Error, Result};

pub fn load_network(path: impl AsRef<Path>) -> Result<RoadNetwork> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, &path.display().to_string())
}

fn field<T: FromStr>(tokens: &[&str], i: usize, what: &str, src: &str, line: usize) -> Result<T> {
    let tok = tokens
        .get(i)
        .ok_or_else(|| Error::parse(src, line, format!("missing field `{what}`")))?;
    tok.parse()
        .map_err(|_| Error::parse(src, line, format!("bad `{what}`: {tok:?}")))
}

/// Parses network text; `src` names the origin in error messages.
pub fn parse_network(text: &str, src: &str) -> Result<RoadNetwork> {
    let mut junctions = Vec::new();
    let mut links = Vec::new();
    let mut signals = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(&kind) = tokens.first() else {
            continue;
        };
        let expect = |count: usize| {
            if tokens.len() != count {
                Err(Error::parse(
                    src,
                    line,
                    format!("{kind} takes {} fields, got {}", count - 1, tokens.len() - 1),
                ))
            } else {
                Ok(())
            }
        };
        match kind {
            "JUNCTION" => {
                expect(4)?;
                junctions.push(Junction {
                    id: field(&tokens, 1, "id", src, line)?,
                    x: field(&tokens, 2, "x", src, line)?,
                    y: field(&tokens, 3, "y", src, line)?,
                });
            }
            "LINK" => {
                expect(8)?;
                links.push(Link::new(
                    field(&tokens, 1, "id", src, line)?,
                    field(&tokens, 2, "from_junction", src, line)?,
                    field(&tokens, 3, "to_junction", src, line)?,
                    field(&tokens, 4, "length_m", src, line)?,
                    field(&tokens, 5, "lanes", src, line)?,
                    field(&tokens, 6, "dbl", src, line)?,
                    field(&tokens, 7, "vff_kmh", src, line)?,
                ));
            }
            "SIGNAL" => {
                expect(5)?;
                signals.push(Signal {
                    junction: field(&tokens, 1, "junction", src, line)?,
                    cycle_s: field(&tokens, 2, "cycle_s", src, line)?,
                    offset_s: field(&tokens, 3, "offset_s", src, line)?,
                    split: field(&tokens, 4, "phase_spec", src, line)?,
                });
            }
            other => {
                return Err(Error::parse(src, line, format!("unknown record {other:?}")));
            }
        }
    }
    RoadNetwork::new(junctions, links, signals)
}

pub fn write_network(net: &RoadNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} junctions, {} links, {} signals",
        net.junctions().len(),
        net.num_links(),
        net.signals().len()
    );
    for j in net.junctions() {
        let _ = writeln!(out, "JUNCTION {} {} {}", j.id, j.x, j.y);
    }
    for l in net.links() {
        let _ = writeln!(
            out,
            "LINK {} {} {} {} {} {} {}",
            l.id, l.from, l.to, l.length, l.lanes_total, l.lanes_dbl, l.free_flow_speed
        );
    }
    for s in net.signals() {
        let _ = writeln!(
            out,
            "SIGNAL {} {} {} {}",
            s.junction, s.cycle_s, s.offset_s, s.split
        );
    }
    out
}

pub fn save_network(net: &RoadNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_network(net)).map_err(|e| Error::io(path, e))
}
