//! Text-format ingestion: OFF meshes, ASCII PLY and XYZ point clouds.
//!
//! Binary PLY is rejected with an explicit error rather than misread.

use crate::error::{Error, Result};
use crate::geom::{PointCloud, TriangleMesh};

/// Lines of the input paired with their 1-based line numbers, with blank
/// lines and `#` comments dropped.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected {what}, got `{tok}`"),
    })
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = parse_num(tok, line, "a number")?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite coordinate `{tok}`"),
        });
    }
    Ok(v)
}

/// Parse an OFF mesh.
///
/// Accepts both the two-line header (`OFF` then counts) and the compact
/// single-line form (`OFF nv nf ne`). Polygons with more than three sides
/// are fan-triangulated around their first vertex.
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let lines = content_lines(text);
    let mut pos = 0;
    let (hline, header) = *lines.first().ok_or(Error::Parse {
        line: 1,
        msg: "empty OFF file".into(),
    })?;
    let mut htoks = header.split_whitespace();
    let magic = htoks.next().unwrap_or("");
    if magic != "OFF" {
        return Err(Error::Parse {
            line: hline,
            msg: format!("expected OFF header, got `{magic}`"),
        });
    }
    let rest: Vec<&str> = htoks.collect();
    pos += 1;
    let (cline, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (l, s) = *lines.get(pos).ok_or(Error::Parse {
            line: hline,
            msg: "missing counts line".into(),
        })?;
        pos += 1;
        (l, s.split_whitespace().collect())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: cline,
            msg: "counts line needs at least vertex and face counts".into(),
        });
    }
    let nv: usize = parse_num(counts[0], cline, "vertex count")?;
    let nf: usize = parse_num(counts[1], cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = *lines.get(pos).ok_or(Error::Parse {
            line: cline,
            msg: format!("file ends before {nv} declared vertices"),
        })?;
        pos += 1;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::Parse {
                line: l,
                msg: format!("vertex line has {} of 3 coordinates", toks.len()),
            });
        }
        vertices.push([
            parse_coord(toks[0], l)?,
            parse_coord(toks[1], l)?,
            parse_coord(toks[2], l)?,
        ]);
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = *lines.get(pos).ok_or(Error::Parse {
            line: cline,
            msg: format!("file ends before {nf} declared faces"),
        })?;
        pos += 1;
        let toks: Vec<&str> = s.split_whitespace().collect();
        let arity: usize = parse_num(toks[0], l, "face vertex count")?;
        if arity < 3 {
            return Err(Error::Parse {
                line: l,
                msg: format!("face with {arity} vertices"),
            });
        }
        if toks.len() < 1 + arity {
            return Err(Error::Parse {
                line: l,
                msg: format!("face declares {arity} vertices but lists {}", toks.len() - 1),
            });
        }
        let mut idx = Vec::with_capacity(arity);
        for tok in &toks[1..=arity] {
            let v: usize = parse_num(tok, l, "vertex index")?;
            if v >= nv {
                return Err(Error::Parse {
                    line: l,
                    msg: format!("vertex index {v} out of range (have {nv})"),
                });
            }
            idx.push(v);
        }
        // Fan triangulation around the first polygon vertex.
        for i in 1..arity - 1 {
            faces.push([idx[0], idx[i], idx[i + 1]]);
        }
    }
    if pos != lines.len() {
        let (l, _) = lines[pos];
        return Err(Error::Parse {
            line: l,
            msg: "content after declared vertex and face records".into(),
        });
    }
    TriangleMesh::new(vertices, faces)
}

/// Parse an ASCII PLY point cloud. Only the vertex element's `x`, `y`, `z`
/// properties are read; other properties are skipped positionally.
pub fn parse_ply_ascii(text: &str) -> Result<PointCloud> {
    let lines = content_lines(text);
    let mut it = lines.iter();
    let &(l0, magic) = it.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty PLY file".into(),
    })?;
    if magic != "ply" {
        return Err(Error::Parse {
            line: l0,
            msg: format!("expected `ply` header, got `{magic}`"),
        });
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex_element = false;
    // Positions of x, y, z within the vertex property list.
    let mut prop_names: Vec<String> = Vec::new();
    let mut header_end = 0usize;
    let mut saw_format = false;
    for (i, &(l, s)) in it.clone().enumerate() {
        let toks: Vec<&str> = s.split_whitespace().collect();
        match toks[0] {
            "format" => {
                let fmt = *toks.get(1).unwrap_or(&"");
                if fmt != "ascii" {
                    return Err(Error::UnsupportedFormat(format!(
                        "PLY format `{fmt}` (line {l}); only ascii is supported"
                    )));
                }
                saw_format = true;
            }
            "element" => {
                let name = *toks.get(1).unwrap_or(&"");
                in_vertex_element = name == "vertex";
                if in_vertex_element {
                    vertex_count = Some(parse_num(
                        toks.get(2).copied().unwrap_or(""),
                        l,
                        "vertex count",
                    )?);
                }
            }
            "property" if in_vertex_element => {
                if let Some(name) = toks.last() {
                    prop_names.push((*name).to_string());
                }
            }
            "end_header" => {
                header_end = i + 1;
                break;
            }
            _ => {}
        }
    }
    if header_end == 0 {
        return Err(Error::Parse {
            line: l0,
            msg: "missing end_header".into(),
        });
    }
    if !saw_format {
        return Err(Error::Parse {
            line: l0,
            msg: "missing format line".into(),
        });
    }
    let nv = vertex_count.ok_or(Error::Parse {
        line: l0,
        msg: "missing vertex element".into(),
    })?;
    let find = |name: &str| -> Result<usize> {
        prop_names
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::Parse {
                line: l0,
                msg: format!("vertex element lacks property `{name}`"),
            })
    };
    let (ix, iy, iz) = (find("x")?, find("y")?, find("z")?);

    let body: Vec<&(usize, &str)> = lines[1 + header_end..].iter().collect();
    if body.len() < nv {
        return Err(Error::Parse {
            line: lines.last().map(|&(l, _)| l).unwrap_or(1),
            msg: format!("declared {nv} vertices, found {}", body.len()),
        });
    }
    let mut points = Vec::with_capacity(nv);
    for &&(l, s) in body.iter().take(nv) {
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < prop_names.len() {
            return Err(Error::Parse {
                line: l,
                msg: format!(
                    "vertex line has {} of {} declared properties",
                    toks.len(),
                    prop_names.len()
                ),
            });
        }
        points.push([
            parse_coord(toks[ix], l)?,
            parse_coord(toks[iy], l)?,
            parse_coord(toks[iz], l)?,
        ]);
    }
    Ok(PointCloud::new(points))
}

/// Parse whitespace-separated `x y z` lines.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (l, s) in content_lines(text) {
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line: l,
                msg: format!("expected 3 coordinates, got {}", toks.len()),
            });
        }
        points.push([
            parse_coord(toks[0], l)?,
            parse_coord(toks[1], l)?,
            parse_coord(toks[2], l)?,
        ]);
    }
    Ok(PointCloud::new(points))
}

/// Format a value with 9 significant digits in plain decimal notation.
fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Serialize a cloud as one `x y z` line per point, 9 significant digits.
pub fn write_xyz(pc: &PointCloud) -> String {
    let mut out = String::with_capacity(pc.len() * 36);
    for p in &pc.points {
        out.push_str(&fmt_sig9(p[0]));
        out.push(' ');
        out.push_str(&fmt_sig9(p[1]));
        out.push(' ');
        out.push_str(&fmt_sig9(p[2]));
        out.push('\n');
    }
    out
}
