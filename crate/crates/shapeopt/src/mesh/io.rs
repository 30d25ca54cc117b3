//! Mesh file formats: the native line-based text format and Gmsh v2 ASCII.
//!
//! Native format:
//! ```text
//! nodes N cells M bedges K
//! x y          (N lines)
//! i j k        (M lines, counterclockwise)
//! i j TAG      (K lines, TAG in {inflow, outflow, slip, design})
//! ```

use super::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::util::write_atomic;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    NativeText,
    GmshV2,
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    match format {
        MeshFormat::NativeText => parse_native(&name, &text),
        MeshFormat::GmshV2 => parse_gmsh(&name, &text),
    }
}

pub fn save_native(mesh: &Mesh, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(
            w,
            "nodes {} cells {} bedges {}",
            mesh.node_count(),
            mesh.cell_count(),
            mesh.boundary_edges().len()
        )?;
        for p in mesh.nodes() {
            writeln!(w, "{} {}", p.x, p.y)?;
        }
        for t in mesh.triangles() {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for be in mesh.boundary_edges() {
            writeln!(w, "{} {} {}", be.nodes[0], be.nodes[1], be.tag.name())?;
        }
        Ok(())
    })
}

fn err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_native(path: &str, text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate();
    let (ln0, header) = lines
        .next()
        .ok_or_else(|| err(path, 1, "empty mesh file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "nodes" || h[2] != "cells" || h[4] != "bedges" {
        return Err(err(path, ln0 + 1, "expected header `nodes N cells M bedges K`"));
    }
    let parse_count = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| err(path, ln0 + 1, format!("bad {what} count `{s}`")))
    };
    let n = parse_count(h[1], "node")?;
    let m = parse_count(h[3], "cell")?;
    let k = parse_count(h[5], "boundary edge")?;

    let mut nodes = Vec::with_capacity(n);
    let mut tris = Vec::with_capacity(m);
    let mut edges = Vec::with_capacity(k);
    for _ in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(path, 0, "unexpected end of file in node section"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(err(path, ln + 1, "expected `x y`"));
        }
        let x: f64 = f[0]
            .parse()
            .map_err(|_| err(path, ln + 1, format!("bad coordinate `{}`", f[0])))?;
        let y: f64 = f[1]
            .parse()
            .map_err(|_| err(path, ln + 1, format!("bad coordinate `{}`", f[1])))?;
        nodes.push(Vec2::new(x, y));
    }
    for _ in 0..m {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(path, 0, "unexpected end of file in cell section"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(path, ln + 1, "expected `i j k`"));
        }
        let mut t = [0usize; 3];
        for (slot, s) in t.iter_mut().zip(&f) {
            *slot = s
                .parse()
                .map_err(|_| err(path, ln + 1, format!("bad node index `{s}`")))?;
        }
        tris.push(t);
    }
    for _ in 0..k {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| err(path, 0, "unexpected end of file in boundary edge section"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(path, ln + 1, "expected `i j TAG`"));
        }
        let a: usize = f[0]
            .parse()
            .map_err(|_| err(path, ln + 1, format!("bad node index `{}`", f[0])))?;
        let b: usize = f[1]
            .parse()
            .map_err(|_| err(path, ln + 1, format!("bad node index `{}`", f[1])))?;
        let tag = BoundaryTag::parse(f[2])
            .ok_or_else(|| err(path, ln + 1, format!("unknown boundary tag `{}`", f[2])))?;
        edges.push(BoundaryEdge { nodes: [a, b], tag });
    }
    Mesh::new(nodes, tris, edges).map_err(|e| match e {
        Error::Mesh(msg) => err(path, 0, msg),
        other => other,
    })
}

/// Gmsh v2.2 ASCII reader. Boundary tags come from `$PhysicalNames`: line
/// elements whose physical name is one of the native tag names.
fn parse_gmsh(path: &str, text: &str) -> Result<Mesh> {
    let lines: Vec<&str> = text.lines().collect();
    let find_section = |name: &str| -> Option<usize> {
        lines.iter().position(|l| l.trim() == name)
    };

    let mut tag_names: HashMap<i64, BoundaryTag> = HashMap::new();
    if let Some(s) = find_section("$PhysicalNames") {
        let count: usize = lines
            .get(s + 1)
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| err(path, s + 2, "bad $PhysicalNames count"))?;
        for i in 0..count {
            let ln = s + 2 + i;
            let f: Vec<&str> = lines
                .get(ln)
                .ok_or_else(|| err(path, ln + 1, "unexpected end of $PhysicalNames"))?
                .split_whitespace()
                .collect();
            if f.len() < 3 {
                return Err(err(path, ln + 1, "expected `dim id \"name\"`"));
            }
            let id: i64 = f[1]
                .parse()
                .map_err(|_| err(path, ln + 1, "bad physical id"))?;
            let name = f[2..].join(" ");
            let name = name.trim_matches('"');
            if let Some(tag) = BoundaryTag::parse(name) {
                tag_names.insert(id, tag);
            }
        }
    }

    let s = find_section("$Nodes").ok_or_else(|| err(path, 1, "missing $Nodes section"))?;
    let n: usize = lines
        .get(s + 1)
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| err(path, s + 2, "bad node count"))?;
    let mut nodes = Vec::with_capacity(n);
    let mut id_map: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let ln = s + 2 + i;
        let f: Vec<&str> = lines
            .get(ln)
            .ok_or_else(|| err(path, ln + 1, "unexpected end of $Nodes"))?
            .split_whitespace()
            .collect();
        if f.len() < 3 {
            return Err(err(path, ln + 1, "expected `id x y z`"));
        }
        let id: usize = f[0].parse().map_err(|_| err(path, ln + 1, "bad node id"))?;
        let x: f64 = f[1].parse().map_err(|_| err(path, ln + 1, "bad x"))?;
        let y: f64 = f[2].parse().map_err(|_| err(path, ln + 1, "bad y"))?;
        id_map.insert(id, nodes.len());
        nodes.push(Vec2::new(x, y));
    }

    let s = find_section("$Elements").ok_or_else(|| err(path, 1, "missing $Elements section"))?;
    let m: usize = lines
        .get(s + 1)
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| err(path, s + 2, "bad element count"))?;
    let mut tris = Vec::new();
    let mut edges = Vec::new();
    for i in 0..m {
        let ln = s + 2 + i;
        let f: Vec<&str> = lines
            .get(ln)
            .ok_or_else(|| err(path, ln + 1, "unexpected end of $Elements"))?
            .split_whitespace()
            .collect();
        if f.len() < 3 {
            return Err(err(path, ln + 1, "short element line"));
        }
        let etype: usize = f[1]
            .parse()
            .map_err(|_| err(path, ln + 1, "bad element type"))?;
        let ntags: usize = f[2].parse().map_err(|_| err(path, ln + 1, "bad tag count"))?;
        let conn = &f[3 + ntags..];
        let node_at = |k: usize| -> Result<usize> {
            let id: usize = conn[k]
                .parse()
                .map_err(|_| err(path, ln + 1, "bad node reference"))?;
            id_map
                .get(&id)
                .copied()
                .ok_or_else(|| err(path, ln + 1, format!("unknown node id {id}")))
        };
        match etype {
            1 => {
                if conn.len() < 2 {
                    return Err(err(path, ln + 1, "line element needs 2 nodes"));
                }
                let phys: i64 = if ntags >= 1 {
                    f[3].parse().map_err(|_| err(path, ln + 1, "bad physical tag"))?
                } else {
                    -1
                };
                let tag = tag_names.get(&phys).copied().ok_or_else(|| {
                    err(
                        path,
                        ln + 1,
                        format!("boundary line with unmapped physical tag {phys}"),
                    )
                })?;
                edges.push(BoundaryEdge {
                    nodes: [node_at(0)?, node_at(1)?],
                    tag,
                });
            }
            2 => {
                if conn.len() < 3 {
                    return Err(err(path, ln + 1, "triangle element needs 3 nodes"));
                }
                tris.push([node_at(0)?, node_at(1)?, node_at(2)?]);
            }
            15 => {} // point elements carry no information we use
            other => {
                return Err(err(path, ln + 1, format!("unsupported element type {other}")));
            }
        }
    }

    // Gmsh files may list nodes that only belong to ignored elements; drop them.
    let mut used = vec![false; nodes.len()];
    for t in &tris {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut packed = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = packed.len();
            packed.push(nodes[i]);
        }
    }
    let tris: Vec<[usize; 3]> = tris
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();
    let edges: Vec<BoundaryEdge> = edges
        .iter()
        .map(|e| {
            if !used[e.nodes[0]] || !used[e.nodes[1]] {
                return Err(err(
                    path,
                    0,
                    format!("boundary edge ({}, {}) not attached to any triangle", e.nodes[0], e.nodes[1]),
                ));
            }
            Ok(BoundaryEdge {
                nodes: [remap[e.nodes[0]], remap[e.nodes[1]]],
                tag: e.tag,
            })
        })
        .collect::<Result<_>>()?;

    Mesh::new(packed, tris, edges).map_err(|e| match e {
        Error::Mesh(msg) => err(path, 0, msg),
        other => other,
    })
}
