//! ASCII OFF reader/writer restricted to triangle faces.

use std::io::Write;

use super::{SurfaceMesh, Vec3};
use crate::error::{Error, Result};

/// Parse an OFF document into vertices and triangles.
///
/// Accepts `#` comments, blank lines, and the counts either on the header
/// line (`OFF nv nf ne`) or on the following line. Faces must be `3 i j k`.
pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(Error::Parse {
            line: header_line,
            message: format!("expected header \"OFF\", found {header:?}"),
        });
    }
    let rest: Vec<&str> = header_tokens.collect();
    let (count_line, counts) = if rest.is_empty() {
        let (n, l) = lines.next().ok_or(Error::Parse {
            line: header_line + 1,
            message: "missing counts line".into(),
        })?;
        (n, parse_numbers::<usize>(l, n)?)
    } else {
        (header_line, parse_numbers::<usize>(&rest.join(" "), header_line)?)
    };
    if counts.len() < 2 {
        return Err(Error::Parse {
            line: count_line,
            message: "counts line needs vertex and face counts".into(),
        });
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines.next().ok_or(Error::Parse {
            line: count_line,
            message: format!("expected {nv} vertices, file ended early"),
        })?;
        let xyz = parse_numbers::<f64>(l, n)?;
        if xyz.len() < 3 {
            return Err(Error::Parse {
                line: n,
                message: "vertex line needs three coordinates".into(),
            });
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines.next().ok_or(Error::Parse {
            line: count_line,
            message: format!("expected {nf} faces, file ended early"),
        })?;
        let mut tokens = l.split_whitespace();
        let arity: usize = parse_token(tokens.next(), n)?;
        if arity != 3 {
            return Err(Error::Parse {
                line: n,
                message: format!("only triangular faces are supported, found {arity}-gon"),
            });
        }
        let mut tri = [0usize; 3];
        for slot in tri.iter_mut() {
            *slot = parse_token(tokens.next(), n)?;
            if *slot >= nv {
                return Err(Error::Parse {
                    line: n,
                    message: format!("vertex index {slot} out of range"),
                });
            }
        }
        triangles.push(tri);
    }
    Ok((vertices, triangles))
}

/// Write a mesh as ASCII OFF.
pub fn write_off(mesh: &SurfaceMesh, mut out: impl Write) -> Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.vertices().len(), mesh.panel_count())?;
    for v in mesh.vertices() {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

fn parse_numbers<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
    line.split_whitespace().map(|tok| parse_token(Some(tok), n)).collect()
}

fn parse_token<T: std::str::FromStr>(tok: Option<&str>, n: usize) -> Result<T> {
    let tok = tok.ok_or(Error::Parse {
        line: n,
        message: "missing value".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line: n,
        message: format!("cannot parse {tok:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "OFF
# unit cube
8 12 0
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
3 0 2 1
3 0 3 2
3 4 5 6
3 4 6 7
3 0 1 5
3 0 5 4
3 1 2 6
3 1 6 5
3 2 3 7
3 2 7 6
3 3 0 4
3 3 4 7
";

    #[test]
    fn cube_loads() {
        let (v, t) = parse_off(CUBE).unwrap();
        let mesh = SurfaceMesh::new(v, t).unwrap();
        assert_eq!(mesh.panel_count(), 12);
        assert!((crate::geometry::area(&mesh) - 6.0).abs() < 1e-12);
        assert!((mesh.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts_on_header_line() {
        let text = CUBE.replacen("OFF\n# unit cube\n8 12 0", "OFF 8 12 0", 1);
        assert_eq!(parse_off(&text).unwrap().1.len(), 12);
    }

    #[test]
    fn open_cube_is_not_closed() {
        let text = CUBE.replacen("8 12 0", "8 11 0", 1);
        let (v, t) = parse_off(&text).unwrap();
        let err = SurfaceMesh::new(v, t).unwrap_err();
        assert!(err.to_string().contains("not closed"), "{err}");
    }

    #[test]
    fn rejects_bad_header_and_quads() {
        assert!(matches!(parse_off("PLY\n"), Err(Error::Parse { .. })));
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(parse_off(quad).is_err());
        let range = "OFF\n3 1 0\n0 0 0\n1 0 0\n1 1 0\n3 0 1 7\n";
        assert!(parse_off(range).is_err());
    }

    #[test]
    fn write_then_parse() {
        let mesh = crate::geometry::make_sphere_mesh(1.0, 1).unwrap();
        let mut buf = Vec::new();
        write_off(&mesh, &mut buf).unwrap();
        let (v, t) = parse_off(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(t, mesh.triangles());
        assert_eq!(v, mesh.vertices());
    }
}
