//! Geometry-only Wavefront OBJ reader (`v` and `f` records).

use std::path::Path;

use super::mesh::{MeshBuild, TriMesh};
use super::vec::Vec3;
use super::GeometryError;

/// Reads an OBJ file. Polygons are fan-triangulated; other record types
/// (normals, texture coordinates, groups, materials) are ignored.
pub fn load_obj(path: impl AsRef<Path>) -> Result<MeshBuild, GeometryError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<MeshBuild, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let err = |msg: String| GeometryError::Ingestion {
            line: line_no,
            message: msg,
        };
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(format!("bad vertex coordinate: {e}")))?;
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(err(format!(
                        "vertex needs 3 coordinates, found {}",
                        coords.len()
                    )));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<u32> = tokens
                    .map(|t| resolve_index(t, vertices.len()).map_err(&err))
                    .collect::<Result<_, _>>()?;
                if refs.len() < 3 {
                    return Err(err(format!(
                        "face needs at least 3 vertices, found {}",
                        refs.len()
                    )));
                }
                for i in 1..refs.len() - 1 {
                    faces.push([refs[0], refs[i], refs[i + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::build(vertices, faces)
}

/// Resolves `a`, `a/b`, `a//c`, `a/b/c` (1-based, negative = relative) to a
/// 0-based vertex index.
fn resolve_index(token: &str, seen: usize) -> Result<u32, String> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| format!("bad face index '{token}'"))?;
    let resolved = match i {
        0 => return Err("face index 0 is invalid".into()),
        i if i > 0 => i - 1,
        i => seen as i64 + i,
    };
    if resolved < 0 || resolved >= seen as i64 {
        return Err(format!(
            "face index {i} out of range ({seen} vertices defined so far)"
        ));
    }
    Ok(resolved as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 3 4 8
f 3 8 7
f 2 3 7
f 2 7 6
f 1 5 8
f 1 8 4
";

    #[test]
    fn cube_counts() {
        let m = parse_obj(CUBE).unwrap().mesh;
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.face_count(), 12);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
            .unwrap()
            .mesh;
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn slash_and_negative_indices() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1/2\n")
            .unwrap()
            .mesh;
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn two_vertex_face_reports_line() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nf 1 2\n").unwrap_err();
        match err {
            GeometryError::Ingestion { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_vertex_reports_line() {
        let err = parse_obj("v 0 0 0\nv 1 zero 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::Ingestion { line: 2, .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_obj("/nonexistent/thing.obj").unwrap_err();
        assert!(matches!(err, GeometryError::Io { .. }));
    }
}
