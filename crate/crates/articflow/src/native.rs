//! Native text formats for objects and triangle meshes.
//!
//! A scene is a line-oriented document:
//!
//! ```text
//! # comment
//! root body
//! link body box 0.4 0.5 0.3 mass 2.0
//! link drawer mesh drawer.tri
//! joint slide prismatic body drawer origin 0 0 0.1 0 0 0 1 axis 1 0 0 limits 0 0.4
//! ```
//!
//! Mesh paths are relative to the scene file. A link without surface is
//! written `link <id> none`. Mesh files list `v x y z` and `f i j k` records
//! with 0-based vertex indices.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use articflow_core::model::{ArticulatedObject, Geometry, JointKind, JointSpec, LinkSpec, TriMesh};
use articflow_core::{Point3, Pose, Translation3, UnitQuaternion, Vector3};
use nalgebra::Quaternion;

use crate::error::{read_to_string, write_bytes, Error, Result};

/// Quaternions further than this from unit norm are rejected rather than
/// renormalized.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

pub fn parse_mesh(text: &str, origin: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in lines(text) {
        let mut tok = Tokens::new(line, origin, lineno);
        match tok.word("record")? {
            "v" => {
                let p = [tok.float("x")?, tok.float("y")?, tok.float("z")?];
                vertices.push(Point3::new(p[0], p[1], p[2]));
            }
            "f" => triangles.push([tok.index("i")?, tok.index("j")?, tok.index("k")?]),
            other => return Err(Error::syntax(origin, lineno, format!("unknown mesh record `{other}`"))),
        }
        tok.finish()?;
    }
    TriMesh::new(vertices, triangles).map_err(|m| Error::Format(format!("{origin}: {m}")))
}

pub fn serialize_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    parse_mesh(&read_to_string(path)?, &path.display().to_string())
}

/// Parses a scene. `base_dir` resolves mesh paths; without it any mesh link
/// is an error.
pub fn parse_scene(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<ArticulatedObject> {
    let mut root: Option<String> = None;
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for (lineno, line) in lines(text) {
        let mut tok = Tokens::new(line, origin, lineno);
        match tok.word("record")? {
            "root" => {
                if root.is_some() {
                    return Err(Error::syntax(origin, lineno, "root declared twice"));
                }
                root = Some(tok.word("root id")?.to_string());
            }
            "link" => {
                let id = tok.word("link id")?;
                let geometry = match tok.word("geometry kind")? {
                    "box" => Geometry::Box { extents: tok.vec3("extent")? },
                    "mesh" => {
                        let rel = tok.word("mesh path")?;
                        let Some(dir) = base_dir else {
                            return Err(Error::syntax(origin, lineno, format!("cannot resolve mesh `{rel}` without a base directory")));
                        };
                        Geometry::Mesh(read_mesh(&dir.join(rel))?)
                    }
                    "none" => Geometry::Empty,
                    other => return Err(Error::syntax(origin, lineno, format!("unknown geometry `{other}`"))),
                };
                let mut link = LinkSpec::new(id, geometry).map_err(|e| Error::syntax(origin, lineno, e.to_string()))?;
                if tok.peek().is_some() {
                    tok.keyword("mass")?;
                    link = link.with_mass(tok.float("mass")?).map_err(|e| Error::syntax(origin, lineno, e.to_string()))?;
                }
                links.push(link);
            }
            "joint" => joints.push(parse_joint(&mut tok)?),
            other => return Err(Error::syntax(origin, lineno, format!("unknown record `{other}`"))),
        }
        tok.finish()?;
    }
    let root = root.ok_or_else(|| Error::Format(format!("{origin}: missing `root` record")))?;
    Ok(ArticulatedObject::new(&root, links, joints)?)
}

fn parse_joint(tok: &mut Tokens<'_>) -> Result<JointSpec> {
    let id = tok.word("joint id")?;
    let kind = match tok.word("joint kind")? {
        "revolute" => JointKind::Revolute,
        "prismatic" => JointKind::Prismatic,
        other => return Err(tok.error(format!("unsupported joint type `{other}`"))),
    };
    let parent = tok.word("parent link")?;
    let child = tok.word("child link")?;
    tok.keyword("origin")?;
    let t = tok.vec3("translation")?;
    let q = [tok.float("qx")?, tok.float("qy")?, tok.float("qz")?, tok.float("qw")?];
    let quat = Quaternion::new(q[3], q[0], q[1], q[2]);
    let norm = quat.norm();
    if !((norm - 1.0).abs() <= QUATERNION_TOLERANCE) {
        return Err(tok.error(format!("origin quaternion has norm {norm}, expected 1")));
    }
    tok.keyword("axis")?;
    let axis = tok.vec3("axis")?;
    tok.keyword("limits")?;
    let lower = tok.float("lower limit")?;
    let upper = tok.float("upper limit")?;
    let origin = Pose::from_parts(Translation3::from(t), UnitQuaternion::from_quaternion(quat));
    JointSpec::new(id, kind, parent, child, origin, axis, lower, upper).map_err(|e| tok.error(e.to_string()))
}

/// Scene text plus the mesh files it references, as `(relative path, text)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDocument {
    pub scene: String,
    pub meshes: Vec<(String, String)>,
}

/// Serializes with shortest round-trip float formatting, so parsing the
/// result reproduces every number exactly. Mesh files are named
/// `<prefix>.<link>.tri`.
pub fn serialize_scene(obj: &ArticulatedObject, mesh_prefix: &str) -> SceneDocument {
    let mut scene = String::new();
    let mut meshes = Vec::new();
    let _ = writeln!(scene, "root {}", obj.root_link());
    for l in obj.links() {
        let _ = write!(scene, "link {} ", l.id);
        match &l.geometry {
            Geometry::Box { extents: e } => {
                let _ = write!(scene, "box {} {} {}", e.x, e.y, e.z);
            }
            Geometry::Mesh(m) => {
                let name = format!("{mesh_prefix}.{}.tri", l.id);
                let _ = write!(scene, "mesh {name}");
                meshes.push((name, serialize_mesh(m)));
            }
            Geometry::Empty => scene.push_str("none"),
        }
        if l.mass != 1.0 {
            let _ = write!(scene, " mass {}", l.mass);
        }
        scene.push('\n');
    }
    for j in obj.joints() {
        let t = j.origin.translation.vector;
        let q = j.origin.rotation.quaternion().coords;
        let a = j.axis.into_inner();
        let _ = writeln!(
            scene,
            "joint {} {} {} {} origin {} {} {} {} {} {} {} axis {} {} {} limits {} {}",
            j.id,
            j.kind.as_str(),
            j.parent_link,
            j.child_link,
            t.x, t.y, t.z,
            q.x, q.y, q.z, q.w,
            a.x, a.y, a.z,
            j.lower, j.upper
        );
    }
    SceneDocument { scene, meshes }
}

pub fn read_scene(path: &Path) -> Result<ArticulatedObject> {
    let text = read_to_string(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    parse_scene(&text, &path.display().to_string(), Some(&dir))
}

/// Writes the scene and its mesh files next to it.
pub fn write_scene(obj: &ArticulatedObject, path: &Path) -> Result<()> {
    let prefix = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    let doc = serialize_scene(obj, prefix);
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    for (name, text) in &doc.meshes {
        write_bytes(&dir.join(name), text.as_bytes())?;
    }
    write_bytes(path, doc.scene.as_bytes())
}

/// Loads a native scene or, for `.urdf`/`.xml`, a URDF file.
pub fn load_object(path: &Path) -> Result<ArticulatedObject> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("urdf") | Some("xml") => crate::urdf::read_urdf(path),
        _ => read_scene(path),
    }
}

/// Non-empty lines with comments stripped, numbered from 1.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

struct Tokens<'a> {
    iter: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
    origin: &'a str,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: &'a str, origin: &'a str, lineno: usize) -> Self {
        Self { iter: line.split_whitespace().peekable(), origin, line: lineno }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::syntax(self.origin, self.line, message)
    }

    fn peek(&mut self) -> Option<&&'a str> {
        self.iter.peek()
    }

    fn word(&mut self, what: &str) -> Result<&'a str> {
        self.iter.next().ok_or_else(|| self.error(format!("expected {what}")))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match self.iter.next() {
            Some(w) if w == kw => Ok(()),
            Some(w) => Err(self.error(format!("expected `{kw}`, found `{w}`"))),
            None => Err(self.error(format!("expected `{kw}`"))),
        }
    }

    fn float(&mut self, what: &str) -> Result<f64> {
        let w = self.word(what)?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(format!("invalid {what} `{w}`"))),
        }
    }

    fn index(&mut self, what: &str) -> Result<u32> {
        let w = self.word(what)?;
        w.parse::<u32>().map_err(|_| self.error(format!("invalid vertex index {what} `{w}`")))
    }

    fn vec3(&mut self, what: &str) -> Result<Vector3<f64>> {
        Ok(Vector3::new(self.float(what)?, self.float(what)?, self.float(what)?))
    }

    fn finish(&mut self) -> Result<()> {
        match self.iter.next() {
            Some(w) => Err(self.error(format!("unexpected trailing token `{w}`"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOOR: &str = "\
# simple door
root frame
link frame box 0.1 1.0 2.0
link door box 0.04 0.8 1.9 mass 5
joint hinge revolute frame door origin 0.1 0.4 0 0 0 0 1 axis 0 0 1 limits 0 1.5707963267948966
";

    #[test]
    fn parses_minimal_door() {
        let obj = parse_scene(DOOR, "door.scene", None).unwrap();
        assert_eq!(obj.links().len(), 2);
        assert_eq!(obj.joints().len(), 1);
        assert_eq!(obj.link("door").unwrap().mass, 5.0);
        assert_eq!(obj.joints()[0].upper, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn self_loop_is_rejected() {
        let text = "root a\nlink a box 1 1 1\njoint j revolute a a origin 0 0 0 0 0 0 1 axis 0 0 1 limits 0 1\n";
        let err = parse_scene(text, "x", None).unwrap_err().to_string();
        assert!(err.contains("self-loop joint"), "{err}");
        assert!(err.starts_with("x:3:"), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "root a\n\nlink a box 1 one 1\n";
        match parse_scene(text, "s", None).unwrap_err() {
            Error::Syntax { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("`one`"));
            }
            e => panic!("unexpected {e}"),
        }
        assert!(parse_scene("link a box 1 1 1\n", "s", None).is_err());
        assert!(parse_scene("root a\nlink a box 1 1 1 extra\n", "s", None).is_err());
        let bad_q = "root a\nlink a box 1 1 1\nlink b box 1 1 1\njoint j revolute a b origin 0 0 0 0 0 0 2 axis 0 0 1 limits 0 1\n";
        assert!(parse_scene(bad_q, "s", None).unwrap_err().to_string().contains("quaternion"));
    }

    #[test]
    fn mesh_round_trip_is_exact() {
        let m = TriMesh::cuboid(Point3::new(0.1, -0.2, 1.0 / 3.0), Vector3::new(0.3, 0.7, 0.11));
        assert_eq!(parse_mesh(&serialize_mesh(&m), "m").unwrap(), m);
        assert!(parse_mesh("v 0 0 0\nf 0 0 1\n", "m").is_err());
        assert!(parse_mesh("v 0 0 0\nf 0 0 -1\n", "m").is_err());
    }
}
