//! Import of a URDF subset.
//!
//! Supported: `link` with `visual` (or, failing that, `collision`) box and
//! mesh geometry, `inertial/mass`, and `revolute`, `prismatic`, `continuous`
//! and `fixed` joints. Fixed joints are merged into their parent link.
//! Continuous joints become revolute joints over one full turn. Mesh files
//! use the native triangle format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use articflow_core::model::{ArticulatedObject, Geometry, JointKind, JointSpec, LinkSpec, TriMesh};
use articflow_core::{Point3, Pose, Translation3, UnitQuaternion, Vector3};

use crate::error::{read_to_string, Error, Result};
use crate::native::read_mesh;

pub fn read_urdf(path: &Path) -> Result<ArticulatedObject> {
    let text = read_to_string(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    import_urdf_subset(&text, Some(&dir))
}

struct RawLink {
    name: String,
    parts: Vec<(Pose, RawGeometry)>,
    mass: Option<f64>,
}

enum RawGeometry {
    Box(Vector3<f64>),
    Mesh(TriMesh),
}

struct RawJoint {
    name: String,
    kind: Option<JointKind>,
    parent: String,
    child: String,
    origin: Pose,
    axis: Option<Vector3<f64>>,
    limits: Option<(f64, f64)>,
}

/// Parses URDF text. `base_dir` resolves relative mesh file names and the
/// `package://` prefix.
pub fn import_urdf_subset(xml: &str, base_dir: Option<&Path>) -> Result<ArticulatedObject> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::Format(format!("invalid XML: {e}")))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(Error::Format(format!("expected <robot>, found <{}>", robot.tag_name().name())));
    }
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for node in robot.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => links.push(parse_link(node, base_dir)?),
            "joint" => joints.push(parse_joint(node)?),
            _ => {}
        }
    }
    merge_fixed(links, joints)
}

fn attr<'a>(node: roxmltree::Node<'a, '_>, name: &str) -> Result<&'a str> {
    node.attribute(name)
        .ok_or_else(|| Error::Format(format!("<{}> is missing attribute `{name}`", node.tag_name().name())))
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn floats(text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = text
        .split_whitespace()
        .map(|w| w.parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Format(format!("invalid number in {what} `{text}`")))?;
    if v.len() != n {
        return Err(Error::Format(format!("{what} needs {n} numbers, got `{text}`")));
    }
    Ok(v)
}

fn parse_origin(node: roxmltree::Node<'_, '_>) -> Result<Pose> {
    let Some(o) = child(node, "origin") else { return Ok(Pose::identity()) };
    let xyz = o.attribute("xyz").map(|s| floats(s, 3, "origin xyz")).transpose()?.unwrap_or(vec![0.0; 3]);
    let rpy = o.attribute("rpy").map(|s| floats(s, 3, "origin rpy")).transpose()?.unwrap_or(vec![0.0; 3]);
    Ok(Pose::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    ))
}

fn parse_link(node: roxmltree::Node<'_, '_>, base_dir: Option<&Path>) -> Result<RawLink> {
    let name = attr(node, "name")?.to_string();
    let mut shapes: Vec<_> = node.children().filter(|n| n.has_tag_name("visual")).collect();
    if shapes.is_empty() {
        shapes = node.children().filter(|n| n.has_tag_name("collision")).collect();
    }
    let mut parts = Vec::new();
    for s in shapes {
        let pose = parse_origin(s)?;
        let Some(g) = child(s, "geometry").and_then(|g| g.children().find(|n| n.is_element())) else {
            return Err(Error::Format(format!("link `{name}`: shape without geometry")));
        };
        let geom = match g.tag_name().name() {
            "box" => {
                let v = floats(attr(g, "size")?, 3, "box size")?;
                RawGeometry::Box(Vector3::new(v[0], v[1], v[2]))
            }
            "mesh" => {
                let file = attr(g, "filename")?;
                let rel = file.strip_prefix("package://").unwrap_or(file);
                let path = match base_dir {
                    Some(d) => d.join(rel),
                    None if Path::new(rel).is_absolute() => PathBuf::from(rel),
                    None => return Err(Error::Format(format!("link `{name}`: unresolvable mesh path `{file}`"))),
                };
                if !path.is_file() {
                    return Err(Error::Format(format!("link `{name}`: unresolvable mesh path `{}`", path.display())));
                }
                let mut mesh = read_mesh(&path)?;
                if let Some(s) = g.attribute("scale") {
                    let s = floats(s, 3, "mesh scale")?;
                    let v = mesh.vertices().iter().map(|p| Point3::new(p.x * s[0], p.y * s[1], p.z * s[2])).collect();
                    mesh = TriMesh::new(v, mesh.triangles().to_vec()).map_err(Error::Format)?;
                }
                RawGeometry::Mesh(mesh)
            }
            other => return Err(Error::Format(format!("link `{name}`: unsupported geometry <{other}>"))),
        };
        parts.push((pose, geom));
    }
    let mass = match child(node, "inertial").and_then(|i| child(i, "mass")) {
        Some(m) => Some(floats(attr(m, "value")?, 1, "mass")?[0]),
        None => None,
    };
    Ok(RawLink { name, parts, mass })
}

fn parse_joint(node: roxmltree::Node<'_, '_>) -> Result<RawJoint> {
    let name = attr(node, "name")?.to_string();
    let ty = attr(node, "type")?;
    let kind = match ty {
        "revolute" | "continuous" => Some(JointKind::Revolute),
        "prismatic" => Some(JointKind::Prismatic),
        "fixed" => None,
        other => return Err(Error::Format(format!("joint `{name}`: unsupported joint type `{other}`"))),
    };
    let link_of = |tag: &str| -> Result<String> {
        let n = child(node, tag).ok_or_else(|| Error::Format(format!("joint `{name}`: missing <{tag}>")))?;
        Ok(attr(n, "link")?.to_string())
    };
    let parent = link_of("parent")?;
    let child_link = link_of("child")?;
    let origin = parse_origin(node)?;
    let axis = match child(node, "axis") {
        Some(a) => {
            let v = floats(attr(a, "xyz")?, 3, "axis")?;
            Some(Vector3::new(v[0], v[1], v[2]))
        }
        None => None,
    };
    let limits = if ty == "continuous" {
        Some((0.0, std::f64::consts::TAU))
    } else {
        match child(node, "limit") {
            Some(l) => {
                let lo = floats(attr(l, "lower")?, 1, "lower limit")?[0];
                let hi = floats(attr(l, "upper")?, 1, "upper limit")?[0];
                Some((lo, hi))
            }
            None => None,
        }
    };
    Ok(RawJoint { name, kind, parent, child: child_link, origin, axis, limits })
}

fn merge_fixed(links: Vec<RawLink>, joints: Vec<RawJoint>) -> Result<ArticulatedObject> {
    let index: BTreeMap<&str, usize> = links.iter().enumerate().map(|(i, l)| (l.name.as_str(), i)).collect();
    if index.len() != links.len() {
        return Err(Error::Format("duplicate link name".to_string()));
    }
    let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
    for (ji, j) in joints.iter().enumerate() {
        for l in [&j.parent, &j.child] {
            if !index.contains_key(l.as_str()) {
                return Err(articflow_core::Error::UnknownLink(l.clone()).into());
            }
        }
        if j.parent == j.child {
            return Err(articflow_core::Error::SelfLoop(j.name.clone()).into());
        }
        let c = index[j.child.as_str()];
        if parent_joint[c].replace(ji).is_some() {
            return Err(articflow_core::Error::MultipleParents(j.child.clone()).into());
        }
    }
    let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
    let [root] = roots[..] else {
        return Err(Error::Format(format!("expected exactly one root link, found {}", roots.len())));
    };

    // Representative movable-or-root ancestor of each link and the pose of
    // the link frame in that ancestor's frame.
    let mut rep: Vec<Option<(usize, Pose)>> = vec![None; links.len()];
    for start in 0..links.len() {
        let mut chain = Vec::new();
        let mut cur = start;
        let (base, mut pose) = loop {
            if let Some(r) = rep[cur] {
                break r;
            }
            match parent_joint[cur] {
                Some(ji) if joints[ji].kind.is_none() => {
                    if chain.len() > links.len() {
                        return Err(articflow_core::Error::Cycle(links[start].name.clone()).into());
                    }
                    chain.push((cur, ji));
                    cur = index[joints[ji].parent.as_str()];
                }
                _ => break (cur, Pose::identity()),
            }
        };
        rep[cur] = Some((base, pose));
        for &(l, ji) in chain.iter().rev() {
            pose *= joints[ji].origin;
            rep[l] = Some((base, pose));
        }
    }

    let mut parts: Vec<Vec<TriMesh>> = vec![Vec::new(); links.len()];
    let mut single_box: Vec<Option<Vector3<f64>>> = vec![None; links.len()];
    let mut masses: Vec<Option<f64>> = vec![None; links.len()];
    let mut counts = vec![0usize; links.len()];
    for (i, l) in links.iter().enumerate() {
        let (r, offset) = rep[i].expect("all links resolved");
        for (pose, g) in &l.parts {
            let pose = offset * pose;
            counts[r] += 1;
            let mesh = match g {
                RawGeometry::Box(e) => {
                    if pose == Pose::identity() {
                        single_box[r] = Some(*e);
                    }
                    TriMesh::cuboid(Point3::origin(), *e)
                }
                RawGeometry::Mesh(m) => m.clone(),
            };
            parts[r].push(mesh.transformed(&pose));
        }
        if let Some(m) = l.mass {
            *masses[r].get_or_insert(0.0) += m;
        }
    }

    let mut out_links = Vec::new();
    for (i, l) in links.iter().enumerate() {
        if rep[i].expect("resolved").0 != i {
            continue;
        }
        let geometry = match (counts[i], single_box[i]) {
            (0, _) => Geometry::Empty,
            (1, Some(extents)) => Geometry::Box { extents },
            _ => Geometry::Mesh(TriMesh::merge(&parts[i])),
        };
        let mut spec = LinkSpec::new(&l.name, geometry)?;
        if let Some(m) = masses[i] {
            spec = spec.with_mass(m)?;
        }
        out_links.push(spec);
    }

    let mut out_joints = Vec::new();
    for j in &joints {
        let Some(kind) = j.kind else { continue };
        let axis = j.axis.ok_or_else(|| Error::Format(format!("joint `{}`: missing axis on movable joint", j.name)))?;
        let (lo, hi) = j.limits.ok_or_else(|| Error::Format(format!("joint `{}`: missing <limit>", j.name)))?;
        let (parent, offset) = rep[index[j.parent.as_str()]].expect("resolved");
        let axis = axis.try_normalize(1e-12).ok_or_else(|| Error::Format(format!("joint `{}`: zero axis", j.name)))?;
        out_joints.push(JointSpec::new(&j.name, kind, &links[parent].name, &j.child, offset * j.origin, axis, lo, hi)?);
    }
    Ok(ArticulatedObject::new(&links[root].name, out_links, out_joints)?)
}
