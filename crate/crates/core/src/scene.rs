//! Scene documents: the static world the drone flies through.
//!
//! A scene is a JSON object. Leading lines starting with `//` form a header
//! comment and are skipped before parsing; everything after them must be a
//! single JSON document with no unknown keys.

use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact::{is_anomaly_token, is_valid_token};
use crate::geometry::{normalize_yaw, Aabb, Pose, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// Horizontal field of view in degrees, in `(0, 180)`.
    #[serde(rename = "fov_deg")]
    pub horizontal_fov: f64,
    pub max_range: f64,
}

impl CameraModel {
    pub fn half_fov_rad(&self) -> f64 {
        self.horizontal_fov.to_radians() / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    pub center: Vec3,
    /// Half-sizes along x, y, z.
    pub extent: Vec3,
    #[serde(default)]
    pub is_anomaly: bool,
    #[serde(default)]
    pub is_occluder: bool,
}

impl SceneObject {
    pub fn aabb(&self) -> Aabb {
        Aabb::from_center_extent(self.center, self.extent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpawnDoc {
    position: Vec3,
    #[serde(default)]
    yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    name: String,
    bounds: Aabb,
    spawn: SpawnDoc,
    camera: CameraModel,
    objects: Vec<SceneObject>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub bounds: Aabb,
    pub spawn: Pose,
    pub objects: Vec<SceneObject>,
    pub camera: CameraModel,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("reading scene: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene document at `{path}`: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid scene at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("duplicate object id {id:?} at `{path}`")]
    DuplicateId { path: String, id: String },
    #[error("spawn {position:?} outside scene bounds at `spawn.position`")]
    SpawnOutOfBounds { position: Vec3 },
}

impl SceneError {
    /// Dotted path of the offending field, when one applies.
    pub fn path(&self) -> Option<&str> {
        match self {
            SceneError::Malformed { path, .. }
            | SceneError::Invalid { path, .. }
            | SceneError::DuplicateId { path, .. } => Some(path),
            SceneError::SpawnOutOfBounds { .. } => Some("spawn.position"),
            SceneError::Io(_) => None,
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SceneError {
    SceneError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Strips the `//` header block, returning the JSON body.
fn strip_header(text: &str) -> &str {
    let mut rest = text;
    loop {
        let trimmed = rest.trim_start();
        if !trimmed.starts_with("//") {
            return trimmed;
        }
        rest = match trimmed.find('\n') {
            Some(i) => &trimmed[i + 1..],
            None => "",
        };
    }
}

/// Header comment lines of a scene document, without the `//` markers.
pub fn header_comment(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .take_while(|l| l.starts_with("//") || l.is_empty())
        .filter(|l| !l.is_empty())
        .map(|l| l.trim_start_matches('/').trim().to_string())
        .collect()
}

pub fn load_scene<R: Read>(mut source: R) -> Result<Scene, SceneError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_scene(&text)
}

pub fn load_scene_file(path: impl AsRef<std::path::Path>) -> Result<Scene, SceneError> {
    load_scene(std::fs::File::open(path)?)
}

pub fn parse_scene(text: &str) -> Result<Scene, SceneError> {
    let body = strip_header(text);
    let de = &mut serde_json::Deserializer::from_str(body);
    let doc: SceneDoc = serde_path_to_error::deserialize(de).map_err(|e| SceneError::Malformed {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    validate(doc)
}

fn check_vec(path: &str, v: Vec3) -> Result<(), SceneError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, "components must be finite"))
    }
}

fn validate(doc: SceneDoc) -> Result<Scene, SceneError> {
    check_vec("bounds.min", doc.bounds.min)?;
    check_vec("bounds.max", doc.bounds.max)?;
    if doc.bounds.volume() <= 0.0 {
        return Err(invalid("bounds", "bounds must enclose a positive volume"));
    }
    let fov = doc.camera.horizontal_fov;
    if !(fov > 0.0 && fov < 180.0) {
        return Err(invalid("camera.fov_deg", "field of view must lie in (0, 180)"));
    }
    if !(doc.camera.max_range > 0.0 && doc.camera.max_range.is_finite()) {
        return Err(invalid("camera.max_range", "range must be positive"));
    }
    check_vec("spawn.position", doc.spawn.position)?;
    if !doc.spawn.yaw.is_finite() {
        return Err(invalid("spawn.yaw", "yaw must be finite"));
    }
    if !doc.bounds.contains(doc.spawn.position) {
        return Err(SceneError::SpawnOutOfBounds {
            position: doc.spawn.position,
        });
    }
    if doc.objects.is_empty() {
        return Err(invalid("objects", "a scene needs at least one object"));
    }
    let mut seen = HashSet::new();
    for (i, obj) in doc.objects.iter().enumerate() {
        let at = |field: &str| format!("objects[{i}].{field}");
        if obj.id.is_empty() {
            return Err(invalid(at("id"), "id must be nonempty"));
        }
        if !seen.insert(obj.id.as_str()) {
            return Err(SceneError::DuplicateId {
                path: at("id"),
                id: obj.id.clone(),
            });
        }
        if !is_valid_token(&obj.label) {
            return Err(invalid(at("label"), "label must be a single lowercase word"));
        }
        if let Some(bad) = obj.attributes.iter().find(|a| !is_valid_token(a)) {
            return Err(invalid(at("attributes"), format!("bad attribute token {bad:?}")));
        }
        check_vec(&at("center"), obj.center)?;
        check_vec(&at("extent"), obj.extent)?;
        if !(obj.extent.x > 0.0 && obj.extent.y > 0.0 && obj.extent.z > 0.0) {
            return Err(invalid(at("extent"), "half-sizes must be strictly positive"));
        }
        if obj.is_anomaly
            && !obj
                .attributes
                .iter()
                .chain(std::iter::once(&obj.label))
                .any(|t| is_anomaly_token(t))
        {
            return Err(invalid(
                at("attributes"),
                "anomaly objects need an anomaly-lexicon token",
            ));
        }
    }
    Ok(Scene {
        name: doc.name,
        bounds: doc.bounds,
        spawn: Pose {
            position: doc.spawn.position,
            yaw: normalize_yaw(doc.spawn.yaw),
        },
        objects: doc.objects,
        camera: doc.camera,
    })
}

impl Scene {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Distinct labels in first-appearance order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for o in &self.objects {
            if !out.contains(&o.label.as_str()) {
                out.push(&o.label);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = SceneDoc {
            name: self.name.clone(),
            bounds: self.bounds,
            spawn: SpawnDoc {
                position: self.spawn.position,
                yaw: self.spawn.yaw,
            },
            camera: self.camera.clone(),
            objects: self.objects.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("scene serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "tiny",
        "bounds": {"min": [-50, -50, 0], "max": [50, 50, 30]},
        "spawn": {"position": [0, 0, 10], "yaw": 0},
        "camera": {"fov_deg": 90, "max_range": 100},
        "objects": [
            {"id": "rock", "label": "rock", "attributes": [], "center": [5, 0, 10],
             "extent": [1, 1, 1], "is_anomaly": false, "is_occluder": false}
        ]
    }"#;

    #[test]
    fn minimal_document_loads() {
        let scene = parse_scene(MINIMAL).unwrap();
        assert_eq!(scene.objects.len(), 1);
        assert_eq!(scene.spawn.position, Vec3::new(0.0, 0.0, 10.0));
    }

    #[test]
    fn duplicate_id_is_reported_with_path() {
        let doc = MINIMAL.replace(
            r#""objects": ["#,
            r#""objects": [{"id": "rock", "label": "rock", "center": [9, 0, 10], "extent": [1, 1, 1]},"#,
        );
        let err = parse_scene(&doc).unwrap_err();
        assert!(
            matches!(err, SceneError::DuplicateId { ref id, .. } if id == "rock"),
            "{err}"
        );
        assert_eq!(err.path(), Some("objects[1].id"));
    }

    #[test]
    fn spawn_outside_bounds() {
        let doc = MINIMAL.replace("[0, 0, 10], \"yaw\"", "[0, 0, 99], \"yaw\"");
        let err = parse_scene(&doc).unwrap_err();
        assert!(matches!(err, SceneError::SpawnOutOfBounds { .. }));
        assert_eq!(err.path(), Some("spawn.position"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = MINIMAL.replace(r#""name": "tiny","#, r#""name": "tiny", "weather": "fog","#);
        let err = parse_scene(&doc).unwrap_err();
        assert!(matches!(err, SceneError::Malformed { .. }), "{err}");
    }

    #[test]
    fn malformed_field_path_is_reported() {
        let doc = MINIMAL.replace(r#""max_range": 100"#, r#""max_range": "far""#);
        let err = parse_scene(&doc).unwrap_err();
        assert_eq!(err.path(), Some("camera.max_range"));
    }

    #[test]
    fn non_positive_extent() {
        let doc = MINIMAL.replace("[1, 1, 1]", "[1, 0, 1]");
        assert_eq!(parse_scene(&doc).unwrap_err().path(), Some("objects[0].extent"));
    }

    #[test]
    fn anomaly_without_lexicon_token() {
        let doc = MINIMAL.replace(r#""is_anomaly": false"#, r#""is_anomaly": true"#);
        assert_eq!(parse_scene(&doc).unwrap_err().path(), Some("objects[0].attributes"));
    }

    #[test]
    fn header_comment_is_skipped() {
        let doc = format!("// census: 1 object\n// second line\n{MINIMAL}");
        assert_eq!(parse_scene(&doc).unwrap().objects.len(), 1);
        assert_eq!(header_comment(&doc), vec!["census: 1 object", "second line"]);
    }
}
