//! JSON forms of handle edits, pin files and landmark files.

use cageforge_core::cage::HandleOp;
use cageforge_core::fitting::{LandmarkPair, LandmarkSet};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, ShellError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpName {
    Translate,
    Rotate,
    Stretch,
}

/// `{"op": "translate", "params": {"vector": [x, y, z]}}` and friends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRequest {
    pub op: OpName,
    #[serde(default)]
    pub params: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslateParams {
    vector: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RotateParams {
    axis: [f64; 3],
    /// Radians.
    angle: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StretchParams {
    direction: [f64; 3],
    amount: f64,
}

fn params<P: for<'de> Deserialize<'de>>(op: OpName, value: &Value) -> Result<P> {
    serde_json::from_value(value.clone()).map_err(|e| ShellError::invalid("InvalidParams", format!("{op:?} parameters: {e}")))
}

impl MoveRequest {
    pub fn handle_op(&self) -> Result<HandleOp<f64>> {
        Ok(match self.op {
            OpName::Translate => {
                let p: TranslateParams = params(self.op, &self.params)?;
                HandleOp::Translate(Vector3::from(p.vector))
            }
            OpName::Rotate => {
                let p: RotateParams = params(self.op, &self.params)?;
                HandleOp::Rotate {
                    axis: Vector3::from(p.axis),
                    angle: p.angle,
                }
            }
            OpName::Stretch => {
                let p: StretchParams = params(self.op, &self.params)?;
                HandleOp::Stretch {
                    direction: Vector3::from(p.direction),
                    amount: p.amount,
                }
            }
        })
    }
}

/// One step of a deformation script: a handle selection and an edit.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptStep {
    #[serde(default)]
    pub handles: Vec<usize>,
    /// Select the cage vertices influencing this annotation instead.
    pub annotation: Option<u64>,
    pub threshold: Option<f64>,
    pub op: OpName,
    #[serde(default)]
    pub params: Value,
}

impl ScriptStep {
    pub fn request(&self) -> MoveRequest {
        MoveRequest {
            op: self.op,
            params: self.params.clone(),
        }
    }
}

pub fn parse_script(text: &str) -> Result<Vec<ScriptStep>> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pin {
    pub vertex: usize,
    /// Held at its current position when absent.
    pub target: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinFile {
    pub handles: Vec<Pin>,
}

impl PinFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn held(&self) -> Vec<usize> {
        self.handles.iter().filter(|p| p.target.is_none()).map(|p| p.vertex).collect()
    }

    pub fn targets(&self) -> std::collections::BTreeMap<usize, Point3<f64>> {
        self.handles
            .iter()
            .filter_map(|p| p.target.map(|t| (p.vertex, Point3::from(t))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkEntry {
    pub template: usize,
    pub fragment: usize,
    #[serde(default)]
    pub tag: String,
}

pub fn landmark_set(entries: &[LandmarkEntry]) -> Result<LandmarkSet> {
    Ok(LandmarkSet::new(
        entries
            .iter()
            .enumerate()
            .map(|(i, e)| LandmarkPair {
                template: e.template,
                fragment: e.fragment,
                tag: if e.tag.is_empty() { format!("landmark-{i}") } else { e.tag.clone() },
            })
            .collect(),
    )?)
}

/// `{"landmarks": [{"template": 3, "fragment": 8, "tag": "nose"}, ...]}`.
pub fn parse_landmarks(text: &str) -> Result<LandmarkSet> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct File {
        landmarks: Vec<LandmarkEntry>,
    }
    let file: File = serde_json::from_str(text)?;
    landmark_set(&file.landmarks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn move_requests_parse() {
        let r: MoveRequest = serde_json::from_str(r#"{"op":"rotate","params":{"axis":[0,0,1],"angle":0.5}}"#).unwrap();
        assert_eq!(
            r.handle_op().unwrap(),
            HandleOp::Rotate {
                axis: Vector3::z(),
                angle: 0.5
            }
        );
        let bad: MoveRequest = serde_json::from_str(r#"{"op":"translate","params":{"vec":[0,0,1]}}"#).unwrap();
        assert_eq!(bad.handle_op().unwrap_err().name, "InvalidParams");
    }

    #[test]
    fn pins_split_into_held_and_targets() {
        let p = PinFile::parse(r#"{"handles":[{"vertex":2},{"vertex":5,"target":[1,2,3]}]}"#).unwrap();
        assert_eq!(p.held(), vec![2]);
        assert_eq!(p.targets()[&5], Point3::new(1.0, 2.0, 3.0));
    }
}
