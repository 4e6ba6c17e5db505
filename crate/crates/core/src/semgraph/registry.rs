//! Constraint types that a relationship may carry, with their parameters.

use serde_json::{Map, Value};

use crate::scalar::Real;

pub const CLOSENESS: &str = "Closeness";
pub const EDGE_STRAIN: &str = "EdgeStrain";
pub const DISTANCE: &str = "Distance";
pub const PROPORTION: &str = "Proportion";
pub const SAME_MEASURE: &str = "SameMeasure";

/// Registered constraint type names.
pub const CONSTRAINT_TYPES: [&str; 5] = [CLOSENESS, EDGE_STRAIN, DISTANCE, PROPORTION, SAME_MEASURE];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintParams<T: Real> {
    /// Keep the barycentre of the annotations' vertices at `target`
    /// (its rest position when absent).
    Closeness { target: Option<[T; 3]> },
    /// Keep a cage edge's length within `[min, max]` times its rest length.
    EdgeStrain { edge: [usize; 2], min: T, max: T },
    /// Keep the distance between the two annotations' barycentres within `[min, max]`.
    Distance { min: T, max: T },
    /// Keep `measure1 / measure2` within `[min, max]`; measures are indexed
    /// among each annotation's measure attributes.
    Proportion {
        measure1: usize,
        measure2: usize,
        min: T,
        max: T,
    },
    SameMeasure { measure1: usize, measure2: usize },
}

impl<T: Real> ConstraintParams<T> {
    pub fn type_name(&self) -> &'static str {
        match self {
            ConstraintParams::Closeness { .. } => CLOSENESS,
            ConstraintParams::EdgeStrain { .. } => EDGE_STRAIN,
            ConstraintParams::Distance { .. } => DISTANCE,
            ConstraintParams::Proportion { .. } => PROPORTION,
            ConstraintParams::SameMeasure { .. } => SAME_MEASURE,
        }
    }

    /// Exact number of annotations the type relates, if fixed.
    pub fn arity(&self) -> Option<usize> {
        match self {
            ConstraintParams::Closeness { .. } | ConstraintParams::EdgeStrain { .. } => None,
            _ => Some(2),
        }
    }

    /// Serialize in the registry's key order.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        let num = |x: T| Value::from(x.as_f64());
        match *self {
            ConstraintParams::Closeness { target } => {
                if let Some(t) = target {
                    m.insert("target".into(), Value::from(t.iter().map(|x| x.as_f64()).collect::<Vec<_>>()));
                }
            }
            ConstraintParams::EdgeStrain { edge, min, max } => {
                m.insert("edge".into(), Value::from(edge.to_vec()));
                m.insert("minValue".into(), num(min));
                m.insert("maxValue".into(), num(max));
            }
            ConstraintParams::Distance { min, max } => {
                m.insert("minValue".into(), num(min));
                m.insert("maxValue".into(), num(max));
            }
            ConstraintParams::Proportion {
                measure1,
                measure2,
                min,
                max,
            } => {
                m.insert("measure1".into(), Value::from(measure1));
                m.insert("measure2".into(), Value::from(measure2));
                m.insert("minValue".into(), num(min));
                m.insert("maxValue".into(), num(max));
            }
            ConstraintParams::SameMeasure { measure1, measure2 } => {
                m.insert("measure1".into(), Value::from(measure1));
                m.insert("measure2".into(), Value::from(measure2));
            }
        }
        Value::Object(m)
    }
}

fn allowed_keys(kind: &str) -> &'static [&'static str] {
    match kind {
        CLOSENESS => &["target"],
        EDGE_STRAIN => &["edge", "minValue", "maxValue"],
        DISTANCE => &["minValue", "maxValue"],
        PROPORTION => &["measure1", "measure2", "minValue", "maxValue"],
        SAME_MEASURE => &["measure1", "measure2"],
        _ => &[],
    }
}

/// Parameter keys a constraint of type `kind` cannot omit.
pub fn required_keys(kind: &str) -> &'static [&'static str] {
    match kind {
        CLOSENESS => &[],
        other => allowed_keys(other),
    }
}

pub fn is_registered(kind: &str) -> bool {
    CONSTRAINT_TYPES.contains(&kind)
}

/// Validate a constraint parameter object for a relationship of type `kind`
/// over `annotation_count` annotations. Errors carry a human-readable reason.
pub fn validate<T: Real>(kind: &str, params: &Value, annotation_count: usize) -> Result<ConstraintParams<T>, String> {
    if !is_registered(kind) {
        return Err(format!(
            "'{kind}' is not a registered constraint type (known: {})",
            CONSTRAINT_TYPES.join(", ")
        ));
    }
    let obj = params
        .as_object()
        .ok_or_else(|| format!("{kind} parameters must be an object"))?;
    let allowed = allowed_keys(kind);
    let mut extra: Vec<&String> = obj.keys().filter(|k| !allowed.contains(&k.as_str())).collect();
    extra.sort();
    if let Some(k) = extra.first() {
        return Err(format!("{kind} does not take parameter '{k}'"));
    }
    let number = |key: &str| -> Result<T, String> {
        let v = obj.get(key).ok_or_else(|| format!("{kind} requires {key}"))?;
        let x = v.as_f64().ok_or_else(|| format!("{key} must be a number"))?;
        if !x.is_finite() {
            return Err(format!("{key} must be finite"));
        }
        Ok(T::lit(x))
    };
    let index = |key: &str| -> Result<usize, String> {
        let v = obj.get(key).ok_or_else(|| format!("{kind} requires {key}"))?;
        v.as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| format!("{key} must be a non-negative integer"))
    };
    let range = || -> Result<(T, T), String> {
        let (lo, hi) = (number("minValue")?, number("maxValue")?);
        if lo > hi {
            return Err(format!("minValue {} exceeds maxValue {}", lo.as_f64(), hi.as_f64()));
        }
        if lo < T::zero() {
            return Err("minValue must be non-negative".into());
        }
        Ok((lo, hi))
    };
    let parsed = match kind {
        CLOSENESS => {
            let target = match obj.get("target") {
                None => None,
                Some(v) => {
                    let arr = v
                        .as_array()
                        .filter(|a| a.len() == 3)
                        .ok_or_else(|| "target must be a list of 3 numbers".to_string())?;
                    let mut t = [T::zero(); 3];
                    for (k, x) in arr.iter().enumerate() {
                        t[k] = T::lit(x.as_f64().ok_or_else(|| "target must be a list of 3 numbers".to_string())?);
                    }
                    Some(t)
                }
            };
            ConstraintParams::Closeness { target }
        }
        EDGE_STRAIN => {
            let arr = obj
                .get("edge")
                .ok_or_else(|| format!("{kind} requires edge"))?
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| "edge must be a pair of cage vertex indices".to_string())?;
            let mut edge = [0usize; 2];
            for (k, x) in arr.iter().enumerate() {
                edge[k] = x
                    .as_u64()
                    .ok_or_else(|| "edge must be a pair of cage vertex indices".to_string())? as usize;
            }
            if edge[0] == edge[1] {
                return Err("edge endpoints must differ".into());
            }
            let (min, max) = range()?;
            ConstraintParams::EdgeStrain { edge, min, max }
        }
        DISTANCE => {
            let (min, max) = range()?;
            ConstraintParams::Distance { min, max }
        }
        PROPORTION => {
            let (min, max) = range()?;
            if !(min > T::zero()) {
                return Err("Proportion minValue must be positive".into());
            }
            ConstraintParams::Proportion {
                measure1: index("measure1")?,
                measure2: index("measure2")?,
                min,
                max,
            }
        }
        SAME_MEASURE => ConstraintParams::SameMeasure {
            measure1: index("measure1")?,
            measure2: index("measure2")?,
        },
        _ => unreachable!("checked by is_registered"),
    };
    if let Some(n) = parsed.arity() {
        if annotation_count != n {
            return Err(format!(
                "{kind}: measures are constrainable only between exactly {n} annotations, got {annotation_count}"
            ));
        }
    }
    Ok(parsed)
}
