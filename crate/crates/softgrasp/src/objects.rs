//! The grasp object set: plain-text table parsing and the built-in
//! 43-object default.

use std::fs;
use std::path::Path;

use softgrasp_core::sim::{Category, ObjectSpec};
use thiserror::Error;

/// The default 43-object table shipped with the harness.
pub const DEFAULT_OBJECT_TABLE: &str = include_str!("../data/objects_default.txt");

/// Handover-scenario anchors in the default set.
pub const HEAVY_OBJECT_ID: u32 = 9;
pub const SLIPPERY_OBJECT_ID: u32 = 27;
pub const NOMINAL_OBJECT_ID: u32 = 10;

#[derive(Debug, Error)]
pub enum ObjectSetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("object table line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("object table is empty")]
    Empty,
}

/// Parses `id category size_mm stiffness_Npmm mass_g slip` rows;
/// `#` comments and blank lines are skipped.
pub fn parse_object_set(text: &str) -> Result<Vec<ObjectSpec>, ObjectSetError> {
    let mut objects = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 6 {
            return Err(ObjectSetError::Parse {
                line: lineno + 1,
                reason: format!("expected 6 columns, got {}", fields.len()),
            });
        }
        let parse_num = |idx: usize| -> Result<f64, ObjectSetError> {
            fields[idx].parse().map_err(|_| ObjectSetError::Parse {
                line: lineno + 1,
                reason: format!("bad number {:?}", fields[idx]),
            })
        };
        let id = fields[0].parse().map_err(|_| ObjectSetError::Parse {
            line: lineno + 1,
            reason: format!("bad id {:?}", fields[0]),
        })?;
        let category = Category::parse(fields[1]).ok_or_else(|| ObjectSetError::Parse {
            line: lineno + 1,
            reason: format!("unknown category {:?}", fields[1]),
        })?;
        let object = ObjectSpec {
            id,
            category,
            size_mm: parse_num(2)?,
            stiffness_n_per_mm: parse_num(3)?,
            mass_g: parse_num(4)?,
            slip_coefficient: parse_num(5)?,
        };
        object.validate().map_err(|e| ObjectSetError::Parse {
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        objects.push(object);
    }
    if objects.is_empty() {
        return Err(ObjectSetError::Empty);
    }
    Ok(objects)
}

pub fn format_object_set(objects: &[ObjectSpec]) -> String {
    let mut out = String::from("# id category size_mm stiffness_Npmm mass_g slip\n");
    for o in objects {
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            o.id, o.category, o.size_mm, o.stiffness_n_per_mm, o.mass_g, o.slip_coefficient
        ));
    }
    out
}

pub fn default_object_set() -> Vec<ObjectSpec> {
    parse_object_set(DEFAULT_OBJECT_TABLE).expect("embedded object table is valid")
}

pub fn load_object_set(path: Option<&Path>) -> Result<Vec<ObjectSpec>, ObjectSetError> {
    match path {
        Some(path) => parse_object_set(&fs::read_to_string(path)?),
        None => Ok(default_object_set()),
    }
}
