use std::fmt::Debug;

use cageforge_core::annotation::AnnotationError;
use cageforge_core::cage::CageError;
use cageforge_core::fitting::FitError;
use cageforge_core::mesh::MeshError;
use cageforge_core::semgraph::GraphError;
use cageforge_core::solver::SolverError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Usage,
    Validation,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

/// An engine or input failure with the name of the engine error variant.
#[derive(Debug, Clone, Error, Serialize)]
#[error("{message}")]
pub struct ShellError {
    pub kind: ErrorKind,
    pub name: String,
    pub message: String,
}

impl ShellError {
    pub fn new(kind: ErrorKind, name: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, "Usage", message)
    }

    pub fn invalid(name: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, name, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": self.name,
            "kind": self.kind,
            "message": self.message,
            "exitCode": self.exit_code(),
        })
    }

    fn engine(kind: ErrorKind, e: &(impl Debug + std::fmt::Display)) -> Self {
        Self::new(kind, variant_name(e), e.to_string())
    }
}

/// Leading identifier of a `Debug` rendering, i.e. the enum variant name.
fn variant_name(e: &impl Debug) -> String {
    format!("{e:?}").chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

pub type Result<T> = std::result::Result<T, ShellError>;

impl From<MeshError> for ShellError {
    fn from(e: MeshError) -> Self {
        Self::engine(ErrorKind::Validation, &e)
    }
}

impl From<CageError> for ShellError {
    fn from(e: CageError) -> Self {
        match e {
            CageError::Mesh(m) => m.into(),
            CageError::NumericalBreakdown { .. } => Self::engine(ErrorKind::Numerical, &e),
            _ => Self::engine(ErrorKind::Validation, &e),
        }
    }
}

impl From<SolverError> for ShellError {
    fn from(e: SolverError) -> Self {
        let kind = match e {
            SolverError::Singular => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        };
        Self::engine(kind, &e)
    }
}

impl From<FitError> for ShellError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Solver(s) => s.into(),
            FitError::Cage(c) => c.into(),
            FitError::DegenerateConfiguration(_) => Self::engine(ErrorKind::Numerical, &e),
            _ => Self::engine(ErrorKind::Validation, &e),
        }
    }
}

impl From<AnnotationError> for ShellError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::Mesh(m) => m.into(),
            _ => Self::engine(ErrorKind::Validation, &e),
        }
    }
}

impl From<GraphError> for ShellError {
    fn from(e: GraphError) -> Self {
        Self::engine(ErrorKind::Validation, &e)
    }
}

impl From<std::io::Error> for ShellError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Validation, "Io", e.to_string())
    }
}

impl From<serde_json::Error> for ShellError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ErrorKind::Validation, "InvalidJson", e.to_string())
    }
}
