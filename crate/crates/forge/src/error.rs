use std::fmt;
use std::path::Path;

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    LoadConfig,
    LoadData,
    Generate,
    Augment,
    Split,
    Train,
    Parse,
    Reason,
    Evaluate,
    Write,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::LoadConfig => "load-config",
            Stage::LoadData => "load-data",
            Stage::Generate => "generate",
            Stage::Augment => "augment",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Parse => "parse",
            Stage::Reason => "reason",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        }
    }

    /// Loading stages fail on bad input (exit 2); the rest are runtime
    /// failures (exit 3).
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::LoadConfig | Stage::LoadData => 2,
            _ => 3,
        }
    }
}

#[derive(Debug)]
pub struct ForgeError {
    pub stage: Stage,
    pub message: String,
}

impl ForgeError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        ForgeError {
            stage,
            message: message.to_string(),
        }
    }

    pub fn io(stage: Stage, path: &Path, err: std::io::Error) -> Self {
        ForgeError::new(stage, format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

impl fmt::Display for ForgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage.as_str(), self.message)
    }
}

impl std::error::Error for ForgeError {}

pub type Result<T> = std::result::Result<T, ForgeError>;
