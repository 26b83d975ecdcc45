use std::fmt;

/// Pipeline stages, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Segment,
    Train,
    Classify,
    Relate,
    Trees,
    Export,
    Serve,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Segment => "segment",
            Stage::Train => "train",
            Stage::Classify => "classify",
            Stage::Relate => "relate",
            Stage::Trees => "trees",
            Stage::Export => "export",
            Stage::Serve => "serve",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 10,
            Stage::Segment => 11,
            Stage::Train => 12,
            Stage::Classify => 13,
            Stage::Relate => 14,
            Stage::Trees => 15,
            Stage::Export => 16,
            Stage::Serve => 17,
        }
    }

    /// Machine-readable code, e.g. `E_INGEST`.
    pub fn code(self) -> String {
        format!("E_{}", self.name().to_uppercase())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} stage failed: {:#}", self.stage.code(), self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

pub type StageResult<T> = std::result::Result<T, StageError>;

/// Attaches a stage to any error.
pub trait InStage<T> {
    fn stage(self, stage: Stage) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> InStage<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            error: e.into(),
        })
    }
}
