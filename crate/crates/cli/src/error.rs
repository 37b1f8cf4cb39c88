use std::fmt;
use std::io;
use std::path::Path;

use motifvar_core::cluster::ClusterError;
use motifvar_core::ingest::IngestError;
use motifvar_core::motif::FeatureError;
use motifvar_core::pipeline::PipelineError;
use motifvar_core::synth::SynthError;
use motifvar_core::validity::ValidityError;

/// Machine-readable failure class, printed as `error category=<name>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    InputNotFound,
    InvalidInput,
    InvalidConfig,
    Ingest,
    Features,
    Cluster,
    Validity,
    Output,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::InputNotFound => "input-not-found",
            Category::InvalidInput => "invalid-input",
            Category::InvalidConfig => "invalid-config",
            Category::Ingest => "ingest",
            Category::Features => "features",
            Category::Cluster => "cluster",
            Category::Validity => "validity",
            Category::Output => "output",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage | Category::InvalidConfig => 2,
            Category::InputNotFound => 3,
            Category::InvalidInput => 4,
            Category::Ingest | Category::Features | Category::Cluster | Category::Validity => 5,
            Category::Output => 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(Category::InvalidConfig, message)
    }

    /// Failure to read `path`, split into not-found and everything else.
    pub fn read(path: &Path, e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::NotFound => CliError::new(Category::InputNotFound, format!("{}: not found", path.display())),
            _ => CliError::new(Category::InvalidInput, format!("{}: {e}", path.display())),
        }
    }

    pub fn write(path: &Path, e: impl fmt::Display) -> Self {
        CliError::new(Category::Output, format!("{}: {e}", path.display()))
    }

    /// The single line printed on stderr.
    pub fn line(&self) -> String {
        let msg = self.message.replace(['\n', '\r'], " ").replace('"', "'");
        format!("error category={} message=\"{msg}\"", self.category.name())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category.name(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let category = match &e {
            IngestError::NotFound(_) => Category::InputNotFound,
            IngestError::TooManyRejects { .. } | IngestError::BadHoliday { .. } | IngestError::BadWindowRow { .. } => {
                Category::InvalidInput
            }
            IngestError::Config(_) => Category::InvalidConfig,
            _ => Category::Ingest,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        let category = match &e {
            FeatureError::Sax(_) => Category::InvalidConfig,
            _ => Category::Features,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        let category = match &e {
            ClusterError::Parse(_) => Category::InvalidInput,
            _ => Category::Cluster,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<ValidityError> for CliError {
    fn from(e: ValidityError) -> Self {
        CliError::new(Category::Validity, e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        let category = match &e {
            SynthError::Parse(_) => Category::InvalidInput,
            SynthError::Invalid(_) => Category::InvalidConfig,
            SynthError::Io(_) => Category::Output,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => e.into(),
            PipelineError::Features(e) => e.into(),
            PipelineError::Cluster(e) => e.into(),
            PipelineError::Validity(e) => e.into(),
            PipelineError::Config(m) => CliError::config(m),
            PipelineError::AllFailed(m) => CliError::new(Category::Cluster, format!("every algorithm failed: {m}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
