use thiserror::Error;

use crate::circuit::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid circuit: {}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),

    #[error("{requested} qubits requested, budget is {max}")]
    QubitBudget { requested: usize, max: usize },

    #[error("invalid targets: {0}")]
    InvalidTargets(String),

    #[error("postselection of qubit {qubit} onto |{bit}> has zero probability")]
    InvalidPostselection { qubit: usize, bit: u8 },

    #[error(
        "postselection of qubit {qubit} onto |{bit}> has probability {probability:e}, below the threshold {min:e}"
    )]
    ThresholdViolation {
        qubit: usize,
        bit: u8,
        probability: f64,
        min: f64,
    },

    #[error("snapshot label `{0}` already registered")]
    DuplicateSnapshot(String),

    #[error("no snapshot named `{0}`")]
    UnknownSnapshot(String),

    #[error(
        "rewind to `{label}` refused: state is not a single-qubit Z projection of the snapshot"
    )]
    RewindInconsistent { label: String },

    #[error("rewind budget of {budget} exceeded")]
    RewindBudgetExceeded { budget: usize },

    #[error("description replay has zero norm at op {op}")]
    ZeroNormReplay { op: usize },

    #[error("measurement record has no outcome for `{0}`")]
    IncompleteRecord(String),

    #[error("recorded outcome `{0}` lies on a zero-probability branch")]
    ZeroProbabilityBranch(String),

    #[error("description needs {bits} bits, circuit budget is {budget}")]
    DescriptionTooLong { bits: usize, budget: usize },

    #[error("{backend} backend does not support gate `{gate}`{}", line_suffix(*.line))]
    UnsupportedGate {
        backend: &'static str,
        gate: String,
        line: Option<usize>,
    },

    #[error("measurement tree deeper than {limit}")]
    DepthLimit { limit: usize },

    #[error("path sum needs {bits} path bits, limit is {limit}")]
    PathSumLimit { bits: usize, limit: usize },

    #[error("circuit declares no accept qubit")]
    NoAcceptQubit,

    #[error("state preparation failed after {attempts} attempts")]
    PreparationFailed { attempts: usize },

    #[error("target extraction failed after {attempts} attempts")]
    ExtractionFailed { attempts: usize },

    #[error("coin postselection probability {probability} below retention {q}")]
    CoinBelowRetention { probability: f64, q: f64 },

    #[error("promise violated: {0}")]
    PromiseViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Io(String),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
