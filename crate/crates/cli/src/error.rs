use std::process::ExitCode;

/// Failure of a subcommand, categorised so scripts can branch on the exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid flags, flag combinations or configuration.
    #[error("usage: {0}")]
    Usage(String),
    /// A required input artifact is missing.
    #[error("missing dependency: {0}")]
    Dependency(String),
    /// Another run holds the output directory.
    #[error("output directory busy: {0}")]
    Busy(String),
    #[error(transparent)]
    Core(#[from] survey_dcn::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Category name printed with the error.
    pub fn category(&self) -> &'static str {
        use survey_dcn::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Dependency(_) => "dependency",
            CliError::Busy(_) => "busy",
            CliError::Core(e) => match e {
                E::Io { .. } => "io",
                E::Config(_) | E::Unsupported(_) | E::FilterConflict(_) | E::MechanismInfeasible(_) => "usage",
                E::NonFinite(_)
                | E::Numerical(_)
                | E::SingularFit(_)
                | E::UndefinedAuc
                | E::UndefinedCorrelation
                | E::DegenerateImportance => "numerical",
                _ => "data",
            },
        }
    }

    /// Exit status per category (sysexits-style where one fits).
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.category() {
            "usage" => 64,
            "data" => 65,
            "dependency" => 66,
            "numerical" => 70,
            "busy" => 75,
            _ => 74,
        })
    }
}
