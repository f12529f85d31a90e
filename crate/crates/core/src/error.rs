//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A transition that carries positive weight in the data but zero probability
/// (or zero rate) under the model being evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpossibleTransition {
    /// Panel period index, when the offending datum comes from a discrete panel.
    pub period: Option<usize>,
    /// Entity id, when it comes from a continuously observed track.
    pub entity: Option<String>,
    pub from: String,
    pub to: String,
}

impl std::fmt::Display for ImpossibleTransition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.period, &self.entity) {
            (Some(u), _) => write!(f, "period {}: {} -> {}", u, self.from, self.to),
            (_, Some(e)) => write!(f, "entity {}: {} -> {}", e, self.from, self.to),
            _ => write!(f, "{} -> {}", self.from, self.to),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A value or structure violates a documented invariant.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// There is nothing to estimate from.
    #[error("empty input: {0}")]
    Empty(String),

    /// The log-likelihood is -inf: data contain transitions the model forbids.
    /// Carried as structured diagnostics so optimizers can reject the point.
    #[error("impossible transition(s) under the model: {}", format_cells(.cells))]
    ImpossibleTransitions { cells: Vec<ImpossibleTransition> },

    /// -H failed its symmetric positive-definite factorization; the listed
    /// allowed pairs sit in flat or unidentified directions.
    #[error("Fisher information is not positive definite; offending pairs (1-based): {pairs:?}")]
    NotPositiveDefinite { pairs: Vec<(usize, usize)> },

    /// Overflow, non-finite intermediate, or a failed factorization.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A sampler or iteration finished in a state its diagnostics reject.
    #[error("convergence diagnostic failure: {0}")]
    Convergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_cells(cells: &[ImpossibleTransition]) -> String {
    let shown: Vec<String> = cells.iter().take(5).map(|c| c.to_string()).collect();
    if cells.len() > 5 {
        format!("{} (+{} more)", shown.join("; "), cells.len() - 5)
    } else {
        shown.join("; ")
    }
}
