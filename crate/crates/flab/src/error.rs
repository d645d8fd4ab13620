use std::fmt;

/// Everything that can go wrong across the crate, in one enum so the CLI can
/// map outcomes to exit codes without downcasting.
#[derive(Debug)]
pub enum Error {
    /// Leading t-exponent at or above the configured degree cap.
    GrowthTooLarge { a_lead: String, d_max: i64 },
    /// Classification would need an irrationality decision outside the closed
    /// coefficient forms (q or q·constant).
    Undecidable(String),
    /// A like-term merge would add two distinct named constants; the result
    /// has no representation in the closed coefficient class.
    MixedConstants { a: String, b: String },
    /// Requested precision cannot place the fractional part within 1e-10.
    PrecisionInsufficient { err_bound: f64, precision_bits: u32 },
    /// The integer part could not be decided even at the maximum working
    /// precision (fractional part too close to an integer).
    FloorUndecidable { n: u64, precision_bits: u32 },
    /// A weight is malformed: the averaging weight expression is not
    /// eventually increasing and unbounded, or a sampling window is empty or
    /// falls outside the unit interval.
    BadWeight(String),
    /// Measure specification violates its invariants (coefficient bound,
    /// conjugate symmetry, model degree range).
    Measure(String),
    /// Fourier-table measure queried outside its stored frequency range.
    FourierOutOfRange { k: i64, max_k: i64 },
    /// A Fourier-table measure was asked for a non-integer frequency.
    NonIntegerFrequency(String),
    /// A sequence that must be strictly increasing is not: checkpoint lists,
    /// Beatty slopes below 1, and the like. The message names the offender.
    NotIncreasing(String),
    /// Correlation query violates its invariants (factor count, shift range,
    /// sign values, or dilation).
    Query(String),
    /// The experiment's hypothesis on the input expression is not met;
    /// the note explains which one and why the run was refused.
    HypothesisUnmet(String),
    /// Checkpoint search exhausted its evaluation budget.
    SearchBudgetExceeded { budget: u64 },
    /// Expression mini-language syntax error, with byte offset into the input.
    Parse { offset: usize, msg: String },
    /// Job file violates the task schema. The message carries the line/column
    /// when the underlying JSON error provides one.
    Job(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GrowthTooLarge { a_lead, d_max } => {
                write!(f, "leading exponent {a_lead} is at or above the degree cap {d_max}")
            }
            Error::Undecidable(what) => {
                write!(f, "cannot decide irrationality: {what}")
            }
            Error::MixedConstants { a, b } => {
                write!(f, "merging terms would add distinct constants {a} and {b}, which leaves the coefficient class")
            }
            Error::PrecisionInsufficient { err_bound, precision_bits } => {
                write!(f, "error bound {err_bound:.3e} exceeds 1e-10 at {precision_bits} bits; raise precision_bits")
            }
            Error::FloorUndecidable { n, precision_bits } => {
                write!(f, "integer part at n={n} undecided even at {precision_bits} bits")
            }
            Error::BadWeight(w) => {
                write!(f, "weight {w} is not eventually increasing and unbounded")
            }
            Error::Measure(msg) => write!(f, "bad measure specification: {msg}"),
            Error::FourierOutOfRange { k, max_k } => {
                write!(f, "frequency {k} outside the stored Fourier range |k| <= {max_k}")
            }
            Error::NonIntegerFrequency(c) => {
                write!(f, "non-integer frequency {c} against a Fourier-table measure")
            }
            Error::NotIncreasing(what) => {
                write!(f, "invalid increasing sequence: {what}")
            }
            Error::Query(msg) => write!(f, "bad correlation query: {msg}"),
            Error::HypothesisUnmet(note) => write!(f, "hypothesis unmet: {note}"),
            Error::SearchBudgetExceeded { budget } => {
                write!(f, "checkpoint search exceeded its budget of {budget} evaluations")
            }
            Error::Parse { offset, msg } => write!(f, "parse error at byte {offset}: {msg}"),
            Error::Job(msg) => write!(f, "invalid job: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
