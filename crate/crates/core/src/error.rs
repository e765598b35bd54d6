use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are grouped by what the caller can do about them: bad input
/// (fix the file or flags), numerical aborts during training, and format
/// errors on serialized artifacts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("document `{doc_id}`: span [{start}, {end}) is out of bounds for text of length {len}")]
    SpanBounds {
        doc_id: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("document `{doc_id}`: spans [{first_start}, {first_end}) and [{second_start}, {second_end}) overlap")]
    OverlappingSpans {
        doc_id: String,
        first_start: usize,
        first_end: usize,
        second_start: usize,
        second_end: usize,
    },

    #[error("document `{doc_id}`: token [{start}, {end}) overlaps spans with different tags")]
    AmbiguousToken {
        doc_id: String,
        start: usize,
        end: usize,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("missing embedding for {0}")]
    MissingEmbedding(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("misaligned sequences at document `{doc_id}`, sentence {sentence}")]
    Misaligned { doc_id: String, sentence: usize },

    #[error("non-finite objective at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("bad magic: not a {0} file")]
    BadMagic(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for errors raised by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Diverged { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
