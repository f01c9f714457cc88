use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("CPU frequency {f} GHz outside the fitted range [{min}, {max}]")]
    FrequencyOutOfRange { f: f64, min: f64, max: f64 },

    #[error("non-positive data rate {0} Mbps")]
    NonPositiveRate(f64),

    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("frame has zero intensity variance")]
    DegenerateFrame,

    #[error("empty history")]
    EmptyHistory,

    #[error("latency bounds unreachable within the bandwidth budget for clients {clients:?}")]
    Infeasible { clients: Vec<usize> },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image decode error: {0}")]
    Image(#[from] image::ImageError),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
