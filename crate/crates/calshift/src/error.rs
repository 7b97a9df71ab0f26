use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset error at line {line}: {msg}")]
    IngestAt { line: u64, msg: String },

    #[error("dataset error: {0}")]
    Ingest(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Cp(#[from] cp_core::CpError),

    #[error("{0}")]
    Ratio(#[from] ratio_meta::RatioMetaError),

    #[error("{0}")]
    Phy(#[from] phy_scenario::PhyError),

    #[error("{0}")]
    Select(#[from] context_select::SelectError),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}
