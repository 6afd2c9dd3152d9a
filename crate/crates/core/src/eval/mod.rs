pub mod datasets;
pub mod metrics;
pub mod pca;
pub mod proxy_db;
pub mod report;
pub mod experiments;
