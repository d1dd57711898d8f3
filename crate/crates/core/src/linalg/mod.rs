//! Dimensionality reduction: variance-retaining PCA and exact t-SNE.

mod pca;
mod svd;
mod tsne;

pub use pca::{pca_retain, PcaResult};
pub use svd::{thin_svd, ThinSvd};
pub use tsne::{project_2d, project_2d_with, tsne, TsneConfig, TsneOutput};
