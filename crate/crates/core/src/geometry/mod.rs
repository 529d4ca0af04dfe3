//! Segmentation primitives, segment graphs, the spectral basis and
//! positional encodings.

pub mod fourier;
pub mod labeling;
pub mod segment;
pub mod spectral;
pub mod subdivide;

pub use fourier::{fourier_features, FrequencyMatrix, FOURIER_DIM};
pub use labeling::{segment_adjacency, PartLabeling, SegmentGraph};
pub use segment::{super_segment, GranularityConfig};
pub use spectral::{cached_basis, laplace_beltrami_basis, SpectralBasis};
pub use subdivide::subdivide_to_budget;
