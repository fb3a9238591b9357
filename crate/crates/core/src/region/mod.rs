//! Superpixel segmentation and the spatial region graph.

mod graph;
mod image;
mod slic;

pub use graph::{
    build_adjacency, parse_graph_text, region_feature, spatial_distance, Edge, Metric, Pixel, Region,
    RegionGraph, RegionRecord,
};
pub use image::{write_heat_pgm, write_label_pgm, Image};
pub use slic::{segment_slic, slic_labels, SlicParams};

pub(crate) use graph::centroid_distance;
