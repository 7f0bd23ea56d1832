//! Registration, mosaicking and evaluation toolkit for circular field-of-view
//! fetoscopic video.
//!
//! * [`homography`]: 3x3 projective algebra and chaining of pairwise transforms.
//! * [`warp`]: bilinear inverse-mapping warps and circular FOV masks.
//! * [`registration`]: masked pyramidal Lucas-Kanade pair and sequence registration.
//! * [`mosaic`]: canvas layout, blending and drift measurement.
//! * [`consistency`]: smoothed, overlap-gated SSIM consistency between frame pairs.
//! * [`seg_metrics`]: per-class IoU and fold/video aggregation.
//! * [`dataset_io`]: sequence directory layout, fold configuration, PNG codecs.
//! * [`synthetic`]: planar scenes with exact ground-truth trajectories.

pub mod consistency;
pub mod dataset_io;
pub mod error;
pub mod filter;
pub mod homography;
pub mod mosaic;
pub mod raster;
pub mod registration;
pub mod seg_metrics;
pub mod synthetic;
pub mod warp;

pub use error::{Error, Result};
pub use homography::{Homography, Point2};
pub use raster::{FovMask, Image, LabelMask};
