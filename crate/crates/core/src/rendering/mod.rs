//! Camera rigs, raycasting and frame compositing.

pub mod camera;
pub mod composite;
pub mod export;
pub mod raycast;

pub use camera::{CameraId, CameraNode, CameraPose, CameraRig, Motion, MotionAxis, RigError};
pub use composite::{composite_frame, median_filter3, CompositeOptions, Overlay, RgbFrame};
pub use raycast::{cast_ray, raycast, Intrinsics, Projection, Ray, RaycastOptions, RaycastResult};
pub use export::{decode_depth_pgm, decode_png, depth_to_mm, encode_depth_pgm, encode_png, ImageIoError};
