//! Demonstrations: records, frames, downsampling, augmentation and storage.

mod fps;
mod frames;
mod generate;
mod io;
mod record;

pub use fps::{fps_downsample, gather};
pub use frames::{
    augment_zrot, center_frames, frame_example, mean, rotate_about, FrameInfo, Framed, SceneFrame,
};
pub use generate::{generate_demos, ClothSource, GenConfig};
pub use io::{load_dataset, save_dataset, DemoSet, FORMAT_VERSION, MANIFEST};
pub use record::{compute_gt_displacements, displacements, DemoRecord, RecordMeta};
