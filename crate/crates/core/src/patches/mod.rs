//! Images, patch extraction and synthetic datasets.

mod crosses;
mod extract;
mod image;
mod montage;
mod rotate;
mod table;
mod textures;

pub use crosses::{ridge_template, synth_crosses, synth_crosses_at};
pub use extract::{extract_patches, extract_patches_tagged, Origin, PatchSet, FLAT_NORM};
pub use image::{decode_pgm, encode_pgm, load_pgm, save_pgm, Image};
pub use montage::montage;
pub use rotate::{disk_diameter, rotate_image};
pub use table::{read_patches_csv, write_patches_csv};
pub use textures::{
    oriented_image, synth_textures, LabeledImage, LabeledImageSet, Split, TEST_ANGLES_DEG,
};
