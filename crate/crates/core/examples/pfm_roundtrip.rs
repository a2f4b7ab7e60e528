//! Write a disparity map as PFM, read it back and check the round trip.
//!
//! cargo run --example pfm_roundtrip

use ppm_stereo::raster::{read_pfm_with_scale, write_pfm};
use ppm_stereo::FloatRaster;

fn main() -> ppm_stereo::Result<()> {
    let disp = FloatRaster::from_fn(5, 3, |x, y| x as f32 * 1.5 - y as f32 * 0.25)?;
    for scale in [-1.0f32, 1.0] {
        let bytes = write_pfm(&disp, scale)?;
        let header = bytes.iter().take_while(|&&b| b != b'\n').count();
        let (back, stored) = read_pfm_with_scale(&bytes)?;
        println!(
            "scale {scale:+}: {} bytes, header {:?}..., stored scale {stored}, identical: {}",
            bytes.len(),
            String::from_utf8_lossy(&bytes[..header]),
            back == disp
        );
    }
    Ok(())
}
