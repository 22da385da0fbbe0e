//! Synthetic inputs shared by the benchmarks.

use nnround_core::PixelBuffer;

/// A deterministic gray test pattern with edges and texture.
pub fn test_pattern(width: usize, height: usize) -> PixelBuffer {
    let samples = (0..height)
        .flat_map(|y| {
            (0..width).map(move |x| {
                let checker = if (x / 16 + y / 16) % 2 == 0 { 64 } else { 0 };
                ((x * 3 + y * 5) % 128 + checker) as u8
            })
        })
        .collect();
    PixelBuffer::gray(width, height, samples).expect("valid dimensions")
}
